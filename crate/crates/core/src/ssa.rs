//! Gillespie direct-method simulation with time-weighted occupancy.
//!
//! The generator is ChaCha8 seeded from a `u64` through `seed_from_u64`, so
//! a trajectory is reproducible bit for bit from (network, kinetics, x0,
//! t_end, seed).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetics::StochasticKinetics;
use crate::model::{add, ReactionNetwork};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SsaOptions {
    /// Leading fraction of [0, t_end] excluded from the statistics.
    pub burn_in: f64,
    /// Equal-length time batches for the batch-means standard error.
    pub batches: usize,
    pub record_trajectory: bool,
    /// Stop after this many events (reported as truncated).
    pub max_events: Option<u64>,
}

impl Default for SsaOptions {
    fn default() -> Self {
        SsaOptions { burn_in: 0.1, batches: 20, record_trajectory: false, max_events: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SsaResult {
    pub seed: u64,
    pub t_end: f64,
    pub events: u64,
    /// A state with zero total rate was reached.
    pub absorbed: bool,
    /// The event cap stopped the run before t_end.
    pub hit_event_cap: bool,
    /// Fraction of post-burn-in time spent in each state.
    pub occupancy: BTreeMap<Vec<i64>, f64>,
    /// Time-averaged species counts after burn-in.
    pub means: Vec<f64>,
    /// Batch-means standard error of `means`.
    pub std_errors: Vec<f64>,
    /// Jump times and the states entered, starting with (0, x0).
    pub trajectory: Option<Vec<(f64, Vec<i64>)>>,
}

struct Accumulator {
    start: f64,
    end: f64,
    batch_len: f64,
    occupancy: BTreeMap<Vec<i64>, f64>,
    batch_sums: Vec<Vec<f64>>,
}

impl Accumulator {
    /// Adds the holding interval [a, b) in state x.
    fn add(&mut self, x: &[i64], a: f64, b: f64) {
        let (a, b) = (a.max(self.start), b.min(self.end));
        if b <= a {
            return;
        }
        *self.occupancy.entry(x.to_vec()).or_insert(0.0) += b - a;
        let nb = self.batch_sums.len();
        let mut t = a;
        while t < b {
            let k = (((t - self.start) / self.batch_len) as usize).min(nb - 1);
            let stop = if k + 1 == nb { b } else { b.min(self.start + (k + 1) as f64 * self.batch_len) };
            let stop = if stop <= t { b } else { stop };
            for (s, &xi) in self.batch_sums[k].iter_mut().zip(x) {
                *s += xi as f64 * (stop - t);
            }
            t = stop;
        }
    }
}

pub fn simulate_ssa(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    x0: &[i64],
    t_end: f64,
    seed: u64,
    opts: SsaOptions,
) -> Result<SsaResult> {
    if x0.len() != net.n() {
        return Err(Error::LengthMismatch { expected: net.n(), got: x0.len() });
    }
    if x0.iter().any(|&v| v < 0) {
        return Err(Error::InvalidArgument("initial state must be non-negative".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument("t_end must be positive".into()));
    }
    if !(0.0..1.0).contains(&opts.burn_in) || opts.batches == 0 {
        return Err(Error::InvalidArgument("burn-in must lie in [0, 1) and batches must be positive".into()));
    }
    let vectors: Vec<Vec<i64>> = (0..net.r()).map(|k| net.reaction_vector(k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = opts.burn_in * t_end;
    let mut acc = Accumulator {
        start,
        end: t_end,
        batch_len: (t_end - start) / opts.batches as f64,
        occupancy: BTreeMap::new(),
        batch_sums: vec![vec![0.0; net.n()]; opts.batches],
    };
    let mut trajectory = opts.record_trajectory.then(|| vec![(0.0, x0.to_vec())]);
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut events = 0u64;
    let mut absorbed = false;
    let mut hit_event_cap = false;
    let mut rates = vec![0.0; net.r()];
    loop {
        let mut total = 0.0;
        for (k, slot) in rates.iter_mut().enumerate() {
            *slot = kin.rate(net, k, &x);
            total += *slot;
        }
        if !total.is_finite() {
            return Err(Error::RateOverflow(x));
        }
        if total == 0.0 {
            absorbed = true;
            acc.add(&x, t, t_end);
            break;
        }
        let u: f64 = 1.0 - rng.gen::<f64>();
        let dt = -u.ln() / total;
        if t + dt >= t_end {
            acc.add(&x, t, t_end);
            break;
        }
        acc.add(&x, t, t + dt);
        t += dt;
        let target = rng.gen::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = rates.len() - 1;
        for (k, &r) in rates.iter().enumerate() {
            cum += r;
            if target < cum && r > 0.0 {
                chosen = k;
                break;
            }
        }
        // guard against rounding landing on a zero-rate tail reaction
        while rates[chosen] == 0.0 {
            chosen -= 1;
        }
        x = add(&x, &vectors[chosen]);
        events += 1;
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t, x.clone()));
        }
        if opts.max_events.is_some_and(|cap| events >= cap) {
            hit_event_cap = true;
            break;
        }
    }

    let observed: f64 = acc.occupancy.values().sum();
    let occupancy: BTreeMap<Vec<i64>, f64> = if observed > 0.0 {
        acc.occupancy.iter().map(|(k, v)| (k.clone(), v / observed)).collect()
    } else {
        BTreeMap::new()
    };
    let mut means = vec![0.0; net.n()];
    for (state, w) in &occupancy {
        for (m, &v) in means.iter_mut().zip(state) {
            *m += w * v as f64;
        }
    }
    let b = opts.batches as f64;
    let std_errors = (0..net.n())
        .map(|i| {
            if opts.batches < 2 {
                return f64::NAN;
            }
            let batch: Vec<f64> = acc.batch_sums.iter().map(|s| s[i] / acc.batch_len).collect();
            let mean = batch.iter().sum::<f64>() / b;
            let var = batch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
            (var / b).sqrt()
        })
        .collect();
    Ok(SsaResult { seed, t_end, events, absorbed, hit_event_cap, occupancy, means, std_errors, trajectory })
}

/// Independent trajectories, one per seed, run in parallel.
pub fn simulate_ensemble(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    x0: &[i64],
    t_end: f64,
    seeds: &[u64],
    opts: SsaOptions,
) -> Vec<Result<SsaResult>> {
    par::map(seeds, |&s| simulate_ssa(net, kin, x0, t_end, s, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_network;

    #[test]
    fn triangle_marginals_are_poisson() {
        let p = parse_network("0 -> A+B ; 1\nA+B -> A ; 1\nA -> 0 ; 1").unwrap();
        let res = simulate_ssa(&p.network, &p.kinetics, &[0, 0], 1e4, 42, SsaOptions::default()).unwrap();
        assert!(!res.absorbed);
        for (m, se) in res.means.iter().zip(&res.std_errors) {
            assert!((m - 1.0).abs() <= 3.0 * se, "mean {m} se {se}");
            assert!(*se > 0.0 && *se < 0.1);
        }
        let total: f64 = res.occupancy.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = parse_network("0 -> A ; 2\nA -> 0 ; 1").unwrap();
        let opts = SsaOptions { record_trajectory: true, ..Default::default() };
        let a = simulate_ssa(&p.network, &p.kinetics, &[0], 100.0, 7, opts).unwrap();
        let b = simulate_ssa(&p.network, &p.kinetics, &[0], 100.0, 7, opts).unwrap();
        assert_eq!(a, b);
        let c = simulate_ssa(&p.network, &p.kinetics, &[0], 100.0, 8, opts).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn absorbing_start_stays_put() {
        let p = parse_network("A -> 0 ; 1").unwrap();
        let res = simulate_ssa(&p.network, &p.kinetics, &[0], 10.0, 1, SsaOptions::default()).unwrap();
        assert!(res.absorbed);
        assert_eq!(res.events, 0);
        assert_eq!(res.occupancy.get(&vec![0]), Some(&1.0));
    }

    #[test]
    fn birth_death_mean_matches_recursion() {
        let p = parse_network("0 -> A ; 1\n3A -> 2A ; 1").unwrap();
        let mut w = vec![0.0; 40];
        w[2] = 1.0;
        for m in 2..39 {
            w[m + 1] = w[m] / ((m + 1) * m * (m - 1)) as f64;
        }
        let total: f64 = w.iter().sum();
        let mean: f64 = w.iter().enumerate().map(|(m, v)| m as f64 * v / total).sum();
        let res = simulate_ssa(&p.network, &p.kinetics, &[2], 2e4, 5, SsaOptions::default()).unwrap();
        assert!((res.means[0] - mean).abs() <= 3.0 * res.std_errors[0], "{} vs {mean}", res.means[0]);
    }

    #[test]
    fn ensemble_is_order_preserving() {
        let p = parse_network("0 -> A ; 1\nA -> 0 ; 1").unwrap();
        let runs = simulate_ensemble(&p.network, &p.kinetics, &[0], 50.0, &[1, 2, 3], SsaOptions::default());
        let seeds: Vec<u64> = runs.into_iter().map(|r| r.unwrap().seed).collect();
        assert_eq!(seeds, vec![1, 2, 3]);
    }

    #[test]
    fn invalid_arguments() {
        let p = parse_network("0 -> A ; 1").unwrap();
        assert!(simulate_ssa(&p.network, &p.kinetics, &[0, 0], 1.0, 0, SsaOptions::default()).is_err());
        assert!(simulate_ssa(&p.network, &p.kinetics, &[0], 0.0, 0, SsaOptions::default()).is_err());
        assert!(simulate_ssa(&p.network, &p.kinetics, &[-1], 1.0, 0, SsaOptions::default()).is_err());
    }
}
