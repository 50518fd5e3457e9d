//! Finite truncations of the lattice chain: construction, closed
//! communicating classes and exact stationary solves.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetics::StochasticKinetics;
use crate::model::{add, box_states, ReactionNetwork};
use crate::scc::tarjan;

/// A chain on a finite, indexed state set. Transitions that leave the set
/// are not part of the generator; their total rate is kept in `exit_rate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedChain {
    states: Vec<Vec<i64>>,
    #[serde(skip)]
    index: HashMap<Vec<i64>, usize>,
    /// Sorted by target, no self-loops, rates > 0.
    transitions: Vec<Vec<(usize, f64)>>,
    exit_rate: Vec<f64>,
}

impl TruncatedChain {
    /// Builds a chain from explicit transition rates; zero rates are dropped
    /// and duplicate (i, j) pairs are summed.
    pub fn from_rates(
        states: Vec<Vec<i64>>,
        rates: impl IntoIterator<Item = ((usize, usize), f64)>,
        exit_rate: Vec<f64>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyStateSet);
        }
        let mut index = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate state {s:?}")));
            }
        }
        if exit_rate.len() != states.len() {
            return Err(Error::LengthMismatch { expected: states.len(), got: exit_rate.len() });
        }
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); states.len()];
        for ((i, j), q) in rates {
            if i == j || q == 0.0 {
                continue;
            }
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::RateOverflow(states[i].clone()));
            }
            *acc[i].entry(j).or_insert(0.0) += q;
        }
        let transitions = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        Ok(TruncatedChain { states, index, transitions, exit_rate })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn transitions(&self, i: usize) -> &[(usize, f64)] {
        &self.transitions[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.transitions[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map_or(0.0, |p| self.transitions[i][p].1)
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rate[i]
    }

    pub fn boundary_exit(&self, i: usize) -> bool {
        self.exit_rate[i] > 0.0
    }

    /// Total in-set outflow of state i.
    pub fn outflow(&self, i: usize) -> f64 {
        self.transitions[i].iter().map(|&(_, q)| q).sum()
    }

    /// ‖wᵀQ‖∞ over `subset`, with Q the in-set generator restricted to it.
    pub fn generator_residual(&self, subset: &[usize], w: &[f64]) -> f64 {
        let pos: HashMap<usize, usize> = subset.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut flow = vec![0.0; subset.len()];
        for (k, &i) in subset.iter().enumerate() {
            for &(j, q) in &self.transitions[i] {
                if let Some(&l) = pos.get(&j) {
                    flow[k] -= w[k] * q;
                    flow[l] += w[k] * q;
                }
            }
        }
        flow.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Truncates the lattice chain of (net, kin) to `states`.
pub fn build_truncation(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    states: Vec<Vec<i64>>,
) -> Result<TruncatedChain> {
    if states.is_empty() {
        return Err(Error::EmptyStateSet);
    }
    let index: HashMap<&[i64], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let vectors: Vec<Vec<i64>> = (0..net.r()).map(|k| net.reaction_vector(k)).collect();
    let mut rates = Vec::new();
    let mut exit = vec![0.0; states.len()];
    for (i, x) in states.iter().enumerate() {
        if x.len() != net.n() {
            return Err(Error::LengthMismatch { expected: net.n(), got: x.len() });
        }
        for (k, v) in vectors.iter().enumerate() {
            let q = kin.rate(net, k, x);
            if q == 0.0 {
                continue;
            }
            if !q.is_finite() {
                return Err(Error::RateOverflow(x.clone()));
            }
            let next = add(x, v);
            match index.get(next.as_slice()) {
                Some(&j) => rates.push(((i, j), q)),
                None => exit[i] += q,
            }
        }
    }
    TruncatedChain::from_rates(states, rates, exit)
}

pub fn build_box_truncation(net: &ReactionNetwork, kin: &dyn StochasticKinetics, box_max: i64) -> Result<TruncatedChain> {
    if box_max < 0 {
        return Err(Error::EmptyStateSet);
    }
    build_truncation(net, kin, box_states(net.n(), box_max))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IrreducibleDecomposition {
    /// Communicating classes (sorted state indices), ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// No transition to another class.
    pub terminal: Vec<bool>,
    /// Terminal and without boundary exits.
    pub closed: Vec<bool>,
}

impl IrreducibleDecomposition {
    pub fn closed_classes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&c| self.closed[c]).collect()
    }

    pub fn terminal_classes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&c| self.terminal[c]).collect()
    }

    pub fn class_of(&self, state: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.binary_search(&state).is_ok())
    }
}

pub fn decompose(chain: &TruncatedChain) -> IrreducibleDecomposition {
    let adj: Vec<Vec<usize>> = chain.transitions.iter().map(|t| t.iter().map(|&(j, _)| j).collect()).collect();
    let (comp, ncomp) = tarjan(&adj);
    let mut classes = vec![Vec::new(); ncomp];
    for (i, &c) in comp.iter().enumerate() {
        classes[c].push(i);
    }
    classes.sort_by_key(|c| c[0]);
    let mut label = vec![0; chain.len()];
    for (k, class) in classes.iter().enumerate() {
        for &i in class {
            label[i] = k;
        }
    }
    let terminal: Vec<bool> = classes
        .iter()
        .enumerate()
        .map(|(k, class)| class.iter().all(|&i| adj[i].iter().all(|&j| label[j] == k)))
        .collect();
    let closed = classes
        .iter()
        .zip(&terminal)
        .map(|(class, &t)| t && class.iter().all(|&i| !chain.boundary_exit(i)))
        .collect();
    IrreducibleDecomposition { classes, terminal, closed }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Grassmann–Taksar–Heyman elimination (subtraction-free).
    #[default]
    Gth,
    /// LU with partial pivoting, one balance equation replaced by Σπ = 1.
    Lu,
    /// Power iteration on the uniformised kernel.
    Power,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Solve terminal classes that have boundary exits, ignoring the exits.
    pub allow_boundary_exits: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryResult {
    pub class_id: usize,
    /// State indices of the class, aligned with `pi`.
    pub states: Vec<usize>,
    pub pi: Vec<f64>,
    /// ‖πᵀQ‖∞ on the class.
    pub residual: f64,
    pub method: SolveMethod,
    /// Probability flux through discarded boundary exits (0 for closed classes).
    pub exit_flux: f64,
}

/// Residual level above which the primary method falls back to power iteration.
pub const SOLVE_TOL: f64 = 1e-10;

/// Solves πᵀQ = 0, Σπ = 1 on one terminal class.
pub fn solve_stationary(
    chain: &TruncatedChain,
    dec: &IrreducibleDecomposition,
    class_id: usize,
    opts: SolveOptions,
) -> Result<StationaryResult> {
    let class = dec
        .classes
        .get(class_id)
        .ok_or_else(|| Error::InvalidArgument(format!("no class {class_id}")))?;
    let allowed = if opts.allow_boundary_exits { dec.terminal[class_id] } else { dec.closed[class_id] };
    if !allowed {
        return Err(Error::ClassNotClosed(class_id));
    }
    let k = class.len();
    let pos: HashMap<usize, usize> = class.iter().enumerate().map(|(a, &i)| (i, a)).collect();
    let mut rates = vec![vec![0.0; k]; k];
    for (a, &i) in class.iter().enumerate() {
        for &(j, q) in chain.transitions(i) {
            if let Some(&b) = pos.get(&j) {
                rates[a][b] = q;
            }
        }
    }
    let mut method = opts.method;
    let mut pi = match method {
        SolveMethod::Gth => gth_stationary(&rates),
        SolveMethod::Lu => lu_stationary(&rates).unwrap_or_else(|| vec![f64::NAN; k]),
        SolveMethod::Power => power_stationary(&rates),
    };
    let mut residual = residual_of(&rates, &pi);
    if (residual.is_nan() || residual > SOLVE_TOL) && method != SolveMethod::Power {
        let alt = power_stationary(&rates);
        let alt_res = residual_of(&rates, &alt);
        if alt_res < residual || residual.is_nan() {
            pi = alt;
            residual = alt_res;
            method = SolveMethod::Power;
        }
    }
    if residual.is_nan() || residual > SOLVE_TOL {
        return Err(Error::SolveFailed(residual));
    }
    let exit_flux = class.iter().zip(&pi).map(|(&i, p)| p * chain.exit_rate(i)).sum();
    Ok(StationaryResult { class_id, states: class.clone(), pi, residual, method, exit_flux })
}

fn residual_of(rates: &[Vec<f64>], pi: &[f64]) -> f64 {
    let k = rates.len();
    let mut flow = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            if i != j && rates[i][j] > 0.0 {
                flow[i] -= pi[i] * rates[i][j];
                flow[j] += pi[i] * rates[i][j];
            }
        }
    }
    flow.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// GTH state reduction for an irreducible rate matrix (diagonal ignored).
/// Every operation is an addition, multiplication or division of
/// non-negative numbers, so small probabilities keep full relative accuracy.
pub(crate) fn gth_stationary(rates: &[Vec<f64>]) -> Vec<f64> {
    let k = rates.len();
    if k == 0 {
        return Vec::new();
    }
    let mut p: Vec<Vec<f64>> = rates.to_vec();
    for (i, row) in p.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for n in (1..k).rev() {
        let s: f64 = p[n][..n].iter().sum();
        for i in 0..n {
            p[i][n] /= s;
        }
        for i in 0..n {
            let pin = p[i][n];
            if pin == 0.0 {
                continue;
            }
            for j in 0..n {
                if i != j {
                    let add = pin * p[n][j];
                    p[i][j] += add;
                }
            }
        }
    }
    let mut pi = vec![0.0; k];
    pi[0] = 1.0;
    for n in 1..k {
        pi[n] = (0..n).map(|i| pi[i] * p[i][n]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter().map(|v| v / total).collect()
}

fn lu_stationary(rates: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = rates.len();
    // Qᵀ π = 0 with the last equation replaced by Σπ = 1
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                a[(j, i)] += rates[i][j];
                a[(i, i)] -= rates[i][j];
            }
        }
    }
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    Some(x.iter().map(|v| v.max(0.0)).collect())
}

fn power_stationary(rates: &[Vec<f64>]) -> Vec<f64> {
    let k = rates.len();
    let out: Vec<f64> = (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| rates[i][j]).sum()).collect();
    let lambda = 1.05 * out.iter().cloned().fold(0.0, f64::max);
    if lambda == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..200_000 {
        let mut next: Vec<f64> = (0..k).map(|i| pi[i] * (1.0 - out[i] / lambda)).collect();
        for i in 0..k {
            for j in 0..k {
                if i != j && rates[i][j] > 0.0 {
                    next[j] += pi[i] * rates[i][j] / lambda;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let diff = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

/// Total-variation distance between two distributions on lattice states.
pub fn total_variation(p: &BTreeMap<Vec<i64>, f64>, q: &BTreeMap<Vec<i64>, f64>) -> f64 {
    let mut sum = 0.0;
    for (x, a) in p {
        sum += (a - q.get(x).copied().unwrap_or(0.0)).abs();
    }
    for (x, b) in q {
        if !p.contains_key(x) {
            sum += b.abs();
        }
    }
    0.5 * sum
}

impl StationaryResult {
    /// π keyed by lattice state.
    pub fn distribution(&self, chain: &TruncatedChain) -> BTreeMap<Vec<i64>, f64> {
        self.states.iter().zip(&self.pi).map(|(&i, &p)| (chain.states()[i].clone(), p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_network;

    fn cycle3() -> TruncatedChain {
        TruncatedChain::from_rates(
            vec![vec![0], vec![1], vec![2]],
            [((0, 1), 1.0), ((1, 2), 1.0), ((2, 0), 1.0)],
            vec![0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn uniform_on_symmetric_cycle() {
        let chain = cycle3();
        let dec = decompose(&chain);
        assert_eq!(dec.classes, vec![vec![0, 1, 2]]);
        assert_eq!(dec.closed, vec![true]);
        for method in [SolveMethod::Gth, SolveMethod::Lu, SolveMethod::Power] {
            let res = solve_stationary(&chain, &dec, 0, SolveOptions { method, ..Default::default() }).unwrap();
            for p in &res.pi {
                assert!((p - 1.0 / 3.0).abs() < 1e-12, "{method:?}");
            }
        }
    }

    #[test]
    fn triangle_box_truncation() {
        let p = parse_network("0 -> A+B ; 1\nA+B -> A ; 1\nA -> 0 ; 1").unwrap();
        let chain = build_box_truncation(&p.network, &p.kinetics, 2).unwrap();
        assert_eq!(chain.len(), 9);
        let (o, d) = (chain.index_of(&[0, 0]).unwrap(), chain.index_of(&[1, 1]).unwrap());
        assert_eq!(chain.rate(o, d), 1.0);
        let top = chain.index_of(&[2, 2]).unwrap();
        assert!(chain.boundary_exit(top));
        assert_eq!(chain.exit_rate(top), 1.0);
        assert!(build_truncation(&p.network, &p.kinetics, vec![]).is_err());
    }

    #[test]
    fn birth_death_truncation_rates() {
        let p = parse_network("0 -> A ; 1\n3A -> 2A ; 1").unwrap();
        let chain = build_truncation(&p.network, &p.kinetics, (0..=6).map(|m| vec![m]).collect()).unwrap();
        for m in 0..6usize {
            assert_eq!(chain.rate(m, m + 1), 1.0);
        }
        for m in 1..=6usize {
            let expected = if m >= 3 { (m * (m - 1) * (m - 2)) as f64 } else { 0.0 };
            assert_eq!(chain.rate(m, m - 1), expected);
        }
        let dec = decompose(&chain);
        assert_eq!(dec.classes, vec![vec![0], vec![1], vec![2, 3, 4, 5, 6]]);
        assert_eq!(dec.terminal, vec![false, false, true]);
        // the top state leaks to 7
        assert_eq!(dec.closed, vec![false, false, false]);
        assert!(dec.closed_classes().is_empty());
        assert!(solve_stationary(&chain, &dec, 2, SolveOptions::default()).is_err());
        let res = solve_stationary(&chain, &dec, 2, SolveOptions { allow_boundary_exits: true, ..Default::default() })
            .unwrap();
        assert!(res.exit_flux > 0.0);
    }

    #[test]
    fn gth_matches_lu_on_random_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = rng.gen_range(2..12);
            let mut rates = vec![vec![0.0; k]; k];
            for i in 0..k {
                rates[i][(i + 1) % k] = rng.gen_range(0.1..5.0);
                for j in 0..k {
                    if i != j && rng.gen_bool(0.3) {
                        rates[i][j] = rng.gen_range(0.1..5.0);
                    }
                }
            }
            let g = gth_stationary(&rates);
            let l = lu_stationary(&rates).unwrap();
            for (a, b) in g.iter().zip(&l) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(residual_of(&rates, &g) < 1e-12);
        }
    }

    #[test]
    fn gth_keeps_relative_accuracy_in_tails() {
        // birth-death chain with π(m+1)/π(m) = 1/(m+1)^3
        let k = 40;
        let mut rates = vec![vec![0.0; k]; k];
        for m in 0..k - 1 {
            rates[m][m + 1] = 1.0;
            rates[m + 1][m] = ((m + 1) as f64).powi(3);
        }
        let pi = gth_stationary(&rates);
        for m in 0..k - 1 {
            let ratio = pi[m + 1] / pi[m];
            let expected = 1.0 / ((m + 1) as f64).powi(3);
            assert!((ratio / expected - 1.0).abs() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn tv_distance() {
        let mut p = BTreeMap::new();
        p.insert(vec![0], 0.5);
        p.insert(vec![1], 0.5);
        let mut q = BTreeMap::new();
        q.insert(vec![1], 0.5);
        q.insert(vec![2], 0.5);
        assert!((total_variation(&p, &q) - 0.5).abs() < 1e-15);
    }
}
