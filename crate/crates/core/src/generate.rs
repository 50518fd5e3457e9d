//! Seeded random networks and DSL texts for property tests, benches and the
//! acceptance harness.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{deficiency, is_weakly_reversible};
use crate::kinetics::{Extension, KineticsKind, KineticsSpec, Theta, ThetaFamily};
use crate::model::{Complex, Reaction, ReactionNetwork};

const NAMES: [&str; 8] = ["A", "B", "C", "D", "X", "Y", "Z1", "P_2"];

fn species_names(n: usize) -> Vec<String> {
    NAMES[..n].iter().map(|s| s.to_string()).collect()
}

/// `m` distinct complexes with coefficients in 0..=max_coeff that together
/// mention every species.
fn random_complexes<R: Rng>(rng: &mut R, n: usize, m: usize, max_coeff: i64) -> Option<Vec<Vec<i64>>> {
    if ((max_coeff + 1) as f64).powi(n as i32) < m as f64 {
        return None;
    }
    for _ in 0..20 {
        let mut out: Vec<Vec<i64>> = Vec::with_capacity(m);
        let mut tries = 0;
        while out.len() < m && tries < 200 {
            tries += 1;
            let c: Vec<i64> = (0..n).map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=max_coeff) }).collect();
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.len() == m && (0..n).all(|i| out.iter().any(|c| c[i] != 0)) {
            return Some(out);
        }
    }
    None
}

/// A network with 1 ≤ n ≤ max_n species, 2 ≤ m ≤ max_m complexes and
/// coefficients ≤ 3. Every complex takes part in a reaction.
pub fn random_network<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> ReactionNetwork {
    assert!((1..=NAMES.len()).contains(&max_n) && max_m >= 2);
    loop {
        let n = rng.gen_range(1..=max_n);
        let m = rng.gen_range(2..=max_m);
        let Some(coeffs) = random_complexes(rng, n, m, 3) else { continue };
        let mut reactions: Vec<Reaction> = Vec::new();
        let mut push = |r: Reaction| {
            if !reactions.contains(&r) {
                reactions.push(r);
            }
        };
        for i in 0..m {
            let mut j = rng.gen_range(0..m - 1);
            if j >= i {
                j += 1;
            }
            if rng.gen_bool(0.5) {
                push(Reaction { source: i, target: j });
            } else {
                push(Reaction { source: j, target: i });
            }
        }
        for _ in 0..rng.gen_range(0..=m) {
            let (a, b) = (rng.gen_range(0..m), rng.gen_range(0..m));
            if a != b {
                push(Reaction { source: a, target: b });
            }
        }
        let complexes: Vec<Complex> = coeffs.into_iter().map(|c| Complex::new(c).expect("non-negative")).collect();
        if let Ok(net) = ReactionNetwork::new(species_names(n), complexes, reactions) {
            return net;
        }
    }
}

/// A weakly reversible network with deficiency zero: n ≤ 3 species, one or
/// two linkage classes, coefficients ≤ 2. Each class is a directed cycle,
/// sometimes with chords, so weak reversibility holds by construction.
pub fn random_weakly_reversible_deficiency_zero<R: Rng>(rng: &mut R) -> ReactionNetwork {
    loop {
        let n = rng.gen_range(1..=3);
        let ell = rng.gen_range(1..=2);
        let sizes: Vec<usize> = (0..ell).map(|_| rng.gen_range(2..=3)).collect();
        let m: usize = sizes.iter().sum();
        let Some(coeffs) = random_complexes(rng, n, m, 2) else { continue };
        let mut reactions = Vec::new();
        let mut start = 0;
        for &size in &sizes {
            let mut members: Vec<usize> = (start..start + size).collect();
            members.shuffle(rng);
            for k in 0..size {
                reactions.push(Reaction { source: members[k], target: members[(k + 1) % size] });
            }
            if size == 3 && rng.gen_bool(0.5) {
                reactions.push(Reaction { source: members[1], target: members[0] });
            }
            start += size;
        }
        let complexes: Vec<Complex> = coeffs.into_iter().map(|c| Complex::new(c).expect("non-negative")).collect();
        let Ok(net) = ReactionNetwork::new(species_names(n), complexes, reactions) else { continue };
        if is_weakly_reversible(&net) && deficiency(&net).is_ok_and(|d| d.delta == 0) {
            return net;
        }
    }
}

/// Rate constants drawn uniformly from [lo, hi].
pub fn random_kappa<R: Rng>(rng: &mut R, r: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..r).map(|_| rng.gen_range(lo..=hi)).collect()
}

fn random_theta<R: Rng>(rng: &mut R) -> Theta {
    match rng.gen_range(0..4) {
        0 | 1 => Theta::Linear,
        2 => Theta::saturating(rng.gen_range(1..=4)).expect("positive cap"),
        _ => {
            let len = rng.gen_range(1..=4);
            let values = (0..len).map(|_| (rng.gen_range(1..=40) as f64) / 8.0).collect();
            let ext = if rng.gen_bool(0.5) { Extension::Hold } else { Extension::Linear };
            Theta::table(values, ext).expect("positive table")
        }
    }
}

/// Random kinetics for `net`: rates with short decimal expansions, random θ
/// and a random stochastic kind.
pub fn random_kinetics<R: Rng>(rng: &mut R, net: &ReactionNetwork) -> KineticsSpec {
    let kappa = (0..net.r()).map(|_| rng.gen_range(1..=400) as f64 / 16.0).collect();
    let theta = ThetaFamily::new((0..net.n()).map(|_| random_theta(rng)).collect());
    let kind = if theta.is_all_linear() {
        *[KineticsKind::StochasticMassAction, KineticsKind::DeterministicMassAction, KineticsKind::StochasticProductForm]
            .choose(rng)
            .expect("non-empty")
    } else {
        KineticsKind::StochasticProductForm
    };
    KineticsSpec::new(kappa, theta, kind).expect("valid kinetics")
}

fn complex_text<R: Rng>(rng: &mut R, net: &ReactionNetwork, c: usize) -> String {
    let y = net.complex(c);
    if y.is_zero() {
        return "0".into();
    }
    let mut terms = Vec::new();
    for (i, &k) in y.iter().enumerate() {
        let name = &net.species()[i].name;
        match k {
            0 => {}
            1 => terms.push(name.clone()),
            // sometimes spell 2A as A + A
            2 if rng.gen_bool(0.3) => {
                terms.push(name.clone());
                terms.push(name.clone());
            }
            _ => terms.push(format!("{k}{name}")),
        }
    }
    let sep = if rng.gen_bool(0.5) { " + " } else { "+" };
    terms.join(sep)
}

/// A DSL text for a random network with varied but equivalent formatting:
/// spacing, comments, blank lines and repeated-species terms. Reversible
/// pairs are sometimes written with `<->`.
pub fn random_dsl<R: Rng>(rng: &mut R) -> String {
    let net = random_network(rng, 4, 8);
    let kin = random_kinetics(rng, &net);
    let mut out = String::new();
    if rng.gen_bool(0.3) {
        out.push_str("# generated network\n\n");
    }
    for (i, t) in kin.theta().iter().enumerate() {
        if !t.is_linear() || rng.gen_bool(0.1) {
            out.push_str(&format!("theta {} = {t}\n", net.species()[i].name));
        }
    }
    let default_kind =
        if kin.theta().is_all_linear() { KineticsKind::StochasticMassAction } else { KineticsKind::StochasticProductForm };
    if kin.kind() != default_kind || rng.gen_bool(0.2) {
        out.push_str(&format!("kinetics {}\n", kin.kind().keyword()));
    }
    let reactions = net.reactions();
    let mut done = vec![false; reactions.len()];
    for k in 0..reactions.len() {
        if done[k] {
            continue;
        }
        done[k] = true;
        let r = reactions[k];
        let src = complex_text(rng, &net, r.source);
        let tgt = complex_text(rng, &net, r.target);
        let reverse = (k + 1..reactions.len())
            .find(|&j| !done[j] && reactions[j].source == r.target && reactions[j].target == r.source);
        // `<->` only when the reverse comes next, so reaction order survives
        let line = match reverse {
            Some(j) if j == k + 1 && rng.gen_bool(0.7) => {
                done[j] = true;
                format!("{src} <-> {tgt} ; {}, {}", kin.kappa()[k], kin.kappa()[j])
            }
            _ => format!("{src} -> {tgt} ; {}", kin.kappa()[k]),
        };
        out.push_str(&line);
        if rng.gen_bool(0.1) {
            out.push_str("  # note");
        }
        out.push('\n');
        if rng.gen_bool(0.05) {
            out.push('\n');
        }
    }
    out
}
