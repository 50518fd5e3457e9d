//! Copies of the reaction graph embedded in the lattice, their node balance
//! with respect to a measure, the chains they induce, and checkers for the
//! equivalences between node-balanced copies and complex-balanced measures.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::balance::{
    is_complex_balanced_measure, is_stationary_measure, relative_residual, BalanceCheck, LatticeMeasure,
    Tolerance, Violation,
};
use crate::ctmc::{decompose, TruncatedChain};
use crate::error::{Error, Result};
use crate::graph::linkage_classes;
use crate::kinetics::{KineticsSpec, StochasticKinetics};
use crate::model::{add, box_states, dominates, grid_states, monomial_pow, sub, ReactionNetwork};
use crate::par;

/// f(y) = y + offsets[class(y)]; one lattice offset per linkage class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Copy {
    pub offsets: Vec<Vec<i64>>,
    /// Image of every complex, indexed like the network's complexes.
    pub images: Vec<Vec<i64>>,
}

impl Copy {
    pub fn from_offsets(net: &ReactionNetwork, offsets: Vec<Vec<i64>>) -> Result<Self> {
        let lc = linkage_classes(net);
        if offsets.len() != lc.num_classes {
            return Err(Error::LengthMismatch { expected: lc.num_classes, got: offsets.len() });
        }
        if let Some(h) = offsets.iter().find(|h| h.len() != net.n()) {
            return Err(Error::LengthMismatch { expected: net.n(), got: h.len() });
        }
        Self::build(net, &lc.class_of, offsets)
    }

    fn build(net: &ReactionNetwork, class_of: &[usize], offsets: Vec<Vec<i64>>) -> Result<Self> {
        let images: Vec<Vec<i64>> =
            (0..net.m()).map(|c| add(net.complex(c), &offsets[class_of[c]])).collect();
        if let Some(bad) = images.iter().find(|x| x.iter().any(|&v| v < 0)) {
            return Err(Error::NegativeImage(bad.clone()));
        }
        let copy = Copy { offsets, images };
        for (k, r) in net.reactions().iter().enumerate() {
            debug_assert_eq!(sub(&copy.images[r.target], &copy.images[r.source]), net.reaction_vector(k));
        }
        Ok(copy)
    }

    /// f + v.
    pub fn translate(&self, v: &[i64]) -> Result<Self> {
        let images: Vec<Vec<i64>> = self.images.iter().map(|x| add(x, v)).collect();
        if let Some(bad) = images.iter().find(|x| x.iter().any(|&c| c < 0)) {
            return Err(Error::NegativeImage(bad.clone()));
        }
        Ok(Copy { offsets: self.offsets.iter().map(|h| add(h, v)).collect(), images })
    }

    pub fn is_injective(&self) -> bool {
        let distinct: BTreeSet<&Vec<i64>> = self.images.iter().collect();
        distinct.len() == self.images.len()
    }

    /// Distinct image points in lexicographic order.
    pub fn nodes(&self) -> Vec<Vec<i64>> {
        let set: BTreeSet<Vec<i64>> = self.images.iter().cloned().collect();
        set.into_iter().collect()
    }

    pub fn image(&self, complex: usize) -> &[i64] {
        &self.images[complex]
    }

    /// Every image coordinate satisfies `0 <= x_i <= hi`.
    pub fn fits_box(&self, hi: i64) -> bool {
        self.images.iter().all(|x| x.iter().all(|&v| v <= hi))
    }

    /// Some image point lies in [0, hi]^n.
    pub fn intersects_box(&self, hi: i64) -> bool {
        self.images.iter().any(|x| x.iter().all(|&v| v <= hi))
    }
}

/// The copy f = ι + (x − y) mapping complex `y` to `x`.
pub fn translation_copy(net: &ReactionNetwork, y: usize, x: &[i64]) -> Result<Copy> {
    if x.len() != net.n() {
        return Err(Error::LengthMismatch { expected: net.n(), got: x.len() });
    }
    let source = net.complex(y);
    if !dominates(x, source) {
        return Err(Error::NotDominating { state: x.to_vec(), complex: source.to_vec() });
    }
    let h = sub(x, source);
    let lc = linkage_classes(net);
    Copy::build(net, &lc.class_of, vec![h; lc.num_classes])
}

/// All copies whose images lie in [0, box_max]^n, lexicographic in the
/// offsets (class 0 most significant, last coordinate fastest).
pub fn enumerate_copies(net: &ReactionNetwork, box_max: i64, require_injective: bool) -> Vec<Copy> {
    if box_max < 0 {
        return Vec::new();
    }
    let lc = linkage_classes(net);
    let n = net.n();
    let mut per_class: Vec<Vec<Vec<i64>>> = Vec::with_capacity(lc.num_classes);
    for class in &lc.classes {
        let lo: Vec<i64> = (0..n).map(|i| -class.iter().map(|&c| net.complex(c)[i]).min().unwrap_or(0)).collect();
        let hi: Vec<i64> =
            (0..n).map(|i| box_max - class.iter().map(|&c| net.complex(c)[i]).max().unwrap_or(0)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Vec::new();
        }
        per_class.push(grid_states(&lo, &hi));
    }
    let mut out = Vec::new();
    let mut odometer = vec![0usize; per_class.len()];
    loop {
        let offsets: Vec<Vec<i64>> = odometer.iter().zip(&per_class).map(|(&i, opts)| opts[i].clone()).collect();
        let copy = Copy::build(net, &lc.class_of, offsets).expect("offset ranges keep images non-negative");
        if !require_injective || copy.is_injective() {
            out.push(copy);
        }
        let mut pos = per_class.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < per_class[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

/// Node balance of a copy: one equation per image point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeBalanceReport {
    pub balanced: bool,
    /// `complex` holds the smallest complex mapped to the node.
    pub nodes: Vec<Violation>,
    pub witness: Option<Violation>,
}

/// ν(x)·Σ_{f(y)=x} λ_{y→y'}(x) against Σ_{f(y)=x} ν(f(y'))·λ_{y'→y}(f(y')) at every x ∈ f(C).
pub fn is_node_balanced(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    f: &Copy,
    tol: Tolerance,
) -> Result<NodeBalanceReport> {
    let mut nodes = Vec::new();
    for x in f.nodes() {
        let mut out = 0.0;
        let mut rhs = 0.0;
        for (k, r) in net.reactions().iter().enumerate() {
            if f.images[r.source] == x {
                out += kin.rate(net, k, &x);
            }
            if f.images[r.target] == x {
                let from = &f.images[r.source];
                let rate = kin.rate(net, k, from);
                if rate > 0.0 {
                    rhs += nu.require(from)? * rate;
                }
            }
        }
        let lhs = if out == 0.0 { 0.0 } else { nu.require(&x)? * out };
        let complex = f.images.iter().position(|im| *im == x);
        nodes.push(Violation { rel_residual: relative_residual(lhs, rhs), state: x, complex, lhs, rhs });
    }
    let witness = nodes.iter().find(|v| !tol.accepts(v.lhs, v.rhs)).cloned();
    Ok(NodeBalanceReport { balanced: witness.is_none(), nodes, witness })
}

/// Every reaction carries positive ν-weighted flux between its embedded endpoints.
pub fn is_active_copy(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    f: &Copy,
) -> Result<bool> {
    for r in net.reactions() {
        let (x, x2) = (&f.images[r.source], &f.images[r.target]);
        let flux: f64 = net
            .reactions()
            .iter()
            .enumerate()
            .filter(|(_, q)| f.images[q.source] == *x && f.images[q.target] == *x2)
            .map(|(k, _)| kin.rate(net, k, x))
            .sum();
        if flux <= 0.0 || nu.require(x)? * flux <= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The chain W_f on f(C).
pub type CopyChain = TruncatedChain;

pub fn copy_chain(net: &ReactionNetwork, kin: &dyn StochasticKinetics, f: &Copy) -> Result<CopyChain> {
    union_chain(net, kin, std::slice::from_ref(f))
}

/// Chain on the union of copy images with q(x, x') summed over copies and
/// reactions mapped onto the edge x → x'. Closed by construction.
pub fn union_chain(net: &ReactionNetwork, kin: &dyn StochasticKinetics, copies: &[Copy]) -> Result<TruncatedChain> {
    if copies.is_empty() {
        return Err(Error::EmptyStateSet);
    }
    let states: BTreeSet<Vec<i64>> = copies.iter().flat_map(|f| f.images.iter().cloned()).collect();
    let states: Vec<Vec<i64>> = states.into_iter().collect();
    let index = |x: &[i64]| states.binary_search_by(|s| s.as_slice().cmp(x)).expect("image is a state");
    let mut rates = Vec::new();
    for f in copies {
        for (k, r) in net.reactions().iter().enumerate() {
            let x = &f.images[r.source];
            let q = kin.rate(net, k, x);
            if q > 0.0 {
                rates.push(((index(x), index(&f.images[r.target])), q));
            }
        }
    }
    let exit = vec![0.0; states.len()];
    TruncatedChain::from_rates(states, rates, exit)
}

/// A copy failing node balance, with its first unbalanced node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CopyWitness {
    pub copy: Copy,
    pub node: Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CopySweep {
    pub checked: usize,
    pub all_balanced: bool,
    /// Lexicographically least unbalanced copy.
    pub witness: Option<CopyWitness>,
}

fn sweep(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    copies: &[Copy],
    tol: Tolerance,
) -> Result<CopySweep> {
    let reports = par::map(copies, |f| is_node_balanced(net, kin, nu, f, tol));
    let mut witness = None;
    for (f, rep) in copies.iter().zip(reports) {
        if let Some(node) = rep?.witness {
            if witness.is_none() {
                witness = Some(CopyWitness { copy: f.clone(), node });
            }
        }
    }
    Ok(CopySweep { checked: copies.len(), all_balanced: witness.is_none(), witness })
}

/// The three-way equivalence for arbitrary kinetics, evaluated on a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnyKineticsReport {
    pub box_max: i64,
    pub injective: CopySweep,
    pub all: CopySweep,
    pub complex_balance: BalanceCheck,
    /// The three conditions agree; `false` signals an implementation bug.
    pub agree: bool,
}

pub fn verify_any_kinetics(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    box_max: i64,
    tol: Tolerance,
) -> Result<AnyKineticsReport> {
    let all_copies = enumerate_copies(net, box_max, false);
    let injective_copies: Vec<Copy> = all_copies.iter().filter(|f| f.is_injective()).cloned().collect();
    let injective = sweep(net, kin, nu, &injective_copies, tol)?;
    let all = sweep(net, kin, nu, &all_copies, tol)?;
    let complex_balance = is_complex_balanced_measure(net, kin, nu, &box_states(net.n(), box_max), tol)?;
    let agree = injective.all_balanced == all.all_balanced && all.all_balanced == complex_balance.passed;
    Ok(AnyKineticsReport { box_max, injective, all, complex_balance, agree })
}

/// Σ_out κ against Σ_in c^{y'−y} κ at one complex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateIdentity {
    pub complex: usize,
    pub outflow: f64,
    pub inflow: f64,
    /// outflow − inflow: the coefficient multiplying (x+v)!/(x+v−y)!.
    pub residual: f64,
    pub holds: bool,
}

pub fn rate_identities(net: &ReactionNetwork, kappa: &[f64], c: &[f64], tol: Tolerance) -> Result<Vec<RateIdentity>> {
    (0..net.m())
        .map(|y| {
            let outflow: f64 = net.outgoing(y).iter().map(|&k| kappa[k]).sum();
            let mut inflow = 0.0;
            for &k in net.incoming(y) {
                let d = sub(net.source(k), net.complex(y));
                inflow += monomial_pow(c, &d)? * kappa[k];
            }
            Ok(RateIdentity { complex: y, outflow, inflow, residual: outflow - inflow, holds: tol.accepts(outflow, inflow) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingleCopyReport {
    pub box_max: i64,
    pub copies_searched: usize,
    /// First active, injective, node-balanced copy in enumeration order.
    pub found: Option<Copy>,
    pub rate_identities: Vec<RateIdentity>,
    pub identities_hold: bool,
    pub complex_balance: BalanceCheck,
    /// found ⇔ identities hold ⇔ complex balanced on the box.
    pub consistent: bool,
}

/// One active injective node-balanced copy against complex balance of the
/// product-form measure with parameter `c`.
pub fn verify_single_copy_theorem(
    net: &ReactionNetwork,
    spec: &KineticsSpec,
    c: &[f64],
    box_max: i64,
    tol: Tolerance,
) -> Result<SingleCopyReport> {
    let nu = crate::balance::product_form_measure(c, spec.theta())?;
    let copies = enumerate_copies(net, box_max, true);
    let hits = par::map(&copies, |f| -> Result<bool> {
        Ok(is_active_copy(net, spec, &nu, f)? && is_node_balanced(net, spec, &nu, f, tol)?.balanced)
    });
    let mut found = None;
    for (f, hit) in copies.iter().zip(hits) {
        if hit? {
            found = Some(f.clone());
            break;
        }
    }
    let identities = rate_identities(net, spec.kappa(), c, tol)?;
    let identities_hold = identities.iter().all(|r| r.holds);
    let complex_balance = is_complex_balanced_measure(net, spec, &nu, &box_states(net.n(), box_max), tol)?;
    let consistent = identities_hold == complex_balance.passed && (found.is_none() || complex_balance.passed);
    Ok(SingleCopyReport {
        box_max,
        copies_searched: copies.len(),
        found,
        rate_identities: identities,
        identities_hold,
        complex_balance,
        consistent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TranslationMode {
    /// v ∈ {0, …, side}^n.
    Full { side: i64 },
    /// v ∈ {0, …, d}^n with d the largest source order.
    Probe,
}

impl TranslationMode {
    pub fn default_full(net: &ReactionNetwork) -> Self {
        TranslationMode::Full { side: 2 * net.max_source_order() + 2 }
    }
}

/// The probe grid {0, …, d}^n. Any polynomial of total degree ≤ d vanishing
/// on it is zero (induction on the number of variables).
pub fn probe_grid(net: &ReactionNetwork) -> (i64, Vec<Vec<i64>>) {
    let d = net.max_source_order();
    (d, box_states(net.n(), d))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationReport {
    pub mode: TranslationMode,
    pub d: i64,
    /// ν is c^x/x! and the kinetics is mass-action.
    pub hypothesis_holds: bool,
    pub hypothesis_note: Option<String>,
    pub active: bool,
    pub translates_checked: usize,
    pub all_balanced: bool,
    /// Least v for which f + v is not node balanced.
    pub failing_translate: Option<Vec<i64>>,
    pub witness: Option<Violation>,
    pub rate_identities: Vec<RateIdentity>,
    /// Complex balance follows from the checks performed.
    pub cb_concluded: bool,
    /// Direct complex-balance check near the copy (only run under the hypothesis).
    pub cb_confirmed: Option<bool>,
}

pub fn verify_translation_family_theorem(
    net: &ReactionNetwork,
    spec: &KineticsSpec,
    nu: &LatticeMeasure,
    f: &Copy,
    mode: TranslationMode,
    tol: Tolerance,
) -> Result<TranslationReport> {
    let (d, grid) = match mode {
        TranslationMode::Probe => probe_grid(net),
        TranslationMode::Full { side } => (net.max_source_order(), box_states(net.n(), side.max(0))),
    };
    let note = if !spec.theta().is_all_linear() {
        Some("hypothesis ν-form violated: kinetics is not mass-action".to_string())
    } else if nu.poisson_parameters().is_none() {
        Some("hypothesis ν-form violated: ν is not of the form c^x/x!".to_string())
    } else {
        None
    };
    let hypothesis_holds = note.is_none();
    let active = is_active_copy(net, spec, nu, f)?;
    let reports = par::map(&grid, |v| -> Result<NodeBalanceReport> {
        is_node_balanced(net, spec, nu, &f.translate(v)?, tol)
    });
    let mut failing_translate = None;
    let mut witness = None;
    for (v, rep) in grid.iter().zip(reports) {
        let rep = rep?;
        if failing_translate.is_none() && !rep.balanced {
            failing_translate = Some(v.clone());
            witness = rep.witness;
        }
    }
    let all_balanced = failing_translate.is_none();
    let (rate_identities, cb_concluded, cb_confirmed) = match nu.poisson_parameters() {
        Some(c) if hypothesis_holds => {
            let ids = rate_identities(net, spec.kappa(), c, tol)?;
            // a box of side ≥ d contains the probe grid, so it certifies as well
            let poised = match mode {
                TranslationMode::Probe => true,
                TranslationMode::Full { side } => side >= d,
            };
            let reach = f.images.iter().flatten().copied().max().unwrap_or(0) + d;
            let check = is_complex_balanced_measure(net, spec, nu, &box_states(net.n(), reach), tol)?;
            (ids, all_balanced && active && poised, Some(check.passed))
        }
        _ => (Vec::new(), false, None),
    };
    Ok(TranslationReport {
        mode,
        d,
        hypothesis_holds,
        hypothesis_note: note,
        active,
        translates_checked: grid.len(),
        all_balanced,
        failing_translate,
        witness,
        rate_identities,
        cb_concluded,
        cb_confirmed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeReport {
    pub m1: i64,
    /// Stationarity of ν on [0, M1]^n, checked first.
    pub stationarity: BalanceCheck,
    pub copies: CopySweep,
    /// Complex balance on the cube, run when every copy is balanced.
    pub complex_balance: Option<BalanceCheck>,
}

/// Node balance of every injective copy meeting the cube [0, M1]^n.
pub fn verify_box_theorem(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    m1: i64,
    tol: Tolerance,
) -> Result<CubeReport> {
    if m1 < 0 {
        return Err(Error::InvalidArgument("M1 must be non-negative".into()));
    }
    let cube = box_states(net.n(), m1);
    let stationarity = is_stationary_measure(net, kin, nu, &cube, tol)?;
    let reach = net.complexes().iter().flat_map(|y| y.iter().copied()).max().unwrap_or(0);
    let copies: Vec<Copy> =
        enumerate_copies(net, m1 + reach, true).into_iter().filter(|f| f.intersects_box(m1)).collect();
    let sweep = sweep(net, kin, nu, &copies, tol)?;
    let complex_balance =
        if sweep.all_balanced { Some(is_complex_balanced_measure(net, kin, nu, &cube, tol)?) } else { None };
    Ok(CubeReport { m1, stationarity, copies: sweep, complex_balance })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedSetReport {
    /// Closed communicating classes of the box truncation.
    pub closed_sets: usize,
    /// Copies with image inside one of the sets.
    pub copies: CopySweep,
}

/// Node balance of all copies whose image lies in a closed communicating
/// class of the box truncation of side `box_max`.
pub fn verify_closed_set_condition(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    box_max: i64,
    tol: Tolerance,
) -> Result<ClosedSetReport> {
    let chain = crate::ctmc::build_box_truncation(net, kin, box_max)?;
    let dec = decompose(&chain);
    let sets: Vec<BTreeSet<&Vec<i64>>> = dec
        .closed_classes()
        .into_iter()
        .map(|c| dec.classes[c].iter().map(|&i| &chain.states()[i]).collect())
        .collect();
    let copies: Vec<Copy> = enumerate_copies(net, box_max, false)
        .into_iter()
        .filter(|f| sets.iter().any(|s| f.images.iter().all(|x| s.contains(x))))
        .collect();
    Ok(ClosedSetReport { closed_sets: sets.len(), copies: sweep(net, kin, nu, &copies, tol)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::product_form_measure;
    use crate::ctmc::{solve_stationary, SolveOptions};
    use crate::kinetics::ThetaFamily;
    use crate::parse::parse_network;
    use std::collections::BTreeMap;

    fn triangle() -> (ReactionNetwork, KineticsSpec) {
        let p = parse_network("0 -> A+B ; 1\nA+B -> A ; 1\nA -> 0 ; 1").unwrap();
        (p.network, p.kinetics)
    }

    fn birth_death() -> (ReactionNetwork, KineticsSpec) {
        let p = parse_network("0 -> A ; 1\n3A -> 2A ; 1").unwrap();
        (p.network, p.kinetics)
    }

    /// π(m+1)/π(m) = 1/((m+1)m(m−1)) on {2, …, n}, zero elsewhere.
    fn birth_death_pi(n: i64) -> LatticeMeasure {
        let mut w = vec![0.0; (n + 1) as usize];
        w[2] = 1.0;
        for m in 2..n as usize {
            w[m + 1] = w[m] / ((m + 1) * m * (m - 1)) as f64;
        }
        let total: f64 = w.iter().sum();
        let values: BTreeMap<Vec<i64>, f64> = (0..=n).map(|m| (vec![m], w[m as usize] / total)).collect();
        LatticeMeasure::tabulated(values).unwrap().with_default(0.0)
    }

    fn poisson(c: &[f64]) -> LatticeMeasure {
        product_form_measure(c, &ThetaFamily::linear(c.len())).unwrap()
    }

    #[test]
    fn translation_copies() {
        let (net, _) = triangle();
        let f = translation_copy(&net, 0, &[3, 2]).unwrap();
        assert_eq!(f.images, vec![vec![3, 2], vec![4, 3], vec![4, 2]]);
        let g = translation_copy(&net, 2, &[1, 0]).unwrap();
        assert_eq!(g.images, vec![vec![0, 0], vec![1, 1], vec![1, 0]]);
        assert!(g.is_injective());
        assert!(matches!(translation_copy(&net, 2, &[0, 5]), Err(Error::NotDominating { .. })));
    }

    #[test]
    fn enumeration_counts_match_brute_force() {
        let (net, _) = triangle();
        let copies = enumerate_copies(&net, 1, false);
        assert_eq!(copies.len(), 1);
        assert_eq!(copies[0].offsets, vec![vec![0, 0]]);
        assert_eq!(enumerate_copies(&net, 5, false).len(), 25);

        let intro = parse_network("A+B <-> 2C ; 1, 1\nA <-> B ; 1, 1").unwrap().network;
        for b in 0..4 {
            // brute force: offsets per class in [-b, b]^3 with images in the box
            let lc = linkage_classes(&intro);
            let mut count = 1;
            for class in &lc.classes {
                let valid = grid_states(&[-b; 3], &[b; 3])
                    .into_iter()
                    .filter(|h| class.iter().all(|&c| add(intro.complex(c), h).iter().all(|&v| (0..=b).contains(&v))))
                    .count();
                count *= valid;
            }
            assert_eq!(enumerate_copies(&intro, b, false).len(), count, "box {b}");
        }
        assert!(enumerate_copies(&intro, 1, false).is_empty());
    }

    #[test]
    fn enumeration_is_lexicographic_and_respects_copy_law() {
        let (net, _) = birth_death();
        let copies = enumerate_copies(&net, 6, false);
        let mut sorted = copies.clone();
        sorted.sort_by(|a, b| a.offsets.cmp(&b.offsets));
        assert_eq!(copies, sorted);
        for f in &copies {
            for (k, r) in net.reactions().iter().enumerate() {
                assert_eq!(sub(&f.images[r.target], &f.images[r.source]), net.reaction_vector(k));
            }
        }
        // class {3A, 2A} may shift down by two
        assert!(copies.iter().any(|f| f.offsets[1] == vec![-2]));
        assert!(copies.iter().any(|f| !f.is_injective()));
    }

    #[test]
    fn poisson_inclusion_copy_is_node_balanced() {
        let (net, spec) = triangle();
        let f = translation_copy(&net, 0, &[0, 0]).unwrap();
        let nu = poisson(&[1.0, 1.0]);
        let rep = is_node_balanced(&net, &spec, &nu, &f, Tolerance::default()).unwrap();
        assert!(rep.balanced);
        assert_eq!(rep.nodes.len(), 3);
        assert!(is_active_copy(&net, &spec, &nu, &f).unwrap());
    }

    #[test]
    fn birth_death_copy_is_node_balanced_but_generic_copy_is_not() {
        let (net, spec) = birth_death();
        let pi = birth_death_pi(60);
        let f = Copy::from_offsets(&net, vec![vec![2], vec![0]]).unwrap();
        assert_eq!(f.images, vec![vec![2], vec![3], vec![3], vec![2]]);
        assert!(!f.is_injective());
        assert!(is_node_balanced(&net, &spec, &pi, &f, Tolerance::default()).unwrap().balanced);
        assert!(is_active_copy(&net, &spec, &pi, &f).unwrap());
        // π(x) falls below the absolute tolerance past x ≈ 8, so stay low
        let g = translation_copy(&net, 0, &[4]).unwrap();
        let rep = is_node_balanced(&net, &spec, &pi, &g, Tolerance::default()).unwrap();
        assert!(!rep.balanced);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn zero_measure_makes_copy_inactive() {
        let (net, spec) = triangle();
        let f = translation_copy(&net, 0, &[0, 0]).unwrap();
        let mut values = BTreeMap::new();
        for x in box_states(2, 3) {
            values.insert(x.clone(), if x == vec![1, 1] { 0.0 } else { 1.0 });
        }
        let nu = LatticeMeasure::tabulated(values).unwrap();
        assert!(!is_active_copy(&net, &spec, &nu, &f).unwrap());
    }

    #[test]
    fn single_copy_chain_is_a_three_cycle() {
        let (net, spec) = triangle();
        let f = translation_copy(&net, 0, &[0, 0]).unwrap();
        let chain = copy_chain(&net, &spec, &f).unwrap();
        assert_eq!(chain.len(), 3);
        let i = |x: &[i64]| chain.index_of(x).unwrap();
        assert_eq!(chain.rate(i(&[0, 0]), i(&[1, 1])), 1.0);
        assert_eq!(chain.rate(i(&[1, 1]), i(&[1, 0])), 1.0);
        assert_eq!(chain.rate(i(&[1, 0]), i(&[0, 0])), 1.0);
        let dec = decompose(&chain);
        assert_eq!(dec.classes.len(), 1);
        assert!(dec.closed[0]);
        assert!(union_chain(&net, &spec, &[]).is_err());
    }

    #[test]
    fn union_chain_over_tiling_is_poisson() {
        let (net, spec) = triangle();
        let copies = enumerate_copies(&net, 6, false);
        let chain = union_chain(&net, &spec, &copies).unwrap();
        let dec = decompose(&chain);
        let closed = dec.closed_classes();
        assert_eq!(closed.len(), 1);
        let res = solve_stationary(&chain, &dec, closed[0], SolveOptions::default()).unwrap();
        let nu = poisson(&[1.0, 1.0]);
        let weights: Vec<f64> = res.states.iter().map(|&i| nu.eval(&chain.states()[i]).unwrap()).collect();
        let total: f64 = weights.iter().sum();
        for (p, w) in res.pi.iter().zip(&weights) {
            assert!((p - w / total).abs() < 1e-12);
        }
    }

    #[test]
    fn any_kinetics_agreement() {
        let (net, spec) = triangle();
        let rep = verify_any_kinetics(&net, &spec, &poisson(&[1.0, 1.0]), 6, Tolerance::default()).unwrap();
        assert!(rep.agree && rep.injective.all_balanced && rep.all.all_balanced && rep.complex_balance.passed);

        let (net, spec) = birth_death();
        let rep = verify_any_kinetics(&net, &spec, &birth_death_pi(60), 40, Tolerance::default()).unwrap();
        assert!(rep.agree);
        assert!(!rep.injective.all_balanced && !rep.all.all_balanced && !rep.complex_balance.passed);
        assert!(rep.injective.witness.unwrap().copy.is_injective());

        let rep = verify_any_kinetics(&net, &spec, &LatticeMeasure::zero(), 6, Tolerance::default()).unwrap();
        assert!(rep.agree && rep.all.all_balanced);
    }

    #[test]
    fn any_kinetics_with_rate_table() {
        let (net, spec) = triangle();
        let table = crate::kinetics::RateTable::tabulate(&net, &spec, &box_states(2, 8));
        let rep = verify_any_kinetics(&net, &table, &poisson(&[1.0, 1.0]), 6, Tolerance::default()).unwrap();
        assert!(rep.agree && rep.complex_balance.passed);
    }

    #[test]
    fn single_copy_theorem_examples() {
        let (net, spec) = triangle();
        let rep = verify_single_copy_theorem(&net, &spec, &[1.0, 1.0], 4, Tolerance::default()).unwrap();
        assert_eq!(rep.found.as_ref().unwrap().offsets, vec![vec![0, 0]]);
        assert!(rep.complex_balance.passed && rep.identities_hold && rep.consistent);

        let rep = verify_single_copy_theorem(&net, &spec, &[2.0, 2.0], 4, Tolerance::default()).unwrap();
        assert!(rep.found.is_none());
        assert!(!rep.complex_balance.passed && !rep.identities_hold && rep.consistent);
        let at_zero = &rep.rate_identities[0];
        assert_eq!((at_zero.outflow, at_zero.inflow), (1.0, 2.0));

        let (net, spec) = birth_death();
        for c in [0.5, 1.0, 3.0] {
            let rep = verify_single_copy_theorem(&net, &spec, &[c], 8, Tolerance::default()).unwrap();
            assert!(rep.found.is_none() && rep.consistent);
        }
    }

    #[test]
    fn translation_family_probe_mode() {
        let (net, spec) = triangle();
        let f = translation_copy(&net, 0, &[0, 0]).unwrap();
        let (d, grid) = probe_grid(&net);
        assert_eq!(d, 2);
        assert_eq!(grid.len(), 9);
        let rep = verify_translation_family_theorem(
            &net,
            &spec,
            &poisson(&[1.0, 1.0]),
            &f,
            TranslationMode::Probe,
            Tolerance::default(),
        )
        .unwrap();
        assert!(rep.hypothesis_holds && rep.active && rep.all_balanced && rep.cb_concluded);
        assert_eq!(rep.cb_confirmed, Some(true));

        // {0,1}^2 is too small to be poised for the degree-2 source A + B
        let rep = verify_translation_family_theorem(
            &net,
            &spec,
            &poisson(&[1.0, 1.0]),
            &f,
            TranslationMode::Full { side: 1 },
            Tolerance::default(),
        )
        .unwrap();
        assert!(rep.all_balanced && !rep.cb_concluded);
        assert_eq!(rep.translates_checked, 4);

        let rep = verify_translation_family_theorem(
            &net,
            &spec,
            &poisson(&[2.0, 2.0]),
            &f,
            TranslationMode::Probe,
            Tolerance::default(),
        )
        .unwrap();
        assert!(!rep.all_balanced && !rep.cb_concluded);
        assert_eq!(rep.failing_translate, Some(vec![0, 0]));
        assert_eq!(rep.cb_confirmed, Some(false));
    }

    #[test]
    fn translation_family_flags_wrong_measure_form() {
        let (net, spec) = birth_death();
        let f = Copy::from_offsets(&net, vec![vec![2], vec![0]]).unwrap();
        let rep = verify_translation_family_theorem(
            &net,
            &spec,
            &birth_death_pi(80),
            &f,
            TranslationMode::Full { side: 20 },
            Tolerance::default(),
        )
        .unwrap();
        assert!(rep.all_balanced && rep.active);
        assert!(!rep.hypothesis_holds && !rep.cb_concluded);
        assert!(rep.hypothesis_note.unwrap().contains("hypothesis ν-form violated"));

        for c in [0.5, 1.0, 2.0] {
            let rep = verify_translation_family_theorem(
                &net,
                &spec,
                &poisson(&[c]),
                &f,
                TranslationMode::Probe,
                Tolerance::default(),
            )
            .unwrap();
            assert_eq!(rep.d, 3);
            assert_eq!(rep.translates_checked, 4);
            assert!(!rep.all_balanced && !rep.cb_concluded);
        }
    }

    #[test]
    fn cube_condition() {
        let (net, spec) = triangle();
        let rep = verify_box_theorem(&net, &spec, &poisson(&[1.0, 1.0]), 4, Tolerance::default()).unwrap();
        assert!(rep.stationarity.passed && rep.copies.all_balanced);
        assert!(rep.complex_balance.unwrap().passed);

        let (net, spec) = birth_death();
        let rep = verify_box_theorem(&net, &spec, &birth_death_pi(60), 10, Tolerance::default()).unwrap();
        assert!(rep.stationarity.passed);
        assert!(!rep.copies.all_balanced && rep.copies.witness.is_some());

        let empty = ReactionNetwork::new(vec![], vec![], vec![]).unwrap();
        let spec = KineticsSpec::mass_action(vec![], 0).unwrap();
        let rep = verify_box_theorem(&empty, &spec, &LatticeMeasure::zero(), 3, Tolerance::default()).unwrap();
        assert!(rep.copies.all_balanced);
    }

    #[test]
    fn closed_sets_of_reversible_network() {
        // A <-> B conserves A + B, so every level set is closed
        let p = parse_network("A <-> B ; 1, 2").unwrap();
        let nu = poisson(&[2.0, 1.0]);
        let rep = verify_closed_set_condition(&p.network, &p.kinetics, &nu, 3, Tolerance::default()).unwrap();
        assert!(rep.closed_sets >= 4);
        assert!(rep.copies.checked > 0 && rep.copies.all_balanced);
    }
}
