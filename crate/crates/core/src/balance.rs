//! Complex balancing for deterministic states and lattice measures, the
//! product-form stationary measure, and stationarity checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ctmc::gth_stationary;
use crate::error::{Error, Result};
use crate::graph::{is_weakly_reversible, linkage_classes};
use crate::kinetics::{KineticsSpec, StochasticKinetics, ThetaFamily};
use crate::linalg::least_squares;
use crate::model::{is_nonnegative, ReactionNetwork};
use crate::par;

/// Balance-equation tolerance: `|lhs − rhs| ≤ abs + rel·max(|lhs|, |rhs|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rel: 1e-9 }
    }
}

impl Tolerance {
    pub fn accepts(&self, lhs: f64, rhs: f64) -> bool {
        (lhs - rhs).abs() <= self.abs + self.rel * lhs.abs().max(rhs.abs())
    }
}

pub fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Decade bucket of a relative residual; exact zeros go to -17.
fn decade(rel: f64) -> i32 {
    if rel <= 0.0 {
        -17
    } else {
        (rel.log10().floor() as i32).clamp(-16, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteadyState(pub Vec<f64>);

impl SteadyState {
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

/// A measure on Z^n_{≥0}. States with a negative coordinate have measure 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatticeMeasure {
    /// Values on a finite set; elsewhere `default`, or not evaluable if `None`.
    Tabulated { values: BTreeMap<Vec<i64>, f64>, default: Option<f64> },
    /// ν(x) = c^x ∏_i ∏_{j=1}^{x_i} 1/θ_i(j).
    ProductForm { c: Vec<f64>, theta: ThetaFamily },
}

impl LatticeMeasure {
    pub fn tabulated(values: BTreeMap<Vec<i64>, f64>) -> Result<Self> {
        if let Some((x, v)) = values.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("measure value {v} at {x:?} is not finite and non-negative")));
        }
        Ok(LatticeMeasure::Tabulated { values, default: None })
    }

    pub fn zero() -> Self {
        LatticeMeasure::Tabulated { values: BTreeMap::new(), default: Some(0.0) }
    }

    pub fn with_default(self, default: f64) -> Self {
        match self {
            LatticeMeasure::Tabulated { values, .. } => LatticeMeasure::Tabulated { values, default: Some(default) },
            other => other,
        }
    }

    pub fn eval(&self, x: &[i64]) -> Option<f64> {
        if !is_nonnegative(x) {
            return Some(0.0);
        }
        match self {
            LatticeMeasure::Tabulated { values, default } => values.get(x).copied().or(*default),
            LatticeMeasure::ProductForm { c, theta } => {
                let mut acc = 1.0;
                for (i, &xi) in x.iter().enumerate() {
                    let t = theta.get(i);
                    for j in 1..=xi {
                        acc *= c[i] / t.eval(j);
                    }
                }
                Some(acc)
            }
        }
    }

    pub(crate) fn require(&self, x: &[i64]) -> Result<f64> {
        self.eval(x).ok_or_else(|| Error::MeasureNotEvaluable(x.to_vec()))
    }

    /// `Some(c)` when the measure is c^x/x! (product form with linear θ).
    pub fn poisson_parameters(&self) -> Option<&[f64]> {
        match self {
            LatticeMeasure::ProductForm { c, theta } if theta.is_all_linear() => Some(c),
            _ => None,
        }
    }

    /// Reads `x_1,...,x_n,value` rows after a header row.
    pub fn from_csv(text: &str, n: usize) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(Error::InvalidArgument(format!("measure line {}: expected {} fields", lineno + 1, n + 1)));
            }
            let bad = || Error::InvalidArgument(format!("measure line {}: bad number", lineno + 1));
            let x = fields[..n].iter().map(|f| f.parse::<i64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            let v: f64 = fields[n].parse().map_err(|_| bad())?;
            values.insert(x, v);
        }
        LatticeMeasure::tabulated(values)
    }

    pub fn to_csv(&self, species: &[String], states: &[Vec<i64>]) -> String {
        let mut out = species.join(",");
        if !species.is_empty() {
            out.push(',');
        }
        out.push_str("nu\n");
        for x in states {
            let coords: Vec<String> = x.iter().map(i64::to_string).collect();
            let v = self.eval(x).map_or_else(|| "nan".to_string(), |v| format!("{v:e}"));
            if coords.is_empty() {
                out.push_str(&format!("{v}\n"));
            } else {
                out.push_str(&format!("{},{v}\n", coords.join(",")));
            }
        }
        out
    }
}

pub fn product_form_measure(c: &[f64], theta: &ThetaFamily) -> Result<LatticeMeasure> {
    if c.len() != theta.len() {
        return Err(Error::LengthMismatch { expected: theta.len(), got: c.len() });
    }
    if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("product-form measure needs c > 0".into()));
    }
    Ok(LatticeMeasure::ProductForm { c: c.to_vec(), theta: theta.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub state: Vec<i64>,
    /// Complex index for per-complex checks.
    pub complex: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_residual: f64,
}

/// Outcome of a pointwise balance check over a finite domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceCheck {
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    /// Largest relative residual.
    pub worst: Option<Violation>,
    /// First failing equation in domain order (the lexicographically least
    /// violator for lexicographic domains).
    pub witness: Option<Violation>,
    /// Count of equations per decade of relative residual (-17 = exact).
    pub histogram: BTreeMap<i32, usize>,
    pub tolerance: Tolerance,
}

impl BalanceCheck {
    pub(crate) fn collect(terms: Vec<Violation>, tol: Tolerance) -> Self {
        let mut check = BalanceCheck {
            passed: true,
            checked: terms.len(),
            failures: 0,
            max_abs_residual: 0.0,
            max_rel_residual: 0.0,
            worst: None,
            witness: None,
            histogram: BTreeMap::new(),
            tolerance: tol,
        };
        for t in terms {
            *check.histogram.entry(decade(t.rel_residual)).or_default() += 1;
            check.max_abs_residual = check.max_abs_residual.max((t.lhs - t.rhs).abs());
            if !tol.accepts(t.lhs, t.rhs) {
                check.passed = false;
                check.failures += 1;
                if check.witness.is_none() {
                    check.witness = Some(t.clone());
                }
            }
            if check.worst.as_ref().is_none_or(|w| t.rel_residual > w.rel_residual) {
                check.max_rel_residual = t.rel_residual;
                check.worst = Some(t);
            }
        }
        check
    }
}

/// Both sides of the global balance equation at `x`.
pub fn master_terms(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    x: &[i64],
) -> Result<(f64, f64)> {
    let out: f64 = (0..net.r()).map(|k| kin.rate(net, k, x)).sum();
    let lhs = if out == 0.0 { 0.0 } else { nu.require(x)? * out };
    let mut rhs = 0.0;
    for k in 0..net.r() {
        let prev: Vec<i64> = x.iter().zip(net.reaction_vector(k)).map(|(a, d)| a - d).collect();
        if !is_nonnegative(&prev) {
            continue;
        }
        let rate = kin.rate(net, k, &prev);
        if rate > 0.0 {
            rhs += nu.require(&prev)? * rate;
        }
    }
    Ok((lhs, rhs))
}

/// Both sides of the complex-balance equation for complex `y` at state `x`.
pub fn cb_terms(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    x: &[i64],
    y: usize,
) -> Result<(f64, f64)> {
    let out: f64 = net.outgoing(y).iter().map(|&k| kin.rate(net, k, x)).sum();
    let lhs = if out == 0.0 { 0.0 } else { nu.require(x)? * out };
    let target = net.complex(y);
    let mut rhs = 0.0;
    for &k in net.incoming(y) {
        let src = net.source(k);
        let from: Vec<i64> = x.iter().zip(src.iter()).zip(target.iter()).map(|((a, s), t)| a + s - t).collect();
        if !is_nonnegative(&from) {
            continue;
        }
        let rate = kin.rate(net, k, &from);
        if rate > 0.0 {
            rhs += nu.require(&from)? * rate;
        }
    }
    Ok((lhs, rhs))
}

/// Checks ν(x)Σλ(x) = Σ ν(x−Δ)λ(x−Δ) at every state of `domain`.
pub fn is_stationary_measure(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    domain: &[Vec<i64>],
    tol: Tolerance,
) -> Result<BalanceCheck> {
    let terms = par::map(domain, |x| {
        master_terms(net, kin, nu, x).map(|(lhs, rhs)| Violation {
            state: x.clone(),
            complex: None,
            lhs,
            rhs,
            rel_residual: relative_residual(lhs, rhs),
        })
    });
    Ok(BalanceCheck::collect(terms.into_iter().collect::<Result<_>>()?, tol))
}

/// Checks the per-complex balance of fluxes at every (state, complex) pair.
pub fn is_complex_balanced_measure(
    net: &ReactionNetwork,
    kin: &dyn StochasticKinetics,
    nu: &LatticeMeasure,
    domain: &[Vec<i64>],
    tol: Tolerance,
) -> Result<BalanceCheck> {
    let per_state = par::map(domain, |x| {
        (0..net.m())
            .map(|y| {
                cb_terms(net, kin, nu, x, y).map(|(lhs, rhs)| Violation {
                    state: x.clone(),
                    complex: Some(y),
                    lhs,
                    rhs,
                    rel_residual: relative_residual(lhs, rhs),
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut terms = Vec::with_capacity(domain.len() * net.m());
    for v in per_state {
        terms.extend(v?);
    }
    Ok(BalanceCheck::collect(terms, tol))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateBalanceReport {
    pub balanced: bool,
    /// out-flow − in-flow per complex.
    pub residuals: Vec<f64>,
    pub outflow: Vec<f64>,
    pub inflow: Vec<f64>,
    pub tol: f64,
}

/// Deterministic complex balance at c: for each complex, |out − in| ≤ tol·max(1, scale).
pub fn is_complex_balanced_state(
    net: &ReactionNetwork,
    spec: &KineticsSpec,
    c: &[f64],
    tol: f64,
) -> Result<StateBalanceReport> {
    if c.len() != net.n() {
        return Err(Error::LengthMismatch { expected: net.n(), got: c.len() });
    }
    let rates = (0..net.r()).map(|k| spec.det_rate(net, k, c)).collect::<Result<Vec<_>>>()?;
    let mut outflow = vec![0.0; net.m()];
    let mut inflow = vec![0.0; net.m()];
    for (k, r) in net.reactions().iter().enumerate() {
        outflow[r.source] += rates[k];
        inflow[r.target] += rates[k];
    }
    let residuals: Vec<f64> = outflow.iter().zip(&inflow).map(|(o, i)| o - i).collect();
    let balanced = residuals
        .iter()
        .zip(outflow.iter().zip(&inflow))
        .all(|(r, (o, i))| r.abs() <= tol * 1f64.max(o.abs().max(i.abs())));
    Ok(StateBalanceReport { balanced, residuals, outflow, inflow, tol })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum CbStateNotFound {
    NotWeaklyReversible,
    /// The log-linear system has no exact solution; `residual` is the worst
    /// relative complex-balance residual at the least-squares point.
    Inconsistent { residual: f64 },
}

/// Verification tolerance for [`find_complex_balanced_state`].
pub const CB_STATE_TOL: f64 = 1e-9;

/// Finds a positive complex balanced state of the deterministic mass-action
/// system, if one exists.
///
/// On a strongly connected linkage class, complex balance says the weights
/// c^y form a stationary measure of the chain on complexes with rates κ, so
/// c^y = α_L·K_y where K is that chain's (unique) stationary vector. Taking
/// logs gives a linear system in (log c, log α) which is solved in the
/// least-squares sense; the candidate is then verified directly.
pub fn find_complex_balanced_state(
    net: &ReactionNetwork,
    spec: &KineticsSpec,
) -> Result<Result<SteadyState, CbStateNotFound>> {
    spec.check_network(net)?;
    if !is_weakly_reversible(net) {
        return Ok(Err(CbStateNotFound::NotWeaklyReversible));
    }
    let (n, m) = (net.n(), net.m());
    let lc = linkage_classes(net);
    let mut log_k = vec![0.0; m];
    for class in &lc.classes {
        let pos: BTreeMap<usize, usize> = class.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut rates = vec![vec![0.0; class.len()]; class.len()];
        for (k, r) in net.reactions().iter().enumerate() {
            if let (Some(&i), Some(&j)) = (pos.get(&r.source), pos.get(&r.target)) {
                rates[i][j] += spec.kappa()[k];
            }
        }
        let weights = gth_stationary(&rates);
        for (i, &c) in class.iter().enumerate() {
            log_k[c] = weights[i].ln();
        }
    }
    let ell = lc.num_classes;
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|y| {
            let mut row: Vec<f64> = net.complex(y).iter().map(|&v| v as f64).collect();
            row.resize(n + ell, 0.0);
            row[n + lc.class_of[y]] = 1.0;
            row
        })
        .collect();
    let (sol, _) = least_squares(&rows, &log_k)?;
    let c: Vec<f64> = sol[..n].iter().map(|u| u.exp()).collect();
    let report = is_complex_balanced_state(net, spec, &c, CB_STATE_TOL)?;
    if report.balanced && c.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(Ok(SteadyState(c)))
    } else {
        let residual = report
            .outflow
            .iter()
            .zip(&report.inflow)
            .map(|(o, i)| relative_residual(*o, *i))
            .fold(0.0, f64::max);
        Ok(Err(CbStateNotFound::Inconsistent { residual }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::KineticsKind;
    use crate::model::box_states;
    use crate::parse::parse_network;

    fn triangle(k: [f64; 3]) -> (ReactionNetwork, KineticsSpec) {
        let p = parse_network(&format!("0 -> A+B ; {}\nA+B -> A ; {}\nA -> 0 ; {}", k[0], k[1], k[2])).unwrap();
        (p.network, p.kinetics)
    }

    fn birth_death() -> (ReactionNetwork, KineticsSpec) {
        let p = parse_network("0 -> A ; 1\n3A -> 2A ; 1").unwrap();
        (p.network, p.kinetics)
    }

    #[test]
    fn cb_state_examples() {
        let (net, spec) = triangle([1.0, 1.0, 1.0]);
        assert!(is_complex_balanced_state(&net, &spec, &[1.0, 1.0], 1e-9).unwrap().balanced);

        let p = parse_network("A+B <-> 2C ; 1, 1\nA <-> B ; 1, 1").unwrap();
        assert!(is_complex_balanced_state(&p.network, &p.kinetics, &[1.0, 1.0, 1.0], 1e-9).unwrap().balanced);

        let (net, spec) = triangle([2.0, 1.0, 1.0]);
        let rep = is_complex_balanced_state(&net, &spec, &[1.0, 1.0], 1e-9).unwrap();
        assert!(!rep.balanced);
        assert_eq!(rep.residuals[0], 1.0);
    }

    #[test]
    fn find_cb_state_examples() {
        let (net, spec) = triangle([1.0, 1.0, 1.0]);
        let c = find_complex_balanced_state(&net, &spec).unwrap().unwrap();
        assert!((c.0[0] - 1.0).abs() < 1e-12 && (c.0[1] - 1.0).abs() < 1e-12);

        // balance at 0 gives c_A = κ1/κ3, at A+B gives c_A c_B = κ1/κ2
        let (net, spec) = triangle([2.0, 1.0, 1.0]);
        let c = find_complex_balanced_state(&net, &spec).unwrap().unwrap();
        assert!((c.0[0] - 2.0).abs() < 1e-12, "{c:?}");
        assert!((c.0[1] - 1.0).abs() < 1e-12, "{c:?}");

        let (net, spec) = birth_death();
        assert_eq!(find_complex_balanced_state(&net, &spec).unwrap(), Err(CbStateNotFound::NotWeaklyReversible));
    }

    #[test]
    fn find_cb_state_detects_inconsistent_rates() {
        // weakly reversible, deficiency one: A <-> 2A, 0 <-> A style networks
        let p = parse_network("0 <-> A ; 1, 1\n2A <-> 3A ; 1, 5").unwrap();
        let out = find_complex_balanced_state(&p.network, &p.kinetics).unwrap();
        assert!(matches!(out, Err(CbStateNotFound::Inconsistent { residual }) if residual > 1e-3));
        // same network, rates chosen so that c = 1 balances both classes
        let p = parse_network("0 <-> A ; 1, 1\n2A <-> 3A ; 2, 2").unwrap();
        let c = find_complex_balanced_state(&p.network, &p.kinetics).unwrap().unwrap();
        assert!((c.0[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_form_values() {
        let theta = ThetaFamily::linear(2);
        let nu = product_form_measure(&[1.0, 1.0], &theta).unwrap();
        assert!((nu.eval(&[2, 3]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let nu2 = product_form_measure(&[3.0, 0.1], &theta).unwrap();
        assert_eq!(nu2.eval(&[0, 0]), Some(1.0));
        let nu3 = product_form_measure(&[2.0, 0.5], &theta).unwrap();
        assert!((nu3.eval(&[1, 1]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nu.eval(&[-1, 0]), Some(0.0));
        assert!(product_form_measure(&[0.0, 1.0], &theta).is_err());
    }

    #[test]
    fn poisson_is_stationary_and_complex_balanced() {
        let (net, spec) = triangle([1.0, 1.0, 1.0]);
        let nu = product_form_measure(&[1.0, 1.0], spec.theta()).unwrap();
        let domain = box_states(2, 10);
        let st = is_stationary_measure(&net, &spec, &nu, &domain, Tolerance::default()).unwrap();
        assert!(st.passed && st.max_rel_residual < 1e-12, "{st:?}");
        let cb = is_complex_balanced_measure(&net, &spec, &nu, &domain, Tolerance::default()).unwrap();
        assert!(cb.passed && cb.max_rel_residual < 1e-12);
        assert_eq!(cb.checked, 121 * 3);
    }

    #[test]
    fn product_form_is_not_stationary_for_birth_death() {
        let (net, spec) = birth_death();
        for c in [0.5, 1.0, 2.0, 3.7] {
            let nu = product_form_measure(&[c], spec.theta()).unwrap();
            let st = is_stationary_measure(&net, &spec, &nu, &box_states(1, 15), Tolerance::default()).unwrap();
            assert!(!st.passed, "c = {c}");
        }
    }

    #[test]
    fn empty_network_is_trivially_stationary() {
        let p = parse_network("").unwrap();
        let nu = LatticeMeasure::zero().with_default(1.0);
        let st = is_stationary_measure(&p.network, &p.kinetics, &nu, &box_states(0, 3), Tolerance::default()).unwrap();
        assert!(st.passed);
    }

    #[test]
    fn vacuous_complex_balance_below_sources() {
        let (net, spec) = triangle([1.0, 2.0, 3.0]);
        let nu = product_form_measure(&[0.7, 1.3], spec.theta()).unwrap();
        // complex A+B at x = (0,0): no outflow, and the only inflow 0 -> A+B
        // would start from (-1,-1)
        let (l, r) = cb_terms(&net, &spec, &nu, &[0, 0], 1).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn tabulated_measure_reports_missing_states() {
        let (net, spec) = triangle([1.0, 1.0, 1.0]);
        let mut values = BTreeMap::new();
        values.insert(vec![0, 0], 1.0);
        let nu = LatticeMeasure::tabulated(values).unwrap();
        let err = is_stationary_measure(&net, &spec, &nu, &[vec![0, 0]], Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::MeasureNotEvaluable(_)));
    }

    #[test]
    fn flow_decomposition_identity() {
        let (net, spec) = triangle([2.0, 0.5, 1.5]);
        let nu = product_form_measure(&[0.9, 1.7], spec.theta()).unwrap();
        for x in box_states(2, 6) {
            let (ml, mr) = master_terms(&net, &spec, &nu, &x).unwrap();
            let (mut sl, mut sr) = (0.0, 0.0);
            for y in 0..net.m() {
                let (l, r) = cb_terms(&net, &spec, &nu, &x, y).unwrap();
                sl += l;
                sr += r;
            }
            assert!((ml - sl).abs() <= 1e-12 * ml.abs().max(1.0));
            assert!((mr - sr).abs() <= 1e-12 * mr.abs().max(1.0));
        }
    }

    #[test]
    fn product_form_kinetics_with_saturating_theta() {
        // reversible pair with saturating theta: cb holds with the deterministic c
        let p = parse_network("theta A = saturating(2)\n0 <-> A ; 2, 1\nA <-> B ; 1, 1").unwrap();
        assert_eq!(p.kinetics.kind(), KineticsKind::StochasticProductForm);
        let c = find_complex_balanced_state(&p.network, &p.kinetics).unwrap().unwrap();
        let nu = product_form_measure(&c.0, p.kinetics.theta()).unwrap();
        let cb = is_complex_balanced_measure(&p.network, &p.kinetics, &nu, &box_states(2, 8), Tolerance::default())
            .unwrap();
        assert!(cb.passed, "{:?}", cb.worst);
    }

    #[test]
    fn measure_csv_round_trip() {
        let theta = ThetaFamily::linear(2);
        let nu = product_form_measure(&[1.0, 2.0], &theta).unwrap();
        let states = box_states(2, 3);
        let csv = nu.to_csv(&["A".into(), "B".into()], &states);
        let back = LatticeMeasure::from_csv(&csv, 2).unwrap();
        for x in &states {
            let (a, b) = (nu.eval(x).unwrap(), back.eval(x).unwrap());
            assert!((a - b).abs() <= 1e-15 * a);
        }
    }
}
