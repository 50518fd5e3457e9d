//! Rate functions: deterministic mass-action, stochastic mass-action and
//! stochastic product-form kinetics, plus an injectable rate table for
//! arbitrary stochastic kinetics.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{dominates, falling_factorial, monomial_pow, ReactionNetwork};

/// How a tabulated θ continues past its last entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Repeat the last value.
    Hold,
    /// θ(m) = θ(L)·m/L beyond the table length L.
    Linear,
}

/// A per-species function θ: Z → R≥0 with θ(m) = 0 iff m ≤ 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Theta {
    /// θ(m) = m for m ≥ 0.
    Linear,
    /// θ(m) = min(m, cap) for m ≥ 0.
    Saturating { cap: u32 },
    /// θ(k) = values[k-1] for 1 ≤ k ≤ L, extended per `extension`.
    Table { values: Vec<f64>, extension: Extension },
}

impl Theta {
    pub fn table(values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidKinetics("empty theta table".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidKinetics("theta table entries must be positive".into()));
        }
        Ok(Theta::Table { values, extension })
    }

    pub fn saturating(cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidKinetics("saturation cap must be positive".into()));
        }
        Ok(Theta::Saturating { cap })
    }

    pub fn eval(&self, m: i64) -> f64 {
        if m <= 0 {
            return 0.0;
        }
        match self {
            Theta::Linear => m as f64,
            Theta::Saturating { cap } => m.min(*cap as i64) as f64,
            Theta::Table { values, extension } => {
                let len = values.len() as i64;
                if m <= len {
                    values[(m - 1) as usize]
                } else {
                    let last = values[values.len() - 1];
                    match extension {
                        Extension::Hold => last,
                        Extension::Linear => last * m as f64 / len as f64,
                    }
                }
            }
        }
    }

    /// lim θ(m) = ∞.
    pub fn is_non_saturating(&self) -> bool {
        match self {
            Theta::Linear => true,
            Theta::Saturating { .. } => false,
            Theta::Table { extension, .. } => *extension == Extension::Linear,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Theta::Linear)
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Linear => write!(f, "linear"),
            Theta::Saturating { cap } => write!(f, "saturating({cap})"),
            Theta::Table { values, extension } => {
                let vals: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
                let ext = match extension {
                    Extension::Hold => "hold",
                    Extension::Linear => "linear",
                };
                write!(f, "table[{}] {ext}", vals.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaFamily(Vec<Theta>);

impl ThetaFamily {
    pub fn linear(n: usize) -> Self {
        ThetaFamily(vec![Theta::Linear; n])
    }

    pub fn new(thetas: Vec<Theta>) -> Self {
        ThetaFamily(thetas)
    }

    pub fn get(&self, i: usize) -> &Theta {
        &self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Theta> {
        self.0.iter()
    }

    pub fn is_all_linear(&self) -> bool {
        self.0.iter().all(Theta::is_linear)
    }

    pub fn is_non_saturating(&self) -> bool {
        self.0.iter().all(Theta::is_non_saturating)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticsKind {
    DeterministicMassAction,
    StochasticMassAction,
    StochasticProductForm,
}

impl KineticsKind {
    pub fn keyword(self) -> &'static str {
        match self {
            KineticsKind::DeterministicMassAction => "deterministic",
            KineticsKind::StochasticMassAction => "mass-action",
            KineticsKind::StochasticProductForm => "product-form",
        }
    }
}

/// Rate constants κ (one per reaction, in network order) together with θ.
///
/// The same κ serves the deterministic and the stochastic models; `kind`
/// only selects which stochastic rate [`StochasticKinetics::rate`] uses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KineticsSpec {
    kappa: Vec<f64>,
    theta: ThetaFamily,
    kind: KineticsKind,
}

impl KineticsSpec {
    pub fn new(kappa: Vec<f64>, theta: ThetaFamily, kind: KineticsKind) -> Result<Self> {
        if let Some(k) = kappa.iter().position(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::InvalidKinetics(format!(
                "rate constant of reaction {k} must be positive"
            )));
        }
        Ok(KineticsSpec { kappa, theta, kind })
    }

    pub fn mass_action(kappa: Vec<f64>, n: usize) -> Result<Self> {
        Self::new(kappa, ThetaFamily::linear(n), KineticsKind::StochasticMassAction)
    }

    pub fn check_network(&self, net: &ReactionNetwork) -> Result<()> {
        if self.kappa.len() != net.r() {
            return Err(Error::LengthMismatch { expected: net.r(), got: self.kappa.len() });
        }
        if self.theta.len() != net.n() {
            return Err(Error::LengthMismatch { expected: net.n(), got: self.theta.len() });
        }
        Ok(())
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn theta(&self) -> &ThetaFamily {
        &self.theta
    }

    pub fn kind(&self) -> KineticsKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: KineticsKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_kappa(mut self, kappa: Vec<f64>) -> Result<Self> {
        self = KineticsSpec::new(kappa, self.theta, self.kind)?;
        Ok(self)
    }

    /// κ z^y.
    pub fn det_rate(&self, net: &ReactionNetwork, reaction: usize, z: &[f64]) -> Result<f64> {
        if let Some(i) = z.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeConcentration(i));
        }
        Ok(self.kappa[reaction] * monomial_pow(z, net.source(reaction))?)
    }

    /// κ x!/(x-y)! 1{x ≥ y}.
    pub fn stoch_ma_rate(&self, net: &ReactionNetwork, reaction: usize, x: &[i64]) -> f64 {
        self.kappa[reaction] * falling_factorial(x, net.source(reaction))
    }

    /// κ ∏_i ∏_{j<y_i} θ_i(x_i - j).
    pub fn product_form_rate(&self, net: &ReactionNetwork, reaction: usize, x: &[i64]) -> f64 {
        let y = net.source(reaction);
        let mut acc = self.kappa[reaction];
        for (i, (&xi, &yi)) in x.iter().zip(y.iter()).enumerate() {
            let theta = self.theta.get(i);
            for j in 0..yi {
                acc *= theta.eval(xi - j);
            }
        }
        acc
    }

    pub fn is_active(&self, net: &ReactionNetwork, reaction: usize, x: &[i64]) -> bool {
        self.rate(net, reaction, x) > 0.0
    }
}

/// Any stochastic kinetics Λ: reaction × state → rate.
///
/// Implementations must satisfy λ(x) > 0 only if x ≥ source.
pub trait StochasticKinetics: Sync {
    fn rate(&self, net: &ReactionNetwork, reaction: usize, x: &[i64]) -> f64;

    fn total_rate(&self, net: &ReactionNetwork, x: &[i64]) -> f64 {
        (0..net.r()).map(|k| self.rate(net, k, x)).sum()
    }
}

impl StochasticKinetics for KineticsSpec {
    fn rate(&self, net: &ReactionNetwork, reaction: usize, x: &[i64]) -> f64 {
        match self.kind {
            KineticsKind::StochasticProductForm => self.product_form_rate(net, reaction, x),
            KineticsKind::StochasticMassAction | KineticsKind::DeterministicMassAction => {
                self.stoch_ma_rate(net, reaction, x)
            }
        }
    }
}

/// Arbitrary kinetics given pointwise; unlisted (reaction, state) pairs have rate 0.
#[derive(Clone, Debug, Default)]
pub struct RateTable {
    rates: HashMap<(usize, Vec<i64>), f64>,
}

impl RateTable {
    pub fn new(
        net: &ReactionNetwork,
        entries: impl IntoIterator<Item = (usize, Vec<i64>, f64)>,
    ) -> Result<Self> {
        let mut rates = HashMap::new();
        for (k, x, rate) in entries {
            if k >= net.r() {
                return Err(Error::InvalidKinetics(format!("unknown reaction index {k}")));
            }
            if x.len() != net.n() {
                return Err(Error::LengthMismatch { expected: net.n(), got: x.len() });
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::InvalidKinetics(format!("invalid rate {rate} at {x:?}")));
            }
            if rate > 0.0 && !dominates(&x, net.source(k)) {
                return Err(Error::InvalidKinetics(format!(
                    "reaction {} has positive rate at {x:?} below its source",
                    net.reaction_label(k)
                )));
            }
            rates.insert((k, x), rate);
        }
        Ok(RateTable { rates })
    }

    /// Reads `reaction,x_1,...,x_n,rate` rows (header row required).
    pub fn from_csv(net: &ReactionNetwork, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != net.n() + 2 {
                return Err(Error::InvalidArgument(format!(
                    "rate table line {}: expected {} fields",
                    lineno + 1,
                    net.n() + 2
                )));
            }
            let bad = |_| Error::InvalidArgument(format!("rate table line {}: bad number", lineno + 1));
            let k: usize = fields[0].parse().map_err(|_| bad(()))?;
            let x = fields[1..=net.n()]
                .iter()
                .map(|f| f.parse::<i64>().map_err(|_| bad(())))
                .collect::<Result<Vec<_>>>()?;
            let rate: f64 = fields[net.n() + 1].parse().map_err(|_| bad(()))?;
            entries.push((k, x, rate));
        }
        RateTable::new(net, entries)
    }

    /// Tabulates `kin` over `states`.
    pub fn tabulate(net: &ReactionNetwork, kin: &dyn StochasticKinetics, states: &[Vec<i64>]) -> Self {
        let mut rates = HashMap::new();
        for x in states {
            for k in 0..net.r() {
                let v = kin.rate(net, k, x);
                if v > 0.0 {
                    rates.insert((k, x.clone()), v);
                }
            }
        }
        RateTable { rates }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

impl StochasticKinetics for RateTable {
    fn rate(&self, _net: &ReactionNetwork, reaction: usize, x: &[i64]) -> f64 {
        self.rates.get(&(reaction, x.to_vec())).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::box_states;

    fn ab_net() -> ReactionNetwork {
        // A+B -> 2C, 2C -> A+B
        ReactionNetwork::from_pairs(
            vec!["A".into(), "B".into(), "C".into()],
            &[(vec![1, 1, 0], vec![0, 0, 2]), (vec![0, 0, 2], vec![1, 1, 0])],
        )
        .unwrap()
    }

    fn example_net() -> ReactionNetwork {
        ReactionNetwork::from_pairs(
            vec!["A".into()],
            &[(vec![0], vec![1]), (vec![3], vec![2])],
        )
        .unwrap()
    }

    #[test]
    fn det_rate_examples() {
        let net = ab_net();
        let spec = KineticsSpec::new(vec![2.0, 5.0], ThetaFamily::linear(3), KineticsKind::DeterministicMassAction)
            .unwrap();
        assert_eq!(spec.det_rate(&net, 0, &[3.0, 4.0, 0.0]).unwrap(), 24.0);
        assert_eq!(spec.det_rate(&net, 1, &[1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(spec.det_rate(&net, 0, &[-1.0, 1.0, 0.0]), Err(Error::NegativeConcentration(0))));
        let ex = example_net();
        let spec = KineticsSpec::mass_action(vec![1.0, 1.0], 1).unwrap();
        assert_eq!(spec.det_rate(&ex, 0, &[7.5]).unwrap(), 1.0);
    }

    #[test]
    fn stochastic_mass_action_examples() {
        let ex = example_net();
        let spec = KineticsSpec::mass_action(vec![3.0, 1.0], 1).unwrap();
        assert_eq!(spec.stoch_ma_rate(&ex, 1, &[5]), 60.0);
        assert_eq!(spec.stoch_ma_rate(&ex, 0, &[11]), 3.0);
        let net = ReactionNetwork::from_pairs(
            vec!["A".into(), "B".into()],
            &[(vec![1, 1], vec![0, 0]), (vec![0, 0], vec![1, 1])],
        )
        .unwrap();
        let spec = KineticsSpec::mass_action(vec![7.0, 1.0], 2).unwrap();
        assert_eq!(spec.stoch_ma_rate(&net, 0, &[1, 0]), 0.0);
    }

    #[test]
    fn product_form_examples() {
        let ex = example_net();
        let spec = KineticsSpec::new(vec![1.0, 1.0], ThetaFamily::linear(1), KineticsKind::StochasticProductForm)
            .unwrap();
        assert_eq!(spec.product_form_rate(&ex, 1, &[5]), 60.0);

        let two_a = ReactionNetwork::from_pairs(vec!["A".into()], &[(vec![2], vec![0]), (vec![0], vec![2])])
            .unwrap();
        let sat = ThetaFamily::new(vec![Theta::saturating(2).unwrap()]);
        let spec = KineticsSpec::new(vec![1.0, 4.5], sat, KineticsKind::StochasticProductForm).unwrap();
        assert_eq!(spec.product_form_rate(&two_a, 0, &[4]), 4.0);
        assert_eq!(spec.product_form_rate(&two_a, 1, &[9]), 4.5);
    }

    #[test]
    fn activity_examples() {
        let ex = example_net();
        let spec = KineticsSpec::mass_action(vec![1.0, 1.0], 1).unwrap();
        assert!(spec.is_active(&ex, 1, &[3]));
        assert!(!spec.is_active(&ex, 1, &[2]));
        let net = ReactionNetwork::from_pairs(
            vec!["A".into(), "B".into()],
            &[(vec![1, 1], vec![0, 0]), (vec![0, 0], vec![1, 1])],
        )
        .unwrap();
        let spec = KineticsSpec::mass_action(vec![1.0, 1.0], 2).unwrap();
        assert!(spec.is_active(&net, 0, &[2, 1]));
    }

    #[test]
    fn linear_theta_reduces_to_mass_action() {
        let net = ab_net();
        let ma = KineticsSpec::mass_action(vec![1.3, 0.7], 3).unwrap();
        let pf = ma.clone().with_kind(KineticsKind::StochasticProductForm);
        for x in box_states(3, 20) {
            for k in 0..net.r() {
                let (a, b) = (ma.stoch_ma_rate(&net, k, &x), pf.product_form_rate(&net, k, &x));
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn theta_nullity_and_extension() {
        let hold = Theta::table(vec![1.0, 2.0, 2.5], Extension::Hold).unwrap();
        let lin = Theta::table(vec![1.0, 2.0, 3.0], Extension::Linear).unwrap();
        for t in [&Theta::Linear, &Theta::saturating(3).unwrap(), &hold, &lin] {
            for m in -5..=0 {
                assert_eq!(t.eval(m), 0.0);
            }
            for m in 1..50 {
                assert!(t.eval(m) > 0.0);
            }
        }
        assert_eq!(hold.eval(10), 2.5);
        assert_eq!(lin.eval(6), 6.0);
        assert!(!hold.is_non_saturating());
        assert!(lin.is_non_saturating());
        assert!(Theta::table(vec![1.0, 0.0], Extension::Hold).is_err());
    }

    #[test]
    fn rate_table_validates_support() {
        let ex = example_net();
        assert!(RateTable::new(&ex, [(1, vec![2], 1.0)]).is_err());
        assert!(RateTable::new(&ex, [(1, vec![2], 0.0)]).is_ok());
        let t = RateTable::from_csv(&ex, "reaction,A,rate\n0,0,2.5\n1,3,6\n").unwrap();
        assert_eq!(t.rate(&ex, 0, &[0]), 2.5);
        assert_eq!(t.rate(&ex, 1, &[3]), 6.0);
        assert_eq!(t.rate(&ex, 1, &[4]), 0.0);
        assert!(RateTable::from_csv(&ex, "reaction,A,rate\n1,1,2\n").is_err());
    }
}
