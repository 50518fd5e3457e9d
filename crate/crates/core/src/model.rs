//! Core domain types: species, complexes, reactions and lattice states.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SpeciesId {
    pub index: usize,
    pub name: String,
}

/// A non-negative integer combination of species, stored densely over the
/// network's species order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Complex {
    coeffs: Vec<i64>,
}

impl Complex {
    pub fn new(coeffs: Vec<i64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|&c| c < 0) {
            return Err(Error::InvalidNetwork(format!(
                "complex has negative coefficient for species {i}"
            )));
        }
        Ok(Complex { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Complex { coeffs: vec![0; n] }
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// ℓ₁ norm, i.e. the molecularity of the complex.
    pub fn order(&self) -> i64 {
        self.coeffs.iter().sum()
    }
}

impl Deref for Complex {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.coeffs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
}

/// A point of the lattice Z^n_{≥0}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LatticeState(Vec<i64>);

impl LatticeState {
    pub fn new(counts: Vec<i64>) -> Result<Self> {
        if counts.iter().any(|&c| c < 0) {
            return Err(Error::InvalidArgument(format!(
                "lattice state has a negative entry: {counts:?}"
            )));
        }
        Ok(LatticeState(counts))
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }
}

impl Deref for LatticeState {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

/// The triple (species, complexes, reactions).
///
/// Complexes and reactions are deduplicated; every species occurs in some
/// complex and every complex in some reaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReactionNetwork {
    species: Vec<SpeciesId>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
    #[serde(skip)]
    incoming: Vec<Vec<usize>>,
}

impl ReactionNetwork {
    pub fn new(
        species_names: Vec<String>,
        complexes: Vec<Complex>,
        reactions: Vec<Reaction>,
    ) -> Result<Self> {
        let n = species_names.len();
        let mut seen = HashSet::new();
        for name in &species_names {
            if name.is_empty() {
                return Err(Error::InvalidNetwork("empty species name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate species '{name}'")));
            }
        }
        let mut cset = HashSet::new();
        for c in &complexes {
            if c.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: c.len() });
            }
            if !cset.insert(c) {
                return Err(Error::InvalidNetwork(format!("duplicate complex {:?}", c.coeffs())));
            }
        }
        let m = complexes.len();
        let mut rset = HashSet::new();
        let mut used = vec![false; m];
        for r in &reactions {
            if r.source >= m || r.target >= m {
                return Err(Error::InvalidNetwork("reaction refers to unknown complex".into()));
            }
            if r.source == r.target {
                return Err(Error::InvalidNetwork("self-loop reaction".into()));
            }
            if !rset.insert(*r) {
                return Err(Error::InvalidNetwork("duplicate reaction".into()));
            }
            used[r.source] = true;
            used[r.target] = true;
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidNetwork(format!("complex {i} appears in no reaction")));
        }
        for i in 0..n {
            if !complexes.iter().any(|c| c[i] != 0) {
                return Err(Error::InvalidNetwork(format!(
                    "species '{}' appears in no complex",
                    species_names[i]
                )));
            }
        }
        let species = species_names
            .into_iter()
            .enumerate()
            .map(|(index, name)| SpeciesId { index, name })
            .collect();
        let mut outgoing = vec![Vec::new(); m];
        let mut incoming = vec![Vec::new(); m];
        for (k, r) in reactions.iter().enumerate() {
            outgoing[r.source].push(k);
            incoming[r.target].push(k);
        }
        Ok(ReactionNetwork { species, complexes, reactions, outgoing, incoming })
    }

    /// Builds a network from (source, target) coefficient pairs, deduplicating
    /// complexes in first-appearance order.
    pub fn from_pairs(species_names: Vec<String>, pairs: &[(Vec<i64>, Vec<i64>)]) -> Result<Self> {
        let mut complexes: Vec<Complex> = Vec::new();
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut intern = |v: &Vec<i64>| -> Result<usize> {
            if let Some(&i) = index.get(v) {
                return Ok(i);
            }
            complexes.push(Complex::new(v.clone())?);
            index.insert(v.clone(), complexes.len() - 1);
            Ok(complexes.len() - 1)
        };
        let mut reactions = Vec::with_capacity(pairs.len());
        for (s, t) in pairs {
            let source = intern(s)?;
            let target = intern(t)?;
            reactions.push(Reaction { source, target });
        }
        ReactionNetwork::new(species_names, complexes, reactions)
    }

    pub fn n(&self) -> usize {
        self.species.len()
    }

    pub fn m(&self) -> usize {
        self.complexes.len()
    }

    pub fn r(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[SpeciesId] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn complex(&self, i: usize) -> &Complex {
        &self.complexes[i]
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn source(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].source]
    }

    pub fn target(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].target]
    }

    /// Reactions leaving complex `c`.
    pub fn outgoing(&self, c: usize) -> &[usize] {
        &self.outgoing[c]
    }

    /// Reactions entering complex `c`.
    pub fn incoming(&self, c: usize) -> &[usize] {
        &self.incoming[c]
    }

    /// y' - y for reaction `k`.
    pub fn reaction_vector(&self, k: usize) -> Vec<i64> {
        let (s, t) = (self.source(k), self.target(k));
        t.iter().zip(s.iter()).map(|(a, b)| a - b).collect()
    }

    pub fn complex_index(&self, coeffs: &[i64]) -> Option<usize> {
        self.complexes.iter().position(|c| c.coeffs() == coeffs)
    }

    /// Human-readable form, e.g. `A+B`, `2C`, `0`.
    pub fn complex_label(&self, i: usize) -> String {
        format_complex(&self.complexes[i], &self.species)
    }

    pub fn reaction_label(&self, k: usize) -> String {
        let r = self.reactions[k];
        format!("{} -> {}", self.complex_label(r.source), self.complex_label(r.target))
    }

    /// Largest molecularity of a reaction source (`d` for probe grids).
    pub fn max_source_order(&self) -> i64 {
        (0..self.r()).map(|k| self.source(k).order()).max().unwrap_or(0)
    }
}

pub(crate) fn format_complex(c: &Complex, species: &[SpeciesId]) -> String {
    let terms: Vec<String> = c
        .iter()
        .zip(species)
        .filter(|(&k, _)| k != 0)
        .map(|(&k, s)| if k == 1 { s.name.clone() } else { format!("{k}{}", s.name) })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join("+")
    }
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.r() {
            writeln!(f, "{}", self.reaction_label(k))?;
        }
        Ok(())
    }
}

/// 0-based indices of the non-zero components.
pub fn support(v: &[i64]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, _)| i).collect()
}

/// x^v = ∏ x_i^{v_i} with 0^0 = 1.
pub fn monomial_pow(x: &[f64], v: &[i64]) -> Result<f64> {
    if x.len() != v.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: v.len() });
    }
    Ok(x.iter().zip(v).map(|(&xi, &vi)| if vi == 0 { 1.0 } else { xi.powi(vi as i32) }).product())
}

/// x!/(x-y)! as a float, 0 when x ≱ y.
pub fn falling_factorial(x: &[i64], y: &[i64]) -> f64 {
    let mut acc = 1.0;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi < yi {
            return 0.0;
        }
        for j in 0..yi {
            acc *= (xi - j) as f64;
        }
    }
    acc
}

/// v! = ∏ v_i!
pub fn factorial(v: &[i64]) -> f64 {
    v.iter().map(|&k| (1..=k).map(|j| j as f64).product::<f64>()).product()
}

pub fn dominates(x: &[i64], y: &[i64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a >= b)
}

pub fn is_nonnegative(x: &[i64]) -> bool {
    x.iter().all(|&a| a >= 0)
}

pub fn add(x: &[i64], y: &[i64]) -> Vec<i64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[i64], y: &[i64]) -> Vec<i64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// All states of {0..=max}^n in lexicographic order (last coordinate fastest).
pub fn box_states(n: usize, max: i64) -> Vec<Vec<i64>> {
    grid_states(&vec![0; n], &vec![max; n])
}

/// All integer points of the box [lo, hi] in lexicographic order.
pub fn grid_states(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    loop {
        out.push(cur.clone());
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = lo[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_examples() {
        assert_eq!(support(&[0, 1, 1]), vec![1, 2]);
        assert!(support(&[0, 0]).is_empty());
        assert_eq!(support(&[5, 0, 2]), vec![0, 2]);
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(monomial_pow(&[2.0, 3.0], &[1, 2]).unwrap(), 18.0);
        assert_eq!(monomial_pow(&[0.0, 5.0], &[0, 1]).unwrap(), 5.0);
        assert_eq!(monomial_pow(&[1.0, 1.0, 1.0], &[4, 0, 7]).unwrap(), 1.0);
        assert!(matches!(
            monomial_pow(&[1.0], &[1, 2]),
            Err(Error::LengthMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_factorial(&[5], &[3]), 60.0);
        assert_eq!(falling_factorial(&[1, 0], &[1, 1]), 0.0);
        assert_eq!(falling_factorial(&[4, 2], &[0, 0]), 1.0);
        assert_eq!(factorial(&[2, 3]), 12.0);
    }

    #[test]
    fn network_invariants_are_enforced() {
        let names = vec!["A".to_string()];
        let err = ReactionNetwork::from_pairs(names.clone(), &[(vec![1], vec![1])]);
        assert!(err.is_err());
        let err = ReactionNetwork::from_pairs(
            names.clone(),
            &[(vec![0], vec![1]), (vec![0], vec![1])],
        );
        assert!(err.is_err());
        let err = ReactionNetwork::from_pairs(
            vec!["A".into(), "B".into()],
            &[(vec![0, 0], vec![1, 0])],
        );
        assert!(err.is_err(), "species B unused");
        let net = ReactionNetwork::from_pairs(names, &[(vec![0], vec![1]), (vec![3], vec![2])])
            .unwrap();
        assert_eq!((net.n(), net.m(), net.r()), (1, 4, 2));
        assert_eq!(net.complex_label(2), "3A");
        assert_eq!(net.max_source_order(), 3);
    }

    #[test]
    fn grids_are_lexicographic() {
        let g = box_states(2, 1);
        assert_eq!(g, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(box_states(0, 3), vec![Vec::<i64>::new()]);
        assert!(grid_states(&[2], &[1]).is_empty());
    }
}
