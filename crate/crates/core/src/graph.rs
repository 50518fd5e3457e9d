//! Graph invariants of the reaction graph: linkage classes, reversibility,
//! stoichiometric subspace, deficiency and the auxiliary network whose
//! deficiency is always zero.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{independent_rows, integer_rank};
use crate::model::{Complex, ReactionNetwork};
use crate::scc::tarjan;

/// Weakly connected components of the reaction graph, numbered by their
/// smallest complex index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinkageDecomposition {
    pub class_of: Vec<usize>,
    pub num_classes: usize,
    pub classes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoichiometricData {
    pub reaction_vectors: Vec<Vec<i64>>,
    pub dim: usize,
    pub basis: Vec<Vec<i64>>,
    /// Reaction index of every basis vector.
    pub basis_reactions: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DeficiencyReport {
    pub m: usize,
    pub ell: usize,
    pub s: usize,
    pub delta: i64,
    pub delta_kernel: i64,
}

/// The linear map φ: R^m → R^n, e_y ↦ y, and the edge vectors e_{y'} − e_y.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexSpaceMap {
    pub dvectors: Vec<Vec<i64>>,
    pub d_dim: usize,
    pub phi_matrix: Vec<Vec<i64>>,
}

impl ComplexSpaceMap {
    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        self.phi_matrix.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

pub fn linkage_classes(net: &ReactionNetwork) -> LinkageDecomposition {
    let m = net.m();
    let mut uf = UnionFind((0..m).collect());
    for r in net.reactions() {
        uf.union(r.source, r.target);
    }
    let mut label = vec![usize::MAX; m];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_of = vec![0; m];
    for c in 0..m {
        let root = uf.find(c);
        if label[root] == usize::MAX {
            label[root] = classes.len();
            classes.push(Vec::new());
        }
        class_of[c] = label[root];
        classes[label[root]].push(c);
    }
    LinkageDecomposition { class_of, num_classes: classes.len(), classes }
}

pub fn is_reversible(net: &ReactionNetwork) -> bool {
    let edges: HashSet<(usize, usize)> = net.reactions().iter().map(|r| (r.source, r.target)).collect();
    edges.iter().all(|&(a, b)| edges.contains(&(b, a)))
}

/// Every reaction lies on a directed cycle, i.e. each linkage class is a
/// single strongly connected component.
pub fn is_weakly_reversible(net: &ReactionNetwork) -> bool {
    let mut adj = vec![Vec::new(); net.m()];
    for r in net.reactions() {
        adj[r.source].push(r.target);
    }
    let (comp, _) = tarjan(&adj);
    net.reactions().iter().all(|r| comp[r.source] == comp[r.target])
}

pub fn stoichiometric_subspace(net: &ReactionNetwork) -> Result<StoichiometricData> {
    let reaction_vectors: Vec<Vec<i64>> = (0..net.r()).map(|k| net.reaction_vector(k)).collect();
    let ech = independent_rows(&reaction_vectors)?;
    let basis = ech.independent_rows.iter().map(|&k| reaction_vectors[k].clone()).collect();
    Ok(StoichiometricData { dim: ech.rank, basis, basis_reactions: ech.independent_rows, reaction_vectors })
}

pub fn complex_space_map(net: &ReactionNetwork) -> Result<ComplexSpaceMap> {
    let (n, m) = (net.n(), net.m());
    let phi_matrix: Vec<Vec<i64>> = (0..n).map(|i| (0..m).map(|j| net.complex(j)[i]).collect()).collect();
    let dvectors: Vec<Vec<i64>> = net
        .reactions()
        .iter()
        .map(|r| {
            let mut d = vec![0; m];
            d[r.target] += 1;
            d[r.source] -= 1;
            d
        })
        .collect();
    let d_dim = integer_rank(&dvectors)?;
    let map = ComplexSpaceMap { dvectors, d_dim, phi_matrix };
    for (k, d) in map.dvectors.iter().enumerate() {
        if map.apply(d) != net.reaction_vector(k) {
            return Err(Error::InvalidNetwork(format!("phi(d) != y' - y for reaction {k}")));
        }
    }
    Ok(map)
}

/// δ = m − ℓ − s, cross-checked against dim ker φ|_D computed from a
/// spanning-tree basis of D.
pub fn deficiency(net: &ReactionNetwork) -> Result<DeficiencyReport> {
    let lc = linkage_classes(net);
    let stoich = stoichiometric_subspace(net)?;
    let map = complex_space_map(net)?;
    let (m, ell, s) = (net.m(), lc.num_classes, stoich.dim);
    let delta = m as i64 - ell as i64 - s as i64;

    if map.d_dim != m - ell {
        return Err(Error::DeficiencyMismatch { combinatorial: delta, kernel: -1 });
    }
    // basis of D: e_y − e_root per class; φ of it is y − root
    let images: Vec<Vec<i64>> = lc
        .classes
        .iter()
        .flat_map(|class| {
            let root = net.complex(class[0]);
            class[1..].iter().map(move |&c| net.complex(c).iter().zip(root.iter()).map(|(a, b)| a - b).collect())
        })
        .collect();
    let image_rank = integer_rank(&images)?;
    let delta_kernel = (m - ell) as i64 - image_rank as i64;
    if delta != delta_kernel || delta < 0 {
        return Err(Error::DeficiencyMismatch { combinatorial: delta, kernel: delta_kernel });
    }
    Ok(DeficiencyReport { m, ell, s, delta, delta_kernel })
}

fn aux_name(net: &ReactionNetwork, c: usize) -> String {
    let label = net.complex_label(c).replace('+', "_");
    format!("AUX_{label}")
}

/// The network with one extra species A_y per complex, complexes y + A_y and
/// the same reaction graph.
pub fn build_auxiliary_network(net: &ReactionNetwork) -> Result<ReactionNetwork> {
    let (n, m) = (net.n(), net.m());
    let mut names = net.species_names();
    let mut taken: HashSet<String> = names.iter().cloned().collect();
    for c in 0..m {
        let mut name = aux_name(net, c);
        while taken.contains(&name) {
            name.push('_');
        }
        taken.insert(name.clone());
        names.push(name);
    }
    let complexes = (0..m)
        .map(|c| {
            let mut v = net.complex(c).coeffs().to_vec();
            v.resize(n + m, 0);
            v[n + c] = 1;
            Complex::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    ReactionNetwork::new(names, complexes, net.reactions().to_vec())
}
