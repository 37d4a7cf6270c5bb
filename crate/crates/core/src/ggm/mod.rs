//! Gaussian graphical models `Sigma = Delta (I - Omega)^-1 Delta` with a fixed
//! edge pattern, greedy step-up structure search, and multigroup models with
//! equality constraints on the network and scaling matrices.

pub mod multigroup;
pub mod stepup;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::TOL;
use crate::stats::{spd_inverse, SymMatrix};
use crate::uva::partial_correlations;

pub use multigroup::{
    fit_model_suite, fit_multigroup, fit_multigroup_structure, select_best, Constraint, GroupData, MultigroupFit,
};
pub use stepup::{stepup_search, stepup_search_traced, StepRecord};

/// Unordered node pairs stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeSet(BTreeSet<(usize, usize)>);

impl EdgeSet {
    pub fn new() -> Self {
        EdgeSet(BTreeSet::new())
    }

    pub fn complete(p: usize) -> Self {
        EdgeSet((0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut e = EdgeSet::new();
        for (i, j) in pairs {
            e.insert(i, j);
        }
        e
    }

    /// Inserts `{i, j}`; self-loops are ignored.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        self.0.insert((i.min(j), i.max(j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.contains(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn neighbors(&self, i: usize, p: usize) -> Vec<usize> {
        (0..p).filter(|&j| j != i && self.contains(i, j)).collect()
    }

    /// Pairs over `p` nodes that are not in the set.
    pub fn absent(&self, p: usize) -> Vec<(usize, usize)> {
        EdgeSet::complete(p).iter().filter(|&(i, j)| !self.contains(i, j)).collect()
    }

    pub fn with(&self, i: usize, j: usize) -> Self {
        let mut e = self.clone();
        e.insert(i, j);
        e
    }

    pub fn max_node(&self) -> Option<usize> {
        self.0.iter().map(|&(_, j)| j).max()
    }
}

/// Likelihood-based fit summary. The `-(n p / 2) log(2 pi)` constant is omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
    pub n: usize,
}

impl FitStats {
    pub fn new(loglik: f64, n_params: usize, n: usize) -> Self {
        FitStats {
            loglik,
            n_params,
            bic: -2.0 * loglik + n_params as f64 * (n as f64).ln(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GGMModel {
    pub nodes: Vec<String>,
    /// Partial correlations, zero diagonal.
    pub omega: SymMatrix,
    /// Diagonal of the scaling matrix.
    pub delta: Vec<f64>,
    pub edges: EdgeSet,
    pub fit: Option<FitStats>,
}

/// Splits a precision matrix into partial correlations and scaling:
/// `omega_ij = -K_ij / sqrt(K_ii K_jj)`, `delta_i = 1 / sqrt(K_ii)`.
pub fn decompose(k: &SymMatrix) -> (SymMatrix, Vec<f64>) {
    let omega = partial_correlations(k);
    let delta = k.diag().iter().map(|v| 1.0 / v.sqrt()).collect();
    (omega, delta)
}

fn edges_of(omega: &SymMatrix) -> EdgeSet {
    let p = omega.dim();
    EdgeSet::from_pairs(
        (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
            .filter(|&(i, j)| omega.get(i, j) != 0.0),
    )
}

impl GGMModel {
    /// Builds a model from parameters, checking its invariants.
    pub fn from_parameters(nodes: Vec<String>, omega: SymMatrix, delta: Vec<f64>) -> Result<Self> {
        let p = nodes.len();
        if omega.dim() != p || delta.len() != p {
            return Err(Error::InvalidModel("dimension mismatch between nodes, omega and delta".into()));
        }
        if let Some(d) = delta.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::InvalidModel(format!("scaling entry {d} is not positive")));
        }
        for i in 0..p {
            if omega.get(i, i) != 0.0 {
                return Err(Error::InvalidModel("omega must have a zero diagonal".into()));
            }
        }
        let edges = edges_of(&omega);
        let m = GGMModel {
            nodes,
            omega,
            delta,
            edges,
            fit: None,
        };
        m.implied_sigma()?;
        Ok(m)
    }

    pub fn from_precision(nodes: Vec<String>, k: &SymMatrix, edges: EdgeSet, fit: Option<FitStats>) -> Self {
        let (mut omega, delta) = decompose(k);
        let p = omega.dim();
        for i in 0..p {
            for j in (i + 1)..p {
                if !edges.contains(i, j) {
                    omega.set(i, j, 0.0);
                }
            }
        }
        GGMModel {
            nodes,
            omega,
            delta,
            edges,
            fit,
        }
    }

    pub fn p(&self) -> usize {
        self.nodes.len()
    }

    /// `I - Omega`.
    fn identity_minus_omega(&self) -> SymMatrix {
        SymMatrix::from_fn(self.p(), |i, j| if i == j { 1.0 } else { -self.omega.get(i, j) })
    }

    /// Model precision `Delta^-1 (I - Omega) Delta^-1`.
    pub fn precision(&self) -> SymMatrix {
        let a = self.identity_minus_omega();
        SymMatrix::from_fn(self.p(), |i, j| a.get(i, j) / (self.delta[i] * self.delta[j]))
    }

    /// Implied covariance `Delta (I - Omega)^-1 Delta`.
    pub fn implied_sigma(&self) -> Result<SymMatrix> {
        let a = self.identity_minus_omega();
        let inv = spd_inverse(&a).map_err(|_| {
            Error::InvalidModel("I - Omega is singular or not positive definite".into())
        })?;
        Ok(SymMatrix::from_fn(self.p(), |i, j| self.delta[i] * inv.get(i, j) * self.delta[j]))
    }
}

/// Gaussian log-likelihood `(n/2)(log det K - tr(S K))`.
pub fn gaussian_loglik(s: &SymMatrix, k: &SymMatrix, n: usize) -> Result<f64> {
    Ok(0.5 * n as f64 * (k.log_det()? - s.trace_product(k)))
}

/// Maximum-likelihood precision with zeros outside `edges`, plus the moment residual.
pub(crate) fn constrained_precision(
    s: &SymMatrix,
    edges: &EdgeSet,
    warm: Option<&SymMatrix>,
) -> Result<(SymMatrix, f64)> {
    let p = s.dim();
    if !s.is_positive_definite() {
        return Err(Error::NotPositiveDefinite("sample covariance".into()));
    }
    if edges.max_node().is_some_and(|m| m >= p) {
        return Err(Error::InvalidArgument("edge refers to a node outside the matrix".into()));
    }
    let sm = s.as_matrix();
    let mut w: DMatrix<f64> = match warm {
        Some(w0) if w0.dim() == p && w0.is_positive_definite() => {
            let mut w = w0.as_matrix().clone();
            for i in 0..p {
                w[(i, i)] = sm[(i, i)];
            }
            if SymMatrix::from_matrix(w.clone())?.is_positive_definite() {
                w
            } else {
                sm.clone()
            }
        }
        _ => sm.clone(),
    };
    let neighbors: Vec<Vec<usize>> = (0..p).map(|j| edges.neighbors(j, p)).collect();
    let scale = sm.abs().max().max(f64::MIN_POSITIVE);
    let mut betas: Vec<DVector<f64>> = vec![DVector::zeros(0); p];
    let mut iterations = 0;
    while iterations < TOL.fit_max_iter {
        iterations += 1;
        let mut change = 0.0f64;
        for j in 0..p {
            let nb = &neighbors[j];
            let beta = if nb.is_empty() {
                DVector::zeros(0)
            } else {
                let w11 = DMatrix::from_fn(nb.len(), nb.len(), |a, b| w[(nb[a], nb[b])]);
                let s12 = DVector::from_fn(nb.len(), |a, _| sm[(nb[a], j)]);
                let chol = w11
                    .cholesky()
                    .ok_or_else(|| Error::NotPositiveDefinite("working covariance block".into()))?;
                chol.solve(&s12)
            };
            for i in 0..p {
                if i == j {
                    continue;
                }
                let v: f64 = nb.iter().zip(beta.iter()).map(|(&c, &b)| w[(i, c)] * b).sum();
                change = change.max((w[(i, j)] - v).abs());
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
            betas[j] = beta;
        }
        if change <= TOL.fit_tol * scale {
            break;
        }
    }
    let mut k = DMatrix::zeros(p, p);
    for j in 0..p {
        let nb = &neighbors[j];
        let sb: f64 = nb.iter().zip(betas[j].iter()).map(|(&c, &b)| sm[(c, j)] * b).sum();
        let kjj = 1.0 / (sm[(j, j)] - sb);
        k[(j, j)] = kjj;
        for (&c, &b) in nb.iter().zip(betas[j].iter()) {
            k[(c, j)] = -b * kjj;
        }
    }
    let k = SymMatrix::from_matrix(k)?;
    let residual = moment_residual(s, &k, edges)?;
    if !(residual <= TOL.moment_tol * scale.max(1.0)) {
        return Err(Error::Convergence {
            what: "constrained GGM fit",
            iterations,
            residual,
        });
    }
    Ok((k, residual))
}

/// Largest `|(K^-1)_ij - S_ij|` over the diagonal and the free edges.
pub fn moment_residual(s: &SymMatrix, k: &SymMatrix, edges: &EdgeSet) -> Result<f64> {
    let w = spd_inverse(k)?;
    let p = s.dim();
    let mut worst = 0.0f64;
    for i in 0..p {
        worst = worst.max((w.get(i, i) - s.get(i, i)).abs());
    }
    for (i, j) in edges.iter() {
        worst = worst.max((w.get(i, j) - s.get(i, j)).abs());
    }
    Ok(worst)
}

/// Maximum-likelihood GGM with the given edge pattern for covariance `s` from `n` observations.
pub fn fit_constrained(s: &SymMatrix, n: usize, edges: &EdgeSet, nodes: &[String]) -> Result<GGMModel> {
    if nodes.len() != s.dim() {
        return Err(Error::InvalidArgument("node names do not match the matrix".into()));
    }
    let (k, _) = constrained_precision(s, edges, None)?;
    let ll = gaussian_loglik(s, &k, n)?;
    let fit = FitStats::new(ll, edges.len() + s.dim(), n);
    Ok(GGMModel::from_precision(nodes.to_vec(), &k, edges.clone(), Some(fit)))
}

/// Default node names `V1..Vp`.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("V{i}")).collect()
}
