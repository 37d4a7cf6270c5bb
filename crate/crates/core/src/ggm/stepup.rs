//! Greedy forward edge selection driven by exact likelihood-ratio refits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{constrained_precision, gaussian_loglik, EdgeSet, FitStats, GGMModel};
use crate::error::{Error, Result};
use crate::stats::special::chi_square_sf;
use crate::stats::{spd_inverse, SymMatrix};

/// One accepted edge addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub added: String,
    pub chi2: f64,
    pub p_value: f64,
    pub loglik: f64,
    pub bic: f64,
}

/// A state of the search together with its fitted log-likelihood.
pub(crate) trait Fitted: Clone + Send + Sync {
    fn loglik(&self) -> f64;
}

/// Generic step-up loop.
///
/// `expand` lists candidate states (one more free parameter each) with a
/// label; `fit` refits a candidate, warm-started from the current fit. A
/// candidate is eligible when its one-degree-of-freedom LR test has
/// `p < alpha`; the largest statistic is accepted only if BIC decreases.
pub(crate) fn greedy_stepup<S, F, X, P, R>(
    start: S,
    start_fit: F,
    n_total: usize,
    alpha: f64,
    expand: X,
    n_params: P,
    refit: R,
) -> Result<(S, F, Vec<StepRecord>)>
where
    S: Clone + Send + Sync,
    F: Fitted,
    X: Fn(&S) -> Vec<(String, S)>,
    P: Fn(&S) -> usize,
    R: Fn(&S, &F) -> Result<F> + Sync,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ln_n = (n_total as f64).ln();
    let mut state = start;
    let mut fit = start_fit;
    let mut steps = Vec::new();
    loop {
        let bic_old = -2.0 * fit.loglik() + n_params(&state) as f64 * ln_n;
        let candidates = expand(&state);
        if candidates.is_empty() {
            break;
        }
        let fits: Vec<Result<F>> = candidates.par_iter().map(|(_, s)| refit(s, &fit)).collect();
        let mut best: Option<(usize, f64, F)> = None;
        for (idx, f) in fits.into_iter().enumerate() {
            let f = f?;
            let chi2 = 2.0 * (f.loglik() - fit.loglik());
            if !(chi2 > 0.0) || chi_square_sf(chi2, 1.0) >= alpha {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b, _)| chi2 > *b) {
                best = Some((idx, chi2, f));
            }
        }
        let Some((idx, chi2, new_fit)) = best else { break };
        let (label, new_state) = candidates.into_iter().nth(idx).expect("candidate index");
        let bic_new = -2.0 * new_fit.loglik() + n_params(&new_state) as f64 * ln_n;
        if !(bic_new < bic_old) {
            break;
        }
        steps.push(StepRecord {
            added: label,
            chi2,
            p_value: chi_square_sf(chi2, 1.0),
            loglik: new_fit.loglik(),
            bic: bic_new,
        });
        state = new_state;
        fit = new_fit;
    }
    Ok((state, fit, steps))
}

#[derive(Clone)]
struct SingleFit {
    k: SymMatrix,
    w: SymMatrix,
    loglik: f64,
}

impl Fitted for SingleFit {
    fn loglik(&self) -> f64 {
        self.loglik
    }
}

fn fit_single(s: &SymMatrix, n: usize, edges: &EdgeSet, warm: Option<&SymMatrix>) -> Result<SingleFit> {
    let (k, _) = constrained_precision(s, edges, warm)?;
    let loglik = gaussian_loglik(s, &k, n)?;
    let w = spd_inverse(&k)?;
    Ok(SingleFit { k, w, loglik })
}

pub(crate) fn edge_label(nodes: &[String], i: usize, j: usize) -> String {
    format!("{}--{}", nodes[i], nodes[j])
}

/// Step-up search from the empty network; returns the final model and the accepted steps.
pub fn stepup_search_traced(
    s: &SymMatrix,
    n: usize,
    alpha: f64,
    nodes: &[String],
) -> Result<(GGMModel, Vec<StepRecord>)> {
    let p = s.dim();
    if nodes.len() != p {
        return Err(Error::InvalidArgument("node names do not match the matrix".into()));
    }
    let empty = EdgeSet::new();
    let start = fit_single(s, n, &empty, None)?;
    let (edges, fit, steps) = greedy_stepup(
        empty,
        start,
        n,
        alpha,
        |e: &EdgeSet| {
            e.absent(p)
                .into_iter()
                .map(|(i, j)| (edge_label(nodes, i, j), e.with(i, j)))
                .collect()
        },
        |e| e.len() + p,
        |e, cur| fit_single(s, n, e, Some(&cur.w)),
    )?;
    let stats = FitStats::new(fit.loglik, edges.len() + p, n);
    Ok((GGMModel::from_precision(nodes.to_vec(), &fit.k, edges, Some(stats)), steps))
}

/// Step-up search from the empty network at significance level `alpha`.
pub fn stepup_search(s: &SymMatrix, n: usize, alpha: f64, nodes: &[String]) -> Result<GGMModel> {
    stepup_search_traced(s, n, alpha, nodes).map(|(m, _)| m)
}
