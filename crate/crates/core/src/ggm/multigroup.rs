//! Multigroup GGMs with equality constraints between groups.
//!
//! Four constraint classes are supported, each in an empty (Omega = 0) and a
//! step-up searched variant:
//!
//! | id | constraint      | network |
//! |----|-----------------|---------|
//! | 1  | all free        | empty   |
//! | 2  | equal network   | empty   |
//! | 3  | equal scaling   | empty   |
//! | 4  | equal both      | empty   |
//! | 5  | all free        | search  |
//! | 6  | equal network   | search  |
//! | 7  | equal scaling   | search  |
//! | 8  | equal both      | search  |
//!
//! Equal-network models share Omega and are fitted by alternating a
//! per-group scaling update with a constrained fit on the pooled rescaled
//! covariance. Equal-scaling models share the precision diagonal
//! (`K_g,ii = 1 / Delta_i^2`) and are fitted by cyclic coordinate ascent over
//! the free precision entries. Equal-both models reduce to one fit on the
//! pooled covariance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stepup::{edge_label, greedy_stepup, stepup_search_traced, Fitted, StepRecord};
use super::{constrained_precision, gaussian_loglik, EdgeSet, FitStats, GGMModel};
use crate::error::{Error, Result};
use crate::ingest::SurveyDataset;
use crate::numeric::TOL;
use crate::stats::{covariance, spd_inverse, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    AllFree,
    EqualNetwork,
    EqualScaling,
    EqualBoth,
}

impl Constraint {
    pub const ALL: [Constraint; 4] = [
        Constraint::AllFree,
        Constraint::EqualNetwork,
        Constraint::EqualScaling,
        Constraint::EqualBoth,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Constraint::AllFree => "all_free",
            Constraint::EqualNetwork => "equal_network",
            Constraint::EqualScaling => "equal_scaling",
            Constraint::EqualBoth => "equal_both",
        }
    }

    fn shares_network(&self) -> bool {
        matches!(self, Constraint::EqualNetwork | Constraint::EqualBoth)
    }

    /// Model number 1-8 in the standard comparison suite.
    pub fn model_id(&self, empty: bool) -> u8 {
        let base = *self as u8 + 1;
        if empty {
            base
        } else {
            base + 4
        }
    }

    pub fn from_model_id(id: u8) -> Option<(Constraint, bool)> {
        match id {
            1..=4 => Some((Constraint::ALL[(id - 1) as usize], true)),
            5..=8 => Some((Constraint::ALL[(id - 5) as usize], false)),
            _ => None,
        }
    }
}

/// Sufficient statistics of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupData {
    pub label: String,
    pub nodes: Vec<String>,
    pub cov: SymMatrix,
    pub n: usize,
}

impl GroupData {
    pub fn new(label: impl Into<String>, nodes: Vec<String>, cov: SymMatrix, n: usize) -> Self {
        GroupData {
            label: label.into(),
            nodes,
            cov,
            n,
        }
    }

    /// Covariance of the complete belief rows of `ds`.
    pub fn from_dataset(label: impl Into<String>, ds: &SurveyDataset) -> Result<Self> {
        let ds = ds.beliefs_only();
        let x = ds.complete_matrix();
        Ok(GroupData {
            label: label.into(),
            nodes: ds.item_names(),
            cov: covariance(&x)?,
            n: x.nrows(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultigroupFit {
    pub model_id: u8,
    pub groups: Vec<String>,
    pub models: Vec<GGMModel>,
    pub constraint: Constraint,
    pub empty: bool,
    pub joint_fit: FitStats,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
enum Structure {
    Shared(EdgeSet),
    PerGroup(Vec<EdgeSet>),
}

impl Structure {
    fn for_group(&self, g: usize) -> &EdgeSet {
        match self {
            Structure::Shared(e) => e,
            Structure::PerGroup(v) => &v[g],
        }
    }
}

#[derive(Debug, Clone)]
struct JointFit {
    precisions: Vec<SymMatrix>,
    /// `I - Omega` shared by all groups (equal-network fits).
    shared_network: Option<SymMatrix>,
    /// Per-group inverse scaling `1 / Delta_g` (equal-network fits).
    inv_scaling: Vec<Vec<f64>>,
    loglik: f64,
}

impl Fitted for JointFit {
    fn loglik(&self) -> f64 {
        self.loglik
    }
}

fn joint_loglik(groups: &[GroupData], ks: &[SymMatrix]) -> Result<f64> {
    groups
        .iter()
        .zip(ks)
        .map(|(g, k)| gaussian_loglik(&g.cov, k, g.n))
        .sum()
}

fn n_total(groups: &[GroupData]) -> usize {
    groups.iter().map(|g| g.n).sum()
}

fn pooled_cov(groups: &[GroupData], weights: Option<&[Vec<f64>]>) -> Result<SymMatrix> {
    let p = groups[0].cov.dim();
    let n = n_total(groups) as f64;
    let mut acc = nalgebra::DMatrix::zeros(p, p);
    for (gi, g) in groups.iter().enumerate() {
        let w = g.n as f64 / n;
        for i in 0..p {
            for j in 0..p {
                let scale = weights.map_or(1.0, |d| d[gi][i] * d[gi][j]);
                acc[(i, j)] += w * scale * g.cov.get(i, j);
            }
        }
    }
    SymMatrix::from_matrix(acc)
}

fn n_params(constraint: Constraint, structure: &Structure, groups: usize, p: usize) -> usize {
    match (constraint, structure) {
        (Constraint::AllFree, s) => (0..groups).map(|g| s.for_group(g).len() + p).sum(),
        (Constraint::EqualNetwork, s) => s.for_group(0).len() + groups * p,
        (Constraint::EqualScaling, s) => (0..groups).map(|g| s.for_group(g).len()).sum::<usize>() + p,
        (Constraint::EqualBoth, s) => s.for_group(0).len() + p,
    }
}

fn fit_all_free(groups: &[GroupData], structure: &Structure, warm: Option<&JointFit>) -> Result<JointFit> {
    let ks: Vec<SymMatrix> = (0..groups.len())
        .map(|g| {
            let w = warm.map(|f| spd_inverse(&f.precisions[g])).transpose()?;
            constrained_precision(&groups[g].cov, structure.for_group(g), w.as_ref()).map(|(k, _)| k)
        })
        .collect::<Result<_>>()?;
    let loglik = joint_loglik(groups, &ks)?;
    Ok(JointFit {
        precisions: ks,
        shared_network: None,
        inv_scaling: Vec::new(),
        loglik,
    })
}

fn fit_equal_both(groups: &[GroupData], edges: &EdgeSet, warm: Option<&JointFit>) -> Result<JointFit> {
    let pooled = pooled_cov(groups, None)?;
    let w = warm.map(|f| spd_inverse(&f.precisions[0])).transpose()?;
    let (k, _) = constrained_precision(&pooled, edges, w.as_ref())?;
    let ks = vec![k; groups.len()];
    let loglik = joint_loglik(groups, &ks)?;
    Ok(JointFit {
        precisions: ks,
        shared_network: None,
        inv_scaling: Vec::new(),
        loglik,
    })
}

/// Maximizes `2 sum log d_i - d' A d` over `d > 0` by cyclic exact updates.
fn update_inv_scaling(a: &SymMatrix, d: &mut [f64]) {
    let p = d.len();
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for i in 0..p {
            let b: f64 = (0..p).filter(|&j| j != i).map(|j| a.get(i, j) * d[j]).sum();
            let aii = a.get(i, i);
            let new = (-b + (b * b + 4.0 * aii).sqrt()) / (2.0 * aii);
            change = change.max((new - d[i]).abs() / new);
            d[i] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
}

fn normalize_network(c: &SymMatrix, d: &mut [Vec<f64>]) -> SymMatrix {
    let e: Vec<f64> = c.diag().iter().map(|v| v.sqrt()).collect();
    for dg in d.iter_mut() {
        for (x, ei) in dg.iter_mut().zip(&e) {
            *x *= ei;
        }
    }
    SymMatrix::from_fn(c.dim(), |i, j| if i == j { 1.0 } else { c.get(i, j) / (e[i] * e[j]) })
}

fn scaled_precision(c: &SymMatrix, d: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(c.dim(), |i, j| d[i] * c.get(i, j) * d[j])
}

fn fit_equal_network(groups: &[GroupData], edges: &EdgeSet, warm: Option<&JointFit>) -> Result<JointFit> {
    let (mut c, mut d) = match warm.and_then(|f| f.shared_network.clone().map(|c| (c, f.inv_scaling.clone()))) {
        Some(state) => state,
        None => {
            let start = fit_equal_both(groups, edges, None)?;
            let mut d = vec![vec![1.0; groups[0].cov.dim()]; groups.len()];
            let c = normalize_network(&start.precisions[0], &mut d);
            (c, d)
        }
    };
    let compute_ll = |c: &SymMatrix, d: &[Vec<f64>]| -> Result<f64> {
        let ks: Vec<SymMatrix> = d.iter().map(|dg| scaled_precision(c, dg)).collect();
        joint_loglik(groups, &ks)
    };
    let mut ll = compute_ll(&c, &d)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < TOL.joint_max_iter {
        iterations += 1;
        for (g, dg) in groups.iter().zip(d.iter_mut()) {
            let a = SymMatrix::from_fn(c.dim(), |i, j| g.cov.get(i, j) * c.get(i, j));
            update_inv_scaling(&a, dg);
        }
        let rescaled = pooled_cov(groups, Some(&d))?;
        let w = spd_inverse(&c)?;
        let (cnew, _) = constrained_precision(&rescaled, edges, Some(&w))?;
        c = normalize_network(&cnew, &mut d);
        let new_ll = compute_ll(&c, &d)?;
        last_change = (new_ll - ll).abs();
        ll = new_ll;
        if last_change <= TOL.joint_rel_tol * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "equal-network multigroup fit",
            iterations,
            residual: last_change,
        });
    }
    let ks = d.iter().map(|dg| scaled_precision(&c, dg)).collect();
    Ok(JointFit {
        precisions: ks,
        shared_network: Some(c),
        inv_scaling: d,
        loglik: ll,
    })
}

/// Exact maximizer of `log det(K + t(e_i e_j' + e_j e_i')) - 2 t s` given `W = K^-1`.
fn edge_step(w: f64, a: f64, b: f64, s: f64) -> f64 {
    let c = w * w - a * b;
    let q = |t: f64| 1.0 + 2.0 * t * w + t * t * c;
    if s == 0.0 {
        return -w / c;
    }
    // s c t^2 + (2 s w - c) t + (s - w) = 0
    let qa = s * c;
    let qb = 2.0 * s * w - c;
    let qc = s - w;
    let disc = (c * c + 4.0 * s * s * a * b).sqrt();
    let qq = -0.5 * (qb + qb.signum() * disc);
    let r1 = qq / qa;
    let r2 = qc / qq;
    match (q(r1) > 0.0, q(r2) > 0.0) {
        (true, false) => r1,
        (false, true) => r2,
        _ => {
            let f = |t: f64| q(t).ln() - 2.0 * t * s;
            if q(r1) > 0.0 && f(r1) >= f(r2) {
                r1
            } else {
                r2
            }
        }
    }
}

/// Maximizer over `t` of `sum_g n_g (log(1 + t W_g) - t S_g)`.
fn diagonal_step(terms: &[(f64, f64, f64)]) -> f64 {
    // terms: (n_g, W_g,ii, S_g,ii)
    let deriv = |t: f64| -> (f64, f64) {
        terms.iter().fold((0.0, 0.0), |(g, h), &(n, w, s)| {
            let den = 1.0 + t * w;
            (g + n * (w / den - s), h - n * w * w / (den * den))
        })
    };
    let mut lo = terms.iter().map(|&(_, w, _)| -1.0 / w).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = f64::INFINITY;
    let mut t = 0.0f64;
    for _ in 0..500 {
        let (g, h) = deriv(t);
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - g / h;
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                t + (1.0 + t.abs()) * 2.0
            };
        }
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
            return next;
        }
        t = next;
    }
    t
}

fn rank_two_update(w: &mut SymMatrix, i: usize, j: usize, t: f64) {
    let p = w.dim();
    let (a, b, x) = (w.get(i, i), w.get(j, j), w.get(i, j) + 1.0 / t);
    let det = a * b - x * x;
    // M^-1 for M = [[a, x], [x, b]]
    let (m11, m12, m22) = (b / det, -x / det, a / det);
    let ci: Vec<f64> = (0..p).map(|r| w.get(r, i)).collect();
    let cj: Vec<f64> = (0..p).map(|r| w.get(r, j)).collect();
    for r in 0..p {
        for s in r..p {
            let upd = ci[r] * (m11 * ci[s] + m12 * cj[s]) + cj[r] * (m12 * ci[s] + m22 * cj[s]);
            w.set(r, s, w.get(r, s) - upd);
        }
    }
}

fn rank_one_update(w: &mut SymMatrix, i: usize, t: f64) {
    let p = w.dim();
    let ci: Vec<f64> = (0..p).map(|r| w.get(r, i)).collect();
    let den = 1.0 + t * ci[i];
    for r in 0..p {
        for s in r..p {
            w.set(r, s, w.get(r, s) - t * ci[r] * ci[s] / den);
        }
    }
}

fn fit_equal_scaling(groups: &[GroupData], structure: &Structure, warm: Option<&JointFit>) -> Result<JointFit> {
    let p = groups[0].cov.dim();
    let mut ks: Vec<SymMatrix> = match warm {
        Some(f) => f.precisions.clone(),
        None => {
            let pooled = pooled_cov(groups, None)?;
            let kappa: Vec<f64> = pooled.diag().iter().map(|v| 1.0 / v).collect();
            vec![SymMatrix::diagonal(&kappa); groups.len()]
        }
    };
    let mut ws: Vec<SymMatrix> = ks.iter().map(spd_inverse).collect::<Result<_>>()?;
    let mut ll = joint_loglik(groups, &ks)?;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    while iterations < TOL.joint_max_iter {
        iterations += 1;
        for (g, grp) in groups.iter().enumerate() {
            for (i, j) in structure.for_group(g).iter() {
                let w = &ws[g];
                let t = edge_step(w.get(i, j), w.get(i, i), w.get(j, j), grp.cov.get(i, j));
                if t != 0.0 && t.is_finite() {
                    let v = ks[g].get(i, j) + t;
                    ks[g].set(i, j, v);
                    rank_two_update(&mut ws[g], i, j, t);
                }
            }
        }
        for i in 0..p {
            let terms: Vec<(f64, f64, f64)> = groups
                .iter()
                .zip(&ws)
                .map(|(grp, w)| (grp.n as f64, w.get(i, i), grp.cov.get(i, i)))
                .collect();
            let t = diagonal_step(&terms);
            if t != 0.0 && t.is_finite() {
                for g in 0..groups.len() {
                    let v = ks[g].get(i, i) + t;
                    ks[g].set(i, i, v);
                    rank_one_update(&mut ws[g], i, t);
                }
            }
        }
        ws = ks.iter().map(spd_inverse).collect::<Result<_>>()?;
        let new_ll = joint_loglik(groups, &ks)?;
        last_change = (new_ll - ll).abs();
        ll = new_ll;
        if last_change <= TOL.joint_rel_tol * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "equal-scaling multigroup fit",
            iterations,
            residual: last_change,
        });
    }
    // the shared diagonal is kept bit-identical across groups
    let kappa = ks[0].diag();
    for k in ks.iter_mut().skip(1) {
        for (i, &v) in kappa.iter().enumerate() {
            k.set(i, i, v);
        }
    }
    let loglik = joint_loglik(groups, &ks)?;
    Ok(JointFit {
        precisions: ks,
        shared_network: None,
        inv_scaling: Vec::new(),
        loglik,
    })
}

fn fit_structure(
    groups: &[GroupData],
    constraint: Constraint,
    structure: &Structure,
    warm: Option<&JointFit>,
) -> Result<JointFit> {
    match constraint {
        Constraint::AllFree => fit_all_free(groups, structure, warm),
        Constraint::EqualBoth => fit_equal_both(groups, structure.for_group(0), warm),
        Constraint::EqualNetwork => fit_equal_network(groups, structure.for_group(0), warm),
        Constraint::EqualScaling => fit_equal_scaling(groups, structure, warm),
    }
}

fn validate_groups(groups: &[GroupData]) -> Result<usize> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("multigroup requires >= 2 groups".into()));
    }
    let p = groups[0].cov.dim();
    for g in groups {
        if g.cov.dim() != p || g.nodes != groups[0].nodes {
            return Err(Error::InvalidArgument(format!(
                "group `{}` does not share the node set of the first group",
                g.label
            )));
        }
        if !g.cov.is_positive_definite() {
            return Err(Error::NotPositiveDefinite(format!("covariance of group `{}`", g.label)));
        }
    }
    Ok(p)
}

fn assemble(
    groups: &[GroupData],
    constraint: Constraint,
    empty: bool,
    structure: &Structure,
    fit: &JointFit,
    steps: Vec<StepRecord>,
) -> MultigroupFit {
    let p = groups[0].cov.dim();
    let models = groups
        .iter()
        .enumerate()
        .map(|(g, grp)| {
            let edges = structure.for_group(g).clone();
            let k = &fit.precisions[g];
            let ll = gaussian_loglik(&grp.cov, k, grp.n).unwrap_or(f64::NAN);
            let stats = FitStats::new(ll, edges.len() + p, grp.n);
            let mut m = GGMModel::from_precision(grp.nodes.clone(), k, edges, Some(stats));
            if let Some(c) = &fit.shared_network {
                m.omega = SymMatrix::from_fn(p, |i, j| {
                    if i == j || !m.edges.contains(i, j) {
                        0.0
                    } else {
                        -c.get(i, j)
                    }
                });
                m.delta = fit.inv_scaling[g].iter().map(|d| 1.0 / d).collect();
            }
            m
        })
        .collect();
    let mut models: Vec<GGMModel> = models;
    if constraint == Constraint::EqualBoth {
        let first = models[0].clone();
        for m in models.iter_mut().skip(1) {
            m.omega = first.omega.clone();
            m.delta = first.delta.clone();
        }
    }
    if constraint == Constraint::EqualScaling {
        let first = models[0].delta.clone();
        for m in models.iter_mut().skip(1) {
            m.delta = first.clone();
        }
    }
    let k = n_params(constraint, structure, groups.len(), p);
    MultigroupFit {
        model_id: constraint.model_id(empty),
        groups: groups.iter().map(|g| g.label.clone()).collect(),
        models,
        constraint,
        empty,
        joint_fit: FitStats::new(fit.loglik, k, n_total(groups)),
        steps,
    }
}

/// Fits a multigroup model on a fixed structure: one shared edge set, or
/// one edge set per group (constraints that share the network use the first).
pub fn fit_multigroup_structure(
    groups: &[GroupData],
    constraint: Constraint,
    edges: &[EdgeSet],
) -> Result<MultigroupFit> {
    validate_groups(groups)?;
    let structure = if constraint.shares_network() || edges.len() == 1 {
        if constraint.shares_network() {
            Structure::Shared(edges[0].clone())
        } else {
            Structure::PerGroup(vec![edges[0].clone(); groups.len()])
        }
    } else if edges.len() == groups.len() {
        Structure::PerGroup(edges.to_vec())
    } else {
        return Err(Error::InvalidArgument("need one edge set or one per group".into()));
    };
    let warm = match (&structure, constraint) {
        (Structure::PerGroup(v), Constraint::EqualScaling) if v.windows(2).all(|w| w[0] == w[1]) => {
            Some(fit_equal_both(groups, &v[0], None)?)
        }
        _ => None,
    };
    let fit = fit_structure(groups, constraint, &structure, warm.as_ref())?;
    Ok(assemble(groups, constraint, false, &structure, &fit, Vec::new()))
}

/// Fits one multigroup model: `empty` fixes Omega = 0, otherwise the
/// structure is found by step-up search at level `alpha`.
pub fn fit_multigroup(groups: &[GroupData], constraint: Constraint, empty: bool, alpha: f64) -> Result<MultigroupFit> {
    let p = validate_groups(groups)?;
    let g_count = groups.len();
    let nodes = &groups[0].nodes;
    let nt = n_total(groups);
    let empty_structure = if constraint.shares_network() {
        Structure::Shared(EdgeSet::new())
    } else {
        Structure::PerGroup(vec![EdgeSet::new(); g_count])
    };
    if empty {
        let fit = fit_structure(groups, constraint, &empty_structure, None)?;
        return Ok(assemble(groups, constraint, true, &empty_structure, &fit, Vec::new()));
    }
    let (structure, fit, steps) = match constraint {
        Constraint::AllFree => {
            let per: Vec<(GGMModel, Vec<StepRecord>)> = groups
                .par_iter()
                .map(|g| stepup_search_traced(&g.cov, g.n, alpha, nodes))
                .collect::<Result<_>>()?;
            let mut steps = Vec::new();
            for (g, (_, s)) in groups.iter().zip(&per) {
                steps.extend(s.iter().cloned().map(|mut r| {
                    r.added = format!("{}: {}", g.label, r.added);
                    r
                }));
            }
            let structure = Structure::PerGroup(per.into_iter().map(|(m, _)| m.edges).collect());
            let fit = fit_all_free(groups, &structure, None)?;
            (structure, fit, steps)
        }
        Constraint::EqualBoth => {
            let pooled = pooled_cov(groups, None)?;
            let (m, steps) = stepup_search_traced(&pooled, nt, alpha, nodes)?;
            let structure = Structure::Shared(m.edges);
            let fit = fit_equal_both(groups, structure.for_group(0), None)?;
            (structure, fit, steps)
        }
        Constraint::EqualNetwork => {
            let start = fit_equal_network(groups, &EdgeSet::new(), None)?;
            let (edges, fit, steps) = greedy_stepup(
                EdgeSet::new(),
                start,
                nt,
                alpha,
                |e: &EdgeSet| {
                    e.absent(p)
                        .into_iter()
                        .map(|(i, j)| (edge_label(nodes, i, j), e.with(i, j)))
                        .collect()
                },
                |e| e.len() + g_count * p,
                |e, cur| fit_equal_network(groups, e, Some(cur)),
            )?;
            (Structure::Shared(edges), fit, steps)
        }
        Constraint::EqualScaling => {
            let start_edges = vec![EdgeSet::new(); g_count];
            let start = fit_equal_scaling(groups, &Structure::PerGroup(start_edges.clone()), None)?;
            let (edges, fit, steps) = greedy_stepup(
                start_edges,
                start,
                nt,
                alpha,
                |es: &Vec<EdgeSet>| {
                    let mut out = Vec::new();
                    for (g, e) in es.iter().enumerate() {
                        for (i, j) in e.absent(p) {
                            let mut next = es.clone();
                            next[g].insert(i, j);
                            out.push((format!("{}: {}", groups[g].label, edge_label(nodes, i, j)), next));
                        }
                    }
                    out
                },
                |es| es.iter().map(EdgeSet::len).sum::<usize>() + p,
                |es, cur| fit_equal_scaling(groups, &Structure::PerGroup(es.clone()), Some(cur)),
            )?;
            (Structure::PerGroup(edges), fit, steps)
        }
    };
    Ok(assemble(groups, constraint, false, &structure, &fit, steps))
}

/// Fits the requested suite of model ids (1-8); failures are reported per
/// model without aborting the others.
pub fn fit_model_suite(groups: &[GroupData], model_ids: &[u8], alpha: f64) -> Vec<(u8, Result<MultigroupFit>)> {
    model_ids
        .par_iter()
        .map(|&id| {
            let res = match Constraint::from_model_id(id) {
                Some((c, empty)) => fit_multigroup(groups, c, empty, alpha),
                None => Err(Error::InvalidArgument(format!("unknown model id {id}"))),
            };
            (id, res)
        })
        .collect()
}

fn bic_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Orders fits by ascending BIC; ties go to fewer parameters, then model id.
pub fn select_best(fits: &[MultigroupFit]) -> Result<Vec<MultigroupFit>> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("no fits to rank".into()));
    }
    let mut ranked = fits.to_vec();
    ranked.sort_by(|a, b| {
        let (ba, bb) = (a.joint_fit.bic, b.joint_fit.bic);
        if bic_tie(ba, bb) {
            a.joint_fit
                .n_params
                .cmp(&b.joint_fit.n_params)
                .then(a.model_id.cmp(&b.model_id))
        } else {
            ba.total_cmp(&bb)
        }
    });
    Ok(ranked)
}
