//! Unique Variable Analysis: redundancy detection through weighted
//! topological overlap on an EBIC-selected graphical-lasso network.

pub mod glasso;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SurveyDataset;
use crate::numeric::TOL;
use crate::stats::{correlation_from_covariance, covariance, SymMatrix};

pub use glasso::{glasso, glasso_fit, kkt_residual, GlassoConfig, GlassoFit};

/// Partial-correlation network selected along a graphical-lasso path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCorrelationNetwork {
    pub nodes: Vec<String>,
    /// Partial correlations, zero diagonal.
    pub omega: SymMatrix,
    pub lambda: f64,
    pub ebic: f64,
    pub n_edges: usize,
}

/// Partial correlations `-K_ij / sqrt(K_ii K_jj)` with a zero diagonal.
pub fn partial_correlations(k: &SymMatrix) -> SymMatrix {
    SymMatrix::from_fn(k.dim(), |i, j| {
        if i == j {
            0.0
        } else {
            let v = k.get(i, j);
            if v == 0.0 {
                0.0
            } else {
                -v / (k.get(i, i) * k.get(j, j)).sqrt()
            }
        }
    })
}

fn count_edges(k: &SymMatrix) -> usize {
    let p = k.dim();
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .filter(|&(i, j)| k.get(i, j).abs() > TOL.zero_tol)
        .count()
}

/// EBIC of a precision matrix for `n` observations of correlation matrix `s`.
pub fn ebic(s: &SymMatrix, k: &SymMatrix, n: usize, gamma: f64) -> Result<f64> {
    let p = s.dim() as f64;
    let e = count_edges(k) as f64;
    let n = n as f64;
    let fit = k.log_det()? - s.trace_product(k);
    Ok(-n * fit + e * n.ln() + 4.0 * gamma * e * p.ln())
}

/// Log-spaced penalty path from `max |S_ij|` down to `max |S_ij| * ratio`.
pub fn lambda_path(s: &SymMatrix, cfg: &GlassoConfig) -> Vec<f64> {
    let lmax = s.max_abs_off_diagonal();
    if cfg.n_lambda == 1 {
        return vec![lmax];
    }
    let steps = (cfg.n_lambda - 1) as f64;
    (0..cfg.n_lambda)
        .map(|k| lmax * cfg.lambda_min_ratio.powf(k as f64 / steps))
        .collect()
}

/// Fits the graphical lasso along the penalty path and keeps the model with the lowest EBIC.
pub fn ebic_select(
    s: &SymMatrix,
    n: usize,
    nodes: &[String],
    cfg: &GlassoConfig,
) -> Result<PartialCorrelationNetwork> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::InsufficientData(format!("EBIC selection needs n >= 2, got {n}")));
    }
    if nodes.len() != s.dim() {
        return Err(Error::InvalidArgument("node names do not match the matrix".into()));
    }
    let p = s.dim();
    if p <= 1 || s.max_abs_off_diagonal() == 0.0 {
        let k = SymMatrix::diagonal(&s.diag().iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        return Ok(PartialCorrelationNetwork {
            nodes: nodes.to_vec(),
            omega: SymMatrix::zeros(p),
            lambda: s.max_abs_off_diagonal(),
            ebic: ebic(s, &k, n, cfg.gamma)?,
            n_edges: 0,
        });
    }
    let mut best: Option<(f64, f64, SymMatrix)> = None;
    let mut warm: Option<SymMatrix> = None;
    for lambda in lambda_path(s, cfg) {
        let fit = glasso_fit(s, lambda, cfg, warm.as_ref())?;
        let score = ebic(s, &fit.precision, n, cfg.gamma)?;
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, lambda, fit.precision.clone()));
        }
        warm = Some(fit.covariance);
    }
    let (score, lambda, k) = best.expect("non-empty path");
    Ok(PartialCorrelationNetwork {
        nodes: nodes.to_vec(),
        omega: partial_correlations(&k),
        lambda,
        ebic: score,
        n_edges: count_edges(&k),
    })
}

/// Weighted topological overlap of absolute partial correlations; diagonal is zero.
pub fn wto_matrix(omega: &SymMatrix) -> SymMatrix {
    let p = omega.dim();
    let a = |i: usize, j: usize| if i == j { 0.0 } else { omega.get(i, j).abs() };
    let strength: Vec<f64> = (0..p).map(|i| (0..p).map(|u| a(i, u)).sum()).collect();
    SymMatrix::from_fn(p, |i, j| {
        if i == j {
            return 0.0;
        }
        let shared: f64 = (0..p)
            .filter(|&u| u != i && u != j)
            .map(|u| a(i, u) * a(j, u))
            .sum();
        let num = shared + a(i, j);
        if num == 0.0 {
            return 0.0;
        }
        num / (strength[i].min(strength[j]) + 1.0 - a(i, j))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UvaConfig {
    pub threshold: f64,
    pub max_rounds: usize,
    #[serde(default)]
    pub glasso: GlassoConfig,
    /// Items that are never removed while they sit in a redundancy group.
    #[serde(default)]
    pub keep: Vec<String>,
}

impl Default for UvaConfig {
    fn default() -> Self {
        UvaConfig {
            threshold: 0.25,
            max_rounds: 5,
            glasso: GlassoConfig::default(),
            keep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyGroup {
    pub items: Vec<String>,
    pub kept: Vec<String>,
    pub max_wto: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub item: String,
    pub round: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvaRound {
    pub round: usize,
    pub items: Vec<String>,
    pub n: usize,
    pub lambda: f64,
    pub wto: SymMatrix,
    /// Item pair with the largest overlap, if the network has any edge.
    pub top_pair: Option<(String, String, f64)>,
    pub groups: Vec<RedundancyGroup>,
    pub removed: Vec<Removal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    /// Overlap matrix of the first round (on the full item set).
    pub wto: SymMatrix,
    pub groups: Vec<RedundancyGroup>,
    pub removed: Vec<Removal>,
    /// Number of rounds executed.
    pub rounds: usize,
    pub details: Vec<UvaRound>,
    pub remaining: Vec<String>,
}

fn sample_sd(col: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = col.clone().count() as f64;
    let mean = col.clone().sum::<f64>() / n;
    (col.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

fn run_round(ds: &SurveyDataset, cfg: &UvaConfig, round: usize) -> Result<UvaRound> {
    let ds = ds.beliefs_only();
    let names = ds.item_names();
    let p = names.len();
    if p < 3 {
        return Err(Error::InsufficientData(format!(
            "unique variable analysis needs at least 3 items, got {p}"
        )));
    }
    let x = ds.complete_matrix();
    let n = x.nrows();
    let s = correlation_from_covariance(&covariance(&x)?)?;
    let net = ebic_select(&s, n, &names, &cfg.glasso)?;
    let wto = wto_matrix(&net.omega);

    let mut top_pair = None;
    let mut parent: Vec<usize> = (0..p).collect();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = wto.get(i, j);
            if v > 0.0 && top_pair.as_ref().is_none_or(|(_, _, b)| v > *b) {
                top_pair = Some((names[i].clone(), names[j].clone(), v));
            }
            if v > cfg.threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let sds: Vec<f64> = (0..p).map(|j| sample_sd(x.column(j).iter().copied())).collect();

    let mut groups = Vec::new();
    let mut removed = Vec::new();
    for root in 0..p {
        let members: Vec<usize> = (0..p).filter(|&i| find(&mut parent, i) == root).collect();
        if members.len() < 2 {
            continue;
        }
        let mut max_wto = 0.0f64;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                max_wto = max_wto.max(wto.get(i, j));
            }
        }
        let pinned: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| cfg.keep.contains(&names[i]))
            .collect();
        let kept: Vec<usize> = if pinned.is_empty() {
            // largest SD wins; ties resolved by item order
            let best = members
                .iter()
                .copied()
                .fold(members[0], |b, i| if sds[i] > sds[b] { i } else { b });
            vec![best]
        } else {
            pinned
        };
        let kept_names: Vec<String> = kept.iter().map(|&i| names[i].clone()).collect();
        for &i in &members {
            if kept.contains(&i) {
                continue;
            }
            removed.push(Removal {
                item: names[i].clone(),
                round,
                reason: format!(
                    "redundant with {} (max wTO {:.3}); sd {:.4} below retained item",
                    kept_names.join(", "),
                    max_wto,
                    sds[i]
                ),
            });
        }
        groups.push(RedundancyGroup {
            items: members.iter().map(|&i| names[i].clone()).collect(),
            kept: kept_names,
            max_wto,
        });
    }
    Ok(UvaRound {
        round,
        items: names,
        n,
        lambda: net.lambda,
        wto,
        top_pair,
        groups,
        removed,
    })
}

/// One round of redundancy detection on the belief items of `ds`.
pub fn uva_round(ds: &SurveyDataset, cfg: &UvaConfig) -> Result<RedundancyReport> {
    let r = run_round(ds, cfg, 1)?;
    let removed_names: Vec<&String> = r.removed.iter().map(|x| &x.item).collect();
    let remaining = r
        .items
        .iter()
        .filter(|n| !removed_names.contains(n))
        .cloned()
        .collect();
    Ok(RedundancyReport {
        wto: r.wto.clone(),
        groups: r.groups.clone(),
        removed: r.removed.clone(),
        rounds: 1,
        details: vec![r],
        remaining,
    })
}

/// Repeats redundancy rounds until none is found, fewer than three items
/// remain, or `cfg.max_rounds` is reached. Returns the reduced dataset
/// (belief items only, group columns kept).
pub fn uva_iterate(ds: &SurveyDataset, cfg: &UvaConfig) -> Result<(SurveyDataset, RedundancyReport)> {
    if cfg.max_rounds < 1 {
        return Err(Error::InvalidArgument("max_rounds must be >= 1".into()));
    }
    let mut current = ds.select_items(&ds.beliefs_only().item_names())?;
    let mut details: Vec<UvaRound> = Vec::new();
    for round in 1..=cfg.max_rounds {
        if current.items().len() < 3 && round > 1 {
            break;
        }
        let r = run_round(&current, cfg, round)?;
        let removed: Vec<String> = r.removed.iter().map(|x| x.item.clone()).collect();
        details.push(r);
        if removed.is_empty() {
            break;
        }
        let keep: Vec<String> = current
            .item_names()
            .into_iter()
            .filter(|n| !removed.contains(n))
            .collect();
        current = current.select_items(&keep)?;
    }
    let first = &details[0];
    let report = RedundancyReport {
        wto: first.wto.clone(),
        groups: details.iter().flat_map(|d| d.groups.clone()).collect(),
        removed: details.iter().flat_map(|d| d.removed.clone()).collect(),
        rounds: details.len(),
        remaining: current.item_names(),
        details,
    };
    Ok((current, report))
}
