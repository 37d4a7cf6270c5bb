//! Graphical lasso by block coordinate descent on the working covariance.
//!
//! Solves `max log det K - tr(S K) - lambda * sum_{i != j} |K_ij|` with an
//! unpenalized diagonal. Each sweep updates one row/column of the working
//! covariance `W` through a lasso subproblem; `log det W` is non-decreasing
//! across sweeps and the final precision is recovered from the lasso
//! coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::TOL;
use crate::stats::{spd_inverse, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlassoConfig {
    /// EBIC hyperparameter.
    pub gamma: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Largest allowed change of `W` between sweeps at convergence.
    pub convergence_tol: f64,
    pub max_sweeps: usize,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        GlassoConfig {
            gamma: 0.5,
            n_lambda: 100,
            lambda_min_ratio: 0.01,
            convergence_tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

impl GlassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("glasso gamma must be >= 0".into()));
        }
        if self.n_lambda < 1 {
            return Err(Error::InvalidArgument("glasso n_lambda must be >= 1".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument("glasso lambda_min_ratio must lie in (0, 1)".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidArgument("glasso convergence_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub precision: SymMatrix,
    /// Working covariance `W`, the inverse of `precision` at convergence.
    pub covariance: SymMatrix,
    pub sweeps: usize,
    /// `log det W` after every sweep.
    pub sweep_log_det: Vec<f64>,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Precision matrix of the graphical lasso at penalty `lambda`.
pub fn glasso(s: &SymMatrix, lambda: f64, cfg: &GlassoConfig) -> Result<SymMatrix> {
    glasso_fit(s, lambda, cfg, None).map(|f| f.precision)
}

/// Full graphical-lasso fit, optionally warm-started from a previous working covariance.
pub fn glasso_fit(
    s: &SymMatrix,
    lambda: f64,
    cfg: &GlassoConfig,
    warm: Option<&SymMatrix>,
) -> Result<GlassoFit> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let p = s.dim();
    if let Some(i) = (0..p).find(|&i| !(s.get(i, i) > 0.0)) {
        return Err(Error::InvalidArgument(format!("S has non-positive diagonal at {i}")));
    }
    let mut w = match warm {
        Some(w0) if w0.dim() == p => w0.as_matrix().clone(),
        _ => s.as_matrix().clone(),
    };
    for i in 0..p {
        w[(i, i)] = s.get(i, i);
    }
    if p == 1 {
        let k = SymMatrix::diagonal(&[1.0 / s.get(0, 0)]);
        return Ok(GlassoFit {
            precision: k,
            covariance: SymMatrix::from_matrix(w)?,
            sweeps: 0,
            sweep_log_det: Vec::new(),
        });
    }
    // beta[j] holds the lasso coefficients of column j over the other indices
    let mut beta = vec![vec![0.0; p - 1]; p];
    let mut sweep_log_det = Vec::new();
    let inner_tol = (cfg.convergence_tol * 1e-2).max(1e-15);
    let max_inner = 100_000;
    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    let mut idx = Vec::with_capacity(p - 1);
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        change = 0.0f64;
        for j in 0..p {
            idx.clear();
            idx.extend((0..p).filter(|&k| k != j));
            let b = &mut beta[j];
            // fitted = W11 * b
            let mut fitted: Vec<f64> = idx
                .iter()
                .map(|&a| idx.iter().zip(b.iter()).map(|(&c, &bc)| w[(a, c)] * bc).sum())
                .collect();
            let mut converged = false;
            for _ in 0..max_inner {
                let mut delta = 0.0f64;
                for (k, &a) in idx.iter().enumerate() {
                    let wkk = w[(a, a)];
                    let partial = s.get(a, j) - (fitted[k] - wkk * b[k]);
                    let new = soft_threshold(partial, lambda) / wkk;
                    let d = new - b[k];
                    if d != 0.0 {
                        for (m, &c) in idx.iter().enumerate() {
                            fitted[m] += w[(c, a)] * d;
                        }
                        b[k] = new;
                        delta = delta.max(d.abs());
                    }
                }
                if delta < inner_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Convergence {
                    what: "glasso lasso subproblem",
                    iterations: max_inner,
                    residual: f64::NAN,
                });
            }
            for (k, &a) in idx.iter().enumerate() {
                change = change.max((w[(a, j)] - fitted[k]).abs());
                w[(a, j)] = fitted[k];
                w[(j, a)] = fitted[k];
            }
        }
        let wm = SymMatrix::from_matrix(w.clone())?;
        sweep_log_det.push(wm.log_det().unwrap_or(f64::NEG_INFINITY));
        if change < cfg.convergence_tol {
            break;
        }
    }
    if change >= cfg.convergence_tol {
        return Err(Error::Convergence {
            what: "glasso",
            iterations: sweeps,
            residual: change,
        });
    }

    let mut k = nalgebra::DMatrix::zeros(p, p);
    for j in 0..p {
        let idx: Vec<usize> = (0..p).filter(|&a| a != j).collect();
        let w12b: f64 = idx.iter().zip(&beta[j]).map(|(&a, &b)| w[(a, j)] * b).sum();
        let kjj = 1.0 / (w[(j, j)] - w12b);
        k[(j, j)] = kjj;
        for (&a, &b) in idx.iter().zip(&beta[j]) {
            k[(a, j)] = -b * kjj;
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (k[(i, j)], k[(j, i)]);
            let v = if a == 0.0 || b == 0.0 { 0.0 } else { 0.5 * (a + b) };
            let v = if v.abs() < TOL.zero_tol { 0.0 } else { v };
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GlassoFit {
        precision: SymMatrix::from_matrix(k)?,
        covariance: SymMatrix::from_matrix(w)?,
        sweeps,
        sweep_log_det,
    })
}

/// Largest violation of the graphical-lasso optimality conditions at `k`.
pub fn kkt_residual(s: &SymMatrix, k: &SymMatrix, lambda: f64) -> Result<f64> {
    let w = spd_inverse(k)?;
    let p = s.dim();
    let mut worst = 0.0f64;
    for i in 0..p {
        worst = worst.max((s.get(i, i) - w.get(i, i)).abs());
        for j in (i + 1)..p {
            let g = s.get(i, j) - w.get(i, j);
            let kij = k.get(i, j);
            let r = if kij == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * kij.signum()).abs()
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Penalized objective `log det K - tr(S K) - lambda * sum_{i != j} |K_ij|`.
pub fn glasso_objective(s: &SymMatrix, k: &SymMatrix, lambda: f64) -> Result<f64> {
    let p = k.dim();
    let mut l1 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                l1 += k.get(i, j).abs();
            }
        }
    }
    Ok(k.log_det()? - s.trace_product(k) - lambda * l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corr2(r: f64) -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = corr2(0.5);
        let k = glasso(&s, 0.2, &GlassoConfig::default()).unwrap();
        let w = spd_inverse(&k).unwrap();
        assert_relative_eq!(w.get(0, 1), 0.3, epsilon = 1e-9);
        assert_relative_eq!(k.get(0, 1), -0.3 / (1.0 - 0.09), epsilon = 1e-9);
        assert_relative_eq!(k.get(0, 0), 1.0 / (1.0 - 0.09), epsilon = 1e-9);
    }

    #[test]
    fn full_shrinkage_gives_diagonal() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.4, -0.2], vec![0.4, 1.0, 0.1], vec![-0.2, 0.1, 1.0]]).unwrap();
        let k = glasso(&s, 0.4, &GlassoConfig::default()).unwrap();
        assert_eq!(k.max_abs_off_diagonal(), 0.0);
        for i in 0..3 {
            assert_relative_eq!(k.get(i, i), 1.0 / s.get(i, i), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_penalty_inverts() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.4, -0.2], vec![0.4, 1.0, 0.1], vec![-0.2, 0.1, 1.0]]).unwrap();
        let k = glasso(&s, 0.0, &GlassoConfig::default()).unwrap();
        assert!(k.max_abs_diff(&spd_inverse(&s).unwrap()) < 1e-8);
    }

    #[test]
    fn sweeps_increase_log_det_w() {
        let s = SymMatrix::from_rows(&[
            vec![1.0, 0.6, 0.3, 0.1],
            vec![0.6, 1.0, 0.5, 0.2],
            vec![0.3, 0.5, 1.0, 0.4],
            vec![0.1, 0.2, 0.4, 1.0],
        ])
        .unwrap();
        let fit = glasso_fit(&s, 0.05, &GlassoConfig::default(), None).unwrap();
        let start = s.log_det().unwrap();
        let mut prev = start;
        for &v in &fit.sweep_log_det {
            assert!(v >= prev - 1e-12, "{v} < {prev}");
            prev = v;
        }
        assert!(kkt_residual(&s, &fit.precision, 0.05).unwrap() < 1e-8);
    }

    #[test]
    fn rejects_negative_lambda() {
        assert!(glasso(&corr2(0.1), -1.0, &GlassoConfig::default()).is_err());
    }
}
