//! Synthetic GGMs and Gaussian samples from them.
//!
//! All randomness comes from a ChaCha8 generator seeded explicitly. Runs
//! that need several independent generators derive their seeds with
//! [`stream_seed`], so results do not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggm::{default_names, EdgeSet, GGMModel};
use crate::ingest::{ItemMeta, SupportGroup, SurveyDataset};
use crate::stats::SymMatrix;

const WEIGHT_RETRIES: usize = 100;
const SHRINK: f64 = 0.95;
const MAX_SHRINKS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    /// Probability of each edge; ignored when `edge_count` is set.
    pub density: f64,
    /// Range of `|omega|`.
    pub weight_range: (f64, f64),
    pub negative_fraction: f64,
    pub n: usize,
    pub seed: u64,
    /// Exact number of edges, drawn uniformly without replacement.
    #[serde(default)]
    pub edge_count: Option<usize>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidArgument("synthetic model needs p >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.density) || !(0.0..=1.0).contains(&self.negative_fraction) {
            return Err(Error::InvalidArgument("density and negative_fraction must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.weight_range;
        if !(lo >= 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidArgument("weight_range must satisfy 0 <= low <= high < 1".into()));
        }
        if let Some(k) = self.edge_count {
            if k > self.p * (self.p - 1) / 2 {
                return Err(Error::InvalidArgument(format!("edge_count {k} exceeds the number of pairs")));
            }
        }
        Ok(())
    }
}

/// Seed of an independent stream derived from `seed` (splitmix64 finalizer).
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn identity_minus(omega: &SymMatrix) -> SymMatrix {
    SymMatrix::from_fn(omega.dim(), |i, j| if i == j { 1.0 } else { -omega.get(i, j) })
}

/// Random GGM: edge set and signed weights from `spec`, scaling uniform in [0.7, 1.3].
///
/// Weights are redrawn while `I - Omega` is not positive definite; after a
/// bounded number of redraws Omega is shrunk geometrically instead.
pub fn random_ggm(spec: &SynthSpec) -> Result<GGMModel> {
    spec.validate()?;
    let p = spec.p;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let edges = match spec.edge_count {
        Some(k) => {
            pairs.shuffle(&mut rng);
            EdgeSet::from_pairs(pairs.into_iter().take(k))
        }
        None => EdgeSet::from_pairs(pairs.into_iter().filter(|_| rng.random::<f64>() < spec.density)),
    };
    let (lo, hi) = spec.weight_range;
    let draw = |rng: &mut ChaCha8Rng| {
        let mut omega = SymMatrix::zeros(p);
        for (i, j) in edges.iter() {
            let mag = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let sign = if rng.random::<f64>() < spec.negative_fraction { -1.0 } else { 1.0 };
            omega.set(i, j, sign * mag);
        }
        omega
    };
    let mut omega = draw(&mut rng);
    let mut tries = 1;
    while !identity_minus(&omega).is_positive_definite() && tries < WEIGHT_RETRIES {
        omega = draw(&mut rng);
        tries += 1;
    }
    let mut shrinks = 0;
    while !identity_minus(&omega).is_positive_definite() {
        if shrinks == MAX_SHRINKS {
            return Err(Error::InvalidModel("could not make I - Omega positive definite".into()));
        }
        omega = SymMatrix::from_fn(p, |i, j| omega.get(i, j) * SHRINK);
        shrinks += 1;
    }
    let delta = (0..p).map(|_| rng.random_range(0.7..=1.3)).collect();
    let mut m = GGMModel::from_parameters(default_names(p), omega, delta)?;
    m.edges = edges;
    Ok(m)
}

/// `n` rows drawn from N(0, implied_sigma(m)).
pub fn sample_matrix(m: &GGMModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sigma = m.implied_sigma()?;
    let chol = sigma
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("implied covariance".into()))?;
    let l = chol.l();
    let p = m.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, p);
    for r in 0..n {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        for c in 0..p {
            out[(r, c)] = x[c];
        }
    }
    Ok(out)
}

/// Dataset of `n` Gaussian rows; items are named after the model nodes and carry no scale.
pub fn sample_dataset(m: &GGMModel, n: usize, seed: u64) -> Result<SurveyDataset> {
    let x = sample_matrix(m, n, seed)?;
    let items = m
        .nodes
        .iter()
        .map(|name| ItemMeta {
            name: name.clone(),
            scale: None,
            support_group: SupportGroup::RegimePerformance,
        })
        .collect();
    SurveyDataset::from_matrix(items, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::correlation;

    fn spec(p: usize, density: f64) -> SynthSpec {
        SynthSpec {
            p,
            density,
            weight_range: (0.2, 0.4),
            negative_fraction: 0.3,
            n: 100,
            seed: 7,
            edge_count: None,
        }
    }

    #[test]
    fn zero_density_is_empty() {
        let m = random_ggm(&spec(5, 0.0)).unwrap();
        assert!(m.edges.is_empty());
        assert_eq!(m.omega.max_abs_off_diagonal(), 0.0);
        assert!(m.delta.iter().all(|d| (0.7..=1.3).contains(d)));
    }

    #[test]
    fn full_density_two_nodes() {
        let m = random_ggm(&spec(2, 1.0)).unwrap();
        assert_eq!(m.edges.len(), 1);
        let w = m.omega.get(0, 1).abs();
        assert!((0.2..=0.4).contains(&w));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let s = SynthSpec {
            edge_count: Some(6),
            ..spec(6, 0.5)
        };
        let a = random_ggm(&s).unwrap();
        assert_eq!(a, random_ggm(&s).unwrap());
        assert_eq!(a.edges.len(), 6);
        assert_eq!(sample_matrix(&a, 20, 3).unwrap(), sample_matrix(&a, 20, 3).unwrap());
        assert_ne!(sample_matrix(&a, 20, 3).unwrap(), sample_matrix(&a, 20, 4).unwrap());
    }

    #[test]
    fn dense_strong_weights_get_shrunk() {
        let s = SynthSpec {
            p: 8,
            density: 1.0,
            weight_range: (0.6, 0.9),
            negative_fraction: 0.0,
            ..spec(8, 1.0)
        };
        let m = random_ggm(&s).unwrap();
        assert!(identity_minus(&m.omega).is_positive_definite());
    }

    #[test]
    fn large_sample_matches_correlation() {
        let omega = SymMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let m = GGMModel::from_parameters(default_names(2), omega, vec![1.0, 1.0]).unwrap();
        let x = sample_matrix(&m, 100_000, 11).unwrap();
        let r = correlation(&x).unwrap().get(0, 1);
        assert!((r - 0.5).abs() < 0.01, "r = {r}");
        assert_eq!(sample_dataset(&m, 1, 1).unwrap().n_rows(), 1);
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(1, 0), stream_seed(1, 1));
        assert_eq!(stream_seed(5, 3), stream_seed(5, 3));
    }
}
