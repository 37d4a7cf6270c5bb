use beliefnet::ingest::{ItemMeta, SupportGroup, SurveyDataset};
use beliefnet::stats::{spd_inverse, SymMatrix};
use beliefnet::uva::{ebic_select, glasso, kkt_residual, uva_iterate, GlassoConfig, UvaConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn wishart(rng: &mut ChaCha8Rng, p: usize, df: usize) -> SymMatrix {
    let a = DMatrix::from_fn(p, df, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymMatrix::from_matrix(&a * a.transpose() / df as f64).unwrap()
}

#[test]
fn kkt_holds_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = GlassoConfig::default();
    for case in 0..50 {
        let p = rng.random_range(2..=9);
        let s = wishart(&mut rng, p, p + 5);
        let lambda = rng.random_range(0.0..1.2) * s.max_abs_off_diagonal();
        let k = glasso(&s, lambda, &cfg).unwrap();
        let r = kkt_residual(&s, &k, lambda).unwrap();
        assert!(r < 1e-4, "case {case}: residual {r}");
    }
}

#[test]
fn penalty_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let cfg = GlassoConfig::default();
    for _ in 0..10 {
        let p = rng.random_range(2..=8);
        let s = wishart(&mut rng, p, 3 * p + 10);
        let big = glasso(&s, 1e6, &cfg).unwrap();
        assert_eq!(big.max_abs_off_diagonal(), 0.0);
        let zero = glasso(&s, 0.0, &cfg).unwrap();
        assert!(zero.max_abs_diff(&spd_inverse(&s).unwrap()) < 1e-6);
    }
}

fn dataset(x: &DMatrix<f64>) -> SurveyDataset {
    let items = (0..x.ncols())
        .map(|j| ItemMeta::belief(format!("Q{j}"), -100.0, 100.0, SupportGroup::RegimePrinciples))
        .collect();
    SurveyDataset::from_matrix(items, x).unwrap()
}

fn column_sd(x: &DMatrix<f64>, j: usize) -> f64 {
    let c = x.column(j);
    let mean = c.mean();
    (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c.len() - 1) as f64).sqrt()
}

#[test]
fn duplicated_column_is_removed_once() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 500;
        let mut x = DMatrix::from_fn(n, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        for r in 0..n {
            x[(r, 5)] = x[(r, 0)] + 0.01 * rng.sample::<f64, _>(StandardNormal);
        }
        let (reduced, report) = uva_iterate(&dataset(&x), &UvaConfig::default()).unwrap();
        assert_eq!(report.removed.len(), 1, "seed {seed}");
        let top = report.details[0].top_pair.clone().unwrap();
        assert!(top.2 > 0.9);
        let pair = [top.0.as_str(), top.1.as_str()];
        assert!(pair.contains(&"Q0") && pair.contains(&"Q5"));
        let lower = if column_sd(&x, 0) < column_sd(&x, 5) { "Q0" } else { "Q5" };
        assert_eq!(report.removed[0].item, lower);
        assert_eq!(reduced.items().len(), 5);
    }
}

#[test]
fn independent_items_are_kept() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = DMatrix::from_fn(500, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (_, report) = uva_iterate(&dataset(&x), &UvaConfig::default()).unwrap();
        assert!(report.removed.is_empty(), "seed {seed}");
        assert_eq!(report.rounds, 1);
    }
}

#[test]
fn ebic_picks_sparse_network_for_independent_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = wishart(&mut rng, 6, 2000);
    let names: Vec<String> = (0..6).map(|i| format!("Q{i}")).collect();
    let net = ebic_select(&s, 2000, &names, &GlassoConfig::default()).unwrap();
    assert!(net.n_edges <= 2);
}
