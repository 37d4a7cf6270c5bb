use beliefnet::ggm::default_names;
use beliefnet::influence::{
    distances, gic, gsm, kshell, network_influence, weighted_degree, DistanceRule, InfluenceParams, WeightedNetwork,
};
use beliefnet::stats::SymMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    let density: f64 = rng.random_range(0.15..0.9);
    let unit = rng.random_bool(0.3);
    let mut w = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.random::<f64>() < density {
                let mag = if unit { 1.0 } else { rng.random_range(0.05..1.0) };
                let v = if rng.random_bool(0.3) { -mag } else { mag };
                w[i][j] = v;
                w[j][i] = v;
            }
        }
    }
    w
}

fn to_net(w: &[Vec<f64>]) -> WeightedNetwork {
    let m = w.len();
    WeightedNetwork::new(default_names(m), SymMatrix::from_fn(m, |i, j| w[i][j])).unwrap()
}

fn degree_in(w: &[Vec<f64>], i: usize, alive: &[bool], p: &InfluenceParams) -> f64 {
    let mut k = 0.0;
    let mut s = 0.0;
    for j in 0..w.len() {
        if j != i && alive[j] && w[i][j] != 0.0 {
            k += 1.0;
            s += w[i][j].abs();
        }
    }
    if k == 0.0 {
        0.0
    } else {
        (f64::powf(k, p.alpha) * s.powf(p.beta)).powf(1.0 / (p.alpha + p.beta))
    }
}

/// Removes one qualifying node at a time, recomputing every degree from scratch.
fn kshell_oracle(w: &[Vec<f64>], p: &InfluenceParams) -> Vec<u32> {
    let m = w.len();
    let mut alive: Vec<bool> = (0..m).map(|i| (0..m).any(|j| w[i][j] != 0.0)).collect();
    let mut ks = vec![0u32; m];
    let mut level = 1u32;
    while alive.iter().any(|&a| a) {
        while let Some(i) = (0..m).find(|&i| alive[i] && degree_in(w, i, &alive, p) <= level as f64 + 1e-9) {
            alive[i] = false;
            ks[i] = level;
        }
        level += 1;
    }
    ks
}

fn floyd_warshall(w: &[Vec<f64>], unit: bool) -> Vec<Vec<f64>> {
    let m = w.len();
    let mut d = vec![vec![f64::INFINITY; m]; m];
    for i in 0..m {
        d[i][i] = 0.0;
        for j in 0..m {
            if i != j && w[i][j] != 0.0 {
                d[i][j] = if unit { 1.0 } else { 1.0 / w[i][j].abs() };
            }
        }
    }
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn oracle_scores(w: &[Vec<f64>], p: &InfluenceParams) -> (Vec<f64>, Vec<f64>) {
    let m = w.len();
    let ks = kshell_oracle(w, p);
    let d = floyd_warshall(w, p.distance_rule == DistanceRule::UnitLength);
    let hops = floyd_warshall(&w.iter().map(|r| r.iter().map(|v| if *v != 0.0 { 1.0 } else { 0.0 }).collect()).collect::<Vec<_>>(), false);
    let mut gic = vec![0.0; m];
    let mut gsm = vec![0.0; m];
    for i in 0..m {
        let mut gi = 0.0;
        for j in 0..m {
            if j != i && hops[i][j] <= p.radius as f64 {
                gic[i] += ks[i] as f64 * ks[j] as f64 / (d[i][j] * d[i][j]);
                gi += ks[j] as f64 / d[i][j];
            }
        }
        gsm[i] = (ks[i] as f64 / m as f64).exp() * gi;
    }
    (gic, gsm)
}

#[test]
fn kshell_gic_gsm_match_oracles_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let m = rng.random_range(1..=12);
        let w = random_weights(&mut rng, m);
        let net = to_net(&w);
        for rule in [DistanceRule::InverseAbsWeight, DistanceRule::UnitLength] {
            let p = InfluenceParams {
                distance_rule: rule,
                ..InfluenceParams::default()
            };
            assert_eq!(kshell(&net, &p), kshell_oracle(&w, &p), "case {case}");
            let (og, os) = oracle_scores(&w, &p);
            for (a, b) in gic(&net, &p).iter().zip(&og) {
                assert!((a - b).abs() <= 1e-10, "case {case}: gic {a} vs {b}");
            }
            for (a, b) in gsm(&net, &p).iter().zip(&os) {
                assert!((a.gsm - b).abs() <= 1e-10, "case {case}: gsm {} vs {b}", a.gsm);
            }
        }
    }
}

#[test]
fn shortest_paths_match_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let m = rng.random_range(2..=10);
        let w = random_weights(&mut rng, m);
        let d = distances(&to_net(&w), &InfluenceParams::default());
        let fw = floyd_warshall(&w, false);
        for i in 0..m {
            for j in 0..m {
                let (a, b) = (d.get(i, j), fw[i][j]);
                assert!(a == b || (a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn cycles_are_vertex_transitive() {
    for m in 4..=7 {
        let w: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if (i + 1) % m == j || (j + 1) % m == i { 0.4 } else { 0.0 }).collect())
            .collect();
        let rows = network_influence(&to_net(&w), &InfluenceParams::default()).unwrap();
        for r in &rows[1..] {
            assert_eq!(r.kshell, rows[0].kshell);
            assert!((r.gic - rows[0].gic).abs() < 1e-12);
            assert!((r.gsm - rows[0].gsm).abs() < 1e-12);
            assert!((r.weighted_degree - rows[0].weighted_degree).abs() < 1e-12);
        }
    }
}

fn graph_and_perm() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..=9, any::<u64>()).prop_flat_map(|(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(&mut rng, m);
        (Just(w), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabeling_permutes_outputs((w, perm) in graph_and_perm()) {
        let net = to_net(&w);
        let permuted = net.permuted(&perm).unwrap();
        let p = InfluenceParams::default();
        let base = network_influence(&net, &p).unwrap();
        let moved = network_influence(&permuted, &p).unwrap();
        for (k, &old) in perm.iter().enumerate() {
            prop_assert_eq!(&moved[k].node, &base[old].node);
            prop_assert_eq!(moved[k].kshell, base[old].kshell);
            prop_assert!((moved[k].gic - base[old].gic).abs() < 1e-10);
            prop_assert!((moved[k].gsm - base[old].gsm).abs() < 1e-10);
            prop_assert!((moved[k].strength - base[old].strength).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_invariants((w, _perm) in graph_and_perm()) {
        let net = to_net(&w);
        let p = InfluenceParams::default();
        let deg = weighted_degree(&net, &p);
        for (i, r) in network_influence(&net, &p).unwrap().iter().enumerate() {
            let has_edge = net.neighbors(i).next().is_some();
            prop_assert_eq!(r.kshell >= 1, has_edge);
            prop_assert!(r.gic >= 0.0);
            prop_assert!((r.gsm - r.gsm_self * r.gsm_global).abs() <= 1e-12 * r.gsm.abs().max(1.0));
            prop_assert_eq!(r.weighted_degree, deg[i]);
        }
    }
}
