//! Node influence on weighted belief networks: weighted degree, weighted
//! k-shell decomposition, gravity index centrality (GIC) and the global
//! structure model (GSM).
//!
//! All metrics use absolute weights. Shortest paths run over edge lengths
//! `1 / |w|` (or unit lengths); the neighbourhood of a node is the ball of
//! hop radius `radius` around it.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggm::GGMModel;
use crate::numeric::TOL;
use crate::stats::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRule {
    #[default]
    InverseAbsWeight,
    UnitLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfluenceParams {
    pub alpha: f64,
    pub beta: f64,
    pub radius: usize,
    pub distance_rule: DistanceRule,
}

impl Default for InfluenceParams {
    fn default() -> Self {
        InfluenceParams {
            alpha: 1.0,
            beta: 2.0,
            radius: 3,
            distance_rule: DistanceRule::InverseAbsWeight,
        }
    }
}

impl InfluenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !(self.alpha + self.beta > 0.0) {
            return Err(Error::InvalidArgument(
                "influence alpha and beta must be >= 0 with a positive sum".into(),
            ));
        }
        if self.radius < 1 {
            return Err(Error::InvalidArgument("influence radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Undirected network with signed weights; an edge exists where the weight is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    nodes: Vec<String>,
    weights: SymMatrix,
}

impl WeightedNetwork {
    pub fn new(nodes: Vec<String>, weights: SymMatrix) -> Result<Self> {
        let p = weights.dim();
        if nodes.len() != p {
            return Err(Error::InvalidArgument("node names do not match the weight matrix".into()));
        }
        for i in 0..p {
            if weights.get(i, i) != 0.0 {
                return Err(Error::InvalidArgument(format!("self-weight on node `{}`", nodes[i])));
            }
            for j in 0..p {
                if !weights.get(i, j).is_finite() {
                    return Err(Error::InvalidArgument("non-finite edge weight".into()));
                }
            }
        }
        Ok(WeightedNetwork { nodes, weights })
    }

    pub fn from_model(m: &GGMModel) -> Result<Self> {
        WeightedNetwork::new(m.nodes.clone(), m.omega.clone())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn weights(&self) -> &SymMatrix {
        &self.weights
    }

    /// Node count.
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.weights.get(i, j) != 0.0
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).filter(move |&j| self.has_edge(i, j))
    }

    /// Same network with nodes reordered: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let nodes = perm.iter().map(|&i| self.nodes[i].clone()).collect();
        let weights = SymMatrix::from_fn(self.m(), |a, b| self.weights.get(perm[a], perm[b]));
        WeightedNetwork::new(nodes, weights)
    }
}

fn combine(k: usize, s: f64, params: &InfluenceParams) -> f64 {
    if k == 0 {
        return 0.0;
    }
    ((k as f64).powf(params.alpha) * s.powf(params.beta)).powf(1.0 / (params.alpha + params.beta))
}

fn weighted_degree_within(net: &WeightedNetwork, params: &InfluenceParams, alive: &[bool]) -> Vec<f64> {
    (0..net.m())
        .map(|i| {
            let (k, s) = net
                .neighbors(i)
                .filter(|&j| alive[j])
                .fold((0usize, 0.0f64), |(k, s), j| (k + 1, s + net.weights.get(i, j).abs()));
            combine(k, s, params)
        })
        .collect()
}

/// `k'_i = [k_i^alpha s_i^beta]^(1/(alpha+beta))` with `s_i = sum_j |w_ij|`.
pub fn weighted_degree(net: &WeightedNetwork, params: &InfluenceParams) -> Vec<f64> {
    weighted_degree_within(net, params, &vec![true; net.m()])
}

/// Weighted k-shell indices.
///
/// At level `k = 1, 2, ...` nodes whose weighted degree in the remaining
/// network is `<= k` are removed repeatedly, with degrees recomputed after
/// each removal, and receive shell `k`. Nodes without any edge get shell 0.
pub fn kshell(net: &WeightedNetwork, params: &InfluenceParams) -> Vec<u32> {
    let m = net.m();
    let mut ks = vec![0u32; m];
    let mut alive: Vec<bool> = (0..m).map(|i| net.neighbors(i).next().is_some()).collect();
    let mut level = 1u32;
    while alive.iter().any(|&a| a) {
        loop {
            let deg = weighted_degree_within(net, params, &alive);
            let removed: Vec<usize> = (0..m)
                .filter(|&i| alive[i] && deg[i] <= level as f64 + TOL.shell_tol)
                .collect();
            if removed.is_empty() {
                break;
            }
            for i in removed {
                alive[i] = false;
                ks[i] = level;
            }
        }
        level += 1;
    }
    ks
}

fn edge_length(w: f64, rule: DistanceRule) -> f64 {
    match rule {
        DistanceRule::InverseAbsWeight => 1.0 / w.abs(),
        DistanceRule::UnitLength => 1.0,
    }
}

fn graph(net: &WeightedNetwork) -> UnGraph<(), f64> {
    let m = net.m();
    let edges = (0..m).flat_map(|i| ((i + 1)..m).filter(move |&j| net.has_edge(i, j)).map(move |j| (i, j)));
    let mut g = UnGraph::with_capacity(m, 0);
    for _ in 0..m {
        g.add_node(());
    }
    for (i, j) in edges {
        g.add_edge(NodeIndex::new(i), NodeIndex::new(j), net.weights.get(i, j));
    }
    g
}

/// All-pairs shortest-path lengths (Dijkstra from every node); unreachable pairs are `+inf`.
pub fn distances(net: &WeightedNetwork, params: &InfluenceParams) -> SymMatrix {
    let g = graph(net);
    let rule = params.distance_rule;
    let rows: Vec<Vec<f64>> = (0..net.m())
        .into_par_iter()
        .map(|s| {
            let found = dijkstra(&g, NodeIndex::new(s), None, |e| edge_length(*e.weight(), rule));
            (0..net.m())
                .map(|t| found.get(&NodeIndex::new(t)).copied().unwrap_or(f64::INFINITY))
                .collect()
        })
        .collect();
    // path sums may differ in the last bit by direction; keep the upper triangle
    SymMatrix::from_fn(net.m(), |i, j| rows[i.min(j)][i.max(j)])
}

/// Hop counts between all pairs; `None` when unreachable.
pub fn hop_counts(net: &WeightedNetwork) -> Vec<Vec<Option<usize>>> {
    let g = graph(net);
    (0..net.m())
        .map(|s| {
            let found = dijkstra(&g, NodeIndex::new(s), None, |_| 1usize);
            (0..net.m()).map(|t| found.get(&NodeIndex::new(t)).copied()).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsmScore {
    /// `exp(ks_i / m)`.
    pub self_influence: f64,
    /// `sum_{j in theta_i} ks_j / d_ij`.
    pub global_influence: f64,
    pub gsm: f64,
}

struct Structure {
    ks: Vec<u32>,
    dist: SymMatrix,
    hops: Vec<Vec<Option<usize>>>,
}

impl Structure {
    fn new(net: &WeightedNetwork, params: &InfluenceParams) -> Self {
        Structure {
            ks: kshell(net, params),
            dist: distances(net, params),
            hops: hop_counts(net),
        }
    }

    fn ball(&self, i: usize, radius: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.ks.len()).filter(move |&j| j != i && self.hops[i][j].is_some_and(|h| h <= radius))
    }

    fn gic(&self, radius: usize) -> Vec<f64> {
        (0..self.ks.len())
            .map(|i| {
                self.ball(i, radius)
                    .map(|j| {
                        let d = self.dist.get(i, j);
                        self.ks[i] as f64 * self.ks[j] as f64 / (d * d)
                    })
                    .sum()
            })
            .collect()
    }

    fn gsm(&self, radius: usize) -> Vec<GsmScore> {
        let m = self.ks.len() as f64;
        (0..self.ks.len())
            .map(|i| {
                let self_influence = (self.ks[i] as f64 / m).exp();
                let global_influence: f64 = self
                    .ball(i, radius)
                    .map(|j| self.ks[j] as f64 / self.dist.get(i, j))
                    .sum();
                GsmScore {
                    self_influence,
                    global_influence,
                    gsm: self_influence * global_influence,
                }
            })
            .collect()
    }
}

/// `GIC_i = sum_{j in theta_i} ks_i ks_j / d_ij^2`.
pub fn gic(net: &WeightedNetwork, params: &InfluenceParams) -> Vec<f64> {
    Structure::new(net, params).gic(params.radius)
}

pub fn gsm(net: &WeightedNetwork, params: &InfluenceParams) -> Vec<GsmScore> {
    Structure::new(net, params).gsm(params.radius)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfluence {
    pub node: String,
    pub weighted_degree: f64,
    pub kshell: u32,
    pub gic: f64,
    pub gsm_self: f64,
    pub gsm_global: f64,
    pub gsm: f64,
    /// Sum of absolute incident weights.
    pub strength: f64,
}

pub fn network_influence(net: &WeightedNetwork, params: &InfluenceParams) -> Result<Vec<NodeInfluence>> {
    params.validate()?;
    let st = Structure::new(net, params);
    let degree = weighted_degree(net, params);
    let gic = st.gic(params.radius);
    let gsm = st.gsm(params.radius);
    Ok((0..net.m())
        .map(|i| NodeInfluence {
            node: net.nodes[i].clone(),
            weighted_degree: degree[i],
            kshell: st.ks[i],
            gic: gic[i],
            gsm_self: gsm[i].self_influence,
            gsm_global: gsm[i].global_influence,
            gsm: gsm[i].gsm,
            strength: net.neighbors(i).map(|j| net.weights.get(i, j).abs()).sum(),
        })
        .collect())
}

/// Influence metrics of every node of a fitted model, in node order.
pub fn influence_table(model: &GGMModel, params: &InfluenceParams) -> Result<Vec<NodeInfluence>> {
    network_influence(&WeightedNetwork::from_model(model)?, params)
}
