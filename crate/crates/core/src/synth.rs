//! Synthetic multi-graphs and behavior sessions for tests and demos.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multigraph::{BehaviorSequences, Edge, MultiGraph, SequenceRecord};
use crate::rng::{indexed_stream, stream};

/// Stochastic block model with one block assignment per domain.
///
/// Domain 0 uses contiguous equal blocks. Every further domain starts from that
/// assignment and moves a `reassign` fraction of nodes to a different random block,
/// so domains share most of their community structure without being identical.
/// Edge weights are uniform integers in `1..=max_weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n_nodes: usize,
    pub blocks: usize,
    pub n_domains: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub reassign: f64,
    pub max_weight: u32,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            n_nodes: 60,
            blocks: 2,
            n_domains: 2,
            p_in: 0.6,
            p_out: 0.01,
            reassign: 0.2,
            max_weight: 3,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 nodes, got {}",
                self.n_nodes
            )));
        }
        if self.blocks == 0 || self.blocks > self.n_nodes {
            return Err(Error::InvalidInput(format!("blocks must be in [1, {}]", self.n_nodes)));
        }
        if self.n_domains == 0 {
            return Err(Error::InvalidInput("need at least one domain".into()));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out), ("reassign", self.reassign)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.max_weight == 0 {
            return Err(Error::InvalidInput("max_weight must be at least 1".into()));
        }
        Ok(())
    }
}

/// A generated graph together with each domain's block assignment.
#[derive(Debug, Clone)]
pub struct SbmGraph {
    pub graph: MultiGraph,
    pub blocks: Vec<Vec<usize>>,
}

pub fn sbm(params: SbmParams, seed: u64) -> Result<SbmGraph> {
    params.validate()?;
    let n = params.n_nodes;
    let base: Vec<usize> = (0..n).map(|i| i * params.blocks / n).collect();
    let mut blocks = vec![base.clone()];
    let mut rng = stream(seed, "sbm/blocks");
    for _ in 1..params.n_domains {
        let mut assign = base.clone();
        if params.blocks > 1 {
            for a in assign.iter_mut() {
                if rng.gen::<f64>() < params.reassign {
                    let shift = rng.gen_range(1..params.blocks);
                    *a = (*a + shift) % params.blocks;
                }
            }
        }
        blocks.push(assign);
    }
    let mut edges = Vec::with_capacity(params.n_domains);
    for (d, assign) in blocks.iter().enumerate() {
        let mut rng = indexed_stream(seed, "sbm/edges", d);
        let mut list = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if assign[i] == assign[j] {
                    params.p_in
                } else {
                    params.p_out
                };
                if rng.gen::<f64>() < p {
                    let weight = rng.gen_range(1..=params.max_weight) as f64;
                    list.push(Edge { i, j, weight });
                }
            }
        }
        edges.push(list);
    }
    Ok(SbmGraph {
        graph: MultiGraph::new(n, edges, None)?,
        blocks,
    })
}

/// Hub 0 joined to every other node, in every domain.
pub fn star(n_nodes: usize, n_domains: usize) -> Result<MultiGraph> {
    if n_nodes < 2 || n_domains == 0 {
        return Err(Error::InvalidInput("star needs ≥ 2 nodes and ≥ 1 domain".into()));
    }
    let list: Vec<Edge> = (1..n_nodes).map(|j| Edge { i: 0, j, weight: 1.0 }).collect();
    MultiGraph::new(n_nodes, vec![list; n_domains], None)
}

/// Complete graph in every domain.
pub fn clique(n_nodes: usize, n_domains: usize) -> Result<MultiGraph> {
    if n_nodes < 2 || n_domains == 0 {
        return Err(Error::InvalidInput("clique needs ≥ 2 nodes and ≥ 1 domain".into()));
    }
    let mut list = Vec::new();
    for i in 0..n_nodes {
        for j in i + 1..n_nodes {
            list.push(Edge { i, j, weight: 1.0 });
        }
    }
    MultiGraph::new(n_nodes, vec![list; n_domains], None)
}

/// Behavior sessions produced by random walks on each domain's graph.
///
/// Each user gets one session per domain of `length` items, starting at a random
/// non-isolated node and stepping to a weight-proportional neighbor. Timestamps are
/// the step index offset by the user number, one per item. Item ids are `item<k>`.
pub fn walk_sessions(g: &MultiGraph, users: usize, length: usize, seed: u64) -> Result<BehaviorSequences> {
    if users == 0 || length == 0 {
        return Err(Error::InvalidInput(
            "need at least one user and a positive session length".into(),
        ));
    }
    let mut records = Vec::with_capacity(users * g.n_domains());
    for d in 0..g.n_domains() {
        let starts: Vec<usize> = (0..g.n_nodes()).filter(|&v| !g.neighbors(d, v).is_empty()).collect();
        if starts.is_empty() {
            return Err(Error::InvalidInput(format!("domain {d} has no edges to walk")));
        }
        let weights: std::collections::HashMap<(usize, usize), f64> =
            g.edges(d).iter().map(|e| ((e.i, e.j), e.weight)).collect();
        let mut rng = indexed_stream(seed, "walks", d);
        for u in 0..users {
            let mut v = starts[rng.gen_range(0..starts.len())];
            let mut items = vec![v];
            while items.len() < length {
                let nbrs = g.neighbors(d, v);
                let w: Vec<f64> = nbrs.iter().map(|&x| weights[&(v.min(x), v.max(x))]).collect();
                let total: f64 = w.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut next = nbrs[nbrs.len() - 1];
                for (&x, &wx) in nbrs.iter().zip(&w) {
                    if pick < wx {
                        next = x;
                        break;
                    }
                    pick -= wx;
                }
                v = next;
                items.push(v);
            }
            records.push(SequenceRecord {
                user: format!("user{u}"),
                domain: d,
                items: items.iter().map(|i| format!("item{i}")).collect(),
                timestamps: Some((0..length as i64).map(|t| t * 10 + u as i64 % 7).collect()),
            });
        }
    }
    BehaviorSequences::new(g.n_domains(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_is_deterministic_and_assortative() {
        let a = sbm(SbmParams::default(), 3).unwrap();
        let b = sbm(SbmParams::default(), 3).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_ne!(a.graph, sbm(SbmParams::default(), 4).unwrap().graph);
        for d in 0..2 {
            let (mut intra, mut inter) = (0usize, 0usize);
            for e in a.graph.edges(d) {
                if a.blocks[d][e.i] == a.blocks[d][e.j] {
                    intra += 1;
                } else {
                    inter += 1;
                }
            }
            assert!(intra > inter, "domain {d}: {intra} vs {inter}");
        }
        // domains share most but not all block memberships
        let same = (0..60).filter(|&i| a.blocks[0][i] == a.blocks[1][i]).count();
        assert!(same > 36 && same < 60, "{same}");
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(sbm(
            SbmParams {
                n_nodes: 0,
                ..SbmParams::default()
            },
            1
        )
        .is_err());
        assert!(sbm(
            SbmParams {
                p_in: 1.5,
                ..SbmParams::default()
            },
            1
        )
        .is_err());
        assert!(star(1, 1).is_err());
        assert!(clique(3, 0).is_err());
    }

    #[test]
    fn star_and_clique_shapes() {
        let s = star(5, 2).unwrap();
        assert_eq!(s.edges(1).len(), 4);
        assert_eq!(s.neighbors(0, 0).len(), 4);
        let c = clique(4, 1).unwrap();
        assert_eq!(c.edges(0).len(), 6);
    }

    #[test]
    fn walks_follow_edges() {
        let g = sbm(SbmParams::default(), 5).unwrap().graph;
        let s = walk_sessions(&g, 10, 8, 5).unwrap();
        assert_eq!(s.records().len(), 20);
        for r in s.records() {
            assert_eq!(r.items.len(), 8);
            for w in r.items.windows(2) {
                let a: usize = w[0][4..].parse().unwrap();
                let b: usize = w[1][4..].parse().unwrap();
                assert!(g.has_edge(r.domain, a, b));
            }
        }
    }
}
