//! Negative-sampling link objective.
//!
//! The probability of an edge between `i` and `j` in domain `d` is `σ(x_{d,i} · x_{d,j})`.
//! The loss of a batch is the summed negative log-likelihood of its positive edges
//! and of its sampled non-edges. Gradients are derived by hand through both layers;
//! [`finite_diff_grad`] recomputes them numerically as a check.

use ndarray::{Array2, ArrayView1};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{
    apply_mask, forward_shared, forward_specific, forward_with_masks, relu_backward, DropoutMasks, EmbeddingSet,
    FeatureMask, FeatureMatrix, GraphOperators, ModelParams,
};
use crate::multigraph::MultiGraph;
use crate::rng::Rng;

/// Lower bound on probabilities inside the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Rejection-sampling attempts per negative before falling back to an exhaustive draw.
pub const MAX_NEGATIVE_RETRIES: usize = 100;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_pair(x_i: ArrayView1<f64>, x_j: ArrayView1<f64>) -> Result<f64> {
    if x_i.len() != x_j.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            x_i.len(),
            x_j.len()
        )));
    }
    if x_i.iter().chain(x_j.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("embedding vector has non-finite entries".into()));
    }
    Ok(x_i.dot(&x_j))
}

/// `p(1 | i, j) = σ(x_i · x_j)`.
pub fn edge_prob(x_i: ArrayView1<f64>, x_j: ArrayView1<f64>) -> Result<f64> {
    Ok(sigmoid(check_pair(x_i, x_j)?))
}

/// `p(0 | i, j) = σ(-x_i · x_j)`.
pub fn non_edge_prob(x_i: ArrayView1<f64>, x_j: ArrayView1<f64>) -> Result<f64> {
    Ok(sigmoid(-check_pair(x_i, x_j)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NegativeDistribution {
    Uniform,
    /// Proportional to weighted degree raised to 3/4.
    #[default]
    Degree075,
}

impl std::str::FromStr for NegativeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NegativeDistribution::Uniform),
            "degree0.75" | "degree^0.75" | "unigram" => Ok(NegativeDistribution::Degree075),
            _ => Err(Error::InvalidConfig(format!("unknown negative distribution {s:?}"))),
        }
    }
}

impl std::fmt::Display for NegativeDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegativeDistribution::Uniform => "uniform",
            NegativeDistribution::Degree075 => "degree0.75",
        })
    }
}

/// Draws negative nodes for one domain.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    domain: usize,
    n_nodes: usize,
    weighted: Option<WeightedIndex<f64>>,
}

impl NegativeSampler {
    pub fn new(g: &MultiGraph, domain: usize, distribution: NegativeDistribution) -> Result<Self> {
        g.check_domain(domain)?;
        let weighted = match distribution {
            NegativeDistribution::Uniform => None,
            NegativeDistribution::Degree075 => {
                let w: Vec<f64> = g.weighted_degrees(domain).iter().map(|d| d.powf(0.75)).collect();
                // an edgeless domain has no degree mass; fall back to uniform
                WeightedIndex::new(&w).ok()
            }
        };
        Ok(NegativeSampler {
            domain,
            n_nodes: g.n_nodes(),
            weighted,
        })
    }

    fn propose(&self, rng: &mut Rng) -> usize {
        match &self.weighted {
            Some(w) => w.sample(rng),
            None => rng.gen_range(0..self.n_nodes),
        }
    }

    /// One node `k ≠ anchor` with no edge `(anchor, k)`.
    pub fn sample(&self, g: &MultiGraph, anchor: usize, rng: &mut Rng) -> Result<usize> {
        for _ in 0..MAX_NEGATIVE_RETRIES {
            let k = self.propose(rng);
            if k != anchor && !g.has_edge(self.domain, anchor, k) {
                return Ok(k);
            }
        }
        let free = self.n_nodes - 1 - g.neighbors(self.domain, anchor).len();
        if free == 0 {
            return Err(Error::Saturated {
                domain: self.domain,
                node: anchor,
            });
        }
        // uniform over the complement of the closed neighborhood
        let mut pick = rng.gen_range(0..free);
        for k in 0..self.n_nodes {
            if k == anchor || g.has_edge(self.domain, anchor, k) {
                continue;
            }
            if pick == 0 {
                return Ok(k);
            }
            pick -= 1;
        }
        unreachable!("complement count and scan disagree")
    }
}

/// Positive edges of one domain, each `(anchor, other)`, with `S` negatives per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub domain: usize,
    pub positives: Vec<(usize, usize)>,
    /// `negatives[k]` are the negatives for the anchor `positives[k].0`.
    pub negatives: Vec<Vec<usize>>,
}

impl SampleBatch {
    /// Draws negatives for the given positives.
    pub fn with_negatives(
        g: &MultiGraph,
        domain: usize,
        positives: Vec<(usize, usize)>,
        per_positive: usize,
        sampler: &NegativeSampler,
        rng: &mut Rng,
    ) -> Result<SampleBatch> {
        if per_positive == 0 {
            return Err(Error::InvalidConfig(
                "at least one negative per positive is required".into(),
            ));
        }
        let negatives = positives
            .iter()
            .map(|&(anchor, _)| (0..per_positive).map(|_| sampler.sample(g, anchor, rng)).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Ok(SampleBatch {
            domain,
            positives,
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    /// Every scored pair with its label (1 for edges, 0 for sampled non-edges).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        self.positives
            .iter()
            .zip(&self.negatives)
            .flat_map(|(&(a, b), negs)| std::iter::once((a, b, true)).chain(negs.iter().map(move |&k| (a, k, false))))
    }
}

/// Draws `batch_size` distinct positives uniformly (all of them if the domain is
/// smaller), orients each edge at random, and adds `per_positive` negatives per anchor.
pub fn sample_batch(
    g: &MultiGraph,
    domain: usize,
    batch_size: usize,
    per_positive: usize,
    rng: &mut Rng,
    distribution: NegativeDistribution,
) -> Result<SampleBatch> {
    g.check_domain(domain)?;
    let edges = g.edges(domain);
    if edges.is_empty() {
        return Err(Error::InvalidInput(format!("domain {domain} has no edges to sample")));
    }
    let sampler = NegativeSampler::new(g, domain, distribution)?;
    let picked = index::sample(rng, edges.len(), batch_size.min(edges.len()));
    let positives = picked
        .iter()
        .map(|k| {
            let e = edges[k];
            if rng.gen::<bool>() {
                (e.i, e.j)
            } else {
                (e.j, e.i)
            }
        })
        .collect();
    SampleBatch::with_negatives(g, domain, positives, per_positive, &sampler, rng)
}

fn nll(p: f64) -> f64 {
    -p.max(LOG_FLOOR).ln()
}

/// `-Σ log σ(x_i·x_j) - Σ log σ(-x_i·x_k)` over the batch, using domain embeddings.
pub fn domain_loss(batch: &SampleBatch, emb: &EmbeddingSet) -> Result<f64> {
    let x = emb.x_domain.get(batch.domain).ok_or(Error::DomainOutOfRange {
        domain: batch.domain,
        n_domains: emb.n_domains(),
    })?;
    Ok(loss_on(batch, x))
}

fn loss_on(batch: &SampleBatch, x: &Array2<f64>) -> f64 {
    batch
        .pairs()
        .map(|(a, b, positive)| {
            let s = x.row(a).dot(&x.row(b));
            if positive {
                nll(sigmoid(s))
            } else {
                nll(sigmoid(-s))
            }
        })
        .sum()
}

/// Loss and gradients of one domain with respect to `Θ_s` and that domain's `Θ_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub domain: usize,
    pub grad_theta_s: Array2<f64>,
    pub grad_theta_d: Array2<f64>,
    pub loss: f64,
}

impl GradientBundle {
    pub fn is_finite(&self) -> bool {
        self.loss.is_finite()
            && self.grad_theta_s.iter().all(|v| v.is_finite())
            && self.grad_theta_d.iter().all(|v| v.is_finite())
    }
}

/// Analytic gradients given the forward pass that produced `emb` under `masks`.
pub fn backward_from_forward(
    batch: &SampleBatch,
    ops: &GraphOperators,
    x0: &FeatureMatrix,
    params: &ModelParams,
    masks: &DropoutMasks,
    emb: &EmbeddingSet,
) -> Result<GradientBundle> {
    let d = batch.domain;
    if d >= params.n_domains() || d >= emb.n_domains() || d >= masks.specific.len() {
        return Err(Error::DomainOutOfRange {
            domain: d,
            n_domains: params.n_domains(),
        });
    }
    let x_d = &emb.x_domain[d];
    let x_s = &emb.x_shared;

    // dL/dX_d from each scored pair: residual σ(s) - label
    let mut grad_out = Array2::<f64>::zeros(x_d.raw_dim());
    for (a, b, positive) in batch.pairs() {
        let s = x_d.row(a).dot(&x_d.row(b));
        let r = if positive { sigmoid(s) - 1.0 } else { sigmoid(s) };
        let (row_a, row_b) = (x_d.row(a).to_owned(), x_d.row(b).to_owned());
        grad_out.row_mut(a).scaled_add(r, &row_b);
        grad_out.row_mut(b).scaled_add(r, &row_a);
    }
    relu_backward(&mut grad_out, x_d);

    // Â_d is symmetric, so Â_dᵀ · G = Â_d · G.
    let mask_d = masks.specific[d].as_ref();
    let propagated = ops.domains[d].matrix.matmul(&grad_out.view())?;
    let layer_input = apply_mask(x_s, mask_d)?;
    let grad_theta_d = layer_input.t().dot(&propagated);

    let mut grad_shared = propagated.dot(&params.theta_d[d].t());
    if let Some(m) = mask_d {
        grad_shared *= m;
    }
    relu_backward(&mut grad_shared, x_s);
    let back = ops.union.matrix.matmul(&grad_shared.view())?;
    let grad_theta_s = match (x0, masks.shared.as_ref()) {
        (FeatureMatrix::Identity(_), None) => back,
        (FeatureMatrix::Identity(_), Some(FeatureMask::Diagonal(s))) => {
            let mut out = back;
            for (mut row, &k) in out.rows_mut().into_iter().zip(s.iter()) {
                row *= k;
            }
            out
        }
        (FeatureMatrix::Dense(x), None) => x.t().dot(&back),
        (FeatureMatrix::Dense(x), Some(FeatureMask::Dense(m))) => (x * m).t().dot(&back),
        _ => return Err(Error::Shape("dropout mask does not match the feature matrix".into())),
    };

    Ok(GradientBundle {
        domain: d,
        grad_theta_s,
        grad_theta_d,
        loss: loss_on(batch, x_d),
    })
}

/// Forward pass under `masks`, then [`backward_from_forward`].
pub fn backward(
    batch: &SampleBatch,
    ops: &GraphOperators,
    x0: &FeatureMatrix,
    params: &ModelParams,
    masks: &DropoutMasks,
) -> Result<GradientBundle> {
    let emb = forward_with_masks(ops, x0, params, masks)?;
    backward_from_forward(batch, ops, x0, params, masks, &emb)
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every coordinate.
pub fn central_difference<F>(mut f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + h;
        let up = f(&x);
        x[k] = orig - h;
        let down = f(&x);
        x[k] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Numerical gradients of one domain's loss, dropout off.
pub fn finite_diff_grad(
    batch: &SampleBatch,
    ops: &GraphOperators,
    x0: &FeatureMatrix,
    params: &ModelParams,
    h: f64,
) -> Result<GradientBundle> {
    let d = batch.domain;
    if d >= params.n_domains() {
        return Err(Error::DomainOutOfRange {
            domain: d,
            n_domains: params.n_domains(),
        });
    }
    let adj_d = &ops.domains[d];
    let loss_at = |theta_s: &Array2<f64>, theta_d: &Array2<f64>| -> f64 {
        let xs = forward_shared(&ops.union, x0, theta_s, None).expect("shapes checked");
        let xd = forward_specific(adj_d, &xs, theta_d, None).expect("shapes checked");
        loss_on(batch, &xd)
    };
    // surface shape errors before the closures below start expecting
    let base = loss_at(&params.theta_s, &params.theta_d[d]);

    let shape_s = params.theta_s.raw_dim();
    let flat_s: Vec<f64> = params.theta_s.iter().copied().collect();
    let gs = central_difference(
        |v| {
            loss_at(
                &Array2::from_shape_vec(shape_s, v.to_vec()).unwrap(),
                &params.theta_d[d],
            )
        },
        &flat_s,
        h,
    )?;
    let shape_d = params.theta_d[d].raw_dim();
    let flat_d: Vec<f64> = params.theta_d[d].iter().copied().collect();
    let gd = central_difference(
        |v| loss_at(&params.theta_s, &Array2::from_shape_vec(shape_d, v.to_vec()).unwrap()),
        &flat_d,
        h,
    )?;
    Ok(GradientBundle {
        domain: d,
        grad_theta_s: Array2::from_shape_vec(shape_s, gs).unwrap(),
        grad_theta_d: Array2::from_shape_vec(shape_d, gd).unwrap(),
        loss: base,
    })
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over both gradient matrices.
pub fn max_relative_error(a: &GradientBundle, b: &GradientBundle, floor: f64) -> f64 {
    let rel = |x: &Array2<f64>, y: &Array2<f64>| {
        x.iter()
            .zip(y.iter())
            .map(|(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(floor))
            .fold(0.0f64, f64::max)
    };
    rel(&a.grad_theta_s, &b.grad_theta_s).max(rel(&a.grad_theta_d, &b.grad_theta_d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{forward_all, init_params, Dims};
    use crate::multigraph::Edge;
    use crate::rng::stream;
    use ndarray::array;

    fn random_graph(n: usize, d: usize, p: f64, rng: &mut Rng) -> MultiGraph {
        let mut edges = vec![Vec::new(); d];
        for list in edges.iter_mut() {
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        list.push(Edge {
                            i,
                            j,
                            weight: rng.gen_range(1..4) as f64,
                        });
                    }
                }
            }
            if list.is_empty() {
                list.push(Edge {
                    i: 0,
                    j: 1,
                    weight: 1.0,
                });
            }
        }
        MultiGraph::new(n, edges, None).unwrap()
    }

    #[test]
    fn probabilities() {
        let z = array![0.0, 0.0];
        assert_eq!(edge_prob(z.view(), z.view()).unwrap(), 0.5);
        let e = array![1.0, 0.0];
        assert!((edge_prob(e.view(), e.view()).unwrap() - 0.7310585786300049).abs() < 1e-15);
        let bad = array![f64::NAN, 0.0];
        assert!(edge_prob(bad.view(), e.view()).is_err());
        assert!(edge_prob(array![1.0].view(), e.view()).is_err());
        let mut rng = stream(0, "t");
        for _ in 0..100 {
            let a = array![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let b = array![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let total = edge_prob(a.view(), b.view()).unwrap() + non_edge_prob(a.view(), b.view()).unwrap();
            assert!((total - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn negatives_are_verified_non_edges() {
        let mut rng = stream(1, "t");
        let g = random_graph(12, 1, 0.3, &mut rng);
        for dist in [NegativeDistribution::Uniform, NegativeDistribution::Degree075] {
            for _ in 0..50 {
                let b = sample_batch(&g, 0, 5, 2, &mut rng, dist).unwrap();
                for (a, c, pos) in b.pairs() {
                    assert_ne!(a, c);
                    assert_eq!(g.has_edge(0, a, c), pos);
                }
                assert!(b.negatives.iter().all(|n| n.len() == 2));
            }
        }
        let one = MultiGraph::new(
            3,
            vec![vec![Edge {
                i: 0,
                j: 1,
                weight: 1.0,
            }]],
            None,
        )
        .unwrap();
        let b = sample_batch(&one, 0, 1, 2, &mut rng, NegativeDistribution::Uniform).unwrap();
        assert_eq!(b.negatives[0].len(), 2);
    }

    #[test]
    fn complete_graph_saturates() {
        let edges = vec![vec![
            Edge {
                i: 0,
                j: 1,
                weight: 1.0,
            },
            Edge {
                i: 0,
                j: 2,
                weight: 1.0,
            },
            Edge {
                i: 1,
                j: 2,
                weight: 1.0,
            },
        ]];
        let g = MultiGraph::new(3, edges, None).unwrap();
        let err = sample_batch(&g, 0, 1, 1, &mut stream(0, "t"), NegativeDistribution::Uniform).unwrap_err();
        assert!(matches!(err, Error::Saturated { .. }));
    }

    #[test]
    fn degree_weighting_prefers_hub() {
        // star: hub 0, leaves 1..=5; anchor 6 is isolated so every node is a valid negative
        let edges = vec![(1..=5).map(|j| Edge { i: 0, j, weight: 1.0 }).collect()];
        let g = MultiGraph::new(7, edges, None).unwrap();
        let sampler = NegativeSampler::new(&g, 0, NegativeDistribution::Degree075).unwrap();
        let mut rng = stream(2, "t");
        let mut counts = [0usize; 7];
        let draws = 10_000;
        for _ in 0..draws {
            counts[sampler.sample(&g, 6, &mut rng).unwrap()] += 1;
        }
        // analytic: hub 5^0.75 against 1 per leaf
        let hub_mass = 5f64.powf(0.75);
        let expected_hub = hub_mass / (hub_mass + 5.0);
        let observed_hub = counts[0] as f64 / draws as f64;
        assert!(
            (observed_hub - expected_hub).abs() < 0.02,
            "{observed_hub} vs {expected_hub}"
        );
        assert!((1..=5).all(|leaf| counts[0] > counts[leaf]));
        assert_eq!(counts[6], 0);
    }

    #[test]
    fn zero_dot_loss_is_two_ln_two() {
        let batch = SampleBatch {
            domain: 0,
            positives: vec![(0, 1)],
            negatives: vec![vec![2]],
        };
        let emb = EmbeddingSet {
            x_shared: Array2::zeros((3, 1)),
            x_domain: vec![Array2::zeros((3, 2))],
            provenance: None,
        };
        assert!((domain_loss(&batch, &emb).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn well_separated_batch_has_near_zero_loss() {
        let batch = SampleBatch {
            domain: 0,
            positives: vec![(0, 1)],
            negatives: vec![vec![2]],
        };
        let x = array![[10.0, 0.0], [10.0, 0.0], [-10.0, 0.0]];
        let emb = EmbeddingSet {
            x_shared: Array2::zeros((3, 1)),
            x_domain: vec![x],
            provenance: None,
        };
        let l = domain_loss(&batch, &emb).unwrap();
        assert!((0.0..1e-40).contains(&l), "{l}");
    }

    #[test]
    fn loss_matches_scalar_oracle_and_ignores_order() {
        let mut rng = stream(3, "t");
        let x = Array2::from_shape_simple_fn((4, 3), || rng.gen_range(-1.0..1.0));
        let batch = SampleBatch {
            domain: 0,
            positives: vec![(0, 1), (2, 3)],
            negatives: vec![vec![2, 3], vec![0, 1]],
        };
        let emb = EmbeddingSet {
            x_shared: Array2::zeros((4, 1)),
            x_domain: vec![x.clone()],
            provenance: None,
        };
        let mut oracle = 0.0;
        let dot = |a: usize, b: usize| (0..3).map(|k| x[[a, k]] * x[[b, k]]).sum::<f64>();
        for (&(a, b), negs) in batch.positives.iter().zip(&batch.negatives) {
            oracle -= (1.0 / (1.0 + (-dot(a, b)).exp())).ln();
            for &k in negs {
                oracle -= (1.0 / (1.0 + dot(a, k).exp())).ln();
            }
        }
        let got = domain_loss(&batch, &emb).unwrap();
        assert!((got - oracle).abs() < 1e-10);
        let reversed = SampleBatch {
            domain: 0,
            positives: batch.positives.iter().rev().copied().collect(),
            negatives: batch.negatives.iter().rev().cloned().collect(),
        };
        assert!((domain_loss(&reversed, &emb).unwrap() - got).abs() < 1e-12);
    }

    fn setup(seed: u64) -> (MultiGraph, GraphOperators, FeatureMatrix, ModelParams) {
        let mut rng = stream(seed, "graph");
        let g = random_graph(6, 2, 0.4, &mut rng);
        let ops = GraphOperators::new(&g);
        let params = init_params(Dims::new(6, 5, 3), 2, &mut stream(seed, "init")).unwrap();
        (g, ops, FeatureMatrix::Identity(6), params)
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in 0..5 {
            let (g, ops, x0, params) = setup(seed);
            for d in 0..2 {
                let batch = sample_batch(&g, d, 4, 2, &mut stream(seed, "b"), NegativeDistribution::Uniform).unwrap();
                let masks = DropoutMasks::none(2);
                let exact = backward(&batch, &ops, &x0, &params, &masks).unwrap();
                let numeric = finite_diff_grad(&batch, &ops, &x0, &params, 1e-5).unwrap();
                let err = max_relative_error(&exact, &numeric, 1e-6);
                assert!(err < 1e-4, "seed {seed} domain {d}: {err}");
                assert!((exact.loss - numeric.loss).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_features_with_dropout_match_finite_differences_of_masked_loss() {
        // fixed masks make the masked network a deterministic function of Θ
        let (g, ops, _, _) = setup(11);
        let mut rng = stream(11, "x");
        let x0 = FeatureMatrix::dense(Array2::from_shape_simple_fn((6, 4), || rng.gen_range(-1.0..1.0))).unwrap();
        let params = init_params(Dims::new(4, 5, 3), 2, &mut stream(11, "init")).unwrap();
        let rates = crate::gcn::DropoutRates {
            shared: 0.3,
            specific: 0.2,
        };
        let (_, masks) = forward_all(&ops, &x0, &params, Some((rates, &mut stream(11, "drop")))).unwrap();
        let batch = sample_batch(&g, 1, 4, 2, &mut stream(11, "b"), NegativeDistribution::Uniform).unwrap();
        let exact = backward(&batch, &ops, &x0, &params, &masks).unwrap();

        let loss_of = |p: &ModelParams| {
            let emb = forward_with_masks(&ops, &x0, p, &masks).unwrap();
            domain_loss(&batch, &emb).unwrap()
        };
        let h = 1e-6;
        for ((r, c), &g_exact) in exact.grad_theta_s.indexed_iter() {
            let mut up = params.clone();
            up.theta_s[[r, c]] += h;
            let mut down = params.clone();
            down.theta_s[[r, c]] -= h;
            let fd = (loss_of(&up) - loss_of(&down)) / (2.0 * h);
            assert!((fd - g_exact).abs() <= 1e-5 * fd.abs().max(1.0), "{fd} vs {g_exact}");
        }
    }

    #[test]
    fn dead_relu_gives_zero_gradient() {
        let (g, ops, x0, mut params) = setup(4);
        params.theta_s.mapv_inplace(|_| -1.0);
        let batch = sample_batch(&g, 0, 3, 2, &mut stream(4, "b"), NegativeDistribution::Uniform).unwrap();
        let gb = backward(&batch, &ops, &x0, &params, &DropoutMasks::none(2)).unwrap();
        assert!(gb.grad_theta_s.iter().all(|&v| v == 0.0));
        assert!(gb.grad_theta_d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_doubles_gradients() {
        let (g, ops, x0, params) = setup(5);
        let batch = sample_batch(&g, 0, 3, 2, &mut stream(5, "b"), NegativeDistribution::Uniform).unwrap();
        let doubled = SampleBatch {
            domain: 0,
            positives: batch.positives.iter().chain(&batch.positives).copied().collect(),
            negatives: batch.negatives.iter().chain(&batch.negatives).cloned().collect(),
        };
        let masks = DropoutMasks::none(2);
        let one = backward(&batch, &ops, &x0, &params, &masks).unwrap();
        let two = backward(&doubled, &ops, &x0, &params, &masks).unwrap();
        for (a, b) in one.grad_theta_d.iter().zip(two.grad_theta_d.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        assert!((2.0 * one.loss - two.loss).abs() < 1e-12);
    }

    #[test]
    fn central_difference_is_exact_on_quadratics() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1] + x[1];
        let g = central_difference(f, &[1.5, -2.0], 1e-3).unwrap();
        assert!((g[0] - (6.0 * 1.5 + 4.0)).abs() < 1e-10);
        assert!((g[1] - (-3.0 - 2.0 + 1.0)).abs() < 1e-10);
        assert!(central_difference(f, &[0.0, 0.0], 0.0).is_err());
        assert!(central_difference(f, &[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn finite_difference_error_shrinks_quadratically() {
        let f = |x: &[f64]| x[0].sin() * x[0].exp();
        let exact = 0.7f64.cos() * 0.7f64.exp() + 0.7f64.sin() * 0.7f64.exp();
        let e3 = (central_difference(f, &[0.7], 1e-2).unwrap()[0] - exact).abs();
        let e4 = (central_difference(f, &[0.7], 1e-3).unwrap()[0] - exact).abs();
        // O(h^2): a tenfold smaller step cuts the error about a hundredfold
        assert!(e4 < e3 / 50.0, "{e3} {e4}");
    }
}
