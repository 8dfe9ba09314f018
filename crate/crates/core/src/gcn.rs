//! Shared and domain-specific graph convolution layers.
//!
//! One shared layer turns node features into `X_s = ReLU(Â · X0 · Θ_s)` over the union
//! graph; one specific layer per domain then computes `X_d = ReLU(Â_d · X_s · Θ_d)`
//! over that domain's weighted graph. No bias terms.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multigraph::{domain_adjacency, union_adjacency, MultiGraph, NormalizedAdjacency};
use crate::rng::Rng;

/// Layer widths: input features, shared embedding, domain embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub shared: usize,
    pub out: usize,
}

impl Dims {
    pub fn new(input: usize, shared: usize, out: usize) -> Self {
        Dims { input, shared, out }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `input × shared`
    pub theta_s: Array2<f64>,
    /// one `shared × out` matrix per domain
    pub theta_d: Vec<Array2<f64>>,
}

impl ModelParams {
    pub fn dims(&self) -> Dims {
        Dims {
            input: self.theta_s.nrows(),
            shared: self.theta_s.ncols(),
            out: self.theta_d.first().map_or(0, |t| t.ncols()),
        }
    }

    pub fn n_domains(&self) -> usize {
        self.theta_d.len()
    }

    pub fn is_finite(&self) -> bool {
        self.theta_s
            .iter()
            .chain(self.theta_d.iter().flatten())
            .all(|v| v.is_finite())
    }

    /// Every matrix in a fixed order (shared first).
    pub fn matrices(&self) -> impl Iterator<Item = &Array2<f64>> {
        std::iter::once(&self.theta_s).chain(self.theta_d.iter())
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// Glorot-uniform initialization of the shared matrix and `n_domains` specific matrices.
pub fn init_params(dims: Dims, n_domains: usize, rng: &mut Rng) -> Result<ModelParams> {
    if dims.input == 0 || dims.shared == 0 || dims.out == 0 {
        return Err(Error::InvalidConfig(format!(
            "all layer dimensions must be positive, got {dims:?}"
        )));
    }
    if n_domains == 0 {
        return Err(Error::InvalidConfig("at least one domain is required".into()));
    }
    let theta_s = glorot(dims.input, dims.shared, rng);
    let theta_d = (0..n_domains).map(|_| glorot(dims.shared, dims.out, rng)).collect();
    Ok(ModelParams { theta_s, theta_d })
}

/// Node input features `X0`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    /// `I_N`; the shared product then reduces to `Â · Θ_s`.
    Identity(usize),
    Dense(Array2<f64>),
}

impl FeatureMatrix {
    pub fn dense(x: Array2<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureMatrix::Dense(x))
    }

    pub fn n_rows(&self) -> usize {
        match self {
            FeatureMatrix::Identity(n) => *n,
            FeatureMatrix::Dense(x) => x.nrows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            FeatureMatrix::Identity(n) => *n,
            FeatureMatrix::Dense(x) => x.ncols(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            FeatureMatrix::Identity(n) => Array2::eye(*n),
            FeatureMatrix::Dense(x) => x.clone(),
        }
    }
}

/// Inverted-dropout scale factors for the shared layer input: each kept entry is
/// multiplied by `1/(1-p)`, dropped entries by 0. For identity features only the
/// diagonal is non-zero, so only it is masked.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMask {
    Diagonal(Array1<f64>),
    Dense(Array2<f64>),
}

/// Dropout scale factors for one specific layer's input (`N × E_s`).
pub type DropoutMask = Array2<f64>;

fn check_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "dropout probability must be in [0, 1), got {p}"
        )))
    }
}

fn draw_scales(len: usize, p: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

pub fn draw_feature_mask(x0: &FeatureMatrix, p: f64, rng: &mut Rng) -> Result<Option<FeatureMask>> {
    check_rate(p)?;
    if p == 0.0 {
        return Ok(None);
    }
    Ok(Some(match x0 {
        FeatureMatrix::Identity(n) => FeatureMask::Diagonal(Array1::from(draw_scales(*n, p, rng))),
        FeatureMatrix::Dense(x) => {
            FeatureMask::Dense(Array2::from_shape_vec(x.raw_dim(), draw_scales(x.len(), p, rng)).expect("mask shape"))
        }
    }))
}

pub fn draw_dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Result<Option<DropoutMask>> {
    check_rate(p)?;
    if p == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        Array2::from_shape_vec((rows, cols), draw_scales(rows * cols, p, rng)).expect("mask shape"),
    ))
}

/// Masks for one forward pass in training mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropoutMasks {
    pub shared: Option<FeatureMask>,
    pub specific: Vec<Option<DropoutMask>>,
}

impl DropoutMasks {
    /// No dropout anywhere (evaluation mode).
    pub fn none(n_domains: usize) -> Self {
        DropoutMasks {
            shared: None,
            specific: vec![None; n_domains],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    pub shared: f64,
    pub specific: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        DropoutRates {
            shared: 0.3,
            specific: 0.1,
        }
    }
}

impl DropoutRates {
    pub fn off() -> Self {
        DropoutRates {
            shared: 0.0,
            specific: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.shared)?;
        check_rate(self.specific)
    }
}

/// Draws fresh masks for every layer. The shared mask is drawn first, then one per domain.
pub fn draw_masks(
    x0: &FeatureMatrix,
    dims: Dims,
    n_domains: usize,
    rates: DropoutRates,
    rng: &mut Rng,
) -> Result<DropoutMasks> {
    rates.validate()?;
    let shared = draw_feature_mask(x0, rates.shared, rng)?;
    let specific = (0..n_domains)
        .map(|_| draw_dropout_mask(x0.n_rows(), dims.shared, rates.specific, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(DropoutMasks { shared, specific })
}

/// The propagation matrices a model needs: union first, then one per domain.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    pub union: NormalizedAdjacency,
    pub domains: Vec<NormalizedAdjacency>,
}

impl GraphOperators {
    pub fn new(g: &MultiGraph) -> Self {
        GraphOperators {
            union: union_adjacency(g),
            domains: (0..g.n_domains())
                .map(|d| domain_adjacency(g, d).expect("domain index in range"))
                .collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.union.dim()
    }

    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }
}

fn relu(mut z: Array2<f64>) -> Array2<f64> {
    z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
    z
}

/// `X0 ⊙ mask · Θ_s`, skipping the identity product.
pub(crate) fn masked_input_times(
    x0: &FeatureMatrix,
    mask: Option<&FeatureMask>,
    theta_s: &Array2<f64>,
) -> Result<Array2<f64>> {
    if x0.n_cols() != theta_s.nrows() {
        return Err(Error::Shape(format!(
            "features have {} columns but Θ_s has {} rows",
            x0.n_cols(),
            theta_s.nrows()
        )));
    }
    match (x0, mask) {
        (FeatureMatrix::Identity(_), None) => Ok(theta_s.clone()),
        (FeatureMatrix::Identity(_), Some(FeatureMask::Diagonal(s))) => {
            let mut out = theta_s.clone();
            for (mut row, &k) in out.rows_mut().into_iter().zip(s.iter()) {
                row *= k;
            }
            Ok(out)
        }
        (FeatureMatrix::Dense(x), None) => Ok(x.dot(theta_s)),
        (FeatureMatrix::Dense(x), Some(FeatureMask::Dense(m))) if m.dim() == x.dim() => Ok((x * m).dot(theta_s)),
        _ => Err(Error::Shape("dropout mask does not match the feature matrix".into())),
    }
}

pub(crate) fn apply_mask(x: &Array2<f64>, mask: Option<&DropoutMask>) -> Result<Array2<f64>> {
    match mask {
        None => Ok(x.clone()),
        Some(m) if m.dim() == x.dim() => Ok(x * m),
        Some(m) => Err(Error::Shape(format!(
            "dropout mask {:?} vs input {:?}",
            m.dim(),
            x.dim()
        ))),
    }
}

/// `X_s = ReLU(Â · (X0 ⊙ mask) · Θ_s)`.
pub fn forward_shared(
    adj_union: &NormalizedAdjacency,
    x0: &FeatureMatrix,
    theta_s: &Array2<f64>,
    mask: Option<&FeatureMask>,
) -> Result<Array2<f64>> {
    if x0.n_rows() != adj_union.dim() {
        return Err(Error::Shape(format!(
            "{} feature rows for a {}-node graph",
            x0.n_rows(),
            adj_union.dim()
        )));
    }
    let projected = masked_input_times(x0, mask, theta_s)?;
    Ok(relu(adj_union.matrix.matmul(&projected.view())?))
}

/// `X_d = ReLU(Â_d · (X_s ⊙ mask) · Θ_d)`.
pub fn forward_specific(
    adj_d: &NormalizedAdjacency,
    x_shared: &Array2<f64>,
    theta_d: &Array2<f64>,
    mask: Option<&DropoutMask>,
) -> Result<Array2<f64>> {
    if x_shared.nrows() != adj_d.dim() || x_shared.ncols() != theta_d.nrows() {
        return Err(Error::Shape(format!(
            "shared embedding {:?}, Θ_d {:?}, graph of {} nodes",
            x_shared.dim(),
            theta_d.dim(),
            adj_d.dim()
        )));
    }
    let input = apply_mask(x_shared, mask)?;
    Ok(relu(adj_d.matrix.matmul(&input.dot(theta_d).view())?))
}

const PROVENANCE_TAG: &str = "#graph";

/// Node embeddings from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub x_shared: Array2<f64>,
    pub x_domain: Vec<Array2<f64>>,
    /// Fingerprint of the graph the producing model was trained on, if known.
    pub provenance: Option<u64>,
}

impl EmbeddingSet {
    pub fn n_nodes(&self) -> usize {
        self.x_shared.nrows()
    }

    pub fn n_domains(&self) -> usize {
        self.x_domain.len()
    }

    /// TSV rows `<label>\t<domain>\t<values...>`, shared rows labelled `shared`.
    /// A known provenance is written first as `#graph\t<hex fingerprint>`.
    pub fn to_tsv(&self, labels: &[String]) -> String {
        let mut out = String::new();
        if let Some(fp) = self.provenance {
            writeln!(out, "{PROVENANCE_TAG}\t{fp:016x}").unwrap();
        }
        let mut emit = |tag: &str, m: &Array2<f64>| {
            for (label, row) in labels.iter().zip(m.rows()) {
                write!(out, "{label}\t{tag}").unwrap();
                for v in row {
                    write!(out, "\t{v:?}").unwrap();
                }
                out.push('\n');
            }
        };
        emit("shared", &self.x_shared);
        for (d, x) in self.x_domain.iter().enumerate() {
            emit(&d.to_string(), x);
        }
        out
    }

    pub fn save_tsv(&self, labels: &[String], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv(labels)).map_err(|e| Error::io(path, e))
    }

    /// Parses the TSV form back, returning the node labels in first-seen order.
    pub fn from_tsv(text: &str, source_name: &str) -> Result<(Vec<String>, EmbeddingSet)> {
        let mut labels: Vec<String> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut blocks: std::collections::BTreeMap<Option<usize>, Vec<(usize, Vec<f64>)>> = Default::default();
        let mut width: std::collections::BTreeMap<Option<usize>, usize> = Default::default();
        let mut provenance = None;
        for (k, line) in text.lines().enumerate() {
            let no = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(hex) = line.strip_prefix(PROVENANCE_TAG).and_then(|r| r.strip_prefix('\t')) {
                let fp = u64::from_str_radix(hex.trim(), 16)
                    .map_err(|_| Error::parse(source_name, no, format!("bad graph fingerprint {hex:?}")))?;
                provenance = Some(fp);
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::parse(
                    source_name,
                    no,
                    "expected `<label>\\t<domain>\\t<values...>`",
                ));
            }
            let tag = if cols[1] == "shared" {
                None
            } else {
                Some(cols[1].parse::<usize>().map_err(|_| {
                    Error::parse(
                        source_name,
                        no,
                        format!("domain must be an integer or `shared`, got {:?}", cols[1]),
                    )
                })?)
            };
            let values = cols[2..]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(source_name, no, format!("bad value {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let w = *width.entry(tag).or_insert(values.len());
            if w != values.len() {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("row has {} values, expected {w}", values.len()),
                ));
            }
            let node = *index.entry(cols[0].to_string()).or_insert_with(|| {
                labels.push(cols[0].to_string());
                labels.len() - 1
            });
            blocks.entry(tag).or_default().push((node, values));
        }
        let n = labels.len();
        let n_domains = blocks.keys().filter_map(|t| *t).max().map_or(0, |m| m + 1);
        let mut to_matrix = |tag: Option<usize>| -> Result<Array2<f64>> {
            let rows = blocks.remove(&tag).unwrap_or_default();
            let w = width.get(&tag).copied().unwrap_or(0);
            let mut m = Array2::zeros((n, w));
            let mut filled = vec![false; n];
            for (node, values) in rows {
                if filled[node] {
                    return Err(Error::parse(
                        source_name,
                        0,
                        format!("node {:?} repeated in block {tag:?}", labels[node]),
                    ));
                }
                filled[node] = true;
                m.row_mut(node).assign(&Array1::from(values));
            }
            if let Some(missing) = filled.iter().position(|f| !f) {
                return Err(Error::parse(
                    source_name,
                    0,
                    format!("node {:?} missing from block {tag:?}", labels[missing]),
                ));
            }
            Ok(m)
        };
        let x_shared = to_matrix(None)?;
        let x_domain = (0..n_domains).map(|d| to_matrix(Some(d))).collect::<Result<Vec<_>>>()?;
        Ok((
            labels,
            EmbeddingSet {
                x_shared,
                x_domain,
                provenance,
            },
        ))
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<(Vec<String>, EmbeddingSet)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbeddingSet::from_tsv(&text, &path.display().to_string())
    }
}

/// Runs the shared layer and every specific layer with the given masks.
pub fn forward_with_masks(
    ops: &GraphOperators,
    x0: &FeatureMatrix,
    params: &ModelParams,
    masks: &DropoutMasks,
) -> Result<EmbeddingSet> {
    if params.n_domains() != ops.n_domains() {
        return Err(Error::Shape(format!(
            "model has {} domains, graph has {}",
            params.n_domains(),
            ops.n_domains()
        )));
    }
    if masks.specific.len() != ops.n_domains() {
        return Err(Error::Shape(
            "one specific-layer mask slot per domain is required".into(),
        ));
    }
    let x_shared = forward_shared(&ops.union, x0, &params.theta_s, masks.shared.as_ref())?;
    let x_domain = ops
        .domains
        .iter()
        .zip(&params.theta_d)
        .zip(&masks.specific)
        .map(|((adj, theta), mask)| forward_specific(adj, &x_shared, theta, mask.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingSet {
        x_shared,
        x_domain,
        provenance: None,
    })
}

/// Full forward pass. With `train = Some((rates, rng))` fresh dropout masks are drawn
/// and returned alongside the embeddings; with `None` no dropout is applied.
pub fn forward_all(
    ops: &GraphOperators,
    x0: &FeatureMatrix,
    params: &ModelParams,
    train: Option<(DropoutRates, &mut Rng)>,
) -> Result<(EmbeddingSet, DropoutMasks)> {
    let masks = match train {
        Some((rates, rng)) => draw_masks(x0, params.dims(), params.n_domains(), rates, rng)?,
        None => DropoutMasks::none(params.n_domains()),
    };
    let emb = forward_with_masks(ops, x0, params, &masks)?;
    Ok((emb, masks))
}

/// Elementwise `grad ⊙ 1[activation > 0]`; the ReLU derivative at 0 is taken as 0.
pub(crate) fn relu_backward(grad: &mut Array2<f64>, activation: &Array2<f64>) {
    Zip::from(grad).and(activation).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multigraph::Edge;
    use crate::rng::stream;
    use ndarray::array;

    fn two_node_graph() -> MultiGraph {
        MultiGraph::new(
            2,
            vec![vec![Edge {
                i: 0,
                j: 1,
                weight: 1.0,
            }]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let dims = Dims::new(4, 3, 2);
        let a = init_params(dims, 2, &mut stream(1, "init")).unwrap();
        let b = init_params(dims, 2, &mut stream(1, "init")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.theta_s.dim(), (4, 3));
        assert_eq!(a.theta_d[0].dim(), (3, 2));
        assert_eq!(a.theta_d.len(), 2);
        assert!(init_params(Dims::new(0, 3, 2), 1, &mut stream(1, "init")).is_err());
    }

    #[test]
    fn init_entries_within_glorot_bound_and_centred() {
        let dims = Dims::new(100, 100, 10);
        let p = init_params(dims, 1, &mut stream(3, "init")).unwrap();
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(p.theta_s.iter().all(|v| v.abs() <= bound));
        let mean = p.theta_s.mean().unwrap();
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn single_node_relu() {
        let g = MultiGraph::new(1, vec![vec![]], None).unwrap();
        let adj = union_adjacency(&g);
        let xs = forward_shared(&adj, &FeatureMatrix::Identity(1), &array![[-1.0, 2.0]], None).unwrap();
        assert_eq!(xs, array![[0.0, 2.0]]);
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let g = two_node_graph();
        let adj = union_adjacency(&g);
        let xs = forward_shared(&adj, &FeatureMatrix::Identity(2), &Array2::zeros((2, 3)), None).unwrap();
        assert!(xs.iter().all(|&v| v == 0.0));
        let xd = forward_specific(&domain_adjacency(&g, 0).unwrap(), &xs, &Array2::ones((3, 2)), None).unwrap();
        assert!(xd.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_node_identity_weights() {
        let g = two_node_graph();
        let xs = forward_shared(&union_adjacency(&g), &FeatureMatrix::Identity(2), &Array2::eye(2), None).unwrap();
        for v in xs.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn edgeless_domain_with_identity_weights_passes_shared_through() {
        let g = MultiGraph::new(
            3,
            vec![
                vec![Edge {
                    i: 0,
                    j: 2,
                    weight: 1.0,
                }],
                vec![],
            ],
            None,
        )
        .unwrap();
        let ops = GraphOperators::new(&g);
        let xs = array![[0.0, 1.5], [2.0, 0.0], [0.25, 0.5]];
        let xd = forward_specific(&ops.domains[1], &xs, &Array2::eye(2), None).unwrap();
        assert_eq!(xd, xs);
    }

    #[test]
    fn shape_errors() {
        let g = two_node_graph();
        let adj = union_adjacency(&g);
        assert!(forward_shared(&adj, &FeatureMatrix::Identity(3), &Array2::eye(3), None).is_err());
        assert!(forward_shared(&adj, &FeatureMatrix::Identity(2), &Array2::eye(3), None).is_err());
        assert!(forward_specific(&adj, &Array2::zeros((2, 3)), &Array2::zeros((2, 2)), None).is_err());
    }

    #[test]
    fn dropout_rate_one_rejected() {
        let g = two_node_graph();
        let ops = GraphOperators::new(&g);
        let p = init_params(Dims::new(2, 3, 2), 1, &mut stream(0, "init")).unwrap();
        let rates = DropoutRates {
            shared: 1.0,
            specific: 0.1,
        };
        let mut rng = stream(0, "dropout");
        assert!(forward_all(&ops, &FeatureMatrix::Identity(2), &p, Some((rates, &mut rng))).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut rng = stream(5, "dropout");
        let m = draw_dropout_mask(50, 40, 0.25, &mut rng).unwrap().unwrap();
        let keep = 1.0 / 0.75;
        assert!(m.iter().all(|&v| v == 0.0 || v == keep));
        let dropped = m.iter().filter(|&&v| v == 0.0).count() as f64 / m.len() as f64;
        assert!((dropped - 0.25).abs() < 0.05);
        assert!(draw_dropout_mask(2, 2, 0.0, &mut rng).unwrap().is_none());
    }

    #[test]
    fn embedding_tsv_round_trip() {
        let emb = EmbeddingSet {
            x_shared: array![[0.1, 0.2, 0.3], [1.0, 0.0, 2.5]],
            x_domain: vec![array![[0.5, 1.0 / 3.0], [0.0, 7.0]], array![[1.0, 2.0], [3.0, 4.0]]],
            provenance: None,
        };
        let labels = vec!["a".to_string(), "b".to_string()];
        let (back_labels, back) = EmbeddingSet::from_tsv(&emb.to_tsv(&labels), "e").unwrap();
        assert_eq!(back_labels, labels);
        assert_eq!(back, emb);
        let tagged = EmbeddingSet {
            provenance: Some(0xdead_beef_0123),
            ..emb
        };
        assert_eq!(EmbeddingSet::from_tsv(&tagged.to_tsv(&labels), "e").unwrap().1, tagged);
        assert!(EmbeddingSet::from_tsv("a\tshared\t1\nb\tshared\t1\t2\n", "e").is_err());
    }
}
