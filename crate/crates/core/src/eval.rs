//! Evaluation: top-N recommendation metrics and held-out link prediction.
//!
//! Recommendation: a user's vector in a domain is the mean embedding of the items they
//! interacted with in the training split; candidates are ranked by cosine similarity
//! and scored with Recall@N and MRR@N against the held-out items.
//!
//! Link prediction: a fraction of each domain's edges is removed before training,
//! a logistic regression is fit on combined endpoint embeddings of the retained edges
//! (plus as many sampled non-edges) and scored on the removed ones.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::EmbeddingSet;
use crate::multigraph::{BehaviorSequences, Edge, MultiGraph, SequenceRecord};
use crate::rng::stream;

/// The Top-N grid reported by default.
pub const DEFAULT_TOPN_GRID: [usize; 11] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 1000];

/// One user's history in one domain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DomainHistory {
    /// Interacted items (node indices) from the training split, in order, may repeat.
    pub train: Vec<usize>,
    /// Held-out items, unique.
    pub test: Vec<usize>,
    /// Mean of the train item embeddings; `None` when the user has no train items.
    pub embedding: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user: String,
    pub domains: Vec<DomainHistory>,
}

/// Splits sessions into a training part and held-out items.
///
/// When every record carries timestamps the split is temporal: events at or before
/// `t_min + (1 - test_fraction)(t_max - t_min)` train, later ones are held out.
/// Otherwise `round(test_fraction · len)` positions of each session are drawn at
/// random for testing, keeping at least one training item. The training sessions
/// keep their original order.
pub fn split_sequences(
    seqs: &BehaviorSequences,
    test_fraction: f64,
    seed: u64,
) -> Result<(BehaviorSequences, Vec<SequenceRecord>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let temporal = !seqs.is_empty() && seqs.records().iter().all(|r| r.timestamps.is_some());
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut push = |r: &SequenceRecord, keep: Vec<bool>| {
        let pick = |want: bool| -> (Vec<String>, Option<Vec<i64>>) {
            let items = r
                .items
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k == want)
                .map(|(i, _)| i.clone())
                .collect();
            let ts = r.timestamps.as_ref().map(|ts| {
                ts.iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k == want)
                    .map(|(t, _)| *t)
                    .collect()
            });
            (items, ts)
        };
        let (items, timestamps) = pick(true);
        if !items.is_empty() {
            train.push(SequenceRecord {
                user: r.user.clone(),
                domain: r.domain,
                items,
                timestamps,
            });
        }
        let (items, timestamps) = pick(false);
        if !items.is_empty() {
            test.push(SequenceRecord {
                user: r.user.clone(),
                domain: r.domain,
                items,
                timestamps,
            });
        }
    };
    if temporal {
        let all = seqs
            .records()
            .iter()
            .flat_map(|r| r.timestamps.as_ref().unwrap().iter().copied());
        let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        let cutoff = lo as f64 + (1.0 - test_fraction) * (hi - lo) as f64;
        for r in seqs.records() {
            let keep = r
                .timestamps
                .as_ref()
                .unwrap()
                .iter()
                .map(|&t| t as f64 <= cutoff)
                .collect();
            push(r, keep);
        }
    } else {
        let mut rng = stream(seed, "eval/sequence-split");
        for r in seqs.records() {
            let n = r.items.len();
            let n_test = ((test_fraction * n as f64 + 0.5).floor() as usize).min(n.saturating_sub(1));
            let mut keep = vec![true; n];
            for k in rand::seq::index::sample(&mut rng, n, n_test) {
                keep[k] = false;
            }
            push(r, keep);
        }
    }
    Ok((BehaviorSequences::new(seqs.n_domains(), train)?, test))
}

/// Gathers per-user histories. Train items must all be known nodes; held-out items
/// missing from `index` cannot be ranked and are dropped.
pub fn build_profiles(
    train: &BehaviorSequences,
    test: &[SequenceRecord],
    index: &HashMap<String, usize>,
) -> Result<Vec<UserProfile>> {
    let n_domains = train.n_domains();
    let mut order: Vec<String> = Vec::new();
    let mut by_user: HashMap<String, Vec<DomainHistory>> = HashMap::new();
    for r in train.records() {
        let h = &mut entry(&mut order, &mut by_user, &r.user, n_domains)[r.domain];
        for item in &r.items {
            let k = *index
                .get(item)
                .ok_or_else(|| Error::InvalidInput(format!("train item {item:?} is not a node of the graph")))?;
            h.train.push(k);
        }
    }
    for r in test {
        if r.domain >= n_domains {
            return Err(Error::DomainOutOfRange {
                domain: r.domain,
                n_domains,
            });
        }
        let h = &mut entry(&mut order, &mut by_user, &r.user, n_domains)[r.domain];
        for item in &r.items {
            if let Some(&k) = index.get(item) {
                if !h.test.contains(&k) {
                    h.test.push(k);
                }
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|u| {
            let domains = by_user.remove(&u).unwrap();
            UserProfile { user: u, domains }
        })
        .collect())
}

fn entry<'a>(
    order: &mut Vec<String>,
    by_user: &'a mut HashMap<String, Vec<DomainHistory>>,
    user: &str,
    n_domains: usize,
) -> &'a mut Vec<DomainHistory> {
    if !by_user.contains_key(user) {
        order.push(user.to_string());
    }
    by_user
        .entry(user.to_string())
        .or_insert_with(|| vec![DomainHistory::default(); n_domains])
}

/// Sets every user's domain-`d` vector to the mean of their train item embeddings.
pub fn user_embeddings(profiles: &mut [UserProfile], emb: &EmbeddingSet, d: usize) -> Result<()> {
    let x = emb.x_domain.get(d).ok_or(Error::DomainOutOfRange {
        domain: d,
        n_domains: emb.n_domains(),
    })?;
    for p in profiles.iter_mut() {
        let h = p.domains.get_mut(d).ok_or(Error::DomainOutOfRange {
            domain: d,
            n_domains: emb.n_domains(),
        })?;
        if h.train.is_empty() {
            h.embedding = None;
            continue;
        }
        let mut sum = Array1::zeros(x.ncols());
        for &i in &h.train {
            if i >= x.nrows() {
                return Err(Error::InvalidInput(format!(
                    "item index {i} outside the embedding table"
                )));
            }
            sum += &x.row(i);
        }
        h.embedding = Some(sum / h.train.len() as f64);
    }
    Ok(())
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>, norm_a: f64) -> f64 {
    let nb = b.dot(&b).sqrt();
    if nb == 0.0 || norm_a == 0.0 {
        0.0
    } else {
        a.dot(&b) / (norm_a * nb)
    }
}

/// Top-N items for one user vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub items: Vec<usize>,
}

/// Ranks all items not in `exclude` by cosine similarity to `user`, descending, ties
/// broken by ascending index, and keeps the first `n`. Items with a zero embedding
/// score 0.
pub fn rank_items(
    user: ArrayView1<f64>,
    items: ArrayView2<f64>,
    n: usize,
    exclude: &HashSet<usize>,
) -> Result<RankedList> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if user.len() != items.ncols() {
        return Err(Error::Shape(format!(
            "user vector of length {} vs items of width {}",
            user.len(),
            items.ncols()
        )));
    }
    let nu = user.dot(&user).sqrt();
    if nu == 0.0 {
        return Err(Error::InvalidInput("user vector is zero".into()));
    }
    let mut scored: Vec<(f64, usize)> = (0..items.nrows())
        .filter(|i| !exclude.contains(i))
        .map(|i| (cosine(user, items.row(i), nu), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(n);
    Ok(RankedList {
        items: scored.into_iter().map(|(_, i)| i).collect(),
    })
}

/// `Σ |R_u[..n] ∩ T_u| / Σ |T_u|` over `(ranking, ground truth)` pairs.
pub fn recall_at_n(results: &[(RankedList, Vec<usize>)], n: usize) -> Result<f64> {
    let total: usize = results.iter().map(|(_, t)| t.len()).sum();
    if total == 0 {
        return Err(Error::InvalidInput("no ground-truth items".into()));
    }
    let hits: usize = results
        .iter()
        .map(|(r, t)| {
            let truth: HashSet<usize> = t.iter().copied().collect();
            r.items.iter().take(n).filter(|i| truth.contains(i)).count()
        })
        .sum();
    Ok(hits as f64 / total as f64)
}

/// Mean over users of `1 / rank` of the first hit within the top `n`; misses count 0.
pub fn mrr_at_n(results: &[(RankedList, Vec<usize>)], n: usize) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no users to evaluate".into()));
    }
    let sum: f64 = results
        .iter()
        .map(|(r, t)| {
            let truth: HashSet<usize> = t.iter().copied().collect();
            r.items
                .iter()
                .take(n)
                .position(|i| truth.contains(i))
                .map_or(0.0, |k| 1.0 / (k + 1) as f64)
        })
        .sum();
    Ok(sum / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecDomainReport {
    pub domain: usize,
    /// Users scored in this domain.
    pub users: usize,
    /// Users with held-out items but no usable vector (no train items or a zero mean).
    pub excluded: usize,
    pub recall: BTreeMap<usize, f64>,
    pub mrr: BTreeMap<usize, f64>,
}

/// Recall@N and MRR@N for every N in `grid`, in domain `d`. Users without held-out
/// items in `d` are skipped; users that have some but lack a usable vector are
/// counted as excluded. With nobody left to score the metric maps are empty.
pub fn evaluate_recommendation(
    profiles: &mut [UserProfile],
    emb: &EmbeddingSet,
    d: usize,
    grid: &[usize],
    exclude_train: bool,
) -> Result<RecDomainReport> {
    let max_n = *grid
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("empty Top-N grid".into()))?;
    user_embeddings(profiles, emb, d)?;
    let items = emb.x_domain[d].view();
    let mut results = Vec::new();
    let mut excluded = 0;
    for p in profiles.iter() {
        let h = &p.domains[d];
        if h.test.is_empty() {
            continue;
        }
        let Some(u) = h.embedding.as_ref().filter(|u| u.iter().any(|&v| v != 0.0)) else {
            excluded += 1;
            continue;
        };
        let exclude: HashSet<usize> = if exclude_train {
            h.train.iter().copied().collect()
        } else {
            HashSet::new()
        };
        results.push((rank_items(u.view(), items, max_n, &exclude)?, h.test.clone()));
    }
    let mut recall = BTreeMap::new();
    let mut mrr = BTreeMap::new();
    if results.is_empty() {
        return Ok(RecDomainReport {
            domain: d,
            users: 0,
            excluded,
            recall,
            mrr,
        });
    }
    for &n in grid {
        recall.insert(n, recall_at_n(&results, n)?);
        mrr.insert(n, mrr_at_n(&results, n)?);
    }
    Ok(RecDomainReport {
        domain: d,
        users: results.len(),
        excluded,
        recall,
        mrr,
    })
}

/// Held-out link prediction data for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEvalSplit {
    pub domain: usize,
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    /// Fingerprint of the retained graph embeddings must be trained on; set by [`retained_graph`].
    pub retained_fingerprint: Option<u64>,
}

/// `round(fraction · edges)`, halves rounded up.
pub fn removal_count(n_edges: usize, fraction: f64) -> usize {
    (fraction * n_edges as f64 + 0.5).floor() as usize
}

/// Removes a random `fraction` of domain `d`'s edges for testing and samples equally
/// many non-edges (of the original graph) for each side, disjoint between sides.
pub fn make_link_split(g: &MultiGraph, d: usize, fraction: f64, seed: u64) -> Result<LinkEvalSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "removal fraction must be in (0, 1), got {fraction}"
        )));
    }
    g.check_domain(d)?;
    let edges = g.edges(d);
    if edges.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "domain {d} needs at least 4 edges, has {}",
            edges.len()
        )));
    }
    let n_test = removal_count(edges.len(), fraction).clamp(1, edges.len() - 1);
    let mut rng = stream(seed, &format!("eval/link-split/{d}"));
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(&mut rng);
    let pick = |ks: &[usize]| -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = ks.iter().map(|&k| edges[k].key()).collect();
        v.sort_unstable();
        v
    };
    let test_pos = pick(&order[..n_test]);
    let train_pos = pick(&order[n_test..]);

    let n = g.n_nodes();
    let non_edges = n * (n - 1) / 2 - edges.len();
    let wanted = train_pos.len() + test_pos.len();
    if non_edges < wanted {
        return Err(Error::InvalidInput(format!(
            "domain {d} has {non_edges} non-edges, {wanted} are needed for balanced classes"
        )));
    }
    let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(wanted);
    let mut draw = |count: usize| -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let key = (a.min(b), a.max(b));
            if a == b || g.has_edge(d, a, b) || !used.insert(key) {
                continue;
            }
            out.push(key);
        }
        out
    };
    let train_neg = draw(train_pos.len());
    let test_neg = draw(test_pos.len());
    Ok(LinkEvalSplit {
        domain: d,
        train_pos,
        test_pos,
        train_neg,
        test_neg,
        retained_fingerprint: None,
    })
}

/// The graph with every split's test edges removed; records its fingerprint in the splits.
pub fn retained_graph(g: &MultiGraph, splits: &mut [LinkEvalSplit]) -> Result<MultiGraph> {
    let mut removed: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); g.n_domains()];
    for s in splits.iter() {
        g.check_domain(s.domain)?;
        removed[s.domain].extend(s.test_pos.iter().copied());
    }
    let edges: Vec<Vec<Edge>> = g
        .all_edges()
        .iter()
        .zip(&removed)
        .map(|(list, gone)| list.iter().filter(|e| !gone.contains(&e.key())).copied().collect())
        .collect();
    let retained = g.with_edges(edges)?;
    let fp = retained.fingerprint();
    for s in splits.iter_mut() {
        s.retained_fingerprint = Some(fp);
    }
    Ok(retained)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combiner {
    Add,
    Hadamard,
}

impl Combiner {
    pub const ALL: [Combiner; 2] = [Combiner::Add, Combiner::Hadamard];

    pub fn combine(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Combiner::Add => &a + &b,
            Combiner::Hadamard => &a * &b,
        }
    }
}

impl std::str::FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(Combiner::Add),
            "hadamard" | "mul" => Ok(Combiner::Hadamard),
            _ => Err(Error::InvalidConfig(format!("unknown combiner {s:?}"))),
        }
    }
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Combiner::Add => "add",
            Combiner::Hadamard => "hadamard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub iterations: usize,
    pub step: f64,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            iterations: 500,
            step: 0.1,
            l2: 1e-4,
        }
    }
}

/// Binary logistic regression on standardized features, fit by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array1<f64>,
    bias: f64,
}

impl LogisticRegression {
    pub fn fit(x: &Array2<f64>, y: &[bool], cfg: LogRegConfig) -> Result<Self> {
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!("{} rows for {} labels", x.nrows(), y.len())));
        }
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            return Err(Error::InvalidInput("training labels contain a single class".into()));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let z = (x - &mean) / &scale;
        let target = Array1::from_iter(y.iter().map(|&v| if v { 1.0 } else { 0.0 }));
        let n = y.len() as f64;
        let mut weights = Array1::zeros(x.ncols());
        let mut bias = 0.0;
        for _ in 0..cfg.iterations {
            let logits = z.dot(&weights) + bias;
            let residual = logits.mapv(crate::objective::sigmoid) - &target;
            let grad_w = z.t().dot(&residual) / n + &weights * cfg.l2;
            let grad_b = residual.sum() / n;
            weights.scaled_add(-cfg.step, &grad_w);
            bias -= cfg.step * grad_b;
        }
        Ok(LogisticRegression {
            mean,
            scale,
            weights,
            bias,
        })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array1<f64> {
        let z = (x - &self.mean) / &self.scale;
        (z.dot(&self.weights) + self.bias).mapv(crate::objective::sigmoid)
    }
}

/// Area under the ROC curve from the Mann–Whitney statistic; tied scores share
/// the average rank, which credits positive/negative ties one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // ranks k+1..=end share their average
        let avg = (k + 1 + end) as f64 / 2.0;
        rank_sum_pos += avg * order[k..end].iter().filter(|&&i| labels[i]).count() as f64;
        k = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// F1 of `prob ≥ threshold` predictions; 0 when there are no positives at all.
pub fn f1_score(probs: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &l) in probs.iter().zip(labels) {
        match (p >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkScores {
    pub combiner: Combiner,
    pub auc: f64,
    pub f1: f64,
}

fn pair_features(x: &Array2<f64>, pairs: &[(usize, usize)], combiner: Combiner) -> Array2<f64> {
    let mut out = Array2::zeros((pairs.len(), x.ncols()));
    for (mut row, &(a, b)) in out.rows_mut().into_iter().zip(pairs) {
        row.assign(&combiner.combine(x.row(a), x.row(b)));
    }
    out
}

/// Fits the classifier on the split's train pairs and scores its test pairs.
///
/// `emb` must come from a model trained on the split's retained graph.
pub fn link_classify(
    split: &LinkEvalSplit,
    emb: &EmbeddingSet,
    combiner: Combiner,
    cfg: LogRegConfig,
) -> Result<LinkScores> {
    match (split.retained_fingerprint, emb.provenance) {
        (Some(want), Some(got)) if want == got => {}
        _ => {
            return Err(Error::InvalidInput(
                "embeddings were not produced from this split's retained graph".into(),
            ))
        }
    }
    let x = emb.x_domain.get(split.domain).ok_or(Error::DomainOutOfRange {
        domain: split.domain,
        n_domains: emb.n_domains(),
    })?;
    let gather = |pos: &[(usize, usize)], neg: &[(usize, usize)]| {
        let pairs: Vec<(usize, usize)> = pos.iter().chain(neg).copied().collect();
        let labels: Vec<bool> = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
        (pair_features(x, &pairs, combiner), labels)
    };
    let (train_x, train_y) = gather(&split.train_pos, &split.train_neg);
    let (test_x, test_y) = gather(&split.test_pos, &split.test_neg);
    let model = LogisticRegression::fit(&train_x, &train_y, cfg)?;
    let probs = model.predict_proba(&test_x).to_vec();
    Ok(LinkScores {
        combiner,
        auc: auc(&probs, &test_y)?,
        f1: f1_score(&probs, &test_y, 0.5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDomainReport {
    pub domain: usize,
    /// Best combiner by AUC.
    pub auc: f64,
    pub f1: f64,
    pub combiner: Combiner,
    pub per_combiner: Vec<LinkScores>,
}

/// Scores every combiner and reports the one with the highest AUC.
pub fn link_report(
    split: &LinkEvalSplit,
    emb: &EmbeddingSet,
    combiners: &[Combiner],
    cfg: LogRegConfig,
) -> Result<LinkDomainReport> {
    let per_combiner = combiners
        .iter()
        .map(|&c| link_classify(split, emb, c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let best = per_combiner
        .iter()
        .copied()
        .max_by(|a, b| a.auc.total_cmp(&b.auc))
        .ok_or_else(|| Error::InvalidConfig("no combiner selected".into()))?;
    Ok(LinkDomainReport {
        domain: split.domain,
        auc: best.auc,
        f1: best.f1,
        combiner: best.combiner,
        per_combiner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;

    fn ranked(items: &[usize]) -> RankedList {
        RankedList { items: items.to_vec() }
    }

    #[test]
    fn mean_user_vector() {
        let emb = EmbeddingSet {
            x_shared: Array2::zeros((3, 1)),
            x_domain: vec![array![[0.0, 2.0], [2.0, 0.0], [5.0, 5.0]]],
            provenance: None,
        };
        let mut profiles = vec![
            UserProfile {
                user: "a".into(),
                domains: vec![DomainHistory {
                    train: vec![0, 1],
                    ..Default::default()
                }],
            },
            UserProfile {
                user: "b".into(),
                domains: vec![DomainHistory {
                    train: vec![2],
                    ..Default::default()
                }],
            },
            UserProfile {
                user: "c".into(),
                domains: vec![DomainHistory::default()],
            },
        ];
        user_embeddings(&mut profiles, &emb, 0).unwrap();
        assert_eq!(profiles[0].domains[0].embedding, Some(array![1.0, 1.0]));
        assert_eq!(profiles[1].domains[0].embedding, Some(array![5.0, 5.0]));
        assert_eq!(profiles[2].domains[0].embedding, None);
    }

    #[test]
    fn ranking_rules() {
        let items = array![[0.0, 1.0], [1.0, 0.0], [0.0, 2.0], [-1.0, 0.0]];
        let u = array![1.0, 0.0];
        let r = rank_items(u.view(), items.view(), 4, &HashSet::new()).unwrap();
        assert_eq!(r.items, vec![1, 0, 2, 3]);
        let scaled = &items * 3.0;
        assert_eq!(rank_items(u.view(), scaled.view(), 4, &HashSet::new()).unwrap(), r);
        let r = rank_items(u.view(), items.view(), 2, &[1].into_iter().collect()).unwrap();
        assert_eq!(r.items, vec![0, 2]);
        assert!(rank_items(u.view(), items.view(), 0, &HashSet::new()).is_err());
        assert!(rank_items(array![0.0, 0.0].view(), items.view(), 2, &HashSet::new()).is_err());
    }

    #[test]
    fn recall_and_mrr_examples() {
        let results = vec![(ranked(&[1, 9, 8]), vec![1, 2]), (ranked(&[3, 4, 7]), vec![3, 4])];
        assert_eq!(recall_at_n(&results, 3).unwrap(), 0.75);
        let all = vec![(ranked(&[1, 2]), vec![1, 2])];
        assert_eq!(recall_at_n(&all, 2).unwrap(), 1.0);
        assert!(recall_at_n(&[(ranked(&[1]), vec![])], 1).is_err());

        assert_eq!(mrr_at_n(&[(ranked(&[5, 1, 2]), vec![1])], 3).unwrap(), 0.5);
        assert_eq!(mrr_at_n(&[(ranked(&[5, 6]), vec![1])], 2).unwrap(), 0.0);
        assert!(mrr_at_n(&[], 2).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[0.9, 0.1], &[true, false], 0.5), 1.0);
        // tp 1, fp 1, fn 1
        assert!((f1_score(&[0.9, 0.6, 0.2], &[true, false, true], 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(f1_score(&[0.1], &[false], 0.5), 0.0);
    }

    fn graph_with_edges(n: usize, m: usize, seed: u64) -> MultiGraph {
        let mut rng = stream(seed, "g");
        let mut set = HashSet::new();
        while set.len() < m {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let mut edges: Vec<Edge> = set.into_iter().map(|(i, j)| Edge { i, j, weight: 1.0 }).collect();
        edges.sort_by_key(|e| e.key());
        MultiGraph::new(n, vec![edges], None).unwrap()
    }

    #[test]
    fn link_split_counts_and_invariants() {
        let g = graph_with_edges(12, 10, 1);
        let s = make_link_split(&g, 0, 0.3, 7).unwrap();
        assert_eq!(s.test_pos.len(), 3);
        assert_eq!(s.train_pos.len(), 7);
        assert_eq!(s.train_neg.len(), 7);
        assert_eq!(s.test_neg.len(), 3);
        let test: HashSet<_> = s.test_pos.iter().collect();
        assert!(s.train_pos.iter().all(|e| !test.contains(e)));
        for &(a, b) in s.train_neg.iter().chain(&s.test_neg) {
            assert!(a != b && !g.has_edge(0, a, b));
        }
        let negs: HashSet<_> = s.train_neg.iter().collect();
        assert!(s.test_neg.iter().all(|e| !negs.contains(e)));
        assert_eq!(removal_count(10, 0.25), 3);
        assert!(make_link_split(&g, 0, 0.0, 1).is_err());
        assert!(make_link_split(&g, 0, 1.0, 1).is_err());
        assert!(make_link_split(&graph_with_edges(5, 3, 1), 0, 0.3, 1).is_err());
    }

    #[test]
    fn different_seeds_give_different_splits() {
        let g = graph_with_edges(40, 100, 2);
        let a = make_link_split(&g, 0, 0.3, 1).unwrap();
        let b = make_link_split(&g, 0, 0.3, 2).unwrap();
        assert_ne!(a.test_pos, b.test_pos);
        assert_eq!(a, make_link_split(&g, 0, 0.3, 1).unwrap());
    }

    #[test]
    fn retained_graph_drops_test_edges_and_tags_splits() {
        let g = graph_with_edges(12, 10, 3);
        let mut splits = vec![make_link_split(&g, 0, 0.3, 7).unwrap()];
        let r = retained_graph(&g, &mut splits).unwrap();
        assert_eq!(r.edges(0).len(), 7);
        assert_eq!(splits[0].retained_fingerprint, Some(r.fingerprint()));
    }

    #[test]
    fn classifier_separates_an_easy_split_and_checks_provenance() {
        let g = graph_with_edges(30, 60, 4);
        let mut splits = vec![make_link_split(&g, 0, 0.3, 1).unwrap()];
        let r = retained_graph(&g, &mut splits).unwrap();
        // oracle embedding: one-hot adjacency rows, so the Hadamard feature counts common neighbours
        // plus an indicator channel, good enough to beat chance comfortably
        let mut x = Array2::zeros((30, 30));
        for e in g.edges(0) {
            x[[e.i, e.j]] = 1.0;
            x[[e.j, e.i]] = 1.0;
        }
        let mut emb = EmbeddingSet {
            x_shared: Array2::zeros((30, 1)),
            x_domain: vec![x],
            provenance: None,
        };
        assert!(link_classify(&splits[0], &emb, Combiner::Add, LogRegConfig::default()).is_err());
        emb.provenance = Some(r.fingerprint() ^ 1);
        assert!(link_classify(&splits[0], &emb, Combiner::Add, LogRegConfig::default()).is_err());
        emb.provenance = Some(r.fingerprint());
        let rep = link_report(&splits[0], &emb, &Combiner::ALL, LogRegConfig::default()).unwrap();
        assert_eq!(rep.per_combiner.len(), 2);
        assert!((0.0..=1.0).contains(&rep.auc) && (0.0..=1.0).contains(&rep.f1));
    }

    #[test]
    fn temporal_and_random_sequence_splits() {
        let text = "u1\t0\ta,b,c,d\t1,2,3,10\nu2\t0\tb,c\t4,9\n";
        let s = BehaviorSequences::parse(text, "s", None).unwrap();
        let (train, test) = split_sequences(&s, 0.2, 0).unwrap();
        // range 1..10, cutoff 8.2
        assert_eq!(train.records()[0].items, vec!["a", "b", "c"]);
        assert_eq!(train.records()[1].items, vec!["b"]);
        assert_eq!(test.len(), 2);
        assert_eq!(test[0].items, vec!["d"]);

        let s = BehaviorSequences::parse("u1\t0\ta,b,c,d,e\nu2\t0\tb\n", "s", None).unwrap();
        let (train, test) = split_sequences(&s, 0.2, 3).unwrap();
        assert_eq!(train.records()[0].items.len(), 4);
        assert_eq!(train.records()[1].items, vec!["b"]);
        assert_eq!(test.len(), 1);
        assert!(split_sequences(&s, 0.0, 3).is_err());
    }

    #[test]
    fn profiles_from_splits() {
        let s = BehaviorSequences::parse("u1\t0\ta,b,c\nu1\t1\tc,d\n", "s", None).unwrap();
        let test = vec![SequenceRecord {
            user: "u1".into(),
            domain: 0,
            items: vec!["d".into(), "d".into(), "zz".into()],
            timestamps: None,
        }];
        let index: HashMap<String, usize> = [("a", 0), ("b", 1), ("c", 2), ("d", 3)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let p = build_profiles(&s, &test, &index).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].domains[0].train, vec![0, 1, 2]);
        assert_eq!(p[0].domains[0].test, vec![3]);
        assert_eq!(p[0].domains[1].train, vec![2, 3]);
        let bad = BehaviorSequences::parse("u1\t0\tq\n", "s", None).unwrap();
        assert!(build_profiles(&bad, &[], &index).is_err());
    }

    #[test]
    fn recommendation_report_over_grid() {
        let emb = EmbeddingSet {
            x_shared: Array2::zeros((4, 1)),
            x_domain: vec![array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]]],
            provenance: None,
        };
        let mut profiles = vec![UserProfile {
            user: "u".into(),
            domains: vec![DomainHistory {
                train: vec![0],
                test: vec![1, 2],
                embedding: None,
            }],
        }];
        let rep = evaluate_recommendation(&mut profiles, &emb, 0, &[1, 2, 3], true).unwrap();
        assert_eq!(rep.users, 1);
        assert_eq!(rep.recall[&1], 0.5);
        assert_eq!(rep.mrr[&1], 1.0);
        assert_eq!(rep.recall[&3], 1.0);

        profiles[0].domains[0].train.clear();
        let rep = evaluate_recommendation(&mut profiles, &emb, 0, &[1], true).unwrap();
        assert_eq!((rep.users, rep.excluded), (0, 1));
        assert!(rep.recall.is_empty());
    }
}
