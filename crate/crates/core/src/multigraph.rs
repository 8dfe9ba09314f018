//! The weighted multi-graph: one node set shared by every domain, one edge set per domain.
//!
//! Also builds graphs from behavior sequences (adjacent items in a session become an
//! edge, weighted by how many times the pair occurs) and produces the renormalized
//! propagation matrices `W^-1/2 (A + I) W^-1/2` used by the convolution layers.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// An undirected edge stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn key(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

fn canonical(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiGraph {
    n_nodes: usize,
    edges: Vec<Vec<Edge>>,
    labels: Option<Vec<String>>,
    // sorted neighbor lists per domain, derived from `edges`
    neighbors: Vec<Vec<Vec<usize>>>,
}

impl MultiGraph {
    /// Validates and canonicalizes the edge sets. Edges may be given in either
    /// orientation; each domain's list is sorted by `(i, j)`.
    pub fn new(n_nodes: usize, edges: Vec<Vec<Edge>>, labels: Option<Vec<String>>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        if edges.is_empty() {
            return Err(Error::InvalidInput("graph must have at least one domain".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n_nodes {
                return Err(Error::InvalidInput(format!("{} labels for {} nodes", l.len(), n_nodes)));
            }
            let mut seen = HashSet::new();
            for name in l {
                if !seen.insert(name.as_str()) {
                    return Err(Error::InvalidInput(format!("duplicate node label {name:?}")));
                }
            }
        }
        let mut canonical_edges = Vec::with_capacity(edges.len());
        for (d, list) in edges.into_iter().enumerate() {
            let mut seen = HashSet::with_capacity(list.len());
            let mut out = Vec::with_capacity(list.len());
            for e in list {
                if e.i >= n_nodes || e.j >= n_nodes {
                    return Err(Error::InvalidInput(format!(
                        "domain {d}: edge ({}, {}) has an endpoint outside [0, {n_nodes})",
                        e.i, e.j
                    )));
                }
                if e.i == e.j {
                    return Err(Error::InvalidInput(format!("domain {d}: self-loop on node {}", e.i)));
                }
                if !(e.weight.is_finite() && e.weight > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "domain {d}: edge ({}, {}) has non-positive weight {}",
                        e.i, e.j, e.weight
                    )));
                }
                let (i, j) = canonical(e.i, e.j);
                if !seen.insert((i, j)) {
                    return Err(Error::InvalidInput(format!("domain {d}: duplicate edge ({i}, {j})")));
                }
                out.push(Edge { i, j, weight: e.weight });
            }
            out.sort_by_key(|e| e.key());
            canonical_edges.push(out);
        }
        let neighbors = canonical_edges
            .iter()
            .map(|list| {
                let mut adj = vec![Vec::new(); n_nodes];
                for e in list {
                    adj[e.i].push(e.j);
                    adj[e.j].push(e.i);
                }
                for a in &mut adj {
                    a.sort_unstable();
                }
                adj
            })
            .collect();
        Ok(MultiGraph {
            n_nodes,
            edges: canonical_edges,
            labels,
            neighbors,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_domains(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, domain: usize) -> &[Edge] {
        &self.edges[domain]
    }

    pub fn all_edges(&self) -> &[Vec<Edge>] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of a node: its label in string mode, else its index.
    pub fn label(&self, node: usize) -> String {
        match &self.labels {
            Some(l) => l[node].clone(),
            None => node.to_string(),
        }
    }

    /// Map from label to node index; in integer mode the decimal index is the label.
    pub fn label_index(&self) -> HashMap<String, usize> {
        (0..self.n_nodes).map(|i| (self.label(i), i)).collect()
    }

    pub fn check_domain(&self, domain: usize) -> Result<()> {
        if domain < self.n_domains() {
            Ok(())
        } else {
            Err(Error::DomainOutOfRange {
                domain,
                n_domains: self.n_domains(),
            })
        }
    }

    pub fn neighbors(&self, domain: usize, node: usize) -> &[usize] {
        &self.neighbors[domain][node]
    }

    pub fn has_edge(&self, domain: usize, a: usize, b: usize) -> bool {
        self.neighbors[domain][a].binary_search(&b).is_ok()
    }

    /// Sum of incident edge weights of every node in one domain.
    pub fn weighted_degrees(&self, domain: usize) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_nodes];
        for e in &self.edges[domain] {
            deg[e.i] += e.weight;
            deg[e.j] += e.weight;
        }
        deg
    }

    /// Same nodes and labels, new edge sets.
    pub fn with_edges(&self, edges: Vec<Vec<Edge>>) -> Result<MultiGraph> {
        MultiGraph::new(self.n_nodes, edges, self.labels.clone())
    }

    /// Keeps only the listed domains, in the given order.
    pub fn select_domains(&self, domains: &[usize]) -> Result<MultiGraph> {
        let mut edges = Vec::with_capacity(domains.len());
        for &d in domains {
            self.check_domain(d)?;
            edges.push(self.edges[d].clone());
        }
        self.with_edges(edges)
    }

    /// Stable content fingerprint (FNV-1a over the canonical text form).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// Canonical text form: `N D` header, one edge block per domain separated by
    /// `%` lines, then an optional `%labels` section of `<index>\t<label>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.n_nodes, self.n_domains()).unwrap();
        for (d, list) in self.edges.iter().enumerate() {
            if d > 0 {
                out.push_str("%\n");
            }
            for e in list {
                writeln!(out, "{} {} {:?}", e.i, e.j, e.weight).unwrap();
            }
        }
        if let Some(labels) = &self.labels {
            out.push_str("%labels\n");
            for (i, l) in labels.iter().enumerate() {
                writeln!(out, "{i}\t{l}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str, source_name: &str) -> Result<MultiGraph> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (n_nodes, n_domains) = loop {
            let Some((no, line)) = lines.next() else {
                return Err(Error::parse(source_name, 1, "missing `N D` header"));
            };
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::parse(source_name, no, "header must be `N D`"));
            }
            let n = parse_usize(parts[0], source_name, no)?;
            let d = parse_usize(parts[1], source_name, no)?;
            if d == 0 {
                return Err(Error::parse(source_name, no, "graph must have at least one domain"));
            }
            break (n, d);
        };
        let mut edges: Vec<Vec<Edge>> = vec![Vec::new()];
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut labels: Option<Vec<Option<String>>> = None;
        for (no, raw) in lines {
            if let Some(slots) = labels.as_mut() {
                if raw.trim().is_empty() {
                    continue;
                }
                let (idx, name) = raw
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(source_name, no, "label line must be `<index>\\t<label>`"))?;
                let idx = parse_usize(idx.trim(), source_name, no)?;
                if idx >= n_nodes || slots[idx].is_some() {
                    return Err(Error::parse(
                        source_name,
                        no,
                        format!("bad or repeated label index {idx}"),
                    ));
                }
                slots[idx] = Some(name.to_string());
                continue;
            }
            let trimmed = raw.trim();
            if trimmed == "%labels" {
                labels = Some(vec![None; n_nodes]);
                continue;
            }
            if trimmed == "%" {
                edges.push(Vec::new());
                seen.clear();
                continue;
            }
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let (a, b, w) = parse_edge_tokens(line, source_name, no)?;
            let a = parse_usize(a, source_name, no)?;
            let b = parse_usize(b, source_name, no)?;
            let d = edges.len() - 1;
            check_edge(a, b, w, d, &mut seen, source_name, no)?;
            edges.last_mut().unwrap().push(Edge { i: a, j: b, weight: w });
        }
        if edges.len() != n_domains {
            return Err(Error::parse(
                source_name,
                text.lines().count().max(1),
                format!("header declares {n_domains} domains but {} blocks found", edges.len()),
            ));
        }
        let labels = match labels {
            None => None,
            Some(slots) => {
                let mut out = Vec::with_capacity(n_nodes);
                for (i, s) in slots.into_iter().enumerate() {
                    out.push(s.ok_or_else(|| {
                        Error::parse(source_name, text.lines().count(), format!("node {i} has no label"))
                    })?);
                }
                Some(out)
            }
        };
        MultiGraph::new(n_nodes, edges, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MultiGraph> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MultiGraph::from_text(&text, &path.display().to_string())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(k) => line[..k].trim(),
        None => line.trim(),
    }
}

fn parse_usize(tok: &str, source_name: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| {
        Error::parse(
            source_name,
            line,
            format!("expected a non-negative integer, got {tok:?}"),
        )
    })
}

/// Splits `<i> <j> [weight]`; a missing weight means 1.
fn parse_edge_tokens<'a>(line: &'a str, source_name: &str, no: usize) -> Result<(&'a str, &'a str, f64)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let w = match parts.len() {
        2 => 1.0,
        3 => parts[2]
            .parse::<f64>()
            .map_err(|_| Error::parse(source_name, no, format!("bad weight {:?}", parts[2])))?,
        _ => return Err(Error::parse(source_name, no, "expected `<i> <j> <weight>`")),
    };
    Ok((parts[0], parts[1], w))
}

fn check_edge(
    a: usize,
    b: usize,
    w: f64,
    domain: usize,
    seen: &mut HashSet<(usize, usize)>,
    source_name: &str,
    no: usize,
) -> Result<()> {
    if a == b {
        return Err(Error::parse(source_name, no, format!("self-loop on node {a}")));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::parse(
            source_name,
            no,
            format!("weight must be positive, got {w}"),
        ));
    }
    if !seen.insert(canonical(a, b)) {
        return Err(Error::parse(
            source_name,
            no,
            format!("duplicate edge ({}, {}) in domain {domain}", a.min(b), a.max(b)),
        ));
    }
    Ok(())
}

/// Parses one edge-list text per domain.
///
/// When every node token in every file is a non-negative integer the graph uses those
/// integers as indices (N = largest + 1). Otherwise tokens are labels, numbered in
/// order of first appearance.
pub fn parse_edge_lists(sources: &[(String, String)]) -> Result<MultiGraph> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("at least one edge list is required".into()));
    }
    struct Raw<'a> {
        a: &'a str,
        b: &'a str,
        w: f64,
        line: usize,
    }
    let mut raw: Vec<Vec<Raw>> = Vec::with_capacity(sources.len());
    for (name, text) in sources {
        let mut list = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let (a, b, w) = parse_edge_tokens(line, name, k + 1)?;
            list.push(Raw { a, b, w, line: k + 1 });
        }
        raw.push(list);
    }
    let integer_mode = raw
        .iter()
        .flatten()
        .all(|r| r.a.parse::<usize>().is_ok() && r.b.parse::<usize>().is_ok());

    let mut lookup: HashMap<&str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut max_index = 0usize;
    let mut edges = Vec::with_capacity(raw.len());
    for (d, list) in raw.iter().enumerate() {
        let name = &sources[d].0;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(list.len());
        for r in list {
            let (a, b) = if integer_mode {
                (r.a.parse::<usize>().unwrap(), r.b.parse::<usize>().unwrap())
            } else {
                let a = intern(&mut lookup, &mut labels, r.a);
                (a, intern(&mut lookup, &mut labels, r.b))
            };
            check_edge(a, b, r.w, d, &mut seen, name, r.line)?;
            max_index = max_index.max(a).max(b);
            out.push(Edge {
                i: a,
                j: b,
                weight: r.w,
            });
        }
        edges.push(out);
    }
    if integer_mode {
        let n = if raw.iter().all(|l| l.is_empty()) {
            1
        } else {
            max_index + 1
        };
        MultiGraph::new(n, edges, None)
    } else {
        MultiGraph::new(labels.len(), edges, Some(labels))
    }
}

fn intern<'a>(lookup: &mut HashMap<&'a str, usize>, labels: &mut Vec<String>, tok: &'a str) -> usize {
    *lookup.entry(tok).or_insert_with(|| {
        labels.push(tok.to_string());
        labels.len() - 1
    })
}

/// Reads one edge-list file per domain; see [`parse_edge_lists`].
pub fn load_edge_lists<P: AsRef<Path>>(paths: &[P]) -> Result<MultiGraph> {
    let mut sources = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        sources.push((p.display().to_string(), text));
    }
    parse_edge_lists(&sources)
}

/// One user's session in one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub user: String,
    pub domain: usize,
    pub items: Vec<String>,
    /// One timestamp per item when present.
    pub timestamps: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSequences {
    n_domains: usize,
    records: Vec<SequenceRecord>,
}

impl BehaviorSequences {
    pub fn new(n_domains: usize, records: Vec<SequenceRecord>) -> Result<Self> {
        if n_domains == 0 {
            return Err(Error::InvalidInput("at least one domain is required".into()));
        }
        for (k, r) in records.iter().enumerate() {
            if r.domain >= n_domains {
                return Err(Error::DomainOutOfRange {
                    domain: r.domain,
                    n_domains,
                });
            }
            if r.items.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "record {k} (user {}) has an empty sequence",
                    r.user
                )));
            }
            if let Some(ts) = &r.timestamps {
                if ts.len() != r.items.len() {
                    return Err(Error::InvalidInput(format!(
                        "record {k} (user {}): {} timestamps for {} items",
                        r.user,
                        ts.len(),
                        r.items.len()
                    )));
                }
            }
        }
        Ok(BehaviorSequences { n_domains, records })
    }

    pub fn n_domains(&self) -> usize {
        self.n_domains
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Item vocabulary in order of first appearance.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            for it in &r.items {
                if seen.insert(it.as_str()) {
                    out.push(it.clone());
                }
            }
        }
        out
    }

    /// Parses `<user>\t<domain>\t<item,item,...>[\t<ts,ts,...>]` lines.
    ///
    /// With `n_domains = None` the domain count is the largest id plus one.
    pub fn parse(text: &str, source_name: &str, n_domains: Option<usize>) -> Result<Self> {
        let mut records = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let no = k + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 && cols.len() != 4 {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("expected 3 or 4 tab-separated columns, found {}", cols.len()),
                ));
            }
            let domain = parse_usize(cols[1].trim(), source_name, no)?;
            if let Some(nd) = n_domains {
                if domain >= nd {
                    return Err(Error::parse(source_name, no, format!("unknown domain id {domain}")));
                }
            }
            let items: Vec<String> = cols[2]
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            if items.is_empty() {
                return Err(Error::parse(source_name, no, "empty item sequence"));
            }
            let timestamps = if cols.len() == 4 {
                let ts = cols[3]
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<i64>()
                            .map_err(|_| Error::parse(source_name, no, format!("bad timestamp {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if ts.len() != items.len() {
                    return Err(Error::parse(
                        source_name,
                        no,
                        format!("{} timestamps for {} items", ts.len(), items.len()),
                    ));
                }
                Some(ts)
            } else {
                None
            };
            records.push(SequenceRecord {
                user: cols[0].trim().to_string(),
                domain,
                items,
                timestamps,
            });
        }
        let n = n_domains.unwrap_or_else(|| records.iter().map(|r| r.domain + 1).max().unwrap_or(1));
        BehaviorSequences::new(n, records)
    }

    pub fn load(path: impl AsRef<Path>, n_domains: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BehaviorSequences::parse(&text, &path.display().to_string(), n_domains)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            write!(out, "{}\t{}\t{}", r.user, r.domain, r.items.join(",")).unwrap();
            if let Some(ts) = &r.timestamps {
                let ts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(out, "\t{}", ts.join(",")).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the multi-graph from behavior sequences.
///
/// Two items are linked in domain `d` when they occur next to each other in some
/// session of that domain; the weight is the number of such adjacent occurrences,
/// counted without regard to order. Repeats of one item produce nothing. Pairs whose
/// total weight is below `min_weight` are dropped. Nodes are the item vocabulary in
/// first-appearance order and carry the item ids as labels.
pub fn build_from_sequences(seqs: &BehaviorSequences, min_weight: u64) -> Result<MultiGraph> {
    if seqs.is_empty() {
        return Err(Error::InvalidInput("no behavior sequences".into()));
    }
    let vocab = seqs.vocabulary();
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let mut counts: Vec<HashMap<(usize, usize), u64>> = vec![HashMap::new(); seqs.n_domains()];
    for r in seqs.records() {
        if r.domain >= seqs.n_domains() {
            return Err(Error::DomainOutOfRange {
                domain: r.domain,
                n_domains: seqs.n_domains(),
            });
        }
        for pair in r.items.windows(2) {
            let a = index[pair[0].as_str()];
            let b = index[pair[1].as_str()];
            if a != b {
                *counts[r.domain].entry(canonical(a, b)).or_insert(0) += 1;
            }
        }
    }
    let edges = counts
        .into_iter()
        .map(|m| {
            m.into_iter()
                .filter(|&(_, c)| c >= min_weight)
                .map(|((i, j), c)| Edge { i, j, weight: c as f64 })
                .collect()
        })
        .collect();
    MultiGraph::new(vocab.len(), edges, Some(vocab))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdjacencyKind {
    /// Binary union of all domains.
    Union,
    Domain(usize),
}

/// `W^-1/2 (A + I) W^-1/2` with `W(i,i) = sum_j (A + I)(i,j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub kind: AdjacencyKind,
    pub matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

fn renormalize(n: usize, weighted: impl Iterator<Item = (usize, usize, f64)>) -> CsrMatrix {
    let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for (i, j, w) in weighted {
        triplets.push((i, j, w));
        triplets.push((j, i, w));
    }
    let raw = CsrMatrix::from_triplets(n, triplets);
    let inv_sqrt: Array1<f64> = (0..n)
        .map(|i| 1.0 / raw.row(i).map(|(_, v)| v).sum::<f64>().sqrt())
        .collect();
    let mut scaled = Vec::with_capacity(raw.nnz());
    for i in 0..n {
        for (j, v) in raw.row(i) {
            scaled.push((i, j, inv_sqrt[i] * v * inv_sqrt[j]));
        }
    }
    CsrMatrix::from_triplets(n, scaled)
}

/// Renormalized binary adjacency of the union of all domains.
pub fn union_adjacency(g: &MultiGraph) -> NormalizedAdjacency {
    let mut pairs: Vec<(usize, usize)> = g.all_edges().iter().flatten().map(Edge::key).collect();
    pairs.sort_unstable();
    pairs.dedup();
    NormalizedAdjacency {
        kind: AdjacencyKind::Union,
        matrix: renormalize(g.n_nodes(), pairs.into_iter().map(|(i, j)| (i, j, 1.0))),
    }
}

/// Renormalized weighted adjacency of one domain.
pub fn domain_adjacency(g: &MultiGraph, domain: usize) -> Result<NormalizedAdjacency> {
    g.check_domain(domain)?;
    Ok(NormalizedAdjacency {
        kind: AdjacencyKind::Domain(domain),
        matrix: renormalize(g.n_nodes(), g.edges(domain).iter().map(|e| (e.i, e.j, e.weight))),
    })
}
