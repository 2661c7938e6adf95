//! Recommender graphs built from a link stream.
//!
//! All three flavors share [`RecGraph`]: a weighted directed graph over
//! typed nodes, stored as sorted out-adjacency lists. Node indices follow the
//! total order of [`NodeId`], so two builds of the same stream index
//! identically regardless of input order.
//!
//! * BIP: one node per user and item, weight-1 edges both ways for every
//!   observed pair.
//! * STG: BIP plus a session node per (user, active time slice). Session to
//!   item edges weigh 1, item to session edges weigh `eta_s`.
//! * LSG: one node per (time, user) and (time, item) appearance. Event edges
//!   join the two endpoints of each interaction; chain edges join consecutive
//!   appearances of the same user or item, forward with weight 1 and backward
//!   with weight `eta_s`.
//!
//! Edges whose weight would be zero are not stored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkstream::{LinkStream, TimeSpan, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Bip,
    Stg,
    Lsg,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::Bip, Flavor::Stg, Flavor::Lsg];

    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Bip => "bip",
            Flavor::Stg => "stg",
            Flavor::Lsg => "lsg",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bip" => Ok(Flavor::Bip),
            "stg" => Ok(Flavor::Stg),
            "lsg" => Ok(Flavor::Lsg),
            other => Err(Error::InvalidParameter(format!(
                "unknown graph flavor {other:?} (expected bip, stg or lsg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    User(String),
    Item(String),
    /// Activity of `user` during global time slice `slice` (1-based).
    Session {
        user: String,
        slice: usize,
    },
    TemporalUser {
        t: Timestamp,
        user: String,
    },
    TemporalItem {
        t: Timestamp,
        item: String,
    },
}

impl NodeId {
    /// The item this node stands for, if any.
    pub fn item(&self) -> Option<&str> {
        match self {
            NodeId::Item(i) | NodeId::TemporalItem { item: i, .. } => Some(i),
            _ => None,
        }
    }

    fn allowed_in(&self, flavor: Flavor) -> bool {
        matches!(
            (flavor, self),
            (Flavor::Bip, NodeId::User(_) | NodeId::Item(_))
                | (
                    Flavor::Stg,
                    NodeId::User(_) | NodeId::Item(_) | NodeId::Session { .. }
                )
                | (
                    Flavor::Lsg,
                    NodeId::TemporalUser { .. } | NodeId::TemporalItem { .. }
                )
        )
    }
}

/// Renders `U:u`, `I:i`, `S:u@k`, `TU:t@u` or `TI:t@i`.
impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::User(u) => write!(f, "U:{u}"),
            NodeId::Item(i) => write!(f, "I:{i}"),
            NodeId::Session { user, slice } => write!(f, "S:{user}@{slice}"),
            NodeId::TemporalUser { t, user } => write!(f, "TU:{t}@{user}"),
            NodeId::TemporalItem { t, item } => write!(f, "TI:{t}@{item}"),
        }
    }
}

/// Slice `k` covers offsets `[(k-1)·delta, k·delta)` from the span start; the
/// last slice is closed at the span end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SessionSlice {
    pub k: usize,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Number of slices of length `delta` needed to cover `span` (at least one).
pub fn slice_count(span: TimeSpan, delta: i64) -> usize {
    let d = span.duration();
    (((d + delta - 1) / delta) as usize).max(1)
}

/// 1-based slice holding `t`.
pub fn slice_index(span: TimeSpan, delta: i64, t: Timestamp) -> usize {
    let k = ((t - span.start).max(0) / delta) as usize + 1;
    k.min(slice_count(span, delta))
}

pub fn session_slices(span: TimeSpan, delta: i64) -> Vec<SessionSlice> {
    (1..=slice_count(span, delta))
        .map(|k| SessionSlice {
            k,
            start: span.start + (k as i64 - 1) * delta,
            end: (span.start + k as i64 * delta).min(span.end),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphParams {
    pub eta_s: Option<f64>,
    /// STG slice length in seconds.
    pub delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecGraph {
    flavor: Flavor,
    params: GraphParams,
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    out: Vec<Vec<(usize, f64)>>,
    // user -> (slice or timestamp, node index), ascending
    timelines: HashMap<String, Vec<(i64, usize)>>,
}

impl RecGraph {
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeId {
        &self.nodes[idx]
    }

    pub fn index_of(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    /// `(target, weight)` pairs sorted by target index.
    pub fn out_edges(&self, idx: usize) -> &[(usize, f64)] {
        &self.out[idx]
    }

    pub fn weight(&self, from: &NodeId, to: &NodeId) -> Option<f64> {
        let (a, b) = (self.index_of(from)?, self.index_of(to)?);
        let edges = &self.out[a];
        edges
            .binary_search_by_key(&b, |&(t, _)| t)
            .ok()
            .map(|pos| edges[pos].1)
    }

    /// All edges as `(source, target, weight)` in node order.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId, f64)> + '_ {
        self.out.iter().enumerate().flat_map(move |(src, list)| {
            list.iter()
                .map(move |&(dst, w)| (&self.nodes[src], &self.nodes[dst], w))
        })
    }

    /// Distinct item ids present in the graph.
    pub fn items(&self) -> BTreeSet<&str> {
        self.nodes.iter().filter_map(NodeId::item).collect()
    }

    pub fn has_user(&self, user: &str) -> bool {
        self.timelines.contains_key(user) || self.index.contains_key(&NodeId::User(user.into()))
    }

    /// Session nodes (STG, keyed by slice) or temporal user nodes (LSG, keyed
    /// by timestamp) of `user`, ascending. Empty for BIP.
    pub fn user_timeline(&self, user: &str) -> &[(i64, usize)] {
        self.timelines.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Copy with every edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<RecGraph> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut g = self.clone();
        for list in &mut g.out {
            for (_, w) in list.iter_mut() {
                *w *= factor;
            }
        }
        Ok(g)
    }

    /// Writes one `src \t dst \t weight` line per edge, in node order.
    /// Weights use the shortest round-trip decimal form (`1`, `0.5`).
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (src, dst, weight) in self.edges() {
            writeln!(w, "{src}\t{dst}\t{weight}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Builder {
    nodes: BTreeSet<NodeId>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
}

impl Builder {
    fn edge(&mut self, from: NodeId, to: NodeId, weight: f64) {
        debug_assert!(from != to, "self-loop on {from}");
        self.nodes.insert(from.clone());
        self.nodes.insert(to.clone());
        if weight > 0.0 {
            self.edges.insert((from, to), weight);
        }
    }

    fn finish(self, flavor: Flavor, params: GraphParams) -> RecGraph {
        let nodes: Vec<NodeId> = self.nodes.into_iter().collect();
        debug_assert!(nodes.iter().all(|n| n.allowed_in(flavor)));
        let index: HashMap<NodeId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut out = vec![Vec::new(); nodes.len()];
        for ((from, to), w) in self.edges {
            out[index[&from]].push((index[&to], w));
        }
        for list in &mut out {
            list.sort_by_key(|&(t, _)| t);
        }
        let mut timelines: HashMap<String, Vec<(i64, usize)>> = HashMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            match node {
                NodeId::Session { user, slice } => timelines
                    .entry(user.clone())
                    .or_default()
                    .push((*slice as i64, idx)),
                NodeId::TemporalUser { t, user } => {
                    timelines.entry(user.clone()).or_default().push((*t, idx))
                }
                _ => {}
            }
        }
        for tl in timelines.values_mut() {
            tl.sort_unstable();
        }
        RecGraph {
            flavor,
            params,
            nodes,
            index,
            out,
            timelines,
        }
    }
}

fn check_eta(eta_s: f64) -> Result<()> {
    if eta_s.is_finite() && eta_s >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eta_s must be a non-negative real, got {eta_s}"
        )))
    }
}

fn add_bipartite(b: &mut Builder, stream: &LinkStream) {
    for e in stream.events() {
        let u = NodeId::User(e.user.clone());
        let i = NodeId::Item(e.item.clone());
        b.edge(u.clone(), i.clone(), 1.0);
        b.edge(i, u, 1.0);
    }
}

pub fn build_bip(stream: &LinkStream) -> Result<RecGraph> {
    if stream.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut b = Builder::default();
    add_bipartite(&mut b, stream);
    Ok(b.finish(Flavor::Bip, GraphParams::default()))
}

/// `delta` is the slice length in seconds; slices are anchored at the start
/// of the stream's span.
pub fn build_stg(stream: &LinkStream, delta: i64, eta_s: f64) -> Result<RecGraph> {
    if delta <= 0 {
        return Err(Error::InvalidParameter(format!(
            "session length must be positive, got {delta}"
        )));
    }
    check_eta(eta_s)?;
    if stream.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let span = stream.time_span();
    let mut b = Builder::default();
    add_bipartite(&mut b, stream);
    for e in stream.events() {
        let s = NodeId::Session {
            user: e.user.clone(),
            slice: slice_index(span, delta, e.t),
        };
        let i = NodeId::Item(e.item.clone());
        b.edge(s.clone(), i.clone(), 1.0);
        b.edge(i, s, eta_s);
    }
    Ok(b.finish(
        Flavor::Stg,
        GraphParams {
            eta_s: Some(eta_s),
            delta: Some(delta),
        },
    ))
}

pub fn build_lsg(stream: &LinkStream, eta_s: f64) -> Result<RecGraph> {
    check_eta(eta_s)?;
    if stream.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut b = Builder::default();
    let mut user_times: BTreeMap<&str, BTreeSet<Timestamp>> = BTreeMap::new();
    let mut item_times: BTreeMap<&str, BTreeSet<Timestamp>> = BTreeMap::new();
    for e in stream.events() {
        let u = NodeId::TemporalUser {
            t: e.t,
            user: e.user.clone(),
        };
        let i = NodeId::TemporalItem {
            t: e.t,
            item: e.item.clone(),
        };
        b.edge(u.clone(), i.clone(), 1.0);
        b.edge(i, u, 1.0);
        user_times.entry(&e.user).or_default().insert(e.t);
        item_times.entry(&e.item).or_default().insert(e.t);
    }
    for (user, times) in &user_times {
        let node = |t: Timestamp| NodeId::TemporalUser {
            t,
            user: user.to_string(),
        };
        chain(&mut b, times, node, eta_s);
    }
    for (item, times) in &item_times {
        let node = |t: Timestamp| NodeId::TemporalItem {
            t,
            item: item.to_string(),
        };
        chain(&mut b, times, node, eta_s);
    }
    Ok(b.finish(
        Flavor::Lsg,
        GraphParams {
            eta_s: Some(eta_s),
            delta: None,
        },
    ))
}

fn chain(
    b: &mut Builder,
    times: &BTreeSet<Timestamp>,
    node: impl Fn(Timestamp) -> NodeId,
    eta_s: f64,
) {
    let times: Vec<Timestamp> = times.iter().copied().collect();
    for pair in times.windows(2) {
        let (earlier, later) = (node(pair[0]), node(pair[1]));
        b.edge(earlier.clone(), later.clone(), 1.0);
        b.edge(later, earlier, eta_s);
    }
}
