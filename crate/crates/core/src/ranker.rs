//! Personalized PageRank over a [`RecGraph`] and top-N extraction.
//!
//! Scores solve `PR = alpha · M · PR + (1 - alpha) · d`, where `M` is the
//! column-stochastic transition matrix of the graph and `d` a restart
//! distribution concentrated on the target user's nodes. `alpha` is the
//! probability of following an edge. Mass sitting on a node with no
//! out-edges is sent back to `d`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Flavor, NodeId, RecGraph};
use crate::linkstream::Timestamp;
use crate::tuning::ParamSetting;

/// Sparse column-stochastic matrix. Column `x` lists `(y, w(x,y) / Σ_z w(x,z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    columns: Vec<Vec<(usize, f64)>>,
    dangling: Vec<usize>,
}

impl TransitionMatrix {
    /// Normalizes raw out-adjacency lists `(target, weight)` per source.
    pub fn from_adjacency(adjacency: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = adjacency.len();
        let mut columns = Vec::with_capacity(n);
        let mut dangling = Vec::new();
        for (x, edges) in adjacency.iter().enumerate() {
            let mut total = 0.0;
            for &(y, w) in edges {
                if y >= n || !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bad edge {x} -> {y} with weight {w}"
                    )));
                }
                total += w;
            }
            if total > 0.0 {
                columns.push(
                    edges
                        .iter()
                        .filter(|&&(_, w)| w > 0.0)
                        .map(|&(y, w)| (y, w / total))
                        .collect(),
                );
            } else {
                dangling.push(x);
                columns.push(Vec::new());
            }
        }
        Ok(Self { columns, dangling })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, x: usize) -> &[(usize, f64)] {
        &self.columns[x]
    }

    /// Probability of stepping from `x` to `y`.
    pub fn entry(&self, y: usize, x: usize) -> f64 {
        self.columns[x]
            .iter()
            .filter(|&&(t, _)| t == y)
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn dangling(&self) -> &[usize] {
        &self.dangling
    }

    pub fn is_dangling(&self, x: usize) -> bool {
        self.columns[x].is_empty()
    }
}

pub fn transition_matrix(graph: &RecGraph) -> TransitionMatrix {
    let adjacency: Vec<Vec<(usize, f64)>> = (0..graph.node_count())
        .map(|x| graph.out_edges(x).to_vec())
        .collect();
    TransitionMatrix::from_adjacency(&adjacency).expect("graph weights are validated at build time")
}

/// Sparse restart distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonalizationVector {
    entries: Vec<(usize, f64)>,
}

impl PersonalizationVector {
    /// Entries with zero mass are dropped and repeated indices merged. The
    /// remaining masses must lie in `[0, 1]` and sum to 1 within `1e-12`.
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>, node_count: usize) -> Result<Self> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (idx, mass) in entries {
            if idx >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "personalization references node {idx} of {node_count}"
                )));
            }
            if !(0.0..=1.0).contains(&mass) {
                return Err(Error::InvalidParameter(format!(
                    "personalization mass {mass} outside [0, 1]"
                )));
            }
            if mass > 0.0 {
                *merged.entry(idx).or_default() += mass;
            }
        }
        let total: f64 = merged.values().sum();
        if merged.is_empty() || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "personalization masses sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            entries: merged.into_iter().collect(),
        })
    }

    pub fn single(idx: usize, node_count: usize) -> Result<Self> {
        Self::new([(idx, 1.0)], node_count)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn mass(&self, idx: usize) -> f64 {
        self.entries
            .binary_search_by_key(&idx, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(i, m) in &self.entries {
            v[i] = m;
        }
        v
    }
}

/// Restart distribution for recommending to `user` at time `t`.
///
/// BIP puts all mass on the user node. STG splits it between the user node
/// (`beta`) and the user's latest session node (`1 - beta`). LSG puts all mass
/// on the user's latest temporal node at or before `t`.
pub fn personalization(
    graph: &RecGraph,
    user: &str,
    t: Timestamp,
    beta: f64,
) -> Result<PersonalizationVector> {
    if !graph.has_user(user) {
        return Err(Error::UnknownUser(user.to_string()));
    }
    let n = graph.node_count();
    match graph.flavor() {
        Flavor::Bip => {
            let idx = graph
                .index_of(&NodeId::User(user.to_string()))
                .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
            PersonalizationVector::single(idx, n)
        }
        Flavor::Stg => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!(
                    "beta must lie in [0, 1], got {beta}"
                )));
            }
            let user_idx = graph
                .index_of(&NodeId::User(user.to_string()))
                .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
            let &(_, session_idx) = graph
                .user_timeline(user)
                .last()
                .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
            PersonalizationVector::new([(user_idx, beta), (session_idx, 1.0 - beta)], n)
        }
        Flavor::Lsg => {
            let timeline = graph.user_timeline(user);
            let upto = timeline.partition_point(|&(tk, _)| tk <= t);
            if upto == 0 {
                return Err(Error::NoActivityBefore {
                    user: user.to_string(),
                    t,
                });
            }
            PersonalizationVector::single(timeline[upto - 1].1, n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    /// Probability of following an edge rather than restarting.
    pub alpha: f64,
    /// Stop once the L1 change between iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl PageRankConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            tol: 1e-10,
            max_iter: 1000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub residual: f64,
    pub converged: bool,
}

impl ScoreVector {
    /// Set when the iteration budget ran out before the tolerance was met.
    pub fn warning(&self) -> Option<String> {
        (!self.converged).then(|| {
            format!(
                "pagerank did not converge in {} iterations (L1 change {:e})",
                self.iterations, self.residual
            )
        })
    }
}

/// Power iteration from `PR_0 = d`.
pub fn pagerank(
    m: &TransitionMatrix,
    d: &PersonalizationVector,
    cfg: &PageRankConfig,
) -> Result<ScoreVector> {
    cfg.validate()?;
    let n = m.len();
    if let Some(&(last, _)) = d.entries().last() {
        if last >= n {
            return Err(Error::InvalidParameter(
                "personalization does not match the transition matrix".into(),
            ));
        }
    }
    let alpha = cfg.alpha;
    let mut pr = d.to_dense(n);
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        next.iter_mut().for_each(|v| *v = 0.0);
        for (x, &mass) in pr.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(y, p) in m.column(x) {
                next[y] += alpha * p * mass;
            }
        }
        let dangling: f64 = m.dangling().iter().map(|&x| pr[x]).sum();
        let restart = (1.0 - alpha) + alpha * dangling;
        for &(i, mass) in d.entries() {
            next[i] += restart * mass;
        }
        residual = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if residual < cfg.tol {
            break;
        }
    }
    Ok(ScoreVector {
        scores: pr,
        iterations,
        residual,
        converged: residual < cfg.tol,
    })
}

/// Preference per item. LSG sums over every temporal node of the item.
pub fn item_scores<'g>(graph: &'g RecGraph, pr: &ScoreVector) -> BTreeMap<&'g str, f64> {
    let mut out: BTreeMap<&str, f64> = BTreeMap::new();
    for (idx, node) in graph.nodes().iter().enumerate() {
        if let Some(item) = node.item() {
            *out.entry(item).or_default() += pr.scores[idx];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecommendationList(pub Vec<(String, f64)>);

impl RecommendationList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(i, _)| i.as_str())
    }
}

/// Scores closer than this compare equal when ranking, so round-off noise
/// cannot reorder items whose exact scores coincide.
pub const SCORE_RESOLUTION: f64 = 1e-12;

fn rank_key(score: f64) -> i64 {
    (score / SCORE_RESOLUTION).round() as i64
}

/// Best `n` items outside `exclude`, by descending score then ascending id.
pub fn top_n(
    scores: &BTreeMap<&str, f64>,
    exclude: &BTreeSet<&str>,
    n: usize,
) -> RecommendationList {
    let mut candidates: Vec<(&str, f64, i64)> = scores
        .iter()
        .filter(|(item, _)| !exclude.contains(*item))
        .map(|(&item, &s)| (item, s, rank_key(s)))
        .collect();
    candidates.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    RecommendationList(
        candidates
            .into_iter()
            .take(n)
            .map(|(item, s, _)| (item.to_string(), s))
            .collect(),
    )
}

/// A graph paired with its transition matrix, for repeated queries.
pub struct Recommender<'g> {
    graph: &'g RecGraph,
    matrix: TransitionMatrix,
}

impl<'g> Recommender<'g> {
    pub fn new(graph: &'g RecGraph) -> Self {
        Self {
            graph,
            matrix: transition_matrix(graph),
        }
    }

    pub fn graph(&self) -> &'g RecGraph {
        self.graph
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn scores(&self, user: &str, t: Timestamp, params: &ParamSetting) -> Result<ScoreVector> {
        let d = personalization(self.graph, user, t, params.beta.unwrap_or(1.0))?;
        pagerank(&self.matrix, &d, &PageRankConfig::new(params.alpha))
    }

    pub fn recommend(
        &self,
        user: &str,
        t: Timestamp,
        params: &ParamSetting,
        seen: &BTreeSet<&str>,
    ) -> Result<RecommendationList> {
        if params.n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        let pr = self.scores(user, t, params)?;
        Ok(top_n(&item_scores(self.graph, &pr), seen, params.n))
    }
}

/// Top-N items for `user` at time `t`, skipping `seen`.
pub fn recommend(
    graph: &RecGraph,
    user: &str,
    t: Timestamp,
    params: &ParamSetting,
    seen: &BTreeSet<&str>,
) -> Result<RecommendationList> {
    Recommender::new(graph).recommend(user, t, params, seen)
}
