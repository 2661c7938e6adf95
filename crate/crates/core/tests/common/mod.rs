#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lsgrec::linkstream::{Event, LinkStream, TimeSpan};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

/// Random stream of `events` interactions over `users` x `items` in `[0, horizon]`.
pub fn random_stream<R: Rng>(
    rng: &mut R,
    events: usize,
    users: usize,
    items: usize,
    horizon: i64,
) -> LinkStream {
    let evs = (0..events)
        .map(|_| {
            Event::new(
                rng.random_range(0..=horizon),
                format!("u{}", rng.random_range(0..users)),
                format!("i{}", rng.random_range(0..items)),
            )
        })
        .collect();
    LinkStream::with_span(
        evs,
        TimeSpan {
            start: 0,
            end: horizon,
        },
    )
    .unwrap()
}

/// Random weighted digraph as out-adjacency lists.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Vec<Vec<(usize, f64)>> {
    (0..n)
        .map(|x| {
            let mut out = Vec::new();
            for y in 0..n {
                if y != x && rng.random_bool(density) {
                    out.push((y, rng.random_range(0.1..5.0)));
                }
            }
            out
        })
        .collect()
}

/// Random restart distribution with 1..=3 support nodes.
pub fn random_restart<R: Rng>(rng: &mut R, n: usize) -> Vec<(usize, f64)> {
    let k = rng.random_range(1..=3.min(n));
    let nodes: BTreeSet<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
    let raw: Vec<f64> = nodes.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<(usize, f64)> = nodes
        .iter()
        .zip(&raw)
        .map(|(&i, &w)| (i, w / total))
        .collect();
    // make the masses sum to exactly 1 in floating point
    let rest: f64 = out[1..].iter().map(|&(_, m)| m).sum();
    out[0].1 = 1.0 - rest;
    out
}

/// Dense solve of `(I - alpha * (M + d * 1_dangling^T)) PR = (1 - alpha) d`,
/// built directly from raw weights.
pub fn dense_pagerank(adj: &[Vec<(usize, f64)>], d: &[(usize, f64)], alpha: f64) -> Vec<f64> {
    let n = adj.len();
    let mut restart = DVector::<f64>::zeros(n);
    for &(i, m) in d {
        restart[i] += m;
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (x, edges) in adj.iter().enumerate() {
        let total: f64 = edges.iter().map(|&(_, w)| w).sum();
        if total > 0.0 {
            for &(y, w) in edges {
                m[(y, x)] += w / total;
            }
        } else {
            for y in 0..n {
                m[(y, x)] += restart[y];
            }
        }
    }
    let a = DMatrix::<f64>::identity(n, n) - m * alpha;
    let b = restart * (1.0 - alpha);
    let x = a
        .lu()
        .solve(&b)
        .expect("I - alpha M is non-singular for alpha < 1");
    x.iter().copied().collect()
}

#[derive(Debug, PartialEq, Eq)]
pub struct LsgCounts {
    pub nodes: usize,
    pub event_edges: usize,
    pub chain_links: usize,
}

/// Counts what an LSG over `stream` must contain, straight from the events.
pub fn lsg_counts(stream: &LinkStream) -> LsgCounts {
    let mut user_times: BTreeMap<&str, BTreeSet<i64>> = BTreeMap::new();
    let mut item_times: BTreeMap<&str, BTreeSet<i64>> = BTreeMap::new();
    let mut distinct = BTreeSet::new();
    for e in stream.events() {
        user_times.entry(&e.user).or_default().insert(e.t);
        item_times.entry(&e.item).or_default().insert(e.t);
        distinct.insert((e.t, e.user.as_str(), e.item.as_str()));
    }
    let nodes = user_times.values().map(BTreeSet::len).sum::<usize>()
        + item_times.values().map(BTreeSet::len).sum::<usize>();
    let chain_links = user_times
        .values()
        .chain(item_times.values())
        .map(|s| s.len() - 1)
        .sum();
    LsgCounts {
        nodes,
        event_edges: 2 * distinct.len(),
        chain_links,
    }
}
