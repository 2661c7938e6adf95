//! Randomized search over a finite hyperparameter grid.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{run_protocol, Metric, Metrics, ProtocolOptions};
use crate::graph::{build_bip, build_lsg, build_stg, Flavor, RecGraph};
use crate::linkstream::LinkStream;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One point of the search space. Fields a flavor does not use are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSetting {
    /// STG slice length, seconds.
    pub delta: Option<i64>,
    /// STG restart mass on the user node.
    pub beta: Option<f64>,
    /// Weight of edges pointing back in time (STG, LSG).
    pub eta_s: Option<f64>,
    /// Damping factor: probability of following an edge.
    pub alpha: f64,
    /// Recommendation list length.
    pub n: usize,
}

impl ParamSetting {
    pub fn bip(alpha: f64, n: usize) -> Self {
        Self {
            delta: None,
            beta: None,
            eta_s: None,
            alpha,
            n,
        }
    }

    pub fn stg(delta: i64, beta: f64, eta_s: f64, alpha: f64, n: usize) -> Self {
        Self {
            delta: Some(delta),
            beta: Some(beta),
            eta_s: Some(eta_s),
            alpha,
            n,
        }
    }

    pub fn lsg(eta_s: f64, alpha: f64, n: usize) -> Self {
        Self {
            delta: None,
            beta: None,
            eta_s: Some(eta_s),
            alpha,
            n,
        }
    }

    /// Drops the fields `flavor` ignores.
    pub fn restricted_to(&self, flavor: Flavor) -> Self {
        match flavor {
            Flavor::Bip => Self::bip(self.alpha, self.n),
            Flavor::Stg => self.clone(),
            Flavor::Lsg => Self {
                delta: None,
                beta: None,
                ..self.clone()
            },
        }
    }

    pub fn validate(&self, flavor: Flavor) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.n == 0 {
            return bad("N must be at least 1".into());
        }
        if matches!(flavor, Flavor::Stg | Flavor::Lsg) {
            match self.eta_s {
                None => return bad(format!("{flavor} requires eta_s")),
                Some(e) if !(e.is_finite() && e >= 0.0) => {
                    return bad(format!("eta_s must be non-negative, got {e}"))
                }
                _ => {}
            }
        }
        if flavor == Flavor::Stg {
            match self.delta {
                None => return bad("stg requires delta".into()),
                Some(d) if d <= 0 => return bad(format!("delta must be positive, got {d}")),
                _ => {}
            }
            match self.beta {
                None => return bad("stg requires beta".into()),
                Some(b) if !(0.0..=1.0).contains(&b) => {
                    return bad(format!("beta must lie in [0, 1], got {b}"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn build_graph(&self, stream: &LinkStream, flavor: Flavor) -> Result<RecGraph> {
        self.validate(flavor)?;
        match flavor {
            Flavor::Bip => build_bip(stream),
            Flavor::Stg => build_stg(
                stream,
                self.delta.expect("validated"),
                self.eta_s.expect("validated"),
            ),
            Flavor::Lsg => build_lsg(stream, self.eta_s.expect("validated")),
        }
    }
}

/// Candidate values per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    /// Seconds.
    pub delta: Vec<i64>,
    pub beta: Vec<f64>,
    pub eta_s: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for ParamGrid {
    /// Session lengths of 7 days to 2 years, and the usual damping and
    /// past-weight ladders.
    fn default() -> Self {
        Self {
            delta: [7, 30, 60, 90, 180, 365, 540, 730]
                .iter()
                .map(|d| d * SECONDS_PER_DAY)
                .collect(),
            beta: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            eta_s: vec![0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            alpha: vec![0.05, 0.1, 0.15, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

impl ParamGrid {
    pub fn validate(&self, flavor: Flavor) -> Result<()> {
        let lists: Vec<(&str, usize)> = match flavor {
            Flavor::Bip => vec![("alpha", self.alpha.len())],
            Flavor::Stg => vec![
                ("delta", self.delta.len()),
                ("beta", self.beta.len()),
                ("eta_s", self.eta_s.len()),
                ("alpha", self.alpha.len()),
            ],
            Flavor::Lsg => vec![("eta_s", self.eta_s.len()), ("alpha", self.alpha.len())],
        };
        if let Some((name, _)) = lists.iter().find(|(_, len)| *len == 0) {
            return Err(Error::InvalidParameter(format!("empty {name} grid")));
        }
        // every candidate must make a valid setting
        for i in 0..self.size(flavor) {
            self.setting(flavor, i, 1).validate(flavor)?;
        }
        Ok(())
    }

    /// Size of the flavor-relevant cross-product.
    pub fn size(&self, flavor: Flavor) -> usize {
        match flavor {
            Flavor::Bip => self.alpha.len(),
            Flavor::Stg => self.delta.len() * self.beta.len() * self.eta_s.len() * self.alpha.len(),
            Flavor::Lsg => self.eta_s.len() * self.alpha.len(),
        }
    }

    /// Decodes a cross-product index; `alpha` varies fastest.
    pub fn setting(&self, flavor: Flavor, index: usize, n: usize) -> ParamSetting {
        let mut rest = index;
        let mut pick = |len: usize| {
            let i = rest % len;
            rest /= len;
            i
        };
        match flavor {
            Flavor::Bip => ParamSetting::bip(self.alpha[pick(self.alpha.len())], n),
            Flavor::Lsg => {
                let a = pick(self.alpha.len());
                let e = pick(self.eta_s.len());
                ParamSetting::lsg(self.eta_s[e], self.alpha[a], n)
            }
            Flavor::Stg => {
                let a = pick(self.alpha.len());
                let e = pick(self.eta_s.len());
                let b = pick(self.beta.len());
                let d = pick(self.delta.len());
                ParamSetting::stg(self.delta[d], self.beta[b], self.eta_s[e], self.alpha[a], n)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub settings: Vec<ParamSetting>,
    /// The cross-product had fewer than the requested number of settings.
    pub exhausted: bool,
}

/// Draws `count` distinct settings uniformly from the grid, deterministically
/// for a given `seed`. `n` is the list length stamped on every setting.
pub fn sample_settings(
    grid: &ParamGrid,
    flavor: Flavor,
    count: usize,
    seed: u64,
    n: usize,
) -> Result<Sample> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    grid.validate(flavor)?;
    let size = grid.size(flavor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = if count >= size {
        let mut all: Vec<usize> = (0..size).collect();
        all.shuffle(&mut rng);
        all
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let i = rng.random_range(0..size);
            if seen.insert(i) {
                picked.push(i);
            }
        }
        picked
    };
    Ok(Sample {
        settings: indices
            .into_iter()
            .map(|i| grid.setting(flavor, i, n))
            .collect(),
        exhausted: count > size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Position in the sampled sequence, from 0.
    pub sample_index: usize,
    pub setting: ParamSetting,
    pub metrics: Option<Metrics>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub flavor: Flavor,
    pub objective: Metric,
    pub seed: u64,
    pub exhausted: bool,
    /// Evaluated settings, best first under `objective`.
    pub leaderboard: Vec<LeaderboardEntry>,
    /// Settings whose evaluation failed, in sample order.
    pub failed: Vec<LeaderboardEntry>,
}

impl SearchOutcome {
    pub fn best(&self) -> Option<&LeaderboardEntry> {
        self.leaderboard.first()
    }

    /// Best entry under some other metric.
    pub fn best_by(&self, metric: Metric) -> Option<&LeaderboardEntry> {
        let mut entries: Vec<&LeaderboardEntry> = self.leaderboard.iter().collect();
        sort_entries(&mut entries, metric);
        entries.first().copied()
    }

    /// Columns: sample_index, flavor, delta (days), beta, eta_s, alpha, n,
    /// TA_F1, TA_HR, TA_MAP, status. Leaderboard rows first, then failures.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "sample_index",
            "flavor",
            "delta",
            "beta",
            "eta_s",
            "alpha",
            "n",
            "TA_F1",
            "TA_HR",
            "TA_MAP",
            "status",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in self.leaderboard.iter().chain(&self.failed) {
            let s = &e.setting;
            out.write_record([
                e.sample_index.to_string(),
                self.flavor.to_string(),
                opt(s.delta.map(|d| d as f64 / SECONDS_PER_DAY as f64)),
                opt(s.beta),
                opt(s.eta_s),
                s.alpha.to_string(),
                s.n.to_string(),
                opt(e.metrics.map(|m| m.f1)),
                opt(e.metrics.map(|m| m.hr)),
                opt(e.metrics.map(|m| m.map)),
                e.status.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Descending by `metric`, earlier samples first on ties.
pub fn sort_entries(entries: &mut [&LeaderboardEntry], metric: Metric) {
    let key = |e: &LeaderboardEntry| {
        e.metrics
            .map(|m| m.get(metric))
            .unwrap_or(f64::NEG_INFINITY)
    };
    entries.sort_by(|a, b| {
        key(b)
            .total_cmp(&key(a))
            .then_with(|| a.sample_index.cmp(&b.sample_index))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub flavor: Flavor,
    pub grid: ParamGrid,
    pub count: usize,
    pub seed: u64,
    pub n: usize,
    pub objective: Metric,
    pub protocol: ProtocolOptions,
}

/// Evaluates every sampled setting with the windowed protocol and ranks them.
pub fn search(stream: &LinkStream, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let sample = sample_settings(&cfg.grid, cfg.flavor, cfg.count, cfg.seed, cfg.n)?;
    let evaluated: Vec<LeaderboardEntry> = sample
        .settings
        .par_iter()
        .enumerate()
        .map(|(sample_index, setting)| {
            let (metrics, status) = match run_protocol(stream, cfg.flavor, setting, &cfg.protocol)
                .and_then(|r| r.metrics())
            {
                Ok(m) => (Some(m), "ok".to_string()),
                Err(e) => (None, format!("failed: {e}")),
            };
            LeaderboardEntry {
                sample_index,
                setting: setting.clone(),
                metrics,
                status,
            }
        })
        .collect();
    let (ok, failed): (Vec<_>, Vec<_>) = evaluated.into_iter().partition(|e| e.metrics.is_some());
    let mut refs: Vec<&LeaderboardEntry> = ok.iter().collect();
    sort_entries(&mut refs, cfg.objective);
    let leaderboard = refs.into_iter().cloned().collect();
    Ok(SearchOutcome {
        flavor: cfg.flavor,
        objective: cfg.objective,
        seed: cfg.seed,
        exhausted: sample.exhausted,
        leaderboard,
        failed,
    })
}
