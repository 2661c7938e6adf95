//! Time-windowed offline evaluation.
//!
//! The stream is cut into equal-length windows `W_1..W_n`. For each
//! `k < n`, graphs are built from `W_1..W_k` and every user with at least one
//! new item in `W_{k+1}` receives a top-N list. Each metric is kept as a
//! numerator/denominator pair per window; the time-averaged value is the
//! ratio of the summed numerators to the summed denominators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Flavor;
use crate::linkstream::{split_windows, LinkStream, TimeSpan, Timestamp, Window};
use crate::ranker::{RecommendationList, Recommender};
use crate::tuning::ParamSetting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    F1,
    #[serde(rename = "HR")]
    HitRatio,
    #[serde(rename = "MAP")]
    Map,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::F1, Metric::HitRatio, Metric::Map];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::F1 => "F1",
            Metric::HitRatio => "HR",
            Metric::Map => "MAP",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(Metric::F1),
            "hr" | "hit_ratio" | "hitratio" => Ok(Metric::HitRatio),
            "map" => Ok(Metric::Map),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric {other:?} (expected f1, hr or map)"
            ))),
        }
    }
}

/// Per-rank hit flags `h(k)` and their running sums `hit_k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HitFlags {
    pub flags: Vec<bool>,
    pub prefix: Vec<usize>,
}

impl HitFlags {
    /// `hit_N`: good recommendations in the whole list.
    pub fn hits(&self) -> usize {
        self.prefix.last().copied().unwrap_or(0)
    }
}

pub fn hits_at_n(recommended: &RecommendationList, relevant: &BTreeSet<&str>) -> HitFlags {
    let flags: Vec<bool> = recommended.items().map(|i| relevant.contains(i)).collect();
    let prefix = flags
        .iter()
        .scan(0, |acc, &h| {
            *acc += usize::from(h);
            Some(*acc)
        })
        .collect();
    HitFlags { flags, prefix }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: f64,
    pub denominator: f64,
}

impl Ratio {
    pub fn new(numerator: f64, denominator: f64) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> Option<f64> {
        (self.denominator > 0.0).then(|| self.numerator / self.denominator)
    }

    fn add(self, other: Ratio) -> Ratio {
        Ratio::new(
            self.numerator + other.numerator,
            self.denominator + other.denominator,
        )
    }
}

/// `(Σ 2·hit_N(u), Σ (|I_new(u)| + N))` over `(hit_N, |I_new|)` pairs.
pub fn f1_components(users: &[(usize, usize)], n: usize) -> Ratio {
    users
        .iter()
        .fold(Ratio::default(), |acc, &(hits, relevant)| {
            acc.add(Ratio::new(2.0 * hits as f64, (relevant + n) as f64))
        })
}

/// `(#users with a hit, #users)`.
pub fn hit_ratio_components(hits: &[usize]) -> Ratio {
    Ratio::new(
        hits.iter().filter(|&&h| h > 0).count() as f64,
        hits.len() as f64,
    )
}

/// Average precision of one list; zero when nothing was hit.
pub fn average_precision(h: &HitFlags) -> f64 {
    let hits = h.hits();
    if hits == 0 {
        return 0.0;
    }
    let sum: f64 = h
        .flags
        .iter()
        .zip(&h.prefix)
        .enumerate()
        .filter(|(_, (&flag, _))| flag)
        .map(|(k, (_, &hit_k))| hit_k as f64 / (k + 1) as f64)
        .sum();
    sum / hits as f64
}

/// `(Σ AP_N(u), #users)`.
pub fn map_components(users: &[HitFlags]) -> Ratio {
    Ratio::new(
        users.iter().map(average_precision).sum(),
        users.len() as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComponents {
    /// Index `k` of the last training window; the test window is `k + 1`.
    pub window: usize,
    pub users: usize,
    pub f1: Ratio,
    pub hr: Ratio,
    pub map: Ratio,
    pub skipped: bool,
}

impl MetricComponents {
    pub fn skipped(window: usize) -> Self {
        Self {
            window,
            users: 0,
            f1: Ratio::default(),
            hr: Ratio::default(),
            map: Ratio::default(),
            skipped: true,
        }
    }

    pub fn get(&self, metric: Metric) -> Ratio {
        match metric {
            Metric::F1 => self.f1,
            Metric::HitRatio => self.hr,
            Metric::Map => self.map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub hr: f64,
    pub map: f64,
}

impl Metrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F1 => self.f1,
            Metric::HitRatio => self.hr,
            Metric::Map => self.map,
        }
    }
}

pub fn time_average(components: &[MetricComponents]) -> Result<Metrics> {
    let total = |m: Metric| {
        components
            .iter()
            .fold(Ratio::default(), |acc, c| acc.add(c.get(m)))
            .value()
            .ok_or(Error::NothingEvaluated)
    };
    Ok(Metrics {
        f1: total(Metric::F1)?,
        hr: total(Metric::HitRatio)?,
        map: total(Metric::Map)?,
    })
}

/// Relevant (new) items per evaluated user.
pub type GroundTruth = BTreeMap<String, BTreeSet<String>>;

/// One train/test step of the protocol.
#[derive(Debug, Clone)]
pub struct Fold {
    /// 1-based index of the last training window.
    pub k: usize,
    pub training: LinkStream,
    pub test: LinkStream,
    pub test_window: Window,
    pub ground_truth: GroundTruth,
    /// Recommendation time: the last second of the training period.
    pub t: Timestamp,
}

/// Users present in training that pick at least one item in `test` they
/// never picked in training, with those items.
pub fn ground_truth(training: &LinkStream, test: &LinkStream) -> GroundTruth {
    let seen = training.user_items();
    test.user_items()
        .into_iter()
        .filter_map(|(user, items)| {
            let known = seen.get(user)?;
            let fresh: BTreeSet<String> = items
                .into_iter()
                .filter(|i| !known.contains(i))
                .map(str::to_string)
                .collect();
            (!fresh.is_empty()).then(|| (user.to_string(), fresh))
        })
        .collect()
}

pub fn folds(stream: &LinkStream, n_windows: usize) -> Result<Vec<Fold>> {
    let windows = split_windows(stream, n_windows)?;
    let start = stream.time_span().start;
    let mut out = Vec::with_capacity(n_windows - 1);
    let mut events = Vec::new();
    for k in 1..n_windows {
        let (_, last_train) = &windows[k - 1];
        events.extend(last_train.events().iter().cloned());
        let t = last_train.time_span().end;
        let training = LinkStream::with_span(events.clone(), TimeSpan { start, end: t })?;
        let (test_window, test) = windows[k].clone();
        let ground_truth = ground_truth(&training, &test);
        out.push(Fold {
            k,
            training,
            test,
            test_window,
            ground_truth,
            t,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub n_windows: usize,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { n_windows: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub flavor: Flavor,
    pub params: ParamSetting,
    pub n_windows: usize,
    /// Evaluated users must appear in the training windows.
    pub require_training_user: bool,
    pub windows: Vec<MetricComponents>,
    pub time_averaged: Option<Metrics>,
    /// PageRank runs that hit the iteration cap.
    pub unconverged: usize,
    pub status: String,
}

impl EvaluationReport {
    pub fn metrics(&self) -> Result<Metrics> {
        self.time_averaged.ok_or(Error::NothingEvaluated)
    }

    /// Writes one `window,metric,numerator,denominator,value,users,skipped`
    /// row per window and metric, then one `TA` row per metric.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "window",
            "metric",
            "numerator",
            "denominator",
            "value",
            "users",
            "skipped",
        ])?;
        let fmt_value = |r: Ratio| r.value().map(|v| v.to_string()).unwrap_or_default();
        for c in &self.windows {
            for m in Metric::ALL {
                let r = c.get(m);
                out.write_record([
                    c.window.to_string(),
                    m.to_string(),
                    r.numerator.to_string(),
                    r.denominator.to_string(),
                    fmt_value(r),
                    c.users.to_string(),
                    c.skipped.to_string(),
                ])?;
            }
        }
        for m in Metric::ALL {
            let total = self
                .windows
                .iter()
                .fold(Ratio::default(), |acc, c| acc.add(c.get(m)));
            let users: usize = self.windows.iter().map(|c| c.users).sum();
            out.write_record([
                "TA".to_string(),
                m.to_string(),
                total.numerator.to_string(),
                total.denominator.to_string(),
                fmt_value(total),
                users.to_string(),
                (total.denominator == 0.0).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct UserResult {
    hits: HitFlags,
    relevant: usize,
    converged: bool,
}

fn evaluate_fold(
    fold: &Fold,
    flavor: Flavor,
    params: &ParamSetting,
) -> Result<(MetricComponents, usize)> {
    if fold.ground_truth.is_empty() {
        return Ok((MetricComponents::skipped(fold.k), 0));
    }
    let graph = params.build_graph(&fold.training, flavor)?;
    let rec = Recommender::new(&graph);
    let seen = fold.training.user_items();
    let users: Vec<(&String, &BTreeSet<String>)> = fold.ground_truth.iter().collect();
    let results: Vec<UserResult> = users
        .par_iter()
        .map(|&(user, relevant)| {
            let exclude = seen.get(user.as_str()).cloned().unwrap_or_default();
            let pr = rec.scores(user, fold.t, params)?;
            let scores = crate::ranker::item_scores(&graph, &pr);
            let list = crate::ranker::top_n(&scores, &exclude, params.n);
            let relevant: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
            Ok(UserResult {
                hits: hits_at_n(&list, &relevant),
                relevant: relevant.len(),
                converged: pr.converged,
            })
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = results
        .iter()
        .map(|r| (r.hits.hits(), r.relevant))
        .collect();
    let hit_counts: Vec<usize> = pairs.iter().map(|&(h, _)| h).collect();
    let flags: Vec<HitFlags> = results.iter().map(|r| r.hits.clone()).collect();
    let unconverged = results.iter().filter(|r| !r.converged).count();
    Ok((
        MetricComponents {
            window: fold.k,
            users: results.len(),
            f1: f1_components(&pairs, params.n),
            hr: hit_ratio_components(&hit_counts),
            map: map_components(&flags),
            skipped: false,
        },
        unconverged,
    ))
}

/// Runs the sliding-window protocol for one graph flavor and setting.
///
/// A report whose every window was skipped carries no time-averaged metrics
/// and the status `"no evaluable users"`.
pub fn run_protocol(
    stream: &LinkStream,
    flavor: Flavor,
    params: &ParamSetting,
    opts: &ProtocolOptions,
) -> Result<EvaluationReport> {
    params.validate(flavor)?;
    let folds = folds(stream, opts.n_windows)?;
    let mut windows = Vec::with_capacity(folds.len());
    let mut unconverged = 0;
    for fold in &folds {
        let (c, u) = evaluate_fold(fold, flavor, params)?;
        windows.push(c);
        unconverged += u;
    }
    let time_averaged = time_average(&windows).ok();
    let status = if time_averaged.is_some() {
        "ok"
    } else {
        "no evaluable users"
    };
    Ok(EvaluationReport {
        flavor,
        params: params.clone(),
        n_windows: opts.n_windows,
        require_training_user: true,
        windows,
        time_averaged,
        unconverged,
        status: status.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkstream::Event;
    use crate::sample::guiding_stream;

    fn list(items: &[&str]) -> RecommendationList {
        RecommendationList(items.iter().map(|i| (i.to_string(), 0.0)).collect())
    }

    #[test]
    fn hit_flags() {
        let h = hits_at_n(&list(&["a", "b", "c"]), &BTreeSet::from(["b"]));
        assert_eq!(h.flags, [false, true, false]);
        assert_eq!(h.hits(), 1);
        let h = hits_at_n(&list(&["a", "b"]), &BTreeSet::from(["z"]));
        assert_eq!(h.flags, [false, false]);
        let h = hits_at_n(&list(&["a", "b"]), &BTreeSet::from(["a", "b"]));
        assert_eq!(h.prefix, [1, 2]);
        assert_eq!(hits_at_n(&list(&[]), &BTreeSet::from(["a"])).hits(), 0);
    }

    #[test]
    fn f1_examples() {
        let r = f1_components(&[(2, 3)], 5);
        assert_eq!((r.numerator, r.denominator), (4.0, 8.0));
        assert_eq!(r.value(), Some(0.5));
        assert_eq!(f1_components(&[(0, 3), (0, 1)], 5).value(), Some(0.0));
        let r = f1_components(&[(1, 1), (0, 2)], 5);
        assert_eq!((r.numerator, r.denominator), (2.0, 13.0));
        let empty = f1_components(&[], 5);
        assert_eq!((empty.numerator, empty.denominator), (0.0, 0.0));
        assert_eq!(empty.value(), None);
    }

    #[test]
    fn hit_ratio_examples() {
        let r = hit_ratio_components(&[2, 0, 1]);
        assert_eq!((r.numerator, r.denominator), (2.0, 3.0));
        assert_eq!(hit_ratio_components(&[1, 3]).value(), Some(1.0));
        assert_eq!(hit_ratio_components(&[0, 0]).value(), Some(0.0));
    }

    #[test]
    fn average_precision_examples() {
        let h = hits_at_n(&list(&["a", "b", "c"]), &BTreeSet::from(["a", "c"]));
        assert!((average_precision(&h) - 5.0 / 6.0).abs() < 1e-12);
        let h = hits_at_n(&list(&["a", "b", "c"]), &BTreeSet::from(["a"]));
        assert_eq!(average_precision(&h), 1.0);
        let h = hits_at_n(&list(&["a", "b", "c"]), &BTreeSet::new());
        assert_eq!(average_precision(&h), 0.0);
        let r = map_components(&[h]);
        assert_eq!((r.numerator, r.denominator), (0.0, 1.0));
    }

    fn comp(window: usize, num: f64, den: f64) -> MetricComponents {
        let r = Ratio::new(num, den);
        MetricComponents {
            window,
            users: den as usize,
            f1: r,
            hr: r,
            map: r,
            skipped: false,
        }
    }

    #[test]
    fn time_average_examples() {
        let ta = time_average(&[comp(1, 1.0, 4.0), comp(2, 2.0, 4.0)]).unwrap();
        assert_eq!(ta.f1, 3.0 / 8.0);
        assert_eq!(time_average(&[comp(1, 1.0, 4.0)]).unwrap().hr, 0.25);
        let with_skip = time_average(&[
            comp(1, 1.0, 4.0),
            MetricComponents::skipped(2),
            comp(3, 2.0, 4.0),
        ])
        .unwrap();
        assert_eq!(with_skip, ta);
        assert!(matches!(
            time_average(&[MetricComponents::skipped(1)]),
            Err(Error::NothingEvaluated)
        ));
    }

    #[test]
    fn ground_truth_new_items_only() {
        let train = LinkStream::from_events(vec![Event::new(1, "a", "x"), Event::new(1, "b", "x")])
            .unwrap();
        let test = LinkStream::from_events(vec![
            Event::new(5, "a", "x"),
            Event::new(5, "b", "y"),
            Event::new(6, "c", "y"),
        ])
        .unwrap();
        let gt = ground_truth(&train, &test);
        assert_eq!(gt.len(), 1);
        assert_eq!(gt["b"], BTreeSet::from(["y".to_string()]));
    }

    #[test]
    fn guiding_example_two_windows() {
        // first half t <= 3, second half t >= 4
        let f = folds(&guiding_stream(), 2).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].t, 3);
        assert_eq!(f[0].training.len(), 5);
        // u1 picks i3 (new) and i2 (seen); u2 picks only i4 again
        assert_eq!(f[0].ground_truth.len(), 1);
        assert_eq!(f[0].ground_truth["u1"], BTreeSet::from(["i3".to_string()]));

        let params = ParamSetting::bip(0.5, 1);
        let report = run_protocol(
            &guiding_stream(),
            Flavor::Bip,
            &params,
            &ProtocolOptions { n_windows: 2 },
        )
        .unwrap();
        // u1 has seen i1, i2; i3 and i4 are unreachable from u1, so the id
        // tie-break ranks i3 first.
        let ta = report.metrics().unwrap();
        assert_eq!(ta.hr, 1.0);
        assert_eq!(ta.map, 1.0);
        assert_eq!(ta.f1, 2.0 / 2.0);
    }

    #[test]
    fn stream_confined_to_first_window() {
        let s = LinkStream::with_span(
            vec![Event::new(0, "a", "x"), Event::new(1, "b", "y")],
            TimeSpan { start: 0, end: 800 },
        )
        .unwrap();
        let report = run_protocol(
            &s,
            Flavor::Lsg,
            &ParamSetting::lsg(0.5, 0.5, 10),
            &ProtocolOptions::default(),
        )
        .unwrap();
        assert!(report.windows.iter().all(|w| w.skipped));
        assert_eq!(report.windows.len(), 7);
        assert_eq!(report.status, "no evaluable users");
        assert!(matches!(report.metrics(), Err(Error::NothingEvaluated)));
    }

    #[test]
    fn csv_rows() {
        let report = EvaluationReport {
            flavor: Flavor::Bip,
            params: ParamSetting::bip(0.5, 2),
            n_windows: 3,
            require_training_user: true,
            windows: vec![comp(1, 1.0, 4.0), MetricComponents::skipped(2)],
            time_averaged: None,
            unconverged: 0,
            status: "ok".into(),
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 6 + 3);
        assert_eq!(lines[1], "1,F1,1,4,0.25,4,false");
        assert_eq!(lines[4], "2,F1,0,0,,0,true");
        assert_eq!(lines[7], "TA,F1,1,4,0.25,4,false");
    }
}
