//! Bipartite link streams: timestamped user-item interactions observed over
//! a closed interval `[alpha, omega]`.
//!
//! Everything here is a pure transformation. Parsing, the positive-rating
//! filter, the activity-threshold filter and the equal-length window split
//! all return fresh streams and leave their input untouched.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: Timestamp,
    pub user: String,
    pub item: String,
    pub rating: Option<f64>,
}

impl Event {
    pub fn new(t: Timestamp, user: impl Into<String>, item: impl Into<String>) -> Self {
        Self {
            t,
            user: user.into(),
            item: item.into(),
            rating: None,
        }
    }

    pub fn rated(
        t: Timestamp,
        user: impl Into<String>,
        item: impl Into<String>,
        rating: f64,
    ) -> Self {
        Self {
            rating: Some(rating),
            ..Self::new(t, user, item)
        }
    }

    fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t
            .cmp(&other.t)
            .then_with(|| self.user.cmp(&other.user))
            .then_with(|| self.item.cmp(&other.item))
            .then_with(|| match (self.rating, other.rating) {
                (None, None) => std::cmp::Ordering::Equal,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (Some(_), None) => std::cmp::Ordering::Greater,
                (Some(a), Some(b)) => a.total_cmp(&b),
            })
    }
}

/// Closed observation interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeSpan {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidParameter(format!(
                "time span end {end} precedes start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Events sorted by `(t, user, item)` together with the observation interval
/// and the user and item sets they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStream {
    events: Vec<Event>,
    span: TimeSpan,
    users: BTreeSet<String>,
    items: BTreeSet<String>,
}

impl LinkStream {
    /// Builds a stream whose span is `[min t, max t]`.
    pub fn from_events(events: Vec<Event>) -> Result<Self> {
        let start = events.iter().map(|e| e.t).min().ok_or(Error::EmptyStream)?;
        let end = events.iter().map(|e| e.t).max().ok_or(Error::EmptyStream)?;
        Self::with_span(events, TimeSpan { start, end })
    }

    /// Builds a stream over an explicit span. An empty event list is legal.
    pub fn with_span(mut events: Vec<Event>, span: TimeSpan) -> Result<Self> {
        for e in &events {
            if e.user.is_empty() || e.item.is_empty() {
                return Err(Error::InvalidEvent(format!(
                    "empty identifier in event at t={}",
                    e.t
                )));
            }
            if !span.contains(e.t) {
                return Err(Error::InvalidEvent(format!(
                    "t={} outside observation interval [{}, {}]",
                    e.t, span.start, span.end
                )));
            }
            if let Some(r) = e.rating {
                if !(0.0..=5.0).contains(&r) {
                    return Err(Error::InvalidEvent(format!(
                        "rating {r} outside [0, 5] at t={}",
                        e.t
                    )));
                }
            }
        }
        events.sort_by(Event::sort_key_cmp);
        events.dedup();
        Ok(Self::from_sorted(events, span))
    }

    // Callers guarantee `events` is already sorted, deduplicated and inside `span`.
    fn from_sorted(events: Vec<Event>, span: TimeSpan) -> Self {
        let users = events.iter().map(|e| e.user.clone()).collect();
        let items = events.iter().map(|e| e.item.clone()).collect();
        Self {
            events,
            span,
            users,
            items,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn time_span(&self) -> TimeSpan {
        self.span
    }

    pub fn users(&self) -> &BTreeSet<String> {
        &self.users
    }

    pub fn items(&self) -> &BTreeSet<String> {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Keeps the events matching `keep`; the span is unchanged.
    pub fn retain(&self, mut keep: impl FnMut(&Event) -> bool) -> Self {
        let events = self.events.iter().filter(|e| keep(e)).cloned().collect();
        Self::from_sorted(events, self.span)
    }

    /// Same events, different observation interval.
    pub fn respan(&self, span: TimeSpan) -> Result<Self> {
        if let (Some(first), Some(last)) = (self.events.first(), self.events.last()) {
            if !span.contains(first.t) || !span.contains(last.t) {
                return Err(Error::InvalidParameter(format!(
                    "span [{}, {}] does not cover events in [{}, {}]",
                    span.start, span.end, first.t, last.t
                )));
            }
        }
        Ok(Self {
            span,
            ..self.clone()
        })
    }

    /// Items each user interacted with.
    pub fn user_items(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &self.events {
            out.entry(e.user.as_str())
                .or_default()
                .insert(e.item.as_str());
        }
        out
    }

    pub fn stats(&self) -> StreamStats {
        let distinct_pairs = self
            .events
            .iter()
            .map(|e| (e.user.as_str(), e.item.as_str()))
            .collect::<BTreeSet<_>>()
            .len();
        let cells = self.users.len() as f64 * self.items.len() as f64;
        StreamStats {
            events: self.events.len(),
            users: self.users.len(),
            items: self.items.len(),
            distinct_pairs,
            start: self.span.start,
            end: self.span.end,
            sparsity: if cells > 0.0 {
                1.0 - distinct_pairs as f64 / cells
            } else {
                1.0
            },
        }
    }
}

/// Summary counts in the shape of a dataset-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamStats {
    pub events: usize,
    pub users: usize,
    pub items: usize,
    pub distinct_pairs: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub sparsity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Csv,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Tsv => b'\t',
            Format::Csv => b',',
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(Format::Tsv),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

/// A column addressed by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidParameter("empty column reference".into()));
        }
        Ok(s.parse::<usize>()
            .map(Column::Index)
            .unwrap_or_else(|_| Column::Name(s.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub user: Column,
    pub item: Column,
    pub timestamp: Column,
    /// Read when present in a record; records without it carry no rating.
    pub rating: Option<Column>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            user: Column::Index(0),
            item: Column::Index(1),
            timestamp: Column::Index(2),
            rating: Some(Column::Index(3)),
        }
    }
}

impl ColumnMap {
    fn uses_names(&self) -> bool {
        [&self.user, &self.item, &self.timestamp]
            .into_iter()
            .chain(self.rating.as_ref())
            .any(|c| matches!(c, Column::Name(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Treat the first record as a header when its timestamp field does not parse.
    #[default]
    Auto,
    Present,
    Absent,
}

impl FromStr for HeaderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(HeaderMode::Auto),
            "present" | "yes" | "true" => Ok(HeaderMode::Present),
            "absent" | "no" | "false" => Ok(HeaderMode::Absent),
            other => Err(Error::InvalidParameter(format!(
                "unknown header mode {other:?} (expected auto, present or absent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub format: Format,
    pub columns: ColumnMap,
    pub header: HeaderMode,
    /// Overrides the `[min t, max t]` observation interval.
    pub time_span: Option<TimeSpan>,
}

impl ParseOptions {
    pub fn new(format: Format) -> Self {
        Self {
            format,
            columns: ColumnMap::default(),
            header: HeaderMode::Auto,
            time_span: None,
        }
    }
}

/// Parses integer epoch seconds, an ISO-8601 date (midnight UTC) or an
/// ISO-8601 / RFC 3339 date-time.
pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    let s = raw.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Some(t);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc().timestamp());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

struct ResolvedColumns {
    user: usize,
    item: usize,
    timestamp: usize,
    rating: Option<usize>,
}

fn resolve(col: &Column, header: Option<&csv::StringRecord>, line: u64) -> Result<usize> {
    match col {
        Column::Index(i) => Ok(*i),
        Column::Name(name) => header
            .and_then(|h| h.iter().position(|f| f.trim() == name))
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("column {name:?} not found in header"),
            }),
    }
}

/// Reads a delimited interaction file into a [`LinkStream`].
pub fn parse_link_stream<R: Read>(source: R, opts: &ParseOptions) -> Result<LinkStream> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.format.delimiter())
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .quoting(opts.format == Format::Csv)
        .from_reader(source);

    let records = reader.records();
    let mut events = Vec::new();
    let mut cols: Option<ResolvedColumns> = None;

    let header_mode = match opts.header {
        HeaderMode::Auto if opts.columns.uses_names() => HeaderMode::Present,
        m => m,
    };

    let mut first = true;
    for rec in records {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }

        if first {
            first = false;
            let treat_as_header = match header_mode {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => {
                    let ts = resolve(&opts.columns.timestamp, None, line)?;
                    rec.get(ts).and_then(parse_timestamp).is_none()
                }
            };
            let header = treat_as_header.then_some(&rec);
            cols = Some(ResolvedColumns {
                user: resolve(&opts.columns.user, header, line)?,
                item: resolve(&opts.columns.item, header, line)?,
                timestamp: resolve(&opts.columns.timestamp, header, line)?,
                rating: match &opts.columns.rating {
                    None => None,
                    // The default positional rating column is optional; a
                    // named one must exist in the header.
                    Some(c @ Column::Name(_)) => Some(resolve(c, header, line)?),
                    Some(Column::Index(i)) => Some(*i),
                },
            });
            if treat_as_header {
                continue;
            }
        }

        let c = cols.as_ref().expect("columns resolved on first record");
        events.push(parse_record(&rec, c, line)?);
    }

    if events.is_empty() {
        return Err(Error::EmptyStream);
    }
    match opts.time_span {
        Some(span) => LinkStream::with_span(events, span),
        None => LinkStream::from_events(events),
    }
}

fn parse_record(rec: &csv::StringRecord, c: &ResolvedColumns, line: u64) -> Result<Event> {
    let field = |idx: usize, what: &str| {
        rec.get(idx)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what} field (column {idx})"),
            })
    };
    let user = field(c.user, "user")?;
    let item = field(c.item, "item")?;
    let raw_t = field(c.timestamp, "timestamp")?;
    let t = parse_timestamp(raw_t).ok_or_else(|| Error::Parse {
        line,
        message: format!("unparseable timestamp {raw_t:?}"),
    })?;
    let rating = match c.rating.and_then(|i| rec.get(i)).map(str::trim) {
        None | Some("") => None,
        Some(raw) => {
            let r: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("unparseable rating {raw:?}"),
            })?;
            if !(0.0..=5.0).contains(&r) {
                return Err(Error::Parse {
                    line,
                    message: format!("rating {r} outside [0, 5]"),
                });
            }
            Some(r)
        }
    };
    Ok(Event {
        t,
        user: user.to_string(),
        item: item.to_string(),
        rating,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sigma_u: usize,
    pub sigma_i: usize,
    pub rating_floor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            sigma_u: 1,
            sigma_i: 1,
            rating_floor: 2.5,
        }
    }
}

/// Keeps an event iff its rating is at least `rating_floor` and at least the
/// mean rating of its user, the mean taken over the unfiltered input.
pub fn filter_positive(stream: &LinkStream, rating_floor: f64) -> Result<LinkStream> {
    let mut totals: HashMap<&str, (f64, usize)> = HashMap::new();
    for e in stream.events() {
        let r = e.rating.ok_or(Error::MissingRating)?;
        let slot = totals.entry(e.user.as_str()).or_insert((0.0, 0));
        slot.0 += r;
        slot.1 += 1;
    }
    Ok(stream.retain(|e| {
        let r = e.rating.expect("checked above");
        let (sum, count) = totals[e.user.as_str()];
        // r >= sum / count, without the division
        r >= rating_floor && r * count as f64 >= sum
    }))
}

/// Drops users with fewer than `sigma_u` events and items with fewer than
/// `sigma_i` events, repeating until both thresholds hold everywhere.
pub fn filter_min_activity(stream: &LinkStream, cfg: &FilterConfig) -> LinkStream {
    let mut current = stream.clone();
    loop {
        let mut per_user: HashMap<&str, usize> = HashMap::new();
        let mut per_item: HashMap<&str, usize> = HashMap::new();
        for e in current.events() {
            *per_user.entry(e.user.as_str()).or_default() += 1;
            *per_item.entry(e.item.as_str()).or_default() += 1;
        }
        let keep = |e: &Event| {
            per_user[e.user.as_str()] >= cfg.sigma_u && per_item[e.item.as_str()] >= cfg.sigma_i
        };
        if current.events().iter().all(keep) {
            return current;
        }
        let next = current.retain(keep);
        current = next;
    }
}

/// One of `n` equal-length evaluation windows. Spans are half-open
/// `[start, end)` except the last, which is closed at the stream's end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// 1-based.
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub closed: bool,
}

impl Window {
    pub fn contains(&self, t: Timestamp) -> bool {
        let t = t as f64;
        self.start <= t && (t < self.end || (self.closed && t <= self.end))
    }
}

/// Equal partition of a span into `n` windows, with exact integer placement
/// of timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSplit {
    span: TimeSpan,
    n: usize,
}

impl WindowSplit {
    pub fn new(span: TimeSpan, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 windows for a train/test split, got {n}"
            )));
        }
        if span.duration() <= 0 {
            return Err(Error::InvalidParameter(
                "cannot split a zero-length time span".into(),
            ));
        }
        Ok(Self { span, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Zero-based index of the window holding `t`.
    pub fn index_of(&self, t: Timestamp) -> usize {
        let offset = i128::from(t - self.span.start);
        let k = offset * self.n as i128 / i128::from(self.span.duration());
        (k.max(0) as usize).min(self.n - 1)
    }

    /// Window `index` (1-based).
    pub fn window(&self, index: usize) -> Window {
        let d = self.span.duration() as f64 / self.n as f64;
        let a = self.span.start as f64;
        Window {
            index,
            start: a + (index - 1) as f64 * d,
            end: if index == self.n {
                self.span.end as f64
            } else {
                a + index as f64 * d
            },
            closed: index == self.n,
        }
    }

    /// Last whole second inside window `index` (1-based).
    pub fn last_second(&self, index: usize) -> Timestamp {
        if index >= self.n {
            return self.span.end;
        }
        // smallest t with index_of(t) >= index, minus one
        let dur = i128::from(self.span.duration());
        let n = self.n as i128;
        let k = index as i128;
        let first_next = (k * dur + n - 1) / n;
        self.span.start + first_next as i64 - 1
    }

    fn first_second(&self, index: usize) -> Timestamp {
        if index <= 1 {
            return self.span.start;
        }
        self.last_second(index - 1) + 1
    }
}

/// Splits `stream` into `n` equal-duration windows over its span.
pub fn split_windows(stream: &LinkStream, n: usize) -> Result<Vec<(Window, LinkStream)>> {
    let split = WindowSplit::new(stream.time_span(), n)?;
    let mut buckets: Vec<Vec<Event>> = vec![Vec::new(); n];
    for e in stream.events() {
        buckets[split.index_of(e.t)].push(e.clone());
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(k, events)| {
            let index = k + 1;
            let start = split.first_second(index);
            let end = split.last_second(index).max(start);
            let sub = LinkStream::from_sorted(events, TimeSpan { start, end });
            (split.window(index), sub)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::guiding_stream;

    fn tsv(s: &str) -> Result<LinkStream> {
        parse_link_stream(s.as_bytes(), &ParseOptions::new(Format::Tsv))
    }

    #[test]
    fn parses_three_lines() {
        let s = tsv("u1\ti1\t10\nu2\ti2\t20\nu1\ti2\t30\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.users().len(), 2);
        assert_eq!(s.items().len(), 2);
        assert_eq!(s.time_span(), TimeSpan { start: 10, end: 30 });
    }

    #[test]
    fn bad_timestamp_names_line() {
        let err = tsv("u1\ti1\t10\nu2\ti2\tsoon\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_records_are_sorted() {
        let s = tsv("b\tx\t30\na\ty\t10\na\tx\t10\n").unwrap();
        let ts: Vec<_> = s
            .events()
            .iter()
            .map(|e| (e.t, e.user.as_str(), e.item.as_str()))
            .collect();
        assert_eq!(ts, vec![(10, "a", "x"), (10, "a", "y"), (30, "b", "x")]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(tsv(""), Err(Error::EmptyStream)));
        assert!(matches!(
            tsv("user\titem\ttimestamp\n"),
            Err(Error::EmptyStream)
        ));
    }

    #[test]
    fn header_and_named_columns() {
        let mut opts = ParseOptions::new(Format::Csv);
        opts.columns = ColumnMap {
            user: Column::Name("uid".into()),
            item: Column::Name("iid".into()),
            timestamp: Column::Name("when".into()),
            rating: Some(Column::Name("stars".into())),
        };
        let s = parse_link_stream(
            "when,stars,iid,uid\n2010-01-02,4,book,ann\n2010-01-01,2,pen,bob\n".as_bytes(),
            &opts,
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.events()[0].user, "bob");
        assert_eq!(s.events()[0].t, 1_262_304_000);
        assert_eq!(s.events()[1].rating, Some(4.0));
    }

    #[test]
    fn auto_header_detection() {
        let s = tsv("user\titem\ttimestamp\trating\nu\ti\t5\t3\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.events()[0].rating, Some(3.0));
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("86400"), Some(86_400));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400));
        assert_eq!(parse_timestamp("1970-01-02T00:00:10Z"), Some(86_410));
        assert_eq!(parse_timestamp("1970-01-02 00:00:10"), Some(86_410));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn exact_duplicates_collapse() {
        let s = tsv("u\ti\t1\nu\ti\t1\nu\ti\t2\n").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn span_override_must_cover_events() {
        let mut opts = ParseOptions::new(Format::Tsv);
        opts.time_span = Some(TimeSpan { start: 0, end: 5 });
        assert!(parse_link_stream("u\ti\t9\n".as_bytes(), &opts).is_err());
        opts.time_span = Some(TimeSpan { start: 0, end: 50 });
        let s = parse_link_stream("u\ti\t9\n".as_bytes(), &opts).unwrap();
        assert_eq!(s.time_span(), TimeSpan { start: 0, end: 50 });
    }

    #[test]
    fn positive_filter_uses_floor_and_user_mean() {
        let s = LinkStream::from_events(vec![
            Event::rated(1, "a", "x", 5.0),
            Event::rated(2, "a", "y", 1.0),
            Event::rated(3, "a", "z", 3.0),
        ])
        .unwrap();
        let kept = filter_positive(&s, 2.5).unwrap();
        let items: Vec<_> = kept.events().iter().map(|e| e.item.as_str()).collect();
        assert_eq!(items, vec!["x", "z"]);
    }

    #[test]
    fn positive_filter_all_fives_unchanged() {
        let s = LinkStream::from_events(vec![
            Event::rated(1, "a", "x", 5.0),
            Event::rated(2, "b", "y", 5.0),
        ])
        .unwrap();
        assert_eq!(filter_positive(&s, 2.5).unwrap(), s);
    }

    #[test]
    fn positive_filter_drops_lonely_low_rating() {
        let s = LinkStream::from_events(vec![
            Event::rated(1, "a", "x", 2.0),
            Event::rated(2, "b", "y", 4.0),
        ])
        .unwrap();
        let kept = filter_positive(&s, 2.5).unwrap();
        assert!(!kept.users().contains("a"));
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn positive_filter_requires_ratings() {
        let s = LinkStream::from_events(vec![Event::new(1, "a", "x")]).unwrap();
        assert!(matches!(
            filter_positive(&s, 2.5),
            Err(Error::MissingRating)
        ));
    }

    #[test]
    fn unit_thresholds_keep_everything() {
        let s = guiding_stream();
        assert_eq!(filter_min_activity(&s, &FilterConfig::default()), s);
    }

    #[test]
    fn guiding_example_survives_sigma_u_three() {
        let s = guiding_stream();
        let cfg = FilterConfig {
            sigma_u: 3,
            sigma_i: 1,
            ..Default::default()
        };
        assert_eq!(filter_min_activity(&s, &cfg), s);
    }

    #[test]
    fn activity_filter_cascades() {
        // B has one event on the shared item; once it goes, "shared" has one
        // event left and falls under sigma_i = 2, which then starves A.
        let s = LinkStream::from_events(vec![
            Event::new(1, "A", "shared"),
            Event::new(2, "A", "solo"),
            Event::new(3, "B", "shared"),
        ])
        .unwrap();
        let cfg = FilterConfig {
            sigma_u: 2,
            sigma_i: 2,
            ..Default::default()
        };
        let out = filter_min_activity(&s, &cfg);
        assert!(out.is_empty());
        assert_eq!(out.time_span(), s.time_span());
    }

    #[test]
    fn split_needs_two_windows() {
        let s = guiding_stream();
        assert!(split_windows(&s, 1).is_err());
        let flat = LinkStream::from_events(vec![Event::new(4, "u", "i")]).unwrap();
        assert!(split_windows(&flat, 2).is_err());
    }

    #[test]
    fn eight_equal_windows() {
        let s = LinkStream::with_span(vec![Event::new(0, "u", "i")], TimeSpan::new(0, 80).unwrap())
            .unwrap();
        let w = split_windows(&s, 8).unwrap();
        let spans: Vec<_> = w.iter().map(|(w, _)| (w.start, w.end, w.closed)).collect();
        assert_eq!(spans[0], (0.0, 10.0, false));
        assert_eq!(spans[3], (30.0, 40.0, false));
        assert_eq!(spans[7], (70.0, 80.0, true));
    }

    #[test]
    fn boundary_event_goes_right() {
        let s = LinkStream::with_span(
            vec![Event::new(10, "u", "i"), Event::new(20, "u", "j")],
            TimeSpan::new(0, 20).unwrap(),
        )
        .unwrap();
        let w = split_windows(&s, 2).unwrap();
        assert!(w[0].1.is_empty());
        assert_eq!(w[1].1.len(), 2);
        assert!(w[1].0.contains(20));
    }

    #[test]
    fn guiding_example_halves() {
        let s = guiding_stream();
        let w = split_windows(&s, 2).unwrap();
        // span [0, 7], boundary at 3.5
        let first: Vec<_> = w[0].1.events().iter().map(|e| e.t).collect();
        let second: Vec<_> = w[1].1.events().iter().map(|e| e.t).collect();
        assert_eq!(first, vec![1, 1, 2, 2, 3]);
        assert_eq!(second, vec![4, 5, 6]);
        assert_eq!(w[0].1.time_span(), TimeSpan { start: 0, end: 3 });
        assert_eq!(w[1].1.time_span(), TimeSpan { start: 4, end: 7 });
    }

    #[test]
    fn fractional_window_seconds() {
        let split = WindowSplit::new(TimeSpan::new(0, 10).unwrap(), 3).unwrap();
        // boundaries at 3.33.. and 6.66..
        assert_eq!(split.index_of(3), 0);
        assert_eq!(split.index_of(4), 1);
        assert_eq!(split.index_of(6), 1);
        assert_eq!(split.index_of(7), 2);
        assert_eq!(split.last_second(1), 3);
        assert_eq!(split.last_second(2), 6);
        assert_eq!(split.last_second(3), 10);
        for t in 0..=10 {
            let k = split.index_of(t);
            assert!(split.window(k + 1).contains(t), "t={t}");
        }
    }
}
