//! Top-N recommendation on temporal user-item link streams.
//!
//! A [`LinkStream`] of `(t, user, item)` interactions is turned into one of
//! three recommender graphs ([`build_bip`], [`build_stg`], [`build_lsg`]),
//! items are scored with a personalized random walk with restart
//! ([`ranker`]), and the whole pipeline is evaluated with a sliding
//! time-window protocol ([`evaluation`]) and a seeded random hyperparameter
//! search ([`tuning`]).

pub mod error;
pub mod evaluation;
pub mod graph;
pub mod linkstream;
pub mod ranker;
pub mod sample;
pub mod tuning;

pub use error::{Error, Result};
pub use evaluation::{run_protocol, EvaluationReport, Metric, Metrics, ProtocolOptions};
pub use graph::{build_bip, build_lsg, build_stg, Flavor, NodeId, RecGraph};
pub use linkstream::{
    filter_min_activity, filter_positive, parse_link_stream, split_windows, Event, FilterConfig,
    Format, LinkStream, ParseOptions, TimeSpan, Timestamp,
};
pub use ranker::{pagerank, personalization, recommend, top_n, transition_matrix};
pub use tuning::{sample_settings, search, ParamGrid, ParamSetting, SearchConfig};
