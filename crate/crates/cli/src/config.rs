//! Run configuration: command-line flags layered over a flat `key = value`
//! file, resolved into one serializable [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use lsgrec::evaluation::Metric;
use lsgrec::linkstream::{Column, ColumnMap, HeaderMode};
use lsgrec::tuning::SECONDS_PER_DAY;
use lsgrec::{
    FilterConfig, Flavor, Format, ParamGrid, ParamSetting, ParseOptions, ProtocolOptions,
};
use serde::Serialize;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "LSGREC_WORKERS";

/// Bad flags, config values or paths. Reported before any computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Every key a config file may set. Keys meant for another subcommand are
/// accepted and ignored, so one file can drive `evaluate` and `search`.
const KNOWN_KEYS: &[&str] = &[
    "input",
    "format",
    "header",
    "user-col",
    "item-col",
    "time-col",
    "rating-col",
    "sigma-u",
    "sigma-i",
    "rating-floor",
    "positive-filter",
    "windows",
    "graph",
    "n",
    "alpha",
    "beta",
    "delta",
    "eta-s",
    "count",
    "seed",
    "objective",
    "out-dir",
    "workers",
];

/// Parsed config file. Relative paths in it resolve against its directory.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// `key = value` per line; `#` starts a comment; underscores in keys
    /// read as dashes.
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("line {}: expected `key = value`", no + 1));
            };
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return usage(format!("line {}: unknown key {key:?}", no + 1));
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return usage(format!("line {}: duplicate key {key:?}", no + 1));
            }
        }
        Ok(Self {
            values,
            base: PathBuf::new(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|p| self.base.join(p))
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| UsageError(format!("invalid value {raw:?} for {key}: {e}")))
}

/// Flag value if given, else the file's value, else `None`.
fn layered<T: FromStr>(
    flag: Option<T>,
    file: &ConfigFile,
    key: &str,
) -> Result<Option<T>, UsageError>
where
    T::Err: fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.raw(key).map(|raw| parse_value(key, raw)).transpose(),
    }
}

fn layered_list<T: FromStr + Clone>(
    flag: &[T],
    file: &ConfigFile,
    key: &str,
) -> Result<Vec<T>, UsageError>
where
    T::Err: fmt::Display,
{
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    match file.raw(key) {
        None => Ok(Vec::new()),
        Some(raw) => raw.split(',').map(|v| parse_value(key, v)).collect(),
    }
}

/// Where the data comes from and how it is cleaned.
#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Interaction file with `user item timestamp [rating]` records.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// tsv or csv; guessed from the file extension when absent.
    #[arg(long)]
    pub format: Option<Format>,
    /// Header row: auto, present or absent.
    #[arg(long)]
    pub header: Option<HeaderMode>,
    /// User column, by zero-based index or header name.
    #[arg(long)]
    pub user_col: Option<Column>,
    #[arg(long)]
    pub item_col: Option<Column>,
    #[arg(long)]
    pub time_col: Option<Column>,
    /// Rating column, or `none` for unrated data.
    #[arg(long)]
    pub rating_col: Option<String>,
    /// Minimum events per user.
    #[arg(long)]
    pub sigma_u: Option<usize>,
    /// Minimum events per item.
    #[arg(long)]
    pub sigma_i: Option<usize>,
    /// Lowest rating counted as positive.
    #[arg(long)]
    pub rating_floor: Option<f64>,
    /// Keep only positive ratings (at least the floor and the user's mean).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub positive_filter: Option<bool>,
    /// Number of equal time windows.
    #[arg(long)]
    pub windows: Option<usize>,
    /// Threads for per-user and per-setting work [env: LSGREC_WORKERS].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for report files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Graph flavor and its parameters. In `search`, lists replace grid axes.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// bip, stg or lsg.
    #[arg(long)]
    pub graph: Option<Flavor>,
    /// Recommendation list length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Damping factor.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// STG restart mass on the user node.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    /// STG session length in days.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Weight of edges pointing back in time.
    #[arg(long, value_delimiter = ',')]
    pub eta_s: Vec<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SearchArgs {
    /// Settings to sample.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metric that orders the leaderboard: f1, hr or map.
    #[arg(long)]
    pub objective: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataConfig {
    pub input: PathBuf,
    pub parse: ParseOptions,
    pub positive_filter: bool,
    pub filter: FilterConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RunMode {
    Single {
        params: ParamSetting,
    },
    Search {
        grid: ParamGrid,
        count: usize,
        seed: u64,
        n: usize,
        objective: Metric,
    },
}

/// Everything needed to repeat a run exactly, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: DataConfig,
    pub protocol: ProtocolOptions,
    pub flavor: Flavor,
    pub run: RunMode,
    pub workers: usize,
    pub out_dir: PathBuf,
}

pub const DEFAULT_N: usize = 10;
pub const DEFAULT_COUNT: usize = 50;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT_DIR: &str = "lsgrec-out";

fn days_to_secs(days: f64) -> Result<i64, UsageError> {
    if !(days.is_finite() && days > 0.0) {
        return usage(format!(
            "delta must be a positive number of days, got {days}"
        ));
    }
    let secs = (days * SECONDS_PER_DAY as f64).round() as i64;
    if secs == 0 {
        return usage(format!("delta of {days} days rounds to zero seconds"));
    }
    Ok(secs)
}

fn format_for(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Tsv,
    }
}

impl DataArgs {
    pub fn file(&self) -> Result<ConfigFile, UsageError> {
        self.config
            .as_deref()
            .map(ConfigFile::load)
            .unwrap_or_else(|| Ok(ConfigFile::default()))
    }

    pub fn resolve(&self, file: &ConfigFile) -> Result<DataConfig, UsageError> {
        let input = match self.input.clone().or_else(|| file.path("input")) {
            Some(p) => p,
            None => return usage("no input file given (--input)"),
        };
        if !input.is_file() {
            return usage(format!("input file not found: {}", input.display()));
        }
        let format = layered(self.format, file, "format")?.unwrap_or_else(|| format_for(&input));
        let defaults = ColumnMap::default();
        let rating = match layered(self.rating_col.clone(), file, "rating-col")? {
            None => defaults.rating,
            Some(r) if r.eq_ignore_ascii_case("none") => None,
            Some(r) => Some(parse_value("rating-col", &r)?),
        };
        let columns = ColumnMap {
            user: layered(self.user_col.clone(), file, "user-col")?.unwrap_or(defaults.user),
            item: layered(self.item_col.clone(), file, "item-col")?.unwrap_or(defaults.item),
            timestamp: layered(self.time_col.clone(), file, "time-col")?
                .unwrap_or(defaults.timestamp),
            rating,
        };
        let fd = FilterConfig::default();
        let filter = FilterConfig {
            sigma_u: layered(self.sigma_u, file, "sigma-u")?.unwrap_or(fd.sigma_u),
            sigma_i: layered(self.sigma_i, file, "sigma-i")?.unwrap_or(fd.sigma_i),
            rating_floor: layered(self.rating_floor, file, "rating-floor")?
                .unwrap_or(fd.rating_floor),
        };
        let positive_filter =
            layered(self.positive_filter, file, "positive-filter")?.unwrap_or(false);
        if positive_filter && columns.rating.is_none() {
            return usage("--positive-filter needs a rating column");
        }
        Ok(DataConfig {
            input,
            parse: ParseOptions {
                format,
                columns,
                header: layered(self.header, file, "header")?.unwrap_or_default(),
                time_span: None,
            },
            positive_filter,
            filter,
        })
    }

    pub fn protocol(&self, file: &ConfigFile) -> Result<ProtocolOptions, UsageError> {
        let n_windows =
            layered(self.windows, file, "windows")?.unwrap_or(ProtocolOptions::default().n_windows);
        if n_windows < 2 {
            return usage(format!("--windows must be at least 2, got {n_windows}"));
        }
        Ok(ProtocolOptions { n_windows })
    }

    /// Flag, then config file, then the environment, then every core.
    pub fn workers(&self, file: &ConfigFile) -> Result<usize, UsageError> {
        let from_env = match std::env::var(WORKERS_ENV) {
            Ok(raw) if !raw.trim().is_empty() => Some(parse_value(WORKERS_ENV, &raw)?),
            _ => None,
        };
        let workers = layered(self.workers, file, "workers")?
            .or(from_env)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return usage("worker count must be at least 1");
        }
        Ok(workers)
    }

    pub fn out_dir(&self, file: &ConfigFile) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| file.path("out-dir"))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

struct ParamLists {
    flavor: Flavor,
    n: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    delta: Vec<i64>,
    eta_s: Vec<f64>,
}

impl ParamArgs {
    fn lists(&self, file: &ConfigFile) -> Result<ParamLists, UsageError> {
        let Some(flavor) = layered(self.graph, file, "graph")? else {
            return usage("no graph flavor given (--graph bip|stg|lsg)");
        };
        let n = layered(self.n, file, "n")?.unwrap_or(DEFAULT_N);
        if n == 0 {
            return usage("--n must be at least 1");
        }
        let delta = layered_list(&self.delta, file, "delta")?
            .into_iter()
            .map(days_to_secs)
            .collect::<Result<_, _>>()?;
        let lists = ParamLists {
            flavor,
            n,
            alpha: layered_list(&self.alpha, file, "alpha")?,
            beta: layered_list(&self.beta, file, "beta")?,
            delta,
            eta_s: layered_list(&self.eta_s, file, "eta-s")?,
        };
        let unused: Vec<&str> = match flavor {
            Flavor::Bip => vec!["beta", "delta", "eta-s"],
            Flavor::Stg => vec![],
            Flavor::Lsg => vec!["beta", "delta"],
        };
        for key in unused {
            let given = match key {
                "beta" => !lists.beta.is_empty(),
                "delta" => !lists.delta.is_empty(),
                _ => !lists.eta_s.is_empty(),
            };
            if given {
                eprintln!("warning: --{key} has no effect on {flavor} graphs; ignored");
            }
        }
        Ok(lists)
    }

    /// One setting; every parameter the flavor needs must be given once.
    pub fn setting(&self, file: &ConfigFile) -> Result<(Flavor, ParamSetting), UsageError> {
        let l = self.lists(file)?;
        let one = |name: &str, v: &[f64]| -> Result<Option<f64>, UsageError> {
            match v {
                [] => Ok(None),
                [x] => Ok(Some(*x)),
                _ => usage(format!("--{name} takes a single value in evaluate")),
            }
        };
        let require = |name: &str, v: Option<f64>| match v {
            Some(x) => Ok(x),
            None => usage(format!("{} requires --{name}", l.flavor)),
        };
        let alpha = require("alpha", one("alpha", &l.alpha)?)?;
        let setting = match l.flavor {
            Flavor::Bip => ParamSetting::bip(alpha, l.n),
            Flavor::Lsg => {
                ParamSetting::lsg(require("eta-s", one("eta-s", &l.eta_s)?)?, alpha, l.n)
            }
            Flavor::Stg => {
                let delta = match l.delta.as_slice() {
                    [] => return usage("stg requires --delta"),
                    [d] => *d,
                    _ => return usage("--delta takes a single value in evaluate"),
                };
                let beta = require("beta", one("beta", &l.beta)?)?;
                let eta_s = require("eta-s", one("eta-s", &l.eta_s)?)?;
                ParamSetting::stg(delta, beta, eta_s, alpha, l.n)
            }
        };
        setting
            .validate(l.flavor)
            .map_err(|e| UsageError(e.to_string()))?;
        Ok((l.flavor, setting))
    }

    /// The default grid with any given lists swapped in.
    pub fn grid(&self, file: &ConfigFile) -> Result<(Flavor, ParamGrid, usize), UsageError> {
        let l = self.lists(file)?;
        let mut grid = ParamGrid::default();
        if !l.alpha.is_empty() {
            grid.alpha = l.alpha;
        }
        if !l.beta.is_empty() {
            grid.beta = l.beta;
        }
        if !l.delta.is_empty() {
            grid.delta = l.delta;
        }
        if !l.eta_s.is_empty() {
            grid.eta_s = l.eta_s;
        }
        grid.validate(l.flavor)
            .map_err(|e| UsageError(e.to_string()))?;
        Ok((l.flavor, grid, l.n))
    }
}

impl SearchArgs {
    pub fn resolve(&self, file: &ConfigFile) -> Result<(usize, u64, Metric), UsageError> {
        let count = layered(self.count, file, "count")?.unwrap_or(DEFAULT_COUNT);
        if count == 0 {
            return usage("--count must be at least 1");
        }
        Ok((
            count,
            layered(self.seed, file, "seed")?.unwrap_or(DEFAULT_SEED),
            layered(self.objective, file, "objective")?.unwrap_or(Metric::F1),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let f =
            ConfigFile::parse("# ciao\ngraph = lsg\neta_s = 0.1, 0.2 # trailing\n\nalpha=0.15\n")
                .unwrap();
        assert_eq!(f.raw("graph"), Some("lsg"));
        assert_eq!(f.raw("eta-s"), Some("0.1, 0.2"));
        assert_eq!(f.raw("alpha"), Some("0.15"));
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("graph lsg").is_err());
        assert!(ConfigFile::parse("n = 1\nn = 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("graph = stg\nalpha = 0.5\nbeta = 0.3\ndelta = 30\neta-s = 1")
            .unwrap();
        let args = ParamArgs {
            alpha: vec![0.15],
            ..Default::default()
        };
        let (flavor, s) = args.setting(&f).unwrap();
        assert_eq!(flavor, Flavor::Stg);
        assert_eq!(
            s,
            ParamSetting::stg(30 * SECONDS_PER_DAY, 0.3, 1.0, 0.15, DEFAULT_N)
        );
    }

    #[test]
    fn stg_without_delta_is_a_usage_error() {
        let args = ParamArgs {
            graph: Some(Flavor::Stg),
            alpha: vec![0.15],
            beta: vec![0.5],
            eta_s: vec![1.0],
            ..Default::default()
        };
        let err = args.setting(&ConfigFile::default()).unwrap_err();
        assert!(err.0.contains("--delta"), "{err}");
    }

    #[test]
    fn grid_lists_replace_axes() {
        let args = ParamArgs {
            graph: Some(Flavor::Lsg),
            alpha: vec![0.1, 0.2],
            ..Default::default()
        };
        let (_, grid, n) = args.grid(&ConfigFile::default()).unwrap();
        assert_eq!(grid.alpha, vec![0.1, 0.2]);
        assert_eq!(grid.eta_s, ParamGrid::default().eta_s);
        assert_eq!(n, DEFAULT_N);
    }

    #[test]
    fn evaluate_rejects_lists() {
        let args = ParamArgs {
            graph: Some(Flavor::Bip),
            alpha: vec![0.1, 0.2],
            ..Default::default()
        };
        assert!(args.setting(&ConfigFile::default()).is_err());
    }

    #[test]
    fn count_zero_rejected() {
        let args = SearchArgs {
            count: Some(0),
            ..Default::default()
        };
        assert!(args.resolve(&ConfigFile::default()).is_err());
    }

    #[test]
    fn fractional_days() {
        assert_eq!(days_to_secs(0.5).unwrap(), 43_200);
        assert!(days_to_secs(0.0).is_err());
        assert!(days_to_secs(-1.0).is_err());
    }
}
