//! `lsgrec`: evaluate and tune temporal graph recommenders from the shell.
//!
//! Exit status is 0 on success, 1 on input or I/O failure, 2 on a usage or
//! configuration error, and 3 when no user could be evaluated.

mod config;
mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lsgrec::evaluation::Metric;
use lsgrec::linkstream::split_windows;
use lsgrec::tuning::SECONDS_PER_DAY;
use lsgrec::{
    build_bip, build_lsg, build_stg, filter_min_activity, filter_positive, parse_link_stream,
    run_protocol, search, Flavor, LinkStream, SearchConfig,
};

use config::{DataArgs, DataConfig, ParamArgs, RunConfig, RunMode, SearchArgs, UsageError};
use report::{BestFile, EvaluationFile, GraphStats, InspectFile, SearchFile, FORMAT_VERSION, TOOL};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NOTHING_EVALUATED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "lsgrec",
    version,
    about = "Temporal graph recommenders on link streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the windowed protocol for one parameter setting.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Sample settings from the grid, evaluate each, rank them.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Print dataset and graph statistics.
    Inspect {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        graphs: InspectArgs,
    },
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// STG session length in days; STG is skipped without it.
    #[arg(long)]
    delta: Option<f64>,
    /// Backward edge weight for STG and LSG.
    #[arg(long, default_value_t = 1.0)]
    eta_s: f64,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

/// Raised when the protocol ran but every window was skipped.
#[derive(Debug)]
struct NothingEvaluated;

impl std::fmt::Display for NothingEvaluated {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no user could be evaluated in any window")
    }
}

impl std::error::Error for NothingEvaluated {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate { data, params } => evaluate(&data, &params),
        Command::Search {
            data,
            params,
            search,
        } => run_search(&data, &params, &search),
        Command::Inspect { data, graphs } => inspect(&data, &graphs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(EXIT_USAGE)
            } else if err.is::<NothingEvaluated>() {
                ExitCode::from(EXIT_NOTHING_EVALUATED)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}

fn load_stream(data: &DataConfig) -> Result<LinkStream> {
    let file =
        File::open(&data.input).with_context(|| format!("cannot open {}", data.input.display()))?;
    let raw = parse_link_stream(file, &data.parse)
        .with_context(|| format!("{}", data.input.display()))?;
    let positive = if data.positive_filter {
        filter_positive(&raw, data.filter.rating_floor)?
    } else {
        raw
    };
    let stream = filter_min_activity(&positive, &data.filter);
    if stream.is_empty() {
        anyhow::bail!("{}: no events left after filtering", data.input.display());
    }
    Ok(stream)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker pool")
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn evaluate(data_args: &DataArgs, param_args: &ParamArgs) -> Result<()> {
    let file = data_args.file()?;
    let (flavor, params) = param_args.setting(&file)?;
    let config = RunConfig {
        data: data_args.resolve(&file)?,
        protocol: data_args.protocol(&file)?,
        flavor,
        run: RunMode::Single {
            params: params.clone(),
        },
        workers: data_args.workers(&file)?,
        out_dir: data_args.out_dir(&file),
    };
    prepare_out_dir(&config.out_dir)?;

    let stream = load_stream(&config.data)?;
    let stats = stream.stats();
    let report = pool(config.workers)?
        .install(|| run_protocol(&stream, flavor, &params, &config.protocol))?;

    let json_path = config.out_dir.join("report.json");
    report::write_json(
        &json_path,
        &EvaluationFile {
            format_version: FORMAT_VERSION,
            kind: "evaluation",
            tool: TOOL,
            config: &config,
            dataset: &stats,
            report: &report,
        },
    )?;
    report::write_file(&config.out_dir.join("report.csv"), |w| {
        Ok(report.write_csv(w)?)
    })?;

    if report.unconverged > 0 {
        eprintln!(
            "warning: {} PageRank runs hit the iteration cap",
            report.unconverged
        );
    }
    let Some(ta) = report.time_averaged else {
        return Err(NothingEvaluated.into());
    };
    let evaluated = report.windows.iter().filter(|w| !w.skipped).count();
    println!(
        "{flavor} TA F1={:.6} HR={:.6} MAP={:.6} (N={}, {evaluated}/{} windows evaluated)",
        ta.f1,
        ta.hr,
        ta.map,
        params.n,
        report.windows.len()
    );
    println!("report: {}", json_path.display());
    Ok(())
}

fn run_search(
    data_args: &DataArgs,
    param_args: &ParamArgs,
    search_args: &SearchArgs,
) -> Result<()> {
    let file = data_args.file()?;
    let (count, seed, objective) = search_args.resolve(&file)?;
    let (flavor, grid, n) = param_args.grid(&file)?;
    let config = RunConfig {
        data: data_args.resolve(&file)?,
        protocol: data_args.protocol(&file)?,
        flavor,
        run: RunMode::Search {
            grid: grid.clone(),
            count,
            seed,
            n,
            objective,
        },
        workers: data_args.workers(&file)?,
        out_dir: data_args.out_dir(&file),
    };
    prepare_out_dir(&config.out_dir)?;

    let stream = load_stream(&config.data)?;
    let stats = stream.stats();
    let search_cfg = SearchConfig {
        flavor,
        grid,
        count,
        seed,
        n,
        objective,
        protocol: config.protocol,
    };
    let outcome = pool(config.workers)?.install(|| search(&stream, &search_cfg))?;

    let dir = &config.out_dir;
    report::write_file(&dir.join("leaderboard.csv"), |w| Ok(outcome.write_csv(w)?))?;
    report::write_json(
        &dir.join("search.json"),
        &SearchFile {
            format_version: FORMAT_VERSION,
            kind: "search",
            tool: TOOL,
            config: &config,
            dataset: &stats,
            outcome: &outcome,
        },
    )?;
    for metric in Metric::ALL {
        report::write_json(
            &dir.join(format!("best-{metric}.json")),
            &BestFile {
                format_version: FORMAT_VERSION,
                kind: "best-setting",
                tool: TOOL,
                config: &config,
                flavor,
                metric,
                best: outcome.best_by(metric),
            },
        )?;
    }

    for e in &outcome.failed {
        eprintln!("warning: setting #{} {}", e.sample_index, e.status);
    }
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{flavor}: {} settings evaluated, {} failed{}",
        outcome.leaderboard.len(),
        outcome.failed.len(),
        if outcome.exhausted {
            " (whole grid)"
        } else {
            ""
        }
    )?;
    if outcome.leaderboard.is_empty() {
        return Err(NothingEvaluated.into());
    }
    for metric in Metric::ALL {
        if let Some(best) = outcome.best_by(metric) {
            let m = best.metrics.expect("leaderboard entries carry metrics");
            writeln!(
                out,
                "best {metric}: #{} {} = {:.6} (F1={:.6} HR={:.6} MAP={:.6})",
                best.sample_index,
                describe(&best.setting),
                m.get(metric),
                m.f1,
                m.hr,
                m.map
            )?;
        }
    }
    writeln!(
        out,
        "leaderboard: {}",
        dir.join("leaderboard.csv").display()
    )?;
    Ok(())
}

fn describe(s: &lsgrec::ParamSetting) -> String {
    let mut parts = Vec::new();
    if let Some(d) = s.delta {
        parts.push(format!("delta={}d", d as f64 / SECONDS_PER_DAY as f64));
    }
    if let Some(b) = s.beta {
        parts.push(format!("beta={b}"));
    }
    if let Some(e) = s.eta_s {
        parts.push(format!("eta_s={e}"));
    }
    parts.push(format!("alpha={}", s.alpha));
    parts.join(" ")
}

fn inspect(data_args: &DataArgs, args: &InspectArgs) -> Result<()> {
    let file = data_args.file()?;
    let data = data_args.resolve(&file)?;
    let n_windows = data_args.protocol(&file)?.n_windows;
    if !(args.eta_s.is_finite() && args.eta_s >= 0.0) {
        return Err(UsageError(format!("eta-s must be non-negative, got {}", args.eta_s)).into());
    }
    let delta = args
        .delta
        .map(|d| {
            let secs = (d * SECONDS_PER_DAY as f64).round() as i64;
            if d.is_finite() && secs > 0 {
                Ok(secs)
            } else {
                Err(UsageError(format!(
                    "delta must be a positive number of days, got {d}"
                )))
            }
        })
        .transpose()?;

    let stream = load_stream(&data)?;
    let mut graphs = Vec::new();
    let bip = build_bip(&stream)?;
    graphs.push(GraphStats {
        flavor: Flavor::Bip,
        nodes: bip.node_count(),
        edges: bip.edge_count(),
        delta_days: None,
        eta_s: None,
    });
    if let Some(secs) = delta {
        let stg = build_stg(&stream, secs, args.eta_s)?;
        graphs.push(GraphStats {
            flavor: Flavor::Stg,
            nodes: stg.node_count(),
            edges: stg.edge_count(),
            delta_days: args.delta,
            eta_s: Some(args.eta_s),
        });
    }
    let lsg = build_lsg(&stream, args.eta_s)?;
    graphs.push(GraphStats {
        flavor: Flavor::Lsg,
        nodes: lsg.node_count(),
        edges: lsg.edge_count(),
        delta_days: None,
        eta_s: Some(args.eta_s),
    });
    let stats = stream.stats();

    let mut out = io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(
            &mut out,
            &InspectFile {
                format_version: FORMAT_VERSION,
                kind: "inspect",
                tool: TOOL,
                dataset: stats,
                graphs,
            },
        )?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "events          {}", stats.events)?;
    writeln!(out, "user-item pairs {}", stats.distinct_pairs)?;
    writeln!(out, "users           {}", stats.users)?;
    writeln!(out, "items           {}", stats.items)?;
    writeln!(out, "sparsity        {:.6}", stats.sparsity)?;
    writeln!(
        out,
        "span            [{}, {}] ({:.1} days)",
        stats.start,
        stats.end,
        (stats.end - stats.start) as f64 / SECONDS_PER_DAY as f64
    )?;
    writeln!(out)?;
    for g in &graphs {
        writeln!(
            out,
            "{:<4} nodes {:>9}  edges {:>10}",
            g.flavor, g.nodes, g.edges
        )?;
    }
    if delta.is_none() {
        writeln!(out, "stg  skipped (pass --delta to build it)")?;
    }
    if let Ok(windows) = split_windows(&stream, n_windows) {
        writeln!(out)?;
        for (w, sub) in &windows {
            writeln!(
                out,
                "window {:>2}  events {:>8}  users {:>6}  items {:>6}",
                w.index,
                sub.len(),
                sub.users().len(),
                sub.items().len()
            )?;
        }
    }
    Ok(())
}
