//! `gridnav` command line: map conversion, training, evaluation, the
//! shortest-path oracle and multi-seed comparisons. All outputs are files.
//!
//! Exit codes: 0 ok, 2 usage/config/IO error, 3 evaluate found no path.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridnav::agents::{load_model, save_model};
use gridnav::gridmap::{project_octree, read_grid, write_grid};
use gridnav::octree::build_octree;
use gridnav::oracle::shortest_path;
use gridnav::pointcloud::parse_pcd;
use gridnav::svg::{line_chart, path_plot};
use gridnav::trainer::{evaluate_greedy, metrics_csv, run_comparison, train, Algo, TrainConfig};
use gridnav::{default_layout, CellState, EnvConfig, OctreeConfig, ZBand};

const EXIT_USAGE: u8 = 2;
const EXIT_NO_PATH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gridnav",
    version,
    about = "Point clouds to occupancy grids, and RL path planning on them"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert an ASCII PCD cloud into PREFIX.pgm + PREFIX.meta
    Convert(ConvertArgs),
    /// Train one algorithm and write metrics, model and reward/steps charts
    Train(TrainArgs),
    /// Roll out a greedy policy and write path.json + path.svg
    Evaluate(EvaluateArgs),
    /// Write the exact shortest path as oracle.json
    Oracle(EnvArgs),
    /// Train every algorithm over several seeds and write report.csv
    Compare(CompareArgs),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    pcd: PathBuf,
    #[arg(long)]
    resolution: f64,
    #[arg(long)]
    max_depth: u32,
    #[arg(long)]
    threshold: usize,
    #[arg(long, allow_negative_numbers = true)]
    zmin: f64,
    #[arg(long, allow_negative_numbers = true)]
    zmax: f64,
    #[arg(long)]
    cell_size: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnvArgs {
    /// key = value training/environment overrides
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid written by `convert` (PREFIX.pgm + PREFIX.meta); default is the
    /// built-in two-wall layout
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    algo: Option<Algo>,
    /// Overrides any `seed` in the config (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Record real per-episode wall time (makes metrics.csv non-reproducible)
    #[arg(long)]
    wall_clock: bool,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file from `train`; without it a model is trained first
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    /// Overrides any `seed` in the config (default 0)
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated seeds and inclusive ranges, e.g. `0-9` or `1,4,7`
    #[arg(long, default_value = "0-9")]
    seeds: String,
    #[command(flatten)]
    env: EnvArgs,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Builds the training config: defaults, then the config file, then flags.
fn load_config(env_args: &EnvArgs, algo: Option<Algo>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut env = default_layout();
    if let Some(prefix) = &env_args.map {
        let pgm = read(&with_ext(prefix, "pgm"))?;
        let meta_path = with_ext(prefix, "meta");
        let meta = String::from_utf8(read(&meta_path)?)
            .with_context(|| format!("{} is not UTF-8", meta_path.display()))?;
        env = EnvConfig {
            grid: read_grid(&pgm, &meta)?,
            ..env
        };
    }
    let text = match &env_args.config {
        Some(p) => {
            String::from_utf8(read(p)?).with_context(|| format!("{} is not UTF-8", p.display()))?
        }
        None => String::new(),
    };
    let mut cfg = TrainConfig::parse(&text, seed.unwrap_or(0), env).with_context(|| {
        env_args
            .config
            .as_ref()
            .map_or("config".into(), |p| p.display().to_string())
    })?;
    if let Some(algo) = algo {
        cfg.algo = algo;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_convert(a: &ConvertArgs) -> Result<u8> {
    let cloud = parse_pcd(&read(&a.pcd)?).with_context(|| a.pcd.display().to_string())?;
    let cfg = OctreeConfig::new(a.resolution, a.max_depth, a.threshold)?;
    let map = build_octree(&cloud, &cfg)?;
    let grid = project_octree(&map, ZBand::new(a.zmin, a.zmax)?, a.cell_size)?;

    let pgm_path = with_ext(&a.out, "pgm");
    let meta_path = with_ext(&a.out, "meta");
    let image_name = pgm_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (pgm, meta) = write_grid(&grid, &image_name);
    write(&pgm_path, &pgm)?;
    write(&meta_path, &meta)?;

    println!("points: {}", cloud.len());
    println!(
        "octree nodes: {}, occupied leaves: {}",
        map.node_count(),
        map.occupied_leaves().len()
    );
    println!(
        "grid: {} x {} cells of {}",
        grid.width(),
        grid.height(),
        grid.cell_size()
    );
    println!(
        "cells: occupied {}, free {}, unknown {}",
        grid.count(CellState::Occupied),
        grid.count(CellState::Free),
        grid.count(CellState::Unknown)
    );
    println!("{}: {} bytes", pgm_path.display(), pgm.len());
    println!("{}: {} bytes", meta_path.display(), meta.len());
    Ok(0)
}

fn cmd_train(a: &TrainArgs) -> Result<u8> {
    let cfg = load_config(&a.env, a.algo, a.seed)?;
    let out = &a.env.out;
    create_dir(out)?;
    let outcome = train(&cfg)?;
    let m = &outcome.metrics;
    write(&out.join("metrics.csv"), metrics_csv(m, a.wall_clock))?;
    write(&out.join("model.txt"), save_model(&outcome.model))?;
    let rewards: Vec<f64> = m.iter().map(|e| e.accumulated_reward).collect();
    let steps: Vec<f64> = m.iter().map(|e| e.steps as f64).collect();
    let title = format!("{} seed {}", cfg.algo, cfg.seed);
    write(
        &out.join("reward.svg"),
        line_chart(&title, "accumulated reward", &rewards),
    )?;
    write(&out.join("steps.svg"), line_chart(&title, "steps", &steps))?;

    let goals = m.iter().filter(|e| e.reached_goal).count();
    println!(
        "{}: {} episodes, goal reached in {goals}",
        cfg.algo,
        m.len()
    );
    if let Some(last) = m.last() {
        println!(
            "last episode: {} steps, reward {}",
            last.steps, last.accumulated_reward
        );
    }
    Ok(0)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<u8> {
    let cfg = load_config(&a.env, a.algo, a.seed)?;
    let model = match &a.model {
        Some(p) => load_model(&read(p)?).with_context(|| p.display().to_string())?,
        None => train(&cfg)?.model,
    };
    let out = &a.env.out;
    create_dir(out)?;
    let trace = evaluate_greedy(&model, &cfg.env)?;
    write(&out.join("path.json"), trace.to_json())?;
    write(&out.join("path.svg"), path_plot(&cfg.env, &trace))?;
    if trace.reached_goal {
        println!(
            "goal reached in {} steps, reward {}, cost {}",
            trace.steps,
            trace.total_reward,
            trace.cost()
        );
        Ok(0)
    } else {
        eprintln!(
            "no path: greedy rollout stopped after {} steps",
            trace.steps
        );
        Ok(EXIT_NO_PATH)
    }
}

fn cmd_oracle(a: &EnvArgs) -> Result<u8> {
    let cfg = load_config(a, None, None)?;
    let sp = shortest_path(&cfg.env)?;
    create_dir(&a.out)?;
    write(&a.out.join("oracle.json"), sp.trace.to_json())?;
    println!("shortest path: cost {}, {} steps", sp.cost, sp.trace.steps);
    Ok(0)
}

fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u64, u64) = (lo.trim().parse()?, hi.trim().parse()?);
                if lo > hi {
                    bail!("empty seed range `{part}`");
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn cmd_compare(a: &CompareArgs) -> Result<u8> {
    let seeds = parse_seeds(&a.seeds)?;
    let cfg = load_config(&a.env, None, None)?;
    create_dir(&a.env.out)?;
    let report = run_comparison(&cfg, &seeds)?;
    write(&a.env.out.join("report.csv"), report.to_csv())?;
    println!("algo,runs,goal_rate,median_final_reward,median_path_cost,median_first_goal");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &report.per_algo {
        println!(
            "{},{},{},{},{},{}",
            s.algo,
            s.runs,
            s.goal_rate,
            s.median_final_reward,
            opt(s.median_path_cost),
            opt(s.median_first_goal)
        );
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Convert(a) => cmd_convert(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("5, 1,2-2").unwrap(), vec![5, 1, 2]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn prefix_extension_keeps_dots() {
        assert_eq!(
            with_ext(Path::new("out/map.v2"), "pgm"),
            PathBuf::from("out/map.v2.pgm")
        );
    }
}
