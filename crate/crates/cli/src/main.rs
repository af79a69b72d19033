use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use arc_mdl::learn::{create, learn, predict, OrderPolicy, SearchConfig};
use arc_mdl::task::{evaluate_batch, evaluate_task, load_task_file, task_files, Summary, ATTEMPTS};
use arc_mdl::TaskModel;

#[derive(Parser)]
#[command(name = "arc-mdl", version, about = "Learn grid models for ARC tasks by description-length minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model for one task, predict its test outputs and report.
    Solve {
        task: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Print the report as one JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate every task of a directory; JSON lines on stdout, summary on stderr.
    Eval {
        dir: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Only the first N tasks (in id order).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate example pairs from a task model written in the model syntax.
    Create {
        model: PathBuf,
    },
    /// Print the grids of a task as text, or write them as PPM pixmaps.
    Render {
        task: PathBuf,
        /// Directory receiving one .ppm file per grid.
        #[arg(long)]
        ppm: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        scale: usize,
    },
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Learning timeout per task, in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    /// Weight of the data part of the description length.
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Beam width (K_m).
    #[arg(long, default_value_t = 1)]
    beam: usize,
    /// Compressive refinements evaluated per step (K_r).
    #[arg(long, default_value_t = 20)]
    refinements: usize,
    /// Parse trees generated before sorting.
    #[arg(long, default_value_t = 64)]
    max_trees: usize,
    /// Parse trees kept after sorting.
    #[arg(long, default_value_t = 3)]
    keep_trees: usize,
    /// Model divergences allowed when reading test inputs.
    #[arg(long, default_value_t = 3)]
    max_diffs: usize,
    /// Refinement category order, e.g. So-Si-Eo-Ei.
    #[arg(long, default_value = "So-Si-Eo-Ei")]
    order: String,
}

impl SearchArgs {
    fn config(&self) -> Result<SearchConfig> {
        if self.beam == 0 || self.refinements == 0 || self.max_trees == 0 || self.keep_trees == 0 {
            bail!("--beam, --refinements, --max-trees and --keep-trees must be positive");
        }
        if self.keep_trees > self.max_trees {
            bail!("--keep-trees cannot exceed --max-trees");
        }
        if !(self.alpha > 0.0) || !(self.timeout > 0.0) {
            bail!("--alpha and --timeout must be positive");
        }
        let mut cfg = SearchConfig::default();
        cfg.timeout = Duration::from_secs_f64(self.timeout);
        cfg.dl.alpha = self.alpha;
        cfg.k_m = self.beam;
        cfg.k_r = self.refinements;
        cfg.parse.max_trees_before_sort = self.max_trees;
        cfg.parse.max_trees_kept = self.keep_trees;
        cfg.test_max_diffs = self.max_diffs;
        cfg.order = self.order.parse::<OrderPolicy>()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Solve { task, search, json } => solve(&task, &search.config()?, json),
        Command::Eval { dir, search, limit } => eval(&dir, &search.config()?, limit),
        Command::Create { model } => create_pairs(&model),
        Command::Render { task, ppm, scale } => render(&task, ppm, scale),
    }
}

fn solve(path: &Path, cfg: &SearchConfig, json: bool) -> Result<()> {
    let task = load_task_file(path)?;
    if json {
        let report = evaluate_task(&task, cfg);
        println!("{}", serde_json::to_string(&report)?);
        return Ok(());
    }
    let learned = learn(&task.train, cfg)?;
    println!("task {}", task.id);
    println!("{}", learned.trace.table());
    println!("model:\n{}\n", learned.model);
    println!("{}", learned.dl.table(&learned.normalizer));
    if learned.timed_out {
        println!("(search stopped at the timeout)");
    }
    for (k, (input, expected)) in task.test.iter().enumerate() {
        let attempts = predict(&learned.model, input, cfg, ATTEMPTS)?;
        let hit = expected.as_ref().and_then(|e| attempts.iter().position(|g| g == e));
        match (expected, hit) {
            (None, _) => println!("test {k}: {} attempt(s), no expected output", attempts.len()),
            (Some(_), Some(a)) => println!("test {k}: solved at attempt {}", a + 1),
            (Some(_), None) => println!("test {k}: not solved ({} attempt(s))", attempts.len()),
        }
        if let Some(g) = attempts.first() {
            println!("{}", g.render_text());
        }
    }
    Ok(())
}

fn eval(dir: &Path, cfg: &SearchConfig, limit: Option<usize>) -> Result<()> {
    let stdout = std::io::stdout();
    let (reports, summary) = match limit {
        None => evaluate_batch(dir, cfg, |r| {
            let mut out = stdout.lock();
            let _ = writeln!(out, "{}", serde_json::to_string(r).unwrap_or_default());
        })?,
        Some(n) => {
            let mut reports = Vec::new();
            for path in task_files(dir)?.into_iter().take(n) {
                let r = evaluate_task(&load_task_file(&path)?, cfg);
                writeln!(stdout.lock(), "{}", serde_json::to_string(&r)?)?;
                reports.push(r);
            }
            let s = Summary::of(&reports);
            (reports, s)
        }
    };
    eprintln!("{}", summary.table());
    let solved: Vec<&str> = reports.iter().filter(|r| r.test_solved()).map(|r| r.id.as_str()).collect();
    eprintln!("solved: {}", solved.join(" "));
    Ok(())
}

fn create_pairs(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m = TaskModel::parse(text.trim())?;
    let (gi, go) = create(&m)?;
    println!("input:\n{}\noutput:\n{}", gi.render_text(), go.render_text());
    Ok(())
}

fn render(path: &Path, ppm: Option<PathBuf>, scale: usize) -> Result<()> {
    let task = load_task_file(path)?;
    let mut grids = Vec::new();
    for (k, (i, o)) in task.train.iter().enumerate() {
        grids.push((format!("train{k}-in"), i.clone()));
        grids.push((format!("train{k}-out"), o.clone()));
    }
    for (k, (i, o)) in task.test.iter().enumerate() {
        grids.push((format!("test{k}-in"), i.clone()));
        if let Some(o) = o {
            grids.push((format!("test{k}-out"), o.clone()));
        }
    }
    match ppm {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            for (name, g) in &grids {
                let file = dir.join(format!("{}-{name}.ppm", task.id));
                std::fs::write(&file, g.render_ppm(scale.max(1)))?;
                println!("{}", file.display());
            }
        }
        None => {
            for (name, g) in &grids {
                println!("{name} ({}x{}):\n{}", g.height(), g.width(), g.render_text());
            }
        }
    }
    Ok(())
}
