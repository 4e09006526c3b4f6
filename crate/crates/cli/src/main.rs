//! `kdmr`: generate test data, build and search k-d trees, run timing sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use kdmr::bench::{
    self, fit_scaling_records, fit_size_records, generate_test_data, verify, CutoffChoice, Phase,
    SquareGridSpec, SweepOptions,
};
use kdmr::distributed::{build_distributed_tree_auto, DistributedTree};
use kdmr::search::{run_search, search_dataset};
use kdmr::{build_distributed_tree, io, Engine, EngineConfig, FULL_DATASET_PATH};

#[derive(Parser)]
#[command(name = "kdmr", version, about = "Balanced k-d trees on a partitioned-dataset engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a box CSV of 16 rectangles per square.
    Gen {
        #[arg(long)]
        squares: usize,
        #[arg(long, default_value_t = bench::DEFAULT_SIDE)]
        side: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a distributed tree from a box CSV and write it as JSON lines.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        cutoff: CutoffArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a tree with every box of a query CSV.
    Search {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
        /// Check the results against the brute-force oracle and the expected
        /// count of 9 intersecting boxes per square.
        #[arg(long, requires = "squares")]
        verify: bool,
        #[arg(long)]
        squares: Option<usize>,
    },
    /// Timing sweeps written as CSV, followed by a fit report.
    Bench {
        #[command(subcommand)]
        kind: BenchKind,
    },
    /// Fit a model to a bench CSV.
    Fit {
        model: FitKind,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchKind {
    /// Build time for n = 2^min_exp ..= 2^max_exp.
    Build(SizeSweepArgs),
    /// Search time for n = 2^min_exp ..= 2^max_exp.
    Search(SizeSweepArgs),
    /// Build and search time for w = 1 ..= max_workers at n = 2^exp.
    Scaling {
        #[arg(long)]
        exp: u32,
        #[arg(long)]
        max_workers: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        partitions: Option<usize>,
        #[command(flatten)]
        cutoff: CutoffArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SizeSweepArgs {
    #[arg(long)]
    min_exp: u32,
    #[arg(long)]
    max_exp: u32,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    partitions: Option<usize>,
    #[command(flatten)]
    cutoff: CutoffArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Partitions per dataset; defaults to twice the worker count.
    #[arg(long)]
    partitions: Option<usize>,
}

impl EngineArgs {
    fn engine(&self) -> anyhow::Result<Engine> {
        let mut config = EngineConfig::with_workers(self.workers);
        if let Some(p) = self.partitions {
            config.partitions = p;
        }
        Ok(Engine::new(config)?)
    }
}

#[derive(Args)]
#[group(multiple = false)]
struct CutoffArgs {
    /// Depth at which subtrees are collected and built in memory.
    #[arg(long)]
    cutoff_depth: Option<usize>,
    /// Measure the dataset and array build constants and derive the depth.
    #[arg(long)]
    auto_cutoff: bool,
}

impl CutoffArgs {
    fn choice(&self) -> CutoffChoice {
        match (self.auto_cutoff, self.cutoff_depth) {
            (true, _) => CutoffChoice::Auto,
            (false, Some(d)) => CutoffChoice::Depth(d),
            (false, None) => CutoffChoice::Depth(FULL_DATASET_PATH),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    Nlogn,
    Scaling,
}

enum Outcome {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Gen { squares, side, out } => {
            let boxes = generate_test_data(&SquareGridSpec { squares, side })?;
            io::write_boxes_file(&out, &boxes)?;
            info!("wrote {} boxes to {}", boxes.len(), out.display());
        }
        Command::Build {
            input,
            engine,
            cutoff,
            out,
        } => {
            let boxes = io::read_boxes_file(&input)?;
            let engine = engine.engine()?;
            let tree = match cutoff.choice() {
                CutoffChoice::Depth(d) => build_distributed_tree(&engine, &boxes, d)?,
                CutoffChoice::Auto => {
                    let (tree, picked) = build_distributed_tree_auto(&engine, &boxes)?;
                    if let Some((params, depth)) = picked {
                        eprintln!(
                            "auto cutoff: c_r={:e} c_a={:e} w={} n={} -> depth {depth}",
                            params.c_r, params.c_a, params.workers, params.n
                        );
                    }
                    tree
                }
            };
            io::write_tree_file(&out, &tree.sorted_entries())?;
        }
        Command::Search {
            tree,
            queries,
            engine,
            out,
            verify: check,
            squares,
        } => {
            let engine = engine.engine()?;
            let entries = io::read_tree_file(&tree)?;
            let tree = DistributedTree::from_entries(&engine, entries)
                .with_context(|| format!("loading {}", tree.display()))?;
            let boxes = io::read_boxes_file(&queries)?;
            kdmr::geometry::ensure_unique_names(&boxes)?;
            let outcome = run_search(&search_dataset(&engine, &boxes), &tree)?;
            let results = outcome.to_map();
            io::write_results_file(&out, &results)?;
            info!("{} passes, {} queries with matches", outcome.iterations, results.len());
            if check {
                let squares = squares.expect("clap enforces --squares");
                if !verify(&results, &boxes, squares) {
                    eprintln!(
                        "verification failed: {} queries with matches, expected {}",
                        results.len(),
                        bench::INTERSECTING_PER_SQUARE * squares
                    );
                    return Ok(Outcome::VerificationFailed);
                }
                eprintln!("verified: {} intersecting boxes", results.len());
            }
        }
        Command::Bench { kind } => run_bench(kind)?,
        Command::Fit { model, input } => {
            let records = io::read_bench_file(&input)?;
            if records.is_empty() {
                bail!("{} holds no records", input.display());
            }
            let fits = match model {
                FitKind::Nlogn => fit_size_records(&records)?,
                FitKind::Scaling => fit_scaling_records(&records)?,
            };
            print_fits(&fits);
        }
    }
    Ok(Outcome::Ok)
}

fn run_bench(kind: BenchKind) -> anyhow::Result<()> {
    let (records, out, size_sweep) = match kind {
        BenchKind::Build(a) => (size_sweep(Phase::Build, &a)?, a.out, true),
        BenchKind::Search(a) => (size_sweep(Phase::Search, &a)?, a.out, true),
        BenchKind::Scaling {
            exp,
            max_workers,
            repeats,
            partitions,
            cutoff,
            out,
        } => {
            let opts = SweepOptions {
                repeats,
                partitions,
                cutoff: cutoff.choice(),
            };
            (bench::run_scaling_sweep(exp, max_workers, &opts)?, out, false)
        }
    };
    io::write_bench_file(&out, &records)?;
    let fits = if size_sweep {
        fit_size_records(&records)
    } else {
        fit_scaling_records(&records)
    };
    match fits {
        Ok(fits) => print_fits(&fits),
        Err(e) => warn!("no fit: {e}"),
    }
    Ok(())
}

fn size_sweep(phase: Phase, a: &SizeSweepArgs) -> anyhow::Result<Vec<bench::BenchRecord>> {
    let opts = SweepOptions {
        repeats: a.repeats,
        partitions: a.partitions,
        cutoff: a.cutoff.choice(),
    };
    Ok(bench::run_size_sweep(phase, a.min_exp, a.max_exp, a.workers, &opts)?)
}

fn print_fits(fits: &[(Phase, kdmr::fit::FitResult)]) {
    println!("model,param,value");
    for (phase, fit) in fits {
        println!("# phase={}", phase.as_str());
        println!("{fit}");
    }
}
