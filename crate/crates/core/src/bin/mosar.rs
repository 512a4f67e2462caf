use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use mosar::faultid::CaseConfig;
use mosar::harness::{self, ExperimentPlan, PlotKind, Variant};

#[derive(Parser)]
#[command(name = "mosar", version, about = "Re-seeding multi-objective simulated annealing with a hyper-heuristic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment plan (TOML).
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Overwrite an output directory that already holds results.
        #[arg(long)]
        force: bool,
    },
    /// Run one problem/variant cell ad hoc and print its summary.
    Bench {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Disable the hyper-heuristic (requires --heuristic).
        #[arg(long)]
        no_hh: bool,
        /// Fixed re-seed heuristic, 1-4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        heuristic: Option<u8>,
        /// Keep per-run artifacts here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run a fault-identification case study.
    Faultid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value = "faultid_out")]
        out: PathBuf,
    },
    /// Rebuild summary.csv from the run records in a plan directory.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Write plot data (front, boxplot, hh_trace) under <dir>/plot.
    Export {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        kind: String,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { plan, force } => {
            let plan = ExperimentPlan::load(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let records = harness::run_plan(&plan, force)?;
            print_summary(&harness::summarize(&records))?;
        }
        Command::Bench {
            problem,
            iters,
            seeds,
            no_hh,
            heuristic,
            out,
            force,
        } => {
            let variant = match (no_hh, heuristic) {
                (false, None) => Variant::HyperHeuristic,
                (true, Some(h)) => Variant::Fixed(h as usize),
                (false, Some(_)) => bail!("--heuristic requires --no-hh"),
                (true, None) => bail!("--no-hh requires --heuristic"),
            };
            let tmp;
            let output_dir = match out {
                Some(o) => o,
                None => {
                    tmp = std::env::temp_dir().join(format!("mosar-bench-{}", std::process::id()));
                    tmp.clone()
                }
            };
            let mut plan = ExperimentPlan::new(vec![problem.clone()], output_dir);
            plan.variants = vec![variant];
            plan.seeds = (0..seeds).collect();
            if let Some(n) = iters {
                plan.budgets.insert(problem, n);
            }
            let records = harness::run_plan(&plan, force)?;
            for r in &records {
                println!(
                    "seed {:>3}  igd {:.6}  hv {:.6}  |A| {:>5}  {:.1}s",
                    r.seed, r.igd, r.hv, r.archive_size, r.wall_time_s
                );
            }
            print_summary(&harness::summarize(&records))?;
        }
        Command::Faultid { config, runs, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let case = CaseConfig::from_toml(&text)?;
            let study = harness::run_fault_study(&case, runs, case.seed, None, Some(&out))?;
            let mut w = BufWriter::new(io::stdout());
            mosar::faultid::write_statistics_csv(&mut w, &study.statistics)?;
            w.flush()?;
            eprintln!("elements by pooled mean: {:?}", &study.ranked_elements()[..3.min(case.n_elements)]);
        }
        Command::Summarize { dir } => {
            let records = harness::load_records(&dir)?;
            let rows = harness::summarize(&records);
            harness::write_summary_csv(BufWriter::new(fs::File::create(dir.join("summary.csv"))?), &rows)?;
            print_summary(&rows)?;
        }
        Command::Export { dir, kind } => {
            let kind: PlotKind = kind.parse()?;
            for f in harness::export_plotdata(&dir, kind)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn print_summary(rows: &[harness::SummaryRow]) -> anyhow::Result<()> {
    harness::write_summary_csv(io::stdout(), rows)?;
    Ok(())
}
