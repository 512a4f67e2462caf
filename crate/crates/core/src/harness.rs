//! Batch experiments: seeded run matrices over problems and algorithm
//! variants, per-run artifacts, summary tables and plot data.
//!
//! Output layout of a plan directory:
//!
//! ```text
//! <output_dir>/plan.toml
//! <output_dir>/summary.csv
//! <output_dir>/runs/<problem>_<variant>_s<seed>/{record.json,archive.csv,trace.csv,metrics.csv}
//! <output_dir>/plot/...            (written by `export_plotdata`)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annealer::{self, AnnealConfig, BranchCounters, Heuristic, RunOutput};
use crate::error::{invalid, Error, Result};
use crate::faultid::{self, CaseConfig, ElementStats};
use crate::metrics::{self, MC_SAMPLES_REPORT, REFERENCE_SCALE};
use crate::parallel;
use crate::pareto::ParetoArchive;
use crate::problems::{reference_front_for, Benchmark, BenchmarkId, Problem};

/// Algorithm variant: the hyper-heuristic, or one fixed re-seed rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    HyperHeuristic,
    Fixed(usize),
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        let mut v = vec![Variant::HyperHeuristic];
        v.extend(Heuristic::ALL.iter().map(|h| Variant::Fixed(h.number())));
        v
    }

    pub fn fixed(h: Heuristic) -> Self {
        Variant::Fixed(h.number())
    }

    /// Applies this variant to `config`.
    pub fn configure(&self, config: AnnealConfig) -> Result<AnnealConfig> {
        Ok(match self {
            Variant::HyperHeuristic => AnnealConfig {
                hh_enabled: true,
                fixed_heuristic: None,
                ..config
            },
            Variant::Fixed(n) => AnnealConfig {
                hh_enabled: false,
                fixed_heuristic: Some(Heuristic::from_index(n.wrapping_sub(1))?),
                ..config
            },
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::HyperHeuristic => f.write_str("hh"),
            Variant::Fixed(n) => write!(f, "h{n}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "hh" {
            return Ok(Variant::HyperHeuristic);
        }
        let h: Heuristic = t
            .parse()
            .map_err(|_| Error::Config(format!("unknown variant `{s}` (expected hh or h1..h4)")))?;
        Ok(Variant::fixed(h))
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> Self {
        v.to_string()
    }
}

/// Evaluation budget used when a plan gives none: 20,000 for DTLZ1-2,
/// 30,000 for DTLZ3-7 and 100,000 for UF instances.
pub fn default_budget(id: BenchmarkId) -> usize {
    match id {
        BenchmarkId::Dtlz(1 | 2) => 20_000,
        BenchmarkId::Dtlz(_) => 30_000,
        BenchmarkId::Uf(_) => 100_000,
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::HyperHeuristic]
}

fn default_report_samples() -> usize {
    MC_SAMPLES_REPORT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problems: Vec<String>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Per-problem `total_iters` overrides.
    #[serde(default)]
    pub budgets: BTreeMap<String, usize>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    /// Concurrent runs; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Monte-Carlo samples for reported hypervolumes (3+ objectives).
    #[serde(default = "default_report_samples")]
    pub report_samples: usize,
    /// Reference-front size; the problem default when absent.
    #[serde(default)]
    pub front_size: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(problems: Vec<String>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            problems,
            variants: default_variants(),
            seeds: default_seeds(),
            budgets: BTreeMap::new(),
            output_dir: output_dir.into(),
            master_seed: 0,
            workers: None,
            report_samples: MC_SAMPLES_REPORT,
            front_size: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.problems.is_empty() {
            return bad("plan lists no problems".into());
        }
        if self.variants.is_empty() {
            return bad("plan lists no variants".into());
        }
        if self.seeds.is_empty() {
            return bad("plan lists no seeds".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        for p in &self.problems {
            p.parse::<BenchmarkId>()?;
        }
        for v in &self.variants {
            v.configure(AnnealConfig::default())?;
        }
        for (p, b) in &self.budgets {
            p.parse::<BenchmarkId>()?;
            if *b == 0 {
                return bad(format!("budget for {p} must be positive"));
            }
        }
        if self.report_samples < 1000 {
            return bad("report_samples must be at least 1000".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    pub fn budget(&self, id: BenchmarkId) -> usize {
        self.budgets
            .iter()
            .find(|(k, _)| k.parse::<BenchmarkId>().ok() == Some(id))
            .map(|(_, v)| *v)
            .unwrap_or_else(|| default_budget(id))
    }

    /// Every `(problem, variant, seed)` cell in plan order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for p in &self.problems {
            let id: BenchmarkId = p.parse()?;
            for v in &self.variants {
                for s in &self.seeds {
                    out.push(Cell {
                        problem: id,
                        variant: *v,
                        seed: *s,
                        run_seed: derive_seed(self.master_seed, &id.to_string(), *v, *s),
                        total_iters: self.budget(id),
                    });
                }
            }
        }
        Ok(out)
    }
}

/// One run of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub problem: BenchmarkId,
    pub variant: Variant,
    pub seed: u64,
    pub run_seed: u64,
    pub total_iters: usize,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!("{}_{}_s{}", self.problem, self.variant, self.seed)
    }
}

/// Independent stream seed for a cell: the first 8 bytes of
/// SHA-256(`master|problem|variant|seed`).
pub fn derive_seed(master: u64, problem: &str, variant: Variant, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(format!("{master}|{problem}|{variant}|{seed}").as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub variant: Variant,
    pub seed: u64,
    pub run_seed: u64,
    pub total_iters: usize,
    pub evaluations: usize,
    pub igd: f64,
    pub hv: f64,
    pub archive_size: usize,
    pub wall_time_s: f64,
    pub counters: BranchCounters,
    /// Selection counts per heuristic (empty for fixed variants).
    pub selections: Vec<usize>,
    /// Run directory relative to the plan's output directory.
    pub run_dir: String,
    #[serde(skip)]
    pub archive: Option<ParetoArchive>,
}

/// A benchmark with its reference front and the true-front hypervolume.
#[derive(Debug, Clone)]
pub struct Scoring {
    pub front: Vec<Vec<f64>>,
    pub reference: Vec<f64>,
    pub hv_true: f64,
    pub samples: usize,
}

impl Scoring {
    /// Reference point `1.1 x` the front's upper bound.
    pub fn new(id: BenchmarkId, front_size: usize, samples: usize) -> Result<Self> {
        let front = reference_front_for(id, front_size)?;
        let reference = metrics::reference_point(&front, REFERENCE_SCALE)?;
        let mut me = Self {
            front,
            reference,
            hv_true: 0.0,
            samples,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        me.hv_true = me.hv(&me.front.clone(), &mut rng)?;
        Ok(me)
    }

    /// Hypervolume fraction of `[0, r]`; points outside the box contribute
    /// nothing and are dropped.
    pub fn hv<R: rand::Rng + ?Sized>(&self, points: &[Vec<f64>], rng: &mut R) -> Result<f64> {
        let inside: Vec<&Vec<f64>> = points
            .iter()
            .filter(|p| p.iter().zip(&self.reference).all(|(v, r)| *v <= *r))
            .collect();
        if self.reference.len() == 2 {
            metrics::hv_exact_2d(&inside, &self.reference)
        } else {
            metrics::hv_monte_carlo(&inside, &self.reference, self.samples, rng)
        }
    }

    pub fn igd(&self, points: &[Vec<f64>]) -> Result<f64> {
        metrics::igd(points, &self.front)
    }
}

/// Runs one cell and scores its final archive.
pub fn run_cell(cell: &Cell, scoring: &Scoring) -> Result<(RunRecord, RunOutput)> {
    let problem = Benchmark::new(cell.problem);
    let config = cell.variant.configure(AnnealConfig {
        total_iters: cell.total_iters,
        seed: cell.run_seed,
        hv_true: scoring.hv_true,
        ..AnnealConfig::default()
    })?;
    let start = Instant::now();
    let out = annealer::run(&problem, config)?;
    let wall = start.elapsed().as_secs_f64();
    let objs = out.archive.objectives();
    let mut rng = ChaCha8Rng::seed_from_u64(cell.run_seed ^ 0x9e37_79b9_7f4a_7c15);
    let hv = scoring.hv(&objs, &mut rng)?;
    let igd = scoring.igd(&objs)?;
    let selections = if cell.variant == Variant::HyperHeuristic {
        out.trace.frequencies(Heuristic::ALL.len())
    } else {
        Vec::new()
    };
    info!("{} igd={igd:.5} hv={hv:.4} |A|={} {wall:.1}s", cell.dir_name(), objs.len());
    let record = RunRecord {
        problem: problem.name().to_string(),
        variant: cell.variant,
        seed: cell.seed,
        run_seed: cell.run_seed,
        total_iters: cell.total_iters,
        evaluations: out.evaluations,
        igd,
        hv,
        archive_size: objs.len(),
        wall_time_s: wall,
        counters: out.counters,
        selections,
        run_dir: format!("runs/{}", cell.dir_name()),
        archive: Some(out.archive.clone()),
    };
    Ok((record, out))
}

fn write_run_artifacts(dir: &Path, record: &RunRecord, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.archive.write_csv(BufWriter::new(File::create(dir.join("archive.csv"))?))?;
    out.trace
        .write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?), Heuristic::ALL.len())?;
    out.metrics.write_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("record.json"))?), record)?;
    Ok(())
}

fn has_results(dir: &Path) -> bool {
    dir.join("summary.csv").exists() || dir.join("runs").exists()
}

/// Executes every cell of `plan`, possibly concurrently, writing per-run
/// artifacts and the summary. Refuses a directory that already holds
/// results unless `force` is set.
pub fn run_plan(plan: &ExperimentPlan, force: bool) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let out_dir = &plan.output_dir;
    if has_results(out_dir) {
        if !force {
            return Err(Error::Config(format!(
                "{} already holds results; pass force to overwrite",
                out_dir.display()
            )));
        }
        let runs = out_dir.join("runs");
        if runs.exists() {
            fs::remove_dir_all(runs)?;
        }
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("plan.toml"), plan.to_toml()?)?;

    let mut scorings: BTreeMap<String, Scoring> = BTreeMap::new();
    for p in &plan.problems {
        let id: BenchmarkId = p.parse()?;
        let size = plan.front_size.unwrap_or_else(|| Benchmark::new(id).default_front_size());
        scorings.insert(id.to_string(), Scoring::new(id, size, plan.report_samples)?);
    }
    let cells = plan.cells()?;
    let results = parallel::map_with_workers(&cells, plan.workers, |cell| -> Result<RunRecord> {
        let scoring = &scorings[&cell.problem.to_string()];
        let (record, out) = run_cell(cell, scoring)?;
        write_run_artifacts(&out_dir.join(&record.run_dir), &record, &out)?;
        Ok(record)
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_summary_csv(
        BufWriter::new(File::create(out_dir.join("summary.csv"))?),
        &summarize(&records),
    )?;
    Ok(records)
}

/// Loads every `record.json` under `<dir>/runs`, sorted by run directory.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = dir.join("runs");
    if !runs.is_dir() {
        return Err(invalid(format!("{} has no runs directory", dir.display())));
    }
    let mut records = Vec::new();
    for entry in fs::read_dir(&runs)? {
        let path = entry?.path().join("record.json");
        if path.is_file() {
            let r: RunRecord = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
            records.push(r);
        }
    }
    records.sort_by(|a, b| a.run_dir.cmp(&b.run_dir));
    let plan_path = dir.join("plan.toml");
    if plan_path.is_file() {
        let order: Vec<String> = ExperimentPlan::load(&plan_path)?
            .cells()?
            .iter()
            .map(|c| format!("runs/{}", c.dir_name()))
            .collect();
        records.sort_by_key(|r| order.iter().position(|d| *d == r.run_dir).unwrap_or(usize::MAX));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub variant: Variant,
    pub igd_mean: f64,
    pub igd_std: f64,
    pub hv_mean: f64,
    pub hv_std: f64,
    pub n_runs: usize,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per `(problem, variant)` in first-appearance order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Variant)> = Vec::new();
    for r in records {
        let k = (r.problem.clone(), r.variant);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|(problem, variant)| {
            let mut cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.problem == problem && r.variant == variant)
                .collect();
            cell.sort_by_key(|r| r.seed);
            if cell.is_empty() {
                warn!("no runs for {problem}/{variant}");
                return None;
            }
            let igd: Vec<f64> = cell.iter().map(|r| r.igd).collect();
            let hv: Vec<f64> = cell.iter().map(|r| r.hv).collect();
            let (igd_mean, igd_std) = mean_std(&igd);
            let (hv_mean, hv_std) = mean_std(&hv);
            Some(SummaryRow {
                problem,
                variant,
                igd_mean,
                igd_std,
                hv_mean,
                hv_std,
                n_runs: cell.len(),
            })
        })
        .collect()
}

/// CSV `problem,variant,igd_mean,igd_std,hv_mean,hv_std,n_runs`.
pub fn write_summary_csv<W: std::io::Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["problem", "variant", "igd_mean", "igd_std", "hv_mean", "hv_std", "n_runs"])?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.variant.to_string(),
            r.igd_mean.to_string(),
            r.igd_std.to_string(),
            r.hv_mean.to_string(),
            r.hv_std.to_string(),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-data flavours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Objective-space scatter per run.
    Front,
    /// Per-element fault statistics of a fault-identification study.
    Boxplot,
    /// Cumulative heuristic selection frequencies over epochs per run.
    HhTrace,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(PlotKind::Front),
            "boxplot" => Ok(PlotKind::Boxplot),
            "hh_trace" => Ok(PlotKind::HhTrace),
            _ => Err(invalid(format!("unknown plot kind `{s}` (front, boxplot, hh_trace)"))),
        }
    }
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

/// Writes plain-CSV plot data under `<dir>/plot` and returns the files.
pub fn export_plotdata(dir: &Path, kind: PlotKind) -> Result<Vec<PathBuf>> {
    let plot = dir.join("plot");
    fs::create_dir_all(&plot)?;
    let mut files = Vec::new();
    match kind {
        PlotKind::Front | PlotKind::HhTrace => {
            let records = load_records(dir)?;
            if records.is_empty() {
                return Err(invalid(format!("no run records under {}", dir.display())));
            }
            for r in &records {
                let run = dir.join(&r.run_dir);
                let name = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                if kind == PlotKind::Front {
                    let archive = ParetoArchive::read_csv(BufReader::new(File::open(run.join("archive.csv"))?))?;
                    let path = plot.join(format!("front_{name}.csv"));
                    crate::problems::write_front_csv(BufWriter::new(File::create(&path)?), &archive.objectives())?;
                    files.push(path);
                } else {
                    if r.variant != Variant::HyperHeuristic {
                        continue;
                    }
                    let path = plot.join(format!("hh_trace_{name}.csv"));
                    write_hh_trace(&run.join("trace.csv"), &path)?;
                    files.push(path);
                }
            }
        }
        PlotKind::Boxplot => {
            let samples = dir.join("samples.csv");
            let (header, rows) = read_rows(&samples)?;
            let n = header.len().saturating_sub(1);
            let pooled = rows
                .iter()
                .map(|r| r[1..].iter().map(|v| v.parse::<f64>()).collect::<std::result::Result<Vec<f64>, _>>())
                .collect::<std::result::Result<Vec<Vec<f64>>, _>>()
                .map_err(|e| invalid(format!("bad sample value: {e}")))?;
            let stats = faultid::solution_statistics(&pooled)?;
            let path = plot.join("boxplot.csv");
            faultid::write_statistics_csv(BufWriter::new(File::create(&path)?), &stats)?;
            files.push(path);
            let long = plot.join("boxplot_samples.csv");
            let mut w = csv::Writer::from_path(&long)?;
            w.write_record(["element", "value"])?;
            for v in &pooled {
                for e in 0..n {
                    w.write_record([(e + 1).to_string(), v[e].to_string()])?;
                }
            }
            w.flush()?;
            files.push(long);
        }
    }
    Ok(files)
}

fn write_hh_trace(trace: &Path, out: &Path) -> Result<()> {
    let (_, rows) = read_rows(trace)?;
    let k = Heuristic::ALL.len();
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["epoch".to_string(), "iter_index".into(), "chosen".into()];
    header.extend((1..=k).map(|i| format!("freq_h{i}")));
    w.write_record(&header)?;
    let mut counts = vec![0usize; k];
    for (e, r) in rows.iter().enumerate() {
        let chosen: usize = r[2].parse().map_err(|_| invalid(format!("bad trace row {e}")))?;
        if chosen == 0 || chosen > k {
            return Err(invalid(format!("heuristic {chosen} out of range in trace")));
        }
        counts[chosen - 1] += 1;
        let mut rec = vec![r[0].clone(), r[1].clone(), r[2].clone()];
        rec.extend(counts.iter().map(|c| (*c as f64 / (e + 1) as f64).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of a fault-identification study.
#[derive(Debug, Clone)]
pub struct FaultStudy {
    pub statistics: Vec<ElementStats>,
    /// Fault vectors of every run's final archive.
    pub pooled: Vec<Vec<Vec<f64>>>,
    pub archives: Vec<ParetoArchive>,
}

impl FaultStudy {
    /// Element numbers (starting at 1) ordered by decreasing pooled mean.
    pub fn ranked_elements(&self) -> Vec<usize> {
        let mut s: Vec<&ElementStats> = self.statistics.iter().collect();
        s.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        s.iter().map(|e| e.element).collect()
    }
}

/// Runs `runs` independent identifications of one case and pools the final
/// archives. Writes statistics, samples and per-run archives when `out_dir`
/// is given.
pub fn run_fault_study(
    case: &CaseConfig,
    runs: usize,
    master_seed: u64,
    workers: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<FaultStudy> {
    if runs == 0 {
        return Err(Error::Config("at least one run required".into()));
    }
    let problem = case.build_problem()?;
    let seeds: Vec<u64> = (0..runs as u64)
        .map(|r| derive_seed(master_seed, problem.name(), Variant::HyperHeuristic, r))
        .collect();
    let results = parallel::map_with_workers(&seeds, workers, |seed| {
        annealer::run(
            &problem,
            AnnealConfig {
                total_iters: case.iters,
                seed: *seed,
                ..AnnealConfig::default()
            },
        )
    });
    let outputs = results.into_iter().collect::<Result<Vec<RunOutput>>>()?;
    let pooled: Vec<Vec<Vec<f64>>> = outputs
        .iter()
        .map(|o| o.archive.members().iter().map(|m| m.x.clone()).collect())
        .collect();
    let flat: Vec<&Vec<f64>> = pooled.iter().flatten().collect();
    let statistics = faultid::solution_statistics(&flat)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        faultid::write_statistics_csv(BufWriter::new(File::create(dir.join("statistics.csv"))?), &statistics)?;
        faultid::write_samples_csv(BufWriter::new(File::create(dir.join("samples.csv"))?), &pooled)?;
        for (i, o) in outputs.iter().enumerate() {
            o.archive
                .write_csv(BufWriter::new(File::create(dir.join(format!("archive_run{i}.csv")))?))?;
        }
    }
    Ok(FaultStudy {
        statistics,
        pooled,
        archives: outputs.into_iter().map(|o| o.archive).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(problem: &str, variant: Variant, igd: f64, hv: f64) -> RunRecord {
        RunRecord {
            problem: problem.into(),
            variant,
            seed: 0,
            run_seed: 0,
            total_iters: 1,
            evaluations: 11,
            igd,
            hv,
            archive_size: 1,
            wall_time_s: 0.0,
            counters: BranchCounters::default(),
            selections: Vec::new(),
            run_dir: String::new(),
            archive: None,
        }
    }

    #[test]
    fn summary_examples() {
        let rows = summarize(&[
            record("DTLZ2", Variant::HyperHeuristic, 0.01, 0.5),
            record("DTLZ2", Variant::HyperHeuristic, 0.03, 0.5),
        ]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].igd_mean - 0.02).abs() < 1e-15);
        assert!((rows[0].igd_std - 0.014_142_135_623_730_95).abs() < 1e-12);
        assert_eq!(rows[0].hv_std, 0.0);
        assert_eq!(rows[0].n_runs, 2);
        let mut many = Vec::new();
        for p in ["DTLZ1", "UF1", "UF2"] {
            for v in Variant::all() {
                many.push(record(p, v, 0.1, 0.1));
            }
        }
        let rows = summarize(&many);
        assert_eq!(rows.len(), 15);
        assert!(rows.iter().all(|r| r.igd_std == 0.0));
    }

    #[test]
    fn variants_round_trip() {
        for v in Variant::all() {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("h5".parse::<Variant>().is_err());
        assert!("x".parse::<Variant>().is_err());
        let c = Variant::Fixed(3).configure(AnnealConfig::default()).unwrap();
        assert_eq!(c.fixed_heuristic, Some(Heuristic::MaxHvContribution));
        assert!(!c.hh_enabled);
        c.validate().unwrap();
    }

    #[test]
    fn plan_parsing_and_validation() {
        let plan = ExperimentPlan::from_toml(
            "problems = [\"DTLZ2\", \"UF4\"]\nvariants = [\"hh\", \"h2\"]\nseeds = [1, 2, 3]\noutput_dir = \"out\"\n[budgets]\nUF4 = 5000\n",
        )
        .unwrap();
        assert_eq!(plan.cells().unwrap().len(), 12);
        assert_eq!(plan.budget("UF4".parse().unwrap()), 5000);
        assert_eq!(plan.budget("DTLZ2".parse().unwrap()), 20_000);
        assert_eq!(plan.budget("DTLZ5".parse().unwrap()), 30_000);
        assert_eq!(plan.budget("UF1".parse().unwrap()), 100_000);
        let again = ExperimentPlan::from_toml(&plan.to_toml().unwrap()).unwrap();
        assert_eq!(again, plan);
        for bad in [
            "problems = [\"DTLZ2\"]\nseeds = []\noutput_dir = \"o\"\n",
            "problems = [\"DTLZ2\"]\nseeds = [1, 1]\noutput_dir = \"o\"\n",
            "problems = [\"ZDT1\"]\noutput_dir = \"o\"\n",
            "problems = [\"DTLZ2\"]\nvariants = [\"h9\"]\noutput_dir = \"o\"\n",
            "problems = [\"DTLZ2\"]\noutput_dir = \"o\"\n[budgets]\nDTLZ2 = 0\n",
        ] {
            assert!(ExperimentPlan::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn seeds_are_distinct_per_cell() {
        let a = derive_seed(0, "DTLZ2", Variant::HyperHeuristic, 1);
        assert_eq!(a, derive_seed(0, "DTLZ2", Variant::HyperHeuristic, 1));
        assert_ne!(a, derive_seed(1, "DTLZ2", Variant::HyperHeuristic, 1));
        assert_ne!(a, derive_seed(0, "DTLZ1", Variant::HyperHeuristic, 1));
        assert_ne!(a, derive_seed(0, "DTLZ2", Variant::Fixed(1), 1));
        assert_ne!(a, derive_seed(0, "DTLZ2", Variant::HyperHeuristic, 2));
    }

    #[test]
    fn scoring_of_the_true_front() {
        let s = Scoring::new("UF1".parse().unwrap(), 1000, 10_000).unwrap();
        assert!(s.igd(&s.front).unwrap() < 1e-12);
        // the undominated part of [0, 1.1]^2 is the area under 1 - sqrt(x)
        let exact = (1.21 - 1.0 / 3.0) / 1.21;
        assert!((s.hv_true - exact).abs() < 1e-3, "{} vs {exact}", s.hv_true);
        let outside = vec![vec![5.0, 5.0]];
        assert_eq!(s.hv(&outside, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), 0.0);
    }

    #[test]
    fn plot_kinds_parse() {
        assert_eq!("front".parse::<PlotKind>().unwrap(), PlotKind::Front);
        assert_eq!("hh_trace".parse::<PlotKind>().unwrap(), PlotKind::HhTrace);
        assert_eq!("boxplot".parse::<PlotKind>().unwrap(), PlotKind::Boxplot);
        assert!("pie".parse::<PlotKind>().is_err());
    }
}
