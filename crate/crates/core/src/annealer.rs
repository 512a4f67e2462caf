//! The re-seeding multi-objective annealer.
//!
//! Each iteration perturbs the current solution and routes the neighbour by
//! its Pareto relation to the archive:
//!
//! * it dominates some members: they are replaced and it becomes current;
//! * it is non-dominated with the archive: it is stored and becomes current;
//! * it is dominated by the archive *and* by the current solution: the
//!   current solution is re-seeded from the archive by a low-level
//!   heuristic (chosen by the hyper-heuristic, or fixed for ablations);
//! * otherwise it may still become current by annealing acceptance driven
//!   by the mean domination amount of its dominators.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hyperheuristic::{
    credit_terms, EpochSnapshot, HeuristicPool, ObjectiveKey, SelectionTrace, TraceRow, DEFAULT_FORGETTING,
    DEFAULT_P_MIN,
};
use crate::metrics::{self, CoverageSampler, REFERENCE_SCALE};
use crate::pareto::{domination_amount, dominates, ObjectiveRanges, ParetoArchive, Solution};
use crate::problems::Problem;

/// Random solutions evaluated to seed the archive.
pub const INIT_SAMPLES: usize = 10;

/// The four re-seed rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    /// Dominator of the new solution with the smallest domination amount.
    MinDomination,
    /// Dominator of the new solution with the largest domination amount.
    MaxDomination,
    /// Archive member with the largest exclusive hypervolume.
    MaxHvContribution,
    /// Archive member with the largest crowding distance.
    MaxCrowding,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::MinDomination,
        Heuristic::MaxDomination,
        Heuristic::MaxHvContribution,
        Heuristic::MaxCrowding,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| invalid(format!("heuristic index {i} out of range 0..4")))
    }

    /// 1-based number used on the command line and in file names.
    pub fn number(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.number())
    }
}

/// Annealing and hyper-heuristic parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub t_max: f64,
    pub t_min: f64,
    pub cool_alpha: f64,
    pub total_iters: usize,
    /// Gaussian step deviation as a fraction of each variable's range.
    pub move_scale: f64,
    pub mc_samples_credit: usize,
    pub seed: u64,
    pub hh_enabled: bool,
    pub fixed_heuristic: Option<Heuristic>,
    pub p_min: f64,
    pub forgetting: f64,
    /// Hypervolume fraction of the true front, normalizing credit. 1.0 when
    /// the front is unknown.
    pub hv_true: f64,
    pub archive_capacity: Option<usize>,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            t_max: 100.0,
            t_min: 1e-5,
            cool_alpha: 0.8,
            total_iters: 20_000,
            move_scale: 0.1,
            mc_samples_credit: metrics::MC_SAMPLES_CREDIT,
            seed: 0,
            hh_enabled: true,
            fixed_heuristic: None,
            p_min: DEFAULT_P_MIN,
            forgetting: DEFAULT_FORGETTING,
            hv_true: 1.0,
            archive_capacity: None,
        }
    }
}

impl AnnealConfig {
    /// Configuration for the ablation that always re-seeds with `h`.
    pub fn fixed(h: Heuristic) -> Self {
        Self {
            hh_enabled: false,
            fixed_heuristic: Some(h),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return bad(format!("need 0 < t_min < t_max, got {} and {}", self.t_min, self.t_max));
        }
        if !(self.cool_alpha > 0.0 && self.cool_alpha < 1.0) {
            return bad(format!("cooling rate must lie in (0, 1), got {}", self.cool_alpha));
        }
        if !(self.move_scale >= 0.0 && self.move_scale.is_finite()) {
            return bad(format!("move scale must be non-negative, got {}", self.move_scale));
        }
        if self.mc_samples_credit < 1000 {
            return bad("credit Monte-Carlo needs at least 1000 samples".into());
        }
        if !(self.hv_true > 0.0) {
            return bad("true-front hypervolume must be positive".into());
        }
        match (self.hh_enabled, self.fixed_heuristic) {
            (true, Some(_)) => return bad("a fixed heuristic excludes the hyper-heuristic".into()),
            (false, None) => return bad("without the hyper-heuristic a fixed heuristic is required".into()),
            _ => {}
        }
        if self.archive_capacity == Some(0) {
            return bad("archive capacity must be positive".into());
        }
        HeuristicPool::new(Heuristic::ALL.len(), self.p_min, self.forgetting)
            .map_err(|e| Error::Config(e.to_string()))?;
        let schedule = cooling_schedule_levels(self)?;
        if self.total_iters < schedule {
            return bad(format!(
                "total_iters = {} is below the {} temperature levels",
                self.total_iters, schedule
            ));
        }
        Ok(())
    }

    /// Temperature at level `k`.
    pub fn temperature(&self, level: usize) -> f64 {
        self.cool_alpha.powi(level as i32) * self.t_max
    }
}

/// Number of temperature levels and iterations spent at each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: usize,
    pub iters_per_level: usize,
    /// Extra iterations spent at the final level.
    pub remainder: usize,
}

fn cooling_schedule_levels(config: &AnnealConfig) -> Result<usize> {
    let mut k = 0usize;
    while config.temperature(k) > config.t_min {
        k += 1;
        if k > 1_000_000 {
            return Err(Error::Config("cooling schedule does not reach t_min".into()));
        }
    }
    Ok(k)
}

/// Geometric cooling `T_k = alpha^k T_max` over the levels with `T_k > T_min`,
/// splitting the iteration budget evenly.
pub fn cooling_schedule(config: &AnnealConfig) -> Result<Schedule> {
    config.validate()?;
    let levels = cooling_schedule_levels(config)?;
    Ok(Schedule {
        levels,
        iters_per_level: config.total_iters / levels,
        remainder: config.total_iters % levels,
    })
}

/// Copy of `current` with one uniformly chosen variable moved by a Gaussian
/// step of deviation `move_scale * range`, clipped to its bounds.
pub fn propose_neighbor<P, R>(current: &Solution, problem: &P, move_scale: f64, rng: &mut R) -> Result<Solution>
where
    P: Problem + ?Sized,
    R: Rng + ?Sized,
{
    let bounds = problem.bounds();
    let mut x = current.x.clone();
    let j = rng.random_range(0..x.len());
    let (lo, hi) = bounds[j];
    let sigma = move_scale * (hi - lo);
    let step = if sigma > 0.0 {
        Normal::new(0.0, sigma)
            .map_err(|e| invalid(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    x[j] = (x[j] + step).clamp(lo, hi);
    let f = problem.evaluate(&x)?;
    Ok(Solution::new(x, f))
}

#[inline]
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + z.exp())
}

/// Probability of adopting a dominated new solution, given the mean
/// domination amount of its dominators.
pub fn sa_acceptance_probability(mean_domination: f64, temperature: f64) -> f64 {
    logistic(mean_domination / temperature)
}

/// Probability of re-seeding the current solution from the selected archive
/// member. Temperatures below 1 are floored at 1.
pub fn reseed_probability(domination: f64, temperature: f64) -> f64 {
    logistic(-domination / temperature.max(1.0))
}

/// Annealing acceptance of `new` against its dominating archive members.
pub fn sa_accept<R: Rng + ?Sized>(
    new: &Solution,
    dominators: &[&Solution],
    ranges: &ObjectiveRanges,
    temperature: f64,
    rng: &mut R,
) -> Result<bool> {
    if dominators.is_empty() {
        return Err(invalid("annealing acceptance needs at least one dominator"));
    }
    let mut total = 0.0;
    for d in dominators {
        total += domination_amount(&d.f, &new.f, ranges)?;
    }
    let p = sa_acceptance_probability(total / dominators.len() as f64, temperature);
    Ok(p > rng.random::<f64>())
}

/// Ranges over the archive together with `new`.
pub fn ranges_with(archive: &ParetoArchive, new: &Solution) -> Result<ObjectiveRanges> {
    ObjectiveRanges::from_points(archive.members().iter().map(|m| m.f.as_slice()).chain([new.f.as_slice()]))
}

fn dominator_indices(archive: &ParetoArchive, new: &Solution) -> Vec<usize> {
    archive
        .members()
        .iter()
        .enumerate()
        .filter(|(_, m)| dominates(&m.f, &new.f))
        .map(|(i, _)| i)
        .collect()
}

fn extreme_domination(
    archive: &ParetoArchive,
    dominators: &[usize],
    new: &Solution,
    ranges: &ObjectiveRanges,
    largest: bool,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in dominators {
        let d = domination_amount(&archive.members()[i].f, &new.f, ranges)?;
        let better = match best {
            None => true,
            Some((_, b)) => (largest && d > b) || (!largest && d < b),
        };
        if better {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| invalid("no archive member dominates the new solution"))
}

/// Index of the dominator of `new` with the smallest domination amount.
/// Ties go to the lowest archive index.
pub fn heuristic_min_dom(archive: &ParetoArchive, new: &Solution, ranges: &ObjectiveRanges) -> Result<usize> {
    extreme_domination(archive, &dominator_indices(archive, new), new, ranges, false)
}

/// Index of the dominator of `new` with the largest domination amount.
pub fn heuristic_max_dom(archive: &ParetoArchive, new: &Solution, ranges: &ObjectiveRanges) -> Result<usize> {
    extreme_domination(archive, &dominator_indices(archive, new), new, ranges, true)
}

/// Index of the member with the largest exclusive hypervolume. The
/// reference point and objectives are taken as given (already shifted so
/// the box starts at the origin).
pub fn heuristic_max_hv_contrib<R: Rng + ?Sized>(
    archive: &ParetoArchive,
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<usize> {
    if archive.is_empty() {
        return Err(Error::InvalidState("empty archive".into()));
    }
    let front: Vec<&[f64]> = archive.members().iter().map(|m| m.f.as_slice()).collect();
    max_contribution(&front, reference, samples, rng)
}

fn max_contribution<P: AsRef<[f64]>, R: Rng + ?Sized>(
    front: &[P],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<usize> {
    let contrib = metrics::hv_contributions(front, reference, samples, rng)?;
    Ok(argmax_first(&contrib))
}

/// Index of the member with the largest crowding distance; ties among
/// boundary (infinite) members are broken uniformly at random.
pub fn heuristic_max_crowding<R: Rng + ?Sized>(archive: &ParetoArchive, rng: &mut R) -> Result<usize> {
    if archive.is_empty() {
        return Err(Error::InvalidState("empty archive".into()));
    }
    let front: Vec<&[f64]> = archive.members().iter().map(|m| m.f.as_slice()).collect();
    let cd = metrics::crowding_distances(&front);
    let infinite: Vec<usize> = (0..cd.len()).filter(|&i| cd[i].is_infinite()).collect();
    if infinite.is_empty() {
        Ok(argmax_first(&cd))
    } else {
        Ok(infinite[rng.random_range(0..infinite.len())])
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Which branch of the state machine an iteration took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Update,
    NonDominated,
    /// Re-seed branch; `adopted` tells whether the selected archive member
    /// became current (otherwise annealing acceptance was tried on `new`).
    Reseed { heuristic: Heuristic, adopted: bool },
    Anneal { accepted: bool },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounters {
    pub update: usize,
    pub non_dominated: usize,
    pub reseed: usize,
    pub reseed_adopted: usize,
    pub anneal_accepted: usize,
    pub anneal_rejected: usize,
}

impl BranchCounters {
    pub fn total(&self) -> usize {
        self.update + self.non_dominated + self.reseed + self.anneal_accepted + self.anneal_rejected
    }

    fn record(&mut self, b: Branch) {
        match b {
            Branch::Update => self.update += 1,
            Branch::NonDominated => self.non_dominated += 1,
            Branch::Reseed { adopted, .. } => {
                self.reseed += 1;
                if adopted {
                    self.reseed_adopted += 1;
                }
            }
            Branch::Anneal { accepted: true } => self.anneal_accepted += 1,
            Branch::Anneal { accepted: false } => self.anneal_rejected += 1,
        }
    }
}

/// Archive state at one temperature level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub iter: usize,
    pub hv: f64,
    pub archive_size: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
}

impl MetricSeries {
    /// CSV `epoch,iter,hv,archive_size,temperature`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "iter", "hv", "archive_size", "temperature"])?;
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                r.iter.to_string(),
                r.hv.to_string(),
                r.archive_size.to_string(),
                r.temperature.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a finished run returns.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub archive: ParetoArchive,
    pub trace: SelectionTrace,
    pub metrics: MetricSeries,
    pub counters: BranchCounters,
    pub evaluations: usize,
}

struct PreviousEpoch {
    iter_index: usize,
    version: u64,
    front: Vec<Vec<f64>>,
    /// `(generation, covered samples)` of the coverage sampler.
    coverage: Option<(u64, usize)>,
}

/// Incremental Monte-Carlo coverage for three or more objectives.
struct Coverage {
    sampler: CoverageSampler,
    /// Archive version the sampler was last synced to.
    version: u64,
    /// Bumped on every rebuild (new reference point, new samples).
    generation: u64,
}

/// Mutable state of one annealing run over a borrowed problem.
pub struct Annealer<'p, P: Problem + ?Sized> {
    problem: &'p P,
    config: AnnealConfig,
    schedule: Schedule,
    origin: Vec<f64>,
    archive: ParetoArchive,
    current: Solution,
    temperature: f64,
    iteration: usize,
    pool: HeuristicPool,
    rng: ChaCha8Rng,
    running_max: Vec<f64>,
    previous: Option<PreviousEpoch>,
    /// Bumped whenever the archive changes.
    version: u64,
    coverage: Option<Coverage>,
    generation: u64,
    trace: SelectionTrace,
    metrics: MetricSeries,
    counters: BranchCounters,
    evaluations: usize,
}

impl<'p, P: Problem + ?Sized> Annealer<'p, P> {
    /// Validates the configuration and seeds the archive with the
    /// non-dominated subset of [`INIT_SAMPLES`] random solutions.
    pub fn new(problem: &'p P, config: AnnealConfig) -> Result<Self> {
        let schedule = cooling_schedule(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut archive = match config.archive_capacity {
            Some(c) => ParetoArchive::with_capacity_limit(c)?,
            None => ParetoArchive::new(),
        };
        for _ in 0..INIT_SAMPLES {
            let x: Vec<f64> = problem
                .bounds()
                .iter()
                .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect();
            let f = problem.evaluate(&x)?;
            archive.insert(Solution::new(x, f));
        }
        let current = archive.members()[rng.random_range(0..archive.len())].clone();
        let mut me = Self::from_parts(problem, config, schedule, archive, current, rng)?;
        me.evaluations = INIT_SAMPLES;
        Ok(me)
    }

    /// Starts from a given archive and current solution.
    pub fn with_state(problem: &'p P, config: AnnealConfig, archive: ParetoArchive, current: Solution) -> Result<Self> {
        let schedule = cooling_schedule(&config)?;
        if archive.is_empty() {
            return Err(Error::InvalidState("empty archive".into()));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::from_parts(problem, config, schedule, archive, current, rng)
    }

    fn from_parts(
        problem: &'p P,
        config: AnnealConfig,
        schedule: Schedule,
        archive: ParetoArchive,
        current: Solution,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let origin = problem.objective_origin();
        let mut running_max = origin.clone();
        for m in archive.members() {
            for (r, v) in running_max.iter_mut().zip(&m.f) {
                *r = r.max(*v);
            }
        }
        let pool = HeuristicPool::new(Heuristic::ALL.len(), config.p_min, config.forgetting)?;
        Ok(Self {
            problem,
            temperature: config.t_max,
            config,
            schedule,
            origin,
            archive,
            current,
            iteration: 0,
            pool,
            rng,
            running_max,
            previous: None,
            version: 0,
            coverage: None,
            generation: 0,
            trace: SelectionTrace::default(),
            metrics: MetricSeries::default(),
            counters: BranchCounters::default(),
            evaluations: 0,
        })
    }

    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    pub fn current(&self) -> &Solution {
        &self.current
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn set_temperature(&mut self, t: f64) {
        self.temperature = t;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn pool(&self) -> &HeuristicPool {
        &self.pool
    }

    pub fn trace(&self) -> &SelectionTrace {
        &self.trace
    }

    pub fn counters(&self) -> BranchCounters {
        self.counters
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    fn note_member(&mut self, f: &[f64]) {
        for (r, v) in self.running_max.iter_mut().zip(f) {
            *r = r.max(*v);
        }
    }

    /// Reference point for in-run hypervolumes, relative to the origin.
    fn shifted_reference(&self) -> Vec<f64> {
        self.running_max
            .iter()
            .zip(&self.origin)
            .map(|(m, o)| (REFERENCE_SCALE * (m - o)).max(1e-12))
            .collect()
    }

    fn shifted_front(&self, front: impl IntoIterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
        front
            .into_iter()
            .map(|f| f.iter().zip(&self.origin).map(|(v, o)| v - o).collect())
            .collect()
    }

    /// Coverage sampler synced to the archive, rebuilt whenever the
    /// reference point has moved.
    fn coverage(&mut self) -> Result<&Coverage> {
        let reference = self.shifted_reference();
        let stale = self
            .coverage
            .as_ref()
            .is_none_or(|c| c.sampler.reference() != reference.as_slice());
        if stale {
            self.generation += 1;
            self.coverage = Some(Coverage {
                sampler: CoverageSampler::new(&reference, self.config.mc_samples_credit, &mut self.rng)?,
                version: u64::MAX,
                generation: self.generation,
            });
        }
        let front = match &self.coverage {
            Some(c) if c.version == self.version => None,
            _ => Some(self.shifted_front(self.archive.objectives())),
        };
        let version = self.version;
        let cov = self
            .coverage
            .as_mut()
            .ok_or_else(|| Error::InvalidState("coverage sampler missing".into()))?;
        if let Some(front) = front {
            cov.sampler.sync(&front)?;
            cov.version = version;
        }
        Ok(cov)
    }

    /// Current archive hypervolume with the in-run reference point.
    pub fn archive_hv(&mut self) -> Result<f64> {
        if self.problem.n_objs() == 2 {
            let reference = self.shifted_reference();
            let front = self.shifted_front(self.archive.objectives());
            metrics::hv_exact_2d(&front, &reference)
        } else {
            Ok(self.coverage()?.sampler.hypervolume())
        }
    }

    /// Runs one iteration at the current temperature.
    pub fn step(&mut self) -> Result<Branch> {
        let new = propose_neighbor(&self.current, self.problem, self.config.move_scale, &mut self.rng)?;
        self.evaluations += 1;
        self.iteration += 1;
        let class = self.archive.classify(&new.f);
        let branch = if !class.dominated.is_empty() {
            self.version += 1;
            self.note_member(&new.f);
            self.archive.insert_classified(new.clone(), &class);
            self.current = new;
            Branch::Update
        } else if class.dominators.is_empty() {
            self.version += 1;
            self.note_member(&new.f);
            self.archive.insert_classified(new.clone(), &class);
            self.current = new;
            Branch::NonDominated
        } else if dominates(&self.current.f, &new.f) {
            self.reseed(new, &class.dominators)?
        } else {
            let ranges = ranges_with(&self.archive, &new)?;
            let doms: Vec<&Solution> = class.dominators.iter().map(|&i| &self.archive.members()[i]).collect();
            let accepted = sa_accept(&new, &doms, &ranges, self.temperature, &mut self.rng)?;
            if accepted {
                self.current = new;
            }
            Branch::Anneal { accepted }
        };
        self.counters.record(branch);
        Ok(branch)
    }

    /// Credits the previously chosen heuristic with the front progress since
    /// the last selection, then draws the next one.
    fn choose_heuristic(&mut self) -> Result<Heuristic> {
        if let Some(h) = self.config.fixed_heuristic {
            return Ok(h);
        }
        let front = self.archive.objectives();
        let coverage = if front[0].len() == 2 {
            None
        } else {
            let c = self.coverage()?;
            Some((c.generation, c.sampler.covered(), c.sampler.n_samples()))
        };
        let credit = match self.previous.take() {
            Some(prev) if prev.version == self.version => {
                // unchanged archive: no hypervolume gain and no new members
                let ids: Vec<ObjectiveKey> = front.iter().map(|v| ObjectiveKey::of(v)).collect();
                let snap = |iter_index| EpochSnapshot {
                    iter_index,
                    hv: 0.0,
                    member_ids: ids.clone(),
                    total_iters: self.config.total_iters,
                };
                let c = credit_terms(&snap(prev.iter_index), &snap(self.iteration), self.config.hv_true)?;
                self.pool.update_quality(c.value())?;
                Some(c)
            }
            Some(prev) => {
                let (hv_prev, hv_curr) = match (prev.coverage, coverage) {
                    (_, None) => {
                        // one reference point for both fronts so the increment is meaningful
                        let reference = self.shifted_reference();
                        (
                            metrics::hv_exact_2d(&self.shifted_front(prev.front.iter().cloned()), &reference)?,
                            metrics::hv_exact_2d(&self.shifted_front(front.iter().cloned()), &reference)?,
                        )
                    }
                    (Some((g0, c0)), Some((g1, c1, n))) if g0 == g1 => (c0 as f64 / n as f64, c1 as f64 / n as f64),
                    _ => {
                        let reference = self.shifted_reference();
                        let delta = metrics::hv_monte_carlo_delta(
                            &self.shifted_front(prev.front.iter().cloned()),
                            &self.shifted_front(front.iter().cloned()),
                            &reference,
                            self.config.mc_samples_credit,
                            &mut self.rng,
                        )?;
                        (0.0, delta)
                    }
                };
                let keys = |f: &[Vec<f64>]| f.iter().map(|v| ObjectiveKey::of(v)).collect::<Vec<_>>();
                let prev_snap = EpochSnapshot {
                    iter_index: prev.iter_index,
                    hv: hv_prev,
                    member_ids: keys(&prev.front),
                    total_iters: self.config.total_iters,
                };
                let curr_snap = EpochSnapshot {
                    iter_index: self.iteration,
                    hv: hv_curr,
                    member_ids: keys(&front),
                    total_iters: self.config.total_iters,
                };
                let c = credit_terms(&prev_snap, &curr_snap, self.config.hv_true)?;
                self.pool.update_quality(c.value())?;
                Some(c)
            }
            None => None,
        };
        let weights = self.pool.selection_weights();
        let chosen = self.pool.select(&mut self.rng);
        self.trace.rows.push(TraceRow {
            epoch: self.trace.len(),
            iter_index: self.iteration,
            chosen,
            credit,
            quality: self.pool.qualities().to_vec(),
            weights,
        });
        self.previous = Some(PreviousEpoch {
            iter_index: self.iteration,
            version: self.version,
            front,
            coverage: coverage.map(|(g, c, _)| (g, c)),
        });
        Heuristic::from_index(chosen)
    }

    fn reseed(&mut self, new: Solution, dominators: &[usize]) -> Result<Branch> {
        if dominators.is_empty() || !dominates(&self.current.f, &new.f) {
            return Err(Error::InvalidState(
                "re-seed requires the new solution to be dominated by the archive and the current solution".into(),
            ));
        }
        if self.archive.is_empty() {
            return Err(Error::InvalidState("re-seed from an empty archive".into()));
        }
        let heuristic = self.choose_heuristic()?;
        let ranges = ranges_with(&self.archive, &new)?;
        let selected = match heuristic {
            Heuristic::MinDomination => extreme_domination(&self.archive, dominators, &new, &ranges, false)?,
            Heuristic::MaxDomination => extreme_domination(&self.archive, dominators, &new, &ranges, true)?,
            Heuristic::MaxHvContribution => {
                if self.problem.n_objs() == 2 {
                    let reference = self.shifted_reference();
                    let front = self.shifted_front(self.archive.objectives());
                    max_contribution(&front, &reference, 0, &mut self.rng)?
                } else {
                    let front = self.shifted_front(self.archive.objectives());
                    let counts = self.coverage()?.sampler.exclusive_counts(&front);
                    let as_f64: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
                    argmax_first(&as_f64)
                }
            }
            Heuristic::MaxCrowding => heuristic_max_crowding(&self.archive, &mut self.rng)?,
        };
        let chosen = self.archive.members()[selected].clone();
        let d = domination_amount(&chosen.f, &new.f, &ranges)?;
        let adopted = reseed_probability(d, self.temperature) > self.rng.random::<f64>();
        if adopted {
            self.current = chosen;
        } else {
            let doms: Vec<&Solution> = dominators.iter().map(|&i| &self.archive.members()[i]).collect();
            if sa_accept(&new, &doms, &ranges, self.temperature, &mut self.rng)? {
                self.current = new;
            }
        }
        Ok(Branch::Reseed { heuristic, adopted })
    }

    fn record_level(&mut self, level: usize) -> Result<()> {
        let hv = self.archive_hv()?;
        self.metrics.rows.push(MetricRow {
            epoch: level,
            iter: self.iteration,
            hv,
            archive_size: self.archive.len(),
            temperature: self.temperature,
        });
        Ok(())
    }

    /// Runs the full cooling schedule.
    pub fn run(mut self) -> Result<RunOutput> {
        let Schedule {
            levels,
            iters_per_level,
            remainder,
        } = self.schedule;
        for level in 0..levels {
            self.temperature = self.config.temperature(level);
            let iters = iters_per_level + if level + 1 == levels { remainder } else { 0 };
            for _ in 0..iters {
                self.step()?;
            }
            self.record_level(level)?;
        }
        Ok(RunOutput {
            archive: self.archive,
            trace: self.trace,
            metrics: self.metrics,
            counters: self.counters,
            evaluations: self.evaluations,
        })
    }
}

/// Runs the annealer on `problem` from a random initial archive.
pub fn run<P: Problem + ?Sized>(problem: &P, config: AnnealConfig) -> Result<RunOutput> {
    Annealer::new(problem, config)?.run()
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches(['h', 'H']);
        let n: usize = t.parse().map_err(|_| invalid(format!("unknown heuristic `{s}`")))?;
        if n == 0 {
            return Err(invalid("heuristics are numbered from 1"));
        }
        Self::from_index(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Benchmark;

    struct Toy {
        bounds: Vec<(f64, f64)>,
        f: fn(&[f64]) -> Vec<f64>,
    }

    impl Problem for Toy {
        fn name(&self) -> &str {
            "toy"
        }
        fn n_vars(&self) -> usize {
            self.bounds.len()
        }
        fn n_objs(&self) -> usize {
            2
        }
        fn bounds(&self) -> &[(f64, f64)] {
            &self.bounds
        }
        fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok((self.f)(x))
        }
    }

    fn identity() -> Toy {
        Toy {
            bounds: vec![(0.0, 1.0); 2],
            f: |x| x.to_vec(),
        }
    }

    fn archive_of(points: &[[f64; 2]]) -> ParetoArchive {
        let mut a = ParetoArchive::new();
        for p in points {
            a.insert(Solution::new(p.to_vec(), p.to_vec()));
        }
        assert_eq!(a.len(), points.len());
        a
    }

    fn small(seed: u64) -> AnnealConfig {
        AnnealConfig {
            total_iters: 2000,
            seed,
            ..AnnealConfig::default()
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn schedule_examples() {
        let s = cooling_schedule(&AnnealConfig::default()).unwrap();
        assert_eq!(s, Schedule { levels: 73, iters_per_level: 273, remainder: 71 });
        let cfg = AnnealConfig::default();
        assert!(cfg.temperature(72) > cfg.t_min && cfg.temperature(73) <= cfg.t_min);
        for bad in [
            AnnealConfig { cool_alpha: 1.0, ..AnnealConfig::default() },
            AnnealConfig { total_iters: 0, ..AnnealConfig::default() },
            AnnealConfig { total_iters: 72, ..AnnealConfig::default() },
            AnnealConfig { t_min: 200.0, ..AnnealConfig::default() },
            AnnealConfig { fixed_heuristic: Some(Heuristic::MaxCrowding), ..AnnealConfig::default() },
            AnnealConfig { hh_enabled: false, ..AnnealConfig::default() },
        ] {
            assert!(matches!(cooling_schedule(&bad), Err(Error::Config(_))), "{bad:?}");
        }
        assert!(cooling_schedule(&AnnealConfig { total_iters: 73, ..AnnealConfig::default() }).is_ok());
    }

    #[test]
    fn temperature_strictly_decreases() {
        let cfg = AnnealConfig::default();
        for k in 0..72 {
            assert!(cfg.temperature(k + 1) < cfg.temperature(k));
        }
        assert_eq!(cfg.temperature(0), 100.0);
    }

    #[test]
    fn neighbor_moves_one_clipped_coordinate() {
        let p = Benchmark::by_name("DTLZ2").unwrap();
        let x = vec![0.5; 7];
        let cur = Solution::new(x.clone(), p.evaluate(&x).unwrap());
        let mut r = rng(1);
        assert_eq!(propose_neighbor(&cur, &p, 0.0, &mut r).unwrap(), cur);
        for _ in 0..10_000 {
            let n = propose_neighbor(&cur, &p, 0.1, &mut r).unwrap();
            assert_eq!(n.x.iter().zip(&cur.x).filter(|(a, b)| a != b).count(), 1);
            assert_eq!(n.f, p.evaluate(&n.x).unwrap());
        }
        let low = Solution::new(vec![0.0; 7], p.evaluate(&[0.0; 7]).unwrap());
        for _ in 0..1000 {
            let n = propose_neighbor(&low, &p, 0.5, &mut r).unwrap();
            assert!(n.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn acceptance_probability_examples() {
        assert_eq!(sa_acceptance_probability(0.0, 3.0), 0.5);
        assert_eq!(reseed_probability(0.0, 1e-5), 0.5);
        assert!((sa_acceptance_probability(0.09, 100.0) - 0.499_775).abs() < 1e-6);
        assert!((reseed_probability(0.09, 100.0) - 0.500_225).abs() < 1e-6);
        assert!((reseed_probability(2.0, 1e-5) - 0.880_797).abs() < 1e-6);
        assert!(sa_acceptance_probability(5.0, 1e-3) < 1e-100);
        for d in [1e-6, 0.1, 1.0, 10.0] {
            for t in [1e-3, 1.0, 100.0] {
                let p = sa_acceptance_probability(d, t);
                assert!(p > 0.0 && p < 0.5 || p == 0.0 && d / t > 700.0);
                let q = reseed_probability(d, t);
                assert!(q > 0.5 && q < 1.0 || q == 1.0 && d > 30.0);
            }
        }
    }

    #[test]
    fn sa_accept_needs_dominators() {
        let new = Solution::new(vec![0.0], vec![1.0, 1.0]);
        let ranges = ObjectiveRanges::from_raw(vec![1.0, 1.0]);
        assert!(sa_accept(&new, &[], &ranges, 1.0, &mut rng(0)).is_err());
        let d = Solution::new(vec![0.0], vec![1.0, 0.0]);
        // only the second objective differs: amount 1, probability 1/(1+e)
        let hits = (0..4000)
            .filter(|i| sa_accept(&new, &[&d], &ranges, 1.0, &mut rng(*i)).unwrap())
            .count();
        assert!((950..1200).contains(&hits), "{hits}");
    }

    #[test]
    fn domination_heuristic_examples() {
        let new = Solution::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        let ranges = ObjectiveRanges::from_raw(vec![1.0, 1.0]);
        // domination amounts 0.5, 0.02, 0.3
        let a = archive_of(&[[0.0, 0.5], [0.98, 0.0], [0.5, 0.4]]);
        assert_eq!(heuristic_min_dom(&a, &new, &ranges).unwrap(), 1);
        assert_eq!(heuristic_max_dom(&a, &new, &ranges).unwrap(), 0);
        let single = archive_of(&[[0.3, 0.3]]);
        assert_eq!(heuristic_min_dom(&single, &new, &ranges).unwrap(), 0);
        assert_eq!(heuristic_max_dom(&single, &new, &ranges).unwrap(), 0);
        let tied = archive_of(&[[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(heuristic_min_dom(&tied, &new, &ranges).unwrap(), 0);
        assert_eq!(heuristic_max_dom(&tied, &new, &ranges).unwrap(), 0);
        let none = Solution::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(heuristic_min_dom(&a, &none, &ranges).is_err());
    }

    #[test]
    fn only_dominators_are_candidates() {
        let new = Solution::new(vec![0.6, 0.6], vec![0.6, 0.6]);
        let ranges = ObjectiveRanges::from_raw(vec![1.0, 1.0]);
        // the first member does not dominate new despite its large magnitude
        let a = archive_of(&[[0.0, 0.9], [0.5, 0.5], [0.55, 0.1]]);
        assert_eq!(heuristic_max_dom(&a, &new, &ranges).unwrap(), 2);
        assert_eq!(heuristic_min_dom(&a, &new, &ranges).unwrap(), 1);
    }

    #[test]
    fn hv_contribution_heuristic_examples() {
        let sym = archive_of(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(heuristic_max_hv_contrib(&sym, &[2.0, 2.0], 10_000, &mut rng(0)).unwrap(), 0);
        let pts = [[0.0, 3.0], [1.0, 1.0], [3.0, 0.0]];
        let a = archive_of(&pts);
        let oracle = metrics::hv_contributions(&pts, &[4.0, 4.0], 0, &mut rng(0)).unwrap();
        assert_eq!(oracle, vec![1.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0]);
        assert_eq!(heuristic_max_hv_contrib(&a, &[4.0, 4.0], 10_000, &mut rng(0)).unwrap(), 1);
        let single = archive_of(&[[0.2, 0.2]]);
        assert_eq!(heuristic_max_hv_contrib(&single, &[1.0, 1.0], 10_000, &mut rng(0)).unwrap(), 0);
        assert!(heuristic_max_hv_contrib(&ParetoArchive::new(), &[1.0, 1.0], 10_000, &mut rng(0)).is_err());
    }

    #[test]
    fn crowding_heuristic_examples() {
        let a = archive_of(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]);
        let mut seen = [false; 3];
        for s in 0..200 {
            seen[heuristic_max_crowding(&a, &mut rng(s)).unwrap()] = true;
        }
        assert_eq!(seen, [true, false, true]);
        let line = archive_of(&[[0.0, 4.0], [1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [4.0, 0.0]]);
        for s in 0..50 {
            let i = heuristic_max_crowding(&line, &mut rng(s)).unwrap();
            assert!(i == 0 || i == 4);
        }
        let single = archive_of(&[[0.5, 0.5]]);
        assert_eq!(heuristic_max_crowding(&single, &mut rng(0)).unwrap(), 0);
    }

    #[test]
    fn heuristic_parsing() {
        assert_eq!("2".parse::<Heuristic>().unwrap(), Heuristic::MaxDomination);
        assert_eq!("h4".parse::<Heuristic>().unwrap(), Heuristic::MaxCrowding);
        assert_eq!(Heuristic::MaxHvContribution.to_string(), "h3");
        assert!("0".parse::<Heuristic>().is_err());
        assert!("5".parse::<Heuristic>().is_err());
        for h in Heuristic::ALL {
            assert_eq!(Heuristic::from_index(h.index()).unwrap(), h);
        }
    }

    fn small_moves() -> AnnealConfig {
        AnnealConfig {
            move_scale: 0.01,
            ..AnnealConfig::default()
        }
    }

    #[test]
    fn step_update_replaces_dominated_members() {
        let p = identity();
        let archive = archive_of(&[[0.8, 0.9], [0.9, 0.8]]);
        let cur = Solution::new(vec![0.5, 0.5], vec![0.5, 0.5]);
        let mut a = Annealer::with_state(&p, small_moves(), archive, cur).unwrap();
        assert_eq!(a.step().unwrap(), Branch::Update);
        assert_eq!(a.archive().len(), 1);
        assert_eq!(a.archive().members()[0], *a.current());
        assert_ne!(a.current().x, vec![0.5, 0.5]);
    }

    #[test]
    fn step_non_dominated_becomes_current() {
        let p = identity();
        let archive = archive_of(&[[0.2, 0.9], [0.9, 0.2]]);
        let cur = Solution::new(vec![0.5, 0.5], vec![0.5, 0.5]);
        let mut a = Annealer::with_state(&p, small_moves(), archive, cur).unwrap();
        assert_eq!(a.step().unwrap(), Branch::NonDominated);
        assert_eq!(a.archive().len(), 3);
        assert!(a.archive().members().contains(a.current()));
    }

    fn valley() -> Toy {
        Toy {
            bounds: vec![(0.0, 1.0)],
            f: |x| vec![(x[0] - 0.5).abs(), (x[0] - 0.5).abs() + 0.1],
        }
    }

    #[test]
    fn step_dominated_by_current_reseeds() {
        let p = valley();
        let best = Solution::new(vec![0.5], vec![0.0, 0.1]);
        let mut archive = ParetoArchive::new();
        archive.insert(best.clone());
        let mut a = Annealer::with_state(&p, AnnealConfig::default(), archive, best.clone()).unwrap();
        // cold enough that the annealing fallthrough never moves current away
        a.set_temperature(1e-5);
        for _ in 0..20 {
            let b = a.step().unwrap();
            assert!(matches!(b, Branch::Reseed { .. }), "{b:?}");
        }
        assert_eq!(a.trace().len(), 20);
        assert!(a.trace().rows[0].credit.is_none());
        assert!(a.trace().rows[1..].iter().all(|r| r.credit.is_some()));
        assert_eq!(a.pool().epoch(), 19);
        assert_eq!(a.counters().reseed, 20);
    }

    #[test]
    fn step_dominated_by_archive_only_anneals() {
        let p = valley();
        let mut archive = ParetoArchive::new();
        archive.insert(Solution::new(vec![0.5], vec![0.0, 0.1]));
        // at the upper bound every move either improves or is clipped to a tie
        let cur = Solution::new(vec![1.0], vec![0.5, 0.6]);
        let mut accepted = 0;
        for seed in 0..40 {
            let cfg = AnnealConfig { seed, ..AnnealConfig::default() };
            let mut a = Annealer::with_state(&p, cfg, archive.clone(), cur.clone()).unwrap();
            let b = a.step().unwrap();
            match b {
                Branch::Anneal { accepted: true } => accepted += 1,
                Branch::Anneal { accepted: false } => assert_eq!(*a.current(), cur),
                _ => panic!("{b:?}"),
            }
            assert_eq!(a.archive().len(), 1);
            assert!(a.trace().is_empty());
        }
        assert!(accepted > 5 && accepted < 35, "{accepted}");
    }

    #[test]
    fn ablation_never_touches_the_pool() {
        let p = valley();
        let best = Solution::new(vec![0.5], vec![0.0, 0.1]);
        let mut archive = ParetoArchive::new();
        archive.insert(best.clone());
        for h in Heuristic::ALL {
            let mut a = Annealer::with_state(&p, AnnealConfig::fixed(h), archive.clone(), best.clone()).unwrap();
            for _ in 0..10 {
                let Branch::Reseed { heuristic, .. } = a.step().unwrap() else {
                    panic!("expected a re-seed");
                };
                assert_eq!(heuristic, h);
            }
            assert!(a.trace().is_empty());
            assert_eq!(a.pool().epoch(), 0);
            assert_eq!(a.pool().last_chosen(), None);
        }
    }

    #[test]
    fn runs_are_deterministic_and_consistent() {
        let p = Benchmark::by_name("DTLZ2").unwrap();
        let a = run(&p, small(11)).unwrap();
        let b = run(&p, small(11)).unwrap();
        assert_eq!(a, b);
        let c = run(&p, small(12)).unwrap();
        assert_ne!(a.archive, c.archive);
        assert_eq!(a.counters.total(), 2000);
        assert_eq!(a.evaluations, 2000 + INIT_SAMPLES);
        assert_eq!(a.metrics.rows.len(), 73);
        assert_eq!(a.metrics.rows.last().unwrap().iter, 2000);
        for w in a.metrics.rows.windows(2) {
            assert!(w[1].temperature < w[0].temperature);
        }
        assert_eq!(a.trace.len(), a.counters.reseed);
        let f = a.archive.objectives();
        for i in 0..f.len() {
            for j in 0..f.len() {
                assert!(i == j || !dominates(&f[i], &f[j]));
            }
        }
        for m in a.archive.members() {
            assert!(m.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn archive_stays_non_dominated_every_hundred_steps() {
        let p = Benchmark::by_name("UF1").unwrap();
        let mut a = Annealer::new(&p, small(5)).unwrap();
        for k in 0..3000 {
            a.set_temperature(AnnealConfig::default().temperature(k / 50));
            a.step().unwrap();
            if k % 100 == 0 {
                let f = a.archive().objectives();
                for i in 0..f.len() {
                    for j in 0..f.len() {
                        assert!(i == j || crate::pareto::dominance(&f[i], &f[j]) == crate::pareto::Dominance::MutuallyNonDominated);
                    }
                }
            }
        }
    }

    #[test]
    fn ablation_run_has_no_trace() {
        let p = Benchmark::by_name("DTLZ1").unwrap();
        let out = run(
            &p,
            AnnealConfig {
                total_iters: 1000,
                ..AnnealConfig::fixed(Heuristic::MinDomination)
            },
        )
        .unwrap();
        assert!(out.trace.is_empty());
        assert!(out.counters.reseed > 0);
    }
}
