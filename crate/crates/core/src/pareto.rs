//! Solutions, Pareto dominance, the domination amount, and the archive of
//! mutually non-dominated solutions. All objectives are minimized.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics;

/// Objective ranges narrower than this are replaced by 1.0.
pub const DEGENERATE_RANGE_EPS: f64 = 1e-12;

/// A decision vector together with its evaluated objective vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

impl Solution {
    pub fn new(x: Vec<f64>, f: Vec<f64>) -> Self {
        Self { x, f }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dominance {
    Dominates,
    DominatedBy,
    MutuallyNonDominated,
    Equal,
}

impl Dominance {
    pub fn reverse(self) -> Self {
        match self {
            Dominance::Dominates => Dominance::DominatedBy,
            Dominance::DominatedBy => Dominance::Dominates,
            other => other,
        }
    }
}

/// Unchecked dominance test for hot loops. Both slices must have equal length.
#[inline]
pub fn dominance(a: &[f64], b: &[f64]) -> Dominance {
    let mut a_better = false;
    let mut b_better = false;
    for (ai, bi) in a.iter().zip(b) {
        if ai < bi {
            a_better = true;
        } else if bi < ai {
            b_better = true;
        }
        if a_better && b_better {
            return Dominance::MutuallyNonDominated;
        }
    }
    match (a_better, b_better) {
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::DominatedBy,
        (false, false) => Dominance::Equal,
        (true, true) => Dominance::MutuallyNonDominated,
    }
}

/// `true` when `a` weakly improves on `b` everywhere and strictly somewhere.
#[inline]
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    dominance(a, b) == Dominance::Dominates
}

/// Pareto comparison of two objective vectors with input validation.
pub fn compare(a: &[f64], b: &[f64]) -> Result<Dominance> {
    if a.is_empty() || a.len() != b.len() {
        return Err(invalid(format!(
            "objective vectors must be non-empty and of equal length (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("objective vectors must be finite"));
    }
    Ok(dominance(a, b))
}

/// Per-objective spans used to normalize the domination amount.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveRanges(Vec<f64>);

impl ObjectiveRanges {
    /// Wraps raw ranges without substitution. Zero entries are caught by
    /// [`domination_amount`] when they are used as divisors.
    pub fn from_raw(ranges: Vec<f64>) -> Self {
        Self(ranges)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Max minus min of every objective over `points`. Ranges below
    /// [`DEGENERATE_RANGE_EPS`] become 1.0.
    pub fn from_points<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| invalid("objective ranges need at least one point"))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in iter {
            if p.len() != lo.len() {
                return Err(invalid("objective vectors of differing length"));
            }
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Ok(Self(
            lo.iter()
                .zip(&hi)
                .map(|(l, h)| {
                    let r = h - l;
                    if r < DEGENERATE_RANGE_EPS {
                        1.0
                    } else {
                        r
                    }
                })
                .collect(),
        ))
    }
}

/// Ranges over the objective vectors of a set of solutions.
pub fn objective_ranges(solutions: &[Solution]) -> Result<ObjectiveRanges> {
    ObjectiveRanges::from_points(solutions.iter().map(|s| s.f.as_slice()))
}

/// Product of normalized absolute gaps over the objectives where `a` and
/// `b` differ. Identical vectors give 0.
pub fn domination_amount(a: &[f64], b: &[f64], ranges: &ObjectiveRanges) -> Result<f64> {
    if a.len() != b.len() || a.len() != ranges.len() {
        return Err(invalid(format!(
            "length mismatch: a={}, b={}, ranges={}",
            a.len(),
            b.len(),
            ranges.len()
        )));
    }
    let mut product = 1.0;
    let mut any_diff = false;
    for (i, ((ai, bi), r)) in a.iter().zip(b).zip(ranges.as_slice()).enumerate() {
        if ai == bi {
            continue;
        }
        if *r <= 0.0 {
            return Err(Error::DegenerateRange { index: i, value: *r });
        }
        any_diff = true;
        product *= (ai - bi).abs() / r;
    }
    Ok(if any_diff { product } else { 0.0 })
}

/// Result of offering a solution to the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// The solution removed this many dominated members and was inserted.
    Dominates(usize),
    /// This many members dominate the solution; the archive is unchanged.
    DominatedBy(usize),
    /// Non-dominated with every member. Inserted unless it duplicates an
    /// existing objective vector.
    MutuallyNonDominated,
}

/// How a candidate objective vector relates to every archive member.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    /// Members the candidate dominates.
    pub dominated: Vec<usize>,
    /// Members dominating the candidate.
    pub dominators: Vec<usize>,
    /// A member with a bitwise-equal objective vector exists.
    pub duplicate: bool,
}

/// Set of mutually non-dominated solutions with unique objective vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<Solution>,
    capacity: Option<usize>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("archive capacity must be positive"));
        }
        Ok(Self {
            members: Vec::new(),
            capacity: Some(capacity),
        })
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn members(&self) -> &[Solution] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&Solution> {
        self.members.get(idx)
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|s| s.f.clone()).collect()
    }

    pub fn into_members(self) -> Vec<Solution> {
        self.members
    }

    pub fn classify(&self, f: &[f64]) -> Classification {
        let mut c = Classification::default();
        for (i, m) in self.members.iter().enumerate() {
            match dominance(f, &m.f) {
                Dominance::Dominates => c.dominated.push(i),
                Dominance::DominatedBy => c.dominators.push(i),
                Dominance::Equal => c.duplicate = true,
                Dominance::MutuallyNonDominated => {}
            }
        }
        c
    }

    /// Offers `s` to the archive.
    pub fn insert(&mut self, s: Solution) -> InsertOutcome {
        let c = self.classify(&s.f);
        self.insert_classified(s, &c)
    }

    /// Inserts using a classification computed by [`ParetoArchive::classify`]
    /// against the current membership.
    pub fn insert_classified(&mut self, s: Solution, c: &Classification) -> InsertOutcome {
        if !c.dominators.is_empty() {
            return InsertOutcome::DominatedBy(c.dominators.len());
        }
        if !c.dominated.is_empty() {
            let mut k = 0;
            let mut idx = 0;
            self.members.retain(|_| {
                let drop = c.dominated.binary_search(&idx).is_ok();
                idx += 1;
                if drop {
                    k += 1;
                }
                !drop
            });
            self.members.push(s);
            self.enforce_capacity();
            return InsertOutcome::Dominates(k);
        }
        if !c.duplicate {
            self.members.push(s);
            self.enforce_capacity();
        }
        InsertOutcome::MutuallyNonDominated
    }

    fn enforce_capacity(&mut self) {
        let Some(cap) = self.capacity else { return };
        while self.members.len() > cap {
            let fronts: Vec<&[f64]> = self.members.iter().map(|m| m.f.as_slice()).collect();
            let cd = metrics::crowding_distances(&fronts);
            let worst = cd
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("archive over capacity is non-empty");
            self.members.remove(worst);
        }
    }

    /// Writes the archive as CSV with header `x1..xk,f1..fn`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let (k, n) = match self.members.first() {
            Some(s) => (s.x.len(), s.f.len()),
            None => (0, 0),
        };
        let header: Vec<String> = (1..=k)
            .map(|i| format!("x{i}"))
            .chain((1..=n).map(|i| format!("f{i}")))
            .collect();
        w.write_record(&header)?;
        for s in &self.members {
            w.write_record(s.x.iter().chain(&s.f).map(|v| format_full(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an archive written by [`ParetoArchive::write_csv`]. Rows are
    /// taken as-is; the non-dominance invariant is not re-checked.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let k = headers.iter().filter(|h| h.starts_with('x')).count();
        let mut members = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("bad archive value: {e}")))?;
            let (x, f) = vals.split_at(k);
            members.push(Solution::new(x.to_vec(), f.to_vec()));
        }
        Ok(Self {
            members,
            capacity: None,
        })
    }
}

/// 17 significant digits.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Indices of the points not dominated by any other point. Of several
/// bitwise-equal points only the first is kept.
pub fn non_dominated_indices(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            points.iter().enumerate().all(|(j, q)| match dominance(q, &points[i]) {
                Dominance::Dominates => false,
                Dominance::Equal => j >= i,
                _ => true,
            })
        })
        .collect()
}
