//! Probability-matching hyper-heuristic: credit from Pareto-front progress,
//! exponential quality recency, floored selection weights and roulette
//! selection.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_P_MIN: f64 = 0.1;
pub const DEFAULT_FORGETTING: f64 = 0.5;
pub const INITIAL_QUALITY: f64 = 1.0;

/// Bitwise identity of an objective vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveKey(Vec<u64>);

impl ObjectiveKey {
    pub fn of(f: &[f64]) -> Self {
        Self(f.iter().map(|v| v.to_bits()).collect())
    }
}

/// Front state recorded each time a heuristic is selected.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSnapshot {
    /// Iterations performed when the snapshot was taken.
    pub iter_index: usize,
    /// Hypervolume fraction of the front.
    pub hv: f64,
    pub member_ids: Vec<ObjectiveKey>,
    pub total_iters: usize,
}

/// A credit split into its compensatory factor and progress-per-iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Credit {
    /// `exp(i(t) / iter)`, in `[1, e]`.
    pub factor: f64,
    pub base: f64,
}

impl Credit {
    pub fn value(&self) -> f64 {
        self.factor * self.base
    }
}

/// Credit earned between two epochs, decomposed.
pub fn credit_terms(prev: &EpochSnapshot, curr: &EpochSnapshot, hv_true: f64) -> Result<Credit> {
    if curr.iter_index <= prev.iter_index {
        return Err(invalid(format!(
            "epoch iteration index must increase ({} -> {})",
            prev.iter_index, curr.iter_index
        )));
    }
    if !(hv_true > 0.0) {
        return Err(invalid("true-front hypervolume must be positive"));
    }
    if curr.total_iters == 0 {
        return Err(invalid("total iteration budget must be positive"));
    }
    if curr.member_ids.is_empty() {
        return Err(Error::InvalidState("credit for an empty front".into()));
    }
    let previous: HashSet<&ObjectiveKey> = prev.member_ids.iter().collect();
    let kept = curr.member_ids.iter().filter(|id| previous.contains(id)).count();
    let size = curr.member_ids.len() as f64;
    let new_fraction = (size - kept as f64) / size;
    let hv_gain = (curr.hv - prev.hv).max(0.0) / hv_true;
    let gap = (curr.iter_index - prev.iter_index) as f64;
    let ratio = (curr.iter_index as f64 / curr.total_iters as f64).min(1.0);
    Ok(Credit {
        factor: ratio.exp(),
        base: (hv_gain + new_fraction) / gap,
    })
}

/// Credit earned between two epochs.
pub fn assign_credit(prev: &EpochSnapshot, curr: &EpochSnapshot, hv_true: f64) -> Result<f64> {
    credit_terms(prev, curr, hv_true).map(|c| c.value())
}

/// Qualities and selection state of a fixed set of low-level heuristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicPool {
    quality: Vec<f64>,
    p_min: f64,
    forgetting: f64,
    last_chosen: Option<usize>,
    epoch: usize,
}

impl HeuristicPool {
    pub fn new(count: usize, p_min: f64, forgetting: f64) -> Result<Self> {
        if count == 0 {
            return Err(invalid("heuristic pool needs at least one heuristic"));
        }
        if !(0.0..=1.0 / count as f64).contains(&p_min) {
            return Err(invalid(format!("p_min must lie in [0, 1/{count}], got {p_min}")));
        }
        if !(0.0..=1.0).contains(&forgetting) {
            return Err(invalid(format!("forgetting factor must lie in [0, 1], got {forgetting}")));
        }
        Ok(Self {
            quality: vec![INITIAL_QUALITY; count],
            p_min,
            forgetting,
            last_chosen: None,
            epoch: 0,
        })
    }

    pub fn with_qualities(quality: Vec<f64>, p_min: f64, forgetting: f64) -> Result<Self> {
        let mut pool = Self::new(quality.len(), p_min, forgetting)?;
        if quality.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(invalid("qualities must be finite and non-negative"));
        }
        pool.quality = quality;
        Ok(pool)
    }

    pub fn count(&self) -> usize {
        self.quality.len()
    }

    pub fn qualities(&self) -> &[f64] {
        &self.quality
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn last_chosen(&self) -> Option<usize> {
        self.last_chosen
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Folds `credit` into the quality of the last chosen heuristic.
    pub fn update_quality(&mut self, credit: f64) -> Result<()> {
        let i = self
            .last_chosen
            .ok_or_else(|| Error::InvalidState("no heuristic has been chosen yet".into()))?;
        if !(credit.is_finite() && credit >= 0.0) {
            return Err(invalid(format!("credit must be finite and non-negative, got {credit}")));
        }
        self.quality[i] = self.forgetting * self.quality[i] + (1.0 - self.forgetting) * credit;
        self.epoch += 1;
        Ok(())
    }

    /// Roulette weights `p_min + (1 - p_min) q_i / sum(q)`. They need not sum
    /// to one; [`HeuristicPool::select`] normalizes.
    pub fn selection_weights(&self) -> Vec<f64> {
        let total: f64 = self.quality.iter().sum();
        if total <= 0.0 {
            return vec![1.0 / self.count() as f64; self.count()];
        }
        self.quality
            .iter()
            .map(|q| self.p_min + (1.0 - self.p_min) * q / total)
            .collect()
    }

    /// Draws a heuristic with probability proportional to its weight and
    /// records it as the last chosen.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let chosen = roulette(&self.selection_weights(), rng);
        self.last_chosen = Some(chosen);
        chosen
    }
}

/// Index drawn with probability `w_i / sum(w)`.
pub fn roulette<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    // Rounding can leave a sliver past the last bucket.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// One heuristic-selection epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub iter_index: usize,
    /// Zero-based heuristic index.
    pub chosen: usize,
    /// Credit for the previously chosen heuristic; absent on the first epoch.
    pub credit: Option<Credit>,
    pub quality: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub rows: Vec<TraceRow>,
}

impl SelectionTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// How often each heuristic was chosen.
    pub fn frequencies(&self, count: usize) -> Vec<usize> {
        let mut out = vec![0; count];
        for r in &self.rows {
            out[r.chosen] += 1;
        }
        out
    }

    /// CSV `epoch,iter_index,chosen,credit,q1..qK,w1..wK` with 1-based
    /// heuristic numbers.
    pub fn write_csv<W: Write>(&self, writer: W, count: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["epoch".to_string(), "iter_index".into(), "chosen".into(), "credit".into()];
        header.extend((1..=count).map(|i| format!("q{i}")));
        header.extend((1..=count).map(|i| format!("w{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.epoch.to_string(),
                r.iter_index.to_string(),
                (r.chosen + 1).to_string(),
                r.credit.map(|c| c.value().to_string()).unwrap_or_default(),
            ];
            rec.extend(r.quality.iter().map(|v| v.to_string()));
            rec.extend(r.weights.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
