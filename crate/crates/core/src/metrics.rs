//! Quality indicators: hypervolume (exact in 2-D, Monte-Carlo in general),
//! exclusive hypervolume contributions, crowding distance and IGD.
//!
//! Hypervolumes are reported as the fraction of the cuboid spanned by the
//! origin and the reference point.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::pareto::{dominance, Dominance};
use crate::parallel;

/// Samples for in-loop credit and heuristic computations.
pub const MC_SAMPLES_CREDIT: usize = 10_000;
/// Samples for final reporting.
pub const MC_SAMPLES_REPORT: usize = 100_000;
/// Reference point scale applied to a front's per-objective upper bound.
pub const REFERENCE_SCALE: f64 = 1.1;

fn check_reference(reference: &[f64]) -> Result<()> {
    if reference.is_empty() || reference.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(invalid("reference point must be finite and strictly positive"));
    }
    Ok(())
}

/// `scale` times the per-objective maximum over `points`.
pub fn reference_point<P: AsRef<[f64]>>(points: &[P], scale: f64) -> Result<Vec<f64>> {
    let first = points
        .first()
        .ok_or_else(|| invalid("reference point needs a non-empty point set"))?;
    let mut hi = first.as_ref().to_vec();
    for p in points {
        for (h, v) in hi.iter_mut().zip(p.as_ref()) {
            *h = h.max(*v);
        }
    }
    Ok(hi.into_iter().map(|h| h * scale).collect())
}

/// Points sorted by non-decreasing first objective, then second.
fn sorted_2d<P: AsRef<[f64]>>(front: &[P]) -> Vec<(f64, f64, usize)> {
    let mut pts: Vec<(f64, f64, usize)> = front
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_ref()[0], p.as_ref()[1], i))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

/// Exact hypervolume of a bi-objective front as a fraction of `[0, r]`.
pub fn hv_exact_2d<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Result<f64> {
    if reference.len() != 2 {
        return Err(invalid("hv_exact_2d needs a 2-D reference point"));
    }
    check_reference(reference)?;
    for p in front {
        let p = p.as_ref();
        if p.len() != 2 {
            return Err(invalid("hv_exact_2d needs 2-D points"));
        }
        if p[0] > reference[0] || p[1] > reference[1] || p.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "point {p:?} is not dominated by the reference point {reference:?}"
            )));
        }
    }
    let pts = sorted_2d(front);
    let mut area = 0.0;
    let mut ceiling = reference[1];
    // Staircase sweep: each point below the running minimum adds its slab
    // up to the next staircase point (or the reference).
    let stairs: Vec<(f64, f64)> = pts
        .iter()
        .filter_map(|&(x, y, _)| {
            if y < ceiling {
                ceiling = y;
                Some((x, y))
            } else {
                None
            }
        })
        .collect();
    for (i, &(x, y)) in stairs.iter().enumerate() {
        let next_x = stairs.get(i + 1).map_or(reference[0], |s| s.0);
        area += (next_x - x) * (reference[1] - y);
    }
    Ok(area / (reference[0] * reference[1]))
}

fn uniform_samples<R: Rng + ?Sized>(reference: &[f64], samples: usize, rng: &mut R) -> Vec<f64> {
    let mut buf = Vec::with_capacity(samples * reference.len());
    for _ in 0..samples {
        for r in reference {
            buf.push(rng.random::<f64>() * r);
        }
    }
    buf
}

fn sorted_by_first<P: AsRef<[f64]>>(front: &[P]) -> Vec<&[f64]> {
    let mut v: Vec<&[f64]> = front.iter().map(|p| p.as_ref()).collect();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    v
}

fn check_mc_inputs<P: AsRef<[f64]>>(front: &[P], reference: &[f64], samples: usize) -> Result<()> {
    if reference.len() < 2 {
        return Err(invalid("Monte-Carlo hypervolume needs at least 2 objectives"));
    }
    check_reference(reference)?;
    if samples < 1000 {
        return Err(invalid(format!("at least 1000 samples required, got {samples}")));
    }
    if front.iter().any(|p| p.as_ref().len() != reference.len()) {
        return Err(invalid("front point dimension differs from the reference point"));
    }
    Ok(())
}

/// Fraction of `samples` uniform points in `[0, r]` dominated by the front.
pub fn hv_monte_carlo<P, R>(front: &[P], reference: &[f64], samples: usize, rng: &mut R) -> Result<f64>
where
    P: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    check_mc_inputs(front, reference, samples)?;
    let pts = uniform_samples(reference, samples, rng);
    let sorted = sorted_by_first(front);
    let hits = parallel::count_covered(&sorted, &pts, reference.len());
    Ok(hits as f64 / samples as f64)
}

/// Two Monte-Carlo hypervolumes estimated on one common sample set.
pub fn hv_monte_carlo_pair<P, Q, R>(
    a: &[P],
    b: &[Q],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)>
where
    P: AsRef<[f64]>,
    Q: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    check_mc_inputs(a, reference, samples)?;
    check_mc_inputs(b, reference, samples)?;
    let pts = uniform_samples(reference, samples, rng);
    let dim = reference.len();
    let sa = sorted_by_first(a);
    let sb = sorted_by_first(b);
    let ha = parallel::count_covered(&sa, &pts, dim);
    let hb = parallel::count_covered(&sb, &pts, dim);
    Ok((ha as f64 / samples as f64, hb as f64 / samples as f64))
}

/// `HV(curr) - HV(prev)` on one common sample set, identical to the
/// difference of [`hv_monte_carlo_pair`] for the same generator state.
/// Only samples dominated by a point present in just one of the fronts can
/// change status, so the full fronts are consulted for those alone.
pub fn hv_monte_carlo_delta<P, Q, R>(
    prev: &[P],
    curr: &[Q],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<f64>
where
    P: AsRef<[f64]>,
    Q: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    check_mc_inputs(prev, reference, samples)?;
    check_mc_inputs(curr, reference, samples)?;
    let pts = uniform_samples(reference, samples, rng);
    let dim = reference.len();
    let key = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let prev_keys: std::collections::HashSet<Vec<u64>> = prev.iter().map(|p| key(p.as_ref())).collect();
    let curr_keys: std::collections::HashSet<Vec<u64>> = curr.iter().map(|p| key(p.as_ref())).collect();
    let added: Vec<&[f64]> = curr
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| !prev_keys.contains(&key(p)))
        .collect();
    let removed: Vec<&[f64]> = prev
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| !curr_keys.contains(&key(p)))
        .collect();
    if added.is_empty() && removed.is_empty() {
        return Ok(0.0);
    }
    let sp = sorted_by_first(prev);
    let sc = sorted_by_first(curr);
    let sa = sorted_by_first(&added);
    let sr = sorted_by_first(&removed);
    let (gain, loss) = parallel::symmetric_cover_counts(&sa, &sr, &sp, &sc, &pts, dim);
    Ok((gain as f64 - loss as f64) / samples as f64)
}

/// Exclusive hypervolume of every front member, as fractions of `[0, r]`.
/// Exact for two objectives; otherwise Monte-Carlo over one shared sample
/// set.
pub fn hv_contributions<P, R>(
    front: &[P],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    P: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    for i in 0..front.len() {
        for j in (i + 1)..front.len() {
            if dominance(front[i].as_ref(), front[j].as_ref()) == Dominance::Equal {
                return Err(invalid("duplicate objective vectors in front"));
            }
        }
    }
    if reference.len() == 2 {
        hv_exact_2d(front, reference)?;
        return Ok(contributions_2d(front, reference));
    }
    check_mc_inputs(front, reference, samples)?;
    let pts = uniform_samples(reference, samples, rng);
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by(|&a, &b| front[a].as_ref()[0].total_cmp(&front[b].as_ref()[0]));
    let sorted: Vec<&[f64]> = order.iter().map(|&i| front[i].as_ref()).collect();
    let counts = parallel::exclusive_counts(&sorted, &pts, reference.len());
    let mut out = vec![0.0; front.len()];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = counts[pos] as f64 / samples as f64;
    }
    Ok(out)
}

fn contributions_2d<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Vec<f64> {
    let pts = sorted_2d(front);
    let mut out = vec![0.0; front.len()];
    let norm = reference[0] * reference[1];
    // Dominated points keep zero; the staircase holds the rest.
    let mut stairs: Vec<(f64, f64, usize)> = Vec::with_capacity(pts.len());
    let mut ceiling = f64::INFINITY;
    for &p in &pts {
        if p.1 < ceiling {
            ceiling = p.1;
            stairs.push(p);
        }
    }
    for (k, &(x, y, idx)) in stairs.iter().enumerate() {
        let next_x = stairs.get(k + 1).map_or(reference[0], |s| s.0);
        let prev_y = if k == 0 { reference[1] } else { stairs[k - 1].1 };
        out[idx] = (next_x - x) * (prev_y - y) / norm;
    }
    out
}

/// Crowding distance of every point; boundary points get `+inf`.
pub fn crowding_distances<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    let mut dist = vec![0.0; n];
    let mut idx: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        let val = |i: usize| front[i].as_ref()[obj];
        idx.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        let lo = val(idx[0]);
        let hi = val(idx[n - 1]);
        dist[idx[0]] = f64::INFINITY;
        dist[idx[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in idx.windows(3) {
            dist[w[1]] += (val(w[2]) - val(w[0])) / span;
        }
    }
    dist
}

/// Mean over `reference_front` of the Euclidean distance to the nearest
/// point of `front`.
pub fn igd<P, Q>(front: &[P], reference_front: &[Q]) -> Result<f64>
where
    P: AsRef<[f64]> + Sync,
    Q: AsRef<[f64]> + Sync,
{
    if front.is_empty() {
        return Err(invalid("IGD of an empty front"));
    }
    if reference_front.is_empty() {
        return Err(invalid("IGD against an empty reference front"));
    }
    let m = reference_front[0].as_ref().len();
    if front
        .iter()
        .map(|p| p.as_ref().len())
        .chain(reference_front.iter().map(|p| p.as_ref().len()))
        .any(|l| l != m)
    {
        return Err(invalid("objective counts differ between fronts"));
    }
    let nearest = parallel::map(reference_front, |star| {
        let star = star.as_ref();
        front
            .iter()
            .map(|p| {
                p.as_ref()
                    .iter()
                    .zip(star)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    });
    Ok(nearest.iter().sum::<f64>() / reference_front.len() as f64)
}

/// Monte-Carlo coverage of a changing front on one fixed sample set.
///
/// Every sample keeps the number of members dominating it and the XOR of
/// their ids, so adding or removing a member costs one pass over the
/// samples, hypervolume is the covered fraction, and a sample covered once
/// names its sole dominator. All estimates share the same samples, making
/// successive values directly comparable.
#[derive(Debug, Clone)]
pub struct CoverageSampler {
    reference: Vec<f64>,
    samples: Vec<f64>,
    count: Vec<u32>,
    xor: Vec<u64>,
    members: HashMap<Vec<u64>, u64>,
    next_id: u64,
    covered: usize,
}

fn bit_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

impl CoverageSampler {
    pub fn new<R: Rng + ?Sized>(reference: &[f64], samples: usize, rng: &mut R) -> Result<Self> {
        check_mc_inputs::<&[f64]>(&[], reference, samples)?;
        Ok(Self {
            reference: reference.to_vec(),
            samples: uniform_samples(reference, samples, rng),
            count: vec![0; samples],
            xor: vec![0; samples],
            members: HashMap::new(),
            next_id: 1,
            covered: 0,
        })
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn n_samples(&self) -> usize {
        self.count.len()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Samples dominated by at least one member.
    pub fn covered(&self) -> usize {
        self.covered
    }

    pub fn hypervolume(&self) -> f64 {
        self.covered as f64 / self.n_samples() as f64
    }

    fn apply(&mut self, p: &[f64], id: u64, add: bool) {
        let dim = self.reference.len();
        for (k, s) in self.samples.chunks_exact(dim).enumerate() {
            if p.iter().zip(s).all(|(a, b)| a <= b) {
                if add {
                    self.count[k] += 1;
                    if self.count[k] == 1 {
                        self.covered += 1;
                    }
                } else {
                    self.count[k] -= 1;
                    if self.count[k] == 0 {
                        self.covered -= 1;
                    }
                }
                self.xor[k] ^= id;
            }
        }
    }

    /// Adds `p`; returns false if an identical vector is already present.
    pub fn insert(&mut self, p: &[f64]) -> Result<bool> {
        if p.len() != self.reference.len() {
            return Err(invalid("point dimension differs from the reference point"));
        }
        let key = bit_key(p);
        if self.members.contains_key(&key) {
            return Ok(false);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.members.insert(key, id);
        self.apply(p, id, true);
        Ok(true)
    }

    /// Removes `p`; returns false if it was not present.
    pub fn remove(&mut self, p: &[f64]) -> bool {
        match self.members.remove(&bit_key(p)) {
            Some(id) => {
                self.apply(p, id, false);
                true
            }
            None => false,
        }
    }

    /// Makes the member set equal to `front`.
    pub fn sync<P: AsRef<[f64]>>(&mut self, front: &[P]) -> Result<()> {
        let wanted: HashMap<Vec<u64>, &[f64]> = front.iter().map(|p| (bit_key(p.as_ref()), p.as_ref())).collect();
        let stale: Vec<Vec<u64>> = self.members.keys().filter(|k| !wanted.contains_key(*k)).cloned().collect();
        for key in stale {
            let p: Vec<f64> = key.iter().map(|b| f64::from_bits(*b)).collect();
            self.remove(&p);
        }
        for p in front {
            self.insert(p.as_ref())?;
        }
        Ok(())
    }

    /// Exclusive sample counts for the members listed in `front`, in order
    /// (0 for vectors that are not members).
    pub fn exclusive_counts<P: AsRef<[f64]>>(&self, front: &[P]) -> Vec<usize> {
        let mut by_id: HashMap<u64, usize> = HashMap::new();
        for (c, x) in self.count.iter().zip(&self.xor) {
            if *c == 1 {
                *by_id.entry(*x).or_default() += 1;
            }
        }
        front
            .iter()
            .map(|p| {
                self.members
                    .get(&bit_key(p.as_ref()))
                    .and_then(|id| by_id.get(id))
                    .copied()
                    .unwrap_or(0)
            })
            .collect()
    }
}
