//! Box-constrained benchmark problems: DTLZ1-7 (3 objectives) and UF1-7
//! (CEC 2009, 2 objectives), with true-front samplers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::pareto::format_full;

/// A box-constrained multi-objective minimization problem.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn n_vars(&self) -> usize;
    fn n_objs(&self) -> usize;
    fn bounds(&self) -> &[(f64, f64)];
    /// Pure mapping from a decision vector to its objective vector.
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Ideal corner used as the origin of in-run hypervolume boxes.
    fn objective_origin(&self) -> Vec<f64> {
        vec![0.0; self.n_objs()]
    }

    /// Samples of the true Pareto front, when it is known.
    fn reference_front(&self, _count: usize) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Checks that `x` has `bounds.len()` entries inside their boxes.
pub fn check_bounds(x: &[f64], bounds: &[(f64, f64)]) -> Result<()> {
    if x.len() != bounds.len() {
        return Err(invalid(format!(
            "decision vector has {} entries, expected {}",
            x.len(),
            bounds.len()
        )));
    }
    for (i, (v, (lo, hi))) in x.iter().zip(bounds).enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(invalid(format!("x{} = {v} outside [{lo}, {hi}]", i + 1)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    Dtlz(u8),
    Uf(u8),
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchmarkId::Dtlz(i) => write!(f, "DTLZ{i}"),
            BenchmarkId::Uf(i) => write!(f, "UF{i}"),
        }
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let parsed = if let Some(n) = upper.strip_prefix("DTLZ") {
            n.parse().ok().filter(|i| (1..=7).contains(i)).map(BenchmarkId::Dtlz)
        } else if let Some(n) = upper.strip_prefix("UF") {
            n.parse().ok().filter(|i| (1..=7).contains(i)).map(BenchmarkId::Uf)
        } else {
            None
        };
        parsed.ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// All fourteen benchmark instances.
pub fn all_benchmarks() -> Vec<BenchmarkId> {
    (1..=7)
        .map(BenchmarkId::Dtlz)
        .chain((1..=7).map(BenchmarkId::Uf))
        .collect()
}

/// Reference-front sizes for 2 and 3 objectives.
pub const FRONT_SIZE_2OBJ: usize = 1000;
pub const FRONT_SIZE_3OBJ: usize = 5000;

/// A benchmark instance with its dimensions and bounds.
#[derive(Debug, Clone)]
pub struct Benchmark {
    id: BenchmarkId,
    name: String,
    n_objs: usize,
    bounds: Vec<(f64, f64)>,
}

impl Benchmark {
    pub fn new(id: BenchmarkId) -> Self {
        let (n_objs, bounds) = match id {
            BenchmarkId::Dtlz(i) => {
                let n_vars = match i {
                    1 => 6,
                    2 => 7,
                    _ => 10,
                };
                (3, vec![(0.0, 1.0); n_vars])
            }
            BenchmarkId::Uf(i) => {
                let tail = match i {
                    3 => (0.0, 1.0),
                    4 => (-2.0, 2.0),
                    _ => (-1.0, 1.0),
                };
                let mut b = vec![tail; 10];
                b[0] = (0.0, 1.0);
                (2, b)
            }
        };
        Self {
            id,
            name: id.to_string(),
            n_objs,
            bounds,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn id(&self) -> BenchmarkId {
        self.id
    }

    /// Default reference-front size for this instance.
    pub fn default_front_size(&self) -> usize {
        if self.n_objs == 2 {
            FRONT_SIZE_2OBJ
        } else {
            FRONT_SIZE_3OBJ
        }
    }
}

impl Problem for Benchmark {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    fn n_objs(&self) -> usize {
        self.n_objs
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_bounds(x, &self.bounds)?;
        Ok(match self.id {
            BenchmarkId::Dtlz(i) => dtlz(i, x, self.n_objs),
            BenchmarkId::Uf(i) => uf(i, x),
        })
    }

    fn reference_front(&self, count: usize) -> Option<Vec<Vec<f64>>> {
        reference_front_for(self.id, count).ok()
    }
}

/// Evaluates `DTLZ1`..`DTLZ7` at `x` (dimensions as in [`Benchmark`]).
pub fn evaluate_dtlz(name: &str, x: &[f64]) -> Result<Vec<f64>> {
    match name.parse()? {
        id @ BenchmarkId::Dtlz(_) => Benchmark::new(id).evaluate(x),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

/// Evaluates `UF1`..`UF7` at `x`.
pub fn evaluate_uf(name: &str, x: &[f64]) -> Result<Vec<f64>> {
    match name.parse()? {
        id @ BenchmarkId::Uf(_) => Benchmark::new(id).evaluate(x),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

fn g_rastrigin(tail: &[f64]) -> f64 {
    100.0
        * (tail.len() as f64
            + tail
                .iter()
                .map(|x| (x - 0.5).powi(2) - (20.0 * PI * (x - 0.5)).cos())
                .sum::<f64>())
}

fn g_sphere(tail: &[f64]) -> f64 {
    tail.iter().map(|x| (x - 0.5).powi(2)).sum()
}

/// Spherical front shape from angles given as fractions of pi/2.
fn spherical(angles: &[f64], radius: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| {
            let mut v = radius;
            for a in &angles[..m - 1 - i] {
                v *= (a * FRAC_PI_2).cos();
            }
            if i > 0 {
                v *= (angles[m - 1 - i] * FRAC_PI_2).sin();
            }
            v
        })
        .collect()
}

fn dtlz(variant: u8, x: &[f64], m: usize) -> Vec<f64> {
    let (head, tail) = x.split_at(m - 1);
    match variant {
        1 => {
            let g = g_rastrigin(tail);
            (0..m)
                .map(|i| {
                    let mut v = 0.5 * (1.0 + g);
                    for h in &head[..m - 1 - i] {
                        v *= h;
                    }
                    if i > 0 {
                        v *= 1.0 - head[m - 1 - i];
                    }
                    v
                })
                .collect()
        }
        2 => spherical(head, 1.0 + g_sphere(tail), m),
        3 => spherical(head, 1.0 + g_rastrigin(tail), m),
        4 => {
            let biased: Vec<f64> = head.iter().map(|h| h.powi(100)).collect();
            spherical(&biased, 1.0 + g_sphere(tail), m)
        }
        5 | 6 => {
            let g = if variant == 5 {
                g_sphere(tail)
            } else {
                tail.iter().map(|x| x.powf(0.1)).sum()
            };
            // angles as fractions of pi/2: theta_i = (1 + 2 g x_i) / (2 (1 + g))
            let angles: Vec<f64> = head
                .iter()
                .enumerate()
                .map(|(i, h)| if i == 0 { *h } else { (1.0 + 2.0 * g * h) / (2.0 * (1.0 + g)) })
                .collect();
            spherical(&angles, 1.0 + g, m)
        }
        7 => {
            let g = 1.0 + 9.0 / tail.len() as f64 * tail.iter().sum::<f64>();
            let h = m as f64
                - head
                    .iter()
                    .map(|f| f / (1.0 + g) * (1.0 + (3.0 * PI * f).sin()))
                    .sum::<f64>();
            let mut out = head.to_vec();
            out.push((1.0 + g) * h);
            out
        }
        _ => unreachable!("DTLZ variant {variant}"),
    }
}

/// Odd (J1) and even (J2) tail sums of `term(j, x_j)` for 1-based `j >= 2`,
/// each scaled by `2 / |J|`.
fn uf_split<F: Fn(usize, f64) -> f64>(x: &[f64], term: F) -> (f64, f64) {
    let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    for (idx, &xj) in x.iter().enumerate().skip(1) {
        let j = idx + 1;
        let t = term(j, xj);
        if j % 2 == 1 {
            s1 += t;
            n1 += 1;
        } else {
            s2 += t;
            n2 += 1;
        }
    }
    (2.0 * s1 / n1 as f64, 2.0 * s2 / n2 as f64)
}

/// Odd/even `4 sum y^2 - 2 prod cos(20 y pi / sqrt j) + 2`, scaled by `2 / |J|`.
fn uf_product_split<F: Fn(usize, f64) -> f64>(x: &[f64], y: F) -> (f64, f64) {
    let (mut s, mut p, mut n) = ([0.0; 2], [1.0; 2], [0usize; 2]);
    for (idx, &xj) in x.iter().enumerate().skip(1) {
        let j = idx + 1;
        let yj = y(j, xj);
        let k = if j % 2 == 1 { 0 } else { 1 };
        s[k] += yj * yj;
        p[k] *= (20.0 * yj * PI / (j as f64).sqrt()).cos();
        n[k] += 1;
    }
    let term = |k: usize| 2.0 / n[k] as f64 * (4.0 * s[k] - 2.0 * p[k] + 2.0);
    (term(0), term(1))
}

fn uf(variant: u8, x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let x1 = x[0];
    let sine_tail = |j: usize, xj: f64| xj - (6.0 * PI * x1 + j as f64 * PI / n).sin();
    match variant {
        1 => {
            let (a, b) = uf_split(x, |j, xj| sine_tail(j, xj).powi(2));
            vec![x1 + a, 1.0 - x1.sqrt() + b]
        }
        2 => {
            let (a, b) = uf_split(x, |j, xj| {
                let jf = j as f64;
                let amp = 0.3 * x1 * x1 * (24.0 * PI * x1 + 4.0 * jf * PI / n).cos() + 0.6 * x1;
                let phase = 6.0 * PI * x1 + jf * PI / n;
                let y = if j % 2 == 1 { xj - amp * phase.cos() } else { xj - amp * phase.sin() };
                y * y
            });
            vec![x1 + a, 1.0 - x1.sqrt() + b]
        }
        3 => {
            let (a, b) = uf_product_split(x, |j, xj| {
                xj - x1.powf(0.5 * (1.0 + 3.0 * (j as f64 - 2.0) / (n - 2.0)))
            });
            vec![x1 + a, 1.0 - x1.sqrt() + b]
        }
        4 => {
            let (a, b) = uf_split(x, |j, xj| {
                let t = sine_tail(j, xj).abs();
                t / (1.0 + (2.0 * t).exp())
            });
            vec![x1 + a, 1.0 - x1 * x1 + b]
        }
        5 => {
            let big_n = 10.0;
            let eps = 0.1;
            let (a, b) = uf_split(x, |j, xj| {
                let y = sine_tail(j, xj);
                2.0 * y * y - (4.0 * PI * y).cos() + 1.0
            });
            let ripple = (0.5 / big_n + eps) * (2.0 * big_n * PI * x1).sin().abs();
            vec![x1 + ripple + a, 1.0 - x1 + ripple + b]
        }
        6 => {
            let big_n = 2.0;
            let eps = 0.1;
            let (a, b) = uf_product_split(x, sine_tail);
            let ripple = (2.0 * (0.5 / big_n + eps) * (2.0 * big_n * PI * x1).sin()).max(0.0);
            vec![x1 + ripple + a, 1.0 - x1 + ripple + b]
        }
        7 => {
            let (a, b) = uf_split(x, |j, xj| sine_tail(j, xj).powi(2));
            let r = x1.powf(0.2);
            vec![r + a, 1.0 - r + b]
        }
        _ => unreachable!("UF variant {variant}"),
    }
}

/// `f (1 + sin(3 pi f))`, the per-objective term of the DTLZ7 front.
fn dtlz7_gain(f: f64) -> f64 {
    f * (1.0 + (3.0 * PI * f).sin())
}

/// Grid values in `[0, 1]` where the DTLZ7 gain sets a new running maximum.
/// Exactly these coordinates appear on the disconnected front.
fn dtlz7_record_values(resolution: usize) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for i in 0..=resolution {
        let f = i as f64 / resolution as f64;
        let g = dtlz7_gain(f);
        if g > best {
            best = g;
            out.push(f);
        }
    }
    out
}

/// Samples of the true front of a benchmark. 3-objective fronts use a fixed
/// seed so they are reproducible; 2-objective fronts are evenly spaced.
pub fn reference_front(name: &str, count: usize) -> Result<Vec<Vec<f64>>> {
    reference_front_for(name.parse()?, count)
}

pub fn reference_front_for(id: BenchmarkId, count: usize) -> Result<Vec<Vec<f64>>> {
    if count < 100 {
        return Err(invalid(format!("reference front needs at least 100 points, got {count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f0e7);
    let grid = |k: usize| k as f64 / (count - 1) as f64;
    Ok(match id {
        BenchmarkId::Dtlz(1) => (0..count)
            .map(|_| {
                let e: Vec<f64> = (0..3).map(|_| Exp1.sample(&mut rng)).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| 0.5 * v / s).collect()
            })
            .collect(),
        BenchmarkId::Dtlz(2..=4) => (0..count)
            .map(|_| {
                let g: Vec<f64> = (0..3)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        v.abs()
                    })
                    .collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.iter().map(|v| v / norm).collect()
            })
            .collect(),
        BenchmarkId::Dtlz(5 | 6) => (0..count)
            .map(|k| {
                let theta = grid(k) * FRAC_PI_2;
                let c = theta.cos();
                vec![c * FRAC_PI_4.cos(), c * FRAC_PI_4.sin(), theta.sin()]
            })
            .collect(),
        BenchmarkId::Dtlz(7) => {
            let per_axis = (count as f64).sqrt().ceil() as usize;
            let records = dtlz7_record_values(200_000);
            let pick = |k: usize| records[k * (records.len() - 1) / (per_axis - 1)];
            let mut out = Vec::with_capacity(per_axis * per_axis);
            for a in 0..per_axis {
                for b in 0..per_axis {
                    let (f1, f2) = (pick(a), pick(b));
                    out.push(vec![f1, f2, 6.0 - dtlz7_gain(f1) - dtlz7_gain(f2)]);
                }
            }
            out
        }
        BenchmarkId::Uf(1..=3) => (0..count)
            .map(|k| {
                let t = grid(k);
                vec![t, 1.0 - t.sqrt()]
            })
            .collect(),
        BenchmarkId::Uf(4) => (0..count)
            .map(|k| {
                let t = grid(k);
                vec![t, 1.0 - t * t]
            })
            .collect(),
        BenchmarkId::Uf(5) => (0..=20)
            .map(|i| {
                let t = i as f64 / 20.0;
                vec![t, 1.0 - t]
            })
            .collect(),
        BenchmarkId::Uf(6) => {
            let per_segment = (count - 1).div_ceil(2);
            let mut out = vec![vec![0.0, 1.0]];
            for (lo, hi) in [(0.25, 0.5), (0.75, 1.0)] {
                for k in 0..per_segment {
                    let t = lo + (hi - lo) * k as f64 / (per_segment - 1) as f64;
                    out.push(vec![t, 1.0 - t]);
                }
            }
            out
        }
        BenchmarkId::Uf(7) => (0..count)
            .map(|k| {
                let t = grid(k);
                vec![t, 1.0 - t]
            })
            .collect(),
        other => return Err(Error::UnknownProblem(other.to_string())),
    })
}

/// Writes objective vectors as CSV with header `f1,...,fn`.
pub fn write_front_csv<W: Write, P: AsRef<[f64]>>(writer: W, points: &[P]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let m = points.first().map_or(0, |p| p.as_ref().len());
    w.write_record((1..=m).map(|i| format!("f{i}")))?;
    for p in points {
        w.write_record(p.as_ref().iter().map(|v| format_full(*v)))?;
    }
    w.flush()?;
    Ok(())
}
