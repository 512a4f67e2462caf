//! Data-parallel kernels. With the `parallel` feature (default) the
//! dispatching functions run on rayon; without it they fall back to the
//! sequential versions. Both paths return identical results: reductions
//! are over integers or are collected in index order before summing.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per rayon task; small batches are not worth splitting.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 256;

/// `true` if some point in `front` (sorted ascending by its first
/// objective) weakly dominates `sample`.
#[inline]
pub fn is_covered<P: AsRef<[f64]>>(front_sorted: &[P], sample: &[f64]) -> bool {
    let end = front_sorted.partition_point(|p| p.as_ref()[0] <= sample[0]);
    front_sorted[..end]
        .iter()
        .any(|p| p.as_ref().iter().zip(sample).all(|(a, s)| a <= s))
}

/// Index of the only point of `front_sorted` weakly dominating `sample`, if
/// exactly one does.
#[inline]
pub fn sole_cover<P: AsRef<[f64]>>(front_sorted: &[P], sample: &[f64]) -> Option<usize> {
    let end = front_sorted.partition_point(|p| p.as_ref()[0] <= sample[0]);
    let mut found = None;
    for (i, p) in front_sorted[..end].iter().enumerate() {
        if p.as_ref().iter().zip(sample).all(|(a, s)| a <= s) {
            if found.is_some() {
                return None;
            }
            found = Some(i);
        }
    }
    found
}

pub fn count_covered_seq<P: AsRef<[f64]>>(front_sorted: &[P], samples: &[f64], dim: usize) -> usize {
    samples
        .chunks_exact(dim)
        .filter(|s| is_covered(front_sorted, s))
        .count()
}

#[cfg(feature = "parallel")]
pub fn count_covered_par<P: AsRef<[f64]> + Sync>(
    front_sorted: &[P],
    samples: &[f64],
    dim: usize,
) -> usize {
    samples
        .par_chunks_exact(dim)
        .with_min_len(MIN_CHUNK)
        .filter(|s| is_covered(front_sorted, s))
        .count()
}

/// Number of samples (a flat buffer of `dim`-vectors) weakly dominated by
/// at least one point of `front_sorted`.
pub fn count_covered<P: AsRef<[f64]> + Sync>(front_sorted: &[P], samples: &[f64], dim: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        count_covered_par(front_sorted, samples, dim)
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_covered_seq(front_sorted, samples, dim)
    }
}

/// Per-point counts of samples dominated by that point alone.
pub fn exclusive_counts_seq<P: AsRef<[f64]>>(front_sorted: &[P], samples: &[f64], dim: usize) -> Vec<usize> {
    let mut counts = vec![0usize; front_sorted.len()];
    for s in samples.chunks_exact(dim) {
        if let Some(i) = sole_cover(front_sorted, s) {
            counts[i] += 1;
        }
    }
    counts
}

#[cfg(feature = "parallel")]
pub fn exclusive_counts_par<P: AsRef<[f64]> + Sync>(
    front_sorted: &[P],
    samples: &[f64],
    dim: usize,
) -> Vec<usize> {
    let n = front_sorted.len();
    samples
        .par_chunks_exact(dim)
        .with_min_len(MIN_CHUNK)
        .fold(
            || vec![0usize; n],
            |mut acc, s| {
                if let Some(i) = sole_cover(front_sorted, s) {
                    acc[i] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

pub fn exclusive_counts<P: AsRef<[f64]> + Sync>(front_sorted: &[P], samples: &[f64], dim: usize) -> Vec<usize> {
    #[cfg(feature = "parallel")]
    {
        exclusive_counts_par(front_sorted, samples, dim)
    }
    #[cfg(not(feature = "parallel"))]
    {
        exclusive_counts_seq(front_sorted, samples, dim)
    }
}

#[inline]
fn symmetric_cover<P: AsRef<[f64]>>(added: &[P], removed: &[P], prev: &[P], curr: &[P], s: &[f64]) -> (usize, usize) {
    let gain = is_covered(added, s) && !is_covered(prev, s);
    let loss = is_covered(removed, s) && !is_covered(curr, s);
    (gain as usize, loss as usize)
}

pub fn symmetric_cover_counts_seq<P: AsRef<[f64]>>(
    added: &[P],
    removed: &[P],
    prev: &[P],
    curr: &[P],
    samples: &[f64],
    dim: usize,
) -> (usize, usize) {
    samples
        .chunks_exact(dim)
        .map(|s| symmetric_cover(added, removed, prev, curr, s))
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

#[cfg(feature = "parallel")]
pub fn symmetric_cover_counts_par<P: AsRef<[f64]> + Sync>(
    added: &[P],
    removed: &[P],
    prev: &[P],
    curr: &[P],
    samples: &[f64],
    dim: usize,
) -> (usize, usize) {
    samples
        .par_chunks_exact(dim)
        .with_min_len(MIN_CHUNK)
        .map(|s| symmetric_cover(added, removed, prev, curr, s))
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Samples newly covered (dominated by an added point, not by `prev`) and
/// newly uncovered (dominated by a removed point, not by `curr`). All
/// fronts sorted ascending by their first objective.
pub fn symmetric_cover_counts<P: AsRef<[f64]> + Sync>(
    added: &[P],
    removed: &[P],
    prev: &[P],
    curr: &[P],
    samples: &[f64],
    dim: usize,
) -> (usize, usize) {
    #[cfg(feature = "parallel")]
    {
        symmetric_cover_counts_par(added, removed, prev, curr, samples, dim)
    }
    #[cfg(not(feature = "parallel"))]
    {
        symmetric_cover_counts_seq(added, removed, prev, curr, samples, dim)
    }
}

/// Applies `f` to every item, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map`], on at most `workers` threads (all available when `None`).
pub fn map_with_workers<T, U, F>(items: &[T], workers: Option<usize>, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = workers {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(|| items.par_iter().map(f).collect());
            }
        }
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_helpers_agree_with_brute_force() {
        let mut front: Vec<Vec<f64>> = vec![vec![0.1, 0.8], vec![0.5, 0.3], vec![0.9, 0.05], vec![0.4, 0.35]];
        front.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let samples: Vec<f64> = (0..400)
            .flat_map(|i| [(i % 20) as f64 / 20.0, (i / 20) as f64 / 20.0])
            .collect();
        let mut covered = 0;
        let mut excl = vec![0; front.len()];
        for s in samples.chunks_exact(2) {
            let doms: Vec<usize> = (0..front.len())
                .filter(|&i| front[i][0] <= s[0] && front[i][1] <= s[1])
                .collect();
            if !doms.is_empty() {
                covered += 1;
            }
            if doms.len() == 1 {
                excl[doms[0]] += 1;
            }
        }
        assert_eq!(count_covered_seq(&front, &samples, 2), covered);
        assert_eq!(count_covered(&front, &samples, 2), covered);
        assert_eq!(exclusive_counts_seq(&front, &samples, 2), excl);
        assert_eq!(exclusive_counts(&front, &samples, 2), excl);
    }

    #[test]
    fn map_preserves_order() {
        let v: Vec<u64> = (0..1000).collect();
        assert_eq!(map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
