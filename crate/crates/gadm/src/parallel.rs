//! Data-parallel helpers. Work is split by x¹ planes (outputs) or by fixed-size
//! chunks (reductions); chunk boundaries never depend on the thread count, so
//! every result is bit-identical regardless of how many workers run.
use rayon::prelude::*;

use crate::grid::Grid;

const CHUNK: usize = 4096;

/// Evaluates `f` at every grid point and returns M component fields.
pub fn pointwise<const M: usize, F>(grid: &Grid, f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> [f64; M] + Sync,
{
    let n = grid.len();
    let plane = grid.plane();
    let mut outs: Vec<Vec<f64>> = (0..M).map(|_| vec![0.0; n]).collect();
    let mut per_plane: Vec<Vec<&mut [f64]>> = (0..grid.n[0]).map(|_| Vec::with_capacity(M)).collect();
    for o in outs.iter_mut() {
        for (p, ch) in o.chunks_mut(plane).enumerate() {
            per_plane[p].push(ch);
        }
    }
    per_plane.into_par_iter().enumerate().for_each(|(p, mut slices)| {
        let base = p * plane;
        for l in 0..plane {
            let r = f(base + l);
            for (c, s) in slices.iter_mut().enumerate() {
                s[l] = r[c];
            }
        }
    });
    outs
}

/// Single-field version of [`pointwise`].
pub fn pointwise1<F>(grid: &Grid, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let plane = grid.plane();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(p, ch)| {
        for (l, v) in ch.iter_mut().enumerate() {
            *v = f(p * plane + l);
        }
    });
    out
}

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}

/// Deterministic sum of f(0..n).
pub fn det_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n);
            let mut s = 0.0;
            for i in c * CHUNK..end {
                s += f(i);
            }
            s
        })
        .collect();
    pairwise(&partial)
}

/// Max of |f(i)|; NaN propagates.
pub fn det_max_abs<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n);
            let mut m: f64 = 0.0;
            for i in c * CHUNK..end {
                let v = f(i).abs();
                if v.is_nan() || v > m {
                    m = v;
                }
                if m.is_nan() {
                    break;
                }
            }
            m
        })
        .collect();
    partial.iter().fold(0.0, |m, &v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_are_thread_independent() {
        let n = 100_003;
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| det_sum(n, f));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| det_sum(n, f));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn max_abs_sees_nan() {
        assert!(det_max_abs(10, |i| if i == 7 { f64::NAN } else { 1.0 }).is_nan());
        assert_eq!(det_max_abs(10, |i| -(i as f64)), 9.0);
    }
}
