//! Coordinate finite differences. Stencils are written in difference form so
//! that constants differentiate to exactly zero.
use rayon::prelude::*;

use crate::grid::{FdOrder, Grid, Topology};

#[inline]
fn d4_interior(um2: f64, um1: f64, up1: f64, up2: f64) -> f64 {
    (8.0 * (up1 - um1) - (up2 - um2)) / 12.0
}

// one-sided closures, point 0 and point 1 of a face, unscaled by 1/h
#[inline]
fn d4_edge0(u: [f64; 5]) -> f64 {
    (48.0 * (u[1] - u[0]) - 36.0 * (u[2] - u[0]) + 16.0 * (u[3] - u[0]) - 3.0 * (u[4] - u[0])) / 12.0
}

#[inline]
fn d4_edge1(u: [f64; 5]) -> f64 {
    (-3.0 * (u[0] - u[1]) + 18.0 * (u[2] - u[1]) - 6.0 * (u[3] - u[1]) + (u[4] - u[1])) / 12.0
}

#[inline]
fn at(u: &[f64], base: usize, s: usize, c: usize) -> f64 {
    u[base + c * s]
}

/// ∂u/∂x^axis at one point, given the line start `base`, stride and position c.
#[inline]
fn stencil(u: &[f64], base: usize, s: usize, n: usize, c: usize, periodic: bool, order: FdOrder) -> f64 {
    let w = |o: isize| -> f64 {
        let cc = (c as isize + o).rem_euclid(n as isize) as usize;
        at(u, base, s, cc)
    };
    match order {
        FdOrder::Fourth => {
            if periodic || (c >= 2 && c + 2 < n) {
                d4_interior(w(-2), w(-1), w(1), w(2))
            } else if c == 0 {
                d4_edge0([w(0), w(1), w(2), w(3), w(4)])
            } else if c == 1 {
                d4_edge1([w(-1), w(0), w(1), w(2), w(3)])
            } else if c == n - 1 {
                -d4_edge0([w(0), w(-1), w(-2), w(-3), w(-4)])
            } else {
                -d4_edge1([w(1), w(0), w(-1), w(-2), w(-3)])
            }
        }
        FdOrder::Second => {
            if periodic || (c >= 1 && c + 1 < n) {
                0.5 * (w(1) - w(-1))
            } else if c == 0 {
                0.5 * (4.0 * (w(1) - w(0)) - (w(2) - w(0)))
            } else {
                -0.5 * (4.0 * (w(-1) - w(0)) - (w(-2) - w(0)))
            }
        }
    }
}

/// Partial derivative along one axis on the whole grid.
pub fn partial(grid: &Grid, u: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    partial_into(grid, u, axis, &mut out);
    out
}

pub fn partial_into(grid: &Grid, u: &[f64], axis: usize, out: &mut [f64]) {
    debug_assert_eq!(u.len(), grid.len());
    let s = grid.strides()[axis];
    let n = grid.n[axis];
    let periodic = grid.topology[axis] == Topology::Periodic;
    let inv_h = 1.0 / grid.h[axis];
    let plane = grid.plane();
    let order = grid.fd;
    out.par_chunks_mut(plane).enumerate().for_each(|(p, ch)| {
        for (l, o) in ch.iter_mut().enumerate() {
            let idx = p * plane + l;
            let c = (idx / s) % n;
            let base = idx - c * s;
            *o = stencil(u, base, s, n, c, periodic, order) * inv_h;
        }
    });
}

/// Coordinate gradients of several fields: result[c][axis].
pub fn gradients(grid: &Grid, fields: &[&[f64]]) -> Vec<[Vec<f64>; 3]> {
    fields.iter().map(|u| [partial(grid, u, 0), partial(grid, u, 1), partial(grid, u, 2)]).collect()
}

/// Kreiss–Oliger dissipation σ/(64h)·δ⁶u summed over axes. On the boundary axis
/// the three nodes nearest each face are left undamped.
pub fn dissipation(grid: &Grid, u: &[f64], sigma: f64) -> Vec<f64> {
    let plane = grid.plane();
    let strides = grid.strides();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(p, ch)| {
        for (l, o) in ch.iter_mut().enumerate() {
            let idx = p * plane + l;
            let mut acc = 0.0;
            for a in 0..3 {
                let (s, n) = (strides[a], grid.n[a]);
                let c = (idx / s) % n;
                let periodic = grid.topology[a] == Topology::Periodic;
                if !periodic && (c < 3 || c + 3 >= n) {
                    continue;
                }
                let base = idx - c * s;
                let w = |o: isize| at(u, base, s, (c as isize + o).rem_euclid(n as isize) as usize);
                let d6 = (w(-3) + w(3)) - 6.0 * (w(-2) + w(2)) + 15.0 * (w(-1) + w(1)) - 20.0 * w(0);
                acc += d6 / (64.0 * grid.h[a]);
            }
            *o = sigma * acc;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(g: &Grid, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..g.len()).map(|i| f(g.position(i))).collect()
    }

    fn err(g: &Grid, axis: usize, f: impl Fn([f64; 3]) -> f64 + Copy, df: impl Fn([f64; 3]) -> f64) -> f64 {
        let u = sample(g, f);
        let d = partial(g, &u, axis);
        (0..g.len()).map(|i| (d[i] - df(g.position(i))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constants_are_exact() {
        let g = Grid::slab([6, 6, 9], [1.0, 1.0, 1.0]).unwrap();
        let u = vec![3.7; g.len()];
        for a in 0..3 {
            assert!(partial(&g, &u, a).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn boundary_closures_exact_for_quartics() {
        let g = Grid::slab([5, 5, 11], [1.0, 1.0, 2.0]).unwrap();
        let e =
            err(&g, 2, |x| x[2].powi(4) - 2.0 * x[2].powi(3) + x[2], |x| 4.0 * x[2].powi(3) - 6.0 * x[2].powi(2) + 1.0);
        assert!(e < 1e-11, "{e}");
        let g2 = g.with_order(FdOrder::Second).unwrap();
        let e = err(&g2, 2, |x| 3.0 * x[2] * x[2] - x[2], |x| 6.0 * x[2] - 1.0);
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn fourth_order_convergence() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::slab([5, 5, n], [1.0; 3]).unwrap();
            errs.push(err(
                &g,
                2,
                |x| (2.0 * PI * x[2]).sin() + x[2].powi(5),
                |x| 2.0 * PI * (2.0 * PI * x[2]).cos() + 5.0 * x[2].powi(4),
            ));
        }
        for w in errs.windows(2) {
            let hr = 63.0 / 31.0;
            let p = (w[0] / w[1]).ln() / f64::ln(hr);
            assert!(p > 3.7, "order {p}, {errs:?}");
        }
        let mut e2 = vec![];
        for n in [16, 32, 64] {
            let g = Grid::with_extent([n, 5, 5], [1.0; 3], [Topology::Periodic; 3], FdOrder::Second).unwrap();
            e2.push(err(&g, 0, |x| (2.0 * PI * x[0]).sin(), |x| 2.0 * PI * (2.0 * PI * x[0]).cos()));
        }
        let p = (e2[1] / e2[2]).log2();
        assert!((p - 2.0).abs() < 0.1, "{p}");
    }

    #[test]
    fn dissipation_kills_nothing_smooth_and_is_zero_near_faces() {
        let g = Grid::slab([8, 8, 12], [1.0; 3]).unwrap();
        let u = sample(&g, |x| x[2] * x[2]);
        let d = dissipation(&g, &u, 0.1);
        assert!(d.iter().all(|v| v.abs() < 1e-9));
        let u = sample(&g, |x| (2.0 * PI * 4.0 * x[0]).cos());
        let d = dissipation(&g, &u, 0.1);
        // highest periodic mode is damped
        assert!(d[g.index(0, 0, 5)] < 0.0);
    }
}
