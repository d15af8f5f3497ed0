//! Right-hand sides of the modified system and the RK4 integrator.
use std::sync::Arc;

use rayon::prelude::*;

use crate::boundary;
use crate::error::{Error, Result};
use crate::fd;
use crate::frame::{CurvaturePartials, FrameDerivs};
use crate::geometry::{hamiltonian_local, momentum_local, norm2, ricci_hat_local, trace, ResidualReport};
use crate::hyperbolicity;
use crate::parallel;
use crate::state::{det3, pack_gamma, pack_sym, Local, StateField, FINV_OFF, F_OFF, G_OFF, K_OFF, M3, NCOMP, T3};

/// Time derivatives of all 33 components, in state storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsField {
    pub df: [Vec<f64>; 9],
    pub dfinv: [Vec<f64>; 9],
    pub dk: [Vec<f64>; 6],
    pub dg: [Vec<f64>; 9],
}

impl RhsField {
    pub fn from_components(comps: Vec<Vec<f64>>) -> RhsField {
        assert_eq!(comps.len(), NCOMP);
        let mut it = comps.into_iter();
        let mut take = || it.next().unwrap();
        RhsField {
            df: std::array::from_fn(|_| take()),
            dfinv: std::array::from_fn(|_| take()),
            dk: std::array::from_fn(|_| take()),
            dg: std::array::from_fn(|_| take()),
        }
    }

    pub fn components(&self) -> Vec<&[f64]> {
        self.df
            .iter()
            .chain(self.dfinv.iter())
            .chain(self.dk.iter())
            .chain(self.dg.iter())
            .map(|v| v.as_slice())
            .collect()
    }

    #[inline]
    pub fn packed(&self, idx: usize) -> [f64; NCOMP] {
        let c = self.components();
        std::array::from_fn(|i| c[i][idx])
    }
}

/// Analytic forcing added to the discrete right-hand side.
pub trait Source: Send + Sync {
    fn eval(&self, t: f64, x: [f64; 3]) -> [f64; NCOMP];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    None,
    Geodesic,
}

#[derive(Clone)]
pub struct EvolveOptions {
    pub boundary: BoundaryPolicy,
    /// Kreiss–Oliger strength; 0 disables
    pub dissipation: f64,
    pub source: Option<Arc<dyn Source>>,
    pub det_floor: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { boundary: BoundaryPolicy::None, dissipation: 0.0, source: None, det_floor: 1e-8 }
    }
}

/// e_0 K_ij = −trK K_ij − ½(R̂_ij + R̂_ji) + ½δ_ij H.
#[inline]
pub fn rhs_k_local(l: &Local, d: &FrameDerivs) -> M3 {
    let r = ricci_hat_local(&l.g, &d.eg);
    let h = hamiltonian_local(&l.k, &l.g, &d.eg);
    let tk = trace(&l.k);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut v = -tk * l.k[i][j] - 0.5 * (r[i][j] + r[j][i]);
            if i == j {
                v += 0.5 * h;
            }
            v
        })
    })
}

/// e_0 Γ_ijb, with the momentum constraint added on the Kronecker terms.
#[inline]
pub fn rhs_gamma_local(l: &Local, d: &FrameDerivs) -> T3 {
    let (k, g) = (&l.k, &l.g);
    let m = momentum_local(k, g, &d.ek);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            std::array::from_fn(|b| {
                let mut v = d.ek[j][b][i] - d.ek[b][j][i];
                for c in 0..3 {
                    v += -k[i][c] * g[c][j][b] - g[j][b][c] * k[c][i] - g[j][i][c] * k[b][c]
                        + g[b][j][c] * k[c][i]
                        + g[b][i][c] * k[j][c];
                }
                if i == b {
                    v += m[j];
                }
                if i == j {
                    v -= m[b];
                }
                v
            })
        })
    })
}

/// e_0 f_i^j = −K_i^c f_c^j and e_0 f^b_j = K_c^b f^c_j.
#[inline]
pub fn rhs_frame_local(l: &Local) -> (M3, M3) {
    let df = std::array::from_fn(|i| std::array::from_fn(|j| -(0..3).map(|c| l.k[i][c] * l.f[c][j]).sum::<f64>()));
    let dfi = std::array::from_fn(|b| std::array::from_fn(|j| (0..3).map(|c| l.k[c][b] * l.finv[c][j]).sum::<f64>()));
    (df, dfi)
}

/// Full pointwise right-hand side in storage order.
#[inline]
pub fn rhs_local(l: &Local, d: &FrameDerivs) -> [f64; NCOMP] {
    let mut out = [0.0; NCOMP];
    let (df, dfi) = rhs_frame_local(l);
    for i in 0..3 {
        for j in 0..3 {
            out[F_OFF + 3 * i + j] = df[i][j];
            out[FINV_OFF + 3 * i + j] = dfi[i][j];
        }
    }
    out[K_OFF..K_OFF + 6].copy_from_slice(&pack_sym(&rhs_k_local(l, d)));
    out[G_OFF..G_OFF + 9].copy_from_slice(&pack_gamma(&rhs_gamma_local(l, d)));
    out
}

/// |K|² is exposed for energy bookkeeping.
pub fn k_norm2(l: &Local) -> f64 {
    norm2(&l.k)
}

/// Discrete right-hand side, including optional dissipation and forcing.
pub fn rhs(state: &StateField, opts: &EvolveOptions) -> RhsField {
    let cp = CurvaturePartials::of(state);
    let grid = &state.grid;
    let t = state.t;
    let src = opts.source.as_deref();
    let mut comps = parallel::pointwise::<NCOMP, _>(grid, |idx| {
        let l = state.local(idx);
        let d = cp.frame(&l.f, idx);
        let mut r = rhs_local(&l, &d);
        if let Some(s) = src {
            let sv = s.eval(t, grid.position(idx));
            for c in 0..NCOMP {
                r[c] += sv[c];
            }
        }
        r
    });
    if opts.dissipation > 0.0 {
        let sc = state.components();
        comps.par_iter_mut().enumerate().for_each(|(c, out)| {
            let q = fd::dissipation(grid, sc[c], opts.dissipation);
            for (o, v) in out.iter_mut().zip(q) {
                *o += v;
            }
        });
    }
    RhsField::from_components(comps)
}

pub fn rhs_k(state: &StateField) -> [Vec<f64>; 6] {
    rhs(state, &EvolveOptions::default()).dk
}

pub fn rhs_gamma(state: &StateField) -> [Vec<f64>; 9] {
    rhs(state, &EvolveOptions::default()).dg
}

pub fn rhs_frame(state: &StateField) -> ([Vec<f64>; 9], [Vec<f64>; 9]) {
    let r = rhs(state, &EvolveOptions::default());
    (r.df, r.dfinv)
}

/// state + a·k, component-wise.
pub fn axpy(state: &StateField, a: f64, k: &RhsField, dt_time: f64) -> StateField {
    let sc = state.components();
    let kc = k.components();
    let comps: Vec<Vec<f64>> =
        (0..NCOMP).into_par_iter().map(|c| sc[c].iter().zip(kc[c]).map(|(u, r)| u + a * r).collect()).collect();
    StateField::from_components(&state.grid, state.t + dt_time, comps).expect("same grid")
}

fn apply_policy(state: &mut StateField, policy: BoundaryPolicy) -> Result<()> {
    match policy {
        BoundaryPolicy::None => Ok(()),
        BoundaryPolicy::Geodesic => boundary::impose_bdcond(state),
    }
}

/// Classical RK4 step; the boundary policy is applied to every stage state.
pub fn step_rk4(state: &StateField, dt: f64, opts: &EvolveOptions) -> Result<StateField> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    let k1 = rhs(state, opts);
    let mut u = axpy(state, 0.5 * dt, &k1, 0.5 * dt);
    apply_policy(&mut u, opts.boundary)?;
    let k2 = rhs(&u, opts);
    let mut u = axpy(state, 0.5 * dt, &k2, 0.5 * dt);
    apply_policy(&mut u, opts.boundary)?;
    let k3 = rhs(&u, opts);
    let mut u = axpy(state, dt, &k3, dt);
    apply_policy(&mut u, opts.boundary)?;
    let k4 = rhs(&u, opts);
    let sc = state.components();
    let (c1, c2, c3, c4) = (k1.components(), k2.components(), k3.components(), k4.components());
    let w = dt / 6.0;
    let comps: Vec<Vec<f64>> = (0..NCOMP)
        .into_par_iter()
        .map(|c| {
            (0..sc[c].len()).map(|i| sc[c][i] + w * (c1[c][i] + 2.0 * c2[c][i] + 2.0 * c3[c][i] + c4[c][i])).collect()
        })
        .collect();
    let mut next = StateField::from_components(&state.grid, state.t + dt, comps)?;
    apply_policy(&mut next, opts.boundary)?;
    check_health(&next, opts.det_floor)?;
    Ok(next)
}

/// Aborts on non-finite values or a degenerate frame.
pub fn check_health(state: &StateField, det_floor: f64) -> Result<()> {
    let v = state.validate();
    if let Some((c, idx)) = v.first_non_finite {
        return Err(Error::Numerical {
            t: state.t,
            reason: format!("non-finite {} at node {:?}", crate::state::component_name(c), state.grid.coords(idx)),
        });
    }
    if v.min_abs_det < det_floor {
        return Err(Error::Numerical {
            t: state.t,
            reason: format!("|det f| = {:.3e} below floor {det_floor:.1e}", v.min_abs_det),
        });
    }
    Ok(())
}

/// Residuals attached to abort reports.
pub fn failure_report(state: &StateField) -> ResidualReport {
    ResidualReport::of(state)
}

/// factor·h_min / max(1, speed).
pub fn cfl_dt_for(min_h: f64, max_speed: f64, factor: f64) -> f64 {
    factor * min_h / max_speed.max(1.0)
}

/// Largest coordinate characteristic speed: frame speeds scaled by the
/// spectral norm of f at the worst point.
pub fn max_coordinate_speed(state: &StateField) -> f64 {
    let frame_speed = hyperbolicity::max_frame_speed();
    let n = state.grid.len();
    let worst = (0..n)
        .into_par_iter()
        .map(|idx| {
            let f = state.f.at(idx);
            let m = nalgebra::Matrix3::from_fn(|i, j| f[i][j]);
            m.singular_values().max()
        })
        .reduce(|| 0.0, f64::max);
    frame_speed * worst
}

pub fn cfl_dt(state: &StateField, factor: f64) -> f64 {
    cfl_dt_for(state.grid.min_h(), max_coordinate_speed(state), factor)
}

/// Determinant of f at a point, exposed for diagnostics.
pub fn frame_det(state: &StateField, idx: usize) -> f64 {
    det3(&state.f.at(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn cfl_examples() {
        assert!((cfl_dt_for(0.1, 1.0, 0.25) - 0.025).abs() < 1e-16);
        assert_eq!(cfl_dt_for(0.1, 0.0, 0.25), 0.025);
        let g = Grid::new([5; 3], [0.1, 0.2, 0.4], [crate::Topology::Periodic; 3], crate::FdOrder::Fourth).unwrap();
        let s = StateField::flat(&g, 0.0);
        assert!((cfl_dt(&s, 0.25) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn minkowski_is_fixed_point() {
        let g = Grid::slab([6, 6, 8], [1.0; 3]).unwrap();
        let s = StateField::flat(&g, 0.0);
        let opts = EvolveOptions { boundary: BoundaryPolicy::Geodesic, ..Default::default() };
        let n = step_rk4(&s, 0.01, &opts).unwrap();
        assert_eq!(n.components(), s.components());
        assert!((n.t - 0.01).abs() < 1e-16);
    }

    #[test]
    fn dust_like_state_is_stationary() {
        let mut l = Local { f: [[0.0; 3]; 3], finv: [[0.0; 3]; 3], k: [[0.0; 3]; 3], g: [[[0.0; 3]; 3]; 3] };
        for i in 0..3 {
            l.f[i][i] = 1.0;
            l.finv[i][i] = 1.0;
            l.k[i][i] = 1.0;
        }
        let d = FrameDerivs { ek: [[[0.0; 3]; 3]; 3], eg: [[[[0.0; 3]; 3]; 3]; 3] };
        let r = rhs_k_local(&l, &d);
        assert!(r.iter().flatten().all(|&v| v == 0.0));
        let p = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        for i in 0..3 {
            l.k[i][i] = p[i];
        }
        let r = rhs_k_local(&l, &d);
        for i in 0..3 {
            assert!((r[i][i] + p[i]).abs() < 1e-15);
        }
    }
}
