//! Curvature, constraint and torsion expressions. Pointwise kernels take values
//! and frame derivatives; the state-level wrappers supply finite differences.
use crate::frame::{CurvaturePartials, FrameDerivs, FramePartials};
use crate::parallel;
use crate::state::{StateField, M3, T3};

pub type R4 = [[[[f64; 3]; 3]; 3]; 3];

#[inline]
pub fn trace(k: &M3) -> f64 {
    k[0][0] + k[1][1] + k[2][2]
}

#[inline]
pub fn norm2(k: &M3) -> f64 {
    k.iter().flatten().map(|x| x * x).sum()
}

/// Γ^b_jb, contracted on the first and last slot.
#[inline]
pub fn gamma_trace(g: &T3) -> [f64; 3] {
    std::array::from_fn(|j| (0..3).map(|b| g[b][j][b]).sum())
}

/// Γ^b_b^c.
#[inline]
fn gamma_trace12(g: &T3) -> [f64; 3] {
    std::array::from_fn(|c| (0..3).map(|b| g[b][b][c]).sum())
}

/// R̂_ij, from −R̂_ij = e_iΓ^b_jb − e^bΓ_ijb + Γ^b_i^cΓ_cjb + Γ^b_b^cΓ_ijc.
#[inline]
pub fn ricci_hat_local(g: &T3, eg: &[T3; 3]) -> M3 {
    let tr = gamma_trace12(g);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut a = 0.0;
            for b in 0..3 {
                a += eg[i][b][j][b] - eg[b][i][j][b];
                for c in 0..3 {
                    a += g[b][i][c] * g[c][j][b];
                }
            }
            for c in 0..3 {
                a += tr[c] * g[i][j][c];
            }
            -a
        })
    })
}

/// R̂ from −R̂ = 2e^jΓ^b_jb + Γ^{bjc}Γ_cjb + Γ^b_b^cΓ^j_jc.
#[inline]
pub fn scalar_local(g: &T3, eg: &[T3; 3]) -> f64 {
    let tr = gamma_trace12(g);
    let mut a = 0.0;
    for j in 0..3 {
        for b in 0..3 {
            a += 2.0 * eg[j][b][j][b];
            for c in 0..3 {
                a += g[b][j][c] * g[c][j][b];
            }
        }
        a += tr[j] * tr[j];
    }
    -a
}

#[inline]
pub fn hamiltonian_local(k: &M3, g: &T3, eg: &[T3; 3]) -> f64 {
    let tk = trace(k);
    scalar_local(g, eg) - norm2(k) + tk * tk
}

/// M_j = e^cK_cj − Γ_c^{cl}K_lj − Γ^c_j^lK_cl − e_j trK; also R̂_j0.
#[inline]
pub fn momentum_local(k: &M3, g: &T3, ek: &[M3; 3]) -> [f64; 3] {
    let tr = gamma_trace12(g);
    std::array::from_fn(|j| {
        let mut m = 0.0;
        for c in 0..3 {
            m += ek[c][c][j] - ek[j][c][c] - tr[c] * k[c][j];
            for l in 0..3 {
                m -= g[c][j][l] * k[c][l];
            }
        }
        m
    })
}

/// R̂_aijb = e_aΓ_ijb − e_iΓ_ajb − Γ_ab^cΓ_ijc + Γ_ib^cΓ_ajc − Γ_ai^cΓ_cjb + Γ_ia^cΓ_cjb.
#[inline]
pub fn riemann_local(g: &T3, eg: &[T3; 3]) -> R4 {
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for b in 0..3 {
                    let mut v = eg[a][i][j][b] - eg[i][a][j][b];
                    for c in 0..3 {
                        v += -g[a][b][c] * g[i][j][c] + g[i][b][c] * g[a][j][c] - g[a][i][c] * g[c][j][b]
                            + g[i][a][c] * g[c][j][b];
                    }
                    r[a][i][j][b] = v;
                }
            }
        }
    }
    r
}

/// C_ijb = f^b_l e_i f_j^l − f^b_l e_j f_i^l − Γ_ijb + Γ_jib, with ef[i][j][l] = e_i f_j^l.
#[inline]
pub fn torsion_local(finv: &M3, ef: &T3, g: &T3) -> T3 {
    let c = crate::frame::commutator(finv, ef);
    std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|b| c[i][j][b] - g[i][j][b] + g[j][i][b])))
}

/// e_0C_ijb = K_b^l C_ijl − K_i^l C_ljb − K_j^l C_ilb − δ_ib R̂_j0 + δ_jb R̂_i0.
#[inline]
pub fn torsion_rhs_local(k: &M3, c: &T3, rb0: &[f64; 3]) -> T3 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            std::array::from_fn(|b| {
                let mut v = 0.0;
                for l in 0..3 {
                    v += k[b][l] * c[i][j][l] - k[i][l] * c[l][j][b] - k[j][l] * c[i][l][b];
                }
                if i == b {
                    v -= rb0[j];
                }
                if j == b {
                    v += rb0[i];
                }
                v
            })
        })
    })
}

/// Pairs (i<j) used to store fields antisymmetric in their first two slots.
pub const C_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

#[inline]
pub fn pack_c(c: &T3) -> [f64; 9] {
    std::array::from_fn(|s| {
        let (i, j) = C_PAIRS[s / 3];
        c[i][j][s % 3]
    })
}

#[inline]
pub fn expand_c(v: impl Fn(usize) -> f64) -> T3 {
    let mut c = [[[0.0; 3]; 3]; 3];
    for (p, &(i, j)) in C_PAIRS.iter().enumerate() {
        for b in 0..3 {
            let x = v(3 * p + b);
            c[i][j][b] = x;
            c[j][i][b] = -x;
        }
    }
    c
}

fn collect<const N: usize>(v: Vec<Vec<f64>>) -> [Vec<f64>; N] {
    let mut it = v.into_iter();
    std::array::from_fn(|_| it.next().unwrap())
}

/// R̂_ij on the grid: out[3i+j].
pub fn spatial_ricci_hat(state: &StateField) -> [Vec<f64>; 9] {
    let cp = CurvaturePartials::of(state);
    collect(parallel::pointwise::<9, _>(&state.grid, |idx| {
        let f = state.f.at(idx);
        let d = cp.frame(&f, idx);
        let r = ricci_hat_local(&state.g.at(idx), &d.eg);
        std::array::from_fn(|s| r[s / 3][s % 3])
    }))
}

pub fn spatial_scalar(state: &StateField) -> Vec<f64> {
    let cp = CurvaturePartials::of(state);
    parallel::pointwise1(&state.grid, |idx| {
        let d = cp.frame(&state.f.at(idx), idx);
        scalar_local(&state.g.at(idx), &d.eg)
    })
}

pub fn hamiltonian_residual(state: &StateField) -> Vec<f64> {
    let cp = CurvaturePartials::of(state);
    parallel::pointwise1(&state.grid, |idx| {
        let d = cp.frame(&state.f.at(idx), idx);
        hamiltonian_local(&state.k.at(idx), &state.g.at(idx), &d.eg)
    })
}

pub fn momentum_residual(state: &StateField) -> [Vec<f64>; 3] {
    let cp = CurvaturePartials::of(state);
    momentum_with(state, &cp)
}

pub(crate) fn momentum_with(state: &StateField, cp: &CurvaturePartials) -> [Vec<f64>; 3] {
    collect(parallel::pointwise::<3, _>(&state.grid, |idx| {
        let d = cp.frame(&state.f.at(idx), idx);
        momentum_local(&state.k.at(idx), &state.g.at(idx), &d.ek)
    }))
}

/// R̂_b0; the same evaluation as the momentum residual.
pub fn ricci_b0(state: &StateField) -> [Vec<f64>; 3] {
    momentum_residual(state)
}

/// Independent torsion components C_ijb, i<j, stored [pair][b].
pub fn torsion(state: &StateField) -> [Vec<f64>; 9] {
    let fp = FramePartials::of(&state.grid, &state.f);
    torsion_with(state, &fp)
}

pub(crate) fn torsion_with(state: &StateField, fp: &FramePartials) -> [Vec<f64>; 9] {
    collect(parallel::pointwise::<9, _>(&state.grid, |idx| {
        let f = state.f.at(idx);
        pack_c(&torsion_local(&state.finv.at(idx), &fp.frame(&f, idx), &state.g.at(idx)))
    }))
}

/// R̂_aijb at every point.
pub fn riemann_hat(state: &StateField) -> Vec<R4> {
    let cp = CurvaturePartials::of(state);
    (0..state.grid.len()).map(|idx| riemann_local(&state.g.at(idx), &cp.frame(&state.f.at(idx), idx).eg)).collect()
}

/// Predicted e_0 C from the current torsion and R̂_·0, same storage as [`torsion`].
pub fn torsion_rhs(state: &StateField) -> [Vec<f64>; 9] {
    let fp = FramePartials::of(&state.grid, &state.f);
    let cp = CurvaturePartials::of(state);
    collect(parallel::pointwise::<9, _>(&state.grid, |idx| {
        let f = state.f.at(idx);
        let k = state.k.at(idx);
        let g = state.g.at(idx);
        let c = torsion_local(&state.finv.at(idx), &fp.frame(&f, idx), &g);
        let d: FrameDerivs = cp.frame(&f, idx);
        let rb0 = momentum_local(&k, &g, &d.ek);
        pack_c(&torsion_rhs_local(&k, &c, &rb0))
    }))
}

/// L² norm with coordinate cell volume.
pub fn l2(grid: &crate::grid::Grid, fields: &[&[f64]]) -> f64 {
    let dv = grid.cell_volume();
    let s = parallel::det_sum(grid.len(), |idx| fields.iter().map(|u| u[idx] * u[idx]).sum::<f64>());
    (s * dv).sqrt()
}

pub fn max_abs(fields: &[&[f64]]) -> f64 {
    fields.iter().map(|u| parallel::det_max_abs(u.len(), |i| u[i])).fold(0.0, |m: f64, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub l2: f64,
    pub max: f64,
}

impl Norms {
    pub fn of(grid: &crate::grid::Grid, fields: &[&[f64]]) -> Norms {
        Norms { l2: l2(grid, fields), max: max_abs(fields) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualReport {
    pub t: f64,
    pub ham: Norms,
    pub mom: [Norms; 3],
    pub torsion: Norms,
    pub ricci_b0: Norms,
    pub fframe: f64,
}

impl ResidualReport {
    pub fn of(state: &StateField) -> ResidualReport {
        let g = &state.grid;
        let cp = CurvaturePartials::of(state);
        let fp = FramePartials::of(g, &state.f);
        let ham = parallel::pointwise1(g, |idx| {
            let d = cp.frame(&state.f.at(idx), idx);
            hamiltonian_local(&state.k.at(idx), &state.g.at(idx), &d.eg)
        });
        let mom = momentum_with(state, &cp);
        let tor = torsion_with(state, &fp);
        let tor_refs: Vec<&[f64]> = tor.iter().map(|v| v.as_slice()).collect();
        let mom_refs: Vec<&[f64]> = mom.iter().map(|v| v.as_slice()).collect();
        ResidualReport {
            t: state.t,
            ham: Norms::of(g, &[&ham]),
            mom: std::array::from_fn(|j| Norms::of(g, &[&mom[j]])),
            torsion: Norms::of(g, &tor_refs),
            ricci_b0: Norms::of(g, &mom_refs),
            fframe: state.validate().frame_drift,
        }
    }

    pub const CSV_HEADER: &'static str = "t,ham_l2,ham_max,mom1_l2,mom1_max,mom2_l2,mom2_max,mom3_l2,mom3_max,torsion_l2,torsion_max,riccib0_l2,riccib0_max,fdrift_max";

    pub fn csv_fields(&self) -> Vec<f64> {
        let mut v = vec![self.t, self.ham.l2, self.ham.max];
        for m in &self.mom {
            v.push(m.l2);
            v.push(m.max);
        }
        v.extend([self.torsion.l2, self.torsion.max, self.ricci_b0.l2, self.ricci_b0.max, self.fframe]);
        v
    }

    pub fn max_constraint(&self) -> f64 {
        self.ham.max.max(self.torsion.max).max(self.mom.iter().map(|m| m.max).fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::state::{expand_gamma, StateField};

    fn zero_eg() -> [T3; 3] {
        [[[[0.0; 3]; 3]; 3]; 3]
    }

    fn eps(i: usize, j: usize, k: usize) -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    }

    #[test]
    fn levi_civita_connection_ricci() {
        // Γ_ijb = c ε_ijb: quadratic terms Γ^b_i^cΓ_cjb = c² ε_bic ε_cjb = −2c² δ_ij... computed by a scripted sum.
        let c = 0.7;
        let g: T3 = std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|b| c * eps(i, j, b))));
        let r = ricci_hat_local(&g, &zero_eg());
        let mut scripted = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for b in 0..3 {
                    for cc in 0..3 {
                        s += c * eps(b, i, cc) * c * eps(cc, j, b);
                    }
                }
                scripted[i][j] = -s;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - scripted[i][j]).abs() < 1e-15);
                assert!((r[i][j] - if i == j { 2.0 * c * c } else { 0.0 }).abs() < 1e-15);
            }
        }
        assert!((scalar_local(&g, &zero_eg()) - 6.0 * c * c).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let g0 = [[[0.0; 3]; 3]; 3];
        assert_eq!(hamiltonian_local(&id, &g0, &zero_eg()), 6.0);
        let p = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        let k = [[p[0], 0.0, 0.0], [0.0, p[1], 0.0], [0.0, 0.0, p[2]]];
        assert!(hamiltonian_local(&k, &g0, &zero_eg()).abs() < 1e-15);
    }

    #[test]
    fn torsion_with_flat_frame() {
        let g = Grid::periodic([5; 3], [1.0; 3]).unwrap();
        let mut s = StateField::flat(&g, 0.0);
        // Γ_123 = 1 (slot i=0 pair (1,2))
        s.g.c[2].iter_mut().for_each(|v| *v = 1.0);
        let c = torsion(&s);
        let ct = expand_c(|k| c[k][0]);
        let gm = expand_gamma(|k| s.g.c[k][0]);
        for i in 0..3 {
            for j in 0..3 {
                for b in 0..3 {
                    assert_eq!(ct[i][j][b], gm[j][i][b] - gm[i][j][b]);
                }
            }
        }
        assert_eq!(ct[0][1][2], -1.0);
        assert_eq!(ct[1][0][2], 1.0);
    }

    #[test]
    fn torsion_rhs_kronecker() {
        let k = [[0.0; 3]; 3];
        let c = [[[0.0; 3]; 3]; 3];
        let r = torsion_rhs_local(&k, &c, &[1.0, 0.0, 0.0]);
        for i in 0..3 {
            for j in 0..3 {
                for b in 0..3 {
                    let rb = |x: usize| if x == 0 { 1.0 } else { 0.0 };
                    let want = -(if i == b { rb(j) } else { 0.0 }) + if j == b { rb(i) } else { 0.0 };
                    assert_eq!(r[i][j][b], want);
                }
            }
        }
        assert_eq!(r[0][2][1], 0.0);
        assert_eq!(r[1][0][1], -1.0);
        assert_eq!(r[0][1][1], 1.0);
    }

    #[test]
    fn riemann_contracts_to_ricci() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g: T3 = expand_gamma(|_| rng.gen_range(-1.0..1.0));
        let eg: [T3; 3] = std::array::from_fn(|_| expand_gamma(|_| rng.gen_range(-1.0..1.0)));
        let r4 = riemann_local(&g, &eg);
        let ric = ricci_hat_local(&g, &eg);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|b| r4[b][i][j][b]).sum();
                assert!((s - ric[i][j]).abs() < 1e-13, "{i}{j}");
            }
        }
        let tr: f64 = (0..3).map(|i| ric[i][i]).sum();
        assert!((tr - scalar_local(&g, &eg)).abs() < 1e-13);
    }
}
