//! Frame-level derivative bundles and the Koszul connection.
use crate::fd;
use crate::grid::Grid;
use crate::parallel;
use crate::state::{
    expand_gamma, expand_sym, pack_gamma, ConnectionCoeffs, FrameCoeffs, InverseFrameCoeffs, StateField, M3, T3,
};

/// Frame derivatives of K and Γ at a point: ek[i] = e_i K, eg[i] = e_i Γ.
#[derive(Debug, Clone, Copy)]
pub struct FrameDerivs {
    pub ek: [M3; 3],
    pub eg: [T3; 3],
}

impl FrameDerivs {
    /// From coordinate partials dk[d][slot], dg[d][slot].
    #[inline]
    pub fn from_partials(f: &M3, dk: &[[f64; 6]; 3], dg: &[[f64; 9]; 3]) -> FrameDerivs {
        let ek = std::array::from_fn(|i| expand_sym(|s| f[i][0] * dk[0][s] + f[i][1] * dk[1][s] + f[i][2] * dk[2][s]));
        let eg =
            std::array::from_fn(|i| expand_gamma(|s| f[i][0] * dg[0][s] + f[i][1] * dg[1][s] + f[i][2] * dg[2][s]));
        FrameDerivs { ek, eg }
    }
}

/// Coordinate gradients of the 15 K/Γ components of a state.
pub struct CurvaturePartials {
    d: Vec<[Vec<f64>; 3]>,
}

impl CurvaturePartials {
    pub fn of(state: &StateField) -> Self {
        let comps: Vec<&[f64]> = state.k.c.iter().chain(state.g.c.iter()).map(|v| v.as_slice()).collect();
        CurvaturePartials { d: fd::gradients(&state.grid, &comps) }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> ([[f64; 6]; 3], [[f64; 9]; 3]) {
        let dk = std::array::from_fn(|a| std::array::from_fn(|s| self.d[s][a][idx]));
        let dg = std::array::from_fn(|a| std::array::from_fn(|s| self.d[6 + s][a][idx]));
        (dk, dg)
    }

    #[inline]
    pub fn frame(&self, f: &M3, idx: usize) -> FrameDerivs {
        let (dk, dg) = self.at(idx);
        FrameDerivs::from_partials(f, &dk, &dg)
    }
}

/// Coordinate gradients of the 9 frame coefficients.
pub struct FramePartials {
    d: Vec<[Vec<f64>; 3]>,
}

impl FramePartials {
    pub fn of(grid: &Grid, f: &FrameCoeffs) -> Self {
        let comps: Vec<&[f64]> = f.c.iter().map(|v| v.as_slice()).collect();
        FramePartials { d: fd::gradients(grid, &comps) }
    }

    /// ef[i][j][l] = e_i f_j^l.
    #[inline]
    pub fn frame(&self, f: &M3, idx: usize) -> T3 {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| std::array::from_fn(|l| (0..3).map(|d| f[i][d] * self.d[3 * j + l][d][idx]).sum()))
        })
    }
}

/// Commutator coefficients c_ij^b = f^b_l (e_i f_j^l − e_j f_i^l).
#[inline]
pub fn commutator(finv: &M3, ef: &T3) -> T3 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| std::array::from_fn(|b| (0..3).map(|l| finv[b][l] * (ef[i][j][l] - ef[j][i][l])).sum()))
    })
}

/// Γ_ijb = ½(c_ij^b − c_jb^i + c_bi^j) of the metric that makes the frame orthonormal.
#[inline]
pub fn koszul_local(finv: &M3, ef: &T3) -> T3 {
    let c = commutator(finv, ef);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| std::array::from_fn(|b| 0.5 * (c[i][j][b] - c[j][b][i] + c[b][i][j])))
    })
}

pub fn connection_from_frame(f: &FrameCoeffs, finv: &InverseFrameCoeffs, grid: &Grid) -> ConnectionCoeffs {
    let fp = FramePartials::of(grid, f);
    let out = parallel::pointwise::<9, _>(grid, |idx| {
        let fm = f.at(idx);
        let ef = fp.frame(&fm, idx);
        pack_gamma(&koszul_local(&finv.at(idx), &ef))
    });
    let mut it = out.into_iter();
    ConnectionCoeffs { c: std::array::from_fn(|_| it.next().unwrap()) }
}

/// All 27 Koszul entries, without using the antisymmetric storage.
pub fn connection_from_frame_full(f: &FrameCoeffs, finv: &InverseFrameCoeffs, grid: &Grid) -> Vec<T3> {
    let fp = FramePartials::of(grid, f);
    (0..grid.len()).map(|idx| koszul_local(&finv.at(idx), &fp.frame(&f.at(idx), idx))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateField;

    #[test]
    fn flat_and_homogeneous_frames_have_no_connection() {
        let g = Grid::periodic([6; 3], [1.0; 3]).unwrap();
        let mut s = StateField::flat(&g, 1.0);
        let c = connection_from_frame(&s.f, &s.finv, &g);
        assert!(c.c.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        let p = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        let t: f64 = 1.7;
        for a in 0..3 {
            s.f.c[4 * a].iter_mut().for_each(|v| *v = t.powf(-p[a]));
            s.finv.c[4 * a].iter_mut().for_each(|v| *v = t.powf(p[a]));
        }
        let c = connection_from_frame(&s.f, &s.finv, &g);
        assert!(c.c.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn full_koszul_is_antisymmetric() {
        let g = Grid::periodic([8, 8, 8], [1.0; 3]).unwrap();
        let mut s = StateField::flat(&g, 0.0);
        for idx in 0..g.len() {
            let x = g.position(idx);
            let tau = std::f64::consts::TAU;
            s.f.c[1][idx] = 0.2 * (tau * x[2]).sin();
            s.f.c[5][idx] = 0.1 * (tau * x[0]).cos();
            s.f.c[0][idx] = 1.0 + 0.1 * (tau * x[1]).sin();
        }
        for idx in 0..g.len() {
            let inv = crate::state::inverse3(&s.f.at(idx)).unwrap();
            for b in 0..3 {
                for j in 0..3 {
                    s.finv.c[3 * b + j][idx] = inv[j][b];
                }
            }
        }
        let full = connection_from_frame_full(&s.f, &s.finv, &g);
        let packed = connection_from_frame(&s.f, &s.finv, &g);
        for (idx, gm) in full.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    for b in 0..3 {
                        assert!((gm[i][j][b] + gm[i][b][j]).abs() < 1e-13);
                    }
                }
            }
            assert_eq!(packed.at(idx)[0][1][2], gm[0][1][2]);
        }
    }
}
