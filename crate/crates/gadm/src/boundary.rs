//! Totally geodesic boundary at the x³ faces: injected conditions, corner
//! compatibility residuals and the boundary energy flux.
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::CurvaturePartials;
use crate::geometry::{momentum_local, trace};
use crate::hyperbolicity::{Matrix15, STORAGE};
use crate::state::{g_slot, k_slot, StateField, G_OFF, K_OFF, M3, T3};

/// Components forced to zero on the faces: K13, K23, Γ113, Γ123, Γ213, Γ223.
pub const BDCOND_COMPONENTS: [usize; 6] = [K_OFF + 3, K_OFF + 4, G_OFF + 1, G_OFF + 2, G_OFF + 4, G_OFF + 5];

fn require_boundary(state: &StateField) -> Result<()> {
    if state.grid.has_boundary() {
        Ok(())
    } else {
        Err(Error::Config("boundary conditions need a boundary axis; the grid is fully periodic".into()))
    }
}

pub fn impose_bdcond(state: &mut StateField) -> Result<()> {
    require_boundary(state)?;
    let faces = state.grid.face_nodes();
    let mut comps = state.components_mut();
    for &c in BDCOND_COMPONENTS.iter() {
        let v = &mut comps[c];
        for &idx in &faces {
            v[idx] = 0.0;
        }
    }
    Ok(())
}

/// max |bdcond component| over face nodes.
pub fn bdcond_max(state: &StateField) -> f64 {
    let comps = state.components();
    let mut m: f64 = 0.0;
    for idx in state.grid.face_nodes() {
        for &c in BDCOND_COMPONENTS.iter() {
            m = m.max(comps[c][idx].abs());
        }
    }
    m
}

/// Q = K_3^j Γ^b_jb − trK Γ^b_3b − Γ^{ij}_3 K_ij.
pub fn boundary_flux_integrand(k: &M3, g: &T3) -> f64 {
    let mut q = 0.0;
    for j in 0..3 {
        for b in 0..3 {
            q += k[2][j] * g[b][j][b];
        }
    }
    let tk = trace(k);
    for b in 0..3 {
        q -= tk * g[b][2][b];
    }
    for i in 0..3 {
        for j in 0..3 {
            q -= g[i][j][2] * k[i][j];
        }
    }
    q
}

/// −½|K|² − ¼|Γ|² + Q.
pub fn flux_form_value(k: &M3, g: &T3) -> f64 {
    let k2: f64 = k.iter().flatten().map(|x| x * x).sum();
    let g2: f64 = g.iter().flatten().flatten().map(|x| x * x).sum();
    -0.5 * k2 - 0.25 * g2 + boundary_flux_integrand(k, g)
}

fn sym_k(i: usize, j: usize) -> usize {
    k_slot(i, j)
}

/// Symbol index and sign of Γ_ijb, if nonzero.
fn sym_g(i: usize, j: usize, b: usize) -> Option<(usize, f64)> {
    let (s, sign) = g_slot(i, j, b)?;
    let pos = STORAGE.iter().position(|&x| x == G_OFF + s).expect("every Γ slot is a symbol variable");
    Some((pos, sign))
}

/// The quadratic form −½|K|² − ¼|Γ|² + Q in the symbol ordering, accumulated
/// term by term from the index sums (entries are dyadic rationals).
pub fn flux_form_matrix() -> Matrix15 {
    let mut m = Matrix15::zeros();
    let mut bil = |a: usize, b: usize, c: f64| {
        m[(a, b)] += 0.5 * c;
        m[(b, a)] += 0.5 * c;
    };
    for i in 0..3 {
        for j in 0..3 {
            let a = sym_k(i, j);
            bil(a, a, -0.5);
            for b in 0..3 {
                if let Some((g, _)) = sym_g(i, j, b) {
                    bil(g, g, -0.25);
                }
            }
        }
    }
    for j in 0..3 {
        for b in 0..3 {
            if let Some((g, s)) = sym_g(b, j, b) {
                bil(sym_k(2, j), g, s);
            }
        }
    }
    for i in 0..3 {
        for b in 0..3 {
            if let Some((g, s)) = sym_g(b, 2, b) {
                bil(sym_k(i, i), g, -s);
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            if let Some((g, s)) = sym_g(i, j, 2) {
                bil(sym_k(i, j), g, -s);
            }
        }
    }
    m
}

/// Expand a 15-vector (symbol order) into K and Γ.
pub fn unpack_symbol(u: &[f64; 15]) -> (M3, T3) {
    let mut packed = [0.0; crate::state::NCOMP];
    for (r, &s) in STORAGE.iter().enumerate() {
        packed[s] = u[r];
    }
    let l = crate::state::Local::from_packed(&packed);
    (l.k, l.g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerResiduals {
    pub nodes: Vec<usize>,
    /// [A=1 connection condition, A=2 connection condition, e_3K11, e_3K22, e_3K12]
    pub values: Vec<[f64; 5]>,
}

impl CornerResiduals {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Left-minus-right of the corner conditions at every face node, using the
/// grid's one-sided normal stencils.
pub fn corner_residuals(state: &StateField) -> Result<CornerResiduals> {
    require_boundary(state)?;
    let cp = CurvaturePartials::of(state);
    let nodes = state.grid.face_nodes();
    let values = nodes
        .par_iter()
        .map(|&idx| {
            let l = state.local(idx);
            let d = cp.frame(&l.f, idx);
            let (k, g) = (&l.k, &l.g);
            let tr: [f64; 2] = std::array::from_fn(|c| (0..3).map(|b| g[b][b][c]).sum());
            let mut r = [0.0; 5];
            for a in 0..2 {
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for b in 0..2 {
                    lhs += d.eg[2][b][a][b];
                    rhs += d.eg[b][2][a][b];
                }
                for c in 0..2 {
                    rhs -= tr[c] * g[2][a][c];
                }
                r[a] = lhs - rhs;
            }
            let s = |x: usize, y: usize| (0..2).map(|c| g[2][x][c] * k[y][c]).sum::<f64>();
            r[2] = d.ek[2][0][0] + 2.0 * s(1, 1);
            r[3] = d.ek[2][1][1] + 2.0 * s(0, 0);
            r[4] = d.ek[2][0][1] - s(0, 1) - s(1, 0);
            r
        })
        .collect();
    Ok(CornerResiduals { nodes, values })
}

/// Data at a corner point for the angled compatibility conditions, expressed in
/// an orthonormal tangential basis (X̄_1, X̄_2) of the corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleCornerData {
    /// k(X̄_A, X̄_B)
    pub k_tt: [[f64; 2]; 2],
    /// k(X̄_A, N̄)
    pub k_tn: [f64; 2],
    /// h(∇_{X̄_A} N̄, X̄_B)
    pub dn: [[f64; 2]; 2],
    pub omega: f64,
    /// X̄_A ω
    pub domega: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleResiduals {
    /// k(X̄,Ȳ) sinh ω − h(∇_X̄ N̄, Ȳ) cosh ω
    pub first: [[f64; 2]; 2],
    /// k(X̄, N̄) − X̄ω
    pub second: [f64; 2],
}

pub fn corner_residuals_angle(d: &AngleCornerData) -> AngleResiduals {
    let (sh, ch) = (d.omega.sinh(), d.omega.cosh());
    AngleResiduals {
        first: std::array::from_fn(|a| std::array::from_fn(|b| d.k_tt[a][b] * sh - d.dn[a][b] * ch)),
        second: std::array::from_fn(|a| d.k_tn[a] - d.domega[a]),
    }
}

/// max |R̂_30| over both faces.
pub fn ricci_boundary_check(state: &StateField) -> Result<f64> {
    require_boundary(state)?;
    let cp = CurvaturePartials::of(state);
    Ok(state
        .grid
        .face_nodes()
        .into_iter()
        .map(|idx| {
            let l = state.local(idx);
            momentum_local(&l.k, &l.g, &cp.frame(&l.f, idx).ek)[2].abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};

    fn random_symbol(rng: &mut impl Rng) -> [f64; 15] {
        std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn flux_matrix_matches_integrand_and_is_negative() {
        let m = flux_form_matrix();
        assert_eq!(m, m.transpose());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u = random_symbol(&mut rng);
            let (k, g) = unpack_symbol(&u);
            let v = nalgebra::SVector::<f64, 15>::from_row_slice(&u);
            let quad = (v.transpose() * m * v)[(0, 0)];
            assert!((quad - flux_form_value(&k, &g)).abs() < 1e-13);
        }
        let ev = SymmetricEigen::new(m).eigenvalues;
        assert!(ev.max() <= 1e-12, "{}", ev.max());
        let mut e = [0.0; 15];
        e[0] = 1.0;
        let (k, g) = unpack_symbol(&e);
        assert_eq!(flux_form_value(&k, &g), -0.5);
    }

    #[test]
    fn q_examples() {
        let mut k = [[0.0; 3]; 3];
        let mut g = [[[0.0; 3]; 3]; 3];
        g[0][1][2] = 1.0;
        g[0][2][1] = -1.0;
        assert_eq!(boundary_flux_integrand(&k, &g), 0.0);
        // K33 = 1, Γ313 = 1: K_3^3 Γ^b_3b → Γ_131 = 0 contributions: Γ_333, Γ_131 = −Γ_113 ...
        k[2][2] = 1.0;
        let mut g = [[[0.0; 3]; 3]; 3];
        g[2][0][2] = 1.0;
        g[2][2][0] = -1.0;
        // brute force over all index values
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for b in 0..3 {
                    if i == 2 {
                        brute += k[i][j] * g[b][j][b];
                    }
                    if i == j {
                        brute -= k[i][j] * g[b][2][b];
                    }
                    if b == 2 {
                        brute -= g[i][j][b] * k[i][j];
                    }
                }
            }
        }
        assert_eq!(boundary_flux_integrand(&k, &g), brute);
    }

    #[test]
    fn corner_gradient_isolated() {
        let g = Grid::slab([5, 5, 9], [1.0; 3]).unwrap();
        let mut s = StateField::flat(&g, 0.0);
        for idx in 0..g.len() {
            s.k.c[0][idx] = 0.3 * g.position(idx)[2];
        }
        let r = corner_residuals(&s).unwrap();
        for v in &r.values {
            assert!((v[2] - 0.3).abs() < 1e-13);
            assert_eq!(v[3], 0.0);
        }
        let p = StateField::flat(&g, 0.0);
        assert_eq!(corner_residuals(&p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn impose_is_local_and_idempotent() {
        let g = Grid::slab([5, 5, 7], [1.0; 3]).unwrap();
        let mut s = StateField::flat(&g, 0.0);
        for c in s.components_mut() {
            for (i, v) in c.iter_mut().enumerate() {
                *v = (i as f64 * 0.37).sin() + 2.0;
            }
        }
        let before = s.clone();
        impose_bdcond(&mut s).unwrap();
        let once = s.clone();
        impose_bdcond(&mut s).unwrap();
        assert_eq!(s, once);
        for idx in 0..g.len() {
            for c in 0..crate::state::NCOMP {
                let changed = s.components()[c][idx] != before.components()[c][idx];
                assert_eq!(changed, g.is_face(idx) && BDCOND_COMPONENTS.contains(&c));
            }
        }
        let mut p = StateField::flat(&Grid::periodic([5; 3], [1.0; 3]).unwrap(), 0.0);
        assert!(impose_bdcond(&mut p).is_err());
    }

    #[test]
    fn angle_examples() {
        let zero =
            AngleCornerData { k_tt: [[0.0; 2]; 2], k_tn: [0.0; 2], dn: [[0.0; 2]; 2], omega: 0.0, domega: [0.0; 2] };
        let r = corner_residuals_angle(&zero);
        assert_eq!(r.first, [[0.0; 2]; 2]);
        assert_eq!(r.second, [0.0; 2]);
        let mut d = zero;
        d.k_tt = [[3.0, -1.0], [-1.0, 2.0]];
        assert_eq!(corner_residuals_angle(&d).first, [[0.0; 2]; 2]);
        let w: f64 = 0.4;
        d.omega = w;
        d.dn = [[0.5, 0.1], [0.1, -0.2]];
        d.k_tt = std::array::from_fn(|a| std::array::from_fn(|b| d.dn[a][b] / w.tanh()));
        let r = corner_residuals_angle(&d);
        assert!(r.first.iter().flatten().all(|v| v.abs() < 1e-15));
    }
}
