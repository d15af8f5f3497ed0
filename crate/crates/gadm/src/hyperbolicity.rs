//! Principal symbol of the system linearized at the zero state.
//!
//! Unknowns are ordered (K11 K12 K22 K13 K23 K33 Γ113 Γ223 Γ123 Γ213 Γ313 Γ323
//! Γ312 Γ112 Γ212) with unit time-derivative coefficients, so e_0 u = Σ_d A^d e_d u.
//! The A^d are symmetrized by the constant diagonal H = diag(½ on K_ii, 1 on
//! K_ij i≠j, ½ on each Γ), the weights of the energy ½|K|² + ¼|Γ|².
use std::sync::OnceLock;

use nalgebra::{SMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{rhs, rhs_local, EvolveOptions, RhsField};
use crate::frame::CurvaturePartials;
use crate::grid::Grid;
use crate::parallel;
use crate::state::{StateField, G_OFF, K_OFF};

pub type Matrix15 = SMatrix<f64, 15, 15>;

pub const NAMES: [&str; 15] =
    ["K11", "K12", "K22", "K13", "K23", "K33", "G113", "G223", "G123", "G213", "G313", "G323", "G312", "G112", "G212"];

/// State component index of each symbol variable.
pub const STORAGE: [usize; 15] = [
    K_OFF,
    K_OFF + 1,
    K_OFF + 2,
    K_OFF + 3,
    K_OFF + 4,
    K_OFF + 5,
    G_OFF + 1,
    G_OFF + 5,
    G_OFF + 2,
    G_OFF + 4,
    G_OFF + 7,
    G_OFF + 8,
    G_OFF + 6,
    G_OFF,
    G_OFF + 3,
];

// (row, direction 1..3, column, coefficient)
const TABLE: &[(usize, usize, usize, f64)] = &[
    (0, 3, 7, 1.0),
    (0, 2, 11, -1.0),
    (1, 3, 8, -0.5),
    (1, 3, 9, -0.5),
    (1, 1, 11, 0.5),
    (1, 2, 10, 0.5),
    (2, 3, 6, 1.0),
    (2, 1, 10, -1.0),
    (3, 3, 14, 0.5),
    (3, 2, 8, 0.5),
    (3, 1, 7, -0.5),
    (3, 2, 12, -0.5),
    (4, 3, 13, -0.5),
    (4, 1, 9, 0.5),
    (4, 2, 6, -0.5),
    (4, 1, 12, 0.5),
    (5, 2, 13, 1.0),
    (5, 1, 14, -1.0),
    (6, 3, 2, 1.0),
    (6, 2, 4, -1.0),
    (7, 3, 0, 1.0),
    (7, 1, 3, -1.0),
    (8, 3, 1, -1.0),
    (8, 2, 3, 1.0),
    (9, 3, 1, -1.0),
    (9, 1, 4, 1.0),
    (10, 2, 1, 1.0),
    (10, 1, 2, -1.0),
    (11, 1, 1, 1.0),
    (11, 2, 0, -1.0),
    (12, 1, 4, 1.0),
    (12, 2, 3, -1.0),
    (13, 3, 4, -1.0),
    (13, 2, 5, 1.0),
    (14, 3, 3, 1.0),
    (14, 1, 5, -1.0),
];

/// A¹, A², A³.
pub fn principal_matrices() -> [Matrix15; 3] {
    let mut a = [Matrix15::zeros(); 3];
    for &(r, d, c, v) in TABLE.iter() {
        a[d - 1][(r, c)] += v;
    }
    a
}

/// Diagonal of the symmetrizer H.
pub fn symmetrizer() -> [f64; 15] {
    std::array::from_fn(|r| if matches!(r, 1 | 3 | 4) { 1.0 } else { 0.5 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub m: Matrix15,
    pub xi: [f64; 3],
}

impl SymbolMatrix {
    /// H·M, exactly symmetric.
    pub fn symmetrized(&self) -> Matrix15 {
        symmetrize(&self.m)
    }
}

pub fn symmetrize(m: &Matrix15) -> Matrix15 {
    let h = symmetrizer();
    Matrix15::from_fn(|r, c| h[r] * m[(r, c)])
}

/// First entry (row, col) where the matrix is not exactly symmetric.
pub fn asymmetry(m: &Matrix15) -> Option<(usize, usize, f64, f64)> {
    for r in 0..15 {
        for c in r + 1..15 {
            if m[(r, c)] != m[(c, r)] {
                return Some((r, c, m[(r, c)], m[(c, r)]));
            }
        }
    }
    None
}

pub fn assemble_symbol(xi: [f64; 3]) -> Result<SymbolMatrix> {
    if xi.iter().all(|&x| x == 0.0) || xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("covector must be finite and nonzero".into()));
    }
    let a = principal_matrices();
    Ok(SymbolMatrix { m: a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2], xi })
}

/// Sorted eigenvalues of M(ξ) (computed on H^{1/2} M H^{-1/2}, which is symmetric).
pub fn characteristic_speeds(xi: [f64; 3]) -> Result<Vec<f64>> {
    let s = assemble_symbol(xi)?;
    Ok(speeds_of(&s.m))
}

pub fn speeds_of(m: &Matrix15) -> Vec<f64> {
    let h = symmetrizer();
    let sym = Matrix15::from_fn(|r, c| (h[r] / h[c]).sqrt() * m[(r, c)]);
    let sym = (sym + sym.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Largest |speed| of the frame symbol (rotation invariant; computed once).
pub fn max_frame_speed() -> f64 {
    static S: OnceLock<f64> = OnceLock::new();
    *S.get_or_init(|| {
        (0..3)
            .map(|d| {
                let mut xi = [0.0; 3];
                xi[d] = 1.0;
                characteristic_speeds(xi).unwrap().iter().map(|v| v.abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    })
}

/// Change of variables ψ = P u into the good set (first 10) and bad set (last 5).
#[derive(Debug, Clone, Serialize)]
pub struct GoodBadSplit {
    pub good: Vec<String>,
    pub bad: Vec<String>,
    #[serde(skip)]
    pub p: Matrix15,
    #[serde(skip)]
    pub p_inv: Matrix15,
}

pub const N_GOOD: usize = 10;

pub fn classify_good_bad() -> GoodBadSplit {
    // rows as sparse combinations of symbol variables
    let rows: [(&str, &[(usize, f64)]); 15] = [
        ("K11", &[(0, 1.0)]),
        ("K12", &[(1, 1.0)]),
        ("K22", &[(2, 1.0)]),
        ("K13", &[(3, 1.0)]),
        ("K23", &[(4, 1.0)]),
        ("G112", &[(13, 1.0)]),
        ("G212", &[(14, 1.0)]),
        ("G113", &[(6, 1.0)]),
        ("G223", &[(7, 1.0)]),
        ("G123+G213", &[(8, 1.0), (9, 1.0)]),
        ("K33", &[(5, 1.0)]),
        ("G313", &[(10, 1.0)]),
        ("G323", &[(11, 1.0)]),
        ("G312", &[(12, 1.0)]),
        ("G123-G213", &[(8, 1.0), (9, -1.0)]),
    ];
    let mut p = Matrix15::zeros();
    for (r, (_, comb)) in rows.iter().enumerate() {
        for &(c, v) in comb.iter() {
            p[(r, c)] = v;
        }
    }
    let mut p_inv = Matrix15::zeros();
    for (r, (_, comb)) in rows.iter().enumerate() {
        if comb.len() == 1 {
            p_inv[(comb[0].0, r)] = 1.0;
        }
    }
    p_inv[(8, 9)] = 0.5;
    p_inv[(8, 14)] = 0.5;
    p_inv[(9, 9)] = 0.5;
    p_inv[(9, 14)] = -0.5;
    GoodBadSplit {
        good: rows[..N_GOOD].iter().map(|r| r.0.to_string()).collect(),
        bad: rows[N_GOOD..].iter().map(|r| r.0.to_string()).collect(),
        p,
        p_inv,
    }
}

/// P A³ P⁻¹.
pub fn rotated_normal_matrix(split: &GoodBadSplit) -> Matrix15 {
    split.p * principal_matrices()[2] * split.p_inv
}

/// For each good row, the single good column it couples to through e_3 and the coefficient.
pub fn good_couplings(split: &GoodBadSplit) -> std::result::Result<[(usize, f64); N_GOOD], String> {
    let a = rotated_normal_matrix(split);
    for r in N_GOOD..15 {
        for c in 0..15 {
            if a[(r, c)] != 0.0 {
                return Err(format!("bad row {} has e_3 coefficient {} on {}", split.bad[r - N_GOOD], a[(r, c)], c));
            }
        }
    }
    let mut out = [(0, 0.0); N_GOOD];
    for r in 0..N_GOOD {
        let nz: Vec<usize> = (0..15).filter(|&c| a[(r, c)] != 0.0).collect();
        if nz.len() != 1 || nz[0] >= N_GOOD {
            return Err(format!("good row {} couples to columns {nz:?}", split.good[r]));
        }
        out[r] = (nz[0], a[(r, nz[0])]);
    }
    Ok(out)
}

/// Linearization of the discrete right-hand side at the zero state, recovered
/// column by column from sinusoidal perturbations along direction d (0-based).
pub fn fd_jacobian(d: usize, eps: f64) -> Matrix15 {
    let mut n = [5usize; 3];
    n[d] = 8;
    let grid = Grid::periodic(n, [1.0; 3]).expect("fixed grid");
    let base = StateField::flat(&grid, 0.0);
    let wave: Vec<f64> = (0..grid.len()).map(|i| (std::f64::consts::TAU * grid.position(i)[d]).sin()).collect();
    let dwave = crate::fd::partial(&grid, &wave, d);
    let probe = 0; // x_d = 0, where the discrete derivative is largest
    let opts = EvolveOptions::default();
    let mut jac = Matrix15::zeros();
    for c in 0..15 {
        let mut plus = base.clone();
        let mut minus = base.clone();
        {
            let pc = &mut plus.components_mut()[STORAGE[c]];
            for (v, w) in pc.iter_mut().zip(&wave) {
                *v = eps * w;
            }
        }
        {
            let mc = &mut minus.components_mut()[STORAGE[c]];
            for (v, w) in mc.iter_mut().zip(&wave) {
                *v = -eps * w;
            }
        }
        let rp = rhs(&plus, &opts);
        let rm = rhs(&minus, &opts);
        let (cp, cm) = (rp.components(), rm.components());
        for r in 0..15 {
            let s = STORAGE[r];
            jac[(r, c)] = (cp[s][probe] - cm[s][probe]) / (2.0 * eps) / dwave[probe];
        }
    }
    jac
}

/// e_3 of the good variables rebuilt from the time derivative and tangential data:
/// each good equation e_0ψ_r = α e_3ψ_c + (terms without e_3) is solved for e_3ψ_c.
/// Returns 10 fields indexed by good variable.
pub fn normal_recovery(state: &StateField, e0: &RhsField) -> Vec<Vec<f64>> {
    let split = classify_good_bad();
    let coup = good_couplings(&split).expect("good/bad structure");
    let cp = CurvaturePartials::of(state);
    let p = split.p;
    let mut solve = [(0usize, 0usize, 0.0f64); N_GOOD];
    for (r, &(c, a)) in coup.iter().enumerate() {
        solve[r] = (r, c, a);
    }
    parallel::pointwise::<N_GOOD, _>(&state.grid, |idx| {
        let l = state.local(idx);
        let mut d = cp.frame(&l.f, idx);
        d.ek[2] = [[0.0; 3]; 3];
        d.eg[2] = [[[0.0; 3]; 3]; 3];
        let tan = rhs_local(&l, &d);
        let e0p = e0.packed(idx);
        let w: [f64; 15] = std::array::from_fn(|r| e0p[STORAGE[r]] - tan[STORAGE[r]]);
        let mut out = [0.0; N_GOOD];
        for &(r, c, a) in solve.iter() {
            let pw: f64 = (0..15).map(|k| p[(r, k)] * w[k]).sum();
            out[c] = pw / a;
        }
        out
    })
}

/// e_3 of the good variables by direct one-sided/centered differences.
pub fn direct_normal_derivatives(state: &StateField) -> Vec<Vec<f64>> {
    let split = classify_good_bad();
    let cp = CurvaturePartials::of(state);
    let p = split.p;
    parallel::pointwise::<N_GOOD, _>(&state.grid, |idx| {
        let f = state.f.at(idx);
        let d = cp.frame(&f, idx);
        let mut e3 = [0.0; 15];
        for (r, v) in e3.iter_mut().enumerate() {
            let s = STORAGE[r];
            *v = if s < G_OFF {
                let (i, j) = crate::state::K_PAIRS[s - K_OFF];
                d.ek[2][i][j]
            } else {
                let slot = s - G_OFF;
                let (j, b) = crate::state::G_PAIRS[slot % 3];
                d.eg[2][slot / 3][j][b]
            };
        }
        std::array::from_fn(|r| (0..15).map(|k| p[(r, k)] * e3[k]).sum())
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    pub xi: [f64; 3],
    pub speeds: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_entries() {
        let a = principal_matrices();
        assert_eq!(a[2][(0, 7)], 1.0);
        assert_eq!(a[2][(7, 0)], 1.0);
        assert_eq!(a[1][(0, 11)], -1.0);
        for d in 0..3 {
            assert!(asymmetry(&symmetrize(&a[d])).is_none(), "direction {d}");
        }
        assert!(assemble_symbol([0.0; 3]).is_err());
    }

    #[test]
    fn symbol_matches_rhs_linearization() {
        let a = principal_matrices();
        for d in 0..3 {
            let j = fd_jacobian(d, 1e-5);
            let diff = (j - a[d]).abs().max();
            assert!(diff <= 1e-7, "direction {}: {diff}\n{}", d + 1, j - a[d]);
        }
    }

    #[test]
    fn speeds() {
        let s3 = characteristic_speeds([0.0, 0.0, 1.0]).unwrap();
        let s2 = characteristic_speeds([0.0, 1.0, 0.0]).unwrap();
        for (x, y) in s3.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in s3.iter().zip(s3.iter().rev()) {
            assert!((x + y).abs() < 1e-12);
        }
        assert!((max_frame_speed() - 1.0).abs() < 1e-12);
        assert_eq!(s3.iter().filter(|v| v.abs() < 1e-12).count(), 5);
    }

    #[test]
    fn good_bad_structure() {
        let split = classify_good_bad();
        assert_eq!((split.good.len(), split.bad.len()), (10, 5));
        assert_eq!(split.p * split.p_inv, Matrix15::identity());
        let c = good_couplings(&split).unwrap();
        let mut cols: Vec<usize> = c.iter().map(|x| x.0).collect();
        cols.sort();
        assert_eq!(cols, (0..10).collect::<Vec<_>>());
    }
}
