//! Unknown fields and their layout.
//!
//! Storage is one array per independent scalar component, x³ fastest. The 33
//! components are ordered f (i-major, 9), finv (b-major, 9), K (K11 K12 K22 K13
//! K23 K33), Γ (i-major over the pairs (1,2),(1,3),(2,3)). Spatial indices are
//! Euclidean, so raising or lowering them is the identity.
use crate::error::{Error, Result};
use crate::fd;
use crate::grid::Grid;
use crate::parallel;

pub type M3 = [[f64; 3]; 3];
pub type T3 = [[[f64; 3]; 3]; 3];

pub const NCOMP: usize = 33;
pub const F_OFF: usize = 0;
pub const FINV_OFF: usize = 9;
pub const K_OFF: usize = 18;
pub const G_OFF: usize = 24;

/// Slot order of the symmetric K components.
pub const K_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)];
/// Antisymmetric (j,b) pairs stored for Γ.
pub const G_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

#[inline]
pub fn k_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        (0, 2) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// Storage slot and sign for Γ_ijb; None when j == b.
#[inline]
pub fn g_slot(i: usize, j: usize, b: usize) -> Option<(usize, f64)> {
    let (p, s) = match (j, b) {
        (0, 1) => (0, 1.0),
        (1, 0) => (0, -1.0),
        (0, 2) => (1, 1.0),
        (2, 0) => (1, -1.0),
        (1, 2) => (2, 1.0),
        (2, 1) => (2, -1.0),
        _ => return None,
    };
    Some((3 * i + p, s))
}

pub fn component_name(c: usize) -> String {
    const K: [&str; 6] = ["K11", "K12", "K22", "K13", "K23", "K33"];
    match c {
        0..=8 => format!("f{}{}", c / 3 + 1, c % 3 + 1),
        9..=17 => format!("finv{}{}", (c - 9) / 3 + 1, (c - 9) % 3 + 1),
        18..=23 => K[c - 18].to_string(),
        _ => {
            let i = (c - 24) / 3;
            let (j, b) = G_PAIRS[(c - 24) % 3];
            format!("G{}{}{}", i + 1, j + 1, b + 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameCoeffs {
    pub c: [Vec<f64>; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseFrameCoeffs {
    pub c: [Vec<f64>; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicCurvature {
    pub c: [Vec<f64>; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoeffs {
    pub c: [Vec<f64>; 9],
}

fn zeros<const N: usize>(n: usize) -> [Vec<f64>; N] {
    std::array::from_fn(|_| vec![0.0; n])
}

fn identity9(n: usize) -> [Vec<f64>; 9] {
    std::array::from_fn(|c| vec![if c % 4 == 0 { 1.0 } else { 0.0 }; n])
}

#[inline]
fn mat_at(c: &[Vec<f64>; 9], idx: usize) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| c[3 * i + j][idx]))
}

impl FrameCoeffs {
    pub fn identity(n: usize) -> Self {
        FrameCoeffs { c: identity9(n) }
    }
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.c[3 * i + j]
    }
    /// F[i][j] = f_i^j at a point.
    #[inline]
    pub fn at(&self, idx: usize) -> M3 {
        mat_at(&self.c, idx)
    }
}

impl InverseFrameCoeffs {
    pub fn identity(n: usize) -> Self {
        InverseFrameCoeffs { c: identity9(n) }
    }
    pub fn get(&self, b: usize, j: usize) -> &[f64] {
        &self.c[3 * b + j]
    }
    /// Finv[b][j] = f^b_j at a point.
    #[inline]
    pub fn at(&self, idx: usize) -> M3 {
        mat_at(&self.c, idx)
    }
}

impl ExtrinsicCurvature {
    pub fn zero(n: usize) -> Self {
        ExtrinsicCurvature { c: zeros(n) }
    }
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.c[k_slot(i, j)]
    }
    #[inline]
    pub fn at(&self, idx: usize) -> M3 {
        std::array::from_fn(|i| std::array::from_fn(|j| self.c[k_slot(i, j)][idx]))
    }
}

impl ConnectionCoeffs {
    pub fn zero(n: usize) -> Self {
        ConnectionCoeffs { c: zeros(n) }
    }
    #[inline]
    pub fn at(&self, idx: usize) -> T3 {
        expand_gamma(|s| self.c[s][idx])
    }
    /// All 27 entries stored redundantly (debug aid).
    pub fn full(&self) -> Vec<T3> {
        (0..self.c[0].len()).map(|i| self.at(i)).collect()
    }
}

/// Build a full Γ_ijb from the 9 stored values.
#[inline]
pub fn expand_gamma(mut v: impl FnMut(usize) -> f64) -> T3 {
    let mut g = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for (p, &(j, b)) in G_PAIRS.iter().enumerate() {
            let x = v(3 * i + p);
            g[i][j][b] = x;
            g[i][b][j] = -x;
        }
    }
    g
}

#[inline]
pub fn pack_gamma(g: &T3) -> [f64; 9] {
    std::array::from_fn(|s| {
        let (j, b) = G_PAIRS[s % 3];
        g[s / 3][j][b]
    })
}

#[inline]
pub fn pack_sym(k: &M3) -> [f64; 6] {
    std::array::from_fn(|s| {
        let (i, j) = K_PAIRS[s];
        k[i][j]
    })
}

#[inline]
pub fn expand_sym(mut v: impl FnMut(usize) -> f64) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| v(k_slot(i, j))))
}

/// Pointwise values of all unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Local {
    pub f: M3,
    pub finv: M3,
    pub k: M3,
    pub g: T3,
}

impl Local {
    pub fn from_packed(u: &[f64; NCOMP]) -> Local {
        Local {
            f: std::array::from_fn(|i| std::array::from_fn(|j| u[F_OFF + 3 * i + j])),
            finv: std::array::from_fn(|i| std::array::from_fn(|j| u[FINV_OFF + 3 * i + j])),
            k: expand_sym(|s| u[K_OFF + s]),
            g: expand_gamma(|s| u[G_OFF + s]),
        }
    }

    pub fn packed(&self) -> [f64; NCOMP] {
        let mut u = [0.0; NCOMP];
        for i in 0..3 {
            for j in 0..3 {
                u[F_OFF + 3 * i + j] = self.f[i][j];
                u[FINV_OFF + 3 * i + j] = self.finv[i][j];
            }
        }
        u[K_OFF..K_OFF + 6].copy_from_slice(&pack_sym(&self.k));
        u[G_OFF..G_OFF + 9].copy_from_slice(&pack_gamma(&self.g));
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub grid: Grid,
    pub f: FrameCoeffs,
    pub finv: InverseFrameCoeffs,
    pub k: ExtrinsicCurvature,
    pub g: ConnectionCoeffs,
    pub t: f64,
}

impl StateField {
    /// Flat frame, K = 0, Γ = 0.
    pub fn flat(grid: &Grid, t: f64) -> StateField {
        let n = grid.len();
        StateField {
            grid: grid.clone(),
            f: FrameCoeffs::identity(n),
            finv: InverseFrameCoeffs::identity(n),
            k: ExtrinsicCurvature::zero(n),
            g: ConnectionCoeffs::zero(n),
            t,
        }
    }

    pub fn from_components(grid: &Grid, t: f64, comps: Vec<Vec<f64>>) -> Result<StateField> {
        if comps.len() != NCOMP || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Invalid(format!("expected {NCOMP} fields of {} values", grid.len())));
        }
        let mut it = comps.into_iter();
        let mut take = || it.next().unwrap();
        Ok(StateField {
            grid: grid.clone(),
            f: FrameCoeffs { c: std::array::from_fn(|_| take()) },
            finv: InverseFrameCoeffs { c: std::array::from_fn(|_| take()) },
            k: ExtrinsicCurvature { c: std::array::from_fn(|_| take()) },
            g: ConnectionCoeffs { c: std::array::from_fn(|_| take()) },
            t,
        })
    }

    /// State sampled pointwise from packed values.
    pub fn from_fn(grid: &Grid, t: f64, f: impl Fn(usize) -> [f64; NCOMP] + Sync) -> StateField {
        let comps = parallel::pointwise::<NCOMP, _>(grid, f);
        StateField::from_components(grid, t, comps).expect("sizes match")
    }

    pub fn components(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::with_capacity(NCOMP);
        v.extend(self.f.c.iter().map(|x| x.as_slice()));
        v.extend(self.finv.c.iter().map(|x| x.as_slice()));
        v.extend(self.k.c.iter().map(|x| x.as_slice()));
        v.extend(self.g.c.iter().map(|x| x.as_slice()));
        v
    }

    pub fn components_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = Vec::with_capacity(NCOMP);
        v.extend(self.f.c.iter_mut());
        v.extend(self.finv.c.iter_mut());
        v.extend(self.k.c.iter_mut());
        v.extend(self.g.c.iter_mut());
        v
    }

    #[inline]
    pub fn local(&self, idx: usize) -> Local {
        Local { f: self.f.at(idx), finv: self.finv.at(idx), k: self.k.at(idx), g: self.g.at(idx) }
    }

    #[inline]
    pub fn packed(&self, idx: usize) -> [f64; NCOMP] {
        let c = self.components();
        std::array::from_fn(|i| c[i][idx])
    }

    pub fn validate(&self) -> Validation {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// max |f_i^j finv^b_j − δ_ib| over the grid
    pub frame_drift: f64,
    /// (component, grid index) of the first non-finite value
    pub first_non_finite: Option<(usize, usize)>,
    /// smallest |det f| over the grid
    pub min_abs_det: f64,
}

pub fn det3(m: &M3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inverse3(m: &M3) -> Option<M3> {
    let d = det3(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let c = |a: usize, b: usize, c: usize, e: usize| m[a][b] * m[c][e] - m[a][e] * m[c][b];
    Some([
        [c(1, 1, 2, 2) / d, -c(0, 1, 2, 2) / d, c(0, 1, 1, 2) / d],
        [-c(1, 0, 2, 2) / d, c(0, 0, 2, 2) / d, -c(0, 0, 1, 2) / d],
        [c(1, 0, 2, 1) / d, -c(0, 0, 2, 1) / d, c(0, 0, 1, 1) / d],
    ])
}

pub fn validate(state: &StateField) -> Validation {
    let n = state.grid.len();
    let mut first = None;
    'outer: for idx in 0..n {
        for (c, comp) in state.components().iter().enumerate() {
            if !comp[idx].is_finite() {
                first = Some((c, idx));
                break 'outer;
            }
        }
    }
    let drift = parallel::det_max_abs(n, |idx| {
        let f = state.f.at(idx);
        let fi = state.finv.at(idx);
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for b in 0..3 {
                let s: f64 = (0..3).map(|j| f[i][j] * fi[b][j]).sum();
                let v = (s - if i == b { 1.0 } else { 0.0 }).abs();
                m = if v.is_nan() { f64::NAN } else { m.max(v) };
            }
        }
        m
    });
    let min_abs_det = (0..n).map(|idx| det3(&state.f.at(idx)).abs()).fold(f64::INFINITY, f64::min);
    Validation { frame_drift: drift, first_non_finite: first, min_abs_det }
}

/// e_i u = f_i^j ∂_j u with ∂_j from the grid's finite differences (i is 0-based).
pub fn frame_derivative(u: &[f64], i: usize, state: &StateField) -> Vec<f64> {
    let g = &state.grid;
    let d = [fd::partial(g, u, 0), fd::partial(g, u, 1), fd::partial(g, u, 2)];
    let f = &state.f;
    parallel::pointwise1(g, |idx| {
        f.c[3 * i][idx] * d[0][idx] + f.c[3 * i + 1][idx] * d[1][idx] + f.c[3 * i + 2][idx] * d[2][idx]
    })
}
