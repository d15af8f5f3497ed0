//! Initial data.
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::frame::connection_from_frame;
use crate::grid::{Grid, Topology};
use crate::recipes::{Recipe, RecipeSource};
use crate::state::{inverse3, k_slot, StateField, FINV_OFF, F_OFF, K_OFF, M3, NCOMP};

pub fn minkowski(grid: &Grid) -> StateField {
    StateField::flat(grid, 0.0)
}

pub fn check_kasner_exponents(p: [f64; 3]) -> Result<()> {
    let s1: f64 = p.iter().sum();
    let s2: f64 = p.iter().map(|x| x * x).sum();
    if (s1 - 1.0).abs() > 1e-12 || (s2 - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("Kasner exponents need Σp = Σp² = 1; got Σp = {s1:.15}, Σp² = {s2:.15}")));
    }
    Ok(())
}

fn kasner_point(p: [f64; 3], t: f64) -> [f64; NCOMP] {
    let mut u = [0.0; NCOMP];
    for a in 0..3 {
        u[F_OFF + 4 * a] = t.powf(-p[a]);
        u[FINV_OFF + 4 * a] = t.powf(p[a]);
        u[K_OFF + k_slot(a, a)] = p[a] / t;
    }
    u
}

pub fn kasner(grid: &Grid, p: [f64; 3], t0: f64) -> Result<StateField> {
    check_kasner_exponents(p)?;
    if !(t0 > 0.0) {
        return Err(Error::Invalid(format!("Kasner data needs t0 > 0, got {t0}")));
    }
    let u = kasner_point(p, t0);
    Ok(StateField::from_fn(grid, t0, |_| u))
}

/// Bump sin^power(πx³/L₃)·(1 + tangential·cos(2πx¹/L₁)); flat to order `power`
/// at x³ = 0 and x³ = L₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub power: u32,
    pub tangential: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Profile { power: 6, tangential: 0.5 }
    }
}

impl Profile {
    pub fn eval(&self, grid: &Grid, x: [f64; 3]) -> f64 {
        let l3 = grid.extent(2);
        let l1 = grid.extent(0);
        (PI * (x[2] - grid.origin[2]) / l3).sin().powi(self.power as i32)
            * (1.0 + self.tangential * (TAU * (x[0] - grid.origin[0]) / l1).cos())
    }
}

/// Kasner plus amplitude·profile on K11 and minus the same on K22.
pub fn perturbed_kasner(grid: &Grid, p: [f64; 3], t0: f64, amplitude: f64, profile: Profile) -> Result<StateField> {
    if profile.power < 2 || !profile.power.is_multiple_of(2) {
        return Err(Error::Invalid("profile power must be an even integer ≥ 2".into()));
    }
    let mut s = kasner(grid, p, t0)?;
    for idx in 0..grid.len() {
        let phi = amplitude * profile.eval(grid, grid.position(idx));
        s.k.c[0][idx] += phi;
        s.k.c[2][idx] -= phi;
    }
    Ok(s)
}

/// Tolerance for the corner residuals of perturbed Kasner data: twice the
/// leading truncation error h⁴/5·max|∂⁵| of the one-sided face stencil applied
/// to the profile, scaled by the largest normal frame coefficient. Only valid
/// for the default power-6 profile (|∂⁵ sin⁶(πx/L)| ≤ 450 (π/L)⁵).
pub fn corner_tolerance(grid: &Grid, state: &StateField, amplitude: f64, profile: Profile) -> f64 {
    assert_eq!(profile.power, 6, "bound derived for the sin⁶ profile");
    let h = grid.h[2];
    let d5 = 450.0 * (PI / grid.extent(2)).powi(5) * (1.0 + profile.tangential.abs());
    let f33 = crate::geometry::max_abs(&[&state.f.c[8]]);
    2.0 * amplitude.abs() * f33 * d5 * h.powi(4) / 5.0
}

/// Samples a recipe and returns the matching forcing.
pub fn mms(grid: &Grid, recipe: Arc<dyn Recipe>, t0: f64) -> (StateField, RecipeSource) {
    let r = recipe.clone();
    let state = StateField::from_fn(grid, t0, |idx| r.sample(t0, grid.position(idx)).u);
    (state, RecipeSource { recipe })
}

/// Exact recipe values on a grid at time t.
pub fn sample_recipe(grid: &Grid, recipe: &dyn Recipe, t: f64) -> StateField {
    StateField::from_fn(grid, t, |idx| recipe.sample(t, grid.position(idx)).u)
}

/// Frame from a coordinate metric h and second fundamental form k (6 fields
/// each, ordered like K). Gram–Schmidt runs over (∂₁, ∂₂, ∂₃), so e₁, e₂ span
/// the x³ = const planes and e₃ is their unit normal.
pub fn from_geometric_data(grid: &Grid, t: f64, h: &[Vec<f64>; 6], k: &[Vec<f64>; 6]) -> Result<StateField> {
    let n = grid.len();
    let mut s = StateField::flat(grid, t);
    for idx in 0..n {
        let hm: M3 = std::array::from_fn(|a| std::array::from_fn(|b| h[k_slot(a, b)][idx]));
        let km: M3 = std::array::from_fn(|a| std::array::from_fn(|b| k[k_slot(a, b)][idx]));
        let ip = |u: &[f64; 3], v: &[f64; 3]| -> f64 {
            (0..3).map(|a| (0..3).map(|b| u[a] * hm[a][b] * v[b]).sum::<f64>()).sum()
        };
        let mut e: [[f64; 3]; 3] = [[0.0; 3]; 3];
        for i in 0..3 {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            for j in 0..i {
                let c = ip(&v, &e[j]);
                for a in 0..3 {
                    v[a] -= c * e[j][a];
                }
            }
            let nn = ip(&v, &v);
            if !(nn > 0.0) || !nn.is_finite() {
                return Err(Error::Invalid(format!("metric is not positive definite at node {:?}", grid.coords(idx))));
            }
            let nn = nn.sqrt();
            e[i] = v.map(|x| x / nn);
        }
        let fi =
            inverse3(&e).ok_or_else(|| Error::Invalid(format!("degenerate frame at node {:?}", grid.coords(idx))))?;
        for i in 0..3 {
            for a in 0..3 {
                s.f.c[3 * i + a][idx] = e[i][a];
                // finv[b][j] = (f⁻¹)[j][b]
                s.finv.c[3 * i + a][idx] = fi[a][i];
            }
        }
        for (slot, &(i, j)) in crate::state::K_PAIRS.iter().enumerate() {
            s.k.c[slot][idx] = (0..3).map(|a| (0..3).map(|b| e[i][a] * e[j][b] * km[a][b]).sum::<f64>()).sum();
        }
    }
    s.g = connection_from_frame(&s.f, &s.finv, grid);
    Ok(s)
}

/// Smooth periodic frame f = I + Σ modes, with analytic coordinate derivatives.
#[derive(Debug, Clone)]
pub struct RandomFrame {
    /// per entry (i,j): list of (amplitude, κ, phase)
    terms: Vec<Vec<(f64, [f64; 3], f64)>>,
}

impl RandomFrame {
    pub fn new(seed: u64, amplitude: f64, length: [f64; 3]) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..9)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let k: [f64; 3] = std::array::from_fn(|d| TAU * rng.gen_range(-1i32..=1) as f64 / length[d]);
                        (amplitude * rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..TAU))
                    })
                    .collect()
            })
            .collect();
        RandomFrame { terms }
    }

    /// (F, ∂_d F) at a point.
    pub fn eval(&self, x: [f64; 3]) -> (M3, [M3; 3]) {
        let mut f = [[0.0; 3]; 3];
        let mut df = [[[0.0; 3]; 3]; 3];
        for (c, ts) in self.terms.iter().enumerate() {
            let (i, j) = (c / 3, c % 3);
            f[i][j] = if i == j { 1.0 } else { 0.0 };
            for &(a, k, ph) in ts {
                let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph;
                let (s, co) = arg.sin_cos();
                f[i][j] += a * s;
                for d in 0..3 {
                    df[d][i][j] += a * co * k[d];
                }
            }
        }
        (f, df)
    }

    /// State with this frame, K = 0 and Γ from the Koszul formula on the grid.
    pub fn state(&self, grid: &Grid) -> Result<StateField> {
        let mut s = StateField::flat(grid, 0.0);
        for idx in 0..grid.len() {
            let (f, _) = self.eval(grid.position(idx));
            let fi = inverse3(&f).ok_or_else(|| Error::Invalid("singular random frame".into()))?;
            for i in 0..3 {
                for j in 0..3 {
                    s.f.c[3 * i + j][idx] = f[i][j];
                    s.finv.c[3 * i + j][idx] = fi[j][i];
                }
            }
        }
        s.g = connection_from_frame(&s.f, &s.finv, grid);
        Ok(s)
    }
}

/// True when every axis is periodic.
pub fn is_periodic(grid: &Grid) -> bool {
    grid.topology.iter().all(|&t| t == Topology::Periodic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ResidualReport;

    #[test]
    fn kasner_validation_and_residuals() {
        let g = Grid::periodic([6; 3], [1.0; 3]).unwrap();
        assert!(kasner(&g, [0.5, 0.5, 0.5], 1.0).unwrap_err().to_string().contains("Σp²"));
        for p in [[1.0, 0.0, 0.0], [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0]] {
            let s = kasner(&g, p, 1.0).unwrap();
            assert!(ResidualReport::of(&s).max_constraint() <= 1e-12);
        }
        let m = minkowski(&g);
        assert_eq!(ResidualReport::of(&m).max_constraint(), 0.0);
    }

    #[test]
    fn geometric_data_roundtrips() {
        let g = Grid::periodic([5; 3], [1.0; 3]).unwrap();
        let (p, t0) = ([2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0], 1.7f64);
        let mut h: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; g.len()]);
        let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; g.len()]);
        for a in 0..3 {
            h[k_slot(a, a)].iter_mut().for_each(|v| *v = t0.powf(2.0 * p[a]));
            k[k_slot(a, a)].iter_mut().for_each(|v| *v = p[a] * t0.powf(2.0 * p[a] - 1.0));
        }
        let s = from_geometric_data(&g, t0, &h, &k).unwrap();
        let want = kasner(&g, p, t0).unwrap();
        for (a, b) in s.components().iter().zip(want.components()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_schmidt_is_orthonormal_and_adapted() {
        let g = Grid::periodic([5; 3], [1.0; 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut h: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; g.len()]);
        for idx in 0..g.len() {
            let a: M3 = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            for (slot, &(i, j)) in crate::state::K_PAIRS.iter().enumerate() {
                h[slot][idx] = (0..3).map(|m| a[i][m] * a[j][m]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        let k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; g.len()]);
        let s = from_geometric_data(&g, 0.0, &h, &k).unwrap();
        for idx in 0..g.len() {
            let f = s.f.at(idx);
            let fi = s.finv.at(idx);
            for i in 0..3 {
                for j in 0..3 {
                    let v: f64 =
                        (0..3).map(|a| (0..3).map(|b| f[i][a] * f[j][b] * h[k_slot(a, b)][idx]).sum::<f64>()).sum();
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                    // metric read back from finv
                    let hb: f64 = (0..3).map(|m| fi[m][i] * fi[m][j]).sum();
                    assert!((hb - h[k_slot(i, j)][idx]).abs() < 1e-12);
                }
            }
            assert_eq!(f[0][2], 0.0);
            assert_eq!(f[1][2], 0.0);
        }
        let mut bad = h.clone();
        bad[0][3] = -1.0;
        assert!(from_geometric_data(&g, 0.0, &bad, &k).unwrap_err().to_string().contains("positive definite"));
    }

    #[test]
    fn perturbed_kasner_structure() {
        let g = Grid::slab([8, 8, 33], [1.0; 3]).unwrap();
        let p = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        assert_eq!(perturbed_kasner(&g, p, 1.0, 0.0, Profile::default()).unwrap(), kasner(&g, p, 1.0).unwrap());
        let s = perturbed_kasner(&g, p, 1.0, 1e-2, Profile::default()).unwrap();
        assert_eq!(crate::boundary::bdcond_max(&s), 0.0);
        // corner residuals are pure truncation error of the one-sided stencils
        let c = crate::boundary::corner_residuals(&s).unwrap().max_abs();
        let gf = g.refined(1).unwrap();
        let sf = perturbed_kasner(&gf, p, 1.0, 1e-2, Profile::default()).unwrap();
        let cf = crate::boundary::corner_residuals(&sf).unwrap().max_abs();
        assert!(cf < c / 8.0, "{c} {cf}");
        assert!(c <= corner_tolerance(&g, &s, 1e-2, Profile::default()));
        assert!(cf <= corner_tolerance(&gf, &sf, 1e-2, Profile::default()));
    }
}
