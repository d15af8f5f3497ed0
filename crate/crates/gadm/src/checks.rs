//! Verification battery: structural checks that need no evolution.
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::boundary::{boundary_flux_integrand, flux_form_matrix, unpack_symbol, BDCOND_COMPONENTS};
use crate::geometry::{max_abs, riemann_hat, spatial_ricci_hat, torsion};
use crate::grid::Grid;
use crate::hyperbolicity::{
    asymmetry, classify_good_bad, fd_jacobian, good_couplings, principal_matrices, symmetrize, Matrix15, NAMES, STORAGE,
};
use crate::runner::observed_orders;
use crate::scenarios::RandomFrame;

/// Test-only perturbations proving the checks can fail.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckHooks {
    /// add `delta` to A^{dir}[(row, col)] (dir 0-based)
    pub mutate_symbol: Option<(usize, usize, usize, f64)>,
    pub flip_flux_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn result(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), pass, detail }
}

fn symbol(hooks: &CheckHooks) -> [Matrix15; 3] {
    let mut a = principal_matrices();
    if let Some((d, r, c, v)) = hooks.mutate_symbol {
        a[d][(r, c)] += v;
    }
    a
}

/// H·A^d exactly symmetric with entries in ½ℤ.
pub fn check_symbol_symmetry(hooks: &CheckHooks) -> CheckResult {
    for (d, a) in symbol(hooks).iter().enumerate() {
        let s = symmetrize(a);
        if let Some((r, c, x, y)) = asymmetry(&s) {
            return result(
                "symbol_symmetry",
                false,
                format!(
                    "H·A{}: entry ({}, {}) = {x} but ({}, {}) = {y}",
                    d + 1,
                    NAMES[r],
                    NAMES[c],
                    NAMES[c],
                    NAMES[r]
                ),
            );
        }
        if let Some(v) = s.iter().find(|v| (*v * 2.0).fract() != 0.0) {
            return result("symbol_symmetry", false, format!("H·A{}: non-half-integer entry {v}", d + 1));
        }
    }
    result("symbol_symmetry", true, "H·A1, H·A2, H·A3 exactly symmetric".into())
}

/// Symbol equals the linearized discrete RHS.
pub fn check_symbol_jacobian(hooks: &CheckHooks) -> CheckResult {
    let a = symbol(hooks);
    let mut worst = (0.0, 0, 0, 0);
    for d in 0..3 {
        let j = fd_jacobian(d, 1e-6);
        for r in 0..15 {
            for c in 0..15 {
                let e = (j[(r, c)] - a[d][(r, c)]).abs();
                if e > worst.0 {
                    worst = (e, d, r, c);
                }
            }
        }
    }
    let (e, d, r, c) = worst;
    let detail = format!("max |J − A| = {e:.2e} at A{}({}, {})", d + 1, NAMES[r], NAMES[c]);
    result("symbol_jacobian", e <= 1e-7, detail)
}

/// Largest eigenvalue of the boundary flux form.
pub fn flux_max_eigenvalue(hooks: &CheckHooks) -> f64 {
    let m = if hooks.flip_flux_sign { -flux_form_matrix() } else { flux_form_matrix() };
    nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn check_flux_negativity(hooks: &CheckHooks) -> CheckResult {
    let ev = flux_max_eigenvalue(hooks);
    result("flux_negativity", ev <= 1e-12, format!("max eigenvalue of flux form = {ev:.3e}"))
}

/// Q(u) = 0 exactly for random u satisfying the geodesic boundary condition.
pub fn check_boundary_flux_vanishes(samples: usize, seed: u64) -> CheckResult {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let zeroed: Vec<usize> = BDCOND_COMPONENTS.iter().filter_map(|c| STORAGE.iter().position(|s| s == c)).collect();
    for i in 0..samples {
        let mut u: [f64; 15] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        for &z in &zeroed {
            u[z] = 0.0;
        }
        let (k, g) = unpack_symbol(&u);
        let q = boundary_flux_integrand(&k, &g);
        if q != 0.0 {
            return result("boundary_flux_vanishes", false, format!("sample {i}: Q = {q:e}"));
        }
    }
    result("boundary_flux_vanishes", true, format!("Q = 0 exactly on {samples} random admissible states"))
}

pub fn check_good_bad() -> CheckResult {
    let split = classify_good_bad();
    let inv_err = (split.p * split.p_inv - Matrix15::identity()).abs().max();
    if inv_err != 0.0 {
        return result("good_bad_structure", false, format!("P·P⁻¹ − I = {inv_err:e}"));
    }
    match good_couplings(&split) {
        Ok(c) => {
            let pairs: Vec<String> = c
                .iter()
                .enumerate()
                .map(|(r, &(col, v))| format!("{}→{} ({v})", split.good[r], split.good[col]))
                .collect();
            result("good_bad_structure", true, format!("bad rows free of e_3; good couplings {}", pairs.join(", ")))
        }
        Err(e) => result("good_bad_structure", false, e),
    }
}

/// Koszul connection of a random frame is torsion free to round-off.
pub fn check_koszul_torsion(seed: u64) -> CheckResult {
    let grid = Grid::periodic([10; 3], [1.0; 3]).expect("fixed grid");
    let s = RandomFrame::new(seed, 0.1, [1.0; 3]).state(&grid).expect("regular frame");
    let c = torsion(&s);
    let m = max_abs(&c.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
    result("koszul_torsion", m <= 1e-12, format!("max |C| = {m:.2e}"))
}

pub fn run_checks(hooks: &CheckHooks) -> Vec<CheckResult> {
    vec![
        check_symbol_symmetry(hooks),
        check_symbol_jacobian(hooks),
        check_flux_negativity(hooks),
        check_good_bad(),
        check_boundary_flux_vanishes(1000, 7),
        check_koszul_torsion(11),
    ]
}

/// Identity defects of the Koszul connection of one frame on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityDefects {
    pub torsion: f64,
    /// max |R̂_ij − R̂_ji|
    pub ricci_antisym: f64,
    /// max |R̂_aijb − R̂_jbai|
    pub riemann_pair: f64,
}

pub fn identity_defects(frame: &RandomFrame, grid: &Grid) -> crate::error::Result<IdentityDefects> {
    let s = frame.state(grid)?;
    let c = torsion(&s);
    let ric = spatial_ricci_hat(&s);
    let riem = riemann_hat(&s);
    let mut ra = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (&ric[3 * i + j], &ric[3 * j + i]);
            ra = ra.max(crate::parallel::det_max_abs(a.len(), |x| a[x] - b[x]));
        }
    }
    let rp = crate::parallel::det_max_abs(riem.len(), |x| {
        let r = &riem[x];
        let mut m = 0.0f64;
        for a in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for b in 0..3 {
                        m = m.max((r[a][i][j][b] - r[j][b][a][i]).abs());
                    }
                }
            }
        }
        m
    });
    Ok(IdentityDefects {
        torsion: max_abs(&c.iter().map(|v| v.as_slice()).collect::<Vec<_>>()),
        ricci_antisym: ra,
        riemann_pair: rp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityStudy {
    pub n: Vec<usize>,
    pub seed: u64,
    /// per frame: defects at each level
    pub defects: Vec<Vec<IdentityDefects>>,
    pub worst_ricci_order: f64,
    pub worst_riemann_order: f64,
    pub worst_torsion: f64,
    pub worst_torsion_order: f64,
}

/// Torsion at this level is treated as exactly zero: the connection is built
/// from the same discrete commutators that define C.
pub const TORSION_ROUNDOFF: f64 = 1e-12;

impl IdentityStudy {
    pub fn pass(&self, min_order: f64) -> bool {
        let torsion_ok = self.worst_torsion <= TORSION_ROUNDOFF || self.worst_torsion_order >= min_order;
        torsion_ok && self.worst_ricci_order >= min_order && self.worst_riemann_order >= min_order
    }
}

/// Defects of random periodic frames on n, 2n, 4n points per axis.
pub fn levi_civita_study(frames: usize, n: usize, seed: u64) -> crate::error::Result<IdentityStudy> {
    let ns = vec![n, 2 * n, 4 * n];
    let grids: Vec<Grid> = ns.iter().map(|&m| Grid::periodic([m; 3], [1.0; 3])).collect::<Result<_, _>>()?;
    let h: Vec<f64> = grids.iter().map(|g| g.h[0]).collect();
    let mut study = IdentityStudy {
        n: ns,
        seed,
        defects: vec![],
        worst_ricci_order: f64::INFINITY,
        worst_riemann_order: f64::INFINITY,
        worst_torsion: 0.0,
        worst_torsion_order: f64::INFINITY,
    };
    let worst = |o: &[f64]| o.iter().copied().fold(f64::INFINITY, |m, x| if x.is_nan() { f64::NAN } else { m.min(x) });
    for f in 0..frames {
        let frame = RandomFrame::new(seed.wrapping_add(f as u64), 0.1, [1.0; 3]);
        let d: Vec<IdentityDefects> = grids.iter().map(|g| identity_defects(&frame, g)).collect::<Result<_, _>>()?;
        let col = |sel: fn(&IdentityDefects) -> f64| d.iter().map(sel).collect::<Vec<_>>();
        let (ro, _) = observed_orders(&col(|x| x.ricci_antisym), &h);
        let (po, _) = observed_orders(&col(|x| x.riemann_pair), &h);
        let (to, _) = observed_orders(&col(|x| x.torsion), &h);
        let min_nan = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) };
        study.worst_ricci_order = min_nan(study.worst_ricci_order, worst(&ro));
        study.worst_riemann_order = min_nan(study.worst_riemann_order, worst(&po));
        study.worst_torsion_order = min_nan(study.worst_torsion_order, worst(&to));
        study.worst_torsion = study.worst_torsion.max(col(|x| x.torsion).into_iter().fold(0.0, f64::max));
        study.defects.push(d);
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        for r in run_checks(&CheckHooks::default()) {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn symbol_mutation_is_named() {
        let h = CheckHooks { mutate_symbol: Some((2, 0, 7, 0.5)), ..Default::default() };
        let r = check_symbol_symmetry(&h);
        assert!(!r.pass);
        assert!(r.detail.contains("K11") && r.detail.contains("G223") && r.detail.contains("A3"), "{}", r.detail);
    }

    #[test]
    fn flux_flip_reports_eigenvalue() {
        let h = CheckHooks { flip_flux_sign: true, ..Default::default() };
        let r = check_flux_negativity(&h);
        assert!(!r.pass);
        assert!(flux_max_eigenvalue(&h) > 0.1);
    }
}
