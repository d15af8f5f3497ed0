//! Frame Sobolev norms, energy, and the torsion-propagation check.
use crate::error::{Error, Result};
use crate::evolution::{axpy, rhs, EvolveOptions};
use crate::geometry::{torsion, torsion_rhs};
use crate::parallel;
use crate::state::{det3, frame_derivative, StateField, K_OFF, NCOMP};

/// Riemannian volume per node: Π h_a · |det finv|.
pub fn volume_weights(state: &StateField) -> Vec<f64> {
    let dv = state.grid.cell_volume();
    parallel::pointwise1(&state.grid, |idx| dv * det3(&state.finv.at(idx)).abs())
}

fn weighted_sq(fields: &[Vec<f64>], w: &[f64]) -> f64 {
    parallel::det_sum(w.len(), |i| w[i] * fields.iter().map(|u| u[i] * u[i]).sum::<f64>())
}

/// Quantity whose norm is taken; evaluated on a state so e₀ can be applied.
pub trait Observable: Sync {
    fn eval(&self, state: &StateField) -> Vec<Vec<f64>>;
}

/// A subset of the 33 state components.
#[derive(Debug, Clone)]
pub struct StateComponents(pub Vec<usize>);

impl StateComponents {
    pub fn all() -> Self {
        StateComponents((0..NCOMP).collect())
    }

    /// K and Γ, the variables carrying the energy.
    pub fn curvature() -> Self {
        StateComponents((K_OFF..NCOMP).collect())
    }
}

impl Observable for StateComponents {
    fn eval(&self, state: &StateField) -> Vec<Vec<f64>> {
        let c = state.components();
        self.0.iter().map(|&i| c[i].to_vec()).collect()
    }
}

/// Fields that do not depend on the state (e₀ of them vanishes).
#[derive(Debug, Clone)]
pub struct StaticField(pub Vec<Vec<f64>>);

impl Observable for StaticField {
    fn eval(&self, _: &StateField) -> Vec<Vec<f64>> {
        self.0.clone()
    }
}

/// ‖u‖_{H^s}: root of Σ over ordered frame-derivative sequences of length ≤ s.
pub fn hs_norm(fields: &[&[f64]], s: usize, state: &StateField) -> Result<f64> {
    if s > 2 {
        return Err(Error::Invalid(format!("H^s norm supports s ≤ 2, got {s}")));
    }
    let w = volume_weights(state);
    let mut level: Vec<Vec<Vec<f64>>> = vec![fields.iter().map(|u| u.to_vec()).collect()];
    let mut total = weighted_sq(&level[0], &w);
    for _ in 0..s {
        let mut next = Vec::new();
        for u in &level {
            for i in 0..3 {
                next.push(u.iter().map(|c| frame_derivative(c, i, state)).collect::<Vec<_>>());
            }
        }
        total += next.iter().map(|u| weighted_sq(u, &w)).sum::<f64>();
        level = next;
    }
    Ok(total.sqrt())
}

/// Tangential operators ē ∈ {e₀, e₁, e₂}; the normal is e₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    E0,
    E(usize),
}

/// Canonical B^s index set: ē^{I₁} e₃^{n} with |I₁| + 2n ≤ s, normal innermost.
/// Each entry lists operators outermost first.
pub fn bs_sequences(s: usize) -> Vec<Vec<Op>> {
    let mut out = Vec::new();
    for n in 0..=s / 2 {
        let mut tang: Vec<Vec<Op>> = vec![vec![]];
        for len in 0..=(s - 2 * n) {
            if len > 0 {
                tang = tang
                    .iter()
                    .flat_map(|t| [Op::E0, Op::E(0), Op::E(1)].map(|o| [vec![o], t.clone()].concat()))
                    .collect();
            }
            for t in &tang {
                let mut seq = t.clone();
                seq.extend(std::iter::repeat_n(Op::E(2), n));
                out.push(seq);
            }
        }
    }
    out
}

/// Relative step for e₀ by directional differencing along the RHS.
const E0_STEP: f64 = 1e-3;

fn apply_seq(seq: &[Op], obs: &dyn Observable, state: &StateField, opts: &EvolveOptions) -> Vec<Vec<f64>> {
    match seq.split_first() {
        None => obs.eval(state),
        Some((Op::E(i), rest)) => {
            apply_seq(rest, obs, state, opts).iter().map(|u| frame_derivative(u, *i, state)).collect()
        }
        Some((Op::E0, rest)) => {
            // e₀G = d/dε G(u + ε·rhs(u)), fourth-order central in ε
            let r = rhs(state, opts);
            let scale = crate::geometry::max_abs(&r.components()).max(1.0);
            let eps = E0_STEP / scale;
            let at = |a: f64| apply_seq(rest, obs, &axpy(state, a * eps, &r, 0.0), opts);
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            (0..p1.len())
                .map(|c| {
                    (0..p1[c].len())
                        .map(|i| (8.0 * (p1[c][i] - m1[c][i]) - (p2[c][i] - m2[c][i])) / (12.0 * eps))
                        .collect()
                })
                .collect()
        }
    }
}

/// Anisotropic ‖u‖_{B^s}: one normal derivative counts as two tangential ones;
/// e₀ is evaluated through the evolution RHS.
pub fn bs_norm(obs: &dyn Observable, s: usize, state: &StateField, opts: &EvolveOptions) -> Result<f64> {
    if s > 4 {
        return Err(Error::Invalid(format!("B^s norm supports s ≤ 4, got {s}")));
    }
    let w = volume_weights(state);
    let total: f64 = bs_sequences(s).iter().map(|seq| weighted_sq(&apply_seq(seq, obs, state, opts), &w)).sum();
    Ok(total.sqrt())
}

/// ∫ ½K^{ij}K_ij + ¼Γ^{ijb}Γ_ijb over the slice.
pub fn energy(state: &StateField) -> f64 {
    let w = volume_weights(state);
    parallel::det_sum(w.len(), |idx| {
        let k = state.k.at(idx);
        let g = state.g.at(idx);
        let kk: f64 = k.iter().flatten().map(|v| v * v).sum();
        let gg: f64 = g.iter().flatten().flatten().map(|v| v * v).sum();
        w[idx] * (0.5 * kk + 0.25 * gg)
    })
}

/// Analytic Kasner energy: ½Σ(p_i/t)² times the slice volume L₁L₂L₃·t.
pub fn kasner_energy(p: [f64; 3], t: f64, coordinate_volume: f64) -> f64 {
    0.5 * p.iter().map(|q| (q / t).powi(2)).sum::<f64>() * coordinate_volume * t.powf(p.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionPropagation {
    /// (t, max |ΔC/Δt − torsion_rhs|, its L² norm) per interior snapshot
    pub samples: Vec<(f64, f64, f64)>,
}

impl TorsionPropagation {
    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    pub fn max_l2(&self) -> f64 {
        self.samples.iter().map(|s| s.2).fold(0.0, f64::max)
    }
}

/// Centered time difference of C across consecutive snapshots versus the
/// torsion evolution identity at the middle one.
pub fn torsion_propagation_check(states: &[StateField]) -> Result<TorsionPropagation> {
    if states.len() < 3 {
        return Err(Error::Invalid(format!(
            "torsion propagation needs at least 3 consecutive snapshots, got {}",
            states.len()
        )));
    }
    let mut samples = Vec::new();
    for w in states.windows(3) {
        let (a, m, b) = (&w[0], &w[1], &w[2]);
        let dt = b.t - a.t;
        if !(dt > 0.0) || ((m.t - a.t) - (b.t - m.t)).abs() > 1e-9 * dt {
            return Err(Error::Invalid("torsion propagation needs equally spaced snapshots".into()));
        }
        let (ca, cb) = (torsion(a), torsion(b));
        let r = torsion_rhs(m);
        let diff: Vec<Vec<f64>> =
            (0..9).map(|c| (0..ca[c].len()).map(|i| (cb[c][i] - ca[c][i]) / dt - r[c][i]).collect()).collect();
        let refs: Vec<&[f64]> = diff.iter().map(|v| v.as_slice()).collect();
        let n = crate::geometry::Norms::of(&m.grid, &refs);
        samples.push((m.t, n.max, n.l2));
    }
    Ok(TorsionPropagation { samples })
}
