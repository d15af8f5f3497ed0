//! Run orchestration: single evolutions and refinement studies.
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::boundary::{bdcond_max, corner_residuals, impose_bdcond, ricci_boundary_check};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{cfl_dt, failure_report, step_rk4, BoundaryPolicy, EvolveOptions};
use crate::geometry::{max_abs, ResidualReport};
use crate::grid::Grid;
use crate::norms::{bs_norm, energy, hs_norm, torsion_propagation_check, StateComponents};
use crate::recipes::{MinkowskiRecipe, Recipe, TwistedKasner};
use crate::scenarios::{self, Profile};
use crate::snapshot;
use crate::state::{StateField, K_OFF, NCOMP};

pub struct Setup {
    pub state: StateField,
    pub opts: EvolveOptions,
    /// Exact solution, when the scenario has one.
    pub exact: Option<Arc<dyn Recipe>>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let grid = cfg.grid()?;
    let s = &cfg.scenario;
    let mut opts = EvolveOptions {
        boundary: if cfg.geodesic_boundary() { BoundaryPolicy::Geodesic } else { BoundaryPolicy::None },
        dissipation: cfg.fd.dissipation,
        ..EvolveOptions::default()
    };
    let (mut state, exact): (StateField, Option<Arc<dyn Recipe>>) = match s.name.as_str() {
        "minkowski" => {
            let mut st = scenarios::minkowski(&grid);
            st.t = s.t0;
            (st, Some(Arc::new(MinkowskiRecipe)))
        }
        "kasner" => (scenarios::kasner(&grid, s.p, s.t0)?, Some(Arc::new(TwistedKasner::kasner(s.p)))),
        "perturbed_kasner" => {
            let profile = Profile { power: s.profile_power, tangential: s.tangential };
            (scenarios::perturbed_kasner(&grid, s.p, s.t0, s.amplitude, profile)?, None)
        }
        "mms" => {
            let recipe = cfg.recipe();
            let (st, src) = scenarios::mms(&grid, recipe.clone(), s.t0);
            opts.source = Some(Arc::new(src));
            (st, Some(recipe))
        }
        other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
    };
    if opts.boundary == BoundaryPolicy::Geodesic {
        impose_bdcond(&mut state)?;
    }
    Ok(Setup { state, opts, exact })
}

/// Time step: CFL on the initial data, shrunk so an integer number of steps
/// reaches t_end.
pub fn time_step(cfg: &RunConfig, initial: &StateField) -> (f64, usize) {
    let span = cfg.time.t_end - initial.t;
    let dt = cfl_dt(initial, cfg.time.cfl_factor);
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (span / steps as f64, steps)
}

pub fn csv_header(boundary: bool) -> String {
    let mut h = format!("{},energy,hs1,bs1", ResidualReport::CSV_HEADER);
    if boundary {
        h.push_str(",ricci30_face_max,corner_max,bdcond_max");
    }
    h
}

/// One CSV row: residuals, energy, norms, and boundary diagnostics.
pub fn diagnostics_row(state: &StateField, opts: &EvolveOptions) -> Result<(ResidualReport, Vec<f64>)> {
    let rep = ResidualReport::of(state);
    let mut row = rep.csv_fields();
    let comps = state.components();
    let curv: Vec<&[f64]> = comps[K_OFF..NCOMP].to_vec();
    row.push(energy(state));
    row.push(hs_norm(&curv, 1, state)?);
    row.push(bs_norm(&StateComponents::curvature(), 1, state, opts)?);
    if state.grid.has_boundary() {
        row.push(ricci_boundary_check(state)?);
        row.push(corner_residuals(state)?.max_abs());
        row.push(bdcond_max(state));
    }
    Ok((rep, row))
}

fn fmt_row(row: &[f64]) -> String {
    row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

pub struct RunResult {
    pub final_state: StateField,
    pub dt: f64,
    pub steps: usize,
    pub reports: Vec<ResidualReport>,
    pub header: String,
    pub rows: Vec<Vec<f64>>,
    /// Last three states, for the torsion-propagation check.
    pub tail: Vec<StateField>,
    pub exact: Option<Arc<dyn Recipe>>,
    pub snapshots: Vec<PathBuf>,
    /// max over output times of max|bdcond components| at the faces
    pub bdcond_max: f64,
}

impl RunResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.split(',').position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn gnuplot_script(header: &str) -> String {
    let cols: Vec<&str> = header.split(',').collect();
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 't'\nset format y '%.0e'\n",
    );
    let plotted: Vec<String> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.ends_with("_max") || c.ends_with("_l2"))
        .map(|(i, _)| format!("'residuals.csv' using 1:(abs(${})+1e-300) with lines", i + 1))
        .collect();
    let _ = writeln!(s, "plot {}", plotted.join(", \\\n     "));
    s
}

/// Evolves the configured scenario. Writes outputs when `dir` is given; a
/// `dt_override` replaces the CFL step (used by refinement studies).
pub fn evolve(cfg: &RunConfig, dir: Option<&Path>, dt_override: Option<f64>) -> Result<RunResult> {
    let Setup { state, opts, exact } = setup(cfg)?;
    let (dt, steps) = match dt_override {
        Some(dt) => {
            let span = cfg.time.t_end - state.t;
            let n = (span / dt).round().max(1.0) as usize;
            (span / n as f64, n)
        }
        None => time_step(cfg, &state),
    };
    let every = ((cfg.time.output_interval / dt).round() as usize).max(1);
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
        write_text(&d.join("config.resolved.toml"), &cfg.to_toml())?;
    }
    let header = csv_header(state.grid.has_boundary());
    let mut res = RunResult {
        final_state: state.clone(),
        dt,
        steps,
        reports: Vec::new(),
        header: header.clone(),
        rows: Vec::new(),
        tail: Vec::new(),
        exact,
        snapshots: Vec::new(),
        bdcond_max: 0.0,
    };
    let mut csv = format!("{header}\n");
    let mut tail: VecDeque<StateField> = VecDeque::from([state.clone()]);
    let mut current = state;
    let mut outputs = 0u32;
    for step in 0..=steps {
        if step > 0 {
            match step_rk4(&current, dt, &opts) {
                Ok(next) => current = next,
                Err(e) => {
                    if let Some(d) = dir {
                        let rep = failure_report(&current);
                        let mut text = format!("{e}\nstep {step} of {steps}, dt = {dt:e}\nlast good state:\n");
                        let _ = writeln!(text, "{}\n{}", ResidualReport::CSV_HEADER, fmt_row(&rep.csv_fields()));
                        write_text(&d.join("failure.txt"), &text)?;
                        if cfg.output.csv {
                            write_text(&d.join("residuals.csv"), &csv)?;
                        }
                    }
                    return Err(e);
                }
            }
            tail.push_back(current.clone());
            if tail.len() > 3 {
                tail.pop_front();
            }
        }
        if step % every == 0 || step == steps {
            let (rep, row) = diagnostics_row(&current, &opts)?;
            if current.grid.has_boundary() {
                res.bdcond_max = res.bdcond_max.max(bdcond_max(&current));
            }
            let _ = writeln!(csv, "{}", fmt_row(&row));
            res.reports.push(rep);
            res.rows.push(row);
            let snap_due = cfg.output.snapshot_every > 0 && outputs.is_multiple_of(cfg.output.snapshot_every);
            if let (Some(d), true) = (dir, snap_due && step != steps) {
                let p = d.join(format!("snap_{step:06}.gadm"));
                snapshot::write(&p, &current)?;
                res.snapshots.push(p);
            }
            outputs += 1;
        }
    }
    if let Some(d) = dir {
        let p = d.join("final.gadm");
        snapshot::write(&p, &current)?;
        res.snapshots.push(p);
        if cfg.output.csv {
            write_text(&d.join("residuals.csv"), &csv)?;
        }
        if cfg.output.gnuplot {
            write_text(&d.join("plot.gp"), &gnuplot_script(&header))?;
        }
    }
    res.tail = tail.into_iter().collect();
    res.final_state = current;
    Ok(res)
}

pub fn run_evolve(cfg: &RunConfig) -> Result<RunResult> {
    evolve(cfg, Some(Path::new(&cfg.output.directory)), None)
}

/// Pointwise error against the exact solution: (max, L²) over all components.
pub fn exact_error(state: &StateField, exact: &dyn Recipe) -> (f64, f64) {
    let want = scenarios::sample_recipe(&state.grid, exact, state.t);
    diff_norms(state, &want, &state.grid, |i| i)
}

fn diff_norms(a: &StateField, b: &StateField, grid: &Grid, map: impl Fn(usize) -> usize + Sync) -> (f64, f64) {
    let (ca, cb) = (a.components(), b.components());
    let diff: Vec<Vec<f64>> = (0..NCOMP).map(|c| (0..grid.len()).map(|i| ca[c][i] - cb[c][map(i)]).collect()).collect();
    let refs: Vec<&[f64]> = diff.iter().map(|v| v.as_slice()).collect();
    (max_abs(&refs), crate::geometry::l2(grid, &refs))
}

/// Coarse-minus-fine difference on the coarse nodes.
pub fn richardson_difference(coarse: &StateField, fine: &StateField) -> (f64, f64) {
    let (gc, gf) = (&coarse.grid, &fine.grid);
    diff_norms(coarse, fine, gc, |i| {
        let [a, b, c] = gc.coords(i);
        gf.index(2 * a, 2 * b, 2 * c)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub quantity: String,
    pub values: Vec<f64>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub h: Vec<f64>,
    pub dt: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

/// Observed orders log(v_l/v_{l+1}) / log(h_l/h_{l+1}); NaN when the sequence
/// is not strictly decreasing.
pub fn observed_orders(values: &[f64], h: &[f64]) -> (Vec<f64>, bool) {
    let monotone = values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0);
    let orders = values
        .windows(2)
        .zip(h.windows(2))
        .map(|(v, h)| if monotone { (v[0] / v[1]).ln() / (h[0] / h[1]).ln() } else { f64::NAN })
        .collect();
    (orders, monotone)
}

impl ConvergenceTable {
    pub fn row(&self, name: &str) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.quantity == name)
    }

    fn push(&mut self, quantity: &str, values: Vec<f64>, h: &[f64]) {
        let (orders, ok) = observed_orders(&values, h);
        if !ok {
            self.warnings.push(format!("{quantity}: values not strictly decreasing; orders reported as NaN"));
        }
        self.rows.push(ConvergenceRow { quantity: quantity.into(), values, orders });
    }

    pub fn to_csv(&self) -> String {
        let nl = self.h.len();
        let mut s = String::from("quantity");
        for l in 0..nl {
            let _ = write!(s, ",level{l}");
        }
        for l in 0..nl - 1 {
            let _ = write!(s, ",order{l}{}", l + 1);
        }
        s.push('\n');
        for (name, vals) in [("h", &self.h), ("dt", &self.dt)] {
            let _ = writeln!(s, "{name},{}{}", fmt_row(vals), ",".repeat(nl - 1));
        }
        for r in &self.rows {
            let pad = nl - r.values.len();
            let _ = writeln!(
                s,
                "{},{}{},{}",
                r.quantity,
                ",".repeat(pad),
                fmt_row(&r.values),
                r.orders.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(",")
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let nl = self.h.len();
        let mut s = format!("{:<20}", "quantity");
        for l in 0..nl {
            let _ = write!(s, "{:>14}", format!("level {l}"));
        }
        for l in 0..nl - 1 {
            let _ = write!(s, "{:>10}", format!("p{l}{}", l + 1));
        }
        s.push('\n');
        for (name, vals) in [("h", &self.h), ("dt", &self.dt)] {
            let _ = write!(s, "{name:<20}");
            for v in vals.iter() {
                let _ = write!(s, "{v:>14.4e}");
            }
            s.push('\n');
        }
        for r in &self.rows {
            let _ = write!(s, "{:<20}", r.quantity);
            for _ in r.values.len()..nl {
                let _ = write!(s, "{:>14}", "");
            }
            for v in &r.values {
                let _ = write!(s, "{v:>14.4e}");
            }
            for o in &r.orders {
                let _ = write!(s, "{o:>10.3}");
            }
            s.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Runs `levels` factor-2 refinements (h and dt both halved) and tabulates
/// observed orders.
pub fn run_convergence(cfg: &RunConfig, levels: u32, dir: Option<&Path>) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::Invalid(format!("convergence needs at least 3 levels, got {levels}")));
    }
    let base = setup(cfg)?;
    let (dt0, _) = time_step(cfg, &base.state);
    drop(base);
    let mut runs = Vec::new();
    for l in 0..levels {
        let c = cfg.refined(l)?;
        let sub = dir.map(|d| d.join(format!("level{l}")));
        runs.push(evolve(&c, sub.as_deref(), Some(dt0 / (1u64 << l) as f64))?);
    }
    let h: Vec<f64> = runs.iter().map(|r| r.final_state.grid.h[0]).collect();
    let mut table =
        ConvergenceTable { h: h.clone(), dt: runs.iter().map(|r| r.dt).collect(), rows: vec![], warnings: vec![] };
    if let Some(exact) = &runs[0].exact {
        let e: Vec<(f64, f64)> = runs.iter().map(|r| exact_error(&r.final_state, exact.as_ref())).collect();
        table.push("error_max", e.iter().map(|x| x.0).collect(), &h);
        table.push("error_l2", e.iter().map(|x| x.1).collect(), &h);
    } else {
        let e: Vec<(f64, f64)> =
            runs.windows(2).map(|w| richardson_difference(&w[0].final_state, &w[1].final_state)).collect();
        table.push("richardson_max", e.iter().map(|x| x.0).collect(), &h[..h.len() - 1]);
        table.push("richardson_l2", e.iter().map(|x| x.1).collect(), &h[..h.len() - 1]);
    }
    let last = |f: &dyn Fn(&ResidualReport) -> f64| -> Vec<f64> {
        runs.iter().map(|r| f(r.reports.last().expect("final report"))).collect()
    };
    table.push("ham_l2", last(&|r| r.ham.l2), &h);
    table.push("mom_l2", last(&|r| r.mom.iter().map(|m| m.l2 * m.l2).sum::<f64>().sqrt()), &h);
    table.push("torsion_l2", last(&|r| r.torsion.l2), &h);
    let tp: Vec<_> = runs.iter().map(|r| torsion_propagation_check(&r.tail)).collect::<Result<_>>()?;
    table.push("torsion_prop_max", tp.iter().map(|t| t.max()).collect(), &h);
    table.push("torsion_prop_l2", tp.iter().map(|t| t.max_l2()).collect(), &h);
    if runs[0].final_state.grid.has_boundary() {
        let v = runs.iter().map(|r| r.column("ricci30_face_max").unwrap().into_iter().fold(0.0, f64::max)).collect();
        table.push("ricci30_face_max", v, &h);
    }
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
        write_text(&d.join("convergence.csv"), &table.to_csv())?;
        write_text(&d.join("convergence.txt"), &table.to_text())?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn orders_and_nan() {
        let (o, ok) = observed_orders(&[16.0, 1.0, 1.0 / 16.0], &[1.0, 0.5, 0.25]);
        assert!(ok && (o[0] - 4.0).abs() < 1e-12 && (o[1] - 4.0).abs() < 1e-12);
        let (o, ok) = observed_orders(&[1.0, 2.0, 0.5], &[1.0, 0.5, 0.25]);
        assert!(!ok && o.iter().all(|x| x.is_nan()));
    }

    #[test]
    fn minkowski_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "[scenario]\nname = \"minkowski\"\n[grid]\nn = [6, 6, 6]\n[time]\nt_end = 1.0\noutput_interval = 0.5\n[output]\ndirectory = \"{}\"\ngnuplot = true\n",
            dir.path().display()
        );
        let cfg = parse_config(&text).unwrap();
        let r = run_evolve(&cfg).unwrap();
        assert_eq!(r.final_state, StateField::flat(&cfg.grid().unwrap(), r.final_state.t));
        assert!((r.final_state.t - 1.0).abs() < 1e-12);
        for row in &r.rows {
            assert!(row[1..].iter().all(|v| *v == 0.0), "{row:?}");
        }
        for f in ["config.resolved.toml", "residuals.csv", "final.gadm", "plot.gp"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let echo = std::fs::read_to_string(dir.path().join("config.resolved.toml")).unwrap();
        assert_eq!(parse_config(&echo).unwrap(), cfg);
    }
}
