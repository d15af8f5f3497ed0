use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gadm::checks::{levi_civita_study, run_checks, CheckHooks};
use gadm::config::{parse_config, RunConfig};
use gadm::evolution::EvolveOptions;
use gadm::geometry::ResidualReport;
use gadm::hyperbolicity::{characteristic_speeds, classify_good_bad, SpectrumRecord};
use gadm::norms::{bs_norm, energy, hs_norm, StateComponents};
use gadm::runner::{run_convergence, run_evolve};
use gadm::state::{component_name, K_OFF, NCOMP};
use gadm::{snapshot, Error};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK: u8 = 4;

/// Geodesic-gauge ADM evolution with verification tooling.
///
/// The thread count is taken from GADM_THREADS (default: all cores).
#[derive(Parser)]
#[command(name = "gadm", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the scenario described by a TOML config.
    Evolve {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override [output] directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a refinement study (h and dt halved per level).
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Symbol symmetry, flux negativity, good/bad structure, boundary flux, Koszul torsion.
    CheckHyperbolicity {
        /// Emit JSON lines instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Levi-Civita identities of Koszul connections of random frames under refinement.
    CheckIdentities {
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// H^s / B^s norms and energy of K and Γ in a snapshot.
    Norms {
        snapshot: PathBuf,
        #[arg(long, default_value_t = 1)]
        s: usize,
    },
    /// Summary of a snapshot: grid, time, residuals, component ranges.
    Inspect { snapshot: PathBuf },
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ConfigList(_) | Error::Invalid(_) => EXIT_CONFIG,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        Error::Snapshot(_) | Error::Io(_) => EXIT_IO,
    }
}

fn load_config(path: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(o) = output {
        cfg.output.directory = o.display().to_string();
    }
    Ok(cfg)
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("GADM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("GADM_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<u8, Error> {
    match cmd {
        Cmd::Evolve { config, seed, output } => {
            let cfg = load_config(&config, seed, output)?;
            let r = run_evolve(&cfg)?;
            let last = r.reports.last().expect("final report");
            println!("t = {:.6}, steps = {}, dt = {:.6e}", r.final_state.t, r.steps, r.dt);
            println!("max constraint residual = {:.3e}", last.max_constraint());
            println!("outputs in {}", cfg.output.directory);
            Ok(0)
        }
        Cmd::Convergence { config, levels, seed, output } => {
            let cfg = load_config(&config, seed, output)?;
            let dir = PathBuf::from(&cfg.output.directory);
            let table = run_convergence(&cfg, levels, Some(&dir))?;
            print!("{}", table.to_text());
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Cmd::CheckHyperbolicity { json } => {
            let results = run_checks(&CheckHooks::default());
            let split = classify_good_bad();
            let spectra: Vec<SpectrumRecord> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
                .into_iter()
                .map(|xi| SpectrumRecord { xi, speeds: characteristic_speeds(xi).expect("nonzero covector") })
                .collect();
            if json {
                for r in &results {
                    println!("{}", serde_json::to_string(r).expect("serializable"));
                }
                for s in &spectra {
                    println!("{}", serde_json::to_string(s).expect("serializable"));
                }
                println!("{}", serde_json::to_string(&split).expect("serializable"));
            } else {
                for r in &results {
                    println!("{} {:<24} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                }
                for s in &spectra {
                    let v: Vec<String> = s.speeds.iter().map(|x| format!("{x:.4}")).collect();
                    println!("speeds xi={:?}: {}", s.xi, v.join(" "));
                }
                println!("good: {}", split.good.join(" "));
                println!("bad:  {}", split.bad.join(" "));
            }
            Ok(if results.iter().all(|r| r.pass) { 0 } else { EXIT_CHECK })
        }
        Cmd::CheckIdentities { frames, n, seed, json } => {
            let study = levi_civita_study(frames, n, seed)?;
            let pass = study.pass(3.5);
            if json {
                println!("{}", serde_json::to_string(&study).expect("serializable"));
            } else {
                println!("grids {:?}, {} frames, seed {}", study.n, frames, seed);
                println!("max torsion            {:.3e}", study.worst_torsion);
                println!("worst torsion order    {:.3}", study.worst_torsion_order);
                println!("worst Ricci order      {:.3}", study.worst_ricci_order);
                println!("worst Riemann order    {:.3}", study.worst_riemann_order);
                println!("{}", if pass { "PASS" } else { "FAIL" });
            }
            Ok(if pass { 0 } else { EXIT_CHECK })
        }
        Cmd::Norms { snapshot: path, s } => {
            let st = snapshot::read(&path)?;
            let comps = st.components();
            let curv: Vec<&[f64]> = comps[K_OFF..NCOMP].to_vec();
            println!("t = {}", st.t);
            println!("energy = {:.12e}", energy(&st));
            if s <= 2 {
                println!("hs{s} = {:.12e}", hs_norm(&curv, s, &st)?);
            } else {
                println!("hs{s} = unsupported (s ≤ 2)");
            }
            println!("bs{s} = {:.12e}", bs_norm(&StateComponents::curvature(), s, &st, &EvolveOptions::default())?);
            Ok(0)
        }
        Cmd::Inspect { snapshot: path } => {
            let st = snapshot::read(&path)?;
            let g = &st.grid;
            println!("grid n = {:?}, h = {:?}, topology = {:?}, order = {}", g.n, g.h, g.topology, g.fd.as_int());
            println!("t = {}", st.t);
            let v = st.validate();
            println!("frame drift = {:.3e}, min |det f| = {:.6e}", v.frame_drift, v.min_abs_det);
            if let Some((c, idx)) = v.first_non_finite {
                println!("non-finite {} at {:?}", component_name(c), g.coords(idx));
            }
            let rep = ResidualReport::of(&st);
            for (name, val) in ResidualReport::CSV_HEADER.split(',').zip(rep.csv_fields()) {
                println!("{name:<14} {val:.6e}");
            }
            for (c, u) in comps_iter(&st) {
                let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                println!("{:<8} [{lo:+.6e}, {hi:+.6e}]", component_name(c));
            }
            Ok(0)
        }
    }
}

fn comps_iter(st: &gadm::StateField) -> impl Iterator<Item = (usize, &[f64])> {
    st.components().into_iter().enumerate()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
