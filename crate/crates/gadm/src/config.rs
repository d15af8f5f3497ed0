//! Run configuration: TOML sections with every problem collected and located.
//!
//! ```toml
//! [scenario]
//! name = "perturbed_kasner"   # minkowski | kasner | perturbed_kasner | mms
//! p = [0.6666666666666666, 0.6666666666666666, -0.3333333333333333]
//! t0 = 1.0
//! amplitude = 1e-3            # perturbed_kasner
//! profile_power = 6           # perturbed_kasner, even ≥ 2
//! tangential = 0.5            # perturbed_kasner
//! recipe = "twisted_kasner"   # mms: minkowski | kasner | twisted_kasner | trig
//! eps = 0.1                   # mms twist / trig amplitude
//!
//! [grid]
//! n = [32, 32, 32]
//! length = [1.0, 1.0, 1.0]    # or h = [...]
//! topology = "periodic"       # periodic | slab
//!
//! [time]
//! cfl_factor = 0.25
//! t_end = 2.0
//! output_interval = 0.1
//!
//! [boundary]
//! kind = "none"               # none | geodesic
//!
//! [fd]
//! order = 4
//! dissipation = 0.0
//!
//! [output]
//! directory = "output"
//! snapshot_every = 0          # in output intervals; 0 = final only
//! csv = true
//! gnuplot = false
//!
//! [run]
//! seed = 0
//! ```
use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{ConfigIssue, Error, Result};
use crate::grid::{FdOrder, Grid, Topology};
use crate::recipes::{MinkowskiRecipe, Recipe, TrigRecipe, TwistedKasner};

pub const KASNER_DEFAULT: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub p: [f64; 3],
    pub t0: f64,
    pub amplitude: f64,
    pub profile_power: u32,
    pub tangential: f64,
    pub recipe: String,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub n: [usize; 3],
    pub length: [f64; 3],
    pub h: [f64; 3],
    pub topology: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeConfig {
    pub cfl_factor: f64,
    pub t_end: f64,
    pub output_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryConfig {
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdConfig {
    pub order: u32,
    pub dissipation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: String,
    pub snapshot_every: u32,
    pub csv: bool,
    pub gnuplot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub boundary: BoundaryConfig,
    pub fd: FdConfig,
    pub output: OutputConfig,
    pub run: RunSection,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("scenario", &["name", "p", "t0", "amplitude", "profile_power", "tangential", "recipe", "eps"]),
    ("grid", &["n", "length", "h", "topology"]),
    ("time", &["cfl_factor", "t_end", "output_interval"]),
    ("boundary", &["kind"]),
    ("fd", &["order", "dissipation"]),
    ("output", &["directory", "snapshot_every", "csv", "gnuplot"]),
    ("run", &["seed"]),
];

/// (section, key) → 1-based line; sections map with key "".
fn line_index(text: &str) -> HashMap<(String, String), usize> {
    let mut map = HashMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            if let Some(name) = rest.split(']').next() {
                section = name.trim().to_string();
                map.entry((section.clone(), String::new())).or_insert(i + 1);
            }
        } else if let Some((k, _)) = line.split_once('=') {
            let k = k.trim().trim_matches('"').to_string();
            if !k.is_empty() && !k.starts_with('#') {
                map.entry((section.clone(), k)).or_insert(i + 1);
            }
        }
    }
    map
}

struct Reader<'a> {
    table: &'a toml::Table,
    lines: HashMap<(String, String), usize>,
    issues: Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.lines.get(&(sec.to_string(), key.to_string())).copied()
    }

    fn issue(&mut self, sec: &str, key: &str, msg: String) {
        let line = self.line(sec, key).or_else(|| self.line(sec, ""));
        self.issues.push(ConfigIssue { line, message: msg });
    }

    fn raw(&self, sec: &str, key: &str) -> Option<&toml::Value> {
        self.table.get(sec)?.as_table()?.get(key)
    }

    fn f64(&mut self, sec: &str, key: &str) -> Option<f64> {
        let v = self.raw(sec, key)?.clone();
        match v {
            toml::Value::Float(x) => Some(x),
            toml::Value::Integer(x) => Some(x as f64),
            _ => {
                self.issue(sec, key, format!("{sec}.{key} must be a number"));
                None
            }
        }
    }

    fn int(&mut self, sec: &str, key: &str) -> Option<i64> {
        let v = self.raw(sec, key)?.clone();
        match v {
            toml::Value::Integer(x) => Some(x),
            _ => {
                self.issue(sec, key, format!("{sec}.{key} must be an integer"));
                None
            }
        }
    }

    fn bool(&mut self, sec: &str, key: &str) -> Option<bool> {
        let v = self.raw(sec, key)?.clone();
        match v {
            toml::Value::Boolean(x) => Some(x),
            _ => {
                self.issue(sec, key, format!("{sec}.{key} must be true or false"));
                None
            }
        }
    }

    fn string(&mut self, sec: &str, key: &str) -> Option<String> {
        let v = self.raw(sec, key)?.clone();
        match v {
            toml::Value::String(x) => Some(x),
            _ => {
                self.issue(sec, key, format!("{sec}.{key} must be a string"));
                None
            }
        }
    }

    fn f64x3(&mut self, sec: &str, key: &str) -> Option<[f64; 3]> {
        let v = self.raw(sec, key)?.clone();
        let arr = v.as_array().filter(|a| a.len() == 3).and_then(|a| {
            let xs: Vec<f64> = a.iter().filter_map(|x| x.as_float().or(x.as_integer().map(|i| i as f64))).collect();
            (xs.len() == 3).then(|| [xs[0], xs[1], xs[2]])
        });
        if arr.is_none() {
            self.issue(sec, key, format!("{sec}.{key} must be an array of 3 numbers"));
        }
        arr
    }

    fn usizex3(&mut self, sec: &str, key: &str) -> Option<[usize; 3]> {
        let v = self.raw(sec, key)?.clone();
        let arr = v.as_array().filter(|a| a.len() == 3).and_then(|a| {
            let xs: Vec<usize> =
                a.iter().filter_map(|x| x.as_integer().filter(|i| *i > 0).map(|i| i as usize)).collect();
            (xs.len() == 3).then(|| [xs[0], xs[1], xs[2]])
        });
        if arr.is_none() {
            self.issue(sec, key, format!("{sec}.{key} must be an array of 3 positive integers"));
        }
        arr
    }
}

/// Parses and validates; on failure every problem found is returned.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::ConfigList(vec![ConfigIssue { line, message: e.message().trim().to_string() }])
    })?;
    let mut r = Reader { table: &table, lines: line_index(text), issues: Vec::new() };

    for (sec, val) in &table {
        match SCHEMA.iter().find(|(s, _)| s == sec) {
            None => r.issue(sec, "", format!("unknown section [{sec}]")),
            Some((_, keys)) => match val.as_table() {
                None => r.issue(sec, "", format!("{sec} must be a section")),
                Some(t) => {
                    for k in t.keys() {
                        if !keys.contains(&k.as_str()) {
                            r.issue(sec, k, format!("unknown key {sec}.{k}"));
                        }
                    }
                }
            },
        }
    }

    let name = r.string("scenario", "name");
    if name.is_none() && r.raw("scenario", "name").is_none() {
        r.issue("scenario", "", "missing required field scenario.name".into());
    }
    let name = name.unwrap_or_else(|| "minkowski".into());
    if !["minkowski", "kasner", "perturbed_kasner", "mms"].contains(&name.as_str()) {
        r.issue(
            "scenario",
            "name",
            format!("scenario.name '{name}' is not one of minkowski, kasner, perturbed_kasner, mms"),
        );
    }
    let t0_default = if name == "minkowski" { 0.0 } else { 1.0 };
    let recipe = r.string("scenario", "recipe").unwrap_or_else(|| "twisted_kasner".into());
    if name == "mms" && !["minkowski", "kasner", "twisted_kasner", "trig"].contains(&recipe.as_str()) {
        r.issue(
            "scenario",
            "recipe",
            format!("scenario.recipe '{recipe}' is not one of minkowski, kasner, twisted_kasner, trig"),
        );
    }
    let scenario = ScenarioConfig {
        p: r.f64x3("scenario", "p").unwrap_or(KASNER_DEFAULT),
        t0: r.f64("scenario", "t0").unwrap_or(t0_default),
        amplitude: r.f64("scenario", "amplitude").unwrap_or(1e-3),
        profile_power: r.int("scenario", "profile_power").unwrap_or(6).clamp(0, u32::MAX as i64) as u32,
        tangential: r.f64("scenario", "tangential").unwrap_or(0.5),
        eps: r.f64("scenario", "eps").unwrap_or(0.1),
        recipe,
        name,
    };
    let uses_p = ["kasner", "perturbed_kasner"].contains(&scenario.name.as_str())
        || (scenario.name == "mms" && ["kasner", "twisted_kasner"].contains(&scenario.recipe.as_str()));
    if uses_p {
        if let Err(e) = crate::scenarios::check_kasner_exponents(scenario.p) {
            r.issue("scenario", "p", format!("scenario.p: {e}"));
        }
        if !(scenario.t0 > 0.0) {
            r.issue("scenario", "t0", "scenario.t0 must be > 0 for Kasner-type data".into());
        }
    }
    if scenario.profile_power < 2 || !scenario.profile_power.is_multiple_of(2) {
        r.issue("scenario", "profile_power", "scenario.profile_power must be an even integer ≥ 2".into());
    }

    let n = r.usizex3("grid", "n");
    if n.is_none() && r.raw("grid", "n").is_none() {
        r.issue("grid", "", "missing required field grid.n".into());
    }
    let n = n.unwrap_or([8; 3]);
    let topology = r.string("grid", "topology").unwrap_or_else(|| "periodic".into());
    let topo = match topology.as_str() {
        "periodic" => [Topology::Periodic; 3],
        "slab" => [Topology::Periodic, Topology::Periodic, Topology::Boundary],
        other => {
            r.issue("grid", "topology", format!("grid.topology '{other}' is not one of periodic, slab"));
            [Topology::Periodic; 3]
        }
    };
    let cells = |a: usize| match topo[a] {
        Topology::Periodic => n[a] as f64,
        Topology::Boundary => (n[a].max(2) - 1) as f64,
    };
    let (length, h) = match (r.f64x3("grid", "length"), r.f64x3("grid", "h")) {
        (Some(l), Some(h)) => {
            if (0..3).any(|a| (h[a] * cells(a) - l[a]).abs() > 1e-12 * l[a].abs()) {
                r.issue("grid", "h", "grid.h and grid.length disagree; give one of them".into());
            }
            (l, h)
        }
        (Some(l), None) => (l, std::array::from_fn(|a| l[a] / cells(a))),
        (None, Some(h)) => (std::array::from_fn(|a| h[a] * cells(a)), h),
        _ => ([1.0; 3], std::array::from_fn(|a| 1.0 / cells(a))),
    };
    if length.iter().any(|l| !(*l > 0.0)) {
        r.issue("grid", "length", "grid extents must be positive".into());
    }

    let t_end = r.f64("time", "t_end");
    if t_end.is_none() && r.raw("time", "t_end").is_none() {
        r.issue("time", "", "missing required field time.t_end".into());
    }
    let time = TimeConfig {
        cfl_factor: r.f64("time", "cfl_factor").unwrap_or(0.25),
        t_end: t_end.unwrap_or(scenario.t0 + 1.0),
        output_interval: r.f64("time", "output_interval").unwrap_or(0.1),
    };
    if !(time.cfl_factor > 0.0 && time.cfl_factor <= 1.0) {
        r.issue("time", "cfl_factor", format!("time.cfl_factor must be in (0, 1], got {}", time.cfl_factor));
    }
    if !(time.t_end > scenario.t0) {
        r.issue("time", "t_end", format!("time.t_end = {} must exceed the initial time {}", time.t_end, scenario.t0));
    }
    if !(time.output_interval > 0.0) {
        r.issue("time", "output_interval", "time.output_interval must be > 0".into());
    }

    let boundary = BoundaryConfig { kind: r.string("boundary", "kind").unwrap_or_else(|| "none".into()) };
    match boundary.kind.as_str() {
        "none" => {}
        "geodesic" => {
            if topology != "slab" {
                r.issue(
                    "boundary",
                    "kind",
                    "boundary.kind = geodesic needs grid.topology = slab (grid is fully periodic)".into(),
                );
            }
        }
        other => r.issue("boundary", "kind", format!("boundary.kind '{other}' is not one of none, geodesic")),
    }
    if scenario.name == "perturbed_kasner" && topology != "slab" {
        r.issue("scenario", "name", "perturbed_kasner needs grid.topology = slab".into());
    }

    let fd = FdConfig {
        order: r.int("fd", "order").unwrap_or(4).clamp(0, 100) as u32,
        dissipation: r.f64("fd", "dissipation").unwrap_or(0.0),
    };
    if fd.order != 2 && fd.order != 4 {
        r.issue("fd", "order", format!("fd.order must be 2 or 4, got {}", fd.order));
    }
    if !(fd.dissipation >= 0.0) {
        r.issue("fd", "dissipation", "fd.dissipation must be ≥ 0".into());
    }

    let output = OutputConfig {
        directory: r.string("output", "directory").unwrap_or_else(|| "output".into()),
        snapshot_every: r.int("output", "snapshot_every").unwrap_or(0).clamp(0, u32::MAX as i64) as u32,
        csv: r.bool("output", "csv").unwrap_or(true),
        gnuplot: r.bool("output", "gnuplot").unwrap_or(false),
    };
    let seed = r.int("run", "seed").unwrap_or(0);
    if seed < 0 {
        r.issue("run", "seed", "run.seed must be ≥ 0".into());
    }

    let cfg = RunConfig {
        scenario,
        grid: GridConfig { n, length, h, topology },
        time,
        boundary,
        fd,
        output,
        run: RunSection { seed: seed.max(0) as u64 },
    };
    if r.issues.is_empty() {
        if let Err(e) = cfg.grid() {
            r.issue("grid", "n", e.to_string());
        }
    }
    if r.issues.is_empty() {
        Ok(cfg)
    } else {
        r.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(Error::ConfigList(r.issues))
    }
}

impl RunConfig {
    pub fn fd_order(&self) -> FdOrder {
        if self.fd.order == 2 {
            FdOrder::Second
        } else {
            FdOrder::Fourth
        }
    }

    pub fn topology(&self) -> [Topology; 3] {
        if self.grid.topology == "slab" {
            [Topology::Periodic, Topology::Periodic, Topology::Boundary]
        } else {
            [Topology::Periodic; 3]
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.h, self.topology(), self.fd_order())
    }

    pub fn geodesic_boundary(&self) -> bool {
        self.boundary.kind == "geodesic"
    }

    /// The manufactured solution named by the scenario.
    pub fn recipe(&self) -> Arc<dyn Recipe> {
        let s = &self.scenario;
        match s.recipe.as_str() {
            "minkowski" => Arc::new(MinkowskiRecipe),
            "kasner" => Arc::new(TwistedKasner::kasner(s.p)),
            "trig" => Arc::new(TrigRecipe::new(self.run.seed, s.eps, self.grid.length)),
            _ => Arc::new(TwistedKasner::standard(s.p, s.eps, self.grid.length)),
        }
    }

    /// Same run at refinement level `level` (h and dt halved per level).
    pub fn refined(&self, level: u32) -> Result<RunConfig> {
        let g = self.grid()?.refined(level)?;
        let mut c = self.clone();
        c.grid.n = g.n;
        c.grid.h = g.h;
        Ok(c)
    }

    /// Resolved configuration with all defaults expanded.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[scenario]\nname = \"kasner\"\n[grid]\nn = [8, 8, 8]\n[time]\nt_end = 2.0\n";

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(Error::ConfigList(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_fills_defaults_and_echo_roundtrips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.time.cfl_factor, 0.25);
        assert_eq!(c.scenario.t0, 1.0);
        assert_eq!(c.scenario.p, KASNER_DEFAULT);
        assert_eq!(c.fd.order, 4);
        assert_eq!(c.boundary.kind, "none");
        assert_eq!(c.grid.h, [0.125; 3]);
        let echo = c.to_toml();
        assert_eq!(parse_config(&echo).unwrap(), c);
    }

    #[test]
    fn cfl_zero_names_field() {
        let v = issues(&format!("{MINIMAL}cfl_factor = 0\n"));
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("cfl_factor"));
        assert_eq!(v[0].line, Some(7));
    }

    #[test]
    fn geodesic_on_periodic_rejected() {
        let v = issues(&format!("{MINIMAL}[boundary]\nkind = \"geodesic\"\n"));
        assert!(v.iter().any(|i| i.message.contains("geodesic") && i.line == Some(8)));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "[scenario]\nname = \"kasner\"\nbogus = 1\n[grid]\nn = [8, 8]\n[time]\ncfl_factor = 2\n[fd]\ndissipation = -1\n[extra]\n";
        let v = issues(text);
        let lines: Vec<_> = v.iter().map(|i| i.line).collect();
        for want in [3, 5, 6, 7, 9, 10] {
            assert!(lines.contains(&Some(want)), "{v:?}");
        }
        assert!(v.iter().any(|i| i.message.contains("t_end")));
    }

    #[test]
    fn syntax_error_has_line() {
        let v = issues("[grid]\nn = [8, 8, 8\n");
        assert!(v[0].line.is_some());
    }
}
