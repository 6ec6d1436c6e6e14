//! Scenario files: one JSON document naming a system and a single operation,
//! run into an output directory with a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::catalog::{make_example, ExampleSpec, EXAMPLE_NAMES};
use crate::chains::{build_graph, chain_recurrent_cells, omega_estimate};
use crate::connect::{close_orbit, close_to_periodic, density_experiment, ClosingParams};
use crate::flow::SystemField;
use crate::impulse::Impulse;
use crate::linalg::Point;
use crate::periodic::{audit_kupka_smale, find_periodic, orbits_to_jsonl, DEFAULT_TOL};
use crate::semiflow::{hit_from_chart, poincare, trajectory, validate, ImpulsiveSystem};
use crate::{Error, Result};

/// Environment variable naming the root under which scenario outputs go.
pub const OUTPUT_ROOT_VAR: &str = "IMPULSIVE_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "impulsive-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub system: SystemField,
    pub impulse: Impulse,
    #[serde(default)]
    pub allow_invalid: bool,
    #[serde(default)]
    pub seed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Simulate {
        /// Ambient start; defaults to the example seed on the landing section.
        #[serde(default)]
        start: Option<Vec<f64>>,
        horizon: f64,
    },
    Hitmap {
        #[serde(default = "default_grid")]
        grid: usize,
    },
    Poincare {
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    Periodic {
        #[serde(default)]
        seed: Option<Vec<f64>>,
        #[serde(default = "one")]
        returns: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Audit {
        period_bound: f64,
        #[serde(default = "default_eps_bd")]
        eps_bd: f64,
        #[serde(default = "default_grid_small")]
        grid: usize,
    },
    Chain {
        h: f64,
        delta: f64,
    },
    Omega {
        hs: Vec<f64>,
        deltas: Vec<f64>,
    },
    Close {
        point: Vec<f64>,
        /// Target point; closing to a periodic orbit through `point` when absent.
        #[serde(default)]
        target: Option<Vec<f64>>,
        eps: f64,
        h: f64,
        delta: f64,
        #[serde(default)]
        max_halvings: Option<usize>,
    },
    Density {
        eps: f64,
        h: f64,
        delta: f64,
        #[serde(default)]
        max_cells: Option<usize>,
    },
    Validate {},
}

fn default_grid() -> usize {
    41
}
fn default_grid_small() -> usize {
    5
}
fn default_iterations() -> usize {
    20
}
fn one() -> usize {
    1
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_eps_bd() -> f64 {
    1e-3
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Simulate { .. } => "simulate",
            Operation::Hitmap { .. } => "hitmap",
            Operation::Poincare { .. } => "poincare",
            Operation::Periodic { .. } => "periodic",
            Operation::Audit { .. } => "audit",
            Operation::Chain { .. } => "chain",
            Operation::Omega { .. } => "omega",
            Operation::Close { .. } => "close",
            Operation::Density { .. } => "density",
            Operation::Validate {} => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub example: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub inline: Option<InlineSystem>,
    pub operation: Operation,
    /// Output directory, relative to the output root.
    pub output: String,
    #[serde(default)]
    pub seed: u64,
    /// Build even when the impulse fails validation.
    #[serde(default)]
    pub override_validation: bool,
    #[serde(default)]
    pub horizon: Option<f64>,
}

/// Parse and check a scenario; every problem is a config error.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text)?;
    match (&s.example, &s.inline) {
        (Some(_), Some(_)) => return Err(Error::Config("field `example` and field `inline` are exclusive".into())),
        (None, None) => return Err(Error::Config("one of `example` or `inline` is required".into())),
        (Some(name), None) if !EXAMPLE_NAMES.contains(&name.as_str()) => {
            return Err(Error::Config(format!("field `example`: unknown example `{name}`")))
        }
        _ => {}
    }
    if s.output.is_empty() || Path::new(&s.output).is_absolute() || s.output.contains("..") {
        return Err(Error::Config("field `output` must be a relative directory name".into()));
    }
    if let Some(h) = s.horizon {
        if !(h > 0.0) {
            return Err(Error::Config("field `horizon` must be positive".into()));
        }
    }
    Ok(s)
}

impl Scenario {
    /// The system description, without building it.
    pub fn spec(&self) -> Result<ExampleSpec> {
        match (&self.example, &self.inline) {
            (Some(name), _) => make_example(name, &self.params).map_err(|e| Error::Config(format!("field `params`: {e}"))),
            (None, Some(inline)) => Ok(ExampleSpec {
                name: "inline".into(),
                params: BTreeMap::new(),
                system: inline.system.clone(),
                impulse: inline.impulse.clone(),
                allow_invalid: inline.allow_invalid,
                seed: inline.seed.clone(),
                facts: vec![],
            }),
            _ => Err(Error::Config("one of `example` or `inline` is required".into())),
        }
    }

    pub fn build(&self) -> Result<ImpulsiveSystem> {
        let spec = self.spec()?;
        let built = if spec.allow_invalid || self.override_validation {
            ImpulsiveSystem::new_allow_invalid(spec.system.clone(), spec.impulse.clone())
        } else {
            ImpulsiveSystem::new(spec.system.clone(), spec.impulse.clone())
        };
        let mut sys = built.map_err(|e| Error::Config(format!("system: {e}")))?;
        if let Some(h) = self.horizon {
            sys.opts.horizon = h;
        }
        Ok(sys)
    }
}

/// Canonical scenario for a named example.
pub fn canonical_scenario(name: &str) -> Result<Scenario> {
    let spec = make_example(name, &BTreeMap::new())?;
    let operation = match name {
        "annulus" => Operation::Simulate {
            start: None,
            horizon: 10.0,
        },
        "predator_prey" => Operation::Periodic {
            seed: None,
            returns: 1,
            tol: DEFAULT_TOL,
        },
        "radial_disk" => Operation::Density {
            eps: 0.1,
            h: 0.1,
            delta: 0.05,
            max_cells: None,
        },
        "torus_linear" => Operation::Chain { h: 0.05, delta: 0.05 },
        "disk_billiard" => Operation::Poincare {
            points: None,
            iterations: 8,
        },
        _ => Operation::Validate {},
    };
    Ok(Scenario {
        example: Some(name.into()),
        params: spec.params,
        inline: None,
        operation,
        output: name.into(),
        seed: 0,
        override_validation: false,
        horizon: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    AnalysisFailure(String),
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::AnalysisFailure(_) => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub summary: String,
    pub directory: PathBuf,
    /// Files written, relative to `directory`, excluding the manifest.
    pub files: Vec<String>,
}

/// Output root from the environment, or the default.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct Outputs {
    files: BTreeMap<String, String>,
    summary: Vec<String>,
}

impl Outputs {
    fn file(&mut self, name: &str, body: String) {
        self.files.insert(name.into(), body);
    }
    fn line(&mut self, l: impl Into<String>) {
        self.summary.push(l.into());
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn seed_point(spec: &ExampleSpec, sys: &ImpulsiveSystem) -> Point {
    if spec.seed.len() == sys.dhat.chart_dim() {
        Point::from_column_slice(&spec.seed)
    } else {
        let c: Vec<f64> = sys.dhat.chart_box.iter().map(|[a, b]| 0.5 * (a + b)).collect();
        Point::from_column_slice(&c)
    }
}

fn check_dim(v: &[f64], dim: usize, field: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::Config(format!("field `{field}`: expected {dim} coordinates, got {}", v.len())));
    }
    Ok(Point::from_column_slice(v))
}

fn plot_rows(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("# {header}\n");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

/// Execute the operation, returning the files to write. `Err` is a config
/// problem; analysis failures are reported inside `Ok`.
fn execute(sc: &Scenario, emit_plot: bool) -> Result<(Outputs, RunStatus)> {
    let spec = sc.spec()?;
    let sys = sc.build()?;
    let mut out = Outputs {
        files: BTreeMap::new(),
        summary: vec![format!("system: {} ({})", spec.name, sys.system.kind.name())],
    };
    let kchart = sys.dhat.chart_dim();
    let mut status = RunStatus::Success;
    let mut fail = |out: &mut Outputs, e: &Error| {
        out.file("failure.json", pretty(&json!({ "error": e.to_string() })));
        out.line(format!("analysis failure: {e}"));
        status = RunStatus::AnalysisFailure(e.to_string());
    };
    match &sc.operation {
        Operation::Simulate { start, horizon } => {
            if !(*horizon >= 0.0) {
                return Err(Error::Config("field `operation.horizon` must be non-negative".into()));
            }
            let x = match start {
                Some(v) => check_dim(v, sys.system.dim(), "operation.start")?,
                None => sys.dhat.chart_to_ambient(&seed_point(&spec, &sys))?,
            };
            match trajectory(&sys, &x, *horizon) {
                Ok(tr) => {
                    out.file("trajectory.csv", tr.to_csv());
                    out.file("jumps.csv", tr.jumps_csv());
                    if emit_plot {
                        let mut s = String::from("# t x1.. ; arcs separated by blank lines\n");
                        for arc in &tr.arcs {
                            for (t, p) in &arc.samples {
                                let cells: Vec<String> = std::iter::once(*t).chain(p.iter().copied()).map(|v| v.to_string()).collect();
                                s.push_str(&cells.join(" "));
                                s.push('\n');
                            }
                            s.push('\n');
                        }
                        out.file("plot_trajectory.dat", s);
                    }
                    out.line(format!("jumps: {}, end time {}, escaped: {}", tr.jumps.len(), tr.end_time, tr.escaped));
                }
                Err(e) => fail(&mut out, &e),
            }
        }
        Operation::Hitmap { grid } => {
            let pts = sys.dhat.grid((*grid).max(1), sys.dhat.boundary_margin);
            let mut csv = String::new();
            for i in 1..=kchart {
                let _ = write!(csv, "v{i},");
            }
            csv.push_str("tau1");
            for i in 1..=sys.d.chart_dim() {
                let _ = write!(csv, ",u{i}");
            }
            csv.push_str(",status\n");
            let rows: Vec<(Point, std::result::Result<crate::semiflow::HitResult, Error>)> =
                pts.into_iter().map(|v| { let h = hit_from_chart(&sys, &v); (v, h) }).collect();
            let mut finite = 0;
            let mut plot = Vec::new();
            for (v, h) in &rows {
                for c in v.iter() {
                    let _ = write!(csv, "{c},");
                }
                match h {
                    Ok(hit) if hit.is_finite() => {
                        finite += 1;
                        let _ = write!(csv, "{}", hit.tau1);
                        for c in hit.hit_chart.as_ref().unwrap().iter() {
                            let _ = write!(csv, ",{c}");
                        }
                        csv.push_str(",ok\n");
                        plot.push(v.iter().copied().chain([hit.tau1]).collect());
                    }
                    other => {
                        csv.push_str("inf");
                        for _ in 0..sys.d.chart_dim() {
                            csv.push_str(",");
                        }
                        let tag = match other {
                            Ok(_) => "no_return".to_string(),
                            Err(e) => crate::connect::failure_kind(e),
                        };
                        let _ = writeln!(csv, ",{tag}");
                    }
                }
            }
            out.file("hitmap.csv", csv);
            if emit_plot {
                out.file("plot_hitmap.dat", plot_rows("v1.. tau1", plot.into_iter()));
            }
            out.line(format!("grid points: {}, finite hits: {finite}", rows.len()));
        }
        Operation::Poincare { points, iterations } => {
            let starts: Vec<Point> = match points {
                Some(ps) => ps.iter().map(|p| check_dim(p, kchart, "operation.points")).collect::<Result<_>>()?,
                None => vec![seed_point(&spec, &sys)],
            };
            let mut csv = String::from("start,k");
            for i in 1..=kchart {
                let _ = write!(csv, ",v{i}");
            }
            csv.push_str(",tau\n");
            let mut plot = Vec::new();
            let mut stopped = 0;
            for (s, v0) in starts.iter().enumerate() {
                let mut v = v0.clone();
                let _ = write!(csv, "{s},0");
                for c in v.iter() {
                    let _ = write!(csv, ",{c}");
                }
                csv.push_str(",0\n");
                for k in 1..=*iterations {
                    match poincare(&sys, &v) {
                        Ok((w, tau)) => {
                            let _ = write!(csv, "{s},{k}");
                            for c in w.iter() {
                                let _ = write!(csv, ",{c}");
                            }
                            let _ = writeln!(csv, ",{tau}");
                            plot.push(w.iter().copied().collect());
                            v = w;
                        }
                        Err(e) => {
                            stopped += 1;
                            out.line(format!("start {s} stopped at iterate {k}: {e}"));
                            break;
                        }
                    }
                }
            }
            out.file("poincare.csv", csv);
            if emit_plot {
                out.file("plot_poincare.dat", plot_rows("v1..", plot.into_iter()));
            }
            out.line(format!("starts: {}, stopped early: {stopped}", starts.len()));
        }
        Operation::Periodic { seed, returns, tol } => {
            let u0 = match seed {
                Some(v) => check_dim(v, kchart, "operation.seed")?,
                None => seed_point(&spec, &sys),
            };
            match find_periodic(&sys, &u0, *returns, *tol) {
                Ok(o) => {
                    out.line(format!("period {}, multipliers {:?}, {:?}", o.period, o.multipliers, o.tag));
                    out.file("orbits.jsonl", orbits_to_jsonl(std::slice::from_ref(&o)));
                }
                Err(e) => fail(&mut out, &e),
            }
        }
        Operation::Audit { period_bound, eps_bd, grid } => {
            let seeds = sys.dhat.grid((*grid).max(1), sys.dhat.boundary_margin);
            let rep = audit_kupka_smale(&sys, *period_bound, *eps_bd, &seeds);
            out.line(format!(
                "orbits: {}, hyperbolic {}, non-hyperbolic {}, verdict {}",
                rep.orbits.len(),
                rep.hyperbolic,
                rep.non_hyperbolic,
                rep.verdict
            ));
            out.file("orbits.jsonl", orbits_to_jsonl(&rep.orbits));
            out.file("audit.json", pretty(&rep));
        }
        Operation::Chain { h, delta } => {
            if !(*h > 0.0 && *delta >= 0.0) {
                return Err(Error::Config("fields `operation.h` / `operation.delta` out of range".into()));
            }
            let g = build_graph(&sys, *h, *delta);
            let rec = chain_recurrent_cells(&g);
            out.file("cells.csv", g.cells_csv());
            out.file("adjacency.csv", g.adjacency_csv());
            out.file("recurrent.json", pretty(&json!({ "cells": g.len(), "recurrent": rec })));
            if emit_plot {
                out.file(
                    "plot_recurrent.dat",
                    plot_rows("cell center", rec.iter().map(|&c| g.center(c).iter().copied().collect())),
                );
            }
            out.line(format!("cells: {}, chain recurrent: {}", g.len(), rec.len()));
        }
        Operation::Omega { hs, deltas } => {
            if hs.is_empty() || hs.len() != deltas.len() || hs.iter().any(|h| !(*h > 0.0)) {
                return Err(Error::Config("fields `operation.hs` and `operation.deltas` must be equal-length positive lists".into()));
            }
            let rep = omega_estimate(&sys, hs, deltas);
            for l in &rep.levels {
                out.line(format!("h {} delta {}: {} of {} cells recurrent", l.h, l.delta, l.recurrent.len(), l.cells));
            }
            out.line(format!("nested: {:?}", rep.nested));
            out.file("omega.json", pretty(&rep));
        }
        Operation::Close { point, target, eps, h, delta, max_halvings } => {
            let x = check_dim(point, kchart, "operation.point")?;
            let params = ClosingParams {
                seed: sc.seed,
                max_halvings: max_halvings.unwrap_or(ClosingParams::default().max_halvings),
                ..ClosingParams::default()
            };
            match target {
                Some(t) => {
                    let y = check_dim(t, kchart, "operation.target")?;
                    match close_orbit(&sys, &x, &y, *eps, *delta, &params) {
                        Ok(c) => {
                            out.line(format!("closed with {} bumps, C1 cost {}", c.plan.jumps.len(), c.c1_cost));
                            out.file("closing.json", pretty(&c));
                        }
                        Err(e) => fail(&mut out, &e),
                    }
                }
                None => match close_to_periodic(&sys, &x, *eps, *h, *delta, &params) {
                    Ok(pc) => {
                        out.line(format!(
                            "periodic orbit of {} returns, period {}, {:?}, C1 cost {}",
                            pc.orbit.len(),
                            pc.orbit.period,
                            pc.orbit.tag,
                            pc.c1_cost
                        ));
                        out.file("orbits.jsonl", orbits_to_jsonl(std::slice::from_ref(&pc.orbit)));
                        out.file("closing.json", pretty(&pc));
                    }
                    Err(e) => fail(&mut out, &e),
                },
            }
        }
        Operation::Density { eps, h, delta, max_cells } => {
            let params = ClosingParams {
                seed: sc.seed,
                ..ClosingParams::default()
            };
            let rep = density_experiment(&sys, *eps, *h, *delta, *max_cells, &params);
            out.line(format!(
                "density: {}/{} recurrent cells closed (fraction {}), failures {:?}",
                rep.successes, rep.tested, rep.fraction, rep.failures
            ));
            out.file("report.json", pretty(&rep));
        }
        Operation::Validate {} => {
            let rep = validate(&sys.impulse, &sys.system);
            out.line(format!(
                "verdict {}: gap {}, transversal {}, tau1 derivative sup {}",
                rep.verdict,
                rep.hausdorff_gap,
                rep.landing_transversal,
                rep.tau1_sup_bound.map(|v| v.to_string()).unwrap_or_else(|| "inf".into())
            ));
            out.file("validation.json", pretty(&rep));
        }
    }
    Ok((out, status))
}

/// Run a parsed scenario into `root/<output>`.
pub fn run_scenario(sc: &Scenario, config_text: &str, root: &Path, emit_plot: bool) -> Result<RunOutcome> {
    let started = Instant::now();
    let (out, status) = execute(sc, emit_plot)?;
    let dir = root.join(&sc.output);
    fs::create_dir_all(&dir)?;
    let mut listed = Vec::new();
    for (name, body) in &out.files {
        fs::write(dir.join(name), body)?;
        listed.push(json!({ "file": name, "sha256": sha256_hex(body.as_bytes()) }));
    }
    let manifest = json!({
        "config_sha256": sha256_hex(config_text.as_bytes()),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "operation": sc.operation.name(),
        "exit_status": status.exit_code(),
        "outputs": listed,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    fs::write(dir.join("manifest.json"), pretty(&manifest))?;
    let mut summary = format!("operation: {}\n", sc.operation.name());
    for l in &out.summary {
        summary.push_str(l);
        summary.push('\n');
    }
    let _ = writeln!(summary, "outputs in {}", dir.display());
    Ok(RunOutcome {
        status,
        summary,
        directory: dir,
        files: out.files.keys().cloned().collect(),
    })
}

/// Read, parse and run a config file.
pub fn run_file(path: &Path, root: &Path, emit_plot: bool) -> Result<RunOutcome> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let sc = parse_scenario(&text)?;
    run_scenario(&sc, &text, root, emit_plot)
}

/// One line per example: name and its facts.
pub fn examples_listing() -> Result<String> {
    let mut s = String::new();
    for name in EXAMPLE_NAMES {
        let spec = make_example(name, &BTreeMap::new())?;
        let facts: Vec<String> = spec.facts.iter().map(|f| format!("{}={}", f.quantity, f.value)).collect();
        let _ = writeln!(s, "{name}: {}", facts.join(", "));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_are_config_errors() {
        assert!(matches!(parse_scenario("{"), Err(Error::Config(_))));
        let both = r#"{"example":"annulus","inline":null,"operation":{"kind":"validate"},"output":"x","bogus":1}"#;
        let e = parse_scenario(both).unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 1"), "{e}");
        let unknown = r#"{"example":"nope","operation":{"kind":"validate"},"output":"x"}"#;
        assert!(matches!(parse_scenario(unknown), Err(Error::Config(_))));
        for name in EXAMPLE_NAMES {
            let sc = canonical_scenario(name).unwrap();
            let text = serde_json::to_string_pretty(&sc).unwrap();
            assert_eq!(parse_scenario(&text).unwrap(), sc);
        }
    }

    #[test]
    fn simulate_annulus() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"example":"annulus","operation":{"kind":"simulate","horizon":10.0},"output":"sim"}"#;
        let sc = parse_scenario(text).unwrap();
        let out = run_scenario(&sc, text, dir.path(), true).unwrap();
        assert_eq!(out.status, RunStatus::Success);
        let csv = fs::read_to_string(out.directory.join("trajectory.csv")).unwrap();
        assert_eq!(csv.lines().filter(|l| l.ends_with(",1")).count(), 3);
        assert!(out.directory.join("manifest.json").exists());
        assert!(out.directory.join("plot_trajectory.dat").exists());
    }
}
