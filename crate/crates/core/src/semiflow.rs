//! The impulsive trajectory engine: hitting times, impulsive orbits, the
//! Poincaré map with its Jacobian, the hitting-time derivative supremum and
//! holonomies between nearby sections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, exact_crossings, IntegratorOpts, SystemField};
use crate::impulse::{Impulse, ValidationReport};
use crate::linalg::{left_inverse, Matrix, Point};
use crate::sections::CrossSection;

/// Normalized `|grad g . X|` below which a crossing counts as grazing.
pub const GRAZING_GUARD: f64 = 1e-6;
/// Default horizon standing in for `tau = +inf`.
pub const DEFAULT_HORIZON: f64 = 1e3;
/// Jumps scheduled within this much of the end of a trajectory are still taken.
pub const EVENT_TOL: f64 = 1e-9;
/// Field speed below which an orbit is treated as parked at an equilibrium.
const STALL_SPEED: f64 = 1e-13;
const BISECTIONS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiflowOpts {
    pub integrator: IntegratorOpts,
    pub horizon: f64,
    pub grazing_guard: f64,
}

impl Default for SemiflowOpts {
    fn default() -> Self {
        SemiflowOpts {
            integrator: IntegratorOpts::default(),
            horizon: DEFAULT_HORIZON,
            grazing_guard: GRAZING_GUARD,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImpulsiveSystem {
    pub system: SystemField,
    pub d: CrossSection,
    pub dhat: CrossSection,
    pub impulse: Impulse,
    pub validation: ValidationReport,
    pub opts: SemiflowOpts,
}

impl ImpulsiveSystem {
    /// Validated construction; fails when the impulse is not admissible.
    pub fn new(system: SystemField, impulse: Impulse) -> Result<Self> {
        Self::build(system, impulse, false)
    }

    /// Construction that records but does not enforce the validation verdict.
    pub fn new_allow_invalid(system: SystemField, impulse: Impulse) -> Result<Self> {
        Self::build(system, impulse, true)
    }

    fn build(system: SystemField, impulse: Impulse, allow_invalid: bool) -> Result<Self> {
        let mut sys = Self::assemble(system, impulse);
        sys.validation = validate_system(&sys);
        if !allow_invalid && !sys.validation.verdict {
            return Err(Error::BadParams(format!(
                "impulse from `{}` to `{}` is not admissible: {:?}",
                sys.d.name, sys.dhat.name, sys.validation
            )));
        }
        Ok(sys)
    }

    fn assemble(system: SystemField, impulse: Impulse) -> Self {
        ImpulsiveSystem {
            system,
            d: impulse.source.clone(),
            dhat: impulse.target.clone(),
            impulse,
            validation: ValidationReport {
                hausdorff_gap: 0.0,
                landing_transversal: false,
                tau1_sup_bound: None,
                verdict: false,
            },
            opts: SemiflowOpts::default(),
        }
    }

    /// Same system with a perturbed impulse. The validation record is kept:
    /// the hitting-time condition depends only on the sections, and callers
    /// perturb within C1 budgets far below the section gap.
    pub fn with_impulse(&self, impulse: Impulse) -> Result<Self> {
        if impulse.source != self.d || impulse.target != self.dhat {
            return Err(Error::IncompatibleSections);
        }
        let mut s = self.clone();
        s.impulse = impulse;
        Ok(s)
    }

    pub fn with_opts(mut self, opts: SemiflowOpts) -> Self {
        self.opts = opts;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitResult {
    /// `+inf` when no hit occurs within the horizon.
    pub tau1: f64,
    pub hit_chart: Option<Point>,
    pub hit_point: Option<Point>,
    /// `d tau1 / dx` in ambient coordinates.
    pub dtau1: Option<DVector<f64>>,
    /// Derivative of `x -> phi_{tau1(x)}(x)` (ambient to ambient).
    pub hit_jacobian: Option<Matrix>,
    pub grazing: bool,
}

impl HitResult {
    fn none() -> Self {
        HitResult {
            tau1: f64::INFINITY,
            hit_chart: None,
            hit_point: None,
            dtau1: None,
            hit_jacobian: None,
            grazing: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tau1.is_finite()
    }
}

struct Event {
    time: f64,
    point: Point,
    jac: Matrix,
}

/// Crossings of `section` (inside its chart box) by the integrated flow from
/// `x` over `[0, t_end]` (or `[t_end, 0]` when negative). Stops after the
/// first when `first_only`. Also returns the sampled path.
fn scan_ode(
    sys: &SystemField,
    section: &CrossSection,
    x: &Point,
    t_end: f64,
    h: f64,
    first_only: bool,
    record: bool,
) -> Result<(Vec<Event>, Vec<(f64, Point)>)> {
    let dir = t_end.signum();
    let dim = x.len();
    let mut t = 0.0;
    let mut cur = x.clone();
    let mut jac = DMatrix::identity(dim, dim);
    let mut g0 = section.event_g(&cur);
    // a start on the section itself is not a crossing, whatever the rounding
    if g0.abs() < 1e-12 {
        g0 = 0.0;
    }
    let mut events = Vec::new();
    let mut path = Vec::new();
    if record {
        path.push((0.0, cur.clone()));
    }
    while t * dir < t_end.abs() {
        let step = (h.min(t_end.abs() - t * dir)) * dir;
        let (nx, nj) = flow::step(sys, &cur, Some(&jac), step);
        let nj = nj.unwrap();
        if !sys.in_domain(&nx) {
            return Err(Error::Domain {
                system: sys.kind.name().into(),
                point: nx.iter().copied().collect(),
            });
        }
        let g1 = section.event_g(&nx);
        if (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0) {
            let (mut lo, mut hi) = (0.0, step);
            let mut glo = g0;
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let (p, _) = flow::step(sys, &cur, None, mid);
                let gm = section.event_g(&p);
                if (glo < 0.0 && gm >= 0.0) || (glo > 0.0 && gm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            let (p, pj) = flow::step(sys, &cur, Some(&jac), hi);
            if section.chart_inverse(&p).is_some() {
                events.push(Event {
                    time: t + hi,
                    point: p,
                    jac: pj.unwrap(),
                });
                if first_only {
                    if record {
                        path.push((t + hi, events[0].point.clone()));
                    }
                    return Ok((events, path));
                }
            }
        }
        cur = nx;
        jac = nj;
        g0 = g1;
        t += step;
        if record {
            path.push((t, cur.clone()));
        }
        if sys.field(&cur).norm() < STALL_SPEED {
            break;
        }
    }
    Ok((events, path))
}

fn hit_error_checks(sys: &ImpulsiveSystem, hit: &HitResult) -> Result<()> {
    if hit.grazing {
        return Err(Error::GrazingHit {
            t: hit.tau1,
            margin: normalized_margin(sys, hit.hit_point.as_ref().unwrap()),
        });
    }
    if let Some(u) = &hit.hit_chart {
        if sys.d.edge_distance(u) < sys.d.boundary_margin {
            return Err(Error::BoundaryHit {
                section: sys.d.name.clone(),
                u: u.iter().copied().collect(),
            });
        }
    }
    Ok(())
}

fn normalized_margin(sys: &ImpulsiveSystem, y: &Point) -> f64 {
    let v = sys.system.field(y);
    let gr = sys.d.grad_g(y);
    let denom = v.norm() * gr.norm();
    if denom == 0.0 {
        0.0
    } else {
        gr.dot(&v).abs() / denom
    }
}

/// First hit of `D` with the grazing flag set rather than raised, plus the sampled path.
fn locate(sys: &ImpulsiveSystem, x: &Point, t_max: f64, record: bool) -> Result<(HitResult, Vec<(f64, Point)>)> {
    let field = &sys.system;
    if x.len() != field.dim() || !field.in_domain(x) {
        return Err(Error::Domain {
            system: field.kind.name().into(),
            point: x.iter().copied().collect(),
        });
    }
    if field.is_exact() {
        let mut found = None;
        let mut path = vec![(0.0, x.clone())];
        exact_crossings(field, x, t_max, |c| {
            if record {
                path.push((c.time, c.state.clone()));
            }
            if let Some(u) = sys.d.chart_inverse(&c.state) {
                found = Some((c.clone(), u));
                return Ok(true);
            }
            Ok(false)
        })?;
        let Some((c, u)) = found else {
            return Ok((HitResult::none(), path));
        };
        let hit = HitResult {
            tau1: c.time,
            hit_chart: Some(u),
            hit_point: Some(c.state.clone()),
            dtau1: Some(c.dtime.clone()),
            hit_jacobian: Some(c.jac.clone()),
            grazing: false,
        };
        let grazing = normalized_margin(sys, &c.state) < sys.opts.grazing_guard;
        return Ok((HitResult { grazing, ..hit }, path));
    }
    let (events, path) = scan_ode(field, &sys.d, x, t_max, sys.opts.integrator.step, true, record)?;
    let Some(ev) = events.into_iter().next() else {
        return Ok((HitResult::none(), path));
    };
    let y = ev.point;
    let v = field.field(&y);
    let gr = sys.d.grad_g(&y);
    let gv = gr.dot(&v);
    let grazing = normalized_margin(sys, &y) < sys.opts.grazing_guard;
    let (dtau, hj) = if gv != 0.0 {
        let dtau = -(gr.transpose() * &ev.jac).transpose() / gv;
        let hj = &ev.jac + &v * dtau.transpose();
        (Some(dtau), Some(hj))
    } else {
        (None, None)
    };
    let u = sys.d.chart_inverse(&y).unwrap();
    Ok((
        HitResult {
            tau1: ev.time,
            hit_chart: Some(u),
            hit_point: Some(y),
            dtau1: dtau,
            hit_jacobian: hj,
            grazing,
        },
        path,
    ))
}

/// `tau1(x)`: first positive time at which the orbit of `x` meets `D`.
pub fn first_hit(sys: &ImpulsiveSystem, x: &Point, t_max: f64) -> Result<HitResult> {
    let (hit, _) = locate(sys, x, t_max, false)?;
    hit_error_checks(sys, &hit)?;
    Ok(hit)
}

/// First hit from a `Dhat` chart point, before the impulse is applied.
pub fn hit_from_chart(sys: &ImpulsiveSystem, v: &Point) -> Result<HitResult> {
    let x = sys.dhat.chart_to_ambient(v)?;
    first_hit(sys, &x, sys.opts.horizon)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<(f64, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub n: usize,
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub arcs: Vec<Arc>,
    pub jumps: Vec<Jump>,
    pub end_time: f64,
    pub endpoint: Vec<f64>,
    /// The orbit stopped early because no further hit occurs.
    pub escaped: bool,
}

/// The impulsive orbit `gamma_x` on `[0, T]`.
pub fn trajectory(sys: &ImpulsiveSystem, x: &Point, horizon: f64) -> Result<Trajectory> {
    if horizon < 0.0 {
        return Err(Error::BadParams("trajectory horizon must be non-negative".into()));
    }
    let mut t = 0.0;
    let mut cur = x.clone();
    let mut arcs = Vec::new();
    let mut jumps = Vec::new();
    let wrap = |jump: usize| move |e: Error| Error::Trajectory { jump, source: Box::new(e) };
    loop {
        let remaining = horizon - t;
        let (hit, path) = locate(sys, &cur, remaining + EVENT_TOL, true).map_err(wrap(jumps.len()))?;
        if hit.is_finite() {
            hit_error_checks(sys, &hit).map_err(wrap(jumps.len()))?;
            let u = hit.hit_chart.unwrap();
            let post = sys.impulse.apply(&u).map_err(wrap(jumps.len()))?;
            arcs.push(arc_from(t, t + hit.tau1, &path));
            t += hit.tau1;
            jumps.push(Jump {
                n: jumps.len() + 1,
                time: t,
                pre: u.iter().copied().collect(),
                post: post.iter().copied().collect(),
            });
            cur = sys.dhat.chart_to_ambient(&post).map_err(wrap(jumps.len()))?;
            if t >= horizon {
                return Ok(Trajectory {
                    arcs,
                    jumps,
                    end_time: t,
                    endpoint: cur.iter().copied().collect(),
                    escaped: false,
                });
            }
            continue;
        }
        let rest = flow::flow(&sys.system, &cur, remaining, &sys.opts.integrator).map_err(wrap(jumps.len()))?;
        arcs.push(arc_from(t, horizon, &rest.path));
        // a hit beyond the horizon is not an escape; an infinite tau1 within the horizon scan is
        let escaped = {
            let (far, _) = locate(sys, &rest.endpoint, sys.opts.horizon, false).map_err(wrap(jumps.len()))?;
            !far.is_finite()
        };
        return Ok(Trajectory {
            arcs,
            jumps,
            end_time: horizon,
            endpoint: rest.endpoint.iter().copied().collect(),
            escaped,
        });
    }
}

fn arc_from(t0: f64, t1: f64, path: &[(f64, Point)]) -> Arc {
    Arc {
        t0,
        t1,
        samples: path
            .iter()
            .map(|(s, p)| (t0 + s, p.iter().copied().collect()))
            .collect(),
    }
}

impl Trajectory {
    /// Rows `t, x_1..x_d, jump_flag`; the flag marks the pre-jump sample of each arc.
    pub fn to_csv(&self) -> String {
        let dim = self.endpoint.len();
        let mut out = String::from("t");
        for i in 1..=dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",jump\n");
        for (k, arc) in self.arcs.iter().enumerate() {
            let jumped = k < self.jumps.len();
            for (j, (t, p)) in arc.samples.iter().enumerate() {
                let flag = jumped && j + 1 == arc.samples.len();
                out.push_str(&format!("{t}"));
                for v in p {
                    out.push_str(&format!(",{v}"));
                }
                out.push_str(if flag { ",1\n" } else { ",0\n" });
            }
        }
        out
    }

    /// Rows `n, tau_n, pre chart, post chart`.
    pub fn jumps_csv(&self) -> String {
        let k = self.jumps.first().map(|j| j.pre.len()).unwrap_or(1);
        let mut out = String::from("n,tau");
        for i in 1..=k {
            out.push_str(&format!(",pre{i}"));
        }
        for i in 1..=k {
            out.push_str(&format!(",post{i}"));
        }
        out.push('\n');
        for j in &self.jumps {
            out.push_str(&format!("{},{}", j.n, j.time));
            for v in j.pre.iter().chain(&j.post) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `P_I(v)` and the flight time.
pub fn poincare(sys: &ImpulsiveSystem, v: &Point) -> Result<(Point, f64)> {
    let hit = hit_from_chart(sys, v)?;
    if !hit.is_finite() {
        return Err(Error::NoReturn {
            horizon: sys.opts.horizon,
        });
    }
    let u = hit.hit_chart.unwrap();
    Ok((sys.impulse.apply(&u)?, hit.tau1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnStep {
    pub image: Point,
    pub tau: f64,
    pub jacobian: Matrix,
    /// Pre-impulse hit in the `D` chart.
    pub hit: Point,
}

/// `P_I(v)` with `DP_I(v) = DI(u) . Dchart_D^{-1} . D(phi_tau) . Dchart_Dhat(v)`.
pub fn poincare_step(sys: &ImpulsiveSystem, v: &Point) -> Result<ReturnStep> {
    let hit = hit_from_chart(sys, v)?;
    if !hit.is_finite() {
        return Err(Error::NoReturn {
            horizon: sys.opts.horizon,
        });
    }
    let u = hit.hit_chart.unwrap();
    let hj = hit.hit_jacobian.ok_or(Error::GrazingHit {
        t: hit.tau1,
        margin: 0.0,
    })?;
    let linv = left_inverse(&sys.d.chart_jacobian(&u)).ok_or(Error::Singularity {
        section: sys.d.name.clone(),
    })?;
    let jac = sys.impulse.jacobian(&u)? * linv * hj * sys.dhat.chart_jacobian(v);
    Ok(ReturnStep {
        image: sys.impulse.apply(&u)?,
        tau: hit.tau1,
        jacobian: jac,
        hit: u,
    })
}

pub fn poincare_jacobian(sys: &ImpulsiveSystem, v: &Point) -> Result<Matrix> {
    Ok(poincare_step(sys, v)?.jacobian)
}

/// `d tau1 / d v` along the `Dhat` chart, restricted to its derivative axes.
pub fn chart_dtau1(sys: &ImpulsiveSystem, v: &Point) -> Result<Option<DVector<f64>>> {
    let hit = hit_from_chart(sys, v)?;
    let Some(dt) = hit.dtau1 else {
        return Ok(None);
    };
    let full = (dt.transpose() * sys.dhat.chart_jacobian(v)).transpose();
    Ok(Some(match &sys.dhat.derivative_axes {
        Some(axes) => DVector::from_iterator(axes.len(), axes.iter().map(|&i| full[i])),
        None => full,
    }))
}

fn tau1_sup_at(sys: &ImpulsiveSystem, n: usize) -> f64 {
    let mut worst = 0.0_f64;
    for v in sys.dhat.grid(n, sys.dhat.boundary_margin) {
        if let Ok(Some(d)) = chart_dtau1(sys, &v) {
            worst = worst.max(d.norm());
        }
    }
    worst
}

/// `sup |d tau1/dx|` over `Dhat`; `+inf` when the estimate keeps doubling
/// under two successive grid refinements (or is numerically unbounded).
pub fn tau1_derivative_sup(sys: &ImpulsiveSystem, grid_res: usize) -> f64 {
    let n = grid_res.max(2);
    let m1 = tau1_sup_at(sys, n);
    let m2 = tau1_sup_at(sys, 2 * n);
    let m3 = tau1_sup_at(sys, 4 * n);
    let unbounded = [m1, m2, m3].iter().any(|m| !m.is_finite() || *m > 1e12);
    if unbounded || (m1 > 0.0 && m2 >= 2.0 * m1 && m3 >= 2.0 * m2) {
        f64::INFINITY
    } else {
        m1.max(m2).max(m3)
    }
}

/// Holonomy `S1 -> S2`: the unique `theta` in `[-r, r]` with `phi_theta(x) in S2`.
/// Exact suspension models flow forward only, so the search there covers `[0, r]`.
pub fn holonomy(
    system: &SystemField,
    s1: &CrossSection,
    s2: &CrossSection,
    x: &Point,
    r: f64,
    opts: &IntegratorOpts,
) -> Result<(Point, f64)> {
    let start = s1.chart_to_ambient(x)?;
    let mut found: Vec<(f64, Point)> = Vec::new();
    if s2.event_g(&start).abs() < 1e-12 {
        if let Some(u) = s2.chart_inverse(&start) {
            found.push((0.0, u));
        }
    }
    if system.is_exact() {
        exact_crossings(system, &start, r, |c| {
            if let Some(u) = s2.chart_inverse(&c.state) {
                found.push((c.time, u));
            }
            Ok(false)
        })?;
    } else {
        for dir in [1.0, -1.0] {
            let (events, _) = scan_ode(system, s2, &start, dir * r, opts.step, false, false)?;
            for e in events {
                if e.time.abs() > 1e-12 || found.is_empty() {
                    found.push((e.time, s2.chart_inverse(&e.point).unwrap()));
                }
            }
        }
    }
    match found.len() {
        0 => Err(Error::NoCrossing { bound: r }),
        1 => {
            let (t, u) = found.pop().unwrap();
            Ok((u, t))
        }
        count => Err(Error::MultipleCrossings { count, bound: r }),
    }
}

fn min_ambient_distance(system: &SystemField, a: &[Point], b: &[Point]) -> f64 {
    let periodic = system.periodic_axes();
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let mut d2 = 0.0;
            for i in 0..p.len() {
                let mut d = p[i] - q[i];
                if periodic.contains(&i) {
                    d = crate::linalg::wrap_pi(d);
                }
                d2 += d * d;
            }
            best = best.min(d2);
        }
    }
    best.sqrt()
}

fn validate_system(sys: &ImpulsiveSystem) -> ValidationReport {
    let d = &sys.d;
    let n = if d.chart_dim() == 1 { 2001 } else { 41 };
    let src_chart = d.grid(n, 0.0);
    let src: Vec<Point> = src_chart
        .iter()
        .filter_map(|u| d.chart_to_ambient(u).ok())
        .collect();
    let img: Vec<Point> = src_chart
        .iter()
        .filter_map(|u| sys.impulse.apply(u).ok())
        .filter_map(|v| sys.dhat.chart_to_ambient(&sys.dhat.wrap(&v)).ok())
        .collect();
    let gap = min_ambient_distance(&sys.system, &src, &img);
    let landing_transversal = sys
        .dhat
        .transversality_margin(&sys.system)
        .map(|m| m >= sys.opts.grazing_guard)
        .unwrap_or(false);
    let sup = tau1_derivative_sup(sys, 21);
    let tau1_sup_bound = sup.is_finite().then_some(sup);
    ValidationReport {
        hausdorff_gap: gap,
        landing_transversal,
        tau1_sup_bound,
        verdict: gap > 1e-9 && landing_transversal && tau1_sup_bound.is_some(),
    }
}

/// Admissibility report for `impulse` on `system`.
pub fn validate(impulse: &Impulse, system: &SystemField) -> ValidationReport {
    validate_system(&ImpulsiveSystem::assemble(system.clone(), impulse.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_example, make_example, predator_prey_period_oracle};
    use crate::linalg::point;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn example(name: &str) -> ImpulsiveSystem {
        default_example(name).unwrap().build().unwrap()
    }

    fn with(name: &str, key: &str, v: f64) -> ImpulsiveSystem {
        let mut p = BTreeMap::new();
        p.insert(key.to_string(), v);
        make_example(name, &p).unwrap().build().unwrap()
    }

    #[test]
    fn first_hit_examples() {
        let an = example("annulus");
        let h = first_hit(&an, &point(&[-1.0, 0.0]), 10.0).unwrap();
        assert!((h.tau1 - PI).abs() < 1e-10);
        assert!((h.hit_chart.unwrap()[0] - 1.0).abs() < 1e-10);
        let rd = example("radial_disk");
        let h = first_hit(&rd, &point(&[1.5, 0.0]), 10.0).unwrap();
        assert!((h.tau1 - 1.5f64.ln()).abs() < 1e-10);
        let pp = example("predator_prey");
        let h = first_hit(&pp, &point(&[0.5, 0.0]), 10.0).unwrap();
        assert!((h.tau1 - predator_prey_period_oracle()).abs() < 1e-9);
        assert!(h.hit_chart.unwrap()[0].abs() < 1e-12);
        // beyond the horizon: +inf marker
        let h = first_hit(&an, &point(&[-1.0, 0.0]), 1.0).unwrap();
        assert!(!h.is_finite());
    }

    #[test]
    fn trajectory_examples() {
        let an = example("annulus");
        let tr = trajectory(&an, &point(&[-1.0, 0.0]), 3.0 * PI).unwrap();
        assert_eq!(tr.jumps.len(), 3);
        for (k, j) in tr.jumps.iter().enumerate() {
            assert!((j.time - PI * (k + 1) as f64).abs() < 1e-9);
            assert!((j.post[0] - 1.0).abs() < 1e-12);
        }
        let pp = example("predator_prey");
        let tr = trajectory(&pp, &point(&[2.0, 1.0]), 10.0).unwrap();
        assert!(tr.jumps.is_empty());
        let rd = example("radial_disk");
        let tr = trajectory(&rd, &point(&[0.0, 1.5]), 3.0 * 1.5f64.ln()).unwrap();
        assert_eq!(tr.jumps.len(), 3);
        for w in tr.jumps.windows(2) {
            assert!((w[1].time - w[0].time - 1.5f64.ln()).abs() < 1e-9);
        }
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x1,x2,jump\n"));
        assert_eq!(tr.jumps_csv().lines().count(), 4);
    }

    #[test]
    fn semiflow_law() {
        let pp = example("predator_prey");
        let x = point(&[0.5, 0.6]);
        let (s, t) = (0.7, 1.3);
        let whole = trajectory(&pp, &x, s + t).unwrap();
        let first = trajectory(&pp, &x, s).unwrap();
        assert!(first.jumps.iter().all(|j| (j.time - s).abs() > 1e-6));
        let second = trajectory(&pp, &point(&first.endpoint), t).unwrap();
        let d: f64 = whole
            .endpoint
            .iter()
            .zip(&second.endpoint)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn poincare_examples() {
        let an = example("annulus");
        for rho in [1.1, 1.25, 1.4] {
            let (v, tau) = poincare(&an, &point(&[rho])).unwrap();
            assert!((v[0] - (1.0 + rho) / 2.0).abs() < 1e-10);
            assert!((tau - PI).abs() < 1e-10);
            assert!((poincare_jacobian(&an, &point(&[rho])).unwrap()[(0, 0)] - 0.5).abs() < 1e-9);
        }
        let rd = example("radial_disk");
        let (v, _) = poincare(&rd, &point(&[0.7])).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-10);
        assert!((poincare_jacobian(&rd, &point(&[0.7])).unwrap()[(0, 0)] - 1.0).abs() < 1e-9);
        let bi = example("disk_billiard");
        let th = PI / 4.0;
        let hit = hit_from_chart(&bi, &point(&[PI, th])).unwrap();
        // two chords of rotation pi/2 each, landing on x = 2 pi = 0
        assert!((hit.tau1 - 4.0 * th.cos()).abs() < 1e-12);
        assert!(hit.hit_chart.unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn billiard_jacobian_matches_differences() {
        let bi = example("disk_billiard");
        let v = point(&[PI + 0.1, 0.37]);
        let j = poincare_jacobian(&bi, &v).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut a = v.clone();
            let mut b = v.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (poincare(&bi, &a).unwrap().0 - poincare(&bi, &b).unwrap().0) / (2.0 * h);
            for i in 0..2 {
                assert!((fd[i] - j[(i, k)]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn tau1_sup_dichotomy() {
        assert!(tau1_derivative_sup(&example("annulus"), 11) < 1e-8);
        assert!(tau1_derivative_sup(&example("disk_billiard"), 11) < 1e-8);
        assert!(tau1_derivative_sup(&example("lorenz_skew"), 11).is_finite());
        let swapped = with("lorenz_skew", "interchanged", 1.0);
        assert_eq!(tau1_derivative_sup(&swapped, 11), f64::INFINITY);
        assert!(!swapped.validation.verdict);
        assert_eq!(swapped.validation.tau1_sup_bound, None);
    }

    #[test]
    fn validation_examples() {
        let an = example("annulus");
        assert!(an.validation.verdict);
        assert!((an.validation.hausdorff_gap - 2.0).abs() < 1e-9);
        let flat = with("radial_disk", "delta", 0.0);
        assert_eq!(flat.validation.hausdorff_gap, 0.0);
        assert!(!flat.validation.verdict);
        let spec = make_example("radial_disk", &[("delta".to_string(), 0.0)].into()).unwrap();
        assert!(ImpulsiveSystem::new(spec.system, spec.impulse).is_err());
    }

    #[test]
    fn holonomy_examples() {
        let an = example("annulus");
        let opts = IntegratorOpts::default();
        let (y, t) = holonomy(&an.system, &an.d, &an.d, &point(&[1.5]), 1.0, &opts).unwrap();
        assert_eq!(t, 0.0);
        assert!((y[0] - 1.5).abs() < 1e-15);
        let a: f64 = 0.4;
        let rotated = CrossSection::new(
            "S2",
            crate::sections::SectionGeometry::Line {
                origin: [0.0, 0.0],
                direction: [a.cos(), a.sin()],
            },
            vec![[1.0, 2.0]],
        );
        let (y, t) = holonomy(&an.system, &an.d, &rotated, &point(&[1.5]), 1.0, &opts).unwrap();
        assert!((t - a).abs() < 1e-10);
        assert!((y[0] - 1.5).abs() < 1e-10);
        assert!(matches!(
            holonomy(&an.system, &an.d, &rotated, &point(&[1.5]), 0.3, &opts),
            Err(Error::NoCrossing { .. })
        ));
        assert!(matches!(
            holonomy(&an.system, &an.d, &rotated, &point(&[1.5]), 6.0, &opts),
            Err(Error::MultipleCrossings { .. })
        ));
    }
}
