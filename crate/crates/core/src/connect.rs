//! Closing engine: pseudo-orbits from the cell graph are turned into genuine
//! periodic orbits by stacking disjoint translation bumps on the impulse,
//! then hyperbolized with a linear bump.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{build_graph, chain_reaches, chain_recurrent_cells, PseudoOrbitGraph};
use crate::impulse::{c1_distance, Bump, BumpKind, Impulse, DEFAULT_LAMBDA, PROFILE_SLOPE};
use crate::linalg::Point;
use crate::periodic::{find_periodic, make_hyperbolic, OrbitTag, PeriodicOrbit, DEFAULT_TOL};
use crate::semiflow::{poincare, trajectory, ImpulsiveSystem};
use crate::{Error, Result};

/// Gaps below this are already closed by the flow itself.
const GAP_TOL: f64 = 1e-10;
const MAX_REROUTES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosingParams {
    pub lambda: f64,
    /// Fraction of the budget reserved for closing; the rest hyperbolizes.
    pub closing_share: f64,
    pub max_halvings: usize,
    pub attempts: usize,
    pub seed: u64,
    pub verify_tol: f64,
    /// Periods tried when looking for an orbit that is already there.
    pub existing_returns: usize,
}

impl Default for ClosingParams {
    fn default() -> Self {
        ClosingParams {
            lambda: DEFAULT_LAMBDA,
            closing_share: 0.5,
            max_halvings: 4,
            attempts: 8,
            seed: 0,
            verify_tol: 1e-6,
            existing_returns: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedJump {
    pub index: usize,
    pub gap: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosingPlan {
    pub pseudo_orbit: Vec<Vec<f64>>,
    pub jumps: Vec<PlannedJump>,
    pub budget: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

fn failure(kind: &str, detail: impl Into<String>) -> Error {
    Error::Closing {
        kind: kind.into(),
        detail: detail.into(),
    }
}

fn graph_distance(graph: &PseudoOrbitGraph, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut d = (x - y).abs();
            if graph.periodic[i] {
                let period = graph.cell_width[i] * graph.counts[i] as f64;
                d = d.rem_euclid(period);
                d = d.min(period - d);
            }
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn bfs_path(graph: &PseudoOrbitGraph, a: usize, b: usize, banned: &BTreeSet<usize>) -> Option<Vec<usize>> {
    let n = graph.len();
    let mut prev = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    // a == b asks for a cycle: seed with the successors of a
    for &c in &graph.edges[a] {
        if (c == b || !banned.contains(&c)) && prev[c] == usize::MAX {
            prev[c] = a;
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        if c == b {
            let mut path = vec![b];
            let mut cur = b;
            loop {
                cur = prev[cur];
                path.push(cur);
                if cur == a {
                    break;
                }
            }
            path.reverse();
            return Some(path);
        }
        for &nx in &graph.edges[c] {
            if prev[nx] == usize::MAX && (nx == b || !banned.contains(&nx)) {
                prev[nx] = c;
                queue.push_back(nx);
            }
        }
    }
    None
}

/// Shortest cell path from `a` to `b` (a cycle when `a == b`) whose jump
/// locations, the images of the cells left behind, are pairwise at least
/// `separation` apart.
pub fn find_cell_path(graph: &PseudoOrbitGraph, a: usize, b: usize, separation: f64) -> Result<Vec<usize>> {
    let not_found = |why: &str| Error::NotFound {
        reason: format!("pseudo-orbit from cell {a} to cell {b}: {why}"),
    };
    let mut banned = BTreeSet::new();
    for _ in 0..MAX_REROUTES {
        let path = bfs_path(graph, a, b, &banned).ok_or_else(|| not_found("no chain at this resolution"))?;
        let images: Vec<Option<&Vec<f64>>> = path[..path.len() - 1]
            .iter()
            .map(|&c| match &graph.images[c] {
                crate::chains::CellImage::Point(p) => Some(p),
                _ => None,
            })
            .collect();
        let mut clash = None;
        'outer: for i in 0..images.len() {
            for j in i + 1..images.len() {
                if let (Some(p), Some(q)) = (images[i], images[j]) {
                    if graph_distance(graph, p, q) < separation {
                        clash = Some(path[j]);
                        break 'outer;
                    }
                }
            }
        }
        match clash {
            None => return Ok(path),
            Some(c) if c == a || c == b => return Err(not_found("jump locations cannot be separated")),
            Some(c) => {
                banned.insert(c);
            }
        }
    }
    Err(not_found("rerouting budget exhausted"))
}

/// Cell-centre pseudo-orbit `z_0..z_n` from cell `a` to cell `b`.
pub fn find_pseudo_orbit(graph: &PseudoOrbitGraph, a: usize, b: usize, separation: f64) -> Result<Vec<Point>> {
    Ok(find_cell_path(graph, a, b, separation)?
        .into_iter()
        .map(|c| graph.center(c))
        .collect())
}

/// Plan translation bumps moving `P(z_k)` onto `z_{k+1}` with pairwise
/// disjoint supports that miss every other landing point.
pub fn plan_closing(sys: &ImpulsiveSystem, zs: &[Point], eps: f64, lambda: f64) -> ClosingPlan {
    let mut plan = ClosingPlan {
        pseudo_orbit: zs.iter().map(|z| z.iter().copied().collect()).collect(),
        jumps: Vec::new(),
        budget: eps,
        feasible: false,
        reason: None,
    };
    let dhat = &sys.dhat;
    let mut landings = Vec::with_capacity(zs.len().saturating_sub(1));
    for (k, z) in zs[..zs.len().saturating_sub(1)].iter().enumerate() {
        match poincare(sys, z) {
            Ok((p, _)) => landings.push(p),
            Err(e) => {
                plan.reason = Some(format!("verification: step {k} of the pseudo-orbit does not return ({e})"));
                return plan;
            }
        }
    }
    let mut gaps = Vec::new();
    for (k, p) in landings.iter().enumerate() {
        let d = dhat.diff(&zs[k + 1], p);
        if d.norm() > GAP_TOL {
            gaps.push((k, d));
        }
    }
    if gaps.is_empty() {
        plan.feasible = true;
        return plan;
    }
    if eps <= 0.0 {
        plan.reason = Some("budget: no C1 budget for a nonzero jump".into());
        return plan;
    }
    // supports are kept disjoint, so each bump may use the whole budget
    let share = 0.999 * eps;
    let dsup = sys.impulse.jacobian_sup_bound();
    for (k, d) in &gaps {
        let len = d.norm();
        if len * dsup > share {
            plan.reason = Some(format!("budget: jump {k} of size {len:e} exceeds the per-bump share {share:e}"));
            return plan;
        }
        let radius = (lambda * len).max(PROFILE_SLOPE * dsup * len / share);
        plan.jumps.push(PlannedJump {
            index: *k,
            gap: d.iter().copied().collect(),
            center: landings[*k].iter().copied().collect(),
            radius,
        });
    }
    for jump in &plan.jumps {
        let c = Point::from_column_slice(&jump.center);
        for i in 0..c.len() {
            let fits = if dhat.periodic.get(i).copied().unwrap_or(false) {
                jump.radius < std::f64::consts::PI
            } else {
                let [lo, hi] = dhat.chart_box[i];
                c[i] - jump.radius >= lo && c[i] + jump.radius <= hi
            };
            if !fits {
                plan.reason = Some(format!("supports: the ball around jump {} leaves the chart", jump.index));
                return plan;
            }
        }
        for (j, p) in landings.iter().enumerate() {
            if j == jump.index {
                continue;
            }
            let other = plan.jumps.iter().find(|o| o.index == j).map(|o| o.radius).unwrap_or(0.0);
            if dhat.chart_distance(&c, p) <= jump.radius + other {
                plan.reason = Some(format!("supports: jump {} meets landing {j}", jump.index));
                return plan;
            }
        }
    }
    plan.feasible = true;
    plan
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Closure {
    pub impulse: Impulse,
    pub plan: ClosingPlan,
    pub delta: f64,
    pub c1_cost: f64,
}

fn apply_plan(sys: &ImpulsiveSystem, plan: &ClosingPlan) -> Result<Impulse> {
    let bumps = plan
        .jumps
        .iter()
        .map(|jump| Bump {
            kind: BumpKind::Translate,
            center: jump.center.clone(),
            radius: jump.radius,
            payload: jump.gap.clone(),
        })
        .collect();
    let j = sys
        .impulse
        .with_bumps(bumps, plan.budget)
        .map_err(|e| failure("budget", e.to_string()))?;
    let cost = c1_distance(&sys.impulse, &j)?;
    if cost > plan.budget {
        return Err(failure("budget", format!("stacked bound {cost:e} over budget {:e}", plan.budget)));
    }
    Ok(j)
}

/// Pseudo-orbit `z_{k+1} = P(z_k) + g` with the same gap `g` at every step,
/// tuned so that `z_n = y`; `None` when the gap would exceed `limit`.
fn spread_pseudo_orbit(sys: &ImpulsiveSystem, x: &Point, y: &Point, n: usize, limit: f64) -> Option<Vec<Point>> {
    let dhat = &sys.dhat;
    let run = |g: &Point| -> Option<Vec<Point>> {
        let mut zs = vec![x.clone()];
        for k in 1..=n {
            let (img, _) = poincare(sys, &zs[k - 1]).ok()?;
            let z = dhat.wrap(&(img + g));
            if !dhat.contains(&z) {
                return None;
            }
            zs.push(z);
        }
        Some(zs)
    };
    let mut g = Point::zeros(x.len());
    for _ in 0..50 {
        let zs = run(&g)?;
        let miss = dhat.diff(y, &zs[n]);
        if miss.norm() < 1e-12 {
            let mut zs = zs;
            zs[n] = y.clone();
            return (g.norm() <= limit).then_some(zs);
        }
        g += miss / n as f64;
    }
    None
}

/// Nearest point of cell `c` to `p`.
fn project_to_cell(sys: &ImpulsiveSystem, graph: &PseudoOrbitGraph, p: &Point, c: usize) -> Point {
    let center = graph.center(c);
    let d = sys.dhat.diff(p, &center);
    let clamped = Point::from_iterator(
        d.len(),
        d.iter().zip(&graph.cell_width).map(|(v, w)| v.clamp(-0.5 * w, 0.5 * w)),
    );
    sys.dhat.wrap(&(center + clamped))
}

fn iterate(sys: &ImpulsiveSystem, x: &Point, n: usize) -> Result<Point> {
    let mut z = x.clone();
    for _ in 0..n {
        z = poincare(sys, &z)?.0;
    }
    Ok(z)
}

fn close_in_graph(
    sys: &ImpulsiveSystem,
    graph: &PseudoOrbitGraph,
    x: &Point,
    y: &Point,
    eps: f64,
    params: &ClosingParams,
) -> Result<Closure> {
    let cell = |p: &Point| {
        graph
            .cell_of(p.as_slice())
            .ok_or_else(|| failure("supports", format!("point {:?} outside the landing chart", p.as_slice())))
    };
    let (a, b) = (cell(x)?, cell(y)?);
    if !chain_reaches(graph, a, b) {
        return Err(Error::NotFound {
            reason: format!("no chain from cell {a} to cell {b} at delta {}", graph.delta),
        });
    }
    let path = find_cell_path(graph, a, b, graph.delta)?;
    let n = path.len() - 1;
    let limit = graph.delta + graph.resolution;
    if let Some(zs) = spread_pseudo_orbit(sys, x, y, n, limit) {
        let plan = plan_closing(sys, &zs, eps, params.lambda);
        if plan.feasible {
            return apply_and_verify(sys, graph, x, y, n, plan, params);
        }
    }
    // shadow the true orbit, stepping only as far as needed to stay on the path
    let mut zs = vec![x.clone()];
    for &c in &path[1..n] {
        let prev = zs.last().unwrap();
        let next = match poincare(sys, prev) {
            Ok((img, _)) => project_to_cell(sys, graph, &img, c),
            Err(_) => graph.center(c),
        };
        zs.push(next);
    }
    zs.push(y.clone());
    let plan = plan_closing(sys, &zs, eps, params.lambda);
    if !plan.feasible {
        let reason = plan.reason.clone().unwrap_or_default();
        let kind = reason.split(':').next().unwrap_or("supports").to_string();
        return Err(failure(&kind, reason));
    }
    apply_and_verify(sys, graph, x, y, n, plan, params)
}

fn apply_and_verify(
    sys: &ImpulsiveSystem,
    graph: &PseudoOrbitGraph,
    x: &Point,
    y: &Point,
    n: usize,
    plan: ClosingPlan,
    params: &ClosingParams,
) -> Result<Closure> {
    let dhat = &sys.dhat;
    let j = apply_plan(sys, &plan)?;
    let perturbed = sys.with_impulse(j.clone())?;
    let end = iterate(&perturbed, x, n).map_err(|e| failure("verification", e.to_string()))?;
    let miss = dhat.chart_distance(&end, y);
    if miss > params.verify_tol {
        return Err(failure("verification", format!("perturbed orbit misses the target by {miss:e}")));
    }
    Ok(Closure {
        c1_cost: c1_distance(&sys.impulse, &j)?,
        impulse: j,
        plan,
        delta: graph.delta,
    })
}

/// Perturb the impulse within `eps` so that the orbit of `x` reaches `y`.
pub fn close_orbit(
    sys: &ImpulsiveSystem,
    x: &Point,
    y: &Point,
    eps: f64,
    delta0: f64,
    params: &ClosingParams,
) -> Result<Closure> {
    if sys.dhat.chart_distance(x, y) < GAP_TOL {
        for n in 1..=params.existing_returns {
            if let Ok(z) = iterate(sys, x, n) {
                if sys.dhat.chart_distance(&z, y) <= params.verify_tol {
                    return Ok(Closure {
                        impulse: sys.impulse.clone(),
                        plan: ClosingPlan {
                            pseudo_orbit: vec![x.iter().copied().collect(), y.iter().copied().collect()],
                            jumps: vec![],
                            budget: eps,
                            feasible: true,
                            reason: None,
                        },
                        delta: delta0,
                        c1_cost: 0.0,
                    });
                }
            }
        }
    }
    let mut last: Option<Error> = None;
    let mut delta = delta0;
    for _ in 0..=params.max_halvings {
        let graph = build_graph(sys, delta, delta);
        match close_in_graph(sys, &graph, x, y, eps, params) {
            Ok(c) => return Ok(c),
            // a missing chain at a finer scale says less than an earlier concrete failure
            Err(e) => {
                if last.is_none() || !matches!(e, Error::NotFound { .. }) {
                    last = Some(e);
                }
            }
        }
        delta *= 0.5;
    }
    Err(last.unwrap_or_else(|| failure("supports", "no attempt made")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicClosure {
    pub impulse: Impulse,
    pub orbit: PeriodicOrbit,
    pub bump_count: usize,
    pub c1_cost: f64,
    /// Chart distance from the requested point to the nearest orbit point.
    pub distance: f64,
}

fn nearest(sys: &ImpulsiveSystem, orbit: &PeriodicOrbit, q: &Point) -> f64 {
    orbit
        .points
        .iter()
        .map(|p| sys.dhat.chart_distance(&Point::from_column_slice(p), q))
        .fold(f64::INFINITY, f64::min)
}

/// Re-run the orbit as a trajectory of the semiflow and compare the last jump with the start.
pub fn verify_by_simulation(sys: &ImpulsiveSystem, orbit: &PeriodicOrbit, tol: f64) -> Result<bool> {
    let x = sys.dhat.chart_to_ambient(&orbit.point(0))?;

    let horizon = orbit.period * (1.0 + 1e-9) + 1e-9;
    let tr = trajectory(sys, &x, horizon)?;
    let n = orbit.len();
    if tr.jumps.len() < n {
        return Ok(false);
    }
    let post = Point::from_column_slice(&tr.jumps[n - 1].post);
    Ok(sys.dhat.chart_distance(&post, &orbit.point(0)) <= tol)
}

fn closing_search(
    sys: &ImpulsiveSystem,
    graph: &PseudoOrbitGraph,
    q: &Point,
    eps: f64,
    params: &ClosingParams,
) -> Result<PeriodicClosure> {
    let reach = graph.resolution + graph.delta;
    // an orbit that is already there costs nothing
    for n in 1..=params.existing_returns {
        if let Ok(o) = find_periodic(sys, q, n, DEFAULT_TOL) {
            if o.tag == OrbitTag::Hyperbolic && o.len() == n && nearest(sys, &o, q) <= reach {
                return finish(sys, sys.impulse.clone(), o, q, eps, params);
            }
        }
    }
    let closing_eps = eps * params.closing_share;
    let closure = close_in_graph(sys, graph, q, q, closing_eps, params)?;
    let n = closure.plan.pseudo_orbit.len() - 1;
    let closed = sys.with_impulse(closure.impulse.clone())?;
    let orbit = find_periodic(&closed, q, n.max(1), DEFAULT_TOL)?;
    let remaining = eps - closure.c1_cost;
    let (j, orbit) = make_hyperbolic(&closed, &orbit, remaining.min(eps * (1.0 - params.closing_share)), params.attempts, params.seed)?;
    finish(sys, j, orbit, q, eps, params)
}

fn finish(
    sys: &ImpulsiveSystem,
    j: Impulse,
    orbit: PeriodicOrbit,
    q: &Point,
    eps: f64,
    params: &ClosingParams,
) -> Result<PeriodicClosure> {
    let cost = c1_distance(&sys.impulse, &j)?;
    if cost > eps {
        return Err(failure("budget", format!("total cost {cost:e} over budget {eps:e}")));
    }
    if !j.bumps.is_empty() {
        let sampled = sys.impulse.sampled_c1_distance(&j)?;
        if sampled > 1.05 * eps {
            return Err(failure("budget", format!("sampled cost {sampled:e} over budget {eps:e}")));
        }
    }
    let perturbed = sys.with_impulse(j.clone())?;
    if !verify_by_simulation(&perturbed, &orbit, params.verify_tol)? {
        return Err(failure("verification", "simulated orbit does not close"));
    }
    Ok(PeriodicClosure {
        bump_count: j.bumps.len() - sys.impulse.bumps.len(),
        distance: nearest(sys, &orbit, q),
        impulse: j,
        orbit,
        c1_cost: cost,
    })
}

/// Hyperbolic periodic orbit within `h + delta` of `q` for an impulse `eps`-close to `I`.
pub fn close_to_periodic(
    sys: &ImpulsiveSystem,
    q: &Point,
    eps: f64,
    h: f64,
    delta: f64,
    params: &ClosingParams,
) -> Result<PeriodicClosure> {
    let graph = build_graph(sys, h, delta);
    let cell = graph
        .cell_of(q.as_slice())
        .ok_or_else(|| failure("supports", "point outside the landing chart"))?;
    if !chain_reaches(&graph, cell, cell) {
        return Err(Error::NotFound {
            reason: format!("cell {cell} is not chain recurrent"),
        });
    }
    closing_search(sys, &graph, q, eps, params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: usize,
    pub status: String,
    pub bump_count: usize,
    pub c1_cost: f64,
    pub orbit_period: Option<f64>,
    pub multipliers: Vec<(f64, f64)>,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub eps: f64,
    pub h: f64,
    pub delta: f64,
    pub cells_total: usize,
    pub recurrent_cells: usize,
    pub tested: usize,
    pub successes: usize,
    pub fraction: f64,
    pub failures: BTreeMap<String, usize>,
    pub cells: Vec<CellRecord>,
}

/// Name of the failure class an error belongs to.
pub fn failure_kind(e: &Error) -> String {
    match e {
        Error::Closing { kind, .. } => kind.clone(),
        Error::NotFound { .. } => "not_found".into(),
        Error::SingularJacobian { .. } => "singular".into(),
        Error::HyperbolizationFailed { .. } => "hyperbolization".into(),
        Error::NoReturn { .. } => "no_return".into(),
        Error::GrazingHit { .. } => "grazing".into(),
        Error::BoundaryHit { .. } => "boundary".into(),
        Error::BudgetExceeded { .. } => "budget".into(),
        Error::SupportOutsideChart { .. } => "supports".into(),
        Error::Domain { .. } => "domain".into(),
        Error::Trajectory { source, .. } => failure_kind(source),
        _ => "other".into(),
    }
}

/// Fraction of chain-recurrent cells near which closing yields a hyperbolic
/// periodic point, with every failure classified.
pub fn density_experiment(
    sys: &ImpulsiveSystem,
    eps: f64,
    h: f64,
    delta: f64,
    max_cells: Option<usize>,
    params: &ClosingParams,
) -> DensityReport {
    let graph = build_graph(sys, h, delta);
    let rec = chain_recurrent_cells(&graph);
    let sample: Vec<usize> = match max_cells {
        Some(m) if m > 0 && rec.len() > m => {
            let stride = rec.len() as f64 / m as f64;
            (0..m).map(|i| rec[(i as f64 * stride) as usize]).collect()
        }
        _ => rec.clone(),
    };
    let cells: Vec<CellRecord> = sample
        .par_iter()
        .map(|&c| {
            let q = graph.center(c);
            let mut p = params.clone();
            p.seed = params.seed.wrapping_add(c as u64);
            match closing_search(sys, &graph, &q, eps, &p) {
                Ok(pc) => CellRecord {
                    cell_id: c,
                    status: "success".into(),
                    bump_count: pc.bump_count,
                    c1_cost: pc.c1_cost,
                    orbit_period: Some(pc.orbit.period),
                    multipliers: pc.orbit.multipliers.clone(),
                    detail: None,
                },
                Err(e) => CellRecord {
                    cell_id: c,
                    status: failure_kind(&e),
                    bump_count: 0,
                    c1_cost: 0.0,
                    orbit_period: None,
                    multipliers: vec![],
                    detail: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut failures = BTreeMap::new();
    for c in cells.iter().filter(|c| c.status != "success") {
        *failures.entry(c.status.clone()).or_insert(0) += 1;
    }
    let successes = cells.iter().filter(|c| c.status == "success").count();
    DensityReport {
        eps,
        h,
        delta,
        cells_total: graph.len(),
        recurrent_cells: rec.len(),
        tested: cells.len(),
        successes,
        fraction: if cells.is_empty() { 0.0 } else { successes as f64 / cells.len() as f64 },
        failures,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_example, make_example};
    use crate::linalg::point;
    use std::collections::BTreeMap;

    fn example(name: &str) -> ImpulsiveSystem {
        default_example(name).unwrap().build().unwrap()
    }

    #[test]
    fn pseudo_orbits() {
        let an = example("annulus");
        let g = build_graph(&an, 0.01, 0.01);
        let fixed = g.cell_of(&[1.001]).unwrap();
        let loop_ = find_pseudo_orbit(&g, fixed, fixed, 0.0).unwrap();
        assert_eq!(loop_.len(), 2);
        let far = g.cell_of(&[1.45]).unwrap();
        let path = find_pseudo_orbit(&g, far, fixed, 0.0).unwrap();
        // contraction by 1/2 from distance 0.45 down to a cell
        let expected = (0.45f64 / 0.01).log2().ceil() as usize;
        assert!((path.len() as i64 - 1 - expected as i64).abs() <= 2, "{}", path.len());
        assert!(matches!(find_pseudo_orbit(&g, far, fixed, 10.0), Err(Error::NotFound { .. })));
    }

    #[test]
    fn closing_annulus() {
        let an = example("annulus");
        let params = ClosingParams::default();
        let q = point(&[1.0]);
        let pc = close_to_periodic(&an, &point(&[1.004]), 0.1, 0.01, 0.01, &params).unwrap();
        assert_eq!(pc.bump_count, 0);
        assert!((pc.orbit.point(0) - &q).norm() < 1e-8);
        let none = close_orbit(&an, &point(&[1.3]), &point(&[1.16]), 0.0, 0.01, &params);
        assert!(matches!(none, Err(Error::Closing { ref kind, .. }) if kind == "budget"), "{none:?}");
    }

    #[test]
    fn closing_radial() {
        let rd = example("radial_disk");
        let params = ClosingParams::default();
        let pc = close_to_periodic(&rd, &point(&[0.3]), 0.1, 0.1, 0.05, &params).unwrap();
        assert_eq!(pc.orbit.tag, OrbitTag::Hyperbolic);
        assert!(pc.c1_cost <= 0.1);
        assert!(pc.distance <= 0.15);
        let rep = density_experiment(&rd, 0.1, 0.2, 0.1, None, &params);
        assert!(rep.fraction >= 0.95, "{:?}", rep.failures);
    }

    #[test]
    fn closing_torus() {
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), std::f64::consts::SQRT_2 - 1.0);
        let to = make_example("torus_linear", &p).unwrap().build().unwrap();
        let params = ClosingParams {
            max_halvings: 0,
            ..ClosingParams::default()
        };
        let c = close_orbit(&to, &point(&[1.0]), &point(&[4.0]), 0.1, 1e-3, &params).unwrap();
        assert!(c.c1_cost <= 0.1);
        assert!(!c.plan.jumps.is_empty());
    }
}
