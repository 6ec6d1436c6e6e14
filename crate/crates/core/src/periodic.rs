//! Periodic orbits of the impulsive semiflow as fixed points of `P^N`:
//! search, hyperbolicity, continuation under impulse perturbation,
//! Franks-type hyperbolization and a finite Kupka-Smale audit.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impulse::{Impulse, LINEAR_SLOPE};
use crate::linalg::{condition_number, eigenvalues, op_norm, Matrix, Point};
use crate::semiflow::{poincare_step, ImpulsiveSystem, ReturnStep};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_NEWTON: usize = 50;
pub const UNIT_CIRCLE_TOL: f64 = 1e-6;
const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitTag {
    Hyperbolic,
    NonHyperbolic,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Cycle `x_1..x_N` in the landing chart.
    pub points: Vec<Vec<f64>>,
    pub flight_times: Vec<f64>,
    pub period: f64,
    /// Row-major monodromy matrix.
    pub monodromy: Vec<f64>,
    /// `(re, im)` pairs.
    pub multipliers: Vec<(f64, f64)>,
    pub tag: OrbitTag,
}

impl PeriodicOrbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        Point::from_column_slice(&self.points[i])
    }

    pub fn monodromy_matrix(&self) -> Matrix {
        let k = self.points.first().map(|p| p.len()).unwrap_or(0);
        DMatrix::from_row_slice(k, k, &self.monodromy)
    }

    pub fn multiplier_moduli(&self) -> Vec<f64> {
        self.multipliers.iter().map(|(re, im)| re.hypot(*im)).collect()
    }

    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Rec<'a> {
            points: &'a [Vec<f64>],
            flight_times: &'a [f64],
            period: f64,
            multipliers: &'a [(f64, f64)],
            tag: OrbitTag,
        }
        serde_json::to_string(&Rec {
            points: &self.points,
            flight_times: &self.flight_times,
            period: self.period,
            multipliers: &self.multipliers,
            tag: self.tag,
        })
        .expect("orbit records serialize")
    }
}

pub fn orbits_to_jsonl(orbits: &[PeriodicOrbit]) -> String {
    orbits.iter().map(|o| o.to_jsonl() + "\n").collect()
}

fn to_vec(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

/// `N` successive return steps from `u`.
fn iterate(sys: &ImpulsiveSystem, u: &Point, n: usize) -> Result<Vec<ReturnStep>> {
    let mut steps = Vec::with_capacity(n);
    let mut cur = u.clone();
    for _ in 0..n {
        let s = poincare_step(sys, &cur)?;
        cur = s.image.clone();
        steps.push(s);
    }
    Ok(steps)
}

fn monodromy(steps: &[ReturnStep]) -> Matrix {
    let k = steps[0].jacobian.nrows();
    steps
        .iter()
        .fold(DMatrix::identity(k, k), |acc, s| &s.jacobian * acc)
}

pub fn classify_multipliers(moduli: &[f64], unit_circle_tol: f64) -> OrbitTag {
    if moduli.iter().any(|m| !m.is_finite()) {
        OrbitTag::Undetermined
    } else if moduli.iter().all(|m| (m - 1.0).abs() > unit_circle_tol) {
        OrbitTag::Hyperbolic
    } else {
        OrbitTag::NonHyperbolic
    }
}

pub fn classify(orbit: &PeriodicOrbit, unit_circle_tol: f64) -> OrbitTag {
    classify_multipliers(&orbit.multiplier_moduli(), unit_circle_tol)
}

fn assemble(sys: &ImpulsiveSystem, u: &Point, steps: &[ReturnStep]) -> PeriodicOrbit {
    let mono = monodromy(steps);
    let mults: Vec<(f64, f64)> = eigenvalues(&mono).iter().map(|c| (c.re, c.im)).collect();
    let mut points = vec![to_vec(&sys.dhat.wrap(u))];
    for s in &steps[..steps.len() - 1] {
        points.push(to_vec(&sys.dhat.wrap(&s.image)));
    }
    let flight_times: Vec<f64> = steps.iter().map(|s| s.tau).collect();
    let mut orbit = PeriodicOrbit {
        points,
        period: flight_times.iter().sum(),
        flight_times,
        monodromy: row_major(&mono),
        multipliers: mults,
        tag: OrbitTag::Undetermined,
    };
    orbit.tag = classify(&orbit, UNIT_CIRCLE_TOL);
    orbit
}

fn clamp_to_chart(sys: &ImpulsiveSystem, u: &Point) -> Point {
    let mut v = sys.dhat.wrap(u);
    for i in 0..v.len() {
        if !sys.dhat.periodic.get(i).copied().unwrap_or(false) {
            let [lo, hi] = sys.dhat.chart_box[i];
            v[i] = v[i].clamp(lo, hi);
        }
    }
    v
}

fn residual(sys: &ImpulsiveSystem, u: &Point, n: usize) -> Result<(Point, Vec<ReturnStep>)> {
    let steps = iterate(sys, u, n)?;
    let f = sys.dhat.diff(&steps[n - 1].image, u);
    Ok((f, steps))
}

/// Damped Newton on `F(u) = P^N(u) - u`.
pub fn find_periodic(sys: &ImpulsiveSystem, u0: &Point, n: usize, tol: f64) -> Result<PeriodicOrbit> {
    if n == 0 {
        return Err(Error::BadParams("return count must be at least 1".into()));
    }
    if !sys.dhat.contains(u0) {
        return Err(Error::Chart {
            section: sys.dhat.name.clone(),
            u: to_vec(u0),
        });
    }
    let k = u0.len();
    let mut u = sys.dhat.wrap(u0);
    let (mut f, mut steps) =
        residual(sys, &u, n).map_err(|e| Error::NotFound { reason: format!("seed does not return: {e}") })?;
    let mut last_condition = 0.0;
    for _ in 0..MAX_NEWTON {
        if f.norm() < tol {
            check_clear_of_boundary(sys, &u, &steps)?;
            return Ok(assemble(sys, &u, &steps));
        }
        let a = monodromy(&steps) - DMatrix::identity(k, k);
        last_condition = condition_number(&a);
        let dir = if last_condition > SINGULAR_CONDITION {
            // neutral direction: damped fixed-point step instead of Newton
            &f * 0.5
        } else {
            -(a.lu().solve(&f).ok_or(Error::SingularJacobian {
                condition: last_condition,
            })?)
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = clamp_to_chart(sys, &(&u + &dir * lambda));
            if let Ok((fc, sc)) = residual(sys, &cand, n) {
                if fc.norm() < f.norm() || fc.norm() < tol {
                    u = cand;
                    f = fc;
                    steps = sc;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if last_condition > SINGULAR_CONDITION {
        return Err(Error::SingularJacobian {
            condition: last_condition,
        });
    }
    Err(Error::NotFound {
        reason: format!("residual {:e} after Newton iterations", f.norm()),
    })
}

fn check_clear_of_boundary(sys: &ImpulsiveSystem, u: &Point, steps: &[ReturnStep]) -> Result<()> {
    let margin = sys.dhat.boundary_margin;
    let mut pts = vec![u.clone()];
    pts.extend(steps.iter().map(|s| s.image.clone()));
    for p in pts {
        if sys.dhat.edge_distance(&p) <= margin {
            return Err(Error::NotFound {
                reason: format!("orbit touches the boundary of `{}` at {:?}", sys.dhat.name, to_vec(&p)),
            });
        }
    }
    Ok(())
}

/// Persistence of a hyperbolic orbit under the perturbed impulse `j`.
pub fn continue_orbit(
    sys: &ImpulsiveSystem,
    orbit: &PeriodicOrbit,
    j: &Impulse,
    eps_t: f64,
) -> Result<PeriodicOrbit> {
    let fail = |segment: usize, reason: String| Error::ContinuationFailed { segment, reason };
    if orbit.tag != OrbitTag::Hyperbolic {
        return Err(fail(0, "only hyperbolic orbits persist".into()));
    }
    let perturbed = sys.with_impulse(j.clone()).map_err(|e| fail(0, e.to_string()))?;
    // the old cycle must still be traversable under J
    for (i, p) in orbit.points.iter().enumerate() {
        if let Err(e) = poincare_step(&perturbed, &Point::from_column_slice(p)) {
            return Err(fail(i, format!("segment lost its crossing: {e}")));
        }
    }
    let new = find_periodic(&perturbed, &orbit.point(0), orbit.len(), DEFAULT_TOL)
        .map_err(|e| fail(0, e.to_string()))?;
    if (new.period - orbit.period).abs() >= eps_t {
        return Err(fail(
            0,
            format!("period {} left the window ({} +/- {})", new.period, orbit.period, eps_t),
        ));
    }
    if new.tag != OrbitTag::Hyperbolic {
        return Err(fail(0, "continued orbit is not hyperbolic".into()));
    }
    Ok(new)
}

/// Franks-type hyperbolization with a linear bump at the first orbit point.
pub fn make_hyperbolic(
    sys: &ImpulsiveSystem,
    orbit: &PeriodicOrbit,
    eps: f64,
    attempts: usize,
    seed: u64,
) -> Result<(Impulse, PeriodicOrbit)> {
    if orbit.tag == OrbitTag::Hyperbolic {
        return Ok((sys.impulse.clone(), orbit.clone()));
    }
    let p = orbit.point(0);
    let dhat = &sys.dhat;
    let mut r = dhat.boundary_distance(&p).min(0.1) * 0.9;
    for q in &orbit.points[1..] {
        let d = dhat.chart_distance(&p, &Point::from_column_slice(q));
        if d > 1e-9 {
            r = r.min(0.45 * d);
        }
    }
    if !(r > 1e-9) {
        return Err(Error::SupportOutsideChart {
            center: to_vec(&p),
            radius: r,
        });
    }
    let dsup = sys.impulse.jacobian_sup_bound();
    let k = p.len();
    // largest scaling whose linear-bump bound stays inside the budget
    let eta = 0.999 * eps / (r.max(LINEAR_SLOPE * dsup));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..attempts.max(1) {
        let e = if attempt == 0 {
            DMatrix::identity(k, k) * eta
        } else {
            let m = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            let scale = eta * rng.gen_range(0.5..1.0) / op_norm(&m).max(1e-300);
            m * scale
        };
        let j = sys.impulse.bump_linear(&p, &e, r, eps)?;
        let perturbed = sys.with_impulse(j.clone())?;
        if let Ok(o) = find_periodic(&perturbed, &p, orbit.len(), DEFAULT_TOL) {
            if o.tag == OrbitTag::Hyperbolic {
                return Ok((j, o));
            }
        }
    }
    Err(Error::HyperbolizationFailed {
        attempts: attempts.max(1),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tau0: f64,
    pub max_returns: usize,
    pub orbits: Vec<PeriodicOrbit>,
    pub hyperbolic: usize,
    pub non_hyperbolic: usize,
    pub verdict: bool,
}

/// Shortest sub-cycle of a cycle whose points repeat.
fn prime_cycle(o: &PeriodicOrbit, sys: &ImpulsiveSystem, tol: f64) -> PeriodicOrbit {
    let n = o.len();
    for d in 1..n {
        if n % d != 0 {
            continue;
        }
        let repeats = (0..n).all(|i| {
            sys.dhat
                .chart_distance(&o.point(i), &o.point((i + d) % n))
                < tol
        });
        if repeats {
            if let Ok(steps) = iterate(sys, &o.point(0), d) {
                return assemble(sys, &o.point(0), &steps);
            }
        }
    }
    o.clone()
}

fn same_cycle(a: &PeriodicOrbit, b: &PeriodicOrbit, sys: &ImpulsiveSystem, tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    (0..n).any(|shift| {
        (0..n).all(|i| sys.dhat.chart_distance(&a.point(i), &b.point((i + shift) % n)) < tol)
    })
}

/// Find every periodic orbit with period at most `period_bound` reachable
/// from `seeds`, keep those meeting the `eps_bd`-interior of the landing
/// section, and check that they are hyperbolic.
pub fn audit_kupka_smale(
    sys: &ImpulsiveSystem,
    period_bound: f64,
    eps_bd: f64,
    seeds: &[Point],
) -> AuditReport {
    let tau0 = seeds
        .iter()
        .filter_map(|s| poincare_step(sys, s).ok().map(|r| r.tau))
        .fold(f64::INFINITY, f64::min);
    let max_returns = if tau0.is_finite() && tau0 > 0.0 {
        ((period_bound / tau0).floor() as usize).min(12)
    } else {
        0
    };
    let tol = DEFAULT_TOL;
    let jobs: Vec<(usize, usize)> = (1..=max_returns)
        .flat_map(|n| (0..seeds.len()).map(move |i| (n, i)))
        .collect();
    let found: Vec<Option<PeriodicOrbit>> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let o = find_periodic(sys, &seeds[i], n, tol).ok()?;
            let o = prime_cycle(&o, sys, 10.0 * tol);
            let meets = (0..o.len()).any(|k| sys.dhat.edge_distance(&o.point(k)) >= eps_bd);
            (meets && o.period <= period_bound + 1e-9).then_some(o)
        })
        .collect();
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for o in found.into_iter().flatten() {
        if !orbits.iter().any(|e| same_cycle(e, &o, sys, 10.0 * tol)) {
            orbits.push(o);
        }
    }
    let hyperbolic = orbits.iter().filter(|o| o.tag == OrbitTag::Hyperbolic).count();
    AuditReport {
        tau0,
        max_returns,
        non_hyperbolic: orbits.len() - hyperbolic,
        hyperbolic,
        verdict: hyperbolic == orbits.len(),
        orbits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_example, predator_prey_multiplier_oracle, predator_prey_period_oracle};
    use crate::impulse::AffineBase;
    use crate::linalg::point;
    use std::f64::consts::PI;

    fn example(name: &str) -> ImpulsiveSystem {
        default_example(name).unwrap().build().unwrap()
    }

    #[test]
    fn annulus_orbit() {
        let an = example("annulus");
        let o = find_periodic(&an, &point(&[1.2]), 1, DEFAULT_TOL).unwrap();
        assert!((o.points[0][0] - 1.0).abs() < 1e-9);
        assert!((o.period - PI).abs() < 1e-8);
        assert!((o.multipliers[0].0 - 0.5).abs() < 1e-8);
        assert_eq!(o.tag, OrbitTag::Hyperbolic);
        assert!(o.to_jsonl().contains("\"tag\":\"hyperbolic\""));
    }

    #[test]
    fn predator_prey_orbit() {
        let pp = example("predator_prey");
        let o = find_periodic(&pp, &point(&[0.05]), 1, DEFAULT_TOL).unwrap();
        assert!(o.points[0][0].abs() < 1e-9);
        assert!((o.period - predator_prey_period_oracle()).abs() < 1e-6);
        assert!((o.multipliers[0].0 - predator_prey_multiplier_oracle()).abs() < 1e-6);
        assert!(o.multipliers[0].0 < 0.5);
    }

    #[test]
    fn neutral_orbits() {
        let rd = example("radial_disk");
        let o = find_periodic(&rd, &point(&[0.4]), 1, DEFAULT_TOL).unwrap();
        assert_eq!(o.tag, OrbitTag::NonHyperbolic);
        let bi = example("disk_billiard");
        let o = find_periodic(&bi, &point(&[PI, PI / 4.0]), 1, DEFAULT_TOL).unwrap();
        assert_eq!(o.tag, OrbitTag::NonHyperbolic);
        assert!((o.period - 4.0 * (PI / 4.0).cos()).abs() < 1e-9);
        // irrational angle: no closing
        assert!(find_periodic(&bi, &point(&[PI, 0.5]), 1, DEFAULT_TOL).is_err());
    }

    #[test]
    fn hyperbolization() {
        let rd = example("radial_disk");
        let o = find_periodic(&rd, &point(&[0.4]), 1, DEFAULT_TOL).unwrap();
        let (j, h) = make_hyperbolic(&rd, &o, 0.1, 5, 1).unwrap();
        assert_eq!(h.tag, OrbitTag::Hyperbolic);
        assert!((h.points[0][0] - 0.4).abs() < 1e-12);
        assert!(h.multipliers[0].0 > 1.04);
        assert!(crate::impulse::c1_distance(&rd.impulse, &j).unwrap() <= 0.1);
        // points far from the bump keep their neutral multiplier
        let far = rd.with_impulse(j).unwrap();
        let other = find_periodic(&far, &point(&[2.0]), 1, DEFAULT_TOL).unwrap();
        assert_eq!(other.tag, OrbitTag::NonHyperbolic);
        let bi = example("disk_billiard");
        let o = find_periodic(&bi, &point(&[PI, PI / 4.0]), 1, DEFAULT_TOL).unwrap();
        let (_, h) = make_hyperbolic(&bi, &o, 0.05, 5, 1).unwrap();
        assert!(h.multiplier_moduli().iter().all(|m| *m > 1.0 + 1e-6));
        // already hyperbolic input is returned unchanged
        let an = example("annulus");
        let o = find_periodic(&an, &point(&[1.2]), 1, DEFAULT_TOL).unwrap();
        let (j, same) = make_hyperbolic(&an, &o, 0.1, 1, 0).unwrap();
        assert_eq!(j, an.impulse);
        assert_eq!(same, o);
    }

    #[test]
    fn continuation() {
        let an = example("annulus");
        let o = find_periodic(&an, &point(&[1.2]), 1, DEFAULT_TOL).unwrap();
        assert_eq!(continue_orbit(&an, &o, &an.impulse, 0.1).unwrap(), o);
        let mut j = an.impulse.clone();
        j.base = AffineBase::new("radius_average", vec![0.51], vec![1.0], vec![1.0]);
        let c = continue_orbit(&an, &o, &j, 0.1).unwrap();
        assert!((c.multipliers[0].0 - 0.51).abs() < 1e-6);
        assert!((c.period - PI).abs() < 1e-6);
        // pushing the landing point off the section breaks the cycle
        let mut far = an.impulse.clone();
        far.base = AffineBase::new("off", vec![0.5], vec![1.0], vec![1.7]);
        assert!(matches!(
            continue_orbit(&an, &o, &far, 0.1),
            Err(Error::ContinuationFailed { .. })
        ));
    }

    #[test]
    fn rebasing_keeps_spectrum() {
        // reflecting impulse: every landing point lies on a 2-cycle v <-> 2 pi - v
        let bi = example("disk_billiard");
        let mut j = bi.impulse.clone();
        j.base = AffineBase::new("reflect", vec![-1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], vec![PI, 0.0]);
        let sys = bi.with_impulse(j).unwrap();
        let o = find_periodic(&sys, &point(&[PI + 0.2, PI / 4.0]), 2, DEFAULT_TOL).unwrap();
        assert!((o.points[1][0] - (PI - 0.2)).abs() < 1e-9);
        let from_second = find_periodic(&sys, &o.point(1), 2, DEFAULT_TOL).unwrap();
        let mut a = o.multiplier_moduli();
        let mut b = from_second.multiplier_moduli();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn audit() {
        let an = example("annulus");
        let seeds = an.dhat.grid(5, 0.05);
        let rep = audit_kupka_smale(&an, 7.0, 1e-3, &seeds);
        assert_eq!(rep.orbits.len(), 1);
        assert!(rep.verdict);
        let rd = example("radial_disk");
        let seeds = rd.dhat.grid(8, 0.0);
        let rep = audit_kupka_smale(&rd, 1.0, 1e-3, &seeds);
        assert!(rep.orbits.len() >= 8);
        assert!(!rep.verdict);
    }
}
