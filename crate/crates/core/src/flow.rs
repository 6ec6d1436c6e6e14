//! Built-in vector fields, their flows, and flow Jacobians.
//!
//! Four fields are integrated with classical RK4; two (`DiskBilliard`,
//! `LorenzSkew`) are "exact" suspension models whose flows are evaluated in
//! closed form leg by leg, including across the identifications of their
//! suspension coordinates.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Point};

/// Slack allowed when testing membership of the declared phase domains.
pub const DOMAIN_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// `X(x, y) = (-y, x)` on the annulus `1 <= r <= 2`.
    AnnulusRotation,
    /// `x' = x(3 - x - y)`, `y' = y(-1 + x - y)` on `[0, 4] x [0, 2]`.
    PredatorPrey,
    /// `X(x) = -x` on the disk of radius 3.
    RadialDisk,
    /// Constant field `(1, alpha)` on the torus `R^2 / (2 pi Z)^2`.
    TorusLinear,
    /// Billiard flow in the unit disk, suspension coordinates `(x, theta, s)`.
    DiskBilliard,
    /// Two-leg suspension of a Lorenz-like skew product, coordinates `(c1, c2, phase)`.
    LorenzSkew,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::AnnulusRotation => "annulus_rotation",
            FieldKind::PredatorPrey => "predator_prey",
            FieldKind::RadialDisk => "radial_disk",
            FieldKind::TorusLinear => "torus_linear",
            FieldKind::DiskBilliard => "disk_billiard",
            FieldKind::LorenzSkew => "lorenz_skew",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemField {
    pub kind: FieldKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOpts {
    pub step: f64,
    pub tol: f64,
}

impl Default for IntegratorOpts {
    fn default() -> Self {
        IntegratorOpts {
            step: 1e-3,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub endpoint: Point,
    pub path: Vec<(f64, Point)>,
    pub jacobian: Option<Matrix>,
}

/// A crossing of an identification surface of an exact model.
#[derive(Clone, Debug)]
pub(crate) struct Crossing {
    pub time: f64,
    /// State just after the identification.
    pub state: Point,
    /// Derivative of the crossing state with respect to the initial state.
    pub jac: Matrix,
    /// Derivative of the crossing time with respect to the initial state.
    pub dtime: DVector<f64>,
}

impl SystemField {
    pub fn new(kind: FieldKind) -> Self {
        SystemField {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn param(&self, name: &str) -> f64 {
        if let Some(v) = self.params.get(name) {
            return *v;
        }
        match (self.kind, name) {
            (FieldKind::TorusLinear, "alpha") => (5f64.sqrt() - 1.0) / 2.0,
            (FieldKind::LorenzSkew, "c") => 1.9,
            (FieldKind::LorenzSkew, "a") => 0.8,
            _ => 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FieldKind::DiskBilliard | FieldKind::LorenzSkew => 3,
            _ => 2,
        }
    }

    /// Ambient coordinates identified modulo `2 pi`.
    pub fn periodic_axes(&self) -> &'static [usize] {
        match self.kind {
            FieldKind::TorusLinear => &[0, 1],
            FieldKind::DiskBilliard => &[0],
            _ => &[],
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, FieldKind::DiskBilliard | FieldKind::LorenzSkew)
    }

    /// Equilibria inside the phase domain (fixed points of every impulsive semiflow
    /// built on this field whose impulsive region avoids them).
    pub fn equilibria(&self) -> Vec<Point> {
        match self.kind {
            FieldKind::PredatorPrey => vec![
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![3.0, 0.0]),
                DVector::from_vec(vec![2.0, 1.0]),
            ],
            FieldKind::RadialDisk => vec![DVector::zeros(2)],
            _ => vec![],
        }
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.kind {
            FieldKind::AnnulusRotation => {
                let r = x.norm();
                (1.0 - DOMAIN_SLACK..=2.0 + DOMAIN_SLACK).contains(&r)
            }
            FieldKind::PredatorPrey => {
                (-DOMAIN_SLACK..=4.0 + DOMAIN_SLACK).contains(&x[0])
                    && (-DOMAIN_SLACK..=2.0 + DOMAIN_SLACK).contains(&x[1])
            }
            FieldKind::RadialDisk => x.norm() <= 3.0 + DOMAIN_SLACK,
            FieldKind::TorusLinear => true,
            FieldKind::DiskBilliard => {
                let (th, s) = (x[1], x[2]);
                th.abs() < PI / 2.0
                    && s >= -DOMAIN_SLACK
                    && s <= 2.0 * th.cos() + DOMAIN_SLACK
            }
            FieldKind::LorenzSkew => {
                x[0].abs() <= 1.0 + DOMAIN_SLACK
                    && x[1].abs() <= 1.0 + DOMAIN_SLACK
                    && (0.0..2.0).contains(&x[2])
            }
        }
    }

    fn domain_error(&self, x: &Point) -> Error {
        Error::Domain {
            system: self.kind.name().to_string(),
            point: x.iter().copied().collect(),
        }
    }

    /// `X(x)` without the domain check.
    pub(crate) fn field(&self, x: &Point) -> Point {
        match self.kind {
            FieldKind::AnnulusRotation => DVector::from_vec(vec![-x[1], x[0]]),
            FieldKind::PredatorPrey => DVector::from_vec(vec![
                x[0] * (3.0 - x[0] - x[1]),
                x[1] * (-1.0 + x[0] - x[1]),
            ]),
            FieldKind::RadialDisk => -x,
            FieldKind::TorusLinear => DVector::from_vec(vec![1.0, self.param("alpha")]),
            FieldKind::DiskBilliard => DVector::from_vec(vec![0.0, 0.0, 1.0]),
            FieldKind::LorenzSkew => {
                let rate = 1.0 / self.lorenz_leg_time(x);
                DVector::from_vec(vec![0.0, 0.0, rate])
            }
        }
    }

    /// `DX(x)` for the integrated kinds.
    pub(crate) fn field_jacobian(&self, x: &Point) -> Matrix {
        match self.kind {
            FieldKind::AnnulusRotation => DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            FieldKind::PredatorPrey => DMatrix::from_row_slice(
                2,
                2,
                &[
                    3.0 - 2.0 * x[0] - x[1],
                    -x[0],
                    x[1],
                    -1.0 + x[0] - 2.0 * x[1],
                ],
            ),
            FieldKind::RadialDisk => -DMatrix::identity(2, 2),
            FieldKind::TorusLinear => DMatrix::zeros(2, 2),
            FieldKind::DiskBilliard | FieldKind::LorenzSkew => {
                unreachable!("exact kinds are not integrated")
            }
        }
    }

    fn lorenz_leg_time(&self, x: &Point) -> f64 {
        if x[2] < 1.0 {
            1.0 - x[0].abs().ln()
        } else {
            1.0 + 0.1 * x[0] * x[0]
        }
    }
}

pub fn eval_field(system: &SystemField, x: &Point) -> Result<Point> {
    if x.len() != system.dim() || !system.in_domain(x) {
        return Err(system.domain_error(x));
    }
    Ok(system.field(x))
}

fn rk4_step(sys: &SystemField, x: &Point, jac: Option<&Matrix>, h: f64) -> (Point, Option<Matrix>) {
    let k1 = sys.field(x);
    let x2 = x + &k1 * (h / 2.0);
    let k2 = sys.field(&x2);
    let x3 = x + &k2 * (h / 2.0);
    let k3 = sys.field(&x3);
    let x4 = x + &k3 * h;
    let k4 = sys.field(&x4);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let next_jac = jac.map(|j| {
        let a1 = sys.field_jacobian(x);
        let a2 = sys.field_jacobian(&x2);
        let a3 = sys.field_jacobian(&x3);
        let a4 = sys.field_jacobian(&x4);
        let m1 = &a1 * j;
        let m2 = &a2 * (j + &m1 * (h / 2.0));
        let m3 = &a3 * (j + &m2 * (h / 2.0));
        let m4 = &a4 * (j + &m3 * h);
        j + (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0)
    });
    (next, next_jac)
}

/// Single RK4 step exposed for the event locator.
pub(crate) fn step(sys: &SystemField, x: &Point, jac: Option<&Matrix>, h: f64) -> (Point, Option<Matrix>) {
    rk4_step(sys, x, jac, h)
}

fn integrate(
    sys: &SystemField,
    x: &Point,
    t: f64,
    h: f64,
    with_jac: bool,
) -> Result<(Vec<(f64, Point)>, Option<Matrix>)> {
    let n = (t.abs() / h).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::Step { t: 0.0 });
    }
    let mut cur = x.clone();
    let mut jac = with_jac.then(|| DMatrix::identity(x.len(), x.len()));
    let mut path = Vec::with_capacity(n + 1);
    path.push((0.0, cur.clone()));
    for i in 0..n {
        let (nx, nj) = rk4_step(sys, &cur, jac.as_ref(), dt);
        if !sys.in_domain(&nx) {
            return Err(sys.domain_error(&nx));
        }
        cur = nx;
        jac = nj;
        let ti = if i + 1 == n { t } else { dt * (i + 1) as f64 };
        path.push((ti, cur.clone()));
    }
    Ok((path, jac))
}

fn integrate_checked(
    sys: &SystemField,
    x: &Point,
    t: f64,
    opts: &IntegratorOpts,
    with_jac: bool,
) -> Result<FlowResult> {
    if x.len() != sys.dim() || !sys.in_domain(x) {
        return Err(sys.domain_error(x));
    }
    if t == 0.0 {
        return Ok(FlowResult {
            endpoint: x.clone(),
            path: vec![(0.0, x.clone())],
            jacobian: with_jac.then(|| DMatrix::identity(x.len(), x.len())),
        });
    }
    if sys.is_exact() {
        if t < 0.0 {
            return Err(Error::BadParams(
                "exact suspension models flow forward only".into(),
            ));
        }
        let (endpoint, jac, path) = exact_flow(sys, x, t)?;
        return Ok(FlowResult {
            endpoint,
            path,
            jacobian: with_jac.then_some(jac),
        });
    }
    let (path, jac) = integrate(sys, x, t, opts.step, with_jac)?;
    let coarse_end = &path.last().unwrap().1;
    if opts.step / 2.0 < 1e-14 {
        return Err(Error::Step { t });
    }
    // one halving pass: keep the finer solution only when the coarse one moved by more than tol
    let (fine_path, fine_jac) = integrate(sys, x, t, opts.step / 2.0, with_jac)?;
    let fine_end = &fine_path.last().unwrap().1;
    let (path, jac) = if (coarse_end - fine_end).amax() > opts.tol {
        (fine_path, fine_jac)
    } else {
        (path, jac)
    };
    Ok(FlowResult {
        endpoint: path.last().unwrap().1.clone(),
        path,
        jacobian: jac,
    })
}

/// `phi_t(x)`, sampled along the way.
pub fn flow(system: &SystemField, x: &Point, t: f64, opts: &IntegratorOpts) -> Result<FlowResult> {
    integrate_checked(system, x, t, opts, false)
}

/// `phi_t(x)` together with `D phi_t(x)` from the variational equation
/// (closed form for the exact kinds).
pub fn flow_with_jacobian(
    system: &SystemField,
    x: &Point,
    t: f64,
    opts: &IntegratorOpts,
) -> Result<FlowResult> {
    integrate_checked(system, x, t, opts, true)
}

// ---------------------------------------------------------------------------
// Exact suspension models

struct LegCrossing {
    time: f64,
    grad: DVector<f64>,
}

impl SystemField {
    fn leg_time_to_crossing(&self, s: &Point) -> LegCrossing {
        match self.kind {
            FieldKind::DiskBilliard => {
                let th = s[1];
                LegCrossing {
                    time: 2.0 * th.cos() - s[2],
                    grad: DVector::from_vec(vec![0.0, -2.0 * th.sin(), -1.0]),
                }
            }
            FieldKind::LorenzSkew => {
                let c1 = s[0];
                if s[2] < 1.0 {
                    if c1 == 0.0 {
                        return LegCrossing {
                            time: f64::INFINITY,
                            grad: DVector::zeros(3),
                        };
                    }
                    let tau = 1.0 - c1.abs().ln();
                    let dtau = -1.0 / c1;
                    LegCrossing {
                        time: (1.0 - s[2]) * tau,
                        grad: DVector::from_vec(vec![(1.0 - s[2]) * dtau, 0.0, -tau]),
                    }
                } else {
                    if c1 == 0.0 {
                        return LegCrossing {
                            time: f64::INFINITY,
                            grad: DVector::zeros(3),
                        };
                    }
                    let tau = 1.0 + 0.1 * c1 * c1;
                    LegCrossing {
                        time: (2.0 - s[2]) * tau,
                        grad: DVector::from_vec(vec![(2.0 - s[2]) * 0.2 * c1, 0.0, -tau]),
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Advance inside the current leg: `(state, d state / d state, d state / d dt)`.
    fn leg_advance(&self, s: &Point, dt: f64) -> (Point, Matrix, DVector<f64>) {
        match self.kind {
            FieldKind::DiskBilliard => {
                let mut n = s.clone();
                n[2] += dt;
                (n, DMatrix::identity(3, 3), DVector::from_vec(vec![0.0, 0.0, 1.0]))
            }
            FieldKind::LorenzSkew => {
                let c1 = s[0];
                let (tau, dtau) = if s[2] < 1.0 {
                    (1.0 - c1.abs().ln(), -1.0 / c1)
                } else {
                    (1.0 + 0.1 * c1 * c1, 0.2 * c1)
                };
                let mut n = s.clone();
                n[2] += dt / tau;
                let mut a = DMatrix::identity(3, 3);
                a[(2, 0)] = -dt * dtau / (tau * tau);
                (n, a, DVector::from_vec(vec![0.0, 0.0, 1.0 / tau]))
            }
            _ => unreachable!(),
        }
    }

    fn leg_cross(&self, s: &Point) -> (Point, Matrix) {
        match self.kind {
            FieldKind::DiskBilliard => {
                let (x, th) = (s[0], s[1]);
                let n = DVector::from_vec(vec![x + PI - 2.0 * th, th, 0.0]);
                let c = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
                (n, c)
            }
            FieldKind::LorenzSkew => {
                let (c1, c2) = (s[0], s[1]);
                if s[2] < 1.5 {
                    // Dulac passage near the singularity
                    let a = self.param("a");
                    let n = DVector::from_vec(vec![c1.signum() * c1.abs().powf(a), c2, 1.0]);
                    let c = DMatrix::from_row_slice(
                        3,
                        3,
                        &[a * c1.abs().powf(a - 1.0), 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                    );
                    (n, c)
                } else {
                    let cc = self.param("c");
                    let sg = c1.signum();
                    let n = DVector::from_vec(vec![
                        sg * (cc * c1.abs() - 1.0),
                        -sg * (0.5 + 0.25 * c2),
                        0.0,
                    ]);
                    let c = DMatrix::from_row_slice(
                        3,
                        3,
                        &[cc, 0.0, 0.0, 0.0, -sg * 0.25, 0.0, 0.0, 0.0, 0.0],
                    );
                    (n, c)
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Enumerate the identification crossings of an exact model up to `t_max`,
/// stopping early when `visit` returns `true`. Returns whether it stopped.
pub(crate) fn exact_crossings(
    sys: &SystemField,
    x: &Point,
    t_max: f64,
    mut visit: impl FnMut(&Crossing) -> Result<bool>,
) -> Result<bool> {
    let dim = x.len();
    let mut s = x.clone();
    let mut jac = DMatrix::identity(dim, dim);
    let mut elapsed = 0.0;
    let mut dtime = DVector::zeros(dim);
    loop {
        let leg = sys.leg_time_to_crossing(&s);
        if !leg.time.is_finite() || elapsed + leg.time > t_max {
            return Ok(false);
        }
        let dt_row = leg.grad.transpose() * &jac;
        let (end, a, v) = sys.leg_advance(&s, leg.time);
        let at_end = &a * &jac + &v * &dt_row;
        let (next, c) = sys.leg_cross(&end);
        jac = c * at_end;
        s = next;
        elapsed += leg.time;
        dtime += dt_row.transpose();
        if !sys.in_domain(&s) {
            return Err(sys.domain_error(&s));
        }
        let crossing = Crossing {
            time: elapsed,
            state: s.clone(),
            jac: jac.clone(),
            dtime: dtime.clone(),
        };
        if visit(&crossing)? {
            return Ok(true);
        }
    }
}

/// First time the exact flow from `x` comes back to `x` (periodic axes taken
/// modulo `2 pi`), with the number of identifications crossed on the way.
pub fn suspension_return_time(
    sys: &SystemField,
    x: &Point,
    tol: f64,
    max_crossings: usize,
) -> Result<Option<(f64, usize)>> {
    if !sys.is_exact() {
        return Err(Error::BadParams(format!("{} has no exact suspension", sys.kind.name())));
    }
    let periodic = sys.periodic_axes();
    let mut count = 0;
    let mut found = None;
    exact_crossings(sys, x, f64::INFINITY, |c| {
        count += 1;
        let miss = (0..x.len())
            .map(|i| {
                let d = c.state[i] - x[i];
                if periodic.contains(&i) {
                    crate::linalg::wrap_pi(d).abs()
                } else {
                    d.abs()
                }
            })
            .fold(0.0, f64::max);
        if miss <= tol {
            found = Some((c.time, count));
            return Ok(true);
        }
        Ok(count >= max_crossings)
    })?;
    Ok(found)
}

fn exact_flow(sys: &SystemField, x: &Point, t: f64) -> Result<(Point, Matrix, Vec<(f64, Point)>)> {
    let dim = x.len();
    let mut s = x.clone();
    let mut jac = DMatrix::identity(dim, dim);
    let mut rem = t;
    let mut drem = DVector::zeros(dim).transpose();
    let mut elapsed = 0.0;
    let mut path = vec![(0.0, x.clone())];
    loop {
        let leg = sys.leg_time_to_crossing(&s);
        if !(leg.time <= rem) {
            let (end, a, v) = sys.leg_advance(&s, rem);
            jac = &a * &jac + &v * &drem;
            path.push((t, end.clone()));
            return Ok((end, jac, path));
        }
        let dt_row = leg.grad.transpose() * &jac;
        let (end, a, v) = sys.leg_advance(&s, leg.time);
        let at_end = &a * &jac + &v * &dt_row;
        let (next, c) = sys.leg_cross(&end);
        jac = c * at_end;
        s = next;
        rem -= leg.time;
        drem -= dt_row;
        elapsed += leg.time;
        if !sys.in_domain(&s) {
            return Err(sys.domain_error(&s));
        }
        if rem > 0.0 {
            path.push((elapsed, s.clone()));
        }
    }
}

/// Physical position in the unit disk of a billiard suspension state.
pub fn billiard_position(state: &Point) -> [f64; 2] {
    let (x, th, s) = (state[0], state[1], state[2]);
    let start = [x.cos(), x.sin()];
    // inward normal rotated by theta
    let dir_angle = x + PI - th;
    [start[0] + s * dir_angle.cos(), start[1] + s * dir_angle.sin()]
}
