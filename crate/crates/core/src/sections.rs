//! Codimension-one cross-sections given by an explicit chart and an event function.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::SystemField;
use crate::linalg::{wrap_near, wrap_pi, Matrix, Point};

/// Chart coordinates may overshoot the chart box by this much (Newton iterates,
/// hits on an invariant edge).
pub const CHART_SLACK: f64 = 1e-8;
/// `|g|` below which an ambient point counts as lying on the section surface.
const ON_SURFACE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SectionGeometry {
    /// Planar segment `u -> origin + u * direction`.
    Line { origin: [f64; 2], direction: [f64; 2] },
    /// Circle of the given radius centred at the origin, chart = polar angle.
    Circle { radius: f64 },
    /// Torus meridian `{x = x0}`, chart = the second angle.
    TorusMeridian { x0: f64 },
    /// Collision surface `{s = 0}` of the billiard suspension, chart = `(x, theta)`.
    BilliardArc,
    /// Level set `{phase = level}` of a two-leg suspension, chart = `(c1, c2)`.
    PhaseLevel { level: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub name: String,
    pub geometry: SectionGeometry,
    /// `[lo, hi]` per chart axis.
    pub chart_box: Vec<[f64; 2]>,
    /// Chart axes identified modulo `2 pi` (the box must then have width `2 pi`).
    #[serde(default)]
    pub periodic: Vec<bool>,
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
    /// Box sides `[lo, hi]` per axis lying on an invariant edge of the phase
    /// domain. They are part of the chart box but not of the boundary that
    /// trajectories are forbidden to hit.
    #[serde(default)]
    pub phase_edges: Vec<[bool; 2]>,
    /// Chart axes along which hitting-time derivatives are measured (all when absent).
    #[serde(default)]
    pub derivative_axes: Option<Vec<usize>>,
}

fn default_margin() -> f64 {
    1e-3
}

impl CrossSection {
    pub fn new(name: &str, geometry: SectionGeometry, chart_box: Vec<[f64; 2]>) -> Self {
        let k = chart_box.len();
        CrossSection {
            name: name.to_string(),
            geometry,
            chart_box,
            periodic: vec![false; k],
            boundary_margin: default_margin(),
            phase_edges: vec![[false, false]; k],
            derivative_axes: None,
        }
    }

    pub fn with_periodic(mut self, axis: usize) -> Self {
        self.periodic[axis] = true;
        self
    }

    pub fn with_phase_edge(mut self, axis: usize, side: usize) -> Self {
        self.phase_edges[axis][side] = true;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.boundary_margin = margin;
        self
    }

    pub fn with_derivative_axes(mut self, axes: Vec<usize>) -> Self {
        self.derivative_axes = Some(axes);
        self
    }

    pub fn chart_dim(&self) -> usize {
        self.chart_box.len()
    }

    pub fn ambient_dim(&self) -> usize {
        match self.geometry {
            SectionGeometry::BilliardArc | SectionGeometry::PhaseLevel { .. } => 3,
            _ => 2,
        }
    }

    fn is_periodic(&self, axis: usize) -> bool {
        self.periodic.get(axis).copied().unwrap_or(false)
    }

    fn is_phase_edge(&self, axis: usize, side: usize) -> bool {
        self.phase_edges.get(axis).map(|s| s[side]).unwrap_or(false)
    }

    pub fn contains(&self, u: &Point) -> bool {
        u.len() == self.chart_dim()
            && u.iter().enumerate().all(|(i, &v)| {
                v.is_finite()
                    && (self.is_periodic(i)
                        || (v >= self.chart_box[i][0] - CHART_SLACK
                            && v <= self.chart_box[i][1] + CHART_SLACK))
            })
    }

    /// Canonical representative: periodic axes reduced into the box window.
    pub fn wrap(&self, u: &Point) -> Point {
        let mut w = u.clone();
        for i in 0..w.len() {
            if self.is_periodic(i) {
                let lo = self.chart_box[i][0];
                w[i] = lo + (w[i] - lo).rem_euclid(2.0 * PI);
            }
        }
        w
    }

    /// `a - b` with periodic axes taken through the short way round.
    pub fn diff(&self, a: &Point, b: &Point) -> Point {
        let mut d = a - b;
        for i in 0..d.len() {
            if self.is_periodic(i) {
                d[i] = wrap_pi(d[i]);
            }
        }
        d
    }

    pub fn chart_distance(&self, a: &Point, b: &Point) -> f64 {
        self.diff(a, b).norm()
    }

    fn check(&self, u: &Point) -> Result<()> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::Chart {
                section: self.name.clone(),
                u: u.iter().copied().collect(),
            })
        }
    }

    pub fn chart_to_ambient(&self, u: &Point) -> Result<Point> {
        self.check(u)?;
        Ok(self.chart_map(u))
    }

    fn chart_map(&self, u: &Point) -> Point {
        match &self.geometry {
            SectionGeometry::Line { origin, direction } => DVector::from_vec(vec![
                origin[0] + u[0] * direction[0],
                origin[1] + u[0] * direction[1],
            ]),
            SectionGeometry::Circle { radius } => {
                DVector::from_vec(vec![radius * u[0].cos(), radius * u[0].sin()])
            }
            SectionGeometry::TorusMeridian { x0 } => DVector::from_vec(vec![*x0, u[0]]),
            SectionGeometry::BilliardArc => DVector::from_vec(vec![u[0], u[1], 0.0]),
            SectionGeometry::PhaseLevel { level } => DVector::from_vec(vec![u[0], u[1], *level]),
        }
    }

    /// Derivative of the chart, `ambient_dim x chart_dim`.
    pub fn chart_jacobian(&self, u: &Point) -> Matrix {
        match &self.geometry {
            SectionGeometry::Line { direction, .. } => {
                DMatrix::from_column_slice(2, 1, &[direction[0], direction[1]])
            }
            SectionGeometry::Circle { radius } => {
                DMatrix::from_column_slice(2, 1, &[-radius * u[0].sin(), radius * u[0].cos()])
            }
            SectionGeometry::TorusMeridian { .. } => DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            SectionGeometry::BilliardArc | SectionGeometry::PhaseLevel { .. } => {
                DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
            }
        }
    }

    /// Event function `g`; the section lies in `{g = 0}`.
    pub fn event_g(&self, x: &Point) -> f64 {
        match &self.geometry {
            SectionGeometry::Line { origin, direction } => {
                -direction[1] * (x[0] - origin[0]) + direction[0] * (x[1] - origin[1])
            }
            SectionGeometry::Circle { radius } => x[0] * x[0] + x[1] * x[1] - radius * radius,
            SectionGeometry::TorusMeridian { x0 } => ((x[0] - x0) / 2.0).sin(),
            SectionGeometry::BilliardArc => x[2],
            SectionGeometry::PhaseLevel { level } => x[2] - level,
        }
    }

    pub fn grad_g(&self, x: &Point) -> Point {
        match &self.geometry {
            SectionGeometry::Line { direction, .. } => {
                DVector::from_vec(vec![-direction[1], direction[0]])
            }
            SectionGeometry::Circle { .. } => DVector::from_vec(vec![2.0 * x[0], 2.0 * x[1]]),
            SectionGeometry::TorusMeridian { x0 } => {
                DVector::from_vec(vec![((x[0] - x0) / 2.0).cos() / 2.0, 0.0])
            }
            SectionGeometry::BilliardArc | SectionGeometry::PhaseLevel { .. } => {
                DVector::from_vec(vec![0.0, 0.0, 1.0])
            }
        }
    }

    fn box_center(&self, axis: usize) -> f64 {
        0.5 * (self.chart_box[axis][0] + self.chart_box[axis][1])
    }

    /// Chart coordinates of an ambient point, without membership checks.
    fn project(&self, x: &Point) -> Point {
        let u = match &self.geometry {
            SectionGeometry::Line { origin, direction } => {
                let n2 = direction[0] * direction[0] + direction[1] * direction[1];
                vec![((x[0] - origin[0]) * direction[0] + (x[1] - origin[1]) * direction[1]) / n2]
            }
            SectionGeometry::Circle { .. } => vec![x[1].atan2(x[0])],
            SectionGeometry::TorusMeridian { .. } => vec![x[1]],
            SectionGeometry::BilliardArc => vec![wrap_near(x[0], self.box_center(0)), x[1]],
            SectionGeometry::PhaseLevel { .. } => vec![x[0], x[1]],
        };
        self.wrap(&DVector::from_vec(u))
    }

    /// Partial inverse of the chart: `Some(u)` when `x` lies on the section.
    pub fn chart_inverse(&self, x: &Point) -> Option<Point> {
        if x.len() != self.ambient_dim() {
            return None;
        }
        let on_surface = match &self.geometry {
            SectionGeometry::TorusMeridian { x0 } => wrap_pi(x[0] - x0).abs() < ON_SURFACE_TOL,
            _ => self.event_g(x).abs() < ON_SURFACE_TOL,
        };
        if !on_surface {
            return None;
        }
        let u = self.project(x);
        self.contains(&u).then_some(u)
    }

    /// Chart-space distance to the boundary of the chart box; `inf` when boundaryless.
    pub fn boundary_distance(&self, u: &Point) -> f64 {
        self.side_distance(u, false)
    }

    /// Distance to the part of the box boundary that is a genuine boundary of
    /// the section (sides on invariant phase edges excluded).
    pub fn edge_distance(&self, u: &Point) -> f64 {
        self.side_distance(u, true)
    }

    fn side_distance(&self, u: &Point, skip_phase_edges: bool) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.chart_dim() {
            if self.is_periodic(i) {
                continue;
            }
            for side in 0..2 {
                if skip_phase_edges && self.is_phase_edge(i, side) {
                    continue;
                }
                let dist = if side == 0 {
                    u[i] - self.chart_box[i][0]
                } else {
                    self.chart_box[i][1] - u[i]
                };
                d = d.min(dist.max(0.0));
            }
        }
        d
    }

    /// Regular grid of `n` points per axis, inset from non-periodic sides by `inset`.
    pub fn grid(&self, n: usize, inset: f64) -> Vec<Point> {
        let axes: Vec<Vec<f64>> = (0..self.chart_dim())
            .map(|i| {
                let [lo, hi] = self.chart_box[i];
                if self.is_periodic(i) {
                    (0..n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
                } else {
                    let (a, b) = (lo + inset, hi - inset);
                    if n == 1 {
                        vec![0.5 * (a + b)]
                    } else {
                        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                    }
                }
            })
            .collect();
        let mut out = vec![vec![]];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(DVector::from_vec).collect()
    }

    /// `min |grad g . X| / (|grad g| |X|)` over a chart grid.
    pub fn transversality_margin(&self, system: &SystemField) -> Result<f64> {
        let n = if self.chart_dim() == 1 { 201 } else { 41 };
        let mut worst = f64::INFINITY;
        for u in self.grid(n, self.boundary_margin) {
            let x = self.chart_map(&u);
            let v = system.field(&x);
            let vn = v.norm();
            if vn == 0.0 {
                return Err(Error::Singularity {
                    section: self.name.clone(),
                });
            }
            let gv = self.grad_g(&x);
            worst = worst.min(gv.dot(&v).abs() / (gv.norm() * vn));
        }
        Ok(worst)
    }
}

/// `a - b` in ambient coordinates, periodic axes taken the short way round.
pub fn ambient_diff(system: &SystemField, a: &Point, b: &Point) -> Point {
    let mut d = a - b;
    for &i in system.periodic_axes() {
        d[i] = wrap_pi(d[i]);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FieldKind;
    use crate::linalg::point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn annulus_d() -> CrossSection {
        CrossSection::new(
            "D",
            SectionGeometry::Line {
                origin: [0.0, 0.0],
                direction: [1.0, 0.0],
            },
            vec![[1.0, 2.0]],
        )
    }

    #[test]
    fn charts_land_on_known_points() {
        let d = annulus_d();
        assert_eq!(d.chart_to_ambient(&point(&[1.5])).unwrap().as_slice(), &[1.5, 0.0]);
        let pp = CrossSection::new(
            "D",
            SectionGeometry::Line {
                origin: [1.0, 0.0],
                direction: [0.0, 1.0],
            },
            vec![[0.0, 2.0]],
        );
        assert_eq!(pp.chart_to_ambient(&point(&[0.7])).unwrap().as_slice(), &[1.0, 0.7]);
        let torus = CrossSection::new("D", SectionGeometry::TorusMeridian { x0: 0.0 }, vec![[0.0, 2.0 * PI]])
            .with_periodic(0);
        assert_eq!(torus.chart_to_ambient(&point(&[2.0])).unwrap().as_slice(), &[0.0, 2.0]);
        assert!(matches!(d.chart_to_ambient(&point(&[2.5])), Err(Error::Chart { .. })));
    }

    #[test]
    fn boundary_distances() {
        let d = annulus_d();
        assert!((d.boundary_distance(&point(&[1.25])) - 0.25).abs() < 1e-15);
        let c = CrossSection::new("C", SectionGeometry::Circle { radius: 1.0 }, vec![[0.0, 2.0 * PI]])
            .with_periodic(0);
        assert_eq!(c.boundary_distance(&point(&[1.0])), f64::INFINITY);
        let b = CrossSection::new("B", SectionGeometry::BilliardArc, vec![[-0.5, 0.5], [-1.4, 1.4]]);
        assert!((b.boundary_distance(&point(&[0.0, 0.0])) - 0.5).abs() < 1e-15);
        let edge = annulus_d().with_phase_edge(0, 0);
        assert!((edge.edge_distance(&point(&[1.25])) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn round_trip_on_random_points() {
        let sections = vec![
            annulus_d(),
            CrossSection::new("C", SectionGeometry::Circle { radius: 1.5 }, vec![[0.0, 2.0 * PI]])
                .with_periodic(0),
            CrossSection::new("T", SectionGeometry::TorusMeridian { x0: 1.0 }, vec![[0.0, 2.0 * PI]])
                .with_periodic(0),
            CrossSection::new("B", SectionGeometry::BilliardArc, vec![[2.6, 3.6], [-1.4, 1.4]]),
            CrossSection::new("L", SectionGeometry::PhaseLevel { level: 1.0 }, vec![[-1.0, 1.0], [-1.0, 1.0]]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in &sections {
            for _ in 0..1000 {
                let u = DVector::from_iterator(
                    s.chart_dim(),
                    s.chart_box.iter().map(|[lo, hi]| rng.gen_range(*lo..*hi)),
                );
                let x = s.chart_to_ambient(&u).unwrap();
                assert!(s.event_g(&x).abs() < 1e-10, "{}", s.name);
                let back = s.chart_inverse(&x).unwrap();
                assert!(s.chart_distance(&back, &u) < 1e-10, "{}", s.name);
                assert!(s.grad_g(&x).norm() > 0.0);
            }
        }
    }

    #[test]
    fn transversality_examples() {
        let rot = SystemField::new(FieldKind::AnnulusRotation);
        assert!((annulus_d().transversality_margin(&rot).unwrap() - 1.0).abs() < 1e-12);
        let rd = SystemField::new(FieldKind::RadialDisk);
        let c = CrossSection::new("C", SectionGeometry::Circle { radius: 1.0 }, vec![[0.0, 2.0 * PI]])
            .with_periodic(0);
        assert!((c.transversality_margin(&rd).unwrap() - 1.0).abs() < 1e-12);
        let pp = SystemField::new(FieldKind::PredatorPrey);
        let d = CrossSection::new(
            "D",
            SectionGeometry::Line {
                origin: [1.0, 0.0],
                direction: [0.0, 1.0],
            },
            vec![[0.0, 2.0]],
        );
        // grid oracle: |2 - y| / |(2 - y, -y^2)| on the inset grid
        let mut oracle = f64::INFINITY;
        for u in d.grid(201, d.boundary_margin) {
            let y = u[0];
            oracle = oracle.min((2.0 - y).abs() / ((2.0 - y).powi(2) + y.powi(4)).sqrt());
        }
        let m = d.transversality_margin(&pp).unwrap();
        assert!(m > 0.0 && (m - oracle).abs() < 1e-12);
        // the field vanishes at the equilibrium (2, 1)
        let bad = CrossSection::new(
            "bad",
            SectionGeometry::Line {
                origin: [2.0, 0.0],
                direction: [0.0, 1.0],
            },
            vec![[1.0, 1.5]],
        )
        .with_margin(0.0);
        assert!(matches!(bad.transversality_margin(&pp), Err(Error::Singularity { .. })));
    }
}
