//! Impulses `I: D -> Dhat` in chart coordinates: an affine base map followed by
//! a stack of localized bumps `J = h_n o ... o h_1 o base`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{op_norm, Matrix, Point};
use crate::sections::CrossSection;

/// `max |beta'|` of the quintic profile, attained at `s = 1/2`.
pub const PROFILE_SLOPE: f64 = 15.0 / 8.0;
/// `max s |beta'(s)|`, attained at `s = 3/5`.
pub const PROFILE_RADIAL_SLOPE: f64 = 3240.0 / 3125.0;
/// Bound on `|D h - Id| / |E|` for a linear bump: `max(beta) + max(s |beta'|)`.
pub const LINEAR_SLOPE: f64 = 1.0 + PROFILE_RADIAL_SLOPE;
/// Default ratio between bump radius and jump length.
pub const DEFAULT_LAMBDA: f64 = 4.0;

/// Quintic smoothstep bump `1 - 10 s^3 + 15 s^4 - 6 s^5` on `[0, 1]`, zero beyond.
pub fn profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let s3 = s * s * s;
        1.0 - 10.0 * s3 + 15.0 * s3 * s - 6.0 * s3 * s * s
    }
}

pub fn profile_derivative(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s;
        -30.0 * s * s * t * t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineBase {
    pub name: String,
    /// Row-major `k x k` matrix.
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl AffineBase {
    /// `v = offset + A (u - anchor)`.
    pub fn new(name: &str, matrix: Vec<f64>, anchor: Vec<f64>, offset: Vec<f64>) -> Self {
        AffineBase {
            name: name.to_string(),
            matrix,
            offset,
            anchor,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn jacobian(&self) -> Matrix {
        let k = self.dim();
        DMatrix::from_row_slice(k, k, &self.matrix)
    }

    fn apply(&self, u: &Point) -> Point {
        let a = DVector::from_column_slice(&self.anchor);
        DVector::from_column_slice(&self.offset) + self.jacobian() * (u - a)
    }

    fn invert(&self, v: &Point) -> Option<Point> {
        let inv = self.jacobian().try_inverse()?;
        let a = DVector::from_column_slice(&self.anchor);
        Some(a + inv * (v - DVector::from_column_slice(&self.offset)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    Translate,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub kind: BumpKind,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Displacement `q - p` for translations, row-major `E` for linear bumps.
    pub payload: Vec<f64>,
}

impl Bump {
    fn center(&self) -> Point {
        DVector::from_column_slice(&self.center)
    }

    fn matrix(&self) -> Matrix {
        let k = self.center.len();
        DMatrix::from_row_slice(k, k, &self.payload)
    }

    pub fn value_bound(&self) -> f64 {
        match self.kind {
            BumpKind::Translate => DVector::from_column_slice(&self.payload).norm(),
            BumpKind::Linear => op_norm(&self.matrix()) * self.radius,
        }
    }

    /// Bound on `sup |D h - Id|`.
    pub fn slope_bound(&self) -> f64 {
        match self.kind {
            BumpKind::Translate => {
                DVector::from_column_slice(&self.payload).norm() * PROFILE_SLOPE / self.radius
            }
            BumpKind::Linear => op_norm(&self.matrix()) * LINEAR_SLOPE,
        }
    }

    /// C1 bound of `h o G - G` given `sup |DG| <= dg_sup`.
    pub fn c1_bound(&self, dg_sup: f64) -> f64 {
        self.value_bound().max(self.slope_bound() * dg_sup)
    }

    fn overlaps(&self, other: &Bump, target: &CrossSection) -> bool {
        target.chart_distance(&self.center(), &other.center()) < self.radius + other.radius
    }

    /// `h(v) - v`.
    fn displacement(&self, v: &Point, target: &CrossSection) -> Point {
        let rel = target.diff(v, &self.center());
        let s = rel.norm() / self.radius;
        let b = profile(s);
        if b == 0.0 {
            return DVector::zeros(v.len());
        }
        match self.kind {
            BumpKind::Translate => DVector::from_column_slice(&self.payload) * b,
            BumpKind::Linear => self.matrix() * rel * b,
        }
    }

    fn jacobian(&self, v: &Point, target: &CrossSection) -> Matrix {
        let k = v.len();
        let rel = target.diff(v, &self.center());
        let dist = rel.norm();
        let s = dist / self.radius;
        let mut jac = DMatrix::identity(k, k);
        if s >= 1.0 {
            return jac;
        }
        let grad = if dist > 0.0 {
            &rel * (profile_derivative(s) / (self.radius * dist))
        } else {
            DVector::zeros(k)
        };
        match self.kind {
            BumpKind::Translate => {
                jac += DVector::from_column_slice(&self.payload) * grad.transpose();
            }
            BumpKind::Linear => {
                let e = self.matrix();
                jac += &e * profile(s) + (&e * &rel) * grad.transpose();
            }
        }
        jac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub base: AffineBase,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    pub source: CrossSection,
    pub target: CrossSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub hausdorff_gap: f64,
    pub landing_transversal: bool,
    /// `None` encodes the `+inf` marker.
    pub tau1_sup_bound: Option<f64>,
    pub verdict: bool,
}

impl Impulse {
    pub fn new(base: AffineBase, source: CrossSection, target: CrossSection) -> Self {
        Impulse {
            base,
            bumps: Vec::new(),
            source,
            target,
        }
    }

    pub fn apply(&self, u: &Point) -> Result<Point> {
        if !self.source.contains(u) {
            return Err(Error::Chart {
                section: self.source.name.clone(),
                u: u.iter().copied().collect(),
            });
        }
        Ok(self.apply_unchecked(u))
    }

    pub(crate) fn apply_unchecked(&self, u: &Point) -> Point {
        let mut v = self.base.apply(u);
        for b in &self.bumps {
            v += b.displacement(&v, &self.target);
        }
        self.target.wrap(&v)
    }

    pub fn jacobian(&self, u: &Point) -> Result<Matrix> {
        if !self.source.contains(u) {
            return Err(Error::Chart {
                section: self.source.name.clone(),
                u: u.iter().copied().collect(),
            });
        }
        let mut v = self.base.apply(u);
        let mut jac = self.base.jacobian();
        for b in &self.bumps {
            jac = b.jacobian(&v, &self.target) * jac;
            v += b.displacement(&v, &self.target);
        }
        Ok(jac)
    }

    /// `I^{-1}(v)`: bumps undone by fixed-point iteration (each is a
    /// contraction perturbation of the identity), then the base inverted.
    pub fn invert(&self, v: &Point) -> Option<Point> {
        let mut w = v.clone();
        for b in self.bumps.iter().rev() {
            let mut x = w.clone();
            for _ in 0..200 {
                let next = &w - b.displacement(&x, &self.target);
                let done = self.target.chart_distance(&next, &x) < 1e-15;
                x = next;
                if done {
                    break;
                }
            }
            w = x;
        }
        let u = self.base.invert(&w)?;
        Some(self.source.wrap(&u))
    }

    /// Upper bound of `sup |DI|` over the source chart: the worst overlap
    /// cluster of bumps compounds its slopes.
    pub fn jacobian_sup_bound(&self) -> f64 {
        let roots = clusters(&self.bumps, &self.target);
        let mut growth = vec![1.0; self.bumps.len()];
        for (b, r) in self.bumps.iter().zip(&roots) {
            growth[*r] *= 1.0 + b.slope_bound();
        }
        op_norm(&self.base.jacobian()) * growth.into_iter().fold(1.0, f64::max)
    }

    /// Analytic C1 distance between `self` and `self` followed by `extra`.
    ///
    /// Each bump maps its support ball onto itself, so at any point only the
    /// bumps of one overlap cluster act: costs add up inside a cluster (with
    /// the derivative growth of the earlier bumps a bump overlaps) and the
    /// distance is the worst cluster.
    pub fn stack_bound(&self, extra: &[Bump]) -> f64 {
        let base_sup = self.jacobian_sup_bound();
        let roots = clusters(extra, &self.target);
        let mut cost = vec![0.0; extra.len()];
        for (k, b) in extra.iter().enumerate() {
            let mut g = base_sup;
            for prev in &extra[..k] {
                if prev.overlaps(b, &self.target) {
                    g *= 1.0 + prev.slope_bound();
                }
            }
            cost[roots[k]] += b.c1_bound(g);
        }
        cost.into_iter().fold(0.0, f64::max)
    }

    fn same_sections(&self, other: &Impulse) -> bool {
        self.source == other.source && self.target == other.target
    }

    /// Points at which to compare two impulses: a chart grid plus dense
    /// polar samples of the pre-images of every bump support.
    fn comparison_samples(&self, other: &Impulse) -> Vec<Point> {
        let k = self.source.chart_dim();
        let n = if k == 1 {
            let width = self.source.chart_box[0][1] - self.source.chart_box[0][0];
            ((width / self.source.boundary_margin).ceil() as usize + 1).clamp(64, 20001)
        } else {
            161
        };
        let mut pts = self.source.grid(n, 0.0);
        for imp in [self, other] {
            for b in &imp.bumps {
                let c = b.center();
                let dirs: Vec<Point> = if k == 1 {
                    vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])]
                } else {
                    (0..48)
                        .map(|i| {
                            let a = std::f64::consts::TAU * i as f64 / 48.0;
                            DVector::from_vec(vec![a.cos(), a.sin()])
                        })
                        .collect()
                };
                for d in &dirs {
                    for j in 0..=200 {
                        let v = &c + d * (b.radius * j as f64 / 200.0);
                        // undo earlier bumps approximately through the plain base
                        if let Some(u) = imp.base.invert(&imp.target.wrap(&v)) {
                            let u = imp.source.wrap(&u);
                            if imp.source.contains(&u) {
                                pts.push(u);
                            }
                        }
                    }
                }
            }
        }
        pts
    }

    /// `max(sup |I1 - I2|, sup |DI1 - DI2|)` by dense sampling.
    pub fn sampled_c1_distance(&self, other: &Impulse) -> Result<f64> {
        if !self.same_sections(other) {
            return Err(Error::IncompatibleSections);
        }
        let mut worst = 0.0_f64;
        for u in self.comparison_samples(other) {
            let dv = self
                .target
                .chart_distance(&self.apply_unchecked(&u), &other.apply_unchecked(&u));
            let dj = op_norm(&(self.jacobian(&u)? - other.jacobian(&u)?));
            worst = worst.max(dv).max(dj);
        }
        Ok(worst)
    }

    fn extra_bumps<'a>(&self, other: &'a Impulse) -> Option<&'a [Bump]> {
        (self.base == other.base
            && other.bumps.len() >= self.bumps.len()
            && other.bumps[..self.bumps.len()] == self.bumps[..])
            .then(|| &other.bumps[self.bumps.len()..])
    }

    fn support_inside(&self, center: &Point, radius: f64) -> bool {
        (0..center.len()).all(|i| {
            if self.target.periodic.get(i).copied().unwrap_or(false) {
                radius < std::f64::consts::PI
            } else {
                let [lo, hi] = self.target.chart_box[i];
                center[i] - radius >= lo - 1e-12 && center[i] + radius <= hi + 1e-12
            }
        })
    }

    fn push_checked(&self, bump: Bump, eps: f64) -> Result<Impulse> {
        self.with_bumps(vec![bump], eps)
    }

    /// Append a whole stack of bumps, checking supports and the joint C1 bound once.
    pub fn with_bumps(&self, extra: Vec<Bump>, eps: f64) -> Result<Impulse> {
        for bump in &extra {
            if !self.support_inside(&bump.center(), bump.radius) {
                return Err(Error::SupportOutsideChart {
                    center: bump.center.clone(),
                    radius: bump.radius,
                });
            }
        }
        let bound = self.stack_bound(&extra);
        if bound > eps || extra.iter().any(|b| b.slope_bound() >= 1.0) {
            return Err(Error::BudgetExceeded { bound, budget: eps });
        }
        let mut j = self.clone();
        j.bumps.extend(extra);
        Ok(j)
    }

    /// `J = h o I` with `h(p) = q`, `h = id` outside the ball of radius
    /// `lambda |q - p|` around `p`.
    pub fn bump_translate(&self, p: &Point, q: &Point, eps: f64, lambda: f64) -> Result<Impulse> {
        let d = self.target.diff(q, p);
        let len = d.norm();
        if len == 0.0 {
            return Ok(self.clone());
        }
        let bump = Bump {
            kind: BumpKind::Translate,
            center: p.iter().copied().collect(),
            radius: lambda * len,
            payload: d.iter().copied().collect(),
        };
        self.push_checked(bump, eps)
    }

    /// `J = h o I` with `h(p) = p`, `Dh(p) = Id + E`, `h = id` outside the ball of radius `r`.
    pub fn bump_linear(&self, p: &Point, e: &Matrix, r: f64, eps: f64) -> Result<Impulse> {
        if e.iter().all(|v| *v == 0.0) {
            return Ok(self.clone());
        }
        let bump = Bump {
            kind: BumpKind::Linear,
            center: p.iter().copied().collect(),
            radius: r,
            payload: e.transpose().iter().copied().collect(),
        };
        self.push_checked(bump, eps)
    }
}

/// Representative index of each bump's overlap cluster.
fn clusters(bumps: &[Bump], target: &CrossSection) -> Vec<usize> {
    fn root(c: &mut [usize], mut i: usize) -> usize {
        while c[i] != i {
            c[i] = c[c[i]];
            i = c[i];
        }
        i
    }
    let n = bumps.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if bumps[i].overlaps(&bumps[j], target) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).map(|i| root(&mut parent, i)).collect()
}

/// `d_C1(I1, I2)`: analytic when `I2` is `I1` followed by extra bumps, sampled otherwise.
pub fn c1_distance(i1: &Impulse, i2: &Impulse) -> Result<f64> {
    if !i1.same_sections(i2) {
        return Err(Error::IncompatibleSections);
    }
    if let Some(extra) = i1.extra_bumps(i2) {
        return Ok(i1.stack_bound(extra));
    }
    if let Some(extra) = i2.extra_bumps(i1) {
        return Ok(i2.stack_bound(extra));
    }
    i1.sampled_c1_distance(i2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;
    use crate::sections::SectionGeometry;
    use proptest::prelude::*;

    fn line(name: &str, lo: f64, hi: f64) -> CrossSection {
        CrossSection::new(
            name,
            SectionGeometry::Line {
                origin: [0.0, 0.0],
                direction: [1.0, 0.0],
            },
            vec![[lo, hi]],
        )
    }

    fn annulus(slope: f64) -> Impulse {
        let d = line("D", 1.0, 2.0);
        let dhat = CrossSection::new(
            "Dhat",
            SectionGeometry::Line {
                origin: [0.0, 0.0],
                direction: [-1.0, 0.0],
            },
            vec![[1.0, 1.5]],
        );
        Impulse::new(AffineBase::new("annulus", vec![slope], vec![1.0], vec![1.0]), d, dhat)
    }

    fn identity_1d() -> Impulse {
        Impulse::new(
            AffineBase::new("identity", vec![1.0], vec![0.0], vec![0.0]),
            line("S", -1.0, 1.0),
            line("T", -1.0, 1.0),
        )
    }

    #[test]
    fn profile_shape() {
        assert_eq!(profile(0.0), 1.0);
        assert_eq!(profile(1.0), 0.0);
        assert_eq!(profile_derivative(0.0), 0.0);
        assert_eq!(profile_derivative(1.0), 0.0);
        let n = 100_000;
        let (mut m1, mut m2) = (0.0_f64, 0.0_f64);
        for i in 0..=n {
            let s = i as f64 / n as f64;
            m1 = m1.max(profile_derivative(s).abs());
            m2 = m2.max(profile(s) + s * profile_derivative(s).abs());
        }
        assert!((m1 - PROFILE_SLOPE).abs() < 1e-9);
        assert!(m2 <= LINEAR_SLOPE);
        // C1 regularity: the derivative matches central differences
        for i in 1..50 {
            let s = i as f64 / 50.0;
            let fd = (profile(s + 1e-6) - profile(s - 1e-6)) / 2e-6;
            assert!((fd - profile_derivative(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn base_maps() {
        let i = annulus(0.5);
        assert!((i.apply(&point(&[1.0])).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((i.apply(&point(&[2.0])).unwrap()[0] - 1.5).abs() < 1e-15);
        assert_eq!(i.jacobian(&point(&[1.3])).unwrap()[(0, 0)], 0.5);
        assert!(matches!(i.apply(&point(&[2.5])), Err(Error::Chart { .. })));
        let back = i.invert(&point(&[1.2])).unwrap();
        assert!((back[0] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn c1_distance_of_affine_bases() {
        let a = annulus(0.5);
        assert_eq!(c1_distance(&a, &a).unwrap(), 0.0);
        let b = annulus(0.6);
        assert!((c1_distance(&a, &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn translate_bump_example() {
        let i = identity_1d();
        let j = i.bump_translate(&point(&[0.0]), &point(&[0.01]), 1.0, DEFAULT_LAMBDA).unwrap();
        let b = &j.bumps[0];
        assert!((b.radius - 0.04).abs() < 1e-15);
        assert!((b.value_bound() - 0.01).abs() < 1e-15);
        assert!((b.slope_bound() - 0.01 * 1.875 / 0.04).abs() < 1e-12);
        // exact hit and identity derivative at the centre
        assert_eq!(j.apply(&point(&[0.0])).unwrap()[0], 0.01);
        assert!((j.jacobian(&point(&[0.0])).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        // untouched outside the support
        assert_eq!(j.apply(&point(&[0.05])).unwrap()[0], 0.05);
        let d = c1_distance(&i, &j).unwrap();
        assert!((d - 0.01 * 1.875 / 0.04).abs() < 1e-12);
        assert!(i.sampled_c1_distance(&j).unwrap() <= d * 1.05);
        // zero jump is dropped
        let same = i.bump_translate(&point(&[0.2]), &point(&[0.2]), 1.0, DEFAULT_LAMBDA).unwrap();
        assert!(same.bumps.is_empty());
        assert!(matches!(
            i.bump_translate(&point(&[0.0]), &point(&[0.01]), 0.1, DEFAULT_LAMBDA),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            i.bump_translate(&point(&[0.97]), &point(&[0.98]), 1.0, DEFAULT_LAMBDA),
            Err(Error::SupportOutsideChart { .. })
        ));
    }

    #[test]
    fn linear_bump_scales_derivative() {
        let i = annulus(0.5);
        let p = point(&[1.25]);
        let zero = i.bump_linear(&p, &DMatrix::zeros(1, 1), 0.1, 1.0).unwrap();
        assert_eq!(zero, i);
        let e = DMatrix::from_element(1, 1, 0.1);
        let j = i.bump_linear(&p, &e, 0.1, 1.0).unwrap();
        let pre = i.invert(&p).unwrap();
        let dj = j.jacobian(&pre).unwrap()[(0, 0)];
        assert!((dj - 1.1 * 0.5).abs() < 1e-14);
        assert!((j.apply(&pre).unwrap()[0] - 1.25).abs() < 1e-15);
        // stacking over an existing bump is allowed
        let k = j.bump_linear(&point(&[1.27]), &e, 0.05, 1.0).unwrap();
        assert_eq!(k.bumps.len(), 2);
        let back = k.invert(&k.apply(&point(&[1.52])).unwrap()).unwrap();
        assert!((back[0] - 1.52).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stack_bound_dominates_sampling(
            p1 in -0.5f64..0.5, d1 in -0.02f64..0.02,
            p2 in -0.5f64..0.5, e2 in -0.2f64..0.2, r2 in 0.05f64..0.3,
        ) {
            let i = identity_1d();
            let j = i.bump_translate(&point(&[p1]), &point(&[p1 + d1]), 1.0, DEFAULT_LAMBDA).unwrap();
            let j = j.bump_linear(&point(&[p2]), &DMatrix::from_element(1, 1, e2), r2, 1.0).unwrap();
            let analytic = c1_distance(&i, &j).unwrap();
            let sampled = i.sampled_c1_distance(&j).unwrap();
            prop_assert!(sampled <= analytic * 1.05 + 1e-15);
        }
    }
}
