//! Ready-made impulsive systems with their known facts.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FieldKind, SystemField};
use crate::impulse::{AffineBase, Impulse};
use crate::sections::{CrossSection, SectionGeometry};
use crate::semiflow::ImpulsiveSystem;

pub const EXAMPLE_NAMES: [&str; 6] = [
    "annulus",
    "predator_prey",
    "radial_disk",
    "torus_linear",
    "disk_billiard",
    "lorenz_skew",
];

/// How a fact is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Closed-form computation from the system's coordinates.
    ClosedForm,
    /// Independent numerical oracle (quadrature, direct simulation).
    Numerical,
    /// Value quoted with the example definition, not recomputed.
    Reference,
    /// Interface contract.
    Contract,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub kind: String,
    pub quantity: String,
    pub value: f64,
    pub basis: Basis,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

fn fact(kind: &str, quantity: &str, value: f64, basis: Basis, tolerance: f64) -> Fact {
    Fact {
        kind: kind.into(),
        quantity: quantity.into(),
        value,
        basis,
        tolerance,
        note: String::new(),
    }
}

fn noted(mut f: Fact, note: &str) -> Fact {
    f.note = note.into();
    f
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub system: SystemField,
    pub impulse: Impulse,
    /// Build even though validation fails (invalidity is the point of the demo).
    pub allow_invalid: bool,
    /// Canonical seed for periodic-orbit searches, in the landing chart.
    pub seed: Vec<f64>,
    pub facts: Vec<Fact>,
}

impl ExampleSpec {
    pub fn build(&self) -> Result<ImpulsiveSystem> {
        if self.allow_invalid {
            ImpulsiveSystem::new_allow_invalid(self.system.clone(), self.impulse.clone())
        } else {
            ImpulsiveSystem::new(self.system.clone(), self.impulse.clone())
        }
    }

    pub fn d(&self) -> &CrossSection {
        &self.impulse.source
    }

    pub fn dhat(&self) -> &CrossSection {
        &self.impulse.target
    }

    pub fn fact(&self, quantity: &str) -> Option<&Fact> {
        self.facts.iter().find(|f| f.quantity == quantity)
    }
}

fn take(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_keys(name: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::BadParams(format!("`{name}` takes no parameter `{k}`")));
        }
    }
    Ok(())
}

fn line(name: &str, origin: [f64; 2], direction: [f64; 2], lo: f64, hi: f64) -> CrossSection {
    CrossSection::new(name, SectionGeometry::Line { origin, direction }, vec![[lo, hi]])
}

fn affine_1d(name: &str, slope: f64, anchor: f64, offset: f64) -> AffineBase {
    AffineBase::new(name, vec![slope], vec![anchor], vec![offset])
}

/// `(1/2) exp(int_{1/2}^{1} (x - 1) / (x (3 - x)) dx)` by composite Simpson.
pub fn predator_prey_multiplier_oracle() -> f64 {
    let f = |x: f64| (x - 1.0) / (x * (3.0 - x));
    let n = 2000;
    let (a, b) = (0.5, 1.0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    0.5 * (s * h / 3.0).exp()
}

/// Flight time along the prey axis from `x = 1/2` to `x = 1` by composite Simpson.
pub fn predator_prey_period_oracle() -> f64 {
    let f = |x: f64| 1.0 / (x * (3.0 - x));
    let n = 2000;
    let (a, b) = (0.5, 1.0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Number of chords before a billiard orbit with angle `(p/q) pi` closes up.
pub fn billiard_chord_count(p: u32, q: u32) -> u32 {
    // rotation per bounce is pi (q - 2p) / q; closing needs a multiple of 2 pi
    let num = q.abs_diff(2 * p);
    let den = 2 * q;
    let g = gcd(num, den);
    if num == 0 {
        1
    } else {
        den / g
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Quotient map of the Lorenz-type return: `f(x) = sign(x) (c |x|^a - 1)`.
pub fn lorenz_quotient(x: f64, c: f64, a: f64) -> f64 {
    x.signum() * (c * x.abs().powf(a) - 1.0)
}

pub fn lorenz_quotient_derivative(x: f64, c: f64, a: f64) -> f64 {
    c * a * x.abs().powf(a - 1.0)
}

pub fn make_example(name: &str, params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    let spec = match name {
        "annulus" => annulus(params)?,
        "predator_prey" => predator_prey(params)?,
        "radial_disk" => radial_disk(params)?,
        "torus_linear" => torus_linear(params)?,
        "disk_billiard" => disk_billiard(params)?,
        "lorenz_skew" => lorenz_skew(params)?,
        other => return Err(Error::UnknownExample(other.to_string())),
    };
    Ok(spec)
}

pub fn default_example(name: &str) -> Result<ExampleSpec> {
    make_example(name, &BTreeMap::new())
}

pub fn expected_facts(name: &str) -> Result<Vec<Fact>> {
    Ok(default_example(name)?.facts)
}

fn annulus(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("annulus", params, &["slope"])?;
    let slope = take(params, "slope", 0.5);
    if !(slope > 0.0 && slope < 1.0) {
        return Err(Error::BadParams("annulus slope must lie in (0, 1)".into()));
    }
    let d = line("D", [0.0, 0.0], [1.0, 0.0], 1.0, 2.0).with_phase_edge(0, 0);
    let dhat = line("Dhat", [0.0, 0.0], [-1.0, 0.0], 1.0, 1.5).with_phase_edge(0, 0);
    let impulse = Impulse::new(affine_1d("radius_average", slope, 1.0, 1.0), d, dhat);
    let facts = vec![
        fact("periodic", "fixed_radius", 1.0, Basis::ClosedForm, 1e-8),
        fact("periodic", "multiplier", slope, Basis::ClosedForm, 1e-8),
        fact("periodic", "period", PI, Basis::ClosedForm, 1e-8),
        fact("validation", "hausdorff_gap", 2.0, Basis::ClosedForm, 1e-9),
        fact("hitting", "tau1_sup", 0.0, Basis::ClosedForm, 1e-8),
        noted(
            fact("omega", "arc_start_angle", PI, Basis::ClosedForm, 1e-9),
            "the recurrent arc implied by the coordinates is theta in [pi, 2 pi]; \
             the published description gives [3 pi / 2, 2 pi]",
        ),
    ];
    Ok(ExampleSpec {
        name: "annulus".into(),
        params: params.clone(),
        system: SystemField::new(FieldKind::AnnulusRotation),
        impulse,
        allow_invalid: false,
        seed: vec![1.05],
        facts,
    })
}

fn predator_prey(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("predator_prey", params, &[])?;
    let d = line("D", [1.0, 0.0], [0.0, 1.0], 0.0, 2.0).with_phase_edge(0, 0);
    let dhat = line("Dhat", [0.5, 0.0], [0.0, 1.0], 0.0, 1.0).with_phase_edge(0, 0);
    let impulse = Impulse::new(affine_1d("halve_predators", 0.5, 0.0, 0.0), d, dhat);
    let period = predator_prey_period_oracle();
    let facts = vec![
        fact("equilibrium", "interior_fixed_point_x", 2.0, Basis::Reference, 0.0),
        fact("equilibrium", "interior_fixed_point_y", 1.0, Basis::Reference, 0.0),
        noted(
            fact("periodic", "period", period, Basis::Numerical, 1e-6),
            "quadrature of dx / (x (3 - x)) over [1/2, 1] equals ln(5/2) / 3; \
             the closed form ln(5) / 3 sometimes quoted is off by ln(2) / 3",
        ),
        fact("periodic", "multiplier", predator_prey_multiplier_oracle(), Basis::Numerical, 1e-6),
        fact("periodic", "multiplier_upper", 0.5, Basis::ClosedForm, 0.0),
    ];
    Ok(ExampleSpec {
        name: "predator_prey".into(),
        params: params.clone(),
        system: SystemField::new(FieldKind::PredatorPrey),
        impulse,
        allow_invalid: false,
        seed: vec![0.02],
        facts,
    })
}

fn radial_disk(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("radial_disk", params, &["delta"])?;
    let delta = take(params, "delta", 0.5);
    if !(0.0..=1.5).contains(&delta) {
        return Err(Error::BadParams("radial_disk delta must lie in [0, 1.5]".into()));
    }
    let circle = |name: &str, radius: f64| {
        CrossSection::new(name, SectionGeometry::Circle { radius }, vec![[-PI, PI]]).with_periodic(0)
    };
    let d = circle("D", 1.0);
    let dhat = circle("Dhat", 1.0 + delta);
    let impulse = Impulse::new(affine_1d("angle_identity", 1.0, 0.0, 0.0), d, dhat);
    let mut facts = vec![
        fact("validation", "hausdorff_gap", delta, Basis::ClosedForm, 1e-9),
        noted(
            fact("omega", "explosion_distance_lower", 1.0, Basis::Reference, 0.0),
            "the coordinates give a Hausdorff distance of 1 + delta between the recurrent sets; \
             the published value is 1, so only the lower bound is asserted",
        ),
        fact("omega", "explosion_distance", 1.0 + delta, Basis::ClosedForm, 0.05),
    ];
    if delta > 0.0 {
        facts.insert(0, fact("hitting", "tau1", (1.0 + delta).ln(), Basis::ClosedForm, 1e-9));
        facts.push(fact("periodic", "multiplier", 1.0, Basis::ClosedForm, 1e-8));
    }
    Ok(ExampleSpec {
        name: "radial_disk".into(),
        params: params.clone(),
        system: SystemField::new(FieldKind::RadialDisk),
        impulse,
        allow_invalid: delta == 0.0,
        seed: vec![0.3],
        facts,
    })
}

fn torus_linear(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("torus_linear", params, &["alpha", "landing", "shift"])?;
    let mut system = SystemField::new(FieldKind::TorusLinear);
    if let Some(a) = params.get("alpha") {
        system = system.with_param("alpha", *a);
    }
    let landing = take(params, "landing", 1.0);
    let shift = take(params, "shift", 0.0);
    if !(landing > 0.1 && landing < 2.0 * PI - 0.1) {
        return Err(Error::BadParams("torus_linear landing must lie in (0.1, 2 pi - 0.1)".into()));
    }
    let meridian = |name: &str, x0: f64| {
        CrossSection::new(name, SectionGeometry::TorusMeridian { x0 }, vec![[0.0, 2.0 * PI]]).with_periodic(0)
    };
    let d = meridian("D", 0.0);
    let dhat = meridian("Dhat", landing);
    let impulse = Impulse::new(affine_1d("meridian_shift", 1.0, 0.0, shift), d, dhat);
    let facts = vec![
        fact("wandering", "band_start", 0.0, Basis::Reference, 0.0),
        fact("wandering", "band_end", landing, Basis::Reference, 0.0),
        fact("hitting", "tau1", 2.0 * PI - landing, Basis::ClosedForm, 1e-9),
        fact("periodic", "rotation", system.param("alpha") * (2.0 * PI - landing) + shift, Basis::ClosedForm, 1e-9),
    ];
    Ok(ExampleSpec {
        name: "torus_linear".into(),
        params: params.clone(),
        system,
        impulse,
        allow_invalid: false,
        seed: vec![1.0],
        facts,
    })
}

fn disk_billiard(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("disk_billiard", params, &["theta", "half_width"])?;
    let theta = take(params, "theta", PI / 4.0);
    let hw = take(params, "half_width", 0.5);
    if !(theta.abs() < 1.4) || !(hw > 0.0 && hw < PI / 2.0) {
        return Err(Error::BadParams(
            "disk_billiard needs |theta| < 1.4 and half_width in (0, pi/2)".into(),
        ));
    }
    let arc = |name: &str, center: f64| {
        CrossSection::new(
            name,
            SectionGeometry::BilliardArc,
            vec![[center - hw, center + hw], [-1.4, 1.4]],
        )
        .with_derivative_axes(vec![0])
    };
    let d = arc("D", 0.0);
    let dhat = arc("Dhat", PI);
    let base = AffineBase::new(
        "antipodal_move",
        vec![1.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0],
        vec![PI, 0.0],
    );
    let impulse = Impulse::new(base, d, dhat);
    let facts = vec![
        fact("flight", "chord_length", 2.0 * theta.cos(), Basis::Reference, 1e-12),
        noted(
            fact("periodic", "flow_period", 8.0 * theta.cos(), Basis::Reference, 1e-9),
            "period of the pure billiard flow at theta = pi/4 is 2 q cos(theta) with q = 4",
        ),
        fact("hitting", "tau1_sup", 0.0, Basis::Reference, 1e-8),
        fact("periodic", "multiplier_modulus", 1.0, Basis::Reference, 1e-8),
    ];
    Ok(ExampleSpec {
        name: "disk_billiard".into(),
        params: params.clone(),
        system: SystemField::new(FieldKind::DiskBilliard),
        impulse,
        allow_invalid: false,
        seed: vec![PI, theta],
        facts,
    })
}

fn lorenz_skew(params: &BTreeMap<String, f64>) -> Result<ExampleSpec> {
    check_keys("lorenz_skew", params, &["c", "a", "interchanged"])?;
    let mut system = SystemField::new(FieldKind::LorenzSkew);
    for k in ["c", "a"] {
        if let Some(v) = params.get(k) {
            system = system.with_param(k, *v);
        }
    }
    let (c, a) = (system.param("c"), system.param("a"));
    if !(a > 0.0 && a < 1.0) || !(c > 1.0 && c < 2.0) || c * a <= 2f64.sqrt() {
        return Err(Error::BadParams(
            "lorenz_skew needs 0 < a < 1, 1 < c < 2 and c a > sqrt 2".into(),
        ));
    }
    let interchanged = take(params, "interchanged", 0.0) != 0.0;
    let level = |name: &str, l: f64| {
        CrossSection::new(name, SectionGeometry::PhaseLevel { level: l }, vec![[-1.0, 1.0], [-1.0, 1.0]])
    };
    let (d, dhat) = if interchanged {
        (level("D", 1.0), level("Dhat", 0.0))
    } else {
        (level("D", 0.0), level("Dhat", 1.0))
    };
    let base = AffineBase::new("level_transfer", vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]);
    let impulse = Impulse::new(base, d, dhat);
    // f'(x) >= c a on (0, 1]; checked on samples at construction
    let min_slope = (1..=1000)
        .map(|i| lorenz_quotient_derivative(i as f64 / 1000.0, c, a))
        .fold(f64::INFINITY, f64::min);
    if min_slope <= 2f64.sqrt() {
        return Err(Error::BadParams("quotient map is not expanding enough".into()));
    }
    let facts = vec![
        fact("expansion", "quotient_slope_min", min_slope, Basis::Reference, 0.0),
        fact("contraction", "fiber_contraction", 0.25, Basis::ClosedForm, 0.0),
        if interchanged {
            fact("hitting", "tau1_sup", f64::INFINITY, Basis::Reference, 0.0)
        } else {
            fact("hitting", "tau1_sup", 0.2, Basis::ClosedForm, 1e-2)
        },
    ];
    Ok(ExampleSpec {
        name: "lorenz_skew".into(),
        params: params.clone(),
        system,
        impulse,
        allow_invalid: interchanged,
        seed: vec![0.3, 0.1],
        facts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles() {
        let t = predator_prey_period_oracle();
        assert!((t - (2.5f64).ln() / 3.0).abs() < 1e-12);
        let m = predator_prey_multiplier_oracle();
        assert!(m < 0.5 && m > 0.45);
        assert_eq!(billiard_chord_count(1, 4), 4);
        assert_eq!(billiard_chord_count(1, 3), 6);
        assert_eq!(billiard_chord_count(2, 5), 10);
    }

    #[test]
    fn names_and_errors() {
        for name in EXAMPLE_NAMES {
            let spec = default_example(name).unwrap();
            assert_eq!(spec.name, name);
            assert!(!spec.facts.is_empty());
        }
        assert!(matches!(default_example("anosov"), Err(Error::UnknownExample(_))));
        let mut p = BTreeMap::new();
        p.insert("slope".to_string(), 1.5);
        assert!(matches!(make_example("annulus", &p), Err(Error::BadParams(_))));
        p.clear();
        p.insert("bogus".to_string(), 1.0);
        assert!(matches!(make_example("radial_disk", &p), Err(Error::BadParams(_))));
    }

    #[test]
    fn lorenz_quotient_expands() {
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!(lorenz_quotient_derivative(x, 1.9, 0.8) > 2f64.sqrt());
            assert!(lorenz_quotient(x, 1.9, 0.8).abs() <= 1.0);
        }
    }
}
