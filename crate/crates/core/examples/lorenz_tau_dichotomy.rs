//! Skew-product Lorenz section model: the hitting-time derivative is bounded
//! for one choice of sections and blows up when the two are swapped.

use std::collections::BTreeMap;

use impulsive::catalog::{lorenz_quotient, lorenz_quotient_derivative, make_example};
use impulsive::linalg::point;
use impulsive::semiflow::{tau1_derivative_sup, validate, ImpulsiveSystem};
use impulsive::chains::transition_norm_bound;

fn main() -> impulsive::Result<()> {
    let (c, a) = (1.9, 0.8);
    for x in [0.05, 0.25, 0.5, 1.0] {
        println!("f({x}) = {:.6}, f'({x}) = {:.6}", lorenz_quotient(x, c, a), lorenz_quotient_derivative(x, c, a));
    }
    let normal = make_example("lorenz_skew", &BTreeMap::new())?.build()?;
    println!("tau1 derivative sup: {}", tau1_derivative_sup(&normal, 21));
    let mut p = BTreeMap::new();
    p.insert("interchanged".to_string(), 1.0);
    let spec = make_example("lorenz_skew", &p)?;
    let swapped = ImpulsiveSystem::new_allow_invalid(spec.system.clone(), spec.impulse.clone())?;
    println!("interchanged: tau1 derivative sup {}", tau1_derivative_sup(&swapped, 21));
    println!("interchanged: validation {:?}", validate(&spec.impulse, &spec.system));
    for c1 in [1e-2, 1e-4, 1e-6] {
        let rep = transition_norm_bound(&swapped, &point(&[c1, 0.2]), 1)?;
        println!("  c1 = {c1:e}: step bound {:.3e}, flagged {}", rep.step_bounds[0], rep.unbounded);
    }
    Ok(())
}
