//! Rotation in the annulus with a radius-averaging impulse: find the
//! attracting periodic orbit, then follow it as the impulse slope moves.

use std::collections::BTreeMap;

use impulsive::catalog::make_example;
use impulsive::linalg::point;
use impulsive::periodic::{continue_orbit, find_periodic, DEFAULT_TOL};

fn main() -> impulsive::Result<()> {
    let spec = make_example("annulus", &BTreeMap::new())?;
    let sys = spec.build()?;
    let orbit = find_periodic(&sys, &point(&[1.3]), 1, DEFAULT_TOL)?;
    println!(
        "slope 0.50: radius {:.12}, period {:.12}, multiplier {:.6}, {:?}",
        orbit.point(0)[0],
        orbit.period,
        orbit.multipliers[0].0,
        orbit.tag
    );
    let mut current = orbit;
    let mut from = sys;
    for slope in [0.55, 0.6, 0.7, 0.8, 0.9] {
        let mut p = BTreeMap::new();
        p.insert("slope".to_string(), slope);
        let j = make_example("annulus", &p)?.impulse;
        current = continue_orbit(&from, &current, &j, 0.1)?;
        from = from.with_impulse(j)?;
        println!("slope {slope:.2}: multiplier {:.6}, period {:.12}", current.multipliers[0].0, current.period);
    }
    Ok(())
}
