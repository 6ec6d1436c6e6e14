//! Closing on the radial disk and on an irrational torus rotation.

use std::collections::BTreeMap;

use impulsive::catalog::{default_example, make_example};
use impulsive::connect::{close_orbit, close_to_periodic, density_experiment, ClosingParams};
use impulsive::linalg::point;

fn main() -> impulsive::Result<()> {
    let params = ClosingParams::default();
    let disk = default_example("radial_disk")?.build()?;
    let pc = close_to_periodic(&disk, &point(&[1.0]), 0.1, 0.1, 0.05, &params)?;
    println!(
        "radial disk: {} bumps, C1 cost {:.4}, multiplier {:?}, {:?}",
        pc.bump_count, pc.c1_cost, pc.orbit.multipliers, pc.orbit.tag
    );
    let rep = density_experiment(&disk, 0.1, 0.1, 0.05, None, &params);
    println!("radial disk density: {}/{} (fraction {})", rep.successes, rep.tested, rep.fraction);

    let mut p = BTreeMap::new();
    p.insert("alpha".to_string(), 2f64.sqrt() - 1.0);
    let torus = make_example("torus_linear", &p)?.build()?;
    let quick = ClosingParams { max_halvings: 0, ..params };
    let c = close_orbit(&torus, &point(&[1.0]), &point(&[4.0]), 0.1, 1e-3, &quick)?;
    println!(
        "torus: pseudo-orbit of {} returns, {} bumps, C1 cost {:.4}",
        c.plan.pseudo_orbit.len() - 1,
        c.plan.jumps.len(),
        c.c1_cost
    );
    Ok(())
}
