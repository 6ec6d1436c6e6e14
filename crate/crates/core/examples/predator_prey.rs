//! Predator-prey flow with a prey-shifting, predator-halving impulse: the
//! segment orbit on the prey axis against its quadrature oracle.

use impulsive::catalog::{default_example, predator_prey_multiplier_oracle, predator_prey_period_oracle};
use impulsive::flow::eval_field;
use impulsive::linalg::point;
use impulsive::periodic::{find_periodic, DEFAULT_TOL};
use impulsive::semiflow::trajectory;

fn main() -> impulsive::Result<()> {
    let spec = default_example("predator_prey")?;
    println!("field at (2, 1): {:?}", eval_field(&spec.system, &point(&[2.0, 1.0]))?.as_slice());
    let sys = spec.build()?;
    let orbit = find_periodic(&sys, &point(&[0.3]), 1, DEFAULT_TOL)?;
    println!(
        "segment orbit: period {:.10} (quadrature {:.10}), multiplier {:.6} (quadrature {:.6})",
        orbit.period,
        predator_prey_period_oracle(),
        orbit.multipliers[0].0,
        predator_prey_multiplier_oracle()
    );
    let tr = trajectory(&sys, &point(&[0.5, 0.6]), 3.0)?;
    println!("from (0.5, 0.6): {} jumps by t = 3", tr.jumps.len());
    for j in tr.jumps.iter().take(6) {
        println!("  jump {} at t = {:.6}: {:?} -> {:?}", j.n, j.time, j.pre, j.post);
    }
    Ok(())
}
