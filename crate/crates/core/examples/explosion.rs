//! Radial contraction in the disk: with the identity impulse every orbit
//! falls into the origin; pushing the landing circle out by delta makes
//! every circle point periodic and the recurrent set jumps away.

use std::collections::BTreeMap;

use impulsive::catalog::make_example;
use impulsive::chains::{ambient_recurrent_set, build_graph, chain_recurrent_cells, hausdorff_distance};
use impulsive::semiflow::ImpulsiveSystem;

fn main() -> impulsive::Result<()> {
    let mut flat = BTreeMap::new();
    flat.insert("delta".to_string(), 0.0);
    let flat = make_example("radial_disk", &flat)?;
    let base = ImpulsiveSystem::new_allow_invalid(flat.system, flat.impulse)?;
    let set0 = ambient_recurrent_set(&base, &build_graph(&base, 0.1, 0.05), 10);
    for delta in [0.1, 0.25, 0.5, 1.0] {
        let mut p = BTreeMap::new();
        p.insert("delta".to_string(), delta);
        let sys = make_example("radial_disk", &p)?.build()?;
        let g = build_graph(&sys, 0.1, 0.05);
        let set = ambient_recurrent_set(&sys, &g, 10);
        println!(
            "delta {delta:.2}: {} of {} cells chain recurrent, Hausdorff distance to delta = 0: {:.4}",
            chain_recurrent_cells(&g).len(),
            g.len(),
            hausdorff_distance(&set0, &set)
        );
    }
    Ok(())
}
