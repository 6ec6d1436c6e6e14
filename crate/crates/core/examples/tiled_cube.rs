//! Tiled cubes and perturbation-box certificates on the annulus.

use impulsive::catalog::default_example;
use impulsive::chains::{tile_cube, tiling_radius, verify_box};

fn main() -> impulsive::Result<()> {
    for depth in 0..4 {
        let t = tile_cube(&[0.0, 0.0], 3.0, depth);
        println!(
            "depth {depth}: {} tiles, measure {:.6} = (2 alpha)^2 = {:.6}",
            t.tiles.len(),
            t.measure(),
            (2.0 * tiling_radius(depth)).powi(2)
        );
    }
    let sys = default_example("annulus")?.build()?;
    for (c, w, n) in [(1.6, 0.02, 2), (1.6, 0.05, 3), (1.0, 0.05, 1), (1.3, 0.1, 1)] {
        let cert = verify_box(&sys, &[c], w, n, 0.1);
        println!("box [{:.2}, {:.2}] order {n}: disjoint {}, witness {:?} {:?}", c - w, c + w, cert.disjoint, cert.witness, cert.witness_kind);
    }
    Ok(())
}
