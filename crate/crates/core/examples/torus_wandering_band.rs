//! Linear flow on the torus with the meridian x = 0 sent to x = 1: points in
//! the band between them are never visited again.

use std::collections::BTreeMap;

use impulsive::catalog::make_example;
use impulsive::linalg::point;
use impulsive::semiflow::trajectory;

fn main() -> impulsive::Result<()> {
    let mut p = BTreeMap::new();
    p.insert("alpha".to_string(), 2f64.sqrt() - 1.0);
    let sys = make_example("torus_linear", &p)?.build()?;
    let tr = trajectory(&sys, &point(&[1.0, 0.4]), 200.0)?;
    let mut in_band = 0;
    let mut samples = 0;
    for arc in &tr.arcs {
        for (_, x) in &arc.samples {
            samples += 1;
            if x[0] > 1e-9 && x[0] < 1.0 - 1e-9 {
                in_band += 1;
            }
        }
    }
    println!("{} jumps up to t = 200; {in_band} of {samples} samples inside the band 0 < x < 1", tr.jumps.len());
    let band_start = trajectory(&sys, &point(&[0.5, 0.4]), 20.0)?;
    println!(
        "a start inside the band jumps {} times and never re-enters it after t = {:.4}",
        band_start.jumps.len(),
        band_start.jumps.first().map(|j| j.time).unwrap_or(f64::NAN)
    );
    Ok(())
}
