//! Periods of billiard orbits in the unit disk for rational angles, compared
//! with `2 q cos(theta)` and with the chord-count rule.

use std::f64::consts::PI;

use impulsive::catalog::billiard_chord_count;
use impulsive::flow::{suspension_return_time, FieldKind, SystemField};
use impulsive::linalg::point;

fn main() -> impulsive::Result<()> {
    let sys = SystemField::new(FieldKind::DiskBilliard);
    println!("{:>6} {:>8} {:>14} {:>14} {:>14}", "p/q", "chords", "simulated", "2q cos", "chords*2cos");
    for (p, q) in [(1u32, 4u32), (1, 3), (2, 5), (1, 6), (3, 8), (2, 7)] {
        let theta = p as f64 * PI / q as f64;
        let Some((t, n)) = suspension_return_time(&sys, &point(&[0.0, theta, 0.0]), 1e-9, 10_000)? else {
            println!("{p}/{q}: no return");
            continue;
        };
        let chords = billiard_chord_count(p, q);
        println!(
            "{:>6} {n:>8} {t:>14.10} {:>14.10} {:>14.10}",
            format!("{p}/{q}"),
            2.0 * q as f64 * theta.cos(),
            chords as f64 * 2.0 * theta.cos()
        );
    }
    Ok(())
}
