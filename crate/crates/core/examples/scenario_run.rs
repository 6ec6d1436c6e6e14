//! Run every canonical example scenario into a temporary directory.

use impulsive::catalog::EXAMPLE_NAMES;
use impulsive::scenario::{canonical_scenario, run_scenario};

fn main() -> impulsive::Result<()> {
    let root = std::env::temp_dir().join("impulsive-scenarios");
    for name in EXAMPLE_NAMES {
        let sc = canonical_scenario(name)?;
        let text = serde_json::to_string_pretty(&sc)?;
        let out = run_scenario(&sc, &text, &root, false)?;
        println!("[{name}] exit {}", out.status.exit_code());
        print!("{}", out.summary);
    }
    Ok(())
}
