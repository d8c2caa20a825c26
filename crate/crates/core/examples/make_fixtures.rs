//! Regenerates the bundled six-state dataset.
//!
//! ```text
//! cargo run -p cointegra --example make_fixtures [-- <dir>]
//! ```

use std::path::PathBuf;

use cointegra::fixtures::{write_six_state_dataset, FIXTURE_SEED};

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/six_state"));
    write_six_state_dataset(&dir, FIXTURE_SEED)?;
    println!("wrote {}", dir.display());
    Ok(())
}
