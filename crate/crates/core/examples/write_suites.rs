//! Regenerates the shipped benchmark suites under `suites/`.

use rtsched_core::bench::{desk_suite, save_suite, table2_suite};

fn main() -> Result<(), rtsched_core::Error> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites");
    save_suite(&table2_suite(), root.join("table2"))?;
    save_suite(&desk_suite(), root.join("desk"))?;
    Ok(())
}
