//! Runs the finite-difference suite and prints the table.
//!
//! `cargo run --release --example gradcheck [module]`

use xlstm_unet::gradcheck::{format_table, run_suite};

fn main() -> xlstm_unet::Result<()> {
    let module = std::env::args().nth(1);
    let start = std::time::Instant::now();
    let report = run_suite(module.as_deref(), 0, None)?;
    print!("{}", format_table(&report));
    println!(
        "{} checks, worst relative error {:.3e}, {:.1}s",
        report.rows.len(),
        report.worst_rel_err(),
        start.elapsed().as_secs_f64()
    );
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
