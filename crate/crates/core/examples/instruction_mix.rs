//! Retired-instruction mix per kernel and code region.

use fenn::harness::run_instr_mix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for mix in run_instr_mix(42)? {
        println!("{}:", mix.kernel);
        for row in mix.rows.iter().filter(|r| r.count > 0) {
            println!("  {:<18} {:<22} {:>9} {:>6.1}%", row.region, row.class.name(), row.count, 100.0 * row.fraction);
        }
    }
    Ok(())
}
