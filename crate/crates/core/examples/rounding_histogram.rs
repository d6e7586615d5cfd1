//! Random S0.15 products on the simulated vector unit, one rounding mode
//! per pass, summarised as an error histogram in ulps.

use fenn::fixedpoint::RoundingMode;
use fenn::harness::run_rounding_hist;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hist = run_rounding_hist(21760, 42)?;
    println!("{} simulated cycles", hist.cycles);
    for mode in RoundingMode::ALL {
        let errors = hist.errors_for(mode);
        let mut bins = [0usize; 8];
        for e in errors {
            bins[(((e + 1.0) * 4.0).floor() as usize).min(7)] += 1;
        }
        let s = hist.summary(mode);
        println!("{mode}: mean {:+.4} ulp, range [{:+.3}, {:+.3}]", s.mean, s.min, s.max);
        for (i, n) in bins.iter().enumerate() {
            let lo = -1.0 + i as f64 / 4.0;
            println!("  [{lo:+.2}, {:+.2}) {}", lo + 0.25, "#".repeat(n * 60 / errors.len()));
        }
    }
    Ok(())
}
