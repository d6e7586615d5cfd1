//! Poisson variates from the vector RNG with a multiply-until-threshold
//! loop, compared with the exact distribution.

use fenn::harness::run_poisson;
use fenn::reference::poisson_pmf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = std::env::args().nth(1).map_or(Ok(5.0), |s| s.parse())?;
    let run = run_poisson(lambda, 3200, 42)?;
    println!(
        "lambda {lambda}: mean {:.3}, {:.1} cycles per 32 variates, chi2 {:.1} vs critical {:.1}",
        run.mean(),
        run.cycles_per_vector(),
        run.gof.statistic,
        run.gof.critical
    );
    let n = run.variates.len() as f64;
    for k in 0..=run.variates.iter().copied().max().unwrap_or(0) {
        let freq = run.variates.iter().filter(|&&v| v == k).count() as f64 / n;
        println!("{k:>3} {:.4} {:.4} {}", freq, poisson_pmf(lambda, k as u64), "*".repeat((freq * 200.0) as usize));
    }
    Ok(())
}
