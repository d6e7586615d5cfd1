//! One population of ALIF neurons under the pause stimulus, simulated with
//! round-to-zero and with stochastic rounding against a float64 reference.

use fenn::fixedpoint::RoundingMode;
use fenn::harness::{alif_stimulus, Regime};
use fenn::kernels::{self, build_alif, AddMode, NumericConfig};
use fenn::reference::{alif_reference, nrmse};
use fenn::LANES;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stimulus = alif_stimulus(Regime::Pause, 7);
    let counts: Vec<[u16; LANES]> = stimulus.counts.iter().map(|&c| [c; LANES]).collect();
    for rounding in [RoundingMode::RoundToZero, RoundingMode::Stochastic] {
        let num = NumericConfig { rounding, add_mode: AddMode::Saturate, ..Default::default() };
        let kernel = build_alif(&stimulus.params, &num, stimulus.weight, &counts, 7)?;
        let machine = kernels::execute(&kernel.program, 1 << 32)?;
        let run = kernel.read_run(&machine)?;

        let w = kernel.weight.to_real();
        let input: Vec<f64> = stimulus.counts.iter().map(|&c| c as f64 * w).collect();
        let reference = alif_reference(&stimulus.params, &input);
        let spikes = run.lane_spikes(0).iter().filter(|&&s| s).count();
        let ref_spikes = reference.spikes.iter().filter(|&&s| s).count();
        println!(
            "{rounding}: lane 0 NRMSE V {:.4}, A {:.4}; {spikes} spikes (reference {ref_spikes}); {:.1} cycles/step",
            nrmse(&run.lane_v(0), &reference.v)?,
            nrmse(&run.lane_a(0), &reference.a)?,
            machine.cycles() as f64 / counts.len() as f64
        );
    }
    Ok(())
}
