//! A random recurrent ALIF network on the simulator, checked bit for bit
//! against the host fixed-point oracle.

use fenn::harness::{run_rsnn, RsnnSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = RsnnSetup::generated(64, 256, 20, 100, 0.02, 42);
    let run = run_rsnn(&setup, 42, true)?;
    println!("oracle match: {}", run.oracle_match == Some(true));
    println!("prediction: class {}", run.prediction);
    println!("cycles per timestep: {:.1}", run.cycles_per_step());
    println!("neuron update: {:.2} cycles per 32-neuron vector", run.update_cycles_per_vector());
    println!("spike processing vector memory:ALU = {:.2}", run.spike_memory_alu_ratio());
    let raster: Vec<String> = run.trace.spike_counts().iter().take(20).map(|n| n.to_string()).collect();
    println!("hidden spikes, first 20 steps: {}", raster.join(" "));
    Ok(())
}
