//! Writes a network's weights and input events to the binary file formats,
//! reads them back and runs the network from the files.

use std::fs::File;

use fenn::harness::RsnnSetup;
use fenn::kernels::{self, build_rsnn, read_events, read_weights, write_events, write_weights, RsnnTopology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("fenn-network-files");
    std::fs::create_dir_all(&dir)?;
    let setup = RsnnSetup::generated(16, 32, 4, 50, 0.05, 3);
    let t = &setup.topology;
    for (name, m) in [("w_in", &t.w_in), ("w_rec", &t.w_rec), ("w_out", &t.w_out)] {
        write_weights(File::create(dir.join(format!("{name}.bin")))?, m)?;
    }
    write_events(File::create(dir.join("events.bin"))?, &setup.events)?;

    let w_in = read_weights(File::open(dir.join("w_in.bin"))?)?;
    let w_rec = read_weights(File::open(dir.join("w_rec.bin"))?)?;
    let w_out = read_weights(File::open(dir.join("w_out.bin"))?)?;
    let events = read_events(File::open(dir.join("events.bin"))?)?;
    let topology = RsnnTopology { n_input: w_in.rows, n_hidden: w_in.cols, n_output: w_out.cols, w_in, w_rec, w_out };
    assert_eq!(&topology, t);

    let kernel = build_rsnn(&topology, &setup.num, &setup.params, &events, setup.steps, 3, false)?;
    let machine = kernels::execute(&kernel.program, 1 << 32)?;
    println!("{} events from {}", events.len(), dir.display());
    println!("readout: {:?}", &kernel.read_output(&machine)?[..topology.n_output]);
    Ok(())
}
