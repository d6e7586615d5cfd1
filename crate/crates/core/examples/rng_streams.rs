//! Per-lane Xoroshiro32++ streams as seen through VRNG.

use fenn::assembler::Assembler;
use fenn::isa::{v, Instruction};
use fenn::machine::{Machine, MachineConfig};
use fenn::rng::VectorRngState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut asm = Assembler::new();
    for i in 0..4 {
        asm.emit(Instruction::VRng { vd: v(i) });
    }
    asm.emit(Instruction::Ecall);
    let mut machine = Machine::load(&asm.finalize()?, &MachineConfig { rng_seed: 2024, ..Default::default() })?;
    machine.run(100);

    let mut host = VectorRngState::from_seed(2024);
    for i in 0..4 {
        let sim = machine.vreg(v(i));
        let expected = host.next_vector();
        println!(
            "draw {i}: lanes 0..4 {:04x?} host agrees: {}",
            sim[..4].iter().map(|&x| x as u16).collect::<Vec<_>>(),
            sim.map(|x| x as u16) == expected
        );
    }
    Ok(())
}
