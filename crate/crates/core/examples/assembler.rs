//! Builds a small program with labels and a marked region, prints its
//! disassembly and runs it.

use fenn::assembler::{Assembler, Program};
use fenn::fixedpoint::RoundingMode;
use fenn::isa::{disassemble, v, x, BranchCond, ImmOp, Instruction, VArithOp};
use fenn::machine::{instruction_mix, Machine, MachineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut asm = Assembler::new();
    let data = asm.vectors(&[[1000; 32], [8192; 32]]);
    asm.li(x(1), data);
    asm.emit(Instruction::VLoad { vd: v(1), rs1: x(1), offset: 0 });
    asm.emit(Instruction::VLoad { vd: v(2), rs1: x(1), offset: 1 });
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: x(2), rs1: x(0), imm: 10 });

    // Ten rounds of v1 += v1 * 0.25.
    let top = asm.bound_label();
    asm.emit(Instruction::VMul { vd: v(3), vs1: v(1), vs2: v(2), shift: 15, rounding: RoundingMode::Stochastic });
    asm.emit(Instruction::VArith { op: VArithOp::AddSat, vd: v(1), vs1: v(1), vs2: v(3) });
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: x(2), rs1: x(2), imm: -1 });
    asm.branch(BranchCond::Ne, x(2), x(0), top);
    let end = asm.bound_label();
    asm.mark_region("loop", top, end)?;
    asm.emit(Instruction::VStore { vs2: v(1), rs1: x(1), offset: 0 });
    asm.emit(Instruction::Ecall);
    let program = asm.finalize()?;

    print!("{}", disassemble(&program.code));
    let bytes = program.to_bytes()?;
    assert_eq!(Program::from_bytes(&bytes)?, program);
    println!("container: {} bytes", bytes.len());

    let mut machine = Machine::load(&program, &MachineConfig { rng_seed: 1, ..Default::default() })?;
    let outcome = machine.run(10_000);
    println!("halt: {}, {} cycles, {} retired", outcome.halt, outcome.cycles, outcome.retired);
    println!("lanes 0..4 after the loop: {:?}", &machine.read_vector(data)?[..4]);
    for row in instruction_mix(machine.stats()).iter().filter(|r| r.count > 0) {
        println!("  {:<6} {:<18} {:>3} ({:.0}%)", row.region, row.class.name(), row.count, 100.0 * row.fraction);
    }
    Ok(())
}
