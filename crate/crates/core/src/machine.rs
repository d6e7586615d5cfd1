//! Fetch-decode-execute simulator with a cycle-cost model.
//!
//! Memory map:
//!
//! | region              | base          | default size |
//! |---------------------|---------------|--------------|
//! | instruction memory  | `0x0000_0000` | 128 KiB      |
//! | scalar data memory  | `0x1000_0000` | 128 KiB      |
//! | vector memory       | `0x2000_0000` | 1 MiB        |
//!
//! Scalar loads and stores reach only scalar data memory and must be
//! naturally aligned; vector memory is reached only by vector loads and
//! stores at 64-byte aligned addresses. Lane 0 sits at the lowest address.
//!
//! Timing: every instruction costs [`CostModel::base`] cycles, taken
//! branches and jumps add [`CostModel::taken_branch_penalty`], and an
//! instruction that consumes a vector register (or the RNG state) written
//! by the immediately preceding vector load adds
//! [`CostModel::load_use_penalty`]. All other hazards are assumed bypassed.
//!
//! Faults do not vector anywhere: they halt the machine with a [`Trap`].

use std::fmt;

use thiserror::Error;

use crate::assembler::Program;
use crate::fixedpoint::{fx_mul_raw, sat_add_raw, sat_sub_raw, wrap_add_raw, wrap_sub_raw, RoundingMode};
use crate::isa::{ImmOp, Instruction, LoadWidth, OpClass, RegOp, RngHalf, VArithOp, VReg, XReg};
use crate::memory::{
    Memory, DEFAULT_DMEM_BYTES, DEFAULT_IMEM_BYTES, DEFAULT_VMEM_BYTES, DMEM_BASE, IMEM_BASE, VECTOR_BYTES, VMEM_BASE,
};
use crate::rng::{self, VectorRngState};
use crate::LANES;

pub type Vector = [i16; LANES];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub base: u64,
    pub taken_branch_penalty: u64,
    pub load_use_penalty: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { base: 1, taken_branch_penalty: 2, load_use_penalty: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    pub imem_bytes: usize,
    pub dmem_bytes: usize,
    pub vmem_bytes: usize,
    pub cost: CostModel,
    /// Seed for the RNG state registers before any program load of them.
    pub rng_seed: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            imem_bytes: DEFAULT_IMEM_BYTES,
            dmem_bytes: DEFAULT_DMEM_BYTES,
            vmem_bytes: DEFAULT_VMEM_BYTES,
            cost: CostModel::default(),
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trap {
    IllegalInstruction { pc: u32, word: u32 },
    FetchFault { pc: u32 },
    Misaligned { pc: u32, addr: u32 },
    OutOfBounds { pc: u32, addr: u32 },
    ZeroRngLane { pc: u32, lane: usize },
}

impl Trap {
    /// Stable numeric cause code.
    pub fn code(&self) -> u32 {
        match self {
            Trap::IllegalInstruction { .. } => 2,
            Trap::FetchFault { .. } => 1,
            Trap::Misaligned { .. } => 4,
            Trap::OutOfBounds { .. } => 5,
            Trap::ZeroRngLane { .. } => 24,
        }
    }
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Trap::IllegalInstruction { pc, word } => {
                write!(f, "illegal instruction {word:#010x} at {pc:#x}")
            }
            Trap::FetchFault { pc } => write!(f, "instruction fetch fault at {pc:#x}"),
            Trap::Misaligned { pc, addr } => write!(f, "misaligned access to {addr:#x} at {pc:#x}"),
            Trap::OutOfBounds { pc, addr } => write!(f, "out-of-bounds access to {addr:#x} at {pc:#x}"),
            Trap::ZeroRngLane { pc, lane } => write!(f, "RNG lane {lane} has all-zero state at {pc:#x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    Ecall,
    Trap(Trap),
    CycleBudgetExceeded,
}

impl HaltReason {
    pub fn is_clean(&self) -> bool {
        matches!(self, HaltReason::Ecall)
    }
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::Ecall => f.write_str("ecall"),
            HaltReason::Trap(t) => write!(f, "trap: {t}"),
            HaltReason::CycleBudgetExceeded => f.write_str("cycle budget exceeded"),
        }
    }
}

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("{what} image of {len} bytes does not fit in {capacity} bytes")]
    ImageTooLarge { what: &'static str, len: usize, capacity: usize },
    #[error("machine is halted ({0})")]
    Halted(HaltReason),
    #[error("vector access to {0:#x} is misaligned or out of bounds")]
    BadVectorAddress(u32),
    #[error(transparent)]
    Isa(#[from] crate::isa::IsaError),
}

/// What one call to [`Machine::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub pc: u32,
    /// `None` when the fetch or decode itself faulted.
    pub instruction: Option<Instruction>,
    pub class: Option<OpClass>,
    pub region: usize,
    pub cost: u64,
    pub halt: Option<HaltReason>,
}

/// Retired-instruction and cycle counters, split by region and class.
///
/// Region 0 collects everything outside a marked region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecStats {
    pub region_names: Vec<String>,
    pub retired: Vec<[u64; 6]>,
    pub cycles: Vec<u64>,
}

pub const UNMARKED_REGION: &str = "other";

impl ExecStats {
    fn new(region_names: Vec<String>) -> Self {
        let n = region_names.len();
        ExecStats { region_names, retired: vec![[0; 6]; n], cycles: vec![0; n] }
    }

    pub fn total_retired(&self) -> u64 {
        self.retired.iter().flatten().sum()
    }

    pub fn total_cycles(&self) -> u64 {
        self.cycles.iter().sum()
    }

    pub fn region_index(&self, name: &str) -> Option<usize> {
        self.region_names.iter().position(|n| n == name)
    }

    pub fn retired_in(&self, region: &str, class: OpClass) -> u64 {
        self.region_index(region).map_or(0, |r| self.retired[r][class.index()])
    }

    pub fn cycles_in(&self, region: &str) -> u64 {
        self.region_index(region).map_or(0, |r| self.cycles[r])
    }

    pub fn class_total(&self, class: OpClass) -> u64 {
        self.retired.iter().map(|r| r[class.index()]).sum()
    }
}

/// One row of an instruction-mix table.
#[derive(Debug, Clone, PartialEq)]
pub struct MixRow {
    pub region: String,
    pub class: OpClass,
    pub count: u64,
    pub fraction: f64,
}

/// Per-region instruction mix. Regions that retired nothing are omitted;
/// within each listed region the fractions sum to one.
pub fn instruction_mix(stats: &ExecStats) -> Vec<MixRow> {
    let mut rows = Vec::new();
    for (r, name) in stats.region_names.iter().enumerate() {
        let total: u64 = stats.retired[r].iter().sum();
        if total == 0 {
            continue;
        }
        for class in OpClass::ALL {
            let count = stats.retired[r][class.index()];
            rows.push(MixRow { region: name.clone(), class, count, fraction: count as f64 / total as f64 });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoadedDest {
    Vector(VReg),
    Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryKind {
    Instruction,
    ScalarData,
    Vector,
}

/// Result of [`Machine::run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub halt: HaltReason,
    pub cycles: u64,
    pub retired: u64,
}

#[derive(Debug, Clone)]
pub struct Machine {
    x: [u32; 32],
    pc: u32,
    v: [Vector; 32],
    rng_s0: [u16; LANES],
    rng_s1: [u16; LANES],
    imem: Memory,
    decoded: Vec<Option<Instruction>>,
    region_of: Vec<u16>,
    dmem: Memory,
    vmem: Memory,
    cycles: u64,
    stats: ExecStats,
    halted: Option<HaltReason>,
    last_load: Option<LoadedDest>,
    cost: CostModel,
}

enum Flow {
    Next,
    Jump(u32),
    Halt(HaltReason),
}

impl Machine {
    /// Resets a machine and loads `program` into it.
    pub fn load(program: &Program, config: &MachineConfig) -> Result<Machine, MachineError> {
        let code = crate::isa::encode_all(&program.code)?;
        let mut imem = Memory::new(IMEM_BASE, config.imem_bytes);
        let mut dmem = Memory::new(DMEM_BASE, config.dmem_bytes);
        let mut vmem = Memory::new(VMEM_BASE, config.vmem_bytes);
        for (what, mem, image) in [
            ("code", &mut imem, &code),
            ("scalar data", &mut dmem, &program.scalar_data),
            ("vector data", &mut vmem, &program.vector_data),
        ] {
            if !mem.load_image(image) {
                return Err(MachineError::ImageTooLarge { what, len: image.len(), capacity: mem.len() });
            }
        }
        let words = config.imem_bytes / 4;
        let mut decoded: Vec<Option<Instruction>> = vec![None; words];
        decoded[..program.code.len()].iter_mut().zip(&program.code).for_each(|(slot, insn)| *slot = Some(*insn));

        let mut names = vec![UNMARKED_REGION.to_string()];
        let mut region_of = vec![0u16; words];
        for region in &program.regions {
            names.push(region.name.clone());
            let idx = (names.len() - 1) as u16;
            let start = (region.start / 4) as usize;
            let end = ((region.end / 4) as usize).min(words);
            region_of[start.min(end)..end].fill(idx);
        }
        let (s0, s1) = rng::seed_image(config.rng_seed);
        Ok(Machine {
            x: [0; 32],
            pc: program.entry,
            v: [[0; LANES]; 32],
            rng_s0: s0,
            rng_s1: s1,
            imem,
            decoded,
            region_of,
            dmem,
            vmem,
            cycles: 0,
            stats: ExecStats::new(names),
            halted: None,
            last_load: None,
            cost: config.cost,
        })
    }

    pub fn pc(&self) -> u32 {
        self.pc
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn stats(&self) -> &ExecStats {
        &self.stats
    }

    pub fn halted(&self) -> Option<HaltReason> {
        self.halted
    }

    pub fn xreg(&self, r: XReg) -> u32 {
        self.x[r.index()]
    }

    pub fn xregs(&self) -> &[u32; 32] {
        &self.x
    }

    pub fn set_xreg(&mut self, r: XReg, value: u32) {
        if r != XReg::ZERO {
            self.x[r.index()] = value;
        }
    }

    pub fn vreg(&self, r: VReg) -> &Vector {
        &self.v[r.index()]
    }

    pub fn set_vreg(&mut self, r: VReg, value: Vector) {
        self.v[r.index()] = value;
    }

    /// Current RNG registers, if every lane is in a valid state.
    pub fn rng_state(&self) -> Result<VectorRngState, rng::RngError> {
        VectorRngState::from_image(self.rng_s0, self.rng_s1)
    }

    pub fn memory(&self, kind: MemoryKind) -> &Memory {
        match kind {
            MemoryKind::Instruction => &self.imem,
            MemoryKind::ScalarData => &self.dmem,
            MemoryKind::Vector => &self.vmem,
        }
    }

    /// Replaces a data memory's contents with a raw image (zero-padded).
    pub fn restore_memory(&mut self, kind: MemoryKind, image: &[u8]) -> Result<(), MachineError> {
        let mem = match kind {
            MemoryKind::Instruction => {
                return Err(MachineError::ImageTooLarge {
                    what: "instruction memory is fixed at load;",
                    len: image.len(),
                    capacity: 0,
                })
            }
            MemoryKind::ScalarData => &mut self.dmem,
            MemoryKind::Vector => &mut self.vmem,
        };
        if !mem.load_image(image) {
            return Err(MachineError::ImageTooLarge { what: "restored", len: image.len(), capacity: mem.len() });
        }
        Ok(())
    }

    pub fn read_vector(&self, addr: u32) -> Result<Vector, MachineError> {
        if !addr.is_multiple_of(VECTOR_BYTES as u32) {
            return Err(MachineError::BadVectorAddress(addr));
        }
        let bytes = self.vmem.slice(addr, VECTOR_BYTES).ok_or(MachineError::BadVectorAddress(addr))?;
        Ok(bytes_to_vector(bytes))
    }

    pub fn write_vector(&mut self, addr: u32, value: &Vector) -> Result<(), MachineError> {
        if !addr.is_multiple_of(VECTOR_BYTES as u32) {
            return Err(MachineError::BadVectorAddress(addr));
        }
        let bytes = self.vmem.slice_mut(addr, VECTOR_BYTES).ok_or(MachineError::BadVectorAddress(addr))?;
        vector_to_bytes(value, bytes);
        Ok(())
    }

    /// `count` consecutive vectors starting at `addr`.
    pub fn read_vectors(&self, addr: u32, count: usize) -> Result<Vec<Vector>, MachineError> {
        (0..count).map(|i| self.read_vector(addr + (i * VECTOR_BYTES) as u32)).collect()
    }

    pub fn read_u32(&self, addr: u32) -> Option<u32> {
        self.dmem.slice(addr, 4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn read_u32s(&self, addr: u32, count: usize) -> Option<Vec<u32>> {
        (0..count).map(|i| self.read_u32(addr + 4 * i as u32)).collect()
    }

    /// Executes one instruction.
    pub fn step(&mut self) -> Result<StepEvent, MachineError> {
        if let Some(h) = self.halted {
            return Err(MachineError::Halted(h));
        }
        let pc = self.pc;
        let word_index = (pc.wrapping_sub(IMEM_BASE) / 4) as usize;
        let region = self.region_of.get(word_index).copied().unwrap_or(0) as usize;
        if !pc.is_multiple_of(4) || word_index >= self.decoded.len() {
            return Ok(self.fault(pc, None, region, Trap::FetchFault { pc }));
        }
        let Some(insn) = self.decoded[word_index] else {
            let b = self.imem.slice(pc, 4).expect("fetch within instruction memory");
            let word = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            return Ok(self.fault(pc, None, region, Trap::IllegalInstruction { pc, word }));
        };

        let mut cost = self.cost.base;
        if let Some(dest) = self.last_load.take() {
            let dependent = match dest {
                LoadedDest::Vector(r) => insn.vector_sources().contains(&Some(r)),
                LoadedDest::Rng => insn.uses_rng(),
            };
            if dependent {
                cost += self.cost.load_use_penalty;
            }
        }

        let flow = match self.execute(pc, &insn) {
            Ok(flow) => flow,
            Err(trap) => {
                self.last_load = None;
                return Ok(self.fault(pc, Some(insn), region, trap));
            }
        };
        self.x[0] = 0;
        let class = insn.class();
        let mut halt = None;
        match flow {
            Flow::Next => self.pc = pc.wrapping_add(4),
            Flow::Jump(target) => {
                cost += self.cost.taken_branch_penalty;
                self.pc = target;
            }
            Flow::Halt(h) => {
                self.halted = Some(h);
                halt = Some(h);
            }
        }
        self.cycles += cost;
        self.stats.cycles[region] += cost;
        self.stats.retired[region][class.index()] += 1;
        Ok(StepEvent { pc, instruction: Some(insn), class: Some(class), region, cost, halt })
    }

    fn fault(&mut self, pc: u32, insn: Option<Instruction>, region: usize, trap: Trap) -> StepEvent {
        let halt = HaltReason::Trap(trap);
        self.halted = Some(halt);
        self.cycles += self.cost.base;
        self.stats.cycles[region] += self.cost.base;
        StepEvent {
            pc,
            instruction: insn,
            class: insn.map(|i| i.class()),
            region,
            cost: self.cost.base,
            halt: Some(halt),
        }
    }

    /// Runs until a halt or until `max_cycles` total cycles have elapsed.
    ///
    /// Hitting the budget leaves the machine resumable.
    pub fn run(&mut self, max_cycles: u64) -> RunOutcome {
        let halt = loop {
            if let Some(h) = self.halted {
                break h;
            }
            if self.cycles >= max_cycles {
                break HaltReason::CycleBudgetExceeded;
            }
            if let Ok(StepEvent { halt: Some(h), .. }) = self.step() {
                break h;
            }
        };
        RunOutcome { halt, cycles: self.cycles, retired: self.stats.total_retired() }
    }

    fn scalar_addr(&self, pc: u32, base: XReg, offset: i32, bytes: u32) -> Result<u32, Trap> {
        let addr = self.x[base.index()].wrapping_add(offset as u32);
        if !addr.is_multiple_of(bytes) {
            return Err(Trap::Misaligned { pc, addr });
        }
        if self.dmem.offset(addr, bytes as usize).is_none() {
            return Err(Trap::OutOfBounds { pc, addr });
        }
        Ok(addr)
    }

    fn vector_addr(&self, pc: u32, base: XReg, offset: i16) -> Result<u32, Trap> {
        let addr = self.x[base.index()].wrapping_add((offset as i32 * VECTOR_BYTES as i32) as u32);
        if !addr.is_multiple_of(VECTOR_BYTES as u32) {
            return Err(Trap::Misaligned { pc, addr });
        }
        if self.vmem.offset(addr, VECTOR_BYTES).is_none() {
            return Err(Trap::OutOfBounds { pc, addr });
        }
        Ok(addr)
    }

    fn next_entropy(&mut self, pc: u32) -> Result<Vector, Trap> {
        let mut out = [0i16; LANES];
        for lane in 0..LANES {
            if self.rng_s0[lane] == 0 && self.rng_s1[lane] == 0 {
                return Err(Trap::ZeroRngLane { pc, lane });
            }
        }
        for (lane, o) in out.iter_mut().enumerate() {
            let (word, s0, s1) = rng::step(self.rng_s0[lane], self.rng_s1[lane]);
            self.rng_s0[lane] = s0;
            self.rng_s1[lane] = s1;
            *o = word as i16;
        }
        Ok(out)
    }

    fn execute(&mut self, pc: u32, insn: &Instruction) -> Result<Flow, Trap> {
        use Instruction::*;
        let xr = |m: &Machine, r: XReg| m.x[r.index()];
        match *insn {
            Lui { rd, imm20 } => self.x[rd.index()] = imm20 << 12,
            Auipc { rd, imm20 } => self.x[rd.index()] = pc.wrapping_add(imm20 << 12),
            Jal { rd, offset } => {
                self.x[rd.index()] = pc.wrapping_add(4);
                return Ok(Flow::Jump(pc.wrapping_add(offset as u32)));
            }
            Jalr { rd, rs1, offset } => {
                let target = xr(self, rs1).wrapping_add(offset as u32) & !1;
                self.x[rd.index()] = pc.wrapping_add(4);
                return Ok(Flow::Jump(target));
            }
            Branch { cond, rs1, rs2, offset } => {
                if cond.holds(xr(self, rs1), xr(self, rs2)) {
                    return Ok(Flow::Jump(pc.wrapping_add(offset as u32)));
                }
            }
            Load { width, rd, rs1, offset } => {
                let addr = self.scalar_addr(pc, rs1, offset, width.bytes())?;
                let b = self.dmem.slice(addr, width.bytes() as usize).expect("checked");
                self.x[rd.index()] = match width {
                    LoadWidth::Byte => b[0] as i8 as i32 as u32,
                    LoadWidth::ByteUnsigned => b[0] as u32,
                    LoadWidth::Half => i16::from_le_bytes([b[0], b[1]]) as i32 as u32,
                    LoadWidth::HalfUnsigned => u16::from_le_bytes([b[0], b[1]]) as u32,
                    LoadWidth::Word => u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                };
            }
            Store { width, rs1, rs2, offset } => {
                let addr = self.scalar_addr(pc, rs1, offset, width.bytes())?;
                let value = xr(self, rs2).to_le_bytes();
                let n = width.bytes() as usize;
                self.dmem.slice_mut(addr, n).expect("checked").copy_from_slice(&value[..n]);
            }
            OpImm { op, rd, rs1, imm } => {
                let a = xr(self, rs1);
                let b = imm as u32;
                self.x[rd.index()] = match op {
                    ImmOp::Addi => a.wrapping_add(b),
                    ImmOp::Slti => ((a as i32) < imm) as u32,
                    ImmOp::Sltiu => (a < b) as u32,
                    ImmOp::Xori => a ^ b,
                    ImmOp::Ori => a | b,
                    ImmOp::Andi => a & b,
                    ImmOp::Slli => a << (b & 31),
                    ImmOp::Srli => a >> (b & 31),
                    ImmOp::Srai => ((a as i32) >> (b & 31)) as u32,
                };
            }
            Op { op, rd, rs1, rs2 } => {
                let a = xr(self, rs1);
                let b = xr(self, rs2);
                self.x[rd.index()] = match op {
                    RegOp::Add => a.wrapping_add(b),
                    RegOp::Sub => a.wrapping_sub(b),
                    RegOp::Sll => a << (b & 31),
                    RegOp::Slt => ((a as i32) < (b as i32)) as u32,
                    RegOp::Sltu => (a < b) as u32,
                    RegOp::Xor => a ^ b,
                    RegOp::Srl => a >> (b & 31),
                    RegOp::Sra => ((a as i32) >> (b & 31)) as u32,
                    RegOp::Or => a | b,
                    RegOp::And => a & b,
                    RegOp::Mul => a.wrapping_mul(b),
                };
            }
            Ecall => return Ok(Flow::Halt(HaltReason::Ecall)),
            VArith { op, vd, vs1, vs2 } => {
                let f = match op {
                    VArithOp::Add => wrap_add_raw,
                    VArithOp::AddSat => sat_add_raw,
                    VArithOp::Sub => wrap_sub_raw,
                    VArithOp::SubSat => sat_sub_raw,
                };
                let (a, b) = (self.v[vs1.index()], self.v[vs2.index()]);
                self.v[vd.index()] = std::array::from_fn(|i| f(a[i], b[i]));
            }
            VMul { vd, vs1, vs2, shift, rounding } => {
                let entropy = if rounding == RoundingMode::Stochastic { self.next_entropy(pc)? } else { [0; LANES] };
                let (a, b) = (self.v[vs1.index()], self.v[vs2.index()]);
                self.v[vd.index()] =
                    std::array::from_fn(|i| fx_mul_raw(a[i], b[i], shift, rounding, entropy[i] as u16));
            }
            VLoad { vd, rs1, offset } => {
                let addr = self.vector_addr(pc, rs1, offset)?;
                self.v[vd.index()] = bytes_to_vector(self.vmem.slice(addr, VECTOR_BYTES).expect("checked"));
                self.last_load = Some(LoadedDest::Vector(vd));
            }
            VStore { vs2, rs1, offset } => {
                let addr = self.vector_addr(pc, rs1, offset)?;
                let value = self.v[vs2.index()];
                vector_to_bytes(&value, self.vmem.slice_mut(addr, VECTOR_BYTES).expect("checked"));
            }
            VLoadRng { half, rs1, offset } => {
                let addr = self.vector_addr(pc, rs1, offset)?;
                let lanes = bytes_to_vector(self.vmem.slice(addr, VECTOR_BYTES).expect("checked"));
                let dest = match half {
                    RngHalf::S0 => &mut self.rng_s0,
                    RngHalf::S1 => &mut self.rng_s1,
                };
                *dest = lanes.map(|l| l as u16);
                self.last_load = Some(LoadedDest::Rng);
            }
            VBcast { vd, rs1 } => self.v[vd.index()] = [xr(self, rs1) as i16; LANES],
            VExtract { rd, vs1, lane } => {
                self.x[rd.index()] = self.v[vs1.index()][lane as usize] as i32 as u32;
            }
            VRng { vd } => self.v[vd.index()] = self.next_entropy(pc)?,
            VCompare { cond, rd, vs1, vs2 } => {
                let (a, b) = (&self.v[vs1.index()], &self.v[vs2.index()]);
                self.x[rd.index()] = (0..LANES).filter(|&i| cond.holds(a[i], b[i])).fold(0u32, |m, i| m | (1 << i));
            }
            VSel { vd, vs1, vs2, rs1 } => {
                let mask = xr(self, rs1);
                let (a, b) = (self.v[vs1.index()], self.v[vs2.index()]);
                self.v[vd.index()] = std::array::from_fn(|i| if mask >> i & 1 == 1 { a[i] } else { b[i] });
            }
        }
        Ok(Flow::Next)
    }
}

pub fn bytes_to_vector(bytes: &[u8]) -> Vector {
    std::array::from_fn(|i| i16::from_le_bytes([bytes[2 * i], bytes[2 * i + 1]]))
}

pub fn vector_to_bytes(value: &Vector, out: &mut [u8]) {
    for (i, lane) in value.iter().enumerate() {
        out[2 * i..2 * i + 2].copy_from_slice(&lane.to_le_bytes());
    }
}
