//! Instruction set: an RV32 scalar subset plus the vector extension.
//!
//! Scalar instructions use the standard RV32I/M encodings (quadrant `11`).
//! Vector instructions live in quadrant `10` with this layout:
//!
//! ```text
//!  31   27 26 25 24   20 19   15 14  12 11    7 6     2 1 0
//! +-------+-----+-------+-------+------+-------+-------+---+
//! | ..... | ... |  vs2  |  vs1  | fn3  |  vd   | major | 10|
//! +-------+-----+-------+-------+------+-------+-------+---+
//! ```
//!
//! | major | fn3 | instruction                 | extra fields                    |
//! |-------|-----|-----------------------------|---------------------------------|
//! | 0     | 0-3 | `vadd` `vadd.s` `vsub` `vsub.s` | bits 31:25 zero             |
//! | 0     | 4   | `vmul`                      | shift 28:25, rounding 30:29     |
//! | 1     | 0   | `vload vd, imm(rs1)`        | imm\[10:0\] at 30:20            |
//! | 1     | 1   | `vstore vs2, imm(rs1)`      | imm\[10:5\] at 30:25, imm\[4:0\] at 11:7 |
//! | 1     | 2,3 | `vload.r0` / `vload.r1`     | as `vload`, bits 11:7 zero      |
//! | 2     | 0   | `vbcast vd, rs1`            |                                 |
//! | 2     | 1   | `vextract rd, vs1, lane`    | lane at 24:20                   |
//! | 2     | 2   | `vrng vd`                   |                                 |
//! | 2     | 3-6 | `vteq` `vtne` `vtlt` `vtge` (`rd, vs1, vs2`) |                |
//! | 3     | 0   | `vsel vd, vs1, vs2, rs1`    | mask reg rs1 at 19:15, vs1 at 31:27 |
//!
//! Vector memory immediates count whole vectors (64 bytes). Rounding codes
//! are 0 = `rz`, 1 = `rn`, 2 = `sr`. Every bit not listed must be zero;
//! anything else decodes as illegal.
//!
//! Disassembly is one instruction per line, mnemonic then comma-separated
//! operands, e.g. `vmul v1, v2, v3, 15, sr` or `lw x5, 8(x6)`.

use std::fmt;

use thiserror::Error;

use crate::fixedpoint::RoundingMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("{field} value {value} does not fit its encoding")]
    FieldOverflow { field: &'static str, value: i64 },
    #[error("illegal instruction word {0:#010x}")]
    IllegalInstruction(u32),
    #[error("program image length {0} is not a multiple of 4")]
    TruncatedImage(usize),
}

macro_rules! register_type {
    ($name:ident, $ctor:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(u8);

        impl $name {
            pub fn new(index: u8) -> Option<Self> {
                (index < 32).then_some($name(index))
            }

            pub fn index(self) -> usize {
                self.0 as usize
            }

            fn bits(self) -> u32 {
                self.0 as u32
            }

            fn from_field(word: u32, lsb: u32) -> Self {
                $name(((word >> lsb) & 0x1F) as u8)
            }
        }

        /// Panics if `index > 31`.
        pub const fn $ctor(index: u8) -> $name {
            assert!(index < 32, concat!($prefix, " register index out of range"));
            $name(index)
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

register_type!(XReg, x, "x");
register_type!(VReg, v, "v");

impl XReg {
    pub const ZERO: XReg = XReg(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchCond {
    Eq,
    Ne,
    Lt,
    Ge,
    Ltu,
    Geu,
}

impl BranchCond {
    pub const ALL: [BranchCond; 6] = [Self::Eq, Self::Ne, Self::Lt, Self::Ge, Self::Ltu, Self::Geu];

    fn funct3(self) -> u32 {
        match self {
            Self::Eq => 0,
            Self::Ne => 1,
            Self::Lt => 4,
            Self::Ge => 5,
            Self::Ltu => 6,
            Self::Geu => 7,
        }
    }

    pub fn holds(self, a: u32, b: u32) -> bool {
        match self {
            Self::Eq => a == b,
            Self::Ne => a != b,
            Self::Lt => (a as i32) < (b as i32),
            Self::Ge => (a as i32) >= (b as i32),
            Self::Ltu => a < b,
            Self::Geu => a >= b,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Eq => "beq",
            Self::Ne => "bne",
            Self::Lt => "blt",
            Self::Ge => "bge",
            Self::Ltu => "bltu",
            Self::Geu => "bgeu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadWidth {
    Byte,
    Half,
    Word,
    ByteUnsigned,
    HalfUnsigned,
}

impl LoadWidth {
    pub const ALL: [LoadWidth; 5] = [Self::Byte, Self::Half, Self::Word, Self::ByteUnsigned, Self::HalfUnsigned];

    fn funct3(self) -> u32 {
        match self {
            Self::Byte => 0,
            Self::Half => 1,
            Self::Word => 2,
            Self::ByteUnsigned => 4,
            Self::HalfUnsigned => 5,
        }
    }

    pub fn bytes(self) -> u32 {
        match self {
            Self::Byte | Self::ByteUnsigned => 1,
            Self::Half | Self::HalfUnsigned => 2,
            Self::Word => 4,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Byte => "lb",
            Self::Half => "lh",
            Self::Word => "lw",
            Self::ByteUnsigned => "lbu",
            Self::HalfUnsigned => "lhu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreWidth {
    Byte,
    Half,
    Word,
}

impl StoreWidth {
    pub const ALL: [StoreWidth; 3] = [Self::Byte, Self::Half, Self::Word];

    fn funct3(self) -> u32 {
        match self {
            Self::Byte => 0,
            Self::Half => 1,
            Self::Word => 2,
        }
    }

    pub fn bytes(self) -> u32 {
        1 << self.funct3()
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Byte => "sb",
            Self::Half => "sh",
            Self::Word => "sw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImmOp {
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
}

impl ImmOp {
    pub const ALL: [ImmOp; 9] =
        [Self::Addi, Self::Slti, Self::Sltiu, Self::Xori, Self::Ori, Self::Andi, Self::Slli, Self::Srli, Self::Srai];

    pub fn is_shift(self) -> bool {
        matches!(self, Self::Slli | Self::Srli | Self::Srai)
    }

    fn funct3(self) -> u32 {
        match self {
            Self::Addi => 0,
            Self::Slli => 1,
            Self::Slti => 2,
            Self::Sltiu => 3,
            Self::Xori => 4,
            Self::Srli | Self::Srai => 5,
            Self::Ori => 6,
            Self::Andi => 7,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Addi => "addi",
            Self::Slti => "slti",
            Self::Sltiu => "sltiu",
            Self::Xori => "xori",
            Self::Ori => "ori",
            Self::Andi => "andi",
            Self::Slli => "slli",
            Self::Srli => "srli",
            Self::Srai => "srai",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegOp {
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Mul,
}

impl RegOp {
    pub const ALL: [RegOp; 11] = [
        Self::Add,
        Self::Sub,
        Self::Sll,
        Self::Slt,
        Self::Sltu,
        Self::Xor,
        Self::Srl,
        Self::Sra,
        Self::Or,
        Self::And,
        Self::Mul,
    ];

    /// `(funct7, funct3)`
    fn functs(self) -> (u32, u32) {
        match self {
            Self::Add => (0x00, 0),
            Self::Sub => (0x20, 0),
            Self::Sll => (0x00, 1),
            Self::Slt => (0x00, 2),
            Self::Sltu => (0x00, 3),
            Self::Xor => (0x00, 4),
            Self::Srl => (0x00, 5),
            Self::Sra => (0x20, 5),
            Self::Or => (0x00, 6),
            Self::And => (0x00, 7),
            Self::Mul => (0x01, 0),
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Add => "add",
            Self::Sub => "sub",
            Self::Sll => "sll",
            Self::Slt => "slt",
            Self::Sltu => "sltu",
            Self::Xor => "xor",
            Self::Srl => "srl",
            Self::Sra => "sra",
            Self::Or => "or",
            Self::And => "and",
            Self::Mul => "mul",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VArithOp {
    Add,
    AddSat,
    Sub,
    SubSat,
}

impl VArithOp {
    pub const ALL: [VArithOp; 4] = [Self::Add, Self::AddSat, Self::Sub, Self::SubSat];

    fn funct3(self) -> u32 {
        match self {
            Self::Add => 0,
            Self::AddSat => 1,
            Self::Sub => 2,
            Self::SubSat => 3,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Add => "vadd",
            Self::AddSat => "vadd.s",
            Self::Sub => "vsub",
            Self::SubSat => "vsub.s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VCompareCond {
    Eq,
    Ne,
    Lt,
    Ge,
}

impl VCompareCond {
    pub const ALL: [VCompareCond; 4] = [Self::Eq, Self::Ne, Self::Lt, Self::Ge];

    pub fn holds(self, a: i16, b: i16) -> bool {
        match self {
            Self::Eq => a == b,
            Self::Ne => a != b,
            Self::Lt => a < b,
            Self::Ge => a >= b,
        }
    }

    fn funct3(self) -> u32 {
        match self {
            Self::Eq => 3,
            Self::Ne => 4,
            Self::Lt => 5,
            Self::Ge => 6,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Self::Eq => "vteq",
            Self::Ne => "vtne",
            Self::Lt => "vtlt",
            Self::Ge => "vtge",
        }
    }
}

/// Which of the two RNG state registers a `vload.rN` fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RngHalf {
    S0,
    S1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    /// `imm20` is the upper-immediate field, `0..2^20`.
    Lui {
        rd: XReg,
        imm20: u32,
    },
    Auipc {
        rd: XReg,
        imm20: u32,
    },
    /// Byte offset, even, within ±1 MiB.
    Jal {
        rd: XReg,
        offset: i32,
    },
    Jalr {
        rd: XReg,
        rs1: XReg,
        offset: i32,
    },
    /// Byte offset, even, within ±4 KiB.
    Branch {
        cond: BranchCond,
        rs1: XReg,
        rs2: XReg,
        offset: i32,
    },
    Load {
        width: LoadWidth,
        rd: XReg,
        rs1: XReg,
        offset: i32,
    },
    Store {
        width: StoreWidth,
        rs1: XReg,
        rs2: XReg,
        offset: i32,
    },
    /// Shift variants take a shamt in `0..32`; the rest a 12-bit signed value.
    OpImm {
        op: ImmOp,
        rd: XReg,
        rs1: XReg,
        imm: i32,
    },
    Op {
        op: RegOp,
        rd: XReg,
        rs1: XReg,
        rs2: XReg,
    },
    /// Halts the machine.
    Ecall,
    VArith {
        op: VArithOp,
        vd: VReg,
        vs1: VReg,
        vs2: VReg,
    },
    VMul {
        vd: VReg,
        vs1: VReg,
        vs2: VReg,
        shift: u8,
        rounding: RoundingMode,
    },
    /// Offsets are in whole vectors, 11-bit signed.
    VLoad {
        vd: VReg,
        rs1: XReg,
        offset: i16,
    },
    VStore {
        vs2: VReg,
        rs1: XReg,
        offset: i16,
    },
    VLoadRng {
        half: RngHalf,
        rs1: XReg,
        offset: i16,
    },
    VBcast {
        vd: VReg,
        rs1: XReg,
    },
    VExtract {
        rd: XReg,
        vs1: VReg,
        lane: u8,
    },
    VRng {
        vd: VReg,
    },
    /// Lane `i` of `vs1 cond vs2` goes to bit `i` of `rd`.
    VCompare {
        cond: VCompareCond,
        rd: XReg,
        vs1: VReg,
        vs2: VReg,
    },
    /// Lane `i` takes `vs1[i]` where mask bit `i` of `rs1` is set, else `vs2[i]`.
    VSel {
        vd: VReg,
        vs1: VReg,
        vs2: VReg,
        rs1: XReg,
    },
}

/// Instruction-mix category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpClass {
    ScalarAlu,
    ScalarMemory,
    Control,
    VectorAlu,
    VectorMemory,
    VectorMoveMaskRng,
}

impl OpClass {
    pub const ALL: [OpClass; 6] = [
        Self::ScalarAlu,
        Self::ScalarMemory,
        Self::Control,
        Self::VectorAlu,
        Self::VectorMemory,
        Self::VectorMoveMaskRng,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ScalarAlu => "scalar_alu",
            Self::ScalarMemory => "scalar_memory",
            Self::Control => "control",
            Self::VectorAlu => "vector_alu",
            Self::VectorMemory => "vector_memory",
            Self::VectorMoveMaskRng => "vector_move_mask_rng",
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, Self::VectorAlu | Self::VectorMemory | Self::VectorMoveMaskRng)
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const OPC_LOAD: u32 = 0x03;
const OPC_OP_IMM: u32 = 0x13;
const OPC_AUIPC: u32 = 0x17;
const OPC_STORE: u32 = 0x23;
const OPC_OP: u32 = 0x33;
const OPC_LUI: u32 = 0x37;
const OPC_BRANCH: u32 = 0x63;
const OPC_JALR: u32 = 0x67;
const OPC_JAL: u32 = 0x6F;
const OPC_SYSTEM: u32 = 0x73;
const ECALL_WORD: u32 = 0x0000_0073;

const V_MAJOR_ALU: u32 = 0;
const V_MAJOR_MEM: u32 = 1;
const V_MAJOR_MOVE: u32 = 2;
const V_MAJOR_SEL: u32 = 3;

const VMUL_FUNCT3: u32 = 4;

fn rounding_code(mode: RoundingMode) -> u32 {
    match mode {
        RoundingMode::RoundToZero => 0,
        RoundingMode::RoundToNearest => 1,
        RoundingMode::Stochastic => 2,
    }
}

fn check_signed(field: &'static str, value: i64, bits: u32) -> Result<u32, IsaError> {
    let min = -(1i64 << (bits - 1));
    let max = (1i64 << (bits - 1)) - 1;
    if value < min || value > max {
        return Err(IsaError::FieldOverflow { field, value });
    }
    Ok((value as u32) & ((1u32 << bits) - 1))
}

fn check_unsigned(field: &'static str, value: i64, bits: u32) -> Result<u32, IsaError> {
    if value < 0 || value >= (1i64 << bits) {
        return Err(IsaError::FieldOverflow { field, value });
    }
    Ok(value as u32)
}

fn check_even(field: &'static str, value: i32) -> Result<(), IsaError> {
    if value & 1 != 0 {
        return Err(IsaError::FieldOverflow { field, value: value as i64 });
    }
    Ok(())
}

fn sign_extend(value: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((value << shift) as i32) >> shift
}

fn vec_word(major: u32, funct3: u32, rd: u32, rs1: u32, rs2: u32) -> u32 {
    0b10 | (major << 2) | (rd << 7) | (funct3 << 12) | (rs1 << 15) | (rs2 << 20)
}

impl Instruction {
    pub fn encode(&self) -> Result<u32, IsaError> {
        use Instruction::*;
        let w = match *self {
            Lui { rd, imm20 } => {
                check_unsigned("imm20", imm20 as i64, 20)?;
                (imm20 << 12) | (rd.bits() << 7) | OPC_LUI
            }
            Auipc { rd, imm20 } => {
                check_unsigned("imm20", imm20 as i64, 20)?;
                (imm20 << 12) | (rd.bits() << 7) | OPC_AUIPC
            }
            Jal { rd, offset } => {
                check_even("jal offset", offset)?;
                let imm = check_signed("jal offset", offset as i64, 21)?;
                let bits = ((imm >> 20) & 1) << 31
                    | ((imm >> 1) & 0x3FF) << 21
                    | ((imm >> 11) & 1) << 20
                    | ((imm >> 12) & 0xFF) << 12;
                bits | (rd.bits() << 7) | OPC_JAL
            }
            Jalr { rd, rs1, offset } => {
                let imm = check_signed("jalr offset", offset as i64, 12)?;
                (imm << 20) | (rs1.bits() << 15) | (rd.bits() << 7) | OPC_JALR
            }
            Branch { cond, rs1, rs2, offset } => {
                check_even("branch offset", offset)?;
                let imm = check_signed("branch offset", offset as i64, 13)?;
                let bits = ((imm >> 12) & 1) << 31
                    | ((imm >> 5) & 0x3F) << 25
                    | ((imm >> 1) & 0xF) << 8
                    | ((imm >> 11) & 1) << 7;
                bits | (rs2.bits() << 20) | (rs1.bits() << 15) | (cond.funct3() << 12) | OPC_BRANCH
            }
            Load { width, rd, rs1, offset } => {
                let imm = check_signed("load offset", offset as i64, 12)?;
                (imm << 20) | (rs1.bits() << 15) | (width.funct3() << 12) | (rd.bits() << 7) | OPC_LOAD
            }
            Store { width, rs1, rs2, offset } => {
                let imm = check_signed("store offset", offset as i64, 12)?;
                ((imm >> 5) << 25)
                    | (rs2.bits() << 20)
                    | (rs1.bits() << 15)
                    | (width.funct3() << 12)
                    | ((imm & 0x1F) << 7)
                    | OPC_STORE
            }
            OpImm { op, rd, rs1, imm } => {
                let field = if op.is_shift() {
                    let shamt = check_unsigned("shamt", imm as i64, 5)?;
                    if op == ImmOp::Srai {
                        shamt | (0x20 << 5)
                    } else {
                        shamt
                    }
                } else {
                    check_signed("immediate", imm as i64, 12)?
                };
                (field << 20) | (rs1.bits() << 15) | (op.funct3() << 12) | (rd.bits() << 7) | OPC_OP_IMM
            }
            Op { op, rd, rs1, rs2 } => {
                let (f7, f3) = op.functs();
                (f7 << 25) | (rs2.bits() << 20) | (rs1.bits() << 15) | (f3 << 12) | (rd.bits() << 7) | OPC_OP
            }
            Ecall => ECALL_WORD,
            VArith { op, vd, vs1, vs2 } => vec_word(V_MAJOR_ALU, op.funct3(), vd.bits(), vs1.bits(), vs2.bits()),
            VMul { vd, vs1, vs2, shift, rounding } => {
                let shift = check_unsigned("shift", shift as i64, 4)?;
                vec_word(V_MAJOR_ALU, VMUL_FUNCT3, vd.bits(), vs1.bits(), vs2.bits())
                    | (shift << 25)
                    | (rounding_code(rounding) << 29)
            }
            VLoad { vd, rs1, offset } => {
                let imm = check_signed("vector offset", offset as i64, 11)?;
                vec_word(V_MAJOR_MEM, 0, vd.bits(), rs1.bits(), 0) | (imm << 20)
            }
            VStore { vs2, rs1, offset } => {
                let imm = check_signed("vector offset", offset as i64, 11)?;
                vec_word(V_MAJOR_MEM, 1, imm & 0x1F, rs1.bits(), vs2.bits()) | ((imm >> 5) << 25)
            }
            VLoadRng { half, rs1, offset } => {
                let imm = check_signed("vector offset", offset as i64, 11)?;
                let f3 = match half {
                    RngHalf::S0 => 2,
                    RngHalf::S1 => 3,
                };
                vec_word(V_MAJOR_MEM, f3, 0, rs1.bits(), 0) | (imm << 20)
            }
            VBcast { vd, rs1 } => vec_word(V_MAJOR_MOVE, 0, vd.bits(), rs1.bits(), 0),
            VExtract { rd, vs1, lane } => {
                let lane = check_unsigned("lane", lane as i64, 5)?;
                vec_word(V_MAJOR_MOVE, 1, rd.bits(), vs1.bits(), lane)
            }
            VRng { vd } => vec_word(V_MAJOR_MOVE, 2, vd.bits(), 0, 0),
            VCompare { cond, rd, vs1, vs2 } => vec_word(V_MAJOR_MOVE, cond.funct3(), rd.bits(), vs1.bits(), vs2.bits()),
            VSel { vd, vs1, vs2, rs1 } => {
                vec_word(V_MAJOR_SEL, 0, vd.bits(), rs1.bits(), vs2.bits()) | (vs1.bits() << 27)
            }
        };
        Ok(w)
    }

    pub fn decode(word: u32) -> Result<Instruction, IsaError> {
        match word & 0b11 {
            0b11 => decode_scalar(word),
            0b10 => decode_vector(word),
            _ => Err(IsaError::IllegalInstruction(word)),
        }
    }

    pub fn class(&self) -> OpClass {
        use Instruction::*;
        match self {
            Lui { .. } | Auipc { .. } | OpImm { .. } | Op { .. } => OpClass::ScalarAlu,
            Load { .. } | Store { .. } => OpClass::ScalarMemory,
            Jal { .. } | Jalr { .. } | Branch { .. } | Ecall => OpClass::Control,
            VArith { .. } | VMul { .. } | VSel { .. } => OpClass::VectorAlu,
            VLoad { .. } | VStore { .. } | VLoadRng { .. } => OpClass::VectorMemory,
            VBcast { .. } | VExtract { .. } | VRng { .. } | VCompare { .. } => OpClass::VectorMoveMaskRng,
        }
    }

    pub fn is_vector(&self) -> bool {
        self.class().is_vector()
    }

    /// Vector registers read as operands.
    pub fn vector_sources(&self) -> [Option<VReg>; 2] {
        use Instruction::*;
        match *self {
            VArith { vs1, vs2, .. } | VMul { vs1, vs2, .. } | VCompare { vs1, vs2, .. } => [Some(vs1), Some(vs2)],
            VSel { vs1, vs2, .. } => [Some(vs1), Some(vs2)],
            VStore { vs2, .. } => [Some(vs2), None],
            VExtract { vs1, .. } => [Some(vs1), None],
            _ => [None, None],
        }
    }

    /// Whether executing this instruction advances the RNG state registers.
    pub fn uses_rng(&self) -> bool {
        matches!(self, Instruction::VRng { .. } | Instruction::VMul { rounding: RoundingMode::Stochastic, .. })
    }
}

fn decode_scalar(w: u32) -> Result<Instruction, IsaError> {
    use Instruction::*;
    let illegal = || IsaError::IllegalInstruction(w);
    let rd = XReg::from_field(w, 7);
    let rs1 = XReg::from_field(w, 15);
    let rs2 = XReg::from_field(w, 20);
    let funct3 = (w >> 12) & 7;
    let funct7 = w >> 25;
    let i_imm = sign_extend(w >> 20, 12);
    let insn = match w & 0x7F {
        OPC_LUI => Lui { rd, imm20: w >> 12 },
        OPC_AUIPC => Auipc { rd, imm20: w >> 12 },
        OPC_JAL => {
            let imm =
                ((w >> 31) & 1) << 20 | ((w >> 21) & 0x3FF) << 1 | ((w >> 20) & 1) << 11 | ((w >> 12) & 0xFF) << 12;
            Jal { rd, offset: sign_extend(imm, 21) }
        }
        OPC_JALR if funct3 == 0 => Jalr { rd, rs1, offset: i_imm },
        OPC_BRANCH => {
            let cond = BranchCond::ALL.into_iter().find(|c| c.funct3() == funct3).ok_or_else(illegal)?;
            let imm = ((w >> 31) & 1) << 12 | ((w >> 25) & 0x3F) << 5 | ((w >> 8) & 0xF) << 1 | ((w >> 7) & 1) << 11;
            Branch { cond, rs1, rs2, offset: sign_extend(imm, 13) }
        }
        OPC_LOAD => {
            let width = LoadWidth::ALL.into_iter().find(|l| l.funct3() == funct3).ok_or_else(illegal)?;
            Load { width, rd, rs1, offset: i_imm }
        }
        OPC_STORE => {
            let width = StoreWidth::ALL.into_iter().find(|s| s.funct3() == funct3).ok_or_else(illegal)?;
            let imm = (funct7 << 5) | ((w >> 7) & 0x1F);
            Store { width, rs1, rs2, offset: sign_extend(imm, 12) }
        }
        OPC_OP_IMM => {
            let op = match funct3 {
                0 => ImmOp::Addi,
                2 => ImmOp::Slti,
                3 => ImmOp::Sltiu,
                4 => ImmOp::Xori,
                6 => ImmOp::Ori,
                7 => ImmOp::Andi,
                1 if funct7 == 0 => ImmOp::Slli,
                5 if funct7 == 0 => ImmOp::Srli,
                5 if funct7 == 0x20 => ImmOp::Srai,
                _ => return Err(illegal()),
            };
            let imm = if op.is_shift() { ((w >> 20) & 0x1F) as i32 } else { i_imm };
            OpImm { op, rd, rs1, imm }
        }
        OPC_OP => {
            let op = RegOp::ALL.into_iter().find(|o| o.functs() == (funct7, funct3)).ok_or_else(illegal)?;
            Op { op, rd, rs1, rs2 }
        }
        OPC_SYSTEM if w == ECALL_WORD => Ecall,
        _ => return Err(illegal()),
    };
    Ok(insn)
}

fn decode_vector(w: u32) -> Result<Instruction, IsaError> {
    use Instruction::*;
    let illegal = || IsaError::IllegalInstruction(w);
    // Fields that must be zero, as a mask over the word.
    let require_zero = |mask: u32| if w & mask == 0 { Ok(()) } else { Err(illegal()) };
    let major = (w >> 2) & 0x1F;
    let funct3 = (w >> 12) & 7;
    let f_rd = (w >> 7) & 0x1F;
    let vd = VReg::from_field(w, 7);
    let rd = XReg::from_field(w, 7);
    let vs1 = VReg::from_field(w, 15);
    let rs1 = XReg::from_field(w, 15);
    let vs2 = VReg::from_field(w, 20);
    const HIGH7: u32 = 0xFE00_0000;
    const RS2: u32 = 0x01F0_0000;
    const RS1: u32 = 0x000F_8000;
    const RD: u32 = 0x0000_0F80;
    let insn = match (major, funct3) {
        (V_MAJOR_ALU, 0..=3) => {
            require_zero(HIGH7)?;
            let op = VArithOp::ALL[funct3 as usize];
            VArith { op, vd, vs1, vs2 }
        }
        (V_MAJOR_ALU, VMUL_FUNCT3) => {
            require_zero(1 << 31)?;
            let rounding = match (w >> 29) & 3 {
                0 => RoundingMode::RoundToZero,
                1 => RoundingMode::RoundToNearest,
                2 => RoundingMode::Stochastic,
                _ => return Err(illegal()),
            };
            let shift = ((w >> 25) & 0xF) as u8;
            VMul { vd, vs1, vs2, shift, rounding }
        }
        (V_MAJOR_MEM, 0 | 2 | 3) => {
            require_zero(1 << 31)?;
            let offset = sign_extend((w >> 20) & 0x7FF, 11) as i16;
            match funct3 {
                0 => VLoad { vd, rs1, offset },
                f => {
                    require_zero(RD)?;
                    let half = if f == 2 { RngHalf::S0 } else { RngHalf::S1 };
                    VLoadRng { half, rs1, offset }
                }
            }
        }
        (V_MAJOR_MEM, 1) => {
            require_zero(1 << 31)?;
            let imm = (((w >> 25) & 0x3F) << 5) | f_rd;
            VStore { vs2, rs1, offset: sign_extend(imm, 11) as i16 }
        }
        (V_MAJOR_MOVE, 0) => {
            require_zero(HIGH7 | RS2)?;
            VBcast { vd, rs1 }
        }
        (V_MAJOR_MOVE, 1) => {
            require_zero(HIGH7)?;
            VExtract { rd, vs1, lane: ((w >> 20) & 0x1F) as u8 }
        }
        (V_MAJOR_MOVE, 2) => {
            require_zero(HIGH7 | RS2 | RS1)?;
            VRng { vd }
        }
        (V_MAJOR_MOVE, 3..=6) => {
            require_zero(HIGH7)?;
            let cond = VCompareCond::ALL[(funct3 - 3) as usize];
            VCompare { cond, rd, vs1, vs2 }
        }
        (V_MAJOR_SEL, 0) => {
            require_zero(0x0600_0000)?;
            VSel { vd, vs1: VReg::from_field(w, 27), vs2, rs1 }
        }
        _ => return Err(illegal()),
    };
    Ok(insn)
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instruction::*;
        match *self {
            Lui { rd, imm20 } => write!(f, "lui {rd}, {imm20:#x}"),
            Auipc { rd, imm20 } => write!(f, "auipc {rd}, {imm20:#x}"),
            Jal { rd, offset } => write!(f, "jal {rd}, {offset}"),
            Jalr { rd, rs1, offset } => write!(f, "jalr {rd}, {offset}({rs1})"),
            Branch { cond, rs1, rs2, offset } => {
                write!(f, "{} {rs1}, {rs2}, {offset}", cond.mnemonic())
            }
            Load { width, rd, rs1, offset } => write!(f, "{} {rd}, {offset}({rs1})", width.mnemonic()),
            Store { width, rs1, rs2, offset } => {
                write!(f, "{} {rs2}, {offset}({rs1})", width.mnemonic())
            }
            OpImm { op, rd, rs1, imm } => write!(f, "{} {rd}, {rs1}, {imm}", op.mnemonic()),
            Op { op, rd, rs1, rs2 } => write!(f, "{} {rd}, {rs1}, {rs2}", op.mnemonic()),
            Ecall => f.write_str("ecall"),
            VArith { op, vd, vs1, vs2 } => write!(f, "{} {vd}, {vs1}, {vs2}", op.mnemonic()),
            VMul { vd, vs1, vs2, shift, rounding } => {
                write!(f, "vmul {vd}, {vs1}, {vs2}, {shift}, {rounding}")
            }
            VLoad { vd, rs1, offset } => write!(f, "vload {vd}, {offset}({rs1})"),
            VStore { vs2, rs1, offset } => write!(f, "vstore {vs2}, {offset}({rs1})"),
            VLoadRng { half, rs1, offset } => {
                let n = if half == RngHalf::S0 { 0 } else { 1 };
                write!(f, "vload.r{n} {offset}({rs1})")
            }
            VBcast { vd, rs1 } => write!(f, "vbcast {vd}, {rs1}"),
            VExtract { rd, vs1, lane } => write!(f, "vextract {rd}, {vs1}, {lane}"),
            VRng { vd } => write!(f, "vrng {vd}"),
            VCompare { cond, rd, vs1, vs2 } => write!(f, "{} {rd}, {vs1}, {vs2}", cond.mnemonic()),
            VSel { vd, vs1, vs2, rs1 } => write!(f, "vsel {vd}, {vs1}, {vs2}, {rs1}"),
        }
    }
}

/// Encodes a sequence as a little-endian word image.
pub fn encode_all(code: &[Instruction]) -> Result<Vec<u8>, IsaError> {
    let mut out = Vec::with_capacity(code.len() * 4);
    for insn in code {
        out.extend_from_slice(&insn.encode()?.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a little-endian word image.
pub fn decode_all(image: &[u8]) -> Result<Vec<Instruction>, IsaError> {
    if !image.len().is_multiple_of(4) {
        return Err(IsaError::TruncatedImage(image.len()));
    }
    image.chunks_exact(4).map(|c| Instruction::decode(u32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect()
}

/// Newline-separated disassembly.
pub fn disassemble(code: &[Instruction]) -> String {
    code.iter().map(|i| format!("{i}\n")).collect()
}
