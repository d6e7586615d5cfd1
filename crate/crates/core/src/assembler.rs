//! Programmatic assembler.
//!
//! Instructions are appended one at a time; control flow refers to
//! [`Label`]s that may be bound before or after use. Branch and jump
//! offsets are patched in [`Assembler::finalize`]. Initial contents of the
//! scalar and vector data memories are declared through the same builder so
//! a finalized [`Program`] is self-contained.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::isa::{BranchCond, ImmOp, Instruction, IsaError, XReg};
use crate::memory::{DMEM_BASE, VECTOR_BYTES, VMEM_BASE};
use crate::LANES;

#[derive(Debug, Error)]
pub enum AsmError {
    #[error("label {0} was never bound")]
    UnboundLabel(usize),
    #[error("label {0} bound twice")]
    DuplicateBind(usize),
    #[error("branch at {at:#x} cannot reach target {target:#x}")]
    BranchOutOfRange { at: u32, target: u32 },
    #[error("region {name} overlaps region {other}")]
    OverlappingRegion { name: String, other: String },
    #[error("region {0} is empty or reversed")]
    EmptyRegion(String),
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error("malformed program container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A position in the instruction stream, resolved when bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label(usize);

/// A named, half-open range of code addresses `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub start: u32,
    pub end: u32,
}

impl Region {
    pub fn contains(&self, pc: u32) -> bool {
        (self.start..self.end).contains(&pc)
    }
}

#[derive(Debug, Clone, Copy)]
enum Fixup {
    Branch { cond: BranchCond, rs1: XReg, rs2: XReg },
    Jal { rd: XReg },
}

/// An assembled program plus the initial images of both data memories.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub code: Vec<Instruction>,
    /// Byte address of the first instruction to execute.
    pub entry: u32,
    /// Loaded at the base of scalar data memory.
    pub scalar_data: Vec<u8>,
    /// Loaded at the base of vector memory; length is a multiple of 64.
    pub vector_data: Vec<u8>,
    pub regions: Vec<Region>,
}

const MAGIC: u32 = u32::from_le_bytes(*b"FENN");
const FORMAT_VERSION: u32 = 1;

impl Program {
    pub fn words(&self) -> Result<Vec<u32>, IsaError> {
        self.code.iter().map(Instruction::encode).collect()
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    /// Writes the versioned container.
    ///
    /// Layout (all integers little-endian `u32` unless noted):
    ///
    /// ```text
    /// magic "FENN" | version = 1 | entry
    /// code section:        byte length, instruction words
    /// scalar data section: byte length, bytes
    /// vector data section: byte length, bytes
    /// region section:      byte length, count, then per region:
    ///                      start, end, name length (u16), UTF-8 name
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), AsmError> {
        let code = crate::isa::encode_all(&self.code)?;
        let mut regions = Vec::new();
        regions.extend_from_slice(&(self.regions.len() as u32).to_le_bytes());
        for r in &self.regions {
            regions.extend_from_slice(&r.start.to_le_bytes());
            regions.extend_from_slice(&r.end.to_le_bytes());
            let name = r.name.as_bytes();
            let len =
                u16::try_from(name.len()).map_err(|_| AsmError::Format(format!("region name too long: {}", r.name)))?;
            regions.extend_from_slice(&len.to_le_bytes());
            regions.extend_from_slice(name);
        }
        w.write_all(&MAGIC.to_le_bytes())?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.entry.to_le_bytes())?;
        for section in [&code, &self.scalar_data, &self.vector_data, &regions] {
            w.write_all(&(section.len() as u32).to_le_bytes())?;
            w.write_all(section)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, AsmError> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Program, AsmError> {
        fn u32_of<R: Read>(r: &mut R) -> Result<u32, AsmError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn section<R: Read>(r: &mut R) -> Result<Vec<u8>, AsmError> {
            let len = u32_of(r)? as usize;
            let mut buf = Vec::new();
            r.take(len as u64).read_to_end(&mut buf)?;
            if buf.len() != len {
                return Err(AsmError::Format("truncated section".into()));
            }
            Ok(buf)
        }
        if u32_of(&mut r)? != MAGIC {
            return Err(AsmError::Format("bad magic".into()));
        }
        let version = u32_of(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(AsmError::Format(format!("unsupported version {version}")));
        }
        let entry = u32_of(&mut r)?;
        let code = crate::isa::decode_all(&section(&mut r)?)?;
        let scalar_data = section(&mut r)?;
        let vector_data = section(&mut r)?;
        if vector_data.len() % VECTOR_BYTES != 0 {
            return Err(AsmError::Format("vector image is not whole vectors".into()));
        }
        let table = section(&mut r)?;
        let mut t = table.as_slice();
        let count = u32_of(&mut t)?;
        let mut regions = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let start = u32_of(&mut t)?;
            let end = u32_of(&mut t)?;
            let mut len = [0u8; 2];
            t.read_exact(&mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            t.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| AsmError::Format(e.to_string()))?;
            regions.push(Region { name, start, end });
        }
        Ok(Program { code, entry, scalar_data, vector_data, regions })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Program, AsmError> {
        Self::read_from(bytes)
    }
}

/// Incremental program builder.
#[derive(Debug, Default)]
pub struct Assembler {
    code: Vec<Instruction>,
    fixups: Vec<(usize, Label, Fixup)>,
    labels: Vec<Option<usize>>,
    regions: Vec<Region>,
    entry: Option<Label>,
    scalar_data: Vec<u8>,
    vector_data: Vec<u8>,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Byte address of the next instruction.
    pub fn pc(&self) -> u32 {
        (self.code.len() * 4) as u32
    }

    /// Appends an instruction, returning its index.
    pub fn emit(&mut self, insn: Instruction) -> usize {
        self.code.push(insn);
        self.code.len() - 1
    }

    pub fn label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    /// Binds `label` to the next instruction.
    pub fn bind(&mut self, label: Label) -> Result<(), AsmError> {
        let slot = &mut self.labels[label.0];
        if slot.is_some() {
            return Err(AsmError::DuplicateBind(label.0));
        }
        *slot = Some(self.code.len());
        Ok(())
    }

    pub fn bound_label(&mut self) -> Label {
        let l = self.label();
        self.labels[l.0] = Some(self.code.len());
        l
    }

    pub fn address_of(&self, label: Label) -> Option<u32> {
        self.labels[label.0].map(|i| (i * 4) as u32)
    }

    pub fn branch(&mut self, cond: BranchCond, rs1: XReg, rs2: XReg, target: Label) -> usize {
        let at = self.emit(Instruction::Branch { cond, rs1, rs2, offset: 0 });
        self.fixups.push((at, target, Fixup::Branch { cond, rs1, rs2 }));
        at
    }

    pub fn jal(&mut self, rd: XReg, target: Label) -> usize {
        let at = self.emit(Instruction::Jal { rd, offset: 0 });
        self.fixups.push((at, target, Fixup::Jal { rd }));
        at
    }

    /// Unconditional jump.
    pub fn jump(&mut self, target: Label) -> usize {
        self.jal(XReg::ZERO, target)
    }

    /// Loads a 32-bit constant with `addi` or `lui`+`addi`.
    pub fn li(&mut self, rd: XReg, value: u32) {
        let low = ((value as i32) << 20) >> 20;
        let high = value.wrapping_sub(low as u32) >> 12;
        if high == 0 {
            self.emit(Instruction::OpImm { op: ImmOp::Addi, rd, rs1: XReg::ZERO, imm: low });
        } else {
            self.emit(Instruction::Lui { rd, imm20: high });
            if low != 0 {
                self.emit(Instruction::OpImm { op: ImmOp::Addi, rd, rs1: rd, imm: low });
            }
        }
    }

    pub fn set_entry(&mut self, label: Label) {
        self.entry = Some(label);
    }

    /// Records `[start, end)` as a named region; both labels must be bound.
    pub fn mark_region(&mut self, name: &str, start: Label, end: Label) -> Result<(), AsmError> {
        let start = self.address_of(start).ok_or(AsmError::UnboundLabel(start.0))?;
        let end = self.address_of(end).ok_or(AsmError::UnboundLabel(end.0))?;
        if end <= start {
            return Err(AsmError::EmptyRegion(name.to_string()));
        }
        if let Some(other) = self.regions.iter().find(|r| start < r.end && r.start < end) {
            return Err(AsmError::OverlappingRegion { name: name.to_string(), other: other.name.clone() });
        }
        self.regions.push(Region { name: name.to_string(), start, end });
        Ok(())
    }

    /// Reserves `len` zeroed bytes of scalar data memory aligned to `align`,
    /// returning the absolute address.
    pub fn alloc_scalar(&mut self, len: usize, align: usize) -> u32 {
        let at = self.scalar_data.len().next_multiple_of(align.max(1));
        self.scalar_data.resize(at + len, 0);
        DMEM_BASE + at as u32
    }

    pub fn scalar_words(&mut self, words: &[u32]) -> u32 {
        let addr = self.alloc_scalar(words.len() * 4, 4);
        for (i, w) in words.iter().enumerate() {
            self.write_scalar_u32(addr + 4 * i as u32, *w);
        }
        addr
    }

    pub fn write_scalar_u32(&mut self, addr: u32, value: u32) {
        let off = (addr - DMEM_BASE) as usize;
        self.scalar_data[off..off + 4].copy_from_slice(&value.to_le_bytes());
    }

    /// Reserves `count` zeroed vectors, returning the absolute address.
    pub fn alloc_vectors(&mut self, count: usize) -> u32 {
        let at = self.vector_data.len();
        self.vector_data.resize(at + count * VECTOR_BYTES, 0);
        VMEM_BASE + at as u32
    }

    /// Appends initialized vectors, returning the address of the first.
    pub fn vectors(&mut self, data: &[[i16; LANES]]) -> u32 {
        let addr = self.alloc_vectors(data.len());
        for (i, vector) in data.iter().enumerate() {
            self.write_vector(addr + (i * VECTOR_BYTES) as u32, vector);
        }
        addr
    }

    pub fn splat(&mut self, value: i16) -> u32 {
        self.vectors(&[[value; LANES]])
    }

    pub fn write_vector(&mut self, addr: u32, value: &[i16; LANES]) {
        let off = (addr - VMEM_BASE) as usize;
        for (lane, v) in value.iter().enumerate() {
            self.vector_data[off + 2 * lane..off + 2 * lane + 2].copy_from_slice(&v.to_le_bytes());
        }
    }

    pub fn finalize(mut self) -> Result<Program, AsmError> {
        for &(at, label, fixup) in &self.fixups {
            let target_index = self.labels[label.0].ok_or(AsmError::UnboundLabel(label.0))?;
            let at_addr = (at * 4) as u32;
            let target = (target_index * 4) as u32;
            let offset = target as i64 - at_addr as i64;
            let insn = match fixup {
                Fixup::Branch { cond, rs1, rs2 } => Instruction::Branch { cond, rs1, rs2, offset: offset as i32 },
                Fixup::Jal { rd } => Instruction::Jal { rd, offset: offset as i32 },
            };
            match insn.encode() {
                Ok(_) => self.code[at] = insn,
                Err(IsaError::FieldOverflow { .. }) => {
                    return Err(AsmError::BranchOutOfRange { at: at_addr, target });
                }
                Err(e) => return Err(e.into()),
            }
        }
        // Catch bad immediates now rather than at load time.
        for insn in &self.code {
            insn.encode()?;
        }
        let entry = match self.entry {
            Some(l) => self.address_of(l).ok_or(AsmError::UnboundLabel(l.0))?,
            None => 0,
        };
        self.regions.sort_by_key(|r| r.start);
        Ok(Program {
            code: self.code,
            entry,
            scalar_data: self.scalar_data,
            vector_data: self.vector_data,
            regions: self.regions,
        })
    }
}
