//! Memory map and the byte-addressed memories behind it.

/// Instruction memory base address.
pub const IMEM_BASE: u32 = 0x0000_0000;
/// Scalar data memory base address.
pub const DMEM_BASE: u32 = 0x1000_0000;
/// Vector memory base address.
pub const VMEM_BASE: u32 = 0x2000_0000;

pub const VECTOR_BYTES: usize = 64;

pub const DEFAULT_IMEM_BYTES: usize = 128 * 1024;
pub const DEFAULT_DMEM_BYTES: usize = 128 * 1024;
pub const DEFAULT_VMEM_BYTES: usize = 1024 * 1024;

/// A flat little-endian memory mapped at `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    base: u32,
    bytes: Vec<u8>,
}

impl Memory {
    pub fn new(base: u32, size: usize) -> Self {
        Memory { base, bytes: vec![0; size] }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Offset of `[addr, addr + len)` if it lies entirely inside.
    pub fn offset(&self, addr: u32, len: usize) -> Option<usize> {
        let off = addr.checked_sub(self.base)? as usize;
        (off.checked_add(len)? <= self.bytes.len()).then_some(off)
    }

    pub fn slice(&self, addr: u32, len: usize) -> Option<&[u8]> {
        self.offset(addr, len).map(|o| &self.bytes[o..o + len])
    }

    pub fn slice_mut(&mut self, addr: u32, len: usize) -> Option<&mut [u8]> {
        self.offset(addr, len).map(|o| &mut self.bytes[o..o + len])
    }

    /// Overwrites the start of the memory with `image`, zeroing the rest.
    /// Returns `false` if the image does not fit.
    pub fn load_image(&mut self, image: &[u8]) -> bool {
        if image.len() > self.bytes.len() {
            return false;
        }
        self.bytes.fill(0);
        self.bytes[..image.len()].copy_from_slice(image);
        true
    }
}
