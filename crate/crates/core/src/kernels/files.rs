//! Binary input-event lists and weight matrices.
//!
//! Events are little-endian `(u32 timestep, u32 neuron)` pairs sorted by
//! time. A weight matrix is a header of three little-endian `u32`s
//! (`rows`, `cols`, `frac_bits`) followed by `rows * cols` little-endian
//! `i16` values in row-major order.

use std::io::{self, Read, Write};

use crate::fixedpoint::QFormat;

use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InputEvent {
    pub time: u32,
    pub neuron: u32,
}

pub fn write_events<W: Write>(mut w: W, events: &[InputEvent]) -> io::Result<()> {
    for e in events {
        w.write_all(&e.time.to_le_bytes())?;
        w.write_all(&e.neuron.to_le_bytes())?;
    }
    Ok(())
}

/// Reads an event list, rejecting a truncated pair or unsorted times.
pub fn read_events<R: Read>(mut r: R) -> Result<Vec<InputEvent>, KernelError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(KernelError::InvalidParams(format!("event file length {} is not a multiple of 8", bytes.len())));
    }
    let events: Vec<InputEvent> = bytes
        .chunks_exact(8)
        .map(|c| InputEvent {
            time: u32::from_le_bytes([c[0], c[1], c[2], c[3]]),
            neuron: u32::from_le_bytes([c[4], c[5], c[6], c[7]]),
        })
        .collect();
    if events.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(KernelError::InvalidParams("events are not time-sorted".into()));
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    pub rows: usize,
    pub cols: usize,
    pub format: QFormat,
    /// Row-major raw values.
    pub data: Vec<i16>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize, format: QFormat) -> Self {
        WeightMatrix { rows, cols, format, data: vec![0; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[i16] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i16 {
        self.data[r * self.cols + c]
    }
}

pub fn write_weights<W: Write>(mut w: W, m: &WeightMatrix) -> io::Result<()> {
    for field in [m.rows as u32, m.cols as u32, m.format.frac_bits() as u32] {
        w.write_all(&field.to_le_bytes())?;
    }
    for value in &m.data {
        w.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_weights<R: Read>(mut r: R) -> Result<WeightMatrix, KernelError> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    let field = |i: usize| u32::from_le_bytes([header[4 * i], header[4 * i + 1], header[4 * i + 2], header[4 * i + 3]]);
    let (rows, cols) = (field(0) as usize, field(1) as usize);
    let format = QFormat::new(u8::try_from(field(2)).unwrap_or(u8::MAX))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| KernelError::InvalidParams("weight matrix dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(KernelError::InvalidParams(format!(
            "weight payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let data = bytes.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    Ok(WeightMatrix { rows, cols, format, data })
}
