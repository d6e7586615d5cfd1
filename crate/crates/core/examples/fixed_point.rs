//! Fixed-point formats, saturation and the three rounding modes on the host.

use fenn::fixedpoint::{quantize, sat_add_raw, wrap_add_raw, QFormat, RoundingMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v_th = quantize(0.6, QFormat::S3_12, RoundingMode::RoundToNearest, 0)?;
    println!("V_th = {v_th}, raw {}", v_th.raw);

    println!(
        "0x7FFF + 1: saturating {:#06x}, wrapping {:#06x}",
        sat_add_raw(0x7FFF, 1),
        wrap_add_raw(0x7FFF, 1) as u16
    );

    let a = quantize(0.3, QFormat::S0_15, RoundingMode::RoundToNearest, 0)?;
    let b = quantize(-0.7, QFormat::S0_15, RoundingMode::RoundToNearest, 0)?;
    println!("exact a*b = {:.8}", a.to_real() * b.to_real());
    for mode in RoundingMode::ALL {
        let mean =
            (0..1u32 << 15).map(|e| a.mul(b, 15, mode, e as u16).map(|p| p.to_real())).sum::<Result<f64, _>>()?
                / 32768.0;
        println!("  {mode}: first {:.8}, mean over every entropy value {mean:.8}", a.mul(b, 15, mode, 0)?.to_real());
    }
    Ok(())
}
