//! Little-endian primitives for the binary container formats.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_u32::<LE>(v)?;
    Ok(())
}

pub(crate) fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_u64::<LE>(v)?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(r.read_u32::<LE>()?)
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(r.read_u64::<LE>()?)
}

pub(crate) fn read_usize(r: &mut impl Read) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v).map_err(|_| Error::format(format!("length {v} overflows usize")))
}

pub(crate) fn write_f32s(w: &mut impl Write, v: &[f32]) -> Result<()> {
    for &x in v {
        w.write_f32::<LE>(x)?;
    }
    Ok(())
}

pub(crate) fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

pub(crate) fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut out = vec![0f32; n];
    r.read_f32_into::<LE>(&mut out)?;
    Ok(out)
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0f64; n];
    r.read_f64_into::<LE>(&mut out)?;
    Ok(out)
}

/// Rejects absurd lengths from corrupt headers before allocating.
pub(crate) fn checked_len(a: usize, b: usize, what: &str) -> Result<usize> {
    const LIMIT: usize = 1 << 36;
    a.checked_mul(b)
        .filter(|&n| n <= LIMIT)
        .ok_or_else(|| Error::format(format!("{what}: size {a}x{b} is implausible")))
}
