//! Occupancy grids for pre-fractal approximations, plus the memory guard
//! consulted before large allocations.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Allocation ceiling for grids and complexes. Override with the
/// `PHFRACTAL_MEM_BUDGET` environment variable (in GiB).
#[derive(Debug, Clone, Copy)]
pub struct MemoryBudget {
    pub bytes: u64,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget { bytes: 8 << 30 }
    }
}

impl MemoryBudget {
    pub fn from_env() -> Self {
        match std::env::var("PHFRACTAL_MEM_BUDGET").ok().and_then(|v| v.parse::<f64>().ok()) {
            Some(gib) if gib > 0.0 => MemoryBudget { bytes: (gib * (1u64 << 30) as f64) as u64 },
            _ => MemoryBudget::default(),
        }
    }

    pub fn with_gib(gib: f64) -> Result<Self> {
        if !(gib > 0.0) {
            return Err(Error::argument(format!("memory budget must be positive, got {gib} GiB")));
        }
        Ok(MemoryBudget { bytes: (gib * (1u64 << 30) as f64) as u64 })
    }

    pub fn check(&self, needed: u64, what: &str) -> Result<()> {
        if needed > self.bytes {
            return Err(Error::Resource(format!(
                "{what} needs about {needed} bytes, over the {} byte budget",
                self.bytes
            )));
        }
        Ok(())
    }
}

/// Axis-aligned occupancy grid. Unused axes have extent 1; cell centers sit
/// at `origin + (i + 1/2)·h` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub ambient_dim: usize,
    pub shape: [usize; 3],
    /// Physical length per cell.
    pub spacing: f64,
    pub origin: [f64; 3],
    bits: Vec<u64>,
}

impl Bitmap {
    pub fn new(ambient_dim: usize, shape: [usize; 3], spacing: f64, origin: [f64; 3]) -> Result<Self> {
        if !(1..=3).contains(&ambient_dim) {
            return Err(Error::argument(format!("ambient dimension {ambient_dim} not in 1..=3")));
        }
        for (axis, &len) in shape.iter().enumerate() {
            let want = if axis < ambient_dim { len >= 2 } else { len == 1 };
            if !want {
                return Err(Error::argument(format!(
                    "axis {axis} extent {len} invalid for ambient dimension {ambient_dim}"
                )));
            }
        }
        if !(spacing > 0.0) {
            return Err(Error::argument(format!("spacing must be positive, got {spacing}")));
        }
        let total = shape[0] * shape[1] * shape[2];
        Ok(Bitmap {
            ambient_dim,
            shape,
            spacing,
            origin,
            bits: vec![0; total.div_ceil(64)],
        })
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, idx: usize) {
        self.bits[idx / 64] |= 1 << (idx % 64);
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Text header (dimension, sizes, spacing, origin) followed by the raw
/// little-endian bitset payload.
pub fn write_bitmap<W: Write>(bitmap: &Bitmap, mut out: W) -> Result<()> {
    writeln!(out, "phfractal-bitmap 1")?;
    writeln!(out, "dimension: {}", bitmap.ambient_dim)?;
    let d = bitmap.ambient_dim;
    let join = |xs: &[String]| xs.join(" ");
    writeln!(
        out,
        "sizes: {}",
        join(&bitmap.shape[..d].iter().map(|v| v.to_string()).collect::<Vec<_>>())
    )?;
    writeln!(out, "spacing: {:.16e}", bitmap.spacing)?;
    writeln!(
        out,
        "origin: {}",
        join(&bitmap.origin[..d].iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>())
    )?;
    writeln!(out, "encoding: raw")?;
    writeln!(out)?;
    for word in &bitmap.bits {
        out.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_bitmap<R: BufRead>(mut input: R) -> Result<Bitmap> {
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Parse("truncated bitmap header".into()));
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        header.push(line.to_string());
    }
    if header.first().map(String::as_str) != Some("phfractal-bitmap 1") {
        return Err(Error::Parse("not a phfractal bitmap".into()));
    }
    let field = |key: &str| -> Result<&str> {
        header
            .iter()
            .find_map(|l| l.strip_prefix(key))
            .map(str::trim)
            .ok_or_else(|| Error::Parse(format!("bitmap header missing {key}")))
    };
    let ambient_dim: usize =
        field("dimension:")?.parse().map_err(|e| Error::Parse(format!("dimension: {e}")))?;
    let mut shape = [1usize; 3];
    let sizes: Vec<usize> = field("sizes:")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| Error::Parse(format!("sizes: {e}"))))
        .collect::<Result<_>>()?;
    if sizes.len() != ambient_dim {
        return Err(Error::Parse("sizes do not match dimension".into()));
    }
    shape[..ambient_dim].copy_from_slice(&sizes);
    let spacing: f64 =
        field("spacing:")?.parse().map_err(|e| Error::Parse(format!("spacing: {e}")))?;
    let mut origin = [0.0f64; 3];
    let origins: Vec<f64> = field("origin:")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| Error::Parse(format!("origin: {e}"))))
        .collect::<Result<_>>()?;
    if origins.len() != ambient_dim {
        return Err(Error::Parse("origin does not match dimension".into()));
    }
    origin[..ambient_dim].copy_from_slice(&origins);

    let mut bitmap = Bitmap::new(ambient_dim, shape, spacing, origin)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    let want = bitmap.bits.len() * 8;
    if payload.len() != want {
        return Err(Error::Parse(format!(
            "bitmap payload is {} bytes, expected {want}",
            payload.len()
        )));
    }
    for (word, chunk) in bitmap.bits.iter_mut().zip(payload.chunks_exact(8)) {
        *word = u64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(bitmap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitmap_shape_validation() {
        assert!(Bitmap::new(2, [4, 4, 1], 0.25, [0.0; 3]).is_ok());
        assert!(Bitmap::new(2, [4, 1, 1], 0.25, [0.0; 3]).is_err(), "used axis too short");
        assert!(Bitmap::new(2, [4, 4, 2], 0.25, [0.0; 3]).is_err(), "unused axis not 1");
        assert!(Bitmap::new(0, [4, 4, 1], 0.25, [0.0; 3]).is_err());
        assert!(Bitmap::new(2, [4, 4, 1], 0.0, [0.0; 3]).is_err());
    }

    #[test]
    fn bit_access_round_trips() {
        let mut b = Bitmap::new(3, [5, 4, 3], 1.0, [0.0; 3]).unwrap();
        let picks = [(0, 0, 0), (4, 3, 2), (2, 1, 1)];
        for &(x, y, z) in &picks {
            b.set(b.index(x, y, z));
        }
        assert_eq!(b.occupied_count(), picks.len());
        for &(x, y, z) in &picks {
            assert!(b.get(b.index(x, y, z)));
        }
        assert!(!b.get(b.index(1, 0, 0)));
    }

    #[test]
    fn bitmap_io_round_trips() {
        let mut b = Bitmap::new(2, [9, 7, 1], 1.0 / 9.0, [0.0, 0.5, 0.0]).unwrap();
        for idx in [0, 8, 13, 62] {
            b.set(idx);
        }
        let mut buf = Vec::new();
        write_bitmap(&b, &mut buf).unwrap();
        assert_eq!(read_bitmap(&buf[..]).unwrap(), b);

        assert!(read_bitmap(&b"garbage\n\n"[..]).is_err());
    }

    #[test]
    fn budget_guard_trips() {
        let tight = MemoryBudget { bytes: 1024 };
        assert!(tight.check(1024, "x").is_ok());
        assert!(matches!(tight.check(1025, "x"), Err(Error::Resource(_))));
    }
}
