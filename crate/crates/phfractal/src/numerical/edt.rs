//! Exact Euclidean distance transform by separable lower-envelope passes.
//! Squared distances stay integer-valued throughout, so the result is exact
//! up to the final square root.

use super::grid::Bitmap;
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::Write;

/// Per-cell Euclidean distance (in grid units) from the cell center to the
/// nearest occupied cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub ambient_dim: usize,
    pub shape: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl DistanceField {
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// One-dimensional squared-distance transform: d[q] = min_p (q−p)² + f[p].
/// Infinite samples carry no parabola. Scratch slices all have length n
/// except `z`, which needs n+1.
fn dt_line(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut any = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        if !any {
            any = true;
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !any {
        d.fill(f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for q in 0..n {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let diff = q as i64 - p as i64;
        d[q] = (diff * diff) as f64 + f[p];
    }
}

/// Raw pointer handed to rayon workers; every worker touches a disjoint
/// strided line, established by the caller.
struct Lines(*mut f64);
unsafe impl Send for Lines {}
unsafe impl Sync for Lines {}

fn axis_pass(values: &mut [f64], shape: [usize; 3], axis: usize) {
    let n = shape[axis];
    let stride = match axis {
        0 => 1,
        1 => shape[0],
        _ => shape[0] * shape[1],
    };
    // enumerate line start offsets: all coordinates with axis component 0
    let mut starts = Vec::new();
    for zc in 0..if axis == 2 { 1 } else { shape[2] } {
        for yc in 0..if axis == 1 { 1 } else { shape[1] } {
            for xc in 0..if axis == 0 { 1 } else { shape[0] } {
                starts.push(xc + shape[0] * (yc + shape[1] * zc));
            }
        }
    }
    let ptr = Lines(values.as_mut_ptr());
    let ptr = &ptr;
    starts.par_iter().for_each_init(
        || (vec![0.0; n], vec![0.0; n], vec![0usize; n], vec![0.0; n + 1]),
        |(f, d, v, z), &start| {
            let base = ptr.0;
            for (i, slot) in f.iter_mut().enumerate() {
                *slot = unsafe { *base.add(start + i * stride) };
            }
            dt_line(f, d, v, z);
            for (i, &val) in d.iter().enumerate() {
                unsafe { *base.add(start + i * stride) = val };
            }
        },
    );
}

pub fn edt(bitmap: &Bitmap) -> Result<DistanceField> {
    if bitmap.occupied_count() == 0 {
        return Err(Error::argument("distance transform needs at least one occupied cell"));
    }
    let total = bitmap.len();
    let mut sq: Vec<f64> = (0..total)
        .map(|i| if bitmap.get(i) { 0.0 } else { f64::INFINITY })
        .collect();
    for axis in 0..bitmap.ambient_dim {
        axis_pass(&mut sq, bitmap.shape, axis);
    }
    sq.par_iter_mut().for_each(|v| *v = v.sqrt());
    Ok(DistanceField {
        ambient_dim: bitmap.ambient_dim,
        shape: bitmap.shape,
        spacing: bitmap.spacing,
        origin: bitmap.origin,
        values: sq,
    })
}

/// One z-slice (or the whole field for 1-D/2-D) as CSV rows of x-values.
pub fn write_field_slice_csv<W: Write>(
    field: &DistanceField,
    z: usize,
    mut out: W,
) -> Result<()> {
    if z >= field.shape[2] {
        return Err(Error::argument(format!("slice {z} out of {}", field.shape[2])));
    }
    for y in 0..field.shape[1] {
        let row: Vec<String> = (0..field.shape[0])
            .map(|x| format!("{:.16e}", field.values[field.index(x, y, z)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn brute_force_edt(bitmap: &Bitmap) -> Vec<f64> {
    let mut occupied = Vec::new();
    for z in 0..bitmap.shape[2] {
        for y in 0..bitmap.shape[1] {
            for x in 0..bitmap.shape[0] {
                if bitmap.get(bitmap.index(x, y, z)) {
                    occupied.push([x as i64, y as i64, z as i64]);
                }
            }
        }
    }
    let mut out = vec![0.0; bitmap.len()];
    for z in 0..bitmap.shape[2] {
        for y in 0..bitmap.shape[1] {
            for x in 0..bitmap.shape[0] {
                let best = occupied
                    .iter()
                    .map(|p| {
                        let dx = x as i64 - p[0];
                        let dy = y as i64 - p[1];
                        let dz = z as i64 - p[2];
                        dx * dx + dy * dy + dz * dz
                    })
                    .min()
                    .unwrap();
                out[bitmap.index(x, y, z)] = (best as f64).sqrt();
            }
        }
    }
    out
}
