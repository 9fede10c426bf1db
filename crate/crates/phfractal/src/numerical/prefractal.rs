//! Depth-k pre-fractal rasterization: the union of images of the unit cube
//! under all length-k IFS compositions, marked on an aligned cell grid.

use super::grid::{Bitmap, MemoryBudget};
use crate::error::{Error, Result};
use crate::families::FractalSpec;

/// A cell is occupied iff its center lies in the depth-`k` pre-fractal.
/// `resolution` is cells per unit side; it must be a multiple of (1/r)^k so
/// every depth-k cube covers an exact whole-cell range.
pub fn prefractal_bitmap(
    spec: &FractalSpec,
    depth: u32,
    resolution: usize,
    budget: &MemoryBudget,
) -> Result<Bitmap> {
    if depth == 0 {
        return Err(Error::argument("depth starts at 1"));
    }
    if spec.ifs.is_empty() {
        return Err(Error::argument(format!("spec {} has no IFS maps", spec.name)));
    }
    let ratio = spec.ifs[0].ratio;
    if spec.ifs.iter().any(|m| m.ratio != ratio) {
        return Err(Error::argument("IFS maps must share one contraction ratio"));
    }
    let inv = 1.0 / ratio;
    if (inv - inv.round()).abs() > 1e-9 || inv.round() < 2.0 {
        return Err(Error::argument(format!(
            "cell alignment needs an integer 1/r ≥ 2, got 1/r = {inv}"
        )));
    }
    let inv = inv.round() as usize;
    let align = inv
        .checked_pow(depth)
        .filter(|&a| a <= resolution.max(1))
        .ok_or_else(|| {
            Error::argument(format!(
                "depth {depth} needs resolution ≥ {}",
                inv.checked_pow(depth).map_or_else(|| "overflow".into(), |a| a.to_string())
            ))
        })?;
    if resolution % align != 0 {
        let next = resolution.div_ceil(align) * align;
        return Err(Error::argument(format!(
            "resolution {resolution} is not a multiple of (1/r)^k = {align}; \
             smallest valid is {next}"
        )));
    }

    let d = spec.ambient_dim;
    let mut shape = [1usize; 3];
    shape[..d].fill(resolution);
    let total = shape[0] * shape[1] * shape[2];
    budget.check((total as u64).div_ceil(64) * 8, "pre-fractal bitmap")?;
    // unit-cube model: physical side = diameter/√d, so h·n spans one side
    let side = spec.diameter.value() / (d as f64).sqrt();
    let mut bitmap = Bitmap::new(d, shape, side / resolution as f64, [0.0; 3])?;

    // cells per depth-k cube
    let cube = resolution / align;
    // per-level translation offsets in cells: t·n·r^(level-1), exact by the
    // alignment precondition
    let mut offsets: Vec<Vec<[i64; 3]>> = Vec::with_capacity(depth as usize);
    for level in 1..=depth {
        let factor = resolution as f64 * ratio.powi(level as i32 - 1);
        let mut level_offsets = Vec::with_capacity(spec.ifs.len());
        for map in &spec.ifs {
            let mut cellwise = [0i64; 3];
            for axis in 0..d {
                let raw = map.translation[axis] * factor;
                if (raw - raw.round()).abs() > 1e-6 {
                    return Err(Error::argument(format!(
                        "translation {} does not land on the cell grid at level {level}",
                        map.translation[axis]
                    )));
                }
                cellwise[axis] = raw.round() as i64;
            }
            level_offsets.push(cellwise);
        }
        offsets.push(level_offsets);
    }

    let mut stack = vec![(0u32, [0i64; 3])];
    while let Some((level, base)) = stack.pop() {
        if level == depth {
            fill_cube(&mut bitmap, base, cube, d)?;
            continue;
        }
        for offset in &offsets[level as usize] {
            let mut child = base;
            for axis in 0..d {
                child[axis] += offset[axis];
            }
            stack.push((level + 1, child));
        }
    }
    if bitmap.occupied_count() == 0 {
        return Err(Error::argument("pre-fractal occupies no cells"));
    }
    Ok(bitmap)
}

fn fill_cube(bitmap: &mut Bitmap, base: [i64; 3], cube: usize, d: usize) -> Result<()> {
    let mut lo = [0usize; 3];
    let mut hi = [1usize; 3];
    for axis in 0..d {
        let start = base[axis];
        let end = start + cube as i64;
        if start < 0 || end > bitmap.shape[axis] as i64 {
            return Err(Error::argument(format!(
                "IFS image [{start}, {end}) leaves the unit-cube grid on axis {axis}"
            )));
        }
        lo[axis] = start as usize;
        hi[axis] = end as usize;
    }
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                let idx = bitmap.index(x, y, z);
                bitmap.set(idx);
            }
        }
    }
    Ok(())
}
