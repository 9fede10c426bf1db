//! Persistence of the cubical sublevel filtration: union-find for degree 0,
//! boundary-matrix reduction over the two-element field (top dimension down,
//! with clearing) for the rest. Output is canonical and identical across
//! runs and worker counts.

use super::cubical::FilteredCubicalComplex;
use crate::barcodes::{Barcode, PersistenceDiagram};
use crate::error::{Error, Result};
use serde::Serialize;

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Symmetric difference of two ascending index lists.
fn xor_into(a: &mut Vec<u32>, b: &[u32]) {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    *a = out;
}

struct SortedCells {
    /// Cell indices in filtration order (value, dim, index).
    order: Vec<u32>,
    /// Inverse of `order`.
    rank: Vec<u32>,
    dims: Vec<u8>,
}

fn sort_cells(complex: &FilteredCubicalComplex) -> SortedCells {
    let total = complex.len();
    let dims: Vec<u8> = (0..total).map(|i| complex.dim_of(i) as u8).collect();
    let mut order: Vec<u32> = (0..total as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        complex.values[a as usize]
            .total_cmp(&complex.values[b as usize])
            .then(dims[a as usize].cmp(&dims[b as usize]))
            .then(a.cmp(&b))
    });
    let mut rank = vec![0u32; total];
    for (r, &cell) in order.iter().enumerate() {
        rank[cell as usize] = r as u32;
    }
    SortedCells { order, rank, dims }
}

/// Degree-0 bars by union-find along the sorted edges; the elder component
/// (smaller filtration rank of its root) survives each merge.
fn degree_zero(complex: &FilteredCubicalComplex, sorted: &SortedCells) -> Vec<Barcode> {
    let total = complex.len();
    let mut parent: Vec<u32> = (0..total as u32).collect();
    let mut bars = Vec::new();
    let mut faces = Vec::with_capacity(6);
    for &cell in &sorted.order {
        if sorted.dims[cell as usize] != 1 {
            continue;
        }
        complex.faces(cell as usize, &mut faces);
        let a = find(&mut parent, faces[0]);
        let b = find(&mut parent, faces[1]);
        if a == b {
            continue;
        }
        let (elder, younger) = if sorted.rank[a as usize] < sorted.rank[b as usize] {
            (a, b)
        } else {
            (b, a)
        };
        let birth = complex.values[younger as usize];
        let death = complex.values[cell as usize];
        if death > birth {
            bars.push(Barcode::new(0, birth, death, 1).expect("positive interval"));
        }
        parent[younger as usize] = elder;
    }
    for idx in 0..total {
        if sorted.dims[idx] == 0 && find(&mut parent, idx as u32) == idx as u32 {
            bars.push(
                Barcode::new(0, complex.values[idx], f64::INFINITY, 1).expect("essential"),
            );
        }
    }
    bars
}

/// Reduce the boundary matrices from the top dimension down; columns whose
/// cells were pivots one dimension up are skipped (their classes are already
/// accounted for). Pairs with equal values are not bars.
fn reduce_higher(complex: &FilteredCubicalComplex, sorted: &SortedCells) -> Result<Vec<Barcode>> {
    let total = complex.len();
    let mut bars = Vec::new();
    let mut cleared = vec![false; total];
    let mut pivot_owner = vec![u32::MAX; total];
    let mut arena: Vec<Vec<u32>> = Vec::new();
    let mut faces = Vec::with_capacity(6);
    for cod in (2..=complex.ambient_dim).rev() {
        for &cell_u in &sorted.order {
            let cell = cell_u as usize;
            if sorted.dims[cell] as usize != cod || cleared[cell] {
                continue;
            }
            complex.faces(cell, &mut faces);
            let mut col: Vec<u32> = faces.iter().map(|&f| sorted.rank[f as usize]).collect();
            col.sort_unstable();
            while let Some(&p) = col.last() {
                let owner = pivot_owner[p as usize];
                if owner == u32::MAX {
                    pivot_owner[p as usize] = arena.len() as u32;
                    let pivot_cell = sorted.order[p as usize] as usize;
                    cleared[pivot_cell] = true;
                    let birth = complex.values[pivot_cell];
                    let death = complex.values[cell];
                    if death > birth {
                        bars.push(Barcode::new(cod - 1, birth, death, 1)?);
                    }
                    arena.push(col);
                    break;
                }
                xor_into(&mut col, &arena[owner as usize]);
            }
        }
    }
    Ok(bars)
}

/// Interval decomposition of the filtration, in grid units. The one
/// unbounded degree-0 bar keeps death = ∞ until `calibrate` caps it.
pub fn persistence(complex: &FilteredCubicalComplex) -> Result<PersistenceDiagram> {
    if !complex.is_monotone() {
        return Err(Error::argument("filtration is not monotone: cell below one of its faces"));
    }
    let sorted = sort_cells(complex);
    let mut bars = degree_zero(complex, &sorted);
    bars.extend(reduce_higher(complex, &sorted)?);
    let diameter = complex.values.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    PersistenceDiagram::new(complex.ambient_dim, diameter, bars, 0.0)
}

/// Convert a grid-unit diagram to physical units: multiply by the spacing,
/// cap unbounded deaths at the diameter, and drop bars shorter than
/// `floor_factor` cells — below that the grid cannot be trusted.
pub fn calibrate(
    diagram: &PersistenceDiagram,
    h: f64,
    d_inf: f64,
    floor_factor: f64,
) -> Result<PersistenceDiagram> {
    if !(h > 0.0) {
        return Err(Error::argument(format!("spacing must be positive, got {h}")));
    }
    if !(d_inf > 0.0) || !d_inf.is_finite() {
        return Err(Error::argument(format!("diameter must be positive, got {d_inf}")));
    }
    if !(floor_factor >= 0.0) {
        return Err(Error::argument(format!("floor factor must be ≥ 0, got {floor_factor}")));
    }
    let mut bars = Vec::new();
    for bar in diagram.bars() {
        if bar.death.is_finite() {
            if bar.death - bar.birth < floor_factor {
                continue;
            }
            bars.push(Barcode::new(bar.dim, bar.birth * h, bar.death * h, bar.multiplicity)?);
        } else {
            let birth = bar.birth * h;
            if birth < d_inf {
                bars.push(Barcode::new(bar.dim, birth, d_inf, bar.multiplicity)?);
            }
        }
    }
    PersistenceDiagram::new(diagram.ambient_dim(), d_inf, bars, floor_factor * h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatchReport {
    pub matched: usize,
    pub unmatched_numeric: usize,
    pub unmatched_symbolic: usize,
    /// Largest coordinatewise displacement among matched pairs.
    pub max_displacement: f64,
}

/// Greedy globally-nearest matching of two bar sets (multiplicities
/// expanded), pairing only within a degree and within `tol` in the
/// max-metric on (birth, death).
pub fn match_report(
    numeric: &PersistenceDiagram,
    symbolic: &[Barcode],
    tol: f64,
) -> Result<MatchReport> {
    if !(tol >= 0.0) {
        return Err(Error::argument(format!("tolerance must be ≥ 0, got {tol}")));
    }
    let expand = |bars: &[Barcode]| -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for b in bars {
            for _ in 0..b.multiplicity {
                out.push((b.dim, b.birth, b.death));
            }
        }
        out
    };
    let nums = expand(numeric.bars());
    let syms = expand(symbolic);

    let mut pairs = Vec::new();
    for (i, n) in nums.iter().enumerate() {
        for (j, s) in syms.iter().enumerate() {
            if n.0 != s.0 {
                continue;
            }
            let d = (n.1 - s.1).abs().max((n.2 - s.2).abs());
            if d <= tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut num_used = vec![false; nums.len()];
    let mut sym_used = vec![false; syms.len()];
    let mut matched = 0usize;
    let mut max_displacement = 0.0f64;
    for (d, i, j) in pairs {
        if num_used[i] || sym_used[j] {
            continue;
        }
        num_used[i] = true;
        sym_used[j] = true;
        matched += 1;
        max_displacement = max_displacement.max(d);
    }
    Ok(MatchReport {
        matched,
        unmatched_numeric: nums.len() - matched,
        unmatched_symbolic: syms.len() - matched,
        max_displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerical::cubical::cubical_filtration;
    use crate::numerical::edt::{edt, DistanceField};
    use crate::numerical::grid::{Bitmap, MemoryBudget};
    use rand::{Rng, SeedableRng};

    fn complex_of(field: &DistanceField) -> FilteredCubicalComplex {
        cubical_filtration(field, &MemoryBudget::default()).unwrap()
    }

    fn field(ambient_dim: usize, shape: [usize; 3], values: Vec<f64>) -> DistanceField {
        DistanceField {
            ambient_dim,
            shape,
            spacing: 1.0,
            origin: [0.0; 3],
            values,
        }
    }

    /// Full boundary-matrix route for degree 0, used only to cross-check the
    /// union-find path: pairs of D₁ plus never-pivoted vertices.
    fn degree_zero_by_reduction(complex: &FilteredCubicalComplex) -> Vec<Barcode> {
        let sorted = sort_cells(complex);
        let total = complex.len();
        let mut bars = Vec::new();
        let mut pivot_owner = vec![u32::MAX; total];
        let mut arena: Vec<Vec<u32>> = Vec::new();
        let mut faces = Vec::with_capacity(6);
        let mut pivoted = vec![false; total];
        for &cell_u in &sorted.order {
            let cell = cell_u as usize;
            if sorted.dims[cell] != 1 {
                continue;
            }
            complex.faces(cell, &mut faces);
            let mut col: Vec<u32> = faces.iter().map(|&f| sorted.rank[f as usize]).collect();
            col.sort_unstable();
            while let Some(&p) = col.last() {
                let owner = pivot_owner[p as usize];
                if owner == u32::MAX {
                    pivot_owner[p as usize] = arena.len() as u32;
                    let vertex = sorted.order[p as usize] as usize;
                    pivoted[vertex] = true;
                    let birth = complex.values[vertex];
                    let death = complex.values[cell];
                    if death > birth {
                        bars.push(Barcode::new(0, birth, death, 1).unwrap());
                    }
                    arena.push(col);
                    break;
                }
                xor_into(&mut col, &arena[owner as usize]);
            }
        }
        for idx in 0..total {
            if sorted.dims[idx] == 0 && !pivoted[idx] {
                bars.push(Barcode::new(0, complex.values[idx], f64::INFINITY, 1).unwrap());
            }
        }
        bars
    }

    #[test]
    fn two_point_line_merges_at_half_gap() {
        let mut b = Bitmap::new(1, [10, 1, 1], 0.1, [0.0; 3]).unwrap();
        b.set(1);
        b.set(8); // gap of 6 empty cells
        let d = persistence(&complex_of(&edt(&b).unwrap())).unwrap();
        let bars = d.bars_in_dim(0);
        assert_eq!(bars.len(), 2);
        assert_eq!((bars[0].birth, bars[0].death), (0.0, 3.0));
        assert!(bars[1].death.is_infinite());

        let cal = calibrate(&d, 0.1, 2.0, 0.0).unwrap();
        let bars = cal.bars_in_dim(0);
        assert!((bars[0].death - 0.3).abs() < 1e-15);
        assert_eq!(bars[1].death, 2.0);
        assert_eq!(cal.resolution_floor(), 0.0);
    }

    #[test]
    fn hollow_square_has_one_loop_dying_at_inradius() {
        let mut b = Bitmap::new(2, [9, 9, 1], 1.0, [0.0; 3]).unwrap();
        for y in 0..9usize {
            for x in 0..9usize {
                if x.abs_diff(4).max(y.abs_diff(4)) == 2 {
                    let i = b.index(x, y, 0);
                    b.set(i);
                }
            }
        }
        let d = persistence(&complex_of(&edt(&b).unwrap())).unwrap();
        let loops = d.bars_in_dim(1);
        assert_eq!(loops.len(), 1);
        assert_eq!((loops[0].birth, loops[0].death), (0.0, 2.0));
        assert_eq!(d.bars_in_dim(0).len(), 1, "ring is connected");
    }

    #[test]
    fn union_find_matches_matrix_reduction_for_degree_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for case in 0..30 {
            let dim = rng.random_range(1..=3usize);
            let mut shape = [1usize; 3];
            for axis in 0..dim {
                shape[axis] = rng.random_range(2..=5);
            }
            let total = shape[0] * shape[1] * shape[2];
            let values: Vec<f64> = (0..total).map(|_| rng.random_range(0..8) as f64).collect();
            let c = complex_of(&field(dim, shape, values));
            let sorted = sort_cells(&c);
            let fast = crate::barcodes::canonicalize(degree_zero(&c, &sorted)).unwrap();
            let slow = crate::barcodes::canonicalize(degree_zero_by_reduction(&c)).unwrap();
            assert_eq!(fast, slow, "case {case}");
        }
    }

    #[test]
    fn euler_and_component_counts_agree_with_direct_counting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let dim = rng.random_range(2..=3usize);
            let mut shape = [1usize; 3];
            for axis in 0..dim {
                shape[axis] = rng.random_range(3..=6);
            }
            let total = shape[0] * shape[1] * shape[2];
            let values: Vec<f64> = (0..total).map(|_| rng.random_range(0..10) as f64).collect();
            let f = field(dim, shape, values);
            let c = complex_of(&f);
            let d = persistence(&c).unwrap();
            for _ in 0..20 {
                let eps = rng.random_range(0.0..11.0);
                let counts = c.counts_at(eps);
                let chi_cells = counts[0] as i64 - counts[1] as i64 + counts[2] as i64
                    - counts[3] as i64;
                let chi_bars: i64 = (0..=dim)
                    .map(|i| {
                        let b = d.betti_at(i, eps) as i64;
                        if i % 2 == 0 {
                            b
                        } else {
                            -b
                        }
                    })
                    .sum();
                assert_eq!(chi_bars, chi_cells, "ε = {eps}");
                // component count against flood fill on the thresholded grid
                assert_eq!(d.betti_at(0, eps), flood_fill_components(&f, eps), "ε = {eps}");
            }
        }
    }

    fn flood_fill_components(f: &DistanceField, eps: f64) -> u64 {
        let total = f.shape[0] * f.shape[1] * f.shape[2];
        let mut seen = vec![false; total];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..total {
            if seen[start] || f.values[start] > eps {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let x = idx % f.shape[0];
                let y = (idx / f.shape[0]) % f.shape[1];
                let z = idx / (f.shape[0] * f.shape[1]);
                let mut push = |n: usize| {
                    if !seen[n] && f.values[n] <= eps {
                        seen[n] = true;
                        stack.push(n);
                    }
                };
                if x > 0 {
                    push(idx - 1);
                }
                if x + 1 < f.shape[0] {
                    push(idx + 1);
                }
                if y > 0 {
                    push(idx - f.shape[0]);
                }
                if y + 1 < f.shape[1] {
                    push(idx + f.shape[0]);
                }
                if z > 0 {
                    push(idx - f.shape[0] * f.shape[1]);
                }
                if z + 1 < f.shape[2] {
                    push(idx + f.shape[0] * f.shape[1]);
                }
            }
        }
        components
    }

    #[test]
    fn non_monotone_complex_is_rejected() {
        let f = field(1, [3, 1, 1], vec![0.0, 1.0, 0.0]);
        let mut c = complex_of(&f);
        c.values[1] = 0.5; // edge below its endpoint vertex
        assert!(persistence(&c).is_err());
    }

    #[test]
    fn calibrate_drops_below_floor_and_caps_essential() {
        let bars = vec![
            Barcode::new(0, 0.0, 1.5, 1).unwrap(),
            Barcode::new(0, 0.0, f64::INFINITY, 1).unwrap(),
            Barcode::new(1, 2.0, 7.0, 3).unwrap(),
        ];
        let d = PersistenceDiagram::new(2, 10.0, bars, 0.0).unwrap();
        let cal = calibrate(&d, 0.01, 1.4, 2.0).unwrap();
        assert_eq!(cal.bars_in_dim(0).len(), 1, "1.5-cell bar is below the floor");
        assert_eq!(cal.bars_in_dim(0)[0].death, 1.4);
        let h1 = cal.bars_in_dim(1);
        assert_eq!((h1[0].birth, h1[0].death, h1[0].multiplicity), (0.02, 0.07, 3));
        assert!((cal.resolution_floor() - 0.02).abs() < 1e-15);

        let pure = calibrate(&d, 0.01, 1.4, 0.0).unwrap();
        assert_eq!(pure.bars_in_dim(0).len(), 2, "floor 0 keeps everything");
        assert!(calibrate(&d, 0.0, 1.4, 2.0).is_err());
    }

    #[test]
    fn matching_is_exact_on_identical_inputs() {
        let bars = vec![
            Barcode::new(0, 0.0, 0.5, 2).unwrap(),
            Barcode::new(1, 0.1, 0.3, 1).unwrap(),
        ];
        let d = PersistenceDiagram::new(2, 1.0, bars.clone(), 0.0).unwrap();
        let r = match_report(&d, &bars, 0.0).unwrap();
        assert_eq!((r.matched, r.unmatched_numeric, r.unmatched_symbolic), (3, 0, 0));
        assert_eq!(r.max_displacement, 0.0);

        // tol 0 on shifted input: nothing matches
        let shifted = vec![Barcode::new(0, 0.01, 0.51, 2).unwrap()];
        let r = match_report(&d, &shifted, 0.0).unwrap();
        assert_eq!(r.matched, 0);
        assert_eq!(r.unmatched_symbolic, 2);

        let r = match_report(&d, &shifted, 0.02).unwrap();
        assert_eq!(r.matched, 2);
        assert!((r.max_displacement - 0.01).abs() < 1e-15);
    }

    #[test]
    fn matching_respects_degree() {
        let num = PersistenceDiagram::new(
            2,
            1.0,
            vec![Barcode::new(0, 0.0, 0.5, 1).unwrap()],
            0.0,
        )
        .unwrap();
        let sym = vec![Barcode::new(1, 0.0, 0.5, 1).unwrap()];
        let r = match_report(&num, &sym, 1.0).unwrap();
        assert_eq!(r.matched, 0);
    }

    #[test]
    fn diagram_is_identical_across_worker_counts() {
        let mut b = Bitmap::new(2, [27, 27, 1], 1.0 / 27.0, [0.0; 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let idx = rng.random_range(0..b.len());
            b.set(idx);
        }
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| persistence(&complex_of(&edt(&b).unwrap())).unwrap())
        };
        let one = run(1);
        let three = run(3);
        assert_eq!(one.bars(), three.bars());
    }
}
