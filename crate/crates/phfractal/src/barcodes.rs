//! Finite persistence-diagram model: storage, Betti curves, lifetime
//! counting, and canonical CSV serialization.
//!
//! Bars are half-open `[birth, death)`: a class counted at ε satisfies
//! `birth ≤ ε < death`, which keeps Betti counts well-defined at transition
//! values. Degenerate bars (birth = death) are rejected at construction
//! rather than silently dropped, to surface pipeline bugs.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// A bar multiset entry: `multiplicity` identical intervals in homology
/// degree `dim`. `death` may be `f64::INFINITY` in raw numerical output;
/// calibrated and symbolic diagrams cap the essential class at the diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barcode {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub multiplicity: u64,
}

impl Barcode {
    pub fn new(dim: usize, birth: f64, death: f64, multiplicity: u64) -> Result<Self> {
        if !(birth >= 0.0) || birth.is_nan() || death.is_nan() {
            return Err(Error::argument(format!("bad bar endpoints ({birth}, {death})")));
        }
        if !(birth < death) {
            return Err(Error::argument(format!(
                "bar birth must precede death, got ({birth}, {death})"
            )));
        }
        if multiplicity == 0 {
            return Err(Error::argument("bar multiplicity must be at least 1"));
        }
        Ok(Barcode { dim, birth, death, multiplicity })
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }
}

fn bar_key(b: &Barcode) -> (usize, u64, u64) {
    // total_cmp order as a sortable key; births/deaths are non-negative so
    // the bit patterns order correctly.
    (b.dim, b.birth.to_bits(), b.death.to_bits())
}

/// Sort by (dim, birth, death) and merge bars with identical keys into one
/// multiplicity. Idempotent.
pub fn canonicalize(mut bars: Vec<Barcode>) -> Result<Vec<Barcode>> {
    bars.sort_unstable_by_key(bar_key);
    let mut out: Vec<Barcode> = Vec::with_capacity(bars.len());
    for bar in bars {
        match out.last_mut() {
            Some(last) if bar_key(last) == bar_key(&bar) => {
                last.multiplicity = last
                    .multiplicity
                    .checked_add(bar.multiplicity)
                    .ok_or_else(|| Error::Range("bar multiplicity overflow".into()))?;
            }
            _ => out.push(bar),
        }
    }
    Ok(out)
}

/// A finite diagram with ambient metadata. Immutable after construction;
/// bars are kept in canonical (dim, birth, death) order with equal keys
/// merged. `resolution_floor` is 0 for exact/symbolic diagrams and
/// `floor_factor·h` for calibrated numerical ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    ambient_dim: usize,
    diameter: f64,
    bars: Vec<Barcode>,
    resolution_floor: f64,
}

impl PersistenceDiagram {
    pub fn new(
        ambient_dim: usize,
        diameter: f64,
        bars: Vec<Barcode>,
        resolution_floor: f64,
    ) -> Result<Self> {
        if !(1..=3).contains(&ambient_dim) {
            return Err(Error::argument(format!("ambient dimension {ambient_dim} not in 1..=3")));
        }
        if !(diameter > 0.0) || !diameter.is_finite() {
            return Err(Error::argument(format!("diameter must be positive, got {diameter}")));
        }
        if !(resolution_floor >= 0.0) || !resolution_floor.is_finite() {
            return Err(Error::argument(format!("bad resolution floor {resolution_floor}")));
        }
        for b in &bars {
            if b.dim > ambient_dim {
                return Err(Error::argument(format!(
                    "bar degree {} exceeds ambient dimension {ambient_dim}",
                    b.dim
                )));
            }
        }
        Ok(PersistenceDiagram {
            ambient_dim,
            diameter,
            bars: canonicalize(bars)?,
            resolution_floor,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn resolution_floor(&self) -> f64 {
        self.resolution_floor
    }

    pub fn bars(&self) -> &[Barcode] {
        &self.bars
    }

    pub fn bars_in_dim(&self, i: usize) -> &[Barcode] {
        let lo = self.bars.partition_point(|b| b.dim < i);
        let hi = self.bars.partition_point(|b| b.dim <= i);
        &self.bars[lo..hi]
    }

    /// Number of degree-`i` classes alive at ε: Σ multiplicity over bars with
    /// birth ≤ ε < death.
    pub fn betti_at(&self, i: usize, eps: f64) -> u64 {
        self.bars_in_dim(i)
            .iter()
            .filter(|b| b.birth <= eps && eps < b.death)
            .map(|b| b.multiplicity)
            .sum()
    }

    /// Number of degree-`i` bars with lifetime strictly above ε.
    pub fn lifetime_count(&self, i: usize, eps: f64) -> Result<u64> {
        if !(eps > 0.0) {
            return Err(Error::argument(format!("lifetime threshold must be positive, got {eps}")));
        }
        Ok(self
            .bars_in_dim(i)
            .iter()
            .filter(|b| b.death - b.birth > eps)
            .map(|b| b.multiplicity)
            .sum())
    }

    /// Pointwise [`betti_at`](Self::betti_at) over a strictly ascending grid.
    pub fn betti_curve(&self, i: usize, eps_grid: &[f64]) -> Result<Vec<(f64, u64)>> {
        for w in eps_grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::argument("ε grid must be strictly ascending"));
            }
        }
        if eps_grid.first().is_some_and(|&e| !(e >= 0.0)) {
            return Err(Error::argument("ε grid must be non-negative"));
        }
        Ok(eps_grid.iter().map(|&e| (e, self.betti_at(i, e))).collect())
    }

    /// All births, deaths, the diameter and the resolution floor multiplied
    /// by λ; multiplicities unchanged.
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::argument(format!("scale factor must be positive, got {lambda}")));
        }
        let bars = self
            .bars
            .iter()
            .map(|b| Barcode {
                dim: b.dim,
                birth: lambda * b.birth,
                death: lambda * b.death,
                multiplicity: b.multiplicity,
            })
            .collect();
        PersistenceDiagram::new(
            self.ambient_dim,
            lambda * self.diameter,
            bars,
            lambda * self.resolution_floor,
        )
    }
}

fn fmt_length(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        // 17 significant digits: round-trips every f64 exactly.
        format!("{x:.16e}")
    }
}

/// Write bars as CSV: header `dim,birth,death,multiplicity`, one row per
/// grouped bar, 17-significant-digit lengths, LF line endings. `inf` deaths
/// are permitted (raw numerical output before essential-capping).
pub fn write_barcode_csv<W: Write>(bars: &[Barcode], mut w: W) -> Result<()> {
    writeln!(w, "dim,birth,death,multiplicity")?;
    for b in bars {
        writeln!(w, "{},{},{},{}", b.dim, fmt_length(b.birth), fmt_length(b.death), b.multiplicity)?;
    }
    Ok(())
}

pub fn read_barcode_csv<R: BufRead>(r: R) -> Result<Vec<Barcode>> {
    let mut bars = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if idx == 0 {
            if line != "dim,birth,death,multiplicity" {
                return Err(Error::Parse(format!("unexpected header line {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", idx + 1)));
        }
        let parse_len = |s: &str| -> Result<f64> {
            if s == "inf" {
                Ok(f64::INFINITY)
            } else {
                s.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad length {s:?}", idx + 1)))
            }
        };
        bars.push(Barcode::new(
            fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad degree {:?}", idx + 1, fields[0])))?,
            parse_len(fields[1])?,
            parse_len(fields[2])?,
            fields[3]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad multiplicity {:?}", idx + 1, fields[3])))?,
        )?);
    }
    Ok(bars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diagram(bars: Vec<Barcode>) -> PersistenceDiagram {
        PersistenceDiagram::new(2, 2.0, bars, 0.0).unwrap()
    }

    #[test]
    fn rejects_degenerate_and_empty_bars() {
        assert!(Barcode::new(0, 0.5, 0.5, 1).is_err());
        assert!(Barcode::new(0, 0.5, 0.4, 1).is_err());
        assert!(Barcode::new(0, -0.1, 0.4, 1).is_err());
        assert!(Barcode::new(0, 0.0, 0.4, 0).is_err());
        assert!(Barcode::new(0, 0.0, f64::INFINITY, 1).is_ok());
    }

    #[test]
    fn betti_at_counts_half_open() {
        let empty = diagram(vec![]);
        assert_eq!(empty.betti_at(0, 0.3), 0);

        let d = diagram(vec![Barcode::new(1, 1.0 / 6.0, 2.0f64.sqrt() / 6.0, 1).unwrap()]);
        assert_eq!(d.betti_at(1, 0.2), 1);
        assert_eq!(d.betti_at(1, 1.0 / 6.0), 1); // closed at birth
        assert_eq!(d.betti_at(1, 2.0f64.sqrt() / 6.0), 0); // open at death
        assert_eq!(d.betti_at(0, 0.2), 0);
    }

    #[test]
    fn betti_at_changes_only_at_endpoints() {
        let d = diagram(vec![
            Barcode::new(1, 0.1, 0.4, 2).unwrap(),
            Barcode::new(1, 0.3, 0.8, 1).unwrap(),
        ]);
        let endpoints = [0.1, 0.3, 0.4, 0.8];
        let mut prev = d.betti_at(1, 0.0);
        let mut changes = Vec::new();
        for k in 1..=1000 {
            let e = k as f64 * 0.001;
            let c = d.betti_at(1, e);
            if c != prev {
                // locate the crossing: some endpoint lies in (e - 0.001, e]
                assert!(endpoints.iter().any(|&p| e - 0.001 < p && p <= e), "jump at {e}");
                changes.push(e);
            }
            prev = c;
        }
        assert_eq!(changes.len(), 4);
    }

    #[test]
    fn lifetime_count_straddles_threshold() {
        let d = diagram(vec![Barcode::new(0, 0.25, 0.75, 1).unwrap()]);
        assert_eq!(d.lifetime_count(0, 0.4).unwrap(), 1);
        assert_eq!(d.lifetime_count(0, 0.6).unwrap(), 0);
        assert!(d.lifetime_count(0, 0.0).is_err());
        // nothing outlives the diameter in positive degree
        assert_eq!(d.lifetime_count(1, d.diameter() + 1.0).unwrap(), 0);
    }

    #[test]
    fn betti_curve_matches_pointwise_and_validates_grid() {
        let empty = diagram(vec![]);
        assert_eq!(empty.betti_curve(0, &[0.0, 1.0]).unwrap(), vec![(0.0, 0), (1.0, 0)]);

        let d = diagram(vec![Barcode::new(0, 0.0, 1.0, 3).unwrap()]);
        assert_eq!(d.betti_curve(0, &[0.5]).unwrap(), vec![(0.5, 3)]);

        assert!(d.betti_curve(0, &[0.5, 0.5]).is_err());
        assert!(d.betti_curve(0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn scale_is_linear_and_identity_at_one() {
        let d = diagram(vec![Barcode::new(1, 1.0 / 6.0, 2.0f64.sqrt() / 6.0, 4).unwrap()]);
        assert_eq!(d.scale(1.0).unwrap(), d);

        let s = d.scale(3.0).unwrap();
        assert_eq!(s.bars()[0].birth, 0.5);
        assert_eq!(s.bars()[0].death, 2.0f64.sqrt() / 2.0);
        assert_eq!(s.bars()[0].multiplicity, 4);
        assert_eq!(s.diameter(), 6.0);

        assert!(d.scale(0.0).is_err());
        assert!(d.scale(-1.0).is_err());
    }

    #[test]
    fn canonical_merge_and_order() {
        let d = diagram(vec![
            Barcode::new(1, 0.3, 0.5, 2).unwrap(),
            Barcode::new(0, 0.0, 2.0, 1).unwrap(),
            Barcode::new(1, 0.3, 0.5, 5).unwrap(),
            Barcode::new(1, 0.1, 0.9, 1).unwrap(),
        ]);
        let dims: Vec<_> = d.bars().iter().map(|b| (b.dim, b.birth, b.multiplicity)).collect();
        assert_eq!(dims, vec![(0, 0.0, 1), (1, 0.1, 1), (1, 0.3, 7)]);
    }

    #[test]
    fn csv_round_trip_is_canonical_identity() {
        let bars = vec![
            Barcode::new(0, 0.0, f64::INFINITY, 1).unwrap(),
            Barcode::new(1, 1.0 / 6.0, 2.0f64.sqrt() / 6.0, 8).unwrap(),
            Barcode::new(1, 1.0 / 18.0, 2.0f64.sqrt() / 18.0, 64).unwrap(),
        ];
        let canon = canonicalize(bars).unwrap();
        let mut buf = Vec::new();
        write_barcode_csv(&canon, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dim,birth,death,multiplicity\n"));
        assert!(text.contains("inf"));
        assert!(!text.contains('\r'));

        let back = read_barcode_csv(&buf[..]).unwrap();
        assert_eq!(canonicalize(back.clone()).unwrap(), back, "already canonical");
        assert_eq!(back, canon, "17 significant digits round-trip every f64");
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        assert!(read_barcode_csv(&b"dim,birth\n"[..]).is_err());
        assert!(read_barcode_csv(&b"dim,birth,death,multiplicity\n0,0.0,x,1\n"[..]).is_err());
        assert!(read_barcode_csv(&b"dim,birth,death,multiplicity\n0,0.5,0.5,1\n"[..]).is_err());
    }

    fn arb_bars() -> impl Strategy<Value = Vec<Barcode>> {
        prop::collection::vec(
            // dyadic endpoints so small-integer scale factors stay exact
            (0usize..=2, 0u32..100, 1u32..100, 1u64..5).prop_map(|(dim, b, l, m)| {
                let birth = b as f64 / 64.0;
                Barcode::new(dim, birth, birth + l as f64 / 64.0, m).unwrap()
            }),
            0..40,
        )
    }

    proptest! {
        #[test]
        fn lifetime_count_non_increasing(bars in arb_bars(), mut eps in prop::collection::vec(1e-3f64..4.0, 2..20)) {
            let d = PersistenceDiagram::new(3, 8.0, bars, 0.0).unwrap();
            eps.sort_by(f64::total_cmp);
            for i in 0..=3 {
                let counts: Vec<_> = eps.iter().map(|&e| d.lifetime_count(i, e).unwrap()).collect();
                prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
            }
        }

        #[test]
        fn canonicalize_idempotent(bars in arb_bars()) {
            let once = canonicalize(bars).unwrap();
            let twice = canonicalize(once.clone()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn csv_round_trip_preserves_canonical_form(bars in arb_bars()) {
            let canon = canonicalize(bars).unwrap();
            let mut buf = Vec::new();
            write_barcode_csv(&canon, &mut buf).unwrap();
            prop_assert_eq!(read_barcode_csv(&buf[..]).unwrap(), canon);
        }

        #[test]
        fn scaled_betti_matches_at_transition_points(bars in arb_bars(), lambda in prop::sample::select(vec![0.5, 2.0, 7.0])) {
            let d = PersistenceDiagram::new(3, 8.0, bars, 0.0).unwrap();
            let s = d.scale(lambda).unwrap();
            for b in d.bars() {
                for eps in [b.birth, b.death] {
                    prop_assert_eq!(s.betti_at(b.dim, lambda * eps), d.betti_at(b.dim, eps));
                }
            }
        }
    }
}
