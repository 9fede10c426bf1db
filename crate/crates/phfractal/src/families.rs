//! Symbolic self-similar barcode families and the built-in fractal specs.
//!
//! A [`GeometricFamily`] packs the single-indexed bars
//! `c₀·m^{j−1} × (birth0·r^{j−1}, death0·r^{j−1})`, j = 1, 2, …; a
//! [`DustFamily`] packs the double-indexed ones
//! `c₀·m^{j−1}·g^{i−1} × (birth0·r^{j−1}, birth0·√(1+v^i)·r^{j−1})` whose
//! lifetimes accumulate at every birth scale. Together with one essential
//! class per connected fractal these describe the full barcode of the four
//! built-in sets exactly, so downstream sums can use closed forms instead of
//! materialized bars.

use crate::barcodes::{Barcode, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::exact::ExactLen;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricFamily {
    pub birth0: ExactLen,
    pub death0: ExactLen,
    pub ratio: f64,
    pub count0: u64,
    pub count_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DustFamily {
    pub birth0: ExactLen,
    pub ratio: f64,
    pub count0: u64,
    pub count_ratio: f64,
    pub inner_growth: f64,
    pub inner_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialBar {
    pub death: ExactLen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Geometric(GeometricFamily),
    Dust(DustFamily),
    Essential(EssentialBar),
}

/// One contraction map of the IFS: `x ↦ ratio·x + translation`, in unit-cube
/// model coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsMap {
    pub ratio: f64,
    pub translation: Vec<f64>,
}

/// A named fractal: diameter, per-degree symbolic families, and the IFS used
/// by the numerical pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FractalSpec {
    pub name: String,
    pub ambient_dim: usize,
    pub diameter: ExactLen,
    /// Indexed by homology degree, length `ambient_dim + 1`.
    pub degrees: Vec<Vec<Family>>,
    pub ifs: Vec<IfsMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFractal {
    Cantor,
    SierpinskiCarpet,
    CantorDust,
    Menger,
}

impl std::str::FromStr for BuiltinFractal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cantor" => Ok(BuiltinFractal::Cantor),
            "sierpinski_carpet" => Ok(BuiltinFractal::SierpinskiCarpet),
            "cantor_dust" => Ok(BuiltinFractal::CantorDust),
            "menger" => Ok(BuiltinFractal::Menger),
            _ => Err(Error::argument(format!(
                "unknown fractal {s:?} (expected cantor, sierpinski_carpet, cantor_dust or menger)"
            ))),
        }
    }
}

impl BuiltinFractal {
    pub const ALL: [BuiltinFractal; 4] = [
        BuiltinFractal::Cantor,
        BuiltinFractal::SierpinskiCarpet,
        BuiltinFractal::CantorDust,
        BuiltinFractal::Menger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinFractal::Cantor => "cantor",
            BuiltinFractal::SierpinskiCarpet => "sierpinski_carpet",
            BuiltinFractal::CantorDust => "cantor_dust",
            BuiltinFractal::Menger => "menger",
        }
    }
}

fn geometric(birth0: ExactLen, death0: ExactLen, count0: u64, count_ratio: f64) -> Family {
    Family::Geometric(GeometricFamily { birth0, death0, ratio: 1.0 / 3.0, count0, count_ratio })
}

pub fn builtin_spec(which: BuiltinFractal) -> FractalSpec {
    let sixth = ExactLen::rational(1, 6);
    let sqrt2_6 = ExactLen::rational_sqrt(1, 6, 2);
    let dust = |count0: u64, count_ratio: f64| {
        Family::Dust(DustFamily {
            birth0: sixth,
            ratio: 1.0 / 3.0,
            count0,
            count_ratio,
            inner_growth: 2.0,
            inner_decay: 1.0 / 9.0,
        })
    };
    let essential = |death: ExactLen| Family::Essential(EssentialBar { death });
    let ifs = |dim: usize, cells: Vec<Vec<u8>>| -> Vec<IfsMap> {
        cells
            .into_iter()
            .map(|c| {
                debug_assert_eq!(c.len(), dim);
                IfsMap { ratio: 1.0 / 3.0, translation: c.iter().map(|&k| k as f64 / 3.0).collect() }
            })
            .collect()
    };

    match which {
        BuiltinFractal::Cantor => FractalSpec {
            name: "cantor".into(),
            ambient_dim: 1,
            diameter: ExactLen::ONE,
            degrees: vec![
                vec![essential(ExactLen::ONE), geometric(ExactLen::ZERO, sixth, 1, 2.0)],
                vec![],
            ],
            ifs: ifs(1, vec![vec![0], vec![2]]),
        },
        BuiltinFractal::SierpinskiCarpet => FractalSpec {
            name: "sierpinski_carpet".into(),
            ambient_dim: 2,
            diameter: ExactLen::sqrt_int(2),
            degrees: vec![
                vec![essential(ExactLen::sqrt_int(2))],
                vec![geometric(ExactLen::ZERO, sixth, 1, 8.0)],
                vec![],
            ],
            ifs: ifs(
                2,
                (0..3)
                    .flat_map(|i| (0..3).map(move |j| vec![i, j]))
                    .filter(|c| c != &vec![1, 1])
                    .collect(),
            ),
        },
        BuiltinFractal::CantorDust => FractalSpec {
            name: "cantor_dust".into(),
            ambient_dim: 2,
            diameter: ExactLen::sqrt_int(2),
            degrees: vec![
                vec![essential(ExactLen::sqrt_int(2)), geometric(ExactLen::ZERO, sixth, 3, 4.0)],
                vec![geometric(sixth, sqrt2_6, 1, 4.0), dust(4, 4.0)],
                vec![],
            ],
            ifs: ifs(2, vec![vec![0, 0], vec![0, 2], vec![2, 0], vec![2, 2]]),
        },
        BuiltinFractal::Menger => FractalSpec {
            name: "menger".into(),
            ambient_dim: 3,
            diameter: ExactLen::sqrt_int(3),
            degrees: vec![
                vec![essential(ExactLen::sqrt_int(3))],
                vec![
                    geometric(ExactLen::ZERO, sixth, 3, 20.0),
                    geometric(ExactLen::ZERO, sixth, 2, 8.0),
                ],
                vec![geometric(sixth, sqrt2_6, 1, 20.0), dust(6, 20.0)],
                vec![],
            ],
            ifs: ifs(
                3,
                (0..3u8)
                    .flat_map(|i| (0..3u8).flat_map(move |j| (0..3u8).map(move |k| vec![i, j, k])))
                    .filter(|c| c.iter().filter(|&&x| x == 1).count() <= 1)
                    .collect(),
            ),
        },
    }
}

/// `c₀ · ratio^pow` as an exact integer count.
fn exact_count(count0: u64, count_ratio: f64, pow: u32) -> Result<u64> {
    if count_ratio < 1.0 {
        return Err(Error::argument(format!("count ratio {count_ratio} < 1")));
    }
    if count_ratio.fract() == 0.0 && count_ratio <= u64::MAX as f64 {
        let m = count_ratio as u128;
        let mut acc = count0 as u128;
        for _ in 0..pow {
            acc = acc
                .checked_mul(m)
                .ok_or_else(|| Error::Range(format!("bar count c₀·m^{pow} exceeds u128")))?;
        }
        u64::try_from(acc).map_err(|_| Error::Range(format!("bar count c₀·m^{pow} exceeds u64")))
    } else {
        let x = count0 as f64 * count_ratio.powi(pow as i32);
        let rounded = x.round();
        if (x - rounded).abs() > 1e-6 * x.abs().max(1.0) || rounded < 1.0 {
            return Err(Error::argument(format!(
                "family count c₀·m^{pow} = {x} is not a positive integer"
            )));
        }
        if rounded >= 9.0e15 {
            // beyond exact f64 integers; refuse rather than return a rounded count
            return Err(Error::Range(format!("bar count {rounded:e} not exactly representable")));
        }
        Ok(rounded as u64)
    }
}

impl Family {
    /// Largest lifetime over the family (the j = 1, i = 1 bar, or the
    /// essential death).
    pub fn largest_lifetime(&self) -> f64 {
        match self {
            Family::Geometric(g) => g.death0.value() - g.birth0.value(),
            Family::Dust(d) => d.birth0.value() * ((1.0 + d.inner_decay).sqrt() - 1.0),
            Family::Essential(e) => e.death.value(),
        }
    }
}

/// Exactly the bars with lifetime > δ, as (birth, death, multiplicity)
/// triples. Finiteness is guaranteed by r < 1 (and v < 1 for the inner dust
/// index).
pub fn enumerate_family(fam: &Family, delta: f64) -> Result<Vec<(f64, f64, u64)>> {
    if !(delta > 0.0) {
        return Err(Error::argument(format!(
            "enumeration threshold must be positive, got {delta} (the full family is infinite)"
        )));
    }
    let mut out = Vec::new();
    match fam {
        Family::Essential(e) => {
            let d = e.death.value();
            if d > delta {
                out.push((0.0, d, 1));
            }
        }
        Family::Geometric(g) => {
            let (b0, d0) = (g.birth0.value(), g.death0.value());
            let l0 = d0 - b0;
            let mut j = 0u32;
            while l0 * g.ratio.powi(j as i32) > delta {
                let s = g.ratio.powi(j as i32);
                out.push((b0 * s, d0 * s, exact_count(g.count0, g.count_ratio, j)?));
                j += 1;
            }
        }
        Family::Dust(f) => {
            let b0 = f.birth0.value();
            let l_inner = |i: u32| b0 * ((1.0 + f.inner_decay.powi(i as i32)).sqrt() - 1.0);
            let mut j = 0u32;
            while l_inner(1) * f.ratio.powi(j as i32) > delta {
                let s = f.ratio.powi(j as i32);
                let mut i = 1u32;
                while l_inner(i) * s > delta {
                    let outer = exact_count(f.count0, f.count_ratio, j)?;
                    let inner = exact_count(1, f.inner_growth, i - 1)?;
                    let mult = (outer as u128)
                        .checked_mul(inner as u128)
                        .filter(|&m| m <= u64::MAX as u128)
                        .ok_or_else(|| Error::Range("dust bar count exceeds u64".into()))?;
                    out.push((
                        b0 * s,
                        b0 * (1.0 + f.inner_decay.powi(i as i32)).sqrt() * s,
                        mult as u64,
                    ));
                    i += 1;
                }
                j += 1;
            }
        }
    }
    Ok(out)
}

impl FractalSpec {
    pub fn families(&self, degree: usize) -> &[Family] {
        self.degrees.get(degree).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Enumerate all degree-`i` bars with lifetime > δ into a diagram.
    pub fn enumerate(&self, degree: usize, delta: f64) -> Result<PersistenceDiagram> {
        let mut bars = Vec::new();
        for fam in self.families(degree) {
            for (birth, death, mult) in enumerate_family(fam, delta)? {
                bars.push(Barcode::new(degree, birth, death, mult)?);
            }
        }
        PersistenceDiagram::new(self.ambient_dim, self.diameter.value(), bars, 0.0)
    }

    /// Multiply every length (diameter, family births/deaths) by λ. IFS
    /// translations are unit-cube model coordinates and stay untouched.
    pub fn scale(&self, lambda: f64) -> Result<FractalSpec> {
        let mut scaled = self.clone();
        scaled.diameter = scaled.diameter.scale(lambda)?;
        for fams in &mut scaled.degrees {
            for fam in fams {
                match fam {
                    Family::Geometric(g) => {
                        g.birth0 = g.birth0.scale(lambda)?;
                        g.death0 = g.death0.scale(lambda)?;
                    }
                    Family::Dust(d) => d.birth0 = d.birth0.scale(lambda)?,
                    Family::Essential(e) => e.death = e.death.scale(lambda)?,
                }
            }
        }
        Ok(scaled)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.ambient_dim) {
            return Err(Error::argument(format!("ambient dimension {} not in 1..=3", self.ambient_dim)));
        }
        if self.degrees.len() != self.ambient_dim + 1 {
            return Err(Error::argument(format!(
                "expected {} degree lists, got {}",
                self.ambient_dim + 1,
                self.degrees.len()
            )));
        }
        let d_inf = self.diameter.value();
        if !(d_inf > 0.0) {
            return Err(Error::argument("diameter must be positive"));
        }
        for fams in &self.degrees {
            for fam in fams {
                let largest_death = match fam {
                    Family::Geometric(g) => {
                        if !(g.ratio > 0.0 && g.ratio < 1.0) {
                            return Err(Error::argument(format!("family ratio {} not in (0,1)", g.ratio)));
                        }
                        if !(g.death0.value() > g.birth0.value()) || g.birth0.value() < 0.0 {
                            return Err(Error::argument("family needs 0 ≤ birth0 < death0"));
                        }
                        if g.count0 == 0 || g.count_ratio < 1.0 {
                            return Err(Error::argument("family counts need c₀ ≥ 1, m ≥ 1"));
                        }
                        g.death0.value()
                    }
                    Family::Dust(f) => {
                        if !(f.ratio > 0.0 && f.ratio < 1.0) {
                            return Err(Error::argument(format!("family ratio {} not in (0,1)", f.ratio)));
                        }
                        if !(f.birth0.value() > 0.0) {
                            return Err(Error::argument("dust family needs birth0 > 0"));
                        }
                        if f.count0 == 0 || f.count_ratio < 1.0 {
                            return Err(Error::argument("family counts need c₀ ≥ 1, m ≥ 1"));
                        }
                        if !(f.inner_growth > 1.0) || !(f.inner_decay > 0.0 && f.inner_decay < 1.0) {
                            return Err(Error::argument("dust family needs g > 1 and v in (0,1)"));
                        }
                        if f.inner_growth * f.inner_decay >= 1.0 {
                            return Err(Error::argument(format!(
                                "dust family needs g·v < 1 for summability, got {}",
                                f.inner_growth * f.inner_decay
                            )));
                        }
                        f.birth0.value() * (1.0 + f.inner_decay).sqrt()
                    }
                    Family::Essential(e) => e.death.value(),
                };
                if largest_death > d_inf * (1.0 + 1e-12) {
                    return Err(Error::argument(format!(
                        "family death {largest_death} exceeds diameter {d_inf}"
                    )));
                }
            }
        }
        for map in &self.ifs {
            if !(map.ratio > 0.0 && map.ratio < 1.0) {
                return Err(Error::argument(format!("IFS ratio {} not in (0,1)", map.ratio)));
            }
            if map.translation.len() != self.ambient_dim {
                return Err(Error::argument("IFS translation dimension mismatch"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SpecDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<FractalSpec> {
        let doc: SpecDoc = serde_json::from_str(text)?;
        let spec = doc.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }
}

/// JSON shape: families in one flat array tagged with their degree and kind.
#[derive(Serialize, Deserialize)]
struct SpecDoc {
    name: String,
    ambient_dim: usize,
    diameter: ExactLen,
    families: Vec<FamilyDoc>,
    ifs: Vec<IfsMap>,
}

#[derive(Serialize, Deserialize)]
struct FamilyDoc {
    degree: usize,
    #[serde(flatten)]
    family: Family,
}

impl From<&FractalSpec> for SpecDoc {
    fn from(spec: &FractalSpec) -> Self {
        SpecDoc {
            name: spec.name.clone(),
            ambient_dim: spec.ambient_dim,
            diameter: spec.diameter,
            families: spec
                .degrees
                .iter()
                .enumerate()
                .flat_map(|(degree, fams)| {
                    fams.iter().map(move |&family| FamilyDoc { degree, family })
                })
                .collect(),
            ifs: spec.ifs.clone(),
        }
    }
}

impl SpecDoc {
    fn into_spec(self) -> Result<FractalSpec> {
        if !(1..=3).contains(&self.ambient_dim) {
            return Err(Error::argument(format!("ambient dimension {} not in 1..=3", self.ambient_dim)));
        }
        let mut degrees = vec![Vec::new(); self.ambient_dim + 1];
        for doc in self.families {
            if doc.degree > self.ambient_dim {
                return Err(Error::argument(format!(
                    "family degree {} exceeds ambient dimension {}",
                    doc.degree, self.ambient_dim
                )));
            }
            degrees[doc.degree].push(doc.family);
        }
        Ok(FractalSpec {
            name: self.name,
            ambient_dim: self.ambient_dim,
            diameter: self.diameter,
            degrees,
            ifs: self.ifs,
        })
    }
}

/// The per-degree PH-complexity σ_i: `log m / log(1/r)` for a geometric
/// family, `max(log m/log(1/r), log g/log(1/v))` for a dust family, the
/// maximum over families, and 0 where only the essential class lives.
pub fn exact_complexity(spec: &FractalSpec, degree: usize) -> Result<f64> {
    if degree > spec.ambient_dim {
        return Err(Error::argument(format!(
            "degree {degree} exceeds ambient dimension {}",
            spec.ambient_dim
        )));
    }
    let mut sigma: f64 = 0.0;
    for fam in spec.families(degree) {
        let s = match fam {
            Family::Essential(_) => 0.0,
            Family::Geometric(g) => g.count_ratio.ln() / (1.0 / g.ratio).ln(),
            Family::Dust(d) => {
                let outer = d.count_ratio.ln() / (1.0 / d.ratio).ln();
                let inner = d.inner_growth.ln() / (1.0 / d.inner_decay).ln();
                outer.max(inner)
            }
        };
        sigma = sigma.max(s);
    }
    Ok(sigma)
}

/// Step-j per-generation count A_j of degree-1 classes of the sponge
/// pre-fractal, and the auxiliary count B_j, computed by the recurrence
/// `B₁ = 0, B_j = 24·20^{j−2} + 8·B_{j−1}, A_j = 5·20^{j−1} − B_j` and
/// cross-checked against the closed forms `B_j = 2·20^{j−1} − 2^{3j−2}`,
/// `A_j = 3·20^{j−1} + 2^{3j−2}`.
pub fn menger_h1_counts(j: u32) -> Result<(BigUint, BigUint)> {
    if j == 0 {
        return Err(Error::argument("step index starts at 1"));
    }
    let big = |x: u64| BigUint::from(x);
    let mut b = big(0);
    let mut pow20 = big(1); // 20^{k-2} while computing B_k
    for _ in 2..=j {
        b = 24u64 * &pow20 + 8u64 * b;
        pow20 *= 20u64;
    }
    // pow20 is now 20^{j-1}
    let a = 5u64 * &pow20 - &b;
    let closed_b = 2u64 * &pow20 - (big(1) << (3 * j - 2));
    let closed_a = 3u64 * &pow20 + (big(1) << (3 * j - 2));
    assert_eq!(b, closed_b, "recurrence disagrees with closed form at j = {j}");
    assert_eq!(a, closed_a, "recurrence disagrees with closed form at j = {j}");
    Ok((a, b))
}
