//! Average ph-fractal Betti numbers and Euler numbers of self-similar sets.
//!
//! Two independent routes to the same invariants:
//!
//! * **Symbolic** — the barcode families of the classical examples (Cantor set,
//!   Sierpiński carpet, Cantor dust, Menger sponge) are stored in closed form
//!   ([`families`]), and the weighted bar sums, average Betti numbers and the
//!   Euler number are evaluated exactly ([`invariants`]).
//! * **Numerical** — a pre-fractal approximation is rasterized, an exact
//!   Euclidean distance transform turns it into a sublevel filtration, and
//!   cubical persistent homology recovers the barcode ([`numerical`]).
//!
//! The [`barcodes`] module holds the finite persistence-diagram model shared by
//! both routes.

pub mod barcodes;
pub mod error;
pub mod exact;
pub mod families;
pub mod invariants;
pub mod numerical;

pub use barcodes::{Barcode, PersistenceDiagram};
pub use error::{Error, Result};
pub use exact::ExactLen;
pub use families::{BuiltinFractal, Family, FractalSpec};
pub use invariants::InvariantReport;
