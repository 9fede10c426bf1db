//! Numerical route: pre-fractal rasterization, exact distance transforms,
//! cubical filtrations of the distance field, and persistence.
//!
//! The pipeline is `prefractal_bitmap → edt → cubical_filtration →
//! persistence → calibrate`, and every stage is deterministic: rerunning it
//! (at any worker count) produces byte-identical output.

pub mod cubical;
pub mod edt;
pub mod grid;
pub mod persistence;
pub mod prefractal;

pub use cubical::{cubical_filtration, FilteredCubicalComplex};
pub use edt::{edt, write_field_slice_csv, DistanceField};
pub use grid::{read_bitmap, write_bitmap, Bitmap, MemoryBudget};
pub use persistence::{calibrate, match_report, persistence, MatchReport};
pub use prefractal::prefractal_bitmap;
