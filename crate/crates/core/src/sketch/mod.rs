//! Linear sketches of gradient vectors.
//!
//! * [`CountMinArray`]: a single bucket array queried by bucket sum, so the
//!   query is the projection `A A^T g`.
//! * [`CountSketchTable`]: `r` signed rows, queried by the median of the
//!   sign-corrected buckets.
//! * [`AveragedSketch`]: bucket sums plus occupancy counts; queries return the
//!   bucket mean `(A^T A)^{-1} A^T g`.

mod averaged;
mod codec;
mod countmin;
mod countsketch;

pub use averaged::AveragedSketch;
pub use codec::{decode_sketch, AnySketch, SKETCH_MAGIC, SKETCH_VERSION};
pub use countmin::CountMinArray;
pub use countsketch::{median_lower, CountSketchTable};
