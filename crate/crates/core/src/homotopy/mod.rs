//! Slice upsampling through signed distance fields and a cubic Hermite homotopy.

pub mod hermite;
pub mod resample;
pub mod sdf;

pub use hermite::{homotopy_derivative, homotopy_eval, HomotopySlab};
pub use resample::{dice_per_label, resample_segmentation, resample_volume, SparseSlices};
pub use sdf::{signed_distance_2d, DistanceField, SignedDistanceSlice};
