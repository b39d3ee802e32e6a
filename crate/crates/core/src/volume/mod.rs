//! Hierarchical labeled volumes: voxel codes, containers, repair and phantoms.

pub mod code;
pub mod grid;
pub mod hierarchy;
pub mod io;
pub mod phantom;
pub mod repair;

pub use code::{decode_code, encode_code, LabelKey, VoxelCode};
pub use grid::{Dims, LabeledVolume};
pub use hierarchy::{HierarchyEntry, Rgba, SegmentationHierarchy};
pub use io::{load_volume, save_volume, ContainerPaths};
pub use phantom::{generate_phantom, OrganShape, PhantomSpec, Shape};
pub use repair::repair_labels;
