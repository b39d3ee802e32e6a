use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{level} component {value} out of range 0..={max}")]
    Range {
        level: &'static str,
        value: i64,
        max: i64,
    },
    #[error("voxel code {0:#06x} has the reserved bit set")]
    ReservedBit(u16),
    #[error("no labeled slice to repair from")]
    Unrepairable,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
