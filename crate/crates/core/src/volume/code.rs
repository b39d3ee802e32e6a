//! Hierarchical 16-bit voxel codes.
//!
//! Layout, least significant bit first:
//!
//! ```text
//!  15 | 14 .. 11 | 10 .. 7 | 6 .. 0
//!  rsv|    L1    |   L2    |   L3
//! ```
//!
//! A raw value of zero is background. The reserved bit is always clear.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const L3_BITS: u16 = 7;
const L2_BITS: u16 = 4;
const L1_BITS: u16 = 4;
const L2_SHIFT: u16 = L3_BITS;
const L1_SHIFT: u16 = L3_BITS + L2_BITS;
const RESERVED_BIT: u16 = 1 << 15;

pub const L1_MAX: u8 = (1 << L1_BITS) - 1;
pub const L2_MAX: u8 = (1 << L2_BITS) - 1;
pub const L3_MAX: u8 = (1 << L3_BITS) - 1;

/// Number of major body systems used by the anatomical hierarchy.
pub const MAJOR_SYSTEMS: u8 = 13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelCode(u16);

impl VoxelCode {
    pub const BACKGROUND: VoxelCode = VoxelCode(0);

    /// Wraps a raw value, rejecting the reserved bit.
    pub fn from_raw(raw: u16) -> Result<Self> {
        if raw & RESERVED_BIT != 0 {
            return Err(Error::ReservedBit(raw));
        }
        Ok(VoxelCode(raw))
    }

    pub fn raw(self) -> u16 {
        self.0
    }

    pub fn is_background(self) -> bool {
        self.0 == 0
    }

    pub fn l1(self) -> u8 {
        ((self.0 >> L1_SHIFT) & L1_MAX as u16) as u8
    }

    pub fn l2(self) -> u8 {
        ((self.0 >> L2_SHIFT) & L2_MAX as u16) as u8
    }

    pub fn l3(self) -> u8 {
        (self.0 & L3_MAX as u16) as u8
    }

    /// The (L1, L2) organ identity, or `None` for background.
    pub fn organ(self) -> Option<LabelKey> {
        if self.is_background() {
            None
        } else {
            Some(LabelKey::new(self.l1(), self.l2()))
        }
    }
}

pub fn encode_code(l1: i64, l2: i64, l3: i64) -> Result<VoxelCode> {
    check_range("L1", l1, L1_MAX)?;
    check_range("L2", l2, L2_MAX)?;
    check_range("L3", l3, L3_MAX)?;
    let raw = ((l1 as u16) << L1_SHIFT) | ((l2 as u16) << L2_SHIFT) | l3 as u16;
    Ok(VoxelCode(raw))
}

pub fn decode_code(code: u16) -> Result<(u8, u8, u8)> {
    let code = VoxelCode::from_raw(code)?;
    Ok((code.l1(), code.l2(), code.l3()))
}

fn check_range(level: &'static str, value: i64, max: u8) -> Result<()> {
    if !(0..=max as i64).contains(&value) {
        return Err(Error::Range {
            level,
            value,
            max: max as i64,
        });
    }
    Ok(())
}

/// An organ identity at the L2 level of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelKey {
    pub l1: u8,
    pub l2: u8,
}

impl LabelKey {
    pub const fn new(l1: u8, l2: u8) -> Self {
        LabelKey { l1, l2 }
    }

    /// The code this organ writes into a label grid (L3 left at zero).
    pub fn code(self) -> Result<VoxelCode> {
        encode_code(self.l1 as i64, self.l2 as i64, 0)
    }

    pub fn is_background(self) -> bool {
        self.l1 == 0 && self.l2 == 0
    }
}

impl fmt::Display for LabelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.l1, self.l2)
    }
}
