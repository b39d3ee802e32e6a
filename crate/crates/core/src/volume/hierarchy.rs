use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::code::{LabelKey, L1_MAX, L2_MAX};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub fn to_hex(self) -> String {
        let [r, g, b, a] = self.0;
        format!("#{r:02X}{g:02X}{b:02X}{a:02X}")
    }
}

impl FromStr for Rgba {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 8 && h.is_ascii())
            .ok_or_else(|| Error::Format(format!("bad color {s:?}, expected #RRGGBBAA")))?;
        let mut out = [0u8; 4];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::Format(format!("bad color {s:?}")))?;
        }
        Ok(Rgba(out))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyEntry {
    pub key: LabelKey,
    pub name: String,
    pub color: Rgba,
}

/// Organ names and display colors, shared by server and viewer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationHierarchy {
    entries: Vec<HierarchyEntry>,
}

impl SegmentationHierarchy {
    pub fn new(entries: Vec<HierarchyEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.name.trim().is_empty() {
                return Err(Error::Format(format!("empty name for {}", e.key)));
            }
            if e.key.is_background() || e.key.l1 > L1_MAX || e.key.l2 > L2_MAX {
                return Err(Error::Format(format!("invalid label {}", e.key)));
            }
            if !seen.insert(e.key) {
                return Err(Error::Format(format!("duplicate label {}", e.key)));
            }
        }
        Ok(SegmentationHierarchy { entries })
    }

    pub fn entries(&self) -> &[HierarchyEntry] {
        &self.entries
    }

    pub fn get(&self, key: LabelKey) -> Option<&HierarchyEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn contains(&self, key: LabelKey) -> bool {
        self.get(key).is_some()
    }

    /// Case-insensitive lookup by display name.
    pub fn find_by_name(&self, name: &str) -> Option<&HierarchyEntry> {
        self.entries
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn keys_in_system(&self, l1: u8) -> impl Iterator<Item = LabelKey> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.key.l1 == l1)
            .map(|e| e.key)
    }

    pub fn keys(&self) -> impl Iterator<Item = LabelKey> + '_ {
        self.entries.iter().map(|e| e.key)
    }

    /// Parses `l1,l2,name,#RRGGBBAA` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (line.starts_with('#') && !line.contains(',')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [l1, l2, name, color] = fields[..] else {
                return Err(Error::Format(format!(
                    "hierarchy line {}: expected 4 fields",
                    n + 1
                )));
            };
            let parse_level = |s: &str| {
                s.parse::<u8>()
                    .map_err(|_| Error::Format(format!("hierarchy line {}: bad level {s:?}", n + 1)))
            };
            entries.push(HierarchyEntry {
                key: LabelKey::new(parse_level(l1)?, parse_level(l2)?),
                name: name.to_string(),
                color: color.parse()?,
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.key.l1,
                e.key.l2,
                e.name,
                e.color.to_hex()
            ));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
