//! The reporting-path grammar.
//!
//! Each (donor, unit) pair takes one speech act per quarter: carry forward
//! (`c`), report under Section 62(12) (`s`), or report quarterly (`r`).
//! Over a four-quarter year the act word always matches `c*s*r*`; there
//! are exactly 15 such words, abbreviated by the hexadecimal numerals 1
//! through F in ascending lexicographic order with `c < s < r`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-quarter speech act for a (donor, unit) pair.
///
/// The variant order gives the canonical letter order `c < s < r`, which
/// fixes the hex numbering of paths.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Act {
    #[serde(rename = "c")]
    Carry,
    #[serde(rename = "s")]
    S62,
    #[serde(rename = "r")]
    Quarterly,
}

impl Act {
    pub const fn letter(self) -> char {
        match self {
            Act::Carry => 'c',
            Act::S62 => 's',
            Act::Quarterly => 'r',
        }
    }

    pub fn from_letter(letter: char) -> Result<Act, PathError> {
        match letter {
            'c' => Ok(Act::Carry),
            's' => Ok(Act::S62),
            'r' => Ok(Act::Quarterly),
            other => Err(PathError::BadLetter { letter: other }),
        }
    }
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A permissible four-quarter path name: a word of `c*s*r*` with its hex
/// code 1..=15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathName {
    acts: [Act; 4],
}

impl PathName {
    pub fn from_acts(acts: [Act; 4]) -> Result<PathName, PathError> {
        if !acts_permissible(&acts) {
            let word: String = acts.iter().map(|a| a.letter()).collect();
            return Err(PathError::Impermissible { word });
        }
        Ok(PathName { acts })
    }

    pub fn from_word(word: &str) -> Result<PathName, PathError> {
        let letters: Vec<char> = word.chars().collect();
        if letters.len() != 4 {
            return Err(PathError::BadLength { length: letters.len() });
        }
        let mut acts = [Act::Carry; 4];
        for (i, &ch) in letters.iter().enumerate() {
            acts[i] = Act::from_letter(ch)?;
        }
        PathName::from_acts(acts)
    }

    /// Looks up a path by its hex code 1..=15.
    pub fn from_hex(hex: u8) -> Result<PathName, PathError> {
        enumerate_paths()
            .into_iter()
            .find(|p| p.hex() == hex)
            .ok_or(PathError::BadHex { hex })
    }

    pub fn acts(&self) -> [Act; 4] {
        self.acts
    }

    pub fn word(&self) -> String {
        self.acts.iter().map(|a| a.letter()).collect()
    }

    /// Position in the canonical enumeration, 1..=15.
    pub fn hex(&self) -> u8 {
        let idx = enumerate_paths()
            .iter()
            .position(|p| p == self)
            .expect("every PathName is in the enumeration");
        idx as u8 + 1
    }

    /// The `(a, b, d)` decomposition of the word `c^a s^b r^d`.
    pub fn shape(&self) -> (u8, u8, u8) {
        let mut a = 0u8;
        let mut b = 0u8;
        let mut d = 0u8;
        for act in self.acts {
            match act {
                Act::Carry => a += 1,
                Act::S62 => b += 1,
                Act::Quarterly => d += 1,
            }
        }
        (a, b, d)
    }

    pub fn act(&self, quarter_index: usize) -> Act {
        self.acts[quarter_index]
    }
}

impl fmt::Display for PathName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.word())
    }
}

impl Serialize for PathName {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.word())
    }
}

impl<'de> Deserialize<'de> for PathName {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<PathName, D::Error> {
        let word = String::deserialize(deserializer)?;
        PathName::from_word(&word).map_err(serde::de::Error::custom)
    }
}

fn acts_permissible(acts: &[Act; 4]) -> bool {
    // c*s*r* means acts never decrease in the order c < s < r.
    acts.windows(2).all(|w| w[0] <= w[1])
}

/// All 15 permissible paths in canonical order: ascending lexicographic
/// with `c < s < r`, so `cccc` is 0x1 and `rrrr` is 0xF.
pub fn enumerate_paths() -> Vec<PathName> {
    let mut paths = Vec::with_capacity(15);
    for a in 0..=4u8 {
        for b in 0..=(4 - a) {
            let d = 4 - a - b;
            let mut acts = [Act::Carry; 4];
            for i in 0..4u8 {
                acts[i as usize] = if i < a {
                    Act::Carry
                } else if i < a + b {
                    Act::S62
                } else {
                    let _ = d;
                    Act::Quarterly
                };
            }
            paths.push(PathName { acts });
        }
    }
    paths.sort();
    paths
}

/// True iff `word` is a length-4 word of `c*s*r*`. Letters outside
/// {c, s, r} and lengths other than 4 are errors rather than `false`.
pub fn is_permissible(word: &str) -> Result<bool, PathError> {
    let letters: Vec<char> = word.chars().collect();
    if letters.len() != 4 {
        return Err(PathError::BadLength { length: letters.len() });
    }
    let mut acts = [Act::Carry; 4];
    for (i, &ch) in letters.iter().enumerate() {
        acts[i] = Act::from_letter(ch)?;
    }
    Ok(acts_permissible(&acts))
}

/// Extracts the path name from a per-quarter act trace. An impermissible
/// word signals an engine bug and is an error, never a silent result.
pub fn path_of(acts: &[Act; 4]) -> Result<PathName, PathError> {
    PathName::from_acts(*acts)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("invalid act letter '{letter}' (expected one of c, s, r)")]
    BadLetter { letter: char },

    #[error("path word must have exactly 4 letters, got {length}")]
    BadLength { length: usize },

    #[error("act word '{word}' violates the c*s*r* grammar")]
    Impermissible { word: String },

    #[error("path hex code {hex:#x} out of range 1..=0xF")]
    BadHex { hex: u8 },
}
