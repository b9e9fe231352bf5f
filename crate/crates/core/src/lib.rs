//! Predict whether a lane-keeping simulation test will fail before running it,
//! and use those predictions to pick cost-effective test suites.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: centerline interpolation and straight/left/right segmentation.
//! - [`features`]: the 18 static road features.
//! - [`oracle`]: a random road generator and a kinematic lane-keeping driver
//!   that labels roads safe or unsafe.
//! - [`ml`]: six classifier families, cross-validation, grid search and
//!   feature ranking.
//! - [`selection`]: FIX, REACH and real-time selection experiments.
//! - [`canbus`]: DBC parsing, signal packing and CAN playback of traces.
//!
//! A guided tour lives in the `book/` directory at the repository root; its
//! code listings are compiled as doctests of this crate.

use serde::{Deserialize, Serialize};

pub mod canbus;
pub mod features;
pub mod geometry;
pub mod ml;
pub mod oracle;
pub mod selection;

/// Verdict of a lane-keeping test. `Unsafe` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Safe,
    Unsafe,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Safe => "safe",
            Label::Unsafe => "unsafe",
        }
    }

    pub fn is_unsafe(self) -> bool {
        self == Label::Unsafe
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Safe => Label::Unsafe,
            Label::Unsafe => Label::Safe,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "safe" | "pass" | "0" => Ok(Label::Safe),
            "unsafe" | "fail" | "1" => Ok(Label::Unsafe),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// SplitMix64 finaliser; derives independent per-item seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/ml.md")]
    mod ml {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/canbus.md")]
    mod canbus {}
}
