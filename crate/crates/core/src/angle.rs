//! Angle conventions for the two-observer setup.
//!
//! Alice turns her splitter to `alpha = a * pi/8` with `a` in `{0, 3}`, Bob to
//! `beta = b * pi/8` with `b` in `{0, 2}`. Everything downstream only cares
//! about the relative angle `delta = beta - alpha` and its index `d = |b - a|`.
//! The discrete indices are the identity of a setting; the radian values are
//! derived from them and never used for classification.

use std::f64::consts::FRAC_PI_8;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alice's allowed indices.
pub const ALICE_INDICES: [i32; 2] = [0, 3];
/// Bob's allowed indices.
pub const BOB_INDICES: [i32; 2] = [0, 2];

/// Whether index validation is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexMode {
    /// Only `a in {0,3}`, `b in {0,2}`.
    #[default]
    Strict,
    /// Any integer indices (used for plotting and exploration).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSetting {
    pub a: i32,
    pub b: i32,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub d: u32,
}

impl AngleSetting {
    pub fn from_indices(a: i32, b: i32, mode: IndexMode) -> Result<Self> {
        if mode == IndexMode::Strict && !(ALICE_INDICES.contains(&a) && BOB_INDICES.contains(&b)) {
            return Err(Error::IndexOutOfRange { a, b });
        }
        Ok(Self {
            a,
            b,
            alpha: f64::from(a) * FRAC_PI_8,
            beta: f64::from(b) * FRAC_PI_8,
            delta: f64::from(b - a) * FRAC_PI_8,
            d: (b - a).unsigned_abs(),
        })
    }

    /// Setting chosen by two fair coin bits. Bit 0 keeps the splitter at 0,
    /// bit 1 turns Alice to 3pi/8 and Bob to pi/4.
    pub fn from_coins(coin_alice: bool, coin_bob: bool) -> Self {
        let a = if coin_alice { 3 } else { 0 };
        let b = if coin_bob { 2 } else { 0 };
        Self::from_indices(a, b, IndexMode::Strict).expect("coin indices are always allowed")
    }

    /// Relative angle for index `d` (`delta = d * pi/8`).
    pub fn delta_of(d: u32) -> f64 {
        f64::from(d) * FRAC_PI_8
    }
}

pub fn setting_from_indices(a: i32, b: i32, mode: IndexMode) -> Result<AngleSetting> {
    AngleSetting::from_indices(a, b, mode)
}

pub fn choose_setting(coin_alice: bool, coin_bob: bool) -> AngleSetting {
    AngleSetting::from_coins(coin_alice, coin_bob)
}

/// The three Bell angles `d in {1,2,3}`.
pub fn bell_angles() -> [u32; 3] {
    [1, 2, 3]
}

/// All four relative-angle indices produced by the coin procedure.
pub fn all_angles() -> [u32; 4] {
    [0, 1, 2, 3]
}

/// Equal or unequal outcome class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Klass {
    #[serde(rename = "E")]
    Equal,
    #[serde(rename = "U")]
    Unequal,
}

impl fmt::Display for Klass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Klass::Equal => "E",
            Klass::Unequal => "U",
        })
    }
}

/// Compound outcome `(AB)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomePair {
    #[serde(rename = "00")]
    P00,
    #[serde(rename = "01")]
    P01,
    #[serde(rename = "10")]
    P10,
    #[serde(rename = "11")]
    P11,
}

impl OutcomePair {
    pub const ALL: [OutcomePair; 4] = [Self::P00, Self::P01, Self::P10, Self::P11];

    pub fn from_bits(alice: u8, bob: u8) -> Option<Self> {
        match (alice, bob) {
            (0, 0) => Some(Self::P00),
            (0, 1) => Some(Self::P01),
            (1, 0) => Some(Self::P10),
            (1, 1) => Some(Self::P11),
            _ => None,
        }
    }

    pub fn alice(self) -> u8 {
        matches!(self, Self::P10 | Self::P11) as u8
    }

    pub fn bob(self) -> u8 {
        matches!(self, Self::P01 | Self::P11) as u8
    }

    pub fn klass(self) -> Klass {
        if self.alice() == self.bob() {
            Klass::Equal
        } else {
            Klass::Unequal
        }
    }

    /// Position in [`OutcomePair::ALL`].
    pub fn index(self) -> usize {
        (self.alice() * 2 + self.bob()) as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::P00 => "00",
            Self::P01 => "01",
            Self::P10 => "10",
            Self::P11 => "11",
        }
    }
}

impl fmt::Display for OutcomePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
