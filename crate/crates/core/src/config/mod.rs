//! Electrode configuration selection from DVF curves: features, cost,
//! exhaustive search, configuration distance, and weight training.

pub mod distance;
pub mod features;
pub mod nnls;
pub mod select;
pub mod train;
pub mod weights;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use distance::{config_distance, mismatch_distances, target_cost};
pub use features::{compute_features, compute_features_with, EnvelopeMode, FeatureVector};
pub use select::{select_configuration, select_configuration_naive, ElectrodeTerms, Selection, MAX_ELECTRODES};
pub use train::{train_weights, TrainingReport, TrainingSubject};
pub use weights::WeightSet;

/// Active flags, electrode 1 (most apical) first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub active: Vec<bool>,
}

impl Configuration {
    pub fn new(active: Vec<bool>) -> Self {
        Configuration { active }
    }

    pub fn all_active(k: usize) -> Self {
        Configuration { active: vec![true; k] }
    }

    /// Bit `i` of `bits` is electrode `i + 1`.
    pub fn from_bits(bits: u32, k: usize) -> Self {
        Configuration { active: (0..k).map(|i| bits >> i & 1 == 1).collect() }
    }

    pub fn bits(&self) -> u32 {
        self.active.iter().enumerate().fold(0, |b, (i, &a)| b | (a as u32) << i)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// `+` for active, `-` for inactive.
    pub fn to_mask_string(&self) -> String {
        self.active.iter().map(|&a| if a { '+' } else { '-' }).collect()
    }

    pub fn parse_mask(s: &str) -> Result<Self> {
        let active = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(true),
                '-' | '\u{2212}' => Ok(false),
                _ => Err(Error::Parse(format!("mask character {c:?} is not + or -"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if active.is_empty() {
            return Err(Error::Parse("empty mask".into()));
        }
        Ok(Configuration { active })
    }

    /// `index,active` rows with 1-based indices and 0/1 flags.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,active\n");
        for (i, &a) in self.active.iter().enumerate() {
            writeln!(s, "{},{}", i + 1, a as u8).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("index,active") {
            return Err(Error::Parse("configuration file must start with index,active".into()));
        }
        let mut active = Vec::new();
        for (row, line) in lines.enumerate() {
            let (idx, flag) = line.split_once(',').ok_or_else(|| Error::Parse(format!("row {} lacks a comma", row + 1)))?;
            if idx.trim().parse::<usize>().ok() != Some(row + 1) {
                return Err(Error::Parse(format!("row {} has index {idx:?}", row + 1)));
            }
            active.push(match flag.trim() {
                "1" => true,
                "0" => false,
                f => return Err(Error::Parse(format!("flag {f:?} is not 0 or 1"))),
            });
        }
        Ok(Configuration { active })
    }
}
