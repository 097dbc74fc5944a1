//! Electrode-array geometry presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Manufacturer family; selects the bending-angle thresholds of the coarse search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    MedEl,
    AdvancedBionics,
    Cochlear,
}

impl Family {
    /// Bending thresholds for the shallow and deep halves of the array.
    pub fn bend_thresholds(self) -> (f64, f64) {
        match self {
            Family::MedEl => (0.56, 1.27),
            Family::AdvancedBionics | Family::Cochlear => (0.30, 0.59),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Family::MedEl => "MD",
            Family::AdvancedBionics => "AB",
            Family::Cochlear => "CO",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MD" | "MEDEL" | "MED-EL" => Ok(Family::MedEl),
            "AB" => Ok(Family::AdvancedBionics),
            "CO" | "COCHLEAR" => Ok(Family::Cochlear),
            _ => Err(Error::Parse(format!("unknown array family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayModel {
    pub name: String,
    pub family: Family,
    /// Center-to-center distances between adjacent contacts, apical-first:
    /// `spacings[i]` separates contact `i` and `i + 1` counting from the apex.
    pub spacings: Vec<f64>,
    /// Contact radius at the apical end (mm).
    pub apical_radius: f64,
    /// Contact radius at the basal end (mm).
    pub basal_radius: f64,
    /// Basal contacts that are present but not used for stimulation (markers).
    pub inactive_basal: usize,
}

pub const PRESETS: [&str; 8] = ["MD1", "MD2", "AB1", "AB2", "AB3", "CO1", "CO2", "CO3"];

impl ArrayModel {
    pub fn new(name: &str, family: Family, spacings: Vec<f64>, apical_radius: f64, basal_radius: f64) -> Result<Self> {
        if spacings.is_empty() {
            return Err(Error::InvalidArgument("an array needs at least two contacts".into()));
        }
        if spacings.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument("contact spacings must be positive".into()));
        }
        if !(apical_radius > 0.0 && basal_radius > 0.0) {
            return Err(Error::InvalidArgument("contact radii must be positive".into()));
        }
        Ok(ArrayModel { name: name.to_string(), family, spacings, apical_radius, basal_radius, inactive_basal: 0 })
    }

    /// Built-in geometries by name (case-insensitive).
    pub fn preset(name: &str) -> Result<Self> {
        let up = name.to_ascii_uppercase();
        let rep = |d: f64, n: usize| vec![d; n];
        // basal-first spacing lists are reversed below
        let (family, basal_first, ra, rb, inactive) = match up.as_str() {
            "MD1" => (Family::MedEl, rep(2.4, 11), 0.3, 0.3, 0),
            "MD2" => (Family::MedEl, rep(2.1, 11), 0.3, 0.3, 0),
            "AB1" => (Family::AdvancedBionics, [vec![2.5], rep(1.1, 15)].concat(), 0.25, 0.25, 1),
            "AB2" => (Family::AdvancedBionics, [vec![3.0], rep(0.95, 15)].concat(), 0.25, 0.25, 1),
            "AB3" => (Family::AdvancedBionics, [vec![3.0, 3.0], rep(0.85, 15)].concat(), 0.25, 0.25, 2),
            "CO1" => (Family::Cochlear, rep(0.65, 21), 0.2, 0.3, 0),
            "CO2" => (Family::Cochlear, rep(0.9, 21), 0.2, 0.25, 0),
            "CO3" => (Family::Cochlear, rep(0.75, 31), 0.25, 0.25, 0),
            _ => return Err(Error::InvalidArgument(format!("unknown array {name:?}; known: {}", PRESETS.join(", ")))),
        };
        let mut spacings = basal_first;
        spacings.reverse();
        let mut a = ArrayModel::new(&up, family, spacings, ra, rb)?;
        a.inactive_basal = inactive;
        Ok(a)
    }

    pub fn contact_count(&self) -> usize {
        self.spacings.len() + 1
    }

    /// Straight length: sum of all spacings.
    pub fn straight_length(&self) -> f64 {
        self.spacings.iter().sum()
    }

    /// Spacings ordered from the basal end.
    pub fn basal_first_spacings(&self) -> Vec<f64> {
        self.spacings.iter().rev().copied().collect()
    }

    /// Unique spacing values, sorted descending.
    pub fn esd_values(&self) -> Vec<f64> {
        let mut v = self.spacings.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        v
    }

    /// Index into [`ArrayModel::esd_values`] of a spacing value.
    pub fn esd_index(&self, d: f64) -> usize {
        self.esd_values().iter().position(|&e| (e - d).abs() < 1e-9).expect("spacing belongs to the array")
    }

    /// Contact radius of apical-first contact `i`, interpolated along the array.
    pub fn contact_radius(&self, i: usize) -> f64 {
        let n = self.contact_count();
        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        self.apical_radius + (self.basal_radius - self.apical_radius) * t
    }
}
