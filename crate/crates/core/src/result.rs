//! Localization output: ordered contact centers, apical-first.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};

pub const CSV_HEADER: &str = "index,x_mm,y_mm,z_mm,doi_deg";

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub array: String,
    /// Contact centers in mm, most apical first.
    pub contacts: Vec<Vec3>,
    /// Per-contact depth of insertion (degrees); NaN when unknown.
    pub doi: Vec<f64>,
}

impl LocalizationResult {
    pub fn new(array: &str, contacts: Vec<Vec3>, doi: Option<Vec<f64>>) -> Self {
        let n = contacts.len();
        LocalizationResult { array: array.to_string(), contacts, doi: doi.unwrap_or_else(|| vec![f64::NAN; n]) }
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for (i, (p, d)) in self.contacts.iter().zip(&self.doi).enumerate() {
            writeln!(s, "{},{},{},{},{}", i + 1, p.x, p.y, p.z, d).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str, array: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty result file".into()))?;
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut contacts = Vec::new();
        let mut doi = Vec::new();
        for (row, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("row {} has {} fields", row + 1, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
            if f[0].parse::<usize>().ok() != Some(row + 1) {
                return Err(Error::Parse(format!("row {} has index {:?}", row + 1, f[0])));
            }
            contacts.push(vec3(num(f[1])?, num(f[2])?, num(f[3])?));
            doi.push(num(f[4])?);
        }
        Ok(LocalizationResult { array: array.to_string(), contacts, doi })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, array: &str) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, array)
    }
}
