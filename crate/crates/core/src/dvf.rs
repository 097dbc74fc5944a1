//! Distance-vs-frequency curves: per electrode, the distance to the modiolar
//! sites mapped to each place frequency.

use std::fmt::Write as _;
use std::path::Path;

use crate::cochlea::CochleaModel;
use crate::error::{Error, Result};
use crate::result::LocalizationResult;

pub const DEFAULT_GRID: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct DvfCurve {
    /// Electrode number, 1 = most apical.
    pub electrode: usize,
    /// Distance (mm) at each frequency of the shared grid.
    pub distances: Vec<f64>,
    /// Electrode-to-modiolus distance (mm).
    pub d_min: f64,
    /// Place frequency (Hz) of the nearest modiolar site.
    pub freq: f64,
}

impl DvfCurve {
    /// Grid index of the curve minimum; ties go to the first index.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (k, &d) in self.distances.iter().enumerate() {
            if d < self.distances[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvfSet {
    /// Frequency grid (Hz), basal (highest) first.
    pub freqs: Vec<f64>,
    /// Curves ordered apical first.
    pub curves: Vec<DvfCurve>,
    /// Grid points with no modiolar site, filled from their neighbors.
    pub interpolated: Vec<bool>,
}

/// `n` frequencies log-uniform from `high` down to `low`.
pub fn log_grid(high: f64, low: f64, n: usize) -> Result<Vec<f64>> {
    if !(high > low && low > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(format!("frequency grid needs high > low > 0 and n >= 2, got {high}, {low}, {n}")));
    }
    let (a, b) = (high.log10(), low.log10());
    Ok((0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect())
}

/// Grid index whose log-frequency bin contains `f`.
fn bin_of(freqs: &[f64], f: f64) -> usize {
    let n = freqs.len();
    let (a, b) = (freqs[0].log10(), freqs[n - 1].log10());
    let t = (f.log10() - a) / (b - a) * (n - 1) as f64;
    (t.round().max(0.0) as usize).min(n - 1)
}

/// Fills NaN samples by linear interpolation over grid index; ends copy the nearest value.
fn fill_gaps(v: &mut [f64]) {
    let known: Vec<usize> = (0..v.len()).filter(|&k| v[k].is_finite()).collect();
    if known.is_empty() {
        return;
    }
    for k in 0..v.len() {
        if v[k].is_finite() {
            continue;
        }
        let right = known.partition_point(|&j| j < k);
        v[k] = match (right.checked_sub(1).map(|r| known[r]), known.get(right)) {
            (Some(l), Some(&r)) => {
                let t = (k - l) as f64 / (r - l) as f64;
                v[l] + (v[r] - v[l]) * t
            }
            (Some(l), None) => v[l],
            (None, Some(&r)) => v[r],
            (None, None) => unreachable!(),
        };
    }
}

/// Curves for every electrode on a `grid`-point frequency grid spanning the model.
pub fn build_dvf(electrodes: &LocalizationResult, model: &CochleaModel, grid: usize) -> Result<DvfSet> {
    if electrodes.is_empty() {
        return Err(Error::Empty("no electrodes".into()));
    }
    let (low, high) = model.frequency_range();
    let freqs = log_grid(high, low, grid)?;
    let verts = model.modiolar_vertices();
    let bins: Vec<usize> = verts.iter().map(|v| bin_of(&freqs, v.frequency)).collect();
    let mut interpolated = vec![true; grid];
    for &b in &bins {
        interpolated[b] = false;
    }
    if interpolated.iter().all(|&x| x) {
        return Err(Error::Empty("model has no modiolar sites".into()));
    }
    let mut curves = Vec::with_capacity(electrodes.len());
    for (i, p) in electrodes.contacts.iter().enumerate() {
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(format!("electrode {} has non-finite coordinates", i + 1)));
        }
        model.doi_of_point(p)?;
        let mut d = vec![f64::INFINITY; grid];
        for (v, &b) in verts.iter().zip(&bins) {
            d[b] = d[b].min((v.position - p).norm());
        }
        for x in d.iter_mut() {
            if x.is_infinite() {
                *x = f64::NAN;
            }
        }
        fill_gaps(&mut d);
        let nearest = model.nearest_modiolar_vertex(p);
        curves.push(DvfCurve { electrode: i + 1, distances: d, d_min: (nearest.position - p).norm(), freq: nearest.frequency });
    }
    Ok(DvfSet { freqs, curves, interpolated })
}

impl DvfSet {
    /// Set from raw curves; `d_min` and `freq` are taken from each curve minimum.
    pub fn from_curves(freqs: Vec<f64>, distances: Vec<Vec<f64>>) -> Result<Self> {
        let curves = distances
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut c = DvfCurve { electrode: i + 1, distances: d, d_min: 0.0, freq: 0.0 };
                let k = c.argmin();
                c.d_min = c.distances.get(k).copied().unwrap_or(0.0);
                c.freq = freqs.get(k).copied().unwrap_or(0.0);
                c
            })
            .collect();
        let set = DvfSet { interpolated: vec![false; freqs.len()], freqs, curves };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.freqs.len();
        if n < 2 || self.curves.is_empty() {
            return Err(Error::Empty("a DVF set needs a grid of at least 2 points and one curve".into()));
        }
        if !self.freqs.windows(2).all(|w| w[0] > w[1]) || !(self.freqs[n - 1] > 0.0) {
            return Err(Error::InvalidArgument("frequency grid must be positive and strictly descending".into()));
        }
        if self.interpolated.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: self.interpolated.len() });
        }
        for c in &self.curves {
            if c.distances.len() != n {
                return Err(Error::SizeMismatch { expected: n, found: c.distances.len() });
            }
            if !c.distances.iter().all(|&d| d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidArgument(format!("curve {} has a negative or non-finite distance", c.electrode)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Pointwise minimum over curves other than `i` (0-based), restricted to
    /// `subset` when given.
    pub fn envelope_excluding(&self, i: usize, subset: Option<&[bool]>) -> Result<Vec<f64>> {
        if let Some(s) = subset {
            if s.len() != self.len() {
                return Err(Error::SizeMismatch { expected: self.len(), found: s.len() });
            }
        }
        let mut env = vec![f64::INFINITY; self.freqs.len()];
        let mut any = false;
        for (k, c) in self.curves.iter().enumerate() {
            if k == i || subset.is_some_and(|s| !s[k]) {
                continue;
            }
            any = true;
            for (e, &d) in env.iter_mut().zip(&c.distances) {
                *e = e.min(d);
            }
        }
        if !any {
            return Err(Error::Empty(format!("no other curve to envelope electrode {}", i + 1)));
        }
        Ok(env)
    }

    /// `freq_hz,e1,...,eN` rows followed by `D_i:` and `Freq_i:` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz");
        for c in &self.curves {
            write!(s, ",e{}", c.electrode).unwrap();
        }
        s.push('\n');
        for (k, f) in self.freqs.iter().enumerate() {
            write!(s, "{f}").unwrap();
            for c in &self.curves {
                write!(s, ",{}", c.distances[k]).unwrap();
            }
            s.push('\n');
        }
        s.push_str("D_i:");
        for c in &self.curves {
            write!(s, ",{}", c.d_min).unwrap();
        }
        s.push_str("\nFreq_i:");
        for c in &self.curves {
            write!(s, ",{}", c.freq).unwrap();
        }
        s.push('\n');
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty DVF file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"freq_hz") || cols.len() < 2 {
            return Err(Error::Parse(format!("unexpected DVF header {header:?}")));
        }
        let n = cols.len() - 1;
        for (k, c) in cols[1..].iter().enumerate() {
            if *c != format!("e{}", k + 1) {
                return Err(Error::Parse(format!("column {} is {c:?}, expected e{}", k + 2, k + 1)));
            }
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
        let row = |line: &str, what: &str| -> Result<Vec<f64>> {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != n + 1 {
                return Err(Error::Parse(format!("{what} row has {} fields, expected {}", f.len(), n + 1)));
            }
            f[1..].iter().map(|s| num(s)).collect()
        };
        let mut freqs = Vec::new();
        let mut cols_d: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut d_min = None;
        let mut freq_i = None;
        for line in lines {
            if let Some(rest) = line.strip_prefix("D_i:") {
                d_min = Some(row(&format!("D_i:{rest}"), "D_i")?);
            } else if let Some(rest) = line.strip_prefix("Freq_i:") {
                freq_i = Some(row(&format!("Freq_i:{rest}"), "Freq_i")?);
            } else {
                let v = row(line, "distance")?;
                freqs.push(num(line.split(',').next().unwrap_or(""))?);
                for (c, d) in cols_d.iter_mut().zip(v) {
                    c.push(d);
                }
            }
        }
        let (d_min, freq_i) = match (d_min, freq_i) {
            (Some(d), Some(f)) => (d, f),
            _ => return Err(Error::Parse("DVF file lacks the D_i: and Freq_i: rows".into())),
        };
        let curves = cols_d
            .into_iter()
            .enumerate()
            .map(|(k, distances)| DvfCurve { electrode: k + 1, distances, d_min: d_min[k], freq: freq_i[k] })
            .collect();
        let set = DvfSet { interpolated: vec![false; freqs.len()], freqs, curves };
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Line plot over log frequency; inactive electrodes are drawn gray and dashed.
    pub fn to_svg(&self, active: Option<&[bool]>) -> String {
        let (w, h, m) = (720.0, 420.0, 50.0);
        let (fa, fb) = (self.freqs[0].log10(), self.freqs[self.freqs.len() - 1].log10());
        let dmax = self.curves.iter().flat_map(|c| c.distances.iter().cloned()).fold(0.0, f64::max).max(1e-9);
        let x = |f: f64| m + (f.log10() - fb) / (fa - fb) * (w - 2.0 * m);
        let y = |d: f64| h - m - d / dmax * (h - 2.0 * m);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<path d="M{m} {m} V{} H{}" stroke="black" fill="none"/>"#, h - m, w - m).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">frequency (Hz, log)</text>"#, w / 2.0, h - 15.0).unwrap();
        writeln!(s, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">distance (mm)</text>"#, h / 2.0, h / 2.0).unwrap();
        for (k, c) in self.curves.iter().enumerate() {
            let on = active.is_none_or(|a| a.get(k).copied().unwrap_or(true));
            let hue = 360.0 * k as f64 / self.curves.len() as f64;
            let style = if on {
                format!(r#"stroke="hsl({hue:.0},70%,40%)" stroke-width="1.5""#)
            } else {
                r##"stroke="#999" stroke-width="1" stroke-dasharray="4 3""##.to_string()
            };
            let mut d = String::new();
            for (i, (&f, &v)) in self.freqs.iter().zip(&c.distances).enumerate() {
                write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, x(f), y(v)).unwrap();
            }
            writeln!(s, r#"<path d="{d}" fill="none" {style}><title>e{}</title></path>"#, c.electrode).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}
