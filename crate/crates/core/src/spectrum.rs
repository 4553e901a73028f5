//! Uniform frequency axes and 1D/2D spectra with their text formats.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::textio::{fmt_f64, write_file, Metadata, Row, Table};
use crate::units::RAD_PER_THZ;

/// Uniform axis in THz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !start.is_finite() || !(step > 0.0) || !step.is_finite() || len == 0 {
            return Err(Error::invalid(format!(
                "axis needs finite start, positive step and at least one point (start {start}, step {step}, len {len})"
            )));
        }
        Ok(Self { start, step, len })
    }

    /// `len` points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, len: usize) -> Result<Self> {
        if len < 2 || !(stop > start) {
            return Err(Error::invalid(format!(
                "linspace needs stop > start and len >= 2 (got {start}..{stop}, {len})"
            )));
        }
        Self::new(start, (stop - start) / (len - 1) as f64, len)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.value(self.len - 1)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.value(i))
    }

    /// Angular frequencies (rad/s).
    pub fn angular(&self) -> Vec<f64> {
        self.values().map(|f| f * RAD_PER_THZ).collect()
    }

    pub fn contains(&self, v: f64) -> bool {
        let tol = 1e-9 * self.step;
        v >= self.start - tol && v <= self.last() + tol
    }

    pub fn nearest_index(&self, v: f64) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        let idx = ((v - self.start) / self.step).round();
        Some((idx.max(0.0) as usize).min(self.len - 1))
    }

    fn header(&self) -> String {
        format!("{} {} {}", fmt_f64(self.start), fmt_f64(self.step), self.len)
    }

    fn parse_header(s: &str, source: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::format(source, 1, format!("axis header must be `start step len`, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let step = parts[1].parse().map_err(|_| bad())?;
        let len = parts[2].parse().map_err(|_| bad())?;
        Self::new(start, step, len)
    }

    /// Infer an axis from a column of sample positions, which must be uniform.
    fn infer(values: &[f64], source: &str, line: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::format(source, line, "need at least two rows to infer a frequency axis"));
        }
        let n = values.len();
        let step = (values[n - 1] - values[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::format(source, line, "frequency column must be strictly increasing"));
        }
        for (i, v) in values.iter().enumerate() {
            if (v - (values[0] + i as f64 * step)).abs() > 1e-6 * step {
                return Err(Error::format(source, line + i, "frequency column is not uniformly spaced"));
            }
        }
        Self::new(values[0], step, n)
    }
}

/// Sample types a [`Spectrum1D`] can carry.
pub trait Sample: Copy + Send + Sync + std::fmt::Debug + PartialEq + 'static {
    const COLUMNS: usize;
    const KIND: &'static str;
    fn write(&self, out: &mut String);
    fn read(row: &Row, first: usize, source: &str) -> Result<Self>;
    fn zero() -> Self;
}

impl Sample for f64 {
    const COLUMNS: usize = 1;
    const KIND: &'static str = "real";

    fn write(&self, out: &mut String) {
        let _ = write!(out, " {}", fmt_f64(*self));
    }

    fn read(row: &Row, first: usize, source: &str) -> Result<Self> {
        row.float(first, source)
    }

    fn zero() -> Self {
        0.0
    }
}

impl Sample for Complex64 {
    const COLUMNS: usize = 2;
    const KIND: &'static str = "complex";

    fn write(&self, out: &mut String) {
        let _ = write!(out, " {} {}", fmt_f64(self.re), fmt_f64(self.im));
    }

    fn read(row: &Row, first: usize, source: &str) -> Result<Self> {
        Ok(Complex64::new(row.float(first, source)?, row.float(first + 1, source)?))
    }

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// A spectrum on a uniform THz axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D<T: Sample = f64> {
    pub axis: Axis,
    pub amplitude: Vec<T>,
    pub metadata: Metadata,
}

pub type ComplexSpectrum1D = Spectrum1D<Complex64>;

impl<T: Sample> Spectrum1D<T> {
    pub fn new(axis: Axis, amplitude: Vec<T>) -> Result<Self> {
        if amplitude.len() != axis.len {
            return Err(Error::invalid(format!(
                "spectrum has {} samples for an axis of {}",
                amplitude.len(),
                axis.len
            )));
        }
        Ok(Self {
            axis,
            amplitude,
            metadata: Metadata::new(),
        })
    }

    pub fn zeros(axis: Axis) -> Self {
        Self {
            axis,
            amplitude: vec![T::zero(); axis.len],
            metadata: Metadata::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut meta = Metadata::new()
            .with("format", "spectrum1d")
            .with("values", T::KIND)
            .with("axis_thz", self.axis.header());
        meta.extend(&self.metadata);
        meta.write_to(&mut out);
        for (i, a) in self.amplitude.iter().enumerate() {
            out.push_str(&fmt_f64(self.axis.value(i)));
            a.write(&mut out);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut table = Table::parse(text, source)?;
        if let Some(kind) = table.metadata.get("values") {
            if kind != T::KIND {
                return Err(Error::format(source, 1, format!("expected {} values, file holds {kind}", T::KIND)));
            }
        }
        let rows: Vec<Row> = table.blocks.drain(..).flatten().collect();
        let first_line = rows.first().map(|r| r.line).unwrap_or(1);
        let mut amplitude = Vec::with_capacity(rows.len());
        let mut freqs = Vec::with_capacity(rows.len());
        for row in &rows {
            row.expect_len(1 + T::COLUMNS, source)?;
            freqs.push(row.float(0, source)?);
            amplitude.push(T::read(row, 1, source)?);
        }
        let axis = match table.metadata.get("axis_thz") {
            Some(h) => Axis::parse_header(h, source)?,
            None => Axis::infer(&freqs, source, first_line)?,
        };
        if axis.len != amplitude.len() {
            return Err(Error::format(
                source,
                first_line,
                format!("axis declares {} points but {} rows follow", axis.len, amplitude.len()),
            ));
        }
        let mut metadata = table.metadata;
        for k in ["format", "values", "axis_thz"] {
            metadata.remove(k);
        }
        Ok(Self {
            axis,
            amplitude,
            metadata,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

impl Spectrum1D<f64> {
    /// Trapezoidal integral over the axis (THz units).
    pub fn integral(&self) -> f64 {
        trapezoid(&self.amplitude, self.axis.step)
    }
}

pub(crate) fn trapezoid(y: &[f64], h: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1])),
    }
}

/// Complex 2D spectrum; rows follow `omega_T`, columns follow `omega_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub emission_axis: Axis,
    pub dq_axis: Axis,
    /// Row-major, `dq_axis.len` rows by `emission_axis.len` columns.
    pub values: Vec<Complex64>,
    /// Delay between the first two pulses, s.
    pub tau: f64,
    pub metadata: Metadata,
}

impl Spectrum2D {
    pub fn new(dq_axis: Axis, emission_axis: Axis, values: Vec<Complex64>, tau: f64) -> Result<Self> {
        if values.len() != dq_axis.len * emission_axis.len {
            return Err(Error::invalid(format!(
                "2D spectrum needs {}x{} values, got {}",
                dq_axis.len,
                emission_axis.len,
                values.len()
            )));
        }
        Ok(Self {
            emission_axis,
            dq_axis,
            values,
            tau,
            metadata: Metadata::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.dq_axis.len
    }

    pub fn cols(&self) -> usize {
        self.emission_axis.len
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `with_magnitude` appends a third matrix block holding `|S|`; it is
    /// ignored when reading.
    pub fn to_text(&self, with_magnitude: bool) -> String {
        let mut out = String::new();
        let mut meta = Metadata::new()
            .with("format", "spectrum2d")
            .with("tau_s", fmt_f64(self.tau))
            .with("omega_T_axis_thz", self.dq_axis.header())
            .with("omega_t_axis_thz", self.emission_axis.header())
            .with("blocks", if with_magnitude { "real imag magnitude" } else { "real imag" });
        meta.extend(&self.metadata);
        meta.write_to(&mut out);
        let block = |f: &dyn Fn(Complex64) -> f64, out: &mut String| {
            for r in 0..self.rows() {
                let line: Vec<String> = self.row(r).iter().map(|v| fmt_f64(f(*v))).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        };
        block(&|v| v.re, &mut out);
        out.push('\n');
        block(&|v| v.im, &mut out);
        if with_magnitude {
            out.push('\n');
            block(&|v| v.norm(), &mut out);
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let table = Table::parse(text, source)?;
        if table.metadata.get("format") != Some("spectrum2d") {
            return Err(Error::format(source, 1, "missing `# format: spectrum2d` header"));
        }
        let tau = table.require_f64("tau_s", source)?;
        let dq_axis = Axis::parse_header(table.require("omega_T_axis_thz", source)?, source)?;
        let emission_axis = Axis::parse_header(table.require("omega_t_axis_thz", source)?, source)?;
        if table.blocks.len() < 2 {
            return Err(Error::format(source, 1, "expected real and imaginary matrix blocks"));
        }
        let read_block = |rows: &[Row]| -> Result<Vec<f64>> {
            if rows.len() != dq_axis.len {
                let line = rows.first().map(|r| r.line).unwrap_or(1);
                return Err(Error::format(
                    source,
                    line,
                    format!("block has {} rows, expected {}", rows.len(), dq_axis.len),
                ));
            }
            let mut out = Vec::with_capacity(dq_axis.len * emission_axis.len);
            for row in rows {
                row.expect_len(emission_axis.len, source)?;
                for c in 0..emission_axis.len {
                    out.push(row.float(c, source)?);
                }
            }
            Ok(out)
        };
        let re = read_block(&table.blocks[0])?;
        let im = read_block(&table.blocks[1])?;
        let values = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
        let mut metadata = table.metadata;
        for k in ["format", "tau_s", "omega_T_axis_thz", "omega_t_axis_thz", "blocks"] {
            metadata.remove(k);
        }
        let mut s = Self::new(dq_axis, emission_axis, values, tau)?;
        s.metadata = metadata;
        Ok(s)
    }

    pub fn write(&self, path: &Path, with_magnitude: bool) -> Result<()> {
        write_file(path, &self.to_text(with_magnitude))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_basics() {
        let a = Axis::linspace(400.0, 401.0, 11).unwrap();
        assert!((a.step - 0.1).abs() < 1e-12);
        assert_eq!(a.nearest_index(400.26), Some(3));
        assert_eq!(a.nearest_index(401.5), None);
        assert!(Axis::new(0.0, 0.0, 3).is_err());
        assert!(Axis::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn measured_file_without_header_infers_axis() {
        let s = Spectrum1D::<f64>::from_text("1.0 0.5\n1.5 0.7\n2.0 0.1\n", "m").unwrap();
        assert_eq!(s.axis.len, 3);
        assert!((s.axis.step - 0.5).abs() < 1e-15);
        assert!(Spectrum1D::<f64>::from_text("1.0 0.5\n1.5 0.7\n2.1 0.1\n", "m").is_err());
    }

    #[test]
    fn wrong_kind_rejected() {
        let s = Spectrum1D::<Complex64>::zeros(Axis::new(0.0, 1.0, 3).unwrap());
        assert!(Spectrum1D::<f64>::from_text(&s.to_text(), "x").is_err());
    }

    #[test]
    fn spectrum2d_bad_rows_reported_with_line() {
        let s = Spectrum2D::new(
            Axis::new(0.0, 1.0, 2).unwrap(),
            Axis::new(0.0, 1.0, 2).unwrap(),
            vec![Complex64::new(1.0, 2.0); 4],
            0.0,
        )
        .unwrap();
        let text = s.to_text(false).replacen("1 1\n", "1\n", 1);
        match Spectrum2D::from_text(&text, "f") {
            Err(Error::Format { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn spectrum2d_text_fixpoint(vals in proptest::collection::vec((-1e-30f64..1e-30, -1e3f64..1e3), 6), tau in 0.0f64..1e-9, mag: bool) {
            let values: Vec<Complex64> = vals.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let mut s = Spectrum2D::new(
                Axis::new(816.0, 0.01, 2).unwrap(),
                Axis::new(408.0, 0.003, 3).unwrap(),
                values,
                tau,
            ).unwrap();
            s.metadata.set("source", "test");
            let t1 = s.to_text(mag);
            let back = Spectrum2D::from_text(&t1, "p").unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_text(mag), t1);
        }

        #[test]
        fn spectrum1d_text_fixpoint(vals in proptest::collection::vec(-1e5f64..1e5, 1..20), start in 300.0f64..500.0) {
            let axis = Axis::new(start, 1e-3, vals.len()).unwrap();
            let s = Spectrum1D::new(axis, vals).unwrap();
            let t1 = s.to_text();
            let back = Spectrum1D::<f64>::from_text(&t1, "p").unwrap();
            prop_assert_eq!(&back, &s);
        }
    }
}
