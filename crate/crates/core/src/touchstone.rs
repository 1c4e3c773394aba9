//! Two-port S-parameter tables and their on-disk forms: Touchstone v1
//! (`.s2p`) and a plain CSV layout.
//!
//! Values are always held in rectangular complex form with frequencies in
//! hertz, whatever the source file used. Writers emit the shortest decimal
//! representation that parses back to the same `f64`, so RI and CSV round
//! trips are exact and MA/DB round trips only pick up the polar conversion
//! roundoff.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{is_finite_complex, lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TouchstoneError {
    #[error("line {line}: data line before the '#' option line")]
    MissingOptionLine { line: usize },
    #[error("line {line}: second '#' option line")]
    DuplicateOptionLine { line: usize },
    #[error("line {line}: unsupported format: {reason}")]
    UnsupportedFormat { line: usize, reason: String },
    #[error("line {line}: malformed data line: {reason}")]
    MalformedDataLine { line: usize, reason: String },
    #[error("line {line}: duplicate frequency {frequency_hz} Hz")]
    DuplicateFrequency { line: usize, frequency_hz: f64 },
    #[error("CSV header mismatch: found `{found}`")]
    HeaderMismatch { found: String },
    #[error("invalid table: {0}")]
    InvalidTable(String),
}

impl TouchstoneError {
    /// Source line the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::MissingOptionLine { line }
            | Self::DuplicateOptionLine { line }
            | Self::UnsupportedFormat { line, .. }
            | Self::MalformedDataLine { line, .. }
            | Self::DuplicateFrequency { line, .. } => Some(*line),
            Self::HeaderMismatch { .. } => Some(1),
            Self::InvalidTable(_) => None,
        }
    }
}

/// Number format of the complex columns in a Touchstone file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    /// Real / imaginary.
    #[default]
    RI,
    /// Linear magnitude / angle in degrees.
    MA,
    /// Magnitude in dB (20·log10) / angle in degrees.
    DB,
}

impl DataFormat {
    pub const ALL: [DataFormat; 3] = [DataFormat::RI, DataFormat::MA, DataFormat::DB];

    fn keyword(self) -> &'static str {
        match self {
            DataFormat::RI => "RI",
            DataFormat::MA => "MA",
            DataFormat::DB => "DB",
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(DataFormat::RI),
            "MA" => Ok(DataFormat::MA),
            "DB" => Ok(DataFormat::DB),
            other => Err(format!("unknown data format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyUnit {
    #[default]
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub const ALL: [FrequencyUnit; 4] = [
        FrequencyUnit::Hz,
        FrequencyUnit::KHz,
        FrequencyUnit::MHz,
        FrequencyUnit::GHz,
    ];

    /// Hertz per unit.
    pub fn scale(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "HZ",
            FrequencyUnit::KHz => "KHZ",
            FrequencyUnit::MHz => "MHZ",
            FrequencyUnit::GHz => "GHZ",
        }
    }
}

/// S-parameters of a two-port at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParamRecord<T: Real> {
    /// Hz.
    pub frequency: T,
    pub s11: Complex<T>,
    pub s21: Complex<T>,
    pub s12: Complex<T>,
    pub s22: Complex<T>,
}

impl<T: Real> SParamRecord<T> {
    /// Reciprocal, symmetric two-port: `s12 = s21`, `s22 = s11`.
    pub fn symmetric(frequency: T, s11: Complex<T>, s21: Complex<T>) -> Self {
        Self {
            frequency,
            s11,
            s21,
            s12: s21,
            s22: s11,
        }
    }

    pub fn entries(&self) -> [Complex<T>; 4] {
        [self.s11, self.s21, self.s12, self.s22]
    }

    fn check(&self) -> Result<(), String> {
        if !(self.frequency.is_finite() && self.frequency > T::zero()) {
            return Err(format!("frequency {} is not positive", self.frequency));
        }
        if !self.entries().iter().all(|z| is_finite_complex(*z)) {
            return Err(format!("non-finite S-parameter at {} Hz", self.frequency));
        }
        Ok(())
    }
}

/// Frequency-ordered S-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SParamTable<T: Real> {
    pub records: Vec<SParamRecord<T>>,
    /// Ohms.
    pub reference_impedance: T,
    pub source_format: DataFormat,
    pub frequency_unit: FrequencyUnit,
    /// Comment lines (without the leading `!`), kept only when requested.
    pub comments: Vec<String>,
}

impl<T: Real> SParamTable<T> {
    /// Builds a validated table with 50 Ω reference, RI format, Hz units.
    pub fn new(records: Vec<SParamRecord<T>>) -> Result<Self, TouchstoneError> {
        let table = Self {
            records,
            reference_impedance: lit(50.0),
            source_format: DataFormat::RI,
            frequency_unit: FrequencyUnit::Hz,
            comments: Vec::new(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = T> + '_ {
        self.records.iter().map(|r| r.frequency)
    }

    pub fn validate(&self) -> Result<(), TouchstoneError> {
        if self.records.is_empty() {
            return Err(TouchstoneError::InvalidTable("no records".into()));
        }
        if !(self.reference_impedance.is_finite() && self.reference_impedance > T::zero()) {
            return Err(TouchstoneError::InvalidTable(format!(
                "reference impedance {} is not positive",
                self.reference_impedance
            )));
        }
        for r in &self.records {
            r.check().map_err(TouchstoneError::InvalidTable)?;
        }
        for w in self.records.windows(2) {
            if w[1].frequency <= w[0].frequency {
                return Err(TouchstoneError::InvalidTable(format!(
                    "frequencies not strictly ascending at {} Hz",
                    w[1].frequency
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub keep_comments: bool,
}

/// Parses a Touchstone v1 two-port S-parameter file, discarding comments.
pub fn parse_touchstone<T: Real>(text: &str) -> Result<SParamTable<T>, TouchstoneError> {
    parse_touchstone_with(text, ParseOptions::default())
}

struct OptionLine {
    unit: FrequencyUnit,
    format: DataFormat,
    z0: f64,
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine, TouchstoneError> {
    let unsupported = |reason: String| TouchstoneError::UnsupportedFormat { line, reason };
    // Touchstone v1 defaults.
    let mut opt = OptionLine {
        unit: FrequencyUnit::GHz,
        format: DataFormat::MA,
        z0: 50.0,
    };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opt.unit = FrequencyUnit::Hz,
            "KHZ" => opt.unit = FrequencyUnit::KHz,
            "MHZ" => opt.unit = FrequencyUnit::MHz,
            "GHZ" => opt.unit = FrequencyUnit::GHz,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(unsupported(format!("{p}-parameters (only S is supported)")))
            }
            "RI" => opt.format = DataFormat::RI,
            "MA" => opt.format = DataFormat::MA,
            "DB" => opt.format = DataFormat::DB,
            "R" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| unsupported("missing reference impedance after R".into()))?;
                let z0: f64 = value
                    .parse()
                    .map_err(|_| unsupported(format!("bad reference impedance `{value}`")))?;
                if !(z0.is_finite() && z0 > 0.0) {
                    return Err(unsupported(format!("reference impedance {z0} is not positive")));
                }
                opt.z0 = z0;
            }
            other => return Err(unsupported(format!("unknown option `{other}`"))),
        }
    }
    Ok(opt)
}

fn pair_to_complex(a: f64, b: f64, format: DataFormat) -> Complex<f64> {
    match format {
        DataFormat::RI => Complex::new(a, b),
        DataFormat::MA => Complex::from_polar(a, b.to_radians()),
        DataFormat::DB => Complex::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn complex_to_pair(z: Complex<f64>, format: DataFormat) -> (f64, f64) {
    match format {
        DataFormat::RI => (z.re, z.im),
        DataFormat::MA => (z.norm(), z.arg().to_degrees()),
        // |z| = 0 gives -inf dB, which parses back to magnitude 0.
        DataFormat::DB => (20.0 * z.norm().log10(), z.arg().to_degrees()),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, TouchstoneError> {
    tok.parse::<f64>()
        .map_err(|_| TouchstoneError::MalformedDataLine {
            line,
            reason: format!("unparsable number `{tok}`"),
        })
}

pub fn parse_touchstone_with<T: Real>(
    text: &str,
    opts: ParseOptions,
) -> Result<SParamTable<T>, TouchstoneError> {
    let mut option: Option<OptionLine> = None;
    let mut comments = Vec::new();
    let mut rows: Vec<(usize, SParamRecord<T>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (content, comment) = match raw.find('!') {
            Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
            None => (raw, None),
        };
        if let (true, Some(c)) = (opts.keep_comments, comment) {
            comments.push(c.trim_end().to_string());
        }
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(body) = content.strip_prefix('#') {
            if option.is_some() {
                return Err(TouchstoneError::DuplicateOptionLine { line });
            }
            option = Some(parse_option_line(body, line)?);
            continue;
        }
        if content.starts_with('[') {
            return Err(TouchstoneError::UnsupportedFormat {
                line,
                reason: format!("Touchstone v2 keyword `{content}`"),
            });
        }
        let opt = option
            .as_ref()
            .ok_or(TouchstoneError::MissingOptionLine { line })?;
        let cols: Vec<&str> = content.split_whitespace().collect();
        if cols.len() != 9 {
            return Err(TouchstoneError::MalformedDataLine {
                line,
                reason: format!("expected 9 columns, found {}", cols.len()),
            });
        }
        let mut v = [0.0f64; 9];
        for (slot, tok) in v.iter_mut().zip(&cols) {
            *slot = parse_number(tok, line)?;
        }
        let freq = v[0] * opt.unit.scale();
        let s = |i: usize| {
            let z = pair_to_complex(v[1 + 2 * i], v[2 + 2 * i], opt.format);
            Complex::new(lit::<T>(z.re), lit::<T>(z.im))
        };
        let record = SParamRecord {
            frequency: lit(freq),
            s11: s(0),
            s21: s(1),
            s12: s(2),
            s22: s(3),
        };
        record
            .check()
            .map_err(|reason| TouchstoneError::MalformedDataLine { line, reason })?;
        rows.push((line, record));
    }

    let opt = option.ok_or(TouchstoneError::MissingOptionLine { line: 0 })?;
    let records = sort_unique(rows)?;
    let table = SParamTable {
        records,
        reference_impedance: lit(opt.z0),
        source_format: opt.format,
        frequency_unit: opt.unit,
        comments,
    };
    table.validate()?;
    Ok(table)
}

fn sort_unique<T: Real>(
    mut rows: Vec<(usize, SParamRecord<T>)>,
) -> Result<Vec<SParamRecord<T>>, TouchstoneError> {
    rows.sort_by(|a, b| {
        a.1.frequency
            .partial_cmp(&b.1.frequency)
            .expect("frequencies checked finite")
            .then(a.0.cmp(&b.0))
    });
    for w in rows.windows(2) {
        if w[0].1.frequency == w[1].1.frequency {
            return Err(TouchstoneError::DuplicateFrequency {
                line: w[1].0,
                frequency_hz: to_f64(w[1].1.frequency),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

fn c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

/// Writes a Touchstone v1 file using the table's frequency unit and the
/// requested number format.
pub fn write_touchstone<T: Real>(
    table: &SParamTable<T>,
    format: DataFormat,
) -> Result<String, TouchstoneError> {
    table.validate()?;
    let mut out = String::new();
    for c in &table.comments {
        let _ = writeln!(out, "!{c}");
    }
    let _ = writeln!(
        out,
        "# {} S {} R {}",
        table.frequency_unit.keyword(),
        format.keyword(),
        to_f64(table.reference_impedance)
    );
    let scale = table.frequency_unit.scale();
    for r in &table.records {
        let _ = write!(out, "{:e}", to_f64(r.frequency) / scale);
        for z in r.entries() {
            let (a, b) = complex_to_pair(c64(z), format);
            let _ = write!(out, " {a:e} {b:e}");
        }
        out.push('\n');
    }
    Ok(out)
}

const CSV_SHORT: [&str; 5] = ["freq_hz", "s11_re", "s11_im", "s21_re", "s21_im"];
const CSV_FULL: [&str; 9] = [
    "freq_hz", "s11_re", "s11_im", "s21_re", "s21_im", "s12_re", "s12_im", "s22_re", "s22_im",
];

/// Parses the CSV S-parameter layout. Five-column files describe a
/// reciprocal symmetric two-port (`s12 = s21`, `s22 = s11`).
pub fn parse_sparam_csv<T: Real>(text: &str) -> Result<SParamTable<T>, TouchstoneError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| TouchstoneError::HeaderMismatch {
        found: String::new(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let width = if names == CSV_SHORT {
        5
    } else if names == CSV_FULL {
        9
    } else {
        return Err(TouchstoneError::HeaderMismatch {
            found: header.to_string(),
        });
    };

    let mut rows = Vec::new();
    for (line, l) in lines {
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        if cols.len() != width {
            return Err(TouchstoneError::MalformedDataLine {
                line,
                reason: format!("expected {width} columns, found {}", cols.len()),
            });
        }
        let v = cols
            .iter()
            .map(|t| parse_number(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        let c = |i: usize| Complex::new(lit::<T>(v[i]), lit::<T>(v[i + 1]));
        let record = if width == 5 {
            SParamRecord::symmetric(lit(v[0]), c(1), c(3))
        } else {
            SParamRecord {
                frequency: lit(v[0]),
                s11: c(1),
                s21: c(3),
                s12: c(5),
                s22: c(7),
            }
        };
        record
            .check()
            .map_err(|reason| TouchstoneError::MalformedDataLine { line, reason })?;
        rows.push((line, record));
    }
    let table = SParamTable {
        records: sort_unique(rows)?,
        reference_impedance: lit(50.0),
        source_format: DataFormat::RI,
        frequency_unit: FrequencyUnit::Hz,
        comments: Vec::new(),
    };
    table.validate()?;
    Ok(table)
}

/// Writes the full nine-column CSV layout.
pub fn write_sparam_csv<T: Real>(table: &SParamTable<T>) -> Result<String, TouchstoneError> {
    table.validate()?;
    let mut out = CSV_FULL.join(",");
    out.push('\n');
    for r in &table.records {
        let _ = write!(out, "{:e}", to_f64(r.frequency));
        for z in r.entries() {
            let z = c64(z);
            let _ = write!(out, ",{:e},{:e}", z.re, z.im);
        }
        out.push('\n');
    }
    Ok(out)
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}
