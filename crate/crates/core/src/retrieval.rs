//! Effective-medium parameter retrieval from slab S-parameters.
//!
//! Time convention is `e^{-iωt}` throughout: a passive medium has
//! `Im(n) ≥ 0`, `Im(ε) ≥ 0`, `Im(μ) ≥ 0` and a forward-travelling wave
//! accumulates phase as `e^{+i n k0 d}`.
//!
//! [`slab_forward`] is the homogeneous-slab model (Airy sum of a slab in
//! vacuum) and serves as the independent oracle for the inversion in
//! [`retrieve_impedance`], [`retrieve_index`] and [`unwrap_branch`].

use std::fmt::Write as _;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{is_finite_complex, lit, to_f64, wavenumber, Real};
use crate::touchstone::{SParamRecord, SParamTable, TouchstoneError};

/// Transmission magnitude at or below which a point is reported as a gap.
pub const TOL_S21: f64 = 1e-6;
/// Below this `|Re z|` the impedance sign follows the previous point.
pub const TOL_Z: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("slab response is not finite (resonant lossless cavity)")]
    NonFiniteResult,
    #[error("degenerate denominator in impedance or transmission inversion")]
    DegenerateDenominator,
    #[error("|S21| = {magnitude:e} is at or below the retrieval threshold")]
    TransmissionTooSmall { magnitude: f64 },
    #[error("no frequency point could be retrieved")]
    EmptySweep,
    #[error("sweep has {0} point(s); at least 2 are required")]
    InsufficientData(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Table(#[from] TouchstoneError),
}

/// Square root on the branch with `Im ≥ 0` (and `Re ≥ 0` on the real axis).
pub fn sqrt_upper<T: Real>(w: Complex<T>) -> Complex<T> {
    let s = w.sqrt();
    if s.im < T::zero() || (s.im == T::zero() && s.re < T::zero()) {
        -s
    } else {
        s
    }
}

/// Effective slab used for the inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabSpec<T: Real> {
    /// Metres.
    pub thickness: T,
}

impl<T: Real> SlabSpec<T> {
    pub fn new(thickness: T) -> Result<Self, RetrievalError> {
        if !(thickness.is_finite() && thickness > T::zero()) {
            return Err(RetrievalError::InvalidInput(format!(
                "slab thickness {thickness} must be positive"
            )));
        }
        Ok(Self { thickness })
    }
}

/// Returns `(s11, s21)` of a homogeneous slab of relative permittivity `eps`
/// and permeability `mu`, thickness `d` (m) at frequency `f` (Hz).
pub fn slab_forward<T: Real>(
    eps: Complex<T>,
    mu: Complex<T>,
    d: T,
    f: T,
) -> Result<(Complex<T>, Complex<T>), RetrievalError> {
    if !(f > T::zero() && d > T::zero()) {
        return Err(RetrievalError::InvalidInput("f and d must be positive".into()));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if eps == zero || mu == zero || !is_finite_complex(eps) || !is_finite_complex(mu) {
        return Err(RetrievalError::InvalidInput("eps and mu must be finite and nonzero".into()));
    }
    // With both roots on the upper branch, n has Im ≥ 0 and z has Re ≥ 0 for
    // any passive pair, and the product form keeps Re(n) < 0 for DNG media.
    let se = sqrt_upper(eps);
    let sm = sqrt_upper(mu);
    let n = se * sm;
    let z = sm / se;
    let one = Complex::new(T::one(), T::zero());
    let k0 = wavenumber(f);
    let r = (z - one) / (z + one);
    let t = (Complex::<T>::i() * n * k0 * d).exp();
    let denom = one - r * r * t * t;
    if denom.norm() == T::zero() {
        return Err(RetrievalError::NonFiniteResult);
    }
    let s11 = r * (one - t * t) / denom;
    let s21 = (one - r * r) * t / denom;
    if !is_finite_complex(s11) || !is_finite_complex(s21) {
        return Err(RetrievalError::NonFiniteResult);
    }
    Ok((s11, s21))
}

/// Normalized wave impedance from S-parameters, on the `Re z ≥ 0` branch.
pub fn retrieve_impedance<T: Real>(
    s11: Complex<T>,
    s21: Complex<T>,
) -> Result<Complex<T>, RetrievalError> {
    retrieve_impedance_after(s11, s21, None)
}

/// As [`retrieve_impedance`], but when `|Re z| < TOL_Z` the sign is taken
/// closest to `previous`.
pub fn retrieve_impedance_after<T: Real>(
    s11: Complex<T>,
    s21: Complex<T>,
    previous: Option<Complex<T>>,
) -> Result<Complex<T>, RetrievalError> {
    let one = Complex::new(T::one(), T::zero());
    let s21sq = s21 * s21;
    let num = (one + s11) * (one + s11) - s21sq;
    let den = (one - s11) * (one - s11) - s21sq;
    if den.norm() == T::zero() {
        return Err(RetrievalError::DegenerateDenominator);
    }
    let mut z = (num / den).sqrt();
    if z.re < T::zero() {
        z = -z;
    }
    if let Some(prev) = previous {
        if z.re.abs() < lit(TOL_Z) && (-z - prev).norm() < (z - prev).norm() {
            z = -z;
        }
    }
    if !is_finite_complex(z) {
        return Err(RetrievalError::DegenerateDenominator);
    }
    Ok(z)
}

/// Transmission through the slab body, `T = e^{i n k0 d}`, recovered from the
/// S-parameters and the impedance.
fn slab_transmission<T: Real>(
    s11: Complex<T>,
    s21: Complex<T>,
    z: Complex<T>,
) -> Result<Complex<T>, RetrievalError> {
    let mag = s21.norm();
    if !(mag > lit(TOL_S21)) {
        return Err(RetrievalError::TransmissionTooSmall {
            magnitude: mag.to_f64().unwrap_or(0.0),
        });
    }
    let one = Complex::new(T::one(), T::zero());
    let r = (z - one) / (z + one);
    let den = one - s11 * r;
    if den.norm() == T::zero() {
        return Err(RetrievalError::DegenerateDenominator);
    }
    Ok(s21 / den)
}

fn index_from_transmission<T: Real>(t: Complex<T>, k0d: T, branch: i64) -> Complex<T> {
    let re = t.arg() + T::TAU() * lit(branch as f64);
    let im = -t.norm().ln();
    Complex::new(re / k0d, im / k0d)
}

/// Refractive index on branch `m`.
pub fn retrieve_index<T: Real>(
    s11: Complex<T>,
    s21: Complex<T>,
    z: Complex<T>,
    d: T,
    f: T,
    m: i64,
) -> Result<Complex<T>, RetrievalError> {
    let t = slab_transmission(s11, s21, z)?;
    Ok(index_from_transmission(t, wavenumber(f) * d, m))
}

/// Retrieved quantities at one frequency. `eps = n/z`, `mu = n·z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveValue<T: Real> {
    pub n: Complex<T>,
    pub z: Complex<T>,
    pub eps: Complex<T>,
    pub mu: Complex<T>,
    pub branch: i64,
}

impl<T: Real> EffectiveValue<T> {
    fn from_nz(n: Complex<T>, z: Complex<T>, branch: i64) -> Self {
        Self {
            n,
            z,
            eps: n / z,
            mu: n * z,
            branch,
        }
    }

    pub fn is_double_negative(&self) -> bool {
        self.eps.re < T::zero() && self.mu.re < T::zero()
    }
}

/// One sweep point; `value` is `None` for a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePoint<T: Real> {
    pub frequency: T,
    pub value: Option<EffectiveValue<T>>,
    /// Why the point is a gap.
    pub gap_reason: Option<RetrievalError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveParams<T: Real> {
    pub points: Vec<EffectivePoint<T>>,
}

impl<T: Real> EffectiveParams<T> {
    pub fn retrieved(&self) -> impl Iterator<Item = (T, &EffectiveValue<T>)> {
        self.points
            .iter()
            .filter_map(|p| p.value.as_ref().map(|v| (p.frequency, v)))
    }

    pub fn gap_count(&self) -> usize {
        self.points.iter().filter(|p| p.value.is_none()).count()
    }

    /// CSV with header
    /// `freq_hz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,branch,gap_flag`.
    /// Gap rows carry `NaN` values, branch 0 and flag 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,branch,gap_flag\n");
        for p in &self.points {
            let _ = write!(out, "{:e}", to_f64(p.frequency));
            match &p.value {
                Some(v) => {
                    for c in [v.n, v.z, v.eps, v.mu] {
                        let _ = write!(out, ",{:e},{:e}", to_f64(c.re), to_f64(c.im));
                    }
                    let _ = writeln!(out, ",{},0", v.branch);
                }
                None => out.push_str(",NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN,0,1\n"),
            }
        }
        out
    }
}

/// Full-sweep retrieval with branch unwrapping by continuity in `n`.
///
/// The first retrievable point uses `branch_hint` when given and the
/// thin-slab branch `m = 0` otherwise. Points whose transmission is too small
/// (or whose inversion is singular) become gaps; continuity resumes from the
/// last retrieved point.
pub fn unwrap_branch<T: Real>(
    table: &SParamTable<T>,
    slab: SlabSpec<T>,
    branch_hint: Option<i64>,
) -> Result<EffectiveParams<T>, RetrievalError> {
    table.validate()?;
    if table.len() < 2 {
        return Err(RetrievalError::InsufficientData(table.len()));
    }
    let d = slab.thickness;
    let mut prev_z: Option<Complex<T>> = None;
    let mut prev_n: Option<Complex<T>> = None;
    let mut points = Vec::with_capacity(table.len());

    for rec in &table.records {
        let f = rec.frequency;
        let k0d = wavenumber(f) * d;
        let result = retrieve_impedance_after(rec.s11, rec.s21, prev_z)
            .and_then(|z| slab_transmission(rec.s11, rec.s21, z).map(|t| (z, t)));
        let (z, t) = match result {
            Ok(v) => v,
            Err(e) => {
                points.push(EffectivePoint {
                    frequency: f,
                    value: None,
                    gap_reason: Some(e),
                });
                continue;
            }
        };
        let reference = match prev_n {
            Some(n) => n,
            None => index_from_transmission(t, k0d, branch_hint.unwrap_or(0)),
        };
        let m = nearest_branch(t, k0d, reference);
        let n = index_from_transmission(t, k0d, m);
        prev_z = Some(z);
        prev_n = Some(n);
        points.push(EffectivePoint {
            frequency: f,
            value: Some(EffectiveValue::from_nz(n, z, m)),
            gap_reason: None,
        });
    }

    if prev_n.is_none() {
        return Err(RetrievalError::EmptySweep);
    }
    Ok(EffectiveParams { points })
}

/// Branch whose index is closest to `reference`. Only `Re(n)` depends on the
/// branch, so the minimizer is the rounded real offset; the neighbours are
/// checked explicitly to settle rounding at half-integers.
fn nearest_branch<T: Real>(t: Complex<T>, k0d: T, reference: Complex<T>) -> i64 {
    let guess = ((reference.re * k0d - t.arg()) / T::TAU())
        .round()
        .to_i64()
        .unwrap_or(0);
    let dist = |m: i64| (index_from_transmission(t, k0d, m) - reference).norm();
    [guess - 1, guess, guess + 1]
        .into_iter()
        .fold(guess, |best, m| if dist(m) < dist(best) { m } else { best })
}

/// Closed frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand<T> {
    pub start: T,
    pub stop: T,
}

impl<T: Real> FrequencyBand<T> {
    pub fn contains(&self, f: T) -> bool {
        self.start <= f && f <= self.stop
    }
}

/// Maximal runs of consecutive retrieved points with `Re ε < 0` and
/// `Re μ < 0`. Interior band edges sit at the midpoint between the last
/// sample inside and the first sample outside; a run touching either end of
/// the sweep extends to that end's sample frequency. Gaps break runs.
pub fn classify_dng_bands<T: Real>(params: &EffectiveParams<T>) -> Vec<FrequencyBand<T>> {
    let pts = &params.points;
    let dng: Vec<bool> = pts
        .iter()
        .map(|p| p.value.as_ref().is_some_and(|v| v.is_double_negative()))
        .collect();
    let half = lit::<T>(0.5);
    let mut bands = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !dng[i] {
            i += 1;
            continue;
        }
        let first = i;
        while i + 1 < pts.len() && dng[i + 1] {
            i += 1;
        }
        let last = i;
        let start = if first == 0 {
            pts[0].frequency
        } else {
            (pts[first - 1].frequency + pts[first].frequency) * half
        };
        let stop = if last + 1 == pts.len() {
            pts[last].frequency
        } else {
            (pts[last].frequency + pts[last + 1].frequency) * half
        };
        bands.push(FrequencyBand { start, stop });
        i += 1;
    }
    bands
}

/// Single Lorentz oscillator `x(f) = static + F·f0² / (f0² − f² − iγf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian<T> {
    pub static_value: T,
    pub strength: T,
    /// Hz.
    pub resonance: T,
    /// Hz.
    pub damping: T,
}

impl<T: Real> Lorentzian<T> {
    pub fn constant(value: T) -> Self {
        Self {
            static_value: value,
            strength: T::zero(),
            resonance: T::one(),
            damping: T::zero(),
        }
    }

    pub fn evaluate(&self, f: T) -> Complex<T> {
        let x = f / self.resonance;
        let den = Complex::new(T::one() - x * x, -(self.damping / self.resonance) * x);
        Complex::new(self.static_value, T::zero()) + Complex::new(self.strength, T::zero()) / den
    }

    fn check(&self, what: &str) -> Result<(), RetrievalError> {
        let ok = self.resonance > T::zero()
            && self.damping >= T::zero()
            && self.static_value.is_finite()
            && self.strength.is_finite()
            && self.resonance.is_finite()
            && self.damping.is_finite();
        if ok {
            Ok(())
        } else {
            Err(RetrievalError::InvalidInput(format!(
                "{what}: resonance must be positive and damping non-negative"
            )))
        }
    }
}

/// Dispersive material: Lorentzian permittivity and permeability.
///
/// JSON form: `{"permittivity": {static_value, strength, resonance,
/// damping}, "permeability": {...}}`, frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel<T> {
    pub permittivity: Lorentzian<T>,
    pub permeability: Lorentzian<T>,
}

impl<T: Real + Serialize + for<'de> Deserialize<'de>> MaterialModel<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("material model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RetrievalError> {
        let model: Self = serde_json::from_str(text).map_err(|e| RetrievalError::InvalidInput(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

impl<T: Real> MaterialModel<T> {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        self.permittivity.check("permittivity")?;
        self.permeability.check("permeability")
    }

    /// Double-negative fixture: both oscillators at 4.8 GHz with equal
    /// strength-to-static ratio and damping, so `Re ε` and `Re μ` change sign
    /// together (about 4.81–6.77 GHz) and `z = √1.5` everywhere.
    pub fn dng_fixture() -> Self {
        let f0 = lit(4.8e9);
        let gamma = lit(0.3e9);
        Self {
            permittivity: Lorentzian {
                static_value: T::one(),
                strength: T::one(),
                resonance: f0,
                damping: gamma,
            },
            permeability: Lorentzian {
                static_value: lit(1.5),
                strength: lit(1.5),
                resonance: f0,
                damping: gamma,
            },
        }
    }
}

/// `(ε(f), μ(f))`.
pub fn evaluate_material<T: Real>(model: &MaterialModel<T>, f: T) -> (Complex<T>, Complex<T>) {
    (model.permittivity.evaluate(f), model.permeability.evaluate(f))
}

/// `points` frequencies evenly spaced over `[start, stop]`.
pub fn linear_sweep<T: Real>(start: T, stop: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / lit((points - 1) as f64);
            (0..points)
                .map(|i| if i + 1 == points { stop } else { start + step * lit(i as f64) })
                .collect()
        }
    }
}

/// Forward-simulates a slab of `model` over `frequencies`, producing a
/// reciprocal symmetric S-parameter table.
pub fn simulate_slab<T: Real>(
    model: &MaterialModel<T>,
    slab: SlabSpec<T>,
    frequencies: &[T],
) -> Result<SParamTable<T>, RetrievalError> {
    model.validate()?;
    let records = frequencies
        .iter()
        .map(|&f| {
            let (eps, mu) = evaluate_material(model, f);
            let (s11, s21) = slab_forward(eps, mu, slab.thickness, f)?;
            Ok(SParamRecord::symmetric(f, s11, s21))
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    Ok(SParamTable::new(records)?)
}
