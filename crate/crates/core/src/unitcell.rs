//! Circuit-level cell models: load reflection, the four-state switch bank,
//! the hybrid cell's sense/reflect split and the pin-loaded patch.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{is_finite_complex, lit, to_f64, wrap_two_pi, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitCellError {
    #[error("load equals -z0; reflection coefficient is undefined")]
    DegenerateLoad,
    #[error("no resonance between {lo} Hz and {hi} Hz")]
    NoResonanceInBracket { lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("load bank JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SwitchState {
    S0,
    S1,
    S2,
    S3,
}

impl SwitchState {
    pub const ALL: [SwitchState; 4] = [SwitchState::S0, SwitchState::S1, SwitchState::S2, SwitchState::S3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index())
    }
}

impl FromStr for SwitchState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S0" => Ok(SwitchState::S0),
            "S1" => Ok(SwitchState::S1),
            "S2" => Ok(SwitchState::S2),
            "S3" => Ok(SwitchState::S3),
            other => Err(format!("unknown switch state `{other}`")),
        }
    }
}

/// A switch-port termination. The open circuit is kept symbolic so that its
/// reflection is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load<T> {
    Open,
    /// Ohms.
    Impedance(Complex<T>),
}

impl<T: Real> Load<T> {
    pub fn short() -> Self {
        Load::Impedance(Complex::new(T::zero(), T::zero()))
    }

    pub fn is_passive(&self) -> bool {
        match self {
            Load::Open => true,
            Load::Impedance(z) => z.re >= T::zero(),
        }
    }
}

/// `(Z − z0)/(Z + z0)`.
pub fn load_reflection<T: Real>(load: Load<T>, z0: T) -> Result<Complex<T>, UnitCellError> {
    match load {
        Load::Open => Ok(Complex::new(T::one(), T::zero())),
        Load::Impedance(z) => {
            let den = z + z0;
            if den.norm() == T::zero() {
                return Err(UnitCellError::DegenerateLoad);
            }
            Ok((z - z0) / den)
        }
    }
}

/// The four SP4T terminations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadBank<T> {
    pub loads: [Load<T>; 4],
    /// Ohms.
    pub reference_impedance: T,
    /// Amplitude factor in (0, 1].
    pub insertion_loss: T,
}

impl<T: Real> LoadBank<T> {
    /// `{open, +j·z0, short, −j·z0}`: reflection phases 0°, 90°, 180°, 270°.
    pub fn two_bit(z0: T) -> Self {
        let zero = T::zero();
        Self {
            loads: [
                Load::Open,
                Load::Impedance(Complex::new(zero, z0)),
                Load::short(),
                Load::Impedance(Complex::new(zero, -z0)),
            ],
            reference_impedance: z0,
            insertion_loss: T::one(),
        }
    }

    pub fn with_insertion_loss(mut self, loss: T) -> Self {
        self.insertion_loss = loss;
        self
    }

    pub fn validate(&self) -> Result<(), UnitCellError> {
        if !(self.reference_impedance.is_finite() && self.reference_impedance > T::zero()) {
            return Err(UnitCellError::InvalidModel("reference impedance must be positive".into()));
        }
        if !(self.insertion_loss > T::zero() && self.insertion_loss <= T::one()) {
            return Err(UnitCellError::InvalidModel(format!(
                "insertion loss {} outside (0, 1]",
                self.insertion_loss
            )));
        }
        for l in &self.loads {
            if let Load::Impedance(z) = l {
                if !is_finite_complex(*z) {
                    return Err(UnitCellError::InvalidModel("non-finite load".into()));
                }
            }
        }
        Ok(())
    }

    /// Reflection coefficient of every state, indexed by state.
    pub fn reflections(&self) -> Result<[Complex<T>; 4], UnitCellError> {
        let mut out = [Complex::new(T::zero(), T::zero()); 4];
        for s in SwitchState::ALL {
            out[s.index()] = state_reflection(s, self)?;
        }
        Ok(out)
    }

    /// Reflection phase of every state in `[0, 2π)`. Fails if a state is
    /// matched (zero reflection has no phase).
    pub fn phases(&self) -> Result<[T; 4], UnitCellError> {
        let g = self.reflections()?;
        let mut out = [T::zero(); 4];
        for (o, g) in out.iter_mut().zip(g) {
            if g.norm() == T::zero() {
                return Err(UnitCellError::InvalidModel("matched load has no reflection phase".into()));
            }
            *o = wrap_two_pi(g.arg());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let load = |l: &Load<T>| match l {
            Load::Open => LoadFile::Named("open".into()),
            Load::Impedance(z) => LoadFile::Value([to_f64(z.re), to_f64(z.im)]),
        };
        let file = BankFile {
            z0_ohm: to_f64(self.reference_impedance),
            insertion_loss: to_f64(self.insertion_loss),
            loads: BankLoads {
                s0: load(&self.loads[0]),
                s1: load(&self.loads[1]),
                s2: load(&self.loads[2]),
                s3: load(&self.loads[3]),
            },
        };
        serde_json::to_string_pretty(&file).expect("bank serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, UnitCellError> {
        let file: BankFile = serde_json::from_str(text).map_err(|e| UnitCellError::Json(e.to_string()))?;
        let load = |l: LoadFile| match l {
            LoadFile::Named(s) if s.eq_ignore_ascii_case("open") => Ok(Load::Open),
            LoadFile::Named(s) => Err(UnitCellError::Json(format!("unknown load `{s}`"))),
            LoadFile::Value([re, im]) => Ok(Load::Impedance(Complex::new(lit(re), lit(im)))),
        };
        let bank = Self {
            loads: [
                load(file.loads.s0)?,
                load(file.loads.s1)?,
                load(file.loads.s2)?,
                load(file.loads.s3)?,
            ],
            reference_impedance: lit(file.z0_ohm),
            insertion_loss: lit(file.insertion_loss),
        };
        bank.validate()?;
        Ok(bank)
    }
}

impl<T: Real> Default for LoadBank<T> {
    fn default() -> Self {
        Self::two_bit(lit(50.0))
    }
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    z0_ohm: f64,
    insertion_loss: f64,
    loads: BankLoads,
}

#[derive(Serialize, Deserialize)]
struct BankLoads {
    #[serde(rename = "S0")]
    s0: LoadFile,
    #[serde(rename = "S1")]
    s1: LoadFile,
    #[serde(rename = "S2")]
    s2: LoadFile,
    #[serde(rename = "S3")]
    s3: LoadFile,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LoadFile {
    Named(String),
    Value([f64; 2]),
}

/// `insertion_loss · Γ(load[state])`.
pub fn state_reflection<T: Real>(state: SwitchState, bank: &LoadBank<T>) -> Result<Complex<T>, UnitCellError> {
    Ok(load_reflection(bank.loads[state.index()], bank.reference_impedance)? * bank.insertion_loss)
}

/// Hybrid ring/disc cell: a fraction `rho` of incident power goes to the
/// sensing disc, the rest is reflected through the switch bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridCellModel<T> {
    pub power_split_rho: T,
    pub load_bank: LoadBank<T>,
}

impl<T: Real> HybridCellModel<T> {
    pub fn new(power_split_rho: T, load_bank: LoadBank<T>) -> Result<Self, UnitCellError> {
        let m = Self { power_split_rho, load_bank };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), UnitCellError> {
        if !(self.power_split_rho >= T::zero() && self.power_split_rho <= T::one()) {
            return Err(UnitCellError::InvalidModel(format!(
                "power split {} outside [0, 1]",
                self.power_split_rho
            )));
        }
        self.load_bank.validate()
    }

    /// Amplitude of the sensing branch, `√rho`.
    pub fn sense_amplitude(&self) -> T {
        self.power_split_rho.sqrt()
    }

    /// Amplitude of the reflecting branch, `√(1 − rho)`.
    pub fn reflect_amplitude(&self) -> T {
        (T::one() - self.power_split_rho).sqrt()
    }
}

impl<T: Real> Default for HybridCellModel<T> {
    fn default() -> Self {
        Self {
            power_split_rho: lit(0.5),
            load_bank: LoadBank::default(),
        }
    }
}

/// `(reflect, sense)` coefficients of a hybrid cell in `state`.
pub fn hybrid_response<T: Real>(
    model: &HybridCellModel<T>,
    state: SwitchState,
) -> Result<(Complex<T>, Complex<T>), UnitCellError> {
    let reflect = state_reflection(state, &model.load_bank)? * model.reflect_amplitude();
    let sense = Complex::new(model.sense_amplitude(), T::zero());
    Ok((reflect, sense))
}

/// Shorting pin: a shunt inductance proportional to its distance from the
/// feed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortingPin<T> {
    /// H/m.
    pub inductance_per_meter: T,
    /// Metres.
    pub feed_distance: T,
}

impl<T: Real> ShortingPin<T> {
    pub fn inductance(&self) -> T {
        self.inductance_per_meter * self.feed_distance
    }
}

/// Disc patch as a parallel GLC resonator, optionally loaded by a shorting
/// pin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortedPatchModel<T> {
    /// F.
    pub capacitance: T,
    /// H.
    pub inductance: T,
    /// S.
    pub conductance: T,
    /// Metres.
    pub disc_radius: T,
    pub pin: Option<ShortingPin<T>>,
}

impl<T: Real> ShortedPatchModel<T> {
    /// 1 pF with the inductance set for a 5.5 GHz unloaded resonance, 1/50 S,
    /// 1.9 mm radius, pin of 1 µH/m at 1 mm. Fixture values.
    pub fn fixture() -> Self {
        let c = lit::<T>(1e-12);
        let w = T::TAU() * lit::<T>(5.5e9);
        Self {
            capacitance: c,
            inductance: T::one() / (w * w * c),
            conductance: lit(0.02),
            disc_radius: lit(1.9e-3),
            pin: Some(ShortingPin {
                inductance_per_meter: lit(1e-6),
                feed_distance: lit(1e-3),
            }),
        }
    }

    pub fn without_pin(mut self) -> Self {
        self.pin = None;
        self
    }

    pub fn with_feed_distance(mut self, d: T) -> Self {
        if let Some(p) = self.pin.as_mut() {
            p.feed_distance = d;
        }
        self
    }

    pub fn validate(&self) -> Result<(), UnitCellError> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !(pos(self.capacitance) && pos(self.inductance) && pos(self.conductance) && pos(self.disc_radius)) {
            return Err(UnitCellError::InvalidModel("patch circuit values must be positive".into()));
        }
        if let Some(p) = self.pin {
            if !(pos(p.inductance_per_meter) && pos(p.feed_distance)) {
                return Err(UnitCellError::InvalidModel("pin values must be positive".into()));
            }
            if p.feed_distance >= self.disc_radius {
                return Err(UnitCellError::InvalidModel("pin lies outside the disc".into()));
            }
        }
        Ok(())
    }

    /// Input admittance at `f`.
    pub fn admittance(&self, f: T) -> Complex<T> {
        let w = T::TAU() * f;
        let mut b = w * self.capacitance - T::one() / (w * self.inductance);
        if let Some(p) = self.pin {
            b -= T::one() / (w * p.inductance());
        }
        Complex::new(self.conductance, b)
    }

    /// Closed-form zero-susceptance frequency, `√((1/L + 1/L_pin)/C)/2π`.
    pub fn analytic_resonance(&self) -> T {
        let mut inv_l = T::one() / self.inductance;
        if let Some(p) = self.pin {
            inv_l += T::one() / p.inductance();
        }
        (inv_l / self.capacitance).sqrt() / T::TAU()
    }
}

/// `z_in = 1/Y(f)`, ohms.
pub fn shorted_patch_input<T: Real>(model: &ShortedPatchModel<T>, f: T) -> Result<Complex<T>, UnitCellError> {
    model.validate()?;
    if !(f > T::zero()) {
        return Err(UnitCellError::InvalidModel("frequency must be positive".into()));
    }
    Ok(model.admittance(f).inv())
}

/// Frequency of zero input susceptance, by bisection on `[lo, hi]`.
pub fn resonance<T: Real>(model: &ShortedPatchModel<T>, lo: T, hi: T) -> Result<T, UnitCellError> {
    model.validate()?;
    let none = || UnitCellError::NoResonanceInBracket { lo: to_f64(lo), hi: to_f64(hi) };
    if !(lo > T::zero() && hi > lo) {
        return Err(none());
    }
    let b = |f: T| model.admittance(f).im;
    let (mut a, mut c) = (lo, hi);
    let (mut fa, fc) = (b(a), b(c));
    if fa == T::zero() {
        return Ok(a);
    }
    if fc == T::zero() {
        return Ok(c);
    }
    if fa.signum() == fc.signum() {
        return Err(none());
    }
    for _ in 0..200 {
        let mid = (a + c) * lit(0.5);
        if mid <= a || mid >= c {
            break;
        }
        let fm = b(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            c = mid;
        }
    }
    Ok((a + c) * lit(0.5))
}
