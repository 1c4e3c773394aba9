//! Far-field synthesis for the reflecting panel: steering phases, the
//! phase-gradient profile, switch-state quantization, array factor and
//! sampled patterns.
//!
//! Every cell reflects: split-ring cells with their full reflection, hybrid
//! cells scaled by `√(1 − rho)`. Element patterns are isotropic unless an
//! element exponent `q > 0` is set (`cos^q θ`).

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellKind, PanelLayout};
use crate::scalar::{circular_distance, cis, db10, lit, to_f64, wavenumber, wrap_two_pi, Real};
use crate::unitcell::{HybridCellModel, LoadBank, SwitchState, UnitCellError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldsError {
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("angular grid is empty or malformed")]
    EmptyGrid,
    #[error("invalid direction: theta = {theta} rad, phi = {phi} rad")]
    InvalidDirection { theta: f64, phi: f64 },
    #[error(transparent)]
    Cell(#[from] UnitCellError),
    #[error("load matrix JSON: {0}")]
    Json(String),
}

/// Ties in phase or angular distance closer than this go to the lower index.
pub const TIE_EPSILON: f64 = 1e-12;

/// Direction on the upper hemisphere: `theta` from the panel normal in
/// `[0, π/2]`, azimuth `phi` in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> Direction<T> {
    /// Validates `theta` and wraps `phi` into `[0, 2π)`.
    pub fn new(theta: T, phi: T) -> Result<Self, FieldsError> {
        let slack = lit::<T>(1e-12);
        if !(theta.is_finite() && phi.is_finite() && theta >= -slack && theta <= T::FRAC_PI_2() + slack) {
            return Err(FieldsError::InvalidDirection {
                theta: to_f64(theta),
                phi: to_f64(phi),
            });
        }
        Ok(Self {
            theta: theta.max(T::zero()).min(T::FRAC_PI_2()),
            phi: wrap_two_pi(phi),
        })
    }

    pub fn from_degrees(theta_deg: T, phi_deg: T) -> Result<Self, FieldsError> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn broadside() -> Self {
        Self {
            theta: T::zero(),
            phi: T::zero(),
        }
    }

    pub fn theta_deg(&self) -> T {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> T {
        self.phi.to_degrees()
    }

    /// `(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn unit_vector(&self) -> [T; 3] {
        let s = self.theta.sin();
        [s * self.phi.cos(), s * self.phi.sin(), self.theta.cos()]
    }

    /// Great-circle angle to `other`, radians.
    pub fn angle_to(&self, other: &Self) -> T {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// Array phase `k·(x sinθ cosφ + y sinθ sinφ)` of a cell at `position`.
pub fn steering_phase<T: Real>(position: [T; 2], dir: &Direction<T>, f: T) -> T {
    let u = dir.unit_vector();
    wavenumber(f) * (position[0] * u[0] + position[1] * u[1])
}

/// Reflection phase, in `[0, 2π)`, that redirects a plane wave arriving
/// from `incident` into `target`.
pub fn required_cell_phase<T: Real>(
    incident: &Direction<T>,
    target: &Direction<T>,
    position: [T; 2],
    f: T,
) -> T {
    wrap_two_pi(-(steering_phase(position, incident, f) + steering_phase(position, target, f)))
}

/// State whose reflection phase (in `phases`) is closest to `phi` on the
/// circle; ties go to the lower state.
pub fn quantize_with_phases<T: Real>(phi: T, phases: &[T; 4]) -> SwitchState {
    let eps = lit::<T>(TIE_EPSILON);
    let mut best = 0usize;
    let mut best_d = circular_distance(phi, phases[0]);
    for (i, &p) in phases.iter().enumerate().skip(1) {
        let d = circular_distance(phi, p);
        if d < best_d - eps {
            best = i;
            best_d = d;
        }
    }
    SwitchState::ALL[best]
}

pub fn quantize_phase<T: Real>(phi: T, bank: &LoadBank<T>) -> Result<SwitchState, FieldsError> {
    Ok(quantize_with_phases(phi, &bank.phases()?))
}

/// Switch state of every element, indexed like the layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadMatrix {
    pub states: Vec<SwitchState>,
}

impl LoadMatrix {
    pub fn uniform(n: usize, state: SwitchState) -> Self {
        Self { states: vec![state; n] }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.states).expect("states serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, FieldsError> {
        let states = serde_json::from_str(text).map_err(|e| FieldsError::Json(e.to_string()))?;
        Ok(Self { states })
    }
}

impl Serialize for LoadMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.states.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LoadMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self {
            states: Vec::deserialize(d)?,
        })
    }
}

/// Layout plus the cell model that drives it.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface<T> {
    pub layout: PanelLayout<T>,
    pub cell: HybridCellModel<T>,
    /// `q` in the `cos^q θ` element factor; 0 is isotropic.
    pub element_exponent: T,
}

impl<T: Real> Surface<T> {
    pub fn new(layout: PanelLayout<T>, cell: HybridCellModel<T>) -> Self {
        Self {
            layout,
            cell,
            element_exponent: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn frequency(&self) -> T {
        self.layout.design_frequency
    }

    pub fn bank(&self) -> &LoadBank<T> {
        &self.cell.load_bank
    }

    /// Reflection amplitude weight of element `i`.
    pub fn weight(&self, i: usize) -> T {
        match self.layout.elements[i].kind {
            CellKind::Reflect => T::one(),
            CellKind::SenseA | CellKind::SenseB => self.cell.reflect_amplitude(),
        }
    }

    fn element_factor(&self, observe: &Direction<T>) -> T {
        if self.element_exponent == T::zero() {
            T::one()
        } else {
            observe.theta.cos().max(T::zero()).powf(self.element_exponent)
        }
    }

    /// Per-element reflection coefficients for a load matrix.
    pub fn gammas(&self, matrix: &LoadMatrix) -> Result<Vec<Complex<T>>, FieldsError> {
        if matrix.len() != self.len() {
            return Err(FieldsError::DimensionMismatch {
                what: "load matrix",
                expected: self.len(),
                found: matrix.len(),
            });
        }
        let table = self.bank().reflections()?;
        Ok(matrix.states.iter().map(|s| table[s.index()]).collect())
    }

    /// Continuous-phase reflections `L·e^{iφ_req}` for steering `incident`
    /// into `target`, with `L` the bank's insertion loss.
    pub fn ideal_gammas(&self, incident: &Direction<T>, target: &Direction<T>, f: T) -> Vec<Complex<T>> {
        let loss = self.bank().insertion_loss;
        self.layout
            .elements
            .iter()
            .map(|e| cis(required_cell_phase(incident, target, e.position, f)) * loss)
            .collect()
    }

    /// Nearest-phase load matrix for steering `incident` into `target`.
    pub fn quantized_matrix(
        &self,
        incident: &Direction<T>,
        target: &Direction<T>,
        f: T,
    ) -> Result<LoadMatrix, FieldsError> {
        let phases = self.bank().phases()?;
        Ok(LoadMatrix {
            states: self
                .layout
                .elements
                .iter()
                .map(|e| quantize_with_phases(required_cell_phase(incident, target, e.position, f), &phases))
                .collect(),
        })
    }
}

/// `Σ w_n γ_n e^{i[ψ_n(incident) + ψ_n(observe)]}` over all elements.
pub fn array_factor<T: Real>(
    surface: &Surface<T>,
    gammas: &[Complex<T>],
    incident: &Direction<T>,
    observe: &Direction<T>,
    f: T,
) -> Result<Complex<T>, FieldsError> {
    if gammas.len() != surface.len() {
        return Err(FieldsError::DimensionMismatch {
            what: "gammas",
            expected: surface.len(),
            found: gammas.len(),
        });
    }
    Ok(array_factor_unchecked(surface, gammas, incident, observe, f))
}

fn array_factor_unchecked<T: Real>(
    surface: &Surface<T>,
    gammas: &[Complex<T>],
    incident: &Direction<T>,
    observe: &Direction<T>,
    f: T,
) -> Complex<T> {
    let k = wavenumber(f);
    let a = incident.unit_vector();
    let b = observe.unit_vector();
    let (u, v) = (a[0] + b[0], a[1] + b[1]);
    let mut sum = Complex::new(T::zero(), T::zero());
    for (i, (e, g)) in surface.layout.elements.iter().zip(gammas).enumerate() {
        let phase = k * (e.position[0] * u + e.position[1] * v);
        sum = sum + *g * cis(phase) * surface.weight(i);
    }
    sum * surface.element_factor(observe)
}

/// Angular sampling of the upper hemisphere. `theta = 0` is sampled once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub theta_step: T,
    pub phi_step: T,
    pub theta_max: T,
}

impl<T: Real> GridSpec<T> {
    pub fn degrees(theta_step: T, phi_step: T) -> Self {
        Self {
            theta_step: theta_step.to_radians(),
            phi_step: phi_step.to_radians(),
            theta_max: T::FRAC_PI_2(),
        }
    }

    fn counts(&self) -> Result<(usize, usize), FieldsError> {
        let ok = self.theta_step.is_finite()
            && self.phi_step.is_finite()
            && self.theta_step > T::zero()
            && self.phi_step > T::zero()
            && self.theta_max >= T::zero()
            && self.theta_max <= T::FRAC_PI_2() + lit(1e-12);
        if !ok {
            return Err(FieldsError::EmptyGrid);
        }
        let rows = (self.theta_max / self.theta_step + lit(1e-9)).floor().to_usize().ok_or(FieldsError::EmptyGrid)? + 1;
        let cols = (T::TAU() / self.phi_step).round().to_usize().ok_or(FieldsError::EmptyGrid)?;
        if cols == 0 {
            return Err(FieldsError::EmptyGrid);
        }
        Ok((rows, cols))
    }

    /// Sample directions with their solid angles (summing to the solid angle
    /// of the cap up to `theta_max`).
    pub fn samples(&self) -> Result<Vec<(Direction<T>, T)>, FieldsError> {
        let (rows, cols) = self.counts()?;
        let half = self.theta_step * lit(0.5);
        let mut out = Vec::with_capacity(1 + (rows - 1) * cols);
        for r in 0..rows {
            let theta = (self.theta_step * lit(r as f64)).min(self.theta_max);
            let lo = (theta - half).max(T::zero());
            let hi = (theta + half).min(self.theta_max);
            let band = T::TAU() * (lo.cos() - hi.cos());
            if r == 0 {
                out.push((Direction { theta, phi: T::zero() }, band));
                continue;
            }
            let each = band / lit(cols as f64);
            for c in 0..cols {
                let phi = self.phi_step * lit(c as f64);
                out.push((Direction { theta, phi }, each));
            }
        }
        Ok(out)
    }
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self::degrees(T::one(), T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample<T> {
    pub direction: Direction<T>,
    pub value: Complex<T>,
    /// Solid angle represented by this sample, sr.
    pub solid_angle: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern<T> {
    pub frequency: T,
    pub samples: Vec<PatternSample<T>>,
}

impl<T: Real> FarFieldPattern<T> {
    /// Sample with the largest `|AF|²`; the first one wins ties.
    pub fn peak(&self) -> &PatternSample<T> {
        let mut best = &self.samples[0];
        for s in &self.samples[1..] {
            if s.value.norm_sqr() > best.value.norm_sqr() {
                best = s;
            }
        }
        best
    }

    /// Sample closest to `at` (lowest index on ties).
    pub fn nearest(&self, at: &Direction<T>) -> &PatternSample<T> {
        let eps = lit::<T>(TIE_EPSILON);
        let mut best = &self.samples[0];
        let mut best_d = best.direction.angle_to(at);
        for s in &self.samples[1..] {
            let d = s.direction.angle_to(at);
            if d < best_d - eps {
                best = s;
                best_d = d;
            }
        }
        best
    }

    /// Solid-angle weighted mean of `|AF|²` over the grid.
    pub fn mean_power(&self) -> T {
        let (num, den) = self.samples.iter().fold((T::zero(), T::zero()), |(n, d), s| {
            (n + s.value.norm_sqr() * s.solid_angle, d + s.solid_angle)
        });
        num / den
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta_deg,phi_deg,af_re,af_im,af_db\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e}",
                to_f64(s.direction.theta_deg()),
                to_f64(s.direction.phi_deg()),
                to_f64(s.value.re),
                to_f64(s.value.im),
                to_f64(db10(s.value.norm_sqr()))
            );
        }
        out
    }
}

/// Evaluates the array factor for arbitrary per-element reflections over
/// the grid.
pub fn pattern_from_gammas<T: Real>(
    surface: &Surface<T>,
    gammas: &[Complex<T>],
    incident: &Direction<T>,
    grid: &GridSpec<T>,
    f: T,
) -> Result<FarFieldPattern<T>, FieldsError> {
    if gammas.len() != surface.len() {
        return Err(FieldsError::DimensionMismatch {
            what: "gammas",
            expected: surface.len(),
            found: gammas.len(),
        });
    }
    let samples = grid
        .samples()?
        .into_par_iter()
        .map(|(direction, solid_angle)| PatternSample {
            direction,
            value: array_factor_unchecked(surface, gammas, incident, &direction, f),
            solid_angle,
        })
        .collect();
    Ok(FarFieldPattern { frequency: f, samples })
}

/// Pattern of the panel configured with `matrix`.
pub fn pattern<T: Real>(
    surface: &Surface<T>,
    matrix: &LoadMatrix,
    incident: &Direction<T>,
    grid: &GridSpec<T>,
    f: T,
) -> Result<FarFieldPattern<T>, FieldsError> {
    let gammas = surface.gammas(matrix)?;
    pattern_from_gammas(surface, &gammas, incident, grid, f)
}

/// `10·log10(|AF(at)|² / mean |AF|²)` using the grid sample nearest `at`.
pub fn directivity_db<T: Real>(pattern: &FarFieldPattern<T>, at: &Direction<T>) -> T {
    db10(pattern.nearest(at).value.norm_sqr() / pattern.mean_power())
}
