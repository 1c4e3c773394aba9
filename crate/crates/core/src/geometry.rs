//! Wavelength arithmetic, the hybrid-cell fit rule and the interleaved panel
//! layout (reflective λ/8 lattice with two λ/2 sensing sub-arrays offset by
//! λ/4 and cross-polarized).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, speed_of_light, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid unit cell: {0}")]
    InvalidSpec(String),
    #[error("panel of {nx}x{ny} cells is too small; at least 8x8 is required")]
    PanelTooSmall { nx: usize, ny: usize },
    #[error("invalid frequency {0} Hz")]
    InvalidFrequency(f64),
    #[error("layout JSON: {0}")]
    Json(String),
}

/// Free-space wavelength `c/f` in metres.
pub fn free_space_wavelength<T: Real>(f: T) -> T {
    speed_of_light::<T>() / f
}

/// Quarter guided wavelength `λ/(4√εr)` in metres; `eps_r ≥ 1`.
pub fn guided_quarter_wave<T: Real>(f: T, eps_r: T) -> T {
    free_space_wavelength(f) / (lit::<T>(4.0) * eps_r.sqrt())
}

/// Reflective lattice pitch `λ/8`.
pub fn eighth_wave<T: Real>(f: T) -> T {
    free_space_wavelength(f) / lit(8.0)
}

/// Dimensions of the hybrid ring/disc cell. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCellSpec<T> {
    pub cell_pitch: T,
    pub outer_ring_diameter: T,
    pub inner_disc_diameter: T,
    pub substrate_thickness: T,
    pub eps_ring: T,
    pub eps_disc: T,
    /// Hz.
    pub design_frequency: T,
}

impl<T: Real> UnitCellSpec<T> {
    /// 7 mm pitch, 6.4 mm ring, 3.8 mm disc, 0.8 mm substrate, εr 3.5 (ring)
    /// and 10.2 (disc), 5.5 GHz.
    pub fn reference_design() -> Self {
        Self {
            cell_pitch: lit(7.0e-3),
            outer_ring_diameter: lit(6.4e-3),
            inner_disc_diameter: lit(3.8e-3),
            substrate_thickness: lit(0.8e-3),
            eps_ring: lit(3.5),
            eps_disc: lit(10.2),
            design_frequency: lit(5.5e9),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidSpec(m));
        let lengths = [
            self.cell_pitch,
            self.outer_ring_diameter,
            self.inner_disc_diameter,
            self.substrate_thickness,
        ];
        if !lengths.iter().all(|l| l.is_finite() && *l > T::zero()) {
            return bad("all lengths must be positive".into());
        }
        if !(self.design_frequency.is_finite() && self.design_frequency > T::zero()) {
            return bad("design frequency must be positive".into());
        }
        if !(self.eps_ring >= T::one() && self.eps_disc >= T::one()) {
            return bad("relative permittivities must be at least 1".into());
        }
        if !(self.inner_disc_diameter < self.outer_ring_diameter) {
            return bad(format!(
                "disc diameter {} m does not fit inside ring diameter {} m",
                self.inner_disc_diameter, self.outer_ring_diameter
            ));
        }
        if !(self.outer_ring_diameter < self.cell_pitch) {
            return bad(format!(
                "ring diameter {} m does not fit inside pitch {} m",
                self.outer_ring_diameter, self.cell_pitch
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    /// λg/4 of the disc substrate, metres.
    pub quarter_guided: T,
    /// λ/8, metres.
    pub eighth_wave: T,
    pub checks: Vec<FitCheck>,
    pub passed: bool,
}

impl<T: Real> fmt::Display for FitReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mm = |v: T| to_f64(v) * 1e3;
        let rel = if self.quarter_guided < self.eighth_wave { "<" } else { ">=" };
        writeln!(
            f,
            "{}: lambda_g/4 = {:.4} mm {} lambda/8 = {:.4} mm",
            if self.passed { "PASS" } else { "FAIL" },
            mm(self.quarter_guided),
            rel,
            mm(self.eighth_wave)
        )?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Checks whether the disc antenna fits the λ/8 lattice.
///
/// `slack` lets the disc exceed λg/4 by a fraction; the shorting pin only
/// ever shrinks the disc, so the default is 0.
pub fn check_fit<T: Real>(spec: &UnitCellSpec<T>, slack: T) -> Result<FitReport<T>, GeometryError> {
    spec.validate()?;
    let f = spec.design_frequency;
    let quarter = guided_quarter_wave(f, spec.eps_disc);
    let eighth = eighth_wave(f);
    let mm = |v: T| to_f64(v) * 1e3;

    let lattice = quarter < eighth;
    let limit = quarter * (T::one() + slack);
    let disc = spec.inner_disc_diameter <= limit;
    let ring_clear = spec.cell_pitch - spec.outer_ring_diameter;
    let disc_clear = spec.outer_ring_diameter - spec.inner_disc_diameter;
    let nesting = ring_clear > T::zero() && disc_clear > T::zero();

    let checks = vec![
        FitCheck {
            name: "disc fits lattice (eps_disc > 4)",
            passed: lattice,
            detail: format!(
                "lambda_g/4 = {:.4} mm vs lambda/8 = {:.4} mm (eps_disc = {})",
                mm(quarter),
                mm(eighth),
                spec.eps_disc
            ),
        },
        FitCheck {
            name: "disc within lambda_g/4",
            passed: disc,
            detail: format!(
                "disc {:.4} mm <= {:.4} mm (slack {})",
                mm(spec.inner_disc_diameter),
                mm(limit),
                slack
            ),
        },
        FitCheck {
            name: "nesting clearance",
            passed: nesting,
            detail: format!(
                "pitch - ring = {:.4} mm, ring - disc = {:.4} mm",
                mm(ring_clear),
                mm(disc_clear)
            ),
        },
    ];
    Ok(FitReport {
        quarter_guided: quarter,
        eighth_wave: eighth,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    /// Hybrid cell on feeder group 1 (TX side).
    SenseA,
    /// Hybrid cell on feeder group 2 (RX side).
    SenseB,
    /// Reflect-only split-ring cell.
    Reflect,
}

impl CellKind {
    pub fn is_sensing(self) -> bool {
        !matches!(self, CellKind::Reflect)
    }

    pub fn feeder_group(self) -> Option<u8> {
        match self {
            CellKind::SenseA => Some(1),
            CellKind::SenseB => Some(2),
            CellKind::Reflect => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterleaveAxis {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelElement<T> {
    /// Metres, in the panel plane.
    pub position: [T; 2],
    pub kind: CellKind,
    pub polarization: Polarization,
    pub feeder_group: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelLayout<T> {
    pub elements: Vec<PanelElement<T>>,
    /// Hz.
    pub design_frequency: T,
    /// Metres.
    pub panel_extent: [T; 2],
}

impl<T: Real> PanelLayout<T> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Indices of the elements on feeder `group` (1 or 2), in layout order.
    pub fn group_indices(&self, group: u8) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.feeder_group == Some(group))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    /// Reflect-only rectangular lattice of `nx × ny` cells at `pitch`.
    pub fn reflective(nx: usize, ny: usize, f: T, pitch: T) -> Self {
        let elements = lattice(nx, ny, pitch)
            .map(|(_, _, position)| PanelElement {
                position,
                kind: CellKind::Reflect,
                polarization: Polarization::X,
                feeder_group: None,
            })
            .collect();
        Self {
            elements,
            design_frequency: f,
            panel_extent: [pitch * lit(nx as f64), pitch * lit(ny as f64)],
        }
    }

    /// Straight line of `n` reflective cells along x.
    pub fn line(n: usize, f: T, pitch: T) -> Self {
        Self::reflective(n, 1, f, pitch)
    }

    pub fn to_json(&self) -> String {
        let file = LayoutFile {
            design_frequency_hz: to_f64(self.design_frequency),
            panel_extent_m: [to_f64(self.panel_extent[0]), to_f64(self.panel_extent[1])],
            elements: self
                .elements
                .iter()
                .map(|e| ElementFile {
                    x_m: to_f64(e.position[0]),
                    y_m: to_f64(e.position[1]),
                    kind: e.kind,
                    pol: e.polarization,
                    feeder: e.feeder_group,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("layout serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let file: LayoutFile =
            serde_json::from_str(text).map_err(|e| GeometryError::Json(e.to_string()))?;
        if !(file.design_frequency_hz.is_finite() && file.design_frequency_hz > 0.0) {
            return Err(GeometryError::InvalidFrequency(file.design_frequency_hz));
        }
        Ok(Self {
            design_frequency: lit(file.design_frequency_hz),
            panel_extent: [lit(file.panel_extent_m[0]), lit(file.panel_extent_m[1])],
            elements: file
                .elements
                .into_iter()
                .map(|e| PanelElement {
                    position: [lit(e.x_m), lit(e.y_m)],
                    kind: e.kind,
                    polarization: e.pol,
                    feeder_group: e.feeder,
                })
                .collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    design_frequency_hz: f64,
    panel_extent_m: [f64; 2],
    elements: Vec<ElementFile>,
}

#[derive(Serialize, Deserialize)]
struct ElementFile {
    x_m: f64,
    y_m: f64,
    kind: CellKind,
    pol: Polarization,
    feeder: Option<u8>,
}

/// Grid sites `(i, j, [i·pitch, j·pitch])`, row by row. Element 0 sits at the
/// origin, which is also the phase reference for steering.
fn lattice<T: Real>(nx: usize, ny: usize, pitch: T) -> impl Iterator<Item = (usize, usize, [T; 2])> {
    (0..ny).flat_map(move |j| {
        (0..nx).map(move |i| (i, j, [pitch * lit(i as f64), pitch * lit(j as f64)]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutOptions<T> {
    pub axis: InterleaveAxis,
    /// Lattice pitch; `None` means exactly λ/8.
    pub pitch: Option<T>,
}

impl<T> Default for LayoutOptions<T> {
    fn default() -> Self {
        Self {
            axis: InterleaveAxis::X,
            pitch: None,
        }
    }
}

/// Interleaved panel with λ/8 lattice and the SenseB array offset along x.
pub fn generate_layout<T: Real>(nx: usize, ny: usize, f: T) -> Result<PanelLayout<T>, GeometryError> {
    generate_layout_with(nx, ny, f, &LayoutOptions::default())
}

/// Sensing cells replace lattice sites: SenseA every 4th site in both axes,
/// SenseB the same sub-grid shifted two sites along the interleave axis.
pub fn generate_layout_with<T: Real>(
    nx: usize,
    ny: usize,
    f: T,
    opts: &LayoutOptions<T>,
) -> Result<PanelLayout<T>, GeometryError> {
    if !(f.is_finite() && f > T::zero()) {
        return Err(GeometryError::InvalidFrequency(to_f64(f)));
    }
    if nx < 8 || ny < 8 {
        return Err(GeometryError::PanelTooSmall { nx, ny });
    }
    let pitch = opts.pitch.unwrap_or_else(|| eighth_wave(f));
    let mut layout = PanelLayout::reflective(nx, ny, f, pitch);
    for (e, (i, j, _)) in layout.elements.iter_mut().zip(lattice::<T>(nx, ny, pitch)) {
        let (along, across) = match opts.axis {
            InterleaveAxis::X => (i, j),
            InterleaveAxis::Y => (j, i),
        };
        let kind = match (along % 4, across % 4) {
            (0, 0) => CellKind::SenseA,
            (2, 0) => CellKind::SenseB,
            _ => continue,
        };
        e.kind = kind;
        e.feeder_group = kind.feeder_group();
        e.polarization = if kind == CellKind::SenseA {
            Polarization::X
        } else {
            Polarization::Y
        };
    }
    Ok(layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutRule {
    FeederGroup,
    Polarization,
    MissingGroup,
    LatticePitch,
    GroupSpacing,
    InterleaveOffset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: LayoutRule,
    pub elements: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Fractional spacing tolerance used.
    pub tolerance: f64,
    /// Largest fractional deviation of any measured spacing from nominal.
    pub max_deviation: f64,
    pub violations: Vec<Violation>,
    pub note: &'static str,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default spacing tolerance; the 7 mm reference pitch is 2.7% off λ/8.
pub const DEFAULT_SPACING_TOLERANCE: f64 = 0.05;

/// Allowance for coordinate roundoff on top of the stated tolerance.
const ROUNDOFF: f64 = 1e-9;

struct Checker {
    tolerance: f64,
    max_deviation: f64,
    violations: Vec<Violation>,
}

impl Checker {
    fn spacing(&mut self, rule: LayoutRule, elements: Vec<usize>, measured: f64, nominal: f64, what: &str) {
        let dev = (measured - nominal).abs() / nominal;
        self.max_deviation = self.max_deviation.max(dev);
        if dev > self.tolerance + ROUNDOFF {
            self.violations.push(Violation {
                rule,
                elements,
                detail: format!(
                    "{what}: {:.4} mm vs nominal {:.4} mm ({:.2}% off)",
                    measured * 1e3,
                    nominal * 1e3,
                    dev * 100.0
                ),
            });
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn nearest(from: usize, candidates: &[usize], pos: &[[f64; 2]]) -> Option<(usize, f64)> {
    candidates
        .iter()
        .filter(|&&c| c != from)
        .map(|&c| (c, distance(pos[from], pos[c])))
        .fold(None, |best, (c, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((c, d)),
        })
}

/// Checks every layout rule with spacings allowed to deviate by the
/// fractional `tolerance`.
pub fn validate_layout<T: Real>(layout: &PanelLayout<T>, tolerance: f64) -> ValidationReport {
    let f = to_f64(layout.design_frequency);
    let lambda = free_space_wavelength(f);
    let pos: Vec<[f64; 2]> = layout
        .elements
        .iter()
        .map(|e| [to_f64(e.position[0]), to_f64(e.position[1])])
        .collect();
    let mut ck = Checker {
        tolerance,
        max_deviation: 0.0,
        violations: Vec::new(),
    };

    for (i, e) in layout.elements.iter().enumerate() {
        if e.feeder_group != e.kind.feeder_group() {
            ck.violations.push(Violation {
                rule: LayoutRule::FeederGroup,
                elements: vec![i],
                detail: format!("{:?} element on feeder {:?}", e.kind, e.feeder_group),
            });
        }
    }

    let of_kind = |k: CellKind| -> Vec<usize> {
        (0..layout.len()).filter(|&i| layout.elements[i].kind == k).collect()
    };
    let group_a = of_kind(CellKind::SenseA);
    let group_b = of_kind(CellKind::SenseB);
    let all: Vec<usize> = (0..layout.len()).collect();

    for (name, group) in [("SenseA", &group_a), ("SenseB", &group_b)] {
        if group.is_empty() {
            ck.violations.push(Violation {
                rule: LayoutRule::MissingGroup,
                elements: vec![],
                detail: format!("no {name} elements"),
            });
        }
    }

    let pol_of = |g: &[usize]| g.first().map(|&i| layout.elements[i].polarization);
    for group in [&group_a, &group_b] {
        if let Some(p) = pol_of(group) {
            let odd: Vec<usize> = group
                .iter()
                .copied()
                .filter(|&i| layout.elements[i].polarization != p)
                .collect();
            if !odd.is_empty() {
                ck.violations.push(Violation {
                    rule: LayoutRule::Polarization,
                    elements: odd,
                    detail: "mixed polarization within a sensing group".into(),
                });
            }
        }
    }
    if let (Some(pa), Some(pb)) = (pol_of(&group_a), pol_of(&group_b)) {
        if pa == pb {
            ck.violations.push(Violation {
                rule: LayoutRule::Polarization,
                elements: vec![group_a[0], group_b[0]],
                detail: format!("SenseA and SenseB are both {pa:?}-polarized"),
            });
        }
    }

    let eighth = lambda / 8.0;
    if layout.len() > 1 {
        for i in 0..layout.len() {
            if let Some((j, d)) = nearest(i, &all, &pos) {
                ck.spacing(LayoutRule::LatticePitch, vec![i, j], d, eighth, "lattice pitch");
            }
        }
    }

    let half = lambda / 2.0;
    for group in [&group_a, &group_b] {
        if group.len() < 2 {
            continue;
        }
        for &i in group.iter() {
            if let Some((j, d)) = nearest(i, group, &pos) {
                ck.spacing(LayoutRule::GroupSpacing, vec![i, j], d, half, "sensing spacing");
            }
        }
    }

    // The interleave axis is whichever axis the nearest SenseA lies along.
    let quarter = lambda / 4.0;
    for &b in &group_b {
        if let Some((a, _)) = nearest(b, &group_a, &pos) {
            let dx = (pos[b][0] - pos[a][0]).abs();
            let dy = (pos[b][1] - pos[a][1]).abs();
            let (along, across) = if dx >= dy { (dx, dy) } else { (dy, dx) };
            ck.spacing(LayoutRule::InterleaveOffset, vec![b, a], along, quarter, "interleave offset");
            let dev = across / quarter;
            ck.max_deviation = ck.max_deviation.max(dev);
            if dev > tolerance + ROUNDOFF {
                ck.violations.push(Violation {
                    rule: LayoutRule::InterleaveOffset,
                    elements: vec![b, a],
                    detail: format!("offset has {:.4} mm across the interleave axis", across * 1e3),
                });
            }
        }
    }

    ValidationReport {
        tolerance,
        max_deviation: ck.max_deviation,
        violations: ck.violations,
        note: "sensing spacing 'almost lambda/2' is read as lambda/2 within the spacing tolerance",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 5.5e9;

    #[test]
    fn wavelengths() {
        assert!((free_space_wavelength(F) - 54.507_719_636_363_64e-3).abs() < 1e-15);
        assert_eq!(free_space_wavelength(299_792_458.0), 1.0);
        assert!((eighth_wave(F) - 6.813_464_954_545_455e-3).abs() < 1e-15);
    }

    #[test]
    fn quarter_guided() {
        assert!((guided_quarter_wave(F, 1.0) - 13.626_929_909_090_91e-3).abs() < 1e-15);
        assert!((guided_quarter_wave(F, 10.2) - 4.266_757_260_993_738e-3).abs() < 1e-15);
        assert_eq!(guided_quarter_wave(F, 4.0), eighth_wave(F));
    }

    #[test]
    fn reference_design_fits() {
        let r = check_fit(&UnitCellSpec::<f64>::reference_design(), 0.0).unwrap();
        assert!(r.passed, "{r}");
        assert!(r.to_string().starts_with("PASS: lambda_g/4 = 4.2668 mm < lambda/8 = 6.8135 mm"));
    }

    #[test]
    fn eps_four_fails_strict_rule() {
        let spec = UnitCellSpec { eps_disc: 4.0, ..UnitCellSpec::<f64>::reference_design() };
        let r = check_fit(&spec, 0.0).unwrap();
        assert!(!r.passed);
        assert!(!r.checks[0].passed);
        assert!(r.checks[1].passed && r.checks[2].passed);
    }

    #[test]
    fn oversized_disc_is_invalid() {
        let spec = UnitCellSpec { inner_disc_diameter: 6.5e-3, ..UnitCellSpec::<f64>::reference_design() };
        assert!(matches!(check_fit(&spec, 0.0), Err(GeometryError::InvalidSpec(_))));
    }

    #[test]
    fn fit_in_single_precision() {
        assert!(check_fit(&UnitCellSpec::<f32>::reference_design(), 0.0).unwrap().passed);
    }

    #[test]
    fn eight_by_eight_enumeration() {
        let l = generate_layout(8, 8, F).unwrap();
        assert_eq!(l.len(), 64);
        assert_eq!(l.count(CellKind::SenseA), 4);
        assert_eq!(l.count(CellKind::SenseB), 4);
        assert_eq!(l.count(CellKind::Reflect), 56);
        let p = eighth_wave(F);
        let cols = |k: CellKind| {
            let mut c: Vec<usize> = l
                .elements
                .iter()
                .filter(|e| e.kind == k)
                .map(|e| (e.position[0] / p).round() as usize)
                .collect();
            c.sort();
            c.dedup();
            c
        };
        assert_eq!(cols(CellKind::SenseA), vec![0, 4]);
        assert_eq!(cols(CellKind::SenseB), vec![2, 6]);
        assert!(validate_layout(&l, 0.0).passed());
    }

    #[test]
    fn too_small_panel() {
        assert_eq!(
            generate_layout(4, 4, F).unwrap_err(),
            GeometryError::PanelTooSmall { nx: 4, ny: 4 }
        );
    }

    #[test]
    fn y_axis_interleave_validates() {
        let opts = LayoutOptions { axis: InterleaveAxis::Y, pitch: None };
        let l = generate_layout_with(12, 16, F, &opts).unwrap();
        assert!(validate_layout(&l, 0.0).passed());
    }

    #[test]
    fn reference_pitch_within_tolerance() {
        let opts = LayoutOptions { axis: InterleaveAxis::X, pitch: Some(7.0e-3) };
        let l = generate_layout_with(16, 16, F, &opts).unwrap();
        let strict = validate_layout(&l, 0.0);
        assert!(!strict.passed());
        let r = validate_layout(&l, DEFAULT_SPACING_TOLERANCE);
        assert!(r.passed(), "{:?}", r.violations);
        assert!((r.max_deviation - 0.027_376).abs() < 1e-5, "{}", r.max_deviation);
    }

    #[test]
    fn half_wave_offset_is_reported() {
        let mut l = generate_layout(16, 16, F).unwrap();
        let quarter = free_space_wavelength(F) / 4.0;
        for e in l.elements.iter_mut().filter(|e| e.kind == CellKind::SenseB) {
            e.position[0] += quarter;
        }
        let r = validate_layout(&l, DEFAULT_SPACING_TOLERANCE);
        assert!(r.violations.iter().any(|v| v.rule == LayoutRule::InterleaveOffset));
    }

    #[test]
    fn co_polarized_groups_are_reported() {
        let mut l = generate_layout(8, 8, F).unwrap();
        for e in l.elements.iter_mut().filter(|e| e.kind == CellKind::SenseB) {
            e.polarization = Polarization::X;
        }
        let r = validate_layout(&l, DEFAULT_SPACING_TOLERANCE);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, LayoutRule::Polarization);
    }

    #[test]
    fn wrong_feeder_is_reported() {
        let mut l = generate_layout(8, 8, F).unwrap();
        let idx = l.group_indices(1)[0];
        l.elements[idx].feeder_group = Some(2);
        let r = validate_layout(&l, DEFAULT_SPACING_TOLERANCE);
        assert!(r.violations.iter().any(|v| v.rule == LayoutRule::FeederGroup && v.elements == vec![idx]));
    }

    #[test]
    fn json_round_trip() {
        let l = generate_layout(8, 8, F).unwrap();
        let back = PanelLayout::<f64>::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
        let v: serde_json::Value = serde_json::from_str(&l.to_json()).unwrap();
        assert_eq!(v["elements"][0]["kind"], "SenseA");
        assert_eq!(v["elements"][0]["feeder"], 1);
        assert_eq!(v["elements"][1]["feeder"], serde_json::Value::Null);
    }
}
