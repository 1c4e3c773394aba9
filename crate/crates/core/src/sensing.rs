//! Signal model and direction finding for the two sensing feeder groups.
//!
//! Group 1 (SenseA) looks at the TX node and group 2 (SenseB) at the RX
//! node. Each group also sees the other node's wave through a scalar
//! cross-polarization leak. Samples are narrowband baseband values at the
//! design frequency; the source waveform is a constant tone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{steering_phase, Direction, FieldsError, GridSpec, Surface};
use crate::geometry::PanelLayout;
use crate::scalar::{cis, db10, lit, to_f64, wavenumber, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("layout has no elements on feeder group {0}")]
    MissingSensingGroup(u8),
    #[error("snapshot has {found} elements but group {group} has {expected}")]
    DimensionMismatch { group: u8, expected: usize, found: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Grid(#[from] FieldsError),
}

/// Default cross-polarization leak amplitude, −30 dB.
pub fn default_leak<T: Real>() -> T {
    lit(10f64.powf(-30.0 / 20.0))
}

/// Reported isolation when nothing leaks, dB.
pub const ISOLATION_CAP_DB: f64 = 300.0;

/// The two far-end nodes seen by the panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene<T> {
    pub tx_direction: Direction<T>,
    pub rx_direction: Direction<T>,
    pub tx_amplitude: Complex<T>,
    pub rx_amplitude: Complex<T>,
    /// Per element and snapshot, relative to the intended source.
    /// `+∞` gives noiseless snapshots.
    pub snr_db: T,
    pub snapshots: usize,
    pub seed: u64,
}

impl<T: Real> Scene<T> {
    pub fn new(tx: Direction<T>, rx: Direction<T>, snr_db: T, snapshots: usize, seed: u64) -> Self {
        let one = Complex::new(T::one(), T::zero());
        Self {
            tx_direction: tx,
            rx_direction: rx,
            tx_amplitude: one,
            rx_amplitude: one,
            snr_db,
            snapshots,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        if self.snapshots == 0 {
            return Err(SensingError::InvalidScene("at least one snapshot is required".into()));
        }
        let finite = |z: Complex<T>| z.re.is_finite() && z.im.is_finite();
        if !(finite(self.tx_amplitude) && finite(self.rx_amplitude)) {
            return Err(SensingError::InvalidScene("amplitudes must be finite".into()));
        }
        if self.snr_db.is_nan() {
            return Err(SensingError::InvalidScene("SNR is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingConfig<T> {
    /// Cross-polarization leak amplitude.
    pub leak: T,
}

impl<T: Real> Default for SensingConfig<T> {
    fn default() -> Self {
        Self { leak: default_leak() }
    }
}

/// Samples of one feeder group, `elements × snapshots`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub group: u8,
    /// Layout index of each row.
    pub elements: Vec<usize>,
    pub snapshots: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> Snapshot<T> {
    pub fn sample(&self, row: usize, snapshot: usize) -> Complex<T> {
        self.data[row * self.snapshots + snapshot]
    }

    pub fn row(&self, row: usize) -> &[Complex<T>] {
        &self.data[row * self.snapshots..(row + 1) * self.snapshots]
    }

    /// `element,snapshot,re,im` with layout element indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,snapshot,re,im\n");
        for (r, &e) in self.elements.iter().enumerate() {
            for k in 0..self.snapshots {
                let z = self.sample(r, k);
                let _ = writeln!(out, "{e},{k},{:e},{:e}", to_f64(z.re), to_f64(z.im));
            }
        }
        out
    }
}

fn steering_vector<T: Real>(layout: &PanelLayout<T>, elements: &[usize], dir: &Direction<T>) -> Vec<Complex<T>> {
    let f = layout.design_frequency;
    elements
        .iter()
        .map(|&i| cis(steering_phase(layout.elements[i].position, dir, f)))
        .collect()
}

fn group_elements<T: Real>(layout: &PanelLayout<T>, group: u8) -> Result<Vec<usize>, SensingError> {
    let idx = layout.group_indices(group);
    if idx.is_empty() {
        return Err(SensingError::MissingSensingGroup(group));
    }
    Ok(idx)
}

/// Generates the two groups' snapshots. Noise is circular Gaussian, drawn
/// from a ChaCha8 stream seeded by `scene.seed`: all of group 1 first
/// (element-major), then group 2.
pub fn snapshot_model<T: Real>(
    surface: &Surface<T>,
    scene: &Scene<T>,
    config: &SensingConfig<T>,
) -> Result<(Snapshot<T>, Snapshot<T>), SensingError> {
    scene.validate()?;
    let layout = &surface.layout;
    let g1 = group_elements(layout, 1)?;
    let g2 = group_elements(layout, 2)?;
    let sense = surface.cell.sense_amplitude();
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);

    let mut build = |group: u8,
                     elements: Vec<usize>,
                     (want_dir, want_amp): (&Direction<T>, Complex<T>),
                     (leak_dir, leak_amp): (&Direction<T>, Complex<T>)| {
        let a = steering_vector(layout, &elements, want_dir);
        let b = steering_vector(layout, &elements, leak_dir);
        let signal_power = want_amp.norm_sqr() * sense * sense;
        let sigma = if scene.snr_db.is_infinite() && scene.snr_db > T::zero() {
            T::zero()
        } else {
            (signal_power / lit::<T>(10.0).powf(scene.snr_db / lit(10.0)) * lit(0.5)).sqrt()
        };
        let mut data = Vec::with_capacity(elements.len() * scene.snapshots);
        for (ai, bi) in a.iter().zip(&b) {
            let clean = (*ai * want_amp + *bi * leak_amp * config.leak) * sense;
            for _ in 0..scene.snapshots {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                data.push(clean + Complex::new(lit::<T>(re), lit::<T>(im)) * sigma);
            }
        }
        Snapshot {
            group,
            elements,
            snapshots: scene.snapshots,
            data,
        }
    };

    let s1 = build(
        1,
        g1,
        (&scene.tx_direction, scene.tx_amplitude),
        (&scene.rx_direction, scene.rx_amplitude),
    );
    let s2 = build(
        2,
        g2,
        (&scene.rx_direction, scene.rx_amplitude),
        (&scene.tx_direction, scene.tx_amplitude),
    );
    Ok((s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoAEstimate<T> {
    pub direction: Direction<T>,
    pub spectrum_peak: T,
    pub group: u8,
}

#[derive(Serialize, Deserialize)]
struct DoAFile {
    theta_deg: f64,
    phi_deg: f64,
    peak: f64,
    group: u8,
}

impl<T: Real> DoAEstimate<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DoAFile {
            theta_deg: to_f64(self.direction.theta_deg()),
            phi_deg: to_f64(self.direction.phi_deg()),
            peak: to_f64(self.spectrum_peak),
            group: self.group,
        })
        .expect("estimate serializes")
    }
}

/// Bartlett beam-scan spectrum of one group's snapshot.
///
/// The quadratic form `aᴴRa` is summed over the group's co-array: sample
/// covariance entries sharing a baseline are merged once, so each direction
/// costs one term per distinct baseline instead of one per element pair.
pub struct BeamScan<T> {
    k: T,
    elements: usize,
    /// Zero-baseline term: total power on the diagonal.
    diagonal: T,
    /// Distinct x and y baseline components.
    xs: Vec<T>,
    ys: Vec<T>,
    /// One baseline of each `±d` pair, as indices into `xs`/`ys`, with its
    /// merged covariance.
    baselines: Vec<(usize, usize, Complex<T>)>,
}

/// Baselines are merged when they agree to a nanometre.
const BASELINE_RESOLUTION_M: f64 = 1e-9;

impl<T: Real> BeamScan<T> {
    pub fn new(snapshot: &Snapshot<T>, layout: &PanelLayout<T>) -> Result<Self, SensingError> {
        let expected = layout.group_indices(snapshot.group);
        if expected.is_empty() {
            return Err(SensingError::MissingSensingGroup(snapshot.group));
        }
        if expected != snapshot.elements || snapshot.data.len() != expected.len() * snapshot.snapshots {
            return Err(SensingError::DimensionMismatch {
                group: snapshot.group,
                expected: expected.len(),
                found: snapshot.elements.len(),
            });
        }
        let n = expected.len();
        let kk = lit::<T>(snapshot.snapshots as f64);
        let pos: Vec<[T; 2]> = expected.iter().map(|&i| layout.elements[i].position).collect();
        let key = |d: [T; 2]| {
            let q = |v: T| (to_f64(v) / BASELINE_RESOLUTION_M).round() as i64;
            (q(d[0]), q(d[1]))
        };
        let mut diagonal = T::zero();
        let mut merged: BTreeMap<(i64, i64), ([T; 2], Complex<T>)> = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                // R_ij = Σ_k x_ik conj(x_jk) / K couples conj(a_i)·a_j, i.e.
                // the baseline r_j − r_i.
                let r: Complex<T> = snapshot
                    .row(i)
                    .iter()
                    .zip(snapshot.row(j))
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + *x * y.conj())
                    / kk;
                if i == j {
                    diagonal += r.re;
                    continue;
                }
                let mut d = [pos[j][0] - pos[i][0], pos[j][1] - pos[i][1]];
                let mut c = r;
                let (kx, ky) = key(d);
                if kx < 0 || (kx == 0 && ky < 0) {
                    d = [-d[0], -d[1]];
                    c = c.conj();
                }
                if key(d) == (0, 0) {
                    diagonal += c.re + c.re;
                    continue;
                }
                merged.entry(key(d)).or_insert((d, Complex::new(T::zero(), T::zero()))).1 += c;
            }
        }
        let mut xs: BTreeMap<i64, T> = BTreeMap::new();
        let mut ys: BTreeMap<i64, T> = BTreeMap::new();
        for ((kx, ky), (d, _)) in &merged {
            xs.entry(*kx).or_insert(d[0]);
            ys.entry(*ky).or_insert(d[1]);
        }
        let index = |m: &BTreeMap<i64, T>, key: i64| m.keys().position(|k| *k == key).expect("key present");
        let baselines = merged
            .iter()
            .map(|((kx, ky), (_, c))| (index(&xs, *kx), index(&ys, *ky), *c))
            .collect();
        Ok(Self {
            k: wavenumber(layout.design_frequency),
            elements: n,
            diagonal,
            xs: xs.into_values().collect(),
            ys: ys.into_values().collect(),
            baselines,
        })
    }

    /// `‖aᴴX‖² / (‖a‖² K)` at polar angle `theta` and azimuth `phi`. Accepts
    /// any real angles, so refinement can step across `theta = 0`.
    pub fn power(&self, theta: T, phi: T) -> T {
        let s = theta.sin();
        let (u, v) = (self.k * s * phi.cos(), self.k * s * phi.sin());
        let ex: Vec<Complex<T>> = self.xs.iter().map(|x| cis(*x * u)).collect();
        let ey: Vec<Complex<T>> = self.ys.iter().map(|y| cis(*y * v)).collect();
        let cross = self
            .baselines
            .iter()
            .fold(T::zero(), |acc, (ix, iy, c)| acc + (*c * ex[*ix] * ey[*iy]).re);
        (self.diagonal + cross + cross) / lit(self.elements as f64)
    }
}

/// Vertex offset of the parabola through `(−h, lo)`, `(0, mid)`, `(h, hi)`,
/// limited to one step.
fn parabolic_offset<T: Real>(lo: T, mid: T, hi: T, h: T) -> T {
    let den = lo - lit::<T>(2.0) * mid + hi;
    if den >= T::zero() {
        return T::zero();
    }
    let off = lit::<T>(0.5) * (lo - hi) / den * h;
    off.max(-h).min(h)
}

/// Beam-scan direction of arrival for one group: grid search followed by
/// parabolic refinement in θ, then in φ.
pub fn estimate_doa<T: Real>(
    snapshot: &Snapshot<T>,
    layout: &PanelLayout<T>,
    grid: &GridSpec<T>,
) -> Result<DoAEstimate<T>, SensingError> {
    let scan = BeamScan::new(snapshot, layout)?;
    let samples = grid.samples()?;
    let powers: Vec<T> = samples
        .par_iter()
        .map(|(d, _)| scan.power(d.theta, d.phi))
        .collect();
    let mut best = 0;
    for (i, p) in powers.iter().enumerate() {
        if *p > powers[best] {
            best = i;
        }
    }
    let peak = samples[best].0;
    let (th, ph) = (grid.theta_step, grid.phi_step);

    let p0 = powers[best];
    let dth = parabolic_offset(scan.power(peak.theta - th, peak.phi), p0, scan.power(peak.theta + th, peak.phi), th);
    let mut theta = peak.theta + dth;
    let mut phi = peak.phi;
    if theta < T::zero() {
        theta = -theta;
        phi = phi + T::PI();
    }
    theta = theta.min(T::FRAC_PI_2());
    // Azimuth is undefined at the pole.
    if theta.sin() > lit(1e-9) {
        let c = scan.power(theta, phi);
        let dph = parabolic_offset(scan.power(theta, phi - ph), c, scan.power(theta, phi + ph), ph);
        phi = phi + dph;
    }
    let direction = Direction::new(theta, phi)?;
    Ok(DoAEstimate {
        spectrum_peak: scan.power(direction.theta, direction.phi),
        direction,
        group: snapshot.group,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolationReport<T> {
    /// Intended-to-leaked power in group 1 (TX side), dB.
    pub group1_db: T,
    /// Intended-to-leaked power in group 2 (RX side), dB.
    pub group2_db: T,
}

/// Analytic intended-to-leaked power ratio at the output of each group's
/// beam steered at its intended source: amplitude ratio over the leak plus
/// the array-gain difference between the two directions. Capped at
/// [`ISOLATION_CAP_DB`].
pub fn isolation_report<T: Real>(
    surface: &Surface<T>,
    scene: &Scene<T>,
    config: &SensingConfig<T>,
) -> Result<IsolationReport<T>, SensingError> {
    scene.validate()?;
    let layout = &surface.layout;
    let cap = lit::<T>(ISOLATION_CAP_DB);
    let one_group = |group: u8, want: (&Direction<T>, Complex<T>), leak: (&Direction<T>, Complex<T>)| {
        let elements = group_elements(layout, group)?;
        let a = steering_vector(layout, &elements, want.0);
        let b = steering_vector(layout, &elements, leak.0);
        let n = lit::<T>(elements.len() as f64);
        let cross: Complex<T> = a
            .iter()
            .zip(&b)
            .fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| s + x.conj() * y);
        let gain_want = n;
        let gain_leak = cross.norm_sqr() / n;
        let leaked = config.leak * leak.1.norm();
        if leaked == T::zero() || gain_leak == T::zero() {
            return Ok(cap);
        }
        let ratio = db10(want.1.norm_sqr() / (leaked * leaked)) + db10(gain_want / gain_leak);
        Ok::<T, SensingError>(ratio.min(cap))
    };
    Ok(IsolationReport {
        group1_db: one_group(
            1,
            (&scene.tx_direction, scene.tx_amplitude),
            (&scene.rx_direction, scene.rx_amplitude),
        )?,
        group2_db: one_group(
            2,
            (&scene.rx_direction, scene.rx_amplitude),
            (&scene.tx_direction, scene.tx_amplitude),
        )?,
    })
}
