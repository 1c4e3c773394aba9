//! Lookup-table calibration and the sense → configure → reflect loop.
//!
//! The table maps an (incident, target) pair of grid directions to the
//! quantized load matrix for that pair. An episode senses both node
//! directions, picks the nearest table entry and scores the resulting
//! reflection toward the true RX direction against the continuous-phase
//! ideal.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{array_factor, Direction, FieldsError, GridSpec, LoadMatrix, Surface, TIE_EPSILON};
use crate::scalar::{db10, lit, to_f64, Real};
use crate::sensing::{estimate_doa, snapshot_model, Scene, SensingConfig, SensingError};
use crate::unitcell::SwitchState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("table built for {expected} elements, surface has {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("table built for {expected} Hz, surface is designed for {found} Hz")]
    FrequencyMismatch { expected: f64, found: f64 },
    #[error("table has {found} entries, grids need {expected}")]
    IncompleteTable { expected: usize, found: usize },
    #[error("scene {index}: {source}")]
    Scene {
        index: usize,
        #[source]
        source: SensingError,
    },
    #[error(transparent)]
    Fields(#[from] FieldsError),
    #[error("calibration table JSON: {0}")]
    Json(String),
}

/// `θ ∈ {0°, 10°, …, 60°}` × `φ ∈ {0°, 90°, 180°, 270°}`, broadside once.
pub fn default_grid<T: Real>() -> Vec<Direction<T>> {
    direction_grid(lit(10.0), lit(60.0), lit(90.0))
}

/// Regular (θ, φ) grid in degrees with `θ = 0` listed once, θ-major.
pub fn direction_grid<T: Real>(theta_step_deg: T, theta_max_deg: T, phi_step_deg: T) -> Vec<Direction<T>> {
    let mut out = vec![Direction::broadside()];
    if !(theta_step_deg > T::zero() && phi_step_deg > T::zero()) {
        return out;
    }
    let nt = to_f64(theta_max_deg / theta_step_deg + lit(1e-9)).floor() as usize;
    let np = to_f64(lit::<T>(360.0) / phi_step_deg - lit(1e-9)).ceil() as usize;
    for i in 1..=nt {
        for j in 0..np {
            let t = theta_step_deg * lit(i as f64);
            let p = phi_step_deg * lit(j as f64);
            if let Ok(d) = Direction::from_degrees(t, p) {
                out.push(d);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable<T> {
    pub incident_grid: Vec<Direction<T>>,
    pub target_grid: Vec<Direction<T>>,
    /// Row-major: `entries[i * target_grid.len() + j]`.
    pub entries: Vec<LoadMatrix>,
    pub frequency: T,
    pub elements: usize,
}

#[derive(Serialize, Deserialize)]
struct GridPoint {
    theta_deg: f64,
    phi_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    frequency_hz: f64,
    elements: usize,
    incident_grid: Vec<GridPoint>,
    target_grid: Vec<GridPoint>,
    entries: Vec<Vec<SwitchState>>,
}

impl<T: Real> CalibrationTable<T> {
    pub fn entry(&self, incident: usize, target: usize) -> &LoadMatrix {
        &self.entries[incident * self.target_grid.len() + target]
    }

    pub fn to_json(&self) -> String {
        let grid = |g: &[Direction<T>]| {
            g.iter()
                .map(|d| GridPoint {
                    theta_deg: to_f64(d.theta_deg()),
                    phi_deg: to_f64(d.phi_deg()),
                })
                .collect()
        };
        serde_json::to_string(&TableFile {
            frequency_hz: to_f64(self.frequency),
            elements: self.elements,
            incident_grid: grid(&self.incident_grid),
            target_grid: grid(&self.target_grid),
            entries: self.entries.iter().map(|m| m.states.clone()).collect(),
        })
        .expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ControllerError> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| ControllerError::Json(e.to_string()))?;
        let grid = |g: Vec<GridPoint>| {
            g.into_iter()
                .map(|p| Direction::from_degrees(lit(p.theta_deg), lit(p.phi_deg)))
                .collect::<Result<Vec<_>, _>>()
        };
        let table = Self {
            incident_grid: grid(file.incident_grid)?,
            target_grid: grid(file.target_grid)?,
            entries: file.entries.into_iter().map(|states| LoadMatrix { states }).collect(),
            frequency: lit(file.frequency_hz),
            elements: file.elements,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.incident_grid.is_empty() {
            return Err(ControllerError::EmptyGrid("incident"));
        }
        if self.target_grid.is_empty() {
            return Err(ControllerError::EmptyGrid("target"));
        }
        let expected = self.incident_grid.len() * self.target_grid.len();
        if self.entries.len() != expected {
            return Err(ControllerError::IncompleteTable {
                expected,
                found: self.entries.len(),
            });
        }
        if let Some(m) = self.entries.iter().find(|m| m.len() != self.elements) {
            return Err(ControllerError::LayoutMismatch {
                expected: self.elements,
                found: m.len(),
            });
        }
        Ok(())
    }

    pub fn check_surface(&self, surface: &Surface<T>) -> Result<(), ControllerError> {
        if surface.len() != self.elements {
            return Err(ControllerError::LayoutMismatch {
                expected: self.elements,
                found: surface.len(),
            });
        }
        let f = surface.frequency();
        if (f - self.frequency).abs() > f.abs() * lit(1e-12) {
            return Err(ControllerError::FrequencyMismatch {
                expected: to_f64(self.frequency),
                found: to_f64(f),
            });
        }
        Ok(())
    }
}

/// Quantized load matrix for every grid pair, at the surface's design
/// frequency.
pub fn build_lut<T: Real>(
    surface: &Surface<T>,
    incident_grid: &[Direction<T>],
    target_grid: &[Direction<T>],
) -> Result<CalibrationTable<T>, ControllerError> {
    if incident_grid.is_empty() {
        return Err(ControllerError::EmptyGrid("incident"));
    }
    if target_grid.is_empty() {
        return Err(ControllerError::EmptyGrid("target"));
    }
    let f = surface.frequency();
    let nt = target_grid.len();
    let entries = (0..incident_grid.len() * nt)
        .into_par_iter()
        .map(|k| surface.quantized_matrix(&incident_grid[k / nt], &target_grid[k % nt], f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CalibrationTable {
        incident_grid: incident_grid.to_vec(),
        target_grid: target_grid.to_vec(),
        entries,
        frequency: f,
        elements: surface.len(),
    })
}

/// Index of the grid direction nearest `at` by great-circle angle; ties go
/// to the lower index.
pub fn nearest_index<T: Real>(grid: &[Direction<T>], at: &Direction<T>) -> usize {
    let eps = lit::<T>(TIE_EPSILON);
    let mut best = 0;
    let mut best_d = grid[0].angle_to(at);
    for (i, d) in grid.iter().enumerate().skip(1) {
        let dist = d.angle_to(at);
        if dist < best_d - eps {
            best = i;
            best_d = dist;
        }
    }
    best
}

/// Grid cell `(incident, target)` the table would use for the estimates.
pub fn lookup_cell<T: Real>(table: &CalibrationTable<T>, incident: &Direction<T>, target: &Direction<T>) -> (usize, usize) {
    (
        nearest_index(&table.incident_grid, incident),
        nearest_index(&table.target_grid, target),
    )
}

pub fn lookup<'a, T: Real>(
    table: &'a CalibrationTable<T>,
    incident: &Direction<T>,
    target: &Direction<T>,
) -> &'a LoadMatrix {
    let (i, j) = lookup_cell(table, incident, target);
    table.entry(i, j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStep<T> {
    pub scene: usize,
    pub tx_true: Direction<T>,
    pub rx_true: Direction<T>,
    pub tx_est: Direction<T>,
    pub rx_est: Direction<T>,
    pub incident_index: usize,
    pub target_index: usize,
    /// `|AF(rx_true)|²` with the looked-up matrix, dB.
    pub achieved_db: T,
    /// `|AF(rx_true)|²` with the continuous-phase profile for the true pair, dB.
    pub ideal_db: T,
    pub loss_db: T,
    /// Loss of the quantized profile for the true pair, dB.
    pub quantization_loss_db: T,
    pub tx_error_deg: T,
    pub rx_error_deg: T,
    /// TX and RX share a direction.
    pub coincident: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog<T> {
    pub steps: Vec<EpisodeStep<T>>,
}

impl<T: Real> EpisodeLog<T> {
    pub fn losses_db(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.loss_db).collect()
    }

    pub fn median_loss_db(&self) -> Option<T> {
        median(self.losses_db())
    }

    /// Median of the larger of the two pointing errors per step, degrees.
    pub fn median_pointing_error_deg(&self) -> Option<T> {
        median(self.steps.iter().map(|s| s.tx_error_deg.max(s.rx_error_deg)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scene,tx_theta_deg,tx_phi_deg,rx_theta_deg,rx_phi_deg,\
             tx_est_theta_deg,tx_est_phi_deg,rx_est_theta_deg,rx_est_phi_deg,\
             incident_index,target_index,achieved_db,ideal_db,loss_db,\
             quantization_loss_db,tx_error_deg,rx_error_deg,coincident\n",
        );
        for s in &self.steps {
            let dirs = [s.tx_true, s.rx_true, s.tx_est, s.rx_est];
            let _ = write!(out, "{}", s.scene);
            for d in dirs {
                let _ = write!(out, ",{:e},{:e}", to_f64(d.theta_deg()), to_f64(d.phi_deg()));
            }
            let _ = writeln!(
                out,
                ",{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                s.incident_index,
                s.target_index,
                to_f64(s.achieved_db),
                to_f64(s.ideal_db),
                to_f64(s.loss_db),
                to_f64(s.quantization_loss_db),
                to_f64(s.tx_error_deg),
                to_f64(s.rx_error_deg),
                s.coincident
            );
        }
        out
    }
}

fn median<T: Real>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * lit(0.5)
    })
}

/// `|AF(rx)|²` in dB for the looked-up matrix, incident from `tx`.
pub fn achieved_gain_db<T: Real>(
    surface: &Surface<T>,
    matrix: &LoadMatrix,
    tx: &Direction<T>,
    rx: &Direction<T>,
) -> Result<T, FieldsError> {
    let g = surface.gammas(matrix)?;
    Ok(db10(array_factor(surface, &g, tx, rx, surface.frequency())?.norm_sqr()))
}

/// Scores one configuration step given true and estimated directions.
pub fn evaluate_step<T: Real>(
    surface: &Surface<T>,
    table: &CalibrationTable<T>,
    scene: usize,
    (tx_true, rx_true): (Direction<T>, Direction<T>),
    (tx_est, rx_est): (Direction<T>, Direction<T>),
) -> Result<EpisodeStep<T>, ControllerError> {
    table.check_surface(surface)?;
    let f = surface.frequency();
    let (i, j) = lookup_cell(table, &tx_est, &rx_est);
    let achieved_db = achieved_gain_db(surface, table.entry(i, j), &tx_true, &rx_true)?;
    let ideal = surface.ideal_gammas(&tx_true, &rx_true, f);
    let ideal_db = db10(array_factor(surface, &ideal, &tx_true, &rx_true, f)?.norm_sqr());
    let quantized = surface.quantized_matrix(&tx_true, &rx_true, f)?;
    let quantized_db = achieved_gain_db(surface, &quantized, &tx_true, &rx_true)?;
    Ok(EpisodeStep {
        scene,
        tx_true,
        rx_true,
        tx_est,
        rx_est,
        incident_index: i,
        target_index: j,
        achieved_db,
        ideal_db,
        loss_db: ideal_db - achieved_db,
        quantization_loss_db: ideal_db - quantized_db,
        tx_error_deg: tx_est.angle_to(&tx_true).to_degrees(),
        rx_error_deg: rx_est.angle_to(&rx_true).to_degrees(),
        coincident: tx_true.angle_to(&rx_true) <= lit(TIE_EPSILON),
    })
}

/// Runs every scene in order: sense both groups, look up, reflect, score.
pub fn run_episode<T: Real>(
    surface: &Surface<T>,
    table: &CalibrationTable<T>,
    scenes: &[Scene<T>],
    sensing: &SensingConfig<T>,
    doa_grid: &GridSpec<T>,
) -> Result<EpisodeLog<T>, ControllerError> {
    table.validate()?;
    table.check_surface(surface)?;
    let mut log = EpisodeLog::default();
    for (index, scene) in scenes.iter().enumerate() {
        let attach = |source: SensingError| ControllerError::Scene { index, source };
        let (g1, g2) = snapshot_model(surface, scene, sensing).map_err(attach)?;
        let tx = estimate_doa(&g1, &surface.layout, doa_grid).map_err(attach)?;
        let rx = estimate_doa(&g2, &surface.layout, doa_grid).map_err(attach)?;
        let step = evaluate_step(
            surface,
            table,
            index,
            (scene.tx_direction, scene.rx_direction),
            (tx.direction, rx.direction),
        )
        .map_err(|e| match e {
            ControllerError::Fields(f) => attach(SensingError::Grid(f)),
            other => other,
        })?;
        log.steps.push(step);
    }
    Ok(log)
}

/// `count` scenes whose TX and RX directions are drawn from `grid` nodes
/// (distinct when the grid has more than one node). Scene seeds follow
/// `seed` sequentially.
pub fn node_scenes<T: Real>(
    grid: &[Direction<T>],
    count: usize,
    snr_db: T,
    snapshots: usize,
    seed: u64,
) -> Result<Vec<Scene<T>>, ControllerError> {
    if grid.is_empty() {
        return Err(ControllerError::EmptyGrid("scene"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|i| {
            let tx = rng.random_range(0..grid.len());
            let mut rx = rng.random_range(0..grid.len());
            while grid.len() > 1 && rx == tx {
                rx = rng.random_range(0..grid.len());
            }
            Scene::new(grid[tx], grid[rx], snr_db, snapshots, seed.wrapping_add(i as u64))
        })
        .collect())
}

/// `count` scenes with TX and RX uniform in θ ∈ [0, `theta_max_deg`] and
/// φ ∈ [0°, 360°).
pub fn random_scenes<T: Real>(
    theta_max_deg: T,
    count: usize,
    snr_db: T,
    snapshots: usize,
    seed: u64,
) -> Result<Vec<Scene<T>>, ControllerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tmax = to_f64(theta_max_deg);
    let draw = |rng: &mut ChaCha8Rng| {
        Direction::from_degrees(lit(rng.random_range(0.0..=tmax)), lit(rng.random_range(0.0..360.0)))
    };
    (0..count)
        .map(|i| {
            let tx = draw(&mut rng)?;
            let rx = draw(&mut rng)?;
            Ok(Scene::new(tx, rx, snr_db, snapshots, seed.wrapping_add(i as u64)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_layout;
    use crate::unitcell::HybridCellModel;

    const F: f64 = 5.5e9;

    fn surface(n: usize) -> Surface<f64> {
        Surface::new(generate_layout(n, n, F).unwrap(), HybridCellModel::default())
    }

    fn deg(t: f64, p: f64) -> Direction<f64> {
        Direction::from_degrees(t, p).unwrap()
    }

    #[test]
    fn default_grid_has_25_nodes() {
        let g = default_grid::<f64>();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], Direction::broadside());
        assert!((g[24].theta_deg() - 60.0).abs() < 1e-12 && (g[24].phi_deg() - 270.0).abs() < 1e-9);
    }

    #[test]
    fn broadside_table_is_all_open() {
        let s = surface(8);
        let b = [Direction::broadside()];
        let t = build_lut(&s, &b, &b).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert!(t.entries[0].states.iter().all(|&x| x == SwitchState::S0));
    }

    #[test]
    fn empty_grid_rejected() {
        let s = surface(8);
        assert_eq!(
            build_lut(&s, &[], &[Direction::broadside()]).unwrap_err(),
            ControllerError::EmptyGrid("incident")
        );
    }

    #[test]
    fn lookup_rules() {
        let grid = vec![deg(0.0, 0.0), deg(10.0, 0.0), deg(20.0, 0.0)];
        assert_eq!(nearest_index(&grid, &deg(10.0, 0.0)), 1);
        assert_eq!(nearest_index(&grid, &deg(15.0, 0.0)), 1);
        assert_eq!(nearest_index(&grid, &deg(5.0, 0.0)), 0);
        assert_eq!(nearest_index(&grid, &deg(80.0, 0.0)), 2);
    }

    #[test]
    fn json_round_trip() {
        let s = surface(8);
        let g = default_grid::<f64>();
        let t = build_lut(&s, &g[..3], &g[..4]).unwrap();
        let back = CalibrationTable::<f64>::from_json(&t.to_json()).unwrap();
        assert_eq!(back.entries, t.entries);
        assert_eq!(back.incident_grid.len(), 3);
        for (a, b) in back.target_grid.iter().zip(&t.target_grid) {
            assert!(a.angle_to(b) < 1e-12);
        }
    }

    #[test]
    fn coincident_scene_completes() {
        let s = surface(8);
        let g = default_grid::<f64>();
        let t = build_lut(&s, &g, &g).unwrap();
        let scene = Scene::new(deg(20.0, 90.0), deg(20.0, 90.0), f64::INFINITY, 2, 0);
        let log = run_episode(&s, &t, &[scene], &SensingConfig { leak: 0.0 }, &GridSpec::degrees(2.0, 2.0)).unwrap();
        assert_eq!(log.steps.len(), 1);
        assert!(log.steps[0].coincident);
    }

    #[test]
    fn mismatched_table_rejected() {
        let g = default_grid::<f64>();
        let t = build_lut(&surface(8), &g, &g).unwrap();
        let err = run_episode(&surface(16), &t, &[], &SensingConfig::default(), &GridSpec::default()).unwrap_err();
        assert_eq!(err, ControllerError::LayoutMismatch { expected: 64, found: 256 });
    }
}
