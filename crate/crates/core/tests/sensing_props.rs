use hris_core::fields::{Direction, GridSpec, Surface};
use hris_core::geometry::generate_layout;
use hris_core::sensing::{estimate_doa, snapshot_model, BeamScan, Scene, SensingConfig};
use hris_core::unitcell::HybridCellModel;
use hris_core::{Direction64, Scene64, Surface64};

const F: f64 = 5.5e9;

fn surface(n: usize) -> Surface64 {
    Surface::new(generate_layout(n, n, F).unwrap(), HybridCellModel::default())
}

fn deg(t: f64, p: f64) -> Direction64 {
    Direction::from_degrees(t, p).unwrap()
}

/// θ errors (degrees) of both groups over `trials` seeds.
fn theta_errors(s: &Surface64, base: Scene64, trials: u64) -> (Vec<f64>, Vec<f64>) {
    let grid = GridSpec::default();
    let cfg = SensingConfig::default();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for seed in 0..trials {
        let scene = Scene { seed, ..base };
        let (g1, g2) = snapshot_model(s, &scene, &cfg).unwrap();
        let a = estimate_doa(&g1, &s.layout, &grid).unwrap();
        let b = estimate_doa(&g2, &s.layout, &grid).unwrap();
        e1.push(a.direction.theta_deg() - scene.tx_direction.theta_deg());
        e2.push(b.direction.theta_deg() - scene.rx_direction.theta_deg());
    }
    (e1, e2)
}

fn rmse(e: &[f64]) -> f64 {
    (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt()
}

fn mean(e: &[f64]) -> f64 {
    e.iter().sum::<f64>() / e.len() as f64
}

fn scene(snr_db: f64) -> Scene64 {
    Scene::new(deg(25.0, 30.0), deg(40.0, 200.0), snr_db, 64, 0)
}

#[test]
fn high_snr_is_unbiased() {
    let s = surface(16);
    let (e1, e2) = theta_errors(&s, scene(40.0), 200);
    assert!(mean(&e1).abs() < 0.1, "group 1 bias {}", mean(&e1));
    assert!(mean(&e2).abs() < 0.1, "group 2 bias {}", mean(&e2));
}

#[test]
fn rmse_degrades_monotonically_with_noise() {
    let s = surface(16);
    let mut last = (0.0, 0.0);
    for snr in [30.0, 20.0, 10.0, 0.0] {
        let (e1, e2) = theta_errors(&s, scene(snr), 40);
        let now = (rmse(&e1), rmse(&e2));
        assert!(now.0 >= last.0 && now.1 >= last.1, "snr {snr}: {now:?} after {last:?}");
        last = now;
    }
}

#[test]
fn half_wave_groups_have_no_grating_lobes() {
    let s = surface(16);
    for (t, p) in [(0.0, 0.0), (20.0, 0.0), (45.0, 90.0), (70.0, 30.0), (89.0, 180.0)] {
        let truth = deg(t, p);
        let noiseless = Scene::new(truth, deg(10.0, 10.0), f64::INFINITY, 1, 0);
        let (g1, _) = snapshot_model(&s, &noiseless, &SensingConfig { leak: 0.0 }).unwrap();
        let scan = BeamScan::new(&g1, &s.layout).unwrap();
        let cut: Vec<f64> = (0..=180).map(|i| scan.power((i as f64 * 0.5).to_radians(), truth.phi)).collect();
        let peak = cut.iter().cloned().fold(f64::MIN, f64::max);
        let near_peak: Vec<usize> = (0..cut.len()).filter(|&i| cut[i] > peak * (1.0 - 1e-9)).collect();
        assert_eq!(near_peak.len(), 1, "θ = {t}: {near_peak:?}");
        assert!((near_peak[0] as f64 * 0.5 - t).abs() <= 0.5);
    }
}

#[test]
fn estimates_are_deterministic() {
    let s = surface(12);
    let sc = Scene::new(deg(15.0, 100.0), deg(30.0, 300.0), 5.0, 16, 99);
    let cfg = SensingConfig::default();
    let run = || {
        let (g1, g2) = snapshot_model(&s, &sc, &cfg).unwrap();
        let grid = GridSpec::degrees(2.0, 2.0);
        (estimate_doa(&g1, &s.layout, &grid).unwrap(), estimate_doa(&g2, &s.layout, &grid).unwrap(), g1, g2)
    };
    assert_eq!(run(), run());
}

#[test]
fn noiseless_estimates_land_on_truth() {
    let s = surface(16);
    for (t, p) in [(5.0, 10.0), (12.3, 77.0), (33.0, 145.0), (50.0, 260.0), (61.5, 350.0)] {
        let truth = deg(t, p);
        let sc = Scene::new(truth, deg(20.0, 0.0), f64::INFINITY, 1, 0);
        let (g1, _) = snapshot_model(&s, &sc, &SensingConfig { leak: 0.0 }).unwrap();
        let est = estimate_doa(&g1, &s.layout, &GridSpec::default()).unwrap();
        assert!(est.direction.angle_to(&truth).to_degrees() < 0.05, "{t},{p}: {:?}", est.direction);
    }
}

#[test]
fn estimate_json_fields() {
    let s = surface(8);
    let sc = Scene::new(deg(20.0, 0.0), deg(10.0, 90.0), f64::INFINITY, 1, 0);
    let (_, g2) = snapshot_model(&s, &sc, &SensingConfig::default()).unwrap();
    let est = estimate_doa(&g2, &s.layout, &GridSpec::degrees(2.0, 2.0)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&est.to_json()).unwrap();
    assert_eq!(v["group"], 2);
    for key in ["theta_deg", "phi_deg", "peak"] {
        assert!(v[key].is_f64(), "{key}");
    }
}
