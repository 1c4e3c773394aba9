use hris_core::retrieval::{
    classify_dng_bands, evaluate_material, linear_sweep, simulate_slab, slab_forward, unwrap_branch, Lorentzian,
    MaterialModel, RetrievalError, SlabSpec,
};
use hris_core::touchstone::{SParamRecord, SParamTable};
use hris_core::Complex64;
use proptest::prelude::*;

const D: f64 = 0.8e-3;

prop_compose! {
    fn lorentzian()(static_value in 1.0f64..6.0, strength in 0.0f64..3.0,
                    resonance in 2e9f64..9e9, damping in 0.05e9f64..1.0e9) -> Lorentzian<f64> {
        Lorentzian { static_value, strength, resonance, damping }
    }
}

prop_compose! {
    fn passive_model()(permittivity in lorentzian(), permeability in lorentzian()) -> MaterialModel<f64> {
        MaterialModel { permittivity, permeability }
    }
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn passive_models_round_trip(model in passive_model()) {
        let slab = SlabSpec::new(D).unwrap();
        let freqs = linear_sweep(1e9, 10e9, 200);
        let table = simulate_slab(&model, slab, &freqs).unwrap();
        let params = unwrap_branch(&table, slab, None).unwrap();
        for (p, rec) in params.points.iter().zip(&table.records) {
            if rec.s21.norm() <= 1e-6 {
                continue;
            }
            let v = p.value.as_ref().expect("retrievable point");
            let (eps, mu) = evaluate_material(&model, p.frequency);
            prop_assert!(rel_err(v.eps, eps) < 1e-8, "eps at {}: {} vs {}", p.frequency, v.eps, eps);
            prop_assert!(rel_err(v.mu, mu) < 1e-8, "mu at {}: {} vs {}", p.frequency, v.mu, mu);
        }
    }

    #[test]
    fn passive_slab_conserves_power(model in passive_model(), f in 1e9f64..10e9) {
        let (eps, mu) = evaluate_material(&model, f);
        let (s11, s21) = slab_forward(eps, mu, D, f).unwrap();
        prop_assert!(s11.norm_sqr() + s21.norm_sqr() <= 1.0 + 1e-12);
    }

    #[test]
    fn retrieved_impedance_has_non_negative_real_part(model in passive_model()) {
        let slab = SlabSpec::new(D).unwrap();
        let table = simulate_slab(&model, slab, &linear_sweep(1e9, 10e9, 50)).unwrap();
        for (_, v) in unwrap_branch(&table, slab, None).unwrap().retrieved() {
            prop_assert!(v.z.re >= 0.0);
            prop_assert!(v.n.im >= -1e-9);
        }
    }

    #[test]
    fn thick_slab_branch_continuity(thickness in 5e-3f64..20e-3) {
        // A lossless dielectric of index 2 wraps the transmission phase
        // several times over the sweep; continuity must follow it.
        let model = MaterialModel {
            permittivity: Lorentzian::constant(4.0),
            permeability: Lorentzian::constant(1.0),
        };
        let slab = SlabSpec::new(thickness).unwrap();
        let table = simulate_slab(&model, slab, &linear_sweep(1e9, 10e9, 400)).unwrap();
        let params = unwrap_branch(&table, slab, None).unwrap();
        for (_, v) in params.retrieved() {
            prop_assert!((v.n.re - 2.0).abs() < 1e-8, "n = {}", v.n);
        }
    }
}

#[test]
fn dng_fixture_band_contains_design_frequency() {
    let slab = SlabSpec::new(D).unwrap();
    let table = simulate_slab(&MaterialModel::dng_fixture(), slab, &linear_sweep(3e9, 8e9, 201)).unwrap();
    let params = unwrap_branch(&table, slab, None).unwrap();
    let bands = classify_dng_bands(&params);
    let band = bands.iter().find(|b| b.contains(5.5e9)).expect("band around 5.5 GHz");
    for p in &params.points {
        if band.contains(p.frequency) {
            assert!(p.value.unwrap().n.re < 0.0);
        }
    }
    let at = params.points.iter().find(|p| (p.frequency - 5.5e9).abs() < 1.0).unwrap();
    assert!(at.value.unwrap().z.re > 0.0);
}

#[test]
fn opaque_points_become_gaps_and_continuity_resumes() {
    let ok = |f: f64| {
        let (s11, s21) = slab_forward(Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0), D, f).unwrap();
        SParamRecord::symmetric(f, s11, s21)
    };
    let mut records: Vec<_> = [2e9, 3e9, 4e9, 5e9].iter().map(|&f| ok(f)).collect();
    records[2] = SParamRecord::symmetric(4e9, Complex64::new(0.999, 0.0), Complex64::new(1e-9, 0.0));
    let table = SParamTable::new(records).unwrap();
    let params = unwrap_branch(&table, SlabSpec::new(D).unwrap(), None).unwrap();
    assert_eq!(params.gap_count(), 1);
    assert!(matches!(
        params.points[2].gap_reason,
        Some(RetrievalError::TransmissionTooSmall { .. })
    ));
    let n = params.points[3].value.unwrap().n;
    assert!((n.re - 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn all_opaque_is_an_error() {
    let rec = |f| SParamRecord::symmetric(f, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let table = SParamTable::new(vec![rec(1e9), rec(2e9)]).unwrap();
    assert_eq!(
        unwrap_branch(&table, SlabSpec::new(D).unwrap(), None).unwrap_err(),
        RetrievalError::EmptySweep
    );
}

#[test]
fn single_point_is_insufficient() {
    let (s11, s21) = slab_forward(Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0), D, 1e9).unwrap();
    let table = SParamTable::new(vec![SParamRecord::symmetric(1e9, s11, s21)]).unwrap();
    assert_eq!(
        unwrap_branch(&table, SlabSpec::new(D).unwrap(), None).unwrap_err(),
        RetrievalError::InsufficientData(1)
    );
}

#[test]
fn non_positive_thickness_rejected() {
    assert!(SlabSpec::new(0.0).is_err());
    assert!(SlabSpec::new(-1e-3).is_err());
    assert!(SlabSpec::new(f64::NAN).is_err());
}

#[test]
fn material_json_and_params_csv() {
    let model = MaterialModel::<f64>::dng_fixture();
    assert_eq!(MaterialModel::from_json(&model.to_json()).unwrap(), model);
    let bad = model.to_json().replace("4800000000.0", "-1.0");
    assert!(MaterialModel::<f64>::from_json(&bad).is_err());

    let slab = SlabSpec::new(0.8e-3).unwrap();
    let table = simulate_slab(&model, slab, &linear_sweep(3e9, 8e9, 11)).unwrap();
    let csv = unwrap_branch(&table, slab, None).unwrap().to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "freq_hz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,branch,gap_flag");
    assert_eq!(lines.len(), 12);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 11 && l.ends_with(",0")));
}
