use onsager_flow::diagnostics::*;
use onsager_flow::grid::*;

fn rec(t: f64, e: f64, diss: f64) -> EnergyRecord {
    EnergyRecord {
        t,
        total_energy: e,
        dissipation_irreversible: diss,
        dissipation_s: 0.0,
        s_value: 1.0,
        s_exact: (-t).exp(),
        mass: 2.0,
        div_inf: 0.0,
    }
}

#[test]
fn monotone_series_passes_with_exact_identity() {
    let s: Vec<_> = (0..5).map(|k| rec(k as f64, 10.0 - k as f64, if k == 0 { 0.0 } else { 1.0 })).collect();
    let r = assert_energy_monotone(&s, 0.0);
    assert!(r.passed() && r.first_violation.is_none());
    assert_eq!(r.max_increase, -1.0);
    assert_eq!(r.max_identity_residual, 0.0);
}

#[test]
fn injected_uptick_is_located() {
    let mut s: Vec<_> = (0..6).map(|k| rec(k as f64, 10.0 - k as f64, 1.0)).collect();
    s[3].total_energy = 9.5;
    let r = assert_energy_monotone(&s, 1e-12);
    assert!(!r.passed());
    assert_eq!(r.first_violation, Some(3));
    assert!((r.max_increase - 1.5).abs() < 1e-15);
    assert!(assert_energy_monotone(&s, 2.0).passed());
}

#[test]
fn short_series_is_trivially_monotone() {
    let r = assert_energy_monotone(&[rec(0.0, 1.0, 0.0)], 0.0);
    assert!(r.passed() && r.max_increase == 0.0);
}

#[test]
fn scalar_and_mass_drift() {
    let mut s = vec![rec(0.0, 1.0, 0.0), rec(1.0, 1.0, 0.0)];
    s[1].s_value = (-1.0f64).exp() + 1e-3;
    s[1].mass = 2.002;
    assert!((scalar_tracking_error(&s) - 1e-3).abs() < 1e-12);
    assert!((mass_drift(&s) - 1e-3).abs() < 1e-12);
    s[0].mass = 0.0;
    assert!((mass_drift(&s) - 2.002).abs() < 1e-12);
}

#[test]
fn convergence_table_orders_and_zero_rejection() {
    let t = ConvergenceTable::from_errors("f", vec![0.1, 0.05], vec![4e-2, 1e-2], vec![8e-2, 2e-2]).unwrap();
    assert_eq!(t.l2_order, vec![2.0]);
    assert!(t.orders_within(1.9, 2.1));
    assert!(!t.orders_within(2.1, 3.0));
    assert!(t.to_string().contains("2.000"));
    match ConvergenceTable::from_errors("f", vec![0.1, 0.05], vec![1.0, 0.0], vec![1.0, 1.0]) {
        Err(DiagError::ZeroError { dt, .. }) => assert_eq!(dt, 0.05),
        other => panic!("{other:?}"),
    }
}

#[test]
fn field_error_norms_and_mismatch() {
    let g = GridSpec::periodic(4, 1.0).unwrap();
    let a = ScalarField::constant(&g, 1.0);
    let b = ScalarField::constant(&g, 0.5);
    let (l2, linf) = field_error(&a.clone().into(), &b.into()).unwrap();
    assert!((l2 - 0.5).abs() < 1e-15 && linf == 0.5);
    let h = GridSpec::periodic(8, 1.0).unwrap();
    assert_eq!(field_error(&a.into(), &ScalarField::zeros(&h).into()), Err(DiagError::GridMismatch));
}

#[test]
fn refinement_driver_rejects_bad_input() {
    let run = |_: f64| Ok::<_, String>(Vec::new());
    assert_eq!(refine_in_time(0.1, 0, run), Err(DiagError::TooFewLevels));
    let fail = |dt: f64| if dt < 0.06 { Err("boom".to_string()) } else { Ok(Vec::new()) };
    assert!(matches!(refine_in_time(0.1, 2, fail), Err(DiagError::Run { .. })));
}

#[test]
fn thread_budget_is_positive() {
    assert!(thread_budget() >= 1);
}
