use onsager_flow::diagnostics::*;
use onsager_flow::eqrid::*;
use proptest::prelude::*;

const ODE: LinearOdeModel = LinearOdeModel { lambda: 1.0, omega: 3.0 };
const DAMP: LinearOdeModel = LinearOdeModel { lambda: 2.0, omega: 0.0 };

fn run(model: LinearOdeModel, scheme: SchemeKind, dt: f64, t_end: f64) -> (Stepper<LinearOdeModel>, Vec<EnergyRecord>) {
    let mut st = Stepper::new(model, [1.0, 0.5], scheme, dt, 1.0);
    let series = st.run_until(t_end).unwrap();
    (st, series)
}

fn err_at_end(model: LinearOdeModel, scheme: SchemeKind, dt: f64) -> f64 {
    let (st, _) = run(model, scheme, dt, 1.0);
    let ex = model.exact([1.0, 0.5], st.history.t);
    let c = st.history.current;
    ((c[0] - ex[0]).powi(2) + (c[1] - ex[1]).powi(2)).sqrt()
}

#[test]
fn exact_solution_is_a_damped_rotation() {
    let ex = ODE.exact([1.0, 0.0], std::f64::consts::FRAC_PI_2 / 3.0);
    let d = (-std::f64::consts::FRAC_PI_2 / 3.0).exp();
    assert!((ex[0]).abs() < 1e-15 && (ex[1] + d).abs() < 1e-15);
}

#[test]
fn crank_nicolson_damping_is_the_trapezoid_factor() {
    let dt = 0.1;
    let (st, _) = run(DAMP, SchemeKind::CrankNicolson, dt, 0.1);
    let f = (1.0 - DAMP.lambda * dt / 2.0) / (1.0 + DAMP.lambda * dt / 2.0);
    assert!((st.history.current[0] - f).abs() < 1e-15);
    assert!((st.history.current[1] - 0.5 * f).abs() < 1e-15);
    // without reversible forcing the scalar relaxes by the same rule
    let g = (1.0 - dt / 2.0) / (1.0 + dt / 2.0);
    assert!((st.history.s - g).abs() < 1e-15);
}

#[test]
fn bdf2_satisfies_its_recurrence() {
    let dt = 0.05;
    let mut st = Stepper::new(DAMP, [1.0, -0.3], SchemeKind::Bdf2, dt, 1.0);
    let mut levels = vec![st.history.current];
    for _ in 0..6 {
        st.step().unwrap();
        levels.push(st.history.current);
    }
    for w in levels.windows(3) {
        for c in 0..2 {
            let lhs = (3.0 * w[2][c] - 4.0 * w[1][c] + w[0][c]) / (2.0 * dt);
            assert!((lhs + DAMP.lambda * w[2][c]).abs() < 1e-13, "{lhs}");
        }
    }
}

#[test]
fn bdf2_first_step_is_crank_nicolson() {
    let (a, _) = run(ODE, SchemeKind::Bdf2, 0.1, 0.1);
    let (b, _) = run(ODE, SchemeKind::CrankNicolson, 0.1, 0.1);
    assert_eq!(a.history.current, b.history.current);
    assert_eq!(a.history.s, b.history.s);
}

#[test]
fn second_order_against_the_exact_solution() {
    for scheme in [SchemeKind::CrankNicolson, SchemeKind::Bdf2] {
        let errs: Vec<f64> = (0..5).map(|k| err_at_end(ODE, scheme, 0.01 / 2f64.powi(k))).collect();
        for w in errs.windows(2) {
            let o = observed_order(w[0], w[1]);
            assert!((o - 2.0).abs() < 0.05, "{scheme:?}: order {o}");
        }
    }
}

#[test]
fn implicit_euler_is_first_order() {
    let errs: Vec<f64> = (0..4).map(|k| err_at_end(ODE, SchemeKind::ImplicitEuler, 0.01 / 2f64.powi(k))).collect();
    for w in errs.windows(2) {
        let o = observed_order(w[0], w[1]);
        assert!((o - 1.0).abs() < 0.1, "order {o}");
    }
}

#[test]
fn refinement_driver_reports_order_two() {
    let tables = refine_in_time(0.01, 4, |dt| {
        let (st, _) = run(ODE, SchemeKind::CrankNicolson, dt, 1.0);
        let g = onsager_flow::grid::GridSpec::periodic(4, 1.0).unwrap();
        let f = onsager_flow::grid::ScalarField::from_vec(&g, [st.history.current.to_vec(), vec![0.0; 14]].concat()).unwrap();
        Ok::<_, StepError>(vec![("psi".to_string(), FieldSnapshot::from(f))])
    })
    .unwrap();
    assert_eq!(tables.len(), 1);
    assert!(tables[0].orders_within(1.95, 2.05), "{}", tables[0]);
}

#[test]
fn crank_nicolson_energy_identity_holds() {
    let (_, series) = run(ODE, SchemeKind::CrankNicolson, 0.02, 2.0);
    let rep = assert_energy_monotone(&series, 0.0);
    assert!(rep.monotone);
    assert!(rep.max_identity_residual < 1e-14, "{}", rep.max_identity_residual);
}

#[test]
fn bdf2_energy_decays() {
    let (_, series) = run(ODE, SchemeKind::Bdf2, 0.02, 2.0);
    let rep = assert_energy_monotone(&series[1..], 0.0);
    assert!(rep.monotone);
    assert!(rep.max_identity_excess <= 1e-14);
}

#[test]
fn scalar_tracks_its_exact_decay() {
    let e: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&dt| scalar_tracking_error(&run(ODE, SchemeKind::CrankNicolson, dt, 1.0).1))
        .collect();
    assert!(e[0] / e[1] > 3.5, "{e:?}");
    let (_, s) = run(ODE, SchemeKind::CrankNicolson, 0.1, 0.5);
    for r in s {
        assert!((r.s_exact - (-r.t).exp()).abs() < 1e-15);
    }
}

#[test]
fn scalar_update_trivial_cases() {
    assert_eq!(cn_scalar_update(0.7, 0.0, 0.0).unwrap(), 0.7);
    assert_eq!(cn_scalar_update(0.5, 0.25, 0.5).unwrap(), 1.5);
    assert_eq!(bdf2_scalar_update(0.5, 0.25, 0.5).unwrap(), 1.5);
}

#[test]
fn singular_scalar_update_is_reported() {
    match cn_scalar_update(1.0, 0.0, 1.0) {
        Err(StepError::SingularScalarUpdate { denominator }) => assert_eq!(denominator, 0.0),
        other => panic!("{other:?}"),
    }
    assert!(cn_scalar_update(1.0, 0.0, 1.0 - 1e-9).is_err());
    assert!(cn_scalar_update(1.0, 0.0, 1.0 - 1e-7).is_ok());
}

#[test]
fn invalid_step_inputs_are_rejected() {
    let mut h = History::start([1.0, 0.0]);
    assert!(matches!(step_cn(&ODE, &mut h, 0.0, 1.0), Err(StepError::InvalidInput(_))));
    assert!(matches!(step_cn(&ODE, &mut h, 0.1, -1.0), Err(StepError::InvalidInput(_))));
    assert_eq!(h.steps, 0);
}

#[test]
fn step_context_weights() {
    let c = StepContext::new(SchemeKind::CrankNicolson, 0.1, 1.0, 2.0);
    assert_eq!((c.extrapolation(), c.base(), c.completion()), ((1.5, -0.5), (1.0, 0.0), (2.0, -1.0)));
    assert!((c.t_star() - 1.05).abs() < 1e-15);
    assert!((c.scalar_denominator() - 20.5).abs() < 1e-12);
    assert!((c.exp_factor - (1.05f64 / 2.0).exp()).abs() < 1e-15);
    let b = StepContext::new(SchemeKind::Bdf2, 0.1, 1.0, 2.0);
    assert_eq!((b.extrapolation(), b.completion()), ((2.0, -1.0), (1.0, 0.0)));
    assert!((b.base().0 - 4.0 / 3.0).abs() < 1e-15 && (b.base().1 + 1.0 / 3.0).abs() < 1e-15);
    assert!((b.t_star() - 1.1).abs() < 1e-15);
    assert!((b.mass - 15.0).abs() < 1e-12);
}

#[test]
fn damped_start_replaces_the_first_step() {
    let (dt, k) = (0.1, 4);
    let mut h = History::start([1.0, 0.5]);
    let o = damped_start(&DAMP, &mut h, dt, 1.0, k).unwrap();
    assert_eq!(o.scheme, SchemeKind::ImplicitEuler);
    assert_eq!((h.steps, h.previous, h.s_prev), (1, [1.0, 0.5], 1.0));
    assert!((h.t - dt).abs() < 1e-15);
    let f = (1.0 + DAMP.lambda * dt / k as f64).powi(-(k as i32));
    assert!((h.current[0] - f).abs() < 1e-14);
    assert!(damped_start(&DAMP, &mut h, dt, 1.0, k).is_err());
}

#[test]
fn damped_start_keeps_crank_nicolson_second_order() {
    let errs: Vec<f64> = (0..4)
        .map(|k| {
            let dt = 0.05 / 2f64.powi(k);
            let mut st = Stepper::new(ODE, [1.0, 0.5], SchemeKind::CrankNicolson, dt, 1.0).with_damped_start(2);
            st.run_until(1.0).unwrap();
            let ex = ODE.exact([1.0, 0.5], st.history.t);
            ((st.history.current[0] - ex[0]).powi(2) + (st.history.current[1] - ex[1]).powi(2)).sqrt()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(observed_order(w[0], w[1]) > 1.8, "{errs:?}");
    }
}

#[test]
fn scalar_energy_forms() {
    assert_eq!(scalar_energy(SchemeKind::CrankNicolson, 2.0, 5.0), 2.0);
    assert_eq!(scalar_energy(SchemeKind::Bdf2, 1.0, 1.0), 0.5);
    assert_eq!(scalar_energy(SchemeKind::Bdf2, 2.0, 1.0), 0.25 * (4.0 + 9.0));
}

proptest! {
    #[test]
    fn scalar_update_solves_its_equation(c in -10.0f64..10.0, p1 in -10.0f64..10.0, p2 in -10.0f64..0.99) {
        let s = cn_scalar_update(c, p1, p2).unwrap();
        let scale = 1.0 + c.abs() + p1.abs() + (s * p2).abs();
        prop_assert!((s - (c + p1 + s * p2)).abs() <= 1e-14 * scale * 4.0);
    }

    #[test]
    fn crank_nicolson_identity_for_any_rotation(lambda in 0.0f64..5.0, omega in -10.0f64..10.0, dt in 1e-3f64..0.2) {
        let m = LinearOdeModel { lambda, omega };
        let mut st = Stepper::new(m, [0.3, -1.1], SchemeKind::CrankNicolson, dt, 0.7);
        let series = st.run_until(10.0 * dt).unwrap();
        let rep = assert_energy_monotone(&series, 1e-14);
        prop_assert!(rep.monotone);
        prop_assert!(rep.max_identity_residual < 1e-13);
    }
}
