use frontspeed_core::eigen::{principal_eigenpair, EigenOperatorSpec};
use frontspeed_core::io::{read_snapshot, write_snapshot};
use frontspeed_core::model::{Direction, GridSpec, PeriodicCell, PeriodicMedium, ScalarField, Sym2};
use frontspeed_core::nonlinearity::Nonlinearity;
use frontspeed_core::optimize::{fit_line, golden_section};
use frontspeed_core::simulate::{comparison_run, InitialData, SimState, Simulator, StepDiagnostics};
use frontspeed_core::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_principle_holds(
        seed in prop::collection::vec((0.0..0.9f64, 0.0..0.3f64), 32),
        rate in 0.2..3.0f64,
    ) {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, rate).unwrap();
        let grid = GridSpec::periodic_cell(&cell, &[32]).unwrap();
        let sim = Simulator::new(&m, &nl, grid).unwrap();
        let low: Vec<f64> = seed.iter().map(|p| p.0).collect();
        let high: Vec<f64> = seed.iter().map(|p| (p.0 + p.1).min(1.0)).collect();
        let r = comparison_run(
            &sim,
            &InitialData::Custom { values: low },
            &InitialData::Custom { values: high },
            0.5,
        )
        .unwrap();
        prop_assert!(r.min_difference >= -1e-12, "{r:?}");
    }

    #[test]
    fn periodic_samples_wrap(i in -40isize..40, j in -40isize..40) {
        let cell = PeriodicCell::new(&[1.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(cell, &[8, 8], |x| x[0] + 10.0 * x[1]).unwrap();
        let s = f.samples();
        prop_assert_eq!(s.node(i, j), s.node(i + 8, j));
        prop_assert_eq!(s.node(i, j), s.node(i, j - 16));
        // evaluation is periodic in space as well
        let x = [0.3 + i as f64 * 0.01, 0.7 + j as f64 * 0.01];
        prop_assert!((f.evaluate(x) - f.evaluate([x[0] - 3.0, x[1] + 4.0])).abs() < 1e-12);
    }

    #[test]
    fn non_elliptic_tensors_are_rejected(a in 0.1..4.0f64, b in 0.1..4.0f64, k in 1.01..3.0f64) {
        let cell = PeriodicCell::unit(2).unwrap();
        // off-diagonal beyond sqrt(ab) makes the form indefinite
        let c = k * (a * b).sqrt();
        let m = Sym2 { xx: a, xy: c, yy: b };
        let err = PeriodicMedium::constant(cell, m).unwrap_err();
        prop_assert!(matches!(err, Error::Ellipticity(_)), "{err:?}");
    }

    #[test]
    fn directions_are_unit(angle in -10.0..10.0f64) {
        let n = Direction::from_angle(angle);
        let p = n.as_point();
        prop_assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-14);
        prop_assert!(Direction::new(&[2.0 * p[0], 2.0 * p[1]]).is_err());
        prop_assert!(Direction::new(&[p[0], p[1]]).is_ok());
    }

    #[test]
    fn golden_section_finds_quadratic_minimum(x0 in -3.0..3.0f64, s in 0.1..10.0f64) {
        let r = golden_section(|x: f64| Ok::<_, ()>(s * (x - x0).powi(2)), -5.0, 5.0, 1e-9, 200).unwrap();
        prop_assert!((r.x - x0).abs() < 1e-6);
        prop_assert!(!r.at_lower && !r.at_upper);
    }

    #[test]
    fn fit_line_recovers_exact_lines(slope in -5.0..5.0f64, b in -5.0..5.0f64) {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|t| slope * t + b).collect();
        let f = fit_line(&t, &y).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-10);
        prop_assert!((f.intercept - b).abs() < 1e-10);
        prop_assert!(f.rms < 1e-10);
    }

    #[test]
    fn snapshot_round_trip(values in prop::collection::vec(-1e3..1e3f64, 16), t in 0.0..100.0f64) {
        let cell = PeriodicCell::unit(1).unwrap();
        let grid = GridSpec::periodic_cell(&cell, &[16]).unwrap();
        let state = SimState { t, u: values, grid, diagnostics: StepDiagnostics::default() };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &state, "prop").unwrap();
        let (h, back) = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(h.t, t);
        prop_assert_eq!(back.u, state.u);
        prop_assert_eq!(back.grid, state.grid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn homogeneous_eigenvalue_closed_form(
        axx in 0.5..3.0f64,
        ayy in 0.5..3.0f64,
        angle in 0.0..std::f64::consts::TAU,
        lambda in 0.0..2.0f64,
        v in 0.0..2.0f64,
    ) {
        let cell = PeriodicCell::unit(2).unwrap();
        let a = Sym2::diag(axx, ayy);
        let m = PeriodicMedium::constant(cell, a).unwrap();
        let pot = ScalarField::constant(cell, &[4, 4], v).unwrap();
        let n = Direction::from_angle(angle);
        let r = principal_eigenpair(&EigenOperatorSpec::new(&m, n, lambda, &[16, 16]).with_potential(&pot)).unwrap();
        let expected = -(lambda * lambda * a.quad(n.as_point()) + v);
        prop_assert!((r.mu0 - expected).abs() < 1e-6, "{} vs {}", r.mu0, expected);
    }
}
