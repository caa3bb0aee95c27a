use geoequiv::constructors::{generate, recover_betas, GENERATORS};
use geoequiv::geometry::{structure_functions, GeometryModel, Metric};
use geoequiv::hamiltonian::{hamiltonian, initial_covector, integrate, CovectorPoint, IntegratorConfig};
use geoequiv::pair::{transition_operator, AdaptedFrame};
use geoequiv::parse;
use geoequiv::verifier::orbital_map;
use proptest::prelude::*;
use serde_json::json;

const NAMES: [&str; 3] = ["x", "y", "z"];

/// Expression sources defined on all of R³.
fn source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0.5f64..3.0).prop_map(|c| format!("{c:.4}")),
        prop::sample::select(NAMES.to_vec()).prop_map(String::from),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(cos({a}))")),
            inner.clone().prop_map(|a| format!("log(2 + sin({a}))")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a}) / (3 + cos({b}))")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn model(kind: &str) -> GeometryModel {
    generate(kind, &json!({})).unwrap()
}

/// Inner point of the model domain from unit-cube coordinates.
fn inside(model: &GeometryModel, s: &[f64]) -> Vec<f64> {
    let c = model.domain().center();
    let h = 0.5 * model.domain().scale();
    let mut q: Vec<f64> = c.iter().zip(s.iter().cycle()).map(|(c, s)| c + 0.5 * h * s).collect();
    if !model.domain().contains(&q) {
        // annuli: move radially into the band
        let r = (q[0] * q[0] + q[1] * q[1]).sqrt().max(1e-12);
        let target = 0.25;
        q[0] *= target / r;
        q[1] *= target / r;
    }
    q
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse_to_the_same_function(src in source(), x in point()) {
        let e = parse(&src, &NAMES).unwrap();
        let again = parse(&e.to_source(&NAMES), &NAMES).unwrap();
        prop_assert!(close(e.eval(&x).unwrap(), again.eval(&x).unwrap(), 1e-12));
    }

    #[test]
    fn derivatives_match_finite_differences(src in source(), x in point(), k in 0usize..3) {
        let e = parse(&src, &NAMES).unwrap();
        let d = e.differentiate(k).eval(&x).unwrap();
        let fd = e.finite_difference(&x, k, 1e-5).unwrap();
        prop_assert!(close(d, fd, 1e-6), "{src}: {d} vs {fd}");
    }

    #[test]
    fn structure_functions_are_antisymmetric(kind in prop::sample::select(GENERATORS.to_vec()), s in point()) {
        let m = model(kind);
        let q = inside(&m, &s);
        let c = structure_functions(&m).at(&q).unwrap();
        prop_assert!(c.antisymmetry_residual() <= 1e-12 * c.max_abs().max(1.0));
    }

    #[test]
    fn scaling_g2_scales_the_spectrum(kind in prop::sample::select(GENERATORS.to_vec()), s in point(), c in 0.1f64..10.0) {
        let m = model(kind);
        let q = inside(&m, &s);
        let base = transition_operator(&m, &q).unwrap().eigenvalues;
        let scaled = transition_operator(&m.scale_gram2(c), &q).unwrap().eigenvalues;
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!(close(c * a, *b, 1e-10));
        }
    }

    #[test]
    fn swapping_the_pair_inverts_the_spectrum(kind in prop::sample::select(GENERATORS.to_vec()), s in point()) {
        let m = model(kind);
        let q = inside(&m, &s);
        let ev = transition_operator(&m, &q).unwrap().eigenvalues;
        let inv = transition_operator(&m.swapped(), &q).unwrap().eigenvalues;
        for (a, b) in ev.iter().zip(inv.iter().rev()) {
            prop_assert!(close(a * b, 1.0, 1e-10));
        }
    }

    #[test]
    fn beta_recovery_inverts_the_eigenvalue_map(betas in prop::collection::vec(0.2f64..5.0, 2..5)) {
        let prod: f64 = betas.iter().product();
        let lambdas: Vec<f64> = betas.iter().map(|b| b * prod).collect();
        for (got, want) in recover_betas(&lambdas).iter().zip(&betas) {
            prop_assert!(close(*got, *want, 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flows_conserve_the_hamiltonian(
        kind in prop::sample::select(vec!["dini", "heisenberg", "beltrami", "quasi-contact"]),
        s in point(),
        dir in prop::collection::vec(-1.0f64..1.0, 4),
        second in any::<bool>(),
    ) {
        let m = model(kind);
        let q = inside(&m, &s);
        let metric = if second { Metric::Second } else { Metric::First };
        let coef: Vec<f64> = dir.iter().take(m.rank()).copied().collect();
        prop_assume!(coef.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let f = m.frame_matrix(&q).unwrap();
        let v: Vec<f64> = (0..m.dim()).map(|r| (0..m.rank()).map(|i| f[(r, i)] * coef[i]).sum()).collect();
        let lambda = initial_covector(&m, metric, &q, &v, &vec![0.3; m.corank()]).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = integrate(&m, metric, &lambda, 0.1, &cfg).unwrap();
        prop_assert!(traj.energy_drift() <= 10.0 * cfg.tol * 0.1);
    }

    #[test]
    fn orbital_image_lies_on_the_second_level_set(
        kind in prop::sample::select(vec!["levi-civita", "dini", "heisenberg"]),
        s in point(),
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        transverse in -2.0f64..2.0,
    ) {
        let m = model(kind);
        let q = inside(&m, &s);
        let frame = AdaptedFrame::new(&m, &q).unwrap();
        let pt = frame.at(&q).unwrap();
        let mut u: Vec<f64> = dir.iter().take(m.rank()).copied().collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-2);
        u.iter_mut().for_each(|x| *x /= norm);
        u.extend(std::iter::repeat_n(transverse, m.corank()));
        let lambda = CovectorPoint::new(q.clone(), pt.covector(&u).unwrap());
        prop_assert!(close(hamiltonian(&m, Metric::First, &lambda).unwrap(), 0.5, 1e-12));
        match orbital_map(&frame, &lambda) {
            Ok(img) => prop_assert!(close(img.h2, 0.5, 1e-9), "h2 = {}", img.h2),
            Err(geoequiv::verifier::VerifyError::Singular { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
