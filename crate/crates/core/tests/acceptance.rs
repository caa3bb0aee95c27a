//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::Instant;

use geoequiv::constructors::{
    build_dini, build_euclidean, build_heisenberg, generate, levi_civita_pair, quasi_contact_pair, recover_betas,
    DiniSpec, HeisenbergSpec, LeviCivitaBlock, LeviCivitaPair, LeviCivitaSpec, QuasiContactSpec, GENERATORS,
};
use geoequiv::geometry::{Domain, GeometryModel, Metric};
use geoequiv::hamiltonian::{integrate, CovectorPoint, IntegratorConfig};
use geoequiv::pair::{
    fiber_hp_intrinsic, fiber_r, first_divisibility, regularity_probe, second_divisibility, transition_operator,
    AdaptedFrame, DIVISIBILITY_TOL,
};
use geoequiv::verifier::{chord_deviation, verify_equivalence, EquivalenceReport, SampleStatus, Verdict, VerifyConfig};
use geoequiv::{parse, ScalarExpr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn verify(model: &GeometryModel, t: f64) -> (EquivalenceReport, f64) {
    let cfg = VerifyConfig {
        samples: 50,
        seed: 7,
        t,
        tol_curve: 1e-6,
        ..Default::default()
    };
    let start = Instant::now();
    let rep = verify_equivalence(model, &cfg).expect("verifier runs");
    (rep, start.elapsed().as_secs_f64())
}

fn summary(name: &str, rep: &EquivalenceReport, secs: f64) -> String {
    format!(
        "{name}: {:?} {}/{} max dev {:.1e} in {secs:.1}s",
        rep.verdict, rep.accepted, rep.config.samples, rep.max_deviation
    )
}

fn random_points(model: &GeometryModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(q) = model.domain().sample(&mut rng) {
            out.push(q);
        }
    }
    out
}

fn lc2() -> LeviCivitaPair {
    levi_civita_pair(&LeviCivitaSpec::default()).unwrap()
}

fn lc3() -> LeviCivitaPair {
    levi_civita_pair(&LeviCivitaSpec {
        blocks: vec![
            LeviCivitaBlock {
                metric: vec![vec!["1".into(), "0".into()], vec!["0".into(), "1".into()]],
                beta: "1".into(),
            },
            LeviCivitaBlock {
                metric: vec![vec!["1".into()]],
                beta: "2 + x3/10".into(),
            },
        ],
        ..Default::default()
    })
    .unwrap()
}

fn heisenberg(factor: &str) -> GeometryModel {
    build_heisenberg(&HeisenbergSpec {
        factor: factor.into(),
        ..Default::default()
    })
    .unwrap()
}

fn scaled_euclidean(factor: &str, only_first: bool) -> GeometryModel {
    let e = build_euclidean(2).unwrap();
    let f = parse(factor, &e.coord_refs()).unwrap();
    let g = vec![
        vec![f.clone(), ScalarExpr::zero()],
        vec![ScalarExpr::zero(), if only_first { ScalarExpr::one() } else { f }],
    ];
    e.with_gram2(g).unwrap()
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, pair) in [("n=2", lc2()), ("n=3", lc3())] {
        let (rep, secs) = verify(&pair.model, 0.3);
        pass &= rep.verdict == Verdict::Pass && secs < 60.0;
        lines.push(summary(name, &rep, secs));
    }
    Outcome::new(pass, lines.join("; "))
}

fn criterion_2() -> Outcome {
    let flat = build_dini(&DiniSpec {
        beta1: "1".into(),
        beta2: "2".into(),
        ..Default::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = IntegratorConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let q = vec![rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
        let p = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        for metric in [Metric::First, Metric::Second] {
            let traj = integrate(&flat, metric, &CovectorPoint::new(q.clone(), p.clone()), 0.3, &cfg).unwrap();
            worst = worst.max(chord_deviation(traj.positions()));
        }
    }
    let (rep, secs) = verify(&build_dini(&DiniSpec::default()).unwrap(), 0.3);
    Outcome::new(
        worst < 1e-8 && rep.verdict == Verdict::Pass,
        format!("flat chord deviation {worst:.1e}; {}", summary("beta 1+x1/10, 2+x2/10", &rep, secs)),
    )
}

/// Largest `|R_j coefficient|` at `q`, or `None` where `R_j` is undefined.
fn max_r_coefficient(model: &GeometryModel, q: &[f64]) -> Option<f64> {
    let pt = AdaptedFrame::new(model, q).ok()?.at(q).ok()?;
    let mut worst: f64 = 0.0;
    for j in 0..model.rank() {
        let r = fiber_r(model, &pt, j).ok()?;
        worst = worst.max(r.coefficients().iter().fold(0.0, |a, c| a.max(c.abs())));
    }
    Some(worst)
}

fn criterion_3() -> Outcome {
    let dini = build_dini(&DiniSpec::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model) in [("lc2", lc2().model), ("lc3", lc3().model), ("dini", dini)] {
        let mut worst: f64 = 0.0;
        for q in random_points(&model, 100, 3) {
            match max_r_coefficient(&model, &q) {
                Some(v) => worst = worst.max(v),
                None => {
                    pass = false;
                    worst = f64::INFINITY;
                }
            }
        }
        pass &= worst < 1e-9;
        parts.push(format!("{name} max|R| {worst:.1e}"));
    }
    let perturbed = scaled_euclidean("1 + x1^2", false);
    let worst = perturbed
        .domain()
        .grid()
        .iter()
        .filter_map(|q| max_r_coefficient(&perturbed, q))
        .fold(0.0, f64::max);
    pass &= worst > 1e-3;
    parts.push(format!("(1+x^2)G1 max|R| {worst:.2}"));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for kind in GENERATORS {
        let model = generate(kind, &json!({})).unwrap();
        let mut bad = 0;
        for q in random_points(&model, 100, 4) {
            let held = AdaptedFrame::new(&model, &q)
                .and_then(|f| f.at(&q))
                .and_then(|pt| first_divisibility(&model, &pt, DIVISIBILITY_TOL))
                .map(|fd| {
                    worst = worst.max(fd.residual);
                    fd.holds && fd.residual < 1e-8
                })
                .unwrap_or(false);
            if !held {
                bad += 1;
            }
        }
        if bad > 0 {
            pass = false;
            failures.push(format!("{kind}: {bad}"));
        }
    }
    let counter = scaled_euclidean("1 + x1^2", true);
    let q = [1.0, 0.0];
    let pt = AdaptedFrame::new(&counter, &q).unwrap().at(&q).unwrap();
    let fd = first_divisibility(&counter, &pt, DIVISIBILITY_TOL).unwrap();
    // hand value: h1(P) = 2 u_x^3 with P = 2 u_x^2 + u_y^2, u_x the α² = 2 direction
    let hp = fiber_hp_intrinsic(&counter, &pt).unwrap();
    let ix = (0..2).max_by(|a, b| pt.alpha2[*a].total_cmp(&pt.alpha2[*b])).unwrap();
    let mut e = [0.0; 2];
    e[ix] = 1.0;
    let sign = hp.eval(&e).signum();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut hand: f64 = 0.0;
    for _ in 0..20 {
        let u = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        hand = hand.max((hp.eval(&u) - sign * 2.0 * u[ix].powi(3)).abs());
    }
    pass &= !fd.holds && fd.residual > 0.1 && hand < 1e-10;
    Outcome::new(
        pass,
        format!(
            "max residual over {} generators {worst:.1e}{}; counterexample residual {:.4} (hand formula error {hand:.1e})",
            GENERATORS.len(),
            if failures.is_empty() { String::new() } else { format!(" failing {failures:?}") },
            fd.residual
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for factor in ["0.5", "2"] {
        let (rep, secs) = verify(&heisenberg(factor), 0.3);
        pass &= rep.verdict == Verdict::Pass;
        parts.push(summary(&format!("c={factor}"), &rep, secs));
    }
    let conformal = heisenberg("1 + x^2 + y^2");
    let (rep, secs) = verify(&conformal, 0.3);
    pass &= rep.verdict.exit_code() == 2;
    parts.push(summary("1+x^2+y^2", &rep, secs));
    let probes = conformal.domain().probe_points(0);
    let failing = probes
        .iter()
        .filter(|q| {
            AdaptedFrame::new(&conformal, q)
                .and_then(|f| f.at(q))
                .and_then(|pt| second_divisibility(&pt, DIVISIBILITY_TOL))
                .map(|s| !s.holds)
                .unwrap_or(false)
        })
        .count();
    let share = failing as f64 / probes.len() as f64;
    pass &= share >= 0.9;
    parts.push(format!("second divisibility fails at {failing}/{} probe points", probes.len()));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let qc = quasi_contact_pair(&QuasiContactSpec::default()).unwrap();
    let points = qc.model.domain().probe_points(6);
    let report = qc.conditions(&points).unwrap();
    let structural = report
        .integrability
        .max(report.leaf_invariance)
        .max(report.d1_equals_d2);
    let lengths = report.lg1.max(report.lg2).max(report.length2);
    let (rep, secs) = verify(&qc.model, 0.3);
    Outcome::new(
        structural < 1e-10 && lengths < 1e-10 && rep.verdict == Verdict::Pass && secs < 120.0,
        format!(
            "structural {structural:.1e}, lG2/length2 {lengths:.1e}; {}",
            summary("verify", &rep, secs)
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ["gendini1", "gendini2"] {
        let (rep, secs) = verify(&generate(kind, &json!({})).unwrap(), 0.05);
        pass &= rep.verdict == Verdict::Pass;
        parts.push(summary(kind, &rep, secs));
    }
    let case2 = generate("gendini2", &json!({})).unwrap();
    let mut eig: f64 = 0.0;
    for q in random_points(&case2, 50, 7) {
        let r2 = q[0] * q[0] + q[1] * q[1];
        let ev = transition_operator(&case2, &q).unwrap().eigenvalues;
        let hand = [1.0 + r2, (1.0 + r2).powi(2)];
        for (a, b) in ev.iter().zip(hand) {
            eig = eig.max(((a - b) / b).abs());
        }
    }
    pass &= eig < 1e-8;
    let wide = case2.with_domain(Domain::cube(2, 0.5)).unwrap();
    let radius = 0.05;
    let centres: [[f64; 2]; 6] = [[0.0, 0.0], [0.03, -0.02], [0.3, 0.0], [0.0, 0.25], [-0.2, -0.2], [0.1, 0.1]];
    let mut wrong = Vec::new();
    for c in centres {
        let contains_origin = (c[0] * c[0] + c[1] * c[1]).sqrt() <= radius;
        let regular = regularity_probe(&wide, &c, radius).unwrap().regular;
        if regular == contains_origin {
            wrong.push(c);
        }
    }
    pass &= wrong.is_empty();
    parts.push(format!("eigenvalue rel err {eig:.1e}; regularity misclassified {wrong:?}"));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let block = |beta: &str| LeviCivitaBlock {
        metric: vec![vec!["1".into()]],
        beta: beta.into(),
    };
    let three = levi_civita_pair(&LeviCivitaSpec {
        blocks: vec![block("1 + x1/10"), block("2 + x2/10"), block("3 + x3/10")],
        ..Default::default()
    })
    .unwrap();
    let mut worst: f64 = 0.0;
    for pair in [lc2(), lc3(), three] {
        for q in random_points(&pair.model, 50, 8) {
            let spectrum = transition_operator(&pair.model, &q).unwrap();
            let lambdas: Vec<f64> = spectrum.clusters.iter().map(|c| spectrum.eigenvalues[c[0]]).collect();
            // clusters are ascending; blocks are matched by sorting the true β
            let mut truth = pair.betas_at(&q).unwrap();
            truth.sort_by(f64::total_cmp);
            let got = recover_betas(&lambdas);
            if got.len() != truth.len() {
                worst = f64::INFINITY;
                continue;
            }
            for (g, t) in got.iter().zip(&truth) {
                worst = worst.max(((g - t) / t).abs());
            }
        }
    }
    Outcome::new(worst < 1e-6, format!("max relative error {worst:.1e} over 150 points"))
}

/// Random expression source over `x, y, z` whose domain is all of R³.
fn random_source(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..4) {
            0 => format!("{:.3}", rng.random_range(0.5..2.0)),
            k => ["x", "y", "z"][k - 1].to_string(),
        };
    }
    let a = random_source(rng, depth - 1);
    match rng.random_range(0..10) {
        0 => format!("sin({a})"),
        1 => format!("cos({a})"),
        2 => format!("exp(sin({a}))"),
        3 => format!("log(1 + ({a})^2)"),
        4 => format!("sqrt(2 + cos({a}))"),
        5 => format!("({a})^{}", rng.random_range(2..4)),
        6 => format!("({a}) + ({})", random_source(rng, depth - 1)),
        7 => format!("({a}) - ({})", random_source(rng, depth - 1)),
        8 => format!("({a}) * ({})", random_source(rng, depth - 1)),
        _ => format!("({a}) / (2 + sin({}))", random_source(rng, depth - 1)),
    }
}

fn criterion_9() -> Outcome {
    let models = [
        ("lc2", lc2().model),
        ("dini", build_dini(&DiniSpec::default()).unwrap()),
        ("heisenberg c=2", heisenberg("2")),
        ("heisenberg conformal", heisenberg("1 + x^2 + y^2")),
        ("quasi-contact", quasi_contact_pair(&QuasiContactSpec::default()).unwrap().model),
    ];
    let mut energy_ok = true;
    let mut stable = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for (name, model) in &models {
        let base = VerifyConfig {
            samples: 50,
            seed: 9,
            ..Default::default()
        };
        let halved = VerifyConfig {
            integrator: IntegratorConfig::with_tol(base.integrator.tol / 2.0),
            ..base
        };
        let a = verify_equivalence(model, &base).unwrap();
        let b = verify_equivalence(model, &halved).unwrap();
        for (rep, cfg) in [(&a, &base), (&b, &halved)] {
            let bound = 10.0 * cfg.integrator.tol * cfg.t;
            for s in rep.samples.iter().filter(|s| s.status == SampleStatus::Accepted) {
                worst_ratio = worst_ratio.max(s.energy_drift / bound);
                energy_ok &= s.energy_drift <= bound;
            }
        }
        if a.verdict != b.verdict {
            stable.push(format!("{name}: {:?} vs {:?}", a.verdict, b.verdict));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let names = ["x", "y", "z"];
    let mut worst_diff: f64 = 0.0;
    let cases = 200;
    for _ in 0..cases {
        let src = random_source(&mut rng, 4);
        let e = parse(&src, &names).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        for k in 0..3 {
            let d = e.differentiate(k).eval(&x).unwrap();
            let fd = e.finite_difference(&x, k, 1e-5).unwrap();
            worst_diff = worst_diff.max((d - fd).abs() / d.abs().max(1.0));
        }
    }
    Outcome::new(
        energy_ok && stable.is_empty() && worst_diff < 1e-6,
        format!(
            "energy drift at most {worst_ratio:.1e} of 10·tol·T; derivative rel err {worst_diff:.1e} over {cases} expressions; verdict changes {stable:?}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("levi-civita soundness", criterion_1),
        ("dini fixtures", criterion_2),
        ("riemannian characterization", criterion_3),
        ("first divisibility", criterion_4),
        ("contact rigidity", criterion_5),
        ("quasi-contact classification", criterion_6),
        ("generalized dini", criterion_7),
        ("intrinsic beta recovery", criterion_8),
        ("numerical hygiene", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let out = check();
        if !out.pass {
            failed += 1;
        }
        println!("{} {} {name}: {}", if out.pass { "PASS" } else { "FAIL" }, k + 1, out.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
