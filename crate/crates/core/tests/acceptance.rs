//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that all of them passed.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use ppz_core::builtins::{builtin, BuiltinOptions};
use ppz_core::cox::{
    draw_k, envelope, grid_magnitudes, grid_points, mean_intensity_closed_form,
    mean_intensity_empirical, random_intensity_draws, GammaParams,
};
use ppz_core::geometry::Window;
use ppz_core::ppz::{
    expected_count_mc, expected_count_riemann, realize_pattern, Intensity, PpzConfig,
};
use ppz_core::repro::{run_case, Verdict};
use ppz_core::sampling::RngState;
use ppz_core::target::TargetFunction;
use rayon::ThreadPoolBuilder;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &str) -> Verdict {
    run_case(id, 1.0).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn summarize(vs: &[Verdict]) -> (bool, String) {
    let pass = vs.iter().all(|v| v.pass);
    let mut parts = Vec::new();
    for v in vs {
        let failed: Vec<String> = v
            .failed_checks()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        let note = match (&v.error, failed.is_empty(), v.timed_out) {
            (Some(e), _, _) => format!("error {e}"),
            (None, _, true) => "over budget".to_string(),
            (None, true, false) => "ok".to_string(),
            (None, false, false) => failed.join("; "),
        };
        parts.push(format!("{} {:.1}s {}", v.id, v.wall_time, note));
    }
    (pass, parts.join(", "))
}

fn from_cases(id: u32, title: &'static str, vs: &[Verdict]) -> Outcome {
    let (pass, detail) = summarize(vs);
    Outcome {
        id,
        title,
        pass,
        detail,
    }
}

/// A target whose magnitude is the first coordinate, so a "point" carries
/// its own magnitude.
fn magnitude_as_coordinate() -> TargetFunction {
    TargetFunction::real_fn(1, |x| x[0])
}

fn thinning(seed: u64) -> Outcome {
    let f = magnitude_as_coordinate();
    let cfg = PpzConfig {
        k: 10.0,
        q: 0.5,
        tol: 0.1,
        seed,
        ..Default::default()
    };
    let trials = 10_000usize;
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, p) in [(0.0, 1.0), (0.01, (-1.0f64).exp()), (0.5, 0.0)] {
        let coords = vec![m; trials];
        let mut rng = RngState::new(seed, 7);
        let r = realize_pattern(&f, &coords, &cfg, &mut rng, false).unwrap();
        let hits = r.accepted().count() as f64;
        let freq = hits / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let ok = (freq - p).abs() <= 3.0 * sigma;
        pass &= ok;
        parts.push(format!(
            "m={m}: {freq:.4} vs {p:.4} (3 sigma {:.4})",
            3.0 * sigma
        ));
    }
    Outcome {
        id: 10,
        title: "thinning acceptance frequencies",
        pass,
        detail: parts.join(", "),
    }
}

fn intensity_measure(seed: u64) -> Outcome {
    let f = builtin("cos", &BuiltinOptions::default()).unwrap();
    let w = Window::interval(0.0, 2.0 * PI).unwrap();
    let lam = Intensity::new(10.0, 0.5);
    let riemann = expected_count_riemann(&f, &w, &lam, 1_000_000).unwrap();
    let mut rng = RngState::new(seed, 11);
    let mc = expected_count_mc(&f, &w, &lam, 1_000_000, &mut rng).unwrap();
    let agree = (riemann - mc.estimate).abs() <= 4.0 * mc.std_error;
    let by_k: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&k| expected_count_riemann(&f, &w, &Intensity::new(k, 0.5), 1_000_000).unwrap())
        .collect();
    let monotone = by_k.windows(2).all(|p| p[1] <= p[0]);
    Outcome {
        id: 11,
        title: "intensity measure cross-check",
        pass: agree && monotone,
        detail: format!(
            "riemann {riemann:.8} vs mc {:.8} (4 se {:.2e}); by K {by_k:.6?}",
            mc.estimate,
            4.0 * mc.std_error
        ),
    }
}

fn cox(seed: u64) -> (Outcome, Vec<String>) {
    let f = builtin("cos", &BuiltinOptions::default()).unwrap();
    let w = Window::interval(-10.0, 10.0).unwrap();
    let gp = GammaParams::new(5.0, 2.0).unwrap();
    let q = 0.5;
    let rng = RngState::new(seed, 13);

    // closed form over the figure's grid
    let grid = grid_points(&w, 201).unwrap();
    let mags = grid_magnitudes(&f, &grid).unwrap();
    let k = draw_k(&gp, 100_000, &rng);
    let emp = mean_intensity_empirical(&mags, &k, q);
    let worst = mags
        .iter()
        .zip(&emp)
        .map(|(&m, &e)| (e - mean_intensity_closed_form(m, q, &gp)).abs())
        .fold(0.0f64, f64::max);

    // envelope at the doubles nearest the zeros of cos in the window
    let zeros: Vec<Vec<f64>> = (-3..3).map(|j| vec![(j as f64 + 0.5) * PI]).collect();
    let draws = random_intensity_draws(&f, zeros, q, &gp, 1000, &rng).unwrap();
    let bands = envelope(&draws, 0.95).unwrap();
    let k_max = draws.k.iter().copied().fold(0.0f64, f64::max);
    let mut unit_band = true;
    let mut deviation = 0.0f64;
    for (b, &m) in bands.iter().zip(&draws.magnitudes) {
        let floor = 1.0 - k_max * m.powf(q);
        for v in [b.lower, b.mean, b.upper] {
            unit_band &= v <= 1.0 && v >= floor;
            deviation = deviation.max(1.0 - v);
        }
    }
    // an exactly representable zero collapses the band to 1
    let line = TargetFunction::real_fn(1, |x| x[0] - 0.25);
    let exact = random_intensity_draws(&line, vec![vec![0.25]], q, &gp, 1000, &rng).unwrap();
    let b = envelope(&exact, 0.95).unwrap()[0];
    let exact_one = (b.lower, b.mean, b.upper) == (1.0, 1.0, 1.0);

    let fingerprint = vec![
        format!("{k:?}"),
        format!("{emp:?}"),
        format!("{:?}", draws.values),
    ];
    let out = Outcome {
        id: 12,
        title: "random intensity closed form and envelope",
        pass: worst <= 1e-2 && unit_band && exact_one,
        detail: format!(
            "max |empirical - closed form| {worst:.2e} over {} grid points; \
             band at cos zeros within {deviation:.1e} of 1 (rounding floor); \
             exact zero band (1,1,1): {exact_one}",
            grid.len()
        ),
    };
    (out, fingerprint)
}

/// Run records of the given cases, as JSON without timing.
fn case_records(ids: &[&str]) -> Vec<String> {
    ids.iter()
        .flat_map(|id| verdict(id).records)
        .map(|r| r.without_timing().to_json())
        .collect()
}

/// Seed-pinned numbers behind criteria 11 and 12.
fn estimator_outputs(seed: u64) -> Vec<String> {
    let f = builtin("cos", &BuiltinOptions::default()).unwrap();
    let w = Window::interval(0.0, 2.0 * PI).unwrap();
    let mut rng = RngState::new(seed, 11);
    let mc = expected_count_mc(&f, &w, &Intensity::new(10.0, 0.5), 1_000_000, &mut rng).unwrap();
    let mut out = vec![serde_json::to_string(&mc).unwrap()];
    out.extend(cox(seed).1);
    out
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(job)
}

const SEED_PINNED: [&str; 17] = [
    "cos-zeros-10it",
    "cos-extrema",
    "sincos-zeros",
    "sincos-extrema",
    "sum-sq-p1",
    "sum-sq-p2",
    "sum-sq-p3",
    "sum-sq-p4",
    "sum-sq-p5",
    "gauss-p1",
    "gauss-p2",
    "gauss-p3",
    "complex-poly-multiplicity",
    "random-poly-10",
    "eta-strip",
    "hard-poly",
    "hard-poly-20seeds",
];

#[test]
fn acceptance_criteria() {
    const SEED: u64 = 0;
    let mut outcomes = Vec::new();

    let cos = verdict("cos-zeros-10it");
    let mut o = from_cases(1, "cos zeros", std::slice::from_ref(&cos));
    o.pass &= cos.wall_time < 30.0;
    outcomes.push(o);

    outcomes.push(from_cases(2, "cos extrema", &[verdict("cos-extrema")]));
    outcomes.push(from_cases(
        3,
        "sincos zeros and extrema",
        &[verdict("sincos-zeros"), verdict("sincos-extrema")],
    ));

    let start = Instant::now();
    let sum_sq: Vec<Verdict> = (1..=5).map(|p| verdict(&format!("sum-sq-p{p}"))).collect();
    let total = start.elapsed().as_secs_f64();
    let mut o = from_cases(4, "multivariate sum of squares", &sum_sq);
    o.pass &= total < 300.0;
    o.detail.push_str(&format!("; total {total:.1}s"));
    outcomes.push(o);

    let gauss: Vec<Verdict> = (1..=3).map(|p| verdict(&format!("gauss-p{p}"))).collect();
    outcomes.push(from_cases(5, "gaussian argmax", &gauss));
    outcomes.push(from_cases(
        6,
        "complex polynomial with multiplicities",
        &[verdict("complex-poly-multiplicity")],
    ));
    outcomes.push(from_cases(
        7,
        "random ten-root polynomial",
        &[verdict("random-poly-10")],
    ));
    outcomes.push(from_cases(8, "eta and zeta strip", &[verdict("eta-strip")]));
    outcomes.push(from_cases(
        9,
        "hard polynomial",
        &[verdict("hard-poly"), verdict("hard-poly-20seeds")],
    ));
    outcomes.push(thinning(SEED));
    outcomes.push(intensity_measure(SEED));
    outcomes.push(cox(SEED).0);

    let one = in_pool(1, || (case_records(&SEED_PINNED), estimator_outputs(SEED)));
    let four = in_pool(4, || (case_records(&SEED_PINNED), estimator_outputs(SEED)));
    // the cheap cases once more, for run-to-run identity
    let cheap = &SEED_PINNED[..12];
    let again = in_pool(4, || (case_records(cheap), estimator_outputs(SEED)));
    let threads_match = one == four;
    let repeat_match = four.0[..again.0.len()] == again.0[..] && four.1 == again.1;
    outcomes.push(Outcome {
        id: 13,
        title: "determinism across runs and thread counts",
        pass: threads_match && repeat_match,
        detail: format!(
            "{} run records and {} estimator outputs; threads 1 vs 4 identical: {threads_match}; \
             repeated run identical: {repeat_match}",
            one.0.len(),
            one.1.len()
        ),
    });

    // straight to the process stdout so the lines survive output capture
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} criterion {}: {} ({})", o.id, o.title, o.detail).unwrap();
    }
    drop(out);
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
