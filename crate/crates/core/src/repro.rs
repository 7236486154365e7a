//! Registry of reference experiments at desk scale, each with pinned seeds
//! and pass/fail expectations.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::appz::{find_extrema, run_adaptive, AdaptiveConfig, AdaptiveError, Zero};
use crate::builtins::{
    builtin, eta_partial, poly_from_roots, sincos, zeta_from_eta, BuiltinOptions, RootSpec,
    DEFAULT_ETA_TERMS,
};
use crate::geometry::Window;
use crate::ppz::PpzConfig;
use crate::report::{FiniteDifference, FunctionDescriptor, RunRecord};
use crate::sampling::RngState;
use crate::target::{FdScheme, TargetFunction};

#[derive(Debug, Error)]
pub enum ReproError {
    #[error("unknown case '{id}'; registered cases: {known}")]
    UnknownCase { id: String, known: String },
    #[error("no registered case matches '{0}'")]
    NoMatch(String),
    #[error("bad pattern '{pattern}': {msg}")]
    Pattern { pattern: String, msg: String },
}

/// One compared expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Distance between observed and expected, where that makes sense.
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
}

impl Check {
    fn within(name: impl Into<String>, delta: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            pass: delta <= tol,
            detail: format!("delta {delta:e} vs tolerance {tol:e}"),
            delta: Some(delta),
            tolerance: Some(tol),
        }
    }

    fn below(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            pass: value < bound,
            detail: format!("{value:e} < {bound:e}"),
            delta: Some(value),
            tolerance: Some(bound),
        }
    }

    fn count(name: impl Into<String>, got: usize, want: usize) -> Check {
        Check {
            name: name.into(),
            pass: got == want,
            detail: format!("got {got}, expected {want}"),
            delta: None,
            tolerance: None,
        }
    }

    fn flag(name: impl Into<String>, pass: bool, detail: String) -> Check {
        Check {
            name: name.into(),
            pass,
            detail,
            delta: None,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub timed_out: bool,
    pub checks: Vec<Check>,
    pub wall_time: f64,
    pub budget: f64,
    pub error: Option<String>,
    /// Run records behind the checks, for determinism comparisons.
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

impl Verdict {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct CaseRun {
    checks: Vec<Check>,
    records: Vec<RunRecord>,
}

type CaseFn = fn() -> Result<CaseRun, AdaptiveError>;

pub struct ReproCase {
    pub id: &'static str,
    pub summary: &'static str,
    /// Seconds, before scaling.
    pub budget: f64,
    /// Excluded from full runs unless asked for.
    pub slow: bool,
    run: CaseFn,
}

macro_rules! case {
    ($id:expr, $summary:expr, $budget:expr, $run:expr) => {
        ReproCase {
            id: $id,
            summary: $summary,
            budget: $budget,
            slow: false,
            run: $run,
        }
    };
}

pub fn registry() -> Vec<ReproCase> {
    vec![
        case!(
            "cos-zeros-10it",
            "cos on [-15,15], 10 iterations",
            30.0,
            cos_zeros
        ),
        case!(
            "cos-extrema",
            "stationary points of cos on [-15,15]",
            60.0,
            cos_extrema
        ),
        case!(
            "sincos-zeros",
            "sin(x/20)+cos^2 x on [-15,15]",
            60.0,
            sincos_zeros
        ),
        case!(
            "sincos-extrema",
            "stationary points of sin(x/20)+cos^2 x",
            60.0,
            sincos_extrema
        ),
        case!("sum-sq-p1", "sum of squares about 0.1, p=1", 60.0, || {
            sum_sq(1)
        }),
        case!("sum-sq-p2", "sum of squares about 0.1, p=2", 60.0, || {
            sum_sq(2)
        }),
        case!("sum-sq-p3", "sum of squares about 0.1, p=3", 60.0, || {
            sum_sq(3)
        }),
        case!("sum-sq-p4", "sum of squares about 0.1, p=4", 60.0, || {
            sum_sq(4)
        }),
        case!("sum-sq-p5", "sum of squares about 0.1, p=5", 60.0, || {
            sum_sq(5)
        }),
        case!("gauss-p1", "Gaussian argmax, p=1", 60.0, || gauss(1)),
        case!("gauss-p2", "Gaussian argmax, p=2", 60.0, || gauss(2)),
        case!("gauss-p3", "Gaussian argmax, p=3", 60.0, || gauss(3)),
        case!(
            "complex-poly-multiplicity",
            "(s-0.5+i)^2 (s-1-0.5i)^3",
            120.0,
            complex_poly
        ),
        case!(
            "random-poly-10",
            "10 random roots in the unit square",
            120.0,
            random_poly
        ),
        case!(
            "eta-strip",
            "eta zeros on 0<sigma<1.3, 13<t<22",
            900.0,
            eta_strip
        ),
        case!("hard-poly", "35(x-3)^5 (x-2)^10 on [0,5]", 60.0, hard_poly),
        case!(
            "hard-poly-20seeds",
            "hard-poly over 20 seeds",
            300.0,
            hard_poly_seeds
        ),
        case!(
            "sincos2d-extrema",
            "stationary points of the product surface on [-5,5]^2",
            600.0,
            sincos2d
        ),
        ReproCase {
            id: "sum-sq-p10",
            summary: "sum of squares about 0.1, p=10, 5 iterations",
            budget: 3600.0,
            slow: true,
            run: sum_sq_p10,
        },
    ]
}

fn known_ids() -> String {
    registry()
        .iter()
        .map(|c| c.id)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs one registered case. Errors only for unknown ids; a failing or
/// erroring run is reported in the verdict.
pub fn run_case(id: &str, budget_scale: f64) -> Result<Verdict, ReproError> {
    let reg = registry();
    let case = reg
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| ReproError::UnknownCase {
            id: id.to_string(),
            known: known_ids(),
        })?;
    Ok(execute(case, budget_scale))
}

fn execute(case: &ReproCase, budget_scale: f64) -> Verdict {
    let start = Instant::now();
    let outcome = (case.run)();
    let wall_time = start.elapsed().as_secs_f64();
    let budget = case.budget * budget_scale;
    let timed_out = wall_time > budget;
    match outcome {
        Ok(run) => Verdict {
            id: case.id.to_string(),
            pass: !timed_out && run.checks.iter().all(|c| c.pass),
            timed_out,
            checks: run.checks,
            wall_time,
            budget,
            error: None,
            records: run.records,
        },
        Err(e) => Verdict {
            id: case.id.to_string(),
            pass: false,
            timed_out,
            checks: Vec::new(),
            wall_time,
            budget,
            error: Some(e.to_string()),
            records: Vec::new(),
        },
    }
}

#[derive(Debug, Clone)]
pub struct RunAllOptions {
    /// Glob over case ids.
    pub only: Option<String>,
    pub include_slow: bool,
    pub budget_scale: f64,
    pub parallel: bool,
}

impl Default for RunAllOptions {
    fn default() -> Self {
        RunAllOptions {
            only: None,
            include_slow: false,
            budget_scale: 1.0,
            parallel: true,
        }
    }
}

/// Ids selected by `opts`, in registry order. An explicit filter may select
/// slow cases.
pub fn select(opts: &RunAllOptions) -> Result<Vec<&'static str>, ReproError> {
    let pattern = match &opts.only {
        Some(p) => Some(glob::Pattern::new(p).map_err(|e| ReproError::Pattern {
            pattern: p.clone(),
            msg: e.to_string(),
        })?),
        None => None,
    };
    let ids: Vec<&'static str> = registry()
        .into_iter()
        .filter(|c| match &pattern {
            Some(p) => p.matches(c.id),
            None => opts.include_slow || !c.slow,
        })
        .map(|c| c.id)
        .collect();
    if ids.is_empty() {
        return Err(ReproError::NoMatch(opts.only.clone().unwrap_or_default()));
    }
    Ok(ids)
}

/// Verdicts in registry order.
pub fn run_all(opts: &RunAllOptions) -> Result<Vec<Verdict>, ReproError> {
    let ids = select(opts)?;
    let reg = registry();
    let cases: Vec<&ReproCase> = ids
        .iter()
        .map(|id| {
            reg.iter()
                .find(|c| c.id == *id)
                .expect("selected from registry")
        })
        .collect();
    let scale = opts.budget_scale;
    Ok(if opts.parallel {
        cases.par_iter().map(|c| execute(c, scale)).collect()
    } else {
        cases.iter().map(|c| execute(c, scale)).collect()
    })
}

fn opts() -> BuiltinOptions {
    BuiltinOptions::default()
}

fn named(name: &str) -> TargetFunction {
    builtin(name, &opts()).expect("registered builtin")
}

fn sized(name: &str, p: usize) -> TargetFunction {
    builtin(
        name,
        &BuiltinOptions {
            dim: Some(p),
            ..opts()
        },
    )
    .expect("registered builtin")
}

fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Distance from each target to its nearest located point.
fn nearest(targets: &[Vec<f64>], located: &[Vec<f64>]) -> Vec<f64> {
    targets
        .iter()
        .map(|t| {
            located
                .iter()
                .map(|l| max_norm(t, l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn worst(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

/// Roots of `g` on `[lo, hi]` from sign changes over `cells` cells, each
/// refined by bisection.
pub fn bracketed_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut ga = g(a);
    for i in 1..=cells {
        let b = if i == cells { hi } else { lo + h * i as f64 };
        let gb = g(b);
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            let (mut x0, mut x1, mut g0) = (a, b, ga);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                if m <= x0 || m >= x1 {
                    break;
                }
                let gm = g(m);
                if gm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if (gm < 0.0) == (g0 < 0.0) {
                    x0 = m;
                    g0 = gm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        a = b;
        ga = gb;
    }
    roots
}

fn locations(zeros: &[Zero]) -> Vec<Vec<f64>> {
    zeros.iter().map(|z| z.location.clone()).collect()
}

fn zeros_record(
    f: &TargetFunction,
    w: &Window,
    cfg: &AdaptiveConfig,
) -> Result<RunRecord, AdaptiveError> {
    let r = run_adaptive(f, w, cfg)?;
    Ok(RunRecord::from_zeros(
        FunctionDescriptor::labelled(f),
        w.clone(),
        *cfg,
        r,
    ))
}

const FD: FiniteDifference = FiniteDifference {
    eps: 1e-6,
    scheme: FdScheme::Forward,
};

fn extrema_record(
    f: &TargetFunction,
    w: &Window,
    cfg: &AdaptiveConfig,
) -> Result<RunRecord, AdaptiveError> {
    let e = find_extrema(f, w, cfg, FD.eps, FD.scheme)?;
    Ok(RunRecord::from_extrema(
        FunctionDescriptor::labelled(f),
        w.clone(),
        *cfg,
        FD,
        e,
    ))
}

fn interval15() -> Window {
    Window::interval(-15.0, 15.0).expect("valid window")
}

/// Distance to the nearest odd multiple of pi/2.
fn cos_zero_error(x: f64) -> f64 {
    let k = ((x - FRAC_PI_2) / PI).round();
    (x - (FRAC_PI_2 + k * PI)).abs()
}

fn cos_zeros() -> Result<CaseRun, AdaptiveError> {
    let f = named("cos");
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            seed: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = zeros_record(&f, &interval15(), &cfg)?;
    let err_at = |d: usize| {
        rec.snapshots
            .iter()
            .find(|s| s.depth == d)
            .map_or(f64::NAN, |s| {
                worst(s.zeros.iter().map(|z| cos_zero_error(z.location[0])))
            })
    };
    let (e1, e5, e10) = (err_at(1), err_at(5), err_at(10));
    let checks = vec![
        Check::count("zero count", rec.zeros.len(), 10),
        Check::within(
            "distance to odd multiple of pi/2",
            worst(rec.zeros.iter().map(|z| cos_zero_error(z.location[0]))),
            1e-6,
        ),
        Check::below(
            "max |f|",
            worst(rec.zeros.iter().map(|z| z.magnitude)),
            1e-9,
        ),
        Check::flag(
            "location error shrinks over depths 1, 5, 10",
            e1 > e5 && e5 > e10,
            format!("{e1:e} > {e5:e} > {e10:e}"),
        ),
    ];
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn extrema_cfg() -> AdaptiveConfig {
    AdaptiveConfig {
        iters: 5,
        ..Default::default()
    }
}

fn cos_extrema() -> Result<CaseRun, AdaptiveError> {
    let rec = extrema_record(&named("cos"), &interval15(), &extrema_cfg())?;
    let pts = rec.extrema.as_deref().unwrap_or_default();
    let max = pts
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = pts.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let off_pi = worst(
        pts.iter()
            .map(|p| (p.location[0] - (p.location[0] / PI).round() * PI).abs()),
    );
    let checks = vec![
        Check::count("stationary points", pts.len(), 9),
        Check::within("global max vs 1", (max - 1.0).abs(), 1e-6),
        Check::within("global min vs -1", (min + 1.0).abs(), 1e-6),
        Check::within("distance to multiple of pi", off_pi, 1e-4),
    ];
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn sincos_zeros() -> Result<CaseRun, AdaptiveError> {
    let rec = zeros_record(&named("sincos"), &interval15(), &AdaptiveConfig::default())?;
    let truth: Vec<Vec<f64>> = bracketed_roots(sincos, -15.0, 15.0, 300_000)
        .into_iter()
        .map(|x| vec![x])
        .collect();
    let checks = vec![
        Check::count("zero count", rec.zeros.len(), 9),
        Check::count("bracketed roots", truth.len(), 9),
        Check::within(
            "distance to bracketed roots",
            worst(nearest(&truth, &locations(&rec.zeros))),
            1e-6,
        ),
    ];
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn sincos_extrema() -> Result<CaseRun, AdaptiveError> {
    let rec = extrema_record(&named("sincos"), &interval15(), &extrema_cfg())?;
    let pts = rec.extrema.as_deref().unwrap_or_default();
    let top = pts.iter().max_by(|a, b| a.value.total_cmp(&b.value));
    let bottom = pts.iter().min_by(|a, b| a.value.total_cmp(&b.value));
    let mut checks = vec![Check::count("stationary points", pts.len(), 19)];
    match (top, bottom) {
        (Some(t), Some(b)) => checks.extend([
            Check::within("global max value", (t.value - 1.588194).abs(), 1e-3),
            Check::within(
                "global max location",
                (t.location[0] - 12.58658).abs(),
                1e-2,
            ),
            Check::within("global min value", (b.value + 0.6498092).abs(), 1e-3),
            Check::within(
                "global min location",
                (b.location[0] + 14.15617).abs(),
                1e-2,
            ),
        ]),
        _ => checks.push(Check::flag(
            "extrema located",
            false,
            "no stationary points".into(),
        )),
    }
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn single_point_checks(located: &[Vec<f64>], target: f64, tol: f64) -> Vec<Check> {
    let dev = located.first().map_or(f64::INFINITY, |x| {
        worst(x.iter().map(|v| (v - target).abs()))
    });
    vec![
        Check::count("located points", located.len(), 1),
        Check::within(format!("coordinates vs {target}"), dev, tol),
    ]
}

fn sum_sq(p: usize) -> Result<CaseRun, AdaptiveError> {
    let cfg = AdaptiveConfig {
        r_frac: 0.15,
        ..Default::default()
    };
    let rec = zeros_record(
        &sized("sum-sq", p),
        &Window::cube(-1.0, 1.0, p).expect("valid"),
        &cfg,
    )?;
    let mut checks = single_point_checks(&locations(&rec.zeros), 0.1, 1e-3);
    checks.push(Check::below(
        "magnitude",
        worst(rec.zeros.iter().map(|z| z.magnitude)),
        1e-8,
    ));
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn sum_sq_p10() -> Result<CaseRun, AdaptiveError> {
    let cfg = AdaptiveConfig {
        r_frac: 0.15,
        iters: 5,
        tol_end: 1e-4,
        // candidates at tol 1e-4 still spread ~1e-2 around the minimum
        dedup_radius: 0.02,
        base: PpzConfig {
            q: 1.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = zeros_record(
        &sized("sum-sq", 10),
        &Window::cube(-1.0, 1.0, 10).expect("valid"),
        &cfg,
    )?;
    let mut checks = single_point_checks(&locations(&rec.zeros), 0.1, 1e-2);
    checks.push(Check::below(
        "magnitude",
        worst(rec.zeros.iter().map(|z| z.magnitude)),
        1e-4,
    ));
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn gauss(p: usize) -> Result<CaseRun, AdaptiveError> {
    let cfg = AdaptiveConfig {
        r_frac: 0.05,
        iters: 5,
        base: PpzConfig {
            q: 1.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = extrema_record(
        &sized("gauss", p),
        &Window::cube(0.0, 2.0, p).expect("valid"),
        &cfg,
    )?;
    let pts = rec.extrema.as_deref().unwrap_or_default();
    let mut checks = single_point_checks(
        &pts.iter().map(|s| s.location.clone()).collect::<Vec<_>>(),
        1.0,
        1e-3,
    );
    checks.push(Check::within(
        "value vs 1",
        worst(pts.iter().map(|s| (s.value - 1.0).abs())),
        1e-5,
    ));
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn complex_checks(targets: &[Complex64], rec: &RunRecord, tol: f64) -> (Vec<f64>, Vec<Check>) {
    let d: Vec<f64> = targets
        .iter()
        .map(|t| {
            rec.zeros
                .iter()
                .map(|z| (Complex64::new(z.location[0], z.location[1]) - t).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let checks = targets
        .iter()
        .zip(&d)
        .map(|(t, &e)| Check::within(format!("root {t}"), e, tol))
        .collect();
    (d, checks)
}

fn complex_poly() -> Result<CaseRun, AdaptiveError> {
    let roots = [Complex64::new(0.5, -1.0), Complex64::new(1.0, 0.5)];
    let spec = RootSpec::new(vec![(roots[0], 2), (roots[1], 3)]).expect("non-empty");
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            k: 15.0,
            q: 2.0,
            ..Default::default()
        },
        child_n: Some(1000.0),
        dedup_radius: 0.01,
        ..Default::default()
    };
    let w = Window::new(vec![0.0, -1.5], vec![1.5, 1.0]).expect("valid");
    let rec = zeros_record(&poly_from_roots(&spec), &w, &cfg)?;
    let (_, checks) = complex_checks(&roots, &rec, 1e-4);
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

/// Substream that draws the random polynomial's roots.
const ROOT_STREAM: u64 = 99;

fn random_poly() -> Result<CaseRun, AdaptiveError> {
    let spec = RootSpec::random_unit_square(&mut RngState::new(0, ROOT_STREAM), 10).expect("n > 0");
    let roots: Vec<Complex64> = spec.roots().iter().map(|r| r.0).collect();
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            k: 10.0,
            q: 2.0,
            n: 10_000.0,
            ..Default::default()
        },
        r_frac: 0.05,
        child_n: Some(1000.0),
        dedup_radius: 0.02,
        ..Default::default()
    };
    let rec = zeros_record(
        &poly_from_roots(&spec),
        &Window::cube(0.0, 1.0, 2).expect("valid"),
        &cfg,
    )?;
    let (d, _) = complex_checks(&roots, &rec, 1e-2);
    let hits = d.iter().filter(|&&e| e <= 1e-2).count();
    let checks = vec![Check::flag(
        "roots recovered within 1e-2",
        hits >= 9,
        format!("{hits} of 10 (at least 9 required)"),
    )];
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn eta_strip() -> Result<CaseRun, AdaptiveError> {
    let f = named("eta");
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            k: 15.0,
            q: 2.0,
            n: 1000.0,
            ..Default::default()
        },
        iters: 3,
        r_frac: 0.05,
        child_n: Some(50.0),
        dedup_radius: 0.02,
        ..Default::default()
    };
    let w = Window::new(vec![0.0, 13.0], vec![1.3, 22.0]).expect("valid");
    let mut rec = zeros_record(&f, &w, &cfg)?;
    rec.function.eta_terms = Some(DEFAULT_ETA_TERMS);
    let targets = [
        Complex64::new(0.5, 14.1347),
        Complex64::new(0.5, 21.0220),
        Complex64::new(1.0, 18.1302),
    ];
    let (_, mut checks) = complex_checks(&targets, &rec, 2e-2);
    let eta1 = eta_partial(Complex64::new(1.0, 0.0), DEFAULT_ETA_TERMS)
        .map_or(f64::INFINITY, |v| (v - LN_2).norm());
    let zeta2 = zeta_from_eta(Complex64::new(2.0, 0.0), DEFAULT_ETA_TERMS)
        .map_or(f64::INFINITY, |v| (v - PI * PI / 6.0).norm());
    checks.push(Check::within("eta(1) vs ln 2", eta1, 5e-5));
    checks.push(Check::within("zeta(2) vs pi^2/6", zeta2, 1e-7));
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

fn hard_poly_cfg(seed: u64) -> AdaptiveConfig {
    AdaptiveConfig {
        base: PpzConfig {
            seed,
            ..Default::default()
        },
        child_n: Some(100.0),
        ..Default::default()
    }
}

/// Covers 2 and 3 within 1e-3; any further zero must have `|f| < 1e-10`,
/// and there may be at most one.
fn hard_poly_verdict(zeros: &[Zero]) -> (bool, String) {
    let mut used = vec![false; zeros.len()];
    let mut covered = 0;
    for t in [2.0, 3.0] {
        let best = zeros
            .iter()
            .enumerate()
            .filter(|(i, z)| !used[*i] && (z.location[0] - t).abs() <= 1e-3)
            .min_by(|a, b| {
                (a.1.location[0] - t)
                    .abs()
                    .total_cmp(&(b.1.location[0] - t).abs())
            });
        if let Some((i, _)) = best {
            used[i] = true;
            covered += 1;
        }
    }
    let extras: Vec<&Zero> = zeros
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(z, _)| z)
        .collect();
    let ok = covered == 2 && extras.len() <= 1 && extras.iter().all(|z| z.magnitude < 1e-10);
    let shown: Vec<String> = zeros
        .iter()
        .map(|z| format!("{:.7}", z.location[0]))
        .collect();
    (
        ok,
        format!("zeros [{}], {} extra", shown.join(", "), extras.len()),
    )
}

fn hard_poly() -> Result<CaseRun, AdaptiveError> {
    let rec = zeros_record(
        &named("hard-poly"),
        &Window::interval(0.0, 5.0).expect("valid"),
        &hard_poly_cfg(0),
    )?;
    let (ok, detail) = hard_poly_verdict(&rec.zeros);
    Ok(CaseRun {
        checks: vec![Check::flag(
            "covers {2, 3} with at most one tiny extra",
            ok,
            detail,
        )],
        records: vec![rec],
    })
}

fn hard_poly_seeds() -> Result<CaseRun, AdaptiveError> {
    let f = named("hard-poly");
    let w = Window::interval(0.0, 5.0).expect("valid");
    let records = (0..20)
        .map(|seed| zeros_record(&f, &w, &hard_poly_cfg(seed)))
        .collect::<Result<Vec<_>, _>>()?;
    let failed: Vec<u64> = records
        .iter()
        .filter(|r| !hard_poly_verdict(&r.zeros).0)
        .map(|r| r.seed)
        .collect();
    let passed = records.len() - failed.len();
    Ok(CaseRun {
        checks: vec![Check::flag(
            "seeds passing",
            passed * 100 >= 95 * records.len(),
            format!("{passed}/20 (at least 19 required); failing seeds {failed:?}"),
        )],
        records,
    })
}

/// Stationary points of `g(x) g(y)`: pairs of critical points of `g` and
/// pairs of zeros of `g`, each found by sign changes of a forward
/// difference or of `g` on a fine grid.
pub fn product_stationary_points(
    g: fn(f64) -> f64,
    lo: f64,
    hi: f64,
    cells: usize,
) -> Vec<Vec<f64>> {
    let eps = FD.eps;
    let crit = bracketed_roots(|x| (g(x + eps) - g(x)) / eps, lo, hi, cells);
    let zeros = bracketed_roots(g, lo, hi, cells);
    let mut out = Vec::new();
    for set in [&crit, &zeros] {
        for &a in set {
            for &b in set {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

fn sincos2d() -> Result<CaseRun, AdaptiveError> {
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            n: 10_000.0,
            ..Default::default()
        },
        iters: 5,
        r_frac: 0.05,
        child_n: Some(300.0),
        dedup_radius: 0.01,
        ..Default::default()
    };
    let rec = extrema_record(
        &named("sincos2d"),
        &Window::cube(-5.0, 5.0, 2).expect("valid"),
        &cfg,
    )?;
    let truth = product_stationary_points(sincos, -5.0, 5.0, 200_000);
    let located: Vec<Vec<f64>> = rec
        .extrema
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|p| p.location.clone())
        .collect();
    let d = nearest(&truth, &located);
    let hits = d.iter().filter(|&&e| e <= 1e-2).count();
    let checks = vec![
        Check::count(
            "stationary points vs grid oracle",
            located.len(),
            truth.len(),
        ),
        Check::count("oracle points located within 1e-2", hits, truth.len()),
    ];
    Ok(CaseRun {
        checks,
        records: vec![rec],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_oracle() {
        let r = bracketed_roots(f64::cos, -15.0, 15.0, 1000);
        assert_eq!(r.len(), 10);
        for x in r {
            assert!(cos_zero_error(x) < 1e-12);
        }
        assert_eq!(bracketed_roots(|x| x, -1.0, 1.0, 2), vec![0.0]);
        assert!(bracketed_roots(|x| x * x + 1.0, -1.0, 1.0, 100).is_empty());
    }

    #[test]
    fn product_oracle_counts() {
        // cos on [-4, 4]: critical points -pi, 0, pi and zeros +-pi/2
        let pts = product_stationary_points(f64::cos, -4.0, 4.0, 8000);
        assert_eq!(pts.len(), 9 + 4);
    }

    #[test]
    fn ids_are_unique() {
        let reg = registry();
        let mut ids: Vec<_> = reg.iter().map(|c| c.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), reg.len());
    }

    #[test]
    fn selection() {
        let all = select(&RunAllOptions::default()).unwrap();
        assert!(!all.contains(&"sum-sq-p10"));
        let cos = select(&RunAllOptions {
            only: Some("cos-*".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cos, vec!["cos-zeros-10it", "cos-extrema"]);
        let slow = select(&RunAllOptions {
            only: Some("sum-sq-p1*".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(slow, vec!["sum-sq-p1", "sum-sq-p10"]);
        assert!(matches!(
            select(&RunAllOptions {
                only: Some("nothing-*".into()),
                ..Default::default()
            }),
            Err(ReproError::NoMatch(_))
        ));
        assert!(matches!(
            select(&RunAllOptions {
                only: Some("[".into()),
                ..Default::default()
            }),
            Err(ReproError::Pattern { .. })
        ));
    }

    #[test]
    fn unknown_case_lists_registry() {
        let err = run_case("nope", 1.0).unwrap_err().to_string();
        assert!(
            err.contains("cos-zeros-10it") && err.contains("eta-strip"),
            "{err}"
        );
    }

    #[test]
    fn hard_poly_rule() {
        let z = |x: f64, m: f64| Zero {
            location: vec![x],
            magnitude: m,
            achieved_tol: 1e-10,
            depth: 10,
            lineage: vec![],
        };
        assert!(hard_poly_verdict(&[z(2.0, 0.0), z(3.0, 0.0)]).0);
        assert!(hard_poly_verdict(&[z(2.0, 0.0), z(3.0, 0.0), z(1.93395, 7.6e-11)]).0);
        assert!(!hard_poly_verdict(&[z(2.0, 0.0), z(3.0, 0.0), z(1.9, 1e-9)]).0);
        assert!(!hard_poly_verdict(&[z(2.0, 0.0), z(3.0, 0.0), z(1.9, 0.0), z(1.8, 0.0)]).0);
        assert!(!hard_poly_verdict(&[z(2.0, 0.0)]).0);
    }

    #[test]
    fn fast_case_passes_with_deltas() {
        let v = run_case("sum-sq-p2", 1.0).unwrap();
        assert!(v.pass, "{v:?}");
        assert!(v.checks.iter().any(|c| c.delta.is_some()));
        assert_eq!(v.records.len(), 1);
    }

    #[test]
    fn tiny_budget_times_out() {
        let v = run_case("sum-sq-p1", 0.0).unwrap();
        assert!(v.timed_out && !v.pass);
    }
}
