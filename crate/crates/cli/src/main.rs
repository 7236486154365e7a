mod args;

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use ppz_core::appz::{find_extrema, run_adaptive, AdaptiveConfig, AdaptiveError, DepthSnapshot};
use ppz_core::builtins::{builtin, BuiltinOptions};
use ppz_core::cox::{self, CoxError, GammaParams};
use ppz_core::exprlang::{parse_constraint, to_target, CompiledConstraint, EvalMode};
use ppz_core::geometry::Window;
use ppz_core::ppz::{
    default_q, expected_count_mc, expected_count_riemann, realize, Intensity, PpzConfig, PpzError,
};
use ppz_core::report::{FiniteDifference, FunctionDescriptor, FunctionSource, RunRecord};
use ppz_core::repro::{self, RunAllOptions, Verdict};
use ppz_core::sampling::RngState;
use ppz_core::target::{FdScheme, TargetFunction, TargetKind};

use args::{
    Cli, Command, CountCmd, CoxCmd, ExtremaCmd, Format, OutputArgs, QArg, ReproCmd, SearchArgs,
    TargetArgs, ZerosCmd,
};

/// Outcomes other than success, each with its own exit status.
enum Failure {
    /// Nothing found; the output is still written.
    Empty,
    /// Some reference cases failed.
    Cases(usize),
    Usage(String),
    Eval(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Empty | Failure::Cases(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Eval(_) => 3,
        }
    }
}

impl From<AdaptiveError> for Failure {
    fn from(e: AdaptiveError) -> Self {
        if e.is_evaluation() {
            Failure::Eval(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<PpzError> for Failure {
    fn from(e: PpzError) -> Self {
        AdaptiveError::from(e).into()
    }
}

impl From<CoxError> for Failure {
    fn from(e: CoxError) -> Self {
        match e {
            CoxError::Target(t) if t.is_evaluation() => Failure::Eval(t.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Empty => eprintln!("no zeros found"),
                Failure::Cases(n) => eprintln!("{n} case(s) failed"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Eval(m) => eprintln!("evaluation error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    let threads = match &cmd {
        Command::Zeros(c) => c.output.threads,
        Command::Extrema(c) => c.output.threads,
        Command::ExpectedCount(c) => c.output.threads,
        Command::CoxEnvelope(c) => c.output.threads,
        Command::Repro(c) => c.threads,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(usage)?;
    }
    match cmd {
        Command::Zeros(c) => zeros(c),
        Command::Extrema(c) => extrema(c),
        Command::ExpectedCount(c) => expected_count(c),
        Command::CoxEnvelope(c) => cox_envelope(c),
        Command::Repro(c) => repro_cmd(c),
    }
}

/// Builds the target and its descriptor, checking dimensions against the
/// window.
fn target(t: &TargetArgs) -> Result<(TargetFunction, FunctionDescriptor), Failure> {
    let wdim = t.window.dim();
    if let Some(d) = t.dim {
        if d != wdim {
            return Err(usage(format!(
                "--dim {d} does not match the {wdim}-dimensional window"
            )));
        }
    }
    let (f, source, mode) = match (&t.source.expr, &t.source.builtin) {
        (Some(src), None) => {
            let mode = if t.complex {
                EvalMode::Complex
            } else {
                EvalMode::Real(t.dim.unwrap_or(wdim))
            };
            let f = to_target(src, mode).map_err(|e| usage(format!("--fn: {e}")))?;
            (f, FunctionSource::Expression(src.clone()), mode)
        }
        (None, Some(name)) => {
            if t.complex {
                return Err(usage(
                    "--complex applies to --fn only; complex builtins are complex already",
                ));
            }
            let opts = BuiltinOptions {
                dim: Some(t.dim.unwrap_or(wdim)),
                eta_terms: t.eta_terms,
            };
            let f = builtin(name, &opts).map_err(usage)?;
            let mode = match f.kind() {
                TargetKind::Complex => EvalMode::Complex,
                _ => EvalMode::Real(f.dim()),
            };
            (f, FunctionSource::Builtin(name.clone()), mode)
        }
        _ => return Err(usage("give exactly one of --fn and --builtin")),
    };
    if f.dim() != wdim {
        return Err(usage(format!(
            "target is {}-dimensional but the window has {wdim} axes",
            f.dim()
        )));
    }
    let mut desc = FunctionDescriptor::new(source, &f);
    if matches!(t.source.builtin.as_deref(), Some("eta" | "zeta")) {
        desc.eta_terms = Some(t.eta_terms);
    }
    let f = match &t.constraint {
        None => f,
        Some(src) => {
            let cond =
                parse_constraint(src, mode).map_err(|e| usage(format!("--constraint: {e}")))?;
            let c = CompiledConstraint::new(&cond, mode);
            desc.constraint = Some(src.clone());
            f.constrain(move |x| c.eval(x))
        }
    };
    Ok((f, desc))
}

fn resolve_q(q: QArg, f: &TargetFunction) -> f64 {
    match q {
        QArg::Value(v) => v,
        QArg::Auto => default_q(f.kind(), f.dim()),
    }
}

fn adaptive_config(
    s: &SearchArgs,
    f: &TargetFunction,
    seed: u64,
) -> Result<AdaptiveConfig, Failure> {
    let cfg = AdaptiveConfig {
        base: PpzConfig {
            k: s.intensity.k,
            q: resolve_q(s.intensity.q, f),
            n: s.intensity.n,
            tol: s.tol_start,
            seed,
        },
        tol_start: s.tol_start,
        tol_end: s.tol_end,
        iters: s.iters,
        r_frac: s.r_frac,
        growth: s.growth,
        n_growth: s.n_growth,
        escalation_cap: s.escalation_cap,
        retry_cap: s.retry_cap,
        max_windows: s.max_windows,
        dedup_radius: s.dedup_radius,
        child_n: s.child_n,
        sampling: s.window_sampling.into(),
        ..AdaptiveConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
        None => write_stdout(text),
    }
}

fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| usage(format!("stdout: {e}")))
}

fn diagnostics(snapshots: &[DepthSnapshot], wall_time: f64) {
    for s in snapshots {
        eprintln!(
            "depth {:>2}  tol {:.0e}  windows {:>6}  died {:>6}  retries {:>7}  proposals {:>11}  zeros {:>6}",
            s.depth,
            s.tol,
            s.windows,
            s.died,
            s.retries,
            s.proposals,
            s.zeros.len()
        );
    }
    eprintln!("wall time {wall_time:.3} s");
}

fn write_record(rec: &RunRecord, out: &OutputArgs) -> Result<(), Failure> {
    if out.diagnostics {
        diagnostics(&rec.snapshots, rec.wall_time);
    }
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => rec.to_json() + "\n",
        Format::Csv => rec.to_csv().map_err(usage)?,
    };
    emit(out, &text)?;
    if rec.count() == 0 {
        return Err(Failure::Empty);
    }
    Ok(())
}

fn zeros(c: ZerosCmd) -> Result<(), Failure> {
    let (f, desc) = target(&c.target)?;
    let cfg = adaptive_config(&c.search, &f, c.output.seed)?;
    let report = run_adaptive(&f, &c.target.window, &cfg)?;
    let rec = RunRecord::from_zeros(desc, c.target.window.clone(), cfg, report);
    write_record(&rec, &c.output)
}

fn extrema(c: ExtremaCmd) -> Result<(), Failure> {
    let (f, desc) = target(&c.target)?;
    if f.kind() != TargetKind::RealScalar {
        return Err(usage(format!(
            "extrema needs a real scalar target, got {}",
            f.kind()
        )));
    }
    let cfg = adaptive_config(&c.search, &f, c.output.seed)?;
    let fd = FiniteDifference {
        eps: c.eps,
        scheme: if c.central {
            FdScheme::Central
        } else {
            FdScheme::Forward
        },
    };
    let report = find_extrema(&f, &c.target.window, &cfg, fd.eps, fd.scheme)?;
    let rec = RunRecord::from_extrema(desc, c.target.window.clone(), cfg, fd, report);
    write_record(&rec, &c.output)
}

/// Cells per axis giving roughly a million cells.
fn default_cells(dim: usize) -> usize {
    (1e6f64.powf(1.0 / dim as f64).floor() as usize).max(1)
}

fn expected_count(c: CountCmd) -> Result<(), Failure> {
    let (f, desc) = target(&c.target)?;
    let w: &Window = &c.target.window;
    let k = c.intensity.k;
    let q = resolve_q(c.intensity.q, &f);
    let cells = c.grid.unwrap_or_else(|| default_cells(w.dim()));
    let lam = Intensity::new(k, q);
    let riemann = expected_count_riemann(&f, w, &lam, cells)?;
    let gated = expected_count_riemann(&f, w, &Intensity::gated(k, q, c.tol_start), cells)?;
    let root = RngState::new(c.output.seed, 0);
    let mc = expected_count_mc(&f, w, &lam, c.samples, &mut root.fork(1))?;
    let cfg = PpzConfig {
        k,
        q,
        n: c.intensity.n,
        tol: c.tol_start,
        seed: c.output.seed,
    };
    let real = realize(&f, w, &cfg, &mut root.fork(2), c.output.diagnostics)?;
    let accepted = real.accepted().count();
    if c.output.diagnostics {
        eprintln!(
            "proposed {}  accepted {}  kept for inspection {}",
            real.proposed,
            accepted,
            real.candidates.len()
        );
    }
    let value = json!({
        "function": desc,
        "window": w,
        "K": k,
        "Q": q,
        "seed": c.output.seed,
        "riemann": { "estimate": riemann, "cells_per_axis": cells },
        "monte_carlo": { "estimate": mc.estimate, "std_error": mc.std_error, "samples": mc.samples },
        "realization": {
            "N": c.intensity.n,
            "tol": c.tol_start,
            "proposed": real.proposed,
            "accepted": accepted,
            "expected_accepted": c.intensity.n * gated,
        },
    });
    let text = match c.output.format.unwrap_or(Format::Json) {
        Format::Json => serde_json::to_string_pretty(&value).expect("json value") + "\n",
        Format::Csv => format!(
            "riemann,cells_per_axis,mc_estimate,mc_std_error,mc_samples,proposed,accepted,expected_accepted\n{:?},{},{:?},{:?},{},{},{},{:?}\n",
            riemann,
            cells,
            mc.estimate,
            mc.std_error,
            mc.samples,
            real.proposed,
            accepted,
            c.intensity.n * gated
        ),
    };
    emit(&c.output, &text)
}

fn cox_envelope(c: CoxCmd) -> Result<(), Failure> {
    let (f, _) = target(&c.target)?;
    let q = resolve_q(c.q, &f);
    let gp = match c.gamma_scale {
        Some(scale) => GammaParams::from_shape_scale(c.gamma_shape, scale)?,
        None => GammaParams::new(c.gamma_shape, c.gamma_rate)?,
    };
    let grid = cox::grid_points(&c.target.window, c.grid)?;
    let draws =
        cox::random_intensity_draws(&f, grid, q, &gp, c.draws, &RngState::new(c.output.seed, 0))?;
    let bands = cox::envelope(&draws, c.level)?;
    let text = match c.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let names: Vec<String> = if f.kind() == TargetKind::Complex {
                vec!["sigma".into(), "t".into()]
            } else if f.dim() == 1 {
                vec!["x".into()]
            } else {
                (1..=f.dim()).map(|i| format!("x{i}")).collect()
            };
            let mut s = names.join(",") + ",lower,mean,upper\n";
            for (x, b) in draws.grid.iter().zip(&bands) {
                for v in x {
                    let _ = write!(s, "{v:?},");
                }
                let _ = writeln!(s, "{:?},{:?},{:?}", b.lower, b.mean, b.upper);
            }
            s
        }
        Format::Json => {
            let points: Vec<_> = draws
                .grid
                .iter()
                .zip(&bands)
                .map(|(x, b)| json!({ "x": x, "lower": b.lower, "mean": b.mean, "upper": b.upper }))
                .collect();
            let value = json!({
                "Q": q,
                "gamma": gp,
                "draws": c.draws,
                "level": c.level,
                "seed": c.output.seed,
                "envelope": points,
            });
            serde_json::to_string_pretty(&value).expect("json value") + "\n"
        }
    };
    emit(&c.output, &text)
}

fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        let status = if v.pass {
            "PASS"
        } else if v.timed_out {
            "TIMEOUT"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            s,
            "{status:<8}{:<28}{:>9.2} s / {:.0} s",
            v.id, v.wall_time, v.budget
        );
        if let Some(e) = &v.error {
            let _ = writeln!(s, "        error: {e}");
        }
        for c in &v.checks {
            let _ = writeln!(
                s,
                "        [{}] {}: {}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    let _ = writeln!(s, "{passed}/{} cases passed", verdicts.len());
    s
}

fn repro_cmd(c: ReproCmd) -> Result<(), Failure> {
    if c.list {
        let mut s = String::new();
        for case in repro::registry() {
            let slow = if case.slow { " (slow)" } else { "" };
            let _ = writeln!(s, "{:<28}{}{slow}", case.id, case.summary);
        }
        return write_stdout(&s);
    }
    if !(c.budget_scale > 0.0 && c.budget_scale.is_finite()) {
        return Err(usage("--budget-scale must be positive"));
    }
    let verdicts = match (&c.id, c.all || c.only.is_some()) {
        (Some(id), false) => vec![repro::run_case(id, c.budget_scale).map_err(usage)?],
        (None, true) => repro::run_all(&RunAllOptions {
            only: c.only.clone(),
            include_slow: c.include_slow,
            budget_scale: c.budget_scale,
            parallel: true,
        })
        .map_err(usage)?,
        (Some(_), true) => return Err(usage("give a case id or --all/--only, not both")),
        (None, false) => return Err(usage("give a case id, --all or --only (see --list)")),
    };
    let text = match c.format {
        None => verdict_table(&verdicts),
        Some(Format::Json) => {
            serde_json::to_string_pretty(&verdicts).expect("verdicts serialize") + "\n"
        }
        Some(Format::Csv) => {
            let mut s = String::from("id,pass,timed_out,wall_time,budget,failed_checks\n");
            for v in &verdicts {
                let failed: Vec<&str> = v.failed_checks().map(|c| c.name.as_str()).collect();
                let _ = writeln!(
                    s,
                    "{},{},{},{:?},{:?},\"{}\"",
                    v.id,
                    v.pass,
                    v.timed_out,
                    v.wall_time,
                    v.budget,
                    failed.join("; ")
                );
            }
            s
        }
    };
    match &c.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => write_stdout(&text)?,
    }
    if verdicts.iter().all(|v| v.pass) {
        Ok(())
    } else {
        Err(Failure::Cases(verdicts.iter().filter(|v| !v.pass).count()))
    }
}
