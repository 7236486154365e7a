//! Adaptive refinement: each accepted candidate seeds a smaller window that
//! is searched again at a tenth of the tolerance, until the schedule or the
//! iteration budget runs out.
//!
//! Nodes at one depth are independent and run in parallel. Every node draws
//! from a substream keyed by its lineage, so reports do not depend on the
//! number of worker threads.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Window};
use crate::ppz::{realize, Candidate, PpzConfig, PpzError};
use crate::sampling::RngState;
use crate::target::{FdScheme, TargetError, TargetFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptiveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ppz(#[from] PpzError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error("{count} refinement windows at depth {depth} exceed the limit of {limit}; raise --max-windows")]
    TooManyWindows {
        depth: usize,
        count: usize,
        limit: usize,
    },
}

impl AdaptiveError {
    pub fn is_evaluation(&self) -> bool {
        match self {
            AdaptiveError::Target(e) | AdaptiveError::Ppz(PpzError::Target(e)) => e.is_evaluation(),
            _ => false,
        }
    }
}

/// How the proposal count of a refinement window is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSampling {
    /// Every window receives on average `N |W_root|` proposals, the count of
    /// the root realization.
    #[default]
    RootVolume,
    /// Literal rate: `N |W|` proposals in window `W`.
    WindowVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// `K`, `Q`, `N` and seed. Its `tol` is not used; the schedule starts at
    /// `tol_start`.
    pub base: PpzConfig,
    pub tol_start: f64,
    pub tol_end: f64,
    pub iters: usize,
    /// Half-side of a refinement window as a fraction of its parent's side.
    pub r_frac: f64,
    pub growth: f64,
    pub n_growth: f64,
    pub first_escalation: f64,
    pub escalation_cap: u32,
    pub retry_cap: u32,
    pub max_windows: usize,
    /// Duplicate radius as a fraction of the root side, per axis.
    pub dedup_radius: f64,
    /// `N` used inside refinement windows; defaults to `base.n`.
    pub child_n: Option<f64>,
    pub sampling: WindowSampling,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            base: PpzConfig::default(),
            tol_start: 1e-1,
            tol_end: 1e-10,
            iters: 10,
            r_frac: 0.01,
            growth: 1.1,
            n_growth: 1.1,
            first_escalation: 10.0,
            escalation_cap: 3,
            retry_cap: 25,
            max_windows: 10_000,
            dedup_radius: 1e-3,
            child_n: None,
            sampling: WindowSampling::RootVolume,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        PpzConfig {
            tol: self.tol_start,
            ..self.base
        }
        .validate()?;
        let fail = |m: String| Err(AdaptiveError::Config(m));
        if !(self.tol_end > 0.0 && self.tol_end <= self.tol_start) {
            return fail(format!(
                "need 0 < tol_end <= tol_start, got {} and {}",
                self.tol_end, self.tol_start
            ));
        }
        if self.iters == 0 {
            return fail("iters must be at least 1".into());
        }
        if !(self.r_frac > 0.0 && self.r_frac <= 0.5) {
            return fail(format!("r_frac must lie in (0, 0.5], got {}", self.r_frac));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return fail(format!("growth must exceed 1, got {}", self.growth));
        }
        if !(self.n_growth > 1.0 && self.n_growth.is_finite()) {
            return fail(format!("n_growth must exceed 1, got {}", self.n_growth));
        }
        if !(self.first_escalation >= 1.0 && self.first_escalation.is_finite()) {
            return fail(format!(
                "first_escalation must be at least 1, got {}",
                self.first_escalation
            ));
        }
        if self.max_windows == 0 {
            return fail("max_windows must be at least 1".into());
        }
        if !(self.dedup_radius >= 0.0 && self.dedup_radius.is_finite()) {
            return fail(format!(
                "dedup_radius must be non-negative, got {}",
                self.dedup_radius
            ));
        }
        if let Some(n) = self.child_n {
            if !(n >= 1.0 && n.is_finite()) {
                return fail(format!("child_n must be at least 1, got {n}"));
            }
        }
        Ok(())
    }
}

/// A located zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub location: Vec<f64>,
    pub magnitude: f64,
    /// Tolerance of the realization that produced this point.
    pub achieved_tol: f64,
    pub depth: usize,
    /// Proposal index of the chosen candidate at each depth.
    pub lineage: Vec<usize>,
}

/// State after one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSnapshot {
    pub depth: usize,
    pub tol: f64,
    /// Windows searched at this depth (the root counts as one).
    pub windows: usize,
    pub died: usize,
    pub retries: u64,
    pub proposals: u64,
    pub zeros: Vec<Zero>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub zeros: Vec<Zero>,
    pub died_windows: usize,
    pub iterations_run: usize,
    /// Tolerance increases needed before the root yielded a candidate.
    pub escalations: u32,
    pub proposals: u64,
    pub snapshots: Vec<DepthSnapshot>,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

/// A refinement node: the window its zero came from plus the zero.
#[derive(Debug, Clone)]
struct Node {
    window: Window,
    zero: Zero,
}

fn cmp_location(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn canonical(a: &Zero, b: &Zero) -> Ordering {
    a.magnitude
        .total_cmp(&b.magnitude)
        .then_with(|| cmp_location(&a.location, &b.location))
        .then_with(|| a.lineage.cmp(&b.lineage))
}

/// Greedy clustering by ascending magnitude: a zero is dropped when every
/// coordinate lies within `radius * side_i` of an already kept zero.
pub fn dedup_global(mut zeros: Vec<Zero>, radius: f64, root: &Window) -> Vec<Zero> {
    zeros.sort_by(canonical);
    let tol: Vec<f64> = root.sides().map(|s| radius * s).collect();
    let mut kept: Vec<Zero> = Vec::new();
    for z in zeros {
        let dup = kept.iter().any(|k| {
            k.location
                .iter()
                .zip(&z.location)
                .zip(&tol)
                .all(|((a, b), t)| (a - b).abs() <= *t)
        });
        if !dup {
            kept.push(z);
        }
    }
    kept
}

fn best_candidate<'a>(cands: impl Iterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    cands.min_by(|a, b| {
        a.magnitude
            .total_cmp(&b.magnitude)
            .then(a.index.cmp(&b.index))
    })
}

enum NodeOutcome {
    Child(Node, u64, u64),
    Died(u64, u64),
}

struct Engine<'a> {
    f: &'a TargetFunction,
    root: &'a Window,
    cfg: &'a AdaptiveConfig,
    rng: RngState,
}

impl Engine<'_> {
    fn child_n(&self) -> f64 {
        self.cfg.child_n.unwrap_or(self.cfg.base.n)
    }

    /// Homogeneous rate giving window `w` its configured proposal count.
    fn rate_for(&self, w: &Window, n: f64) -> f64 {
        match self.cfg.sampling {
            WindowSampling::WindowVolume => n,
            WindowSampling::RootVolume => n * self.root.volume() / w.volume(),
        }
    }

    fn refine(&self, node: &Node, depth: usize, tol: f64) -> Result<NodeOutcome, AdaptiveError> {
        let cfg = self.cfg;
        let mut window = node.window.subwindow(&node.zero.location, cfg.r_frac)?;
        let mut n = self.child_n();
        let mut proposals = 0u64;
        for retry in 0..=cfg.retry_cap {
            if retry > 0 {
                window = window.grow(cfg.growth, self.root)?;
                n *= cfg.n_growth;
            }
            if window.volume() > 0.0 {
                let mut key = vec![depth as u64, retry as u64];
                key.extend(node.zero.lineage.iter().map(|&i| i as u64));
                let mut rng = self.rng.fork_path(&key);
                let pcfg = PpzConfig {
                    n: self.rate_for(&window, n),
                    tol,
                    ..cfg.base
                };
                let real = realize(self.f, &window, &pcfg, &mut rng, false)?;
                proposals += real.proposed as u64;
                if let Some(best) = best_candidate(real.accepted()) {
                    let mut lineage = node.zero.lineage.clone();
                    lineage.push(best.index);
                    let zero = Zero {
                        location: best.location.clone(),
                        magnitude: best.magnitude,
                        achieved_tol: tol,
                        depth,
                        lineage,
                    };
                    return Ok(NodeOutcome::Child(
                        Node { window, zero },
                        retry as u64,
                        proposals,
                    ));
                }
            }
        }
        Ok(NodeOutcome::Died(cfg.retry_cap as u64, proposals))
    }
}

/// Runs the adaptive search over `root`.
pub fn run_adaptive(
    f: &TargetFunction,
    root: &Window,
    cfg: &AdaptiveConfig,
) -> Result<ZeroReport, AdaptiveError> {
    let start = Instant::now();
    cfg.validate()?;
    if root.dim() != f.dim() {
        return Err(PpzError::Dimension {
            window: root.dim(),
            target: f.dim(),
        }
        .into());
    }
    if !(root.volume() > 0.0) {
        return Err(PpzError::ZeroVolume.into());
    }
    let engine = Engine {
        f,
        root,
        cfg,
        rng: RngState::new(cfg.base.seed, 0),
    };

    let mut report = ZeroReport {
        zeros: Vec::new(),
        died_windows: 0,
        iterations_run: 0,
        escalations: 0,
        proposals: 0,
        snapshots: Vec::new(),
        wall_time: 0.0,
    };

    // depth 1: the root realization, escalated while it comes back empty
    let mut tol = cfg.tol_start;
    let mut n = cfg.base.n;
    let mut first = Vec::new();
    for esc in 0..=cfg.escalation_cap {
        let mut rng = engine.rng.fork_path(&[1, esc as u64]);
        let pcfg = PpzConfig { n, tol, ..cfg.base };
        let real = realize(f, root, &pcfg, &mut rng, false)?;
        report.proposals += real.proposed as u64;
        first = real
            .accepted()
            .map(|c| Zero {
                location: c.location.clone(),
                magnitude: c.magnitude,
                achieved_tol: tol,
                depth: 1,
                lineage: vec![c.index],
            })
            .collect();
        if !first.is_empty() || esc == cfg.escalation_cap {
            break;
        }
        tol *= cfg.first_escalation;
        n *= cfg.first_escalation;
        report.escalations += 1;
    }
    let first = dedup_global(first, cfg.dedup_radius, root);
    report.iterations_run = 1;
    report.snapshots.push(DepthSnapshot {
        depth: 1,
        tol,
        windows: 1,
        died: usize::from(first.is_empty()),
        retries: report.escalations as u64,
        proposals: report.proposals,
        zeros: sorted_by_location(&first),
    });
    report.died_windows = usize::from(first.is_empty());
    let mut live: Vec<Node> = first
        .into_iter()
        .map(|zero| Node {
            window: root.clone(),
            zero,
        })
        .collect();

    for depth in 2..=cfg.iters {
        if live.is_empty() {
            break;
        }
        let next_tol = tol / 10.0;
        if next_tol < cfg.tol_end {
            break;
        }
        tol = next_tol;
        if live.len() > cfg.max_windows {
            return Err(AdaptiveError::TooManyWindows {
                depth,
                count: live.len(),
                limit: cfg.max_windows,
            });
        }
        let outcomes: Vec<Result<NodeOutcome, AdaptiveError>> = live
            .par_iter()
            .map(|node| engine.refine(node, depth, tol))
            .collect();
        let windows = live.len();
        let mut died = 0;
        let mut retries = 0;
        let mut proposals = 0;
        let mut children = Vec::with_capacity(windows);
        for o in outcomes {
            match o? {
                NodeOutcome::Child(node, r, p) => {
                    retries += r;
                    proposals += p;
                    children.push(node);
                }
                NodeOutcome::Died(r, p) => {
                    died += 1;
                    retries += r;
                    proposals += p;
                }
            }
        }
        let zeros = dedup_global(
            children.iter().map(|c| c.zero.clone()).collect(),
            cfg.dedup_radius,
            root,
        );
        // keep the nodes whose zero survived, in canonical order
        live = zeros
            .iter()
            .map(|z| {
                children
                    .iter()
                    .find(|c| c.zero.lineage == z.lineage)
                    .expect("dedup keeps existing zeros")
                    .clone()
            })
            .collect();
        report.died_windows += died;
        report.proposals += proposals;
        report.iterations_run = depth;
        report.snapshots.push(DepthSnapshot {
            depth,
            tol,
            windows,
            died,
            retries,
            proposals,
            zeros: sorted_by_location(&zeros),
        });
    }
    report.zeros = sorted_by_location(&live.into_iter().map(|n| n.zero).collect::<Vec<_>>());
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

fn sorted_by_location(zeros: &[Zero]) -> Vec<Zero> {
    let mut v = zeros.to_vec();
    v.sort_by(|a, b| cmp_location(&a.location, &b.location).then_with(|| canonical(a, b)));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremumLabel {
    GlobalMax,
    GlobalMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub location: Vec<f64>,
    /// Sum of absolute finite-difference partials at `location`.
    pub gradient_magnitude: f64,
    pub achieved_tol: f64,
    pub value: f64,
    pub label: Option<ExtremumLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub points: Vec<StationaryPoint>,
    /// Run on the finite-difference gradient target.
    pub gradient_run: ZeroReport,
}

impl ExtremaReport {
    pub fn global_max(&self) -> Option<&StationaryPoint> {
        self.points
            .iter()
            .filter(|p| p.label == Some(ExtremumLabel::GlobalMax))
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn global_min(&self) -> Option<&StationaryPoint> {
        self.points
            .iter()
            .filter(|p| p.label == Some(ExtremumLabel::GlobalMin))
            .min_by(|a, b| a.value.total_cmp(&b.value))
    }
}

/// Relative spread within which several points share a global label.
const LABEL_REL_TOL: f64 = 1e-6;

/// Locates stationary points as zeros of the finite-difference gradient and
/// labels the largest and smallest values among them. Points whose values tie
/// the extreme to within a millionth of the value range share its label.
pub fn find_extrema(
    f: &TargetFunction,
    root: &Window,
    cfg: &AdaptiveConfig,
    eps: f64,
    scheme: FdScheme,
) -> Result<ExtremaReport, AdaptiveError> {
    let grad = f.fd_gradient_target(eps, scheme)?;
    let run = run_adaptive(&grad, root, cfg)?;
    let mut points = run
        .zeros
        .iter()
        .map(|z| {
            Ok(StationaryPoint {
                location: z.location.clone(),
                gradient_magnitude: z.magnitude,
                achieved_tol: z.achieved_tol,
                value: f.scalar(&z.location)?,
                label: None,
            })
        })
        .collect::<Result<Vec<_>, TargetError>>()?;
    if let (Some(max), Some(min)) = (
        points.iter().map(|p| p.value).max_by(f64::total_cmp),
        points.iter().map(|p| p.value).min_by(f64::total_cmp),
    ) {
        let slack = LABEL_REL_TOL * (max - min);
        for p in &mut points {
            if p.value >= max - slack {
                p.label = Some(ExtremumLabel::GlobalMax);
            } else if p.value <= min + slack {
                p.label = Some(ExtremumLabel::GlobalMin);
            }
        }
    }
    Ok(ExtremaReport {
        points,
        gradient_run: run,
    })
}
