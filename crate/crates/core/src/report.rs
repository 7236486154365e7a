//! Serializable record of a run, with JSON and CSV writers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appz::{
    AdaptiveConfig, DepthSnapshot, ExtremaReport, ExtremumLabel, StationaryPoint, Zero, ZeroReport,
};
use crate::geometry::Window;
use crate::target::{FdScheme, TargetFunction, TargetKind};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Zeros,
    Extrema,
}

/// Where the target came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionSource {
    Builtin(String),
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDescriptor {
    pub source: FunctionSource,
    pub kind: TargetKind,
    pub dim: usize,
    pub constraint: Option<String>,
    /// Series length for the eta and zeta builtins.
    pub eta_terms: Option<usize>,
}

impl FunctionDescriptor {
    pub fn new(source: FunctionSource, f: &TargetFunction) -> Self {
        FunctionDescriptor {
            source,
            kind: f.kind(),
            dim: f.dim(),
            constraint: None,
            eta_terms: None,
        }
    }

    /// Descriptor naming a library target by its label.
    pub fn labelled(f: &TargetFunction) -> Self {
        Self::new(FunctionSource::Builtin(f.label().to_string()), f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub eps: f64,
    pub scheme: FdScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: RunKind,
    pub function: FunctionDescriptor,
    pub window: Window,
    pub seed: u64,
    pub config: AdaptiveConfig,
    pub finite_difference: Option<FiniteDifference>,
    /// Zeros of the target, or of its gradient for an extrema run.
    pub zeros: Vec<Zero>,
    pub extrema: Option<Vec<StationaryPoint>>,
    pub died_windows: usize,
    pub iterations_run: usize,
    pub escalations: u32,
    pub proposals: u64,
    pub snapshots: Vec<DepthSnapshot>,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

impl RunRecord {
    pub fn from_zeros(
        function: FunctionDescriptor,
        window: Window,
        config: AdaptiveConfig,
        report: ZeroReport,
    ) -> Self {
        RunRecord {
            run: RunKind::Zeros,
            function,
            window,
            seed: config.base.seed,
            config,
            finite_difference: None,
            zeros: report.zeros,
            extrema: None,
            died_windows: report.died_windows,
            iterations_run: report.iterations_run,
            escalations: report.escalations,
            proposals: report.proposals,
            snapshots: report.snapshots,
            wall_time: report.wall_time,
        }
    }

    pub fn from_extrema(
        function: FunctionDescriptor,
        window: Window,
        config: AdaptiveConfig,
        fd: FiniteDifference,
        report: ExtremaReport,
    ) -> Self {
        let mut r = Self::from_zeros(function, window, config, report.gradient_run);
        r.run = RunKind::Extrema;
        r.finite_difference = Some(fd);
        r.extrema = Some(report.points);
        r
    }

    /// Number of located points (stationary points for an extrema run).
    pub fn count(&self) -> usize {
        self.extrema.as_ref().map_or(self.zeros.len(), Vec::len)
    }

    /// Copy with the timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        RunRecord {
            wall_time: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        match (self.function.kind, self.window.dim()) {
            (TargetKind::Complex, _) => vec!["sigma".into(), "t".into()],
            (_, 1) => vec!["x".into()],
            (_, p) => (1..=p).map(|i| format!("x{i}")).collect(),
        }
    }

    /// One row per zero: coordinates, magnitude, achieved tolerance, depth.
    /// Extrema runs add the function value and the global label, and their
    /// magnitude column is the gradient magnitude.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = self.coordinate_names();
        header.extend(["magnitude", "achieved_tol", "depth"].map(String::from));
        if self.extrema.is_some() {
            header.extend(["value", "label"].map(String::from));
        }
        w.write_record(&header)?;
        for (i, z) in self.zeros.iter().enumerate() {
            let mut row: Vec<String> = z.location.iter().map(num).collect();
            row.extend([num(&z.magnitude), num(&z.achieved_tol), z.depth.to_string()]);
            if let Some(points) = &self.extrema {
                let p = &points[i];
                row.push(num(&p.value));
                row.push(match p.label {
                    Some(ExtremumLabel::GlobalMax) => "global-max".into(),
                    Some(ExtremumLabel::GlobalMin) => "global-min".into(),
                    None => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest decimal that parses back to the same value.
fn num(v: &f64) -> String {
    format!("{v:?}")
}
