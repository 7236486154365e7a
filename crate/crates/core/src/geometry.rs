//! Points and axis-aligned observation windows.
//!
//! Windows are closed hyperrectangles `[lo_1, hi_1] x ... x [lo_p, hi_p]`.
//! The complex plane is carried as `p = 2` with coordinates `(sigma, t)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("window must have at least one axis")]
    Empty,
    #[error("window bounds have different lengths ({lo} vs {hi})")]
    LengthMismatch { lo: usize, hi: usize },
    #[error("axis {axis}: bound is not finite")]
    NonFinite { axis: usize },
    #[error("axis {axis}: lower bound {lo} exceeds upper bound {hi}")]
    Inverted { axis: usize, lo: f64, hi: f64 },
    #[error("dimension mismatch: window has {window} axes, point has {point}")]
    DimensionMismatch { window: usize, point: usize },
    #[error("sub-window around the given center does not meet the parent window")]
    EmptyIntersection,
    #[error("invalid window syntax {0:?}: expected lo:hi[,lo:hi...]")]
    Syntax(String),
    #[error("radius fraction must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("growth factor must exceed 1, got {0}")]
    BadGrowth(f64),
}

/// A location in the search domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point(vec![x])
    }
}

/// Closed axis-aligned hyperrectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<WindowRepr> for Window {
    type Error = GeometryError;
    fn try_from(r: WindowRepr) -> Result<Self, Self::Error> {
        Window::new(r.lo, r.hi)
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        WindowRepr { lo: w.lo, hi: w.hi }
    }
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::LengthMismatch {
                lo: lo.len(),
                hi: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(GeometryError::Empty);
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(GeometryError::NonFinite { axis });
            }
            if l > h {
                return Err(GeometryError::Inverted { axis, lo: l, hi: h });
            }
        }
        Ok(Window { lo, hi })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Window::new(vec![lo], vec![hi])
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self, GeometryError> {
        Window::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn sides(&self) -> impl Iterator<Item = f64> + '_ {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// Lebesgue measure of the window; zero when any side is degenerate.
    pub fn volume(&self) -> f64 {
        self.sides().product()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// `true` when `other` lies entirely inside `self`.
    pub fn encloses(&self, other: &Window) -> bool {
        self.dim() == other.dim()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                window: self.dim(),
                point: x.len(),
            });
        }
        Ok(())
    }

    /// Box of half-side `r_frac * side_i` around `center`, clipped to `self`.
    pub fn subwindow(&self, center: &[f64], r_frac: f64) -> Result<Window, GeometryError> {
        self.check_dim(center)?;
        if !(r_frac > 0.0 && r_frac.is_finite()) {
            return Err(GeometryError::BadRadius(r_frac));
        }
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (axis, &c) in center.iter().enumerate() {
            let r = r_frac * self.side(axis);
            let l = (c - r).max(self.lo[axis]);
            let h = (c + r).min(self.hi[axis]);
            if l > h {
                return Err(GeometryError::EmptyIntersection);
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Window { lo, hi })
    }

    /// Scales every half-side by `factor` about the window center, clipped to `root`.
    pub fn grow(&self, factor: f64, root: &Window) -> Result<Window, GeometryError> {
        if !(factor > 1.0 && factor.is_finite()) {
            return Err(GeometryError::BadGrowth(factor));
        }
        if root.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                window: root.dim(),
                point: self.dim(),
            });
        }
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let c = 0.5 * (self.lo[axis] + self.hi[axis]);
            let half = 0.5 * self.side(axis) * factor;
            // min/max against the current bounds keeps growth monotone under rounding
            lo.push((c - half).min(self.lo[axis]).max(root.lo[axis]));
            hi.push((c + half).max(self.hi[axis]).min(root.hi[axis]));
        }
        // a window outside the root cannot come out of refinement, but keep the
        // invariant lo <= hi regardless
        for axis in 0..self.dim() {
            if lo[axis] > hi[axis] {
                return Err(GeometryError::EmptyIntersection);
            }
        }
        Ok(Window { lo, hi })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (axis, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if axis > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}:{h}")?;
        }
        Ok(())
    }
}

impl FromStr for Window {
    type Err = GeometryError;

    /// Parses `lo1:hi1,lo2:hi2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || GeometryError::Syntax(s.to_string());
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for part in s.split(',') {
            let (l, h) = part.trim().split_once(':').ok_or_else(syntax)?;
            lo.push(l.trim().parse::<f64>().map_err(|_| syntax())?);
            hi.push(h.trim().parse::<f64>().map_err(|_| syntax())?);
        }
        Window::new(lo, hi)
    }
}
