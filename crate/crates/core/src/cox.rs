//! Random-intensity extension: `K` drawn from a Gamma law turns the zero
//! intensity into a random field (a Cox process).

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Window;
use crate::ppz::{intensity, Moments};
use crate::sampling::RngState;
use crate::target::{TargetError, TargetFunction};

#[derive(Debug, Error)]
pub enum CoxError {
    #[error("gamma parameters must be positive and finite, got shape {shape} and rate {rate}")]
    Params { shape: f64, rate: f64 },
    #[error("Q must be positive, got {0}")]
    Exponent(f64),
    #[error("envelope level must lie in (0, 1), got {0}")]
    Level(f64),
    #[error("{got} draws are too few for a {level} envelope; need at least {need}")]
    TooFewDraws { got: usize, need: usize, level: f64 },
    #[error("grid needs at least one point per axis")]
    EmptyGrid,
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Gamma law in the shape-rate parameterization (mean `shape / rate`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self, CoxError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(shape) && ok(rate) {
            Ok(GammaParams { shape, rate })
        } else {
            Err(CoxError::Params { shape, rate })
        }
    }

    pub fn from_shape_scale(shape: f64, scale: f64) -> Result<Self, CoxError> {
        Self::new(shape, 1.0 / scale)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// `E[exp(-K m^Q)]` for `K ~ Gamma(shape, rate)`: the Laplace transform
/// `(rate / (rate + m^Q))^shape`.
pub fn mean_intensity_closed_form(magnitude: f64, q: f64, gp: &GammaParams) -> f64 {
    let t = magnitude.powf(q);
    (gp.rate / (gp.rate + t)).powf(gp.shape)
}

/// `n` draws of `K`, draw `k` taken from its own substream of `rng`.
pub fn draw_k(gp: &GammaParams, n: usize, rng: &RngState) -> Vec<f64> {
    let law = Gamma::new(gp.shape, 1.0 / gp.rate).expect("validated parameters");
    (0..n)
        .into_par_iter()
        .map(|k| law.sample(rng.fork(k as u64).rng()))
        .collect()
}

/// Evenly spaced grid with `per_axis` points per axis, endpoints included
/// (a single point sits at the centre).
pub fn grid_points(w: &Window, per_axis: usize) -> Result<Vec<Vec<f64>>, CoxError> {
    if per_axis == 0 {
        return Err(CoxError::EmptyGrid);
    }
    let axis = |i: usize| -> Vec<f64> {
        if per_axis == 1 {
            return vec![0.5 * (w.lo()[i] + w.hi()[i])];
        }
        let step = w.side(i) / (per_axis - 1) as f64;
        (0..per_axis)
            .map(|j| {
                if j + 1 == per_axis {
                    w.hi()[i]
                } else {
                    w.lo()[i] + step * j as f64
                }
            })
            .collect()
    };
    let mut points = vec![Vec::new()];
    for i in 0..w.dim() {
        let ticks = axis(i);
        points = points
            .into_iter()
            .flat_map(|p| {
                ticks.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Realizations of the random intensity on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDraws {
    pub grid: Vec<Vec<f64>>,
    pub magnitudes: Vec<f64>,
    pub k: Vec<f64>,
    /// Row-major, one row per draw.
    pub values: Vec<f64>,
}

impl IntensityDraws {
    pub fn n_draws(&self) -> usize {
        self.k.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let g = self.grid.len();
        &self.values[k * g..(k + 1) * g]
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let g = self.grid.len();
        (0..self.n_draws()).map(move |k| self.values[k * g + j])
    }
}

fn check_q(q: f64) -> Result<(), CoxError> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(CoxError::Exponent(q))
    }
}

pub fn grid_magnitudes(f: &TargetFunction, grid: &[Vec<f64>]) -> Result<Vec<f64>, CoxError> {
    grid.par_iter()
        .map(|x| f.magnitude(x).map_err(CoxError::from))
        .collect()
}

/// Row `k` holds `exp(-K_k m(x)^Q)` over `grid`, with `K_k` i.i.d. Gamma.
pub fn random_intensity_draws(
    f: &TargetFunction,
    grid: Vec<Vec<f64>>,
    q: f64,
    gp: &GammaParams,
    n_draws: usize,
    rng: &RngState,
) -> Result<IntensityDraws, CoxError> {
    check_q(q)?;
    let magnitudes = grid_magnitudes(f, &grid)?;
    let k = draw_k(gp, n_draws, rng);
    let values = k
        .par_iter()
        .flat_map_iter(|&kk| magnitudes.iter().map(move |&m| intensity(m, kk, q)))
        .collect();
    Ok(IntensityDraws {
        grid,
        magnitudes,
        k,
        values,
    })
}

/// Per-point mean of `exp(-K m^Q)` over the given `K` draws, streamed so a
/// large draw count needs no matrix.
pub fn mean_intensity_empirical(magnitudes: &[f64], k: &[f64], q: f64) -> Vec<f64> {
    magnitudes
        .par_iter()
        .map(|&m| mean_of(k.iter().map(|&kk| intensity(m, kk, q))))
        .collect()
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = Moments::default();
    values.for_each(|v| m.push(v));
    m.mean()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

/// Smallest draw count whose tail quantile is interior: `1 / (1 - level)`.
pub fn min_draws(level: f64) -> usize {
    (1.0 / (1.0 - level) - 1e-9).ceil() as usize
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise central `level` band plus the mean.
pub fn envelope(draws: &IntensityDraws, level: f64) -> Result<Vec<Band>, CoxError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CoxError::Level(level));
    }
    let need = min_draws(level);
    if draws.n_draws() < need {
        return Err(CoxError::TooFewDraws {
            got: draws.n_draws(),
            need,
            level,
        });
    }
    let tail = (1.0 - level) / 2.0;
    Ok((0..draws.grid.len())
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<f64> = draws.column(j).collect();
            let mean = mean_of(col.iter().copied());
            col.sort_by(f64::total_cmp);
            Band {
                lower: quantile(&col, tail),
                mean,
                upper: quantile(&col, 1.0 - tail),
            }
        })
        .collect())
}
