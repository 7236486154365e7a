//! Seeded randomness and homogeneous Poisson point patterns.
//!
//! Every random draw in the crate flows through [`RngState`]. A state is fully
//! determined by `(seed, stream)`; child states for refinement windows are
//! derived with [`RngState::fork`] so the draw sequence of a window depends only
//! on its lineage, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::geometry::Window;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("Poisson mean must be finite and non-negative, got {0}")]
    BadMean(f64),
    #[error("HPPP rate must be finite and positive, got {0}")]
    BadRate(f64),
    #[error("cannot place {0} points in a window of zero volume")]
    ZeroVolume(usize),
    #[error("expected point count {0} is too large to simulate")]
    TooMany(f64),
}

/// Hard ceiling on a single realization, well above any sensible `N * vol(W)`.
pub const MAX_POINTS: f64 = 5.0e8;

/// SplitMix64 finalizer; used to derive stream identifiers.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream keyed by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream identified by `key`. Does not advance `self`.
    pub fn fork(&self, key: u64) -> RngState {
        RngState::new(self.seed, mix64(self.stream ^ mix64(key)))
    }

    /// Child stream identified by a path of keys, e.g. a refinement lineage.
    pub fn fork_path(&self, path: &[u64]) -> RngState {
        let stream = path
            .iter()
            .fold(self.stream, |acc, &k| mix64(acc ^ mix64(k)));
        RngState::new(self.seed, stream)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draw from `Poisson(mean)`.
pub fn poisson_count(rng: &mut RngState, mean: f64) -> Result<u64, SamplingError> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(SamplingError::BadMean(mean));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean > MAX_POINTS {
        return Err(SamplingError::TooMany(mean));
    }
    let dist = Poisson::new(mean).map_err(|_| SamplingError::BadMean(mean))?;
    Ok(dist.sample(rng.rng()) as u64)
}

/// A finite set of points observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    dim: usize,
    coords: Vec<f64>,
    window: Window,
}

impl PointPattern {
    pub fn empty(window: Window) -> Self {
        PointPattern {
            dim: window.dim(),
            coords: Vec::new(),
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Flat coordinates, `dim` per point.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }
}

/// `n` independent uniform points in `w`.
pub fn uniform_in(rng: &mut RngState, w: &Window, n: usize) -> Result<PointPattern, SamplingError> {
    if n == 0 {
        return Ok(PointPattern::empty(w.clone()));
    }
    if w.volume() <= 0.0 {
        return Err(SamplingError::ZeroVolume(n));
    }
    let dim = w.dim();
    let mut coords = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for axis in 0..dim {
            let (lo, hi) = (w.lo()[axis], w.hi()[axis]);
            // lo + u*(hi-lo) can round up to hi only; still inside the closed box
            let v = lo + w.side(axis) * rng.uniform();
            coords.push(v.min(hi));
        }
    }
    Ok(PointPattern {
        dim,
        coords,
        window: w.clone(),
    })
}

/// Homogeneous Poisson process with intensity `rate` over `w`, simulated by
/// conditioning: draw the count, then place the points uniformly.
pub fn sample_hppp(
    rng: &mut RngState,
    w: &Window,
    rate: f64,
) -> Result<PointPattern, SamplingError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SamplingError::BadRate(rate));
    }
    let vol = w.volume();
    if vol <= 0.0 {
        return Ok(PointPattern::empty(w.clone()));
    }
    let n = poisson_count(rng, rate * vol)?;
    uniform_in(rng, w, n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn poisson_degenerate_and_errors() {
        let mut rng = RngState::new(0, 0);
        assert_eq!(poisson_count(&mut rng, 0.0).unwrap(), 0);
        assert!(poisson_count(&mut rng, -1.0).is_err());
        assert!(poisson_count(&mut rng, f64::NAN).is_err());
        assert!(poisson_count(&mut rng, f64::INFINITY).is_err());
    }

    #[test]
    fn poisson_large_mean_moment() {
        let mut rng = RngState::new(7, 0);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| poisson_count(&mut rng, 30_000.0).unwrap() as f64)
            .collect();
        let (m, _) = mean_var(&xs);
        let bound = 3.0 * (30_000.0f64 / 10_000.0).sqrt();
        assert!((m - 30_000.0).abs() < bound, "mean {m}");
    }

    #[test]
    fn poisson_small_mean_variance() {
        let mut rng = RngState::new(11, 3);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| poisson_count(&mut rng, 5.0).unwrap() as f64)
            .collect();
        let (_, v) = mean_var(&xs);
        assert!((v - 5.0).abs() < 0.05 * 5.0, "variance {v}");
    }

    #[test]
    fn uniform_deciles() {
        let mut rng = RngState::new(1, 1);
        let w = Window::interval(0.0, 1.0).unwrap();
        let pat = uniform_in(&mut rng, &w, 100_000).unwrap();
        let mut bins = [0usize; 10];
        for p in pat.points() {
            bins[((p[0] * 10.0) as usize).min(9)] += 1;
        }
        // binomial sd of one decile count: sqrt(n p (1 - p))
        let bound = 3.0 * (100_000.0f64 * 0.1 * 0.9).sqrt();
        for b in bins {
            assert!((b as f64 - 10_000.0).abs() < bound, "{bins:?}");
        }
    }

    #[test]
    fn uniform_square_mean() {
        let mut rng = RngState::new(2, 0);
        let w = Window::cube(0.0, 2.0, 2).unwrap();
        let pat = uniform_in(&mut rng, &w, 40_000).unwrap();
        let m = pat.points().map(|p| p[0]).sum::<f64>() / 40_000.0;
        let bound = 3.0 * (2.0 / 12f64.sqrt()) / 200.0;
        assert!((m - 1.0).abs() < bound, "mean {m}");
    }

    #[test]
    fn uniform_edge_cases() {
        let mut rng = RngState::new(0, 0);
        let w = Window::interval(0.0, 1.0).unwrap();
        assert!(uniform_in(&mut rng, &w, 0).unwrap().is_empty());
        let flat = Window::interval(1.0, 1.0).unwrap();
        assert!(uniform_in(&mut rng, &flat, 0).unwrap().is_empty());
        assert_eq!(
            uniform_in(&mut rng, &flat, 3),
            Err(SamplingError::ZeroVolume(3))
        );
    }

    #[test]
    fn hppp_count_matches_intensity_measure() {
        let w = Window::interval(-15.0, 15.0).unwrap();
        let counts: Vec<f64> = (0..200)
            .map(|k| {
                let mut rng = RngState::new(5, k);
                sample_hppp(&mut rng, &w, 1000.0).unwrap().len() as f64
            })
            .collect();
        let (m, _) = mean_var(&counts);
        let bound = 3.0 * (30_000.0f64 / 200.0).sqrt();
        assert!((m - 30_000.0).abs() < bound, "mean {m}");
    }

    #[test]
    fn hppp_degenerate_cases() {
        let mut rng = RngState::new(0, 0);
        let flat = Window::interval(2.0, 2.0).unwrap();
        assert!(sample_hppp(&mut rng, &flat, 1000.0).unwrap().is_empty());
        let w = Window::interval(0.0, 1.0).unwrap();
        assert!(sample_hppp(&mut rng, &w, 1e-9).unwrap().is_empty());
        assert!(sample_hppp(&mut rng, &w, 0.0).is_err());
    }

    #[test]
    fn points_stay_in_window() {
        let mut rng = RngState::new(3, 9);
        let w = Window::new(vec![-1.0, 13.0], vec![1.3, 22.0]).unwrap();
        let pat = sample_hppp(&mut rng, &w, 500.0).unwrap();
        assert!(!pat.is_empty());
        assert!(pat.points().all(|p| w.contains(p).unwrap()));
    }

    #[test]
    fn determinism_per_seed_and_stream() {
        let w = Window::cube(0.0, 1.0, 3).unwrap();
        let a = sample_hppp(&mut RngState::new(42, 7), &w, 100.0).unwrap();
        let b = sample_hppp(&mut RngState::new(42, 7), &w, 100.0).unwrap();
        let c = sample_hppp(&mut RngState::new(42, 8), &w, 100.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let root = RngState::new(1, 0);
        assert_eq!(
            root.fork_path(&[1, 2]).stream(),
            root.fork_path(&[1, 2]).stream()
        );
        assert_ne!(
            root.fork_path(&[1, 2]).stream(),
            root.fork_path(&[2, 1]).stream()
        );
    }

    #[test]
    fn forked_streams_are_uncorrelated() {
        let root = RngState::new(99, 0);
        let mut a = root.fork(1);
        let mut b = root.fork(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform()).collect();
        let corr = |x: &[f64], y: &[f64]| {
            let (mx, vx) = mean_var(x);
            let (my, vy) = mean_var(y);
            let cov = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - mx) * (b - my))
                .sum::<f64>()
                / (x.len() as f64 - 1.0);
            cov / (vx * vy).sqrt()
        };
        assert!(corr(&xs, &ys).abs() < 0.01);
        // lag-1 across streams
        assert!(corr(&xs[1..], &ys[..n - 1]).abs() < 0.01);
        assert!(corr(&xs[..n - 1], &ys[1..]).abs() < 0.01);
    }
}
