//! Named test functions, polynomials with prescribed roots, and the
//! alternating zeta series.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::sampling::RngState;
use crate::target::{EvalError, TargetFunction};

/// Default number of series terms.
pub const DEFAULT_ETA_TERMS: usize = 10_000;

/// Below this `|1 - 2^(1-s)|` the zeta quotient is refused.
pub const POLE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("the alternating series needs sigma > 0, got sigma = {0}")]
    Divergent(f64),
    #[error("series length must be at least 1")]
    NoTerms,
    #[error("s = {s} is within {POLE_THRESHOLD:e} of a zero of 1 - 2^(1-s); eta(s) = {eta}")]
    Pole { s: Complex64, eta: Complex64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuiltinError {
    #[error("unknown builtin {name:?}; available: {}", INVENTORY.join(", "))]
    Unknown { name: String },
    #[error("builtin {name} needs a dimension of at least 1")]
    Dimension { name: String },
    #[error("builtin {name} is {fixed}-dimensional, got dimension {got}")]
    FixedDimension {
        name: String,
        fixed: usize,
        got: usize,
    },
    #[error("malformed builtin name {0:?}")]
    Syntax(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Names accepted by [`builtin`]. `sum-sq` and `gauss` take a dimension,
/// either through [`BuiltinOptions::dim`] or inline as `sum-sq(3)`.
pub const INVENTORY: [&str; 8] = [
    "cos",
    "sincos",
    "hard-poly",
    "sum-sq(p)",
    "gauss(p)",
    "sincos2d",
    "eta",
    "zeta",
];

/// `eta(s) = eta_re - i eta_im` summed over the first `terms` terms.
pub fn eta_partial(s: Complex64, terms: usize) -> Result<Complex64, SeriesError> {
    if !(s.re > 0.0) {
        return Err(SeriesError::Divergent(s.re));
    }
    if terms == 0 {
        return Err(SeriesError::NoTerms);
    }
    let (sigma, t) = (s.re, s.im);
    let (mut re, mut im) = (0.0, 0.0);
    let mut sign = 1.0;
    for n in 1..=terms {
        let ln_n = (n as f64).ln();
        let scale = sign * (-sigma * ln_n).exp();
        let (sin, cos) = (t * ln_n).sin_cos();
        re += scale * cos;
        im += scale * sin;
        sign = -sign;
    }
    Ok(Complex64::new(re, -im))
}

/// `1 - 2^(1-s)`, vanishing at `s = 1 + 2 k pi i / ln 2`.
pub fn eta_zeta_factor(s: Complex64) -> Complex64 {
    Complex64::new(1.0, 0.0) - (Complex64::new(LN_2, 0.0) * (Complex64::new(1.0, 0.0) - s)).exp()
}

/// `zeta(s) = eta(s) / (1 - 2^(1-s))`.
pub fn zeta_from_eta(s: Complex64, terms: usize) -> Result<Complex64, SeriesError> {
    let eta = eta_partial(s, terms)?;
    let d = eta_zeta_factor(s);
    if d.norm() < POLE_THRESHOLD {
        return Err(SeriesError::Pole { s, eta });
    }
    Ok(eta / d)
}

/// Roots with multiplicities of `p(s) = prod (s - xi_k)^{m_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSpec {
    roots: Vec<(Complex64, u32)>,
}

impl RootSpec {
    /// Returns `None` when the total degree is zero or a root is not finite.
    pub fn new(roots: Vec<(Complex64, u32)>) -> Option<Self> {
        let degree: u64 = roots.iter().map(|&(_, m)| m as u64).sum();
        let finite = roots
            .iter()
            .all(|(z, _)| z.re.is_finite() && z.im.is_finite());
        (degree >= 1 && finite).then_some(RootSpec { roots })
    }

    pub fn simple(roots: impl IntoIterator<Item = Complex64>) -> Option<Self> {
        Self::new(roots.into_iter().map(|z| (z, 1)).collect())
    }

    /// `n` simple roots uniform in `[0,1] x [0,1]`.
    pub fn random_unit_square(rng: &mut RngState, n: usize) -> Option<Self> {
        Self::simple((0..n).map(|_| {
            let re = rng.uniform();
            Complex64::new(re, rng.uniform())
        }))
    }

    pub fn roots(&self) -> &[(Complex64, u32)] {
        &self.roots
    }

    pub fn degree(&self) -> u32 {
        self.roots.iter().map(|&(_, m)| m).sum()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.roots
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &(xi, m)| {
                acc * (s - xi).powi(m as i32)
            })
    }
}

/// Complex target multiplying the monomial factors directly.
pub fn poly_from_roots(spec: &RootSpec) -> TargetFunction {
    let spec = spec.clone();
    let label = spec
        .roots
        .iter()
        .map(|(z, m)| {
            if *m == 1 {
                format!("(s-({z}))")
            } else {
                format!("(s-({z}))^{m}")
            }
        })
        .collect::<Vec<_>>()
        .join("*");
    TargetFunction::complex_fn(move |s| spec.eval(s)).with_label(label)
}

pub fn sincos(x: f64) -> f64 {
    (x / 20.0).sin() + x.cos().powi(2)
}

pub fn hard_poly(x: f64) -> f64 {
    35.0 * (x - 3.0).powi(5) * (x - 2.0).powi(10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinOptions {
    /// Dimension for `sum-sq` and `gauss`; ignored by fixed-dimension names
    /// unless it contradicts them.
    pub dim: Option<usize>,
    pub eta_terms: usize,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        BuiltinOptions {
            dim: None,
            eta_terms: DEFAULT_ETA_TERMS,
        }
    }
}

fn split_name(name: &str) -> Result<(&str, Option<usize>), BuiltinError> {
    let name = name.trim();
    match name.split_once('(') {
        None => Ok((name, None)),
        Some((base, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| BuiltinError::Syntax(name.to_string()))?;
            let p = inner
                .trim()
                .parse()
                .map_err(|_| BuiltinError::Syntax(name.to_string()))?;
            Ok((base.trim(), Some(p)))
        }
    }
}

/// Looks up a named target.
pub fn builtin(name: &str, opts: &BuiltinOptions) -> Result<TargetFunction, BuiltinError> {
    let (base, inline_dim) = split_name(name)?;
    let dim = inline_dim.or(opts.dim);
    let fixed = |fixed: usize| -> Result<(), BuiltinError> {
        match dim {
            Some(d) if d != fixed => Err(BuiltinError::FixedDimension {
                name: base.to_string(),
                fixed,
                got: d,
            }),
            _ => Ok(()),
        }
    };
    let variable = || -> Result<usize, BuiltinError> {
        match dim {
            Some(p) if p >= 1 => Ok(p),
            Some(_) => Err(BuiltinError::Dimension {
                name: base.to_string(),
            }),
            None => Ok(1),
        }
    };
    let terms = opts.eta_terms;
    if matches!(base, "eta" | "zeta") && terms == 0 {
        return Err(SeriesError::NoTerms.into());
    }
    let f = match base {
        "cos" => {
            fixed(1)?;
            TargetFunction::real_fn(1, |x| x[0].cos())
        }
        "sincos" => {
            fixed(1)?;
            TargetFunction::real_fn(1, |x| sincos(x[0]))
        }
        "hard-poly" => {
            fixed(1)?;
            TargetFunction::real_fn(1, |x| hard_poly(x[0]))
        }
        "sincos2d" => {
            fixed(2)?;
            TargetFunction::real_fn(2, |x| sincos(x[0]) * sincos(x[1]))
        }
        "sum-sq" => {
            let p = variable()?;
            return Ok(
                TargetFunction::real_fn(p, |x| x.iter().map(|v| (v - 0.1).powi(2)).sum())
                    .with_label(format!("sum-sq({p})")),
            );
        }
        "gauss" => {
            let p = variable()?;
            return Ok(TargetFunction::real_fn(p, |x| {
                (-0.5 * x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>()).exp()
            })
            .with_label(format!("gauss({p})")));
        }
        "eta" => {
            fixed(2)?;
            TargetFunction::complex(move |s| eta_partial(s, terms).map_err(series_eval))
        }
        "zeta" => {
            fixed(2)?;
            TargetFunction::complex(move |s| zeta_from_eta(s, terms).map_err(series_eval))
        }
        _ => {
            return Err(BuiltinError::Unknown {
                name: name.to_string(),
            })
        }
    };
    Ok(f.with_label(base))
}

fn series_eval(e: SeriesError) -> EvalError {
    EvalError::new(e.to_string())
}
