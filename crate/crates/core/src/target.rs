//! Functions whose zeros are sought.
//!
//! A [`TargetFunction`] pairs an evaluator with the magnitude reduction that
//! the thinning rule consumes:
//!
//! * real scalar `f`: `|f(x)|`
//! * real vector `(f_1, ..., f_q)`: `sum_i |f_i(x)|`
//! * complex `f(s)` with `s = sigma + i t`: the modulus `|f(s)|`
//!
//! An optional feasibility predicate models a constraint set `C`; candidates
//! outside `C` are never retained.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Default finite-difference step.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Failure reported by a user evaluator (domain errors and the like).
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct EvalError(pub String);

impl EvalError {
    pub fn new(msg: impl Into<String>) -> Self {
        EvalError(msg.into())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("evaluation failed at {point:?}: {message}")]
    Eval { point: Vec<f64>, message: String },
    #[error("non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("target expects {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("operation needs a real scalar target, got {0}")]
    NotScalar(TargetKind),
    #[error("finite-difference step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("axis {axis} out of range for a {dim}-dimensional target")]
    BadAxis { axis: usize, dim: usize },
}

impl TargetError {
    /// True for failures of the evaluator itself, as opposed to misuse.
    pub fn is_evaluation(&self) -> bool {
        matches!(
            self,
            TargetError::Eval { .. } | TargetError::NonFinite { .. }
        )
    }
}

pub type ScalarFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
pub type VectorFn = dyn Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync;
pub type ComplexFn = dyn Fn(Complex64) -> Result<Complex64, EvalError> + Send + Sync;
pub type Predicate = dyn Fn(&[f64]) -> Result<bool, EvalError> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "components")]
pub enum TargetKind {
    RealScalar,
    RealVector(usize),
    Complex,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::RealScalar => f.write_str("real-scalar"),
            TargetKind::RealVector(q) => write!(f, "real-vector({q})"),
            TargetKind::Complex => f.write_str("complex"),
        }
    }
}

/// Value of a target at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Vector(Vec<f64>),
    Complex(Complex64),
}

#[derive(Clone)]
enum Evaluator {
    Scalar(Arc<ScalarFn>),
    Vector(usize, Arc<VectorFn>),
    Complex(Arc<ComplexFn>),
}

/// Finite-difference scheme for gradient targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    /// `(f(x + eps e_i) - f(x)) / eps`
    #[default]
    Forward,
    /// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`, opt-in
    Central,
}

#[derive(Clone)]
pub struct TargetFunction {
    dim: usize,
    eval: Evaluator,
    constraint: Option<Arc<Predicate>>,
    label: String,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("kind", &self.kind())
            .field("constrained", &self.constraint.is_some())
            .finish()
    }
}

impl TargetFunction {
    pub fn real<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        TargetFunction {
            dim,
            eval: Evaluator::Scalar(Arc::new(f)),
            constraint: None,
            label: String::new(),
        }
    }

    /// Infallible real scalar evaluator.
    pub fn real_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::real(dim, move |x| Ok(f(x)))
    }

    pub fn vector<F>(dim: usize, components: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync + 'static,
    {
        TargetFunction {
            dim,
            eval: Evaluator::Vector(components, Arc::new(f)),
            constraint: None,
            label: String::new(),
        }
    }

    /// Complex target on the plane; points are `(sigma, t)`.
    pub fn complex<F>(f: F) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64, EvalError> + Send + Sync + 'static,
    {
        TargetFunction {
            dim: 2,
            eval: Evaluator::Complex(Arc::new(f)),
            constraint: None,
            label: String::new(),
        }
    }

    pub fn complex_fn<F>(f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self::complex(move |s| Ok(f(s)))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> TargetKind {
        match &self.eval {
            Evaluator::Scalar(_) => TargetKind::RealScalar,
            Evaluator::Vector(q, _) => TargetKind::RealVector(*q),
            Evaluator::Complex(_) => TargetKind::Complex,
        }
    }

    pub fn is_constrained(&self) -> bool {
        self.constraint.is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), TargetError> {
        if x.len() != self.dim {
            return Err(TargetError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn wrap(x: &[f64]) -> impl FnOnce(EvalError) -> TargetError + '_ {
        move |e| TargetError::Eval {
            point: x.to_vec(),
            message: e.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<Value, TargetError> {
        self.check_dim(x)?;
        let v = match &self.eval {
            Evaluator::Scalar(f) => Value::Real(f(x).map_err(Self::wrap(x))?),
            Evaluator::Vector(q, f) => {
                let mut out = vec![0.0; *q];
                f(x, &mut out).map_err(Self::wrap(x))?;
                Value::Vector(out)
            }
            Evaluator::Complex(f) => {
                Value::Complex(f(Complex64::new(x[0], x[1])).map_err(Self::wrap(x))?)
            }
        };
        let finite = match &v {
            Value::Real(r) => r.is_finite(),
            Value::Vector(vs) => vs.iter().all(|r| r.is_finite()),
            Value::Complex(z) => z.re.is_finite() && z.im.is_finite(),
        };
        if !finite {
            return Err(TargetError::NonFinite { point: x.to_vec() });
        }
        Ok(v)
    }

    /// Real scalar value; errors for other kinds.
    pub fn scalar(&self, x: &[f64]) -> Result<f64, TargetError> {
        match &self.eval {
            Evaluator::Scalar(_) => match self.value(x)? {
                Value::Real(r) => Ok(r),
                _ => unreachable!(),
            },
            _ => Err(TargetError::NotScalar(self.kind())),
        }
    }

    /// The reduction `|f(x)|` used by the intensity.
    pub fn magnitude(&self, x: &[f64]) -> Result<f64, TargetError> {
        self.check_dim(x)?;
        let m = match &self.eval {
            Evaluator::Scalar(f) => f(x).map_err(Self::wrap(x))?.abs(),
            Evaluator::Vector(q, f) => {
                let mut buf = [0.0f64; 16];
                let mut heap;
                let out: &mut [f64] = if *q <= buf.len() {
                    &mut buf[..*q]
                } else {
                    heap = vec![0.0; *q];
                    &mut heap
                };
                f(x, out).map_err(Self::wrap(x))?;
                out.iter().map(|v| v.abs()).sum()
            }
            Evaluator::Complex(f) => f(Complex64::new(x[0], x[1])).map_err(Self::wrap(x))?.norm(),
        };
        if !m.is_finite() {
            return Err(TargetError::NonFinite { point: x.to_vec() });
        }
        Ok(m)
    }

    /// Whether `x` lies in the constraint set (always true when unconstrained).
    pub fn feasible(&self, x: &[f64]) -> Result<bool, TargetError> {
        match &self.constraint {
            None => Ok(true),
            Some(c) => c(x).map_err(Self::wrap(x)),
        }
    }

    /// Restricts the target to `{x : pred(x)}`. Composes with an existing
    /// constraint by intersection.
    pub fn constrain<P>(mut self, pred: P) -> Self
    where
        P: Fn(&[f64]) -> Result<bool, EvalError> + Send + Sync + 'static,
    {
        let pred: Arc<Predicate> = Arc::new(pred);
        self.constraint = Some(match self.constraint.take() {
            None => pred,
            Some(prev) => Arc::new(move |x: &[f64]| Ok(prev(x)? && pred(x)?)),
        });
        self
    }

    /// Forward difference `(f(x + eps e_i) - f(x)) / eps`.
    pub fn fd_partial(&self, x: &[f64], axis: usize, eps: f64) -> Result<f64, TargetError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(TargetError::BadStep(eps));
        }
        if axis >= self.dim {
            return Err(TargetError::BadAxis {
                axis,
                dim: self.dim,
            });
        }
        let f0 = self.scalar(x)?;
        let mut shifted = x.to_vec();
        shifted[axis] += eps;
        let f1 = self.scalar(&shifted)?;
        Ok((f1 - f0) / eps)
    }

    /// Vector target of finite-difference partials; its zeros are the
    /// stationary-point candidates of `self`.
    pub fn fd_gradient_target(
        &self,
        eps: f64,
        scheme: FdScheme,
    ) -> Result<TargetFunction, TargetError> {
        let Evaluator::Scalar(f) = &self.eval else {
            return Err(TargetError::NotScalar(self.kind()));
        };
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(TargetError::BadStep(eps));
        }
        let f = Arc::clone(f);
        let dim = self.dim;
        let grad = move |x: &[f64], out: &mut [f64]| -> Result<(), EvalError> {
            let mut shifted = x.to_vec();
            match scheme {
                FdScheme::Forward => {
                    let f0 = f(x)?;
                    for i in 0..dim {
                        shifted[i] = x[i] + eps;
                        out[i] = (f(&shifted)? - f0) / eps;
                        shifted[i] = x[i];
                    }
                }
                FdScheme::Central => {
                    for i in 0..dim {
                        shifted[i] = x[i] + eps;
                        let fp = f(&shifted)?;
                        shifted[i] = x[i] - eps;
                        let fm = f(&shifted)?;
                        out[i] = (fp - fm) / (2.0 * eps);
                        shifted[i] = x[i];
                    }
                }
            }
            Ok(())
        };
        Ok(TargetFunction {
            dim,
            eval: Evaluator::Vector(dim, Arc::new(grad)),
            constraint: self.constraint.clone(),
            label: format!("grad[{}]", self.label),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cos_target() -> TargetFunction {
        TargetFunction::real_fn(1, |x| x[0].cos())
    }

    #[test]
    fn scalar_magnitude_at_zero() {
        assert!(cos_target().magnitude(&[FRAC_PI_2]).unwrap() < 1e-15);
    }

    #[test]
    fn complex_magnitude_at_constructed_root() {
        let p = TargetFunction::complex_fn(|s| {
            (s - Complex64::new(0.5, -1.0)).powi(2) * (s - Complex64::new(1.0, 0.5)).powi(3)
        });
        assert_eq!(p.magnitude(&[1.0, 0.5]).unwrap(), 0.0);
        assert_eq!(p.magnitude(&[0.5, -1.0]).unwrap(), 0.0);
        assert_eq!(p.kind(), TargetKind::Complex);
    }

    #[test]
    fn vector_magnitude_sums_components() {
        let f = TargetFunction::vector(2, 2, |x, out| {
            out[0] = x[0] - 1.0;
            out[1] = x[1] + 2.0;
            Ok(())
        });
        assert_eq!(f.magnitude(&[0.0, 0.0]).unwrap(), 3.0);
        assert_eq!(f.magnitude(&[1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(
            f.value(&[0.0, 0.0]).unwrap(),
            Value::Vector(vec![-1.0, 2.0])
        );
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = TargetFunction::real_fn(1, |x| 1.0 / x[0]);
        match f.magnitude(&[0.0]) {
            Err(TargetError::NonFinite { point }) => assert_eq!(point, vec![0.0]),
            other => panic!("{other:?}"),
        }
        let g = TargetFunction::real(1, |_| Err(EvalError::new("log of negative")));
        assert!(matches!(g.magnitude(&[1.0]), Err(TargetError::Eval { .. })));
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            cos_target().magnitude(&[1.0, 2.0]),
            Err(TargetError::Dimension { .. })
        ));
    }

    #[test]
    fn forward_difference_examples() {
        let sq = TargetFunction::real_fn(1, |x| x[0] * x[0]);
        let d = sq.fd_partial(&[1.0], 0, 1e-6).unwrap();
        assert!((d - 2.000001).abs() < 1e-9, "{d}");

        let c = TargetFunction::real_fn(2, |_| 4.2);
        assert_eq!(c.fd_partial(&[0.3, 0.1], 1, 1e-3).unwrap(), 0.0);
        assert_eq!(c.fd_partial(&[0.3, 0.1], 0, 1e-9).unwrap(), 0.0);

        // Taylor: (cos eps - 1)/eps = -eps/2 + eps^3/24 - ...
        let eps: f64 = 1e-6;
        let oracle = -eps / 2.0 + eps.powi(3) / 24.0;
        let d = cos_target().fd_partial(&[0.0], 0, eps).unwrap();
        assert!((d - oracle).abs() < 2e-10, "{d} vs {oracle}");
    }

    #[test]
    fn forward_difference_error_decays_linearly() {
        // f = x^3 at x = 1: forward error = 3 eps + eps^2
        let cube = TargetFunction::real_fn(1, |x| x[0].powi(3));
        let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e| (cube.fd_partial(&[1.0], 0, e).unwrap() - 3.0).abs())
            .collect();
        for (e, err) in [1e-3, 1e-4, 1e-5].iter().zip(&errs) {
            assert!(*err <= 3.1 * e, "err {err} at eps {e}");
        }
        assert!((errs[0] / errs[1] - 10.0).abs() < 0.5);
        assert!((errs[1] / errs[2] - 10.0).abs() < 0.5);
    }

    #[test]
    fn fd_errors() {
        let f = cos_target();
        assert!(matches!(
            f.fd_partial(&[0.0], 0, 0.0),
            Err(TargetError::BadStep(_))
        ));
        assert!(matches!(
            f.fd_partial(&[0.0], 1, 1e-6),
            Err(TargetError::BadAxis { .. })
        ));
        let z = TargetFunction::complex_fn(|s| s);
        assert!(matches!(
            z.fd_gradient_target(1e-6, FdScheme::Forward),
            Err(TargetError::NotScalar(_))
        ));
    }

    #[test]
    fn gradient_target_of_linear_has_constant_magnitude() {
        let lin = TargetFunction::real_fn(1, |x| 3.0 * x[0] + 1.0);
        let g = lin.fd_gradient_target(1e-6, FdScheme::Forward).unwrap();
        assert_eq!(g.kind(), TargetKind::RealVector(1));
        for x in [-2.0, 0.0, 0.7, 5.0] {
            assert!((g.magnitude(&[x]).unwrap() - 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gradient_target_vanishes_at_extrema() {
        let g = cos_target()
            .fd_gradient_target(1e-6, FdScheme::Forward)
            .unwrap();
        for k in -4..=4 {
            // forward difference shifts the zero by eps/2
            let x = k as f64 * PI - 5e-7;
            assert!(g.magnitude(&[x]).unwrap() < 1e-9, "k={k}");
        }
        let gauss = TargetFunction::real_fn(2, |x| {
            (-0.5 * ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2))).exp()
        });
        let g = gauss.fd_gradient_target(1e-6, FdScheme::Central).unwrap();
        assert!(g.magnitude(&[1.0, 1.0]).unwrap() < 1e-9);
        assert!(g.magnitude(&[0.5, 1.0]).unwrap() > 0.1);
    }

    #[test]
    fn constraint_masks_without_changing_magnitude() {
        let f = TargetFunction::real_fn(2, |x| x[0] - x[1]);
        let c = f.clone().constrain(|x| Ok(x[0] + x[1] >= 1.0));
        assert!(!c.feasible(&[0.0, 0.0]).unwrap());
        assert!(c.feasible(&[1.0, 0.5]).unwrap());
        assert_eq!(
            c.magnitude(&[1.0, 0.5]).unwrap(),
            f.magnitude(&[1.0, 0.5]).unwrap()
        );
        let everything = f.clone().constrain(|_| Ok(true));
        assert!(everything.feasible(&[-9.0, 3.0]).unwrap());
        let both = c.constrain(|x| Ok(x[0] < 2.0));
        assert!(!both.feasible(&[3.0, 0.0]).unwrap());
        assert!(both.feasible(&[1.5, 0.0]).unwrap());
    }
}
