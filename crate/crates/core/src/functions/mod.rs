//! Ambient scalar fields f: M_{n×p}(R) → R with value, gradient and Hessian.
//!
//! Gradients are n×p matrices. Hessians are np×np in the block layout induced
//! by column stacking: block (i, j) holds ∂²f/∂u_i∂u_j for columns u_i, u_j.

mod builtin;
mod compose;
pub mod dual;
mod expr;
mod fd;
pub mod random;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use builtin::{BuiltinFamily, BuiltinSpec};
pub use compose::{ConstantField, ConstraintField, IsometryPullback, LinearCombination, ProductField};
pub use expr::{parse_expression, BinaryOp, Expr, ExpressionField, UnaryOp};
pub use fd::{fd_gradient, fd_hessian, FD_GRADIENT_STEP, FD_HESSIAN_STEP};

/// A smooth function on n×p matrices with exact derivative access.
///
/// Implementations must be pure: evaluation may happen from many threads.
pub trait ScalarField: Send + Sync {
    /// Declared (n, p).
    fn shape(&self) -> (usize, usize);

    fn value(&self, u: &DMatrix<f64>) -> Result<f64>;

    /// Euclidean gradient in matrix form (n×p).
    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Euclidean Hessian (np×np, block layout).
    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Short human-readable description for reports.
    fn describe(&self) -> String {
        let (n, p) = self.shape();
        format!("field on {n}x{p}")
    }
}

/// Shared handle to a field.
pub type FieldRef = Arc<dyn ScalarField>;

pub(crate) fn check_shape<F: ScalarField + ?Sized>(f: &F, u: &DMatrix<f64>) -> Result<()> {
    let (n, p) = f.shape();
    if u.shape() != (n, p) {
        return Err(Error::Shape(format!(
            "field is defined on {n}x{p} matrices, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    Ok(())
}

impl<F: ScalarField + ?Sized> ScalarField for Arc<F> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        (**self).value(u)
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        (**self).gradient(u)
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        (**self).hessian(u)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Largest entry of |a − b| / max(1, |b|).
pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Largest |H − H^t|.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    (h - h.transpose()).amax()
}
