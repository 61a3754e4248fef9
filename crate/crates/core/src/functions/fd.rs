use nalgebra::DMatrix;

use super::ScalarField;
use crate::error::{Error, Result};

pub const FD_GRADIENT_STEP: f64 = 1e-6;
pub const FD_HESSIAN_STEP: f64 = 1e-4;

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )))
    }
}

/// Central-difference gradient.
pub fn fd_gradient<F: ScalarField + ?Sized>(f: &F, u: &DMatrix<f64>, step: f64) -> Result<DMatrix<f64>> {
    check_step(step)?;
    let mut x = u.clone();
    let mut g = DMatrix::zeros(u.nrows(), u.ncols());
    for k in 0..u.len() {
        let orig = x[k];
        x[k] = orig + step;
        let up = f.value(&x)?;
        x[k] = orig - step;
        let dn = f.value(&x)?;
        x[k] = orig;
        g[k] = (up - dn) / (2.0 * step);
    }
    Ok(g)
}

/// Central-difference Hessian in the column-stacked block layout,
/// symmetrized as ½(H + H^t).
pub fn fd_hessian<F: ScalarField + ?Sized>(f: &F, u: &DMatrix<f64>, step: f64) -> Result<DMatrix<f64>> {
    check_step(step)?;
    let m = u.len();
    let mut x = u.clone();
    let mut h = DMatrix::zeros(m, m);
    let shifted = |x: &mut DMatrix<f64>, k: usize, l: usize, dk: f64, dl: f64| -> Result<f64> {
        let (ok, ol) = (x[k], x[l]);
        x[k] += dk;
        x[l] += dl;
        let v = f.value(x);
        x[k] = ok;
        x[l] = ol;
        v
    };
    for k in 0..m {
        for l in 0..m {
            let pp = shifted(&mut x, k, l, step, step)?;
            let pm = shifted(&mut x, k, l, step, -step)?;
            let mp = shifted(&mut x, k, l, -step, step)?;
            let mm = shifted(&mut x, k, l, -step, -step)?;
            h[(k, l)] = (pp - pm - mp + mm) / (4.0 * step * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}
