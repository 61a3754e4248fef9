use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_shape, ScalarField};
use crate::ambient::kron;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Standard test fields for Stiefel problems, with analytic derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinFamily {
    /// f(U) = tr(A^t U).
    Linear { a: DMatrix<f64> },
    /// f(U) = tr(U^t B U C) with B symmetric (n×n) and C = diag(c) (p×p).
    Brockett { b: DMatrix<f64>, c: DVector<f64> },
    /// f(U) = ½‖A U − B‖_F² with A (m×n), B (m×p).
    Procrustes { a: DMatrix<f64>, b: DMatrix<f64> },
}

impl BuiltinFamily {
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        check_finite(&a)?;
        Ok(BuiltinFamily::Linear { a })
    }

    pub fn brockett(b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        check_finite(&b)?;
        check_finite(&c)?;
        if !b.is_square() {
            return Err(Error::Shape(format!("Brockett B must be square, got {:?}", b.shape())));
        }
        let asym = (&b - b.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidArgument(format!(
                "Brockett B must be symmetric (max asymmetry {asym:.3e})"
            )));
        }
        if c.len() > b.nrows() {
            return Err(Error::Shape(format!(
                "Brockett C has {} entries but B is {}x{}",
                c.len(),
                b.nrows(),
                b.nrows()
            )));
        }
        Ok(BuiltinFamily::Brockett { b, c })
    }

    pub fn procrustes(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_finite(&a)?;
        check_finite(&b)?;
        if a.nrows() != b.nrows() || b.ncols() > a.ncols() {
            return Err(Error::Shape(format!(
                "Procrustes needs A m×n and B m×p with p <= n, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(BuiltinFamily::Procrustes { a, b })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinFamily::Linear { .. } => "linear",
            BuiltinFamily::Brockett { .. } => "brockett",
            BuiltinFamily::Procrustes { .. } => "procrustes",
        }
    }
}

fn check_finite<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
    m: &nalgebra::Matrix<f64, R, C, S>,
) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

impl ScalarField for BuiltinFamily {
    fn shape(&self) -> (usize, usize) {
        match self {
            BuiltinFamily::Linear { a } => a.shape(),
            BuiltinFamily::Brockett { b, c } => (b.nrows(), c.len()),
            BuiltinFamily::Procrustes { a, b } => (a.ncols(), b.ncols()),
        }
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        check_shape(self, u)?;
        Ok(match self {
            BuiltinFamily::Linear { a } => a.dot(u),
            BuiltinFamily::Brockett { b, c } => {
                let bu = b * u;
                (0..c.len()).map(|j| c[j] * u.column(j).dot(&bu.column(j))).sum()
            }
            BuiltinFamily::Procrustes { a, b } => 0.5 * (a * u - b).norm_squared(),
        })
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        Ok(match self {
            BuiltinFamily::Linear { a } => a.clone(),
            BuiltinFamily::Brockett { b, c } => {
                let mut g = b * u * 2.0;
                for (j, mut col) in g.column_iter_mut().enumerate() {
                    col *= c[j];
                }
                g
            }
            BuiltinFamily::Procrustes { a, b } => a.transpose() * (a * u - b),
        })
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let (n, p) = self.shape();
        Ok(match self {
            BuiltinFamily::Linear { .. } => DMatrix::zeros(n * p, n * p),
            BuiltinFamily::Brockett { b, c } => kron(&DMatrix::from_diagonal(c), b) * 2.0,
            BuiltinFamily::Procrustes { a, .. } => kron(&DMatrix::identity(p, p), &(a.transpose() * a)),
        })
    }

    fn describe(&self) -> String {
        let (n, p) = self.shape();
        format!("{} on {n}x{p}", self.name())
    }
}

/// JSON description of a built-in field, as read from `--field-file`.
/// Matrices are given as arrays of rows.
///
/// ```json
/// {"family": "brockett", "b": [[1, 0], [0, 2]], "c": [1, 2]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum BuiltinSpec {
    Linear { a: Vec<Vec<f64>> },
    Brockett { b: Vec<Vec<f64>>, c: Vec<f64> },
    Procrustes { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Shape(format!(
            "matrix {name:?} must be a non-empty rectangular array of rows"
        )));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl BuiltinSpec {
    pub fn build(&self) -> Result<BuiltinFamily> {
        match self {
            BuiltinSpec::Linear { a } => BuiltinFamily::linear(rows_to_matrix("a", a)?),
            BuiltinSpec::Brockett { b, c } => {
                if c.is_empty() {
                    return Err(Error::Shape("Brockett c must be non-empty".into()));
                }
                BuiltinFamily::brockett(rows_to_matrix("b", b)?, DVector::from_column_slice(c))
            }
            BuiltinSpec::Procrustes { a, b } => {
                BuiltinFamily::procrustes(rows_to_matrix("a", a)?, rows_to_matrix("b", b)?)
            }
        }
    }

    pub fn from_family(f: &BuiltinFamily) -> Self {
        match f {
            BuiltinFamily::Linear { a } => BuiltinSpec::Linear { a: matrix_to_rows(a) },
            BuiltinFamily::Brockett { b, c } => BuiltinSpec::Brockett {
                b: matrix_to_rows(b),
                c: c.iter().copied().collect(),
            },
            BuiltinFamily::Procrustes { a, b } => BuiltinSpec::Procrustes {
                a: matrix_to_rows(a),
                b: matrix_to_rows(b),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{fd_hessian, max_rel_diff, FD_HESSIAN_STEP};

    fn eye(n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::identity(n, p)
    }

    #[test]
    fn documented_values() {
        let u = eye(3, 2);
        let lin = BuiltinFamily::linear(eye(3, 2)).unwrap();
        assert_eq!(lin.value(&u).unwrap(), 2.0);
        assert_eq!(lin.gradient(&u).unwrap(), eye(3, 2));
        assert_eq!(lin.hessian(&u).unwrap(), DMatrix::zeros(6, 6));

        let pro = BuiltinFamily::procrustes(eye(3, 3), DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(pro.value(&u).unwrap(), 1.0);

        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let bro = BuiltinFamily::brockett(b, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(bro.value(&u).unwrap(), 5.0);
    }

    #[test]
    fn procrustes_hessian_matches_fd() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, 0.3, 1.1, -0.7]);
        let b = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, -0.4, 0.9]);
        let f = BuiltinFamily::procrustes(a.clone(), b).unwrap();
        let u = DMatrix::from_row_slice(3, 2, &[0.3, -0.1, 0.8, 0.4, -0.2, 0.6]);
        let h = f.hessian(&u).unwrap();
        assert_eq!(h, kron(&eye(2, 2), &(a.transpose() * &a)));
        let hfd = fd_hessian(&f, &u, FD_HESSIAN_STEP).unwrap();
        assert!(max_rel_diff(&h, &hfd) <= 1e-6);
    }

    #[test]
    fn validation() {
        let nonsym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(BuiltinFamily::brockett(nonsym, DVector::from_vec(vec![1.0])).is_err());
        assert!(BuiltinFamily::procrustes(eye(3, 3), DMatrix::zeros(2, 2)).is_err());
        let f = BuiltinFamily::linear(eye(3, 2)).unwrap();
        assert!(matches!(f.value(&eye(2, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"family": "brockett", "b": [[1, 0], [0, 2]], "c": [1, 2]}"#;
        let spec: BuiltinSpec = serde_json::from_str(json).unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.shape(), (2, 2));
        assert_eq!(BuiltinSpec::from_family(&f), spec);
        let bad = r#"{"family": "linear", "a": [[1, 2], [3]]}"#;
        let spec: BuiltinSpec = serde_json::from_str(bad).unwrap();
        assert!(spec.build().is_err());
        assert!(serde_json::from_str::<BuiltinSpec>(r#"{"family": "cubic"}"#).is_err());
    }
}
