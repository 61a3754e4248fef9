//! Fields built from other fields: constraint functions, linear
//! combinations, products and pullbacks along U ↦ QUR.

use nalgebra::DMatrix;

use super::{check_shape, FieldRef, ScalarField};
use crate::ambient::{self, kron, vec, ConstraintIndex};
use crate::error::{Error, Result};

/// A Stiefel constraint function F_α viewed as an ambient field.
#[derive(Clone, Debug)]
pub struct ConstraintField {
    idx: ConstraintIndex,
    n: usize,
    p: usize,
}

impl ConstraintField {
    pub fn new(idx: ConstraintIndex, n: usize, p: usize) -> Result<Self> {
        idx.check(p)?;
        Ok(Self { idx, n, p })
    }

    pub fn index(&self) -> ConstraintIndex {
        self.idx
    }
}

impl ScalarField for ConstraintField {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        check_shape(self, u)?;
        ambient::constraint_value(self.idx, u)
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        ambient::constraint_gradient(self.idx, u)
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        ambient::constraint_hessian(self.idx, self.n, self.p)
    }

    fn describe(&self) -> String {
        self.idx.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct ConstantField {
    pub value: f64,
    pub n: usize,
    pub p: usize,
}

impl ScalarField for ConstantField {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        check_shape(self, u)?;
        Ok(self.value)
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        Ok(DMatrix::zeros(self.n, self.p))
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let m = self.n * self.p;
        Ok(DMatrix::zeros(m, m))
    }

    fn describe(&self) -> String {
        format!("{}", self.value)
    }
}

fn same_shape(fields: &[&FieldRef]) -> Result<(usize, usize)> {
    let shape = fields[0].shape();
    if let Some(bad) = fields.iter().find(|f| f.shape() != shape) {
        return Err(Error::Shape(format!(
            "cannot combine fields on {:?} and {:?}",
            shape,
            bad.shape()
        )));
    }
    Ok(shape)
}

/// Σ c_i f_i.
#[derive(Clone)]
pub struct LinearCombination {
    terms: Vec<(f64, FieldRef)>,
    shape: (usize, usize),
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty linear combination".into()));
        }
        let refs: Vec<&FieldRef> = terms.iter().map(|(_, f)| f).collect();
        let shape = same_shape(&refs)?;
        Ok(Self { terms, shape })
    }
}

impl ScalarField for LinearCombination {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (c, f) in &self.terms {
            acc += c * f.value(u)?;
        }
        Ok(acc)
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(self.shape.0, self.shape.1);
        for (c, f) in &self.terms {
            acc += f.gradient(u)? * *c;
        }
        Ok(acc)
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = self.shape.0 * self.shape.1;
        let mut acc = DMatrix::zeros(m, m);
        for (c, f) in &self.terms {
            acc += f.hessian(u)? * *c;
        }
        Ok(acc)
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, f)| format!("{c}*({})", f.describe()))
            .collect();
        parts.join(" + ")
    }
}

/// f·g.
#[derive(Clone)]
pub struct ProductField {
    f: FieldRef,
    g: FieldRef,
}

impl ProductField {
    pub fn new(f: FieldRef, g: FieldRef) -> Result<Self> {
        same_shape(&[&f, &g])?;
        Ok(Self { f, g })
    }
}

impl ScalarField for ProductField {
    fn shape(&self) -> (usize, usize) {
        self.f.shape()
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        Ok(self.f.value(u)? * self.g.value(u)?)
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.f.gradient(u)? * self.g.value(u)? + self.g.gradient(u)? * self.f.value(u)?)
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (fv, gv) = (self.f.value(u)?, self.g.value(u)?);
        let df = vec(&self.f.gradient(u)?);
        let dg = vec(&self.g.gradient(u)?);
        let cross = &df * dg.transpose();
        Ok(self.f.hessian(u)? * gv + self.g.hessian(u)? * fv + &cross + cross.transpose())
    }

    fn describe(&self) -> String {
        format!("({})*({})", self.f.describe(), self.g.describe())
    }
}

/// g(U) = f(Q U R) for Q (n×n) and R (p×p).
///
/// With J = R^t ⊗ Q, vec(QUR) = J vec(U), so ∇g = Q^t ∇f R^t and
/// Hess g = J^t (Hess f) J.
#[derive(Clone)]
pub struct IsometryPullback {
    inner: FieldRef,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl IsometryPullback {
    pub fn new(inner: FieldRef, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let (n, p) = inner.shape();
        if q.shape() != (n, n) || r.shape() != (p, p) {
            return Err(Error::Shape(format!(
                "pullback of a field on {n}x{p} needs Q {n}x{n} and R {p}x{p}, got {:?} and {:?}",
                q.shape(),
                r.shape()
            )));
        }
        Ok(Self { inner, q, r })
    }

    fn map(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.q * u * &self.r
    }
}

impl ScalarField for IsometryPullback {
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        check_shape(self, u)?;
        self.inner.value(&self.map(u))
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let g = self.inner.gradient(&self.map(u))?;
        Ok(self.q.transpose() * g * self.r.transpose())
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let h = self.inner.hessian(&self.map(u))?;
        let j = kron(&self.r.transpose(), &self.q);
        Ok(j.transpose() * h * j)
    }

    fn describe(&self) -> String {
        format!("({}) o (U -> QUR)", self.inner.describe())
    }
}
