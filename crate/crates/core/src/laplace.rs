//! Laplace–Beltrami operator on St_p^n.
//!
//! [`laplace_closed`] evaluates
//!
//! ```text
//! Δ_St f(U) = Δf(U) − (n − (p+1)/2)·tr(U^t∇f(U)) − ½·tr((I_p ⊗ UU^t + Λ(U))·Hess f(U))
//! ```
//!
//! by block contraction (no np×np storage), cross-checked against a literal
//! dense evaluation when np is within the size cap.
//!
//! [`laplace_frame_oracle`] evaluates the same operator from scratch as
//! tr(P·Hess f) − Σ_α σ_α tr(P·Hess F_α), with P = T(T^tT)^{-1}T^t built from
//! the explicit tangent frame and σ_α solved from the Gram system of the
//! constraint gradients.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ambient::{constraint_gradient, constraint_hessian, kron, vec, ConstraintIndex, StiefelPoint};
use crate::error::{Error, Result};
use crate::functions::{check_shape, ScalarField};
use crate::tangent::{
    build_t, check_size, select_full_rank_rows, tangency_residual, tangent_basis_with, RowSelection, DEFAULT_RANK_TOL,
    DEFAULT_SIZE_CAP,
};

/// Relative agreement required between the dense and block closed-form paths.
pub const CLOSED_PATH_AGREEMENT: f64 = 1e-10;

/// Tangency tolerance for arguments of [`riemannian_hessian_form`].
pub const TANGENCY_TOL: f64 = 1e-8;

/// Tolerance on |‖u‖ − 1| for [`sphere_laplacian`].
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// |a − b| / max(1, |b|).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Λ(U): np×np with block (i, j) = u_j u_i^t.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaMatrix(DMatrix<f64>);

impl LambdaMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn lambda_of(u: &StiefelPoint) -> LambdaMatrix {
    let (n, p) = (u.n(), u.p());
    let um = u.as_matrix();
    let mut m = DMatrix::zeros(n * p, n * p);
    for i in 0..p {
        for j in 0..p {
            let block = um.column(j) * um.column(i).transpose();
            m.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    LambdaMatrix(m)
}

/// Σ(U): the p×p symmetric matrix of Lagrange multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaMatrix(DMatrix<f64>);

impl SigmaMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// σ_bc, 1-based; σ_cb = σ_bc.
    pub fn entry(&self, b: usize, c: usize) -> f64 {
        self.0[(b - 1, c - 1)]
    }

    pub fn get(&self, idx: ConstraintIndex) -> f64 {
        match idx {
            ConstraintIndex::Diag(a) => self.entry(a, a),
            ConstraintIndex::OffDiag(b, c) => self.entry(b, c),
        }
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Σ from a Euclidean gradient using σ_aa = ⟨∂f/∂u_a, u_a⟩ and
/// σ_bc = ½(⟨∂f/∂u_c, u_b⟩ + ⟨∂f/∂u_b, u_c⟩).
pub fn sigma_from_gradient(u: &DMatrix<f64>, grad: &DMatrix<f64>) -> SigmaMatrix {
    let p = u.ncols();
    let mut s = DMatrix::zeros(p, p);
    for a in 0..p {
        s[(a, a)] = grad.column(a).dot(&u.column(a));
        for b in a + 1..p {
            let v = 0.5 * (grad.column(b).dot(&u.column(a)) + grad.column(a).dot(&u.column(b)));
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    SigmaMatrix(s)
}

pub fn sigma_of<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<SigmaMatrix> {
    check_shape(f, u.as_matrix())?;
    Ok(sigma_from_gradient(u.as_matrix(), &f.gradient(u.as_matrix())?))
}

/// Multipliers from the Gram system of the constraint gradients, solved by
/// Cramer's rule: σ_α = det(G with column α replaced by b) / det(G), where
/// G_αβ = ⟨∇F_α, ∇F_β⟩ and b_α = ⟨∇F_α, ∇f⟩.
pub fn sigma_gram_oracle<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<SigmaMatrix> {
    let um = u.as_matrix();
    check_shape(f, um)?;
    let p = u.p();
    let grad = f.gradient(um)?;
    let idx = ConstraintIndex::all(p);
    let grads: Vec<DMatrix<f64>> = idx.iter().map(|&a| constraint_gradient(a, um)).collect::<Result<_>>()?;
    let k = idx.len();
    let gram = DMatrix::from_fn(k, k, |a, b| grads[a].dot(&grads[b]));
    let rhs: Vec<f64> = grads.iter().map(|g| g.dot(&grad)).collect();
    let det = gram.determinant();
    let scale = gram.amax().powi(k as i32);
    if det.abs() <= 1e-12 * scale {
        return Err(Error::Degenerate(format!(
            "constraint Gram matrix is singular (det = {det:.3e})"
        )));
    }
    let mut s = DMatrix::zeros(p, p);
    for (alpha, &ix) in idx.iter().enumerate() {
        let mut replaced = gram.clone();
        for (beta, &r) in rhs.iter().enumerate() {
            replaced[(beta, alpha)] = r;
        }
        let sigma = replaced.determinant() / det;
        match ix {
            ConstraintIndex::Diag(a) => s[(a - 1, a - 1)] = sigma,
            ConstraintIndex::OffDiag(b, c) => {
                s[(b - 1, c - 1)] = sigma;
                s[(c - 1, b - 1)] = sigma;
            }
        }
    }
    Ok(SigmaMatrix(s))
}

/// Evaluation route recorded in a [`LaplaceReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedDense,
    ClosedBlock,
    FrameOracle,
    Sphere,
    SpecialOrthogonal,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedDense => "closed-dense",
            Method::ClosedBlock => "closed-block",
            Method::FrameOracle => "frame-oracle",
            Method::Sphere => "sphere",
            Method::SpecialOrthogonal => "special-orthogonal",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// |det U_1| of the row selection, when a tangent frame was built.
    pub det_u1: Option<f64>,
    /// max |U^tU − I_p|.
    pub orthonormality_residual: f64,
    /// Relative gap between the dense and block closed-form values, when both ran.
    pub dense_block_gap: Option<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaplaceReport {
    pub value: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl LaplaceReport {
    fn new(value: f64, method: Method, u: &StiefelPoint, start: Instant) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Degenerate(format!(
                "{} produced a non-finite value",
                method.as_str()
            )));
        }
        Ok(Self {
            value,
            method,
            diagnostics: Diagnostics {
                orthonormality_residual: u.residual(),
                elapsed_seconds: start.elapsed().as_secs_f64(),
                ..Diagnostics::default()
            },
        })
    }
}

fn derivatives<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let um = u.as_matrix();
    check_shape(f, um)?;
    Ok((f.gradient(um)?, f.hessian(um)?))
}

fn coefficient(n: usize, p: usize) -> f64 {
    n as f64 - (p as f64 + 1.0) / 2.0
}

/// Closed form by block contraction:
/// tr((I_p ⊗ UU^t)H) = Σ_a tr(U^t H_aa U) and tr(Λ H) = Σ_{i,j} u_i^t H_(j,i) u_j.
pub fn closed_block_value(u: &DMatrix<f64>, grad: &DMatrix<f64>, hess: &DMatrix<f64>) -> f64 {
    let (n, p) = u.shape();
    let mut kron_term = 0.0;
    let mut lambda_term = 0.0;
    for i in 0..p {
        let hii = hess.view((i * n, i * n), (n, n));
        kron_term += (u.transpose() * hii * u).trace();
        for j in 0..p {
            let hji = hess.view((j * n, i * n), (n, n));
            lambda_term += u.column(i).dot(&(hji * u.column(j)));
        }
    }
    hess.trace() - coefficient(n, p) * u.dot(grad) - 0.5 * (kron_term + lambda_term)
}

/// Closed form with I_p ⊗ UU^t and Λ(U) materialized.
pub fn closed_dense_value(u: &StiefelPoint, grad: &DMatrix<f64>, hess: &DMatrix<f64>) -> f64 {
    let (n, p) = (u.n(), u.p());
    let um = u.as_matrix();
    let m = kron(&DMatrix::identity(p, p), &(um * um.transpose())) + lambda_of(u).into_matrix();
    let tr_mh = (m * hess).trace();
    hess.trace() - coefficient(n, p) * um.dot(grad) - 0.5 * tr_mh
}

/// Closed-form Laplacian, block path only.
pub fn laplace_closed_block<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<LaplaceReport> {
    let start = Instant::now();
    let (g, h) = derivatives(f, u)?;
    LaplaceReport::new(closed_block_value(u.as_matrix(), &g, &h), Method::ClosedBlock, u, start)
}

/// Closed-form Laplacian, dense path only (np ≤ size cap).
pub fn laplace_closed_dense<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<LaplaceReport> {
    let start = Instant::now();
    check_size(u.n() * u.p(), DEFAULT_SIZE_CAP)?;
    let (g, h) = derivatives(f, u)?;
    LaplaceReport::new(closed_dense_value(u, &g, &h), Method::ClosedDense, u, start)
}

/// Closed-form Laplacian. Returns the block-contraction value; when np is
/// within the size cap the dense evaluation runs too and the two must agree
/// to [`CLOSED_PATH_AGREEMENT`] (relative, floor 1).
pub fn laplace_closed<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<LaplaceReport> {
    let start = Instant::now();
    let (g, h) = derivatives(f, u)?;
    let block = closed_block_value(u.as_matrix(), &g, &h);
    let gap = if u.n() * u.p() <= DEFAULT_SIZE_CAP {
        let dense = closed_dense_value(u, &g, &h);
        let gap = rel_err(dense, block);
        if gap.is_nan() || gap > CLOSED_PATH_AGREEMENT {
            return Err(Error::Degenerate(format!(
                "dense ({dense}) and block ({block}) closed-form values disagree (rel {gap:.3e})"
            )));
        }
        Some(gap)
    } else {
        None
    };
    let mut report = LaplaceReport::new(block, Method::ClosedBlock, u, start)?;
    report.diagnostics.dense_block_gap = gap;
    Ok(report)
}

/// Knobs for [`laplace_frame_oracle_with`].
#[derive(Clone, Debug)]
pub struct FrameOptions {
    pub size_cap: usize,
    pub rank_tol: f64,
    /// Row selection to use instead of the greedy one.
    pub selection: Option<RowSelection>,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            size_cap: DEFAULT_SIZE_CAP,
            rank_tol: DEFAULT_RANK_TOL,
            selection: None,
        }
    }
}

pub fn laplace_frame_oracle<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<LaplaceReport> {
    laplace_frame_oracle_with(f, u, &FrameOptions::default())
}

/// Laplacian from the explicit frame: tr(P·Hess f) − Σ_α σ_α tr(P·Hess F_α),
/// with P = T(T^tT)^{-1}T^t (generic inverse) and σ from the Gram system.
pub fn laplace_frame_oracle_with<F: ScalarField + ?Sized>(
    f: &F,
    u: &StiefelPoint,
    opts: &FrameOptions,
) -> Result<LaplaceReport> {
    let start = Instant::now();
    let (n, p) = (u.n(), u.p());
    let um = u.as_matrix();
    check_shape(f, um)?;
    check_size(n * p, opts.size_cap)?;
    let selection = match &opts.selection {
        Some(s) => s.clone(),
        None => select_full_rank_rows(u, opts.rank_tol)?,
    };
    let det_u1 = selection.det_u1().abs();
    let basis = tangent_basis_with(u, selection)?;
    let t = build_t(&basis);
    let tm = t.matrix();
    let proj = if tm.ncols() == 0 {
        DMatrix::zeros(n * p, n * p)
    } else {
        let gram = tm.transpose() * tm;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("T^tT is singular".into()))?;
        tm * inv * tm.transpose()
    };
    let trace_with = |h: &DMatrix<f64>| proj.component_mul(&h.transpose()).sum();
    let hess = f.hessian(um)?;
    let sigma = sigma_gram_oracle(f, u)?;
    let mut value = trace_with(&hess);
    for idx in ConstraintIndex::all(p) {
        value -= sigma.get(idx) * trace_with(&constraint_hessian(idx, n, p)?);
    }
    let mut report = LaplaceReport::new(value, Method::FrameOracle, u, start)?;
    report.diagnostics.det_u1 = Some(det_u1);
    Ok(report)
}

/// vec(V1)^t (Hess f − Σ ⊗ I_n) vec(V2) for tangent V1, V2, symmetrized so
/// that swapping the arguments gives a bitwise-identical result.
pub fn riemannian_hessian_form<F: ScalarField + ?Sized>(
    f: &F,
    u: &StiefelPoint,
    v1: &DMatrix<f64>,
    v2: &DMatrix<f64>,
) -> Result<f64> {
    let um = u.as_matrix();
    check_shape(f, um)?;
    for v in [v1, v2] {
        check_shape(f, v)?;
        let r = tangency_residual(u, v);
        if r > TANGENCY_TOL {
            return Err(Error::NotTangent(r));
        }
    }
    let (g, h) = derivatives(f, u)?;
    let sigma = sigma_from_gradient(um, &g);
    Ok(hessian_form_from(&h, sigma.matrix(), v1, v2))
}

fn hessian_form_from(h: &DMatrix<f64>, sigma: &DMatrix<f64>, v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> f64 {
    let (x, y) = (vec(v1), vec(v2));
    let one_way = |a: &DMatrix<f64>, av: &nalgebra::DVector<f64>, b: &DMatrix<f64>, bv: &nalgebra::DVector<f64>| {
        av.dot(&(h * bv)) - a.dot(&(b * sigma))
    };
    0.5 * (one_way(v1, &x, v2, &y) + one_way(v2, &y, v1, &x))
}

/// Riemannian Hessian form on a batch of tangent vectors, reusing one
/// derivative evaluation: returns Σ_k form(E_k, E_k).
pub fn hessian_form_trace<F: ScalarField + ?Sized>(
    f: &F,
    u: &StiefelPoint,
    orthonormal_tangents: &[DMatrix<f64>],
) -> Result<f64> {
    let (g, h) = derivatives(f, u)?;
    let sigma = sigma_from_gradient(u.as_matrix(), &g);
    let mut acc = 0.0;
    for e in orthonormal_tangents {
        let r = tangency_residual(u, e);
        if r > TANGENCY_TOL {
            return Err(Error::NotTangent(r));
        }
        acc += hessian_form_from(&h, sigma.matrix(), e, e);
    }
    Ok(acc)
}

/// Laplacian on S^{n−1} ⊂ R^n: Δf − (n−1)⟨∇f, u⟩ − u^t(Hess f)u.
pub fn sphere_laplacian<F: ScalarField + ?Sized>(f: &F, u: &DMatrix<f64>) -> Result<f64> {
    if u.ncols() != 1 {
        return Err(Error::Shape(format!(
            "sphere Laplacian needs a column vector, got {:?}",
            u.shape()
        )));
    }
    check_shape(f, u)?;
    let norm = u.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidArgument(format!(
            "point must be a unit vector, got norm {norm}"
        )));
    }
    let n = u.nrows() as f64;
    let g = f.gradient(u)?;
    let h = f.hessian(u)?;
    let x = u.column(0);
    Ok(h.trace() - (n - 1.0) * g.column(0).dot(&x) - x.dot(&(&h * x)))
}

/// Laplacian on the orthogonal group (p = n):
/// Δf − ((n−1)/2)·tr(U^t∇f) − ½·tr((I_{n²} + Λ(U))·Hess f).
pub fn special_orthogonal_laplacian<F: ScalarField + ?Sized>(f: &F, u: &StiefelPoint) -> Result<f64> {
    let n = u.n();
    if u.p() != n {
        return Err(Error::InvalidArgument(format!(
            "orthogonal-group Laplacian needs a square point, got {}x{}",
            n,
            u.p()
        )));
    }
    let (g, h) = derivatives(f, u)?;
    let lambda = lambda_of(u);
    let tr_lh = lambda.matrix().component_mul(&h.transpose()).sum();
    let delta = h.trace();
    Ok(delta - 0.5 * (n as f64 - 1.0) * u.as_matrix().dot(&g) - 0.5 * (delta + tr_lh))
}
