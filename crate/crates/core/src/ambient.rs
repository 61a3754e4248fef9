//! Ambient space M_{n×p}(R): matrix carriers, column vectorization,
//! Kronecker/commutation algebra, the Stiefel constraint functions and
//! reproducible random points.
//!
//! Indices in the public API (`entry`, `column`, [`ConstraintIndex`]) are
//! 1-based to match the mathematical notation. Vectorization stacks columns:
//! entry (i, j) of an n×p matrix lands at position (j−1)·n + i of `vec`.

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default tolerance on max |U^tU − I_p| for accepting a [`StiefelPoint`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Relative singular-value threshold below which a matrix is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Shape-tagged dense real matrix with finite entries.
///
/// Dereferences to the underlying column-major `nalgebra` matrix for
/// read-only linear algebra.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Validates finiteness and non-empty shape.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Shape(format!(
                "matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Builds from row-major data, the natural reading order for literals.
    pub fn from_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    /// The n×p matrix whose columns are the first p canonical vectors (I_{n×p}).
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self(DMatrix::identity(rows, cols))
    }

    pub(crate) fn from_raw(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        Self(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    /// Entry (i, j), 1-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.0[(i - 1, j - 1)]
    }

    /// Column j, 1-based.
    pub fn column_vec(&self, j: usize) -> DVector<f64> {
        self.0.column(j - 1).into_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix{:?}{}", self.0.shape(), self.0)
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

/// max |U^tU − I_p|.
pub fn orthonormality_residual(u: &DMatrix<f64>) -> f64 {
    let p = u.ncols();
    (u.transpose() * u - DMatrix::<f64>::identity(p, p)).amax()
}

/// A point of St_p^n: an n×p matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint {
    u: DenseMatrix,
    residual: f64,
}

impl StiefelPoint {
    /// Accepts `u` if max |U^tU − I_p| ≤ [`ORTHONORMALITY_TOL`].
    pub fn new(u: DenseMatrix) -> Result<Self> {
        Self::with_tolerance(u, ORTHONORMALITY_TOL)
    }

    /// Accepts `u` under a caller-chosen orthonormality tolerance. Points are
    /// never repaired here; use [`project_to_stiefel`] explicitly.
    pub fn with_tolerance(u: DenseMatrix, tolerance: f64) -> Result<Self> {
        if u.cols() > u.rows() {
            return Err(Error::InvalidArgument(format!(
                "Stiefel point needs p <= n, got n={}, p={}",
                u.rows(),
                u.cols()
            )));
        }
        let residual = orthonormality_residual(&u);
        if residual > tolerance {
            return Err(Error::NotOnManifold {
                residual,
                tolerance,
                hint: "; project it with project_to_stiefel first",
            });
        }
        Ok(Self { u, residual })
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn p(&self) -> usize {
        self.u.cols()
    }

    /// Column u_a, 1-based.
    pub fn column(&self, a: usize) -> DVector<f64> {
        self.u.column_vec(a)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.u.as_matrix()
    }

    /// max |U^tU − I_p| measured at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Manifold dimension np − p(p+1)/2.
    pub fn manifold_dim(&self) -> usize {
        let (n, p) = (self.n(), self.p());
        n * p - p * (p + 1) / 2
    }
}

/// Index α of a Stiefel constraint function F_α.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintIndex {
    /// F_aa(U) = ½‖u_a‖², regular value ½.
    Diag(usize),
    /// F_bc(U) = ⟨u_b, u_c⟩ with b < c, regular value 0.
    OffDiag(usize, usize),
}

impl ConstraintIndex {
    pub fn diag(a: usize, p: usize) -> Result<Self> {
        let idx = ConstraintIndex::Diag(a);
        idx.check(p)?;
        Ok(idx)
    }

    /// Normalizes the pair so that b < c.
    pub fn off_diag(b: usize, c: usize, p: usize) -> Result<Self> {
        let idx = ConstraintIndex::OffDiag(b.min(c), b.max(c));
        if b == c {
            return Err(Error::IndexOutOfRange(format!(
                "off-diagonal constraint needs b != c, got ({b},{c})"
            )));
        }
        idx.check(p)?;
        Ok(idx)
    }

    /// All p(p+1)/2 constraints: the diagonal ones first, then (b,c) in
    /// lexicographic order.
    pub fn all(p: usize) -> Vec<ConstraintIndex> {
        let mut out: Vec<_> = (1..=p).map(ConstraintIndex::Diag).collect();
        for b in 1..=p {
            for c in b + 1..=p {
                out.push(ConstraintIndex::OffDiag(b, c));
            }
        }
        out
    }

    /// The regular value c_α defining St_p^n as a level set.
    pub fn regular_value(self) -> f64 {
        match self {
            ConstraintIndex::Diag(_) => 0.5,
            ConstraintIndex::OffDiag(..) => 0.0,
        }
    }

    pub fn check(self, p: usize) -> Result<()> {
        let ok = match self {
            ConstraintIndex::Diag(a) => (1..=p).contains(&a),
            ConstraintIndex::OffDiag(b, c) => b >= 1 && b < c && c <= p,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange(format!("{self} with p = {p}")))
        }
    }
}

impl fmt::Display for ConstraintIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintIndex::Diag(a) => write!(f, "F[{a},{a}]"),
            ConstraintIndex::OffDiag(b, c) => write!(f, "F[{b},{c}]"),
        }
    }
}

/// Column stacking.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!(
            "vector of length {} cannot be reshaped to {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product; block (i, j) of the result is A(i, j)·B.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for j in 0..ca {
        for i in 0..ra {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * rb, j * cb), (rb, cb)).copy_from(&(b * s));
        }
    }
    out
}

/// The commutation matrix K_{p,n}: the np×np permutation with
/// K·vec(X) = vec(X^t) for every p×n matrix X.
///
/// With this orientation Λ(U) = K_{p,n}·(U ⊗ U^t) for U ∈ St_p^n.
pub fn commutation_matrix(p: usize, n: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n * p, n * p);
    for i in 0..p {
        for j in 0..n {
            // X(i, j) sits at j·p + i in vec(X) and at i·n + j in vec(X^t).
            k[(i * n + j, j * p + i)] = 1.0;
        }
    }
    k
}

fn check_constraint_shape(idx: ConstraintIndex, p: usize) -> Result<()> {
    idx.check(p)
}

/// F_α(U): ½‖u_a‖² or ⟨u_b, u_c⟩. U need not be orthonormal.
pub fn constraint_value(idx: ConstraintIndex, u: &DMatrix<f64>) -> Result<f64> {
    check_constraint_shape(idx, u.ncols())?;
    Ok(match idx {
        ConstraintIndex::Diag(a) => 0.5 * u.column(a - 1).norm_squared(),
        ConstraintIndex::OffDiag(b, c) => u.column(b - 1).dot(&u.column(c - 1)),
    })
}

/// ∇F_α(U) in matrix form.
pub fn constraint_gradient(idx: ConstraintIndex, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_constraint_shape(idx, u.ncols())?;
    let mut g = DMatrix::zeros(u.nrows(), u.ncols());
    match idx {
        ConstraintIndex::Diag(a) => g.set_column(a - 1, &u.column(a - 1)),
        ConstraintIndex::OffDiag(b, c) => {
            g.set_column(b - 1, &u.column(c - 1));
            g.set_column(c - 1, &u.column(b - 1));
        }
    }
    Ok(g)
}

/// Hess F_α, constant in U: identity blocks at (a,a), or at (b,c) and (c,b).
pub fn constraint_hessian(idx: ConstraintIndex, n: usize, p: usize) -> Result<DMatrix<f64>> {
    check_constraint_shape(idx, p)?;
    let mut h = DMatrix::zeros(n * p, n * p);
    let eye = DMatrix::<f64>::identity(n, n);
    match idx {
        ConstraintIndex::Diag(a) => h.view_mut(((a - 1) * n, (a - 1) * n), (n, n)).copy_from(&eye),
        ConstraintIndex::OffDiag(b, c) => {
            h.view_mut(((b - 1) * n, (c - 1) * n), (n, n)).copy_from(&eye);
            h.view_mut(((c - 1) * n, (b - 1) * n), (n, n)).copy_from(&eye);
        }
    }
    Ok(h)
}

/// Orthonormalizes the columns of a full-rank n×p matrix with the sign
/// convention diag(R) > 0, returning Q.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = m.shape();
    if p > n {
        return Err(Error::InvalidArgument(format!(
            "cannot orthonormalize {p} columns in R^{n}"
        )));
    }
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for k in 0..p {
        let d = r[(k, k)];
        if d.abs() <= RANK_TOL * scale {
            return Err(Error::Degenerate(format!(
                "rank loss during orthonormalization (|R[{k},{k}]| = {:.3e})",
                d.abs()
            )));
        }
        if d < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    Ok(q)
}

/// Haar-distributed point of St_p^n drawn from an explicit generator state.
pub fn random_stiefel_with<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<StiefelPoint> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "random Stiefel point needs 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = orthonormalize(&g)?;
    StiefelPoint::with_tolerance(DenseMatrix::from_raw(q), 1e-12)
}

/// Deterministic Haar sample for a given seed.
pub fn random_stiefel(n: usize, p: usize, seed: u64) -> Result<StiefelPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_stiefel_with(n, p, &mut rng)
}

/// Orthogonal polar factor of a full-column-rank M: the closest Stiefel
/// point in Frobenius norm.
pub fn project_to_stiefel(m: &DenseMatrix) -> Result<StiefelPoint> {
    let (n, p) = m.shape();
    if p > n {
        return Err(Error::InvalidArgument(format!(
            "cannot project a {n}x{p} matrix onto St_{p}^{n}"
        )));
    }
    let svd = m.as_matrix().clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= RANK_TOL * smax {
        return Err(Error::Degenerate(format!(
            "matrix is rank deficient (singular values in [{smin:.3e}, {smax:.3e}])"
        )));
    }
    let (Some(w), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::Degenerate("SVD did not converge".into()));
    };
    StiefelPoint::new(DenseMatrix::from_raw(w * vt))
}

/// Parses the matrix text format: a header line "n p" followed by n lines of
/// p numbers separated by spaces.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Format {
        line: 1,
        message: "empty input, expected header \"n p\"".into(),
    })?;
    let dims: Vec<&str> = header.split_ascii_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| Error::Format {
            line: hline,
            message: format!("invalid dimension {s:?}"),
        })
    };
    if dims.len() != 2 {
        return Err(Error::Format {
            line: hline,
            message: format!("header must be \"n p\", got {header:?}"),
        });
    }
    let (n, p) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(n * p);
    let mut last = hline;
    for r in 0..n {
        let (lno, line) = lines.next().ok_or(Error::Format {
            line: last + 1,
            message: format!("expected {n} rows, found {r}"),
        })?;
        last = lno;
        let row: Vec<&str> = line.split_ascii_whitespace().collect();
        if row.len() != p {
            return Err(Error::Format {
                line: lno,
                message: format!("expected {p} numbers, found {}", row.len()),
            });
        }
        for tok in row {
            let x: f64 = tok.parse().map_err(|_| Error::Format {
                line: lno,
                message: format!("invalid number {tok:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Format {
                    line: lno,
                    message: format!("non-finite value {tok:?}"),
                });
            }
            data.push(x);
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(Error::Format {
            line: lno,
            message: format!("unexpected content after {n} rows"),
        });
    }
    DenseMatrix::from_rows(n, p, &data)
}

/// Writes the matrix text format with shortest round-trip decimals.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
