//! Explicit tangent frame of St_p^n and the orthogonal projector onto the
//! tangent space.
//!
//! The frame at U consists of
//!
//! * Δ′_ab = U·A_ab for 1 ≤ a < b ≤ p, with A_ab = (−1)^{a+b}(f_a f_b^t − f_b f_a^t);
//! * Δ″_ic = Z·e_i f_c^t for the n − p rows i outside a selected invertible
//!   p×p block U_1 of U, and c = 1..p, where Z = I_n − UU^t.
//!
//! Stacking vec(Δ′) (lexicographic in (a,b)) and vec(Δ″) (colexicographic in
//! (i,c)) column-wise gives the transformation matrix T = [T_1 | T_2].

use nalgebra::{DMatrix, DVector};

use crate::ambient::{kron, unvec, vec, StiefelPoint};
use crate::error::{Error, Result};
use crate::laplace::lambda_of;

/// Default lower bound on |det U_1| for an accepted row selection.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Default cap on np for routines that materialize np×np matrices.
pub const DEFAULT_SIZE_CAP: usize = 400;

pub(crate) fn check_size(np: usize, cap: usize) -> Result<()> {
    if np > cap {
        Err(Error::SizeCap { np, cap })
    } else {
        Ok(())
    }
}

/// Rows of U split into an invertible p×p block U_1 and the remaining
/// (n−p)×p block U_2.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSelection {
    /// 0-based row indices forming U_1, ascending.
    selected: Vec<usize>,
    /// 0-based remaining rows, ascending.
    rest: Vec<usize>,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
    det_u1: f64,
}

impl RowSelection {
    /// Builds a selection from explicit 1-based row indices.
    pub fn from_rows(u: &StiefelPoint, rows: &[usize], rank_tol: f64) -> Result<Self> {
        let (n, p) = (u.n(), u.p());
        let mut selected: Vec<usize> = rows.iter().map(|r| r.wrapping_sub(1)).collect();
        selected.sort_unstable();
        selected.dedup();
        if selected.len() != p || selected.iter().any(|&r| r >= n) {
            return Err(Error::InvalidArgument(format!(
                "row selection must name {p} distinct rows in 1..={n}, got {rows:?}"
            )));
        }
        let rest: Vec<usize> = (0..n).filter(|r| !selected.contains(r)).collect();
        let m = u.as_matrix();
        let u1 = m.select_rows(selected.iter());
        let u2 = if rest.is_empty() {
            DMatrix::zeros(0, p)
        } else {
            m.select_rows(rest.iter())
        };
        let det_u1 = u1.determinant();
        if det_u1.abs() <= rank_tol {
            return Err(Error::Degenerate(format!(
                "selected rows {rows:?} give |det U_1| = {:.3e} <= {rank_tol:.1e}",
                det_u1.abs()
            )));
        }
        Ok(Self {
            selected,
            rest,
            u1,
            u2,
            det_u1,
        })
    }

    /// 1-based rows forming U_1.
    pub fn selected_rows(&self) -> Vec<usize> {
        self.selected.iter().map(|r| r + 1).collect()
    }

    /// 1-based rows forming U_2.
    pub fn remaining_rows(&self) -> Vec<usize> {
        self.rest.iter().map(|r| r + 1).collect()
    }

    /// Row permutation (1-based) placing the selected rows first.
    pub fn permutation(&self) -> Vec<usize> {
        self.selected.iter().chain(&self.rest).map(|r| r + 1).collect()
    }

    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &DMatrix<f64> {
        &self.u2
    }

    pub fn det_u1(&self) -> f64 {
        self.det_u1
    }

    /// Z_2: the rows of Z = I − UU^t indexed by the remaining rows.
    pub fn z2(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rest.is_empty() {
            DMatrix::zeros(0, z.ncols())
        } else {
            z.select_rows(self.rest.iter())
        }
    }

    /// (I_{n−p} − U_2U_2^t)^{-1} in Woodbury form I + U_2 U_1^{-1} U_1^{-t} U_2^t.
    pub fn woodbury_inverse(&self) -> Result<DMatrix<f64>> {
        let k = self.rest.len();
        let u1_inv = self
            .u1
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("U_1 is singular".into()))?;
        let w = &self.u2 * &u1_inv;
        Ok(DMatrix::identity(k, k) + &w * w.transpose())
    }
}

/// Greedy volume-maximizing row pivoting: repeatedly picks the row with the
/// largest component orthogonal to the rows already chosen (lowest index on
/// ties).
pub fn select_full_rank_rows(u: &StiefelPoint, rank_tol: f64) -> Result<RowSelection> {
    let (n, p) = (u.n(), u.p());
    let mut residual = u.as_matrix().clone();
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let norm = residual.row(i).norm();
            if best.is_none_or(|(_, b)| norm > b) {
                best = Some((i, norm));
            }
        }
        let (i, norm) = best.expect("p <= n leaves a candidate row");
        if norm == 0.0 {
            return Err(Error::Degenerate("U has rank below p".into()));
        }
        chosen.push(i);
        let q = residual.row(i).transpose() / norm;
        let coeffs = &residual * &q;
        residual -= coeffs * q.transpose();
    }
    let rows: Vec<usize> = chosen.iter().map(|r| r + 1).collect();
    RowSelection::from_rows(u, &rows, rank_tol)
}

/// A_ab = (−1)^{a+b}(f_a f_b^t − f_b f_a^t), 1 ≤ a < b ≤ p.
pub fn skew_basis_matrix(a: usize, b: usize, p: usize) -> Result<DMatrix<f64>> {
    if !(1 <= a && a < b && b <= p) {
        return Err(Error::IndexOutOfRange(format!(
            "skew basis needs 1 <= a < b <= p, got a={a}, b={b}, p={p}"
        )));
    }
    let sign = if (a + b).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut m = DMatrix::zeros(p, p);
    m[(a - 1, b - 1)] = sign;
    m[(b - 1, a - 1)] = -sign;
    Ok(m)
}

/// Identifies a frame vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisLabel {
    /// Δ′_ab with 1 ≤ a < b ≤ p.
    Skew { a: usize, b: usize },
    /// Δ″_ic with i a remaining (1-based, original) row index.
    Normal { i: usize, c: usize },
}

/// The explicit frame B_U = B′ ∪ B″ at a Stiefel point.
#[derive(Clone, Debug)]
pub struct TangentBasis {
    selection: RowSelection,
    z: DMatrix<f64>,
    labels: Vec<BasisLabel>,
    elements: Vec<DMatrix<f64>>,
    n_skew: usize,
}

impl TangentBasis {
    pub fn selection(&self) -> &RowSelection {
        &self.selection
    }

    /// Z = I_n − UU^t.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    /// The Δ′ elements, lexicographic in (a, b).
    pub fn skew_part(&self) -> &[DMatrix<f64>] {
        &self.elements[..self.n_skew]
    }

    /// The Δ″ elements, colexicographic in (i, c).
    pub fn normal_part(&self) -> &[DMatrix<f64>] {
        &self.elements[self.n_skew..]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Frame at U using the greedy row selection.
pub fn tangent_basis(u: &StiefelPoint) -> Result<TangentBasis> {
    let sel = select_full_rank_rows(u, DEFAULT_RANK_TOL)?;
    tangent_basis_with(u, sel)
}

/// Frame at U for a given row selection.
pub fn tangent_basis_with(u: &StiefelPoint, selection: RowSelection) -> Result<TangentBasis> {
    let (n, p) = (u.n(), u.p());
    let um = u.as_matrix();
    let z = DMatrix::identity(n, n) - um * um.transpose();
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    for a in 1..=p {
        for b in a + 1..=p {
            labels.push(BasisLabel::Skew { a, b });
            elements.push(um * skew_basis_matrix(a, b, p)?);
        }
    }
    let n_skew = elements.len();
    for c in 1..=p {
        for &i in &selection.rest {
            labels.push(BasisLabel::Normal { i: i + 1, c });
            let mut d = DMatrix::zeros(n, p);
            d.set_column(c - 1, &z.column(i));
            elements.push(d);
        }
    }
    Ok(TangentBasis {
        selection,
        z,
        labels,
        elements,
        n_skew,
    })
}

/// T = [T_1 | T_2], np × (p(p−1)/2 + p(n−p)).
#[derive(Clone, Debug)]
pub struct TransformationMatrix {
    t: DMatrix<f64>,
    labels: Vec<BasisLabel>,
    n_skew: usize,
}

impl TransformationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn t1(&self) -> DMatrix<f64> {
        self.t.columns(0, self.n_skew).into_owned()
    }

    pub fn t2(&self) -> DMatrix<f64> {
        self.t.columns(self.n_skew, self.t.ncols() - self.n_skew).into_owned()
    }
}

pub fn build_t(basis: &TangentBasis) -> TransformationMatrix {
    let rows = basis.z.nrows() * basis.selection.u1.nrows();
    let cols: Vec<DVector<f64>> = basis.elements.iter().map(vec).collect();
    let t = if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    TransformationMatrix {
        t,
        labels: basis.labels.clone(),
        n_skew: basis.n_skew,
    }
}

/// T^tT from its block structure, without forming T:
/// diag(2·I_{p(p−1)/2}, I_p ⊗ (I_{n−p} − U_2U_2^t)).
pub fn gram_t_closed(u: &StiefelPoint, selection: &RowSelection) -> DMatrix<f64> {
    let (n, p) = (u.n(), u.p());
    let k1 = p * (p - 1) / 2;
    let k2 = p * (n - p);
    let mut g = DMatrix::zeros(k1 + k2, k1 + k2);
    g.view_mut((0, 0), (k1, k1)).fill_with_identity();
    g.view_mut((0, 0), (k1, k1)).scale_mut(2.0);
    if k2 > 0 {
        let u2 = selection.u2();
        let block = DMatrix::identity(n - p, n - p) - u2 * u2.transpose();
        g.view_mut((k1, k1), (k2, k2))
            .copy_from(&kron(&DMatrix::identity(p, p), &block));
    }
    g
}

/// Evaluation route for the tangent projector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorPath {
    /// T (T^tT)^{-1} T^t with a generic inverse.
    Direct,
    /// ½ T_1T_1^t + I_p ⊗ (Z_2^t (I − U_2U_2^t)^{-1} Z_2), inverse via Woodbury.
    Woodbury,
    /// I_np − ½ I_p ⊗ UU^t − ½ Λ(U).
    Closed,
}

/// Orthogonal projector onto T_U St_p^n as an np×np matrix.
pub fn projector(u: &StiefelPoint, path: ProjectorPath) -> Result<DMatrix<f64>> {
    projector_capped(u, path, DEFAULT_SIZE_CAP)
}

pub fn projector_capped(u: &StiefelPoint, path: ProjectorPath, cap: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (u.n(), u.p());
    let np = n * p;
    check_size(np, cap)?;
    let um = u.as_matrix();
    match path {
        ProjectorPath::Closed => {
            let uut = um * um.transpose();
            let mut out = DMatrix::identity(np, np);
            out -= kron(&DMatrix::identity(p, p), &uut) * 0.5;
            out -= lambda_of(u).matrix() * 0.5;
            Ok(out)
        }
        ProjectorPath::Direct => {
            let basis = tangent_basis(u)?;
            let t = build_t(&basis);
            let tm = t.matrix();
            if tm.ncols() == 0 {
                return Ok(DMatrix::zeros(np, np));
            }
            let gram = tm.transpose() * tm;
            let inv = gram
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("T^tT is singular".into()))?;
            Ok(tm * inv * tm.transpose())
        }
        ProjectorPath::Woodbury => {
            let basis = tangent_basis(u)?;
            let t = build_t(&basis);
            let t1 = t.t1();
            let mut out = &t1 * t1.transpose() * 0.5;
            let sel = basis.selection();
            if n > p {
                let z2 = sel.z2(basis.z());
                let inner = z2.transpose() * sel.woodbury_inverse()? * &z2;
                out += kron(&DMatrix::identity(p, p), &inner);
            }
            Ok(out)
        }
    }
}

/// Projection of an n×p matrix onto T_U St_p^n, computed in matrix form as
/// W − U·sym(U^tW), which equals unvec(P·vec(W)).
pub fn apply_projector(u: &StiefelPoint, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.shape() != (u.n(), u.p()) {
        return Err(Error::Shape(format!(
            "cannot project a {}x{} matrix onto the tangent space of St_{}^{}",
            w.nrows(),
            w.ncols(),
            u.p(),
            u.n()
        )));
    }
    let um = u.as_matrix();
    let s = um.transpose() * w;
    Ok(w - um * ((&s + s.transpose()) * 0.5))
}

/// max |U^tV + V^tU|.
pub fn tangency_residual(u: &StiefelPoint, v: &DMatrix<f64>) -> f64 {
    let s = u.as_matrix().transpose() * v;
    (&s + s.transpose()).amax()
}

/// Dense projector applied to vec(W), for cross-checks.
pub fn apply_projector_dense(p_mat: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    unvec(&(p_mat * vec(w)), w.nrows(), w.ncols())
}

/// Numerical rank: singular values above `tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s > tol * smax).count()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::ambient::{random_stiefel, random_stiefel_with, DenseMatrix};

    fn point(data: &[f64], n: usize, p: usize) -> StiefelPoint {
        StiefelPoint::new(DenseMatrix::from_rows(n, p, data).unwrap()).unwrap()
    }

    fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.dot(b)
    }

    #[test]
    fn selection_examples() {
        let u = point(&[1., 0., 0., 1., 0., 0.], 3, 2);
        let s = select_full_rank_rows(&u, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.permutation(), vec![1, 2, 3]);
        assert_eq!(s.u1(), &DMatrix::<f64>::identity(2, 2));

        let e3 = point(&[0., 0., 1.], 3, 1);
        let s = select_full_rank_rows(&e3, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.permutation()[0], 3);
        assert_eq!(s.remaining_rows(), vec![1, 2]);
    }

    #[test]
    fn selection_rejects_singular_block() {
        let u = point(&[1., 0., 0., 1., 0., 0.], 3, 2);
        assert!(matches!(
            RowSelection::from_rows(&u, &[1, 3], DEFAULT_RANK_TOL),
            Err(Error::Degenerate(_))
        ));
        assert!(RowSelection::from_rows(&u, &[1, 1], DEFAULT_RANK_TOL).is_err());
        assert!(RowSelection::from_rows(&u, &[1, 4], DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn selection_inverse_permutation_recovers_u() {
        let u = random_stiefel(6, 3, 8).unwrap();
        let s = select_full_rank_rows(&u, DEFAULT_RANK_TOL).unwrap();
        let mut stacked = DMatrix::zeros(6, 3);
        stacked.rows_mut(0, 3).copy_from(s.u1());
        stacked.rows_mut(3, 3).copy_from(s.u2());
        let perm = s.permutation();
        for (k, &row) in perm.iter().enumerate() {
            assert_eq!(stacked.row(k), u.as_matrix().row(row - 1));
        }
    }

    #[test]
    fn skew_basis_examples() {
        assert_eq!(
            skew_basis_matrix(1, 2, 2).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.])
        );
        let a13 = skew_basis_matrix(1, 3, 3).unwrap();
        assert_eq!(a13[(0, 2)], 1.0);
        assert_eq!(a13[(2, 0)], -1.0);
        for (a, b) in [(1, 2), (1, 3), (2, 3), (2, 4)] {
            let m = skew_basis_matrix(a, b, 4).unwrap();
            assert_eq!(&m + m.transpose(), DMatrix::zeros(4, 4));
        }
        assert!(skew_basis_matrix(2, 2, 3).is_err());
        assert!(skew_basis_matrix(1, 4, 3).is_err());
    }

    #[test]
    fn basis_counts_and_tangency() {
        let u = random_stiefel(4, 1, 1).unwrap();
        let b = tangent_basis(&u).unwrap();
        assert!(b.skew_part().is_empty());
        assert_eq!(b.normal_part().len(), 3);

        for (n, p) in [(5, 2), (6, 3), (4, 4), (7, 1)] {
            let u = random_stiefel(n, p, 10 + n as u64).unwrap();
            let b = tangent_basis(&u).unwrap();
            assert_eq!(b.len(), p * (p - 1) / 2 + p * (n - p));
            for e in b.elements() {
                assert!(tangency_residual(&u, e) <= 1e-10);
            }
        }
    }

    #[test]
    fn basis_structure_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.random_range(2..=8);
            let p = rng.random_range(1..=n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let b = tangent_basis(&u).unwrap();
            let z = b.z();
            let labels = b.labels();
            for (x, lx) in b.elements().iter().zip(labels) {
                for (y, ly) in b.elements().iter().zip(labels) {
                    let ip = inner(x, y);
                    let expected = match (lx, ly) {
                        (BasisLabel::Skew { .. }, BasisLabel::Skew { .. }) => {
                            if lx == ly {
                                2.0
                            } else {
                                0.0
                            }
                        }
                        (BasisLabel::Normal { i: k1, c: c1 }, BasisLabel::Normal { i: k2, c: c2 }) if c1 == c2 => {
                            z[(k1 - 1, k2 - 1)]
                        }
                        _ => 0.0,
                    };
                    assert!((ip - expected).abs() <= 1e-10, "{lx:?} {ly:?}: {ip} vs {expected}");
                }
            }
        }
    }

    #[test]
    fn transformation_matrix_small_case() {
        let u = point(&[1., 0.], 2, 1);
        let t = build_t(&tangent_basis(&u).unwrap());
        assert_eq!(t.matrix(), &DMatrix::from_column_slice(2, 1, &[0., 1.]));
    }

    #[test]
    fn transformation_matrix_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..30 {
            let n = rng.random_range(2..=7);
            let p = rng.random_range(1..=n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let basis = tangent_basis(&u).unwrap();
            let t = build_t(&basis);
            assert_eq!(numerical_rank(t.matrix(), 1e-8), t.matrix().ncols());
            for (k, e) in basis.elements().iter().enumerate() {
                assert_eq!(t.matrix().column(k), vec(e).column(0));
            }
            if n > p {
                let z2 = basis.selection().z2(basis.z());
                let expected = kron(&DMatrix::identity(p, p), &z2.transpose());
                assert!((t.t2() - expected).amax() <= 1e-15);
            }
            let u1 = basis.selection().u1();
            let lhs = t.t1() * t.t1().transpose();
            let um = u.as_matrix();
            let rhs = kron(&DMatrix::identity(p, p), &(um * um.transpose())) - lambda_of(&u).matrix();
            assert!((lhs - rhs).amax() <= 1e-12);
            assert!(u1.determinant().abs() > DEFAULT_RANK_TOL);
        }
    }

    #[test]
    fn gram_closed_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let n = rng.random_range(1..=7);
            let p = rng.random_range(1..=n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let basis = tangent_basis(&u).unwrap();
            let t = build_t(&basis);
            let direct = t.matrix().transpose() * t.matrix();
            let closed = gram_t_closed(&u, basis.selection());
            assert_eq!(closed.shape(), direct.shape());
            if !closed.is_empty() {
                assert!((closed - direct).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn gram_boundary_cases() {
        let u = random_stiefel(4, 4, 2).unwrap();
        let sel = select_full_rank_rows(&u, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(gram_t_closed(&u, &sel), DMatrix::identity(6, 6) * 2.0);

        let u = random_stiefel(5, 1, 3).unwrap();
        let sel = select_full_rank_rows(&u, DEFAULT_RANK_TOL).unwrap();
        let u2 = sel.u2().clone();
        assert_eq!(gram_t_closed(&u, &sel), DMatrix::identity(4, 4) - &u2 * u2.transpose());
    }

    #[test]
    fn woodbury_and_sandwich_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..50 {
            let n = rng.random_range(2..=8);
            let p = rng.random_range(1..n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let basis = tangent_basis(&u).unwrap();
            let sel = basis.selection();
            let w = sel.woodbury_inverse().unwrap();
            let base = DMatrix::identity(n - p, n - p) - sel.u2() * sel.u2().transpose();
            assert!((&w * &base - DMatrix::identity(n - p, n - p)).amax() <= 1e-9);
            let z2 = sel.z2(basis.z());
            assert!((z2.transpose() * &w * &z2 - basis.z()).amax() <= 1e-9);
            let z2z2t = &z2 * z2.transpose();
            assert!((z2z2t - base).amax() <= 1e-12);
        }
    }

    #[test]
    fn projector_circle_case() {
        let u = point(&[1., 0.], 2, 1);
        for path in [ProjectorPath::Closed, ProjectorPath::Direct, ProjectorPath::Woodbury] {
            let pm = projector(&u, path).unwrap();
            assert!((pm - DMatrix::from_diagonal(&DVector::from_vec(vec![0., 1.]))).amax() <= 1e-15);
        }
    }

    #[test]
    fn projector_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..100 {
            let n = rng.random_range(1..=7);
            let p = rng.random_range(1..=n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let closed = projector(&u, ProjectorPath::Closed).unwrap();
            let direct = projector(&u, ProjectorPath::Direct).unwrap();
            let wood = projector(&u, ProjectorPath::Woodbury).unwrap();
            assert!((&closed - &direct).amax() <= 1e-10);
            assert!((&closed - &wood).amax() <= 1e-10);
            assert!((&closed * &closed - &closed).amax() <= 1e-11);
            assert!((&closed - closed.transpose()).amax() <= 1e-15);
            assert_eq!(numerical_rank(&closed, 1e-8), u.manifold_dim());
        }
    }

    #[test]
    fn projector_independent_of_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..20 {
            let u = random_stiefel_with(5, 2, &mut rng).unwrap();
            let a = tangent_basis_with(&u, RowSelection::from_rows(&u, &[1, 2], 1e-12).unwrap()).unwrap();
            let b = tangent_basis_with(&u, RowSelection::from_rows(&u, &[3, 5], 1e-12).unwrap()).unwrap();
            let proj = |basis: &TangentBasis| {
                let t = build_t(basis);
                let tm = t.matrix();
                tm * (tm.transpose() * tm).try_inverse().unwrap() * tm.transpose()
            };
            assert!((proj(&a) - proj(&b)).amax() <= 1e-9);
        }
    }

    #[test]
    fn size_cap_enforced() {
        let u = random_stiefel(21, 20, 0).unwrap();
        assert!(matches!(
            projector(&u, ProjectorPath::Closed),
            Err(Error::SizeCap { np: 420, cap: 400 })
        ));
        let u = random_stiefel(4, 2, 0).unwrap();
        assert!(projector_capped(&u, ProjectorPath::Closed, 7).is_err());
    }

    #[test]
    fn apply_projector_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let n = rng.random_range(1..=6);
            let p = rng.random_range(1..=n);
            let u = random_stiefel_with(n, p, &mut rng).unwrap();
            let w = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let once = apply_projector(&u, &w).unwrap();
            let twice = apply_projector(&u, &once).unwrap();
            assert!((&twice - &once).amax() <= 1e-11);
            assert!(tangency_residual(&u, &once) <= 1e-10);
            let dense = apply_projector_dense(&projector(&u, ProjectorPath::Closed).unwrap(), &w).unwrap();
            assert!((&dense - &once).amax() <= 1e-12);
            let from_u = apply_projector(&u, u.as_matrix()).unwrap();
            assert!(tangency_residual(&u, &from_u) <= 1e-10);
        }
        let u = random_stiefel(3, 2, 1).unwrap();
        assert!(apply_projector(&u, &DMatrix::zeros(2, 3)).is_err());
    }
}
