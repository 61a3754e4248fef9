//! Seeded random fields for verification sweeps.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BuiltinFamily, ExpressionField, FieldRef};
use crate::error::Result;

/// Field families drawn by verification sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Linear,
    Brockett,
    Procrustes,
    /// Random polynomial of total degree ≤ 3.
    Polynomial,
    /// Polynomial mixed with sin/cos/exp/log/sqrt, well-defined on |u_ij| ≤ 1.
    Transcendental,
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] = [
        FieldKind::Linear,
        FieldKind::Brockett,
        FieldKind::Procrustes,
        FieldKind::Polynomial,
        FieldKind::Transcendental,
    ];
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn coeff<R: Rng + ?Sized>(rng: &mut R) -> String {
    let c: f64 = rng.random_range(-1.0..1.0);
    format!("{c:.6}")
}

fn var<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> String {
    format!("u[{},{}]", rng.random_range(1..=n), rng.random_range(1..=p))
}

fn monomial<R: Rng + ?Sized>(n: usize, p: usize, degree: usize, rng: &mut R) -> String {
    let mut s = coeff(rng);
    for _ in 0..degree {
        s.push('*');
        s.push_str(&var(n, p, rng));
    }
    s
}

/// Source text of a random polynomial of total degree ≤ `max_degree` with
/// `terms` monomials. Every degree 1..=max_degree is represented.
pub fn random_polynomial_source<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    max_degree: usize,
    terms: usize,
    rng: &mut R,
) -> String {
    let parts: Vec<String> = (0..terms.max(max_degree + 1))
        .map(|k| {
            let d = if k <= max_degree {
                k
            } else {
                rng.random_range(0..=max_degree)
            };
            monomial(n, p, d, rng)
        })
        .collect();
    parts.join(" + ")
}

/// Source text of a smooth non-polynomial field; arguments of `log` and
/// `sqrt` stay positive whenever all |u_ij| ≤ 1.
pub fn random_transcendental_source<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> String {
    let mut v = || var(n, p, rng);
    let (a, b, c, d, e, f, g) = (v(), v(), v(), v(), v(), v(), v());
    let mut s = random_polynomial_source(n, p, 2, 4, rng);
    s.push_str(&format!(
        " + {}*sin({a}*{b} + {}) + {}*exp(0.5*{c}) + {}*cos({d}^2)",
        coeff(rng),
        coeff(rng),
        coeff(rng),
        coeff(rng)
    ));
    s.push_str(&format!(
        " + {}*log(3 + {e}) + {}*sqrt(2 + {f}*{g}) + {}/(2 + {a}^2)",
        coeff(rng),
        coeff(rng),
        coeff(rng)
    ));
    s
}

/// Draws a field of the given kind on n×p matrices.
pub fn random_field<R: Rng + ?Sized>(kind: FieldKind, n: usize, p: usize, rng: &mut R) -> Result<FieldRef> {
    Ok(match kind {
        FieldKind::Linear => Arc::new(BuiltinFamily::linear(gaussian(n, p, rng))?),
        FieldKind::Brockett => {
            let a = gaussian(n, n, rng);
            let b = (&a + a.transpose()) * 0.5;
            let c = DVector::from_fn(p, |_, _| rng.random_range(0.5..3.0));
            Arc::new(BuiltinFamily::brockett(b, c)?)
        }
        FieldKind::Procrustes => {
            let m = rng.random_range(n..=n + 2);
            Arc::new(BuiltinFamily::procrustes(gaussian(m, n, rng), gaussian(m, p, rng))?)
        }
        FieldKind::Polynomial => {
            let terms = rng.random_range(4..=8);
            Arc::new(ExpressionField::parse(
                &random_polynomial_source(n, p, 3, terms, rng),
                n,
                p,
            )?)
        }
        FieldKind::Transcendental => Arc::new(ExpressionField::parse(&random_transcendental_source(n, p, rng), n, p)?),
    })
}
