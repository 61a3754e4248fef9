//! Tangent-Gaussian random walk on St_p^n and a Monte Carlo estimate of its
//! generator, (E[f(X_h)] − f(U))/h ≈ ½·Δ_St f(U).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ambient::{orthonormalize, DenseMatrix, StiefelPoint};
use crate::error::{Error, Result};
use crate::functions::{check_shape, ScalarField};
use crate::tangent::apply_projector;

/// Manifold tolerance every walk state must satisfy.
pub const WALK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkConfig {
    pub h: f64,
    pub samples: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(h: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
        }
        if samples == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        Ok(Self { h, samples, seed })
    }
}

/// Standard Gaussian n×p matrix projected onto T_U St_p^n.
pub fn tangent_gaussian_step<R: Rng + ?Sized>(u: &StiefelPoint, rng: &mut R) -> DMatrix<f64> {
    let w = DMatrix::from_fn(u.n(), u.p(), |_, _| rng.sample::<f64, _>(StandardNormal));
    apply_projector(u, &w).expect("shapes match by construction")
}

/// One step: orthonormalize(U + √h·V) with V a tangent Gaussian.
pub fn walk_step<R: Rng + ?Sized>(u: &StiefelPoint, h: f64, rng: &mut R) -> Result<StiefelPoint> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let v = tangent_gaussian_step(u, rng);
    let moved = u.as_matrix() + v * h.sqrt();
    let q = orthonormalize(&moved)?;
    StiefelPoint::with_tolerance(DenseMatrix::new(q)?, WALK_TOL)
}

/// Generator for walker `index`: ChaCha8 seeded by the master seed, on its own stream.
pub fn walker_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorEstimate {
    pub estimate: f64,
    /// Sample standard deviation / (√M·h); `None` when M = 1.
    pub std_error: Option<f64>,
    pub samples: usize,
}

/// (mean of f(walk_step(U, h)) − f(U)) / h over M independent walkers.
pub fn generator_estimate<F: ScalarField + ?Sized>(
    f: &F,
    u: &StiefelPoint,
    cfg: &WalkConfig,
) -> Result<GeneratorEstimate> {
    let cfg = WalkConfig::new(cfg.h, cfg.samples, cfg.seed)?;
    check_shape(f, u.as_matrix())?;
    let f0 = f.value(u.as_matrix())?;
    let diffs = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = walker_rng(cfg.seed, k);
            let x = walk_step(u, cfg.h, &mut rng)?;
            Ok(f.value(x.as_matrix())? - f0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let std_error = (diffs.len() > 1).then(|| {
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
        var.sqrt() / (m.sqrt() * cfg.h)
    });
    Ok(GeneratorEstimate {
        estimate: mean / cfg.h,
        std_error,
        samples: diffs.len(),
    })
}

/// 3·std_error + 0.5·h·(1 + |target|), where target = ½Δf.
pub fn generator_tolerance(std_error: f64, h: f64, target: f64, sigmas: f64, bias: f64) -> f64 {
    sigmas * std_error + bias * h * (1.0 + target.abs())
}
