//! Seeded verification suites. Each suite draws independent random instances
//! (case k uses ChaCha8 stream k of the master seed), runs them in parallel
//! and returns the results in case order, so a (suite, cases, seed) triple
//! always produces the same list.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ambient::{kron, random_stiefel_with, ConstraintIndex, DenseMatrix, StiefelPoint};
use crate::diffusion::{generator_estimate, generator_tolerance, walker_rng, WalkConfig};
use crate::error::{Error, Result};
use crate::functions::random::{random_field, FieldKind};
use crate::functions::{
    fd_gradient, fd_hessian, max_rel_diff, ConstantField, ConstraintField, ExpressionField, FieldRef, IsometryPullback,
    LinearCombination, ProductField, ScalarField, FD_GRADIENT_STEP, FD_HESSIAN_STEP,
};
use crate::laplace::{
    lambda_of, laplace_closed, laplace_frame_oracle, rel_err, sigma_of, special_orthogonal_laplacian, sphere_laplacian,
};
use crate::tangent::{
    build_t, gram_t_closed, numerical_rank, projector, tangent_basis, BasisLabel, ProjectorPath, DEFAULT_RANK_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GramStructure,
    ProjectorIdentity,
    ClosedVsFrame,
    Prolongation,
    Isometry,
    TraceIdentities,
    SphereEigen,
    Annihilation,
    BasisStructure,
    Reductions,
    AdConsistency,
    Diffusion,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::GramStructure,
        Suite::ProjectorIdentity,
        Suite::ClosedVsFrame,
        Suite::Prolongation,
        Suite::Isometry,
        Suite::TraceIdentities,
        Suite::SphereEigen,
        Suite::Annihilation,
        Suite::BasisStructure,
        Suite::Reductions,
        Suite::AdConsistency,
        Suite::Diffusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GramStructure => "gram-structure",
            Suite::ProjectorIdentity => "projector-identity",
            Suite::ClosedVsFrame => "closed-vs-frame",
            Suite::Prolongation => "prolongation",
            Suite::Isometry => "isometry",
            Suite::TraceIdentities => "trace-identities",
            Suite::SphereEigen => "sphere-eigen",
            Suite::Annihilation => "annihilation",
            Suite::BasisStructure => "basis-structure",
            Suite::Reductions => "reductions",
            Suite::AdConsistency => "ad-consistency",
            Suite::Diffusion => "diffusion",
        }
    }

    /// Case count used when none is requested.
    pub fn default_cases(self) -> usize {
        match self {
            Suite::ClosedVsFrame => 200,
            Suite::SphereEigen => 750,
            Suite::Diffusion => 6,
            _ => 100,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::InvalidArgument(format!("unknown suite {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Pass thresholds and diffusion settings, overridable by key.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub gram_structure: f64,
    pub basis_structure: f64,
    pub projector: f64,
    pub closed_vs_frame: f64,
    pub annihilation: f64,
    pub prolongation: f64,
    pub isometry: f64,
    pub trace_identities: f64,
    pub sphere_eigen: f64,
    pub reductions: f64,
    pub ad_gradient: f64,
    pub ad_hessian: f64,
    pub rank: f64,
    pub diffusion_sigmas: f64,
    pub diffusion_bias: f64,
    pub diffusion_h: f64,
    pub diffusion_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            gram_structure: 1e-10,
            basis_structure: 1e-10,
            projector: 1e-10,
            closed_vs_frame: 1e-9,
            annihilation: 1e-11,
            prolongation: 1e-8,
            isometry: 1e-8,
            trace_identities: 1e-10,
            sphere_eigen: 1e-8,
            reductions: 1e-12,
            ad_gradient: 1e-6,
            ad_hessian: 1e-4,
            rank: DEFAULT_RANK_TOL,
            diffusion_sigmas: 3.0,
            diffusion_bias: 0.5,
            diffusion_h: 1e-3,
            diffusion_samples: 100_000,
        }
    }
}

impl SuiteConfig {
    pub const KEYS: [&'static str; 17] = [
        "gram_structure",
        "basis_structure",
        "projector",
        "closed_vs_frame",
        "annihilation",
        "prolongation",
        "isometry",
        "trace_identities",
        "sphere_eigen",
        "reductions",
        "ad_gradient",
        "ad_hessian",
        "rank",
        "diffusion_sigmas",
        "diffusion_bias",
        "diffusion_h",
        "diffusion_samples",
    ];

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{key} must be positive and finite, got {value}"
            )));
        }
        let slot = match key {
            "gram_structure" => &mut self.gram_structure,
            "basis_structure" => &mut self.basis_structure,
            "projector" => &mut self.projector,
            "closed_vs_frame" => &mut self.closed_vs_frame,
            "annihilation" => &mut self.annihilation,
            "prolongation" => &mut self.prolongation,
            "isometry" => &mut self.isometry,
            "trace_identities" => &mut self.trace_identities,
            "sphere_eigen" => &mut self.sphere_eigen,
            "reductions" => &mut self.reductions,
            "ad_gradient" => &mut self.ad_gradient,
            "ad_hessian" => &mut self.ad_hessian,
            "rank" => &mut self.rank,
            "diffusion_sigmas" => &mut self.diffusion_sigmas,
            "diffusion_bias" => &mut self.diffusion_bias,
            "diffusion_h" => &mut self.diffusion_h,
            "diffusion_samples" => {
                if value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "diffusion_samples must be an integer, got {value}"
                    )));
                }
                self.diffusion_samples = value as usize;
                return Ok(());
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown tolerance key {other:?}; expected one of {}",
                    Self::KEYS.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// |value − target|.
    Abs,
    /// |value − target| / max(1, |target|).
    Rel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CaseInputs {
    pub n: usize,
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseError {
    pub degenerate: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseResult {
    pub id: String,
    pub inputs: CaseInputs,
    pub method: String,
    pub value: f64,
    pub target: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub metric: Metric,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<CaseError>,
}

impl CaseResult {
    pub fn check(
        id: String,
        inputs: CaseInputs,
        method: &str,
        value: f64,
        target: f64,
        metric: Metric,
        tolerance: f64,
    ) -> Self {
        let abs_err = (value - target).abs();
        let rel = rel_err(value, target);
        let err = match metric {
            Metric::Abs => abs_err,
            Metric::Rel => rel,
        };
        Self {
            id,
            inputs,
            method: method.to_string(),
            value,
            target,
            abs_err,
            rel_err: rel,
            metric,
            tolerance,
            pass: err <= tolerance,
            std_error: None,
            error: None,
        }
    }

    fn failed(id: String, e: &Error) -> Self {
        Self {
            id,
            inputs: CaseInputs::default(),
            method: "error".into(),
            value: f64::NAN,
            target: f64::NAN,
            abs_err: f64::NAN,
            rel_err: f64::NAN,
            metric: Metric::Abs,
            tolerance: 0.0,
            pass: false,
            std_error: None,
            error: Some(CaseError {
                degenerate: !e.is_input_error(),
                message: e.to_string(),
            }),
        }
    }
}

/// Runs `cases` instances of a suite. Case-level errors become failed results.
pub fn run_suite(suite: Suite, cases: usize, seed: u64, cfg: &SuiteConfig) -> Vec<CaseResult> {
    (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = walker_rng(seed, k as u64);
            let id = format!("{suite}/{k}");
            run_case(suite, k, &id, &mut rng, cfg).unwrap_or_else(|e| vec![CaseResult::failed(id, &e)])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn run_case(suite: Suite, k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    match suite {
        Suite::GramStructure => gram_structure(id, rng, cfg),
        Suite::ProjectorIdentity => projector_identity(id, rng, cfg),
        Suite::ClosedVsFrame => closed_vs_frame(k, id, rng, cfg),
        Suite::Prolongation => prolongation(k, id, rng, cfg),
        Suite::Isometry => isometry(k, id, rng, cfg),
        Suite::TraceIdentities => trace_identities(k, id, rng, cfg),
        Suite::SphereEigen => sphere_eigen(k, id, rng, cfg),
        Suite::Annihilation => annihilation(id, rng, cfg),
        Suite::BasisStructure => basis_structure(id, rng, cfg),
        Suite::Reductions => reductions(k, id, rng, cfg),
        Suite::AdConsistency => ad_consistency(k, id, rng, cfg),
        Suite::Diffusion => diffusion(k, id, rng, cfg),
    }
}

/// Random (n, p) with p_min ≤ p ≤ n ≤ n_max.
fn shape(rng: &mut ChaCha8Rng, p_min: usize, n_max: usize) -> (usize, usize) {
    let n = rng.random_range(p_min..=n_max);
    (n, rng.random_range(p_min..=n))
}

fn inputs(n: usize, p: usize, field: Option<&FieldRef>) -> CaseInputs {
    CaseInputs {
        n,
        p,
        field: field.map(|f| f.describe()),
        detail: None,
    }
}

const SWEEP_KINDS: [FieldKind; 4] = [
    FieldKind::Linear,
    FieldKind::Brockett,
    FieldKind::Procrustes,
    FieldKind::Polynomial,
];

fn gram_structure(id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 8);
    let u = random_stiefel_with(n, p, rng)?;
    let basis = tangent_basis(&u)?;
    let t = build_t(&basis);
    let direct = t.matrix().transpose() * t.matrix();
    let closed = gram_t_closed(&u, basis.selection());
    let gap = if direct.is_empty() {
        0.0
    } else {
        (direct - closed).amax()
    };
    Ok(vec![CaseResult::check(
        id.into(),
        inputs(n, p, None),
        "gram-closed-vs-direct",
        gap,
        0.0,
        Metric::Abs,
        cfg.gram_structure,
    )])
}

fn basis_structure(id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 8);
    let u = random_stiefel_with(n, p, rng)?;
    let basis = tangent_basis(&u)?;
    let z = basis.z();
    // (i) skew set orthogonal, (ii) normal groups of distinct columns orthogonal,
    // (iii) skew ⊥ normal, (iv) ‖Δ′_ab‖² = 2, (v) ⟨Δ″_k1c, Δ″_k2c⟩ = z_k1k2.
    let mut worst = [0.0f64; 5];
    let items: Vec<_> = basis.elements().iter().zip(basis.labels()).collect();
    for (x, lx) in &items {
        for (y, ly) in &items {
            let ip = x.dot(y);
            let (slot, expected) = match (lx, ly) {
                (BasisLabel::Skew { .. }, BasisLabel::Skew { .. }) if lx == ly => (3, 2.0),
                (BasisLabel::Skew { .. }, BasisLabel::Skew { .. }) => (0, 0.0),
                (BasisLabel::Normal { i: k1, c: c1 }, BasisLabel::Normal { i: k2, c: c2 }) => {
                    if c1 == c2 {
                        (4, z[(k1 - 1, k2 - 1)])
                    } else {
                        (1, 0.0)
                    }
                }
                _ => (2, 0.0),
            };
            worst[slot] = worst[slot].max((ip - expected).abs());
        }
    }
    let names = [
        "skew-orthogonal",
        "normal-columns-orthogonal",
        "skew-normal-orthogonal",
        "skew-norm-2",
        "normal-gram-z",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, w)| {
            CaseResult::check(
                format!("{id}/{name}"),
                inputs(n, p, None),
                name,
                w,
                0.0,
                Metric::Abs,
                cfg.basis_structure,
            )
        })
        .collect())
}

fn projector_identity(id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 8);
    let u = random_stiefel_with(n, p, rng)?;
    let closed = projector(&u, ProjectorPath::Closed)?;
    let direct = projector(&u, ProjectorPath::Direct)?;
    let inp = inputs(n, p, None);
    Ok(vec![
        CaseResult::check(
            format!("{id}/closed-vs-direct"),
            inp.clone(),
            "closed-vs-direct",
            (&closed - &direct).amax(),
            0.0,
            Metric::Abs,
            cfg.projector,
        ),
        CaseResult::check(
            format!("{id}/idempotence"),
            inp.clone(),
            "idempotence",
            (&closed * &closed - &closed).amax(),
            0.0,
            Metric::Abs,
            cfg.projector,
        ),
        CaseResult::check(
            format!("{id}/rank"),
            inp,
            "rank",
            numerical_rank(&closed, cfg.rank) as f64,
            u.manifold_dim() as f64,
            Metric::Abs,
            0.0,
        ),
    ])
}

fn closed_vs_frame(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 2, 8);
    let u = random_stiefel_with(n, p, rng)?;
    let f = random_field(SWEEP_KINDS[k % SWEEP_KINDS.len()], n, p, rng)?;
    let closed = laplace_closed(&f, &u)?.value;
    let frame = laplace_frame_oracle(&f, &u)?.value;
    Ok(vec![CaseResult::check(
        id.into(),
        inputs(n, p, Some(&f)),
        "closed-vs-frame",
        closed,
        frame,
        Metric::Rel,
        cfg.closed_vs_frame,
    )])
}

fn annihilation(id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 2, 8);
    let u = random_stiefel_with(n, p, rng)?;
    ConstraintIndex::all(p)
        .into_iter()
        .map(|idx| {
            let f = ConstraintField::new(idx, n, p)?;
            let v = laplace_closed(&f, &u)?.value;
            let mut inp = inputs(n, p, None);
            inp.field = Some(idx.to_string());
            Ok(CaseResult::check(
                format!("{id}/{idx}"),
                inp,
                "closed",
                v,
                0.0,
                Metric::Abs,
                cfg.annihilation,
            ))
        })
        .collect()
}

fn prolongation(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 7);
    let u = random_stiefel_with(n, p, rng)?;
    let f = random_field(FieldKind::ALL[k % 5], n, p, rng)?;
    let g = random_field(
        if k.is_multiple_of(2) {
            FieldKind::Polynomial
        } else {
            FieldKind::Transcendental
        },
        n,
        p,
        rng,
    )?;
    let all = ConstraintIndex::all(p);
    let idx = all[rng.random_range(0..all.len())];
    let constraint: FieldRef = Arc::new(ConstraintField::new(idx, n, p)?);
    let one: FieldRef = Arc::new(ConstantField { value: 1.0, n, p });
    let shifted: FieldRef = Arc::new(LinearCombination::new(vec![
        (1.0, constraint),
        (-idx.regular_value(), one),
    ])?);
    let extension: FieldRef = Arc::new(ProductField::new(shifted, g)?);
    let prolonged = LinearCombination::new(vec![(1.0, f.clone()), (1.0, extension)])?;
    let mut inp = inputs(n, p, Some(&f));
    inp.detail = Some(format!("added ({idx} - {})*g", idx.regular_value()));
    Ok(vec![CaseResult::check(
        id.into(),
        inp,
        "closed",
        laplace_closed(&prolonged, &u)?.value,
        laplace_closed(&f, &u)?.value,
        Metric::Rel,
        cfg.prolongation,
    )])
}

fn isometry(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 7);
    let u = random_stiefel_with(n, p, rng)?;
    let f = random_field(FieldKind::ALL[k % 5], n, p, rng)?;
    let q = random_stiefel_with(n, n, rng)?.as_matrix().clone();
    let r = random_stiefel_with(p, p, rng)?.as_matrix().clone();
    let moved = StiefelPoint::new(DenseMatrix::new(&q * u.as_matrix() * &r)?)?;
    let pulled = IsometryPullback::new(f.clone(), q, r)?;
    Ok(vec![CaseResult::check(
        id.into(),
        inputs(n, p, Some(&f)),
        "closed",
        laplace_closed(&pulled, &u)?.value,
        laplace_closed(&f, &moved)?.value,
        Metric::Rel,
        cfg.isometry,
    )])
}

fn trace_identities(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 7);
    let u = random_stiefel_with(n, p, rng)?;
    let f = random_field(FieldKind::ALL[k % 5], n, p, rng)?;
    let um = u.as_matrix();
    let sigma = sigma_of(&f, &u)?;
    let s = sigma.matrix();
    let tr_ug = um.dot(&f.gradient(um)?);
    let s_kron_i = kron(s, &DMatrix::identity(n, n));
    let s_kron_uu = kron(s, &(um * um.transpose()));
    let lambda = lambda_of(&u);
    let inp = inputs(n, p, Some(&f));
    let mk = |name: &str, value: f64, target: f64| {
        CaseResult::check(
            format!("{id}/{name}"),
            inp.clone(),
            name,
            value,
            target,
            Metric::Rel,
            cfg.trace_identities,
        )
    };
    Ok(vec![
        mk("sigma-kron-identity", s_kron_i.trace(), n as f64 * tr_ug),
        mk("sigma-kron-projection", s_kron_uu.trace(), p as f64 * tr_ug),
        mk(
            "lambda-sigma-kron",
            (lambda.matrix() * &s_kron_i).trace(),
            sigma.trace(),
        ),
    ])
}

/// Harmonic homogeneous polynomials of degree 1..=3 in the first two coordinates.
pub const SPHERE_HARMONICS: [(usize, &str); 3] =
    [(1, "u[1,1]"), (2, "u[1,1]*u[2,1]"), (3, "u[1,1]^3 - 3*u[1,1]*u[2,1]^2")];

fn sphere_eigen(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let combo = k % 15;
    let n = 2 + combo / 3;
    let (l, src) = SPHERE_HARMONICS[combo % 3];
    let f = ExpressionField::parse(src, n, 1)?;
    let u = random_stiefel_with(n, 1, rng)?;
    let value = sphere_laplacian(&f, u.as_matrix())?;
    let eigen = -((l * (l + n - 2)) as f64);
    let mut inp = CaseInputs {
        n,
        p: 1,
        field: Some(src.into()),
        detail: Some(format!("degree {l}")),
    };
    inp.detail = Some(format!("degree {l}, eigenvalue {eigen}"));
    Ok(vec![CaseResult::check(
        id.into(),
        inp,
        "sphere",
        value,
        eigen * f.value(u.as_matrix())?,
        Metric::Rel,
        cfg.sphere_eigen,
    )])
}

fn reductions(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let n = rng.random_range(1..=7);
    let kind = FieldKind::ALL[k % 5];
    let mut out = Vec::new();

    let u = random_stiefel_with(n, 1, rng)?;
    let f = random_field(kind, n, 1, rng)?;
    out.push(CaseResult::check(
        format!("{id}/sphere"),
        inputs(n, 1, Some(&f)),
        "closed-vs-sphere",
        laplace_closed(&f, &u)?.value,
        sphere_laplacian(&f, u.as_matrix())?,
        Metric::Rel,
        cfg.reductions,
    ));

    let u = random_stiefel_with(n, n, rng)?;
    let f = random_field(kind, n, n, rng)?;
    out.push(CaseResult::check(
        format!("{id}/special-orthogonal"),
        inputs(n, n, Some(&f)),
        "closed-vs-special-orthogonal",
        laplace_closed(&f, &u)?.value,
        special_orthogonal_laplacian(&f, &u)?,
        Metric::Rel,
        cfg.reductions,
    ));

    let nf = n as f64;
    out.push(CaseResult::check(
        format!("{id}/coefficient"),
        inputs(n, n, None),
        "n-(p+1)/2 at p=n",
        nf - (nf + 1.0) / 2.0,
        (nf - 1.0) / 2.0,
        Metric::Abs,
        0.0,
    ));
    Ok(out)
}

fn ad_consistency(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = shape(rng, 1, 5);
    let f = random_field(FieldKind::ALL[k % 5], n, p, rng)?;
    let u = if k.is_multiple_of(2) {
        random_stiefel_with(n, p, rng)?.as_matrix().clone()
    } else {
        DMatrix::from_fn(n, p, |_, _| rng.random_range(-0.9..0.9))
    };
    let g = f.gradient(&u)?;
    let h = f.hessian(&u)?;
    let gfd = fd_gradient(&*f, &u, FD_GRADIENT_STEP)?;
    let hfd = fd_hessian(&*f, &u, FD_HESSIAN_STEP)?;
    let inp = inputs(n, p, Some(&f));
    Ok(vec![
        CaseResult::check(
            format!("{id}/gradient"),
            inp.clone(),
            "ad-vs-fd-gradient",
            max_rel_diff(&g, &gfd),
            0.0,
            Metric::Abs,
            cfg.ad_gradient,
        ),
        CaseResult::check(
            format!("{id}/hessian"),
            inp,
            "ad-vs-fd-hessian",
            max_rel_diff(&h, &hfd),
            0.0,
            Metric::Abs,
            cfg.ad_hessian,
        ),
    ])
}

/// Shapes and field kinds cycled by the diffusion suite.
pub const DIFFUSION_SHAPES: [(usize, usize); 2] = [(3, 1), (4, 2)];
pub const DIFFUSION_KINDS: [FieldKind; 3] = [FieldKind::Linear, FieldKind::Brockett, FieldKind::Polynomial];

fn diffusion(k: usize, id: &str, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let (n, p) = DIFFUSION_SHAPES[k % 2];
    let kind = DIFFUSION_KINDS[(k / 2) % 3];
    let u = random_stiefel_with(n, p, rng)?;
    let f = random_field(kind, n, p, rng)?;
    let walk = WalkConfig::new(cfg.diffusion_h, cfg.diffusion_samples, rng.random())?;
    Ok(vec![diffusion_check(id.into(), &f, &u, &walk, cfg)?])
}

/// Generator estimate at U against ½·Δ_St f(U). Without a standard error
/// (M = 1) the case reports its numbers but cannot pass.
pub fn diffusion_check<F: ScalarField + ?Sized>(
    id: String,
    f: &F,
    u: &StiefelPoint,
    walk: &WalkConfig,
    cfg: &SuiteConfig,
) -> Result<CaseResult> {
    let target = 0.5 * laplace_closed(f, u)?.value;
    let est = generator_estimate(f, u, walk)?;
    let tol = est
        .std_error
        .map(|se| generator_tolerance(se, walk.h, target, cfg.diffusion_sigmas, cfg.diffusion_bias));
    let inp = CaseInputs {
        n: u.n(),
        p: u.p(),
        field: Some(f.describe()),
        detail: Some(format!("h={}, M={}, seed={}", walk.h, walk.samples, walk.seed)),
    };
    let mut r = CaseResult::check(
        id,
        inp,
        "generator",
        est.estimate,
        target,
        Metric::Abs,
        tol.unwrap_or(f64::NAN),
    );
    r.pass = tol.is_some_and(|t| r.abs_err <= t);
    r.std_error = est.std_error;
    Ok(r)
}
