//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stiefel_laplace::diffusion::{generator_estimate, WalkConfig};
use stiefel_laplace::functions::random::{random_field, FieldKind};
use stiefel_laplace::functions::{
    fd_gradient, fd_hessian, max_rel_diff, ConstantField, ConstraintField, IsometryPullback, LinearCombination,
    ProductField, FD_GRADIENT_STEP, FD_HESSIAN_STEP,
};
use stiefel_laplace::laplace::{
    lambda_of, laplace_closed, laplace_frame_oracle, rel_err, sigma_of, special_orthogonal_laplacian, sphere_laplacian,
};
use stiefel_laplace::tangent::{numerical_rank, projector, tangent_basis, BasisLabel, ProjectorPath};
use stiefel_laplace::{
    kron, random_stiefel_with, ConstraintIndex, DenseMatrix, ExpressionField, FieldRef, ScalarField, StiefelPoint,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    worst: f64,
    tol: f64,
    cases: usize,
    detail: String,
}

impl Outcome {
    fn new(worst: f64, tol: f64, cases: usize) -> Self {
        Self {
            worst,
            tol,
            cases,
            detail: String::new(),
        }
    }

    fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn case_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut r = rng(seed);
    r.set_stream(k as u64);
    r
}

fn shape(r: &mut ChaCha8Rng, p_min: usize, n_max: usize) -> (usize, usize) {
    let n = r.random_range(p_min..=n_max);
    (n, r.random_range(p_min..=n))
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter()
        .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

const SWEEP: [FieldKind; 4] = [
    FieldKind::Linear,
    FieldKind::Brockett,
    FieldKind::Procrustes,
    FieldKind::Polynomial,
];

fn closed_vs_frame() -> Outcome {
    let errs: Vec<f64> = (0..200)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(1, k);
            let (n, p) = shape(&mut r, 2, 8);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let f = random_field(SWEEP[k % 4], n, p, &mut r).unwrap();
            let closed = laplace_closed(&f, &u).unwrap().value;
            let frame = laplace_frame_oracle(&f, &u).unwrap().value;
            rel_err(closed, frame)
        })
        .collect();
    Outcome::new(max(errs), 1e-9, 200)
}

fn annihilation() -> Outcome {
    let shapes: Vec<(usize, usize)> = (2..=8).flat_map(|n| (2..=n).map(move |p| (n, p))).collect();
    let errs: Vec<f64> = shapes
        .par_iter()
        .enumerate()
        .map(|(s, &(n, p))| {
            let mut r = case_rng(2, s);
            let fields: Vec<ConstraintField> = ConstraintIndex::all(p)
                .into_iter()
                .map(|idx| ConstraintField::new(idx, n, p).unwrap())
                .collect();
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let u = random_stiefel_with(n, p, &mut r).unwrap();
                for f in &fields {
                    worst = worst.max(laplace_closed(f, &u).unwrap().value.abs());
                }
            }
            worst
        })
        .collect();
    let mut o = Outcome::new(max(errs), 1e-11, shapes.len() * 50);
    o.detail = format!("{} shapes x 50 points, every constraint", shapes.len());
    o
}

fn projector_identity() -> Outcome {
    let res: Vec<(f64, f64, bool)> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(3, k);
            let (n, p) = shape(&mut r, 1, 8);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let closed = projector(&u, ProjectorPath::Closed).unwrap();
            let direct = projector(&u, ProjectorPath::Direct).unwrap();
            let idem = (&closed * &closed - &closed).amax();
            let rank_ok = numerical_rank(&closed, 1e-8) == n * p - p * (p + 1) / 2;
            ((closed - direct).amax(), idem, rank_ok)
        })
        .collect();
    let gap = max(res.iter().map(|r| r.0));
    let idem = max(res.iter().map(|r| r.1));
    let ranks = res.iter().filter(|r| r.2).count();
    let worst = if ranks == res.len() {
        gap.max(idem)
    } else {
        f64::INFINITY
    };
    let mut o = Outcome::new(worst, 1e-10, 100);
    o.detail = format!("identity {gap:.1e}, idempotence {idem:.1e}, rank {ranks}/100");
    o
}

fn basis_structure() -> Outcome {
    let errs: Vec<[f64; 5]> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(4, k);
            let (n, p) = shape(&mut r, 1, 8);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let b = tangent_basis(&u).unwrap();
            let z = b.z();
            let mut worst = [0.0f64; 5];
            for (x, lx) in b.elements().iter().zip(b.labels()) {
                for (y, ly) in b.elements().iter().zip(b.labels()) {
                    let ip = x.dot(y);
                    let (slot, expected) = match (lx, ly) {
                        (BasisLabel::Skew { .. }, BasisLabel::Skew { .. }) if lx == ly => (3, 2.0),
                        (BasisLabel::Skew { .. }, BasisLabel::Skew { .. }) => (0, 0.0),
                        (BasisLabel::Normal { i: k1, c: c1 }, BasisLabel::Normal { i: k2, c: c2 }) if c1 == c2 => {
                            (4, z[(k1 - 1, k2 - 1)])
                        }
                        (BasisLabel::Normal { .. }, BasisLabel::Normal { .. }) => (1, 0.0),
                        _ => (2, 0.0),
                    };
                    worst[slot] = worst[slot].max((ip - expected).abs());
                }
            }
            worst
        })
        .collect();
    let per: Vec<f64> = (0..5).map(|i| max(errs.iter().map(|e| e[i]))).collect();
    let mut o = Outcome::new(max(per.iter().copied()), 1e-10, 100);
    o.detail = format!(
        "skew-skew {:.1e}, normal cross-column {:.1e}, skew-normal {:.1e}, skew norm {:.1e}, normal gram {:.1e}",
        per[0], per[1], per[2], per[3], per[4]
    );
    o
}

fn sphere_eigen() -> Outcome {
    let harmonics = [
        (1usize, "u[1,1]"),
        (2, "u[1,1]*u[2,1]"),
        (3, "u[1,1]^3 - 3*u[1,1]*u[2,1]^2"),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=6 {
        for (l, src) in harmonics {
            let f = ExpressionField::parse(src, n, 1).unwrap();
            let eigen = -((l * (l + n - 2)) as f64);
            let mut r = rng(50 + 10 * n as u64 + l as u64);
            for _ in 0..50 {
                let u = random_stiefel_with(n, 1, &mut r).unwrap();
                let lap = sphere_laplacian(&f, u.as_matrix()).unwrap();
                worst = worst.max(rel_err(lap, eigen * f.value(u.as_matrix()).unwrap()));
                count += 1;
            }
        }
    }
    Outcome::new(worst, 1e-8, count)
}

fn reductions() -> Outcome {
    // n − (p+1)/2 at p = n equals (n−1)/2: compare 2n − (n+1) with n − 1 exactly.
    let coefficient_ok = (1i64..=1000).all(|n| 2 * n - (n + 1) == n - 1);
    let errs: Vec<(f64, f64)> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(6, k);
            let n = r.random_range(1..=8);
            let kind = FieldKind::ALL[k % 5];
            let u = random_stiefel_with(n, 1, &mut r).unwrap();
            let f = random_field(kind, n, 1, &mut r).unwrap();
            let sphere = rel_err(
                laplace_closed(&f, &u).unwrap().value,
                sphere_laplacian(&f, u.as_matrix()).unwrap(),
            );
            let u = random_stiefel_with(n, n, &mut r).unwrap();
            let f = random_field(kind, n, n, &mut r).unwrap();
            let so = rel_err(
                laplace_closed(&f, &u).unwrap().value,
                special_orthogonal_laplacian(&f, &u).unwrap(),
            );
            (sphere, so)
        })
        .collect();
    let s = max(errs.iter().map(|e| e.0));
    let so = max(errs.iter().map(|e| e.1));
    let worst = if coefficient_ok { s.max(so) } else { f64::INFINITY };
    let mut o = Outcome::new(worst, 1e-12, 200);
    o.detail = format!("p=1 {s:.1e}, p=n {so:.1e}, coefficient (n-1)/2 exact: {coefficient_ok}");
    o
}

fn prolongation_and_isometry() -> Outcome {
    let prolong: Vec<f64> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(7, k);
            let (n, p) = shape(&mut r, 1, 7);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let f = random_field(FieldKind::ALL[k % 5], n, p, &mut r).unwrap();
            let g = random_field(FieldKind::Transcendental, n, p, &mut r).unwrap();
            let all = ConstraintIndex::all(p);
            let idx = all[r.random_range(0..all.len())];
            let fa: FieldRef = Arc::new(ConstraintField::new(idx, n, p).unwrap());
            let one: FieldRef = Arc::new(ConstantField { value: 1.0, n, p });
            let shifted: FieldRef =
                Arc::new(LinearCombination::new(vec![(1.0, fa), (-idx.regular_value(), one)]).unwrap());
            let ext: FieldRef = Arc::new(ProductField::new(shifted, g).unwrap());
            let h = LinearCombination::new(vec![(1.0, f.clone()), (1.0, ext)]).unwrap();
            rel_err(
                laplace_closed(&h, &u).unwrap().value,
                laplace_closed(&f, &u).unwrap().value,
            )
        })
        .collect();
    let iso: Vec<f64> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(8, k);
            let (n, p) = shape(&mut r, 1, 7);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let f = random_field(FieldKind::ALL[k % 5], n, p, &mut r).unwrap();
            let q = random_stiefel_with(n, n, &mut r).unwrap().as_matrix().clone();
            let rr = random_stiefel_with(p, p, &mut r).unwrap().as_matrix().clone();
            let moved = StiefelPoint::new(DenseMatrix::new(&q * u.as_matrix() * &rr).unwrap()).unwrap();
            let g = IsometryPullback::new(f.clone(), q, rr).unwrap();
            rel_err(
                laplace_closed(&g, &u).unwrap().value,
                laplace_closed(&f, &moved).unwrap().value,
            )
        })
        .collect();
    let (a, b) = (max(prolong), max(iso));
    let mut o = Outcome::new(a.max(b), 1e-8, 200);
    o.detail = format!("prolongation {a:.1e}, isometry {b:.1e}");
    o
}

fn trace_identities() -> Outcome {
    let errs: Vec<[f64; 3]> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(9, k);
            let (n, p) = shape(&mut r, 1, 7);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let f = random_field(FieldKind::ALL[k % 5], n, p, &mut r).unwrap();
            let um = u.as_matrix();
            let sigma = sigma_of(&f, &u).unwrap();
            let s = sigma.matrix();
            let tr_ug = um.dot(&f.gradient(um).unwrap());
            let s_i = kron(s, &DMatrix::identity(n, n));
            let s_uu = kron(s, &(um * um.transpose()));
            [
                rel_err(s_i.trace(), n as f64 * tr_ug),
                rel_err(s_uu.trace(), p as f64 * tr_ug),
                rel_err((lambda_of(&u).matrix() * &s_i).trace(), sigma.trace()),
            ]
        })
        .collect();
    let per: Vec<f64> = (0..3).map(|i| max(errs.iter().map(|e| e[i]))).collect();
    let mut o = Outcome::new(max(per.iter().copied()), 1e-10, 100);
    o.detail = format!("{:.1e} / {:.1e} / {:.1e}", per[0], per[1], per[2]);
    o
}

fn ad_correctness() -> Outcome {
    let errs: Vec<(f64, f64)> = (0..100)
        .into_par_iter()
        .map(|k| {
            let mut r = case_rng(10, k);
            let (n, p) = shape(&mut r, 1, 5);
            let f = random_field(FieldKind::ALL[k % 5], n, p, &mut r).unwrap();
            let u = DMatrix::from_fn(n, p, |_, _| r.random_range(-0.9..0.9));
            let g = max_rel_diff(
                &f.gradient(&u).unwrap(),
                &fd_gradient(&*f, &u, FD_GRADIENT_STEP).unwrap(),
            );
            let h = max_rel_diff(&f.hessian(&u).unwrap(), &fd_hessian(&*f, &u, FD_HESSIAN_STEP).unwrap());
            (g, h)
        })
        .collect();
    let g = max(errs.iter().map(|e| e.0));
    let h = max(errs.iter().map(|e| e.1));
    // Report against a common scale: each error over its own tolerance.
    let mut o = Outcome::new((g / 1e-6).max(h / 1e-4), 1.0, 100);
    o.detail = format!("gradient {g:.1e} (tol 1e-6), hessian {h:.1e} (tol 1e-4)");
    o
}

fn generator_check() -> Outcome {
    let (h, m) = (1e-3, 100_000);
    let kinds = [FieldKind::Linear, FieldKind::Brockett, FieldKind::Polynomial];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    let mut count = 0;
    for (s, (n, p)) in [(3usize, 1usize), (4, 2)].into_iter().enumerate() {
        for (j, kind) in kinds.into_iter().enumerate() {
            let mut r = rng(100 + 10 * s as u64 + j as u64);
            let u = random_stiefel_with(n, p, &mut r).unwrap();
            let f = random_field(kind, n, p, &mut r).unwrap();
            let target = 0.5 * laplace_closed(&f, &u).unwrap().value;
            let cfg = WalkConfig::new(h, m, r.random()).unwrap();
            let est = generator_estimate(&f, &u, &cfg).unwrap();
            let se = est.std_error.unwrap();
            let tol = 3.0 * se + 0.5 * h * (1.0 + target.abs());
            let err = (est.estimate - target).abs();
            worst = worst.max(err / tol);
            count += 1;
            lines.push(format!("({n},{p}) {kind:?}: {err:.2e}/{tol:.2e}"));
        }
    }
    let mut o = Outcome::new(worst, 1.0, count);
    o.detail = format!("err/tol per case: {}", lines.join("; "));
    o
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed form vs frame oracle", closed_vs_frame),
        ("constraint annihilation", annihilation),
        ("projector identity, idempotence, rank", projector_identity),
        ("tangent frame structure", basis_structure),
        ("sphere eigenfunctions", sphere_eigen),
        ("sphere and orthogonal-group reductions", reductions),
        (
            "prolongation independence and isometry invariance",
            prolongation_and_isometry,
        ),
        ("trace identities", trace_identities),
        ("AD vs finite differences", ad_correctness),
        ("diffusion generator check", generator_check),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                let verdict = if o.pass() { "PASS" } else { "FAIL" };
                if !o.pass() {
                    failed += 1;
                }
                let extra = if o.detail.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", o.detail)
                };
                println!(
                    "criterion {:>2} {verdict}: {name}: {} cases, worst {:.3e} <= {:.0e}{extra} ({secs:.2}s)",
                    i + 1,
                    o.cases,
                    o.worst,
                    o.tol
                );
            }
            Err(_) => {
                failed += 1;
                println!("criterion {:>2} FAIL: {name}: panicked ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
