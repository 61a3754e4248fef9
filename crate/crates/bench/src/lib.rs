//! Shared fixtures for the benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_laplace::functions::random::{random_field, FieldKind};
use stiefel_laplace::{random_stiefel_with, FieldRef, StiefelPoint};

/// Shapes benchmarked, smallest first.
pub const SHAPES: [(usize, usize); 4] = [(4, 2), (8, 3), (12, 4), (16, 6)];

/// A seeded point and field of the given kind on St_p^n.
pub fn fixture(n: usize, p: usize, kind: FieldKind, seed: u64) -> (StiefelPoint, FieldRef) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_stiefel_with(n, p, &mut rng).expect("valid shape");
    let f = random_field(kind, n, p, &mut rng).expect("valid field");
    (u, f)
}
