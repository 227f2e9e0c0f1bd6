//! Fixtures shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recon_core::synthetic::{random_spd, random_spec, simulate_panel};
use recon_core::{link_hierarchies, LinkedSystem, Quarter, TimeSeriesPanel};

/// Two random trees under `GDP` with the given `(aggregates, bottoms)` sizes.
pub fn linked_system(sides: &[(usize, usize)], seed: u64) -> LinkedSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<_> = sides
        .iter()
        .enumerate()
        .map(|(l, &(ma, mb))| random_spec(&format!("side{l}"), "GDP", ma, mb, &mut rng))
        .collect();
    link_hierarchies(&specs, "GDP").expect("random trees link")
}

/// The full-size layout: 5/10 and 26/53, so `n = 95`, `K = 33`.
pub fn full_size_system() -> LinkedSystem {
    linked_system(&[(5, 10), (26, 53)], 95)
}

pub fn weights(n: usize, seed: u64) -> DMatrix<f64> {
    random_spd(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn base_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(0.0..1000.0))
}

pub fn residuals(t: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(t, n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn panel(system: &LinkedSystem, periods: usize, seed: u64) -> TimeSeriesPanel {
    let start = Quarter::new(1984, 4).expect("valid quarter");
    simulate_panel(system, start, periods, &mut ChaCha8Rng::seed_from_u64(seed))
}
