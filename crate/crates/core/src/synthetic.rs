//! Random hierarchies, coherent panels and weight matrices for tests,
//! benchmarks and the `simulate` command.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::hierarchy::{HierarchySpec, LinkedSystem, TimeSeriesPanel};
use crate::period::Quarter;

/// A random tree under `top` with exactly `n_aggregates` intermediate nodes
/// and `n_bottoms` leaves. Needs `n_bottoms` at least the number of
/// internal nodes that would otherwise be childless.
pub fn random_spec<R: Rng + ?Sized>(
    name: &str,
    top: &str,
    n_aggregates: usize,
    n_bottoms: usize,
    rng: &mut R,
) -> HierarchySpec {
    let internal: Vec<String> = std::iter::once(top.to_string())
        .chain((0..n_aggregates).map(|i| format!("{name}_A{i}")))
        .collect();
    let mut edges = Vec::new();
    let mut has_child = vec![false; internal.len()];
    for i in 1..internal.len() {
        let p = rng.random_range(0..i);
        has_child[p] = true;
        edges.push((internal[p].clone(), internal[i].clone()));
    }
    let childless: Vec<usize> = (0..internal.len()).filter(|&i| !has_child[i]).collect();
    assert!(
        n_bottoms >= childless.len().max(1),
        "{n_bottoms} bottoms cannot cover {} childless nodes",
        childless.len()
    );
    for j in 0..n_bottoms {
        let p = childless
            .get(j)
            .copied()
            .unwrap_or_else(|| rng.random_range(0..internal.len()));
        edges.push((internal[p].clone(), format!("{name}_B{j}")));
    }
    HierarchySpec::new(name, top, edges).expect("generated tree is valid")
}

/// A coherent panel for `system`: the top series follows a trending AR(1),
/// each hierarchy splits it over its bottoms with slowly varying random
/// shares, and aggregates are summed from their bottoms.
pub fn simulate_panel<R: Rng + ?Sized>(
    system: &LinkedSystem,
    start: Quarter,
    periods: usize,
    rng: &mut R,
) -> TimeSeriesPanel {
    let n = system.n();
    let mut values = DMatrix::<f64>::zeros(periods, n);
    let mut noise = || -> f64 { StandardNormal.sample(rng) };

    let mut dev = 0.0;
    let top: Vec<f64> = (0..periods)
        .map(|t| {
            dev = 0.7 * dev + 5.0 * noise();
            1000.0 + 4.0 * t as f64 + dev
        })
        .collect();
    values.column_mut(0).copy_from_slice(&top);

    for (h, block) in system.hierarchies().iter().zip(system.blocks()) {
        let mb = h.n_bottoms();
        let mut g: Vec<f64> = (0..mb).map(|_| noise()).collect();
        for t in 0..periods {
            for gj in g.iter_mut() {
                *gj = 0.9 * *gj + 0.1 * noise();
            }
            let w: Vec<f64> = g.iter().map(|v| v.exp()).collect();
            let total: f64 = w.iter().sum();
            let mut assigned = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let b = if j + 1 == mb {
                    top[t] - assigned
                } else {
                    top[t] * wj / total
                };
                assigned += b;
                values[(t, block.bottoms.start + j)] = b;
            }
            let bottoms = values.view((t, block.bottoms.start), (1, mb)).transpose();
            let aggs = h.c() * bottoms;
            for (i, a) in aggs.iter().enumerate() {
                values[(t, block.aggregates.start + i)] = *a;
            }
        }
    }
    let times = (0..periods as i64).map(|i| start.offset(i)).collect();
    TimeSeriesPanel::new(system.ordering().to_vec(), times, values).expect("simulated panel is valid")
}

/// A random symmetric positive definite matrix with eigenvalues bounded
/// away from zero.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let scales = Uniform::new(0.5, 3.0).expect("valid range");
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| scales.sample(rng)));
    let mut w = &a * a.transpose() / n as f64 + d;
    for i in 0..n {
        for j in 0..i {
            w[(j, i)] = w[(i, j)];
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{check_coherence, link_hierarchies};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_trees_have_requested_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let ma = rng.random_range(0..30);
            let mb = ma + 1 + rng.random_range(0..20);
            let spec = random_spec("x", "T", ma, mb, &mut rng);
            assert_eq!(spec.aggregates().len(), ma);
            assert_eq!(spec.bottoms().len(), mb);
        }
    }

    #[test]
    fn simulated_panels_are_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spec("inc", "GDP", 5, 10, &mut rng);
        let b = random_spec("exp", "GDP", 26, 53, &mut rng);
        let sys = link_hierarchies(&[a, b], "GDP").unwrap();
        let panel = simulate_panel(&sys, Quarter::new(1984, 4).unwrap(), 60, &mut rng);
        let v = check_coherence(&panel, &sys).unwrap();
        assert!(v.iter().all(|&x| x <= 1e-12), "{:?}", v);
    }

    #[test]
    fn spd_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 5, 40] {
            assert!(random_spd(n, &mut rng).cholesky().is_some());
        }
    }
}
