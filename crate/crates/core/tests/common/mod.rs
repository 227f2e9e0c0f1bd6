//! Independent reference computations shared by the integration tests.
//! Nothing here goes through the crate's matrices: constraints and summing
//! matrices are rebuilt from the raw edge lists.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use recon_core::synthetic::random_spec;
use recon_core::{link_hierarchies, HierarchySpec, LinkedSystem};

/// One row `y_p - sum(children) = 0` per internal node of every hierarchy.
pub fn edge_constraints(specs: &[HierarchySpec], ordering: &[String]) -> DMatrix<f64> {
    let col: HashMap<&str, usize> = ordering.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for spec in specs {
        let mut children: Vec<(&str, Vec<&str>)> = Vec::new();
        for (p, c) in spec.edges() {
            match children.iter_mut().find(|(q, _)| q == p) {
                Some((_, cs)) => cs.push(c),
                None => children.push((p, vec![c])),
            }
        }
        for (p, cs) in children {
            let mut r = DVector::zeros(ordering.len());
            r[col[p]] = 1.0;
            for c in cs {
                r[col[c]] -= 1.0;
            }
            rows.push(r);
        }
    }
    let mut a = DMatrix::zeros(rows.len(), ordering.len());
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, &r.transpose());
    }
    a
}

/// Minimiser of `(yhat - y)' W^-1 (yhat - y)` subject to `A y = 0`, from an
/// LU solve of the full KKT system.
pub fn kkt_oracle(a: &DMatrix<f64>, w: &DMatrix<f64>, y_hat: &DVector<f64>) -> DVector<f64> {
    let n = w.nrows();
    let k = a.nrows();
    let w_inv = w.clone().lu().try_inverse().expect("W invertible");
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&w_inv);
    kkt.view_mut((0, n), (n, k)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (k, n)).copy_from(a);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(&w_inv * y_hat));
    let sol = kkt.lu().solve(&rhs).expect("KKT system nonsingular");
    sol.rows(0, n).into_owned()
}

/// `S` for one tree: column `j` marks every ancestor of bottom `j`.
pub fn summing_matrix(spec: &HierarchySpec, ordering: &[String]) -> (DMatrix<f64>, Vec<String>) {
    let parents: HashSet<&str> = spec.edges().iter().map(|(p, _)| p.as_str()).collect();
    let parent_of: HashMap<&str, &str> = spec.edges().iter().map(|(p, c)| (c.as_str(), p.as_str())).collect();
    let leaves: Vec<String> = ordering
        .iter()
        .filter(|s| parent_of.contains_key(s.as_str()) && !parents.contains(s.as_str()))
        .cloned()
        .collect();
    let row: HashMap<&str, usize> = ordering.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut s = DMatrix::zeros(ordering.len(), leaves.len());
    for (j, leaf) in leaves.iter().enumerate() {
        let mut node = leaf.as_str();
        s[(row[node], j)] = 1.0;
        while let Some(&p) = parent_of.get(node) {
            s[(row[p], j)] = 1.0;
            node = p;
        }
    }
    (s, leaves)
}

/// `S (S' W^-1 S)^-1 S' W^-1 yhat`.
pub fn regression_oracle(s: &DMatrix<f64>, w: &DMatrix<f64>, y_hat: &DVector<f64>) -> DVector<f64> {
    let w_inv = w.clone().lu().try_inverse().expect("W invertible");
    let g = s.transpose() * &w_inv * s;
    let beta = g
        .lu()
        .solve(&(s.transpose() * &w_inv * y_hat))
        .expect("S'W^-1 S invertible");
    s * beta
}

/// `||a - b||_inf / max(1, ||b||_inf)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// A random linked system of up to `max_sides` trees sharing `T`, with at
/// most 50 series in total.
pub fn random_system<R: Rng>(rng: &mut R, max_sides: usize) -> (Vec<HierarchySpec>, LinkedSystem) {
    loop {
        let sides = rng.random_range(1..=max_sides);
        let specs: Vec<HierarchySpec> = (0..sides)
            .map(|l| {
                let ma = rng.random_range(0..=5);
                let mb = rng.random_range(ma + 1..=ma + 12);
                random_spec(&format!("h{l}"), "T", ma, mb, rng)
            })
            .collect();
        let system = link_hierarchies(&specs, "T").expect("random trees link");
        if system.n() <= 50 {
            return (specs, system);
        }
    }
}

/// A coherent vector: random bottoms of the first tree summed up, the other
/// trees given random shares of the same top.
pub fn coherent_vector<R: Rng>(specs: &[HierarchySpec], system: &LinkedSystem, rng: &mut R) -> DVector<f64> {
    let ordering = system.ordering();
    let mut y = DVector::zeros(ordering.len());
    let mut top = None;
    for spec in specs {
        let (s, leaves) = summing_matrix(spec, ordering);
        let mut b: DVector<f64> = DVector::from_fn(leaves.len(), |_, _| rng.random_range(1.0..100.0));
        if let Some(t) = top {
            let sum = b.sum();
            b *= t / sum;
        }
        let full = s * b;
        top.get_or_insert(full[0]);
        for (i, v) in full.iter().enumerate() {
            if *v != 0.0 {
                y[i] = *v;
            }
        }
    }
    y
}
