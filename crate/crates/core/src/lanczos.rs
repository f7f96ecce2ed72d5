//! Restarted Lanczos with full reorthogonalization for the two lowest
//! eigenvalues of a Pauli-sum Hamiltonian. The start vectors come from a
//! fixed-seed generator, so results are deterministic.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pauli::{BasisAction, WeightedPauliSum};
use crate::state::{apply_sum_into, inner_slices};
use crate::{Error, Result};

const MAX_KRYLOV: usize = 300;
const MAX_RESTARTS: usize = 40;
const RESIDUAL_TOL: f64 = 1e-11;

type Terms = Vec<(Complex64, BasisAction)>;

pub(crate) fn lowest_two(h: &WeightedPauliSum) -> Result<(f64, f64, Vec<Complex64>)> {
    let terms = h.actions();
    let dim = 1usize << h.n_qubits();
    let (e0, v0) = lowest(&terms, dim, None, 0x5eed_0001)?;
    if dim == 1 {
        return Ok((e0, e0, v0));
    }
    let (e1, _) = lowest(&terms, dim, Some(&v0), 0x5eed_0002)?;
    Ok((e0, e1, v0))
}

fn apply(terms: &Terms, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    apply_sum_into(terms, x, &mut out);
    out
}

fn norm(x: &[Complex64]) -> f64 {
    Float::sqrt(x.iter().map(|a| a.norm_sqr()).sum::<f64>())
}

fn project_out(w: &mut [Complex64], basis: &[Complex64]) {
    let c = inner_slices(basis, w);
    for (a, b) in w.iter_mut().zip(basis) {
        *a -= c * b;
    }
}

fn lowest(terms: &Terms, dim: usize, deflate: Option<&[Complex64]>, seed: u64) -> Result<(f64, Vec<Complex64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let effective = dim - usize::from(deflate.is_some());
    let krylov_cap = MAX_KRYLOV.min(effective);
    let mut last_residual = f64::INFINITY;

    for _ in 0..MAX_RESTARTS {
        if let Some(d) = deflate {
            project_out(&mut start, d);
        }
        let n0 = norm(&start);
        start.iter_mut().for_each(|a| *a /= n0);

        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        let s = loop {
            let k = basis.len() - 1;
            let mut w = apply(terms, &basis[k]);
            alpha.push(inner_slices(&basis[k], &w).re);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                if let Some(d) = deflate {
                    project_out(&mut w, d);
                }
                for v in &basis {
                    project_out(&mut w, v);
                }
            }
            let b = norm(&w);
            let m = alpha.len();
            let exhausted = b < 1e-12 * (1.0 + alpha[m - 1].abs()) || m >= krylov_cap;
            if m.is_multiple_of(8) || exhausted {
                let (theta, s) = tridiagonal_lowest(&alpha, &beta);
                if b * s[m - 1].abs() < RESIDUAL_TOL * (1.0 + theta.abs()) || exhausted {
                    break s;
                }
            }
            beta.push(b);
            w.iter_mut().for_each(|a| *a /= b);
            basis.push(w);
        };

        let mut x = vec![Complex64::new(0.0, 0.0); dim];
        for (coef, v) in s.iter().zip(&basis) {
            for (a, b) in x.iter_mut().zip(v) {
                *a += b * *coef;
            }
        }
        if let Some(d) = deflate {
            project_out(&mut x, d);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        let hx = apply(terms, &x);
        let energy = inner_slices(&x, &hx).re;
        let residual = Float::sqrt(hx.iter().zip(&x).map(|(h, a)| (h - a * energy).norm_sqr()).sum::<f64>());
        last_residual = residual;
        if residual < 10.0 * RESIDUAL_TOL * (1.0 + energy.abs()) {
            return Ok((energy, x));
        }
        start = x;
    }
    Err(Error::EigenSolver(last_residual))
}

fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut best = 0;
    for i in 1..m {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let theta = eig.eigenvalues[best];
    let s = eig.eigenvectors.column(best).iter().copied().collect();
    (theta, s)
}
