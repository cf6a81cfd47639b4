//! Basis completion and random sampling helpers.

use nalgebra::QR;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::tensor::{CMatrix, PureState, C64};

/// Candidates whose residual after projection falls below this are skipped.
pub const COMPLETION_RESIDUAL: f64 = 1e-10;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extends orthonormal `seed` vectors to a basis of `C^dim`.
///
/// Candidates are the canonical basis vectors in index order, orthogonalized
/// with two passes of modified Gram–Schmidt.
pub fn complete_orthonormal_basis(seed: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = seed.to_vec();
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let p = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let r = norm(&v);
        if r < COMPLETION_RESIDUAL {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }
    basis
}

/// Matrix whose columns are `vectors`.
pub fn columns_to_matrix(vectors: &[Vec<C64>], dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r])
}

/// Unitary whose first column is the unit vector `v`.
pub fn unitary_with_first_column(v: &[C64]) -> CMatrix {
    let basis = complete_orthonormal_basis(&[v.to_vec()], v.len());
    columns_to_matrix(&basis, v.len())
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    let total: usize = dims.iter().product();
    let amps = (0..total).map(|_| gaussian(rng)).collect();
    PureState::from_unnormalized(dims.to_vec(), amps)
}

/// Haar-random unitary via QR of a Ginibre matrix with the diagonal phases of R removed.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = QR::new(g);
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}
