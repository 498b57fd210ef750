//! Real coordinates for Hermitian matrices.
//!
//! An `n×n` Hermitian matrix has `n²` real degrees of freedom, ordered as the `n`
//! diagonal entries, then `Re V[a,b]` for `a < b` (row-major), then `Im V[a,b]`
//! for `a < b` in the same order.

use crate::{CMatrix, RMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    coords: Vec<Coord>,
}

impl HermitianBasis {
    pub fn new(n: usize) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let coords = (0..n)
            .map(Coord::Diag)
            .chain(pairs.iter().map(|&(a, b)| Coord::Re(a, b)))
            .chain(pairs.iter().map(|&(a, b)| Coord::Im(a, b)))
            .collect();
        HermitianBasis { n, coords }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, k: usize) -> Coord {
        self.coords[k]
    }

    /// Basis matrix `E_k` with `V = Σ_k x_k E_k`.
    pub fn element(&self, k: usize) -> CMatrix {
        let mut e = CMatrix::zeros(self.n, self.n);
        match self.coords[k] {
            Coord::Diag(a) => e[(a, a)] = C64::new(1.0, 0.0),
            Coord::Re(a, b) => {
                e[(a, b)] = C64::new(1.0, 0.0);
                e[(b, a)] = C64::new(1.0, 0.0);
            }
            Coord::Im(a, b) => {
                e[(a, b)] = C64::new(0.0, 1.0);
                e[(b, a)] = C64::new(0.0, -1.0);
            }
        }
        e
    }

    pub fn coords_of(&self, v: &CMatrix) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match *c {
                Coord::Diag(a) => v[(a, a)].re,
                Coord::Re(a, b) => v[(a, b)].re,
                Coord::Im(a, b) => v[(a, b)].im,
            })
            .collect()
    }

    pub fn assemble(&self, x: &[f64]) -> CMatrix {
        let mut v = CMatrix::zeros(self.n, self.n);
        for (c, &val) in self.coords.iter().zip(x) {
            match *c {
                Coord::Diag(a) => v[(a, a)] = C64::new(val, 0.0),
                Coord::Re(a, b) => {
                    v[(a, b)].re = val;
                    v[(b, a)].re = val;
                }
                Coord::Im(a, b) => {
                    v[(a, b)].im = val;
                    v[(b, a)].im = -val;
                }
            }
        }
        v
    }

    /// Entries `(row, col, value)` of the real embedding `[[Re, −Im], [Im, Re]]` of
    /// `E_k`, upper triangle only (`row <= col`).
    pub fn embedding_upper(&self, k: usize) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        match self.coords[k] {
            Coord::Diag(a) => vec![(a, a, 1.0), (n + a, n + a, 1.0)],
            // Re block symmetric: (a,b),(n+a,n+b) in the upper triangle.
            Coord::Re(a, b) => vec![(a, b, 1.0), (n + a, n + b, 1.0)],
            // Upper-right block is −Im E: −Im E[a,b] = −1 at (a, n+b), −Im E[b,a] = +1 at (b, n+a).
            Coord::Im(a, b) => vec![(a, n + b, -1.0), (b, n + a, 1.0)],
        }
    }

    /// Trace of `E_k`.
    pub fn trace(&self, k: usize) -> f64 {
        match self.coords[k] {
            Coord::Diag(_) => 1.0,
            _ => 0.0,
        }
    }

    /// `Re tr(C E_k)` for Hermitian `C`.
    pub fn inner(&self, k: usize, c: &CMatrix) -> f64 {
        match self.coords[k] {
            Coord::Diag(a) => c[(a, a)].re,
            Coord::Re(a, b) => 2.0 * c[(a, b)].re,
            Coord::Im(a, b) => 2.0 * c[(a, b)].im,
        }
    }

    /// Weight `w_k` with `‖V‖_F² = Σ_k w_k x_k²`.
    pub fn frobenius_weight(&self, k: usize) -> f64 {
        match self.coords[k] {
            Coord::Diag(_) => 1.0,
            _ => 2.0,
        }
    }
}

/// Real symmetric embedding `[[Re V, −Im V], [Im V, Re V]]`.
pub fn real_embedding(v: &CMatrix) -> RMatrix {
    let n = v.nrows();
    RMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let z = v[(i % n, j % n)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Hermitian part `(V + Vᴴ)/2`.
pub fn hermitian_part(v: &CMatrix) -> CMatrix {
    (v + v.adjoint()) * C64::new(0.5, 0.0)
}
