//! Fast diagonalisation of constant-coefficient operators on the grid.
//!
//! Every 1-D second-difference matrix used on the grid is symmetric, so the
//! 2-D Laplacian factors as `Qx Lx Qx^T (+) Qy Ly Qy^T`. Functions of the
//! Laplacian are applied by transforming, scaling each mode and
//! transforming back.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Boundary treatment of a 1-D second difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil1d {
    /// Periodic ring.
    Periodic,
    /// Cell centred, even ghost (homogeneous Neumann).
    Reflect,
    /// Cell centred, odd ghost (homogeneous Dirichlet half a cell away).
    OddReflect,
    /// Node based, Dirichlet neighbours held at zero.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct Basis1d {
    q: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl Basis1d {
    pub fn new(n: usize, h: f64, kind: Stencil1d) -> Self {
        let mut t = DMatrix::<f64>::zeros(n, n);
        let c = 1.0 / (h * h);
        for i in 0..n {
            t[(i, i)] = -2.0 * c;
            if i + 1 < n {
                t[(i, i + 1)] = c;
                t[(i + 1, i)] = c;
            }
        }
        match kind {
            Stencil1d::Periodic => {
                t[(0, n - 1)] += c;
                t[(n - 1, 0)] += c;
            }
            Stencil1d::Reflect => {
                t[(0, 0)] += c;
                t[(n - 1, n - 1)] += c;
            }
            Stencil1d::OddReflect => {
                t[(0, 0)] -= c;
                t[(n - 1, n - 1)] -= c;
            }
            Stencil1d::Dirichlet => {}
        }
        let eig = SymmetricEigen::new(t);
        let mut lambda = eig.eigenvalues;
        let scale = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for l in lambda.iter_mut() {
            if l.abs() < 1e-12 * scale {
                *l = 0.0;
            }
        }
        Self { q: eig.eigenvectors, lambda }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Eigenvalue of mode `k` of the 1-D stencil.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.lambda[k]
    }
}

/// Tensor-product eigenbasis of a 2-D Laplacian acting on an `nx * ny`
/// row-major array.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    x: Basis1d,
    y: Basis1d,
}

impl SpectralBasis {
    pub fn new(x: Basis1d, y: Basis1d) -> Self {
        Self { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn ny(&self) -> usize {
        self.y.len()
    }

    /// Eigenvalue of the 2-D Laplacian for mode `(i, j)`.
    pub fn eigenvalue(&self, i: usize, j: usize) -> f64 {
        self.x.lambda[i] + self.y.lambda[j]
    }

    fn to_coeffs(&self, f: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_row_slice(self.ny(), self.nx(), f);
        self.y.q.tr_mul(&m) * &self.x.q
    }

    fn from_coeffs(&self, c: &DMatrix<f64>, out: &mut [f64]) {
        let m = &self.y.q * c * self.x.q.transpose();
        let nx = self.nx();
        for j in 0..self.ny() {
            for i in 0..nx {
                out[j * nx + i] = m[(j, i)];
            }
        }
    }

    /// `out = s(Laplacian) f` where `s` is given per eigenvalue.
    pub fn apply_fn(&self, f: &[f64], out: &mut [f64], s: impl Fn(f64) -> f64) {
        let mut c = self.to_coeffs(f);
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                c[(j, i)] *= s(self.eigenvalue(i, j));
            }
        }
        self.from_coeffs(&c, out);
    }

    /// Like [`apply_fn`](Self::apply_fn) for two coupled fields: each mode
    /// pair `(a, b)` is mapped by `s(lambda, a, b)`.
    pub fn apply_pair(
        &self,
        f: &[f64],
        g: &[f64],
        out_f: &mut [f64],
        out_g: &mut [f64],
        s: impl Fn(f64, f64, f64) -> (f64, f64),
    ) {
        let mut cf = self.to_coeffs(f);
        let mut cg = self.to_coeffs(g);
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                let (a, b) = s(self.eigenvalue(i, j), cf[(j, i)], cg[(j, i)]);
                cf[(j, i)] = a;
                cg[(j, i)] = b;
            }
        }
        self.from_coeffs(&cf, out_f);
        self.from_coeffs(&cg, out_g);
    }
}
