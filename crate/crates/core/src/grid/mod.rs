//! Uniform 2-D staggered grid and the fields that live on it.
//!
//! Scalars sit at cell centres, the x-velocity on x-faces and the
//! y-velocity on y-faces. The x direction is always periodic; y is either
//! periodic or bounded by no-slip walls. Cell `(i, j)` is stored at
//! `j * nx + i`. The x-face stored at `(i, j)` is the left face of cell
//! `(i, j)`, the y-face stored at `(i, j)` the bottom face of cell `(i, j)`.
//! With walls there are `ny + 1` rows of y-faces and the first and last row
//! sit on the walls, where they are held at zero.

mod ops;
mod sparse;

pub use ops::*;
pub use sparse::CsrMatrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("field length {got} does not match grid (expected {expected})")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc_y: Boundary,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc_y: Boundary) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::Invalid(format!("need at least 4 cells per direction, got {nx}x{ny}")));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::Invalid(format!("domain lengths must be positive, got {lx}x{ly}")));
        }
        Ok(Self { nx, ny, lx, ly, bc_y })
    }

    pub fn periodic(n: usize, l: f64) -> Result<Self, GridError> {
        Self::new(n, n, l, l, Boundary::Periodic)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn bc_x(&self) -> Boundary {
        Boundary::Periodic
    }
    pub fn bc_y(&self) -> Boundary {
        self.bc_y
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn is_wall(&self) -> bool {
        self.bc_y == Boundary::Wall
    }

    /// Number of stored rows of y-faces.
    pub fn v_rows(&self) -> usize {
        if self.is_wall() {
            self.ny + 1
        } else {
            self.ny
        }
    }

    /// Rows of y-faces that carry unknowns.
    pub fn v_interior(&self) -> std::ops::Range<usize> {
        if self.is_wall() {
            1..self.ny
        } else {
            0..self.ny
        }
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }
    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }
    pub fn y_face(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn ip(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }
    #[inline]
    pub fn im(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }
    /// Periodic successor of a cell row (only meaningful for periodic y).
    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.ny {
            0
        } else {
            j + 1
        }
    }
    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.ny - 1
        } else {
            j - 1
        }
    }
}

/// Error-compensated (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: *grid, data: vec![0.0; grid.cells()] }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self { grid: *grid, data: vec![c; grid.cells()] }
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                data.push(f(grid.x_center(i), grid.y_center(j)));
            }
        }
        Self { grid: *grid, data }
    }

    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != grid.cells() {
            return Err(GridError::ShapeMismatch { expected: grid.cells(), got: data.len() });
        }
        Ok(Self { grid: *grid, data })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.idx(i, j);
        self.data[k] = value;
    }

    /// Cell-volume weighted inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.grid.cell_volume() * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Integral over the domain, summed with error compensation.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.data.iter().copied()) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.data.iter().copied()) / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += a * x;
        }
    }

    /// `a * x + b * y`
    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        x.zip_map(y, |p, q| a * p + b * q)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn add_constant(&mut self, c: f64) {
        for x in &mut self.data {
            *x += c;
        }
    }
}

/// Two-component cell-centred field (the director, cell velocities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVector {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl CellVector {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { x: ScalarField::zeros(grid), y: ScalarField::zeros(grid) }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        Self { x: ScalarField::from_fn(grid, |x, y| f(x, y).0), y: ScalarField::from_fn(grid, |x, y| f(x, y).1) }
    }

    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn lincomb(a: f64, p: &Self, b: f64, q: &Self) -> Self {
        Self { x: ScalarField::lincomb(a, &p.x, b, &q.x), y: ScalarField::lincomb(a, &p.y, b, &q.y) }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { x: self.x.scaled(a), y: self.y.scaled(a) }
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut out = self.x.zip_map(&other.x, |a, b| a * b);
        for (o, (a, b)) in out.data_mut().iter_mut().zip(self.y.data().iter().zip(other.y.data())) {
            *o += a * b;
        }
        out
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> ScalarField {
        self.x.zip_map(&self.y, |a, b| a.hypot(b))
    }

    /// Multiplies both components by a scalar field.
    pub fn times(&self, s: &ScalarField) -> Self {
        Self { x: self.x.zip_map(s, |a, b| a * b), y: self.y.zip_map(s, |a, b| a * b) }
    }
}

/// Cell-centred 2x2 tensor; `xy` is row x, column y.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTensor {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yx: ScalarField,
    pub yy: ScalarField,
}

impl CellTensor {
    /// `T p` at every cell.
    pub fn apply(&self, p: &CellVector) -> CellVector {
        let g = p.grid();
        let mut out = CellVector::zeros(g);
        for k in 0..g.cells() {
            let (px, py) = (p.x.data()[k], p.y.data()[k]);
            out.x.data_mut()[k] = self.xx.data()[k] * px + self.xy.data()[k] * py;
            out.y.data_mut()[k] = self.yx.data()[k] * px + self.yy.data()[k] * py;
        }
        out
    }
}

/// Staggered velocity (or any face-located pair of arrays).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceVelocity {
    grid: GridSpec,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FaceVelocity {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: *grid, u: vec![0.0; grid.cells()], v: vec![0.0; grid.nx() * grid.v_rows()] }
    }

    /// Samples the two components at their face centres. Wall faces stay zero.
    pub fn from_fns(grid: &GridSpec, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                w.u[grid.idx(i, j)] = fu(grid.x_face(i), grid.y_center(j));
            }
        }
        for j in grid.v_interior() {
            for i in 0..grid.nx() {
                w.v[grid.idx(i, j)] = fv(grid.x_center(i), grid.y_face(j));
            }
        }
        w
    }

    /// Velocity `(dpsi/dy, -dpsi/dx)` from a stream function sampled at the
    /// grid nodes; the result is discretely divergence free. With walls the
    /// stream function must vanish on both walls.
    pub fn from_streamfunction(grid: &GridSpec, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let node = |i: usize, j: usize| psi(grid.x_face(i), grid.y_face(j));
        let mut w = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                w.u[grid.idx(i, j)] = (node(i, j + 1) - node(i, j)) / hy;
            }
        }
        for j in grid.v_interior() {
            for i in 0..grid.nx() {
                w.v[grid.idx(i, j)] = -(node(i + 1, j) - node(i, j)) / hx;
            }
        }
        w
    }

    pub fn from_parts(grid: &GridSpec, u: Vec<f64>, v: Vec<f64>) -> Result<Self, GridError> {
        if u.len() != grid.cells() {
            return Err(GridError::ShapeMismatch { expected: grid.cells(), got: u.len() });
        }
        let nv = grid.nx() * grid.v_rows();
        if v.len() != nv {
            return Err(GridError::ShapeMismatch { expected: nv, got: v.len() });
        }
        let mut w = Self { grid: *grid, u, v };
        w.zero_walls();
        Ok(w)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }
    pub fn v_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }

    pub fn zero_walls(&mut self) {
        if self.grid.is_wall() {
            let (nx, ny) = (self.grid.nx(), self.grid.ny());
            self.v[..nx].fill(0.0);
            self.v[ny * nx..].fill(0.0);
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        let su: f64 = self.u.iter().zip(&other.u).map(|(a, b)| a * b).sum();
        let sv: f64 = self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum();
        self.grid.cell_volume() * (su + sv)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, x) in self.u.iter_mut().zip(&x.u) {
            *y += a * x;
        }
        for (y, x) in self.v.iter_mut().zip(&x.v) {
            *y += a * x;
        }
    }

    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        Self {
            grid: x.grid,
            u: x.u.iter().zip(&y.u).map(|(p, q)| a * p + b * q).collect(),
            v: x.v.iter().zip(&y.v).map(|(p, q)| a * p + b * q).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, u: self.u.iter().map(|x| a * x).collect(), v: self.v.iter().map(|x| a * x).collect() }
    }

    /// Face-wise product.
    pub fn times(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            u: self.u.iter().zip(&other.u).map(|(p, q)| p * q).collect(),
            v: self.v.iter().zip(&other.v).map(|(p, q)| p * q).collect(),
        }
    }

    /// Components interpolated to cell centres.
    pub fn to_cells(&self) -> CellVector {
        let g = &self.grid;
        let mut out = CellVector::zeros(g);
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.idx(i, j);
                out.x.data_mut()[k] = 0.5 * (self.u[k] + self.u[g.idx(g.ip(i), j)]);
                let jn = if g.is_wall() { j + 1 } else { g.jp(j) };
                out.y.data_mut()[k] = 0.5 * (self.v[k] + self.v[g.idx(i, jn)]);
            }
        }
        out
    }

    /// Packs the unknown faces (x-faces, then interior y-faces).
    pub fn pack(&self) -> Vec<f64> {
        let nx = self.grid.nx();
        let r = self.grid.v_interior();
        let mut out = self.u.clone();
        out.extend_from_slice(&self.v[r.start * nx..r.end * nx]);
        out
    }

    pub fn unpack(grid: &GridSpec, packed: &[f64]) -> Self {
        let nx = grid.nx();
        let n = grid.cells();
        let r = grid.v_interior();
        let mut w = Self::zeros(grid);
        w.u.copy_from_slice(&packed[..n]);
        w.v[r.start * nx..r.end * nx].copy_from_slice(&packed[n..]);
        w
    }
}
