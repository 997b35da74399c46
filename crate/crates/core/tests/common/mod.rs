#![allow(dead_code)]

use onsager_flow::grid::{Boundary, CellVector, FaceVelocity, GridSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_scalar(g: &GridSpec, r: &mut ChaCha8Rng) -> ScalarField {
    let data = (0..g.cells()).map(|_| r.gen_range(-1.0..1.0)).collect();
    ScalarField::from_vec(g, data).unwrap()
}

pub fn random_vector(g: &GridSpec, r: &mut ChaCha8Rng) -> CellVector {
    CellVector { x: random_scalar(g, r), y: random_scalar(g, r) }
}

/// Random face field; wall-normal faces are zero.
pub fn random_face(g: &GridSpec, r: &mut ChaCha8Rng) -> FaceVelocity {
    let u = (0..g.cells()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let v = (0..g.nx() * g.v_rows()).map(|_| r.gen_range(-1.0..1.0)).collect();
    FaceVelocity::from_parts(g, u, v).unwrap()
}

pub fn grids() -> Vec<GridSpec> {
    vec![
        GridSpec::new(8, 8, 1.0, 1.0, Boundary::Periodic).unwrap(),
        GridSpec::new(8, 6, 1.3, 0.7, Boundary::Wall).unwrap(),
        GridSpec::new(5, 9, 2.0, 1.0, Boundary::Periodic).unwrap(),
        GridSpec::new(7, 4, 1.0, 2.5, Boundary::Wall).unwrap(),
    ]
}

/// Dense matrix of a linear map on flat vectors, built column by column.
pub fn assemble(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = apply(&e);
        for (r, v) in col.iter().enumerate() {
            m[(r, c)] = *v;
        }
        e[c] = 0.0;
    }
    m
}

pub fn rel(a: f64, scale: f64) -> f64 {
    a.abs() / scale.max(f64::MIN_POSITIVE)
}
