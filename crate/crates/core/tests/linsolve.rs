mod common;

use common::*;
use onsager_flow::grid::*;
use onsager_flow::linsolve::spectral::{Basis1d, Stencil1d};
use onsager_flow::linsolve::*;
use std::f64::consts::PI;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn helmholtz_apply(alpha: f64, eta: f64, w: &FaceVelocity) -> FaceVelocity {
    let mut out = w.scaled(alpha);
    out.axpy(-eta, &vector_laplacian(w));
    out.zero_walls();
    out
}

/// Both rows of the Cahn-Hilliard block applied to `(phi, mu)`.
fn ch_apply(a0: f64, m: f64, eps2: f64, gamma0: f64, gsq: &ScalarField, phi: &ScalarField, mu: &ScalarField) -> (ScalarField, ScalarField) {
    let mut r1 = phi.scaled(a0);
    r1.axpy(-m, &laplacian(mu));
    let mut r2 = mu.clone();
    r2.axpy(eps2, &laplacian(phi));
    r2.axpy(-gamma0, phi);
    r2.axpy(-1.0, &gsq.zip_map(phi, |a, b| a * b));
    (r1, r2)
}

#[test]
fn helmholtz_without_viscosity_is_diagonal() {
    let mut r = rng(1);
    for g in grids() {
        let s = GridSolvers::new(&g);
        let rhs = random_face(&g, &mut r);
        let (w, _) = s.solve_helmholtz_velocity(4.0, 0.0, &rhs, &cfg()).unwrap();
        let want = rhs.scaled(0.25);
        assert!(FaceVelocity::lincomb(1.0, &w, -1.0, &want).max_abs() < 1e-14);
    }
}

#[test]
fn helmholtz_zero_rhs_gives_zero() {
    for g in grids() {
        let s = GridSolvers::new(&g);
        let (w, _) = s.solve_helmholtz_velocity(3.0, 0.7, &FaceVelocity::zeros(&g), &cfg()).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }
}

#[test]
fn helmholtz_recovers_manufactured_solution() {
    let mut r = rng(2);
    for g in grids() {
        for kind in [PreconditionerKind::Spectral, PreconditionerKind::Jacobi] {
            let c = SolverConfig { preconditioner: kind, ..cfg() };
            let s = GridSolvers::new(&g);
            let w0 = random_face(&g, &mut r);
            let (alpha, eta) = (200.0, 1.3);
            let rhs = helmholtz_apply(alpha, eta, &w0);
            let (w, rep) = s.solve_helmholtz_velocity(alpha, eta, &rhs, &c).unwrap();
            // independent residual check of the report contract
            let res = FaceVelocity::lincomb(1.0, &helmholtz_apply(alpha, eta, &w), -1.0, &rhs).pack();
            let res = res.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bnorm = rhs.pack().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rep.converged);
            assert!(res <= (c.rel_tol * bnorm).max(c.abs_tol) * (1.0 + 1e-6), "{kind:?} {res}");
            assert!((res - rep.final_residual).abs() <= 1e-3 * res.max(1e-300) + 1e-15);
            let err = FaceVelocity::lincomb(1.0, &w, -1.0, &w0).max_abs();
            assert!(err < 1e-8, "{kind:?} error {err}");
            if g.is_wall() {
                assert!(w.v()[..g.nx()].iter().all(|x| *x == 0.0));
            }
        }
    }
}

#[test]
fn spectral_preconditioner_is_exact_for_helmholtz() {
    let mut r = rng(3);
    for g in grids() {
        let s = GridSolvers::new(&g);
        let w0 = random_face(&g, &mut r);
        let rhs = helmholtz_apply(50.0, 2.0, &w0);
        let (_, rep) = s.solve_helmholtz_velocity(50.0, 2.0, &rhs, &cfg()).unwrap();
        assert!(rep.iterations <= 2, "iterations {}", rep.iterations);
    }
}

#[test]
fn poisson_zero_rhs_gives_zero() {
    for g in grids() {
        let (p, _) = GridSolvers::new(&g).solve_poisson_neumann(&ScalarField::zeros(&g), &cfg()).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }
}

#[test]
fn poisson_recovers_mean_free_solution() {
    let mut r = rng(4);
    for g in grids() {
        for kind in [PreconditionerKind::Spectral, PreconditionerKind::Jacobi] {
            let c = SolverConfig { preconditioner: kind, ..cfg() };
            let f = random_scalar(&g, &mut r);
            let mut rhs = laplacian(&f);
            rhs.add_constant(-rhs.mean());
            let (p, rep) = GridSolvers::new(&g).solve_poisson_neumann(&rhs, &c).unwrap();
            assert!(rep.converged);
            let mut want = f.clone();
            want.add_constant(-f.mean());
            let err = ScalarField::lincomb(1.0, &p, -1.0, &want).max_abs();
            assert!(err < 1e-7, "{kind:?}: {err}");
            assert!(p.mean().abs() < 1e-12);
        }
    }
}

#[test]
fn poisson_rejects_incompatible_rhs() {
    let g = GridSpec::new(8, 8, 1.0, 1.0, Boundary::Wall).unwrap();
    let rhs = ScalarField::constant(&g, 1.0);
    match GridSolvers::new(&g).solve_poisson_neumann(&rhs, &cfg()) {
        Err(SolveError::Incompatible { mean, .. }) => assert!((mean - 1.0).abs() < 1e-14),
        other => panic!("expected incompatibility error, got {other:?}"),
    }
}

#[test]
fn poisson_tolerates_summation_roundoff_in_the_mean() {
    let g = GridSpec::new(8, 8, 1.0, 1.0, Boundary::Wall).unwrap();
    let mut b = ScalarField::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
    let floor = g.cells() as f64 * f64::EPSILON * b.max_abs();
    let strict = SolverConfig { rel_tol: 1e-30, abs_tol: 1e-300, ..cfg() };
    let m = b.mean();
    b.add_constant(0.5 * floor - m);
    let r = GridSolvers::new(&g).solve_poisson_neumann(&b, &strict);
    assert!(!matches!(r, Err(SolveError::Incompatible { .. })), "{r:?}");
    b.add_constant(floor);
    assert!(matches!(GridSolvers::new(&g).solve_poisson_neumann(&b, &strict), Err(SolveError::Incompatible { .. })));
}

#[test]
fn nullspace_solution_ignores_constant_shift_of_guess() {
    let g = GridSpec::new(8, 6, 1.0, 1.0, Boundary::Wall).unwrap();
    let mut r = rng(5);
    let f = random_scalar(&g, &mut r);
    let mut b = laplacian(&f).into_vec();
    remove_mean(&mut b);
    let op = FnOperator {
        dim: g.cells(),
        f: |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(laplacian(&ScalarField::from_vec(&g, x.to_vec()).unwrap()).data())
        },
    };
    let project = |v: &mut [f64]| remove_mean(v);
    let guess = random_scalar(&g, &mut r).into_vec();
    let shifted: Vec<f64> = guess.iter().map(|v| v + 7.5).collect();
    let (a, _) = bicgstab("test", &op, &Identity, &b, Some(&guess), &cfg(), Some(&project)).unwrap();
    let (c, _) = bicgstab("test", &op, &Identity, &b, Some(&shifted), &cfg(), Some(&project)).unwrap();
    for (x, y) in a.iter().zip(&c) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn bicgstab_residual_contracts_and_is_deterministic() {
    // nonsymmetric tridiagonal system with a known solution
    let n = 60;
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 4.0 * x[i] - 1.3 * l - 0.6 * r;
        }
    };
    let op = FnOperator { dim: n, f: apply };
    let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut b = vec![0.0; n];
    apply(&x0, &mut b);
    let jac = Jacobi::new(&vec![4.0; n]);
    let (x, rep) = bicgstab("tridiagonal", &op, &jac, &b, None, &cfg(), None).unwrap();
    let (x2, rep2) = bicgstab("tridiagonal", &op, &jac, &b, None, &cfg(), None).unwrap();
    assert_eq!(x, x2);
    assert_eq!(rep, rep2);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let res: f64 = ax.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(res <= 1e-10 * bn);
    assert!(x.iter().zip(&x0).all(|(a, c)| (a - c).abs() < 1e-9));
}

#[test]
fn bicgstab_reports_non_convergence() {
    let n = 40;
    let op = FnOperator {
        dim: n,
        f: |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (i as f64 + 1.0) * x[i] + if i > 0 { x[i - 1] } else { 0.0 };
            }
        },
    };
    let b = vec![1.0; n];
    let c = SolverConfig { max_iter: 2, ..cfg() };
    match bicgstab("capped", &op, &Identity, &b, None, &c, None) {
        Err(SolveError::NotConverged { iterations, .. }) => assert!(iterations <= 2),
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn solver_config_validation() {
    assert!(cfg().validate().is_ok());
    assert!(SolverConfig { rel_tol: 0.0, ..cfg() }.validate().is_err());
    assert!(SolverConfig { max_iter: 0, ..cfg() }.validate().is_err());
}

#[test]
fn ch_block_without_mobility_decouples() {
    let mut r = rng(6);
    let g = GridSpec::new(8, 8, 1.0, 1.0, Boundary::Wall).unwrap();
    let s = GridSolvers::new(&g);
    let gsq = random_scalar(&g, &mut r).map(|v| v * v);
    let (rp, rm) = (random_scalar(&g, &mut r), random_scalar(&g, &mut r));
    let (phi, mu, _) = s.solve_ch_block(5.0, 0.0, 0.01, 0.2, &gsq, &rp, &rm, &cfg()).unwrap();
    let want_phi = rp.scaled(0.2);
    assert!(ScalarField::lincomb(1.0, &phi, -1.0, &want_phi).max_abs() < 1e-12);
    let mut want_mu = rm.clone();
    want_mu.axpy(-0.01, &laplacian(&want_phi));
    want_mu.axpy(0.2, &want_phi);
    want_mu.axpy(1.0, &gsq.zip_map(&want_phi, |a, b| a * b));
    assert!(ScalarField::lincomb(1.0, &mu, -1.0, &want_mu).max_abs() < 1e-10);
}

#[test]
fn ch_block_recovers_manufactured_pair() {
    let mut r = rng(7);
    for g in grids() {
        let s = GridSolvers::new(&g);
        let gsq = random_scalar(&g, &mut r).map(|v| 2.0 * v * v);
        let (phi0, mu0) = (random_scalar(&g, &mut r), random_scalar(&g, &mut r));
        let (a0, m, eps2, gamma0) = (400.0, 1e-2, 1e-3, 0.5);
        let (rp, rm) = ch_apply(a0, m, eps2, gamma0, &gsq, &phi0, &mu0);
        let (phi, mu, rep) = s.solve_ch_block(a0, m, eps2, gamma0, &gsq, &rp, &rm, &cfg()).unwrap();
        assert!(rep.converged);
        let e1 = ScalarField::lincomb(1.0, &phi, -1.0, &phi0).max_abs();
        let e2 = ScalarField::lincomb(1.0, &mu, -1.0, &mu0).max_abs();
        assert!(e1 < 1e-8 && e2 < 1e-6, "{e1} {e2}");
        // both block rows hold by independent substitution
        let (q1, q2) = ch_apply(a0, m, eps2, gamma0, &gsq, &phi, &mu);
        assert!(ScalarField::lincomb(1.0, &q1, -1.0, &rp).norm_l2() <= 1e-8 * rp.norm_l2());
        assert!(ScalarField::lincomb(1.0, &q2, -1.0, &rm).max_abs() < 1e-12 * (1.0 + rm.max_abs()) * 1e3);
        // the integral of phi is exact
        assert!((phi.integral() - rp.integral() / a0).abs() < 1e-14);
    }
}

/// Naive two-dimensional DFT; returns (re, im).
fn dft2(g: &GridSpec, f: &[f64], inverse: bool, re_in: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (g.nx(), g.ny());
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut re = vec![0.0; nx * ny];
    let mut im = vec![0.0; nx * ny];
    for ky in 0..ny {
        for kx in 0..nx {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..ny {
                for i in 0..nx {
                    let th = sign * 2.0 * PI * ((kx * i) as f64 / nx as f64 + (ky * j) as f64 / ny as f64);
                    let (fr, fi) = (f[j * nx + i], re_in.map_or(0.0, |v| v[j * nx + i]));
                    a += fr * th.cos() - fi * th.sin();
                    b += fr * th.sin() + fi * th.cos();
                }
            }
            re[ky * nx + kx] = a;
            im[ky * nx + kx] = b;
        }
    }
    (re, im)
}

#[test]
fn ch_block_matches_fourier_solve() {
    let g = GridSpec::new(12, 8, 1.0, 0.75, Boundary::Periodic).unwrap();
    let mut r = rng(8);
    let (rp, rm) = (random_scalar(&g, &mut r), random_scalar(&g, &mut r));
    let (a0, m, eps2, gamma0) = (100.0, 0.05, 2e-3, 0.3);
    let gsq = ScalarField::zeros(&g);
    let (phi, _, _) = GridSolvers::new(&g).solve_ch_block(a0, m, eps2, gamma0, &gsq, &rp, &rm, &cfg()).unwrap();

    let (pr, pi) = dft2(&g, rp.data(), false, None);
    let (mr, mi) = dft2(&g, rm.data(), false, None);
    let (nx, ny) = (g.nx(), g.ny());
    let (mut hr, mut hi) = (vec![0.0; nx * ny], vec![0.0; nx * ny]);
    for ky in 0..ny {
        for kx in 0..nx {
            let k = ky * nx + kx;
            let lam = -4.0 / (g.hx() * g.hx()) * (PI * kx as f64 / nx as f64).sin().powi(2)
                - 4.0 / (g.hy() * g.hy()) * (PI * ky as f64 / ny as f64).sin().powi(2);
            let den = a0 + m * eps2 * lam * lam - m * gamma0 * lam;
            hr[k] = (pr[k] + m * lam * mr[k]) / den;
            hi[k] = (pi[k] + m * lam * mi[k]) / den;
        }
    }
    // inverse transform of (hr + i hi): pass the imaginary part separately
    let (want, _) = dft2(&g, &hr, true, Some(&hi));
    let n = (nx * ny) as f64;
    for k in 0..g.cells() {
        assert!((phi.data()[k] - want[k] / n).abs() < 1e-10, "{} vs {}", phi.data()[k], want[k] / n);
    }
}

#[test]
fn director_block_recovers_manufactured_solution() {
    let mut r = rng(9);
    for g in grids() {
        let s = GridSolvers::new(&g);
        let gv = random_vector(&g, &mut r).scaled(3.0);
        let p0 = random_vector(&g, &mut r);
        let (alpha, beta, gamma) = (100.0, 0.01, 0.8);
        let apply = |p: &CellVector| {
            let mut out = p.scaled(alpha);
            out.axpy(-beta, &CellVector { x: laplacian(&p.x), y: laplacian(&p.y) });
            out.axpy(gamma, &gv.times(&gv.dot(p)));
            out
        };
        let rhs = apply(&p0);
        let (p, rep) = s.solve_director_block(alpha, beta, gamma, &gv, &rhs, &cfg()).unwrap();
        assert!(rep.converged);
        assert!(CellVector::lincomb(1.0, &p, -1.0, &p0).max_abs() < 1e-8);
    }
}

#[test]
fn one_dimensional_bases_diagonalise_their_stencils() {
    for (kind, n) in [
        (Stencil1d::Periodic, 7),
        (Stencil1d::Reflect, 6),
        (Stencil1d::OddReflect, 6),
        (Stencil1d::Dirichlet, 5),
    ] {
        let h = 0.3;
        let b = Basis1d::new(n, h, kind);
        assert_eq!(b.len(), n);
        // dense stencil written out independently
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -2.0 / (h * h);
            if i > 0 {
                a[(i, i - 1)] = 1.0 / (h * h);
            }
            if i + 1 < n {
                a[(i, i + 1)] = 1.0 / (h * h);
            }
        }
        match kind {
            Stencil1d::Periodic => {
                a[(0, n - 1)] += 1.0 / (h * h);
                a[(n - 1, 0)] += 1.0 / (h * h);
            }
            Stencil1d::Reflect => {
                a[(0, 0)] += 1.0 / (h * h);
                a[(n - 1, n - 1)] += 1.0 / (h * h);
            }
            Stencil1d::OddReflect => {
                a[(0, 0)] -= 1.0 / (h * h);
                a[(n - 1, n - 1)] -= 1.0 / (h * h);
            }
            Stencil1d::Dirichlet => {}
        }
        let mut want: Vec<f64> = nalgebra::SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        let mut got: Vec<f64> = (0..n).map(|k| b.eigenvalue(k)).collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{kind:?}: {x} vs {y}");
        }
    }
}
