//! Discrete operators on the staggered grid.
//!
//! Gradient (cell to face) and divergence (face to cell) are negative
//! adjoints of each other in the volume-weighted inner products, and the
//! scalar Laplacian is their composition. The skew convection operator
//! satisfies `<B(v, u), u> = 0` for every `v`.

use super::{CellTensor, CellVector, CsrMatrix, FaceVelocity, GridSpec, ScalarField};

/// Neighbouring cell rows in y; walls reflect (homogeneous Neumann).
#[inline]
fn cell_rows(g: &GridSpec, j: usize) -> (usize, usize) {
    if g.is_wall() {
        (j.saturating_sub(1), (j + 1).min(g.ny() - 1))
    } else {
        (g.jm(j), g.jp(j))
    }
}

/// Row index of the y-face above cell row `j`.
#[inline]
fn face_above(g: &GridSpec, j: usize) -> usize {
    if g.is_wall() {
        j + 1
    } else {
        g.jp(j)
    }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let d = f.data();
    let mut out = ScalarField::zeros(&g);
    let o = out.data_mut();
    for j in 0..g.ny() {
        let (jm, jp) = cell_rows(&g, j);
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            let c = d[k];
            o[k] = cx * (d[g.idx(g.ip(i), j)] - 2.0 * c + d[g.idx(g.im(i), j)])
                + cy * (d[g.idx(i, jp)] - 2.0 * c + d[g.idx(i, jm)]);
        }
    }
    out
}

pub fn gradient(f: &ScalarField) -> FaceVelocity {
    let g = *f.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let d = f.data();
    let mut w = FaceVelocity::zeros(&g);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            w.u_mut()[g.idx(i, j)] = (d[g.idx(i, j)] - d[g.idx(g.im(i), j)]) / hx;
        }
    }
    for j in g.v_interior() {
        let jb = if g.is_wall() { j - 1 } else { g.jm(j) };
        for i in 0..g.nx() {
            w.v_mut()[g.idx(i, j)] = (d[g.idx(i, j)] - d[g.idx(i, jb)]) / hy;
        }
    }
    w
}

pub fn divergence(w: &FaceVelocity) -> ScalarField {
    let g = *w.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let (u, v) = (w.u(), w.v());
    let mut out = ScalarField::zeros(&g);
    let o = out.data_mut();
    for j in 0..g.ny() {
        let jt = face_above(&g, j);
        for i in 0..g.nx() {
            o[g.idx(i, j)] =
                (u[g.idx(g.ip(i), j)] - u[g.idx(i, j)]) / hx + (v[g.idx(i, jt)] - v[g.idx(i, j)]) / hy;
        }
    }
    out
}

/// Component-wise Laplacian of a staggered velocity. Walls are no-slip:
/// the x-velocity uses an odd ghost reflection, the wall y-faces are zero.
pub fn vector_laplacian(w: &FaceVelocity) -> FaceVelocity {
    let g = *w.grid();
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let ny = g.ny();
    let mut out = FaceVelocity::zeros(&g);
    let u = w.u();
    for j in 0..ny {
        for i in 0..g.nx() {
            let c = u[g.idx(i, j)];
            let (below, above) = if g.is_wall() {
                (
                    if j == 0 { -c } else { u[g.idx(i, j - 1)] },
                    if j + 1 == ny { -c } else { u[g.idx(i, j + 1)] },
                )
            } else {
                (u[g.idx(i, g.jm(j))], u[g.idx(i, g.jp(j))])
            };
            out.u_mut()[g.idx(i, j)] = cx * (u[g.idx(g.ip(i), j)] - 2.0 * c + u[g.idx(g.im(i), j)])
                + cy * (above - 2.0 * c + below);
        }
    }
    let v = w.v();
    for j in g.v_interior() {
        let (jb, jt) = if g.is_wall() { (j - 1, j + 1) } else { (g.jm(j), g.jp(j)) };
        for i in 0..g.nx() {
            let c = v[g.idx(i, j)];
            out.v_mut()[g.idx(i, j)] = cx * (v[g.idx(g.ip(i), j)] - 2.0 * c + v[g.idx(g.im(i), j)])
                + cy * (v[g.idx(i, jt)] - 2.0 * c + v[g.idx(i, jb)]);
        }
    }
    out
}

/// Discrete `||grad w||^2` summed edge by edge. Equals `-<lap w, w>`.
pub fn velocity_gradient_norm_sq(w: &FaceVelocity) -> f64 {
    let g = *w.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let ny = g.ny();
    let mut acc = 0.0;
    let u = w.u();
    for j in 0..ny {
        for i in 0..g.nx() {
            let c = u[g.idx(i, j)];
            acc += ((u[g.idx(g.ip(i), j)] - c) / hx).powi(2);
            if g.is_wall() {
                if j + 1 < ny {
                    acc += ((u[g.idx(i, j + 1)] - c) / hy).powi(2);
                }
                if j == 0 || j + 1 == ny {
                    // half-cell to the wall, where the velocity vanishes
                    acc += 0.5 * (2.0 * c / hy).powi(2);
                }
            } else {
                acc += ((u[g.idx(i, g.jp(j))] - c) / hy).powi(2);
            }
        }
    }
    let v = w.v();
    for j in g.v_interior() {
        for i in 0..g.nx() {
            let c = v[g.idx(i, j)];
            acc += ((v[g.idx(g.ip(i), j)] - c) / hx).powi(2);
            let jt = if g.is_wall() { j + 1 } else { g.jp(j) };
            acc += ((v[g.idx(i, jt)] - c) / hy).powi(2);
        }
    }
    if g.is_wall() {
        // edge between the wall face row 0 and the first interior row
        for i in 0..g.nx() {
            acc += (v[g.idx(i, 1)] / hy).powi(2);
        }
    }
    acc * g.cell_volume()
}

/// Skew-symmetric convection `B(v, u) = (v.grad u + div(v u)) / 2`.
///
/// Each velocity control volume exchanges the centred flux of `v` with its
/// four neighbours; the self-coupling cancels, which makes the operator
/// exactly skew in its second argument.
pub fn convect_b(v: &FaceVelocity, u: &FaceVelocity) -> FaceVelocity {
    let g = *v.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let (nx, ny) = (g.nx(), g.ny());
    let wall = g.is_wall();
    let scale = 1.0 / (2.0 * hx * hy);
    let (au, av) = (v.u(), v.v());
    let (tu, tv) = (u.u(), u.v());
    let mut out = FaceVelocity::zeros(&g);

    for j in 0..ny {
        for i in 0..nx {
            let (ip, im) = (g.ip(i), g.im(i));
            let fe = hy * 0.5 * (au[g.idx(i, j)] + au[g.idx(ip, j)]);
            let fw = -hy * 0.5 * (au[g.idx(im, j)] + au[g.idx(i, j)]);
            let mut acc = fe * tu[g.idx(ip, j)] + fw * tu[g.idx(im, j)];
            let jt = face_above(&g, j);
            if !(wall && j + 1 == ny) {
                let fnr = hx * 0.5 * (av[g.idx(im, jt)] + av[g.idx(i, jt)]);
                let jn = if wall { j + 1 } else { g.jp(j) };
                acc += fnr * tu[g.idx(i, jn)];
            }
            if !(wall && j == 0) {
                let fs = -hx * 0.5 * (av[g.idx(im, j)] + av[g.idx(i, j)]);
                let js = if wall { j - 1 } else { g.jm(j) };
                acc += fs * tu[g.idx(i, js)];
            }
            out.u_mut()[g.idx(i, j)] = scale * acc;
        }
    }

    for jf in g.v_interior() {
        // cells below and above this face, and the neighbouring face rows
        let (cb, ct, fb, ft) = if wall {
            (jf - 1, jf, jf - 1, jf + 1)
        } else {
            (g.jm(jf), jf, g.jm(jf), g.jp(jf))
        };
        for i in 0..nx {
            let (ip, im) = (g.ip(i), g.im(i));
            let fnr = hx * 0.5 * (av[g.idx(i, jf)] + av[g.idx(i, ft)]);
            let fs = -hx * 0.5 * (av[g.idx(i, fb)] + av[g.idx(i, jf)]);
            let fe = hy * 0.5 * (au[g.idx(ip, cb)] + au[g.idx(ip, ct)]);
            let fw = -hy * 0.5 * (au[g.idx(i, cb)] + au[g.idx(i, ct)]);
            let acc = fnr * tv[g.idx(i, ft)] + fs * tv[g.idx(i, fb)] + fe * tv[g.idx(ip, jf)] + fw * tv[g.idx(im, jf)];
            out.v_mut()[g.idx(i, jf)] = scale * acc;
        }
    }
    out
}

/// Arithmetic average of a cell field onto faces. Wall faces take the
/// adjacent cell value.
pub fn face_average(f: &ScalarField) -> FaceVelocity {
    let g = *f.grid();
    let d = f.data();
    let mut w = FaceVelocity::zeros(&g);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            w.u_mut()[g.idx(i, j)] = 0.5 * (d[g.idx(i, j)] + d[g.idx(g.im(i), j)]);
        }
    }
    for j in 0..g.v_rows() {
        for i in 0..g.nx() {
            let val = if g.is_wall() {
                if j == 0 {
                    d[g.idx(i, 0)]
                } else if j == g.ny() {
                    d[g.idx(i, g.ny() - 1)]
                } else {
                    0.5 * (d[g.idx(i, j)] + d[g.idx(i, j - 1)])
                }
            } else {
                0.5 * (d[g.idx(i, j)] + d[g.idx(i, g.jm(j))])
            };
            w.v_mut()[g.idx(i, j)] = val;
        }
    }
    w
}

/// Conservative transport `div(u f)` with face-averaged `f`.
pub fn convect_scalar(u: &FaceVelocity, f: &ScalarField) -> ScalarField {
    let mut flux = face_average(f).times(u);
    flux.zero_walls();
    divergence(&flux)
}

/// Centred cell-to-cell gradient; walls reflect.
pub fn cell_gradient(f: &ScalarField) -> CellVector {
    let g = *f.grid();
    let d = f.data();
    let mut out = CellVector::zeros(&g);
    for j in 0..g.ny() {
        let (jm, jp) = cell_rows(&g, j);
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            out.x.data_mut()[k] = (d[g.idx(g.ip(i), j)] - d[g.idx(g.im(i), j)]) / (2.0 * g.hx());
            out.y.data_mut()[k] = (d[g.idx(i, jp)] - d[g.idx(i, jm)]) / (2.0 * g.hy());
        }
    }
    out
}

/// Cell-centred velocity and velocity gradient `L_ab = d_b u_a`.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub velocity: CellVector,
    pub l: CellTensor,
}

/// Sparse face-to-cell maps for the cell velocity and its gradient, kept as
/// matrices so the exact adjoint is available.
#[derive(Debug, Clone)]
pub struct VelocityGradientOps {
    grid: GridSpec,
    ubar: CsrMatrix,
    vbar: CsrMatrix,
    dudx: CsrMatrix,
    dudy: CsrMatrix,
    dvdx: CsrMatrix,
    dvdy: CsrMatrix,
}

impl VelocityGradientOps {
    pub fn new(g: &GridSpec) -> Self {
        let g = *g;
        let n = g.cells();
        let cols = n + g.nx() * g.v_rows();
        let ucol = |i: usize, j: usize| g.idx(i, j);
        let vcol = |i: usize, j: usize| n + g.idx(i, j);
        let (hx, hy) = (g.hx(), g.hy());
        let (mut ub, mut vb, mut ux, mut uy, mut vx, mut vy) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for j in 0..g.ny() {
            let jt = face_above(&g, j);
            for i in 0..g.nx() {
                let k = g.idx(i, j);
                let (ip, im) = (g.ip(i), g.im(i));
                ub.push((k, ucol(i, j), 0.5));
                ub.push((k, ucol(ip, j), 0.5));
                vb.push((k, vcol(i, j), 0.5));
                vb.push((k, vcol(i, jt), 0.5));
                ux.push((k, ucol(ip, j), 1.0 / hx));
                ux.push((k, ucol(i, j), -1.0 / hx));
                vy.push((k, vcol(i, jt), 1.0 / hy));
                vy.push((k, vcol(i, j), -1.0 / hy));

                // d/dy of the cell-averaged x-velocity; no-slip walls give an
                // odd ghost value
                let c = 0.5 / hy;
                let mut add_ubar = |row: usize, coef: f64| {
                    uy.push((k, ucol(i, row), 0.5 * coef));
                    uy.push((k, ucol(ip, row), 0.5 * coef));
                };
                if g.is_wall() {
                    if j + 1 < g.ny() {
                        add_ubar(j + 1, c);
                    } else {
                        add_ubar(j, -c);
                    }
                    if j > 0 {
                        add_ubar(j - 1, -c);
                    } else {
                        add_ubar(j, c);
                    }
                } else {
                    add_ubar(g.jp(j), c);
                    add_ubar(g.jm(j), -c);
                }

                let c = 0.5 / hx;
                for (col_i, coef) in [(ip, c), (im, -c)] {
                    vx.push((k, vcol(col_i, j), 0.5 * coef));
                    vx.push((k, vcol(col_i, jt), 0.5 * coef));
                }
            }
        }
        let m = |t| CsrMatrix::from_triplets(n, cols, t);
        Self { grid: g, ubar: m(ub), vbar: m(vb), dudx: m(ux), dudy: m(uy), dvdx: m(vx), dvdy: m(vy) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn apply(&self, w: &FaceVelocity) -> VelocityGradient {
        let g = &self.grid;
        let mut full = w.u().to_vec();
        full.extend_from_slice(w.v());
        let run = |a: &CsrMatrix| {
            let mut out = ScalarField::zeros(g);
            a.matvec(&full, out.data_mut());
            out
        };
        VelocityGradient {
            velocity: CellVector { x: run(&self.ubar), y: run(&self.vbar) },
            l: CellTensor { xx: run(&self.dudx), xy: run(&self.dudy), yx: run(&self.dvdx), yy: run(&self.dvdy) },
        }
    }

    /// Adjoint of [`apply`](Self::apply): the face field `f` with
    /// `<f, w> = <a, wbar> + sum_ab <m_ab, L_ab(w)>` for every velocity `w`.
    pub fn adjoint(&self, a: &CellVector, m: &CellTensor) -> FaceVelocity {
        let g = &self.grid;
        let n = g.cells();
        let mut full = vec![0.0; n + g.nx() * g.v_rows()];
        self.ubar.matvec_transpose_add(a.x.data(), &mut full);
        self.vbar.matvec_transpose_add(a.y.data(), &mut full);
        self.dudx.matvec_transpose_add(m.xx.data(), &mut full);
        self.dudy.matvec_transpose_add(m.xy.data(), &mut full);
        self.dvdx.matvec_transpose_add(m.yx.data(), &mut full);
        self.dvdy.matvec_transpose_add(m.yy.data(), &mut full);
        let v = full.split_off(n);
        FaceVelocity::from_parts(g, full, v).expect("shapes follow the grid")
    }
}

/// Strain rate `D = (L + L^T)/2` and vorticity `W = (L - L^T)/2` at cell
/// centres.
pub fn strain_and_vorticity(w: &FaceVelocity) -> (CellTensor, CellTensor) {
    let vg = VelocityGradientOps::new(w.grid()).apply(w);
    split_gradient(&vg.l)
}

pub fn split_gradient(l: &CellTensor) -> (CellTensor, CellTensor) {
    let sym = ScalarField::lincomb(0.5, &l.xy, 0.5, &l.yx);
    let skew = ScalarField::lincomb(0.5, &l.xy, -0.5, &l.yx);
    let d = CellTensor { xx: l.xx.clone(), xy: sym.clone(), yx: sym, yy: l.yy.clone() };
    let w = CellTensor {
        xx: ScalarField::zeros(l.xx.grid()),
        xy: skew.clone(),
        yx: skew.scaled(-1.0),
        yy: ScalarField::zeros(l.xx.grid()),
    };
    (d, w)
}
