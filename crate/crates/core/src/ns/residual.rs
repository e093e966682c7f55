//! Discrete stationary operator of the rescaled channel equations.
//!
//! Residuals are written as right-hand side minus left-hand side. The
//! horizontal momentum equation is multiplied by `eps^2` and the vertical one
//! by `eps^3`, so neither carries negative powers of the aspect ratio:
//!
//! ```text
//! mass : -(1/h) [ d_x(h rho v) + d_s(rho omega) ]           omega = w - s h' v
//! x    : d_x|Z T_xx + d_Z S - eps^2 rho (Dv + r0 |u| v)
//! z    : d_x|Z (eps^2 S) + d_Z T_zz - eps^4 rho (Dw + r0 |u| w)
//! T_xx = eps^2 (2 mu v_x + lambda div) - P
//! T_zz = eps^2 (2 mu w_Z + lambda div) - P
//! S    = mu (v_Z + eps^2 w_x),   |u| = sqrt(v^2 + eps^2 w^2)
//! ```

use super::state::{NsGrid, ThinState};
use crate::laws::LawSet;

/// Pointwise residuals on the staggered mesh.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// Cells, `grid.cell(i, j)`.
    pub mass: Vec<f64>,
    /// Faces, `grid.cell(i, j)`.
    pub momx: Vec<f64>,
    /// Nodes, `grid.node(i, k)`; wall entries are zero.
    pub momz: Vec<f64>,
}

/// Discrete L2 norms of the three equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub mass: f64,
    pub momx: f64,
    pub momz: f64,
}

impl ResidualNorms {
    pub fn combined(&self) -> f64 {
        (self.mass * self.mass + self.momx * self.momx + self.momz * self.momz).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.mass.max(self.momx).max(self.momz)
    }
}

impl Residuals {
    pub fn norms(&self, g: &NsGrid) -> ResidualNorms {
        let mut m = 0.0;
        let mut x = 0.0;
        let mut z = 0.0;
        for i in 0..g.nx {
            let a = g.area(i);
            let af = g.dx * g.ds * g.hf[i];
            for j in 0..g.ns {
                m += a * self.mass[g.cell(i, j)].powi(2);
                x += af * self.momx[g.cell(i, j)].powi(2);
            }
            for k in 1..g.ns {
                z += a * self.momz[g.node(i, k)].powi(2);
            }
        }
        ResidualNorms {
            mass: m.sqrt(),
            momx: x.sqrt(),
            momz: z.sqrt(),
        }
    }
}

/// `v` on face column `i`, row `j`, with quadratic ghosts at `j = -1`
/// (wall value `V`) and `j = ns` (wall value 0).
#[inline]
pub(crate) fn v_with_ghosts(s: &ThinState, i: usize, j: isize) -> f64 {
    let ns = s.grid.ns;
    let b = i * ns;
    let v = &s.v;
    if j < 0 {
        (8.0 * s.wall_speed - 6.0 * v[b] + v[b + 1]) / 3.0
    } else if j as usize >= ns {
        (-6.0 * v[b + ns - 1] + v[b + ns - 2]) / 3.0
    } else {
        v[b + j as usize]
    }
}

/// Centred `dv/dsigma` on every face point.
pub(crate) fn v_sigma_faces(s: &ThinState) -> Vec<f64> {
    let (nx, ns, ds) = (s.grid.nx, s.grid.ns, s.grid.ds);
    let mut out = vec![0.0; nx * ns];
    for i in 0..nx {
        for j in 0..ns {
            let jj = j as isize;
            out[i * ns + j] = (v_with_ghosts(s, i, jj + 1) - v_with_ghosts(s, i, jj - 1)) / (2.0 * ds);
        }
    }
    out
}

/// `d/dsigma` of a cell-centred column quantity, one-sided at the walls.
#[inline]
pub(crate) fn dsig_cell(t: &[f64], base: usize, j: usize, ns: usize, ds: f64) -> f64 {
    if j == 0 {
        (4.0 * (t[base + 1] - t[base]) - (t[base + 2] - t[base])) / (2.0 * ds)
    } else if j == ns - 1 {
        (4.0 * (t[base + j] - t[base + j - 1]) - (t[base + j] - t[base + j - 2])) / (2.0 * ds)
    } else {
        (t[base + j + 1] - t[base + j - 1]) / (2.0 * ds)
    }
}

/// Same on a node column `0..=ns`.
#[inline]
fn dsig_node(t: &[f64], base: usize, k: usize, ns: usize, ds: f64) -> f64 {
    if k == 0 {
        (4.0 * (t[base + 1] - t[base]) - (t[base + 2] - t[base])) / (2.0 * ds)
    } else if k == ns {
        (4.0 * (t[base + k] - t[base + k - 1]) - (t[base + k] - t[base + k - 2])) / (2.0 * ds)
    } else {
        (t[base + k + 1] - t[base + k - 1]) / (2.0 * ds)
    }
}

pub fn residual_fields(s: &ThinState, laws: &LawSet, hyper4: f64) -> Residuals {
    let g = &s.grid;
    let (nx, ns, dx, ds) = (g.nx, g.ns, g.dx, g.ds);
    let nn = ns + 1;
    let e2 = s.eps * s.eps;
    let e4 = e2 * e2;
    let vw = s.wall_speed;
    let r0 = laws.r0;
    let rho = &s.rho;
    let v = &s.v;
    let w = &s.w;

    let mu: Vec<f64> = rho.iter().map(|&r| laws.mu_unchecked(r)).collect();
    let lam: Vec<f64> = rho.iter().map(|&r| laws.lambda_unchecked(r)).collect();
    let p: Vec<f64> = rho.iter().map(|&r| laws.pressure_unchecked(r)).collect();

    let v_ext = |i: usize, j: isize| v_with_ghosts(s, i, j);
    let vs_f = v_sigma_faces(s);
    // d w / d sigma at nodes
    let mut ws_n = vec![0.0; nx * nn];
    for i in 0..nx {
        for k in 0..=ns {
            ws_n[i * nn + k] = dsig_node(w, i * nn, k, ns, ds);
        }
    }

    // cell stresses
    let mut txx = vec![0.0; nx * ns];
    let mut tzz = vec![0.0; nx * ns];
    for i in 0..nx {
        let l = g.left(i);
        let metric = g.hpc[i] / g.hc[i];
        for j in 0..ns {
            let c = i * ns + j;
            let sg = g.sigma_centre(j);
            let vx = (v[c] - v[l * ns + j]) / dx - sg * metric * 0.5 * (vs_f[l * ns + j] + vs_f[c]);
            let wz = (w[i * nn + j + 1] - w[i * nn + j]) / (ds * g.hc[i]);
            let div = vx + wz;
            txx[c] = e2 * (2.0 * mu[c] * vx + lam[c] * div) - p[c];
            tzz[c] = e2 * (2.0 * mu[c] * wz + lam[c] * div) - p[c];
        }
    }

    // shear stress S at (face i, node k)
    let mut sxz = vec![0.0; nx * nn];
    for i in 0..nx {
        let r = g.right(i);
        let hf = g.hf[i];
        let metric = g.hpf[i] / hf;
        let b = i * ns;
        let rb = r * ns;
        for k in 0..=ns {
            let vz = if k == 0 {
                (9.0 * v[b] - v[b + 1] - 8.0 * vw) / (3.0 * ds * hf)
            } else if k == ns {
                (-9.0 * v[b + ns - 1] + v[b + ns - 2]) / (3.0 * ds * hf)
            } else {
                (v[b + k] - v[b + k - 1]) / (ds * hf)
            };
            let wx = (w[r * nn + k] - w[i * nn + k]) / dx
                - g.sigma_node(k) * metric * 0.5 * (ws_n[i * nn + k] + ws_n[r * nn + k]);
            let mf = if k == 0 {
                0.5 * (mu[b] + mu[rb])
            } else if k == ns {
                0.5 * (mu[b + ns - 1] + mu[rb + ns - 1])
            } else {
                0.25 * (mu[b + k - 1] + mu[b + k] + mu[rb + k - 1] + mu[rb + k])
            };
            sxz[i * nn + k] = mf * (vz + e2 * wx);
        }
    }

    // node quantities: v and rho averaged to (x_i, sigma_k), vertical mass flux
    let mut vn = vec![0.0; nx * nn];
    let mut rn = vec![0.0; nx * nn];
    let mut gflux = vec![0.0; nx * nn];
    for i in 0..nx {
        let l = g.left(i);
        for k in 1..ns {
            let n = i * nn + k;
            vn[n] = 0.25 * (v[l * ns + k - 1] + v[i * ns + k - 1] + v[l * ns + k] + v[i * ns + k]);
            rn[n] = 0.5 * (rho[i * ns + k - 1] + rho[i * ns + k]);
            let om = w[n] - g.sigma_node(k) * g.hpc[i] * vn[n];
            gflux[n] = rn[n] * om;
        }
    }

    let mut mass = vec![0.0; nx * ns];
    let mut momx = vec![0.0; nx * ns];
    let mut momz = vec![0.0; nx * nn];

    let hfl = |i: usize, j: usize| -> f64 {
        let r = g.right(i);
        g.hf[i] * 0.5 * (rho[i * ns + j] + rho[r * ns + j]) * v[i * ns + j]
    };

    for i in 0..nx {
        let l = g.left(i);
        let r = g.right(i);
        for j in 0..ns {
            mass[i * ns + j] = -((hfl(i, j) - hfl(l, j)) / dx
                + (gflux[i * nn + j + 1] - gflux[i * nn + j]) / ds)
                / g.hc[i];
        }

        // x momentum at faces i + 1/2
        let hf = g.hf[i];
        let mf = g.hpf[i] / hf;
        for j in 0..ns {
            let c = i * ns + j;
            let sg = g.sigma_centre(j);
            let tx = (txx[r * ns + j] - txx[c]) / dx
                - sg * mf
                    * 0.5
                    * (dsig_cell(&txx, i * ns, j, ns, ds) + dsig_cell(&txx, r * ns, j, ns, ds));
            let shear = (sxz[i * nn + j + 1] - sxz[i * nn + j]) / (ds * hf);
            let rf = 0.5 * (rho[c] + rho[r * ns + j]);
            let vv = v[c];
            let wf = 0.25 * (w[i * nn + j] + w[i * nn + j + 1] + w[r * nn + j] + w[r * nn + j + 1]);
            let om = wf - sg * g.hpf[i] * vv;
            let dvx = if vv > 0.0 {
                (vv - v[l * ns + j]) / dx
            } else {
                (v[r * ns + j] - vv) / dx
            };
            let jj = j as isize;
            let dvs = if om > 0.0 {
                (vv - v_ext(i, jj - 1)) / ds
            } else {
                (v_ext(i, jj + 1) - vv) / ds
            };
            let conv = rf * (vv * dvx + om / hf * dvs);
            let drag = r0 * rf * (vv * vv + e2 * wf * wf).sqrt() * vv;
            let mut res = tx + shear - e2 * (conv + drag);
            if hyper4 != 0.0 {
                let (l2, r2) = (g.left(l), g.right(r));
                res -= hyper4
                    * (v[l2 * ns + j] - 4.0 * v[l * ns + j] + 6.0 * vv - 4.0 * v[r * ns + j]
                        + v[r2 * ns + j]);
            }
            momx[c] = res;
        }

        // z momentum at nodes (x_i, sigma_k)
        let hc = g.hc[i];
        let mc = g.hpc[i] / hc;
        let szx_s = |f: usize, k: usize| e2 * (sxz[f * nn + k + 1] - sxz[f * nn + k - 1]) / (2.0 * ds);
        for k in 1..ns {
            let n = i * nn + k;
            let sg = g.sigma_node(k);
            let tx = e2 * (sxz[n] - sxz[l * nn + k]) / dx - sg * mc * 0.5 * (szx_s(l, k) + szx_s(i, k));
            let tz = (tzz[i * ns + k] - tzz[i * ns + k - 1]) / (ds * hc);
            let ww = w[n];
            let vv = vn[n];
            let om = ww - sg * g.hpc[i] * vv;
            let dwx = if vv > 0.0 {
                (ww - w[l * nn + k]) / dx
            } else {
                (w[r * nn + k] - ww) / dx
            };
            let dws = if om > 0.0 {
                (ww - w[n - 1]) / ds
            } else {
                (w[n + 1] - ww) / ds
            };
            let conv = rn[n] * (vv * dwx + om / hc * dws);
            let drag = r0 * rn[n] * (vv * vv + e2 * ww * ww).sqrt() * ww;
            let mut res = tx + tz - e4 * (conv + drag);
            if hyper4 != 0.0 {
                let (l2, r2) = (g.left(l), g.right(r));
                res -= hyper4
                    * (w[l2 * nn + k] - 4.0 * w[l * nn + k] + 6.0 * ww - 4.0 * w[r * nn + k]
                        + w[r2 * nn + k]);
            }
            momz[n] = res;
        }
    }

    Residuals { mass, momx, momz }
}

/// Discrete L2 norms of the three stationary equations.
pub fn residual(state: &ThinState, laws: &LawSet) -> ResidualNorms {
    residual_fields(state, laws, 0.0).norms(&state.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HeightProfile, ThinGeometry};

    fn couette_setup(eps: f64) -> (ThinGeometry, LawSet) {
        let mut g = ThinGeometry::flat(1.3);
        g.eps = eps;
        let mut laws = LawSet::default();
        laws.r0 = 0.0;
        (g, laws)
    }

    #[test]
    fn couette_is_exact() {
        for eps in [1.0, 0.1, 0.01] {
            let (g, laws) = couette_setup(eps);
            let s = ThinState::couette(&g, 16, 8, 1.3).unwrap();
            let r = residual(&s, &laws);
            assert!(r.max() <= 1e-12, "{r:?}");
        }
    }

    #[test]
    fn drag_breaks_couette() {
        let (g, mut laws) = couette_setup(0.5);
        laws.r0 = 1.0;
        let s = ThinState::couette(&g, 16, 8, 1.3).unwrap();
        assert!(residual(&s, &laws).momx > 1e-3);
    }

    #[test]
    fn translation_by_one_cell() {
        let nx = 12;
        let mut geom = ThinGeometry::slider(0.3, 1.0);
        geom.eps = 0.3;
        let laws = LawSet::default();
        let mut s = ThinState::initial(&geom, nx, 6).unwrap();
        for (k, r) in s.rho.iter_mut().enumerate() {
            *r += 0.05 * (0.7 * k as f64).sin();
        }
        for (k, w) in s.w.iter_mut().enumerate() {
            if k % 7 != 0 && k % 7 != 6 {
                *w = 0.1 * (1.3 * k as f64).cos();
            }
        }
        let dx = geom.length / nx as f64;
        let mut moved = geom.clone();
        if let HeightProfile::Slider { delta, .. } = geom.profile {
            moved.profile = HeightProfile::Slider { delta, shift: dx };
        }
        let t = s.shifted(&moved).unwrap();
        let a = residual_fields(&s, &laws, 1e-3);
        let b = residual_fields(&t, &laws, 1e-3);
        let ns = 6;
        for i in 0..nx {
            let to = (i + 1) % nx;
            for j in 0..ns {
                let d1 = (a.mass[i * ns + j] - b.mass[to * ns + j]).abs();
                let d2 = (a.momx[i * ns + j] - b.momx[to * ns + j]).abs();
                assert!(d1 <= 1e-11 * (1.0 + a.mass[i * ns + j].abs()), "{d1}");
                assert!(d2 <= 1e-11 * (1.0 + a.momx[i * ns + j].abs()), "{d2}");
            }
            for k in 0..=ns {
                let d = (a.momz[i * 7 + k] - b.momz[to * 7 + k]).abs();
                assert!(d <= 1e-11 * (1.0 + a.momz[i * 7 + k].abs()), "{d}");
            }
        }
    }
}
