//! Pseudo-transient continuation towards the stationary channel flow.
//!
//! Each step solves `(D / dt - J) du = R(u)` where `J` is a finite-difference
//! Jacobian of the residual built with a coloring of the compact stencil and
//! `D = diag(1, rho, eps^2 rho)` for the density, horizontal and vertical
//! unknowns. The pseudo step grows by switched evolution relaxation, so the
//! march turns into Newton's method near the steady state.

use super::residual::{residual_fields, ResidualNorms, Residuals};
use super::state::ThinState;
use crate::error::{Error, Result};
use crate::geometry::ThinGeometry;
use crate::laws::LawSet;
use crate::linalg::BandedMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub dt0: f64,
    pub cfl: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub hyper4: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            dt0: 0.1,
            cfl: 10.0,
            tol: 1e-10,
            max_steps: 200,
            hyper4: 0.0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0) || !(self.tol > 0.0) || !(self.cfl > 0.0) {
            return Err(Error::InvalidInput(format!(
                "dt0, cfl and tol must be positive (dt0={}, cfl={}, tol={})",
                self.dt0, self.cfl, self.tol
            )));
        }
        if !(self.hyper4 >= 0.0) {
            return Err(Error::InvalidInput(format!("hyper4 must be >= 0, got {}", self.hyper4)));
        }
        Ok(())
    }
}

/// One accepted pseudo-time step.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub dt: f64,
    pub r_mass: f64,
    pub r_momx: f64,
    pub r_momz: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("step,dt,r_mass,r_momx,r_momz\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            r.step, r.dt, r.r_mass, r.r_momx, r.r_momz
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct Steady {
    pub state: ThinState,
    pub history: Vec<HistoryRow>,
    pub residual: ResidualNorms,
    /// Largest relative change of the discrete mass over one step.
    pub max_mass_drift: f64,
}

/// Unknown numbering: columns are interleaved `0, nx-1, 1, nx-2, ...` so that
/// periodic neighbours stay close; inside a column row `j` holds
/// `rho_j, v_j, w_{j+1}` (the last row has no interior `w`).
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    nx: usize,
    ns: usize,
    block: usize,
    pos: Vec<usize>,
    rx: usize,
}

const RSIG: usize = 3;

impl Layout {
    pub(crate) fn new(nx: usize, ns: usize, hyper4: f64) -> Self {
        let mut pos = vec![0; nx];
        let (mut lo, mut hi, mut p) = (0usize, nx - 1, 0usize);
        while lo <= hi {
            pos[lo] = p;
            p += 1;
            if hi != lo {
                pos[hi] = p;
                p += 1;
            }
            lo += 1;
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
        Self {
            nx,
            ns,
            block: 3 * ns - 1,
            pos,
            rx: if hyper4 != 0.0 { 2 } else { 1 },
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.nx * self.block
    }

    #[inline]
    pub(crate) fn index(&self, i: usize, j: usize, f: usize) -> usize {
        self.pos[i] * self.block + 3 * j + f
    }

    #[inline]
    fn exists(&self, j: usize, f: usize) -> bool {
        f < 2 || j + 1 < self.ns
    }

    fn bandwidth(&self) -> usize {
        2 * self.rx * self.block + 3 * RSIG + 2
    }

    fn pack(&self, s: &ThinState) -> Vec<f64> {
        let mut u = vec![0.0; self.len()];
        for i in 0..self.nx {
            for j in 0..self.ns {
                u[self.index(i, j, 0)] = s.rho[i * self.ns + j];
                u[self.index(i, j, 1)] = s.v[i * self.ns + j];
                if self.exists(j, 2) {
                    u[self.index(i, j, 2)] = s.w[i * (self.ns + 1) + j + 1];
                }
            }
        }
        u
    }

    fn unpack(&self, u: &[f64], s: &mut ThinState) {
        for i in 0..self.nx {
            for j in 0..self.ns {
                s.rho[i * self.ns + j] = u[self.index(i, j, 0)];
                s.v[i * self.ns + j] = u[self.index(i, j, 1)];
                if self.exists(j, 2) {
                    s.w[i * (self.ns + 1) + j + 1] = u[self.index(i, j, 2)];
                }
            }
        }
    }

    fn flatten(&self, r: &Residuals) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.nx {
            for j in 0..self.ns {
                out[self.index(i, j, 0)] = r.mass[i * self.ns + j];
                out[self.index(i, j, 1)] = r.momx[i * self.ns + j];
                if self.exists(j, 2) {
                    out[self.index(i, j, 2)] = r.momz[i * (self.ns + 1) + j + 1];
                }
            }
        }
        out
    }

    /// Column colors in x: smallest divisor of `nx` not below `2 rx + 1`.
    fn x_colors(&self) -> usize {
        let need = 2 * self.rx + 1;
        (need..=self.nx).find(|c| self.nx % c == 0).unwrap_or(self.nx)
    }
}

/// Sparse Jacobian entries `(row, col, value)`.
pub(crate) type Triplets = Vec<(usize, usize, f64)>;

fn eval(layout: &Layout, s: &ThinState, laws: &LawSet, hyper4: f64) -> Vec<f64> {
    layout.flatten(&residual_fields(s, laws, hyper4))
}

/// Forward-difference Jacobian using a coloring that perturbs all unknowns
/// whose stencils cannot overlap at once.
pub(crate) fn colored_jacobian(
    layout: &Layout,
    state: &ThinState,
    laws: &LawSet,
    hyper4: f64,
    f0: &[f64],
) -> Triplets {
    let (nx, ns) = (layout.nx, layout.ns);
    let cx = layout.x_colors();
    let cs = 2 * RSIG + 1;
    let base = layout.pack(state);
    let mut out = Triplets::new();
    let mut work = state.clone();
    let rx = layout.rx as isize;
    for ci in 0..cx {
        for cj in 0..cs {
            for f in 0..3 {
                let cols: Vec<(usize, usize)> = (0..nx)
                    .filter(|i| i % cx == ci)
                    .flat_map(|i| (0..ns).filter(move |j| j % cs == cj).map(move |j| (i, j)))
                    .filter(|&(_, j)| layout.exists(j, f))
                    .collect();
                if cols.is_empty() {
                    continue;
                }
                let mut u = base.clone();
                let mut steps = Vec::with_capacity(cols.len());
                for &(i, j) in &cols {
                    let k = layout.index(i, j, f);
                    let h = 1.5e-8 * base[k].abs().max(1.0);
                    let t = base[k] + h;
                    steps.push(t - base[k]);
                    u[k] = t;
                }
                layout.unpack(&u, &mut work);
                let f1 = eval(layout, &work, laws, hyper4);
                for (&(i, j), &h) in cols.iter().zip(&steps) {
                    let col = layout.index(i, j, f);
                    let mut seen = Vec::with_capacity(5);
                    for di in -rx..=rx {
                        let ii = (i as isize + di).rem_euclid(nx as isize) as usize;
                        if seen.contains(&ii) {
                            continue;
                        }
                        seen.push(ii);
                        let jlo = j.saturating_sub(RSIG);
                        let jhi = (j + RSIG).min(ns - 1);
                        for jj in jlo..=jhi {
                            for ff in 0..3 {
                                if !layout.exists(jj, ff) {
                                    continue;
                                }
                                let row = layout.index(ii, jj, ff);
                                let d = (f1[row] - f0[row]) / h;
                                if d != 0.0 {
                                    out.push((row, col, d));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    layout.unpack(&base, &mut work);
    out
}

fn mass_weights(layout: &Layout, s: &ThinState) -> Vec<f64> {
    let mut d = vec![0.0; layout.len()];
    let ns = layout.ns;
    let e2 = s.eps * s.eps;
    for i in 0..layout.nx {
        let r = s.grid.right(i);
        for j in 0..ns {
            d[layout.index(i, j, 0)] = 1.0;
            d[layout.index(i, j, 1)] = 0.5 * (s.rho[i * ns + j] + s.rho[r * ns + j]);
            if layout.exists(j, 2) {
                d[layout.index(i, j, 2)] = e2 * 0.5 * (s.rho[i * ns + j] + s.rho[i * ns + j + 1]);
            }
        }
    }
    d
}

fn max_speed(s: &ThinState) -> f64 {
    s.v.iter().fold(s.wall_speed.abs(), |m, v| m.max(v.abs()))
}

/// March `init` (or the lift state at mean density) to a steady solution.
pub fn march_to_steady(
    geom: &ThinGeometry,
    laws: &LawSet,
    config: &SolveConfig,
    init: Option<ThinState>,
    grid: (usize, usize),
) -> Result<Steady> {
    config.validate()?;
    geom.validate()?;
    if !(geom.eps > 0.0 && geom.eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0,1], got {}", geom.eps)));
    }
    let mut state = match init {
        Some(s) => s,
        None => ThinState::initial(geom, grid.0, grid.1)?,
    };
    state.eps = geom.eps;
    state.wall_speed = geom.wall_speed;
    state.rho_bottom = geom.rho_bottom;
    state.rho_top = geom.rho_top;
    if state.rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("initial density must be positive".into()));
    }

    let layout = Layout::new(state.grid.nx, state.grid.ns, config.hyper4);
    let bw = layout.bandwidth();
    let n = layout.len();
    let area: Vec<f64> = (0..state.grid.nx).map(|i| state.grid.area(i)).collect();

    let mut res = residual_fields(&state, laws, config.hyper4);
    let mut norms = res.norms(&state.grid);
    let r0 = norms.combined();
    let mut history = Vec::new();
    let done = |r: f64| r <= config.tol * r0 || r <= config.tol;
    if done(r0) {
        return Ok(Steady {
            state,
            history,
            residual: norms,
            max_mass_drift: 0.0,
        });
    }

    let mut dt = config.dt0.min(config.cfl * state.grid.dx / max_speed(&state).max(1e-300));
    let mut u = layout.pack(&state);
    let mut f0 = layout.flatten(&res);
    let mut trial = state.clone();
    let mut drift: f64 = 0.0;
    for step in 1..=config.max_steps {
        let jac = colored_jacobian(&layout, &state, laws, config.hyper4, &f0);
        let dw = mass_weights(&layout, &state);
        let norm = norms.combined();
        let mut accepted = false;
        for _attempt in 0..12 {
            let mut a = BandedMatrix::zeros(n, bw, bw);
            for &(r, c, v) in &jac {
                a.add(r, c, -v);
            }
            for (k, d) in dw.iter().enumerate() {
                a.add(k, k, d / dt);
            }
            let lu = match a.factor() {
                Ok(lu) => lu,
                Err(_) => {
                    dt *= 0.25;
                    continue;
                }
            };
            let mut du = lu.solve(&f0);
            // the difference Jacobian conserves mass only to roundoff / h
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..layout.nx {
                for j in 0..layout.ns {
                    num += area[i] * du[layout.index(i, j, 0)];
                    den += area[i];
                }
            }
            let shift = num / den;
            for i in 0..layout.nx {
                for j in 0..layout.ns {
                    du[layout.index(i, j, 0)] -= shift;
                }
            }
            let cand: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
            layout.unpack(&cand, &mut trial);
            if trial.rho.iter().any(|&r| !(r > 0.0)) {
                dt *= 0.25;
                continue;
            }
            let tres = residual_fields(&trial, laws, config.hyper4);
            let tn = tres.norms(&trial.grid);
            let tc = tn.combined();
            if !tc.is_finite() || tc > 10.0 * norm {
                dt *= 0.25;
                continue;
            }
            let m_old = state.mass();
            let m_new = trial.mass();
            drift = drift.max((m_new - m_old).abs() / m_old.abs());
            std::mem::swap(&mut state, &mut trial);
            u = cand;
            res = tres;
            f0 = layout.flatten(&res);
            norms = tn;
            history.push(HistoryRow {
                step,
                dt,
                r_mass: tn.mass,
                r_momx: tn.momx,
                r_momz: tn.momz,
            });
            dt = (dt * (norm / tc).clamp(0.5, 10.0)).min(1e12);
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::NegativeDensity { step, history });
        }
        if done(norms.combined()) {
            return Ok(Steady {
                state,
                history,
                residual: norms,
                max_mass_drift: drift,
            });
        }
    }
    Err(Error::NonConvergence {
        steps: config.max_steps,
        residual: norms.combined(),
        history,
    })
}
