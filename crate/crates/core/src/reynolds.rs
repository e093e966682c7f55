//! Compressible Reynolds equation on a periodic interval.
//!
//! Finite volumes on a uniform cell-centred grid. Every face carries
//!
//! ```text
//! F = D (rho_R - rho_L)/dx - U,   D = h^3/12 * k(rho_face),  k(s) = s P'(s)/mu(s)
//!                                 U = rho_upwind * h V / 2
//! ```
//!
//! so that the mass flux through the face is `-F`. A stationary profile has
//! the same `F` on every face; the additive freedom left by periodicity is
//! fixed by the total mass `sum rho_i h_i dx`.

use crate::error::{Error, Result};
use crate::geometry::ThinGeometry;
use crate::laws::LawSet;
use crate::linalg::{solve_bordered_cyclic, solve_cyclic_tridiagonal};

#[derive(Debug, Clone, PartialEq)]
pub struct ReynoldsOptions {
    pub nx: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Floor used by [`check_maximum_principle`].
    pub rho_floor: f64,
}

impl Default for ReynoldsOptions {
    fn default() -> Self {
        Self {
            nx: 128,
            tol: 1e-12,
            max_iter: 60,
            rho_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReynoldsProfile {
    pub length: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    /// Height at the cell centres.
    pub h: Vec<f64>,
    /// Mass flux through each face `i + 1/2`.
    pub face_flux: Vec<f64>,
    /// Mean of `face_flux`.
    pub flux: f64,
    pub pressure: Vec<f64>,
}

impl ReynoldsProfile {
    pub fn nx(&self) -> usize {
        self.rho.len()
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx() as f64
    }

    pub fn mass(&self) -> f64 {
        let dx = self.dx();
        self.rho.iter().zip(&self.h).map(|(r, h)| r * h * dx).sum()
    }

    /// `max - min` of the face fluxes.
    pub fn flux_spread(&self) -> f64 {
        let (lo, hi) = self
            .face_flux
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
        hi - lo
    }

    /// `x,rho,P,flux` rows, header first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,rho,P,flux\n");
        for i in 0..self.nx() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.x[i], self.rho[i], self.pressure[i], self.face_flux[i]
            ));
        }
        out
    }
}

/// Face quantities of the discrete operator and their derivatives.
struct FaceOps<'a> {
    laws: &'a LawSet,
    dx: f64,
    speed: f64,
    hf: Vec<f64>,
}

struct FaceEval {
    flux: f64,
    d_left: f64,
    d_right: f64,
}

impl<'a> FaceOps<'a> {
    fn new(geom: &ThinGeometry, laws: &'a LawSet, nx: usize) -> Self {
        let dx = geom.length / nx as f64;
        let hf = (0..nx).map(|i| geom.h((i as f64 + 1.0) * dx)).collect();
        Self {
            laws,
            dx,
            speed: geom.wall_speed,
            hf,
        }
    }

    fn mobility(&self, s: f64) -> (f64, f64) {
        let l = self.laws;
        let p1 = l.pressure_prime_unchecked(s);
        let p2 = l.pressure_second_unchecked(s);
        let mu = l.mu_unchecked(s);
        let mu1 = l.mu_prime_unchecked(s);
        let k = s * p1 / mu;
        let dk = (p1 + s * p2) / mu - s * p1 * mu1 / (mu * mu);
        (k, dk)
    }

    /// `F` on face `i + 1/2` between `left` and `right` cells.
    fn eval(&self, i: usize, left: f64, right: f64) -> FaceEval {
        let h = self.hf[i];
        let c = h * h * h / 12.0;
        let mean = 0.5 * (left + right);
        let (k, dk) = self.mobility(mean);
        let grad = (right - left) / self.dx;
        let adv = 0.5 * h * self.speed;
        let (u, du_l, du_r) = if self.speed >= 0.0 {
            (left * adv, adv, 0.0)
        } else {
            (right * adv, 0.0, adv)
        };
        FaceEval {
            flux: c * k * grad - u,
            d_left: c * (0.5 * dk * grad - k / self.dx) - du_l,
            d_right: c * (0.5 * dk * grad + k / self.dx) - du_r,
        }
    }

    fn all(&self, rho: &[f64]) -> Vec<FaceEval> {
        let n = rho.len();
        (0..n).map(|i| self.eval(i, rho[i], rho[(i + 1) % n])).collect()
    }
}

impl ReynoldsProfile {
    /// Profile for a given density, with face fluxes of the discrete operator.
    pub fn from_density(geom: &ThinGeometry, laws: &LawSet, rho: Vec<f64>) -> Self {
        build_profile(geom, laws, rho)
    }
}

fn build_profile(geom: &ThinGeometry, laws: &LawSet, rho: Vec<f64>) -> ReynoldsProfile {
    let nx = rho.len();
    let ops = FaceOps::new(geom, laws, nx);
    let face_flux: Vec<f64> = ops.all(&rho).iter().map(|f| -f.flux).collect();
    let flux = face_flux.iter().sum::<f64>() / nx as f64;
    ReynoldsProfile {
        length: geom.length,
        x: geom.cell_centres(nx),
        h: geom.cell_centres(nx).iter().map(|&x| geom.h(x)).collect(),
        pressure: rho.iter().map(|&r| laws.pressure_unchecked(r)).collect(),
        rho,
        face_flux,
        flux,
    }
}

fn check_inputs(geom: &ThinGeometry, nx: usize) -> Result<()> {
    geom.validate()?;
    if nx < 16 {
        return Err(Error::InvalidInput(format!("Reynolds grid needs nx >= 16, got {nx}")));
    }
    Ok(())
}

/// Stationary residual: flux differences on rows `1..n`, mass defect on row 0.
fn stationary_residual(ops: &FaceOps, rho: &[f64], weights: &[f64], mass: f64) -> (Vec<f64>, Vec<FaceEval>) {
    let n = rho.len();
    let faces = ops.all(rho);
    let mut r = vec![0.0; n];
    r[0] = rho.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() - mass;
    for i in 1..n {
        r[i] = faces[i].flux - faces[i - 1].flux;
    }
    (r, faces)
}

fn residual_norm(r: &[f64], mass: f64) -> f64 {
    let flux = r[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    flux.max(r[0].abs() / mass)
}

/// Stationary compressible Reynolds profile with prescribed total mass.
pub fn solve_stationary(geom: &ThinGeometry, laws: &LawSet, opts: &ReynoldsOptions) -> Result<ReynoldsProfile> {
    check_inputs(geom, opts.nx)?;
    let nx = opts.nx;
    let dx = geom.length / nx as f64;
    let h: Vec<f64> = geom.cell_centres(nx).iter().map(|&x| geom.h(x)).collect();
    let guess = geom.mass / (h.iter().sum::<f64>() * dx);
    let rho0 = vec![guess; nx];
    match newton_stationary(geom, laws, opts, rho0) {
        Ok(rho) => Ok(build_profile(geom, laws, rho)),
        Err(first) => {
            // relax with the transient problem, then polish
            let init = vec![guess; nx];
            let traj = solve_transient(
                geom,
                laws,
                &init,
                &TransientOptions {
                    dt: 0.05,
                    t_end: 50.0,
                    nx,
                    tol: 1e-10,
                    record_every: 0,
                },
            )
            .map_err(|_| first)?;
            let rho = newton_stationary(geom, laws, opts, traj.last.rho)?;
            Ok(build_profile(geom, laws, rho))
        }
    }
}

fn newton_stationary(geom: &ThinGeometry, laws: &LawSet, opts: &ReynoldsOptions, mut rho: Vec<f64>) -> Result<Vec<f64>> {
    let nx = rho.len();
    let ops = FaceOps::new(geom, laws, nx);
    let dx = ops.dx;
    let weights: Vec<f64> = geom.cell_centres(nx).iter().map(|&x| geom.h(x) * dx).collect();
    let mass = geom.mass;
    let (mut r, mut faces) = stationary_residual(&ops, &rho, &weights, mass);
    let mut norm = residual_norm(&r, mass);
    for it in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(rho);
        }
        let mut lo = vec![0.0; nx];
        let mut di = vec![0.0; nx];
        let mut up = vec![0.0; nx];
        for i in 1..nx {
            lo[i] = -faces[i - 1].d_left;
            di[i] = faces[i].d_left - faces[i - 1].d_right;
            up[i] = faces[i].d_right;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_bordered_cyclic(&lo, &di, &up, &weights, &rhs)?;

        // positivity: keep rho above a tenth of the current minimum
        let rmin = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut lambda = 1.0f64;
        for (x, d) in rho.iter().zip(&step) {
            if x + lambda * d < 0.1 * rmin {
                lambda = lambda.min(0.9 * x / -d);
            }
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = rho.iter().zip(&step).map(|(x, d)| x + lambda * d).collect();
            let (rt, ft) = stationary_residual(&ops, &trial, &weights, mass);
            let nt = residual_norm(&rt, mass);
            if nt.is_finite() && (nt < norm || nt <= opts.tol) {
                rho = trial;
                r = rt;
                faces = ft;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if norm <= 1e3 * opts.tol {
                // at roundoff level; no further decrease possible
                return Ok(rho);
            }
            return Err(if lambda < 1e-10 {
                Error::LineSearch { residual: norm }
            } else {
                Error::SolverFailure {
                    reason: "Reynolds Newton stalled".into(),
                    iterations: it,
                    residual: norm,
                }
            });
        }
    }
    if norm <= opts.tol {
        Ok(rho)
    } else {
        Err(Error::SolverFailure {
            reason: "Reynolds Newton did not converge".into(),
            iterations: opts.max_iter,
            residual: norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientOptions {
    pub dt: f64,
    pub t_end: f64,
    pub nx: usize,
    /// Newton tolerance per step, in density units.
    pub tol: f64,
    /// Keep every k-th profile (0 keeps none besides the last).
    pub record_every: usize,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_end: 20.0,
            nx: 128,
            tol: 1e-10,
            record_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientStep {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TransientStep>,
    pub snapshots: Vec<(f64, ReynoldsProfile)>,
    pub last: ReynoldsProfile,
}

impl Trajectory {
    /// Largest relative mass change over a single step.
    pub fn max_step_mass_drift(&self, initial_mass: f64) -> f64 {
        let mut prev = initial_mass;
        let mut worst = 0.0f64;
        for s in &self.steps {
            worst = worst.max(((s.mass - prev) / prev).abs());
            prev = s.mass;
        }
        worst
    }
}

/// Implicit Euler for `d(rho h)/dt = dF/dx`, the conservative form whose
/// steady states are exactly the stationary profiles.
pub fn solve_transient(
    geom: &ThinGeometry,
    laws: &LawSet,
    rho_init: &[f64],
    opts: &TransientOptions,
) -> Result<Trajectory> {
    let nx = opts.nx;
    check_inputs(geom, nx)?;
    if rho_init.len() != nx {
        return Err(Error::InvalidInput(format!(
            "initial density has {} cells, grid has {nx}",
            rho_init.len()
        )));
    }
    if rho_init.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("initial density must be positive".into()));
    }
    if !(opts.dt > 0.0 && opts.t_end >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_end >= 0".into()));
    }
    let ops = FaceOps::new(geom, laws, nx);
    let dx = ops.dx;
    let h: Vec<f64> = geom.cell_centres(nx).iter().map(|&x| geom.h(x)).collect();
    let mut rho = rho_init.to_vec();
    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    let mut count = 0usize;
    while t < opts.t_end * (1.0 - 1e-12) {
        let step_dt = dt.min(opts.t_end - t);
        let mut attempt_dt = step_dt;
        let mut halvings = 0;
        let next = loop {
            match implicit_step(&ops, &h, &rho, attempt_dt, opts.tol) {
                Ok(next) => break next,
                Err(e) => {
                    halvings += 1;
                    if halvings > 10 {
                        return Err(e);
                    }
                    attempt_dt *= 0.5;
                }
            }
        };
        if halvings > 0 {
            dt = attempt_dt;
        }
        rho = next;
        t += attempt_dt;
        count += 1;
        let mass = rho.iter().zip(&h).map(|(r, hh)| r * hh * dx).sum();
        steps.push(TransientStep {
            t,
            dt: attempt_dt,
            mass,
        });
        if opts.record_every > 0 && count % opts.record_every == 0 {
            snapshots.push((t, build_profile(geom, laws, rho.clone())));
        }
    }
    Ok(Trajectory {
        steps,
        snapshots,
        last: build_profile(geom, laws, rho),
    })
}

fn implicit_step(ops: &FaceOps, h: &[f64], old: &[f64], dt: f64, tol: f64) -> Result<Vec<f64>> {
    let n = old.len();
    let dx = ops.dx;
    let residual = |rho: &[f64]| -> (Vec<f64>, Vec<FaceEval>) {
        let faces = ops.all(rho);
        let r = (0..n)
            .map(|i| {
                let prev = if i == 0 { n - 1 } else { i - 1 };
                h[i] * (rho[i] - old[i]) - dt * (faces[i].flux - faces[prev].flux) / dx
            })
            .collect();
        (r, faces)
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rho = old.to_vec();
    let (mut r, mut faces) = residual(&rho);
    for it in 0..30 {
        let nr = norm(&r);
        if nr <= tol && it > 0 {
            return Ok(rho);
        }
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        let c = dt / dx;
        for i in 0..n {
            let prev = if i == 0 { n - 1 } else { i - 1 };
            lo[i] = c * faces[prev].d_left;
            di[i] = h[i] - c * (faces[i].d_left - faces[prev].d_right);
            up[i] = -c * faces[i].d_right;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_cyclic_tridiagonal(&lo, &di, &up, &rhs)?;
        let trial: Vec<f64> = rho.iter().zip(&step).map(|(x, d)| x + d).collect();
        if trial.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::LineSearch { residual: nr });
        }
        rho = trial;
        let next = residual(&rho);
        r = next.0;
        faces = next.1;
        if it > 0 && norm(&r) <= tol {
            return Ok(rho);
        }
    }
    Err(Error::SolverFailure {
        reason: "implicit Reynolds step did not converge".into(),
        iterations: 30,
        residual: norm(&r),
    })
}

/// Minimum density and whether it clears `floor`.
pub fn check_maximum_principle(profile: &ReynoldsProfile, floor: f64) -> (f64, bool) {
    let rmin = profile.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    (rmin, rmin > floor)
}

/// Limit velocity field `v(x, Z)`, `w(x, Z)` rebuilt from a Reynolds profile.
///
/// `v` is the Couette-Poiseuille profile solving `-(mu v_Z)_Z + P_x = 0` with
/// `v(0) = V`, `v(h) = 0`; `w` is the mass-equation reconstruction
/// `w = -(1/rho) d/dx (rho int_0^Z v)` with `w(0) = 0`.
#[derive(Debug, Clone)]
pub struct LimitVelocity<'a> {
    profile: &'a ReynoldsProfile,
    geom: &'a ThinGeometry,
    laws: &'a LawSet,
}

impl<'a> LimitVelocity<'a> {
    pub fn new(profile: &'a ReynoldsProfile, geom: &'a ThinGeometry, laws: &'a LawSet) -> Self {
        Self { profile, geom, laws }
    }

    fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.profile.nx() as isize) as usize
    }

    /// `(h, P_x, mu)` on face `i + 1/2`.
    fn face_coeffs(&self, i: usize) -> (f64, f64, f64) {
        let p = self.profile;
        let j = self.wrap(i as isize + 1);
        let h = self.geom.h((i as f64 + 1.0) * p.dx());
        let px = (p.pressure[j] - p.pressure[i]) / p.dx();
        let mu = self.laws.mu_unchecked(0.5 * (p.rho[i] + p.rho[j]));
        (h, px, mu)
    }

    /// `(h, P_x, mu)` at cell centre `i`, `P_x` by centred differences.
    fn cell_coeffs(&self, i: usize) -> (f64, f64, f64) {
        let p = self.profile;
        let l = self.wrap(i as isize - 1);
        let r = self.wrap(i as isize + 1);
        let px = (p.pressure[r] - p.pressure[l]) / (2.0 * p.dx());
        (p.h[i], px, self.laws.mu_unchecked(p.rho[i]))
    }

    fn couette_poiseuille(&self, (h, px, mu): (f64, f64, f64), z: f64) -> f64 {
        self.geom.wall_speed * (1.0 - z / h) + px / (2.0 * mu) * z * (z - h)
    }

    fn partial_integral(&self, (h, px, mu): (f64, f64, f64), z: f64) -> f64 {
        self.geom.wall_speed * (z - z * z / (2.0 * h)) + px / (2.0 * mu) * (z * z * z / 3.0 - h * z * z / 2.0)
    }

    pub fn v_at_cell(&self, i: usize, z: f64) -> f64 {
        self.couette_poiseuille(self.cell_coeffs(i), z)
    }

    pub fn v_at_face(&self, i: usize, z: f64) -> f64 {
        self.couette_poiseuille(self.face_coeffs(i), z)
    }

    /// `int_0^h v dZ` at cell `i`.
    pub fn column_integral(&self, i: usize) -> f64 {
        let c = self.cell_coeffs(i);
        self.partial_integral(c, c.0)
    }

    /// `d^2 v / dZ^2` at cell `i` (constant in Z).
    pub fn v_zz_at_cell(&self, i: usize) -> f64 {
        let (_, px, mu) = self.cell_coeffs(i);
        px / mu
    }

    pub fn pressure_gradient_at_cell(&self, i: usize) -> f64 {
        self.cell_coeffs(i).1
    }

    pub fn w_at_cell(&self, i: usize, z: f64) -> f64 {
        let p = self.profile;
        let l = self.wrap(i as isize - 1);
        let r = self.wrap(i as isize + 1);
        let q = |face: usize, right: usize| {
            0.5 * (p.rho[face] + p.rho[right]) * self.partial_integral(self.face_coeffs(face), z)
        };
        let q_right = q(i, r);
        let q_left = q(l, i);
        -(q_right - q_left) / (p.dx() * p.rho[i])
    }
}

/// Sampled limit field at cell centres, `z_samples` uniform heights per column.
#[derive(Debug, Clone)]
pub struct SampledVelocity {
    pub x: Vec<f64>,
    /// `z[i][k] = k h_i / (z_samples - 1)`.
    pub z: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

pub fn reconstruct_velocity(
    profile: &ReynoldsProfile,
    geom: &ThinGeometry,
    laws: &LawSet,
    z_samples: usize,
) -> Result<SampledVelocity> {
    if z_samples < 2 {
        return Err(Error::InvalidInput("need at least two vertical samples".into()));
    }
    if profile.rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("profile density must be positive".into()));
    }
    let lim = LimitVelocity::new(profile, geom, laws);
    let mut z = Vec::new();
    let mut v = Vec::new();
    let mut w = Vec::new();
    for i in 0..profile.nx() {
        let h = profile.h[i];
        let zs: Vec<f64> = (0..z_samples).map(|k| k as f64 * h / (z_samples - 1) as f64).collect();
        v.push(zs.iter().map(|&zz| lim.v_at_cell(i, zz)).collect());
        w.push(zs.iter().map(|&zz| lim.w_at_cell(i, zz)).collect());
        z.push(zs);
    }
    Ok(SampledVelocity {
        x: profile.x.clone(),
        z,
        v,
        w,
    })
}
