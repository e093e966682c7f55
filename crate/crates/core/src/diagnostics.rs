//! Energy and entropy functionals of a channel state, the effective velocity
//! and the scaling norms tracked across an aspect-ratio sweep.
//!
//! Everything lives on cell centres of the rescaled domain and is integrated
//! with the midpoint rule, cell area `dx ds h_i`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::{fit_rate, Fit};
use crate::laws::LawSet;
use crate::ns::residual::{dsig_cell, v_sigma_faces};
use crate::ns::ThinState;

/// Gradients `(d_x|Z f, d_Z f)` of a cell field: centred in x, second order
/// one-sided in sigma at the walls.
fn gradient(s: &ThinState, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = &s.grid;
    let (nx, ns) = (g.nx, g.ns);
    let mut fx = vec![0.0; nx * ns];
    let mut fz = vec![0.0; nx * ns];
    for i in 0..nx {
        let (l, r) = (g.left(i), g.right(i));
        let metric = g.hpc[i] / g.hc[i];
        for j in 0..ns {
            let c = i * ns + j;
            let fs = dsig_cell(f, i * ns, j, ns, g.ds);
            fx[c] = (f[r * ns + j] - f[l * ns + j]) / (2.0 * g.dx) - g.sigma_centre(j) * metric * fs;
            fz[c] = fs / g.hc[i];
        }
    }
    (fx, fz)
}

fn integrate(s: &ThinState, f: impl Fn(usize) -> f64) -> f64 {
    let g = &s.grid;
    (0..g.nx)
        .map(|i| g.area(i) * (0..g.ns).map(|j| f(i * g.ns + j)).sum::<f64>())
        .sum()
}

fn check_positive(s: &ThinState) -> Result<()> {
    match s.rho.iter().find(|&&r| !(r > 0.0)) {
        Some(&r) => Err(Error::Domain {
            function: "effective velocity",
            value: r,
        }),
        None => Ok(()),
    }
}

/// Cell-centred velocity and its four physical derivatives.
struct Kinematics {
    v: Vec<f64>,
    w: Vec<f64>,
    vx: Vec<f64>,
    vz: Vec<f64>,
    wx: Vec<f64>,
    wz: Vec<f64>,
}

fn kinematics(s: &ThinState) -> Kinematics {
    let g = &s.grid;
    let (nx, ns, nn) = (g.nx, g.ns, g.ns + 1);
    let vs = v_sigma_faces(s);
    let n = nx * ns;
    let (mut v, mut w, mut vx, mut vz, mut wx, mut wz) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let wc = |i: usize, j: usize| 0.5 * (s.w[i * nn + j] + s.w[i * nn + j + 1]);
    for i in 0..nx {
        let (l, r) = (g.left(i), g.right(i));
        let metric = g.hpc[i] / g.hc[i];
        for j in 0..ns {
            let c = i * ns + j;
            let sg = g.sigma_centre(j);
            let v_s = 0.5 * (vs[l * ns + j] + vs[c]);
            v[c] = 0.5 * (s.v[l * ns + j] + s.v[c]);
            vx[c] = (s.v[c] - s.v[l * ns + j]) / g.dx - sg * metric * v_s;
            vz[c] = v_s / g.hc[i];
            let w_s = (s.w[i * nn + j + 1] - s.w[i * nn + j]) / g.ds;
            w[c] = wc(i, j);
            wz[c] = w_s / g.hc[i];
            wx[c] = (wc(r, j) - wc(l, j)) / (2.0 * g.dx) - sg * metric * w_s;
        }
    }
    Kinematics { v, w, vx, vz, wx, wz }
}

/// Effective velocity in both of its closed forms.
#[derive(Debug, Clone)]
pub struct EffectiveVelocity {
    /// `2 d_x mu(rho) / rho`.
    pub v: Vec<f64>,
    /// `2 d_Z mu(rho) / (eps rho)`.
    pub w: Vec<f64>,
    /// `2 d_x phi(rho)` and `2 d_Z phi(rho) / eps`.
    pub v_phi: Vec<f64>,
    pub w_phi: Vec<f64>,
}

impl EffectiveVelocity {
    /// Largest pointwise difference between the two forms, relative to the
    /// largest magnitude.
    pub fn form_mismatch(&self) -> f64 {
        let scale = self
            .v
            .iter()
            .chain(&self.w)
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let d = self
            .v
            .iter()
            .zip(&self.v_phi)
            .chain(self.w.iter().zip(&self.w_phi))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        d / scale
    }
}

/// The gradient of `mu(rho)` (or `phi(rho)`) is taken as `mu'(rho)` times the
/// centred gradient of `rho`.
pub fn effective_velocity(state: &ThinState, laws: &LawSet) -> Result<EffectiveVelocity> {
    check_positive(state)?;
    let (rx, rz) = gradient(state, &state.rho);
    let n = state.rho.len();
    let mut out = EffectiveVelocity {
        v: vec![0.0; n],
        w: vec![0.0; n],
        v_phi: vec![0.0; n],
        w_phi: vec![0.0; n],
    };
    for c in 0..n {
        let r = state.rho[c];
        let mp = laws.mu_prime(r)?;
        let pp = laws.phi_prime(r)?;
        out.v[c] = 2.0 * mp * rx[c] / r;
        out.w[c] = 2.0 * mp * rz[c] / (state.eps * r);
        out.v_phi[c] = 2.0 * pp * rx[c];
        out.w_phi[c] = 2.0 * pp * rz[c] / state.eps;
    }
    Ok(out)
}

/// Discrete L2 norm of `eps d_x W - d_Z V`.
pub fn curl_identity_defect(state: &ThinState, laws: &LawSet) -> Result<f64> {
    let u = effective_velocity(state, laws)?;
    let (wx, _) = gradient(state, &u.w);
    let (_, vz) = gradient(state, &u.v);
    Ok(integrate(state, |c| (state.eps * wx[c] - vz[c]).powi(2)).sqrt())
}

/// The ten norms bounded uniformly in the aspect ratio, in order, with the
/// exponent `k` of the bound `norm <= C eps^k`.
pub const SCALING_NORMS: [(&str, f64); 10] = [
    ("sqrt_mu_dx_v", -1.0),
    ("sqrt_mu_dz_v", 0.0),
    ("sqrt_mu_dx_w", -2.0),
    ("sqrt_mu_dz_w", -1.0),
    ("dx_xi_pow_M", 0.0),
    ("dz_xi_pow_M", 1.0),
    ("dx_rho_pow_N", 0.0),
    ("dz_rho_pow_N", 1.0),
    ("sqrt_rho_v_pow_1.5", -1.0),
    ("sqrt_rho_w_pow_1.5", -2.5),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub eps: f64,
    pub energy_terms: Vec<(&'static str, f64)>,
    pub bd_terms: Vec<(&'static str, f64)>,
    pub scaling_norms: Vec<(&'static str, f64)>,
    pub curl_defect: f64,
}

impl DiagnosticsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.energy_terms
            .iter()
            .chain(&self.bd_terms)
            .chain(&self.scaling_norms)
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,value\n");
        let _ = writeln!(s, "eps,{:.17e}", self.eps);
        for (n, v) in self.energy_terms.iter().chain(&self.bd_terms).chain(&self.scaling_norms) {
            let _ = writeln!(s, "{n},{v:.17e}");
        }
        let _ = writeln!(s, "curl_defect,{:.17e}", self.curl_defect);
        s
    }
}

pub fn energy_report(state: &ThinState, laws: &LawSet) -> Result<DiagnosticsReport> {
    check_positive(state)?;
    let eps = state.eps;
    let (e2, e4) = (eps * eps, eps.powi(4));
    let k = kinematics(state);
    let rho = &state.rho;
    let mu: Vec<f64> = rho.iter().map(|&r| laws.mu_unchecked(r)).collect();
    let lam: Vec<f64> = rho.iter().map(|&r| laws.lambda_unchecked(r)).collect();

    let big_m = laws.exponent_m();
    let big_n = laws.exponent_n();
    let (rx, rz) = gradient(state, rho);
    // d(xi^M) = M xi^(M-1) xi' d(rho); zero where the cutoff is flat
    let chain_xi: Vec<f64> = rho
        .iter()
        .map(|&r| {
            let xp = laws.xi_prime(r);
            if xp == 0.0 {
                0.0
            } else {
                big_m * laws.xi(r).powf(big_m - 1.0) * xp
            }
        })
        .collect();
    let chain_rho: Vec<f64> = rho.iter().map(|&r| big_n * r.powf(big_n - 1.0)).collect();
    let xi_x: Vec<f64> = chain_xi.iter().zip(&rx).map(|(a, b)| a * b).collect();
    let xi_z: Vec<f64> = chain_xi.iter().zip(&rz).map(|(a, b)| a * b).collect();
    let rn_x: Vec<f64> = chain_rho.iter().zip(&rx).map(|(a, b)| a * b).collect();
    let rn_z: Vec<f64> = chain_rho.iter().zip(&rz).map(|(a, b)| a * b).collect();

    let int = |f: &dyn Fn(usize) -> f64| integrate(state, f);
    let drag = laws.r0 * int(&|c| rho[c] * (k.v[c].powi(2) + e2 * k.w[c].powi(2)).powf(1.5));

    let energy_terms = vec![
        ("2 mu |dx v|^2", 2.0 * int(&|c| mu[c] * k.vx[c].powi(2))),
        ("2 mu |dz w|^2", 2.0 * int(&|c| mu[c] * k.wz[c].powi(2))),
        ("mu |eps dx w + dz v/eps|^2", int(&|c| mu[c] * (eps * k.wx[c] + k.vz[c] / eps).powi(2))),
        ("lambda |div u|^2", int(&|c| lam[c] * (k.vx[c] + k.wz[c]).powi(2))),
        ("r0 rho |u|^3", drag),
    ];
    let bd_terms = vec![
        ("mu |eps dx w - dz v/eps|^2", int(&|c| mu[c] * (eps * k.wx[c] - k.vz[c] / eps).powi(2))),
        ("|dx xi^M|^2/eps^2", int(&|c| xi_x[c].powi(2)) / e2),
        ("|dz xi^M|^2/eps^4", int(&|c| xi_z[c].powi(2)) / e4),
        ("|dx rho^N|^2/eps^2", int(&|c| rn_x[c].powi(2)) / e2),
        ("|dz rho^N|^2/eps^4", int(&|c| rn_z[c].powi(2)) / e4),
        ("r0 rho |u|^3 (bd)", drag),
    ];
    let l2 = |f: &dyn Fn(usize) -> f64| int(f).sqrt();
    let values = [
        l2(&|c| mu[c] * k.vx[c].powi(2)),
        l2(&|c| mu[c] * k.vz[c].powi(2)),
        l2(&|c| mu[c] * k.wx[c].powi(2)),
        l2(&|c| mu[c] * k.wz[c].powi(2)),
        l2(&|c| xi_x[c].powi(2)),
        l2(&|c| xi_z[c].powi(2)),
        l2(&|c| rn_x[c].powi(2)),
        l2(&|c| rn_z[c].powi(2)),
        l2(&|c| rho[c] * k.v[c].abs().powi(3)),
        l2(&|c| rho[c] * k.w[c].abs().powi(3)),
    ];
    let scaling_norms = SCALING_NORMS.iter().zip(values).map(|(&(n, _), v)| (n, v)).collect();
    Ok(DiagnosticsReport {
        eps,
        energy_terms,
        bd_terms,
        scaling_norms,
        curl_defect: curl_identity_defect(state, laws)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub name: &'static str,
    /// Exponent of the bound; the fitted slope should not fall below it.
    pub bound_slope: f64,
    /// `(eps, value)` in sweep order.
    pub values: Vec<(f64, f64)>,
    pub fit: Fit,
}

impl ScalingRow {
    /// How far the fitted slope falls short of the bound (0 if it does not).
    pub fn shortfall(&self) -> f64 {
        (self.bound_slope - self.fit.slope).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn row(&self, name: &str) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("norm_name,eps,value,fitted_slope\n");
        for r in &self.rows {
            for &(e, v) in &r.values {
                let _ = writeln!(s, "{},{:.17e},{:.17e},{:.17e}", r.name, e, v, r.fit.slope);
            }
        }
        s
    }
}

pub fn scaling_table_from_reports(reports: &[DiagnosticsReport]) -> Result<ScalingTable> {
    let mut distinct: Vec<f64> = reports.iter().map(|r| r.eps).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 3 distinct eps values, got {}",
            distinct.len()
        )));
    }
    let rows = SCALING_NORMS
        .iter()
        .enumerate()
        .map(|(k, &(name, bound))| {
            let values: Vec<(f64, f64)> = reports.iter().map(|r| (r.eps, r.scaling_norms[k].1)).collect();
            Ok(ScalingRow {
                name,
                bound_slope: bound,
                fit: fit_rate(&values)?,
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingTable { rows })
}

pub fn scaling_table(states: &[(f64, ThinState)], laws: &LawSet) -> Result<ScalingTable> {
    let reports = states
        .iter()
        .map(|(eps, s)| {
            let mut r = energy_report(s, laws)?;
            r.eps = *eps;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    scaling_table_from_reports(&reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ThinGeometry;
    use std::f64::consts::PI;

    fn lift_state(eps: f64) -> (ThinState, LawSet) {
        let mut geom = ThinGeometry::flat(1.0);
        geom.eps = eps;
        (ThinState::couette(&geom, 16, 10, 1.0).unwrap(), LawSet::default())
    }

    fn manufactured(geom: &ThinGeometry, nx: usize, ns: usize) -> ThinState {
        let mut s = ThinState::initial(geom, nx, ns).unwrap();
        for i in 0..nx {
            for j in 0..ns {
                let x = s.grid.x_centre(i);
                let sg = s.grid.sigma_centre(j);
                s.rho[i * ns + j] = 1.0 + 0.1 * (2.0 * PI * x).sin() * (PI * sg).sin();
            }
        }
        s
    }

    #[test]
    fn lift_shear_integral() {
        let (s, laws) = lift_state(0.1);
        let r = energy_report(&s, &laws).unwrap();
        let mu = laws.mu(1.0).unwrap();
        let expect = mu * 1.0 / 0.01;
        let got = r.get("mu |eps dx w + dz v/eps|^2").unwrap();
        assert!((got - expect).abs() < 1e-10 * expect, "{got} {expect}");
        assert_eq!(r.get("2 mu |dx v|^2").unwrap(), 0.0);
        assert_eq!(r.curl_defect, 0.0);
    }

    #[test]
    fn zero_velocity_terms_vanish() {
        let (mut s, laws) = lift_state(0.3);
        s.wall_speed = 0.0;
        s.v.iter_mut().for_each(|v| *v = 0.0);
        let r = energy_report(&s, &laws).unwrap();
        for (n, v) in r.energy_terms.iter().chain(&r.bd_terms) {
            assert_eq!(*v, 0.0, "{n}");
        }
    }

    #[test]
    fn squared_terms_nonnegative_and_decomposition() {
        let mut geom = ThinGeometry::slider(0.3, 1.0);
        geom.eps = 0.2;
        let laws = LawSet::default();
        let mut s = manufactured(&geom, 12, 8);
        for (k, v) in s.v.iter_mut().enumerate() {
            *v = (0.77 * k as f64).sin();
        }
        for (k, w) in s.w.iter_mut().enumerate() {
            if k % 9 != 0 && k % 9 != 8 {
                *w = (1.31 * k as f64).cos();
            }
        }
        let r = energy_report(&s, &laws).unwrap();
        for (n, v) in r.energy_terms.iter().chain(&r.bd_terms) {
            if !n.starts_with("lambda") {
                assert!(*v >= 0.0, "{n}");
            }
        }
        // |a+b|^2 + |a-b|^2 = 2(|a|^2 + |b|^2) on the integrals
        let plus = r.get("mu |eps dx w + dz v/eps|^2").unwrap();
        let minus = r.get("mu |eps dx w - dz v/eps|^2").unwrap();
        let a = r.get("sqrt_mu_dx_w").unwrap().powi(2) * 0.04;
        let b = r.get("sqrt_mu_dz_v").unwrap().powi(2) / 0.04;
        assert!((plus + minus - 2.0 * (a + b)).abs() <= 1e-12 * (plus + minus));
    }

    #[test]
    fn effective_velocity_cases() {
        let mut geom = ThinGeometry::slider(0.3, 1.0);
        geom.eps = 0.1;
        let laws = LawSet::default();
        let mut s = ThinState::initial(&geom, 16, 8).unwrap();
        let u = effective_velocity(&s, &laws).unwrap();
        assert!(u.v.iter().chain(&u.w).all(|&x| x == 0.0));
        for i in 0..16 {
            for j in 0..8 {
                s.rho[i * 8 + j] = 1.0 + 0.2 * (2.0 * PI * s.grid.x_centre(i)).cos();
            }
        }
        let u = effective_velocity(&s, &laws).unwrap();
        assert!(u.w.iter().all(|&x| x == 0.0));
        assert!(u.v.iter().any(|&x| x != 0.0));
        assert_eq!(curl_identity_defect(&s, &laws).unwrap(), 0.0);
        let m = manufactured(&geom, 16, 8);
        assert!(effective_velocity(&m, &laws).unwrap().form_mismatch() <= 1e-10);
        s.rho[3] = 0.0;
        assert!(effective_velocity(&s, &laws).is_err());
    }

    #[test]
    fn curl_defect_second_order() {
        let mut geom = ThinGeometry::slider(0.3, 1.0);
        geom.eps = 0.1;
        let laws = LawSet::default();
        let d: Vec<f64> = [(32, 16), (64, 32), (128, 64)]
            .iter()
            .map(|&(nx, ns)| curl_identity_defect(&manufactured(&geom, nx, ns), &laws).unwrap())
            .collect();
        let r1 = d[0] / d[1];
        let r2 = d[1] / d[2];
        assert!(r2 > 3.4 && r2 < 4.6, "{d:?} {r1} {r2}");
    }

    #[test]
    fn identical_states_give_zero_slopes() {
        let (s, laws) = lift_state(0.1);
        let states: Vec<(f64, ThinState)> = [0.2, 0.1, 0.05].iter().map(|&e| (e, s.clone())).collect();
        let t = scaling_table(&states, &laws).unwrap();
        assert_eq!(t.rows.len(), 10);
        for r in t.rows.iter().filter(|r| r.values[0].1 != 0.0) {
            assert_eq!(r.fit.slope, 0.0, "{}", r.name);
        }
        assert!(scaling_table(&states[..2], &laws).is_err());
    }
}
