//! Aspect-ratio sweep: thin-channel solutions against the Reynolds limit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::diagnostics::{energy_report, scaling_table_from_reports, DiagnosticsReport, ScalingTable};
use crate::error::{Error, Result};
use crate::geometry::ThinGeometry;
use crate::io::write_atomic;
use crate::laws::LawSet;
use crate::ns::{march_to_steady, NsGrid, SolveConfig, ThinState};
use crate::reynolds::{solve_stationary, LimitVelocity, ReynoldsOptions, ReynoldsProfile};

/// Least-squares slope of `log err` against `log eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Points dropped because their error was not positive.
    pub excluded: usize,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<Fit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidInput(format!("rate fit needs at least 3 points, got {}", pairs.len())));
    }
    if pairs.iter().any(|&(e, _)| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("rate fit needs positive eps".into()));
    }
    if pairs.iter().all(|&(_, v)| v == 0.0) {
        return Ok(Fit {
            slope: f64::INFINITY,
            residual: 0.0,
            excluded: 0,
        });
    }
    let used: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(_, v)| v > 0.0 && v.is_finite())
        .map(|&(e, v)| (e.ln(), v.ln()))
        .collect();
    let excluded = pairs.len() - used.len();
    if used.len() < 2 {
        return Err(Error::InvalidInput("rate fit left with fewer than 2 positive errors".into()));
    }
    if excluded > 0 {
        eprintln!("warning: rate fit dropped {excluded} non-positive error(s)");
    }
    // shift by the first point so constant data gives an exact zero slope
    let (x0, y0) = used[0];
    let n = used.len() as f64;
    let xm = used.iter().map(|p| p.0 - x0).sum::<f64>() / n;
    let ym = used.iter().map(|p| p.1 - y0).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &used {
        let dx = x - x0 - xm;
        sxy += dx * (y - y0 - ym);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct eps values".into()));
    }
    let slope = sxy / sxx;
    let ss: f64 = used
        .iter()
        .map(|&(x, y)| (y - y0 - ym - slope * (x - x0 - xm)).powi(2))
        .sum();
    Ok(Fit {
        slope,
        residual: (ss / n).sqrt(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    L32,
}

impl Norm {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "L2" => Some(Norm::L2),
            "L3/2" | "L32" => Some(Norm::L32),
            _ => None,
        }
    }

    fn exponent(self) -> f64 {
        match self {
            Norm::L2 => 2.0,
            Norm::L32 => 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    pub nx: usize,
    pub ns: usize,
    pub norms: Vec<Norm>,
    /// Cell rows dropped next to each wall when measuring errors.
    pub boundary_exclusion: usize,
    pub solve: SolveConfig,
    /// Worker threads; `None` means one per core.
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            nx: 128,
            ns: 32,
            norms: vec![Norm::L2, Norm::L32],
            boundary_exclusion: 2,
            solve: SolveConfig::default(),
            threads: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidInput("eps_list is empty".into()));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidInput("eps_list must be strictly decreasing".into()));
            }
        }
        if let Some(e) = self.eps_list.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidInput(format!("eps {e} outside (0,1]")));
        }
        if self.norms.is_empty() {
            return Err(Error::InvalidInput("no error norm selected".into()));
        }
        if 2 * self.boundary_exclusion >= self.ns {
            return Err(Error::InvalidInput(format!(
                "boundary_exclusion {} leaves no interior rows out of {}",
                self.boundary_exclusion, self.ns
            )));
        }
        self.solve.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub err_rho_l2: f64,
    pub err_rho_l32: f64,
    pub err_v_l2: f64,
    pub err_v_l32: f64,
    pub err_w_l2: f64,
    pub flux_ns_mean: f64,
    pub flux_ns_maxdev: f64,
    pub flux_reynolds: f64,
    pub steps: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Sorted by eps, largest first. Failed runs are absent.
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(f64, String)>,
    pub slopes: Vec<(&'static str, Fit)>,
    pub diagnostics: Vec<DiagnosticsReport>,
    pub scaling: Option<ScalingTable>,
    pub states: Vec<(f64, ThinState)>,
    pub reference: ReynoldsProfile,
    pub config: SweepConfig,
    pub geometry: ThinGeometry,
    pub laws: LawSet,
    pub wall_times: Vec<(f64, Duration)>,
}

impl ConvergenceReport {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn slope(&self, name: &str) -> Option<Fit> {
        self.slopes.iter().find(|(n, _)| *n == name).map(|&(_, f)| f)
    }

    /// `|flux_ns_mean - flux_reynolds|` shrinks strictly along the sweep.
    pub fn flux_approaches_reynolds(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| (w[1].flux_ns_mean - w[1].flux_reynolds).abs() < (w[0].flux_ns_mean - w[0].flux_reynolds).abs())
    }

    pub fn convergence_csv(&self) -> String {
        let has = |n: Norm| self.config.norms.contains(&n);
        let cell = |on: bool, v: f64| if on { format!("{v:.17e}") } else { String::new() };
        let mut s = String::from(
            "eps,err_rho_L2,err_rho_L32,err_v_L2,err_v_L32,err_w_L2,flux_ns_mean,flux_ns_maxdev,flux_reynolds\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.17e},{},{},{},{},{},{:.17e},{:.17e},{:.17e}",
                r.eps,
                cell(has(Norm::L2), r.err_rho_l2),
                cell(has(Norm::L32), r.err_rho_l32),
                cell(has(Norm::L2), r.err_v_l2),
                cell(has(Norm::L32), r.err_v_l32),
                cell(has(Norm::L2), r.err_w_l2),
                r.flux_ns_mean,
                r.flux_ns_maxdev,
                r.flux_reynolds
            );
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("quantity,slope,fit_residual,excluded\n");
        for (n, f) in &self.slopes {
            let _ = writeln!(s, "{n},{:.17e},{:.17e},{}", f.slope, f.residual, f.excluded);
        }
        s
    }
}

/// Reynolds density on the `nx` grid, Richardson-extrapolated from two
/// refined solves so that its own discretisation error is negligible.
pub fn reynolds_reference(geom: &ThinGeometry, laws: &LawSet, nx: usize) -> Result<ReynoldsProfile> {
    let solve = |k: usize| solve_stationary(geom, laws, &ReynoldsOptions { nx: nx * k, ..Default::default() });
    let a = solve(8)?;
    let b = solve(16)?;
    // value at a coarse centre: mean of the two fine cells that straddle it
    let at = |p: &ReynoldsProfile, k: usize, i: usize| 0.5 * (p.rho[i * k + k / 2 - 1] + p.rho[i * k + k / 2]);
    let rho: Vec<f64> = (0..nx).map(|i| 2.0 * at(&b, 16, i) - at(&a, 8, i)).collect();
    let mut prof = ReynoldsProfile::from_density(geom, laws, rho);
    let flux = 2.0 * b.flux - a.flux;
    prof.face_flux = vec![flux; nx];
    prof.flux = flux;
    Ok(prof)
}

fn lp(sum: f64, p: f64) -> f64 {
    sum.powf(1.0 / p)
}

fn compare(
    state: &ThinState,
    reference: &ReynoldsProfile,
    geom: &ThinGeometry,
    laws: &LawSet,
    excl: usize,
) -> ConvergenceRow {
    let g = &state.grid;
    let limit = LimitVelocity::new(reference, geom, laws);
    let (p2, p32) = (Norm::L2.exponent(), Norm::L32.exponent());
    let mut acc = [0.0f64; 5];
    for i in 0..g.nx {
        let a = g.area(i);
        for j in excl..g.ns - excl {
            let c = g.cell(i, j);
            let er = (state.rho[c] - reference.rho[i]).abs();
            let ev = (state.v[c] - limit.v_at_face(i, g.sigma_centre(j) * g.hf[i])).abs();
            let wc = 0.5 * (state.w[g.node(i, j)] + state.w[g.node(i, j + 1)]);
            let ew = (wc - limit.w_at_cell(i, g.sigma_centre(j) * g.hc[i])).abs();
            acc[0] += a * er.powf(p2);
            acc[1] += a * er.powf(p32);
            acc[2] += a * ev.powf(p2);
            acc[3] += a * ev.powf(p32);
            acc[4] += a * ew.powf(p2);
        }
    }
    let flux = state.column_fluxes();
    let mean = flux.iter().sum::<f64>() / flux.len() as f64;
    let maxdev = flux.iter().fold(0.0f64, |m, f| m.max((f - mean).abs()));
    ConvergenceRow {
        eps: state.eps,
        err_rho_l2: lp(acc[0], p2),
        err_rho_l32: lp(acc[1], p32),
        err_v_l2: lp(acc[2], p2),
        err_v_l32: lp(acc[3], p32),
        err_w_l2: lp(acc[4], p2),
        flux_ns_mean: mean,
        flux_ns_maxdev: maxdev,
        flux_reynolds: reference.flux,
        steps: 0,
        residual: 0.0,
    }
}

/// Reynolds density extended constant in Z plus the lift velocity, scaled to
/// the prescribed mass.
pub fn initial_guess(geom: &ThinGeometry, reference: &ReynoldsProfile, nx: usize, ns: usize) -> Result<ThinState> {
    let grid = NsGrid::new(geom, nx, ns)?;
    let mut s = ThinState::from_columns(geom, grid, &reference.rho)?;
    let scale = geom.mass / s.mass();
    s.rho.iter_mut().for_each(|r| *r *= scale);
    Ok(s)
}

struct Outcome {
    eps: f64,
    result: Result<(ThinState, usize, f64)>,
    time: Duration,
}

pub fn run_sweep(geom: &ThinGeometry, laws: &LawSet, sweep: &SweepConfig) -> Result<ConvergenceReport> {
    sweep.validate()?;
    geom.validate()?;
    let reference = reynolds_reference(geom, laws, sweep.nx)?;
    let n = sweep.eps_list.len();
    let threads = sweep
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
        .clamp(1, n);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Outcome>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let eps = sweep.eps_list[k];
                let t = Instant::now();
                let mut g = geom.clone();
                g.eps = eps;
                let result = initial_guess(&g, &reference, sweep.nx, sweep.ns).and_then(|init| {
                    march_to_steady(&g, laws, &sweep.solve, Some(init), (sweep.nx, sweep.ns))
                        .map(|s| (s.state, s.history.len(), s.residual.combined()))
                });
                *slots[k].lock().unwrap() = Some(Outcome {
                    eps,
                    result,
                    time: t.elapsed(),
                });
            });
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut states = Vec::new();
    let mut diagnostics = Vec::new();
    let mut wall_times = Vec::new();
    for slot in slots {
        let o = slot.into_inner().unwrap().expect("every eps is processed");
        wall_times.push((o.eps, o.time));
        match o.result {
            Ok((state, steps, residual)) => {
                let mut g = geom.clone();
                g.eps = o.eps;
                let mut row = compare(&state, &reference, &g, laws, sweep.boundary_exclusion);
                row.steps = steps;
                row.residual = residual;
                rows.push(row);
                diagnostics.push(energy_report(&state, laws)?);
                states.push((o.eps, state));
            }
            Err(e) => failures.push((o.eps, e.to_string())),
        }
    }

    let mut slopes = Vec::new();
    if rows.len() >= 3 {
        let series: [(&'static str, fn(&ConvergenceRow) -> f64); 5] = [
            ("err_rho_L2", |r| r.err_rho_l2),
            ("err_rho_L32", |r| r.err_rho_l32),
            ("err_v_L2", |r| r.err_v_l2),
            ("err_v_L32", |r| r.err_v_l32),
            ("err_w_L2", |r| r.err_w_l2),
        ];
        for (name, f) in series {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, f(r))).collect();
            slopes.push((name, fit_rate(&pts)?));
        }
    }
    let scaling = if diagnostics.len() >= 3 {
        Some(scaling_table_from_reports(&diagnostics)?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        rows,
        failures,
        slopes,
        diagnostics,
        scaling,
        states,
        reference,
        config: sweep.clone(),
        geometry: geom.clone(),
        laws: laws.clone(),
        wall_times,
    })
}

/// Writes `convergence.csv`, `slopes.csv`, `scaling.csv` and `manifest.txt`.
/// `config_echo` is copied into the manifest verbatim.
pub fn emit_report(report: &ConvergenceReport, dir: &Path, config_echo: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("convergence.csv"), &report.convergence_csv())?;
    write_atomic(&dir.join("slopes.csv"), &report.slopes_csv())?;
    let scaling = report
        .scaling
        .as_ref()
        .map(|t| t.to_csv())
        .unwrap_or_else(|| "norm_name,eps,value,fitted_slope\n".to_string());
    write_atomic(&dir.join("scaling.csv"), &scaling)?;

    let mut m = String::new();
    let _ = writeln!(m, "reynolds-limit {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "status {}", if report.complete() { "complete" } else { "incomplete" });
    let _ = writeln!(m, "\n[config]");
    m.push_str(config_echo);
    if !config_echo.ends_with('\n') {
        m.push('\n');
    }
    let _ = writeln!(m, "\n[resolved]");
    let c = &report.config;
    let eps: Vec<String> = c.eps_list.iter().map(|e| e.to_string()).collect();
    let _ = writeln!(m, "eps_list = {}", eps.join(","));
    let _ = writeln!(m, "nx = {}\nns = {}", c.nx, c.ns);
    let _ = writeln!(m, "boundary_exclusion = {}", c.boundary_exclusion);
    let _ = writeln!(
        m,
        "dt0 = {}\ncfl = {}\ntol = {}\nmax_steps = {}\nhyper4 = {}",
        c.solve.dt0, c.solve.cfl, c.solve.tol, c.solve.max_steps, c.solve.hyper4
    );
    let _ = writeln!(m, "reynolds reference: Richardson from nx*8 and nx*16, flux {:.12e}", report.reference.flux);
    let _ = writeln!(m, "rate threshold 0.8 is an acceptance choice; no rate is proven for this limit");
    let _ = writeln!(m, "\n[runs]");
    for (r, (e, t)) in report.rows.iter().zip(&report.wall_times) {
        let _ = writeln!(
            m,
            "eps {e}: {} steps, residual {:.3e}, {:.3} s",
            r.steps,
            r.residual,
            t.as_secs_f64()
        );
    }
    for (e, msg) in &report.failures {
        let _ = writeln!(m, "eps {e}: FAILED {msg}");
    }
    write_atomic(&dir.join("manifest.txt"), &m)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_rate_exact_powers() {
        let e = [0.2f64, 0.1, 0.05, 0.025];
        let f = |p: i32| -> Vec<(f64, f64)> { e.iter().map(|&x| (x, x.powi(p))).collect() };
        assert!((fit_rate(&f(1)).unwrap().slope - 1.0).abs() < 1e-12);
        assert!((fit_rate(&f(2)).unwrap().slope - 2.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = e.iter().map(|&x| (x, 3.7)).collect();
        assert_eq!(fit_rate(&c).unwrap().slope, 0.0);
    }

    #[test]
    fn fit_rate_edge_cases() {
        let zeros = [(0.2, 0.0), (0.1, 0.0), (0.05, 0.0)];
        assert_eq!(fit_rate(&zeros).unwrap().slope, f64::INFINITY);
        assert!(fit_rate(&zeros[..2]).is_err());
        let mixed = [(0.2, 0.2), (0.1, 0.0), (0.05, 0.05), (0.025, 0.025)];
        let f = fit_rate(&mixed).unwrap();
        assert_eq!(f.excluded, 1);
        assert!((f.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_config_validation() {
        let mut c = SweepConfig::default();
        assert!(c.validate().is_ok());
        c.eps_list = vec![0.1, 0.2];
        assert!(c.validate().is_err());
        c.eps_list = vec![1.5, 0.2];
        assert!(c.validate().is_err());
        let c = SweepConfig {
            boundary_exclusion: 16,
            ..SweepConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn flat_channel_sweep_is_exact() {
        let geom = ThinGeometry::flat(1.0);
        let mut laws = LawSet::default();
        laws.r0 = 0.0;
        let sweep = SweepConfig {
            eps_list: vec![0.2, 0.1, 0.05],
            nx: 16,
            ns: 8,
            ..SweepConfig::default()
        };
        let rep = run_sweep(&geom, &laws, &sweep).unwrap();
        assert!(rep.complete());
        for r in &rep.rows {
            assert!(r.err_rho_l2 <= 1e-14 && r.err_v_l2 <= 1e-14, "{r:?}");
            assert_eq!(r.steps, 0);
        }
    }
}
