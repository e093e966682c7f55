//! `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, unknown or repeated keys are
//! errors. Anything not given keeps its default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{HeightProfile, ThinGeometry};
use crate::harness::{Norm, SweepConfig};
use crate::laws::{LawSet, ViscosityFamily};
use crate::ns::SolveConfig;

pub const KEYS: [&str; 37] = [
    "a",
    "gamma",
    "n",
    "m",
    "alpha",
    "beta",
    "eps_c",
    "rho_star",
    "crossover",
    "r0",
    "family",
    "dimension",
    "q_2d",
    "length",
    "profile",
    "h0",
    "delta",
    "shift",
    "eps",
    "V",
    "rho_b",
    "rho_t",
    "mass",
    "nx",
    "ns",
    "reynolds_tol",
    "dt0",
    "cfl",
    "tol",
    "max_steps",
    "hyper4",
    "eps_list",
    "norms",
    "boundary_exclusion",
    "threads",
    "out",
    "reynolds_max_iter",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub laws: LawSet,
    pub geom: ThinGeometry,
    pub dimension: u8,
    pub q_2d: f64,
    pub nx: usize,
    pub ns: usize,
    pub reynolds_tol: f64,
    pub reynolds_max_iter: usize,
    pub solve: SolveConfig,
    pub sweep: SweepConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut geom = ThinGeometry::slider(0.3, 1.0);
        geom.eps = 0.1;
        Self {
            laws: LawSet::default(),
            geom,
            dimension: 2,
            q_2d: 40.0,
            nx: 128,
            ns: 32,
            reynolds_tol: 1e-12,
            reynolds_max_iter: 60,
            solve: SolveConfig::default(),
            sweep: SweepConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Config {
        line,
        message: format!("{key}: expected a number, got {v:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Config {
            line,
            message: format!("{key}: value must be finite"),
        });
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Config {
        line,
        message: format!("{key}: expected a non-negative integer, got {v:?}"),
    })
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x = num(line, key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Config {
            line,
            message: format!("{key}: must be positive, got {x}"),
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut profile = "slider".to_string();
        let (mut h0, mut delta, mut shift) = (1.0, 0.3, 0.0);
        let mut mass: Option<f64> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config {
                    line,
                    message: format!("expected key = value, got {body:?}"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                });
            };
            if seen.contains(&known) {
                return Err(Error::Config {
                    line,
                    message: format!("key {key:?} given twice"),
                });
            }
            seen.push(known);
            let l = &mut c.laws;
            match known {
                "a" => l.a = positive(line, key, v)?,
                "gamma" => l.gamma = num(line, key, v)?,
                "n" => l.n = num(line, key, v)?,
                "m" => l.m = num(line, key, v)?,
                "alpha" => l.alpha = num(line, key, v)?,
                "beta" => l.beta = num(line, key, v)?,
                "eps_c" => l.eps_c = num(line, key, v)?,
                "rho_star" => l.rho_star = positive(line, key, v)?,
                "crossover" => l.crossover = positive(line, key, v)?,
                "r0" => {
                    l.r0 = num(line, key, v)?;
                    if l.r0 < 0.0 {
                        return Err(Error::Config {
                            line,
                            message: "r0: must be >= 0".into(),
                        });
                    }
                }
                "family" => {
                    l.family = match v {
                        "two_power" => ViscosityFamily::TwoPower,
                        "linear" => ViscosityFamily::Linear,
                        _ => {
                            return Err(Error::Config {
                                line,
                                message: format!("family: expected two_power or linear, got {v:?}"),
                            })
                        }
                    }
                }
                "dimension" => {
                    c.dimension = match v {
                        "2" => 2,
                        "3" => 3,
                        _ => {
                            return Err(Error::Config {
                                line,
                                message: format!("dimension: expected 2 or 3, got {v:?}"),
                            })
                        }
                    }
                }
                "q_2d" => c.q_2d = positive(line, key, v)?,
                "length" => c.geom.length = positive(line, key, v)?,
                "profile" => {
                    if v != "slider" && v != "constant" {
                        return Err(Error::Config {
                            line,
                            message: format!("profile: expected slider or constant, got {v:?}"),
                        });
                    }
                    profile = v.to_string();
                }
                "h0" => h0 = positive(line, key, v)?,
                "delta" => delta = num(line, key, v)?,
                "shift" => shift = num(line, key, v)?,
                "eps" => c.geom.eps = positive(line, key, v)?,
                "V" => c.geom.wall_speed = num(line, key, v)?,
                "rho_b" => c.geom.rho_bottom = positive(line, key, v)?,
                "rho_t" => c.geom.rho_top = positive(line, key, v)?,
                "mass" => mass = Some(positive(line, key, v)?),
                "nx" => c.nx = count(line, key, v)?,
                "ns" => c.ns = count(line, key, v)?,
                "reynolds_tol" => c.reynolds_tol = positive(line, key, v)?,
                "reynolds_max_iter" => c.reynolds_max_iter = count(line, key, v)?,
                "dt0" => c.solve.dt0 = positive(line, key, v)?,
                "cfl" => c.solve.cfl = positive(line, key, v)?,
                "tol" => c.solve.tol = positive(line, key, v)?,
                "max_steps" => c.solve.max_steps = count(line, key, v)?,
                "hyper4" => c.solve.hyper4 = num(line, key, v)?,
                "eps_list" => {
                    c.sweep.eps_list = v
                        .split(',')
                        .map(|t| positive(line, key, t.trim()))
                        .collect::<Result<_>>()?
                }
                "norms" => {
                    c.sweep.norms = v
                        .split(',')
                        .map(|t| {
                            Norm::parse(t).ok_or_else(|| Error::Config {
                                line,
                                message: format!("norms: expected L2 or L3/2, got {t:?}"),
                            })
                        })
                        .collect::<Result<_>>()?
                }
                "boundary_exclusion" => c.sweep.boundary_exclusion = count(line, key, v)?,
                "threads" => {
                    let t = count(line, key, v)?;
                    c.sweep.threads = if t == 0 { None } else { Some(t) };
                }
                "out" => c.out = PathBuf::from(v),
                _ => unreachable!("key listed but not handled"),
            }
        }
        c.geom.profile = if profile == "constant" {
            HeightProfile::Constant(h0)
        } else {
            HeightProfile::Slider { delta, shift }
        };
        // unit mean density unless the mass is given
        c.geom.mass = mass.unwrap_or_else(|| c.geom.area());
        c.sweep.nx = c.nx;
        c.sweep.ns = c.ns;
        c.sweep.solve = c.solve.clone();
        c.geom.validate().map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        c.solve.validate().map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(c)
    }

    /// Every key with its resolved value.
    pub fn echo(&self) -> String {
        let l = &self.laws;
        let g = &self.geom;
        let (profile, h0, delta, shift) = match g.profile {
            HeightProfile::Constant(c) => ("constant", c, 0.0, 0.0),
            HeightProfile::Slider { delta, shift } => ("slider", 1.0, delta, shift),
        };
        let family = match l.family {
            ViscosityFamily::TwoPower => "two_power",
            ViscosityFamily::Linear => "linear",
        };
        let eps: Vec<String> = self.sweep.eps_list.iter().map(|e| e.to_string()).collect();
        let norms: Vec<&str> = self
            .sweep
            .norms
            .iter()
            .map(|n| match n {
                Norm::L2 => "L2",
                Norm::L32 => "L3/2",
            })
            .collect();
        let values: Vec<(&str, String)> = vec![
            ("a", l.a.to_string()),
            ("gamma", l.gamma.to_string()),
            ("n", l.n.to_string()),
            ("m", l.m.to_string()),
            ("alpha", l.alpha.to_string()),
            ("beta", l.beta.to_string()),
            ("eps_c", l.eps_c.to_string()),
            ("rho_star", l.rho_star.to_string()),
            ("crossover", l.crossover.to_string()),
            ("r0", l.r0.to_string()),
            ("family", family.to_string()),
            ("dimension", self.dimension.to_string()),
            ("q_2d", self.q_2d.to_string()),
            ("length", g.length.to_string()),
            ("profile", profile.to_string()),
            ("h0", h0.to_string()),
            ("delta", delta.to_string()),
            ("shift", shift.to_string()),
            ("eps", g.eps.to_string()),
            ("V", g.wall_speed.to_string()),
            ("rho_b", g.rho_bottom.to_string()),
            ("rho_t", g.rho_top.to_string()),
            ("mass", g.mass.to_string()),
            ("nx", self.nx.to_string()),
            ("ns", self.ns.to_string()),
            ("reynolds_tol", self.reynolds_tol.to_string()),
            ("dt0", self.solve.dt0.to_string()),
            ("cfl", self.solve.cfl.to_string()),
            ("tol", self.solve.tol.to_string()),
            ("max_steps", self.solve.max_steps.to_string()),
            ("hyper4", self.solve.hyper4.to_string()),
            ("eps_list", eps.join(",")),
            ("norms", norms.join(",")),
            ("boundary_exclusion", self.sweep.boundary_exclusion.to_string()),
            ("threads", self.sweep.threads.unwrap_or(0).to_string()),
            ("out", self.out.display().to_string()),
            ("reynolds_max_iter", self.reynolds_max_iter.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!((c.geom.mass - 1.3).abs() < 1e-15);
    }

    #[test]
    fn values_and_comments() {
        let c = RunConfig::parse("n = 0.8 # tweak\nprofile = constant\nh0 = 2\neps_list = 0.3, 0.2, 0.1\nnorms = L3/2\n").unwrap();
        assert_eq!(c.laws.n, 0.8);
        assert_eq!(c.geom.profile, HeightProfile::Constant(2.0));
        assert_eq!(c.geom.mass, 2.0);
        assert_eq!(c.sweep.eps_list, vec![0.3, 0.2, 0.1]);
        assert_eq!(c.sweep.norms, vec![Norm::L32]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line = |t: &str| match RunConfig::parse(t) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line("a = 1\nbogus = 2\n"), 2);
        assert_eq!(line("\n\nn = abc\n"), 3);
        assert_eq!(line("n = 0.7\nn = 0.8\n"), 2);
        assert_eq!(line("just text\n"), 1);
        assert_eq!(line("eps = 0\n"), 1);
        assert_eq!(line("eps = 1.5\n"), 0);
    }

    #[test]
    fn echo_lists_every_key_and_reparses() {
        let c = RunConfig::parse("delta = 0.2\nV = 2\neps_list = 0.4,0.2,0.1\n").unwrap();
        let e = c.echo();
        for k in KEYS {
            assert!(e.lines().any(|l| l.starts_with(&format!("{k} = "))), "{k}");
        }
        assert_eq!(RunConfig::parse(&e).unwrap(), c);
    }
}
