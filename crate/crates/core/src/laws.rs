//! Constitutive laws: viscosity, pressure, the derived potentials and the
//! exponent conditions required by the thin-film limit.
//!
//! The viscosity family is `mu(s) = s^n + s^m` (two power laws, small- and
//! large-density regimes) and the pressure is a hot power law plus a cold
//! component singular at vacuum, `p(s) = a s^gamma - (eps_c/alpha) s^-alpha`.
//! A linear family `mu(s) = s` is kept for degenerate (shallow-water like)
//! checks where `lambda` vanishes identically.

use crate::error::{Error, Result};

/// Which viscosity law a [`LawSet`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViscosityFamily {
    /// `mu(s) = s^n + s^m`.
    TwoPower,
    /// `mu(s) = s`, so `lambda = 0`.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawSet {
    pub a: f64,
    pub gamma: f64,
    pub n: f64,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eps_c: f64,
    pub rho_star: f64,
    pub crossover: f64,
    pub r0: f64,
    pub family: ViscosityFamily,
}

impl Default for LawSet {
    fn default() -> Self {
        Self {
            a: 1.0,
            gamma: 2.0,
            n: 0.75,
            m: 2.0,
            alpha: 1.0,
            beta: 1.0,
            eps_c: 1e-2,
            rho_star: 0.5,
            crossover: 1.0,
            r0: 1.0,
            family: ViscosityFamily::TwoPower,
        }
    }
}

fn require_positive(function: &'static str, s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(function, s))
    }
}

/// `g` with `g'' = s^k`, `g(1) = g'(1) = 0`.
fn double_primitive(k: f64, s: f64) -> f64 {
    if k == -1.0 {
        s * s.ln() - s + 1.0
    } else if k == -2.0 {
        -s.ln() + s - 1.0
    } else {
        (s.powf(k + 2.0) - 1.0) / ((k + 1.0) * (k + 2.0)) - (s - 1.0) / (k + 1.0)
    }
}

/// `g` with `g' = s^k`; the additive constant is whatever the closed form gives.
fn primitive(k: f64, s: f64) -> f64 {
    if k == -1.0 {
        s.ln()
    } else {
        s.powf(k + 1.0) / (k + 1.0)
    }
}

impl LawSet {
    /// Degenerate family `mu(s) = s`, all other parameters default.
    pub fn linear() -> Self {
        Self {
            n: 1.0,
            m: 1.0,
            family: ViscosityFamily::Linear,
            ..Self::default()
        }
    }

    /// `M = (n - alpha - 1) / 2`, exponent of the cold-pressure BD term.
    pub fn exponent_m(&self) -> f64 {
        (self.n - self.alpha - 1.0) / 2.0
    }

    /// `N = (gamma + n - 1) / 2`, exponent of the hot-pressure BD term.
    pub fn exponent_n(&self) -> f64 {
        (self.gamma + self.n - 1.0) / 2.0
    }

    /// Cold-pressure bound constant `c2 = max(eps_c, 1/eps_c)`.
    pub fn c2(&self) -> f64 {
        self.eps_c.max(1.0 / self.eps_c)
    }

    pub fn mu(&self, s: f64) -> Result<f64> {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::domain("mu", s));
        }
        Ok(self.mu_unchecked(s))
    }

    pub(crate) fn mu_unchecked(&self, s: f64) -> f64 {
        match self.family {
            ViscosityFamily::TwoPower => s.powf(self.n) + s.powf(self.m),
            ViscosityFamily::Linear => s,
        }
    }

    pub fn mu_prime(&self, s: f64) -> Result<f64> {
        require_positive("mu_prime", s)?;
        Ok(self.mu_prime_unchecked(s))
    }

    /// Second viscosity `lambda(s) = 2 (s mu'(s) - mu(s))`.
    pub fn lambda_of(&self, s: f64) -> Result<f64> {
        require_positive("lambda", s)?;
        Ok(self.lambda_unchecked(s))
    }

    pub(crate) fn lambda_unchecked(&self, s: f64) -> f64 {
        match self.family {
            ViscosityFamily::TwoPower => {
                2.0 * (self.n - 1.0) * s.powf(self.n) + 2.0 * (self.m - 1.0) * s.powf(self.m)
            }
            ViscosityFamily::Linear => 0.0,
        }
    }

    pub fn pressure(&self, s: f64) -> Result<f64> {
        require_positive("pressure", s)?;
        Ok(self.pressure_unchecked(s))
    }

    pub(crate) fn pressure_unchecked(&self, s: f64) -> f64 {
        self.a * s.powf(self.gamma) - self.eps_c / self.alpha * s.powf(-self.alpha)
    }

    pub fn pressure_prime(&self, s: f64) -> Result<f64> {
        require_positive("pressure_prime", s)?;
        Ok(self.pressure_prime_unchecked(s))
    }

    pub(crate) fn pressure_prime_unchecked(&self, s: f64) -> f64 {
        self.a * self.gamma * s.powf(self.gamma - 1.0) + self.eps_c * s.powf(-self.alpha - 1.0)
    }

    pub(crate) fn pressure_second_unchecked(&self, s: f64) -> f64 {
        self.a * self.gamma * (self.gamma - 1.0) * s.powf(self.gamma - 2.0)
            - self.eps_c * (self.alpha + 1.0) * s.powf(-self.alpha - 2.0)
    }

    pub(crate) fn mu_prime_unchecked(&self, s: f64) -> f64 {
        match self.family {
            ViscosityFamily::TwoPower => {
                self.n * s.powf(self.n - 1.0) + self.m * s.powf(self.m - 1.0)
            }
            ViscosityFamily::Linear => 1.0,
        }
    }

    /// Cold part alone, `p_c(s) = -(eps_c/alpha) s^-alpha`.
    pub fn cold_pressure(&self, s: f64) -> Result<f64> {
        require_positive("cold_pressure", s)?;
        Ok(-self.eps_c / self.alpha * s.powf(-self.alpha))
    }

    pub fn cold_pressure_prime(&self, s: f64) -> Result<f64> {
        require_positive("cold_pressure_prime", s)?;
        Ok(self.eps_c * s.powf(-self.alpha - 1.0))
    }

    /// Pressure potential with `s Q''(s) = p(s)` and `Q(1) = Q'(1) = 0`.
    pub fn potential_q(&self, s: f64) -> Result<f64> {
        require_positive("potential_Q", s)?;
        let hot = self.a * double_primitive(self.gamma - 1.0, s);
        let cold = -self.eps_c / self.alpha * double_primitive(-self.alpha - 1.0, s);
        Ok(hot + cold)
    }

    /// `phi` with `phi'(s) = mu'(s)/s`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        require_positive("phi", s)?;
        Ok(match self.family {
            ViscosityFamily::TwoPower => {
                self.n * primitive(self.n - 2.0, s) + self.m * primitive(self.m - 2.0, s)
            }
            ViscosityFamily::Linear => primitive(-1.0, s),
        })
    }

    pub fn phi_prime(&self, s: f64) -> Result<f64> {
        require_positive("phi_prime", s)?;
        Ok(self.mu_prime(s)? / s)
    }

    /// Truncated density: identity below `min(rho*, A)/2`, zero above
    /// `min(rho*, A)`, C1 cubic Hermite blend in between.
    pub fn xi(&self, s: f64) -> f64 {
        let (lo, hi) = self.xi_window();
        if s <= lo {
            s
        } else if s >= hi {
            0.0
        } else {
            let d = hi - lo;
            let t = (s - lo) / d;
            let t2 = t * t;
            let t3 = t2 * t;
            lo * (2.0 * t3 - 3.0 * t2 + 1.0) + d * (t3 - 2.0 * t2 + t)
        }
    }

    pub fn xi_prime(&self, s: f64) -> f64 {
        let (lo, hi) = self.xi_window();
        if s <= lo {
            1.0
        } else if s >= hi {
            0.0
        } else {
            let d = hi - lo;
            let t = (s - lo) / d;
            let t2 = t * t;
            (lo * (6.0 * t2 - 6.0 * t) + d * (3.0 * t2 - 4.0 * t + 1.0)) / d
        }
    }

    fn xi_window(&self) -> (f64, f64) {
        let hi = self.rho_star.min(self.crossover);
        (0.5 * hi, hi)
    }
}

/// One named assumption check with its signed slack (positive = satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub satisfied: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub admissible: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `condition,satisfied,margin` rows with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,satisfied,margin\n");
        for c in &self.checks {
            out.push_str(&format!("{},{},{:.17e}\n", c.name, c.satisfied, c.margin));
        }
        out
    }
}

/// Sobolev exponent proxy: `q = 6` in 3-D, configurable (default 40) in 2-D.
pub fn sobolev_q(dimension: u8, q_2d: f64) -> f64 {
    if dimension == 3 {
        6.0
    } else {
        q_2d
    }
}

pub fn validate_assumptions(laws: &LawSet, dimension: u8, q_2d: f64) -> ValidationReport {
    let q = sobolev_q(dimension, q_2d);
    let (g, n, m, al, be) = (laws.gamma, laws.n, laws.m, laws.alpha, laws.beta);
    let big_m = laws.exponent_m();
    let big_n = laws.exponent_n();

    // (name, margin, strict)
    let raw: [(&'static str, f64, bool); 12] = [
        ("gamma>=1", g - 1.0, false),
        ("alpha>=1", al - 1.0, false),
        ("m>1", m - 1.0, true),
        ("2/3<n<1", (n - 2.0 / 3.0).min(1.0 - n), true),
        ("m<gamma+n-1/3", g + n - 1.0 / 3.0 - m, true),
        ("beta<=2(gamma+n-1)", 2.0 * (g + n - 1.0) - be, false),
        ("m<alpha-n+7/3", al - n + 7.0 / 3.0 - m, true),
        ("C1:3m-2<qN", q * big_n - (3.0 * m - 2.0), true),
        ("C2:4beta<=(q+2)(n+gamma-1)", (q + 2.0) * (n + g - 1.0) - 4.0 * be, false),
        ("C3:qM<=4-3m", 4.0 - 3.0 * m - q * big_m, false),
        ("coercivity:n>1/2", n - 0.5, true),
        ("positive:a,beta,eps_c,rho*,A;r0>=0", positivity_margin(laws), false),
    ];
    let checks: Vec<Check> = raw
        .iter()
        .map(|&(name, margin, strict)| Check {
            name,
            satisfied: if strict { margin > 0.0 } else { margin >= 0.0 },
            margin,
        })
        .collect();
    let admissible = checks.iter().all(|c| c.satisfied);
    ValidationReport { checks, admissible }
}

fn positivity_margin(laws: &LawSet) -> f64 {
    let strict = [laws.a, laws.beta, laws.eps_c, laws.rho_star, laws.crossover]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    // strictly positive quantities report a tiny negative slack at zero
    let strict = if strict > 0.0 { strict } else { strict - f64::MIN_POSITIVE };
    strict.min(laws.r0)
}
