//! Off-diagonal rate functions, Davies–Gaffney bounds and two-sided kernel fits.

mod davies;
mod fit;

use serde::{Deserialize, Serialize};

pub use davies::{davies_gaffney_check, DaviesOptions};
pub use fit::{lower_hke_fit, upper_hke_fit, upper_hke_points, FitOptions, TINY_KERNEL};

use crate::error::{Error, Result};
use crate::space::ScalingFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateVariant {
    /// `Φ(R,t) = sup_r {R/r − t/Ψ(r)}`.
    Phi,
    /// `Φ_{β₂}(R,t) = sup_r {R/r − t R^{β₂}/(r^{β₂} Ψ(R))}`.
    PhiBeta { beta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Closed form where one exists, search otherwise.
    Auto,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub psi: ScalingFunction,
    pub variant: RateVariant,
    pub strategy: Strategy,
}

/// `sup_{s>0} {R s − c s^b} = (1 − 1/b) b^{−1/(b−1)} (R^b/c)^{1/(b−1)}`.
fn power_sup(r: f64, c: f64, b: f64) -> f64 {
    (1.0 - 1.0 / b) * b.powf(-1.0 / (b - 1.0)) * (r.powf(b) / c).powf(1.0 / (b - 1.0))
}

impl RateFunction {
    pub fn phi(psi: ScalingFunction) -> Self {
        RateFunction { psi, variant: RateVariant::Phi, strategy: Strategy::Auto }
    }

    /// `Φ_{β₂}` with the scaling's own upper exponent.
    pub fn phi_beta(psi: ScalingFunction) -> Self {
        let beta2 = psi.beta2;
        RateFunction { psi, variant: RateVariant::PhiBeta { beta2 }, strategy: Strategy::Auto }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    fn term(&self, big_r: f64, t: f64, r: f64) -> f64 {
        match self.variant {
            RateVariant::Phi => big_r / r - t / self.psi.eval(r),
            RateVariant::PhiBeta { beta2 } => big_r / r - t * (big_r / r).powf(beta2) / self.psi.eval(big_r),
        }
    }

    fn closed_form(&self, big_r: f64, t: f64) -> Option<f64> {
        match self.variant {
            RateVariant::Phi => {
                let (a, b) = self.psi.power_law()?;
                Some(power_sup(big_r, t / a, b))
            }
            RateVariant::PhiBeta { beta2 } => {
                Some(power_sup(big_r, t * big_r.powf(beta2) / self.psi.eval(big_r), beta2))
            }
        }
    }

    /// Log-spaced scan over `r`, then golden-section on the best bracket in `log r`.
    fn search(&self, big_r: f64, t: f64) -> f64 {
        let f = |rho: f64| self.term(big_r, t, rho.exp());
        let (lo, hi, m) = (big_r.ln() - 40.0, big_r.ln() + 40.0, 801);
        let step = (hi - lo) / (m - 1) as f64;
        let (mut best, mut k) = (f64::NEG_INFINITY, 0);
        for i in 0..m {
            let v = f(lo + step * i as f64);
            if v > best {
                best = v;
                k = i;
            }
        }
        let (mut a, mut b) = (lo + step * (k.max(1) - 1) as f64, lo + step * (k + 1).min(m - 1) as f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (f(c), f(d));
        while (b - a) > 1e-13 * (1.0 + a.abs().max(b.abs())) {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        best.max(fc).max(fd).max(0.0)
    }

    /// The supremum over `r > 0`; zero at `R = 0`.
    pub fn rate(&self, big_r: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Invalid(format!("rate needs t > 0, got {t}")));
        }
        if !(big_r >= 0.0) {
            return Err(Error::Invalid(format!("rate needs R >= 0, got {big_r}")));
        }
        if big_r == 0.0 {
            return Ok(0.0);
        }
        let closed = match self.strategy {
            Strategy::Auto => self.closed_form(big_r, t),
            Strategy::Search => None,
        };
        Ok(closed.unwrap_or_else(|| self.search(big_r, t)))
    }
}
