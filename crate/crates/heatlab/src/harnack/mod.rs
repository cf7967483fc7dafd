//! Time-space cylinders and the measured Harnack machinery: energy and mean-value
//! estimates, the log lemma statistic, `C_PHI` and Hölder exponents.

mod estimates;
mod phi;

use serde::{Deserialize, Serialize};

pub use estimates::{
    energy_estimate_check, lambda_grid, log_lemma_stat, mve_bracket, mve_check, MveShape, DEFAULT_FLOOR,
};
pub use phi::{
    default_sources, holder_cylinder, holder_estimate, kernel_family, phi_estimate, random_family, HolderOptions,
};

use crate::error::{Error, Result};
use crate::space::{MetricMeasureGraph, ScalingFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `(a − σΨ(r), a)`.
    Minus,
    /// `(a, a + σΨ(r))`.
    Plus,
}

/// A window `[t0, t1]` times an open ball, realized on the graph's vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: usize,
    pub anchor: f64,
    pub r: f64,
    /// `Ψ(r)`.
    pub psi_r: f64,
    pub window: (f64, f64),
    pub ball_radius: f64,
    pub vertices: Vec<usize>,
    pub label: String,
}

impl Cylinder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: &MetricMeasureGraph,
        center: usize,
        anchor: f64,
        r: f64,
        psi_r: f64,
        window: (f64, f64),
        ball_radius: f64,
        label: &str,
    ) -> Result<Self> {
        if center >= g.len() {
            return Err(Error::Vertex(center));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::Invalid(format!("cylinder window {window:?} is empty")));
        }
        if !(ball_radius > 0.0) {
            return Err(Error::Invalid(format!("cylinder radius {ball_radius} must be positive")));
        }
        let vertices = g.ball(center, ball_radius);
        if vertices.len() < 2 && g.len() > 1 {
            return Err(Error::Empty("cylinder base below the mesh"));
        }
        Ok(Cylinder { center, anchor, r, psi_r, window, ball_radius, vertices, label: label.to_string() })
    }

    /// `Q^±_{σ,δ}`: `(a − σΨ(r), a)` or `(a, a + σΨ(r))` times `B(x, δr)`.
    #[allow(clippy::too_many_arguments)]
    pub fn sub(
        g: &MetricMeasureGraph,
        x: usize,
        a: f64,
        r: f64,
        psi: &ScalingFunction,
        sigma: f64,
        delta: f64,
        side: Side,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) || !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Invalid(format!("need 0 < sigma, delta <= 1, got {sigma}, {delta}")));
        }
        let pr = psi.eval(r);
        let window = match side {
            Side::Minus => (a - sigma * pr, a),
            Side::Plus => (a, a + sigma * pr),
        };
        let label = format!("{side:?} sigma={sigma} delta={delta}").to_lowercase();
        Cylinder::new(g, x, a, r, pr, window, delta * r, &label)
    }

    pub fn duration(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Grid nodes inside the closed window.
    pub fn nodes(&self, times: &[f64]) -> Result<Vec<usize>> {
        let slack = 1e-12 * self.window.1.abs().max(1.0);
        let out: Vec<usize> = times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= self.window.0 - slack && t <= self.window.1 + slack)
            .map(|(k, _)| k)
            .collect();
        if out.is_empty() {
            return Err(Error::Empty("cylinder window holds no grid node"));
        }
        Ok(out)
    }

    /// Whether the realized index set of `other` lies inside this one.
    pub fn contains(&self, other: &Cylinder, times: &[f64]) -> bool {
        let (Ok(mine), Ok(theirs)) = (self.nodes(times), other.nodes(times)) else {
            return false;
        };
        theirs.iter().all(|k| mine.contains(k)) && other.vertices.iter().all(|v| self.vertices.contains(v))
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.vertices {
            m[v] = true;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "convention", rename_all = "kebab-case")]
pub enum CylinderParams {
    /// `Q^- = (a + τ₁Ψ(r), a + τ₂Ψ(r)) × δB`, `Q^+` with `τ₃, τ₄`.
    Tau { tau: [f64; 4], delta: f64 },
    /// `Q̂^- = (a + Ψ(σ₁r), a + Ψ(σ₂r)) × δB`, `Q̂^+` with `σ₃, σ₄`.
    HatSigma { sigma: [f64; 4], delta: f64 },
}

impl Default for CylinderParams {
    fn default() -> Self {
        CylinderParams::Tau { tau: [1.0 / 6.0, 1.0 / 3.0, 0.5, 1.0], delta: 0.5 }
    }
}

impl CylinderParams {
    pub fn validate(&self) -> Result<()> {
        let (p, delta) = match self {
            CylinderParams::Tau { tau, delta } => (tau, delta),
            CylinderParams::HatSigma { sigma, delta } => (sigma, delta),
        };
        let ordered = p[0] > 0.0 && p.windows(2).all(|w| w[0] < w[1]) && p[3] <= 1.0;
        if !ordered || !(*delta > 0.0 && *delta <= 1.0) {
            return Err(Error::Invalid(format!("cylinder parameters {p:?}, delta {delta} are not admissible")));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        match self {
            CylinderParams::Tau { delta, .. } | CylinderParams::HatSigma { delta, .. } => *delta,
        }
    }

    /// Hat parameters whose windows sit strictly inside the `τ` windows at radius `r`:
    /// each window is shrunk by a quarter of its length at both ends and pulled back
    /// through `Ψ`.
    pub fn hat_for(&self, psi: &ScalingFunction, r: f64) -> Result<CylinderParams> {
        self.validate()?;
        let CylinderParams::Tau { tau, delta } = *self else {
            return Ok(*self);
        };
        let pr = psi.eval(r);
        let inner = |lo: f64, hi: f64| {
            let q = 0.25 * (hi - lo);
            [lo + q, hi - q]
        };
        let [a, b] = inner(tau[0], tau[1]);
        let [c, d] = inner(tau[2], tau[3]);
        let sigma = [a, b, c, d].map(|t| psi.inverse(t * pr) / r);
        let hat = CylinderParams::HatSigma { sigma, delta };
        hat.validate()?;
        Ok(hat)
    }
}

/// `Q = (a, a + Ψ(r)) × B` with its earlier and later sub-cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackCylinders {
    pub q: Cylinder,
    pub minus: Cylinder,
    pub plus: Cylinder,
    pub params: CylinderParams,
}

pub fn make_cylinders(
    g: &MetricMeasureGraph,
    x: usize,
    a: f64,
    r: f64,
    psi: &ScalingFunction,
    params: CylinderParams,
) -> Result<HarnackCylinders> {
    params.validate()?;
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("radius {r} must be positive")));
    }
    let pr = psi.eval(r);
    let (w, delta) = match params {
        CylinderParams::Tau { tau, delta } => (tau.map(|t| a + t * pr), delta),
        CylinderParams::HatSigma { sigma, delta } => (sigma.map(|s| a + psi.eval(s * r)), delta),
    };
    let q = Cylinder::new(g, x, a, r, pr, (a, a + pr), r, "q")?;
    let minus = Cylinder::new(g, x, a, r, pr, (w[0], w[1]), delta * r, "q-")?;
    let plus = Cylinder::new(g, x, a, r, pr, (w[2], w[3]), delta * r, "q+")?;
    Ok(HarnackCylinders { q, minus, plus, params })
}

/// `σ_j = 1 − (1 − σ*)/(1 + j)` for `j = 0..count`: the shrinking schedule of the
/// Bombieri–Giusti argument. Bookkeeping only; nothing here iterates it.
pub fn bombieri_schedule(sigma_star: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| 1.0 - (1.0 - sigma_star) / (1.0 + j as f64)).collect()
}

/// `∫_{t0}^{t1}` of the piecewise-linear interpolant of `series` on `times`.
pub(crate) fn window_integral(times: &[f64], series: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let (first, last) = (times[0], times[times.len() - 1]);
    let slack = 1e-12 * last.abs().max(1.0);
    if t0 < first - slack || t1 > last + slack {
        return Err(Error::Invalid(format!("window [{t0}, {t1}] leaves the trajectory [{first}, {last}]")));
    }
    let (t0, t1) = (t0.max(first), t1.min(last));
    let mut acc = 0.0;
    for (k, w) in times.windows(2).enumerate() {
        let (lo, hi) = (w[0].max(t0), w[1].min(t1));
        if hi <= lo {
            continue;
        }
        let at = |t: f64| series[k] + (series[k + 1] - series[k]) * (t - w[0]) / (w[1] - w[0]);
        acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    Ok(acc)
}
