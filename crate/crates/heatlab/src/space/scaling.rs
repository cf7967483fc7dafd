use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{CertReport, Status, Witness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalingKind {
    /// `a·r^beta`.
    Power { a: f64, beta: f64 },
    /// `a·r^{exponents[0]}` below `breaks[0]`, continued with `exponents[i]` past `breaks[i-1]`.
    PiecewisePower { a: f64, breaks: Vec<f64>, exponents: Vec<f64> },
    /// Log-log interpolation through `(r, psi)`, power-law extrapolation at both ends.
    Tabulated { r: Vec<f64>, psi: Vec<f64> },
}

/// Time-space scaling `Ψ` with its two-sided power bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFunction {
    pub kind: ScalingKind,
    pub beta1: f64,
    pub beta2: f64,
    pub c_psi: f64,
}

impl ScalingFunction {
    pub fn power(a: f64, beta: f64) -> Self {
        ScalingFunction { kind: ScalingKind::Power { a, beta }, beta1: beta, beta2: beta, c_psi: 1.0 }
    }

    /// `r^2`.
    pub fn diffusive() -> Self {
        Self::power(1.0, 2.0)
    }

    /// `r^{log 5 / log 2}`, the walk scaling of the Sierpinski gasket.
    pub fn gasket() -> Self {
        Self::power(1.0, 5f64.ln() / 2f64.ln())
    }

    pub fn piecewise(a: f64, breaks: Vec<f64>, exponents: Vec<f64>, c_psi: f64) -> Result<Self> {
        let beta1 = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
        let beta2 = exponents.iter().cloned().fold(0.0, f64::max);
        let s = ScalingFunction { kind: ScalingKind::PiecewisePower { a, breaks, exponents }, beta1, beta2, c_psi };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(r: Vec<f64>, psi: Vec<f64>, beta1: f64, beta2: f64, c_psi: f64) -> Result<Self> {
        let s = ScalingFunction { kind: ScalingKind::Tabulated { r, psi }, beta1, beta2, c_psi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 2.0) {
            return Err(Error::BadScaling(format!("beta1 = {} is below 2", self.beta1)));
        }
        if !(self.beta2 >= self.beta1) {
            return Err(Error::BadScaling("beta2 < beta1".into()));
        }
        if !(self.c_psi >= 1.0) {
            return Err(Error::BadScaling("c_psi < 1".into()));
        }
        match &self.kind {
            ScalingKind::Power { a, beta } => {
                if !(*a > 0.0 && *beta > 0.0) {
                    return Err(Error::BadScaling("power needs a > 0 and beta > 0".into()));
                }
            }
            ScalingKind::PiecewisePower { a, breaks, exponents } => {
                if !(*a > 0.0) || exponents.len() != breaks.len() + 1 {
                    return Err(Error::BadScaling("piecewise power needs one more exponent than breaks".into()));
                }
                if exponents.iter().any(|&e| !(e > 0.0)) {
                    return Err(Error::BadScaling("nonpositive exponent".into()));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|&b| !(b > 0.0)) {
                    return Err(Error::BadScaling("breaks must be positive and increasing".into()));
                }
            }
            ScalingKind::Tabulated { r, psi } => {
                if r.len() < 2 || r.len() != psi.len() {
                    return Err(Error::BadScaling("table needs at least two matching points".into()));
                }
                if r.iter().chain(psi.iter()).any(|&v| !(v > 0.0)) {
                    return Err(Error::BadScaling("table entries must be positive".into()));
                }
                if r.windows(2).any(|w| w[1] <= w[0]) || psi.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::BadScaling("tabulated scaling is not strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ScalingKind::Power { a, beta } => a * r.powf(*beta),
            ScalingKind::PiecewisePower { a, breaks, exponents } => {
                let mut base_r = 1.0;
                let mut base_v = *a;
                let mut e = exponents[0];
                for (i, &b) in breaks.iter().enumerate() {
                    if r <= b {
                        break;
                    }
                    base_v *= (b / base_r).powf(e);
                    base_r = b;
                    e = exponents[i + 1];
                }
                base_v * (r / base_r).powf(e)
            }
            ScalingKind::Tabulated { r: xs, psi } => {
                let lx = r.ln();
                let k = segment(xs, r);
                let (x0, x1) = (xs[k].ln(), xs[k + 1].ln());
                let (y0, y1) = (psi[k].ln(), psi[k + 1].ln());
                (y0 + (y1 - y0) * (lx - x0) / (x1 - x0)).exp()
            }
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ScalingKind::Power { a, beta } => (v / a).powf(1.0 / beta),
            ScalingKind::PiecewisePower { a, breaks, exponents } => {
                let mut base_r = 1.0;
                let mut base_v = *a;
                let mut e = exponents[0];
                for (i, &b) in breaks.iter().enumerate() {
                    let vb = base_v * (b / base_r).powf(e);
                    if v <= vb {
                        break;
                    }
                    base_v = vb;
                    base_r = b;
                    e = exponents[i + 1];
                }
                base_r * (v / base_v).powf(1.0 / e)
            }
            ScalingKind::Tabulated { r: xs, psi } => {
                let lv = v.ln();
                let k = segment(psi, v);
                let (x0, x1) = (xs[k].ln(), xs[k + 1].ln());
                let (y0, y1) = (psi[k].ln(), psi[k + 1].ln());
                (x0 + (x1 - x0) * (lv - y0) / (y1 - y0)).exp()
            }
        }
    }

    /// Closed-form exponent when Ψ is a pure power.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        match self.kind {
            ScalingKind::Power { a, beta } => Some((a, beta)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ScalingKind::Power { a, beta } => format!("power(a={a},beta={beta:.6})"),
            ScalingKind::PiecewisePower { .. } => "piecewise-power".into(),
            ScalingKind::Tabulated { r, .. } => format!("tabulated({} points)", r.len()),
        }
    }
}

// Segment index for interpolation; end segments double as extrapolation.
fn segment(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    match xs.iter().position(|&v| v > x) {
        None => n - 2,
        Some(0) => 0,
        Some(i) => (i - 1).min(n - 2),
    }
}

/// Checks `C⁻¹(R/s)^{β1} ≤ Ψ(R)/Ψ(s) ≤ C(R/s)^{β2}` on every pair and reports the tightest `C`.
pub fn verify_psi(psi: &ScalingFunction, samples: &[(f64, f64)]) -> Result<CertReport> {
    psi.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    let mut c: f64 = 1.0;
    let mut worst = (samples[0].0, samples[0].1);
    for &(s, big_r) in samples {
        if !(s > 0.0 && s < big_r) {
            return Err(Error::Invalid(format!("sample ({s}, {big_r}) needs 0 < s < R")));
        }
        let x = big_r / s;
        let q = psi.eval(big_r) / psi.eval(s);
        let need = (x.powf(psi.beta1) / q).max(q / x.powf(psi.beta2));
        if need > c {
            c = need;
            worst = (s, big_r);
        }
    }
    // Pure ratios of powers carry a few ulps of rounding.
    let feasible = c <= psi.c_psi * (1.0 + 1e-12);
    let mut rep = CertReport::measured("psi-scaling", if c < 1.0 + 1e-12 { 1.0 } else { c }, "samples")
        .value("beta1", psi.beta1)
        .value("beta2", psi.beta2)
        .value("c_psi_declared", psi.c_psi)
        .value("samples", samples.len() as f64)
        .with_witness(Witness { label: format!("s={},R={}", worst.0, worst.1), ..Default::default() });
    rep.budget = Some(psi.c_psi);
    if !feasible {
        rep.status = Status::Infeasible;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_samples() -> Vec<(f64, f64)> {
        let pts: Vec<f64> = (0..=20).map(|i| 0.01 * 100f64.powf(i as f64 / 20.0)).collect();
        let mut out = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                out.push((pts[i], pts[j]));
            }
        }
        out
    }

    #[test]
    fn power_laws_certify_with_unit_constant() {
        for psi in [ScalingFunction::diffusive(), ScalingFunction::gasket()] {
            let rep = verify_psi(&psi, &log_samples()).unwrap();
            assert_eq!(rep.status, Status::Pass);
            assert!((rep.constant - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_square_then_cube() {
        let r: Vec<f64> = (0..=8).map(|i| 0.25 * 2f64.powi(i - 2)).collect();
        let psi: Vec<f64> = r.iter().map(|&x| if x <= 1.0 { x * x } else { x * x * x }).collect();
        let good = ScalingFunction::tabulated(r.clone(), psi.clone(), 2.0, 3.0, 1.0).unwrap();
        assert!((good.eval(0.5) - 0.25).abs() < 1e-14);
        assert!((good.eval(2.0) - 8.0).abs() < 1e-12);
        let samples: Vec<(f64, f64)> = vec![(0.1, 0.5), (0.5, 2.0), (1.0, 4.0), (0.2, 8.0)];
        assert_eq!(verify_psi(&good, &samples).unwrap().status, Status::Pass);
        let bad = ScalingFunction::tabulated(r, psi, 2.0, 2.0, 1.0).unwrap();
        let rep = verify_psi(&bad, &samples).unwrap();
        assert_eq!(rep.status, Status::Infeasible);
        assert!(rep.constant > 1.0);
    }

    #[test]
    fn rejects_subdiffusive_and_nonmonotone() {
        let s = ScalingFunction::power(1.0, 1.5);
        assert!(verify_psi(&s, &[(0.1, 1.0)]).is_err());
        assert!(ScalingFunction::tabulated(vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0], 2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn piecewise_is_continuous_and_inverts() {
        let s = ScalingFunction::piecewise(1.0, vec![1.0, 4.0], vec![2.0, 3.0, 2.5], 1.0).unwrap();
        for &b in &[1.0, 4.0] {
            assert!((s.eval(b * (1.0 - 1e-12)) / s.eval(b * (1.0 + 1e-12)) - 1.0).abs() < 1e-10);
        }
        assert!((s.eval(2.0) - 8.0).abs() < 1e-12);
        for &r in &[0.01, 0.7, 1.0, 2.5, 4.0, 9.0, 100.0] {
            assert!((s.inverse(s.eval(r)) / r - 1.0).abs() < 1e-12);
        }
    }
}
