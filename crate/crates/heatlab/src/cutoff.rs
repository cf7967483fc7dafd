//! Cutoff functions: linear plateaus, the annulus-layered construction with
//! geometric weights, and measured cutoff Sobolev constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{self, TestFamily};
use crate::forms::ReferenceForm;
use crate::linalg::{self, covering_lp, LpOutcome};
use crate::report::{BallTag, CertReport, Status, Witness};
use crate::space::{MetricMeasureGraph, ScalingFunction};

/// Default share of the annulus used by the layers.
pub const DEFAULT_LAYER_RATIO: f64 = 0.75;
/// Default ε for plateau cutoffs.
pub const DEFAULT_EPSILON: f64 = 0.125;
/// ε grid for sweeps.
pub const EPSILON_GRID: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Plateau,
    Layered {
        lambda: f64,
        layers: usize,
        c_lambda: f64,
        /// Inner radii offsets `r_n` of the used layers, `r_0 = 0` first.
        offsets: Vec<f64>,
        /// Weights `b_{n−1} − b_n`, the last one carrying the truncated tail.
        weights: Vec<f64>,
        /// A priori constant from the layer constants.
        #[serde(with = "crate::report::num")]
        c0_bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    pub values: Vec<f64>,
    pub center: usize,
    pub big_r: f64,
    pub r: f64,
    pub epsilon: f64,
    #[serde(default, with = "crate::report::num_opt")]
    pub c0: Option<f64>,
    #[serde(default)]
    pub c0_family: Option<String>,
    pub construction: Construction,
}

impl CutoffFunction {
    pub fn with_epsilon(mut self, eps: f64) -> Result<Self> {
        check_epsilon(eps)?;
        self.epsilon = eps;
        self.c0 = None;
        self.c0_family = None;
        Ok(self)
    }

    /// Stores the constant of a passing [`certify_csa`] report.
    pub fn certified(mut self, report: &CertReport) -> Self {
        if report.status.is_ok() {
            self.c0 = Some(report.constant);
            self.c0_family = Some(report.family.clone());
        }
        self
    }

    /// `A = B(x,R+r) \ B(x,R)`.
    pub fn annulus(&self, g: &MetricMeasureGraph) -> Vec<bool> {
        (0..g.len())
            .map(|y| {
                let d = g.d(self.center, y);
                d >= self.big_r && d < self.big_r + self.r
            })
            .collect()
    }

    /// `C₀ ε^{1−β₂/2}`, when certified.
    pub fn c0_eps(&self, psi: &ScalingFunction) -> Option<f64> {
        self.c0.map(|c| c * self.epsilon.powf(1.0 - psi.beta2 / 2.0))
    }

    pub fn ball_tag(&self) -> BallTag {
        BallTag { center: self.center, radius: self.big_r, width: self.r }
    }

    /// Checks the cutoff invariants to `tol`.
    pub fn check_invariants(&self, g: &MetricMeasureGraph, tol: f64) -> bool {
        self.values.len() == g.len()
            && (0..g.len()).all(|y| {
                let d = g.d(self.center, y);
                let v = self.values[y];
                (-tol..=1.0 + tol).contains(&v)
                    && (d >= self.big_r || (v - 1.0).abs() <= tol)
                    && (d < self.big_r + self.r || v.abs() <= tol)
            })
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("epsilon {eps} outside (0,1)")));
    }
    Ok(())
}

fn plateau_values(g: &MetricMeasureGraph, x: usize, inner: f64, width: f64) -> Vec<f64> {
    (0..g.len()).map(|y| ((inner + width - g.d(x, y)) / width).clamp(0.0, 1.0)).collect()
}

/// `ψ(y) = clamp((R+r−d(x,y))/r, 0, 1)`.
pub fn plateau_cutoff(g: &MetricMeasureGraph, x: usize, big_r: f64, r: f64) -> Result<CutoffFunction> {
    if x >= g.len() {
        return Err(Error::Vertex(x));
    }
    if !(r > 0.0) || !(big_r >= 0.0) {
        return Err(Error::Invalid(format!("need R ≥ 0 and r > 0, got R={big_r}, r={r}")));
    }
    if r < g.mesh * (1.0 - 1e-9) {
        return Err(Error::DegenerateAnnulus(format!("width {r} below mesh {}", g.mesh)));
    }
    Ok(CutoffFunction {
        values: plateau_values(g, x, big_r, r),
        center: x,
        big_r,
        r,
        epsilon: DEFAULT_EPSILON,
        c0: None,
        c0_family: None,
        construction: Construction::Plateau,
    })
}

/// Per-layer constants of plateau cutoffs, measured against
/// `∫ f² dΓ(φ,φ) ≤ c₁ ∫ dΓ(f,f) + (c₂/Ψ(s)) ∫ f² dμ` on the layer annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConstants {
    pub c1: f64,
    pub c2: f64,
    pub family: String,
    pub widths: Vec<f64>,
}

/// Layered cutoff with the default layer ratio.
pub fn layered_cutoff(
    g: &MetricMeasureGraph,
    x: usize,
    big_r: f64,
    r: f64,
    eps: f64,
    layers: &LayerConstants,
    psi: &ScalingFunction,
) -> Result<CutoffFunction> {
    layered_cutoff_with_ratio(g, x, big_r, r, eps, layers, psi, DEFAULT_LAYER_RATIO)
}

/// `ψ = Σ (b_{n−1} − b_n) ψ_n` with `b_n = e^{−nλ}`, `λ = log(1 + (ε/c₁)^{1/2})` and
/// layer widths `s_n = c_λ r e^{−nλ/β₂}` summing to `ratio · r`. Runs of layers narrower
/// than the mesh are merged and the tail below the mesh joins the last layer.
#[allow(clippy::too_many_arguments)]
pub fn layered_cutoff_with_ratio(
    g: &MetricMeasureGraph,
    x: usize,
    big_r: f64,
    r: f64,
    eps: f64,
    layers: &LayerConstants,
    psi: &ScalingFunction,
    ratio: f64,
) -> Result<CutoffFunction> {
    check_epsilon(eps)?;
    if x >= g.len() {
        return Err(Error::Vertex(x));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Invalid(format!("layer ratio {ratio} outside (0,1)")));
    }
    if !(r > 0.0) || !(big_r >= 0.0) {
        return Err(Error::Invalid(format!("need R ≥ 0 and r > 0, got R={big_r}, r={r}")));
    }
    if !(layers.c1 >= 0.0 && layers.c2 >= 0.0) {
        return Err(Error::Invalid("layer constants must be nonnegative".into()));
    }
    let beta2 = psi.beta2;
    let lambda = if layers.c1 > 0.0 { (1.0 + (eps / layers.c1).sqrt()).ln() } else { f64::INFINITY };
    let q = (-lambda / beta2).exp();
    let c_lambda = if lambda.is_finite() { (lambda / beta2).exp_m1() * ratio } else { f64::INFINITY };
    // s_n = ratio · r · (1 − q) q^{n−1}
    let width = |n: usize| ratio * r * (1.0 - q) * q.powi(n as i32 - 1);
    let b = |n: usize| if n == 0 { 1.0 } else { (-(n as f64) * lambda).exp() };
    let tol = g.mesh * (1.0 - 1e-9);
    let total = ratio * r;
    if total < tol {
        return Err(Error::DegenerateAnnulus(format!("layered share {total} of r below mesh {}", g.mesh)));
    }
    // consecutive layers narrower than the mesh are merged; the weight of a merged
    // layer is the sum of its members' weights
    let mut offsets = vec![0.0];
    let mut weights = Vec::new();
    let mut n = 0;
    loop {
        let first = n;
        let mut acc = 0.0;
        loop {
            n += 1;
            acc += width(n);
            if acc >= tol || b(n) < WEIGHT_FLOOR {
                break;
            }
        }
        let inner = offsets[offsets.len() - 1];
        let rest = total - inner - acc;
        if b(n) < WEIGHT_FLOOR || rest < tol {
            offsets.push(if b(n) < WEIGHT_FLOOR { inner + acc } else { total });
            weights.push(b(first));
            break;
        }
        offsets.push(inner + acc);
        weights.push(b(first) - b(n));
    }
    let count = weights.len();
    let mut values = vec![0.0; g.len()];
    for k in 0..count {
        let layer = plateau_values(g, x, big_r + offsets[k], offsets[k + 1] - offsets[k]);
        for (v, l) in values.iter_mut().zip(layer) {
            *v += weights[k] * l;
        }
    }
    for (y, v) in values.iter_mut().enumerate() {
        *v = if g.d(x, y) < big_r { 1.0 } else { v.clamp(0.0, 1.0) };
    }
    let c0_bound = if lambda.is_finite() {
        let e = lambda.exp_m1().powi(2) / c_lambda.powf(beta2);
        e * layers.c2 * psi.c_psi / eps.powf(1.0 - beta2 / 2.0)
    } else {
        layers.c2 * psi.c_psi / (ratio.powf(beta2) * eps.powf(1.0 - beta2 / 2.0))
    };
    Ok(CutoffFunction {
        values,
        center: x,
        big_r,
        r,
        epsilon: eps,
        c0: None,
        c0_family: None,
        construction: Construction::Layered { lambda, layers: count, c_lambda, offsets, weights, c0_bound },
    })
}

fn masked_sq(f: &[f64], mask: &[bool]) -> Vec<f64> {
    f.iter().zip(mask).map(|(v, &m)| if m { v * v } else { 0.0 }).collect()
}

fn mask_f(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
}

fn cache_path(dir: Option<&Path>, key: &str) -> Option<PathBuf> {
    let dir = dir?;
    let name: String = key.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    Some(dir.join(format!("layers-{name}.json")))
}

/// Measures `(c₁, c₂)` over plateau layers of widths `r/2, r/4, r/8` (those at
/// least one mesh wide) from the inner radius `R`, minimising `c₁ + c₂`.
/// Cached under `$HEATLAB_CACHE` when set.
pub fn measure_layer_constants(
    form: &ReferenceForm,
    x: usize,
    big_r: f64,
    r: f64,
    psi: &ScalingFunction,
    family: &TestFamily,
) -> Result<LayerConstants> {
    let dir = std::env::var_os("HEATLAB_CACHE").map(PathBuf::from);
    measure_layer_constants_in(dir.as_deref(), form, x, big_r, r, psi, family)
}

/// As [`measure_layer_constants`] with an explicit cache directory.
pub fn measure_layer_constants_in(
    cache: Option<&Path>,
    form: &ReferenceForm,
    x: usize,
    big_r: f64,
    r: f64,
    psi: &ScalingFunction,
    family: &TestFamily,
) -> Result<LayerConstants> {
    let g = form.graph();
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    let key = format!("{}-{}-{x}-{big_r}-{r}-{}-{}", g.family.label(), g.len(), psi.label(), family.id);
    if let Some(p) = cache_path(cache, &key) {
        if let Ok(text) = std::fs::read_to_string(&p) {
            if let Ok(c) = serde_json::from_str::<LayerConstants>(&text) {
                return Ok(c);
            }
        }
    }
    let widths: Vec<f64> =
        [r / 2.0, r / 4.0, r / 8.0].into_iter().filter(|&s| s >= g.mesh * (1.0 - 1e-9)).collect();
    if widths.is_empty() {
        return Err(Error::DegenerateAnnulus(format!("r/2 = {} below mesh {}", r / 2.0, g.mesh)));
    }
    let (mut rows, mut rhs) = (Vec::new(), Vec::new());
    for &s in &widths {
        let layer = plateau_values(g, x, big_r, s);
        let ann: Vec<bool> = (0..g.len()).map(|y| (big_r..big_r + s).contains(&g.d(x, y))).collect();
        let ones = mask_f(&ann);
        for f in &family.functions {
            let sq = masked_sq(f, &ann);
            let lhs = form.gamma_integral(&sq, &layer, &layer);
            let energy = form.gamma_integral(&ones, f, f);
            let zero = form.integral(&sq) / psi.eval(s);
            rows.push(vec![energy, zero]);
            rhs.push(lhs);
        }
    }
    let consts = match covering_lp(&rows, &rhs) {
        LpOutcome::Optimal { x: c, .. } => {
            LayerConstants { c1: c[0], c2: c[1], family: family.id.clone(), widths }
        }
        LpOutcome::Infeasible { row } => {
            return Err(Error::Invalid(format!("layer constants infeasible at row {row}")));
        }
    };
    if let Some(p) = cache_path(cache, &key) {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string_pretty(&consts)?)?;
    }
    Ok(consts)
}

/// Constant function, smooth ambient profiles and the lowest Neumann modes.
pub fn csa_family(form: &ReferenceForm, smooth: usize, modes: usize, seed: u64) -> Result<TestFamily> {
    let g = form.graph();
    let n = g.len();
    let mut rng = families::rng(seed);
    let mut fam = TestFamily::constant(n, 1.0).join(TestFamily::smooth(g, smooth, &mut rng));
    let modes = modes.min(n);
    if modes > 0 {
        let eig = linalg::sym_gen_eigen(form.stiffness(), &form.mass())?;
        let fs = (0..modes).map(|k| eig.vectors.column(k).iter().cloned().collect()).collect();
        fam = fam.join(TestFamily::new(format!("neumann{modes}"), fs));
    }
    Ok(fam)
}

/// Smallest `C₀` with
/// `∫_A f² dΓ(ψ,ψ) ≤ ε ∫_A ψ² dΓ(f,f) + (C₀ ε^{1−β₂/2}/Ψ(r)) ∫_A ψ f² dμ`
/// over the family, by rearranging each member.
pub fn certify_csa(
    form: &ReferenceForm,
    cut: &CutoffFunction,
    psi: &ScalingFunction,
    family: &TestFamily,
) -> Result<CertReport> {
    let g = form.graph();
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    if cut.values.len() != g.len() {
        return Err(Error::Dimension { expected: g.len(), got: cut.values.len() });
    }
    check_epsilon(cut.epsilon)?;
    if cut.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cutoff has non-finite values".into()));
    }
    let ann = cut.annulus(g);
    let ann_f = mask_f(&ann);
    let psi2: Vec<f64> = cut.values.iter().zip(&ann_f).map(|(p, m)| p * p * m).collect();
    let scale = cut.epsilon.powf(1.0 - psi.beta2 / 2.0) / psi.eval(cut.r);
    let mut c0: f64 = 0.0;
    let mut worst = None;
    let mut infeasible = None;
    let mut max_lhs: f64 = 0.0;
    for (i, f) in family.functions.iter().enumerate() {
        if f.len() != g.len() {
            return Err(Error::Dimension { expected: g.len(), got: f.len() });
        }
        let sq = masked_sq(f, &ann);
        let lhs = form.gamma_integral(&sq, &cut.values, &cut.values);
        let grad = cut.epsilon * form.gamma_integral(&psi2, f, f);
        let zero: f64 = (0..g.len()).map(|y| cut.values[y] * sq[y] * g.measure[y]).sum();
        max_lhs = max_lhs.max(lhs);
        let excess = lhs - grad;
        if excess <= 1e-14 * lhs.max(f64::MIN_POSITIVE) {
            continue;
        }
        if zero <= 0.0 {
            infeasible = Some(i);
            break;
        }
        let need = excess / (scale * zero);
        if need > c0 {
            c0 = need;
            worst = Some(i);
        }
    }
    let tag = cut.ball_tag();
    if let Some(i) = infeasible {
        return Ok(CertReport::measured("csa", f64::INFINITY, &family.id)
            .with_status(Status::Infeasible)
            .with_witness(Witness {
                label: format!("member {i} vanishes on the annulus with positive left side"),
                ball: Some(tag),
                function: Some(family.functions[i].clone()),
            }));
    }
    let mut rep = CertReport::measured("csa", c0, &family.id)
        .value("epsilon", cut.epsilon)
        .value("c0_eps", c0 * cut.epsilon.powf(1.0 - psi.beta2 / 2.0))
        .value("max_lhs", max_lhs)
        .value("members", family.len() as f64)
        .tag("construction", construction_label(&cut.construction));
    if let Construction::Layered { c0_bound, lambda, layers, .. } = &cut.construction {
        rep = rep.value("c0_bound", *c0_bound).value("lambda", *lambda).value("layers", *layers as f64);
    }
    let witness = match worst {
        Some(i) => Witness {
            label: format!("member {i}"),
            ball: Some(tag),
            function: Some(family.functions[i].clone()),
        },
        None => Witness { label: "no member needs a zero-order term".into(), ball: Some(tag), function: None },
    };
    Ok(rep.with_witness(witness))
}

fn construction_label(c: &Construction) -> String {
    match c {
        Construction::Plateau => "plateau".into(),
        Construction::Layered { layers, .. } => format!("layered({layers})"),
    }
}

/// Checks the exponential variant for `φ = e^{Mψ}`:
/// `∫ f² dΓ(φ,φ) ≤ (2ε/(1−2ε)) M² ∫_A φ² dΓ(f,f) + (C₀ε^{1−β₂/2}/((1−2ε)Ψ(r))) M² ∫_A φ² f² dμ`.
/// The chain-rule defect `∫ f² |Γ(φ,φ) − M²φ²Γ(ψ,ψ)| dμ` is allowed additively.
pub fn exp_cutoff_check(
    form: &ReferenceForm,
    cut: &CutoffFunction,
    psi: &ScalingFunction,
    m: f64,
    f: &[f64],
) -> Result<CertReport> {
    let g = form.graph();
    let eps = cut.epsilon;
    if eps >= 0.5 {
        return Err(Error::Invalid(format!("exponential cutoff check needs ε < 1/2, got {eps}")));
    }
    let c0_eps = cut.c0_eps(psi).ok_or_else(|| Error::Invalid("cutoff carries no certified C0".into()))?;
    if f.len() != g.len() {
        return Err(Error::Dimension { expected: g.len(), got: f.len() });
    }
    let phi: Vec<f64> = cut.values.iter().map(|p| (m * p).exp()).collect();
    let ann = cut.annulus(g);
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let lhs = form.gamma_integral(&f2, &phi, &phi);
    let phi2_a: Vec<f64> = phi.iter().zip(&ann).map(|(p, &a)| if a { p * p } else { 0.0 }).collect();
    let grad = form.gamma_integral(&phi2_a, f, f);
    let zero: f64 = (0..g.len()).map(|y| phi2_a[y] * f2[y] * g.measure[y]).sum();
    let m2 = m * m;
    let rhs = 2.0 * eps / (1.0 - 2.0 * eps) * m2 * grad + c0_eps / ((1.0 - 2.0 * eps) * psi.eval(cut.r)) * m2 * zero;
    let gphi = form.energy_measure(&phi, &phi)?;
    let gpsi = form.energy_measure(&cut.values, &cut.values)?;
    let allowance: f64 =
        (0..g.len()).map(|y| f2[y] * (gphi[y] - m2 * phi[y] * phi[y] * gpsi[y]).abs() * g.measure[y]).sum();
    let ok = lhs <= (rhs + allowance) * (1.0 + 1e-12) + 1e-300;
    Ok(CertReport::measured("exp-cutoff", lhs, "single")
        .with_status(if ok { Status::Pass } else { Status::Fail })
        .value("lhs", lhs)
        .value("rhs", rhs)
        .value("margin", rhs - lhs)
        .value("chain_allowance", allowance)
        .value("m", m)
        .with_witness(Witness { label: "f".into(), ball: Some(cut.ball_tag()), function: Some(f.to_vec()) }))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::space::{build_space, SpaceSpec};

    fn form(spec: SpaceSpec) -> ReferenceForm {
        ReferenceForm::new(Arc::new(build_space(&spec).unwrap()))
    }

    #[test]
    fn plateau_hand_value() {
        let f = form(SpaceSpec::path(8));
        let c = plateau_cutoff(f.graph(), 0, 1.5, 3.0).unwrap();
        assert!((c.values[3] - 0.5).abs() < 1e-15);
        assert_eq!(c.values[0], 1.0);
        assert_eq!(c.values[1], 1.0);
        assert_eq!(c.values[5], 0.0);
        assert!(c.check_invariants(f.graph(), 0.0));
        assert!(matches!(plateau_cutoff(f.graph(), 0, 1.0, 0.5), Err(Error::DegenerateAnnulus(_))));
    }

    #[test]
    fn layered_sandwich_and_plateau() {
        let f = form(SpaceSpec::path(64).with_span(1.0));
        let g = f.graph();
        let psi = ScalingFunction::diffusive();
        let lc = LayerConstants { c1: 0.5, c2: 1.0, family: "hand".into(), widths: vec![] };
        let c = layered_cutoff(g, 32, 0.125, 0.25, 0.5, &lc, &psi).unwrap();
        assert!(c.check_invariants(g, 1e-15));
        let Construction::Layered { offsets, weights, .. } = &c.construction else { panic!() };
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r_prime = *offsets.last().unwrap();
        assert!(r_prime < 0.75 * 0.25 + 1e-12);
        let inner = plateau_values(g, 32, 0.125, offsets[1]);
        let k = offsets.len() - 1;
        let outer = plateau_values(g, 32, 0.125 + offsets[k - 1], offsets[k] - offsets[k - 1]);
        for y in 0..g.len() {
            assert!(inner[y] <= c.values[y] + 1e-12 && c.values[y] <= outer[y] + 1e-12);
        }
    }

    #[test]
    fn huge_lambda_is_single_layer() {
        let f = form(SpaceSpec::path(64).with_span(1.0));
        let g = f.graph();
        let psi = ScalingFunction::diffusive();
        let lc = LayerConstants { c1: 1e-30, c2: 1.0, family: "hand".into(), widths: vec![] };
        let c = layered_cutoff(g, 32, 0.125, 0.25, 0.5, &lc, &psi).unwrap();
        let Construction::Layered { offsets, .. } = &c.construction else { panic!() };
        let single = plateau_values(g, 32, 0.125, offsets[1]);
        let diff = c.values.iter().zip(&single).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6);
    }

    #[test]
    fn csa_trivial_members() {
        let f = form(SpaceSpec::path(32));
        let g = f.graph();
        let psi = ScalingFunction::diffusive();
        let c = plateau_cutoff(g, 16, 4.0, 4.0).unwrap();
        let outside: Vec<f64> = (0..g.len()).map(|y| if g.d(16, y) >= 8.0 { 1.0 } else { 0.0 }).collect();
        let rep = certify_csa(&f, &c, &psi, &TestFamily::new("out", vec![outside])).unwrap();
        assert_eq!(rep.constant, 0.0);
        // constant member: no gradient term, direct division
        let rep = certify_csa(&f, &c, &psi, &TestFamily::constant(g.len(), 2.0)).unwrap();
        let ann = c.annulus(g);
        let lhs: f64 = f.gamma_integral(&mask_f(&ann).iter().map(|m| 4.0 * m).collect::<Vec<_>>(), &c.values, &c.values);
        let zero: f64 = (0..g.len()).filter(|&y| ann[y]).map(|y| 4.0 * c.values[y] * g.measure[y]).sum();
        let expect = lhs * psi.eval(4.0) / zero;
        assert!((rep.constant - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn exp_check_two_vertex() {
        let f = form(SpaceSpec::path(1));
        let psi = ScalingFunction::diffusive();
        let cut = CutoffFunction {
            values: vec![1.0, 0.0],
            center: 0,
            big_r: 0.5,
            r: 0.5,
            epsilon: 0.25,
            c0: Some(1.0),
            c0_family: None,
            construction: Construction::Plateau,
        };
        let m = 1.0f64;
        let rep = exp_cutoff_check(&f, &cut, &psi, m, &[1.0, 1.0]).unwrap();
        let lhs = (m.exp() - 1.0).powi(2);
        assert!((rep.get("lhs").unwrap() - lhs).abs() < 1e-14);
        assert_eq!(rep.get("rhs").unwrap(), 0.0);
        let allow = (0.5 * lhs - 0.5 * m.exp().powi(2)).abs() + (0.5 * lhs - 0.5).abs();
        assert!((rep.get("chain_allowance").unwrap() - allow).abs() < 1e-14);
        let zero = exp_cutoff_check(&f, &cut, &psi, 0.0, &[1.0, 1.0]).unwrap();
        assert_eq!(zero.get("lhs").unwrap(), 0.0);
        assert!(zero.passed());
        assert!(exp_cutoff_check(&f, &CutoffFunction { epsilon: 0.5, ..cut }, &psi, 1.0, &[1.0, 1.0]).is_err());
    }
}
