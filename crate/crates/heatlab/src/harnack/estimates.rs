//! Energy, mean-value and log-lemma measurements on a computed trajectory.

use serde::{Deserialize, Serialize};

use super::{window_integral, Cylinder, Side};
use crate::error::{Error, Result};
use crate::forms::ReferenceForm;
use crate::propagator::Trajectory;
use crate::report::{CertReport, Table, Witness};
use crate::space::{MetricMeasureGraph, ScalingFunction};

/// Relative floor `ε/sup u` used by the log and negative-power paths.
pub const DEFAULT_FLOOR: f64 = 1e-12;

fn sup_on(traj: &Trajectory, cyl: &Cylinder) -> Result<f64> {
    let nodes = cyl.nodes(&traj.times)?;
    Ok(nodes
        .iter()
        .flat_map(|&k| cyl.vertices.iter().map(move |&v| traj.snapshots[k][v].abs()))
        .fold(0.0, f64::max))
}

fn check_nonnegative(traj: &Trajectory, cyl: &Cylinder, sup: f64) -> Result<()> {
    let tol = 1e-9 * sup.max(f64::MIN_POSITIVE);
    for k in cyl.nodes(&traj.times)? {
        for &v in &cyl.vertices {
            let u = traj.snapshots[k][v];
            if u < -tol {
                return Err(Error::Invalid(format!("solution is negative ({u:e}) at vertex {v}, node {k}")));
            }
        }
    }
    Ok(())
}

/// `u ↦ u_ε^p` with `u_ε = max(u,0) + ε`.
fn power_map(p: f64, eps: f64) -> impl Fn(f64) -> f64 {
    move |u: f64| (u.max(0.0) + eps).powf(p)
}

/// Absolute floor: the relative floor times `sup u`, required positive when `p < 1`.
fn floor_for(p: f64, floor: f64, sup: f64) -> Result<f64> {
    if p < 1.0 {
        if !(floor > 0.0) {
            return Err(Error::Invalid(format!("p = {p} needs a positive floor")));
        }
        Ok(floor * sup)
    } else {
        Ok(floor.max(0.0) * sup)
    }
}

/// `∫∫_{cyl} f(u) dμ dt` with the time integral of the linear interpolant.
fn space_time(g: &MetricMeasureGraph, traj: &Trajectory, cyl: &Cylinder, f: &impl Fn(f64) -> f64) -> Result<f64> {
    let series: Vec<f64> =
        traj.snapshots.iter().map(|u| cyl.vertices.iter().map(|&v| f(u[v]) * g.measure[v]).sum()).collect();
    window_integral(&traj.times, &series, cyl.window.0, cyl.window.1)
}

/// Measured prefactor of the energy estimate:
/// `[sup_{t∈I'} ∫u^pψ² + ∫_{I'}∫ψ²dΓ(u^{p/2},u^{p/2})] / ∫∫_{outer} u^p`,
/// where `I'` is the window of `inner` and the gradient weight is one.
pub fn energy_estimate_check(
    form: &ReferenceForm,
    traj: &Trajectory,
    cutoff: &[f64],
    p: f64,
    inner: &Cylinder,
    outer: &Cylinder,
    floor: f64,
) -> Result<CertReport> {
    let g = form.graph();
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Invalid(format!("energy estimate needs p != 0, got {p}")));
    }
    if cutoff.len() != g.len() {
        return Err(Error::Dimension { expected: g.len(), got: cutoff.len() });
    }
    let sup = sup_on(traj, outer)?;
    check_nonnegative(traj, outer, sup)?;
    let eps = floor_for(p, floor, sup)?;
    let up = power_map(p, eps);
    let half = power_map(p / 2.0, eps);
    let psi2: Vec<f64> = cutoff.iter().map(|c| c * c).collect();

    let mut sup_term = 0.0f64;
    for k in inner.nodes(&traj.times)? {
        let v: f64 = (0..g.len()).map(|x| up(traj.snapshots[k][x]) * psi2[x] * g.measure[x]).sum();
        sup_term = sup_term.max(v);
    }
    let grad: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|u| {
            let w: Vec<f64> = u.iter().map(|&s| half(s)).collect();
            form.gamma_integral(&psi2, &w, &w)
        })
        .collect();
    let grad_term = window_integral(&traj.times, &grad, inner.window.0, inner.window.1)?;
    let driver = space_time(g, traj, outer, &up)?;
    let prefactor = if driver > 0.0 { (sup_term + grad_term) / driver } else { f64::INFINITY };
    Ok(CertReport::measured("energy-estimate", prefactor, &traj.schedule)
        .value("p", p)
        .value("sup_term", sup_term)
        .value("gradient_term", grad_term)
        .value("driver", driver)
        .value("floor", eps)
        .tag("inner", inner.label.clone())
        .tag("outer", outer.label.clone()))
}

/// Constants entering the mean-value bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MveShape {
    pub a1: f64,
    pub a2: f64,
    pub beta2: f64,
    pub kappa: f64,
    /// Use the supersolution form for `0 < p < 1` (negative `p` always does).
    #[serde(default)]
    pub supersolution: bool,
}

impl Default for MveShape {
    fn default() -> Self {
        MveShape { a1: 1.0, a2: 1.0, beta2: 2.0, kappa: 2.0, supersolution: false }
    }
}

impl MveShape {
    fn exponent(&self) -> f64 {
        (2.0 * self.kappa - 1.0) / (self.kappa - 1.0)
    }
}

/// `[(A₁ + A₂Ψ(Δδ·r))·Δδ^{−β₂}·P + 1/Δσ]^{(2κ−1)/(κ−1)}` with `P = p^{β₂}` for
/// `p ≥ 2`, `2^{β₂}` for a subsolution with `0 < p < 2`, and `1 + |p|^{β₂}` for
/// supersolutions. Numeric prefactors outside the bracket are left in `A`.
pub fn mve_bracket(shape: &MveShape, p: f64, d_delta: f64, d_sigma: f64, psi_gap: f64) -> f64 {
    let b2 = shape.beta2;
    let e = shape.exponent();
    let power = if p < 0.0 || (shape.supersolution && p < 1.0) {
        1.0 + p.abs().powf(b2)
    } else if p >= 2.0 {
        p.powf(b2)
    } else {
        2f64.powf(b2)
    };
    ((shape.a1 + shape.a2 * psi_gap) * d_delta.powf(-b2) * power + 1.0 / d_sigma).powf(e)
}

/// `A = sup_{inner} u^p · Ψ(r)μ(B) / (bracket · ∫∫_{outer} u^p)`, where
/// `B = B(x, r)` and the gaps `Δδ, Δσ` are read off the two cylinders.
#[allow(clippy::too_many_arguments)]
pub fn mve_check(
    g: &MetricMeasureGraph,
    traj: &Trajectory,
    p: f64,
    inner: &Cylinder,
    outer: &Cylinder,
    psi: &ScalingFunction,
    shape: &MveShape,
    floor: f64,
) -> Result<CertReport> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Invalid(format!("mean-value check needs p != 0, got {p}")));
    }
    if !(shape.kappa > 1.0) {
        return Err(Error::Invalid(format!("kappa = {} must exceed 1", shape.kappa)));
    }
    let d_delta = (outer.ball_radius - inner.ball_radius) / outer.r;
    let d_sigma = (outer.duration() - inner.duration()) / outer.psi_r;
    if !(d_delta > 0.0 && d_sigma > 0.0) {
        return Err(Error::Invalid("inner cylinder must be strictly smaller than the outer one".into()));
    }
    let sup = sup_on(traj, outer)?;
    check_nonnegative(traj, outer, sup)?;
    let eps = floor_for(p, floor, sup)?;
    let up = power_map(p, eps);
    let mut top = 0.0f64;
    for k in inner.nodes(&traj.times)? {
        for &v in &inner.vertices {
            top = top.max(up(traj.snapshots[k][v]));
        }
    }
    let driver = space_time(g, traj, outer, &up)?;
    let bracket = mve_bracket(shape, p, d_delta, d_sigma, psi.eval(d_delta * outer.r));
    let vol = g.volume(outer.center, outer.r);
    let a = if driver > 0.0 { top * outer.psi_r * vol / (bracket * driver) } else { f64::INFINITY };
    Ok(CertReport::measured("mean-value", a, &traj.schedule)
        .value("p", p)
        .value("sup", top)
        .value("driver", driver)
        .value("bracket", bracket)
        .value("ball_volume", vol)
        .value("floor", eps))
}

/// Geometric grid of `count` levels between `lo` and `hi`.
pub fn lambda_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// `sup_λ λ·μ̄{(t,z) ∈ K : ±(log u_ε + c) > λ} / (Ψ(r)μ(B))` with `c` the
/// `ψ²`-weighted mean of `−log u_ε` at the anchor time. `Side::Plus` counts
/// `log u_ε < −λ − c`, `Side::Minus` counts `log u_ε > λ − c`.
#[allow(clippy::too_many_arguments)]
pub fn log_lemma_stat(
    g: &MetricMeasureGraph,
    traj: &Trajectory,
    cutoff: &[f64],
    k: &Cylinder,
    side: Side,
    floor: f64,
    lambdas: &[f64],
) -> Result<CertReport> {
    if lambdas.is_empty() {
        return Err(Error::Empty("lambda grid"));
    }
    if cutoff.len() != g.len() {
        return Err(Error::Dimension { expected: g.len(), got: cutoff.len() });
    }
    let sup = sup_on(traj, k)?;
    check_nonnegative(traj, k, sup)?;
    let eps = floor.max(0.0) * sup;
    let log_u = |u: f64| -> Result<f64> {
        let v = u.max(0.0) + eps;
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::Invalid("log lemma needs a strictly positive solution or a floor".into()))
        }
    };
    let at_anchor = traj.at(k.anchor);
    let (mut num, mut den) = (0.0, 0.0);
    for x in 0..g.len() {
        let w = cutoff[x] * cutoff[x] * g.measure[x];
        if w > 0.0 {
            num -= log_u(at_anchor[x])? * w;
            den += w;
        }
    }
    if !(den > 0.0) {
        return Err(Error::Empty("cutoff support"));
    }
    let c = num / den;
    let sign = match side {
        Side::Plus => -1.0,
        Side::Minus => 1.0,
    };
    let logs: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|u| k.vertices.iter().map(|&v| log_u(u[v]).map(|l| sign * (l + c))).collect())
        .collect::<Result<_>>()?;
    let norm = k.psi_r * g.volume(k.center, k.r);
    let mut table = Table::new(&["lambda", "measure", "statistic"]);
    let (mut best, mut arg) = (0.0f64, lambdas[0]);
    for &lam in lambdas {
        let series: Vec<f64> = logs
            .iter()
            .map(|row| row.iter().zip(&k.vertices).filter(|(s, _)| **s > lam).map(|(_, &v)| g.measure[v]).sum())
            .collect();
        let m = window_integral(&traj.times, &series, k.window.0, k.window.1)?;
        let stat = lam * m / norm;
        table.push(vec![lam, m, stat]);
        if stat > best {
            best = stat;
            arg = lam;
        }
    }
    let mut rep = CertReport::measured("log-lemma", best, &traj.schedule)
        .value("c", c)
        .value("lambda", arg)
        .value("floor", eps)
        .tag("side", format!("{side:?}").to_lowercase())
        .with_witness(Witness { label: format!("lambda={arg}"), ball: None, function: None });
    rep.table = Some(table);
    Ok(rep)
}
