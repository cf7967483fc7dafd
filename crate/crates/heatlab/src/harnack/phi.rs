//! `C_PHI` over a solution family and Hölder exponents from pairwise oscillation.

use super::{Cylinder, HarnackCylinders};
use crate::error::{Error, Result};
use crate::families::{rng, TestFamily};
use crate::forms::FormSchedule;
use crate::propagator::{solve_in, Domain, SolverConfig, Trajectory};
use crate::report::{CertReport, Status, Table, Witness};
use crate::space::{MetricMeasureGraph, ScalingFunction};

fn extreme(traj: &Trajectory, cyl: &Cylinder, pick: fn(f64, f64) -> f64, start: f64) -> Result<f64> {
    let mut acc = start;
    for k in cyl.nodes(&traj.times)? {
        for &v in &cyl.vertices {
            acc = pick(acc, traj.snapshots[k][v]);
        }
    }
    Ok(acc)
}

fn ratio(traj: &Trajectory, c: &HarnackCylinders) -> Result<(f64, f64)> {
    let sup = extreme(traj, &c.minus, f64::max, f64::NEG_INFINITY)?;
    let inf = extreme(traj, &c.plus, f64::min, f64::INFINITY)?;
    Ok((sup, inf))
}

/// `C_PHI = max_u sup_{Q^-} u / inf_{Q^+} u`; members with `inf ≤ 0` are listed and
/// skipped. With `hat` the same family is also measured on the hat cylinders.
pub fn phi_estimate(family: &[Trajectory], cyl: &HarnackCylinders, hat: Option<&HarnackCylinders>) -> Result<CertReport> {
    if family.is_empty() {
        return Err(Error::Empty("solution family"));
    }
    let mut table = Table::new(&["member", "sup_minus", "inf_plus", "ratio", "hat_ratio"]);
    let (mut best, mut arg, mut best_hat) = (f64::NEG_INFINITY, None, f64::NEG_INFINITY);
    let mut skipped = Vec::new();
    for (i, traj) in family.iter().enumerate() {
        let (sup, inf) = ratio(traj, cyl)?;
        if !(inf > 0.0) {
            skipped.push(i);
            table.push(vec![i as f64, sup, inf, f64::NAN, f64::NAN]);
            continue;
        }
        let r = sup / inf;
        let hr = match hat {
            Some(h) => {
                let (s, f) = ratio(traj, h)?;
                if f > 0.0 {
                    s / f
                } else {
                    f64::NAN
                }
            }
            None => f64::NAN,
        };
        if hr > best_hat {
            best_hat = hr;
        }
        if r > best {
            best = r;
            arg = Some(i);
        }
        table.push(vec![i as f64, sup, inf, r, hr]);
    }
    let mut rep = match arg {
        Some(i) => CertReport::measured("phi", best, &family[0].schedule)
            .with_witness(Witness { label: format!("member {i}"), ball: None, function: None }),
        None => CertReport::measured("phi", f64::INFINITY, &family[0].schedule)
            .with_status(Status::Infeasible)
            .note("every member vanishes somewhere on the later cylinder"),
    };
    rep = rep.value("members", family.len() as f64).value("skipped", skipped.len() as f64);
    if hat.is_some() {
        rep = rep.value("c_phi_hat", best_hat);
    }
    if !skipped.is_empty() {
        rep = rep.note(format!("skipped members with zero infimum: {skipped:?}"));
    }
    rep.table = Some(table);
    Ok(rep)
}

/// Up to `count` vertices of the cylinder's ball, evenly spread by index.
pub fn default_sources(cyl: &HarnackCylinders, count: usize) -> Vec<usize> {
    let vs = &cyl.q.vertices;
    if count == 0 || vs.is_empty() {
        return Vec::new();
    }
    if count >= vs.len() {
        return vs.clone();
    }
    (0..count).map(|i| vs[(i * (vs.len() - 1)) / (count - 1).max(1)]).collect()
}

/// Dirichlet kernel columns `p^B(·, a, y)` on `Q` for each source `y`: the evolutions
/// of `δ_y/μ(y)` killed outside the ball. A ball covering the graph runs globally.
pub fn kernel_family(
    schedule: &FormSchedule,
    cyl: &HarnackCylinders,
    sources: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    let g = schedule.reference().graph();
    let domain = if cyl.q.vertices.len() < g.len() {
        Domain::Dirichlet { vertices: cyl.q.vertices.clone() }
    } else {
        Domain::Global
    };
    let (s, t) = cyl.q.window;
    sources
        .iter()
        .map(|&y| {
            if !cyl.q.vertices.contains(&y) {
                return Err(Error::Invalid(format!("source {y} lies outside the cylinder ball")));
            }
            let mut f = vec![0.0; g.len()];
            f[y] = 1.0 / g.measure[y];
            solve_in(schedule, &f, s, t, cfg, &domain)
        })
        .collect()
}

/// Global evolutions of random data with entries in `[0, 1)`.
pub fn random_family(
    schedule: &FormSchedule,
    cyl: &HarnackCylinders,
    count: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    let n = schedule.reference().len();
    let fam = TestFamily::random_positive(n, count, 0.0, &mut rng(seed));
    let (s, t) = cyl.q.window;
    fam.functions.iter().map(|f| solve_in(schedule, f, s, t, cfg, &Domain::Global)).collect()
}

/// `Q' = (a + Ψ((1−δ)r), a + Ψ(r)) × δB`.
pub fn holder_cylinder(
    g: &MetricMeasureGraph,
    x: usize,
    a: f64,
    r: f64,
    psi: &ScalingFunction,
    delta: f64,
) -> Result<Cylinder> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!("need 0 < delta < 1, got {delta}")));
    }
    let pr = psi.eval(r);
    Cylinder::new(g, x, a, r, pr, (a + psi.eval((1.0 - delta) * r), a + pr), delta * r, "q'")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderOptions {
    /// Sampling caps on time nodes and vertices of `Q'`.
    pub max_nodes: usize,
    pub max_vertices: usize,
    pub bins: usize,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions { max_nodes: 24, max_vertices: 64, bins: 10 }
    }
}

fn spread(items: Vec<usize>, cap: usize) -> Vec<usize> {
    if items.len() <= cap || cap < 2 {
        return items;
    }
    (0..cap).map(|i| items[(i * (items.len() - 1)) / (cap - 1)]).collect()
}

/// Upper envelope of `|u(t,y) − u(t',y')| / sup|u|` against
/// `D = Ψ^{-1}(|t−t'|) + d(y,y')` in log-spaced bins, fitted by a log-log line whose
/// slope is `α̂` (capped to `(0, 1]`). `C` is the smallest constant with
/// `|Δu| ≤ C·sup|u|·(D/r)^α̂` over every sampled pair.
pub fn holder_estimate(
    g: &MetricMeasureGraph,
    traj: &Trajectory,
    q: &Cylinder,
    psi: &ScalingFunction,
    opts: &HolderOptions,
) -> Result<CertReport> {
    let nodes = spread(q.nodes(&traj.times)?, opts.max_nodes);
    let verts = spread(q.vertices.clone(), opts.max_vertices);
    let pts: Vec<(f64, usize, f64)> =
        nodes.iter().flat_map(|&k| verts.iter().map(move |&v| (traj.times[k], v, traj.snapshots[k][v]))).collect();
    let sup = pts.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let mut pairs = Vec::with_capacity(pts.len() * pts.len() / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i], pts[j]);
            let d = psi.inverse((a.0 - b.0).abs()) + g.d(a.1, b.1);
            if d > 0.0 {
                pairs.push((d / q.r, (a.2 - b.2).abs()));
            }
        }
    }
    let capped = |why: &str| {
        CertReport::measured("holder", 1.0, &traj.schedule)
            .with_status(Status::NotApplicable)
            .value("alpha", 1.0)
            .value("capped", 1.0)
            .note(format!("exponent reported as >= 1: {why}"))
    };
    let top = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    if pairs.is_empty() || !(sup > 0.0) || top <= 1e-12 * sup {
        return Ok(capped("constant trajectory on the cylinder"));
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ln();
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max).ln();
    let bins = opts.bins.max(3);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut env = vec![0.0f64; bins];
    for &(d, du) in &pairs {
        let b = (((d.ln() - lo) / width) as usize).min(bins - 1);
        env[b] = env[b].max(du / sup);
    }
    let mut table = Table::new(&["log_d", "log_osc"]);
    let pts: Vec<(f64, f64)> = env
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 1e-12)
        .map(|(b, &e)| (lo + (b as f64 + 0.5) * width, e.ln()))
        .collect();
    if pts.len() < 3 {
        return Ok(capped("too few oscillation levels to fit"));
    }
    for &(x, y) in &pts {
        table.push(vec![x, y]);
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let alpha = slope.clamp(1e-6, 1.0);
    let c = pairs.iter().map(|&(d, du)| du / (sup * d.powf(alpha))).fold(0.0, f64::max);
    let mut rep = CertReport::measured("holder", alpha, &traj.schedule)
        .value("alpha", alpha)
        .value("slope", slope)
        .value("r2", r2)
        .value("c", c)
        .value("pairs", pairs.len() as f64)
        .value("capped", if slope > 1.0 { 1.0 } else { 0.0 });
    if slope > 1.0 {
        rep = rep.note("fitted slope above 1; exponent capped at 1");
    }
    rep.table = Some(table);
    Ok(rep)
}
