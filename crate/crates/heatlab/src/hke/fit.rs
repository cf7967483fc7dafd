use super::RateFunction;
use crate::error::{Error, Result};
use crate::propagator::KernelMatrix;
use crate::report::{CertReport, Status, Table, Witness};
use crate::space::{MetricMeasureGraph, ScalingFunction};

/// Entries below this are left out of log-domain fits.
pub const TINY_KERNEL: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// `α − c`.
    pub growth: f64,
    /// Upper clip for `τ`; the graph radius when absent.
    pub clip: Option<f64>,
    /// Candidate off-diagonal constants `C'`.
    pub c_prime_grid: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { growth: 0.0, clip: None, c_prime_grid: (-4..=8).map(|k| 2f64.powi(k)).collect() }
    }
}

struct Point {
    x: usize,
    y: usize,
    dt: f64,
    /// `p·V(x,τ)^{1/2}V(y,τ)^{1/2}·e^{−(α−c)(t−s)}`.
    base: f64,
}

/// `p·√(V(x,τ)V(y,τ))·e^{−(α−c)(t−s)}` for every entry above [`TINY_KERNEL`], and the count left out.
fn collect_points(
    g: &MetricMeasureGraph,
    psi: &ScalingFunction,
    kernels: &[KernelMatrix],
    opts: &FitOptions,
) -> Result<(Vec<Point>, usize)> {
    if kernels.is_empty() {
        return Err(Error::Empty("kernel family"));
    }
    let n = g.len();
    let clip = opts.clip.unwrap_or_else(|| g.radius()).max(g.mesh);
    let mut pts = Vec::new();
    let mut excluded = 0usize;
    for k in kernels {
        if k.len() != n {
            return Err(Error::Dimension { expected: n, got: k.len() });
        }
        let dt = k.t - k.s;
        if !(dt > 0.0) {
            return Err(Error::Invalid("kernel spans no time".into()));
        }
        let tau = psi.inverse(dt / 2.0).clamp(g.mesh, clip);
        let vol: Vec<f64> = (0..n).map(|x| g.volume(x, tau)).collect();
        let decay = (-opts.growth * dt).exp();
        for x in 0..n {
            for y in 0..n {
                let p = k.get(y, x);
                if p < TINY_KERNEL {
                    excluded += 1;
                    continue;
                }
                pts.push(Point { x, y, dt, base: p * (vol[x] * vol[y]).sqrt() * decay });
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::Empty("fit set"));
    }
    Ok((pts, excluded))
}

/// Smallest `C` with `p(t,y,s,x) ≤ C exp(−Φ_{β₂}(d, C'(t−s)) + (α−c)(t−s)) / √(V(x,τ)V(y,τ))`,
/// `τ = Ψ^{-1}((t−s)/2)` clipped to `[mesh, clip]`, over every entry of every kernel.
/// `C'` is the smallest grid value whose `C` is within twice the decay-free constant;
/// the diagonal is also fitted alone.
pub fn upper_hke_fit(
    g: &MetricMeasureGraph,
    psi: &ScalingFunction,
    kernels: &[KernelMatrix],
    opts: &FitOptions,
) -> Result<CertReport> {
    let (pts, excluded) = collect_points(g, psi, kernels, opts)?;
    let rate = RateFunction::phi_beta(psi.clone());
    let argmax = |f: &dyn Fn(&Point) -> f64, sel: &dyn Fn(&Point) -> bool| -> (f64, Option<usize>) {
        pts.iter()
            .enumerate()
            .filter(|(_, p)| sel(p))
            .map(|(i, p)| (f(p), Some(i)))
            .fold((0.0, None), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (c_diag, diag_at) = argmax(&|p| p.base, &|p| p.x == p.y);
    let (c_flat, _) = argmax(&|p| p.base, &|_| true);

    let mut table = Table::new(&["c_prime", "c"]);
    let mut chosen = None;
    for &cp in &opts.c_prime_grid {
        let f = |p: &Point| -> f64 {
            let phi = rate.rate(g.d(p.x, p.y), cp * p.dt).unwrap_or(0.0);
            p.base * phi.exp()
        };
        let (c, at) = argmax(&f, &|_| true);
        table.push(vec![cp, c]);
        if chosen.is_none() && c <= 2.0 * c_flat {
            chosen = Some((cp, c, at));
        }
    }
    let (cp, c, at) = chosen.unwrap_or_else(|| {
        let last = table.rows.last().unwrap();
        (last[0], last[1], None)
    });
    let label = |i: Option<usize>| {
        i.map_or("none".to_string(), |i| format!("x={} y={} dt={}", pts[i].x, pts[i].y, pts[i].dt))
    };
    let mut rep = CertReport::measured("upper-hke", c, "kernel-family")
        .value("c", c)
        .value("c_prime", cp)
        .value("c_diag", c_diag)
        .value("c_flat", c_flat)
        .value("excluded", excluded as f64)
        .tag("diag_binding", label(diag_at))
        .with_witness(Witness { label: label(at), ball: None, function: None });
    if let Some(i) = diag_at {
        rep = rep.value("diag_binding_dt", pts[i].dt);
    }
    if excluded > 0 {
        rep = rep.note(format!("{excluded} entries below {TINY_KERNEL:e} left out"));
    }
    rep.table = Some(table);
    Ok(rep)
}

/// Per-entry ratios `p / (exp(−Φ_{β₂}(d, C'(t−s)) + (α−c)(t−s)) / √(V(x,τ)V(y,τ)))` at a
/// fixed `C'`, one row per kernel entry: `t − s, x, y, d, ratio`.
pub fn upper_hke_points(
    g: &MetricMeasureGraph,
    psi: &ScalingFunction,
    kernels: &[KernelMatrix],
    opts: &FitOptions,
    c_prime: f64,
) -> Result<Table> {
    let (pts, _) = collect_points(g, psi, kernels, opts)?;
    let rate = RateFunction::phi_beta(psi.clone());
    let mut table = Table::new(&["dt", "x", "y", "d", "ratio"]);
    for p in &pts {
        let d = g.d(p.x, p.y);
        table.push(vec![p.dt, p.x as f64, p.y as f64, d, p.base * rate.rate(d, c_prime * p.dt)?.exp()]);
    }
    Ok(table)
}

/// Largest `c'` with `p^D_B(t,y,s,x) ≥ c'/V(x, Ψ^{-1}(t−s) ∧ R_x)` on the near-diagonal
/// set `d(x,y) ≤ εΨ^{-1}(t−s)`, `x, y ∈ B(a,(1−ε)r)`, `ε(t−s) ≤ Ψ(r)`, with `R_x` the
/// distance to the complement of `B = B(a,r)`. Kernels past the time limit are skipped. On a
/// geodesic space the off-diagonal pairs then give the smallest `C''` with
/// `p ≥ c' exp(−C''Φ(d, t−s))/V` (`c'' = 1`).
pub fn lower_hke_fit(
    g: &MetricMeasureGraph,
    psi: &ScalingFunction,
    kernels: &[KernelMatrix],
    center: usize,
    radius: f64,
    eps: f64,
) -> Result<CertReport> {
    if kernels.is_empty() {
        return Err(Error::Empty("kernel family"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let mask = g.in_ball(center, radius);
    let inside = g.ball(center, (1.0 - eps) * radius);
    let horizon = psi.eval(radius) / eps;
    let mut skipped = 0usize;
    let reach: Vec<f64> = (0..g.len()).map(|x| g.distance_to_complement(x, &mask)).collect();
    let mut near = Vec::new();
    let mut far = Vec::new();
    for k in kernels {
        let dt = k.t - k.s;
        if dt > horizon * (1.0 + 1e-12) {
            skipped += 1;
            continue;
        }
        let scale = psi.inverse(dt);
        for &x in &inside {
            let v = g.volume(x, scale.min(reach[x]));
            for &y in &inside {
                let p = k.get(y, x);
                let d = g.d(x, y);
                if d <= eps * scale {
                    if !(p > 0.0) {
                        return Err(Error::Invalid(format!(
                            "kernel entry {p:e} at ({y}, {x}) is not positive; check positivity first"
                        )));
                    }
                    near.push((x, y, dt, p * v));
                } else {
                    far.push((x, y, dt, p * v));
                }
            }
        }
    }
    if near.is_empty() {
        return Err(Error::Empty("near-diagonal fit set"));
    }
    let &(bx, by, bt, c1) = near.iter().min_by(|a, b| a.3.total_cmp(&b.3)).unwrap();
    let mut rep = CertReport::measured("lower-hke", c1, "dirichlet-kernels")
        .value("c_prime", c1)
        .value("near_points", near.len() as f64)
        .value("skipped_kernels", skipped as f64)
        .with_witness(Witness { label: format!("x={bx} y={by} dt={bt}"), ball: None, function: None });
    if !g.is_geodesic() {
        return Ok(rep
            .tag("off_diagonal", "not-applicable")
            .note("metric is not geodesic; off-diagonal lower bound not fitted"));
    }
    let phi = RateFunction::phi(psi.clone());
    let mut c3 = 0.0f64;
    let mut vanished = 0usize;
    for &(x, y, dt, pv) in &far {
        if !(pv > 0.0) {
            vanished += 1;
            continue;
        }
        let need = -(pv / c1).ln();
        if need > 0.0 {
            c3 = c3.max(need / phi.rate(g.d(x, y), dt)?);
        }
    }
    rep = rep
        .value("c_double_prime", 1.0)
        .value("c_triple_prime", c3)
        .value("far_points", far.len() as f64)
        .tag("off_diagonal", "fitted");
    if vanished > 0 {
        rep = rep.with_status(Status::Fail).note(format!("{vanished} off-diagonal entries vanish inside the ball"));
    }
    Ok(rep)
}
