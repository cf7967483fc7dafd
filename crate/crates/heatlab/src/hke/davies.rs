use crate::error::{Error, Result};
use crate::forms::FormSchedule;
use crate::propagator::{solve_on_grid, time_grid, Domain, SolverConfig};
use crate::report::{CertReport, Status, Table, Witness};
use crate::space::ScalingFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct DaviesOptions {
    /// Elapsed times `t − s`.
    pub taus: Vec<f64>,
    /// `α − c`, the exponential growth allowed by the contraction bound.
    pub growth: f64,
    /// Test functions; normalized indicators of `B(x, d/4)` and `B(y, d/4)` by default.
    pub f1: Option<Vec<f64>>,
    pub f2: Option<Vec<f64>>,
}

impl DaviesOptions {
    pub fn geometric(lo: f64, hi: f64, count: usize) -> Self {
        let taus = if count < 2 {
            vec![lo]
        } else {
            (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
        };
        DaviesOptions { taus, growth: 0.0, f1: None, f2: None }
    }
}

fn unit_indicator(measure: &[f64], set: &[usize]) -> Vec<f64> {
    let mass: f64 = set.iter().map(|&v| measure[v]).sum();
    let mut f = vec![0.0; measure.len()];
    for &v in set {
        f[v] = 1.0 / mass.sqrt();
    }
    f
}

/// Smallest `C'` with `⟨T^s_{s+τ} f₁, f₂⟩ ≤ ‖f₁‖‖f₂‖ exp(−Φ_{β₂}(d, C'τ) + (α−c)τ)` on
/// every `τ` of the grid. Since `Φ_{β₂}(d, u) = K (Ψ(d)/u)^{1/(β₂−1)}` the bound at one
/// `τ` is met exactly when `C' ≥ Ψ(d) (K/L)^{β₂−1} / τ`, `L = −log(pairing) + (α−c)τ`.
/// Also reports the slope of `log p(τ,y,x)/p(τ,x,x)` against `d²/τ`.
pub fn davies_gaffney_check(
    schedule: &FormSchedule,
    psi: &ScalingFunction,
    x: usize,
    y: usize,
    s: f64,
    cfg: &SolverConfig,
    opts: &DaviesOptions,
) -> Result<CertReport> {
    let g = schedule.reference().graph();
    let n = g.len();
    for v in [x, y] {
        if v >= n {
            return Err(Error::Vertex(v));
        }
    }
    let d = g.d(x, y);
    if !(d > 0.0) {
        return Err(Error::Invalid("Davies-Gaffney needs d(x, y) > 0".into()));
    }
    if opts.taus.is_empty() || opts.taus.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Invalid("elapsed times must be positive".into()));
    }
    let (b1, b2) = (g.ball(x, d / 4.0), g.ball(y, d / 4.0));
    if b1.iter().any(|v| b2.contains(v)) {
        return Err(Error::Invalid("support balls overlap at this mesh".into()));
    }
    let f1 = opts.f1.clone().unwrap_or_else(|| unit_indicator(&g.measure, &b1));
    let f2 = opts.f2.clone().unwrap_or_else(|| unit_indicator(&g.measure, &b2));
    for f in [&f1, &f2] {
        if f.len() != n {
            return Err(Error::Dimension { expected: n, got: f.len() });
        }
    }
    let norm = |f: &[f64]| f.iter().zip(&g.measure).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
    let (n1, n2) = (norm(&f1), norm(&f2));

    let tmax = opts.taus.iter().cloned().fold(0.0, f64::max);
    let mut grid = time_grid(schedule, s, s + tmax, cfg)?;
    grid.extend(opts.taus.iter().map(|t| s + t));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let node = |t: f64| grid.iter().position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0)).unwrap();
    let u = solve_on_grid(schedule, &f1, &grid, cfg.scheme, &Domain::Global)?;
    let mut delta = vec![0.0; n];
    delta[x] = 1.0 / g.measure[x];
    let col = solve_on_grid(schedule, &delta, &grid, cfg.scheme, &Domain::Global)?;

    let beta2 = psi.beta2;
    let k = (1.0 - 1.0 / beta2) * beta2.powf(-1.0 / (beta2 - 1.0));
    let psi_d = psi.eval(d);

    let mut table = Table::new(&["tau", "pairing", "exponent_room", "required_c_prime"]);
    let (mut worst, mut at) = (-1.0f64, opts.taus[0]);
    let mut slope_pts = Vec::new();
    for &tau in &opts.taus {
        let kk = node(s + tau);
        let pairing: f64 = u.snapshots[kk].iter().zip(&f2).zip(&g.measure).map(|((a, b), m)| a * b * m).sum::<f64>()
            / (n1 * n2);
        let room = -pairing.ln() + opts.growth * tau;
        let need = if pairing <= 0.0 {
            0.0
        } else if room > 0.0 {
            psi_d * (k / room).powf(beta2 - 1.0) / tau
        } else {
            f64::INFINITY
        };
        table.push(vec![tau, pairing, room, need]);
        if need > worst {
            worst = need;
            at = tau;
        }
        let (pyx, pxx) = (col.snapshots[kk][y], col.snapshots[kk][x]);
        if pyx > 1e-300 && pxx > 1e-300 {
            slope_pts.push((d * d / tau, (pyx / pxx).ln()));
        }
    }
    let slope = if slope_pts.len() >= 2 {
        let m = slope_pts.len() as f64;
        let (mx, my) = (slope_pts.iter().map(|p| p.0).sum::<f64>() / m, slope_pts.iter().map(|p| p.1).sum::<f64>() / m);
        let sxy: f64 = slope_pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = slope_pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let mut rep = CertReport::measured("davies-gaffney", worst, &schedule.id)
        .value("c_prime", worst)
        .value("binding_tau", at)
        .value("d", d)
        .value("growth", opts.growth)
        .value("gaussian_slope", slope)
        .with_witness(Witness { label: format!("tau={at}"), ball: None, function: None });
    if !worst.is_finite() {
        rep = rep.with_status(Status::Infeasible).note("pairing exceeds the contraction bound at some time");
    }
    if b1.len() == 1 || b2.len() == 1 {
        rep = rep.note("support balls are single vertices at this mesh");
    }
    rep.table = Some(table);
    Ok(rep)
}
