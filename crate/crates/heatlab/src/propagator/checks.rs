use nalgebra::DVector;

use super::kernel::{kernel, kernel_on_grid, l2_operator_norm, transition, KernelMatrix};
use super::{solve_on_grid, time_grid, Domain, Scheme, SolverConfig, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::forms::FormSchedule;
use crate::report::{CertReport, Status, Table, Witness};

/// `‖T^s_t‖_{L²(μ)} ≤ e^{(α−c)(t−s)}` for the `(α, c)` of the coercivity check.
pub fn check_contraction(
    schedule: &FormSchedule,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
    alpha: f64,
    c: f64,
) -> Result<CertReport> {
    let op = transition(schedule, s, t, cfg, &Domain::Global)?;
    let norm = l2_operator_norm(&op, &schedule.reference().graph().measure);
    let bound = ((alpha - c) * (t - s)).exp();
    let status = if norm <= bound * (1.0 + 1e-9) { Status::Pass } else { Status::Fail };
    Ok(CertReport::measured("contraction", norm / bound, &schedule.id)
        .with_status(status)
        .value("norm", norm)
        .value("bound", bound)
        .value("alpha", alpha)
        .value("c", c))
}

/// Compares `∫ p(t,·,r,z) p(r,z,s,·) dμ(z)` with the kernel over `[s,t]` on `cfg`'s grid.
/// When that grid is not the concatenation of the two factor grids the defect is a
/// discretisation difference and is reported without a verdict.
pub fn check_chapman_kolmogorov(
    schedule: &FormSchedule,
    k1: &KernelMatrix,
    k2: &KernelMatrix,
    cfg: &SolverConfig,
) -> Result<CertReport> {
    if k1.t != k2.s {
        return Err(Error::Misaligned(format!("first kernel ends at {}, second starts at {}", k1.t, k2.s)));
    }
    if k1.domain != k2.domain || k1.schedule != k2.schedule || k1.len() != k2.len() {
        return Err(Error::Misaligned("kernels differ in domain or schedule".into()));
    }
    let mu = &schedule.reference().graph().measure;
    let mut weighted = k1.entries.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= mu[i];
    }
    let product = &k2.entries * weighted;
    let direct = kernel(schedule, k1.s, k2.t, cfg, &k1.domain)?;
    let mut joined = k1.times.clone();
    joined.extend_from_slice(&k2.times[1..]);
    let aligned = joined.len() == direct.times.len()
        && joined.iter().zip(&direct.times).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    let scale = direct.entries.amax().max(f64::MIN_POSITIVE);
    let defect = (&product - &direct.entries).amax();
    let mut rep = CertReport::measured("chapman-kolmogorov", defect, &schedule.id)
        .value("defect", defect)
        .value("relative_defect", defect / scale)
        .value("aligned", if aligned { 1.0 } else { 0.0 });
    rep.status = if !aligned {
        rep.notes.push("grids misaligned; defect is a discretisation difference".into());
        Status::NotApplicable
    } else if defect <= cfg.tolerance * scale.max(1.0) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(rep)
}

/// Minimum kernel entry on the domain; passes when `≥ −tol`.
pub fn check_positivity(k: &KernelMatrix, tol: f64) -> Result<CertReport> {
    let n = k.len();
    let mask = k.domain.mask(n)?;
    let mut best = (f64::INFINITY, 0, 0);
    for y in 0..n {
        for x in 0..n {
            if mask[y] && mask[x] && k.entries[(y, x)] < best.0 {
                best = (k.entries[(y, x)], y, x);
            }
        }
    }
    let status = if best.0 >= -tol { Status::Pass } else { Status::Fail };
    let mut col = vec![0.0; n];
    for y in 0..n {
        col[y] = k.entries[(y, best.2)];
    }
    let mut rep = CertReport::measured("positivity", best.0, &k.schedule)
        .with_status(status)
        .value("min_entry", best.0)
        .value("row", best.1 as f64)
        .value("column", best.2 as f64)
        .with_witness(Witness { label: format!("column {}", best.2), ball: None, function: Some(col) });
    if let Some(m) = k.step_m_matrix {
        rep = rep.value("step_m_matrix", if m { 1.0 } else { 0.0 });
        if m {
            rep = rep.note("every step matrix is an M-matrix with a nonnegative right side");
        }
    }
    Ok(rep)
}

/// `max_x |Σ_y p(t,y,s,x) μ(y) − 1|`.
pub fn mass_defect(k: &KernelMatrix, measure: &[f64]) -> f64 {
    let n = k.len();
    let mask = k.domain.mask(n).unwrap_or_else(|_| vec![true; n]);
    (0..n)
        .filter(|&x| mask[x])
        .map(|x| ((0..n).map(|y| k.entries[(y, x)] * measure[y]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Per-step residuals `(C u_{k+1} − B u_k)/Δt` of the trajectory's own scheme, on the
/// vertices of `set` (which must lie in the trajectory's domain). A solution gives zero,
/// a subsolution `≤ 0`, a supersolution `≥ 0`.
pub fn step_residuals(schedule: &FormSchedule, traj: &Trajectory, set: &[bool]) -> Result<Vec<Vec<f64>>> {
    let n = schedule.reference().len();
    if set.len() != n {
        return Err(Error::Dimension { expected: n, got: set.len() });
    }
    let mut stepper = Stepper::new(schedule, traj.scheme, &traj.domain)?;
    let idx = stepper.idx.clone();
    let inside = traj.domain.mask(n)?;
    if let Some(v) = (0..n).find(|&v| set[v] && !inside[v]) {
        return Err(Error::Invalid(format!("vertex {v} of the test set lies outside the trajectory's domain")));
    }
    let local = |u: &[f64]| DVector::from_iterator(idx.len(), idx.iter().map(|&v| u[v]));
    let mut out = Vec::with_capacity(traj.times.len().saturating_sub(1));
    for k in 0..traj.times.len().saturating_sub(1) {
        let (a, b) = (traj.times[k], traj.times[k + 1]);
        let op = stepper.step(a, b)?;
        let r = (&op.lhs * local(&traj.snapshots[k + 1]) - &op.rhs * local(&traj.snapshots[k])) / (b - a);
        out.push(idx.iter().enumerate().filter(|(_, &v)| set[v]).map(|(i, _)| r[i]).collect());
    }
    Ok(out)
}

fn sup_norm(traj: &Trajectory) -> f64 {
    traj.snapshots.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)
}

const PREDICATE_TOL: f64 = 1e-9;

/// Parabolic maximum principle: a subsolution on `U` with `u⁺(s) = 0` on `U` and
/// `u ≤ 0` off `U` stays `≤ 0`. Hypothesis failures give not-applicable.
pub fn check_max_principle(schedule: &FormSchedule, traj: &Trajectory, set: &[bool], tol: f64) -> Result<CertReport> {
    let scale = sup_norm(traj);
    let n = set.len();
    let base = CertReport::measured("max-principle", 0.0, &schedule.id);
    if let Some(x) = (0..n).find(|&x| set[x] && traj.initial()[x] > tol * scale) {
        return Ok(base
            .with_status(Status::NotApplicable)
            .note(format!("initial datum is positive at vertex {x} of U")));
    }
    if traj.snapshots.iter().any(|u| (0..n).any(|x| !set[x] && u[x] > tol * scale)) {
        return Ok(base.with_status(Status::NotApplicable).note("u is positive outside U"));
    }
    let res = step_residuals(schedule, traj, set)?;
    let defect = res.iter().flatten().fold(0.0f64, |m, r| m.max(*r)) / scale;
    if defect > PREDICATE_TOL {
        return Ok(base
            .with_status(Status::NotApplicable)
            .value("subsolution_defect", defect)
            .note("trajectory is not a subsolution on U"));
    }
    let mut worst = (f64::NEG_INFINITY, 0);
    for (k, u) in traj.snapshots.iter().enumerate() {
        for &v in u {
            if v > worst.0 {
                worst = (v, k);
            }
        }
    }
    let status = if worst.0 <= tol * scale.max(1.0) { Status::Pass } else { Status::Fail };
    Ok(CertReport::measured("max-principle", worst.0, &schedule.id)
        .with_status(status)
        .value("max_u", worst.0)
        .value("subsolution_defect", defect)
        .with_witness(Witness {
            label: format!("t = {}", traj.times[worst.1]),
            ball: None,
            function: Some(traj.snapshots[worst.1].clone()),
        }))
}

/// Super-mean-value: a nonnegative supersolution on `U` dominates the Dirichlet
/// evolution of its initial datum.
pub fn check_super_mean_value(schedule: &FormSchedule, traj: &Trajectory, set: &[bool], tol: f64) -> Result<CertReport> {
    let scale = sup_norm(traj);
    let n = set.len();
    let base = CertReport::measured("super-mean-value", 0.0, &schedule.id);
    let neg = traj.snapshots.iter().flat_map(|u| (0..n).filter(|&x| set[x]).map(move |x| u[x])).fold(0.0f64, f64::min);
    if neg < -tol * scale {
        return Ok(base.with_status(Status::NotApplicable).value("min_u", neg).note("u is negative on U"));
    }
    let res = step_residuals(schedule, traj, set)?;
    let defect = -res.iter().flatten().fold(0.0f64, |m, r| m.min(*r)) / scale;
    if defect > PREDICATE_TOL {
        return Ok(base
            .with_status(Status::NotApplicable)
            .value("supersolution_defect", defect)
            .note("trajectory is not a supersolution on U"));
    }
    let f: Vec<f64> = (0..n).map(|x| if set[x] { traj.initial()[x] } else { 0.0 }).collect();
    let dirichlet = solve_on_grid(schedule, &f, &traj.times, traj.scheme, &Domain::dirichlet(set))?;
    let mut worst = (f64::INFINITY, 0, 0);
    for (k, (u, v)) in traj.snapshots.iter().zip(&dirichlet.snapshots).enumerate() {
        for x in (0..n).filter(|&x| set[x]) {
            if u[x] - v[x] < worst.0 {
                worst = (u[x] - v[x], k, x);
            }
        }
    }
    let status = if worst.0 >= -tol * scale.max(1.0) { Status::Pass } else { Status::Fail };
    Ok(CertReport::measured("super-mean-value", worst.0, &schedule.id)
        .with_status(status)
        .value("min_gap", worst.0)
        .value("supersolution_defect", defect)
        .with_witness(Witness {
            label: format!("t = {}, x = {}", traj.times[worst.1], worst.2),
            ball: None,
            function: Some(dirichlet.snapshots[worst.1].clone()),
        }))
}

/// Samples the five caloric axioms on `U × [s,t]`: linearity, restriction to the
/// interior of `U` and the later half of the interval, Dirichlet evolutions solve,
/// constants solve, super-mean-value. `f1`, `f2` are the sample data; their absolute
/// values feed the last axiom.
pub fn check_caloric_axioms(
    schedule: &FormSchedule,
    set: &[bool],
    s: f64,
    t: f64,
    cfg: &SolverConfig,
    f1: &[f64],
    f2: &[f64],
) -> Result<CertReport> {
    let g = schedule.reference().graph();
    let n = g.len();
    let dom = Domain::dirichlet(set);
    let grid = time_grid(schedule, s, t, cfg)?;
    let solve = |f: &[f64], d: &Domain| solve_on_grid(schedule, f, &grid, cfg.scheme, d);
    let u1 = solve(f1, &dom)?;
    let u2 = solve(f2, &dom)?;
    let sum: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a + b).collect();
    let u12 = solve(&sum, &dom)?;
    let scale = sup_norm(&u12).max(sup_norm(&u1)).max(sup_norm(&u2));
    let linearity = u12
        .snapshots
        .iter()
        .zip(u1.snapshots.iter().zip(&u2.snapshots))
        .flat_map(|(c, (a, b))| (0..n).map(move |x| (c[x] - a[x] - b[x]).abs()))
        .fold(0.0, f64::max)
        / scale;

    let abs_res = |traj: &Trajectory, on: &[bool]| -> Result<f64> {
        Ok(step_residuals(schedule, traj, on)?.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs())) / sup_norm(traj))
    };
    let solves = abs_res(&u1, set)?;
    // interior vertices of U on the later half of the interval
    let interior: Vec<bool> = (0..n).map(|x| set[x] && g.neighbors[x].iter().all(|&(y, _)| set[y])).collect();
    let half = grid.len() / 2;
    let late = Trajectory { times: u1.times[half..].to_vec(), snapshots: u1.snapshots[half..].to_vec(), ..u1.clone() };
    let restriction = if interior.iter().any(|&b| b) && late.times.len() > 1 { abs_res(&late, &interior)? } else { 0.0 };

    let mut constants: f64 = 0.0;
    for w in schedule.windows() {
        if w.end > s && w.start < t {
            let a1 = w.operator() * DVector::from_element(n, 1.0);
            constants = constants.max(a1.amax());
        }
    }
    let scale_a = schedule.reference().stiffness().amax().max(1.0);
    let constants_apply = constants <= PREDICATE_TOL * scale_a;

    let pos: Vec<f64> = f1.iter().map(|v| v.abs()).collect();
    let global = solve(&pos, &Domain::Global)?;
    let dirichlet = solve(&pos, &dom)?;
    let smv = global
        .snapshots
        .iter()
        .zip(&dirichlet.snapshots)
        .flat_map(|(u, v)| (0..n).filter(|&x| set[x]).map(move |x| u[x] - v[x]))
        .fold(f64::INFINITY, f64::min);
    let smv_defect = (-smv).max(0.0) / sup_norm(&global);

    let worst = linearity.max(solves).max(restriction).max(smv_defect).max(if constants_apply {
        constants / scale_a
    } else {
        0.0
    });
    let status = if worst <= PREDICATE_TOL { Status::Pass } else { Status::Fail };
    let mut rep = CertReport::measured("caloric-axioms", worst, &schedule.id)
        .with_status(status)
        .value("linearity", linearity)
        .value("restriction", restriction)
        .value("dirichlet_solves", solves)
        .value("constants", constants)
        .value("super_mean_value", smv_defect);
    if !constants_apply {
        rep = rep.note("constants are not solutions for this schedule (E_t(1,·) ≠ 0); axiom (iv) not applicable");
    }
    Ok(rep)
}

/// Kernel error of the θ-scheme against the exponential as the step count doubles;
/// `order` is the last observed `log₂` ratio.
pub fn convergence_study(
    schedule: &FormSchedule,
    s: f64,
    t: f64,
    domain: &Domain,
    scheme: Scheme,
    steps: &[usize],
) -> Result<CertReport> {
    if steps.len() < 2 {
        return Err(Error::Invalid("need at least two step counts".into()));
    }
    let base = SolverConfig::default();
    let exact = kernel(schedule, s, t, &base.clone().with_scheme(Scheme::Exact).with_steps(1), domain)?;
    let mut table = Table::new(&["steps", "defect", "order"]);
    let mut prev: Option<(usize, f64)> = None;
    let mut order = f64::NAN;
    for &n in steps {
        let grid = time_grid(schedule, s, t, &base.clone().with_steps(n))?;
        let k = kernel_on_grid(schedule, &grid, scheme, domain)?;
        let defect = (&k.entries - &exact.entries).amax();
        let o = match prev {
            Some((m, d)) => (d / defect).ln() / (n as f64 / m as f64).ln(),
            None => f64::NAN,
        };
        table.push(vec![n as f64, defect, o]);
        if o.is_finite() {
            order = o;
        }
        prev = Some((n, defect));
    }
    let mut rep = CertReport::measured("convergence", order, &schedule.id).value("order", order);
    rep.table = Some(table);
    Ok(rep)
}
