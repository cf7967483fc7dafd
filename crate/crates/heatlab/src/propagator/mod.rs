//! Time stepping for `∂ₜu = L_t u`, where `∫ ∂ₜu g dμ + E_t(u,g) = 0`, i.e.
//! `M u' = −A_t u`. Transition operators, kernels against `μ`, Dirichlet
//! restrictions and the structural checks built on them.

mod checks;
mod export;
mod kernel;

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::FormSchedule;
use crate::linalg;

pub use checks::{
    check_caloric_axioms, check_chapman_kolmogorov, check_contraction, check_max_principle, check_positivity,
    check_super_mean_value, convergence_study, mass_defect, step_residuals,
};
pub use export::{read_kernel, KernelHeader, KERNEL_MAGIC};
pub use kernel::{kernel, kernel_on_grid, l2_operator_norm, transition, KernelMatrix};

/// Time discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    BackwardEuler,
    Theta { theta: f64 },
    /// Matrix exponential of each constant window.
    Exact,
}

impl Scheme {
    /// Implicitness; `None` for the exponential.
    pub fn theta(self) -> Option<f64> {
        match self {
            Scheme::BackwardEuler => Some(1.0),
            Scheme::Theta { theta } => Some(theta),
            Scheme::Exact => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Steps per unit time on a lattice shared by every call, so grids over adjacent
    /// intervals line up.
    pub steps_per_unit: usize,
    /// Uniform steps per call instead of the shared lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_steps: Option<usize>,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { scheme: Scheme::BackwardEuler, steps_per_unit: 64, fixed_steps: None, tolerance: 1e-10 }
    }
}

impl SolverConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_steps(mut self, n: usize) -> Self {
        self.fixed_steps = Some(n);
        self
    }

    pub fn with_rate(mut self, per_unit: usize) -> Self {
        self.steps_per_unit = per_unit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(theta) = self.scheme.theta() {
            if !(0.5..=1.0).contains(&theta) {
                return Err(Error::Invalid(format!("θ = {theta} outside [1/2, 1]")));
            }
        }
        if self.steps_per_unit == 0 || self.fixed_steps == Some(0) {
            return Err(Error::Invalid("step count must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Where the evolution lives: everywhere, or on `U` with zero values outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Global,
    Dirichlet { vertices: Vec<usize> },
}

impl Domain {
    pub fn dirichlet(set: &[bool]) -> Self {
        Domain::Dirichlet { vertices: (0..set.len()).filter(|&v| set[v]).collect() }
    }

    /// Vertex indices, validated against `n`.
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            Domain::Global => Ok((0..n).collect()),
            Domain::Dirichlet { vertices } => {
                if vertices.is_empty() {
                    return Err(Error::Empty("Dirichlet domain"));
                }
                if let Some(&v) = vertices.iter().find(|&&v| v >= n) {
                    return Err(Error::Vertex(v));
                }
                let mut v = vertices.clone();
                v.sort_unstable();
                v.dedup();
                Ok(v)
            }
        }
    }

    pub fn mask(&self, n: usize) -> Result<Vec<bool>> {
        let mut m = vec![false; n];
        for v in self.indices(n)? {
            m[v] = true;
        }
        Ok(m)
    }

    pub fn label(&self) -> String {
        match self {
            Domain::Global => "global".into(),
            Domain::Dirichlet { vertices } => format!("dirichlet({} vertices)", vertices.len()),
        }
    }
}

/// Snapshots `u(t_k,·)` on a strictly increasing grid; the first is the initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub schedule: String,
    pub domain: Domain,
    pub scheme: Scheme,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.snapshots[self.snapshots.len() - 1]
    }

    /// Snapshot at the grid node nearest to `t`.
    pub fn at(&self, t: f64) -> &[f64] {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map_or(0, |(k, _)| k);
        &self.snapshots[k]
    }

    /// Same trajectory with each snapshot mapped by `f`.
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Trajectory {
        Trajectory { snapshots: self.snapshots.iter().map(|u| f(u)).collect(), ..self.clone() }
    }

    /// `u_h(t) = (1/h)∫_t^{t+h} u(s) ds` by the trapezoid rule on the grid, for every
    /// node with `t + h` inside the trajectory.
    pub fn steklov_average(&self, h: f64) -> Result<Trajectory> {
        let first_cell = self.times.get(1).map(|t| t - self.times[0]);
        let span = self.times[self.times.len() - 1] - self.times[0];
        let slack = 1e-12 * span.abs().max(1.0);
        match first_cell {
            Some(cell) if h >= cell - slack && h <= span + slack => {}
            _ => return Err(Error::Invalid(format!("Steklov width {h} must cover a grid cell and fit in {span}"))),
        }
        let end = self.times[self.times.len() - 1];
        let mut times = Vec::new();
        let mut snapshots = Vec::new();
        for (k, &t) in self.times.iter().enumerate() {
            if t + h > end + slack {
                break;
            }
            let mut acc = vec![0.0; self.snapshots[k].len()];
            for j in k..self.times.len() - 1 {
                let (a, b) = (self.times[j], self.times[j + 1]);
                let hi = b.min(t + h);
                if hi <= a + slack * 1e-3 {
                    break;
                }
                // trapezoid over [a, hi] of the linear interpolant
                let frac = (hi - a) / (b - a);
                for (i, v) in acc.iter_mut().enumerate() {
                    let ua = self.snapshots[j][i];
                    let uh = ua + frac * (self.snapshots[j + 1][i] - ua);
                    *v += 0.5 * (hi - a) * (ua + uh);
                }
            }
            times.push(t);
            snapshots.push(acc.into_iter().map(|v| v / h).collect());
        }
        Ok(Trajectory { times, snapshots, ..self.clone() })
    }
}

/// Grid `s = t_0 < … < t_K = t` through every window breakpoint.
pub fn time_grid(schedule: &FormSchedule, s: f64, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(s <= t) || !s.is_finite() || !t.is_finite() {
        return Err(Error::Invalid(format!("need finite s ≤ t, got s={s} t={t}")));
    }
    schedule.window_at(s)?;
    schedule.window_at(t)?;
    if s == t {
        return Ok(vec![s]);
    }
    let mut nodes = schedule.breakpoints(s, t);
    match cfg.fixed_steps {
        Some(n) => nodes.extend((1..n).map(|j| s + (t - s) * j as f64 / n as f64)),
        None => {
            let p = cfg.steps_per_unit as f64;
            let first = (s * p).floor() as i64 + 1;
            let last = (t * p).ceil() as i64 - 1;
            nodes.extend((first..=last).map(|k| k as f64 / p));
        }
    }
    let slack = 1e-12 * s.abs().max(t.abs()).max(1.0);
    nodes.retain(|&x| x > s + slack && x < t - slack);
    nodes.sort_by(f64::total_cmp);
    let mut grid = vec![s];
    for x in nodes {
        if x - grid[grid.len() - 1] > slack {
            grid.push(x);
        }
    }
    grid.push(t);
    Ok(grid)
}

/// One step `C u_{k+1} = B u_k` on the domain's vertices; `op = C⁻¹B`.
pub(crate) struct StepOp {
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    pub op: DMatrix<f64>,
}

/// Step operators for one schedule, domain and scheme, cached per window and step.
pub(crate) struct Stepper<'a> {
    schedule: &'a FormSchedule,
    scheme: Scheme,
    pub idx: Vec<usize>,
    mass: Vec<f64>,
    cache: HashMap<(usize, u64), Rc<StepOp>>,
}

impl<'a> Stepper<'a> {
    pub fn new(schedule: &'a FormSchedule, scheme: Scheme, domain: &Domain) -> Result<Self> {
        let g = schedule.reference().graph();
        let idx = domain.indices(g.len())?;
        let mass = idx.iter().map(|&v| g.measure[v]).collect();
        Ok(Stepper { schedule, scheme, idx, mass, cache: HashMap::new() })
    }

    fn window_index(&self, t: f64) -> usize {
        let w = self.schedule.windows();
        w.iter().position(|w| t >= w.start && t < w.end).unwrap_or(w.len() - 1)
    }

    pub fn step(&mut self, a: f64, b: f64) -> Result<Rc<StepOp>> {
        let h = b - a;
        let wi = self.window_index(0.5 * (a + b));
        // steps equal to rounding share one operator
        let key = (wi, (h * 2f64.powi(44)).round() as u64);
        if let Some(op) = self.cache.get(&key) {
            return Ok(op.clone());
        }
        let full = self.schedule.windows()[wi].operator();
        let m = self.idx.len();
        let a_sub = DMatrix::from_fn(m, m, |i, j| full[(self.idx[i], self.idx[j])]);
        let mass = DMatrix::from_diagonal(&DVector::from_column_slice(&self.mass));
        let op = match self.scheme.theta() {
            Some(theta) => {
                let lhs = &mass + &a_sub * (theta * h);
                let rhs = &mass - &a_sub * ((1.0 - theta) * h);
                let lu = lhs.clone().lu();
                let op = lu.solve(&rhs).ok_or_else(|| {
                    Error::Singular(format!("step matrix singular at t={a}, Δt={h}; the step is too large for this form"))
                })?;
                if op.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Singular(format!("step matrix ill-conditioned at t={a}, Δt={h}")));
                }
                StepOp { lhs, rhs, op }
            }
            None => {
                let mut gen = -a_sub;
                for (i, mut row) in gen.row_iter_mut().enumerate() {
                    row /= self.mass[i];
                }
                let op = linalg::expm(&(gen * h));
                StepOp { rhs: &mass * &op, lhs: mass, op }
            }
        };
        let op = Rc::new(op);
        self.cache.insert(key, op.clone());
        Ok(op)
    }
}

/// Evolve `f` (zeroed off the domain) over the given grid.
pub fn solve_on_grid(
    schedule: &FormSchedule,
    f: &[f64],
    times: &[f64],
    scheme: Scheme,
    domain: &Domain,
) -> Result<Trajectory> {
    let n = schedule.reference().len();
    if f.len() != n {
        return Err(Error::Dimension { expected: n, got: f.len() });
    }
    if times.is_empty() {
        return Err(Error::Empty("time grid"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time grid must increase strictly".into()));
    }
    let mut stepper = Stepper::new(schedule, scheme, domain)?;
    let mut u = DVector::from_iterator(stepper.idx.len(), stepper.idx.iter().map(|&v| f[v]));
    let lift = |u: &DVector<f64>, idx: &[usize]| {
        let mut out = vec![0.0; n];
        for (i, &v) in idx.iter().enumerate() {
            out[v] = u[i];
        }
        out
    };
    let mut snapshots = vec![lift(&u, &stepper.idx)];
    for w in times.windows(2) {
        let op = stepper.step(w[0], w[1])?;
        u = &op.op * u;
        snapshots.push(lift(&u, &stepper.idx));
    }
    Ok(Trajectory {
        times: times.to_vec(),
        snapshots,
        schedule: schedule.id.clone(),
        domain: domain.clone(),
        scheme,
    })
}

/// `u(t) = T^s_t f` on `[s, T]` over the whole graph.
pub fn solve_ivp(schedule: &FormSchedule, f: &[f64], s: f64, t: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    solve_in(schedule, f, s, t, cfg, &Domain::Global)
}

pub fn solve_in(
    schedule: &FormSchedule,
    f: &[f64],
    s: f64,
    t: f64,
    cfg: &SolverConfig,
    domain: &Domain,
) -> Result<Trajectory> {
    if !(s < t) {
        return Err(Error::Invalid(format!("need s < T, got {s} and {t}")));
    }
    let grid = time_grid(schedule, s, t, cfg)?;
    solve_on_grid(schedule, f, &grid, cfg.scheme, domain)
}
