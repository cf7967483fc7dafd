use nalgebra::{DMatrix, DVector};

use super::{time_grid, Domain, Scheme, SolverConfig, Stepper};
use crate::error::{Error, Result};
use crate::forms::FormSchedule;

/// `p(t,y,s,x)` indexed `(y, x)` over all vertices, zero outside a Dirichlet domain.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub s: f64,
    pub t: f64,
    pub domain: Domain,
    pub schedule: String,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub entries: DMatrix<f64>,
    /// Whether every step had a Z-matrix left side with strict diagonal dominance and
    /// a nonnegative right side; `None` for the exponential.
    pub step_m_matrix: Option<bool>,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.entries[(y, x)]
    }

    /// `∫ p(t,·,s,x) f(x) μ(dx)`.
    pub fn apply(&self, f: &[f64], measure: &[f64]) -> Vec<f64> {
        let fm = DVector::from_iterator(f.len(), f.iter().zip(measure).map(|(a, b)| a * b));
        (&self.entries * fm).iter().copied().collect()
    }
}

fn m_matrix(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> bool {
    let n = lhs.nrows();
    let z = (0..n).all(|i| (0..n).all(|j| i == j || lhs[(i, j)] <= 0.0));
    let rows = (0..n).all(|i| lhs[(i, i)] > (0..n).filter(|&j| j != i).map(|j| lhs[(i, j)].abs()).sum::<f64>());
    let cols = (0..n).all(|j| lhs[(j, j)] > (0..n).filter(|&i| i != j).map(|i| lhs[(i, j)].abs()).sum::<f64>());
    z && (rows || cols) && rhs.iter().all(|&v| v >= 0.0)
}

/// Product of the step operators over the grid, on the domain's vertices.
fn propagate(schedule: &FormSchedule, times: &[f64], scheme: Scheme, domain: &Domain) -> Result<(DMatrix<f64>, Vec<usize>, Option<bool>)> {
    let mut stepper = Stepper::new(schedule, scheme, domain)?;
    let m = stepper.idx.len();
    let mut t = DMatrix::identity(m, m);
    let mut mm = scheme.theta().map(|_| true);
    for w in times.windows(2) {
        let op = stepper.step(w[0], w[1])?;
        if let Some(flag) = mm.as_mut() {
            *flag = *flag && m_matrix(&op.lhs, &op.rhs);
        }
        t = &op.op * t;
    }
    Ok((t, stepper.idx, mm))
}

/// `T^s_t` on all vertices (zero rows and columns outside a Dirichlet domain).
pub fn transition(schedule: &FormSchedule, s: f64, t: f64, cfg: &SolverConfig, domain: &Domain) -> Result<DMatrix<f64>> {
    let times = time_grid(schedule, s, t, cfg)?;
    let (op, idx, _) = propagate(schedule, &times, cfg.scheme, domain)?;
    let n = schedule.reference().len();
    let mut out = DMatrix::zeros(n, n);
    for (i, &y) in idx.iter().enumerate() {
        for (j, &x) in idx.iter().enumerate() {
            out[(y, x)] = op[(i, j)];
        }
    }
    Ok(out)
}

/// Operator norm on `L²(μ)`: the spectral norm of `M^{1/2} T M^{−1/2}`.
pub fn l2_operator_norm(t: &DMatrix<f64>, measure: &[f64]) -> f64 {
    let n = t.nrows();
    let w = DMatrix::from_fn(n, n, |i, j| t[(i, j)] * (measure[i] / measure[j]).sqrt());
    crate::linalg::spectral_norm(&w)
}

pub fn kernel(schedule: &FormSchedule, s: f64, t: f64, cfg: &SolverConfig, domain: &Domain) -> Result<KernelMatrix> {
    let times = time_grid(schedule, s, t, cfg)?;
    kernel_on_grid(schedule, &times, cfg.scheme, domain)
}

/// Kernel over an explicit grid; columns are the evolutions of `δ_x/μ(x)`.
pub fn kernel_on_grid(schedule: &FormSchedule, times: &[f64], scheme: Scheme, domain: &Domain) -> Result<KernelMatrix> {
    if times.is_empty() {
        return Err(Error::Empty("time grid"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time grid must increase strictly".into()));
    }
    let g = schedule.reference().graph();
    let n = g.len();
    if let Domain::Dirichlet { vertices } = domain {
        if vertices.len() >= n {
            return Err(Error::Invalid("Dirichlet domain must be a proper subset".into()));
        }
    }
    let (op, idx, mm) = propagate(schedule, times, scheme, domain)?;
    let mut entries = DMatrix::zeros(n, n);
    for (i, &y) in idx.iter().enumerate() {
        for (j, &x) in idx.iter().enumerate() {
            entries[(y, x)] = op[(i, j)] / g.measure[x];
        }
    }
    Ok(KernelMatrix {
        s: times[0],
        t: times[times.len() - 1],
        domain: domain.clone(),
        schedule: schedule.id.clone(),
        scheme,
        times: times.to_vec(),
        entries,
        step_m_matrix: mm,
    })
}
