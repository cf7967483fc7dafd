use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::harmonic::HarmonicProfile;
use super::reference::ReferenceForm;
use crate::error::{Error, Result};

/// One constant-in-time piece `[start, end)` with skew profile `h` (already scaled).
#[derive(Debug, Clone)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub profile: Option<Vec<f64>>,
    operator: DMatrix<f64>,
}

impl Window {
    /// `A` with `E_t(f,g) = gᵀ A f`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }
}

/// Piecewise-constant family of forms `E_t = E* + ∫ g dΓ(f,h_t) − ∫ f dΓ(g,h_t)`.
#[derive(Debug, Clone)]
pub struct FormSchedule {
    reference: Arc<ReferenceForm>,
    windows: Vec<Window>,
    pub id: String,
}

/// Skew matrix `D_h` with `gᵀ D_h f = Σ_x g(x) Γ(f,h)(x) μ(x)`.
pub fn skew_matrix(form: &ReferenceForm, h: &[f64]) -> DMatrix<f64> {
    let g = form.graph();
    let n = g.len();
    let mut d = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, w) in &g.neighbors[x] {
            let c = 0.5 * w * (h[x] - h[y]);
            d[(x, x)] += c;
            d[(x, y)] -= c;
        }
    }
    d
}

fn assemble(form: &ReferenceForm, profile: Option<&[f64]>) -> DMatrix<f64> {
    let mut a = form.stiffness().clone();
    if let Some(h) = profile {
        let d = skew_matrix(form, h);
        a += &d - d.transpose();
    }
    a
}

impl FormSchedule {
    pub fn symmetric(reference: Arc<ReferenceForm>) -> Self {
        let operator = reference.stiffness().clone();
        FormSchedule {
            windows: vec![Window { start: f64::NEG_INFINITY, end: f64::INFINITY, profile: None, operator }],
            reference,
            id: "symmetric".into(),
        }
    }

    /// Time-independent schedule with `h` replaced by `scale·h`.
    pub fn nonsymmetric(reference: Arc<ReferenceForm>, profile: &HarmonicProfile, scale: f64) -> Result<Self> {
        Self::time_dependent(reference, vec![(f64::NEG_INFINITY, f64::INFINITY, profile.values.clone(), scale)])
            .map(|mut s| {
                s.id = format!("skew(scale={scale})");
                s
            })
    }

    /// Windows `(start, end, h, scale)`; they must tile their span without gaps.
    pub fn time_dependent(reference: Arc<ReferenceForm>, windows: Vec<(f64, f64, Vec<f64>, f64)>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::Empty("window list"));
        }
        let n = reference.len();
        let mut out = Vec::with_capacity(windows.len());
        for (i, (start, end, h, scale)) in windows.into_iter().enumerate() {
            if h.len() != n {
                return Err(Error::Dimension { expected: n, got: h.len() });
            }
            if !(start < end) {
                return Err(Error::Invalid(format!("window {i} is empty")));
            }
            if let Some(prev) = out.last() {
                let prev: &Window = prev;
                if prev.end != start {
                    return Err(Error::Invalid(format!("window {i} does not start where window {} ends", i - 1)));
                }
            }
            let hs: Vec<f64> = h.iter().map(|v| v * scale).collect();
            let operator = assemble(&reference, Some(&hs));
            out.push(Window { start, end, profile: Some(hs), operator });
        }
        Ok(FormSchedule { reference, windows: out, id: "time-dependent".into() })
    }

    pub fn reference(&self) -> &ReferenceForm {
        &self.reference
    }

    pub fn reference_arc(&self) -> &Arc<ReferenceForm> {
        &self.reference
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn span(&self) -> (f64, f64) {
        (self.windows[0].start, self.windows[self.windows.len() - 1].end)
    }

    pub fn is_symmetric(&self) -> bool {
        self.windows.iter().all(|w| w.profile.as_ref().map_or(true, |h| h.iter().all(|v| *v == h[0])))
    }

    pub fn window_at(&self, t: f64) -> Result<&Window> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(Error::OutsideSchedule { t, start, end });
        }
        Ok(self
            .windows
            .iter()
            .find(|w| t >= w.start && t < w.end)
            .unwrap_or(&self.windows[self.windows.len() - 1]))
    }

    pub fn operator_at(&self, t: f64) -> Result<&DMatrix<f64>> {
        Ok(self.window_at(t)?.operator())
    }

    /// Window breakpoints strictly inside `(s, t)`.
    pub fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        self.windows.iter().map(|w| w.start).filter(|&b| b > s && b < t).collect()
    }

    /// `E_t(f,g) = gᵀ A_t f`.
    pub fn eval(&self, t: f64, f: &[f64], g: &[f64]) -> Result<f64> {
        let a = self.operator_at(t)?;
        let n = self.reference.len();
        if f.len() != n || g.len() != n {
            return Err(Error::Dimension { expected: n, got: f.len().min(g.len()) });
        }
        let af = a * DVector::from_column_slice(f);
        Ok(af.iter().zip(g).map(|(a, b)| a * b).sum())
    }

    pub fn sym(&self, t: f64, f: &[f64], g: &[f64]) -> Result<f64> {
        Ok(0.5 * (self.eval(t, f, g)? + self.eval(t, g, f)?))
    }

    pub fn skew(&self, t: f64, f: &[f64], g: &[f64]) -> Result<f64> {
        Ok(0.5 * (self.eval(t, f, g)? - self.eval(t, g, f)?))
    }

    /// Adjoint schedule `Ê_t(f,g) = E_t(g,f)`; on a finite span `[s,t]` time is reflected
    /// so that the adjoint runs forward from `s` to `t`.
    pub fn adjoint_on(&self, s: f64, t: f64) -> Result<Self> {
        let mut windows = Vec::with_capacity(self.windows.len());
        let finite = s.is_finite() && t.is_finite() && self.windows.len() > 1;
        for w in self.windows.iter().rev() {
            let (start, end) = if finite { (s + t - w.end, s + t - w.start) } else { (w.start, w.end) };
            let profile = w.profile.as_ref().map(|h| h.iter().map(|v| -v).collect::<Vec<_>>());
            windows.push(Window { start, end, profile, operator: w.operator.transpose() });
        }
        if !finite {
            windows.reverse();
        }
        Ok(FormSchedule { reference: self.reference.clone(), windows, id: format!("adjoint({})", self.id) })
    }

    pub fn to_file(&self) -> ScheduleFile {
        ScheduleFile {
            id: self.id.clone(),
            windows: self
                .windows
                .iter()
                .map(|w| WindowRecord {
                    start: w.start.is_finite().then_some(w.start),
                    end: w.end.is_finite().then_some(w.end),
                    profile: w.profile.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(reference: Arc<ReferenceForm>, file: &ScheduleFile) -> Result<Self> {
        if file.windows.is_empty() {
            return Err(Error::Empty("window list"));
        }
        let n = reference.len();
        let mut windows = Vec::new();
        for w in &file.windows {
            if let Some(h) = &w.profile {
                if h.len() != n {
                    return Err(Error::Dimension { expected: n, got: h.len() });
                }
            }
            let operator = assemble(&reference, w.profile.as_deref());
            windows.push(Window {
                start: w.start.unwrap_or(f64::NEG_INFINITY),
                end: w.end.unwrap_or(f64::INFINITY),
                profile: w.profile.clone(),
                operator,
            });
        }
        Ok(FormSchedule { reference, windows, id: file.id.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub profile: Option<Vec<f64>>,
}

/// JSON form of a schedule (the graph travels separately).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub id: String,
    pub windows: Vec<WindowRecord>,
}

/// Bilinear parts of `E_t = E^s + E^sym(fg,1) + l + r` at a fixed time.
pub struct Decomposition {
    a: DMatrix<f64>,
}

impl Decomposition {
    fn e(&self, f: &[f64], g: &[f64]) -> f64 {
        let af = &self.a * DVector::from_column_slice(f);
        af.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    fn esym(&self, f: &[f64], g: &[f64]) -> f64 {
        0.5 * (self.e(f, g) + self.e(g, f))
    }

    pub fn total(&self, f: &[f64], g: &[f64]) -> f64 {
        self.e(f, g)
    }

    /// `E^s(f,g) = E^sym(f,g) − E^sym(fg,1)`.
    pub fn strongly_local(&self, f: &[f64], g: &[f64]) -> f64 {
        self.esym(f, g) - self.boundary(f, g)
    }

    /// `E^sym(fg, 1)`.
    pub fn boundary(&self, f: &[f64], g: &[f64]) -> f64 {
        let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.esym(&fg, &vec![1.0; f.len()])
    }

    /// `l(f,g) = ¼[E(fg,1) − E(1,fg) + E(f,g) − E(g,f)]`.
    pub fn l(&self, f: &[f64], g: &[f64]) -> f64 {
        let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        let one = vec![1.0; f.len()];
        0.25 * (self.e(&fg, &one) - self.e(&one, &fg) + self.e(f, g) - self.e(g, f))
    }

    /// `r(f,g) = ¼[E(1,fg) − E(fg,1) + E(f,g) − E(g,f)] = −l(g,f)`.
    pub fn r(&self, f: &[f64], g: &[f64]) -> f64 {
        let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        let one = vec![1.0; f.len()];
        0.25 * (self.e(&one, &fg) - self.e(&fg, &one) + self.e(f, g) - self.e(g, f))
    }
}

pub fn decompose(schedule: &FormSchedule, t: f64) -> Result<Decomposition> {
    Ok(Decomposition { a: schedule.operator_at(t)?.clone() })
}
