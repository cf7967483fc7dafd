use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::MetricMeasureGraph;

/// The conductance energy `E*(f,g) = Σ_edges w (f(a)−f(b)) (g(a)−g(b))`.
#[derive(Debug, Clone)]
pub struct ReferenceForm {
    graph: Arc<MetricMeasureGraph>,
    stiffness: DMatrix<f64>,
}

impl ReferenceForm {
    pub fn new(graph: Arc<MetricMeasureGraph>) -> Self {
        let n = graph.len();
        let mut k = DMatrix::zeros(n, n);
        for e in &graph.edges {
            k[(e.a, e.a)] += e.conductance;
            k[(e.b, e.b)] += e.conductance;
            k[(e.a, e.b)] -= e.conductance;
            k[(e.b, e.a)] -= e.conductance;
        }
        ReferenceForm { graph, stiffness: k }
    }

    pub fn graph(&self) -> &MetricMeasureGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<MetricMeasureGraph> {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// Symmetric weighted Laplacian `K` with `E*(f,g) = gᵀ K f`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.graph.measure))
    }

    /// `L* = −M⁻¹K`.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut l = -self.stiffness.clone();
        for (i, mut row) in l.row_iter_mut().enumerate() {
            row /= self.graph.measure[i];
        }
        l
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    pub fn energy(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self
            .graph
            .edges
            .iter()
            .map(|e| e.conductance * (f[e.a] - f[e.b]) * (g[e.a] - g[e.b]))
            .sum())
    }

    /// Energy density `Γ(f,g)(x) = (1/(2μ(x))) Σ_y w(x,y)(f(x)−f(y))(g(x)−g(y))`.
    pub fn energy_measure(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.gamma(f, g))
    }

    pub(crate) fn gamma(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let gr = &self.graph;
        (0..gr.len())
            .map(|x| {
                let s: f64 = gr.neighbors[x].iter().map(|&(y, w)| w * (f[x] - f[y]) * (g[x] - g[y])).sum();
                0.5 * s / gr.measure[x]
            })
            .collect()
    }

    /// `∫ φ dΓ(f,g)` over the whole graph.
    pub fn gamma_integral(&self, weight: &[f64], f: &[f64], g: &[f64]) -> f64 {
        let gam = self.gamma(f, g);
        (0..self.len()).map(|x| weight[x] * gam[x] * self.graph.measure[x]).sum()
    }

    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.graph.measure).map(|(a, m)| a * m).sum()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.graph.measure).map(|((a, b), m)| a * b * m).sum()
    }

    /// `‖f‖²_F = E*(f,f) + ∫ f² dμ`.
    pub fn norm_f_sq(&self, f: &[f64]) -> f64 {
        self.gamma_integral(&vec![1.0; self.len()], f, f) + self.inner(f, f)
    }

    /// `‖Γ(Φ(u),v) − Φ'(u) Γ(u,v)‖` in `L¹(μ)`.
    pub fn chain_rule_defect(
        &self,
        phi: impl Fn(f64) -> f64,
        dphi: impl Fn(f64) -> f64,
        u: &[f64],
        v: &[f64],
    ) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let pu: Vec<f64> = u.iter().map(|&s| phi(s)).collect();
        let lhs = self.gamma(&pu, v);
        let base = self.gamma(u, v);
        Ok((0..self.len())
            .map(|x| (lhs[x] - dphi(u[x]) * base[x]).abs() * self.graph.measure[x])
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, SpaceSpec};

    fn form(spec: SpaceSpec) -> ReferenceForm {
        ReferenceForm::new(Arc::new(build_space(&spec).unwrap()))
    }

    #[test]
    fn hand_values() {
        let p2 = form(SpaceSpec::path(2));
        let f = [0.0, 1.0, 2.0];
        assert_eq!(p2.energy(&f, &f).unwrap(), 2.0);
        assert_eq!(p2.energy(&[5.0; 3], &f).unwrap(), 0.0);
        let p1 = form(SpaceSpec::path(1));
        assert_eq!(p1.energy(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(p1.energy_measure(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert!(p1.energy(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn chain_rule_hand_value_and_affine_exactness() {
        let p1 = form(SpaceSpec::path(1));
        let u = [0.0, 1.0];
        let d = p1.chain_rule_defect(|s| s * s, |s| 2.0 * s, &u, &u).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let g = form(SpaceSpec::gasket(2));
        let u: Vec<f64> = (0..g.len()).map(|i| (i as f64).sin()).collect();
        let v: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.3).cos()).collect();
        assert!(g.chain_rule_defect(|s| 3.0 * s, |_| 3.0, &u, &v).unwrap() < 1e-12);
    }

    #[test]
    fn generator_kills_constants() {
        let g = form(SpaceSpec::gasket(2));
        let one = DVector::from_element(g.len(), 1.0);
        assert!((g.generator() * one).amax() < 1e-12);
    }
}
