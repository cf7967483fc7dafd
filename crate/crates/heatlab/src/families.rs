//! Named test families of vertex functions.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::space::MetricMeasureGraph;

/// Seeded generator used for every random family.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub id: String,
    pub functions: Vec<Vec<f64>>,
}

impl TestFamily {
    pub fn new(id: impl Into<String>, functions: Vec<Vec<f64>>) -> Self {
        TestFamily { id: id.into(), functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn join(mut self, other: TestFamily) -> Self {
        self.id = format!("{}+{}", self.id, other.id);
        self.functions.extend(other.functions);
        self
    }

    pub fn constant(n: usize, c: f64) -> Self {
        TestFamily::new("constant", vec![vec![c; n]])
    }

    pub fn indicators(n: usize, set: &[usize]) -> Self {
        let functions = set
            .iter()
            .map(|&v| {
                let mut f = vec![0.0; n];
                f[v] = 1.0;
                f
            })
            .collect();
        TestFamily::new("indicators", functions)
    }

    pub fn random(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Self {
        let functions = (0..count).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        TestFamily::new(format!("random{count}"), functions)
    }

    pub fn random_positive(n: usize, count: usize, floor: f64, rng: &mut ChaCha8Rng) -> Self {
        let functions = (0..count).map(|_| (0..n).map(|_| floor + rng.gen_range(0.0..1.0)).collect()).collect();
        TestFamily::new(format!("positive{count}"), functions)
    }

    /// Restrictions of fixed smooth ambient functions; the same seed gives the same
    /// ambient functions on every resolution of a family.
    pub fn smooth(g: &MetricMeasureGraph, count: usize, rng: &mut ChaCha8Rng) -> Self {
        let functions = (0..count).map(|_| SmoothProfile::draw(rng).sample(g)).collect();
        TestFamily::new(format!("smooth{count}"), functions)
    }

    /// Functions zeroed outside `support`.
    pub fn restricted(mut self, support: &[bool]) -> Self {
        for f in &mut self.functions {
            for (v, keep) in f.iter_mut().zip(support) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
        self.id = format!("{}|supp", self.id);
        self
    }

    /// Pointwise `|f|` plus `floor`.
    pub fn positive_part(mut self, floor: f64) -> Self {
        for f in &mut self.functions {
            for v in f.iter_mut() {
                *v = v.abs() + floor;
            }
        }
        self.id = format!("{}|abs", self.id);
        self
    }

    /// Tent functions `(1 − d(c,·)/radius)⁺`.
    pub fn tents(g: &MetricMeasureGraph, centers: &[usize], radius: f64) -> Self {
        let functions = centers
            .iter()
            .map(|&c| (0..g.len()).map(|y| (1.0 - g.d(c, y) / radius).max(0.0)).collect())
            .collect();
        TestFamily::new("tents", functions)
    }
}

/// `Σ_k a_k sin(ω_k·p + φ_k)` on the ambient plane, frequencies of order one.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    terms: Vec<(f64, [f64; 2], f64)>,
}

impl SmoothProfile {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let terms = (0..3)
            .map(|_| {
                let a = rng.gen_range(0.2..1.0);
                let ang = rng.gen_range(0.0..2.0 * PI);
                let k = rng.gen_range(0.5..2.0) * PI;
                (a, [k * ang.cos(), k * ang.sin()], rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        SmoothProfile { terms }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.terms.iter().map(|(a, w, ph)| a * (w[0] * p[0] + w[1] * p[1] + ph).sin()).sum()
    }

    /// Evaluate on coordinates normalized by the diameter; graphs without
    /// coordinates use distances from vertex 0 and from the farthest vertex.
    pub fn sample(&self, g: &MetricMeasureGraph) -> Vec<f64> {
        let diam = g.diameter().max(1e-300);
        match &g.coords {
            Some(c) => c.iter().map(|q| self.eval([q[0] / diam, q[1] / diam])).collect(),
            None => {
                let far = (0..g.len()).max_by(|&a, &b| g.d(0, a).total_cmp(&g.d(0, b))).unwrap_or(0);
                (0..g.len()).map(|y| self.eval([g.d(0, y) / diam, g.d(far, y) / diam])).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, SpaceSpec};

    #[test]
    fn smooth_family_is_resolution_independent() {
        let g3 = build_space(&SpaceSpec::gasket(3)).unwrap();
        let g4 = build_space(&SpaceSpec::gasket(4)).unwrap();
        let f3 = TestFamily::smooth(&g3, 4, &mut rng(5));
        let f4 = TestFamily::smooth(&g4, 4, &mut rng(5));
        for (i, c) in g3.coords.as_ref().unwrap().iter().enumerate() {
            let j = g4.nearest_vertex(*c).unwrap();
            for k in 0..4 {
                assert!((f3.functions[k][i] - f4.functions[k][j]).abs() < 1e-12);
            }
        }
    }
}
