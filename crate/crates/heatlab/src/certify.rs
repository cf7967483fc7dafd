//! Poincaré, weighted Poincaré, pseudo-Poincaré and localized Sobolev constants on
//! balls, measured by exact eigen-solves where the extremiser is an eigenfunction
//! and by family sweeps otherwise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffFunction;
use crate::error::{Error, Result};
use crate::families::{self, TestFamily};
use crate::forms::ReferenceForm;
use crate::linalg;
use crate::report::{CertReport, Status, Witness};
use crate::space::{BallTriple, MetricMeasureGraph, ScalingFunction};

/// Where the energy of the Poincaré inequality is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiMode {
    /// Over `B(x,R+r)`.
    Strong,
    /// Over `B(x,2R)`, normalised by `Ψ(2R)`.
    Weak,
}

/// Weighted variance and energy on a vertex subset, in local indices.
struct Pencil {
    verts: Vec<usize>,
    /// `Σ ρ (f − f_ρ)²` as a quadratic form.
    variance: DMatrix<f64>,
    /// Energy plus a rank-one shift along the energy's weight, positive definite
    /// when the support is connected.
    energy: DMatrix<f64>,
}

fn local_index(verts: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut idx = vec![None; n];
    for (i, &v) in verts.iter().enumerate() {
        idx[v] = Some(i);
    }
    idx
}

/// `var_set` carries the variance weights `ρ`, `energy_set` the vertices whose
/// internal edges carry energy with weights `edge_weight(a, b)`.
fn pencil(
    g: &MetricMeasureGraph,
    energy_set: &[usize],
    rho: &[f64],
    edge_weight: impl Fn(usize, usize, f64) -> f64,
) -> Pencil {
    let n = g.len();
    let m = energy_set.len();
    let idx = local_index(energy_set, n);
    let mut k = DMatrix::<f64>::zeros(m, m);
    for e in &g.edges {
        if let (Some(i), Some(j)) = (idx[e.a], idx[e.b]) {
            let w = edge_weight(e.a, e.b, e.conductance);
            k[(i, i)] += w;
            k[(j, j)] += w;
            k[(i, j)] -= w;
            k[(j, i)] -= w;
        }
    }
    let r: Vec<f64> = energy_set.iter().map(|&v| rho[v]).collect();
    let total: f64 = r.iter().sum();
    let mut var = DMatrix::from_fn(m, m, |i, j| -r[i] * r[j] / total);
    for i in 0..m {
        var[(i, i)] += r[i];
    }
    // shift along the constants so that the pencil is definite
    let scale = k.diagonal().amax().max(1.0);
    let mass: f64 = energy_set.iter().map(|&v| g.measure[v]).sum();
    for i in 0..m {
        for j in 0..m {
            k[(i, j)] += scale * g.measure[energy_set[i]] * g.measure[energy_set[j]] / (mass * mass);
        }
    }
    Pencil { verts: energy_set.to_vec(), variance: var, energy: k }
}

/// Largest ratio of the pencil and its maximiser lifted to the whole graph.
fn top_ratio(p: &Pencil, n: usize) -> Result<(f64, Vec<f64>)> {
    let eig = linalg::sym_gen_eigen(&p.variance, &p.energy)?;
    let m = p.verts.len();
    let top = eig.values[m - 1].max(0.0);
    let mut f = vec![0.0; n];
    for (i, &v) in p.verts.iter().enumerate() {
        f[v] = eig.vectors[(i, m - 1)];
    }
    Ok((top, f))
}

fn component_of(g: &MetricMeasureGraph, set: &[bool], start: usize) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let mut stack = vec![start];
    out[start] = 1.0;
    while let Some(v) = stack.pop() {
        for &(u, _) in &g.neighbors[v] {
            if set[u] && out[u] == 0.0 {
                out[u] = 1.0;
                stack.push(u);
            }
        }
    }
    out
}

fn disconnected(id: &str, g: &MetricMeasureGraph, set: &[bool], ball: &BallTriple) -> CertReport {
    let start = if set[ball.center] { ball.center } else { set.iter().position(|&b| b).unwrap_or(0) };
    CertReport::measured(id, f64::INFINITY, "exact-eigen")
        .with_status(Status::Infeasible)
        .with_witness(Witness {
            label: "component of a disconnected ball".into(),
            ball: Some(ball.tag()),
            function: Some(component_of(g, set, start)),
        })
}

/// `∫_B |f − f_B|² dμ / ∫ dΓ(f,f)` with the energy restricted to edges inside `energy_set`.
pub fn variance_ratio(g: &MetricMeasureGraph, var_set: &[bool], energy_set: &[bool], f: &[f64]) -> f64 {
    let vol: f64 = (0..g.len()).filter(|&v| var_set[v]).map(|v| g.measure[v]).sum();
    let mean: f64 = (0..g.len()).filter(|&v| var_set[v]).map(|v| f[v] * g.measure[v]).sum::<f64>() / vol;
    let var: f64 = (0..g.len()).filter(|&v| var_set[v]).map(|v| (f[v] - mean).powi(2) * g.measure[v]).sum();
    let e: f64 = g
        .edges
        .iter()
        .filter(|e| energy_set[e.a] && energy_set[e.b])
        .map(|e| e.conductance * (f[e.a] - f[e.b]).powi(2))
        .sum();
    var / e
}

/// `C_PI = max_f ∫_B |f − f_B|² dμ / (Ψ(ρ) ∫ dΓ(f,f))` with `B = B(x,R+r)`, solved as a
/// generalized eigenproblem. Strong mode integrates the energy over `B` with
/// `ρ = R+r`; weak mode over `B(x,2R)` with `ρ = 2R`. Only edges inside the energy
/// ball count.
pub fn certify_pi(form: &ReferenceForm, psi: &ScalingFunction, ball: &BallTriple, mode: PiMode) -> Result<CertReport> {
    let g = form.graph();
    if ball.center >= g.len() {
        return Err(Error::Vertex(ball.center));
    }
    let outer = ball.big_r + ball.r;
    let var_set = g.in_ball(ball.center, outer);
    let (energy_set, rho) = match mode {
        PiMode::Strong => (var_set.clone(), outer),
        PiMode::Weak => (g.in_ball(ball.center, 2.0 * ball.big_r), 2.0 * ball.big_r),
    };
    if var_set.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::Empty("ball (needs two vertices)"));
    }
    let id = match mode {
        PiMode::Strong => "pi",
        PiMode::Weak => "weak-pi",
    };
    if g.induced_components(&energy_set) > 1 {
        return Ok(disconnected(id, g, &energy_set, ball));
    }
    let verts: Vec<usize> = (0..g.len()).filter(|&v| energy_set[v]).collect();
    let weights: Vec<f64> = (0..g.len()).map(|v| if var_set[v] { g.measure[v] } else { 0.0 }).collect();
    let p = pencil(g, &verts, &weights, |_, _, w| w);
    let (ratio, f) = top_ratio(&p, g.len())?;
    let c = ratio / psi.eval(rho);
    let check = variance_ratio(g, &var_set, &energy_set, &f) / psi.eval(rho);
    Ok(CertReport::measured(id, c, "exact-eigen")
        .value("ratio", ratio)
        .value("psi", psi.eval(rho))
        .value("witness_ratio", check)
        .value("kappa", ball.r / ball.big_r)
        .note("energy restricted to edges inside the ball")
        .with_witness(Witness { label: "top eigenfunction".into(), ball: Some(ball.tag()), function: Some(f) }))
}

/// Rayleigh-quotient sweep of the strong Poincaré ratio over a family.
pub fn certify_pi_family(
    form: &ReferenceForm,
    psi: &ScalingFunction,
    ball: &BallTriple,
    family: &TestFamily,
) -> Result<CertReport> {
    let g = form.graph();
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    let outer = ball.big_r + ball.r;
    let set = g.in_ball(ball.center, outer);
    let mut best = (0.0, None);
    for (i, f) in family.functions.iter().enumerate() {
        let r = variance_ratio(g, &set, &set, f);
        if r.is_nan() {
            continue;
        }
        if r > best.0 {
            best = (r, Some(i));
        }
    }
    let c = best.0 / psi.eval(outer);
    let mut rep = CertReport::measured("pi-sweep", c, &family.id);
    if let Some(i) = best.1 {
        rep = rep.with_witness(Witness {
            label: format!("member {i}"),
            ball: Some(ball.tag()),
            function: Some(family.functions[i].clone()),
        });
    }
    Ok(rep)
}

/// `C_wPI = max_f ∫ |f − f_ψ|² ψ² dμ / (Ψ(R+r) ∫ ψ² dΓ(f,f))`, solved on the support of
/// `ψ`; edges leaving the support are dropped. The strong PI, volume ratio and
/// certified `C₀` of the same ball are reported alongside.
pub fn certify_weighted_pi(form: &ReferenceForm, psi: &ScalingFunction, cut: &CutoffFunction) -> Result<CertReport> {
    let g = form.graph();
    if cut.values.len() != g.len() {
        return Err(Error::Dimension { expected: g.len(), got: cut.values.len() });
    }
    let support: Vec<bool> = cut.values.iter().map(|&v| v > 0.0).collect();
    let verts: Vec<usize> = (0..g.len()).filter(|&v| support[v]).collect();
    if verts.is_empty() {
        return Err(Error::Invalid("cutoff vanishes identically".into()));
    }
    let ball = BallTriple { center: cut.center, big_r: cut.big_r, r: cut.r };
    if verts.len() < 2 {
        return Err(Error::Empty("cutoff support (needs two vertices)"));
    }
    if g.induced_components(&support) > 1 {
        return Ok(disconnected("weighted-pi", g, &support, &ball));
    }
    let psi2: Vec<f64> = cut.values.iter().map(|p| p * p).collect();
    let rho: Vec<f64> = (0..g.len()).map(|v| psi2[v] * g.measure[v]).collect();
    let p = pencil(g, &verts, &rho, |a, b, w| w * (psi2[a] + psi2[b]) / 2.0);
    let (ratio, f) = top_ratio(&p, g.len())?;
    let outer = cut.big_r + cut.r;
    let c = ratio / psi.eval(outer);
    let mut rep = CertReport::measured("weighted-pi", c, "exact-eigen")
        .value("ratio", ratio)
        .value("dropped_edges", dropped_edges(g, &support) as f64)
        .value("c_vd", g.volume(cut.center, outer) / g.volume(cut.center, cut.big_r).max(f64::MIN_POSITIVE))
        .note("restricted to the support of the weight");
    if let Ok(pi) = certify_pi(form, psi, &ball, PiMode::Strong) {
        rep = rep.value("c_pi", pi.constant);
    }
    if let Some(c0) = cut.c0 {
        rep = rep.value("c0", c0);
    }
    Ok(rep.with_witness(Witness { label: "top eigenfunction".into(), ball: Some(ball.tag()), function: Some(f) }))
}

fn dropped_edges(g: &MetricMeasureGraph, set: &[bool]) -> usize {
    g.edges.iter().filter(|e| set[e.a] != set[e.b]).count()
}

/// `f_s(y)`: the average of `f` over `B(y,s)`.
pub fn ball_average(g: &MetricMeasureGraph, f: &[f64], s: f64) -> Vec<f64> {
    (0..g.len())
        .map(|y| {
            let (mut num, mut den) = (0.0, 0.0);
            for z in 0..g.len() {
                if g.d(y, z) < s {
                    num += f[z] * g.measure[z];
                    den += g.measure[z];
                }
            }
            num / den
        })
        .collect()
}

/// Pseudo-Poincaré: `max ∫ |f − f_s|² dμ / (Ψ(s) ∫ dΓ(f,f))` over the family restricted
/// to `B(x,R)` and the `s` grid; value `compact` holds the exact best constant of
/// `∫ f² dμ ≤ C Ψ(R) ∫ dΓ(f,f)` for `f` supported in `B(x,R/4)`.
pub fn certify_pseudo_pi(
    form: &ReferenceForm,
    psi: &ScalingFunction,
    x: usize,
    big_r: f64,
    s_grid: &[f64],
    family: &TestFamily,
) -> Result<CertReport> {
    let g = form.graph();
    if s_grid.is_empty() {
        return Err(Error::Empty("s grid"));
    }
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    if x >= g.len() {
        return Err(Error::Vertex(x));
    }
    let inside = g.in_ball(x, big_r);
    let fam = family.clone().restricted(&inside);
    let mut best = (0.0, None);
    let mut table = crate::report::Table::new(&["s", "max_ratio"]);
    for &s in s_grid {
        let mut at_s: f64 = 0.0;
        for (i, f) in fam.functions.iter().enumerate() {
            let e = form.energy(f, f)?;
            if e <= 0.0 {
                continue;
            }
            let fs = ball_average(g, f, s);
            let dev: f64 = (0..g.len()).map(|y| (f[y] - fs[y]).powi(2) * g.measure[y]).sum();
            let ratio = dev / (psi.eval(s) * e);
            at_s = at_s.max(ratio);
            if ratio > best.0 {
                best = (ratio, Some((i, s)));
            }
        }
        table.push(vec![s, at_s]);
    }
    let compact = dirichlet_constant(form, &g.in_ball(x, big_r / 4.0))? / psi.eval(big_r);
    let mut rep = CertReport::measured("pseudo-pi", best.0, &family.id).value("compact", compact);
    rep.table = Some(table);
    if let Some((i, s)) = best.1 {
        rep = rep.value("s", s).with_witness(Witness {
            label: format!("member {i} at s={s}"),
            ball: None,
            function: Some(fam.functions[i].clone()),
        });
    }
    Ok(rep)
}

/// `max ∫ f² dμ / ∫ dΓ(f,f)` over `f` vanishing off `set`.
fn dirichlet_constant(form: &ReferenceForm, set: &[bool]) -> Result<f64> {
    let verts: Vec<usize> = (0..set.len()).filter(|&v| set[v]).collect();
    if verts.is_empty() {
        return Ok(0.0);
    }
    if verts.len() == set.len() {
        return Ok(f64::INFINITY);
    }
    let k = form.stiffness();
    let m = verts.len();
    let kd = DMatrix::from_fn(m, m, |i, j| k[(verts[i], verts[j])]);
    let md = DMatrix::from_fn(m, m, |i, j| if i == j { form.graph().measure[verts[i]] } else { 0.0 });
    let eig = linalg::sym_gen_eigen(&kd, &md)?;
    Ok(1.0 / eig.values[0])
}

/// `κ` from `1 − 1/κ = β₁/ν`; when `ν ≤ β₁` the relation has no solution above one
/// and `2` is used.
pub fn sobolev_exponent(nu: f64, beta1: f64) -> (f64, bool) {
    if nu > beta1 {
        (nu / (nu - beta1), true)
    } else {
        (2.0, false)
    }
}

/// `C_SI = max (∫ |f|^{2κ} dμ)^{1/κ} V(x,R)^{1−1/κ} / (Ψ(R) ∫ dΓ(f,f))` over the family
/// restricted to `B(x,R)`. Without `κ`, it is derived from `ν` (required then).
pub fn certify_sobolev(
    form: &ReferenceForm,
    psi: &ScalingFunction,
    x: usize,
    big_r: f64,
    kappa: Option<f64>,
    nu: Option<f64>,
    family: &TestFamily,
) -> Result<CertReport> {
    let g = form.graph();
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    let (kappa, derived) = match (kappa, nu) {
        (Some(k), _) => (k, None),
        (None, Some(nu)) => {
            let (k, ok) = sobolev_exponent(nu, psi.beta1);
            (k, Some(ok))
        }
        (None, None) => return Err(Error::Invalid("need κ or ν".into())),
    };
    if !(kappa > 1.0) {
        return Err(Error::Invalid(format!("κ must exceed 1, got {kappa}")));
    }
    let inside = g.in_ball(x, big_r);
    let whole = inside.iter().all(|&b| b);
    let vol = g.volume(x, big_r);
    let fam = family.clone().restricted(&inside);
    let mut best = (0.0, None);
    for (i, f) in fam.functions.iter().enumerate() {
        let norm: f64 = (0..g.len()).map(|y| f[y].abs().powf(2.0 * kappa) * g.measure[y]).sum();
        if norm == 0.0 {
            continue;
        }
        let e = form.energy(f, f)?;
        if e <= 1e-300 {
            return Ok(CertReport::measured("sobolev", f64::INFINITY, &family.id)
                .with_status(Status::Infeasible)
                .value("kappa", kappa)
                .note(if whole { "ball is the whole graph; constants have zero energy" } else { "zero-energy member" })
                .with_witness(Witness { label: format!("member {i}"), ball: None, function: Some(f.clone()) }));
        }
        let ratio = norm.powf(1.0 / kappa) * vol.powf(1.0 - 1.0 / kappa) / (psi.eval(big_r) * e);
        if ratio > best.0 {
            best = (ratio, Some(i));
        }
    }
    let mut rep = CertReport::measured("sobolev", best.0, &family.id).value("kappa", kappa);
    if let Some(ok) = derived {
        rep = rep.value("kappa_from_nu", if ok { 1.0 } else { 0.0 });
        if !ok {
            rep = rep.note("ν ≤ β₁: the volume relation gives no κ > 1, κ = 2 used");
        }
    }
    if whole {
        rep = rep.note("ball is the whole graph");
    }
    if let Some(i) = best.1 {
        rep = rep.with_witness(Witness { label: format!("member {i}"), ball: None, function: Some(fam.functions[i].clone()) });
    }
    Ok(rep)
}

/// Lowest Dirichlet modes of `B(x,R)`, tents at ball vertices and positive random
/// functions, all supported in the ball.
pub fn sobolev_family(form: &ReferenceForm, x: usize, big_r: f64, modes: usize, seed: u64) -> Result<TestFamily> {
    let g = form.graph();
    let inside = g.in_ball(x, big_r);
    let verts: Vec<usize> = (0..g.len()).filter(|&v| inside[v]).collect();
    let mut fam = TestFamily::new("dirichlet", Vec::new());
    if !verts.is_empty() && verts.len() < g.len() {
        let k = form.stiffness();
        let m = verts.len();
        let kd = DMatrix::from_fn(m, m, |i, j| k[(verts[i], verts[j])]);
        let md = DMatrix::from_fn(m, m, |i, j| if i == j { g.measure[verts[i]] } else { 0.0 });
        let eig = linalg::sym_gen_eigen(&kd, &md)?;
        for c in 0..modes.min(m) {
            let mut f = vec![0.0; g.len()];
            for (i, &v) in verts.iter().enumerate() {
                f[v] = eig.vectors[(i, c)];
            }
            fam.functions.push(f);
        }
        fam.id = format!("dirichlet{}", modes.min(m));
    }
    let step = (verts.len() / 8).max(1);
    let centers: Vec<usize> = verts.iter().step_by(step).copied().collect();
    let fam = fam.join(TestFamily::tents(g, &centers, big_r / 2.0).restricted(&inside));
    let mut rng = families::rng(seed);
    Ok(fam.join(TestFamily::random_positive(g.len(), 8, 0.0, &mut rng).restricted(&inside)))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::space::{build_space, SpaceSpec};

    fn form(spec: SpaceSpec) -> ReferenceForm {
        ReferenceForm::new(Arc::new(build_space(&spec).unwrap()))
    }

    #[test]
    fn two_vertex_ball_by_hand() {
        let f = form(SpaceSpec::path(1));
        let psi = ScalingFunction::diffusive();
        let ball = BallTriple { center: 0, big_r: 1.0, r: 0.5 };
        let rep = certify_pi(&f, &psi, &ball, PiMode::Strong).unwrap();
        // K(1,−1) = 2(1,−1): variance 2 over energy 4
        assert!((rep.constant - 0.5 / 2.25).abs() < 1e-12);
        assert!((rep.get("witness_ratio").unwrap() - rep.constant).abs() < 1e-9 * rep.constant);
    }

    #[test]
    fn weighted_two_vertex_by_hand() {
        let f = form(SpaceSpec::path(1));
        let psi = ScalingFunction::diffusive();
        let cut = CutoffFunction {
            values: vec![1.0, 0.5],
            center: 0,
            big_r: 0.5,
            r: 1.0,
            epsilon: 0.125,
            c0: None,
            c0_family: None,
            construction: crate::cutoff::Construction::Plateau,
        };
        let rep = certify_weighted_pi(&f, &psi, &cut).unwrap();
        assert!((rep.get("ratio").unwrap() - 8.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_ball_is_infeasible() {
        // a U shape under the Euclidean metric: the ball around a foot misses the
        // far corner and splits into two pieces
        use crate::space::{EdgeRecord, GraphFile, MetricKind, VertexRecord};
        let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let file = GraphFile {
            vertices: pts
                .iter()
                .enumerate()
                .map(|(id, p)| VertexRecord { id, coords: Some(p.to_vec()), measure: 1.0 })
                .collect(),
            edges: (0..3).map(|a| EdgeRecord { a, b: a + 1, conductance: 1.0 }).collect(),
            metric: MetricKind::Euclidean,
            mesh: 1.0,
        };
        let f = ReferenceForm::new(Arc::new(file.into_graph("u", 100).unwrap()));
        let ball = BallTriple { center: 0, big_r: 1.0, r: 0.1 };
        let rep = certify_pi(&f, &ScalingFunction::diffusive(), &ball, PiMode::Strong).unwrap();
        assert_eq!(rep.status, Status::Infeasible);
        let w = rep.witness.unwrap().function.unwrap();
        assert_eq!(w, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn kappa_fallback() {
        assert_eq!(sobolev_exponent(1.58, 2.32), (2.0, false));
        let (k, ok) = sobolev_exponent(4.0, 2.0);
        assert!(ok && (k - 2.0).abs() < 1e-15);
    }
}
