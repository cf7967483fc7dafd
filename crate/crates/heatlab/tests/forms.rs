use std::sync::Arc;

use heatlab::cutoff::{csa_family, layered_cutoff, measure_layer_constants, certify_csa};
use heatlab::families::{rng, SmoothProfile, TestFamily};
use heatlab::forms::*;
use heatlab::space::{build_space, MetricMeasureGraph, ScalingFunction, SpaceSpec};
use proptest::prelude::*;
use rand::Rng;

fn form(spec: SpaceSpec) -> Arc<ReferenceForm> {
    Arc::new(ReferenceForm::new(Arc::new(build_space(&spec).unwrap())))
}

fn corner_profile(form: &ReferenceForm) -> HarmonicProfile {
    let c = &form.graph().corners;
    let mut b = vec![(c[0], 1.0)];
    b.extend(c[1..].iter().map(|&v| (v, 0.0)));
    harmonic_profile(form, &b).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn gasket_harmonic_extension_two_fifths_one_fifth() {
    let f = form(SpaceSpec::gasket(1));
    let g = f.graph();
    let p = harmonic_profile(&f, &[(g.corners[0], 1.0), (g.corners[1], 0.0), (g.corners[2], 0.0)]).unwrap();
    let at = |x: f64, y: f64| p.values[g.nearest_vertex([x, y]).unwrap()];
    let s = 3f64.sqrt() / 4.0;
    assert!((at(0.5, 0.0) - 0.4).abs() < 1e-12);
    assert!((at(0.25, s) - 0.4).abs() < 1e-12);
    assert!((at(0.75, s) - 0.2).abs() < 1e-12);
}

#[test]
fn exact_identities_on_three_families() {
    for spec in [SpaceSpec::path(32), SpaceSpec::grid(16), SpaceSpec::gasket(3)] {
        let f = form(spec);
        let n = f.len();
        let h = corner_profile(&f);
        let sched = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
        let dec = decompose(&sched, 0.0).unwrap();
        let mut r = rng(11);
        for _ in 0..50 {
            let u: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let e = f.energy(&u, &v).unwrap();
            let gam = f.energy_measure(&u, &v).unwrap();
            let total: f64 = gam.iter().zip(&f.graph().measure).map(|(a, m)| a * m).sum();
            assert!(close(total, e, 1e-10));
            let guu = f.energy_measure(&u, &u).unwrap();
            let gvv = f.energy_measure(&v, &v).unwrap();
            for x in 0..n {
                assert!(gam[x].abs() <= (guu[x] * gvv[x]).sqrt() * (1.0 + 1e-10) + 1e-300);
            }
            assert!(sched.skew(0.0, &u, &u).unwrap().abs() <= 1e-10 * (1.0 + f.norm_f_sq(&u)));
            assert!(close(sched.sym(0.0, &u, &v).unwrap(), e, 1e-10));
            assert!(close(dec.r(&u, &v), -dec.l(&v, &u), 1e-10));
            let parts = dec.strongly_local(&u, &v) + dec.boundary(&u, &v) + dec.l(&u, &v) + dec.r(&u, &v);
            assert!(close(parts, dec.total(&u, &v), 1e-10));
            assert!(f.energy(&vec![1.0; n], &v).unwrap().abs() < 1e-10 * (1.0 + e.abs()));
            let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
            let u2: Vec<f64> = u.iter().map(|a| a * a).collect();
            let v2: Vec<f64> = v.iter().map(|a| a * a).collect();
            let lhs = f.gamma_integral(&vec![1.0; n], &uv, &uv);
            let rhs = 2.0 * f.gamma_integral(&u2, &v, &v) + 2.0 * f.gamma_integral(&v2, &u, &u);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

#[test]
fn conductance_and_measure_scaling() {
    let g = build_space(&SpaceSpec::gasket(2)).unwrap();
    let base = ReferenceForm::new(Arc::new(g.clone()));
    let doubled_w = ReferenceForm::new(Arc::new(g.rescaled(1.0, 2.0)));
    let doubled_m = ReferenceForm::new(Arc::new(g.rescaled(2.0, 1.0)));
    let u = SmoothProfile::draw(&mut rng(2)).sample(&g);
    let e = base.energy(&u, &u).unwrap();
    assert!(close(doubled_w.energy(&u, &u).unwrap(), 2.0 * e, 1e-14));
    assert!(close(doubled_m.energy(&u, &u).unwrap(), e, 1e-14));
    assert!(close(doubled_m.inner(&u, &u), 2.0 * base.inner(&u, &u), 1e-14));
}

fn smooth_pair(g: &MetricMeasureGraph) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(5);
    (SmoothProfile::draw(&mut r).sample(g), SmoothProfile::draw(&mut r).sample(g))
}

/// L¹ defect of the product rule for `l` on three smooth functions.
fn product_defect(level: usize) -> f64 {
    let f = form(SpaceSpec::gasket(level));
    let h = corner_profile(&f);
    let sched = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
    let dec = decompose(&sched, 0.0).unwrap();
    let (u, v) = smooth_pair(f.graph());
    let w = SmoothProfile::draw(&mut rng(6)).sample(f.graph());
    let m = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
    (dec.l(&m(&u, &w), &v) - dec.l(&u, &m(&w, &v)) - dec.l(&w, &m(&u, &v))).abs()
}

#[test]
fn chain_and_product_defects_shrink_with_level() {
    let chain: Vec<f64> = (2..=4)
        .map(|m| {
            let f = form(SpaceSpec::gasket(m));
            let (u, v) = smooth_pair(f.graph());
            f.chain_rule_defect(|s| s * s, |s| 2.0 * s, &u, &v).unwrap()
        })
        .collect();
    assert!(chain[0] > chain[1] && chain[1] > chain[2], "{chain:?}");
    let prod: Vec<f64> = (2..=4).map(product_defect).collect();
    assert!(prod[0] > prod[1] && prod[1] > prod[2], "{prod:?}");
}

#[test]
fn assumption0_reference_and_sweep() {
    let f = form(SpaceSpec::path(8));
    let mut r = rng(1);
    let fam = TestFamily::smooth(f.graph(), 16, &mut r).join(TestFamily::random(f.len(), 8, &mut r));
    let sym = FormSchedule::symmetric(f.clone());
    let rep = verify_assumption0(&sym, &fam, &[0.0]).unwrap();
    assert_eq!(rep.get("c"), Some(1.0));
    assert_eq!(rep.get("alpha"), Some(1.0));
    // ‖E*‖ in the F-norm is the largest K/(K+M) eigenvalue
    let eig = heatlab::linalg::sym_gen_eigen(f.stiffness(), &(f.stiffness() + f.mass())).unwrap();
    assert!(close(rep.constant, *eig.values.last().unwrap(), 1e-10));

    let h = harmonic_profile(&f, &[(0, 0.0), (8, 1.0)]).unwrap();
    let mut last = 0.0;
    for lam in [1.0, 2.0, 4.0] {
        let s = FormSchedule::nonsymmetric(f.clone(), &h, lam).unwrap();
        let rep = verify_assumption0(&s, &fam, &[0.0]).unwrap();
        let alpha = rep.get("alpha").unwrap();
        assert!(rep.constant.is_finite() && alpha >= last);
        assert!(rep.get("alpha_family").unwrap() <= alpha + 1e-9);
        last = alpha;
    }
}

#[test]
fn product_rule_defect_for_affine_shrinks_on_path() {
    // affine arguments still produce cubic products, which the discrete energy
    // density does not differentiate exactly
    let defect = |n: usize| {
        let f = form(SpaceSpec::path(n).with_span(1.0));
        let h = harmonic_profile(&f, &[(0, 0.0), (n, 1.0)]).unwrap();
        let s = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
        let aff = |a: f64, b: f64| (0..=n).map(|i| a + b * i as f64 / n as f64).collect::<Vec<_>>();
        let fam = TestFamily::new("affine", vec![aff(1.0, 0.5), aff(-2.0, 0.25), aff(0.5, -1.0)]);
        verify_assumption0(&s, &fam, &[0.0]).unwrap().get("product_rule_defect").unwrap()
    };
    let (a, b, c) = (defect(8), defect(16), defect(32));
    assert!(a > b && b > c && c < 0.1 * a);
}

fn gasket_cutoff(level: usize) -> (Arc<ReferenceForm>, heatlab::cutoff::CutoffFunction) {
    let f = form(SpaceSpec::gasket(level));
    let psi = ScalingFunction::gasket();
    let x = f.graph().nearest_vertex([0.5, 0.0]).unwrap();
    let fam = csa_family(&f, 24, 8, 7).unwrap();
    let lc = measure_layer_constants(&f, x, 0.25, 0.25, &psi, &fam).unwrap();
    let c = layered_cutoff(f.graph(), x, 0.25, 0.25, 0.125, &lc, &psi).unwrap();
    let rep = certify_csa(&f, &c, &psi, &fam).unwrap();
    (f, c.certified(&rep))
}

#[test]
fn skew_bundles_vanish_and_scale_linearly() {
    let (f, cut) = gasket_cutoff(3);
    let psi = ScalingFunction::gasket();
    let h = corner_profile(&f);
    let fam = TestFamily::random_positive(f.len(), 12, 0.5, &mut rng(3));
    let at = |lam: f64| {
        let s = FormSchedule::nonsymmetric(f.clone(), &h, lam).unwrap();
        verify_skew_assumptions(&s, &[cut.clone()], &psi, &fam, &[0.0]).unwrap()
    };
    for rep in at(0.0).reports() {
        assert!(rep.constant.abs() < 1e-10, "{rep:?}");
    }
    let base = at(1.0).reports();
    for lam in [0.5, 2.0] {
        for (a, b) in at(lam).reports().iter().zip(&base) {
            assert!(a.constant.is_finite() && b.constant > 0.0);
            assert!(close(a.constant, lam * b.constant, 1e-9), "{} {}", a.constant, b.constant);
        }
    }
}

#[test]
fn skew_lhs_for_constant_function() {
    let (f, cut) = gasket_cutoff(3);
    let psi = ScalingFunction::gasket();
    let h = corner_profile(&f);
    let s = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
    let one = vec![1.0; f.len()];
    let rep = verify_skew_assumptions(&s, &[cut.clone()], &psi, &TestFamily::constant(f.len(), 1.0), &[0.0]).unwrap();
    let psi2: Vec<f64> = cut.values.iter().map(|p| p * p).collect();
    // E^sym(ψ²,1) vanishes and the two skew terms agree in size
    let direct = s.skew(0.0, &psi2, &one).unwrap().abs();
    assert!(s.sym(0.0, &psi2, &one).unwrap().abs() < 1e-12);
    assert!(close(rep.assumption1.get("max_lhs").unwrap(), 2.0 * direct, 1e-12));
}

#[test]
fn skew_rejects_nonpositive_family() {
    let (f, cut) = gasket_cutoff(3);
    let h = corner_profile(&f);
    let s = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
    let fam = TestFamily::new("zero", vec![vec![0.0; f.len()]]);
    assert!(verify_skew_assumptions(&s, &[cut], &ScalingFunction::gasket(), &fam, &[0.0]).is_err());
}

#[test]
fn schedule_file_round_trip() {
    let f = form(SpaceSpec::path(6));
    let h = harmonic_profile(&f, &[(0, 0.0), (6, 1.0)]).unwrap();
    let s = FormSchedule::nonsymmetric(f.clone(), &h, 0.5).unwrap();
    let text = serde_json::to_string(&s.to_file()).unwrap();
    let back = FormSchedule::from_file(f.clone(), &serde_json::from_str(&text).unwrap()).unwrap();
    let a = s.operator_at(0.0).unwrap();
    let b = back.operator_at(0.0).unwrap();
    assert!((a - b).amax() < 1e-15);
}

proptest! {
    #[test]
    fn skew_part_is_alternating(seed in 0u64..1000, lam in -3.0f64..3.0) {
        let f = form(SpaceSpec::gasket(2));
        let h = corner_profile(&f);
        let s = FormSchedule::nonsymmetric(f.clone(), &h, lam).unwrap();
        let mut r = rng(seed);
        let u: Vec<f64> = (0..f.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..f.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        prop_assert!(s.skew(0.0, &u, &u).unwrap().abs() < 1e-12);
        prop_assert!(close(s.skew(0.0, &u, &v).unwrap(), -s.skew(0.0, &v, &u).unwrap(), 1e-12));
    }

    #[test]
    fn energy_is_nonnegative_and_kills_constants(seed in 0u64..1000, c in -5.0f64..5.0) {
        let f = form(SpaceSpec::grid(5));
        let mut r = rng(seed);
        let u: Vec<f64> = (0..f.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        let e = f.energy(&u, &u).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(close(f.energy(&shifted, &shifted).unwrap(), e, 1e-12));
    }
}
