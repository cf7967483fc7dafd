use std::sync::Arc;

use heatlab::forms::{harmonic_profile, FormSchedule, ReferenceForm};
use heatlab::hke::*;
use heatlab::propagator::{kernel, Domain, KernelMatrix, Scheme, SolverConfig};
use heatlab::space::{build_space, MetricMeasureGraph, ScalingFunction, SpaceSpec};
use heatlab::{Error, Status};
use proptest::prelude::*;

fn graph(spec: SpaceSpec) -> Arc<MetricMeasureGraph> {
    Arc::new(build_space(&spec).unwrap())
}

fn symmetric(g: &Arc<MetricMeasureGraph>) -> FormSchedule {
    FormSchedule::symmetric(Arc::new(ReferenceForm::new(g.clone())))
}

fn cfg() -> SolverConfig {
    SolverConfig::default().with_rate(4096)
}

fn kernels(sch: &FormSchedule, times: &[f64], cfg: &SolverConfig, domain: &Domain) -> Vec<KernelMatrix> {
    times.iter().map(|&t| kernel(sch, 0.0, t, cfg, domain).unwrap()).collect()
}

#[test]
fn rate_vanishes_at_zero_distance_and_rejects_bad_time() {
    for rf in [RateFunction::phi(ScalingFunction::gasket()), RateFunction::phi_beta(ScalingFunction::gasket())] {
        assert_eq!(rf.rate(0.0, 0.3).unwrap(), 0.0);
        assert!(matches!(rf.rate(1.0, 0.0), Err(Error::Invalid(_))));
        assert!(rf.rate(1.0, -1.0).is_err());
    }
}

#[test]
fn gaussian_rate_closed_form() {
    let rf = RateFunction::phi(ScalingFunction::diffusive());
    assert_eq!(rf.rate(2.0, 1.0).unwrap(), 1.0);
    let search = rf.clone().with_strategy(heatlab::hke::Strategy::Search);
    for (r, t) in [(2.0, 1.0), (0.3, 0.01), (5.0, 7.0)] {
        let exact = r * r / (4.0 * t);
        assert!((rf.rate(r, t).unwrap() - exact).abs() <= 1e-12 * exact);
        assert!((search.rate(r, t).unwrap() - exact).abs() <= 1e-9 * exact);
    }
}

#[test]
fn gasket_rate_closed_form_matches_search() {
    let psi = ScalingFunction::gasket();
    let beta: f64 = 5f64.ln() / 2f64.ln();
    for rf in [RateFunction::phi(psi.clone()), RateFunction::phi_beta(psi.clone())] {
        let search = rf.clone().with_strategy(heatlab::hke::Strategy::Search);
        for i in 0..10 {
            for j in 0..10 {
                let r = 0.01 * 1.7f64.powi(i);
                let t = 1e-4 * 3f64.powi(j);
                let closed = (1.0 - 1.0 / beta) * beta.powf(-1.0 / (beta - 1.0)) * (r.powf(beta) / t).powf(1.0 / (beta - 1.0));
                let a = rf.rate(r, t).unwrap();
                let b = search.rate(r, t).unwrap();
                assert!((a - closed).abs() <= 1e-12 * closed.max(1e-300), "closed form at ({r}, {t})");
                assert!((a - b).abs() <= 1e-9 * a, "search at ({r}, {t}): {a} vs {b}");
            }
        }
    }
}

#[test]
fn phi_beta_has_a_closed_form_for_piecewise_scaling() {
    let psi = ScalingFunction::piecewise(1.0, vec![0.5], vec![2.0, 3.0], 1.0).unwrap();
    let rf = RateFunction::phi_beta(psi.clone());
    let search = rf.clone().with_strategy(heatlab::hke::Strategy::Search);
    for (r, t) in [(0.2, 0.01), (0.9, 0.05), (2.0, 1.0)] {
        let (a, b) = (rf.rate(r, t).unwrap(), search.rate(r, t).unwrap());
        assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
    }
    let phi = RateFunction::phi(psi);
    assert!(phi.rate(0.9, 0.05).unwrap() > 0.0);
}

#[test]
fn davies_gaffney_is_feasible_for_long_times() {
    let g = graph(SpaceSpec::path(32).with_span(1.0));
    let sch = symmetric(&g);
    let rep = davies_gaffney_check(&sch, &ScalingFunction::diffusive(), 4, 28, 0.0, &cfg(), &DaviesOptions::geometric(5.0, 50.0, 4)).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.constant.is_finite());
    let same = davies_gaffney_check(&sch, &ScalingFunction::diffusive(), 4, 4, 0.0, &cfg(), &DaviesOptions::geometric(1.0, 2.0, 2));
    assert!(same.is_err());
}

#[test]
fn davies_gaffney_on_the_path_shows_gaussian_decay() {
    let g = graph(SpaceSpec::path(128).with_span(1.0));
    let sch = symmetric(&g);
    let x = g.nearest_vertex([0.375, 0.0]).unwrap();
    let y = g.nearest_vertex([0.625, 0.0]).unwrap();
    let rep = davies_gaffney_check(&sch, &ScalingFunction::diffusive(), x, y, 0.0, &cfg(), &DaviesOptions::geometric(0.003, 0.06, 16)).unwrap();
    let slope = rep.get("gaussian_slope").unwrap();
    println!("Davies-Gaffney C' {} slope {slope}", rep.constant);
    assert_eq!(rep.status, Status::Pass);
    assert!(slope >= -0.25 * 1.5 && slope <= -0.25 / 1.5, "{slope}");
}

#[test]
fn davies_gaffney_under_skew_stays_within_four_times() {
    let g = graph(SpaceSpec::gasket(3));
    let f = Arc::new(ReferenceForm::new(g.clone()));
    let c = &g.corners;
    let h = harmonic_profile(&f, &[(c[0], 1.0), (c[1], 0.0), (c[2], 0.0)]).unwrap();
    let x = g.nearest_vertex([0.25, 0.0]).unwrap();
    let y = g.nearest_vertex([0.75, 0.0]).unwrap();
    let opts = DaviesOptions::geometric(0.005, 0.5, 16);
    let at = |lam: f64| {
        let sch = FormSchedule::nonsymmetric(f.clone(), &h, lam).unwrap();
        davies_gaffney_check(&sch, &ScalingFunction::gasket(), x, y, 0.0, &cfg(), &opts).unwrap().constant
    };
    let (c0, c1) = (at(0.0), at(1.0));
    println!("Davies-Gaffney C' lambda 0: {c0}, lambda 1: {c1}");
    assert!(c0.is_finite() && c1.is_finite());
    assert!(c1 <= 4.0 * c0);
}

#[test]
fn upper_fit_on_two_vertices() {
    let g = graph(SpaceSpec::path(1));
    let sch = symmetric(&g);
    let exact = SolverConfig::default().with_scheme(Scheme::Exact);
    let ks = kernels(&sch, &[0.05, 0.5, 2.0], &exact, &Domain::Global);
    let rep = upper_hke_fit(&g, &ScalingFunction::diffusive(), &ks, &FitOptions::default()).unwrap();
    let expect = (1.0 + (-0.1f64).exp()) / 2.0;
    assert!((rep.get("c_diag").unwrap() - expect).abs() < 1e-12);
    assert_eq!(rep.get("diag_binding_dt"), Some(0.05));
    assert!(rep.get("c_diag").unwrap() <= 1.0);
    assert!(matches!(upper_hke_fit(&g, &ScalingFunction::diffusive(), &[], &FitOptions::default()), Err(Error::Empty(_))));
}

fn path_upper(n: usize) -> f64 {
    let g = graph(SpaceSpec::path(n).with_span(1.0));
    let ks = kernels(&symmetric(&g), &[0.001, 0.004, 0.016, 0.064], &cfg(), &Domain::Global);
    upper_hke_fit(&g, &ScalingFunction::diffusive(), &ks, &FitOptions::default()).unwrap().get("c_diag").unwrap()
}

#[test]
fn upper_fit_diagonal_is_stable_between_resolutions() {
    let (a, b) = (path_upper(64), path_upper(128));
    println!("on-diagonal C: path 64 {a}, path 128 {b}");
    assert!(a > 0.0 && b > 0.0 && a / b <= 2.0 && b / a <= 2.0);
}

#[test]
fn upper_fit_is_invariant_under_measure_scaling() {
    let g = graph(SpaceSpec::path(32).with_span(1.0));
    let scaled = Arc::new(g.rescaled(3.0, 3.0));
    let times = [0.002, 0.01, 0.05];
    let psi = ScalingFunction::diffusive();
    let a = upper_hke_fit(&g, &psi, &kernels(&symmetric(&g), &times, &cfg(), &Domain::Global), &FitOptions::default()).unwrap();
    let b = upper_hke_fit(&scaled, &psi, &kernels(&symmetric(&scaled), &times, &cfg(), &Domain::Global), &FitOptions::default())
        .unwrap();
    assert!((a.constant - b.constant).abs() <= 1e-9 * a.constant, "{} vs {}", a.constant, b.constant);
    assert_eq!(a.get("c_prime"), b.get("c_prime"));
}

#[test]
fn lower_fit_on_two_vertices() {
    let g = graph(SpaceSpec::path(1));
    let sch = symmetric(&g);
    let exact = SolverConfig::default().with_scheme(Scheme::Exact);
    let ks = kernels(&sch, &[0.1, 0.5], &exact, &Domain::Global);
    let rep = lower_hke_fit(&g, &ScalingFunction::diffusive(), &ks, 0, 10.0, 0.5).unwrap();
    let expect = (1.0 + (-1.0f64).exp()) / 2.0;
    assert!((rep.constant - expect).abs() < 1e-12, "{}", rep.constant);
}

fn path_lower(n: usize) -> f64 {
    let g = graph(SpaceSpec::path(n).with_span(1.0));
    let c = g.nearest_vertex([0.5, 0.0]).unwrap();
    let dom = Domain::dirichlet(&g.in_ball(c, 0.25));
    let ks = kernels(&symmetric(&g), &[0.001, 0.004, 0.016, 0.0625], &cfg(), &dom);
    let rep = lower_hke_fit(&g, &ScalingFunction::diffusive(), &ks, c, 0.25, 0.25).unwrap();
    assert_eq!(rep.context.get("off_diagonal").map(String::as_str), Some("fitted"));
    rep.constant
}

#[test]
fn lower_fit_is_stable_between_resolutions() {
    let (a, b) = (path_lower(64), path_lower(128));
    println!("near-diagonal c': path 64 {a}, path 128 {b}");
    assert!(a > 0.0 && b > 0.0 && a / b <= 2.0 && b / a <= 2.0);
}

#[test]
fn lower_fit_skips_off_diagonal_on_non_geodesic_metric() {
    let g = graph(SpaceSpec::gasket(2));
    assert!(!g.is_geodesic());
    let x = g.center();
    let dom = Domain::dirichlet(&g.in_ball(x, 0.6));
    let ks = kernels(&symmetric(&g), &[0.01, 0.05], &cfg(), &dom);
    let rep = lower_hke_fit(&g, &ScalingFunction::gasket(), &ks, x, 0.6, 0.25).unwrap();
    assert_eq!(rep.context.get("off_diagonal").map(String::as_str), Some("not-applicable"));
    assert!(rep.get("c_triple_prime").is_none());
}

#[test]
fn lower_fit_refuses_nonpositive_entries() {
    let g = graph(SpaceSpec::path(1));
    let k = KernelMatrix {
        s: 0.0,
        t: 0.1,
        domain: Domain::Global,
        schedule: "x".into(),
        scheme: Scheme::Exact,
        times: vec![0.0, 0.1],
        entries: nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.9]),
        step_m_matrix: None,
    };
    assert!(matches!(lower_hke_fit(&g, &ScalingFunction::diffusive(), &[k], 0, 10.0, 0.5), Err(Error::Invalid(_))));
}

proptest! {
    #[test]
    fn rate_is_monotone(r in 0.01f64..2.0, dr in 0.0f64..1.0, t in 1e-3f64..1.0, dt in 0.0f64..1.0, beta in 2.0f64..3.5) {
        let rf = RateFunction::phi(ScalingFunction::power(1.0, beta));
        let base = rf.rate(r, t).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(rf.rate(r + dr, t).unwrap() >= base * (1.0 - 1e-12));
        prop_assert!(rf.rate(r, t + dt).unwrap() <= base * (1.0 + 1e-12));
    }
}
