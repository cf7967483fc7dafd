use std::sync::Arc;

use heatlab::families::{rng, TestFamily};
use heatlab::forms::{harmonic_profile, verify_assumption0, FormSchedule, ReferenceForm};
use heatlab::propagator::*;
use heatlab::space::{build_space, SpaceSpec};
use heatlab::Status;
use proptest::prelude::*;

fn form(spec: SpaceSpec) -> Arc<ReferenceForm> {
    Arc::new(ReferenceForm::new(Arc::new(build_space(&spec).unwrap())))
}

fn skew_path(n: usize, lam: f64) -> FormSchedule {
    let f = form(SpaceSpec::path(n));
    let h = harmonic_profile(&f, &[(0, 0.0), (n, 1.0)]).unwrap();
    FormSchedule::nonsymmetric(f, &h, lam).unwrap()
}

/// Two windows with different skew strength, breakpoint at 0.3.
fn switching_path(n: usize) -> FormSchedule {
    let f = form(SpaceSpec::path(n));
    let h = harmonic_profile(&f, &[(0, 0.0), (n, 1.0)]).unwrap().values;
    FormSchedule::time_dependent(f, vec![(0.0, 0.3, h.clone(), 2.0), (0.3, 2.0, h, -1.0)]).unwrap()
}

fn max_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[test]
fn zero_datum_stays_zero() {
    let s = skew_path(8, 2.0);
    let tr = solve_ivp(&s, &vec![0.0; 9], 0.0, 1.0, &SolverConfig::default()).unwrap();
    assert!(tr.snapshots.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(tr.initial(), &vec![0.0; 9][..]);
}

#[test]
fn two_vertex_kernel_by_hand() {
    let s = FormSchedule::symmetric(form(SpaceSpec::path(1)));
    let cfg = SolverConfig::default().with_scheme(Scheme::Exact);
    let k = kernel(&s, 0.0, 0.5, &cfg, &Domain::Global).unwrap();
    let e = (-1.0f64).exp();
    assert!((k.get(0, 0) - (1.0 + e) / 2.0).abs() < 1e-13);
    assert!((k.get(1, 0) - (1.0 - e) / 2.0).abs() < 1e-13);
}

#[test]
fn constants_are_preserved_without_skew() {
    let f = form(SpaceSpec::gasket(2));
    let ones = vec![1.0; f.len()];
    let h = vec![0.3; f.len()];
    for s in [
        FormSchedule::symmetric(f.clone()),
        FormSchedule::time_dependent(f.clone(), vec![(0.0, 1.0, h, 0.0)]).unwrap(),
    ] {
        for scheme in [Scheme::BackwardEuler, Scheme::Theta { theta: 0.5 }, Scheme::Exact] {
            let tr = solve_ivp(&s, &ones, 0.0, 1.0, &SolverConfig::default().with_scheme(scheme)).unwrap();
            assert!(tr.snapshots.iter().flatten().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }
}

#[test]
fn transition_identity_and_composition() {
    let s = switching_path(8);
    let cfg = SolverConfig::default();
    let id = transition(&s, 0.4, 0.4, &cfg, &Domain::Global).unwrap();
    assert_eq!(id, nalgebra::DMatrix::identity(9, 9));
    let whole = transition(&s, 0.0, 1.0, &cfg, &Domain::Global).unwrap();
    let first = transition(&s, 0.0, 0.5, &cfg, &Domain::Global).unwrap();
    let second = transition(&s, 0.5, 1.0, &cfg, &Domain::Global).unwrap();
    assert!(max_diff(&whole, &(second * first)) <= 1e-12);
}

#[test]
fn skew_transition_respects_coercivity_bound() {
    let f = form(SpaceSpec::path(8));
    let h = harmonic_profile(&f, &[(0, 0.0), (8, 1.0)]).unwrap();
    let s = FormSchedule::nonsymmetric(f.clone(), &h, 3.0).unwrap();
    let mut r = rng(2);
    let fam = TestFamily::smooth(f.graph(), 8, &mut r).join(TestFamily::random(f.len(), 8, &mut r));
    let a0 = verify_assumption0(&s, &fam, &[0.0]).unwrap();
    let (alpha, c) = (a0.get("alpha").unwrap(), a0.get("c").unwrap());
    for scheme in [Scheme::BackwardEuler, Scheme::Exact] {
        let rep = check_contraction(&s, 0.0, 0.75, &SolverConfig::default().with_scheme(scheme), alpha, c).unwrap();
        assert_eq!(rep.status, Status::Pass, "{:?}", rep.values);
    }
}

#[test]
fn symmetric_kernel_is_symmetric() {
    let s = FormSchedule::symmetric(form(SpaceSpec::gasket(2)));
    for scheme in [Scheme::BackwardEuler, Scheme::Theta { theta: 0.5 }, Scheme::Exact] {
        let k = kernel(&s, 0.0, 0.3, &SolverConfig::default().with_scheme(scheme), &Domain::Global).unwrap();
        assert!(max_diff(&k.entries, &k.entries.transpose()) <= 1e-10 * k.entries.amax());
    }
}

#[test]
fn dirichlet_kernel_is_dominated() {
    let f = form(SpaceSpec::gasket(3));
    let g = f.graph();
    let x = g.nearest_vertex([0.5, 0.0]).unwrap();
    let s = FormSchedule::symmetric(f.clone());
    let cfg = SolverConfig::default();
    let global = kernel(&s, 0.0, 0.05, &cfg, &Domain::Global).unwrap();
    let big = kernel(&s, 0.0, 0.05, &cfg, &Domain::dirichlet(&g.in_ball(x, 0.5))).unwrap();
    let small = kernel(&s, 0.0, 0.05, &cfg, &Domain::dirichlet(&g.in_ball(x, 0.3))).unwrap();
    for y in 0..g.len() {
        for z in 0..g.len() {
            assert!(small.get(y, z) <= big.get(y, z) + 1e-10);
            assert!(big.get(y, z) <= global.get(y, z) + 1e-10);
        }
    }
}

#[test]
fn adjoint_kernel_is_transpose() {
    let s = switching_path(10);
    let adj = s.adjoint_on(0.0, 1.0).unwrap();
    let cfg = SolverConfig::default().with_steps(20);
    for domain in [Domain::Global, Domain::Dirichlet { vertices: (2..9).collect() }] {
        let k = kernel(&s, 0.0, 1.0, &cfg, &domain).unwrap();
        let ka = kernel(&adj, 0.0, 1.0, &cfg, &domain).unwrap();
        assert!(max_diff(&k.entries.transpose(), &ka.entries) <= 1e-12, "{domain:?}");
    }
}

#[test]
fn chapman_kolmogorov_aligned_is_exact() {
    let s = FormSchedule::symmetric(form(SpaceSpec::gasket(3)));
    let cfg = SolverConfig::default();
    let k1 = kernel(&s, 0.0, 0.25, &cfg, &Domain::Global).unwrap();
    let k2 = kernel(&s, 0.25, 0.5, &cfg, &Domain::Global).unwrap();
    let rep = check_chapman_kolmogorov(&s, &k1, &k2, &cfg).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.get("relative_defect").unwrap() <= 1e-12);
    // r = s: multiplying by the identity kernel
    let k0 = kernel(&s, 0.0, 0.0, &cfg, &Domain::Global).unwrap();
    let rep = check_chapman_kolmogorov(&s, &k0, &k1, &cfg).unwrap();
    assert!(rep.get("relative_defect").unwrap() <= 1e-12);
}

#[test]
fn chapman_kolmogorov_misaligned_shrinks() {
    let s = switching_path(16);
    let fine = SolverConfig::default().with_rate(4096);
    let mut last = f64::INFINITY;
    for n in [8, 16, 32] {
        let k1 = kernel(&s, 0.0, 0.5, &SolverConfig::default().with_steps(n), &Domain::Global).unwrap();
        let k2 = kernel(&s, 0.5, 1.0, &SolverConfig::default().with_steps(n + 1), &Domain::Global).unwrap();
        let rep = check_chapman_kolmogorov(&s, &k1, &k2, &fine).unwrap();
        assert_eq!(rep.status, Status::NotApplicable);
        let d = rep.get("defect").unwrap();
        assert!(d < last, "{n}: {d} vs {last}");
        last = d;
    }
    let k1 = kernel(&s, 0.0, 0.5, &fine, &Domain::Global).unwrap();
    let k2 = kernel(&s, 0.6, 1.0, &fine, &Domain::Global).unwrap();
    assert!(check_chapman_kolmogorov(&s, &k1, &k2, &fine).is_err());
}

#[test]
fn positivity_cases() {
    let sym = FormSchedule::symmetric(form(SpaceSpec::gasket(2)));
    let cfg = SolverConfig::default();
    let id = kernel(&sym, 0.3, 0.3, &cfg, &Domain::Global).unwrap();
    assert_eq!(check_positivity(&id, 0.0).unwrap().status, Status::Pass);
    let ex = kernel(&sym, 0.0, 0.5, &cfg.clone().with_scheme(Scheme::Exact), &Domain::Global).unwrap();
    assert!(check_positivity(&ex, 0.0).unwrap().get("min_entry").unwrap() > 0.0);
    let be = kernel(&sym, 0.0, 0.5, &cfg, &Domain::Global).unwrap();
    let rep = check_positivity(&be, 0.0).unwrap();
    assert_eq!(rep.get("step_m_matrix"), Some(1.0));

    // Crank–Nicolson with one long step overshoots; refinement restores positivity
    let skew = skew_path(8, 4.0);
    let cn = |n| {
        let cfg = SolverConfig::default().with_scheme(Scheme::Theta { theta: 0.5 }).with_steps(n);
        check_positivity(&kernel(&skew, 0.0, 2.0, &cfg, &Domain::Global).unwrap(), 1e-12).unwrap()
    };
    assert_eq!(cn(1).status, Status::Fail);
    assert_eq!(cn(256).status, Status::Pass);
}

#[test]
fn large_skew_breaks_the_m_matrix_property() {
    // λ·|Δh| > 1 on an edge turns an off-diagonal rate positive
    let k = kernel(&skew_path(8, 12.0), 0.0, 0.5, &SolverConfig::default(), &Domain::Global).unwrap();
    let rep = check_positivity(&k, 1e-12).unwrap();
    assert_eq!(rep.get("step_m_matrix"), Some(0.0));
}

#[test]
fn mass_is_conserved_without_skew() {
    let f = form(SpaceSpec::gasket(3));
    let mu = f.graph().measure.clone();
    let k = kernel(&FormSchedule::symmetric(f), 0.0, 0.4, &SolverConfig::default(), &Domain::Global).unwrap();
    assert!(mass_defect(&k, &mu) <= 1e-10);
    let k = kernel(&skew_path(8, 2.0), 0.0, 0.4, &SolverConfig::default(), &Domain::Global).unwrap();
    assert!(mass_defect(&k, &vec![1.0; 9]).is_finite());
}

#[test]
fn max_principle_cases() {
    let f = form(SpaceSpec::path(16));
    let s = skew_path(16, 2.0);
    let g = f.graph();
    let set: Vec<bool> = (0..17).map(|x| (4..=12).contains(&x)).collect();
    let dom = Domain::dirichlet(&set);
    let cfg = SolverConfig::default();
    let neg: Vec<f64> = (0..17).map(|x| -((x as f64) * 0.7).sin().abs()).collect();
    let tr = solve_in(&s, &neg, 0.0, 1.0, &cfg, &dom).unwrap();
    let rep = check_max_principle(&s, &tr, &set, 1e-12).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.get("max_u").unwrap() <= 1e-12);

    let zero = solve_in(&s, &vec![0.0; 17], 0.0, 1.0, &cfg, &dom).unwrap();
    assert_eq!(check_max_principle(&s, &zero, &set, 1e-12).unwrap().status, Status::Pass);

    // positive off U, nonpositive on U: the Dirichlet evolution forgets the outside
    let mixed: Vec<f64> = (0..17).map(|x| if set[x] { -1.0 } else { 1.0 }).collect();
    let tr = solve_in(&s, &mixed, 0.0, 1.0, &cfg, &dom).unwrap();
    assert_eq!(check_max_principle(&s, &tr, &set, 1e-12).unwrap().status, Status::Pass);
    let bad: Vec<f64> = (0..17).map(|x| if x == 8 { 1.0 } else { -1.0 }).collect();
    let tr = solve_in(&s, &bad, 0.0, 1.0, &cfg, &dom).unwrap();
    assert_eq!(check_max_principle(&s, &tr, &set, 1e-12).unwrap().status, Status::NotApplicable);
    assert_eq!(g.len(), 17);
}

#[test]
fn super_mean_value_cases() {
    let f = form(SpaceSpec::gasket(3));
    let g = f.graph();
    let s = FormSchedule::symmetric(f.clone());
    let set = g.in_ball(g.nearest_vertex([0.5, 0.0]).unwrap(), 0.4);
    let cfg = SolverConfig::default();
    let pos: Vec<f64> = (0..g.len()).map(|x| 1.0 + (x as f64).cos()).collect();

    let d = solve_in(&s, &pos, 0.0, 0.5, &cfg, &Domain::dirichlet(&set)).unwrap();
    let rep = check_super_mean_value(&s, &d, &set, 1e-10).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.get("min_gap").unwrap().abs() <= 1e-10);

    let global = solve_in(&s, &pos, 0.0, 0.5, &cfg, &Domain::Global).unwrap();
    assert_eq!(check_super_mean_value(&s, &global, &set, 1e-10).unwrap().status, Status::Pass);

    let lifted = Trajectory { domain: Domain::Global, ..d.map(|u| u.iter().map(|v| v + 0.25).collect()) };
    let rep = check_super_mean_value(&s, &lifted, &set, 1e-10).unwrap();
    assert_eq!(rep.status, Status::Pass);
    // equal at the start, strictly above afterwards
    let from_lift = solve_in(&s, lifted.initial(), 0.0, 0.5, &cfg, &Domain::dirichlet(&set)).unwrap();
    assert!((0..g.len()).filter(|&x| set[x]).all(|x| lifted.last()[x] > from_lift.last()[x] + 1e-6));
}

#[test]
fn caloric_axioms_hold() {
    let f = form(SpaceSpec::gasket(3));
    let g = f.graph();
    let set = g.in_ball(g.nearest_vertex([0.5, 0.0]).unwrap(), 0.4);
    let mut r = rng(9);
    let fam = TestFamily::smooth(g, 2, &mut r);
    let cfg = SolverConfig::default();
    let s = FormSchedule::symmetric(f.clone());
    let rep = check_caloric_axioms(&s, &set, 0.0, 0.5, &cfg, &fam.functions[0], &fam.functions[1]).unwrap();
    assert_eq!(rep.status, Status::Pass, "{:?}", rep.values);
    assert!(rep.get("constants").unwrap() <= 1e-12);
    assert!(rep.get("linearity").unwrap() <= 1e-12);

    let h = harmonic_profile(&f, &[(g.corners[0], 1.0), (g.corners[1], 0.0), (g.corners[2], 0.0)]).unwrap();
    let skew = FormSchedule::nonsymmetric(f.clone(), &h, 1.0).unwrap();
    let rep = check_caloric_axioms(&skew, &set, 0.0, 0.5, &cfg, &fam.functions[0], &fam.functions[1]).unwrap();
    assert_eq!(rep.status, Status::Pass, "{:?}", rep.values);
    assert!(!rep.notes.is_empty());
}

#[test]
fn steklov_commutes_with_linear_maps() {
    let s = skew_path(8, 1.0);
    let u0: Vec<f64> = (0..9).map(|x| (x as f64).sqrt()).collect();
    let tr = solve_ivp(&s, &u0, 0.0, 1.0, &SolverConfig::default()).unwrap();
    let lin = |u: &[f64]| -> Vec<f64> { (0..u.len()).map(|i| 2.0 * u[i] - u[(i + 1) % u.len()]).collect() };
    let a = tr.map(lin).steklov_average(3.0 / 64.0).unwrap();
    let b = tr.steklov_average(3.0 / 64.0).unwrap().map(lin);
    for (x, y) in a.snapshots.iter().flatten().zip(b.snapshots.iter().flatten()) {
        assert!((x - y).abs() <= 1e-12);
    }
    let one = tr.steklov_average(1.0 / 64.0).unwrap();
    for i in 0..9 {
        assert!((one.snapshots[3][i] - 0.5 * (tr.snapshots[3][i] + tr.snapshots[4][i])).abs() < 1e-14);
    }
    let flat = tr.map(|_| vec![1.5; 9]).steklov_average(0.25).unwrap();
    assert!(flat.snapshots.iter().flatten().all(|v| (v - 1.5).abs() < 1e-14));
}

#[test]
fn theta_schemes_converge_at_their_order() {
    let s = FormSchedule::symmetric(form(SpaceSpec::path(16)));
    for (scheme, p) in [(Scheme::BackwardEuler, 1.0), (Scheme::Theta { theta: 0.5 }, 2.0)] {
        let rep = convergence_study(&s, 0.0, 2.0, &Domain::Global, scheme, &[32, 64, 128]).unwrap();
        let order = rep.get("order").unwrap();
        assert!(order >= 0.8 * p && order <= 1.2 * p, "{scheme:?} {order}");
    }
}

#[test]
fn kernel_export_round_trip() {
    let s = skew_path(6, 1.0);
    let k = kernel(&s, 0.0, 0.5, &SolverConfig::default(), &Domain::Dirichlet { vertices: vec![1, 2, 3] }).unwrap();
    let dir = std::env::temp_dir().join(format!("heatlab-kernel-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (bin, _) = k.write(&dir.join("k")).unwrap();
    let bytes = std::fs::read(&bin).unwrap();
    assert_eq!(&bytes[..4], KERNEL_MAGIC);
    let back = read_kernel(&dir.join("k")).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(back, k);
}

proptest! {
    #[test]
    fn composition_on_lattice_points(a in 0u32..40, b in 0u32..40) {
        let (lo, hi) = (a.min(b) as f64 / 32.0, a.max(b) as f64 / 32.0 + 0.25);
        let s = switching_path(6);
        let cfg = SolverConfig::default();
        let whole = transition(&s, 0.0, hi, &cfg, &Domain::Global).unwrap();
        let first = transition(&s, 0.0, lo, &cfg, &Domain::Global).unwrap();
        let second = transition(&s, lo, hi, &cfg, &Domain::Global).unwrap();
        prop_assert!(max_diff(&whole, &(second * first)) <= 1e-12);
    }

    #[test]
    fn backward_euler_symmetric_kernels_are_positive(t in 0.01f64..2.0, n in 2usize..20) {
        let s = FormSchedule::symmetric(form(SpaceSpec::path(n)));
        let k = kernel(&s, 0.0, t, &SolverConfig::default(), &Domain::Global).unwrap();
        prop_assert!(k.entries.iter().all(|&v| v > 0.0));
    }
}
