use std::cell::OnceCell;
use std::sync::Arc;

use super::{suite_seeds, ExperimentConfig, SkewSource, Suite, SweepPoint};
use crate::certify::{
    certify_pi, certify_pseudo_pi, certify_sobolev, certify_weighted_pi, sobolev_family, PiMode,
};
use crate::cutoff::{certify_csa, csa_family, layered_cutoff, measure_layer_constants, CutoffFunction, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::families::{rng, TestFamily};
use crate::forms::{harmonic_profile, verify_assumption0, verify_skew_assumptions, FormSchedule, HarmonicProfile, ReferenceForm};
use crate::harnack::{
    default_sources, holder_cylinder, holder_estimate, kernel_family, make_cylinders, mve_check, phi_estimate,
    random_family, CylinderParams, HolderOptions, MveShape, DEFAULT_FLOOR,
};
use crate::hke::{davies_gaffney_check, lower_hke_fit, upper_hke_fit, DaviesOptions, FitOptions};
use crate::propagator::{
    check_chapman_kolmogorov, check_contraction, check_positivity, kernel, mass_defect, solve_on_grid, time_grid,
    Domain, SolverConfig,
};
use crate::report::{CertReport, Status, Table};
use crate::space::{
    build_space, certify_rvd, certify_vd, nested_pairs, verify_psi, BallFamily, BallTriple, MetricMeasureGraph,
    ScalingFunction,
};

/// Everything one sweep point needs, with the shared cutoff built on first use.
struct Bench<'a> {
    config: &'a ExperimentConfig,
    form: Arc<ReferenceForm>,
    schedule: FormSchedule,
    psi: ScalingFunction,
    ball: BallTriple,
    eps: f64,
    p: f64,
    cfg: SolverConfig,
    seeds: [u64; Suite::ALL.len()],
    cutoff: OnceCell<std::result::Result<CutoffFunction, String>>,
}

fn skew_profile(config: &ExperimentConfig, form: &ReferenceForm, src: &SkewSource) -> Result<HarmonicProfile> {
    let g = form.graph();
    if let Some(f) = &src.profile {
        let text = std::fs::read_to_string(config.resolve(f))?;
        let p: HarmonicProfile = serde_json::from_str(&text)?;
        if p.values.len() != g.len() {
            return Err(Error::Dimension { expected: g.len(), got: p.values.len() });
        }
        return Ok(p);
    }
    let boundary = match &src.boundary {
        Some(b) => b.iter().map(|(a, v)| Ok((a.locate(g)?, *v))).collect::<Result<Vec<_>>>()?,
        None => g.corners.iter().enumerate().map(|(i, &c)| (c, if i == 0 { 1.0 } else { 0.0 })).collect(),
    };
    harmonic_profile(form, &boundary)
}

impl<'a> Bench<'a> {
    fn new(config: &'a ExperimentConfig, point: &SweepPoint) -> Result<Self> {
        let mut spec = config.space.spec()?;
        if let Some(l) = point.level {
            spec.size = l;
        }
        if let Some(f) = &spec.path {
            spec.path = Some(config.resolve(f).to_string_lossy().into_owned());
        }
        let psi = config.psi.resolve(&spec)?;
        let form = Arc::new(ReferenceForm::new(Arc::new(build_space(&spec)?)));
        let g = form.graph();
        let lambda = point.lambda.or(config.schedule.lambda);
        let schedule = match lambda {
            None => FormSchedule::symmetric(form.clone()),
            Some(l) => {
                let src = config.schedule.skew.clone().unwrap_or_default();
                FormSchedule::nonsymmetric(form.clone(), &skew_profile(config, &form, &src)?, l)?
            }
        };
        let center = config.ball.center.locate(g)?;
        let big_r = config.ball.radius.unwrap_or(g.diameter() / 4.0);
        let r = config.ball.width.unwrap_or(big_r / 2.0);
        let cfg = SolverConfig::default().with_rate(point.resolution.unwrap_or(config.params.resolution));
        Ok(Bench {
            config,
            psi,
            ball: BallTriple { center, big_r, r },
            eps: point.epsilon.or(config.params.epsilon).unwrap_or(DEFAULT_EPSILON),
            p: point.p.unwrap_or(config.params.p),
            cfg,
            seeds: suite_seeds(config.seed),
            cutoff: OnceCell::new(),
            schedule,
            form,
        })
    }

    fn g(&self) -> &MetricMeasureGraph {
        self.form.graph()
    }

    fn seed(&self, s: Suite) -> u64 {
        self.seeds[Suite::ALL.iter().position(|x| *x == s).unwrap()]
    }

    fn random(&self, s: Suite) -> TestFamily {
        TestFamily::random(self.g().len(), self.config.params.family_size, &mut rng(self.seed(s)))
    }

    /// Layered cutoff on `B(x,R) ⊂ B(x,R+r)` at the point's ε, with its layer constants
    /// and `C₀` measured on the default cutoff family.
    fn cutoff(&self) -> Result<CutoffFunction> {
        self.cutoff
            .get_or_init(|| {
                let b = self.ball;
                let build = || -> Result<CutoffFunction> {
                    let fam = csa_family(&self.form, 24, 8, self.seed(Suite::Csa))?;
                    let lc = measure_layer_constants(&self.form, b.center, b.big_r, b.r, &self.psi, &fam)?;
                    let cut = layered_cutoff(self.g(), b.center, b.big_r, b.r, self.eps, &lc, &self.psi)?;
                    let rep = certify_csa(&self.form, &cut, &self.psi, &fam)?;
                    Ok(cut.certified(&rep))
                };
                build().map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Invalid)
    }

    /// Geometric radii from twice the mesh to the diameter.
    fn radii(&self, count: usize) -> Vec<f64> {
        let g = self.g();
        let (lo, hi) = (2.0 * g.mesh, g.diameter());
        if !(hi > lo) {
            return vec![hi];
        }
        (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
    }

    fn t_grid(&self) -> Vec<f64> {
        if !self.config.params.t_grid.is_empty() {
            return self.config.params.t_grid.clone();
        }
        let (lo, hi) = (self.psi.eval(2.0 * self.g().mesh), self.psi.eval(self.ball.big_r));
        (0..8).map(|i| lo * (hi / lo).powf(i as f64 / 7.0)).collect()
    }

    fn run(&self, suite: Suite) -> Result<Vec<CertReport>> {
        let g = self.g();
        let b = self.ball;
        let psi = &self.psi;
        Ok(match suite {
            Suite::Vd => vec![certify_vd(g, &BallFamily::new(vec![b]))?],
            Suite::Rvd => vec![certify_rvd(g, &nested_pairs(b.center, &self.radii(6)))?],
            Suite::Psi => {
                let rs = self.radii(6);
                let samples: Vec<(f64, f64)> =
                    rs.iter().enumerate().flat_map(|(i, &s)| rs[i + 1..].iter().map(move |&r| (s, r))).collect();
                vec![verify_psi(psi, &samples)?]
            }
            Suite::Pi => vec![
                certify_pi(&self.form, psi, &b, PiMode::Strong)?,
                certify_pi(&self.form, psi, &b, PiMode::Weak)?,
            ],
            Suite::Wpi => {
                let cut = self.cutoff()?;
                let vd = certify_vd(g, &BallFamily::new(vec![b]))?;
                let pi = certify_pi(&self.form, psi, &b, PiMode::Strong)?;
                vec![certify_weighted_pi(&self.form, psi, &cut)?
                    .value("ref_c0", cut.c0.unwrap_or(f64::NAN))
                    .value("ref_c_vd", vd.constant)
                    .value("ref_c_pi", pi.constant)]
            }
            Suite::Pseudo => {
                let fam = TestFamily::smooth(g, self.config.params.family_size, &mut rng(self.seed(suite)));
                let s_grid: Vec<f64> =
                    [0.125, 0.25, 0.5].iter().map(|f| f * b.big_r).filter(|&s| s >= g.mesh).collect();
                let s_grid = if s_grid.is_empty() { vec![b.big_r / 2.0] } else { s_grid };
                vec![certify_pseudo_pi(&self.form, psi, b.center, b.big_r, &s_grid, &fam)?]
            }
            Suite::Sobolev => {
                let fam = sobolev_family(&self.form, b.center, b.big_r, 8, self.seed(suite))?;
                let nu = certify_vd(g, &BallFamily::all_centers(g, b.big_r, b.r))?.get("nu");
                vec![certify_sobolev(&self.form, psi, b.center, b.big_r, self.config.params.kappa, nu, &fam)?]
            }
            Suite::Csa => {
                let cut = self.cutoff()?;
                let fam = csa_family(&self.form, 24, 8, self.seed(suite))?.join(self.random(suite));
                vec![certify_csa(&self.form, &cut, psi, &fam)?.value("epsilon", self.eps)]
            }
            Suite::Assumptions => {
                let times = [0.0];
                let mut out = vec![verify_assumption0(&self.schedule, &self.random(suite), &times)?];
                if !self.schedule.is_symmetric() {
                    let fam = TestFamily::random_positive(
                        g.len(),
                        self.config.params.family_size,
                        0.1,
                        &mut rng(self.seed(suite)),
                    );
                    out.extend(verify_skew_assumptions(&self.schedule, &[self.cutoff()?], psi, &fam, &times)?.reports());
                }
                out
            }
            Suite::Propagator => self.propagator()?,
            Suite::Harnack => self.harnack()?,
            Suite::Hke => self.hke()?,
        })
    }

    fn propagator(&self) -> Result<Vec<CertReport>> {
        let g = self.g();
        let t = self.psi.eval(self.ball.big_r);
        let k = kernel(&self.schedule, 0.0, t, &self.cfg, &Domain::Global)?;
        let k1 = kernel(&self.schedule, 0.0, t / 2.0, &self.cfg, &Domain::Global)?;
        let k2 = kernel(&self.schedule, t / 2.0, t, &self.cfg, &Domain::Global)?;
        let x = self.ball.center;
        let ts = self.t_grid();
        let tmax = ts.iter().cloned().fold(0.0, f64::max);
        let mut grid = time_grid(&self.schedule, 0.0, tmax, &self.cfg)?;
        grid.extend(ts.iter().copied());
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        let mut delta = vec![0.0; g.len()];
        delta[x] = 1.0 / g.measure[x];
        let col = solve_on_grid(&self.schedule, &delta, &grid, self.cfg.scheme, &Domain::Global)?;
        let mut table = Table::new(&["t", "target", "distance", "p"]);
        for &tt in &ts {
            let u = col.at(tt);
            for (y, &p) in u.iter().enumerate() {
                table.push(vec![tt, y as f64, g.d(x, y), p]);
            }
        }
        let mut profile = CertReport::measured("kernel-profile", mass_defect(&k, &g.measure), &self.schedule.id)
            .value("source", x as f64)
            .value("times", ts.len() as f64)
            .note("constant is the mass defect of the kernel over [0, Ψ(R)]");
        profile.table = Some(table);
        Ok(vec![
            check_contraction(&self.schedule, 0.0, t, &self.cfg, 0.0, 0.0)?,
            check_positivity(&k, 1e-12)?,
            check_chapman_kolmogorov(&self.schedule, &k1, &k2, &self.cfg)?,
            profile,
        ])
    }

    fn harnack(&self) -> Result<Vec<CertReport>> {
        let g = self.g();
        let b = self.ball;
        let prm = &self.config.params;
        let params = CylinderParams::Tau { tau: prm.tau, delta: prm.delta };
        let cyl = make_cylinders(g, b.center, 0.0, b.big_r, &self.psi, params)?;
        let hat = make_cylinders(g, b.center, 0.0, b.big_r, &self.psi, params.hat_for(&self.psi, b.big_r)?)?;
        // about eight grid nodes in the shortest default window
        let rate = self.cfg.steps_per_unit.max((48.0 / cyl.q.psi_r).ceil() as usize);
        let cfg = self.cfg.clone().with_rate(rate);
        let mut fam = kernel_family(&self.schedule, &cyl, &default_sources(&cyl, prm.members), &cfg)?;
        fam.extend(random_family(&self.schedule, &cyl, 4, self.seed(Suite::Harnack), &cfg)?);
        let mut out = vec![phi_estimate(&fam, &cyl, Some(&hat))?];
        out.push(mve_check(g, &fam[0], self.p, &cyl.minus, &cyl.q, &self.psi, &MveShape::default(), DEFAULT_FLOOR)?);
        if prm.delta < 1.0 {
            let q = holder_cylinder(g, b.center, 0.0, b.big_r, &self.psi, prm.delta)?;
            out.push(holder_estimate(g, &fam[0], &q, &self.psi, &HolderOptions::default())?);
        }
        Ok(out)
    }

    fn hke(&self) -> Result<Vec<CertReport>> {
        let g = self.g();
        let b = self.ball;
        let ts = self.t_grid();
        let kernels = ts
            .iter()
            .map(|&t| kernel(&self.schedule, 0.0, t, &self.cfg, &Domain::Global))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![upper_hke_fit(g, &self.psi, &kernels, &FitOptions::default())?];
        let eps = 0.5;
        let horizon = self.psi.eval(b.big_r) / eps;
        let mask = g.in_ball(b.center, b.big_r);
        let domain = if mask.iter().all(|&m| m) { Domain::Global } else { Domain::dirichlet(&mask) };
        let inner = ts
            .iter()
            .filter(|&&t| t <= horizon)
            .map(|&t| kernel(&self.schedule, 0.0, t, &self.cfg, &domain))
            .collect::<Result<Vec<_>>>()?;
        if !inner.is_empty() {
            out.push(lower_hke_fit(g, &self.psi, &inner, b.center, b.big_r, eps)?);
        }
        let y = (0..g.len())
            .min_by(|&p, &q| (g.d(b.center, p) - b.big_r).abs().total_cmp(&(g.d(b.center, q) - b.big_r).abs()))
            .unwrap_or(b.center);
        if y != b.center {
            let pr = self.psi.eval(b.big_r);
            let opts = DaviesOptions::geometric(pr / 8.0, 2.0 * pr, 8);
            out.push(davies_gaffney_check(&self.schedule, &self.psi, b.center, y, 0.0, &self.cfg, &opts)?);
        }
        Ok(out)
    }
}

/// A suite that could not run becomes an infeasible report carrying the error.
fn failed(suite: Suite, e: &Error) -> CertReport {
    CertReport::measured(suite.name(), f64::NAN, "none").with_status(Status::Infeasible).note(e.to_string())
}

pub(super) fn run_point(config: &ExperimentConfig, point: &SweepPoint, suites: &[Suite]) -> Result<Vec<CertReport>> {
    let bench = Bench::new(config, point)?;
    let g = bench.g();
    let ball = format!("{}:{}:{}", bench.ball.center, bench.ball.big_r, bench.ball.r);
    let mut out = Vec::new();
    for &s in suites {
        let reps = bench.run(s).unwrap_or_else(|e| vec![failed(s, &e)]);
        for mut r in reps {
            r.context.insert("suite".into(), s.name().into());
            r.context.insert("space".into(), g.family.label());
            r.context.insert("level".into(), point.level.unwrap_or_else(|| config.space.spec().map_or(0, |s| s.size)).to_string());
            r.context.insert("ball".into(), ball.clone());
            r.context.insert("psi".into(), bench.psi.label());
            r.context.insert("schedule".into(), bench.schedule.id.clone());
            if let Some(l) = point.lambda.or(config.schedule.lambda) {
                r.context.insert("lambda".into(), l.to_string());
            }
            if point.epsilon.is_some() || matches!(s, Suite::Csa | Suite::Wpi) {
                r.context.insert("epsilon".into(), bench.eps.to_string());
            }
            if point.p.is_some() || s == Suite::Harnack {
                r.context.insert("p".into(), bench.p.to_string());
            }
            r.context.insert("resolution".into(), bench.cfg.steps_per_unit.to_string());
            out.push(r);
        }
    }
    Ok(out)
}
