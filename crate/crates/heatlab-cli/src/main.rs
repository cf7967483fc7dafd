//! `heatlab` command line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use heatlab::cutoff::{certify_csa, csa_family, layered_cutoff, measure_layer_constants};
use heatlab::experiment::{
    emit_plot_data, run, write_outputs, Anchor, ExperimentConfig, PlotKind, PsiEntry, SkewSource, SpaceEntry, Suite,
    CACHE_DIR_VAR,
};
use heatlab::forms::{harmonic_profile, FormSchedule, HarmonicProfile, ReferenceForm};
use heatlab::harnack::{default_sources, kernel_family, make_cylinders, phi_estimate, random_family, CylinderParams};
use heatlab::hke::{upper_hke_fit, upper_hke_points, FitOptions};
use heatlab::propagator::{kernel, Domain, SolverConfig};
use heatlab::space::{build_space, ScalingFunction, SpaceSpec};
use heatlab::{CertReport, Error, ReportBundle, Result};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat flow and functional inequality certification on finite graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a space and print its summary, or write it as a graph file.
    Space {
        /// `gasket:4`, `path:128`, `grid:16`, `file:g.json` or `family=gasket,level=4,...`.
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harmonic profiles and skew schedules.
    #[command(subcommand)]
    Forms(FormsCmd),
    /// Cutoff functions with measured CSA constants.
    #[command(subcommand)]
    Cutoff(CutoffCmd),
    /// Run one certification suite on one ball.
    Certify {
        suite: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the bundle and CSV here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heat propagator kernels.
    #[command(subcommand)]
    Prop(PropCmd),
    /// Parabolic Harnack estimates.
    #[command(subcommand)]
    Harnack(HarnackCmd),
    /// Heat kernel estimate fits.
    #[command(subcommand)]
    Hke(HkeCmd),
    /// Run a TOML or JSON experiment config.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format CSV for plotting from a saved bundle.
    PlotData {
        #[arg(long)]
        bundle: PathBuf,
        /// kernel-profile, phi-vs-lambda or constant-vs-level.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    space: String,
    /// `auto`, `diffusive` or `gasket`.
    #[arg(long, default_value = "auto")]
    psi: String,
    /// Harmonic profile file and skew scale, `h.json:1.0`.
    #[arg(long)]
    skew: Option<String>,
    /// Solver steps per unit time.
    #[arg(long, default_value_t = 64)]
    rate: usize,
}

#[derive(Args, Clone)]
struct BallArgs {
    /// `center`, `cornerK`, a vertex index or `x,y`.
    #[arg(long, default_value = "center")]
    center: String,
    #[arg(long = "R")]
    big_r: Option<f64>,
    #[arg(long = "r")]
    r: Option<f64>,
}

#[derive(Subcommand)]
enum FormsCmd {
    /// Harmonic profile with boundary values, `corner0=1,corner1=0,corner2=0` by default.
    Profile {
        #[arg(long)]
        space: String,
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-independent skew schedule from a profile.
    BuildSkew {
        #[arg(long)]
        space: String,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CutoffCmd {
    /// Layered cutoff on B(center,R) inside B(center,R+r), with its measured C₀.
    Build {
        #[arg(long)]
        space: String,
        #[arg(long, default_value = "auto")]
        psi: String,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        #[arg(long, default_value = "center")]
        center: String,
        #[arg(long = "R")]
        big_r: f64,
        #[arg(long = "r")]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PropCmd {
    /// Kernel of T_s^t exported as `<stem>.hkmx` plus `<stem>.json`.
    Kernel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long)]
        t: f64,
        /// `global` or `dirichlet:ball(x,r)`.
        #[arg(long, default_value = "global")]
        domain: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum HarnackCmd {
    /// C_PHI over a solution family: CSV row per member plus a summary report.
    Phi {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "1/6,1/3,1/2,1")]
        tau: String,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// `kernels:N`, `random:N`, or both joined by `+`.
        #[arg(long, default_value = "kernels:16")]
        family: String,
        #[arg(long, default_value = "center")]
        center: String,
        /// Cylinder radius; a quarter of the diameter by default.
        #[arg(long = "r")]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        anchor: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum HkeCmd {
    /// Upper heat kernel fit over kernels at the elapsed times of the grid.
    Upper {
        #[command(flatten)]
        common: Common,
        /// `lo:hi:geometric:N`, `lo:hi:linear:N` or a comma list.
        #[arg(long)]
        t_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Steps per unit time that put about eight grid nodes in the shortest default window.
fn harnack_rate(psi_r: f64) -> usize {
    (48.0 / psi_r).ceil() as usize
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn space_spec(text: &str) -> Result<SpaceSpec> {
    SpaceSpec::parse(text)
}

fn psi_for(name: &str, spec: &SpaceSpec) -> Result<ScalingFunction> {
    PsiEntry::Named(name.to_string()).resolve(spec)
}

fn form_for(spec: &SpaceSpec) -> Result<Arc<ReferenceForm>> {
    Ok(Arc::new(ReferenceForm::new(Arc::new(build_space(spec)?))))
}

fn split_skew(text: &str) -> Result<(String, f64)> {
    let (file, scale) = text.rsplit_once(':').ok_or_else(|| usage(format!("expected FILE:SCALE, got `{text}`")))?;
    let scale = scale.parse().map_err(|_| usage(format!("bad skew scale `{scale}`")))?;
    Ok((file.to_string(), scale))
}

fn load_profile(path: &Path) -> Result<HarmonicProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn schedule_for(common: &Common, form: &Arc<ReferenceForm>) -> Result<FormSchedule> {
    match &common.skew {
        None => Ok(FormSchedule::symmetric(form.clone())),
        Some(s) => {
            let (file, scale) = split_skew(s)?;
            let p = load_profile(Path::new(&file))?;
            if p.values.len() != form.len() {
                return Err(Error::Dimension { expected: form.len(), got: p.values.len() });
            }
            FormSchedule::nonsymmetric(form.clone(), &p, scale)
        }
    }
}

fn fraction(text: &str) -> Result<f64> {
    let t = text.trim();
    let v = match t.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
        None => t.parse().ok(),
    };
    v.ok_or_else(|| usage(format!("bad number `{t}`")))
}

fn time_grid_arg(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 4 {
        let (lo, hi) = (fraction(parts[0])?, fraction(parts[1])?);
        let n: usize = parts[3].parse().map_err(|_| usage(format!("bad count `{}`", parts[3])))?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(usage(format!("bad time grid `{text}`")));
        }
        let at = |i: usize| i as f64 / (n - 1) as f64;
        return match parts[2] {
            "geometric" => Ok((0..n).map(|i| lo * (hi / lo).powf(at(i))).collect()),
            "linear" => Ok((0..n).map(|i| lo + (hi - lo) * at(i)).collect()),
            other => Err(usage(format!("unknown spacing `{other}`"))),
        };
    }
    text.split(',').map(fraction).collect()
}

/// `global` or `dirichlet:ball(x,r)` with `x` any anchor form.
fn domain_arg(text: &str, g: &heatlab::space::MetricMeasureGraph) -> Result<Domain> {
    if text == "global" {
        return Ok(Domain::Global);
    }
    let inner = text
        .strip_prefix("dirichlet:ball(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| usage(format!("expected global or dirichlet:ball(x,r), got `{text}`")))?;
    let (x, r) = inner.rsplit_once(',').ok_or_else(|| usage(format!("bad ball `{inner}`")))?;
    let x = Anchor::parse(x)?.locate(g)?;
    let r = fraction(r)?;
    Ok(Domain::dirichlet(&g.in_ball(x, r)))
}

/// Prints to stdout; a closed pipe (`| head`) ends output quietly.
fn say(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(d)?;
            }
            std::fs::write(p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => say(&format!("{text}\n"))?,
    }
    Ok(())
}

fn default_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("heatlab-out"))
}

/// Writes `<dir>/<name>.json` and, with a table, `<dir>/<name>.csv`.
fn emit_report(rep: &CertReport, out: Option<&Path>, name: &str) -> Result<()> {
    let json = serde_json::to_string_pretty(rep)?;
    match out {
        None => say(&format!("{json}\n"))?,
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.json")), json)?;
            if let Some(t) = &rep.table {
                std::fs::write(dir.join(format!("{name}.csv")), t.to_csv()?)?;
            }
            eprintln!("wrote {}", dir.join(name).display());
        }
    }
    Ok(())
}

fn verdict(bundle: &ReportBundle) -> ExitCode {
    if bundle.status().is_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Space { spec, out } => {
            let g = build_space(&space_spec(&spec)?)?;
            let text = match &out {
                Some(_) => serde_json::to_string_pretty(&g.to_file())?,
                None => serde_json::to_string_pretty(&serde_json::json!({
                    "family": g.family.label(),
                    "vertices": g.len(),
                    "mesh": g.mesh,
                    "diameter": g.diameter(),
                    "total_mass": g.total_mass(),
                    "geodesic": g.is_geodesic(),
                    "center": g.center(),
                    "corners": g.corners,
                }))?,
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Forms(FormsCmd::Profile { space, boundary, out }) => {
            let form = form_for(&space_spec(&space)?)?;
            let g = form.graph();
            let pairs = match boundary {
                Some(b) => b
                    .split(';')
                    .map(|kv| {
                        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("expected anchor=value, got `{kv}`")))?;
                        Ok((Anchor::parse(k)?.locate(g)?, fraction(v)?))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => g.corners.iter().enumerate().map(|(i, &c)| (c, if i == 0 { 1.0 } else { 0.0 })).collect(),
            };
            let p = harmonic_profile(&form, &pairs)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&p)?)?;
        }
        Command::Forms(FormsCmd::BuildSkew { space, profile, scale, out }) => {
            let form = form_for(&space_spec(&space)?)?;
            let p = load_profile(&profile)?;
            let s = FormSchedule::nonsymmetric(form, &p, scale)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&s.to_file())?)?;
        }
        Command::Cutoff(CutoffCmd::Build { space, psi, eps, center, big_r, r, seed, out }) => {
            let spec = space_spec(&space)?;
            let psi = psi_for(&psi, &spec)?;
            let form = form_for(&spec)?;
            let x = Anchor::parse(&center)?.locate(form.graph())?;
            let fam = csa_family(&form, 24, 8, seed)?;
            let lc = measure_layer_constants(&form, x, big_r, r, &psi, &fam)?;
            let cut = layered_cutoff(form.graph(), x, big_r, r, eps, &lc, &psi)?;
            let rep = certify_csa(&form, &cut, &psi, &fam)?;
            let cut = cut.certified(&rep);
            emit(out.as_deref(), &serde_json::to_string_pretty(&cut)?)?;
        }
        Command::Certify { suite, common, ball, seed, out } => {
            let mut cfg = ExperimentConfig::new(&common.space);
            cfg.seed = seed;
            cfg.suites = vec![Suite::parse(&suite)?];
            cfg.psi = PsiEntry::Named(common.psi.clone());
            cfg.space = SpaceEntry::Text(common.space.clone());
            cfg.params.resolution = common.rate;
            cfg.ball.center = Anchor::parse(&ball.center)?;
            cfg.ball.radius = ball.big_r;
            cfg.ball.width = ball.r;
            if let Some(s) = &common.skew {
                let (file, scale) = split_skew(s)?;
                let file = std::fs::canonicalize(&file).map_err(|e| usage(format!("{file}: {e}")))?;
                cfg.schedule.lambda = Some(scale);
                cfg.schedule.skew = Some(SkewSource { profile: Some(file.to_string_lossy().into_owned()), boundary: None });
            }
            let bundle = run(&cfg)?;
            match out {
                Some(dir) => {
                    for p in write_outputs(&bundle, &dir, &suite)? {
                        eprintln!("wrote {}", p.display());
                    }
                }
                None => say(&format!("{}\n", bundle.to_json()?))?,
            }
            return Ok(verdict(&bundle));
        }
        Command::Prop(PropCmd::Kernel { common, s, t, domain, out }) => {
            let spec = space_spec(&common.space)?;
            let form = form_for(&spec)?;
            let schedule = schedule_for(&common, &form)?;
            let domain = domain_arg(&domain, form.graph())?;
            let k = kernel(&schedule, s, t, &SolverConfig::default().with_rate(common.rate), &domain)?;
            let stem = out.unwrap_or_else(|| default_dir().join("kernel"));
            if let Some(d) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(d)?;
            }
            let (bin, json) = k.write(&stem)?;
            eprintln!("wrote {} and {}", bin.display(), json.display());
        }
        Command::Harnack(HarnackCmd::Phi { common, tau, delta, family, center, r, anchor, seed, out }) => {
            let spec = space_spec(&common.space)?;
            let psi = psi_for(&common.psi, &spec)?;
            let form = form_for(&spec)?;
            let g = form.graph();
            let schedule = schedule_for(&common, &form)?;
            let tau: Vec<f64> = tau.split(',').map(fraction).collect::<Result<_>>()?;
            let tau: [f64; 4] = tau.try_into().map_err(|_| usage("--tau needs four values"))?;
            let params = CylinderParams::Tau { tau, delta };
            let x = Anchor::parse(&center)?.locate(g)?;
            let r = r.unwrap_or(g.diameter() / 4.0);
            let cyl = make_cylinders(g, x, anchor, r, &psi, params)?;
            let hat = make_cylinders(g, x, anchor, r, &psi, params.hat_for(&psi, r)?)?;
            let cfg = SolverConfig::default().with_rate(common.rate.max(harnack_rate(psi.eval(r))));
            let mut members = Vec::new();
            for part in family.split('+') {
                let (kind, n) = part.split_once(':').ok_or_else(|| usage(format!("bad family `{part}`")))?;
                let n: usize = n.parse().map_err(|_| usage(format!("bad family size `{n}`")))?;
                match kind {
                    "kernels" => members.extend(kernel_family(&schedule, &cyl, &default_sources(&cyl, n), &cfg)?),
                    "random" => members.extend(random_family(&schedule, &cyl, n, seed, &cfg)?),
                    other => return Err(usage(format!("unknown family `{other}`"))),
                }
            }
            let rep = phi_estimate(&members, &cyl, Some(&hat))?.tag("space", g.family.label());
            emit_report(&rep, out.as_deref(), "phi")?;
        }
        Command::Hke(HkeCmd::Upper { common, t_grid, out }) => {
            let spec = space_spec(&common.space)?;
            let psi = psi_for(&common.psi, &spec)?;
            let form = form_for(&spec)?;
            let g = form.graph();
            let schedule = schedule_for(&common, &form)?;
            let cfg = SolverConfig::default().with_rate(common.rate);
            let kernels = time_grid_arg(&t_grid)?
                .into_iter()
                .map(|t| kernel(&schedule, 0.0, t, &cfg, &Domain::Global))
                .collect::<Result<Vec<_>>>()?;
            let opts = FitOptions::default();
            let mut rep = upper_hke_fit(g, &psi, &kernels, &opts)?.tag("space", g.family.label());
            let c_prime = rep.get("c_prime").unwrap_or(1.0);
            let per_point = upper_hke_points(g, &psi, &kernels, &opts, c_prime)?;
            let grid = rep.table.replace(per_point);
            emit_report(&rep, out.as_deref(), "upper-hke")?;
            if let (Some(dir), Some(grid)) = (out.as_deref(), grid) {
                std::fs::write(dir.join("upper-hke-grid.csv"), grid.to_csv()?)?;
            }
        }
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = out {
                cfg.output.dir = Some(std::path::absolute(&o)?.to_string_lossy().into_owned());
            }
            let bundle = run(&cfg)?;
            for p in write_outputs(&bundle, &cfg.output_dir(), &cfg.output.name)? {
                eprintln!("wrote {}", p.display());
            }
            let failing = bundle.reports.iter().filter(|r| !r.status.is_ok()).count();
            eprintln!("{} reports, {failing} not passing", bundle.reports.len());
            return Ok(verdict(&bundle));
        }
        Command::PlotData { bundle, kind, out } => {
            let text = std::fs::read_to_string(&bundle).map_err(|e| usage(format!("{}: {e}", bundle.display())))?;
            let b = ReportBundle::from_json(&text)?;
            let csv = emit_plot_data(&b, PlotKind::parse(&kind)?)?;
            match out {
                Some(p) => emit(Some(&p), &csv)?,
                None => say(&csv)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
