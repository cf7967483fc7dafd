//! Configuration-driven runs: build the space, run the selected certification suites
//! over the sweep axes and collect the reports into one bundle.

mod output;
mod suites;

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use output::{emit_plot_data, suite_csv, write_outputs, PlotKind};

use crate::error::{Error, Result};
use crate::families::rng;
use crate::report::ReportBundle;
use crate::space::{MetricMeasureGraph, ScalingFunction, SpaceSpec};

/// Environment variable naming the default output directory.
pub const CACHE_DIR_VAR: &str = "HEATLAB_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Vd,
    Rvd,
    Psi,
    Pi,
    Wpi,
    Pseudo,
    Sobolev,
    Csa,
    Assumptions,
    Propagator,
    Harnack,
    Hke,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::Vd,
        Suite::Rvd,
        Suite::Psi,
        Suite::Pi,
        Suite::Wpi,
        Suite::Pseudo,
        Suite::Sobolev,
        Suite::Csa,
        Suite::Assumptions,
        Suite::Propagator,
        Suite::Harnack,
        Suite::Hke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Vd => "vd",
            Suite::Rvd => "rvd",
            Suite::Psi => "psi",
            Suite::Pi => "pi",
            Suite::Wpi => "wpi",
            Suite::Pseudo => "pseudo",
            Suite::Sobolev => "sobolev",
            Suite::Csa => "csa",
            Suite::Assumptions => "assumptions",
            Suite::Propagator => "propagator",
            Suite::Harnack => "harnack",
            Suite::Hke => "hke",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == text)
            .ok_or_else(|| Error::Config(format!("unknown suite `{text}`")))
    }
}

/// A vertex given by index, by coordinates, or as `"center"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchor {
    Vertex(usize),
    Point([f64; 2]),
    Named(String),
}

impl Anchor {
    /// `center`, `cornerK`, a vertex index, or `x,y` coordinates.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((x, y)) = t.split_once(',') {
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad coordinate `{v}`")));
            return Ok(Anchor::Point([num(x)?, num(y)?]));
        }
        if let Ok(v) = t.parse::<usize>() {
            return Ok(Anchor::Vertex(v));
        }
        Ok(Anchor::Named(t.to_string()))
    }

    /// The vertex this anchor names on `g`.
    pub fn locate(&self, g: &MetricMeasureGraph) -> Result<usize> {
        match self {
            Anchor::Vertex(v) if *v < g.len() => Ok(*v),
            Anchor::Vertex(v) => Err(Error::Vertex(*v)),
            Anchor::Point(p) => g
                .nearest_vertex(*p)
                .ok_or_else(|| Error::Config("coordinates need an embedded space".into())),
            Anchor::Named(n) if n == "center" => Ok(g.center()),
            Anchor::Named(n) => match n.strip_prefix("corner") {
                Some(k) => k
                    .parse::<usize>()
                    .ok()
                    .and_then(|k| g.corners.get(k).copied())
                    .ok_or_else(|| Error::Config(format!("no corner `{n}`"))),
                None => Err(Error::Config(format!("unknown anchor `{n}`"))),
            },
        }
    }
}

impl Default for Anchor {
    fn default() -> Self {
        Anchor::Named("center".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceEntry {
    Text(String),
    Spec(SpaceSpec),
}

impl SpaceEntry {
    pub fn spec(&self) -> Result<SpaceSpec> {
        match self {
            SpaceEntry::Text(t) => SpaceSpec::parse(t),
            SpaceEntry::Spec(s) => Ok(s.clone()),
        }
    }
}

/// `"auto"` (gasket walk scaling on gaskets, `r²` elsewhere), `"diffusive"`,
/// `"gasket"`, or a full scaling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiEntry {
    Named(String),
    Full(ScalingFunction),
}

impl Default for PsiEntry {
    fn default() -> Self {
        PsiEntry::Named("auto".into())
    }
}

impl PsiEntry {
    pub fn resolve(&self, space: &SpaceSpec) -> Result<ScalingFunction> {
        let psi = match self {
            PsiEntry::Full(p) => p.clone(),
            PsiEntry::Named(n) => match n.as_str() {
                "auto" if space.family == "gasket" => ScalingFunction::gasket(),
                "auto" | "diffusive" => ScalingFunction::diffusive(),
                "gasket" => ScalingFunction::gasket(),
                other => return Err(Error::Config(format!("unknown scaling `{other}`"))),
            },
        };
        psi.validate()?;
        Ok(psi)
    }
}

/// Harmonic profile for the skew part: a profile file, explicit boundary values,
/// or (neither given) `1` at the first corner and `0` at the others.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewSource {
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub boundary: Option<Vec<(Anchor, f64)>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Skew scale; the schedule is symmetric when neither this nor a λ sweep is set.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub skew: Option<SkewSource>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    #[serde(default)]
    pub center: Anchor,
    /// `R`; a quarter of the diameter by default.
    #[serde(default)]
    pub radius: Option<f64>,
    /// `r`; half of `R` by default.
    #[serde(default)]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub level: Vec<usize>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub p: Vec<f64>,
    /// Solver steps per unit time.
    #[serde(default)]
    pub resolution: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "Params::default_family_size")]
    pub family_size: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "Params::default_p")]
    pub p: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "Params::default_resolution")]
    pub resolution: usize,
    #[serde(default = "Params::default_tau")]
    pub tau: [f64; 4],
    #[serde(default = "Params::default_delta")]
    pub delta: f64,
    /// Members of the Harnack kernel family.
    #[serde(default = "Params::default_members")]
    pub members: usize,
    /// Elapsed times for kernel fits and profiles; derived from the ball when empty.
    #[serde(default)]
    pub t_grid: Vec<f64>,
}

impl Params {
    fn default_family_size() -> usize {
        16
    }
    fn default_p() -> f64 {
        2.0
    }
    fn default_resolution() -> usize {
        64
    }
    fn default_tau() -> [f64; 4] {
        [1.0 / 6.0, 1.0 / 3.0, 0.5, 1.0]
    }
    fn default_delta() -> f64 {
        0.5
    }
    fn default_members() -> usize {
        8
    }
}

impl Default for Params {
    fn default() -> Self {
        Params {
            family_size: Self::default_family_size(),
            epsilon: None,
            p: Self::default_p(),
            kappa: None,
            resolution: Self::default_resolution(),
            tau: Self::default_tau(),
            delta: Self::default_delta(),
            members: Self::default_members(),
            t_grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; the cache directory or `heatlab-out` when absent.
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "OutputConfig::default_name")]
    pub name: String,
}

impl OutputConfig {
    fn default_name() -> String {
        "bundle".into()
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, name: Self::default_name() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceEntry,
    #[serde(default)]
    pub psi: PsiEntry,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub ball: BallConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths resolve against; the config file's own directory.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(space: &str) -> Self {
        ExperimentConfig {
            seed: 0,
            space: SpaceEntry::Text(space.to_string()),
            psi: PsiEntry::default(),
            schedule: ScheduleConfig::default(),
            suites: Vec::new(),
            ball: BallConfig::default(),
            sweep: Sweep::default(),
            params: Params::default(),
            output: OutputConfig::default(),
            base_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a `.json` or TOML config; errors carry the path and line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        let mut cfg = parsed.map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        match &self.base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.space.spec()?;
        self.psi.resolve(&space)?;
        if let Some(f) = &space.path {
            if !self.resolve(f).exists() {
                return Err(Error::Config(format!("graph file `{f}` does not exist")));
            }
        }
        if let Some(SkewSource { profile: Some(f), .. }) = &self.schedule.skew {
            if !self.resolve(f).exists() {
                return Err(Error::Config(format!("profile file `{f}` does not exist")));
            }
        }
        if let (Some(r), Some(w)) = (self.ball.radius, self.ball.width) {
            if !(r > 0.0 && w > 0.0) {
                return Err(Error::Config("ball radius and width must be positive".into()));
            }
        }
        if self.params.family_size == 0 {
            return Err(Error::Config("family_size must be at least 1".into()));
        }
        if self.sweep.resolution.contains(&0) || self.params.resolution == 0 {
            return Err(Error::Config("resolution must be at least 1".into()));
        }
        Ok(())
    }

    /// The config as it is recorded in the bundle.
    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    /// Output directory: the configured one, else the cache directory, else `heatlab-out`.
    pub fn output_dir(&self) -> PathBuf {
        match &self.output.dir {
            Some(d) => self.resolve(d),
            None => std::env::var_os(CACHE_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("heatlab-out")),
        }
    }
}

/// One combination of sweep values; unset axes keep the base config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepPoint {
    pub level: Option<usize>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub p: Option<f64>,
    pub resolution: Option<usize>,
}

impl Sweep {
    /// Cartesian product in the order level, λ, ε, p, resolution.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().map(|x| Some(*x)).collect()
            }
        }
        let mut out = Vec::new();
        for level in axis(&self.level) {
            for lambda in axis(&self.lambda) {
                for epsilon in axis(&self.epsilon) {
                    for p in axis(&self.p) {
                        for resolution in axis(&self.resolution) {
                            out.push(SweepPoint { level, lambda, epsilon, p, resolution });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Per-suite seeds drawn in a fixed order from the run seed.
pub(crate) fn suite_seeds(seed: u64) -> [u64; Suite::ALL.len()] {
    let mut g = rng(seed);
    let mut out = [0u64; Suite::ALL.len()];
    for s in out.iter_mut() {
        *s = g.gen();
    }
    out
}

/// Runs the selected suites at every sweep point. Sweep points run in parallel; the
/// bundle lists them in sweep order and, within a point, suites in dependency order.
pub fn run(config: &ExperimentConfig) -> Result<ReportBundle> {
    config.validate()?;
    let mut bundle = ReportBundle::new(config.seed, config.to_json_value()?);
    let mut selected = config.suites.clone();
    selected.sort();
    selected.dedup();
    if selected.is_empty() {
        return Ok(bundle);
    }
    let points = config.sweep.points();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(points.len()).max(1);
    let mut slots: Vec<Option<Result<Vec<crate::CertReport>>>> = (0..points.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(points.len().div_ceil(workers)).enumerate().collect();
        let per = points.len().div_ceil(workers);
        for (c, chunk) in chunks {
            let points = &points;
            let selected = &selected;
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(suites::run_point(config, &points[c * per + i], selected));
                }
            });
        }
    });
    for slot in slots {
        bundle.reports.extend(slot.expect("every sweep point runs")?);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expands_as_a_product() {
        let s = Sweep { level: vec![2, 3], lambda: vec![0.0, 0.5, 1.0], ..Default::default() };
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].level, Some(2));
        assert_eq!(pts[5].lambda, Some(1.0));
        assert_eq!(Sweep::default().points(), vec![SweepPoint::default()]);
    }

    #[test]
    fn toml_and_json_agree() {
        let t = r#"
seed = 3
space = "path:8"
suites = ["vd", "pi"]
[ball]
center = "center"
radius = 2.5
width = 2.0
"#;
        let j = r#"{"seed":3,"space":"path:8","suites":["vd","pi"],"ball":{"center":"center","radius":2.5,"width":2.0}}"#;
        assert_eq!(ExperimentConfig::from_toml(t).unwrap(), ExperimentConfig::from_json(j).unwrap());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = ExperimentConfig::from_toml("space = \"path:8\"\nsuites = [\"nope\"]\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn anchors_accept_three_forms() {
        let b: BallConfig = serde_json::from_str(r#"{"center": 4}"#).unwrap();
        assert_eq!(b.center, Anchor::Vertex(4));
        let b: BallConfig = serde_json::from_str(r#"{"center": [0.5, 0.25]}"#).unwrap();
        assert_eq!(b.center, Anchor::Point([0.5, 0.25]));
        assert_eq!(BallConfig::default().center, Anchor::Named("center".into()));
    }
}
