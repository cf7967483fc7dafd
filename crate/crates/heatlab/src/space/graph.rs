use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VERTEX_CAP: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    /// Edge count times the mesh width.
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Gasket { level: usize },
    Path { n: usize },
    Grid { side: usize },
    Custom { name: String },
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::Gasket { level } => format!("gasket:{level}"),
            Family::Path { n } => format!("path:{n}"),
            Family::Grid { side } => format!("grid:{side}"),
            Family::Custom { name } => format!("custom:{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

/// Recipe for [`build_space`]; every numeric override is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub family: String,
    /// Gasket level, path length or grid side.
    #[serde(default)]
    pub size: usize,
    /// Gasket conductance per level (conductance = factor^m).
    #[serde(default)]
    pub conductance_factor: Option<f64>,
    /// Gasket measure per level (measure = factor^m).
    #[serde(default)]
    pub measure_factor: Option<f64>,
    /// Physical length of a path or grid side.
    #[serde(default)]
    pub span: Option<f64>,
    #[serde(default)]
    pub metric: Option<MetricKind>,
    /// Uniform overrides.
    #[serde(default)]
    pub conductance: Option<f64>,
    #[serde(default)]
    pub measure: Option<f64>,
    /// Graph file for the `file` family.
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub cap: Option<usize>,
}

impl SpaceSpec {
    pub fn new(family: &str, size: usize) -> Self {
        SpaceSpec {
            family: family.to_string(),
            size,
            conductance_factor: None,
            measure_factor: None,
            span: None,
            metric: None,
            conductance: None,
            measure: None,
            path: None,
            cap: None,
        }
    }

    pub fn gasket(level: usize) -> Self {
        Self::new("gasket", level)
    }

    pub fn path(n: usize) -> Self {
        Self::new("path", n)
    }

    pub fn grid(side: usize) -> Self {
        Self::new("grid", side)
    }

    pub fn with_span(mut self, span: f64) -> Self {
        self.span = Some(span);
        self
    }

    pub fn with_metric(mut self, m: MetricKind) -> Self {
        self.metric = Some(m);
        self
    }

    /// Parses `gasket:4` or `family=gasket,level=4,metric=graph`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if !text.contains('=') {
            let (fam, size) = text
                .split_once(':')
                .ok_or_else(|| Error::BadSpec(format!("expected family:size, got `{text}`")))?;
            if fam == "file" {
                let mut s = SpaceSpec::new("file", 0);
                s.path = Some(size.to_string());
                return Ok(s);
            }
            let size = size.parse().map_err(|_| Error::BadSpec(format!("bad size `{size}`")))?;
            return Ok(SpaceSpec::new(fam, size));
        }
        let mut spec = SpaceSpec::new("", 0);
        for part in text.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::BadSpec(format!("expected key=value, got `{part}`")))?;
            let v = v.trim();
            let num = || v.parse::<f64>().map_err(|_| Error::BadSpec(format!("bad number for {k}: `{v}`")));
            match k.trim() {
                "family" => spec.family = v.to_string(),
                "level" | "n" | "side" | "size" => {
                    spec.size = v.parse().map_err(|_| Error::BadSpec(format!("bad size `{v}`")))?
                }
                "conductance_factor" => spec.conductance_factor = Some(num()?),
                "measure_factor" => spec.measure_factor = Some(num()?),
                "span" => spec.span = Some(num()?),
                "conductance" => spec.conductance = Some(num()?),
                "measure" => spec.measure = Some(num()?),
                "cap" => spec.cap = Some(num()? as usize),
                "path" => spec.path = Some(v.to_string()),
                "metric" => {
                    spec.metric = Some(match v {
                        "euclidean" => MetricKind::Euclidean,
                        "graph" => MetricKind::Graph,
                        _ => return Err(Error::BadSpec(format!("unknown metric `{v}`"))),
                    })
                }
                other => return Err(Error::BadSpec(format!("unknown key `{other}`"))),
            }
        }
        if spec.family.is_empty() {
            return Err(Error::BadSpec("missing family".into()));
        }
        Ok(spec)
    }
}

/// Finite connected weighted graph with a metric and a vertex measure.
#[derive(Debug, Clone)]
pub struct MetricMeasureGraph {
    pub family: Family,
    pub coords: Option<Vec<[f64; 2]>>,
    pub measure: Vec<f64>,
    pub edges: Vec<Edge>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub metric: MetricKind,
    pub mesh: f64,
    /// Distinguished boundary vertices (gasket corners, path ends, grid corners).
    pub corners: Vec<usize>,
    dist: Vec<f64>,
    geodesic: bool,
}

impl MetricMeasureGraph {
    pub fn from_parts(
        family: Family,
        coords: Option<Vec<[f64; 2]>>,
        measure: Vec<f64>,
        edges: Vec<Edge>,
        metric: MetricKind,
        mesh: f64,
        corners: Vec<usize>,
    ) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::BadGraph("no vertices".into()));
        }
        if measure.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::BadGraph("measure must be positive".into()));
        }
        if !(mesh > 0.0) {
            return Err(Error::BadGraph("mesh must be positive".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::BadGraph(format!("bad edge ({}, {})", e.a, e.b)));
            }
            if !(e.conductance > 0.0 && e.conductance.is_finite()) {
                return Err(Error::BadGraph("conductance must be positive".into()));
            }
            neighbors[e.a].push((e.b, e.conductance));
            neighbors[e.b].push((e.a, e.conductance));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::Dimension { expected: n, got: c.len() });
            }
        }
        let hops = all_hops(&neighbors);
        if hops.iter().any(|&h| h == usize::MAX) {
            return Err(Error::Disconnected);
        }
        let dist: Vec<f64> = match metric {
            MetricKind::Graph => hops.iter().map(|&h| h as f64 * mesh).collect(),
            MetricKind::Euclidean => {
                let c = coords
                    .as_ref()
                    .ok_or_else(|| Error::BadGraph("euclidean metric needs coordinates".into()))?;
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let dx = c[i][0] - c[j][0];
                        let dy = c[i][1] - c[j][1];
                        d[i * n + j] = (dx * dx + dy * dy).sqrt();
                    }
                }
                d
            }
        };
        let geodesic = dist
            .iter()
            .zip(&hops)
            .all(|(&d, &h)| (d - h as f64 * mesh).abs() <= 1e-12 * (1.0 + d));
        Ok(MetricMeasureGraph { family, coords, measure, edges, neighbors, metric, mesh, corners, dist, geodesic })
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.len() + y]
    }

    /// True when distances coincide with mesh-scaled edge counts.
    pub fn is_geodesic(&self) -> bool {
        self.geodesic
    }

    /// Open ball `{y : d(x,y) < r}`, ascending vertex order.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&y| self.d(x, y) < r).collect()
    }

    pub fn in_ball(&self, x: usize, r: f64) -> Vec<bool> {
        (0..self.len()).map(|y| self.d(x, y) < r).collect()
    }

    pub fn volume(&self, x: usize, r: f64) -> f64 {
        (0..self.len()).filter(|&y| self.d(x, y) < r).map(|y| self.measure[y]).sum()
    }

    pub fn set_volume(&self, set: &[usize]) -> f64 {
        set.iter().map(|&y| self.measure[y]).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest eccentricity.
    pub fn radius(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|x| (0..n).map(|y| self.d(x, y)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the nearest vertex outside `set`; infinite when `set` is everything.
    pub fn distance_to_complement(&self, x: usize, set: &[bool]) -> f64 {
        (0..self.len()).filter(|&y| !set[y]).map(|y| self.d(x, y)).fold(f64::INFINITY, f64::min)
    }

    /// Vertex closest to an ambient point (ties to the lower index).
    pub fn nearest_vertex(&self, p: [f64; 2]) -> Option<usize> {
        let c = self.coords.as_ref()?;
        let mut best = (f64::INFINITY, 0);
        for (i, q) in c.iter().enumerate() {
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 - 1e-12 {
                best = (d, i);
            }
        }
        Some(best.1)
    }

    /// Vertex whose eccentricity is smallest.
    pub fn center(&self) -> usize {
        let n = self.len();
        let mut best = (f64::INFINITY, 0);
        for x in 0..n {
            let e = (0..n).map(|y| self.d(x, y)).fold(0.0, f64::max);
            if e < best.0 - 1e-12 {
                best = (e, x);
            }
        }
        best.1
    }

    /// Same graph with measure multiplied by `lm` and conductances by `lw`.
    pub fn rescaled(&self, lm: f64, lw: f64) -> Self {
        let mut g = self.clone();
        for m in &mut g.measure {
            *m *= lm;
        }
        for e in &mut g.edges {
            e.conductance *= lw;
        }
        for nb in &mut g.neighbors {
            for (_, w) in nb.iter_mut() {
                *w *= lw;
            }
        }
        g
    }

    /// Connectivity of the subgraph induced by `set`.
    pub fn induced_components(&self, set: &[bool]) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut comps = 0;
        for s in 0..n {
            if !set[s] || seen[s] {
                continue;
            }
            comps += 1;
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = q.pop_front() {
                for &(u, _) in &self.neighbors[v] {
                    if set[u] && !seen[u] {
                        seen[u] = true;
                        q.push_back(u);
                    }
                }
            }
        }
        comps
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            vertices: (0..self.len())
                .map(|i| VertexRecord {
                    id: i,
                    coords: self.coords.as_ref().map(|c| c[i].to_vec()),
                    measure: self.measure[i],
                })
                .collect(),
            edges: self.edges.iter().map(|e| EdgeRecord { a: e.a, b: e.b, conductance: e.conductance }).collect(),
            metric: self.metric,
            mesh: self.mesh,
        }
    }
}

fn all_hops(neighbors: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = neighbors.len();
    let mut out = vec![usize::MAX; n * n];
    for s in 0..n {
        let row = &mut out[s * n..(s + 1) * n];
        row[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &(u, _) in &neighbors[v] {
                if row[u] == usize::MAX {
                    row[u] = row[v] + 1;
                    q.push_back(u);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

/// On-disk graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub metric: MetricKind,
    pub mesh: f64,
}

impl GraphFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn into_graph(self, name: &str, cap: usize) -> Result<MetricMeasureGraph> {
        let n = self.vertices.len();
        if n > cap {
            return Err(Error::TooLarge { count: n, cap });
        }
        let index: BTreeMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        if index.len() != n {
            return Err(Error::BadGraph("duplicate vertex id".into()));
        }
        let coords = if self.vertices.iter().all(|v| v.coords.is_some()) {
            let mut c = Vec::with_capacity(n);
            for v in &self.vertices {
                let p = v.coords.as_ref().unwrap();
                if p.is_empty() || p.len() > 2 {
                    return Err(Error::BadGraph("coordinates must have 1 or 2 entries".into()));
                }
                c.push([p[0], p.get(1).copied().unwrap_or(0.0)]);
            }
            Some(c)
        } else {
            None
        };
        let lookup = |id: usize| index.get(&id).copied().ok_or_else(|| Error::BadGraph(format!("unknown vertex {id}")));
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push(Edge { a: lookup(e.a)?, b: lookup(e.b)?, conductance: e.conductance });
        }
        let measure = self.vertices.iter().map(|v| v.measure).collect();
        MetricMeasureGraph::from_parts(
            Family::Custom { name: name.to_string() },
            coords,
            measure,
            edges,
            self.metric,
            self.mesh,
            Vec::new(),
        )
    }
}

pub fn build_space(spec: &SpaceSpec) -> Result<MetricMeasureGraph> {
    let cap = spec.cap.unwrap_or(DEFAULT_VERTEX_CAP);
    let mut g = match spec.family.as_str() {
        "gasket" => gasket(spec, cap)?,
        "path" => path(spec, cap)?,
        "grid" => grid(spec, cap)?,
        "file" => {
            let p = spec.path.as_ref().ok_or_else(|| Error::BadSpec("file family needs path".into()))?;
            let mut file = GraphFile::load(Path::new(p))?;
            if let Some(m) = spec.metric {
                file.metric = m;
            }
            file.into_graph(p, cap)?
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    if let Some(c) = spec.conductance {
        for e in &mut g.edges {
            e.conductance = c;
        }
        for nb in &mut g.neighbors {
            for (_, w) in nb.iter_mut() {
                *w = c;
            }
        }
    }
    if let Some(m) = spec.measure {
        g.measure.iter_mut().for_each(|v| *v = m);
    }
    Ok(g)
}

fn require_size(spec: &SpaceSpec, min: usize) -> Result<()> {
    if spec.size < min {
        return Err(Error::BadSpec(format!("{} needs size >= {min}", spec.family)));
    }
    Ok(())
}

fn gasket(spec: &SpaceSpec, cap: usize) -> Result<MetricMeasureGraph> {
    let m = spec.size;
    let count = 3 * (3usize.checked_pow(m as u32).ok_or(Error::TooLarge { count: usize::MAX, cap })? + 1) / 2;
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    let side = 1i64 << m;
    // Lattice coordinates (i, j) stand for (i·e1 + j·e2)/2^m.
    let mut tri = vec![(0i64, 0i64, side)];
    while tri[0].2 > 1 {
        let mut next = Vec::with_capacity(tri.len() * 3);
        for (i, j, s) in tri {
            let h = s / 2;
            next.push((i, j, h));
            next.push((i + h, j, h));
            next.push((i, j + h, h));
        }
        tri = next;
    }
    let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &(i, j, _) in &tri {
        for p in [(j, i), (j, i + 1), (j + 1, i)] {
            index.entry(p).or_insert(0);
        }
    }
    for (k, v) in index.values_mut().enumerate() {
        *v = k;
    }
    let w = spec.conductance_factor.unwrap_or(5.0 / 3.0).powi(m as i32);
    let mu = spec.measure_factor.unwrap_or(1.0 / 3.0).powi(m as i32);
    let mut edges = Vec::with_capacity(tri.len() * 3);
    for &(i, j, _) in &tri {
        let a = index[&(j, i)];
        let b = index[&(j, i + 1)];
        let c = index[&(j + 1, i)];
        for (p, q) in [(a, b), (b, c), (a, c)] {
            edges.push(Edge { a: p.min(q), b: p.max(q), conductance: w });
        }
    }
    let h = 1.0 / side as f64;
    let s3 = 3f64.sqrt() / 2.0;
    let mut coords = vec![[0.0; 2]; index.len()];
    for (&(j, i), &k) in &index {
        coords[k] = [(i as f64 + 0.5 * j as f64) * h, s3 * j as f64 * h];
    }
    let corners = vec![index[&(0, 0)], index[&(0, side)], index[&(side, 0)]];
    let n = index.len();
    debug_assert_eq!(n, count);
    MetricMeasureGraph::from_parts(
        Family::Gasket { level: m },
        Some(coords),
        vec![mu; n],
        edges,
        spec.metric.unwrap_or(MetricKind::Euclidean),
        h,
        corners,
    )
}

fn path(spec: &SpaceSpec, cap: usize) -> Result<MetricMeasureGraph> {
    require_size(spec, 1)?;
    let n = spec.size;
    if n + 1 > cap {
        return Err(Error::TooLarge { count: n + 1, cap });
    }
    let h = spec.span.unwrap_or(n as f64) / n as f64;
    let edges = (0..n).map(|i| Edge { a: i, b: i + 1, conductance: 1.0 / h }).collect();
    let coords = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
    MetricMeasureGraph::from_parts(
        Family::Path { n },
        Some(coords),
        vec![h; n + 1],
        edges,
        spec.metric.unwrap_or(MetricKind::Euclidean),
        h,
        vec![0, n],
    )
}

fn grid(spec: &SpaceSpec, cap: usize) -> Result<MetricMeasureGraph> {
    require_size(spec, 2)?;
    let n = spec.size;
    if n * n > cap {
        return Err(Error::TooLarge { count: n * n, cap });
    }
    let h = spec.span.unwrap_or((n - 1) as f64) / (n - 1) as f64;
    let id = |i: usize, j: usize| j * n + i;
    let mut edges = Vec::new();
    let mut coords = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push([i as f64 * h, j as f64 * h]);
            if i + 1 < n {
                edges.push(Edge { a: id(i, j), b: id(i + 1, j), conductance: 1.0 });
            }
            if j + 1 < n {
                edges.push(Edge { a: id(i, j), b: id(i, j + 1), conductance: 1.0 });
            }
        }
    }
    MetricMeasureGraph::from_parts(
        Family::Grid { side: n },
        Some(coords),
        vec![h * h; n * n],
        edges,
        spec.metric.unwrap_or(MetricKind::Euclidean),
        h,
        vec![id(0, 0), id(n - 1, 0), id(0, n - 1), id(n - 1, n - 1)],
    )
}
