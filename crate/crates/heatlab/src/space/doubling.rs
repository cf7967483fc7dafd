use serde::{Deserialize, Serialize};

use super::graph::MetricMeasureGraph;
use crate::error::{Error, Result};
use crate::report::{BallTag, CertReport, Status, Witness};

/// A ball `B(center, big_r)` together with its fringe width `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallTriple {
    pub center: usize,
    pub big_r: f64,
    pub r: f64,
}

impl BallTriple {
    pub fn tag(&self) -> BallTag {
        BallTag { center: self.center, radius: self.big_r, width: self.r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<BallTriple>,
    /// Working region; `None` means the whole graph.
    #[serde(default)]
    pub region: Option<Vec<usize>>,
}

impl BallFamily {
    pub fn new(balls: Vec<BallTriple>) -> Self {
        BallFamily { balls, region: None }
    }

    /// Whether `B(x, 2R)` of each triple stays inside the working region.
    pub fn containment(&self, g: &MetricMeasureGraph) -> Vec<bool> {
        self.balls
            .iter()
            .map(|b| match &self.region {
                None => true,
                Some(y) => g.ball(b.center, 2.0 * b.big_r).iter().all(|v| y.contains(v)),
            })
            .collect()
    }

    /// Every vertex as a center with fixed `(R, r)`.
    pub fn all_centers(g: &MetricMeasureGraph, big_r: f64, r: f64) -> Self {
        Self::new((0..g.len()).map(|center| BallTriple { center, big_r, r }).collect())
    }
}

/// `C_VD = max V(x,R+r)/V(x,R)` over the family, with `ν = log2 C_VD`.
pub fn certify_vd(g: &MetricMeasureGraph, balls: &BallFamily) -> Result<CertReport> {
    if balls.balls.is_empty() {
        return Err(Error::Empty("ball family"));
    }
    let mut best = (0.0f64, balls.balls[0]);
    for b in &balls.balls {
        if !(b.r > 0.0 && b.r < b.big_r) {
            return Err(Error::Invalid(format!("ball needs 0 < r < R, got R={} r={}", b.big_r, b.r)));
        }
        let inner = g.volume(b.center, b.big_r);
        if inner <= 0.0 {
            return Err(Error::Empty("ball"));
        }
        let ratio = g.volume(b.center, b.big_r + b.r) / inner;
        if ratio > best.0 {
            best = (ratio, *b);
        }
    }
    let flags = balls.containment(g);
    let outside = flags.iter().filter(|f| !**f).count();
    let mut rep = CertReport::measured("vd", best.0, "ball-family")
        .value("nu", best.0.log2())
        .value("balls", balls.balls.len() as f64)
        .value("outside_region", outside as f64)
        .with_witness(Witness { label: "worst ball".into(), ball: Some(best.1.tag()), function: None });
    if outside > 0 {
        rep = rep.note(format!("{outside} balls leave the working region"));
    }
    Ok(rep)
}

/// Pair of balls `B(x,R) ⊇ B(y,s)` for the reverse doubling test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RvdPair {
    pub x: usize,
    pub big_r: f64,
    pub y: usize,
    pub s: f64,
}

/// Pairs of concentric balls at `x` with radii taken from `radii` (larger over smaller).
pub fn nested_pairs(x: usize, radii: &[f64]) -> Vec<RvdPair> {
    let mut out = Vec::new();
    for (i, &s) in radii.iter().enumerate() {
        for &big_r in &radii[i..] {
            out.push(RvdPair { x, big_r, y: x, s });
        }
    }
    out
}

/// Fits `ν₀` by log-log regression through the origin and reports the largest
/// `C_RVD` with `V(x,R)/V(y,s) ≥ C_RVD (R/s)^{ν₀}` on every usable pair.
pub fn certify_rvd(g: &MetricMeasureGraph, pairs: &[RvdPair]) -> Result<CertReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair family"));
    }
    let total = g.total_mass();
    let mut pts = Vec::new();
    let mut skipped = 0;
    for p in pairs {
        if !(p.s > 0.0 && p.s <= p.big_r) {
            return Err(Error::Invalid("pair needs 0 < s <= R".into()));
        }
        let vr = g.volume(p.x, p.big_r);
        if vr >= total * (1.0 - 1e-15) {
            skipped += 1;
            continue;
        }
        let vs = g.volume(p.y, p.s);
        if vs <= 0.0 {
            return Err(Error::Empty("ball"));
        }
        pts.push((p, (p.big_r / p.s).ln(), (vr / vs).ln()));
    }
    if pts.is_empty() {
        return Ok(CertReport::measured("rvd", f64::NAN, "pairs")
            .with_status(Status::NotApplicable)
            .value("skipped", skipped as f64)
            .note("every pair covers the whole graph"));
    }
    let sxx: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let sxy: f64 = pts.iter().map(|p| p.1 * p.2).sum();
    let nu0 = if sxx > 1e-300 { (sxy / sxx).max(0.0) } else { 0.0 };
    let mut best = (f64::INFINITY, *pts[0].0);
    for (p, lx, ly) in &pts {
        let c = (ly - nu0 * lx).exp();
        if c < best.0 {
            best = (c, **p);
        }
    }
    let mut rep = CertReport::measured("rvd", best.0, "pairs")
        .value("nu0", nu0)
        .value("pairs", pts.len() as f64)
        .value("skipped", skipped as f64)
        .with_witness(Witness {
            label: format!("x={},R={},y={},s={}", best.1.x, best.1.big_r, best.1.y, best.1.s),
            ..Default::default()
        });
    if skipped > 0 {
        rep = rep.note(format!("{skipped} pairs skipped: ball equals the whole graph"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::super::graph::{build_space, SpaceSpec};
    use super::*;

    #[test]
    fn single_vertex_graph_has_unit_doubling() {
        let g = MetricMeasureGraph::from_parts(
            super::super::graph::Family::Custom { name: "dot".into() },
            None,
            vec![2.0],
            vec![],
            super::super::graph::MetricKind::Graph,
            1.0,
            vec![],
        )
        .unwrap();
        let rep = certify_vd(&g, &BallFamily::new(vec![BallTriple { center: 0, big_r: 1.0, r: 0.5 }])).unwrap();
        assert_eq!(rep.constant, 1.0);
    }

    #[test]
    fn path_eight_center_ball() {
        let g = build_space(&SpaceSpec::path(8)).unwrap();
        let fam = BallFamily::new(vec![BallTriple { center: 4, big_r: 2.5, r: 2.0 }]);
        let rep = certify_vd(&g, &fam).unwrap();
        assert!((rep.constant - 1.8).abs() < 1e-15);
        assert!((rep.get("nu").unwrap() - 1.8f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn doubling_ignores_measure_scale() {
        let g = build_space(&SpaceSpec::gasket(3)).unwrap();
        let fam = BallFamily::all_centers(&g, 0.3, 0.2);
        let a = certify_vd(&g, &fam).unwrap().constant;
        let b = certify_vd(&g.rescaled(7.0, 1.0), &fam).unwrap().constant;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn rvd_trivial_and_path() {
        let g = build_space(&SpaceSpec::path(16)).unwrap();
        let rep = certify_rvd(&g, &[RvdPair { x: 8, big_r: 2.0, y: 8, s: 2.0 }]).unwrap();
        assert!((rep.constant - 1.0).abs() < 1e-15);
        let pairs = nested_pairs(8, &[1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5]);
        let rep = certify_rvd(&g, &pairs).unwrap();
        assert!((rep.get("nu0").unwrap() - 1.0).abs() < 0.15);
    }

    #[test]
    fn rvd_skips_whole_graph_balls() {
        let g = build_space(&SpaceSpec::path(4)).unwrap();
        let rep = certify_rvd(&g, &[RvdPair { x: 2, big_r: 10.0, y: 2, s: 1.0 }, RvdPair { x: 2, big_r: 1.5, y: 2, s: 0.5 }])
            .unwrap();
        assert_eq!(rep.get("skipped"), Some(1.0));
        assert!(!rep.notes.is_empty());
    }
}
