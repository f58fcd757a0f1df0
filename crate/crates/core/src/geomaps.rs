//! Spherical blow-up charts, inversion, stereographic charts and cone models.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::linalg::{dist, norm, scale};
use crate::rng::stream_rng;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("front face is not a single point")]
    FrontFace,
    #[error("inversion undefined at the origin")]
    Origin,
    #[error("point at infinity")]
    PointAtInfinity,
    #[error("outside chart domain: |y| = {0} > 1/2")]
    OutsideChart(f64),
    #[error("link vector is not unit: |s| = {0}")]
    NonUnit(f64),
    #[error("collar radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("LNE constant {0} < 1")]
    ConstantBelowOne(f64),
    #[error("empty shell at radius {0}")]
    EmptyShell(f64),
    #[error("cone model needs at least one non-empty link component")]
    EmptyLink,
    #[error("link components touch (separation 0)")]
    NoSeparation,
    #[error("dimension mismatch")]
    Dimension,
}

/// Polar coordinates `(r, u)` around `center`, valid inside `collar_radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupChart {
    pub center: Vec<f64>,
    pub collar_radius: f64,
}

impl BlowupChart {
    pub fn new(center: Vec<f64>, collar_radius: f64) -> Result<Self, GeoError> {
        if !(collar_radius > 0.0) || !collar_radius.is_finite() {
            return Err(GeoError::BadRadius(collar_radius));
        }
        Ok(BlowupChart { center, collar_radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn blowup_coords(&self, x: &[f64]) -> Result<(f64, Vec<f64>), GeoError> {
        if x.len() != self.center.len() {
            return Err(GeoError::Dimension);
        }
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let r = norm(&d);
        if r == 0.0 {
            return Err(GeoError::FrontFace);
        }
        Ok((r, scale(&d, 1.0 / r)))
    }

    pub fn blowdown(&self, r: f64, u: &[f64]) -> Vec<f64> {
        self.center.iter().zip(u).map(|(a, ui)| a + r * ui).collect()
    }
}

/// `x ↦ x / |x|²`
pub fn inversion(x: &[f64]) -> Result<Vec<f64>, GeoError> {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2 == 0.0 {
        return Err(GeoError::Origin);
    }
    Ok(scale(x, 1.0 / n2))
}

/// Inverse stereographic chart `ℝⁿ → Sⁿ ⊂ ℝⁿ⁺¹`, sending `∞` to `ω = (0,…,0,1)`.
pub fn stereographic(x: &[f64]) -> Vec<f64> {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    let den = n2 + 1.0;
    let mut out: Vec<f64> = x.iter().map(|v| 2.0 * v / den).collect();
    // (n2 - 1)/(n2 + 1) loses precision for huge n2; 1 - 2/den does not
    out.push(1.0 - 2.0 / den);
    out
}

/// Inverse of [`stereographic`].
pub fn stereographic_inverse(p: &[f64]) -> Result<Vec<f64>, GeoError> {
    let (last, head) = p.split_last().ok_or(GeoError::Dimension)?;
    let den = 1.0 - last;
    if den <= 0.0 || head.iter().all(|v| *v == 0.0) && den.abs() < 1e-300 {
        return Err(GeoError::PointAtInfinity);
    }
    Ok(head.iter().map(|v| v / den).collect())
}

/// Chart at infinity: `φ(y) = (2y, 1 − |y|²) / (1 + |y|²)` on `|y| ≤ 1/2`, so that
/// `φ(ι(x)) = σ(x)` for `|x| ≥ 2`.
pub fn phi_n(y: &[f64]) -> Result<Vec<f64>, GeoError> {
    let n2: f64 = y.iter().map(|v| v * v).sum();
    if n2.sqrt() > 0.5 {
        return Err(GeoError::OutsideChart(n2.sqrt()));
    }
    let den = 1.0 + n2;
    let mut out: Vec<f64> = y.iter().map(|v| 2.0 * v / den).collect();
    out.push((1.0 - n2) / den);
    Ok(out)
}

/// A point `r·s` of a cone with vertex at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub r: f64,
    pub s: Vec<f64>,
}

impl ConePoint {
    pub fn new(r: f64, s: Vec<f64>) -> Result<Self, GeoError> {
        check_unit(&s)?;
        Ok(ConePoint { r, s })
    }

    pub fn position(&self) -> Vec<f64> {
        scale(&self.s, self.r)
    }
}

fn check_unit(s: &[f64]) -> Result<(), GeoError> {
    let n = norm(s);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(GeoError::NonUnit(n));
    }
    Ok(())
}

/// `|r s − r′ s′|`.
pub fn cone_outer_distance(p: &ConePoint, q: &ConePoint) -> Result<f64, GeoError> {
    check_unit(&p.s)?;
    check_unit(&q.s)?;
    if p.s.len() != q.s.len() {
        return Err(GeoError::Dimension);
    }
    Ok(dist(&p.position(), &q.position()))
}

/// Two-sided bound on `|r s − r′ s′|` when `|s − s′| ≥ delta`:
/// `(δ/2)(r + r′) ≤ |r s − r′ s′| ≤ r + r′`.
///
/// The lower constant is `δ/2`, not `δ`: two antipodal unit vectors at equal
/// radius have `δ = 2` and distance `2r`, which is `δ·r`, half of `δ(r + r′)`.
pub fn law_of_cosines_bounds(p: &ConePoint, q: &ConePoint, delta: f64) -> (f64, f64) {
    let sum = p.r + q.r;
    (0.5 * delta * sum, sum)
}

/// LNE constant `2L + 1` of the cone over an `L`-LNE link.
pub fn cone_lne_constant(link_constant: f64) -> Result<f64, GeoError> {
    if !(link_constant >= 1.0) {
        return Err(GeoError::ConstantBelowOne(link_constant));
    }
    Ok(2.0 * link_constant + 1.0)
}

/// Cone `⋃ ℝ≥0 · Sᵢ` over a link given by samples of its components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeModel {
    pub links: Vec<Vec<Vec<f64>>>,
    pub link_lne_constants: Vec<f64>,
    pub separation: f64,
}

impl ConeModel {
    /// Validates unit norms and constants, and computes the separation `δ`
    /// (2 when there is a single component).
    pub fn new(links: Vec<Vec<Vec<f64>>>, link_lne_constants: Vec<f64>) -> Result<Self, GeoError> {
        if links.is_empty() || links.iter().any(Vec::is_empty) || links.len() != link_lne_constants.len() {
            return Err(GeoError::EmptyLink);
        }
        let dim = links[0][0].len();
        for s in links.iter().flatten() {
            if s.len() != dim {
                return Err(GeoError::Dimension);
            }
            check_unit(s)?;
        }
        for &l in &link_lne_constants {
            if !(l >= 1.0) {
                return Err(GeoError::ConstantBelowOne(l));
            }
        }
        let separation = component_separation(&links);
        if separation <= 0.0 {
            return Err(GeoError::NoSeparation);
        }
        Ok(ConeModel { links, link_lne_constants, separation })
    }

    /// Groups unit directions by single linkage at `threshold` and builds the model,
    /// estimating each component's link constant with `link_constant`.
    pub fn from_directions(
        dirs: &[Vec<f64>],
        threshold: f64,
        link_constant: impl Fn(&[Vec<f64>]) -> f64,
    ) -> Result<Self, GeoError> {
        let labels = single_linkage(dirs, threshold);
        let k = labels.iter().copied().max().map(|m| m + 1).unwrap_or(0);
        let mut links = vec![Vec::new(); k];
        for (d, &l) in dirs.iter().zip(&labels) {
            links[l].push(d.clone());
        }
        let consts = links.iter().map(|c| link_constant(c).max(1.0)).collect();
        ConeModel::new(links, consts)
    }

    pub fn dim(&self) -> usize {
        self.links[0][0].len()
    }

    /// Certified constant `2L + 1` for component `i`.
    pub fn certified_constant(&self, i: usize) -> f64 {
        2.0 * self.link_lne_constants[i] + 1.0
    }

    /// Random cone points `r·s` with `r` uniform in `(0, r_max]` and `s` drawn from
    /// the link samples, tagged with their component.
    pub fn sample(&self, count: usize, r_max: f64, seed: u64) -> Vec<(usize, ConePoint)> {
        let mut rng = stream_rng(seed, 0);
        let total: usize = self.links.iter().map(Vec::len).sum();
        (0..count)
            .map(|_| {
                let mut k = rng.random_range(0..total);
                let mut comp = 0;
                while k >= self.links[comp].len() {
                    k -= self.links[comp].len();
                    comp += 1;
                }
                let r = r_max * (1.0 - rng.random::<f64>());
                (comp, ConePoint { r, s: self.links[comp][k].clone() })
            })
            .collect()
    }
}

/// Minimum distance between samples of distinct components; 2 for one component.
pub fn component_separation(links: &[Vec<Vec<f64>>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..links.len() {
        for j in i + 1..links.len() {
            for a in &links[i] {
                for b in &links[j] {
                    best = best.min(dist(a, b));
                }
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        2.0
    }
}

/// Component labels of the single-linkage clustering at `threshold`, numbered in
/// order of first appearance.
pub fn single_linkage(points: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if dist(&points[i], &points[j]) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        if ids[root] == usize::MAX {
            ids[root] = next;
            next += 1;
        }
        out.push(ids[root]);
    }
    out
}

/// Symmetric Hausdorff distance between finite point sets (∞ if exactly one is empty).
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticDirections {
    /// `x/|x|` for the outermost shell.
    pub directions: Vec<Vec<f64>>,
    pub shells: Vec<f64>,
    pub counts: Vec<usize>,
    /// Hausdorff distance between the direction sets of consecutive shells.
    pub spreads: Vec<f64>,
}

/// Points belonging to the shell of radius `r`: tagged with `r`, or untagged with
/// `| |x| − r |` within the cloud's shell tolerance.
pub fn shell_members(cloud: &PointCloud, r: f64) -> Vec<usize> {
    let tol = cloud.header.shell_tol.max(1e-9 * r);
    (0..cloud.len())
        .filter(|&i| match cloud.shells[i] {
            Some(s) => (s - r).abs() <= 1e-12 * r.max(1.0),
            None => (norm(&cloud.points[i]) - r).abs() <= tol,
        })
        .collect()
}

pub fn asymptotic_directions(cloud: &PointCloud, shells: &[f64]) -> Result<AsymptoticDirections, GeoError> {
    let mut sets: Vec<Vec<Vec<f64>>> = Vec::with_capacity(shells.len());
    for &r in shells {
        let idx = shell_members(cloud, r);
        if idx.is_empty() {
            return Err(GeoError::EmptyShell(r));
        }
        sets.push(
            idx.iter()
                .map(|&i| {
                    let p = &cloud.points[i];
                    scale(p, 1.0 / norm(p))
                })
                .collect(),
        );
    }
    let spreads = sets.windows(2).map(|w| hausdorff(&w[0], &w[1])).collect();
    Ok(AsymptoticDirections {
        counts: sets.iter().map(Vec::len).collect(),
        directions: sets.pop().unwrap_or_default(),
        shells: shells.to_vec(),
        spreads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn blowup_examples() {
        let c = BlowupChart::new(vec![0.0, 0.0], 1.0).unwrap();
        let (r, u) = c.blowup_coords(&[3.0, 4.0]).unwrap();
        assert_eq!(r, 5.0);
        assert_relative_eq!(u[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(u[1], 0.8, epsilon = 1e-15);
        let c = BlowupChart::new(vec![1.0, 0.0], 1.0).unwrap();
        assert_eq!(c.blowup_coords(&[1.0, 2.0]).unwrap(), (2.0, vec![0.0, 1.0]));
        assert_eq!(c.blowup_coords(&[1.0, 0.0]), Err(GeoError::FrontFace));
        assert!(BlowupChart::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(inversion(&[2.0, 0.0]).unwrap(), vec![0.5, 0.0]);
        let u = [0.6, 0.8];
        let v = inversion(&u).unwrap();
        assert_relative_eq!(v[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(v[1], 0.8, epsilon = 1e-15);
        let w = inversion(&[1.2, 1.6]).unwrap();
        assert_relative_eq!(w[0] / w[1], 0.75, epsilon = 1e-15);
        assert!(w[0] > 0.0);
        assert_eq!(inversion(&[0.0, 0.0]), Err(GeoError::Origin));
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(&[0.0, 0.0]), vec![0.0, 0.0, -1.0]);
        let e = stereographic(&[0.6, 0.8]);
        assert_relative_eq!(e[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(e[0], 0.6, epsilon = 1e-15);
        assert!(stereographic_inverse(&[0.0, 0.0, 1.0]).is_err());
        let x = [4.0, -7.5];
        let back = stereographic_inverse(&stereographic(&x)).unwrap();
        assert_relative_eq!(back[0], x[0], max_relative = 1e-12);
        assert_relative_eq!(back[1], x[1], max_relative = 1e-12);
    }

    #[test]
    fn stereographic_approaches_north_pole() {
        // |σ(x) − ω|² = 4/(|x|² + 1) exactly, hence ≤ (2/|x|)² ≤ (3/|x|)²
        for &t in &[4.0, 10.0, 1e3, 1e6] {
            let p = stereographic(&[t, 0.0]);
            let d = dist(&p, &[0.0, 0.0, 1.0]);
            assert_relative_eq!(d, 2.0 / (t * t + 1.0f64).sqrt(), max_relative = 1e-9);
            assert!(d <= 3.0 / t);
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_n(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        let y = inversion(&[4.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.25, 0.0]);
        let a = phi_n(&y).unwrap();
        let b = stereographic(&[4.0, 0.0]);
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-15);
        }
        assert_relative_eq!(phi_n(&[0.5, 0.0]).unwrap()[2], 0.6, epsilon = 1e-15);
        assert!(matches!(phi_n(&[0.5, 0.1]), Err(GeoError::OutsideChart(_))));
    }

    #[test]
    fn cone_distance_examples() {
        let p = ConePoint::new(1.0, vec![1.0, 0.0]).unwrap();
        let q = ConePoint::new(1.0, vec![-1.0, 0.0]).unwrap();
        assert_eq!(cone_outer_distance(&p, &q).unwrap(), 2.0);
        let q = ConePoint::new(2.0, vec![1.0, 0.0]).unwrap();
        assert_eq!(cone_outer_distance(&p, &q).unwrap(), 1.0);
        let q = ConePoint::new(1.0, vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(cone_outer_distance(&p, &q).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(ConePoint::new(1.0, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn unhalved_lower_bound_fails_on_antipodes() {
        let p = ConePoint::new(1.0, vec![1.0, 0.0]).unwrap();
        let q = ConePoint::new(1.0, vec![-1.0, 0.0]).unwrap();
        let delta = dist(&p.s, &q.s);
        let d = cone_outer_distance(&p, &q).unwrap();
        assert!(delta * (p.r + q.r) > d);
        let (lo, hi) = law_of_cosines_bounds(&p, &q, delta);
        assert!(lo <= d && d <= hi);
    }

    #[test]
    fn cone_constant() {
        assert_eq!(cone_lne_constant(1.0).unwrap(), 3.0);
        assert!(cone_lne_constant(0.9).is_err());
        assert!(cone_lne_constant(std::f64::consts::FRAC_PI_2).unwrap() >= 1.0);
    }

    #[test]
    fn two_ray_constant_below_certified_bound() {
        // ratio (r + 1)/|r e₁ − e_θ| is maximal at r = 1 with value 1/sin(θ/2)
        for &theta in &[0.3f64, 1.0, std::f64::consts::FRAC_PI_2, 2.5] {
            let exact = 1.0 / (theta / 2.0).sin();
            let best = (1..4000)
                .map(|k| {
                    let r = k as f64 / 1000.0;
                    (r + 1.0) / (r * r + 1.0 - 2.0 * r * theta.cos()).sqrt()
                })
                .fold(0.0, f64::max);
            assert_relative_eq!(best, exact, max_relative = 1e-6);
            let link = vec![vec![vec![1.0, 0.0]], vec![vec![theta.cos(), theta.sin()]]];
            let model = ConeModel::new(link, vec![1.0, 1.0]).unwrap();
            assert!(exact <= model.certified_constant(0) || theta < 0.7);
        }
    }

    #[test]
    fn clustering_and_separation() {
        let dirs: Vec<Vec<f64>> = (0..40)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 20.0;
                let z = if k < 20 { 0.6 } else { -0.6 };
                vec![0.8 * t.cos(), 0.8 * t.sin(), z]
            })
            .collect();
        let m = ConeModel::from_directions(&dirs, 0.5, |_| 1.0).unwrap();
        assert_eq!(m.links.len(), 2);
        assert_relative_eq!(m.separation, 1.2, epsilon = 1e-12);
        for (c, p) in m.sample(50, 2.0, 3) {
            assert!(p.r > 0.0 && p.r <= 2.0);
            assert_eq!(p.s[2] > 0.0, c == 0);
        }
    }

    #[test]
    fn hausdorff_basics() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let b = vec![vec![0.0, 0.0]];
        assert_eq!(hausdorff(&a, &b), 1.0);
        assert_eq!(hausdorff(&a, &a), 0.0);
        assert!(hausdorff(&a, &[]).is_infinite());
    }

    #[test]
    fn line_directions() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pts: Vec<Vec<f64>> = [5.0, -5.0, 10.0, -10.0].iter().map(|t| vec![t * s, t * s]).collect();
        let cloud = PointCloud::from_points(pts);
        let a = asymptotic_directions(&cloud, &[5.0, 10.0]).unwrap();
        assert_eq!(a.counts, vec![2, 2]);
        assert!(a.spreads[0] < 1e-15);
        assert!(a.directions.iter().all(|d| (d[0] - d[1]).abs() < 1e-15 && (d[0].abs() - s).abs() < 1e-15));
        assert_eq!(asymptotic_directions(&cloud, &[7.0]), Err(GeoError::EmptyShell(7.0)));
    }

    #[test]
    fn parabola_and_hyperbola_directions() {
        // (t, t²) with t² + t⁴ = R²: direction (t, t²)/R
        let mut pts = Vec::new();
        let shells = [10.0, 20.0, 40.0];
        for &r in &shells {
            let t2: f64 = (-1.0 + (1.0f64 + 4.0 * r * r).sqrt()) / 2.0;
            let t = t2.sqrt();
            pts.push(vec![t, t2]);
            pts.push(vec![-t, t2]);
        }
        let a = asymptotic_directions(&PointCloud::from_points(pts), &shells).unwrap();
        assert!(a.spreads[1] < a.spreads[0]);
        for d in &a.directions {
            assert!(dist(d, &[0.0, 1.0]) < 0.2);
        }
        // hyperbola xy = 1
        let mut pts = Vec::new();
        let shells = [10.0f64, 100.0];
        for &r in &shells {
            let t2: f64 = (r * r + (r.powi(4) - 4.0).sqrt()) / 2.0;
            let t = t2.sqrt();
            for (a, b) in [(t, 1.0 / t), (1.0 / t, t), (-t, -1.0 / t), (-1.0 / t, -t)] {
                pts.push(vec![a, b]);
            }
        }
        let a = asymptotic_directions(&PointCloud::from_points(pts), &shells).unwrap();
        let axes = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for d in &a.directions {
            assert!(axes.iter().any(|e| dist(d, e) < 1e-3));
        }
    }
}
