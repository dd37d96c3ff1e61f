//! Bounded domains, their boundary normals and star-shapedness analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VexError};

/// Sign decisions on `(x - origin) . nu` use this absolute tolerance.
pub const TOL_GEOM: f64 = 1e-10;

/// A bounded domain in R^N.
///
/// Polygons are listed counterclockwise. `BallAnalytic` carries its dimension
/// through the length of `center` and is never meshed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
    Disk { center: [f64; 2], radius: f64 },
    BallAnalytic { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let d = Domain::Polygon { vertices };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        let d = Domain::Disk { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::BallAnalytic { center, radius };
        d.validate()?;
        Ok(d)
    }

    /// Axis-aligned square `[lo, hi]^2` as a counterclockwise polygon.
    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::polygon(vec![[lo, lo], [hi, lo], [hi, hi], [lo, hi]])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(VexError::InvalidInput(format!("interval requires a < b, got ({a}, {b})")));
                }
            }
            Domain::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(VexError::InvalidInput("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(VexError::InvalidInput("polygon vertex is not finite".into()));
                }
                if signed_area(vertices) <= 0.0 {
                    return Err(VexError::InvalidInput("polygon vertices must be counterclockwise".into()));
                }
                if !is_simple(vertices) {
                    return Err(VexError::InvalidInput("polygon is self-intersecting".into()));
                }
            }
            Domain::Disk { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(VexError::InvalidInput(format!("disk radius must be positive, got {radius}")));
                }
            }
            Domain::BallAnalytic { center, radius } => {
                if center.is_empty() {
                    return Err(VexError::InvalidInput("ball center must have at least one coordinate".into()));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(VexError::InvalidInput(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Polygon { .. } | Domain::Disk { .. } => 2,
            Domain::BallAnalytic { center, .. } => center.len(),
        }
    }

    pub fn is_meshable(&self) -> bool {
        !matches!(self, Domain::BallAnalytic { .. })
    }

    /// Lebesgue measure |Omega|.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Polygon { vertices } => signed_area(vertices),
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Domain::BallAnalytic { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    /// Bounding box `(lo, hi)` in `dim()` coordinates.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => (vec![*a], vec![*b]),
            Domain::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
            Domain::Disk { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
            Domain::BallAnalytic { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for v in vertices {
                    for w in vertices {
                        d = d.max(dist2(v, w));
                    }
                }
                d
            }
            Domain::Disk { radius, .. } | Domain::BallAnalytic { radius, .. } => 2.0 * radius,
        }
    }

    /// Closed-domain membership test (boundary included, with `TOL_GEOM` slack).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => x[0] >= a - TOL_GEOM && x[0] <= b + TOL_GEOM,
            Domain::Polygon { vertices } => {
                let p = [x[0], x[1]];
                if point_in_polygon(vertices, &p) {
                    return true;
                }
                let n = vertices.len();
                (0..n).any(|i| point_segment_distance(&p, &vertices[i], &vertices[(i + 1) % n]) <= TOL_GEOM)
            }
            Domain::Disk { center, radius } => {
                let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                d <= radius + TOL_GEOM
            }
            Domain::BallAnalytic { center, radius } => {
                let d: f64 = center.iter().zip(x).map(|(c, y)| (y - c).powi(2)).sum::<f64>().sqrt();
                d <= radius + TOL_GEOM
            }
        }
    }

    /// Largest and smallest distance from `point` to the closed domain.
    /// The smallest is 0 when the point lies inside.
    pub fn distance_range(&self, point: &[f64]) -> (f64, f64) {
        match self {
            Domain::Interval { a, b } => {
                let x = point[0];
                let near = if x < *a {
                    a - x
                } else if x > *b {
                    x - b
                } else {
                    0.0
                };
                (near, (x - a).abs().max((x - b).abs()))
            }
            Domain::Polygon { vertices } => {
                let p = [point[0], point[1]];
                let far = vertices.iter().map(|v| dist2(v, &p)).fold(0.0, f64::max);
                let near = if point_in_polygon(vertices, &p) {
                    0.0
                } else {
                    let n = vertices.len();
                    (0..n)
                        .map(|i| point_segment_distance(&p, &vertices[i], &vertices[(i + 1) % n]))
                        .fold(f64::INFINITY, f64::min)
                };
                (near, far)
            }
            Domain::Disk { center, radius } => {
                let d = ((point[0] - center[0]).powi(2) + (point[1] - center[1]).powi(2)).sqrt();
                ((d - radius).max(0.0), d + radius)
            }
            Domain::BallAnalytic { center, radius } => {
                let d: f64 = center.iter().zip(point).map(|(c, y)| (y - c).powi(2)).sum::<f64>().sqrt();
                ((d - radius).max(0.0), d + radius)
            }
        }
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = pi^{n/2} / Gamma(n/2 + 1), by the two-step recursion omega_n = 2 pi / n * omega_{n-2}
    let mut w = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

pub(crate) fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn point_segment_distance(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * d[0], a[1] + t * d[1]];
    dist2(p, &c)
}

fn point_in_polygon(vertices: &[[f64; 2]], p: &[f64; 2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (vertices[i], vertices[j]);
        if (vi[1] > p[1]) != (vj[1] > p[1]) {
            let x = vj[0] + (p[1] - vj[1]) * (vi[0] - vj[0]) / (vi[1] - vj[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p1: &[f64; 2], p2: &[f64; 2], q1: &[f64; 2], q2: &[f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn is_simple(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return false;
            }
        }
    }
    true
}

/// Outcome of the star-shapedness test `(x - origin) . nu(x) >= 0` on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarShapeReport {
    pub origin: Vec<f64>,
    pub min_xdotnu: f64,
    pub is_star: bool,
    /// `max(min_xdotnu, 0)`; positive means strictly star-shaped with this rho.
    pub strict_rho: f64,
    /// Boundary point where the minimum is attained.
    pub worst_point: Vec<f64>,
    /// Number of boundary samples used on curved boundaries (0 when the test is exact per facet).
    pub boundary_samples: usize,
}

impl StarShapeReport {
    fn from_min(origin: &[f64], min_xdotnu: f64, worst_point: Vec<f64>, boundary_samples: usize) -> Self {
        StarShapeReport {
            origin: origin.to_vec(),
            min_xdotnu,
            is_star: min_xdotnu >= -TOL_GEOM,
            strict_rho: min_xdotnu.max(0.0),
            worst_point,
            boundary_samples,
        }
    }
}

/// Minimum over the boundary of `(x - origin) . nu(x)`.
///
/// Straight facets are evaluated exactly (the quantity is constant along a facet).
/// Disks are sampled at `boundary_samples` angles, and the analytic minimizer
/// `nu = -(center - origin)/|center - origin|` is always included, so the reported
/// minimum is exact. Balls in R^N use the closed form `radius - |center - origin|`.
pub fn star_shape_report(domain: &Domain, origin: &[f64], boundary_samples: usize) -> StarShapeReport {
    match domain {
        Domain::Interval { a, b } => {
            let o = origin[0];
            let (left, right) = (o - a, b - o);
            if left <= right {
                StarShapeReport::from_min(origin, left, vec![*a], 0)
            } else {
                StarShapeReport::from_min(origin, right, vec![*b], 0)
            }
        }
        Domain::Polygon { vertices } => {
            let n = vertices.len();
            let mut best = f64::INFINITY;
            let mut worst = vec![vertices[0][0], vertices[0][1]];
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let len = dist2(&a, &b);
                let nu = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                let value = (a[0] - origin[0]) * nu[0] + (a[1] - origin[1]) * nu[1];
                if value < best {
                    best = value;
                    worst = vec![0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                }
            }
            StarShapeReport::from_min(origin, best, worst, 0)
        }
        Domain::Disk { center, radius } => {
            let rel = [center[0] - origin[0], center[1] - origin[1]];
            let eval = |nu: [f64; 2]| radius + rel[0] * nu[0] + rel[1] * nu[1];
            let mut best = f64::INFINITY;
            let mut best_nu = [1.0, 0.0];
            let norm = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
            let mut candidates: Vec<[f64; 2]> = (0..boundary_samples)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / boundary_samples as f64;
                    [t.cos(), t.sin()]
                })
                .collect();
            if norm > 0.0 {
                candidates.push([-rel[0] / norm, -rel[1] / norm]);
            } else {
                candidates.push([1.0, 0.0]);
            }
            for nu in candidates {
                let v = eval(nu);
                if v < best {
                    best = v;
                    best_nu = nu;
                }
            }
            let worst = vec![center[0] + radius * best_nu[0], center[1] + radius * best_nu[1]];
            StarShapeReport::from_min(origin, best, worst, boundary_samples)
        }
        Domain::BallAnalytic { center, radius } => {
            let rel: Vec<f64> = center.iter().zip(origin).map(|(c, o)| c - o).collect();
            let norm = rel.iter().map(|r| r * r).sum::<f64>().sqrt();
            let worst = if norm > 0.0 {
                center.iter().zip(&rel).map(|(c, r)| c - radius * r / norm).collect()
            } else {
                let mut w = center.clone();
                w[0] += radius;
                w
            };
            StarShapeReport::from_min(origin, radius - norm, worst, 0)
        }
    }
}

/// Search for an origin maximizing `min (x - origin) . nu` on a `grid x grid` lattice over the
/// bounding box, then refine locally by a shrinking compass search.
pub fn find_star_center(domain: &Domain, grid: usize) -> Result<(Vec<f64>, StarShapeReport)> {
    const SAMPLES: usize = 256;
    let grid = grid.max(2);
    let dim = domain.dim();
    let objective = |o: &[f64]| star_shape_report(domain, o, SAMPLES).min_xdotnu;

    let origin = match domain {
        Domain::BallAnalytic { center, .. } => center.clone(),
        Domain::Disk { center, .. } => center.to_vec(),
        _ => {
            let (lo, hi) = domain.bbox();
            let mut best = f64::NEG_INFINITY;
            let mut best_o = lo.clone();
            let mut idx = vec![0usize; dim];
            loop {
                let o: Vec<f64> = (0..dim)
                    .map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (grid - 1) as f64)
                    .collect();
                let v = objective(&o);
                if v > best {
                    best = v;
                    best_o = o;
                }
                let mut k = 0;
                while k < dim {
                    idx[k] += 1;
                    if idx[k] < grid {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == dim {
                    break;
                }
            }
            let scale = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
            let mut step = scale / (grid - 1) as f64;
            let directions: Vec<Vec<f64>> = if dim == 1 {
                vec![vec![1.0], vec![-1.0]]
            } else {
                (0..16)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                        vec![t.cos(), t.sin()]
                    })
                    .collect()
            };
            while step > 1e-12 * scale.max(1.0) {
                let mut improved = false;
                for d in &directions {
                    let trial: Vec<f64> = best_o.iter().zip(d).map(|(o, di)| o + step * di).collect();
                    let v = objective(&trial);
                    if v > best + 1e-15 {
                        best = v;
                        best_o = trial;
                        improved = true;
                        break;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best_o
        }
    };
    let report = star_shape_report(domain, &origin, SAMPLES);
    if !report.is_star {
        return Err(VexError::NotStarShaped { best: report.min_xdotnu });
    }
    Ok((origin, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_at_center() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let r = star_shape_report(&d, &[0.0, 0.0], 64);
        assert!((r.min_xdotnu - 1.0).abs() < 1e-14);
        assert!((r.strict_rho - 1.0).abs() < 1e-14);
        assert!(r.is_star);
    }

    #[test]
    fn shifted_disk_matches_closed_form() {
        for c in [0.0, 0.3, -0.7, 1.5] {
            let d = Domain::disk([c, 0.0], 1.0).unwrap();
            let r = star_shape_report(&d, &[0.0, 0.0], 7);
            assert!((r.min_xdotnu - (1.0 - f64::abs(c))).abs() < 1e-14, "c = {c}");
            assert_eq!(r.is_star, c.abs() <= 1.0);
        }
    }

    #[test]
    fn square_facets_at_distance_one() {
        let d = Domain::square(-1.0, 1.0).unwrap();
        let r = star_shape_report(&d, &[0.0, 0.0], 0);
        assert!((r.min_xdotnu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polygon_report_ignores_sample_count() {
        let d = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        let a = star_shape_report(&d, &[0.4, 0.3], 3);
        let b = star_shape_report(&d, &[0.4, 0.3], 3000);
        assert_eq!(a.min_xdotnu, b.min_xdotnu);
    }

    #[test]
    fn translation_invariance() {
        let verts = vec![[0.0, 0.0], [3.0, 0.5], [2.0, 2.0], [-0.5, 1.5]];
        let shift = [10.25, -3.5];
        let moved: Vec<[f64; 2]> = verts.iter().map(|v| [v[0] + shift[0], v[1] + shift[1]]).collect();
        let a = star_shape_report(&Domain::polygon(verts).unwrap(), &[1.0, 0.8], 0);
        let b = star_shape_report(&Domain::polygon(moved).unwrap(), &[1.0 + shift[0], 0.8 + shift[1]], 0);
        assert!((a.min_xdotnu - b.min_xdotnu).abs() < 1e-12);
    }

    #[test]
    fn l_shape_center_lies_in_corner_square() {
        let d = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        let (o, r) = find_star_center(&d, 9).unwrap();
        // per-facet signed distances: min(o_y, 1 - o_y, o_x, 1 - o_x) on the kernel [0,1]^2
        let oracle = o[1].min(1.0 - o[1]).min(o[0]).min(1.0 - o[0]).min(2.0 - o[0]).min(2.0 - o[1]);
        assert!(o[0] > 0.0 && o[0] < 1.0 && o[1] > 0.0 && o[1] < 1.0);
        assert!(r.min_xdotnu > 0.0);
        assert!((r.min_xdotnu - oracle).abs() < 1e-12);
        assert!((r.min_xdotnu - 0.5).abs() < 1e-6);
    }

    #[test]
    fn slotted_polygon_is_not_star_shaped() {
        let d = Domain::polygon(vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.0, 3.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 3.0],
            [0.0, 3.0],
        ])
        .unwrap();
        // brute-force oracle: no grid origin has all facet distances >= 0
        let mut best = f64::NEG_INFINITY;
        for i in 0..=60 {
            for j in 0..=60 {
                let o = [3.0 * i as f64 / 60.0, 3.0 * j as f64 / 60.0];
                best = best.max(star_shape_report(&d, &o, 0).min_xdotnu);
            }
        }
        assert!(best < 0.0);
        assert!(matches!(find_star_center(&d, 21), Err(VexError::NotStarShaped { .. })));
    }

    #[test]
    fn unit_disk_center_search() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let (o, r) = find_star_center(&d, 5).unwrap();
        assert!(o[0].abs() < 1e-12 && o[1].abs() < 1e-12);
        assert!((r.min_xdotnu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::disk([0.0, 0.0], -1.0).is_err());
        assert!(Domain::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err()); // clockwise
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn ball_volume_matches_known_values() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
