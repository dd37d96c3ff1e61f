//! Variable exponents p(.), their bounds, conjugates and structural conditions.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{unit_ball_volume, Domain};
use crate::error::{Result, VexError};
use crate::mesh::Mesh;

/// Piecewise-linear exponent given by nodal values on a mesh.
#[derive(Debug)]
pub struct TabulatedExponent {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl TabulatedExponent {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(VexError::InvalidInput(format!(
                "tabulated exponent has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VexError::InvalidInput("tabulated exponent value is not finite".into()));
        }
        Ok(TabulatedExponent { mesh, values })
    }

    /// Sample `f` at the nodes of `mesh`.
    pub fn sample(mesh: Arc<Mesh>, f: impl Fn(&[f64; 2]) -> f64) -> Result<Self> {
        let values = mesh.nodes().iter().map(&f).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Text form: the mesh block followed by `values <count>` and `id value` lines.
    pub fn to_text(&self) -> String {
        let mut s = self.mesh.to_text();
        s.push_str(&format!("values {}\n", self.values.len()));
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i} {v:e}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let split = text
            .find("values")
            .ok_or_else(|| VexError::Parse("tabulated exponent file lacks a 'values' section".into()))?;
        let mesh = Arc::new(Mesh::from_text(&text[..split])?);
        let mut lines = text[split..].lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().unwrap_or_default();
        let count: usize = header
            .split_whitespace()
            .nth(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| VexError::Parse(format!("bad values header '{header}'")))?;
        let mut values = vec![f64::NAN; count];
        for line in lines.take(count) {
            let mut it = line.split_whitespace();
            let id: usize = it.next().and_then(|t| t.parse().ok()).filter(|&i| i < count).ok_or_else(|| VexError::Parse(format!("bad value line '{line}'")))?;
            values[id] = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| VexError::Parse(format!("bad value line '{line}'")))?;
        }
        Self::new(mesh, values)
    }

    fn value(&self, cell: usize, bary: &[f64; 3]) -> f64 {
        self.mesh.cell(cell).iter().enumerate().map(|(k, &n)| bary[k] * self.values[n]).sum()
    }

    fn gradient(&self, cell: usize) -> [f64; 2] {
        let g = &self.mesh.geometry(cell).grad_bary;
        let mut out = [0.0; 2];
        for (k, &n) in self.mesh.cell(cell).iter().enumerate() {
            out[0] += self.values[n] * g[k][0];
            out[1] += self.values[n] * g[k][1];
        }
        out
    }
}

/// A variable exponent `p(.)`.
///
/// `Radial` uses the profile `base + amp * exp(-|x - center|^2)`.
#[derive(Clone, Debug)]
pub enum ExponentField {
    Constant(f64),
    Affine { a: f64, b: Vec<f64> },
    Radial { base: f64, amp: f64, center: Vec<f64> },
    Tabulated(Arc<TabulatedExponent>),
    /// Pointwise Hoelder conjugate `p / (p - 1)`.
    Conjugate(Box<ExponentField>),
    /// Pointwise Sobolev conjugate `N p / (N - p)`.
    SobolevConjugate { base: Box<ExponentField>, dim: usize },
}

fn coord(x: &[f64], k: usize) -> f64 {
    x.get(k).copied().unwrap_or(0.0)
}

impl ExponentField {
    pub fn constant(value: f64) -> Self {
        ExponentField::Constant(value)
    }

    pub fn affine(a: f64, b: Vec<f64>) -> Self {
        ExponentField::Affine { a, b }
    }

    pub fn radial(base: f64, amp: f64, center: Vec<f64>) -> Self {
        ExponentField::Radial { base, amp, center }
    }

    pub fn tabulated(t: TabulatedExponent) -> Self {
        ExponentField::Tabulated(Arc::new(t))
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ExponentField::Constant(_) => true,
            ExponentField::Affine { b, .. } => b.iter().all(|&v| v == 0.0),
            ExponentField::Radial { amp, .. } => *amp == 0.0,
            ExponentField::Tabulated(_) => false,
            ExponentField::Conjugate(p) => p.is_constant(),
            ExponentField::SobolevConjugate { base, .. } => base.is_constant(),
        }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        match self {
            ExponentField::Constant(c) => *c,
            ExponentField::Affine { a, b } => a + b.iter().enumerate().map(|(k, bk)| bk * coord(x, k)).sum::<f64>(),
            ExponentField::Radial { base, amp, center } => {
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (coord(x, k) - c).powi(2)).sum();
                base + amp * (-r2).exp()
            }
            ExponentField::Tabulated(t) => {
                let (c, b) = t.mesh.locate(x);
                t.value(c, &b)
            }
            ExponentField::Conjugate(p) => {
                let v = p.value_at(x);
                v / (v - 1.0)
            }
            ExponentField::SobolevConjugate { base, dim } => sobolev_value(base.value_at(x), *dim),
        }
    }

    /// Gradient at `x`, with as many components as `x` has coordinates.
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            ExponentField::Constant(_) => vec![0.0; n],
            ExponentField::Affine { b, .. } => (0..n).map(|k| b.get(k).copied().unwrap_or(0.0)).collect(),
            ExponentField::Radial { amp, center, .. } => {
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (coord(x, k) - c).powi(2)).sum();
                let s = -2.0 * amp * (-r2).exp();
                (0..n).map(|k| s * (x[k] - center.get(k).copied().unwrap_or(0.0))).collect()
            }
            ExponentField::Tabulated(t) => {
                let (c, _) = t.mesh.locate(x);
                let g = t.gradient(c);
                (0..n).map(|k| if k < 2 { g[k] } else { 0.0 }).collect()
            }
            ExponentField::Conjugate(p) => {
                let v = p.value_at(x);
                let s = -1.0 / ((v - 1.0) * (v - 1.0));
                p.gradient_at(x).into_iter().map(|g| s * g).collect()
            }
            ExponentField::SobolevConjugate { base, dim } => {
                let v = base.value_at(x);
                let nn = *dim as f64;
                let s = nn * nn / ((nn - v) * (nn - v));
                base.gradient_at(x).into_iter().map(|g| s * g).collect()
            }
        }
    }

    /// Value and planar gradient at a point of `mesh` given by cell and barycentric coordinates.
    /// Tabulated exponents living on the same mesh are evaluated without point location.
    pub fn eval_on(&self, mesh: &Mesh, cell: usize, bary: &[f64; 3], x: &[f64; 2]) -> (f64, [f64; 2]) {
        let dim = mesh.dim();
        match self {
            ExponentField::Tabulated(t) if std::ptr::eq(Arc::as_ptr(&t.mesh), mesh) => (t.value(cell, bary), t.gradient(cell)),
            ExponentField::Conjugate(p) => {
                let (v, g) = p.eval_on(mesh, cell, bary, x);
                let s = -1.0 / ((v - 1.0) * (v - 1.0));
                (v / (v - 1.0), [s * g[0], s * g[1]])
            }
            ExponentField::SobolevConjugate { base, dim: n } => {
                let (v, g) = base.eval_on(mesh, cell, bary, x);
                let nn = *n as f64;
                let s = nn * nn / ((nn - v) * (nn - v));
                (sobolev_value(v, *n), [s * g[0], s * g[1]])
            }
            _ => {
                let g = self.gradient_at(&x[..dim]);
                (self.value_at(&x[..dim]), [g[0], if dim == 2 { g[1] } else { 0.0 }])
            }
        }
    }

    /// Pointwise conjugate exponent `p' = p / (p - 1)`.
    ///
    /// Fails with `NonElliptic` when a value `<= 1` is visible without a domain: constants,
    /// tabulated nodal values and the range of radial profiles. Affine exponents are checked
    /// by [`bounds`] once a domain is known.
    pub fn conjugate(&self) -> Result<ExponentField> {
        if let Some((lo, _)) = self.intrinsic_bounds() {
            if lo <= 1.0 {
                return Err(VexError::NonElliptic { value: lo });
            }
        }
        Ok(ExponentField::Conjugate(Box::new(self.clone())))
    }

    /// Pointwise Sobolev conjugate `p* = N p / (N - p)`; `ExponentTooLarge` when `p >= N`
    /// is visible without a domain.
    pub fn sobolev_conjugate(&self, dim: usize) -> Result<ExponentField> {
        if let Some((_, hi)) = self.intrinsic_bounds() {
            if hi >= dim as f64 {
                return Err(VexError::ExponentTooLarge { value: hi, dim });
            }
        }
        Ok(ExponentField::SobolevConjugate {
            base: Box::new(self.clone()),
            dim,
        })
    }

    /// Range over all of R^N when it is finite and known without a domain.
    fn intrinsic_bounds(&self) -> Option<(f64, f64)> {
        match self {
            ExponentField::Constant(c) => Some((*c, *c)),
            ExponentField::Affine { b, a } if b.iter().all(|&v| v == 0.0) => Some((*a, *a)),
            ExponentField::Affine { .. } => None,
            ExponentField::Radial { base, amp, .. } => Some((base.min(base + amp), base.max(base + amp))),
            ExponentField::Tabulated(t) => Some(minmax(t.values.iter().copied())),
            ExponentField::Conjugate(p) => {
                let (lo, hi) = p.intrinsic_bounds()?;
                (lo > 1.0).then(|| (hi / (hi - 1.0), lo / (lo - 1.0)))
            }
            ExponentField::SobolevConjugate { base, dim } => {
                let (lo, hi) = base.intrinsic_bounds()?;
                (hi < *dim as f64).then(|| (sobolev_value(lo, *dim), sobolev_value(hi, *dim)))
            }
        }
    }
}

fn sobolev_value(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if p >= n {
        f64::INFINITY
    } else {
        n * p / (n - p)
    }
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Sample points used for ess-inf/ess-sup proxies: a lattice with `resolution` subdivisions per
/// axis over the bounding box, restricted to the closed domain, plus the domain's vertices.
/// Doubling the resolution yields a superset of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub resolution: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { resolution: 64 }
    }
}

impl SamplingPlan {
    pub fn new(resolution: usize) -> Self {
        SamplingPlan { resolution }
    }

    pub fn points(&self, domain: &Domain) -> Vec<Vec<f64>> {
        let res = self.resolution.max(1);
        let (lo, hi) = domain.bbox();
        let dim = domain.dim();
        // balls in high dimension: the lattice grows like res^N, cap it
        let per_axis = if dim > 3 { res.min(8) } else { res };
        let mut pts = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let x: Vec<f64> = (0..dim).map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / per_axis as f64).collect();
            if domain.contains(&x) {
                pts.push(x);
            }
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] <= per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        match domain {
            Domain::Polygon { vertices } => pts.extend(vertices.iter().map(|v| v.to_vec())),
            Domain::Disk { center, radius } => {
                let m = 4 * res;
                pts.extend((0..m).map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                }));
            }
            Domain::BallAnalytic { center, radius } => {
                for k in 0..dim {
                    for s in [-1.0, 1.0] {
                        let mut x = center.clone();
                        x[k] += s * radius;
                        pts.push(x);
                    }
                }
            }
            Domain::Interval { .. } => {}
        }
        pts
    }
}

/// `(p_minus, p_plus)` over the domain. Closed form for constant, affine and radial exponents and
/// for conjugates of those; tabulated exponents use nodal values plus the sampling plan.
pub fn bounds(p: &ExponentField, domain: &Domain, sampling: &SamplingPlan) -> Result<(f64, f64)> {
    let (lo, hi) = raw_bounds(p, domain, sampling)?;
    if !(lo > 1.0) {
        return Err(VexError::NonElliptic { value: lo });
    }
    if !hi.is_finite() {
        return Err(VexError::InvalidInput("exponent is unbounded on the domain".into()));
    }
    Ok((lo, hi))
}

fn raw_bounds(p: &ExponentField, domain: &Domain, sampling: &SamplingPlan) -> Result<(f64, f64)> {
    Ok(match p {
        ExponentField::Constant(c) => (*c, *c),
        ExponentField::Affine { a, b } => match domain {
            Domain::Interval { a: l, b: r } => {
                let b0 = b.first().copied().unwrap_or(0.0);
                let (u, v) = (a + b0 * l, a + b0 * r);
                (u.min(v), u.max(v))
            }
            Domain::Polygon { vertices } => minmax(vertices.iter().map(|v| p.value_at(v))),
            Domain::Disk { center, radius } => {
                let c = p.value_at(center);
                let nb = (coord(b, 0).powi(2) + coord(b, 1).powi(2)).sqrt();
                (c - nb * radius, c + nb * radius)
            }
            Domain::BallAnalytic { center, radius } => {
                let c = p.value_at(center);
                let nb = (0..center.len()).map(|k| coord(b, k).powi(2)).sum::<f64>().sqrt();
                (c - nb * radius, c + nb * radius)
            }
        },
        ExponentField::Radial { base, amp, center } => {
            let mut c = center.clone();
            c.resize(domain.dim().max(center.len()), 0.0);
            let (near, far) = domain.distance_range(&c);
            let (u, v) = (base + amp * (-near * near).exp(), base + amp * (-far * far).exp());
            (u.min(v), u.max(v))
        }
        ExponentField::Tabulated(t) => {
            let nodal = minmax(t.values.iter().copied());
            let sampled = minmax(sampling.points(domain).iter().map(|x| p.value_at(x)));
            (nodal.0.min(sampled.0), nodal.1.max(sampled.1))
        }
        ExponentField::Conjugate(inner) => {
            let (lo, hi) = raw_bounds(inner, domain, sampling)?;
            if lo <= 1.0 {
                return Err(VexError::NonElliptic { value: lo });
            }
            (hi / (hi - 1.0), lo / (lo - 1.0))
        }
        ExponentField::SobolevConjugate { base, dim } => {
            let (lo, hi) = raw_bounds(base, domain, sampling)?;
            if hi >= *dim as f64 {
                return Err(VexError::ExponentTooLarge { value: hi, dim: *dim });
            }
            (sobolev_value(lo, *dim), sobolev_value(hi, *dim))
        }
    })
}

/// Min/max of the exponent over the sampling plan only (no closed forms).
pub fn sampled_bounds(p: &ExponentField, domain: &Domain, sampling: &SamplingPlan) -> (f64, f64) {
    minmax(sampling.points(domain).iter().map(|x| p.value_at(x)))
}

/// Empirical log-Hoelder constant from random pairs with `|x - y| <= 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHolderEstimate {
    /// max |p(x) - p(y)| * (-log |x - y|)
    pub c_hat: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    /// max over sampled balls of |B|^(p_B^- - p_B^+)
    pub ball_form_max: f64,
    pub pairs: usize,
}

pub fn log_holder_estimate(p: &ExponentField, domain: &Domain, pairs: usize, seed: u64) -> LogHolderEstimate {
    let dim = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bbox();
    let sample_point = |rng: &mut ChaCha8Rng| loop {
        let x: Vec<f64> = (0..dim).map(|k| rng.gen_range(lo[k]..=hi[k])).collect();
        if domain.contains(&x) {
            return x;
        }
    };
    let random_direction = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-3 && n <= 1.0 {
                return d.into_iter().map(|v| v / n).collect();
            }
        }
    };
    let max_len = 0.5f64.min(domain.diameter());
    let mut c_hat = 0.0f64;
    let mut worst = (vec![0.0; dim], vec![0.0; dim]);
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted < pairs && attempts < pairs * 100 {
        attempts += 1;
        let x = sample_point(&mut rng);
        let d = random_direction(&mut rng);
        // half of the pairs uniform in length, half log-uniform to probe small scales
        let t = if attempts.is_multiple_of(2) {
            rng.gen_range(0.0..=max_len)
        } else {
            max_len * (1e-8f64).powf(rng.gen_range(0.0..=1.0))
        };
        if t <= 0.0 || t >= 1.0 {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
        if !domain.contains(&y) {
            continue;
        }
        accepted += 1;
        let c = (p.value_at(&x) - p.value_at(&y)).abs() * (-t.ln());
        if c > c_hat {
            c_hat = c;
            worst = (x, y);
        }
    }

    let balls = pairs.clamp(1, 200);
    let mut ball_form_max = 0.0f64;
    for _ in 0..balls {
        let center = sample_point(&mut rng);
        let r = rng.gen_range(1e-4..=0.25f64.min(max_len / 2.0).max(2e-4));
        let mut vals = vec![p.value_at(&center)];
        for _ in 0..16 {
            let d = random_direction(&mut rng);
            let s = r * rng.gen_range(0.0..=1.0f64);
            let y: Vec<f64> = center.iter().zip(&d).map(|(c, di)| c + s * di).collect();
            if domain.contains(&y) {
                vals.push(p.value_at(&y));
            }
        }
        let (pmin, pmax) = minmax(vals.into_iter());
        let vol = unit_ball_volume(dim) * r.powi(dim as i32);
        ball_form_max = ball_form_max.max(vol.powf(pmin - pmax));
    }
    LogHolderEstimate {
        c_hat,
        worst_pair: worst,
        ball_form_max,
        pairs: accepted,
    }
}

/// Sampled proxy for `ess inf (p* - q)`; positive values certify the compact-embedding condition
/// at sampling resolution.
pub fn embedding_gap(p: &ExponentField, q: &ExponentField, domain: &Domain, dim: usize, sampling: &SamplingPlan) -> Result<f64> {
    let (_, p_plus) = bounds(p, domain, sampling)?;
    if p_plus >= dim as f64 {
        return Err(VexError::ExponentTooLarge { value: p_plus, dim });
    }
    let (q_minus, _) = raw_bounds(q, domain, sampling)?;
    if q_minus < 1.0 {
        return Err(VexError::InvalidInput(format!("q^- = {q_minus} is below 1")));
    }
    let ps = p.sobolev_conjugate(dim)?;
    let mut gap = f64::INFINITY;
    for x in sampling.points(domain) {
        let v = ps.value_at(&x);
        if !v.is_finite() {
            return Err(VexError::ExponentTooLarge { value: p.value_at(&x), dim });
        }
        gap = gap.min(v - q.value_at(&x));
    }
    Ok(gap)
}

/// Exponent configuration as it appears in experiment files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    Affine { a: f64, b: Vec<f64> },
    Radial { base: f64, amp: f64, center: Vec<f64> },
    Tabulated { file: String },
}

impl ExponentSpec {
    /// Build the field; relative tabulated paths are resolved against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<ExponentField> {
        Ok(match self {
            ExponentSpec::Constant { value } => ExponentField::constant(*value),
            ExponentSpec::Affine { a, b } => ExponentField::affine(*a, b.clone()),
            ExponentSpec::Radial { base, amp, center } => ExponentField::radial(*base, *amp, center.clone()),
            ExponentSpec::Tabulated { file } => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| VexError::Io(format!("{}: {e}", path.display())))?;
                ExponentField::tabulated(TabulatedExponent::from_text(&text)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn unit() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn bounds_closed_forms() {
        let plan = SamplingPlan::default();
        assert_eq!(bounds(&ExponentField::constant(2.0), &unit(), &plan).unwrap(), (2.0, 2.0));
        let half = Domain::interval(0.0, 0.5).unwrap();
        assert_eq!(bounds(&ExponentField::affine(2.0, vec![1.0]), &half, &plan).unwrap(), (2.0, 2.5));
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let (lo, hi) = bounds(&ExponentField::affine(2.0, vec![0.3, 0.4]), &disk, &plan).unwrap();
        assert!((lo - 1.5).abs() < 1e-15 && (hi - 2.5).abs() < 1e-15);
        let (lo, hi) = bounds(&ExponentField::radial(2.0, 0.5, vec![0.0, 0.0]), &disk, &plan).unwrap();
        assert!((hi - 2.5).abs() < 1e-15 && (lo - (2.0 + 0.5 * (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn bounds_reject_nonelliptic() {
        let r = bounds(&ExponentField::affine(1.5, vec![-1.0]), &unit(), &SamplingPlan::default());
        assert!(matches!(r, Err(VexError::NonElliptic { .. })));
        assert!(ExponentField::constant(1.0).conjugate().is_err());
    }

    #[test]
    fn tabulated_bounds_against_dense_oracle() {
        let mesh = Arc::new(build_mesh(&unit(), 1e-4).unwrap());
        let f = |x: &[f64; 2]| 2.0 + (std::f64::consts::PI * x[0]).sin().powi(2);
        let p = ExponentField::tabulated(TabulatedExponent::sample(mesh, f).unwrap());
        let (lo, hi) = bounds(&p, &unit(), &SamplingPlan::new(100)).unwrap();
        // oracle: 10^6 dense samples of the generating function
        let (olo, ohi) = minmax((0..=1_000_000).map(|i| f(&[i as f64 / 1e6, 0.0])));
        assert!((lo - olo).abs() < 1e-3 && (hi - ohi).abs() < 1e-3);
        assert!((lo - 2.0).abs() < 1e-3 && (hi - 3.0).abs() < 1e-3);
    }

    #[test]
    fn sampled_bounds_monotone_under_refinement() {
        let p = ExponentField::radial(2.0, 0.7, vec![0.33, 0.71]);
        let d = Domain::square(0.0, 1.0).unwrap();
        let mut prev = (f64::INFINITY, f64::NEG_INFINITY);
        for res in [2, 4, 8, 16, 32] {
            let b = sampled_bounds(&p, &d, &SamplingPlan::new(res));
            assert!(b.0 <= prev.0 && b.1 >= prev.1);
            prev = b;
        }
    }

    #[test]
    fn conjugate_examples() {
        let c2 = ExponentField::constant(2.0).conjugate().unwrap();
        assert_eq!(c2.value_at(&[0.3]), 2.0);
        let c3 = ExponentField::constant(3.0).conjugate().unwrap();
        assert!((c3.value_at(&[0.3]) - 1.5).abs() < 1e-15);
        let p = ExponentField::affine(2.0, vec![1.0]);
        let pc = p.conjugate().unwrap();
        assert!((pc.value_at(&[1.0]) - 1.5).abs() < 1e-15);
        // symbolic oracle: d/dx (2+x)/(1+x) = -1/(1+x)^2 = -1/4 at x = 1
        assert!((pc.gradient_at(&[1.0])[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn sobolev_conjugate_examples() {
        let s = ExponentField::constant(2.0).sobolev_conjugate(3).unwrap();
        assert!((s.value_at(&[0.0]) - 6.0).abs() < 1e-14);
        let s = ExponentField::constant(2.0).sobolev_conjugate(4).unwrap();
        assert!((s.value_at(&[0.0]) - 4.0).abs() < 1e-14);
        let s = ExponentField::affine(2.0, vec![0.25]).sobolev_conjugate(3).unwrap();
        assert!((s.value_at(&[1.0]) - 9.0).abs() < 1e-13);
        assert!(matches!(
            ExponentField::constant(3.0).sobolev_conjugate(3),
            Err(VexError::ExponentTooLarge { .. })
        ));
        let wide = ExponentField::affine(2.0, vec![2.0]).sobolev_conjugate(3).unwrap();
        assert!(matches!(bounds(&wide, &unit(), &SamplingPlan::default()), Err(VexError::ExponentTooLarge { .. })));
    }

    #[test]
    fn log_holder_constant_is_zero() {
        let e = log_holder_estimate(&ExponentField::constant(2.5), &Domain::square(0.0, 1.0).unwrap(), 500, 1);
        assert_eq!(e.c_hat, 0.0);
        assert_eq!(e.ball_form_max, 1.0);
    }

    #[test]
    fn log_holder_affine_bounded_by_t_log_t_max() {
        // oracle: maximize t (-log t) on (0, 1/2] by dense scan
        let oracle = (1..=500_000).map(|i| i as f64 * 1e-6).map(|t| -t * t.ln()).fold(0.0, f64::max);
        assert!((oracle - (-1.0f64).exp()).abs() < 1e-9);
        let e = log_holder_estimate(&ExponentField::affine(2.0, vec![1.0]), &unit(), 20_000, 7);
        assert!(e.c_hat <= oracle + 1e-12);
        assert!(e.c_hat > 0.9 * oracle);
    }

    #[test]
    fn log_holder_borderline_family_stays_finite() {
        let d = Domain::interval(0.0, 0.5).unwrap();
        let mesh = Arc::new(build_mesh(&d, 1e-5).unwrap());
        let f = |x: &[f64; 2]| if x[0] <= 0.0 { 2.0 } else { 2.0 + 1.0 / (-x[0].ln()) };
        let p = ExponentField::tabulated(TabulatedExponent::sample(mesh, f).unwrap());
        let small = log_holder_estimate(&p, &d, 2_000, 3).c_hat;
        let large = log_holder_estimate(&p, &d, 40_000, 3).c_hat;
        // dense-pair oracle: |p(x) - p(0)| (-log x) = 1 for x <= 1/2
        assert!(large.is_finite() && large < 2.0, "C_hat = {large}");
        assert!(small <= large);
    }

    #[test]
    fn embedding_gap_examples() {
        let plan = SamplingPlan::new(200);
        let p = ExponentField::constant(2.0);
        let g = embedding_gap(&p, &ExponentField::constant(4.0), &unit(), 3, &plan).unwrap();
        assert!((g - 2.0).abs() < 1e-13);
        let g = embedding_gap(&p, &ExponentField::constant(6.0), &unit(), 3, &plan).unwrap();
        assert!(g.abs() < 1e-13);
        let g = embedding_gap(&p, &ExponentField::affine(5.0, vec![1.0]), &unit(), 3, &plan).unwrap();
        assert!(g.abs() < 1e-13);
        assert!(matches!(
            embedding_gap(&ExponentField::constant(3.0), &p, &unit(), 3, &plan),
            Err(VexError::ExponentTooLarge { .. })
        ));
    }

    #[test]
    fn tabulated_text_roundtrip() {
        let mesh = Arc::new(build_mesh(&Domain::square(0.0, 1.0).unwrap(), 0.25).unwrap());
        let t = TabulatedExponent::sample(mesh, |x| 2.0 + x[0] * x[1]).unwrap();
        let back = TabulatedExponent::from_text(&t.to_text()).unwrap();
        assert_eq!(back.values().len(), t.values().len());
        let (p, q) = (ExponentField::tabulated(t), ExponentField::tabulated(back));
        assert!((p.value_at(&[0.3, 0.6]) - q.value_at(&[0.3, 0.6])).abs() < 1e-12);
    }

    #[test]
    fn spec_parsing() {
        let s: ExponentSpec = serde_json::from_str(r#"{"kind":"affine","a":2.0,"b":[0.5,0.0]}"#).unwrap();
        let p = s.build(Path::new(".")).unwrap();
        assert!((p.value_at(&[1.0, 3.0]) - 2.5).abs() < 1e-15);
        let s: ExponentSpec = serde_json::from_str(r#"{"kind":"radial","base":2.0,"amp":0.5,"center":[0,0]}"#).unwrap();
        assert!((s.build(Path::new(".")).unwrap().value_at(&[0.0, 0.0]) - 2.5).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conjugate_identities(a in 1.2f64..4.0, b in -0.15f64..0.15, c in -0.15f64..0.15, x in 0.0f64..1.0, y in 0.0f64..1.0) {
                let p = ExponentField::affine(a, vec![b, c]);
                let pc = p.conjugate().unwrap();
                let pt = [x, y];
                let (v, vc) = (p.value_at(&pt), pc.value_at(&pt));
                prop_assert!((1.0 / v + 1.0 / vc - 1.0).abs() < 1e-12);
                let back = pc.conjugate().unwrap().value_at(&pt);
                prop_assert!((back - v).abs() < 1e-12);
            }

            #[test]
            fn sobolev_conjugate_exceeds_p(a in 1.1f64..2.8, x in 0.0f64..1.0) {
                let p = ExponentField::affine(a, vec![0.1]);
                let ps = p.sobolev_conjugate(3).unwrap();
                prop_assert!(ps.value_at(&[x]) > p.value_at(&[x]));
            }
        }
    }
}
