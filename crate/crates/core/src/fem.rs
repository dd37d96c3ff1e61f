//! Discrete calculus on P1 fields: gradients, volume quadrature, truncation and mollification.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::field::{DiscreteField, GradientField};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;

/// Meshes with fewer cells than this are reduced serially.
const PAR_CELLS: usize = 2048;

/// Quadrature points of every cell of a mesh, laid out cell by cell.
#[derive(Clone, Debug)]
pub struct QuadPoints {
    pub per_cell: usize,
    pub x: Vec<[f64; 2]>,
    /// Physical weights (reference weight times cell volume).
    pub w: Vec<f64>,
    pub bary: Vec<[f64; 3]>,
}

impl QuadPoints {
    pub fn new(mesh: &Mesh, rule: &QuadratureRule) -> Self {
        let nq = rule.len();
        let mut x = Vec::with_capacity(mesh.num_cells() * nq);
        let mut w = Vec::with_capacity(mesh.num_cells() * nq);
        let mut bary = Vec::with_capacity(mesh.num_cells() * nq);
        for c in 0..mesh.num_cells() {
            let vol = mesh.geometry(c).volume;
            for (b, rw) in rule.points.iter().zip(&rule.weights) {
                x.push(mesh.point(c, b));
                w.push(rw * vol);
                bary.push(*b);
            }
        }
        QuadPoints { per_cell: nq, x, w, bary }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn cell_of(&self, i: usize) -> usize {
        i / self.per_cell
    }

    /// Values of a P1 field at every quadrature point.
    pub fn field_values(&self, u: &DiscreteField) -> Vec<f64> {
        (0..self.len()).map(|i| u.value_in_cell(self.cell_of(i), &self.bary[i])).collect()
    }

    /// Exponent values and gradients at every quadrature point.
    pub fn exponent_values(&self, mesh: &Mesh, p: &ExponentField) -> ExponentSamples {
        let (value, grad) = (0..self.len())
            .map(|i| p.eval_on(mesh, self.cell_of(i), &self.bary[i], &self.x[i]))
            .unzip();
        ExponentSamples { value, grad }
    }

    /// `sum_i w_i f(i)` with a per-cell reduction in fixed order. Non-finite terms are reported
    /// with their location.
    pub fn sum(&self, f: impl Fn(usize) -> f64 + Sync) -> Result<f64> {
        let ncells = self.len() / self.per_cell.max(1);
        let per_cell = |c: usize| -> std::result::Result<f64, usize> {
            let mut s = 0.0;
            for i in c * self.per_cell..(c + 1) * self.per_cell {
                let v = f(i);
                if !v.is_finite() {
                    return Err(i);
                }
                s += self.w[i] * v;
            }
            Ok(s)
        };
        let partial: Vec<std::result::Result<f64, usize>> = if ncells >= PAR_CELLS {
            (0..ncells).into_par_iter().map(per_cell).collect()
        } else {
            (0..ncells).map(per_cell).collect()
        };
        let mut total = 0.0;
        for p in partial {
            match p {
                Ok(v) => total += v,
                Err(i) => {
                    return Err(VexError::NonFiniteIntegrand { x: self.x[i].to_vec() });
                }
            }
        }
        Ok(total)
    }
}

/// Exponent data sampled at quadrature points.
#[derive(Clone, Debug)]
pub struct ExponentSamples {
    pub value: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
}

/// Exact gradient of the piecewise-linear interpolant, one vector per cell.
pub fn gradient(u: &DiscreteField) -> GradientField {
    GradientField {
        cells: (0..u.mesh().num_cells()).map(|c| u.cell_gradient(c)).collect(),
    }
}

/// Gauss quadrature of `integrand(x, u(x), grad u(x))` over the mesh of `u`.
pub fn integrate(u: &DiscreteField, rule: &QuadratureRule, integrand: impl Fn(&[f64; 2], f64, &[f64; 2]) -> f64 + Sync) -> Result<f64> {
    let qp = QuadPoints::new(u.mesh(), rule);
    let grads = gradient(u);
    qp.sum(|i| {
        let c = qp.cell_of(i);
        integrand(&qp.x[i], u.value_in_cell(c, &qp.bary[i]), &grads.cells[c])
    })
}

/// Quadrature of a function of position only.
pub fn integrate_fn(mesh: &Mesh, rule: &QuadratureRule, f: impl Fn(&[f64; 2]) -> f64 + Sync) -> Result<f64> {
    let qp = QuadPoints::new(mesh, rule);
    qp.sum(|i| f(&qp.x[i]))
}

/// Scalar cutoff: identity on `[-n, n]`, then `sign(s) (n + 1 - exp(-(|s| - n)))`.
/// C^1 and odd, slope in `(0, 1]`, bounded by `n + 1`.
pub fn cutoff_scalar(s: f64, n: u32) -> f64 {
    let n = n as f64;
    let a = s.abs();
    if a <= n {
        s
    } else {
        s.signum() * (n + 1.0 - (-(a - n)).exp())
    }
}

/// Derivative of [`cutoff_scalar`].
pub fn cutoff_slope(s: f64, n: u32) -> f64 {
    let n = n as f64;
    let a = s.abs();
    if a <= n {
        1.0
    } else {
        (-(a - n)).exp()
    }
}

/// Nodal application of the truncation `g_n`.
pub fn cutoff(u: &DiscreteField, n: u32) -> Result<DiscreteField> {
    if n == 0 {
        return Err(VexError::InvalidInput("cutoff level must be >= 1".into()));
    }
    Ok(u.map(|s| cutoff_scalar(s, n)))
}

/// Discrete convolution with the bump `(1 - r^2/radius^2)^3`, normalized against the lumped mass,
/// followed by zeroing every node closer than `radius + h` to the boundary.
pub fn mollify(f: &DiscreteField, radius: f64) -> Result<DiscreteField> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(VexError::InvalidInput(format!("mollifier radius must be positive, got {radius}")));
    }
    let mesh: &Arc<Mesh> = f.mesh();
    let nodes = mesh.nodes();
    let mass = mesh.lumped_mass();
    let key = |x: &[f64; 2]| ((x[0] / radius).floor() as i64, (x[1] / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, x) in nodes.iter().enumerate() {
        grid.entry(key(x)).or_default().push(i);
    }
    let layer = radius + mesh.h();
    let r2 = radius * radius;
    let values = f.values();
    let out: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let xi = &nodes[i];
            if mesh.distance_to_boundary(xi) < layer {
                return 0.0;
            }
            let (kx, ky) = key(xi);
            let (mut num, mut den) = (0.0, 0.0);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                        for &j in bucket {
                            let d2 = (nodes[j][0] - xi[0]).powi(2) + (nodes[j][1] - xi[1]).powi(2);
                            if d2 < r2 {
                                let k = (1.0 - d2 / r2).powi(3) * mass[j];
                                num += k * values[j];
                                den += k;
                            }
                        }
                    }
                }
            }
            num / den
        })
        .collect();
    Ok(DiscreteField::from_parts_unchecked(mesh.clone(), out))
}

/// Numbering of the interior (non-Dirichlet) nodes of a mesh.
#[derive(Clone, Debug)]
pub struct InteriorDofs {
    /// node -> interior index, `usize::MAX` on the boundary
    pub index: Vec<usize>,
    /// interior index -> node
    pub nodes: Vec<usize>,
}

impl InteriorDofs {
    pub fn new(mesh: &Mesh) -> Self {
        let mut index = vec![usize::MAX; mesh.num_nodes()];
        let mut nodes = Vec::new();
        for (i, slot) in index.iter_mut().enumerate() {
            if !mesh.is_boundary_node(i) {
                *slot = nodes.len();
                nodes.push(i);
            }
        }
        InteriorDofs { index, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn extend(&self, interior: &[f64], n_nodes: usize) -> Vec<f64> {
        let mut full = vec![0.0; n_nodes];
        for (k, &n) in self.nodes.iter().enumerate() {
            full[n] = interior[k];
        }
        full
    }
}
