//! Piecewise-linear (P1) fields on a mesh.

use std::sync::Arc;

use crate::error::{Result, VexError};
use crate::mesh::Mesh;

/// Nodal values of a continuous piecewise-linear function.
///
/// `zero_trace` is set exactly when every boundary value is 0.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    zero_trace: bool,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(VexError::InvalidInput(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        let zero_trace = boundary_is_zero(&mesh, &values);
        Ok(DiscreteField { mesh, values, zero_trace })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_nodes();
        DiscreteField {
            mesh,
            values: vec![0.0; n],
            zero_trace: true,
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        let values: Vec<f64> = mesh.nodes().iter().map(f).collect();
        let zero_trace = boundary_is_zero(&mesh, &values);
        DiscreteField { mesh, values, zero_trace }
    }

    /// Copy with boundary values set to 0.
    pub fn with_zero_trace(mut self) -> Self {
        for (i, v) in self.values.iter_mut().enumerate() {
            if self.mesh.is_boundary_node(i) {
                *v = 0.0;
            }
        }
        self.zero_trace = true;
        self
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn zero_trace(&self) -> bool {
        self.zero_trace
    }

    pub fn same_mesh(&self, other: &DiscreteField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// Value at barycentric coordinates `bary` of cell `c`.
    pub fn value_in_cell(&self, c: usize, bary: &[f64; 3]) -> f64 {
        self.mesh.cell(c).iter().enumerate().map(|(k, &n)| bary[k] * self.values[n]).sum()
    }

    /// Constant gradient of the interpolant on cell `c`.
    pub fn cell_gradient(&self, c: usize) -> [f64; 2] {
        let g = &self.mesh.geometry(c).grad_bary;
        let mut out = [0.0; 2];
        for (k, &n) in self.mesh.cell(c).iter().enumerate() {
            out[0] += self.values[n] * g[k][0];
            out[1] += self.values[n] * g[k][1];
        }
        out
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let (c, b) = self.mesh.locate(x);
        self.value_in_cell(c, &b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DiscreteField {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let zero_trace = boundary_is_zero(&self.mesh, &values);
        DiscreteField {
            mesh: self.mesh.clone(),
            values,
            zero_trace,
        }
    }

    pub fn scaled(&self, s: f64) -> DiscreteField {
        self.map(|v| s * v)
    }

    /// `self + s * other` on a shared mesh.
    pub fn axpy(&self, s: f64, other: &DiscreteField) -> DiscreteField {
        let values: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        let zero_trace = boundary_is_zero(&self.mesh, &values);
        DiscreteField {
            mesh: self.mesh.clone(),
            values,
            zero_trace,
        }
    }

    pub(crate) fn from_parts_unchecked(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        let zero_trace = boundary_is_zero(&mesh, &values);
        DiscreteField { mesh, values, zero_trace }
    }
}

fn boundary_is_zero(mesh: &Mesh, values: &[f64]) -> bool {
    values.iter().enumerate().all(|(i, &v)| !mesh.is_boundary_node(i) || v == 0.0)
}

/// Per-cell constant gradients of a P1 field.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub cells: Vec<[f64; 2]>,
}

impl GradientField {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn norm(&self, c: usize) -> f64 {
        (self.cells[c][0].powi(2) + self.cells[c][1].powi(2)).sqrt()
    }
}
