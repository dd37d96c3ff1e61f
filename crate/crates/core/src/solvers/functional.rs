//! Quadrature-level evaluation of the integral functionals minimized by the solvers, with their
//! gradients and Hessians on interior nodes.

use std::collections::BTreeSet;

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::CscMatrix;
use rayon::prelude::*;

use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::fem::{InteriorDofs, QuadPoints};
use crate::field::DiscreteField;
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;

const PAR_CELLS: usize = 2048;
/// Floor for `|z|` in the `|z|^{q-2}` Hessian weight when `q < 2`.
const Q_HESS_FLOOR: f64 = 1e-8;

/// `integral (|grad z|^2 + eps)^{p/2}/p + sign * integral |z|^q/q - integral load z`.
///
/// `sign = 1` is the convex regularized energy, `sign = -1` (with `eps = 0`, no load) the action
/// functional whose critical points solve the original equation.
pub(crate) struct Functional<'a> {
    pub mesh: &'a Mesh,
    pub qp: QuadPoints,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub load: Vec<f64>,
    pub eps: f64,
    pub sign: f64,
}

impl<'a> Functional<'a> {
    pub fn new(mesh: &'a Mesh, rule: &QuadratureRule, p: &ExponentField, q: &ExponentField, eps: f64, sign: f64) -> Self {
        let qp = QuadPoints::new(mesh, rule);
        let pv = qp.exponent_values(mesh, p).value;
        let qv = qp.exponent_values(mesh, q).value;
        let load = vec![0.0; qp.len()];
        Functional {
            mesh,
            qp,
            p: pv,
            q: qv,
            load,
            eps,
            sign,
        }
    }

    pub fn with_load_field(mut self, v: &DiscreteField) -> Self {
        self.load = self.qp.field_values(v);
        self
    }

    fn cell_state(&self, z: &[f64], c: usize) -> ([f64; 3], [f64; 2]) {
        let cell = self.mesh.cell(c);
        let g = &self.mesh.geometry(c).grad_bary;
        let mut zl = [0.0; 3];
        let mut grad = [0.0; 2];
        for (k, &n) in cell.iter().enumerate() {
            zl[k] = z[n];
            grad[0] += z[n] * g[k][0];
            grad[1] += z[n] * g[k][1];
        }
        (zl, grad)
    }

    fn z_at(&self, zl: &[f64; 3], i: usize) -> f64 {
        let b = &self.qp.bary[i];
        zl[0] * b[0] + zl[1] * b[1] + zl[2] * b[2]
    }

    /// Functional value at the nodal vector `z`.
    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        let per = self.qp.per_cell;
        let grads: Vec<([f64; 3], [f64; 2])> = (0..self.mesh.num_cells()).map(|c| self.cell_state(z, c)).collect();
        self.qp.sum(|i| {
            let c = i / per;
            let (zl, g) = &grads[c];
            let s = g[0] * g[0] + g[1] * g[1] + self.eps;
            let zi = self.z_at(zl, i);
            let (p, q) = (self.p[i], self.q[i]);
            let grad_term = if s == 0.0 { 0.0 } else { s.powf(0.5 * p) / p };
            let pot = if zi == 0.0 { 0.0 } else { zi.abs().powf(q) / q };
            grad_term + self.sign * pot - self.load[i] * zi
        })
    }

    /// `integral (|grad z|^2 + eps)^{p/2}`
    pub fn phi_sum(&self, z: &[f64]) -> Result<f64> {
        let per = self.qp.per_cell;
        self.qp.sum(|i| {
            let (_, g) = self.cell_state(z, i / per);
            let s = g[0] * g[0] + g[1] * g[1] + self.eps;
            if s == 0.0 {
                0.0
            } else {
                s.powf(0.5 * self.p[i])
            }
        })
    }

    fn cell_gradient(&self, z: &[f64], c: usize) -> [f64; 3] {
        let (zl, g) = self.cell_state(z, c);
        let gb = &self.mesh.geometry(c).grad_bary;
        let mut out = [0.0; 3];
        for i in c * self.qp.per_cell..(c + 1) * self.qp.per_cell {
            let s = g[0] * g[0] + g[1] * g[1] + self.eps;
            let coef = if s == 0.0 { 0.0 } else { s.powf(0.5 * (self.p[i] - 2.0)) };
            let zi = self.z_at(&zl, i);
            let react = if zi == 0.0 { 0.0 } else { zi.signum() * zi.abs().powf(self.q[i] - 1.0) };
            let w = self.qp.w[i];
            let b = &self.qp.bary[i];
            for k in 0..3 {
                let flux = coef * (g[0] * gb[k][0] + g[1] * gb[k][1]);
                out[k] += w * (flux + (self.sign * react - self.load[i]) * b[k]);
            }
        }
        out
    }

    /// Derivative with respect to every nodal value (boundary entries included).
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let locals = self.per_cell(|c| self.cell_gradient(z, c));
        let mut out = vec![0.0; self.mesh.num_nodes()];
        for (c, l) in locals.iter().enumerate() {
            for (k, &n) in self.mesh.cell(c).iter().enumerate() {
                out[n] += l[k];
            }
        }
        out
    }

    /// Only the gradient term: the weak form of `-div((|grad z|^2 + eps)^{(p-2)/2} grad z)`.
    pub fn flux_load(&self, z: &[f64]) -> Vec<f64> {
        let stripped = Functional {
            mesh: self.mesh,
            qp: self.qp.clone(),
            p: self.p.clone(),
            q: self.q.clone(),
            load: vec![0.0; self.qp.len()],
            eps: self.eps,
            sign: 0.0,
        };
        stripped.gradient(z)
    }

    fn cell_hessian(&self, z: &[f64], c: usize) -> [[f64; 3]; 3] {
        let (zl, g) = self.cell_state(z, c);
        let gb = &self.mesh.geometry(c).grad_bary;
        let gdot: [f64; 3] = std::array::from_fn(|k| g[0] * gb[k][0] + g[1] * gb[k][1]);
        let mut out = [[0.0; 3]; 3];
        for i in c * self.qp.per_cell..(c + 1) * self.qp.per_cell {
            let p = self.p[i];
            let s = g[0] * g[0] + g[1] * g[1] + self.eps;
            let (c1, c2) = if s == 0.0 {
                (0.0, 0.0)
            } else {
                let c1 = s.powf(0.5 * (p - 2.0));
                (c1, (p - 2.0) * c1 / s)
            };
            let zi = self.z_at(&zl, i).abs();
            let qi = self.q[i];
            let react = if qi < 2.0 {
                (qi - 1.0) * zi.max(Q_HESS_FLOOR).powf(qi - 2.0)
            } else if qi == 2.0 {
                1.0
            } else {
                (qi - 1.0) * zi.powf(qi - 2.0)
            };
            let w = self.qp.w[i];
            let b = &self.qp.bary[i];
            for a in 0..3 {
                for bb in 0..3 {
                    let lap = gb[a][0] * gb[bb][0] + gb[a][1] * gb[bb][1];
                    out[a][bb] += w * (c1 * lap + c2 * gdot[a] * gdot[bb] + self.sign * react * b[a] * b[bb]);
                }
            }
        }
        out
    }

    /// Hessian values on the interior pattern.
    pub fn hessian_values(&self, z: &[f64], pattern: &InteriorPattern) -> Vec<f64> {
        let locals = self.per_cell(|c| self.cell_hessian(z, c));
        pattern.scatter(&locals)
    }

    fn per_cell<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        let n = self.mesh.num_cells();
        if n >= PAR_CELLS {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }
}

/// Symmetric CSC sparsity pattern of P1 couplings between interior nodes, with a per-cell map from
/// local index pairs to stored entries.
pub(crate) struct InteriorPattern {
    pub dofs: InteriorDofs,
    pattern: SparsityPattern,
    slots: Vec<[[usize; 3]; 3]>,
}

impl InteriorPattern {
    pub fn new(mesh: &Mesh) -> Self {
        let dofs = InteriorDofs::new(mesh);
        let n = dofs.len();
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for c in 0..mesh.num_cells() {
            let cell = mesh.cell(c);
            for &a in cell {
                for &b in cell {
                    let (ia, ib) = (dofs.index[a], dofs.index[b]);
                    if ia != usize::MAX && ib != usize::MAX {
                        cols[ib].insert(ia);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for col in &cols {
            indices.extend(col.iter().copied());
            offsets.push(indices.len());
        }
        let slots = (0..mesh.num_cells())
            .map(|c| {
                let cell = mesh.cell(c);
                std::array::from_fn(|a| {
                    std::array::from_fn(|b| {
                        if a >= cell.len() || b >= cell.len() {
                            return usize::MAX;
                        }
                        let (ia, ib) = (dofs.index[cell[a]], dofs.index[cell[b]]);
                        if ia == usize::MAX || ib == usize::MAX {
                            usize::MAX
                        } else {
                            let col = &indices[offsets[ib]..offsets[ib + 1]];
                            offsets[ib] + col.binary_search(&ia).expect("entry present in pattern")
                        }
                    })
                })
            })
            .collect();
        let pattern = SparsityPattern::try_from_offsets_and_indices(n, n, offsets, indices).expect("valid CSC pattern");
        InteriorPattern { dofs, pattern, slots }
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    fn scatter(&self, locals: &[[[f64; 3]; 3]]) -> Vec<f64> {
        let mut values = vec![0.0; self.nnz()];
        for (local, slots) in locals.iter().zip(&self.slots) {
            for a in 0..3 {
                for b in 0..3 {
                    let s = slots[a][b];
                    if s != usize::MAX {
                        values[s] += local[a][b];
                    }
                }
            }
        }
        values
    }

    pub fn matrix(&self, values: Vec<f64>) -> CscMatrix<f64> {
        CscMatrix::try_from_pattern_and_values(self.pattern.clone(), values).expect("value count matches pattern")
    }

    /// Stiffness matrix `integral grad phi_i . grad phi_j` on interior nodes.
    pub fn stiffness_values(&self, mesh: &Mesh) -> Vec<f64> {
        let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_cells())
            .map(|c| {
                let geo = mesh.geometry(c);
                let g = &geo.grad_bary;
                std::array::from_fn(|a| std::array::from_fn(|b| geo.volume * (g[a][0] * g[b][0] + g[a][1] * g[b][1])))
            })
            .collect();
        self.scatter(&locals)
    }
}

/// Cholesky factorization that keeps its symbolic analysis between numeric refactorizations.
pub(crate) struct Factor {
    chol: Option<CscCholesky<f64>>,
}

impl Factor {
    pub fn new() -> Self {
        Factor { chol: None }
    }

    /// Factor a matrix on `pattern`; `false` if it is not numerically positive definite.
    pub fn factor(&mut self, pattern: &InteriorPattern, values: Vec<f64>) -> bool {
        match &mut self.chol {
            Some(ch) => {
                if ch.refactor(&values).is_ok() {
                    return true;
                }
                // a failed refactorization leaves the factor unusable
                self.chol = None;
                false
            }
            None => match CscCholesky::factor(&pattern.matrix(values)) {
                Ok(ch) => {
                    self.chol = Some(ch);
                    true
                }
                Err(_) => false,
            },
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let ch = self
            .chol
            .as_ref()
            .ok_or_else(|| VexError::InvalidInput("solve before a successful factorization".into()))?;
        let b = DVector::from_column_slice(rhs);
        Ok(ch.solve(&b).column(0).iter().copied().collect())
    }
}

/// `sqrt(sum_i r_i^2 / m_i)` over interior nodes, with lumped masses `m_i`: a discrete dual norm
/// of the weak residual.
pub(crate) fn residual_norm(interior_residual: &[f64], interior_mass: &[f64]) -> f64 {
    interior_residual
        .iter()
        .zip(interior_mass)
        .map(|(r, m)| r * r / m)
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative size below which energy differences are indistinguishable from rounding.
const ENERGY_NOISE: f64 = 1e-13;

/// Step selection along a descent direction with slope `slope < 0` at the current point.
///
/// Normally a backtracking Armijo search from `t0`. When even the full step predicts a decrease
/// below the energy's rounding level, the energy cannot rank trial points, so steps `t = 1, 1/2, ..`
/// are judged by the residual instead (accepted once it decreases and the energy does not rise
/// beyond rounding). Trial points that `trial` rejects (`Ok(None)`) count as failed.
pub(crate) fn descent_step(
    trial: impl Fn(f64) -> Result<Option<(Vec<f64>, f64)>>,
    residual: impl Fn(&[f64]) -> f64,
    e0: f64,
    res0: f64,
    slope: f64,
    t0: f64,
    ls: &super::ArmijoParams,
) -> Result<Option<(Vec<f64>, f64, f64)>> {
    let noise = ENERGY_NOISE * e0.abs().max(1.0);
    if ls.c1 * slope.abs() <= noise {
        let mut t = 1.0;
        while t >= 1e-3 {
            if let Some((x, e)) = trial(t)? {
                if e <= e0 + noise && residual(&x) < res0 {
                    return Ok(Some((x, e, t)));
                }
            }
            t *= ls.shrink;
        }
        return Ok(None);
    }
    let mut t = t0;
    while t >= ls.min_step {
        if let Some((x, e)) = trial(t)? {
            if e <= e0 + ls.c1 * t * slope {
                return Ok(Some((x, e, t)));
            }
        }
        t *= ls.shrink;
    }
    Ok(None)
}
