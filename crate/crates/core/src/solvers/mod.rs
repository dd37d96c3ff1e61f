//! Minimization of the regularized energies, the eps -> 0 and n -> infinity continuations, and a
//! constrained generator of nontrivial solution candidates.

mod cascade;
mod functional;
mod nehari;
mod regularized;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::field::DiscreteField;
use crate::quadrature::QuadratureRule;

pub use cascade::{cascade, epsilon_schedule, mollifier_radius, solve_limit_n, CascadeResult};
pub use nehari::{nehari_candidate, COLLAPSE_TOL};
pub use regularized::solve_regularized;

use functional::Functional;

fn default_epsilon0() -> f64 {
    1.0
}
fn default_eps_factor() -> f64 {
    0.5
}
fn default_eps_min() -> f64 {
    1e-6
}
fn default_grad_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    20000
}
fn default_n_schedule() -> Vec<u32> {
    vec![1, 2, 4, 8]
}
fn default_seed() -> u64 {
    42
}
fn default_quadrature_points() -> usize {
    3
}
fn default_newton() -> bool {
    true
}

/// Backtracking parameters: accept `t` once `E(x + t d) <= E(x) + c1 t <grad E, d>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmijoParams {
    #[serde(default = "ArmijoParams::default_c1")]
    pub c1: f64,
    #[serde(default = "ArmijoParams::default_shrink")]
    pub shrink: f64,
    #[serde(default = "ArmijoParams::default_min_step")]
    pub min_step: f64,
}

impl ArmijoParams {
    fn default_c1() -> f64 {
        1e-4
    }
    fn default_shrink() -> f64 {
        0.5
    }
    fn default_min_step() -> f64 {
        1e-12
    }
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams {
            c1: Self::default_c1(),
            shrink: Self::default_shrink(),
            min_step: Self::default_min_step(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    #[serde(default = "default_eps_factor")]
    pub eps_factor: f64,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_n_schedule")]
    pub n_schedule: Vec<u32>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub line_search: ArmijoParams,
    /// Damped Newton steps; plain preconditioned descent when false.
    #[serde(default = "default_newton")]
    pub newton: bool,
    #[serde(default = "default_quadrature_points")]
    pub quadrature_points: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilon0: default_epsilon0(),
            eps_factor: default_eps_factor(),
            eps_min: default_eps_min(),
            grad_tol: default_grad_tol(),
            max_iters: default_max_iters(),
            n_schedule: default_n_schedule(),
            seed: default_seed(),
            line_search: ArmijoParams::default(),
            newton: default_newton(),
            quadrature_points: default_quadrature_points(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VexError::InvalidInput(m));
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return bad(format!("epsilon0 must be positive, got {}", self.epsilon0));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return bad(format!("eps_factor must lie in (0,1), got {}", self.eps_factor));
        }
        if !(self.eps_min > 0.0 && self.eps_min <= self.epsilon0) {
            return bad(format!("eps_min must lie in (0, epsilon0], got {}", self.eps_min));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.n_schedule.is_empty() || self.n_schedule.contains(&0) {
            return bad("n_schedule must be a nonempty list of positive integers".into());
        }
        let ls = &self.line_search;
        if !(ls.c1 > 0.0 && ls.c1 < 0.5 && ls.shrink > 0.0 && ls.shrink < 1.0 && ls.min_step > 0.0) {
            return bad("line_search needs c1 in (0, 1/2), shrink in (0,1), min_step > 0".into());
        }
        QuadratureRule::with_points(1, self.quadrature_points)?;
        Ok(())
    }

    pub fn rule(&self, dim: usize) -> Result<QuadratureRule> {
        QuadratureRule::with_points(dim, self.quadrature_points)
    }
}

/// One level of an eps-continuation.
#[derive(Clone, Debug)]
pub struct LevelRecord {
    pub epsilon: f64,
    pub field: DiscreteField,
    pub energy: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: DiscreteField,
    pub energy: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: BTreeMap<String, f64>,
    /// Per-iteration or per-level sequences (energy history, continuation diagnostics).
    pub series: BTreeMap<String, Vec<f64>>,
    /// Intermediate solutions of an eps-continuation; empty for a single solve.
    pub levels: Vec<LevelRecord>,
}

impl SolveResult {
    /// `Err(MaxItersExceeded)` unless the solve converged.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(VexError::MaxItersExceeded {
                iterations: self.iterations,
                residual: self.el_residual,
            })
        }
    }
}

fn check_same_mesh(a: &DiscreteField, b: &DiscreteField) -> Result<()> {
    if a.same_mesh(b) {
        Ok(())
    } else {
        Err(VexError::InvalidInput("fields live on different meshes".into()))
    }
}

/// `F(z) = integral |grad z|^p/p + integral |z|^q/q - 2 integral |u_n|^{q-2} u_n z`.
pub fn energy_f(z: &DiscreteField, u_n: &DiscreteField, p: &ExponentField, q: &ExponentField) -> Result<f64> {
    check_same_mesh(z, u_n)?;
    let mesh = z.mesh();
    let rule = QuadratureRule::default_for(mesh.dim());
    let mut f = Functional::new(mesh, &rule, p, q, 0.0, 1.0);
    let un = f.qp.field_values(u_n);
    f.load = un
        .iter()
        .zip(&f.q)
        .map(|(&u, &qi)| if u == 0.0 { 0.0 } else { 2.0 * u.signum() * u.abs().powf(qi - 1.0) })
        .collect();
    f.energy(z.values())
}

/// `F_eps(z) = integral (|grad z|^2 + eps)^{p/2}/p + integral |z|^q/q - integral v z`.
pub fn energy_feps(z: &DiscreteField, v: &DiscreteField, p: &ExponentField, q: &ExponentField, eps: f64) -> Result<f64> {
    check_same_mesh(z, v)?;
    if !(eps >= 0.0) {
        return Err(VexError::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    let rule = QuadratureRule::default_for(z.mesh().dim());
    Functional::new(z.mesh(), &rule, p, q, eps, 1.0).with_load_field(v).energy(z.values())
}

/// `phi_eps(z) = integral (|grad z|^2 + eps)^{p/2}/p`.
pub fn phi_eps(z: &DiscreteField, p: &ExponentField, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(VexError::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    let rule = QuadratureRule::default_for(z.mesh().dim());
    let mut f = Functional::new(z.mesh(), &rule, p, p, eps, 0.0);
    f.sign = 0.0;
    f.energy(z.values())
}

/// Weak application of `A_eps z = -div((|grad z|^2 + eps)^{(p-2)/2} grad z)`: entry `i` holds
/// `integral (|grad z|^2 + eps)^{(p-2)/2} grad z . grad phi_i` for interior nodes, 0 on the boundary.
pub fn apply_aeps(z: &DiscreteField, p: &ExponentField, eps: f64) -> Result<DiscreteField> {
    if !(eps > 0.0) {
        return Err(VexError::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    let mesh = z.mesh();
    let rule = QuadratureRule::default_for(mesh.dim());
    let f = Functional::new(mesh, &rule, p, p, eps, 0.0);
    let mut load = f.flux_load(z.values());
    for (i, v) in load.iter_mut().enumerate() {
        if mesh.is_boundary_node(i) {
            *v = 0.0;
        }
    }
    DiscreteField::new(mesh.clone(), load)
}

/// `integral (|grad z|^2 + eps)^{p/2}`, the quantity whose eps -> 0 limit is the gradient modular.
pub fn regularized_gradient_modular(z: &DiscreteField, p: &ExponentField, eps: f64, rule: &QuadratureRule) -> Result<f64> {
    Functional::new(z.mesh(), rule, p, p, eps, 0.0).phi_sum(z.values())
}
