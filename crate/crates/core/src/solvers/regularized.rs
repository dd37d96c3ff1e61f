use std::collections::BTreeMap;

use super::functional::{descent_step, dot, residual_norm, Factor, Functional, InteriorPattern};
use super::{SolveConfig, SolveResult};
use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::field::DiscreteField;

/// Boundary values of the load up to this (relative to its sup norm) are treated as rounding of 0.
const TRACE_TOL: f64 = 1e-12;

/// Minimizes `F_eps` over zero-trace fields with damped Newton steps (sparse Cholesky), falling
/// back to stiffness-preconditioned descent when the Newton direction is unusable.
///
/// Hitting `max_iters` is not an error: the best iterate is returned with `converged = false`.
pub fn solve_regularized(
    v: &DiscreteField,
    p: &ExponentField,
    q: &ExponentField,
    eps: f64,
    cfg: &SolveConfig,
    init: Option<&DiscreteField>,
) -> Result<SolveResult> {
    cfg.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(VexError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let trace_tol = TRACE_TOL * v.sup_norm().max(1.0);
    let mesh_ref = v.mesh();
    if (0..mesh_ref.num_nodes()).any(|i| mesh_ref.is_boundary_node(i) && v.values()[i].abs() > trace_tol) {
        return Err(VexError::InvalidInput("load must vanish on the boundary".into()));
    }
    let v = &v.clone().with_zero_trace();
    let mesh = v.mesh().clone();
    if let Some(z0) = init {
        if !z0.same_mesh(v) {
            return Err(VexError::InvalidInput("initial guess lives on a different mesh".into()));
        }
    }
    let rule = cfg.rule(mesh.dim())?;
    let func = Functional::new(&mesh, &rule, p, q, eps, 1.0).with_load_field(v);
    let pattern = InteriorPattern::new(&mesh);
    let dofs = &pattern.dofs;
    let n_nodes = mesh.num_nodes();
    let mass = dofs.restrict(&mesh.lumped_mass());

    let mut x = match init {
        Some(z0) => dofs.restrict(z0.values()),
        None => vec![0.0; dofs.len()],
    };
    let full = |x: &[f64]| dofs.extend(x, n_nodes);
    let energy_of = |x: &[f64]| func.energy(&full(x));
    let grad_of = |x: &[f64]| dofs.restrict(&func.gradient(&full(x)));

    let mut energy = energy_of(&x)?;
    let mut grad = grad_of(&x);
    let mut res = residual_norm(&grad, &mass);
    let mut history = vec![energy];
    let mut residuals = vec![res];
    let mut newton = Factor::new();
    let mut stiffness: Option<Factor> = None;
    let mut iterations = 0;
    let mut newton_steps = 0usize;
    let mut converged = dofs.is_empty() || res <= cfg.grad_tol;

    while !converged && iterations < cfg.max_iters {
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2);
        if cfg.newton && newton.factor(&pattern, func.hessian_values(&full(&x), &pattern)) {
            candidates.push(newton.solve(&grad)?.into_iter().map(|d| -d).collect());
        }
        if stiffness.is_none() {
            let mut f = Factor::new();
            if !f.factor(&pattern, pattern.stiffness_values(&mesh)) {
                return Err(VexError::InvalidInput("stiffness matrix is not positive definite".into()));
            }
            stiffness = Some(f);
        }
        candidates.push(stiffness.as_ref().unwrap().solve(&grad)?.into_iter().map(|d| -d).collect());

        let mut accepted = None;
        for (k, d) in candidates.iter().enumerate() {
            let slope = dot(&grad, d);
            if !(slope < 0.0) {
                continue;
            }
            let trial = |t: f64| -> Result<Option<(Vec<f64>, f64)>> {
                let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
                match energy_of(&y) {
                    Ok(e) => Ok(Some((y, e))),
                    Err(VexError::NonFiniteIntegrand { .. }) => Ok(None),
                    Err(other) => Err(other),
                }
            };
            let residual = |y: &[f64]| residual_norm(&grad_of(y), &mass);
            if let Some((y, e, _)) = descent_step(trial, residual, energy, res, slope, 1.0, &cfg.line_search)? {
                if k == 0 && candidates.len() == 2 {
                    newton_steps += 1;
                }
                accepted = Some((y, e));
                break;
            }
        }
        let Some((x_new, e_new)) = accepted else {
            break;
        };
        iterations += 1;
        x = x_new;
        energy = e_new;
        grad = grad_of(&x);
        res = residual_norm(&grad, &mass);
        history.push(energy);
        residuals.push(res);
        converged = res <= cfg.grad_tol;
    }

    let field = DiscreteField::new(mesh.clone(), full(&x))?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("epsilon".to_string(), eps);
    diagnostics.insert("newton_steps".to_string(), newton_steps as f64);
    let mut series = BTreeMap::new();
    series.insert("energy".to_string(), history);
    series.insert("el_residual".to_string(), residuals);
    Ok(SolveResult {
        field,
        energy,
        el_residual: res,
        iterations,
        converged,
        diagnostics,
        series,
        levels: Vec::new(),
    })
}
