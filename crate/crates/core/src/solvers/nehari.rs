use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::functional::{descent_step, dot, residual_norm, Factor, Functional, InteriorPattern};
use super::{SolveConfig, SolveResult};
use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::field::DiscreteField;
use crate::mesh::Mesh;
use crate::modular::ModularSamples;

/// A candidate whose gradient has Luxemburg norm below this is reported as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-6;

/// Modular data of `|grad u|` and `|u|` needed for the scaling projection.
struct Scaling<'a> {
    grad: &'a ModularSamples,
    val: &'a ModularSamples,
}

impl Scaling<'_> {
    /// `log sum_i w_i (t a_i)^{p_i}` with `t = e^s`, stable for large `|s|`.
    fn log_modular(m: &ModularSamples, s: f64) -> f64 {
        let terms: Vec<f64> = m
            .abs
            .iter()
            .zip(&m.exponent)
            .zip(&m.weight)
            .filter(|((a, _), w)| **a > 0.0 && **w > 0.0)
            .map(|((a, p), w)| w.ln() + p * (s + a.ln()))
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    /// `h(s) = log rho_p(e^s grad u) - log rho_q(e^s u)`, strictly decreasing when `q^- > p^+`.
    fn h(&self, s: f64) -> f64 {
        Self::log_modular(self.grad, s) - Self::log_modular(self.val, s)
    }

    /// `t > 0` with `rho_p(t grad u) = rho_q(t u)`.
    fn root(&self) -> Result<f64> {
        let (pl, ph) = self.grad.exponent_range();
        let (ql, qh) = self.val.exponent_range();
        let h0 = self.h(0.0);
        if !h0.is_finite() {
            return Err(VexError::CollapseToZero { norm: 0.0 });
        }
        let s0 = h0 / (0.5 * (ql + qh) - 0.5 * (pl + ph));
        let (mut lo, mut hi) = (s0 - 1.0, s0 + 1.0);
        let mut k = 0;
        while self.h(lo) < 0.0 || self.h(hi) > 0.0 {
            lo -= 2f64.powi(k);
            hi += 2f64.powi(k);
            k += 1;
            if k > 60 {
                return Err(VexError::NoScalingRoot(format!("no sign change of the scaling equation on [{lo}, {hi}]")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = self.h(mid);
            if v == 0.0 || hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                return Ok(mid.exp());
            }
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}

/// Searches for a nontrivial critical point of `J(u) = integral |grad u|^p/p - integral |u|^q/q`
/// on the set `integral |grad u|^p = integral |u|^q`: descent along the stiffness-preconditioned
/// gradient of `J`, each trial point rescaled back onto the constraint by bisection.
///
/// Requires `q^- > p^+` (checked at quadrature points). Diagnostics: `identity_gap`,
/// `grad_modular`, `q_modular`, `grad_luxemburg`.
pub fn nehari_candidate(p: &ExponentField, q: &ExponentField, mesh: Arc<Mesh>, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let rule = cfg.rule(mesh.dim())?;
    let func = Functional::new(&mesh, &rule, p, q, 0.0, -1.0);
    let p_plus = func.p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let q_minus = func.q.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_minus = func.p.iter().cloned().fold(f64::INFINITY, f64::min);
    if p_minus <= 1.0 {
        return Err(VexError::NonElliptic { value: p_minus });
    }
    if !(q_minus > p_plus) {
        return Err(VexError::InvalidInput(format!(
            "the scaling projection needs q^- > p^+, got q^- = {q_minus}, p^+ = {p_plus}"
        )));
    }
    let pattern = InteriorPattern::new(&mesh);
    let dofs = &pattern.dofs;
    if dofs.is_empty() {
        return Err(VexError::MeshFailure("mesh has no interior nodes".into()));
    }
    let n_nodes = mesh.num_nodes();
    let mass = dofs.restrict(&mesh.lumped_mass());
    let mut precond = Factor::new();
    if !precond.factor(&pattern, pattern.stiffness_values(&mesh)) {
        return Err(VexError::InvalidInput("stiffness matrix is not positive definite".into()));
    }

    let full = |x: &[f64]| DiscreteField::new(mesh.clone(), dofs.extend(x, n_nodes));
    let project = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let u = full(x)?;
        let g = ModularSamples::of_gradients(&u, p, &rule);
        let v = ModularSamples::of_values(&u, q, &rule);
        let t = Scaling { grad: &g, val: &v }.root()?;
        Ok((x.iter().map(|a| t * a).collect(), t))
    };
    let action = |x: &[f64]| func.energy(&dofs.extend(x, n_nodes));
    let grad_of = |x: &[f64]| dofs.restrict(&func.gradient(&dofs.extend(x, n_nodes)));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0: Vec<f64> = dofs
        .nodes
        .iter()
        .map(|&i| mesh.distance_to_boundary(&mesh.nodes()[i]) * (1.0 + 0.1 * rng.gen_range(-1.0..1.0)))
        .collect();
    let (mut x, _) = project(&x0)?;
    let mut energy = action(&x)?;
    let mut grad = grad_of(&x);
    let mut res = residual_norm(&grad, &mass);
    let mut history = vec![energy];
    let mut residuals = vec![res];
    let mut iterations = 0;
    let mut step = 1.0f64;
    let mut converged = res <= cfg.grad_tol;

    while !converged && iterations < cfg.max_iters {
        let d: Vec<f64> = precond.solve(&grad)?.into_iter().map(|v| -v).collect();
        let slope = dot(&grad, &d);
        if !(slope < 0.0) {
            break;
        }
        let trial = |t: f64| -> Result<Option<(Vec<f64>, f64)>> {
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            match project(&y) {
                Ok((yp, _)) => Ok(Some((yp.clone(), action(&yp)?))),
                Err(VexError::CollapseToZero { .. }) | Err(VexError::NoScalingRoot(_)) => Ok(None),
                Err(other) => Err(other),
            }
        };
        let residual = |y: &[f64]| residual_norm(&grad_of(y), &mass);
        let accepted = descent_step(trial, residual, energy, res, slope, (2.0 * step).min(1.0), &cfg.line_search)?;
        let Some((xn, en, t)) = accepted else {
            break;
        };
        step = t;
        iterations += 1;
        x = xn;
        energy = en;
        grad = grad_of(&x);
        res = residual_norm(&grad, &mass);
        history.push(energy);
        residuals.push(res);
        converged = res <= cfg.grad_tol;
    }

    let field = full(&x)?;
    let gs = ModularSamples::of_gradients(&field, p, &rule);
    let vs = ModularSamples::of_values(&field, q, &rule);
    let grad_lux = gs.luxemburg(crate::modular::LUXEMBURG_TOL)?.0;
    if grad_lux < COLLAPSE_TOL {
        return Err(VexError::CollapseToZero { norm: grad_lux });
    }
    let (gm, qm) = (gs.modular(), vs.modular());
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("identity_gap".to_string(), (qm - gm).abs());
    diagnostics.insert("grad_modular".to_string(), gm);
    diagnostics.insert("q_modular".to_string(), qm);
    diagnostics.insert("grad_luxemburg".to_string(), grad_lux);
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
