use std::collections::BTreeMap;

use super::functional::Functional;
use super::{solve_regularized, LevelRecord, SolveConfig, SolveResult};
use crate::error::Result;
use crate::exponent::ExponentField;
use crate::fem::{cutoff, mollify};
use crate::field::DiscreteField;
use crate::modular::{gradient_modular_with, modular_with};

/// `epsilon0 * factor^k` while above `eps_min`, then `eps_min` itself.
pub fn epsilon_schedule(cfg: &SolveConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = cfg.epsilon0;
    while e > cfg.eps_min * (1.0 + 1e-12) {
        out.push(e);
        e *= cfg.eps_factor;
    }
    out.push(cfg.eps_min);
    out
}

/// `sqrt(eps) * diam / 4`
pub fn mollifier_radius(eps: f64, diameter: f64) -> f64 {
    eps.sqrt() * diameter / 4.0
}

/// `w_n`: truncates `u` at level `n`, mollifies `2 |u_n|^{q-2} u_n` and follows the regularized
/// minimizers down the eps-schedule with warm starts.
///
/// Series (per eps-level): `epsilon`, `grad_modular` = integral |grad w|^p, `phi_sum` =
/// integral (|grad w|^2 + eps)^{p/2}, `q_modular` = integral |w|^q, and the distances
/// `l2_step`, `q_modular_step` between consecutive levels (first entry NaN).
pub fn solve_limit_n(u: &DiscreteField, p: &ExponentField, q: &ExponentField, n: u32, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let mesh = u.mesh().clone();
    let rule = cfg.rule(mesh.dim())?;
    let u_n = cutoff(&u.clone().with_zero_trace(), n)?;
    let nodes = mesh.nodes();
    let source = DiscreteField::new(
        mesh.clone(),
        u_n.values()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if s == 0.0 {
                    0.0
                } else {
                    2.0 * s.signum() * s.abs().powf(q.value_at(&nodes[i][..mesh.dim()]) - 1.0)
                }
            })
            .collect(),
    )?;
    let diam = mesh.diameter();

    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut push = |k: &str, v: f64| series.entry(k.to_string()).or_default().push(v);
    let mut total_iters = 0;
    let mut all_converged = true;
    let mut warm = u_n.clone().with_zero_trace();
    for eps in epsilon_schedule(cfg) {
        let v = mollify(&source, mollifier_radius(eps, diam))?;
        let r = solve_regularized(&v, p, q, eps, cfg, Some(&warm))?;
        total_iters += r.iterations;
        all_converged &= r.converged;
        let w = &r.field;
        push("epsilon", eps);
        push("grad_modular", gradient_modular_with(w, p, &rule).value);
        push("phi_sum", Functional::new(&mesh, &rule, p, p, eps, 0.0).phi_sum(w.values())?);
        push("q_modular", modular_with(w, q, &rule).value);
        match levels.last() {
            Some(prev) => {
                let diff = w.axpy(-1.0, &prev.field);
                push("l2_step", modular_with(&diff, &ExponentField::constant(2.0), &rule).value.sqrt());
                push("q_modular_step", modular_with(&diff, q, &rule).value);
            }
            None => {
                push("l2_step", f64::NAN);
                push("q_modular_step", f64::NAN);
            }
        }
        push("iterations", r.iterations as f64);
        push("el_residual", r.el_residual);
        levels.push(LevelRecord {
            epsilon: eps,
            field: r.field.clone(),
            energy: r.energy,
            el_residual: r.el_residual,
            iterations: r.iterations,
            converged: r.converged,
        });
        warm = r.field;
    }
    let last = levels.last().expect("schedule is nonempty").clone();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("n".to_string(), n as f64);
    diagnostics.insert("epsilon".to_string(), last.epsilon);
    diagnostics.insert("grad_modular".to_string(), *series["grad_modular"].last().unwrap());
    diagnostics.insert("q_modular".to_string(), *series["q_modular"].last().unwrap());
    Ok(SolveResult {
        field: last.field,
        energy: last.energy,
        el_residual: last.el_residual,
        iterations: total_iters,
        converged: all_converged,
        diagnostics,
        series,
        levels,
    })
}

#[derive(Clone, Debug)]
pub struct CascadeResult {
    pub runs: Vec<SolveResult>,
    pub n_values: Vec<u32>,
    /// integral |grad u|^p of the candidate
    pub target_grad_modular: f64,
    /// integral |u|^q of the candidate
    pub target_q_modular: f64,
    /// `|integral |grad w_n|^p - integral |grad u|^p|` per n
    pub gap_grad: Vec<f64>,
    /// `|integral |w_n|^q - integral |u|^q|` per n
    pub gap_q: Vec<f64>,
}

impl CascadeResult {
    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
    }
}

/// `w_n` for every `n` in the schedule, with the gaps of the gradient and q-modulars to those of `u`.
pub fn cascade(u: &DiscreteField, p: &ExponentField, q: &ExponentField, cfg: &SolveConfig) -> Result<CascadeResult> {
    cfg.validate()?;
    let rule = cfg.rule(u.mesh().dim())?;
    let target_grad = gradient_modular_with(u, p, &rule).value;
    let target_q = modular_with(u, q, &rule).value;
    let mut runs = Vec::with_capacity(cfg.n_schedule.len());
    let (mut gap_grad, mut gap_q) = (Vec::new(), Vec::new());
    for &n in &cfg.n_schedule {
        let r = solve_limit_n(u, p, q, n, cfg)?;
        gap_grad.push((r.diagnostics["grad_modular"] - target_grad).abs());
        gap_q.push((r.diagnostics["q_modular"] - target_q).abs());
        runs.push(r);
    }
    Ok(CascadeResult {
        runs,
        n_values: cfg.n_schedule.clone(),
        target_grad_modular: target_grad,
        target_q_modular: target_q,
        gap_grad,
        gap_q,
    })
}
