use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use vexlab_core::modular::verify_modular_relations;
use vexlab_core::pohozaev::boundary_term;
use vexlab_core::{
    bounds, cascade, embedding_gap, find_star_center, holder_check, log_holder_estimate, nehari_candidate,
    pohozaev_terms, remainder_r, solve_regularized, verdict, CascadeResult, DiscreteField, ExponentField, Mesh,
    PohozaevReport, SamplingPlan, SolveResult, VexError,
};

use crate::config::{LoadSpec, LoadedConfig, Scenario, SolveMethod};
use crate::{csv_string, CliError};

/// What a scenario produced, before it is written to disk.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub result: Value,
    pub converged: bool,
    /// Flat columns for a sweep row.
    pub summary: Vec<(String, String)>,
    /// Extra artifacts: file name and contents.
    pub files: Vec<(String, String)>,
    /// Exit code forced by failed sub-runs of a sweep.
    pub error_exit: Option<i32>,
}

pub fn run_scenario(scenario: Scenario, cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    match scenario {
        Scenario::SpacesCheck => spaces_check(cfg),
        Scenario::Solve => solve(cfg),
        Scenario::Cascade => cascade_scenario(cfg),
        Scenario::Pohozaev => pohozaev(cfg),
        Scenario::Verdict => verdict_scenario(cfg),
        Scenario::Sweep => sweep(cfg),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn random_field(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> DiscreteField {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let vals = (0..mesh.num_nodes()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    DiscreteField::new(mesh.clone(), vals).expect("one value per node")
}

fn spaces_check(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let c = &cfg.config;
    let mesh = cfg.mesh()?;
    let p = cfg.p()?;
    let plan = SamplingPlan::default();
    let p_bounds = bounds(&p, &c.domain, &plan)?;
    let log_holder = log_holder_estimate(&p, &c.domain, c.spaces.log_holder_pairs, cfg.seed());
    let mut q_bounds = Value::Null;
    let mut gap = Value::Null;
    if c.q.is_some() {
        let q = cfg.q()?;
        q_bounds = to_value(&bounds(&q, &c.domain, &plan)?);
        gap = match embedding_gap(&p, &q, &c.domain, c.dim.unwrap_or(c.domain.dim()), &plan) {
            Ok(g) => json!(g),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let (mut rel_failures, mut worst_residual, mut min_lower, mut min_upper) = (0usize, 0.0f64, f64::INFINITY, f64::INFINITY);
    let (mut hol_failures, mut min_hol) = (0usize, f64::INFINITY);
    for _ in 0..c.spaces.trials {
        let u = random_field(&mesh, &mut rng);
        let r = verify_modular_relations(&u, &p)?;
        rel_failures += usize::from(!r.pass);
        worst_residual = worst_residual.max(r.normalized_residual.abs());
        min_lower = min_lower.min(r.slack_lower);
        min_upper = min_upper.min(r.slack_upper);
        let v = random_field(&mesh, &mut rng);
        let h = holder_check(&u, &v, &p)?;
        hol_failures += usize::from(!h.pass);
        min_hol = min_hol.min(h.slack / h.rhs.max(f64::MIN_POSITIVE));
    }
    let pass = rel_failures == 0 && hol_failures == 0;
    let result = json!({
        "p_bounds": p_bounds,
        "q_bounds": q_bounds,
        "log_holder": log_holder,
        "embedding_gap": gap,
        "relations": {
            "trials": c.spaces.trials,
            "failures": rel_failures,
            "max_normalized_residual": worst_residual,
            "min_slack_lower": min_lower,
            "min_slack_upper": min_upper,
        },
        "holder": {
            "trials": c.spaces.trials,
            "failures": hol_failures,
            "min_relative_slack": min_hol,
        },
        "pass": pass,
    });
    Ok(ScenarioOutput {
        error_exit: None,
        result,
        converged: true,
        summary: vec![
            ("p_minus".into(), p_bounds.0.to_string()),
            ("p_plus".into(), p_bounds.1.to_string()),
            ("log_holder_c".into(), log_holder.c_hat.to_string()),
            ("relation_failures".into(), rel_failures.to_string()),
            ("holder_failures".into(), hol_failures.to_string()),
            ("pass".into(), pass.to_string()),
        ],
        files: Vec::new(),
    })
}

fn load_field(mesh: &Arc<Mesh>, spec: &LoadSpec) -> DiscreteField {
    let (lo, hi) = mesh.bbox();
    let dim = mesh.dim();
    let field = match spec {
        LoadSpec::Constant { value } => DiscreteField::interpolate(mesh.clone(), |_| *value),
        LoadSpec::SineProduct { amplitude } => DiscreteField::interpolate(mesh.clone(), |x| {
            (0..dim).map(|k| (PI * (x[k] - lo[k]) / (hi[k] - lo[k])).sin()).product::<f64>() * amplitude
        }),
    };
    field.with_zero_trace()
}

fn solution_csv(u: &DiscreteField) -> Result<String, CliError> {
    let mesh = u.mesh();
    let mut header = vec!["node", "x"];
    if mesh.dim() == 2 {
        header.push("y");
    }
    header.push("u");
    let rows = (0..mesh.num_nodes()).map(|i| {
        let x = mesh.nodes()[i];
        let mut row = vec![i.to_string(), x[0].to_string()];
        if mesh.dim() == 2 {
            row.push(x[1].to_string());
        }
        row.push(u.values()[i].to_string());
        row
    });
    csv_string(&header, rows)
}

fn solve_summary(r: &SolveResult) -> Value {
    json!({
        "energy": r.energy,
        "el_residual": r.el_residual,
        "iterations": r.iterations,
        "converged": r.converged,
        "sup_norm": r.field.sup_norm(),
        "diagnostics": r.diagnostics,
    })
}

fn solve(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let c = &cfg.config;
    let mesh = cfg.mesh()?;
    let (p, q) = (cfg.p()?, cfg.q()?);
    let method = c.solve.method;
    let r = match method {
        SolveMethod::Nehari => nehari_candidate(&p, &q, mesh.clone(), &c.solver)?,
        SolveMethod::Regularized => {
            let load = c.solve.load.as_ref().ok_or_else(|| CliError::Config("solve.load is required".into()))?;
            let eps = c.solve.epsilon.unwrap_or(c.solver.eps_min);
            solve_regularized(&load_field(&mesh, load), &p, &q, eps, &c.solver, None)?
        }
    };
    let mut result = solve_summary(&r);
    result["method"] = to_value(&method);
    result["series"] = to_value(&r.series);
    Ok(ScenarioOutput {
        error_exit: None,
        converged: r.converged,
        summary: vec![
            ("energy".into(), r.energy.to_string()),
            ("el_residual".into(), r.el_residual.to_string()),
            ("iterations".into(), r.iterations.to_string()),
            ("converged".into(), r.converged.to_string()),
        ],
        files: vec![("solution.csv".into(), solution_csv(&r.field)?)],
        result,
    })
}

/// Candidate, its cascade and the origin used for the boundary terms.
struct Pipeline {
    mesh: Arc<Mesh>,
    p: ExponentField,
    q: ExponentField,
    candidate: SolveResult,
    cascade: CascadeResult,
    origin: Vec<f64>,
    origin_source: &'static str,
}

impl Pipeline {
    fn converged(&self) -> bool {
        self.candidate.converged && self.cascade.converged()
    }
}

fn resolve_origin(cfg: &LoadedConfig) -> Result<(Vec<f64>, &'static str), CliError> {
    let domain = &cfg.config.domain;
    if let Some(o) = &cfg.config.origin {
        return Ok((o.clone(), "config"));
    }
    match find_star_center(domain, 24) {
        Ok((o, _)) => Ok((o, "star_center")),
        Err(VexError::NotStarShaped { .. }) => {
            let (lo, hi) = domain.bbox();
            Ok((lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(), "bbox_center"))
        }
        Err(e) => Err(e.into()),
    }
}

fn pipeline(cfg: &LoadedConfig) -> Result<Pipeline, CliError> {
    let c = &cfg.config;
    let mesh = cfg.mesh()?;
    let (p, q) = (cfg.p()?, cfg.q()?);
    let (origin, origin_source) = resolve_origin(cfg)?;
    let candidate = nehari_candidate(&p, &q, mesh.clone(), &c.solver)?;
    let cascade = cascade(&candidate.field, &p, &q, &c.solver)?;
    Ok(Pipeline {
        mesh,
        p,
        q,
        candidate,
        cascade,
        origin,
        origin_source,
    })
}

fn cascade_summary(cas: &CascadeResult) -> Value {
    let runs: Vec<Value> = cas
        .runs
        .iter()
        .zip(&cas.n_values)
        .map(|(r, n)| {
            json!({
                "n": n,
                "converged": r.converged,
                "iterations": r.levels.iter().map(|l| l.iterations).sum::<usize>(),
                "el_residual": r.el_residual,
                "levels": r.levels.len(),
                "grad_modular": r.diagnostics.get("grad_modular"),
                "q_modular": r.diagnostics.get("q_modular"),
            })
        })
        .collect();
    json!({
        "n_values": cas.n_values,
        "target_grad_modular": cas.target_grad_modular,
        "target_q_modular": cas.target_q_modular,
        "gap_grad": cas.gap_grad,
        "gap_q": cas.gap_q,
        "converged": cas.converged(),
        "runs": runs,
    })
}

fn series_csv(pl: &Pipeline) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for (run, n) in pl.cascade.runs.iter().zip(&pl.cascade.n_values) {
        let grad = &run.series["grad_modular"];
        let qm = &run.series["q_modular"];
        for (k, level) in run.levels.iter().enumerate() {
            let b = boundary_term(&level.field, &pl.p, level.epsilon, &pl.origin)?;
            rows.push(vec![n.to_string(), level.epsilon.to_string(), grad[k].to_string(), qm[k].to_string(), b.to_string()]);
        }
    }
    csv_string(&["n", "epsilon", "grad_modular", "q_modular", "boundary_term"], rows)
}

fn last(v: &[f64]) -> String {
    v.last().map_or(String::new(), f64::to_string)
}

fn cascade_scenario(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let pl = pipeline(cfg)?;
    let result = json!({
        "candidate": solve_summary(&pl.candidate),
        "cascade": cascade_summary(&pl.cascade),
        "origin": pl.origin,
        "origin_source": pl.origin_source,
    });
    Ok(ScenarioOutput {
        error_exit: None,
        converged: pl.converged(),
        summary: vec![
            ("candidate_energy".into(), pl.candidate.energy.to_string()),
            ("final_gap_grad".into(), last(&pl.cascade.gap_grad)),
            ("final_gap_q".into(), last(&pl.cascade.gap_q)),
            ("converged".into(), pl.converged().to_string()),
        ],
        files: vec![("cascade_series.csv".into(), series_csv(&pl)?)],
        result,
    })
}

fn pohozaev(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let pl = pipeline(cfg)?;
    let remainder = remainder_r(&pl.cascade.runs, &pl.p, &pl.mesh, &pl.origin)?;
    let report = pohozaev_terms(&pl.candidate.field, &pl.p, &pl.q, &pl.origin)?.with_remainder(remainder.value);
    let csv = format!("{}\n{}\n", PohozaevReport::CSV_HEADER, report.csv_row());
    let summary = PohozaevReport::CSV_HEADER
        .split(',')
        .zip(report.csv_row().split(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .chain([("converged".to_string(), pl.converged().to_string())])
        .collect();
    let result = json!({
        "report": report,
        "remainder": remainder,
        "candidate": solve_summary(&pl.candidate),
        "cascade": cascade_summary(&pl.cascade),
        "origin_source": pl.origin_source,
    });
    Ok(ScenarioOutput {
        error_exit: None,
        converged: pl.converged(),
        summary,
        files: vec![("pohozaev.csv".into(), csv), ("cascade_series.csv".into(), series_csv(&pl)?)],
        result,
    })
}

fn verdict_scenario(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let c = &cfg.config;
    let (p, q) = (cfg.p()?, cfg.q()?);
    let dim = c.dim.unwrap_or(c.domain.dim());
    let v = verdict(&c.domain, &p, &q, dim, c.origin.as_deref())?;
    let case = to_value(&v.case).as_str().unwrap_or_default().to_string();
    Ok(ScenarioOutput {
        error_exit: None,
        converged: true,
        summary: vec![
            ("applies".into(), v.applies.to_string()),
            ("case".into(), case),
            ("p_plus".into(), v.details.p_plus.to_string()),
            ("q_minus".into(), v.details.q_minus.to_string()),
            ("p_plus_star".into(), v.details.p_plus_star.to_string()),
        ],
        result: to_value(&v),
        files: Vec::new(),
    })
}

/// Seed of sweep run `index`: stream `index` of a ChaCha8 generator keyed by the master seed.
pub fn run_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

struct SweepRow {
    axis_values: Vec<String>,
    seed: u64,
    outcome: Result<ScenarioOutput, CliError>,
}

fn sweep(cfg: &LoadedConfig) -> Result<ScenarioOutput, CliError> {
    let sw = cfg.config.sweep.clone().ok_or_else(|| CliError::Config("missing 'sweep'".into()))?;
    let mut points: Vec<Vec<&serde_json::Value>> = vec![Vec::new()];
    for axis in &sw.axes {
        points = points
            .into_iter()
            .flat_map(|pt| {
                axis.values.iter().map(move |v| {
                    let mut next = pt.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    let master = cfg.seed();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            let seed = run_seed(master, i as u64);
            let outcome = (|| {
                let mut raw = cfg.raw.clone();
                let obj = raw.as_object_mut().ok_or_else(|| CliError::Config("config must be an object".into()))?;
                obj.remove("sweep");
                obj.remove("scenario");
                for (axis, v) in sw.axes.iter().zip(pt) {
                    *raw.pointer_mut(&axis.path).ok_or_else(|| CliError::Config(format!("bad axis '{}'", axis.path)))? = (*v).clone();
                }
                let mut run = LoadedConfig::from_value(raw, cfg.base_dir.clone())?;
                run.apply_seed(Some(seed));
                run.validate_for(sw.scenario)?;
                run_scenario(sw.scenario, &run)
            })();
            SweepRow {
                axis_values: pt.iter().map(|v| v.to_string()).collect(),
                seed,
                outcome,
            }
        })
        .collect();

    let summary_names: Vec<String> = rows
        .iter()
        .find_map(|r| r.outcome.as_ref().ok())
        .map(|o| o.summary.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = vec!["run".into(), "seed".into()];
    header.extend(sw.axes.iter().map(|a| a.path.clone()));
    header.push("status".into());
    header.extend(summary_names.iter().cloned());
    header.push("error".into());
    let mut csv_rows = Vec::new();
    let mut runs_json = Vec::new();
    let (mut all_converged, mut worst_error): (bool, Option<i32>) = (true, None);
    for (i, row) in rows.iter().enumerate() {
        let mut line = vec![i.to_string(), row.seed.to_string()];
        line.extend(row.axis_values.iter().cloned());
        match &row.outcome {
            Ok(out) => {
                all_converged &= out.converged;
                line.push(if out.converged { "ok" } else { "not_converged" }.into());
                line.extend(summary_names.iter().map(|k| {
                    out.summary.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone()).unwrap_or_default()
                }));
                line.push(String::new());
                runs_json.push(json!({ "run": i, "seed": row.seed, "converged": out.converged, "result": out.result }));
            }
            Err(e) => {
                worst_error = Some(worst_error.map_or(e.exit_code(), |w| w.max(e.exit_code())));
                line.push("error".into());
                line.extend(summary_names.iter().map(|_| String::new()));
                line.push(e.to_string());
                runs_json.push(json!({ "run": i, "seed": row.seed, "error": e.to_string() }));
            }
        }
        csv_rows.push(line);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let table = csv_string(&header_refs, csv_rows)?;
    Ok(ScenarioOutput {
        error_exit: worst_error,
        result: json!({
            "scenario": sw.scenario,
            "axes": sw.axes,
            "runs": runs_json,
            "errors": rows.iter().filter(|r| r.outcome.is_err()).count(),
        }),
        converged: all_converged,
        summary: Vec::new(),
        files: vec![("sweep.csv".into(), table)],
    })
}
