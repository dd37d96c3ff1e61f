//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p vexlab-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vexlab_core::modular::{luxemburg_norm, verify_modular_relations};
use vexlab_core::solvers::phi_eps;
use vexlab_core::{
    apply_aeps, build_mesh, cascade, holder_check, modular, nehari_candidate, pohozaev_terms, remainder_r,
    rhs_radial_identity_check, solve_regularized, verdict, verify_pucci_serrin, CascadeResult, DiscreteField, Domain,
    ExponentField, Mesh, SolveConfig, SolveResult, VerdictCase,
};

const RELATION_TOL: f64 = 1e-8;
const LP_NORM_TOL: f64 = 1e-8;
const GRAD_CHECK_TOL: f64 = 1e-5;
const ORDER_RATIO: (f64, f64) = (3.5, 4.5);
const PS_GAP_RATIO: f64 = 0.7;
const C4_GAP: f64 = 1e-3;
const TERM_TOL: f64 = 1e-4;
const NEHARI_GAP: f64 = 1e-6;
const NEHARI_RESIDUAL: f64 = 1e-6;
const POHOZAEV_TOTAL: f64 = 1e-2;
const CASCADE_GAP: f64 = 1e-4;
/// Mesh size for criteria 10 and 11; at 1e-3 the cascade gaps sit just above `CASCADE_GAP`.
const EXISTENCE_H: f64 = 5e-4;
const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn interval(h: f64) -> Arc<Mesh> {
    Arc::new(build_mesh(&Domain::interval(0.0, 1.0).unwrap(), h).unwrap())
}

fn square(h: f64) -> Arc<Mesh> {
    Arc::new(build_mesh(&Domain::square(0.0, 1.0).unwrap(), h).unwrap())
}

fn c(v: f64) -> ExponentField {
    ExponentField::constant(v)
}

fn random_field(m: &Arc<Mesh>, rng: &mut ChaCha8Rng, zero_trace: bool) -> DiscreteField {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let vals = (0..m.num_nodes()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let u = DiscreteField::new(m.clone(), vals).unwrap();
    if zero_trace {
        u.with_zero_trace()
    } else {
        u
    }
}

fn random_exponent(dim: usize, rng: &mut ChaCha8Rng) -> ExponentField {
    let base = rng.gen_range(1.1..3.0);
    if rng.gen_bool(0.5) {
        ExponentField::affine(base, (0..dim).map(|_| rng.gen_range(0.0..0.5)).collect())
    } else {
        ExponentField::radial(base, rng.gen_range(0.0..1.0), (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
    }
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "))
}

fn fixed(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "))
}

fn l2(a: &DiscreteField, b: &DiscreteField) -> f64 {
    modular(&a.axpy(-1.0, b), &c(2.0)).value.sqrt()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let meshes = [interval(0.05), square(0.2)];
    let (mut failures, mut worst_residual) = (0, 0.0f64);
    for trial in 0..200 {
        let m = &meshes[trial % 2];
        let p = random_exponent(m.dim(), &mut rng);
        let u = random_field(m, &mut rng, false);
        let r = verify_modular_relations(&u, &p).unwrap();
        let unit = verify_modular_relations(&u.scaled(1.0 / r.norm), &p).unwrap();
        let residual = (unit.modular - 1.0).abs();
        worst_residual = worst_residual.max(residual);
        if !(r.pass && r.unit_ball_ok && r.sandwich_ok && residual <= RELATION_TOL) {
            failures += 1;
        }
    }
    let mut worst_lp = 0.0f64;
    for trial in 0..50 {
        let m = &meshes[trial % 2];
        let pv = rng.gen_range(1.1..6.0);
        let u = random_field(m, &mut rng, false);
        let norm = luxemburg_norm(&u, &c(pv), 1e-14).unwrap();
        let closed = modular(&u, &c(pv)).value.powf(1.0 / pv);
        worst_lp = worst_lp.max((norm - closed).abs() / closed);
    }
    outcome(
        failures == 0 && worst_lp <= LP_NORM_TOL,
        format!("{failures}/200 relation failures, max |rho(u/|u|)-1| = {worst_residual:.1e}, max L^p mismatch = {worst_lp:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let meshes = [interval(0.05), square(0.25)];
    let ps = [ExponentField::affine(2.0, vec![1.0]), ExponentField::affine(2.0, vec![1.0, 0.0])];
    let (mut failures, mut min_rel) = (0, f64::INFINITY);
    for trial in 0..1000 {
        let k = trial % 2;
        let u = random_field(&meshes[k], &mut rng, false);
        let v = random_field(&meshes[k], &mut rng, false);
        let h = holder_check(&u, &v, &ps[k]).unwrap();
        min_rel = min_rel.min(h.slack / h.rhs);
        if h.slack.is_nan() || h.slack < 0.0 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/1000 negative slacks, min slack/rhs = {min_rel:.3}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let meshes = [interval(0.05), square(0.2)];
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let m = &meshes[trial % 2];
        let p = random_exponent(m.dim(), &mut rng);
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        let z = random_field(m, &mut rng, true);
        let d = random_field(m, &mut rng, true);
        let a = apply_aeps(&z, &p, eps).unwrap();
        let exact: f64 = a.values().iter().zip(d.values()).map(|(x, y)| x * y).sum();
        let t = 1e-6 * (1.0 + z.sup_norm()) / (1.0 + d.sup_norm());
        let fd = (phi_eps(&z.axpy(t, &d), &p, eps).unwrap() - phi_eps(&z.axpy(-t, &d), &p, eps).unwrap()) / (2.0 * t);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-12));
    }
    outcome(worst <= GRAD_CHECK_TOL, format!("max relative mismatch = {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let cfg = SolveConfig::default();
    let mut errs = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let m = interval(h);
        let v = DiscreteField::interpolate(m.clone(), |x| (1.0 + PI * PI) * (PI * x[0]).sin()).with_zero_trace();
        let r = solve_regularized(&v, &c(2.0), &c(2.0), 1e-6, &cfg, None).unwrap();
        if !r.converged {
            return outcome(false, format!("solve did not converge at h = {h}"));
        }
        errs.push(l2(&r.field, &DiscreteField::interpolate(m, |x| (PI * x[0]).sin())));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (ORDER_RATIO.0..=ORDER_RATIO.1).contains(r));
    outcome(pass, format!("L2 errors {}, ratios {}", sci(&errs), fixed(&ratios)))
}

fn criterion_5() -> Outcome {
    let m = square(0.1);
    let p = ExponentField::affine(1.7, vec![0.6, 0.3]);
    let q = ExponentField::affine(1.5, vec![0.0, 0.5]);
    let v = DiscreteField::interpolate(m.clone(), |x| 30.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (1.0 + x[0])).with_zero_trace();
    let cfg = SolveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut runs: Vec<SolveResult> = Vec::new();
    for _ in 0..5 {
        let init = random_field(&m, &mut rng, true);
        runs.push(solve_regularized(&v, &p, &q, 1e-3, &cfg, Some(&init)).unwrap());
    }
    let all_converged = runs.iter().all(|r| r.converged);
    let max_rise = runs
        .iter()
        .flat_map(|r| r.series["energy"].windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = runs[1..].iter().map(|r| l2(&r.field, &runs[0].field)).fold(0.0, f64::max);
    outcome(
        all_converged && spread <= 10.0 * cfg.grad_tol && max_rise <= 0.0,
        format!("converged {all_converged}, max L2 spread = {spread:.2e}, max energy change per step = {max_rise:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut gaps = Vec::new();
    for h in [0.04, 0.02, 0.01, 0.005] {
        let m = interval(h);
        let w = DiscreteField::interpolate(m.clone(), |x| (PI * x[0]).sin()).with_zero_trace();
        let v = DiscreteField::interpolate(m, |x| (1.0 + PI * PI) * (PI * x[0]).sin());
        gaps.push(verify_pucci_serrin(&w, &c(2.0), &c(2.0), &v, 0.0, 0.0, &[0.0]).unwrap().gap);
    }
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(ratios.iter().all(|&r| r < PS_GAP_RATIO), format!("gaps {}, ratios {}", sci(&gaps), fixed(&ratios)))
}

fn criterion_7() -> Outcome {
    let m = interval(1e-3);
    let u = DiscreteField::interpolate(m, |x| (PI * x[0]).sin()).with_zero_trace();
    let chk = rhs_radial_identity_check(&u, &c(2.0), &[0.0]).unwrap();
    let near = (chk.lhs + 0.25).abs() <= C4_GAP && (chk.rhs + 0.25).abs() <= C4_GAP;
    outcome(
        chk.gap <= C4_GAP && near,
        format!("lhs = {:.8}, rhs = {:.8}, gap = {:.2e}", chk.lhs, chk.rhs, chk.gap),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let meshes = [interval(0.02), square(0.2)];
    let mut exact_zero = true;
    for trial in 0..20 {
        let m = &meshes[trial % 2];
        let u = random_field(m, &mut rng, true);
        let o: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = pohozaev_terms(&u, &c(rng.gen_range(1.2..3.0)), &c(rng.gen_range(1.2..6.0)), &o).unwrap();
        exact_zero &= r.t3 == 0.0 && r.t4 == 0.0;
    }
    let m = interval(1e-3);
    let u = DiscreteField::interpolate(m, |x| (PI * x[0]).sin()).with_zero_trace();
    let r = pohozaev_terms(&u, &c(2.0), &c(2.0), &[0.0]).unwrap();
    let (e1, e2) = ((r.t1 + 0.25).abs(), (r.t2 + PI * PI / 4.0).abs());
    outcome(
        exact_zero && r.t3 == 0.0 && r.t4 == 0.0 && e1 <= TERM_TOL && e2 <= TERM_TOL,
        format!("T3 = T4 = 0: {exact_zero}; T1 = {:.8} (err {e1:.1e}), T2 = {:.8} (err {e2:.1e})", r.t1, r.t2),
    )
}

fn criterion_9() -> Outcome {
    let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
    let o = [0.0; 3];
    let cases: Vec<VerdictCase> = [4.0, 5.0, 6.0, 7.0]
        .iter()
        .map(|&q| verdict(&ball, &c(2.0), &c(q), 3, Some(&o)).unwrap().case)
        .collect();
    let sweep_ok = cases == [VerdictCase::None, VerdictCase::None, VerdictCase::II, VerdictCase::I];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let mut violations = 0;
    for _ in 0..100 {
        let p = rng.gen_range(1.05..2.95);
        let q = rng.gen_range(1.1..15.0);
        let base = verdict(&ball, &c(p), &c(q), 3, Some(&o)).unwrap();
        let more_q = verdict(&ball, &c(p), &c(q + rng.gen_range(0.0..3.0)), 3, Some(&o)).unwrap();
        let less_p = verdict(&ball, &c(1.0 + (p - 1.0) * rng.gen_range(0.5..1.0)), &c(q), 3, Some(&o)).unwrap();
        let expect_i = q > 3.0 * p / (3.0 - p) + 1e-9;
        if (base.case == VerdictCase::I) != expect_i
            || (base.case == VerdictCase::I && (more_q.case != VerdictCase::I || less_p.case != VerdictCase::I))
        {
            violations += 1;
        }
    }
    outcome(sweep_ok && violations == 0, format!("sweep q = 4,5,6,7 -> {cases:?}; {violations}/100 monotonicity violations"))
}

struct Existence {
    candidate: SolveResult,
    cascade: CascadeResult,
    mesh: Arc<Mesh>,
    elapsed: Duration,
}

fn existence_run() -> Existence {
    let start = Instant::now();
    let mesh = interval(EXISTENCE_H);
    let cfg = SolveConfig::default();
    let candidate = nehari_candidate(&c(2.0), &c(4.0), mesh.clone(), &cfg).unwrap();
    let cascade = cascade(&candidate.field, &c(2.0), &c(4.0), &cfg).unwrap();
    Existence {
        candidate,
        cascade,
        mesh,
        elapsed: start.elapsed(),
    }
}

/// Weak residual computed directly from the stiffness action and a separately assembled cubic load.
fn weak_residual(u: &DiscreteField) -> f64 {
    let m = u.mesh();
    let a = apply_aeps(u, &c(2.0), 1e-12).unwrap();
    let mut load = vec![0.0; m.num_nodes()];
    // three-point Gauss on each cell, exact for the degree-4 integrand u^3 phi
    let r = 0.5 * 0.6f64.sqrt();
    let pts = [(0.5, 8.0 / 18.0), (0.5 - r, 5.0 / 18.0), (0.5 + r, 5.0 / 18.0)];
    for cell in 0..m.num_cells() {
        let nodes = m.cell(cell);
        let (x0, x1) = (m.nodes()[nodes[0]][0], m.nodes()[nodes[1]][0]);
        let len = (x1 - x0).abs();
        let (u0, u1) = (u.values()[nodes[0]], u.values()[nodes[1]]);
        for (s, w) in pts {
            let val = (1.0 - s) * u0 + s * u1;
            load[nodes[0]] += w * len * val.powi(3) * (1.0 - s);
            load[nodes[1]] += w * len * val.powi(3) * s;
        }
    }
    let mass = m.lumped_mass();
    (0..m.num_nodes())
        .filter(|&i| !m.is_boundary_node(i))
        .map(|i| (a.values()[i] - load[i]).powi(2) / mass[i])
        .sum::<f64>()
        .sqrt()
}

fn criterion_10(run: &Existence) -> Outcome {
    let cand = &run.candidate;
    let gap = cand.diagnostics["identity_gap"];
    let residual = weak_residual(&cand.field);
    let nontrivial = cand.diagnostics["grad_luxemburg"] > 1e-3;
    let terms = pohozaev_terms(&cand.field, &c(2.0), &c(4.0), &[0.5]).unwrap();
    let r = remainder_r(&run.cascade.runs, &c(2.0), &run.mesh, &[0.5]).unwrap();
    let report = terms.with_remainder(r.value);
    let formula = verdict(&Domain::interval(0.0, 1.0).unwrap(), &c(2.0), &c(4.0), 1, Some(&[0.5]));
    outcome(
        cand.converged && nontrivial && gap <= NEHARI_GAP && residual <= NEHARI_RESIDUAL && report.total <= POHOZAEV_TOTAL,
        format!(
            "sup|u| = {:.5}, identity gap = {gap:.1e}, weak residual = {residual:.1e}, Pohozaev total = {:.2e} (T1+T2 = {:.5}, R = {:.5}); N = 1 verdict: {}",
            cand.field.sup_norm(),
            report.total,
            report.t1 + report.t2,
            report.r_proxy,
            match formula {
                Ok(v) => format!("{:?}", v.case),
                Err(e) => e.to_string(),
            }
        ),
    )
}

fn criterion_11(run: &Existence) -> Outcome {
    let cas = &run.cascade;
    let tail = |g: &[f64]| g[g.len().saturating_sub(3)..].windows(2).all(|w| w[1] <= w[0]);
    let (gg, gq) = (*cas.gap_grad.last().unwrap(), *cas.gap_q.last().unwrap());
    outcome(
        cas.converged() && gg <= CASCADE_GAP && gq <= CASCADE_GAP && tail(&cas.gap_grad) && tail(&cas.gap_q),
        format!("n = {:?}: grad gaps {}, q gaps {}", cas.n_values, sci(&cas.gap_grad), sci(&cas.gap_q)),
    )
}

fn main() -> ExitCode {
    type Check = Box<dyn Fn() -> Outcome>;
    let checks: Vec<(u32, &str, u64, Check)> = vec![
        (1, "modular and Luxemburg norm relations", 30, Box::new(criterion_1)),
        (2, "Hoelder inequality with p = 2 + x1", 30, Box::new(criterion_2)),
        (3, "A_eps is the gradient of phi_eps", 10, Box::new(criterion_3)),
        (4, "second-order convergence of the regularized solver", 60, Box::new(criterion_4)),
        (5, "uniqueness and monotone energy from random starts", 60, Box::new(criterion_5)),
        (6, "Pucci-Serrin gap under refinement", 120, Box::new(criterion_6)),
        (7, "source-term radial identity", 10, Box::new(criterion_7)),
        (8, "Pohozaev term structure", 10, Box::new(criterion_8)),
        (9, "verdict sweep and monotonicity", 5, Box::new(criterion_9)),
    ];
    let mut all = true;
    let mut report = |id: u32, name: &str, budget: u64, out: Outcome, elapsed: Duration| {
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        all &= pass;
        println!(
            "criterion {id:>2} {} {name} [{:.2} s / {budget} s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    };
    for (id, name, budget, check) in checks {
        let start = Instant::now();
        let out = check();
        report(id, name, budget, out, start.elapsed());
    }
    let run = existence_run();
    let start = Instant::now();
    let out = criterion_10(&run);
    report(10, "nontrivial subcritical candidate and Pohozaev balance", 120, out, run.elapsed + start.elapsed());
    let start = Instant::now();
    let out = criterion_11(&run);
    report(11, "cascade gaps for the candidate", 300, out, run.elapsed + start.elapsed());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
