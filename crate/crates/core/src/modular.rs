//! The p(.)-modular, the Luxemburg norm and numerical checks of the basic modular/norm relations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VexError};
use crate::exponent::ExponentField;
use crate::fem::{gradient, QuadPoints};
use crate::field::DiscreteField;
use crate::quadrature::QuadratureRule;

/// Default residual tolerance `|rho(u / mu) - 1|` for the Luxemburg bisection.
pub const LUXEMBURG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularResult {
    pub value: f64,
    pub quadrature_order: usize,
}

/// `|f|` and the exponent sampled at quadrature points, with weights: everything a modular or a
/// Luxemburg norm needs.
#[derive(Clone, Debug)]
pub struct ModularSamples {
    pub abs: Vec<f64>,
    pub exponent: Vec<f64>,
    pub weight: Vec<f64>,
    pub degree: usize,
}

impl ModularSamples {
    pub fn of_values(u: &DiscreteField, p: &ExponentField, rule: &QuadratureRule) -> Self {
        let qp = QuadPoints::new(u.mesh(), rule);
        let abs = qp.field_values(u).into_iter().map(f64::abs).collect();
        let exponent = qp.exponent_values(u.mesh(), p).value;
        ModularSamples {
            abs,
            exponent,
            weight: qp.w,
            degree: rule.degree,
        }
    }

    pub fn of_gradients(u: &DiscreteField, p: &ExponentField, rule: &QuadratureRule) -> Self {
        let qp = QuadPoints::new(u.mesh(), rule);
        let g = gradient(u);
        let abs = (0..qp.len()).map(|i| g.norm(qp.cell_of(i))).collect();
        let exponent = qp.exponent_values(u.mesh(), p).value;
        ModularSamples {
            abs,
            exponent,
            weight: qp.w,
            degree: rule.degree,
        }
    }

    /// `sum_i w_i (|f_i| / mu)^{p_i}`
    pub fn modular_scaled(&self, mu: f64) -> f64 {
        self.abs
            .iter()
            .zip(&self.exponent)
            .zip(&self.weight)
            .map(|((a, p), w)| if *a == 0.0 { 0.0 } else { w * (a / mu).powf(*p) })
            .sum()
    }

    pub fn modular(&self) -> f64 {
        self.modular_scaled(1.0)
    }

    pub fn exponent_range(&self) -> (f64, f64) {
        self.exponent
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Bisection for `inf { mu > 0 : rho(f / mu) <= 1 }`; returns `(mu, rho(f / mu) - 1)`.
    pub fn luxemburg(&self, tol: f64) -> Result<(f64, f64)> {
        if !(tol > 0.0) {
            return Err(VexError::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        let sup = self.abs.iter().cloned().fold(0.0, f64::max);
        if sup == 0.0 {
            return Ok((0.0, 0.0));
        }
        let measure: f64 = self.weight.iter().sum();
        let f = |mu: f64| self.modular_scaled(mu) - 1.0;
        let mut lo = sup * 1e-6;
        let mut hi = sup * (1.0 + measure);
        let mut steps = 0;
        while f(hi) > 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Err(VexError::BracketFailure(format!("rho(u/mu) > 1 up to mu = {hi:e}")));
            }
        }
        steps = 0;
        while f(lo) < 0.0 {
            lo *= 0.5;
            steps += 1;
            if steps > 2000 || lo == 0.0 {
                return Err(VexError::BracketFailure(format!("rho(u/mu) < 1 down to mu = {lo:e}")));
            }
        }
        let (mut best_mu, mut best_r) = (hi, f(hi));
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let r = f(mid);
            if r.abs() < best_r.abs() {
                best_mu = mid;
                best_r = r;
            }
            if r.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            if r > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((best_mu, best_r))
    }
}

fn default_rule(u: &DiscreteField) -> QuadratureRule {
    QuadratureRule::default_for(u.mesh().dim())
}

/// `rho_p(u) = integral of |u|^{p(x)}`.
pub fn modular(u: &DiscreteField, p: &ExponentField) -> ModularResult {
    modular_with(u, p, &default_rule(u))
}

pub fn modular_with(u: &DiscreteField, p: &ExponentField, rule: &QuadratureRule) -> ModularResult {
    let s = ModularSamples::of_values(u, p, rule);
    ModularResult {
        value: s.modular(),
        quadrature_order: rule.degree,
    }
}

/// `rho_p(|grad u|) = integral of |grad u|^{p(x)}` with per-cell P1 gradients.
pub fn gradient_modular(u: &DiscreteField, p: &ExponentField) -> ModularResult {
    gradient_modular_with(u, p, &default_rule(u))
}

pub fn gradient_modular_with(u: &DiscreteField, p: &ExponentField, rule: &QuadratureRule) -> ModularResult {
    let s = ModularSamples::of_gradients(u, p, rule);
    ModularResult {
        value: s.modular(),
        quadrature_order: rule.degree,
    }
}

/// Luxemburg norm `inf { mu > 0 : rho(u / mu) <= 1 }` by bisection on mu.
pub fn luxemburg_norm(u: &DiscreteField, p: &ExponentField, tol: f64) -> Result<f64> {
    Ok(ModularSamples::of_values(u, p, &default_rule(u)).luxemburg(tol)?.0)
}

/// Luxemburg norm of `|grad u|`, the norm of W_0^{1,p(.)}.
pub fn gradient_luxemburg_norm(u: &DiscreteField, p: &ExponentField, tol: f64) -> Result<f64> {
    Ok(ModularSamples::of_gradients(u, p, &default_rule(u)).luxemburg(tol)?.0)
}

/// Outcome of checking the unit-ball equivalence and the power sandwich between
/// the norm and the modular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularRelations {
    pub norm: f64,
    pub modular: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `sign(||u|| - 1) == sign(rho(u) - 1)` (with `RELATION_TOL` for equality)
    pub unit_ball_ok: bool,
    /// `rho(u / ||u||) - 1` at the computed norm (0 for u = 0)
    pub normalized_residual: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `rho - lower_bound`
    pub slack_lower: f64,
    /// `upper_bound - rho`
    pub slack_upper: f64,
    pub sandwich_ok: bool,
    pub pass: bool,
}

/// Relative slack allowed in the Hoelder inequality for rounding in the two norms.
pub const HOLDER_TOL: f64 = 1e-10;

/// Relative tolerance for equality cases in the relation checks.
pub const RELATION_TOL: f64 = 1e-8;

pub fn verify_modular_relations(u: &DiscreteField, p: &ExponentField) -> Result<ModularRelations> {
    let s = ModularSamples::of_values(u, p, &default_rule(u));
    let rho = s.modular();
    let (norm, residual) = s.luxemburg(LUXEMBURG_TOL)?;
    let (p_minus, p_plus) = s.exponent_range();
    let class = |v: f64| {
        if (v - 1.0).abs() <= RELATION_TOL {
            0
        } else if v < 1.0 {
            -1
        } else {
            1
        }
    };
    let unit_ball_ok = class(norm) == class(rho);
    let (lower, upper) = if norm == 0.0 {
        (0.0, 0.0)
    } else if norm > 1.0 {
        (norm.powf(p_minus), norm.powf(p_plus))
    } else {
        (norm.powf(p_plus), norm.powf(p_minus))
    };
    let slack_lower = rho - lower;
    let slack_upper = upper - rho;
    let scale = RELATION_TOL * rho.abs().max(1.0);
    let sandwich_ok = slack_lower >= -scale && slack_upper >= -scale;
    Ok(ModularRelations {
        norm,
        modular: rho,
        p_minus,
        p_plus,
        unit_ball_ok,
        normalized_residual: residual,
        lower_bound: lower,
        upper_bound: upper,
        slack_lower,
        slack_upper,
        sandwich_ok,
        pass: unit_ball_ok && sandwich_ok && residual.abs() <= RELATION_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub pass: bool,
}

/// `|integral u v| <= (1/p^- + 1/p'^-) ||u||_{p(.)} ||v||_{p'(.)}`.
pub fn holder_check(u: &DiscreteField, v: &DiscreteField, p: &ExponentField) -> Result<HolderCheck> {
    if !u.same_mesh(v) {
        return Err(VexError::InvalidInput("Hoelder check needs fields on the same mesh".into()));
    }
    let rule = default_rule(u);
    let qp = QuadPoints::new(u.mesh(), &rule);
    let uv = qp.field_values(u);
    let vv = qp.field_values(v);
    let lhs = qp.sum(|i| uv[i] * vv[i])?.abs();
    let su = ModularSamples::of_values(u, p, &rule);
    let (p_minus, p_plus) = su.exponent_range();
    if p_minus <= 1.0 {
        return Err(VexError::NonElliptic { value: p_minus });
    }
    let pc = p.conjugate()?;
    let sv = ModularSamples::of_values(v, &pc, &rule);
    let pc_minus = p_plus / (p_plus - 1.0);
    let nu = su.luxemburg(1e-15)?.0;
    let nv = sv.luxemburg(1e-15)?.0;
    let rhs = (1.0 / p_minus + 1.0 / pc_minus) * nu * nv;
    let slack = rhs - lhs;
    Ok(HolderCheck {
        lhs,
        rhs,
        slack,
        pass: slack >= -HOLDER_TOL * rhs.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::mesh::build_mesh;
    use std::sync::Arc;

    fn unit_mesh(h: f64) -> Arc<crate::mesh::Mesh> {
        Arc::new(build_mesh(&Domain::interval(0.0, 1.0).unwrap(), h).unwrap())
    }

    #[test]
    fn modular_examples() {
        let m = unit_mesh(1e-3);
        let one = DiscreteField::interpolate(m.clone(), |_| 1.0);
        let p = ExponentField::affine(2.0, vec![1.0]);
        assert!((modular(&one, &p).value - 1.0).abs() < 1e-12);
        let two = DiscreteField::interpolate(m.clone(), |_| 2.0);
        // closed form: integral_0^1 2^{2+x} dx = 4 / ln 2
        assert!((modular(&two, &p).value - 4.0 / std::f64::consts::LN_2).abs() < 1e-10);
        assert_eq!(modular(&DiscreteField::zeros(m), &p).value, 0.0);
    }

    #[test]
    fn gradient_modular_examples() {
        let m = unit_mesh(1e-3);
        let lin = DiscreteField::interpolate(m.clone(), |x| x[0]);
        assert!((gradient_modular(&lin, &ExponentField::affine(1.5, vec![2.0])).value - 1.0).abs() < 1e-12);
        let s = DiscreteField::interpolate(m.clone(), |x| (std::f64::consts::PI * x[0]).sin());
        let v = gradient_modular(&s, &ExponentField::constant(2.0)).value;
        assert!((v - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-5);
        assert_eq!(gradient_modular(&DiscreteField::interpolate(m, |_| 3.0), &ExponentField::constant(2.0)).value, 0.0);
    }

    #[test]
    fn luxemburg_constant_exponent_is_lp_norm() {
        let m = Arc::new(build_mesh(&Domain::square(0.0, 1.0).unwrap(), 0.1).unwrap());
        let u = DiscreteField::interpolate(m, |x| 1.0 + x[0] * x[1] - 3.0 * x[1]);
        for p in [1.3, 2.0, 3.7] {
            let lp = modular(&u, &ExponentField::constant(p)).value.powf(1.0 / p);
            let n = luxemburg_norm(&u, &ExponentField::constant(p), 1e-12).unwrap();
            assert!((n - lp).abs() < 1e-10 * lp, "p={p}");
        }
    }

    #[test]
    fn luxemburg_variable_exponent_matches_scalar_bisection_oracle() {
        let m = unit_mesh(1e-3);
        let two = DiscreteField::interpolate(m.clone(), |_| 2.0);
        let p = ExponentField::affine(2.0, vec![1.0]);
        let n = luxemburg_norm(&two, &p, 1e-12).unwrap();
        // oracle: g(mu) = integral (2/mu)^{2+x} dx = (2/mu)^2 (a - 1)/ln a, a = 2/mu; bisection to 1e-14
        let g = |mu: f64| {
            let a: f64 = 2.0 / mu;
            a * a * (a - 1.0) / a.ln() - 1.0
        };
        let (mut lo, mut hi) = (1.0, 4.0);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((n - lo).abs() < 1e-9, "{n} vs {lo}");
        let one = DiscreteField::interpolate(m.clone(), |_| 1.0);
        assert!((luxemburg_norm(&one, &p, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(luxemburg_norm(&DiscreteField::zeros(m), &p, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn relations_examples() {
        let m = unit_mesh(1e-3);
        let p = ExponentField::affine(2.0, vec![1.0]);
        let three = DiscreteField::interpolate(m.clone(), |_| 3.0);
        let r = verify_modular_relations(&three, &p).unwrap();
        assert!(r.pass && r.norm > 1.0);
        let ratio = r.modular.ln() / r.norm.ln();
        assert!((2.0..=3.0).contains(&ratio));
        let r0 = verify_modular_relations(&DiscreteField::zeros(m.clone()), &p).unwrap();
        assert!(r0.pass);
        // rescale to unit modular: norm must be 1
        let u = DiscreteField::interpolate(m, |x| 0.5 + x[0]);
        let n = luxemburg_norm(&u, &p, 1e-13).unwrap();
        let r1 = verify_modular_relations(&u.scaled(1.0 / n), &p).unwrap();
        assert!((r1.modular - 1.0).abs() < 1e-10);
        assert!((r1.norm - 1.0).abs() < 1e-10 && r1.pass);
    }

    #[test]
    fn holder_examples() {
        let m = unit_mesh(1e-2);
        let u = DiscreteField::interpolate(m.clone(), |x| (3.0 * x[0]).sin());
        let h = holder_check(&u, &DiscreteField::zeros(m.clone()), &ExponentField::constant(2.0)).unwrap();
        assert!(h.pass && h.lhs == 0.0 && h.rhs == 0.0);
        let h = holder_check(&u, &u, &ExponentField::constant(2.0)).unwrap();
        // constant p = 2: the constant is 1/2 + 1/2 and equality holds for v = u
        assert!((h.rhs - h.lhs).abs() < 1e-9 * h.lhs && h.pass, "{h:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_field(seed: u64, m: &Arc<crate::mesh::Mesh>) -> DiscreteField {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scale = 10f64.powf(rng.gen_range(-1.5..1.5));
            DiscreteField::new(m.clone(), (0..m.num_nodes()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn homogeneity(seed in 0u64..10_000, lambda in -20.0f64..20.0) {
                let m = unit_mesh(0.02);
                let p = ExponentField::affine(1.5, vec![1.2]);
                let u = random_field(seed, &m);
                let n = luxemburg_norm(&u, &p, 1e-12).unwrap();
                let nl = luxemburg_norm(&u.scaled(lambda), &p, 1e-12).unwrap();
                prop_assert!((nl - lambda.abs() * n).abs() <= 1e-9 * (1.0 + lambda.abs() * n));
            }

            #[test]
            fn triangle_inequality(s1 in 0u64..10_000, s2 in 0u64..10_000) {
                let m = unit_mesh(0.02);
                let p = ExponentField::radial(1.8, 1.0, vec![0.3]);
                let (u, v) = (random_field(s1, &m), random_field(s2, &m));
                let w = u.axpy(1.0, &v);
                let lhs = luxemburg_norm(&w, &p, 1e-12).unwrap();
                let rhs = luxemburg_norm(&u, &p, 1e-12).unwrap() + luxemburg_norm(&v, &p, 1e-12).unwrap();
                prop_assert!(lhs <= rhs + 1e-9);
            }
        }
    }
}
