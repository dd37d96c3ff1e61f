//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use vexlab_core::{build_mesh, DiscreteField, Domain, ExponentField, Mesh};

pub fn unit_interval(h: f64) -> Arc<Mesh> {
    Arc::new(build_mesh(&Domain::interval(0.0, 1.0).expect("valid interval"), h).expect("meshable"))
}

pub fn unit_square(h: f64) -> Arc<Mesh> {
    Arc::new(build_mesh(&Domain::square(0.0, 1.0).expect("valid square"), h).expect("meshable"))
}

/// `prod_k sin(pi x_k)` scaled by `amplitude`; vanishes on the boundary of the unit cube.
pub fn sine_bump(mesh: &Arc<Mesh>, amplitude: f64) -> DiscreteField {
    let dim = mesh.dim();
    DiscreteField::interpolate(mesh.clone(), |x| amplitude * (0..dim).map(|k| (PI * x[k]).sin()).product::<f64>()).with_zero_trace()
}

/// A smooth non-constant exponent with range inside `[1.5, 2.5]`.
pub fn variable_exponent(dim: usize) -> ExponentField {
    ExponentField::radial(1.5, 1.0, vec![0.5; dim])
}
