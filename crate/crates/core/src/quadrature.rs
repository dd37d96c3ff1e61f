//! Reference quadrature rules on simplices, stored in barycentric coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VexError};

/// A rule on the reference simplex. Weights sum to one; multiply by the cell volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Three points per cell: Gauss-Legendre in 1D, the symmetric degree-2 rule on triangles.
    pub fn default_for(dim: usize) -> Self {
        Self::with_points(dim, 3).expect("three-point rules exist in 1D and 2D")
    }

    /// Rule with the given number of points. 1D: 1..=5 (Gauss-Legendre). 2D: 1, 3, 6, 7.
    pub fn with_points(dim: usize, npoints: usize) -> Result<Self> {
        match dim {
            1 => gauss_legendre(npoints),
            2 => triangle(npoints),
            _ => Err(VexError::InvalidInput(format!("no quadrature for dimension {dim}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    let (xi, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let s = 2.0 * (10.0f64 / 7.0).sqrt();
            let a = (5.0 - s).sqrt() / 3.0;
            let b = (5.0 + s).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => return Err(VexError::InvalidInput(format!("1D Gauss rule with {n} points not available"))),
    };
    let points = xi
        .iter()
        .map(|x| {
            let l1 = 0.5 * (1.0 + x);
            [1.0 - l1, l1, 0.0]
        })
        .collect();
    Ok(QuadratureRule {
        dim: 1,
        points,
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree: 2 * n - 1,
    })
}

fn triangle(n: usize) -> Result<QuadratureRule> {
    fn orbit3(a: f64, w: f64, points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            points.push(p);
            weights.push(w);
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let degree = match n {
        1 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        3 => {
            orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            2
        }
        6 => {
            orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut points, &mut weights);
            orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut points, &mut weights);
            4
        }
        7 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(0.225);
            orbit3(0.470_142_064_105_115, 0.132_394_152_788_506, &mut points, &mut weights);
            orbit3(0.101_286_507_323_456, 0.125_939_180_544_827, &mut points, &mut weights);
            5
        }
        _ => return Err(VexError::InvalidInput(format!("triangle rule with {n} points not available"))),
    };
    Ok(QuadratureRule {
        dim: 2,
        points,
        weights,
        degree,
    })
}
