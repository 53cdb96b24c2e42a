//! Newton projection onto the zero set of a few scalar constraints.

use super::matrix::{dot, solve_dense, SquareMatrix};
use crate::error::{Error, Result};

const MAX_NEWTON: usize = 20;
const RESIDUAL_TOL: f64 = 1e-12;

/// A scalar constraint `g(y) = 0` with its gradient.
pub trait Constraint {
    fn value(&self, y: &[f64]) -> f64;

    fn gradient(&self, y: &[f64], out: &mut [f64]);

    /// Magnitude of the terms that cancel inside `value`; the residual
    /// tolerance is relative to it.
    fn scale(&self, _y: &[f64]) -> f64 {
        1.0
    }
}

/// Closure-backed constraint.
pub struct FnConstraint<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Constraint for FnConstraint<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, y: &[f64]) -> f64 {
        (self.value)(y)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        (self.gradient)(y, out)
    }
}

fn converged(constraints: &[&dyn Constraint], y: &[f64]) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for c in constraints {
        let r = c.value(y).abs();
        worst = worst.max(r);
        if !(r <= RESIDUAL_TOL * c.scale(y).max(1.0)) {
            ok = false;
        }
    }
    (ok, worst)
}

/// Moves `y` along the constraint gradients until every residual is below
/// `1e-12` (relative to the constraint's scale).
pub fn project_to_constraints(y: &[f64], constraints: &[&dyn Constraint]) -> Result<Vec<f64>> {
    let mut y = y.to_vec();
    project_in_place(&mut y, constraints)?;
    Ok(y)
}

pub fn project_in_place(y: &mut [f64], constraints: &[&dyn Constraint]) -> Result<()> {
    let k = constraints.len();
    let n = y.len();
    let mut grads = vec![vec![0.0; n]; k];
    for _ in 0..MAX_NEWTON {
        let (ok, worst) = converged(constraints, y);
        if ok {
            return Ok(());
        }
        if !worst.is_finite() {
            return Err(Error::ProjectionFailure { residual: worst });
        }
        for (c, g) in constraints.iter().zip(grads.iter_mut()) {
            c.gradient(y, g);
        }
        let gram = SquareMatrix::from_fn(k, |i, j| dot(&grads[i], &grads[j]));
        let rhs: Vec<f64> = constraints.iter().map(|c| c.value(y)).collect();
        let coeffs = solve_dense(&gram, &rhs).ok_or(Error::ProjectionFailure { residual: worst })?;
        for (g, a) in grads.iter().zip(&coeffs) {
            for (yi, gi) in y.iter_mut().zip(g) {
                *yi -= a * gi;
            }
        }
    }
    let (ok, worst) = converged(constraints, y);
    if ok {
        Ok(())
    } else {
        Err(Error::ProjectionFailure { residual: worst })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> FnConstraint<impl Fn(&[f64]) -> f64, impl Fn(&[f64], &mut [f64])> {
        FnConstraint {
            value: |y: &[f64]| dot(y, y) - 1.0,
            gradient: |y: &[f64], g: &mut [f64]| {
                for (gi, yi) in g.iter_mut().zip(y) {
                    *gi = 2.0 * yi;
                }
            },
        }
    }

    fn diag_quadric(b: Vec<f64>) -> FnConstraint<impl Fn(&[f64]) -> f64, impl Fn(&[f64], &mut [f64])> {
        let b2 = b.clone();
        FnConstraint {
            value: move |y: &[f64]| y.iter().zip(&b).map(|(x, bi)| bi * x * x).sum::<f64>() - 1.0,
            gradient: move |y: &[f64], g: &mut [f64]| {
                for ((gi, yi), bi) in g.iter_mut().zip(y).zip(&b2) {
                    *gi = 2.0 * bi * yi;
                }
            },
        }
    }

    #[test]
    fn radial_scaling_onto_sphere() {
        let c = unit_sphere();
        let p = project_to_constraints(&[1.0000001, 0.0, 0.0], &[&c]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-13);
        assert_eq!(&p[1..], &[0.0, 0.0]);
    }

    #[test]
    fn point_on_constraint_is_unchanged() {
        let c = unit_sphere();
        let y = [0.6, 0.8, 0.0];
        assert_eq!(project_to_constraints(&y, &[&c]).unwrap(), y.to_vec());
    }

    #[test]
    fn ellipse_projection_residual() {
        // A = diag(1, 4) so B = A⁻¹ = diag(1, 1/4).
        let c = diag_quadric(vec![1.0, 0.25]);
        let p = project_to_constraints(&[1.001, 0.002], &[&c]).unwrap();
        assert!(c.value(&p).abs() <= 1e-12);
        // Idempotent.
        let q = project_to_constraints(&p, &[&c]).unwrap();
        assert!(q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn two_constraints_together() {
        let s = unit_sphere();
        let plane = FnConstraint {
            value: |y: &[f64]| y[0] + y[1] + y[2] - 1.0,
            gradient: |_: &[f64], g: &mut [f64]| g.fill(1.0),
        };
        let p = project_to_constraints(&[0.9, 0.2, 0.05], &[&s, &plane]).unwrap();
        assert!(s.value(&p).abs() <= 1e-12 && plane.value(&p).abs() <= 1e-12);
    }

    #[test]
    fn unreachable_constraint_fails() {
        let c = FnConstraint { value: |y: &[f64]| y[0] * y[0] + 1.0, gradient: |y: &[f64], g: &mut [f64]| g[0] = 2.0 * y[0] };
        assert!(matches!(project_to_constraints(&[0.5], &[&c]), Err(Error::ProjectionFailure { .. })));
    }
}
