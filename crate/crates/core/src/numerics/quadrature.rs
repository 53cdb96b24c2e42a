use crate::error::{Error, Result};

/// Cumulative trapezoid rule: `G_i ≈ ∫_{t_0}^{t_i} g dt`, with `G_0 = 0`.
pub fn cumulative_quadrature(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            if !(dt >= 0.0) {
                return Err(Error::InvalidSampling { index: i });
            }
            acc += 0.5 * dt * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear_are_exact() {
        let t = [0.0, 0.1, 0.35, 0.5, 1.0];
        assert_eq!(*cumulative_quadrature(&t, &[1.0; 5]).unwrap().last().unwrap(), 1.0);
        let grid: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let g = cumulative_quadrature(&grid, &grid).unwrap();
        assert_eq!(*g.last().unwrap(), 0.5);
    }

    #[test]
    fn rational_integrand_converges() {
        // ∫₀¹⁰⁰ (1+t)⁻² dt = 100/101.
        let n = 400_000;
        let grid: Vec<f64> = (0..=n).map(|k| 100.0 * (k as f64 / n as f64).powi(2)).collect();
        let vals: Vec<f64> = grid.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let g = cumulative_quadrature(&grid, &vals).unwrap();
        assert!((g.last().unwrap() - 100.0 / 101.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_unordered_samples() {
        assert_eq!(
            cumulative_quadrature(&[0.0, 1.0, 0.5], &[1.0, 1.0, 1.0]),
            Err(Error::InvalidSampling { index: 2 })
        );
        assert!(cumulative_quadrature(&[0.0], &[]).is_err());
    }
}
