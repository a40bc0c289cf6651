//! Finite-difference verification of analytic gradients.
//!
//! Central differences `(f(t+e) - f(t-e)) / 2e` are compared per parameter
//! against the analytic gradient. ReLU and max-pool losses are piecewise
//! smooth; when a perturbation straddles a kink the central-difference
//! estimate stops converging quadratically. Suspect coordinates are probed
//! again at `e/2`: if the two numeric estimates disagree with each other the
//! coordinate is counted in `kinks_skipped` and excluded from the maximum.

use crate::error::{Error, Result};
use crate::util::{seeded_permutation, seeded_rng};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check at most this many randomly chosen coordinates (None = all).
    pub max_params: Option<usize>,
    pub seed: u64,
    /// How many worst offenders to keep in the report.
    pub keep_worst: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            max_params: None,
            seed: 0,
            keep_worst: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorstParam {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Number of coordinates actually checked.
    pub parameter_count: usize,
    pub params_total: usize,
    pub kinks_skipped: usize,
    pub worst: Vec<WorstParam>,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Checks `analytic` against central differences of `loss` at `params`.
///
/// `loss` must be a pure function of the parameter vector. Epsilon must lie
/// in (0, 1e-2]; a non-finite loss anywhere aborts with a numeric error.
pub fn grad_check<F>(
    mut loss: F,
    params: &mut [f64],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(opts.epsilon > 0.0 && opts.epsilon <= 1e-2) {
        return Err(Error::Argument(format!(
            "grad_check epsilon {} outside (0, 1e-2]",
            opts.epsilon
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::Argument(format!(
            "grad_check: {} params but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }

    let total = params.len();
    let coords: Vec<usize> = match opts.max_params {
        Some(m) if m < total => seeded_permutation(total, opts.seed)[..m].to_vec(),
        _ => (0..total).collect(),
    };

    let mut probe = |params: &mut [f64], i: usize, eps: f64| -> Result<f64> {
        let saved = params[i];
        params[i] = saved + eps;
        let up = loss(params)?;
        params[i] = saved - eps;
        let down = loss(params)?;
        params[i] = saved;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss while probing parameter {i}"
            )));
        }
        Ok((up - down) / (2.0 * eps))
    };

    let mut max_rel = 0.0f64;
    let mut kinks = 0usize;
    let mut worst: Vec<WorstParam> = Vec::new();
    for &i in &coords {
        let numeric = probe(params, i, opts.epsilon)?;
        let mut rel = rel_error(analytic[i], numeric);
        if rel > 1e-5 {
            // suspicious: re-probe at half step to separate kinks from bugs
            let numeric_half = probe(params, i, opts.epsilon / 2.0)?;
            if rel_error(numeric, numeric_half) > 1e-2 {
                kinks += 1;
                continue;
            }
            rel = rel.min(rel_error(analytic[i], numeric_half));
        }
        max_rel = max_rel.max(rel);
        if worst.len() < opts.keep_worst
            || rel > worst.last().map(|w| w.rel_error).unwrap_or(0.0)
        {
            worst.push(WorstParam {
                index: i,
                analytic: analytic[i],
                numeric,
                rel_error: rel,
            });
            worst.sort_by(|a, b| b.rel_error.partial_cmp(&a.rel_error).unwrap());
            worst.truncate(opts.keep_worst);
        }
    }

    Ok(GradCheckReport {
        max_relative_error: max_rel,
        parameter_count: coords.len(),
        params_total: total,
        kinks_skipped: kinks,
        worst,
    })
}

/// Convenience: uniformly random parameter vector in [-.5, .5).
pub fn random_params(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::layers::softmax_cross_entropy;
    use crate::numerics::tensor::Tensor;

    #[test]
    fn linear_loss_is_exact() {
        let coeffs = random_params(12, 3);
        let mut params = random_params(12, 4);
        let analytic = coeffs.clone();
        let c = coeffs.clone();
        let report = grad_check(
            move |p| Ok(p.iter().zip(&c).map(|(a, b)| a * b).sum()),
            &mut params,
            &analytic,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.parameter_count, 12);
        assert!(report.max_relative_error < 1e-10, "{report:?}");
    }

    #[test]
    fn single_layer_softmax_classifier() {
        // 4 inputs, 5 classes -> 20 weight parameters, one fixed sample
        let x = random_params(4, 7);
        let label = 2usize;
        let loss = move |p: &[f64]| -> crate::Result<f64> {
            let w = Tensor::new(vec![4, 5], p.to_vec())?;
            let mut logits = Tensor::<f64>::zeros(vec![1, 5]);
            for i in 0..4 {
                for j in 0..5 {
                    logits.as_mut_slice()[j] += x[i] * w.as_slice()[i * 5 + j];
                }
            }
            Ok(softmax_cross_entropy(&logits, &[label])?.0)
        };
        let mut params = random_params(20, 8);
        // analytic gradient: x^T (softmax - onehot)
        let w = Tensor::new(vec![4, 5], params.clone()).unwrap();
        let x2 = random_params(4, 7);
        let mut logits = Tensor::<f64>::zeros(vec![1, 5]);
        for i in 0..4 {
            for j in 0..5 {
                logits.as_mut_slice()[j] += x2[i] * w.as_slice()[i * 5 + j];
            }
        }
        let (_, dlogits) = softmax_cross_entropy(&logits, &[label]).unwrap();
        let mut analytic = vec![0.0; 20];
        for i in 0..4 {
            for j in 0..5 {
                analytic[i * 5 + j] = x2[i] * dlogits.as_slice()[j];
            }
        }
        let report = grad_check(loss, &mut params, &analytic, &GradCheckOptions::default()).unwrap();
        assert_eq!(report.parameter_count, 20);
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn epsilon_validation_and_nonfinite_loss() {
        let mut p = vec![1.0];
        let a = vec![1.0];
        assert!(grad_check(
            |_| Ok(0.0),
            &mut p,
            &a,
            &GradCheckOptions { epsilon: 0.5, ..Default::default() }
        )
        .is_err());
        let err = grad_check(
            |_| Ok(f64::NAN),
            &mut p,
            &a,
            &GradCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn subsampling_checks_requested_count() {
        let mut params = random_params(100, 1);
        let analytic = vec![2.0; 100];
        let report = grad_check(
            |p| Ok(2.0 * p.iter().sum::<f64>()),
            &mut params,
            &analytic,
            &GradCheckOptions {
                max_params: Some(10),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.parameter_count, 10);
        assert_eq!(report.params_total, 100);
        assert!(report.max_relative_error < 1e-9);
    }
}
