//! Numerical kernels: ordinary least-squares fit of `f(x) = a + b*ln(x)` and
//! mode-parameterized log-normal sampling.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::EstimationError;

/// Coefficients of a fitted logarithmic throughput-latency curve
/// `f(x) = a + b*ln(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    /// Intercept, in throughput units.
    pub a: f64,
    /// Log-slope, in throughput units.
    pub b: f64,
    /// Number of samples the fit was computed from.
    pub n: usize,
    /// Root-mean-square residual.
    pub residual_rms: f64,
}

impl CurveFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a + self.b * x.ln()
    }
}

/// Closed-form OLS on the transformed abscissa `u = ln(x)`:
/// `b = cov(u, y) / var(u)`, `a = mean(y) - b * mean(u)`.
///
/// Population variance is used; the choice cancels in the ratio.
pub fn fit_log_curve(samples: &[(f64, f64)]) -> Result<CurveFit, EstimationError> {
    if samples.len() < 2 {
        return Err(EstimationError::TooFewSamples(samples.len()));
    }
    for &(x, _) in samples {
        if x <= 0.0 || !x.is_finite() {
            return Err(EstimationError::NonPositiveAbscissa(x));
        }
    }
    let n = samples.len() as f64;
    let mut mean_u = 0.0;
    let mut mean_y = 0.0;
    for &(x, y) in samples {
        mean_u += x.ln();
        mean_y += y;
    }
    mean_u /= n;
    mean_y /= n;

    let mut var_u = 0.0;
    let mut cov_uy = 0.0;
    for &(x, y) in samples {
        let du = x.ln() - mean_u;
        var_u += du * du;
        cov_uy += du * (y - mean_y);
    }
    var_u /= n;
    cov_uy /= n;

    if var_u == 0.0 {
        return Err(EstimationError::DegenerateAbscissae);
    }

    let b = cov_uy / var_u;
    let a = mean_y - b * mean_u;

    let mut ss = 0.0;
    for &(x, y) in samples {
        let r = y - (a + b * x.ln());
        ss += r * r;
    }
    Ok(CurveFit {
        a,
        b,
        n: samples.len(),
        residual_rms: (ss / n).sqrt(),
    })
}

/// Derivative of the fitted curve at `x`: `f'(x) = b / x`.
pub fn eval_slope(fit: &CurveFit, x: f64) -> Result<f64, EstimationError> {
    if x <= 0.0 {
        return Err(EstimationError::NonPositiveAbscissa(x));
    }
    Ok(fit.b / x)
}

/// Draw from a log-normal distribution whose *mode* is `mode`.
///
/// Returns `exp(g)` with `g ~ Gaussian(mu, sigma)` and `mu = ln(mode) + sigma^2`,
/// which places the distribution's mode (`e^(mu - sigma^2)`) exactly at `mode`.
/// `sigma = 0` degenerates to returning `mode` on every draw.
pub fn lognormal_mode_sample<R: Rng>(
    mode: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<f64, EstimationError> {
    if mode <= 0.0 || !mode.is_finite() {
        return Err(EstimationError::NonPositiveMode(mode));
    }
    if sigma == 0.0 {
        return Ok(mode);
    }
    let mu = mode.ln() + sigma * sigma;
    let normal = Normal::new(mu, sigma).expect("sigma validated");
    Ok(normal.sample(rng).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{stream_id, RngStream};
    use approx::assert_relative_eq;
    use rand_distr::Distribution;

    #[test]
    fn exact_points_recover_coefficients() {
        let e = std::f64::consts::E;
        let samples = vec![(1.0, 1.0), (e, 4.0), (e * e, 7.0)];
        let fit = fit_log_curve(&samples).unwrap();
        assert_relative_eq!(fit.a, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.b, 3.0, max_relative = 1e-12);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn degenerate_abscissae_rejected() {
        let samples = vec![(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)];
        assert_eq!(
            fit_log_curve(&samples),
            Err(EstimationError::DegenerateAbscissae)
        );
    }

    #[test]
    fn nonpositive_x_rejected() {
        assert!(matches!(
            fit_log_curve(&[(0.0, 1.0), (1.0, 1.0)]),
            Err(EstimationError::NonPositiveAbscissa(_))
        ));
        assert!(matches!(
            fit_log_curve(&[(-2.0, 1.0), (1.0, 1.0)]),
            Err(EstimationError::NonPositiveAbscissa(_))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        assert_eq!(
            fit_log_curve(&[(1.0, 1.0)]),
            Err(EstimationError::TooFewSamples(1))
        );
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = RngStream::new(7, stream_id::SLOW_LOOP_NOISE);
        let noise = rand_distr::Normal::new(0.0, 0.5).unwrap();
        let samples: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let x = 1.0 + 2.0 * i as f64;
                (x, 1.0 + 3.0 * x.ln() + noise.sample(rng.rng()))
            })
            .collect();
        let fit = fit_log_curve(&samples).unwrap();
        let sum_r: f64 = samples.iter().map(|&(x, y)| y - fit.eval(x)).sum();
        let sum_ru: f64 = samples
            .iter()
            .map(|&(x, y)| (y - fit.eval(x)) * x.ln())
            .sum();
        assert!(sum_r.abs() < 1e-8, "sum residual = {sum_r}");
        assert!(sum_ru.abs() < 1e-8, "sum residual*ln x = {sum_ru}");
    }

    #[test]
    fn eval_slope_basic_and_round_trip() {
        let fit = CurveFit {
            a: 1.0,
            b: 3.0,
            n: 3,
            residual_rms: 0.0,
        };
        assert_relative_eq!(eval_slope(&fit, 0.6).unwrap(), 5.0, max_relative = 1e-12);
        assert!(eval_slope(&fit, 1e12).unwrap() < 1e-11);
        assert!(eval_slope(&fit, 0.0).is_err());

        let fit2 = CurveFit {
            a: -9.4,
            b: 5.6,
            n: 10,
            residual_rms: 0.0,
        };
        assert_relative_eq!(eval_slope(&fit2, 1.12).unwrap(), 5.0, max_relative = 1e-12);

        // eval_slope(fit, b/s) = s for any s > 0.
        for s in [0.1, 0.5, 1.0, 5.0, 10.0, 20.0] {
            let x = fit2.b / s;
            assert_relative_eq!(eval_slope(&fit2, x).unwrap(), s, max_relative = 1e-12);
        }
    }

    #[test]
    fn fit_equivariance_scale_and_shift() {
        let samples: Vec<(f64, f64)> = (1..=20)
            .map(|i| (i as f64, 2.0 + 0.7 * (i as f64).ln() + (i % 3) as f64 * 0.1))
            .collect();
        let base = fit_log_curve(&samples).unwrap();
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x, 4.0 * y)).collect();
        let shifted: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x, y + 10.0)).collect();
        let fs = fit_log_curve(&scaled).unwrap();
        let fh = fit_log_curve(&shifted).unwrap();
        assert_relative_eq!(fs.a, 4.0 * base.a, max_relative = 1e-9);
        assert_relative_eq!(fs.b, 4.0 * base.b, max_relative = 1e-9);
        assert_relative_eq!(fh.a, base.a + 10.0, max_relative = 1e-9);
        assert_relative_eq!(fh.b, base.b, max_relative = 1e-9);
    }

    #[test]
    fn lognormal_sigma_zero_returns_mode_exactly() {
        let mut rng = RngStream::new(1, stream_id::SLOW_LOOP_NOISE);
        for _ in 0..100 {
            assert_eq!(lognormal_mode_sample(2.0, 0.0, rng.rng()).unwrap(), 2.0);
        }
    }

    #[test]
    fn lognormal_rejects_nonpositive_mode() {
        let mut rng = RngStream::new(1, stream_id::SLOW_LOOP_NOISE);
        assert!(lognormal_mode_sample(0.0, 0.5, rng.rng()).is_err());
        assert!(lognormal_mode_sample(-1.0, 0.5, rng.rng()).is_err());
    }

    #[test]
    fn lognormal_median_matches_closed_form() {
        // median of exp(N(mu, sigma)) is e^mu = mode * e^(sigma^2).
        let mut rng = RngStream::new(99, stream_id::SLOW_LOOP_NOISE);
        let n = 1_000_000usize;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| lognormal_mode_sample(2.0, 0.5, rng.rng()).unwrap())
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[n / 2];
        let expect = 2.0 * (0.25f64).exp();
        assert!(
            (median - expect).abs() / expect < 0.01,
            "median {median} vs {expect}"
        );
    }

    #[test]
    fn lognormal_histogram_mode_near_requested_mode() {
        let mut rng = RngStream::new(5, stream_id::SLOW_LOOP_NOISE);
        let n = 1_000_000usize;
        let bin = 0.05;
        let mut hist = vec![0u32; 400];
        for _ in 0..n {
            let x = lognormal_mode_sample(2.0, 0.5, rng.rng()).unwrap();
            let idx = (x / bin) as usize;
            if idx < hist.len() {
                hist[idx] += 1;
            }
        }
        let argmax = hist.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        let est_mode = (argmax as f64 + 0.5) * bin;
        assert!(
            (est_mode - 2.0).abs() / 2.0 < 0.10,
            "histogram mode {est_mode}"
        );
    }

    #[test]
    fn lognormal_is_right_skewed_and_peaks_at_mode() {
        // Values close to the mode occur most often and the far right tail
        // thins out: occupancy of a band at the mode beats equally wide
        // bands at 2x and 3x the mode, and mean > median > mode.
        let mut rng = RngStream::new(11, stream_id::SLOW_LOOP_NOISE);
        let mode = 2.0;
        let n = 200_000usize;
        let band = |center: f64, x: f64| x > 0.9 * center && x < 1.1 * center;
        let (mut at_mode, mut at_2x, mut at_3x) = (0usize, 0usize, 0usize);
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = lognormal_mode_sample(mode, 0.5, rng.rng()).unwrap();
            if band(mode, x) {
                at_mode += 1;
            }
            if band(2.0 * mode, x) {
                at_2x += 1;
            }
            if band(3.0 * mode, x) {
                at_3x += 1;
            }
            xs.push(x);
        }
        assert!(at_mode > at_2x && at_2x > at_3x, "{at_mode}/{at_2x}/{at_3x}");
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[n / 2];
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean > median && median > mode, "mean={mean} median={median}");
    }
}
