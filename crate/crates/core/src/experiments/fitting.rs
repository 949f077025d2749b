use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// `A exp(-t/T)`
    Exponential,
    /// `A cos(2π f t + φ) exp(-t/T) + C`
    DampedCosine,
}

/// Least-squares decay fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub kind: FitKind,
    /// `None` when the fitted decay rate is not positive (no decay).
    pub time_constant_us: Option<f64>,
    pub frequency_mhz: Option<f64>,
    pub amplitude: f64,
    pub offset: f64,
    pub phase_rad: Option<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    /// One-sigma standard errors of the parameters, in fit order.
    pub std_errors: Vec<f64>,
    pub iterations: usize,
}

impl DecayFit {
    pub fn rate(&self) -> f64 {
        self.time_constant_us.map_or(0.0, |t| 1.0 / t)
    }

    /// The fitted curve at `t_us`.
    pub fn evaluate(&self, t_us: f64) -> f64 {
        let envelope = self.amplitude * (-self.rate() * t_us).exp();
        match self.kind {
            FitKind::Exponential => envelope,
            FitKind::DampedCosine => {
                let f = self.frequency_mhz.unwrap_or(0.0);
                envelope * (2.0 * PI * f * t_us + self.phase_rad.unwrap_or(0.0)).cos() + self.offset
            }
        }
    }
}

struct LmOutcome {
    params: DVector<f64>,
    rss: f64,
    std_errors: Vec<f64>,
    iterations: usize,
}

/// Levenberg–Marquardt with forward-difference Jacobians.
fn levenberg_marquardt<F>(t: &[f64], y: &[f64], p0: DVector<f64>, model: F) -> Result<LmOutcome>
where
    F: Fn(f64, &DVector<f64>) -> f64,
{
    let n = t.len();
    let np = p0.len();
    let residuals = |p: &DVector<f64>| DVector::from_iterator(n, t.iter().zip(y).map(|(&ti, &yi)| yi - model(ti, p)));
    let jacobian = |p: &DVector<f64>| {
        let mut j = DMatrix::zeros(n, np);
        for k in 0..np {
            let h = 1e-7 * p[k].abs().max(1e-6);
            let mut q = p.clone();
            q[k] += h;
            for (i, &ti) in t.iter().enumerate() {
                j[(i, k)] = (model(ti, &q) - model(ti, p)) / h;
            }
        }
        j
    };
    let mut p = p0;
    let mut r = residuals(&p);
    let mut rss = r.norm_squared();
    if !rss.is_finite() {
        return Err(Error::Fit("initial guess gives non-finite residuals".into()));
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let j = jacobian(&p);
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = a.clone();
            for k in 0..np {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &delta;
            let r_trial = residuals(&trial);
            let rss_trial = r_trial.norm_squared();
            if rss_trial.is_finite() && rss_trial <= rss {
                let gain = rss - rss_trial;
                p = trial;
                r = r_trial;
                rss = rss_trial;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if gain <= 1e-15 * rss.max(1e-300) || delta.norm() <= 1e-13 * (p.norm() + 1e-13) {
                    return finish(p, rss, &jacobian, n, iterations);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return finish(p, rss, &jacobian, n, iterations);
        }
    }
    finish(p, rss, &jacobian, n, iterations)
}

fn finish<J>(p: DVector<f64>, rss: f64, jacobian: &J, n: usize, iterations: usize) -> Result<LmOutcome>
where
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("parameters diverged".into()));
    }
    let np = p.len();
    let j = jacobian(&p);
    let dof = n.saturating_sub(np).max(1) as f64;
    let std_errors = match (j.transpose() * &j).try_inverse() {
        Some(cov) => (0..np).map(|k| (cov[(k, k)] * rss / dof).abs().sqrt()).collect(),
        None => vec![f64::NAN; np],
    };
    Ok(LmOutcome {
        params: p,
        rss,
        std_errors,
        iterations,
    })
}

fn check_data(t: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if t.len() != y.len() || t.len() < min_points {
        return Err(Error::Fit(format!(
            "need at least {min_points} paired points, got {} and {}",
            t.len(),
            y.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("data contain non-finite values".into()));
    }
    Ok(())
}

/// Fits `A exp(-t/T)`. Flat or growing data are rejected.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    check_data(t, y, 3)?;
    let peak = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    if peak == 0.0 || spread <= 1e-9 * peak {
        return Err(Error::Fit("signal is flat; no exponential decay to fit".into()));
    }
    // log-linear guess on the points above 5% of the first value
    let a0 = y[0];
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| a0 != 0.0 && **v / a0 > 0.05)
        .map(|(a, v)| (*a, (v / a0).ln()))
        .collect();
    let mut k0 = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let (st, sl) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let (mt, ml) = (st / m, sl / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |acc, p| {
            (acc.0 + (p.0 - mt) * (p.1 - ml), acc.1 + (p.0 - mt).powi(2))
        });
        if den > 0.0 {
            -num / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    let span = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - t.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(k0 > 0.0) {
        k0 = 1.0 / span.max(1e-12);
    }
    let out = levenberg_marquardt(t, y, DVector::from_vec(vec![a0, k0]), |ti, p| p[0] * (-p[1] * ti).exp())?;
    let k = out.params[1];
    if !(k > 0.0) || !(k * span > 1e-6) {
        return Err(Error::Fit(format!(
            "fitted decay rate {k:.3e} /us shows no decay over the grid"
        )));
    }
    Ok(DecayFit {
        kind: FitKind::Exponential,
        time_constant_us: Some(1.0 / k),
        frequency_mhz: None,
        amplitude: out.params[0],
        offset: 0.0,
        phase_rad: None,
        residual_norm: out.rss.sqrt(),
        std_errors: out.std_errors,
        iterations: out.iterations,
    })
}

/// Fits `A cos(2π f t + φ) exp(-t/T) + C`, seeding `f` from the strongest
/// component of a discrete Fourier scan.
pub fn fit_damped_cosine(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    check_data(t, y, 6)?;
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let span = t[n - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::Fit("time grid must be increasing".into()));
    }
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist = 0.5 / dt_min;
    let df = 0.05 / span;
    let mut best = (0.0, 0.0, 0.0);
    let mut f = df;
    while f <= nyquist {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let (s, c) = (2.0 * PI * f * ti).sin_cos();
            re += (yi - mean) * c;
            im -= (yi - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, f, im.atan2(re));
        }
        f += df;
    }
    if best.0 == 0.0 {
        return Err(Error::Fit("signal has no oscillating component".into()));
    }
    let amp0 =
        0.5 * (y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min));
    let p0 = DVector::from_vec(vec![amp0, best.1, best.2, 0.1 / span, mean]);
    let model = |ti: f64, p: &DVector<f64>| p[0] * (2.0 * PI * p[1] * ti + p[2]).cos() * (-p[3] * ti).exp() + p[4];
    let out = levenberg_marquardt(t, y, p0, model)?;
    let mut p = out.params.clone();
    // canonical sign: positive amplitude and frequency
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] = -p[2];
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] += PI;
    }
    let phase = (p[2] + PI).rem_euclid(2.0 * PI) - PI;
    let k = p[3];
    Ok(DecayFit {
        kind: FitKind::DampedCosine,
        time_constant_us: (k * span > 1e-9).then(|| 1.0 / k),
        frequency_mhz: Some(p[1]),
        amplitude: p[0],
        offset: p[4],
        phase_rad: Some(phase),
        residual_norm: out.rss.sqrt(),
        std_errors: out.std_errors,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential() {
        let t: Vec<f64> = (0..25).map(|k| k as f64 * 1.0).collect();
        let y: Vec<f64> = t.iter().map(|x| 0.7 * (-x / 8.0).exp()).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!((fit.time_constant_us.unwrap() - 8.0).abs() < 1e-6);
        assert!((fit.amplitude - 0.7).abs() < 1e-8);
        assert!(fit.residual_norm < 1e-8);
        assert!((fit.evaluate(4.0) - 0.7 * (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rejects_flat_and_growing() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(fit_exponential(&t, &[0.3; 10]).is_err());
        let grow: Vec<f64> = t.iter().map(|x| (x / 5.0).exp()).collect();
        assert!(fit_exponential(&t, &grow).is_err());
    }

    #[test]
    fn recovers_damped_cosine() {
        let t: Vec<f64> = (0..80).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|x| 0.9 * (2.0 * PI * 1.3 * x + 0.4).cos() * (-x / 2.5).exp() + 0.05)
            .collect();
        let fit = fit_damped_cosine(&t, &y).unwrap();
        assert!((fit.frequency_mhz.unwrap() - 1.3).abs() < 1e-6);
        assert!((fit.time_constant_us.unwrap() - 2.5).abs() < 1e-5);
        assert!((fit.phase_rad.unwrap() - 0.4).abs() < 1e-6);
        assert!((fit.offset - 0.05).abs() < 1e-7);
        assert!(t.iter().zip(&y).all(|(&x, v)| (fit.evaluate(x) - v).abs() < 1e-7));
    }

    #[test]
    fn undamped_cosine_has_no_time_constant() {
        let t: Vec<f64> = (0..60).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|x| (2.0 * PI * 0.8 * x).cos()).collect();
        let fit = fit_damped_cosine(&t, &y).unwrap();
        assert!((fit.frequency_mhz.unwrap() - 0.8).abs() < 1e-8);
        assert!(fit.time_constant_us.is_none_or(|tc| tc > 1e6));
    }
}
