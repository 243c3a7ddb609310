//! Least-squares fits of relaxation curves and the large-bath coherence law.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOL: f64 = 1e-10;
pub const MIN_SAMPLES: usize = 10;

/// Outcome of a damped Gauss-Newton (Levenberg-Marquardt) solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals after each accepted iterate, starting with
    /// the initial guess. Non-increasing by construction.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

/// Minimizes `Σ (y_k - f(p, t_k))²`. `model(p, t, grad)` returns `f` and
/// writes `∂f/∂p` into `grad`; `feasible` rejects parameter vectors outside
/// the model's domain. Only cost-decreasing steps are accepted.
pub fn levenberg_marquardt(
    t: &[f64],
    y: &[f64],
    p0: &[f64],
    model: impl Fn(&[f64], f64, &mut [f64]) -> f64,
    feasible: impl Fn(&[f64]) -> bool,
) -> Result<LmOutcome> {
    let np = p0.len();
    let cost_of = |p: &[f64]| -> f64 {
        let mut g = vec![0.0; np];
        t.iter()
            .zip(y)
            .map(|(&t, &y)| (y - model(p, t, &mut g)).powi(2))
            .sum()
    };
    let mut p = p0.to_vec();
    let mut cost = cost_of(&p);
    if !cost.is_finite() {
        return Err(Error::FitFailure(format!(
            "initial guess {p:?} gives a non-finite cost"
        )));
    }
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut g = vec![0.0; np];
    for iter in 1..=MAX_ITERATIONS {
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        for (&tk, &yk) in t.iter().zip(y) {
            let r = yk - model(&p, tk, &mut g);
            for a in 0..np {
                jtr[a] += g[a] * r;
                for b in 0..np {
                    jtj[(a, b)] += g[a] * g[b];
                }
            }
        }
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e20 {
            let mut damped = jtj.clone();
            for a in 0..np {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 4.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            small_step = step.norm() <= STEP_TOL * (p_norm + STEP_TOL);
            if feasible(&trial) {
                let c = cost_of(&trial);
                if c.is_finite() && c < cost {
                    p = trial;
                    cost = c;
                    history.push(cost);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            if small_step {
                break;
            }
            lambda *= 2.0;
        }
        if !accepted || small_step || cost == 0.0 {
            return Ok(LmOutcome {
                params: p,
                cost_history: history,
                iterations: iter,
            });
        }
    }
    Err(Error::FitFailure(format!(
        "no convergence in {MAX_ITERATIONS} iterations (cost {cost:e}, parameters {p:?})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayLaw {
    /// `offset + amplitude · exp(-t/τ)`
    Exponential,
    /// `offset + amplitude · exp(-(t/τ)²)`
    Gaussian,
}

impl DecayLaw {
    pub fn eval(self, offset: f64, amplitude: f64, tau: f64, t: f64) -> f64 {
        offset + amplitude * self.shape(t / tau)
    }

    fn shape(self, x: f64) -> f64 {
        match self {
            DecayLaw::Exponential => (-x).exp(),
            DecayLaw::Gaussian => (-x * x).exp(),
        }
    }
}

/// Fitted decay with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub law: DecayLaw,
    pub offset: f64,
    pub amplitude: f64,
    pub tau_decay: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
    pub iterations: usize,
    pub cost_history: Vec<f64>,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.law
            .eval(self.offset, self.amplitude, self.tau_decay, t)
    }
}

fn windowed(
    t: &[f64],
    y: &[f64],
    window: Option<(f64, f64)>,
) -> Result<(Vec<f64>, Vec<f64>, (f64, f64))> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            actual: y.len(),
        });
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (tw, yw): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t >= lo && **t <= hi && y.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if tw.len() < MIN_SAMPLES {
        return Err(Error::FitFailure(format!(
            "{} samples in window, need at least {MIN_SAMPLES}",
            tw.len()
        )));
    }
    let span = (tw[0], tw[tw.len() - 1]);
    Ok((tw, yw, span))
}

/// Least-squares slope of `v` against `u`.
fn slope(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len() as f64;
    if u.len() < 2 {
        return None;
    }
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    let var: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    (var > 0.0).then(|| cov / var)
}

/// Fits `law` to `(t, y)` restricted to `window` (inclusive).
pub fn fit_decay(
    law: DecayLaw,
    t: &[f64],
    y: &[f64],
    window: Option<(f64, f64)>,
) -> Result<ExpFit> {
    let (t, y, span) = windowed(t, y, window)?;
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if ymax - ymin <= 1e-14 * ymax.abs().max(1.0) {
        return Err(Error::FitFailure("series is constant".into()));
    }
    let n = t.len();
    // the exponential is fitted in time since the window start, which keeps
    // late windows well conditioned; the amplitude is mapped back to t = 0
    let t0 = if law == DecayLaw::Exponential {
        t[0]
    } else {
        0.0
    };
    let ts: Vec<f64> = t.iter().map(|&tk| tk - t0).collect();
    let tail = &y[n - (n / 5).max(1)..];
    let offset = tail.iter().sum::<f64>() / tail.len() as f64;
    let amp = y[0] - offset;
    let third = (n / 3).max(2);
    let (u, v): (Vec<f64>, Vec<f64>) = ts[..third]
        .iter()
        .zip(&y[..third])
        .filter(|(_, &yk)| (yk - offset) * amp.signum() > 0.0)
        .map(|(&tk, &yk)| {
            let x = if law == DecayLaw::Gaussian {
                tk * tk
            } else {
                tk
            };
            (x, (yk - offset).abs().ln())
        })
        .unzip();
    let fallback = (span.1 - span.0).max(f64::MIN_POSITIVE) / 3.0;
    let tau0 = match (law, slope(&u, &v)) {
        (DecayLaw::Exponential, Some(s)) if s < 0.0 => -1.0 / s,
        (DecayLaw::Gaussian, Some(s)) if s < 0.0 => (-1.0 / s).sqrt(),
        _ => fallback,
    };
    let amp0 = amp / law.shape(ts[0] / tau0);
    let amp0 = if amp0.is_finite() { amp0 } else { amp };
    let model = move |p: &[f64], tk: f64, g: &mut [f64]| -> f64 {
        let x = tk / p[2];
        let s = law.shape(x);
        g[0] = 1.0;
        g[1] = s;
        g[2] = match law {
            DecayLaw::Exponential => p[1] * s * x / p[2],
            DecayLaw::Gaussian => p[1] * s * 2.0 * x * x / p[2],
        };
        p[0] + p[1] * s
    };
    let out = levenberg_marquardt(&ts, &y, &[offset, amp0, tau0], model, |p| {
        p[2] > 0.0 && p[2].is_finite()
    })?;
    let cost = *out.cost_history.last().unwrap();
    let amplitude = out.params[1] * (t0 / out.params[2]).exp();
    Ok(ExpFit {
        law,
        offset: out.params[0],
        amplitude,
        tau_decay: out.params[2],
        rms_residual: (cost / n as f64).sqrt(),
        window: span,
        iterations: out.iterations,
        cost_history: out.cost_history,
    })
}

/// `offset + amplitude · exp(-t/τ)`.
pub fn fit_exponential(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<ExpFit> {
    fit_decay(DecayLaw::Exponential, t, y, window)
}

/// `offset + amplitude · exp(-(t/τ)²)`.
pub fn fit_gaussian(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<ExpFit> {
    fit_decay(DecayLaw::Gaussian, t, y, window)
}

/// Rate of `|ρ₂₃(t)| = exp(-A t) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
}

pub fn fit_offdiag_exponential(
    t: &[f64],
    y: &[f64],
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    let (t, y, span) = windowed(t, y, window)?;
    let (u, v): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&y)
        .filter(|(_, &yk)| yk > 0.0)
        .map(|(&tk, &yk)| (tk, (2.0 * yk).ln()))
        .unzip();
    let a0 = slope(&u, &v)
        .map(|s| -s)
        .filter(|a| a.is_finite())
        .unwrap_or(0.0);
    let model = |p: &[f64], tk: f64, g: &mut [f64]| -> f64 {
        let f = 0.5 * (-p[0] * tk).exp();
        g[0] = -tk * f;
        f
    };
    let out = levenberg_marquardt(&t, &y, &[a0], model, |p| p[0].is_finite())?;
    Ok(RateFit {
        rate: out.params[0],
        rms_residual: (out.cost_history.last().unwrap() / t.len() as f64).sqrt(),
        window: span,
    })
}

/// Large-bath law for `Re ρ₂₃(t)` of two spins:
/// `[1/6 + (1 - b t²)/3 · exp(-c t²)] cos(ω t)`, `b = NΔ²/4`, `c = b/2`, `ω = J - Δ`.
pub fn melik_curve(t: f64, n: usize, delta: f64, j: f64) -> f64 {
    melik_envelope(t, n, delta) * ((j - delta) * t).cos()
}

/// Envelope of [`melik_curve`].
pub fn melik_envelope(t: f64, n: usize, delta: f64) -> f64 {
    let b = n as f64 * delta * delta / 4.0;
    let c = b / 2.0;
    1.0 / 6.0 + (1.0 - b * t * t) / 3.0 * (-c * t * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn exact_recovery_without_noise() {
        let t = grid(200, 0.1);
        let y: Vec<f64> = t.iter().map(|&t| 0.1 + 0.8 * (-t / 3.0).exp()).collect();
        let f = fit_exponential(&t, &y, None).unwrap();
        assert!((f.offset - 0.1).abs() < 1e-8);
        assert!((f.amplitude - 0.8).abs() < 1e-8);
        assert!((f.tau_decay - 3.0).abs() < 1e-8);
        assert!(f.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn noisy_recovery() {
        let tau = 8.01 * std::f64::consts::PI / 10.0;
        let t = grid(400, 0.1);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1e-4).unwrap();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.00128 + 0.602 * (-t / tau).exp() + noise.sample(&mut rng))
            .collect();
        let f = fit_exponential(&t, &y, None).unwrap();
        assert!((f.offset / 0.00128 - 1.0).abs() < 0.02);
        assert!((f.amplitude / 0.602 - 1.0).abs() < 0.02);
        assert!((f.tau_decay / tau - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_series_rejected() {
        let t = grid(20, 1.0);
        assert!(matches!(
            fit_exponential(&t, &[0.3; 20], None),
            Err(Error::FitFailure(_))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        let t = grid(5, 1.0);
        assert!(fit_exponential(&t, &[1.0, 0.5, 0.25, 0.1, 0.05], None).is_err());
    }

    #[test]
    fn gaussian_law_round_trip() {
        let t = grid(150, 0.05);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.05 + 0.4 * (-(t / 2.0f64).powi(2)).exp())
            .collect();
        let f = fit_gaussian(&t, &y, None).unwrap();
        assert!((f.tau_decay - 2.0).abs() < 1e-6);
        assert!((f.offset - 0.05).abs() < 1e-6);
    }

    #[test]
    fn offdiag_rates() {
        let t = grid(101, 0.01);
        for a in [9.13 * 0.5, 26.73 * 0.5] {
            let y: Vec<f64> = t.iter().map(|&t| 0.5 * (-a * t).exp()).collect();
            let f = fit_offdiag_exponential(&t, &y, None).unwrap();
            assert!((f.rate / a - 1.0).abs() < 1e-8);
        }
        let flat = vec![0.5; t.len()];
        assert!(fit_offdiag_exponential(&t, &flat, None).unwrap().rate.abs() < 1e-10);
    }

    #[test]
    fn melik_special_points() {
        assert!((melik_curve(0.0, 16, -0.075, -5.0) - 0.5).abs() < 1e-15);
        let b = 16.0 * 0.075f64.powi(2) / 4.0;
        assert!((melik_envelope(1.0 / b.sqrt(), 16, -0.075) - 1.0 / 6.0).abs() < 1e-15);
        assert!((melik_envelope(1e3, 16, -0.075) - 1.0 / 6.0).abs() < 1e-12);
    }
}
