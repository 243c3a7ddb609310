//! System spectrum, LDOS and relaxation fits of a configured model.

use std::path::Path;

use spinbath::fitting::{fit_exponential, fit_offdiag_exponential, ExpFit, RateFit};
use spinbath::ldos::{ldos_spectrum, survival_series, LdosSampling, LdosSpectrum};
use spinbath::observables::eigendecompose_system;
use spinbath::propagate::PropagatorPlan;
use spinbath::{ChebyshevPropagator, EigenBasis, SpectralBounds};
use toml::{Table, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{fmt_value, prepare, read_columns, METRICS_FILE, PAIR_FILE};

pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const LDOS_FILE: &str = "ldos.csv";
pub const FIT_FILE: &str = "fit.toml";

/// Eigenvalues of `H_S` with their level (cluster) index.
pub fn spectrum(cfg: &RunConfig, seed: u64) -> Result<EigenBasis, CliError> {
    let spec = cfg.build_spec(seed)?;
    Ok(eigendecompose_system(&spec)?)
}

pub fn spectrum_table(basis: &EigenBasis) -> String {
    let mut out = String::from("index,energy,cluster\n");
    for (k, e) in basis.energies.iter().enumerate() {
        out.push_str(&format!("{k},{},{}\n", fmt_value(*e), basis.cluster_of[k]));
    }
    out
}

#[derive(Debug, Clone)]
pub struct LdosResult {
    pub bounds: SpectralBounds,
    pub sampling: LdosSampling,
    pub spectrum: LdosSpectrum,
}

/// LDOS of the configured initial state under the full Hamiltonian.
pub fn ldos(cfg: &RunConfig, seed: u64) -> Result<LdosResult, CliError> {
    let prepared = prepare(cfg, seed)?;
    let sampling = LdosSampling::for_bounds(&prepared.bounds, cfg.run.ldos_window)?;
    let plan = PropagatorPlan::new(sampling.tau, prepared.bounds, cfg.run.truncation_tol)?;
    let mut prop = ChebyshevPropagator::new(prepared.operator, plan);
    let amps = survival_series(&mut prop, &prepared.psi0, sampling.n_steps)?;
    let spectrum = ldos_spectrum(
        &amps,
        sampling.tau,
        sampling.window_width,
        &sampling.grid,
        Some(&prepared.bounds),
    )?;
    Ok(LdosResult {
        bounds: prepared.bounds,
        sampling,
        spectrum,
    })
}

pub fn ldos_table(s: &LdosSpectrum) -> String {
    let mut out = String::from("E,D\n");
    for (e, d) in s.energies.iter().zip(&s.weights) {
        out.push_str(&format!("{},{}\n", fmt_value(*e), fmt_value(*d)));
    }
    out
}

/// Relaxation fits of one run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub sigma: Result<ExpFit, String>,
    pub delta: Result<ExpFit, String>,
    pub b: Result<ExpFit, String>,
    pub energy: Result<ExpFit, String>,
    /// Decay rate of the singlet/triplet coherence of a two-spin system.
    pub offdiag: Option<Result<RateFit, String>>,
    pub fit_start: f64,
}

impl FitReport {
    pub fn any_success(&self) -> bool {
        self.sigma.is_ok()
            || self.delta.is_ok()
            || self.b.is_ok()
            || self.energy.is_ok()
            || matches!(self.offdiag, Some(Ok(_)))
    }

    pub fn to_toml(&self, tau: f64) -> String {
        let mut root = Table::new();
        root.insert("fit_start".into(), Value::Float(self.fit_start));
        for (name, fit) in [
            ("sigma", &self.sigma),
            ("delta", &self.delta),
            ("b", &self.b),
            ("E_S", &self.energy),
        ] {
            let mut t = Table::new();
            match fit {
                Ok(f) => {
                    t.insert("offset".into(), Value::Float(f.offset));
                    t.insert("amplitude".into(), Value::Float(f.amplitude));
                    t.insert("tau_decay".into(), Value::Float(f.tau_decay));
                    t.insert("tau_decay_steps".into(), Value::Float(f.tau_decay / tau));
                    t.insert("rms_residual".into(), Value::Float(f.rms_residual));
                    t.insert(
                        "window".into(),
                        Value::Array(vec![f.window.0.into(), f.window.1.into()]),
                    );
                    t.insert("iterations".into(), Value::Integer(f.iterations as i64));
                }
                Err(e) => {
                    t.insert("error".into(), Value::String(e.clone()));
                }
            }
            root.insert(name.into(), Value::Table(t));
        }
        if let Some(fit) = &self.offdiag {
            let mut t = Table::new();
            match fit {
                Ok(f) => {
                    t.insert("rate".into(), Value::Float(f.rate));
                    t.insert("rms_residual".into(), Value::Float(f.rms_residual));
                    t.insert(
                        "window".into(),
                        Value::Array(vec![f.window.0.into(), f.window.1.into()]),
                    );
                }
                Err(e) => {
                    t.insert("error".into(), Value::String(e.clone()));
                }
            }
            root.insert("offdiag".into(), Value::Table(t));
        }
        toml::to_string(&root).expect("tables of numbers serialize")
    }
}

fn column<'a>(cols: &'a [(String, Vec<Option<f64>>)], name: &str) -> Option<&'a [Option<f64>]> {
    cols.iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_slice())
}

fn defined(t: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    t.iter()
        .zip(y)
        .filter_map(|(a, b)| Some((a.as_ref().copied()?, b.as_ref().copied()?)))
        .unzip()
}

/// First time at which `sigma` is below half its initial value.
pub fn auto_fit_start(t: &[f64], sigma: &[f64]) -> f64 {
    match sigma.first() {
        Some(&s0) => t
            .iter()
            .zip(sigma)
            .find(|(_, &s)| s < 0.5 * s0)
            .map(|(&t, _)| t)
            .unwrap_or(0.0),
        None => 0.0,
    }
}

/// Fits the series of a metrics file (and its pair file, if present).
pub fn fit_series(
    metrics: &Path,
    pair: Option<&Path>,
    fit_start: Option<f64>,
) -> Result<FitReport, CliError> {
    let cols = read_columns(metrics)?;
    let missing = |name: &str| CliError::io(metrics, format!("no `{name}` column"));
    let t = column(&cols, "t").ok_or_else(|| missing("t"))?;
    let fit = |name: &str, start: f64| -> Result<ExpFit, String> {
        let y = column(&cols, name).ok_or_else(|| format!("no `{name}` column"))?;
        let (tt, yy) = defined(t, y);
        fit_exponential(&tt, &yy, Some((start, f64::INFINITY))).map_err(|e| e.to_string())
    };
    let start = match fit_start {
        Some(s) => s,
        None => {
            let (tt, ss) = defined(t, column(&cols, "sigma").ok_or_else(|| missing("sigma"))?);
            auto_fit_start(&tt, &ss)
        }
    };
    let offdiag = match pair {
        Some(p) if p.exists() => {
            let pc = read_columns(p)?;
            let get =
                |n: &str| column(&pc, n).ok_or_else(|| CliError::io(p, format!("no `{n}` column")));
            let (tp, re, im) = (get("t")?, get("rho_ST_re")?, get("rho_ST_im")?);
            let mag: Vec<Option<f64>> = re
                .iter()
                .zip(im)
                .map(|(a, b)| Some(a.as_ref()?.hypot(*b.as_ref()?)))
                .collect();
            let (tt, yy) = defined(tp, &mag);
            Some(fit_offdiag_exponential(&tt, &yy, None).map_err(|e| e.to_string()))
        }
        _ => None,
    };
    Ok(FitReport {
        sigma: fit("sigma", f64::NEG_INFINITY),
        delta: fit("delta", f64::NEG_INFINITY),
        b: fit("b", start),
        energy: fit("E_S", start),
        offdiag,
        fit_start: start,
    })
}

/// Fits the outputs of a finished run directory.
pub fn fit_run_dir(dir: &Path, fit_start: Option<f64>) -> Result<FitReport, CliError> {
    fit_series(
        &dir.join(METRICS_FILE),
        Some(&dir.join(PAIR_FILE)),
        fit_start,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_start_follows_sigma() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(auto_fit_start(&t, &[1.0, 0.8, 0.4, 0.1]), 2.0);
        assert_eq!(auto_fit_start(&t, &[1.0, 1.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn fits_a_written_series() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut text = String::from("t,sigma,gamma,delta,b,S_quad,echo,E_S,rho_0\n");
        for k in 0..200 {
            let t = k as f64 * 0.1;
            let s = 0.01 + 0.6 * (-t / 2.5).exp();
            let b = 0.1 - 0.9 * (-t / 4.0).exp();
            text.push_str(&format!("{t},{s},,{s},{b},,,{b},1\n"));
        }
        std::fs::write(&path, text).unwrap();
        let r = fit_series(&path, None, Some(0.0)).unwrap();
        let s = r.sigma.unwrap();
        assert!((s.tau_decay - 2.5).abs() < 1e-6 && (s.amplitude - 0.6).abs() < 1e-6);
        assert!((r.b.unwrap().tau_decay - 4.0).abs() < 1e-6);
        assert!(r.offdiag.is_none());
        let text = r_toml(&fit_series(&path, None, None).unwrap());
        assert!(text.contains("[sigma]") && text.contains("tau_decay"));
    }

    fn r_toml(r: &FitReport) -> String {
        r.to_toml(0.1)
    }
}
