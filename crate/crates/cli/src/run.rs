//! Trajectory runs: model construction, propagation and the metric time series.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use spinbath::hilbert::partial_trace_env;
use spinbath::observables::{eigendecompose_system, singlet_triplet_coherence, singlet_weight};
use spinbath::propagate::{operator_bounds, PropagatorPlan};
use spinbath::states::{make_state, product_state};
use spinbath::{
    ChebyshevPropagator, Complex64, EigenBasis, HamiltonianSpec, MetricSample,
    ReducedDensityMatrix, RngStreams, SpectralBounds, SpinOperator, StateVector, Stream,
};

use crate::checkpoint::Checkpoint;
use crate::config::{Metric, RunConfig};
use crate::error::CliError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const PAIR_FILE: &str = "pair.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const RESOLVED_CONFIG_FILE: &str = "config.toml";

/// Rows whose populations do not sum to one within this are rejected.
pub const TRACE_TOL: f64 = 1e-10;

pub const PAIR_HEADER: [&str; 11] = [
    "t",
    "S1S2",
    "SzSz",
    "SxSx",
    "M",
    "C",
    "Sx1",
    "Sz1",
    "singlet",
    "rho_ST_re",
    "rho_ST_im",
];

/// Model, initial state and system eigenbasis of one configured run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: HamiltonianSpec,
    pub psi0: StateVector,
    pub basis: EigenBasis,
    pub bounds: SpectralBounds,
    pub operator: SpinOperator,
}

pub fn check_budget(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.n_total() > cfg.run.max_spins {
        return Err(CliError::Budget(format!(
            "{} spins requested, memory ceiling is {} (raise run.max_spins to override)",
            cfg.n_total(),
            cfg.run.max_spins
        )));
    }
    Ok(())
}

/// Builds everything a trajectory needs from `cfg` and `seed`.
pub fn prepare(cfg: &RunConfig, seed: u64) -> Result<Prepared, CliError> {
    check_budget(cfg)?;
    let streams = RngStreams::new(seed);
    let spec = cfg.build_spec(seed)?;

    let h_s = SpinOperator::system(&spec)?;
    let sys = make_state(
        &cfg.system_label(),
        spec.n_s,
        Some(&h_s),
        &mut streams.stream(Stream::StateSystem),
    )?;
    let env = if spec.n_env == 0 {
        StateVector::basis(0, 0)
    } else {
        let label = cfg.environment_label();
        let h_e = if label.kind.needs_hamiltonian() {
            Some(SpinOperator::from_spec(&spec.environment_only())?)
        } else {
            None
        };
        make_state(
            &label,
            spec.n_env,
            h_e.as_ref(),
            &mut streams.stream(Stream::StateEnvironment),
        )?
    };
    let psi0 = product_state(&sys, &env);
    let basis = eigendecompose_system(&spec)?;
    let operator = SpinOperator::from_spec(&spec)?;
    let bounds = operator_bounds(
        &operator,
        cfg.run.bounds,
        &mut streams.stream(Stream::Krylov),
    )?;
    Ok(Prepared {
        spec,
        psi0,
        basis,
        bounds,
        operator,
    })
}

/// `exp(-iH_S t) ρ_S(0) exp(iH_S t)`: the system trajectory without `H_SE`,
/// exact for the product initial states used here.
#[derive(Debug, Clone)]
struct UncoupledReference {
    rho0_energy: DMatrix<Complex64>,
    vectors: DMatrix<Complex64>,
    energies: Vec<f64>,
}

impl UncoupledReference {
    fn new(rho0: &ReducedDensityMatrix, basis: &EigenBasis) -> Self {
        let v = basis.vectors.map(|x| Complex64::new(x, 0.0));
        let rho0_energy = v.transpose() * &rho0.matrix * &v;
        Self {
            rho0_energy,
            vectors: v,
            energies: basis.energies.clone(),
        }
    }

    fn at(&self, t: f64, n_spins: usize) -> ReducedDensityMatrix {
        let d = self.energies.len();
        let phases: Vec<Complex64> = self
            .energies
            .iter()
            .map(|e| Complex64::from_polar(1.0, -e * t))
            .collect();
        let evolved = DMatrix::from_fn(d, d, |i, j| {
            phases[i] * self.rho0_energy[(i, j)] * phases[j].conj()
        });
        let matrix = &self.vectors * evolved * self.vectors.transpose();
        ReducedDensityMatrix {
            n_spins,
            matrix,
            basis: spinbath::hilbert::BasisTag::UpDown,
        }
    }
}

/// One sampled time with the two-spin extras when they apply.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sample: MetricSample,
    pub pair: Option<PairRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub s1_dot_s2: f64,
    pub szsz: f64,
    pub sxsx: f64,
    pub magnetization: f64,
    pub concurrence: f64,
    pub sx1: f64,
    pub sz1: f64,
    pub singlet: f64,
    pub rho_st: Complex64,
}

/// A running trajectory. `step` advances by `τ`; `sample` evaluates the
/// metrics of the current state.
pub struct Trajectory {
    prop: ChebyshevPropagator,
    psi: StateVector,
    step: usize,
    tau: f64,
    n_s: usize,
    floor: f64,
    basis: EigenBasis,
    reference: Option<UncoupledReference>,
    pair: bool,
}

impl Trajectory {
    pub fn new(cfg: &RunConfig, prepared: &Prepared) -> Result<Self, CliError> {
        let plan = PropagatorPlan::new(cfg.run.tau, prepared.bounds, cfg.run.truncation_tol)?;
        let prop = ChebyshevPropagator::new(prepared.operator.clone(), plan);
        let n_s = prepared.spec.n_s;
        let reference = if cfg.wants(Metric::Echo) {
            let rho0 = partial_trace_env(&prepared.psi0, n_s)?;
            Some(UncoupledReference::new(&rho0, &prepared.basis))
        } else {
            None
        };
        Ok(Self {
            prop,
            psi: prepared.psi0.clone(),
            step: 0,
            tau: cfg.run.tau,
            n_s,
            floor: cfg.run.floor,
            basis: prepared.basis.clone(),
            reference,
            pair: n_s == 2 && cfg.wants(Metric::Pair),
        })
    }

    /// Continues from a stored state at step `step`.
    pub fn restore(&mut self, psi: StateVector, step: usize) -> Result<(), CliError> {
        if psi.dim() != self.psi.dim() {
            return Err(CliError::Config {
                message: format!(
                    "checkpoint holds a {}-spin state, run has {}",
                    psi.n_spins(),
                    self.psi.n_spins()
                ),
                line: None,
            });
        }
        self.psi = psi;
        self.step = step;
        Ok(())
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.tau
    }

    pub fn state(&self) -> &StateVector {
        &self.psi
    }

    pub fn advance(&mut self) -> Result<(), CliError> {
        self.prop.step(&mut self.psi)?;
        self.step += 1;
        Ok(())
    }

    pub fn sample(&self) -> Result<Row, CliError> {
        let t = self.time();
        let rho = partial_trace_env(&self.psi, self.n_s)?;
        let reference = self.reference.as_ref().map(|r| r.at(t, self.n_s));
        let sample = MetricSample::compute(
            t,
            &rho,
            &self.basis,
            reference.as_ref(),
            self.floor,
            self.pair,
        )?;
        let total: f64 = sample.rho_diag.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(CliError::Numerical(format!(
                "populations sum to {total} at t = {t}"
            )));
        }
        let pair = match (&sample.correlators, sample.concurrence) {
            (Some(c), Some(conc)) => Some(PairRow {
                s1_dot_s2: c.s1_dot_s2,
                szsz: c.szsz,
                sxsx: c.sxsx,
                magnetization: c.magnetization,
                concurrence: conc,
                sx1: c.sx1,
                sz1: c.sz1,
                singlet: singlet_weight(&rho)?,
                rho_st: singlet_triplet_coherence(&rho)?,
            }),
            _ => None,
        };
        Ok(Row { sample, pair })
    }
}

pub fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>, on: bool) -> String {
    match x {
        Some(v) if on => fmt_value(v),
        _ => String::new(),
    }
}

pub fn metrics_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "sigma", "gamma", "delta", "b", "S_quad", "echo", "E_S"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..dim).map(|k| format!("rho_{k}")));
    h
}

pub fn metrics_record(cfg: &RunConfig, s: &MetricSample) -> Vec<String> {
    let w = |m| cfg.wants(m);
    let mut r = vec![
        fmt_value(s.t),
        opt(Some(s.sigma), w(Metric::Sigma)),
        opt(Some(s.gamma), w(Metric::Gamma)),
        opt(s.delta, w(Metric::Delta)),
        opt(s.b, w(Metric::B)),
        opt(Some(s.s_quad), w(Metric::SQuad)),
        opt(s.echo, w(Metric::Echo)),
        opt(Some(s.e_s), w(Metric::EnergyS)),
    ];
    r.extend(s.rho_diag.iter().map(|&p| opt(Some(p), w(Metric::Rho))));
    r
}

fn pair_record(t: f64, p: &PairRow) -> Vec<String> {
    [
        t,
        p.s1_dot_s2,
        p.szsz,
        p.sxsx,
        p.magnetization,
        p.concurrence,
        p.sx1,
        p.sz1,
        p.singlet,
        p.rho_st.re,
        p.rho_st.im,
    ]
    .iter()
    .map(|&v| fmt_value(v))
    .collect()
}

/// Knobs that are not part of the physics configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Continue from the checkpoint in the output directory.
    pub resume: bool,
    /// Stop (as if interrupted) after this many steps, leaving a checkpoint.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub steps_done: usize,
    pub completed: bool,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub chebyshev_order: usize,
}

struct Sinks {
    metrics: csv::Writer<File>,
    pair: Option<csv::Writer<File>>,
}

impl Sinks {
    fn flush(&mut self, dir: &Path) -> Result<(), CliError> {
        self.metrics
            .flush()
            .map_err(|e| CliError::io(&dir.join(METRICS_FILE), e))?;
        if let Some(p) = &mut self.pair {
            p.flush()
                .map_err(|e| CliError::io(&dir.join(PAIR_FILE), e))?;
        }
        Ok(())
    }
}

fn csv_writer(path: &Path, append: bool) -> Result<csv::Writer<File>, CliError> {
    let file = if append {
        OpenOptions::new().append(true).open(path)
    } else {
        File::create(path)
    }
    .map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file))
}

/// Keeps the header and the first `rows` data rows of a CSV file.
fn truncate_rows(path: &Path, rows: usize) -> Result<(), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut keep = 0u64;
    let mut line = String::new();
    for _ in 0..rows + 1 {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| CliError::io(path, e))?;
        if n == 0 || !line.ends_with('\n') {
            return Err(CliError::Config {
                message: format!("{} has fewer rows than the checkpoint step", path.display()),
                line: None,
            });
        }
        keep += n as u64;
    }
    let file = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    file.set_len(keep).map_err(|e| CliError::io(path, e))
}

/// Runs one trajectory of `cfg` with `seed`, writing into `out_dir`.
pub fn run(
    cfg: &RunConfig,
    seed: u64,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<RunSummary, CliError> {
    let prepared = prepare(cfg, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut resolved = cfg.clone();
    resolved.run.seed = seed;
    let resolved_text = resolved.to_toml();
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let pair_on = prepared.spec.n_s == 2 && cfg.wants(Metric::Pair);

    let mut traj = Trajectory::new(cfg, &prepared)?;
    let mut sinks = if opts.resume {
        let ck = Checkpoint::read(&checkpoint_path)?;
        if ck.config != resolved_text {
            return Err(CliError::Config {
                message: "checkpoint was written by a different configuration or seed".into(),
                line: None,
            });
        }
        let step = ck.step as usize;
        traj.restore(ck.state, step)?;
        truncate_rows(&out_dir.join(METRICS_FILE), step + 1)?;
        if pair_on {
            truncate_rows(&out_dir.join(PAIR_FILE), step + 1)?;
        }
        Sinks {
            metrics: csv_writer(&out_dir.join(METRICS_FILE), true)?,
            pair: if pair_on {
                Some(csv_writer(&out_dir.join(PAIR_FILE), true)?)
            } else {
                None
            },
        }
    } else {
        let path = out_dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, &resolved_text).map_err(|e| CliError::io(&path, e))?;
        let mut sinks = Sinks {
            metrics: csv_writer(&out_dir.join(METRICS_FILE), false)?,
            pair: if pair_on {
                Some(csv_writer(&out_dir.join(PAIR_FILE), false)?)
            } else {
                None
            },
        };
        let csv_err = |e: csv::Error| CliError::io(&out_dir.join(METRICS_FILE), e);
        sinks
            .metrics
            .write_record(metrics_header(prepared.basis.dim()))
            .map_err(csv_err)?;
        if let Some(p) = &mut sinks.pair {
            p.write_record(PAIR_HEADER).map_err(csv_err)?;
        }
        write_row(cfg, &mut sinks, &traj.sample()?, out_dir)?;
        sinks
    };

    let e0 = prepared.operator.expectation(&prepared.psi0)?;
    let mut completed = true;
    while traj.step_index() < cfg.run.n_steps {
        traj.advance()?;
        write_row(cfg, &mut sinks, &traj.sample()?, out_dir)?;
        let k = traj.step_index();
        let stop = opts.stop_after.is_some_and(|s| k >= s) && k < cfg.run.n_steps;
        if k % cfg.run.checkpoint_every == 0 || stop {
            sinks.flush(out_dir)?;
            Checkpoint {
                step: k as u64,
                config: resolved_text.clone(),
                state: traj.state().clone(),
            }
            .write(&checkpoint_path)?;
        }
        if stop {
            completed = false;
            break;
        }
    }
    sinks.flush(out_dir)?;
    if completed && checkpoint_path.exists() {
        fs::remove_file(&checkpoint_path).map_err(|e| CliError::io(&checkpoint_path, e))?;
    }
    let e1 = prepared.operator.expectation(traj.state())?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        steps_done: traj.step_index(),
        completed,
        norm_drift: (traj.state().norm() - 1.0).abs(),
        energy_drift: (e1 - e0).abs() / e0.abs().max(1e-300),
        chebyshev_order: PropagatorPlan::new(cfg.run.tau, prepared.bounds, cfg.run.truncation_tol)?
            .order(),
    })
}

fn write_row(cfg: &RunConfig, sinks: &mut Sinks, row: &Row, dir: &Path) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::io(&dir.join(METRICS_FILE), e);
    sinks
        .metrics
        .write_record(metrics_record(cfg, &row.sample))
        .map_err(csv_err)?;
    if let (Some(w), Some(p)) = (&mut sinks.pair, &row.pair) {
        w.write_record(pair_record(row.sample.t, p))
            .map_err(csv_err)?;
    }
    Ok(())
}

/// Reads a metrics file back as named columns; empty fields become `None`.
pub fn read_columns(path: &Path) -> Result<Vec<(String, Vec<Option<f64>>)>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        for (c, field) in rec.iter().enumerate() {
            let v = if field.is_empty() {
                None
            } else {
                Some(field.parse::<f64>().map_err(|e| {
                    CliError::io(path, format!("row {}: column {}: {e}", k + 1, headers[c]))
                })?)
            };
            cols[c].push(v);
        }
    }
    Ok(headers.into_iter().zip(cols).collect())
}

/// Writes `text` to `dir/name`.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(&path, e))
}
