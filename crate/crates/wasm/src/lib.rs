//! Browser bindings: small simulations that finish in well under a second
//! for baths of up to about twelve spins. Every function returns a flat
//! `Float64Array`; the row layout is given in its doc comment.

use spinbath::fitting::melik_curve;
use spinbath::hilbert::partial_trace_env;
use spinbath::model::{assemble, Part};
use spinbath::observables::{eigendecompose_system, singlet_triplet_coherence, DEFAULT_FLOOR};
use spinbath::propagate::{operator_bounds, BoundsMethod, DEFAULT_TAU, DEFAULT_TRUNCATION_TOL};
use spinbath::states::{make_state, product_state, Target};
use spinbath::{
    ChebyshevPropagator, CouplingFamily, FamilyKind, HamiltonianSpec, MetricSample, PropagatorPlan,
    RngStreams, SpinOperator, StateKind, StateLabel, StateVector, Stream, TopologyKind,
};
use wasm_bindgen::prelude::*;

/// Largest whole system the page may request.
const MAX_SPINS: usize = 16;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

fn topology(name: &str) -> Result<TopologyKind, JsError> {
    name.parse().map_err(js)
}

struct Model {
    spec: HamiltonianSpec,
    psi0: StateVector,
}

fn build(
    system: Part,
    environment: Part,
    interaction: CouplingFamily,
    env_state: StateKind,
    seed: u64,
) -> Result<Model, JsError> {
    if system.n + environment.n > MAX_SPINS {
        return Err(JsError::new(&format!(
            "at most {MAX_SPINS} spins in the browser"
        )));
    }
    let streams = RngStreams::new(seed);
    let spec = assemble(system, environment, interaction, &streams).map_err(js)?;
    let sys = make_state(
        &StateLabel::new(StateKind::Ud, Target::System),
        spec.n_s,
        None,
        &mut streams.stream(Stream::StateSystem),
    )
    .map_err(js)?;
    let h_e = if env_state.needs_hamiltonian() {
        Some(SpinOperator::from_spec(&spec.environment_only()).map_err(js)?)
    } else {
        None
    };
    let env = make_state(
        &StateLabel::new(env_state, Target::Environment),
        spec.n_env,
        h_e.as_ref(),
        &mut streams.stream(Stream::StateEnvironment),
    )
    .map_err(js)?;
    let psi0 = product_state(&sys, &env);
    Ok(Model { spec, psi0 })
}

fn evolve(
    model: &Model,
    steps: usize,
    seed: u64,
    mut visit: impl FnMut(f64, &StateVector) -> Result<(), JsError>,
) -> Result<(), JsError> {
    let op = SpinOperator::from_spec(&model.spec).map_err(js)?;
    let bounds = operator_bounds(
        &op,
        BoundsMethod::Gershgorin,
        &mut RngStreams::new(seed).stream(Stream::Krylov),
    )
    .map_err(js)?;
    let plan = PropagatorPlan::new(DEFAULT_TAU, bounds, DEFAULT_TRUNCATION_TOL).map_err(js)?;
    let mut prop = ChebyshevPropagator::new(op, plan);
    let mut psi = model.psi0.clone();
    for k in 0..=steps {
        if k > 0 {
            prop.step(&mut psi).map_err(js)?;
        }
        visit(k as f64 * DEFAULT_TAU, &psi)?;
    }
    Ok(())
}

/// Sorted eigenvalues of a Heisenberg system of `n_s` spins with exchange
/// `j` on `topology` (`ring` or `spin_glass`).
#[wasm_bindgen]
pub fn system_spectrum(n_s: usize, j: f64, topology_name: &str) -> Result<Vec<f64>, JsError> {
    let streams = RngStreams::new(0);
    let spec = assemble(
        Part {
            topology: topology(topology_name)?,
            n: n_s,
            family: CouplingFamily::new(FamilyKind::Heisenberg, j),
        },
        Part {
            topology: TopologyKind::None,
            n: 0,
            family: CouplingFamily::new(FamilyKind::Heisenberg, 0.0),
        },
        CouplingFamily::new(FamilyKind::Heisenberg, 0.0),
        &streams,
    )
    .map_err(js)?;
    Ok(eigendecompose_system(&spec).map_err(js)?.energies)
}

/// Two antiferromagnetic spins in `|↑↓⟩` coupled isotropically to a
/// Heisenberg-type ring bath in a random state. Rows of four:
/// `t, Re⟨S|ρ|T0⟩, |⟨S|ρ|T0⟩|, large-bath law`.
#[wasm_bindgen]
pub fn pair_decoherence(
    j: f64,
    delta: f64,
    omega: f64,
    n_env: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let model = build(
        Part {
            topology: TopologyKind::Ring,
            n: 2,
            family: CouplingFamily::new(FamilyKind::Heisenberg, j),
        },
        Part {
            topology: TopologyKind::Ring,
            n: n_env,
            family: CouplingFamily::new(FamilyKind::HeisenbergType, omega),
        },
        CouplingFamily::new(FamilyKind::Heisenberg, delta),
        StateKind::Random,
        seed,
    )?;
    let mut out = Vec::with_capacity(4 * (steps + 1));
    evolve(&model, steps, seed, |t, psi| {
        let rho = partial_trace_env(psi, 2).map_err(js)?;
        let c = singlet_triplet_coherence(&rho).map_err(js)?;
        out.extend([t, c.re, c.norm(), melik_curve(t, n_env, delta, j)]);
        Ok(())
    })?;
    Ok(out)
}

/// Four-spin Heisenberg ring in `|↑↓↑↓⟩` coupled through Heisenberg-type
/// bonds to a spin-glass bath in a random state. Rows of five:
/// `t, σ, δ (NaN when b is undefined), b (NaN when undefined), E_S`.
#[wasm_bindgen]
pub fn ring_relaxation(
    j: f64,
    delta: f64,
    omega: f64,
    n_env: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let model = build(
        Part {
            topology: TopologyKind::Ring,
            n: 4,
            family: CouplingFamily::new(FamilyKind::Heisenberg, j),
        },
        Part {
            topology: TopologyKind::SpinGlass,
            n: n_env,
            family: CouplingFamily::new(FamilyKind::HeisenbergType, omega),
        },
        CouplingFamily::new(FamilyKind::HeisenbergType, delta),
        StateKind::Random,
        seed,
    )?;
    let basis = eigendecompose_system(&model.spec).map_err(js)?;
    let mut out = Vec::with_capacity(5 * (steps + 1));
    evolve(&model, steps, seed, |t, psi| {
        let rho = partial_trace_env(psi, 4).map_err(js)?;
        let m = MetricSample::compute(t, &rho, &basis, None, DEFAULT_FLOOR, false).map_err(js)?;
        out.extend([
            t,
            m.sigma,
            m.delta.unwrap_or(f64::NAN),
            m.b.unwrap_or(f64::NAN),
            m.e_s,
        ]);
        Ok(())
    })?;
    Ok(out)
}
