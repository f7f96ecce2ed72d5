//! Quantum natural gradient on the statevector: analytic derivative states,
//! the Fubini-Study metric, the regularized natural-gradient step and the
//! optimization loop.
//!
//! With `R(Θ_p) = exp(−iΘ_p O_p)` the derivative state is
//! `|∂_pψ⟩ = U_{>p} (−iO_p) U_{≤p} |+⟩`, the metric is
//! `g_pq = Re⟨∂_pψ|∂_qψ⟩ − Re(⟨∂_pψ|ψ⟩⟨ψ|∂_qψ⟩)` and the gradient of
//! `⟨H⟩` is `2·Re⟨∂_pψ|H|ψ⟩`.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;

use crate::ansatz::{ParameterVector, ParametricCircuit};
use crate::pauli::WeightedPauliSum;
use crate::state::{inner_slices, StateVector};
use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_REGULARIZATION: f64 = 1e-4;
pub const DEFAULT_MAX_HALVINGS: u32 = 8;
/// Energy increase tolerated on an accepted step.
pub const ENERGY_TOLERANCE: f64 = 1e-9;
/// How many times the Tikhonov shift is multiplied by 10 before giving up.
const MAX_ESCALATIONS: u32 = 12;

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Real symmetric `P×P` Fubini-Study metric.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMatrix {
    entries: DMatrix<f64>,
}

impl MetricMatrix {
    /// Wraps a square matrix, rejecting asymmetry beyond `1e−12` relative to its scale.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::SizeMismatch {
                left: entries.nrows(),
                right: entries.ncols(),
            });
        }
        let scale = entries.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let n = entries.nrows();
        for p in 0..n {
            for q in p + 1..n {
                if (entries[(p, q)] - entries[(q, p)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidAnsatz(alloc::format!(
                        "metric is not symmetric at ({p}, {q})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.entries[(p, q)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Derivative states `|∂_pψ⟩` for every parameter, alongside `|ψ⟩` itself.
///
/// Every derivative is created at its gate and carried forward through the
/// rest of the circuit, so the cost is `O(P²·2^n)`.
pub fn derivative_states(circuit: &ParametricCircuit, params: &[f64]) -> Result<(StateVector, Vec<StateVector>)> {
    circuit.check_params(params)?;
    let mut psi = StateVector::plus(circuit.n_qubits())?;
    let mut derivs: Vec<StateVector> = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let gate = circuit.gate(params, p);
        psi.apply_rotation(&gate)?;
        for d in &mut derivs {
            d.apply_rotation(&gate)?;
        }
        let mut d = psi.clone();
        d.apply_pauli(&circuit.generators()[p].clone().with_phase(MINUS_I))?;
        derivs.push(d);
    }
    Ok((psi, derivs))
}

/// `|∂_pψ⟩ = U_{>p} (−iO_p) U_{≤p} |+⟩`.
pub fn derivative_state(circuit: &ParametricCircuit, params: &[f64], p: usize) -> Result<StateVector> {
    let o = circuit.generator(p)?.clone().with_phase(MINUS_I);
    let mut s = circuit.prepare_truncated(params, p, true)?;
    s.apply_pauli(&o)?;
    circuit.apply_range(&mut s, params, p + 1..params.len())?;
    Ok(s)
}

fn check_observable(circuit: &ParametricCircuit, h: &WeightedPauliSum) -> Result<()> {
    if h.n_qubits() != circuit.n_qubits() {
        return Err(Error::SizeMismatch {
            left: circuit.n_qubits(),
            right: h.n_qubits(),
        });
    }
    if !h.is_hermitian() {
        return Err(Error::NonHermitian);
    }
    Ok(())
}

/// `∂⟨H⟩/∂Θ_p = 2·Re⟨∂_pψ|H|ψ⟩`, by reverse-mode sweep in `O(P·2^n)`.
pub fn gradient_exact(circuit: &ParametricCircuit, params: &[f64], h: &WeightedPauliSum) -> Result<Vec<f64>> {
    check_observable(circuit, h)?;
    let mut psi = circuit.prepare_state(params)?;
    let mut lambda = psi.apply_sum(h)?;
    let mut grad = alloc::vec![0.0; params.len()];
    for p in (0..params.len()).rev() {
        // Both states sit just after gate p, where O_p commutes with the
        // rotation, so ⟨λ|(−iO_p)|ψ⟩ is the derivative overlap.
        let mut o_psi = psi.clone();
        o_psi.apply_pauli(&circuit.generators()[p])?;
        grad[p] = 2.0 * lambda.inner(&o_psi)?.im;
        let inv = circuit.gate(params, p).inverse();
        psi.apply_rotation(&inv)?;
        lambda.apply_rotation(&inv)?;
    }
    Ok(grad)
}

fn metric_from_derivatives(psi: &StateVector, derivs: &[StateVector]) -> Result<MetricMatrix> {
    let n = derivs.len();
    let a: Vec<Complex64> = derivs.iter().map(|d| inner_slices(psi.amplitudes(), d.amplitudes())).collect();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let overlap = inner_slices(derivs[p].amplitudes(), derivs[q].amplitudes());
            let v = overlap.re - (a[p].conj() * a[q]).re;
            g[(p, q)] = v;
            g[(q, p)] = v;
        }
    }
    MetricMatrix::new(g)
}

pub fn metric_exact(circuit: &ParametricCircuit, params: &[f64]) -> Result<MetricMatrix> {
    let (psi, derivs) = derivative_states(circuit, params)?;
    metric_from_derivatives(&psi, &derivs)
}

/// Energy, gradient and (optionally) metric at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub metric: Option<MetricMatrix>,
}

/// Source of energies, gradients and metrics for the optimizer.
pub trait Objective {
    fn n_params(&self) -> usize;
    fn energy(&mut self, params: &[f64]) -> Result<f64>;
    fn evaluate(&mut self, params: &[f64], with_metric: bool) -> Result<Evaluation>;
}

/// Exact statevector objective `⟨ψ(Θ)|H|ψ(Θ)⟩`.
#[derive(Clone, Debug)]
pub struct ExactObjective {
    circuit: ParametricCircuit,
    hamiltonian: WeightedPauliSum,
}

impl ExactObjective {
    pub fn new(circuit: ParametricCircuit, hamiltonian: WeightedPauliSum) -> Result<Self> {
        check_observable(&circuit, &hamiltonian)?;
        Ok(Self { circuit, hamiltonian })
    }

    pub fn circuit(&self) -> &ParametricCircuit {
        &self.circuit
    }
}

impl Objective for ExactObjective {
    fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn energy(&mut self, params: &[f64]) -> Result<f64> {
        self.circuit.prepare_state(params)?.expectation(&self.hamiltonian)
    }

    fn evaluate(&mut self, params: &[f64], with_metric: bool) -> Result<Evaluation> {
        if !with_metric {
            return Ok(Evaluation {
                energy: self.energy(params)?,
                gradient: gradient_exact(&self.circuit, params, &self.hamiltonian)?,
                metric: None,
            });
        }
        let (psi, derivs) = derivative_states(&self.circuit, params)?;
        let h_psi = psi.apply_sum(&self.hamiltonian)?;
        let energy = psi.inner(&h_psi)?.re;
        let gradient = derivs
            .iter()
            .map(|d| 2.0 * inner_slices(d.amplitudes(), h_psi.amplitudes()).re)
            .collect();
        let metric = metric_from_derivatives(&psi, &derivs)?;
        Ok(Evaluation {
            energy,
            gradient,
            metric: Some(metric),
        })
    }
}

/// Solves `(g + λI)·d = grad`, multiplying `λ` by 10 whenever the Cholesky
/// factorization fails. Returns the direction and the `λ` that succeeded.
pub fn natural_direction(metric: &MetricMatrix, grad: &[f64], regularization: f64) -> Result<(Vec<f64>, f64)> {
    let n = metric.dim();
    if grad.len() != n {
        return Err(Error::SizeMismatch { left: n, right: grad.len() });
    }
    let rhs = DVector::from_column_slice(grad);
    let mut lambda = regularization;
    for _ in 0..=MAX_ESCALATIONS {
        let shifted = metric.as_matrix() + DMatrix::<f64>::identity(n, n) * lambda;
        if let Some(chol) = Cholesky::new(shifted) {
            let d = chol.solve(&rhs);
            if d.iter().all(|x| x.is_finite()) {
                return Ok((d.iter().copied().collect(), lambda));
            }
        }
        lambda *= 10.0;
    }
    Err(Error::SolveFailed(lambda / 10.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub params: ParameterVector,
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
}

impl OptimizerState {
    pub fn new(params: ParameterVector, learning_rate: f64) -> Self {
        Self {
            params,
            iteration: 0,
            energy: f64::INFINITY,
            grad_norm: f64::INFINITY,
            learning_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    /// Natural gradient with the Fubini-Study metric.
    FubiniStudy,
    /// Plain gradient descent.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QngOptions {
    pub learning_rate: f64,
    pub regularization: f64,
    /// Step halvings tried before a step is declared stalled; `None`
    /// disables the energy safeguard (every step is accepted).
    pub max_halvings: Option<u32>,
    pub max_iters: usize,
    /// Relative energy error against the reference at which the run stops.
    pub target_rel_error: f64,
    pub grad_tol: f64,
    pub preconditioner: Preconditioner,
}

impl Default for QngOptions {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            regularization: DEFAULT_REGULARIZATION,
            max_halvings: Some(DEFAULT_MAX_HALVINGS),
            max_iters: 500,
            target_rel_error: 1e-3,
            grad_tol: 1e-6,
            preconditioner: Preconditioner::FubiniStudy,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: OptimizerState,
    /// Regularization that made the solve succeed.
    pub regularization: f64,
    pub halvings: u32,
    /// False when every halving still raised the energy; `state` then keeps the old parameters.
    pub accepted: bool,
}

/// One update `Θ ← Θ − η·(g + λI)⁻¹·grad` with the step-halving safeguard.
///
/// `state.energy` must be the energy at `state.params`; `energy` evaluates
/// trial points.
pub fn qng_step<F>(
    state: &OptimizerState,
    grad: &[f64],
    metric: &MetricMatrix,
    options: &QngOptions,
    mut energy: F,
) -> Result<StepOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if grad.len() != state.params.len() {
        return Err(Error::ParameterLength {
            got: grad.len(),
            expected: state.params.len(),
        });
    }
    let (d, lambda) = natural_direction(metric, grad, options.regularization)?;
    let mut eta = state.learning_rate;
    let tries = options.max_halvings.map_or(0, |h| h);
    for halvings in 0..=tries {
        let trial: Vec<f64> = state.params.iter().zip(&d).map(|(t, di)| t - eta * di).collect();
        let e = energy(&trial)?;
        if options.max_halvings.is_none() || e <= state.energy + ENERGY_TOLERANCE {
            return Ok(StepOutcome {
                state: OptimizerState {
                    params: trial.into(),
                    iteration: state.iteration + 1,
                    energy: e,
                    grad_norm: norm(grad),
                    learning_rate: state.learning_rate,
                },
                regularization: lambda,
                halvings,
                accepted: true,
            });
        }
        eta *= 0.5;
    }
    Ok(StepOutcome {
        state: OptimizerState {
            iteration: state.iteration + 1,
            ..state.clone()
        },
        regularization: lambda,
        halvings: tries,
        accepted: false,
    })
}

fn norm(v: &[f64]) -> f64 {
    Float::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// `|E − E₀|/|E₀|` when a reference energy is known.
    pub rel_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    GradientVanished,
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome {
    /// Best point visited.
    pub state: OptimizerState,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub converged: bool,
}

fn relative_error(energy: f64, reference: f64) -> f64 {
    (energy - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Iterates [`qng_step`] until the relative error against `reference` drops
/// below the target, the gradient norm falls under `grad_tol`, the step
/// stalls, or `max_iters` is reached.
///
/// Without a reference the run counts as converged when the gradient
/// vanishes; with one, only reaching the target counts.
pub fn optimize<O: Objective>(
    objective: &mut O,
    initial: ParameterVector,
    options: &QngOptions,
    reference: Option<f64>,
) -> Result<OptimizeOutcome> {
    if initial.len() != objective.n_params() {
        return Err(Error::ParameterLength {
            got: initial.len(),
            expected: objective.n_params(),
        });
    }
    let with_metric = options.preconditioner == Preconditioner::FubiniStudy;
    let mut state = OptimizerState::new(initial, options.learning_rate);
    let mut eval = objective.evaluate(&state.params, with_metric)?;
    let mut trace = Vec::new();
    let mut best: Option<OptimizerState> = None;

    let stop = loop {
        state.energy = eval.energy;
        state.grad_norm = norm(&eval.gradient);
        let rel_error = reference.map(|r| relative_error(eval.energy, r));
        trace.push(TraceRow {
            iter: state.iteration,
            energy: state.energy,
            grad_norm: state.grad_norm,
            rel_error,
        });
        if best.as_ref().is_none_or(|b| state.energy < b.energy) {
            best = Some(state.clone());
        }
        if rel_error.is_some_and(|r| r < options.target_rel_error) {
            break StopReason::TargetReached;
        }
        if state.grad_norm < options.grad_tol {
            break StopReason::GradientVanished;
        }
        if state.iteration >= options.max_iters {
            break StopReason::MaxIterations;
        }
        let metric = eval.metric.take().unwrap_or_else(|| MetricMatrix::identity(state.params.len()));
        let step = qng_step(&state, &eval.gradient, &metric, options, |p| objective.energy(p))?;
        if !step.accepted {
            break StopReason::Stalled;
        }
        state = step.state;
        eval = objective.evaluate(&state.params, with_metric)?;
    };

    let converged = match stop {
        StopReason::TargetReached => true,
        StopReason::GradientVanished => reference.is_none(),
        StopReason::Stalled | StopReason::MaxIterations => false,
    };
    let mut best = best.expect("trace holds at least the initial point");
    best.iteration = state.iteration;
    Ok(OptimizeOutcome {
        state: best,
        trace,
        stop,
        converged,
    })
}
