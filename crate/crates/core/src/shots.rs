//! Measurement-based estimation: ancilla Hadamard tests for gradient
//! components and metric overlaps, and sampled Pauli expectations.
//!
//! A Hadamard test prepends an ancilla in |+⟩ as the most significant qubit,
//! runs a recipe of register gates and ancilla-controlled insertions, rotates
//! the ancilla into the requested basis and samples full bitstrings. With
//! `|φ₀⟩, |φ₁⟩` the register states on the control-0 and control-1 branches,
//! the X-basis mean estimates `Re⟨φ₀|φ₁⟩` and the Y-basis mean `Im⟨φ₀|φ₁⟩`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Float;
use rand::Rng;

use crate::ansatz::ParametricCircuit;
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::qng::{Evaluation, MetricMatrix, Objective};
use crate::rng::stream;
use crate::state::{ControlledOp, RotationGate, StateVector};
use crate::{Error, Result};

/// How many samples to draw and from which random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotPlan {
    pub shots: u64,
    pub seed: u64,
    /// Run index mixed into every circuit's stream, for repeated runs.
    pub run: u64,
    /// Infinite-shot limit: exact means, zero standard error.
    pub analytic: bool,
}

impl ShotPlan {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(Self {
            shots,
            seed,
            run: 0,
            analytic: false,
        })
    }

    pub fn analytic() -> Self {
        Self {
            shots: 0,
            seed: 0,
            run: 0,
            analytic: true,
        }
    }

    pub fn with_run(self, run: u64) -> Self {
        Self { run, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeasurementBasis {
    X,
    Y,
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementBasis::X => "X",
            MeasurementBasis::Y => "Y",
        })
    }
}

/// One estimated quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRecord {
    pub circuit_id: String,
    /// Ancilla basis (`X`/`Y`) or the measured Pauli string.
    pub basis: String,
    pub value: f64,
    pub std_error: f64,
    /// Zero in analytic mode.
    pub shots_used: u64,
}

/// One step of a Hadamard-test circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum RecipeStep {
    Gate(RotationGate),
    Controlled(ControlledOp),
}

/// Register gates interleaved with ancilla-controlled insertions.
#[derive(Clone, Debug, PartialEq)]
pub struct HadamardRecipe {
    n_qubits: usize,
    steps: Vec<RecipeStep>,
}

impl HadamardRecipe {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            steps: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn steps(&self) -> &[RecipeStep] {
        &self.steps
    }

    pub fn push_gate(&mut self, gate: RotationGate) -> Result<&mut Self> {
        self.check_size(gate.generator().n_qubits())?;
        self.steps.push(RecipeStep::Gate(gate));
        Ok(self)
    }

    pub fn push_gates<I: IntoIterator<Item = RotationGate>>(&mut self, gates: I) -> Result<&mut Self> {
        for g in gates {
            self.push_gate(g)?;
        }
        Ok(self)
    }

    /// Adds an insertion acting on the control-1 branch. Pauli insertions
    /// must carry a unit-modulus phase and phases must be unit-modulus.
    pub fn push_controlled(&mut self, op: ControlledOp) -> Result<&mut Self> {
        let phase = match &op {
            ControlledOp::Pauli(p) => {
                self.check_size(p.n_qubits())?;
                p.phase()
            }
            ControlledOp::Rotation(g) => {
                self.check_size(g.generator().n_qubits())?;
                Complex64::new(1.0, 0.0)
            }
            ControlledOp::Phase(ph) => *ph,
        };
        if (phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAnsatz(format!(
                "controlled insertion has non-unitary phase {phase}"
            )));
        }
        self.steps.push(RecipeStep::Controlled(op));
        Ok(self)
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: n,
            });
        }
        Ok(())
    }

    /// The `(n+1)`-qubit state just before the ancilla is measured, starting
    /// from `|+⟩_anc ⊗ initial`.
    pub fn prepare(&self, initial: &StateVector) -> Result<StateVector> {
        self.check_size(initial.n_qubits())?;
        let n = self.n_qubits + 1;
        let mut s = initial.with_plus_ancilla()?;
        for step in &self.steps {
            match step {
                RecipeStep::Gate(g) => {
                    s.apply_rotation(&RotationGate::new(g.generator().extended(n)?, g.angle())?)?;
                }
                RecipeStep::Controlled(op) => {
                    let wide = match op {
                        ControlledOp::Pauli(p) => ControlledOp::Pauli(p.extended(n)?),
                        ControlledOp::Rotation(g) => {
                            ControlledOp::Rotation(RotationGate::new(g.generator().extended(n)?, g.angle())?)
                        }
                        ControlledOp::Phase(ph) => ControlledOp::Phase(*ph),
                    };
                    s.apply_controlled(self.n_qubits, &wide)?;
                }
            }
        }
        Ok(s)
    }
}

/// Purity `tr ρ²` of the ancilla in a prepared Hadamard-test state,
/// equal to `½(1 + |⟨φ₀|φ₁⟩|²)`.
pub fn ancilla_purity(joint: &StateVector) -> f64 {
    let half = joint.dim() / 2;
    let a = joint.amplitudes();
    let (lo, hi) = a.split_at(half);
    let p0: f64 = lo.iter().map(|x| x.norm_sqr()).sum();
    let p1: f64 = hi.iter().map(|x| x.norm_sqr()).sum();
    let off: Complex64 = lo.iter().zip(hi).map(|(x, y)| x * y.conj()).sum();
    p0 * p0 + p1 * p1 + 2.0 * off.norm_sqr()
}

/// Draws `shots` full bitstrings from `state` by inverse-CDF sampling.
fn sample_bitstrings<R: Rng>(state: &StateVector, shots: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    (0..shots)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
        })
        .collect()
}

/// Mean and standard error of ±1 outcomes.
fn pm_one_estimate(outcomes: impl Iterator<Item = bool>, shots: u64) -> (f64, f64) {
    let plus = outcomes.filter(|&b| b).count() as f64;
    let n = shots as f64;
    let mean = (2.0 * plus - n) / n;
    (mean, Float::sqrt((1.0 - mean * mean).max(0.0) / n))
}

/// Measures the ancilla (most significant qubit) of `joint` in `basis`.
fn measure_ancilla(
    mut joint: StateVector,
    basis: MeasurementBasis,
    plan: &ShotPlan,
    circuit_id: &str,
) -> Result<EstimateRecord> {
    let n = joint.n_qubits();
    let anc = n - 1;
    let rotation = match basis {
        MeasurementBasis::X => RotationGate::new(PauliString::single(n, anc, Pauli::Y)?, -FRAC_PI_4)?,
        MeasurementBasis::Y => RotationGate::new(PauliString::single(n, anc, Pauli::X)?, FRAC_PI_4)?,
    };
    joint.apply_rotation(&rotation)?;
    let (value, std_error, shots_used) = if plan.analytic {
        let z = joint.pauli_expectation(&PauliString::single(n, anc, Pauli::Z)?)?.re;
        (z, 0.0, 0)
    } else {
        if plan.shots == 0 {
            return Err(Error::ZeroShots);
        }
        let mut rng = stream(plan.seed, circuit_id, plan.run);
        let bits = sample_bitstrings(&joint, plan.shots, &mut rng);
        let (m, se) = pm_one_estimate(bits.iter().map(|b| (b >> anc) & 1 == 0), plan.shots);
        (m, se, plan.shots)
    };
    Ok(EstimateRecord {
        circuit_id: circuit_id.into(),
        basis: format!("{basis}"),
        value,
        std_error,
        shots_used,
    })
}

/// Hadamard test on the register prepared in `|+⟩^⊗n`.
pub fn hadamard_test(
    recipe: &HadamardRecipe,
    basis: MeasurementBasis,
    plan: &ShotPlan,
    circuit_id: &str,
) -> Result<EstimateRecord> {
    hadamard_test_on(&StateVector::plus(recipe.n_qubits())?, recipe, basis, plan, circuit_id)
}

/// Hadamard test on the register prepared in `initial`.
pub fn hadamard_test_on(
    initial: &StateVector,
    recipe: &HadamardRecipe,
    basis: MeasurementBasis,
    plan: &ShotPlan,
    circuit_id: &str,
) -> Result<EstimateRecord> {
    measure_ancilla(recipe.prepare(initial)?, basis, plan, circuit_id)
}

/// Samples a single hermitian Pauli string: rotates each measured qubit to
/// the computational basis, samples bitstrings and averages the eigenvalue
/// products.
pub fn sample_pauli_expectation(
    state: &StateVector,
    obs: &PauliString,
    plan: &ShotPlan,
    circuit_id: &str,
) -> Result<EstimateRecord> {
    if !obs.is_hermitian() {
        return Err(Error::NonHermitian);
    }
    if obs.n_qubits() != state.n_qubits() {
        return Err(Error::SizeMismatch {
            left: state.n_qubits(),
            right: obs.n_qubits(),
        });
    }
    let sign = obs.phase().re;
    let basis = format!("{obs}");
    if plan.analytic {
        return Ok(EstimateRecord {
            circuit_id: circuit_id.into(),
            basis,
            value: state.pauli_expectation(obs)?.re,
            std_error: 0.0,
            shots_used: 0,
        });
    }
    if plan.shots == 0 {
        return Err(Error::ZeroShots);
    }
    let n = state.n_qubits();
    let mut s = state.clone();
    for (site, op) in obs.ops() {
        match op {
            Pauli::X => s.apply_rotation(&RotationGate::new(PauliString::single(n, site, Pauli::Y)?, -FRAC_PI_4)?)?,
            Pauli::Y => s.apply_rotation(&RotationGate::new(PauliString::single(n, site, Pauli::X)?, FRAC_PI_4)?)?,
            Pauli::Z => {}
        }
    }
    let mask = obs.support();
    let mut rng = stream(plan.seed, circuit_id, plan.run);
    let bits = sample_bitstrings(&s, plan.shots, &mut rng);
    let (m, se) = pm_one_estimate(bits.iter().map(|b| (b & mask).count_ones().is_multiple_of(2)), plan.shots);
    Ok(EstimateRecord {
        circuit_id: circuit_id.into(),
        basis,
        value: sign * m,
        std_error: se,
        shots_used: plan.shots,
    })
}

/// `⟨H⟩` as the weighted sum of independently sampled Pauli terms.
pub fn energy_shot(
    state: &StateVector,
    h: &WeightedPauliSum,
    plan: &ShotPlan,
    id_prefix: &str,
) -> Result<(f64, f64, Vec<EstimateRecord>)> {
    if !h.is_hermitian() {
        return Err(Error::NonHermitian);
    }
    let mut value = 0.0;
    let mut var = 0.0;
    let mut records = Vec::new();
    for (c, p) in h.terms() {
        let w = c.re;
        if p.is_identity() {
            value += w;
            continue;
        }
        let r = sample_pauli_expectation(state, &p, plan, &format!("{id_prefix}energy/{p}"))?;
        value += w * r.value;
        var += w * w * r.std_error * r.std_error;
        records.push(r);
    }
    Ok((value, Float::sqrt(var), records))
}

fn minus_i(p: &PauliString) -> PauliString {
    p.clone().with_phase(Complex64::new(0.0, -1.0))
}

fn plus_i(p: &PauliString) -> PauliString {
    p.clone().with_phase(Complex64::new(0.0, 1.0))
}

fn gates<'a>(circuit: &'a ParametricCircuit, params: &'a [f64], range: core::ops::Range<usize>) -> impl Iterator<Item = RotationGate> + 'a {
    range.map(move |p| circuit.gate(params, p))
}

/// Recipe whose X-basis mean is `Re⟨∂_pψ|h|ψ⟩` for a hermitian Pauli `h`.
///
/// `insert_before` places the controlled `−iO_p` before rather than after
/// the rotation carrying `Θ_p`; both give the same branch states.
pub fn gradient_recipe(
    circuit: &ParametricCircuit,
    params: &[f64],
    p: usize,
    h: &PauliString,
    insert_before: bool,
) -> Result<HadamardRecipe> {
    circuit.check_params(params)?;
    let o = circuit.generator(p)?;
    let mut r = HadamardRecipe::new(circuit.n_qubits());
    let cut = if insert_before { p } else { p + 1 };
    r.push_gates(gates(circuit, params, 0..cut))?;
    r.push_controlled(ControlledOp::Pauli(minus_i(o)))?;
    r.push_gates(gates(circuit, params, cut..params.len()))?;
    r.push_controlled(ControlledOp::Pauli(h.clone()))?;
    Ok(r)
}

/// Recipe whose Y-basis mean is `Im⟨ψ|∂_pψ⟩`.
pub fn projector_recipe(circuit: &ParametricCircuit, params: &[f64], p: usize) -> Result<HadamardRecipe> {
    circuit.check_params(params)?;
    let o = circuit.generator(p)?;
    let mut r = HadamardRecipe::new(circuit.n_qubits());
    r.push_gates(gates(circuit, params, 0..p + 1))?;
    r.push_controlled(ControlledOp::Pauli(minus_i(o)))?;
    Ok(r)
}

/// Recipe whose X-basis mean is `Re⟨∂_pψ|∂_qψ⟩` for `p ≤ q`.
pub fn overlap_recipe(circuit: &ParametricCircuit, params: &[f64], p: usize, q: usize) -> Result<HadamardRecipe> {
    circuit.check_params(params)?;
    if p > q {
        return Err(Error::ParameterIndex { index: p, count: q + 1 });
    }
    let (op, oq) = (circuit.generator(p)?, circuit.generator(q)?);
    let mut r = HadamardRecipe::new(circuit.n_qubits());
    r.push_gates(gates(circuit, params, 0..p + 1))?;
    r.push_controlled(ControlledOp::Pauli(minus_i(op)))?;
    r.push_gates(gates(circuit, params, p + 1..q + 1))?;
    r.push_controlled(ControlledOp::Pauli(plus_i(oq)))?;
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub records: Vec<EstimateRecord>,
}

/// Gradient of `⟨H⟩` from X-basis Hadamard tests: component `p` is
/// `2·Σ_j c_j·mean_j` over the Hamiltonian terms `c_j h_j`.
pub fn gradient_shot(
    circuit: &ParametricCircuit,
    params: &[f64],
    h: &WeightedPauliSum,
    plan: &ShotPlan,
) -> Result<GradientEstimate> {
    gradient_shot_tagged(circuit, params, h, plan, "")
}

fn gradient_shot_tagged(
    circuit: &ParametricCircuit,
    params: &[f64],
    h: &WeightedPauliSum,
    plan: &ShotPlan,
    tag: &str,
) -> Result<GradientEstimate> {
    if !h.is_hermitian() {
        return Err(Error::NonHermitian);
    }
    if h.n_qubits() != circuit.n_qubits() {
        return Err(Error::SizeMismatch {
            left: circuit.n_qubits(),
            right: h.n_qubits(),
        });
    }
    circuit.check_params(params)?;
    let terms: Vec<(f64, PauliString)> = h
        .terms()
        .filter(|(c, _)| c.re != 0.0)
        .map(|(c, p)| (c.re, p))
        .collect();
    let mut values = Vec::with_capacity(params.len());
    let mut std_errors = Vec::with_capacity(params.len());
    let mut records = Vec::new();
    for p in 0..params.len() {
        let (mut g, mut var) = (0.0, 0.0);
        for (j, (c, hj)) in terms.iter().enumerate() {
            let recipe = gradient_recipe(circuit, params, p, hj, false)?;
            let r = hadamard_test(&recipe, MeasurementBasis::X, plan, &format!("{tag}grad/p{p}/t{j}"))?;
            g += 2.0 * c * r.value;
            var += 4.0 * c * c * r.std_error * r.std_error;
            records.push(r);
        }
        values.push(g);
        std_errors.push(Float::sqrt(var));
    }
    Ok(GradientEstimate {
        values,
        std_errors,
        records,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricEstimate {
    pub metric: MetricMatrix,
    pub records: Vec<EstimateRecord>,
}

/// Metric from Hadamard tests: `g_pq = r_pq − y_p·y_q` with `r_pq` from the
/// two-insertion X-basis circuits and `y_p = Im⟨ψ|∂_pψ⟩` from Y-basis
/// circuits. Only the upper triangle is measured.
pub fn metric_shot(circuit: &ParametricCircuit, params: &[f64], plan: &ShotPlan) -> Result<MetricEstimate> {
    metric_shot_tagged(circuit, params, plan, "")
}

fn metric_shot_tagged(circuit: &ParametricCircuit, params: &[f64], plan: &ShotPlan, tag: &str) -> Result<MetricEstimate> {
    circuit.check_params(params)?;
    let n = params.len();
    let mut records = Vec::new();
    let mut y = Vec::with_capacity(n);
    for p in 0..n {
        let r = hadamard_test(
            &projector_recipe(circuit, params, p)?,
            MeasurementBasis::Y,
            plan,
            &format!("{tag}metric/y/p{p}"),
        )?;
        y.push(r.value);
        records.push(r);
    }
    let mut g = DMatrix::<f64>::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let r = hadamard_test(
                &overlap_recipe(circuit, params, p, q)?,
                MeasurementBasis::X,
                plan,
                &format!("{tag}metric/x/p{p}q{q}"),
            )?;
            let v = r.value - y[p] * y[q];
            g[(p, q)] = v;
            g[(q, p)] = v;
            records.push(r);
        }
    }
    Ok(MetricEstimate {
        metric: MetricMatrix::new(g)?,
        records,
    })
}

/// Objective whose energies, gradients and metrics all come from sampled circuits.
///
/// Every evaluation draws fresh streams: the evaluation counter is part of
/// each circuit identifier.
#[derive(Clone, Debug)]
pub struct ShotObjective {
    circuit: ParametricCircuit,
    hamiltonian: WeightedPauliSum,
    plan: ShotPlan,
    evaluations: u64,
}

impl ShotObjective {
    pub fn new(circuit: ParametricCircuit, hamiltonian: WeightedPauliSum, plan: ShotPlan) -> Result<Self> {
        if hamiltonian.n_qubits() != circuit.n_qubits() {
            return Err(Error::SizeMismatch {
                left: circuit.n_qubits(),
                right: hamiltonian.n_qubits(),
            });
        }
        if !hamiltonian.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        if !plan.analytic && plan.shots == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(Self {
            circuit,
            hamiltonian,
            plan,
            evaluations: 0,
        })
    }

    fn next_tag(&mut self) -> String {
        self.evaluations += 1;
        format!("e{}/", self.evaluations)
    }
}

impl Objective for ShotObjective {
    fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn energy(&mut self, params: &[f64]) -> Result<f64> {
        let tag = self.next_tag();
        let state = self.circuit.prepare_state(params)?;
        Ok(energy_shot(&state, &self.hamiltonian, &self.plan, &tag)?.0)
    }

    fn evaluate(&mut self, params: &[f64], with_metric: bool) -> Result<Evaluation> {
        let energy = self.energy(params)?;
        let tag = self.next_tag();
        let gradient = gradient_shot_tagged(&self.circuit, params, &self.hamiltonian, &self.plan, &tag)?.values;
        let metric = if with_metric {
            Some(metric_shot_tagged(&self.circuit, params, &self.plan, &tag)?.metric)
        } else {
            None
        };
        Ok(Evaluation {
            energy,
            gradient,
            metric,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnsatzSpec;
    use crate::model::{build_hamiltonian, exact_ground, Boundary, ModelParams};
    use crate::qng::{gradient_exact, metric_exact};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-3.2..3.2)).collect()
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.normalize();
        s
    }

    #[test]
    fn controlled_identity_gives_one() {
        let mut r = HadamardRecipe::new(2);
        r.push_controlled(ControlledOp::Pauli(PauliString::identity(2).unwrap())).unwrap();
        let plan = ShotPlan::new(500, 3).unwrap();
        let e = hadamard_test(&r, MeasurementBasis::X, &plan, "id").unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.shots_used, 500);
    }

    #[test]
    fn controlled_z_on_plus_gives_zero() {
        let mut r = HadamardRecipe::new(1);
        r.push_controlled(ControlledOp::Pauli(PauliString::single(1, 0, Pauli::Z).unwrap())).unwrap();
        let e = hadamard_test(&r, MeasurementBasis::X, &ShotPlan::analytic(), "cz").unwrap();
        assert!(e.value.abs() < 1e-15);
    }

    #[test]
    fn y_basis_sign() {
        // φ₁ = i·φ₀, so Im⟨φ₀|φ₁⟩ = 1.
        let mut r = HadamardRecipe::new(1);
        r.push_controlled(ControlledOp::Phase(Complex64::new(0.0, 1.0))).unwrap();
        let y = hadamard_test(&r, MeasurementBasis::Y, &ShotPlan::analytic(), "ph").unwrap();
        let x = hadamard_test(&r, MeasurementBasis::X, &ShotPlan::analytic(), "ph").unwrap();
        assert!((y.value - 1.0).abs() < 1e-14);
        assert!(x.value.abs() < 1e-14);
    }

    #[test]
    fn analytic_mode_matches_branch_overlap() {
        let n = 3;
        let initial = random_state(n, 1);
        let g1 = RotationGate::new(PauliString::from_ops(n, &[(0, Pauli::X), (2, Pauli::Y)]).unwrap(), 0.7).unwrap();
        let g2 = RotationGate::new(PauliString::single(n, 1, Pauli::Z).unwrap(), -1.1).unwrap();
        let ins = PauliString::from_ops(n, &[(1, Pauli::Y), (2, Pauli::Z)]).unwrap().with_phase(Complex64::new(0.0, -1.0));
        let rot = RotationGate::new(PauliString::single(n, 0, Pauli::Y).unwrap(), 0.3).unwrap();
        let mut r = HadamardRecipe::new(n);
        r.push_gate(g1.clone()).unwrap();
        r.push_controlled(ControlledOp::Pauli(ins.clone())).unwrap();
        r.push_gate(g2.clone()).unwrap();
        r.push_controlled(ControlledOp::Rotation(rot.clone())).unwrap();

        let mut phi0 = initial.clone();
        phi0.apply_rotation(&g1).unwrap();
        phi0.apply_rotation(&g2).unwrap();
        let mut phi1 = initial.clone();
        phi1.apply_rotation(&g1).unwrap();
        phi1.apply_pauli(&ins).unwrap();
        phi1.apply_rotation(&g2).unwrap();
        phi1.apply_rotation(&rot).unwrap();
        let overlap = phi0.inner(&phi1).unwrap();

        let plan = ShotPlan::analytic();
        let x = hadamard_test_on(&initial, &r, MeasurementBasis::X, &plan, "a").unwrap();
        let y = hadamard_test_on(&initial, &r, MeasurementBasis::Y, &plan, "a").unwrap();
        assert!((x.value - overlap.re).abs() < 1e-12);
        assert!((y.value - overlap.im).abs() < 1e-12);
        let purity = ancilla_purity(&r.prepare(&initial).unwrap());
        assert!((purity - 0.5 * (1.0 + overlap.norm_sqr())).abs() < 1e-12);
    }

    #[test]
    fn ill_formed_recipes_rejected() {
        let mut r = HadamardRecipe::new(2);
        assert!(r.push_controlled(ControlledOp::Phase(Complex64::new(2.0, 0.0))).is_err());
        assert!(r.push_gate(RotationGate::new(PauliString::single(3, 0, Pauli::X).unwrap(), 0.1).unwrap()).is_err());
        assert_eq!(ShotPlan::new(0, 1), Err(Error::ZeroShots));
    }

    #[test]
    fn analytic_gradient_matches_exact() {
        for (l, b) in [(2, Boundary::Open), (3, Boundary::Periodic), (4, Boundary::Open)] {
            let model = ModelParams::new(l, b, 0.8);
            let h = build_hamiltonian(&model).unwrap();
            let c = AnsatzSpec::new(l, 1, b).unwrap().circuit().unwrap();
            let params = random_params(c.n_params(), l as u64);
            let exact = gradient_exact(&c, &params, &h).unwrap();
            let est = gradient_shot(&c, &params, &h, &ShotPlan::analytic()).unwrap();
            for (a, e) in est.values.iter().zip(&exact) {
                assert!((a - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn insertion_side_does_not_matter() {
        let c = AnsatzSpec::new(3, 1, Boundary::Open).unwrap().circuit().unwrap();
        let params = random_params(c.n_params(), 2);
        let h = PauliString::from_ops(3, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        for p in 0..params.len() {
            let a = hadamard_test(&gradient_recipe(&c, &params, p, &h, false).unwrap(), MeasurementBasis::X, &ShotPlan::analytic(), "a").unwrap();
            let b = hadamard_test(&gradient_recipe(&c, &params, p, &h, true).unwrap(), MeasurementBasis::X, &ShotPlan::analytic(), "b").unwrap();
            assert!((a.value - b.value).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_metric_matches_exact() {
        for (l, layers) in [(2, 2), (3, 1), (3, 2)] {
            let c = AnsatzSpec::new(l, layers, Boundary::Periodic).unwrap().circuit().unwrap();
            let params = random_params(c.n_params(), 30 + l as u64);
            let exact = metric_exact(&c, &params).unwrap();
            let est = metric_shot(&c, &params, &ShotPlan::analytic()).unwrap().metric;
            let diff = (exact.as_matrix() - est.as_matrix()).abs().max();
            assert!(diff < 1e-10, "L={l} N={layers}: {diff}");
        }
    }

    #[test]
    fn rz_toy_metric() {
        let c = ParametricCircuit::new(1, alloc::vec![PauliString::single(1, 0, Pauli::Z).unwrap()]).unwrap();
        let plan = ShotPlan::new(2000, 9).unwrap();
        let g = metric_shot(&c, &[0.4], &plan).unwrap().metric;
        assert_eq!(g.dim(), 1);
        // The overlap circuit has identical branches; only y² (y ≈ 0 within 3σ) is noisy.
        assert!((g.get(0, 0) - 1.0).abs() < 9.0 / 2000.0);
        assert!(g.get(0, 0) <= 1.0);
    }

    #[test]
    fn sampled_metric_diagonal_is_nonnegative_within_noise() {
        let c = AnsatzSpec::new(3, 1, Boundary::Open).unwrap().circuit().unwrap();
        let params = random_params(c.n_params(), 12);
        let shots = 256u64;
        let g = metric_shot(&c, &params, &ShotPlan::new(shots, 4).unwrap()).unwrap().metric;
        for p in 0..g.dim() {
            assert!(g.get(p, p) >= -3.0 / (shots as f64).sqrt());
        }
    }

    #[test]
    fn sampled_gradient_within_binomial_error() {
        let model = ModelParams::new(3, Boundary::Open, 0.5);
        let h = build_hamiltonian(&model).unwrap();
        let c = AnsatzSpec::new(3, 1, Boundary::Open).unwrap().circuit().unwrap();
        let params = random_params(c.n_params(), 6);
        let exact = gradient_exact(&c, &params, &h).unwrap();
        let shots = 4096u64;
        let bound = 2.0 * Float::sqrt(h.terms().map(|(c, _)| c.norm_sqr()).sum::<f64>() / shots as f64);
        let est = gradient_shot(&c, &params, &h, &ShotPlan::new(shots, 77).unwrap()).unwrap();
        for (a, e) in est.values.iter().zip(&exact) {
            assert!((a - e).abs() < 4.0 * bound, "{a} vs {e}");
        }
        for se in &est.std_errors {
            assert!(*se <= bound + 1e-15);
        }
    }

    #[test]
    fn zero_coefficient_terms_are_skipped() {
        let c = AnsatzSpec::new(2, 1, Boundary::Open).unwrap().circuit().unwrap();
        let params = random_params(c.n_params(), 1);
        let mut h = WeightedPauliSum::new(2).unwrap();
        h.add_term(Complex64::new(0.0, 0.0), &PauliString::single(2, 0, Pauli::X).unwrap()).unwrap();
        let est = gradient_shot(&c, &params, &h, &ShotPlan::new(10, 1).unwrap()).unwrap();
        assert!(est.values.iter().all(|&v| v == 0.0));
        assert!(est.records.is_empty());
    }

    #[test]
    fn pauli_sampling() {
        let zero = StateVector::zero(1).unwrap();
        let z = PauliString::single(1, 0, Pauli::Z).unwrap();
        let x = PauliString::single(1, 0, Pauli::X).unwrap();
        assert_eq!(sample_pauli_expectation(&zero, &z, &ShotPlan::new(7, 0).unwrap(), "z").unwrap().value, 1.0);
        let e = sample_pauli_expectation(&zero, &x, &ShotPlan::new(1_000_000, 5).unwrap(), "x").unwrap();
        assert!(e.value.abs() < 0.01 && e.value.abs() < 3.0 * e.std_error.max(1e-3));

        let ground = exact_ground(&ModelParams::new(2, Boundary::Open, 0.0)).unwrap().ground_state;
        let zz = PauliString::from_ops(2, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let e = sample_pauli_expectation(&ground, &zz, &ShotPlan::new(20_000, 8).unwrap(), "zz").unwrap();
        assert!((e.value - 1.0 / (5.0f64).sqrt()).abs() < 3.0 * e.std_error);
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let s = random_state(3, 4);
        let p = PauliString::from_ops(3, &[(0, Pauli::X), (2, Pauli::Y)]).unwrap();
        let plan = ShotPlan::new(300, 11).unwrap();
        let a = sample_pauli_expectation(&s, &p, &plan, "k").unwrap();
        assert_eq!(a, sample_pauli_expectation(&s, &p, &plan, "k").unwrap());
        assert_ne!(a.value, sample_pauli_expectation(&s, &p, &plan.with_run(1), "k").unwrap().value);
    }

    #[test]
    fn energy_estimate_brackets_exact() {
        let model = ModelParams::new(3, Boundary::Periodic, 0.3);
        let h = build_hamiltonian(&model).unwrap();
        let s = random_state(3, 2);
        let exact = s.expectation(&h).unwrap();
        let (v, se, recs) = energy_shot(&s, &h, &ShotPlan::new(10_000, 1).unwrap(), "").unwrap();
        assert_eq!(recs.len(), h.len());
        assert!((v - exact).abs() < 5.0 * se);
        let (va, _, _) = energy_shot(&s, &h, &ShotPlan::analytic(), "").unwrap();
        assert!((va - exact).abs() < 1e-12);
    }
}
