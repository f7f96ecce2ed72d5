//! Zero-noise extrapolation under injected Pauli noise.
//!
//! Noise is simulated by trajectories: after every two-qubit gate one of
//! the 15 non-identity two-qubit Paulis is applied with probability `p2`
//! (and after every single-qubit gate one of X, Y, Z with probability
//! `p1`). Noise is amplified by folding trailing two-qubit gates
//! `G → G·G†·G`, and the estimates are fitted by a least-squares
//! polynomial evaluated at zero.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::Rng;

use crate::ansatz::Circuit;
use crate::observables::LoopOperator;
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::rng::stream;
use crate::shots::EstimateRecord;
use crate::state::{RotationGate, StateVector};
use crate::{Error, Result};

/// Upper bound on memory spent caching noiseless prefix states.
const PREFIX_CACHE_BYTES: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub p2: f64,
    pub p1: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p2: 0.01, p1: 0.0 }
    }
}

impl NoiseModel {
    pub fn new(p2: f64, p1: f64) -> Result<Self> {
        for (name, p) in [("p2", p2), ("p1", p1)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        Ok(Self { p2, p1 })
    }

    pub fn noiseless() -> Self {
        Self { p2: 0.0, p1: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZneSchedule {
    factors: Vec<f64>,
    degree: usize,
}

impl Default for ZneSchedule {
    /// Factors 1.0, 1.2, …, 3.0 with a quadratic fit.
    fn default() -> Self {
        Self {
            factors: (0..=10).map(|k| f64::from(5 + k) / 5.0).collect(),
            degree: 2,
        }
    }
}

impl ZneSchedule {
    pub fn new(factors: Vec<f64>, degree: usize) -> Result<Self> {
        if factors.first() != Some(&1.0) {
            return Err(Error::InvalidSchedule("the first noise factor must be 1".into()));
        }
        if factors.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater)) || factors.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidSchedule("noise factors must be finite and strictly increasing".into()));
        }
        if factors.len() < degree + 1 {
            return Err(Error::RankDeficient {
                degree,
                needed: degree + 1,
                got: factors.len(),
            });
        }
        Ok(Self { factors, degree })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

/// A folded circuit and the noise scale it actually realizes.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedCircuit {
    pub circuit: Circuit,
    /// Number of two-qubit gates replaced by `G·G†·G`.
    pub folded: usize,
    /// Two-qubit gate count relative to the original.
    pub scale: f64,
}

/// Folds the last `k` two-qubit gates, with `k` the nearest integer to
/// `(factor − 1)·n₂/2` (halves round up), capped at `n₂`.
pub fn fold_gates(circuit: &Circuit, factor: f64) -> Result<FoldedCircuit> {
    if !factor.is_finite() || factor < 1.0 {
        return Err(Error::InvalidSchedule(format!("noise factor must be finite and ≥ 1, got {factor}")));
    }
    let n2 = circuit.two_qubit_count();
    if n2 == 0 {
        return Ok(FoldedCircuit {
            circuit: circuit.clone(),
            folded: 0,
            scale: 1.0,
        });
    }
    let k = (Float::floor((factor - 1.0) * n2 as f64 / 2.0 + 0.5 + 1e-9) as usize).min(n2);
    let first_folded = n2 - k;
    let mut seen = 0;
    let mut gates = Vec::with_capacity(circuit.gates().len() + 2 * k);
    for g in circuit.gates() {
        gates.push(g.clone());
        if g.arity() == 2 {
            if seen >= first_folded {
                gates.push(g.inverse());
                gates.push(g.clone());
            }
            seen += 1;
        }
    }
    Ok(FoldedCircuit {
        circuit: Circuit::new(circuit.n_qubits(), gates)?,
        folded: k,
        scale: (n2 + 2 * k) as f64 / n2 as f64,
    })
}

/// Anything whose expectation can be evaluated on a pure state.
pub trait Observable {
    fn n_qubits(&self) -> usize;
    fn expectation(&self, state: &StateVector) -> Result<f64>;
}

impl Observable for WeightedPauliSum {
    fn n_qubits(&self) -> usize {
        WeightedPauliSum::n_qubits(self)
    }

    fn expectation(&self, state: &StateVector) -> Result<f64> {
        state.expectation(self)
    }
}

impl Observable for LoopOperator {
    fn n_qubits(&self) -> usize {
        self.length()
    }

    fn expectation(&self, state: &StateVector) -> Result<f64> {
        LoopOperator::expectation(self, state)
    }
}

/// One injected error: the Pauli applied right after gate `gate`.
/// `code` packs one 2-bit Pauli label (0 = I, 1 = X, 2 = Y, 3 = Z) per gate qubit.
type ErrorEvent = (u32, u8);

fn pauli_from_label(label: u8) -> Option<Pauli> {
    match label & 3 {
        1 => Some(Pauli::X),
        2 => Some(Pauli::Y),
        3 => Some(Pauli::Z),
        _ => None,
    }
}

fn error_string(gate: &RotationGate, code: u8) -> Result<PauliString> {
    let n = gate.generator().n_qubits();
    let ops: Vec<(usize, Pauli)> = gate
        .generator()
        .ops()
        .enumerate()
        .filter_map(|(k, (site, _))| pauli_from_label(code >> (2 * k)).map(|p| (site, p)))
        .collect();
    PauliString::from_ops(n, &ops)
}

fn draw_errors<R: Rng>(circuit: &Circuit, noise: &NoiseModel, rng: &mut R) -> Vec<ErrorEvent> {
    let mut events = Vec::new();
    for (i, g) in circuit.gates().iter().enumerate() {
        let (p, choices) = match g.arity() {
            2 => (noise.p2, 15u8),
            1 => (noise.p1, 3u8),
            _ => continue,
        };
        if p > 0.0 && rng.random::<f64>() < p {
            events.push((i as u32, rng.random_range(1..=choices)));
        }
    }
    events
}

/// Mean over noise trajectories of the exact expectation of `obs` on each
/// trajectory's final state, starting from `|+⟩^⊗n`.
///
/// Trajectories with identical error patterns are simulated once, and each
/// simulation resumes from a cached noiseless prefix at its first error.
pub fn noisy_expectation<O: Observable + ?Sized>(
    circuit: &Circuit,
    obs: &O,
    noise: &NoiseModel,
    trajectories: u64,
    seed: u64,
    circuit_id: &str,
) -> Result<EstimateRecord> {
    if trajectories == 0 {
        return Err(Error::ZeroShots);
    }
    if obs.n_qubits() != circuit.n_qubits() {
        return Err(Error::SizeMismatch {
            left: circuit.n_qubits(),
            right: obs.n_qubits(),
        });
    }
    let mut patterns: BTreeMap<Vec<ErrorEvent>, u64> = BTreeMap::new();
    for t in 0..trajectories {
        let mut rng = stream(seed, circuit_id, t);
        *patterns.entry(draw_errors(circuit, noise, &mut rng)).or_insert(0) += 1;
    }

    let gates = circuit.gates();
    let state_bytes = (16usize << circuit.n_qubits()).max(1);
    let stride = ((gates.len() + 1) * state_bytes).div_ceil(PREFIX_CACHE_BYTES).max(1);
    let mut checkpoints = Vec::with_capacity(gates.len() / stride + 1);
    let mut s = StateVector::plus(circuit.n_qubits())?;
    for (i, g) in gates.iter().enumerate() {
        if i % stride == 0 {
            checkpoints.push(s.clone());
        }
        s.apply_rotation(g)?;
    }
    let noiseless_value = obs.expectation(&s)?;

    let mut values: Vec<(f64, u64)> = Vec::with_capacity(patterns.len());
    for (events, count) in &patterns {
        let Some(&(first, _)) = events.first() else {
            values.push((noiseless_value, *count));
            continue;
        };
        let first = first as usize;
        let start = first / stride * stride;
        let mut st = checkpoints[first / stride].clone();
        let mut next = 0;
        for (i, g) in gates.iter().enumerate().skip(start) {
            st.apply_rotation(g)?;
            while next < events.len() && events[next].0 as usize == i {
                st.apply_pauli(&error_string(g, events[next].1)?)?;
                next += 1;
            }
        }
        values.push((obs.expectation(&st)?, *count));
    }

    let n = trajectories as f64;
    let mean = values.iter().map(|(v, c)| v * *c as f64).sum::<f64>() / n;
    let std_error = if trajectories > 1 {
        let var = values.iter().map(|(v, c)| (v - mean) * (v - mean) * *c as f64).sum::<f64>() / (n - 1.0);
        Float::sqrt(var / n)
    } else {
        0.0
    };
    Ok(EstimateRecord {
        circuit_id: circuit_id.into(),
        basis: "trajectory".into(),
        value: mean,
        std_error,
        shots_used: trajectories,
    })
}

/// Least-squares polynomial of `degree` through `(scale, value)` points, evaluated at 0.
pub fn extrapolate(points: &[(f64, f64)], degree: usize) -> Result<f64> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::RankDeficient {
            degree,
            needed: degree + 1,
            got: distinct.len(),
        });
    }
    let m = points.len();
    let a = DMatrix::<f64>::from_fn(m, degree + 1, |i, j| Float::powi(points[i].0, j as i32));
    let b = DVector::<f64>::from_fn(m, |i, _| points[i].1);
    let svd = a.svd(true, true);
    let coeffs = svd
        .solve(&b, 1e-12)
        .map_err(|_| Error::RankDeficient {
            degree,
            needed: degree + 1,
            got: distinct.len(),
        })?;
    Ok(coeffs[0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZneReport {
    pub factors: Vec<f64>,
    /// Noise scale each folded circuit realizes; the fit uses these.
    pub realized_factors: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub extrapolated: f64,
    pub noiseless_reference: f64,
}

/// Folds `circuit` at every scheduled factor, estimates `obs` under `noise`
/// and extrapolates to zero noise.
pub fn zne_pipeline<O: Observable + ?Sized>(
    circuit: &Circuit,
    obs: &O,
    schedule: &ZneSchedule,
    noise: &NoiseModel,
    trajectories: u64,
    seed: u64,
    circuit_id: &str,
) -> Result<ZneReport> {
    let noiseless_reference = obs.expectation(&circuit.run()?)?;
    let mut realized = Vec::with_capacity(schedule.factors().len());
    let mut estimates = Vec::with_capacity(schedule.factors().len());
    let mut std_errors = Vec::with_capacity(schedule.factors().len());
    for (i, &f) in schedule.factors().iter().enumerate() {
        let folded = fold_gates(circuit, f)?;
        let r = noisy_expectation(&folded.circuit, obs, noise, trajectories, seed, &format!("{circuit_id}/f{i}"))?;
        realized.push(folded.scale);
        estimates.push(r.value);
        std_errors.push(r.std_error);
    }
    let points: Vec<(f64, f64)> = realized.iter().copied().zip(estimates.iter().copied()).collect();
    let extrapolated = extrapolate(&points, schedule.degree())?;
    Ok(ZneReport {
        factors: schedule.factors().to_vec(),
        realized_factors: realized,
        estimates,
        std_errors,
        extrapolated,
        noiseless_reference,
    })
}
