//! Defect-sensitive observables: the two-point function `⟨Z₀Z_r⟩` and the
//! loop operator `Ȳ = (−q)^L g₁⁻¹⋯g_{2L−1}⁻¹ + h.c.` built from braid
//! operators, with `q = i·e^{iπ/4}`.
//!
//! Braid `k` (1-based) is `q·exp(iπX_j/4)` for odd `k = 2j−1` and
//! `q·exp(iπZ_jZ_{j+1}/4)` for even `k = 2j`, with physics site labels
//! `j = 1..L`; in code the sites are 0-based. The inverse is
//! `q̄·R_O(π/4)` with `R_O(φ) = exp(−iφO)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;

use crate::ansatz::ParametricCircuit;
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::shots::{hadamard_test_on, sample_pauli_expectation, EstimateRecord, HadamardRecipe, MeasurementBasis, ShotPlan};
use crate::state::{ControlledOp, RotationGate, StateVector};
use crate::{Error, Result};

/// `q = i·e^{iπ/4}`.
pub fn braid_phase() -> Complex64 {
    Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, FRAC_PI_4)
}

/// Largest chain for which the loop operator is expanded into Pauli strings.
pub const MAX_LOOP_SUM_LENGTH: usize = 7;

fn check_site(state: &StateVector, site: usize) -> Result<()> {
    if site >= state.n_qubits() {
        return Err(Error::SiteOutOfRange {
            site,
            n_qubits: state.n_qubits(),
        });
    }
    Ok(())
}

/// `⟨Z₀Z_site⟩` (0-based; `site = 0` gives 1).
pub fn correlator_zz(state: &StateVector, site: usize) -> Result<f64> {
    check_site(state, site)?;
    if site == 0 {
        return Ok(1.0);
    }
    let zz = PauliString::from_ops(state.n_qubits(), &[(0, Pauli::Z), (site, Pauli::Z)])?;
    Ok(state.pauli_expectation(&zz)?.re)
}

/// `⟨Z₀Z_k⟩` for every site `k`.
pub fn correlator_profile(state: &StateVector) -> Result<Vec<f64>> {
    (0..state.n_qubits()).map(|k| correlator_zz(state, k)).collect()
}

/// Sampled `⟨Z₀Z_site⟩`; `site = 0` is exact.
pub fn correlator_shot(state: &StateVector, site: usize, plan: &ShotPlan, circuit_id: &str) -> Result<EstimateRecord> {
    check_site(state, site)?;
    if site == 0 {
        return Ok(EstimateRecord {
            circuit_id: circuit_id.into(),
            basis: "I".into(),
            value: 1.0,
            std_error: 0.0,
            shots_used: 0,
        });
    }
    let zz = PauliString::from_ops(state.n_qubits(), &[(0, Pauli::Z), (site, Pauli::Z)])?;
    sample_pauli_expectation(state, &zz, plan, circuit_id)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BraidOperator {
    length: usize,
    index: usize,
}

impl BraidOperator {
    /// Braid `index ∈ 1..=2L−1` on an `L`-site chain.
    pub fn new(length: usize, index: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidModel(format!("braids need at least 2 sites, got {length}")));
        }
        if index == 0 || index > 2 * length - 1 {
            return Err(Error::InvalidModel(format!(
                "braid index {index} outside 1..={}",
                2 * length - 1
            )));
        }
        Ok(Self { length, index })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// `X_j` for odd indices, `Z_jZ_{j+1}` for even ones.
    pub fn generator(&self) -> PauliString {
        let j = (self.index - 1) / 2;
        let ops: &[(usize, Pauli)] = if self.index % 2 == 1 {
            &[(j, Pauli::X)]
        } else {
            &[(j, Pauli::Z), (j + 1, Pauli::Z)]
        };
        PauliString::from_ops(self.length, ops).expect("braid sites are in range")
    }

    /// `g⁻¹ = q̄·R_O(π/4)` as its rotation part; the phase is `q̄`.
    pub fn inverse_rotation(&self) -> RotationGate {
        RotationGate::new(self.generator(), FRAC_PI_4).expect("hermitian generator")
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        state.apply_rotation(&RotationGate::new(self.generator(), -FRAC_PI_4)?)?;
        state.scale(braid_phase());
        Ok(())
    }

    pub fn apply_inverse(&self, state: &mut StateVector) -> Result<()> {
        state.apply_rotation(&self.inverse_rotation())?;
        state.scale(braid_phase().conj());
        Ok(())
    }

    /// `q·(I + iO)/√2` as a Pauli sum.
    pub fn to_sum(&self) -> Result<WeightedPauliSum> {
        let q = braid_phase() * FRAC_1_SQRT_2;
        WeightedPauliSum::from_terms(
            self.length,
            [
                (q, PauliString::identity(self.length)?),
                (q * Complex64::new(0.0, 1.0), self.generator()),
            ],
        )
    }

    pub fn inverse_sum(&self) -> Result<WeightedPauliSum> {
        Ok(self.to_sum()?.dagger())
    }
}

/// `Ȳ = A + A†` with `A = (−q)^L g₁⁻¹ g₂⁻¹ ⋯ g_{2L−1}⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopOperator {
    length: usize,
    braids: Vec<BraidOperator>,
}

impl LoopOperator {
    pub fn new(length: usize) -> Result<Self> {
        let braids = (1..=2 * length.max(1) - 1)
            .map(|k| BraidOperator::new(length, k))
            .collect::<Result<_>>()?;
        Ok(Self { length, braids })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn braids(&self) -> &[BraidOperator] {
        &self.braids
    }

    /// `(−q)^L`.
    pub fn prefactor(&self) -> Complex64 {
        (-braid_phase()).powu(self.length as u32)
    }

    /// Total phase multiplying the rotations in `A`: `(−q)^L·q̄^{2L−1}`.
    pub fn rotation_phase(&self) -> Complex64 {
        self.prefactor() * braid_phase().conj().powu(self.braids.len() as u32)
    }

    /// `A|ψ⟩`; the rightmost inverse braid acts first.
    pub fn apply_half(&self, state: &StateVector) -> Result<StateVector> {
        if state.n_qubits() != self.length {
            return Err(Error::SizeMismatch {
                left: self.length,
                right: state.n_qubits(),
            });
        }
        let mut s = state.clone();
        for b in self.braids.iter().rev() {
            s.apply_rotation(&b.inverse_rotation())?;
        }
        s.scale(self.rotation_phase());
        Ok(s)
    }

    /// `⟨ψ|Ȳ|ψ⟩ = 2·Re⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        Ok(2.0 * state.inner(&self.apply_half(state)?)?.re)
    }

    /// `A` expanded into Pauli strings (chains up to [`MAX_LOOP_SUM_LENGTH`]).
    pub fn half_sum(&self) -> Result<WeightedPauliSum> {
        if self.length > MAX_LOOP_SUM_LENGTH {
            return Err(Error::OracleRange(self.length));
        }
        let mut acc = WeightedPauliSum::from_terms(self.length, [(self.prefactor(), PauliString::identity(self.length)?)])?;
        for b in &self.braids {
            acc = acc.multiply(&b.inverse_sum()?)?;
        }
        Ok(acc)
    }

    /// `Ȳ` as a hermitian Pauli sum.
    pub fn to_sum(&self) -> Result<WeightedPauliSum> {
        let a = self.half_sum()?;
        a.add(&a.dagger())
    }

    /// Hadamard-test recipe whose branch overlap is `⟨ψ|A|ψ⟩`: controlled
    /// inverse braids from `g_{2L−1}⁻¹` down to `g₁⁻¹`, then one controlled
    /// phase carrying every scalar factor.
    pub fn recipe(&self) -> Result<HadamardRecipe> {
        let mut r = HadamardRecipe::new(self.length);
        for b in self.braids.iter().rev() {
            r.push_controlled(ControlledOp::Rotation(b.inverse_rotation()))?;
        }
        r.push_controlled(ControlledOp::Phase(self.rotation_phase()))?;
        Ok(r)
    }
}

/// `⟨Ȳ⟩` on a periodic-chain state.
pub fn ybar_exact(state: &StateVector) -> Result<f64> {
    LoopOperator::new(state.n_qubits())?.expectation(state)
}

/// `⟨Ȳ⟩` from the controlled-braid circuit on `state`: twice the X-basis mean.
pub fn ybar_hadamard_on(state: &StateVector, plan: &ShotPlan, circuit_id: &str) -> Result<EstimateRecord> {
    let op = LoopOperator::new(state.n_qubits())?;
    let mut r = hadamard_test_on(state, &op.recipe()?, MeasurementBasis::X, plan, circuit_id)?;
    r.value *= 2.0;
    r.std_error *= 2.0;
    Ok(r)
}

/// `⟨Ȳ⟩` on the ansatz state prepared by `circuit` at `params`.
pub fn ybar_hadamard(circuit: &ParametricCircuit, params: &[f64], plan: &ShotPlan) -> Result<EstimateRecord> {
    let state = circuit.prepare_state(params)?;
    ybar_hadamard_on(&state, plan, &format!("ybar/L{}", circuit.n_qubits()))
}

/// `(I + ∏X)/2`, the projector onto the even sector of the spin-flip symmetry.
pub fn even_sector_projector(length: usize) -> Result<WeightedPauliSum> {
    let all_x = PauliString::from_ops(length, &(0..length).map(|k| (k, Pauli::X)).collect::<Vec<_>>())?;
    WeightedPauliSum::from_terms(
        length,
        [
            (Complex64::new(0.5, 0.0), PauliString::identity(length)?),
            (Complex64::new(0.5, 0.0), all_x),
        ],
    )
}
