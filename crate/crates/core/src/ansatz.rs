//! Layered rotation ansatz.
//!
//! Each layer applies, in order, a ZZ rotation on every bond, an X rotation
//! on every site and a Z rotation on every site, starting from |+⟩^⊗L.
//! The global parameter order is layer-major and, within a layer,
//! `θ` (bonds, ascending) then `ζ` (X, ascending) then `φ` (Z, ascending).
//! Gates inside one family commute, so the site order inside a family is
//! immaterial.

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut, Range};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Boundary, ModelParams};
use crate::pauli::{Pauli, PauliString};
use crate::state::{RotationGate, StateVector};
use crate::{Error, Result};

/// Half-width of the uniform interval used for initial parameters.
pub const INIT_SCALE: f64 = 0.01;

/// Circuit parameters in radians, in the global order described above.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(alloc::vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A fixed-angle gate sequence acting on |+⟩^⊗n.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<RotationGate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<RotationGate>) -> Result<Self> {
        if let Some(g) = gates.iter().find(|g| g.generator().n_qubits() != n_qubits) {
            return Err(Error::SizeMismatch {
                left: n_qubits,
                right: g.generator().n_qubits(),
            });
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[RotationGate] {
        &self.gates
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.arity() == 2).count()
    }

    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        self.gates.iter().try_for_each(|g| state.apply_rotation(g))
    }

    /// Runs the circuit on |+⟩^⊗n.
    pub fn run(&self) -> Result<StateVector> {
        let mut s = StateVector::plus(self.n_qubits)?;
        self.apply_to(&mut s)?;
        Ok(s)
    }
}

/// An ordered list of rotation generators, one free angle each, applied to |+⟩^⊗n.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricCircuit {
    n_qubits: usize,
    generators: Vec<PauliString>,
}

impl ParametricCircuit {
    pub fn new(n_qubits: usize, generators: Vec<PauliString>) -> Result<Self> {
        for g in &generators {
            if g.n_qubits() != n_qubits {
                return Err(Error::SizeMismatch {
                    left: n_qubits,
                    right: g.n_qubits(),
                });
            }
            if !g.is_hermitian() {
                return Err(Error::InvalidGenerator);
            }
        }
        Ok(Self { n_qubits, generators })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn generator(&self, p: usize) -> Result<&PauliString> {
        self.generators.get(p).ok_or(Error::ParameterIndex {
            index: p,
            count: self.generators.len(),
        })
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.generators.len() {
            return Err(Error::ParameterLength {
                got: params.len(),
                expected: self.generators.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn gate(&self, params: &[f64], p: usize) -> RotationGate {
        // Generators were validated as hermitian in `new`.
        RotationGate::new(self.generators[p].clone(), params[p]).expect("hermitian generator")
    }

    pub fn bind(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        let gates = (0..params.len()).map(|p| self.gate(params, p)).collect();
        Circuit::new(self.n_qubits, gates)
    }

    /// Applies the gates with indices in `range` to `state`.
    pub fn apply_range(&self, state: &mut StateVector, params: &[f64], range: Range<usize>) -> Result<()> {
        self.check_params(params)?;
        if range.end > params.len() {
            return Err(Error::ParameterIndex {
                index: range.end,
                count: params.len(),
            });
        }
        for p in range {
            state.apply_rotation(&self.gate(params, p))?;
        }
        Ok(())
    }

    pub fn prepare_state(&self, params: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::plus(self.n_qubits)?;
        self.apply_range(&mut s, params, 0..params.len())?;
        Ok(s)
    }

    /// Gates strictly before `cut`, or through `cut` when `include_cut` is set.
    pub fn prepare_truncated(&self, params: &[f64], cut: usize, include_cut: bool) -> Result<StateVector> {
        self.check_params(params)?;
        if cut >= params.len() {
            return Err(Error::ParameterIndex {
                index: cut,
                count: params.len(),
            });
        }
        let end = if include_cut { cut + 1 } else { cut };
        let mut s = StateVector::plus(self.n_qubits)?;
        self.apply_range(&mut s, params, 0..end)?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateFamily {
    /// `θ`: rotation generated by `Z_j Z_{j+1}`.
    ZZ,
    /// `ζ`: rotation generated by `X_j`.
    X,
    /// `φ`: rotation generated by `Z_j`.
    Z,
}

/// Location of one parameter in the layered layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateSlot {
    pub layer: usize,
    pub family: GateFamily,
    /// 0-based site; for `ZZ` the bond (`site`, `site + 1 mod L`).
    pub site: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub length: usize,
    pub layers: usize,
    pub boundary: Boundary,
}

impl AnsatzSpec {
    pub fn new(length: usize, layers: usize, boundary: Boundary) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidAnsatz("at least one layer is required".into()));
        }
        let min_len = match boundary {
            Boundary::Open => 1,
            Boundary::Periodic => 2,
        };
        if length < min_len {
            return Err(Error::InvalidAnsatz(format!(
                "{boundary:?} ansatz needs at least {min_len} sites"
            )));
        }
        Ok(Self {
            length,
            layers,
            boundary,
        })
    }

    /// Circuit matched to the model's boundary with `N = L/2` layers (at least one).
    pub fn for_model(model: &ModelParams) -> Result<Self> {
        Self::new(model.length, (model.length / 2).max(1), model.boundary)
    }

    pub fn bonds_per_layer(&self) -> usize {
        match self.boundary {
            Boundary::Open => self.length - 1,
            Boundary::Periodic => self.length,
        }
    }

    pub fn params_per_layer(&self) -> usize {
        self.bonds_per_layer() + 2 * self.length
    }

    /// `3LN` for periodic chains, `(3L − 1)N` for open ones.
    pub fn parameter_count(&self) -> usize {
        self.params_per_layer() * self.layers
    }

    pub fn slot(&self, p: usize) -> Result<GateSlot> {
        if p >= self.parameter_count() {
            return Err(Error::ParameterIndex {
                index: p,
                count: self.parameter_count(),
            });
        }
        let per = self.params_per_layer();
        let (layer, mut r) = (p / per, p % per);
        let bonds = self.bonds_per_layer();
        let family = if r < bonds {
            GateFamily::ZZ
        } else if r < bonds + self.length {
            r -= bonds;
            GateFamily::X
        } else {
            r -= bonds + self.length;
            GateFamily::Z
        };
        Ok(GateSlot {
            layer,
            family,
            site: r,
        })
    }

    fn generator(&self, slot: GateSlot) -> Result<PauliString> {
        let l = self.length;
        match slot.family {
            GateFamily::ZZ => PauliString::from_ops(l, &[(slot.site, Pauli::Z), ((slot.site + 1) % l, Pauli::Z)]),
            GateFamily::X => PauliString::single(l, slot.site, Pauli::X),
            GateFamily::Z => PauliString::single(l, slot.site, Pauli::Z),
        }
    }

    pub fn circuit(&self) -> Result<ParametricCircuit> {
        let generators = (0..self.parameter_count())
            .map(|p| self.generator(self.slot(p)?))
            .collect::<Result<Vec<_>>>()?;
        ParametricCircuit::new(self.length, generators)
    }

    pub fn prepare_state(&self, params: &ParameterVector) -> Result<StateVector> {
        self.circuit()?.prepare_state(params)
    }

    pub fn prepare_truncated(&self, params: &ParameterVector, cut: usize, include_cut: bool) -> Result<StateVector> {
        self.circuit()?.prepare_truncated(params, cut, include_cut)
    }

    /// Independent uniform draws from `[−INIT_SCALE, INIT_SCALE]`.
    pub fn initial_parameters(&self, seed: u64) -> ParameterVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.parameter_count())
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect::<Vec<_>>()
            .into()
    }
}
