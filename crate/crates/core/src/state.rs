//! Dense statevector kernel.
//!
//! Amplitudes live in a flat array indexed by the computational basis state,
//! qubit 0 being the least-significant bit. Rotations follow the convention
//! `R_O(φ) = exp(−iφO)` (no factor ½), so `∂_φ R_O(φ) = (−iO) R_O(φ)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::pauli::{check_register, BasisAction, PauliString, WeightedPauliSum};
use crate::{Error, Result};

/// Largest register a statevector may hold (2^28 amplitudes, 4 GiB).
pub const MAX_STATE_QUBITS: usize = 28;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Single-parameter rotation `exp(−i·angle·generator)` with a hermitian
/// Pauli-string generator.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationGate {
    generator: PauliString,
    angle: f64,
}

impl RotationGate {
    pub fn new(generator: PauliString, angle: f64) -> Result<Self> {
        if !generator.is_hermitian() {
            return Err(Error::InvalidGenerator);
        }
        Ok(Self { generator, angle })
    }

    pub fn generator(&self) -> &PauliString {
        &self.generator
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn inverse(&self) -> Self {
        Self {
            generator: self.generator.clone(),
            angle: -self.angle,
        }
    }

    pub fn with_angle(&self, angle: f64) -> Self {
        Self {
            generator: self.generator.clone(),
            angle,
        }
    }

    /// Number of qubits the gate acts on.
    pub fn arity(&self) -> usize {
        self.generator.weight()
    }
}

/// Operation applied on the control = |1⟩ subspace of an ancilla.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlledOp {
    /// A Pauli string including its phase (e.g. `−iO`), which is unitary.
    Pauli(PauliString),
    Rotation(RotationGate),
    /// Unit-modulus phase on the controlled branch (a phase gate on the control).
    Phase(Complex64),
}

impl ControlledOp {
    fn support(&self) -> u64 {
        match self {
            ControlledOp::Pauli(p) => p.support(),
            ControlledOp::Rotation(g) => g.generator.support(),
            ControlledOp::Phase(_) => 0,
        }
    }

    fn n_qubits(&self) -> Option<usize> {
        match self {
            ControlledOp::Pauli(p) => Some(p.n_qubits()),
            ControlledOp::Rotation(g) => Some(g.generator.n_qubits()),
            ControlledOp::Phase(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_state_size(n_qubits: usize) -> Result<()> {
    check_register(n_qubits)?;
    if n_qubits > MAX_STATE_QUBITS {
        return Err(Error::RegisterTooLarge {
            n_qubits,
            limit: MAX_STATE_QUBITS,
        });
    }
    Ok(())
}

impl StateVector {
    /// |0…0⟩.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_state_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::SiteOutOfRange {
                site: index,
                n_qubits,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// |+⟩^⊗n: every amplitude equals 2^{−n/2}.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        check_state_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        let a = Float::powi(0.5f64, n_qubits as i32).sqrt();
        Ok(Self {
            n_qubits,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two. No normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::BadLength(len));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_state_size(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `Σ conj(self_i) · other_i`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(inner_slices(&self.amps, &other.amps))
    }

    fn check_same(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    fn check_string(&self, p: &PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: p.n_qubits(),
            });
        }
        Ok(())
    }

    /// Appends an ancilla in |+⟩ as the new most-significant qubit.
    pub fn with_plus_ancilla(&self) -> Result<StateVector> {
        check_state_size(self.n_qubits + 1)?;
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let mut amps = Vec::with_capacity(2 * self.amps.len());
        amps.extend(self.amps.iter().map(|a| a * h));
        amps.extend(self.amps.iter().map(|a| a * h));
        Ok(StateVector {
            n_qubits: self.n_qubits + 1,
            amps,
        })
    }

    pub fn apply_rotation(&mut self, gate: &RotationGate) -> Result<()> {
        self.check_string(&gate.generator)?;
        rotate(&mut self.amps, gate.generator.action(), gate.angle, 0);
        Ok(())
    }

    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_string(p)?;
        apply_action(&mut self.amps, p.action(), 0);
        Ok(())
    }

    /// Applies `op` on the subspace where qubit `control` is |1⟩.
    pub fn apply_controlled(&mut self, control: usize, op: &ControlledOp) -> Result<()> {
        if control >= self.n_qubits {
            return Err(Error::SiteOutOfRange {
                site: control,
                n_qubits: self.n_qubits,
            });
        }
        if let Some(n) = op.n_qubits() {
            if n != self.n_qubits {
                return Err(Error::SizeMismatch {
                    left: self.n_qubits,
                    right: n,
                });
            }
        }
        let cmask = 1u64 << control;
        if op.support() & cmask != 0 {
            return Err(Error::ControlOverlap(control));
        }
        match op {
            ControlledOp::Pauli(p) => apply_action(&mut self.amps, p.action(), cmask),
            ControlledOp::Rotation(g) => rotate(&mut self.amps, g.generator.action(), g.angle, cmask),
            ControlledOp::Phase(ph) => {
                for (b, a) in self.amps.iter_mut().enumerate() {
                    if b as u64 & cmask != 0 {
                        *a *= ph;
                    }
                }
            }
        }
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` for a single Pauli string (complex in general).
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<Complex64> {
        self.check_string(p)?;
        Ok(action_expectation(&self.amps, p.action()))
    }

    /// `⟨ψ|O|ψ⟩` for a hermitian observable.
    pub fn expectation(&self, obs: &WeightedPauliSum) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: obs.n_qubits(),
            });
        }
        if !obs.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        let mut total = ZERO;
        let mut scale = 0.0;
        for (c, act) in obs.actions() {
            total += c * action_expectation(&self.amps, act);
            scale += c.norm();
        }
        debug_assert!(
            total.im.abs() <= 1e-10 * (1.0 + scale) * self.norm_sqr().max(1.0),
            "imaginary residue {} in hermitian expectation",
            total.im
        );
        Ok(total.re)
    }

    /// `O|ψ⟩` (unnormalized) for any weighted sum.
    pub fn apply_sum(&self, obs: &WeightedPauliSum) -> Result<StateVector> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: obs.n_qubits(),
            });
        }
        let mut out = vec![ZERO; self.amps.len()];
        apply_sum_into(&obs.actions(), &self.amps, &mut out);
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }
}

#[inline]
pub(crate) fn inner_slices(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // Split accumulators keep the loop vectorizable.
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

pub(crate) fn apply_sum_into(terms: &[(Complex64, BasisAction)], input: &[Complex64], out: &mut [Complex64]) {
    for (c, act) in terms {
        let k = c * act.coeff;
        for (b, a) in input.iter().enumerate() {
            let b = b as u64;
            out[(b ^ act.flip) as usize] += k * act.sign(b) * a;
        }
    }
}

fn action_expectation(amps: &[Complex64], act: BasisAction) -> Complex64 {
    let mut acc = ZERO;
    if act.flip == 0 {
        for (b, a) in amps.iter().enumerate() {
            acc += a.norm_sqr() * act.sign(b as u64);
        }
    } else {
        for (b, a) in amps.iter().enumerate() {
            let b = b as u64;
            acc += amps[(b ^ act.flip) as usize].conj() * a * act.sign(b);
        }
    }
    acc * act.coeff
}

fn apply_action(amps: &mut [Complex64], act: BasisAction, cmask: u64) {
    if act.flip == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            let b = b as u64;
            if b & cmask == cmask {
                *a *= act.coeff * act.sign(b);
            }
        }
        return;
    }
    let top = 1u64 << (63 - act.flip.leading_zeros());
    for b in 0..amps.len() as u64 {
        if b & top != 0 || b & cmask != cmask {
            continue;
        }
        let b2 = b ^ act.flip;
        let (lo, hi) = (amps[b as usize], amps[b2 as usize]);
        // (Pψ)[b2] = coeff·sign(b)·ψ[b], (Pψ)[b] = coeff·sign(b2)·ψ[b2]
        amps[b2 as usize] = act.coeff * act.sign(b) * lo;
        amps[b as usize] = act.coeff * act.sign(b2) * hi;
    }
}

/// `exp(−iφP)` restricted to indices where `cmask` bits are all set.
/// `P` must be hermitian, so `coeff` is real up to rounding.
fn rotate(amps: &mut [Complex64], act: BasisAction, angle: f64, cmask: u64) {
    let (s, c) = Float::sin_cos(angle);
    if act.flip == 0 {
        let k = act.coeff.re;
        let plus = Complex64::new(c, -s * k);
        let minus = Complex64::new(c, s * k);
        if cmask == 0 {
            let z = act.zmask;
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= if (b as u64 & z).count_ones() & 1 == 0 { plus } else { minus };
            }
        } else {
            for (b, a) in amps.iter_mut().enumerate() {
                let b = b as u64;
                if b & cmask == cmask {
                    *a *= if act.sign(b) > 0.0 { plus } else { minus };
                }
            }
        }
        return;
    }
    let mis = Complex64::new(0.0, -s) * act.coeff;
    if cmask == 0 && act.zmask == 0 && act.flip.is_power_of_two() {
        // Single-qubit X: pairs at a fixed stride.
        let stride = act.flip as usize;
        for block in amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = x0 * c + mis * x1;
                *a1 = x1 * c + mis * x0;
            }
        }
        return;
    }
    let top = 1u64 << (63 - act.flip.leading_zeros());
    for b in 0..amps.len() as u64 {
        if b & top != 0 || b & cmask != cmask {
            continue;
        }
        let b2 = b ^ act.flip;
        let (x0, x1) = (amps[b as usize], amps[b2 as usize]);
        amps[b as usize] = x0 * c + mis * act.sign(b2) * x1;
        amps[b2 as usize] = x1 * c + mis * act.sign(b) * x0;
    }
}
