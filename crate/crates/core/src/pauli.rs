//! Pauli strings with unit phases and weighted sums of them.
//!
//! A string is stored in symplectic form: bit `s` of `x` (`z`) is set when
//! site `s` carries an X (Z) factor, with Y = iXZ encoded as both bits set.
//! Site 0 is the least-significant bit, matching the statevector layout.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Largest register a Pauli string can address.
pub const MAX_PAULI_QUBITS: usize = 64;

/// Largest register for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 12;

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

#[inline]
pub(crate) fn i_pow(k: u32) -> Complex64 {
    I_POWERS[(k & 3) as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Action of a Pauli string on a computational basis state:
/// `P|b⟩ = coeff · (-1)^{popcount(b & zmask)} |b ^ flip⟩`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BasisAction {
    pub flip: u64,
    pub zmask: u64,
    pub coeff: Complex64,
}

impl BasisAction {
    #[inline]
    pub fn sign(&self, b: u64) -> f64 {
        if (b & self.zmask).count_ones() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// A tensor product of single-qubit Paulis on an `n_qubits` register,
/// multiplied by a unit-modulus phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: Complex64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(Self {
            n_qubits,
            x: 0,
            z: 0,
            phase: Complex64::new(1.0, 0.0),
        })
    }

    pub fn single(n_qubits: usize, site: usize, op: Pauli) -> Result<Self> {
        Self::from_ops(n_qubits, &[(site, op)])
    }

    /// Builds a string from `(site, op)` pairs in any order; sites must be distinct.
    pub fn from_ops(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits)?;
        for &(site, op) in ops {
            if site >= n_qubits {
                return Err(Error::SiteOutOfRange { site, n_qubits });
            }
            let bit = 1u64 << site;
            if (s.x | s.z) & bit != 0 {
                return Err(Error::DuplicateSite(site));
            }
            let (xb, zb) = op.bits();
            if xb {
                s.x |= bit;
            }
            if zb {
                s.z |= bit;
            }
        }
        Ok(s)
    }

    pub(crate) fn from_masks(n_qubits: usize, x: u64, z: u64) -> Self {
        Self {
            n_qubits,
            x,
            z,
            phase: Complex64::new(1.0, 0.0),
        }
    }

    /// Multiplies the phase by `factor`, renormalized to unit modulus.
    pub fn with_phase(mut self, factor: Complex64) -> Self {
        let p = self.phase * factor;
        self.phase = p / p.norm();
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase(&self) -> Complex64 {
        self.phase
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Bitmask of sites carrying a non-identity factor.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    pub fn get(&self, site: usize) -> Option<Pauli> {
        if site >= self.n_qubits {
            return None;
        }
        let bit = 1u64 << site;
        match (self.x & bit != 0, self.z & bit != 0) {
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
            (false, false) => None,
        }
    }

    /// Non-identity factors in ascending site order.
    pub fn ops(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        (0..self.n_qubits).filter_map(move |s| self.get(s).map(|p| (s, p)))
    }

    /// True when the phase is ±1, i.e. the string is a hermitian involution.
    pub fn is_hermitian(&self) -> bool {
        self.phase.im.abs() < 1e-12
    }

    pub fn dagger(&self) -> Self {
        Self {
            phase: self.phase.conj(),
            ..self.clone()
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let sym = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        sym & 1 == 0
    }

    /// Same string with the phase set to +1.
    pub fn unphased(&self) -> Self {
        Self::from_masks(self.n_qubits, self.x, self.z)
    }

    /// Embeds the string into a larger register (new sites act as identity).
    pub fn extended(&self, n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        if n_qubits < self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: n_qubits,
            });
        }
        Ok(Self {
            n_qubits,
            ..self.clone()
        })
    }

    /// Product `self · other` under the Pauli algebra.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self.multiply_unchecked(other))
    }

    fn multiply_unchecked(&self, other: &PauliString) -> PauliString {
        // Each factor is i^{x z} X^x Z^z; moving Z^{z1} past X^{x2} costs (-1)^{z1 x2}.
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = (self.x & self.z).count_ones() + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - (x & z).count_ones();
        PauliString {
            n_qubits: self.n_qubits,
            x,
            z,
            phase: self.phase * other.phase * i_pow(k),
        }
    }

    pub(crate) fn action(&self) -> BasisAction {
        BasisAction {
            flip: self.x,
            zmask: self.z,
            coeff: self.phase * i_pow((self.x & self.z).count_ones()),
        }
    }

    /// Dense `2^n × 2^n` matrix; only for registers up to [`MAX_DENSE_QUBITS`].
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        check_dense(self.n_qubits)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        let act = self.action();
        for col in 0..dim as u64 {
            let row = col ^ act.flip;
            m[(row as usize, col as usize)] = act.coeff * act.sign(col);
        }
        Ok(m)
    }
}

impl Mul for &PauliString {
    type Output = PauliString;

    /// Panics if the register sizes differ; use [`PauliString::multiply`] otherwise.
    fn mul(self, rhs: &PauliString) -> PauliString {
        self.multiply(rhs).expect("Pauli strings on different registers")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for (site, op) in self.ops() {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", op.symbol(), site)?;
            first = false;
        }
        Ok(())
    }
}

pub(crate) fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::EmptyRegister);
    }
    if n_qubits > MAX_PAULI_QUBITS {
        return Err(Error::RegisterTooLarge {
            n_qubits,
            limit: MAX_PAULI_QUBITS,
        });
    }
    Ok(())
}

fn check_dense(n_qubits: usize) -> Result<()> {
    if n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::RegisterTooLarge {
            n_qubits,
            limit: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

/// A linear combination of Pauli strings with complex weights.
///
/// Terms are kept in canonical form: each string's phase is folded into its
/// weight, identical strings are merged, and exact-zero weights are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPauliSum {
    n_qubits: usize,
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl WeightedPauliSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(Self {
            n_qubits,
            terms: BTreeMap::new(),
        })
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex64, PauliString)>,
    {
        let mut sum = Self::new(n_qubits)?;
        for (c, s) in terms {
            sum.add_term(c, &s)?;
        }
        Ok(sum)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, coeff: Complex64, string: &PauliString) -> Result<()> {
        if string.n_qubits != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: string.n_qubits,
            });
        }
        self.insert(string.x, string.z, coeff * string.phase);
        Ok(())
    }

    fn insert(&mut self, x: u64, z: u64, coeff: Complex64) {
        let slot = self.terms.entry((x, z)).or_insert(Complex64::new(0.0, 0.0));
        *slot += coeff;
        if *slot == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(x, z));
        }
    }

    /// Terms as `(weight, string)` with unit string phase, in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (Complex64, PauliString)> + '_ {
        self.terms
            .iter()
            .map(move |(&(x, z), &c)| (c, PauliString::from_masks(self.n_qubits, x, z)))
    }

    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        self.terms
            .get(&(string.x, string.z))
            .map(|&c| c / string.phase)
            .unwrap_or_default()
    }

    /// Hermitian iff every canonical weight is real.
    pub fn is_hermitian(&self) -> bool {
        self.is_hermitian_within(1e-12)
    }

    pub fn is_hermitian_within(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol * (1.0 + c.re.abs()))
    }

    pub fn dagger(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(&k, c)| (k, c.conj())).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = Self {
            n_qubits: self.n_qubits,
            terms: BTreeMap::new(),
        };
        for (&(x, z), &c) in &self.terms {
            out.insert(x, z, c * factor);
        }
        out
    }

    pub fn add(&self, other: &WeightedPauliSum) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            out.insert(x, z, c);
        }
        Ok(out)
    }

    /// Operator product `self · other`, expanded and merged.
    pub fn multiply(&self, other: &WeightedPauliSum) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::new(self.n_qubits)?;
        for (ca, a) in self.terms() {
            for (cb, b) in other.terms() {
                let p = a.multiply_unchecked(&b);
                out.insert(p.x, p.z, ca * cb * p.phase);
            }
        }
        Ok(out)
    }

    /// `self · other − other · self`. Only anticommuting pairs contribute (2ab).
    pub fn commutator(&self, other: &WeightedPauliSum) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::new(self.n_qubits)?;
        for (ca, a) in self.terms() {
            for (cb, b) in other.terms() {
                if !a.commutes_with(&b) {
                    let p = a.multiply_unchecked(&b);
                    out.insert(p.x, p.z, ca * cb * p.phase * 2.0);
                }
            }
        }
        Ok(out)
    }

    /// Sum of absolute weights; zero iff the operator vanishes.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Drops terms whose weight magnitude is at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > tol)
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        check_dense(self.n_qubits)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, s) in self.terms() {
            let act = s.action();
            for col in 0..dim as u64 {
                let row = col ^ act.flip;
                m[(row as usize, col as usize)] += c * act.coeff * act.sign(col);
            }
        }
        Ok(m)
    }

    pub(crate) fn actions(&self) -> Vec<(Complex64, BasisAction)> {
        self.terms().map(|(c, s)| (c, s.action())).collect()
    }

    fn check_same(&self, other: &WeightedPauliSum) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }
}

/// L1 norm of `[a, b]` after canonical merging; zero iff the sums commute.
pub fn commutator_norm(a: &WeightedPauliSum, b: &WeightedPauliSum) -> Result<f64> {
    Ok(a.commutator(b)?.l1_norm())
}
