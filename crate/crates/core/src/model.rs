//! Transverse-field Ising chain with a tunable impurity between sites `j` and `j+1`:
//!
//! ```text
//! H(v) = −Σ_{i<L} Z_i Z_{i+1} − Σ_i X_i − b·Z_L Z_1
//!        + (1 − sech 2v)·(Z_j Z_{j+1} + X_j) + tanh(2v)·Y_j Z_{j+1}
//! ```
//!
//! `v = 0` is the clean chain, `v → ∞` the Kramers-Wannier duality defect.
//! Sites are 0-based in code: the physics label `j` maps to `j − 1`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;

use crate::lanczos;
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::state::StateVector;
use crate::{Error, Result};

/// Largest chain handled by the exact-diagonalization oracle.
pub const MAX_ORACLE_LENGTH: usize = 14;

/// Largest chain diagonalized densely under [`DiagMethod::Auto`].
pub const MAX_DENSE_LENGTH: usize = 8;

/// Gap below which the ground space is flagged as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Open,
    Periodic,
}

impl Boundary {
    /// The coupling `b` multiplying the wrap-around bond.
    pub fn coupling(self) -> u8 {
        match self {
            Boundary::Open => 0,
            Boundary::Periodic => 1,
        }
    }

    pub fn from_coupling(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Boundary::Open),
            1 => Ok(Boundary::Periodic),
            other => Err(Error::InvalidModel(format!(
                "boundary coupling must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub length: usize,
    pub boundary: Boundary,
    /// Impurity strength `v`; `f64::INFINITY` selects the duality defect exactly.
    pub impurity: f64,
    /// 0-based left site of the impurity bond (`defect_site`, `defect_site + 1 mod L`).
    pub defect_site: usize,
}

impl ModelParams {
    /// Defect placed at the chain centre: physics label `j = L/2`.
    pub fn new(length: usize, boundary: Boundary, impurity: f64) -> Self {
        Self {
            length,
            boundary,
            impurity,
            defect_site: (length / 2).saturating_sub(1),
        }
    }

    pub fn with_defect_site(mut self, site: usize) -> Self {
        self.defect_site = site;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.length;
        if l == 0 {
            return Err(Error::InvalidModel("chain length must be positive".into()));
        }
        if self.impurity.is_nan() || self.impurity == f64::NEG_INFINITY {
            return Err(Error::InvalidModel(format!("impurity strength {} not allowed", self.impurity)));
        }
        if l == 1 {
            if self.boundary == Boundary::Periodic || self.impurity != 0.0 {
                return Err(Error::InvalidModel(
                    "a single site supports only the open chain without impurity".into(),
                ));
            }
            return Ok(());
        }
        let max_site = match self.boundary {
            Boundary::Open => l - 2,
            Boundary::Periodic => l - 1,
        };
        if self.defect_site > max_site {
            return Err(Error::InvalidModel(format!(
                "defect site {} out of range 0..={max_site}",
                self.defect_site
            )));
        }
        Ok(())
    }

    /// Kondo screening length `l_B = e^{4v}`.
    pub fn screening_length(&self) -> f64 {
        Float::exp(4.0 * self.impurity)
    }
}

/// Impurity weights `(2 sinh²v / cosh 2v, sinh 2v / cosh 2v)`, evaluated as
/// `(1 − sech 2v, tanh 2v)` so large `v` does not overflow.
pub fn impurity_couplings(v: f64) -> (f64, f64) {
    if v == f64::INFINITY {
        return (1.0, 1.0);
    }
    (1.0 - 1.0 / Float::cosh(2.0 * v), Float::tanh(2.0 * v))
}

/// Builds `H(v)` as a hermitian weighted Pauli sum.
pub fn build_hamiltonian(p: &ModelParams) -> Result<WeightedPauliSum> {
    p.validate()?;
    let l = p.length;
    let one = Complex64::new(1.0, 0.0);
    let zz = |a: usize, b: usize| PauliString::from_ops(l, &[(a, Pauli::Z), (b, Pauli::Z)]);
    let mut h = WeightedPauliSum::new(l)?;
    for i in 0..l.saturating_sub(1) {
        h.add_term(-one, &zz(i, i + 1)?)?;
    }
    for i in 0..l {
        h.add_term(-one, &PauliString::single(l, i, Pauli::X)?)?;
    }
    if p.boundary == Boundary::Periodic {
        h.add_term(-one, &zz(l - 1, 0)?)?;
    }
    if l >= 2 {
        let (c1, c2) = impurity_couplings(p.impurity);
        let j = p.defect_site;
        let k = (j + 1) % l;
        if c1 != 0.0 {
            h.add_term(one * c1, &zz(j, k)?)?;
            h.add_term(one * c1, &PauliString::single(l, j, Pauli::X)?)?;
        }
        if c2 != 0.0 {
            h.add_term(
                one * c2,
                &PauliString::from_ops(l, &[(j, Pauli::Y), (k, Pauli::Z)])?,
            )?;
        }
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagMethod {
    /// Dense up to [`MAX_DENSE_LENGTH`], Lanczos beyond.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub ground_energy: f64,
    /// Normalized; global phase fixed so the largest amplitude is real positive.
    pub ground_state: StateVector,
    pub gap: f64,
    /// Set when `gap` is below [`DEGENERACY_GAP`]; the state is then one
    /// arbitrary (but deterministic) member of the ground space.
    pub degenerate: bool,
}

pub fn exact_ground(p: &ModelParams) -> Result<SpectrumResult> {
    exact_ground_with(p, DiagMethod::Auto)
}

pub fn exact_ground_with(p: &ModelParams, method: DiagMethod) -> Result<SpectrumResult> {
    p.validate()?;
    if p.length > MAX_ORACLE_LENGTH {
        return Err(Error::OracleRange(p.length));
    }
    let h = build_hamiltonian(p)?;
    lowest_pair(&h, method)
}

/// Lowest eigenpair and gap of an arbitrary hermitian sum (oracle range only).
pub fn lowest_pair(h: &WeightedPauliSum, method: DiagMethod) -> Result<SpectrumResult> {
    if !h.is_hermitian() {
        return Err(Error::NonHermitian);
    }
    let n = h.n_qubits();
    if n > MAX_ORACLE_LENGTH {
        return Err(Error::OracleRange(n));
    }
    let dense = match method {
        DiagMethod::Auto => n <= MAX_DENSE_LENGTH,
        DiagMethod::Dense => true,
        DiagMethod::Lanczos => false,
    };
    let (e0, e1, mut vec) = if dense {
        dense_lowest(h)?
    } else {
        lanczos::lowest_two(h)?
    };
    fix_phase(&mut vec);
    let gap = (e1 - e0).max(0.0);
    Ok(SpectrumResult {
        ground_energy: e0,
        ground_state: StateVector::from_amplitudes(vec)?,
        gap,
        degenerate: gap < DEGENERACY_GAP,
    })
}

fn dense_lowest(h: &WeightedPauliSum) -> Result<(f64, f64, Vec<Complex64>)> {
    let m: DMatrix<Complex64> = h.to_dense()?;
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e0 = eig.eigenvalues[order[0]];
    let e1 = if dim > 1 { eig.eigenvalues[order[1]] } else { e0 };
    let v: Vec<Complex64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    Ok((e0, e1, v))
}

fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.norm_sqr() > v[best].norm_sqr() * (1.0 + 1e-9) {
            best = i;
        }
    }
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let ph = v[best].conj() / (v[best].norm() * norm);
    v.iter_mut().for_each(|a| *a *= ph);
}

/// One row of an impurity-strength scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub impurity: f64,
    /// `L / l_B = L·e^{−4v}`.
    pub length_over_screening: f64,
    pub ground_energy: f64,
    pub gap: f64,
}

pub fn energy_scan(
    length: usize,
    boundary: Boundary,
    impurities: &[f64],
    defect_site: usize,
) -> Result<Vec<ScanRow>> {
    impurities
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("scan values must be finite, got {v}")));
            }
            let p = ModelParams::new(length, boundary, v).with_defect_site(defect_site);
            let spec = exact_ground(&p)?;
            Ok(ScanRow {
                impurity: v,
                length_over_screening: length as f64 * Float::exp(-4.0 * v),
                ground_energy: spec.ground_energy,
                gap: spec.gap,
            })
        })
        .collect()
}
