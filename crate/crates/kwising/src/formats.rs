//! Text, binary and tabular output formats.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context};
use kwising_core::model::ScanRow;
use kwising_core::pauli::{Pauli, PauliString, WeightedPauliSum};
use kwising_core::qng::TraceRow;
use kwising_core::shots::EstimateRecord;
use kwising_core::state::StateVector;
use kwising_core::zne::ZneReport;
use kwising_core::Complex64;
use serde::{Deserialize, Serialize};

/// Writes one term per line as `re im site:P site:P ...`, preceded by a
/// `# qubits N` header. Coefficients use round-trip float formatting.
pub fn write_hamiltonian<W: Write>(mut w: W, h: &WeightedPauliSum) -> anyhow::Result<()> {
    writeln!(w, "# qubits {}", h.n_qubits())?;
    for (c, p) in h.terms() {
        let c = c * p.phase();
        write!(w, "{:?} {:?}", c.re, c.im)?;
        for (site, op) in p.ops() {
            write!(w, " {site}:{}", op.symbol())?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses [`write_hamiltonian`] output. Without a `# qubits` header the
/// register size is one past the largest site mentioned.
pub fn read_hamiltonian<R: Read>(mut r: R) -> anyhow::Result<WeightedPauliSum> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut n_qubits: Option<usize> = None;
    let mut terms: Vec<(Complex64, Vec<(usize, Pauli)>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("qubits") {
                n_qubits = Some(n.trim().parse().with_context(|| format!("line {}: bad qubit count", lineno + 1))?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let mut num = |what: &str| -> anyhow::Result<f64> {
            tok.next()
                .ok_or_else(|| anyhow!("line {}: missing {what}", lineno + 1))?
                .parse()
                .with_context(|| format!("line {}: bad {what}", lineno + 1))
        };
        let re = num("real part")?;
        let im = num("imaginary part")?;
        let mut ops = Vec::new();
        for t in tok {
            let (site, op) = t
                .split_once(':')
                .ok_or_else(|| anyhow!("line {}: expected site:P, got {t:?}", lineno + 1))?;
            let site: usize = site.parse().with_context(|| format!("line {}: bad site in {t:?}", lineno + 1))?;
            let mut chars = op.chars();
            let op = match (chars.next().and_then(Pauli::from_symbol), chars.next()) {
                (Some(p), None) => p,
                _ => bail!("line {}: bad Pauli label in {t:?}", lineno + 1),
            };
            ops.push((site, op));
        }
        terms.push((Complex64::new(re, im), ops));
    }
    let n = n_qubits.unwrap_or_else(|| {
        terms
            .iter()
            .flat_map(|(_, ops)| ops.iter().map(|(s, _)| s + 1))
            .max()
            .unwrap_or(1)
    });
    let mut h = WeightedPauliSum::new(n)?;
    for (c, ops) in terms {
        h.add_term(c, &PauliString::from_ops(n, &ops)?)?;
    }
    Ok(h)
}

/// Raw amplitudes as little-endian f64, interleaved `re, im`.
pub fn write_state<W: Write>(mut w: W, state: &StateVector) -> anyhow::Result<()> {
    for a in state.amplitudes() {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state<R: Read>(mut r: R) -> anyhow::Result<StateVector> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        bail!("state dump length {} is not a multiple of 16 bytes", bytes.len());
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
    let amps = bytes.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect();
    Ok(StateVector::from_amplitudes(amps)?)
}

fn finish<W: Write>(w: csv::Writer<W>) -> anyhow::Result<()> {
    w.into_inner().map_err(|e| anyhow!("flushing csv: {}", e.error()))?;
    Ok(())
}

/// `iter,energy,grad_norm,rel_error`; `rel_error` is empty without a reference.
pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> anyhow::Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["iter", "energy", "grad_norm", "rel_error"])?;
    for r in rows {
        c.write_record([
            r.iter.to_string(),
            r.energy.to_string(),
            r.grad_norm.to_string(),
            r.rel_error.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(c)
}

/// `v,L_over_lB,ground_energy,gap`.
pub fn write_scan<W: Write>(w: W, rows: &[ScanRow]) -> anyhow::Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["v", "L_over_lB", "ground_energy", "gap"])?;
    for r in rows {
        c.write_record([
            r.impurity.to_string(),
            r.length_over_screening.to_string(),
            r.ground_energy.to_string(),
            r.gap.to_string(),
        ])?;
    }
    finish(c)
}

/// `circuit_id,basis,shots,value,std_error`.
pub fn write_estimates<W: Write>(w: W, records: &[EstimateRecord]) -> anyhow::Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["circuit_id", "basis", "shots", "value", "std_error"])?;
    for r in records {
        c.write_record([
            r.circuit_id.clone(),
            r.basis.clone(),
            r.shots_used.to_string(),
            r.value.to_string(),
            r.std_error.to_string(),
        ])?;
    }
    finish(c)
}

/// One correlator point; `r` is the 1-based site paired with site 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    pub r: usize,
    pub value: f64,
    pub std_error: f64,
}

/// `r,value,std_error`.
pub fn write_correlator<W: Write>(w: W, rows: &[CorrelatorRow]) -> anyhow::Result<()> {
    let mut c = csv::Writer::from_writer(w);
    for r in rows {
        c.serialize(r)?;
    }
    finish(c)
}

pub fn read_correlator<R: Read>(r: R) -> anyhow::Result<Vec<CorrelatorRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Into::into))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YbarOutput {
    #[serde(rename = "L")]
    pub length: usize,
    /// `None` serializes as `null` for an infinite impurity.
    pub v: Option<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZneOutput {
    pub factors: Vec<f64>,
    pub realized_factors: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub extrapolated: f64,
    pub noiseless_reference: f64,
}

impl From<&ZneReport> for ZneOutput {
    fn from(r: &ZneReport) -> Self {
        Self {
            factors: r.factors.clone(),
            realized_factors: r.realized_factors.clone(),
            estimates: r.estimates.clone(),
            std_errors: r.std_errors.clone(),
            extrapolated: r.extrapolated,
            noiseless_reference: r.noiseless_reference,
        }
    }
}
