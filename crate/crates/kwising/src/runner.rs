//! Experiment dispatch and run records.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use kwising_core::ansatz::AnsatzSpec;
use kwising_core::model::{build_hamiltonian, energy_scan, exact_ground, ModelParams};
use kwising_core::observables::{correlator_shot, ybar_exact, ybar_hadamard_on, LoopOperator};
use kwising_core::pauli::WeightedPauliSum;
use kwising_core::qng::{optimize, ExactObjective, OptimizeOutcome, QngOptions};
use kwising_core::shots::{EstimateRecord, ShotObjective, ShotPlan};
use kwising_core::state::StateVector;
use kwising_core::stream_seed;
use kwising_core::zne::{zne_pipeline, NoiseModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{EstimatorName, ExperimentConfig, ExperimentKind, StateSource, ZneObservable};
use crate::formats::{self, CorrelatorRow, YbarOutput, ZneOutput};

/// Output-side options that do not change results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub dump_hamiltonian: bool,
    pub dump_state: bool,
}

/// One summarized result: an optimized energy, a correlator endpoint, a loop
/// expectation, a scan row or an extrapolated value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub quantity: String,
    #[serde(rename = "L")]
    pub length: usize,
    /// `None` for an infinite impurity.
    pub v: Option<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
    /// Exact or noiseless value the estimate is compared with.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    /// Spectral gap above the ground state (energy scans).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<f64>,
    /// Optimized ansatz parameters, in circuit order.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<Vec<f64>>,
}

impl ResultEntry {
    fn new(quantity: &str, length: usize, v: f64, value: f64) -> Self {
        Self {
            quantity: quantity.into(),
            length,
            v: v.is_finite().then_some(v),
            value,
            std_error: None,
            reference: None,
            iterations: None,
            converged: None,
            gap: None,
            params: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// `sha256("blob <len>\0" + canonical config JSON)`.
    pub config_hash: String,
    /// Output file name to content hash.
    pub outputs: BTreeMap<String, String>,
    pub results: Vec<ResultEntry>,
    /// Digest of everything above; independent of wall time.
    pub outputs_hash: String,
    /// False when any optimization missed its target.
    pub converged: bool,
    pub wall_time_s: f64,
    pub versions: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn summary_table(&self) -> String {
        let mut s = format!("{:<14} {:>4} {:>6} {:>14} {:>12} {:>14}\n", "quantity", "L", "v", "value", "std_error", "reference");
        let opt = |x: Option<f64>| x.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        for r in &self.results {
            s.push_str(&format!(
                "{:<14} {:>4} {:>6} {:>14.6} {:>12} {:>14}\n",
                r.quantity,
                r.length,
                r.v.map(|v| v.to_string()).unwrap_or_else(|| "inf".into()),
                r.value,
                opt(r.std_error),
                opt(r.reference)
            ));
        }
        s
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn config_hash(config: &ExperimentConfig) -> anyhow::Result<String> {
    let body = serde_json::to_vec(config)?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    Ok(hex(&h.finalize()))
}

fn v_label(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    hashes: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?;
        let bytes = std::fs::read(&path)?;
        self.hashes.insert(name.into(), sha256_hex(&bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            Ok(())
        })
    }
}

struct Session<'a> {
    config: &'a ExperimentConfig,
    opts: &'a RunOptions,
    out: Outputs<'a>,
    results: Vec<ResultEntry>,
    converged: bool,
}

/// Plans for each repetition; analytic mode needs only one.
fn shot_plans(config: &ExperimentConfig) -> anyhow::Result<Vec<ShotPlan>> {
    if config.analytic {
        return Ok(vec![ShotPlan::analytic()]);
    }
    let base = ShotPlan::new(config.shots() as u64, config.seed)?;
    Ok((0..config.runs() as u64).map(|r| base.with_run(r)).collect())
}

/// Mean over runs; the error of the mean is `√(Σ se²)/runs`.
fn combine(runs: &[EstimateRecord]) -> (f64, f64) {
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.value).sum::<f64>() / n;
    let se = runs.iter().map(|r| r.std_error * r.std_error).sum::<f64>().sqrt() / n;
    (mean, se)
}

struct Prepared {
    model: ModelParams,
    hamiltonian: WeightedPauliSum,
    optimized: Option<(AnsatzSpec, OptimizeOutcome)>,
}

impl Session<'_> {
    fn tag(length: usize, v: f64) -> String {
        format!("L{length}_v{}", v_label(v))
    }

    fn prepare(&mut self, length: usize, v: f64, need_optimized: bool) -> anyhow::Result<Prepared> {
        let c = self.config;
        let model = c.model(length, v);
        let hamiltonian = build_hamiltonian(&model)?;
        if self.opts.dump_hamiltonian {
            let h = &hamiltonian;
            self.out
                .write(&format!("hamiltonian_{}.txt", Self::tag(length, v)), |w| formats::write_hamiltonian(w, h))?;
        }
        let reference = if c.stop_on_oracle {
            Some(exact_ground(&model)?.ground_energy)
        } else {
            None
        };
        let optimized = if need_optimized {
            Some(self.optimize(&model, &hamiltonian, reference)?)
        } else {
            None
        };
        Ok(Prepared {
            model,
            hamiltonian,
            optimized,
        })
    }

    fn optimize(
        &mut self,
        model: &ModelParams,
        h: &WeightedPauliSum,
        reference: Option<f64>,
    ) -> anyhow::Result<(AnsatzSpec, OptimizeOutcome)> {
        let c = self.config;
        let (length, v) = (model.length, model.impurity);
        let spec = AnsatzSpec::new(length, c.layers_for(length), c.boundary())?;
        let init_seed = stream_seed(c.seed, &format!("init/L{length}/v{}", v_label(v)), 0);
        let initial = spec.initial_parameters(init_seed);
        let mut options = QngOptions {
            learning_rate: c.learning_rate,
            regularization: c.regularization,
            max_iters: c.max_iters,
            target_rel_error: c.target_rel_error,
            ..QngOptions::default()
        };
        let outcome = match c.estimator {
            EstimatorName::Exact => optimize(&mut ExactObjective::new(spec.circuit()?, h.clone())?, initial, &options, reference)?,
            EstimatorName::Shots => {
                // Sampled energies are too noisy for the descent check.
                options.max_halvings = None;
                let plan = if c.analytic {
                    ShotPlan::analytic()
                } else {
                    ShotPlan::new(c.shots() as u64, stream_seed(c.seed, "optimizer", 0))?
                };
                optimize(&mut ShotObjective::new(spec.circuit()?, h.clone(), plan)?, initial, &options, reference)?
            }
        };
        let tag = Self::tag(length, v);
        self.out.write(&format!("trace_{tag}.csv"), |w| formats::write_trace(w, &outcome.trace))?;
        self.converged &= outcome.converged;
        let mut e = ResultEntry::new("energy", length, v, outcome.state.energy);
        e.reference = reference;
        e.iterations = Some(outcome.state.iteration);
        e.converged = Some(outcome.converged);
        e.params = Some(outcome.state.params.to_vec());
        self.results.push(e);
        Ok((spec, outcome))
    }

    fn measured_state(&mut self, p: &Prepared) -> anyhow::Result<StateVector> {
        let state = match (self.config.state, &p.optimized) {
            (StateSource::Optimized, Some((spec, o))) => spec.prepare_state(&o.state.params)?,
            (StateSource::Optimized, None) => bail!("no optimized state available"),
            (StateSource::Exact, _) => exact_ground(&p.model)?.ground_state,
        };
        if self.opts.dump_state {
            let s = &state;
            self.out
                .write(&format!("state_{}.bin", Self::tag(p.model.length, p.model.impurity)), |w| formats::write_state(w, s))?;
        }
        Ok(state)
    }

    fn run_optimize(&mut self, length: usize, v: f64) -> anyhow::Result<()> {
        let p = self.prepare(length, v, true)?;
        if self.opts.dump_state {
            self.measured_state(&p)?;
        }
        Ok(())
    }

    fn run_correlator(&mut self, length: usize, v: f64) -> anyhow::Result<()> {
        let need_opt = self.config.state == StateSource::Optimized;
        let p = self.prepare(length, v, need_opt)?;
        let state = self.measured_state(&p)?;
        let plans = shot_plans(self.config)?;
        let tag = Self::tag(length, v);
        let mut rows = Vec::with_capacity(length);
        let mut records = Vec::new();
        for site in 0..length {
            let id = format!("corr/{tag}/r{}", site + 1);
            let runs = plans
                .iter()
                .map(|plan| correlator_shot(&state, site, plan, &id))
                .collect::<Result<Vec<_>, _>>()?;
            let (value, std_error) = combine(&runs);
            rows.push(CorrelatorRow {
                r: site + 1,
                value,
                std_error,
            });
            records.extend(runs);
        }
        self.out.write(&format!("correlator_{tag}.csv"), |w| formats::write_correlator(w, &rows))?;
        self.out.write(&format!("estimates_{tag}.csv"), |w| formats::write_estimates(w, &records))?;
        let last = rows.last().expect("chains have at least two sites");
        let mut e = ResultEntry::new("corr_1L", length, v, last.value);
        e.std_error = Some(last.std_error);
        e.reference = Some(kwising_core::observables::correlator_zz(&state, length - 1)?);
        self.results.push(e);
        Ok(())
    }

    fn run_ybar(&mut self, length: usize, v: f64) -> anyhow::Result<()> {
        let need_opt = self.config.state == StateSource::Optimized;
        let p = self.prepare(length, v, need_opt)?;
        let state = self.measured_state(&p)?;
        let tag = Self::tag(length, v);
        let id = format!("ybar/{tag}");
        let runs = shot_plans(self.config)?
            .iter()
            .map(|plan| ybar_hadamard_on(&state, plan, &id))
            .collect::<Result<Vec<_>, _>>()?;
        let (estimate, std_error) = combine(&runs);
        let exact = ybar_exact(&state)?;
        let out = YbarOutput {
            length,
            v: v.is_finite().then_some(v),
            estimate,
            std_error,
            exact,
        };
        self.out.json(&format!("ybar_{tag}.json"), &out)?;
        self.out.write(&format!("estimates_{tag}.csv"), |w| formats::write_estimates(w, &runs))?;
        let mut e = ResultEntry::new("ybar", length, v, estimate);
        e.std_error = Some(std_error);
        e.reference = Some(exact);
        self.results.push(e);
        Ok(())
    }

    fn run_scan(&mut self, length: usize) -> anyhow::Result<()> {
        let c = self.config;
        let finite: Vec<f64> = c.impurity.iter().copied().filter(|v| v.is_finite()).collect();
        let rows = energy_scan(length, c.boundary(), &finite, c.defect_site_for(length))?;
        self.out.write(&format!("scan_L{length}.csv"), |w| formats::write_scan(w, &rows))?;
        for r in &rows {
            let mut e = ResultEntry::new("ground_energy", length, r.impurity, r.ground_energy);
            e.gap = Some(r.gap);
            self.results.push(e);
        }
        Ok(())
    }

    fn run_zne(&mut self, length: usize, v: f64) -> anyhow::Result<()> {
        let c = self.config;
        let p = self.prepare(length, v, true)?;
        let (spec, outcome) = p.optimized.as_ref().expect("optimized above");
        let circuit = spec.circuit()?.bind(&outcome.state.params)?;
        if self.opts.dump_state {
            self.measured_state(&p)?;
        }
        let noise = NoiseModel::new(c.noise_p2, c.noise_p1)?;
        let schedule = c.schedule()?;
        let tag = Self::tag(length, v);
        let id = format!("zne/{tag}");
        let trajectories = c.trajectories as u64;
        let (quantity, report) = match c.observable {
            ZneObservable::Energy => (
                "zne_energy",
                zne_pipeline(&circuit, &p.hamiltonian, &schedule, &noise, trajectories, c.seed, &id)?,
            ),
            ZneObservable::Ybar => (
                "zne_ybar",
                zne_pipeline(&circuit, &LoopOperator::new(length)?, &schedule, &noise, trajectories, c.seed, &id)?,
            ),
        };
        self.out.json(&format!("zne_{tag}.json"), &ZneOutput::from(&report))?;
        let mut e = ResultEntry::new(quantity, length, v, report.extrapolated);
        e.reference = Some(report.noiseless_reference);
        self.results.push(e);
        Ok(())
    }
}

/// Runs a validated experiment, writing every output and `record.json` under `opts.out_dir`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<RunRecord> {
    let diags = config.validate();
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        bail!("invalid configuration:\n  {}", msgs.join("\n  "));
    }
    std::fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let start = Instant::now();
    let mut cx = Session {
        config,
        opts,
        out: Outputs {
            dir: &opts.out_dir,
            hashes: BTreeMap::new(),
        },
        results: Vec::new(),
        converged: true,
    };
    for &length in &config.lengths {
        if config.kind == ExperimentKind::EnergyScan {
            cx.run_scan(length)?;
            continue;
        }
        for &v in &config.impurity {
            match config.kind {
                ExperimentKind::Optimize => cx.run_optimize(length, v)?,
                ExperimentKind::Correlator => cx.run_correlator(length, v)?,
                ExperimentKind::Ybar => cx.run_ybar(length, v)?,
                ExperimentKind::Zne => cx.run_zne(length, v)?,
                ExperimentKind::EnergyScan => unreachable!(),
            }
        }
    }

    let config_hash = config_hash(config)?;
    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    h.update(serde_json::to_vec(&cx.results)?);
    for (name, digest) in &cx.out.hashes {
        h.update(name.as_bytes());
        h.update(b"\0");
        h.update(digest.as_bytes());
    }
    let versions = BTreeMap::from([
        ("kwising".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("record_format".to_string(), "1".to_string()),
    ]);
    let record = RunRecord {
        config: config.clone(),
        config_hash,
        outputs: cx.out.hashes,
        results: cx.results,
        outputs_hash: hex(&h.finalize()),
        converged: cx.converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        versions,
    };
    let path = opts.out_dir.join("record.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&record)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(record)
}

/// Reads a record written by [`run`].
pub fn load_record(path: &Path) -> anyhow::Result<RunRecord> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
