//! Acceptance suite: one PASS/FAIL line per criterion, every tolerance
//! pinned below. Run with `cargo test -p kwising --test acceptance`.
//!
//! The whole suite runs twice; the last criterion compares every recorded
//! number from both passes bit for bit.
//!
//! Two criteria cannot hold for the model as defined and are listed in
//! `UNATTAINABLE`: they are still evaluated and reported as FAIL, but do not
//! fail the process. Any other FAIL does.

use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use kwising_core::ansatz::{AnsatzSpec, ParameterVector};
use kwising_core::model::{build_hamiltonian, exact_ground, Boundary, ModelParams};
use kwising_core::observables::{
    correlator_profile, correlator_shot, even_sector_projector, ybar_exact, ybar_hadamard, LoopOperator,
};
use kwising_core::pauli::{commutator_norm, Pauli, PauliString};
use kwising_core::qng::{gradient_exact, metric_exact, optimize, ExactObjective, QngOptions};
use kwising_core::shots::{
    gradient_recipe, gradient_shot, hadamard_test, metric_shot, overlap_recipe, projector_recipe, EstimateRecord,
    MeasurementBasis, ShotPlan,
};
use kwising_core::stream_seed;
use kwising_core::zne::{zne_pipeline, NoiseModel, ZneSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

/// `[Ȳ, H]` is nonzero off the even spin-flip sector, and the clean
/// 12-site open chain has `⟨Z₁Z₁₂⟩ ≈ 0.080`.
const UNATTAINABLE: [&str; 2] = ["2b", "3b"];

const ENERGY_REL_TOL: f64 = 1e-3;
const INSTANCE_BUDGET_S: f64 = 600.0;
const LOOP_EIGENVALUE_TOL: f64 = 1e-8;
const COMMUTATOR_TOL: f64 = 1e-10;
const COLLAPSE_MAX: f64 = 0.05;
const CLEAN_MIN: f64 = 0.1;
const SHOT_SIGMAS: f64 = 3.0;
const CORRELATOR_SHOTS: u64 = 8192;
const CORRELATOR_RUNS: u64 = 10;
const FD_EPS: f64 = 1e-5;
const GRADIENT_TOL: f64 = 1e-6;
const HESSIAN_STEP: f64 = 1e-4;
const METRIC_TOL: f64 = 1e-6;
const PSD_FLOOR: f64 = -1e-10;
const ANALYTIC_TOL: f64 = 1e-10;
const SCALING_SHOTS: [u64; 4] = [100, 1_000, 10_000, 100_000];
const SCALING_SEEDS: u64 = 200;
const SLOPE_TARGET: f64 = -0.5;
const SLOPE_TOL: f64 = 0.1;
const YBAR_SHOTS: u64 = 1024;
const YBAR_RUNS: u64 = 5;
const YBAR_SHOT_TOL: f64 = 0.1;
const ZNE_TRAJECTORIES: u64 = 10_000;
const ZNE_SEED: u64 = 2024;
const ZNE_BIAS_RATIO: f64 = 0.5;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Suite {
    lines: Vec<Line>,
    /// Every number a criterion depends on, in evaluation order.
    values: Vec<(&'static str, f64)>,
}

impl Suite {
    fn check(&mut self, id: &'static str, pass: bool, detail: String) {
        self.lines.push(Line { id, pass, detail });
    }

    fn record(&mut self, id: &'static str, xs: impl IntoIterator<Item = f64>) {
        self.values.extend(xs.into_iter().map(|x| (id, x)));
    }
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn random_params(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-3.2..3.2)).collect()
}

fn v_label(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

/// Optimizes the `N = L/2` ansatz from the seeded start and returns it with the final parameters.
fn optimized(model: &ModelParams) -> (AnsatzSpec, ParameterVector, f64, f64, usize) {
    let h = build_hamiltonian(model).unwrap();
    let e0 = exact_ground(model).unwrap().ground_energy;
    let spec = AnsatzSpec::for_model(model).unwrap();
    let init = spec.initial_parameters(stream_seed(SEED, &format!("init/L{}/v{}", model.length, v_label(model.impurity)), 0));
    let mut obj = ExactObjective::new(spec.circuit().unwrap(), h).unwrap();
    let out = optimize(&mut obj, init, &QngOptions::default(), Some(e0)).unwrap();
    (spec, out.state.params, out.state.energy, e0, out.state.iteration)
}

fn combine(runs: &[EstimateRecord]) -> (f64, f64) {
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.value).sum::<f64>() / n;
    let se = runs.iter().map(|r| r.std_error * r.std_error).sum::<f64>().sqrt() / n;
    (mean, se)
}

fn energy_convergence(s: &mut Suite) {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    let mut failures = Vec::new();
    for l in [8, 10, 12] {
        for v in [0.0, 4.0] {
            for b in [Boundary::Open, Boundary::Periodic] {
                let t = Instant::now();
                let model = ModelParams::new(l, b, v);
                let (_, params, e, e0, iters) = optimized(&model);
                let secs = t.elapsed().as_secs_f64();
                let rel = (e - e0).abs() / e0.abs();
                worst = worst.max(rel);
                slowest = slowest.max(secs);
                if rel >= ENERGY_REL_TOL || secs >= INSTANCE_BUDGET_S {
                    failures.push(format!("L={l} v={v} {b:?}: rel {rel:.2e} in {secs:.1}s"));
                }
                s.record("1", [e, e0, iters as f64]);
                s.record("1", params.iter().copied());
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("12 instances, worst rel error {worst:.2e} < {ENERGY_REL_TOL:e}, slowest {slowest:.1}s")
    } else {
        failures.join("; ")
    };
    s.check("1 energy convergence", failures.is_empty(), detail);
}

fn topological_eigenvalue(s: &mut Suite) {
    let mut dev = Vec::new();
    for l in [8, 10, 12] {
        let g = exact_ground(&ModelParams::new(l, Boundary::Periodic, 0.0)).unwrap();
        let y = ybar_exact(&g.ground_state).unwrap();
        s.record("2", [y]);
        dev.push((l, (y.abs() - SQRT_2).abs()));
    }
    let worst = max_abs(dev.iter().map(|d| d.1));
    s.check(
        "2a |<Ybar>| = sqrt2 on periodic ground states",
        worst < LOOP_EIGENVALUE_TOL,
        format!("L=8,10,12 max deviation {worst:.1e} (tol {LOOP_EIGENVALUE_TOL:e})"),
    );

    let mut full = Vec::new();
    let mut even = Vec::new();
    for l in 2..=6 {
        let h = build_hamiltonian(&ModelParams::new(l, Boundary::Periodic, 0.0)).unwrap();
        let y = LoopOperator::new(l).unwrap().to_sum().unwrap();
        full.push(commutator_norm(&y, &h).unwrap());
        let projected = y.multiply(&even_sector_projector(l).unwrap()).unwrap();
        even.push(commutator_norm(&projected, &h).unwrap());
    }
    s.record("2", full.iter().chain(&even).copied());
    let worst_full = max_abs(full.iter().copied());
    let worst_even = max_abs(even.iter().copied());
    s.check(
        "2b commutator_norm(Ybar, H) at L<=6",
        worst_full < COMMUTATOR_TOL,
        format!(
            "full space max {worst_full:.3} (tol {COMMUTATOR_TOL:e}); restricted to the even spin-flip sector max {worst_even:.1e}"
        ),
    );
}

fn defect_collapse(s: &mut Suite) {
    let l = 12;
    let site = 5;
    let mut states = Vec::new();
    for v in [0.0, 4.0] {
        let g = exact_ground(&ModelParams::new(l, Boundary::Open, v).with_defect_site(site)).unwrap();
        states.push(g.ground_state);
    }
    let clean = correlator_profile(&states[0]).unwrap();
    let defect = correlator_profile(&states[1]).unwrap();
    s.record("3", clean.iter().chain(&defect).copied());

    let past = max_abs(defect[site + 1..].iter().copied());
    s.check(
        "3a v=4 |<Z1 Zr>| < 0.05 for r >= 7",
        past < COLLAPSE_MAX,
        format!("max {past:.4} (tol {COLLAPSE_MAX})"),
    );
    let (argmin, min) = clean
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(k, m), (i, x)| if x.abs() < m { (i, x.abs()) } else { (k, m) });
    s.check(
        "3b v=0 |<Z1 Zr>| > 0.1 for all r <= 12",
        min > CLEAN_MIN,
        format!("min {min:.4} at r={} (floor {CLEAN_MIN})", argmin + 1),
    );

    let base = ShotPlan::new(CORRELATOR_SHOTS, SEED).unwrap();
    let mut worst = 0.0f64;
    for (state, exact, v) in [(&states[0], &clean, 0.0), (&states[1], &defect, 4.0)] {
        for (r, &ex) in exact.iter().enumerate().skip(1) {
            let runs: Vec<_> = (0..CORRELATOR_RUNS)
                .map(|run| correlator_shot(state, r, &base.with_run(run), &format!("corr/L12_v{v}/r{}", r + 1)).unwrap())
                .collect();
            let (mean, se) = combine(&runs);
            s.record("3", [mean, se]);
            worst = worst.max((mean - ex).abs() / se);
        }
    }
    s.check(
        "3c sampled profiles (10 x 8192) within 3 SE of exact",
        worst <= SHOT_SIGMAS,
        format!("largest deviation {worst:.2} SE over 22 sampled points"),
    );
}

fn gradient_metric_fidelity(s: &mut Suite) {
    let mut grad_err = 0.0f64;
    let mut metric_err = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut asym = 0.0f64;
    let mut case = 0;
    for l in 2..=4 {
        for b in [Boundary::Open, Boundary::Periodic] {
            for v in [0.0, 4.0, f64::INFINITY] {
                case += 1;
                let spec = AnsatzSpec::new(l, 2, b).unwrap();
                let c = spec.circuit().unwrap();
                let params = random_params(c.n_params(), case);
                let h = build_hamiltonian(&ModelParams::new(l, b, v)).unwrap();
                let energy = |p: &[f64]| c.prepare_state(p).unwrap().expectation(&h).unwrap();
                let grad = gradient_exact(&c, &params, &h).unwrap();
                for (p, gp) in grad.iter().enumerate() {
                    let mut up = params.clone();
                    let mut down = params.clone();
                    up[p] += FD_EPS;
                    down[p] -= FD_EPS;
                    grad_err = grad_err.max(((energy(&up) - energy(&down)) / (2.0 * FD_EPS) - gp).abs());
                }
                s.record("4", grad.iter().copied());
                if v != 0.0 {
                    continue;
                }

                // g_pq = −½ ∂²F/∂δ_p∂δ_q at δ = 0, F(δ) = |⟨ψ(Θ)|ψ(Θ+δ)⟩|².
                let psi = c.prepare_state(&params).unwrap();
                let fidelity = |shift: &[(usize, f64)]| {
                    let mut t = params.clone();
                    for &(p, d) in shift {
                        t[p] += d;
                    }
                    psi.inner(&c.prepare_state(&t).unwrap()).unwrap().norm_sqr()
                };
                let g = metric_exact(&c, &params).unwrap();
                let e = HESSIAN_STEP;
                for p in 0..c.n_params() {
                    for q in p..c.n_params() {
                        let d2 = if p == q {
                            (fidelity(&[(p, e)]) - 2.0 + fidelity(&[(p, -e)])) / (e * e)
                        } else {
                            (fidelity(&[(p, e), (q, e)]) - fidelity(&[(p, e), (q, -e)]) - fidelity(&[(p, -e), (q, e)])
                                + fidelity(&[(p, -e), (q, -e)]))
                                / (4.0 * e * e)
                        };
                        metric_err = metric_err.max((-0.5 * d2 - g.get(p, q)).abs());
                    }
                }
                let m = g.as_matrix();
                asym = asym.max((m - m.transpose()).abs().max());
                min_eig = min_eig.min(g.min_eigenvalue());
                s.record("4", m.iter().copied());
            }
        }
    }
    s.check(
        "4a gradient vs central differences (L<=4, eps=1e-5)",
        grad_err < GRADIENT_TOL,
        format!("max error {grad_err:.1e} (tol {GRADIENT_TOL:e})"),
    );
    s.check(
        "4b metric vs fidelity Hessian",
        metric_err < METRIC_TOL,
        format!("max error {metric_err:.1e} (tol {METRIC_TOL:e})"),
    );
    s.check(
        "4c metric symmetric and PSD",
        asym == 0.0 && min_eig >= PSD_FLOOR,
        format!("max asymmetry {asym:.1e}, min eigenvalue {min_eig:.1e} (floor {PSD_FLOOR:e})"),
    );
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn protocol_equivalence(s: &mut Suite) {
    let mut worst = 0.0f64;
    let mut case = 100;
    for l in 2..=3 {
        for b in [Boundary::Open, Boundary::Periodic] {
            for n in 1..=2 {
                case += 1;
                let c = AnsatzSpec::new(l, n, b).unwrap().circuit().unwrap();
                let params = random_params(c.n_params(), case);
                let h = build_hamiltonian(&ModelParams::new(l, b, 1.0)).unwrap();
                let plan = ShotPlan::analytic();
                let gs = gradient_shot(&c, &params, &h, &plan).unwrap().values;
                let ge = gradient_exact(&c, &params, &h).unwrap();
                let ms = metric_shot(&c, &params, &plan).unwrap().metric;
                let me = metric_exact(&c, &params).unwrap();
                worst = worst.max(max_abs(gs.iter().zip(&ge).map(|(a, b)| a - b)));
                worst = worst.max((ms.as_matrix() - me.as_matrix()).abs().max());
                s.record("5", gs.iter().copied());
            }
        }
    }
    s.check(
        "5a analytic gradient_shot/metric_shot = exact (L<=3)",
        worst < ANALYTIC_TOL,
        format!("max difference {worst:.1e} (tol {ANALYTIC_TOL:e})"),
    );

    let c = AnsatzSpec::new(2, 1, Boundary::Open).unwrap().circuit().unwrap();
    let params = random_params(c.n_params(), 7);
    let zz = PauliString::from_ops(2, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
    let cases = [
        ("gradient", gradient_recipe(&c, &params, 0, &zz, false).unwrap(), MeasurementBasis::X),
        ("projector", projector_recipe(&c, &params, 3).unwrap(), MeasurementBasis::Y),
        ("overlap", overlap_recipe(&c, &params, 1, 3).unwrap(), MeasurementBasis::X),
    ];
    let xs: Vec<f64> = SCALING_SHOTS.iter().map(|&n| (n as f64).ln()).collect();
    let mut slopes = Vec::new();
    for (name, recipe, basis) in &cases {
        let exact = hadamard_test(recipe, *basis, &ShotPlan::analytic(), "exact").unwrap().value;
        let ys: Vec<f64> = SCALING_SHOTS
            .iter()
            .map(|&shots| {
                let mse = (0..SCALING_SEEDS)
                    .map(|seed| {
                        let e = hadamard_test(recipe, *basis, &ShotPlan::new(shots, seed).unwrap(), name).unwrap().value;
                        (e - exact) * (e - exact)
                    })
                    .sum::<f64>()
                    / SCALING_SEEDS as f64;
                mse.sqrt().ln()
            })
            .collect();
        slopes.push((*name, slope(&xs, &ys)));
    }
    s.record("5", slopes.iter().map(|x| x.1));
    let ok = slopes.iter().all(|(_, m)| (m - SLOPE_TARGET).abs() <= SLOPE_TOL);
    let list: Vec<String> = slopes.iter().map(|(n, m)| format!("{n} {m:.3}")).collect();
    s.check(
        "5b sampled error slope -0.5 +- 0.1 (1e2..1e5 shots)",
        ok,
        format!("{} over {SCALING_SEEDS} seeds", list.join(", ")),
    );
}

fn ybar_circuit(s: &mut Suite) {
    let model = ModelParams::new(8, Boundary::Periodic, 0.0);
    let (spec, params, ..) = optimized(&model);
    let c = spec.circuit().unwrap();
    let state = c.prepare_state(&params).unwrap();
    let exact = ybar_exact(&state).unwrap();
    let mut worst = (ybar_hadamard(&c, &params, &ShotPlan::analytic()).unwrap().value - exact).abs();
    for (k, l) in [2usize, 3, 4, 6].into_iter().enumerate() {
        let cs = AnsatzSpec::new(l, 2, Boundary::Periodic).unwrap().circuit().unwrap();
        let p = random_params(cs.n_params(), 200 + k as u64);
        let e = ybar_exact(&cs.prepare_state(&p).unwrap()).unwrap();
        worst = worst.max((ybar_hadamard(&cs, &p, &ShotPlan::analytic()).unwrap().value - e).abs());
    }
    s.check(
        "6a analytic ybar_hadamard = ybar_exact",
        worst < ANALYTIC_TOL,
        format!("max difference {worst:.1e} (tol {ANALYTIC_TOL:e})"),
    );

    let base = ShotPlan::new(YBAR_SHOTS, SEED).unwrap();
    let runs: Vec<_> = (0..YBAR_RUNS).map(|r| ybar_hadamard(&c, &params, &base.with_run(r)).unwrap()).collect();
    let (mean, se) = combine(&runs);
    s.record("6", [exact, mean, se]);
    let dev = (mean.abs() - SQRT_2).abs();
    s.check(
        "6b 5 x 1024 shots on optimized L=8 state near sqrt2",
        dev < YBAR_SHOT_TOL,
        format!("|estimate| {:.4} +- {se:.4}, deviation {dev:.4} (tol {YBAR_SHOT_TOL}); exact on this state {exact:.4}", mean.abs()),
    );
}

fn zne_efficacy(s: &mut Suite) {
    let model = ModelParams::new(6, Boundary::Open, 0.0);
    let (spec, params, ..) = optimized(&model);
    let circuit = spec.circuit().unwrap().bind(&params).unwrap();
    let h = build_hamiltonian(&model).unwrap();
    let report = zne_pipeline(
        &circuit,
        &h,
        &ZneSchedule::default(),
        &NoiseModel::new(0.01, 0.0).unwrap(),
        ZNE_TRAJECTORIES,
        ZNE_SEED,
        "zne/L6",
    )
    .unwrap();
    s.record("7", report.estimates.iter().copied().chain([report.extrapolated]));
    let raw = (report.estimates[0] - report.noiseless_reference).abs();
    let mitigated = (report.extrapolated - report.noiseless_reference).abs();
    s.check(
        "7 ZNE halves the energy bias (L=6, p2=0.01, 1e4 trajectories)",
        mitigated <= ZNE_BIAS_RATIO * raw,
        format!("raw bias {raw:.4}, extrapolated bias {mitigated:.4}, ratio {:.3} (max {ZNE_BIAS_RATIO})", mitigated / raw),
    );
}

fn structural_counts(s: &mut Suite) {
    let mut bad = Vec::new();
    let mut checked = 0;
    for l in 2..=14 {
        for n in 1..=7 {
            let periodic = AnsatzSpec::new(l, n, Boundary::Periodic).unwrap().parameter_count();
            let open = AnsatzSpec::new(l, n, Boundary::Open).unwrap().parameter_count();
            checked += 2;
            if periodic != 3 * l * n {
                bad.push(format!("periodic L={l} N={n}: {periodic}"));
            }
            if open != (3 * l - 1) * n {
                bad.push(format!("open L={l} N={n}: {open}"));
            }
            s.record("8", [periodic as f64, open as f64]);
        }
    }
    s.check(
        "8 parameter_count = 3LN / (3L-1)N",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{checked} (L, N, boundary) cases, L=2..14, N=1..7")
        } else {
            bad.join("; ")
        },
    );
}

fn suite() -> Suite {
    let mut s = Suite::default();
    energy_convergence(&mut s);
    topological_eigenvalue(&mut s);
    defect_collapse(&mut s);
    gradient_metric_fidelity(&mut s);
    protocol_equivalence(&mut s);
    ybar_circuit(&mut s);
    zne_efficacy(&mut s);
    structural_counts(&mut s);
    s
}

fn main() -> ExitCode {
    let t = Instant::now();
    let first = suite();
    let second = suite();

    let mut lines = first.lines;
    let same_len = first.values.len() == second.values.len();
    let mismatched: Vec<&str> = first
        .values
        .iter()
        .zip(&second.values)
        .filter(|(a, b)| a.0 != b.0 || a.1.to_bits() != b.1.to_bits())
        .map(|(a, _)| a.0)
        .collect();
    let verdicts_agree = lines.iter().zip(&second.lines).all(|(a, b)| a.pass == b.pass);
    lines.push(Line {
        id: "9 determinism (full rerun, bitwise)",
        pass: same_len && mismatched.is_empty() && verdicts_agree,
        detail: if same_len && mismatched.is_empty() {
            format!("{} recorded values identical across two passes", first.values.len())
        } else {
            format!("{} values differ (criteria {:?})", mismatched.len(), mismatched)
        },
    });

    let mut failed = 0;
    let mut unexpected = 0;
    for l in &lines {
        println!("{} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
        if !l.pass {
            failed += 1;
            let key = l.id.split_whitespace().next().unwrap_or_default();
            unexpected += usize::from(!UNATTAINABLE.contains(&key));
        }
    }
    println!(
        "{} passed, {failed} failed ({} known unattainable) in {:.1}s",
        lines.len() - failed,
        failed - unexpected,
        t.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
