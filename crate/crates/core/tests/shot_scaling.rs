use kwising_core::ansatz::AnsatzSpec;
use kwising_core::model::Boundary;
use kwising_core::pauli::{Pauli, PauliString};
use kwising_core::shots::{gradient_recipe, hadamard_test, overlap_recipe, projector_recipe, MeasurementBasis, ShotPlan};
use rand::{Rng, SeedableRng};

const SHOTS: [u64; 4] = [100, 1_000, 10_000, 100_000];
const SEEDS: u64 = 200;

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// RMS error over seeds of each Hadamard-test type, regressed in log-log space.
#[test]
fn hadamard_errors_fall_as_inverse_square_root() {
    let spec = AnsatzSpec::new(2, 1, Boundary::Open).unwrap();
    let c = spec.circuit().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let params: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
    let zz = PauliString::from_ops(2, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
    let cases = [
        (gradient_recipe(&c, &params, 0, &zz, false).unwrap(), MeasurementBasis::X),
        (projector_recipe(&c, &params, 3).unwrap(), MeasurementBasis::Y),
        (overlap_recipe(&c, &params, 1, 3).unwrap(), MeasurementBasis::X),
    ];
    for (k, (recipe, basis)) in cases.iter().enumerate() {
        let exact = hadamard_test(recipe, *basis, &ShotPlan::analytic(), "exact").unwrap().value;
        let mut logs = Vec::new();
        for &shots in &SHOTS {
            let mse = (0..SEEDS)
                .map(|seed| {
                    let plan = ShotPlan::new(shots, seed).unwrap();
                    let e = hadamard_test(recipe, *basis, &plan, &format!("case{k}")).unwrap().value;
                    (e - exact) * (e - exact)
                })
                .sum::<f64>()
                / SEEDS as f64;
            logs.push(mse.sqrt().ln());
        }
        let xs: Vec<f64> = SHOTS.iter().map(|&s| (s as f64).ln()).collect();
        let m = slope(&xs, &logs);
        assert!((m + 0.5).abs() <= 0.1, "case {k}: slope {m}");
    }
}
