//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use chanlaw_core::harness::{fit_slope, parse_config, run_sweep, SweepReport};
use chanlaw_core::matcore::{bloch_to_density, purity};
use chanlaw_core::metrics::evaluate_full;
use chanlaw_core::perturb::{ion_trap_expansion, ion_trap_output, Steps};
use chanlaw_core::{
    depolarizing_predict, ion_trap_predict, predict, AveragingSpec, Complex64, ComplexMatrix,
    ControlVector, DensityMatrix, FluctuationModel, ParamChannel, PredictorOutput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

/// Structural residuals of every predictor invocation in the suite.
static STRUCTURAL: Mutex<Vec<f64>> = Mutex::new(Vec::new());

fn record(out: PredictorOutput) -> PredictorOutput {
    STRUCTURAL.lock().unwrap().push(out.structural_residual());
    out
}

fn record_report(report: &SweepReport) {
    let mut log = STRUCTURAL.lock().unwrap();
    for row in &report.rows {
        log.push(row.f_pred - 0.5 * (row.p_pred + row.p0));
    }
}

fn ket0() -> DensityMatrix {
    DensityMatrix::basis(2, 0)
}

fn random_bloch(rng: &mut impl Rng, pure: bool) -> DensityMatrix {
    let r: f64 = if pure {
        1.0
    } else {
        rng.random::<f64>().cbrt()
    };
    let z: f64 = rng.random_range(-1.0..1.0);
    let az: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    bloch_to_density([r * s * az.cos(), r * s * az.sin(), r * z]).unwrap()
}

fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_state(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    if dim == 2 {
        let pure = rng.random_bool(0.5);
        return random_bloch(rng, pure);
    }
    if rng.random_bool(0.5) {
        let psi: Vec<Complex64> = (0..dim).map(|_| random_complex(rng)).collect();
        DensityMatrix::from_pure(&psi).unwrap()
    } else {
        let g =
            ComplexMatrix::new(dim, (0..dim * dim).map(|_| random_complex(rng)).collect()).unwrap();
        let m = &g * &g.adjoint();
        let t = m.trace().re;
        DensityMatrix::new(m.scale_real(1.0 / t).hermitian_part()).unwrap()
    }
}

fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::new(dim, (0..dim * dim).map(|_| random_complex(rng)).collect()).unwrap();
    g.hermitian_part()
}

fn random_noise(rng: &mut impl Rng, arity: usize, spread: f64) -> FluctuationModel {
    if rng.random_bool(0.5) {
        let mean = (0..arity)
            .map(|_| spread * rng.random_range(-1.0..1.0))
            .collect();
        FluctuationModel::deterministic_shift(mean).unwrap()
    } else {
        let a: Vec<f64> = (0..arity * arity)
            .map(|_| spread * rng.random_range(-1.0..1.0))
            .collect();
        let mut cov = vec![0.0; arity * arity];
        for i in 0..arity {
            for j in 0..arity {
                cov[i * arity + j] = (0..arity)
                    .map(|k| a[i * arity + k] * a[j * arity + k])
                    .sum();
            }
        }
        let mean = if rng.random_bool(0.5) {
            (0..arity)
                .map(|_| 0.5 * spread * rng.random_range(-1.0..1.0))
                .collect()
        } else {
            vec![0.0; arity]
        };
        FluctuationModel::gaussian(mean, cov).unwrap()
    }
}

fn residual_identity_random() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    for case in 0..200 {
        let (ch, rho, lambda, spec) = match case % 3 {
            0 => {
                let theta: f64 = rng.random_range(-PI..PI);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                (
                    ParamChannel::ion_trap(),
                    random_state(&mut rng, 2),
                    vec![theta, phi],
                    AveragingSpec::gauss_hermite(12),
                )
            }
            1 => {
                let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                let p: [f64; 4] = std::array::from_fn(|i| raw[i] / total);
                let spec = if rng.random_bool(0.5) {
                    AveragingSpec::AffineExact
                } else {
                    AveragingSpec::gauss_hermite(4)
                };
                (
                    ParamChannel::depolarizing(p).unwrap(),
                    random_state(&mut rng, 2),
                    p.to_vec(),
                    spec,
                )
            }
            _ => {
                let dim = rng.random_range(2..=4);
                let h = random_hermitian(&mut rng, dim);
                let lambda: f64 = rng.random_range(-2.0..2.0);
                (
                    ParamChannel::unitary_generator(h).unwrap(),
                    random_state(&mut rng, dim),
                    vec![lambda],
                    AveragingSpec::gauss_hermite(16),
                )
            }
        };
        counts[case % 3] += 1;
        let model = random_noise(&mut rng, ch.arity(), 0.2);
        let lambda = ControlVector::new(lambda).unwrap();
        let e = evaluate_full(&ch, &rho, &lambda, &model, &spec)
            .map_err(|e| format!("case {case}: {e}"))?;
        let diff = &e.averaged - &e.output;
        let spread: f64 = diff.entries().iter().map(|z| z.norm_sqr()).sum();
        let lhs = e.report.f - 0.5 * (e.report.p + e.report.p0);
        let gap = (lhs + 0.5 * spread).abs();
        worst = worst.max(gap);
        if gap > 1e-12 {
            return Err(format!("case {case} ({}): gap {gap:.3e}", ch.kind().name()));
        }
    }
    Ok(format!(
        "200 cases ({} ion_trap, {} depolarizing, {} unitary_generator), max gap {worst:.2e}",
        counts[0], counts[1], counts[2]
    ))
}

fn depolarizing_case(eps: f64) -> Result<(f64, f64, f64), String> {
    let ch = ParamChannel::depolarizing([1.0, 0.0, 0.0, 0.0]).unwrap();
    let model = FluctuationModel::deterministic_shift(vec![-eps, eps, 0.0, 0.0]).unwrap();
    let lambda = ControlVector::from([1.0, 0.0, 0.0, 0.0]);
    let r = evaluate_full(&ch, &ket0(), &lambda, &model, &AveragingSpec::AffineExact)
        .map_err(|e| e.to_string())?
        .report;
    record(
        depolarizing_predict(&ket0(), [1.0, 0.0, 0.0, 0.0], [-eps, eps, 0.0, 0.0])
            .map_err(|e| e.to_string())?,
    );
    Ok((r.p, r.f, r.residual))
}

fn depolarizing_closed_form() -> Outcome {
    let mut pts = Vec::new();
    let mut worst: f64 = 0.0;
    for eps in [1e-1, 1e-2, 1e-3] {
        let (p, f, residual) = depolarizing_case(eps)?;
        let expected = [(1.0 - eps) * (1.0 - eps) + eps * eps, 1.0 - eps, -eps * eps];
        for (got, want) in [p, f, residual].into_iter().zip(expected) {
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                return Err(format!("eps {eps}: got {got}, expected {want}"));
            }
        }
        pts.push((eps, residual));
    }
    let slope = fit_slope(&pts, 1e-13).map_err(|e| e.to_string())?.slope;
    if (slope - 2.0).abs() > 0.02 {
        return Err(format!("residual slope {slope:.4}"));
    }
    Ok(format!("max error {worst:.2e}, residual slope {slope:.4}"))
}

fn biased_ratio_order() -> Outcome {
    let mut pts = Vec::new();
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let ch = ParamChannel::depolarizing([1.0, 0.0, 0.0, 0.0]).unwrap();
        let model = FluctuationModel::deterministic_shift(vec![-eps, eps, 0.0, 0.0]).unwrap();
        let r = evaluate_full(
            &ch,
            &ket0(),
            &ControlVector::from([1.0, 0.0, 0.0, 0.0]),
            &model,
            &AveragingSpec::AffineExact,
        )
        .map_err(|e| e.to_string())?
        .report;
        pts.push((eps, r.residual.abs() / (r.f - r.p0).abs()));
    }
    let slope = fit_slope(&pts, 0.0).map_err(|e| e.to_string())?.slope;
    if (slope - 1.0).abs() > 0.1 {
        return Err(format!("ratio slope {slope:.4}"));
    }
    Ok(format!("ratio slope {slope:.4}"))
}

const ION_TRAP_SWEEP: &str = "\
channel.kind = ion_trap
state.bloch = 0 0 1
controls = 1.0 0.3
noise.kind = gaussian
noise.std = 1 1
averaging.method = gauss_hermite
averaging.order = 20
sweep = 0.02 0.04 0.06 0.08 0.10
";

fn ion_trap_report() -> Result<SweepReport, String> {
    let cfg = parse_config(ION_TRAP_SWEEP).map_err(|e| e.to_string())?;
    let report = run_sweep(&cfg).map_err(|e| e.to_string())?;
    record_report(&report);
    Ok(report)
}

fn zero_mean_order(report: &SweepReport) -> Outcome {
    let res = report
        .slopes
        .residual
        .as_ref()
        .map_err(|e| e.to_string())?
        .slope;
    let loss = report
        .slopes
        .purity_loss
        .as_ref()
        .map_err(|e| e.to_string())?
        .slope;
    let msg = format!("|residual| slope {res:.4}, (P0 - P) slope {loss:.4}");
    if (res - 4.0).abs() <= 0.7 && (loss - 2.0).abs() <= 0.3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn predictor_cross_validation() -> Outcome {
    let states = [
        ("pure |0>", ket0()),
        ("pure", bloch_to_density([0.48, -0.6, 0.64]).unwrap()),
        ("mixed", bloch_to_density([0.3, -0.2, 0.5]).unwrap()),
    ];
    let model = FluctuationModel::gaussian(vec![0.0, 0.0], vec![1.0, 0.3, 0.3, 0.7]).unwrap();
    let steps = Steps {
        first: 1e-4,
        second: 1e-3,
    };
    let ch = ParamChannel::ion_trap();
    let mut worst: f64 = 0.0;
    for (label, rho) in &states {
        for i in 0..5 {
            for j in 0..5 {
                let theta = 0.2 + 2.8 * i as f64 / 4.0;
                let phi = 2.0 * PI * j as f64 / 5.0;
                let closed =
                    record(ion_trap_predict(rho, theta, phi, &model).map_err(|e| e.to_string())?);
                let generic = record(
                    predict(&ch, rho, &ControlVector::from([theta, phi]), &model, steps)
                        .map_err(|e| e.to_string())?,
                );
                let err = (closed.correction_term - generic.correction_term).abs();
                worst = worst.max(err);
                if err > 1e-6 {
                    return Err(format!("{label} at ({theta}, {phi}): difference {err:.3e}"));
                }
            }
        }
    }
    Ok(format!("75 grid points, max difference {worst:.2e}"))
}

fn predictor_accuracy(report: &SweepReport) -> Outcome {
    let slope = report
        .slopes
        .pred_defect_f
        .as_ref()
        .map_err(|e| e.to_string())?
        .slope;
    let msg = format!("|F - f_pred| slope {slope:.4}");
    if slope >= 3.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn structural_law() -> Outcome {
    let log = STRUCTURAL.lock().unwrap();
    let worst = log.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let msg = format!(
        "{} predictor outputs, max |f_pred - (p_pred + P0)/2| {worst:.2e}",
        log.len()
    );
    if !log.is_empty() && worst <= 1e-14 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn unitarity_and_g0() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let ch = ParamChannel::ion_trap();
    let model = FluctuationModel::independent_gaussian(&[0.1, 0.1]).unwrap();
    let (mut worst_p, mut worst_g): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let theta: f64 = rng.random_range(-2.0 * PI..2.0 * PI);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let pure = rng.random_bool(0.5);
        let rho = random_bloch(&mut rng, pure);
        let out = ch
            .apply(&rho, &ControlVector::from([theta, phi]))
            .map_err(|e| e.to_string())?;
        let out = DensityMatrix::new(out).map_err(|e| e.to_string())?;
        worst_p = worst_p.max((purity(&out) - purity(&rho)).abs());
        let exp = ion_trap_expansion(&rho, theta, phi, &model).map_err(|e| e.to_string())?;
        worst_g = worst_g.max(exp.g0.max_abs_diff(out.matrix()));
        worst_g = worst_g.max(ion_trap_output(&rho, theta, phi).max_abs_diff(out.matrix()));
    }
    let msg = format!("max purity change {worst_p:.2e}, max |G0 - T| {worst_g:.2e}");
    if worst_p <= 1e-12 && worst_g <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn monte_carlo_consistency() -> Outcome {
    let ch = ParamChannel::ion_trap();
    let lambda = ControlVector::from([1.0, 0.3]);
    let model = FluctuationModel::independent_gaussian(&[0.1, 0.1]).unwrap();
    let quad = evaluate_full(
        &ch,
        &ket0(),
        &lambda,
        &model,
        &AveragingSpec::gauss_hermite(20),
    )
    .map_err(|e| e.to_string())?
    .report;
    let mc_spec = AveragingSpec::monte_carlo(200_000, 20_240_917);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let run = || {
        single.install(|| {
            evaluate_full(&ch, &ket0(), &lambda, &model, &mc_spec).map_err(|e| e.to_string())
        })
    };
    let first = run()?;
    let second = run()?;
    let mc = &first.report;
    let dp = (mc.p - quad.p).abs();
    let df = (mc.f - quad.f).abs();
    let bytes = |e: &chanlaw_core::metrics::Evaluation| {
        let mut s: Vec<u8> = Vec::new();
        for z in e.averaged.entries() {
            s.extend_from_slice(&z.re.to_le_bytes());
            s.extend_from_slice(&z.im.to_le_bytes());
        }
        for x in [e.report.p, e.report.f, e.report.stderr_p, e.report.stderr_f] {
            s.extend_from_slice(&x.to_le_bytes());
        }
        s
    };
    let identical = bytes(&first) == bytes(&second);
    let msg = format!(
        "|dP| = {dp:.2e} vs 5*stderr_p = {:.2e}, |dF| = {df:.2e} vs 5*stderr_f = {:.2e}, rerun identical: {identical}",
        5.0 * mc.stderr_p,
        5.0 * mc.stderr_f
    );
    if dp <= 5.0 * mc.stderr_p && df <= 5.0 * mc.stderr_f && identical {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn small_theta_robustness() -> Outcome {
    let ch = ParamChannel::ion_trap();
    let mut worst: f64 = 0.0;
    let models = [
        FluctuationModel::independent_gaussian(&[0.1, 0.1]).unwrap(),
        FluctuationModel::gaussian(vec![0.0, 0.0], vec![1.0, 0.3, 0.3, 0.7]).unwrap(),
    ];
    for rho in [ket0(), bloch_to_density([0.3, -0.2, 0.5]).unwrap()] {
        for model in &models {
            for phi in [0.0, 0.3, 2.0] {
                let closed =
                    record(ion_trap_predict(&rho, 1e-6, phi, model).map_err(|e| e.to_string())?);
                let generic = record(
                    predict(
                        &ch,
                        &rho,
                        &ControlVector::from([1e-6, phi]),
                        model,
                        Steps::default(),
                    )
                    .map_err(|e| e.to_string())?,
                );
                let err = (closed.p_pred - generic.p_pred)
                    .abs()
                    .max((closed.f_pred - generic.f_pred).abs());
                worst = worst.max(err);
            }
        }
    }
    let msg = format!("theta0 = 1e-6, max predictor difference {worst:.2e}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let report = ion_trap_report();
    let with_report = |f: fn(&SweepReport) -> Outcome| match &report {
        Ok(r) => f(r),
        Err(e) => Err(e.clone()),
    };
    let mut results: Vec<(&str, Outcome)> = vec![
        ("residual identity, randomized", residual_identity_random()),
        ("depolarizing closed form", depolarizing_closed_form()),
        ("biased-noise ratio order", biased_ratio_order()),
        ("zero-mean residual order", with_report(zero_mean_order)),
        (
            "closed-form vs finite-difference predictor",
            predictor_cross_validation(),
        ),
        ("predictor accuracy order", with_report(predictor_accuracy)),
    ];
    let unitarity = unitarity_and_g0();
    let mc = monte_carlo_consistency();
    let small = small_theta_robustness();
    results.push(("structural predictor law", structural_law()));
    results.push(("unitarity and G0 identity", unitarity));
    results.push(("Monte Carlo consistency", mc));
    results.push(("small-angle robustness", small));

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
