//! Noiseless purity P0 = tr[T²], noisy channel purity P = tr[T̄²], channel
//! fidelity F = tr[T T̄], and the residual F − (P + P0)/2.
//!
//! Expanding the three bilinear forms gives the exact identity
//!
//! ```text
//! F − (P + P0)/2 = −½ tr[(T̄ − T)²]
//! ```
//!
//! for any channel, state and noise model, so the residual is never
//! positive and vanishes to second order in T̄ − T.

use crate::channels::{ControlVector, ParamChannel};
use crate::error::Result;
use crate::matcore::{hs_product, ComplexMatrix, DensityMatrix};
use crate::noise::{average_output, AveragingSpec, FluctuationModel};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub p0: f64,
    pub p: f64,
    pub f: f64,
    /// f − (p + p0)/2.
    pub residual: f64,
    /// |tr T̄ − 1|.
    pub trace_defect: f64,
    pub stderr_p: f64,
    pub stderr_f: f64,
    /// tr[(T̄ − T)²]; the residual equals −spread/2.
    pub spread: f64,
    pub method: &'static str,
}

impl MetricsReport {
    /// |residual + spread/2|, zero up to roundoff.
    pub fn identity_gap(&self) -> f64 {
        (self.residual + 0.5 * self.spread).abs()
    }
}

/// The report together with the matrices it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// T(ρ, λ).
    pub output: ComplexMatrix,
    /// T̄.
    pub averaged: ComplexMatrix,
}

/// P0 = tr[T(ρ, λ)²].
pub fn purity_noiseless(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
) -> Result<f64> {
    let t = ch.apply(rho, lambda)?;
    hs_product(&t, &t)
}

/// P = tr[T̄²] with a first-order standard error.
pub fn channel_purity(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<(f64, f64)> {
    let e = evaluate_full(ch, rho, lambda, model, spec)?;
    Ok((e.report.p, e.report.stderr_p))
}

/// F = tr[T T̄] with a first-order standard error.
pub fn channel_fidelity(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<(f64, f64)> {
    let e = evaluate_full(ch, rho, lambda, model, spec)?;
    Ok((e.report.f, e.report.stderr_f))
}

/// All metrics from one shared averaging pass.
pub fn evaluate(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<MetricsReport> {
    Ok(evaluate_full(ch, rho, lambda, model, spec)?.report)
}

pub fn evaluate_full(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<Evaluation> {
    let t = ch.apply(rho, lambda)?;
    let avg = average_output(ch, rho, lambda, model, spec)?;
    let t_bar = avg.mean;
    let p0 = hs_product(&t, &t)?;
    let p = hs_product(&t_bar, &t_bar)?;
    let f = hs_product(&t, &t_bar)?;
    let diff = &t_bar - &t;
    let spread = hs_product(&diff, &diff)?;
    // δP ≈ 2 tr(T̄ δT̄), δF ≈ tr(T δT̄); ‖δT̄‖_F ≤ dim · max-entry stderr
    let dim = t.dim() as f64;
    let (stderr_p, stderr_f) = if avg.stderr == 0.0 {
        (0.0, 0.0)
    } else {
        (
            2.0 * t_bar.frobenius_norm() * dim * avg.stderr,
            t.frobenius_norm() * dim * avg.stderr,
        )
    };
    let report = MetricsReport {
        p0,
        p,
        f,
        residual: f - 0.5 * (p + p0),
        trace_defect: (t_bar.trace().re - 1.0).abs(),
        stderr_p,
        stderr_f,
        spread,
        method: spec.name(),
    };
    Ok(Evaluation {
        report,
        output: t,
        averaged: t_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::bloch_to_density;
    use proptest::prelude::*;

    fn ket0() -> DensityMatrix {
        DensityMatrix::basis(2, 0)
    }

    /// Closed-form case: p = (1,0,0,0), ρ = |0⟩⟨0|, δ̄p = (−ε, ε, 0, 0)
    /// gives T̄ = diag(1−ε, ε).
    fn section_case(eps: f64) -> MetricsReport {
        let ch = ParamChannel::depolarizing([1.0, 0.0, 0.0, 0.0]).unwrap();
        let model = FluctuationModel::deterministic_shift(vec![-eps, eps, 0.0, 0.0]).unwrap();
        evaluate(
            &ch,
            &ket0(),
            &ControlVector::from([1.0, 0.0, 0.0, 0.0]),
            &model,
            &AveragingSpec::AffineExact,
        )
        .unwrap()
    }

    #[test]
    fn purity_noiseless_examples() {
        let lambda = ControlVector::new(vec![0.3]).unwrap();
        assert_eq!(
            purity_noiseless(&ParamChannel::identity(2, 1), &ket0(), &lambda).unwrap(),
            1.0
        );
        let p0 = purity_noiseless(
            &ParamChannel::ion_trap(),
            &bloch_to_density([0.6, 0.0, 0.8]).unwrap(),
            &ControlVector::from([1.3, -2.0]),
        )
        .unwrap();
        assert!((p0 - 1.0).abs() < 1e-15);
        let p = [0.7, 0.1, 0.1, 0.1];
        let p0 = purity_noiseless(
            &ParamChannel::depolarizing(p).unwrap(),
            &ket0(),
            &ControlVector::from(p),
        )
        .unwrap();
        assert!((p0 - 0.68).abs() < 1e-15);
    }

    #[test]
    fn closed_form_depolarizing_case() {
        for eps in [1e-1, 1e-2, 1e-3] {
            let r = section_case(eps);
            assert!((r.p - ((1.0 - eps) * (1.0 - eps) + eps * eps)).abs() < 1e-15);
            assert!((r.f - (1.0 - eps)).abs() < 1e-15);
            assert!((r.residual + eps * eps).abs() < 1e-15);
            assert_eq!(r.p0, 1.0);
            assert!(r.trace_defect < 1e-15);
        }
    }

    #[test]
    fn silent_noise_gives_equal_metrics() {
        let ch = ParamChannel::ion_trap();
        let rho = bloch_to_density([0.1, 0.2, 0.3]).unwrap();
        let lambda = ControlVector::from([0.8, 1.1]);
        let model = FluctuationModel::independent_gaussian(&[0.1, 0.1])
            .unwrap()
            .with_scale(0.0)
            .unwrap();
        for spec in [
            AveragingSpec::gauss_hermite(20),
            AveragingSpec::monte_carlo(1000, 5),
        ] {
            let r = evaluate(&ch, &rho, &lambda, &model, &spec).unwrap();
            assert_eq!(r.p, r.p0);
            assert_eq!(r.f, r.p0);
            assert_eq!(r.residual, 0.0);
            let (p, _) = channel_purity(&ch, &rho, &lambda, &model, &spec).unwrap();
            let (f, _) = channel_fidelity(&ch, &rho, &lambda, &model, &spec).unwrap();
            assert_eq!(p, purity_noiseless(&ch, &rho, &lambda).unwrap());
            assert_eq!(f, p);
        }
    }

    #[test]
    fn deterministic_shift_fidelity_on_ion_trap() {
        let ch = ParamChannel::ion_trap();
        let rho = ket0();
        let lambda = ControlVector::from([1.0, 0.3]);
        let shift = vec![0.05, -0.02];
        let model = FluctuationModel::deterministic_shift(shift.clone()).unwrap();
        let t = ch.apply(&rho, &lambda).unwrap();
        let t_shift = ch.apply(&rho, &lambda.offset(&shift).unwrap()).unwrap();
        let expected = hs_product(&t, &t_shift).unwrap();
        for spec in [
            AveragingSpec::gauss_hermite(20),
            AveragingSpec::monte_carlo(64, 1),
        ] {
            let (f, _) = channel_fidelity(&ch, &rho, &lambda, &model, &spec).unwrap();
            assert!((f - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_in_scale_on_ion_trap() {
        let ch = ParamChannel::ion_trap();
        let rho = ket0();
        let lambda = ControlVector::from([1.0, 0.3]);
        let base = FluctuationModel::independent_gaussian(&[1.0, 1.0]).unwrap();
        let mut prev: Option<MetricsReport> = None;
        for k in 0..=10 {
            let model = base.with_scale(0.02 * k as f64).unwrap();
            let r = evaluate(
                &ch,
                &rho,
                &lambda,
                &model,
                &AveragingSpec::gauss_hermite(20),
            )
            .unwrap();
            if let Some(q) = &prev {
                assert!(r.p <= q.p + 1e-10 && r.f <= q.f + 1e-10);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn fidelity_symmetric_bilinear_form() {
        let ch = ParamChannel::ion_trap();
        let rho = bloch_to_density([0.5, 0.1, -0.3]).unwrap();
        let lambda = ControlVector::from([2.2, 0.4]);
        let model = FluctuationModel::independent_gaussian(&[0.2, 0.3]).unwrap();
        let e = evaluate_full(
            &ch,
            &rho,
            &lambda,
            &model,
            &AveragingSpec::gauss_hermite(16),
        )
        .unwrap();
        let swapped = hs_product(&e.averaged, &e.output).unwrap();
        assert!((swapped - e.report.f).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_residual_identity_and_bound() {
        let ch = ParamChannel::ion_trap();
        let rho = ket0();
        let lambda = ControlVector::from([1.0, 0.3]);
        let model = FluctuationModel::independent_gaussian(&[0.1, 0.1]).unwrap();
        let r = evaluate(
            &ch,
            &rho,
            &lambda,
            &model,
            &AveragingSpec::monte_carlo(20_000, 11),
        )
        .unwrap();
        assert!(r.stderr_p > 0.0 && r.stderr_f > 0.0);
        assert!(r.identity_gap() <= 1e-12 + 5.0 * (r.stderr_p + r.stderr_f));
        assert!(r.residual <= 3.0 * (r.stderr_p + r.stderr_f) + 1e-12);
        assert!(r.p0 <= 1.0 + 1e-9 && r.p <= 1.0 + 1e-9 && r.f <= 1.0 + 1e-9);
    }

    fn bloch() -> impl Strategy<Value = [f64; 3]> {
        (
            0.0..=1.0f64,
            0.0..std::f64::consts::PI,
            0.0..(2.0 * std::f64::consts::PI),
        )
            .prop_map(|(r, t, p)| [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_residual_identity(v in bloch(), theta in -3.0..3.0f64, phi in -3.0..3.0f64,
                                   s_theta in 0.0..0.5f64, s_phi in 0.0..0.5f64, m in -0.2..0.2f64) {
            let rho = bloch_to_density(v).unwrap();
            let ch = ParamChannel::ion_trap();
            let model = FluctuationModel::gaussian(vec![m, 0.0], vec![s_theta * s_theta, 0.0, 0.0, s_phi * s_phi]).unwrap();
            let r = evaluate(&ch, &rho, &ControlVector::from([theta, phi]), &model, &AveragingSpec::gauss_hermite(12)).unwrap();
            prop_assert!(r.identity_gap() < 1e-12);
            prop_assert!(r.residual <= 1e-12);
            prop_assert!(r.p >= 0.0 && r.p <= 1.0 + 1e-9);
            prop_assert!(r.f >= 0.0 && r.f <= 1.0 + 1e-9);
        }
    }
}
