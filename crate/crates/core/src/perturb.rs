//! Small-error predictors for the channel purity P and fidelity F.
//!
//! With E[δλ] ≠ 0 the leading correction is first order,
//! `c = tr(T ∂_μT) E[δλ_μ]`; with zero-mean errors it is second order,
//! `c = ½ tr(T ∂_μ∂_νT) E[δλ_μ δλ_ν]`. In both regimes the predictions are
//! `P ≈ P0 + 2c` and `F ≈ P0 + c`, so F = (P + P0)/2 holds exactly at the
//! truncation order. Besides the generic finite-difference route there are
//! closed forms for the ion-trap gate and the anisotropic depolarizing
//! channel.

use num_complex::Complex64;

use crate::channels::{ion_trap_axis, ion_trap_gate, pauli_mixture, ControlVector, ParamChannel};
use crate::error::{Error, Result};
use crate::matcore::{hs_product, trace_of_product, ComplexMatrix, DensityMatrix};
use crate::noise::{moments, FluctuationModel};

/// Default central-difference step for ∂_μT.
pub const DEFAULT_H1: f64 = 1e-4;
/// Default step for ∂_μ∂_νT.
pub const DEFAULT_H2: f64 = 1e-3;
/// Below this |θ0| the ion-trap coefficients use their Maclaurin series.
pub const SERIES_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorOrder {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorOutput {
    pub p0: f64,
    pub p_pred: f64,
    pub f_pred: f64,
    pub order: PredictorOrder,
    /// The fidelity correction c, so p_pred = p0 + 2c and f_pred = p0 + c.
    pub correction_term: f64,
}

impl PredictorOutput {
    fn from_correction(p0: f64, correction: f64, order: PredictorOrder) -> Self {
        Self {
            p0,
            p_pred: p0 + 2.0 * correction,
            f_pred: p0 + correction,
            order,
            correction_term: correction,
        }
    }

    /// f_pred − (p_pred + p0)/2.
    pub fn structural_residual(&self) -> f64 {
        self.f_pred - 0.5 * (self.p_pred + self.p0)
    }
}

/// Finite-difference steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Steps {
    pub first: f64,
    pub second: f64,
}

impl Default for Steps {
    fn default() -> Self {
        Self {
            first: DEFAULT_H1,
            second: DEFAULT_H2,
        }
    }
}

fn check_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    Ok(())
}

fn check_index(ch: &ParamChannel, index: usize) -> Result<()> {
    if index >= ch.arity() {
        return Err(Error::ParameterIndex {
            index,
            arity: ch.arity(),
        });
    }
    Ok(())
}

fn apply_offset(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &[f64],
    offsets: &[(usize, f64)],
) -> Result<ComplexMatrix> {
    let mut shifted = lambda.to_vec();
    for &(k, d) in offsets {
        shifted[k] += d;
    }
    ch.apply_matrix(rho.matrix(), &shifted)
}

/// ∂T/∂λ_μ by central difference.
pub fn d1_channel(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    check_step(h)?;
    check_index(ch, mu)?;
    let l = lambda.as_slice();
    let plus = apply_offset(ch, rho, l, &[(mu, h)])?;
    let minus = apply_offset(ch, rho, l, &[(mu, -h)])?;
    Ok((&plus - &minus).scale_real(0.5 / h))
}

/// ∂²T/∂λ_μ∂λ_ν: three-point stencil on the diagonal, the four corner
/// points of the 3×3 grid off it.
pub fn d2_channel(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    mu: usize,
    nu: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    check_step(h)?;
    check_index(ch, mu)?;
    check_index(ch, nu)?;
    let l = lambda.as_slice();
    if mu == nu {
        let plus = apply_offset(ch, rho, l, &[(mu, h)])?;
        let center = ch.apply_matrix(rho.matrix(), l)?;
        let minus = apply_offset(ch, rho, l, &[(mu, -h)])?;
        let mut out = &plus + &minus;
        out.add_scaled(&center, -2.0);
        return Ok(out.scale_real(1.0 / (h * h)));
    }
    let pp = apply_offset(ch, rho, l, &[(mu, h), (nu, h)])?;
    let pm = apply_offset(ch, rho, l, &[(mu, h), (nu, -h)])?;
    let mp = apply_offset(ch, rho, l, &[(mu, -h), (nu, h)])?;
    let mm = apply_offset(ch, rho, l, &[(mu, -h), (nu, -h)])?;
    let out = &(&pp + &mm) - &(&pm + &mp);
    Ok(out.scale_real(0.25 / (h * h)))
}

/// Generic finite-difference predictor. A nonzero mean contributes the
/// first-order term, a nonzero covariance the second-order term with the
/// full second moment; both are summed when present.
pub fn predict(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    steps: Steps,
) -> Result<PredictorOutput> {
    if model.dim() != ch.arity() {
        return Err(Error::ArityMismatch {
            expected: ch.arity(),
            got: model.dim(),
        });
    }
    let t = ch.apply(rho, lambda)?;
    let p0 = hs_product(&t, &t)?;
    let n = ch.arity();
    let (mean, second) = moments(model);
    let mut correction = 0.0;
    let mut order = PredictorOrder::First;

    if model.has_nonzero_mean() {
        for (mu, &m) in mean.iter().enumerate() {
            if m != 0.0 {
                let d = d1_channel(ch, rho, lambda, mu, steps.first)?;
                correction += trace_of_product(&t, &d).re * m;
            }
        }
    }
    if model.has_nonzero_covariance() {
        order = PredictorOrder::Second;
        for mu in 0..n {
            for nu in mu..n {
                let weight = if mu == nu {
                    second[mu * n + nu]
                } else {
                    second[mu * n + nu] + second[nu * n + mu]
                };
                if weight != 0.0 {
                    let d = d2_channel(ch, rho, lambda, mu, nu, steps.second)?;
                    correction += 0.5 * trace_of_product(&t, &d).re * weight;
                }
            }
        }
    }
    Ok(PredictorOutput::from_correction(p0, correction, order))
}

/// Scalar coefficients of the ion-trap expansion at θ0, after replacing
/// δθ², δθδφ, δφ² by their expectations. `f1` and `g1` are the derivatives
/// multiplying δθ (they only survive inside products with x1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IonTrapCoefficients {
    /// ½(1 + cos θ0), so h0 = this · ρ.
    pub h0: f64,
    /// −¼ cos θ0 · E[δθ²], so h̄2 = this · ρ.
    pub h2_bar: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2_bar: f64,
    pub g0: f64,
    pub g1: f64,
    pub g2_bar: f64,
}

/// sin θ/θ and its first two derivatives.
fn sinc_derivatives(theta: f64) -> (f64, f64, f64) {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0,
            theta * (-1.0 / 3.0 + t2 / 30.0 - t4 / 840.0 + t6 / 45360.0),
            -1.0 / 3.0 + t2 / 10.0 - t4 / 168.0 + t6 / 6480.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let inv = 1.0 / theta;
        (
            s * inv,
            c * inv - s * inv * inv,
            2.0 * s * inv.powi(3) - 2.0 * c * inv * inv - s * inv,
        )
    }
}

/// (1 − cos θ)/θ² and its first two derivatives.
fn versine_derivatives(theta: f64) -> (f64, f64, f64) {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        (
            0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0,
            theta * (-1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0 + t6 / 453600.0),
            -1.0 / 12.0 + t2 / 60.0 - t4 / 1344.0 + t6 / 64800.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let inv = 1.0 / theta;
        let one_minus_cos = 2.0 * (0.5 * theta).sin().powi(2);
        (
            one_minus_cos * inv * inv,
            s * inv * inv - 2.0 * inv.powi(3) * one_minus_cos,
            6.0 * inv.powi(4) * one_minus_cos - 4.0 * inv.powi(3) * s + inv * inv * c,
        )
    }
}

impl IonTrapCoefficients {
    pub fn new(theta0: f64, var_theta: f64) -> Self {
        let (f0, f1, f_dd) = sinc_derivatives(theta0);
        let (g0, g1, g_dd) = versine_derivatives(theta0);
        Self {
            h0: 0.5 * (1.0 + theta0.cos()),
            h2_bar: -0.25 * theta0.cos() * var_theta,
            f0,
            f1,
            f2_bar: 0.5 * f_dd * var_theta,
            g0,
            g1,
            g2_bar: 0.5 * g_dd * var_theta,
        }
    }
}

/// Closed-form second-order expansion of R(θ, φ) ρ R(θ, φ)† around
/// (θ0, φ0). The gate output is written G = h + (i/2) f [x, ρ] + ½ g xρx
/// with x = θ(e^{iφ}σ+ + e^{−iφ}σ−); G0 is its value at (θ0, φ0) and Ḡ2 the
/// moment-averaged second-order part.
#[derive(Clone, Debug, PartialEq)]
pub struct IonTrapExpansion {
    pub coefficients: IonTrapCoefficients,
    pub g0: ComplexMatrix,
    pub g2_bar: ComplexMatrix,
    /// θ0 (e^{iφ0}σ+ + e^{−iφ0}σ−).
    pub x0: ComplexMatrix,
    /// x1 = x1_theta·δθ + x1_phi·δφ.
    pub x1_theta: ComplexMatrix,
    pub x1_phi: ComplexMatrix,
    /// x2 = x2_phi_phi·δφ² + x2_theta_phi·δθδφ.
    pub x2_phi_phi: ComplexMatrix,
    pub x2_theta_phi: ComplexMatrix,
}

impl IonTrapExpansion {
    /// Builds G0 and Ḡ2 from the second moments E[δθ²], E[δθδφ], E[δφ²].
    pub fn new(
        rho: &ComplexMatrix,
        theta0: f64,
        phi0: f64,
        var_theta: f64,
        cov_theta_phi: f64,
        var_phi: f64,
    ) -> Self {
        let k = IonTrapCoefficients::new(theta0, var_theta);
        let half_i = Complex64::new(0.0, 0.5);
        let n = ion_trap_axis(phi0);
        // m = i(e^{iφ}σ+ − e^{−iφ}σ−) = ∂n/∂φ
        let m = {
            let zero = Complex64::new(0.0, 0.0);
            let i = Complex64::i();
            ComplexMatrix::from_rows([
                [zero, i * Complex64::from_polar(1.0, phi0)],
                [-i * Complex64::from_polar(1.0, -phi0), zero],
            ])
        };
        let x0 = n.scale_real(theta0);
        let x1_theta = n.clone();
        let x1_phi = m.scale_real(theta0);
        let x2_phi_phi = n.scale_real(-0.5 * theta0);
        let x2_theta_phi = m.clone();

        let comm = |a: &ComplexMatrix| a.commutator(rho);
        let sandwich = |a: &ComplexMatrix, b: &ComplexMatrix| &(a * rho) * b;

        let mut g0 = rho.scale_real(k.h0);
        g0 += &comm(&x0).scale(half_i * k.f0);
        g0.add_scaled(&sandwich(&x0, &x0), 0.5 * k.g0);

        // averaged first-order-squared pieces
        let x2_bar = &x2_phi_phi.scale_real(var_phi) + &x2_theta_phi.scale_real(cov_theta_phi);
        let f1_x1 = &x1_phi.scale_real(cov_theta_phi) + &x1_theta.scale_real(var_theta);
        let x1_x1 = {
            let mut s = sandwich(&x1_phi, &x1_phi).scale_real(var_phi);
            s.add_scaled(
                &(&sandwich(&x1_phi, &x1_theta) + &sandwich(&x1_theta, &x1_phi)),
                cov_theta_phi,
            );
            s.add_scaled(&sandwich(&x1_theta, &x1_theta), var_theta);
            s
        };
        let g1_x1 = {
            let mut s =
                (&sandwich(&x1_phi, &x0) + &sandwich(&x0, &x1_phi)).scale_real(cov_theta_phi);
            s.add_scaled(
                &(&sandwich(&x1_theta, &x0) + &sandwich(&x0, &x1_theta)),
                var_theta,
            );
            s
        };

        let mut g2 = rho.scale_real(k.h2_bar);
        let mut commutators = comm(&x0).scale_real(k.f2_bar);
        commutators.add_scaled(&comm(&f1_x1), k.f1);
        commutators.add_scaled(&comm(&x2_bar), k.f0);
        g2 += &commutators.scale(half_i);
        let mut sandwiches = (&sandwich(&x0, &x2_bar) + &sandwich(&x2_bar, &x0)).scale_real(k.g0);
        sandwiches.add_scaled(&g1_x1, k.g1);
        sandwiches.add_scaled(&sandwich(&x0, &x0), k.g2_bar);
        sandwiches.add_scaled(&x1_x1, k.g0);
        g2.add_scaled(&sandwiches, 0.5);

        Self {
            coefficients: k,
            g0: g0.hermitian_part(),
            g2_bar: g2.hermitian_part(),
            x0,
            x1_theta,
            x1_phi,
            x2_phi_phi,
            x2_theta_phi,
        }
    }

    /// tr(G0 Ḡ2).
    pub fn correction(&self) -> f64 {
        trace_of_product(&self.g0, &self.g2_bar).re
    }
}

fn ion_trap_moments(model: &FluctuationModel) -> Result<(f64, f64, f64)> {
    if model.dim() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: model.dim(),
        });
    }
    if model.has_nonzero_mean() {
        return Err(Error::InvalidModel(
            "ion-trap closed form requires zero-mean errors".into(),
        ));
    }
    let (_, second) = moments(model);
    Ok((second[0], second[1], second[3]))
}

/// Ion-trap predictor from the closed-form expansion:
/// p_pred = tr ρ² + 2 tr(G0 Ḡ2), f_pred = tr ρ² + tr(G0 Ḡ2).
pub fn ion_trap_predict(
    rho: &DensityMatrix,
    theta0: f64,
    phi0: f64,
    model: &FluctuationModel,
) -> Result<PredictorOutput> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(2, rho.dim()));
    }
    if !theta0.is_finite() || !phi0.is_finite() {
        return Err(Error::NonFiniteControl(usize::from(theta0.is_finite())));
    }
    let (vtt, vtp, vpp) = ion_trap_moments(model)?;
    let p0 = trace_of_product(rho.matrix(), rho.matrix()).re;
    if vtt == 0.0 && vtp == 0.0 && vpp == 0.0 {
        return Ok(PredictorOutput::from_correction(
            p0,
            0.0,
            PredictorOrder::Second,
        ));
    }
    let exp = IonTrapExpansion::new(rho.matrix(), theta0, phi0, vtt, vtp, vpp);
    Ok(PredictorOutput::from_correction(
        p0,
        exp.correction(),
        PredictorOrder::Second,
    ))
}

/// The ion-trap expansion for a given model, for inspection.
pub fn ion_trap_expansion(
    rho: &DensityMatrix,
    theta0: f64,
    phi0: f64,
    model: &FluctuationModel,
) -> Result<IonTrapExpansion> {
    let (vtt, vtp, vpp) = ion_trap_moments(model)?;
    Ok(IonTrapExpansion::new(
        rho.matrix(),
        theta0,
        phi0,
        vtt,
        vtp,
        vpp,
    ))
}

/// Depolarizing predictor: c = tr(Σ_ij p_i δ̄p_j σ_iρσ_i σ_jρσ_j).
pub fn depolarizing_predict(
    rho: &DensityMatrix,
    p: [f64; 4],
    mean_dp: [f64; 4],
) -> Result<PredictorOutput> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(2, rho.dim()));
    }
    let t0 = pauli_mixture(rho.matrix(), &p);
    let d = pauli_mixture(rho.matrix(), &mean_dp);
    let p0 = trace_of_product(&t0, &t0).re;
    let correction = trace_of_product(&t0, &d).re;
    Ok(PredictorOutput::from_correction(
        p0,
        correction,
        PredictorOrder::First,
    ))
}

/// G0 must reproduce the gate output; exposed for cross-checks.
pub fn ion_trap_output(rho: &DensityMatrix, theta0: f64, phi0: f64) -> ComplexMatrix {
    let r = ion_trap_gate(theta0, phi0);
    rho.matrix().sandwich(&r, &r.adjoint())
}
