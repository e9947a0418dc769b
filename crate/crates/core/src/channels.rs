//! Quantum channels T(ρ, λ) whose Kraus operators depend on a vector of
//! classical control parameters λ.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{expm_unitary, pauli, ComplexMatrix, DensityMatrix};

/// Maximum exponent per parameter in a custom channel's Kraus polynomials.
pub const MAX_POLY_DEGREE: u32 = 4;

/// Control parameters λ_μ.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlVector(Vec<f64>);

impl ControlVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteControl(k));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// λ + δ, componentwise.
    pub fn offset(&self, delta: &[f64]) -> Result<Self> {
        debug_assert_eq!(self.0.len(), delta.len());
        Self::new(self.0.iter().zip(delta).map(|(a, b)| a + b).collect())
    }
}

impl From<[f64; 2]> for ControlVector {
    fn from(v: [f64; 2]) -> Self {
        Self(v.to_vec())
    }
}

impl From<[f64; 4]> for ControlVector {
    fn from(v: [f64; 4]) -> Self {
        Self(v.to_vec())
    }
}

/// A (signed) Kraus operator-sum T(ρ) = Σ_i w_i A_i ρ A_i†.
///
/// Ordinary Kraus sets have every weight equal to +1. A weight of -1 only
/// arises for a depolarizing channel evaluated off the probability simplex,
/// where `p_i < 0` is represented as `-(√|p_i| σ_i) ρ (√|p_i| σ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
    weights: Vec<f64>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let weights = vec![1.0; operators.len()];
        Self::with_weights(operators, weights)
    }

    pub fn with_weights(operators: Vec<ComplexMatrix>, weights: Vec<f64>) -> Result<Self> {
        let first = operators.first().ok_or(Error::EmptyKrausSet)?;
        if let Some(bad) = operators.iter().find(|a| a.dim() != first.dim()) {
            return Err(Error::DimensionMismatch(first.dim(), bad.dim()));
        }
        assert_eq!(operators.len(), weights.len());
        Ok(Self { operators, weights })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Σ_i w_i A_i ρ A_i†.
    pub fn apply_to(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.dim());
        for (a, &w) in self.operators.iter().zip(&self.weights) {
            out.add_scaled(&rho.sandwich(a, &a.adjoint()), w);
        }
        out.hermitian_part()
    }
}

/// Outcome of a trace-preservation check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Completeness {
    /// max-entry deviation of Σ w_i A_i†A_i from the identity.
    pub defect: f64,
    pub pass: bool,
}

/// Checks Σ_i A_i† A_i = I within `tol`.
pub fn check_completeness(ks: &KrausSet, tol: f64) -> Result<Completeness> {
    if ks.is_empty() {
        return Err(Error::EmptyKrausSet);
    }
    let n = ks.dim();
    let mut sum = ComplexMatrix::zeros(n);
    for (a, &w) in ks.operators.iter().zip(&ks.weights) {
        sum.add_scaled(&(&a.adjoint() * a), w);
    }
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(n));
    Ok(Completeness {
        defect,
        pass: defect <= tol,
    })
}

/// One monomial `coefficient · Π_μ λ_μ^{powers[μ]}` of a Kraus polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausTerm {
    pub powers: Vec<u32>,
    pub coefficient: ComplexMatrix,
}

/// A Kraus operator given as a polynomial in the controls.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyOperator {
    pub terms: Vec<KrausTerm>,
}

impl PolyOperator {
    pub fn constant(a: ComplexMatrix) -> Self {
        Self {
            terms: vec![KrausTerm {
                powers: Vec::new(),
                coefficient: a,
            }],
        }
    }

    fn eval(&self, dim: usize, lambda: &[f64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(dim);
        for term in &self.terms {
            let mono: f64 = term
                .powers
                .iter()
                .zip(lambda)
                .map(|(&p, &x)| x.powi(p as i32))
                .product();
            out.add_scaled(&term.coefficient, mono);
        }
        out
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.powers.iter().all(|&p| p == 0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelKind {
    /// Single-qubit gate R(θ, φ) = exp(i(θ/2)(e^{iφ}σ+ + e^{-iφ}σ-)), λ = (θ, φ).
    IonTrap,
    /// Σ_i p_i σ_i ρ σ_i with λ = p.
    Depolarizing { baseline: [f64; 4], strict: bool },
    /// exp(iλH) for a fixed Hermitian generator H.
    UnitaryGenerator { generator: ComplexMatrix },
    /// Kraus operators polynomial in λ.
    Custom { operators: Vec<PolyOperator> },
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::IonTrap => "ion_trap",
            ChannelKind::Depolarizing { .. } => "depolarizing",
            ChannelKind::UnitaryGenerator { .. } => "unitary_generator",
            ChannelKind::Custom { .. } => "custom",
        }
    }
}

/// A channel family T(ρ, λ).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamChannel {
    kind: ChannelKind,
    arity: usize,
    dim: usize,
    affine_in_controls: bool,
}

/// The ion-trap gate in closed form:
/// R(θ, φ) = cos(θ/2) I + i sin(θ/2) (cos φ σx − sin φ σy).
pub fn ion_trap_gate(theta: f64, phi: f64) -> ComplexMatrix {
    let (s, c) = (0.5 * theta).sin_cos();
    let i = Complex64::i();
    ComplexMatrix::from_rows([
        [
            Complex64::new(c, 0.0),
            i * s * Complex64::from_polar(1.0, phi),
        ],
        [
            i * s * Complex64::from_polar(1.0, -phi),
            Complex64::new(c, 0.0),
        ],
    ])
}

/// e^{iφ}σ+ + e^{-iφ}σ- = cos φ σx − sin φ σy.
pub fn ion_trap_axis(phi: f64) -> ComplexMatrix {
    let zero = Complex64::new(0.0, 0.0);
    ComplexMatrix::from_rows([
        [zero, Complex64::from_polar(1.0, phi)],
        [Complex64::from_polar(1.0, -phi), zero],
    ])
}

/// Σ_i p_i σ_i ρ σ_i for a 2x2 ρ, expanded entrywise.
pub(crate) fn pauli_mixture(rho: &ComplexMatrix, p: &[f64]) -> ComplexMatrix {
    let (a, b, c, d) = (rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]);
    // σx ρ σx = [[d, c], [b, a]], σy ρ σy = [[d, -c], [-b, a]], σz ρ σz = [[a, -b], [-c, d]]
    let keep = p[0] + p[3];
    let flip = p[1] + p[2];
    let off_same = p[0] - p[3];
    let off_swap = p[1] - p[2];
    let out = ComplexMatrix::from_rows([
        [a * keep + d * flip, b * off_same + c * off_swap],
        [c * off_same + b * off_swap, d * keep + a * flip],
    ]);
    out.hermitian_part()
}

impl ParamChannel {
    pub fn ion_trap() -> Self {
        Self {
            kind: ChannelKind::IonTrap,
            arity: 2,
            dim: 2,
            affine_in_controls: false,
        }
    }

    /// Anisotropic depolarizing channel with baseline probabilities `p`.
    /// Probabilities are not forced onto the simplex.
    pub fn depolarizing(p: [f64; 4]) -> Result<Self> {
        Self::depolarizing_with_mode(p, false)
    }

    /// Depolarizing channel; in strict mode any negative probability, at
    /// construction or evaluation, is an error.
    pub fn depolarizing_with_mode(p: [f64; 4], strict: bool) -> Result<Self> {
        if let Some(k) = p.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteControl(k));
        }
        if strict {
            check_nonnegative(&p)?;
        }
        Ok(Self {
            kind: ChannelKind::Depolarizing {
                baseline: p,
                strict,
            },
            arity: 4,
            dim: 2,
            affine_in_controls: true,
        })
    }

    /// One-parameter unitary family exp(iλH).
    pub fn unitary_generator(h: ComplexMatrix) -> Result<Self> {
        let defect = h.hermitian_defect();
        if defect > crate::matcore::INPUT_HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self {
            dim: h.dim(),
            kind: ChannelKind::UnitaryGenerator { generator: h },
            arity: 1,
            affine_in_controls: false,
        })
    }

    /// Channel with Kraus operators polynomial in the `arity` controls.
    pub fn custom(dim: usize, arity: usize, operators: Vec<PolyOperator>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::EmptyKrausSet);
        }
        for op in &operators {
            for term in &op.terms {
                if term.coefficient.dim() != dim {
                    return Err(Error::DimensionMismatch(dim, term.coefficient.dim()));
                }
                if term.powers.len() > arity {
                    return Err(Error::InvalidChannel(format!(
                        "monomial has {} exponents for arity {arity}",
                        term.powers.len()
                    )));
                }
                if let Some(&p) = term.powers.iter().find(|&&p| p > MAX_POLY_DEGREE) {
                    return Err(Error::InvalidChannel(format!(
                        "exponent {p} exceeds maximum degree {MAX_POLY_DEGREE}"
                    )));
                }
            }
        }
        let affine_in_controls = operators.iter().all(PolyOperator::is_constant);
        Ok(Self {
            kind: ChannelKind::Custom { operators },
            arity,
            dim,
            affine_in_controls,
        })
    }

    /// λ-independent channel with the given Kraus operators.
    pub fn constant(kraus: Vec<ComplexMatrix>, arity: usize) -> Result<Self> {
        let dim = kraus.first().ok_or(Error::EmptyKrausSet)?.dim();
        Self::custom(
            dim,
            arity,
            kraus.into_iter().map(PolyOperator::constant).collect(),
        )
    }

    /// The identity map on `dim`-dimensional states.
    pub fn identity(dim: usize, arity: usize) -> Self {
        Self::constant(vec![ComplexMatrix::identity(dim)], arity).expect("identity channel")
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn affine_in_controls(&self) -> bool {
        self.affine_in_controls
    }

    /// Baseline controls stored with the channel, if it has any.
    pub fn baseline(&self) -> Option<ControlVector> {
        match &self.kind {
            ChannelKind::Depolarizing { baseline, .. } => Some(ControlVector::from(*baseline)),
            _ => None,
        }
    }

    fn check_arity(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                got: lambda.len(),
            });
        }
        Ok(())
    }

    /// Kraus operators A_i(λ).
    pub fn kraus_at(&self, lambda: &ControlVector) -> Result<KrausSet> {
        let lambda = lambda.as_slice();
        self.check_arity(lambda)?;
        match &self.kind {
            ChannelKind::IonTrap => KrausSet::new(vec![ion_trap_gate(lambda[0], lambda[1])]),
            ChannelKind::Depolarizing { strict, .. } => {
                if *strict {
                    check_nonnegative(lambda)?;
                }
                let (ops, weights) = lambda
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| (pauli::sigma(i).scale_real(p.abs().sqrt()), p.signum()))
                    .unzip();
                KrausSet::with_weights(ops, weights)
            }
            ChannelKind::UnitaryGenerator { generator } => {
                KrausSet::new(vec![expm_unitary(generator, lambda[0])?])
            }
            ChannelKind::Custom { operators } => KrausSet::new(
                operators
                    .iter()
                    .map(|op| op.eval(self.dim, lambda))
                    .collect(),
            ),
        }
    }

    /// T(ρ, λ) = Σ_i A_i(λ) ρ A_i(λ)†.
    pub fn apply(&self, rho: &DensityMatrix, lambda: &ControlVector) -> Result<ComplexMatrix> {
        self.apply_matrix(rho.matrix(), lambda.as_slice())
    }

    /// `apply` on a raw matrix and control slice; the map is linear in its
    /// matrix argument so no state validation is needed here.
    pub fn apply_matrix(&self, rho: &ComplexMatrix, lambda: &[f64]) -> Result<ComplexMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, rho.dim()));
        }
        self.check_arity(lambda)?;
        if let Some(k) = lambda.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteControl(k));
        }
        match &self.kind {
            ChannelKind::IonTrap => {
                let r = ion_trap_gate(lambda[0], lambda[1]);
                Ok(rho.sandwich(&r, &r.adjoint()).hermitian_part())
            }
            ChannelKind::Depolarizing { strict, .. } => {
                if *strict {
                    check_nonnegative(lambda)?;
                }
                Ok(pauli_mixture(rho, lambda))
            }
            _ => {
                let ks = self.kraus_at(&ControlVector(lambda.to_vec()))?;
                Ok(ks.apply_to(rho))
            }
        }
    }
}

fn check_nonnegative(p: &[f64]) -> Result<()> {
    match p.iter().position(|&x| x < 0.0) {
        Some(index) => Err(Error::NegativeProbability {
            index,
            value: p[index],
        }),
        None => Ok(()),
    }
}
