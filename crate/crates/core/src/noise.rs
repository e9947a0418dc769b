//! Stochastic control-error models δλ and the engines that average a
//! channel output over them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channels::{ControlVector, ParamChannel};
use crate::error::{Error, Result};
use crate::matcore::{hermitian_eigenvalues, ComplexMatrix, DensityMatrix};
use crate::quadrature::standard_normal_rule;

/// Default Gauss–Hermite nodes per dimension.
pub const DEFAULT_GH_ORDER: usize = 20;
/// Default number of Monte Carlo shards (independent seeded streams).
pub const DEFAULT_SHARDS: usize = 64;
/// Upper bound on the tensor-product quadrature size.
pub const MAX_QUADRATURE_NODES: usize = 20_000_000;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of shard `k`: the k-th output of a SplitMix64 stream started at
/// `seed`.
pub fn mix64(seed: u64, k: u64) -> u64 {
    splitmix64(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    DeterministicShift,
    Gaussian,
    Uniform,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::DeterministicShift => "deterministic_shift",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
        }
    }
}

/// Distribution of the control errors δλ.
///
/// `scale` multiplies the mean and the standard deviations, so the
/// effective mean is `scale·mean` and the effective covariance
/// `scale²·covariance`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationModel {
    kind: NoiseKind,
    mean: Vec<f64>,
    /// Row-major N×N.
    covariance: Vec<f64>,
    scale: f64,
    /// Lower-triangular factor of `covariance`, row-major.
    factor: Vec<f64>,
}

impl FluctuationModel {
    pub fn new(kind: NoiseKind, mean: Vec<f64>, covariance: Vec<f64>, scale: f64) -> Result<Self> {
        let n = mean.len();
        if covariance.len() != n * n {
            return Err(Error::InvalidModel(format!(
                "covariance has {} entries, expected {}",
                covariance.len(),
                n * n
            )));
        }
        if mean.iter().chain(&covariance).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel(
                "non-finite mean or covariance entry".into(),
            ));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "scale must be >= 0, got {scale}"
            )));
        }
        let magnitude = covariance.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for r in 0..n {
            for c in (r + 1)..n {
                if (covariance[r * n + c] - covariance[c * n + r]).abs() > 1e-14 * magnitude {
                    return Err(Error::InvalidModel(format!(
                        "covariance not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        match kind {
            NoiseKind::DeterministicShift if covariance.iter().any(|&x| x != 0.0) => {
                return Err(Error::InvalidModel(
                    "deterministic_shift requires zero covariance".into(),
                ));
            }
            NoiseKind::Uniform => {
                for r in 0..n {
                    for c in 0..n {
                        if r != c && covariance[r * n + c] != 0.0 {
                            return Err(Error::NonDiagonalUniform);
                        }
                    }
                }
            }
            _ => {}
        }
        if n > 0 {
            let rows: Vec<Vec<f64>> = covariance.chunks(n).map(<[f64]>::to_vec).collect();
            let min_eig = hermitian_eigenvalues(&ComplexMatrix::from_real_rows(&rows)?)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -1e-12 {
                return Err(Error::NotPsd(min_eig));
            }
        }
        let factor = cholesky_semidefinite(&covariance, n)?;
        Ok(Self {
            kind,
            mean,
            covariance,
            scale,
            factor,
        })
    }

    /// Fixed offset δλ = mean.
    pub fn deterministic_shift(mean: Vec<f64>) -> Result<Self> {
        let n = mean.len();
        Self::new(NoiseKind::DeterministicShift, mean, vec![0.0; n * n], 1.0)
    }

    pub fn gaussian(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, mean, covariance, 1.0)
    }

    /// Zero-mean, independent Gaussian errors with the given standard deviations.
    pub fn independent_gaussian(std_dev: &[f64]) -> Result<Self> {
        let n = std_dev.len();
        Self::new(NoiseKind::Gaussian, vec![0.0; n], diagonal(std_dev), 1.0)
    }

    /// Independent uniform errors on mean ± √3·σ.
    pub fn uniform(mean: Vec<f64>, std_dev: &[f64]) -> Result<Self> {
        Self::new(NoiseKind::Uniform, mean, diagonal(std_dev), 1.0)
    }

    /// Same model with a different scale multiplier.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "scale must be >= 0, got {scale}"
            )));
        }
        Ok(Self {
            scale,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Effective mean `scale·mean`.
    pub fn effective_mean(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m * self.scale).collect()
    }

    /// True when no error is ever drawn.
    pub fn is_silent(&self) -> bool {
        self.scale == 0.0
            || (self.mean.iter().all(|&m| m == 0.0) && self.covariance.iter().all(|&c| c == 0.0))
    }

    pub fn has_nonzero_mean(&self) -> bool {
        self.scale != 0.0 && self.mean.iter().any(|&m| m != 0.0)
    }

    pub fn has_nonzero_covariance(&self) -> bool {
        self.scale != 0.0 && self.covariance.iter().any(|&c| c != 0.0)
    }

    /// Columns of the covariance factor that are not identically zero.
    fn active_columns(&self) -> Vec<usize> {
        let n = self.dim();
        (0..n)
            .filter(|&c| (0..n).any(|r| self.factor[r * n + c] != 0.0))
            .collect()
    }

    /// One draw of δλ.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        if self.scale == 0.0 {
            return vec![0.0; n];
        }
        let mut out = self.effective_mean();
        match self.kind {
            NoiseKind::DeterministicShift => {}
            NoiseKind::Gaussian => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (r, o) in out.iter_mut().enumerate() {
                    let lz: f64 = (0..=r).map(|c| self.factor[r * n + c] * z[c]).sum();
                    *o += self.scale * lz;
                }
            }
            NoiseKind::Uniform => {
                for (k, o) in out.iter_mut().enumerate() {
                    let half_width = 3.0_f64.sqrt() * self.covariance[k * n + k].sqrt();
                    let u: f64 = rng.random_range(-1.0..1.0);
                    *o += self.scale * half_width * u;
                }
            }
        }
        out
    }
}

fn diagonal(std_dev: &[f64]) -> Vec<f64> {
    let n = std_dev.len();
    let mut cov = vec![0.0; n * n];
    for (k, s) in std_dev.iter().enumerate() {
        cov[k * n + k] = s * s;
    }
    cov
}

/// Cholesky factor L (row-major, lower triangular) with L Lᵀ = C, allowing
/// zero pivots for semidefinite C.
fn cholesky_semidefinite(cov: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let max_diag = (0..n).map(|k| cov[k * n + k]).fold(0.0_f64, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let d = cov[j * n + j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if d > tol {
            let pivot = d.sqrt();
            l[j * n + j] = pivot;
            for i in (j + 1)..n {
                let s = cov[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                l[i * n + j] = s / pivot;
            }
        } else if d >= -tol {
            for i in (j + 1)..n {
                let s = cov[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                if s.abs() > 1e-6 * max_diag {
                    return Err(Error::NotPsd(d));
                }
            }
        } else {
            return Err(Error::NotPsd(d));
        }
    }
    Ok(l)
}

/// (E[δλ], E[δλ δλᵀ]) of the scaled model; the second moment is row-major.
pub fn moments(model: &FluctuationModel) -> (Vec<f64>, Vec<f64>) {
    let n = model.dim();
    let mean = model.effective_mean();
    let s2 = model.scale * model.scale;
    let mut second = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            second[r * n + c] = s2 * model.covariance[r * n + c] + mean[r] * mean[c];
        }
    }
    (mean, second)
}

/// How T̄ is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragingSpec {
    /// Sample mean over `samples` draws split across `shards` seeded streams.
    MonteCarlo {
        samples: usize,
        seed: u64,
        shards: usize,
    },
    /// Tensor-product Gauss–Hermite rule with `order` nodes per active dimension.
    GaussHermite { order: usize },
    /// T(ρ, λ + E[δλ]), exact for channels affine in λ.
    AffineExact,
}

impl AveragingSpec {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        AveragingSpec::MonteCarlo {
            samples,
            seed,
            shards: DEFAULT_SHARDS,
        }
    }

    pub fn gauss_hermite(order: usize) -> Self {
        AveragingSpec::GaussHermite { order }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AveragingSpec::MonteCarlo { .. } => "monte_carlo",
            AveragingSpec::GaussHermite { .. } => "gauss_hermite",
            AveragingSpec::AffineExact => "affine_exact",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, AveragingSpec::MonteCarlo { .. })
    }
}

/// The averaged channel output and its estimator uncertainty.
#[derive(Clone, Debug, PartialEq)]
pub struct Averaged {
    /// T̄ = E[T(ρ, λ + δλ)].
    pub mean: ComplexMatrix,
    /// Max-entry standard error of T̄; zero for deterministic methods.
    pub stderr: f64,
}

/// Checks that `spec` can average `ch` under `model`.
pub fn check_compatible(
    ch: &ParamChannel,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<()> {
    match *spec {
        AveragingSpec::MonteCarlo {
            samples, shards, ..
        } => {
            if samples == 0 {
                return Err(Error::ZeroSamples);
            }
            if shards == 0 {
                return Err(Error::IncompatibleMethod {
                    method: spec.name(),
                    reason: "shard count must be positive".into(),
                });
            }
        }
        AveragingSpec::GaussHermite { order } => {
            if model.kind == NoiseKind::Uniform {
                return Err(Error::IncompatibleMethod {
                    method: spec.name(),
                    reason: "quadrature requires gaussian noise".into(),
                });
            }
            if order == 0 {
                return Err(Error::IncompatibleMethod {
                    method: spec.name(),
                    reason: "order must be positive".into(),
                });
            }
            let nodes = (order as f64).powi(model.active_columns().len() as i32);
            if nodes > MAX_QUADRATURE_NODES as f64 {
                return Err(Error::IncompatibleMethod {
                    method: spec.name(),
                    reason: format!("{nodes} quadrature nodes exceed {MAX_QUADRATURE_NODES}"),
                });
            }
        }
        AveragingSpec::AffineExact => {
            if !ch.affine_in_controls() {
                return Err(Error::IncompatibleMethod {
                    method: spec.name(),
                    reason: format!("{} channel is not affine in its controls", ch.kind().name()),
                });
            }
        }
    }
    if model.dim() != ch.arity() {
        return Err(Error::ArityMismatch {
            expected: ch.arity(),
            got: model.dim(),
        });
    }
    Ok(())
}

/// T̄ = E_δλ[T(ρ, λ + δλ)] and its standard error.
pub fn average_output(
    ch: &ParamChannel,
    rho: &DensityMatrix,
    lambda: &ControlVector,
    model: &FluctuationModel,
    spec: &AveragingSpec,
) -> Result<Averaged> {
    check_compatible(ch, model, spec)?;
    let base = lambda.as_slice();
    let t0 = ch.apply(rho, lambda)?;
    if model.scale == 0.0 {
        return Ok(Averaged {
            mean: t0,
            stderr: 0.0,
        });
    }
    let eval = |delta: &[f64]| -> Result<ComplexMatrix> {
        let shifted: Vec<f64> = base.iter().zip(delta).map(|(a, b)| a + b).collect();
        ch.apply_matrix(rho.matrix(), &shifted)
    };
    match *spec {
        AveragingSpec::AffineExact => Ok(Averaged {
            mean: eval(&model.effective_mean())?,
            stderr: 0.0,
        }),
        AveragingSpec::GaussHermite { order } => gauss_hermite_average(model, order, &t0, eval),
        AveragingSpec::MonteCarlo {
            samples,
            seed,
            shards,
        } => monte_carlo_average(model, samples, seed, shards, &t0, eval),
    }
}

fn gauss_hermite_average<F>(
    model: &FluctuationModel,
    order: usize,
    t0: &ComplexMatrix,
    eval: F,
) -> Result<Averaged>
where
    F: Fn(&[f64]) -> Result<ComplexMatrix> + Sync,
{
    let n = model.dim();
    let active = model.active_columns();
    let (points, weights) = standard_normal_rule(order);
    let shift = model.effective_mean();
    let total: usize = order.pow(active.len() as u32);

    // δλ = scale·mean + scale·L·z over the tensor grid of z
    let node_term = |flat: usize| -> Result<ComplexMatrix> {
        let mut idx = flat;
        let mut delta = shift.clone();
        let mut weight = 1.0;
        for &col in &active {
            let k = idx % order;
            idx /= order;
            weight *= weights[k];
            for (r, d) in delta.iter_mut().enumerate() {
                *d += model.scale * model.factor[r * n + col] * points[k];
            }
        }
        let mut dev = &eval(&delta)? - t0;
        dev = dev.scale_real(weight);
        Ok(dev)
    };

    let chunk = order.max(1);
    let partials: Vec<ComplexMatrix> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|block| {
            let mut acc = ComplexMatrix::zeros(t0.dim());
            for flat in (block * chunk)..((block + 1) * chunk).min(total) {
                acc += &node_term(flat)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut mean = t0.clone();
    for p in &partials {
        mean += p;
    }
    Ok(Averaged {
        mean: mean.hermitian_part(),
        stderr: 0.0,
    })
}

struct ShardSums {
    count: usize,
    /// Σ (T_k − T0), entrywise.
    sum: ComplexMatrix,
    /// Σ of squared real and imaginary parts of (T_k − T0), interleaved.
    sq: Vec<f64>,
}

fn monte_carlo_average<F>(
    model: &FluctuationModel,
    samples: usize,
    seed: u64,
    shards: usize,
    t0: &ComplexMatrix,
    eval: F,
) -> Result<Averaged>
where
    F: Fn(&[f64]) -> Result<ComplexMatrix> + Sync,
{
    let dim = t0.dim();
    let shards = shards.min(samples);
    let per = samples / shards;
    let extra = samples % shards;

    let results: Vec<ShardSums> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let count = per + usize::from(k < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, k as u64));
            let mut sum = ComplexMatrix::zeros(dim);
            let mut sq = vec![0.0; 2 * dim * dim];
            for _ in 0..count {
                let delta = model.sample(&mut rng);
                let dev = &eval(&delta)? - t0;
                for (j, z) in dev.entries().iter().enumerate() {
                    sq[2 * j] += z.re * z.re;
                    sq[2 * j + 1] += z.im * z.im;
                }
                sum += &dev;
            }
            Ok(ShardSums { count, sum, sq })
        })
        .collect::<Result<_>>()?;

    let mut sum = ComplexMatrix::zeros(dim);
    let mut sq = vec![0.0; 2 * dim * dim];
    let mut count = 0;
    for shard in &results {
        count += shard.count;
        sum += &shard.sum;
        for (a, b) in sq.iter_mut().zip(&shard.sq) {
            *a += b;
        }
    }
    let nf = count as f64;
    let mean_dev = sum.scale_real(1.0 / nf);
    let stderr = if count < 2 {
        f64::INFINITY
    } else {
        mean_dev
            .entries()
            .iter()
            .enumerate()
            .flat_map(|(j, z)| [(sq[2 * j], z.re), (sq[2 * j + 1], z.im)])
            .map(|(s, m)| {
                let var = ((s - nf * m * m) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            })
            .fold(0.0, f64::max)
    };
    Ok(Averaged {
        mean: (t0 + &mean_dev).hermitian_part(),
        stderr,
    })
}
