//! Flat key-value experiment configuration.
//!
//! One `key = value` assignment per line, `#` starts a comment. Lists are
//! whitespace separated; complex matrices are row-major `re im` pairs.
//!
//! ```text
//! channel.kind = ion_trap          # ion_trap | depolarizing | unitary_generator | custom
//! state.bloch = 0 0 1
//! controls = 1.0 0.3
//! noise.kind = gaussian            # gaussian | uniform | deterministic_shift
//! noise.std = 1 1
//! averaging.method = gauss_hermite # gauss_hermite | monte_carlo | affine_exact
//! averaging.order = 20
//! sweep = 0.02 0.04 0.06 0.08 0.1
//! output.format = csv
//! ```
//!
//! Full key list:
//!
//! | key | meaning |
//! |-----|---------|
//! | `channel.kind` | channel family |
//! | `channel.p` | depolarizing baseline probabilities (4 values) |
//! | `channel.strict` | reject negative probabilities (`true`/`false`) |
//! | `channel.generator` | unitary_generator Hermitian H as `re im` pairs |
//! | `channel.dim`, `channel.arity` | custom channel shape |
//! | `channel.kraus.K.term.J.powers` | exponents of monomial J of operator K |
//! | `channel.kraus.K.term.J.matrix` | coefficient matrix as `re im` pairs |
//! | `state.bloch` / `state.matrix` | input state |
//! | `controls` | baseline λ (defaults to `channel.p` for depolarizing) |
//! | `noise.kind`, `noise.mean`, `noise.std`, `noise.cov.I.J`, `noise.scale` | error model |
//! | `averaging.method`, `.samples`, `.seed`, `.shards`, `.order` | averaging engine |
//! | `predict.method` | `auto`, `generic` or `closed_form` |
//! | `predict.h1`, `predict.h2` | finite-difference steps |
//! | `sweep` | strictly increasing positive scales |
//! | `output.path`, `output.format` | report destination, `csv` or `json` |

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channels::{ControlVector, KrausTerm, ParamChannel, PolyOperator};
use crate::matcore::{bloch_to_density, ComplexMatrix, DensityMatrix};
use crate::noise::{AveragingSpec, FluctuationModel, NoiseKind, DEFAULT_GH_ORDER, DEFAULT_SHARDS};
use crate::perturb::Steps;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorMethod {
    /// Closed form when the channel family has one, finite differences otherwise.
    Auto,
    Generic,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ParamChannel,
    pub state: DensityMatrix,
    pub controls: ControlVector,
    pub noise: FluctuationModel,
    pub averaging: AveragingSpec,
    pub predictor: PredictorMethod,
    pub steps: Steps,
    pub sweep: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub format: ReportFormat,
}

struct Entry {
    line: usize,
    value: String,
}

struct Table {
    entries: HashMap<String, Entry>,
}

impl Table {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.entries.get(key).map(|e| e.line),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key).map(|e| (e.line, e.value))
    }

    fn required(&mut self, key: &str) -> Result<(usize, String), ConfigError> {
        self.take(key).ok_or_else(|| ConfigError {
            line: None,
            key: key.to_string(),
            message: "missing required key".into(),
        })
    }

    /// Keys under `prefix.` that have not been consumed yet.
    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        let mut keys: Vec<String> = self
            .entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect();
        keys.sort();
        keys
    }
}

fn at(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_scalar<T: FromStr>(
    line: usize,
    key: &str,
    value: &str,
    what: &str,
) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| at(line, key, format!("expected {what}, got `{value}`")))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split_whitespace()
        .map(|tok| {
            let x: f64 = parse_scalar(line, key, tok, "a number")?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(at(line, key, format!("non-finite value `{tok}`")))
            }
        })
        .collect()
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(at(
            line,
            key,
            format!("expected true or false, got `{value}`"),
        )),
    }
}

fn parse_matrix(line: usize, key: &str, value: &str) -> Result<ComplexMatrix, ConfigError> {
    let nums = parse_list(line, key, value)?;
    if nums.len() % 2 != 0 {
        return Err(at(line, key, "expected `re im` pairs"));
    }
    let entries: Vec<Complex64> = nums.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let dim = (entries.len() as f64).sqrt().round() as usize;
    if dim * dim != entries.len() {
        return Err(at(
            line,
            key,
            format!("{} entries do not form a square matrix", entries.len()),
        ));
    }
    ComplexMatrix::new(dim, entries).map_err(|e| at(line, key, e.to_string()))
}

fn split_assignment(raw: &str) -> Option<(&str, &str)> {
    let content = raw.split('#').next().unwrap_or("");
    let (key, value) = content.split_once('=')?;
    Some((key.trim(), value.trim()))
}

/// Parses and validates an experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) =
            split_assignment(raw).ok_or_else(|| at(line, content, "expected `key = value`"))?;
        if key.is_empty() {
            return Err(at(line, "", "empty key"));
        }
        if let Some(prev) = entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        ) {
            return Err(at(
                line,
                key,
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
    }
    let mut table = Table { entries };

    let channel = parse_channel(&mut table)?;
    let state = parse_state(&mut table)?;
    if state.dim() != channel.dim() {
        return Err(ConfigError {
            line: None,
            key: "state".into(),
            message: format!(
                "state dimension {} does not match channel dimension {}",
                state.dim(),
                channel.dim()
            ),
        });
    }
    let controls = match table.take("controls") {
        Some((line, value)) => {
            let v = parse_list(line, "controls", &value)?;
            if v.len() != channel.arity() {
                return Err(at(
                    line,
                    "controls",
                    format!(
                        "arity mismatch: {} values for a channel of arity {}",
                        v.len(),
                        channel.arity()
                    ),
                ));
            }
            ControlVector::new(v).map_err(|e| at(line, "controls", e.to_string()))?
        }
        None => channel.baseline().ok_or_else(|| ConfigError {
            line: None,
            key: "controls".into(),
            message: "missing required key".into(),
        })?,
    };
    let noise = parse_noise(&mut table, channel.arity())?;
    let averaging = parse_averaging(&mut table, &channel, &noise)?;
    let (predictor, steps) = parse_predictor(&mut table)?;

    let (line, value) = table.required("sweep")?;
    let sweep = parse_list(line, "sweep", &value)?;
    if sweep.is_empty() {
        return Err(at(line, "sweep", "must list at least one scale"));
    }
    if let Some(bad) = sweep.iter().find(|&&s| s <= 0.0) {
        return Err(at(line, "sweep", format!("scales must be > 0, got {bad}")));
    }
    if sweep.windows(2).any(|w| w[1] <= w[0]) {
        return Err(at(line, "sweep", "scales must be strictly increasing"));
    }

    let output_path = table.take("output.path").map(|(_, v)| PathBuf::from(v));
    let format = match table.take("output.format") {
        Some((line, v)) => v
            .parse()
            .map_err(|e: String| at(line, "output.format", e))?,
        None => ReportFormat::Csv,
    };

    if let Some(key) = table.keys_with_prefix("").into_iter().next() {
        return Err(table.err(&key, "unknown key"));
    }

    Ok(ExperimentConfig {
        channel,
        state,
        controls,
        noise,
        averaging,
        predictor,
        steps,
        sweep,
        output_path,
        format,
    })
}

fn parse_channel(table: &mut Table) -> Result<ParamChannel, ConfigError> {
    let (line, kind) = table.required("channel.kind")?;
    let strict = match table.take("channel.strict") {
        Some((l, v)) => Some((l, parse_bool(l, "channel.strict", &v)?)),
        None => None,
    };
    let channel = match kind.as_str() {
        "ion_trap" => ParamChannel::ion_trap(),
        "depolarizing" => {
            let (pl, pv) = table.required("channel.p")?;
            let p = parse_list(pl, "channel.p", &pv)?;
            let p: [f64; 4] = p
                .try_into()
                .map_err(|v: Vec<f64>| at(pl, "channel.p", format!("expected 4 probabilities, got {}", v.len())))?;
            ParamChannel::depolarizing_with_mode(p, strict.is_some_and(|s| s.1))
                .map_err(|e| at(pl, "channel.p", e.to_string()))?
        }
        "unitary_generator" => {
            let (gl, gv) = table.required("channel.generator")?;
            let h = parse_matrix(gl, "channel.generator", &gv)?;
            ParamChannel::unitary_generator(h).map_err(|e| at(gl, "channel.generator", e.to_string()))?
        }
        "custom" => parse_custom(table)?,
        other => {
            return Err(at(
                line,
                "channel.kind",
                format!("unknown channel kind `{other}` (expected ion_trap, depolarizing, unitary_generator or custom)"),
            ))
        }
    };
    if let Some((l, _)) = strict {
        if kind != "depolarizing" {
            return Err(at(
                l,
                "channel.strict",
                "only applies to depolarizing channels",
            ));
        }
    }
    Ok(channel)
}

/// Exponents and coefficient of one monomial, filled as keys are read.
type TermSlot = (Option<Vec<u32>>, Option<ComplexMatrix>);

fn parse_custom(table: &mut Table) -> Result<ParamChannel, ConfigError> {
    let (dl, dv) = table.required("channel.dim")?;
    let dim: usize = parse_scalar(dl, "channel.dim", &dv, "a positive integer")?;
    let (al, av) = table.required("channel.arity")?;
    let arity: usize = parse_scalar(al, "channel.arity", &av, "a non-negative integer")?;

    // channel.kraus.K.term.J.{powers,matrix}
    let mut ops: BTreeMap<usize, BTreeMap<usize, TermSlot>> = BTreeMap::new();
    for key in table.keys_with_prefix("channel.kraus.") {
        let (line, value) = table.take(&key).expect("listed key");
        let parts: Vec<&str> = key.split('.').collect();
        let bad = || {
            at(
                line,
                &key,
                "expected channel.kraus.K.term.J.powers or channel.kraus.K.term.J.matrix",
            )
        };
        if parts.len() != 6 || parts[3] != "term" {
            return Err(bad());
        }
        let k: usize = parts[2].parse().map_err(|_| bad())?;
        let j: usize = parts[4].parse().map_err(|_| bad())?;
        let slot = ops.entry(k).or_default().entry(j).or_default();
        match parts[5] {
            "powers" => {
                let powers = value
                    .split_whitespace()
                    .map(|t| parse_scalar::<u32>(line, &key, t, "a non-negative integer exponent"))
                    .collect::<Result<Vec<_>, _>>()?;
                if powers.len() != arity {
                    return Err(at(
                        line,
                        &key,
                        format!("expected {arity} exponents, got {}", powers.len()),
                    ));
                }
                slot.0 = Some(powers);
            }
            "matrix" => {
                let m = parse_matrix(line, &key, &value)?;
                if m.dim() != dim {
                    return Err(at(
                        line,
                        &key,
                        format!("matrix is {0}x{0}, channel.dim is {dim}", m.dim()),
                    ));
                }
                slot.1 = Some(m);
            }
            _ => return Err(bad()),
        }
    }
    if ops.is_empty() {
        return Err(at(
            dl,
            "channel.kraus",
            "custom channel needs at least one Kraus term",
        ));
    }
    let mut operators = Vec::new();
    for (expected_k, (k, terms)) in ops.into_iter().enumerate() {
        if k != expected_k {
            return Err(at(
                dl,
                &format!("channel.kraus.{expected_k}"),
                "Kraus operator indices must be contiguous from 0",
            ));
        }
        let mut poly = Vec::new();
        for (expected_j, (j, (powers, matrix))) in terms.into_iter().enumerate() {
            let key = format!("channel.kraus.{k}.term.{j}");
            if j != expected_j {
                return Err(at(dl, &key, "term indices must be contiguous from 0"));
            }
            let matrix = matrix
                .ok_or_else(|| at(dl, &format!("{key}.matrix"), "missing coefficient matrix"))?;
            poly.push(KrausTerm {
                powers: powers.unwrap_or_else(|| vec![0; arity]),
                coefficient: matrix,
            });
        }
        operators.push(PolyOperator { terms: poly });
    }
    ParamChannel::custom(dim, arity, operators).map_err(|e| at(dl, "channel.kraus", e.to_string()))
}

fn parse_state(table: &mut Table) -> Result<DensityMatrix, ConfigError> {
    match (table.take("state.bloch"), table.take("state.matrix")) {
        (Some((line, _)), Some(_)) => Err(at(
            line,
            "state.bloch",
            "give either state.bloch or state.matrix, not both",
        )),
        (Some((line, v)), None) => {
            let v = parse_list(line, "state.bloch", &v)?;
            let v: [f64; 3] = v.try_into().map_err(|v: Vec<f64>| {
                at(
                    line,
                    "state.bloch",
                    format!("expected 3 components, got {}", v.len()),
                )
            })?;
            bloch_to_density(v).map_err(|e| at(line, "state.bloch", e.to_string()))
        }
        (None, Some((line, v))) => {
            let m = parse_matrix(line, "state.matrix", &v)?;
            DensityMatrix::new(m).map_err(|e| at(line, "state.matrix", e.to_string()))
        }
        (None, None) => Err(ConfigError {
            line: None,
            key: "state".into(),
            message: "missing state.bloch or state.matrix".into(),
        }),
    }
}

fn parse_noise(table: &mut Table, arity: usize) -> Result<FluctuationModel, ConfigError> {
    let (kl, kv) = table.required("noise.kind")?;
    let kind = match kv.as_str() {
        "gaussian" => NoiseKind::Gaussian,
        "uniform" => NoiseKind::Uniform,
        "deterministic_shift" => NoiseKind::DeterministicShift,
        other => return Err(at(
            kl,
            "noise.kind",
            format!(
                "unknown noise kind `{other}` (expected gaussian, uniform or deterministic_shift)"
            ),
        )),
    };
    let mean = match table.take("noise.mean") {
        Some((line, v)) => {
            let m = parse_list(line, "noise.mean", &v)?;
            if m.len() != arity {
                return Err(at(
                    line,
                    "noise.mean",
                    format!(
                        "arity mismatch: {} components for a channel of arity {arity}",
                        m.len()
                    ),
                ));
            }
            m
        }
        None => vec![0.0; arity],
    };
    let mut cov = vec![0.0; arity * arity];
    let mut set = vec![None; arity * arity];
    let mut first_line = None;
    if let Some((line, v)) = table.take("noise.std") {
        let s = parse_list(line, "noise.std", &v)?;
        if s.len() != arity {
            return Err(at(
                line,
                "noise.std",
                format!(
                    "arity mismatch: {} components for a channel of arity {arity}",
                    s.len()
                ),
            ));
        }
        if let Some(neg) = s.iter().find(|&&x| x < 0.0) {
            return Err(at(
                line,
                "noise.std",
                format!("standard deviations must be >= 0, got {neg}"),
            ));
        }
        for (k, x) in s.iter().enumerate() {
            cov[k * arity + k] = x * x;
            set[k * arity + k] = Some(line);
        }
        first_line = Some(line);
    }
    for key in table.keys_with_prefix("noise.cov.") {
        let (line, value) = table.take(&key).expect("listed key");
        let parts: Vec<&str> = key.split('.').collect();
        let bad = || at(line, &key, "expected noise.cov.I.J");
        if parts.len() != 4 {
            return Err(bad());
        }
        let r: usize = parts[2].parse().map_err(|_| bad())?;
        let c: usize = parts[3].parse().map_err(|_| bad())?;
        if r >= arity || c >= arity {
            return Err(at(
                line,
                &key,
                format!("index out of range for arity {arity}"),
            ));
        }
        let x: f64 = parse_scalar(line, &key, &value, "a number")?;
        for (i, j) in [(r, c), (c, r)] {
            if let Some(prev) = set[i * arity + j] {
                if cov[i * arity + j] != x && !(i == j && i == r && prev == line) {
                    return Err(at(
                        line,
                        &key,
                        format!("conflicts with a covariance entry set on line {prev}"),
                    ));
                }
            }
            cov[i * arity + j] = x;
            set[i * arity + j] = Some(line);
        }
        first_line.get_or_insert(line);
    }
    let scale = match table.take("noise.scale") {
        Some((line, v)) => parse_scalar(line, "noise.scale", &v, "a number")?,
        None => 1.0,
    };
    FluctuationModel::new(kind, mean, cov, scale).map_err(|e| ConfigError {
        line: first_line.or(Some(kl)),
        key: "noise".into(),
        message: e.to_string(),
    })
}

fn parse_averaging(
    table: &mut Table,
    channel: &ParamChannel,
    noise: &FluctuationModel,
) -> Result<AveragingSpec, ConfigError> {
    let (ml, mv) = table.required("averaging.method")?;
    let take_usize =
        |table: &mut Table, key: &str| -> Result<Option<(usize, usize)>, ConfigError> {
            match table.take(key) {
                Some((line, v)) => Ok(Some((
                    line,
                    parse_scalar(line, key, &v, "a non-negative integer")?,
                ))),
                None => Ok(None),
            }
        };
    let spec = match mv.as_str() {
        "monte_carlo" => {
            let (sl, samples) = take_usize(table, "averaging.samples")?.ok_or_else(|| {
                at(
                    ml,
                    "averaging.samples",
                    "missing required key for monte_carlo",
                )
            })?;
            if samples < 2 {
                return Err(at(
                    sl,
                    "averaging.samples",
                    "monte_carlo needs at least 2 samples",
                ));
            }
            let seed = match table.take("averaging.seed") {
                Some((line, v)) => {
                    parse_scalar(line, "averaging.seed", &v, "an unsigned 64-bit integer")?
                }
                None => 0,
            };
            let shards = match take_usize(table, "averaging.shards")? {
                Some((line, 0)) => return Err(at(line, "averaging.shards", "must be positive")),
                Some((_, s)) => s,
                None => DEFAULT_SHARDS,
            };
            AveragingSpec::MonteCarlo {
                samples,
                seed,
                shards,
            }
        }
        "gauss_hermite" => {
            let order = match take_usize(table, "averaging.order")? {
                Some((line, 0)) => return Err(at(line, "averaging.order", "must be positive")),
                Some((_, o)) => o,
                None => DEFAULT_GH_ORDER,
            };
            AveragingSpec::GaussHermite { order }
        }
        "affine_exact" => AveragingSpec::AffineExact,
        other => return Err(at(
            ml,
            "averaging.method",
            format!(
                "unknown method `{other}` (expected monte_carlo, gauss_hermite or affine_exact)"
            ),
        )),
    };
    for key in [
        "averaging.samples",
        "averaging.seed",
        "averaging.shards",
        "averaging.order",
    ] {
        if let Some(e) = table.entries.get(key) {
            return Err(at(
                e.line,
                key,
                format!("not used by averaging.method = {mv}"),
            ));
        }
    }
    crate::noise::check_compatible(channel, noise, &spec)
        .map_err(|e| at(ml, "averaging.method", e.to_string()))?;
    Ok(spec)
}

fn parse_predictor(table: &mut Table) -> Result<(PredictorMethod, Steps), ConfigError> {
    let method = match table.take("predict.method") {
        Some((line, v)) => match v.as_str() {
            "auto" => PredictorMethod::Auto,
            "generic" => PredictorMethod::Generic,
            "closed_form" => PredictorMethod::ClosedForm,
            other => {
                return Err(at(
                    line,
                    "predict.method",
                    format!("unknown predictor `{other}` (expected auto, generic or closed_form)"),
                ))
            }
        },
        None => PredictorMethod::Auto,
    };
    let mut steps = Steps::default();
    for (key, slot) in [
        ("predict.h1", &mut steps.first),
        ("predict.h2", &mut steps.second),
    ] {
        if let Some((line, v)) = table.take(key) {
            let h: f64 = parse_scalar(line, key, &v, "a number")?;
            if !(h.is_finite() && h > 0.0) {
                return Err(at(line, key, "step must be > 0"));
            }
            *slot = h;
        }
    }
    Ok((method, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
channel.kind = depolarizing
channel.p = 1 0 0 0
state.bloch = 0 0 1
noise.kind = deterministic_shift
noise.mean = -0.1 0.1 0 0
averaging.method = affine_exact
sweep = 0.1
";

    #[test]
    fn minimal_config_accepted() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.controls.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cfg.sweep, vec![0.1]);
        assert_eq!(cfg.format, ReportFormat::Csv);
        assert_eq!(cfg.averaging, AveragingSpec::AffineExact);
        assert_eq!(cfg.predictor, PredictorMethod::Auto);
    }

    #[test]
    fn sweep_must_increase() {
        let text = MINIMAL.replace("sweep = 0.1", "sweep = 0.1 0.1");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.key, "sweep");
        assert_eq!(err.line, Some(7));
        assert!(err.message.contains("strictly increasing"));
    }

    #[test]
    fn sweep_rejects_zero_scale() {
        let text = MINIMAL.replace("sweep = 0.1", "sweep = 0 0.1");
        let err = parse_config(&text).unwrap_err();
        assert!(err.message.contains("> 0"), "{err}");
    }

    #[test]
    fn ion_trap_arity_mismatch() {
        let text = "\
channel.kind = ion_trap
state.bloch = 0 0 1
controls = 1.0 0.3
noise.kind = gaussian
noise.mean = 0 0 0 0
averaging.method = gauss_hermite
sweep = 0.1
";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.key, "noise.mean");
        assert_eq!(err.line, Some(5));
        assert!(err.message.contains("arity mismatch"));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = parse_config(&format!("{MINIMAL}noise.colour = pink\n")).unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("noise.colour", Some(8)));
        assert!(err.message.contains("unknown key"));
        let err = parse_config(&format!("{MINIMAL}sweep = 0.2\n")).unwrap_err();
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn type_errors_carry_context() {
        let text = MINIMAL.replace("channel.p = 1 0 0 0", "channel.p = 1 zero 0 0");
        let err = parse_config(&text).unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("channel.p", Some(2)));
        let text = MINIMAL.replace("affine_exact", "trapezoid");
        assert!(parse_config(&text)
            .unwrap_err()
            .message
            .contains("unknown method"));
        let err = parse_config("channel.kind ion_trap\n").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn incompatible_method_rejected() {
        let text = "\
channel.kind = ion_trap
state.bloch = 0 0 1
controls = 1.0 0.3
noise.kind = gaussian
noise.std = 1 1
averaging.method = affine_exact
sweep = 0.1
";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.key, "averaging.method");
        assert!(err.message.contains("not affine"));
    }

    #[test]
    fn covariance_entries_mirror() {
        let text = "\
channel.kind = ion_trap
state.bloch = 0 0 1
controls = 1.0 0.3
noise.kind = gaussian
noise.cov.0.0 = 1
noise.cov.0.1 = 0.25
noise.cov.1.1 = 0.5
averaging.method = monte_carlo
averaging.samples = 1000
averaging.seed = 7
sweep = 0.01 0.02 0.03
output.format = json
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.noise.covariance(), &[1.0, 0.25, 0.25, 0.5]);
        assert_eq!(cfg.format, ReportFormat::Json);
        assert_eq!(
            cfg.averaging,
            AveragingSpec::MonteCarlo {
                samples: 1000,
                seed: 7,
                shards: DEFAULT_SHARDS
            }
        );
        let conflicting = text.replace(
            "noise.cov.1.1 = 0.5",
            "noise.cov.1.1 = 0.5\nnoise.cov.1.0 = 0.3",
        );
        assert!(parse_config(&conflicting)
            .unwrap_err()
            .message
            .contains("conflicts"));
    }

    #[test]
    fn custom_channel_config() {
        let text = "\
channel.kind = custom
channel.dim = 2
channel.arity = 1
# identity plus a vanishing linear term
channel.kraus.0.term.0.matrix = 1 0 0 0 0 0 1 0
channel.kraus.0.term.1.powers = 1
channel.kraus.0.term.1.matrix = 0 0 0 0 0 0 0 0
state.matrix = 0.5 0 0 0 0 0 0.5 0
controls = 0.2
noise.kind = gaussian
noise.std = 0.1
averaging.method = gauss_hermite
averaging.order = 8
sweep = 0.5 1
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.channel.arity(), 1);
        let gapped = text.replace("channel.kraus.0.term.1", "channel.kraus.0.term.2");
        assert!(parse_config(&gapped)
            .unwrap_err()
            .message
            .contains("contiguous"));
    }

    #[test]
    fn unused_averaging_keys_rejected() {
        let text = MINIMAL.replace(
            "averaging.method = affine_exact",
            "averaging.method = affine_exact\naveraging.order = 20",
        );
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.key, "averaging.order");
    }
}
