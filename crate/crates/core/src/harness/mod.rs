//! Sweeps over noise scale, report serialization and slope fits.

mod config;
mod slope;

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

pub use config::{parse_config, ConfigError, ExperimentConfig, PredictorMethod, ReportFormat};
pub use slope::{fit_slope, fit_slope_with_floors, SlopeError, SlopeFit};

use crate::channels::ChannelKind;
use crate::error::Error;
use crate::metrics::evaluate_full;
use crate::noise::{AveragingSpec, FluctuationModel};
use crate::perturb::{depolarizing_predict, ion_trap_predict, predict, PredictorOutput};

/// Identity violations above this (plus 5 combined standard errors for
/// Monte Carlo rows) abort the run.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Slope floor for deterministic averaging.
pub const DETERMINISTIC_FLOOR: f64 = 1e-13;

pub const COLUMNS: [&str; 12] = [
    "scale",
    "p0",
    "p",
    "f",
    "residual",
    "stderr_p",
    "stderr_f",
    "trace_defect",
    "p_pred",
    "f_pred",
    "pred_defect_p",
    "pred_defect_f",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scale: f64,
    pub p0: f64,
    pub p: f64,
    pub f: f64,
    pub residual: f64,
    pub stderr_p: f64,
    pub stderr_f: f64,
    pub trace_defect: f64,
    pub p_pred: f64,
    pub f_pred: f64,
    pub pred_defect_p: f64,
    pub pred_defect_f: f64,
}

impl SweepRow {
    pub fn values(&self) -> [f64; 12] {
        [
            self.scale,
            self.p0,
            self.p,
            self.f,
            self.residual,
            self.stderr_p,
            self.stderr_f,
            self.trace_defect,
            self.p_pred,
            self.f_pred,
            self.pred_defect_p,
            self.pred_defect_f,
        ]
    }

    fn from_values(v: [f64; 12]) -> Self {
        Self {
            scale: v[0],
            p0: v[1],
            p: v[2],
            f: v[3],
            residual: v[4],
            stderr_p: v[5],
            stderr_f: v[6],
            trace_defect: v[7],
            p_pred: v[8],
            f_pred: v[9],
            pred_defect_p: v[10],
            pred_defect_f: v[11],
        }
    }

    /// Values below this are treated as noise when fitting slopes.
    pub fn noise_floor(&self) -> f64 {
        let se = self.stderr_p + self.stderr_f;
        if se > 0.0 {
            100.0 * se
        } else {
            DETERMINISTIC_FLOOR
        }
    }
}

/// Log-log slopes of the sweep quantities against scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeSummary {
    /// |f − (p + p0)/2|.
    pub residual: Result<SlopeFit, SlopeError>,
    /// p0 − p.
    pub purity_loss: Result<SlopeFit, SlopeError>,
    pub pred_defect_p: Result<SlopeFit, SlopeError>,
    pub pred_defect_f: Result<SlopeFit, SlopeError>,
}

impl SlopeSummary {
    pub fn from_rows(rows: &[SweepRow]) -> Self {
        let fit = |y: fn(&SweepRow) -> f64| {
            let pts: Vec<_> = rows
                .iter()
                .map(|r| (r.scale, y(r), r.noise_floor()))
                .collect();
            fit_slope_with_floors(&pts)
        };
        Self {
            residual: fit(|r| r.residual),
            purity_loss: fit(|r| r.p0 - r.p),
            pred_defect_p: fit(|r| r.pred_defect_p),
            pred_defect_f: fit(|r| r.pred_defect_f),
        }
    }

    pub fn entries(&self) -> [(&'static str, &Result<SlopeFit, SlopeError>); 4] {
        [
            ("residual", &self.residual),
            ("purity_loss", &self.purity_loss),
            ("pred_defect_p", &self.pred_defect_p),
            ("pred_defect_f", &self.pred_defect_f),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub channel: &'static str,
    pub noise: &'static str,
    pub averaging: &'static str,
    pub rows: Vec<SweepRow>,
    pub slopes: SlopeSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    Numerical {
        scale: f64,
        source: Error,
    },
    IdentityViolation {
        scale: f64,
        gap: f64,
        tolerance: f64,
    },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Numerical { scale, source } => write!(f, "at scale {scale}: {source}"),
            RunError::IdentityViolation {
                scale,
                gap,
                tolerance,
            } => write!(
                f,
                "at scale {scale}: residual identity violated by {gap:e} (tolerance {tolerance:e})"
            ),
        }
    }
}

impl std::error::Error for RunError {}

fn predictor(cfg: &ExperimentConfig, model: &FluctuationModel) -> crate::Result<PredictorOutput> {
    let lambda = cfg.controls.as_slice();
    let closed = match (cfg.predictor, cfg.channel.kind()) {
        (PredictorMethod::Generic, _) => None,
        (_, ChannelKind::IonTrap) if !model.has_nonzero_mean() => {
            Some(ion_trap_predict(&cfg.state, lambda[0], lambda[1], model))
        }
        (_, ChannelKind::Depolarizing { .. }) => {
            let m = model.effective_mean();
            let p = [lambda[0], lambda[1], lambda[2], lambda[3]];
            Some(depolarizing_predict(
                &cfg.state,
                p,
                [m[0], m[1], m[2], m[3]],
            ))
        }
        (PredictorMethod::ClosedForm, kind) => {
            return Err(Error::IncompatibleMethod {
                method: "closed_form",
                reason: format!("no closed form for {} under this noise model", kind.name()),
            })
        }
        _ => None,
    };
    match closed {
        Some(out) => out,
        None => predict(&cfg.channel, &cfg.state, &cfg.controls, model, cfg.steps),
    }
}

fn run_row(cfg: &ExperimentConfig, s: f64) -> Result<SweepRow, RunError> {
    let numerical = |source| RunError::Numerical { scale: s, source };
    let model = cfg
        .noise
        .with_scale(cfg.noise.scale() * s)
        .map_err(numerical)?;
    let eval = evaluate_full(
        &cfg.channel,
        &cfg.state,
        &cfg.controls,
        &model,
        &cfg.averaging,
    )
    .map_err(numerical)?;
    let r = eval.report;
    let gap = r.identity_gap();
    let tolerance = IDENTITY_TOL + 5.0 * (r.stderr_p + r.stderr_f);
    if gap.is_nan() || gap > tolerance {
        return Err(RunError::IdentityViolation {
            scale: s,
            gap,
            tolerance,
        });
    }
    let pred = predictor(cfg, &model).map_err(numerical)?;
    Ok(SweepRow {
        scale: s,
        p0: r.p0,
        p: r.p,
        f: r.f,
        residual: r.residual,
        stderr_p: r.stderr_p,
        stderr_f: r.stderr_f,
        trace_defect: r.trace_defect,
        p_pred: pred.p_pred,
        f_pred: pred.f_pred,
        pred_defect_p: (r.p - pred.p_pred).abs(),
        pred_defect_f: (r.f - pred.f_pred).abs(),
    })
}

/// Evaluates every sweep point. The effective noise scale at point `s` is
/// `noise.scale · s`. Rows are computed in parallel and returned in sweep order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, RunError> {
    let rows = cfg
        .sweep
        .par_iter()
        .map(|&s| run_row(cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    let slopes = SlopeSummary::from_rows(&rows);
    Ok(SweepReport {
        channel: cfg.channel.kind().name(),
        noise: cfg.noise.kind().name(),
        averaging: cfg.averaging.name(),
        rows,
        slopes,
    })
}

/// Replaces the Monte Carlo seed; no effect on deterministic methods.
pub fn override_seed(cfg: &mut ExperimentConfig, seed: u64) {
    if let AveragingSpec::MonteCarlo { seed: s, .. } = &mut cfg.averaging {
        *s = seed;
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn slope_line(name: &str, fit: &Result<SlopeFit, SlopeError>) -> String {
    match fit {
        Ok(fit) => format!(
            "# slope {name} = {} intercept = {} r2 = {} points = {}",
            num(fit.slope),
            num(fit.intercept),
            num(fit.r2),
            fit.used
        ),
        Err(e) => format!("# slope {name} = NA ({e})"),
    }
}

impl SweepReport {
    /// CSV body with slope fits appended as `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.values().iter().map(|&x| num(x)))
                .expect("in-memory write");
        }
        let mut out =
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output");
        for (name, fit) in self.slopes.entries() {
            out.push_str(&slope_line(name, fit));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let quoted: Vec<String> = COLUMNS.iter().map(|c| format!("\"{c}\"")).collect();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"channel\": \"{}\",", self.channel);
        let _ = writeln!(out, "  \"noise\": \"{}\",", self.noise);
        let _ = writeln!(out, "  \"averaging\": \"{}\",", self.averaging);
        let _ = writeln!(out, "  \"columns\": [{}],", quoted.join(", "));
        let _ = writeln!(out, "  \"rows\": [");
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = COLUMNS
                .iter()
                .zip(row.values())
                .map(|(c, v)| format!("\"{c}\": {}", num(v)))
                .collect();
            let sep = if i + 1 < self.rows.len() { "," } else { "" };
            let _ = writeln!(out, "    {{{}}}{sep}", fields.join(", "));
        }
        let _ = writeln!(out, "  ],");
        let _ = writeln!(out, "  \"slopes\": {{");
        let entries = self.slopes.entries();
        for (i, (name, fit)) in entries.iter().enumerate() {
            let value = match fit {
                Ok(fit) => format!(
                    "{{\"slope\": {}, \"intercept\": {}, \"r2\": {}, \"points\": {}}}",
                    num(fit.slope),
                    num(fit.intercept),
                    num(fit.r2),
                    fit.used
                ),
                Err(_) => "null".to_string(),
            };
            let sep = if i + 1 < entries.len() { "," } else { "" };
            let _ = writeln!(out, "    \"{name}\": {value}{sep}");
        }
        let _ = writeln!(out, "  }}");
        let _ = writeln!(out, "}}");
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

/// Reads the rows back from a CSV report; comment lines are skipped.
pub fn read_csv_rows(text: &str) -> Result<Vec<SweepRow>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let index: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| format!("missing column `{c}`"))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let mut v = [0.0; 12];
        for (slot, &i) in v.iter_mut().zip(&index) {
            let field = record
                .get(i)
                .ok_or_else(|| format!("row {}: short record", n + 1))?;
            *slot = field.parse().map_err(|_| {
                format!(
                    "row {}: column `{}`: bad number `{field}`",
                    n + 1,
                    COLUMNS[i]
                )
            })?;
        }
        rows.push(SweepRow::from_values(v));
    }
    Ok(rows)
}
