//! Command-line front end. Every command reads a JSON payload, writes JSON
//! and CSV files into the output directory and reports through its exit code:
//! 0 ok, 1 violated or not passed, 2 invalid input, 3 divergence or no
//! convergence, 4 every family member failed.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embeddings::{
    counterexample_case1, counterexample_case2, default_experiment, default_family, estimate_constant, run_embedding,
    EmbeddingExperiment, EmbeddingReport,
};
use crate::error::{Direction, HerzError};
use crate::funclib::{pow2, DomainSpec, FunctionSpec, SampledGrid};
use crate::norms::{
    gradient_herz_norm, hardy_bound_check, herz_norm, herz_sobolev_norm, weighted_lp_norm, NormResult, SobolevMode,
    TruncationPolicy,
};
use crate::operators::{dyadic_project, sample_operator, OperatorKind};
use crate::params::{check_hypotheses, Exponent, HerzParams, ParamBundle, SobolevParams, TheoremId};
use crate::quadrature::QuadratureOptions;
use crate::serde_ext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Violated = 1,
    Invalid = 2,
    Diverged = 3,
    AllFailed = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// A command failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Display) -> Self {
        CliError {
            status: ExitStatus::Invalid,
            message: message.to_string(),
        }
    }
}

impl From<HerzError> for CliError {
    fn from(e: HerzError) -> Self {
        let status = match e {
            HerzError::Divergence { .. }
            | HerzError::DivergentTail(_)
            | HerzError::NonIntegrable(_)
            | HerzError::Quadrature(_) => ExitStatus::Diverged,
            HerzError::RegimeViolation(_) => ExitStatus::Violated,
            _ => ExitStatus::Invalid,
        };
        CliError {
            status,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "herzkit", version, about = "Herz-space norms, operators and embedding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON payload for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized corpora.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HERZKIT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Herz, Herz–Sobolev, gradient or weighted norm of one function.
    Norm,
    /// Hypotheses of one theorem for one parameter set.
    Check,
    /// Apply an operator at points, on a grid, or as a dyadic projection.
    Operator,
    /// Run an embedding experiment.
    Embed {
        /// Evaluate despite failed hypotheses; the report is watermarked.
        #[arg(long)]
        #[serde(default)]
        override_hypotheses: bool,
    },
    /// Tables of the local-integrability counterexamples.
    Counterexample,
    /// Empirical constants over default experiments and a Hardy-inequality fuzz.
    Report,
    /// Read the command, payload, seed and output directory from one file.
    Run,
}

/// A complete invocation stored in a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub payload: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn parse<T: for<'de> Deserialize<'de>>(payload: &Value) -> CliResult<T> {
    serde_json::from_value(payload.clone()).map_err(|e| CliError::invalid(format!("invalid payload: {e}")))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::invalid)?;
    text.push('\n');
    fs::write(dir.join(name), text).map_err(|e| CliError::invalid(format!("cannot write {name}: {e}")))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::invalid(format!("cannot write {name}: {e}"));
    let mut w = csv::Writer::from_path(dir.join(name)).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::invalid(format!("cannot write {name}: {e}")))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedRequest {
    pub alpha: f64,
    pub p: Exponent,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientRequest {
    pub alpha: f64,
    pub p: Exponent,
    pub r: Exponent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormPayload {
    pub function: FunctionSpec,
    #[serde(default)]
    pub herz: Option<HerzParams>,
    #[serde(default)]
    pub sobolev: Option<SobolevParams>,
    #[serde(default)]
    pub gradient: Option<GradientRequest>,
    #[serde(default)]
    pub weighted: Option<WeightedRequest>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub sobolev_mode: SobolevMode,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceInfo {
    pub direction: Direction,
    pub partial: NormResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormOutput {
    pub kind: String,
    #[serde(with = "serde_ext")]
    pub value: f64,
    pub converged: bool,
    pub result: Option<NormResult>,
    pub divergence: Option<DivergenceInfo>,
}

pub fn cmd_norm(payload: &Value, out: &Path) -> CliResult<ExitStatus> {
    let req: NormPayload = parse(payload)?;
    let n = req.function.dim();
    let omega = req.domain.clone().unwrap_or_else(|| DomainSpec::full(n));
    let chosen = [
        req.herz.is_some(),
        req.sobolev.is_some(),
        req.gradient.is_some(),
        req.weighted.is_some(),
    ];
    if chosen.iter().filter(|c| **c).count() != 1 {
        return Err(CliError::invalid(
            "exactly one of `herz`, `sobolev`, `gradient`, `weighted` must be given",
        ));
    }
    let (trunc, opts) = (&req.truncation, &req.quadrature);
    let (kind, outcome) = if let Some(hp) = &req.herz {
        ("herz", herz_norm(&req.function, hp, &omega, trunc, opts))
    } else if let Some(sp) = &req.sobolev {
        (
            "herz_sobolev",
            herz_sobolev_norm(&req.function, sp, &omega, req.sobolev_mode, trunc, opts),
        )
    } else if let Some(g) = &req.gradient {
        ("gradient_herz", gradient_herz_norm(&req.function, g.alpha, g.p, g.r, &omega, trunc, opts))
    } else {
        let w = req.weighted.expect("one request kind is set");
        let v = weighted_lp_norm(&req.function, w.alpha, w.p, &omega, trunc, opts)?;
        let output = NormOutput {
            kind: "weighted_lp".into(),
            value: v,
            converged: true,
            result: None,
            divergence: None,
        };
        write_json(out, "norm.json", &output)?;
        write_csv(out, "terms.csv", &["k", "term"], &[])?;
        return Ok(ExitStatus::Ok);
    };
    let (output, status) = match outcome {
        Ok(r) => {
            let status = if r.converged {
                ExitStatus::Ok
            } else {
                ExitStatus::Diverged
            };
            (
                NormOutput {
                    kind: kind.into(),
                    value: r.value,
                    converged: r.converged,
                    result: Some(r),
                    divergence: None,
                },
                status,
            )
        }
        Err(HerzError::Divergence { direction, partial }) => (
            NormOutput {
                kind: kind.into(),
                value: partial.value,
                converged: false,
                result: None,
                divergence: Some(DivergenceInfo {
                    direction,
                    partial: *partial,
                }),
            },
            ExitStatus::Diverged,
        ),
        Err(e) => return Err(e.into()),
    };
    let terms = output
        .result
        .as_ref()
        .or(output.divergence.as_ref().map(|d| &d.partial))
        .map(|r| {
            r.terms
                .iter()
                .map(|t| vec![t.k.to_string(), real(t.term)])
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    write_json(out, "norm.json", &output)?;
    write_csv(out, "terms.csv", &["k", "term"], &terms)?;
    Ok(status)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckPayload {
    pub theorem: TheoremId,
    pub params: ParamBundle,
}

pub fn cmd_check(payload: &Value, out: &Path) -> CliResult<ExitStatus> {
    let req: CheckPayload = parse(payload)?;
    let report = check_hypotheses(req.theorem, &req.params)?;
    write_json(out, "hypotheses.json", &report)?;
    Ok(if report.ok {
        ExitStatus::Ok
    } else {
        ExitStatus::Violated
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorRequest {
    Mollify { epsilon: f64 },
    Maximal,
    FracMaximal { t: f64 },
    Riesz { lambda: f64 },
    DyadicProject { j: i32, region: DomainSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRequest {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorPayload {
    pub function: FunctionSpec,
    pub operator: OperatorRequest,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub grid: Option<GridRequest>,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointValue {
    pub x: Vec<f64>,
    #[serde(with = "serde_ext")]
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorOutput {
    pub operator: OperatorRequest,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<SampledGrid>,
}

fn grid_rows(g: &SampledGrid) -> Vec<Vec<String>> {
    let n = g.n;
    let offset = match g.layout {
        crate::funclib::GridLayout::Cell => 0.5,
        crate::funclib::GridLayout::Nodal => 0.0,
    };
    g.values
        .iter()
        .enumerate()
        .map(|(flat, v)| {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                let i = rem % g.shape[a];
                rem /= g.shape[a];
                x[a] = g.origin[a] + (i as f64 + offset) * g.spacing;
            }
            x.into_iter().map(real).chain([real(*v)]).collect()
        })
        .collect()
}

pub fn cmd_operator(payload: &Value, out: &Path) -> CliResult<ExitStatus> {
    let req: OperatorPayload = parse(payload)?;
    req.function.validate()?;
    let n = req.function.dim();
    let opts = &req.quadrature;
    let op = match &req.operator {
        OperatorRequest::Mollify { epsilon } => Some(OperatorKind::Mollify { epsilon: *epsilon }),
        OperatorRequest::Maximal => Some(OperatorKind::Maximal),
        OperatorRequest::FracMaximal { t } => Some(OperatorKind::FracMaximal { t: *t }),
        OperatorRequest::Riesz { lambda } => Some(OperatorKind::Riesz { lambda: *lambda }),
        OperatorRequest::DyadicProject { .. } => None,
    };
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let output = match (op, &req.operator) {
        (None, OperatorRequest::DyadicProject { j, region }) => {
            if req.points.is_some() || req.grid.is_some() {
                return Err(CliError::invalid("dyadic_project takes neither `points` nor `grid`"));
            }
            let g = dyadic_project(&req.function, *j, region)?;
            write_csv(out, "operator.csv", &header, &grid_rows(&g))?;
            OperatorOutput {
                operator: req.operator.clone(),
                points: Vec::new(),
                grid: Some(g),
            }
        }
        (Some(op), _) => match (&req.points, &req.grid) {
            (Some(points), None) => {
                let mut values = Vec::with_capacity(points.len());
                for x in points {
                    values.push(PointValue {
                        x: x.clone(),
                        value: op.apply(&req.function, x, opts)?,
                    });
                }
                let rows: Vec<Vec<String>> = values
                    .iter()
                    .map(|p| p.x.iter().copied().map(real).chain([real(p.value)]).collect())
                    .collect();
                write_csv(out, "operator.csv", &header, &rows)?;
                OperatorOutput {
                    operator: req.operator.clone(),
                    points: values,
                    grid: None,
                }
            }
            (None, Some(g)) => {
                let grid = sample_operator(&op, &req.function, g.origin.clone(), g.spacing, g.shape.clone(), opts)?;
                write_csv(out, "operator.csv", &header, &grid_rows(&grid))?;
                OperatorOutput {
                    operator: req.operator.clone(),
                    points: Vec::new(),
                    grid: Some(grid),
                }
            }
            _ => return Err(CliError::invalid("exactly one of `points` or `grid` must be given")),
        },
        (None, _) => unreachable!("only dyadic_project has no pointwise form"),
    };
    write_json(out, "operator.json", &output)?;
    Ok(ExitStatus::Ok)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedPayload {
    pub theorem: TheoremId,
    #[serde(default)]
    pub params: Option<ParamBundle>,
    #[serde(default)]
    pub family: Option<Vec<FunctionSpec>>,
    #[serde(default)]
    pub dilation_levels: Option<Vec<i32>>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub sobolev_mode: Option<SobolevMode>,
    #[serde(default)]
    pub override_hypotheses: bool,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
}

impl EmbedPayload {
    /// The default experiment for the theorem with the given fields replaced.
    /// Parameters of another dimension also switch to that dimension's family.
    pub fn experiment(&self, default_levels: Vec<i32>) -> crate::Result<EmbeddingExperiment> {
        let levels = self.dilation_levels.clone().unwrap_or(default_levels);
        let mut exp = default_experiment(self.theorem, levels);
        if let Some(p) = &self.params {
            exp.params = p.clone();
            let n = p.n()?;
            if exp.family.first().map(|f| f.dim()) != Some(n) {
                exp.family = default_family(n);
                exp.domain = DomainSpec::full(n);
            }
        }
        if let Some(f) = &self.family {
            exp.family = f.clone();
        }
        if let Some(d) = &self.domain {
            exp.domain = d.clone();
        }
        if let Some(m) = self.sobolev_mode {
            exp.sobolev_mode = m;
        }
        exp.override_hypotheses = self.override_hypotheses;
        Ok(exp)
    }
}

fn embed_report(req: &EmbedPayload, override_flag: bool) -> CliResult<EmbeddingReport> {
    let mut exp = req.experiment((-3..=3).collect())?;
    exp.override_hypotheses |= override_flag;
    Ok(run_embedding(&exp, &req.truncation, &req.quadrature)?)
}

pub fn cmd_embed(payload: &Value, out: &Path, override_flag: bool) -> CliResult<ExitStatus> {
    let req: EmbedPayload = parse(payload)?;
    let report = embed_report(&req, override_flag)?;
    write_json(out, "report.json", &report)?;
    let rows: Vec<Vec<String>> = report
        .per_function
        .iter()
        .map(|r| vec![r.index.to_string(), r.m.to_string(), real(r.lhs), real(r.rhs), real(r.ratio)])
        .collect();
    write_csv(out, "ratios.csv", &["index", "m", "lhs", "rhs", "ratio"], &rows)?;
    let gap = report.scaling_exponent_lhs - report.scaling_exponent_rhs;
    let mut scaling = Vec::new();
    for r in &report.per_function {
        let first = report
            .per_function
            .iter()
            .find(|s| s.index == r.index)
            .expect("row belongs to its own member");
        scaling.push(vec![
            r.index.to_string(),
            r.m.to_string(),
            real(r.ratio / first.ratio),
            real(pow2(0) * 2f64.powf(-(r.m - first.m) as f64 * gap)),
        ]);
    }
    write_csv(out, "scaling.csv", &["index", "m", "relative_ratio", "predicted"], &scaling)?;
    Ok(if report.per_function.is_empty() {
        ExitStatus::AllFailed
    } else if report.pass {
        ExitStatus::Ok
    } else {
        ExitStatus::Violated
    })
}

fn default_eps_list() -> Vec<f64> {
    (1..=40).map(|k| pow2(-k)).collect()
}

fn default_big_k() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum CounterexamplePayload {
    Case1 {
        r: f64,
        herz: HerzParams,
        #[serde(default = "default_eps_list")]
        eps_list: Vec<f64>,
        #[serde(default)]
        truncation: TruncationPolicy,
        #[serde(default)]
        quadrature: QuadratureOptions,
    },
    Case2 {
        herz: HerzParams,
        #[serde(default = "default_big_k")]
        big_k: usize,
        #[serde(default)]
        quadrature: QuadratureOptions,
    },
}

pub fn cmd_counterexample(payload: &Value, out: &Path) -> CliResult<ExitStatus> {
    match parse::<CounterexamplePayload>(payload)? {
        CounterexamplePayload::Case1 {
            r,
            herz,
            eps_list,
            truncation,
            quadrature,
        } => {
            let rows = counterexample_case1(r, &herz, &eps_list, &truncation, &quadrature)?;
            write_json(out, "table.json", &rows)?;
            let csv: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![real(r.eps), real(r.l1_mass), real(r.herz_norm), real(r.herz_increment)])
                .collect();
            write_csv(out, "table.csv", &["eps", "l1_mass", "herz_norm", "herz_increment"], &csv)?;
        }
        CounterexamplePayload::Case2 { herz, big_k, quadrature } => {
            let table = counterexample_case2(&herz, big_k, &quadrature)?;
            write_json(out, "table.json", &table)?;
            let csv: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.big_k.to_string(),
                        real(r.herz_term),
                        real(r.herz_partial),
                        real(r.herz_lower),
                        real(r.herz_upper),
                        real(r.tail_bound),
                        real(r.l1_mass),
                        real(r.l1_partial),
                    ]
                })
                .collect();
            write_csv(
                out,
                "table.csv",
                &[
                    "big_k",
                    "herz_term",
                    "herz_partial",
                    "herz_lower",
                    "herz_upper",
                    "tail_bound",
                    "l1_mass",
                    "l1_partial",
                ],
                &csv,
            )?;
        }
    }
    Ok(ExitStatus::Ok)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyFuzz {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_a_values")]
    pub a_values: Vec<f64>,
    #[serde(default = "default_q_values")]
    pub q_values: Vec<Exponent>,
}

fn default_trials() -> usize {
    1000
}

fn default_length() -> usize {
    24
}

fn default_a_values() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn default_q_values() -> Vec<Exponent> {
    vec![
        Exponent::Finite(0.5),
        Exponent::ONE,
        Exponent::Finite(2.0),
        Exponent::INFINITY,
    ]
}

impl Default for HardyFuzz {
    fn default() -> Self {
        HardyFuzz {
            trials: default_trials(),
            length: default_length(),
            a_values: default_a_values(),
            q_values: default_q_values(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyRow {
    pub trial: usize,
    pub a: f64,
    pub q: Exponent,
    #[serde(with = "serde_ext")]
    pub lhs: f64,
    #[serde(with = "serde_ext")]
    pub rhs_bound: f64,
    pub ok: bool,
}

/// Random non-negative sequences with a mix of sizes and zero runs.
pub fn hardy_fuzz(cfg: &HardyFuzz, seed: u64) -> CliResult<Vec<HardyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cfg.trials * cfg.a_values.len() * cfg.q_values.len());
    for trial in 0..cfg.trials {
        let len = rng.gen_range(1..=cfg.length.max(1));
        let eps: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen::<f64>() * 10f64.powi(rng.gen_range(-3..=3))
                }
            })
            .collect();
        for &a in &cfg.a_values {
            for &q in &cfg.q_values {
                let c = hardy_bound_check(&eps, a, q)?;
                rows.push(HardyRow {
                    trial,
                    a,
                    q,
                    lhs: c.lhs,
                    rhs_bound: c.rhs_bound,
                    ok: c.ok,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportPayload {
    #[serde(default)]
    pub theorems: Option<Vec<TheoremId>>,
    #[serde(default)]
    pub dilation_levels: Option<Vec<i32>>,
    #[serde(default)]
    pub hardy: HardyFuzz,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportOutput {
    pub constants: Vec<crate::embeddings::ConstantRow>,
    pub passed: Vec<(TheoremId, bool)>,
    pub hardy_checks: usize,
    pub hardy_failures: usize,
}

pub fn cmd_report(payload: &Value, out: &Path, seed: u64) -> CliResult<ExitStatus> {
    let req: ReportPayload = parse(payload)?;
    let theorems = req
        .theorems
        .clone()
        .unwrap_or_else(|| TheoremId::ALL.iter().copied().filter(|t| *t != TheoremId::L1loc).collect());
    let mut reports = Vec::new();
    for thm in theorems {
        let embed = EmbedPayload {
            theorem: thm,
            params: None,
            family: None,
            dilation_levels: Some(req.dilation_levels.clone().unwrap_or_else(|| vec![-1, 0, 1])),
            domain: None,
            sobolev_mode: None,
            override_hypotheses: false,
            truncation: req.truncation,
            quadrature: req.quadrature,
        };
        reports.push(embed_report(&embed, false)?);
    }
    let hardy = hardy_fuzz(&req.hardy, seed)?;
    let failures = hardy.iter().filter(|r| !r.ok).count();
    let output = ReportOutput {
        constants: if reports.is_empty() {
            Vec::new()
        } else {
            estimate_constant(&reports)?
        },
        passed: reports.iter().map(|r| (r.theorem, r.pass)).collect(),
        hardy_checks: hardy.len(),
        hardy_failures: failures,
    };
    write_json(out, "constants.json", &output)?;
    let rows: Vec<Vec<String>> = output
        .constants
        .iter()
        .zip(&output.passed)
        .map(|(c, (_, pass))| {
            vec![
                c.theorem.to_string(),
                real(c.empirical_constant),
                c.evaluations.to_string(),
                pass.to_string(),
            ]
        })
        .collect();
    write_csv(out, "constants.csv", &["theorem", "empirical_constant", "evaluations", "pass"], &rows)?;
    let hrows: Vec<Vec<String>> = hardy
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                real(r.a),
                r.q.to_string(),
                real(r.lhs),
                real(r.rhs_bound),
                r.ok.to_string(),
            ]
        })
        .collect();
    write_csv(out, "hardy.csv", &["trial", "a", "q", "lhs", "rhs_bound", "ok"], &hrows)?;
    let all_pass = output.passed.iter().all(|(_, p)| *p);
    Ok(if all_pass && failures == 0 {
        ExitStatus::Ok
    } else {
        ExitStatus::Violated
    })
}

fn read_payload(path: Option<&Path>) -> CliResult<Value> {
    let path = path.ok_or_else(|| CliError::invalid("--config <path> is required"))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{} is not valid JSON: {e}", path.display())))
}

fn dispatch(command: Command, payload: &Value, out: &Path, seed: u64) -> CliResult<ExitStatus> {
    match command {
        Command::Norm => cmd_norm(payload, out),
        Command::Check => cmd_check(payload, out),
        Command::Operator => cmd_operator(payload, out),
        Command::Embed { override_hypotheses } => cmd_embed(payload, out, override_hypotheses),
        Command::Counterexample => cmd_counterexample(payload, out),
        Command::Report => cmd_report(payload, out, seed),
        Command::Run => Err(CliError::invalid("`run` cannot be nested")),
    }
}

fn execute(cli: &Cli) -> CliResult<ExitStatus> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::invalid("--threads must be >= 1"));
        }
        // a pool that already exists (repeated in-process runs) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let file = read_payload(cli.config.as_deref())?;
    let (command, payload, seed, out) = match cli.command {
        Command::Run => {
            let rc: RunConfig = parse(&file)?;
            let command = match rc.command.as_str() {
                "norm" => Command::Norm,
                "check" => Command::Check,
                "operator" => Command::Operator,
                "embed" => Command::Embed {
                    override_hypotheses: false,
                },
                "counterexample" => Command::Counterexample,
                "report" => Command::Report,
                other => return Err(CliError::invalid(format!("unknown command `{other}`"))),
            };
            let out = cli.out.clone().or(rc.output_dir).unwrap_or_else(|| PathBuf::from("."));
            (command, rc.payload, cli.seed.unwrap_or(rc.seed), out)
        }
        c => (
            c,
            file,
            cli.seed.unwrap_or(0),
            cli.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        ),
    };
    fs::create_dir_all(&out).map_err(|e| CliError::invalid(format!("cannot create {}: {e}", out.display())))?;
    dispatch(command, &payload, &out, seed)
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("herzkit: {}", e.message);
            e.status.code()
        }
    }
}

/// Parses `args` (program name first) and runs; usage errors exit with 2.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn norm_of_bump() {
        let d = tmp();
        let payload = json!({
            "function": {"variant": "SmoothBump", "center": [0.0, 0.0], "radius": 1.0, "amplitude": 1.0},
            "herz": {"alpha": 0.0, "p": 2, "q": 2, "n": 2}
        });
        assert_eq!(cmd_norm(&payload, d.path()).unwrap(), ExitStatus::Ok);
        let out: Value = serde_json::from_str(&fs::read_to_string(d.path().join("norm.json")).unwrap()).unwrap();
        assert!(out["value"].as_f64().unwrap() > 0.0);
        assert!(d.path().join("terms.csv").exists());
    }

    #[test]
    fn norm_missing_field_names_it() {
        let d = tmp();
        let payload = json!({
            "function": {"variant": "Gaussian", "center": [0.0], "scale": 1.0},
            "herz": {"alpha": 0.0, "q": 2, "n": 1}
        });
        let e = cmd_norm(&payload, d.path()).unwrap_err();
        assert_eq!(e.status, ExitStatus::Invalid);
        assert!(e.message.contains("`p`"), "{}", e.message);
    }

    #[test]
    fn divergent_norm_reports_partial() {
        let d = tmp();
        let payload = json!({
            "function": {"variant": "RadialPowerLog", "n": 2, "a": -2.0, "b": 0.0, "r_lo": 0.0, "r_hi": 1.0},
            "herz": {"alpha": 0.0, "p": 1, "q": 1, "n": 2}
        });
        assert_eq!(cmd_norm(&payload, d.path()).unwrap(), ExitStatus::Diverged);
        let out: Value = serde_json::from_str(&fs::read_to_string(d.path().join("norm.json")).unwrap()).unwrap();
        assert!(out["divergence"]["partial"]["value"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn check_statuses() {
        let d = tmp();
        let ok = json!({"theorem": "Embeddings1", "params": {"n": 2, "q": 2, "alpha1": 0.0, "alpha2": 0.0, "r": 2}});
        assert_eq!(cmd_check(&ok, d.path()).unwrap(), ExitStatus::Ok);
        let broken = json!({"theorem": "Embeddings1", "params": {"n": 2, "q": 2, "alpha1": 0.1, "alpha2": 0.0}});
        assert_eq!(cmd_check(&broken, d.path()).unwrap(), ExitStatus::Violated);
        let text = fs::read_to_string(d.path().join("hypotheses.json")).unwrap();
        assert!(text.contains("alpha2 + n - 1 = alpha1 + n/q"));
        let unknown = json!({"theorem": "Embeddings9", "params": {}});
        assert_eq!(cmd_check(&unknown, d.path()).unwrap_err().status, ExitStatus::Invalid);
        let extra = json!({"theorem": "Embeddings1", "params": {}, "typo": 1});
        assert_eq!(cmd_check(&extra, d.path()).unwrap_err().status, ExitStatus::Invalid);
    }

    #[test]
    fn embed_empty_family_is_invalid() {
        let d = tmp();
        let payload = json!({"theorem": "Embeddings1", "family": []});
        assert_eq!(cmd_embed(&payload, d.path(), false).unwrap_err().status, ExitStatus::Invalid);
    }

    #[test]
    fn embed_override_is_watermarked() {
        let d = tmp();
        let payload = json!({
            "theorem": "Embeddings1",
            "params": {"n": 2, "q": 2, "alpha1": 0.1, "alpha2": 0.0, "r": 2},
            "family": [{"variant": "Gaussian", "center": [0.0, 0.0], "scale": 1.0}],
            "dilation_levels": [0]
        });
        assert_eq!(cmd_embed(&payload, d.path(), false).unwrap(), ExitStatus::Violated);
        assert_eq!(cmd_embed(&payload, d.path(), true).unwrap(), ExitStatus::Ok);
        let text = fs::read_to_string(d.path().join("report.json")).unwrap();
        assert!(text.contains("\"override\""));
    }

    #[test]
    fn operator_points_and_projection() {
        let d = tmp();
        let payload = json!({
            "function": {"variant": "SmoothBump", "center": [0.0], "radius": 1.0},
            "operator": {"kind": "maximal"},
            "points": [[0.0], [0.5], [3.0]]
        });
        assert_eq!(cmd_operator(&payload, d.path()).unwrap(), ExitStatus::Ok);
        let payload = json!({
            "function": {"variant": "SmoothBump", "center": [0.0], "radius": 1.0},
            "operator": {"kind": "dyadic_project", "j": 2, "region": {"variant": "Cube", "corner": [-1.0], "side": 2.0}}
        });
        assert_eq!(cmd_operator(&payload, d.path()).unwrap(), ExitStatus::Ok);
        let csv = fs::read_to_string(d.path().join("operator.csv")).unwrap();
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn counterexample_regime_violation() {
        let d = tmp();
        let payload = json!({"case": "case1", "r": 1.0, "herz": {"alpha": 0.5, "p": 2, "q": 2, "n": 2}});
        assert_eq!(cmd_counterexample(&payload, d.path()).unwrap_err().status, ExitStatus::Violated);
        let payload = json!({"case": "case2", "herz": {"alpha": 1.0, "p": 2, "q": 2, "n": 2}, "big_k": 8});
        assert_eq!(cmd_counterexample(&payload, d.path()).unwrap(), ExitStatus::Ok);
    }

    #[test]
    fn hardy_fuzz_is_seeded() {
        let cfg = HardyFuzz {
            trials: 20,
            ..Default::default()
        };
        let a = hardy_fuzz(&cfg, 7).unwrap();
        assert_eq!(a, hardy_fuzz(&cfg, 7).unwrap());
        assert_ne!(a, hardy_fuzz(&cfg, 8).unwrap());
        assert!(a.iter().all(|r| r.ok));
    }
}
