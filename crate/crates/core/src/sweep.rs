//! JSON-configured parameter sweeps, convergence validation and CSV output.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{moments_of, Method, MomentReport, WorkHeatDistribution};
use crate::error::{EngineError, Result};
use crate::exact::{adaptive_truncation, oracle_distribution, two_point_distribution, OracleTolerances};
use crate::par::map_ordered;
use crate::params::{Coupling, EngineParams, Order, ShgVariant};
use crate::perturbative::{
    moments_2nd, moments_4th, resolve_theta, snr_4th, swap_mean_work, tanh_half, theta_bar,
    work_distribution_2nd, work_distribution_4th, FourthOrderCoefficients,
};
use crate::thermo::{classify_regime, entropy_production, tur_report};

pub const MAX_AXES: usize = 2;

// ---------------------------------------------------------------------------
// raw document

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    engine: RawEngine,
    coupling: RawCoupling,
    #[serde(default)]
    axes: Vec<RawAxis>,
    #[serde(default)]
    methods: Option<Vec<Method>>,
    #[serde(default)]
    outputs: Option<Vec<String>>,
    #[serde(default)]
    oracle: Option<OracleTolerances>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    n: u32,
    m: u32,
    omega_a: f64,
    #[serde(default)]
    omega_b: Option<f64>,
    /// `omega_b / omega_a`, alternative to `omega_b`
    #[serde(default)]
    x: Option<f64>,
    beta_a: f64,
    #[serde(default)]
    beta_b: Option<f64>,
    /// `beta_b / beta_a`, alternative to `beta_b`
    #[serde(default)]
    y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Theta,
    Alpha,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    mode: CouplingMode,
    value: f64,
    #[serde(default)]
    order: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParameter {
    Theta,
    Alpha,
    OmegaA,
    OmegaB,
    BetaA,
    BetaB,
    N,
    M,
    XMax,
    X,
    Y,
}

impl AxisParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisParameter::Theta => "theta",
            AxisParameter::Alpha => "alpha",
            AxisParameter::OmegaA => "omega_a",
            AxisParameter::OmegaB => "omega_b",
            AxisParameter::BetaA => "beta_a",
            AxisParameter::BetaB => "beta_b",
            AxisParameter::N => "n",
            AxisParameter::M => "m",
            AxisParameter::XMax => "x_max",
            AxisParameter::X => "x",
            AxisParameter::Y => "y",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, AxisParameter::N | AxisParameter::M)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    parameter: AxisParameter,
    #[serde(default)]
    min: Option<f64>,
    #[serde(default)]
    max: Option<f64>,
    #[serde(default)]
    points: Option<usize>,
    #[serde(default)]
    scale: Option<Scale>,
    /// Explicit grid, alternative to `min`/`max`/`points`.
    #[serde(default)]
    values: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// validated configuration

/// A frequency or inverse temperature of mode B, given directly or as a
/// ratio to mode A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeB {
    Absolute(f64),
    Ratio(f64),
}

impl ModeB {
    fn resolve(self, a: f64) -> f64 {
        match self {
            ModeB::Absolute(v) => v,
            ModeB::Ratio(r) => r * a,
        }
    }
}

/// Engine description before axis overrides. `n` is real so that an
/// `x_max` axis can take non-integer values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSpec {
    pub n: f64,
    pub m: f64,
    pub omega_a: f64,
    pub omega_b: ModeB,
    pub beta_a: f64,
    pub beta_b: ModeB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub mode: CouplingMode,
    pub value: f64,
    /// `None`: the order of the method being evaluated.
    pub order: Option<Order>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: AxisParameter,
    pub values: Vec<f64>,
}

/// Output columns. The first group are the reserved names; the rest are
/// extensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    K,
    Probability,
    MeanW,
    SecondW,
    VarW,
    MeanQh,
    MeanQc,
    Sigma,
    Eta,
    Snr,
    Rf,
    ThetaBar2,
    ThetaBar4,
    Delta,
    Regime,
    OffLineMass,
    Error,
    Theta,
    SwapMeanW,
    Snr4th,
    FourthBound,
    RfSigma,
    DimA,
    DimB,
}

impl Column {
    pub const ALL: [Column; 24] = [
        Column::K,
        Column::Probability,
        Column::MeanW,
        Column::SecondW,
        Column::VarW,
        Column::MeanQh,
        Column::MeanQc,
        Column::Sigma,
        Column::Eta,
        Column::Snr,
        Column::Rf,
        Column::ThetaBar2,
        Column::ThetaBar4,
        Column::Delta,
        Column::Regime,
        Column::OffLineMass,
        Column::Error,
        Column::Theta,
        Column::SwapMeanW,
        Column::Snr4th,
        Column::FourthBound,
        Column::RfSigma,
        Column::DimA,
        Column::DimB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Column::K => "k",
            Column::Probability => "probability",
            Column::MeanW => "mean_w",
            Column::SecondW => "second_w",
            Column::VarW => "var_w",
            Column::MeanQh => "mean_qh",
            Column::MeanQc => "mean_qc",
            Column::Sigma => "sigma",
            Column::Eta => "eta",
            Column::Snr => "snr",
            Column::Rf => "rf",
            Column::ThetaBar2 => "theta_bar_2",
            Column::ThetaBar4 => "theta_bar_4",
            Column::Delta => "delta",
            Column::Regime => "regime",
            Column::OffLineMass => "off_line_mass",
            Column::Error => "error",
            Column::Theta => "theta",
            Column::SwapMeanW => "swap_mean_w",
            Column::Snr4th => "snr_4th",
            Column::FourthBound => "fourth_bound",
            Column::RfSigma => "rf_sigma",
            Column::DimA => "dim_a",
            Column::DimB => "dim_b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Column::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

pub const DEFAULT_OUTPUTS: [Column; 5] = [
    Column::MeanW,
    Column::VarW,
    Column::Sigma,
    Column::Snr,
    Column::Regime,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: EngineSpec,
    pub coupling: CouplingSpec,
    pub axes: Vec<Axis>,
    pub methods: Vec<Method>,
    /// Requested columns; `error` is always appended if absent.
    pub outputs: Vec<Column>,
    pub oracle_tolerances: OracleTolerances,
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> EngineError {
    EngineError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

fn either(
    path: &str,
    abs_name: &str,
    abs: Option<f64>,
    ratio_name: &str,
    ratio: Option<f64>,
) -> Result<ModeB> {
    match (abs, ratio) {
        (Some(v), None) => Ok(ModeB::Absolute(v)),
        (None, Some(r)) => Ok(ModeB::Ratio(r)),
        (Some(_), Some(_)) => Err(schema(
            path,
            format!("give either `{abs_name}` or `{ratio_name}`, not both"),
        )),
        (None, None) => Err(schema(
            path,
            format!("missing `{abs_name}` (or `{ratio_name}`)"),
        )),
    }
}

fn axis_values(i: usize, raw: &RawAxis) -> Result<Vec<f64>> {
    let path = |f: &str| format!("axes[{i}].{f}");
    let values = if let Some(vals) = &raw.values {
        if raw.min.is_some() || raw.max.is_some() || raw.points.is_some() || raw.scale.is_some() {
            return Err(schema(
                path("values"),
                "`values` excludes `min`, `max`, `points` and `scale`",
            ));
        }
        if vals.len() < 2 {
            return Err(schema(path("values"), "an axis needs at least 2 points"));
        }
        vals.clone()
    } else {
        let min = raw.min.ok_or_else(|| schema(path("min"), "missing field"))?;
        let max = raw.max.ok_or_else(|| schema(path("max"), "missing field"))?;
        let points = raw.points.ok_or_else(|| schema(path("points"), "missing field"))?;
        if points < 2 {
            return Err(schema(path("points"), format!("must be >= 2, got {points}")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(schema(path("max"), format!("need finite min < max, got [{min}, {max}]")));
        }
        let last = (points - 1) as f64;
        match raw.scale.unwrap_or_default() {
            Scale::Linear => (0..points)
                .map(|k| if k + 1 == points { max } else { min + (max - min) * k as f64 / last })
                .collect(),
            Scale::Log => {
                if min <= 0.0 {
                    return Err(schema(path("min"), "log scale needs min > 0"));
                }
                let (l0, l1) = (min.ln(), max.ln());
                (0..points)
                    .map(|k| {
                        if k == 0 {
                            min
                        } else if k + 1 == points {
                            max
                        } else {
                            (l0 + (l1 - l0) * k as f64 / last).exp()
                        }
                    })
                    .collect()
            }
        }
    };
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(schema(format!("axes[{i}].values[{k}]"), "must be finite"));
        }
        if raw.parameter.is_integer() && (v.fract() != 0.0 || *v < 1.0) {
            return Err(schema(
                format!("axes[{i}]"),
                format!(
                    "`{}` is an integer parameter; grid value {v} is not a positive integer",
                    raw.parameter.as_str()
                ),
            ));
        }
    }
    Ok(values)
}

/// Parse and validate a sweep configuration. Unknown keys are rejected;
/// errors carry the JSON path of the offending value.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;

    let e = &raw.engine;
    let base = EngineSpec {
        n: e.n as f64,
        m: e.m as f64,
        omega_a: e.omega_a,
        omega_b: either("engine", "omega_b", e.omega_b, "x", e.x)?,
        beta_a: e.beta_a,
        beta_b: either("engine", "beta_b", e.beta_b, "y", e.y)?,
    };

    let order = match raw.coupling.order {
        None => None,
        Some(o) => Some(Order::from_int(o).map_err(|_| {
            schema("coupling.order", format!("must be 2 or 4, got {o}"))
        })?),
    };
    let coupling = CouplingSpec {
        mode: raw.coupling.mode,
        value: raw.coupling.value,
        order,
    };

    if raw.axes.len() > MAX_AXES {
        return Err(schema("axes", format!("at most {MAX_AXES} axes, got {}", raw.axes.len())));
    }
    let mut axes = Vec::with_capacity(raw.axes.len());
    for (i, a) in raw.axes.iter().enumerate() {
        if axes.iter().any(|b: &Axis| b.parameter == a.parameter) {
            return Err(schema(format!("axes[{i}].parameter"), "duplicate axis parameter"));
        }
        axes.push(Axis {
            parameter: a.parameter,
            values: axis_values(i, a)?,
        });
    }

    let methods = raw.methods.unwrap_or_else(|| vec![Method::Pert2]);
    if methods.is_empty() {
        return Err(schema("methods", "at least one method is required"));
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(schema(format!("methods[{i}]"), "duplicate method"));
        }
    }

    let outputs = match raw.outputs {
        None => DEFAULT_OUTPUTS.to_vec(),
        Some(names) => {
            let mut cols = Vec::with_capacity(names.len());
            for (i, name) in names.iter().enumerate() {
                let c = Column::parse(name)
                    .ok_or_else(|| schema(format!("outputs[{i}]"), format!("unknown column `{name}`")))?;
                if cols.contains(&c) {
                    return Err(schema(format!("outputs[{i}]"), "duplicate column"));
                }
                cols.push(c);
            }
            cols
        }
    };

    let oracle_tolerances = raw.oracle.unwrap_or_default();
    oracle_tolerances
        .validate()
        .map_err(|e| schema("oracle", e.to_string()))?;

    let cfg = SweepConfig {
        base,
        coupling,
        axes,
        methods,
        outputs,
        oracle_tolerances,
    };
    // the base point itself must be physical
    cfg.base_params()?;
    Ok(cfg)
}

impl SweepConfig {
    fn base_params(&self) -> Result<EngineParams> {
        let coupling = self.coupling_for(Method::Pert2, &self.coupling)?;
        to_params(&self.base, coupling)
    }

    fn coupling_for(&self, method: Method, spec: &CouplingSpec) -> Result<Coupling> {
        let c = match spec.mode {
            CouplingMode::Theta => Coupling::DirectTheta { theta: spec.value },
            CouplingMode::Alpha => Coupling::AlphaFraction {
                alpha: spec.value,
                order: spec.order.unwrap_or(match method {
                    Method::Pert4 => Order::Fourth,
                    Method::Pert2 | Method::Oracle => Order::Second,
                }),
            },
        };
        c.validate()?;
        Ok(c)
    }

    /// Column names in output order.
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.axes.iter().map(|a| a.parameter.as_str().to_string()).collect();
        h.push("method".into());
        h.extend(self.columns().iter().map(|c| c.as_str().to_string()));
        h
    }

    fn columns(&self) -> Vec<Column> {
        let mut cols = self.outputs.clone();
        if !cols.contains(&Column::Error) {
            cols.push(Column::Error);
        }
        cols
    }

    /// Grid points in axis-major order (last axis fastest).
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

fn to_params(spec: &EngineSpec, coupling: Coupling) -> Result<EngineParams> {
    if spec.n.fract() != 0.0 || spec.m.fract() != 0.0 || spec.n < 1.0 || spec.m < 1.0 {
        return Err(EngineError::Domain(format!(
            "(n, m) = ({}, {}) is not a pair of positive integers",
            spec.n, spec.m
        )));
    }
    EngineParams::new(
        spec.n as u32,
        spec.m as u32,
        spec.omega_a,
        spec.omega_b.resolve(spec.omega_a),
        spec.beta_a,
        spec.beta_b.resolve(spec.beta_a),
        coupling,
    )
}

// ---------------------------------------------------------------------------
// table

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn nan() -> Self {
        Cell::Num(f64::NAN)
    }

    fn opt(v: Option<f64>) -> Self {
        Cell::Num(v.unwrap_or(f64::NAN))
    }
}

/// Round-trip float formatting: 17 significant digits, `nan`, `inf`, `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => f.write_str(&format_float(*v)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of one column (`NaN` for non-numeric cells).
    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Num(v) => *v,
                    Cell::Int(k) => *k as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }

    /// CSV text: header row, LF line endings, RFC-4180 quoting.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| EngineError::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| EngineError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Write `table` as CSV. An empty table is refused and no file is created.
pub fn emit_csv(table: &Table, destination: &Path) -> Result<()> {
    if table.rows.is_empty() || table.header.is_empty() {
        return Err(EngineError::Config("refusing to write an empty table".into()));
    }
    let text = table.to_csv_string()?;
    std::fs::write(destination, text)?;
    Ok(())
}

/// Gnuplot script plotting `y_columns` against `x_column` of a CSV file.
pub fn gnuplot_script(table: &Table, csv_path: &str, x_column: &str, y_columns: &[&str]) -> Result<String> {
    let col = |name: &str| {
        table
            .column_index(name)
            .map(|i| i + 1)
            .ok_or_else(|| EngineError::Config(format!("no column `{name}` to plot")))
    };
    let xi = col(x_column)?;
    let mut plots = Vec::with_capacity(y_columns.len());
    for y in y_columns {
        plots.push(format!(
            "'{csv_path}' using {xi}:{} with linespoints title '{y}'",
            col(y)?
        ));
    }
    Ok(format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{x_column}'\nplot {}\n",
        plots.join(", \\\n     ")
    ))
}

// ---------------------------------------------------------------------------
// evaluation

struct Evaluated {
    params: EngineParams,
    theta: f64,
    moments: Result<MomentReport>,
    dist: Option<Result<WorkHeatDistribution>>,
}

fn apply_axis(spec: &mut EngineSpec, coupling: &mut CouplingSpec, p: AxisParameter, v: f64) {
    match p {
        AxisParameter::Theta => {
            coupling.mode = CouplingMode::Theta;
            coupling.value = v;
        }
        AxisParameter::Alpha => {
            coupling.mode = CouplingMode::Alpha;
            coupling.value = v;
        }
        AxisParameter::OmegaA => spec.omega_a = v,
        AxisParameter::OmegaB => spec.omega_b = ModeB::Absolute(v),
        AxisParameter::BetaA => spec.beta_a = v,
        AxisParameter::BetaB => spec.beta_b = ModeB::Absolute(v),
        AxisParameter::N => spec.n = v,
        AxisParameter::M => spec.m = v,
        AxisParameter::XMax => {
            spec.n = v;
            spec.m = 1.0;
        }
        AxisParameter::X => spec.omega_b = ModeB::Ratio(v),
        AxisParameter::Y => spec.beta_b = ModeB::Ratio(v),
    }
}

fn needs_distribution(cols: &[Column]) -> bool {
    cols.iter().any(|c| matches!(c, Column::K | Column::Probability))
}

fn evaluate(
    cfg: &SweepConfig,
    spec: &EngineSpec,
    coupling: &CouplingSpec,
    method: Method,
    want_dist: bool,
) -> Result<Evaluated> {
    let params = to_params(spec, cfg.coupling_for(method, coupling)?)?;
    let theta = resolve_theta(&params)?;
    let (moments, dist) = match method {
        Method::Oracle => {
            let d = oracle_distribution(&params, &cfg.oracle_tolerances);
            let m = match &d {
                Ok(d) => Ok(moments_of(d, &params)),
                Err(e) => Err(clone_error(e)),
            };
            (m, Some(d))
        }
        Method::Pert2 => (
            moments_2nd(&params, theta),
            want_dist.then(|| work_distribution_2nd(&params, theta)),
        ),
        Method::Pert4 => (
            moments_4th(&params, theta),
            want_dist.then(|| work_distribution_4th(&params, theta)),
        ),
    };
    Ok(Evaluated {
        params,
        theta,
        moments,
        dist,
    })
}

/// Errors are not `Clone` (they may wrap I/O errors); sweeps only need the
/// message and the category.
fn clone_error(e: &EngineError) -> EngineError {
    match e {
        EngineError::Truncation {
            off_line_mass,
            tolerance,
            dim_a,
            dim_b,
        } => EngineError::Truncation {
            off_line_mass: *off_line_mass,
            tolerance: *tolerance,
            dim_a: *dim_a,
            dim_b: *dim_b,
        },
        EngineError::Resource { parameter, needed, cap } => EngineError::Resource {
            parameter: parameter.clone(),
            needed: *needed,
            cap: *cap,
        },
        other => EngineError::Numerical(other.to_string()),
    }
}

fn param_cell(col: Column, ev: &Evaluated) -> Option<Cell> {
    let p = &ev.params;
    let shg = ShgVariant::of(p.n, p.m).is_ok();
    Some(match col {
        Column::ThetaBar2 => Cell::opt(theta_bar(p, Order::Second).ok().map(|b| b.theta_bar)),
        Column::ThetaBar4 => Cell::opt(theta_bar(p, Order::Fourth).ok().map(|b| b.theta_bar)),
        Column::Delta => Cell::opt(
            ShgVariant::of(p.n, p.m)
                .ok()
                .and_then(|v| FourthOrderCoefficients::from_occupations(p.occupations(), v).delta().ok()),
        ),
        Column::Regime => Cell::Text(classify_regime(p).regime.as_str().into()),
        Column::Theta => Cell::Num(ev.theta),
        Column::SwapMeanW => Cell::Num(swap_mean_work(p, ev.theta)),
        Column::Snr4th => Cell::opt(shg.then(|| snr_4th(p, ev.theta).ok().map(|s| s.snr)).flatten()),
        _ => return None,
    })
}

fn moment_cell(col: Column, ev: &Evaluated, r: &MomentReport, alpha: f64) -> Cell {
    let p = &ev.params;
    match col {
        Column::MeanW => Cell::Num(r.mean_w),
        Column::SecondW => Cell::Num(r.second_w),
        Column::VarW => Cell::Num(r.var_w),
        Column::MeanQh => Cell::Num(r.mean_qh),
        Column::MeanQc => Cell::Num(r.mean_qc),
        Column::Sigma => Cell::opt(entropy_production(p, r.mean_w).ok()),
        Column::Eta => Cell::opt(r.efficiency),
        Column::Snr => Cell::opt(r.snr),
        Column::Rf => Cell::opt(r.relative_fluctuations()),
        Column::FourthBound | Column::RfSigma => {
            let delta = ShgVariant::of(p.n, p.m)
                .ok()
                .and_then(|v| FourthOrderCoefficients::from_occupations(p.occupations(), v).delta().ok());
            let tur = tur_report(p, r, r.method, alpha, delta).ok();
            if col == Column::RfSigma {
                Cell::opt(tur.map(|t| t.rf_sigma))
            } else {
                Cell::opt(tur.and_then(|t| t.fourth_bound))
            }
        }
        _ => Cell::nan(),
    }
}

/// Effective alpha of a run: the configured fraction, or `(theta/theta_bar)^2`
/// of the run's own order for direct couplings.
fn effective_alpha(ev: &Evaluated, method: Method) -> f64 {
    match ev.params.coupling {
        Coupling::AlphaFraction { alpha, .. } => alpha,
        Coupling::DirectTheta { theta } => {
            let order = if method == Method::Pert4 { Order::Fourth } else { Order::Second };
            theta_bar(&ev.params, order)
                .ok()
                .filter(|b| !b.is_unbounded())
                .map_or(f64::NAN, |b| (theta / b.theta_bar).powi(2))
        }
    }
}

/// Second-order closed forms for non-integer `n` (an `x_max` axis), with
/// `theta = sqrt(alpha) theta_bar_2`.
fn alpha_form_row(spec: &EngineSpec, alpha: f64, col: Column) -> Cell {
    let (n, m) = (spec.n, spec.m);
    let wa = spec.omega_a;
    let wb = spec.omega_b.resolve(wa);
    let ba = spec.beta_a;
    let bb = spec.beta_b.resolve(ba);
    let eps = n * wa - m * wb;
    let z = m * bb * wb - n * ba * wa;
    let t = tanh_half(z);
    let mean_k = alpha * t;
    let mean_w = eps * mean_k;
    let second_w = alpha * eps * eps;
    let mean_qh = n * wa * mean_k;
    match col {
        Column::MeanW => Cell::Num(mean_w),
        Column::SecondW | Column::VarW => Cell::Num(second_w),
        Column::MeanQh => Cell::Num(mean_qh),
        Column::MeanQc => Cell::Num(-m * wb * mean_k),
        Column::Sigma => Cell::Num(z * mean_k),
        Column::Eta => Cell::opt((mean_qh != 0.0).then(|| mean_w / mean_qh)),
        Column::Snr => Cell::opt((second_w > 0.0).then(|| mean_w * mean_w / second_w)),
        Column::Rf => Cell::opt((mean_w != 0.0).then(|| second_w / (mean_w * mean_w))),
        _ => Cell::nan(),
    }
}

fn point_rows(cfg: &SweepConfig, point: &[f64]) -> Vec<Vec<Cell>> {
    let mut spec = cfg.base;
    let mut coupling = cfg.coupling;
    for (axis, &v) in cfg.axes.iter().zip(point) {
        apply_axis(&mut spec, &mut coupling, axis.parameter, v);
    }
    let cols = cfg.columns();
    let want_dist = needs_distribution(&cols);
    let axis_cells: Vec<Cell> = cfg
        .axes
        .iter()
        .zip(point)
        .map(|(a, &v)| if a.parameter.is_integer() { Cell::Int(v as i64) } else { Cell::Num(v) })
        .collect();

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let mut prefix = axis_cells.clone();
        prefix.push(Cell::Text(method.as_str().into()));

        // non-integer n from an x_max axis: only the alpha-form pert2 closed forms exist
        if spec.n.fract() != 0.0 {
            let alpha_ok = coupling.mode == CouplingMode::Alpha
                && coupling.order.unwrap_or(Order::Second) == Order::Second
                && method == Method::Pert2;
            let mut row = prefix;
            for &c in &cols {
                row.push(match c {
                    Column::Error if alpha_ok => Cell::Text(String::new()),
                    Column::Error => Cell::Text(
                        "non-integer n/m is only defined for pert2 with an alpha coupling at order 2"
                            .into(),
                    ),
                    _ if alpha_ok => alpha_form_row(&spec, coupling.value, c),
                    Column::Regime => Cell::Text(String::new()),
                    _ => Cell::nan(),
                });
            }
            rows.push(row);
            continue;
        }

        let ev = match evaluate(cfg, &spec, &coupling, method, want_dist) {
            Ok(ev) => ev,
            Err(e) => {
                let mut row = prefix;
                for &c in &cols {
                    row.push(match c {
                        Column::Error => Cell::Text(e.to_string()),
                        Column::Regime => Cell::Text(String::new()),
                        _ => Cell::nan(),
                    });
                }
                rows.push(row);
                continue;
            }
        };
        let alpha = effective_alpha(&ev, method);
        let mut error = ev.moments.as_ref().err().map(|e| e.to_string());
        if error.is_none() {
            if let Some(Err(e)) = &ev.dist {
                error = Some(e.to_string());
            }
        }
        if error.is_none() && ev.moments.as_ref().is_ok_and(|r| r.exceeds_coupling_bound) {
            error = Some(format!("warning: theta = {} exceeds the coupling bound", ev.theta));
        }
        let dist = ev.dist.as_ref().and_then(|d| d.as_ref().ok());
        let support: Vec<Option<(i64, f64)>> = match (want_dist, dist) {
            (true, Some(d)) => d.points.iter().map(|p| Some((p.k, p.probability))).collect(),
            _ => vec![None],
        };
        for kp in support {
            let mut row = prefix.clone();
            for &c in &cols {
                let cell = match c {
                    Column::K => kp.map_or(Cell::nan(), |(k, _)| Cell::Int(k)),
                    Column::Probability => Cell::opt(kp.map(|(_, p)| p)),
                    Column::Error => Cell::Text(error.clone().unwrap_or_default()),
                    Column::OffLineMass => Cell::opt(match method {
                        Method::Oracle => dist.map(|d| d.off_line_mass),
                        _ => Some(0.0),
                    }),
                    Column::DimA | Column::DimB => {
                        let diag = dist.and_then(|d| d.diagnostics);
                        match diag {
                            Some(g) => Cell::Int(if c == Column::DimA { g.dim_a } else { g.dim_b } as i64),
                            None => Cell::nan(),
                        }
                    }
                    _ => match param_cell(c, &ev) {
                        Some(cell) => cell,
                        None => match &ev.moments {
                            Ok(r) => moment_cell(c, &ev, r, alpha),
                            Err(_) => Cell::nan(),
                        },
                    },
                };
                row.push(cell);
            }
            rows.push(row);
        }
    }
    rows
}

/// Evaluate every grid point for every method. Rows are ordered
/// axis-major, method-minor (then by `k` when distributions are requested),
/// independently of `jobs`. Per-point failures land in the `error` column.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Table {
    let grid = cfg.grid();
    let rows = map_ordered(&grid, jobs, |p| point_rows(cfg, p))
        .into_iter()
        .flatten()
        .collect();
    Table {
        header: cfg.header(),
        rows,
    }
}

// ---------------------------------------------------------------------------
// convergence validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub theta_grid: Vec<f64>,
    pub errors_pert2: Vec<f64>,
    pub errors_pert4: Option<Vec<f64>>,
    pub fitted_order_pert2: f64,
    pub fitted_order_pert4: Option<f64>,
    pub off_line_masses: Vec<f64>,
    pub dims: Vec<(usize, usize)>,
}

impl ValidationReport {
    /// pert2 slope in [3.5, 4.5] and, when present, pert4 slope in [5.5, 6.5].
    pub fn accepted(&self) -> bool {
        (3.5..=4.5).contains(&self.fitted_order_pert2)
            && self.fitted_order_pert4.is_none_or(|s| (5.5..=6.5).contains(&s))
    }
}

/// Least-squares slope of `ln(err)` against `ln(theta)`.
pub fn log_log_slope(theta: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Coupling bound used by [`validate_convergence`]: the second-order bound,
/// or the smaller of both bounds for the SHG variants.
pub fn validation_theta_bar(params: &EngineParams) -> Result<f64> {
    let b2 = theta_bar(params, Order::Second)?.theta_bar;
    Ok(match ShgVariant::of(params.n, params.m) {
        Ok(_) => b2.min(theta_bar(params, Order::Fourth)?.theta_bar),
        Err(_) => b2,
    })
}

/// Compare the perturbative distributions with the oracle on
/// `theta_max / 2^i`, `i = 0 .. halvings`, and fit the convergence orders.
pub fn validate_convergence(
    params: &EngineParams,
    theta_max: f64,
    halvings: u32,
    tol: &OracleTolerances,
) -> Result<ValidationReport> {
    if halvings < 3 {
        return Err(EngineError::Config(format!("halvings must be >= 3, got {halvings}")));
    }
    let bar = validation_theta_bar(params)?;
    if !(theta_max > 0.0 && theta_max <= bar / 4.0 * (1.0 + 1e-12)) {
        return Err(EngineError::Domain(format!(
            "theta_max = {theta_max} must lie in (0, theta_bar/4 = {}]",
            bar / 4.0
        )));
    }
    let shg = ShgVariant::of(params.n, params.m).is_ok();
    let theta_grid: Vec<f64> = (0..halvings).map(|i| theta_max / 2f64.powi(i as i32)).collect();
    let mut errors_pert2 = Vec::new();
    let mut errors_pert4 = Vec::new();
    let mut off_line_masses = Vec::new();
    let mut dims = Vec::new();
    for &theta in &theta_grid {
        let p = params.with_theta(theta);
        let trunc = adaptive_truncation(&p, tol)?;
        let oracle = two_point_distribution(&p, &trunc)?;
        errors_pert2.push(oracle.max_abs_difference(&work_distribution_2nd(&p, theta)?));
        if shg {
            errors_pert4.push(oracle.max_abs_difference(&work_distribution_4th(&p, theta)?));
        }
        off_line_masses.push(oracle.off_line_mass);
        dims.push((trunc.dim_a, trunc.dim_b));
    }
    let fitted_order_pert2 = log_log_slope(&theta_grid, &errors_pert2);
    let fitted_order_pert4 = shg.then(|| log_log_slope(&theta_grid, &errors_pert4));
    Ok(ValidationReport {
        theta_grid,
        errors_pert2,
        errors_pert4: shg.then_some(errors_pert4),
        fitted_order_pert2,
        fitted_order_pert4,
        off_line_masses,
        dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "engine": {"n": 2, "m": 1, "omega_a": 1.0, "omega_b": 0.5, "beta_a": 0.5, "beta_b": 10.0},
        "coupling": {"mode": "alpha", "value": 0.5}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.methods, vec![Method::Pert2]);
        assert_eq!(c.oracle_tolerances, OracleTolerances::default());
        assert!(c.axes.is_empty());
        assert_eq!(c.grid(), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn unknown_key_reports_path() {
        let doc = MINIMAL.replace("\"omega_a\"", "\"omega_q\": 1, \"omega_a\"");
        match parse_config(&doc) {
            Err(EngineError::Schema { path, .. }) => assert_eq!(path, "engine.omega_q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_point_axis_is_rejected() {
        let doc = MINIMAL.replace(
            "\"coupling\"",
            "\"axes\": [{\"parameter\": \"theta\", \"min\": 0.1, \"max\": 0.2, \"points\": 1}], \"coupling\"",
        );
        match parse_config(&doc) {
            Err(EngineError::Schema { path, .. }) => assert_eq!(path, "axes[0].points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integer_axis_needs_integer_grid() {
        let doc = MINIMAL.replace(
            "\"coupling\"",
            "\"axes\": [{\"parameter\": \"n\", \"min\": 1, \"max\": 2, \"points\": 3}], \"coupling\"",
        );
        assert!(matches!(parse_config(&doc), Err(EngineError::Schema { .. })));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn slope_of_power_law() {
        let t = [0.1, 0.05, 0.025];
        let e: Vec<f64> = t.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((log_log_slope(&t, &e) - 4.0).abs() < 1e-12);
    }
}
