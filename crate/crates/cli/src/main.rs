use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use polycouple::exact::{oracle_distribution, two_point_distribution, OracleTolerances, TruncationConfig};
use polycouple::optimize::{
    optimize_frequency_4th, optimize_nm, optimize_xmax, FrequencySearch, Objective,
};
use polycouple::perturbative::{
    moments_2nd, moments_4th, resolve_theta, snr_4th, work_distribution_2nd, work_distribution_4th,
    FourthOrderCoefficients,
};
use polycouple::sweep::{emit_csv, gnuplot_script, parse_config, run_sweep, validate_convergence};
use polycouple::thermo::{classify_regime, tur_report};
use polycouple::{moments_of, Coupling, EngineError, EngineParams, Method, Order, Result, ShgVariant};

#[derive(Parser)]
#[command(name = "polycouple", version, about = "Two-stroke bosonic heat engines with a polynomial coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Work/heat distribution and moments at one parameter point.
    Simulate(SimulateArgs),
    /// Evaluate a JSON-configured grid and write CSV.
    Sweep(SweepArgs),
    /// Maximize mean work or SNR over a design family.
    Optimize(OptimizeArgs),
    /// Convergence orders of the perturbative routes against the oracle.
    Validate(ValidateArgs),
    /// Thermodynamic uncertainty diagnostics.
    Tur(TurArgs),
}

#[derive(Args, Clone)]
struct Physics {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    omega_a: Option<f64>,
    #[arg(long, conflicts_with = "x")]
    omega_b: Option<f64>,
    /// omega_b / omega_a
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    beta_a: Option<f64>,
    #[arg(long, conflicts_with = "y")]
    beta_b: Option<f64>,
    /// beta_b / beta_a
    #[arg(long)]
    y: Option<f64>,
}

#[derive(Args, Clone)]
struct CouplingArgs {
    #[arg(long, conflicts_with = "alpha")]
    theta: Option<f64>,
    /// Fraction of the squared coupling bound of `--order`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Args, Clone)]
struct OracleArgs {
    #[arg(long)]
    dims_a: Option<usize>,
    #[arg(long)]
    dims_b: Option<usize>,
    #[arg(long)]
    tail_tolerance: Option<f64>,
    #[arg(long)]
    leakage_tolerance: Option<f64>,
    #[arg(long)]
    dims_cap: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    physics: Physics,
    #[command(flatten)]
    coupling: CouplingArgs,
    /// oracle, pert2 or pert4
    #[arg(long, default_value = "pert2")]
    method: String,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write a gnuplot script plotting every numeric output against the first axis.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// mean-work or snr
    #[arg(long)]
    objective: String,
    /// nm, xmax, freq21 or freq12
    #[arg(long)]
    family: String,
    #[command(flatten)]
    physics: Physics,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    n_max: u32,
    #[arg(long, default_value_t = 10)]
    m_max: u32,
    /// beta_a omega_a for the xmax family
    #[arg(long)]
    beta_omega_a: Option<f64>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    physics: Physics,
    #[arg(long)]
    theta_max: f64,
    #[arg(long, default_value_t = 3)]
    halvings: u32,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct TurArgs {
    #[command(flatten)]
    physics: Physics,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    order: u32,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| EngineError::Config(format!("missing --{flag}")))
}

fn mode_b(abs: Option<f64>, ratio: Option<f64>, a: f64, abs_flag: &str, ratio_flag: &str) -> Result<f64> {
    match (abs, ratio) {
        (Some(v), _) => Ok(v),
        (None, Some(r)) => Ok(r * a),
        (None, None) => Err(EngineError::Config(format!("missing --{abs_flag} (or --{ratio_flag})"))),
    }
}

impl Physics {
    fn params(&self, coupling: Coupling) -> Result<EngineParams> {
        let omega_a = need(self.omega_a, "omega-a")?;
        let beta_a = need(self.beta_a, "beta-a")?;
        EngineParams::new(
            need(self.n, "n")?,
            need(self.m, "m")?,
            omega_a,
            mode_b(self.omega_b, self.x, omega_a, "omega-b", "x")?,
            beta_a,
            mode_b(self.beta_b, self.y, beta_a, "beta-b", "y")?,
            coupling,
        )
    }
}

impl CouplingArgs {
    fn coupling(&self, method: Method) -> Result<Coupling> {
        let c = match (self.theta, self.alpha) {
            (Some(theta), None) => Coupling::DirectTheta { theta },
            (None, Some(alpha)) => {
                let order = match self.order {
                    Some(o) => Order::from_int(o)?,
                    None if method == Method::Pert4 => Order::Fourth,
                    None => Order::Second,
                };
                Coupling::AlphaFraction { alpha, order }
            }
            _ => return Err(EngineError::Config("give exactly one of --theta and --alpha".into())),
        };
        c.validate()?;
        Ok(c)
    }
}

impl OracleArgs {
    fn tolerances(&self) -> Result<OracleTolerances> {
        let mut t = OracleTolerances::default();
        if let Some(v) = self.tail_tolerance {
            t.tail_tolerance = v;
        }
        if let Some(v) = self.leakage_tolerance {
            t.leakage_tolerance = v;
        }
        if let Some(v) = self.dims_cap {
            t.dims_cap = v;
        }
        t.validate()?;
        Ok(t)
    }

    fn fixed_truncation(&self, params: &EngineParams) -> Result<Option<TruncationConfig>> {
        let tol = self.tolerances()?;
        match (self.dims_a, self.dims_b) {
            (None, None) => Ok(None),
            (Some(a), Some(b)) => {
                let mut t = TruncationConfig::new(a, b);
                t.tail_tolerance = tol.tail_tolerance;
                t.leakage_tolerance = tol.leakage_tolerance;
                t.validate(params)?;
                Ok(Some(t))
            }
            _ => Err(EngineError::Config("give both --dims-a and --dims-b, or neither".into())),
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| EngineError::Numerical(e.to_string()))
}

fn delta_of(params: &EngineParams) -> Option<f64> {
    let v = ShgVariant::of(params.n, params.m).ok()?;
    FourthOrderCoefficients::from_occupations(params.occupations(), v).delta().ok()
}

fn simulate(a: &SimulateArgs) -> Result<Value> {
    let method = Method::parse(&a.method)
        .ok_or_else(|| EngineError::Config(format!("unknown method `{}`", a.method)))?;
    let params = a.physics.params(a.coupling.coupling(method)?)?;
    let theta = resolve_theta(&params)?;
    let (dist, moments) = match method {
        Method::Oracle => {
            let d = match a.oracle.fixed_truncation(&params)? {
                Some(trunc) => two_point_distribution(&params, &trunc)?,
                None => oracle_distribution(&params, &a.oracle.tolerances()?)?,
            };
            let m = moments_of(&d, &params);
            (d, m)
        }
        Method::Pert2 => (work_distribution_2nd(&params, theta)?, moments_2nd(&params, theta)?),
        Method::Pert4 => (work_distribution_4th(&params, theta)?, moments_4th(&params, theta)?),
    };
    let mut out = json!({
        "params": to_json(&params)?,
        "theta": theta,
        "method": method.as_str(),
        "distribution": to_json(&dist)?,
        "moments": to_json(&moments)?,
        "regime": to_json(&classify_regime(&params))?,
    });
    if method == Method::Pert4 {
        out["snr_4th"] = to_json(&snr_4th(&params, theta)?)?;
    }
    Ok(out)
}

fn sweep(a: &SweepArgs) -> Result<Value> {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg = parse_config(&text)?;
    let table = run_sweep(&cfg, a.jobs);
    emit_csv(&table, &a.out)?;
    if let Some(script) = &a.gnuplot {
        let x = cfg
            .axes
            .first()
            .map(|ax| ax.parameter.as_str())
            .ok_or_else(|| EngineError::Config("a gnuplot script needs at least one axis".into()))?;
        let skip = ["method", "regime", "error", "k", "probability"];
        let ys: Vec<&str> = table.header[cfg.axes.len()..]
            .iter()
            .map(String::as_str)
            .filter(|h| !skip.contains(h))
            .collect();
        let text = gnuplot_script(&table, &a.out.to_string_lossy(), x, &ys)?;
        std::fs::write(script, text)?;
    }
    let errors = table
        .column_index("error")
        .map_or(0, |i| table.rows.iter().filter(|r| !r[i].to_string().is_empty()).count());
    Ok(json!({
        "rows": table.rows.len(),
        "columns": table.header,
        "rows_with_errors": errors,
        "out": a.out,
    }))
}

fn optimize(a: &OptimizeArgs) -> Result<Value> {
    let objective = Objective::parse(&a.objective)
        .ok_or_else(|| EngineError::Config(format!("unknown objective `{}`", a.objective)))?;
    let p = &a.physics;
    let result = match a.family.as_str() {
        "nm" => {
            let mut full = p.clone();
            full.n.get_or_insert(1);
            full.m.get_or_insert(1);
            let base = full.params(Coupling::DirectTheta { theta: 0.0 })?;
            optimize_nm(&base, objective, a.alpha, a.n_max, a.m_max)?
        }
        "xmax" => optimize_xmax(
            objective,
            need(p.x, "x")?,
            need(p.y, "y")?,
            need(a.beta_omega_a, "beta-omega-a")?,
            a.alpha,
        )?,
        "freq21" | "freq12" => {
            let variant = if a.family == "freq21" { ShgVariant::V21 } else { ShgVariant::V12 };
            let search = FrequencySearch {
                jobs: a.jobs,
                ..FrequencySearch::default()
            };
            optimize_frequency_4th(variant, objective, need(p.beta_a, "beta-a")?, need(p.y, "y")?, a.alpha, &search)?
        }
        other => return Err(EngineError::Config(format!("unknown family `{other}`"))),
    };
    let mut v = to_json(&result)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("grid_trace");
    }
    Ok(v)
}

fn validate(a: &ValidateArgs) -> Result<Value> {
    let params = a.physics.params(Coupling::DirectTheta { theta: a.theta_max })?;
    let report = validate_convergence(&params, a.theta_max, a.halvings, &a.oracle.tolerances()?)?;
    let mut v = to_json(&report)?;
    v["accepted"] = json!(report.accepted());
    Ok(v)
}

fn tur(a: &TurArgs) -> Result<Value> {
    let order = Order::from_int(a.order)?;
    let params = a.physics.params(Coupling::AlphaFraction { alpha: a.alpha, order })?;
    params.coupling.validate()?;
    let theta = resolve_theta(&params)?;
    let (method, moments) = match order {
        Order::Second => (Method::Pert2, moments_2nd(&params, theta)?),
        Order::Fourth => (Method::Pert4, moments_4th(&params, theta)?),
    };
    let delta = delta_of(&params);
    let report = tur_report(&params, &moments, method, a.alpha, delta)?;
    let mut v = to_json(&report)?;
    v["theta"] = json!(theta);
    v["delta"] = json!(delta);
    if order == Order::Fourth {
        v["snr_4th"] = to_json(&snr_4th(&params, theta)?)?;
    }
    Ok(v)
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Optimize(a) => optimize(a),
        Command::Validate(a) => validate(a),
        Command::Tur(a) => tur(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("serializable");
            match writeln!(std::io::stdout().lock(), "{text}") {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(5)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
