//! Working-point optimizers over closed-form objectives.
//!
//! All searches are deterministic: fixed grids, golden-section refinement
//! and first-maximum-wins argmax in index order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::fock::MAX_FACTORIAL;
use crate::par::map_ordered;
use crate::params::{Coupling, EngineParams, Order, ShgVariant};
use crate::perturbative::{moments_4th, resolve_theta, snr_4th, tanh_half};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MeanWork,
    Snr,
}

impl Objective {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean-work" | "mean_work" => Some(Objective::MeanWork),
            "snr" => Some(Objective::Snr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Grid,
    GoldenSection,
    GridThenRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Coordinates in the order of [`OptimizationResult::trace_axes`].
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub objective: Objective,
    pub argmax: BTreeMap<String, f64>,
    pub value: f64,
    pub trace_axes: Vec<String>,
    pub grid_trace: Vec<TracePoint>,
    pub method: SearchMethod,
    /// Family-specific side results (analytic approximations, gaps).
    pub extras: BTreeMap<String, f64>,
}

// ---------------------------------------------------------------------------
// objectives at second order, alpha convention

/// Second-order mean work with `theta = sqrt(alpha) theta_bar_2`, written
/// with real `n`, `m`: `alpha omega_a (n - m x) tanh(beta_a omega_a (m x y - n) / 2)`.
pub fn mean_work_nm(alpha: f64, omega_a: f64, beta_omega_a: f64, x: f64, y: f64, n: f64, m: f64) -> f64 {
    alpha * omega_a * (n - m * x) * (0.5 * beta_omega_a * (m * x * y - n)).tanh()
}

/// Second-order SNR in the same convention: `alpha tanh^2(z/2)`.
pub fn snr_nm(alpha: f64, beta_omega_a: f64, x: f64, y: f64, n: f64, m: f64) -> f64 {
    let t = tanh_half(beta_omega_a * (m * x * y - n));
    alpha * t * t
}

/// Maximize over integer pairs with `x < n/m < x y`. Ties go to the
/// smaller `n + m`, then the smaller `n`.
pub fn optimize_nm(
    base: &EngineParams,
    objective: Objective,
    alpha: f64,
    n_max: u32,
    m_max: u32,
) -> Result<OptimizationResult> {
    if n_max == 0 || m_max == 0 || n_max > MAX_FACTORIAL || m_max > MAX_FACTORIAL {
        return Err(EngineError::Range(format!(
            "n_max and m_max must lie in [1, {MAX_FACTORIAL}], got ({n_max}, {m_max})"
        )));
    }
    check_alpha(alpha)?;
    let (x, y, u, wa) = (base.x(), base.y(), base.beta_omega_a(), base.omega_a);
    let mut pairs: Vec<(u32, u32)> = (1..=n_max)
        .flat_map(|n| (1..=m_max).map(move |m| (n, m)))
        .filter(|&(n, m)| {
            let r = n as f64 / m as f64;
            x < r && r < x * y
        })
        .collect();
    if pairs.is_empty() {
        return Err(EngineError::NoFeasiblePair { n_max, m_max });
    }
    pairs.sort_by_key(|&(n, m)| (n + m, n));
    let eval = |n: u32, m: u32| match objective {
        Objective::MeanWork => mean_work_nm(alpha, wa, u, x, y, n as f64, m as f64),
        Objective::Snr => snr_nm(alpha, u, x, y, n as f64, m as f64),
    };
    let trace: Vec<TracePoint> = pairs
        .iter()
        .map(|&(n, m)| TracePoint {
            point: vec![n as f64, m as f64],
            value: eval(n, m),
        })
        .collect();
    let best = first_max(&trace).expect("non-empty");
    let (n, m) = (best.point[0], best.point[1]);
    Ok(OptimizationResult {
        objective,
        argmax: BTreeMap::from([("n".into(), n), ("m".into(), m)]),
        value: best.value,
        trace_axes: vec!["n".into(), "m".into()],
        grid_trace: trace,
        method: SearchMethod::Grid,
        extras: BTreeMap::new(),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EngineError::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn first_max_index(trace: &[TracePoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in trace.iter().enumerate() {
        if t.value.is_nan() {
            continue;
        }
        if best.is_none_or(|b| t.value > trace[b].value) {
            best = Some(i);
        }
    }
    best
}

fn first_max(trace: &[TracePoint]) -> Option<&TracePoint> {
    first_max_index(trace).map(|i| &trace[i])
}

// ---------------------------------------------------------------------------
// 1D: golden section

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize `f` on `[a, b]` by golden-section search, to absolute
/// tolerance `tol` in the argument.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Coarse scan, then golden section inside the bracket around the best
/// sample. The returned value is never below the best scanned sample.
fn scan_then_golden<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, samples: usize) -> (f64, f64, Vec<TracePoint>) {
    let step = (hi - lo) / (samples - 1) as f64;
    let trace: Vec<TracePoint> = (0..samples)
        .map(|i| {
            let x = lo + step * i as f64;
            TracePoint {
                point: vec![x],
                value: f(x),
            }
        })
        .collect();
    let best_idx = first_max_index(&trace).expect("non-empty scan");
    let a = lo + step * best_idx.saturating_sub(1) as f64;
    let b = (lo + step * (best_idx + 1) as f64).min(hi);
    let (x, fx) = golden_section_max(f, a, b, 1e-12 * (hi - lo).abs().max(1e-300));
    let incumbent = &trace[best_idx];
    if fx >= incumbent.value {
        (x, fx, trace)
    } else {
        (incumbent.point[0], incumbent.value, trace)
    }
}

/// Maximize the second-order objective over continuous `x_max = n/m`
/// (with `m = 1`, `omega_a = 1`) in `(x, x y)`.
///
/// `extras` carries the quadratic-regime approximation `x (y + 1) / 2` and
/// the relative gap between it and the numeric optimum. When `y <= 1` the
/// window is empty; the search then covers `[x min(1,y) / 2, 2 x max(1,y)]`,
/// where the objective is non-positive.
pub fn optimize_xmax(objective: Objective, x: f64, y: f64, beta_omega_a: f64, alpha: f64) -> Result<OptimizationResult> {
    for (name, v) in [("x", x), ("y", y), ("beta_a*omega_a", beta_omega_a)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(EngineError::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    check_alpha(alpha)?;
    let (lo, hi) = if y > 1.0 {
        (x, x * y)
    } else {
        (0.5 * x * y.min(1.0), 2.0 * x * y.max(1.0))
    };
    let f = |xm: f64| match objective {
        Objective::MeanWork => mean_work_nm(alpha, 1.0, beta_omega_a, x, y, xm, 1.0),
        Objective::Snr => snr_nm(alpha, beta_omega_a, x, y, xm, 1.0),
    };
    let (best, value, trace) = scan_then_golden(&f, lo, hi, 257);
    let analytic = x * (y + 1.0) / 2.0;
    Ok(OptimizationResult {
        objective,
        argmax: BTreeMap::from([("x_max".into(), best)]),
        value,
        trace_axes: vec!["x_max".into()],
        grid_trace: trace,
        method: SearchMethod::GoldenSection,
        extras: BTreeMap::from([
            ("analytic_x_max".into(), analytic),
            ("relative_gap".into(), (best - analytic).abs() / analytic),
        ]),
    })
}

// ---------------------------------------------------------------------------
// 2D: grid then refine

/// Log-spaced 2D grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub refinements: usize,
    /// Spacing shrink factor per refinement.
    pub zoom: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 64,
            refinements: 2,
            zoom: 8,
        }
    }
}

/// Maximize `f(u, v)` over a log-spaced box. Each refinement re-grids
/// `+-1` old spacing around the incumbent with `zoom` times finer steps.
/// Non-finite values mark infeasible points and are left out of the trace.
pub fn grid_then_refine_2d<F>(
    f: F,
    u_range: (f64, f64),
    v_range: (f64, f64),
    spec: GridSpec,
    jobs: usize,
) -> Result<(f64, f64, f64, Vec<TracePoint>)>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    if spec.points < 2 || spec.zoom < 1 {
        return Err(EngineError::Config("grid needs >= 2 points per axis and zoom >= 1".into()));
    }
    let (mut lu0, mut lu1) = (u_range.0.ln(), u_range.1.ln());
    let (mut lv0, mut lv1) = (v_range.0.ln(), v_range.1.ln());
    let mut n = spec.points;
    let mut trace = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for level in 0..=spec.refinements {
        let du = (lu1 - lu0) / (n - 1) as f64;
        let dv = (lv1 - lv0) / (n - 1) as f64;
        let rows: Vec<usize> = (0..n).collect();
        let evaluated = map_ordered(&rows, jobs, |&i| {
            let u = (lu0 + du * i as f64).exp();
            (0..n)
                .map(|j| {
                    let v = (lv0 + dv * j as f64).exp();
                    (u, v, f(u, v))
                })
                .collect::<Vec<_>>()
        });
        let mut level_best: Option<(f64, f64, f64)> = None;
        for (u, v, val) in evaluated.into_iter().flatten() {
            if !val.is_finite() {
                continue;
            }
            trace.push(TracePoint {
                point: vec![u, v],
                value: val,
            });
            if level_best.is_none_or(|b| val > b.2) {
                level_best = Some((u, v, val));
            }
        }
        if let Some(lb) = level_best {
            if best.is_none_or(|b| lb.2 > b.2) {
                best = Some(lb);
            }
        }
        let Some((bu, bv, _)) = best else {
            return Err(EngineError::Domain("no feasible point on the search grid".into()));
        };
        if level < spec.refinements {
            let (cu, cv) = (bu.ln(), bv.ln());
            lu0 = (cu - du).max(u_range.0.ln());
            lu1 = (cu + du).min(u_range.1.ln());
            lv0 = (cv - dv).max(v_range.0.ln());
            lv1 = (cv + dv).min(v_range.1.ln());
            n = 2 * spec.zoom + 1;
        }
    }
    let (u, v, val) = best.expect("checked above");
    Ok((u, v, val, trace))
}

/// Search box for [`optimize_frequency_4th`], in `beta_a omega_a` and `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySearch {
    pub beta_omega_min: f64,
    pub beta_omega_max: f64,
    pub grid: GridSpec,
    pub jobs: usize,
}

impl Default for FrequencySearch {
    fn default() -> Self {
        Self {
            beta_omega_min: 1e-2,
            beta_omega_max: 20.0,
            grid: GridSpec::default(),
            jobs: 0,
        }
    }
}

/// Fourth-order objective at one point, `None` outside the heat-engine
/// window of the variant.
pub fn frequency_objective(
    variant: ShgVariant,
    objective: Objective,
    beta_a: f64,
    y: f64,
    alpha: f64,
    omega_a: f64,
    x: f64,
) -> Option<f64> {
    let (n, m) = variant.nm();
    let ratio = n as f64 / m as f64;
    if !(x > ratio / y && x < ratio) {
        return None;
    }
    let params = EngineParams::from_ratios(
        n,
        m,
        omega_a,
        beta_a,
        x,
        y,
        Coupling::AlphaFraction {
            alpha,
            order: Order::Fourth,
        },
    )
    .ok()?;
    let theta = resolve_theta(&params).ok()?;
    match objective {
        Objective::MeanWork => moments_4th(&params, theta).ok().map(|r| r.mean_w),
        Objective::Snr => snr_4th(&params, theta).ok().map(|s| s.snr),
    }
}

/// Jointly maximize the fourth-order objective of a SHG variant over
/// `(omega_a, x)` at fixed `beta_a`, `y` and `alpha`.
pub fn optimize_frequency_4th(
    variant: ShgVariant,
    objective: Objective,
    beta_a: f64,
    y: f64,
    alpha: f64,
    search: &FrequencySearch,
) -> Result<OptimizationResult> {
    check_alpha(alpha)?;
    if !(beta_a > 0.0 && beta_a.is_finite() && y > 1.0 && y.is_finite()) {
        return Err(EngineError::Domain(format!(
            "need beta_a > 0 and y > 1 for a heat-engine window, got beta_a = {beta_a}, y = {y}"
        )));
    }
    let (n, m) = variant.nm();
    let ratio = n as f64 / m as f64;
    // stay strictly inside (ratio / y, ratio)
    let margin = 1e-9;
    let x_range = (ratio / y * (1.0 + margin), ratio * (1.0 - margin));
    let u_range = (search.beta_omega_min / beta_a, search.beta_omega_max / beta_a);
    let (omega_a, x, value, trace) = grid_then_refine_2d(
        |wa, x| frequency_objective(variant, objective, beta_a, y, alpha, wa, x).unwrap_or(f64::NAN),
        u_range,
        x_range,
        search.grid,
        search.jobs,
    )?;
    Ok(OptimizationResult {
        objective,
        argmax: BTreeMap::from([
            ("omega_a".into(), omega_a),
            ("x".into(), x),
            ("beta_a_omega_a".into(), omega_a * beta_a),
        ]),
        value,
        trace_axes: vec!["omega_a".into(), "x".into()],
        grid_trace: trace,
        method: SearchMethod::GridThenRefine,
        extras: BTreeMap::new(),
    })
}
