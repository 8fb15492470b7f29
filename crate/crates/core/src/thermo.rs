//! Operating regimes, efficiency, entropy production and TUR bounds.

use serde::{Deserialize, Serialize};

use crate::distribution::{Method, MomentReport};
use crate::error::{EngineError, Result};
use crate::params::{EngineParams, Order, ShgVariant, ThermalOccupations};
use crate::perturbative::{theta_bar, FourthOrderCoefficients};

/// Relative distance from a regime edge treated as "on the edge".
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Work extracted, heat flows from the hot bath A to the cold bath B.
    HeatEngine,
    /// Work spent to move heat from the colder bath into the hotter one.
    Refrigerator,
    /// Work spent while heat still flows from hot to cold.
    ThermalAccelerator,
    /// Work extracted with B as the hot bath (only when `T_B > T_A`).
    ReversedHeatEngine,
    /// Within [`BOUNDARY_TOLERANCE`] of `x_min` or `x_max`.
    Boundary,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::HeatEngine => "heat_engine",
            Regime::Refrigerator => "refrigerator",
            Regime::ThermalAccelerator => "thermal_accelerator",
            Regime::ReversedHeatEngine => "reversed_heat_engine",
            Regime::Boundary => "boundary",
        }
    }
}

/// Signs of `(<W>, <Q_H>, <Q_C>)`: each is -1, 0 or +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPattern {
    pub work: i8,
    pub heat_hot: i8,
    pub heat_cold: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `omega_b / omega_a`
    pub x: f64,
    /// `n T_B / (m T_A)`
    pub x_min: f64,
    /// `n / m`
    pub x_max: f64,
    /// `1 - x / x_max`, present in the heat-engine window (edges included).
    pub efficiency: Option<f64>,
    /// `1 - T_B / T_A`
    pub carnot: f64,
    /// `carnot * n / m`
    pub operation_range: f64,
    pub signs: SignPattern,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOLERANCE * b.abs().max(a.abs())
}

pub fn classify_regime(params: &EngineParams) -> RegimeReport {
    let x = params.x();
    let ratio = params.n as f64 / params.m as f64;
    let x_max = ratio;
    let x_min = ratio / params.y();
    let carnot = 1.0 - 1.0 / params.y();

    let regime = if near(x, x_min) || near(x, x_max) {
        Regime::Boundary
    } else if x_min < x_max {
        if x < x_min {
            Regime::Refrigerator
        } else if x < x_max {
            Regime::HeatEngine
        } else {
            Regime::ThermalAccelerator
        }
    } else if x < x_max {
        Regime::ThermalAccelerator
    } else if x < x_min {
        Regime::ReversedHeatEngine
    } else {
        Regime::Refrigerator
    };

    let in_window = x_min < x_max
        && (x > x_min || near(x, x_min))
        && (x < x_max || near(x, x_max));
    let efficiency = in_window.then(|| 1.0 - x / x_max);

    // <k> has the sign of z; W = k eps, Q_H = k n omega_a, Q_C = -k m omega_b
    let k = sign(params.z());
    let signs = SignPattern {
        work: k * sign(params.epsilon()),
        heat_hot: k,
        heat_cold: -k,
    };
    RegimeReport {
        regime,
        x,
        x_min,
        x_max,
        efficiency,
        carnot,
        operation_range: carnot * ratio,
        signs,
    }
}

/// `<Sigma> = z / eps * <W>`.
pub fn entropy_production(params: &EngineParams, mean_w: f64) -> Result<f64> {
    if params.is_degenerate_quantum() {
        return Err(EngineError::DegenerateQuantum);
    }
    Ok(params.z() / params.epsilon() * mean_w)
}

/// `p(+1) / p(-1) = exp(m beta_b omega_b - n beta_a omega_a)`; saturates to
/// `+inf`.
pub fn emission_absorption_ratio(params: &EngineParams) -> f64 {
    params.z().exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurReport {
    /// `var(W) / <W>^2`
    pub rf: f64,
    pub snr: f64,
    pub sigma: f64,
    /// `rf * sigma`; the standard TUR reads `rf * sigma >= 2`.
    pub rf_sigma: f64,
    /// RF bound `2 / <Sigma>`.
    pub standard_bound: f64,
    /// RF bound `2 / <Sigma> + 1`; proven for the swap only.
    pub tight_swap_bound: f64,
    /// SNR bound `(<Sigma>/2) (1 - alpha theta_bar_4^2 Delta)^(-1)`.
    pub fourth_bound: Option<f64>,
    /// SNR bound `(<Sigma>/2) (1 - alpha)^(-1)`.
    pub asymptotic_fourth: Option<f64>,
    /// `snr > <Sigma>/2`
    pub violates_standard: bool,
}

/// TUR diagnostics for one moment report. `delta` is used only for
/// fourth-order runs.
pub fn tur_report(
    params: &EngineParams,
    moments: &MomentReport,
    method: Method,
    alpha: f64,
    delta: Option<f64>,
) -> Result<TurReport> {
    if moments.mean_w == 0.0 {
        return Err(EngineError::UndefinedRf);
    }
    let sigma = entropy_production(params, moments.mean_w)?;
    let rf = moments.var_w / (moments.mean_w * moments.mean_w);
    let snr = 1.0 / rf;
    let (fourth_bound, asymptotic_fourth) = match (method, delta) {
        (Method::Pert4, Some(d)) => {
            let bar = theta_bar(params, Order::Fourth)?.theta_bar;
            (
                Some(0.5 * sigma / (1.0 - alpha * bar * bar * d)),
                Some(0.5 * sigma / (1.0 - alpha)),
            )
        }
        _ => (None, None),
    };
    Ok(TurReport {
        rf,
        snr,
        sigma,
        rf_sigma: rf * sigma,
        standard_bound: 2.0 / sigma,
        tight_swap_bound: 2.0 / sigma + 1.0,
        fourth_bound,
        asymptotic_fourth,
        violates_standard: snr > 0.5 * sigma,
    })
}

/// `Delta` of a fourth-order variant as a function of `beta_a omega_a`
/// and `x`, at fixed `y = beta_b / beta_a`.
pub fn delta_at(variant: ShgVariant, beta_omega_a: f64, x: f64, y: f64) -> Result<f64> {
    let occ = |bw: f64| 1.0 / bw.exp_m1();
    FourthOrderCoefficients::from_occupations(
        ThermalOccupations {
            n_a: occ(beta_omega_a),
            n_b: occ(beta_omega_a * x * y),
        },
        variant,
    )
    .delta()
}

/// `min_x Delta` over the given frequency ratios.
pub fn min_delta(variant: ShgVariant, beta_omega_a: f64, xs: &[f64], y: f64) -> Result<f64> {
    xs.iter()
        .map(|&x| delta_at(variant, beta_omega_a, x, y))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

/// Smallest `beta_a omega_a` above which `Delta > 0` for every `x` in `xs`.
///
/// Scans `beta_a omega_a` in `[lo, hi]` for the last non-positive sample of
/// `min_x Delta`, then bisects the sign change.
pub fn delta_positivity_threshold(
    variant: ShgVariant,
    xs: &[f64],
    y: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if xs.is_empty() || !(lo > 0.0 && hi > lo) {
        return Err(EngineError::Config(
            "threshold search needs x values and 0 < lo < hi".into(),
        ));
    }
    let f = |u: f64| min_delta(variant, u, xs, y);
    let steps = 2000;
    let mut last_bad: Option<usize> = None;
    for s in 0..=steps {
        let u = lo + (hi - lo) * s as f64 / steps as f64;
        if f(u)? <= 0.0 {
            last_bad = Some(s);
        }
    }
    let Some(s) = last_bad else {
        return Ok(lo);
    };
    if s == steps {
        return Err(EngineError::Domain(format!(
            "Delta is not positive for every x anywhere below beta_a*omega_a = {hi}"
        )));
    }
    let mut a = lo + (hi - lo) * s as f64 / steps as f64;
    let mut b = lo + (hi - lo) * (s + 1) as f64 / steps as f64;
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if f(mid)? <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(b)
}
