//! Closed-form perturbative results in the coupling `theta`.
//!
//! Second order covers every `(n, m)`; fourth order covers the two
//! second-harmonic variants `(2, 1)` and `(1, 2)`. All functions are pure
//! and cheap, so they are the workhorse of sweeps and optimizers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distribution::{MomentReport, Method, WorkHeatDistribution, WorkPoint};
use crate::error::{EngineError, Result};
use crate::fock::factorial;
use crate::params::{Coupling, EngineParams, Order, ShgVariant, ThermalOccupations};

/// Below this magnitude the hyperbolic helpers switch to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;

/// Relative slack when comparing a coupling against its bound, so that
/// `theta = theta_bar` computed through `sqrt(alpha)` round trips is accepted.
const BOUND_SLACK: f64 = 1e-12;

pub(crate) fn tanh_half(z: f64) -> f64 {
    (0.5 * z).tanh()
}

/// `tanh(z/2) / z`, regular at `z = 0`.
pub fn tanh_half_over(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        0.5 - z * z / 24.0
    } else {
        tanh_half(z) / z
    }
}

/// `h(z) = z coth(z/2)`; `h >= 2` with equality only at `z = 0`.
pub fn h_function(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        2.0 + z * z / 6.0
    } else {
        z / tanh_half(z)
    }
}

/// `coth(z/2)^2`; infinite at `z = 0`.
pub fn coth_half_squared(z: f64) -> f64 {
    if z == 0.0 {
        return f64::INFINITY;
    }
    if z.abs() < SERIES_CUTOFF {
        // coth(u) = 1/u + u/3 + ..., u = z/2
        let u = 0.5 * z;
        let c = 1.0 / u + u / 3.0;
        return c * c;
    }
    let t = tanh_half(z);
    1.0 / (t * t)
}

// ---------------------------------------------------------------------------
// second order, general (n, m)

/// `emit = n! m! N_A^n (N_B+1)^m`, `absorb = n! m! (N_A+1)^n N_B^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCoefficients {
    pub emit: f64,
    pub absorb: f64,
}

impl SecondOrderCoefficients {
    pub fn sum(&self) -> f64 {
        self.emit + self.absorb
    }

    pub fn difference(&self) -> f64 {
        self.emit - self.absorb
    }
}

pub fn second_order_coefficients(params: &EngineParams) -> Result<SecondOrderCoefficients> {
    let occ = params.occupations();
    let (n, m) = (params.n as i32, params.m as i32);
    let weight = factorial(params.n)? * factorial(params.m)?;
    Ok(SecondOrderCoefficients {
        emit: weight * occ.n_a.powi(n) * (occ.n_b + 1.0).powi(m),
        absorb: weight * (occ.n_a + 1.0).powi(n) * occ.n_b.powi(m),
    })
}

/// Largest coupling keeping the truncated distribution non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBound {
    /// `f64::INFINITY` when no transition is possible at this order.
    pub theta_bar: f64,
    pub order: Order,
}

impl CouplingBound {
    pub fn is_unbounded(&self) -> bool {
        self.theta_bar.is_infinite()
    }

    /// `theta = sqrt(alpha) * theta_bar`.
    pub fn theta_for_alpha(&self, alpha: f64) -> f64 {
        alpha.sqrt() * self.theta_bar
    }

    fn admits(&self, theta: f64) -> bool {
        theta <= self.theta_bar * (1.0 + BOUND_SLACK)
    }

    fn check(&self, theta: f64) -> Result<()> {
        if self.admits(theta) {
            Ok(())
        } else {
            Err(EngineError::CouplingBound {
                theta,
                theta_bar: self.theta_bar,
                order: self.order.as_str(),
            })
        }
    }
}

fn bound_from_bracket(bracket: f64, order: Order) -> CouplingBound {
    let theta_bar = if bracket > 0.0 {
        bracket.powf(-0.5)
    } else {
        f64::INFINITY
    };
    CouplingBound { theta_bar, order }
}

/// Coupling bound at the requested order.
///
/// Second order: `[n! m! ((N_A+1)^n N_B^m + N_A^n (N_B+1)^m)]^(-1/2)`.
/// Fourth order (SHG variants only): `(2B)^(-1/2)`.
pub fn theta_bar(params: &EngineParams, order: Order) -> Result<CouplingBound> {
    match order {
        Order::Second => Ok(bound_from_bracket(
            second_order_coefficients(params)?.sum(),
            order,
        )),
        Order::Fourth => {
            let variant = ShgVariant::of(params.n, params.m)?;
            let c = fourth_order_coefficients(params, variant)?;
            Ok(bound_from_bracket(2.0 * c.b, order))
        }
    }
}

/// Resolve the coupling specification of `params` to a bare `theta`.
pub fn resolve_theta(params: &EngineParams) -> Result<f64> {
    match params.coupling {
        Coupling::DirectTheta { theta } => Ok(theta),
        Coupling::AlphaFraction { alpha, order } => {
            let bound = theta_bar(params, order)?;
            if bound.is_unbounded() {
                return Err(EngineError::Domain(format!(
                    "alpha fraction of an unbounded {} order coupling is undefined",
                    order.as_str()
                )));
            }
            Ok(bound.theta_for_alpha(alpha))
        }
    }
}

/// Effective alpha of a coupling with respect to the bound at `order`.
pub fn alpha_of(params: &EngineParams, theta: f64, order: Order) -> Result<f64> {
    let bound = theta_bar(params, order)?;
    Ok(if bound.is_unbounded() {
        0.0
    } else {
        (theta / bound.theta_bar).powi(2)
    })
}

/// Characteristic function to second order, as a function of the phase
/// `xi = lambda (n omega_a - m omega_b) + mu n omega_a`:
///
/// `1 + theta^2 [ (emit + absorb)(cos xi - 1) + i (emit - absorb) sin xi ]`.
pub fn char_fn_2nd(params: &EngineParams, theta: f64, xi: f64) -> Result<Complex64> {
    let c = second_order_coefficients(params)?;
    let t = theta * theta;
    Ok(Complex64::new(
        1.0 + t * c.sum() * (xi.cos() - 1.0),
        t * c.difference() * xi.sin(),
    ))
}

/// Three-point distribution at order `theta^2`.
pub fn work_distribution_2nd(params: &EngineParams, theta: f64) -> Result<WorkHeatDistribution> {
    theta_bar(params, Order::Second)?.check(theta)?;
    let c = second_order_coefficients(params)?;
    let t = theta * theta;
    let points = vec![
        WorkPoint {
            k: -1,
            probability: t * c.absorb,
        },
        WorkPoint {
            k: 0,
            probability: 1.0 - t * c.sum(),
        },
        WorkPoint {
            k: 1,
            probability: t * c.emit,
        },
    ];
    Ok(WorkHeatDistribution::new(params, points, 0.0, Method::Pert2))
}

/// Moments at order `theta^2`. The variance equals the second moment at
/// this order (the `<W>^2` term is `O(theta^4)`).
pub fn moments_2nd(params: &EngineParams, theta: f64) -> Result<MomentReport> {
    let bound = theta_bar(params, Order::Second)?;
    let c = second_order_coefficients(params)?;
    let t = theta * theta;
    let mean_k = t * c.difference();
    let second_k = t * c.sum();
    let mut r = MomentReport::from_k_moments(params, mean_k, second_k, second_k, Method::Pert2);
    r.exceeds_coupling_bound = !bound.admits(theta);
    Ok(r)
}

/// Mean work with `theta = sqrt(alpha) theta_bar_2`:
/// `alpha (n omega_a - m omega_b) tanh(z/2)`.
pub fn mean_work_alpha(params: &EngineParams, alpha: f64) -> f64 {
    alpha * params.epsilon() * tanh_half(params.z())
}

/// The same mean work written through `x`, `y` and `beta_a omega_a`, with
/// real-valued `n`, `m` so that `x_max = n/m` can be swept continuously.
pub fn mean_work_ratio_form(
    alpha: f64,
    omega_a: f64,
    beta_omega_a: f64,
    x: f64,
    y: f64,
    n: f64,
    m: f64,
) -> f64 {
    alpha * omega_a * (n - m * x) * (0.5 * beta_omega_a * (m * x * y - n)).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeFluctuations {
    /// `(1/alpha) coth^2(z/2)`; infinite at `z = 0`.
    pub rf: f64,
    /// `(1/alpha) coth^2(m omega_b (beta_b - beta_a)/2)`.
    pub rf_lower_bound: f64,
    /// `<Sigma>` at the same coupling.
    pub sigma: f64,
    /// `h(z) / <Sigma>`; equals `rf` identically.
    pub h_over_sigma: f64,
    /// False outside the heat-engine window; values are still computed.
    pub heat_engine: bool,
}

pub fn relative_fluctuations_2nd(params: &EngineParams, alpha: f64) -> Result<RelativeFluctuations> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let z = params.z();
    let rf = coth_half_squared(z) / alpha;
    let lower_arg = params.m as f64 * params.omega_b * (params.beta_b - params.beta_a);
    let rf_lower_bound = coth_half_squared(lower_arg) / alpha;
    let sigma = z * alpha * tanh_half(z);
    let h_over_sigma = if sigma == 0.0 {
        f64::INFINITY
    } else {
        h_function(z) / sigma
    };
    Ok(RelativeFluctuations {
        rf,
        rf_lower_bound,
        sigma,
        h_over_sigma,
        heat_engine: params.epsilon() > 0.0 && z > 0.0,
    })
}

// ---------------------------------------------------------------------------
// fourth order, SHG variants

/// Fourth-order coefficients in the frame of the `(2, 1)` process.
///
/// For `(1, 2)` the same expressions hold with `N_A <-> N_B`, and the
/// support label flips sign (the `(2,1)`-frame emission is a `(1,2)`
/// absorption).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthOrderCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub variant: ShgVariant,
    /// `(P, Q)`: `(N_A, N_B)` for `V21`, `(N_B, N_A)` for `V12`.
    pub frame: ThermalOccupations,
}

impl FourthOrderCoefficients {
    pub fn from_occupations(occ: ThermalOccupations, variant: ShgVariant) -> Self {
        let frame = match variant {
            ShgVariant::V21 => occ,
            ShgVariant::V12 => occ.swapped(),
        };
        let (p, q) = (frame.n_a, frame.n_b);
        let emit = p * p * (q + 1.0);
        let absorb = (p + 1.0).powi(2) * q;
        Self {
            a: emit + absorb,
            b: (2.0 * q + 1.0) * (6.0 * p * p + 6.0 * p + 1.0)
                - 2.0 / 3.0 * (6.0 * p - 4.0 * q + 1.0),
            c: 3.0 * (emit * emit + absorb * absorb),
            d: emit - absorb,
            variant,
            frame,
        }
    }

    /// `+1` for `V21`, `-1` for `V12`: maps frame labels to physical `k`.
    fn orientation(&self) -> i64 {
        match self.variant {
            ShgVariant::V21 => 1,
            ShgVariant::V12 => -1,
        }
    }

    /// `6P - 4Q + 1`, the correction factor of the mean work.
    fn mean_correction(&self) -> f64 {
        6.0 * self.frame.n_a - 4.0 * self.frame.n_b + 1.0
    }

    /// `Delta = 1 - 4C/(AB) - D^2/(AB)`; positive values relax the
    /// standard TUR at fourth order.
    pub fn delta(&self) -> Result<f64> {
        let ab = self.a * self.b;
        if ab == 0.0 || !ab.is_finite() {
            return Err(EngineError::DegenerateOccupation);
        }
        Ok(1.0 - 4.0 * self.c / ab - self.d * self.d / ab)
    }
}

pub fn fourth_order_coefficients(
    params: &EngineParams,
    variant: ShgVariant,
) -> Result<FourthOrderCoefficients> {
    let actual = ShgVariant::of(params.n, params.m)?;
    if actual != variant {
        return Err(EngineError::Config(format!(
            "variant {variant:?} requested for (n, m) = ({}, {})",
            params.n, params.m
        )));
    }
    Ok(FourthOrderCoefficients::from_occupations(
        params.occupations(),
        variant,
    ))
}

fn coefficients_for(params: &EngineParams) -> Result<FourthOrderCoefficients> {
    let variant = ShgVariant::of(params.n, params.m)?;
    fourth_order_coefficients(params, variant)
}

/// Five-point distribution at order `theta^4`.
pub fn work_distribution_4th(params: &EngineParams, theta: f64) -> Result<WorkHeatDistribution> {
    let c = coefficients_for(params)?;
    bound_from_bracket(2.0 * c.b, Order::Fourth).check(theta)?;
    let t = theta * theta;
    let t2 = t * t;
    let (p, q) = (c.frame.n_a, c.frame.n_b);
    let s = c.orientation();
    let single = t - 2.0 * t2 * c.b;
    let frame = [
        (0, 1.0 - 2.0 * t * c.a + 4.0 * t2 * (c.a * c.b - c.c)),
        (1, 2.0 * p * p * (q + 1.0) * single),
        (-1, 2.0 * (p + 1.0).powi(2) * q * single),
        (2, 12.0 * t2 * p.powi(4) * (q + 1.0).powi(2)),
        (-2, 12.0 * t2 * (p + 1.0).powi(4) * q * q),
    ];
    let points = frame
        .iter()
        .map(|&(j, probability)| WorkPoint {
            k: s * j,
            probability,
        })
        .collect();
    Ok(WorkHeatDistribution::new(params, points, 0.0, Method::Pert4))
}

/// Moments at order `theta^4`:
///
/// `<k> = 2 theta^2 D [1 - (2/3) theta^2 (6P - 4Q + 1)]` (sign flipped for `V12`),
/// `<k^2> = 2 theta^2 [A - 2 theta^2 (AB - 4C)]`,
/// and the variance keeps the `<W>^2` term.
pub fn moments_4th(params: &EngineParams, theta: f64) -> Result<MomentReport> {
    let c = coefficients_for(params)?;
    let bound = bound_from_bracket(2.0 * c.b, Order::Fourth);
    let t = theta * theta;
    let mean_k = c.orientation() as f64
        * 2.0
        * t
        * c.d
        * (1.0 - 2.0 / 3.0 * t * c.mean_correction());
    let second_k = 2.0 * t * (c.a - 2.0 * t * (c.a * c.b - 4.0 * c.c));
    let mut r = MomentReport::from_k_moments(
        params,
        mean_k,
        second_k,
        second_k - mean_k * mean_k,
        Method::Pert4,
    );
    r.exceeds_coupling_bound = !bound.admits(theta);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthOrderSnr {
    /// `<Sigma> tanh(z/2)/z (1 - alpha theta_bar^2 Delta)^(-1)`.
    pub snr: f64,
    pub delta: f64,
    pub sigma: f64,
    /// `alpha theta_bar^2 = theta^2`.
    pub alpha_theta_bar_sq: f64,
}

/// Closed-form fourth-order SNR in terms of the mean entropy production.
pub fn snr_4th(params: &EngineParams, theta: f64) -> Result<FourthOrderSnr> {
    let c = coefficients_for(params)?;
    let delta = c.delta()?;
    if params.is_degenerate_quantum() {
        return Err(EngineError::DegenerateQuantum);
    }
    let moments = moments_4th(params, theta)?;
    let z = params.z();
    let sigma = z / params.epsilon() * moments.mean_w;
    let at2 = theta * theta;
    Ok(FourthOrderSnr {
        snr: sigma * tanh_half_over(z) / (1.0 - at2 * delta),
        delta,
        sigma,
        alpha_theta_bar_sq: at2,
    })
}

// ---------------------------------------------------------------------------
// comparison with the partial swap

/// Exact mean work of the `(1, 1)` partial swap at coupling `theta`.
pub fn swap_mean_work(params: &EngineParams, theta: f64) -> f64 {
    let occ = params.occupations();
    (occ.n_a - occ.n_b) * (params.omega_a - params.omega_b) * theta.sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRatioVariant {
    R21,
    R12,
}

/// `ln|sinh(v)|` and `sign(sinh(v))`, overflow-free.
fn ln_sinh(v: f64) -> (f64, f64) {
    let a = v.abs();
    (a + (-(-2.0 * a).exp_m1() * 0.5).ln(), v.signum())
}

/// Swap-to-SHG coupling ratio `theta_11^2 / theta_nm^2` giving equal
/// second-order mean work.
pub fn coupling_ratio(params: &EngineParams, variant: CouplingRatioVariant) -> Result<f64> {
    let x = params.x();
    if (x - 1.0).abs() <= 1e-12 {
        return Err(EngineError::SingularFrequency);
    }
    let u = params.beta_omega_a();
    let xy = params.beta_omega_b() / u;
    if (xy - 1.0).abs() <= 1e-12 {
        return Err(EngineError::Domain(
            "equal occupations: the swap extracts no work and the ratio diverges".into(),
        ));
    }
    let (prefactor, num, den2) = match variant {
        CouplingRatioVariant::R21 => ((2.0 - x) / (1.0 - x), 0.5 * u * (xy - 2.0), 0.5 * u),
        CouplingRatioVariant::R12 => (
            (1.0 - 2.0 * x) / (1.0 - x),
            0.5 * u * (2.0 * xy - 1.0),
            0.5 * xy * u,
        ),
    };
    if num == 0.0 {
        return Ok(0.0);
    }
    let (l_num, s_num) = ln_sinh(num);
    let (l_d1, s_d1) = ln_sinh(0.5 * u * (xy - 1.0));
    let (l_d2, s_d2) = ln_sinh(den2);
    Ok(prefactor * s_num * s_d1 * s_d2 * (l_num - l_d1 - l_d2).exp())
}
