//! Physical configuration of a two-mode engine.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::fock::thermal_occupation;

/// Perturbative order a coupling bound (or an alpha fraction) refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Second,
    Fourth,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Order::Second),
            4 => Ok(Order::Fourth),
            other => Err(EngineError::Config(format!(
                "order must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Order::Second => "second",
            Order::Fourth => "fourth",
        }
    }
}

/// How the coupling strength is specified.
///
/// The phase of a complex coupling is a passive rotation of mode A, so only
/// real non-negative couplings are represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Coupling {
    /// Bare coupling `theta >= 0`.
    DirectTheta { theta: f64 },
    /// `theta = sqrt(alpha) * theta_bar(order)`, `alpha` in (0, 1).
    AlphaFraction { alpha: f64, order: Order },
}

impl Coupling {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Coupling::DirectTheta { theta } => {
                if !(theta.is_finite() && theta >= 0.0) {
                    return Err(EngineError::Domain(format!(
                        "coupling theta must be real and non-negative, got {theta}"
                    )));
                }
            }
            Coupling::AlphaFraction { alpha, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(EngineError::Domain(format!(
                        "alpha fraction must lie in (0, 1), got {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The two second-harmonic variants with fourth-order closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShgVariant {
    /// n = 2, m = 1
    V21,
    /// n = 1, m = 2
    V12,
}

impl ShgVariant {
    pub fn of(n: u32, m: u32) -> Result<Self> {
        match (n, m) {
            (2, 1) => Ok(ShgVariant::V21),
            (1, 2) => Ok(ShgVariant::V12),
            _ => Err(EngineError::UnsupportedVariant { n, m }),
        }
    }

    pub fn nm(self) -> (u32, u32) {
        match self {
            ShgVariant::V21 => (2, 1),
            ShgVariant::V12 => (1, 2),
        }
    }
}

/// Full physical configuration: `V = exp(theta a^dag^n b^m - theta a^n b^dag^m)`
/// acting on thermal modes A (hot bath) and B (cold bath). Natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub n: u32,
    pub m: u32,
    pub omega_a: f64,
    pub omega_b: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub coupling: Coupling,
}

impl EngineParams {
    pub fn new(
        n: u32,
        m: u32,
        omega_a: f64,
        omega_b: f64,
        beta_a: f64,
        beta_b: f64,
        coupling: Coupling,
    ) -> Result<Self> {
        let p = Self {
            n,
            m,
            omega_a,
            omega_b,
            beta_a,
            beta_b,
            coupling,
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from dimensionless ratios: `x = omega_b/omega_a`, `y = beta_b/beta_a`.
    pub fn from_ratios(
        n: u32,
        m: u32,
        omega_a: f64,
        beta_a: f64,
        x: f64,
        y: f64,
        coupling: Coupling,
    ) -> Result<Self> {
        Self::new(n, m, omega_a, x * omega_a, beta_a, y * beta_a, coupling)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(EngineError::Domain(format!(
                "n and m must be >= 1, got ({}, {})",
                self.n, self.m
            )));
        }
        for (name, v) in [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("beta_a", self.beta_a),
            ("beta_b", self.beta_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EngineError::Domain(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        self.coupling.validate()
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_theta(self, theta: f64) -> Self {
        self.with_coupling(Coupling::DirectTheta { theta })
    }

    /// Frequency ratio `omega_b / omega_a`.
    pub fn x(&self) -> f64 {
        self.omega_b / self.omega_a
    }

    /// Inverse-temperature ratio `beta_b / beta_a`.
    pub fn y(&self) -> f64 {
        self.beta_b / self.beta_a
    }

    pub fn beta_omega_a(&self) -> f64 {
        self.beta_a * self.omega_a
    }

    pub fn beta_omega_b(&self) -> f64 {
        self.beta_b * self.omega_b
    }

    /// Work quantum `n omega_a - m omega_b`.
    pub fn epsilon(&self) -> f64 {
        self.n as f64 * self.omega_a - self.m as f64 * self.omega_b
    }

    /// Heat quantum `n omega_a` drawn from the hot bath per conversion event.
    pub fn heat_quantum(&self) -> f64 {
        self.n as f64 * self.omega_a
    }

    /// Detailed-balance exponent `m beta_b omega_b - n beta_a omega_a`.
    pub fn z(&self) -> f64 {
        self.m as f64 * self.beta_omega_b() - self.n as f64 * self.beta_omega_a()
    }

    /// True when `n omega_a == m omega_b` up to roundoff.
    pub fn is_degenerate_quantum(&self) -> bool {
        self.epsilon().abs() <= 4.0 * f64::EPSILON * self.heat_quantum()
    }

    pub fn occupations(&self) -> ThermalOccupations {
        ThermalOccupations {
            n_a: thermal_occupation(self.beta_a, self.omega_a)
                .expect("validated params have positive beta*omega"),
            n_b: thermal_occupation(self.beta_b, self.omega_b)
                .expect("validated params have positive beta*omega"),
        }
    }
}

/// Mean thermal populations `N_A`, `N_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOccupations {
    pub n_a: f64,
    pub n_b: f64,
}

impl ThermalOccupations {
    pub fn swapped(self) -> Self {
        Self {
            n_a: self.n_b,
            n_b: self.n_a,
        }
    }

    /// `N/(N+1) = exp(-beta omega)` for mode A.
    pub fn ratio_a(&self) -> f64 {
        self.n_a / (self.n_a + 1.0)
    }

    pub fn ratio_b(&self) -> f64 {
        self.n_b / (self.n_b + 1.0)
    }
}
