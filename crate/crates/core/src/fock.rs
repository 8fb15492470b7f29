//! Truncated single-mode Fock-space primitives: ladder operators, Gibbs
//! states and their normal/antinormal moments.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// Largest factorial argument evaluated exactly (20! < 2^63).
pub const MAX_FACTORIAL: u32 = 20;

/// `k!` accumulated in exact integer arithmetic, rejected beyond 20.
pub fn factorial(k: u32) -> Result<f64> {
    if k > MAX_FACTORIAL {
        return Err(EngineError::Range(format!(
            "factorial argument {k} exceeds {MAX_FACTORIAL}"
        )));
    }
    Ok((1..=k as u64).product::<u64>() as f64)
}

/// Mean Bose occupation `1 / (exp(beta omega) - 1)`.
///
/// Uses `expm1`, so the classical regime `beta omega << 1` keeps full
/// precision. `beta omega = +inf` gives the vacuum.
pub fn thermal_occupation(beta: f64, omega: f64) -> Result<f64> {
    let bw = beta * omega;
    if bw.is_nan() || bw <= 0.0 {
        return Err(EngineError::Domain(format!(
            "thermal occupation needs beta*omega > 0, got {bw}"
        )));
    }
    Ok(1.0 / bw.exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    /// `Tr[c^dag^k c^k R] = k! N^k`
    Normal,
    /// `Tr[c^k c^dag^k R] = k! (N+1)^k`
    Antinormal,
}

/// Thermal expectation of `k` creation/annihilation pairs in normal or
/// antinormal order. `k = 0` is the empty product.
pub fn thermal_moment(occupation: f64, k: u32, kind: MomentKind) -> Result<f64> {
    if !(occupation >= 0.0) {
        return Err(EngineError::Domain(format!(
            "occupation must be non-negative, got {occupation}"
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let base = match kind {
        MomentKind::Normal => occupation,
        MomentKind::Antinormal => occupation + 1.0,
    };
    Ok(factorial(k)? * base.powi(k as i32))
}

/// `sqrt(l (l-1) ... (l-p+1))`: the matrix element `<l-p| c^p |l>`.
/// Zero when `p > l`.
pub fn lowering_coefficient(level: usize, power: u32) -> f64 {
    let p = power as usize;
    if p > level {
        return 0.0;
    }
    ((level - p + 1)..=level)
        .map(|v| v as f64)
        .product::<f64>()
        .sqrt()
}

/// Ladder operators of one mode truncated to `dim` Fock levels.
#[derive(Debug, Clone)]
pub struct ModeOperatorSet {
    pub dim: usize,
    /// `a` with `<k-1|a|k> = sqrt(k)` on the first superdiagonal.
    pub annihilation: DMatrix<Complex64>,
    pub number_diagonal: Vec<f64>,
}

impl ModeOperatorSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(EngineError::Config(format!(
                "mode truncation dimension must be >= 2, got {dim}"
            )));
        }
        let mut a = DMatrix::<Complex64>::zeros(dim, dim);
        for k in 1..dim {
            a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
        }
        Ok(Self {
            dim,
            annihilation: a,
            number_diagonal: (0..dim).map(|k| k as f64).collect(),
        })
    }

    pub fn creation(&self) -> DMatrix<Complex64> {
        self.annihilation.adjoint()
    }

    /// `a^p` of the truncated operator.
    pub fn annihilation_power(&self, p: u32) -> DMatrix<Complex64> {
        let mut out = DMatrix::<Complex64>::identity(self.dim, self.dim);
        for _ in 0..p {
            out = &self.annihilation * out;
        }
        out
    }

    pub fn creation_power(&self, p: u32) -> DMatrix<Complex64> {
        self.annihilation_power(p).adjoint()
    }

    /// `[a, a^dag]`; equals the identity except at the last level, where
    /// truncation leaves `-(dim - 1)`.
    pub fn commutator(&self) -> DMatrix<Complex64> {
        let ad = self.creation();
        &self.annihilation * &ad - &ad * &self.annihilation
    }

    pub fn number_operator(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim,
            self.number_diagonal.iter().map(|&k| Complex64::new(k, 0.0)),
        ))
    }
}

/// Build the truncated ladder operators for one mode.
pub fn build_mode_operators(dim: usize) -> Result<ModeOperatorSet> {
    ModeOperatorSet::new(dim)
}

/// Diagonal of a truncated single-mode Gibbs state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalStateDiag {
    pub dim: usize,
    /// `(1 - q) q^l`, `q = exp(-beta omega)`.
    pub probabilities: Vec<f64>,
    /// Analytic mass beyond the truncation, `q^dim`.
    pub tail_mass: f64,
}

impl ThermalStateDiag {
    pub fn new(beta: f64, omega: f64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(EngineError::Config(format!(
                "thermal state dimension must be >= 2, got {dim}"
            )));
        }
        let bw = beta * omega;
        if bw.is_nan() || bw <= 0.0 {
            return Err(EngineError::Domain(format!(
                "thermal state needs beta*omega > 0, got {bw}"
            )));
        }
        let q = (-bw).exp();
        let one_minus_q = -(-bw).exp_m1();
        let probabilities = (0..dim)
            .map(|l| one_minus_q * q.powi(l as i32))
            .collect();
        Ok(Self {
            dim,
            probabilities,
            tail_mass: q.powi(dim as i32),
        })
    }

    /// Ratio `q = N/(N+1)` recovered from the stored weights.
    fn q(&self) -> f64 {
        if self.probabilities[0] == 0.0 {
            return 0.0;
        }
        self.probabilities[1] / self.probabilities[0]
    }

    /// `<a^dag a>` including the analytic geometric tail
    /// `q^dim (dim + q/(1-q))`.
    pub fn mean_number(&self) -> f64 {
        let truncated: f64 = self
            .probabilities
            .iter()
            .enumerate()
            .map(|(l, p)| l as f64 * p)
            .sum();
        let q = self.q();
        let tail = if self.tail_mass > 0.0 {
            self.tail_mass * (self.dim as f64 + q / (1.0 - q))
        } else {
            0.0
        };
        truncated + tail
    }
}

pub fn thermal_state_diag(beta: f64, omega: f64, dim: usize) -> Result<ThermalStateDiag> {
    ThermalStateDiag::new(beta, omega, dim)
}

/// Smallest `dim` with geometric tail `exp(-beta omega dim) < tol`.
pub(crate) fn tail_dimension(beta_omega: f64, tol: f64) -> usize {
    if beta_omega.is_infinite() {
        return 1;
    }
    let d = (-tol.ln() / beta_omega).floor() as usize + 1;
    d.max(1)
}
