//! Work/heat distributions on the correlation line and their moments.

use serde::{Deserialize, Serialize};

use crate::params::EngineParams;

/// Which evaluation route produced a distribution or moment report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Pert2,
    Pert4,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Pert2 => "pert2",
            Method::Pert4 => "pert4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(Method::Oracle),
            "pert2" => Some(Method::Pert2),
            "pert4" => Some(Method::Pert4),
            _ => None,
        }
    }
}

/// One support point: `W = k * quantum_w`, `Q_H = k * quantum_qh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkPoint {
    pub k: i64,
    pub probability: f64,
}

/// Raw transition statistics gathered by the truncated oracle, computed
/// from the individual Fock-state energy changes rather than from the
/// binned line distribution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    pub dim_a: usize,
    pub dim_b: usize,
    /// Thermal mass discarded by truncation (initial state is renormalized).
    pub tail_mass_a: f64,
    pub tail_mass_b: f64,
    /// Mass transported onto the top `n` levels of A / top `m` levels of B.
    pub leakage_a: f64,
    pub leakage_b: f64,
    /// Largest `|V V^dag - I|` entry over all blocks.
    pub unitarity_defect: f64,
    pub mean_w: f64,
    pub mean_qh: f64,
    pub mean_qc: f64,
    pub second_w: f64,
    pub mean_w_qh: f64,
}

/// Discrete joint distribution of work and hot-bath heat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkHeatDistribution {
    /// `n omega_a - m omega_b`, stored as 0 in the degenerate case.
    pub quantum_w: f64,
    /// `n omega_a`
    pub quantum_qh: f64,
    /// Sorted by `k`.
    pub points: Vec<WorkPoint>,
    pub off_line_mass: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<OracleDiagnostics>,
}

impl WorkHeatDistribution {
    pub(crate) fn new(
        params: &EngineParams,
        mut points: Vec<WorkPoint>,
        off_line_mass: f64,
        method: Method,
    ) -> Self {
        points.sort_by_key(|p| p.k);
        let quantum_w = if params.is_degenerate_quantum() {
            0.0
        } else {
            params.epsilon()
        };
        Self {
            quantum_w,
            quantum_qh: params.heat_quantum(),
            points,
            off_line_mass,
            method,
            diagnostics: None,
        }
    }

    pub fn probability(&self, k: i64) -> f64 {
        self.points
            .iter()
            .find(|p| p.k == k)
            .map_or(0.0, |p| p.probability)
    }

    pub fn total(&self) -> f64 {
        self.points.iter().map(|p| p.probability).sum()
    }

    pub fn mean_k(&self) -> f64 {
        self.points.iter().map(|p| p.k as f64 * p.probability).sum()
    }

    pub fn second_k(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.k * p.k) as f64 * p.probability)
            .sum()
    }

    pub fn k_range(&self) -> (i64, i64) {
        let lo = self.points.first().map_or(0, |p| p.k);
        let hi = self.points.last().map_or(0, |p| p.k);
        (lo, hi)
    }

    /// `max_k |p(k) - q(k)|` over the union of both supports.
    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        let (a_lo, a_hi) = self.k_range();
        let (b_lo, b_hi) = other.k_range();
        (a_lo.min(b_lo)..=a_hi.max(b_hi))
            .map(|k| (self.probability(k) - other.probability(k)).abs())
            .fold(0.0, f64::max)
    }
}

/// Moments of work and heat for one evaluation route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean_w: f64,
    pub second_w: f64,
    pub var_w: f64,
    pub mean_qh: f64,
    pub mean_qc: f64,
    pub entropy_production: f64,
    /// `None` when `<Q_H> = 0`.
    pub efficiency: Option<f64>,
    /// `<W>^2 / var(W)`; `None` when the variance vanishes or the work
    /// quantum is degenerate.
    pub snr: Option<f64>,
    pub method: Method,
    /// Set when a closed form was evaluated above its coupling bound.
    #[serde(default)]
    pub exceeds_coupling_bound: bool,
}

impl MomentReport {
    /// Assemble a report from moments of the integer label `k`.
    pub(crate) fn from_k_moments(
        params: &EngineParams,
        mean_k: f64,
        second_k: f64,
        var_k: f64,
        method: Method,
    ) -> Self {
        let eps = if params.is_degenerate_quantum() {
            0.0
        } else {
            params.epsilon()
        };
        let mean_w = eps * mean_k;
        let second_w = eps * eps * second_k;
        let var_w = eps * eps * var_k;
        let mean_qh = params.heat_quantum() * mean_k;
        let mean_qc = -(params.m as f64 * params.omega_b) / params.heat_quantum() * mean_qh;
        let entropy_production = -params.beta_a * mean_qh - params.beta_b * mean_qc;
        let efficiency = (mean_qh != 0.0).then(|| mean_w / mean_qh);
        let snr = (var_w > 0.0 && eps != 0.0).then(|| mean_w * mean_w / var_w);
        Self {
            mean_w,
            second_w,
            var_w,
            mean_qh,
            mean_qc,
            entropy_production,
            efficiency,
            snr,
            method,
            exceeds_coupling_bound: false,
        }
    }

    /// `var(W) / <W>^2`, `None` at zero mean work.
    pub fn relative_fluctuations(&self) -> Option<f64> {
        (self.mean_w != 0.0).then(|| self.var_w / (self.mean_w * self.mean_w))
    }
}

/// Moments of a distribution with `var = second - mean^2`.
pub fn moments_of(dist: &WorkHeatDistribution, params: &EngineParams) -> MomentReport {
    let mean_k = dist.mean_k();
    let second_k = dist.second_k();
    MomentReport::from_k_moments(params, mean_k, second_k, second_k - mean_k * mean_k, dist.method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Coupling;

    fn params() -> EngineParams {
        EngineParams::new(2, 1, 1.0, 0.5, 0.5, 10.0, Coupling::DirectTheta { theta: 0.01 }).unwrap()
    }

    #[test]
    fn probability_lookup_and_difference() {
        let p = params();
        let a = WorkHeatDistribution::new(
            &p,
            vec![
                WorkPoint { k: 1, probability: 0.2 },
                WorkPoint { k: 0, probability: 0.8 },
            ],
            0.0,
            Method::Pert2,
        );
        assert_eq!(a.points[0].k, 0);
        assert_eq!(a.probability(1), 0.2);
        assert_eq!(a.probability(-3), 0.0);
        let b = WorkHeatDistribution::new(
            &p,
            vec![
                WorkPoint { k: -1, probability: 0.1 },
                WorkPoint { k: 0, probability: 0.9 },
            ],
            0.0,
            Method::Pert2,
        );
        assert!((a.max_abs_difference(&b) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn report_is_internally_consistent() {
        let p = params();
        let dist = WorkHeatDistribution::new(
            &p,
            vec![
                WorkPoint { k: -1, probability: 0.1 },
                WorkPoint { k: 0, probability: 0.6 },
                WorkPoint { k: 2, probability: 0.3 },
            ],
            0.0,
            Method::Oracle,
        );
        let r = moments_of(&dist, &p);
        assert!((r.var_w - (r.second_w - r.mean_w * r.mean_w)).abs() <= 1e-12 * r.second_w);
        assert!((r.mean_w - (r.mean_qh + r.mean_qc)).abs() <= 1e-12 * r.mean_w.abs());
        assert!(r.efficiency.is_some());
    }

    #[test]
    fn degenerate_quantum_collapses_work() {
        let p = EngineParams::new(2, 1, 1.0, 2.0, 0.5, 10.0, Coupling::DirectTheta { theta: 0.01 }).unwrap();
        let dist = WorkHeatDistribution::new(
            &p,
            vec![
                WorkPoint { k: -1, probability: 0.1 },
                WorkPoint { k: 0, probability: 0.8 },
                WorkPoint { k: 1, probability: 0.1 },
            ],
            0.0,
            Method::Oracle,
        );
        assert_eq!(dist.quantum_w, 0.0);
        let r = moments_of(&dist, &p);
        assert_eq!(r.mean_w, 0.0);
        assert!(r.snr.is_none());
    }
}
