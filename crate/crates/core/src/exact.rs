//! Brute-force oracle on a truncated two-mode Fock space.
//!
//! The generator `G = zeta a^dag^n b^m - zeta^* a^n b^dag^m` conserves
//! `m N_a + n N_b`, and so does its truncation (the truncated `a^dag` kills
//! the top level). The product space therefore splits into short chains
//! `|i0 + k n, j0 - k m>`, each evolved independently. The dense
//! full-space route is kept for small dimensions as a cross-check.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distribution::{
    moments_of, Method, MomentReport, OracleDiagnostics, WorkHeatDistribution, WorkPoint,
};
use crate::error::{EngineError, Result};
use crate::fock::{build_mode_operators, lowering_coefficient, tail_dimension, ThermalStateDiag};
use crate::par::map_ordered;
use crate::params::EngineParams;
use crate::perturbative::resolve_theta;

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_LEAKAGE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_DIMS_CAP: usize = 256;
/// Smallest per-mode dimension tried by the adaptive search.
pub const MIN_DIM: usize = 8;

const UNITARITY_TOLERANCE: f64 = 1e-10;
const ANTI_HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Truncated dimensions plus the tolerances they were chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub dim_a: usize,
    pub dim_b: usize,
    pub tail_tolerance: f64,
    pub leakage_tolerance: f64,
}

impl TruncationConfig {
    pub fn new(dim_a: usize, dim_b: usize) -> Self {
        Self {
            dim_a,
            dim_b,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            leakage_tolerance: DEFAULT_LEAKAGE_TOLERANCE,
        }
    }

    pub fn validate(&self, params: &EngineParams) -> Result<()> {
        if self.dim_a < params.n as usize + 2 || self.dim_b < params.m as usize + 2 {
            return Err(EngineError::Config(format!(
                "truncation {}x{} too small for (n, m) = ({}, {}); need dim_a >= n+2, dim_b >= m+2",
                self.dim_a, self.dim_b, params.n, params.m
            )));
        }
        for (name, v) in [
            ("tail_tolerance", self.tail_tolerance),
            ("leakage_tolerance", self.leakage_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EngineError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Tolerances and dimension cap for [`adaptive_truncation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTolerances {
    #[serde(default = "default_tail")]
    pub tail_tolerance: f64,
    #[serde(default = "default_leak")]
    pub leakage_tolerance: f64,
    #[serde(default = "default_cap")]
    pub dims_cap: usize,
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_TOLERANCE
}
fn default_leak() -> f64 {
    DEFAULT_LEAKAGE_TOLERANCE
}
fn default_cap() -> usize {
    DEFAULT_DIMS_CAP
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            leakage_tolerance: DEFAULT_LEAKAGE_TOLERANCE,
            dims_cap: DEFAULT_DIMS_CAP,
        }
    }
}

impl OracleTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tail_tolerance", self.tail_tolerance),
            ("leakage_tolerance", self.leakage_tolerance),
        ] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(EngineError::Config(format!(
                    "{name} must lie in (0, 1e-2], got {v}"
                )));
            }
        }
        if self.dims_cap < MIN_DIM {
            return Err(EngineError::Config(format!(
                "dims_cap must be >= {MIN_DIM}, got {}",
                self.dims_cap
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// dense full-space route

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Full generator `theta (a^dag^n (x) b^m - a^n (x) b^dag^m)` on the
/// product space, basis index `i * dim_b + j`.
pub fn build_generator(params: &EngineParams, trunc: &TruncationConfig) -> Result<DMatrix<Complex64>> {
    let theta = resolve_theta(params)?;
    build_generator_complex(params, trunc, Complex64::new(theta, 0.0))
}

/// Generator with a complex coupling `zeta`.
pub fn build_generator_complex(
    params: &EngineParams,
    trunc: &TruncationConfig,
    zeta: Complex64,
) -> Result<DMatrix<Complex64>> {
    if params.n as usize >= trunc.dim_a || params.m as usize >= trunc.dim_b {
        return Err(EngineError::Config(format!(
            "truncation {}x{} cannot represent a^{} b^{}",
            trunc.dim_a, trunc.dim_b, params.n, params.m
        )));
    }
    let a = build_mode_operators(trunc.dim_a)?;
    let b = build_mode_operators(trunc.dim_b)?;
    let raise = kron(&a.creation_power(params.n), &b.annihilation_power(params.m));
    let lower = raise.adjoint();
    Ok(raise * zeta - lower * zeta.conj())
}

/// `m N_a (x) I + n I (x) N_b`.
pub fn charge_operator(params: &EngineParams, trunc: &TruncationConfig) -> Result<DMatrix<Complex64>> {
    let a = build_mode_operators(trunc.dim_a)?;
    let b = build_mode_operators(trunc.dim_b)?;
    let ia = DMatrix::<Complex64>::identity(trunc.dim_a, trunc.dim_a);
    let ib = DMatrix::<Complex64>::identity(trunc.dim_b, trunc.dim_b);
    Ok(kron(&a.number_operator(), &ib) * Complex64::from(params.m as f64)
        + kron(&ia, &b.number_operator()) * Complex64::from(params.n as f64))
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |V V^dag - I|`.
pub fn unitarity_defect(v: &DMatrix<Complex64>) -> f64 {
    let n = v.nrows();
    max_abs(&(v * v.adjoint() - DMatrix::<Complex64>::identity(n, n)))
}

/// `max |G + G^dag|`.
pub fn anti_hermiticity_defect(g: &DMatrix<Complex64>) -> f64 {
    max_abs(&(g + g.adjoint()))
}

fn certify(v: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let defect = unitarity_defect(&v);
    if defect > UNITARITY_TOLERANCE || !defect.is_finite() {
        return Err(EngineError::Numerical(format!(
            "unitarity defect {defect:.3e} exceeds {UNITARITY_TOLERANCE:.0e}"
        )));
    }
    Ok(v)
}

fn check_anti_hermitian(g: &DMatrix<Complex64>) -> Result<()> {
    if !g.is_square() {
        return Err(EngineError::Numerical("generator is not square".into()));
    }
    let scale = max_abs(g).max(1.0);
    let defect = anti_hermiticity_defect(g);
    if defect > ANTI_HERMITIAN_TOLERANCE * scale {
        return Err(EngineError::Numerical(format!(
            "generator is not anti-Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// `exp(G)` for anti-Hermitian `G` via the eigendecomposition of the
/// Hermitian matrix `iG = U diag(l) U^dag`, so `exp(G) = U diag(e^{-il}) U^dag`.
pub fn unitary_exp(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    check_anti_hermitian(g)?;
    let n = g.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut h = g * Complex64::i();
    // symmetrize away roundoff so the solver sees an exactly Hermitian input
    h = (&h + h.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let u = eig.eigenvectors;
    let mut scaled = u.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -l);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    certify(scaled * u.adjoint())
}

/// `exp(G)` by scaling and squaring a Taylor series whose remainder is
/// bounded below roundoff. Slower; kept as an independent route.
pub fn unitary_exp_series(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    check_anti_hermitian(g)?;
    let n = g.nrows();
    // induced 1-norm
    let norm = (0..g.ncols())
        .map(|c| g.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut s = norm;
    while s > 0.5 {
        s *= 0.5;
        squarings += 1;
    }
    let a = g * Complex64::from(0.5f64.powi(squarings as i32));
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut sum = id.clone();
    let mut term = id;
    let mut converged = s == 0.0;
    for k in 1..=40u32 {
        term = &term * &a * Complex64::from(1.0 / k as f64);
        sum += &term;
        // tail after term k is bounded by |term_k| * s / (1 - s)
        let tail = max_abs(&term) * n as f64 * s / (1.0 - s);
        if tail < 1e-17 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EngineError::Numerical(
            "Taylor series for exp(G) did not reach its remainder bound".into(),
        ));
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    certify(sum)
}

// ---------------------------------------------------------------------------
// chain decomposition

/// One connected block of the generator: states `(i0 + k n, j0 - k m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub states: Vec<(usize, usize)>,
}

/// All chains of the truncated space, in lexicographic order of their
/// first state. Every product state appears in exactly one chain.
pub fn chains(n: u32, m: u32, dim_a: usize, dim_b: usize) -> Vec<Chain> {
    let (n, m) = (n as usize, m as usize);
    let mut out = Vec::new();
    for i in 0..dim_a {
        for j in 0..dim_b {
            // first element: predecessor (i - n, j + m) is outside the box
            if i >= n && j + m < dim_b {
                continue;
            }
            let mut states = vec![(i, j)];
            let (mut ci, mut cj) = (i, j);
            while ci + n < dim_a && cj >= m {
                ci += n;
                cj -= m;
                states.push((ci, cj));
            }
            out.push(Chain { states });
        }
    }
    out
}

/// Tridiagonal generator of one chain with complex coupling `zeta`.
pub fn chain_generator(chain: &Chain, n: u32, m: u32, zeta: Complex64) -> DMatrix<Complex64> {
    let len = chain.states.len();
    let mut g = DMatrix::<Complex64>::zeros(len, len);
    for k in 0..len.saturating_sub(1) {
        let (i, j) = chain.states[k];
        // <i+n, j-m| a^dag^n b^m |i, j>
        let c = lowering_coefficient(i + n as usize, n) * lowering_coefficient(j, m);
        g[(k + 1, k)] = zeta * c;
        g[(k, k + 1)] = -zeta.conj() * c;
    }
    g
}

fn chain_unitary(chain: &Chain, n: u32, m: u32, zeta: Complex64) -> Result<DMatrix<Complex64>> {
    if chain.states.len() == 1 || zeta == Complex64::new(0.0, 0.0) {
        return Ok(DMatrix::identity(chain.states.len(), chain.states.len()));
    }
    unitary_exp(&chain_generator(chain, n, m, zeta))
}

/// Transition probabilities `|<k1|exp(G)|k0>|^2` of one chain for a real
/// coupling, and the orthogonality defect of the eigenbasis used.
///
/// For real `theta` the phase change `D = diag(i^k)` maps `iG` onto the real
/// symmetric tridiagonal `T` with off-diagonals `theta c_k`, so
/// `|exp(G)| = |exp(-iT)| = |Q cos(L) Q^T - i Q sin(L) Q^T|` entrywise.
fn chain_transitions(chain: &Chain, n: u32, m: u32, theta: f64) -> (DMatrix<f64>, f64) {
    let len = chain.states.len();
    if len == 1 || theta == 0.0 {
        return (DMatrix::identity(len, len), 0.0);
    }
    let mut t = DMatrix::<f64>::zeros(len, len);
    for k in 0..len - 1 {
        let (i, j) = chain.states[k];
        let c = theta * lowering_coefficient(i + n as usize, n) * lowering_coefficient(j, m);
        t[(k + 1, k)] = c;
        t[(k, k + 1)] = c;
    }
    let eig = SymmetricEigen::new(t);
    let q = eig.eigenvectors;
    let mut qc = q.clone();
    let mut qs = q.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let (s, co) = l.sin_cos();
        qc.column_mut(c).scale_mut(co);
        qs.column_mut(c).scale_mut(s);
    }
    let re = &qc * q.transpose();
    let im = &qs * q.transpose();
    let probs = re.zip_map(&im, |a, b| a * a + b * b);
    let gram = q.transpose() * &q;
    let defect = (0..len)
        .flat_map(|r| (0..len).map(move |c| (r, c)))
        .map(|(r, c)| (gram[(r, c)] - if r == c { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    (probs, defect)
}

/// Renormalized truncated thermal weights of both modes.
struct InitialState {
    pa: Vec<f64>,
    pb: Vec<f64>,
    tail_a: f64,
    tail_b: f64,
}

impl InitialState {
    fn new(params: &EngineParams, trunc: &TruncationConfig) -> Result<Self> {
        let a = ThermalStateDiag::new(params.beta_a, params.omega_a, trunc.dim_a)?;
        let b = ThermalStateDiag::new(params.beta_b, params.omega_b, trunc.dim_b)?;
        let norm = |p: &[f64]| {
            let s: f64 = p.iter().sum();
            p.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        Ok(Self {
            pa: norm(&a.probabilities),
            pb: norm(&b.probabilities),
            tail_a: a.tail_mass,
            tail_b: b.tail_mass,
        })
    }

    fn weight(&self, (i, j): (usize, usize)) -> f64 {
        self.pa[i] * self.pb[j]
    }
}

/// Leakage onto the top `n` levels of A and top `m` levels of B.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Leakage {
    a: f64,
    b: f64,
}

struct Evolution {
    bins: BTreeMap<i64, f64>,
    diagnostics: OracleDiagnostics,
}

/// Contributions of one chain, reduced later in chain order.
#[derive(Default)]
struct ChainTally {
    bins: Vec<(i64, f64)>,
    leak: Leakage,
    defect: f64,
    mean_w: f64,
    mean_qh: f64,
    mean_qc: f64,
    second_w: f64,
    mean_w_qh: f64,
}

fn evolve(params: &EngineParams, trunc: &TruncationConfig, theta: f64) -> Result<Evolution> {
    trunc.validate(params)?;
    let init = InitialState::new(params, trunc)?;
    let (n, m) = (params.n, params.m);
    let top_a = trunc.dim_a - n as usize;
    let top_b = trunc.dim_b - m as usize;
    let (wa, wb) = (params.omega_a, params.omega_b);

    let all = chains(n, m, trunc.dim_a, trunc.dim_b);
    let tallies = map_ordered(&all, 0, |chain| {
        let (v, defect) = chain_transitions(chain, n, m, theta);
        let mut t = ChainTally {
            defect,
            ..Default::default()
        };
        let len = chain.states.len();
        let mut bins = vec![0.0; 2 * len - 1];
        for (k0, &s0) in chain.states.iter().enumerate() {
            let w0 = init.weight(s0);
            if w0 == 0.0 {
                continue;
            }
            for (k1, &s1) in chain.states.iter().enumerate() {
                let p = w0 * v[(k1, k0)];
                if p == 0.0 {
                    continue;
                }
                // k = (i - i') / n
                bins[k0 + len - 1 - k1] += p;
                if k0 != k1 {
                    if s1.0 >= top_a {
                        t.leak.a += p;
                    }
                    if s1.1 >= top_b {
                        t.leak.b += p;
                    }
                }
                let qh = (s0.0 as f64 - s1.0 as f64) * wa;
                let qc = (s0.1 as f64 - s1.1 as f64) * wb;
                let w = qh + qc;
                t.mean_w += p * w;
                t.mean_qh += p * qh;
                t.mean_qc += p * qc;
                t.second_w += p * w * w;
                t.mean_w_qh += p * w * qh;
            }
        }
        t.bins = bins
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p != 0.0)
            .map(|(idx, p)| (idx as i64 - (len as i64 - 1), p))
            .collect();
        t
    });

    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    let mut d = OracleDiagnostics {
        dim_a: trunc.dim_a,
        dim_b: trunc.dim_b,
        tail_mass_a: init.tail_a,
        tail_mass_b: init.tail_b,
        ..Default::default()
    };
    for t in tallies {
        for (k, p) in t.bins {
            *bins.entry(k).or_insert(0.0) += p;
        }
        d.leakage_a += t.leak.a;
        d.leakage_b += t.leak.b;
        d.unitarity_defect = d.unitarity_defect.max(t.defect);
        d.mean_w += t.mean_w;
        d.mean_qh += t.mean_qh;
        d.mean_qc += t.mean_qc;
        d.second_w += t.second_w;
        d.mean_w_qh += t.mean_w_qh;
    }
    if d.unitarity_defect > UNITARITY_TOLERANCE || !d.unitarity_defect.is_finite() {
        return Err(EngineError::Numerical(format!(
            "eigenbasis orthogonality defect {:.3e} exceeds {UNITARITY_TOLERANCE:.0e}",
            d.unitarity_defect
        )));
    }
    Ok(Evolution {
        bins,
        diagnostics: d,
    })
}

/// Joint work/heat distribution by two-point measurement on the truncated
/// space. Mass is binned by the integer test `i - i' = k n`, `j' - j = k m`.
pub fn two_point_distribution(params: &EngineParams, trunc: &TruncationConfig) -> Result<WorkHeatDistribution> {
    let theta = resolve_theta(params)?;
    let ev = evolve(params, trunc, theta)?;
    finish_distribution(params, trunc, ev)
}

fn finish_distribution(
    params: &EngineParams,
    trunc: &TruncationConfig,
    ev: Evolution,
) -> Result<WorkHeatDistribution> {
    let points: Vec<WorkPoint> = ev
        .bins
        .iter()
        .map(|(&k, &probability)| WorkPoint { k, probability })
        .collect();
    let on_line: f64 = points.iter().map(|p| p.probability).sum();
    let off_line_mass = (1.0 - on_line).abs();
    if off_line_mass > trunc.leakage_tolerance {
        return Err(EngineError::Truncation {
            off_line_mass,
            tolerance: trunc.leakage_tolerance,
            dim_a: trunc.dim_a,
            dim_b: trunc.dim_b,
        });
    }
    let mut dist = WorkHeatDistribution::new(params, points, off_line_mass, Method::Oracle);
    dist.diagnostics = Some(ev.diagnostics);
    Ok(dist)
}

/// Same distribution from the dense product-space unitary. Every one of the
/// `(dim_a dim_b)^2` transitions is tested against the correlation line, so
/// the off-line mass is measured rather than assumed. Small dims only.
pub fn two_point_distribution_dense(
    params: &EngineParams,
    trunc: &TruncationConfig,
) -> Result<WorkHeatDistribution> {
    trunc.validate(params)?;
    let init = InitialState::new(params, trunc)?;
    let v = unitary_exp(&build_generator(params, trunc)?)?;
    let (n, m) = (params.n as i64, params.m as i64);
    let db = trunc.dim_b;
    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    let mut off = 0.0;
    for i in 0..trunc.dim_a {
        for j in 0..db {
            let w0 = init.weight((i, j));
            for i1 in 0..trunc.dim_a {
                for j1 in 0..db {
                    let p = w0 * v[(i1 * db + j1, i * db + j)].norm_sqr();
                    let di = i as i64 - i1 as i64;
                    let dj = j1 as i64 - j as i64;
                    if di % n == 0 && dj == (di / n) * m {
                        *bins.entry(di / n).or_insert(0.0) += p;
                    } else {
                        off += p;
                    }
                }
            }
        }
    }
    let points = bins
        .into_iter()
        .filter(|&(_, p)| p != 0.0)
        .map(|(k, probability)| WorkPoint { k, probability })
        .collect();
    Ok(WorkHeatDistribution::new(params, points, off, Method::Oracle))
}

/// Moments of an oracle distribution.
pub fn exact_moments(dist: &WorkHeatDistribution, params: &EngineParams) -> MomentReport {
    moments_of(dist, params)
}

/// Smallest dims meeting both the thermal-tail and the leakage criteria.
///
/// The tail criterion is analytic per mode. Leakage is then checked on the
/// evolved state; failing modes are doubled until they pass and the
/// boundary is located by bisection.
pub fn adaptive_truncation(params: &EngineParams, tol: &OracleTolerances) -> Result<TruncationConfig> {
    adaptive_search(params, tol).map(|(t, _)| t)
}

/// The search behind [`adaptive_truncation`], also returning the evolution
/// at the chosen dims when one was computed.
fn adaptive_search(
    params: &EngineParams,
    tol: &OracleTolerances,
) -> Result<(TruncationConfig, Option<Evolution>)> {
    tol.validate()?;
    let theta = resolve_theta(params)?;
    let cap = tol.dims_cap;
    let start_a = MIN_DIM.max(params.n as usize + 2);
    let start_b = MIN_DIM.max(params.m as usize + 2);

    let tail_dim = |bw: f64, start: usize, name: &str| -> Result<usize> {
        let needed = tail_dimension(bw, tol.tail_tolerance).max(start);
        if needed > cap {
            return Err(EngineError::Resource {
                parameter: name.into(),
                needed,
                cap,
            });
        }
        Ok(needed)
    };
    let mut dims = [
        tail_dim(params.beta_omega_a(), start_a, "beta_a*omega_a (mode A thermal tail)")?,
        tail_dim(params.beta_omega_b(), start_b, "beta_b*omega_b (mode B thermal tail)")?,
    ];
    let cfg = |d: [usize; 2]| TruncationConfig {
        dim_a: d[0],
        dim_b: d[1],
        tail_tolerance: tol.tail_tolerance,
        leakage_tolerance: tol.leakage_tolerance,
    };
    if theta == 0.0 {
        return Ok((cfg(dims), None));
    }
    let cache: RefCell<HashMap<[usize; 2], Evolution>> = RefCell::new(HashMap::new());
    let leak_of = |d: [usize; 2]| -> Result<[f64; 2]> {
        let ev = evolve(params, &cfg(d), theta)?;
        let leak = [ev.diagnostics.leakage_a, ev.diagnostics.leakage_b];
        cache.borrow_mut().insert(d, ev);
        Ok(leak)
    };
    let names = ["theta (mode A leakage)", "theta (mode B leakage)"];

    // doubling
    let mut lower = dims;
    loop {
        let leak = leak_of(dims)?;
        let failing: Vec<usize> = (0..2).filter(|&c| leak[c] >= tol.leakage_tolerance).collect();
        if failing.is_empty() {
            break;
        }
        for &c in &failing {
            if dims[c] >= cap {
                return Err(EngineError::Resource {
                    parameter: names[c].into(),
                    needed: dims[c] * 2,
                    cap,
                });
            }
            lower[c] = dims[c];
            dims[c] = (dims[c] * 2).min(cap);
        }
    }
    // bisection per mode, keeping the other mode at its passing size
    for c in 0..2 {
        let (mut lo, mut hi) = (lower[c], dims[c]);
        if lo == hi {
            continue;
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let mut trial = dims;
            trial[c] = mid;
            if leak_of(trial)?.iter().all(|&l| l < tol.leakage_tolerance) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        dims[c] = hi;
    }
    let ev = cache.borrow_mut().remove(&dims);
    Ok((cfg(dims), ev))
}

/// Oracle distribution with adaptively chosen dims.
pub fn oracle_distribution(params: &EngineParams, tol: &OracleTolerances) -> Result<WorkHeatDistribution> {
    match adaptive_search(params, tol)? {
        (trunc, Some(ev)) => finish_distribution(params, &trunc, ev),
        (trunc, None) => two_point_distribution(params, &trunc),
    }
}

/// Phase `xi = lambda (n omega_a - m omega_b) + mu n omega_a`.
pub fn char_fn_phase(params: &EngineParams, lambda: f64, mu: f64) -> f64 {
    lambda * params.epsilon() + mu * params.heat_quantum()
}

/// Characteristic function as `Tr[V_theta^dag V_zeta rho_0]` with
/// `zeta = theta e^{-i xi}`.
pub fn exact_char_fn(params: &EngineParams, trunc: &TruncationConfig, lambda: f64, mu: f64) -> Result<Complex64> {
    char_fn_at_xi(params, trunc, char_fn_phase(params, lambda, mu))
}

pub fn char_fn_at_xi(params: &EngineParams, trunc: &TruncationConfig, xi: f64) -> Result<Complex64> {
    trunc.validate(params)?;
    let theta = resolve_theta(params)?;
    let init = InitialState::new(params, trunc)?;
    let (n, m) = (params.n, params.m);
    let zt = Complex64::new(theta, 0.0);
    let zz = zt * Complex64::from_polar(1.0, -xi);
    let mut acc = Complex64::new(0.0, 0.0);
    for chain in chains(n, m, trunc.dim_a, trunc.dim_b) {
        let prod = chain_unitary(&chain, n, m, zt)?.adjoint() * chain_unitary(&chain, n, m, zz)?;
        for (k, &s) in chain.states.iter().enumerate() {
            acc += prod[(k, k)] * init.weight(s);
        }
    }
    Ok(acc)
}

/// Characteristic function from its definition,
/// `Tr[V^dag e^{-i(lambda H + mu H_A)} V e^{i(lambda H + mu H_A)} rho_0]`,
/// with phases taken from the Fock energies directly.
pub fn char_fn_direct(params: &EngineParams, trunc: &TruncationConfig, lambda: f64, mu: f64) -> Result<Complex64> {
    trunc.validate(params)?;
    let theta = resolve_theta(params)?;
    let init = InitialState::new(params, trunc)?;
    let (n, m) = (params.n, params.m);
    let phase = |(i, j): (usize, usize)| {
        let ea = i as f64 * params.omega_a;
        let e = ea + j as f64 * params.omega_b;
        Complex64::from_polar(1.0, lambda * e + mu * ea)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for chain in chains(n, m, trunc.dim_a, trunc.dim_b) {
        let v = chain_unitary(&chain, n, m, Complex64::new(theta, 0.0))?;
        let len = chain.states.len();
        let f = DMatrix::from_fn(len, len, |r, c| {
            if r == c {
                phase(chain.states[r])
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let prod = v.adjoint() * f.adjoint() * &v * &f;
        for (k, &s) in chain.states.iter().enumerate() {
            acc += prod[(k, k)] * init.weight(s);
        }
    }
    Ok(acc)
}

/// Recover `p(k)` for `|k| <= k_max` from `samples` equispaced values of
/// the characteristic function over one period of `xi`.
pub fn invert_char_fn(
    params: &EngineParams,
    trunc: &TruncationConfig,
    k_max: i64,
    samples: usize,
) -> Result<Vec<WorkPoint>> {
    if samples < (2 * k_max + 1) as usize {
        return Err(EngineError::Config(format!(
            "{samples} samples cannot resolve |k| <= {k_max}"
        )));
    }
    let chi: Vec<Complex64> = (0..samples)
        .map(|s| char_fn_at_xi(params, trunc, 2.0 * std::f64::consts::PI * s as f64 / samples as f64))
        .collect::<Result<_>>()?;
    Ok((-k_max..=k_max)
        .map(|k| {
            let sum: Complex64 = chi
                .iter()
                .enumerate()
                .map(|(s, c)| {
                    let xi = 2.0 * std::f64::consts::PI * s as f64 / samples as f64;
                    c * Complex64::from_polar(1.0, -(k as f64) * xi)
                })
                .sum();
            WorkPoint {
                k,
                probability: sum.re / samples as f64,
            }
        })
        .collect())
}
