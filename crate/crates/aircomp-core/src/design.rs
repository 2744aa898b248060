//! AirComp transceiver designs for the three AP-cooperation levels, the
//! asymptotic MSE floor, and fronthaul signaling counts.
//!
//! Level 3: the CPU stacks all AP observations and jointly optimizes the
//! transmit coefficients `b` and the `L·N` combiner `v` by alternating
//! closed-form updates. Level 2: each AP combines locally, the CPU fuses
//! the per-AP scalars with large-scale fading decoding weights derived
//! from channel statistics. Level 1: the CPU simply averages.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_rational::Ratio;
#[allow(unused_imports)]
use num_traits::Float as _;
use rand::Rng;

use crate::channel::{ChannelSampler, Snapshot, SystemConfig};
use crate::linalg::{
    inner, norm_sq, quad_form, rayleigh_max, CVec, Cholesky, HermitianMatrix,
};
use crate::pilots::{pilot_observation, EstimationResult, MmseEstimator, PilotAssignment};
use crate::Result;

/// Fully centralized (Level 3) design.
#[derive(Debug, Clone)]
pub struct Level3Design {
    /// Transmit coefficients, one per device; `|b_k|² ≤ P_k`.
    pub b: Vec<Complex64>,
    /// Stacked combiner of length `L·N`.
    pub v: CVec,
    /// Conditional MSE after each half-step of the alternating
    /// optimization; non-increasing.
    pub mse_trace: Vec<f64>,
}

impl Level3Design {
    /// Conditional MSE at the final iterate.
    pub fn final_mse(&self) -> f64 {
        *self.mse_trace.last().expect("trace never empty")
    }
}

/// Options for [`alternating_optimize`].
#[derive(Debug, Clone, Copy)]
pub struct AltOptOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Transmit-coefficient optimization: when disabled, `b_k = √P_k`
    /// and only the combiner is computed (single pass).
    pub tco: bool,
}

impl Default for AltOptOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-8,
            tco: true,
        }
    }
}

/// Local-processing + LSFD (Level 2) design: fixed full-power transmit
/// coefficients and statistics-based CPU combining weights.
#[derive(Debug, Clone)]
pub struct Level2Design {
    pub b: Vec<Complex64>,
    /// LSFD weights `a`, length `L`.
    pub a: CVec,
    pub stats: LsfdStatistics,
}

/// Monte Carlo estimates of the channel statistics the CPU needs for
/// large-scale fading decoding.
#[derive(Debug, Clone)]
pub struct LsfdStatistics {
    /// `E{g_k}`, one length-`L` vector per device.
    pub mean_g: Vec<CVec>,
    /// `E{g_k g_k^H}`, one `L×L` matrix per device.
    pub second_g: Vec<HermitianMatrix>,
    /// `E{‖v_l‖²}`, length `L`.
    pub mean_d: Vec<f64>,
    pub sample_count: usize,
}

/// Complex scalars crossing the fronthaul per coherence block.
///
/// `statistical` can be a half-integer (real-valued quantities count as
/// half a complex scalar), so it is carried as an exact rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FronthaulCount {
    pub per_block_to_cpu: u64,
    pub per_block_to_aps: u64,
    pub statistical: Ratio<u64>,
}

/// Conditional MSE of the Level-3 estimate:
/// `(1/K²)(Σ_k (|v^H ĥ_k b_k − 1|² + |b_k|² v^H C_k v) + δ² ‖v‖²)`
/// with `C_k = blockdiag(C_k1, …, C_kL)`.
pub fn mse_level3(
    b: &[Complex64],
    v: &[Complex64],
    est: &EstimationResult,
    noise_mw: f64,
) -> Result<f64> {
    let k_count = est.device_count();
    let l_count = est.ap_count();
    let n = est.antennas_per_ap();
    if b.len() != k_count {
        return Err(crate::Error::DimensionMismatch {
            expected: k_count,
            found: b.len(),
        });
    }
    if v.len() != l_count * n {
        return Err(crate::Error::DimensionMismatch {
            expected: l_count * n,
            found: v.len(),
        });
    }
    let mut total = 0.0;
    for k in 0..k_count {
        let mut vh_h = Complex64::ZERO;
        let mut vcv = 0.0;
        for l in 0..l_count {
            let v_l = &v[l * n..(l + 1) * n];
            vh_h += inner(v_l, est.h_hat(k, l));
            vcv += quad_form(v_l, est.c_cov(k, l))?;
        }
        total += (vh_h * b[k] - Complex64::ONE).norm_sqr() + b[k].norm_sqr() * vcv;
    }
    total += noise_mw * norm_sq(v);
    Ok(total / (k_count * k_count) as f64)
}

/// KKT-optimal transmit coefficient for device `k` at fixed combiner `v`:
/// `b_k = ĥ_k^H v / (|v^H ĥ_k|² + v^H C_k v + μ_k)` with
/// `μ_k = max(0, |v^H ĥ_k|/√P_k − |v^H ĥ_k|² − v^H C_k v)`.
///
/// Returns `(b_k, μ_k)`. A vanishing effective channel yields `(0, 0)`.
pub fn optimal_b(
    v: &[Complex64],
    est: &EstimationResult,
    k: usize,
    p_max_mw: f64,
) -> Result<(Complex64, f64)> {
    let l_count = est.ap_count();
    let n = est.antennas_per_ap();
    let mut vh_h = Complex64::ZERO;
    let mut vcv = 0.0;
    for l in 0..l_count {
        let v_l = &v[l * n..(l + 1) * n];
        vh_h += inner(v_l, est.h_hat(k, l));
        vcv += quad_form(v_l, est.c_cov(k, l))?;
    }
    Ok(optimal_b_scalar(vh_h, vcv, p_max_mw))
}

/// Scalar KKT subproblem shared by Level 3 and the Level-2 variant:
/// minimize `|c·b − 1|² + e·|b|²` subject to `|b|² ≤ P`, where
/// `c = v^H ĥ` and `e = v^H C v ≥ 0`.
pub fn optimal_b_scalar(vh_h: Complex64, vcv: f64, p_max_mw: f64) -> (Complex64, f64) {
    let mag = vh_h.norm();
    if mag == 0.0 && vcv == 0.0 {
        return (Complex64::ZERO, 0.0);
    }
    let mu = if p_max_mw > 0.0 {
        (mag / p_max_mw.sqrt() - mag * mag - vcv).max(0.0)
    } else {
        return (Complex64::ZERO, 0.0);
    };
    let denom = mag * mag + vcv + mu;
    if denom == 0.0 {
        return (Complex64::ZERO, 0.0);
    }
    (vh_h.conj() / denom, mu)
}

/// MSE-optimal stacked combiner at fixed transmit coefficients:
/// `v = (Σ_k |b_k|²(ĥ_k ĥ_k^H + C_k) + δ² I)⁻¹ Σ_k b_k ĥ_k`.
pub fn optimal_v(b: &[Complex64], est: &EstimationResult, noise_mw: f64) -> Result<CVec> {
    let k_count = est.device_count();
    let l_count = est.ap_count();
    let n = est.antennas_per_ap();
    let dim = l_count * n;
    let mut a = HermitianMatrix::scaled_identity(dim, noise_mw);
    let mut rhs = vec![Complex64::ZERO; dim];
    for k in 0..k_count {
        let h_k = est.stacked_h_hat(k);
        let w = b[k].norm_sqr();
        if w > 0.0 {
            a.add_assign_outer(&h_k, w);
            for l in 0..l_count {
                let c = est.c_cov(k, l);
                for i in 0..n {
                    for j in i..n {
                        let cur = a.get(l * n + i, l * n + j);
                        a.set(l * n + i, l * n + j, cur + w * c.get(i, j));
                    }
                }
            }
        }
        for (r, h) in rhs.iter_mut().zip(&h_k) {
            *r += b[k] * h;
        }
    }
    Cholesky::new(&a)?.solve_vec(&rhs)
}

/// Alternating block-coordinate optimization of `(b, v)` for Level 3.
///
/// Starts from full power `b_k = √P_k`. With TCO disabled this reduces to
/// a single combiner computation (the "without TCO" variant).
pub fn alternating_optimize(
    est: &EstimationResult,
    p_max_mw: &[f64],
    noise_mw: f64,
    opts: AltOptOptions,
) -> Result<Level3Design> {
    let k_count = est.device_count();
    debug_assert_eq!(p_max_mw.len(), k_count);
    let mut b: Vec<Complex64> = p_max_mw
        .iter()
        .map(|p| Complex64::new(p.sqrt(), 0.0))
        .collect();
    let mut v = optimal_v(&b, est, noise_mw)?;
    let mut mse_trace = vec![mse_level3(&b, &v, est, noise_mw)?];
    if !opts.tco {
        return Ok(Level3Design { b, v, mse_trace });
    }
    for _ in 0..opts.max_iter {
        for k in 0..k_count {
            b[k] = optimal_b(&v, est, k, p_max_mw[k])?.0;
        }
        mse_trace.push(mse_level3(&b, &v, est, noise_mw)?);
        v = optimal_v(&b, est, noise_mw)?;
        let mse = mse_level3(&b, &v, est, noise_mw)?;
        let prev = mse_trace[mse_trace.len() - 2];
        mse_trace.push(mse);
        if prev - mse < opts.rel_tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(Level3Design { b, v, mse_trace })
}

/// Local MSE at AP `l` for combiner `v_l` (the Level-2 per-AP objective).
pub fn local_mse(
    b: &[Complex64],
    v_l: &[Complex64],
    est: &EstimationResult,
    l: usize,
    noise_mw: f64,
) -> Result<f64> {
    let k_count = est.device_count();
    let mut total = 0.0;
    for k in 0..k_count {
        let vh_h = inner(v_l, est.h_hat(k, l));
        let vcv = quad_form(v_l, est.c_cov(k, l))?;
        total += (vh_h * b[k] - Complex64::ONE).norm_sqr() + b[k].norm_sqr() * vcv;
    }
    total += noise_mw * norm_sq(v_l);
    Ok(total / (k_count * k_count) as f64)
}

/// MSE-optimal local combiner at AP `l`:
/// `v_l = (Σ_k |b_k|²(ĥ_kl ĥ_kl^H + C_kl) + δ² I_N)⁻¹ Σ_k b_k ĥ_kl`.
pub fn local_combiner(
    est: &EstimationResult,
    l: usize,
    b: &[Complex64],
    noise_mw: f64,
) -> Result<CVec> {
    let k_count = est.device_count();
    let n = est.antennas_per_ap();
    let mut a = HermitianMatrix::scaled_identity(n, noise_mw);
    let mut rhs = vec![Complex64::ZERO; n];
    for k in 0..k_count {
        let h = est.h_hat(k, l);
        let w = b[k].norm_sqr();
        if w > 0.0 {
            a.add_assign_outer(h, w);
            a.add_assign_scaled(est.c_cov(k, l), w);
        }
        for (r, hi) in rhs.iter_mut().zip(h) {
            *r += b[k] * hi;
        }
    }
    Cholesky::new(&a)?.solve_vec(&rhs)
}

/// Full-power transmit coefficients `b_k = √P_k` (Levels 1 and 2).
pub fn full_power_b(config: &SystemConfig) -> Vec<Complex64> {
    let amp = config.max_power_mw().sqrt();
    vec![Complex64::new(amp, 0.0); config.device_count]
}

/// Effective per-AP channels `g_k[l] = v_l^H h_kl` and the local combiner
/// energies `D_l = ‖v_l‖²` for one joint (channel, pilot-noise) draw.
fn realized_effective_channels(
    estimator: &MmseEstimator,
    sampler: &ChannelSampler,
    assignment: &PilotAssignment,
    b: &[Complex64],
    config: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<CVec>, Vec<f64>)> {
    let k_count = config.device_count;
    let l_count = config.ap_count;
    let noise_mw = config.noise_mw();
    let channels = sampler.sample(rng);
    let y = pilot_observation(&channels, assignment, config, rng);
    let est = estimator.estimate(&y);
    let mut g = vec![vec![Complex64::ZERO; l_count]; k_count];
    let mut d = vec![0.0; l_count];
    for l in 0..l_count {
        let v_l = local_combiner(&est, l, b, noise_mw)?;
        d[l] = norm_sq(&v_l);
        for k in 0..k_count {
            g[k][l] = inner(&v_l, &channels.h[k][l]);
        }
    }
    Ok((g, d))
}

/// Monte Carlo estimates of `E{g_k}`, `E{g_k g_k^H}`, and `E{D}` over `m`
/// independent joint draws of channels and pilot noise.
pub fn lsfd_statistics(
    snapshot: &Snapshot,
    assignment: &PilotAssignment,
    b: &[Complex64],
    config: &SystemConfig,
    m: usize,
    rng: &mut impl Rng,
) -> Result<LsfdStatistics> {
    let k_count = config.device_count;
    let l_count = config.ap_count;
    let estimator = MmseEstimator::new(snapshot, assignment, config)?;
    let sampler = ChannelSampler::new(snapshot)?;
    let mut mean_g = vec![vec![Complex64::ZERO; l_count]; k_count];
    let mut second_g = vec![HermitianMatrix::zeros(l_count); k_count];
    let mut mean_d = vec![0.0; l_count];
    for _ in 0..m {
        let (g, d) = realized_effective_channels(&estimator, &sampler, assignment, b, config, rng)?;
        for k in 0..k_count {
            for l in 0..l_count {
                mean_g[k][l] += g[k][l];
            }
            second_g[k].add_assign_outer(&g[k], 1.0);
        }
        for l in 0..l_count {
            mean_d[l] += d[l];
        }
    }
    let inv = 1.0 / m as f64;
    for row in &mut mean_g {
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
    let second_g = second_g.into_iter().map(|s| s.scaled(inv)).collect();
    for x in &mut mean_d {
        *x *= inv;
    }
    Ok(LsfdStatistics {
        mean_g,
        second_g,
        mean_d,
        sample_count: m,
    })
}

/// Statistics-based LSFD weights:
/// `a = (Σ_k |b_k|² E{g_k g_k^H} + δ² E{D})⁻¹ Σ_k b_k E{g_k}`.
pub fn lsfd_weights(stats: &LsfdStatistics, b: &[Complex64], noise_mw: f64) -> Result<CVec> {
    let l_count = stats.mean_d.len();
    let k_count = stats.mean_g.len();
    let mut a = HermitianMatrix::zeros(l_count);
    for k in 0..k_count {
        a.add_assign_scaled(&stats.second_g[k], b[k].norm_sqr());
    }
    for l in 0..l_count {
        let cur = a.get(l, l);
        a.set(l, l, cur + noise_mw * stats.mean_d[l]);
    }
    let mut rhs = vec![Complex64::ZERO; l_count];
    for k in 0..k_count {
        for l in 0..l_count {
            rhs[l] += b[k] * stats.mean_g[k][l];
        }
    }
    Cholesky::new(&a)?.solve_vec(&rhs)
}

/// Off-by-default Level-2 transmit-coefficient refinement: a single pass
/// of the statistics-based KKT update, without refreshing the statistics.
pub fn level2_tco_once(
    stats: &LsfdStatistics,
    a: &[Complex64],
    p_max_mw: &[f64],
) -> Vec<Complex64> {
    stats
        .mean_g
        .iter()
        .zip(p_max_mw)
        .map(|(g, &p)| optimal_b_scalar(inner(a, g), 0.0, p).0)
        .collect()
}

/// Conditional Level-2 MSE for one realized `(g, D)`:
/// `(1/K²)(Σ_k |a^H g_k b_k − 1|² + δ² a^H D a)`.
fn mse_level2_conditional(
    a: &[Complex64],
    b: &[Complex64],
    g: &[CVec],
    d: &[f64],
    noise_mw: f64,
) -> f64 {
    let k_count = b.len();
    let mut total = 0.0;
    for k in 0..k_count {
        total += (inner(a, &g[k]) * b[k] - Complex64::ONE).norm_sqr();
    }
    let quad: f64 = a.iter().zip(d).map(|(al, dl)| al.norm_sqr() * dl).sum();
    total += noise_mw * quad;
    total / (k_count * k_count) as f64
}

/// Mean and standard error of the Level-2 MSE over fresh joint draws,
/// holding the LSFD weights `a` fixed.
pub fn evaluate_level2(
    snapshot: &Snapshot,
    assignment: &PilotAssignment,
    a: &[Complex64],
    b: &[Complex64],
    config: &SystemConfig,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let estimator = MmseEstimator::new(snapshot, assignment, config)?;
    let sampler = ChannelSampler::new(snapshot)?;
    let noise_mw = config.noise_mw();
    let mut acc = 0.0;
    let mut acc_sq = 0.0;
    for _ in 0..trials {
        let (g, d) = realized_effective_channels(&estimator, &sampler, assignment, b, config, rng)?;
        let mse = mse_level2_conditional(a, b, &g, &d, noise_mw);
        acc += mse;
        acc_sq += mse * mse;
    }
    let mean = acc / trials as f64;
    let var = (acc_sq / trials as f64 - mean * mean).max(0.0);
    let stderr = if trials > 1 {
        (var / (trials - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Level-1 evaluation: identical protocol with simple averaging
/// `a_l = 1/L` and full-power transmit coefficients.
pub fn evaluate_level1(
    snapshot: &Snapshot,
    assignment: &PilotAssignment,
    config: &SystemConfig,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let l_count = config.ap_count;
    let a = vec![Complex64::new(1.0 / l_count as f64, 0.0); l_count];
    let b = full_power_b(config);
    evaluate_level2(snapshot, assignment, &a, &b, config, trials, rng)
}

/// Lower bound on the unconstrained-power conditional MSE:
/// `(1/K²)(Σ_k 1/(ĥ_k^H C_k⁻¹ ĥ_k + 1) + δ²‖v‖²)`.
///
/// Requires every `C_kl` positive definite; the generalized Rayleigh
/// quotient maximum is evaluated block-wise on the block-diagonal `C_k`.
pub fn asymptotic_floor(est: &EstimationResult, v: &[Complex64], noise_mw: f64) -> Result<f64> {
    let k_count = est.device_count();
    let l_count = est.ap_count();
    let mut total = 0.0;
    for k in 0..k_count {
        let mut quot = 0.0;
        for l in 0..l_count {
            quot += rayleigh_max(est.h_hat(k, l), est.c_cov(k, l))?;
        }
        total += 1.0 / (quot + 1.0);
    }
    total += noise_mw * norm_sq(v);
    Ok(total / (k_count * k_count) as f64)
}

/// Fronthaul signaling load for a cooperation level (1, 2, or 3).
pub fn fronthaul_count(level: u8, config: &SystemConfig) -> FronthaulCount {
    let l = config.ap_count as u64;
    let n = config.antennas_per_ap as u64;
    let k = config.device_count as u64;
    let tau_c = config.tau_c as u64;
    let tau_p = config.tau_p as u64;
    match level {
        3 => FronthaulCount {
            per_block_to_cpu: tau_c * n * l,
            per_block_to_aps: k,
            statistical: Ratio::new(k * l * n * n, 2),
        },
        2 => FronthaulCount {
            per_block_to_cpu: (tau_c - tau_p) * l,
            per_block_to_aps: 0,
            statistical: Ratio::from_integer(k * l) + Ratio::new(l + k * l * l, 2),
        },
        1 => FronthaulCount {
            per_block_to_cpu: (tau_c - tau_p) * l,
            per_block_to_aps: 0,
            statistical: Ratio::from_integer(0),
        },
        _ => panic!("cooperation level must be 1, 2, or 3"),
    }
}
