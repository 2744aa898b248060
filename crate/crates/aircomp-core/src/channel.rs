//! Network snapshots: AP/device placement with wrap-around distances,
//! 3GPP UMi path loss with correlated log-normal shadowing, Gaussian local
//! scattering spatial correlation, and correlated Rayleigh channel draws.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float as _;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{psd_factor, CMatrix, CVec, HermitianMatrix};
use crate::{dbm_to_mw, Error, Result};

/// How APs are laid out over the square area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ApPlacement {
    /// APs at the centers of a `√L × √L` uniform grid.
    Grid,
    /// A single AP (base station) at the area center; requires `L = 1`.
    CenterSingle,
}

/// All scenario parameters for one simulated network.
///
/// Powers are carried in dBm at the interface and converted to linear
/// milliwatts internally; the noise power lives on the same scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemConfig {
    /// Number of APs (`L`).
    pub ap_count: usize,
    /// Antennas per AP (`N`).
    pub antennas_per_ap: usize,
    /// Number of single-antenna devices (`K`).
    pub device_count: usize,
    /// Pilot length in samples (`τ_p`).
    pub tau_p: usize,
    /// Coherence block length in samples (`τ_c`).
    pub tau_c: usize,
    /// Per-device pilot transmit power in dBm (length `K`).
    pub pilot_power_dbm: Vec<f64>,
    /// Maximum transmit power per device in dBm (the sweep variable).
    pub max_power_dbm: f64,
    /// Noise power in dBm.
    pub noise_power_dbm: f64,
    /// Side of the square simulation area in meters.
    pub area_m: f64,
    /// Path loss at the reference distance, dB.
    pub pathloss_beta0_db: f64,
    /// Path-loss exponent.
    pub pathloss_alpha: f64,
    /// Reference distance in meters; also the distance floor.
    pub ref_dist_m: f64,
    /// Shadow-fading standard deviation, dB.
    pub shadow_std_db: f64,
    /// Shadowing decorrelation distance in meters.
    pub shadow_decorr_m: f64,
    /// Angular standard deviation of the local scattering model, degrees.
    pub asd_deg: f64,
    /// AP layout.
    pub ap_placement: ApPlacement,
    /// RNG seed.
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            ap_count: 144,
            antennas_per_ap: 1,
            device_count: 20,
            tau_p: 20,
            tau_c: 200,
            pilot_power_dbm: vec![20.0; 20],
            max_power_dbm: 20.0,
            noise_power_dbm: -96.0,
            area_m: 1000.0,
            pathloss_beta0_db: -30.5,
            pathloss_alpha: 3.67,
            ref_dist_m: 1.0,
            shadow_std_db: 4.0,
            shadow_decorr_m: 9.0,
            asd_deg: 15.0,
            ap_placement: ApPlacement::Grid,
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ap_count == 0 || self.antennas_per_ap == 0 || self.device_count == 0 {
            return Err(Error::InvalidConfig("counts must be >= 1"));
        }
        if self.tau_p == 0 || self.tau_p > self.tau_c {
            return Err(Error::InvalidConfig("requires 1 <= tau_p <= tau_c"));
        }
        if self.pilot_power_dbm.len() != self.device_count {
            return Err(Error::InvalidConfig("pilot_power_dbm must have one entry per device"));
        }
        if !(self.area_m > 0.0) {
            return Err(Error::InvalidConfig("area_m must be positive"));
        }
        let finite = self
            .pilot_power_dbm
            .iter()
            .chain([&self.max_power_dbm, &self.noise_power_dbm])
            .all(|p| p.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("powers must be finite"));
        }
        if self.ap_placement == ApPlacement::CenterSingle && self.ap_count != 1 {
            return Err(Error::InvalidConfig("center-single placement requires ap_count = 1"));
        }
        Ok(())
    }

    /// Pilot power of device `k`, linear mW.
    pub fn pilot_power_mw(&self, k: usize) -> f64 {
        dbm_to_mw(self.pilot_power_dbm[k])
    }

    /// Maximum transmit power, linear mW (same budget for every device).
    pub fn max_power_mw(&self) -> f64 {
        dbm_to_mw(self.max_power_dbm)
    }

    /// Noise power, linear mW.
    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_power_dbm)
    }
}

/// Deterministic per-snapshot RNG stream derived from `(seed, index)`.
///
/// Streams are independent across indices, so snapshots can be generated
/// and consumed in any order or in parallel.
pub fn snapshot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// AP and device coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Topology {
    pub ap_positions: Vec<(f64, f64)>,
    pub device_positions: Vec<(f64, f64)>,
}

/// One network realization: placement, large-scale gains, and spatial
/// correlation matrices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub topology: Topology,
    /// Linear channel gains `β_kl`, indexed `[k][l]`.
    pub beta: Vec<Vec<f64>>,
    /// Spatial correlation matrices `R_kl` (N×N), indexed `[k][l]`.
    pub r: Vec<Vec<HermitianMatrix>>,
}

/// One small-scale fading draw: `h_kl ~ N_C(0, R_kl)`, indexed `[k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Vec<CVec>>,
}

/// Minimum distance between `p` and the nine wrap-around copies of `q`.
pub fn wrap_distance(p: (f64, f64), q: (f64, f64), area_m: f64) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = p.0 - (q.0 + sx * area_m);
            let dy = p.1 - (q.1 + sy * area_m);
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Wrap-around copy of `q` nearest to `p`.
fn nearest_wrap_copy(p: (f64, f64), q: (f64, f64), area_m: f64) -> (f64, f64) {
    let mut best = (q.0, q.1);
    let mut best_d = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let cand = (q.0 + sx * area_m, q.1 + sy * area_m);
            let d = (p.0 - cand.0).hypot(p.1 - cand.1);
            if d < best_d {
                best_d = d;
                best = cand;
            }
        }
    }
    best
}

/// Places APs (grid centers or a single centered BS) and devices
/// (i.i.d. uniform) over the area.
pub fn generate_topology(config: &SystemConfig, rng: &mut impl Rng) -> Result<Topology> {
    config.validate()?;
    let ap_positions = match config.ap_placement {
        ApPlacement::CenterSingle => vec![(config.area_m / 2.0, config.area_m / 2.0)],
        ApPlacement::Grid => {
            let side = (config.ap_count as f64).sqrt().round() as usize;
            if side * side != config.ap_count {
                return Err(Error::NotPerfectSquare {
                    ap_count: config.ap_count,
                });
            }
            let spacing = config.area_m / side as f64;
            let mut pos = Vec::with_capacity(config.ap_count);
            for i in 0..side {
                for j in 0..side {
                    pos.push(((i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing));
                }
            }
            pos
        }
    };
    let device_positions = (0..config.device_count)
        .map(|_| {
            (
                rng.gen::<f64>() * config.area_m,
                rng.gen::<f64>() * config.area_m,
            )
        })
        .collect();
    Ok(Topology {
        ap_positions,
        device_positions,
    })
}

/// Draws shadow-fading terms `S_kl` in dB, `K×L`.
///
/// Per AP the device shadow terms are jointly Gaussian with covariance
/// `σ² · 2^(−x_ki / decorr)` in device-to-device wrap distance `x_ki`;
/// draws are independent across APs.
pub fn sample_shadowing(
    topology: &Topology,
    config: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let k_count = topology.device_positions.len();
    let l_count = topology.ap_positions.len();
    let var = config.shadow_std_db * config.shadow_std_db;
    let cov = HermitianMatrix::from_fn(k_count, |k, i| {
        let x = wrap_distance(
            topology.device_positions[k],
            topology.device_positions[i],
            config.area_m,
        );
        Complex64::new(var * (2.0_f64).powf(-x / config.shadow_decorr_m), 0.0)
    });
    let factor = psd_factor(&cov)?;
    let mut out = vec![vec![0.0; l_count]; k_count];
    for l in 0..l_count {
        let z: Vec<f64> = (0..k_count).map(|_| rng.sample(StandardNormal)).collect();
        for k in 0..k_count {
            let mut s = 0.0;
            for i in 0..k_count {
                s += factor[(k, i)].re * z[i];
            }
            out[k][l] = s;
        }
    }
    Ok(out)
}

/// Linear channel gain from the 3GPP UMi model:
/// `β[dB] = β₀ − 10 α log10(d/d₀) + S`.
pub fn large_scale_gain(d_m: f64, shadow_db: f64, config: &SystemConfig) -> f64 {
    let d = d_m.max(config.ref_dist_m);
    let db = config.pathloss_beta0_db
        - 10.0 * config.pathloss_alpha * (d / config.ref_dist_m).log10()
        + shadow_db;
    (10.0_f64).powf(db / 10.0)
}

/// Gaussian local scattering correlation matrix for a half-wavelength ULA.
///
/// Closed-form small-ASD approximation:
/// `[R]_{m,n} = β · exp(jπ(m−n)sin φ̄) · exp(−σ²(π(m−n)cos φ̄)²/2)`.
pub fn local_scattering_r(beta: f64, phi_bar: f64, n: usize, asd_deg: f64) -> HermitianMatrix {
    let sigma = asd_deg * core::f64::consts::PI / 180.0;
    let (sin_phi, cos_phi) = phi_bar.sin_cos();
    HermitianMatrix::from_fn(n, |row, col| {
        let gap = row as f64 - col as f64;
        let arg = core::f64::consts::PI * gap * sin_phi;
        let damp = {
            let t = core::f64::consts::PI * gap * cos_phi * sigma;
            (-0.5 * t * t).exp()
        };
        beta * damp * Complex64::new(arg.cos(), arg.sin())
    })
}

/// Builds a full network snapshot: topology, shadowing, gains, nominal
/// angles toward the nearest wrap copy, and spatial correlation matrices.
pub fn build_snapshot(config: &SystemConfig, rng: &mut impl Rng) -> Result<Snapshot> {
    let topology = generate_topology(config, rng)?;
    let shadow = sample_shadowing(&topology, config, rng)?;
    let k_count = config.device_count;
    let l_count = config.ap_count;
    let n = config.antennas_per_ap;
    let mut beta = vec![vec![0.0; l_count]; k_count];
    let mut r = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut row = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let ap = topology.ap_positions[l];
            let dev = nearest_wrap_copy(ap, topology.device_positions[k], config.area_m);
            let d = (ap.0 - dev.0).hypot(ap.1 - dev.1);
            let gain = large_scale_gain(d, shadow[k][l], config);
            beta[k][l] = gain;
            // arrays oriented along the x-axis; azimuth from broadside
            let phi = (dev.1 - ap.1).atan2(dev.0 - ap.0);
            row.push(local_scattering_r(gain, phi, n, config.asd_deg));
        }
        r.push(row);
    }
    Ok(Snapshot { topology, beta, r })
}

/// Draws correlated Rayleigh channels `h_kl = F_kl w` with precomputed
/// PSD factors `F_kl F_kl^H = R_kl`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factors: Vec<Vec<CMatrix>>,
}

impl ChannelSampler {
    pub fn new(snapshot: &Snapshot) -> Result<Self> {
        let factors = snapshot
            .r
            .iter()
            .map(|row| row.iter().map(psd_factor).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ChannelRealization {
        let h = self
            .factors
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| {
                        let w = standard_complex_gaussian(f.cols(), rng);
                        f.mul_vec(&w)
                    })
                    .collect()
            })
            .collect();
        ChannelRealization { h }
    }
}

/// Convenience wrapper: factorizes and samples in one call.
pub fn sample_channels(snapshot: &Snapshot, rng: &mut impl Rng) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(snapshot)?.sample(rng))
}

/// I.i.d. standard circularly symmetric complex Gaussian vector
/// (unit variance per entry).
pub fn standard_complex_gaussian(dim: usize, rng: &mut impl Rng) -> CVec {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}
