//! Fast invariant suite behind `aircomp selftest`: scalar optimality
//! residuals, PSD factorization checks, fronthaul counts, and a small
//! end-to-end determinism run. Designed to finish in well under a minute.

use aircomp_core::channel::SystemConfig;
use aircomp_core::design::{fronthaul_count, optimal_b_scalar};
use aircomp_core::linalg::{psd_factor, quad_form, CVec, HermitianMatrix};
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config;
use crate::harness;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(), String>) -> Check {
    match run() {
        Ok(()) => Check {
            name,
            passed: true,
            detail: String::new(),
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_psd(dim: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let cols = dim + 1;
    let rows: Vec<CVec> = (0..dim)
        .map(|_| {
            (0..cols)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    HermitianMatrix::from_fn(dim, |i, j| {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| a * b.conj())
            .sum()
    })
}

fn kkt_residuals() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let c = Complex64::new(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
        let e = rng.gen::<f64>() * 2.0;
        let p = rng.gen::<f64>() * 10.0 + 0.01;
        let (b, mu) = optimal_b_scalar(c, e, p);
        let grad = c.conj() * (c * b - Complex64::ONE) + (e + mu) * b;
        if grad.norm() > 1e-10 * (1.0 + c.norm()) {
            return Err(format!("case {case}: stationarity residual {}", grad.norm()));
        }
        if b.norm_sqr() > p * (1.0 + 1e-12) {
            return Err(format!("case {case}: power violated"));
        }
        if mu < 0.0 {
            return Err(format!("case {case}: negative multiplier"));
        }
        if mu > 0.0 && (b.norm_sqr() - p).abs() > 1e-9 * p {
            return Err(format!("case {case}: complementary slackness violated"));
        }
    }
    Ok(())
}

fn psd_checks() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..50 {
        let dim = 1 + (case % 5);
        let m = random_psd(dim, &mut rng);
        let f = psd_factor(&m).map_err(|e| format!("case {case}: {e}"))?;
        let mut err: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let mut s = Complex64::ZERO;
                for p in 0..f.cols() {
                    s += f[(i, p)] * f[(j, p)].conj();
                }
                err = err.max((s - m.get(i, j)).norm());
            }
        }
        if err > 1e-8 * (1.0 + m.frobenius_norm()) {
            return Err(format!("case {case}: reconstruction error {err}"));
        }
        let v: CVec = (0..dim)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let q = quad_form(&v, &m).map_err(|e| format!("case {case}: {e}"))?;
        if q < -1e-10 * (1.0 + m.frobenius_norm()) {
            return Err(format!("case {case}: negative quadratic form {q}"));
        }
    }
    Ok(())
}

fn fronthaul_counts() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..20 {
        let l = rng.gen_range(1u64..64);
        let n = rng.gen_range(1u64..8);
        let k = rng.gen_range(1u64..32);
        let tau_p = rng.gen_range(1usize..32);
        let tau_c = tau_p + rng.gen_range(1usize..300);
        let config = SystemConfig {
            ap_count: l as usize,
            antennas_per_ap: n as usize,
            device_count: k as usize,
            tau_p,
            tau_c,
            pilot_power_dbm: vec![20.0; k as usize],
            ..SystemConfig::default()
        };
        let f3 = fronthaul_count(3, &config);
        let f2 = fronthaul_count(2, &config);
        let f1 = fronthaul_count(1, &config);
        let ok = f3.per_block_to_cpu == tau_c as u64 * n * l
            && f3.per_block_to_aps == k
            && f3.statistical == Ratio::new(k * l * n * n, 2)
            && f2.per_block_to_cpu == (tau_c - tau_p) as u64 * l
            && f2.per_block_to_aps == 0
            && f2.statistical * 2 == Ratio::from_integer(2 * k * l + l + k * l * l)
            && f1.per_block_to_cpu == (tau_c - tau_p) as u64 * l
            && f1.per_block_to_aps == 0
            && f1.statistical == Ratio::from_integer(0);
        if !ok {
            return Err(format!("case {case}: count mismatch for L={l} N={n} K={k}"));
        }
    }
    Ok(())
}

fn scalar_oracles() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..50 {
        let dim = 1 + (case % 4);
        let m = random_psd(dim, &mut rng);
        let v: CVec = (0..dim)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let q = quad_form(&v, &m).map_err(|e| e.to_string())?;
        let mut naive = Complex64::ZERO;
        for i in 0..dim {
            for j in 0..dim {
                naive += v[i].conj() * m.get(i, j) * v[j];
            }
        }
        if (q - naive.re).abs() > 1e-10 * (1.0 + q.abs()) {
            return Err(format!("case {case}: quad form {q} vs naive {}", naive.re));
        }
    }
    Ok(())
}

fn end_to_end_determinism() -> Result<(), String> {
    let spec = config::resolve(serde_json::json!({
        "ap_count": 4,
        "antennas_per_ap": 2,
        "device_count": 3,
        "tau_p": 2,
        "snapshots": 1,
        "trials_per_snapshot": 5,
        "lsfd_samples": 20,
        "levels": ["3", "3-noTCO", "2", "1"]
    }))
    .map_err(|e| e.to_string())?;
    if harness::quick_determinism_check(&spec).map_err(|e| e.to_string())? {
        Ok(())
    } else {
        Err("repeated snapshot evaluation diverged".to_string())
    }
}

pub fn run() -> Vec<Check> {
    vec![
        check("kkt-residuals", kkt_residuals),
        check("psd-factorization", psd_checks),
        check("fronthaul-counts", fronthaul_counts),
        check("scalar-oracles", scalar_oracles),
        check("end-to-end-determinism", end_to_end_determinism),
    ]
}
