//! Reconstruction scoring and SNR estimation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean squared per-pixel difference between an estimate in [0, 1] and the
/// binary ground truth.
pub fn mse(estimate: &[f64], truth: &[u8]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(&e, &t)| (e - t as f64).powi(2))
        .sum();
    Ok(total / truth.len() as f64)
}

/// [`mse`] for a decoded bit image.
pub fn mse_bits(decoded: &[u8], truth: &[u8]) -> Result<f64> {
    let est: Vec<f64> = decoded.iter().map(|&b| b as f64).collect();
    mse(&est, truth)
}

/// `10 log10((P_s - P_n) / P_n)`.
pub fn snr_of(signal_power: f64, noise_power: f64) -> Result<f64> {
    if noise_power.is_nan() || noise_power <= 0.0 {
        return Err(Error::Calibration(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    if signal_power.is_nan() || signal_power <= noise_power {
        return Err(Error::Calibration(format!(
            "SNR undefined: signal power {signal_power} does not exceed noise power {noise_power}"
        )));
    }
    Ok(10.0 * ((signal_power - noise_power) / noise_power).log10())
}

/// One scored reconstruction. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub snr_db: f64,
    pub seed: u64,
    pub mse: f64,
    pub iterations: usize,
    /// Fraction of pixels no shot illuminated (0 for the baselines).
    pub coverage_gap: f64,
}

pub const SCORE_COLUMNS: [&str; 6] = ["method", "snr_db", "seed", "mse", "iterations", "coverage_gap"];

pub fn write_scores<W: Write>(out: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SCORE_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores<R: Read>(input: R) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(SCORE_COLUMNS) {
        return Err(Error::parse(0, format!("unexpected score header {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::calibrate_sigma;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        let truth = [1u8, 0, 1, 1];
        assert_eq!(mse_bits(&truth, &truth).unwrap(), 0.0);
        assert_eq!(mse_bits(&[0, 1, 0, 0], &truth).unwrap(), 1.0);
        let mut truth = vec![0u8; 4096];
        truth[17] = 1;
        let est = vec![0u8; 4096];
        assert!((mse_bits(&est, &truth).unwrap() - 1.0 / 4096.0).abs() < 1e-18);
        assert!(mse(&[0.5], &truth).is_err());
    }

    #[test]
    fn snr_examples() {
        assert!(snr_of(2.0, 1.0).unwrap().abs() < 1e-15);
        assert!((snr_of(11.0, 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(snr_of(1.0, 1.0).is_err());
        assert!(snr_of(1.0, 0.0).is_err());
    }

    #[test]
    fn snr_inverts_calibration() {
        let clean = [0.0, 1.0, 2.0, 3.0, 1.0];
        let p = clean.iter().map(|y| y * y).sum::<f64>() / clean.len() as f64;
        for snr in [-5.0, -1.5, 0.0, 2.0, 17.0] {
            let s2 = calibrate_sigma(&clean, snr).unwrap();
            assert!((snr_of(p + s2, s2).unwrap() - snr).abs() < 1e-9);
        }
    }

    #[test]
    fn score_csv_round_trip() {
        let rows = vec![
            ScoreRow {
                method: "coded".into(),
                snr_db: -5.0,
                seed: 3,
                mse: 0.0123,
                iterations: 50,
                coverage_gap: 0.001,
            },
            ScoreRow {
                method: "gp".into(),
                snr_db: f64::INFINITY,
                seed: 1,
                mse: 1.0 / 3.0,
                iterations: 0,
                coverage_gap: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_scores(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"method,snr_db,seed,mse,iterations,coverage_gap\ncoded,-5.0,3,"));
        assert_eq!(read_scores(&buf[..]).unwrap(), rows);
        assert!(read_scores(&b"a,b\n1,2\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn mse_bounded_and_symmetric(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..100)) {
            let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let ab = mse_bits(&a, &b).unwrap();
            prop_assert_eq!(ab, mse_bits(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn mse_bounded_for_unit_interval(est in proptest::collection::vec(0.0f64..=1.0, 1..50), seed in any::<u64>()) {
            let truth: Vec<u8> = (0..est.len()).map(|j| (crate::rng::derive_seed(seed, &[j as u64]) & 1) as u8).collect();
            let m = mse(&est, &truth).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }
}
