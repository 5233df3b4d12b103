//! Conversion of analog bucket readings into GF(2) information.
//!
//! A reading `y` of a shot that lit `M` pixels is a noisy version of `m * y0`
//! for some integer `0 <= m <= M`; its GF(2) value is the parity of `m`.
//! Positive LLRs favour odd parity (GF(2) value 1) throughout the crate.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channel::{ChannelParams, MeasurementRecord};
use crate::error::{Error, Result};
use crate::ltcode::EncodingGraph;

/// Magnitude assigned to hard decisions when the channel is noiseless, and the
/// cap on hard-decision reliabilities in general.
pub const HARD_LLR_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemapMode {
    /// Nearest integer, then parity. The bit is passed on with the
    /// reliability of the rounding rule on this shot's degree.
    Hard,
    /// Max-minus-second-max of the integer LLRs, signed by the parity of the
    /// most likely integer.
    Soft,
    /// Exact parity posterior under a uniform pixel prior (for comparison).
    ExactParity,
}

impl std::str::FromStr for RemapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(RemapMode::Hard),
            "soft" => Ok(RemapMode::Soft),
            "exact-parity" => Ok(RemapMode::ExactParity),
            _ => Err(Error::config(format!(
                "unknown remap mode {s:?} (expected hard, soft or exact-parity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemappedSignal {
    /// Signed GF(2) LLR; positive means odd parity.
    pub llr: f64,
    pub bit: u8,
    /// Most likely integer count.
    pub m_star: usize,
    /// Confidence `|llr|`.
    pub delta_l: f64,
}

impl RemappedSignal {
    fn signed(m_star: usize, delta_l: f64) -> Self {
        let bit = (m_star % 2) as u8;
        // `0.0` rather than `-0.0` on ties keeps the neutral value canonical.
        let llr = if delta_l == 0.0 {
            0.0
        } else if bit == 1 {
            delta_l
        } else {
            -delta_l
        };
        RemappedSignal {
            llr,
            bit,
            m_star,
            delta_l,
        }
    }
}

fn require_noise(params: &ChannelParams) -> Result<()> {
    if params.sigma2 > 0.0 && params.sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "soft remapping needs sigma2 > 0; use hard remapping on a noiseless channel",
        ))
    }
}

/// `ln f(y | m y0) / f(y | 0) = (2y - m y0) m y0 / (2 sigma2)`.
pub fn integer_llr(y: f64, m: usize, params: &ChannelParams) -> Result<f64> {
    require_noise(params)?;
    Ok(integer_llr_unchecked(y, m, params))
}

fn integer_llr_unchecked(y: f64, m: usize, params: &ChannelParams) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let s = m as f64 * params.y0_mean;
    (2.0 * y - s) * s / (2.0 * params.sigma2)
}

/// Nearest-integer decision clamped to `[0, degree]`, ties to even.
pub fn remap_hard(y: f64, params: &ChannelParams, degree: usize) -> RemappedSignal {
    let m_star = nearest_count(y, params.y0_mean, degree);
    RemappedSignal::signed(m_star, hard_reliability(degree, params))
}

fn nearest_count(y: f64, y0: f64, degree: usize) -> usize {
    let r = (y / y0).round_ties_even();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= degree as f64 {
        degree
    } else {
        r as usize
    }
}

/// LLR magnitude attached to a hard bit: `ln((1 - p) / p)` where `p` is the
/// parity error probability of [`remap_hard`] for this degree, capped at
/// [`HARD_LLR_CAP`].
pub fn hard_reliability(degree: usize, params: &ChannelParams) -> f64 {
    let p = hard_parity_error_probability(degree, params);
    if p <= 0.0 {
        return HARD_LLR_CAP;
    }
    ((1.0 - p) / p).ln().clamp(0.0, HARD_LLR_CAP)
}

fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// Probability that the nearest-integer rule returns the wrong parity for a
/// shot of the given degree, with each lit pixel independently 0 or 1 with
/// probability 1/2 (so `m ~ Binomial(degree, 1/2)`).
///
/// This is the total mass of each Gaussian `f(y | m y0)` falling into decision
/// regions of the opposite parity.
pub fn hard_parity_error_probability(degree: usize, params: &ChannelParams) -> f64 {
    if params.sigma2 == 0.0 {
        return 0.0;
    }
    let sigma = params.sigma2.sqrt() / params.y0_mean;
    let weights = binomial_half(degree);
    let mut err = 0.0;
    for (m, w) in weights.iter().enumerate() {
        for k in (0..=degree).filter(|k| (k + m) % 2 == 1) {
            let lo = if k == 0 { f64::NEG_INFINITY } else { k as f64 - 0.5 };
            let hi = if k == degree { f64::INFINITY } else { k as f64 + 0.5 };
            let mass = std_normal_cdf((hi - m as f64) / sigma) - std_normal_cdf((lo - m as f64) / sigma);
            err += w * mass;
        }
    }
    err
}

fn binomial_half(n: usize) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (k, c) in row.iter().enumerate() {
            next[k] += c / 2.0;
            next[k + 1] += c / 2.0;
        }
        row = next;
    }
    row
}

/// Soft remapping from the `degree + 1` integer LLRs.
///
/// `m_star` is the arg-max (an exact tie between two counts resolves to the
/// even one, matching the hard rule at half-integer readings), and
/// `delta_l = L_max - L_second`.
pub fn remap_soft(y: f64, params: &ChannelParams, degree: usize) -> Result<RemappedSignal> {
    require_noise(params)?;
    let llrs: Vec<f64> = (0..=degree)
        .map(|m| integer_llr_unchecked(y, m, params))
        .collect();
    Ok(soft_from_table(&llrs))
}

/// Soft remapping from an explicit integer-LLR table indexed by `m`.
pub fn soft_from_table(llrs: &[f64]) -> RemappedSignal {
    let mut best = 0;
    for (m, &l) in llrs.iter().enumerate().skip(1) {
        if l > llrs[best] || (l == llrs[best] && m % 2 == 0 && best % 2 == 1) {
            best = m;
        }
    }
    let second = llrs
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != best)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta = if second.is_finite() {
        llrs[best] - second
    } else {
        // Degree-0 table: nothing to compare against.
        0.0
    };
    RemappedSignal::signed(best, delta)
}

/// `ln P(m odd | y) / P(m even | y)` with `m ~ Binomial(degree, 1/2)`.
pub fn remap_exact_parity(y: f64, params: &ChannelParams, degree: usize) -> Result<RemappedSignal> {
    require_noise(params)?;
    let weights = binomial_half(degree);
    let terms: Vec<f64> = (0..=degree)
        .map(|m| weights[m].ln() + integer_llr_unchecked(y, m, params))
        .collect();
    let lse = |odd: bool| {
        let sel: Vec<f64> = terms
            .iter()
            .enumerate()
            .filter(|(m, _)| (m % 2 == 1) == odd)
            .map(|(_, &t)| t)
            .collect();
        let mx = sel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return mx;
        }
        mx + sel.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    };
    let llr = lse(true) - lse(false);
    let m_star = nearest_count(y, params.y0_mean, degree);
    Ok(RemappedSignal {
        llr,
        bit: (llr >= 0.0) as u8,
        m_star,
        delta_l: llr.abs(),
    })
}

/// Remaps every reading of `record`, using `M_i = |A_i|` from `graph`.
pub fn remap_record(
    record: &MeasurementRecord,
    graph: &EncodingGraph,
    mode: RemapMode,
) -> Result<Vec<RemappedSignal>> {
    if record.len() != graph.shot_count() {
        return Err(Error::LengthMismatch {
            expected: graph.shot_count(),
            found: record.len(),
        });
    }
    let params = &record.params;
    if mode == RemapMode::Hard {
        // One reliability per distinct degree.
        let max_deg = graph.shots().iter().map(Vec::len).max().unwrap_or(0);
        let rel: Vec<f64> = (0..=max_deg).map(|d| hard_reliability(d, params)).collect();
        return Ok(record
            .values
            .iter()
            .zip(graph.shots())
            .map(|(&y, shot)| {
                let m = nearest_count(y, params.y0_mean, shot.len());
                RemappedSignal::signed(m, rel[shot.len()])
            })
            .collect());
    }
    record
        .values
        .iter()
        .zip(graph.shots())
        .map(|(&y, shot)| match mode {
            RemapMode::Soft => remap_soft(y, params, shot.len()),
            _ => remap_exact_parity(y, params, shot.len()),
        })
        .collect()
}

/// Debug dump: `shot,y,m_star,delta_l,llr`.
pub fn write_remap_csv<W: Write>(
    out: W,
    record: &MeasurementRecord,
    remapped: &[RemappedSignal],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shot", "y", "m_star", "delta_l", "llr"])?;
    for (i, (y, r)) in record.values.iter().zip(remapped).enumerate() {
        w.write_record([
            i.to_string(),
            y.to_string(),
            r.m_star.to_string(),
            r.delta_l.to_string(),
            r.llr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
