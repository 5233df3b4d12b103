//! Bucket-detector measurements: light collection as arithmetic addition,
//! followed by additive white Gaussian noise.
//!
//! All analog values are in the same units as `y0_mean`, the detector
//! response for one transmissive illuminated pixel. Propagation attenuation is
//! not modelled.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ltcode::{EncodingGraph, IlluminationPattern};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Mean detector output per lit transmissive pixel.
    pub y0_mean: f64,
    /// Noise variance.
    pub sigma2: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            y0_mean: 1.0,
            sigma2: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn new(y0_mean: f64, sigma2: f64) -> Result<Self> {
        let p = ChannelParams { y0_mean, sigma2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y0_mean > 0.0 && self.y0_mean.is_finite()) {
            return Err(Error::config(format!(
                "y0_mean must be positive, got {}",
                self.y0_mean
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config(format!(
                "sigma2 must be non-negative, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// Bucket readings for every shot of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub params: ChannelParams,
    pub graph_seed: u64,
    pub noise_seed: u64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with `# key=value` header comments for the channel parameters and
    /// seeds, then `shot_index,y_value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# y0_mean={}", self.params.y0_mean)?;
        writeln!(out, "# sigma2={}", self.params.sigma2)?;
        writeln!(out, "# graph_seed={}", self.graph_seed)?;
        writeln!(out, "# noise_seed={}", self.noise_seed)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["shot_index", "y_value"])?;
        for (i, y) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let text = std::io::read_to_string(input)?;
        let mut params = ChannelParams::default();
        let (mut graph_seed, mut noise_seed) = (0, 0);
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len();
            let Some(comment) = line.trim().strip_prefix('#') else {
                continue;
            };
            let Some((key, value)) = comment.trim().split_once('=') else {
                continue;
            };
            let bad = || Error::parse(at, format!("invalid value for {}", key.trim()));
            match key.trim() {
                "y0_mean" => params.y0_mean = value.trim().parse().map_err(|_| bad())?,
                "sigma2" => params.sigma2 = value.trim().parse().map_err(|_| bad())?,
                "graph_seed" => graph_seed = value.trim().parse().map_err(|_| bad())?,
                "noise_seed" => noise_seed = value.trim().parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        params.validate()?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut values = Vec::new();
        for (row, record) in reader.deserialize::<(usize, f64)>().enumerate() {
            let (i, y) = record?;
            if i != row {
                return Err(Error::parse(
                    0,
                    format!("shot_index {i} out of sequence at row {row}"),
                ));
            }
            values.push(y);
        }
        Ok(MeasurementRecord {
            values,
            params,
            graph_seed,
            noise_seed,
        })
    }
}

/// Noiseless bucket value `m * y0` with `m` the number of lit transmissive
/// pixels.
pub fn bucket_sum(pixels: &[u8], pattern: &IlluminationPattern, params: &ChannelParams) -> Result<f64> {
    if pattern.len() != pixels.len() {
        return Err(Error::LengthMismatch {
            expected: pixels.len(),
            found: pattern.len(),
        });
    }
    let m: usize = pixels
        .iter()
        .zip(pattern.mask())
        .filter(|&(&x, &a)| x != 0 && a != 0)
        .count();
    Ok(m as f64 * params.y0_mean)
}

/// Noiseless bucket values for every shot of `graph`.
pub fn clean_sums(pixels: &[u8], graph: &EncodingGraph, y0_mean: f64) -> Result<Vec<f64>> {
    if pixels.len() != graph.pixel_count() {
        return Err(Error::LengthMismatch {
            expected: graph.pixel_count(),
            found: pixels.len(),
        });
    }
    Ok(graph
        .shots()
        .iter()
        .map(|shot| shot.iter().map(|&j| pixels[j] as usize).sum::<usize>() as f64 * y0_mean)
        .collect())
}

/// Adds independent N(0, sigma2) noise to every value. `sigma2 = 0` returns the
/// input unchanged without consuming randomness.
pub fn add_awgn<R: Rng + ?Sized>(clean: &[f64], sigma2: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::config(format!("invalid noise variance {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(clean.to_vec());
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("positive finite deviation");
    Ok(clean.iter().map(|&y| y + normal.sample(rng)).collect())
}

/// Noise variance that puts `clean` at `snr_db`, with the mean-square of the
/// noiseless signal standing in for `P_s - P_n`.
pub fn calibrate_sigma(clean: &[f64], snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::Calibration(format!("SNR {snr_db} dB is not finite")));
    }
    if clean.is_empty() || clean.iter().all(|&y| y == 0.0) {
        return Err(Error::Calibration(
            "SNR is undefined for an all-zero signal".into(),
        ));
    }
    let power = clean.iter().map(|y| y * y).sum::<f64>() / clean.len() as f64;
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Simulates every shot of `graph` against the block `pixels`.
pub fn measure_all<R: Rng + ?Sized>(
    pixels: &[u8],
    graph: &EncodingGraph,
    params: &ChannelParams,
    rng: &mut R,
    noise_seed: u64,
) -> Result<MeasurementRecord> {
    params.validate()?;
    let clean = clean_sums(pixels, graph, params.y0_mean)?;
    let values = add_awgn(&clean, params.sigma2, rng)?;
    Ok(MeasurementRecord {
        values,
        params: *params,
        graph_seed: graph.seed(),
        noise_seed,
    })
}
