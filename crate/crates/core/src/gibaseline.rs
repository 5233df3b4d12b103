//! Uncoded ghost-imaging baselines.
//!
//! The scene is illuminated with i.i.d. Bernoulli patterns and reconstructed
//! either by correlating bucket values with pattern bits, or by projected
//! gradient descent on the box-constrained least-squares problem
//! `min ½‖A x − y/ȳ0‖²` over `x ∈ [0,1]^K` (no sparsity term).

use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::pnm::Tokens;

/// Dense N × K binary sensing matrix. Rows are stored as bytes; columns are
/// also kept as bitsets so that the Gram matrix `AᵀA` reduces to popcounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatrix {
    rows: usize,
    cols: usize,
    by_row: Vec<u8>,
    col_bits: Vec<u64>,
    words: usize,
}

impl PatternMatrix {
    pub fn from_rows(rows: usize, cols: usize, by_row: Vec<u8>) -> Result<Self> {
        if by_row.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: by_row.len(),
            });
        }
        if by_row.iter().any(|&a| a > 1) {
            return Err(Error::config("pattern entries must be 0 or 1"));
        }
        let words = rows.div_ceil(64);
        let mut col_bits = vec![0u64; cols * words];
        for (i, row) in by_row.chunks(cols.max(1)).enumerate() {
            for (j, &a) in row.iter().enumerate() {
                col_bits[j * words + i / 64] |= (a as u64) << (i % 64);
            }
        }
        Ok(PatternMatrix {
            rows,
            cols,
            by_row,
            col_bits,
            words,
        })
    }

    /// N.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// K.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.by_row[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.by_row[i * self.cols + j]
    }

    pub fn entries(&self) -> &[u8] {
        &self.by_row
    }

    fn col_words(&self, j: usize) -> &[u64] {
        &self.col_bits[j * self.words..(j + 1) * self.words]
    }

    /// Number of ones in column `j`.
    pub fn col_count(&self, j: usize) -> usize {
        self.col_words(j).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .into_par_iter()
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `Aᵀ r`.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a as f64 * ri;
            }
        }
        out
    }

    /// `AᵀA` as a dense K × K matrix of exact co-occurrence counts.
    pub fn gram(&self) -> Gram {
        let k = self.cols;
        let mut entries = vec![0.0; k * k];
        let upper: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let cj = self.col_words(j);
                (j..k)
                    .map(|l| {
                        cj.iter()
                            .zip(self.col_words(l))
                            .map(|(a, b)| (a & b).count_ones())
                            .sum::<u32>() as f64
                    })
                    .collect()
            })
            .collect();
        for (j, row) in upper.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                entries[j * k + j + off] = v;
                entries[(j + off) * k + j] = v;
            }
        }
        Gram { size: k, entries }
    }
}

/// Dense symmetric Gram matrix `AᵀA`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    size: usize,
    entries: Vec<f64>,
}

impl Gram {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .par_chunks(self.size.max(1))
            .map(|row| row.iter().zip(x).map(|(g, v)| g * v).sum())
            .collect()
    }

    /// Largest eigenvalue by power iteration from the all-ones vector.
    pub fn lambda_max(&self, iterations: usize) -> f64 {
        let k = self.size;
        let mut v = vec![1.0 / (k as f64).sqrt(); k];
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let w = self.apply(&v);
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            v = w.into_iter().map(|a| a / norm).collect();
        }
        lambda
    }
}

fn dot(bits: &[u8], x: &[f64]) -> f64 {
    bits.iter().zip(x).map(|(&a, &v)| a as f64 * v).sum()
}

/// I.i.d. Bernoulli(`p`) patterns for `shots` illuminations of `pixels` pixels.
pub fn bernoulli_patterns<R: Rng + ?Sized>(
    pixels: usize,
    shots: usize,
    p: f64,
    rng: &mut R,
) -> Result<PatternMatrix> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config(format!(
            "inclusion probability must lie in (0, 1), got {p}"
        )));
    }
    let entries = (0..pixels * shots)
        .map(|_| rng.random_bool(p) as u8)
        .collect();
    PatternMatrix::from_rows(shots, pixels, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GiMeasurement {
    pub patterns: PatternMatrix,
    pub values: Vec<f64>,
    pub params: ChannelParams,
}

impl GiMeasurement {
    pub fn new(patterns: PatternMatrix, values: Vec<f64>, params: ChannelParams) -> Result<Self> {
        if values.len() != patterns.rows() {
            return Err(Error::LengthMismatch {
                expected: patterns.rows(),
                found: values.len(),
            });
        }
        params.validate()?;
        Ok(GiMeasurement {
            patterns,
            values,
            params,
        })
    }
}

/// Noiseless bucket values `ȳ0 · A x` for a binary scene.
pub fn gi_clean_sums(pixels: &[u8], patterns: &PatternMatrix, y0_mean: f64) -> Result<Vec<f64>> {
    if pixels.len() != patterns.cols() {
        return Err(Error::LengthMismatch {
            expected: patterns.cols(),
            found: pixels.len(),
        });
    }
    let x: Vec<f64> = pixels.iter().map(|&p| p as f64 * y0_mean).collect();
    Ok(patterns.apply(&x))
}

/// Real-valued image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl AnalogImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                found: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        Ok(AnalogImage {
            width,
            height,
            values,
        })
    }
}

/// Sample covariance between bucket value and pattern bit at each pixel:
/// `(1/N) Σ_i y_i a_ij − ȳ ā_j`.
pub fn reconstruct_correlation(meas: &GiMeasurement, width: usize, height: usize) -> Result<AnalogImage> {
    let n = meas.patterns.rows();
    if n < 2 {
        return Err(Error::config("correlation needs at least 2 shots"));
    }
    let nf = n as f64;
    let y_mean = meas.values.iter().sum::<f64>() / nf;
    let cross = meas.patterns.apply_transpose(&meas.values);
    let values = (0..meas.patterns.cols())
        .map(|j| {
            let a_mean = meas.patterns.col_count(j) as f64 / nf;
            cross[j] / nf - y_mean * a_mean
        })
        .collect();
    AnalogImage::new(width, height, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpOutcome {
    pub image: AnalogImage,
    pub iterations: usize,
    /// Objective at the start point followed by one value per iteration.
    pub objectives: Vec<f64>,
    pub step: f64,
}

/// Box-constrained least squares by fixed-step projected gradient descent.
///
/// Starts at `x = 0.5`, steps by `1/λ_max(AᵀA)` (50 power iterations), and
/// stops after `iterations` steps or once the relative objective decrease
/// falls below `tolerance`. Works on the Gram form: the gradient is
/// `AᵀA x − Aᵀy` and the objective `½xᵀAᵀAx − xᵀAᵀy + ½‖y‖²`.
pub fn reconstruct_gp(
    meas: &GiMeasurement,
    width: usize,
    height: usize,
    iterations: usize,
    tolerance: f64,
) -> Result<GpOutcome> {
    reconstruct_gp_with_gram(meas, &meas.patterns.gram(), width, height, iterations, tolerance)
}

/// [`reconstruct_gp`] with a precomputed `AᵀA`, for reuse across several
/// readings taken with the same patterns.
pub fn reconstruct_gp_with_gram(
    meas: &GiMeasurement,
    gram: &Gram,
    width: usize,
    height: usize,
    iterations: usize,
    tolerance: f64,
) -> Result<GpOutcome> {
    if iterations == 0 {
        return Err(Error::config("GP needs at least one iteration"));
    }
    let a = &meas.patterns;
    if gram.size() != a.cols() {
        return Err(Error::LengthMismatch {
            expected: a.cols(),
            found: gram.size(),
        });
    }
    let target: Vec<f64> = meas.values.iter().map(|y| y / meas.params.y0_mean).collect();
    let aty = a.apply_transpose(&target);
    let half_yy = 0.5 * target.iter().map(|v| v * v).sum::<f64>();
    let objective = |x: &[f64], gx: &[f64]| {
        let quad: f64 = x.iter().zip(gx).map(|(p, q)| p * q).sum();
        let lin: f64 = x.iter().zip(&aty).map(|(p, q)| p * q).sum();
        (0.5 * quad - lin + half_yy).max(0.0)
    };
    let lmax = gram.lambda_max(50);
    let step = if lmax > 0.0 { 1.0 / lmax } else { 0.0 };
    let mut x = vec![0.5; a.cols()];
    let mut gx = gram.apply(&x);
    let mut f = objective(&x, &gx);
    let mut objectives = vec![f];
    let mut done = 0;
    while done < iterations {
        for ((xj, gj), bj) in x.iter_mut().zip(&gx).zip(&aty) {
            *xj = (*xj - step * (gj - bj)).clamp(0.0, 1.0);
        }
        gx = gram.apply(&x);
        let f_new = objective(&x, &gx);
        done += 1;
        objectives.push(f_new);
        let decrease = if f > 0.0 { (f - f_new) / f } else { 0.0 };
        f = f_new;
        if decrease < tolerance {
            break;
        }
    }
    Ok(GpOutcome {
        image: AnalogImage::new(width, height, x)?,
        iterations: done,
        objectives,
        step,
    })
}

/// Min-max rescale to [0, 1]; a constant image maps to all 0.5.
pub fn normalize(img: &AnalogImage) -> AnalogImage {
    let lo = img.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if hi > lo {
        img.values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; img.values.len()]
    };
    AnalogImage {
        width: img.width,
        height: img.height,
        values,
    }
}

/// Plain PGM (P2, maxval 255) of the normalized image, levels rounded half up.
pub fn write_pgm(img: &AnalogImage) -> Vec<u8> {
    let norm = normalize(img);
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in norm.values.chunks(img.width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v * 255.0 + 0.5).floor() as u32).min(255).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses plain PGM (P2); values are returned as `level / maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<AnalogImage> {
    let mut t = Tokens::new(bytes);
    t.expect_magic("P2")?;
    let width = t.expect_uint("width")?;
    let height = t.expect_uint("height")?;
    let maxval = t.expect_uint("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(t.offset(), format!("maxval {maxval} out of range")));
    }
    let total = width * height;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let (at, tok) = t.next_token().ok_or_else(|| {
            Error::parse(
                bytes.len(),
                format!("token count mismatch: expected {total} samples, found {}", values.len()),
            )
        })?;
        let v = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(at, format!("invalid sample {:?}", String::from_utf8_lossy(tok))))?;
        if v > maxval {
            return Err(Error::parse(at, format!("sample {v} exceeds maxval {maxval}")));
        }
        values.push(v as f64 / maxval as f64);
    }
    t.expect_end(total)?;
    AnalogImage::new(width, height, values)
}
