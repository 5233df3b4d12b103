//! Belief-propagation recovery of pixel values from GF(2) shot LLRs.
//!
//! Signal nodes act as parity checks carrying their own channel LLR; pixel
//! nodes are variables with no prior. Messages follow the sum-product rules
//! under a flooding schedule: every signal-to-pixel message is updated from
//! the previous pixel-to-signal messages, then every pixel-to-signal message
//! from the new signal-to-pixel ones.
//!
//! LLRs are oriented so that a positive value favours 1, matching the final
//! decision `I_j = 1` iff `L_j >= 0`. In that orientation the tanh rule for a
//! shot lighting `M` pixels carries a factor `(-1)^(M+1)`:
//!
//! ```text
//! r(i->j) = (-1)^(M_i+1) * 2 atanh( tanh(L_i/2) * prod_{j' in A_i, j' != j} tanh(q(j'->i)/2) )
//! q(j->i) = sum_{i' in B_j, i' != i} r(i'->j)
//! ```

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};
use crate::ltcode::EncodingGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpConfig {
    /// Iteration cap. Zero runs only the initial signal-to-pixel pass.
    pub max_iterations: usize,
    /// Bound applied to every stored message magnitude.
    pub message_clamp: f64,
    /// Stop as soon as the decoded pixels satisfy every shot's hard parity.
    pub stop_on_syndrome: bool,
    /// Record per-iteration diagnostics in the result.
    pub trace: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_iterations: 50,
            message_clamp: 30.0,
            stop_on_syndrome: true,
            trace: false,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.message_clamp.is_nan() || self.message_clamp <= 0.0 {
            return Err(Error::config("message_clamp must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub unsatisfied: usize,
    pub mean_abs_llr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// `I_j`.
    pub decoded: Vec<u8>,
    /// `L_j`.
    pub pixel_llrs: Vec<f64>,
    /// `S_i`.
    pub signal_llrs: Vec<f64>,
    pub iterations_used: usize,
    /// Whether the final decision satisfies every shot's parity.
    pub converged: bool,
    /// Pixels never illuminated; they decode through the tie rule.
    pub uncovered: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

/// Edge-indexed view of the graph. Edges are numbered shot by shot in the
/// order of `A_i`.
struct Edges {
    shot_start: Vec<usize>,
    pixel_of: Vec<usize>,
    pixel_edges: Vec<Vec<usize>>,
}

impl Edges {
    fn new(graph: &EncodingGraph) -> Self {
        let mut shot_start = Vec::with_capacity(graph.shot_count() + 1);
        let mut pixel_of = Vec::with_capacity(graph.edge_count());
        let mut pixel_edges = vec![Vec::new(); graph.pixel_count()];
        shot_start.push(0);
        for shot in graph.shots() {
            for &j in shot {
                pixel_edges[j].push(pixel_of.len());
                pixel_of.push(j);
            }
            shot_start.push(pixel_of.len());
        }
        Edges {
            shot_start,
            pixel_of,
            pixel_edges,
        }
    }

    fn shot(&self, i: usize) -> std::ops::Range<usize> {
        self.shot_start[i]..self.shot_start[i + 1]
    }
}

fn check_inputs(llrs: &[f64], graph: &EncodingGraph) -> Result<()> {
    if llrs.len() != graph.shot_count() {
        return Err(Error::LengthMismatch {
            expected: graph.shot_count(),
            found: llrs.len(),
        });
    }
    if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Runs belief propagation and returns the final pixel decisions.
pub fn decode(llrs: &[f64], graph: &EncodingGraph, cfg: &BpConfig) -> Result<ReconstructionResult> {
    check_inputs(llrs, graph)?;
    cfg.validate()?;
    let clamp = cfg.message_clamp;
    let edges = Edges::new(graph);
    let n_edges = edges.pixel_of.len();
    let mut to_pixel = vec![0.0f64; n_edges];
    let mut to_signal = vec![0.0f64; n_edges];
    let mut tanh_buf = Vec::new();
    let mut suffix = Vec::new();

    let signal_pass = |to_signal: &[f64], to_pixel: &mut [f64], tanh_buf: &mut Vec<f64>, suffix: &mut Vec<f64>| {
        for (i, &l) in llrs.iter().enumerate() {
            let range = edges.shot(i);
            let degree = range.len();
            let sign = if degree % 2 == 1 { 1.0 } else { -1.0 };
            tanh_buf.clear();
            tanh_buf.extend(to_signal[range.clone()].iter().map(|q| (q / 2.0).tanh()));
            suffix.clear();
            suffix.resize(degree + 1, 1.0);
            for k in (0..degree).rev() {
                suffix[k] = suffix[k + 1] * tanh_buf[k];
            }
            let mut prefix = (l / 2.0).tanh();
            for (k, e) in range.enumerate() {
                let p = prefix * suffix[k + 1];
                to_pixel[e] = (sign * 2.0 * p.atanh()).clamp(-clamp, clamp);
                prefix *= tanh_buf[k];
            }
        }
    };

    let pixel_posteriors = |to_pixel: &[f64]| -> Vec<f64> {
        edges
            .pixel_edges
            .iter()
            .map(|es| es.iter().map(|&e| to_pixel[e]).sum())
            .collect()
    };

    let mut trace = Vec::new();
    signal_pass(&to_signal, &mut to_pixel, &mut tanh_buf, &mut suffix);
    let mut pixel_llrs = pixel_posteriors(&to_pixel);
    let mut decoded = decide(&pixel_llrs);
    let mut unsatisfied = unsatisfied_count(&decoded, llrs, graph);
    if cfg.trace {
        trace.push(trace_row(0, unsatisfied, &pixel_llrs));
    }
    let mut iterations = 0;
    while iterations < cfg.max_iterations && !(cfg.stop_on_syndrome && unsatisfied == 0) {
        iterations += 1;
        for (j, es) in edges.pixel_edges.iter().enumerate() {
            for &e in es {
                to_signal[e] = (pixel_llrs[j] - to_pixel[e]).clamp(-clamp, clamp);
            }
        }
        signal_pass(&to_signal, &mut to_pixel, &mut tanh_buf, &mut suffix);
        pixel_llrs = pixel_posteriors(&to_pixel);
        decoded = decide(&pixel_llrs);
        unsatisfied = unsatisfied_count(&decoded, llrs, graph);
        if cfg.trace {
            trace.push(trace_row(iterations, unsatisfied, &pixel_llrs));
        }
    }

    let signal_llrs = llrs
        .iter()
        .enumerate()
        .map(|(i, &l)| l + to_signal[edges.shot(i)].iter().sum::<f64>())
        .collect();
    Ok(ReconstructionResult {
        decoded,
        pixel_llrs,
        signal_llrs,
        iterations_used: iterations,
        converged: unsatisfied == 0,
        uncovered: graph.uncovered_pixels(),
        trace,
    })
}

fn decide(pixel_llrs: &[f64]) -> Vec<u8> {
    pixel_llrs.iter().map(|&l| (l >= 0.0) as u8).collect()
}

fn trace_row(iteration: usize, unsatisfied: usize, pixel_llrs: &[f64]) -> TraceRow {
    let mean_abs_llr = if pixel_llrs.is_empty() {
        0.0
    } else {
        pixel_llrs.iter().map(|l| l.abs()).sum::<f64>() / pixel_llrs.len() as f64
    };
    TraceRow {
        iteration,
        unsatisfied,
        mean_abs_llr,
    }
}

fn unsatisfied_count(decoded: &[u8], llrs: &[f64], graph: &EncodingGraph) -> usize {
    graph
        .shots()
        .iter()
        .zip(llrs)
        .filter(|(shot, &l)| {
            let parity = shot.iter().fold(0u8, |acc, &j| acc ^ decoded[j]);
            parity != (l >= 0.0) as u8
        })
        .count()
}

/// True iff every shot's parity over `decoded` matches the hard sign of its
/// channel LLR (`L_i >= 0` reads as 1).
pub fn syndrome_ok(decoded: &[u8], llrs: &[f64], graph: &EncodingGraph) -> Result<bool> {
    if decoded.len() != graph.pixel_count() {
        return Err(Error::LengthMismatch {
            expected: graph.pixel_count(),
            found: decoded.len(),
        });
    }
    if llrs.len() != graph.shot_count() {
        return Err(Error::LengthMismatch {
            expected: graph.shot_count(),
            found: llrs.len(),
        });
    }
    Ok(unsatisfied_count(decoded, llrs, graph) == 0)
}

/// `iteration,unsatisfied,mean_abs_llr`.
pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "unsatisfied", "mean_abs_llr"])?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            t.unsatisfied.to_string(),
            t.mean_abs_llr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Output of the peeling decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelResult {
    /// Resolved pixel values; `None` where peeling never reached the pixel.
    pub assignment: Vec<Option<u8>>,
    pub unresolved: Vec<usize>,
}

impl PeelResult {
    pub fn is_complete(&self) -> bool {
        self.unresolved.is_empty()
    }
}

/// Classical LT peeling on the hard signs of `llrs`.
///
/// Shots with one remaining unknown pixel fix that pixel to their residual
/// parity; the value is then substituted into every other shot covering it.
/// When a noisy shot disagrees with an already fixed pixel, the first value
/// stands.
pub fn peel_decode(llrs: &[f64], graph: &EncodingGraph) -> Result<PeelResult> {
    if llrs.len() != graph.shot_count() {
        return Err(Error::LengthMismatch {
            expected: graph.shot_count(),
            found: llrs.len(),
        });
    }
    let k = graph.pixel_count();
    let mut residual: Vec<u8> = llrs.iter().map(|&l| (l >= 0.0) as u8).collect();
    let mut remaining: Vec<usize> = graph.shots().iter().map(Vec::len).collect();
    // XOR of the indices still unknown in each shot; equals the last one when
    // a single unknown remains.
    let mut index_xor: Vec<usize> = graph
        .shots()
        .iter()
        .map(|s| s.iter().fold(0, |a, &j| a ^ j))
        .collect();
    let mut assignment: Vec<Option<u8>> = vec![None; k];
    let mut ripple: VecDeque<usize> = (0..graph.shot_count())
        .filter(|&i| remaining[i] == 1)
        .collect();
    while let Some(i) = ripple.pop_front() {
        if remaining[i] != 1 {
            continue;
        }
        let j = index_xor[i];
        let value = residual[i];
        assignment[j] = Some(value);
        for &s in graph.pixel_shots(j) {
            residual[s] ^= value;
            index_xor[s] ^= j;
            remaining[s] -= 1;
            if remaining[s] == 1 {
                ripple.push_back(s);
            }
        }
    }
    let unresolved = (0..k).filter(|&j| assignment[j].is_none()).collect();
    Ok(PeelResult {
        assignment,
        unresolved,
    })
}
