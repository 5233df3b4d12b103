//! LT-code degree distributions and the illumination graph.
//!
//! Each shot `i` draws a degree `d` from the distribution, then lights `d`
//! distinct pixels chosen uniformly without replacement. The resulting
//! bipartite graph stores both directions: `A_i` (pixels lit by shot `i`) and
//! `B_j` (shots that lit pixel `j`).

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// A probability mass function over illumination degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    support: Vec<usize>,
    mass: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from `(degree, probability)` pairs.
    ///
    /// Degrees must be distinct and at least 1; masses must be non-negative and
    /// sum to 1 within 1e-12.
    pub fn new(table: &[(usize, f64)]) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::config("degree distribution is empty"));
        }
        let mut entries = table.to_vec();
        entries.sort_by_key(|&(d, _)| d);
        if entries[0].0 == 0 {
            return Err(Error::config("degree 0 is not allowed"));
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("duplicate degree in distribution"));
        }
        if entries.iter().any(|&(_, p)| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::config("degree masses must be finite and non-negative"));
        }
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "degree masses sum to {total}, expected 1"
            )));
        }
        let support: Vec<usize> = entries.iter().map(|&(d, _)| d).collect();
        let mass: Vec<f64> = entries.iter().map(|&(_, p)| p).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = mass
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Guard the top bin against rounding so every uniform draw lands somewhere.
        *cumulative.last_mut().unwrap() = f64::INFINITY;
        Ok(DegreeDistribution {
            support,
            mass,
            cumulative,
        })
    }

    /// Point mass on a single degree.
    pub fn constant(degree: usize) -> Result<Self> {
        Self::new(&[(degree, 1.0)])
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Probability of degree `d` (0 outside the support).
    pub fn mass(&self, d: usize) -> f64 {
        self.support
            .binary_search(&d)
            .map(|k| self.mass[k])
            .unwrap_or(0.0)
    }

    pub fn max_degree(&self) -> usize {
        *self.support.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(&d, &p)| d as f64 * p)
            .sum()
    }

    /// Draws one degree by inverting the cumulative mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let k = self.cumulative.partition_point(|&c| c <= u);
        // Zero-mass degrees have a flat cumulative step and are never selected.
        self.support[k.min(self.support.len() - 1)]
    }
}

/// The distribution used in the reference experiment: degrees 1 to 10, with
/// 30% each on degrees 1 and 2 and 5% on each of 3..=10.
pub fn omega_paper() -> DegreeDistribution {
    let table: Vec<(usize, f64)> = (1..=10)
        .map(|d| (d, if d <= 2 { 0.30 } else { 0.05 }))
        .collect();
    DegreeDistribution::new(&table).expect("reference distribution is valid")
}

pub fn sample_degree<R: Rng + ?Sized>(dist: &DegreeDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Bipartite illumination graph for one block of `pixel_count` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingGraph {
    pixel_count: usize,
    signal_nodes: Vec<Vec<usize>>,
    pixel_adjacency: Vec<Vec<usize>>,
    seed: u64,
}

impl EncodingGraph {
    /// Builds a graph from explicit shot lists. Each list must be non-empty
    /// with distinct indices below `pixel_count`; lists are stored sorted.
    pub fn from_shots(pixel_count: usize, shots: Vec<Vec<usize>>, seed: u64) -> Result<Self> {
        let mut signal_nodes = shots;
        for (i, shot) in signal_nodes.iter_mut().enumerate() {
            if shot.is_empty() {
                return Err(Error::config(format!("shot {i} illuminates no pixel")));
            }
            shot.sort_unstable();
            if shot.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::config(format!("shot {i} repeats a pixel")));
            }
            if let Some(&j) = shot.last().filter(|&&j| j >= pixel_count) {
                return Err(Error::OutOfRange {
                    index: j,
                    len: pixel_count,
                });
            }
        }
        let mut pixel_adjacency = vec![Vec::new(); pixel_count];
        for (i, shot) in signal_nodes.iter().enumerate() {
            for &j in shot {
                pixel_adjacency[j].push(i);
            }
        }
        Ok(EncodingGraph {
            pixel_count,
            signal_nodes,
            pixel_adjacency,
            seed,
        })
    }

    /// K.
    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    /// N.
    pub fn shot_count(&self) -> usize {
        self.signal_nodes.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A_i, sorted.
    pub fn shot(&self, i: usize) -> &[usize] {
        &self.signal_nodes[i]
    }

    pub fn shots(&self) -> &[Vec<usize>] {
        &self.signal_nodes
    }

    /// M_i = |A_i|.
    pub fn degree(&self, i: usize) -> usize {
        self.signal_nodes[i].len()
    }

    /// B_j, ascending shot indices.
    pub fn pixel_shots(&self, j: usize) -> &[usize] {
        &self.pixel_adjacency[j]
    }

    pub fn edge_count(&self) -> usize {
        self.signal_nodes.iter().map(Vec::len).sum()
    }

    /// Pixels no shot ever lit (B_j empty).
    pub fn uncovered_pixels(&self) -> Vec<usize> {
        (0..self.pixel_count)
            .filter(|&j| self.pixel_adjacency[j].is_empty())
            .collect()
    }

    /// Writes the line format: `K N seed`, then one line of space-separated
    /// pixel indices per shot.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {}\n",
            self.pixel_count,
            self.shot_count(),
            self.seed
        );
        for shot in &self.signal_nodes {
            for (k, j) in shot.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write!(out, "{j}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Parse errors report the byte
    /// offset of the offending line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut offset = 0;
        let mut lines = text.split_inclusive('\n').map(|line| {
            let at = offset;
            offset += line.len();
            (at, line.trim())
        });
        let (hdr_at, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "empty graph file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_u64 = |s: &str, at: usize| {
            s.parse::<u64>()
                .map_err(|_| Error::parse(at, format!("invalid header field {s:?}")))
        };
        if fields.len() != 3 {
            return Err(Error::parse(hdr_at, "header must be `K N seed`"));
        }
        let k = parse_u64(fields[0], hdr_at)? as usize;
        let n = parse_u64(fields[1], hdr_at)? as usize;
        let seed = parse_u64(fields[2], hdr_at)?;
        let mut shots = Vec::with_capacity(n);
        for (at, line) in lines {
            if line.is_empty() {
                continue;
            }
            let shot = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(at, format!("invalid pixel index {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            shots.push(shot);
        }
        if shots.len() != n {
            return Err(Error::parse(
                text.len(),
                format!("header declares {n} shots, found {}", shots.len()),
            ));
        }
        Self::from_shots(k, shots, seed)
    }
}

/// Draws an LT illumination graph with `shots` signal nodes over
/// `pixel_count` pixels. `seed` is recorded in the graph for provenance; the
/// randomness comes from `rng`.
pub fn build_graph<R: Rng + ?Sized>(
    pixel_count: usize,
    shots: usize,
    dist: &DegreeDistribution,
    rng: &mut R,
    seed: u64,
) -> Result<EncodingGraph> {
    if shots == 0 {
        return Err(Error::config("shot count must be at least 1"));
    }
    if dist.max_degree() > pixel_count {
        return Err(Error::config(format!(
            "maximum degree {} exceeds pixel count {pixel_count}",
            dist.max_degree()
        )));
    }
    let signal_nodes = (0..shots)
        .map(|_| {
            let d = dist.sample(rng);
            index::sample(rng, pixel_count, d).into_vec()
        })
        .collect();
    EncodingGraph::from_shots(pixel_count, signal_nodes, seed)
}

/// Binary illumination mask over the pixels of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlluminationPattern(Vec<u8>);

impl IlluminationPattern {
    pub fn from_mask(mask: Vec<u8>) -> Self {
        IlluminationPattern(mask)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mask(&self) -> &[u8] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b != 0).count()
    }
}

/// The mask for shot `i`: ones exactly at A_i.
pub fn pattern_of(graph: &EncodingGraph, i: usize) -> Result<IlluminationPattern> {
    if i >= graph.shot_count() {
        return Err(Error::OutOfRange {
            index: i,
            len: graph.shot_count(),
        });
    }
    let mut mask = vec![0u8; graph.pixel_count()];
    for &j in graph.shot(i) {
        mask[j] = 1;
    }
    Ok(IlluminationPattern(mask))
}
