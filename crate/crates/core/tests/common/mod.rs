//! Oracles shared by the integration and acceptance tests. Nothing here calls
//! into the decoder or remapper under test.

#![allow(dead_code)]

use ecc_imaging::bpdecoder;
use ecc_imaging::channel;
use ecc_imaging::ltcode::{self, EncodingGraph};
use ecc_imaging::rng::{self, Stream};
use ecc_imaging::scene::{self, BinaryScene};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

/// Exact per-pixel posterior LLRs by enumerating all `2^K` pixel
/// configurations under a uniform prior; shot `i` multiplies the weight of an
/// odd-parity configuration by `exp(L_i)`.
pub fn exact_marginals(graph: &EncodingGraph, llrs: &[f64]) -> Vec<f64> {
    let k = graph.pixel_count();
    assert!(k <= 16);
    let masks: Vec<u32> = graph
        .shots()
        .iter()
        .map(|s| s.iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let log_w: Vec<f64> = (0u32..1 << k)
        .map(|x| {
            masks
                .iter()
                .zip(llrs)
                .filter(|(m, _)| (x & **m).count_ones() % 2 == 1)
                .map(|(_, l)| l)
                .sum()
        })
        .collect();
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..k)
        .map(|j| {
            let (mut one, mut zero) = (0.0, 0.0);
            for (x, w) in log_w.iter().enumerate() {
                let p = (w - peak).exp();
                if (x >> j) & 1 == 1 {
                    one += p;
                } else {
                    zero += p;
                }
            }
            one.ln() - zero.ln()
        })
        .collect()
}

/// Pixel-wise maximum a posteriori decisions (1 where the posterior favours 1;
/// exact ties go to 1).
pub fn map_bits(marginals: &[f64]) -> Vec<u8> {
    marginals.iter().map(|&l| (l >= 0.0) as u8).collect()
}

/// A random cycle-free factor graph covering every pixel, with `pixels` pixels.
///
/// Each new shot attaches to exactly one pixel already in the tree plus zero
/// or more fresh pixels, which keeps the bipartite graph acyclic.
pub fn random_tree(pixels: usize, rng: &mut Stream) -> EncodingGraph {
    let mut shots = Vec::new();
    let mut placed = 1;
    while placed < pixels {
        let anchor = rng.random_range(0..placed);
        let fresh = rng.random_range(0..=3usize).min(pixels - placed);
        let mut shot = vec![anchor];
        shot.extend(placed..placed + fresh);
        placed += fresh;
        shots.push(shot);
    }
    for _ in 0..rng.random_range(1..=pixels) {
        shots.push(vec![rng.random_range(0..pixels)]);
    }
    EncodingGraph::from_shots(pixels, shots, 0).unwrap()
}

fn has_cycle(graph: &EncodingGraph) -> bool {
    // Union-find over pixel and shot nodes; an edge joining an already
    // connected pair closes a cycle.
    let k = graph.pixel_count();
    let mut parent: Vec<usize> = (0..k + graph.shot_count()).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for (i, shot) in graph.shots().iter().enumerate() {
        for &j in shot {
            let (a, b) = (find(&mut parent, k + i), find(&mut parent, j));
            if a == b {
                return true;
            }
            parent[a] = b;
        }
    }
    false
}

/// A random factor graph with at least one cycle and every pixel covered.
pub fn random_loopy(pixels: usize, rng: &mut Stream) -> EncodingGraph {
    loop {
        let n = rng.random_range(pixels..=2 * pixels);
        let shots: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let d = rng.random_range(1..=3usize.min(pixels));
                sample(rng, pixels, d).into_vec()
            })
            .collect();
        let g = EncodingGraph::from_shots(pixels, shots, 0).unwrap();
        if g.uncovered_pixels().is_empty() && has_cycle(&g) {
            return g;
        }
    }
}

/// Channel LLRs for a random truth: consistent Gaussian LLRs `N(±mu, 2mu)`,
/// positive for odd parity.
pub fn noisy_parity_llrs(graph: &EncodingGraph, mu: f64, rng: &mut Stream) -> Vec<f64> {
    let truth: Vec<u8> = (0..graph.pixel_count()).map(|_| rng.random_range(0..2)).collect();
    let noise = Normal::new(0.0, (2.0 * mu).sqrt()).unwrap();
    graph
        .shots()
        .iter()
        .map(|s| {
            let odd = s.iter().map(|&j| truth[j] as usize).sum::<usize>() % 2 == 1;
            (if odd { mu } else { -mu }) + noise.sample(rng)
        })
        .collect()
}

/// Probability that rounding `m + sigma·z` to the nearest integer in
/// `[0, degree]` gives a count of the other parity, with `m ~ Binomial(degree, 1/2)`.
///
/// Computed as one minus the probability of landing in a same-parity cell.
pub fn parity_flip_probability(degree: usize, sigma: f64) -> f64 {
    let z = StdNormal::new(0.0, 1.0).unwrap();
    let choose = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64) };
    let prior = |m: usize| choose(degree, m) / 2f64.powi(degree as i32);
    let mut same = 0.0;
    for m in 0..=degree {
        for k in (0..=degree).filter(|k| k % 2 == m % 2) {
            let upper = if k == degree { 1.0 } else { z.cdf((k as f64 + 0.5 - m as f64) / sigma) };
            let lower = if k == 0 { 0.0 } else { z.cdf((k as f64 - 0.5 - m as f64) / sigma) };
            same += prior(m) * (upper - lower);
        }
    }
    1.0 - same
}

pub fn glyph() -> BinaryScene {
    scene::make_test_pattern("glyph-GI", 64, 64).unwrap()
}

/// Peeling on noiseless parities of the 64×64 glyph with `shots` shots per
/// seed. A seed succeeds when every covered pixel is resolved and correct.
/// Returns the number of successful seeds.
pub fn peel_successes(seeds: std::ops::Range<u64>, shots: usize) -> usize {
    let truth = glyph();
    seeds
        .filter(|&seed| {
            let g = ltcode::build_graph(
                truth.len(),
                shots,
                &ltcode::omega_paper(),
                &mut rng::stream(seed),
                seed,
            )
            .unwrap();
            let clean = channel::clean_sums(truth.pixels(), &g, 1.0).unwrap();
            let llrs: Vec<f64> = clean
                .iter()
                .map(|&m| if m.round() as u64 % 2 == 1 { 1.0 } else { -1.0 })
                .collect();
            let p = bpdecoder::peel_decode(&llrs, &g).unwrap();
            p.unresolved == g.uncovered_pixels()
                && p
                    .assignment
                    .iter()
                    .zip(truth.pixels())
                    .all(|(a, &t)| a.is_none_or(|v| v == t))
        })
        .count()
}
