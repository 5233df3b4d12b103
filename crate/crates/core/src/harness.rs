//! Experiment orchestration: SNR × seed sweeps over the coded pipeline and the
//! ghost-imaging baselines.
//!
//! Random streams are derived from `master_seed` and the cell coordinates
//! (see [`crate::rng::derive_seed`]):
//!
//! | stream                  | coordinates                                  |
//! |-------------------------|----------------------------------------------|
//! | LT graph of block `q`   | `[GRAPH, seed, q]`                           |
//! | coded noise, block `q`  | `[CODED_NOISE, seed, snr_db.to_bits(), q]`   |
//! | Bernoulli patterns      | `[GI_PATTERNS, seed]`                        |
//! | GI noise                | `[GI_NOISE, seed, snr_db.to_bits()]`         |
//!
//! The graph and patterns depend only on the seed, so every SNR point of a
//! seed reuses them and only the noise is redrawn. Removing a grid point or a
//! seed leaves every other row unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bpdecoder::{self, BpConfig};
use crate::channel::{self, ChannelParams, MeasurementRecord};
use crate::error::{Error, Result};
use crate::gibaseline::{self, GiMeasurement, Gram, PatternMatrix};
use crate::ltcode::{self, DegreeDistribution, EncodingGraph};
use crate::metrics::{self, ScoreRow};
use crate::remap::{self, RemapMode};
use crate::rng::{self, label};
use crate::scene::{self, BinaryScene, BlockPartition};

pub const METHOD_CODED: &str = "coded";
pub const METHOD_CORRELATION: &str = "correlation";
pub const METHOD_GP: &str = "gp";

/// Degree distribution as written in a config file: `"paper"` or a table of
/// `[degree, probability]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DegreeSetting {
    Named(String),
    Table(Vec<(usize, f64)>),
}

impl Default for DegreeSetting {
    fn default() -> Self {
        DegreeSetting::Named("paper".into())
    }
}

impl DegreeSetting {
    pub fn resolve(&self) -> Result<DegreeDistribution> {
        match self {
            DegreeSetting::Named(n) if n == "paper" => Ok(ltcode::omega_paper()),
            DegreeSetting::Named(n) => Err(Error::config(format!(
                "unknown degree distribution {n:?} (expected \"paper\" or a table)"
            ))),
            DegreeSetting::Table(t) => DegreeDistribution::new(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpSettings {
    pub max_iterations: usize,
    pub message_clamp: f64,
    pub stop_on_syndrome: bool,
}

impl Default for BpSettings {
    fn default() -> Self {
        let d = BpConfig::default();
        BpSettings {
            max_iterations: d.max_iterations,
            message_clamp: d.message_clamp,
            stop_on_syndrome: d.stop_on_syndrome,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineToggles {
    pub correlation: bool,
    pub gp: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        BaselineToggles {
            correlation: true,
            gp: true,
        }
    }
}

/// Everything that defines a sweep. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Test pattern name (`glyph-GI`, `checkerboard`, `solid`, `blank`) or a
    /// path to a plain PBM file.
    pub scene: String,
    pub width: usize,
    pub height: usize,
    /// Q, the number of square blocks, each encoded with its own graph.
    pub blocks: usize,
    /// N, the number of coded shots per block.
    pub shots: usize,
    pub degree_distribution: DegreeSetting,
    pub snr_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub decoder_mode: RemapMode,
    pub bp: BpSettings,
    /// Run the coded pipeline.
    pub coded: bool,
    pub baselines: BaselineToggles,
    /// Bernoulli inclusion probability for the baseline patterns.
    pub gi_probability: f64,
    pub gp_iterations: usize,
    pub gp_tolerance: f64,
    pub y0_mean: f64,
    /// Force σ² = 0; one cell per seed is run and reported with SNR = inf.
    pub noiseless: bool,
    /// Cells evaluated concurrently.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub write_images: bool,
    /// Write per-iteration BP diagnostics next to each coded image.
    pub trace: bool,
    /// Write the per-shot remapping table next to each coded image.
    pub dump_remap: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: "glyph-GI".into(),
            width: 64,
            height: 64,
            blocks: 1,
            shots: 8192,
            degree_distribution: DegreeSetting::default(),
            snr_grid: (0..8).map(|k| 2.0 - k as f64).collect(),
            seeds: vec![1, 2, 3],
            master_seed: 0,
            decoder_mode: RemapMode::Soft,
            bp: BpSettings::default(),
            coded: true,
            baselines: BaselineToggles::default(),
            gi_probability: 0.5,
            gp_iterations: 200,
            gp_tolerance: 1e-6,
            y0_mean: 1.0,
            noiseless: false,
            workers: 1,
            output_dir: PathBuf::from("results"),
            write_images: true,
            trace: false,
            dump_remap: false,
        }
    }
}

/// Help text describing every config key; shown by `ecc-imaging run --help`.
pub const CONFIG_KEYS_HELP: &str = "\
Config file: a JSON object; every key is optional.
  scene                test pattern (glyph-GI, checkerboard, solid, blank) or PBM path [glyph-GI]
  width, height        scene size for test patterns [64, 64]
  blocks               Q, number of square blocks encoded independently [1]
  shots                N, coded illuminations per block [8192]
  degree_distribution  \"paper\" or [[degree, probability], ...] [\"paper\"]
  snr_grid             SNR points in dB [2, 1, 0, -1, -2, -3, -4, -5]
  seeds                experiment seeds; one graph/pattern draw per seed [1, 2, 3]
  master_seed          root of all derived random streams [0]
  decoder_mode         soft, hard or exact-parity [soft]
  bp                   {max_iterations [50], message_clamp [30], stop_on_syndrome [true]}
  coded                run the LT/BP pipeline [true]
  baselines            {correlation [true], gp [true]}
  gi_probability       Bernoulli inclusion probability of baseline patterns [0.5]
  gp_iterations        iteration cap of the GP baseline [200]
  gp_tolerance         relative objective decrease that stops GP [1e-6]
  y0_mean              detector response per lit transmissive pixel [1.0]
  noiseless            force zero noise; one cell per seed at SNR = inf [false]
  workers              cells evaluated concurrently [1]
  output_dir           results directory [results]
  write_images         write per-cell PBM/PGM images [true]
  trace                write BP per-iteration CSV per coded cell [false]
  dump_remap           write per-shot remapping CSV per coded cell [false]";

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if !self.noiseless && self.snr_grid.is_empty() {
            return Err(Error::config("snr_grid must not be empty"));
        }
        if let Some(s) = self.snr_grid.iter().find(|s| !s.is_finite()) {
            return Err(Error::config(format!("SNR grid value {s} is not finite")));
        }
        if self.shots == 0 {
            return Err(Error::config("shots must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if self.gp_iterations == 0 {
            return Err(Error::config("gp_iterations must be at least 1"));
        }
        if self.noiseless && self.decoder_mode != RemapMode::Hard && self.coded {
            return Err(Error::config(
                "noiseless runs need decoder_mode \"hard\" (soft LLRs are undefined at zero noise)",
            ));
        }
        self.bp_config().validate()?;
        ChannelParams::new(self.y0_mean, 0.0)?;
        self.degree_distribution.resolve()?;
        Ok(())
    }

    pub fn bp_config(&self) -> BpConfig {
        BpConfig {
            max_iterations: self.bp.max_iterations,
            message_clamp: self.bp.message_clamp,
            stop_on_syndrome: self.bp.stop_on_syndrome,
            trace: self.trace,
        }
    }

    pub fn load_scene(&self) -> Result<BinaryScene> {
        match self.scene.parse::<scene::TestPattern>() {
            Ok(p) => scene::render_pattern(p, self.width, self.height),
            Err(_) if Path::new(&self.scene).exists() => {
                scene::read_image(&fs::read(&self.scene)?)
            }
            Err(e) => Err(e),
        }
    }

    /// The SNR points actually run (`inf` alone for noiseless configs).
    pub fn effective_grid(&self) -> Vec<f64> {
        if self.noiseless {
            vec![f64::INFINITY]
        } else {
            self.snr_grid.clone()
        }
    }

    pub fn methods(&self) -> Vec<&'static str> {
        let mut m = Vec::new();
        if self.coded {
            m.push(METHOD_CODED);
        }
        if self.baselines.correlation {
            m.push(METHOD_CORRELATION);
        }
        if self.baselines.gp {
            m.push(METHOD_GP);
        }
        m
    }
}

/// Reconstructed image of one method in one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellImage {
    Binary(BinaryScene),
    Analog(gibaseline::AnalogImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub row: ScoreRow,
    pub image: CellImage,
    /// Coded method only: per-block remap dumps and BP traces, as CSV text.
    pub diagnostics: Vec<(String, Vec<u8>)>,
}

/// Per-seed state shared by all SNR points of that seed.
pub struct SeedContext {
    seed: u64,
    truth: BinaryScene,
    partition: BlockPartition,
    graphs: Vec<EncodingGraph>,
    coded_clean: Vec<Vec<f64>>,
    gi: Option<GiContext>,
}

struct GiContext {
    patterns: PatternMatrix,
    clean: Vec<f64>,
    gram: Option<Gram>,
}

impl SeedContext {
    pub fn new(cfg: &ExperimentConfig, truth: &BinaryScene, seed: u64) -> Result<Self> {
        let partition = scene::partition(truth, cfg.blocks).map_err(|e| e.in_stage("partition"))?;
        let dist = cfg.degree_distribution.resolve()?;
        let mut graphs = Vec::new();
        let mut coded_clean = Vec::new();
        if cfg.coded {
            for (q, block) in partition.blocks().iter().enumerate() {
                let coords = [label::GRAPH, seed, q as u64];
                let graph_seed = rng::derive_seed(cfg.master_seed, &coords);
                let graph = ltcode::build_graph(
                    block.len(),
                    cfg.shots,
                    &dist,
                    &mut rng::stream(graph_seed),
                    graph_seed,
                )
                .map_err(|e| e.in_stage("graph"))?;
                let pixels = truth.gather(block);
                coded_clean.push(
                    channel::clean_sums(&pixels, &graph, cfg.y0_mean)
                        .map_err(|e| e.in_stage("measure"))?,
                );

                graphs.push(graph);
            }
        }
        let gi = if cfg.baselines.correlation || cfg.baselines.gp {
            let total_shots = cfg.shots * partition.block_count();
            let mut r = rng::substream(cfg.master_seed, &[label::GI_PATTERNS, seed]);
            let patterns =
                gibaseline::bernoulli_patterns(truth.len(), total_shots, cfg.gi_probability, &mut r)
                    .map_err(|e| e.in_stage("gi-patterns"))?;
            let clean = gibaseline::gi_clean_sums(truth.pixels(), &patterns, cfg.y0_mean)
                .map_err(|e| e.in_stage("gi-measure"))?;
            let gram = cfg.baselines.gp.then(|| patterns.gram());
            Some(GiContext {
                patterns,
                clean,
                gram,
            })
        } else {
            None
        };
        Ok(SeedContext {
            seed,
            truth: truth.clone(),
            partition,
            graphs,
            coded_clean,
            gi,
        })
    }

    pub fn graphs(&self) -> &[EncodingGraph] {
        &self.graphs
    }

    /// Runs every enabled method at `snr_db` (`inf` for a noiseless cell).
    pub fn run(&self, cfg: &ExperimentConfig, snr_db: f64) -> Result<Vec<MethodOutcome>> {
        let mut out = Vec::new();
        if cfg.coded {
            out.push(self.run_coded(cfg, snr_db)?);
        }
        if let Some(gi) = &self.gi {
            out.extend(self.run_gi(cfg, gi, snr_db)?);
        }
        Ok(out)
    }

    fn noise_variance(&self, clean: &[f64], snr_db: f64) -> Result<f64> {
        if snr_db == f64::INFINITY {
            Ok(0.0)
        } else {
            channel::calibrate_sigma(clean, snr_db)
        }
    }

    fn run_coded(&self, cfg: &ExperimentConfig, snr_db: f64) -> Result<MethodOutcome> {
        let all_clean: Vec<f64> = self.coded_clean.concat();
        let sigma2 = self
            .noise_variance(&all_clean, snr_db)
            .map_err(|e| e.in_stage("calibrate"))?;
        let params = ChannelParams::new(cfg.y0_mean, sigma2)?;
        let bp_cfg = cfg.bp_config();
        let mut decoded = vec![0u8; self.truth.len()];
        let mut iterations = 0;
        let mut uncovered = 0;
        let mut diagnostics = Vec::new();
        for (q, graph) in self.graphs.iter().enumerate() {
            let noise_seed = rng::derive_seed(
                cfg.master_seed,
                &[label::CODED_NOISE, self.seed, snr_db.to_bits(), q as u64],
            );
            let values = channel::add_awgn(&self.coded_clean[q], sigma2, &mut rng::stream(noise_seed))
                .map_err(|e| e.in_stage("measure"))?;
            let record = MeasurementRecord {
                values,
                params,
                graph_seed: graph.seed(),
                noise_seed,
            };
            let remapped = remap::remap_record(&record, graph, cfg.decoder_mode)
                .map_err(|e| e.in_stage("remap"))?;
            let llrs: Vec<f64> = remapped.iter().map(|r| r.llr).collect();
            let result = bpdecoder::decode(&llrs, graph, &bp_cfg).map_err(|e| e.in_stage("decode"))?;
            for (&j, &b) in self.partition.block(q).iter().zip(&result.decoded) {
                decoded[j] = b;
            }
            iterations = iterations.max(result.iterations_used);
            uncovered += result.uncovered.len();
            if cfg.dump_remap {
                let mut buf = Vec::new();
                remap::write_remap_csv(&mut buf, &record, &remapped)?;
                diagnostics.push((format!("remap_block{q}.csv"), buf));
            }
            if cfg.trace {
                let mut buf = Vec::new();
                bpdecoder::write_trace_csv(&mut buf, &result.trace)?;
                diagnostics.push((format!("bp_trace_block{q}.csv"), buf));
            }
        }
        let mse = metrics::mse_bits(&decoded, self.truth.pixels()).map_err(|e| e.in_stage("score"))?;
        let image = BinaryScene::new(self.truth.width(), self.truth.height(), decoded)?;
        Ok(MethodOutcome {
            row: ScoreRow {
                method: METHOD_CODED.into(),
                snr_db,
                seed: self.seed,
                mse,
                iterations,
                coverage_gap: uncovered as f64 / self.truth.len() as f64,
            },
            image: CellImage::Binary(image),
            diagnostics,
        })
    }

    fn run_gi(&self, cfg: &ExperimentConfig, gi: &GiContext, snr_db: f64) -> Result<Vec<MethodOutcome>> {
        let sigma2 = self
            .noise_variance(&gi.clean, snr_db)
            .map_err(|e| e.in_stage("gi-calibrate"))?;
        let mut r = rng::substream(
            cfg.master_seed,
            &[label::GI_NOISE, self.seed, snr_db.to_bits()],
        );
        let values = channel::add_awgn(&gi.clean, sigma2, &mut r).map_err(|e| e.in_stage("gi-measure"))?;
        let meas = GiMeasurement::new(
            gi.patterns.clone(),
            values,
            ChannelParams::new(cfg.y0_mean, sigma2)?,
        )?;
        let (w, h) = (self.truth.width(), self.truth.height());
        let row = |method: &str, mse: f64, iterations: usize| ScoreRow {
            method: method.into(),
            snr_db,
            seed: self.seed,
            mse,
            iterations,
            coverage_gap: 0.0,
        };
        let mut out = Vec::new();
        if cfg.baselines.correlation {
            let img = gibaseline::reconstruct_correlation(&meas, w, h)
                .map_err(|e| e.in_stage("correlation"))?;
            let norm = gibaseline::normalize(&img);
            let mse = metrics::mse(&norm.values, self.truth.pixels())?;
            out.push(MethodOutcome {
                row: row(METHOD_CORRELATION, mse, 0),
                image: CellImage::Analog(norm),
                diagnostics: Vec::new(),
            });
        }
        if let Some(gram) = &gi.gram {
            let gp = gibaseline::reconstruct_gp_with_gram(
                &meas,
                gram,
                w,
                h,
                cfg.gp_iterations,
                cfg.gp_tolerance,
            )
            .map_err(|e| e.in_stage("gp"))?;
            let norm = gibaseline::normalize(&gp.image);
            let mse = metrics::mse(&norm.values, self.truth.pixels())?;
            out.push(MethodOutcome {
                row: row(METHOD_GP, mse, gp.iterations),
                image: CellImage::Analog(norm),
                diagnostics: Vec::new(),
            });
        }
        Ok(out)
    }
}

/// Directory for one method's outputs in one cell: `output_dir/method/snr/seed`.
pub fn cell_dir(output_dir: &Path, method: &str, snr_db: f64, seed: u64) -> PathBuf {
    output_dir
        .join(method)
        .join(format!("{snr_db}"))
        .join(seed.to_string())
}

fn write_outcome(output_dir: &Path, outcome: &MethodOutcome) -> Result<()> {
    let dir = cell_dir(output_dir, &outcome.row.method, outcome.row.snr_db, outcome.row.seed);
    fs::create_dir_all(&dir)?;
    match &outcome.image {
        CellImage::Binary(s) => fs::write(dir.join("reconstruction.pbm"), scene::write_image(s))?,
        CellImage::Analog(a) => fs::write(dir.join("reconstruction.pgm"), gibaseline::write_pgm(a))?,
    }
    for (name, bytes) in &outcome.diagnostics {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Runs all methods for one `(snr_db, seed)` cell and writes its images when
/// `cfg.write_images` is set.
pub fn run_cell(cfg: &ExperimentConfig, snr_db: f64, seed: u64) -> Result<Vec<ScoreRow>> {
    cfg.validate()?;
    let truth = cfg.load_scene().map_err(|e| e.in_stage("scene"))?;
    let ctx = SeedContext::new(cfg, &truth, seed)?;
    let outcomes = ctx.run(cfg, snr_db)?;
    if cfg.write_images {
        for o in &outcomes {
            write_outcome(&cfg.output_dir, o)?;
        }
    }
    Ok(outcomes.into_iter().map(|o| o.row).collect())
}

#[derive(Debug)]
pub struct CellFailure {
    pub snr_db: f64,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct SweepReport {
    /// Sorted by (method, snr_db, seed).
    pub rows: Vec<ScoreRow>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub snr_db: f64,
    pub mean_mse: f64,
    pub cells: usize,
}

pub fn sort_rows(rows: &mut [ScoreRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Per-method, per-SNR mean MSE, ordered by method then SNR.
pub fn summarize(rows: &[ScoreRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        // Order-preserving key for f64 so the map sorts by SNR.
        let bits = r.snr_db.to_bits();
        let key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        let e = groups.entry((r.method.clone(), key)).or_insert((r.snr_db, 0.0, 0));
        e.1 += r.mse;
        e.2 += 1;
    }
    groups
        .into_iter()
        .map(|((method, _), (snr_db, total, cells))| SummaryRow {
            method,
            snr_db,
            mean_mse: total / cells as f64,
            cells,
        })
        .collect()
}

pub fn write_summary<W: std::io::Write>(out: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every `(snr, seed)` cell, then writes `results.csv` and `summary.csv`
/// into the output directory. A failing cell is recorded and the sweep
/// continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    use rayon::prelude::*;

    cfg.validate()?;
    let truth = cfg.load_scene().map_err(|e| e.in_stage("scene"))?;
    let grid = cfg.effective_grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;

    type CellResult = (f64, u64, Result<Vec<MethodOutcome>>);
    let per_seed: Vec<Vec<CellResult>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| match SeedContext::new(cfg, &truth, seed) {
                Ok(ctx) => grid
                    .par_iter()
                    .map(|&snr| (snr, seed, ctx.run(cfg, snr)))
                    .collect(),
                Err(e) => {
                    let msg = e.to_string();
                    grid.iter()
                        .map(|&snr| (snr, seed, Err(Error::config(msg.clone()))))
                        .collect()
                }
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (snr_db, seed, result) in per_seed.into_iter().flatten() {
        match result {
            Ok(outcomes) => {
                for o in outcomes {
                    if cfg.write_images {
                        write_outcome(&cfg.output_dir, &o)?;
                    }
                    rows.push(o.row);
                }
            }
            Err(error) => failures.push(CellFailure { snr_db, seed, error }),
        }
    }
    sort_rows(&mut rows);
    let summary = summarize(&rows);
    fs::create_dir_all(&cfg.output_dir)?;
    metrics::write_scores(fs::File::create(cfg.output_dir.join("results.csv"))?, &rows)?;
    write_summary(fs::File::create(cfg.output_dir.join("summary.csv"))?, &summary)?;
    Ok(SweepReport {
        rows,
        failures,
        summary,
    })
}
