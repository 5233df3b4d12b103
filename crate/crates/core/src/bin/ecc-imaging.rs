use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecc_imaging::bpdecoder::{self, BpConfig};
use ecc_imaging::channel::{self, ChannelParams, MeasurementRecord};
use ecc_imaging::harness::{self, ExperimentConfig};
use ecc_imaging::ltcode::{self, EncodingGraph};
use ecc_imaging::remap::{self, RemapMode};
use ecc_imaging::rng::{self, label};
use ecc_imaging::scene::{self, BinaryScene};
use ecc_imaging::{Error, Result};

#[derive(Parser)]
#[command(name = "ecc-imaging", version, about = "LT-coded single-pixel imaging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR × seed sweep described by a JSON config file.
    #[command(after_long_help = harness::CONFIG_KEYS_HELP, after_help = harness::CONFIG_KEYS_HELP)]
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Decode a measurement CSV against an encoding graph and write a PBM.
    Decode {
        /// Encoding graph in text form (as written by `simulate`).
        #[arg(long)]
        graph: PathBuf,
        /// Measurement CSV (shot_index,y_value with # header comments).
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Image width; defaults to a square image.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value = "soft")]
        mode: RemapMode,
        #[arg(long, default_value_t = BpConfig::default().max_iterations)]
        max_iterations: usize,
        #[arg(long, default_value_t = BpConfig::default().message_clamp)]
        message_clamp: f64,
        /// Run all iterations even once every parity check is satisfied.
        #[arg(long)]
        no_early_stop: bool,
        /// Write per-iteration diagnostics (iteration, unsatisfied, mean_abs_llr).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the per-shot remapping table (shot, y, m_star, delta_l, llr).
        #[arg(long)]
        dump_remap: Option<PathBuf>,
    },
    /// Write a built-in test pattern as plain PBM.
    GenPattern {
        /// glyph-GI, checkerboard, solid or blank.
        name: String,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Draw an encoding graph for a scene and write it with a noisy measurement record.
    Simulate {
        /// Test pattern name or PBM path.
        #[arg(long, default_value = "glyph-GI")]
        scene: String,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 8192)]
        shots: usize,
        /// SNR in dB; omit for a noiseless record.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        graph_out: PathBuf,
        #[arg(long)]
        measurements_out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Decode {
            graph,
            measurements,
            output,
            width,
            mode,
            max_iterations,
            message_clamp,
            no_early_stop,
            trace,
            dump_remap,
        } => {
            let cfg = BpConfig {
                max_iterations,
                message_clamp,
                stop_on_syndrome: !no_early_stop,
                trace: trace.is_some(),
            };
            decode(&graph, &measurements, &output, width, mode, &cfg, trace, dump_remap)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GenPattern {
            name,
            width,
            height,
            output,
        } => {
            let s = scene::make_test_pattern(&name, width, height)?;
            fs::write(output, scene::write_image(&s))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            scene,
            width,
            height,
            shots,
            snr,
            seed,
            graph_out,
            measurements_out,
        } => {
            simulate(&scene, width, height, shots, snr, seed, &graph_out, &measurements_out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(config: &Path, output_dir: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let report = harness::run_sweep(&cfg)?;
    for row in &report.summary {
        println!("{:<12} {:>6} dB  mean MSE {:.5}  ({} cells)", row.method, row.snr_db, row.mean_mse, row.cells);
    }
    for f in &report.failures {
        eprintln!("cell snr={} seed={} failed: {}", f.snr_db, f.seed, f.error);
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[allow(clippy::too_many_arguments)]
fn decode(
    graph_path: &Path,
    measurements: &Path,
    output: &Path,
    width: Option<usize>,
    mode: RemapMode,
    cfg: &BpConfig,
    trace: Option<PathBuf>,
    dump_remap: Option<PathBuf>,
) -> Result<()> {
    let graph = EncodingGraph::from_text(&fs::read_to_string(graph_path)?)?;
    let record = MeasurementRecord::read_csv(BufReader::new(fs::File::open(measurements)?))?;
    let k = graph.pixel_count();
    let width = match width {
        Some(w) => w,
        None => {
            let side = (k as f64).sqrt().round() as usize;
            if side * side != k {
                return Err(Error::LengthMismatch {
                    expected: side * side,
                    found: k,
                }
                .in_stage("decode: --width is required for non-square graphs"));
            }
            side
        }
    };
    if width == 0 || k % width != 0 {
        return Err(Error::LengthMismatch {
            expected: k,
            found: width,
        }
        .in_stage("decode: width does not divide the pixel count"));
    }
    let remapped = remap::remap_record(&record, &graph, mode).map_err(|e| e.in_stage("remap"))?;
    if let Some(path) = dump_remap {
        remap::write_remap_csv(fs::File::create(path)?, &record, &remapped)?;
    }
    let llrs: Vec<f64> = remapped.iter().map(|r| r.llr).collect();
    let result = bpdecoder::decode(&llrs, &graph, cfg).map_err(|e| e.in_stage("decode"))?;
    if let Some(path) = trace {
        bpdecoder::write_trace_csv(fs::File::create(path)?, &result.trace)?;
    }
    let image = BinaryScene::new(width, k / width, result.decoded)?;
    fs::write(output, scene::write_image(&image))?;
    eprintln!(
        "decoded {k} pixels in {} iterations (converged: {}, uncovered: {})",
        result.iterations_used,
        result.converged,
        result.uncovered.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    scene_src: &str,
    width: usize,
    height: usize,
    shots: usize,
    snr: Option<f64>,
    seed: u64,
    graph_out: &Path,
    measurements_out: &Path,
) -> Result<()> {
    let cfg = ExperimentConfig {
        scene: scene_src.to_string(),
        width,
        height,
        ..ExperimentConfig::default()
    };
    let truth = cfg.load_scene()?;
    let graph_seed = rng::derive_seed(seed, &[label::GRAPH]);
    let graph = ltcode::build_graph(
        truth.len(),
        shots,
        &ltcode::omega_paper(),
        &mut rng::stream(graph_seed),
        graph_seed,
    )?;
    let sigma2 = match snr {
        Some(db) => channel::calibrate_sigma(&channel::clean_sums(truth.pixels(), &graph, 1.0)?, db)?,
        None => 0.0,
    };
    let noise_seed = rng::derive_seed(seed, &[label::CODED_NOISE]);
    let record = channel::measure_all(
        truth.pixels(),
        &graph,
        &ChannelParams::new(1.0, sigma2)?,
        &mut rng::stream(noise_seed),
        noise_seed,
    )?;
    fs::write(graph_out, graph.to_text())?;
    record.write_csv(fs::File::create(measurements_out)?)?;
    Ok(())
}
