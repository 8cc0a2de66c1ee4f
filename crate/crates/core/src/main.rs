use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use egotop::correlation::CorrConfig;
use egotop::eval::{
    bin_ratios, evaluate, prepare, rank_topviews, run_baselines, sweep_completeness, sweep_length, CmcCurve, Init,
    Method, PipelineConfig, PreparedScene,
};
use egotop::features::FeatureConfig;
use egotop::geometry::GeometryConfig;
use egotop::io::{emit_batch, load_scene};
use egotop::simulator::ScenarioConfig;
use egotop::Result;

#[derive(Parser)]
#[command(name = "egotop", version, about = "Assign egocentric videos to viewers seen in a top-view video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a batch of simulated scenes.
    Simulate(SimulateArgs),
    /// Assign the egocentric videos of one scene.
    Match {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rank candidate top-view scenes for one set of egocentric videos.
    Rank {
        /// Scene whose egocentric videos are the query.
        #[arg(long)]
        ego: PathBuf,
        /// Scenes whose top-view trajectories are the candidates.
        #[arg(long, num_args = 2.., required = true)]
        candidates: Vec<PathBuf>,
        /// Index of the true candidate.
        #[arg(long)]
        truth: Option<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Accuracy against completeness ratio or video length.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long, num_args = 1.., required = true)]
        scenes: Vec<PathBuf>,
        /// Prefix lengths in frames for the length sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 300, 400])]
        lengths: Vec<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Random, counts-only, unary-only and free-offset accuracies.
    Baselines {
        #[arg(long, num_args = 1.., required = true)]
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 6)]
    n_top: usize,
    #[arg(long, default_value_t = 6)]
    n_ego: usize,
    #[arg(long, default_value_t = 400)]
    frames: usize,
    /// True delays are drawn uniformly from this many frames either side of zero.
    #[arg(long, default_value_t = 0)]
    delay_range: i64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    count_noise: f64,
    #[arg(long, default_value_t = 30.0)]
    theta_d: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Free,
    Spectral,
    Score,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zero,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Completeness,
    Length,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value = "score")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "median")]
    init: InitArg,
    /// Weight of the 2D term in the node affinity.
    #[arg(long)]
    alpha: Option<f64>,
    /// Sharpness of the descriptor similarity.
    #[arg(long)]
    gamma: Option<f64>,
    /// Field-of-view half-angle in degrees.
    #[arg(long)]
    theta_d: Option<f64>,
    /// Largest delay searched, in frames.
    #[arg(long)]
    max_lag: Option<usize>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let d = PipelineConfig::default();
        let features = FeatureConfig {
            alpha: self.alpha.unwrap_or(d.features.alpha),
            gamma: self.gamma.unwrap_or(d.features.gamma),
            ..d.features
        };
        let geometry = GeometryConfig { half_angle_deg: self.theta_d.unwrap_or(d.geometry.half_angle_deg), ..d.geometry };
        let correlation = CorrConfig { max_lag: self.max_lag.or(d.correlation.max_lag), ..d.correlation };
        features.validate()?;
        geometry.validate()?;
        correlation.validate()?;
        let method = match self.method {
            MethodArg::Free => Method::Free,
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Score => Method::Score,
        };
        let init = match self.init {
            InitArg::Zero => Init::Zero,
            InitArg::Median => Init::Median,
        };
        Ok(PipelineConfig { features, geometry, correlation, ..d }.with_method(method, init))
    }
}

#[derive(Serialize)]
struct Timing {
    command: &'static str,
    seconds: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> egotop::Error + '_ {
    move |e| egotop::Error::Format { file: path.display().to_string(), msg: e.to_string() }
}

fn cmc_rows(c: &CmcCurve) -> Vec<Vec<String>> {
    c.hits_at_rank.iter().enumerate().map(|(r, h)| vec![(r + 1).to_string(), h.to_string()]).collect()
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn load_prepared(dirs: &[PathBuf], cfg: &PipelineConfig) -> Result<Vec<PreparedScene>> {
    dirs.iter()
        .map(|d| {
            let name = d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
            prepare(name, &load_scene(d, &cfg.features)?, cfg)
        })
        .collect()
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    config: PipelineConfig,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let (name, out) = match cli.command {
        Command::Simulate(a) => {
            let base = ScenarioConfig {
                n_top: a.n_top,
                n_ego: a.n_ego,
                duration_frames: a.frames,
                delay_range: a.delay_range,
                descriptor_noise_sigma: a.noise_sigma,
                count_noise_rate: a.count_noise,
                half_angle_deg: a.theta_d,
                seed: a.common.seed,
                ..ScenarioConfig::default()
            };
            fs::create_dir_all(&a.common.out)?;
            let dirs = emit_batch(&base, a.count, &a.common.out)?;
            let names: Vec<String> =
                dirs.iter().filter_map(|d| d.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
            write_json(&a.common.out.join("manifest.json"), &serde_json::json!({ "base": base, "scenes": names }))?;
            ("simulate", a.common.out)
        }
        Command::Match { scene, pipeline, common } => {
            let cfg = pipeline.config()?;
            fs::create_dir_all(&common.out)?;
            let scenes = load_prepared(&[scene], &cfg)?;
            let report = evaluate(&scenes, &cfg)?;
            write_csv(&common.out.join("viewer_cmc.csv"), &["rank", "hits"], cmc_rows(&report.viewer_cmc))?;
            let s = &report.scenarios[0];
            write_csv(
                &common.out.join("assignment.csv"),
                &["ego", "assigned", "truth", "delay", "true_delay"],
                (0..s.assignment.len()).map(|i| {
                    vec![
                        i.to_string(),
                        s.assignment[i].to_string(),
                        s.truth[i].to_string(),
                        opt_str(s.delays.as_ref().map(|d| d[i])),
                        s.true_delays[i].to_string(),
                    ]
                }),
            )?;
            write_json(&common.out.join("report.json"), &Report { config: cfg, seed: common.seed, body: report })?;
            ("match", common.out)
        }
        Command::Rank { ego, candidates, truth, pipeline, common } => {
            let cfg = pipeline.config()?;
            fs::create_dir_all(&common.out)?;
            let query = load_prepared(&[ego], &cfg)?.remove(0);
            let tops: Vec<_> = load_prepared(&candidates, &cfg)?.into_iter().map(|s| s.top).collect();
            let ranking = rank_topviews(&query.ego, &tops, &cfg, truth)?;
            write_csv(
                &common.out.join("ranking.csv"),
                &["position", "candidate", "name", "score"],
                ranking.ranked.iter().enumerate().map(|(p, c)| {
                    let name = candidates[c.index].file_name().map(|n| n.to_string_lossy().into_owned());
                    vec![(p + 1).to_string(), c.index.to_string(), name.unwrap_or_default(), c.score.to_string()]
                }),
            )?;
            write_json(&common.out.join("report.json"), &Report { config: cfg, seed: common.seed, body: ranking })?;
            ("rank", common.out)
        }
        Command::Sweep { kind, scenes, lengths, pipeline, common } => {
            let cfg = pipeline.config()?;
            fs::create_dir_all(&common.out)?;
            let prepared = load_prepared(&scenes, &cfg)?;
            match kind {
                SweepKind::Completeness => {
                    let rows = sweep_completeness(&prepared, &cfg)?;
                    let bins = bin_ratios(&rows);
                    write_csv(
                        &common.out.join("completeness.csv"),
                        &["ratio_lo", "ratio_hi", "count", "mean_accuracy"],
                        bins.iter().map(|b| {
                            vec![b.lo.to_string(), b.hi.to_string(), b.count.to_string(), opt_str(b.mean_accuracy)]
                        }),
                    )?;
                    let body = serde_json::json!({ "rows": rows, "bins": bins });
                    write_json(&common.out.join("report.json"), &Report { config: cfg, seed: common.seed, body })?;
                }
                SweepKind::Length => {
                    let mut rows = Vec::new();
                    for s in &prepared {
                        rows.extend(sweep_length(s, &cfg, &lengths)?);
                    }
                    write_csv(
                        &common.out.join("length.csv"),
                        &["scene", "length", "accuracy", "skipped"],
                        rows.iter().map(|r| {
                            vec![r.scene.clone(), r.length.to_string(), opt_str(r.accuracy), r.skipped.clone().unwrap_or_default()]
                        }),
                    )?;
                    let body = serde_json::json!({ "rows": rows });
                    write_json(&common.out.join("report.json"), &Report { config: cfg, seed: common.seed, body })?;
                }
            }
            ("sweep", common.out)
        }
        Command::Baselines { scenes, pipeline, common } => {
            let cfg = pipeline.config()?;
            fs::create_dir_all(&common.out)?;
            let prepared = load_prepared(&scenes, &cfg)?;
            let mut table = Vec::new();
            for s in &prepared {
                for row in run_baselines(s, &cfg, common.seed)? {
                    table.push(serde_json::json!({ "scene": s.name, "label": row.label, "accuracy": row.accuracy }));
                }
            }
            write_csv(
                &common.out.join("baselines.csv"),
                &["scene", "label", "accuracy"],
                table.iter().map(|r| {
                    vec![
                        r["scene"].as_str().unwrap_or_default().to_string(),
                        r["label"].as_str().unwrap_or_default().to_string(),
                        r["accuracy"].to_string(),
                    ]
                }),
            )?;
            let body = serde_json::json!({ "rows": table });
            write_json(&common.out.join("report.json"), &Report { config: cfg, seed: common.seed, body })?;
            ("baselines", common.out)
        }
    };
    write_json(&out.join("timing.json"), &Timing { command: name, seconds: started.elapsed().as_secs_f64() })
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
