//! Browser bindings for three interactive views of `egotop`.
//!
//! Every exported function takes plain numbers and returns a number or a
//! JSON string, so the same code runs natively under `cargo test`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use egotop::correlation::CorrConfig;
use egotop::delay_opt::lambda_at;
use egotop::eval::{assignment_accuracy, bank_for, prepare, run_on_bank, Init, Method, PipelineConfig};
use egotop::geometry::{cone_iou as raster_iou, FovCone, GeometryConfig};
use egotop::io::SceneData;
use egotop::simulator::{generate, ScenarioConfig};

/// Raster IOU of two cones given apex, heading in degrees, shared half-angle and range.
/// NaN when a cone is invalid.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn cone_iou(ax: f64, ay: f64, a_heading_deg: f64, bx: f64, by: f64, b_heading_deg: f64, half_angle_deg: f64, range: f64) -> f64 {
    let cfg = GeometryConfig { half_angle_deg, ..GeometryConfig::default() };
    let half = half_angle_deg.to_radians();
    match (
        FovCone::new([ax, ay], a_heading_deg.to_radians(), half, range),
        FovCone::new([bx, by], b_heading_deg.to_radians(), half, range),
    ) {
        (Ok(a), Ok(b)) => raster_iou(&a, &b, &cfg),
        _ => f64::NAN,
    }
}

#[derive(Serialize)]
struct MatchView {
    method: &'static str,
    assignment: Vec<usize>,
    truth: Vec<usize>,
    accuracy: f64,
    delays: Option<Vec<i64>>,
    true_delays: Vec<i64>,
    score: f64,
    paths: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct Landscape {
    ego: usize,
    true_delays: Vec<i64>,
    offsets: Vec<i64>,
    lambda: Vec<Option<f64>>,
}

fn scenario(seed: u32, n_top: usize, n_ego: usize, frames: usize, delay_range: i64, noise: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_top,
        n_ego,
        duration_frames: frames,
        delay_range,
        descriptor_noise_sigma: noise,
        seed: u64::from(seed),
        ..ScenarioConfig::default()
    }
}

/// Search window twice the delay bound, at least 5 frames, at most a quarter of the clip.
fn pipeline(frames: usize, delay_range: i64) -> PipelineConfig {
    let lag = ((2 * delay_range.max(0)) as usize).max(5).min(frames / 4);
    PipelineConfig { correlation: CorrConfig { max_lag: Some(lag), ..CorrConfig::default() }, ..PipelineConfig::default() }
}

fn error_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

fn try_simulate_and_match(
    seed: u32,
    n_top: usize,
    n_ego: usize,
    frames: usize,
    delay_range: i64,
    noise: f64,
    method: &str,
) -> egotop::Result<String> {
    let cfg = scenario(seed, n_top, n_ego, frames, delay_range, noise);
    let sim = generate(&cfg)?;
    let m = match method {
        "free" => Method::Free,
        "spectral" => Method::Spectral,
        _ => Method::Score,
    };
    let pcfg = pipeline(frames, delay_range).with_method(m, Init::Median);
    let scene = prepare("demo", &SceneData::from_scenario(&sim), &pcfg)?;
    let r = run_on_bank(&bank_for(&scene.ego, &scene.top, &pcfg)?, &pcfg)?;
    let view = MatchView {
        method: m.label(),
        accuracy: assignment_accuracy(&r.hard, &sim.truth.assignment),
        assignment: r.hard.assignment,
        truth: sim.truth.assignment.clone(),
        delays: r.delays,
        true_delays: sim.truth.delays.clone(),
        score: r.score,
        paths: sim.trajectories.iter().map(|t| t.positions.clone()).collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

/// Simulates one scene and assigns its egocentric videos.
/// `method` is `free`, `spectral` or `score`.
#[wasm_bindgen]
pub fn simulate_and_match(seed: u32, n_top: usize, n_ego: usize, frames: usize, delay_range: i32, noise: f64, method: &str) -> String {
    try_simulate_and_match(seed, n_top, n_ego, frames, i64::from(delay_range), noise, method).unwrap_or_else(error_json)
}

fn try_delay_landscape(seed: u32, ego: usize, frames: usize, delay_range: i64) -> egotop::Result<String> {
    let cfg = scenario(seed, 4, 4, frames, delay_range, 0.0);
    let sim = generate(&cfg)?;
    if ego >= cfg.n_ego {
        return Err(egotop::Error::InvalidInput(format!("ego index {ego} out of range")));
    }
    let pcfg = pipeline(frames, delay_range);
    let scene = prepare("demo", &SceneData::from_scenario(&sim), &pcfg)?;
    let bank = bank_for(&scene.ego, &scene.top, &pcfg)?;
    let lag = bank.lag();
    let mut t = sim.truth.delays.clone();
    let offsets: Vec<i64> = (-lag..=lag).collect();
    let lambda = offsets
        .iter()
        .map(|&d| {
            t[ego] = d;
            lambda_at(&bank, &t, &pcfg.spectral).ok()
        })
        .collect();
    Ok(serde_json::to_string(&Landscape { ego, true_delays: sim.truth.delays, offsets, lambda })?)
}

/// Leading eigenvalue as one video's delay sweeps the search window, the others held at truth.
#[wasm_bindgen]
pub fn delay_landscape(seed: u32, ego: usize, frames: usize, delay_range: i32) -> String {
    try_delay_landscape(seed, ego, frames, i64::from(delay_range)).unwrap_or_else(error_json)
}
