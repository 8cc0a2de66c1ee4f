//! Synthetic scenes with ground truth.
//!
//! Agents walk smoothed random-waypoint paths through a rectangular arena
//! scattered with landmarks. Every agent is visible in the top view; a
//! subset of them records an egocentric stream whose per-frame descriptor
//! is built from the landmarks inside the agent's field-of-view cone, so
//! descriptor change follows cone change by construction.
//!
//! The world is simulated on its own clock. The top view records world
//! frames `[0, T)`; egocentric video `i` records world frames
//! `[d_i, d_i + T)`, so its frame `f` shows the scene of top-view frame
//! `f + d_i`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{l2_normalize, EgoVideo};
use crate::geometry::{self, FovCone, GeometryConfig, Point, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Waypoints drawn up front; more are appended if the path runs short.
    pub waypoints: usize,
    /// Walking speed range in meters per second.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Corner-cutting passes applied to the waypoint polyline.
    pub smoothing_passes: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { waypoints: 8, speed_min: 0.5, speed_max: 2.0, smoothing_passes: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecorderPolicy {
    /// A random subset of the agents wears cameras.
    Random,
    /// Agents `0..n_ego` wear cameras.
    First,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_top: usize,
    pub n_ego: usize,
    pub duration_frames: usize,
    pub frame_rate: f64,
    /// Per-video delays in frames; drawn uniformly from `[-delay_range, delay_range]` when absent.
    pub true_delays: Option<Vec<i64>>,
    pub delay_range: i64,
    pub descriptor_noise_sigma: f64,
    /// Per-frame probability that a count is off by one.
    pub count_noise_rate: f64,
    pub motion: MotionConfig,
    pub recorders: RecorderPolicy,
    pub arena: [f64; 2],
    pub n_landmarks: usize,
    pub descriptor_dim: usize,
    pub half_angle_deg: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_top: 6,
            n_ego: 6,
            duration_frames: 400,
            frame_rate: 10.0,
            true_delays: None,
            delay_range: 0,
            descriptor_noise_sigma: 0.0,
            count_noise_rate: 0.0,
            motion: MotionConfig::default(),
            recorders: RecorderPolicy::Random,
            arena: [12.0, 12.0],
            n_landmarks: 60,
            descriptor_dim: 32,
            half_angle_deg: 30.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_ego == 0 || self.n_ego > self.n_top {
            return bad(format!("need 1 <= n_ego <= n_top, got n_ego {} and n_top {}", self.n_ego, self.n_top));
        }
        if self.duration_frames < 10 {
            return bad(format!("duration of {} frames is too short", self.duration_frames));
        }
        if !(self.frame_rate > 0.0) || !(self.descriptor_noise_sigma >= 0.0) {
            return bad("frame rate must be positive and noise non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.count_noise_rate) {
            return bad(format!("count_noise_rate {} outside [0, 1]", self.count_noise_rate));
        }
        if self.n_landmarks == 0 || self.descriptor_dim == 0 {
            return bad("need at least one landmark and a positive descriptor dimension".into());
        }
        if !(self.half_angle_deg > 0.0 && self.half_angle_deg < 90.0) {
            return bad(format!("half_angle_deg {} outside (0, 90)", self.half_angle_deg));
        }
        if let Some(d) = &self.true_delays {
            if d.len() != self.n_ego {
                return bad(format!("{} delays for {} egocentric videos", d.len(), self.n_ego));
            }
        }
        if self.delay_range < 0 {
            return bad("delay_range must be non-negative".into());
        }
        let m = &self.motion;
        if !(m.speed_min > 0.0 && m.speed_min <= m.speed_max) || m.waypoints < 2 {
            return bad("need 0 < speed_min <= speed_max and at least two waypoints".into());
        }
        let side = self.arena[0].min(self.arena[1]);
        if !(side > 0.0) || side < 2.0 * m.speed_max {
            return Err(Error::InfeasibleMotion(format!(
                "arena side {side} m is shorter than two seconds of walking at {} m/s",
                m.speed_max
            )));
        }
        Ok(())
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig { half_angle_deg: self.half_angle_deg, range_m: Some(self.range()), ..GeometryConfig::default() }
    }

    /// Cone range: the arena diagonal.
    pub fn range(&self) -> f64 {
        self.arena[0].hypot(self.arena[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub position: Point,
    /// Unit-norm appearance vector.
    pub appearance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub arena: [f64; 2],
    pub landmarks: Vec<Landmark>,
    pub seed: u64,
}

impl World {
    /// Landmarks uniform over the arena grown by a fifth on every side.
    pub fn generate(arena: [f64; 2], n_landmarks: usize, dim: usize, seed: u64) -> Self {
        let mut rng = stream(seed, 0);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let landmarks = (0..n_landmarks)
            .map(|_| {
                let position =
                    [rng.gen_range(-0.2..1.2) * arena[0], rng.gen_range(-0.2..1.2) * arena[1]];
                let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                Landmark { position, appearance: l2_normalize(&v) }
            })
            .collect();
        Self { arena, landmarks, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Top-view index recorded by each egocentric video.
    pub assignment: Vec<usize>,
    /// Delay of each egocentric video in frames.
    pub delays: Vec<i64>,
}

impl GroundTruth {
    pub fn validate(&self, n_top: usize) -> Result<()> {
        let mut seen = vec![false; n_top];
        for &k in &self.assignment {
            if k >= n_top || std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidInput(format!("assignment {:?} is not injective into {n_top} viewers", self.assignment)));
            }
        }
        if self.delays.len() != self.assignment.len() {
            return Err(Error::DimensionMismatch { expected: self.assignment.len(), got: self.delays.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub world: World,
    /// Agent positions on the world clock, frames `[-margin, T + margin)`.
    pub world_paths: Vec<Vec<Point>>,
    /// World frames before top-view frame 0.
    pub margin: usize,
    pub trajectories: Vec<Trajectory>,
    pub videos: Vec<EgoVideo>,
    pub truth: GroundTruth,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Corner cutting: every segment is replaced by its 1/4 and 3/4 points.
fn chaikin(points: &[Point], passes: usize) -> Vec<Point> {
    let mut p = points.to_vec();
    for _ in 0..passes {
        let mut q = Vec::with_capacity(2 * p.len());
        q.push(p[0]);
        for w in p.windows(2) {
            let [a, b] = [w[0], w[1]];
            q.push([0.75 * a[0] + 0.25 * b[0], 0.75 * a[1] + 0.25 * b[1]]);
            q.push([0.25 * a[0] + 0.75 * b[0], 0.25 * a[1] + 0.75 * b[1]]);
        }
        q.push(p[p.len() - 1]);
        p = q;
    }
    p
}

fn polyline_length(p: &[Point]) -> f64 {
    p.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

/// `n` points spaced `step` apart by arc length along `p`.
fn sample_by_arc_length(p: &[Point], step: f64, n: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for f in 0..n {
        let s = f as f64 * step;
        loop {
            let len = (p[seg + 1][0] - p[seg][0]).hypot(p[seg + 1][1] - p[seg][1]);
            if s <= seg_start + len || seg + 2 == p.len() {
                let u = if len > 0.0 { ((s - seg_start) / len).min(1.0) } else { 0.0 };
                out.push([p[seg][0] + u * (p[seg + 1][0] - p[seg][0]), p[seg][1] + u * (p[seg + 1][1] - p[seg][1])]);
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out
}

/// One agent's path of `n` frames at a constant speed drawn from the motion range.
fn walk(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig, n: usize) -> Vec<Point> {
    let m = &cfg.motion;
    let margin = 0.05;
    let waypoint = |rng: &mut ChaCha8Rng| {
        [rng.gen_range(margin..1.0 - margin) * cfg.arena[0], rng.gen_range(margin..1.0 - margin) * cfg.arena[1]]
    };
    let speed = rng.gen_range(m.speed_min..=m.speed_max);
    let step = speed / cfg.frame_rate;
    let needed = step * n as f64;
    let mut wp: Vec<Point> = (0..m.waypoints).map(|_| waypoint(rng)).collect();
    loop {
        let smooth = chaikin(&wp, m.smoothing_passes);
        if polyline_length(&smooth) > needed + step {
            return sample_by_arc_length(&smooth, step, n);
        }
        wp.push(waypoint(rng));
    }
}

/// Descriptor of the view from `cone`: landmarks inside weighted by
/// `1 / (1 + distance)`, summed and normalized.
pub fn render_descriptor(world: &World, cone: &FovCone, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for lm in &world.landmarks {
        if !cone.contains(lm.position) {
            continue;
        }
        let d = (lm.position[0] - cone.apex[0]).hypot(lm.position[1] - cone.apex[1]);
        let w = 1.0 / (1.0 + d);
        for (a, v) in acc.iter_mut().zip(&lm.appearance) {
            *a += w * v;
        }
    }
    l2_normalize(&acc)
}

/// Renders the egocentric stream of agent `agent` starting at world frame
/// `margin + delay`, for `len` frames.
pub fn render_video(
    world: &World,
    path: &[Point],
    others: &[&[Point]],
    cfg: &ScenarioConfig,
    start: usize,
    len: usize,
    noise_rng: &mut ChaCha8Rng,
    video_id: String,
) -> Result<EgoVideo> {
    let geo = cfg.geometry();
    let traj = Trajectory::new(video_id.clone(), path.to_vec(), cfg.frame_rate)?;
    let headings = geometry::headings(&traj, &geo)?;
    let dim = cfg.descriptor_dim;
    let sigma = cfg.descriptor_noise_sigma;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut descriptors = Vec::with_capacity(len);
    let mut counts = Vec::with_capacity(len);
    for w in start..start + len {
        let cone = geometry::cone_from_heading(&traj, headings[w], w, &geo, cfg.range())?;
        let mut d = render_descriptor(world, &cone, dim);
        if sigma > 0.0 {
            for v in &mut d {
                *v += sigma * normal.sample(noise_rng);
            }
            d = l2_normalize(&d);
        }
        descriptors.push(d);
        let pts: Vec<Point> = others.iter().map(|p| p[w]).collect();
        let mut c = geometry::count_in_cone(&cone, &pts) as i64;
        if cfg.count_noise_rate > 0.0 && noise_rng.gen_bool(cfg.count_noise_rate) {
            c = if c == 0 || noise_rng.gen_bool(0.5) { c + 1 } else { c - 1 };
        }
        counts.push(c as f64);
    }
    Ok(EgoVideo { video_id, frame_rate: cfg.frame_rate, descriptors, counts })
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let world = World::generate(cfg.arena, cfg.n_landmarks, cfg.descriptor_dim, cfg.seed);
    let mut delay_rng = stream(cfg.seed, 1);
    let delays = match &cfg.true_delays {
        Some(d) => d.clone(),
        None => (0..cfg.n_ego).map(|_| delay_rng.gen_range(-cfg.delay_range..=cfg.delay_range)).collect(),
    };
    let margin = delays.iter().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0);
    let t = cfg.duration_frames;
    let world_len = t + 2 * margin;

    let mut motion_rng = stream(cfg.seed, 2);
    let world_paths: Vec<Vec<Point>> = (0..cfg.n_top).map(|_| walk(&mut motion_rng, cfg, world_len)).collect();

    let trajectories = world_paths
        .iter()
        .enumerate()
        .map(|(k, p)| Trajectory::new(format!("viewer_{k}"), p[margin..margin + t].to_vec(), cfg.frame_rate))
        .collect::<Result<Vec<_>>>()?;

    let mut pick_rng = stream(cfg.seed, 3);
    let assignment: Vec<usize> = match cfg.recorders {
        RecorderPolicy::Random => {
            let mut all: Vec<usize> = (0..cfg.n_top).collect();
            all.shuffle(&mut pick_rng);
            all.truncate(cfg.n_ego);
            all
        }
        RecorderPolicy::First => (0..cfg.n_ego).collect(),
    };

    let mut noise_rng = stream(cfg.seed, 4);
    let mut videos = Vec::with_capacity(cfg.n_ego);
    for (i, &k) in assignment.iter().enumerate() {
        let others: Vec<&[Point]> =
            world_paths.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, p)| p.as_slice()).collect();
        let start = (margin as i64 + delays[i]) as usize;
        videos.push(render_video(&world, &world_paths[k], &others, cfg, start, t, &mut noise_rng, format!("ego_{i}"))?);
    }

    Ok(Scenario {
        config: cfg.clone(),
        world,
        world_paths,
        margin,
        trajectories,
        videos,
        truth: GroundTruth { assignment, delays },
    })
}

/// Configs of a batch: the base config with seeds `base.seed + s`.
pub fn batch_configs(base: &ScenarioConfig, count: usize) -> Vec<ScenarioConfig> {
    (0..count as u64).map(|s| ScenarioConfig { seed: base.seed.wrapping_add(s), ..base.clone() }).collect()
}
