//! Scenario files.
//!
//! A scenario directory holds
//!
//! * `topview.csv` with header `frame,viewer_id,x,y`, one row per frame and viewer;
//! * `ego_<k>.desc`, one headerless comma-separated descriptor per frame, with a
//!   sidecar `ego_<k>.desc.json` carrying `video_id` and `frame_rate`;
//! * `ego_<k>.counts.csv` with header `frame,count`, or instead
//!   `ego_<k>.detections.csv` with header `frame,score,box_height_fraction`;
//! * optionally `truth.json` and `config.json`.
//!
//! Floats are written in shortest round-trip form, so a write followed by a
//! read reproduces every value exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ingest_detections, Detection, EgoVideo, FeatureConfig};
use crate::geometry::Trajectory;
use crate::simulator::{generate, GroundTruth, Scenario, ScenarioConfig};

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { file: path.display().to_string(), msg: msg.into() }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => format_err(path, format!("{other:?}")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    frame: usize,
    viewer_id: String,
    x: f64,
    y: f64,
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for t in trajs {
        for (frame, p) in t.positions.iter().enumerate() {
            w.serialize(TrajectoryRow { frame, viewer_id: t.viewer_id.clone(), x: p[0], y: p[1] })
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads trajectories in order of first appearance; frames must be dense
/// from 0 for every viewer.
pub fn read_trajectories(path: &Path, frame_rate: f64) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, [f64; 2])>> = BTreeMap::new();
    for row in r.deserialize::<TrajectoryRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if !rows.contains_key(&row.viewer_id) {
            order.push(row.viewer_id.clone());
        }
        rows.entry(row.viewer_id).or_default().push((row.frame, [row.x, row.y]));
    }
    if order.is_empty() {
        return Err(format_err(path, "no rows"));
    }
    order
        .into_iter()
        .map(|id| {
            let mut pts = rows.remove(&id).expect("id was recorded");
            pts.sort_by_key(|p| p.0);
            if pts.iter().enumerate().any(|(i, p)| p.0 != i) {
                return Err(format_err(path, format!("frames of viewer {id} are not dense from 0")));
            }
            Trajectory::new(id, pts.into_iter().map(|p| p.1).collect(), frame_rate)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DescSidecar {
    video_id: String,
    frame_rate: f64,
}

fn sidecar_path(desc: &Path) -> PathBuf {
    let mut s = desc.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_descriptors(path: &Path, video: &EgoVideo) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_err(path, e))?;
    for d in &video.descriptors {
        w.serialize(d).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    let side = DescSidecar { video_id: video.video_id.clone(), frame_rate: video.frame_rate };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Descriptors with their video id and frame rate.
pub fn read_descriptors(path: &Path) -> Result<(String, f64, Vec<Vec<f64>>)> {
    let side_path = sidecar_path(path);
    let side: DescSidecar = serde_json::from_str(&fs::read_to_string(&side_path)?)
        .map_err(|e| format_err(&side_path, e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.deserialize::<Vec<f64>>() {
        out.push(rec.map_err(|e| csv_err(path, e))?);
    }
    if let Some(first) = out.first() {
        if let Some(bad) = out.iter().find(|d| d.len() != first.len()) {
            return Err(format_err(path, format!("rows of {} and {} values", first.len(), bad.len())));
        }
    }
    Ok((side.video_id, side.frame_rate, out))
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    frame: usize,
    count: f64,
}

pub fn write_counts(path: &Path, counts: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (frame, &count) in counts.iter().enumerate() {
        w.serialize(CountRow { frame, count }).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Count series of `frames` frames; missing frames count zero.
pub fn read_counts(path: &Path, frames: usize) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = vec![0.0; frames];
    for row in r.deserialize::<CountRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let slot = out.get_mut(row.frame).ok_or_else(|| format_err(path, format!("frame {} beyond {frames}", row.frame)))?;
        *slot = row.count;
    }
    Ok(out)
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<Detection>().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub video_id: String,
    pub viewer_id: String,
    pub viewer_index: usize,
    pub delay_frames: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub assignment: Vec<TruthEntry>,
    pub config: Option<ScenarioConfig>,
}

/// Trajectories, egocentric videos and optional ground truth of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneData {
    pub trajectories: Vec<Trajectory>,
    pub videos: Vec<EgoVideo>,
    pub truth: Option<GroundTruth>,
    pub config: Option<ScenarioConfig>,
}

impl SceneData {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            trajectories: s.trajectories.clone(),
            videos: s.videos.clone(),
            truth: Some(s.truth.clone()),
            config: Some(s.config.clone()),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes a scene directory, creating it if needed.
pub fn emit(scenario: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectories(&dir.join("topview.csv"), &scenario.trajectories)?;
    for (k, v) in scenario.videos.iter().enumerate() {
        write_descriptors(&dir.join(format!("ego_{k}.desc")), v)?;
        write_counts(&dir.join(format!("ego_{k}.counts.csv")), &v.counts)?;
    }
    let assignment = scenario
        .truth
        .assignment
        .iter()
        .zip(&scenario.truth.delays)
        .zip(&scenario.videos)
        .map(|((&k, &d), v)| TruthEntry {
            video_id: v.video_id.clone(),
            viewer_id: scenario.trajectories[k].viewer_id.clone(),
            viewer_index: k,
            delay_frames: d,
        })
        .collect();
    write_json(&dir.join("truth.json"), &TruthFile { assignment, config: Some(scenario.config.clone()) })?;
    write_json(&dir.join("config.json"), &scenario.config)?;
    Ok(())
}

/// Generates and writes `count` scenes with consecutive seeds into
/// `dir/scene_000`, `dir/scene_001`, ...
pub fn emit_batch(base: &ScenarioConfig, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    crate::simulator::batch_configs(base, count)
        .iter()
        .enumerate()
        .map(|(n, cfg)| {
            let sub = dir.join(format!("scene_{n:03}"));
            emit(&generate(cfg)?, &sub)?;
            Ok(sub)
        })
        .collect()
}

/// Indices `k` of the `ego_<k>.desc` files in `dir`, ascending.
fn ego_indices(dir: &Path) -> Result<Vec<usize>> {
    let mut ks = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(k) = name.strip_prefix("ego_").and_then(|r| r.strip_suffix(".desc")) {
            if let Ok(k) = k.parse::<usize>() {
                ks.push(k);
            }
        }
    }
    ks.sort_unstable();
    Ok(ks)
}

/// Reads a scene directory. The top-view frame rate comes from
/// `config.json` when present, else from the first descriptor sidecar.
pub fn load_scene(dir: &Path, fcfg: &FeatureConfig) -> Result<SceneData> {
    let config: Option<ScenarioConfig> = match fs::read_to_string(dir.join("config.json")) {
        Ok(s) => Some(serde_json::from_str(&s).map_err(|e| format_err(&dir.join("config.json"), e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let mut videos = Vec::new();
    for k in ego_indices(dir)? {
        let desc = dir.join(format!("ego_{k}.desc"));
        let (video_id, frame_rate, descriptors) = read_descriptors(&desc)?;
        let frames = descriptors.len();
        let counts_path = dir.join(format!("ego_{k}.counts.csv"));
        let det_path = dir.join(format!("ego_{k}.detections.csv"));
        let counts = if counts_path.exists() {
            read_counts(&counts_path, frames)?
        } else if det_path.exists() {
            ingest_detections(&read_detections(&det_path)?, frames, fcfg)
        } else {
            return Err(format_err(&desc, "neither a counts nor a detections file accompanies it"));
        };
        videos.push(EgoVideo { video_id, frame_rate, descriptors, counts });
    }
    if videos.is_empty() {
        return Err(format_err(dir, "no egocentric descriptor files"));
    }
    let rate = config.as_ref().map_or(videos[0].frame_rate, |c| c.frame_rate);
    let trajectories = read_trajectories(&dir.join("topview.csv"), rate)?;

    let truth = match fs::read_to_string(dir.join("truth.json")) {
        Ok(s) => {
            let path = dir.join("truth.json");
            let tf: TruthFile = serde_json::from_str(&s).map_err(|e| format_err(&path, e.to_string()))?;
            let mut assignment = Vec::with_capacity(videos.len());
            let mut delays = Vec::with_capacity(videos.len());
            for v in &videos {
                let e = tf
                    .assignment
                    .iter()
                    .find(|e| e.video_id == v.video_id)
                    .ok_or_else(|| format_err(&path, format!("no entry for video {}", v.video_id)))?;
                let k = trajectories
                    .iter()
                    .position(|t| t.viewer_id == e.viewer_id)
                    .ok_or_else(|| format_err(&path, format!("unknown viewer {}", e.viewer_id)))?;
                assignment.push(k);
                delays.push(e.delay_frames);
            }
            let gt = GroundTruth { assignment, delays };
            gt.validate(trajectories.len()).map_err(|e| format_err(&path, e.to_string()))?;
            Some(gt)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    Ok(SceneData { trajectories, videos, truth, config })
}
