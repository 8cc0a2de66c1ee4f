//! Top-view field-of-view geometry.
//!
//! A viewer's field of view in the ground plane is a circular sector (the
//! "cone") anchored at the viewer's position and oriented along the
//! direction of motion. Overlap between cones is measured by rasterizing
//! both onto a shared lattice with cells of `grid_resolution_m` meters.
//! Every sector with a half-angle below 90 degrees is convex, so each
//! lattice row intersects it in at most one contiguous run of cells; a
//! raster is stored as one span per row.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub viewer_id: String,
    pub positions: Vec<Point>,
    pub frame_rate: f64,
}

impl Trajectory {
    pub fn new(viewer_id: impl Into<String>, positions: Vec<Point>, frame_rate: f64) -> Result<Self> {
        let t = Self { viewer_id: viewer_id.into(), positions, frame_rate };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidInput(format!("trajectory {} is empty", self.viewer_id)));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trajectory {} has frame rate {}",
                self.viewer_id, self.frame_rate
            )));
        }
        if self.positions.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trajectory {} has non-finite coordinates",
                self.viewer_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Frames `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            viewer_id: self.viewer_id.clone(),
            positions: self.positions[start..start + len].to_vec(),
            frame_rate: self.frame_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FovCone {
    pub apex: Point,
    pub heading: f64,
    pub half_angle: f64,
    pub range: f64,
}

impl FovCone {
    pub fn new(apex: Point, heading: f64, half_angle: f64, range: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < PI / 2.0) {
            return Err(Error::InvalidInput(format!("half angle {half_angle} outside (0, pi/2)")));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidInput(format!("cone range {range} must be positive")));
        }
        if !apex[0].is_finite() || !apex[1].is_finite() || !heading.is_finite() {
            return Err(Error::InvalidInput("non-finite cone apex or heading".into()));
        }
        Ok(Self { apex, heading, half_angle, range })
    }

    /// Exact sector area.
    pub fn area(&self) -> f64 {
        self.range * self.range * self.half_angle
    }

    /// Inward normals of the two bounding rays.
    fn normals(&self) -> [Point; 2] {
        let left = self.heading + self.half_angle;
        let right = self.heading - self.half_angle;
        [[left.sin(), -left.cos()], [-right.sin(), right.cos()]]
    }

    /// Distance at most `range` and angular deviation from the heading at most `half_angle`.
    pub fn contains(&self, p: Point) -> bool {
        let dx = p[0] - self.apex[0];
        let dy = p[1] - self.apex[1];
        if dx * dx + dy * dy > self.range * self.range {
            return false;
        }
        self.normals().iter().all(|n| n[0] * dx + n[1] * dy >= 0.0)
    }

    /// Applies the rigid motion `p -> R(angle) p + shift`.
    pub fn transformed(&self, angle: f64, shift: Point) -> Self {
        let (s, c) = angle.sin_cos();
        let [x, y] = self.apex;
        Self {
            apex: [c * x - s * y + shift[0], s * x + c * y + shift[1]],
            heading: self.heading + angle,
            ..*self
        }
    }

    pub fn rasterize(&self, resolution: f64) -> RasterCone {
        RasterCone::new(self, resolution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub half_angle_deg: f64,
    /// Cone range in meters; `None` resolves to the scene diameter.
    pub range_m: Option<f64>,
    pub grid_resolution_m: f64,
    /// Meters per frame below which the heading is undefined.
    pub speed_epsilon: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { half_angle_deg: 30.0, range_m: None, grid_resolution_m: 0.1, speed_epsilon: 0.01 }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.half_angle_deg) || self.half_angle_deg >= 90.0 {
            return Err(Error::InvalidInput(format!("half_angle_deg {} outside (0, 90)", self.half_angle_deg)));
        }
        if !positive(self.grid_resolution_m) || !positive(self.speed_epsilon) {
            return Err(Error::InvalidInput("grid resolution and speed epsilon must be positive".into()));
        }
        if let Some(r) = self.range_m {
            if !positive(r) {
                return Err(Error::InvalidInput(format!("range_m {r} must be positive")));
            }
        }
        Ok(())
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle_deg.to_radians()
    }

    /// Range to use for cones over `trajs`: the configured value or the
    /// diagonal of the positions' bounding box.
    pub fn resolve_range(&self, trajs: &[Trajectory]) -> f64 {
        self.range_m.unwrap_or_else(|| scene_diameter(trajs))
    }

    pub fn with_range(mut self, range_m: f64) -> Self {
        self.range_m = Some(range_m);
        self
    }
}

/// Bounding-box diagonal of all positions, floored at one meter.
pub fn scene_diameter(trajs: &[Trajectory]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in trajs.iter().flat_map(|t| t.positions.iter()) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if !lo[0].is_finite() {
        return 1.0;
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(1.0)
}

/// Per-frame heading in radians.
///
/// The heading at frame `t` is the direction of `positions[t+1] - positions[t]`;
/// the last frame reuses the previous heading. Displacements shorter than
/// `speed_epsilon` carry the most recent heading forward; frames before the
/// first defined heading are back-filled with it.
pub fn headings(traj: &Trajectory, cfg: &GeometryConfig) -> Result<Vec<f64>> {
    traj.validate()?;
    let n = traj.len();
    let mut out: Vec<Option<f64>> = vec![None; n];
    let mut last = None;
    for t in 0..n.saturating_sub(1) {
        let [x0, y0] = traj.positions[t];
        let [x1, y1] = traj.positions[t + 1];
        let (dx, dy) = (x1 - x0, y1 - y0);
        if dx.hypot(dy) >= cfg.speed_epsilon {
            last = Some(dy.atan2(dx));
        }
        out[t] = last;
    }
    if n >= 2 {
        out[n - 1] = out[n - 2];
    }
    let first = out
        .iter()
        .flatten()
        .copied()
        .next()
        .ok_or_else(|| Error::AllStationary(traj.viewer_id.clone()))?;
    Ok(out.into_iter().map(|h| h.unwrap_or(first)).collect())
}

/// Cone of `traj` at `frame`, with headings already computed.
pub fn cone_from_heading(traj: &Trajectory, heading: f64, frame: usize, cfg: &GeometryConfig, range: f64) -> Result<FovCone> {
    FovCone::new(traj.positions[frame], heading, cfg.half_angle(), range)
}

pub fn cone_at(traj: &Trajectory, frame: usize, cfg: &GeometryConfig) -> Result<FovCone> {
    if frame >= traj.len() {
        return Err(Error::InvalidInput(format!("frame {frame} beyond trajectory length {}", traj.len())));
    }
    let h = headings(traj, cfg)?;
    let range = cfg.resolve_range(std::slice::from_ref(traj));
    cone_from_heading(traj, h[frame], frame, cfg, range)
}

/// All cones of a trajectory, one per frame.
pub fn cones(traj: &Trajectory, cfg: &GeometryConfig, range: f64) -> Result<Vec<FovCone>> {
    let h = headings(traj, cfg)?;
    (0..traj.len()).map(|f| cone_from_heading(traj, h[f], f, cfg, range)).collect()
}

/// Intersection over union of two cones, by cell count on a shared lattice.
pub fn cone_iou(a: &FovCone, b: &FovCone, cfg: &GeometryConfig) -> f64 {
    let ra = a.rasterize(cfg.grid_resolution_m);
    let rb = b.rasterize(cfg.grid_resolution_m);
    let iou = ra.iou(&rb);
    if ra.area() + rb.area() == 0 && a == b {
        1.0
    } else {
        iou
    }
}

/// Number of `points` inside the cone.
pub fn count_in_cone(cone: &FovCone, points: &[Point]) -> usize {
    points.iter().filter(|p| cone.contains(**p)).count()
}

/// Cells of one cone on the global lattice whose cell `(ix, iy)` has its
/// center at `((ix + 0.5) res, (iy + 0.5) res)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterCone {
    row0: i64,
    /// Half-open column spans `[lo, hi)`, one per row starting at `row0`.
    spans: Vec<(i64, i64)>,
    area: u64,
}

impl RasterCone {
    fn new(cone: &FovCone, res: f64) -> Self {
        let [ax, ay] = cone.apex;
        let r = cone.range;
        let normals = cone.normals();
        let iy_lo = ((ay - r) / res - 0.5).ceil() as i64;
        let iy_hi = ((ay + r) / res - 0.5).floor() as i64;
        let mut spans = Vec::with_capacity((iy_hi - iy_lo + 1).max(0) as usize);
        let mut area = 0u64;
        for iy in iy_lo..=iy_hi {
            let dy = (iy as f64 + 0.5) * res - ay;
            let w2 = r * r - dy * dy;
            let mut span = (0, 0);
            if w2 >= 0.0 {
                let w = w2.sqrt();
                let (mut xl, mut xh) = (-w, w);
                let mut empty = false;
                for n in &normals {
                    // n.x * dx + n.y * dy >= 0
                    if n[0] > 0.0 {
                        xl = xl.max(-n[1] * dy / n[0]);
                    } else if n[0] < 0.0 {
                        xh = xh.min(-n[1] * dy / n[0]);
                    } else if n[1] * dy < 0.0 {
                        empty = true;
                    }
                }
                if !empty && xl <= xh {
                    let lo = ((ax + xl) / res - 0.5).ceil() as i64;
                    let hi = ((ax + xh) / res - 0.5).floor() as i64 + 1;
                    if hi > lo {
                        span = (lo, hi);
                        area += (hi - lo) as u64;
                    }
                }
            }
            spans.push(span);
        }
        Self { row0: iy_lo, spans, area }
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn contains_cell(&self, ix: i64, iy: i64) -> bool {
        let k = iy - self.row0;
        if k < 0 || k as usize >= self.spans.len() {
            return false;
        }
        let (lo, hi) = self.spans[k as usize];
        ix >= lo && ix < hi
    }

    pub fn intersection(&self, other: &RasterCone) -> u64 {
        let start = self.row0.max(other.row0);
        let end = (self.row0 + self.spans.len() as i64).min(other.row0 + other.spans.len() as i64);
        if end <= start {
            return 0;
        }
        let a = &self.spans[(start - self.row0) as usize..(end - self.row0) as usize];
        let b = &other.spans[(start - other.row0) as usize..(end - other.row0) as usize];
        a.iter()
            .zip(b)
            .map(|(&(alo, ahi), &(blo, bhi))| (ahi.min(bhi) - alo.max(blo)).max(0) as u64)
            .sum()
    }

    pub fn iou(&self, other: &RasterCone) -> f64 {
        let inter = self.intersection(other);
        let union = self.area + other.area - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(TAU)
}
