//! Node and edge features of the top-view and egocentric graphs.
//!
//! Top-view node `k` carries the frame-by-frame IOU matrix of its own cones
//! and the number of other viewers inside its cone per frame; edge `(k, l)`
//! carries the IOU between cone `k` at frame `p` and cone `l` at frame `q`.
//! Egocentric node `i` carries the descriptor self-similarity matrix and a
//! people-count series; edge `(i, j)` carries the cross-video descriptor
//! similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, GeometryConfig, Point, RasterCone, Trajectory};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub min_box_fraction: f64,
    pub resample_rate: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { gamma: 0.5, alpha: 0.9, min_box_fraction: 0.04, resample_rate: 10.0 }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "gamma {} must be positive and alpha {} within [0, 1]",
                self.gamma, self.alpha
            )));
        }
        if !(self.min_box_fraction > 0.0 && self.min_box_fraction < 1.0) {
            return Err(Error::InvalidInput(format!("min_box_fraction {} outside (0, 1)", self.min_box_fraction)));
        }
        if !(self.resample_rate > 0.0) {
            return Err(Error::InvalidInput("resample_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Top,
    Ego,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    /// `U^IOU` for top-view nodes, `U^GIST` for egocentric nodes.
    pub similarity: Matrix,
    /// Z-normalized people-count series.
    pub counts: Vec<f64>,
}

/// One view's graph. Edge matrices are stored once per unordered pair
/// `k < l`; the `(l, k)` matrix is the transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewGraph {
    pub kind: ViewKind,
    pub node_ids: Vec<String>,
    pub nodes: Vec<NodeFeatures>,
    edges: Vec<Matrix>,
}

fn pair_index(n: usize, k: usize, l: usize) -> usize {
    debug_assert!(k < l && l < n);
    k * n - k * (k + 1) / 2 + (l - k - 1)
}

impl ViewGraph {
    /// `edges` holds the matrices of pairs `(0,1), (0,2), .., (1,2), ..` in order.
    pub fn new(kind: ViewKind, node_ids: Vec<String>, nodes: Vec<NodeFeatures>, edges: Vec<Matrix>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || node_ids.len() != n {
            return Err(Error::InvalidInput("graph needs at least one node and one id per node".into()));
        }
        if edges.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidInput(format!("{} edges for {n} nodes", edges.len())));
        }
        Ok(Self { kind, node_ids, nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Frames of node `k`.
    pub fn frames(&self, k: usize) -> usize {
        self.nodes[k].counts.len()
    }

    /// Edge matrix `B_kl`, rows indexed by frames of `k`.
    pub fn edge(&self, k: usize, l: usize) -> Matrix {
        assert_ne!(k, l, "edge needs two distinct nodes");
        if k < l {
            self.edges[pair_index(self.n_nodes(), k, l)].clone()
        } else {
            self.edges[pair_index(self.n_nodes(), l, k)].transpose()
        }
    }

    /// Stored matrix for `k < l`.
    pub fn edge_ref(&self, k: usize, l: usize) -> &Matrix {
        &self.edges[pair_index(self.n_nodes(), k, l)]
    }

    /// Graph restricted to the listed nodes, in the listed order.
    pub fn subgraph(&self, keep: &[usize]) -> Self {
        let nodes = keep.iter().map(|&k| self.nodes[k].clone()).collect();
        let node_ids = keep.iter().map(|&k| self.node_ids[k].clone()).collect();
        let mut edges = Vec::new();
        for (a, &k) in keep.iter().enumerate() {
            for &l in &keep[a + 1..] {
                edges.push(self.edge(k, l));
            }
        }
        Self { kind: self.kind, node_ids, nodes, edges }
    }

    /// Keeps the first `len` frames of every node.
    pub fn truncated(&self, len: usize) -> Self {
        let cut = |m: &Matrix| m.block(0, 0, len.min(m.rows()), len.min(m.cols()));
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeFeatures {
                similarity: cut(&n.similarity),
                counts: z_normalize(&n.counts[..len.min(n.counts.len())]),
            })
            .collect();
        Self { kind: self.kind, node_ids: self.node_ids.clone(), nodes, edges: self.edges.iter().map(cut).collect() }
    }
}

/// Subtracts the mean and divides by the standard deviation; a constant
/// series maps to zeros.
pub fn z_normalize(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var <= 1e-24 * (1.0 + mean * mean) {
        return vec![0.0; v.len()];
    }
    let sd = var.sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}

pub fn build_top_graph(trajs: &[Trajectory], geo: &GeometryConfig, cfg: &FeatureConfig) -> Result<ViewGraph> {
    geo.validate()?;
    cfg.validate()?;
    let first = trajs.first().ok_or_else(|| Error::InvalidInput("no trajectories".into()))?;
    for t in trajs {
        t.validate()?;
        if t.len() != first.len() || t.frame_rate != first.frame_rate {
            return Err(Error::MismatchedLengths(format!(
                "{} has {} frames at {} fps, {} has {} at {}",
                t.viewer_id,
                t.len(),
                t.frame_rate,
                first.viewer_id,
                first.len(),
                first.frame_rate
            )));
        }
    }
    let n_frames = first.len();
    let range = geo.resolve_range(trajs);
    let cones = trajs.iter().map(|t| geometry::cones(t, geo, range)).collect::<Result<Vec<_>>>()?;
    let rasters: Vec<Vec<RasterCone>> = cones
        .iter()
        .map(|cs| cs.iter().map(|c| c.rasterize(geo.grid_resolution_m)).collect())
        .collect();

    let mut nodes = Vec::with_capacity(trajs.len());
    for (k, rk) in rasters.iter().enumerate() {
        let mut u = Matrix::identity(n_frames);
        for p in 0..n_frames {
            for q in p + 1..n_frames {
                let v = rk[p].iou(&rk[q]);
                u.set(p, q, v);
                u.set(q, p, v);
            }
        }
        let counts: Vec<f64> = (0..n_frames)
            .map(|f| {
                let others: Vec<Point> = trajs
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != k)
                    .map(|(_, t)| t.positions[f])
                    .collect();
                geometry::count_in_cone(&cones[k][f], &others) as f64
            })
            .collect();
        nodes.push(NodeFeatures { similarity: u, counts: z_normalize(&counts) });
    }

    let mut edges = Vec::new();
    for k in 0..trajs.len() {
        for l in k + 1..trajs.len() {
            edges.push(Matrix::from_fn(n_frames, n_frames, |p, q| rasters[k][p].iou(&rasters[l][q])));
        }
    }
    ViewGraph::new(ViewKind::Top, trajs.iter().map(|t| t.viewer_id.clone()).collect(), nodes, edges)
}

pub fn gist_similarity(d1: &[f64], d2: &[f64], gamma: f64) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::DimensionMismatch { expected: d1.len(), got: d2.len() });
    }
    Ok(gist_sim_unchecked(d1, d2, gamma))
}

#[inline]
fn gist_sim_unchecked(d1: &[f64], d2: &[f64], gamma: f64) -> f64 {
    let d2sum: f64 = d1.iter().zip(d2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2sum.sqrt()).exp()
}

/// One egocentric video: per-frame descriptors and a raw people-count series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoVideo {
    pub video_id: String,
    pub frame_rate: f64,
    pub descriptors: Vec<Vec<f64>>,
    pub counts: Vec<f64>,
}

impl EgoVideo {
    pub fn frames(&self) -> usize {
        self.descriptors.len()
    }

    pub fn dim(&self) -> usize {
        self.descriptors.first().map_or(0, Vec::len)
    }

    /// Keeps frames `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            video_id: self.video_id.clone(),
            frame_rate: self.frame_rate,
            descriptors: self.descriptors[start..start + len].to_vec(),
            counts: self.counts[start..start + len].to_vec(),
        }
    }
}

pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

pub fn build_ego_graph(videos: &[EgoVideo], cfg: &FeatureConfig) -> Result<ViewGraph> {
    cfg.validate()?;
    let first = videos.first().ok_or_else(|| Error::InvalidInput("no egocentric videos".into()))?;
    let dim = first.dim();
    for v in videos {
        if v.frames() == 0 {
            return Err(Error::InvalidInput(format!("video {} has no frames", v.video_id)));
        }
        if let Some(bad) = v.descriptors.iter().find(|d| d.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        if v.counts.len() != v.frames() {
            return Err(Error::DimensionMismatch { expected: v.frames(), got: v.counts.len() });
        }
    }
    let normed: Vec<Vec<Vec<f64>>> =
        videos.iter().map(|v| v.descriptors.iter().map(|d| l2_normalize(d)).collect()).collect();
    let g = cfg.gamma;

    let nodes = normed
        .iter()
        .zip(videos)
        .map(|(d, v)| {
            let n = d.len();
            let mut u = Matrix::identity(n);
            for p in 0..n {
                for q in p + 1..n {
                    let s = gist_sim_unchecked(&d[p], &d[q], g);
                    u.set(p, q, s);
                    u.set(q, p, s);
                }
            }
            NodeFeatures { similarity: u, counts: z_normalize(&v.counts) }
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..videos.len() {
        for j in i + 1..videos.len() {
            let (a, b) = (&normed[i], &normed[j]);
            edges.push(Matrix::from_fn(a.len(), b.len(), |p, q| gist_sim_unchecked(&a[p], &b[q], g)));
        }
    }
    ViewGraph::new(ViewKind::Ego, videos.iter().map(|v| v.video_id.clone()).collect(), nodes, edges)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub score: f64,
    pub box_height_fraction: f64,
}

/// Per-frame soft people count from person detections.
///
/// Detections shorter than `min_box_fraction` of the frame height are
/// dropped; surviving scores are min-max rescaled over the whole video
/// (a single distinct score maps to 1) and summed per frame.
pub fn ingest_detections(rows: &[Detection], frame_count: usize, cfg: &FeatureConfig) -> Vec<f64> {
    let kept: Vec<&Detection> = rows
        .iter()
        .filter(|d| d.box_height_fraction >= cfg.min_box_fraction && d.frame < frame_count)
        .collect();
    let mut out = vec![0.0; frame_count];
    if kept.is_empty() {
        return out;
    }
    let lo = kept.iter().map(|d| d.score).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max);
    for d in kept {
        out[d.frame] += if hi > lo { (d.score - lo) / (hi - lo) } else { 1.0 };
    }
    out
}

/// Nearest-frame source index for every target frame.
pub fn resample_indices(len: usize, from_rate: f64, to_rate: f64) -> Vec<usize> {
    let new_len = (len as f64 * to_rate / from_rate).round() as usize;
    (0..new_len)
        .map(|t| ((t as f64 * from_rate / to_rate).round() as usize).min(len.saturating_sub(1)))
        .collect()
}

pub fn resample<T: Clone>(series: &[T], from_rate: f64, to_rate: f64) -> Vec<T> {
    if from_rate == to_rate {
        return series.to_vec();
    }
    resample_indices(series.len(), from_rate, to_rate).into_iter().map(|i| series[i].clone()).collect()
}

/// Resamples both axes of a frame-by-frame matrix.
pub fn resample_matrix(m: &Matrix, from_rate: f64, to_rate: f64) -> Matrix {
    if from_rate == to_rate {
        return m.clone();
    }
    let ri = resample_indices(m.rows(), from_rate, to_rate);
    let ci = resample_indices(m.cols(), from_rate, to_rate);
    Matrix::from_fn(ri.len(), ci.len(), |r, c| m.get(ri[r], ci[c]))
}

pub fn resample_trajectory(t: &Trajectory, to_rate: f64) -> Trajectory {
    Trajectory {
        viewer_id: t.viewer_id.clone(),
        positions: resample(&t.positions, t.frame_rate, to_rate),
        frame_rate: to_rate,
    }
}

pub fn resample_video(v: &EgoVideo, to_rate: f64) -> EgoVideo {
    EgoVideo {
        video_id: v.video_id.clone(),
        frame_rate: to_rate,
        descriptors: resample(&v.descriptors, v.frame_rate, to_rate),
        counts: resample(&v.counts, v.frame_rate, to_rate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker(id: &str, start: Point, step: Point, n: usize) -> Trajectory {
        let pos = (0..n).map(|i| [start[0] + step[0] * i as f64, start[1] + step[1] * i as f64]).collect();
        Trajectory::new(id, pos, 10.0).unwrap()
    }

    fn geo() -> GeometryConfig {
        GeometryConfig { range_m: Some(6.0), grid_resolution_m: 0.2, ..GeometryConfig::default() }
    }

    #[test]
    fn gist_similarity_values() {
        let cfg = FeatureConfig::default();
        assert_eq!(gist_similarity(&[0.3, 0.4], &[0.3, 0.4], cfg.gamma).unwrap(), 1.0);
        let s = gist_similarity(&[1.0, 0.0], &[1.0, 1.0], cfg.gamma).unwrap();
        assert!((s - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s - 0.6065).abs() < 1e-4);
        assert!(matches!(gist_similarity(&[1.0], &[1.0, 2.0], 0.5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gist_similarity_decreases_with_distance() {
        let mut prev = 1.0;
        for k in 1..50 {
            let s = gist_similarity(&[0.0, 0.0], &[k as f64 * 0.05, 0.0], 0.5).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn top_graph_single_walker_has_high_adjacent_iou() {
        let g = build_top_graph(&[walker("a", [0.0, 0.0], [0.1, 0.0], 20)], &geo(), &FeatureConfig::default()).unwrap();
        let u = &g.nodes[0].similarity;
        assert!(u.is_symmetric());
        for f in 0..20 {
            assert_eq!(u.get(f, f), 1.0);
        }
        for f in 0..19 {
            assert!(u.get(f, f + 1) > 0.9);
        }
        assert_eq!(g.nodes[0].counts, vec![0.0; 20]);
    }

    #[test]
    fn lockstep_walkers_have_unit_edge_diagonal() {
        let a = walker("a", [0.0, 0.0], [0.1, 0.05], 15);
        let b = walker("b", [0.0, 0.0], [0.1, 0.05], 15);
        let g = build_top_graph(&[a, b], &geo(), &FeatureConfig::default()).unwrap();
        let e = g.edge(0, 1);
        for f in 0..15 {
            assert_eq!(e.get(f, f), 1.0);
        }
    }

    #[test]
    fn top_graph_matches_direct_recomputation() {
        let trajs = vec![
            walker("a", [0.0, 0.0], [0.1, 0.0], 12),
            walker("b", [3.0, -1.0], [0.0, 0.12], 12),
            walker("c", [5.0, 4.0], [-0.08, -0.05], 12),
        ];
        let geo = geo();
        let g = build_top_graph(&trajs, &geo, &FeatureConfig::default()).unwrap();
        let range = geo.resolve_range(&trajs);
        let cones: Vec<Vec<_>> = trajs.iter().map(|t| geometry::cones(t, &geo, range).unwrap()).collect();
        for k in 0..3 {
            for p in 0..12 {
                for q in 0..12 {
                    let want = geometry::cone_iou(&cones[k][p], &cones[k][q], &geo);
                    assert_eq!(g.nodes[k].similarity.get(p, q), want);
                }
            }
            for l in 0..3 {
                if k == l {
                    continue;
                }
                let e = g.edge(k, l);
                for p in 0..12 {
                    for q in 0..12 {
                        assert_eq!(e.get(p, q), geometry::cone_iou(&cones[k][p], &cones[l][q], &geo));
                    }
                }
            }
        }
    }

    #[test]
    fn top_graph_rejects_mismatched_lengths() {
        let r = build_top_graph(
            &[walker("a", [0.0, 0.0], [0.1, 0.0], 10), walker("b", [0.0, 0.0], [0.1, 0.0], 11)],
            &geo(),
            &FeatureConfig::default(),
        );
        assert!(matches!(r, Err(Error::MismatchedLengths(_))));
    }

    #[test]
    fn top_counts_see_viewer_ahead() {
        // b stands 2 m ahead of a inside a's cone for the first frames only
        let a = walker("a", [0.0, 0.0], [0.1, 0.0], 10);
        let mut bpos: Vec<Point> = vec![[2.0, 0.0]; 5];
        bpos.extend((0..5).map(|i| [2.0 + 0.1 * i as f64, -8.0]));
        let b = Trajectory::new("b", bpos, 10.0).unwrap();
        let trajs = vec![a, b];
        let geo = geo();
        let range = geo.resolve_range(&trajs);
        let cones = geometry::cones(&trajs[0], &geo, range).unwrap();
        let raw: Vec<f64> =
            (0..10).map(|f| geometry::count_in_cone(&cones[f], &[trajs[1].positions[f]]) as f64).collect();
        assert_eq!(raw, vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g = build_top_graph(&trajs, &geo, &FeatureConfig::default()).unwrap();
        assert_eq!(g.nodes[0].counts, z_normalize(&raw));
    }

    fn video(id: &str, desc: Vec<Vec<f64>>) -> EgoVideo {
        let n = desc.len();
        EgoVideo { video_id: id.into(), frame_rate: 10.0, descriptors: desc, counts: (0..n).map(|i| (i % 3) as f64).collect() }
    }

    fn random_descriptors(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn ego_graph_self_pair_edge_equals_node() {
        let d = random_descriptors(1, 15, 8);
        let g = build_ego_graph(&[video("a", d.clone()), video("b", d)], &FeatureConfig::default()).unwrap();
        assert_eq!(g.edge(0, 1), g.nodes[0].similarity);
    }

    #[test]
    fn constant_descriptors_give_all_ones() {
        let g = build_ego_graph(&[video("a", vec![vec![0.2, 0.5, -0.1]; 9])], &FeatureConfig::default()).unwrap();
        assert!(g.nodes[0].similarity.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ego_graph_matches_pointwise_oracle() {
        let cfg = FeatureConfig::default();
        let (da, db) = (random_descriptors(2, 12, 6), random_descriptors(3, 9, 6));
        let g = build_ego_graph(&[video("a", da.clone()), video("b", db.clone())], &cfg).unwrap();
        let (na, nb): (Vec<_>, Vec<_>) =
            (da.iter().map(|v| l2_normalize(v)).collect(), db.iter().map(|v| l2_normalize(v)).collect());
        for p in 0..12 {
            for q in 0..12 {
                let want = gist_similarity(&na[p], &na[q], cfg.gamma).unwrap();
                assert!((g.nodes[0].similarity.get(p, q) - want).abs() < 1e-15);
            }
            for q in 0..9 {
                let want = gist_similarity(&na[p], &nb[q], cfg.gamma).unwrap();
                assert!((g.edge(0, 1).get(p, q) - want).abs() < 1e-15);
                assert_eq!(g.edge(1, 0).get(q, p), g.edge(0, 1).get(p, q));
            }
        }
    }

    #[test]
    fn ego_graph_dimension_mismatch() {
        let r = build_ego_graph(
            &[video("a", random_descriptors(1, 5, 4)), video("b", random_descriptors(1, 5, 3))],
            &FeatureConfig::default(),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn subgraph_reorders_edges() {
        let vids: Vec<_> = (0..4).map(|i| video(&format!("v{i}"), random_descriptors(i, 6, 3))).collect();
        let g = build_ego_graph(&vids, &FeatureConfig::default()).unwrap();
        let s = g.subgraph(&[3, 1]);
        assert_eq!(s.node_ids, vec!["v3", "v1"]);
        assert_eq!(s.edge(0, 1), g.edge(3, 1));
    }

    #[test]
    fn detections_empty_and_single() {
        let cfg = FeatureConfig::default();
        assert_eq!(ingest_detections(&[], 5, &cfg), vec![0.0; 5]);
        let one = [Detection { frame: 2, score: -0.73, box_height_fraction: 0.3 }];
        assert_eq!(ingest_detections(&one, 4, &cfg), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn detections_hand_trace() {
        let cfg = FeatureConfig { min_box_fraction: 0.1, ..FeatureConfig::default() };
        let rows = [
            (0, 0.5, 0.20),
            (0, 1.5, 0.05), // dropped: too small
            (0, 2.5, 0.30),
            (1, -0.5, 0.50),
            (2, 4.5, 0.15),
            (2, 0.5, 0.12),
            (3, 9.0, 0.01), // dropped
            (4, 1.5, 0.40),
            (4, 2.5, 0.10),
            (4, 3.5, 0.11),
        ]
        .map(|(frame, score, box_height_fraction)| Detection { frame, score, box_height_fraction });
        // kept scores span [-0.5, 4.5] -> (s + 0.5) / 5
        let want = [
            (1.0 + 3.0) / 5.0,
            0.0,
            (5.0 + 1.0) / 5.0,
            0.0,
            (2.0 + 3.0 + 4.0) / 5.0,
        ];
        let got = ingest_detections(&rows, 5, &cfg);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        // bounded by rows per frame
        assert!(got[4] <= 3.0 && got[0] <= 3.0);
    }

    #[test]
    fn resample_cases() {
        let s: Vec<usize> = (0..100).collect();
        assert_eq!(resample(&s, 30.0, 30.0), s);
        let half = resample(&s, 30.0, 15.0);
        assert_eq!(half.len(), 50);
        assert!(half.iter().enumerate().all(|(i, &v)| v == 2 * i));
        let up = resample(&s, 24.0, 30.0);
        assert_eq!(up.len(), 125);
        for (t, &v) in up.iter().enumerate() {
            assert_eq!(v, ((t as f64 * 24.0 / 30.0).round() as usize).min(99));
        }
        let m = Matrix::from_fn(6, 6, |r, c| (r * 10 + c) as f64);
        let r = resample_matrix(&m, 30.0, 15.0);
        assert_eq!(r.rows(), 3);
        assert_eq!(r.get(2, 1), 42.0);
    }

    #[test]
    fn z_normalize_constant_is_zero() {
        assert_eq!(z_normalize(&[3.0; 4]), vec![0.0; 4]);
        let z = z_normalize(&[1.0, 2.0, 3.0]);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn matrices_stay_in_unit_interval() {
        let trajs: Vec<_> = (0..3)
            .map(|k| {
                let pos = (0..25)
                    .map(|i| {
                        let s = i as f64 * 0.1 + k as f64;
                        [3.0 * s.cos() + k as f64, 3.0 * (1.3 * s).sin()]
                    })
                    .collect();
                Trajectory::new(format!("t{k}"), pos, 10.0).unwrap()
            })
            .collect();
        let g = build_top_graph(&trajs, &geo(), &FeatureConfig::default()).unwrap();
        for n in &g.nodes {
            assert!(n.similarity.is_symmetric());
            assert!(n.similarity.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(g.edge(0, 2).as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
