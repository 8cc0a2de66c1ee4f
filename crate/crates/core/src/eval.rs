//! Evaluation: assignment accuracy, viewer and top-view ranking curves,
//! completeness and length sweeps, and baselines.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrConfig;
use crate::delay_opt::{init_delays_median, init_delays_zero, optimize, Objective, OptimizationTrace, OptimizerConfig};
use crate::error::{Error, Result};
use crate::features::{build_ego_graph, build_top_graph, resample_trajectory, resample_video, FeatureConfig, ViewGraph};
use crate::geometry::GeometryConfig;
use crate::io::SceneData;
use crate::matching::{
    max_profit_assignment, spectral_match, CorrelationBank, HardAssignment, SoftAssignment, SpectralConfig,
};
use crate::simulator::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Every correlation at its own best offset; no delay search.
    #[serde(rename = "baseline_free")]
    Free,
    #[serde(rename = "spectral")]
    Spectral,
    #[serde(rename = "matching_score")]
    Score,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Free => "baseline_free",
            Method::Spectral => "spectral",
            Method::Score => "matching_score",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Zero,
    Median,
}

impl Init {
    pub fn label(self) -> &'static str {
        match self {
            Init::Zero => "zero",
            Init::Median => "median",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub init: Init,
    pub geometry: GeometryConfig,
    pub features: FeatureConfig,
    pub correlation: CorrConfig,
    pub spectral: SpectralConfig,
    pub optimizer: OptimizerConfig,
    pub step_frames: i64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Score,
            init: Init::Median,
            geometry: GeometryConfig::default(),
            features: FeatureConfig::default(),
            correlation: CorrConfig::default(),
            spectral: SpectralConfig::default(),
            optimizer: OptimizerConfig { objective: Objective::MatchingScore, ..OptimizerConfig::default() },
            step_frames: 1,
        }
    }
}

impl PipelineConfig {
    pub fn with_method(self, method: Method, init: Init) -> Self {
        let objective = match method {
            Method::Spectral => Objective::Spectral,
            _ => Objective::MatchingScore,
        };
        Self { method, init, optimizer: OptimizerConfig { objective, ..self.optimizer }, ..self }
    }
}

/// Both graphs of one scene, built at the common frame rate.
#[derive(Clone, Debug)]
pub struct PreparedScene {
    pub name: String,
    pub ego: ViewGraph,
    pub top: ViewGraph,
    pub truth: Option<GroundTruth>,
}

pub fn prepare(name: impl Into<String>, scene: &SceneData, cfg: &PipelineConfig) -> Result<PreparedScene> {
    let rate = cfg.features.resample_rate;
    let trajs: Vec<_> = scene.trajectories.iter().map(|t| resample_trajectory(t, rate)).collect();
    let videos: Vec<_> = scene.videos.iter().map(|v| resample_video(v, rate)).collect();
    Ok(PreparedScene {
        name: name.into(),
        top: build_top_graph(&trajs, &cfg.geometry, &cfg.features)?,
        ego: build_ego_graph(&videos, &cfg.features)?,
        truth: scene.truth.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub soft: SoftAssignment,
    pub hard: HardAssignment,
    pub score: f64,
    pub lambda: f64,
    /// Estimated delays; absent for the free-offset method.
    pub delays: Option<Vec<i64>>,
    pub trace: Option<OptimizationTrace>,
    pub diagnostics: Vec<String>,
}

/// Runs the configured method on cached correlations.
pub fn run_on_bank(bank: &CorrelationBank, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let objective = match cfg.method {
        Method::Free => {
            let a = bank.affinity_free();
            let m = spectral_match(&a, &cfg.spectral)?;
            return Ok(PipelineResult {
                soft: m.soft,
                hard: m.hard,
                score: m.score,
                lambda: m.lambda,
                delays: None,
                trace: None,
                diagnostics: a.diagnostics,
            });
        }
        Method::Spectral => Objective::Spectral,
        Method::Score => Objective::MatchingScore,
    };
    let t0 = match cfg.init {
        Init::Zero => crate::delay_opt::DelayVector::new(init_delays_zero(bank.n_ego()).delays, cfg.step_frames),
        Init::Median => init_delays_median(bank, cfg.step_frames),
    };
    let r = optimize(bank, &t0, &OptimizerConfig { objective, ..cfg.optimizer }, &cfg.spectral)?;
    Ok(PipelineResult {
        soft: r.soft,
        hard: r.hard,
        score: r.score,
        lambda: r.lambda,
        delays: Some(r.delays.delays),
        trace: Some(r.trace),
        diagnostics: r.affinity.diagnostics,
    })
}

pub fn bank_for(ego: &ViewGraph, top: &ViewGraph, cfg: &PipelineConfig) -> Result<CorrelationBank> {
    CorrelationBank::new(ego, top, &cfg.features, &cfg.correlation)
}

pub fn run_pipeline(ego: &ViewGraph, top: &ViewGraph, cfg: &PipelineConfig) -> Result<PipelineResult> {
    run_on_bank(&bank_for(ego, top, cfg)?, cfg)
}

/// Fraction of egocentric videos assigned to their true viewer.
pub fn assignment_accuracy(x: &HardAssignment, truth: &[usize]) -> f64 {
    assert_eq!(x.assignment.len(), truth.len(), "one truth entry per egocentric video");
    if truth.is_empty() {
        return 0.0;
    }
    x.assignment.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    /// Fraction of queries whose true match ranks at or above `r + 1`.
    pub hits_at_rank: Vec<f64>,
}

impl CmcCurve {
    /// Curve of length `gallery` from 1-based ranks.
    pub fn from_ranks(ranks: &[usize], gallery: usize) -> Self {
        let n = ranks.len().max(1) as f64;
        let hits_at_rank = (1..=gallery).map(|r| ranks.iter().filter(|&&q| q <= r).count() as f64 / n).collect();
        Self { hits_at_rank }
    }
}

/// 1-based rank of `values[target]` among `values` sorted descending,
/// counting ties against the target.
pub fn pessimistic_rank(values: &[f64], target: usize) -> usize {
    let v = values[target];
    values.iter().filter(|&&x| x >= v).count()
}

/// Rank of the true viewer in every row of `p`.
pub fn viewer_ranks(p: &SoftAssignment, truth: &[usize]) -> Vec<usize> {
    truth.iter().enumerate().map(|(i, &k)| pessimistic_rank(p.p.row(i), k)).collect()
}

pub fn viewer_cmc(p: &SoftAssignment, truth: &[usize]) -> CmcCurve {
    CmcCurve::from_ranks(&viewer_ranks(p, truth), p.n_top())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub index: usize,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopviewRanking {
    /// Candidates by descending score; failed candidates last.
    pub ranked: Vec<RankedCandidate>,
    pub truth_rank: Option<usize>,
    pub normalized_rank: Option<f64>,
}

/// `(rank - 1) / (n - 1)` for a 1-based rank among `n`.
pub fn normalized_rank(rank: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (rank - 1) as f64 / (n - 1) as f64
    }
}

/// Ranks candidate top-view graphs by the matching score of the selected pipeline.
pub fn rank_topviews(
    ego: &ViewGraph,
    candidates: &[ViewGraph],
    cfg: &PipelineConfig,
    truth: Option<usize>,
) -> Result<TopviewRanking> {
    if candidates.len() < 2 {
        return Err(Error::InvalidInput("ranking needs at least two candidates".into()));
    }
    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(index, top)| match run_pipeline(ego, top, cfg) {
            Ok(r) => RankedCandidate { index, score: r.score, error: None },
            Err(e) => RankedCandidate { index, score: f64::NEG_INFINITY, error: Some(e.to_string()) },
        })
        .collect();
    let scores: Vec<f64> = ranked.iter().map(|c| c.score).collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    let truth_rank = truth.map(|t| pessimistic_rank(&scores, t));
    Ok(TopviewRanking { ranked, truth_rank, normalized_rank: truth_rank.map(|r| normalized_rank(r, candidates.len())) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletenessRow {
    pub scene: String,
    pub subset: Vec<usize>,
    pub ratio: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_accuracy: Option<f64>,
}

/// Upper edges of the completeness-ratio bins; the last bin is closed.
pub const RATIO_BINS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

pub fn bin_ratios(rows: &[CompletenessRow]) -> Vec<BinRow> {
    let mut lo = 0.0;
    RATIO_BINS
        .iter()
        .enumerate()
        .map(|(b, &hi)| {
            let last = b + 1 == RATIO_BINS.len();
            let acc: Vec<f64> = rows
                .iter()
                .filter(|r| r.ratio >= lo && (r.ratio < hi || (last && r.ratio <= hi)))
                .map(|r| r.accuracy)
                .collect();
            let row = BinRow {
                lo,
                hi,
                count: acc.len(),
                mean_accuracy: (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64),
            };
            lo = hi;
            row
        })
        .collect()
}

/// Accuracy of every non-empty subset of the egocentric videos of each scene.
pub fn sweep_completeness(scenes: &[PreparedScene], cfg: &PipelineConfig) -> Result<Vec<CompletenessRow>> {
    let mut rows = Vec::new();
    for s in scenes {
        let truth = s.truth.as_ref().ok_or_else(|| Error::InvalidInput(format!("scene {} has no ground truth", s.name)))?;
        let ne = s.ego.n_nodes();
        if !(2..=6).contains(&ne) {
            return Err(Error::InvalidInput(format!("completeness sweep needs 2 to 6 egocentric videos, scene {} has {ne}", s.name)));
        }
        let bank = bank_for(&s.ego, &s.top, cfg)?;
        for mask in 1u32..(1 << ne) {
            let subset: Vec<usize> = (0..ne).filter(|&i| mask & (1 << i) != 0).collect();
            let r = run_on_bank(&bank.subset(&subset), cfg)?;
            let t: Vec<usize> = subset.iter().map(|&i| truth.assignment[i]).collect();
            rows.push(CompletenessRow {
                scene: s.name.clone(),
                ratio: subset.len() as f64 / s.top.n_nodes() as f64,
                accuracy: assignment_accuracy(&r.hard, &t),
                subset,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub scene: String,
    pub length: usize,
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Shortest prefix the sweep evaluates.
pub const MIN_SWEEP_FRAMES: usize = 10;

fn length_feasible(len: usize, available: usize, corr: &CorrConfig) -> std::result::Result<(), String> {
    if len > available {
        return Err(format!("length {len} exceeds the {available} available frames"));
    }
    if len < MIN_SWEEP_FRAMES {
        return Err(format!("length {len} is below {MIN_SWEEP_FRAMES} frames"));
    }
    let lag = corr.lag_for(len);
    if ((len - lag.min(len)) as f64) < corr.min_overlap_fraction * len as f64 {
        return Err(format!("a lag window of {lag} leaves too little overlap in {len} frames"));
    }
    Ok(())
}

/// Accuracy when every stream is cut to each prefix length.
pub fn sweep_length(scene: &PreparedScene, cfg: &PipelineConfig, lengths: &[usize]) -> Result<Vec<LengthRow>> {
    let truth = scene.truth.as_ref().ok_or_else(|| Error::InvalidInput(format!("scene {} has no ground truth", scene.name)))?;
    let available = (0..scene.ego.n_nodes())
        .map(|i| scene.ego.frames(i))
        .chain((0..scene.top.n_nodes()).map(|k| scene.top.frames(k)))
        .min()
        .unwrap_or(0);
    lengths
        .iter()
        .map(|&len| {
            if let Err(why) = length_feasible(len, available, &cfg.correlation) {
                return Ok(LengthRow { scene: scene.name.clone(), length: len, accuracy: None, skipped: Some(why) });
            }
            let r = run_pipeline(&scene.ego.truncated(len), &scene.top.truncated(len), cfg)?;
            Ok(LengthRow {
                scene: scene.name.clone(),
                length: len,
                accuracy: Some(assignment_accuracy(&r.hard, &truth.assignment)),
                skipped: None,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub label: String,
    pub accuracy: f64,
}

/// Draws averaged by the random-assignment baseline.
pub const RANDOM_DRAWS: usize = 100;

pub fn random_assignment_accuracy(truth: &[usize], n_top: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<usize> = (0..n_top).collect();
    let mut total = 0.0;
    for _ in 0..RANDOM_DRAWS {
        cols.shuffle(&mut rng);
        let x = HardAssignment { n_top, assignment: cols[..truth.len()].to_vec() };
        total += assignment_accuracy(&x, truth);
    }
    total / RANDOM_DRAWS as f64
}

fn hungarian_on(bank: &CorrelationBank, f: impl Fn(usize, usize) -> f64) -> HardAssignment {
    let profit: Vec<Vec<f64>> = (0..bank.n_ego()).map(|a| (0..bank.n_top()).map(|k| f(a, k)).collect()).collect();
    HardAssignment { n_top: bank.n_top(), assignment: max_profit_assignment(&profit) }
}

/// Random, counts-only, unary-only and free-offset graph matching accuracies.
pub fn run_baselines(scene: &PreparedScene, cfg: &PipelineConfig, seed: u64) -> Result<Vec<BaselineRow>> {
    let truth = scene.truth.as_ref().ok_or_else(|| Error::InvalidInput(format!("scene {} has no ground truth", scene.name)))?;
    let bank = bank_for(&scene.ego, &scene.top, cfg)?;
    let t = &truth.assignment;
    let counts = hungarian_on(&bank, |a, k| bank.node_counts_free(a, k));
    let unary = hungarian_on(&bank, |a, k| bank.node_free_value(a, k));
    let free = run_on_bank(&bank, &PipelineConfig { method: Method::Free, ..*cfg })?;
    Ok(vec![
        BaselineRow { label: "random".into(), accuracy: random_assignment_accuracy(t, bank.n_top(), seed) },
        BaselineRow { label: "counts_only".into(), accuracy: assignment_accuracy(&counts, t) },
        BaselineRow { label: "unary_only".into(), accuracy: assignment_accuracy(&unary, t) },
        BaselineRow { label: "graph_matching_free".into(), accuracy: assignment_accuracy(&free.hard, t) },
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scene: String,
    pub accuracy: f64,
    pub assignment: Vec<usize>,
    pub truth: Vec<usize>,
    pub viewer_ranks: Vec<usize>,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<i64>>,
    pub true_delays: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub init: Init,
    pub scenarios: Vec<ScenarioResult>,
    pub mean_accuracy: f64,
    pub viewer_cmc: CmcCurve,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topview_cmc: Option<CmcCurve>,
}

/// Runs the pipeline on every scene and aggregates accuracy and viewer ranking.
pub fn evaluate(scenes: &[PreparedScene], cfg: &PipelineConfig) -> Result<EvalReport> {
    let mut scenarios = Vec::with_capacity(scenes.len());
    let mut all_ranks = Vec::new();
    let mut gallery = 0;
    for s in scenes {
        let truth = s.truth.as_ref().ok_or_else(|| Error::InvalidInput(format!("scene {} has no ground truth", s.name)))?;
        let r = run_pipeline(&s.ego, &s.top, cfg)?;
        let ranks = viewer_ranks(&r.soft, &truth.assignment);
        all_ranks.extend(&ranks);
        gallery = gallery.max(s.top.n_nodes());
        scenarios.push(ScenarioResult {
            scene: s.name.clone(),
            accuracy: assignment_accuracy(&r.hard, &truth.assignment),
            assignment: r.hard.assignment.clone(),
            truth: truth.assignment.clone(),
            viewer_ranks: ranks,
            score: r.score,
            delays: r.delays,
            true_delays: truth.delays.clone(),
        });
    }
    let mean_accuracy = scenarios.iter().map(|s| s.accuracy).sum::<f64>() / scenarios.len().max(1) as f64;
    Ok(EvalReport {
        method: cfg.method,
        init: cfg.init,
        scenarios,
        mean_accuracy,
        viewer_cmc: CmcCurve::from_ranks(&all_ranks, gallery),
        topview_cmc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use rand::Rng;

    #[test]
    fn accuracy_cases() {
        let x = |a: Vec<usize>| HardAssignment { n_top: 6, assignment: a };
        assert_eq!(assignment_accuracy(&x(vec![0, 1, 2]), &[0, 1, 2]), 1.0);
        assert_eq!(assignment_accuracy(&x(vec![3, 4, 5]), &[0, 1, 2]), 0.0);
        assert_eq!(assignment_accuracy(&x(vec![0, 1, 5, 4]), &[0, 1, 2, 3]), 0.5);
    }

    #[test]
    fn cmc_one_hot_and_uniform() {
        let p = SoftAssignment { p: Matrix::from_fn(3, 5, |i, k| if i == k { 1.0 } else { 0.0 }) };
        assert_eq!(viewer_cmc(&p, &[0, 1, 2]).hits_at_rank, vec![1.0; 5]);
        let u = SoftAssignment { p: Matrix::from_fn(2, 5, |_, _| 0.2) };
        assert_eq!(viewer_ranks(&u, &[0, 3]), vec![5, 5]);
        assert_eq!(viewer_cmc(&u, &[0, 3]).hits_at_rank, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cmc_of_random_rows_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (rows, nt) = (4000, 5);
        let p = SoftAssignment { p: Matrix::from_fn(rows, nt, |_, _| rng.gen_range(0.0..1.0)) };
        let truth: Vec<usize> = (0..rows).map(|i| i % nt).collect();
        let c = viewer_cmc(&p, &truth);
        for (r, h) in c.hits_at_rank.iter().enumerate() {
            assert!((h - (r + 1) as f64 / nt as f64).abs() < 0.05);
        }
        assert!(c.hits_at_rank.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*c.hits_at_rank.last().unwrap(), 1.0);
    }

    #[test]
    fn random_baseline_near_chance() {
        let acc = random_assignment_accuracy(&[0, 1, 2, 3, 4], 5, 3);
        assert!((acc - 0.2).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn normalized_rank_endpoints() {
        assert_eq!(normalized_rank(1, 20), 0.0);
        assert_eq!(normalized_rank(20, 20), 1.0);
    }

    #[test]
    fn bins_cover_ratios() {
        let row = |ratio: f64, accuracy: f64| CompletenessRow { scene: "s".into(), subset: vec![], ratio, accuracy };
        let b = bin_ratios(&[row(1.0 / 6.0, 0.5), row(1.0, 1.0), row(0.8, 0.0), row(0.5, 1.0)]);
        assert_eq!(b.iter().map(|r| r.count).collect::<Vec<_>>(), vec![1, 0, 1, 0, 2]);
        assert_eq!(b[4].mean_accuracy, Some(0.5));
        assert_eq!(b[1].mean_accuracy, None);
    }

    #[test]
    fn short_lengths_are_skipped() {
        let c = CorrConfig::default();
        assert!(length_feasible(5, 100, &c).is_err());
        assert!(length_feasible(200, 100, &c).is_err());
        assert!(length_feasible(50, 100, &c).is_ok());
        let tight = CorrConfig { max_lag: Some(30), ..c };
        assert!(length_feasible(40, 100, &tight).is_err());
    }

    #[test]
    fn method_labels_serialize() {
        assert_eq!(serde_json::to_string(&Method::Free).unwrap(), "\"baseline_free\"");
        assert_eq!(serde_json::to_string(&Method::Score).unwrap(), "\"matching_score\"");
        assert_eq!(serde_json::to_string(&Init::Median).unwrap(), "\"median\"");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cmc_monotone_and_complete(ranks in prop::collection::vec(1usize..=8, 1..40)) {
                let c = CmcCurve::from_ranks(&ranks, 8);
                prop_assert!(c.hits_at_rank.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(*c.hits_at_rank.last().unwrap(), 1.0);
            }

            #[test]
            fn accuracy_in_unit_interval(x in prop::collection::vec(0usize..6, 1..6), t in prop::collection::vec(0usize..6, 6)) {
                let truth = &t[..x.len()];
                let a = assignment_accuracy(&HardAssignment { n_top: 6, assignment: x.clone() }, truth);
                prop_assert!((0.0..=1.0).contains(&a));
            }

            #[test]
            fn pessimistic_rank_bounds(v in prop::collection::vec(0.0f64..1.0, 1..10), pick in 0usize..10) {
                let t = pick % v.len();
                let r = pessimistic_rank(&v, t);
                let strictly_better = v.iter().filter(|&&x| x > v[t]).count();
                prop_assert!(r > strictly_better && r <= v.len());
            }
        }
    }
}
