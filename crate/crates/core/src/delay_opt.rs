//! Joint estimation of per-video time delays and the assignment.
//!
//! Delays are integer frame offsets of each egocentric video relative to
//! the top-view clock: egocentric frame `f` is paired with top-view frame
//! `f + t[i]`. The search is steepest ascent over single-coordinate moves of
//! one step, scored either by the leading eigenvalue of the fixed-delay
//! affinity or by the matching score of the assignment it induces.

use serde::{Deserialize, Serialize};

use crate::correlation::CorrConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, ViewGraph};
use crate::matching::{
    hungarian, matching_score, power_iteration, soft_assignment, AffinityMatrix, CorrelationBank, HardAssignment,
    SoftAssignment, SpectralConfig,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayVector {
    pub delays: Vec<i64>,
    pub step_frames: i64,
}

impl DelayVector {
    pub fn new(delays: Vec<i64>, step_frames: i64) -> Self {
        assert!(step_frames >= 1, "step must be at least one frame");
        Self { delays, step_frames }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Spectral,
    MatchingScore,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub itr_max: usize,
    pub epsilon: f64,
    pub objective: Objective,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { itr_max: 100, epsilon: 1e-6, objective: Objective::Spectral }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.itr_max == 0 || !(self.epsilon >= 0.0) {
            return Err(Error::InvalidInput("itr_max must be at least 1 and epsilon non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LocalMax,
    ItrMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub delays: Vec<i64>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// Step 0 is the initialization; one further step per accepted move.
    pub steps: Vec<TraceStep>,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub delays: DelayVector,
    pub affinity: AffinityMatrix,
    pub lambda: f64,
    pub soft: SoftAssignment,
    pub hard: HardAssignment,
    pub score: f64,
    pub trace: OptimizationTrace,
}

pub fn init_delays_zero(n_ego: usize) -> DelayVector {
    DelayVector::new(vec![0; n_ego], 1)
}

fn lower_median(mut v: Vec<i64>) -> i64 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

fn round_to_step(d: i64, step: i64) -> i64 {
    (d as f64 / step as f64).round() as i64 * step
}

/// Lower median of the delays suggested by every node and edge correlation
/// involving each egocentric node, rounded to the step grid.
pub fn init_delays_median(bank: &CorrelationBank, step_frames: i64) -> DelayVector {
    let lag = bank.lag();
    let delays = (0..bank.n_ego())
        .map(|a| {
            let s = bank.delay_suggestions(a);
            if s.is_empty() {
                return 0;
            }
            let d = round_to_step(lower_median(s), step_frames);
            // stay on the step grid inside the lag window
            let bound = lag / step_frames * step_frames;
            d.clamp(-bound, bound)
        })
        .collect();
    DelayVector::new(delays, step_frames)
}

/// [`init_delays_median`] on a freshly built bank.
pub fn init_delays_median_graphs(ego: &ViewGraph, top: &ViewGraph, fcfg: &FeatureConfig, ccfg: &CorrConfig) -> Result<DelayVector> {
    Ok(init_delays_median(&CorrelationBank::new(ego, top, fcfg, ccfg)?, 1))
}

struct Evaluation {
    lambda: f64,
    soft: SoftAssignment,
    hard: HardAssignment,
    score: f64,
}

fn evaluate(a: &AffinityMatrix, scfg: &SpectralConfig) -> Result<Evaluation> {
    let e = power_iteration(&a.data, scfg)?;
    let soft = soft_assignment(&e.vector, a.n_ego, a.n_top);
    let hard = hungarian(&soft)?;
    let score = matching_score(a, &hard);
    Ok(Evaluation { lambda: e.lambda, soft, hard, score })
}

fn objective(a: &AffinityMatrix, obj: Objective, scfg: &SpectralConfig) -> Result<f64> {
    match obj {
        Objective::Spectral => Ok(power_iteration(&a.data, scfg)?.lambda),
        Objective::MatchingScore => Ok(evaluate(a, scfg)?.score),
    }
}

/// Steepest ascent from `t0` with the objective of `ocfg`.
///
/// Every iteration scores all in-bounds moves of one coordinate by one step
/// and takes the best one if it improves by more than `epsilon`; ties go to
/// the lowest coordinate, then the negative direction.
pub fn optimize(
    bank: &CorrelationBank,
    t0: &DelayVector,
    ocfg: &OptimizerConfig,
    scfg: &SpectralConfig,
) -> Result<OptimizationResult> {
    ocfg.validate()?;
    let ne = bank.n_ego();
    if t0.len() != ne {
        return Err(Error::DimensionMismatch { expected: ne, got: t0.len() });
    }
    let lag = bank.lag();
    if let Some(&d) = t0.delays.iter().find(|d| d.abs() > lag) {
        return Err(Error::InvalidInput(format!("initial delay {d} exceeds the lag window {lag}")));
    }
    let step = t0.step_frames;
    let mut t = t0.delays.clone();
    let mut current = bank.affinity_fixed(&t)?;
    let mut value = objective(&current, ocfg.objective, scfg)?;
    let mut steps = vec![TraceStep { iteration: 0, delays: t.clone(), objective: value }];
    let mut termination = Termination::ItrMax;
    let mut iterations = 0;

    while iterations < ocfg.itr_max {
        iterations += 1;
        let mut best: Option<(f64, usize, i64, AffinityMatrix)> = None;
        for i in 0..ne {
            for dir in [-1i64, 1] {
                let cand = t[i] + dir * step;
                if cand.abs() > lag {
                    continue;
                }
                let mut tc = t.clone();
                tc[i] = cand;
                let mut a = current.clone();
                bank.update_fixed(&mut a, &tc, i)?;
                let v = match objective(&a, ocfg.objective, scfg) {
                    Ok(v) => v,
                    Err(Error::ZeroMatrix) => 0.0,
                    Err(e) => return Err(e),
                };
                if best.as_ref().map_or(true, |b| v > b.0) {
                    best = Some((v, i, cand, a));
                }
            }
        }
        match best {
            Some((v, i, cand, a)) if v > value + ocfg.epsilon => {
                t[i] = cand;
                current = a;
                value = v;
                steps.push(TraceStep { iteration: iterations, delays: t.clone(), objective: v });
            }
            _ => {
                termination = Termination::LocalMax;
                break;
            }
        }
    }

    let ev = evaluate(&current, scfg)?;
    Ok(OptimizationResult {
        delays: DelayVector::new(t, step),
        affinity: current,
        lambda: ev.lambda,
        soft: ev.soft,
        hard: ev.hard,
        score: ev.score,
        trace: OptimizationTrace { steps, iterations, termination },
    })
}

/// Delay search scored by the leading eigenvalue.
pub fn optimize_spectral(
    bank: &CorrelationBank,
    t0: &DelayVector,
    ocfg: &OptimizerConfig,
    scfg: &SpectralConfig,
) -> Result<OptimizationResult> {
    optimize(bank, t0, &OptimizerConfig { objective: Objective::Spectral, ..*ocfg }, scfg)
}

/// Delay search scored by the matching score of the rounded assignment.
pub fn optimize_matching_score(
    bank: &CorrelationBank,
    t0: &DelayVector,
    ocfg: &OptimizerConfig,
    scfg: &SpectralConfig,
) -> Result<OptimizationResult> {
    optimize(bank, t0, &OptimizerConfig { objective: Objective::MatchingScore, ..*ocfg }, scfg)
}

/// Leading eigenvalue of the fixed-delay affinity; 0 for an all-zero matrix.
pub fn lambda_at(bank: &CorrelationBank, t: &[i64], scfg: &SpectralConfig) -> Result<f64> {
    let a = bank.affinity_fixed(t)?;
    match power_iteration(&a.data, scfg) {
        Ok(e) => Ok(e.lambda),
        Err(Error::ZeroMatrix) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_ego_graph, build_top_graph, EgoVideo};
    use crate::geometry::{GeometryConfig, Trajectory};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bank(seed: u64, ne: usize, nt: usize, frames: usize, lag: usize) -> CorrelationBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs: Vec<Trajectory> = (0..nt)
            .map(|k| {
                let w = 0.05 + 0.03 * k as f64;
                let pos = (0..frames).map(|f| [k as f64 + (w * f as f64).cos(), (w * f as f64).sin()]).collect();
                Trajectory::new(format!("v{k}"), pos, 10.0).unwrap()
            })
            .collect();
        let vids: Vec<EgoVideo> = (0..ne)
            .map(|i| EgoVideo {
                video_id: format!("e{i}"),
                frame_rate: 10.0,
                descriptors: (0..frames).map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect()).collect(),
                counts: (0..frames).map(|_| rng.gen_range(0..3) as f64).collect(),
            })
            .collect();
        let fc = FeatureConfig::default();
        let geo = GeometryConfig { grid_resolution_m: 0.25, ..GeometryConfig::default() };
        let top = build_top_graph(&trajs, &geo, &fc).unwrap();
        let ego = build_ego_graph(&vids, &fc).unwrap();
        CorrelationBank::new(&ego, &top, &fc, &CorrConfig { max_lag: Some(lag), ..CorrConfig::default() }).unwrap()
    }

    #[test]
    fn zero_init() {
        assert_eq!(init_delays_zero(3).delays, vec![0, 0, 0]);
        assert_eq!(init_delays_zero(1).delays, vec![0]);
        for n in 0..6 {
            assert_eq!(init_delays_zero(n).len(), n);
        }
    }

    #[test]
    fn lower_median_even_and_odd() {
        assert_eq!(lower_median(vec![3, 1, 2]), 2);
        assert_eq!(lower_median(vec![4, 1, 3, 2]), 2);
        assert_eq!(lower_median(vec![-5]), -5);
    }

    #[test]
    fn median_single_pair_is_node_argmax() {
        let b = bank(1, 1, 1, 30, 6);
        let s = b.delay_suggestions(0);
        assert_eq!(s.len(), 1);
        assert_eq!(init_delays_median(&b, 1).delays, s);
    }

    #[test]
    fn traces_monotone_and_bounded() {
        for (seed, obj) in [(2, Objective::Spectral), (3, Objective::MatchingScore)] {
            let b = bank(seed, 2, 3, 24, 4);
            let ocfg = OptimizerConfig { objective: obj, itr_max: 5, ..OptimizerConfig::default() };
            let r = optimize(&b, &init_delays_zero(2), &ocfg, &SpectralConfig::default()).unwrap();
            assert!(r.trace.iterations <= 5);
            for w in r.trace.steps.windows(2) {
                assert!(w[1].objective > w[0].objective);
            }
            assert!(r.delays.delays.iter().all(|d| d.abs() <= 4));
            if r.trace.termination == Termination::LocalMax {
                assert_eq!(r.trace.steps.len(), r.trace.iterations);
            }
        }
    }

    #[test]
    fn local_max_start_stays_put() {
        let b = bank(4, 2, 3, 24, 4);
        let scfg = SpectralConfig::default();
        let first = optimize_spectral(&b, &init_delays_zero(2), &OptimizerConfig::default(), &scfg).unwrap();
        assert_eq!(first.trace.termination, Termination::LocalMax);
        let again = optimize_spectral(&b, &first.delays, &OptimizerConfig::default(), &scfg).unwrap();
        assert_eq!(again.trace.iterations, 1);
        assert_eq!(again.delays, first.delays);
        assert_eq!(again.trace.steps.len(), 1);
    }

    #[test]
    fn single_video_score_is_matched_diagonal() {
        let b = bank(5, 1, 3, 30, 5);
        let r = optimize_matching_score(&b, &init_delays_zero(1), &OptimizerConfig::default(), &SpectralConfig::default())
            .unwrap();
        let k = r.hard.assignment[0];
        assert_eq!(r.score, r.affinity.entry(0, k, 0, k));
        // one coordinate: the result is a local maximum of the 1D scan
        let d = r.delays.delays[0];
        let score_at = |d: i64| {
            let a = b.affinity_fixed(&[d]).unwrap();
            evaluate(&a, &SpectralConfig::default()).unwrap().score
        };
        for n in [d - 1, d + 1] {
            if n.abs() <= 5 {
                assert!(score_at(n) <= r.score + 1e-6);
            }
        }
    }

    #[test]
    fn deterministic() {
        let b = bank(6, 2, 3, 24, 4);
        let run = || {
            optimize_matching_score(&b, &init_delays_zero(2), &OptimizerConfig::default(), &SpectralConfig::default())
                .unwrap()
        };
        let (x, y) = (run(), run());
        assert_eq!(x.trace, y.trace);
        assert_eq!(x.hard, y.hard);
    }

    #[test]
    fn rejects_out_of_window_start() {
        let b = bank(7, 1, 2, 20, 3);
        let r = optimize_spectral(&b, &DelayVector::new(vec![4], 1), &OptimizerConfig::default(), &SpectralConfig::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn trace_serializes() {
        let t = OptimizationTrace {
            steps: vec![TraceStep { iteration: 0, delays: vec![1, -2], objective: 0.5 }],
            iterations: 1,
            termination: Termination::LocalMax,
        };
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"local_max\""));
        assert_eq!(serde_json::from_str::<OptimizationTrace>(&s).unwrap(), t);
    }
}
