//! Bottleneck-driven exploration loop and the random-search baseline.
//!
//! Each iteration inspects the attention heatmap of every current
//! Pareto-candidate design, ranks parameters by attention column sum for each
//! configured objective, and steps the best-ranked parameter whose neighbour
//! is still unvisited one grid notch: up for IPC (the starved resource gets
//! more), down for power and area (the most-attended resource gets cheaper).
//! Stepped candidates whose predicted objectives are not dominated by the
//! current candidate front are verified against the oracle, which is the only
//! place the evaluation budget is spent.

use crate::design_space::{random_sample, step_parameter, DesignPoint, DesignSpace};
use crate::oracle::{CountingOracle, ObjectiveVector, Oracle};
use crate::pareto::{
    default_reference, dominates, hypervolume, Direction, ParetoSet, ReferencePoint,
};
use crate::surrogate::{AttentionHeatmap, SurrogateModel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Ipc,
    Power,
    Area,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Ipc, Objective::Power, Objective::Area];

    pub fn direction(self) -> Direction {
        match self {
            Objective::Ipc => Direction::Maximize,
            Objective::Power | Objective::Area => Direction::Minimize,
        }
    }

    pub fn value(self, o: &ObjectiveVector) -> f64 {
        match self {
            Objective::Ipc => o.ipc,
            Objective::Power => o.power,
            Objective::Area => o.area,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ipc => "ipc",
            Objective::Power => "power",
            Objective::Area => "area",
        }
    }

    fn index(self) -> usize {
        match self {
            Objective::Ipc => 0,
            Objective::Power => 1,
            Objective::Area => 2,
        }
    }
}

pub fn orientation_of(objectives: &[Objective]) -> Vec<Direction> {
    objectives.iter().map(|o| o.direction()).collect()
}

pub fn select_objectives(objectives: &[Objective], o: &ObjectiveVector) -> Vec<f64> {
    objectives.iter().map(|obj| obj.value(o)).collect()
}

/// Predicted objectives plus one heatmap per objective, indexed
/// IPC / power / area.
pub struct Prediction {
    pub objectives: ObjectiveVector,
    pub heatmaps: [AttentionHeatmap; 3],
}

pub trait Predictor {
    fn predict(&self, point: &DesignPoint) -> Prediction;
}

/// Oracle-backed stand-in for a trained predictor. Objectives are exact; the
/// heatmaps are synthesized so that the column-sum rule recovers the truly
/// best single-parameter step: every row carries the same per-parameter
/// weight, scaled from one-step oracle improvements.
pub struct PerfectPredictor<'a> {
    oracle: &'a Oracle,
}

impl<'a> PerfectPredictor<'a> {
    pub fn new(oracle: &'a Oracle) -> Self {
        PerfectPredictor { oracle }
    }

    /// Heatmap whose column sums order parameters by `gain` (larger gain,
    /// larger column when `pick_max`, smaller column otherwise).
    fn synth_heatmap(&self, gains: &[f64], pick_max: bool) -> AttentionHeatmap {
        let n = gains.len() + 1;
        let scale = gains.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
        let mut row = vec![1e-3];
        for &g in gains {
            let s = if pick_max { g / scale } else { -g / scale };
            row.push(s.exp());
        }
        let z: f64 = row.iter().sum();
        let mut weights = crate::tensor::Tensor::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                weights.data[i * n + j] = row[j] / z;
            }
        }
        AttentionHeatmap {
            weights,
            order: (0..gains.len()).collect(),
        }
    }
}

impl<'a> Predictor for PerfectPredictor<'a> {
    fn predict(&self, point: &DesignPoint) -> Prediction {
        let space = self.oracle.space();
        let base = self.oracle.evaluate(point);
        let n = space.param_count();
        // gain per parameter: objective improvement of a single step in that
        // objective's preferred direction (0 at the grid boundary).
        let mut ipc_gain = vec![0.0; n];
        let mut power_gain = vec![0.0; n];
        let mut area_gain = vec![0.0; n];
        for i in 0..n {
            let up = step_parameter(space, point, i, 1).expect("valid step");
            if up.point != *point {
                ipc_gain[i] = self.oracle.evaluate(&up.point).ipc - base.ipc;
            }
            let down = step_parameter(space, point, i, -1).expect("valid step");
            if down.point != *point {
                let o = self.oracle.evaluate(&down.point);
                power_gain[i] = base.power - o.power;
                area_gain[i] = base.area - o.area;
            }
        }
        Prediction {
            objectives: base,
            heatmaps: [
                // IPC rule takes the argmin column, so invert the ordering.
                self.synth_heatmap(&ipc_gain, false),
                self.synth_heatmap(&power_gain, true),
                self.synth_heatmap(&area_gain, true),
            ],
        }
    }
}

/// Trained-model predictor: one single-target model per objective.
pub struct SurrogatePredictor<'a> {
    space: &'a DesignSpace,
    models: [&'a SurrogateModel; 3],
}

impl<'a> SurrogatePredictor<'a> {
    /// Models in IPC / power / area order.
    pub fn new(space: &'a DesignSpace, models: [&'a SurrogateModel; 3]) -> Self {
        SurrogatePredictor { space, models }
    }
}

impl<'a> Predictor for SurrogatePredictor<'a> {
    fn predict(&self, point: &DesignPoint) -> Prediction {
        let mut vals = [0.0; 3];
        let mut heats = Vec::with_capacity(3);
        for (i, m) in self.models.iter().enumerate() {
            let (v, h) = m
                .predict_with_heatmap(self.space, point)
                .expect("predictor and space agree on parameter count");
            vals[i] = v;
            heats.push(h);
        }
        let [ipc_h, power_h, area_h]: [AttentionHeatmap; 3] =
            heats.try_into().expect("three heatmaps");
        Prediction {
            objectives: ObjectiveVector {
                ipc: vals[0],
                power: vals[1],
                area: vals[2],
            },
            heatmaps: [ipc_h, power_h, area_h],
        }
    }
}

/// All parameters ranked by the heatmap step rule, most promising first:
/// for IPC ascending attention column sum (grow the starved resource),
/// for power/area descending (shrink the most-attended one). Ties keep
/// parameter-position order.
pub fn bottleneck_ranking(heatmap: &AttentionHeatmap, objective: Objective) -> Vec<(usize, i8)> {
    let scores = heatmap.column_scores();
    assert!(!scores.is_empty());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let dir: i8 = match objective {
        Objective::Ipc => {
            idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            1
        }
        Objective::Power | Objective::Area => {
            idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            -1
        }
    };
    idx.into_iter().map(|i| (i, dir)).collect()
}

/// The top-ranked heatmap step: for IPC the parameter with the smallest
/// attention column sum grows; for power/area the largest shrinks.
pub fn bottleneck_step(heatmap: &AttentionHeatmap, objective: Objective) -> (usize, i8) {
    bottleneck_ranking(heatmap, objective)[0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplorationConfig {
    /// Random starting designs, oracle-evaluated before the loop.
    pub initial_samples: usize,
    /// Explicit starting designs, evaluated before the random ones.
    pub seed_points: Vec<DesignPoint>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Objectives under optimization; each candidate front member is
    /// analyzed for every objective in every iteration.
    pub objectives: Vec<Objective>,
    /// When an iteration proposes nothing new, draw one random unvisited
    /// design instead of terminating.
    pub inject_on_stall: bool,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            initial_samples: 20,
            seed_points: Vec::new(),
            max_iterations: 100,
            seed: 0,
            objectives: Objective::ALL.to_vec(),
            inject_on_stall: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Candidates proposed by the step rule (before dominance screening).
    pub proposed: usize,
    /// Candidates that survived screening and were oracle-verified.
    pub accepted: usize,
    /// (parameter position, direction) of each accepted step.
    pub accepted_steps: Vec<(usize, i8)>,
    pub accepted_points: Vec<DesignPoint>,
    pub injected: bool,
    /// Cumulative oracle calls after this iteration.
    pub oracle_calls: u64,
    /// Hypervolume of the oracle-verified archive after this iteration.
    pub hypervolume: f64,
}

#[derive(Clone, Debug)]
pub struct ExplorationTrace {
    pub objectives: Vec<Objective>,
    pub reference: ReferencePoint,
    /// Oracle calls spent on the initial designs.
    pub initial_calls: u64,
    /// Archive hypervolume right after initial sampling.
    pub initial_hypervolume: f64,
    pub iterations: Vec<IterationRecord>,
    /// Oracle-verified non-dominated designs.
    pub archive: ParetoSet<DesignPoint>,
    pub oracle_calls: u64,
}

impl ExplorationTrace {
    pub fn final_hypervolume(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_hypervolume, |r| r.hypervolume)
    }

    /// Oracle calls needed to first reach `frac` of the final hypervolume.
    pub fn calls_to_phv_fraction(&self, frac: f64) -> Option<u64> {
        let target = frac * self.final_hypervolume();
        if self.initial_hypervolume >= target {
            return Some(self.initial_calls);
        }
        self.iterations
            .iter()
            .find(|r| r.hypervolume >= target)
            .map(|r| r.oracle_calls)
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("no objectives configured")]
    NoObjectives,
    #[error("no initial designs (seed_points empty and initial_samples = 0)")]
    NoInitialPoints,
    #[error("oracle budget exhausted before any initial design was evaluated")]
    BudgetTooSmall,
    #[error(transparent)]
    DesignSpace(#[from] crate::design_space::DesignSpaceError),
    #[error(transparent)]
    Pareto(#[from] crate::pareto::ParetoError),
}

/// Archive hypervolume, counting only members that dominate the reference.
fn archive_hypervolume(
    archive: &ParetoSet<DesignPoint>,
    reference: &ReferencePoint,
) -> Result<f64, crate::pareto::ParetoError> {
    let orientation = archive.orientation().to_vec();
    let cref = crate::pareto::canonicalize(&reference.values, &orientation);
    let mut inside = ParetoSet::new(&orientation);
    for (p, o) in archive.members() {
        let c = crate::pareto::canonicalize(o, &orientation);
        if c.iter().zip(&cref).all(|(x, r)| x <= r) {
            inside.insert(p.clone(), o.clone());
        }
    }
    hypervolume(&inside, reference)
}

struct InitState {
    visited: HashSet<Vec<usize>>,
    archive: ParetoSet<DesignPoint>,
    reference: ReferencePoint,
    initial_points: Vec<DesignPoint>,
    initial_hypervolume: f64,
}

fn evaluate_initial(
    space: &DesignSpace,
    oracle: &CountingOracle,
    cfg: &ExplorationConfig,
    orientation: &[Direction],
) -> Result<InitState, ExploreError> {
    let mut points = cfg.seed_points.clone();
    points.extend(random_sample(space, cfg.initial_samples, cfg.seed));
    if points.is_empty() {
        return Err(ExploreError::NoInitialPoints);
    }
    let mut visited = HashSet::new();
    let mut archive = ParetoSet::new(orientation);
    let mut truths = Vec::new();
    let mut initial_points = Vec::new();
    for p in points {
        if !visited.insert(p.values.clone()) {
            continue;
        }
        let Some(t) = oracle.try_evaluate(&p) else {
            break;
        };
        let sel = select_objectives(&cfg.objectives, &t);
        archive.insert(p.clone(), sel.clone());
        truths.push(sel);
        initial_points.push(p);
    }
    if truths.is_empty() {
        return Err(ExploreError::BudgetTooSmall);
    }
    let reference = default_reference(&truths, orientation);
    let initial_hypervolume = archive_hypervolume(&archive, &reference)?;
    Ok(InitState {
        visited,
        archive,
        reference,
        initial_points,
        initial_hypervolume,
    })
}

fn draw_unvisited(
    space: &DesignSpace,
    visited: &HashSet<Vec<usize>>,
    rng: &mut ChaCha8Rng,
) -> Option<DesignPoint> {
    for _ in 0..1000 {
        let p = DesignPoint {
            values: space
                .params()
                .iter()
                .map(|s| rng.gen_range(0..s.cardinality()))
                .collect(),
        };
        if !visited.contains(&p.values) {
            return Some(p);
        }
    }
    None
}

/// Random designs injected per stalled iteration, keeping the loop's
/// per-iteration throughput comparable to its guided phase.
const STALL_BATCH: usize = 8;

/// The attention-guided exploration loop.
pub fn explore<P: Predictor>(
    space: &DesignSpace,
    oracle: &CountingOracle,
    predictor: &P,
    cfg: &ExplorationConfig,
) -> Result<ExplorationTrace, ExploreError> {
    if cfg.objectives.is_empty() {
        return Err(ExploreError::NoObjectives);
    }
    let orientation = orientation_of(&cfg.objectives);
    let mut st = evaluate_initial(space, oracle, cfg, &orientation)?;

    // Candidate front over predicted objectives, with cached predictions.
    let mut omega: ParetoSet<DesignPoint> = ParetoSet::new(&orientation);
    let mut cache: HashMap<Vec<usize>, Prediction> = HashMap::new();
    for p in &st.initial_points {
        let pred = predictor.predict(p);
        let sel = select_objectives(&cfg.objectives, &pred.objectives);
        omega.insert(p.clone(), sel);
        cache.insert(p.values.clone(), pred);
    }

    let mut stall_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED));
    let mut iterations = Vec::new();
    let mut budget_out = false;

    'outer: for t in 0..cfg.max_iterations {
        if oracle.remaining() == 0 {
            break;
        }
        let mut proposals: Vec<(DesignPoint, usize, i8)> = Vec::new();
        let mut seen_this_iter: HashSet<Vec<usize>> = HashSet::new();
        for (point, _) in omega.members().to_vec() {
            let pred = &cache[&point.values];
            for &objective in &cfg.objectives {
                let (param, dir) = bottleneck_step(&pred.heatmaps[objective.index()], objective);
                let step = step_parameter(space, &point, param, dir as i32)?;
                if step.point == point
                    || st.visited.contains(&step.point.values)
                    || !seen_this_iter.insert(step.point.values.clone())
                {
                    continue;
                }
                proposals.push((step.point, param, dir));
            }
        }

        let mut injected = false;
        if proposals.is_empty() {
            if !cfg.inject_on_stall {
                break;
            }
            while proposals.len() < STALL_BATCH {
                match draw_unvisited(space, &st.visited, &mut stall_rng) {
                    Some(p) => {
                        injected = true;
                        st.visited.insert(p.values.clone());
                        proposals.push((p, 0, 0));
                    }
                    None => break, // space exhausted
                }
            }
            if proposals.is_empty() {
                break;
            }
        }

        let proposed = proposals.len();
        let mut accepted = 0;
        let mut accepted_steps = Vec::new();
        let mut accepted_points = Vec::new();
        for (q, param, dir) in proposals {
            st.visited.insert(q.values.clone());
            let pred = predictor.predict(&q);
            let sel = select_objectives(&cfg.objectives, &pred.objectives);
            let dominated = omega
                .members()
                .iter()
                .any(|(_, o)| dominates(o, &sel, &orientation).unwrap());
            // injected designs are diversification, verify them regardless
            if dominated && !injected {
                cache.insert(q.values.clone(), pred);
                continue;
            }
            let Some(truth) = oracle.try_evaluate(&q) else {
                budget_out = true;
                break;
            };
            st.archive
                .insert(q.clone(), select_objectives(&cfg.objectives, &truth));
            omega.insert(q.clone(), sel);
            cache.insert(q.values.clone(), pred);
            accepted += 1;
            accepted_steps.push((param, dir));
            accepted_points.push(q);
        }

        iterations.push(IterationRecord {
            iteration: t,
            proposed,
            accepted,
            accepted_steps,
            accepted_points,
            injected,
            oracle_calls: oracle.calls(),
            hypervolume: archive_hypervolume(&st.archive, &st.reference)?,
        });
        if budget_out {
            break 'outer;
        }
    }

    Ok(ExplorationTrace {
        objectives: cfg.objectives.clone(),
        reference: st.reference,
        initial_calls: st.initial_points.len() as u64,
        initial_hypervolume: st.initial_hypervolume,
        iterations,
        archive: st.archive,
        oracle_calls: oracle.calls(),
    })
}

/// Baseline: same initialization and budget, one uniformly random unvisited
/// design per iteration.
pub fn random_search(
    space: &DesignSpace,
    oracle: &CountingOracle,
    cfg: &ExplorationConfig,
) -> Result<ExplorationTrace, ExploreError> {
    if cfg.objectives.is_empty() {
        return Err(ExploreError::NoObjectives);
    }
    let orientation = orientation_of(&cfg.objectives);
    let mut st = evaluate_initial(space, oracle, cfg, &orientation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xBA5E));
    let mut iterations = Vec::new();

    for t in 0..cfg.max_iterations {
        if oracle.remaining() == 0 {
            break;
        }
        let Some(q) = draw_unvisited(space, &st.visited, &mut rng) else {
            break;
        };
        st.visited.insert(q.values.clone());
        let Some(truth) = oracle.try_evaluate(&q) else {
            break;
        };
        st.archive
            .insert(q.clone(), select_objectives(&cfg.objectives, &truth));
        iterations.push(IterationRecord {
            iteration: t,
            proposed: 1,
            accepted: 1,
            accepted_steps: vec![(0, 0)],
            accepted_points: vec![q],
            injected: true,
            oracle_calls: oracle.calls(),
            hypervolume: archive_hypervolume(&st.archive, &st.reference)?,
        });
    }

    Ok(ExplorationTrace {
        objectives: cfg.objectives.clone(),
        reference: st.reference,
        initial_calls: st.initial_points.len() as u64,
        initial_hypervolume: st.initial_hypervolume,
        iterations,
        archive: st.archive,
        oracle_calls: oracle.calls(),
    })
}

/// Exhaustive true Pareto front of a small space (panics past `limit`
/// enumerated designs, mirroring `DesignSpace::enumerate_all`).
pub fn true_front(
    space: &DesignSpace,
    oracle: &Oracle,
    objectives: &[Objective],
    limit: usize,
) -> ParetoSet<DesignPoint> {
    let orientation = orientation_of(objectives);
    let mut front = ParetoSet::new(&orientation);
    for p in space.enumerate_all(limit) {
        let o = oracle.evaluate(&p);
        front.insert(p, select_objectives(objectives, &o));
    }
    front
}
