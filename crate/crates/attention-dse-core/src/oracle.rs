//! Deterministic synthetic ground truth for (IPC, Power, Area).
//!
//! Stands in for a cycle-accurate simulator plus power/area model. The model
//! is built so that bottleneck analysis has real structure to find:
//!
//! * Parameters are split into three resource groups by pipeline stage:
//!   frontend (Fetch, Decode, BranchPred), backend (Rename, Dispatch, Issue,
//!   Execute, Commit), and memory (Memory, Cache).
//! * Each group has a utilization `u = (Σ w_p·lvl_p + Σ w_ab·lvl_a·lvl_b) / W`
//!   over its parameters' normalized levels, including interaction terms
//!   between stage-adjacent parameter pairs, and a saturating rate
//!   `rate = cap · (0.25 + u) / (1 + u)`.
//! * `IPC = min(rate_frontend, rate_backend, rate_memory) · (1 + α·lvl_freq)`.
//! * `Power = (base_p + Σ (a_p·lvl_p + b_p·lvl_p^1.8)) · (1 + lvl_freq)^γ`.
//! * `Area = base_a + Σ c_p·lvl_p` (frequency-independent).
//!
//! `lvl_p ∈ [0, 1]` is the candidate value normalized over the parameter's
//! range; the per-parameter coefficients `w, a, b, c` are drawn once from a
//! seeded generator, so an oracle is a pure function of (space, config).
//! Workloads differ in their group capacities (which group tends to bind) and
//! frequency sensitivity.

use crate::design_space::{DesignPoint, DesignSpace, Stage};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ground-truth metrics for one design point. IPC is maximized; power and
/// area are minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub ipc: f64,
    pub power: f64,
    pub area: f64,
}

impl ObjectiveVector {
    pub fn to_array(self) -> [f64; 3] {
        [self.ipc, self.power, self.area]
    }
}

/// Resource group a parameter feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceGroup {
    Frontend,
    Backend,
    Memory,
}

impl ResourceGroup {
    pub const ALL: [ResourceGroup; 3] =
        [ResourceGroup::Frontend, ResourceGroup::Backend, ResourceGroup::Memory];

    pub fn of_stage(stage: Stage) -> ResourceGroup {
        match stage {
            Stage::Fetch | Stage::Decode | Stage::BranchPred => ResourceGroup::Frontend,
            Stage::Rename | Stage::Dispatch | Stage::Issue | Stage::Execute | Stage::Commit => {
                ResourceGroup::Backend
            }
            Stage::Memory | Stage::Cache => ResourceGroup::Memory,
        }
    }
}

/// Named synthetic workload: seed for coefficient generation plus the group
/// capacities (the workload mix) and frequency sensitivities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleConfig {
    pub name: String,
    pub seed: u64,
    pub caps: GroupCaps,
    /// IPC frequency sensitivity: factor `1 + frequency_alpha * lvl_freq`.
    pub frequency_alpha: f64,
    /// Power frequency exponent: factor `(1 + lvl_freq)^power_frequency_exp`.
    pub power_frequency_exp: f64,
    pub power_base: f64,
    pub area_base: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupCaps {
    pub frontend: f64,
    pub backend: f64,
    pub memory: f64,
}

impl GroupCaps {
    fn get(&self, g: ResourceGroup) -> f64 {
        match g {
            ResourceGroup::Frontend => self.frontend,
            ResourceGroup::Backend => self.backend,
            ResourceGroup::Memory => self.memory,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("failed to parse oracle config: {0}")]
    Parse(String),
    #[error("oracle config `{0}`: {1}")]
    Invalid(String, &'static str),
}

pub fn parse_oracle_config(text: &str) -> Result<OracleConfig, OracleError> {
    let cfg: OracleConfig = toml::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m| Err(OracleError::Invalid(self.name.clone(), m));
        if !(self.caps.frontend > 0.0 && self.caps.backend > 0.0 && self.caps.memory > 0.0) {
            return bad("group capacities must be positive");
        }
        if self.frequency_alpha < 0.0 {
            return bad("frequency_alpha must be non-negative");
        }
        if self.power_base <= 0.0 || self.area_base <= 0.0 {
            return bad("power_base and area_base must be positive");
        }
        Ok(())
    }
}

struct ParamCoeffs {
    group: ResourceGroup,
    /// Throughput weight within the group (zero for the frequency parameter).
    w: f64,
    /// Power: linear and superlinear coefficients.
    a: f64,
    b: f64,
    /// Area: linear coefficient.
    c: f64,
}

/// The name by which the frequency parameter is recognized; it scales IPC and
/// power globally instead of feeding a resource group.
pub const FREQUENCY_PARAM: &str = "CoreFrequency";

/// A bound oracle: config coefficients materialized against a concrete space.
pub struct Oracle {
    space: DesignSpace,
    cfg: OracleConfig,
    coeffs: Vec<ParamCoeffs>,
    /// Stage-adjacent parameter pairs with interaction weights, per group.
    interactions: Vec<(usize, usize, f64)>,
    /// Σw (+ interaction weights) per group, for utilization normalization.
    group_norm: [f64; 3],
    freq_pos: Option<usize>,
}

impl Oracle {
    pub fn new(space: &DesignSpace, cfg: &OracleConfig) -> Result<Self, OracleError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let freq_pos = space.position_of(FREQUENCY_PARAM);
        let mut coeffs = Vec::with_capacity(space.param_count());
        for (i, p) in space.params().iter().enumerate() {
            // Four draws per parameter, always consumed, so coefficients stay
            // stable under frequency special-casing.
            let w = rng.gen_range(0.5..1.5);
            let a = rng.gen_range(0.2..1.0);
            let b = rng.gen_range(0.1..0.6);
            let c = rng.gen_range(0.2..1.0);
            let is_freq = Some(i) == freq_pos;
            coeffs.push(ParamCoeffs {
                group: ResourceGroup::of_stage(p.stage),
                w: if is_freq { 0.0 } else { w },
                a: if is_freq { 0.0 } else { a },
                b: if is_freq { 0.0 } else { b },
                c: if is_freq { 0.0 } else { c },
            });
        }
        // Interactions between consecutive same-stage parameters (the
        // window-adjacent pairs the serialization clusters together).
        let mut interactions = Vec::new();
        for i in 1..space.param_count() {
            if space.param(i).stage == space.param(i - 1).stage
                && Some(i) != freq_pos
                && Some(i - 1) != freq_pos
            {
                interactions.push((i - 1, i, rng.gen_range(0.2..0.5)));
            }
        }
        let mut group_norm = [0.0f64; 3];
        for cf in &coeffs {
            group_norm[cf.group as usize] += cf.w;
        }
        for &(i, _, w) in &interactions {
            group_norm[coeffs[i].group as usize] += w;
        }
        for g in &mut group_norm {
            if *g == 0.0 {
                *g = 1.0;
            }
        }
        Ok(Oracle {
            space: space.clone(),
            cfg: cfg.clone(),
            coeffs,
            interactions,
            group_norm,
            freq_pos,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    fn freq_level(&self, point: &DesignPoint) -> f64 {
        self.freq_pos
            .map(|i| self.space.param(i).level(point.values[i]))
            .unwrap_or(0.0)
    }

    /// Per-group saturating rates for a point.
    pub fn group_rates(&self, point: &DesignPoint) -> [f64; 3] {
        let mut util = [0.0f64; 3];
        for (i, cf) in self.coeffs.iter().enumerate() {
            util[cf.group as usize] += cf.w * self.space.param(i).level(point.values[i]);
        }
        for &(i, j, w) in &self.interactions {
            let la = self.space.param(i).level(point.values[i]);
            let lb = self.space.param(j).level(point.values[j]);
            util[self.coeffs[i].group as usize] += w * la * lb;
        }
        let mut rates = [0.0f64; 3];
        for g in ResourceGroup::ALL {
            let u = util[g as usize] / self.group_norm[g as usize];
            rates[g as usize] = self.cfg.caps.get(g) * (0.25 + u) / (1.0 + u);
        }
        rates
    }

    /// The group attaining the minimum rate (the current bottleneck).
    pub fn binding_group(&self, point: &DesignPoint) -> ResourceGroup {
        let rates = self.group_rates(point);
        let mut best = ResourceGroup::Frontend;
        for g in ResourceGroup::ALL {
            if rates[g as usize] < rates[best as usize] {
                best = g;
            }
        }
        best
    }

    /// Ground-truth PPA. Pure and deterministic.
    pub fn evaluate(&self, point: &DesignPoint) -> ObjectiveVector {
        debug_assert!(self.space.validate_point(point).is_ok());
        let rates = self.group_rates(point);
        let min_rate = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let lf = self.freq_level(point);
        let ipc = min_rate * (1.0 + self.cfg.frequency_alpha * lf);

        let mut dynamic = 0.0;
        for (i, cf) in self.coeffs.iter().enumerate() {
            let lvl = self.space.param(i).level(point.values[i]);
            dynamic += cf.a * lvl + cf.b * lvl.powf(1.8);
        }
        let power = (self.cfg.power_base + dynamic) * (1.0 + lf).powf(self.cfg.power_frequency_exp);

        let mut area = self.cfg.area_base;
        for (i, cf) in self.coeffs.iter().enumerate() {
            area += cf.c * self.space.param(i).level(point.values[i]);
        }

        ObjectiveVector { ipc, power, area }
    }
}

/// Oracle wrapper that counts invocations and enforces an evaluation budget.
pub struct CountingOracle<'a> {
    oracle: &'a Oracle,
    calls: std::cell::Cell<u64>,
    budget: u64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(oracle: &'a Oracle, budget: u64) -> Self {
        CountingOracle {
            oracle,
            calls: std::cell::Cell::new(0),
            budget,
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.calls.get()
    }

    /// Evaluate if budget remains; `None` once the budget is exhausted.
    pub fn try_evaluate(&self, point: &DesignPoint) -> Option<ObjectiveVector> {
        if self.calls.get() >= self.budget {
            return None;
        }
        self.calls.set(self.calls.get() + 1);
        Some(self.oracle.evaluate(point))
    }
}
