//! The micro-architectural parameter grid and concrete design points.
//!
//! A design space is an ordered list of parameters, each with a finite list of
//! candidate values (expanded from `start:end:stride` grid specs or given as an
//! explicit list). A design point stores one candidate index per parameter;
//! everything downstream (serialization, the surrogate, the oracle) works on
//! indices and only resolves concrete values when it needs them.

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pipeline-stage label for a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Fetch,
    Decode,
    Rename,
    Dispatch,
    Issue,
    Execute,
    Memory,
    Commit,
    Cache,
    BranchPred,
}

impl Stage {
    /// All stages in default pipeline order, used when combining per-stage
    /// serializations into the full parameter sequence.
    pub const PIPELINE_ORDER: [Stage; 10] = [
        Stage::Fetch,
        Stage::BranchPred,
        Stage::Decode,
        Stage::Rename,
        Stage::Dispatch,
        Stage::Issue,
        Stage::Execute,
        Stage::Memory,
        Stage::Cache,
        Stage::Commit,
    ];
}

/// One candidate value of a parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidate {
    Int(i64),
    Real(f64),
    Label(String),
}

impl Candidate {
    /// Numeric view of the candidate. Categorical labels map to their list
    /// index, which carries no ordinal meaning beyond the encoding itself.
    pub fn as_f64(&self, index_in_list: usize) -> f64 {
        match self {
            Candidate::Int(v) => *v as f64,
            Candidate::Real(v) => *v,
            Candidate::Label(_) => index_in_list as f64,
        }
    }
}

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Candidate::Int(v) => write!(f, "{v}"),
            Candidate::Real(v) => write!(f, "{v}"),
            Candidate::Label(s) => write!(f, "{s}"),
        }
    }
}

/// One micro-architectural parameter and its candidate values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub stage: Stage,
    pub candidates: Vec<Candidate>,
}

impl ParameterSpec {
    pub fn cardinality(&self) -> usize {
        self.candidates.len()
    }

    /// Candidate value at `idx` as f64 (labels map to their index).
    pub fn value_f64(&self, idx: usize) -> f64 {
        self.candidates[idx].as_f64(idx)
    }

    /// Candidate value at `idx` normalized to [0, 1] over the candidate range.
    /// Single-candidate parameters normalize to 0.
    pub fn level(&self, idx: usize) -> f64 {
        let n = self.candidates.len();
        if n <= 1 {
            return 0.0;
        }
        let lo = self.value_f64(0);
        let hi = self.value_f64(n - 1);
        if (hi - lo).abs() < f64::EPSILON {
            return 0.0;
        }
        (self.value_f64(idx) - lo) / (hi - lo)
    }
}

/// The full parameter grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignSpace {
    params: Vec<ParameterSpec>,
}

/// One concrete configuration: a candidate index per parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignPoint {
    pub values: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum DesignSpaceError {
    #[error("failed to parse design-space config: {0}")]
    Parse(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("parameter `{0}` has no candidate values")]
    EmptyCandidates(String),
    #[error("parameter `{name}`: malformed grid `{spec}`: {reason}")]
    MalformedGrid {
        name: String,
        spec: String,
        reason: String,
    },
    #[error("parameter `{0}`: numeric candidates must be strictly increasing")]
    UnorderedCandidates(String),
    #[error("design point has {got} values but the space has {want} parameters")]
    PointLength { got: usize, want: usize },
    #[error("parameter `{name}` index {idx} out of range (cardinality {card})")]
    IndexOutOfRange {
        name: String,
        idx: usize,
        card: usize,
    },
    #[error("parameter position {0} out of range")]
    BadParameterPosition(usize),
}

// ---- config file schema ----

#[derive(Deserialize)]
struct RawConfig {
    parameters: Vec<RawParameter>,
}

#[derive(Deserialize)]
struct RawParameter {
    name: String,
    stage: Stage,
    values: RawValues,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValues {
    Grid(String),
    List(Vec<Candidate>),
}

fn expand_grid(name: &str, spec: &str) -> Result<Vec<Candidate>, DesignSpaceError> {
    let err = |reason: &str| DesignSpaceError::MalformedGrid {
        name: name.to_string(),
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(err("expected start:end:stride"));
    }
    let parse = |s: &str| s.trim().parse::<i64>().map_err(|_| err("non-integer field"));
    let start = parse(parts[0])?;
    let end = parse(parts[1])?;
    let stride = parse(parts[2])?;
    if stride <= 0 {
        return Err(err("stride must be positive"));
    }
    if start > end {
        return Err(err("start exceeds end"));
    }
    let mut out = Vec::new();
    let mut v = start;
    while v <= end {
        out.push(Candidate::Int(v));
        v += stride;
    }
    Ok(out)
}

/// Parse a design-space config (TOML, `parameters` array; each entry has
/// `name`, `stage`, and `values` given either as a `"start:end:stride"` grid
/// string or an explicit list).
pub fn parse_design_space(config_text: &str) -> Result<DesignSpace, DesignSpaceError> {
    let raw: RawConfig =
        toml::from_str(config_text).map_err(|e| DesignSpaceError::Parse(e.to_string()))?;
    let mut params = Vec::with_capacity(raw.parameters.len());
    for rp in raw.parameters {
        let candidates = match rp.values {
            RawValues::Grid(spec) => expand_grid(&rp.name, &spec)?,
            RawValues::List(list) => list,
        };
        params.push(ParameterSpec {
            name: rp.name,
            stage: rp.stage,
            candidates,
        });
    }
    DesignSpace::new(params)
}

impl DesignSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self, DesignSpaceError> {
        let mut seen = std::collections::HashSet::new();
        for p in &params {
            if !seen.insert(p.name.clone()) {
                return Err(DesignSpaceError::DuplicateParameter(p.name.clone()));
            }
            if p.candidates.is_empty() {
                return Err(DesignSpaceError::EmptyCandidates(p.name.clone()));
            }
            let numeric: Vec<f64> = match p
                .candidates
                .iter()
                .enumerate()
                .map(|(i, c)| match c {
                    Candidate::Label(_) => None,
                    _ => Some(c.as_f64(i)),
                })
                .collect::<Option<Vec<_>>>()
            {
                Some(v) => v,
                None => continue, // categorical list; order is positional
            };
            if numeric.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DesignSpaceError::UnorderedCandidates(p.name.clone()));
            }
        }
        Ok(DesignSpace { params })
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, pos: usize) -> &ParameterSpec {
        &self.params[pos]
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Exact number of design points in the grid.
    pub fn total_size(&self) -> BigUint {
        self.params
            .iter()
            .fold(BigUint::from(1u32), |acc, p| acc * p.cardinality())
    }

    /// Per-parameter cardinalities, in parameter order.
    pub fn cardinalities(&self) -> Vec<usize> {
        self.params.iter().map(|p| p.cardinality()).collect()
    }

    pub fn validate_point(&self, p: &DesignPoint) -> Result<(), DesignSpaceError> {
        if p.values.len() != self.params.len() {
            return Err(DesignSpaceError::PointLength {
                got: p.values.len(),
                want: self.params.len(),
            });
        }
        for (spec, &idx) in self.params.iter().zip(&p.values) {
            if idx >= spec.cardinality() {
                return Err(DesignSpaceError::IndexOutOfRange {
                    name: spec.name.clone(),
                    idx,
                    card: spec.cardinality(),
                });
            }
        }
        Ok(())
    }

    /// Mixed-radix rank of a point within the grid. Inverse of [`Self::decode`].
    pub fn encode(&self, p: &DesignPoint) -> Result<BigUint, DesignSpaceError> {
        self.validate_point(p)?;
        let mut rank = BigUint::from(0u32);
        for (spec, &idx) in self.params.iter().zip(&p.values) {
            rank = rank * spec.cardinality() + idx;
        }
        Ok(rank)
    }

    /// Point with the given mixed-radix rank. Inverse of [`Self::encode`].
    pub fn decode(&self, rank: &BigUint) -> DesignPoint {
        let mut values = vec![0usize; self.params.len()];
        let mut rest = rank.clone();
        for (i, spec) in self.params.iter().enumerate().rev() {
            let card = BigUint::from(spec.cardinality());
            let digit = &rest % &card;
            values[i] = digit.to_u64_digits().first().copied().unwrap_or(0) as usize;
            rest /= card;
        }
        DesignPoint { values }
    }

    /// Enumerate every point in the grid. Intended for small test spaces;
    /// panics if the space exceeds `limit` points.
    pub fn enumerate_all(&self, limit: usize) -> Vec<DesignPoint> {
        let total = self.total_size();
        assert!(
            total <= BigUint::from(limit),
            "space too large to enumerate ({total} > {limit})"
        );
        let n = total.to_u64_digits().first().copied().unwrap_or(0) as usize;
        (0..n).map(|r| self.decode(&BigUint::from(r))).collect()
    }
}

/// Draw `n` design points, each index uniform and independent per parameter.
/// Deterministic for a fixed seed. Duplicates are allowed; `n = 0` is fine.
pub fn random_sample(space: &DesignSpace, n: usize, seed: u64) -> Vec<DesignPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| DesignPoint {
            values: space
                .params
                .iter()
                .map(|p| rng.gen_range(0..p.cardinality()))
                .collect(),
        })
        .collect()
}

/// Outcome of [`step_parameter`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepResult {
    pub point: DesignPoint,
    /// True when the move was clamped at the candidate-list boundary and the
    /// point is returned unchanged.
    pub at_boundary: bool,
}

/// Move one parameter a single position along its candidate list, clamped at
/// the boundaries. `direction` is +1 or -1.
pub fn step_parameter(
    space: &DesignSpace,
    p: &DesignPoint,
    pos: usize,
    direction: i32,
) -> Result<StepResult, DesignSpaceError> {
    space.validate_point(p)?;
    if pos >= space.param_count() {
        return Err(DesignSpaceError::BadParameterPosition(pos));
    }
    let card = space.params[pos].cardinality();
    let cur = p.values[pos];
    let next = if direction >= 0 {
        if cur + 1 >= card {
            return Ok(StepResult {
                point: p.clone(),
                at_boundary: true,
            });
        }
        cur + 1
    } else {
        if cur == 0 {
            return Ok(StepResult {
                point: p.clone(),
                at_boundary: true,
            });
        }
        cur - 1
    };
    let mut out = p.clone();
    out.values[pos] = next;
    Ok(StepResult {
        point: out,
        at_boundary: false,
    })
}
