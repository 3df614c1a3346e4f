//! Perceptual graphs over micro-architectural parameters and the
//! perception-driven serialization that orders them for the attention model.
//!
//! Vertices are parameters; edges are datapaths. An edge whose endpoints sit in
//! the same pipeline stage is *internal*, one that crosses stages is *external*.
//! The perception degree of a parameter is its internal-edge count minus its
//! external-edge count. Within a stage, parameters are ordered by repeatedly
//! inserting the next-highest-degree parameter at the middle of the sequence;
//! stages are then concatenated in pipeline order. The attention window size is
//! the maximum (non-negative) perception degree rounded up to an odd number,
//! with a floor of 3.

use crate::design_space::{DesignSpace, Stage};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Internal,
    External,
}

/// Whole-design graph fixture as stored on disk: every parameter with its
/// stage, plus labeled undirected edges.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFixture {
    pub vertices: Vec<FixtureVertex>,
    #[serde(default)]
    pub edges: Vec<FixtureEdge>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureVertex {
    pub name: String,
    pub stage: Stage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureEdge {
    pub a: String,
    pub b: String,
    pub label: EdgeKind,
}

/// The per-stage view used by perception-degree computation: vertices of one
/// stage, internal edges between them, and external edges with exactly one
/// endpoint inside the stage (stored with the inside endpoint first).
#[derive(Clone, Debug)]
pub struct PerceptualGraph {
    pub stage: Stage,
    pub vertices: Vec<String>,
    pub internal_edges: Vec<(String, String)>,
    pub external_edges: Vec<(String, String)>,
}

/// Output of perception-driven serialization over the whole space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerializationOrder {
    /// Permutation of space parameter positions: `order[i]` is the space
    /// position of the parameter at sequence slot `i`.
    pub order: Vec<usize>,
    /// Odd window width for sliding-window attention, >= 3.
    pub window_size: usize,
    /// Perception degree per space parameter position.
    pub degrees: Vec<i64>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to parse graph fixture: {0}")]
    Parse(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("edge endpoint `{0}` is not a declared vertex")]
    UnknownEndpoint(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge `{a}`-`{b}` labeled {label:?} but stages say otherwise")]
    LabelMismatch {
        a: String,
        b: String,
        label: EdgeKind,
    },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("parameter `{0}` missing from every perceptual graph")]
    MissingParameter(String),
    #[error("parameter `{0}` appears in more than one perceptual graph")]
    DuplicateParameter(String),
    #[error("graph vertex `{0}` is not a design-space parameter")]
    ExtraVertex(String),
    #[error("stage {0:?} present in graphs but absent from stage order")]
    StageNotInOrder(Stage),
    #[error("empty graph")]
    EmptyGraph,
}

pub fn parse_graph_fixture(text: &str) -> Result<GraphFixture, GraphError> {
    let fx: GraphFixture = toml::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
    fx.validate()?;
    Ok(fx)
}

impl GraphFixture {
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut stages: HashMap<&str, Stage> = HashMap::new();
        for v in &self.vertices {
            if stages.insert(&v.name, v.stage).is_some() {
                return Err(GraphError::DuplicateVertex(v.name.clone()));
            }
        }
        for e in &self.edges {
            if e.a == e.b {
                return Err(GraphError::SelfLoop(e.a.clone()));
            }
            let sa = *stages
                .get(e.a.as_str())
                .ok_or_else(|| GraphError::UnknownEndpoint(e.a.clone()))?;
            let sb = *stages
                .get(e.b.as_str())
                .ok_or_else(|| GraphError::UnknownEndpoint(e.b.clone()))?;
            let expected = if sa == sb {
                EdgeKind::Internal
            } else {
                EdgeKind::External
            };
            if e.label != expected {
                return Err(GraphError::LabelMismatch {
                    a: e.a.clone(),
                    b: e.b.clone(),
                    label: e.label,
                });
            }
        }
        Ok(())
    }

    /// Stages that have at least one vertex, in first-seen order.
    pub fn stages(&self) -> Vec<Stage> {
        let mut out = Vec::new();
        for v in &self.vertices {
            if !out.contains(&v.stage) {
                out.push(v.stage);
            }
        }
        out
    }

    /// The per-stage perceptual graph for `stage`.
    pub fn stage_graph(&self, stage: Stage) -> PerceptualGraph {
        let stage_of: HashMap<&str, Stage> =
            self.vertices.iter().map(|v| (v.name.as_str(), v.stage)).collect();
        let vertices: Vec<String> = self
            .vertices
            .iter()
            .filter(|v| v.stage == stage)
            .map(|v| v.name.clone())
            .collect();
        let mut internal = Vec::new();
        let mut external = Vec::new();
        for e in &self.edges {
            let a_in = stage_of[e.a.as_str()] == stage;
            let b_in = stage_of[e.b.as_str()] == stage;
            match (a_in, b_in) {
                (true, true) => internal.push((e.a.clone(), e.b.clone())),
                (true, false) => external.push((e.a.clone(), e.b.clone())),
                (false, true) => external.push((e.b.clone(), e.a.clone())),
                (false, false) => {}
            }
        }
        PerceptualGraph {
            stage,
            vertices,
            internal_edges: internal,
            external_edges: external,
        }
    }

    pub fn stage_graphs(&self) -> Vec<PerceptualGraph> {
        self.stages().into_iter().map(|s| self.stage_graph(s)).collect()
    }
}

/// Perception degree of `v`: incident internal edges minus incident external
/// edges. Can be negative for boundary-heavy parameters.
pub fn perception_degree(g: &PerceptualGraph, v: &str) -> Result<i64, GraphError> {
    if !g.vertices.iter().any(|x| x == v) {
        return Err(GraphError::UnknownVertex(v.to_string()));
    }
    let internal = g
        .internal_edges
        .iter()
        .filter(|(a, b)| a == v || b == v)
        .count() as i64;
    let external = g.external_edges.iter().filter(|(a, _)| a == v).count() as i64;
    Ok(internal - external)
}

/// Order the parameters of one stage: process in descending perception degree
/// (ties broken by name), inserting each at position `len/2` of the sequence
/// built so far, so high-degree parameters end up in the middle.
pub fn serialize_stage(g: &PerceptualGraph) -> Result<Vec<String>, GraphError> {
    if g.vertices.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut ranked: Vec<(String, i64)> = g
        .vertices
        .iter()
        .map(|v| Ok((v.clone(), perception_degree(g, v)?)))
        .collect::<Result<_, GraphError>>()?;
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut seq: Vec<String> = Vec::with_capacity(ranked.len());
    for (name, _) in ranked {
        let pos = seq.len() / 2;
        seq.insert(pos, name);
    }
    Ok(seq)
}

/// Combine per-stage serializations in pipeline order and derive the attention
/// window size from the maximum non-negative perception degree.
pub fn serialize_space(
    space: &DesignSpace,
    graphs: &[PerceptualGraph],
    stage_order: &[Stage],
) -> Result<SerializationOrder, GraphError> {
    // Each parameter must appear in exactly one graph; no strays.
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (gi, g) in graphs.iter().enumerate() {
        for v in &g.vertices {
            if space.position_of(v).is_none() {
                return Err(GraphError::ExtraVertex(v.clone()));
            }
            if owner.insert(v.as_str(), gi).is_some() {
                return Err(GraphError::DuplicateParameter(v.clone()));
            }
        }
    }
    for p in space.params() {
        if !owner.contains_key(p.name.as_str()) {
            return Err(GraphError::MissingParameter(p.name.clone()));
        }
    }
    for g in graphs {
        if !g.vertices.is_empty() && !stage_order.contains(&g.stage) {
            return Err(GraphError::StageNotInOrder(g.stage));
        }
    }

    let mut degrees = vec![0i64; space.param_count()];
    for g in graphs {
        for v in &g.vertices {
            degrees[space.position_of(v).unwrap()] = perception_degree(g, v)?;
        }
    }

    let mut order = Vec::with_capacity(space.param_count());
    for &stage in stage_order {
        for g in graphs.iter().filter(|g| g.stage == stage && !g.vertices.is_empty()) {
            for name in serialize_stage(g)? {
                order.push(space.position_of(&name).unwrap());
            }
        }
    }

    let max_degree = degrees.iter().copied().map(|d| d.max(0)).max().unwrap_or(0) as usize;
    let window_size = round_up_to_odd(max_degree).max(3);

    Ok(SerializationOrder {
        order,
        window_size,
        degrees,
    })
}

fn round_up_to_odd(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n + 1
    }
}
