//! Pairwise spatial relations and per-frame scene graphs.
//!
//! Two detections are related by comparing their boxes' intersection over
//! union and center distance normalized by the larger diagonal:
//!
//! 1. `iou >= 0.5`                    -> above/below (stacked);
//! 2. `iou < 0.5` and `l < 0.5`       -> above/below (resting against);
//! 3. `iou < 0.5` and `0.5 <= l < 1`  -> nearby;
//! 4. `l >= 1`                        -> unrelated.
//!
//! A graph has one node per detection and one edge per related pair. For
//! above/below edges the side closer to the camera is recorded as `top` when
//! it can be told apart: the simulator reports per-detection visibility, and
//! the less occluded side of a stacked pair is the one on top. Graphs from
//! successive frames are aligned greedily by class and center distance.

use crate::geom::PixelBox;
use crate::scalar::Real;
use crate::world::Observation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Default matching radius for frame-to-frame node alignment, in pixels.
pub const ALIGN_RADIUS: f64 = 64.0;

/// Relation classes between two boxes; unrelated pairs get no edge at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AboveBelow,
    Nearby,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("degenerate (zero-area) box")]
    DegenerateBox,
}

/// Intersection over union of two boxes. Exact: integer areas divide once.
pub fn iou<T: Real>(a: &PixelBox, b: &PixelBox) -> Result<T, GraphError> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(GraphError::DegenerateBox);
    }
    let inter = a.overlap_area(b);
    let union = a.area() + b.area() - inter;
    Ok(T::of(inter as f64) / T::of(union as f64))
}

/// Center distance normalized by the larger diagonal.
pub fn norm_distance<T: Real>(a: &PixelBox, b: &PixelBox) -> Result<T, GraphError> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(GraphError::DegenerateBox);
    }
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let d = (ax - bx).hypot(ay - by);
    Ok(T::of(d) / T::of(a.diagonal().max(b.diagonal())))
}

/// Apply the relation rule table to precomputed `iou` and normalized distance.
pub fn classify_relation<T: Real>(iou: T, l: T) -> Option<Relation> {
    let half = T::of(0.5);
    if iou >= half {
        Some(Relation::AboveBelow)
    } else if l < half {
        Some(Relation::AboveBelow)
    } else if l < T::one() {
        Some(Relation::Nearby)
    } else {
        None
    }
}

/// Relation between two boxes, or `None` when unrelated.
pub fn relate_boxes<T: Real>(a: &PixelBox, b: &PixelBox) -> Result<Option<Relation>, GraphError> {
    Ok(classify_relation(iou::<T>(a, b)?, norm_distance::<T>(a, b)?))
}

/// Graph node: a detection's identity and visible box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: u32,
    #[serde(rename = "class")]
    pub class_id: u8,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    #[serde(skip)]
    pub visibility: f64,
}

/// Undirected edge between nodes `a < b`. For above/below edges, `top` names
/// the node inferred to be closer to the camera (absent when the two sides
/// are equally visible).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: u32,
    pub b: u32,
    pub rel: Relation,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top: Option<u32>,
}

/// Scene graph of a single frame. Serializes as one JSON object (one line per
/// frame in graph logs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub timestep: u32,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl SceneGraph {
    pub fn node(&self, id: u32) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node degree, counting edges at either endpoint.
    pub fn degree(&self, id: u32) -> usize {
        self.edges.iter().filter(|e| e.a == id || e.b == id).count()
    }

    /// Adjacency list over node ids.
    pub fn adjacency(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut adj: BTreeMap<u32, Vec<u32>> = self.nodes.iter().map(|n| (n.id, vec![])).collect();
        for e in &self.edges {
            adj.get_mut(&e.a).unwrap().push(e.b);
            adj.get_mut(&e.b).unwrap().push(e.a);
        }
        adj
    }
}

/// Build the scene graph of one observation: a node per detection and an edge
/// per related pair, relations computed on visible boxes.
pub fn build_graph(obs: &Observation) -> SceneGraph {
    let nodes: Vec<GraphNode> = obs
        .detections
        .iter()
        .map(|d| GraphNode {
            id: d.id,
            class_id: d.class_id,
            bbox: d.visible_box,
            visibility: d.visibility,
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (a, b) = (&nodes[i], &nodes[j]);
            // Detected boxes have at least one visible cell, so the relation
            // computation cannot hit the degenerate-box error.
            let rel = relate_boxes::<f64>(&a.bbox, &b.bbox).expect("visible boxes are non-empty");
            let Some(rel) = rel else { continue };
            let top = match rel {
                Relation::AboveBelow => {
                    // The side left more visible is the one on top; equal
                    // visibility leaves the direction undecidable.
                    if a.visibility > b.visibility {
                        Some(a.id)
                    } else if b.visibility > a.visibility {
                        Some(b.id)
                    } else {
                        None
                    }
                }
                Relation::Nearby => None,
            };
            edges.push(GraphEdge { a: a.id, b: b.id, rel, top });
        }
    }
    SceneGraph { timestep: obs.timestep, nodes, edges }
}

/// The most connected node: maximum degree, ties broken by smallest id.
/// `None` only for an empty graph.
pub fn key_node(graph: &SceneGraph) -> Option<u32> {
    graph
        .nodes
        .iter()
        .map(|n| n.id)
        .max_by_key(|&id| (graph.degree(id), std::cmp::Reverse(id)))
}

/// Node correspondence between two frames.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// `(previous id, current id)` pairs, sorted by previous id.
    pub pairs: Vec<(u32, u32)>,
    /// Previous-frame nodes with no match.
    pub removed: Vec<u32>,
    /// Current-frame nodes with no match.
    pub added: Vec<u32>,
}

impl Alignment {
    pub fn matched(&self, prev_id: u32) -> Option<u32> {
        self.pairs.iter().find(|(p, _)| *p == prev_id).map(|(_, c)| *c)
    }
}

/// Greedily match nodes of consecutive frames: same class only, nearest
/// centers first, nothing beyond `radius`, each node used at most once.
pub fn align(prev: &SceneGraph, cur: &SceneGraph, radius: f64) -> Alignment {
    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for p in &prev.nodes {
        for c in &cur.nodes {
            if p.class_id != c.class_id {
                continue;
            }
            let (px, py) = p.bbox.center();
            let (cx, cy) = c.bbox.center();
            let d = (px - cx).hypot(py - cy);
            if d <= radius {
                candidates.push((d, p.id, c.id));
            }
        }
    }
    // Distance, then ids: fully deterministic greedy order.
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut used_prev = BTreeSet::new();
    let mut used_cur = BTreeSet::new();
    let mut pairs = Vec::new();
    for (_, p, c) in candidates {
        if used_prev.contains(&p) || used_cur.contains(&c) {
            continue;
        }
        used_prev.insert(p);
        used_cur.insert(c);
        pairs.push((p, c));
    }
    pairs.sort_unstable();
    let removed =
        prev.nodes.iter().map(|n| n.id).filter(|id| !used_prev.contains(id)).collect();
    let added = cur.nodes.iter().map(|n| n.id).filter(|id| !used_cur.contains(id)).collect();
    Alignment { pairs, removed, added }
}

/// Graph sequence of an episode with frame-to-frame alignments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DynamicSceneGraph {
    pub frames: Vec<SceneGraph>,
    /// `alignments[i]` maps `frames[i]` onto `frames[i + 1]`.
    pub alignments: Vec<Alignment>,
}

impl DynamicSceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a frame, aligning it with the previous one.
    pub fn push_frame(&mut self, graph: SceneGraph) {
        if let Some(prev) = self.frames.last() {
            self.alignments.push(align(prev, &graph, ALIGN_RADIUS));
        }
        self.frames.push(graph);
    }

    pub fn final_graph(&self) -> Option<&SceneGraph> {
        self.frames.last()
    }
}
