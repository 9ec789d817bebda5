//! Questions and answers over scene graphs.
//!
//! Three templates over a 20-class vocabulary:
//!
//! - existence: `Is there a {A} in the bin?`
//! - counting:  `How many {A}s are there in the bin?`
//! - spatial:   `Is the {A} {above|below|near} the {B}?`
//!
//! `above` and `below` are the two readings of a single stacked relation; the
//! queried direction is resolved against the edge's `top` annotation. Answers
//! come from the final frame's graph alone: existence by breadth-first search
//! from the key node (covering every component), counting by a class census
//! clamped to the instance cap, spatial by looking for a witnessing edge. An
//! empty graph answers No or 0.

use crate::graph::{key_node, Relation, SceneGraph};
use crate::{MAX_INSTANCES, N_CLASSES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Object class names; `class_id` indexes this table.
pub const CLASS_NAMES: [&str; N_CLASSES] = [
    "ball", "book", "bottle", "bowl", "calculator", "can", "card", "clock", "cup", "fork",
    "hammer", "key", "keyboard", "marker", "mug", "notebook", "pen", "ruler", "spoon", "stapler",
];

/// Class id for a vocabulary name.
pub fn class_id_of(name: &str) -> Option<u8> {
    CLASS_NAMES.iter().position(|&n| n == name).map(|i| i as u8)
}

pub fn class_name(class_id: u8) -> &'static str {
    CLASS_NAMES[class_id as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Existence,
    Counting,
    Spatial,
}

/// Queried spatial reading. `Above`/`Below` are directions of the stacked
/// relation; `Near` maps to [`Relation::Nearby`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialRel {
    Above,
    Below,
    Near,
}

impl SpatialRel {
    pub fn word(self) -> &'static str {
        match self {
            SpatialRel::Above => "above",
            SpatialRel::Below => "below",
            SpatialRel::Near => "near",
        }
    }

    /// The graph relation this reading witnesses.
    pub fn relation(self) -> Relation {
        match self {
            SpatialRel::Above | SpatialRel::Below => Relation::AboveBelow,
            SpatialRel::Near => Relation::Nearby,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Question {
    pub qtype: QuestionType,
    pub class_a: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class_b: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relation: Option<SpatialRel>,
}

impl Question {
    pub fn existence(class_a: u8) -> Self {
        Question { qtype: QuestionType::Existence, class_a, class_b: None, relation: None }
    }

    pub fn counting(class_a: u8) -> Self {
        Question { qtype: QuestionType::Counting, class_a, class_b: None, relation: None }
    }

    pub fn spatial(class_a: u8, rel: SpatialRel, class_b: u8) -> Self {
        Question {
            qtype: QuestionType::Spatial,
            class_a,
            class_b: Some(class_b),
            relation: Some(rel),
        }
    }

    /// Render the canonical question text.
    pub fn text(&self) -> String {
        let a = class_name(self.class_a);
        match self.qtype {
            QuestionType::Existence => format!("Is there a {a} in the bin?"),
            QuestionType::Counting => format!("How many {a}s are there in the bin?"),
            QuestionType::Spatial => {
                let b = class_name(self.class_b.expect("spatial question without class_b"));
                let rel = self.relation.expect("spatial question without relation").word();
                format!("Is the {a} {rel} the {b}?")
            }
        }
    }
}

/// Answer vocabulary: yes/no for existence and spatial questions, a count in
/// `[0, 3]` for counting questions. Serializes as `"yes"`, `"no"`, or the
/// bare number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
    Count(u8),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => write!(f, "yes"),
            Answer::No => write!(f, "no"),
            Answer::Count(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Answer::Yes => s.serialize_str("yes"),
            Answer::No => s.serialize_str("no"),
            Answer::Count(n) => s.serialize_u8(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(u8),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "yes" => Ok(Answer::Yes),
            Raw::Text(t) if t == "no" => Ok(Answer::No),
            Raw::Text(t) => Err(D::Error::custom(format!("unknown answer {t:?}"))),
            Raw::Number(n) if (n as usize) <= MAX_INSTANCES => Ok(Answer::Count(n)),
            Raw::Number(n) => Err(D::Error::custom(format!("count {n} out of range"))),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("text matches no question template: {0:?}")]
    BadTemplate(String),
    #[error("unknown object class {0:?}")]
    UnknownClass(String),
}

/// Parse canonical question text back into a [`Question`].
pub fn parse_question(text: &str) -> Result<Question, ParseError> {
    let bad = || ParseError::BadTemplate(text.to_string());
    let class = |name: &str| {
        class_id_of(name).ok_or_else(|| ParseError::UnknownClass(name.to_string()))
    };

    if let Some(rest) = text.strip_prefix("Is there a ") {
        let name = rest.strip_suffix(" in the bin?").ok_or_else(bad)?;
        return Ok(Question::existence(class(name)?));
    }
    if let Some(rest) = text.strip_prefix("How many ") {
        let plural = rest.strip_suffix(" are there in the bin?").ok_or_else(bad)?;
        let name = plural.strip_suffix('s').ok_or_else(bad)?;
        return Ok(Question::counting(class(name)?));
    }
    if let Some(rest) = text.strip_prefix("Is the ") {
        let body = rest.strip_suffix('?').ok_or_else(bad)?;
        for rel in [SpatialRel::Above, SpatialRel::Below, SpatialRel::Near] {
            let sep = format!(" {} the ", rel.word());
            if let Some((a, b)) = body.split_once(&sep) {
                return Ok(Question::spatial(class(a)?, rel, class(b)?));
            }
        }
        return Err(bad());
    }
    Err(bad())
}

/// Answer a question from the final scene graph.
pub fn answer(graph: &SceneGraph, question: &Question) -> Answer {
    match question.qtype {
        QuestionType::Existence => {
            if search_finds_class(graph, question.class_a) {
                Answer::Yes
            } else {
                Answer::No
            }
        }
        QuestionType::Counting => {
            let n = graph.nodes.iter().filter(|n| n.class_id == question.class_a).count();
            Answer::Count(n.min(MAX_INSTANCES) as u8)
        }
        QuestionType::Spatial => {
            let b = question.class_b.expect("spatial question without class_b");
            let rel = question.relation.expect("spatial question without relation");
            if spatial_witness(graph, question.class_a, rel, b) {
                Answer::Yes
            } else {
                Answer::No
            }
        }
    }
}

/// Breadth-first search for a class, starting at the key node and sweeping
/// every remaining component. Equivalent to a membership scan; kept as an
/// actual search so existence answering exercises the same traversal the
/// graph is built for.
fn search_finds_class(graph: &SceneGraph, class_a: u8) -> bool {
    let Some(start) = key_node(graph) else {
        return false; // empty graph
    };
    let adj = graph.adjacency();
    let mut visited: BTreeSet<u32> = BTreeSet::new();
    let mut roots = std::iter::once(start).chain(graph.nodes.iter().map(|n| n.id));
    let mut queue = std::collections::VecDeque::new();
    loop {
        // Seed the next unvisited component, key node first.
        match roots.find(|id| !visited.contains(id)) {
            Some(root) => {
                visited.insert(root);
                queue.push_back(root);
            }
            None => return false,
        }
        while let Some(id) = queue.pop_front() {
            if graph.node(id).map(|n| n.class_id) == Some(class_a) {
                return true;
            }
            for &next in &adj[&id] {
                if visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
}

/// True when some edge witnesses the queried relation between the classes,
/// with direction respected for above/below.
fn spatial_witness(graph: &SceneGraph, class_a: u8, rel: SpatialRel, class_b: u8) -> bool {
    graph.edges.iter().any(|e| {
        if e.rel != rel.relation() {
            return false;
        }
        let (ca, cb) = match (graph.node(e.a), graph.node(e.b)) {
            (Some(a), Some(b)) => (a.class_id, b.class_id),
            _ => return false,
        };
        match rel {
            SpatialRel::Near => {
                (ca == class_a && cb == class_b) || (cb == class_a && ca == class_b)
            }
            // "A above B": the class-a endpoint must be the top node.
            SpatialRel::Above => {
                (ca == class_a && cb == class_b && e.top == Some(e.a))
                    || (cb == class_a && ca == class_b && e.top == Some(e.b))
            }
            // "A below B": the class-b endpoint must be the top node.
            SpatialRel::Below => {
                (ca == class_a && cb == class_b && e.top == Some(e.b))
                    || (cb == class_a && ca == class_b && e.top == Some(e.a))
            }
        }
    })
}
