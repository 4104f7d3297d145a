//! Domain types for instantiated event graphs and the pure analyses over them.
//!
//! An [`InstantiatedGraph`] is the merged result of matching an extracted
//! instance graph against a hierarchical schema. Events form a forest
//! (`roots` plus each event's ordered `children`), temporal edges order
//! events within sibling groups, and gates put logical constraints on groups
//! of events hanging off a source event.

mod gates;
mod ranking;
mod temporal;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use gates::{check_gates, GateMode, GateStatus, Verdict};
pub use ranking::entity_occurrence_counts;
pub use temporal::{detect_temporal_cycles, group_topological_order, has_group_cycle};
pub use validate::validate_graph;

pub type EventId = String;
pub type EntityId = String;
pub type ProvenanceId = String;

/// Ontology type reference: a qnode identifier plus its readable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EventType {
    pub qnode: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventStatus {
    Matched,
    SourceOnly,
    Predicted,
}

impl EventStatus {
    /// Matched and source-only events count as having happened; predicted
    /// events are hypotheses.
    pub fn occurred(self) -> bool {
        !matches!(self, EventStatus::Predicted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub role: String,
    pub filler: EntityId,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub id: EventId,
    pub name: String,
    pub description: String,
    pub event_type: EventType,
    pub status: EventStatus,
    pub confidence: f64,
    /// Marks a complex event as finished; strict gate evaluation turns its
    /// pending gates into violations.
    #[serde(default, skip_serializing_if = "is_false")]
    pub terminal: bool,
    pub children: Vec<EventId>,
    pub arguments: Vec<Argument>,
    pub provenance: Vec<ProvenanceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_ref: Option<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl EventNode {
    pub fn is_parent(&self) -> bool {
        !self.children.is_empty()
    }

    /// Arguments sorted by their `order` rank.
    pub fn ordered_arguments(&self) -> Vec<&Argument> {
        let mut args: Vec<&Argument> = self.arguments.iter().collect();
        args.sort_by_key(|a| a.order);
        args
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: EntityId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wd_qnode: Option<String>,
    pub provenance: Vec<ProvenanceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub before: EventId,
    pub after: EventId,
}

impl TemporalEdge {
    pub fn new(before: impl Into<String>, after: impl Into<String>) -> Self {
        Self {
            before: before.into(),
            after: after.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Xor,
}

/// Whether a gate's members are hierarchy children or temporal successors
/// of the source event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatePlacement {
    Children,
    Successors,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub id: String,
    pub source: EventId,
    pub kind: GateKind,
    pub members: Vec<EventId>,
    pub placement: GatePlacement,
}

/// Grounding evidence: a character span in a document or a pixel box in an
/// image. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProvenanceRecord {
    Text {
        id: ProvenanceId,
        doc_id: String,
        start: usize,
        end: usize,
        text: String,
    },
    Image {
        id: ProvenanceId,
        image_id: String,
        bbox: BoundingBox,
    },
}

impl ProvenanceRecord {
    pub fn id(&self) -> &str {
        match self {
            ProvenanceRecord::Text { id, .. } | ProvenanceRecord::Image { id, .. } => id,
        }
    }
}

/// `[x, y, w, h]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<[i64; 4]> for BoundingBox {
    fn from([x, y, w, h]: [i64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BoundingBox> for [i64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub schema: String,
    pub instance: EventId,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstantiatedGraph {
    pub events: BTreeMap<EventId, EventNode>,
    pub entities: BTreeMap<EntityId, EntityNode>,
    pub temporal: BTreeSet<TemporalEdge>,
    pub gates: Vec<GateSpec>,
    pub roots: Vec<EventId>,
    pub match_pairs: Vec<MatchPair>,
    pub provenance: BTreeMap<ProvenanceId, ProvenanceRecord>,
}

/// One group of siblings: the children of `parent`, or the roots when
/// `parent` is `None`. Members are in stored order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiblingGroup<'a> {
    pub parent: Option<&'a str>,
    pub members: &'a [EventId],
}

impl InstantiatedGraph {
    pub fn event(&self, id: &str) -> Option<&EventNode> {
        self.events.get(id)
    }

    /// Child → parent map. When an event is listed by several parents (an
    /// invalid graph) the parent with the smallest id wins.
    pub fn parent_map(&self) -> HashMap<&str, &str> {
        let mut map = HashMap::new();
        for (pid, ev) in &self.events {
            for c in &ev.children {
                map.entry(c.as_str()).or_insert(pid.as_str());
            }
        }
        map
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.events
            .iter()
            .find(|(_, ev)| ev.children.iter().any(|c| c == id))
            .map(|(pid, _)| pid.as_str())
    }

    /// The root group followed by every parent's children, parents in id order.
    pub fn sibling_groups(&self) -> Vec<SiblingGroup<'_>> {
        let mut groups = vec![SiblingGroup {
            parent: None,
            members: &self.roots,
        }];
        for (id, ev) in &self.events {
            if !ev.children.is_empty() {
                groups.push(SiblingGroup {
                    parent: Some(id),
                    members: &ev.children,
                });
            }
        }
        groups
    }

    /// The sibling group that contains `id`, as (parent, members).
    pub fn group_of(&self, id: &str) -> Option<SiblingGroup<'_>> {
        if self.roots.iter().any(|r| r == id) {
            return Some(SiblingGroup {
                parent: None,
                members: &self.roots,
            });
        }
        let pid = self.parent_of(id)?;
        let (pid, parent) = self.events.get_key_value(pid)?;
        Some(SiblingGroup {
            parent: Some(pid),
            members: &parent.children,
        })
    }

    /// All descendants of `id` (not including `id`), depth-first preorder.
    pub fn descendants(&self, id: &str) -> Vec<EventId> {
        let mut out = Vec::new();
        let mut stack: Vec<&str> = match self.events.get(id) {
            Some(ev) => ev.children.iter().rev().map(String::as_str).collect(),
            None => return out,
        };
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur) {
                continue;
            }
            out.push(cur.to_string());
            if let Some(ev) = self.events.get(cur) {
                stack.extend(ev.children.iter().rev().map(String::as_str));
            }
        }
        out
    }

    /// Hierarchy depth of every event reachable from the roots (roots are 0).
    pub fn depths(&self) -> HashMap<&str, usize> {
        let mut depth = HashMap::new();
        let mut queue: std::collections::VecDeque<(&str, usize)> =
            self.roots.iter().map(|r| (r.as_str(), 0)).collect();
        while let Some((id, d)) = queue.pop_front() {
            if depth.contains_key(id) {
                continue;
            }
            depth.insert(id, d);
            if let Some(ev) = self.events.get(id) {
                for c in &ev.children {
                    queue.push_back((c.as_str(), d + 1));
                }
            }
        }
        depth
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn status_serializes_kebab() {
        assert_eq!(
            serde_json::to_string(&EventStatus::SourceOnly).unwrap(),
            "\"source-only\""
        );
        assert!(EventStatus::Matched.occurred());
        assert!(!EventStatus::Predicted.occurred());
    }

    #[test]
    fn bbox_is_a_four_element_array() {
        let b = BoundingBox {
            x: 1,
            y: 2,
            w: 3,
            h: 4,
        };
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,3,4]");
    }

    #[test]
    fn descendants_and_groups() {
        let g = outbreak();
        let d = g.descendants("outbreak");
        assert_eq!(d.len(), 9);
        assert_eq!(d[0], "illness");
        assert_eq!(g.group_of("death").unwrap().parent, Some("aftermath"));
        assert_eq!(g.group_of("outbreak").unwrap().parent, None);
        assert_eq!(g.depths()["funeral"], 2);
        assert_eq!(g.parent_of("symptoms"), Some("progression"));
    }
}
