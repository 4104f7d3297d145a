//! Schema, instance, corpus and instantiated-graph documents.
//!
//! All four are UTF-8 JSON. Serialization is canonical: two-space indented,
//! object keys in the declaration order of the structs below (unknown keys
//! follow, sorted), lists in stored order, and a trailing newline. Unknown
//! keys on files read from upstream pipelines are kept and written back.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::model::{
    validate_graph, Argument, EventNode, EventStatus, EventType, GateKind, GatePlacement, GateSpec,
    InstantiatedGraph, ProvenanceRecord, TemporalEdge,
};
use crate::provenance::CorpusIndex;

pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub id: String,
    pub name: String,
    pub events: Vec<SchemaEvent>,
    pub roots: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEvent {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub wd_node: String,
    #[serde(default)]
    pub wd_name: String,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<SchemaGate>,
    #[serde(default)]
    pub outlinks: Vec<String>,
    #[serde(default)]
    pub arg_roles: Vec<ArgRole>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaGate {
    pub kind: GateKind,
    pub members: Vec<String>,
    pub placement: GatePlacement,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgRole {
    pub role: String,
    #[serde(default)]
    pub entity_types: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl SchemaFile {
    /// Id of the gate an event carries in a schema.
    pub fn gate_id(event_id: &str) -> String {
        format!("{event_id}/gate")
    }

    pub fn event(&self, id: &str) -> Option<&SchemaEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    /// The schema as a graph of predicted events: hierarchy, outlinks as
    /// temporal edges, and gates. Used for structural checks.
    pub fn skeleton(&self) -> InstantiatedGraph {
        let mut g = InstantiatedGraph::default();
        for ev in &self.events {
            g.events.insert(
                ev.id.clone(),
                EventNode {
                    id: ev.id.clone(),
                    name: ev.name.clone(),
                    description: ev.description.clone(),
                    event_type: EventType {
                        qnode: ev.wd_node.clone(),
                        name: ev.wd_name.clone(),
                    },
                    status: EventStatus::Predicted,
                    confidence: 0.0,
                    terminal: false,
                    children: ev.children.clone(),
                    arguments: vec![],
                    provenance: vec![],
                    schema_ref: Some(ev.id.clone()),
                },
            );
            for next in &ev.outlinks {
                g.temporal.insert(TemporalEdge::new(&ev.id, next));
            }
            if let Some(gate) = &ev.gate {
                g.gates.push(GateSpec {
                    id: Self::gate_id(&ev.id),
                    source: ev.id.clone(),
                    kind: gate.kind,
                    members: gate.members.clone(),
                    placement: gate.placement,
                });
            }
        }
        g.roots = self.roots.clone();
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub events: Vec<InstanceEvent>,
    #[serde(default)]
    pub entities: Vec<InstanceEntity>,
    #[serde(default)]
    pub temporal: Vec<TemporalEdge>,
    #[serde(default)]
    pub provenance: Vec<ProvenanceRecord>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub text: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEvent {
    pub id: String,
    pub trigger: Trigger,
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub arguments: Vec<Argument>,
    /// Extraction confidence, when the extractor reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub provenance: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntity {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wd_qnode: Option<String>,
    #[serde(default)]
    pub provenance: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub documents: Vec<Document>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub images: Vec<ImageRecord>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub media: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub extra: Extra,
}

impl CorpusFile {
    pub fn image_count(&self) -> usize {
        self.documents.iter().map(|d| d.images.len()).sum()
    }
}

fn syntax(err: serde_json::Error) -> Diagnostics {
    Diagnostics::single(Diagnostic::error(
        Code::Syntax,
        format!("line {} column {}", err.line(), err.column()),
        err.to_string(),
    ))
}

fn from_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, Diagnostics> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Diagnostics::single(Diagnostic::error(
            Code::Syntax,
            format!("byte {}", e.valid_up_to()),
            "input is not valid UTF-8",
        ))
    })?;
    serde_json::from_str(text).map_err(syntax)
}

fn finish<T>(value: T, mut diags: Diagnostics) -> Result<T, Diagnostics> {
    diags.sort();
    if diags.has_errors() {
        Err(diags)
    } else {
        Ok(value)
    }
}

fn dangling(path: String, id: &str, what: &str) -> Diagnostic {
    Diagnostic::error(Code::SchemaRef, path, format!("{what} {id} does not exist"))
}

/// Canonical bytes of any document in this module.
pub fn to_canonical<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("document types serialize infallibly");
    out.push(b'\n');
    out
}

pub fn parse_schema(bytes: &[u8]) -> Result<SchemaFile, Diagnostics> {
    let schema: SchemaFile = from_bytes(bytes)?;
    let mut diags = Diagnostics::default();

    let mut ids = HashSet::new();
    for (i, ev) in schema.events.iter().enumerate() {
        if !ids.insert(ev.id.as_str()) {
            diags.push(Diagnostic::error(
                Code::DuplicateId,
                format!("events[{i}].id"),
                format!("event id {} repeated", ev.id),
            ));
        }
    }
    for (i, r) in schema.roots.iter().enumerate() {
        if !ids.contains(r.as_str()) {
            diags.push(dangling(format!("roots[{i}]"), r, "root"));
        }
    }
    for (i, ev) in schema.events.iter().enumerate() {
        for (j, c) in ev.children.iter().enumerate() {
            if !ids.contains(c.as_str()) {
                diags.push(dangling(format!("events[{i}].children[{j}]"), c, "child"));
            }
        }
        for (j, o) in ev.outlinks.iter().enumerate() {
            if !ids.contains(o.as_str()) {
                diags.push(dangling(format!("events[{i}].outlinks[{j}]"), o, "outlink"));
            }
        }
        if let Some(gate) = &ev.gate {
            if gate.members.is_empty() {
                diags.push(Diagnostic::error(
                    Code::GateArity,
                    format!("events[{i}].gate.members"),
                    format!("gate on {} has no members", ev.id),
                ));
            }
            for (j, m) in gate.members.iter().enumerate() {
                if !ids.contains(m.as_str()) {
                    diags.push(dangling(
                        format!("events[{i}].gate.members[{j}]"),
                        m,
                        "gate member",
                    ));
                }
            }
        }
    }

    if !diags.has_errors() {
        // Hierarchy, temporal and gate structure, checked on the predicted
        // skeleton graph.
        for d in validate_graph(&schema.skeleton()) {
            if d.is_error() {
                diags.push(d);
            }
        }
    }
    finish(schema, diags)
}

pub fn parse_instance(bytes: &[u8]) -> Result<InstanceFile, Diagnostics> {
    let inst: InstanceFile = from_bytes(bytes)?;
    let mut diags = Diagnostics::default();

    let mut event_ids = HashSet::new();
    for (i, ev) in inst.events.iter().enumerate() {
        if !event_ids.insert(ev.id.as_str()) {
            diags.push(Diagnostic::error(
                Code::DuplicateId,
                format!("events[{i}].id"),
                format!("event id {} repeated", ev.id),
            ));
        }
    }
    let mut entity_ids = HashSet::new();
    for (i, ent) in inst.entities.iter().enumerate() {
        if !entity_ids.insert(ent.id.as_str()) {
            diags.push(Diagnostic::error(
                Code::DuplicateId,
                format!("entities[{i}].id"),
                format!("entity id {} repeated", ent.id),
            ));
        }
        if ent.name.trim().is_empty() {
            diags.push(Diagnostic::error(
                Code::EntityNameEmpty,
                format!("entities[{i}].name"),
                format!("entity {} has an empty name", ent.id),
            ));
        }
    }
    let mut prov_ids = HashSet::new();
    for (i, rec) in inst.provenance.iter().enumerate() {
        let path = format!("provenance[{i}]");
        if !prov_ids.insert(rec.id()) {
            diags.push(Diagnostic::error(
                Code::DuplicateId,
                format!("{path}.id"),
                format!("provenance id {} repeated", rec.id()),
            ));
        }
        match rec {
            ProvenanceRecord::Text { start, end, id, .. } => {
                if start >= end {
                    diags.push(Diagnostic::error(
                        Code::OffsetOrder,
                        path,
                        format!("provenance {id} has start {start} not before end {end}"),
                    ));
                }
            }
            ProvenanceRecord::Image { bbox, id, .. } => {
                if bbox.w <= 0 || bbox.h <= 0 || bbox.x < 0 || bbox.y < 0 {
                    diags.push(Diagnostic::error(
                        Code::InvalidBbox,
                        path,
                        format!("provenance {id} has an invalid bounding box"),
                    ));
                }
            }
        }
    }

    for (i, ev) in inst.events.iter().enumerate() {
        let base = format!("events[{i}]");
        if ev.trigger.start >= ev.trigger.end {
            diags.push(Diagnostic::error(
                Code::OffsetOrder,
                format!("{base}.trigger"),
                format!(
                    "trigger of {} has start {} not before end {}",
                    ev.id, ev.trigger.start, ev.trigger.end
                ),
            ));
        }
        if let Some(c) = ev.confidence {
            if !(0.0..=1.0).contains(&c) {
                diags.push(Diagnostic::error(
                    Code::ConfidenceRange,
                    format!("{base}.confidence"),
                    format!("confidence {c} outside [0, 1]"),
                ));
            }
        }
        if ev.provenance.is_empty() {
            diags.push(Diagnostic::error(
                Code::EmptyProvenance,
                format!("{base}.provenance"),
                format!("event {} has no provenance", ev.id),
            ));
        }
        for (j, p) in ev.provenance.iter().enumerate() {
            if !prov_ids.contains(p.as_str()) {
                diags.push(dangling(format!("{base}.provenance[{j}]"), p, "provenance"));
            }
        }
        let mut pairs = HashSet::new();
        let mut orders = HashSet::new();
        for (j, arg) in ev.arguments.iter().enumerate() {
            let path = format!("{base}.arguments[{j}]");
            if !entity_ids.contains(arg.filler.as_str()) {
                diags.push(dangling(path.clone(), &arg.filler, "entity"));
            }
            if !pairs.insert((&arg.role, &arg.filler)) {
                diags.push(Diagnostic::error(
                    Code::ArgDuplicate,
                    path.clone(),
                    format!("argument ({}, {}) repeated", arg.role, arg.filler),
                ));
            }
            if !orders.insert(arg.order) {
                diags.push(Diagnostic::error(
                    Code::ArgOrderDuplicate,
                    path,
                    format!("argument order {} repeated", arg.order),
                ));
            }
        }
    }
    for (i, ent) in inst.entities.iter().enumerate() {
        for (j, p) in ent.provenance.iter().enumerate() {
            if !prov_ids.contains(p.as_str()) {
                diags.push(dangling(
                    format!("entities[{i}].provenance[{j}]"),
                    p,
                    "provenance",
                ));
            }
        }
    }
    let mut edges = HashSet::new();
    for (i, e) in inst.temporal.iter().enumerate() {
        let path = format!("temporal[{i}]");
        if e.before == e.after {
            diags.push(Diagnostic::error(
                Code::TemporalSelf,
                path.clone(),
                format!("temporal edge from {} to itself", e.before),
            ));
        }
        for end in [&e.before, &e.after] {
            if !event_ids.contains(end.as_str()) {
                diags.push(dangling(path.clone(), end, "event"));
            }
        }
        if !edges.insert(e) {
            diags.push(Diagnostic::error(
                Code::DuplicateEdge,
                path,
                format!("temporal edge {} -> {} repeated", e.before, e.after),
            ));
        }
    }
    finish(inst, diags)
}

pub fn parse_corpus(bytes: &[u8]) -> Result<CorpusFile, Diagnostics> {
    let corpus: CorpusFile = from_bytes(bytes)?;
    let mut diags = Diagnostics::default();
    let mut docs = HashSet::new();
    let mut images = HashSet::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        if !docs.insert(doc.doc_id.as_str()) {
            diags.push(Diagnostic::error(
                Code::DuplicateId,
                format!("documents[{i}].doc_id"),
                format!("document id {} repeated", doc.doc_id),
            ));
        }
        for (j, img) in doc.images.iter().enumerate() {
            let path = format!("documents[{i}].images[{j}]");
            if !images.insert(img.image_id.as_str()) {
                diags.push(Diagnostic::error(
                    Code::DuplicateId,
                    format!("{path}.image_id"),
                    format!("image id {} repeated", img.image_id),
                ));
            }
            if img.width == 0 || img.height == 0 {
                diags.push(Diagnostic::error(
                    Code::BadDimensions,
                    path,
                    format!("image {} has zero width or height", img.image_id),
                ));
            }
        }
    }
    finish(corpus, diags)
}

/// Offset, cached-text and bounding-box checks that need the corpus.
pub fn check_instance_against_corpus(inst: &InstanceFile, corpus: &CorpusFile) -> Diagnostics {
    let index = CorpusIndex::new(corpus);
    let mut diags = Diagnostics::default();
    for (i, rec) in inst.provenance.iter().enumerate() {
        if let Err(mut d) = index.check_record(rec) {
            d.subject = format!("provenance[{i}]");
            diags.push(d);
        }
    }
    for (i, ev) in inst.events.iter().enumerate() {
        let t = &ev.trigger;
        if let Err(mut d) = index.check_span(&t.doc_id, t.start, t.end) {
            d.subject = format!("events[{i}].trigger");
            diags.push(d);
        }
    }
    for d in &mut diags.0 {
        if d.code == Code::InvalidSpan {
            d.code = Code::OffsetRange;
        }
    }
    diags.sort();
    diags
}

pub fn serialize_schema(s: &SchemaFile) -> Vec<u8> {
    to_canonical(s)
}

pub fn serialize_instance(i: &InstanceFile) -> Vec<u8> {
    to_canonical(i)
}

pub fn serialize_corpus(c: &CorpusFile) -> Vec<u8> {
    to_canonical(c)
}

pub fn serialize_graph(g: &InstantiatedGraph) -> Vec<u8> {
    to_canonical(g)
}

/// Parses an instantiated graph document. Structural validity is not
/// checked here; run [`validate_graph`] on the result.
pub fn parse_graph(bytes: &[u8]) -> Result<InstantiatedGraph, Diagnostics> {
    from_bytes(bytes)
}

/// The kind of document a JSON text holds, guessed from its top-level keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Schema,
    Instance,
    Corpus,
    Graph,
}

pub fn sniff_kind(bytes: &[u8]) -> Option<DocumentKind> {
    let value: Value = serde_json::from_slice(bytes).ok()?;
    let obj = value.as_object()?;
    let keys: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
    if keys.contains("documents") {
        Some(DocumentKind::Corpus)
    } else if keys.contains("match_pairs") {
        Some(DocumentKind::Graph)
    } else if keys.contains("roots") {
        Some(DocumentKind::Schema)
    } else if keys.contains("events") {
        Some(DocumentKind::Instance)
    } else {
        None
    }
}

/// Event id → position in the schema's event list.
pub fn schema_positions(schema: &SchemaFile) -> HashMap<&str, usize> {
    schema
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect()
}
