//! One analyst session: the three input files, the matcher output as edit
//! base, and the edit history. Reads go through [`Snapshot`], an immutable
//! view of one revision.

use std::collections::BTreeSet;
use std::sync::Arc;

use ege_core::editor::{filter_by_confidence, filter_by_entity, EditOp, EditSession};
use ege_core::formats::{
    check_instance_against_corpus, parse_corpus, parse_instance, parse_schema, serialize_graph,
    CorpusFile, ImageRecord, InstanceFile, SchemaFile,
};
use ege_core::layout::{compute_layout, Bounds, ExpansionState, LayoutEdge, Shape};
use ege_core::matcher::{match_graphs, MatchConfig};
use ege_core::model::{entity_occurrence_counts, EventStatus, EventType, InstantiatedGraph};
use ege_core::provenance::{CorpusIndex, Paragraph, ResolvedProvenance};
use ege_core::{Code, Diagnostic, Diagnostics};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical serialization of `g`.
pub fn graph_hash(g: &InstantiatedGraph) -> String {
    hex::encode(Sha256::digest(serialize_graph(g)))
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub tau: f64,
    pub schema: SchemaFile,
    pub instance: InstanceFile,
    pub corpus: Arc<CorpusFile>,
    index: Arc<CorpusIndex>,
    edit: EditSession,
    revision: u64,
    match_diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub revision: u64,
    pub hash: String,
    pub events: usize,
    pub matched: usize,
    pub predicted: usize,
    pub source_only: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionInfo {
    pub revision: u64,
    pub cursor: usize,
    pub hash: String,
}

impl Session {
    /// Parses the inputs, checks instance offsets against the corpus and runs
    /// the matcher. Diagnostics from all three files are reported together.
    pub fn create(
        id: String,
        schema: &[u8],
        instance: &[u8],
        corpus: &[u8],
        tau: f64,
    ) -> Result<Self, Diagnostics> {
        let cfg = MatchConfig::new(tau).map_err(Diagnostics::single)?;
        let mut errors = Diagnostics::default();
        let schema = parse_schema(schema).map_err(|d| errors.0.extend(d)).ok();
        let instance = parse_instance(instance)
            .map_err(|d| errors.0.extend(d))
            .ok();
        let corpus = parse_corpus(corpus).map_err(|d| errors.0.extend(d)).ok();
        let (Some(schema), Some(instance), Some(corpus)) = (schema, instance, corpus) else {
            errors.sort();
            return Err(errors);
        };
        let offsets = check_instance_against_corpus(&instance, &corpus);
        if offsets.has_errors() {
            return Err(Diagnostics(offsets.errors().cloned().collect()));
        }
        let result = match_graphs(&schema, &instance, &cfg)?;
        let corpus = Arc::new(corpus);
        let index = Arc::new(CorpusIndex::from_arc(corpus.clone()));
        Ok(Self {
            id,
            tau,
            schema,
            instance,
            corpus,
            edit: EditSession::with_corpus(result.graph, index.clone()),
            index,
            revision: 0,
            match_diagnostics: result.diagnostics,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn graph(&self) -> &InstantiatedGraph {
        self.edit.graph()
    }

    pub fn base(&self) -> &InstantiatedGraph {
        self.edit.base()
    }

    pub fn hash(&self) -> String {
        graph_hash(self.edit.graph())
    }

    pub fn revision_info(&self) -> RevisionInfo {
        RevisionInfo {
            revision: self.revision,
            cursor: self.edit.cursor(),
            hash: self.hash(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        let g = self.graph();
        let count = |s: EventStatus| g.events.values().filter(|e| e.status == s).count();
        SessionSummary {
            session_id: self.id.clone(),
            revision: self.revision,
            hash: self.hash(),
            events: g.events.len(),
            matched: count(EventStatus::Matched),
            predicted: count(EventStatus::Predicted),
            source_only: count(EventStatus::SourceOnly),
            diagnostics: self.match_diagnostics.clone(),
        }
    }

    /// Applies `ops` atomically; one revision per successful batch.
    pub fn apply(&mut self, ops: Vec<EditOp>) -> Result<RevisionInfo, Diagnostics> {
        self.edit.apply_batch(ops)?;
        self.revision += 1;
        Ok(self.revision_info())
    }

    pub fn undo(&mut self) -> Result<RevisionInfo, Diagnostics> {
        self.edit.undo()?;
        self.revision += 1;
        Ok(self.revision_info())
    }

    pub fn redo(&mut self) -> Result<RevisionInfo, Diagnostics> {
        self.edit.redo()?;
        self.revision += 1;
        Ok(self.revision_info())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            revision: self.revision,
            graph: self.edit.snapshot(),
            index: self.index.clone(),
        }
    }
}

/// Graph panel payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub revision: u64,
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<LayoutEdge>,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNode {
    pub id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub shape: Shape,
    pub status: Option<EventStatus>,
    pub confidence: Option<f64>,
    pub dimmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentRow {
    pub role: String,
    pub entity: String,
    pub entity_name: String,
    pub order: u32,
}

/// Information panel payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInfo {
    pub revision: u64,
    pub id: String,
    pub name: String,
    pub description: String,
    pub event_type: EventType,
    pub status: EventStatus,
    pub confidence: f64,
    pub arguments: Vec<ArgumentRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub id: String,
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityList {
    pub revision: u64,
    pub entities: Vec<RankedEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub revision: u64,
    pub events: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub images: Vec<ImageRecord>,
}

/// Optional filters for [`Snapshot::view`]. With both set, only events
/// passing both stay undimmed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewFilters {
    pub entity: Option<String>,
    pub confidence: Option<(f64, f64)>,
}

fn missing(kind: &str, id: &str) -> Diagnostics {
    Diagnostics::single(Diagnostic::error(
        Code::RefMissing,
        id,
        format!("{kind} {id} does not exist"),
    ))
}

/// A fixed revision of a session, safe to read without holding any lock.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub revision: u64,
    pub graph: Arc<InstantiatedGraph>,
    pub index: Arc<CorpusIndex>,
}

impl Snapshot {
    pub fn view(
        &self,
        st: &ExpansionState,
        filters: &ViewFilters,
    ) -> Result<GraphView, Diagnostics> {
        let g = &*self.graph;
        let mut emphasis: Option<BTreeSet<String>> = None;
        if let Some(e) = &filters.entity {
            emphasis = Some(filter_by_entity(g, e)?);
        }
        if let Some((lo, hi)) = filters.confidence {
            let set = filter_by_confidence(g, lo, hi)?;
            emphasis = Some(match emphasis {
                Some(prev) => prev.intersection(&set).cloned().collect(),
                None => set,
            });
        }
        let layout = compute_layout(g, st, emphasis.as_ref())?;
        Ok(GraphView {
            revision: self.revision,
            nodes: layout
                .nodes
                .into_iter()
                .map(|n| {
                    let ev = g.events.get(&n.id).filter(|_| !n.is_gate());
                    ViewNode {
                        name: ev.map_or_else(String::new, |e| e.name.clone()),
                        confidence: ev.map(|e| e.confidence),
                        id: n.id,
                        x: n.x,
                        y: n.y,
                        shape: n.shape,
                        status: n.status,
                        dimmed: n.dimmed,
                    }
                })
                .collect(),
            edges: layout.edges,
            bounds: layout.bounds,
        })
    }

    /// Argument rows keep only entities backed by provenance.
    pub fn event_info(&self, id: &str) -> Result<EventInfo, Diagnostics> {
        let g = &*self.graph;
        let ev = g.events.get(id).ok_or_else(|| missing("event", id))?;
        let arguments = ev
            .ordered_arguments()
            .into_iter()
            .filter_map(|a| {
                let ent = g
                    .entities
                    .get(&a.filler)
                    .filter(|e| !e.provenance.is_empty())?;
                Some(ArgumentRow {
                    role: a.role.clone(),
                    entity: ent.id.clone(),
                    entity_name: ent.name.clone(),
                    order: a.order,
                })
            })
            .collect();
        Ok(EventInfo {
            revision: self.revision,
            id: ev.id.clone(),
            name: ev.name.clone(),
            description: ev.description.clone(),
            event_type: ev.event_type.clone(),
            status: ev.status,
            confidence: ev.confidence,
            arguments,
        })
    }

    pub fn entities(&self) -> EntityList {
        let g = &*self.graph;
        EntityList {
            revision: self.revision,
            entities: entity_occurrence_counts(g)
                .into_iter()
                .map(|(id, count)| RankedEntity {
                    name: g.entities[&id].name.clone(),
                    id,
                    count,
                })
                .collect(),
        }
    }

    pub fn provenance(&self, id: &str) -> Result<ResolvedProvenance, Diagnostics> {
        Ok(self.index.resolve(&self.graph, id)?)
    }

    pub fn context(&self, id: &str) -> Result<Paragraph, Diagnostics> {
        Ok(self.index.expand_context(&self.graph, id)?)
    }

    pub fn document(&self, doc_id: &str) -> Result<DocumentView, Diagnostics> {
        let d = self
            .index
            .corpus()
            .documents
            .iter()
            .find(|d| d.doc_id == doc_id)
            .ok_or_else(|| missing("document", doc_id))?;
        Ok(DocumentView {
            doc_id: d.doc_id.clone(),
            title: d.title.clone(),
            text: d.text.clone(),
            images: d.images.clone(),
        })
    }

    pub fn filter_entity(&self, entity: &str) -> Result<FilterResult, Diagnostics> {
        Ok(FilterResult {
            revision: self.revision,
            events: filter_by_entity(&self.graph, entity)?,
        })
    }

    pub fn filter_confidence(&self, lo: f64, hi: f64) -> Result<FilterResult, Diagnostics> {
        Ok(FilterResult {
            revision: self.revision,
            events: filter_by_confidence(&self.graph, lo, hi)?,
        })
    }

    pub fn export(&self) -> Vec<u8> {
        serialize_graph(&self.graph)
    }
}
