//! Validated edits over an instantiated graph, with linear undo/redo and
//! the entity and confidence filters.
//!
//! Every committed edit stores a pair of structural patches (forward and
//! inverse) computed by diffing the graph before and after, so undo restores
//! the prior graph exactly whatever the edit touched.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::model::{
    has_group_cycle, validate_graph, Argument, BoundingBox, EntityId, EntityNode, EventId,
    EventNode, EventType, GateSpec, InstantiatedGraph, MatchPair, ProvenanceId, ProvenanceRecord,
    TemporalEdge,
};
use crate::provenance::CorpusIndex;

/// One analyst edit. Serialized as `{"op": "<Variant>", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum EditOp {
    UpdateEventFields {
        id: EventId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        event_type: Option<EventType>,
    },
    /// `order[i]` is the current position (in stored order) of the argument
    /// that moves to position `i`.
    ReorderArguments {
        event: EventId,
        order: Vec<usize>,
    },
    AddArgument {
        event: EventId,
        role: String,
        entity: EntityId,
    },
    RemoveArgument {
        event: EventId,
        role: String,
        entity: EntityId,
    },
    AddTemporalEdge {
        before: EventId,
        after: EventId,
    },
    RemoveTemporalEdge {
        before: EventId,
        after: EventId,
    },
    ReverseTemporalEdge {
        before: EventId,
        after: EventId,
    },
    /// Inserts the gate, or replaces the gate with the same id.
    SetGate {
        gate: GateSpec,
    },
    RemoveGate {
        gate: String,
    },
    /// `None` makes the event a root.
    ReparentEvent {
        id: EventId,
        #[serde(default)]
        new_parent: Option<EventId>,
    },
    DeleteEvent {
        id: EventId,
    },
    MergeEntities {
        keep: EntityId,
        drop: EntityId,
    },
    UpdateTextSpan {
        provenance: ProvenanceId,
        start: usize,
        end: usize,
    },
    UpdateBoundingBox {
        provenance: ProvenanceId,
        bbox: BoundingBox,
    },
}

impl EditOp {
    pub fn name(&self) -> &'static str {
        match self {
            EditOp::UpdateEventFields { .. } => "UpdateEventFields",
            EditOp::ReorderArguments { .. } => "ReorderArguments",
            EditOp::AddArgument { .. } => "AddArgument",
            EditOp::RemoveArgument { .. } => "RemoveArgument",
            EditOp::AddTemporalEdge { .. } => "AddTemporalEdge",
            EditOp::RemoveTemporalEdge { .. } => "RemoveTemporalEdge",
            EditOp::ReverseTemporalEdge { .. } => "ReverseTemporalEdge",
            EditOp::SetGate { .. } => "SetGate",
            EditOp::RemoveGate { .. } => "RemoveGate",
            EditOp::ReparentEvent { .. } => "ReparentEvent",
            EditOp::DeleteEvent { .. } => "DeleteEvent",
            EditOp::MergeEntities { .. } => "MergeEntities",
            EditOp::UpdateTextSpan { .. } => "UpdateTextSpan",
            EditOp::UpdateBoundingBox { .. } => "UpdateBoundingBox",
        }
    }
}

/// Structural difference between two graphs. `None` entries delete.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphPatch {
    pub events: BTreeMap<EventId, Option<EventNode>>,
    pub entities: BTreeMap<EntityId, Option<EntityNode>>,
    pub provenance: BTreeMap<ProvenanceId, Option<ProvenanceRecord>>,
    pub temporal_added: Vec<TemporalEdge>,
    pub temporal_removed: Vec<TemporalEdge>,
    pub gates: Option<Vec<GateSpec>>,
    pub roots: Option<Vec<EventId>>,
    pub match_pairs: Option<Vec<MatchPair>>,
}

fn diff_map<V: Clone + PartialEq>(
    a: &BTreeMap<String, V>,
    b: &BTreeMap<String, V>,
) -> BTreeMap<String, Option<V>> {
    let mut out = BTreeMap::new();
    for (k, v) in a {
        match b.get(k) {
            None => {
                out.insert(k.clone(), None);
            }
            Some(w) if w != v => {
                out.insert(k.clone(), Some(w.clone()));
            }
            _ => {}
        }
    }
    for (k, w) in b {
        if !a.contains_key(k) {
            out.insert(k.clone(), Some(w.clone()));
        }
    }
    out
}

fn patch_map<V: Clone>(m: &mut BTreeMap<String, V>, p: &BTreeMap<String, Option<V>>) {
    for (k, v) in p {
        match v {
            Some(v) => {
                m.insert(k.clone(), v.clone());
            }
            None => {
                m.remove(k);
            }
        }
    }
}

fn changed<T: Clone + PartialEq>(a: &T, b: &T) -> Option<T> {
    (a != b).then(|| b.clone())
}

impl GraphPatch {
    /// Patch taking `a` to `b`.
    pub fn diff(a: &InstantiatedGraph, b: &InstantiatedGraph) -> Self {
        Self {
            events: diff_map(&a.events, &b.events),
            entities: diff_map(&a.entities, &b.entities),
            provenance: diff_map(&a.provenance, &b.provenance),
            temporal_added: b.temporal.difference(&a.temporal).cloned().collect(),
            temporal_removed: a.temporal.difference(&b.temporal).cloned().collect(),
            gates: changed(&a.gates, &b.gates),
            roots: changed(&a.roots, &b.roots),
            match_pairs: changed(&a.match_pairs, &b.match_pairs),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, g: &mut InstantiatedGraph) {
        patch_map(&mut g.events, &self.events);
        patch_map(&mut g.entities, &self.entities);
        patch_map(&mut g.provenance, &self.provenance);
        for e in &self.temporal_removed {
            g.temporal.remove(e);
        }
        g.temporal.extend(self.temporal_added.iter().cloned());
        if let Some(v) = &self.gates {
            g.gates = v.clone();
        }
        if let Some(v) = &self.roots {
            g.roots = v.clone();
        }
        if let Some(v) = &self.match_pairs {
            g.match_pairs = v.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub op: EditOp,
    pub forward: GraphPatch,
    pub inverse: GraphPatch,
}

fn err(code: Code, subject: &str, message: impl Into<String>) -> Diagnostics {
    Diagnostics::single(Diagnostic::error(code, subject, message))
}

fn missing(kind: &str, id: &str) -> Diagnostics {
    err(Code::RefMissing, id, format!("{kind} {id} does not exist"))
}

fn event_mut<'g>(g: &'g mut InstantiatedGraph, id: &str) -> Result<&'g mut EventNode, Diagnostics> {
    g.events.get_mut(id).ok_or_else(|| missing("event", id))
}

fn require_event(g: &InstantiatedGraph, id: &str) -> Result<(), Diagnostics> {
    if g.events.contains_key(id) {
        Ok(())
    } else {
        Err(missing("event", id))
    }
}

/// Applies `op` to a copy of `g` and validates the result. The corpus, when
/// present, bounds span and box edits and refreshes cached span text.
pub fn apply_op(
    g: &InstantiatedGraph,
    op: &EditOp,
    corpus: Option<&CorpusIndex>,
) -> Result<InstantiatedGraph, Diagnostics> {
    let mut next = g.clone();
    mutate(&mut next, op, corpus)?;
    let mut errors = Diagnostics(validate_graph(&next).errors().cloned().collect());
    if !errors.is_empty() {
        errors.sort();
        return Err(errors);
    }
    Ok(next)
}

fn mutate(
    g: &mut InstantiatedGraph,
    op: &EditOp,
    corpus: Option<&CorpusIndex>,
) -> Result<(), Diagnostics> {
    match op {
        EditOp::UpdateEventFields {
            id,
            name,
            description,
            event_type,
        } => {
            let ev = event_mut(g, id)?;
            if let Some(v) = name {
                ev.name = v.clone();
            }
            if let Some(v) = description {
                ev.description = v.clone();
            }
            if let Some(v) = event_type {
                ev.event_type = v.clone();
            }
        }
        EditOp::ReorderArguments { event, order } => {
            let ev = event_mut(g, event)?;
            let n = ev.arguments.len();
            let mut seen = vec![false; n];
            let is_perm = order.len() == n
                && order
                    .iter()
                    .all(|&i| i < n && !std::mem::replace(&mut seen[i], true));
            if !is_perm {
                return Err(err(
                    Code::BadPermutation,
                    event,
                    format!("{order:?} is not a permutation of 0..{n}"),
                ));
            }
            let current: Vec<Argument> = ev.ordered_arguments().into_iter().cloned().collect();
            ev.arguments = order
                .iter()
                .enumerate()
                .map(|(i, &from)| Argument {
                    order: i as u32,
                    ..current[from].clone()
                })
                .collect();
        }
        EditOp::AddArgument {
            event,
            role,
            entity,
        } => {
            if !g.entities.contains_key(entity) {
                return Err(missing("entity", entity));
            }
            let ev = event_mut(g, event)?;
            if ev
                .arguments
                .iter()
                .any(|a| &a.role == role && &a.filler == entity)
            {
                return Err(err(
                    Code::DuplicateArgument,
                    event,
                    format!("{role} is already filled by {entity}"),
                ));
            }
            let order = ev.arguments.iter().map(|a| a.order + 1).max().unwrap_or(0);
            ev.arguments.push(Argument {
                role: role.clone(),
                filler: entity.clone(),
                order,
            });
        }
        EditOp::RemoveArgument {
            event,
            role,
            entity,
        } => {
            let ev = event_mut(g, event)?;
            let Some(i) = ev
                .arguments
                .iter()
                .position(|a| &a.role == role && &a.filler == entity)
            else {
                return Err(err(
                    Code::RefMissing,
                    event,
                    format!("no argument {role} filled by {entity}"),
                ));
            };
            ev.arguments.remove(i);
        }
        EditOp::AddTemporalEdge { before, after } => {
            if before == after {
                return Err(err(
                    Code::SelfEdge,
                    before,
                    "an event cannot precede itself",
                ));
            }
            require_event(g, before)?;
            require_event(g, after)?;
            let edge = TemporalEdge::new(before.as_str(), after.as_str());
            if !g.temporal.insert(edge) {
                return Err(err(
                    Code::DuplicateEdge,
                    before,
                    format!("edge {before} -> {after} already exists"),
                ));
            }
            would_cycle(g, before, after)?;
        }
        EditOp::RemoveTemporalEdge { before, after } => {
            if !g
                .temporal
                .remove(&TemporalEdge::new(before.as_str(), after.as_str()))
            {
                return Err(err(
                    Code::RefMissing,
                    before,
                    format!("no edge {before} -> {after}"),
                ));
            }
        }
        EditOp::ReverseTemporalEdge { before, after } => {
            if !g
                .temporal
                .remove(&TemporalEdge::new(before.as_str(), after.as_str()))
            {
                return Err(err(
                    Code::RefMissing,
                    before,
                    format!("no edge {before} -> {after}"),
                ));
            }
            if !g
                .temporal
                .insert(TemporalEdge::new(after.as_str(), before.as_str()))
            {
                return Err(err(
                    Code::DuplicateEdge,
                    after,
                    format!("edge {after} -> {before} already exists"),
                ));
            }
            would_cycle(g, after, before)?;
        }
        EditOp::SetGate { gate } => {
            require_event(g, &gate.source)?;
            for m in &gate.members {
                require_event(g, m)?;
            }
            match g.gates.iter_mut().find(|x| x.id == gate.id) {
                Some(slot) => *slot = gate.clone(),
                None => g.gates.push(gate.clone()),
            }
        }
        EditOp::RemoveGate { gate } => {
            let before = g.gates.len();
            g.gates.retain(|x| &x.id != gate);
            if g.gates.len() == before {
                return Err(missing("gate", gate));
            }
        }
        EditOp::ReparentEvent { id, new_parent } => {
            require_event(g, id)?;
            if let Some(p) = new_parent {
                if p == id {
                    return Err(err(
                        Code::SelfParent,
                        id,
                        "an event cannot be its own parent",
                    ));
                }
                require_event(g, p)?;
                if g.descendants(id).contains(p) {
                    return Err(err(
                        Code::WouldCycle,
                        id,
                        format!("{p} is a descendant of {id}"),
                    ));
                }
            }
            match g.parent_of(id).map(str::to_string) {
                Some(old) => g.events.get_mut(&old).unwrap().children.retain(|c| c != id),
                None => g.roots.retain(|r| r != id),
            }
            match new_parent {
                Some(p) => g.events.get_mut(p).unwrap().children.push(id.clone()),
                None => g.roots.push(id.clone()),
            }
        }
        EditOp::DeleteEvent { id } => {
            require_event(g, id)?;
            let mut gone: BTreeSet<EventId> = g.descendants(id).into_iter().collect();
            gone.insert(id.clone());
            match g.parent_of(id).map(str::to_string) {
                Some(p) => g.events.get_mut(&p).unwrap().children.retain(|c| c != id),
                None => g.roots.retain(|r| r != id),
            }
            g.events.retain(|k, _| !gone.contains(k));
            g.temporal
                .retain(|e| !gone.contains(&e.before) && !gone.contains(&e.after));
            g.gates.retain(|gate| !gone.contains(&gate.source));
            for gate in &mut g.gates {
                gate.members.retain(|m| !gone.contains(m));
            }
            g.gates.retain(|gate| !gate.members.is_empty());
            g.match_pairs.retain(|p| !gone.contains(&p.schema));
        }
        EditOp::MergeEntities { keep, drop } => {
            if keep == drop {
                return Err(err(
                    Code::SelfMerge,
                    keep,
                    "cannot merge an entity into itself",
                ));
            }
            if !g.entities.contains_key(keep) {
                return Err(missing("entity", keep));
            }
            let Some(dropped) = g.entities.remove(drop) else {
                return Err(missing("entity", drop));
            };
            let kept = g.entities.get_mut(keep).unwrap();
            for p in dropped.provenance {
                if !kept.provenance.contains(&p) {
                    kept.provenance.push(p);
                }
            }
            for ev in g.events.values_mut() {
                let mut rows: Vec<Argument> = Vec::with_capacity(ev.arguments.len());
                for mut a in std::mem::take(&mut ev.arguments) {
                    if &a.filler == drop {
                        a.filler = keep.clone();
                    }
                    if !rows
                        .iter()
                        .any(|r| r.role == a.role && r.filler == a.filler)
                    {
                        rows.push(a);
                    }
                }
                ev.arguments = rows;
            }
        }
        EditOp::UpdateTextSpan {
            provenance,
            start,
            end,
        } => {
            let Some(rec) = g.provenance.get_mut(provenance) else {
                return Err(missing("provenance", provenance));
            };
            let ProvenanceRecord::Text {
                doc_id,
                start: s,
                end: e,
                text,
                ..
            } = rec
            else {
                return Err(err(Code::NotText, provenance, "not a text provenance"));
            };
            if start >= end {
                return Err(err(
                    Code::InvalidSpan,
                    provenance,
                    format!("span [{start}, {end}) is empty or reversed"),
                ));
            }
            let Some(index) = corpus else {
                return Err(err(
                    Code::RefMissing,
                    doc_id,
                    "no corpus loaded for span edits",
                ));
            };
            let slice = index
                .check_span(doc_id, *start, *end)
                .map_err(Diagnostics::single)?;
            *s = *start;
            *e = *end;
            *text = slice;
        }
        EditOp::UpdateBoundingBox { provenance, bbox } => {
            let Some(rec) = g.provenance.get_mut(provenance) else {
                return Err(missing("provenance", provenance));
            };
            let ProvenanceRecord::Image {
                image_id, bbox: b, ..
            } = rec
            else {
                return Err(err(
                    Code::InvalidBbox,
                    provenance,
                    "not an image provenance",
                ));
            };
            match corpus {
                Some(index) => index
                    .check_bbox(image_id, bbox)
                    .map_err(Diagnostics::single)?,
                None if bbox.w <= 0 || bbox.h <= 0 || bbox.x < 0 || bbox.y < 0 => {
                    return Err(err(Code::InvalidBbox, provenance, "box has no extent"));
                }
                None => {}
            }
            *b = *bbox;
        }
    }
    Ok(())
}

fn would_cycle(g: &InstantiatedGraph, before: &str, after: &str) -> Result<(), Diagnostics> {
    let Some(group) = g.group_of(before) else {
        return Ok(());
    };
    if group.members.iter().any(|m| m == after) && has_group_cycle(g, group.members) {
        return Err(err(
            Code::WouldCycle,
            before,
            format!("edge {before} -> {after} closes a temporal cycle"),
        ));
    }
    Ok(())
}

/// Revisioned graph with linear history.
#[derive(Debug, Clone)]
pub struct EditSession {
    base: Arc<InstantiatedGraph>,
    current: Arc<InstantiatedGraph>,
    revisions: Vec<Revision>,
    cursor: usize,
    corpus: Option<Arc<CorpusIndex>>,
}

impl EditSession {
    pub fn new(base: InstantiatedGraph) -> Self {
        let base = Arc::new(base);
        Self {
            current: base.clone(),
            base,
            revisions: Vec::new(),
            cursor: 0,
            corpus: None,
        }
    }

    pub fn with_corpus(base: InstantiatedGraph, corpus: Arc<CorpusIndex>) -> Self {
        Self {
            corpus: Some(corpus),
            ..Self::new(base)
        }
    }

    pub fn base(&self) -> &InstantiatedGraph {
        &self.base
    }

    pub fn graph(&self) -> &InstantiatedGraph {
        &self.current
    }

    /// Immutable handle on the current revision, for readers.
    pub fn snapshot(&self) -> Arc<InstantiatedGraph> {
        self.current.clone()
    }

    pub fn corpus(&self) -> Option<&CorpusIndex> {
        self.corpus.as_deref()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    /// Commits `op` at the cursor, discarding any redo tail.
    pub fn apply_edit(&mut self, op: EditOp) -> Result<usize, Diagnostics> {
        let next = apply_op(&self.current, &op, self.corpus.as_deref())?;
        let forward = GraphPatch::diff(&self.current, &next);
        let inverse = GraphPatch::diff(&next, &self.current);
        self.revisions.truncate(self.cursor);
        self.revisions.push(Revision {
            op,
            forward,
            inverse,
        });
        self.cursor += 1;
        self.current = Arc::new(next);
        Ok(self.cursor)
    }

    /// Applies every op or none. On failure the diagnostics start with an
    /// `ATOMICITY_ABORT` whose subject is the failing op index.
    pub fn apply_batch(&mut self, ops: Vec<EditOp>) -> Result<usize, Diagnostics> {
        let saved = (self.current.clone(), self.revisions.clone(), self.cursor);
        for (i, op) in ops.into_iter().enumerate() {
            let name = op.name();
            if let Err(errs) = self.apply_edit(op) {
                (self.current, self.revisions, self.cursor) = saved;
                let mut out = Diagnostics::single(Diagnostic::error(
                    Code::AtomicityAbort,
                    i.to_string(),
                    format!("batch aborted at op {i} ({name}); nothing was applied"),
                ));
                out.0.extend(errs);
                return Err(out);
            }
        }
        Ok(self.cursor)
    }

    pub fn undo(&mut self) -> Result<usize, Diagnostic> {
        if self.cursor == 0 {
            return Err(Diagnostic::error(
                Code::AtBoundary,
                "undo",
                "nothing to undo",
            ));
        }
        self.cursor -= 1;
        let mut g = (*self.current).clone();
        self.revisions[self.cursor].inverse.apply(&mut g);
        self.current = Arc::new(g);
        Ok(self.cursor)
    }

    pub fn redo(&mut self) -> Result<usize, Diagnostic> {
        if self.cursor == self.revisions.len() {
            return Err(Diagnostic::error(
                Code::AtBoundary,
                "redo",
                "nothing to redo",
            ));
        }
        let mut g = (*self.current).clone();
        self.revisions[self.cursor].forward.apply(&mut g);
        self.cursor += 1;
        self.current = Arc::new(g);
        Ok(self.cursor)
    }
}

/// Events with `entity` as any argument filler.
pub fn filter_by_entity(
    g: &InstantiatedGraph,
    entity: &str,
) -> Result<BTreeSet<EventId>, Diagnostic> {
    if !g.entities.contains_key(entity) {
        return Err(Diagnostic::error(
            Code::RefMissing,
            entity,
            format!("entity {entity} does not exist"),
        ));
    }
    Ok(g.events
        .values()
        .filter(|e| e.arguments.iter().any(|a| a.filler == entity))
        .map(|e| e.id.clone())
        .collect())
}

/// Events with `lo <= confidence <= hi`.
pub fn filter_by_confidence(
    g: &InstantiatedGraph,
    lo: f64,
    hi: f64,
) -> Result<BTreeSet<EventId>, Diagnostic> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Diagnostic::error(
            Code::BadRange,
            "confidence",
            format!("[{lo}, {hi}] is not a sub-interval of [0, 1]"),
        ));
    }
    Ok(g.events
        .values()
        .filter(|e| lo <= e.confidence && e.confidence <= hi)
        .map(|e| e.id.clone())
        .collect())
}
