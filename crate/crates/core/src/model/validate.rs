//! Structural validation of instantiated graphs.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{detect_temporal_cycles, EventStatus, GatePlacement, InstantiatedGraph};
use crate::diag::{Code, Diagnostic, Diagnostics};

/// Checks every graph invariant and reports violations as diagnostics sorted
/// by (severity, subject, code). Never fails; an empty error list means the
/// graph is valid.
pub fn validate_graph(g: &InstantiatedGraph) -> Diagnostics {
    let mut out = Diagnostics::default();
    check_events(g, &mut out);
    check_hierarchy(g, &mut out);
    check_temporal(g, &mut out);
    check_gates(g, &mut out);
    check_entities(g, &mut out);
    check_match_pairs(g, &mut out);
    check_provenance_keys(g, &mut out);
    out.sort();
    out
}

fn check_events(g: &InstantiatedGraph, out: &mut Diagnostics) {
    for (key, ev) in &g.events {
        if key != &ev.id {
            out.push(Diagnostic::error(
                Code::DuplicateId,
                key,
                format!("event stored under key {key} has id {}", ev.id),
            ));
        }
        if !(0.0..=1.0).contains(&ev.confidence) {
            out.push(Diagnostic::error(
                Code::ConfidenceRange,
                key,
                format!("confidence {} outside [0, 1]", ev.confidence),
            ));
        }
        match ev.status {
            EventStatus::Predicted if !ev.provenance.is_empty() => out.push(Diagnostic::error(
                Code::StatusProvenance,
                key,
                "predicted event carries provenance",
            )),
            EventStatus::Matched if ev.provenance.is_empty() => out.push(Diagnostic::error(
                Code::StatusProvenance,
                key,
                "matched event has no provenance",
            )),
            _ => {}
        }
        let needs_ref = ev.status != EventStatus::SourceOnly;
        if needs_ref != ev.schema_ref.is_some() {
            out.push(Diagnostic::error(
                Code::StatusSchemaRef,
                key,
                if needs_ref {
                    "matched or predicted event lacks schema_ref"
                } else {
                    "source-only event has a schema_ref"
                },
            ));
        }

        let mut seen = HashSet::new();
        for c in &ev.children {
            if c == key {
                out.push(Diagnostic::error(
                    Code::SelfChild,
                    key,
                    "event lists itself as a child",
                ));
            } else if !seen.insert(c) {
                out.push(Diagnostic::error(
                    Code::ChildDuplicate,
                    key,
                    format!("child {c} listed more than once"),
                ));
            } else if !g.events.contains_key(c) {
                out.push(Diagnostic::error(
                    Code::UnknownChild,
                    key,
                    format!("child {c} does not exist"),
                ));
            }
        }

        let mut pairs = HashSet::new();
        let mut orders = HashSet::new();
        for arg in &ev.arguments {
            if !g.entities.contains_key(&arg.filler) {
                out.push(Diagnostic::error(
                    Code::ArgFillerMissing,
                    key,
                    format!("argument {} filler {} does not exist", arg.role, arg.filler),
                ));
            }
            if !pairs.insert((&arg.role, &arg.filler)) {
                out.push(Diagnostic::error(
                    Code::ArgDuplicate,
                    key,
                    format!("argument ({}, {}) repeated", arg.role, arg.filler),
                ));
            }
            if !orders.insert(arg.order) {
                out.push(Diagnostic::error(
                    Code::ArgOrderDuplicate,
                    key,
                    format!("argument order {} repeated", arg.order),
                ));
            }
        }
        for p in &ev.provenance {
            if !g.provenance.contains_key(p) {
                out.push(Diagnostic::error(
                    Code::ProvenanceMissing,
                    key,
                    format!("provenance {p} does not exist"),
                ));
            }
        }
    }
}

fn check_hierarchy(g: &InstantiatedGraph, out: &mut Diagnostics) {
    let mut parents: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (pid, ev) in &g.events {
        for c in &ev.children {
            if c != pid {
                parents.entry(c.as_str()).or_default().insert(pid.as_str());
            }
        }
    }
    for (child, ps) in &parents {
        if ps.len() > 1 {
            let list: Vec<&str> = ps.iter().copied().collect();
            out.push(Diagnostic::error(
                Code::MultipleParents,
                *child,
                format!("listed as a child of {}", list.join(", ")),
            ));
        }
    }

    let mut root_set = HashSet::new();
    for r in &g.roots {
        if !root_set.insert(r.as_str()) {
            out.push(Diagnostic::error(
                Code::ChildDuplicate,
                r,
                "root listed more than once",
            ));
        }
        if !g.events.contains_key(r) {
            out.push(Diagnostic::error(
                Code::UnknownRoot,
                r,
                "root does not exist",
            ));
        } else if let Some(ps) = parents.get(r.as_str()) {
            let list: Vec<&str> = ps.iter().copied().collect();
            out.push(Diagnostic::error(
                Code::RootHasParent,
                r,
                format!("root is also a child of {}", list.join(", ")),
            ));
        }
    }

    // Walk up single-parent chains to find hierarchy cycles.
    let mut in_cycle: BTreeSet<&str> = BTreeSet::new();
    for id in g.events.keys() {
        let mut cur = id.as_str();
        let mut seen = HashSet::new();
        loop {
            if !seen.insert(cur) {
                if cur == id {
                    in_cycle.insert(id);
                }
                break;
            }
            match parents.get(cur).and_then(|ps| ps.iter().next()) {
                Some(p) if !root_set.contains(cur) => cur = p,
                _ => break,
            }
        }
    }
    for id in &in_cycle {
        out.push(Diagnostic::error(
            Code::HierarchyCycle,
            *id,
            "event is its own ancestor",
        ));
    }

    let reachable = g.depths();
    for id in g.events.keys() {
        if reachable.contains_key(id.as_str()) || in_cycle.contains(id.as_str()) {
            continue;
        }
        let msg = if parents.contains_key(id.as_str()) {
            "not reachable from any root"
        } else {
            "event has no parent and is not a root"
        };
        out.push(Diagnostic::error(Code::Orphan, id, msg));
    }
}

fn check_temporal(g: &InstantiatedGraph, out: &mut Diagnostics) {
    for e in &g.temporal {
        if e.before == e.after {
            out.push(Diagnostic::error(
                Code::TemporalSelf,
                &e.before,
                "temporal edge from an event to itself",
            ));
        }
        for end in [&e.before, &e.after] {
            if !g.events.contains_key(end) {
                out.push(Diagnostic::error(
                    Code::TemporalEndpoint,
                    end,
                    format!(
                        "temporal edge {} -> {} has a missing endpoint",
                        e.before, e.after
                    ),
                ));
            }
        }
    }
    for cycle in detect_temporal_cycles(g) {
        let mut shown = cycle.clone();
        shown.push(cycle[0].clone());
        out.push(Diagnostic::error(
            Code::TemporalCycle,
            &cycle[0],
            format!("temporal cycle {}", shown.join(" -> ")),
        ));
    }
}

fn check_gates(g: &InstantiatedGraph, out: &mut Diagnostics) {
    let mut ids = HashSet::new();
    for gate in &g.gates {
        if !ids.insert(gate.id.as_str()) {
            out.push(Diagnostic::error(
                Code::DuplicateId,
                &gate.id,
                "gate id repeated",
            ));
        }
        if gate.members.is_empty() {
            out.push(Diagnostic::error(
                Code::GateArity,
                &gate.id,
                "gate has no members",
            ));
        }
        let source = g.events.get(&gate.source);
        if source.is_none() {
            out.push(Diagnostic::error(
                Code::GateUnknownSource,
                &gate.id,
                format!("gate source {} does not exist", gate.source),
            ));
        }
        let mut seen = HashSet::new();
        for m in &gate.members {
            if !seen.insert(m) {
                out.push(Diagnostic::error(
                    Code::GateDuplicateMember,
                    &gate.id,
                    format!("member {m} repeated"),
                ));
                continue;
            }
            if !g.events.contains_key(m) {
                out.push(Diagnostic::error(
                    Code::UnknownMember,
                    &gate.id,
                    format!("member {m} does not exist"),
                ));
                continue;
            }
            let Some(source) = source else { continue };
            let consistent = match gate.placement {
                GatePlacement::Children => source.children.contains(m),
                GatePlacement::Successors => g
                    .temporal
                    .iter()
                    .any(|e| e.before == gate.source && &e.after == m),
            };
            if !consistent {
                let what = match gate.placement {
                    GatePlacement::Children => "a child",
                    GatePlacement::Successors => "a temporal successor",
                };
                out.push(Diagnostic::error(
                    Code::GatePlacement,
                    &gate.id,
                    format!("member {m} is not {what} of {}", gate.source),
                ));
            }
        }
    }
}

fn check_entities(g: &InstantiatedGraph, out: &mut Diagnostics) {
    for (key, ent) in &g.entities {
        if key != &ent.id {
            out.push(Diagnostic::error(
                Code::DuplicateId,
                key,
                format!("entity stored under key {key} has id {}", ent.id),
            ));
        }
        if ent.name.trim().is_empty() {
            out.push(Diagnostic::error(
                Code::EntityNameEmpty,
                key,
                "entity name is empty",
            ));
        }
        if ent.provenance.is_empty() {
            out.push(Diagnostic::warning(
                Code::EntityNoProvenance,
                key,
                "entity has no provenance and is hidden from argument tables",
            ));
        }
        for p in &ent.provenance {
            if !g.provenance.contains_key(p) {
                out.push(Diagnostic::error(
                    Code::ProvenanceMissing,
                    key,
                    format!("provenance {p} does not exist"),
                ));
            }
        }
    }
}

fn check_match_pairs(g: &InstantiatedGraph, out: &mut Diagnostics) {
    let mut schema_side = HashSet::new();
    let mut instance_side = HashSet::new();
    for pair in &g.match_pairs {
        if !schema_side.insert(pair.schema.as_str()) {
            out.push(Diagnostic::error(
                Code::MatchPair,
                &pair.schema,
                "schema event matched more than once",
            ));
        }
        if !instance_side.insert(pair.instance.as_str()) {
            out.push(Diagnostic::error(
                Code::MatchPair,
                &pair.instance,
                "instance event matched more than once",
            ));
        }
    }
    let matched_refs: HashSet<&str> = g
        .events
        .values()
        .filter(|e| e.status == EventStatus::Matched)
        .filter_map(|e| e.schema_ref.as_deref())
        .collect();
    for pair in &g.match_pairs {
        if !matched_refs.contains(pair.schema.as_str()) {
            out.push(Diagnostic::error(
                Code::MatchPair,
                &pair.schema,
                "match pair has no matched event",
            ));
        }
    }
    for ev in g.events.values() {
        if ev.status == EventStatus::Matched {
            if let Some(r) = &ev.schema_ref {
                if !schema_side.contains(r.as_str()) {
                    out.push(Diagnostic::error(
                        Code::MatchPair,
                        &ev.id,
                        "matched event missing from match_pairs",
                    ));
                }
            }
        }
    }
}

fn check_provenance_keys(g: &InstantiatedGraph, out: &mut Diagnostics) {
    for (key, rec) in &g.provenance {
        if key != rec.id() {
            out.push(Diagnostic::error(
                Code::DuplicateId,
                key,
                format!("provenance stored under key {key} has id {}", rec.id()),
            ));
        }
    }
}
