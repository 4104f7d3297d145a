//! Hand-built graphs for example-style tests.

use ege_core::model::{
    EventNode, EventStatus, EventType, GateKind, GatePlacement, GateSpec, InstantiatedGraph,
    TemporalEdge,
};

/// A predicted event with no arguments whose schema reference is its own id.
pub fn predicted(id: &str) -> EventNode {
    EventNode {
        id: id.into(),
        name: id.into(),
        description: String::new(),
        event_type: EventType::default(),
        status: EventStatus::Predicted,
        confidence: 0.5,
        terminal: false,
        children: vec![],
        arguments: vec![],
        provenance: vec![],
        schema_ref: Some(id.into()),
    }
}

/// Predicted root events, no edges.
pub fn flat(ids: &[&str]) -> InstantiatedGraph {
    let mut g = InstantiatedGraph::default();
    for id in ids {
        g.events.insert((*id).into(), predicted(id));
        g.roots.push((*id).into());
    }
    g
}

pub fn with_edges(mut g: InstantiatedGraph, edges: &[(&str, &str)]) -> InstantiatedGraph {
    g.temporal
        .extend(edges.iter().map(|(a, b)| TemporalEdge::new(*a, *b)));
    g
}

/// Source `s` with children `m0..m{n-1}` and one gate over all of them.
/// Members flagged in `occurred` are source-only, the rest predicted.
pub fn gate_family(kind: GateKind, occurred: &[bool], terminal: bool) -> InstantiatedGraph {
    let mut g = flat(&["s"]);
    let members: Vec<String> = (0..occurred.len()).map(|i| format!("m{i}")).collect();
    for (m, &occ) in members.iter().zip(occurred) {
        let mut ev = predicted(m);
        if occ {
            ev.status = EventStatus::SourceOnly;
            ev.schema_ref = None;
        }
        g.events.insert(m.clone(), ev);
    }
    let s = g.events.get_mut("s").unwrap();
    s.children = members.clone();
    s.terminal = terminal;
    g.gates.push(GateSpec {
        id: "s/gate".into(),
        source: "s".into(),
        kind,
        members,
        placement: GatePlacement::Children,
    });
    g
}
