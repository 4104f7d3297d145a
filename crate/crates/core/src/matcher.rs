//! Schema instantiation: top-down greedy matching of instance events onto
//! schema events, prediction of the unmatched schema events, and attachment
//! of the leftover instance events as source-only children.
//!
//! Scoring is deliberately simple and deterministic: an exact type match
//! scores 1.0, otherwise the Dice coefficient of the lowercased name token
//! sets. A learned scorer can replace [`score_match`] without changing the
//! result type.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::formats::{InstanceEvent, InstanceFile, SchemaEvent, SchemaFile};
use crate::model::{
    has_group_cycle, EntityNode, EventNode, EventStatus, EventType, GateSpec, InstantiatedGraph,
    MatchPair, TemporalEdge,
};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Minimum score for a candidate pair, in (0, 1].
    pub tau: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU }
    }
}

impl MatchConfig {
    pub fn new(tau: f64) -> Result<Self, Diagnostic> {
        if tau > 0.0 && tau <= 1.0 {
            Ok(Self { tau })
        } else {
            Err(Diagnostic::error(
                Code::BadRange,
                "tau",
                format!("tau must lie in (0, 1], got {tau}"),
            ))
        }
    }
}

/// How an event of the output came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    MatchedByType,
    MatchedByName,
    Predicted,
    Attached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub graph: InstantiatedGraph,
    /// Output event id → decision.
    pub decisions: BTreeMap<String, Decision>,
    /// Non-fatal findings, e.g. instance temporal edges dropped because they
    /// would close a cycle inside a sibling group.
    pub diagnostics: Diagnostics,
}

fn tokens(name: &str) -> BTreeSet<String> {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Dice coefficient of the lowercased token sets of two names.
pub fn name_dice(a: &str, b: &str) -> f64 {
    set_dice(&tokens(a), &tokens(b))
}

fn set_dice(ta: &BTreeSet<String>, tb: &BTreeSet<String>) -> f64 {
    if ta.is_empty() && tb.is_empty() {
        return 0.0;
    }
    let shared = ta.intersection(tb).count();
    2.0 * shared as f64 / (ta.len() + tb.len()) as f64
}

pub fn score_match(s: &SchemaEvent, e: &InstanceEvent) -> f64 {
    if !s.wd_node.is_empty() && s.wd_node == e.event_type.qnode {
        1.0
    } else {
        name_dice(&s.name, &e.name)
    }
}

/// Accepted pairs as (schema index, instance index), in acceptance order.
pub(crate) fn greedy_pairs(
    schema: &SchemaFile,
    instance: &InstanceFile,
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let pos: HashMap<&str, usize> = schema
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();

    // schema parent of every event; roots share the `None` parent
    let mut parent: HashMap<usize, Option<usize>> = HashMap::new();
    for (i, ev) in schema.events.iter().enumerate() {
        for c in &ev.children {
            if let Some(&ci) = pos.get(c.as_str()) {
                parent.entry(ci).or_insert(Some(i));
            }
        }
    }

    // breadth-first levels
    let mut levels: Vec<Vec<usize>> = Vec::new();
    let mut seen = HashSet::new();
    let mut frontier: Vec<usize> = schema
        .roots
        .iter()
        .filter_map(|r| pos.get(r.as_str()).copied())
        .collect();
    while !frontier.is_empty() {
        let mut level = Vec::new();
        let mut next = Vec::new();
        for s in frontier {
            if !seen.insert(s) {
                continue;
            }
            level.push(s);
            for c in &schema.events[s].children {
                if let Some(&ci) = pos.get(c.as_str()) {
                    next.push(ci);
                }
            }
        }
        if !level.is_empty() {
            levels.push(level);
        }
        frontier = next;
    }

    let pos_ref = &pos;
    let schema_edges: HashSet<(usize, usize)> = schema
        .events
        .iter()
        .enumerate()
        .flat_map(|(i, ev)| {
            ev.outlinks
                .iter()
                .filter_map(move |o| Some((i, *pos_ref.get(o.as_str())?)))
        })
        .collect();
    let inst_pos: HashMap<&str, usize> = instance
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let inst_edges: HashSet<(usize, usize)> = instance
        .temporal
        .iter()
        .filter_map(|t| {
            Some((
                *inst_pos.get(t.before.as_str())?,
                *inst_pos.get(t.after.as_str())?,
            ))
        })
        .collect();

    let mut assigned_inst = vec![false; instance.events.len()];
    let mut matched_schema = vec![false; schema.events.len()];
    let mut accepted: Vec<(usize, usize)> = Vec::new();

    // One global order: score first, so the candidates kept by a higher tau
    // are a prefix of those kept by a lower one and acceptance never grows
    // with tau. Equal scores go top-down.
    let inst_tokens: Vec<BTreeSet<String>> =
        instance.events.iter().map(|e| tokens(&e.name)).collect();
    let mut cands: Vec<(f64, usize, usize, &str, usize)> = Vec::new();
    for (depth, level) in levels.iter().enumerate() {
        for &s in level {
            let sev = &schema.events[s];
            let st = tokens(&sev.name);
            for (e, ev) in instance.events.iter().enumerate() {
                // same rule as score_match with the token sets built once
                let score = if !sev.wd_node.is_empty() && sev.wd_node == ev.event_type.qnode {
                    1.0
                } else {
                    set_dice(&st, &inst_tokens[e])
                };
                if score >= cfg.tau {
                    cands.push((score, depth, s, ev.id.as_str(), e));
                }
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.3.cmp(b.3))
    });
    for (_, _, s, _, e) in cands {
        if matched_schema[s] || assigned_inst[e] {
            continue;
        }
        let blocked = accepted.iter().any(|&(s2, e2)| {
            parent.get(&s2) == parent.get(&s)
                && ((schema_edges.contains(&(s, s2)) && inst_edges.contains(&(e2, e)))
                    || (schema_edges.contains(&(s2, s)) && inst_edges.contains(&(e, e2))))
        });
        if blocked {
            continue;
        }
        matched_schema[s] = true;
        assigned_inst[e] = true;
        accepted.push((s, e));
    }
    accepted
}

pub fn match_graphs(
    schema: &SchemaFile,
    instance: &InstanceFile,
    cfg: &MatchConfig,
) -> Result<MatchResult, Diagnostics> {
    if schema.roots.is_empty() {
        return Err(
            Diagnostic::error(Code::EmptySchema, &schema.id, "schema has no root events").into(),
        );
    }
    let schema_ids: HashSet<&str> = schema.events.iter().map(|e| e.id.as_str()).collect();
    let mut collisions: Diagnostics = Diagnostics(
        instance
            .events
            .iter()
            .filter(|e| schema_ids.contains(e.id.as_str()))
            .map(|e| {
                Diagnostic::error(
                    Code::IdCollision,
                    &e.id,
                    "instance event id is also a schema event id",
                )
            })
            .collect(),
    );
    if !collisions.is_empty() {
        collisions.sort();
        return Err(collisions);
    }

    let pairs = greedy_pairs(schema, instance, cfg);
    let match_of: HashMap<usize, usize> = pairs.iter().copied().collect();
    let inst_matched: HashSet<usize> = pairs.iter().map(|p| p.1).collect();

    let mut g = InstantiatedGraph::default();
    let mut decisions = BTreeMap::new();
    let mut diagnostics = Diagnostics::default();

    // instance id → output node id
    let mut node_of: HashMap<&str, &str> = HashMap::new();

    for (si, sev) in schema.events.iter().enumerate() {
        let node = match match_of.get(&si) {
            Some(&ei) => {
                let iev = &instance.events[ei];
                node_of.insert(&iev.id, &sev.id);
                let by_type = !sev.wd_node.is_empty() && sev.wd_node == iev.event_type.qnode;
                decisions.insert(
                    sev.id.clone(),
                    if by_type {
                        Decision::MatchedByType
                    } else {
                        Decision::MatchedByName
                    },
                );
                EventNode {
                    id: sev.id.clone(),
                    name: iev.name.clone(),
                    description: if iev.description.is_empty() {
                        sev.description.clone()
                    } else {
                        iev.description.clone()
                    },
                    event_type: EventType {
                        qnode: sev.wd_node.clone(),
                        name: sev.wd_name.clone(),
                    },
                    status: EventStatus::Matched,
                    confidence: score_match(sev, iev),
                    terminal: false,
                    children: sev.children.clone(),
                    arguments: iev.arguments.clone(),
                    provenance: iev.provenance.clone(),
                    schema_ref: Some(sev.id.clone()),
                }
            }
            None => {
                decisions.insert(sev.id.clone(), Decision::Predicted);
                EventNode {
                    id: sev.id.clone(),
                    name: sev.name.clone(),
                    description: sev.description.clone(),
                    event_type: EventType {
                        qnode: sev.wd_node.clone(),
                        name: sev.wd_name.clone(),
                    },
                    status: EventStatus::Predicted,
                    confidence: 0.0,
                    terminal: false,
                    children: sev.children.clone(),
                    arguments: vec![],
                    provenance: vec![],
                    schema_ref: Some(sev.id.clone()),
                }
            }
        };
        g.events.insert(node.id.clone(), node);
    }
    let mut sorted_pairs = pairs.clone();
    sorted_pairs.sort();
    g.match_pairs = sorted_pairs
        .iter()
        .map(|&(s, e)| MatchPair {
            schema: schema.events[s].id.clone(),
            instance: instance.events[e].id.clone(),
        })
        .collect();
    g.roots = schema.roots.clone();

    // Leftover instance events hang under the matched schema event they share
    // the most argument entities with; no unique best means the first root.
    let entity_set = |args: &[crate::model::Argument]| -> BTreeSet<String> {
        args.iter().map(|a| a.filler.clone()).collect()
    };
    let matched_entities: Vec<(&str, BTreeSet<String>)> = sorted_pairs
        .iter()
        .map(|&(s, e)| {
            (
                schema.events[s].id.as_str(),
                entity_set(&instance.events[e].arguments),
            )
        })
        .collect();
    for (ei, iev) in instance.events.iter().enumerate() {
        if inst_matched.contains(&ei) {
            continue;
        }
        let mine = entity_set(&iev.arguments);
        let scored: Vec<(usize, &str)> = matched_entities
            .iter()
            .map(|(sid, ents)| (mine.intersection(ents).count(), *sid))
            .collect();
        let best = scored.iter().map(|p| p.0).max().unwrap_or(0);
        let winners: Vec<&str> = scored.iter().filter(|p| p.0 == best).map(|p| p.1).collect();
        let host = if best > 0 && winners.len() == 1 {
            winners[0]
        } else {
            schema.roots[0].as_str()
        };
        node_of.insert(&iev.id, &iev.id);
        decisions.insert(iev.id.clone(), Decision::Attached);
        g.events
            .get_mut(host)
            .expect("host exists")
            .children
            .push(iev.id.clone());
        g.events.insert(
            iev.id.clone(),
            EventNode {
                id: iev.id.clone(),
                name: iev.name.clone(),
                description: iev.description.clone(),
                event_type: iev.event_type.clone(),
                status: EventStatus::SourceOnly,
                confidence: iev.confidence.unwrap_or(1.0),
                terminal: false,
                children: vec![],
                arguments: iev.arguments.clone(),
                provenance: iev.provenance.clone(),
                schema_ref: None,
            },
        );
    }

    for ent in &instance.entities {
        g.entities.insert(
            ent.id.clone(),
            EntityNode {
                id: ent.id.clone(),
                name: ent.name.clone(),
                wd_qnode: ent.wd_qnode.clone(),
                provenance: ent.provenance.clone(),
            },
        );
    }
    for rec in &instance.provenance {
        g.provenance.insert(rec.id().to_string(), rec.clone());
    }

    for sev in &schema.events {
        for o in &sev.outlinks {
            g.temporal.insert(TemporalEdge::new(&sev.id, o));
        }
        if let Some(gate) = &sev.gate {
            g.gates.push(GateSpec {
                id: SchemaFile::gate_id(&sev.id),
                source: sev.id.clone(),
                kind: gate.kind,
                members: gate.members.clone(),
                placement: gate.placement,
            });
        }
    }
    // group key of every node: None for roots, Some(parent) otherwise
    let group_key: HashMap<String, Option<String>> = g
        .sibling_groups()
        .iter()
        .flat_map(|grp| {
            grp.members
                .iter()
                .map(move |m| (m.clone(), grp.parent.map(str::to_string)))
        })
        .collect();
    let mut succ: HashMap<String, Vec<String>> = HashMap::new();
    for e in &g.temporal {
        if e.before != e.after
            && group_key
                .get(&e.before)
                .is_some_and(|k| group_key.get(&e.after) == Some(k))
        {
            succ.entry(e.before.clone())
                .or_default()
                .push(e.after.clone());
        }
    }
    let mut already_cyclic: HashMap<Option<String>, bool> = HashMap::new();
    for t in &instance.temporal {
        let (Some(b), Some(a)) = (
            node_of.get(t.before.as_str()),
            node_of.get(t.after.as_str()),
        ) else {
            continue;
        };
        let edge = TemporalEdge::new(*b, *a);
        if edge.before == edge.after || g.temporal.contains(&edge) {
            continue;
        }
        let key = group_key.get(&edge.before);
        let same_group = key.is_some() && key == group_key.get(&edge.after);
        let cyclic = same_group && {
            let key = key.unwrap().clone();
            let pre = *already_cyclic.entry(key.clone()).or_insert_with(|| {
                let members = match &key {
                    None => g.roots.clone(),
                    Some(p) => g.events[p].children.clone(),
                };
                has_group_cycle(&g, &members)
            });
            pre || reaches(&succ, &edge.after, &edge.before)
        };
        if !cyclic {
            if same_group {
                succ.entry(edge.before.clone())
                    .or_default()
                    .push(edge.after.clone());
            }
            g.temporal.insert(edge);
        } else {
            diagnostics.push(Diagnostic::warning(
                Code::TemporalDropped,
                &t.before,
                format!(
                    "instance edge {} -> {} dropped: it closes a temporal cycle",
                    t.before, t.after
                ),
            ));
        }
    }

    assign_predicted_confidence(&mut g);
    diagnostics.sort();
    Ok(MatchResult {
        graph: g,
        decisions,
        diagnostics,
    })
}

fn reaches(succ: &HashMap<String, Vec<String>>, from: &str, to: &str) -> bool {
    let mut stack = vec![from];
    let mut seen = HashSet::new();
    while let Some(cur) = stack.pop() {
        if cur == to {
            return true;
        }
        if seen.insert(cur) {
            stack.extend(succ.get(cur).into_iter().flatten().map(String::as_str));
        }
    }
    false
}

/// Predicted events under a parent get (m + 1) / (n + 2), where n is the
/// size of the sibling group and m the number of its occurred members.
fn assign_predicted_confidence(g: &mut InstantiatedGraph) {
    let groups: Vec<Vec<String>> = g
        .sibling_groups()
        .into_iter()
        .map(|grp| grp.members.to_vec())
        .collect();
    for members in groups {
        let n = members.len();
        let m = members
            .iter()
            .filter(|id| g.events.get(*id).is_some_and(|e| e.status.occurred()))
            .count();
        let conf = (m as f64 + 1.0) / (n as f64 + 2.0);
        for id in &members {
            if let Some(ev) = g.events.get_mut(id) {
                if ev.status == EventStatus::Predicted {
                    ev.confidence = conf;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{parse_instance, parse_schema};

    fn ev(name: &str, qnode: &str) -> (SchemaEvent, InstanceEvent) {
        let s: SchemaEvent = serde_json::from_value(serde_json::json!({
            "id": "s", "name": name, "wd_node": qnode
        }))
        .unwrap();
        let e: InstanceEvent = serde_json::from_value(serde_json::json!({
            "id": "e", "name": name, "type": {"qnode": qnode, "name": ""},
            "trigger": {"text": "x", "doc_id": "d", "start": 0, "end": 1},
            "provenance": ["p"]
        }))
        .unwrap();
        (s, e)
    }

    #[test]
    fn exact_type_scores_one() {
        let (s, e) = ev("whatever", "Q000");
        assert_eq!(score_match(&s, &e), 1.0);
    }

    #[test]
    fn dice_two_thirds() {
        assert!((name_dice("illness outcomes", "outcomes") - 2.0 / 3.0).abs() < 1e-12);
        assert!((name_dice("Illness Outcomes", "OUTCOMES") - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_scores_zero() {
        let (s, _) = ev("funeral", "Q1");
        let (_, e) = ev("data analysis", "Q2");
        assert_eq!(score_match(&s, &e), 0.0);
    }

    #[test]
    fn tau_bounds() {
        assert!(MatchConfig::new(1.0).is_ok());
        assert!(MatchConfig::new(1.01).is_err());
        assert!(MatchConfig::new(0.0).is_err());
    }

    const SCHEMA: &str = r#"{"id":"s","name":"x","roots":["r"],"events":[
        {"id":"r","name":"root","wd_node":"Q0","children":["a","b"]},
        {"id":"a","name":"alpha","wd_node":"QA","outlinks":["b"]},
        {"id":"b","name":"beta","wd_node":"QB"}]}"#;

    fn instance(events: &[(&str, &str)], temporal: &[(&str, &str)]) -> InstanceFile {
        let evs: Vec<_> = events
            .iter()
            .map(|(id, q)| {
                serde_json::json!({"id": id, "name": id, "type": {"qnode": q, "name": ""},
                "trigger": {"text":"x","doc_id":"d","start":0,"end":1}, "provenance": ["p"]})
            })
            .collect();
        let t: Vec<_> = temporal
            .iter()
            .map(|(b, a)| serde_json::json!({"before": b, "after": a}))
            .collect();
        let doc = serde_json::json!({"events": evs, "temporal": t,
            "provenance": [{"kind":"text","id":"p","doc_id":"d","start":0,"end":1,"text":"x"}]});
        parse_instance(doc.to_string().as_bytes()).unwrap()
    }

    #[test]
    fn contradicting_temporal_order_blocks_second_match() {
        let schema = parse_schema(SCHEMA.as_bytes()).unwrap();
        // instance says b-event happens before a-event
        let inst = instance(&[("ea", "QA"), ("eb", "QB")], &[("eb", "ea")]);
        let r = match_graphs(&schema, &inst, &MatchConfig::default()).unwrap();
        assert_eq!(r.graph.match_pairs.len(), 1);
        assert_eq!(r.graph.match_pairs[0].schema, "a");
        assert_eq!(r.decisions["eb"], Decision::Attached);
        // the contradicting instance edge (eb -> a) joins the root group
        assert!(r.graph.temporal.contains(&TemporalEdge::new("eb", "a")));
    }

    #[test]
    fn consistent_order_matches_both() {
        let schema = parse_schema(SCHEMA.as_bytes()).unwrap();
        let inst = instance(&[("ea", "QA"), ("eb", "QB")], &[("ea", "eb")]);
        let r = match_graphs(&schema, &inst, &MatchConfig::default()).unwrap();
        assert_eq!(r.graph.match_pairs.len(), 2);
        assert_eq!(r.graph.events["a"].confidence, 1.0);
        assert_eq!(r.decisions["a"], Decision::MatchedByType);
        // root predicted, alone in the root group: (0+1)/(1+2)
        assert!((r.graph.events["r"].confidence - 1.0 / 3.0).abs() < 1e-12);
        assert!(crate::model::validate_graph(&r.graph)
            .errors()
            .next()
            .is_none());
    }

    #[test]
    fn edge_closing_a_cycle_is_dropped() {
        let schema = parse_schema(SCHEMA.as_bytes()).unwrap();
        let inst = instance(
            &[("ea", "QA"), ("x", "QZ"), ("y", "QZ")],
            &[("ea", "x"), ("x", "y"), ("y", "ea"), ("y", "x")],
        );
        let r = match_graphs(&schema, &inst, &MatchConfig::default()).unwrap();
        assert_eq!(r.graph.events["r"].children, ["a", "b", "x", "y"]);
        assert!(r.graph.temporal.contains(&TemporalEdge::new("a", "x")));
        assert!(r.graph.temporal.contains(&TemporalEdge::new("x", "y")));
        assert!(!r.graph.temporal.contains(&TemporalEdge::new("y", "a")));
        assert!(!r.graph.temporal.contains(&TemporalEdge::new("y", "x")));
        let dropped: Vec<&str> = r
            .diagnostics
            .iter()
            .filter(|d| d.code == Code::TemporalDropped)
            .map(|d| d.subject.as_str())
            .collect();
        assert_eq!(dropped, ["y", "y"]);
        assert!(crate::model::validate_graph(&r.graph)
            .errors()
            .next()
            .is_none());
    }

    #[test]
    fn empty_schema_and_collisions() {
        let schema = parse_schema(br#"{"id":"e","name":"e","events":[],"roots":[]}"#).unwrap();
        let inst = instance(&[], &[]);
        let err = match_graphs(&schema, &inst, &MatchConfig::default()).unwrap_err();
        assert!(err.has_code(Code::EmptySchema));

        let schema = parse_schema(SCHEMA.as_bytes()).unwrap();
        let inst = instance(&[("a", "QZ")], &[]);
        let err = match_graphs(&schema, &inst, &MatchConfig::default()).unwrap_err();
        assert!(err.has_code(Code::IdCollision));
    }
}
