use std::sync::Arc;

use ege_core::editor::{filter_by_confidence, filter_by_entity, EditOp, EditSession};
use ege_core::formats::{parse_corpus, parse_graph};
use ege_core::model::{validate_graph, InstantiatedGraph, TemporalEdge};
use ege_core::provenance::CorpusIndex;
use ege_core::Code;
use ege_testkit::build::{flat, with_edges};
use ege_testkit::gen::{random_corpus, random_graph, random_op, GraphShape};
use ege_testkit::{fixture, oracle, rng};
use proptest::prelude::*;
use rand::Rng;

fn cholera() -> EditSession {
    let g = parse_graph(&fixture("cholera.graph.json")).unwrap();
    let corpus = parse_corpus(&fixture("cholera.corpus.json")).unwrap();
    EditSession::with_corpus(g, Arc::new(CorpusIndex::new(&corpus)))
}

fn codes(r: Result<usize, ege_core::Diagnostics>) -> Vec<Code> {
    r.unwrap_err().iter().map(|d| d.code).collect()
}

#[test]
fn adding_confirmed_cases_as_theme() {
    let mut s = cholera();
    s.apply_edit(EditOp::AddArgument {
        event: "ev-data-analysis".into(),
        role: "theme".into(),
        entity: "confirmed-cases".into(),
    })
    .unwrap();
    let args = s.graph().events["ev-data-analysis"].ordered_arguments();
    let last = args.last().unwrap();
    assert_eq!(
        (last.role.as_str(), last.filler.as_str()),
        ("theme", "confirmed-cases")
    );
    assert_eq!(args.len(), 3);
}

#[test]
fn reflexive_edge_is_refused() {
    let mut s = EditSession::new(flat(&["A", "B"]));
    let got = codes(s.apply_edit(EditOp::AddTemporalEdge {
        before: "A".into(),
        after: "A".into(),
    }));
    assert_eq!(got, vec![Code::SelfEdge]);
    assert_eq!(s.cursor(), 0);
}

#[test]
fn closing_a_two_node_cycle_is_refused() {
    let g = with_edges(flat(&["A", "B"]), &[("A", "B")]);
    let mut s = EditSession::new(g.clone());
    let got = codes(s.apply_edit(EditOp::AddTemporalEdge {
        before: "B".into(),
        after: "A".into(),
    }));
    assert_eq!(got, vec![Code::WouldCycle]);
    let nodes = vec!["A".to_string(), "B".to_string()];
    let both = vec![
        ("A".to_string(), "B".to_string()),
        ("B".to_string(), "A".to_string()),
    ];
    assert!(oracle::has_cycle(&nodes, &both));
    assert_eq!(s.graph(), &g);
}

#[test]
fn duplicate_edge_and_missing_refs() {
    let mut s = EditSession::new(with_edges(flat(&["A", "B"]), &[("A", "B")]));
    let dup = EditOp::AddTemporalEdge {
        before: "A".into(),
        after: "B".into(),
    };
    assert_eq!(codes(s.apply_edit(dup)), vec![Code::DuplicateEdge]);
    let ghost = EditOp::DeleteEvent { id: "ghost".into() };
    assert_eq!(codes(s.apply_edit(ghost)), vec![Code::RefMissing]);
}

#[test]
fn reparent_under_self_or_descendant() {
    let g = parse_graph(&fixture("outbreak_predicted.graph.json")).unwrap();
    let mut s = EditSession::new(g);
    let me = EditOp::ReparentEvent {
        id: "progression".into(),
        new_parent: Some("progression".into()),
    };
    assert_eq!(codes(s.apply_edit(me)), vec![Code::SelfParent]);
    let below = EditOp::ReparentEvent {
        id: "outbreak".into(),
        new_parent: Some("symptoms".into()),
    };
    assert_eq!(codes(s.apply_edit(below)), vec![Code::WouldCycle]);
}

#[test]
fn span_and_box_checks() {
    let mut s = cholera();
    let backwards = EditOp::UpdateTextSpan {
        provenance: "p-cholera".into(),
        start: 61,
        end: 54,
    };
    assert_eq!(codes(s.apply_edit(backwards)), vec![Code::InvalidSpan]);
    let past_end = EditOp::UpdateTextSpan {
        provenance: "p-cholera".into(),
        start: 10,
        end: 100_000,
    };
    assert_eq!(codes(s.apply_edit(past_end)), vec![Code::InvalidSpan]);
    let outside = EditOp::UpdateBoundingBox {
        provenance: "p-specialist-image".into(),
        bbox: [1200, 600, 200, 200].into(),
    };
    assert_eq!(codes(s.apply_edit(outside)), vec![Code::InvalidBbox]);
    let flat_box = EditOp::UpdateBoundingBox {
        provenance: "p-specialist-image".into(),
        bbox: [10, 10, 0, 5].into(),
    };
    assert_eq!(codes(s.apply_edit(flat_box)), vec![Code::InvalidBbox]);

    // widen "cholera" to "of cholera"; the cached text follows the corpus
    s.apply_edit(EditOp::UpdateTextSpan {
        provenance: "p-cholera".into(),
        start: 51,
        end: 61,
    })
    .unwrap();
    match &s.graph().provenance["p-cholera"] {
        ege_core::model::ProvenanceRecord::Text { text, .. } => assert_eq!(text, "of cholera"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fresh_session_is_at_both_boundaries() {
    let mut s = cholera();
    assert_eq!(s.undo().unwrap_err().code, Code::AtBoundary);
    assert_eq!(s.redo().unwrap_err().code, Code::AtBoundary);
}

#[test]
fn new_edit_after_undo_drops_redo_tail() {
    let mut s = EditSession::new(flat(&["A", "B", "C"]));
    let edge = |a: &str, b: &str| EditOp::AddTemporalEdge {
        before: a.into(),
        after: b.into(),
    };
    s.apply_edit(edge("A", "B")).unwrap();
    s.apply_edit(edge("B", "C")).unwrap();
    s.undo().unwrap();
    assert_eq!(s.apply_edit(edge("A", "C")).unwrap(), 2);
    assert_eq!(s.revisions().len(), 2);
    assert_eq!(s.redo().unwrap_err().code, Code::AtBoundary);
    let want: std::collections::BTreeSet<TemporalEdge> =
        [TemporalEdge::new("A", "B"), TemporalEdge::new("A", "C")].into();
    assert_eq!(s.graph().temporal, want);
}

#[test]
fn failing_batch_commits_nothing() {
    let mut s = cholera();
    let before = s.graph().clone();
    let ops = vec![
        EditOp::RemoveTemporalEdge {
            before: "illness".into(),
            after: "progression".into(),
        },
        EditOp::AddTemporalEdge {
            before: "ghost".into(),
            after: "illness".into(),
        },
    ];
    let err = s.apply_batch(ops).unwrap_err();
    let first = err.iter().next().unwrap();
    assert_eq!(
        (first.code, first.subject.as_str()),
        (Code::AtomicityAbort, "1")
    );
    assert_eq!(s.graph(), &before);
    assert_eq!(s.cursor(), 0);
}

#[test]
fn delete_cascades() {
    let g = parse_graph(&fixture("cholera.graph.json")).unwrap();
    let mut s = EditSession::new(g);
    s.apply_edit(EditOp::DeleteEvent {
        id: "aftermath".into(),
    })
    .unwrap();
    let g = s.graph();
    for gone in ["aftermath", "death-outcomes", "death", "funeral"] {
        assert!(!g.events.contains_key(gone));
    }
    assert!(g.gates.iter().all(|x| x.source != "death-outcomes"));
    assert!(g.match_pairs.iter().all(|p| p.schema != "death"));
    assert!(!validate_graph(g).has_errors());
}

#[test]
fn merge_rewrites_fillers() {
    let mut s = cholera();
    s.apply_edit(EditOp::MergeEntities {
        keep: "patients".into(),
        drop: "people".into(),
    })
    .unwrap();
    let g = s.graph();
    assert!(!g.entities.contains_key("people"));
    assert_eq!(g.events["death"].arguments[0].filler, "patients");
    // symptoms had patient=patients and patient=people; one row survives
    let rows = g.events["symptoms"]
        .arguments
        .iter()
        .filter(|a| a.filler == "patients")
        .count();
    assert_eq!(rows, 1);
    assert_eq!(
        codes(s.apply_edit(EditOp::MergeEntities {
            keep: "cholera".into(),
            drop: "cholera".into()
        })),
        vec![Code::SelfMerge]
    );
}

#[test]
fn reorder_needs_a_permutation() {
    let mut s = cholera();
    let bad = EditOp::ReorderArguments {
        event: "confirmation".into(),
        order: vec![0, 0, 1],
    };
    assert_eq!(codes(s.apply_edit(bad)), vec![Code::BadPermutation]);
    s.apply_edit(EditOp::ReorderArguments {
        event: "confirmation".into(),
        order: vec![2, 0, 1],
    })
    .unwrap();
    let roles: Vec<&str> = s.graph().events["confirmation"]
        .ordered_arguments()
        .iter()
        .map(|a| a.role.as_str())
        .collect();
    assert_eq!(roles, vec!["disease", "agent", "theme"]);
}

#[test]
fn cholera_emphasizes_data_analysis() {
    let g = parse_graph(&fixture("cholera.graph.json")).unwrap();
    assert!(filter_by_entity(&g, "cholera")
        .unwrap()
        .contains("ev-data-analysis"));
    assert_eq!(
        filter_by_entity(&g, "ghost").unwrap_err().code,
        Code::RefMissing
    );
}

#[test]
fn unused_entity_emphasizes_nothing() {
    let mut g = parse_graph(&fixture("cholera.graph.json")).unwrap();
    g.events.get_mut("death").unwrap().arguments.clear();
    g.events
        .get_mut("symptoms")
        .unwrap()
        .arguments
        .retain(|a| a.filler != "people");
    assert!(filter_by_entity(&g, "people").unwrap().is_empty());
}

#[test]
fn confidence_bounds_are_inclusive() {
    let mut g = flat(&["a", "b", "c"]);
    for (id, c) in [("a", 0.3), ("b", 0.30000001), ("c", 0.2)] {
        g.events.get_mut(id).unwrap().confidence = c;
    }
    assert_eq!(
        filter_by_confidence(&g, 0.3, 0.3).unwrap(),
        ["a".to_string()].into()
    );
    assert_eq!(filter_by_confidence(&g, 0.0, 1.0).unwrap().len(), 3);
    for (lo, hi) in [(0.5, 0.4), (-0.1, 0.5), (0.2, 1.5)] {
        assert_eq!(
            filter_by_confidence(&g, lo, hi).unwrap_err().code,
            Code::BadRange
        );
    }
}

/// Up to `n` ops the session accepts, with the graph after each.
fn random_history(seed: u64, n: usize) -> (EditSession, Vec<InstantiatedGraph>) {
    let mut r = rng(seed);
    let corpus = random_corpus(&mut r, 3);
    let g = random_graph(&mut r, &corpus, GraphShape::default());
    let mut s = EditSession::with_corpus(g, Arc::new(CorpusIndex::new(&corpus)));
    let mut states = vec![s.graph().clone()];
    let mut tries = 0;
    while states.len() <= n && tries < 400 {
        tries += 1;
        let Some(op) = random_op(&mut r, s.graph(), &corpus) else {
            continue;
        };
        if s.apply_edit(op).is_ok() {
            states.push(s.graph().clone());
        }
    }
    (s, states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn undo_and_redo_walk_the_history(seed in any::<u64>()) {
        let (mut s, states) = random_history(seed, 20);
        let k = states.len() - 1;
        prop_assert_eq!(s.revisions().len(), k);
        for g in &states {
            prop_assert!(!validate_graph(g).has_errors(), "{:?}", validate_graph(g));
        }
        for i in (0..k).rev() {
            prop_assert_eq!(s.undo().unwrap(), i);
            prop_assert_eq!(s.graph(), &states[i]);
        }
        prop_assert_eq!(s.graph(), s.base());
        for (i, want) in states.iter().enumerate().skip(1) {
            prop_assert_eq!(s.redo().unwrap(), i);
            prop_assert_eq!(s.graph(), want);
        }
    }

    #[test]
    fn filters_match_scans(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 2);
        let g = random_graph(&mut r, &corpus, GraphShape::default());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert_eq!(filter_by_confidence(&g, lo, hi).unwrap(), oracle::events_in_range(&g, lo, hi));
        for ent in g.entities.keys() {
            prop_assert_eq!(filter_by_entity(&g, ent).unwrap(), oracle::events_with_entity(&g, ent));
        }
        if let Some(ev) = g.events.values().nth(r.gen_range(0..g.events.len().max(1))) {
            let c = ev.confidence;
            prop_assert!(filter_by_confidence(&g, c, c).unwrap().contains(&ev.id));
        }
    }
}
