//! Seeded generators. Everything produced here is valid by construction
//! unless the function says otherwise.

use std::collections::BTreeSet;

use ege_core::editor::EditOp;
use ege_core::formats::{
    ArgRole, CorpusFile, Document, ImageRecord, InstanceEntity, InstanceEvent, InstanceFile,
    SchemaEvent, SchemaFile, Trigger,
};
use ege_core::model::{
    Argument, BoundingBox, EntityNode, EventNode, EventStatus, EventType, GateKind, GatePlacement,
    GateSpec, InstantiatedGraph, MatchPair, ProvenanceRecord, TemporalEdge,
};
use rand::seq::SliceRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "cholera",
    "outbreak",
    "patients",
    "clinic",
    "water",
    "officials",
    "reported",
    "cases",
    "village",
    "hospital",
    "Irène",
    "Müller",
    "café",
    "naïve",
    "ministry",
    "deaths",
];
const ROLES: &[&str] = &["agent", "patient", "theme", "place", "disease", "victim"];
const NAME_TOKENS: &[&str] = &[
    "death", "illness", "outcome", "report", "case", "attack", "vote",
];
const QNODES: &[&str] = &["Q1", "Q2", "Q3", "Q4", "Q5"];
const KINDS: [GateKind; 3] = [GateKind::And, GateKind::Or, GateKind::Xor];

fn pick<'a, R: Rng, T>(rng: &mut R, xs: &'a [T]) -> &'a T {
    &xs[rng.gen_range(0..xs.len())]
}

fn sentence<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(3..9);
    (0..n)
        .map(|_| *pick(rng, WORDS))
        .collect::<Vec<_>>()
        .join(" ")
        + "."
}

/// Paragraph text joined with exactly one blank line between paragraphs.
pub fn paragraphs<R: Rng>(rng: &mut R, count: usize) -> String {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..4);
            (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn random_corpus<R: Rng>(rng: &mut R, docs: usize) -> CorpusFile {
    let mut image = 0;
    CorpusFile {
        documents: (0..docs)
            .map(|d| Document {
                doc_id: format!("d{d}"),
                title: format!("Document {d}"),
                text: {
                    let k = rng.gen_range(1..5);
                    paragraphs(rng, k)
                },
                images: (0..rng.gen_range(0..4))
                    .map(|_| {
                        image += 1;
                        ImageRecord {
                            image_id: format!("im{image}"),
                            media: format!("media/im{image}.png"),
                            width: rng.gen_range(20..400),
                            height: rng.gen_range(20..400),
                            extra: Default::default(),
                        }
                    })
                    .collect(),
                extra: Default::default(),
            })
            .collect(),
        extra: Default::default(),
    }
}

/// A span `[start, end)` of a document, in characters.
pub fn random_span<R: Rng>(rng: &mut R, doc: &Document) -> (usize, usize) {
    let len = doc.text.chars().count();
    let start = rng.gen_range(0..len);
    let end = rng.gen_range(start + 1..=len.min(start + 40));
    (start, end)
}

pub fn random_bbox<R: Rng>(rng: &mut R, img: &ImageRecord) -> BoundingBox {
    let w = rng.gen_range(1..=i64::from(img.width));
    let h = rng.gen_range(1..=i64::from(img.height));
    BoundingBox {
        x: rng.gen_range(0..=i64::from(img.width) - w),
        y: rng.gen_range(0..=i64::from(img.height) - h),
        w,
        h,
    }
}

fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

fn random_record<R: Rng>(rng: &mut R, corpus: &CorpusFile, id: String) -> ProvenanceRecord {
    let images: Vec<&ImageRecord> = corpus.documents.iter().flat_map(|d| &d.images).collect();
    if !images.is_empty() && rng.gen_bool(0.3) {
        let img = *pick(rng, &images);
        return ProvenanceRecord::Image {
            id,
            image_id: img.image_id.clone(),
            bbox: random_bbox(rng, img),
        };
    }
    let doc = pick(rng, &corpus.documents);
    let (start, end) = random_span(rng, doc);
    ProvenanceRecord::Text {
        id,
        doc_id: doc.doc_id.clone(),
        start,
        end,
        text: char_slice(&doc.text, start, end),
    }
}

/// Knobs for [`random_graph`].
#[derive(Debug, Clone, Copy)]
pub struct GraphShape {
    pub max_events: usize,
    pub max_group: usize,
    pub edge_prob: f64,
    pub cross_edge_prob: f64,
}

impl Default for GraphShape {
    fn default() -> Self {
        Self {
            max_events: 30,
            max_group: 7,
            edge_prob: 0.35,
            cross_edge_prob: 0.05,
        }
    }
}

/// A valid instantiated graph whose provenance resolves against `corpus`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    corpus: &CorpusFile,
    shape: GraphShape,
) -> InstantiatedGraph {
    let mut g = InstantiatedGraph::default();
    let n = rng.gen_range(1..=shape.max_events);
    let mut prov_n = 0;
    let mut new_prov = |rng: &mut R, g: &mut InstantiatedGraph| {
        prov_n += 1;
        let rec = random_record(rng, corpus, format!("p{prov_n}"));
        let id = rec.id().to_string();
        g.provenance.insert(id.clone(), rec);
        id
    };

    let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    for (i, id) in ids.iter().enumerate() {
        let status = *pick(
            rng,
            &[
                EventStatus::Matched,
                EventStatus::SourceOnly,
                EventStatus::Predicted,
            ],
        );
        let provenance = if status == EventStatus::Predicted {
            vec![]
        } else {
            (0..rng.gen_range(1..3))
                .map(|_| new_prov(rng, &mut g))
                .collect()
        };
        g.events.insert(
            id.clone(),
            EventNode {
                id: id.clone(),
                name: format!("{} {i}", pick(rng, NAME_TOKENS)),
                description: sentence(rng),
                event_type: EventType {
                    qnode: pick(rng, QNODES).to_string(),
                    name: String::new(),
                },
                status,
                confidence: f64::from(rng.gen_range(0..=20u8)) / 20.0,
                terminal: rng.gen_bool(0.1),
                children: vec![],
                arguments: vec![],
                provenance,
                schema_ref: (status != EventStatus::SourceOnly).then(|| id.clone()),
            },
        );
        if status == EventStatus::Matched {
            g.match_pairs.push(MatchPair {
                schema: id.clone(),
                instance: format!("inst-{id}"),
            });
        }
        // forest: attach under an earlier event whose group still has room
        let parents: Vec<&String> = ids[..i]
            .iter()
            .filter(|p| g.events[*p].children.len() < shape.max_group)
            .collect();
        if i == 0 || parents.is_empty() || g.roots.len() < shape.max_group && rng.gen_bool(0.2) {
            g.roots.push(id.clone());
        } else {
            let p = (*pick(rng, &parents)).clone();
            g.events.get_mut(&p).unwrap().children.push(id.clone());
        }
    }

    // temporal: DAG inside each group along a random order, plus a few cross edges
    let groups: Vec<Vec<String>> = g
        .sibling_groups()
        .iter()
        .map(|s| s.members.to_vec())
        .collect();
    for mut members in groups {
        members.shuffle(rng);
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                if rng.gen_bool(shape.edge_prob) {
                    g.temporal
                        .insert(TemporalEdge::new(members[a].as_str(), members[b].as_str()));
                }
            }
        }
    }
    for a in &ids {
        for b in &ids {
            if a != b
                && g.group_of(a).map(|s| s.parent) != g.group_of(b).map(|s| s.parent)
                && rng.gen_bool(shape.cross_edge_prob / n as f64 * 4.0)
            {
                g.temporal.insert(TemporalEdge::new(a.as_str(), b.as_str()));
            }
        }
    }

    for k in 0..rng.gen_range(0..7) {
        let id = format!("ent{k}");
        let provenance = (0..rng.gen_range(0..3))
            .map(|_| new_prov(rng, &mut g))
            .collect();
        g.entities.insert(
            id.clone(),
            EntityNode {
                id,
                name: pick(rng, WORDS).to_string(),
                wd_qnode: rng.gen_bool(0.3).then(|| pick(rng, QNODES).to_string()),
                provenance,
            },
        );
    }
    let entity_ids: Vec<String> = g.entities.keys().cloned().collect();
    if !entity_ids.is_empty() {
        for ev in g.events.values_mut() {
            let mut used = BTreeSet::new();
            for _ in 0..rng.gen_range(0..4) {
                let role = pick(rng, ROLES).to_string();
                let filler = pick(rng, &entity_ids).clone();
                if used.insert((role.clone(), filler.clone())) {
                    let order = ev.arguments.len() as u32;
                    ev.arguments.push(Argument {
                        role,
                        filler,
                        order,
                    });
                }
            }
            ev.arguments.shuffle(rng);
        }
    }

    for id in &ids {
        if !rng.gen_bool(0.3) {
            continue;
        }
        let children = g.events[id].children.clone();
        let succ: Vec<String> = g
            .temporal
            .iter()
            .filter(|e| &e.before == id)
            .map(|e| e.after.clone())
            .collect();
        let (placement, pool) = if !children.is_empty() && (succ.is_empty() || rng.gen_bool(0.5)) {
            (GatePlacement::Children, children)
        } else if !succ.is_empty() {
            (GatePlacement::Successors, succ)
        } else {
            continue;
        };
        let k = rng.gen_range(1..=pool.len());
        let members: Vec<String> = pool.choose_multiple(rng, k).cloned().collect();
        g.gates.push(GateSpec {
            id: format!("{id}/gate"),
            source: id.clone(),
            kind: *pick(rng, &KINDS),
            members,
            placement,
        });
    }
    g
}

/// One edit op aimed at existing elements of `g`. It is usually, not always,
/// valid; callers keep the ones the editor accepts.
pub fn random_op<R: Rng>(
    rng: &mut R,
    g: &InstantiatedGraph,
    corpus: &CorpusFile,
) -> Option<EditOp> {
    let events: Vec<&String> = g.events.keys().collect();
    let entities: Vec<&String> = g.entities.keys().collect();
    let edges: Vec<&TemporalEdge> = g.temporal.iter().collect();
    let any_event = |rng: &mut R| -> Option<String> { events.choose(rng).map(|s| (*s).clone()) };
    Some(match rng.gen_range(0..14) {
        0 => EditOp::UpdateEventFields {
            id: any_event(rng)?,
            name: rng.gen_bool(0.7).then(|| sentence(rng)),
            description: rng.gen_bool(0.5).then(|| sentence(rng)),
            event_type: rng.gen_bool(0.3).then(|| EventType {
                qnode: pick(rng, QNODES).to_string(),
                name: "edited".into(),
            }),
        },
        1 => {
            let ev = g
                .events
                .values()
                .filter(|e| !e.arguments.is_empty())
                .collect::<Vec<_>>();
            let ev = ev.choose(rng)?;
            let mut order: Vec<usize> = (0..ev.arguments.len()).collect();
            order.shuffle(rng);
            EditOp::ReorderArguments {
                event: ev.id.clone(),
                order,
            }
        }
        2 => EditOp::AddArgument {
            event: any_event(rng)?,
            role: pick(rng, ROLES).to_string(),
            entity: (*entities.choose(rng)?).clone(),
        },
        3 => {
            let ev = g
                .events
                .values()
                .filter(|e| !e.arguments.is_empty())
                .collect::<Vec<_>>();
            let ev = ev.choose(rng)?;
            let a = ev.arguments.choose(rng)?;
            EditOp::RemoveArgument {
                event: ev.id.clone(),
                role: a.role.clone(),
                entity: a.filler.clone(),
            }
        }
        4 => EditOp::AddTemporalEdge {
            before: any_event(rng)?,
            after: any_event(rng)?,
        },
        5 => {
            let e = edges.choose(rng)?;
            EditOp::RemoveTemporalEdge {
                before: e.before.clone(),
                after: e.after.clone(),
            }
        }
        6 => {
            let e = edges.choose(rng)?;
            EditOp::ReverseTemporalEdge {
                before: e.before.clone(),
                after: e.after.clone(),
            }
        }
        7 => {
            let parents: Vec<_> = g.events.values().filter(|e| e.is_parent()).collect();
            let p = parents.choose(rng)?;
            let k = rng.gen_range(1..=p.children.len());
            EditOp::SetGate {
                gate: GateSpec {
                    id: g
                        .gates
                        .choose(rng)
                        .map(|x| x.id.clone())
                        .filter(|_| rng.gen_bool(0.3))
                        .unwrap_or(format!("{}/gate", p.id)),
                    source: p.id.clone(),
                    kind: *pick(rng, &KINDS),
                    members: p.children.choose_multiple(rng, k).cloned().collect(),
                    placement: GatePlacement::Children,
                },
            }
        }
        8 => EditOp::RemoveGate {
            gate: g.gates.choose(rng)?.id.clone(),
        },
        9 => EditOp::ReparentEvent {
            id: any_event(rng)?,
            new_parent: if rng.gen_bool(0.2) {
                None
            } else {
                Some(any_event(rng)?)
            },
        },
        10 => {
            if g.events.len() < 3 {
                return None;
            }
            EditOp::DeleteEvent {
                id: any_event(rng)?,
            }
        }
        11 => EditOp::MergeEntities {
            keep: (*entities.choose(rng)?).clone(),
            drop: (*entities.choose(rng)?).clone(),
        },
        12 => {
            let texts: Vec<(&String, &String)> = g
                .provenance
                .values()
                .filter_map(|r| match r {
                    ProvenanceRecord::Text { id, doc_id, .. } => Some((id, doc_id)),
                    _ => None,
                })
                .collect();
            let (id, doc_id) = texts.choose(rng)?;
            let doc = corpus.documents.iter().find(|d| &&d.doc_id == doc_id)?;
            let (start, end) = random_span(rng, doc);
            EditOp::UpdateTextSpan {
                provenance: (*id).clone(),
                start,
                end,
            }
        }
        _ => {
            let boxes: Vec<(&String, &String)> = g
                .provenance
                .values()
                .filter_map(|r| match r {
                    ProvenanceRecord::Image { id, image_id, .. } => Some((id, image_id)),
                    _ => None,
                })
                .collect();
            let (id, image_id) = boxes.choose(rng)?;
            let img = corpus
                .documents
                .iter()
                .flat_map(|d| &d.images)
                .find(|i| &&i.image_id == image_id)?;
            EditOp::UpdateBoundingBox {
                provenance: (*id).clone(),
                bbox: random_bbox(rng, img),
            }
        }
    })
}

/// Knobs for [`random_match_case`].
#[derive(Debug, Clone, Copy)]
pub struct MatchShape {
    pub schema_events: usize,
    pub instance_events: usize,
    pub max_group: usize,
}

/// A schema and an instance drawn from small shared type and name pools so
/// that scores collide and ties are common.
pub fn random_match_case<R: Rng>(rng: &mut R, shape: MatchShape) -> (SchemaFile, InstanceFile) {
    let name = |rng: &mut R| -> String {
        let k = rng.gen_range(1..=2);
        NAME_TOKENS
            .choose_multiple(rng, k)
            .cloned()
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ns = rng.gen_range(1..=shape.schema_events);
    let mut events: Vec<SchemaEvent> = (0..ns)
        .map(|i| SchemaEvent {
            id: format!("s{i}"),
            name: name(rng),
            description: String::new(),
            wd_node: if rng.gen_bool(0.2) {
                String::new()
            } else {
                pick(rng, QNODES).to_string()
            },
            wd_name: String::new(),
            children: vec![],
            gate: None,
            outlinks: vec![],
            arg_roles: vec![ArgRole {
                role: pick(rng, ROLES).to_string(),
                entity_types: vec![],
                extra: Default::default(),
            }],
            extra: Default::default(),
        })
        .collect();
    let mut roots = vec![];
    for i in 0..ns {
        let parents: Vec<usize> = (0..i)
            .filter(|&p| events[p].children.len() < shape.max_group)
            .collect();
        if i == 0 || parents.is_empty() || roots.len() < shape.max_group && rng.gen_bool(0.3) {
            roots.push(format!("s{i}"));
        } else {
            let p = *pick(rng, &parents);
            events[p].children.push(format!("s{i}"));
        }
    }
    let mut groups: Vec<Vec<String>> = vec![roots.clone()];
    groups.extend(
        events
            .iter()
            .filter(|e| !e.children.is_empty())
            .map(|e| e.children.clone()),
    );
    for mut members in groups {
        members.shuffle(rng);
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                if rng.gen_bool(0.4) {
                    let i: usize = members[a][1..].parse().unwrap();
                    events[i].outlinks.push(members[b].clone());
                }
            }
        }
    }
    let schema = SchemaFile {
        id: "random".into(),
        name: "random schema".into(),
        events,
        roots,
        extra: Default::default(),
    };

    let entities: Vec<InstanceEntity> = (0..4)
        .map(|k| InstanceEntity {
            id: format!("x{k}"),
            name: format!("entity {k}"),
            wd_qnode: None,
            provenance: vec![],
            extra: Default::default(),
        })
        .collect();
    let ni = rng.gen_range(0..=shape.instance_events);
    let mut provenance = vec![];
    let events: Vec<InstanceEvent> = (0..ni)
        .map(|i| {
            let pid = format!("q{i}");
            provenance.push(ProvenanceRecord::Text {
                id: pid.clone(),
                doc_id: "doc".into(),
                start: i,
                end: i + 1,
                text: "x".into(),
            });
            let mut args: Vec<Argument> = vec![];
            let n = rng.gen_range(0..3);
            for (k, role) in ROLES.iter().enumerate().take(n) {
                let filler = format!("x{}", rng.gen_range(0..4));
                args.push(Argument {
                    role: role.to_string(),
                    filler,
                    order: k as u32,
                });
            }
            InstanceEvent {
                id: format!("i{i}"),
                trigger: Trigger {
                    text: "x".into(),
                    doc_id: "doc".into(),
                    start: i,
                    end: i + 1,
                },
                event_type: EventType {
                    qnode: pick(rng, QNODES).to_string(),
                    name: String::new(),
                },
                name: name(rng),
                description: String::new(),
                arguments: args,
                confidence: rng
                    .gen_bool(0.5)
                    .then(|| f64::from(rng.gen_range(0..=10u8)) / 10.0),
                provenance: vec![pid],
                extra: Default::default(),
            }
        })
        .collect();
    let mut temporal = BTreeSet::new();
    for a in 0..ni {
        for b in 0..ni {
            if a != b && rng.gen_bool(0.25) {
                temporal.insert(TemporalEdge::new(format!("i{a}"), format!("i{b}")));
            }
        }
    }
    let instance = InstanceFile {
        events,
        entities,
        temporal: temporal.into_iter().collect(),
        provenance,
        extra: Default::default(),
    };
    (schema, instance)
}
