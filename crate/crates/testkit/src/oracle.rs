//! Reference implementations used as test oracles. They are written for
//! obviousness, not speed, and share no code with the engine beyond its data
//! types.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use ege_core::formats::{InstanceFile, SchemaFile};
use ege_core::layout::{EdgeKind, ExpansionState, Layout, Shape};
use ege_core::model::{Argument, EventStatus, GateKind, InstantiatedGraph, Verdict};

/// Expected verdict for a gate with the given member occurrences.
pub fn gate_verdict(kind: GateKind, occurred: &[bool], strict_terminal: bool) -> Verdict {
    let n = occurred.len();
    let c = occurred.iter().filter(|&&b| b).count();
    let base = match (kind, c) {
        (GateKind::Xor, 0) => Verdict::Pending,
        (GateKind::Xor, 1) => Verdict::Satisfied,
        (GateKind::Xor, _) => Verdict::Violated,
        (GateKind::Or, 0) => Verdict::Pending,
        (GateKind::Or, _) => Verdict::Satisfied,
        (GateKind::And, c) if c == n => Verdict::Satisfied,
        (GateKind::And, _) => Verdict::Pending,
    };
    if strict_terminal && base == Verdict::Pending {
        Verdict::Violated
    } else {
        base
    }
}

pub fn events_with_entity(g: &InstantiatedGraph, entity: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (id, ev) in &g.events {
        for a in &ev.arguments {
            if a.filler == entity {
                out.insert(id.clone());
            }
        }
    }
    out
}

pub fn events_in_range(g: &InstantiatedGraph, lo: f64, hi: f64) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (id, ev) in &g.events {
        if ev.confidence >= lo && ev.confidence <= hi {
            out.insert(id.clone());
        }
    }
    out
}

/// Entity → number of distinct events using it, most used first, then id.
pub fn occurrence_counts(g: &InstantiatedGraph) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = g
        .entities
        .keys()
        .map(|ent| (ent.clone(), events_with_entity(g, ent).len()))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Argument rows whose filler is an entity with provenance, in stored order.
pub fn backed_arguments(g: &InstantiatedGraph, event: &str) -> Vec<Argument> {
    let mut rows: Vec<Argument> = g.events[event]
        .arguments
        .iter()
        .filter(|a| {
            g.entities
                .get(&a.filler)
                .is_some_and(|e| !e.provenance.is_empty())
        })
        .cloned()
        .collect();
    rows.sort_by_key(|a| a.order);
    rows
}

/// Reflexive reachability via boolean Floyd-Warshall.
pub fn has_cycle(nodes: &[String], edges: &[(String, String)]) -> bool {
    let n = nodes.len();
    let idx: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut r = vec![vec![false; n]; n];
    for (a, b) in edges {
        if let (Some(&i), Some(&j)) = (idx.get(a.as_str()), idx.get(b.as_str())) {
            r[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|i| r[i][i])
}

/// Every elementary cycle, written from its smallest id, found by trying
/// every ordering of every vertex subset. Only for small vertex counts.
pub fn simple_cycles(nodes: &[String], edges: &[(String, String)]) -> BTreeSet<Vec<String>> {
    let set: HashSet<(&str, &str)> = edges
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let mut sorted: Vec<&String> = nodes.iter().collect();
    sorted.sort();
    let n = sorted.len();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let subset: Vec<&String> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| sorted[i])
            .collect();
        if subset.len() < 2 {
            continue;
        }
        let first = subset[0];
        let mut rest: Vec<&String> = subset[1..].to_vec();
        permutations(&mut rest, 0, &mut |perm| {
            let mut cyc = vec![first];
            cyc.extend_from_slice(perm);
            let closed = (0..cyc.len())
                .all(|i| set.contains(&(cyc[i].as_str(), cyc[(i + 1) % cyc.len()].as_str())));
            if closed {
                out.insert(cyc.iter().map(|s| (*s).clone()).collect());
            }
        });
    }
    out
}

fn permutations<T: Copy>(xs: &mut Vec<T>, k: usize, f: &mut dyn FnMut(&[T])) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permutations(xs, k + 1, f);
        xs.swap(k, i);
    }
}

/// Paragraph `[start, end)` (in characters) containing the span, or `None`
/// when the span touches a blank-line separator.
pub fn paragraph_of(text: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    let mut pos = 0;
    for piece in text.split("\n\n") {
        let len = piece.chars().count();
        if start >= pos && end <= pos + len {
            return Some((pos, pos + len));
        }
        pos += len + 2;
    }
    None
}

fn tokens(s: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

pub fn score(schema: &SchemaFile, s: usize, instance: &InstanceFile, e: usize) -> f64 {
    let se = &schema.events[s];
    let ie = &instance.events[e];
    if !se.wd_node.is_empty() && se.wd_node == ie.event_type.qnode {
        return 1.0;
    }
    let a = tokens(&se.name);
    let b = tokens(&ie.name);
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    2.0 * a.intersection(&b).count() as f64 / (a.len() + b.len()) as f64
}

struct Facts {
    depth: Vec<usize>,
    parent: Vec<Option<usize>>,
    schema_edges: HashSet<(usize, usize)>,
    inst_edges: HashSet<(usize, usize)>,
}

fn facts(schema: &SchemaFile, instance: &InstanceFile) -> Facts {
    let sidx = |id: &str| schema.events.iter().position(|e| e.id == id);
    let iidx = |id: &str| instance.events.iter().position(|e| e.id == id);
    let n = schema.events.len();
    let mut parent = vec![None; n];
    for (i, ev) in schema.events.iter().enumerate() {
        for c in &ev.children {
            if let Some(ci) = sidx(c) {
                parent[ci] = Some(i);
            }
        }
    }
    let mut depth = vec![usize::MAX; n];
    for (i, d) in depth.iter_mut().enumerate() {
        let mut k = 0;
        let mut cur = i;
        while let Some(p) = parent[cur] {
            k += 1;
            cur = p;
        }
        *d = k;
    }
    let schema_edges = schema
        .events
        .iter()
        .enumerate()
        .flat_map(|(i, ev)| {
            ev.outlinks
                .iter()
                .filter_map(move |o| sidx(o).map(|j| (i, j)))
        })
        .collect();
    let inst_edges = instance
        .temporal
        .iter()
        .filter_map(|t| Some((iidx(&t.before)?, iidx(&t.after)?)))
        .collect();
    Facts {
        depth,
        parent,
        schema_edges,
        inst_edges,
    }
}

fn contradicts(f: &Facts, (s, e): (usize, usize), (s2, e2): (usize, usize)) -> bool {
    f.parent[s] == f.parent[s2]
        && ((f.schema_edges.contains(&(s, s2)) && f.inst_edges.contains(&(e2, e)))
            || (f.schema_edges.contains(&(s2, s)) && f.inst_edges.contains(&(e, e2))))
}

/// Pairs that violate the sibling temporal-consistency rule.
pub fn temporal_violations(
    schema: &SchemaFile,
    instance: &InstanceFile,
    pairs: &[(usize, usize)],
) -> Vec<((usize, usize), (usize, usize))> {
    let f = facts(schema, instance);
    let mut out = vec![];
    for (i, &a) in pairs.iter().enumerate() {
        for &b in &pairs[i + 1..] {
            if contradicts(&f, a, b) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Exhaustive matcher: over every injective, temporally consistent set of
/// candidate pairs with score at least `tau`, the lexicographically greatest
/// one when candidates are ranked by (score descending, depth, schema
/// position, instance id). Returned sorted by schema index.
pub fn exhaustive_match(
    schema: &SchemaFile,
    instance: &InstanceFile,
    tau: f64,
) -> Vec<(usize, usize)> {
    let f = facts(schema, instance);
    let mut cands: Vec<(usize, usize, f64)> = vec![];
    for s in 0..schema.events.len() {
        for e in 0..instance.events.len() {
            let sc = score(schema, s, instance, e);
            if sc >= tau {
                cands.push((s, e, sc));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(f.depth[a.0].cmp(&f.depth[b.0]))
            .then(a.0.cmp(&b.0))
            .then(instance.events[a.1].id.cmp(&instance.events[b.1].id))
    });

    // enumerate every feasible subset as an indicator vector over `cands`
    let mut best: Option<Vec<bool>> = None;
    let mut pick = vec![false; cands.len()];
    fn rec(
        k: usize,
        cands: &[(usize, usize, f64)],
        f: &Facts,
        pick: &mut Vec<bool>,
        chosen: &mut Vec<(usize, usize)>,
        best: &mut Option<Vec<bool>>,
    ) {
        if k == cands.len() {
            if best.as_ref().is_none_or(|b| *pick > *b) {
                *best = Some(pick.clone());
            }
            return;
        }
        let (s, e, _) = cands[k];
        let ok = chosen
            .iter()
            .all(|&(s2, e2)| s2 != s && e2 != e && !contradicts(f, (s, e), (s2, e2)));
        if ok {
            pick[k] = true;
            chosen.push((s, e));
            rec(k + 1, cands, f, pick, chosen, best);
            chosen.pop();
            pick[k] = false;
        }
        rec(k + 1, cands, f, pick, chosen, best);
    }
    rec(0, &cands, &f, &mut pick, &mut vec![], &mut best);
    let best = best.unwrap_or_default();
    let mut out: Vec<(usize, usize)> = cands
        .iter()
        .zip(best)
        .filter(|(_, b)| *b)
        .map(|(c, _)| (c.0, c.1))
        .collect();
    out.sort();
    out
}

/// Events that should be on screen: roots, plus children of rendered
/// expanded parents.
pub fn rendered_events(g: &InstantiatedGraph, st: &ExpansionState) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<&String> = g.roots.iter().collect();
    while let Some(id) = stack.pop() {
        if !out.insert(id.clone()) {
            continue;
        }
        if st.expanded.contains(id) {
            stack.extend(g.events[id].children.iter());
        }
    }
    out
}

/// Every way `l` breaks the layout rules for (`g`, `st`); empty when sound.
pub fn layout_violations(g: &InstantiatedGraph, st: &ExpansionState, l: &Layout) -> Vec<String> {
    let mut bad = vec![];
    let shown = rendered_events(g, st);
    let events: BTreeMap<&str, (f64, f64, Shape)> = l
        .nodes
        .iter()
        .filter(|n| n.status.is_some())
        .map(|n| (n.id.as_str(), (n.x, n.y, n.shape)))
        .collect();
    let listed: BTreeSet<String> = events.keys().map(|s| s.to_string()).collect();
    if listed != shown {
        bad.push(format!("rendered set {listed:?} != expected {shown:?}"));
    }
    let mut ids = HashSet::new();
    for n in &l.nodes {
        if !ids.insert(&n.id) {
            bad.push(format!("node {} listed twice", n.id));
        }
    }
    for e in &l.edges {
        if !ids.contains(&e.from) || !ids.contains(&e.to) {
            bad.push(format!("edge {} -> {} has an unrendered end", e.from, e.to));
        }
    }
    let mut spots = HashSet::new();
    for (id, &(x, y, shape)) in &events {
        if !spots.insert((x.to_bits(), y.to_bits())) {
            bad.push(format!("{id} collides at ({x}, {y})"));
        }
        let want = if g.events[*id].children.is_empty() {
            Shape::Circle
        } else {
            Shape::Diamond
        };
        if shape != want {
            bad.push(format!("{id} has shape {shape:?}"));
        }
    }
    for id in &shown {
        let ev = &g.events[id];
        if !st.expanded.contains(id) {
            continue;
        }
        let (_, py, _) = events[id.as_str()];
        for c in &ev.children {
            let Some(&(_, cy, _)) = events.get(c.as_str()) else {
                continue;
            };
            if cy != py + 120.0 {
                bad.push(format!("{c} is not one row below {id}"));
            }
            let drawn = l
                .edges
                .iter()
                .any(|e| e.kind == EdgeKind::Hierarchy && &e.from == id && &e.to == c);
            if !drawn {
                bad.push(format!("hierarchy edge {id} -> {c} missing"));
            }
        }
    }
    let parent: HashMap<&str, &str> = g
        .events
        .values()
        .flat_map(|p| p.children.iter().map(move |c| (c.as_str(), p.id.as_str())))
        .collect();
    for t in &g.temporal {
        let (Some(&(xu, _, _)), Some(&(xv, _, _))) =
            (events.get(t.before.as_str()), events.get(t.after.as_str()))
        else {
            continue;
        };
        if parent.get(t.before.as_str()) == parent.get(t.after.as_str()) && xu >= xv {
            bad.push(format!(
                "temporal edge {} -> {} not left to right",
                t.before, t.after
            ));
        }
    }
    for gate in &g.gates {
        let expect = shown.contains(&gate.source) && gate.members.iter().any(|m| shown.contains(m));
        if expect != l.nodes.iter().any(|n| n.id == gate.id) {
            bad.push(format!("gate glyph {} presence wrong", gate.id));
        }
    }
    bad
}

/// Whether the matcher output lists every schema event once and every
/// instance event once, either matched or as a source-only node.
pub fn completeness(
    schema: &SchemaFile,
    instance: &InstanceFile,
    g: &InstantiatedGraph,
) -> Result<(), String> {
    for s in &schema.events {
        let ev = g
            .events
            .get(&s.id)
            .ok_or(format!("schema event {} missing", s.id))?;
        if ev.status == EventStatus::SourceOnly {
            return Err(format!("schema event {} marked source-only", s.id));
        }
    }
    for i in &instance.events {
        let paired = g.match_pairs.iter().filter(|p| p.instance == i.id).count();
        let node = g
            .events
            .get(&i.id)
            .is_some_and(|e| e.status == EventStatus::SourceOnly);
        if paired + usize::from(node) != 1 {
            return Err(format!(
                "instance event {} appears {} times",
                i.id,
                paired + usize::from(node)
            ));
        }
    }
    let expected = schema.events.len() + instance.events.len() - g.match_pairs.len();
    if g.events.len() != expected {
        return Err(format!("{} events, expected {expected}", g.events.len()));
    }
    Ok(())
}
