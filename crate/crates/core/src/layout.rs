//! Deterministic graph-panel layout.
//!
//! Hierarchy runs top to bottom (one row of [`ROW_HEIGHT`] per depth) and
//! time runs left to right. Every rendered leaf, and every collapsed parent,
//! takes the next slot of width [`SLOT_WIDTH`]; an expanded parent sits at the
//! midpoint of its children. Sibling groups are ordered topologically by
//! their in-group temporal edges, ties by stored position. Edges between
//! groups are drawn but do not move anything.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::model::{group_topological_order, EventStatus, GateKind, InstantiatedGraph};

pub const ROW_HEIGHT: f64 = 120.0;
pub const SLOT_WIDTH: f64 = 160.0;

/// Parent events whose children are shown.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpansionState {
    pub expanded: BTreeSet<String>,
}

impl ExpansionState {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            expanded: ids.into_iter().map(Into::into).collect(),
        }
    }

    /// Every parent of the graph expanded.
    pub fn all(g: &InstantiatedGraph) -> Self {
        Self {
            expanded: g
                .events
                .values()
                .filter(|e| e.is_parent())
                .map(|e| e.id.clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Circle,
    Diamond,
    GateAnd,
    GateOr,
    GateXor,
}

impl From<GateKind> for Shape {
    fn from(k: GateKind) -> Self {
        match k {
            GateKind::And => Shape::GateAnd,
            GateKind::Or => Shape::GateOr,
            GateKind::Xor => Shape::GateXor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Hierarchy,
    Temporal,
    Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutNode {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub shape: Shape,
    /// `None` for gate glyphs.
    pub status: Option<EventStatus>,
    pub dimmed: bool,
}

impl LayoutNode {
    pub fn is_gate(&self) -> bool {
        self.status.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub nodes: Vec<LayoutNode>,
    pub edges: Vec<LayoutEdge>,
    pub bounds: Bounds,
}

impl Layout {
    pub fn node(&self, id: &str) -> Option<&LayoutNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn recompute_bounds(&mut self) {
        let mut it = self.nodes.iter();
        let Some(first) = it.next() else {
            self.bounds = Bounds::default();
            return;
        };
        let mut b = Bounds {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for n in it {
            b.min_x = b.min_x.min(n.x);
            b.min_y = b.min_y.min(n.y);
            b.max_x = b.max_x.max(n.x);
            b.max_y = b.max_y.max(n.y);
        }
        self.bounds = b;
    }
}

struct Placer<'g> {
    g: &'g InstantiatedGraph,
    st: &'g ExpansionState,
    nodes: Vec<LayoutNode>,
    edges: Vec<LayoutEdge>,
    next_slot: usize,
    errors: Diagnostics,
}

impl<'g> Placer<'g> {
    fn order(&mut self, parent: Option<&str>, members: &'g [String]) -> Vec<&'g str> {
        match group_topological_order(self.g, members) {
            Some(order) => order,
            None => {
                self.errors.push(Diagnostic::error(
                    Code::TemporalCycle,
                    parent.unwrap_or("<roots>"),
                    "sibling group has a temporal cycle and cannot be ordered",
                ));
                members.iter().map(String::as_str).collect()
            }
        }
    }

    /// Places `id` and its rendered subtree; returns its x.
    fn place(&mut self, id: &'g str, depth: usize) -> f64 {
        let ev = &self.g.events[id];
        let idx = self.nodes.len();
        self.nodes.push(LayoutNode {
            id: id.to_string(),
            x: 0.0,
            y: depth as f64 * ROW_HEIGHT,
            shape: if ev.is_parent() {
                Shape::Diamond
            } else {
                Shape::Circle
            },
            status: Some(ev.status),
            dimmed: false,
        });
        let x = if ev.is_parent() && self.st.expanded.contains(id) {
            let order = self.order(Some(id), &ev.children);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for c in order {
                if !self.g.events.contains_key(c) {
                    continue;
                }
                self.edges.push(LayoutEdge {
                    from: id.to_string(),
                    to: c.to_string(),
                    kind: EdgeKind::Hierarchy,
                });
                let cx = self.place(c, depth + 1);
                lo = lo.min(cx);
                hi = hi.max(cx);
            }
            (lo + hi) / 2.0
        } else {
            let x = self.next_slot as f64 * SLOT_WIDTH;
            self.next_slot += 1;
            x
        };
        self.nodes[idx].x = x;
        x
    }
}

/// Lays out the rendered part of `g`. With an emphasis set, event nodes
/// outside it are dimmed.
pub fn compute_layout(
    g: &InstantiatedGraph,
    st: &ExpansionState,
    emphasis: Option<&BTreeSet<String>>,
) -> Result<Layout, Diagnostics> {
    let mut bad = Diagnostics::default();
    for id in &st.expanded {
        if !g.events.get(id).is_some_and(|e| e.is_parent()) {
            bad.push(Diagnostic::error(
                Code::NotAParent,
                id,
                "expansion state names an event without children",
            ));
        }
    }
    if !bad.is_empty() {
        bad.sort();
        return Err(bad);
    }

    let mut p = Placer {
        g,
        st,
        nodes: Vec::new(),
        edges: Vec::new(),
        next_slot: 0,
        errors: Diagnostics::default(),
    };
    let roots = p.order(None, &g.roots);
    for r in roots {
        if g.events.contains_key(r) {
            p.place(r, 0);
        }
    }
    if !p.errors.is_empty() {
        p.errors.sort();
        return Err(p.errors);
    }
    let Placer {
        mut nodes,
        mut edges,
        ..
    } = p;

    let pos: HashMap<String, (f64, f64)> =
        nodes.iter().map(|n| (n.id.clone(), (n.x, n.y))).collect();
    for e in &g.temporal {
        if pos.contains_key(&e.before) && pos.contains_key(&e.after) {
            edges.push(LayoutEdge {
                from: e.before.clone(),
                to: e.after.clone(),
                kind: EdgeKind::Temporal,
            });
        }
    }
    for gate in &g.gates {
        let Some(&(_, sy)) = pos.get(&gate.source) else {
            continue;
        };
        let shown: Vec<(&str, f64, f64)> = gate
            .members
            .iter()
            .filter_map(|m| pos.get(m).map(|&(x, y)| (m.as_str(), x, y)))
            .collect();
        if shown.is_empty() {
            continue;
        }
        let lo = shown.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let hi = shown.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
        let my = shown.iter().map(|m| m.2).sum::<f64>() / shown.len() as f64;
        nodes.push(LayoutNode {
            id: gate.id.clone(),
            x: (lo + hi) / 2.0,
            y: (sy + my) / 2.0,
            shape: gate.kind.into(),
            status: None,
            dimmed: false,
        });
        edges.push(LayoutEdge {
            from: gate.source.clone(),
            to: gate.id.clone(),
            kind: EdgeKind::Gate,
        });
        for (m, _, _) in shown {
            edges.push(LayoutEdge {
                from: gate.id.clone(),
                to: m.to_string(),
                kind: EdgeKind::Gate,
            });
        }
    }
    if let Some(set) = emphasis {
        for n in nodes.iter_mut().filter(|n| !n.is_gate()) {
            n.dimmed = !set.contains(&n.id);
        }
    }
    let mut layout = Layout {
        nodes,
        edges,
        bounds: Bounds::default(),
    };
    layout.recompute_bounds();
    Ok(layout)
}

/// Flips `id` in the expansion state. Collapsing also collapses every
/// descendant.
pub fn toggle_expansion(
    g: &InstantiatedGraph,
    st: &ExpansionState,
    id: &str,
) -> Result<ExpansionState, Diagnostic> {
    if !g.events.get(id).is_some_and(|e| e.is_parent()) {
        return Err(Diagnostic::error(
            Code::NotAParent,
            id,
            "only parent events can be expanded",
        ));
    }
    let mut next = st.clone();
    if !next.expanded.remove(id) {
        next.expanded.insert(id.to_string());
    } else {
        for d in g.descendants(id) {
            next.expanded.remove(&d);
        }
    }
    Ok(next)
}

/// Scales a layout into the unit square, preserving aspect ratio and
/// coordinate order. A layout without extent is centered at (0.5, 0.5) with
/// the whole unit square as bounds.
pub fn minimap_view(l: &Layout) -> Result<Layout, Diagnostic> {
    if l.nodes.is_empty() {
        return Err(Diagnostic::error(
            Code::EmptyLayout,
            "layout",
            "nothing to show in the minimap",
        ));
    }
    let b = l.bounds;
    let extent = (b.max_x - b.min_x).max(b.max_y - b.min_y);
    let mut out = l.clone();
    if extent <= 0.0 {
        for n in &mut out.nodes {
            n.x = 0.5;
            n.y = 0.5;
        }
        out.bounds = Bounds {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        };
        return Ok(out);
    }
    let scale = 1.0 / extent;
    for n in &mut out.nodes {
        n.x = (n.x - b.min_x) * scale;
        n.y = (n.y - b.min_y) * scale;
    }
    out.recompute_bounds();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::TemporalEdge;

    #[test]
    fn outbreak_fully_expanded() {
        let g = outbreak();
        let l = compute_layout(&g, &ExpansionState::all(&g), None).unwrap();
        let x = |id: &str| l.node(id).unwrap().x;
        let y = |id: &str| l.node(id).unwrap().y;
        assert!(x("illness") < x("progression"));
        assert!(x("illness") < x("symptoms"));
        assert!(x("progression") < x("death-outcomes"));
        assert!(x("death-outcomes") < x("death"));
        assert!(x("death-outcomes") < x("funeral"));
        assert!(y("outbreak") < y("progression") && y("progression") < y("symptoms"));
        let and = l.node("death-outcomes/gate").unwrap();
        assert_eq!(and.shape, Shape::GateAnd);
        assert_eq!(and.x, (x("death") + x("funeral")) / 2.0);
        assert_eq!(l.node("outbreak").unwrap().shape, Shape::Diamond);
        assert_eq!(l.node("death").unwrap().shape, Shape::Circle);
        assert_eq!(l.nodes.iter().filter(|n| n.is_gate()).count(), 3);
    }

    #[test]
    fn collapsed_shows_roots_only() {
        let g = outbreak();
        let l = compute_layout(&g, &ExpansionState::default(), None).unwrap();
        assert_eq!(l.nodes.len(), 1);
        assert_eq!(l.nodes[0].shape, Shape::Diamond);
        assert_eq!((l.nodes[0].x, l.nodes[0].y), (0.0, 0.0));
    }

    #[test]
    fn not_a_parent_in_state() {
        let g = outbreak();
        let err = compute_layout(&g, &ExpansionState::new(["death"]), None).unwrap_err();
        assert!(err.has_code(Code::NotAParent));
    }

    #[test]
    fn cyclic_group_refused() {
        let mut g = flat(&["a", "b"]);
        g.temporal.insert(TemporalEdge::new("a", "b"));
        g.temporal.insert(TemporalEdge::new("b", "a"));
        let err = compute_layout(&g, &ExpansionState::default(), None).unwrap_err();
        assert!(err.has_code(Code::TemporalCycle));
    }

    #[test]
    fn emphasis_dims_others() {
        let g = outbreak();
        let set: BTreeSet<String> = ["illness".to_string()].into();
        let l = compute_layout(&g, &ExpansionState::new(["outbreak"]), Some(&set)).unwrap();
        for n in &l.nodes {
            if n.is_gate() {
                assert!(!n.dimmed);
            } else {
                assert_eq!(n.dimmed, n.id != "illness", "{}", n.id);
            }
        }
    }

    #[test]
    fn toggle_rules() {
        let g = outbreak();
        let st = toggle_expansion(&g, &ExpansionState::default(), "outbreak").unwrap();
        assert_eq!(st, ExpansionState::new(["outbreak"]));
        let st = ExpansionState::new(["outbreak", "progression"]);
        assert_eq!(
            toggle_expansion(&g, &st, "outbreak").unwrap(),
            ExpansionState::default()
        );
        assert_eq!(
            toggle_expansion(&g, &st, "death").unwrap_err().code,
            Code::NotAParent
        );
    }

    fn layout_with(points: &[(f64, f64)]) -> Layout {
        let mut l = Layout {
            nodes: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| LayoutNode {
                    id: i.to_string(),
                    x,
                    y,
                    shape: Shape::Circle,
                    status: Some(EventStatus::Predicted),
                    dimmed: false,
                })
                .collect(),
            ..Default::default()
        };
        l.recompute_bounds();
        l
    }

    #[test]
    fn minimap_scales_by_longer_side() {
        let l = layout_with(&[(0.0, 0.0), (400.0, 200.0), (100.0, 50.0)]);
        let m = minimap_view(&l).unwrap();
        assert_eq!(
            m.bounds,
            Bounds {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 1.0,
                max_y: 0.5
            }
        );
        assert_eq!((m.nodes[2].x, m.nodes[2].y), (0.25, 0.125));
    }

    #[test]
    fn minimap_degenerate_and_empty() {
        let m = minimap_view(&layout_with(&[(80.0, 0.0)])).unwrap();
        assert_eq!((m.nodes[0].x, m.nodes[0].y), (0.5, 0.5));
        assert_eq!(
            minimap_view(&Layout::default()).unwrap_err().code,
            Code::EmptyLayout
        );
    }
}
