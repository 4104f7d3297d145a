//! Temporal relation restricted to sibling groups: cycle enumeration and
//! topological ordering.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{EventId, InstantiatedGraph};

/// Adjacency of the temporal relation restricted to `members`, self loops
/// dropped. Keys and neighbor sets are sorted.
fn group_adjacency<'a>(
    g: &'a InstantiatedGraph,
    members: &'a [EventId],
) -> BTreeMap<&'a str, BTreeSet<&'a str>> {
    let set: BTreeSet<&str> = members.iter().map(String::as_str).collect();
    let mut adj: BTreeMap<&str, BTreeSet<&str>> =
        set.iter().map(|m| (*m, BTreeSet::new())).collect();
    for e in &g.temporal {
        if e.before != e.after && set.contains(e.before.as_str()) && set.contains(e.after.as_str())
        {
            adj.get_mut(e.before.as_str())
                .unwrap()
                .insert(e.after.as_str());
        }
    }
    adj
}

/// Tarjan's strongly connected components; returns a component index per vertex.
fn scc_index<'a>(adj: &BTreeMap<&'a str, BTreeSet<&'a str>>) -> HashMap<&'a str, usize> {
    struct State<'a> {
        index: HashMap<&'a str, usize>,
        low: HashMap<&'a str, usize>,
        on_stack: BTreeSet<&'a str>,
        stack: Vec<&'a str>,
        comp: HashMap<&'a str, usize>,
        next: usize,
        ncomp: usize,
    }
    fn visit<'a>(v: &'a str, adj: &BTreeMap<&'a str, BTreeSet<&'a str>>, st: &mut State<'a>) {
        st.index.insert(v, st.next);
        st.low.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for &w in &adj[v] {
            if !st.index.contains_key(w) {
                visit(w, adj, st);
                let lw = st.low[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(w) {
                let iw = st.index[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(iw);
            }
        }
        if st.low[v] == st.index[v] {
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(w);
                st.comp.insert(w, st.ncomp);
                if w == v {
                    break;
                }
            }
            st.ncomp += 1;
        }
    }
    let mut st = State {
        index: HashMap::new(),
        low: HashMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        comp: HashMap::new(),
        next: 0,
        ncomp: 0,
    };
    for &v in adj.keys() {
        if !st.index.contains_key(v) {
            visit(v, adj, &mut st);
        }
    }
    st.comp
}

/// Every elementary cycle of one group's temporal relation, each starting at
/// its smallest vertex.
fn group_cycles(adj: &BTreeMap<&str, BTreeSet<&str>>) -> Vec<Vec<EventId>> {
    let comp = scc_index(adj);
    let mut size: HashMap<usize, usize> = HashMap::new();
    for c in comp.values() {
        *size.entry(*c).or_default() += 1;
    }
    let mut cycles = Vec::new();
    for &start in adj.keys() {
        let c = comp[start];
        if size[&c] < 2 {
            continue;
        }
        // DFS over vertices larger than `start` inside the same component.
        let mut path = vec![start];
        let mut on_path: BTreeSet<&str> = BTreeSet::from([start]);
        let mut iters: Vec<Vec<&str>> = vec![adj[start].iter().copied().collect()];
        while let Some(frontier) = iters.last_mut() {
            match frontier.pop() {
                None => {
                    iters.pop();
                    let v = path.pop().unwrap();
                    on_path.remove(v);
                }
                Some(w) if w == start => {
                    cycles.push(path.iter().map(|s| s.to_string()).collect());
                }
                Some(w) => {
                    if w > start && comp[w] == c && !on_path.contains(w) {
                        path.push(w);
                        on_path.insert(w);
                        iters.push(adj[w].iter().copied().collect());
                    }
                }
            }
        }
    }
    cycles
}

/// Every elementary cycle of the temporal relation restricted to each sibling
/// group. Each cycle is rotated to start at its smallest id; the list is
/// sorted. Empty exactly when every group is acyclic.
pub fn detect_temporal_cycles(g: &InstantiatedGraph) -> Vec<Vec<EventId>> {
    let mut all = BTreeSet::new();
    for group in g.sibling_groups() {
        let adj = group_adjacency(g, group.members);
        all.extend(group_cycles(&adj));
    }
    all.into_iter().collect()
}

/// True if the temporal relation restricted to `members` has a cycle.
pub fn has_group_cycle(g: &InstantiatedGraph, members: &[EventId]) -> bool {
    group_topological_order(g, members).is_none()
}

/// Topological order of `members` under the group-restricted temporal
/// relation, ties broken by stored position then id. `None` if cyclic.
pub fn group_topological_order<'a>(
    g: &InstantiatedGraph,
    members: &'a [EventId],
) -> Option<Vec<&'a str>> {
    let adj = group_adjacency(g, members);
    // first stored position of each distinct member
    let mut pos: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, m) in members.iter().enumerate() {
        pos.entry(m.as_str()).or_insert(i);
    }
    let mut indegree: BTreeMap<&str, usize> = pos.keys().map(|k| (*k, 0)).collect();
    for succ in adj.values() {
        for s in succ {
            *indegree.get_mut(s).unwrap() += 1;
        }
    }
    let mut ready: BTreeSet<(usize, &str)> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| (pos[k], *k))
        .collect();
    let mut out = Vec::with_capacity(pos.len());
    while let Some(first) = ready.pop_first() {
        let v = first.1;
        // hand back the caller's borrow
        out.push(members[pos[v]].as_str());
        for s in &adj[v] {
            let d = indegree.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert((pos[s], s));
            }
        }
    }
    (out.len() == pos.len()).then_some(out)
}
