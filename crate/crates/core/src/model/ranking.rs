use std::collections::{BTreeMap, BTreeSet};

use super::{EntityId, InstantiatedGraph};

/// Number of distinct events each entity fills any argument of, sorted by
/// count descending then entity id. Entities that fill nothing come last
/// with a count of zero.
pub fn entity_occurrence_counts(g: &InstantiatedGraph) -> Vec<(EntityId, usize)> {
    let mut events_of: BTreeMap<&str, BTreeSet<&str>> = g
        .entities
        .keys()
        .map(|k| (k.as_str(), BTreeSet::new()))
        .collect();
    for (eid, ev) in &g.events {
        for arg in &ev.arguments {
            if let Some(set) = events_of.get_mut(arg.filler.as_str()) {
                set.insert(eid);
            }
        }
    }
    let mut out: Vec<(EntityId, usize)> = events_of
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.len()))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Argument, EntityNode};
    use super::*;

    fn entity(id: &str) -> EntityNode {
        EntityNode {
            id: id.into(),
            name: id.into(),
            wd_qnode: None,
            provenance: vec![],
        }
    }

    #[test]
    fn no_arguments_all_zero_sorted_by_id() {
        let mut g = flat(&["e1"]);
        for id in ["z", "a", "m"] {
            g.entities.insert(id.into(), entity(id));
        }
        let got = entity_occurrence_counts(&g);
        assert_eq!(got, vec![("a".into(), 0), ("m".into(), 0), ("z".into(), 0)]);
    }

    #[test]
    fn cholera_ranks_first() {
        let mut g = flat(&["infection", "symptoms", "analysis", "diagnosis"]);
        for id in ["cholera", "disease-specialist", "dominica"] {
            g.entities.insert(id.into(), entity(id));
        }
        let arg = |role: &str, filler: &str, order| Argument {
            role: role.into(),
            filler: filler.into(),
            order,
        };
        for e in ["infection", "symptoms", "analysis"] {
            g.events
                .get_mut(e)
                .unwrap()
                .arguments
                .push(arg("disease", "cholera", 0));
        }
        // the same entity twice in one event still counts once
        g.events
            .get_mut("analysis")
            .unwrap()
            .arguments
            .push(arg("topic", "cholera", 1));
        g.events.get_mut("diagnosis").unwrap().arguments.push(arg(
            "agent",
            "disease-specialist",
            0,
        ));
        let got = entity_occurrence_counts(&g);
        assert_eq!(
            got,
            vec![
                ("cholera".into(), 3),
                ("disease-specialist".into(), 1),
                ("dominica".into(), 0)
            ]
        );
    }
}
