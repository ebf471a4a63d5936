use super::constraints::constraints_listing;
use super::{objects_listing, AuditRecord, Constraint, Relation, SceneSpec, Stage};
use crate::model_provider::{json_check, Provider, ProviderRequest, RequestKind};
use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use serde::Deserialize;
use serde_json::json;
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, Clone, Deserialize)]
struct OrderReply {
    order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderOutcome {
    /// Every slot id exactly once, anchors before what rests on them.
    pub order: Vec<String>,
    pub warnings: Vec<String>,
    /// `on_top_of` cycles found and broken, as slot id lists.
    pub cycles: Vec<Vec<String>>,
    /// The provider failed; input order was used.
    pub degraded: bool,
    pub audit: Vec<AuditRecord>,
}

/// Repairs a proposed order into a permutation of the slots in which every
/// `on_top_of` anchor precedes its subject.
///
/// Unknown and repeated ids are dropped, missing slots are appended in
/// input order. Among slots whose anchors are all placed, the one earliest
/// in the proposal goes next. When none is free, the slots left form at
/// least one cycle; the earliest of them in input order goes next and the
/// cycle is reported.
pub fn resolve_order(
    spec: &SceneSpec,
    constraints: &[Constraint],
    proposed: &[String],
) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let mut warnings = Vec::new();
    let input_rank: HashMap<&str, usize> = spec.slots.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let mut priority: Vec<&str> = Vec::new();
    for id in proposed {
        match input_rank.get_key_value(id.as_str()) {
            Some((&known, _)) if seen.insert(known) => priority.push(known),
            Some(_) => warnings.push(format!("order lists {id} more than once")),
            None => warnings.push(format!("order names unknown slot {id:?}")),
        }
    }
    for s in &spec.slots {
        if seen.insert(s.id.as_str()) {
            warnings.push(format!("order omits {}; appended", s.id));
            priority.push(&s.id);
        }
    }
    let rank: HashMap<&str, usize> = priority.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for id in &priority {
        graph.add_node(id);
    }
    for c in constraints {
        if let Relation::OnTopOf { anchor } = &c.relation {
            if let (Some((&a, _)), Some((&s, _))) = (
                input_rank.get_key_value(anchor.as_str()),
                input_rank.get_key_value(c.subject.as_str()),
            ) {
                if a != s {
                    graph.add_edge(a, s, ());
                }
            }
        }
    }

    let mut cycles = Vec::new();
    let mut order: Vec<String> = Vec::with_capacity(priority.len());
    while graph.node_count() > 0 {
        let free = graph
            .nodes()
            .filter(|n| graph.neighbors_directed(n, petgraph::Incoming).next().is_none())
            .min_by_key(|n| rank[n]);
        let next = match free {
            Some(n) => n,
            None => {
                let n = graph.nodes().min_by_key(|n| input_rank[n]).expect("graph is not empty");
                let mut cycle: Vec<&str> = tarjan_scc(&graph)
                    .into_iter()
                    .find(|c| c.contains(&n))
                    .unwrap_or_else(|| vec![n]);
                cycle.sort_by_key(|id| input_rank[id]);
                warnings.push(format!("on_top_of cycle among {cycle:?}; placing {n} first"));
                cycles.push(cycle.into_iter().map(str::to_string).collect());
                n
            }
        };
        graph.remove_node(next);
        order.push(next.to_string());
    }
    (order, warnings, cycles)
}

/// Asks the provider for a placement order, then repairs it with
/// [`resolve_order`]. A provider failure falls back to input order.
pub fn order_slots(spec: &SceneSpec, constraints: &[Constraint], provider: &Provider) -> OrderOutcome {
    let input: Vec<String> = spec.slots.iter().map(|s| s.id.clone()).collect();
    let finish = |proposed: &[String], mut warnings: Vec<String>, degraded, audit| {
        let (order, w, cycles) = resolve_order(spec, constraints, proposed);
        warnings.extend(w);
        OrderOutcome {
            order,
            warnings,
            cycles,
            degraded,
            audit,
        }
    };
    if spec.slots.len() < 2 {
        return finish(&input, vec![], false, vec![]);
    }
    let frame = provider.frame();
    let ctx = BTreeMap::from([
        ("prompt".to_string(), spec.prompt.clone()),
        ("objects".to_string(), objects_listing(spec, frame)),
        ("constraints".to_string(), constraints_listing(constraints, frame)),
    ]);
    let prompt = match provider.render_prompt("order", &ctx) {
        Ok(p) => p,
        Err(e) => return finish(&input, vec![format!("ordering skipped: {e}")], true, vec![]),
    };
    let reply = ProviderRequest::new(RequestKind::Order, prompt.clone(), vec![])
        .and_then(|r| provider.complete_checked(&r, json_check::<OrderReply>));
    match reply {
        Ok(reply) => {
            let proposed: OrderReply = reply.json().expect("checked reply decodes");
            let mut outcome = finish(&proposed.order, vec![], false, vec![]);
            outcome.audit.push(AuditRecord::from_reply(
                Stage::Order,
                None,
                &reply,
                json!({"proposed": proposed.order, "order": outcome.order, "cycles": outcome.cycles}),
            ));
            outcome
        }
        Err(e) => {
            let audit = vec![AuditRecord::from_error(Stage::Order, None, &prompt, &e)];
            finish(&input, vec![format!("ordering failed, using input order: {e}")], true, audit)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec3};
    use crate::layout::{ConstraintSource, Slot};

    fn spec(ids: &[&str]) -> SceneSpec {
        let slots = ids
            .iter()
            .map(|id| Slot {
                id: id.to_string(),
                asset_id: "a".into(),
                display_name: id.to_string(),
                size: Vec3::splat(1.0),
            })
            .collect();
        SceneSpec::new("p", Aabb::room(5.0, 5.0, 3.0).unwrap(), slots).unwrap()
    }

    fn on(subject: &str, anchor: &str) -> Constraint {
        Constraint::new(
            subject,
            Relation::OnTopOf {
                anchor: anchor.into(),
            },
            ConstraintSource::Explicit,
        )
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn anchor_moves_before_subject() {
        let s = spec(&["plate", "table"]);
        let (order, _, cycles) = resolve_order(&s, &[on("plate", "table")], &ids(&["plate", "table"]));
        assert_eq!(order, ids(&["table", "plate"]));
        assert!(cycles.is_empty());
    }

    #[test]
    fn identity_without_constraints() {
        let s = spec(&["a", "b", "c"]);
        let (order, warnings, _) = resolve_order(&s, &[], &ids(&["a", "b", "c"]));
        assert_eq!(order, ids(&["a", "b", "c"]));
        assert!(warnings.is_empty());
    }

    #[test]
    fn cycle_is_broken_by_input_order() {
        let s = spec(&["x", "a", "b"]);
        let (order, _, cycles) = resolve_order(&s, &[on("a", "b"), on("b", "a")], &ids(&["b", "a", "x"]));
        assert_eq!(order, ids(&["x", "a", "b"]));
        assert_eq!(cycles, vec![ids(&["a", "b"])]);
    }

    #[test]
    fn missing_and_unknown_ids() {
        let s = spec(&["a", "b", "c"]);
        let (order, warnings, _) = resolve_order(&s, &[], &ids(&["c", "piano", "c"]));
        assert_eq!(order, ids(&["c", "a", "b"]));
        assert_eq!(warnings.len(), 4);
    }
}
