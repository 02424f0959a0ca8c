//! Structural grouping of quadruples into potential-conflict sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::memory::{normalize_entity, QuadId, Quadruple, TemporalKg};

/// Rule application order: most specific key first.
pub const RULE_ORDER: [u8; 5] = [2, 1, 3, 4, 5];

pub const DEFAULT_ATTRIBUTE_ACTIONS: [&str; 7] =
    ["is", "are", "was", "characterized by", "has attribute", "seems", "becomes"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingPolicy {
    /// A quadruple placed in a group is unavailable to later rules.
    #[default]
    Consume,
    /// Every rule sees every quadruple; groups may overlap.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingOptions {
    pub policy: GroupingPolicy,
    /// Leave chapter-0 (premise) quadruples out of the analysis.
    pub exclude_premise: bool,
    /// Actions that make a quadruple an attribute statement for rule 5.
    pub attribute_actions: Vec<String>,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self {
            policy: GroupingPolicy::Consume,
            exclude_premise: false,
            attribute_actions: DEFAULT_ATTRIBUTE_ACTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadrupleGroup {
    pub rule_id: u8,
    /// Sorted by (chapter, id).
    pub members: Vec<QuadId>,
    /// Normalized values of the shared key elements.
    pub key: Vec<String>,
}

fn norm(q: &Quadruple) -> [String; 3] {
    [
        normalize_entity(&q.triple.subject),
        normalize_entity(&q.triple.action),
        normalize_entity(&q.triple.object),
    ]
}

/// Shared key of a quadruple under `rule`, or `None` if the rule does not
/// apply to it.
pub fn rule_key(rule: u8, q: &Quadruple, attribute_actions: &BTreeSet<String>) -> Option<Vec<String>> {
    let [s, a, o] = norm(q);
    match rule {
        1 => Some(vec![s, a]),
        2 => Some(vec![s, a, o]),
        3 => Some(vec![a, o]),
        4 => Some(vec![s, o]),
        5 => attribute_actions.contains(&a).then(|| vec![s]),
        _ => None,
    }
}

/// The element(s) that must take at least two distinct values in a group.
pub fn varying(rule: u8, q: &Quadruple) -> String {
    let [s, a, o] = norm(q);
    match rule {
        1 => o,
        2 => q.chapter.to_string(),
        3 => s,
        4 => a,
        _ => format!("{a}\u{1f}{o}"),
    }
}

pub(crate) fn considered(kg: &TemporalKg, options: &GroupingOptions) -> Vec<QuadId> {
    kg.iter()
        .filter(|(_, q)| !(options.exclude_premise && q.chapter == 0))
        .map(|(id, _)| id)
        .collect()
}

/// Groups quadruples by rules 2, 1, 3, 4, 5 in that order.
pub fn group_quadruples(kg: &TemporalKg, options: &GroupingOptions) -> Vec<QuadrupleGroup> {
    let attrs: BTreeSet<String> = options.attribute_actions.iter().map(|a| normalize_entity(a)).collect();
    let pool = considered(kg, options);
    let mut consumed: BTreeSet<QuadId> = BTreeSet::new();
    let mut groups = Vec::new();
    for rule in RULE_ORDER {
        let mut buckets: BTreeMap<Vec<String>, Vec<QuadId>> = BTreeMap::new();
        for &id in &pool {
            if consumed.contains(&id) {
                continue;
            }
            let q = kg.get(id).expect("pool ids exist");
            if let Some(key) = rule_key(rule, q, &attrs) {
                buckets.entry(key).or_default().push(id);
            }
        }
        for (key, mut members) in buckets {
            let distinct: BTreeSet<String> = members.iter().map(|&id| varying(rule, kg.get(id).unwrap())).collect();
            if members.len() < 2 || distinct.len() < 2 {
                continue;
            }
            members.sort_by_key(|&id| (kg.get(id).unwrap().chapter, id));
            if options.policy == GroupingPolicy::Consume {
                consumed.extend(members.iter().copied());
            }
            groups.push(QuadrupleGroup { rule_id: rule, members, key });
        }
    }
    groups
}

fn python_str(s: &str, prefer: char) -> String {
    let quote = if prefer == '\'' && s.contains('\'') && !s.contains('"') { '"' } else { prefer };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        if c == quote || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push(quote);
    out
}

/// Attribute phrase used in rule-5 lists.
pub fn attribute_phrase(q: &Quadruple) -> String {
    q.triple.sentence()
}

/// Bracketed list handed to the description prompt:
/// `[("Bob", "hit", "Jane", 1), ...]` for rules 1-4 and
/// `[['garden is small', 1], ...]` for rule 5.
pub fn serialize_members(kg: &TemporalKg, rule_id: u8, members: &[QuadId]) -> String {
    let items: Vec<String> = members
        .iter()
        .map(|&id| {
            let q = kg.get(id).expect("member ids exist");
            if rule_id == 5 {
                format!("[{},{}]", python_str(&attribute_phrase(q), '\''), q.chapter)
            } else {
                format!(
                    "({}, {}, {}, {})",
                    python_str(&q.triple.subject, '"'),
                    python_str(&q.triple.action, '"'),
                    python_str(&q.triple.object, '"'),
                    q.chapter
                )
            }
        })
        .collect();
    let sep = if rule_id == 5 { "," } else { ", " };
    format!("[{}]", items.join(sep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::Triple;
    use proptest::prelude::*;

    fn kg_of(quads: &[(&str, &str, &str, u32)]) -> TemporalKg {
        let mut kg = TemporalKg::new();
        for (s, a, o, c) in quads {
            kg.insert(Triple::new(s, a, o).unwrap(), *c).expect("fixture quads are distinct");
        }
        kg
    }

    fn member_sets(groups: &[QuadrupleGroup]) -> BTreeSet<(u8, Vec<QuadId>)> {
        groups.iter().map(|g| (g.rule_id, g.members.clone())).collect()
    }

    /// Independent enumerator: for every still-free quadruple, scan all other
    /// free quadruples for key equality; a key class with two distinct
    /// varying values becomes a group.
    fn brute_force(kg: &TemporalKg, policy: GroupingPolicy) -> BTreeSet<(u8, Vec<QuadId>)> {
        let attrs: BTreeSet<String> = DEFAULT_ATTRIBUTE_ACTIONS.iter().map(|s| s.to_string()).collect();
        let quads: Vec<(QuadId, &Quadruple)> = kg.iter().collect();
        let mut free: Vec<bool> = vec![true; quads.len()];
        let mut out = BTreeSet::new();
        for rule in [2u8, 1, 3, 4, 5] {
            let snapshot = free.clone();
            let mut seen_class: BTreeSet<Vec<QuadId>> = BTreeSet::new();
            for (i, qi) in &quads {
                if !snapshot[*i] {
                    continue;
                }
                let Some(ki) = rule_key(rule, qi, &attrs) else { continue };
                let class: Vec<QuadId> = quads
                    .iter()
                    .filter(|(j, qj)| snapshot[*j] && rule_key(rule, qj, &attrs).as_ref() == Some(&ki))
                    .map(|(j, _)| *j)
                    .collect();
                let values: BTreeSet<String> = class.iter().map(|&j| varying(rule, quads[j].1)).collect();
                if values.len() >= 2 && seen_class.insert(class.clone()) {
                    let mut sorted = class.clone();
                    sorted.sort_by_key(|&j| (quads[j].1.chapter, j));
                    out.insert((rule, sorted));
                    if policy == GroupingPolicy::Consume {
                        for j in class {
                            free[j] = false;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn same_fact_in_two_chapters_is_rule_2() {
        let kg = kg_of(&[("Bob", "hit", "Jane", 1), ("Bob", "hit", "Jane", 3)]);
        let g = group_quadruples(&kg, &GroupingOptions::default());
        assert_eq!(member_sets(&g), BTreeSet::from([(2, vec![0, 1])]));
    }

    #[test]
    fn varying_objects_is_rule_1() {
        let kg = kg_of(&[("Bob", "hit", "Jane", 1), ("Bob", "hit", "Lily", 1), ("Bob", "hit", "Mary", 2)]);
        let g = group_quadruples(&kg, &GroupingOptions::default());
        assert_eq!(member_sets(&g), BTreeSet::from([(1, vec![0, 1, 2])]));
        assert_eq!(g[0].key, vec!["bob", "hit"]);
    }

    #[test]
    fn varying_actions_is_rule_4() {
        let kg = kg_of(&[("Lily", "hate", "Jane", 2), ("Lily", "love", "Jane", 1)]);
        let g = group_quadruples(&kg, &GroupingOptions::default());
        // members ordered by chapter
        assert_eq!(member_sets(&g), BTreeSet::from([(4, vec![1, 0])]));
    }

    #[test]
    fn attribute_statements_are_rule_5() {
        let kg = kg_of(&[
            ("garden", "is", "small", 1),
            ("garden", "is", "beautiful", 2),
            ("garden", "is", "unfinished", 3),
            ("garden", "hides", "key", 3),
        ]);
        let g = group_quadruples(&kg, &GroupingOptions::default());
        // rule 1 takes the three "is" statements first (same subject and action)
        assert_eq!(member_sets(&g), BTreeSet::from([(1, vec![0, 1, 2])]));
        let kg = kg_of(&[("garden", "is", "small", 1), ("garden", "seems", "beautiful", 2)]);
        let g = group_quadruples(&kg, &GroupingOptions::default());
        assert_eq!(member_sets(&g), BTreeSet::from([(5, vec![0, 1])]));
    }

    #[test]
    fn premise_exclusion() {
        let kg = kg_of(&[("Bob", "hit", "Jane", 0), ("Bob", "hit", "Jane", 3)]);
        let opts = GroupingOptions { exclude_premise: true, ..Default::default() };
        assert!(group_quadruples(&kg, &opts).is_empty());
    }

    #[test]
    fn serialization_forms() {
        let kg = kg_of(&[("Bob", "hit", "Jane", 1), ("Bob", "hit", "Lily", 1)]);
        assert_eq!(
            serialize_members(&kg, 1, &[0, 1]),
            r#"[("Bob", "hit", "Jane", 1), ("Bob", "hit", "Lily", 1)]"#
        );
        let kg = kg_of(&[("garden", "is", "small", 1), ("Anna", "is", "grandmother's heir", 2)]);
        assert_eq!(
            serialize_members(&kg, 5, &[0, 1]),
            r#"[['garden is small',1],["Anna is grandmother's heir",2]]"#
        );
    }

    #[test]
    fn overlap_policy_lets_rules_share_members() {
        let kg = kg_of(&[("Bob", "hit", "Jane", 1), ("Bob", "hit", "Jane", 3), ("Bob", "hit", "Lily", 2)]);
        let consume = group_quadruples(&kg, &GroupingOptions::default());
        assert_eq!(member_sets(&consume), BTreeSet::from([(2, vec![0, 1])]));
        let overlap = group_quadruples(&kg, &GroupingOptions { policy: GroupingPolicy::Overlap, ..Default::default() });
        assert_eq!(member_sets(&overlap), BTreeSet::from([(2, vec![0, 1]), (1, vec![0, 2, 1])]));
        assert_eq!(member_sets(&overlap), brute_force(&kg, GroupingPolicy::Overlap));
    }

    fn arb_kg() -> impl Strategy<Value = TemporalKg> {
        let ents = ["Bob", "Jane", "Lily", "garden", "Mary"];
        let acts = ["hit", "loves", "is", "seems", "hate"];
        proptest::collection::vec((0usize..5, 0usize..5, 0usize..5, 0u32..4), 0..30).prop_map(move |ops| {
            let mut kg = TemporalKg::new();
            for (s, a, o, c) in ops {
                kg.insert(Triple::new(ents[s], acts[a], ents[o]).unwrap(), c);
            }
            kg
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn grouping_matches_brute_force(kg in arb_kg()) {
            let groups = group_quadruples(&kg, &GroupingOptions::default());
            prop_assert_eq!(member_sets(&groups), brute_force(&kg, GroupingPolicy::Consume));
        }

        #[test]
        fn groups_partition_and_are_valid(kg in arb_kg()) {
            let attrs: BTreeSet<String> = DEFAULT_ATTRIBUTE_ACTIONS.iter().map(|s| s.to_string()).collect();
            let groups = group_quadruples(&kg, &GroupingOptions::default());
            let mut seen = BTreeSet::new();
            for g in &groups {
                prop_assert!(g.members.len() >= 2);
                let values: BTreeSet<String> = g.members.iter().map(|&id| varying(g.rule_id, kg.get(id).unwrap())).collect();
                prop_assert!(values.len() >= 2);
                for &id in &g.members {
                    prop_assert!(seen.insert(id), "quadruple {} in two groups", id);
                    prop_assert_eq!(rule_key(g.rule_id, kg.get(id).unwrap(), &attrs), Some(g.key.clone()));
                }
                let order: Vec<(u32, QuadId)> = g.members.iter().map(|&id| (kg.get(id).unwrap().chapter, id)).collect();
                let mut sorted = order.clone();
                sorted.sort();
                prop_assert_eq!(order, sorted);
            }
        }
    }
}
