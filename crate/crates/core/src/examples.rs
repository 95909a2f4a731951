//! Builder for models assembled in code, and the reference example family.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::error::ModelError;
use crate::model::{validate, Memdp, RawModel};

/// Incremental construction of a model by names. Enabled actions are
/// inferred from the transitions given in the first environment.
#[derive(Clone, Debug)]
pub struct ModelBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    envs: Vec<String>,
    trans: BTreeMap<String, BTreeMap<String, BTreeMap<String, Vec<(String, String)>>>>,
    priority: BTreeMap<String, u32>,
    initial: String,
}

impl ModelBuilder {
    pub fn new(states: &[&str], actions: &[&str], envs: &[&str]) -> ModelBuilder {
        ModelBuilder {
            states: states.iter().map(|s| s.to_string()).collect(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
            envs: envs.iter().map(|s| s.to_string()).collect(),
            trans: BTreeMap::new(),
            priority: states.iter().map(|s| (s.to_string(), 1)).collect(),
            initial: states.first().map(|s| s.to_string()).unwrap_or_default(),
        }
    }

    pub fn initial(mut self, q: &str) -> Self {
        self.initial = q.to_string();
        self
    }

    pub fn priority(mut self, q: &str, p: u32) -> Self {
        self.priority.insert(q.to_string(), p);
        self
    }

    /// Distribution of `(q, a)` in environment `env`.
    pub fn trans(mut self, env: &str, q: &str, a: &str, dist: &[(&str, &str)]) -> Self {
        self.trans
            .entry(env.to_string())
            .or_default()
            .entry(q.to_string())
            .or_default()
            .insert(
                a.to_string(),
                dist.iter().map(|(t, p)| (t.to_string(), p.to_string())).collect(),
            );
        self
    }

    /// Same distribution in every environment.
    pub fn shared(mut self, q: &str, a: &str, dist: &[(&str, &str)]) -> Self {
        for e in self.envs.clone() {
            self = self.trans(&e, q, a, dist);
        }
        self
    }

    pub fn raw(&self) -> RawModel {
        let mut enabled = Map::new();
        let first = self.envs.first().and_then(|e| self.trans.get(e));
        for q in &self.states {
            let acts: Vec<Value> = self
                .actions
                .iter()
                .filter(|a| first.and_then(|t| t.get(q)).is_some_and(|m| m.contains_key(*a)))
                .map(|a| Value::String(a.clone()))
                .collect();
            enabled.insert(q.clone(), Value::Array(acts));
        }
        let mut environments = Map::new();
        for e in &self.envs {
            let mut per_state = Map::new();
            if let Some(t) = self.trans.get(e) {
                for q in &self.states {
                    if let Some(m) = t.get(q) {
                        let mut per_action = Map::new();
                        for a in &self.actions {
                            if let Some(d) = m.get(a) {
                                let dist: Map<String, Value> =
                                    d.iter().map(|(t, p)| (t.clone(), Value::String(p.clone()))).collect();
                                per_action.insert(a.clone(), Value::Object(dist));
                            }
                        }
                        per_state.insert(q.clone(), Value::Object(per_action));
                    }
                }
            }
            environments.insert(e.clone(), Value::Object(per_state));
        }
        RawModel {
            states: self.states.clone(),
            actions: self.actions.clone(),
            enabled,
            environments,
            priority: self.priority.iter().map(|(q, p)| (q.clone(), Value::from(*p))).collect(),
            initial: self.initial.clone(),
        }
    }

    pub fn build(&self) -> Result<Memdp, ModelError> {
        validate(&self.raw())
    }
}

/// Two environments that differ only in the probability of staying in `q1`.
/// Only `q3` is good; `q1` is limit-sure but not almost-sure winning.
pub fn fig3() -> Memdp {
    ModelBuilder::new(&["q1", "q2", "q3", "q4"], &["a", "b", "c"], &["e1", "e2"])
        .trans("e1", "q1", "c", &[("q1", "2/3"), ("q2", "1/3")])
        .trans("e2", "q1", "c", &[("q1", "1/3"), ("q2", "2/3")])
        .trans("e1", "q2", "a", &[("q3", "1")])
        .trans("e2", "q2", "a", &[("q4", "1")])
        .trans("e1", "q2", "b", &[("q4", "1")])
        .trans("e2", "q2", "b", &[("q3", "1")])
        .shared("q2", "c", &[("q1", "1")])
        .shared("q3", "a", &[("q3", "1")])
        .shared("q4", "a", &[("q4", "1")])
        .priority("q3", 0)
        .build()
        .expect("fig3 is well formed")
}

/// Two environments where leaving `{q1, q2}` reveals `e1` only sometimes.
pub fn fig4() -> Memdp {
    ModelBuilder::new(&["q1", "q2", "q3", "q4", "q5", "q6"], &["a", "b"], &["e1", "e2"])
        .shared("q1", "a", &[("q2", "1")])
        .trans("e1", "q2", "a", &[("q1", "1/2"), ("q5", "1/2")])
        .trans("e2", "q2", "a", &[("q1", "1")])
        .shared("q2", "b", &[("q3", "1")])
        .shared("q3", "a", &[("q4", "1")])
        .trans("e1", "q4", "a", &[("q3", "1/2"), ("q6", "1/2")])
        .trans("e2", "q4", "a", &[("q3", "1")])
        .shared("q5", "a", &[("q5", "1")])
        .shared("q6", "a", &[("q6", "1")])
        .priority("q3", 0)
        .priority("q4", 0)
        .priority("q5", 0)
        .build()
        .expect("fig4 is well formed")
}

/// Model with one winning non-distinguishing component `{q3, q4}`, one
/// losing component `{q5, q6}` and a pair `(q2, b)` that is an end-component
/// in `e2` only.
pub fn fig5() -> Memdp {
    ModelBuilder::new(&["q1", "q2", "q3", "q4", "q5", "q6"], &["a", "b"], &["e1", "e2"])
        .shared("q1", "a", &[("q2", "1/2"), ("q3", "1/2")])
        .shared("q2", "a", &[("q1", "1/2"), ("q2", "1/2")])
        .trans("e1", "q2", "b", &[("q2", "1/2"), ("q3", "1/2")])
        .trans("e2", "q2", "b", &[("q2", "1")])
        .shared("q3", "a", &[("q3", "1/2"), ("q4", "1/2")])
        .shared("q4", "a", &[("q3", "1/2"), ("q4", "1/2")])
        .trans("e1", "q4", "b", &[("q4", "1/3"), ("q5", "1/3"), ("q6", "1/3")])
        .trans("e2", "q4", "b", &[("q5", "1/2"), ("q6", "1/2")])
        .shared("q5", "a", &[("q6", "1")])
        .shared("q6", "a", &[("q5", "1")])
        .priority("q3", 0)
        .priority("q4", 0)
        .build()
        .expect("fig5 is well formed")
}

fn card_names(n: usize) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut states: Vec<String> = vec!["0".to_string()];
    states.extend((1..=n).map(|i| i.to_string()));
    states.push("win".to_string());
    states.push("lose".to_string());
    let mut actions = vec!["sample".to_string(), "back".to_string()];
    actions.extend((1..=n).map(|i| format!("guess{i}")));
    let envs = (1..=n).map(|i| format!("e{i}")).collect();
    (states, actions, envs)
}

fn card_model(n: usize, hub: impl Fn(usize) -> Vec<(String, String)>) -> Memdp {
    assert!(n >= 2, "card families need at least two cards");
    let (states, actions, envs) = card_names(n);
    let s: Vec<&str> = states.iter().map(String::as_str).collect();
    let a: Vec<&str> = actions.iter().map(String::as_str).collect();
    let e: Vec<&str> = envs.iter().map(String::as_str).collect();
    let mut b = ModelBuilder::new(&s, &a, &e).priority("win", 0).initial("0");
    for i in 1..=n {
        let env = format!("e{i}");
        let d = hub(i);
        let d: Vec<(&str, &str)> = d.iter().map(|(t, p)| (t.as_str(), p.as_str())).collect();
        b = b.trans(&env, "0", "sample", &d);
        for j in 1..=n {
            let target = if i == j { "win" } else { "lose" };
            b = b.trans(&env, "0", &format!("guess{j}"), &[(target, "1")]);
        }
    }
    for j in 1..=n {
        b = b.shared(&j.to_string(), "back", &[("0", "1")]);
    }
    b = b.shared("win", "back", &[("win", "1")]).shared("lose", "back", &[("lose", "1")]);
    b.build().expect("card model is well formed")
}

/// Environment `e_i` misses card `i`; sampling draws uniformly among the
/// others, and `guess_i` wins exactly in `e_i`.
pub fn missing_card(n: usize) -> Memdp {
    card_model(n, |i| {
        (1..=n)
            .filter(|&j| j != i)
            .map(|j| (j.to_string(), format!("1/{}", n - 1)))
            .collect()
    })
}

/// Environment `e_i` holds card `i` twice among `n + 1` cards.
pub fn duplicate_card(n: usize) -> Memdp {
    card_model(n, |i| {
        (1..=n)
            .map(|j| {
                let w = if j == i { 2 } else { 1 };
                (j.to_string(), format!("{w}/{}", n + 1))
            })
            .collect()
    })
}

/// One-shot choice: `a` wins only in `e1`, `b` only in `e2`.
pub fn matching_pennies() -> Memdp {
    ModelBuilder::new(&["s", "win", "lose"], &["a", "b"], &["e1", "e2"])
        .trans("e1", "s", "a", &[("win", "1")])
        .trans("e2", "s", "a", &[("lose", "1")])
        .trans("e1", "s", "b", &[("lose", "1")])
        .trans("e2", "s", "b", &[("win", "1")])
        .shared("win", "a", &[("win", "1")])
        .shared("lose", "a", &[("lose", "1")])
        .priority("win", 0)
        .build()
        .expect("pennies is well formed")
}

/// Single environment, one lottery: win with probability 3/5.
pub fn one_shot() -> Memdp {
    ModelBuilder::new(&["s", "win", "lose"], &["a"], &["e1"])
        .shared("s", "a", &[("win", "3/5"), ("lose", "2/5")])
        .shared("win", "a", &[("win", "1")])
        .shared("lose", "a", &[("lose", "1")])
        .priority("win", 0)
        .build()
        .expect("one-shot is well formed")
}

/// Looks an example up by family name.
pub fn by_name(name: &str, cards: usize) -> Option<Memdp> {
    Some(match name {
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig5" => fig5(),
        "missing-card" => missing_card(cards),
        "duplicate-card" => duplicate_card(cards),
        "pennies" | "matching-pennies" => matching_pennies(),
        "one-shot" => one_shot(),
        _ => return None,
    })
}

pub const FAMILIES: &[&str] = &[
    "fig3",
    "fig4",
    "fig5",
    "missing-card",
    "duplicate-card",
    "pennies",
    "one-shot",
];
