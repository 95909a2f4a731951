//! Finite-memory strategies as explicit Moore machines, and their
//! construction from a symbolic strategy description.

use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use num_traits::One;
use serde_json::{json, Value};

use crate::error::StrategyError;
use crate::graph::MemorylessStrategy;
use crate::model::{ActionId, EnvSet, Memdp, StateId};
use crate::numeric::{fmt_rat, Rat};

/// Default bound on the number of memory states of a flattened strategy.
pub const DEFAULT_MEMORY_CAP: usize = 1_000_000;

/// One entry of an output distribution. When `memory` is set, the next
/// memory state is chosen together with the action and the update table is
/// bypassed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub action: ActionId,
    pub prob: Rat,
    pub memory: Option<usize>,
}

impl Choice {
    pub fn pure(action: ActionId) -> Choice {
        Choice {
            action,
            prob: Rat::one(),
            memory: None,
        }
    }
}

/// Explicit finite-memory strategy.
#[derive(Clone, Debug, Default)]
pub struct StrategyAutomaton {
    pub labels: Vec<String>,
    pub initial: usize,
    output: HashMap<(usize, StateId), Vec<Choice>>,
    update: HashMap<(usize, StateId, ActionId, StateId), usize>,
}

impl StrategyAutomaton {
    pub fn new(num_memory: usize, initial: usize) -> StrategyAutomaton {
        StrategyAutomaton {
            labels: (0..num_memory).map(|i| i.to_string()).collect(),
            initial,
            ..Default::default()
        }
    }

    pub fn memoryless(s: &MemorylessStrategy) -> StrategyAutomaton {
        let mut out = StrategyAutomaton::new(1, 0);
        for (&q, &a) in &s.choice {
            out.set_output(0, q, vec![Choice::pure(a)]);
        }
        out
    }

    pub fn num_memory(&self) -> usize {
        self.labels.len()
    }

    pub fn set_output(&mut self, m: usize, q: StateId, choices: Vec<Choice>) {
        self.output.insert((m, q), choices);
    }

    pub fn set_update(&mut self, m: usize, q: StateId, a: ActionId, t: StateId, next: usize) {
        self.update.insert((m, q, a, t), next);
    }

    pub fn output(&self, m: usize, q: StateId) -> Option<&[Choice]> {
        self.output.get(&(m, q)).map(Vec::as_slice)
    }

    /// Output at `(m, q)`, falling back to the smallest enabled action.
    pub fn output_or_default(&self, model: &Memdp, m: usize, q: StateId) -> Vec<Choice> {
        match self.output(m, q) {
            Some(c) if !c.is_empty() => c.to_vec(),
            _ => vec![Choice::pure(model.enabled(q)[0])],
        }
    }

    /// Memory after `(q, a, t)`; unchanged when the tuple is not in the table.
    pub fn next(&self, m: usize, q: StateId, a: ActionId, t: StateId) -> usize {
        self.update.get(&(m, q, a, t)).copied().unwrap_or(m)
    }

    pub fn is_pure(&self) -> bool {
        self.output.values().all(|c| c.len() == 1)
    }

    pub fn num_outputs(&self) -> usize {
        self.output.len()
    }

    pub fn num_updates(&self) -> usize {
        self.update.len()
    }

    /// Checks that every output is a distribution over enabled actions.
    pub fn is_well_formed(&self, model: &Memdp) -> bool {
        self.output.iter().all(|(&(m, q), c)| {
            m < self.num_memory()
                && q < model.num_states()
                && c.iter().map(|x| x.prob.clone()).sum::<Rat>().is_one()
                && c.iter().all(|x| model.is_enabled(q, x.action) && x.memory.is_none_or(|i| i < self.num_memory()))
        })
    }

    pub fn to_json(&self, model: &Memdp) -> Value {
        let mut outputs: Vec<_> = self.output.iter().collect();
        outputs.sort_by_key(|(k, _)| **k);
        let mut updates: Vec<_> = self.update.iter().collect();
        updates.sort_by_key(|(k, _)| **k);
        json!({
            "memory": self.labels,
            "initial": self.initial,
            "pure": self.is_pure(),
            "output": outputs.iter().map(|(&(m, q), c)| json!({
                "memory": m,
                "state": model.state_name(q),
                "choices": c.iter().map(|x| {
                    let mut o = json!({"action": model.action_name(x.action), "prob": fmt_rat(&x.prob)});
                    if let Some(i) = x.memory {
                        o["next_memory"] = json!(i);
                    }
                    o
                }).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "update": updates.iter().map(|(&(m, q, a, t), n)| json!([m, model.state_name(q), model.action_name(a), model.state_name(t), n])).collect::<Vec<_>>(),
        })
    }
}

/// Symbolic pure strategy: a memory type with an action per (memory, state)
/// and a deterministic update.
pub trait StrategyLogic {
    type Mem: Clone + Eq + Hash + Debug;
    fn start(&self) -> Self::Mem;
    fn act(&self, m: &Self::Mem, q: StateId) -> ActionId;
    fn update(&self, m: &Self::Mem, q: StateId, a: ActionId, t: StateId) -> Self::Mem;
}

/// Explores every (memory, state) pair reachable from `starts` in the
/// environments of `k` and records the explicit machine.
pub fn flatten<L: StrategyLogic>(
    logic: &L,
    model: &Memdp,
    k: EnvSet,
    starts: &[StateId],
    cap: usize,
) -> Result<StrategyAutomaton, StrategyError> {
    let mut ids: HashMap<L::Mem, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut intern = |m: L::Mem, labels: &mut Vec<String>| -> Result<usize, StrategyError> {
        if let Some(&i) = ids.get(&m) {
            return Ok(i);
        }
        if ids.len() >= cap {
            return Err(StrategyError::MemoryBudgetExceeded { limit: cap });
        }
        let i = ids.len();
        labels.push(format!("{m:?}"));
        ids.insert(m, i);
        Ok(i)
    };
    let m0 = logic.start();
    let i0 = intern(m0.clone(), &mut labels)?;
    let mut aut = StrategyAutomaton::new(0, i0);
    let mut seen: HashMap<(usize, StateId), ()> = HashMap::new();
    let mut queue = VecDeque::new();
    for &q in starts {
        if seen.insert((i0, q), ()).is_none() {
            queue.push_back((m0.clone(), i0, q));
        }
    }
    while let Some((m, i, q)) = queue.pop_front() {
        let a = logic.act(&m, q);
        aut.set_output(i, q, vec![Choice::pure(a)]);
        let mut succ: Vec<StateId> = Vec::new();
        for e in k.iter() {
            succ.extend(model.dist(e, q, a).support());
        }
        succ.sort_unstable();
        succ.dedup();
        for t in succ {
            let m2 = logic.update(&m, q, a, t);
            let j = intern(m2.clone(), &mut labels)?;
            if j != i {
                aut.set_update(i, q, a, t, j);
            }
            if seen.insert((j, t), ()).is_none() {
                queue.push_back((m2, j, t));
            }
        }
    }
    aut.labels = labels;
    Ok(aut)
}
