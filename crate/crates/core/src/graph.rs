//! Support-level MDP algorithms: strongly connected components, maximal
//! end-components and almost-sure reachability, safety and parity.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{encode_objective, ActionId, EnvId, EnvSet, Memdp, Objective, StateId};

/// Tarjan's algorithm without recursion. Returns the components of the
/// subgraph induced by `active`, sinks first (reverse topological order).
pub fn tarjan(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if !active[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if !active[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Qualitative view of one transition function: for every state, the
/// available actions with their successor sets.
#[derive(Clone, Debug)]
pub struct SupportMdp {
    alive: Vec<bool>,
    acts: Vec<Vec<(ActionId, Vec<StateId>)>>,
}

impl SupportMdp {
    /// Environment `e` of `m` restricted to `mask`. An action is kept only if
    /// its support stays inside `mask` in every environment of `k`.
    pub fn env_view(m: &Memdp, e: EnvId, k: EnvSet, mask: &[bool]) -> SupportMdp {
        Self::build(m, k, mask, |q, idx| m.dist_at(e, q, idx).support().collect())
    }

    /// Union of the supports over `k`, restricted to `mask`.
    pub fn union_view(m: &Memdp, k: EnvSet, mask: &[bool]) -> SupportMdp {
        Self::build(m, k, mask, |q, idx| m.union_support(k, q, idx).into_iter().collect())
    }

    fn build(m: &Memdp, k: EnvSet, mask: &[bool], succ: impl Fn(StateId, usize) -> Vec<StateId>) -> SupportMdp {
        let n = m.num_states();
        let mut acts = vec![Vec::new(); n];
        for q in 0..n {
            if !mask[q] {
                continue;
            }
            for (idx, &a) in m.enabled(q).iter().enumerate() {
                if m.union_support(k, q, idx).iter().all(|&t| mask[t]) {
                    acts[q].push((a, succ(q, idx)));
                }
            }
        }
        SupportMdp {
            alive: mask.to_vec(),
            acts,
        }
    }

    pub fn num_states(&self) -> usize {
        self.alive.len()
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn actions(&self, q: StateId) -> &[(ActionId, Vec<StateId>)] {
        &self.acts[q]
    }

    pub fn successors(&self, q: StateId, a: ActionId) -> Option<&[StateId]> {
        self.acts[q].iter().find(|(b, _)| *b == a).map(|(_, s)| s.as_slice())
    }

    /// Copy keeping only the actions accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(StateId, ActionId) -> bool) -> SupportMdp {
        SupportMdp {
            alive: self.alive.clone(),
            acts: self
                .acts
                .iter()
                .enumerate()
                .map(|(q, v)| v.iter().filter(|(a, _)| keep(q, *a)).cloned().collect())
                .collect(),
        }
    }

    /// Largest subset of `safe` from which some action always stays inside.
    pub fn safety(&self, safe: &[bool]) -> Vec<bool> {
        let mut cur: Vec<bool> = (0..self.num_states()).map(|q| safe[q] && self.alive[q]).collect();
        loop {
            let mut changed = false;
            for q in 0..cur.len() {
                if cur[q] && !self.acts[q].iter().any(|(_, s)| s.iter().all(|&t| cur[t])) {
                    cur[q] = false;
                    changed = true;
                }
            }
            if !changed {
                return cur;
            }
        }
    }

    /// Smallest action staying inside `set`.
    pub fn safe_choice(&self, q: StateId, set: &[bool]) -> Option<ActionId> {
        self.acts[q]
            .iter()
            .find(|(_, s)| s.iter().all(|&t| set[t]))
            .map(|(a, _)| *a)
    }

    /// Almost-sure reachability of `target` inside `within`. Returns the
    /// winning states and, for non-target winners, an action that stays in
    /// the region and moves one attractor layer closer.
    pub fn as_reach(&self, within: &[bool], target: &[bool]) -> (Vec<bool>, Vec<Option<ActionId>>) {
        let n = self.num_states();
        let mut region: Vec<bool> = (0..n).map(|q| within[q] && self.alive[q]).collect();
        loop {
            let mut reach: Vec<bool> = (0..n).map(|q| region[q] && target[q]).collect();
            let mut choice = vec![None; n];
            loop {
                let mut layer = Vec::new();
                for q in 0..n {
                    if !region[q] || reach[q] {
                        continue;
                    }
                    let pick = self.acts[q].iter().find(|(_, s)| {
                        s.iter().all(|&t| region[t]) && s.iter().any(|&t| reach[t])
                    });
                    if let Some((a, _)) = pick {
                        layer.push((q, *a));
                    }
                }
                if layer.is_empty() {
                    break;
                }
                for (q, a) in layer {
                    reach[q] = true;
                    choice[q] = Some(a);
                }
            }
            if reach == region {
                return (region, choice);
            }
            region = reach;
        }
    }

    /// Maximal end-components inside `within`, sorted by smallest state.
    pub fn mecs(&self, within: &[bool]) -> Vec<Ec> {
        let n = self.num_states();
        let mut inside: Vec<bool> = (0..n).map(|q| within[q] && self.alive[q]).collect();
        let mut allowed: Vec<Vec<bool>> = self
            .acts
            .iter()
            .enumerate()
            .map(|(q, v)| v.iter().map(|(_, s)| inside[q] && s.iter().all(|&t| inside[t])).collect())
            .collect();
        loop {
            let mut changed = false;
            for q in 0..n {
                if inside[q] && !allowed[q].iter().any(|&b| b) {
                    inside[q] = false;
                    changed = true;
                }
            }
            if changed {
                for q in 0..n {
                    for (k, (_, s)) in self.acts[q].iter().enumerate() {
                        if allowed[q][k] && (!inside[q] || s.iter().any(|&t| !inside[t])) {
                            allowed[q][k] = false;
                        }
                    }
                }
            }
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|q| {
                    let mut v: Vec<usize> = self.acts[q]
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| allowed[q][*k])
                        .flat_map(|(_, (_, s))| s.iter().copied())
                        .collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                })
                .collect();
            let comps = tarjan(&adj, &inside);
            let mut comp_of = vec![usize::MAX; n];
            for (i, c) in comps.iter().enumerate() {
                for &q in c {
                    comp_of[q] = i;
                }
            }
            for q in 0..n {
                if !inside[q] {
                    continue;
                }
                for (k, (_, s)) in self.acts[q].iter().enumerate() {
                    if allowed[q][k] && s.iter().any(|&t| comp_of[t] != comp_of[q]) {
                        allowed[q][k] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                let mut out: Vec<Ec> = comps
                    .into_iter()
                    .map(|c| Ec {
                        pairs: c
                            .iter()
                            .map(|&q| {
                                let acts = self.acts[q]
                                    .iter()
                                    .enumerate()
                                    .filter(|(k, _)| allowed[q][*k])
                                    .map(|(_, (a, _))| *a)
                                    .collect();
                                (q, acts)
                            })
                            .collect(),
                    })
                    .collect();
                out.sort_by_key(|ec| ec.min_state());
                return out;
            }
        }
    }

    /// Almost-sure parity on the alive states, with a pure memoryless witness.
    pub fn as_parity(&self, priority: &[u32]) -> ParityResult {
        let n = self.num_states();
        let core = self.safety(&self.alive);
        let mut choice: Vec<Option<ActionId>> = vec![None; n];
        let mut in_ec = vec![false; n];
        let evens: BTreeSet<u32> = (0..n).filter(|&q| core[q]).map(|q| priority[q]).filter(|p| p % 2 == 0).collect();
        for p in evens {
            let sub: Vec<bool> = (0..n).map(|q| core[q] && priority[q] >= p).collect();
            for ec in self.mecs(&sub) {
                if !ec.pairs.keys().any(|&q| priority[q] == p) || ec.pairs.keys().any(|&q| in_ec[q]) {
                    continue;
                }
                let inner = self.filtered(|q, a| ec.pairs.get(&q).is_some_and(|v| v.contains(&a)));
                let members: Vec<bool> = (0..n).map(|q| ec.pairs.contains_key(&q)).collect();
                let goal: Vec<bool> = (0..n).map(|q| members[q] && priority[q] == p).collect();
                let (_, attract) = inner.as_reach(&members, &goal);
                for (&q, acts) in &ec.pairs {
                    in_ec[q] = true;
                    choice[q] = if goal[q] { Some(acts[0]) } else { attract[q] };
                }
            }
        }
        let (win, attract) = self.as_reach(&core, &in_ec);
        for q in 0..n {
            if win[q] && !in_ec[q] {
                choice[q] = attract[q];
            }
            if !win[q] {
                choice[q] = None;
            }
        }
        ParityResult { win, choice }
    }

    /// States lying in a bottom component of the chain induced by `choice`.
    pub fn chain_bottoms(&self, choice: &[Option<ActionId>], within: &[bool]) -> Vec<Option<usize>> {
        let n = self.num_states();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|q| match choice[q] {
                Some(a) if within[q] => self.successors(q, a).map(|s| s.to_vec()).unwrap_or_default(),
                _ => Vec::new(),
            })
            .collect();
        let active: Vec<bool> = (0..n).map(|q| within[q] && choice[q].is_some()).collect();
        let comps = tarjan(&adj, &active);
        let mut bottom = vec![None; n];
        for (i, c) in comps.iter().enumerate() {
            let set: BTreeSet<usize> = c.iter().copied().collect();
            if c.iter().all(|&q| adj[q].iter().all(|t| set.contains(t))) {
                for &q in c {
                    bottom[q] = Some(i);
                }
            }
        }
        bottom
    }
}

/// End-component found by [`SupportMdp::mecs`]: every state with its
/// retained actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ec {
    pub pairs: BTreeMap<StateId, Vec<ActionId>>,
}

impl Ec {
    pub fn min_state(&self) -> StateId {
        *self.pairs.keys().next().expect("nonempty end-component")
    }

    pub fn states(&self) -> BTreeSet<StateId> {
        self.pairs.keys().copied().collect()
    }

    pub fn with_scope(self, scope: EnvSet) -> EndComponent {
        EndComponent { pairs: self.pairs, scope }
    }
}

/// Set of state-action pairs closed and strongly connected in every
/// environment of `scope`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    pub pairs: BTreeMap<StateId, Vec<ActionId>>,
    pub scope: EnvSet,
}

impl EndComponent {
    pub fn states(&self) -> BTreeSet<StateId> {
        self.pairs.keys().copied().collect()
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.pairs.contains_key(&q)
    }

    pub fn is_trivial(&self) -> bool {
        self.pairs.len() == 1
    }

    /// Whether the pairs are closed and strongly connected in environment `e` of `m`.
    pub fn is_end_component_in(&self, m: &Memdp, e: EnvId) -> bool {
        let n = m.num_states();
        let mut adj = vec![Vec::new(); n];
        for (&q, acts) in &self.pairs {
            for &a in acts {
                for t in m.dist(e, q, a).support() {
                    if !self.pairs.contains_key(&t) {
                        return false;
                    }
                    adj[q].push(t);
                }
            }
        }
        let active: Vec<bool> = (0..n).map(|q| self.pairs.contains_key(&q)).collect();
        tarjan(&adj, &active).len() == 1
    }
}

/// The least priority of the component is even.
pub fn ec_is_winning(states: &BTreeSet<StateId>, priority: &[u32]) -> bool {
    states.iter().map(|&q| priority[q]).min().is_some_and(|p| p % 2 == 0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityResult {
    pub win: Vec<bool>,
    pub choice: Vec<Option<ActionId>>,
}

/// Pure memoryless strategy; states without a choice are outside its domain.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MemorylessStrategy {
    pub choice: BTreeMap<StateId, ActionId>,
}

impl MemorylessStrategy {
    pub fn from_choices(choice: &[Option<ActionId>]) -> MemorylessStrategy {
        MemorylessStrategy {
            choice: choice.iter().enumerate().filter_map(|(q, a)| a.map(|a| (q, a))).collect(),
        }
    }

    pub fn get(&self, q: StateId) -> Option<ActionId> {
        self.choice.get(&q).copied()
    }
}

/// Maximal end-components of environment `e` of `m`.
pub fn mec_decomposition(m: &Memdp, e: EnvId) -> Vec<EndComponent> {
    let mask = vec![true; m.num_states()];
    let k = EnvSet::singleton(e);
    SupportMdp::env_view(m, e, k, &mask)
        .mecs(&mask)
        .into_iter()
        .map(|ec| ec.with_scope(k))
        .collect()
}

/// Almost-sure winning region of environment `e` for `obj`, with a pure
/// memoryless witness.
pub fn almost_sure_mdp(m: &Memdp, e: EnvId, obj: &Objective) -> (BTreeSet<StateId>, MemorylessStrategy) {
    let enc = encode_objective(m, obj);
    let mask = vec![true; m.num_states()];
    let res = SupportMdp::env_view(&enc, e, EnvSet::singleton(e), &mask).as_parity(enc.priorities());
    let region = (0..m.num_states()).filter(|&q| res.win[q]).collect();
    (region, MemorylessStrategy::from_choices(&res.choice))
}
