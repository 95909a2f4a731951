//! Domain types: exact distributions, multiple-environment MDPs, environment
//! sets, objectives and the basic model transforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::error::{ModelError, RestrictError};
use crate::numeric::{fmt_rat, parse_rat, Rat};

pub type StateId = usize;
pub type ActionId = usize;
pub type EnvId = usize;

pub const WIN_SINK: &str = "__q_win";
pub const LOSE_SINK: &str = "__q_lose";

/// Set of environments, stored as a bitmask over the model's environment list.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EnvSet(u64);

impl EnvSet {
    pub const EMPTY: EnvSet = EnvSet(0);

    pub fn full(n: usize) -> EnvSet {
        assert!(n <= 64);
        if n == 64 {
            EnvSet(u64::MAX)
        } else {
            EnvSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(e: EnvId) -> EnvSet {
        EnvSet(1u64 << e)
    }

    pub fn from_bits(bits: u64) -> EnvSet {
        EnvSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, e: EnvId) -> bool {
        e < 64 && self.0 >> e & 1 == 1
    }

    pub fn insert(&mut self, e: EnvId) {
        self.0 |= 1u64 << e;
    }

    pub fn without(self, e: EnvId) -> EnvSet {
        EnvSet(self.0 & !(1u64 << e))
    }

    pub fn intersect(self, o: EnvSet) -> EnvSet {
        EnvSet(self.0 & o.0)
    }

    pub fn union(self, o: EnvSet) -> EnvSet {
        EnvSet(self.0 | o.0)
    }

    pub fn minus(self, o: EnvSet) -> EnvSet {
        EnvSet(self.0 & !o.0)
    }

    pub fn is_subset(self, o: EnvSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn first(self) -> Option<EnvId> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = EnvId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let e = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(e)
            }
        })
    }
}

impl FromIterator<EnvId> for EnvSet {
    fn from_iter<I: IntoIterator<Item = EnvId>>(it: I) -> Self {
        let mut s = EnvSet::EMPTY;
        for e in it {
            s.insert(e);
        }
        s
    }
}

impl fmt::Debug for EnvSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Probability distribution over states with exact rational weights.
/// Entries are sorted by state and strictly positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dist {
    entries: Vec<(StateId, Rat)>,
}

impl Dist {
    /// Builds a distribution, merging duplicate states and dropping zeros.
    /// The caller guarantees the weights sum to one.
    pub fn from_pairs<I: IntoIterator<Item = (StateId, Rat)>>(pairs: I) -> Dist {
        let mut m: BTreeMap<StateId, Rat> = BTreeMap::new();
        for (q, p) in pairs {
            *m.entry(q).or_insert_with(Rat::zero) += p;
        }
        Dist {
            entries: m.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn dirac(q: StateId) -> Dist {
        Dist {
            entries: vec![(q, Rat::one())],
        }
    }

    pub fn uniform<I: IntoIterator<Item = StateId>>(support: I) -> Dist {
        let set: BTreeSet<StateId> = support.into_iter().collect();
        assert!(!set.is_empty(), "uniform distribution over an empty set");
        let p = Rat::new(1.into(), (set.len() as i64).into());
        Dist {
            entries: set.into_iter().map(|q| (q, p.clone())).collect(),
        }
    }

    pub fn entries(&self) -> &[(StateId, Rat)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.iter().map(|(q, _)| *q)
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.entries.binary_search_by_key(&q, |(s, _)| *s).is_ok()
    }

    pub fn prob(&self, q: StateId) -> Rat {
        match self.entries.binary_search_by_key(&q, |(s, _)| *s) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => Rat::zero(),
        }
    }

    pub fn total(&self) -> Rat {
        self.entries.iter().map(|(_, p)| p.clone()).sum()
    }

    pub fn min_prob(&self) -> Option<&Rat> {
        self.entries.iter().map(|(_, p)| p).min()
    }

    /// Image of the distribution under a state map, summing colliding weights.
    pub fn map_states(&self, f: impl Fn(StateId) -> StateId) -> Dist {
        Dist::from_pairs(self.entries.iter().map(|(q, p)| (f(*q), p.clone())))
    }

    fn same_support(&self, other: &Dist) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.0 == b.0)
    }
}

/// Multiple-environment MDP: one state/action space shared by several
/// transition functions, a priority function and an initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memdp {
    pub(crate) states: Vec<String>,
    pub(crate) actions: Vec<String>,
    pub(crate) envs: Vec<String>,
    /// Enabled actions per state, strictly increasing.
    pub(crate) enabled: Vec<Vec<ActionId>>,
    /// `delta[e][q][k]` is the distribution of `enabled[q][k]` in environment `e`.
    pub(crate) delta: Vec<Vec<Vec<Dist>>>,
    pub(crate) priority: Vec<u32>,
    pub(crate) initial: StateId,
    pub(crate) win_sink: Option<StateId>,
    pub(crate) lose_sink: Option<StateId>,
}

impl Memdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn all_envs(&self) -> EnvSet {
        EnvSet::full(self.envs.len())
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn env_name(&self, e: EnvId) -> &str {
        &self.envs[e]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn env_names(&self) -> &[String] {
        &self.envs
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|s| s == name)
    }

    pub fn env_id(&self, name: &str) -> Option<EnvId> {
        self.envs.iter().position(|s| s == name)
    }

    pub fn env_set(&self, names: &[&str]) -> EnvSet {
        names
            .iter()
            .map(|n| self.env_id(n).unwrap_or_else(|| panic!("unknown environment {n}")))
            .collect()
    }

    pub fn states_named(&self, names: &[&str]) -> BTreeSet<StateId> {
        names
            .iter()
            .map(|n| self.state_id(n).unwrap_or_else(|| panic!("unknown state {n}")))
            .collect()
    }

    pub fn enabled(&self, q: StateId) -> &[ActionId] {
        &self.enabled[q]
    }

    pub fn is_enabled(&self, q: StateId, a: ActionId) -> bool {
        self.enabled[q].binary_search(&a).is_ok()
    }

    pub fn priority(&self, q: StateId) -> u32 {
        self.priority[q]
    }

    pub fn priorities(&self) -> &[u32] {
        &self.priority
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn win_sink(&self) -> Option<StateId> {
        self.win_sink
    }

    pub fn lose_sink(&self) -> Option<StateId> {
        self.lose_sink
    }

    pub fn is_designated_sink(&self, q: StateId) -> bool {
        self.win_sink == Some(q) || self.lose_sink == Some(q)
    }

    /// Distribution of action `a` in state `q` under environment `e`.
    pub fn dist(&self, e: EnvId, q: StateId, a: ActionId) -> &Dist {
        let k = self.enabled[q]
            .binary_search(&a)
            .unwrap_or_else(|_| panic!("action {} not enabled in {}", self.actions[a], self.states[q]));
        &self.delta[e][q][k]
    }

    pub fn dist_at(&self, e: EnvId, q: StateId, k: usize) -> &Dist {
        &self.delta[e][q][k]
    }

    pub fn prob(&self, e: EnvId, q: StateId, a: ActionId, t: StateId) -> Rat {
        self.dist(e, q, a).prob(t)
    }

    /// Environments of `k` in which `(q, a, t)` has positive probability.
    pub fn knowledge(&self, k: EnvSet, q: StateId, a: ActionId, t: StateId) -> EnvSet {
        let idx = match self.enabled[q].binary_search(&a) {
            Ok(i) => i,
            Err(_) => return EnvSet::EMPTY,
        };
        k.iter().filter(|&e| self.delta[e][q][idx].contains(t)).collect()
    }

    /// Union over `k` of the supports of `(q, enabled[q][idx])`.
    pub fn union_support(&self, k: EnvSet, q: StateId, idx: usize) -> BTreeSet<StateId> {
        let mut s = BTreeSet::new();
        for e in k.iter() {
            s.extend(self.delta[e][q][idx].support());
        }
        s
    }

    /// Whether every action of `q` loops back to `q` with probability one in every environment.
    pub fn is_absorbing(&self, q: StateId) -> bool {
        self.delta
            .iter()
            .all(|env| env[q].iter().all(|d| d.entries.len() == 1 && d.entries[0].0 == q))
    }

    /// Smallest positive transition probability over environments `k`.
    pub fn min_positive_prob(&self, k: EnvSet) -> Rat {
        let mut best: Option<Rat> = None;
        for e in k.iter() {
            for row in &self.delta[e] {
                for d in row {
                    if let Some(p) = d.min_prob() {
                        if best.as_ref().is_none_or(|b| p < b) {
                            best = Some(p.clone());
                        }
                    }
                }
            }
        }
        best.unwrap_or_else(Rat::one)
    }

    /// Smallest nonzero `|δ_e(q,a)(t) − δ_f(q,a)(t)|` over pairs of environments in `k`.
    pub fn min_difference(&self, k: EnvSet) -> Option<Rat> {
        let envs: Vec<EnvId> = k.iter().collect();
        let mut best: Option<Rat> = None;
        for q in 0..self.num_states() {
            for idx in 0..self.enabled[q].len() {
                let targets = self.union_support(k, q, idx);
                for &t in &targets {
                    for (i, &e) in envs.iter().enumerate() {
                        for &f in &envs[i + 1..] {
                            let d = (self.delta[e][q][idx].prob(t) - self.delta[f][q][idx].prob(t)).abs();
                            if !d.is_zero() && best.as_ref().is_none_or(|b| &d < b) {
                                best = Some(d);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// The model `M[k]` keeping only the environments of `k`.
    pub fn sub_envs(&self, k: EnvSet) -> Memdp {
        let mut m = self.clone();
        m.envs = k.iter().map(|e| self.envs[e].clone()).collect();
        m.delta = k.iter().map(|e| self.delta[e].clone()).collect();
        m
    }

    /// Adds the designated winning and losing sinks if missing.
    pub(crate) fn with_sinks(&self) -> Memdp {
        let mut m = self.clone();
        if m.win_sink.is_none() {
            m.win_sink = Some(m.push_sink(WIN_SINK, 0));
        }
        if m.lose_sink.is_none() {
            m.lose_sink = Some(m.push_sink(LOSE_SINK, 1));
        }
        m
    }

    fn push_sink(&mut self, name: &str, priority: u32) -> StateId {
        let q = self.states.len();
        self.states.push(name.to_string());
        if self.actions.is_empty() {
            self.actions.push("stay".to_string());
        }
        self.enabled.push(vec![0]);
        for env in &mut self.delta {
            env.push(vec![Dist::dirac(q)]);
        }
        self.priority.push(priority);
        q
    }

    /// Replaces every distribution of `q` by a Dirac on `target`, in every environment.
    pub(crate) fn redirect_all(&mut self, q: StateId, target: StateId) {
        for env in &mut self.delta {
            for d in &mut env[q] {
                *d = Dist::dirac(target);
            }
        }
    }

    pub(crate) fn set_dist(&mut self, e: EnvId, q: StateId, idx: usize, d: Dist) {
        self.delta[e][q][idx] = d;
    }

    /// For every environment, the first environment sharing all its supports.
    pub fn support_families(&self) -> Vec<EnvId> {
        let mut fam = Vec::with_capacity(self.envs.len());
        for e in 0..self.envs.len() {
            let rep = (0..e).find(|&f| {
                fam[f] == f
                    && self.delta[e]
                        .iter()
                        .zip(&self.delta[f])
                        .all(|(r1, r2)| r1.iter().zip(r2).all(|(a, b)| a.same_support(b)))
            });
            fam.push(rep.unwrap_or(e));
        }
        fam
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_raw()).expect("serializable")
    }

    pub fn to_raw(&self) -> RawModel {
        let mut enabled = Map::new();
        let mut priority = Map::new();
        for q in 0..self.num_states() {
            enabled.insert(
                self.states[q].clone(),
                self.enabled[q]
                    .iter()
                    .map(|&a| serde_json::Value::String(self.actions[a].clone()))
                    .collect(),
            );
            priority.insert(self.states[q].clone(), self.priority[q].into());
        }
        let mut environments = Map::new();
        for e in 0..self.num_envs() {
            let mut per_state = Map::new();
            for q in 0..self.num_states() {
                let mut per_action = Map::new();
                for (k, &a) in self.enabled[q].iter().enumerate() {
                    let mut d = Map::new();
                    for (t, p) in self.delta[e][q][k].entries() {
                        d.insert(self.states[*t].clone(), fmt_rat(p).into());
                    }
                    per_action.insert(self.actions[a].clone(), d.into());
                }
                per_state.insert(self.states[q].clone(), per_action.into());
            }
            environments.insert(self.envs[e].clone(), per_state.into());
        }
        RawModel {
            states: self.states.clone(),
            actions: self.actions.clone(),
            enabled,
            environments,
            priority,
            initial: self.states[self.initial].clone(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Memdp, ModelError> {
        let raw: RawModel = serde_json::from_str(s).map_err(|e| ModelError::Malformed(e.to_string()))?;
        validate(&raw)
    }
}

/// Serialized model layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub enabled: Map<String, serde_json::Value>,
    pub environments: Map<String, serde_json::Value>,
    pub priority: Map<String, serde_json::Value>,
    pub initial: String,
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::Malformed(msg.into())
}

/// Checks a raw description and interns names in declaration order.
pub fn validate(raw: &RawModel) -> Result<Memdp, ModelError> {
    let mut state_ix: BTreeMap<&str, StateId> = BTreeMap::new();
    for (i, s) in raw.states.iter().enumerate() {
        if s == WIN_SINK || s == LOSE_SINK {
            return Err(ModelError::ReservedName(s.clone()));
        }
        if state_ix.insert(s.as_str(), i).is_some() {
            return Err(ModelError::DuplicateName(s.clone()));
        }
    }
    let mut action_ix: BTreeMap<&str, ActionId> = BTreeMap::new();
    for (i, a) in raw.actions.iter().enumerate() {
        if action_ix.insert(a.as_str(), i).is_some() {
            return Err(ModelError::DuplicateName(a.clone()));
        }
    }
    let lookup_state = |s: &str| state_ix.get(s).copied().ok_or_else(|| ModelError::UnknownState(s.to_string()));
    let lookup_action = |a: &str| action_ix.get(a).copied().ok_or_else(|| ModelError::UnknownAction(a.to_string()));

    let n = raw.states.len();
    if n == 0 {
        return Err(malformed("model has no state"));
    }
    let mut enabled: Vec<Option<Vec<ActionId>>> = vec![None; n];
    for (s, acts) in &raw.enabled {
        let q = lookup_state(s)?;
        let list = acts
            .as_array()
            .ok_or_else(|| malformed(format!("enabled actions of {s} must be a list")))?;
        let mut v = Vec::new();
        for a in list {
            let a = a
                .as_str()
                .ok_or_else(|| malformed(format!("action names of {s} must be strings")))?;
            v.push(lookup_action(a)?);
        }
        v.sort_unstable();
        v.dedup();
        enabled[q] = Some(v);
    }
    let enabled: Vec<Vec<ActionId>> = enabled
        .into_iter()
        .enumerate()
        .map(|(q, v)| match v {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(ModelError::EmptyActionSet(raw.states[q].clone())),
        })
        .collect::<Result<_, _>>()?;

    if raw.environments.is_empty() {
        return Err(ModelError::NoEnvironment);
    }
    if raw.environments.len() > 64 {
        return Err(ModelError::TooManyEnvironments(raw.environments.len()));
    }
    let mut envs = Vec::new();
    let mut delta = Vec::new();
    for (ename, body) in &raw.environments {
        envs.push(ename.clone());
        let body = body
            .as_object()
            .ok_or_else(|| malformed(format!("environment {ename} must be an object")))?;
        let mut table: Vec<Vec<Option<Dist>>> = enabled.iter().map(|v| vec![None; v.len()]).collect();
        for (sname, per_action) in body {
            let q = lookup_state(sname)?;
            let per_action = per_action
                .as_object()
                .ok_or_else(|| malformed(format!("transitions of {sname} in {ename} must be an object")))?;
            for (aname, d) in per_action {
                let a = lookup_action(aname)?;
                let k = enabled[q].binary_search(&a).map_err(|_| ModelError::UnexpectedTransition {
                    env: ename.clone(),
                    state: sname.clone(),
                    action: aname.clone(),
                })?;
                let d = d
                    .as_object()
                    .ok_or_else(|| malformed(format!("distribution of ({sname}, {aname}) must be an object")))?;
                let mut pairs = Vec::new();
                for (tname, p) in d {
                    let t = lookup_state(tname)?;
                    let text = match p {
                        serde_json::Value::String(s) => s.clone(),
                        serde_json::Value::Number(x) if x.is_i64() || x.is_u64() => x.to_string(),
                        other => return Err(ModelError::BadProbability(other.to_string())),
                    };
                    let p = parse_rat(&text).ok_or_else(|| ModelError::BadProbability(text.clone()))?;
                    if p.is_negative() {
                        return Err(ModelError::NegativeProbability {
                            env: ename.clone(),
                            state: sname.clone(),
                            action: aname.clone(),
                            value: text,
                        });
                    }
                    pairs.push((t, p));
                }
                let dist = Dist::from_pairs(pairs);
                let sum = dist.total();
                if !sum.is_one() {
                    return Err(ModelError::DistributionNotNormalized {
                        env: ename.clone(),
                        state: sname.clone(),
                        action: aname.clone(),
                        sum: fmt_rat(&sum),
                    });
                }
                table[q][k] = Some(dist);
            }
        }
        let mut rows = Vec::with_capacity(n);
        for (q, row) in table.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (k, d) in row.into_iter().enumerate() {
                out.push(d.ok_or_else(|| ModelError::MissingTransition {
                    env: ename.clone(),
                    state: raw.states[q].clone(),
                    action: raw.actions[enabled[q][k]].clone(),
                })?);
            }
            rows.push(out);
        }
        delta.push(rows);
    }

    let mut priority = vec![None; n];
    for (s, p) in &raw.priority {
        let q = lookup_state(s)?;
        let p = p
            .as_u64()
            .filter(|&p| p <= u32::MAX as u64)
            .ok_or_else(|| malformed(format!("priority of {s} must be a nonnegative integer")))?;
        priority[q] = Some(p as u32);
    }
    let priority = priority
        .into_iter()
        .enumerate()
        .map(|(q, p)| p.ok_or_else(|| malformed(format!("missing priority for {}", raw.states[q]))))
        .collect::<Result<_, _>>()?;
    let initial = lookup_state(&raw.initial)?;

    Ok(Memdp {
        states: raw.states.clone(),
        actions: raw.actions.clone(),
        envs,
        enabled,
        delta,
        priority,
        initial,
        win_sink: None,
        lose_sink: None,
    })
}

/// Winning condition of a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Objective {
    Parity,
    Reach(BTreeSet<StateId>),
    Safe(BTreeSet<StateId>),
}

impl Objective {
    pub fn tag(&self) -> &'static str {
        match self {
            Objective::Parity => "parity",
            Objective::Reach(_) => "reach",
            Objective::Safe(_) => "safe",
        }
    }
}

/// A winning region for some objective in a given set of environments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub states: BTreeSet<StateId>,
    pub context: EnvSet,
    pub objective: &'static str,
}

impl Region {
    pub fn contains(&self, q: StateId) -> bool {
        self.states.contains(&q)
    }

    pub fn names(&self, m: &Memdp) -> Vec<String> {
        self.states.iter().map(|&q| m.state_name(q).to_string()).collect()
    }

    pub(crate) fn from_mask(mask: &[bool], limit: usize, context: EnvSet, objective: &'static str) -> Region {
        Region {
            states: (0..limit).filter(|&q| mask[q]).collect(),
            context,
            objective,
        }
    }
}

/// Single-environment model whose distributions are uniform over the union
/// of the supports in `k`.
pub fn union_mdp(m: &Memdp, k: EnvSet) -> Memdp {
    assert!(!k.is_empty(), "union over no environment");
    let rows = (0..m.num_states())
        .map(|q| {
            (0..m.enabled[q].len())
                .map(|idx| Dist::uniform(m.union_support(k, q, idx)))
                .collect()
        })
        .collect();
    let mut out = m.clone();
    out.envs = vec!["union".to_string()];
    out.delta = vec![rows];
    out
}

/// Sub-MDP induced by `keep`: actions leaving `keep` in some environment are
/// dropped and the remaining states renumbered in increasing order. The
/// second component maps new ids to old ones.
pub fn restrict(m: &Memdp, keep: &BTreeSet<StateId>) -> Result<(Memdp, Vec<StateId>), RestrictError> {
    let all = m.all_envs();
    let old: Vec<StateId> = keep.iter().copied().collect();
    let mut new_id = vec![usize::MAX; m.num_states()];
    for (i, &q) in old.iter().enumerate() {
        new_id[q] = i;
    }
    let mut enabled = Vec::new();
    let mut delta: Vec<Vec<Vec<Dist>>> = vec![Vec::new(); m.num_envs()];
    for &q in &old {
        let kept: Vec<usize> = (0..m.enabled[q].len())
            .filter(|&idx| m.union_support(all, q, idx).iter().all(|t| keep.contains(t)))
            .collect();
        if kept.is_empty() {
            return Err(RestrictError::NotClosed(m.states[q].clone()));
        }
        enabled.push(kept.iter().map(|&idx| m.enabled[q][idx]).collect());
        for (e, env) in delta.iter_mut().enumerate() {
            env.push(
                kept.iter()
                    .map(|&idx| m.delta[e][q][idx].map_states(|t| new_id[t]))
                    .collect(),
            );
        }
    }
    let initial = if keep.contains(&m.initial) { new_id[m.initial] } else { 0 };
    let remap = |s: Option<StateId>| s.filter(|q| keep.contains(q)).map(|q| new_id[q]);
    Ok((
        Memdp {
            states: old.iter().map(|&q| m.states[q].clone()).collect(),
            actions: m.actions.clone(),
            envs: m.envs.clone(),
            enabled,
            delta,
            priority: old.iter().map(|&q| m.priority[q]).collect(),
            initial,
            win_sink: remap(m.win_sink),
            lose_sink: remap(m.lose_sink),
        },
        old,
    ))
}

/// Keeps the first environment of every support family. The map sends each
/// original environment to the index of its representative in the output.
pub fn dedup_environments(m: &Memdp) -> (Memdp, Vec<EnvId>) {
    let fam = m.support_families();
    let reps: Vec<EnvId> = (0..m.num_envs()).filter(|&e| fam[e] == e).collect();
    let map = fam
        .iter()
        .map(|r| reps.iter().position(|x| x == r).expect("representative kept"))
        .collect();
    (m.sub_envs(reps.iter().copied().collect()), map)
}

/// Rewrites a reachability or safety objective into priorities {0, 1} with
/// absorbing states; parity objectives are returned unchanged.
pub fn encode_objective(m: &Memdp, obj: &Objective) -> Memdp {
    let mut out = m.clone();
    match obj {
        Objective::Parity => {}
        Objective::Reach(t) => {
            for q in 0..m.num_states() {
                if t.contains(&q) {
                    out.priority[q] = 0;
                    out.redirect_all(q, q);
                } else {
                    out.priority[q] = 1;
                }
            }
        }
        Objective::Safe(t) => {
            for q in 0..m.num_states() {
                if t.contains(&q) {
                    out.priority[q] = 0;
                } else {
                    out.priority[q] = 1;
                    out.redirect_all(q, q);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_set_algebra() {
        let k = EnvSet::full(3);
        assert_eq!(k.len(), 3);
        assert_eq!(k.without(1).iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(EnvSet::singleton(2).is_subset(k));
        assert_eq!(k.first(), Some(0));
        assert!(EnvSet::EMPTY.is_empty());
        assert_eq!(EnvSet::full(64).len(), 64);
    }

    #[test]
    fn dist_merges_and_drops_zeros() {
        let d = Dist::from_pairs(vec![(2, crate::numeric::rat(1, 2)), (1, Rat::zero()), (2, crate::numeric::rat(1, 2))]);
        assert_eq!(d.entries().len(), 1);
        assert!(d.prob(2).is_one());
        assert!(d.prob(1).is_zero());
    }
}
