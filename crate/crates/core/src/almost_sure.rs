//! Revealed form and the recursive almost-sure parity solver, with pure
//! witness strategies.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::StrategyError;
use crate::graph::{ec_is_winning, SupportMdp};
use crate::model::{ActionId, Dist, EnvId, EnvSet, Memdp, Objective, Region, StateId};
use crate::strategy::{flatten, StrategyAutomaton, StrategyLogic};

/// A transition whose observation rules out some environments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KnowledgeTransition {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
    pub knowledge: EnvSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Win,
    Lose,
}

/// Model in revealed form together with the list of redirected transitions.
#[derive(Clone, Debug)]
pub struct RevealedModel {
    pub model: Memdp,
    pub log: Vec<(KnowledgeTransition, Verdict)>,
}

impl RevealedModel {
    pub fn win_sink(&self) -> StateId {
        self.model.win_sink().expect("revealed model has sinks")
    }

    pub fn lose_sink(&self) -> StateId {
        self.model.lose_sink().expect("revealed model has sinks")
    }
}

/// All transitions of `k` whose knowledge is a strict subset of `k`, sorted by
/// (source, action, target). Transitions into designated sinks are skipped.
pub fn revealing_transitions(m: &Memdp, k: EnvSet) -> Vec<KnowledgeTransition> {
    let mut out = Vec::new();
    for q in 0..m.num_states() {
        for (idx, &a) in m.enabled(q).iter().enumerate() {
            for t in m.union_support(k, q, idx) {
                if m.is_designated_sink(t) {
                    continue;
                }
                let knowledge = m.knowledge(k, q, a, t);
                if knowledge != k {
                    out.push(KnowledgeTransition {
                        from: q,
                        action: a,
                        to: t,
                        knowledge,
                    });
                }
            }
        }
    }
    out
}

/// Redirects the mass of every revealing transition to the winning or losing
/// sink, as decided by `classify(knowledge, target)`.
pub fn to_revealed_form(m: &Memdp, k: EnvSet, mut classify: impl FnMut(EnvSet, StateId) -> bool) -> RevealedModel {
    let mut out = m.with_sinks();
    let win = out.win_sink().expect("sink");
    let lose = out.lose_sink().expect("sink");
    let mut log = Vec::new();
    let mut redirect: HashMap<(StateId, ActionId, StateId), StateId> = HashMap::new();
    for t in revealing_transitions(m, k) {
        let v = if classify(t.knowledge, t.to) { Verdict::Win } else { Verdict::Lose };
        redirect.insert((t.from, t.action, t.to), if v == Verdict::Win { win } else { lose });
        log.push((t, v));
    }
    let touched: BTreeSet<(StateId, ActionId)> = redirect.keys().map(|&(q, a, _)| (q, a)).collect();
    for (q, a) in touched {
        let idx = m.enabled(q).binary_search(&a).expect("enabled");
        for e in k.iter() {
            let d: Dist = m
                .dist_at(e, q, idx)
                .map_states(|s| redirect.get(&(q, a, s)).copied().unwrap_or(s));
            out.set_dist(e, q, idx, d);
        }
    }
    RevealedModel { model: out, log }
}

/// Solved subproblem for one canonical set of environments.
#[derive(Debug)]
pub struct AsNode {
    pub k: EnvSet,
    pub reps: Vec<EnvId>,
    pub revealed: RevealedModel,
    /// Winning states of the revealed model.
    pub win: Vec<bool>,
    pub sigma: Vec<Vec<Option<ActionId>>>,
    pub positive: Vec<Vec<bool>>,
    pub wsize: usize,
}

/// Recursive almost-sure parity solver over subsets of environments, with
/// one memo entry per canonical subset.
#[derive(Debug)]
pub struct AsSolver {
    model: Memdp,
    families: Vec<EnvId>,
    memo: Mutex<HashMap<EnvSet, Arc<AsNode>>>,
}

impl AsSolver {
    pub fn new(model: &Memdp) -> AsSolver {
        AsSolver {
            families: model.support_families(),
            model: model.clone(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &Memdp {
        &self.model
    }

    /// Keeps the first environment of `k` from each support family.
    pub fn canonical(&self, k: EnvSet) -> EnvSet {
        k.iter()
            .filter(|&e| !k.iter().any(|f| f < e && self.families[f] == self.families[e]))
            .collect()
    }

    pub fn node(&self, k: EnvSet) -> Arc<AsNode> {
        let k = self.canonical(k);
        if let Some(n) = self.memo.lock().expect("memo lock").get(&k) {
            return n.clone();
        }
        let node = Arc::new(self.build(k));
        self.memo
            .lock()
            .expect("memo lock")
            .entry(k)
            .or_insert(node)
            .clone()
    }

    pub fn solved_sets(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }

    fn build(&self, k: EnvSet) -> AsNode {
        assert!(!k.is_empty(), "empty environment set");
        let revealed = if k.len() == 1 {
            RevealedModel {
                model: self.model.clone(),
                log: Vec::new(),
            }
        } else {
            to_revealed_form(&self.model, k, |kt, t| self.node(kt).win[t])
        };
        let rm = &revealed.model;
        let n = rm.num_states();
        let prio = rm.priorities();
        let mut cur = vec![true; n];
        loop {
            let mut p = cur.clone();
            for e in k.iter() {
                let w = SupportMdp::env_view(rm, e, k, &cur).as_parity(prio).win;
                for q in 0..n {
                    p[q] &= w[q];
                }
            }
            let next = SupportMdp::union_view(rm, k, &cur).safety(&p);
            debug_assert!((0..n).all(|q| !next[q] || cur[q]));
            if next == cur {
                break;
            }
            cur = next;
        }
        let reps: Vec<EnvId> = k.iter().collect();
        let mut sigma = Vec::new();
        let mut positive = Vec::new();
        for &e in &reps {
            let view = SupportMdp::env_view(rm, e, k, &cur);
            let choice = view.as_parity(prio).choice;
            let bottoms = view.chain_bottoms(&choice, &cur);
            let mut groups: HashMap<usize, BTreeSet<StateId>> = HashMap::new();
            for q in 0..n {
                if let Some(b) = bottoms[q] {
                    groups.entry(b).or_default().insert(q);
                }
            }
            let mut pos = vec![false; n];
            for g in groups.values() {
                if ec_is_winning(g, prio) {
                    for &q in g {
                        pos[q] = true;
                    }
                }
            }
            sigma.push(choice);
            positive.push(pos);
        }
        let wsize = cur.iter().filter(|&&b| b).count();
        AsNode {
            k,
            reps,
            revealed,
            win: cur,
            sigma,
            positive,
            wsize,
        }
    }

    /// Almost-sure winning states of the input model for environments `k`.
    pub fn region(&self, k: EnvSet) -> Region {
        let node = self.node(k);
        Region::from_mask(&node.win, self.model.num_states(), k, "parity")
    }

    pub fn logic(&self, k: EnvSet) -> AsLogic<'_> {
        AsLogic { solver: self, root: k }
    }
}

/// Almost-sure parity region of `m` in environments `k`.
pub fn as_parity(m: &Memdp, k: EnvSet) -> Region {
    AsSolver::new(m).region(k)
}

/// Almost-sure (equivalently, sure) safety region for staying in `t`.
pub fn as_safety(m: &Memdp, k: EnvSet, t: &BTreeSet<StateId>) -> Region {
    let mut memo = HashMap::new();
    let mask = safety_rec(m, k, t, &mut memo);
    Region::from_mask(&mask, m.num_states(), k, "safe")
}

fn safety_rec(m: &Memdp, k: EnvSet, t: &BTreeSet<StateId>, memo: &mut HashMap<EnvSet, Vec<bool>>) -> Vec<bool> {
    if let Some(v) = memo.get(&k) {
        return v.clone();
    }
    let mut verdicts = Vec::new();
    for r in revealing_transitions(m, k) {
        verdicts.push(safety_rec(m, r.knowledge, t, memo)[r.to]);
    }
    let mut it = verdicts.into_iter();
    let rev = to_revealed_form(m, k, |_, _| it.next().expect("one verdict per transition"));
    let rm = &rev.model;
    let n = rm.num_states();
    let safe: Vec<bool> = (0..n).map(|q| t.contains(&q) || rm.win_sink() == Some(q)).collect();
    let all = vec![true; n];
    let w = SupportMdp::union_view(rm, k, &all).safety(&safe);
    let out: Vec<bool> = w[..m.num_states()].to_vec();
    memo.insert(k, out.clone());
    out
}

/// Pure strategy that cycles through environments, playing each one's
/// memoryless witness for `|W|` steps, and commits once the play sits in a
/// winning bottom component of the current witness.
pub struct AsLogic<'a> {
    solver: &'a AsSolver,
    root: EnvSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AsPhase {
    Round { i: u32, c: u32 },
    Commit { i: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AsMem {
    pub k: EnvSet,
    pub phase: AsPhase,
}

impl AsMem {
    pub fn fresh(k: EnvSet) -> AsMem {
        AsMem {
            k,
            phase: AsPhase::Round { i: 0, c: 0 },
        }
    }
}

impl<'a> AsLogic<'a> {
    pub fn action(&self, m: &AsMem, q: StateId) -> ActionId {
        let node = self.solver.node(m.k);
        let i = match m.phase {
            AsPhase::Round { i, .. } | AsPhase::Commit { i } => i as usize,
        };
        node.sigma[i]
            .get(q)
            .copied()
            .flatten()
            .unwrap_or_else(|| self.solver.model.enabled(q)[0])
    }

    pub fn step(&self, m: &AsMem, q: StateId, a: ActionId, t: StateId) -> AsMem {
        let model = &self.solver.model;
        let known = model.knowledge(m.k, q, a, t);
        if known.is_empty() {
            return m.clone();
        }
        if known != m.k {
            return AsMem::fresh(known);
        }
        let node = self.solver.node(m.k);
        let phase = match m.phase {
            AsPhase::Commit { i } => AsPhase::Commit { i },
            AsPhase::Round { i, c } => {
                if node.positive[i as usize][t] {
                    AsPhase::Commit { i }
                } else if (c as usize + 1) >= node.wsize.max(1) {
                    AsPhase::Round {
                        i: (i + 1) % node.reps.len() as u32,
                        c: 0,
                    }
                } else {
                    AsPhase::Round { i, c: c + 1 }
                }
            }
        };
        AsMem { k: m.k, phase }
    }
}

impl<'a> StrategyLogic for AsLogic<'a> {
    type Mem = AsMem;

    fn start(&self) -> AsMem {
        AsMem::fresh(self.root)
    }

    fn act(&self, m: &AsMem, q: StateId) -> ActionId {
        self.action(m, q)
    }

    fn update(&self, m: &AsMem, q: StateId, a: ActionId, t: StateId) -> AsMem {
        self.step(m, q, a, t)
    }
}

/// Explicit almost-sure winning strategy for all states of `w`.
pub fn synthesize_as_strategy(
    m: &Memdp,
    k: EnvSet,
    w: &Region,
    cap: usize,
) -> Result<StrategyAutomaton, StrategyError> {
    let solver = AsSolver::new(m);
    let region = solver.region(k);
    if let Some(&q) = w.states.iter().find(|q| !region.contains(**q)) {
        return Err(StrategyError::NotAlmostSureWinning(m.state_name(q).to_string()));
    }
    let starts: Vec<StateId> = w.states.iter().copied().collect();
    flatten(&solver.logic(k), m, k, &starts, cap)
}

/// Almost-sure region of an objective other than parity.
pub fn as_objective(m: &Memdp, k: EnvSet, obj: &Objective) -> Region {
    match obj {
        Objective::Safe(t) => as_safety(m, k, t),
        _ => {
            let mut r = as_parity(&crate::model::encode_objective(m, obj), k);
            r.objective = obj.tag();
            r
        }
    }
}
