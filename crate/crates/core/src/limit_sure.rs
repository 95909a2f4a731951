//! Limit-sure parity: common end-components, distinguishing partitions, the
//! recursive region computation and ε-optimal pure strategies.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::almost_sure::{revealing_transitions, to_revealed_form, AsMem, AsSolver, KnowledgeTransition, Verdict};
use crate::error::{ModelError, StrategyError};
use crate::graph::{EndComponent, SupportMdp};
use crate::model::{encode_objective, ActionId, EnvId, EnvSet, Memdp, Objective, Region, StateId};
use crate::numeric::{int, round_up_dyadic, sample_count, Rat};
use crate::strategy::{flatten, StrategyAutomaton, StrategyLogic};

/// Maximal common end-components of a model in revealed form: the maximal
/// end-components of the union over `k`.
pub fn common_ecs_revealed(m: &Memdp, k: EnvSet) -> Result<Vec<EndComponent>, ModelError> {
    if let Some(t) = revealing_transitions(m, k).first() {
        return Err(ModelError::RevealedFormRequired(format!(
            "{}, {}, {}",
            m.state_name(t.from),
            m.action_name(t.action),
            m.state_name(t.to)
        )));
    }
    Ok(cecs_unchecked(m, k))
}

fn cecs_unchecked(m: &Memdp, k: EnvSet) -> Vec<EndComponent> {
    let all = vec![true; m.num_states()];
    SupportMdp::union_view(m, k, &all)
        .mecs(&all)
        .into_iter()
        .map(|ec| ec.with_scope(k))
        .collect()
}

/// Transition of a component whose probability differs across environments,
/// with the induced split of the environments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistinguishingPartition {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
    pub pivot: EnvId,
    /// Environments agreeing with the pivot on the transition.
    pub k1: EnvSet,
    pub k2: EnvSet,
}

/// Smallest `(from, action, to)` of `d` on which some environment of `k`
/// disagrees with the first one.
pub fn distinguishing_partition(m: &Memdp, k: EnvSet, d: &EndComponent) -> Option<DistinguishingPartition> {
    let pivot = k.first()?;
    for (&q, acts) in &d.pairs {
        for &a in acts {
            let idx = m.enabled(q).binary_search(&a).ok()?;
            for t in m.union_support(k, q, idx) {
                let v = m.dist_at(pivot, q, idx).prob(t);
                let k1: EnvSet = k.iter().filter(|&e| m.dist_at(e, q, idx).prob(t) == v).collect();
                if k1 != k {
                    return Some(DistinguishingPartition {
                        from: q,
                        action: a,
                        to: t,
                        pivot,
                        k1,
                        k2: k.minus(k1),
                    });
                }
            }
        }
    }
    None
}

/// Sampling parameters for one distinguishing transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPlan {
    pub partition: DistinguishingPartition,
    pub samples: BigUint,
    pub eta: Rat,
    pub pivot_prob: Rat,
}

impl SamplingPlan {
    pub fn new(m: &Memdp, k: EnvSet, partition: DistinguishingPartition, eps: &Rat) -> SamplingPlan {
        let eta = m.min_difference(k).expect("distinguishing transition gives a difference");
        let pivot_prob = m.prob(partition.pivot, partition.from, partition.action, partition.to);
        SamplingPlan {
            samples: sample_count(eps, &eta),
            partition,
            eta,
            pivot_prob,
        }
    }

    /// Whether `hits` out of `n` observations are close enough to the pivot's
    /// probability to select the first block.
    pub fn selects_first(&self, hits: u64, n: u64) -> bool {
        let freq = Rat::new(hits.into(), n.max(1).into());
        (freq - &self.pivot_prob).abs() < &self.eta / int(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Root,
    /// Revealed form of the model of the given node.
    Revealed(usize),
    /// Revealed form of the given node with its winning components replaced.
    Replaced(usize),
}

#[derive(Debug)]
pub struct ModelEntry {
    pub model: Memdp,
    pub origin: Origin,
}

/// Maximal common end-component of a node with its classification.
#[derive(Clone, Debug)]
pub struct ComponentInfo {
    pub ec: EndComponent,
    pub partition: Option<DistinguishingPartition>,
    /// Nodes solving the two blocks of the partition on the node's model.
    pub blocks: Option<(usize, usize)>,
    pub winning: bool,
    /// Memoryless strategy returning to the partition's source inside the component.
    pub ret: Vec<Option<ActionId>>,
}

/// Per-environment part of the characterization.
#[derive(Debug)]
pub struct EnvPart {
    pub env: EnvId,
    /// Node solving the remaining environments on the replaced model.
    pub rest: usize,
    pub safe_win: Vec<bool>,
    pub sigma: Vec<Option<ActionId>>,
    pub bottom: Vec<bool>,
}

#[derive(Debug)]
pub struct Split {
    pub revealed_id: usize,
    pub replaced_id: usize,
    pub log: Vec<(KnowledgeTransition, Verdict)>,
    pub components: Vec<ComponentInfo>,
    /// Index into `components` of the winning component holding each state.
    pub component_of: Vec<Option<usize>>,
    pub parts: Vec<EnvPart>,
    pub target: Vec<bool>,
    pub reach: AsSolver,
    /// Children reached through revealing transitions of the node's model.
    pub revealed_children: HashMap<EnvSet, usize>,
}

#[derive(Debug)]
pub struct LsNode {
    pub model_id: usize,
    pub k: EnvSet,
    /// Winning states of the node's model.
    pub region: Vec<bool>,
    pub single: Option<Vec<Option<ActionId>>>,
    pub split: Option<Split>,
}

impl LsNode {
    pub fn contains(&self, q: StateId) -> bool {
        self.region.get(q).copied().unwrap_or(false)
    }
}

/// Recursive limit-sure solver. Every intermediate model is registered with
/// its origin so strategies can map observed transitions back to the
/// subproblem that accounts for them.
#[derive(Debug)]
pub struct LsEngine {
    models: Mutex<Vec<Arc<ModelEntry>>>,
    nodes: Mutex<Vec<Option<Arc<LsNode>>>>,
    index: Mutex<HashMap<(usize, EnvSet), usize>>,
}

impl LsEngine {
    pub fn new(model: &Memdp) -> LsEngine {
        LsEngine {
            models: Mutex::new(vec![Arc::new(ModelEntry {
                model: model.clone(),
                origin: Origin::Root,
            })]),
            nodes: Mutex::new(Vec::new()),
            index: Mutex::new(HashMap::new()),
        }
    }

    pub fn root_model(&self) -> Arc<ModelEntry> {
        self.model_entry(0)
    }

    pub fn model_entry(&self, id: usize) -> Arc<ModelEntry> {
        self.models.lock().expect("models lock")[id].clone()
    }

    fn add_model(&self, model: Memdp, origin: Origin) -> usize {
        let mut models = self.models.lock().expect("models lock");
        models.push(Arc::new(ModelEntry { model, origin }));
        models.len() - 1
    }

    pub fn get(&self, id: usize) -> Arc<LsNode> {
        self.nodes.lock().expect("nodes lock")[id].clone().expect("node is built")
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.lock().expect("nodes lock").len()
    }

    /// Solves (or looks up) the subproblem of model `model_id` in environments `k`.
    pub fn node(&self, model_id: usize, k: EnvSet) -> usize {
        if let Some(&id) = self.index.lock().expect("index lock").get(&(model_id, k)) {
            return id;
        }
        let id = {
            let mut nodes = self.nodes.lock().expect("nodes lock");
            nodes.push(None);
            nodes.len() - 1
        };
        let node = self.build(id, model_id, k);
        self.nodes.lock().expect("nodes lock")[id] = Some(Arc::new(node));
        self.index.lock().expect("index lock").insert((model_id, k), id);
        id
    }

    pub fn root(&self, k: EnvSet) -> usize {
        self.node(0, k)
    }

    /// Limit-sure region of the root model in environments `k`.
    pub fn region(&self, k: EnvSet) -> Region {
        let node = self.get(self.root(k));
        let n = self.root_model().model.num_states();
        Region::from_mask(&node.region, n, k, "parity")
    }

    fn build(&self, id: usize, model_id: usize, k: EnvSet) -> LsNode {
        assert!(!k.is_empty(), "empty environment set");
        let entry = self.model_entry(model_id);
        let l = &entry.model;
        let n = l.num_states();
        let all = vec![true; n];
        if k.len() == 1 {
            let e = k.first().expect("one environment");
            let res = SupportMdp::env_view(l, e, k, &all).as_parity(l.priorities());
            return LsNode {
                model_id,
                k,
                region: res.win,
                single: Some(res.choice),
                split: None,
            };
        }

        let mut revealed_children = HashMap::new();
        let rev = to_revealed_form(l, k, |kt, t| {
            let c = self.node(model_id, kt);
            revealed_children.insert(kt, c);
            self.get(c).contains(t)
        });
        let lp = rev.model;
        let revealed_id = self.add_model(lp.clone(), Origin::Revealed(id));
        let np = lp.num_states();
        let win = lp.win_sink().expect("sink");

        let union = SupportMdp::union_view(&lp, k, &vec![true; np]);
        let mut components = Vec::new();
        let mut component_of = vec![None; np];
        let mut lpp = lp.clone();
        for ec in cecs_unchecked(&lp, k) {
            let partition = distinguishing_partition(&lp, k, &ec);
            let mut info = ComponentInfo {
                ec,
                partition,
                blocks: None,
                winning: false,
                ret: Vec::new(),
            };
            if let Some(p) = &info.partition {
                let b1 = self.node(model_id, p.k1);
                let b2 = self.node(model_id, p.k2);
                let (n1, n2) = (self.get(b1), self.get(b2));
                info.blocks = Some((b1, b2));
                info.winning = info.ec.pairs.keys().all(|&q| n1.contains(q) && n2.contains(q));
                if info.winning {
                    let inner = union.filtered(|q, a| info.ec.pairs.get(&q).is_some_and(|v| v.contains(&a)));
                    let members: Vec<bool> = (0..np).map(|q| info.ec.contains(q)).collect();
                    let goal: Vec<bool> = (0..np).map(|q| q == p.from).collect();
                    let (_, ret) = inner.as_reach(&members, &goal);
                    info.ret = ret;
                    for &q in info.ec.pairs.keys() {
                        component_of[q] = Some(components.len());
                        lpp.redirect_all(q, win);
                    }
                }
            }
            components.push(info);
        }
        let replaced_id = self.add_model(lpp.clone(), Origin::Replaced(id));

        let prio = lpp.priorities();
        let mut parts = Vec::new();
        let mut target = vec![false; np];
        for e in k.iter() {
            let rest = self.node(replaced_id, k.without(e));
            let t_e = self.get(rest).region.clone();
            let view = SupportMdp::env_view(&lpp, e, k, &t_e);
            let res = view.as_parity(prio);
            let bottom = view
                .chain_bottoms(&res.choice, &res.win)
                .into_iter()
                .map(|b| b.is_some())
                .collect();
            for q in 0..np {
                target[q] |= res.win[q];
            }
            parts.push(EnvPart {
                env: e,
                rest,
                safe_win: res.win,
                sigma: res.choice,
                bottom,
            });
        }
        let goal: BTreeSet<StateId> = (0..np).filter(|&q| target[q]).collect();
        let r = encode_objective(&lpp, &Objective::Reach(goal));
        let reach = AsSolver::new(&r);
        let region = reach.node(k).win[..n].to_vec();
        LsNode {
            model_id,
            k,
            region,
            single: None,
            split: Some(Split {
                revealed_id,
                replaced_id,
                log: rev.log,
                components,
                component_of,
                parts,
                target,
                reach,
                revealed_children,
            }),
        }
    }
}

/// Limit-sure parity region of `m` in environments `k`.
pub fn ls_parity(m: &Memdp, k: EnvSet) -> Region {
    LsEngine::new(m).region(k)
}

/// Limit-sure region of a reachability, safety or parity objective.
pub fn ls_objective(m: &Memdp, k: EnvSet, obj: &Objective) -> Region {
    let mut r = ls_parity(&encode_objective(m, obj), k);
    r.objective = obj.tag();
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LsPhase {
    /// Not started; the first state decides the entry point.
    Start,
    /// One environment left: memoryless play.
    Single,
    /// Almost-sure reachability of the characterization target.
    Reach(AsMem),
    /// Following one environment's witness for a bounded number of steps.
    Track { env: EnvId, steps: u32 },
    Commit { env: EnvId },
    /// Inside a winning distinguishing component, counting observations.
    Sample { comp: u32, n: u32, hits: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LsMem {
    pub node: u32,
    pub know: EnvSet,
    pub phase: LsPhase,
}

enum Link {
    Revealed(usize),
    Replaced(usize),
}

/// Pure strategy winning with probability at least `1 − ε` from the
/// limit-sure region.
pub struct LsLogic<'a> {
    engine: &'a LsEngine,
    root: usize,
    k0: EnvSet,
    eps: Rat,
    samples: Mutex<HashMap<usize, (u32, Rat, Rat)>>,
    horizons: Mutex<HashMap<(usize, EnvId), u32>>,
}

impl<'a> LsLogic<'a> {
    /// `eps` is the total error budget; each fallible decision gets an equal share.
    pub fn new(engine: &'a LsEngine, k0: EnvSet, eps: &Rat) -> LsLogic<'a> {
        let share = if k0.len() > 1 { eps / int(k0.len() as i64 - 1) } else { eps.clone() };
        LsLogic {
            engine,
            root: engine.root(k0),
            k0,
            eps: share,
            samples: Mutex::new(HashMap::new()),
            horizons: Mutex::new(HashMap::new()),
        }
    }

    /// Error share of each fallible decision.
    pub fn share(&self) -> &Rat {
        &self.eps
    }

    /// Sample count, η and pivot probability of a node's sampling plan.
    pub fn sampling(&self, node: usize) -> (u32, Rat) {
        let (n, eta, _) = self.plan(node);
        (n, eta)
    }

    fn plan(&self, node: usize) -> (u32, Rat, Rat) {
        if let Some(v) = self.samples.lock().expect("lock").get(&node) {
            return v.clone();
        }
        let nd = self.engine.get(node);
        let split = nd.split.as_ref().expect("split node");
        let lp = &self.engine.model_entry(split.revealed_id).model;
        let eta = lp.min_difference(nd.k).unwrap_or_else(Rat::one);
        let n = sample_count(&self.eps, &eta).to_u32().unwrap_or(u32::MAX).max(1);
        let v = (n, eta, Rat::zero());
        self.samples.lock().expect("lock").insert(node, v.clone());
        v
    }

    /// Smallest number of steps after which the witness of environment
    /// `env` has left the transient part with probability at least `1 − ε`.
    pub fn horizon(&self, node: usize, env: EnvId) -> u32 {
        if let Some(&h) = self.horizons.lock().expect("lock").get(&(node, env)) {
            return h;
        }
        let nd = self.engine.get(node);
        let split = nd.split.as_ref().expect("split node");
        let part = split.parts.iter().find(|p| p.env == env).expect("part");
        let lpp = &self.engine.model_entry(split.replaced_id).model;
        let n = lpp.num_states();
        let transient: Vec<StateId> = (0..n).filter(|&q| part.safe_win[q] && !part.bottom[q]).collect();
        let mut v = vec![Rat::zero(); n];
        for &q in &transient {
            v[q] = Rat::one();
        }
        let mut h = 0u32;
        while transient.iter().any(|&q| v[q] > self.eps) {
            let mut next = vec![Rat::zero(); n];
            for &q in &transient {
                let a = part.sigma[q].expect("witness defined on its region");
                let mut acc = Rat::zero();
                for (t, p) in lpp.dist(env, q, a).entries() {
                    if !v[*t].is_zero() {
                        acc += p * &v[*t];
                    }
                }
                next[q] = round_up_dyadic(&acc);
            }
            v = next;
            h += 1;
        }
        self.horizons.lock().expect("lock").insert((node, env), h);
        h
    }

    fn default_action(&self, q: StateId) -> ActionId {
        self.engine.root_model().model.enabled(q)[0]
    }

    fn chain(&self, node: usize) -> Vec<Link> {
        let mut out = Vec::new();
        let mut mid = self.engine.get(node).model_id;
        loop {
            match self.engine.model_entry(mid).origin {
                Origin::Root => break,
                Origin::Revealed(p) => {
                    out.push(Link::Revealed(p));
                    mid = self.engine.get(p).model_id;
                }
                Origin::Replaced(p) => {
                    out.push(Link::Replaced(p));
                    mid = self.engine.get(p).split.as_ref().expect("split").revealed_id;
                }
            }
        }
        out.reverse();
        out
    }

    fn narrow(know: EnvSet, k: EnvSet) -> EnvSet {
        let x = know.intersect(k);
        if x.is_empty() {
            k
        } else {
            x
        }
    }

    /// Memory on entering `node` at state `q`.
    pub fn enter(&self, node: usize, know: EnvSet, q: StateId) -> LsMem {
        let nd = self.engine.get(node);
        let know = Self::narrow(know, nd.k);
        let mk = |phase| LsMem {
            node: node as u32,
            know,
            phase,
        };
        let split = match &nd.split {
            None => return mk(LsPhase::Single),
            Some(s) => s,
        };
        if let Some(c) = split.component_of.get(q).copied().flatten() {
            return self.enter_sample(node, c, know, q);
        }
        if split.target[q] {
            let pick = split
                .parts
                .iter()
                .filter(|p| p.safe_win[q])
                .min_by_key(|p| (!know.contains(p.env), p.env))
                .expect("target state has a witness");
            return if pick.bottom[q] {
                mk(LsPhase::Commit { env: pick.env })
            } else {
                mk(LsPhase::Track { env: pick.env, steps: 0 })
            };
        }
        mk(LsPhase::Reach(AsMem::fresh(nd.k)))
    }

    fn enter_sample(&self, node: usize, comp: usize, know: EnvSet, q: StateId) -> LsMem {
        let nd = self.engine.get(node);
        let split = nd.split.as_ref().expect("split");
        let info = &split.components[comp];
        let p = info.partition.as_ref().expect("winning components are distinguishing");
        let (b1, b2) = info.blocks.expect("blocks solved");
        let know = Self::narrow(know, nd.k);
        if know.intersect(p.k1).is_empty() {
            return self.enter(b2, know, q);
        }
        if know.intersect(p.k2).is_empty() {
            return self.enter(b1, know, q);
        }
        LsMem {
            node: node as u32,
            know,
            phase: LsPhase::Sample {
                comp: comp as u32,
                n: 0,
                hits: 0,
            },
        }
    }

    pub fn start_memory(&self) -> LsMem {
        LsMem {
            node: self.root as u32,
            know: self.k0,
            phase: LsPhase::Start,
        }
    }

    pub fn action(&self, m: &LsMem, q: StateId) -> ActionId {
        if m.phase == LsPhase::Start {
            return self.action(&self.enter(self.root, self.k0, q), q);
        }
        let nd = self.engine.get(m.node as usize);
        let pick = match (&m.phase, &nd.split) {
            (LsPhase::Single, _) => nd.single.as_ref().and_then(|s| s.get(q).copied().flatten()),
            (LsPhase::Reach(am), Some(split)) => Some(split.reach.logic(nd.k).action(am, q)),
            (LsPhase::Track { env, .. } | LsPhase::Commit { env }, Some(split)) => split
                .parts
                .iter()
                .find(|p| p.env == *env)
                .and_then(|p| p.sigma.get(q).copied().flatten()),
            (LsPhase::Sample { comp, .. }, Some(split)) => {
                let info = &split.components[*comp as usize];
                let p = info.partition.as_ref().expect("partition");
                if q == p.from {
                    Some(p.action)
                } else {
                    info.ret.get(q).copied().flatten()
                }
            }
            _ => None,
        };
        pick.unwrap_or_else(|| self.default_action(q))
    }

    pub fn step(&self, m: &LsMem, q: StateId, a: ActionId, t: StateId) -> LsMem {
        if m.phase == LsPhase::Start {
            return self.step(&self.enter(self.root, self.k0, q), q, a, t);
        }
        let node = m.node as usize;
        let nd = self.engine.get(node);
        for link in self.chain(node) {
            match link {
                Link::Revealed(p) => {
                    let pn = self.engine.get(p);
                    let lp = &self.engine.model_entry(pn.model_id).model;
                    let kt = lp.knowledge(pn.k, q, a, t);
                    if !kt.is_empty() && kt != pn.k {
                        let child = self.engine.node(pn.model_id, kt);
                        return self.enter(child, Self::narrow(m.know, kt), t);
                    }
                }
                Link::Replaced(p) => {
                    let pn = self.engine.get(p);
                    let split = pn.split.as_ref().expect("split");
                    if let Some(c) = split.component_of.get(t).copied().flatten() {
                        return self.enter_sample(p, c, Self::narrow(m.know, pn.k), t);
                    }
                }
            }
        }
        let split = match &nd.split {
            None => return m.clone(),
            Some(s) => s,
        };
        let l = &self.engine.model_entry(nd.model_id).model;
        let in_sample = matches!(m.phase, LsPhase::Sample { .. });
        if !in_sample {
            let kt = l.knowledge(nd.k, q, a, t);
            if !kt.is_empty() && kt != nd.k {
                let child = self.engine.node(nd.model_id, kt);
                return self.enter(child, Self::narrow(m.know, kt), t);
            }
            if let Some(c) = split.component_of.get(t).copied().flatten() {
                return self.enter_sample(node, c, m.know, t);
            }
        }
        let with = |phase| LsMem {
            node: m.node,
            know: m.know,
            phase,
        };
        match &m.phase {
            LsPhase::Start | LsPhase::Single | LsPhase::Commit { .. } => m.clone(),
            LsPhase::Reach(am) => {
                if split.target[t] {
                    self.enter(node, m.know, t)
                } else {
                    with(LsPhase::Reach(split.reach.logic(nd.k).step(am, q, a, t)))
                }
            }
            LsPhase::Track { env, steps } => {
                let part = split.parts.iter().find(|p| p.env == *env).expect("part");
                if part.bottom.get(t).copied().unwrap_or(false) {
                    with(LsPhase::Commit { env: *env })
                } else if steps + 1 >= self.horizon(node, *env) {
                    let rest = self.engine.get(part.rest);
                    let know = m.know.without(*env);
                    self.enter(part.rest, if know.is_empty() { rest.k } else { know }, t)
                } else {
                    with(LsPhase::Track {
                        env: *env,
                        steps: steps + 1,
                    })
                }
            }
            LsPhase::Sample { comp, n, hits } => {
                let info = &split.components[*comp as usize];
                let p = info.partition.as_ref().expect("partition");
                if q != p.from || a != p.action {
                    return m.clone();
                }
                let n = n + 1;
                let hits = hits + u32::from(t == p.to);
                let (total, eta, _) = self.plan(node);
                if n < total {
                    return with(LsPhase::Sample { comp: *comp, n, hits });
                }
                let pivot_prob = l.prob(p.pivot, p.from, p.action, p.to);
                let freq = Rat::new(hits.into(), n.into());
                let (b1, b2) = info.blocks.expect("blocks");
                let (block, bk) = if (freq - pivot_prob).abs() < eta / int(2) {
                    (b1, p.k1)
                } else {
                    (b2, p.k2)
                };
                self.enter(block, Self::narrow(m.know, bk), t)
            }
        }
    }
}

impl<'a> StrategyLogic for LsLogic<'a> {
    type Mem = LsMem;

    fn start(&self) -> LsMem {
        self.start_memory()
    }

    fn act(&self, m: &LsMem, q: StateId) -> ActionId {
        self.action(m, q)
    }

    fn update(&self, m: &LsMem, q: StateId, a: ActionId, t: StateId) -> LsMem {
        self.step(m, q, a, t)
    }
}

/// Explicit strategy winning with probability at least `1 − eps` in every
/// environment of `k`, from every state of `starts`.
pub fn synthesize_ls_strategy_from(
    m: &Memdp,
    k: EnvSet,
    eps: &Rat,
    starts: &[StateId],
    cap: usize,
) -> Result<StrategyAutomaton, StrategyError> {
    if !eps.is_positive() || eps >= &Rat::one() {
        return Err(StrategyError::BadEpsilon);
    }
    let engine = LsEngine::new(m);
    let region = engine.region(k);
    if let Some(&q) = starts.iter().find(|q| !region.contains(**q)) {
        return Err(StrategyError::NotLimitSureWinning(m.state_name(q).to_string()));
    }
    let logic = LsLogic::new(&engine, k, eps);
    flatten(&logic, m, k, starts, cap)
}

/// ε-optimal strategy for the whole limit-sure region of `k`.
pub fn synthesize_ls_strategy(m: &Memdp, k: EnvSet, eps: &Rat, cap: usize) -> Result<StrategyAutomaton, StrategyError> {
    let region = ls_parity(m, k);
    let starts: Vec<StateId> = region.states.iter().copied().collect();
    synthesize_ls_strategy_from(m, k, eps, &starts, cap)
}
