//! Quantitative analysis: maximal common end-components of arbitrary models,
//! the purge reduction, synthesis constants, the polynomial constraint
//! system for bounded-memory strategies and a certified gap solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::QuantError;
use crate::eval::{evaluate_exact, solve_sparse};
use crate::graph::{ec_is_winning, tarjan, EndComponent, SupportMdp};
use crate::model::{encode_objective, ActionId, Dist, EnvId, EnvSet, Memdp, Objective, StateId};
use crate::numeric::{ceil_int, int, ln_upper, Rat};
use crate::strategy::{Choice, StrategyAutomaton};

/// All maximal common end-components of `m` over `k`. The model need not be
/// in revealed form.
pub fn mcecs_general(m: &Memdp, k: EnvSet) -> Vec<EndComponent> {
    let all: BTreeMap<StateId, Vec<ActionId>> = (0..m.num_states()).map(|q| (q, m.enabled(q).to_vec())).collect();
    let mut out = Vec::new();
    refine(m, k, all, &mut out);
    out.sort_by_key(|d| *d.pairs.keys().next().expect("nonempty"));
    out
}

fn refine(m: &Memdp, k: EnvSet, pairs: BTreeMap<StateId, Vec<ActionId>>, out: &mut Vec<EndComponent>) {
    let mask: Vec<bool> = (0..m.num_states()).map(|q| pairs.contains_key(&q)).collect();
    for e in k.iter() {
        let view = SupportMdp::env_view(m, e, EnvSet::singleton(e), &mask)
            .filtered(|q, a| pairs.get(&q).is_some_and(|v| v.contains(&a)));
        let mecs = view.mecs(&mask);
        if mecs.len() == 1 && mecs[0].pairs == pairs {
            continue;
        }
        for c in mecs {
            refine(m, k, c.pairs, out);
        }
        return;
    }
    out.push(EndComponent { pairs, scope: k });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum McecKind {
    Distinguishing,
    Winning,
    Losing,
    /// A single state whose retained actions all loop on it.
    Trivial,
}

/// Classification of a common end-component under the model's priorities.
pub fn classify_mcec(m: &Memdp, d: &EndComponent) -> McecKind {
    let first = match d.scope.first() {
        Some(e) => e,
        None => return McecKind::Trivial,
    };
    for (&q, acts) in &d.pairs {
        for &a in acts {
            let base = m.dist(first, q, a);
            if d.scope.iter().any(|e| m.dist(e, q, a) != base) {
                return McecKind::Distinguishing;
            }
        }
    }
    let looping = d.pairs.len() == 1
        && d.pairs
            .iter()
            .all(|(&q, acts)| acts.iter().all(|&a| m.dist(first, q, a) == &Dist::dirac(q)));
    if looping {
        McecKind::Trivial
    } else if ec_is_winning(&d.states(), m.priorities()) {
        McecKind::Winning
    } else {
        McecKind::Losing
    }
}

/// Output of [`purge`].
#[derive(Clone, Debug)]
pub struct PurgeResult {
    pub model: Memdp,
    /// Image of every input state in the output model.
    pub state_map: Vec<StateId>,
    /// Collapsed components with their winning flag.
    pub collapsed: Vec<(EndComponent, bool)>,
    /// Output state of each collapsed component.
    pub collapsed_states: Vec<StateId>,
    /// Output action for every pair leaving a collapsed component.
    pub frontier: BTreeMap<(StateId, ActionId), ActionId>,
    pub stay: ActionId,
}

impl PurgeResult {
    /// Output state standing for input state `q`.
    pub fn image(&self, q: StateId) -> StateId {
        self.state_map[q]
    }
}

pub const STAY: &str = "stay";

fn frontier_name(q: &str, a: &str) -> String {
    format!("F({q},{a})")
}

/// Collapses every non-distinguishing maximal common end-component into a
/// single state offering `stay`, which moves to the winning or losing sink,
/// and one frontier action per pair leaving the component.
pub fn purge(m: &Memdp) -> PurgeResult {
    let src = m.with_sinks();
    let k = src.all_envs();
    let win = src.win_sink().expect("sink");
    let lose = src.lose_sink().expect("sink");
    let mut collapsed = Vec::new();
    for d in mcecs_general(&src, k) {
        if d.contains(win) || d.contains(lose) {
            continue;
        }
        match classify_mcec(&src, &d) {
            McecKind::Distinguishing => {}
            kind => {
                let w = match kind {
                    McecKind::Trivial => ec_is_winning(&d.states(), src.priorities()),
                    k => k == McecKind::Winning,
                };
                collapsed.push((d, w));
            }
        }
    }
    let n = src.num_states();
    let mut comp_of: Vec<Option<usize>> = vec![None; n];
    for (i, (d, _)) in collapsed.iter().enumerate() {
        for &q in d.pairs.keys() {
            comp_of[q] = Some(i);
        }
    }

    let mut names = Vec::new();
    let mut state_map = vec![usize::MAX; n];
    let mut collapsed_states = vec![usize::MAX; collapsed.len()];
    for q in 0..n {
        match comp_of[q] {
            None => {
                state_map[q] = names.len();
                names.push(src.state_name(q).to_string());
            }
            Some(i) => {
                if collapsed_states[i] == usize::MAX {
                    collapsed_states[i] = names.len();
                    let members: Vec<&str> = collapsed[i].0.pairs.keys().map(|&s| src.state_name(s)).collect();
                    names.push(format!("D[{}]", members.join(",")));
                }
                state_map[q] = collapsed_states[i];
            }
        }
    }

    let mut actions: Vec<String> = src.action_names().to_vec();
    let stay = match actions.iter().position(|a| a == STAY) {
        Some(a) => a,
        None => {
            actions.push(STAY.to_string());
            actions.len() - 1
        }
    };
    let mut frontier = BTreeMap::new();
    for (d, _) in &collapsed {
        for (&q, inside) in &d.pairs {
            for &a in src.enabled(q) {
                if !inside.contains(&a) {
                    actions.push(frontier_name(src.state_name(q), src.action_name(a)));
                    frontier.insert((q, a), actions.len() - 1);
                }
            }
        }
    }

    let out_n = names.len();
    let envs = src.num_envs();
    let mut enabled: Vec<Vec<ActionId>> = vec![Vec::new(); out_n];
    let mut rows: Vec<Vec<Vec<(ActionId, Dist)>>> = vec![vec![Vec::new(); out_n]; envs];
    let mut priority = vec![1u32; out_n];
    for q in 0..n {
        let t = state_map[q];
        match comp_of[q] {
            None => {
                priority[t] = src.priority(q);
                for &a in src.enabled(q) {
                    for (e, row) in rows.iter_mut().enumerate() {
                        row[t].push((a, src.dist(e, q, a).map_states(|s| state_map[s])));
                    }
                }
            }
            Some(i) => {
                let (d, w) = &collapsed[i];
                if q == *d.pairs.keys().next().expect("nonempty") {
                    priority[t] = d.states().iter().map(|&s| src.priority(s)).min().expect("nonempty");
                    let sink = state_map[if *w { win } else { lose }];
                    for row in rows.iter_mut() {
                        row[t].push((stay, Dist::dirac(sink)));
                    }
                }
                for &a in src.enabled(q) {
                    if let Some(&f) = frontier.get(&(q, a)) {
                        for (e, row) in rows.iter_mut().enumerate() {
                            row[t].push((f, src.dist(e, q, a).map_states(|s| state_map[s])));
                        }
                    }
                }
            }
        }
    }
    let mut delta: Vec<Vec<Vec<Dist>>> = vec![Vec::with_capacity(out_n); envs];
    for q in 0..out_n {
        let mut order: Vec<usize> = (0..rows[0][q].len()).collect();
        order.sort_by_key(|&i| rows[0][q][i].0);
        enabled[q] = order.iter().map(|&i| rows[0][q][i].0).collect();
        for e in 0..envs {
            delta[e].push(order.iter().map(|&i| rows[e][q][i].1.clone()).collect());
        }
    }
    let model = Memdp {
        states: names,
        actions,
        envs: src.env_names().to_vec(),
        enabled,
        delta,
        priority,
        initial: state_map[src.initial()],
        win_sink: Some(state_map[win]),
        lose_sink: Some(state_map[lose]),
    };
    PurgeResult {
        model,
        state_map: state_map[..m.num_states()].to_vec(),
        collapsed,
        collapsed_states,
        frontier,
        stay,
    }
}

/// `base^exponent · coefficient`, kept factored because the exponent is far
/// too large to expand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactoredBound {
    pub base: BigUint,
    pub exponent: BigUint,
    pub coefficient: BigUint,
}

impl FactoredBound {
    pub fn log2(&self) -> f64 {
        let lb = self.base.to_f64().unwrap_or(f64::MAX).log2();
        let e = self.exponent.to_f64().unwrap_or(f64::INFINITY);
        e * lb + self.coefficient.to_f64().unwrap_or(f64::MAX).log2()
    }

    /// The bound as an integer, if it has at most `max_bits` bits.
    pub fn expand(&self, max_bits: u64) -> Option<BigUint> {
        if self.log2() > max_bits as f64 {
            return None;
        }
        let e = self.exponent.to_u32()?;
        Some(num_traits::pow(self.base.clone(), e as usize) * &self.coefficient)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisConstants {
    /// A quarter of the least nonzero cross-environment difference.
    pub eta: Rat,
    /// Least positive transition probability.
    pub nu: Rat,
    pub n0: BigUint,
    pub n: BigUint,
    /// Memory bound with the `⌈8(ln(8/ε)/η²)²⌉` factor.
    pub memory: FactoredBound,
    /// `⌈8(ln(1/ε)/η²)²⌉`, the counter bound of a single sampling loop.
    pub sampling_memory: BigUint,
}

fn to_biguint(r: &Rat) -> BigUint {
    ceil_int(r).to_biguint().unwrap_or_default()
}

fn sampling_factor(eps_arg: &Rat, eta: &Rat) -> BigUint {
    let l = ln_upper(eps_arg) / (eta * eta);
    to_biguint(&(int(8) * &l * &l))
}

/// Constants from the model's sizes and probabilities.
pub fn synthesis_constants(states: usize, actions: usize, envs: usize, nu: &Rat, eta: &Rat, eps: &Rat) -> SynthesisConstants {
    let qa = int((states * actions) as i64);
    let n0 = to_biguint(&(int(8) * &qa * &qa * &qa / (eps * eta * eta)));
    let nu_pow: Rat = num_traits::pow(nu.recip(), 2 * states);
    let lg = ln_upper(&(int(16) / eps));
    let n0r = Rat::from_integer(BigInt::from(n0.clone()));
    let inner = if n0r > lg { n0r } else { lg };
    let n = to_biguint(&(int(2) * nu_pow * inner));
    let memory = FactoredBound {
        base: BigUint::from(2 * states),
        exponent: &n * BigUint::from(envs + 1),
        coefficient: BigUint::from(actions) * sampling_factor(&(int(8) / eps), eta),
    };
    SynthesisConstants {
        eta: eta.clone(),
        nu: nu.clone(),
        n0,
        n,
        memory,
        sampling_memory: sampling_factor(&eps.recip(), eta),
    }
}

/// Constants of `m` for error `eps`.
pub fn memory_bound(m: &Memdp, eps: &Rat) -> Result<SynthesisConstants, QuantError> {
    let k = m.all_envs();
    let diff = m.min_difference(k).ok_or(QuantError::NoDistinguishingTransition)?;
    Ok(synthesis_constants(
        m.num_states(),
        m.num_actions(),
        m.num_envs(),
        &m.min_positive_prob(k),
        &(diff / int(4)),
        eps,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct XVar {
    pub env: EnvId,
    pub state: StateId,
    pub mem: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PVar {
    pub state: StateId,
    pub mem: usize,
    pub action: ActionId,
    pub next: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(XVar),
    P(PVar),
}

impl Var {
    pub fn smt_name(&self) -> String {
        match self {
            Var::X(x) => format!("x_{}_{}_{}", x.env, x.state, x.mem),
            Var::P(p) => format!("p_{}_{}_{}_{}", p.state, p.mem, p.action, p.next),
        }
    }
}

/// Coefficient times a product of variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coef: Rat,
    pub vars: Vec<Var>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ge,
    Gt,
    Le,
}

impl Relation {
    fn smt(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Le => "<=",
        }
    }
}

/// `Σ terms  rel  rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<Monomial>,
    pub rel: Relation,
    pub rhs: Rat,
}

/// Polynomial system whose solutions are the `mem`-memory stochastic
/// strategies reaching the targets with probability at least `alpha − eps`
/// in every environment.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub model: Memdp,
    pub mem: usize,
    pub alpha: Rat,
    pub eps: Rat,
    /// Target (state, memory) pairs per environment.
    pub targets: Vec<BTreeSet<(StateId, usize)>>,
    /// Externally fixed zero sets per environment.
    pub qno: Option<Vec<BTreeSet<(StateId, usize)>>>,
    pub x_vars: Vec<XVar>,
    pub p_vars: Vec<PVar>,
    /// States whose choice is a variable; absorbing states are fixed.
    pub decision_states: Vec<StateId>,
    pub constraints: Vec<Constraint>,
}

/// Builds the system for state targets `targets[e]` with `mem` memory states.
pub fn build_gap_constraints(
    m: &Memdp,
    targets: &[BTreeSet<StateId>],
    mem: usize,
    alpha: &Rat,
    eps: &Rat,
    support: Option<&BTreeSet<PVar>>,
    qno: Option<&[BTreeSet<StateId>]>,
) -> ConstraintSystem {
    let expand = |s: &BTreeSet<StateId>| -> BTreeSet<(StateId, usize)> {
        s.iter().flat_map(|&q| (0..mem).map(move |i| (q, i))).collect()
    };
    let t = targets.iter().map(expand).collect();
    let z = qno.map(|v| v.iter().map(expand).collect());
    build_memory_constraints(m, t, mem, alpha, eps, support, z)
}

/// Same as [`build_gap_constraints`] with targets and zero sets given over
/// (state, memory) pairs.
pub fn build_memory_constraints(
    m: &Memdp,
    targets: Vec<BTreeSet<(StateId, usize)>>,
    mem: usize,
    alpha: &Rat,
    eps: &Rat,
    support: Option<&BTreeSet<PVar>>,
    qno: Option<Vec<BTreeSet<(StateId, usize)>>>,
) -> ConstraintSystem {
    assert!(mem >= 1, "at least one memory state");
    assert_eq!(targets.len(), m.num_envs(), "one target set per environment");
    let n = m.num_states();
    let decision_states: Vec<StateId> = (0..n).filter(|&q| !m.is_absorbing(q)).collect();
    let mut x_vars = Vec::new();
    for e in 0..m.num_envs() {
        for q in 0..n {
            for i in 0..mem {
                x_vars.push(XVar { env: e, state: q, mem: i });
            }
        }
    }
    let mut p_vars = Vec::new();
    for &q in &decision_states {
        for i in 0..mem {
            for &a in m.enabled(q) {
                for j in 0..mem {
                    p_vars.push(PVar {
                        state: q,
                        mem: i,
                        action: a,
                        next: j,
                    });
                }
            }
        }
    }
    let mut cs = Vec::new();
    let one = |v: Var| Monomial { coef: Rat::one(), vars: vec![v] };
    for &q in &decision_states {
        for i in 0..mem {
            let row: Vec<PVar> = p_vars.iter().filter(|p| p.state == q && p.mem == i).copied().collect();
            cs.push(Constraint {
                terms: row.iter().map(|&p| one(Var::P(p))).collect(),
                rel: Relation::Eq,
                rhs: Rat::one(),
            });
            for p in row {
                let rel = match support {
                    Some(s) if s.contains(&p) => Relation::Gt,
                    Some(_) => Relation::Eq,
                    None => Relation::Ge,
                };
                cs.push(Constraint {
                    terms: vec![one(Var::P(p))],
                    rel,
                    rhs: Rat::zero(),
                });
            }
        }
    }
    for x in &x_vars {
        let key = (x.state, x.mem);
        let fixed = if targets[x.env].contains(&key) {
            Some(Rat::one())
        } else if qno.as_ref().is_some_and(|z| z[x.env].contains(&key)) || m.is_absorbing(x.state) {
            Some(Rat::zero())
        } else {
            None
        };
        if let Some(v) = fixed {
            cs.push(Constraint {
                terms: vec![one(Var::X(*x))],
                rel: Relation::Eq,
                rhs: v,
            });
            continue;
        }
        let mut terms = vec![one(Var::X(*x))];
        for &a in m.enabled(x.state) {
            for j in 0..mem {
                let p = Var::P(PVar {
                    state: x.state,
                    mem: x.mem,
                    action: a,
                    next: j,
                });
                for (t, pr) in m.dist(x.env, x.state, a).entries() {
                    terms.push(Monomial {
                        coef: -pr.clone(),
                        vars: vec![
                            p,
                            Var::X(XVar {
                                env: x.env,
                                state: *t,
                                mem: j,
                            }),
                        ],
                    });
                }
            }
        }
        cs.push(Constraint {
            terms,
            rel: Relation::Eq,
            rhs: Rat::zero(),
        });
        cs.push(Constraint {
            terms: vec![one(Var::X(*x))],
            rel: Relation::Ge,
            rhs: Rat::zero(),
        });
        cs.push(Constraint {
            terms: vec![one(Var::X(*x))],
            rel: Relation::Le,
            rhs: Rat::one(),
        });
    }
    for e in 0..m.num_envs() {
        cs.push(Constraint {
            terms: vec![one(Var::X(XVar {
                env: e,
                state: m.initial(),
                mem: 0,
            }))],
            rel: Relation::Ge,
            rhs: alpha - eps,
        });
    }
    ConstraintSystem {
        model: m.clone(),
        mem,
        alpha: alpha.clone(),
        eps: eps.clone(),
        targets,
        qno,
        x_vars,
        p_vars,
        decision_states,
        constraints: cs,
    }
}

fn smt_rat(r: &Rat) -> String {
    let body = if r.is_integer() {
        r.numer().abs().to_string()
    } else {
        format!("(/ {} {})", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

impl ConstraintSystem {
    pub fn num_x(&self) -> usize {
        self.x_vars.len()
    }

    pub fn num_p(&self) -> usize {
        self.p_vars.len()
    }

    /// Simplex rows, one per decision state and memory state.
    pub fn num_p_rows(&self) -> usize {
        self.decision_states.len() * self.mem
    }

    /// SMT-LIB 2 script over QF_NRA; declarations and assertions come in
    /// (env, state, memory) order.
    pub fn to_smtlib(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        s.push_str("(set-logic QF_NRA)\n");
        for x in &self.x_vars {
            let _ = writeln!(
                s,
                "(declare-const {} Real) ; {} {} {}",
                Var::X(*x).smt_name(),
                m.env_name(x.env),
                m.state_name(x.state),
                x.mem
            );
        }
        for p in &self.p_vars {
            let _ = writeln!(
                s,
                "(declare-const {} Real) ; {} {} {} {}",
                Var::P(*p).smt_name(),
                m.state_name(p.state),
                p.mem,
                m.action_name(p.action),
                p.next
            );
        }
        for c in &self.constraints {
            let terms: Vec<String> = c
                .terms
                .iter()
                .map(|t| {
                    let mut f: Vec<String> = Vec::new();
                    if !t.coef.is_one() {
                        f.push(smt_rat(&t.coef));
                    }
                    f.extend(t.vars.iter().map(Var::smt_name));
                    if f.len() == 1 {
                        f.pop().expect("one factor")
                    } else {
                        format!("(* {})", f.join(" "))
                    }
                })
                .collect();
            let lhs = if terms.len() == 1 {
                terms[0].clone()
            } else {
                format!("(+ {})", terms.join(" "))
            };
            let _ = writeln!(s, "(assert ({} {} {}))", c.rel.smt(), lhs, smt_rat(&c.rhs));
        }
        s.push_str("(check-sat)\n");
        s
    }

    /// Strategy reading off an assignment of the choice variables.
    pub fn strategy(&self, p: &PAssignment) -> StrategyAutomaton {
        let mut sigma = StrategyAutomaton::new(self.mem, 0);
        for &q in &self.decision_states {
            for i in 0..self.mem {
                let choices: Vec<Choice> = self
                    .p_vars
                    .iter()
                    .filter(|v| v.state == q && v.mem == i)
                    .filter_map(|v| {
                        let pr = p.get(v)?;
                        (!pr.is_zero()).then(|| Choice {
                            action: v.action,
                            prob: pr.clone(),
                            memory: Some(v.next),
                        })
                    })
                    .collect();
                sigma.set_output(i, q, choices);
            }
        }
        sigma
    }

    fn check_simplex(&self, p: &PAssignment) -> Result<(), QuantError> {
        for &q in &self.decision_states {
            for i in 0..self.mem {
                let mut total = Rat::zero();
                for v in self.p_vars.iter().filter(|v| v.state == q && v.mem == i) {
                    if let Some(x) = p.get(v) {
                        if x.is_negative() {
                            return Err(self.off_simplex(q, i));
                        }
                        total += x;
                    }
                }
                if !total.is_one() {
                    return Err(self.off_simplex(q, i));
                }
            }
        }
        Ok(())
    }

    fn off_simplex(&self, q: StateId, i: usize) -> QuantError {
        QuantError::NotOnSimplex {
            state: self.model.state_name(q).to_string(),
            memory: i,
        }
    }
}

/// Values of the choice variables; absent entries are zero.
pub type PAssignment = BTreeMap<PVar, Rat>;

/// Reach probabilities indexed by environment, state and memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XValues {
    pub values: Vec<Vec<Vec<Rat>>>,
}

impl XValues {
    pub fn get(&self, e: EnvId, q: StateId, i: usize) -> &Rat {
        &self.values[e][q][i]
    }
}

/// Solves the system for a fixed choice assignment. The zero sets are the
/// pairs that cannot reach a target under `p`, unless fixed in the system.
pub fn evaluate_constraints_for_fixed_p(sys: &ConstraintSystem, p: &PAssignment) -> Result<XValues, QuantError> {
    sys.check_simplex(p)?;
    let m = &sys.model;
    let n = m.num_states();
    let mem = sys.mem;
    let idx = |q: StateId, i: usize| q * mem + i;
    let mut values = Vec::new();
    for e in 0..m.num_envs() {
        let size = n * mem;
        let mut succ: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); size];
        for &q in &sys.decision_states {
            for i in 0..mem {
                let mut out: BTreeMap<usize, Rat> = BTreeMap::new();
                for v in sys.p_vars.iter().filter(|v| v.state == q && v.mem == i) {
                    let pr = match p.get(v) {
                        Some(x) if !x.is_zero() => x,
                        _ => continue,
                    };
                    for (t, d) in m.dist(e, q, v.action).entries() {
                        *out.entry(idx(*t, v.next)).or_insert_with(Rat::zero) += pr * d;
                    }
                }
                succ[idx(q, i)] = out.into_iter().collect();
            }
        }
        let target: Vec<bool> = (0..size).map(|s| sys.targets[e].contains(&(s / mem, s % mem))).collect();
        let zero: Vec<bool> = match &sys.qno {
            Some(z) => (0..size)
                .map(|s| !target[s] && (z[e].contains(&(s / mem, s % mem)) || m.is_absorbing(s / mem)))
                .collect(),
            None => {
                let mut reach = target.clone();
                let mut changed = true;
                while changed {
                    changed = false;
                    for s in 0..size {
                        if !reach[s] && succ[s].iter().any(|(t, _)| reach[*t]) {
                            reach[s] = true;
                            changed = true;
                        }
                    }
                }
                reach.iter().map(|r| !r).collect()
            }
        };
        let unknown: Vec<usize> = (0..size).filter(|&s| !target[s] && !zero[s]).collect();
        let pos: BTreeMap<usize, usize> = unknown.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut rows = Vec::with_capacity(unknown.len());
        let mut rhs = Vec::with_capacity(unknown.len());
        for &s in &unknown {
            let mut row: BTreeMap<usize, Rat> = BTreeMap::new();
            row.insert(pos[&s], Rat::one());
            let mut b = Rat::zero();
            for (t, pr) in &succ[s] {
                if target[*t] {
                    b += pr;
                } else if let Some(&j) = pos.get(t) {
                    *row.entry(j).or_insert_with(Rat::zero) -= pr;
                }
            }
            row.retain(|_, v| !v.is_zero());
            rows.push(row);
            rhs.push(b);
        }
        let sol = solve_sparse(rows, rhs).ok_or(QuantError::SingularSystem)?;
        let mut x = vec![vec![Rat::zero(); mem]; n];
        for s in 0..size {
            if target[s] {
                x[s / mem][s % mem] = Rat::one();
            } else if let Some(&j) = pos.get(&s) {
                x[s / mem][s % mem] = sol[j].clone();
            }
        }
        values.push(x);
    }
    Ok(XValues { values })
}

/// Search effort of [`solve_gap`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Support enumeration is used when `(|Q|·mem)²·|A|` is at most this.
    pub exhaustive_limit: usize,
    /// Largest number of supports enumerated per memory size.
    pub max_supports: usize,
}

impl Default for GapBudget {
    fn default() -> Self {
        GapBudget {
            restarts: 16,
            iterations: 400,
            seed: 0,
            exhaustive_limit: 64,
            max_supports: 4096,
        }
    }
}

#[derive(Clone, Debug)]
pub enum GapAnswer {
    /// Strategy with its exact value per environment.
    Yes {
        strategy: StrategyAutomaton,
        values: Vec<Rat>,
        memory: usize,
    },
    /// No strategy with at most `mem_cap` memory states was found.
    NoWithinBudget {
        mem_cap: usize,
        candidates: usize,
        budget: GapBudget,
    },
}

impl GapAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, GapAnswer::Yes { .. })
    }
}

struct Search<'a> {
    model: &'a Memdp,
    mem: usize,
    /// Row of every (decision state, memory) pair: its variables.
    rows: Vec<Vec<PVar>>,
}

impl<'a> Search<'a> {
    fn new(model: &'a Memdp, mem: usize) -> Search<'a> {
        let mut rows = Vec::new();
        for q in (0..model.num_states()).filter(|&q| !model.is_absorbing(q)) {
            for i in 0..mem {
                let mut row = Vec::new();
                for &a in model.enabled(q) {
                    for j in 0..mem {
                        row.push(PVar {
                            state: q,
                            mem: i,
                            action: a,
                            next: j,
                        });
                    }
                }
                rows.push(row);
            }
        }
        Search { model, mem, rows }
    }

    /// Approximate min-over-environment value of a floating assignment.
    fn score(&self, w: &[Vec<f64>]) -> f64 {
        let m = self.model;
        let mem = self.mem;
        let size = m.num_states() * mem;
        let mut worst = f64::INFINITY;
        for e in 0..m.num_envs() {
            let mut succ: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
            for q in 0..m.num_states() {
                if m.is_absorbing(q) {
                    for i in 0..mem {
                        succ[q * mem + i].push((q * mem + i, 1.0));
                    }
                }
            }
            for (row, ws) in self.rows.iter().zip(w) {
                for (v, &pw) in row.iter().zip(ws) {
                    if pw <= 0.0 {
                        continue;
                    }
                    for (t, d) in m.dist(e, v.state, v.action).entries() {
                        succ[v.state * mem + v.mem].push((t * mem + v.next, pw * d.to_f64().unwrap_or(0.0)));
                    }
                }
            }
            let adj: Vec<Vec<usize>> = succ.iter().map(|v| v.iter().map(|x| x.0).collect()).collect();
            let good = winning_bottoms(&adj, |s| m.priority(s / mem));
            let mut x: Vec<f64> = good.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
            for _ in 0..2000 {
                let mut delta: f64 = 0.0;
                for s in 0..size {
                    if good[s] {
                        continue;
                    }
                    let v: f64 = succ[s].iter().map(|(t, p)| p * x[*t]).sum();
                    delta = delta.max((v - x[s]).abs());
                    x[s] = v;
                }
                if delta < 1e-13 {
                    break;
                }
            }
            worst = worst.min(x[m.initial() * mem]);
        }
        worst
    }

    /// Exact assignment near a floating one, on the same support.
    fn snap(&self, w: &[Vec<f64>]) -> PAssignment {
        const SCALE: i64 = 1 << 16;
        let mut p = PAssignment::new();
        for (row, ws) in self.rows.iter().zip(w) {
            let total: f64 = ws.iter().sum();
            let mut ints: Vec<i64> = ws.iter().map(|x| ((x / total) * SCALE as f64).round() as i64).collect();
            let biggest = (0..ints.len()).max_by_key(|&i| ints[i]).expect("nonempty row");
            let rest: i64 = ints.iter().enumerate().filter(|(i, _)| *i != biggest).map(|(_, v)| v).sum();
            ints[biggest] = SCALE - rest;
            for (v, c) in row.iter().zip(ints) {
                if c > 0 {
                    p.insert(*v, Rat::new(c.into(), SCALE.into()));
                }
            }
        }
        p
    }
}

/// Bottom components of the graph whose least priority is even, as a mask.
fn winning_bottoms(adj: &[Vec<usize>], priority: impl Fn(usize) -> u32) -> Vec<bool> {
    let n = adj.len();
    let comps = tarjan(adj, &vec![true; n]);
    let mut comp_of = vec![0; n];
    for (c, v) in comps.iter().enumerate() {
        for &s in v {
            comp_of[s] = c;
        }
    }
    let mut good = vec![false; n];
    for (c, v) in comps.iter().enumerate() {
        let bottom = v.iter().all(|&s| adj[s].iter().all(|&t| comp_of[t] == c));
        if bottom && v.iter().map(|&s| priority(s)).min().is_some_and(|p| p % 2 == 0) {
            for &s in v {
                good[s] = true;
            }
        }
    }
    good
}

/// Winning bottom components of the chain induced by `p` in each environment,
/// as (state, memory) targets.
pub fn bottom_targets(m: &Memdp, mem: usize, p: &PAssignment) -> Vec<BTreeSet<(StateId, usize)>> {
    let size = m.num_states() * mem;
    (0..m.num_envs())
        .map(|e| {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); size];
            for q in 0..m.num_states() {
                if m.is_absorbing(q) {
                    for i in 0..mem {
                        adj[q * mem + i].push(q * mem + i);
                    }
                }
            }
            for (v, pr) in p {
                if pr.is_zero() {
                    continue;
                }
                for t in m.dist(e, v.state, v.action).support() {
                    adj[v.state * mem + v.mem].push(t * mem + v.next);
                }
            }
            winning_bottoms(&adj, |s| m.priority(s / mem))
                .into_iter()
                .enumerate()
                .filter(|(_, g)| *g)
                .map(|(s, _)| (s / mem, s % mem))
                .collect()
        })
        .collect()
}

/// Exact value per environment of `p` for the parity objective of `m`,
/// through the constraint system.
pub fn certify(m: &Memdp, mem: usize, p: &PAssignment) -> Result<Vec<Rat>, QuantError> {
    let targets = bottom_targets(m, mem, p);
    let sys = build_memory_constraints(m, targets, mem, &Rat::zero(), &Rat::zero(), None, None);
    let x = evaluate_constraints_for_fixed_p(&sys, p)?;
    Ok((0..m.num_envs()).map(|e| x.get(e, m.initial(), 0).clone()).collect())
}

/// Looks for a strategy with at most `mem_cap` memory states whose value is
/// at least `alpha − eps` in every environment. Every positive answer is
/// certified by exact evaluation.
pub fn solve_gap(m: &Memdp, obj: &Objective, alpha: &Rat, eps: &Rat, mem_cap: usize, budget: &GapBudget) -> GapAnswer {
    let enc = encode_objective(m, obj);
    let goal = alpha - eps;
    let cap = if enc.num_envs() == 1 { 1 } else { mem_cap.max(1) };
    let mut candidates = 0usize;
    let check = |mem: usize, p: &PAssignment, candidates: &mut usize| -> Option<GapAnswer> {
        *candidates += 1;
        let values = certify(&enc, mem, p).ok()?;
        if values.iter().any(|v| v < &goal) {
            return None;
        }
        let strategy = build_memory_constraints(&enc, vec![BTreeSet::new(); enc.num_envs()], mem, alpha, eps, None, None)
            .strategy(p);
        let exact = evaluate_exact(&enc, enc.all_envs(), &strategy, enc.initial()).ok()?;
        let values: Vec<Rat> = exact.per_env.iter().map(|v| v.value.clone()).collect();
        if !exact.is_exact() || values.iter().any(|v| v < &goal) {
            return None;
        }
        Some(GapAnswer::Yes {
            strategy,
            values,
            memory: mem,
        })
    };
    for mem in 1..=cap {
        let search = Search::new(&enc, mem);
        let q = enc.num_states() * mem;
        if q * q * enc.num_actions() <= budget.exhaustive_limit {
            let mut masks: Vec<u64> = vec![1; search.rows.len()];
            let mut seen = 0;
            loop {
                let w: Vec<Vec<f64>> = search
                    .rows
                    .iter()
                    .zip(&masks)
                    .map(|(row, &mk)| (0..row.len()).map(|i| if mk >> i & 1 == 1 { 1.0 } else { 0.0 }).collect())
                    .collect();
                if let Some(ans) = check(mem, &search.snap(&w), &mut candidates) {
                    return ans;
                }
                seen += 1;
                if seen >= budget.max_supports || !next_support(&mut masks, &search.rows) {
                    break;
                }
            }
        }
        for restart in 0..budget.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            rng.set_stream((mem as u64) << 32 | restart as u64);
            let mut w: Vec<Vec<f64>> = search
                .rows
                .iter()
                .map(|row| {
                    let v: Vec<f64> = (0..row.len()).map(|_| rng.gen::<f64>() + 1e-3).collect();
                    let s: f64 = v.iter().sum();
                    v.into_iter().map(|x| x / s).collect()
                })
                .collect();
            let mut best = search.score(&w);
            let mut step = 0.5;
            for _ in 0..budget.iterations {
                if search.rows.is_empty() {
                    break;
                }
                let r = rng.gen_range(0..search.rows.len());
                let len = w[r].len();
                if len < 2 {
                    continue;
                }
                let from = rng.gen_range(0..len);
                let to = (from + rng.gen_range(1..len)) % len;
                let amount = (step * rng.gen::<f64>()).min(w[r][from]);
                let saved = w[r].clone();
                w[r][from] -= amount;
                w[r][to] += amount;
                let s = search.score(&w);
                if s >= best {
                    best = s;
                } else {
                    w[r] = saved;
                    step *= 0.97;
                }
                step = step.max(1e-4);
            }
            if let Some(ans) = check(mem, &search.snap(&w), &mut candidates) {
                return ans;
            }
        }
    }
    GapAnswer::NoWithinBudget {
        mem_cap: cap,
        candidates,
        budget: budget.clone(),
    }
}

/// Advances to the next tuple of nonempty supports; false after the last one.
fn next_support(masks: &mut [u64], rows: &[Vec<PVar>]) -> bool {
    for (mk, row) in masks.iter_mut().zip(rows) {
        let full = if row.len() >= 64 { u64::MAX } else { (1u64 << row.len()) - 1 };
        if *mk < full {
            *mk += 1;
            return true;
        }
        *mk = 1;
    }
    false
}
