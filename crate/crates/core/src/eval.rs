//! Exact evaluation of finite-memory strategies on product chains, and
//! seeded Monte-Carlo simulation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::StrategyError;
use crate::graph::tarjan;
use crate::model::{EnvId, EnvSet, Memdp, StateId};
use crate::numeric::{to_f64, Rat};
use crate::strategy::StrategyAutomaton;

/// Components larger than this are solved in floating point.
pub const EXACT_BLOCK_LIMIT: usize = 10_000;

/// Largest product chain that will be built.
pub const PRODUCT_CAP: usize = 5_000_000;

/// Markov chain induced by a strategy in one environment, restricted to the
/// part reachable from the start.
#[derive(Clone, Debug)]
pub struct ProductChain {
    /// (model state, memory) of every product state; index 0 is the start.
    pub nodes: Vec<(StateId, usize)>,
    pub succ: Vec<Vec<(usize, Rat)>>,
    /// `Some(true)` inside a winning bottom component, `Some(false)` inside a losing one.
    pub bottom: Vec<Option<bool>>,
    pub bsccs: usize,
    pub winning_bsccs: usize,
    comps: Vec<Vec<usize>>,
}

impl ProductChain {
    pub fn build(model: &Memdp, e: EnvId, sigma: &StrategyAutomaton, q0: StateId) -> Result<ProductChain, StrategyError> {
        let mut ids: HashMap<(StateId, usize), usize> = HashMap::new();
        let mut nodes = vec![(q0, sigma.initial)];
        ids.insert((q0, sigma.initial), 0);
        let mut succ: Vec<Vec<(usize, Rat)>> = Vec::new();
        let mut i = 0;
        while i < nodes.len() {
            let (q, m) = nodes[i];
            let mut out: BTreeMap<usize, Rat> = BTreeMap::new();
            for c in sigma.output_or_default(model, m, q) {
                for (t, p) in model.dist(e, q, c.action).entries() {
                    let m2 = c.memory.unwrap_or_else(|| sigma.next(m, q, c.action, *t));
                    let key = (*t, m2);
                    let j = match ids.get(&key) {
                        Some(&j) => j,
                        None => {
                            if nodes.len() >= PRODUCT_CAP {
                                return Err(StrategyError::MemoryBudgetExceeded { limit: PRODUCT_CAP });
                            }
                            nodes.push(key);
                            ids.insert(key, nodes.len() - 1);
                            nodes.len() - 1
                        }
                    };
                    *out.entry(j).or_insert_with(Rat::zero) += &c.prob * p;
                }
            }
            succ.push(out.into_iter().filter(|(_, p)| !p.is_zero()).collect());
            i += 1;
        }
        let adj: Vec<Vec<usize>> = succ.iter().map(|v| v.iter().map(|(j, _)| *j).collect()).collect();
        let comps = tarjan(&adj, &vec![true; nodes.len()]);
        let mut comp_of = vec![0usize; nodes.len()];
        for (c, members) in comps.iter().enumerate() {
            for &s in members {
                comp_of[s] = c;
            }
        }
        let mut bottom = vec![None; nodes.len()];
        let (mut bsccs, mut winning_bsccs) = (0, 0);
        for (c, members) in comps.iter().enumerate() {
            if members.iter().all(|&s| adj[s].iter().all(|&t| comp_of[t] == c)) {
                let min = members.iter().map(|&s| model.priority(nodes[s].0)).min().expect("nonempty");
                let win = min % 2 == 0;
                bsccs += 1;
                if win {
                    winning_bsccs += 1;
                }
                for &s in members {
                    bottom[s] = Some(win);
                }
            }
        }
        Ok(ProductChain {
            nodes,
            succ,
            bottom,
            bsccs,
            winning_bsccs,
            comps,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Probability of reaching a winning bottom component, per product state.
    /// The flag is false when some component was solved in floating point.
    pub fn values(&self) -> (Vec<Rat>, bool) {
        let n = self.len();
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, v) in self.succ.iter().enumerate() {
            for (t, _) in v {
                pred[*t].push(s);
            }
        }
        let mut can_win = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&s| self.bottom[s] == Some(true)).collect();
        for &s in &stack {
            can_win[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &pred[s] {
                if !can_win[p] {
                    can_win[p] = true;
                    stack.push(p);
                }
            }
        }
        let mut x = vec![Rat::zero(); n];
        let mut exact = true;
        for comp in &self.comps {
            let first = comp[0];
            if let Some(w) = self.bottom[first] {
                if w {
                    for &s in comp {
                        x[s] = Rat::one();
                    }
                }
                continue;
            }
            if !comp.iter().any(|&s| can_win[s]) {
                continue;
            }
            let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let mut rows: Vec<BTreeMap<usize, Rat>> = Vec::with_capacity(comp.len());
            let mut rhs = Vec::with_capacity(comp.len());
            for (i, &s) in comp.iter().enumerate() {
                let mut row = BTreeMap::new();
                row.insert(i, Rat::one());
                let mut b = Rat::zero();
                for (t, p) in &self.succ[s] {
                    match local.get(t) {
                        Some(&j) => {
                            let v = row.entry(j).or_insert_with(Rat::zero);
                            *v -= p;
                        }
                        None => b += p * &x[*t],
                    }
                }
                row.retain(|_, v| !v.is_zero());
                rows.push(row);
                rhs.push(b);
            }
            let sol = if comp.len() <= EXACT_BLOCK_LIMIT {
                solve_sparse(rows, rhs).expect("transient block is nonsingular")
            } else {
                exact = false;
                solve_float(&rows, &rhs)
            };
            for (i, &s) in comp.iter().enumerate() {
                x[s] = sol[i].clone();
            }
        }
        (x, exact)
    }
}

/// Gaussian elimination on sparse rational rows, pivoting on the diagonal
/// when possible. Returns `None` on a singular system.
pub fn solve_sparse(mut rows: Vec<BTreeMap<usize, Rat>>, mut rhs: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = rows.len();
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &c in row.keys() {
            col_rows[c].insert(r);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut done = vec![false; n];
    for c in 0..n {
        let pivot = if rows[c].get(&c).is_some_and(|v| !v.is_zero()) && !done[c] {
            c
        } else {
            *col_rows[c].iter().find(|&&r| !done[r])?
        };
        done[pivot] = true;
        order[c] = pivot;
        let prow = rows[pivot].clone();
        let pv = prow.get(&c).cloned()?;
        let pb = rhs[pivot].clone();
        let targets: Vec<usize> = col_rows[c].iter().copied().filter(|&r| !done[r]).collect();
        for r in targets {
            let f = rows[r].get(&c).cloned().unwrap_or_else(Rat::zero) / &pv;
            if f.is_zero() {
                continue;
            }
            for (&k, v) in &prow {
                let entry = rows[r].entry(k).or_insert_with(Rat::zero);
                *entry -= &f * v;
                if entry.is_zero() {
                    rows[r].remove(&k);
                    col_rows[k].remove(&r);
                } else {
                    col_rows[k].insert(r);
                }
            }
            rhs[r] -= &f * &pb;
        }
    }
    let mut x = vec![Rat::zero(); n];
    for c in (0..n).rev() {
        let r = order[c];
        let mut acc = rhs[r].clone();
        for (&k, v) in &rows[r] {
            if k != c {
                acc -= v * &x[k];
            }
        }
        x[c] = acc / rows[r].get(&c)?;
    }
    Some(x)
}

fn solve_float(rows: &[BTreeMap<usize, Rat>], rhs: &[Rat]) -> Vec<Rat> {
    let a: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|r| r.iter().map(|(&k, v)| (k, to_f64(v))).collect())
        .collect();
    let b: Vec<f64> = rhs.iter().map(to_f64).collect();
    let n = rows.len();
    let mut x = vec![0.0f64; n];
    for _ in 0..1_000_000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut acc = b[i];
            let mut diag = 1.0;
            for &(k, v) in &a[i] {
                if k == i {
                    diag = v;
                } else {
                    acc -= v * x[k];
                }
            }
            let nx = acc / diag;
            delta = delta.max((nx - x[i]).abs());
            x[i] = nx;
        }
        if delta < 1e-12 {
            break;
        }
    }
    x.into_iter()
        .map(|v| Rat::from_float(v.clamp(0.0, 1.0)).unwrap_or_else(Rat::zero))
        .collect()
}

/// Value of the strategy in one environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvEval {
    pub env: EnvId,
    pub value: Rat,
    pub exact: bool,
    pub product_states: usize,
    pub bsccs: usize,
    pub winning_bsccs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResult {
    pub per_env: Vec<EnvEval>,
}

impl EvalResult {
    pub fn value(&self, e: EnvId) -> Option<&Rat> {
        self.per_env.iter().find(|v| v.env == e).map(|v| &v.value)
    }

    pub fn min_value(&self) -> Rat {
        self.per_env.iter().map(|v| v.value.clone()).min().unwrap_or_else(Rat::one)
    }

    pub fn is_exact(&self) -> bool {
        self.per_env.iter().all(|v| v.exact)
    }
}

/// Probability that the parity objective holds from `q0` under `sigma`, for
/// every environment of `k`.
pub fn evaluate_exact(model: &Memdp, k: EnvSet, sigma: &StrategyAutomaton, q0: StateId) -> Result<EvalResult, StrategyError> {
    let mut per_env = Vec::new();
    for e in k.iter() {
        let chain = ProductChain::build(model, e, sigma, q0)?;
        let (x, exact) = chain.values();
        per_env.push(EnvEval {
            env: e,
            value: x[0].clone(),
            exact,
            product_states: chain.len(),
            bsccs: chain.bsccs,
            winning_bsccs: chain.winning_bsccs,
        });
    }
    Ok(EvalResult { per_env })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Win,
    Lose,
    Undecided,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Lose => "lose",
            Outcome::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub run: u64,
    pub outcome: Outcome,
    pub steps: u64,
    pub final_state: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimStats {
    pub runs: u64,
    pub wins: u64,
    pub losses: u64,
    pub undecided: u64,
    pub records: Vec<RunRecord>,
}

impl SimStats {
    pub fn win_fraction(&self) -> f64 {
        self.wins as f64 / self.runs.max(1) as f64
    }

    pub fn undecided_fraction(&self) -> f64 {
        self.undecided as f64 / self.runs.max(1) as f64
    }

    pub fn to_csv(&self, model: &Memdp) -> String {
        let mut s = String::from("run,outcome,steps,final_state\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.run, r.outcome.as_str(), r.steps, model.state_name(r.final_state));
        }
        s
    }
}

fn threshold(cum: &Rat) -> u64 {
    let scaled: BigInt = (cum * Rat::from_integer(BigInt::one() << 64usize)).floor().to_integer();
    scaled.to_u64().unwrap_or(u64::MAX)
}

/// Runs `runs` trajectories of at most `horizon` steps in environment `e`.
/// Run `i` draws from ChaCha8 seeded with `seed` on stream `i`; a successor
/// is picked by comparing one `u64` draw against cumulative probabilities
/// scaled by 2^64. A run stops as soon as it enters a bottom component.
pub fn simulate(
    model: &Memdp,
    e: EnvId,
    sigma: &StrategyAutomaton,
    q0: StateId,
    runs: u64,
    horizon: u64,
    seed: u64,
) -> Result<SimStats, StrategyError> {
    let chain = ProductChain::build(model, e, sigma, q0)?;
    let table: Vec<Vec<(u64, usize)>> = chain
        .succ
        .iter()
        .map(|v| {
            let mut cum = Rat::zero();
            let mut out: Vec<(u64, usize)> = v
                .iter()
                .map(|(t, p)| {
                    cum += p;
                    (threshold(&cum), *t)
                })
                .collect();
            if let Some(last) = out.last_mut() {
                last.0 = u64::MAX;
            }
            out
        })
        .collect();
    let mut stats = SimStats {
        runs,
        wins: 0,
        losses: 0,
        undecided: 0,
        records: Vec::with_capacity(runs as usize),
    };
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        let mut s = 0usize;
        let mut steps = 0u64;
        let outcome = loop {
            match chain.bottom[s] {
                Some(true) => break Outcome::Win,
                Some(false) => break Outcome::Lose,
                None => {}
            }
            if steps >= horizon {
                break Outcome::Undecided;
            }
            let r = rng.next_u64();
            s = table[s].iter().find(|(thr, _)| r < *thr).or(table[s].last()).expect("successor").1;
            steps += 1;
        };
        match outcome {
            Outcome::Win => stats.wins += 1,
            Outcome::Lose => stats.losses += 1,
            Outcome::Undecided => stats.undecided += 1,
        }
        stats.records.push(RunRecord {
            run,
            outcome,
            steps,
            final_state: chain.nodes[s].0,
        });
    }
    Ok(stats)
}
