//! Seeded random models shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use memdp::examples::ModelBuilder;
use memdp::Memdp;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_envs: usize,
    pub min_envs: usize,
    pub acyclic: bool,
    /// Probabilities are multiples of 1/4 when set.
    pub coarse: bool,
    /// Chance that environments keep the support of a pair but change its weights.
    pub reweight: f64,
}

impl Shape {
    pub fn mdp(states: usize, actions: usize) -> Shape {
        Shape {
            max_states: states,
            max_actions: actions,
            max_envs: 1,
            min_envs: 1,
            acyclic: false,
            coarse: false,
            reweight: 0.5,
        }
    }

    pub fn memdp(states: usize, actions: usize, envs: usize) -> Shape {
        Shape {
            max_states: states,
            max_actions: actions,
            max_envs: envs,
            min_envs: 2,
            acyclic: false,
            coarse: false,
            reweight: 0.5,
        }
    }
}

/// Integer weights per (env, state, action): successor and weight.
#[derive(Clone, Debug)]
pub struct Skeleton {
    pub states: usize,
    pub actions: usize,
    pub envs: usize,
    pub enabled: Vec<Vec<usize>>,
    pub weights: Vec<BTreeMap<(usize, usize), Vec<(usize, u32)>>>,
    pub priority: Vec<u32>,
}

fn draw_weights(rng: &mut ChaCha8Rng, support: &[usize], coarse: bool) -> Vec<(usize, u32)> {
    if coarse {
        let total = 4u32;
        let mut rest = total;
        let mut out = Vec::new();
        for (i, &t) in support.iter().enumerate() {
            let left = (support.len() - i - 1) as u32;
            let w = if left == 0 { rest } else { rng.gen_range(1..=rest - left) };
            rest -= w;
            out.push((t, w));
        }
        out
    } else {
        support.iter().map(|&t| (t, rng.gen_range(1..=4))).collect()
    }
}

fn draw_support(rng: &mut ChaCha8Rng, q: usize, n: usize, acyclic: bool, max: usize) -> Vec<usize> {
    let pool: Vec<usize> = if acyclic { (q + 1..n).collect() } else { (0..n).collect() };
    if pool.is_empty() {
        return vec![q];
    }
    let size = rng.gen_range(1..=max.min(pool.len()));
    let mut s: Vec<usize> = pool.choose_multiple(rng, size).copied().collect();
    s.sort_unstable();
    s
}

pub fn random_skeleton(rng: &mut ChaCha8Rng, shape: Shape) -> Skeleton {
    let n = rng.gen_range(2..=shape.max_states);
    let na = rng.gen_range(1..=shape.max_actions);
    let ne = rng.gen_range(shape.min_envs..=shape.max_envs);
    let max_support = 3;
    let mut enabled = Vec::new();
    for q in 0..n {
        if shape.acyclic && q + 1 == n {
            enabled.push(vec![0]);
            continue;
        }
        let mut acts: Vec<usize> = (0..na).filter(|_| rng.gen_bool(0.7)).collect();
        if acts.is_empty() {
            acts.push(rng.gen_range(0..na));
        }
        enabled.push(acts);
    }
    let mut weights = vec![BTreeMap::new(); ne];
    for q in 0..n {
        for &a in &enabled[q] {
            let shared = rng.gen_bool(0.5);
            let base_support = draw_support(rng, q, n, shape.acyclic, max_support);
            let base = draw_weights(rng, &base_support, shape.coarse);
            for w in weights.iter_mut() {
                let d = if shared {
                    base.clone()
                } else if rng.gen_bool(shape.reweight) {
                    draw_weights(rng, &base_support, shape.coarse)
                } else {
                    let s = draw_support(rng, q, n, shape.acyclic, max_support);
                    draw_weights(rng, &s, shape.coarse)
                };
                w.insert((q, a), d);
            }
        }
    }
    let priority = (0..n).map(|_| rng.gen_range(0..4)).collect();
    Skeleton {
        states: n,
        actions: na,
        envs: ne,
        enabled,
        weights,
        priority,
    }
}

impl Skeleton {
    pub fn build(&self) -> Memdp {
        let states: Vec<String> = (0..self.states).map(|i| format!("s{i}")).collect();
        let actions: Vec<String> = (0..self.actions).map(|i| format!("a{i}")).collect();
        let envs: Vec<String> = (0..self.envs).map(|i| format!("e{i}")).collect();
        let s: Vec<&str> = states.iter().map(String::as_str).collect();
        let a: Vec<&str> = actions.iter().map(String::as_str).collect();
        let e: Vec<&str> = envs.iter().map(String::as_str).collect();
        let mut b = ModelBuilder::new(&s, &a, &e).initial("s0");
        for (q, p) in self.priority.iter().enumerate() {
            b = b.priority(&states[q], *p);
        }
        for (ei, w) in self.weights.iter().enumerate() {
            for (&(q, act), d) in w {
                let total: u32 = d.iter().map(|x| x.1).sum();
                let probs: Vec<(String, String)> =
                    d.iter().map(|&(t, x)| (states[t].clone(), format!("{x}/{total}"))).collect();
                let refs: Vec<(&str, &str)> = probs.iter().map(|(t, p)| (t.as_str(), p.as_str())).collect();
                b = b.trans(&envs[ei], &states[q], &actions[act], &refs);
            }
        }
        b.build().expect("random model is well formed")
    }

    /// Fresh weights on the same supports.
    pub fn perturb(&self, rng: &mut ChaCha8Rng) -> Skeleton {
        let mut out = self.clone();
        for w in out.weights.iter_mut() {
            for d in w.values_mut() {
                for x in d.iter_mut() {
                    x.1 = rng.gen_range(1..=9);
                }
            }
        }
        out
    }

    /// Mixes every distribution of a pair with one common distribution on
    /// the support shared by all environments, which keeps supports and the
    /// cross-environment equalities of every entry.
    pub fn perturb_mixing(&self, rng: &mut ChaCha8Rng) -> Skeleton {
        let mut out = self.clone();
        for &(q, a) in self.weights[0].keys() {
            let mut common: Vec<usize> = self.weights[0][&(q, a)].iter().map(|x| x.0).collect();
            for w in &self.weights {
                common.retain(|t| w[&(q, a)].iter().any(|x| x.0 == *t));
            }
            if common.is_empty() {
                continue;
            }
            let u: Vec<(usize, u32)> = common.iter().map(|&t| (t, rng.gen_range(1..=5))).collect();
            let big_u: u32 = u.iter().map(|x| x.1).sum();
            let (r, s) = (rng.gen_range(1..=3u32), rng.gen_range(1..=3u32));
            for (e, w) in self.weights.iter().enumerate() {
                let d = &w[&(q, a)];
                let total: u32 = d.iter().map(|x| x.1).sum();
                let mixed = d
                    .iter()
                    .map(|&(t, x)| {
                        let ut = u.iter().find(|y| y.0 == t).map_or(0, |y| y.1);
                        (t, s * x * big_u + r * ut * total)
                    })
                    .collect();
                out.weights[e].insert((q, a), mixed);
            }
        }
        out
    }
}

fn normalized(d: &[(usize, u32)]) -> Vec<(usize, u64, u64)> {
    let total: u32 = d.iter().map(|x| x.1).sum();
    d.iter()
        .map(|&(t, w)| {
            let g = gcd(w as u64, total as u64);
            (t, w as u64 / g, total as u64 / g)
        })
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn same_dist(a: &[(usize, u32)], b: &[(usize, u32)]) -> bool {
    normalized(a) == normalized(b)
}

/// Whether `δ_e(q,a)(t) = δ_f(q,a)(t)` holds in `m1` exactly when it holds in `m2`.
pub fn same_equality_pattern(m1: &Memdp, m2: &Memdp) -> bool {
    for q in 0..m1.num_states() {
        for &a in m1.enabled(q) {
            for t in 0..m1.num_states() {
                for e in 0..m1.num_envs() {
                    for f in e + 1..m1.num_envs() {
                        let x = m1.prob(e, q, a, t) == m1.prob(f, q, a, t);
                        let y = m2.prob(e, q, a, t) == m2.prob(f, q, a, t);
                        if x != y {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

pub fn same_supports(m1: &Memdp, m2: &Memdp) -> bool {
    (0..m1.num_states()).all(|q| {
        m1.enabled(q).iter().all(|&a| {
            (0..m1.num_envs()).all(|e| {
                m1.dist(e, q, a).support().collect::<Vec<_>>() == m2.dist(e, q, a).support().collect::<Vec<_>>()
            })
        })
    })
}

/// Random model around a sampling loop: the hub can sample (returning
/// through a second state with environment-dependent weights) or guess, and
/// each guess wins in a random subset of environments. A few extra states are
/// wired at random.
pub fn random_gadget(rng: &mut ChaCha8Rng, coarse: bool) -> Skeleton {
    let extra = rng.gen_range(0..=2);
    let n = 4 + extra;
    let guesses = rng.gen_range(2..=3);
    let na = 1 + guesses;
    let ne = rng.gen_range(2..=3);
    let (hub, back, win, lose) = (0, 1, 2, 3);
    let mut enabled = vec![(0..na).collect::<Vec<_>>(), vec![0], vec![0], vec![0]];
    for _ in 0..extra {
        let mut acts: Vec<usize> = (0..na).filter(|_| rng.gen_bool(0.5)).collect();
        if acts.is_empty() {
            acts.push(0);
        }
        enabled.push(acts);
    }
    let mut weights = vec![BTreeMap::new(); ne];
    let back_support: Vec<usize> = if extra > 0 && rng.gen_bool(0.3) { vec![hub, 4] } else { vec![hub] };
    let back_w = draw_weights(rng, &back_support, coarse);
    for (e, w) in weights.iter_mut().enumerate() {
        w.insert((hub, 0), draw_weights(rng, &[hub, back], coarse));
        for g in 1..=guesses {
            let wins = (g + e) % guesses == 0 || rng.gen_bool(0.2);
            w.insert((hub, g), vec![(if wins { win } else { lose }, 1)]);
        }
        w.insert((back, 0), back_w.clone());
        w.insert((win, 0), vec![(win, 1)]);
        w.insert((lose, 0), vec![(lose, 1)]);
    }
    for q in 4..n {
        for &a in &enabled[q] {
            let s = draw_support(rng, q, n, false, 2);
            let d = draw_weights(rng, &s, coarse);
            for w in weights.iter_mut() {
                w.insert((q, a), d.clone());
            }
        }
    }
    let mut priority: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
    priority[win] = 0;
    priority[lose] = 1;
    priority[hub] = 1;
    priority[back] = 1;
    Skeleton {
        states: n,
        actions: na,
        envs: ne,
        enabled,
        weights,
        priority,
    }
}
