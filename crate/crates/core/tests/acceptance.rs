//! Acceptance suite: one line per criterion, then a single assertion that
//! every criterion passed.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{random_gadget, random_skeleton, same_equality_pattern, same_supports, Shape};
use memdp::examples::{duplicate_card, fig3, fig4, fig5, matching_pennies, missing_card, one_shot};
use memdp::limit_sure::LsEngine;
use memdp::numeric::{rat, sample_count};
use memdp::quantitative::{
    build_gap_constraints, classify_mcec, evaluate_constraints_for_fixed_p, mcecs_general, purge, solve_gap, GapAnswer,
    GapBudget, McecKind, PAssignment,
};
use memdp::strategy::{Choice, StrategyAutomaton, DEFAULT_MEMORY_CAP};
use memdp::*;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let d = t.elapsed();
    ensure(d < limit, format!("{what} took {d:?}, limit {limit:?}"))?;
    Ok(d)
}

fn split_check(m: &Memdp, q: &str) -> Result<(), String> {
    let k = m.all_envs();
    let q = m.state_id(q).ok_or("missing state")?;
    let as_r = as_parity(m, k);
    let ls_r = ls_parity(m, k);
    ensure(!as_r.contains(q), "q1 is almost-sure winning")?;
    ensure(ls_r.contains(q), "q1 is not limit-sure winning")
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    split_check(&fig3(), "q1")?;
    let d = within(t, Duration::from_secs(1), "fig3")?;
    Ok(format!("q1 in LS, not in AS ({d:?})"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let m = fig4();
    split_check(&m, "q1")?;
    let engine = LsEngine::new(&m);
    let node = engine.get(engine.root(m.all_envs()));
    let split = node.split.as_ref().ok_or("root node was not split")?;
    let (q2, a, q5) = (m.state_id("q2").unwrap(), m.action_id("a").unwrap(), m.state_id("q5").unwrap());
    let e1 = m.env_set(&["e1"]);
    ensure(
        split.log.iter().any(|(kt, _)| kt.from == q2 && kt.action == a && kt.to == q5 && kt.knowledge == e1),
        "(q2, a, q5) with knowledge {e1} missing from the revealed-form log",
    )?;
    let d = within(t, Duration::from_secs(1), "fig4")?;
    Ok(format!("q1 in LS, not in AS; log has (q2,a,q5) -> {{e1}} ({d:?})"))
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for n in [3, 4, 5] {
        let t = Instant::now();
        let m = missing_card(n);
        let hub = m.state_id("0").unwrap();
        ensure(as_parity(&m, m.all_envs()).contains(hub), format!("missing-card({n}) hub not AS"))?;
        notes.push(format!("mc{n} {:?}", within(t, Duration::from_secs(10), "missing-card")?));
    }
    for n in [3, 4] {
        let t = Instant::now();
        let m = duplicate_card(n);
        let hub = m.state_id("0").unwrap();
        let k = m.all_envs();
        ensure(!as_parity(&m, k).contains(hub), format!("duplicate-card({n}) hub is AS"))?;
        ensure(ls_parity(&m, k).contains(hub), format!("duplicate-card({n}) hub not LS"))?;
        notes.push(format!("dc{n} {:?}", within(t, Duration::from_secs(10), "duplicate-card")?));
    }
    Ok(notes.join(", "))
}

fn corpus() -> Vec<(String, Memdp)> {
    let mut v = vec![
        ("fig3".to_string(), fig3()),
        ("fig4".to_string(), fig4()),
        ("fig5".to_string(), fig5()),
        ("pennies".to_string(), matching_pennies()),
        ("one-shot".to_string(), one_shot()),
    ];
    for n in 3..=5 {
        v.push((format!("missing-card({n})"), missing_card(n)));
    }
    for n in 2..=3 {
        v.push((format!("duplicate-card({n})"), duplicate_card(n)));
    }
    v
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut checked = 0;
    for (name, m) in corpus() {
        let k = m.all_envs();
        let r = as_parity(&m, k);
        if r.states.is_empty() {
            continue;
        }
        let s = synthesize_as_strategy(&m, k, &r, DEFAULT_MEMORY_CAP).map_err(|e| format!("{name}: {e}"))?;
        for &q in &r.states {
            let v = evaluate_exact(&m, k, &s, q).map_err(|e| format!("{name}: {e}"))?;
            ensure(
                v.per_env.iter().all(|x| x.value.is_one()),
                format!("{name}: AS strategy from {} is below 1", m.state_name(q)),
            )?;
            checked += 1;
        }
    }
    let mut worst = Rat::one();
    for (name, m) in [("fig3", fig3()), ("fig4", fig4()), ("duplicate-card(3)", duplicate_card(3))] {
        let k = m.all_envs();
        let region = ls_parity(&m, k);
        for eps in [rat(1, 4), rat(1, 10)] {
            let s = synthesize_ls_strategy(&m, k, &eps, DEFAULT_MEMORY_CAP).map_err(|e| format!("{name}: {e}"))?;
            for &q in &region.states {
                let v = evaluate_exact(&m, k, &s, q).map_err(|e| format!("{name}: {e}"))?;
                let gap = v.min_value() - (Rat::one() - &eps);
                ensure(gap >= Rat::zero(), format!("{name}, eps {eps}: value {} from {}", v.min_value(), m.state_name(q)))?;
                if gap < worst {
                    worst = gap;
                }
            }
        }
    }
    let d = within(t, Duration::from_secs(60), "certification")?;
    Ok(format!("{checked} AS states at value 1; LS slack >= {:.4} ({d:?})", memdp::numeric::to_f64(&worst)))
}

/// Pure memoryless strategies of a single-environment model.
fn all_memoryless(m: &Memdp) -> Vec<StrategyAutomaton> {
    let n = m.num_states();
    let mut idx = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let mut s = StrategyAutomaton::new(1, 0);
        for q in 0..n {
            s.set_output(0, q, vec![Choice::pure(m.enabled(q)[idx[q]])]);
        }
        out.push(s);
        let mut q = 0;
        loop {
            if q == n {
                return out;
            }
            idx[q] += 1;
            if idx[q] < m.enabled(q).len() {
                break;
            }
            idx[q] = 0;
            q += 1;
        }
    }
}

fn brute_force_region(m: &Memdp) -> BTreeSet<StateId> {
    let k = m.all_envs();
    let strategies = all_memoryless(m);
    (0..m.num_states())
        .filter(|&q| {
            strategies
                .iter()
                .any(|s| evaluate_exact(m, k, s, q).expect("small chain").min_value().is_one())
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..200 {
        let m = random_skeleton(&mut rng, Shape::mdp(5, 2)).build();
        let k = m.all_envs();
        let a = as_parity(&m, k).states;
        let l = ls_parity(&m, k).states;
        let b = brute_force_region(&m);
        ensure(a == b && l == b, format!("model {i}: as {a:?}, ls {l:?}, brute force {b:?}"))?;
    }
    Ok("200 models, 0 mismatches".into())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut differing = 0;
    for i in 0..200 {
        let mut shape = Shape::memdp(8, 2, 3);
        shape.acyclic = true;
        let m = random_skeleton(&mut rng, shape).build();
        let k = m.all_envs();
        let a = as_parity(&m, k).states;
        let l = ls_parity(&m, k).states;
        ensure(a == l, format!("model {i}: as {a:?}, ls {l:?}"))?;
        if a.len() < m.num_states() {
            differing += 1;
        }
    }
    Ok(format!("200 models, 0 mismatches ({differing} with losing states)"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nontrivial = 0;
    let mut changed = 0;
    for i in 0..100 {
        let sk = if i % 2 == 0 {
            random_skeleton(&mut rng, Shape::memdp(6, 2, 3))
        } else {
            random_gadget(&mut rng, false)
        };
        let m = sk.build();
        let k = m.all_envs();
        let a = as_parity(&m, k).states;
        let l = ls_parity(&m, k).states;
        if a != l {
            nontrivial += 1;
        }
        let loose = sk.perturb(&mut rng).build();
        ensure(same_supports(&m, &loose), format!("model {i}: supports changed"))?;
        ensure(as_parity(&loose, k).states == a, format!("model {i}: as_parity moved under perturbation"))?;
        let tight = sk.perturb_mixing(&mut rng).build();
        ensure(same_supports(&m, &tight), format!("model {i}: supports changed"))?;
        ensure(same_equality_pattern(&m, &tight), format!("model {i}: equality pattern changed"))?;
        if tight != m {
            changed += 1;
        }
        ensure(as_parity(&tight, k).states == a, format!("model {i}: as_parity moved"))?;
        ensure(ls_parity(&tight, k).states == l, format!("model {i}: ls_parity moved"))?;
    }
    Ok(format!("100 models, 0 mismatches ({nontrivial} with LS != AS, {changed} changed by mixing)"))
}

fn only_trivial_nondistinguishing(m: &Memdp) -> Result<(), String> {
    for d in mcecs_general(m, m.all_envs()) {
        if classify_mcec(m, &d) == McecKind::Distinguishing {
            continue;
        }
        let states = d.states();
        let sink = states.len() == 1 && states.iter().all(|&q| m.is_designated_sink(q));
        ensure(sink, format!("non-distinguishing component {:?} survives", states))?;
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let m = fig5();
    let p = purge(&m);
    let out = &p.model;
    let q4 = m.state_id("q4").unwrap();
    let b = m.action_id("b").unwrap();
    let f = *p.frontier.get(&(q4, b)).ok_or("no frontier action for (q4, b)")?;
    let sd = p.image(q4);
    let sd2 = p.image(m.state_id("q5").unwrap());
    ensure(out.prob(0, sd, f, sd2) == rat(2, 3), "e1 frontier to s_D' is not 2/3")?;
    ensure(out.prob(0, sd, f, sd) == rat(1, 3), "e1 frontier to s_D is not 1/3")?;
    ensure(out.prob(1, sd, f, sd2).is_one(), "e2 frontier to s_D' is not 1")?;
    ensure(out.prob(0, sd, p.stay, out.win_sink().unwrap()).is_one(), "stay from s_D does not win")?;
    ensure(out.prob(0, sd2, p.stay, out.lose_sink().unwrap()).is_one(), "stay from s_D' does not lose")?;
    ensure(p.collapsed.len() == 2, "fig5 should collapse exactly D and D'")?;
    only_trivial_nondistinguishing(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut collapsed = 0;
    for i in 0..100 {
        let m = random_skeleton(&mut rng, Shape::memdp(6, 2, 3)).build();
        let p = purge(&m);
        collapsed += p.collapsed.len();
        only_trivial_nondistinguishing(&p.model).map_err(|e| format!("model {i}: {e}"))?;
    }
    Ok(format!("fig5 frontier 2/3 and 1; 100 models clean ({collapsed} components collapsed)"))
}

fn random_p(rng: &mut ChaCha8Rng, sys: &memdp::quantitative::ConstraintSystem) -> PAssignment {
    let mut p = PAssignment::new();
    for &q in &sys.decision_states {
        for i in 0..sys.mem {
            let row: Vec<_> = sys.p_vars.iter().filter(|v| v.state == q && v.mem == i).copied().collect();
            let mut w: Vec<i64> = row.iter().map(|_| rng.gen_range(0..=3)).collect();
            if w.iter().all(|&x| x == 0) {
                let j = rng.gen_range(0..w.len());
                w[j] = 1;
            }
            let total: i64 = w.iter().sum();
            for (v, x) in row.into_iter().zip(w) {
                p.insert(v, Rat::new(x.into(), total.into()));
            }
        }
    }
    p
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut compared = 0;
    for i in 0..100 {
        let m = random_skeleton(&mut rng, Shape::memdp(5, 2, 3)).build();
        let target: BTreeSet<StateId> = (0..m.num_states()).filter(|_| rng.gen_bool(0.3)).collect();
        let m = encode_objective(&m, &Objective::Reach(target.clone()));
        let mem = rng.gen_range(1..=3);
        let sys = build_gap_constraints(&m, &vec![target; m.num_envs()], mem, &Rat::one(), &Rat::zero(), None, None);
        let p = random_p(&mut rng, &sys);
        let x = evaluate_constraints_for_fixed_p(&sys, &p).map_err(|e| format!("triple {i}: {e}"))?;
        let sigma = sys.strategy(&p);
        for q in 0..m.num_states() {
            let v = evaluate_exact(&m, m.all_envs(), &sigma, q).map_err(|e| format!("triple {i}: {e}"))?;
            for e in 0..m.num_envs() {
                ensure(
                    v.value(e) == Some(x.get(e, q, 0)),
                    format!("triple {i}: state {q} env {e}: {:?} vs {}", v.value(e), x.get(e, q, 0)),
                )?;
                compared += 1;
            }
        }
    }
    Ok(format!("100 triples, {compared} values equal"))
}

fn criterion_10() -> Outcome {
    let budget = GapBudget::default();
    let t = Instant::now();
    let m = one_shot();
    match solve_gap(&m, &Objective::Parity, &rat(3, 5), &rat(1, 100), 1, &budget) {
        GapAnswer::Yes { values, .. } => ensure(values == vec![rat(3, 5)], format!("one-shot values {values:?}"))?,
        other => return Err(format!("one-shot: {other:?}")),
    }
    let d1 = within(t, Duration::from_secs(5), "one-shot")?;

    let t = Instant::now();
    let m = matching_pennies();
    let k = m.all_envs();
    let s = m.state_id("s").unwrap();
    for a in m.enabled(s) {
        let mut pure = StrategyAutomaton::new(1, 0);
        pure.set_output(0, s, vec![Choice::pure(*a)]);
        let v = evaluate_exact(&m, k, &pure, s).map_err(|e| e.to_string())?;
        ensure(v.min_value().is_zero(), "a pure strategy has positive min value")?;
    }
    match solve_gap(&m, &Objective::Parity, &rat(1, 2), &rat(1, 20), 2, &budget) {
        GapAnswer::Yes { strategy, values, .. } => {
            ensure(!strategy.is_pure(), "pennies witness is pure")?;
            ensure(values.iter().all(|v| v >= &rat(9, 20)), format!("pennies values {values:?}"))?;
        }
        other => return Err(format!("pennies at 1/2: {other:?}")),
    }
    let d2 = within(t, Duration::from_secs(5), "pennies 1/2")?;

    let t = Instant::now();
    let ans = solve_gap(&m, &Objective::Parity, &rat(4, 5), &rat(1, 20), 2, &budget);
    ensure(matches!(ans, GapAnswer::NoWithinBudget { .. }), format!("pennies at 4/5: {ans:?}"))?;
    let d3 = within(t, Duration::from_secs(5), "pennies 4/5")?;
    Ok(format!("one-shot Yes 3/5 ({d1:?}); pennies Yes randomized ({d2:?}); 4/5 NoWithinBudget ({d3:?})"))
}

fn criterion_11() -> Outcome {
    let n = sample_count(&rat(1, 20), &rat(1, 3));
    ensure(n == 54u32.into(), format!("N = {n}"))?;
    Ok("N(1/20, 1/3) = 54".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("fig3 split", criterion_1),
        ("fig4 split and revealed log", criterion_2),
        ("card families", criterion_3),
        ("strategy certification", criterion_4),
        ("single-environment oracle", criterion_5),
        ("acyclic coincidence", criterion_6),
        ("support invariance", criterion_7),
        ("purge", criterion_8),
        ("constraints vs evaluation", criterion_9),
        ("gap solver", criterion_10),
        ("sampling constant", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
