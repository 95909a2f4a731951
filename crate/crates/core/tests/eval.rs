use memdp::examples::{fig3, fig5, matching_pennies, missing_card, one_shot};
use memdp::numeric::{rat, to_f64};
use memdp::strategy::{Choice, DEFAULT_MEMORY_CAP};
use memdp::{as_parity, evaluate_exact, simulate, synthesize_as_strategy, Memdp, Rat, StrategyAutomaton};
use num_traits::{One, Zero};

fn pure(m: &Memdp, plan: &[(&str, &str)]) -> StrategyAutomaton {
    let mut s = StrategyAutomaton::new(1, 0);
    for (q, a) in plan {
        s.set_output(0, m.state_id(q).unwrap(), vec![Choice::pure(m.action_id(a).unwrap())]);
    }
    s
}

fn mix(m: &Memdp, a: &str, b: &str) -> Vec<Choice> {
    [a, b]
        .iter()
        .map(|x| Choice {
            action: m.action_id(x).unwrap(),
            prob: rat(1, 2),
            memory: None,
        })
        .collect()
}

fn values(m: &Memdp, s: &StrategyAutomaton, q: &str) -> Vec<Rat> {
    let r = evaluate_exact(m, m.all_envs(), s, m.state_id(q).unwrap()).unwrap();
    assert!(r.is_exact());
    r.per_env.iter().map(|v| v.value.clone()).collect()
}

#[test]
fn fig3_staying_forever_loses() {
    let m = fig3();
    let s = pure(&m, &[("q1", "c"), ("q2", "c"), ("q3", "a"), ("q4", "a")]);
    assert_eq!(values(&m, &s, "q1"), vec![Rat::zero(), Rat::zero()]);
}

#[test]
fn fig3_committing_to_a_wins_only_in_e1() {
    let m = fig3();
    let s = pure(&m, &[("q1", "c"), ("q2", "a"), ("q3", "a"), ("q4", "a")]);
    assert_eq!(values(&m, &s, "q1"), vec![Rat::one(), Rat::zero()]);
}

#[test]
fn fig3_coin_flip_gets_half_everywhere() {
    let m = fig3();
    let mut s = pure(&m, &[("q1", "c"), ("q3", "a"), ("q4", "a")]);
    s.set_output(0, m.state_id("q2").unwrap(), mix(&m, "a", "b"));
    assert_eq!(values(&m, &s, "q1"), vec![rat(1, 2), rat(1, 2)]);
}

#[test]
fn memory_updates_are_followed() {
    let m = fig3();
    let (q1, q2) = (m.state_id("q1").unwrap(), m.state_id("q2").unwrap());
    let (a, c) = (m.action_id("a").unwrap(), m.action_id("c").unwrap());
    let mut s = StrategyAutomaton::new(2, 0);
    for mem in 0..2 {
        s.set_output(mem, q1, vec![Choice::pure(c)]);
    }
    s.set_output(0, q2, vec![Choice::pure(c)]);
    s.set_update(0, q2, c, q1, 1);
    s.set_output(1, q2, vec![Choice::pure(a)]);
    assert_eq!(values(&m, &s, "q1"), vec![Rat::one(), Rat::zero()]);
}

#[test]
fn stochastic_memory_choice_is_honoured() {
    let m = fig3();
    let (q1, q2) = (m.state_id("q1").unwrap(), m.state_id("q2").unwrap());
    let (a, b, c) = (m.action_id("a").unwrap(), m.action_id("b").unwrap(), m.action_id("c").unwrap());
    let mut s = StrategyAutomaton::new(3, 0);
    s.set_output(
        0,
        q1,
        vec![
            Choice { action: c, prob: rat(1, 4), memory: Some(1) },
            Choice { action: c, prob: rat(3, 4), memory: Some(2) },
        ],
    );
    for mem in 1..3 {
        s.set_output(mem, q1, vec![Choice::pure(c)]);
    }
    s.set_output(1, q2, vec![Choice::pure(a)]);
    s.set_output(2, q2, vec![Choice::pure(b)]);
    assert_eq!(values(&m, &s, "q1"), vec![rat(1, 4), rat(3, 4)]);
}

#[test]
fn fig5_frozen_values() {
    let m = fig5();
    let s = pure(&m, &[("q1", "a"), ("q2", "b"), ("q3", "a"), ("q4", "a")]);
    assert_eq!(values(&m, &s, "q1"), vec![Rat::one(), rat(1, 2)]);
    let leave = pure(&m, &[("q1", "a"), ("q2", "b"), ("q3", "a"), ("q4", "b")]);
    assert_eq!(values(&m, &leave, "q1"), vec![Rat::zero(), Rat::zero()]);
}

#[test]
fn unreachable_memory_does_not_change_values() {
    let m = fig3();
    let base = {
        let mut s = pure(&m, &[("q1", "c"), ("q3", "a"), ("q4", "a")]);
        s.set_output(0, m.state_id("q2").unwrap(), mix(&m, "a", "b"));
        s
    };
    let mut padded = StrategyAutomaton::new(4, 0);
    for q in ["q1", "q2", "q3", "q4"] {
        let q = m.state_id(q).unwrap();
        if let Some(c) = base.output(0, q) {
            padded.set_output(0, q, c.to_vec());
        }
        for junk in 1..4 {
            padded.set_output(junk, q, vec![Choice::pure(m.enabled(q)[0])]);
            padded.set_update(junk, q, m.enabled(q)[0], q, (junk + 1) % 4);
        }
    }
    assert_eq!(values(&m, &base, "q1"), values(&m, &padded, "q1"));
}

#[test]
fn one_shot_simulation_matches_three_fifths() {
    let m = one_shot();
    let s = pure(&m, &[]);
    let stats = simulate(&m, 0, &s, m.initial(), 10_000, 10, 0).unwrap();
    let f = stats.win_fraction();
    assert!((0.57..=0.63).contains(&f), "{f}");
    assert_eq!(stats.undecided, 0);
    let again = simulate(&m, 0, &s, m.initial(), 10_000, 10, 0).unwrap();
    assert_eq!(stats, again);
}

#[test]
fn almost_sure_strategy_rarely_runs_out_of_time() {
    let m = missing_card(3);
    let region = as_parity(&m, m.all_envs());
    assert!(region.contains(m.initial()));
    let s = synthesize_as_strategy(&m, m.all_envs(), &region, DEFAULT_MEMORY_CAP).unwrap();
    for e in 0..3 {
        let stats = simulate(&m, e, &s, m.initial(), 2_000, 500, 11).unwrap();
        assert_eq!(stats.losses, 0);
        assert!(stats.undecided_fraction() < 0.01);
        assert_eq!(stats.wins + stats.undecided, stats.runs);
    }
}

#[test]
fn staying_forever_never_wins_in_simulation() {
    let m = fig3();
    let s = pure(&m, &[("q1", "c"), ("q2", "c")]);
    let stats = simulate(&m, 0, &s, m.state_id("q1").unwrap(), 1_000, 200, 3).unwrap();
    assert_eq!(stats.wins, 0);
}

#[test]
fn empirical_frequencies_track_exact_values() {
    let mut cases: Vec<(Memdp, StrategyAutomaton, &str)> = Vec::new();
    let f3 = fig3();
    let mut s = pure(&f3, &[("q1", "c")]);
    s.set_output(0, f3.state_id("q2").unwrap(), mix(&f3, "a", "b"));
    cases.push((f3.clone(), s, "q1"));
    cases.push((f3.clone(), pure(&f3, &[("q1", "c"), ("q2", "a")]), "q1"));
    let f5 = fig5();
    cases.push((f5.clone(), pure(&f5, &[("q1", "a"), ("q2", "b")]), "q1"));
    cases.push((f5.clone(), pure(&f5, &[("q1", "a"), ("q2", "a")]), "q2"));
    let p = matching_pennies();
    let mut s = StrategyAutomaton::new(1, 0);
    s.set_output(0, p.state_id("s").unwrap(), mix(&p, "a", "b"));
    cases.push((p, s, "s"));
    let o = one_shot();
    cases.push((o.clone(), pure(&o, &[]), "s"));
    for (m, s, q) in &cases {
        let q0 = m.state_id(q).unwrap();
        let exact = evaluate_exact(m, m.all_envs(), s, q0).unwrap();
        for v in &exact.per_env {
            let stats = simulate(m, v.env, s, q0, 20_000, 2_000, 5).unwrap();
            let gap = (stats.win_fraction() - to_f64(&v.value)).abs();
            assert!(gap < 0.02, "{q} in env {}: {gap}", v.env);
        }
    }
}
