use std::collections::BTreeSet;

use memdp::examples::{duplicate_card, fig3, fig4, missing_card};
use memdp::numeric::rat;
use memdp::{
    dedup_environments, encode_objective, restrict, union_mdp, Dist, Memdp, ModelError, Objective, RestrictError,
};
use serde_json::{json, Value};

fn base() -> Value {
    json!({
        "states": ["q", "r"],
        "actions": ["a", "b"],
        "enabled": {"q": ["a", "b"], "r": ["a"]},
        "environments": {
            "e1": {"q": {"a": {"r": "1/2", "q": "1/2"}, "b": {"q": 1}}, "r": {"a": {"r": "1"}}},
            "e2": {"q": {"a": {"r": "1"}, "b": {"q": "1"}}, "r": {"a": {"r": "1"}}}
        },
        "priority": {"q": 1, "r": 0},
        "initial": "q"
    })
}

fn load(v: &Value) -> Result<Memdp, ModelError> {
    Memdp::from_json_str(&v.to_string())
}

#[test]
fn accepts_the_base_model() {
    let m = load(&base()).unwrap();
    assert_eq!(m.num_states(), 2);
    assert_eq!(m.num_envs(), 2);
    assert_eq!(m.prob(0, 0, 0, 1), rat(1, 2));
}

#[test]
fn rejects_unnormalized_distribution() {
    let mut v = base();
    v["environments"]["e1"]["q"]["a"] = json!({"r": "1/3", "q": "1/3"});
    assert!(matches!(load(&v), Err(ModelError::DistributionNotNormalized { .. })));
}

#[test]
fn rejects_negative_probability() {
    let mut v = base();
    v["environments"]["e1"]["q"]["a"] = json!({"r": "3/2", "q": "-1/2"});
    assert!(matches!(load(&v), Err(ModelError::NegativeProbability { .. })));
}

#[test]
fn rejects_empty_action_set() {
    let mut v = base();
    v["enabled"]["r"] = json!([]);
    assert_eq!(load(&v), Err(ModelError::EmptyActionSet("r".into())));
}

#[test]
fn rejects_unknown_names() {
    let mut v = base();
    v["environments"]["e2"]["q"]["a"] = json!({"s": "1"});
    assert_eq!(load(&v), Err(ModelError::UnknownState("s".into())));
    let mut v = base();
    v["enabled"]["q"] = json!(["a", "z"]);
    assert_eq!(load(&v), Err(ModelError::UnknownAction("z".into())));
}

#[test]
fn rejects_missing_and_unexpected_transitions() {
    let mut v = base();
    v["environments"]["e2"]["q"].as_object_mut().unwrap().remove("b");
    assert!(matches!(load(&v), Err(ModelError::MissingTransition { .. })));
    let mut v = base();
    v["environments"]["e2"]["r"]["b"] = json!({"r": "1"});
    assert!(matches!(load(&v), Err(ModelError::UnexpectedTransition { .. })));
}

#[test]
fn rejects_reserved_and_duplicate_names() {
    let mut v = base();
    v["states"] = json!(["q", "q"]);
    assert_eq!(load(&v), Err(ModelError::DuplicateName("q".into())));
    let mut v = base();
    v["states"] = json!(["q", "__q_win"]);
    assert_eq!(load(&v), Err(ModelError::ReservedName("__q_win".into())));
}

#[test]
fn rejects_bad_literals_and_missing_environments() {
    let mut v = base();
    v["environments"]["e1"]["r"]["a"] = json!({"r": 1.0});
    assert!(matches!(load(&v), Err(ModelError::BadProbability(_))));
    let mut v = base();
    v["environments"] = json!({});
    assert_eq!(load(&v), Err(ModelError::NoEnvironment));
    assert!(matches!(Memdp::from_json_str("{"), Err(ModelError::Malformed(_))));
}

#[test]
fn json_output_reloads_to_the_same_model() {
    for m in [fig3(), fig4(), missing_card(4)] {
        let again = Memdp::from_json_str(&m.to_json().to_string()).unwrap();
        assert_eq!(again.to_json(), m.to_json());
    }
}

#[test]
fn union_is_uniform_over_all_supports() {
    let m = fig3();
    let u = union_mdp(&m, m.all_envs());
    assert_eq!(u.num_envs(), 1);
    let (q1, q2, q3, q4) = (0, 1, 2, 3);
    let a = m.action_id("a").unwrap();
    let c = m.action_id("c").unwrap();
    assert_eq!(u.dist(0, q1, c), &Dist::uniform([q1, q2]));
    assert_eq!(u.dist(0, q2, a), &Dist::uniform([q3, q4]));
    let only_e1 = union_mdp(&m, m.env_set(&["e1"]));
    assert_eq!(only_e1.dist(0, q2, a), &Dist::dirac(q3));
}

#[test]
fn restrict_drops_leaving_actions() {
    let m = fig3();
    let keep: BTreeSet<_> = m.states_named(&["q1", "q2"]);
    let (sub, map) = restrict(&m, &keep).unwrap();
    assert_eq!(map, vec![0, 1]);
    assert_eq!(sub.enabled(1).len(), 1);
    assert_eq!(sub.action_name(sub.enabled(1)[0]), "c");
    let bad: BTreeSet<_> = m.states_named(&["q2", "q3"]);
    assert_eq!(restrict(&m, &bad).unwrap_err(), RestrictError::NotClosed("q2".into()));
}

#[test]
fn dedup_keeps_one_environment_per_support_family() {
    let m = fig3();
    let (d, map) = dedup_environments(&m);
    assert_eq!(d.num_envs(), 2);
    assert_eq!(map, vec![0, 1]);
    let (inner, _) = restrict(&m, &m.states_named(&["q1", "q2"])).unwrap();
    let (d, map) = dedup_environments(&inner);
    assert_eq!(d.num_envs(), 1);
    assert_eq!(map, vec![0, 0]);
    let (d, _) = dedup_environments(&duplicate_card(3));
    assert_eq!(d.num_envs(), 3);
}

#[test]
fn encoding_is_idempotent() {
    let m = fig4();
    for obj in [
        Objective::Reach(m.states_named(&["q5"])),
        Objective::Safe(m.states_named(&["q1", "q2"])),
        Objective::Parity,
    ] {
        let once = encode_objective(&m, &obj);
        let twice = encode_objective(&once, &obj);
        assert_eq!(once.to_json(), twice.to_json());
    }
}

#[test]
fn card_hub_distributions() {
    let mc = missing_card(3);
    let hub = mc.initial();
    let sample = mc.action_id("sample").unwrap();
    let card = |m: &Memdp, i: &str| m.state_id(i).unwrap();
    assert_eq!(
        mc.dist(0, hub, sample),
        &Dist::from_pairs([(card(&mc, "2"), rat(1, 2)), (card(&mc, "3"), rat(1, 2))])
    );
    let dc = duplicate_card(3);
    assert_eq!(
        dc.dist(0, hub, sample),
        &Dist::from_pairs([
            (card(&dc, "1"), rat(1, 2)),
            (card(&dc, "2"), rat(1, 4)),
            (card(&dc, "3"), rat(1, 4))
        ])
    );
}
