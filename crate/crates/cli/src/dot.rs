//! Graphviz rendering: one cluster per environment, revealing transitions
//! drawn in red, region states filled.

use std::fmt::Write as _;

use memdp::numeric::fmt_rat;
use memdp::{EnvSet, Memdp, Region};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn render(m: &Memdp, k: EnvSet, region: Option<&Region>) -> String {
    let mut s = String::from("digraph memdp {\n  rankdir=LR;\n  node [shape=circle];\n");
    for e in k.iter() {
        let env = m.env_name(e);
        let _ = writeln!(s, "  subgraph {} {{", quote(&format!("cluster_{env}")));
        let _ = writeln!(s, "    label={};", quote(env));
        for q in 0..m.num_states() {
            let id = quote(&format!("{env}/{}", m.state_name(q)));
            let mut attrs = vec![format!("label={}", quote(&format!("{} ({})", m.state_name(q), m.priority(q))))];
            if q == m.initial() {
                attrs.push("shape=doublecircle".into());
            }
            if region.is_some_and(|r| r.contains(q)) {
                attrs.push("style=filled".into());
                attrs.push("fillcolor=lightgray".into());
            }
            let _ = writeln!(s, "    {id} [{}];", attrs.join(", "));
        }
        for q in 0..m.num_states() {
            for &a in m.enabled(q) {
                for (t, p) in m.dist(e, q, a).entries() {
                    let revealing = m.knowledge(k, q, a, *t) != k;
                    let label = quote(&format!("{}: {}", m.action_name(a), fmt_rat(p)));
                    let style = if revealing { ", color=red, penwidth=2" } else { "" };
                    let _ = writeln!(
                        s,
                        "    {} -> {} [label={label}{style}];",
                        quote(&format!("{env}/{}", m.state_name(q))),
                        quote(&format!("{env}/{}", m.state_name(*t)))
                    );
                }
            }
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}
