use std::fmt::Write;

use super::document::NetworkRecord;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph: one node per complex taking part in a reaction, one
/// edge per reaction labelled with its rate.
pub fn to_dot(rec: &NetworkRecord) -> String {
    let mut out = String::from("digraph realization {\n  rankdir=LR;\n  node [shape=box];\n");
    let active = |l: &str| rec.reactions.iter().any(|r| r.source == l || r.target == l);
    for c in rec.complexes.iter().filter(|c| active(&c.label)) {
        writeln!(
            out,
            "  {} [label={}];",
            quote(&c.label),
            quote(&c.expression)
        )
        .unwrap();
    }
    for r in &rec.reactions {
        let label = match &r.fraction {
            Some(f) => format!("{} ({f})", r.rate),
            None => format!("{}", r.rate),
        };
        writeln!(
            out,
            "  {} -> {} [label={}, rate={}];",
            quote(&r.source),
            quote(&r.target),
            quote(&label),
            r.rate
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
