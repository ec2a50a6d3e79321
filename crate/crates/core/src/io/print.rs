use std::fmt::Write;

use super::parse::{Content, NetworkFile, RateLiteral};
use crate::network::{Complex, ReactionNetwork};

fn rate_text(r: &RateLiteral) -> String {
    match r.fraction {
        Some((p, q)) => format!("{p}/{q}"),
        None => format!("{}", r.value),
    }
}

fn monomial_text(mono: &Complex, species: &[String]) -> String {
    let mut parts = Vec::new();
    for (s, &e) in mono.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(species[s].clone()),
            _ => parts.push(format!("{}^{e}", species[s])),
        }
    }
    parts.join("*")
}

/// Prints a parsed file back in canonical form. Declared complexes keep
/// their `complex` lines; reactions are written one per line.
pub fn print_network_file(file: &NetworkFile) -> String {
    let mut out = String::new();
    let sp = &file.species;
    writeln!(out, "species: {}", sp.join(", ")).unwrap();
    for k in 0..file.declared {
        writeln!(
            out,
            "complex {} = {}",
            file.labels[k],
            file.complexes[k].display(sp)
        )
        .unwrap();
    }
    let name = |k: usize| -> String {
        if k < file.declared {
            file.labels[k].clone()
        } else {
            file.complexes[k].display(sp).to_string()
        }
    };
    match &file.content {
        Content::Reactions(rs) => {
            for r in rs {
                writeln!(
                    out,
                    "{} -> {}, k = {}",
                    name(r.source),
                    name(r.target),
                    rate_text(&r.rate)
                )
                .unwrap();
            }
        }
        Content::Kinetics(k) => {
            for (i, eq) in k.equations().iter().enumerate() {
                write!(out, "d{}/dt =", sp[i]).unwrap();
                if eq.is_empty() {
                    out.push_str(" 0");
                }
                for (t, (mono, coef)) in eq.iter().enumerate() {
                    let sign = if *coef < 0.0 { "-" } else { "+" };
                    if t == 0 {
                        if *coef < 0.0 {
                            out.push_str(" -");
                        }
                    } else {
                        write!(out, " {sign}").unwrap();
                    }
                    let mag = coef.abs();
                    let body = monomial_text(mono, sp);
                    match (mag == 1.0, body.is_empty()) {
                        (_, true) => write!(out, " {mag}").unwrap(),
                        (true, false) => write!(out, " {body}").unwrap(),
                        (false, false) => write!(out, " {mag}*{body}").unwrap(),
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Writes a network with every complex declared under `labels`, rates as
/// given by `rate`.
pub fn print_network(
    net: &ReactionNetwork,
    labels: &[String],
    rate: impl Fn(f64) -> String,
) -> String {
    let mut out = String::new();
    let sp = net.species();
    writeln!(out, "species: {}", sp.join(", ")).unwrap();
    for (k, c) in net.complexes().iter().enumerate() {
        writeln!(out, "complex {} = {}", labels[k], c.display(sp)).unwrap();
    }
    for r in net.reactions() {
        writeln!(
            out,
            "{} -> {}, k = {}",
            labels[r.source],
            labels[r.target],
            rate(r.rate)
        )
        .unwrap();
    }
    out
}
