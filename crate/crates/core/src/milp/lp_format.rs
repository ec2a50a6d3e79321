//! CPLEX LP text export, for handing a model to an external solver.

use std::fmt::Write;

use super::model::{MilpModel, Relation, Sense, VarId, VarKind};

fn sanitize(name: &str, fallback: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@'`{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert_str(0, fallback);
    }
    s
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_else(|| "x".into()));
        return;
    }
    for (k, (v, a)) in terms.iter().enumerate() {
        let sign = if *a < 0.0 {
            " -"
        } else if k == 0 {
            ""
        } else {
            " +"
        };
        let _ = write!(out, "{sign} {} {}", a.abs(), names[v.0]);
    }
}

/// Renders the model in CPLEX LP format. Names are made LP-safe and made
/// unique by suffixing the variable index where needed.
pub fn to_lp_format(model: &MilpModel) -> String {
    let mut names: Vec<String> = Vec::with_capacity(model.num_vars());
    for (j, v) in model.variables.iter().enumerate() {
        let mut n = sanitize(&v.name, "v");
        if names.contains(&n) {
            n = format!("{n}_{j}");
        }
        names.push(n);
    }

    let mut out = String::new();
    out.push_str(match model.objective.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, &model.objective.terms, &names);
    out.push_str("\nSubject To\n");
    for (k, c) in model.constraints.iter().enumerate() {
        let label = sanitize(&c.name, "r");
        let _ = write!(out, " {label}_{k}:");
        write_terms(&mut out, &c.terms, &names);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, n) in model.variables.iter().zip(&names) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {n} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {n} >= {}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {}", v.upper);
            }
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
        }
    }
    let bins: Vec<&String> = model.binaries().map(|j| &names[j]).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("A[1,2]", 0.0, 5.0);
        let d = m.add_binary("delta 1 2");
        m.add_constraint("link", [(x, 1.0), (d, -5.0)], Relation::Le, 0.0);
        m.set_objective(Sense::Minimize, [(d, 1.0)]);
        let lp = to_lp_format(&m);
        assert!(lp.starts_with("Minimize\n obj: 1 delta_1_2\n"));
        assert!(lp.contains(" link_0: 1 A_1,2_ - 5 delta_1_2 <= 0\n"));
        assert!(lp.contains(" 0 <= A_1,2_ <= 5\n"));
        assert!(lp.contains("Binaries\n delta_1_2\nEnd\n"));
    }

    #[test]
    fn duplicate_names_disambiguated() {
        let mut m = MilpModel::new();
        m.add_continuous("x", 0.0, 1.0);
        m.add_continuous("x", 0.0, 1.0);
        m.add_continuous("1y", 0.0, f64::INFINITY);
        let lp = to_lp_format(&m);
        assert!(lp.contains(" 0 <= x_1 <= 1\n"));
        assert!(lp.contains(" v1y >= 0\n"));
    }
}
