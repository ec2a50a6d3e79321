use super::*;
use crate::conjugacy::{solve, ConjugacyProblem, ObjectiveKind, Outcome, PinTarget, Requirements};
use crate::network::Complex;

const EXAMPLE1: &str = "\
species: X1, X2, X3
dx1/dt = x1 x2^2 - 2 x1^2 + x1 x3^2
dx2/dt = -x1^2 x2^2 + x1 x3^2
dx3/dt = x1^2 - 3 x1 x3^2
";

#[test]
fn single_reaction_with_fraction() {
    let f = parse_network_file("species: X1, X2\n2X1 + X2 -> 3X1, k = 1/20\n").unwrap();
    let net = f.network().unwrap();
    assert_eq!(net.reaction_count(), 1);
    let r = net.reactions().next().unwrap();
    assert_eq!(r.rate, 0.05);
    assert_eq!(net.complexes()[r.source], Complex(vec![2, 1]));
    assert_eq!(net.complexes()[r.target], Complex(vec![3, 0]));
    let Content::Reactions(rs) = &f.content else {
        panic!()
    };
    assert_eq!(rs[0].rate.fraction, Some((1, 20)));
}

#[test]
fn example1_kinetics_block() {
    let f = parse_network_file(EXAMPLE1).unwrap();
    let k = f.kinetics().unwrap();
    let c = |e: &[u32]| Complex(e.to_vec());
    assert_eq!(k.coefficient(0, &c(&[1, 2, 0])), 1.0);
    assert_eq!(k.coefficient(0, &c(&[2, 0, 0])), -2.0);
    assert_eq!(k.coefficient(0, &c(&[1, 0, 2])), 1.0);
    assert_eq!(k.coefficient(1, &c(&[2, 2, 0])), -1.0);
    assert_eq!(k.coefficient(1, &c(&[1, 0, 2])), 1.0);
    assert_eq!(k.coefficient(2, &c(&[2, 0, 0])), 1.0);
    assert_eq!(k.coefficient(2, &c(&[1, 0, 2])), -3.0);
    assert_eq!(k.equations().iter().map(Vec::len).sum::<usize>(), 7);
    // Without declared complexes the canonical realization is used.
    let (src, labels) = f.conjugacy_source().unwrap();
    assert!(matches!(src, crate::conjugacy::Source::Network(_)));
    assert_eq!(labels[0], "C1");
}

#[test]
fn empty_product_is_named() {
    let e = parse_network_file("species: X1\nX1 -> , k=1\n").unwrap_err();
    assert_eq!(e.line, 2);
    assert!(e.message.contains("empty product"), "{e}");
    assert_eq!(e.column, 7);
}

#[test]
fn diagnosed_errors() {
    let e = parse_network_file("species: X1, X2\nX1 -> X2, k = -2\n").unwrap_err();
    assert!(e.message.contains("negative"), "{e}");
    assert_eq!((e.line, e.column), (2, 15));
    let e = parse_network_file("species: X1\n\n# c\nX1 -> Y, k = 1\n").unwrap_err();
    assert!(e.message.contains("unknown species 'Y'"), "{e}");
    assert_eq!((e.line, e.column), (4, 7));
    let e = parse_network_file("X1 -> X2, k = 1\n").unwrap_err();
    assert!(e.message.contains("species"), "{e}");
    let e = parse_network_file("species: X1, X2\nX1 -> X2, k = 1\nX1 -> X2, k = 2\n").unwrap_err();
    assert!(e.message.contains("already given on line 2"), "{e}");
    let e = parse_network_file("species: X1, X2\nX1 -> X2, k = 1/0\n").unwrap_err();
    assert!(e.message.contains("zero denominator"), "{e}");
    let e = parse_network_file("species: X1, X2\nX1 => X2, k = 1\n").unwrap_err();
    assert!(e.message.contains("'->'"), "{e}");
    let e = parse_network_file("species: X1\ndX1/dt = X1 +\n").unwrap_err();
    assert!(e.message.contains("monomial"), "{e}");
    let e = parse_network_file("species: X1, X2\nX1 -> X2, k = 1\ndX1/dt = X1\n").unwrap_err();
    assert!(e.message.contains("mixed"), "{e}");
}

#[test]
fn reversible_pairs_and_labels() {
    let text = "\
species: A, B
complex C1 = 2A
complex C2 = A + B   # comment
C1 <-> C2, kf = 3/2, kb = 0.25
C2 -> 0, k = 1e-3
";
    let f = parse_network_file(text).unwrap();
    assert_eq!(f.declared, 2);
    assert_eq!(f.labels, vec!["C1", "C2", "C3"]);
    let net = f.network().unwrap();
    assert_eq!(net.rate(0, 1), Some(1.5));
    assert_eq!(net.rate(1, 0), Some(0.25));
    assert_eq!(net.rate(1, 2), Some(1e-3));
    assert!(net.complexes()[2].is_zero());
}

#[test]
fn round_trip_is_identity() {
    let texts = [
        EXAMPLE1,
        "species: A, B\ncomplex P = 2A\nP <-> A + B, kf = 3/2, kb = 0.1\nA+B -> 0, k = 7\n0 -> B, k=2.5e-3\n",
        "species: X1, X2\ncomplex C1 = X1\ncomplex C2 = X2 + X1\ndX1/dt = -1/2*X1 + X2 X1\ndX2/dt = 0\n",
        "species: E, e1\n2E + 3e1 -> E, k = 0.3\n",
    ];
    for t in texts {
        let a = parse_network_file(t).unwrap();
        let printed = print_network_file(&a);
        let b = parse_network_file(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(a, b, "{printed}");
        assert_eq!(print_network_file(&b), printed);
    }
}

#[test]
fn declared_complexes_route_kinetics() {
    let text = "\
species: X1, X2
complex C1 = X1
complex C2 = X2
complex C3 = 2X1
dX1/dt = -X1
dX2/dt = X1
";
    let f = parse_network_file(text).unwrap();
    let (src, labels) = f.conjugacy_source().unwrap();
    let crate::conjugacy::Source::Kinetics { complexes, m, .. } = src else {
        panic!()
    };
    assert_eq!(complexes.len(), 3);
    assert_eq!(labels, vec!["C1", "C2", "C3"]);
    assert_eq!(m[(0, 0)], -1.0);
    assert_eq!(m[(1, 0)], 1.0);
}

#[test]
fn pins_and_complexes() {
    let p = parse_pin("A[2,1]=A[3,4]").unwrap();
    assert_eq!(p.entry, (1, 0));
    assert_eq!(p.target, PinTarget::Entry(2, 3));
    let p = parse_pin("[2,3] = 1").unwrap();
    assert_eq!(p.target, PinTarget::Value(1.0));
    assert_eq!(pin_text(&p), "A[2,3]=1");
    assert!(parse_pin("A[2,2]=1").is_err());
    assert!(parse_pin("A[2,1]=-1").is_err());
    let sp = vec!["X1".to_string(), "X2".to_string()];
    assert_eq!(parse_complex("X2+2X1", &sp).unwrap(), Complex(vec![2, 1]));
    assert!(parse_complex("X3", &sp).is_err());
    assert_eq!(parse_number("3/2").unwrap().value, 1.5);
    assert_eq!(parse_number("1e-3").unwrap().value, 1e-3);
}

fn solved_document() -> ResultDocument {
    let text = "species: X1, X2\nX1 <-> X2, kf = 1/20, kb = 3/2\n2X1 <-> X1 + X2, kf = 1, kb = 2\n";
    let f = parse_network_file(text).unwrap();
    let (src, labels) = f.conjugacy_source().unwrap();
    let p = ConjugacyProblem::new(src)
        .with_objective(ObjectiveKind::Dense)
        .with_requirements(Requirements {
            weakly_reversible: true,
            ..Default::default()
        });
    let out = solve(&p).unwrap();
    assert!(matches!(out, Outcome::Realized(_)));
    ResultDocument::from_outcome("dense", text, &p, &out, &labels).unwrap()
}

#[test]
fn document_round_trips_and_verifies() {
    let doc = solved_document();
    assert_eq!(doc.status, Status::Solved);
    assert_eq!(doc.input_digest.len(), 64);
    let json = doc.to_json();
    let back: ResultDocument = serde_json::from_str(&json).unwrap();
    assert_eq!(back, doc);
    back.verify_properties().unwrap();
    let props = back.properties.as_ref().unwrap();
    assert!(props.weakly_reversible);
    // The text form carries a parseable network.
    let text = doc.to_text();
    let f = parse_network_file(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    assert_eq!(
        f.network().unwrap().reaction_count(),
        doc.diagnostics.as_ref().unwrap().reaction_count
    );
}

#[test]
fn dot_matches_realization() {
    let doc = solved_document();
    let rec = &doc.realization.as_ref().unwrap().network;
    let dot = to_dot(rec);
    assert_eq!(dot.matches(" -> ").count(), rec.reactions.len());
    let net = rec.to_network().unwrap();
    assert_eq!(net.active_complexes().len(), rec.complexes.len());
    for c in &rec.complexes {
        assert!(dot.contains(&format!("\"{}\" [label=", c.label)));
    }
}

#[test]
fn infeasible_document() {
    let text = "species: X1, X2\nX1 -> X2, k = 1\n";
    let f = parse_network_file(text).unwrap();
    let (src, labels) = f.conjugacy_source().unwrap();
    let p = ConjugacyProblem::new(src).with_requirements(Requirements {
        weakly_reversible: true,
        ..Default::default()
    });
    let out = solve(&p).unwrap();
    let doc = ResultDocument::from_outcome("sparse", text, &p, &out, &labels).unwrap();
    assert_eq!(doc.status, Status::Infeasible);
    assert!(doc.realization.is_none());
    assert!(doc.to_text().contains("infeasible"));
    assert!(doc.to_json().contains("\"infeasible\""));
}
