//! Acceptance checks on the worked examples and the property suites. Prints
//! one PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crn_conjugacy::balance::{construct_complex_balanced, detailed_balance_rescaling};
use crn_conjugacy::conjugacy::{
    alternative_support, solve, ConjugacyProblem, ConjugateRealization, ObjectiveKind, Pin,
    PinTarget, Requirements, Source,
};
use crn_conjugacy::equilibrium::{
    find_equilibrium, is_complex_balanced_at, is_detailed_balanced_at, refine_equilibrium,
    MassActionSystem,
};
use crn_conjugacy::io::{parse_complex, parse_network_file, NetworkFile};
use crn_conjugacy::kinetics::{canonical_realization, PolynomialKinetics};
use crn_conjugacy::milp::{solve_milp, MilpModel, Relation, Sense, SolveStatus, SolverOptions};
use crn_conjugacy::network::StoichiometricMatrix;
use crn_conjugacy::network::{Complex, KirchhoffMatrix, Reaction, ReactionNetwork};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture, random_complexes, random_network, species};

/// Residual allowed when replaying conjugacy constants against the conjugacy rows.
const REPLAY_TOL: f64 = 1e-7;
/// Tolerance on rates and induced parameters of the structural examples.
const RATE_TOL: f64 = 1e-7;
/// Tolerance on the entries of the constructed Example 4 matrix.
const MATRIX_TOL: f64 = 1e-10;
/// Equilibrium residual accepted for printed (rounded) equilibria.
const PRINTED_EQ_TOL: f64 = 1e-6;
const PRINTED_X_STAR: [f64; 3] = [0.2, 0.577350269, 0.258198889];

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, title: &str, checks: Vec<(String, bool)>, elapsed: Duration) {
        let ok = checks.iter().all(|c| c.1);
        if !ok {
            self.failed += 1;
        }
        let detail: Vec<String> = checks
            .into_iter()
            .map(|(text, pass)| if pass { text } else { format!("{text} [fail]") })
            .collect();
        println!(
            "{} {id} {title}: {} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            detail.join("; "),
            elapsed.as_secs_f64()
        );
    }
}

fn load(name: &str) -> NetworkFile {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    parse_network_file(&text).expect("fixture parses")
}

fn kinetics_problem(name: &str) -> ConjugacyProblem {
    let (source, _) = load(name).conjugacy_source().unwrap();
    ConjugacyProblem::new(source)
}

fn source_system(p: &ConjugacyProblem) -> MassActionSystem {
    match &p.source {
        Source::Kinetics {
            species,
            complexes,
            m,
        } => MassActionSystem::new(
            StoichiometricMatrix::from_complexes(species.len(), complexes),
            m.clone(),
        )
        .unwrap(),
        Source::Network(net) => MassActionSystem::from_network(net),
    }
}

fn wr() -> Requirements {
    Requirements {
        weakly_reversible: true,
        ..Default::default()
    }
}

fn solved(p: &ConjugacyProblem) -> (Option<ConjugateRealization>, Duration) {
    let t = Instant::now();
    let r = match solve(p) {
        Ok(o) => o.realization().cloned(),
        Err(e) => {
            println!("  solver error: {e}");
            None
        }
    };
    (r, t.elapsed())
}

fn support(r: &ConjugateRealization) -> BTreeSet<(usize, usize)> {
    r.support.iter().copied().collect()
}

fn edges(r: &ConjugateRealization) -> String {
    r.support
        .iter()
        .map(|(t, s)| format!("C{}->C{}", s + 1, t + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn full_network(r: &ConjugateRealization) -> ReactionNetwork {
    ReactionNetwork::from_kirchhoff(r.species.clone(), r.complexes.clone(), &r.a_k_prime).unwrap()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn close_multiset(found: &[f64], want: &[f64], tol: f64) -> bool {
    let mut a = found.to_vec();
    let mut b = want.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
}

fn proportional(c: &[f64], want: &[f64], tol: f64) -> bool {
    let s = c[0] / want[0];
    c.iter()
        .zip(want)
        .all(|(x, w)| (x / (s * w) - 1.0).abs() <= tol)
}

/// Printed equilibrium of Example 1, polished on the source kinetics.
fn example1_equilibrium(system: &MassActionSystem) -> Vec<f64> {
    refine_equilibrium(system, &PRINTED_X_STAR, PRINTED_EQ_TOL, 1e-8)
        .unwrap()
        .x
}

fn criterion_1_2(rep: &mut Report) -> Option<(ConjugateRealization, ConjugateRealization)> {
    let base = kinetics_problem("example1.crn").with_requirements(wr());
    let sparse_p = base.clone().with_objective(ObjectiveKind::Sparse);
    let (sparse, t_sparse) = solved(&sparse_p);
    let dense_p = base.clone().with_objective(ObjectiveKind::Dense);
    let (dense, t_dense) = solved(&dense_p);
    let fixed_a = base
        .clone()
        .with_objective(ObjectiveKind::Dense)
        .with_fixed_conjugacy(vec![20.0, 2.0, 5.0]);
    // Any WR realization with these constants lies in this support.
    let (structure_a, _) = solved(&fixed_a);
    let (Some(sparse), Some(dense)) = (sparse, dense) else {
        rep.line(
            "1",
            "Example 1 sparse+WR",
            vec![("no realization".into(), false)],
            t_sparse,
        );
        rep.line(
            "2",
            "Example 1 dense+WR",
            vec![("no realization".into(), false)],
            t_dense,
        );
        return None;
    };

    let mut checks = Vec::new();
    let n = sparse.diagnostics.reaction_count;
    checks.push((
        format!("{n} reactions, want 8 [{}]", edges(&sparse)),
        n == 8,
    ));
    checks.push((
        "weakly reversible".into(),
        sparse.network.analyze().is_weakly_reversible,
    ));
    checks.push((
        format!(
            "c = {} with residual {:.1e}",
            fmt_vec(&sparse.c),
            sparse.conjugacy_residual()
        ),
        sparse.conjugacy_residual() <= REPLAY_TOL,
    ));
    let t = Instant::now();
    let alt = alternative_support(&sparse_p, &sparse).unwrap();
    let strict_time = t.elapsed();
    let structure_a_support = structure_a.as_ref().map(support);
    checks.push((
        format!(
            "strict structure: {} optimum, equal to the WR support at c = (20, 2, 5) = [{}]",
            if alt.is_none() {
                "unique"
            } else {
                "non-unique"
            },
            structure_a.as_ref().map(edges).unwrap_or_default()
        ),
        alt.is_none() && structure_a_support.as_ref() == Some(&support(&sparse)),
    ));
    let replay = base
        .clone()
        .with_objective(ObjectiveKind::Sparse)
        .with_fixed_conjugacy(vec![20.0, 2.0, 5.0]);
    let (replayed, _) = solved(&replay);
    checks.push(match &replayed {
        Some(r) => (
            format!(
                "c = (20, 2, 5) feasible, residual {:.1e}",
                r.conjugacy_residual()
            ),
            r.conjugacy_residual() <= REPLAY_TOL,
        ),
        None => ("c = (20, 2, 5) infeasible".into(), false),
    });
    checks.push((
        format!("runtime {:.2} s < 10 s", t_sparse.as_secs_f64()),
        t_sparse < Duration::from_secs(10),
    ));
    rep.line("1", "Example 1 sparse+WR", checks, t_sparse + strict_time);

    let mut checks = Vec::new();
    let n = dense.diagnostics.reaction_count;
    checks.push((
        format!("{n} reactions, want 10 [{}]", edges(&dense)),
        n == 10,
    ));
    let fixed_b = base
        .clone()
        .with_objective(ObjectiveKind::Dense)
        .with_fixed_conjugacy(vec![20.0 / 3.0, 20.0 / 33.0, 5.0 / 3.0]);
    let (structure_b, _) = solved(&fixed_b);
    checks.push((
        "support equals the dense one at c = (20/3, 20/33, 5/3)".into(),
        structure_b.as_ref().map(support) == Some(support(&dense)),
    ));
    checks.push((
        format!(
            "c = {} proportional to (20/3, 20/33, 5/3)",
            fmt_vec(&dense.c)
        ),
        proportional(&dense.c, &[20.0 / 3.0, 20.0 / 33.0, 5.0 / 3.0], 1e-6),
    ));
    checks.push((
        "sparse support inside dense support".into(),
        support(&sparse).is_subset(&support(&dense)),
    ));
    checks.push((
        format!("runtime {:.2} s < 30 s", t_dense.as_secs_f64()),
        t_dense < Duration::from_secs(30),
    ));
    rep.line("2", "Example 1 dense+WR", checks, t_dense);
    Some((sparse, dense))
}

fn criterion_3(rep: &mut Report, dense_wr: Option<&ConjugateRealization>) {
    let start = Instant::now();
    let base = kinetics_problem("example1.crn");
    let system = source_system(&base);
    let cb = Requirements {
        complex_balanced: true,
        ..Default::default()
    };
    let p = base
        .clone()
        .with_requirements(cb)
        .with_objective(ObjectiveKind::Sparse);
    let (r1, _) = solved(&p.clone().with_equilibrium(PRINTED_X_STAR.to_vec()));
    let mut checks = Vec::new();
    let Some(r1) = r1 else {
        rep.line(
            "3",
            "Example 1 sparse+CB",
            vec![("infeasible".into(), false)],
            start.elapsed(),
        );
        return;
    };
    checks.push((
        format!(
            "{} reactions [{}], want the dense WR structure",
            r1.diagnostics.reaction_count,
            edges(&r1)
        ),
        dense_wr.map(support) == Some(support(&r1)),
    ));
    let x_star = example1_equilibrium(&system);
    let x_real: Vec<f64> = x_star.iter().zip(&r1.c).map(|(x, c)| x / c).collect();
    let balanced =
        is_complex_balanced_at(&full_network(&r1), &x_real, PRINTED_EQ_TOL).unwrap_or(false);
    checks.push(("complex balanced at x*/c".into(), balanced));

    let second = find_equilibrium(&system, Some(&[1.5, 0.3, 2.0])).unwrap();
    let (r2, _) = solved(&p.with_equilibrium(second.x.clone()));
    checks.push((
        format!(
            "second equilibrium {} from start {}: same status and support",
            fmt_vec(&second.x),
            second.start_index
        ),
        r2.as_ref().map(support) == Some(support(&r1)),
    ));
    rep.line("3", "Example 1 sparse+CB", checks, start.elapsed());
}

fn criterion_4(rep: &mut Report) {
    let start = Instant::now();
    let base = kinetics_problem("example2.crn").with_objective(ObjectiveKind::MinComplexes);
    let species: Vec<String> = (1..=6).map(|i| format!("X{i}")).collect();
    let extra: Vec<Complex> = ["X2 + X4", "X1 + X5"]
        .iter()
        .map(|t| parse_complex(t, &species).unwrap())
        .collect();
    let mut checks = Vec::new();
    let cases = [
        (
            base.clone(),
            [1.0, 2.0, 2.0, 1.0, 4.0, 2.0],
            8usize,
            "17 distinct complexes",
        ),
        (
            base.with_extra_complexes(extra),
            [1.0, 1.0, 2.0, 1.0, 2.0, 1.0],
            6,
            "with X2+X4, X1+X5",
        ),
    ];
    for (p, c, want, label) in cases {
        let (r, t) = solved(&p);
        match r {
            Some(r) => checks.push((
                format!(
                    "{label}: {} active complexes, want {want} ({:.1} s)",
                    r.diagnostics.complex_count,
                    t.as_secs_f64()
                ),
                r.diagnostics.complex_count == want,
            )),
            None => checks.push((format!("{label}: no realization"), false)),
        }
        let (fixed, _) = solved(&p.with_fixed_conjugacy(c.to_vec()));
        match fixed {
            Some(r) => checks.push((
                format!(
                    "c = {} feasible with {} complexes, residual {:.1e}",
                    fmt_vec(&c),
                    r.diagnostics.complex_count,
                    r.conjugacy_residual()
                ),
                r.diagnostics.complex_count == want && r.conjugacy_residual() <= REPLAY_TOL,
            )),
            None => checks.push((format!("c = {} infeasible", fmt_vec(&c)), false)),
        }
    }
    rep.line("4", "Example 2 min-complexes", checks, start.elapsed());
}

fn example3_pins() -> Vec<Pin> {
    vec![
        Pin {
            entry: (1, 0),
            target: PinTarget::Entry(2, 3),
        },
        Pin {
            entry: (1, 2),
            target: PinTarget::Value(1.0),
        },
        Pin {
            entry: (2, 1),
            target: PinTarget::Value(1.0),
        },
    ]
}

fn example3_run(req: Requirements) -> Option<ConjugateRealization> {
    let net = load("example3.crn").network().unwrap();
    let p = ConjugacyProblem::structural(net)
        .with_requirements(req)
        .with_bounds(1.0 / 20.0, 20.0)
        .with_pins(example3_pins());
    solved(&p).0
}

fn rates(net: &ReactionNetwork) -> Vec<f64> {
    net.reactions().map(|r| r.rate).collect()
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let mut checks = Vec::new();
    let rev = Requirements {
        reversible: true,
        ..Default::default()
    };
    for (req, want, label) in [
        (wr(), [0.05, 0.05, 1.5, 1.5], "WR"),
        (rev, [0.05, 0.05, 3.0, 3.0], "Rev"),
    ] {
        let Some(r) = example3_run(req) else {
            checks.push((format!("{label}: infeasible"), false));
            continue;
        };
        let found = rates(&r.network);
        let alpha = r.source_rates.as_ref().map_or(f64::NAN, |s| s.get(1, 0));
        let mut ok = close_multiset(&found, &want, RATE_TOL) && (alpha - 0.05).abs() <= RATE_TOL;
        if label == "Rev" {
            let g = r.network.analyze();
            ok &= g.is_reversible && g.linkage_class_count() == 2;
            for class in &g.linkage_classes {
                let pair: Vec<f64> = r
                    .network
                    .reactions()
                    .filter(|x| class.contains(&x.source))
                    .map(|x| x.rate)
                    .collect();
                ok &= close_multiset(&pair, &[0.05, 3.0], RATE_TOL);
            }
        }
        checks.push((format!("{label}: rates {found:?}, alpha {alpha}"), ok));
    }
    rep.line("5", "Example 3 struct-de", checks, start.elapsed());
}

fn example4() -> (ReactionNetwork, ReactionNetwork) {
    let src = load("example4.crn").network().unwrap();
    let real = load("example4-realization.crn").network().unwrap();
    assert_eq!(src.complexes(), real.complexes());
    (src, real)
}

fn criterion_6(rep: &mut Report) -> Option<ReactionNetwork> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let (src, real) = example4();
    let built =
        construct_complex_balanced(&real, Some(&src.kirchhoff_matrix()), Some(&[1.0, 1.0]), &[]);
    let mut ex4 = None;
    match built {
        Ok(b) => {
            let want = [
                [-0.75, 0.625, 0.125],
                [0.5, -1.25, 0.75],
                [0.25, 0.625, -0.875],
            ];
            let a = &b.a_k_double_prime;
            let err = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (a.get(i, j) - want[i][j]).abs())
                .fold(0.0, f64::max);
            let net = ReactionNetwork::from_kirchhoff(
                real.species().to_vec(),
                real.complexes().to_vec(),
                a,
            )
            .unwrap();
            let cb = is_complex_balanced_at(&net, &[1.0, 1.0], PRINTED_EQ_TOL).unwrap_or(false);
            checks.push((
                format!("Example 4 A'' max error {err:.1e}, complex balanced"),
                err <= MATRIX_TOL && cb,
            ));
            ex4 = Some(net);
        }
        Err(e) => checks.push((format!("Example 4: {e}"), false)),
    }

    let rev = Requirements {
        reversible: true,
        ..Default::default()
    };
    for (req, alpha_want, b_want, label) in [
        (wr(), 1.5, None, "WR"),
        (rev, 3.0, Some([60.0, 1.0, 1.0, 60.0]), "Rev"),
    ] {
        let Some(r) = example3_run(req) else {
            checks.push((format!("Example 3 {label}: infeasible"), false));
            continue;
        };
        let real = full_network(&r);
        let src = r.source_rates.clone().unwrap();
        match construct_complex_balanced(&real, Some(&src), Some(&[1.0, 1.0]), &example3_pins()) {
            Ok(b) => {
                let induced = b.source_rates.as_ref().unwrap();
                let alpha = induced.get(1, 0);
                let built = ReactionNetwork::from_kirchhoff(
                    r.species.clone(),
                    r.complexes.clone(),
                    &b.a_k_double_prime,
                )
                .unwrap();
                let cb =
                    is_complex_balanced_at(&built, &[1.0, 1.0], PRINTED_EQ_TOL).unwrap_or(false);
                let b_ok =
                    b_want.is_none_or(|w| b.b.iter().zip(w).all(|(x, y)| (x - y).abs() <= 1e-9));
                checks.push((
                    format!(
                        "Example 3 {label}: alpha {alpha}, b = {}, complex balanced",
                        fmt_vec(&b.b)
                    ),
                    (alpha - alpha_want).abs() <= RATE_TOL && b_ok && cb,
                ));
            }
            Err(e) => checks.push((format!("Example 3 {label}: {e}"), false)),
        }
    }
    rep.line("6", "Balance construction", checks, start.elapsed());
    ex4
}

fn brute_force_binary(rows: &[(Vec<f64>, Relation, f64)], cost: &[f64]) -> Option<f64> {
    let nb = cost.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << nb) {
        let x: Vec<f64> = (0..nb).map(|i| f64::from(mask >> i & 1)).collect();
        let ok = rows.iter().all(|(a, rel, b)| {
            let lhs: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            match rel {
                Relation::Le => lhs <= b + 1e-9,
                Relation::Ge => lhs >= b - 1e-9,
                Relation::Eq => (lhs - b).abs() <= 1e-9,
            }
        });
        if ok {
            let v: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    best
}

fn criterion_7(rep: &mut Report) {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // (a) branch and bound against enumeration
    let mut agree = 0;
    let models = 200;
    for _ in 0..models {
        let nb = rng.gen_range(1..=12);
        let rows: Vec<(Vec<f64>, Relation, f64)> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let a = (0..nb).map(|_| f64::from(rng.gen_range(-3..=5))).collect();
                let rel = if rng.gen_bool(0.15) {
                    Relation::Eq
                } else if rng.gen_bool(0.5) {
                    Relation::Le
                } else {
                    Relation::Ge
                };
                (a, rel, f64::from(rng.gen_range(-2..=8)))
            })
            .collect();
        let cost: Vec<f64> = (0..nb).map(|_| f64::from(rng.gen_range(-4..=6))).collect();
        let mut m = MilpModel::new();
        let vars: Vec<_> = (0..nb).map(|j| m.add_binary(format!("d{j}"))).collect();
        for (k, (a, rel, b)) in rows.iter().enumerate() {
            m.add_constraint(
                format!("r{k}"),
                vars.iter().copied().zip(a.iter().copied()),
                *rel,
                *b,
            );
        }
        m.set_objective(
            Sense::Minimize,
            vars.iter().copied().zip(cost.iter().copied()),
        );
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        let ok = match brute_force_binary(&rows, &cost) {
            None => s.status == SolveStatus::Infeasible,
            Some(v) => s.status == SolveStatus::Optimal && (s.objective_value - v).abs() < 1e-7,
        };
        agree += usize::from(ok);
    }
    checks.push((
        format!("(a) B&B = enumeration on {agree}/{models} models"),
        agree == models,
    ));

    // (b) dense superstructure, and (c) DB => CB on the same networks
    let nets = 50;
    let mut inside = 0;
    let mut feasible = 0;
    let mut db_cases = 0;
    let mut db_ok = true;
    for _ in 0..nets {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = random_network(&mut rng, n, m, 0.35);
        let base = ConjugacyProblem::from_network(net.clone());
        let dense = solve(&base.clone().with_objective(ObjectiveKind::Dense)).unwrap();
        let dense = dense.realization().map(support).unwrap_or_default();
        let mut all_in = true;
        for req in [Requirements::default(), wr()] {
            let p = base
                .clone()
                .with_requirements(req)
                .with_objective(ObjectiveKind::Sparse);
            if let Some(r) = solve(&p).unwrap().realization() {
                feasible += 1;
                all_in &= support(r).is_subset(&dense);
                if let Ok(eq) = find_equilibrium(&MassActionSystem::from_network(&r.network), None)
                {
                    db_cases += 1;
                    let db = is_detailed_balanced_at(&r.network, &eq.x, PRINTED_EQ_TOL).unwrap();
                    let cb = is_complex_balanced_at(&r.network, &eq.x, PRINTED_EQ_TOL).unwrap();
                    db_ok &= !db || cb;
                }
            }
        }
        inside += usize::from(all_in);
    }
    checks.push((
        format!("(b) sparse supports inside dense support on {inside}/{nets} networks ({feasible} realizations)"),
        inside == nets,
    ));

    let mut balanced = 0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let complexes = random_complexes(&mut rng, n, m);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
        let y = StoichiometricMatrix::from_complexes(n, &complexes);
        let psi = y.mass_action_vector(&x).unwrap();
        let mut reactions = Vec::new();
        for s in 0..m {
            for t in s + 1..m {
                if rng.gen_bool(0.6) {
                    let kf: f64 = rng.gen_range(0.1..10.0);
                    reactions.push(Reaction {
                        source: s,
                        target: t,
                        rate: kf,
                    });
                    reactions.push(Reaction {
                        source: t,
                        target: s,
                        rate: kf * psi[s] / psi[t],
                    });
                }
            }
        }
        if reactions.is_empty() {
            continue;
        }
        let net = ReactionNetwork::new(species(n), complexes, reactions).unwrap();
        db_cases += 1;
        let db = is_detailed_balanced_at(&net, &x, PRINTED_EQ_TOL).unwrap();
        let cb = is_complex_balanced_at(&net, &x, PRINTED_EQ_TOL).unwrap();
        balanced += usize::from(db);
        db_ok &= db && cb;
    }
    checks.push((
        format!("(c) detailed balanced implies complex balanced on {db_cases} networks ({balanced} detailed balanced)"),
        db_ok,
    ));

    // (d) canonical realization round trip
    let mut exact = 0;
    let trials = 200;
    for _ in 0..trials {
        let n = rng.gen_range(1..=3);
        let equations = (0..n)
            .map(|i| {
                let mut seen = BTreeSet::new();
                (0..rng.gen_range(0..=4))
                    .filter_map(|_| {
                        let mono: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=2)).collect();
                        let mut coef =
                            f64::from(rng.gen_range(1..=5)) / f64::from(1 << rng.gen_range(0..4));
                        if mono[i] > 0 && rng.gen_bool(0.5) {
                            coef = -coef;
                        }
                        seen.insert(mono.clone()).then_some((mono, coef))
                    })
                    .collect()
            })
            .collect();
        let k = PolynomialKinetics::new(species(n), equations).unwrap();
        let back = PolynomialKinetics::from_network(&canonical_realization(&k).unwrap());
        exact += usize::from(k.max_coefficient_difference(&back) == 0.0);
    }
    checks.push((
        format!("(d) exact round trip on {exact}/{trials} kinetics"),
        exact == trials,
    ));

    // (e) Jacobian against central differences
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = random_network(&mut rng, n, m, 0.4);
        let system = MassActionSystem::from_network(&net);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let j = system.jacobian(&x).unwrap();
        let mut fd = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * x[k];
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            fd.set_column(
                k,
                &((system.rhs(&xp).unwrap() - system.rhs(&xm).unwrap()) / (2.0 * h)),
            );
        }
        worst = worst.max((&j - &fd).amax() / j.amax().max(f64::MIN_POSITIVE));
    }
    checks.push((
        format!("(e) Jacobian relative error {worst:.1e} <= 1e-5 on 20 networks"),
        worst <= 1e-5,
    ));
    rep.line("7", "Property suites", checks, start.elapsed());
}

fn criterion_8(
    rep: &mut Report,
    dense_wr: Option<&ConjugateRealization>,
    ex4: Option<&ReactionNetwork>,
) {
    let start = Instant::now();
    let mut checks = Vec::new();
    match dense_wr {
        Some(r) => {
            let system = source_system(&kinetics_problem("example1.crn"));
            let x = example1_equilibrium(&system);
            let x_real: Vec<f64> = x.iter().zip(&r.c).map(|(x, c)| x / c).collect();
            let res = is_complex_balanced_at(&full_network(r), &x_real, PRINTED_EQ_TOL);
            checks.push((
                format!("dense WR network complex balanced: {res:?}"),
                matches!(res, Ok(false)),
            ));
        }
        None => checks.push(("no dense WR network".into(), false)),
    }
    match ex4 {
        Some(net) => {
            let res = is_detailed_balanced_at(net, &[1.0, 1.0], PRINTED_EQ_TOL);
            checks.push((
                format!("Example 4 A'' detailed balanced: {res:?}"),
                matches!(res, Ok(false)),
            ));
        }
        None => checks.push(("no Example 4 construction".into(), false)),
    }
    let (_, real) = example4();
    let a: KirchhoffMatrix = real.kirchhoff_matrix();
    let res = detailed_balance_rescaling(&a, &DVector::from_element(3, 1.0));
    checks.push((
        format!(
            "Example 4 detailed-balance rescaling: {}",
            match &res {
                Ok(None) => "unsatisfiable".to_string(),
                other => format!("{other:?}"),
            }
        ),
        matches!(res, Ok(None)),
    ));
    rep.line("8", "Negative controls", checks, start.elapsed());
}

fn main() {
    let mut rep = Report { failed: 0 };
    let ex1 = criterion_1_2(&mut rep);
    let dense = ex1.as_ref().map(|e| &e.1);
    criterion_3(&mut rep, dense);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    let ex4 = criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep, dense, ex4.as_ref());
    println!("{} of 8 criteria failed", rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
