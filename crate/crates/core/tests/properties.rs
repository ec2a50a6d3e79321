mod common;

use std::collections::BTreeSet;

use crn_conjugacy::balance::{complex_balanced_from_wr, positive_kernel_vector};
use crn_conjugacy::conjugacy::{solve, ConjugacyProblem, ObjectiveKind, Requirements};
use crn_conjugacy::equilibrium::{
    find_equilibrium, is_complex_balanced_at, is_detailed_balanced_at, MassActionSystem,
};
use crn_conjugacy::graph::matrix_rank;
use crn_conjugacy::io::{parse_network_file, print_network_file, to_dot, Content, ResultDocument};
use crn_conjugacy::kinetics::{canonical_realization, PolynomialKinetics};
use crn_conjugacy::network::{Complex, Reaction, ReactionNetwork};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_complexes, random_network, random_wr_network, species};

fn support_of(p: &ConjugacyProblem) -> Option<BTreeSet<(usize, usize)>> {
    solve(p)
        .unwrap()
        .realization()
        .map(|r| r.support.iter().copied().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sparse_support_lies_in_dense_support(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = random_network(&mut rng, n, m, 0.35);
        let base = ConjugacyProblem::from_network(net.clone());
        let dense = support_of(&base.clone().with_objective(ObjectiveKind::Dense))
            .expect("the source itself is a realization");
        let sparse = support_of(&base.clone().with_objective(ObjectiveKind::Sparse)).unwrap();
        prop_assert!(sparse.is_subset(&dense), "{sparse:?} vs {dense:?}");
        for r in net.reactions() {
            prop_assert!(dense.contains(&(r.target, r.source)));
        }
        let wr = Requirements { weakly_reversible: true, ..Default::default() };
        if let Some(s) = support_of(&base.with_requirements(wr)) {
            prop_assert!(s.is_subset(&dense));
        }
    }

    #[test]
    fn detailed_balance_implies_complex_balance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let complexes = random_complexes(&mut rng, n, m);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
        let psi = |c: &Complex| -> f64 {
            c.0.iter().zip(&x).map(|(e, v)| v.powi(*e as i32)).product()
        };
        // Reversible pairs; half of them detailed balanced at `x`.
        let balanced = rng.gen_bool(0.5);
        let mut reactions = Vec::new();
        for s in 0..m {
            for t in s + 1..m {
                if rng.gen_bool(0.5) {
                    let kf: f64 = rng.gen_range(0.1..10.0);
                    let kb = if balanced {
                        kf * psi(&complexes[s]) / psi(&complexes[t])
                    } else {
                        rng.gen_range(0.1..10.0)
                    };
                    reactions.push(Reaction { source: s, target: t, rate: kf });
                    reactions.push(Reaction { source: t, target: s, rate: kb });
                }
            }
        }
        prop_assume!(!reactions.is_empty());
        let net = ReactionNetwork::new(species(n), complexes, reactions).unwrap();
        let point = if balanced {
            Some(x)
        } else {
            find_equilibrium(&MassActionSystem::from_network(&net), None).ok().map(|p| p.x)
        };
        prop_assume!(point.is_some());
        let x = point.unwrap();
        let db = is_detailed_balanced_at(&net, &x, 1e-6).unwrap();
        let cb = is_complex_balanced_at(&net, &x, 1e-6).unwrap();
        if balanced {
            prop_assert!(db);
        }
        prop_assert!(!db || cb);
    }

    #[test]
    fn complex_balanced_realizations_ignore_the_equilibrium(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(3..=5);
        let wr = random_wr_network(&mut rng, n, m);
        let y = wr.stoichiometric_matrix().to_f64();
        let diffs: Vec<Vec<f64>> = wr
            .reactions()
            .map(|r| (0..n).map(|i| y[(i, r.target)] - y[(i, r.source)]).collect())
            .collect();
        // A second equilibrium needs a conservation law.
        let rank = matrix_rank(diffs.clone(), 1e-9);
        prop_assume!(rank < n);
        let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let cert = positive_kernel_vector(&wr.kirchhoff_matrix()).unwrap();
        let built = complex_balanced_from_wr(
            &wr.kirchhoff_matrix(),
            &cert,
            &wr.stoichiometric_matrix(),
            &x1,
            None,
        )
        .unwrap();
        let net = ReactionNetwork::from_kirchhoff(
            wr.species().to_vec(),
            wr.complexes().to_vec(),
            &built.a_k_double_prime,
        )
        .unwrap();
        // v orthogonal to every reaction vector.
        let s = DMatrix::from_fn(diffs.len(), n, |k, i| diffs[k][i]);
        let eig = (s.transpose() * &s).symmetric_eigen();
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k).into_owned();
        prop_assume!((&s * &v).amax() <= 1e-9);
        let t: f64 = rng.gen_range(0.2..0.8);
        let x2: Vec<f64> = x1.iter().zip(v.iter()).map(|(a, b)| a * (t * b).exp()).collect();
        prop_assert!(is_complex_balanced_at(&net, &x1, 1e-6).unwrap());
        prop_assert!(is_complex_balanced_at(&net, &x2, 1e-6).unwrap());

        let cb = Requirements { complex_balanced: true, ..Default::default() };
        for objective in [ObjectiveKind::Dense, ObjectiveKind::Sparse] {
            let p = ConjugacyProblem::from_network(net.clone())
                .with_requirements(cb)
                .with_objective(objective);
            let a = solve(&p.clone().with_equilibrium(x1.clone())).unwrap();
            let b = solve(&p.with_equilibrium(x2.clone())).unwrap();
            prop_assert_eq!(a.is_feasible(), b.is_feasible());
            if let (Some(a), Some(b)) = (a.realization(), b.realization()) {
                match objective {
                    ObjectiveKind::Dense => prop_assert_eq!(&a.support, &b.support),
                    _ => prop_assert_eq!(a.support.len(), b.support.len()),
                }
            }
        }
    }
}

fn kinetics_strategy() -> impl Strategy<Value = PolynomialKinetics> {
    (1usize..=3).prop_flat_map(|n| {
        let term = (prop::collection::vec(0u32..=2, n), -5i32..=5, 0u32..4);
        prop::collection::vec(prop::collection::vec(term, 0..=4), n).prop_map(move |eqs| {
            let equations = eqs
                .into_iter()
                .enumerate()
                .map(|(i, terms)| {
                    let mut seen = BTreeSet::new();
                    terms
                        .into_iter()
                        .filter(|(mono, coef, _)| *coef != 0 && seen.insert(mono.clone()))
                        .map(|(mono, coef, frac)| {
                            let mut v = coef as f64 / f64::from(1 << frac);
                            if mono[i] == 0 {
                                v = v.abs();
                            }
                            (mono, v)
                        })
                        .collect()
                })
                .collect();
            PolynomialKinetics::new(species(n), equations).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_realization_round_trips(k in kinetics_strategy()) {
        let net = canonical_realization(&k).unwrap();
        let back = PolynomialKinetics::from_network(&net);
        prop_assert_eq!(k.max_coefficient_difference(&back), 0.0);
        let x: Vec<f64> = (0..k.species().len()).map(|i| 0.5 + i as f64 * 0.3).collect();
        let rhs = net.ode_rhs(&x).unwrap();
        for (a, b) in rhs.iter().zip(k.evaluate(&x)) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn kinetics_text_round_trips(k in kinetics_strategy()) {
        let text = {
            let net = canonical_realization(&k).unwrap();
            let file = parse_network_file(&format!("species: {}\ndX1/dt = 0\n", k.species().join(", ")))
                .unwrap();
            let mut file = file;
            file.content = Content::Kinetics(PolynomialKinetics::from_network(&net));
            print_network_file(&file)
        };
        let parsed = parse_network_file(&text).unwrap();
        let again = parse_network_file(&print_network_file(&parsed)).unwrap();
        prop_assert_eq!(&parsed, &again);
        prop_assert_eq!(parsed.kinetics().unwrap().max_coefficient_difference(&k), 0.0);
    }

    #[test]
    fn reaction_text_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = random_network(&mut rng, n, m, 0.4);
        let mut text = format!("species: {}\n", net.species().join(", "));
        for r in net.reactions() {
            text.push_str(&format!(
                "{} -> {}, k = {}\n",
                net.complexes()[r.source].display(net.species()),
                net.complexes()[r.target].display(net.species()),
                r.rate
            ));
        }
        let parsed = parse_network_file(&text).unwrap();
        let again = parse_network_file(&print_network_file(&parsed)).unwrap();
        prop_assert_eq!(&parsed, &again);
        let back = parsed.network().unwrap();
        prop_assert_eq!(back.reaction_count(), net.reaction_count());
        for r in net.reactions() {
            let s = back.complex_index(&net.complexes()[r.source]).unwrap();
            let t = back.complex_index(&net.complexes()[r.target]).unwrap();
            prop_assert_eq!(back.rate(s, t), Some(r.rate));
        }
    }

    #[test]
    fn analysis_documents_verify_from_json(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = if rng.gen_bool(0.5) {
            random_wr_network(&mut rng, n, m)
        } else {
            random_network(&mut rng, n, m, 0.35)
        };
        let labels: Vec<String> = (1..=m).map(|k| format!("C{k}")).collect();
        let doc = ResultDocument::analysis("analyze", "", &net, &labels, None).unwrap();
        let back: ResultDocument = serde_json::from_str(&doc.to_json()).unwrap();
        prop_assert_eq!(&back, &doc);
        back.verify_properties().unwrap();

        let rec = &doc.realization.as_ref().unwrap().network;
        let dot = to_dot(rec);
        let nodes: BTreeSet<String> = dot
            .lines()
            .filter(|l| l.contains("[label=") && !l.contains("->"))
            .map(|l| l.trim().split('"').nth(1).unwrap().to_string())
            .collect();
        let active: BTreeSet<String> = net
            .active_complexes()
            .into_iter()
            .map(|k| labels[k].clone())
            .collect();
        prop_assert_eq!(nodes, active);
        prop_assert_eq!(dot.matches(" -> ").count(), net.reaction_count());
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5.min(3usize.pow(n as u32)));
        let net = random_network(&mut rng, n, m, 0.4);
        let system = MassActionSystem::from_network(&net);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let j = system.jacobian(&x).unwrap();
        let mut fd = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * x[k];
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let d = (system.rhs(&xp).unwrap() - system.rhs(&xm).unwrap()) / (2.0 * h);
            fd.set_column(k, &d);
        }
        let scale = j.amax().max(f64::MIN_POSITIVE);
        assert!(
            (&j - &fd).amax() <= 1e-5 * scale,
            "case {case}: {j} vs {fd}"
        );
    }
}
