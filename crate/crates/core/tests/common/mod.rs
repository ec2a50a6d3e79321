#![allow(dead_code)]

use std::path::{Path, PathBuf};

use crn_conjugacy::network::{Complex, Reaction, ReactionNetwork};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn species(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// `m` distinct complexes over `n` species with coefficients up to 2.
pub fn random_complexes(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Complex> {
    let mut out: Vec<Complex> = Vec::new();
    while out.len() < m {
        let c = Complex((0..n).map(|_| rng.gen_range(0..=2)).collect());
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Random network on `m` complexes: each ordered pair is a reaction with
/// probability `p` (at least one reaction), rates in `[0.1, 10]`.
pub fn random_network(rng: &mut impl Rng, n: usize, m: usize, p: f64) -> ReactionNetwork {
    let complexes = random_complexes(rng, n, m);
    let mut reactions = Vec::new();
    for s in 0..m {
        for t in 0..m {
            if s != t && rng.gen_bool(p) {
                reactions.push(Reaction {
                    source: s,
                    target: t,
                    rate: rng.gen_range(0.1..10.0),
                });
            }
        }
    }
    if reactions.is_empty() {
        reactions.push(Reaction {
            source: 0,
            target: 1,
            rate: rng.gen_range(0.1..10.0),
        });
    }
    ReactionNetwork::new(species(n), complexes, reactions).unwrap()
}

/// Weakly reversible network: random cycles through shuffled complexes.
pub fn random_wr_network(rng: &mut impl Rng, n: usize, m: usize) -> ReactionNetwork {
    let complexes = random_complexes(rng, n, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut reactions = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let cut = rng.gen_range(2..=m);
    for cycle in [&order[..cut], &order[cut..]] {
        if cycle.len() < 2 {
            continue;
        }
        for k in 0..cycle.len() {
            let (s, t) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            if seen.insert((s, t)) {
                reactions.push(Reaction {
                    source: s,
                    target: t,
                    rate: rng.gen_range(0.1..10.0),
                });
            }
        }
    }
    ReactionNetwork::new(species(n), complexes, reactions).unwrap()
}
