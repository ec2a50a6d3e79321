use std::fmt::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::fraction::{fraction_annotation, round_significant};
use super::print::print_network;
use crate::balance::BalancedConstruction;
use crate::conjugacy::{
    ConjugacyProblem, ConjugateRealization, Mode, ObjectiveKind, Outcome, Pin, PinTarget,
    CONJUGACY_TOL,
};
use crate::equilibrium::{
    find_equilibrium, is_complex_balanced_at, is_detailed_balanced_at, EquilibriumPoint,
    MassActionSystem,
};
use crate::network::{Complex, KirchhoffMatrix, NetworkError, Reaction, ReactionNetwork};

/// Residual accepted when re-checking a serialized equilibrium.
const EQUILIBRIUM_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("unknown complex label '{0}' in a serialized reaction")]
    UnknownLabel(String),
    #[error("serialized realization fails validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOptions {
    pub mode: String,
    pub objective: Option<String>,
    pub requirements: Vec<String>,
    pub epsilon: Option<f64>,
    pub upper_bound: Option<f64>,
    pub pins: Vec<String>,
    pub extra_complexes: Vec<String>,
    /// Equilibrium used by the balance constraints, in source coordinates.
    pub equilibrium: Option<Vec<f64>>,
    pub fixed_conjugacy: Option<Vec<f64>>,
}

fn objective_name(o: ObjectiveKind) -> &'static str {
    match o {
        ObjectiveKind::Sparse => "sparse",
        ObjectiveKind::Dense => "dense",
        ObjectiveKind::MinComplexes => "min-complexes",
        ObjectiveKind::MaxComplexes => "max-complexes",
    }
}

/// `A[i,j]=...` with 1-based (product, reactant) indices.
pub fn pin_text(pin: &Pin) -> String {
    let (i, j) = pin.entry;
    match pin.target {
        PinTarget::Value(v) => format!("A[{},{}]={v}", i + 1, j + 1),
        PinTarget::Entry(k, l) => format!("A[{},{}]=A[{},{}]", i + 1, j + 1, k + 1, l + 1),
    }
}

impl ProblemOptions {
    pub fn from_problem(p: &ConjugacyProblem, equilibrium: Option<&[f64]>) -> Self {
        let r = &p.requirements;
        let requirements = [
            (r.weakly_reversible, "wr"),
            (r.reversible, "rev"),
            (r.complex_balanced, "cb"),
            (r.detailed_balanced, "db"),
        ]
        .iter()
        .filter(|f| f.0)
        .map(|f| f.1.to_string())
        .collect();
        ProblemOptions {
            mode: match p.mode {
                Mode::Conjugacy => "conjugacy",
                Mode::StructuralEquivalence => "structural",
            }
            .to_string(),
            objective: Some(objective_name(p.objective).to_string()),
            requirements,
            epsilon: Some(p.epsilon),
            upper_bound: Some(p.upper_bound),
            pins: p.pins.iter().map(pin_text).collect(),
            extra_complexes: p
                .extra_complexes
                .iter()
                .map(|c| c.display(p.source_species()).to_string())
                .collect(),
            equilibrium: equilibrium.map(round_all),
            fixed_conjugacy: p.fixed_conjugacy.clone(),
        }
    }

    pub fn plain(mode: &str) -> Self {
        ProblemOptions {
            mode: mode.to_string(),
            objective: None,
            requirements: Vec::new(),
            epsilon: None,
            upper_bound: None,
            pins: Vec::new(),
            extra_complexes: Vec::new(),
            equilibrium: None,
            fixed_conjugacy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub label: String,
    pub expression: String,
    pub coefficients: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub source: String,
    pub target: String,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<String>,
}

/// Species, complexes and rate constants of one network, rounded for output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub species: Vec<String>,
    pub complexes: Vec<ComplexRecord>,
    pub reactions: Vec<ReactionRecord>,
}

fn round_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| round_significant(*x)).collect()
}

impl NetworkRecord {
    pub fn from_network(net: &ReactionNetwork, labels: &[String]) -> Self {
        let sp = net.species();
        NetworkRecord {
            species: sp.to_vec(),
            complexes: net
                .complexes()
                .iter()
                .zip(labels)
                .map(|(c, l)| ComplexRecord {
                    label: l.clone(),
                    expression: c.display(sp).to_string(),
                    coefficients: c.0.clone(),
                })
                .collect(),
            reactions: net
                .reactions()
                .map(|r| ReactionRecord {
                    source: labels[r.source].clone(),
                    target: labels[r.target].clone(),
                    rate: round_significant(r.rate),
                    fraction: fraction_annotation(r.rate),
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<ReactionNetwork, DocumentError> {
        let index = |l: &str| {
            self.complexes
                .iter()
                .position(|c| c.label == l)
                .ok_or_else(|| DocumentError::UnknownLabel(l.to_string()))
        };
        let reactions = self
            .reactions
            .iter()
            .map(|r| {
                Ok(Reaction {
                    source: index(&r.source)?,
                    target: index(&r.target)?,
                    rate: r.rate,
                })
            })
            .collect::<Result<Vec<_>, DocumentError>>()?;
        Ok(ReactionNetwork::new(
            self.species.clone(),
            self.complexes
                .iter()
                .map(|c| Complex(c.coefficients.clone()))
                .collect(),
            reactions,
        )?)
    }

    pub fn labels(&self) -> Vec<String> {
        self.complexes.iter().map(|c| c.label.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    /// The realization in conjugate coordinates (rates of `A_k'`), active
    /// complexes only.
    pub network: NetworkRecord,
    /// Conjugacy constants `c`; the realization's `x` equals source `x / c`.
    pub conjugacy: Vec<f64>,
    pub conjugacy_fractions: Vec<Option<String>>,
    /// Solved or induced source rates (structural and balance runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_rates: Option<NetworkRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub reaction_count: usize,
    pub complex_count: usize,
    pub conjugacy_residual: f64,
    pub objective_value: f64,
    pub nodes: usize,
    pub pivots: usize,
}

/// Graph and balance properties of a serialized network. Balance flags are
/// evaluated at `equilibrium` and are absent when no positive equilibrium
/// was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyChecks {
    pub weakly_reversible: bool,
    pub reversible: bool,
    pub deficiency: usize,
    pub linkage_classes: usize,
    pub equilibrium: Option<Vec<f64>>,
    pub complex_balanced: Option<bool>,
    pub detailed_balanced: Option<bool>,
}

impl PropertyChecks {
    /// `hint` is tried as the equilibrium first; otherwise Newton multistart
    /// runs from it. Balance is always judged at the rounded point that is
    /// serialized.
    pub fn compute(net: &ReactionNetwork, hint: Option<&[f64]>) -> Self {
        let g = net.analyze();
        let system = MassActionSystem::from_network(net);
        let point = hint
            .and_then(|x| {
                EquilibriumPoint::verified(&system, round_all(x), EQUILIBRIUM_CHECK_TOL).ok()
            })
            .or_else(|| find_equilibrium(&system, hint).ok());
        let x = point.map(|p| round_all(&p.x));
        let (cb, db) = match &x {
            Some(x) => (
                is_complex_balanced_at(net, x, EQUILIBRIUM_CHECK_TOL).ok(),
                is_detailed_balanced_at(net, x, EQUILIBRIUM_CHECK_TOL).ok(),
            ),
            None => (None, None),
        };
        PropertyChecks {
            weakly_reversible: g.is_weakly_reversible,
            reversible: g.is_reversible,
            deficiency: g.deficiency,
            linkage_classes: g.linkage_class_count(),
            equilibrium: x,
            complex_balanced: cb,
            detailed_balanced: db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureCheck {
    /// No other reaction support attains the same optimum.
    pub unique: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<NetworkRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    /// Positive kernel vector of `A_k'` after pin rescaling.
    pub kernel_vector: Vec<f64>,
    /// Column scaling `b / Ψ(x*)`.
    pub scale: Vec<f64>,
    pub balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub command: String,
    pub input_digest: String,
    pub options: ProblemOptions,
    pub status: Status,
    pub realization: Option<RealizationRecord>,
    pub diagnostics: Option<DiagnosticsRecord>,
    pub properties: Option<PropertyChecks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<BalanceRecord>,
}

pub fn input_digest(input: &str) -> String {
    Sha256::digest(input.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Labels of the pruned realization's complexes, via their position in the
/// full complex list.
fn pruned_labels(r: &ConjugateRealization, labels: &[String]) -> Vec<String> {
    r.network
        .complexes()
        .iter()
        .map(|c| {
            let k = r
                .complexes
                .iter()
                .position(|d| d == c)
                .expect("pruned complex");
            labels[k].clone()
        })
        .collect()
}

/// `labels` extended to `m` complexes with fresh `C<k>` names.
pub fn complex_labels(m: usize, labels: &[String]) -> Vec<String> {
    let mut out: Vec<String> = labels.iter().take(m).cloned().collect();
    let mut k = out.len();
    while out.len() < m {
        k += 1;
        let name = format!("C{k}");
        if !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

/// `‖Y·A_b − diag(c)⁻¹·M‖_∞` rebuilt from rounded rates, with `A_b` the
/// rates divided by `Ψ(c)` of their reactant complex.
fn serialized_conjugacy_residual(
    rec: &RealizationRecord,
    complexes: &[Complex],
    m: &DMatrix<f64>,
) -> Result<f64, DocumentError> {
    let net = rec.network.to_network()?;
    let n = rec.conjugacy.len();
    let mut lhs = DMatrix::<f64>::zeros(n, complexes.len());
    let full_index: Vec<usize> = net
        .complexes()
        .iter()
        .map(|c| {
            complexes.iter().position(|d| d == c).ok_or_else(|| {
                DocumentError::Validation("realization complex not in the problem".into())
            })
        })
        .collect::<Result<_, _>>()?;
    let psi_c = net
        .stoichiometric_matrix()
        .mass_action_vector(&rec.conjugacy)?;
    for r in net.reactions() {
        let a = r.rate / psi_c[r.source];
        let (s, t) = (&net.complexes()[r.source], &net.complexes()[r.target]);
        let col = full_index[r.source];
        for i in 0..n {
            lhs[(i, col)] += a * (t.0[i] as f64 - s.0[i] as f64);
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..complexes.len() {
            worst = worst.max((lhs[(i, j)] - m[(i, j)] / rec.conjugacy[i]).abs());
        }
    }
    Ok(worst)
}

fn kirchhoff_check(net: &ReactionNetwork) -> Result<(), DocumentError> {
    KirchhoffMatrix::new(net.kirchhoff_matrix().into_matrix())
        .map(|_| ())
        .map_err(|e| DocumentError::Validation(e.to_string()))
}

impl ResultDocument {
    fn base(command: &str, input: &str, options: ProblemOptions, status: Status) -> Self {
        ResultDocument {
            tool: format!("crn-conj {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            input_digest: input_digest(input),
            options,
            status,
            realization: None,
            diagnostics: None,
            properties: None,
            structure: None,
            balance: None,
        }
    }

    /// Document for a conjugacy or structural run. `labels` name the problem's
    /// complexes (missing entries become `C<k>`). The rounded realization is
    /// re-validated against the fitted kinetics before returning.
    pub fn from_outcome(
        command: &str,
        input: &str,
        problem: &ConjugacyProblem,
        outcome: &Outcome,
        labels: &[String],
    ) -> Result<Self, DocumentError> {
        let r = match outcome {
            Outcome::Infeasible { .. } => {
                let eq = problem.equilibrium.as_deref();
                return Ok(Self::base(
                    command,
                    input,
                    ProblemOptions::from_problem(problem, eq),
                    Status::Infeasible,
                ));
            }
            Outcome::Realized(r) => r,
        };
        let x_star = r.equilibrium.as_ref().map(|e| e.x.clone());
        let mut doc = Self::base(
            command,
            input,
            ProblemOptions::from_problem(problem, x_star.as_deref()),
            Status::Solved,
        );
        let labels_full = complex_labels(r.complexes.len(), labels);
        let network = NetworkRecord::from_network(&r.network, &pruned_labels(r, &labels_full));
        let source_rates = match &r.source_rates {
            Some(src) => {
                let net =
                    ReactionNetwork::from_kirchhoff(r.species.clone(), r.complexes.clone(), src)?;
                let pruned = net.prune_inactive();
                let l: Vec<String> = pruned
                    .complexes()
                    .iter()
                    .map(|c| labels_full[r.complexes.iter().position(|d| d == c).unwrap()].clone())
                    .collect();
                Some(NetworkRecord::from_network(&pruned, &l))
            }
            None => None,
        };
        let rec = RealizationRecord {
            network,
            conjugacy: round_all(&r.c),
            conjugacy_fractions: r.c.iter().map(|c| fraction_annotation(*c)).collect(),
            source_rates,
        };
        let net = rec.network.to_network()?;
        kirchhoff_check(&net)?;
        let residual = serialized_conjugacy_residual(&rec, &r.complexes, &r.kinetics_matrix)?;
        let scale = r.kinetics_matrix.amax().max(1.0);
        if residual > CONJUGACY_TOL * scale {
            return Err(DocumentError::Validation(format!(
                "conjugacy residual {residual:e} after rounding"
            )));
        }
        let hint: Option<Vec<f64>> = x_star
            .as_ref()
            .map(|x| x.iter().zip(&r.c).map(|(a, c)| a / c).collect());
        doc.properties = Some(PropertyChecks::compute(&net, hint.as_deref()));
        doc.diagnostics = Some(DiagnosticsRecord {
            reaction_count: r.diagnostics.reaction_count,
            complex_count: r.diagnostics.complex_count,
            conjugacy_residual: r.diagnostics.conjugacy_residual,
            objective_value: r.diagnostics.objective_value,
            nodes: r.diagnostics.nodes,
            pivots: r.diagnostics.pivots,
        });
        doc.realization = Some(rec);
        Ok(doc)
    }

    /// Graph and balance properties of an input network.
    pub fn analysis(
        command: &str,
        input: &str,
        net: &ReactionNetwork,
        labels: &[String],
        equilibrium: Option<&[f64]>,
    ) -> Result<Self, DocumentError> {
        let mut options = ProblemOptions::plain("analysis");
        options.equilibrium = equilibrium.map(round_all);
        let mut doc = Self::base(command, input, options, Status::Solved);
        let rec = RealizationRecord {
            network: NetworkRecord::from_network(net, &complex_labels(net.complex_count(), labels)),
            conjugacy: vec![1.0; net.species_count()],
            conjugacy_fractions: vec![None; net.species_count()],
            source_rates: None,
        };
        let rounded = rec.network.to_network()?;
        kirchhoff_check(&rounded)?;
        doc.properties = Some(PropertyChecks::compute(&rounded, equilibrium));
        doc.realization = Some(rec);
        Ok(doc)
    }

    /// Document for a complex-balanced construction. `network` carries the
    /// construction's complexes (the realization's) under `labels`.
    pub fn balanced(
        command: &str,
        input: &str,
        mut options: ProblemOptions,
        network: &ReactionNetwork,
        labels: &[String],
        construction: &BalancedConstruction,
    ) -> Result<Self, DocumentError> {
        options.mode = "balance".to_string();
        options.equilibrium = Some(round_all(&construction.x_star));
        let mut doc = Self::base(command, input, options, Status::Solved);
        let species = network.species().to_vec();
        let complexes = network.complexes().to_vec();
        let labels = complex_labels(complexes.len(), labels);
        let built = ReactionNetwork::from_kirchhoff(
            species.clone(),
            complexes.clone(),
            &construction.a_k_double_prime,
        )?;
        let sub = |net: &ReactionNetwork| {
            let pruned = net.prune_inactive();
            let l: Vec<String> = pruned
                .complexes()
                .iter()
                .map(|c| labels[complexes.iter().position(|d| d == c).unwrap()].clone())
                .collect();
            NetworkRecord::from_network(&pruned, &l)
        };
        let source_rates = match &construction.source_rates {
            Some(src) => Some(sub(&ReactionNetwork::from_kirchhoff(
                species.clone(),
                complexes.clone(),
                src,
            )?)),
            None => None,
        };
        let rec = RealizationRecord {
            network: sub(&built),
            conjugacy: vec![1.0; species.len()],
            conjugacy_fractions: vec![None; species.len()],
            source_rates,
        };
        let rounded = rec.network.to_network()?;
        kirchhoff_check(&rounded)?;
        let y = network.stoichiometric_matrix();
        let residual = construction.balance_residual(&y)?;
        doc.properties = Some(PropertyChecks::compute(
            &rounded,
            Some(&construction.x_star),
        ));
        doc.balance = Some(BalanceRecord {
            kernel_vector: round_all(&construction.b),
            scale: round_all(&construction.scale),
            balance_residual: residual,
        });
        doc.realization = Some(rec);
        Ok(doc)
    }

    /// Recomputes the property checks from the serialized realization alone
    /// and compares them with the stored ones.
    pub fn verify_properties(&self) -> Result<(), DocumentError> {
        let (Some(rec), Some(props)) = (&self.realization, &self.properties) else {
            return Ok(());
        };
        let net = rec.network.to_network()?;
        kirchhoff_check(&net)?;
        let again = PropertyChecks::compute(&net, props.equilibrium.as_deref());
        if &again != props {
            return Err(DocumentError::Validation(format!(
                "property checks differ on recomputation: stored {props:?}, recomputed {again:?}"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Human-readable form: a commented header followed by the realization as
    /// a network file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let yn = |b: bool| if b { "yes" } else { "no" };
        let opt = |b: Option<bool>| b.map_or("unknown", yn);
        let vec = |v: &[f64]| {
            v.iter()
                .map(|x| match fraction_annotation(*x) {
                    Some(f) => format!("{x} ({f})"),
                    None => format!("{x}"),
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(out, "# {} {}", self.tool, self.command).unwrap();
        writeln!(out, "# input sha256 {}", self.input_digest).unwrap();
        let o = &self.options;
        let mut line = format!("# mode {}", o.mode);
        if let Some(obj) = &o.objective {
            write!(line, ", objective {obj}").unwrap();
        }
        if !o.requirements.is_empty() {
            write!(line, ", requires {}", o.requirements.join("+")).unwrap();
        }
        if let (Some(e), Some(u)) = (o.epsilon, o.upper_bound) {
            write!(line, ", eps {e}, u {u}").unwrap();
        }
        writeln!(out, "{line}").unwrap();
        for p in &o.pins {
            writeln!(out, "# pin {p}").unwrap();
        }
        for c in &o.extra_complexes {
            writeln!(out, "# extra complex {c}").unwrap();
        }
        if let Some(x) = &o.equilibrium {
            writeln!(out, "# equilibrium used ({})", vec(x)).unwrap();
        }
        match self.status {
            Status::Solved => writeln!(out, "# status solved").unwrap(),
            Status::Infeasible => {
                writeln!(
                    out,
                    "# status infeasible: no realization meets the requirements"
                )
                .unwrap();
            }
        }
        if let Some(d) = &self.diagnostics {
            writeln!(
                out,
                "# {} reactions, {} complexes, objective {}, residual {:.3e}, {} nodes, {} pivots",
                d.reaction_count,
                d.complex_count,
                d.objective_value,
                d.conjugacy_residual,
                d.nodes,
                d.pivots
            )
            .unwrap();
        }
        if let Some(s) = &self.structure {
            writeln!(out, "# optimal structure unique: {}", yn(s.unique)).unwrap();
            if let Some(alt) = &s.alternative {
                for r in &alt.reactions {
                    writeln!(
                        out,
                        "#   alternative {} -> {}, k = {}",
                        r.source, r.target, r.rate
                    )
                    .unwrap();
                }
            }
        }
        if let Some(p) = &self.properties {
            writeln!(
                out,
                "# weakly reversible {}, reversible {}, deficiency {}, {} linkage classes",
                yn(p.weakly_reversible),
                yn(p.reversible),
                p.deficiency,
                p.linkage_classes
            )
            .unwrap();
            match &p.equilibrium {
                Some(x) => writeln!(
                    out,
                    "# at x = ({}): complex balanced {}, detailed balanced {}",
                    vec(x),
                    opt(p.complex_balanced),
                    opt(p.detailed_balanced)
                )
                .unwrap(),
                None => writeln!(out, "# no positive equilibrium found").unwrap(),
            }
        }
        if let Some(b) = &self.balance {
            writeln!(out, "# kernel vector b = ({})", vec(&b.kernel_vector)).unwrap();
            writeln!(out, "# balance residual {:.3e}", b.balance_residual).unwrap();
        }
        if let Some(rec) = &self.realization {
            if o.mode == "conjugacy" {
                writeln!(out, "# conjugacy c = ({})", vec(&rec.conjugacy)).unwrap();
            }
            if let Some(src) = &rec.source_rates {
                writeln!(out, "# source rates").unwrap();
                for r in &src.reactions {
                    writeln!(
                        out,
                        "#   {} -> {}, k = {}",
                        r.source,
                        r.target,
                        rate_text(r)
                    )
                    .unwrap();
                }
            }
            out.push_str(&record_text(&rec.network));
        }
        out
    }
}

fn rate_text(r: &ReactionRecord) -> String {
    match &r.fraction {
        Some(f) => format!("{}  # {f}", r.rate),
        None => format!("{}", r.rate),
    }
}

/// The record as a network file, fractions as trailing comments.
fn record_text(rec: &NetworkRecord) -> String {
    let net = match rec.to_network() {
        Ok(n) => n,
        Err(e) => return format!("# unprintable realization: {e}\n"),
    };
    let labels = rec.labels();
    let mut text = print_network(&net, &labels, |v| format!("{v}"));
    for r in &rec.reactions {
        if let Some(f) = &r.fraction {
            let plain = format!("{} -> {}, k = {}\n", r.source, r.target, r.rate);
            let noted = format!("{} -> {}, k = {}  # {f}\n", r.source, r.target, r.rate);
            text = text.replacen(&plain, &noted, 1);
        }
    }
    text
}
