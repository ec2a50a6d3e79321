use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crn_conjugacy::balance::{construct_complex_balanced, BalanceError};
use crn_conjugacy::conjugacy::{
    alternative_support, solve, ConjugacyError, ConjugacyProblem, ObjectiveKind, Outcome, Pin,
    PinTarget, Requirements, Source, DEFAULT_EPSILON, DEFAULT_UPPER_BOUND,
};
use crn_conjugacy::equilibrium::EquilibriumError;
use crn_conjugacy::io::{
    complex_labels, parse_complex, parse_network_file, parse_number, parse_pin, pin_text, to_dot,
    InputError, NetworkFile, NetworkRecord, ProblemOptions, ResultDocument, Status, StructureCheck,
};
use crn_conjugacy::milp::{SolveStatus, SolverOptions};
use crn_conjugacy::network::{KirchhoffMatrix, Reaction, ReactionNetwork};

const EXIT_SOLVED: u8 = 0;
const EXIT_INTERNAL: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "crn-conj",
    version,
    about = "Linearly conjugate and dynamically equivalent mass-action networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph properties, deficiency and balance checks of a network.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Conjugate realization with the fewest reactions.
    Sparse(SolveArgs),
    /// Conjugate realization with the most reactions.
    Dense(SolveArgs),
    /// Conjugate realization using the fewest complexes.
    MinComplexes(SolveArgs),
    /// Conjugate realization using the most complexes.
    MaxComplexes(SolveArgs),
    /// Dynamical equivalence over the structure of the input network, with
    /// its rate constants free.
    StructDe {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long, value_enum, default_value_t = StructObjective::Sparse)]
        objective: StructObjective,
    },
    /// Complex-balanced realization built from a weakly reversible one.
    BalanceConstruct {
        #[command(flatten)]
        input: InputArgs,
        /// Weakly reversible realization to rescale; found by struct-de when
        /// absent.
        #[arg(long, value_name = "FILE")]
        realization: Option<PathBuf>,
        #[command(flatten)]
        flags: BalanceFlags,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StructObjective {
    Sparse,
    Dense,
}

#[derive(Args)]
struct InputArgs {
    /// Network file.
    input: PathBuf,
    /// Positive equilibrium "x1,...,xn" (decimals or fractions), checked to a
    /// residual of 1e-6.
    #[arg(long, value_name = "X")]
    equilibrium: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Structured output instead of text.
    #[arg(long)]
    json: bool,
    /// Also write the realization graph in DOT format.
    #[arg(long, value_name = "PATH")]
    dot: Option<PathBuf>,
    /// Write the document to a file instead of standard output.
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceFlags {
    /// Require weak reversibility (the default for balance-construct).
    #[arg(long)]
    wr: bool,
    /// Require reversibility.
    #[arg(long)]
    rev: bool,
    /// Lower bound on nonzero rates.
    #[arg(long, value_name = "EPS")]
    eps: Option<String>,
    /// Upper bound on rates.
    #[arg(long, value_name = "U")]
    ubound: Option<String>,
    /// Side constraint on the source rates, e.g. "A[2,1]=A[3,4]" or
    /// "A[2,3]=1" (1-based product, reactant).
    #[arg(long, value_name = "PIN")]
    pin: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: BalanceFlags,
    /// Require complex balancing at the equilibrium.
    #[arg(long)]
    cb: bool,
    /// Require detailed balancing at the equilibrium.
    #[arg(long)]
    db: bool,
    /// Complex added to the candidate set, e.g. "X2+X4".
    #[arg(long, value_name = "COMPLEX")]
    extra_complex: Vec<String>,
    /// Also check that no other reaction support attains the optimum.
    #[arg(long)]
    strict_structure: bool,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<ConjugacyError> for Failure {
    fn from(e: ConjugacyError) -> Self {
        let code = match &e {
            ConjugacyError::SolverLimit { .. } => EXIT_LIMIT,
            ConjugacyError::Unbounded
            | ConjugacyError::Validation(_)
            | ConjugacyError::Model(_) => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BalanceError> for Failure {
    fn from(e: BalanceError) -> Self {
        let code = match &e {
            BalanceError::Solver(SolveStatus::NodeLimit | SolveStatus::IterationLimit) => {
                EXIT_LIMIT
            }
            BalanceError::Solver(_)
            | BalanceError::NotBalanced(_)
            | BalanceError::NotKernel { .. } => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_file(path: &Path) -> Result<(String, NetworkFile), Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let file = parse_network_file(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok((text, file))
}

fn number(text: &str, what: &str) -> Result<f64, Failure> {
    parse_number(text)
        .map(|r| r.value)
        .map_err(|e| Failure::input(format!("{what}: {}", e.message)))
}

fn equilibrium(text: Option<&str>, n: usize) -> Result<Option<Vec<f64>>, Failure> {
    let Some(text) = text else { return Ok(None) };
    let x = text
        .split(',')
        .map(|v| number(v.trim(), "--equilibrium"))
        .collect::<Result<Vec<_>, _>>()?;
    if x.len() != n {
        return Err(Failure::input(format!(
            "--equilibrium has {} values for {n} species",
            x.len()
        )));
    }
    if x.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Failure::input("--equilibrium must be strictly positive"));
    }
    Ok(Some(x))
}

fn pins(texts: &[String]) -> Result<Vec<Pin>, Failure> {
    texts
        .iter()
        .map(|t| parse_pin(t).map_err(|e| Failure::input(format!("--pin {t}: {}", e.message))))
        .collect()
}

fn bounds(flags: &BalanceFlags) -> Result<(f64, f64), Failure> {
    let eps = match &flags.eps {
        Some(t) => number(t, "--eps")?,
        None => DEFAULT_EPSILON,
    };
    let u = match &flags.ubound {
        Some(t) => number(t, "--ubound")?,
        None => DEFAULT_UPPER_BOUND,
    };
    Ok((eps, u))
}

fn emit(doc: &ResultDocument, out: &OutputArgs) -> Result<(), Failure> {
    doc.verify_properties()
        .map_err(|e| Failure::internal(e.to_string()))?;
    let body = if out.json {
        doc.to_json() + "\n"
    } else {
        doc.to_text()
    };
    match &out.output {
        Some(p) => {
            fs::write(p, body).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        None => print!("{body}"),
    }
    if let Some(p) = &out.dot {
        match &doc.realization {
            Some(rec) => fs::write(p, to_dot(&rec.network))
                .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
            None => eprintln!("no realization; {} not written", p.display()),
        }
    }
    Ok(())
}

fn status_code(doc: &ResultDocument) -> u8 {
    match doc.status {
        Status::Solved => EXIT_SOLVED,
        Status::Infeasible => EXIT_INFEASIBLE,
    }
}

fn analyze(command: &str, input: &InputArgs, out: &OutputArgs) -> Result<u8, Failure> {
    let (text, file) = read_file(&input.input)?;
    let net = file.network()?;
    let labels = file.network_labels()?;
    let x = equilibrium(input.equilibrium.as_deref(), net.species_count())?;
    let doc = ResultDocument::analysis(command, &text, &net, &labels, x.as_deref())
        .map_err(|e| Failure::internal(e.to_string()))?;
    emit(&doc, out)?;
    Ok(status_code(&doc))
}

fn requirements(flags: &BalanceFlags, cb: bool, db: bool) -> Requirements {
    Requirements {
        weakly_reversible: flags.wr,
        reversible: flags.rev,
        complex_balanced: cb,
        detailed_balanced: db,
    }
}

fn conjugacy(
    command: &str,
    args: &SolveArgs,
    objective: ObjectiveKind,
    structural: bool,
) -> Result<u8, Failure> {
    let (text, file) = read_file(&args.input.input)?;
    let (source, labels) = file.conjugacy_source()?;
    let mut problem = if structural {
        match source {
            Source::Network(net) => ConjugacyProblem::structural(net),
            Source::Kinetics { .. } => {
                return Err(Failure::input(
                    "struct-de needs a reaction network, not rate laws over declared complexes",
                ))
            }
        }
    } else {
        ConjugacyProblem::new(source)
    };
    let (eps, u) = bounds(&args.flags)?;
    problem = problem
        .with_objective(objective)
        .with_requirements(requirements(&args.flags, args.cb, args.db))
        .with_bounds(eps, u)
        .with_pins(pins(&args.flags.pin)?);
    let species = problem.source_species().to_vec();
    if let Some(x) = equilibrium(args.input.equilibrium.as_deref(), species.len())? {
        problem = problem.with_equilibrium(x);
    }
    let extra = args
        .extra_complex
        .iter()
        .map(|t| {
            parse_complex(t, &species)
                .map_err(|e| Failure::input(format!("--extra-complex {t}: {}", e.message)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    problem = problem.with_extra_complexes(extra);
    if args.strict_structure && !matches!(objective, ObjectiveKind::Sparse | ObjectiveKind::Dense) {
        return Err(Failure::input(
            "--strict-structure applies to reaction-count objectives",
        ));
    }
    problem.solver = SolverOptions::from_env();

    let outcome = solve(&problem)?;
    let mut doc = ResultDocument::from_outcome(command, &text, &problem, &outcome, &labels)
        .map_err(|e| Failure::internal(e.to_string()))?;
    if args.strict_structure {
        if let Outcome::Realized(found) = &outcome {
            let alternative = alternative_support(&problem, found)?;
            doc.structure = Some(StructureCheck {
                unique: alternative.is_none(),
                alternative: alternative.map(|alt| {
                    let labels = complex_labels(alt.complexes.len(), &labels);
                    let alt_labels: Vec<String> = alt
                        .network
                        .complexes()
                        .iter()
                        .map(|c| {
                            let k = alt.complexes.iter().position(|d| d == c).unwrap();
                            labels[k].clone()
                        })
                        .collect();
                    NetworkRecord::from_network(&alt.network, &alt_labels)
                }),
            });
        }
    }
    emit(&doc, &args.output)?;
    Ok(status_code(&doc))
}

/// Source rates of `source` laid out over the complexes of `target`, and
/// pins renumbered from the source's complexes to the target's.
fn align_source(
    source: &ReactionNetwork,
    target: &ReactionNetwork,
    pins: &[Pin],
) -> Result<(KirchhoffMatrix, Vec<Pin>), Failure> {
    if source.species() != target.species() {
        return Err(Failure::input(
            "the realization must use the same species list as the source",
        ));
    }
    let map = |k: usize| -> Result<usize, Failure> {
        let c = &source.complexes()[k];
        target.complex_index(c).ok_or_else(|| {
            Failure::input(format!(
                "source complex {} is not a complex of the realization",
                source.complex_label(k)
            ))
        })
    };
    let reactions = source
        .reactions()
        .map(|r| {
            Ok(Reaction {
                source: map(r.source)?,
                target: map(r.target)?,
                rate: r.rate,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let aligned = ReactionNetwork::new(
        target.species().to_vec(),
        target.complexes().to_vec(),
        reactions,
    )
    .map_err(|e| Failure::input(e.to_string()))?;
    let entry = |(i, j): (usize, usize)| -> Result<(usize, usize), Failure> {
        if i >= source.complex_count() || j >= source.complex_count() {
            return Err(Failure::input(format!(
                "pin entry A[{},{}] outside the {} source complexes",
                i + 1,
                j + 1,
                source.complex_count()
            )));
        }
        Ok((map(i)?, map(j)?))
    };
    let pins = pins
        .iter()
        .map(|p| {
            Ok(Pin {
                entry: entry(p.entry)?,
                target: match p.target {
                    PinTarget::Value(v) => PinTarget::Value(v),
                    PinTarget::Entry(k, l) => {
                        let (k, l) = entry((k, l))?;
                        PinTarget::Entry(k, l)
                    }
                },
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok((aligned.kirchhoff_matrix(), pins))
}

fn balance_construct(
    command: &str,
    input: &InputArgs,
    realization: Option<&Path>,
    flags: &BalanceFlags,
    out: &OutputArgs,
) -> Result<u8, Failure> {
    let (text, file) = read_file(&input.input)?;
    let source = file.network()?;
    let pins = pins(&flags.pin)?;
    let x = equilibrium(input.equilibrium.as_deref(), source.species_count())?;
    let (network, labels, source_rates, pins, options) = match realization {
        Some(path) => {
            let (_, rfile) = read_file(path)?;
            let real = rfile.network()?;
            let (src, aligned) = align_source(&source, &real, &pins)?;
            let mut options = ProblemOptions::plain("balance");
            options.pins = pins.iter().map(pin_text).collect();
            (real, rfile.network_labels()?, src, aligned, options)
        }
        None => {
            let (eps, u) = bounds(flags)?;
            let mut req = requirements(flags, false, false);
            if !req.reversible {
                req.weakly_reversible = true;
            }
            let mut problem = ConjugacyProblem::structural(source)
                .with_requirements(req)
                .with_bounds(eps, u)
                .with_pins(pins.clone());
            problem.solver = SolverOptions::from_env();
            let labels = file.network_labels()?;
            let outcome = solve(&problem)?;
            let r = match outcome {
                Outcome::Realized(r) => r,
                Outcome::Infeasible { .. } => {
                    let doc =
                        ResultDocument::from_outcome(command, &text, &problem, &outcome, &labels)
                            .map_err(|e| Failure::internal(e.to_string()))?;
                    emit(&doc, out)?;
                    return Ok(EXIT_INFEASIBLE);
                }
            };
            let net = ReactionNetwork::from_kirchhoff(
                r.species.clone(),
                r.complexes.clone(),
                &r.a_k_prime,
            )
            .map_err(|e| Failure::internal(e.to_string()))?;
            let src = r
                .source_rates
                .clone()
                .ok_or_else(|| Failure::internal("structural run without source rates"))?;
            let options = ProblemOptions::from_problem(&problem, None);
            (net, labels, src, pins, options)
        }
    };
    if !network.analyze().is_weakly_reversible {
        return Err(Failure::input("the realization is not weakly reversible"));
    }
    let built = construct_complex_balanced(&network, Some(&source_rates), x.as_deref(), &pins)
        .map_err(|e| match e {
            BalanceError::Equilibrium(EquilibriumError::NotAnEquilibrium { .. }) => {
                Failure::input(format!("--equilibrium: {e}"))
            }
            e => Failure::from(e),
        })?;
    let doc = ResultDocument::balanced(command, &text, options, &network, &labels, &built)
        .map_err(|e| Failure::internal(e.to_string()))?;
    emit(&doc, out)?;
    Ok(status_code(&doc))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Analyze { input, output } => analyze("analyze", input, output),
        Command::Sparse(a) => conjugacy("sparse", a, ObjectiveKind::Sparse, false),
        Command::Dense(a) => conjugacy("dense", a, ObjectiveKind::Dense, false),
        Command::MinComplexes(a) => {
            conjugacy("min-complexes", a, ObjectiveKind::MinComplexes, false)
        }
        Command::MaxComplexes(a) => {
            conjugacy("max-complexes", a, ObjectiveKind::MaxComplexes, false)
        }
        Command::StructDe { args, objective } => {
            let o = match objective {
                StructObjective::Sparse => ObjectiveKind::Sparse,
                StructObjective::Dense => ObjectiveKind::Dense,
            };
            conjugacy("struct-de", args, o, true)
        }
        Command::BalanceConstruct {
            input,
            realization,
            flags,
            output,
        } => balance_construct(
            "balance-construct",
            input,
            realization.as_deref(),
            flags,
            output,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_SOLVED
            });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
