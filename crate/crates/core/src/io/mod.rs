//! Network files, result documents and graph export.

mod document;
mod dot;
mod fraction;
mod parse;
mod print;

use thiserror::Error;

use crate::conjugacy::Source;
use crate::kinetics::{canonical_realization, KineticsError, PolynomialKinetics};
use crate::network::{NetworkError, Reaction, ReactionNetwork};

pub use document::{
    complex_labels, input_digest, pin_text, BalanceRecord, ComplexRecord, DiagnosticsRecord,
    DocumentError, NetworkRecord, ProblemOptions, PropertyChecks, ReactionRecord,
    RealizationRecord, ResultDocument, Status, StructureCheck,
};
pub use dot::to_dot;
pub use fraction::{
    fraction_annotation, round_significant, FRACTION_DENOMINATOR, SIGNIFICANT_DIGITS,
};
pub use parse::{
    parse_complex, parse_network_file, parse_number, parse_pin, Content, NetworkFile, ParseError,
    ParsedReaction, RateLiteral,
};
pub use print::{print_network, print_network_file};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

impl NetworkFile {
    pub fn kinetics(&self) -> Option<&PolynomialKinetics> {
        match &self.content {
            Content::Kinetics(k) => Some(k),
            Content::Reactions(_) => None,
        }
    }

    /// The reaction network; rate laws go through the canonical realization.
    pub fn network(&self) -> Result<ReactionNetwork, InputError> {
        match &self.content {
            Content::Reactions(rs) => Ok(ReactionNetwork::new(
                self.species.clone(),
                self.complexes.clone(),
                rs.iter().map(|r| Reaction {
                    source: r.source,
                    target: r.target,
                    rate: r.rate.value,
                }),
            )?),
            Content::Kinetics(k) => Ok(canonical_realization(k)?),
        }
    }

    /// Labels of the complexes of [`NetworkFile::network`].
    pub fn network_labels(&self) -> Result<Vec<String>, InputError> {
        match &self.content {
            Content::Reactions(_) => Ok(self.labels.clone()),
            Content::Kinetics(_) => {
                let net = self.network()?;
                let mut labels: Vec<Option<String>> = net
                    .complexes()
                    .iter()
                    .map(|c| {
                        let k = self.complexes[..self.declared]
                            .iter()
                            .position(|d| d == c)?;
                        Some(self.labels[k].clone())
                    })
                    .collect();
                let mut used: Vec<String> = labels.iter().flatten().cloned().collect();
                let mut next = 0;
                for l in labels.iter_mut().filter(|l| l.is_none()) {
                    let name = loop {
                        next += 1;
                        let name = format!("C{next}");
                        if !used.contains(&name) {
                            break name;
                        }
                    };
                    used.push(name.clone());
                    *l = Some(name);
                }
                Ok(labels.into_iter().flatten().collect())
            }
        }
    }

    /// Input for the conjugacy problem: rate laws with declared complexes
    /// are fitted over exactly those complexes, other rate laws over the
    /// canonical realization's complexes.
    pub fn conjugacy_source(&self) -> Result<(Source, Vec<String>), InputError> {
        match &self.content {
            Content::Kinetics(k) if self.declared > 0 => {
                let m = k.kinetics_matrix(&self.complexes)?;
                Ok((
                    Source::Kinetics {
                        species: self.species.clone(),
                        complexes: self.complexes.clone(),
                        m,
                    },
                    self.labels.clone(),
                ))
            }
            _ => Ok((Source::Network(self.network()?), self.network_labels()?)),
        }
    }
}

pub fn default_labels(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("C{i}")).collect()
}

#[cfg(test)]
mod tests;
