//! Toolkit for grouped PEPA models with non-uniform population sizes.
//!
//! The pipeline: parse a model ([`syntax`]), partition its groups by size and
//! check the aggregation condition ([`analysis`]), build population-level
//! CTMCs with the count-oriented semantics ([`statespace`]) — the reduced
//! model yields the aggregated chain, the original model the full one —
//! verify the aggregation against the full chain ([`verify`]), and solve for
//! stationary or transient distributions ([`solve`]).

pub mod analysis;
pub mod export;
pub mod rates;
pub mod solve;
pub mod statespace;
pub mod syntax;
pub mod verify;

use thiserror::Error;

/// Any failure along the analysis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] syntax::ParseError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    StateSpace(#[from] statespace::StateSpaceError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    Solve(#[from] solve::SolveError),
}

/// Build the aggregated CTMC of a conforming model: reduce to the small
/// groups, drop cooperation-set entries whose only partners were removed,
/// and generate the chain from the result.
pub fn aggregated_ctmc(
    model: &syntax::GroupedModel,
    partition: &analysis::GroupPartition,
    options: statespace::GenerateOptions,
) -> Result<statespace::Ctmc, Error> {
    let reduced = analysis::reduce(model, partition)?;
    let pruned = analysis::prune_inert_cooperation(&reduced);
    Ok(statespace::generate_ctmc(&pruned, options)?)
}
