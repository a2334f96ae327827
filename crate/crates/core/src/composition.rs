//! Composition calculus over ratings.
//!
//! When two independently rated stages are chained (output of the first
//! feeds the second), the composite's rating is bounded without re-testing
//! the pipeline. Composition of single ratings is set-valued because a
//! biased first stage hands the second stage biased input, and what the
//! second stage does with biased input is exactly what its own rating does
//! not always pin down.

use alloc::vec::Vec;

use crate::model::{BiasRating, ModelError, RatingSet};

/// Possible ratings of `first` followed by `second`.
///
/// The table is worst-case: it accounts for every way the first stage's
/// output distribution can land within its rating's guarantees.
pub fn compose_rating(first: BiasRating, second: BiasRating) -> RatingSet {
    use BiasRating::*;
    match (first, second) {
        // A biased head may emit anything from balanced to arbitrarily
        // skewed text, so a data-sensitive tail can surface any rating.
        (BS, BS) => RatingSet::all(),
        (BS, UCS) => RatingSet::singleton(UCS),
        (BS, DSBS) => RatingSet::singleton(BS),
        (UCS, BS) => RatingSet::singleton(BS),
        (UCS, UCS) => RatingSet::singleton(UCS),
        (UCS, DSBS) => RatingSet::singleton(DSBS),
        (DSBS, BS) => RatingSet::singleton(BS),
        (DSBS, UCS) => RatingSet::singleton(UCS),
        (DSBS, DSBS) => RatingSet::singleton(DSBS),
    }
}

/// Lifts [`compose_rating`] to sets: the union over all member pairs.
pub fn compose_set(first: RatingSet, second: RatingSet) -> RatingSet {
    let mut bits: Option<RatingSet> = None;
    for a in first.iter() {
        for b in second.iter() {
            let cell = compose_rating(a, b);
            bits = Some(match bits {
                None => cell,
                Some(acc) => acc.union(cell),
            });
        }
    }
    bits.expect("rating sets are never empty")
}

/// Folds [`compose_set`] left to right over a pipeline of stage ratings.
pub fn compose_chain(stages: &[RatingSet]) -> Result<RatingSet, ModelError> {
    let mut iter = stages.iter().copied();
    let first = iter.next().ok_or(ModelError::EmptyRatings)?;
    Ok(iter.fold(first, compose_set))
}

/// Convenience: compose a chain of singleton ratings.
pub fn compose_ratings(stages: &[BiasRating]) -> Result<RatingSet, ModelError> {
    let sets: Vec<RatingSet> = stages.iter().map(|r| RatingSet::singleton(*r)).collect();
    compose_chain(&sets)
}
