//! Core machinery for black-box bias rating of text-transforming services.
//!
//! A service is probed with generated text blocks whose sensitive-attribute
//! distribution is known exactly, its outputs are reduced back to attribute
//! counts, and a two-sample chi-squared test decides whether an observed
//! distribution is similar to a reference one. A two-step procedure turns
//! those verdicts into one of three ratings:
//!
//! * `BS`, biased: unbiased input comes back resembling a biased spec.
//! * `DSBS`, data-sensitive: output bias tracks input bias.
//! * `UCS`, unbiased: even biased input comes back balanced.
//!
//! Ratings of independently rated stages compose through a small calculus
//! ([`composition`]), so a pipeline can be bounded without re-testing it
//! end to end.
//!
//! Module map:
//!
//! * [`model`]: ratings, rating sets, attributes, distribution specs, counts.
//! * [`stats`]: chi-squared two-sample statistic and p-values.
//! * [`datagen`]: seeded template corpus generation.
//! * [`extraction`]: sentence classification back into counts.
//! * [`service`]: service traits, round-trip and sequential combinators, mocks.
//! * [`composition`]: the rating composition calculus.
//! * [`engine`]: the two-step test, per-language reports, aggregation.
//!
//! The crate is `no_std`-compatible (it requires `alloc`); the default `std`
//! feature only widens dependency features. All randomness is drawn from
//! seeded ChaCha8 streams and all float math goes through `libm`, so results
//! are reproducible byte for byte across platforms and feature sets.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod composition;
pub mod datagen;
pub mod engine;
pub mod extraction;
pub mod model;
pub mod service;
pub mod stats;

pub use model::{AttributeSpec, BiasRating, DataBlock, DistributionSpec, RatingSet, ValueCounts};
