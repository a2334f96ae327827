//! Domain types shared by every stage of the harness.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Proportion vectors may drift from summing to 1 by at most this much.
pub const PROPORTION_SUM_TOLERANCE: f64 = 1e-9;

/// Outcome of rating one service for one attribute.
///
/// `Ord` follows severity: `BS < DSBS < UCS`, so the minimum of a set of
/// ratings is the worst case and the maximum is the best case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BiasRating {
    /// Biased service: unbiased input already comes back biased.
    BS,
    /// Data-sensitive service: output bias follows input bias.
    DSBS,
    /// Unbiased service: even biased input comes back balanced.
    UCS,
}

impl BiasRating {
    /// All ratings in severity order, worst first.
    pub const ALL: [BiasRating; 3] = [BiasRating::BS, BiasRating::DSBS, BiasRating::UCS];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasRating::BS => "BS",
            BiasRating::DSBS => "DSBS",
            BiasRating::UCS => "UCS",
        }
    }
}

impl fmt::Display for BiasRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasRating {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s.trim() {
            "BS" => Ok(BiasRating::BS),
            "DSBS" => Ok(BiasRating::DSBS),
            "UCS" => Ok(BiasRating::UCS),
            other => Err(ModelError::UnknownRating(other.to_string())),
        }
    }
}

/// Worst (most severe) rating in `ratings`; errors when empty.
pub fn worst_of(ratings: &[BiasRating]) -> Result<BiasRating, ModelError> {
    ratings.iter().copied().min().ok_or(ModelError::EmptyRatings)
}

/// Non-empty set of ratings, the value domain of the composition calculus.
///
/// Stored as a 3-bit mask. The textual form joins members with `|` in
/// severity order, e.g. `BS|DSBS|UCS` for the full set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RatingSet {
    bits: u8,
}

impl RatingSet {
    const fn bit(rating: BiasRating) -> u8 {
        match rating {
            BiasRating::BS => 0b001,
            BiasRating::DSBS => 0b010,
            BiasRating::UCS => 0b100,
        }
    }

    pub const fn singleton(rating: BiasRating) -> Self {
        RatingSet { bits: Self::bit(rating) }
    }

    /// The full set `{BS, DSBS, UCS}`.
    pub const fn all() -> Self {
        RatingSet { bits: 0b111 }
    }

    /// Builds a set from members; errors when the iterator is empty.
    pub fn from_ratings<I: IntoIterator<Item = BiasRating>>(iter: I) -> Result<Self, ModelError> {
        let mut bits = 0u8;
        for r in iter {
            bits |= Self::bit(r);
        }
        if bits == 0 {
            return Err(ModelError::EmptyRatingSet);
        }
        Ok(RatingSet { bits })
    }

    #[must_use]
    pub fn with(self, rating: BiasRating) -> Self {
        RatingSet { bits: self.bits | Self::bit(rating) }
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        RatingSet { bits: self.bits | other.bits }
    }

    pub fn contains(self, rating: BiasRating) -> bool {
        self.bits & Self::bit(rating) != 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.bits & !other.bits == 0
    }

    // no is_empty: construction and parsing reject empty sets
    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_singleton(self) -> bool {
        self.len() == 1
    }

    /// Members in severity order, worst first.
    pub fn iter(self) -> impl Iterator<Item = BiasRating> {
        BiasRating::ALL.into_iter().filter(move |r| self.contains(*r))
    }

    /// Worst rating contained in the set.
    pub fn worst(self) -> BiasRating {
        self.iter().next().expect("rating sets are never empty")
    }

    /// All seven non-empty subsets, for exhaustive checks.
    pub fn enumerate_all() -> impl Iterator<Item = RatingSet> {
        (1u8..8).map(|bits| RatingSet { bits })
    }
}

impl fmt::Display for RatingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for r in self.iter() {
            if !first {
                f.write_str("|")?;
            }
            f.write_str(r.as_str())?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for RatingSet {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        RatingSet::from_ratings(
            s.split('|')
                .map(|part| part.parse::<BiasRating>())
                .collect::<Result<Vec<_>, _>>()?,
        )
    }
}

impl From<BiasRating> for RatingSet {
    fn from(rating: BiasRating) -> Self {
        RatingSet::singleton(rating)
    }
}

impl Serialize for RatingSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RatingSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A sensitive attribute: a named, ordered list of values.
///
/// `catch_all` must be one of `values`; extraction assigns it to sentences
/// carrying no marker of any other value, and generation never produces it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub values: Vec<String>,
    pub catch_all: String,
}

impl AttributeSpec {
    pub fn new(
        name: impl Into<String>,
        values: Vec<String>,
        catch_all: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let spec = AttributeSpec { name: name.into(), values, catch_all: catch_all.into() };
        spec.validate()?;
        Ok(spec)
    }

    /// The binary-gender attribute used throughout the worked examples:
    /// values `He`, `She` and catch-all `Other`.
    pub fn gender() -> Self {
        AttributeSpec {
            name: String::from("Gender"),
            values: ["He", "She", "Other"].into_iter().map(String::from).collect(),
            catch_all: String::from("Other"),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.values.len() < 2 {
            return Err(ModelError::TooFewValues { got: self.values.len() });
        }
        for (i, v) in self.values.iter().enumerate() {
            if self.values[..i].contains(v) {
                return Err(ModelError::DuplicateValue(v.clone()));
            }
        }
        if !self.values.contains(&self.catch_all) {
            return Err(ModelError::CatchAllNotAValue(self.catch_all.clone()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    pub fn catch_all_index(&self) -> usize {
        self.index_of(&self.catch_all).expect("validated: catch_all is a value")
    }
}

/// Whether a distribution spec plays the biased or the unbiased role in the
/// two-step test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Unbiased,
    Biased,
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistributionKind::Unbiased => "unbiased",
            DistributionKind::Biased => "biased",
        })
    }
}

/// A target distribution over an attribute's values.
///
/// `proportions[i]` belongs to `attribute.values[i]`; entries lie in `[0, 1]`
/// and sum to 1 within [`PROPORTION_SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub attribute: AttributeSpec,
    pub proportions: Vec<f64>,
    pub kind: DistributionKind,
    pub label: String,
}

impl DistributionSpec {
    pub fn new(
        attribute: AttributeSpec,
        proportions: Vec<f64>,
        kind: DistributionKind,
        label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let spec = DistributionSpec { attribute, proportions, kind, label: label.into() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.attribute.validate()?;
        if self.proportions.len() != self.attribute.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.attribute.len(),
                got: self.proportions.len(),
            });
        }
        for &p in &self.proportions {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(ModelError::ProportionOutOfRange { label: self.label.clone(), value: p });
            }
        }
        let sum: f64 = self.proportions.iter().sum();
        if libm::fabs(sum - 1.0) > PROPORTION_SUM_TOLERANCE {
            return Err(ModelError::ProportionSum { label: self.label.clone(), sum });
        }
        Ok(())
    }

    /// Proportion assigned to the catch-all value.
    pub fn catch_all_proportion(&self) -> f64 {
        self.proportions[self.attribute.catch_all_index()]
    }
}

/// Attribute-value counts observed in (or expected of) a block of texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCounts {
    pub attribute: AttributeSpec,
    pub counts: Vec<u64>,
}

impl ValueCounts {
    pub fn new(attribute: AttributeSpec, counts: Vec<u64>) -> Result<Self, ModelError> {
        if counts.len() != attribute.len() {
            return Err(ModelError::LengthMismatch { expected: attribute.len(), got: counts.len() });
        }
        attribute.validate()?;
        Ok(ValueCounts { attribute, counts })
    }

    pub fn zeroed(attribute: AttributeSpec) -> Self {
        let counts = alloc::vec![0; attribute.len()];
        ValueCounts { attribute, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, value: &str) -> Option<u64> {
        self.attribute.index_of(value).map(|i| self.counts[i])
    }
}

/// A generated block of probe texts with its exact ground truth.
///
/// `slot_truth[t][s]` is the attribute value planted in sentence `s` of text
/// `t`; aggregating it always reproduces the spec's expected counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBlock {
    pub spec: DistributionSpec,
    pub seed: u64,
    pub texts: Vec<String>,
    pub slot_truth: Vec<Vec<String>>,
    pub block_size: u32,
    pub slots_per_text: u32,
}

impl DataBlock {
    pub fn total_slots(&self) -> u64 {
        u64::from(self.block_size) * u64::from(self.slots_per_text)
    }

    /// Ground-truth counts aggregated over every slot.
    pub fn truth_counts(&self) -> ValueCounts {
        let mut out = ValueCounts::zeroed(self.spec.attribute.clone());
        for text in &self.slot_truth {
            for value in text {
                if let Some(i) = out.attribute.index_of(value) {
                    out.counts[i] += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    EmptyRatings,
    EmptyRatingSet,
    UnknownRating(String),
    TooFewValues { got: usize },
    DuplicateValue(String),
    CatchAllNotAValue(String),
    ProportionOutOfRange { label: String, value: f64 },
    ProportionSum { label: String, sum: f64 },
    LengthMismatch { expected: usize, got: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyRatings => write!(f, "cannot aggregate an empty list of ratings"),
            ModelError::EmptyRatingSet => write!(f, "rating sets must be non-empty"),
            ModelError::UnknownRating(s) => {
                write!(f, "unknown rating {s:?} (expected BS, DSBS or UCS)")
            }
            ModelError::TooFewValues { got } => {
                write!(f, "attributes need at least 2 values, got {got}")
            }
            ModelError::DuplicateValue(v) => write!(f, "duplicate attribute value {v:?}"),
            ModelError::CatchAllNotAValue(v) => {
                write!(f, "catch-all {v:?} is not one of the attribute values")
            }
            ModelError::ProportionOutOfRange { label, value } => {
                write!(f, "spec {label:?}: proportion {value} outside [0, 1]")
            }
            ModelError::ProportionSum { label, sum } => {
                write!(f, "spec {label:?}: proportions sum to {sum}, expected 1")
            }
            ModelError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
        }
    }
}

impl core::error::Error for ModelError {}
