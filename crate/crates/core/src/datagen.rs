//! Seeded generation of probe text blocks with exact attribute counts.
//!
//! Blocks are the harness's controlled input: every sentence plants exactly
//! one attribute value, counts match the spec's expected counts exactly
//! (largest-remainder rounding, not sampling), and only the arrangement is
//! randomized. The same `(spec, template, block_size, seed)` always yields
//! byte-identical texts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::model::{AttributeSpec, DataBlock, DistributionSpec, ModelError, ValueCounts};

/// Sentence template and word material for rendering planted values.
///
/// `sentence_template` must contain the placeholders `{G}` (the surface word
/// for the planted attribute value) and `{O}` (an occupation). Occupations
/// are sampled without replacement within a text and with replacement across
/// texts, so `occupations` needs at least `sentences_per_text` entries.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TemplateConfig {
    pub sentence_template: String,
    pub sentences_per_text: u32,
    /// Surface word planted for each non-catch-all attribute value.
    pub value_words: BTreeMap<String, String>,
    pub occupations: Vec<String>,
}

impl TemplateConfig {
    pub fn new(
        sentence_template: impl Into<String>,
        sentences_per_text: u32,
        value_words: BTreeMap<String, String>,
        occupations: Vec<String>,
    ) -> Result<Self, DatagenError> {
        let cfg = TemplateConfig {
            sentence_template: sentence_template.into(),
            sentences_per_text,
            value_words,
            occupations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default gender template: two sentences per text, each
    /// `"{G} is a {O}."` with `He`/`She` as surface words.
    pub fn gender(occupations: Vec<String>) -> Result<Self, DatagenError> {
        let value_words = [("He", "He"), ("She", "She")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        TemplateConfig::new("{G} is a {O}.", 2, value_words, occupations)
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.sentences_per_text == 0 {
            return Err(DatagenError::ZeroSentencesPerText);
        }
        for ph in ["{G}", "{O}"] {
            if !self.sentence_template.contains(ph) {
                return Err(DatagenError::MissingPlaceholder { placeholder: ph });
            }
        }
        if self.occupations.len() < self.sentences_per_text as usize {
            return Err(DatagenError::TooFewOccupations {
                have: self.occupations.len(),
                need: self.sentences_per_text as usize,
            });
        }
        Ok(())
    }

    /// Checks that every non-catch-all value of `attribute` has a surface word.
    pub fn validate_against(&self, attribute: &AttributeSpec) -> Result<(), DatagenError> {
        self.validate()?;
        for value in &attribute.values {
            if *value != attribute.catch_all && !self.value_words.contains_key(value) {
                return Err(DatagenError::MissingValueWord { value: value.clone() });
            }
        }
        Ok(())
    }
}

/// The built-in occupation list for the gender template: everyday job
/// titles without strongly gender-marked English forms.
pub fn default_occupations() -> Vec<String> {
    [
        "Florist", "Gardener", "Nurse", "Optician", "Teacher", "Engineer", "Doctor", "Lawyer",
        "Baker", "Carpenter", "Plumber", "Painter", "Singer", "Dancer", "Writer", "Farmer",
        "Pilot", "Tailor", "Clerk", "Banker", "Barber", "Chef", "Coach", "Judge", "Librarian",
        "Mechanic", "Scientist", "Sculptor", "Architect", "Astronomer", "Athlete", "Chemist",
        "Dentist", "Designer", "Electrician", "Geologist", "Journalist", "Musician",
        "Photographer", "Translator",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// Integer counts a spec expects over `total_slots` slots, by largest
/// remainder: every value first gets `floor(p * n)`, then the leftover units
/// go to the largest fractional parts (ties to the earlier value).
///
/// The result always sums to `total_slots` exactly.
pub fn expected_counts(
    spec: &DistributionSpec,
    total_slots: u64,
) -> Result<ValueCounts, DatagenError> {
    spec.validate().map_err(DatagenError::Model)?;
    if total_slots == 0 {
        return Err(DatagenError::ZeroSlots);
    }
    let n = total_slots as f64;
    let mut counts = Vec::with_capacity(spec.proportions.len());
    let mut fractions = Vec::with_capacity(spec.proportions.len());
    for (i, &p) in spec.proportions.iter().enumerate() {
        let raw = p * n;
        let floor = libm::floor(raw);
        counts.push(floor as u64);
        fractions.push((i, raw - floor));
    }
    let assigned: u64 = counts.iter().sum();
    debug_assert!(assigned <= total_slots);
    let remaining = total_slots - assigned;
    // larger fractional part first, earlier index breaking ties
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in fractions.iter().take(remaining as usize) {
        counts[i] += 1;
    }
    ValueCounts::new(spec.attribute.clone(), counts).map_err(DatagenError::Model)
}

/// Generates `block_size` texts realizing `spec`'s expected counts exactly.
///
/// The planted value multiset is shuffled across all slots with a ChaCha8
/// stream seeded by `seed`, then occupations are drawn per text (distinct
/// within a text) from the same stream. The spec must assign proportion 0 to
/// the catch-all value: generation only plants detectable values.
pub fn generate_block(
    spec: &DistributionSpec,
    template: &TemplateConfig,
    block_size: u32,
    seed: u64,
) -> Result<DataBlock, DatagenError> {
    template.validate_against(&spec.attribute)?;
    if block_size == 0 {
        return Err(DatagenError::ZeroBlockSize);
    }
    if spec.catch_all_proportion() != 0.0 {
        return Err(DatagenError::CatchAllNotZero {
            label: spec.label.clone(),
            proportion: spec.catch_all_proportion(),
        });
    }

    let slots_per_text = template.sentences_per_text;
    let total_slots = u64::from(block_size) * u64::from(slots_per_text);
    let counts = expected_counts(spec, total_slots)?;
    debug_assert_eq!(counts.counts[spec.attribute.catch_all_index()], 0);

    let mut slots: Vec<usize> = Vec::with_capacity(total_slots as usize);
    for (i, &c) in counts.counts.iter().enumerate() {
        slots.extend(core::iter::repeat(i).take(c as usize));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);

    let spt = slots_per_text as usize;
    let mut texts = Vec::with_capacity(block_size as usize);
    let mut slot_truth = Vec::with_capacity(block_size as usize);
    for t in 0..block_size as usize {
        let text_slots = &slots[t * spt..(t + 1) * spt];
        // partial Fisher-Yates: first spt entries are a uniform sample
        // of distinct occupation indices
        let mut pool: Vec<usize> = (0..template.occupations.len()).collect();
        for j in 0..spt {
            let k = rng.gen_range(j..pool.len());
            pool.swap(j, k);
        }
        let mut sentences = Vec::with_capacity(spt);
        let mut truth = Vec::with_capacity(spt);
        for (s, &value_index) in text_slots.iter().enumerate() {
            let value = &spec.attribute.values[value_index];
            let word = &template.value_words[value];
            let occupation = &template.occupations[pool[s]];
            sentences
                .push(template.sentence_template.replace("{G}", word).replace("{O}", occupation));
            truth.push(value.clone());
        }
        texts.push(sentences.join(" "));
        slot_truth.push(truth);
    }

    Ok(DataBlock {
        spec: spec.clone(),
        seed,
        texts,
        slot_truth,
        block_size,
        slots_per_text,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatagenError {
    ZeroSentencesPerText,
    ZeroBlockSize,
    ZeroSlots,
    MissingPlaceholder { placeholder: &'static str },
    TooFewOccupations { have: usize, need: usize },
    MissingValueWord { value: String },
    CatchAllNotZero { label: String, proportion: f64 },
    Model(ModelError),
}

impl fmt::Display for DatagenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatagenError::ZeroSentencesPerText => write!(f, "sentences_per_text must be >= 1"),
            DatagenError::ZeroBlockSize => write!(f, "block_size must be >= 1"),
            DatagenError::ZeroSlots => write!(f, "expected counts need at least one slot"),
            DatagenError::MissingPlaceholder { placeholder } => {
                write!(f, "sentence template lacks the {placeholder} placeholder")
            }
            DatagenError::TooFewOccupations { have, need } => write!(
                f,
                "need at least {need} occupations for distinct draws within a text, have {have}"
            ),
            DatagenError::MissingValueWord { value } => {
                write!(f, "no surface word configured for attribute value {value:?}")
            }
            DatagenError::CatchAllNotZero { label, proportion } => write!(
                f,
                "spec {label:?} assigns {proportion} to the catch-all value; generation requires 0"
            ),
            DatagenError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DatagenError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            DatagenError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ModelError> for DatagenError {
    fn from(e: ModelError) -> Self {
        DatagenError::Model(e)
    }
}
