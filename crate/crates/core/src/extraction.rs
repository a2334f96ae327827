//! Classifying service output back into attribute-value counts.
//!
//! Extraction is deliberately crude: a sentence is assigned the first
//! attribute value whose lexicon contains any of the sentence's words, and
//! the catch-all otherwise. Crudeness is fine because the harness compares
//! distributions, not individual classifications, and the same extractor
//! runs on both sides of every comparison.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{AttributeSpec, ModelError, ValueCounts};

/// Ends of sentences recognized when splitting service output.
const SENTENCE_BREAKS: [char; 3] = ['.', '!', '?'];

/// Lexicon-driven sentence classifier for one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classifier {
    attribute: AttributeSpec,
    /// Lowercased marker words per non-catch-all value, in attribute order.
    lexicons: Vec<(usize, Vec<String>)>,
}

impl Classifier {
    /// Builds a classifier from per-value lexicons. Every key must be a
    /// non-catch-all value of the attribute; words are matched
    /// case-insensitively. Values without a lexicon can never be assigned.
    pub fn new(
        attribute: AttributeSpec,
        lexicons: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self, ExtractionError> {
        attribute.validate().map_err(ExtractionError::Model)?;
        for key in lexicons.keys() {
            match attribute.index_of(key) {
                None => return Err(ExtractionError::UnknownLexiconValue { value: key.clone() }),
                Some(i) if i == attribute.catch_all_index() => {
                    return Err(ExtractionError::CatchAllLexicon { value: key.clone() })
                }
                Some(_) => {}
            }
        }
        // attribute order decides scan priority, not map order
        let mut ordered = Vec::new();
        for (i, value) in attribute.values.iter().enumerate() {
            if let Some(words) = lexicons.get(value) {
                let lowered = words.iter().map(|w| w.to_lowercase()).collect();
                ordered.push((i, lowered));
            }
        }
        Ok(Classifier { attribute, lexicons: ordered })
    }

    /// The gender classifier used by the worked examples:
    /// `He` on `he/him/his`, `She` on `she/her/hers`, catch-all `Other`.
    pub fn gender() -> Self {
        Classifier::new(AttributeSpec::gender(), &gender_lexicons())
            .expect("the built-in gender lexicons are valid")
    }

    pub fn attribute(&self) -> &AttributeSpec {
        &self.attribute
    }

    /// Assigns a sentence the first value (in attribute order) whose lexicon
    /// contains any word of the sentence, scanning words left to right.
    /// Returns the catch-all when nothing matches.
    pub fn classify_sentence(&self, sentence: &str) -> &str {
        for word in words(sentence) {
            let lowered = word.to_lowercase();
            for (i, lexicon) in &self.lexicons {
                if lexicon.contains(&lowered) {
                    return &self.attribute.values[*i];
                }
            }
        }
        &self.attribute.catch_all
    }

    /// Counts attribute values over the first `slots_per_text` sentences of
    /// every output. Outputs with fewer sentences are padded with catch-all
    /// slots, so the total is always `outputs.len() * slots_per_text`.
    pub fn count_block(
        &self,
        outputs: &[String],
        slots_per_text: u32,
    ) -> Result<ValueCounts, ExtractionError> {
        if outputs.is_empty() {
            return Err(ExtractionError::EmptyOutputs);
        }
        if slots_per_text == 0 {
            return Err(ExtractionError::ZeroSlots);
        }
        let spt = slots_per_text as usize;
        let mut counts = ValueCounts::zeroed(self.attribute.clone());
        let catch_all = self.attribute.catch_all_index();
        for output in outputs {
            let mut seen = 0usize;
            for sentence in sentences(output).take(spt) {
                let value = self.classify_sentence(sentence);
                let i = self.attribute.index_of(value).expect("classifier returns known values");
                counts.counts[i] += 1;
                seen += 1;
            }
            counts.counts[catch_all] += (spt - seen) as u64;
        }
        debug_assert_eq!(counts.total(), (outputs.len() * spt) as u64);
        Ok(counts)
    }
}

/// Splits text into sentences on `.`, `!` and `?`, dropping empty and
/// whitespace-only segments.
pub fn sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split(SENTENCE_BREAKS).map(str::trim).filter(|s| !s.is_empty())
}

/// Splits a sentence into words: maximal runs of alphabetic characters.
pub fn words(sentence: &str) -> impl Iterator<Item = &str> {
    sentence.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty())
}

/// The default pronoun lexicons for [`AttributeSpec::gender`].
pub fn gender_lexicons() -> BTreeMap<String, Vec<String>> {
    let mut map = BTreeMap::new();
    map.insert(
        String::from("He"),
        ["he", "him", "his"].into_iter().map(String::from).collect(),
    );
    map.insert(
        String::from("She"),
        ["she", "her", "hers"].into_iter().map(String::from).collect(),
    );
    map
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractionError {
    EmptyOutputs,
    ZeroSlots,
    UnknownLexiconValue { value: String },
    CatchAllLexicon { value: String },
    Model(ModelError),
}

impl fmt::Display for ExtractionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractionError::EmptyOutputs => write!(f, "cannot count an empty list of outputs"),
            ExtractionError::ZeroSlots => write!(f, "slots_per_text must be >= 1"),
            ExtractionError::UnknownLexiconValue { value } => {
                write!(f, "lexicon key {value:?} is not an attribute value")
            }
            ExtractionError::CatchAllLexicon { value } => {
                write!(f, "catch-all value {value:?} must not have a lexicon")
            }
            ExtractionError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ExtractionError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            ExtractionError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ModelError> for ExtractionError {
    fn from(e: ModelError) -> Self {
        ExtractionError::Model(e)
    }
}
