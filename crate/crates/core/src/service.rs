//! Service abstractions, the round-trip reduction, sequential composition,
//! and deterministic mock translators for exercising the harness offline.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::extraction::gender_lexicons;

/// BCP-47-ish language code, e.g. `en`, `hi`, `pt`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lang(String);

impl Lang {
    pub fn new(code: impl Into<String>) -> Self {
        Lang(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Lang {
    fn from(s: &str) -> Self {
        Lang::new(s)
    }
}

/// A translation service between language pairs.
///
/// Implementations must be deterministic per `begin_block` epoch for harness
/// results to be reproducible; stateful behaviors reset their state there.
pub trait TranslationService: Send + Sync {
    /// Stable identifier used in reports and cache paths.
    fn id(&self) -> &str;

    /// Language codes the service supports; an empty slice means
    /// unrestricted.
    fn supported_languages(&self) -> &[Lang] {
        &[]
    }

    fn supports_pair(&self, source: &Lang, target: &Lang) -> bool {
        let langs = self.supported_languages();
        langs.is_empty() || (langs.contains(source) && langs.contains(target))
    }

    fn translate(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, ServiceError>;

    /// Hook invoked once before each block of texts; stateful services reset
    /// per-block state here.
    fn begin_block(&self) {}
}

/// Any text-in text-out service the two-step test can rate.
pub trait ServiceUnderTest: Send + Sync {
    fn id(&self) -> &str;

    fn transform(&self, text: &str) -> Result<String, ServiceError>;

    /// See [`TranslationService::begin_block`]; wrappers must forward it.
    fn begin_block(&self) {}
}

impl<T: TranslationService + ?Sized> TranslationService for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn supported_languages(&self) -> &[Lang] {
        (**self).supported_languages()
    }
    fn translate(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, ServiceError> {
        (**self).translate(text, source, target)
    }
    fn begin_block(&self) {
        (**self).begin_block()
    }
}

impl<T: TranslationService + ?Sized> TranslationService for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn supported_languages(&self) -> &[Lang] {
        (**self).supported_languages()
    }
    fn translate(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, ServiceError> {
        (**self).translate(text, source, target)
    }
    fn begin_block(&self) {
        (**self).begin_block()
    }
}

impl<T: ServiceUnderTest + ?Sized> ServiceUnderTest for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn transform(&self, text: &str) -> Result<String, ServiceError> {
        (**self).transform(text)
    }
    fn begin_block(&self) {
        (**self).begin_block()
    }
}

impl<T: ServiceUnderTest + ?Sized> ServiceUnderTest for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn transform(&self, text: &str) -> Result<String, ServiceError> {
        (**self).transform(text)
    }
    fn begin_block(&self) {
        (**self).begin_block()
    }
}

/// Reduction of a translator to a service under test: home -> middle -> home.
///
/// Round-tripping needs no parallel corpus or reference translation, so the
/// harness stays black-box; bias introduced on either leg surfaces in the
/// home-language output.
#[derive(Debug)]
pub struct RoundTrip<T> {
    translator: T,
    middle: Lang,
    home: Lang,
    id: String,
}

/// Builds the round-trip service, checking both directions are supported.
pub fn round_trip<T: TranslationService>(
    translator: T,
    middle: Lang,
    home: Lang,
) -> Result<RoundTrip<T>, ServiceError> {
    for (source, target) in [(&home, &middle), (&middle, &home)] {
        if !translator.supports_pair(source, target) {
            return Err(ServiceError::UnsupportedPair {
                service: translator.id().to_owned(),
                source: source.clone(),
                target: target.clone(),
            });
        }
    }
    let id = format!("{}@{}", translator.id(), middle);
    Ok(RoundTrip { translator, middle, home, id })
}

impl<T: TranslationService> ServiceUnderTest for RoundTrip<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn transform(&self, text: &str) -> Result<String, ServiceError> {
        let there = self.translator.translate(text, &self.home, &self.middle)?;
        self.translator.translate(&there, &self.middle, &self.home)
    }

    fn begin_block(&self) {
        self.translator.begin_block()
    }
}

/// `second` applied to the output of `first`. Errors carry the failing
/// stage's id.
#[derive(Debug)]
pub struct Composed<A, B> {
    first: A,
    second: B,
    id: String,
}

pub fn sequential_compose<A: ServiceUnderTest, B: ServiceUnderTest>(
    first: A,
    second: B,
) -> Composed<A, B> {
    let id = format!("{}+{}", first.id(), second.id());
    Composed { first, second, id }
}

impl<A: ServiceUnderTest, B: ServiceUnderTest> ServiceUnderTest for Composed<A, B> {
    fn id(&self) -> &str {
        &self.id
    }

    fn transform(&self, text: &str) -> Result<String, ServiceError> {
        let mid = self.first.transform(text).map_err(|e| e.at_stage(self.first.id()))?;
        self.second.transform(&mid).map_err(|e| e.at_stage(self.second.id()))
    }

    fn begin_block(&self) {
        self.first.begin_block();
        self.second.begin_block();
    }
}

/// What a mock translator does to gender words on the home-language leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockBehavior {
    /// Perfect translator: returns the text unchanged.
    Identity,
    /// Collapses every gender word of the other values to this value's
    /// nominative form, the classic "everyone becomes He" failure.
    CollapseTo(String),
    /// Swaps masculine and feminine nominative pronouns.
    Flip,
    /// Rewrites gender words to alternate genders, rebalancing any input;
    /// the alternation counter resets at `begin_block`.
    Equalize,
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockBehavior::Identity => f.write_str("identity"),
            MockBehavior::CollapseTo(v) => write!(f, "collapse-{v}"),
            MockBehavior::Flip => f.write_str("flip"),
            MockBehavior::Equalize => f.write_str("equalize"),
        }
    }
}

/// Deterministic in-process translator over the built-in gender lexicons.
///
/// The configured behavior is applied exactly once per round trip: when the
/// source language is the home language (the outbound leg). Every other
/// direction passes text through unchanged, which models a translator whose
/// bias lives in how it maps gendered language into the middle language.
pub struct MockTranslator {
    behavior: MockBehavior,
    home: Lang,
    id: String,
    languages: Vec<Lang>,
    /// (lowercased word, value index) pairs over the gender lexicons.
    words: Vec<(String, usize)>,
    /// Nominative surface form per value index.
    surfaces: Vec<String>,
    counter: AtomicUsize,
}

impl MockTranslator {
    /// A mock with home language `en` over the He/She lexicons.
    pub fn new(behavior: MockBehavior) -> Result<Self, ServiceError> {
        let surfaces: Vec<String> = ["He", "She"].into_iter().map(String::from).collect();
        if let MockBehavior::CollapseTo(value) = &behavior {
            if !surfaces.contains(value) {
                return Err(ServiceError::UnknownValue { value: value.clone() });
            }
        }
        let lexicons = gender_lexicons();
        let mut words = Vec::new();
        for (i, surface) in surfaces.iter().enumerate() {
            for word in &lexicons[surface] {
                words.push((word.clone(), i));
            }
        }
        let id = format!("mock:{behavior}");
        Ok(MockTranslator {
            behavior,
            home: Lang::new("en"),
            id,
            languages: Vec::new(),
            words,
            surfaces,
            counter: AtomicUsize::new(0),
        })
    }

    /// Replaces the derived id, e.g. when a service file names the mock.
    #[must_use]
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Restricts the supported languages; empty means unrestricted.
    #[must_use]
    pub fn with_languages(mut self, languages: Vec<Lang>) -> Self {
        self.languages = languages;
        self
    }

    fn value_of(&self, word_lower: &str) -> Option<usize> {
        self.words.iter().find(|(w, _)| w == word_lower).map(|(_, i)| *i)
    }

    /// Applies the behavior word by word, preserving all non-alphabetic
    /// characters verbatim.
    fn rewrite(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while !rest.is_empty() {
            let end = rest.find(|c: char| !c.is_alphabetic()).unwrap_or(rest.len());
            if end == 0 {
                let mut chars = rest.chars();
                let c = chars.next().expect("non-empty");
                out.push(c);
                rest = chars.as_str();
                continue;
            }
            let word = &rest[..end];
            out.push_str(&self.rewrite_word(word));
            rest = &rest[end..];
        }
        out
    }

    fn rewrite_word(&self, word: &str) -> String {
        let lower = word.to_lowercase();
        match &self.behavior {
            MockBehavior::Identity => word.to_owned(),
            MockBehavior::CollapseTo(value) => {
                let target = self
                    .surfaces
                    .iter()
                    .position(|s| s == value)
                    .expect("validated in constructor");
                match self.value_of(&lower) {
                    Some(i) if i != target => self.surfaces[target].clone(),
                    _ => word.to_owned(),
                }
            }
            MockBehavior::Flip => match lower.as_str() {
                "he" => String::from("She"),
                "she" => String::from("He"),
                _ => word.to_owned(),
            },
            MockBehavior::Equalize => match self.value_of(&lower) {
                Some(_) => {
                    let n = self.counter.fetch_add(1, Ordering::Relaxed);
                    self.surfaces[n % self.surfaces.len()].clone()
                }
                None => word.to_owned(),
            },
        }
    }
}

impl TranslationService for MockTranslator {
    fn id(&self) -> &str {
        &self.id
    }

    fn supported_languages(&self) -> &[Lang] {
        &self.languages
    }

    fn translate(&self, text: &str, source: &Lang, _target: &Lang) -> Result<String, ServiceError> {
        if *source == self.home {
            Ok(self.rewrite(text))
        } else {
            Ok(text.to_owned())
        }
    }

    fn begin_block(&self) {
        self.counter.store(0, Ordering::Relaxed);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceError {
    UnsupportedPair { service: String, source: Lang, target: Lang },
    Transport { service: String, message: String },
    EmptyOutput { service: String },
    UnknownValue { value: String },
    Stage { stage: String, inner: Box<ServiceError> },
}

impl ServiceError {
    fn at_stage(self, stage: &str) -> Self {
        match self {
            // keep the innermost stage annotation
            e @ ServiceError::Stage { .. } => e,
            e => ServiceError::Stage { stage: stage.to_string(), inner: Box::new(e) },
        }
    }

    /// True when the failure is a transport-level one (network, protocol),
    /// the class that exhausts retries rather than indicating bad config.
    pub fn is_transport(&self) -> bool {
        match self {
            ServiceError::Transport { .. } => true,
            ServiceError::Stage { inner, .. } => inner.is_transport(),
            _ => false,
        }
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceError::UnsupportedPair { service, source, target } => {
                write!(f, "service {service:?} does not translate {source} -> {target}")
            }
            ServiceError::Transport { service, message } => {
                write!(f, "service {service:?}: {message}")
            }
            ServiceError::EmptyOutput { service } => {
                write!(f, "service {service:?} returned an empty translation")
            }
            ServiceError::UnknownValue { value } => {
                write!(f, "unknown attribute value {value:?}")
            }
            ServiceError::Stage { stage, inner } => write!(f, "stage {stage:?}: {inner}"),
        }
    }
}

impl core::error::Error for ServiceError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            ServiceError::Stage { inner, .. } => Some(inner),
            _ => None,
        }
    }
}
