//! The two-step rating procedure and per-service reports.
//!
//! Step T1 probes with unbiased input: if the output distribution is
//! similar to any biased spec, the service injects bias on its own and is
//! rated `BS`. Otherwise step T2 probes with each biased input: if every
//! biased probe comes back similar to some unbiased spec the service
//! actively rebalances (`UCS`); if any biased probe stays biased the
//! service is data-sensitive (`DSBS`).
//!
//! A translator is rated per middle language through the round-trip
//! reduction and the per-language ratings are aggregated, worst case by
//! default.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{expected_counts, generate_block, DatagenError, TemplateConfig};
use crate::extraction::{Classifier, ExtractionError};
use crate::model::{
    worst_of, AttributeSpec, BiasRating, DistributionKind, DistributionSpec, ModelError,
    ValueCounts,
};
use crate::service::{round_trip, Lang, ServiceError, ServiceUnderTest, TranslationService};
use crate::stats::{SimilarityTest, SimilarityVerdict, StatsError};

/// Which half of the two-step test a result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    T1,
    T2,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step::T1 => "T1",
            Step::T2 => "T2",
        })
    }
}

/// One similarity comparison against a reference spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Label of the spec the observation was compared against.
    pub spec: String,
    pub verdict: SimilarityVerdict,
}

/// Everything observed while probing with one input spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: Step,
    /// Label of the spec the probe block was generated from.
    pub input_spec: String,
    pub observed: ValueCounts,
    pub comparisons: Vec<Comparison>,
    /// Whether any comparison came back similar.
    pub matched_any: bool,
}

/// How per-language ratings combine into the service's overall rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// The worst per-language rating; a service is only as good as its
    /// weakest language.
    WorstCase,
    /// The most common per-language rating, ties going to the worse one.
    Vote,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::WorstCase => "worst_case",
            AggregationMode::Vote => "vote",
        })
    }
}

impl FromStr for AggregationMode {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, EngineError> {
        match s {
            "worst" | "worst_case" => Ok(AggregationMode::WorstCase),
            "vote" => Ok(AggregationMode::Vote),
            other => Err(EngineError::UnknownAggregation(other.to_string())),
        }
    }
}

/// Tunables of one rating run.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingConfig {
    pub alpha: f64,
    pub block_size: u32,
    pub seed: u64,
    pub home: Lang,
    pub aggregation: AggregationMode,
    pub template: TemplateConfig,
}

impl RatingConfig {
    /// Defaults used by the worked examples: alpha 0.05, 20 texts per block,
    /// seed 42, home language `en`, worst-case aggregation, gender template.
    pub fn default_gender(occupations: Vec<String>) -> Result<Self, EngineError> {
        Ok(RatingConfig {
            alpha: 0.05,
            block_size: 20,
            seed: 42,
            home: Lang::new("en"),
            aggregation: AggregationMode::WorstCase,
            template: TemplateConfig::gender(occupations)?,
        })
    }
}

/// The distribution specs of one experiment, split by role, plus the
/// classifier that reduces output text to counts over the same attribute.
#[derive(Debug, Clone)]
pub struct SpecSuite {
    pub classifier: Classifier,
    pub unbiased: Vec<DistributionSpec>,
    pub biased: Vec<DistributionSpec>,
}

impl SpecSuite {
    pub fn new(classifier: Classifier, specs: Vec<DistributionSpec>) -> Result<Self, EngineError> {
        let mut unbiased = Vec::new();
        let mut biased = Vec::new();
        for spec in specs {
            match spec.kind {
                DistributionKind::Unbiased => unbiased.push(spec),
                DistributionKind::Biased => biased.push(spec),
            }
        }
        let suite = SpecSuite { classifier, unbiased, biased };
        suite.validate()?;
        Ok(suite)
    }

    /// The default gender suite: one balanced unbiased spec and the two
    /// mirrored 10/90 biased specs.
    pub fn default_gender() -> Self {
        let attr = AttributeSpec::gender();
        let spec = |p: [f64; 3], kind, label: &str| {
            DistributionSpec::new(attr.clone(), p.to_vec(), kind, label)
                .expect("built-in specs are valid")
        };
        SpecSuite {
            classifier: Classifier::gender(),
            unbiased: alloc::vec![spec(
                [0.5, 0.5, 0.0],
                DistributionKind::Unbiased,
                "unbiased-50-50"
            )],
            biased: alloc::vec![
                spec([0.1, 0.9, 0.0], DistributionKind::Biased, "biased-10-90"),
                spec([0.9, 0.1, 0.0], DistributionKind::Biased, "biased-90-10"),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.unbiased.is_empty() {
            return Err(EngineError::NoUnbiasedSpecs);
        }
        if self.biased.is_empty() {
            return Err(EngineError::NoBiasedSpecs);
        }
        let attr = self.classifier.attribute();
        for spec in self.unbiased.iter().chain(&self.biased) {
            spec.validate()?;
            if spec.attribute != *attr {
                return Err(EngineError::AttributeMismatch { spec: spec.label.clone() });
            }
        }
        Ok(())
    }

    fn all_specs(&self) -> impl Iterator<Item = &DistributionSpec> {
        self.unbiased.iter().chain(&self.biased)
    }
}

/// Derives the block seed for one input spec from the master seed.
///
/// FNV-1a over the label mixed into the master through a splitmix64
/// finalizer: stable across runs and platforms, and independent of the
/// middle language, so every language is probed with identical input blocks.
pub fn derive_seed(master: u64, spec_label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in spec_label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs the two-step test against one service under test.
///
/// Returns the rating and the full audit trail. Step T2 is skipped when T1
/// already rates the service `BS`.
pub fn rate_one<S: ServiceUnderTest + ?Sized>(
    service: &S,
    suite: &SpecSuite,
    test: &dyn SimilarityTest,
    config: &RatingConfig,
) -> Result<(BiasRating, Vec<StepResult>), EngineError> {
    suite.validate()?;
    let mut steps = Vec::new();

    let mut t1_matched = false;
    for spec in &suite.unbiased {
        let result = run_step(service, suite, test, config, Step::T1, spec, &suite.biased)?;
        t1_matched |= result.matched_any;
        steps.push(result);
    }
    if t1_matched {
        return Ok((BiasRating::BS, steps));
    }

    let mut all_matched = true;
    for spec in &suite.biased {
        let result = run_step(service, suite, test, config, Step::T2, spec, &suite.unbiased)?;
        all_matched &= result.matched_any;
        steps.push(result);
    }
    let rating = if all_matched { BiasRating::UCS } else { BiasRating::DSBS };
    Ok((rating, steps))
}

/// Probes with one input spec and compares the observed output counts
/// against every reference spec.
fn run_step<S: ServiceUnderTest + ?Sized>(
    service: &S,
    suite: &SpecSuite,
    test: &dyn SimilarityTest,
    config: &RatingConfig,
    step: Step,
    input_spec: &DistributionSpec,
    references: &[DistributionSpec],
) -> Result<StepResult, EngineError> {
    let seed = derive_seed(config.seed, &input_spec.label);
    let block = generate_block(input_spec, &config.template, config.block_size, seed)?;

    service.begin_block();
    let mut outputs = Vec::with_capacity(block.texts.len());
    for text in &block.texts {
        outputs.push(service.transform(text).map_err(EngineError::Service)?);
    }
    let observed = suite.classifier.count_block(&outputs, block.slots_per_text)?;

    let mut comparisons = Vec::with_capacity(references.len());
    let mut matched_any = false;
    for reference in references {
        let expected = expected_counts(reference, block.total_slots())?;
        let verdict = test.compare(&observed, &expected, config.alpha)?;
        matched_any |= verdict.similar;
        comparisons.push(Comparison { spec: reference.label.clone(), verdict });
    }

    Ok(StepResult { step, input_spec: input_spec.label.clone(), observed, comparisons, matched_any })
}

/// Aggregates per-language ratings into one.
pub fn aggregate(ratings: &[BiasRating], mode: AggregationMode) -> Result<BiasRating, EngineError> {
    match mode {
        AggregationMode::WorstCase => Ok(worst_of(ratings)?),
        AggregationMode::Vote => {
            if ratings.is_empty() {
                return Err(EngineError::Model(ModelError::EmptyRatings));
            }
            let mut best = None;
            // severity order makes ties land on the worse rating
            for candidate in BiasRating::ALL {
                let count = ratings.iter().filter(|r| **r == candidate).count();
                match best {
                    Some((_, max)) if count <= max => {}
                    _ => best = Some((candidate, count)),
                }
            }
            Ok(best.expect("non-empty").0)
        }
    }
}

/// Rating and audit trail for one middle language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageOutcome {
    pub rating: BiasRating,
    pub steps: Vec<StepResult>,
}

/// Everything a rating run wants to remember about its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub alpha: f64,
    pub block_size: u32,
    pub slots_per_text: u32,
    pub seed: u64,
    pub home: Lang,
    pub similarity_test: String,
    pub aggregation: AggregationMode,
    pub unbiased_specs: Vec<String>,
    pub biased_specs: Vec<String>,
    /// Seed actually used for each spec's block, derived from `seed`.
    pub block_seeds: BTreeMap<String, u64>,
}

/// Full outcome of rating one service across middle languages.
///
/// Reports deliberately carry no timestamps or host details: the same run
/// must serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub schema_version: u32,
    pub service_id: String,
    pub attribute: AttributeSpec,
    pub per_language: BTreeMap<Lang, LanguageOutcome>,
    /// Languages whose probes failed, with the failure message.
    pub failed_languages: BTreeMap<Lang, String>,
    pub aggregation_mode: AggregationMode,
    pub overall: BiasRating,
    pub config: ReportConfig,
    /// Human-readable decision path, line per event.
    pub narrative: String,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Rates a translator across middle languages via the round-trip reduction.
///
/// Per-language probe failures (transport errors, empty translations) are
/// recorded in the report and do not abort the run; the overall rating
/// aggregates the languages that completed. Every middle language failing
/// is an error, as is a middle language the translator does not support.
pub fn rate_service<T: TranslationService + ?Sized>(
    translator: &T,
    middles: &[Lang],
    suite: &SpecSuite,
    test: &dyn SimilarityTest,
    config: &RatingConfig,
) -> Result<RatingReport, EngineError> {
    suite.validate()?;
    if middles.is_empty() {
        return Err(EngineError::NoLanguages);
    }

    let mut per_language = BTreeMap::new();
    let mut failed_languages = BTreeMap::new();
    for middle in middles {
        let sut = round_trip(&translator, middle.clone(), config.home.clone())
            .map_err(EngineError::Unsupported)?;
        match rate_one(&sut, suite, test, config) {
            Ok((rating, steps)) => {
                per_language.insert(middle.clone(), LanguageOutcome { rating, steps });
            }
            Err(EngineError::Service(e)) => {
                failed_languages.insert(middle.clone(), e.to_string());
            }
            Err(other) => return Err(other),
        }
    }
    if per_language.is_empty() {
        return Err(EngineError::AllLanguagesFailed);
    }

    let ratings: Vec<BiasRating> = per_language.values().map(|o| o.rating).collect();
    let overall = aggregate(&ratings, config.aggregation)?;

    let block_seeds = suite
        .all_specs()
        .map(|s| (s.label.clone(), derive_seed(config.seed, &s.label)))
        .collect();
    let report_config = ReportConfig {
        alpha: config.alpha,
        block_size: config.block_size,
        slots_per_text: config.template.sentences_per_text,
        seed: config.seed,
        home: config.home.clone(),
        similarity_test: test.name().to_string(),
        aggregation: config.aggregation,
        unbiased_specs: suite.unbiased.iter().map(|s| s.label.clone()).collect(),
        biased_specs: suite.biased.iter().map(|s| s.label.clone()).collect(),
        block_seeds,
    };

    let narrative =
        narrative(translator.id(), &per_language, &failed_languages, overall, config.aggregation);

    Ok(RatingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        service_id: translator.id().to_string(),
        attribute: suite.classifier.attribute().clone(),
        per_language,
        failed_languages,
        aggregation_mode: config.aggregation,
        overall,
        config: report_config,
        narrative,
    })
}

/// Renders counts as `He=20 She=20 Other=0`, in attribute value order.
pub fn fmt_counts(counts: &ValueCounts) -> String {
    let mut parts = Vec::with_capacity(counts.counts.len());
    for (value, count) in counts.attribute.values.iter().zip(&counts.counts) {
        parts.push(format!("{value}={count}"));
    }
    parts.join(" ")
}

/// Builds the line-per-event decision narrative embedded in reports.
fn narrative(
    service_id: &str,
    per_language: &BTreeMap<Lang, LanguageOutcome>,
    failed: &BTreeMap<Lang, String>,
    overall: BiasRating,
    mode: AggregationMode,
) -> String {
    let mut lines = Vec::new();
    for (lang, outcome) in per_language {
        for step in &outcome.steps {
            let matched: Vec<&str> = step
                .comparisons
                .iter()
                .filter(|c| c.verdict.similar)
                .map(|c| c.spec.as_str())
                .collect();
            let role = match step.step {
                Step::T1 => "biased",
                Step::T2 => "unbiased",
            };
            let verdict_text = if matched.is_empty() {
                format!("similar to no {role} spec")
            } else {
                format!("similar to {role} spec(s) {}", matched.join(", "))
            };
            lines.push(format!(
                "[{lang}] {} input {}: observed {}; {verdict_text}.",
                step.step,
                step.input_spec,
                fmt_counts(&step.observed),
            ));
        }
        let explanation = match outcome.rating {
            BiasRating::BS => "unbiased input came back biased",
            BiasRating::DSBS => "output bias tracked input bias",
            BiasRating::UCS => "every biased input came back unbiased",
        };
        lines.push(format!("[{lang}] rated {}: {explanation}.", outcome.rating));
    }
    for (lang, message) in failed {
        lines.push(format!("[{lang}] not rated: {message}."));
    }
    lines.push(format!(
        "{service_id}: overall {overall} ({mode} over {} rated language(s)).",
        per_language.len(),
    ));
    lines.join("\n")
}

/// Cost bookkeeping for an experiment before running it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub services: u64,
    pub languages: u64,
    /// Input blocks probed per service and language (one per spec).
    pub blocks_per_language: u64,
    pub block_size: u64,
    /// Translation calls per text; 2 for a round trip.
    pub legs_per_text: u64,
}

impl ExperimentPlan {
    pub fn texts_per_language(&self) -> u64 {
        self.blocks_per_language * self.block_size
    }

    pub fn total_texts(&self) -> u64 {
        self.services * self.languages * self.texts_per_language()
    }

    pub fn total_translation_calls(&self) -> u64 {
        self.total_texts() * self.legs_per_text
    }
}

/// Plans a round-trip experiment: `blocks_per_language` is normally the
/// number of distribution specs.
pub fn plan(services: u64, languages: u64, blocks_per_language: u64, block_size: u64) -> ExperimentPlan {
    ExperimentPlan { services, languages, blocks_per_language, block_size, legs_per_text: 2 }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    NoUnbiasedSpecs,
    NoBiasedSpecs,
    NoLanguages,
    AttributeMismatch { spec: String },
    UnknownAggregation(String),
    Unsupported(ServiceError),
    Service(ServiceError),
    AllLanguagesFailed,
    Datagen(DatagenError),
    Extraction(ExtractionError),
    Stats(StatsError),
    Model(ModelError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::NoUnbiasedSpecs => write!(f, "the spec suite has no unbiased spec"),
            EngineError::NoBiasedSpecs => write!(f, "the spec suite has no biased spec"),
            EngineError::NoLanguages => write!(f, "no middle languages given"),
            EngineError::AttributeMismatch { spec } => {
                write!(f, "spec {spec:?} targets a different attribute than the classifier")
            }
            EngineError::UnknownAggregation(s) => {
                write!(f, "unknown aggregation {s:?} (expected worst or vote)")
            }
            EngineError::Unsupported(e) => write!(f, "{e}"),
            EngineError::Service(e) => write!(f, "{e}"),
            EngineError::AllLanguagesFailed => write!(f, "every middle language failed"),
            EngineError::Datagen(e) => write!(f, "{e}"),
            EngineError::Extraction(e) => write!(f, "{e}"),
            EngineError::Stats(e) => write!(f, "{e}"),
            EngineError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EngineError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            EngineError::Unsupported(e) | EngineError::Service(e) => Some(e),
            EngineError::Datagen(e) => Some(e),
            EngineError::Extraction(e) => Some(e),
            EngineError::Stats(e) => Some(e),
            EngineError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<DatagenError> for EngineError {
    fn from(e: DatagenError) -> Self {
        EngineError::Datagen(e)
    }
}

impl From<ExtractionError> for EngineError {
    fn from(e: ExtractionError) -> Self {
        EngineError::Extraction(e)
    }
}

impl From<StatsError> for EngineError {
    fn from(e: StatsError) -> Self {
        EngineError::Stats(e)
    }
}

impl From<ModelError> for EngineError {
    fn from(e: ModelError) -> Self {
        EngineError::Model(e)
    }
}
