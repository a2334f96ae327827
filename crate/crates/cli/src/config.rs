//! On-disk configuration formats: service definitions, distribution spec
//! suites, and sentence templates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use biascope_core::datagen::{default_occupations, TemplateConfig};
use biascope_core::extraction::{gender_lexicons, Classifier};
use biascope_core::engine::SpecSuite;
use biascope_core::model::{AttributeSpec, DistributionKind, DistributionSpec};
use biascope_core::service::{Lang, MockBehavior, MockTranslator, TranslationService};

use crate::cache::CachedTranslator;
use crate::fsutil::read_to_string;
use crate::httpsvc::{HttpAdapterConfig, HttpTranslator};
use crate::CliError;

/// A service definition file: either an HTTP adapter or a built-in mock.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceFile {
    pub id: String,
    #[serde(rename = "type")]
    pub service_type: ServiceType,
    /// Language codes the service supports; empty means unrestricted.
    #[serde(default)]
    pub languages: Vec<String>,
    pub http: Option<HttpAdapterConfig>,
    pub mock: Option<MockFileConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceType {
    Http,
    Mock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFileConfig {
    /// `identity`, `flip`, `equalize`, `collapse` or `collapse:<Value>`.
    pub behavior: String,
}

/// Parses a mock behavior name as used by config files and the
/// `mock:<behavior>` CLI shorthand.
pub fn parse_mock_behavior(s: &str) -> Result<MockBehavior, CliError> {
    match s {
        "identity" => Ok(MockBehavior::Identity),
        "flip" => Ok(MockBehavior::Flip),
        "equalize" => Ok(MockBehavior::Equalize),
        "collapse" => Ok(MockBehavior::CollapseTo(String::from("He"))),
        other => match other.strip_prefix("collapse:") {
            Some(value) if !value.is_empty() => Ok(MockBehavior::CollapseTo(value.to_string())),
            _ => Err(CliError::config(format!(
                "unknown mock behavior {other:?} (expected identity, flip, equalize, collapse or collapse:<Value>)"
            ))),
        },
    }
}

/// Builds the translator a `--service` argument names: `mock:<behavior>`
/// shorthand or a path to a service definition file. With `cache_dir` set
/// the translator is wrapped in the disk cache.
pub fn build_translator(
    arg: &str,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn TranslationService>, CliError> {
    let service: Box<dyn TranslationService> = if let Some(behavior) = arg.strip_prefix("mock:") {
        let behavior = parse_mock_behavior(behavior)?;
        Box::new(MockTranslator::new(behavior).map_err(|e| CliError::config(e.to_string()))?)
    } else {
        build_from_file(Path::new(arg))?
    };
    match cache_dir {
        Some(dir) => Ok(Box::new(CachedTranslator::new(service, dir.to_path_buf()))),
        None => Ok(service),
    }
}

fn build_from_file(path: &Path) -> Result<Box<dyn TranslationService>, CliError> {
    let text = read_to_string(path)?;
    let file: ServiceFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if file.id.trim().is_empty() {
        return Err(CliError::config(format!("{}: service id must be non-empty", path.display())));
    }
    let languages: Vec<Lang> = file.languages.iter().map(|l| Lang::new(l.as_str())).collect();
    match file.service_type {
        ServiceType::Http => {
            let http = file.http.ok_or_else(|| {
                CliError::config(format!("{}: type \"http\" needs an \"http\" section", path.display()))
            })?;
            Ok(Box::new(HttpTranslator::new(file.id, languages, http)?))
        }
        ServiceType::Mock => {
            let mock = file.mock.ok_or_else(|| {
                CliError::config(format!("{}: type \"mock\" needs a \"mock\" section", path.display()))
            })?;
            let behavior = parse_mock_behavior(&mock.behavior)?;
            let translator = MockTranslator::new(behavior)
                .map_err(|e| CliError::config(e.to_string()))?
                .with_id(file.id)
                .with_languages(languages);
            Ok(Box::new(translator))
        }
    }
}

/// A distribution spec suite file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecsFile {
    pub attribute: AttributeSpec,
    /// Marker words per non-catch-all value; defaults to the built-in
    /// pronoun lexicons when the attribute is the built-in gender one.
    #[serde(default)]
    pub lexicons: BTreeMap<String, Vec<String>>,
    pub distributions: Vec<DistributionEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionEntry {
    pub label: String,
    pub kind: DistributionKind,
    pub proportions: Vec<f64>,
}

impl SpecsFile {
    pub fn into_suite(self) -> Result<SpecSuite, CliError> {
        let lexicons = if self.lexicons.is_empty() {
            if self.attribute == AttributeSpec::gender() {
                gender_lexicons()
            } else {
                return Err(CliError::config(format!(
                    "attribute {:?} needs a \"lexicons\" section",
                    self.attribute.name
                )));
            }
        } else {
            self.lexicons
        };
        let classifier = Classifier::new(self.attribute.clone(), &lexicons)
            .map_err(|e| CliError::config(e.to_string()))?;
        let mut specs = Vec::with_capacity(self.distributions.len());
        for entry in self.distributions {
            let spec =
                DistributionSpec::new(self.attribute.clone(), entry.proportions, entry.kind, entry.label)
                    .map_err(|e| CliError::config(e.to_string()))?;
            specs.push(spec);
        }
        SpecSuite::new(classifier, specs).map_err(|e| CliError::config(e.to_string()))
    }
}

/// Loads the spec suite, falling back to the built-in gender suite.
pub fn load_suite(path: Option<&Path>) -> Result<SpecSuite, CliError> {
    match path {
        None => Ok(SpecSuite::default_gender()),
        Some(path) => {
            let text = read_to_string(path)?;
            let file: SpecsFile = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            file.into_suite()
        }
    }
}

/// A sentence template file; every field is optional and defaults to the
/// built-in gender template.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateFile {
    pub sentence_template: Option<String>,
    pub sentences_per_text: Option<u32>,
    pub value_words: Option<BTreeMap<String, String>>,
    pub occupations: Option<Vec<String>>,
    /// Newline-separated occupation list, `#` comments allowed; relative
    /// paths resolve against the template file's directory.
    pub occupations_file: Option<PathBuf>,
}

/// Loads the template, falling back to the built-in gender template.
pub fn load_template(path: Option<&Path>) -> Result<TemplateConfig, CliError> {
    let Some(path) = path else {
        return TemplateConfig::gender(default_occupations())
            .map_err(|e| CliError::config(e.to_string()));
    };
    let text = read_to_string(path)?;
    let file: TemplateFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;

    let occupations = match (file.occupations, file.occupations_file) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(format!(
                "{}: give either \"occupations\" or \"occupations_file\", not both",
                path.display()
            )))
        }
        (Some(list), None) => list,
        (None, Some(rel)) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            parse_occupations(&read_to_string(&base.join(rel))?)
        }
        (None, None) => default_occupations(),
    };

    let default_words = || {
        [("He", "He"), ("She", "She")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    };
    TemplateConfig::new(
        file.sentence_template.unwrap_or_else(|| String::from("{G} is a {O}.")),
        file.sentences_per_text.unwrap_or(2),
        file.value_words.unwrap_or_else(default_words),
        occupations,
    )
    .map_err(|e| CliError::config(e.to_string()))
}

/// Parses a newline-separated occupation list: one entry per line, blank
/// lines and `#` comments skipped.
pub fn parse_occupations(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(String::from)
        .collect()
}
