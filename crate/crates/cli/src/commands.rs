//! The three subcommands: `generate` writes probe blocks to disk, `rate`
//! runs the two-step test against live or mock services, and `compose`
//! evaluates rating composition chains.

use std::path::PathBuf;

use clap::Args;

use biascope_core::composition::compose_chain;
use biascope_core::datagen::generate_block;
use biascope_core::engine::{derive_seed, plan, rate_service, AggregationMode, RatingConfig};
use biascope_core::model::{BiasRating, RatingSet};
use biascope_core::service::Lang;
use biascope_core::stats::ChiSquaredTwoSample;

use crate::config::{build_translator, load_suite, load_template};
use crate::fsutil::{sanitize_component, write_atomic};
use crate::report::write_report_files;
use crate::{engine_error, CliError};

/// Writes one deterministic probe block per distribution spec.
#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Distribution spec suite file (defaults to the built-in gender suite).
    #[arg(long)]
    pub specs: Option<PathBuf>,
    /// Sentence template file (defaults to the built-in gender template).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Texts per block.
    #[arg(long, default_value_t = 20)]
    pub block_size: u32,
    /// Master seed; each spec's block seed is derived from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory for `<label>.block.json` files.
    #[arg(long, default_value = "blocks")]
    pub out: PathBuf,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let suite = load_suite(args.specs.as_deref())?;
    let template = load_template(args.template.as_deref())?;
    std::fs::create_dir_all(&args.out).map_err(|e| {
        CliError::runtime(format!("creating {}: {e}", args.out.display()))
    })?;

    let mut texts = 0usize;
    let mut blocks = 0usize;
    for spec in suite.unbiased.iter().chain(&suite.biased) {
        let seed = derive_seed(args.seed, &spec.label);
        let block = generate_block(spec, &template, args.block_size, seed)
            .map_err(|e| CliError::config(e.to_string()))?;
        let path = args.out.join(format!("{}.block.json", sanitize_component(&spec.label)));
        let mut json = serde_json::to_string_pretty(&block)
            .map_err(|e| CliError::runtime(format!("serializing block: {e}")))?;
        json.push('\n');
        write_atomic(&path, json.as_bytes())
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
        println!("wrote {} ({} texts, seed {seed})", path.display(), block.texts.len());
        texts += block.texts.len();
        blocks += 1;
    }
    println!("generated {blocks} block(s), {texts} texts total");
    Ok(())
}

/// Rates one or more services across middle languages.
#[derive(Debug, Args)]
pub struct RateArgs {
    /// Service to rate: `mock:<behavior>` or a service definition file.
    /// Repeatable.
    #[arg(long = "service", required = true)]
    pub services: Vec<String>,
    /// Middle languages for the round trip, comma-separated or repeated.
    #[arg(long = "middle", required = true, value_delimiter = ',')]
    pub middles: Vec<String>,
    /// Distribution spec suite file (defaults to the built-in gender suite).
    #[arg(long)]
    pub specs: Option<PathBuf>,
    /// Sentence template file (defaults to the built-in gender template).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Significance level for the similarity test, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Texts per probe block.
    #[arg(long, default_value_t = 20)]
    pub block_size: u32,
    /// Master seed; block seeds derive from it per spec label.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// How per-language ratings combine: worst, worst_case, or vote.
    #[arg(long, default_value = "worst")]
    pub aggregation: String,
    /// Cache directory for service responses; omitted means no cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    /// Exit with status 3 when any overall rating is this bad or worse
    /// (BS, DSBS or UCS).
    #[arg(long)]
    pub fail_on: Option<String>,
    /// Print the experiment size and exit without contacting any service.
    #[arg(long)]
    pub dry_run: bool,
}

/// Runs the rate command. `Ok(true)` means the `--fail-on` gate tripped.
pub fn cmd_rate(args: &RateArgs) -> Result<bool, CliError> {
    let aggregation: AggregationMode =
        args.aggregation.parse().map_err(|e: biascope_core::engine::EngineError| {
            CliError::config(e.to_string())
        })?;
    let fail_on: Option<BiasRating> = match &args.fail_on {
        Some(s) => Some(s.parse().map_err(|_| {
            CliError::config(format!("--fail-on expects BS, DSBS or UCS, got {s:?}"))
        })?),
        None => None,
    };
    let suite = load_suite(args.specs.as_deref())?;
    let template = load_template(args.template.as_deref())?;
    template
        .validate_against(suite.classifier.attribute())
        .map_err(|e| CliError::config(e.to_string()))?;
    if args.middles.iter().any(|m| m.trim().is_empty()) {
        return Err(CliError::config(
            "--middle contains an empty language code".to_string(),
        ));
    }
    let middles: Vec<Lang> = args.middles.iter().map(|m| Lang::new(m.as_str())).collect();

    if args.dry_run {
        let blocks = (suite.unbiased.len() + suite.biased.len()) as u64;
        let p = plan(
            args.services.len() as u64,
            middles.len() as u64,
            blocks,
            u64::from(args.block_size),
        );
        println!(
            "plan: {} service(s) x {} language(s) x {} block(s) x {} text(s) x {} legs = {} translation calls",
            p.services,
            p.languages,
            p.blocks_per_language,
            p.block_size,
            p.legs_per_text,
            p.total_translation_calls(),
        );
        return Ok(false);
    }

    let config = RatingConfig {
        alpha: args.alpha,
        block_size: args.block_size,
        seed: args.seed,
        home: Lang::new("en"),
        aggregation,
        template,
    };

    let mut tripped = false;
    for arg in &args.services {
        let translator = build_translator(arg, args.cache.as_deref())?;
        let report =
            rate_service(translator.as_ref(), &middles, &suite, &ChiSquaredTwoSample, &config)
                .map_err(engine_error)?;
        let (json_path, _) = write_report_files(&report, &args.out)?;
        println!(
            "{}: {} ({} over {} rated language(s)) -> {}",
            report.service_id,
            report.overall,
            args.aggregation,
            report.per_language.len(),
            json_path.display(),
        );
        for (lang, message) in &report.failed_languages {
            eprintln!("warning: {}: language {lang} not rated: {message}", report.service_id);
        }
        if let Some(threshold) = fail_on {
            if report.overall <= threshold {
                tripped = true;
            }
        }
    }
    Ok(tripped)
}

/// Composes a chain of stage ratings left to right.
#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Stage ratings in pipeline order; each is a rating (`DSBS`) or a
    /// pipe-joined set (`BS|UCS`).
    #[arg(num_args = 2.., required = true)]
    pub stages: Vec<String>,
}

pub fn cmd_compose(args: &ComposeArgs) -> Result<(), CliError> {
    let stages: Vec<RatingSet> = args
        .stages
        .iter()
        .map(|s| {
            s.parse::<RatingSet>().map_err(|_| {
                CliError::config(format!(
                    "bad rating {s:?} (expected BS, DSBS, UCS or a |-joined set)"
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let composed = compose_chain(&stages).map_err(|e| CliError::config(e.to_string()))?;
    println!("{composed}");
    Ok(())
}
