//! Report output: pretty JSON for machines, Markdown for people. Both are
//! rendered from the same [`RatingReport`] and written atomically so a
//! repeated run with the same inputs produces byte-identical files.

use std::path::{Path, PathBuf};

use biascope_core::engine::{fmt_counts, RatingReport, StepResult};

use crate::fsutil::{sanitize_component, write_atomic};
use crate::CliError;

/// JSON Schema describing the report format, shipped with the binary.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Writes `<service>.json` and `<service>.md` under `out_dir`, returning the
/// two paths.
pub fn write_report_files(
    report: &RatingReport,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| {
        CliError::runtime(format!("creating report directory {}: {e}", out_dir.display()))
    })?;
    let stem = sanitize_component(&report.service_id);
    let json_path = out_dir.join(format!("{stem}.json"));
    let md_path = out_dir.join(format!("{stem}.md"));
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::runtime(format!("serializing report: {e}")))?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", json_path.display())))?;
    write_atomic(&md_path, render_markdown(report).as_bytes())
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", md_path.display())))?;
    Ok((json_path, md_path))
}

fn fmt_p(p: f64) -> String {
    if p == 0.0 || p >= 1e-4 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

fn push_step(out: &mut String, step: &StepResult) {
    out.push_str(&format!("### {}, input {}\n\n", step.step, step.input_spec));
    out.push_str(&format!("Observed counts: {}\n\n", fmt_counts(&step.observed)));
    out.push_str("| compared to | statistic | df | p-value | similar |\n");
    out.push_str("|---|---:|---:|---:|:--|\n");
    for cmp in &step.comparisons {
        let v = &cmp.verdict;
        out.push_str(&format!(
            "| {} | {:.4} | {} | {} | {} |\n",
            cmp.spec,
            v.statistic,
            v.degrees_of_freedom,
            fmt_p(v.p_value),
            if v.similar { "yes" } else { "no" },
        ));
    }
    out.push('\n');
}

/// Renders the human-facing Markdown companion of a report.
pub fn render_markdown(report: &RatingReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Bias rating: {}\n\n", report.service_id));
    out.push_str(&format!(
        "- Overall rating: **{}** ({} over {} rated language(s))\n",
        report.overall,
        match report.aggregation_mode {
            biascope_core::engine::AggregationMode::WorstCase => "worst_case",
            biascope_core::engine::AggregationMode::Vote => "vote",
        },
        report.per_language.len(),
    ));
    out.push_str(&format!(
        "- Attribute: {} (values {}; catch-all {})\n",
        report.attribute.name,
        report.attribute.values.join(", "),
        report.attribute.catch_all,
    ));
    out.push_str(&format!(
        "- Similarity test: {} at alpha {}\n",
        report.config.similarity_test, report.config.alpha,
    ));
    out.push_str(&format!(
        "- Blocks: {} texts x {} slots per text, master seed {}, home language {}\n\n",
        report.config.block_size, report.config.slots_per_text, report.config.seed, report.config.home,
    ));

    for (lang, outcome) in &report.per_language {
        out.push_str(&format!("## Language {}: {}\n\n", lang, outcome.rating));
        for step in &outcome.steps {
            push_step(&mut out, step);
        }
    }

    if !report.failed_languages.is_empty() {
        out.push_str("## Failed languages\n\n");
        for (lang, message) in &report.failed_languages {
            out.push_str(&format!("- {lang}: {message}\n"));
        }
        out.push('\n');
    }

    out.push_str("## Decision narrative\n\n");
    out.push_str("```text\n");
    out.push_str(&report.narrative);
    if !report.narrative.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
    out
}
