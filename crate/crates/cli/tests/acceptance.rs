//! Acceptance gate: one check per shipping criterion, each printed as a
//! PASS/FAIL line. The process exits nonzero when any criterion fails.
//!
//! Two criteria are expected to fail today and are documented in the README:
//! stage-set composition is not associative, and the composition table
//! disagrees with measured pipelines for rebalancing-first stacks. Both
//! failures are properties of the rating calculus itself; the checks state
//! them honestly rather than hiding them.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use biascope_core::composition::{compose_rating, compose_set};
use biascope_core::datagen::{default_occupations, expected_counts, generate_block, TemplateConfig};
use biascope_core::engine::{
    derive_seed, plan, rate_one, rate_service, RatingConfig, SpecSuite,
};
use biascope_core::extraction::Classifier;
use biascope_core::model::{
    AttributeSpec, BiasRating, DistributionKind, DistributionSpec, RatingSet, ValueCounts,
};
use biascope_core::service::{
    round_trip, sequential_compose, Lang, MockBehavior, MockTranslator,
};
use biascope_core::stats::{chi_square_statistic, p_value, ChiSquaredTwoSample, SimilarityTest};

type Criterion = fn() -> Result<(), String>;

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("composition-table-fidelity", composition_table_fidelity),
        ("composition-algebra", composition_algebra),
        ("similarity-statistics", similarity_statistics),
        ("mock-rating-matrix", mock_rating_matrix),
        ("composition-consistency", composition_consistency),
        ("datagen-exactness", datagen_exactness),
        ("experiment-arithmetic", experiment_arithmetic),
        ("cache-reproducibility", cache_reproducibility),
    ];

    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(Ok(())) => println!("criterion {name}: PASS ({ms} ms)"),
            Ok(Err(message)) => {
                failures += 1;
                println!("criterion {name}: FAIL ({ms} ms)");
                for line in message.lines() {
                    println!("    {line}");
                }
            }
            Err(panic) => {
                failures += 1;
                let message = panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| panic.downcast_ref::<&str>().copied())
                    .unwrap_or("panicked");
                println!("criterion {name}: FAIL ({ms} ms)");
                println!("    panicked: {message}");
            }
        }
    }

    if failures > 0 {
        println!("{failures} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// --- criterion 1: the composition table, cell by cell ---------------------

fn composition_table_fidelity() -> Result<(), String> {
    use BiasRating::{BS, DSBS, UCS};
    let started = Instant::now();
    let table = [
        ((BS, BS), RatingSet::all()),
        ((BS, DSBS), RatingSet::singleton(BS)),
        ((BS, UCS), RatingSet::singleton(UCS)),
        ((DSBS, BS), RatingSet::singleton(BS)),
        ((DSBS, DSBS), RatingSet::singleton(DSBS)),
        ((DSBS, UCS), RatingSet::singleton(UCS)),
        ((UCS, BS), RatingSet::singleton(BS)),
        ((UCS, DSBS), RatingSet::singleton(DSBS)),
        ((UCS, UCS), RatingSet::singleton(UCS)),
    ];
    for ((first, second), want) in table {
        let got = compose_rating(first, second);
        if got != want {
            return Err(format!("compose({first}, {second}) = {got}, want {want}"));
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(1) {
        return Err(format!("table check took {elapsed:?}, budget is 1 s"));
    }
    Ok(())
}

// --- criterion 2: algebraic laws of set composition ------------------------

/// Absorption and the DSBS left identity hold; associativity does not.
/// The associativity sweep runs over every one of the 7^3 = 343 triples of
/// nonempty rating sets and reports how many violate the law.
fn composition_algebra() -> Result<(), String> {
    let sets: Vec<RatingSet> = RatingSet::enumerate_all().collect();
    if sets.len() != 7 {
        return Err(format!("expected 7 nonempty rating sets, got {}", sets.len()));
    }

    let ucs_only = RatingSet::singleton(BiasRating::UCS);
    for &s in &sets {
        let got = compose_set(s, ucs_only);
        if got != ucs_only {
            return Err(format!("a perfect second stage must absorb: {s} * {ucs_only} = {got}"));
        }
    }

    let dsbs_only = RatingSet::singleton(BiasRating::DSBS);
    for &s in &sets {
        let got = compose_set(dsbs_only, s);
        if got != s {
            return Err(format!(
                "a transparent first stage must be an identity: {dsbs_only} * {s} = {got}"
            ));
        }
    }

    let mut violations = 0u32;
    let mut example = None;
    for &a in &sets {
        for &b in &sets {
            for &c in &sets {
                let left = compose_set(compose_set(a, b), c);
                let right = compose_set(a, compose_set(b, c));
                if left != right {
                    violations += 1;
                    example.get_or_insert((a, b, c, left, right));
                }
            }
        }
    }
    if let Some((a, b, c, left, right)) = example {
        return Err(format!(
            "set composition is not associative: {violations} of 343 triples differ\n\
             example: ({a} * {b}) * {c} = {left}  but  {a} * ({b} * {c}) = {right}\n\
             the culprit is the total-uncertainty cell compose(BS, BS) = BS|DSBS|UCS,\n\
             whose DSBS member then acts as a left identity instead of staying biased"
        ));
    }
    Ok(())
}

// --- criterion 3: the similarity statistic and its p-values ----------------

/// Straight re-computation of the two-sample statistic from its formula,
/// dropping categories empty in both samples.
fn statistic_oracle(c1: &[u64], c2: &[u64]) -> (f64, u32) {
    let n1: u64 = c1.iter().sum();
    let n2: u64 = c2.iter().sum();
    let r12 = (n2 as f64 / n1 as f64).sqrt();
    let r21 = (n1 as f64 / n2 as f64).sqrt();
    let mut statistic = 0.0;
    let mut live = 0u32;
    for (&a, &b) in c1.iter().zip(c2) {
        if a == 0 && b == 0 {
            continue;
        }
        live += 1;
        let d = r12 * a as f64 - r21 * b as f64;
        statistic += d * d / (a + b) as f64;
    }
    (statistic, live.saturating_sub(1))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, whole: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let left = simpson(f, a, c);
    let right = simpson(f, c, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, c, 0.5 * eps, left, depth - 1)
            + adaptive(f, c, b, 0.5 * eps, right, depth - 1)
    }
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    adaptive(f, a, b, 1e-13, simpson(f, a, b), 60)
}

/// Upper-tail probability by adaptive quadrature of the density, with the
/// df = 1 endpoint singularity removed by the substitution t = u^2. Uses
/// closed-form gamma values for half-integer arguments, so it shares no code
/// with the implementation under test.
fn p_value_oracle(statistic: f64, df: u32) -> f64 {
    let gamma_half = [PI.sqrt(), 1.0, PI.sqrt() / 2.0, 1.0, 3.0 * PI.sqrt() / 4.0, 2.0];
    let cdf = if df == 1 {
        let c = 2.0 / (2.0 * PI).sqrt();
        integrate(&move |u: f64| c * (-0.5 * u * u).exp(), 0.0, statistic.sqrt())
    } else {
        let k = f64::from(df) / 2.0;
        let norm = 1.0 / (2f64.powf(k) * gamma_half[(df - 1) as usize]);
        integrate(&move |t: f64| norm * t.powf(k - 1.0) * (-0.5 * t).exp(), 0.0, statistic)
    };
    1.0 - cdf
}

fn gender_counts(he: u64, she: u64, other: u64) -> ValueCounts {
    ValueCounts::new(AttributeSpec::gender(), vec![he, she, other]).expect("valid counts")
}

fn similarity_statistics() -> Result<(), String> {
    // statistic fidelity against the formula, including category dropping
    let pairs: [([u64; 3], [u64; 3]); 6] = [
        ([20, 20, 0], [4, 36, 0]),
        ([40, 0, 0], [36, 4, 0]),
        ([10, 20, 30], [30, 20, 10]),
        ([10, 20, 30], [3, 2, 1]),
        ([14, 13, 13], [13, 14, 13]),
        ([5, 0, 5], [0, 10, 0]),
    ];
    for (a, b) in pairs {
        let (want_stat, want_df) = statistic_oracle(&a, &b);
        let (stat, df, _) =
            chi_square_statistic(&gender_counts(a[0], a[1], a[2]), &gender_counts(b[0], b[1], b[2]))
                .map_err(err)?;
        if (stat - want_stat).abs() > 1e-12 || df != want_df {
            return Err(format!(
                "statistic({a:?}, {b:?}) = ({stat}, df {df}), formula gives ({want_stat}, df {want_df})"
            ));
        }
    }

    // the worked example: balanced 20/20 against skewed 4/36
    let (stat, df, dropped) =
        chi_square_statistic(&gender_counts(20, 20, 0), &gender_counts(4, 36, 0)).map_err(err)?;
    if (stat - 15.238095238095237).abs() > 1e-4 {
        return Err(format!("worked-example statistic = {stat}, want 15.238095..."));
    }
    if df != 1 || dropped != ["Other"] {
        return Err(format!("worked example: df {df}, dropped {dropped:?}"));
    }

    // p-values against the quadrature oracle
    let stats = [0.1, 0.5, 1.0, 2.0, 3.8415, 5.0, 8.0, 12.0, 15.2381, 20.0, 25.0, 30.0];
    for df in 1..=6u32 {
        for &statistic in &stats {
            let implemented = p_value(statistic, df).map_err(err)?;
            let oracle = p_value_oracle(statistic, df);
            if (implemented - oracle).abs() > 1e-6 {
                return Err(format!(
                    "p({statistic}, df {df}) = {implemented}, quadrature oracle gives {oracle}"
                ));
            }
        }
    }

    // closed-form anchors
    let p = p_value(2.0, 2).map_err(err)?;
    if (p - (-1f64).exp()).abs() > 1e-12 {
        return Err(format!("p(2, df 2) = {p}, want exp(-1)"));
    }
    let p = p_value(3.8415, 1).map_err(err)?;
    if (p - 0.05).abs() > 1e-3 {
        return Err(format!("p at the df=1 critical value 3.8415 = {p}, want about 0.05"));
    }

    // verdict semantics: similar means p strictly above alpha
    let verdict = ChiSquaredTwoSample
        .compare(&gender_counts(40, 0, 0), &gender_counts(36, 4, 0), 0.05)
        .map_err(err)?;
    if verdict.similar || verdict.p_value < 0.03 || verdict.p_value > 0.05 {
        return Err(format!(
            "collapse-vs-almost-pure must be barely dissimilar, got similar={} p={}",
            verdict.similar, verdict.p_value
        ));
    }
    Ok(())
}

// --- criterion 4: the mock rating matrix across eight languages ------------

fn middle_languages() -> Vec<Lang> {
    ["ar", "fr", "hi", "it", "pt", "ru", "es", "tr"].into_iter().map(Lang::new).collect()
}

/// The default suite extended with fully one-sided biased references, so a
/// collapse lands exactly on a biased spec instead of between references.
fn matrix_suite() -> Result<SpecSuite, String> {
    let attr = AttributeSpec::gender();
    let spec = |p: [f64; 3], kind, label: &str| {
        DistributionSpec::new(attr.clone(), p.to_vec(), kind, label).map_err(err)
    };
    SpecSuite::new(
        Classifier::gender(),
        vec![
            spec([0.5, 0.5, 0.0], DistributionKind::Unbiased, "unbiased-50-50")?,
            spec([0.1, 0.9, 0.0], DistributionKind::Biased, "biased-10-90")?,
            spec([0.9, 0.1, 0.0], DistributionKind::Biased, "biased-90-10")?,
            spec([1.0, 0.0, 0.0], DistributionKind::Biased, "biased-100-0")?,
            spec([0.0, 1.0, 0.0], DistributionKind::Biased, "biased-0-100")?,
        ],
    )
    .map_err(err)
}

fn mock_rating_matrix() -> Result<(), String> {
    let started = Instant::now();
    let languages = middle_languages();
    let suite = matrix_suite()?;
    let config = RatingConfig::default_gender(default_occupations()).map_err(err)?;

    // no network is reachable from here: every service is an in-process mock
    let matrix = [
        (MockBehavior::Identity, BiasRating::DSBS),
        (MockBehavior::CollapseTo(String::from("He")), BiasRating::BS),
        (MockBehavior::Flip, BiasRating::DSBS),
        (MockBehavior::Equalize, BiasRating::UCS),
    ];
    for (behavior, want) in matrix {
        let translator = MockTranslator::new(behavior.clone()).map_err(err)?;
        let report =
            rate_service(&translator, &languages, &suite, &ChiSquaredTwoSample, &config)
                .map_err(err)?;
        if !report.failed_languages.is_empty() {
            return Err(format!("{behavior}: unexpected failures {:?}", report.failed_languages));
        }
        if report.per_language.len() != languages.len() {
            return Err(format!(
                "{behavior}: rated {} languages, want {}",
                report.per_language.len(),
                languages.len()
            ));
        }
        for (lang, outcome) in &report.per_language {
            if outcome.rating != want {
                return Err(format!("{behavior} in {lang}: rated {}, want {want}", outcome.rating));
            }
        }
        if report.overall != want {
            return Err(format!("{behavior}: overall {}, want {want}", report.overall));
        }
    }

    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(5) {
        return Err(format!("matrix took {elapsed:?}, budget is 5 s"));
    }
    Ok(())
}

// --- criterion 5: composed pipelines against the composition table ---------

/// Rates every ordered pair of mock stages as one pipeline and checks the
/// measured rating is a member of the table's prediction for the pair.
fn composition_consistency() -> Result<(), String> {
    let home = Lang::new("en");
    let middle = Lang::new("fr");
    let suite = matrix_suite()?;
    let config = RatingConfig::default_gender(default_occupations()).map_err(err)?;
    let behaviors = [
        MockBehavior::Identity,
        MockBehavior::CollapseTo(String::from("He")),
        MockBehavior::Flip,
        MockBehavior::Equalize,
    ];

    let mut singles = Vec::new();
    for behavior in &behaviors {
        let stage = round_trip(
            MockTranslator::new(behavior.clone()).map_err(err)?,
            middle.clone(),
            home.clone(),
        )
        .map_err(err)?;
        let (rating, _) = rate_one(&stage, &suite, &ChiSquaredTwoSample, &config).map_err(err)?;
        singles.push(rating);
    }

    let mut violations = Vec::new();
    for (i, first) in behaviors.iter().enumerate() {
        for (j, second) in behaviors.iter().enumerate() {
            let pipeline = sequential_compose(
                round_trip(
                    MockTranslator::new(first.clone()).map_err(err)?,
                    middle.clone(),
                    home.clone(),
                )
                .map_err(err)?,
                round_trip(
                    MockTranslator::new(second.clone()).map_err(err)?,
                    middle.clone(),
                    home.clone(),
                )
                .map_err(err)?,
            );
            let (got, _) =
                rate_one(&pipeline, &suite, &ChiSquaredTwoSample, &config).map_err(err)?;
            let allowed = compose_set(
                RatingSet::singleton(singles[i]),
                RatingSet::singleton(singles[j]),
            );
            if !allowed.contains(got) {
                violations.push(format!(
                    "{first} then {second}: pipeline rated {got}, table allows only {allowed} \
                     (stages rated {} and {})",
                    singles[i], singles[j]
                ));
            }
        }
    }

    if !violations.is_empty() {
        return Err(format!(
            "{} of 16 stage pairs contradict the composition table:\n{}\n\
             a rebalancing first stage hides its successor's tracking, which the\n\
             UCS-then-DSBS table cell cannot express",
            violations.len(),
            violations.join("\n")
        ));
    }
    Ok(())
}

// --- criterion 6: data generation hits its distributions exactly -----------

fn datagen_exactness() -> Result<(), String> {
    let attr = AttributeSpec::gender();
    let template = TemplateConfig::gender(default_occupations()).map_err(err)?;
    let classifier = Classifier::gender();
    let spec = |p: [f64; 3], kind, label: &str| {
        DistributionSpec::new(attr.clone(), p.to_vec(), kind, label).map_err(err)
    };
    let specs = vec![
        spec([0.5, 0.5, 0.0], DistributionKind::Unbiased, "unbiased-50-50")?,
        spec([0.1, 0.9, 0.0], DistributionKind::Biased, "biased-10-90")?,
        spec([0.9, 0.1, 0.0], DistributionKind::Biased, "biased-90-10")?,
        spec([1.0, 0.0, 0.0], DistributionKind::Biased, "biased-100-0")?,
        spec([0.0, 1.0, 0.0], DistributionKind::Biased, "biased-0-100")?,
    ];

    // 5 specs x 20 seeds = 100 blocks, each read back through the classifier
    for spec in &specs {
        for seed in 0..20u64 {
            let block_seed = derive_seed(seed, &spec.label);
            let block = generate_block(spec, &template, 20, block_seed).map_err(err)?;
            let want = expected_counts(spec, block.total_slots()).map_err(err)?;
            if block.truth_counts() != want {
                return Err(format!(
                    "{} seed {seed}: slot truth {:?} differs from expected {:?}",
                    spec.label,
                    block.truth_counts().counts,
                    want.counts
                ));
            }
            let counted =
                classifier.count_block(&block.texts, block.slots_per_text).map_err(err)?;
            if counted != want {
                return Err(format!(
                    "{} seed {seed}: classifier read {:?}, expected {:?}",
                    spec.label, counted.counts, want.counts
                ));
            }
        }
    }

    // apportionment: counts sum to the block size for every size up to 1000
    let thirds = DistributionSpec::new(
        attr.clone(),
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        DistributionKind::Unbiased,
        "thirds",
    )
    .map_err(err)?;
    let skewed = spec([0.1, 0.9, 0.0], DistributionKind::Biased, "skewed")?;
    for n in 1..=1000u64 {
        for spec in [&thirds, &skewed] {
            let counts = expected_counts(spec, n).map_err(err)?;
            if counts.total() != n {
                return Err(format!(
                    "expected_counts({}, {n}) sums to {}, want {n}",
                    spec.label,
                    counts.total()
                ));
            }
        }
    }
    let tie_case = expected_counts(&thirds, 40).map_err(err)?;
    if tie_case.counts != [14, 13, 13] {
        return Err(format!("thirds of 40 apportioned as {:?}, want [14, 13, 13]", tie_case.counts));
    }
    Ok(())
}

// --- criterion 7: experiment size arithmetic --------------------------------

fn experiment_arithmetic() -> Result<(), String> {
    let p = plan(2, 8, 3, 20);
    if p.texts_per_language() != 60 {
        return Err(format!("texts per language = {}, want 60", p.texts_per_language()));
    }
    if p.total_texts() != 960 {
        return Err(format!("total texts = {}, want 960", p.total_texts()));
    }
    if p.total_translation_calls() != 1920 {
        return Err(format!(
            "total translation calls = {}, want 1920",
            p.total_translation_calls()
        ));
    }

    // the CLI's dry run must surface the same arithmetic
    let dir = tempfile::tempdir().map_err(err)?;
    let output = Command::new(env!("CARGO_BIN_EXE_biascope"))
        .args([
            "rate",
            "--service", "mock:identity",
            "--service", "mock:flip",
            "--middle", "ar,fr,hi,it,pt,ru,es,tr",
            "--dry-run",
        ])
        .current_dir(dir.path())
        .output()
        .map_err(err)?;
    if !output.status.success() {
        return Err(format!("dry run failed: {}", String::from_utf8_lossy(&output.stderr)));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    if !stdout.contains("= 1920 translation calls") {
        return Err(format!("dry run output lacks the 1920-call total: {stdout}"));
    }
    Ok(())
}

// --- criterion 8: warmed-cache runs are byte-identical ----------------------

fn cache_reproducibility() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let rate = |out: &str| -> Result<(), String> {
        let output = Command::new(env!("CARGO_BIN_EXE_biascope"))
            .args([
                "rate",
                "--service", "mock:flip",
                "--middle", "fr,hi",
                "--cache", "cache",
                "--out", out,
            ])
            .current_dir(dir.path())
            .output()
            .map_err(err)?;
        if !output.status.success() {
            return Err(format!(
                "rate into {out} failed: {}",
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        Ok(())
    };

    rate("warm")?;
    let cache_entries = count_files(&dir.path().join("cache"))?;
    if cache_entries == 0 {
        return Err(String::from("the warm run left no cache entries"));
    }

    rate("out-a")?;
    rate("out-b")?;
    for name in ["mock_flip.json", "mock_flip.md"] {
        let warm = std::fs::read(dir.path().join("warm").join(name)).map_err(err)?;
        let a = std::fs::read(dir.path().join("out-a").join(name)).map_err(err)?;
        let b = std::fs::read(dir.path().join("out-b").join(name)).map_err(err)?;
        if warm != a || a != b {
            return Err(format!("{name} differs between warmed reruns"));
        }
    }
    Ok(())
}

fn count_files(root: &Path) -> Result<usize, String> {
    let mut total = 0;
    for entry in std::fs::read_dir(root).map_err(err)? {
        let entry = entry.map_err(err)?;
        if entry.file_type().map_err(err)?.is_dir() {
            total += count_files(&entry.path())?;
        } else {
            total += 1;
        }
    }
    Ok(total)
}
