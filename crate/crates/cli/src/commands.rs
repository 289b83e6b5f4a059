//! Implementations of the non-experiment subcommands.

use std::path::{Path, PathBuf};

use resvar::{
    bias_test, dcor_perm_test, kde_density, paired_t_test, read_residuals_csv, wasserstein1,
    wasserstein_to_delta, Activation, Alternative, Dataset, DistFamily, DistSpec,
    EmpiricalDistribution, Error, McConfig, ModelSpec, NetSpec, PolySpec, Result, Scheme,
    TestKind, TestResult, TrainedModel,
};
use serde::Serialize;

use crate::cli::{
    FamilyArg, GenerateArgs, GeneratorName, MethodArg, ModelArgs, ModelFamily, MontecarloArgs,
    PreprocessArgs, ResidualsArgs, SchemeArg, TestArgs, TrainArgs,
};
use crate::manifest::RunManifest;

pub fn run_generate(args: &GenerateArgs) -> Result<()> {
    let dataset = generate_dataset(args.generator, args.n, args.seed)?;
    dataset.write_csv(&args.out)?;
    dataset.write_sidecar(&args.out)?;
    let manifest = RunManifest::new("generate")
        .param("generator", generator_label(args.generator))
        .param("n", args.n)
        .param("out", args.out.display().to_string())
        .seed("generator", args.seed);
    manifest.write_full(&manifest_path(&args.out))?;
    Ok(())
}

pub fn generate_dataset(name: GeneratorName, n: usize, seed: u64) -> Result<Dataset> {
    match name {
        GeneratorName::Simdata1 => resvar::simdata1(n, seed),
        GeneratorName::Simdata2 => resvar::simdata2(n, seed),
        GeneratorName::Simdata3 => resvar::simdata3(n, seed),
        GeneratorName::Simdata4 => {
            let generator_spec = NetSpec::new(vec![10, 8, 8, 1], Activation::Relu, 0);
            resvar::simdata4(n, seed, &generator_spec)
        }
    }
}

fn generator_label(name: GeneratorName) -> &'static str {
    match name {
        GeneratorName::Simdata1 => "simdata1",
        GeneratorName::Simdata2 => "simdata2",
        GeneratorName::Simdata3 => "simdata3",
        GeneratorName::Simdata4 => "simdata4",
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn run_preprocess(args: &PreprocessArgs) -> Result<()> {
    let raw = Dataset::read_csv(&args.data, Some(&args.target))?;
    let clean = resvar::preprocess_tabular(&raw, &args.drop, args.log_target, args.max_outliers)?;
    clean.write_csv(&args.out)?;
    clean.write_sidecar(&args.out)?;
    let manifest = RunManifest::new("preprocess")
        .param("target", args.target.clone())
        .param("drop", args.drop.clone())
        .param("log_target", args.log_target)
        .param("max_outliers", args.max_outliers)
        .param("rows_in", raw.len())
        .param("rows_out", clean.len())
        .digest_input(&args.data)?;
    manifest.write_full(&manifest_path(&args.out))?;
    Ok(())
}

/// Resolve the model spec from flags (or a saved model file) against the
/// dataset width.
pub fn model_spec_from_args(model: &ModelArgs, data_width: usize) -> Result<ModelSpec> {
    if let Some(path) = &model.model_file {
        let text = std::fs::read_to_string(path)?;
        let trained = TrainedModel::from_json(&text)?;
        return Ok(trained.spec);
    }
    match model.model {
        Some(ModelFamily::Poly) => Ok(ModelSpec::Poly(PolySpec {
            degree: model.degree,
            include_interactions: !model.no_interactions,
        })),
        Some(ModelFamily::Net) => {
            if model.layers.len() < 2 {
                return Err(Error::InvalidConfig(
                    "--layers must list the full architecture, e.g. 2,8,8,1".into(),
                ));
            }
            if model.layers[0] != data_width {
                return Err(Error::DimensionMismatch {
                    expected: data_width,
                    actual: model.layers[0],
                });
            }
            let mut spec = NetSpec::new(
                model.layers.clone(),
                model.activation.into(),
                model.init_seed,
            );
            spec.epochs = model.epochs;
            spec.batch_size = model.batch_size;
            spec.learning_rate = model.learning_rate;
            spec.validate()?;
            Ok(ModelSpec::Net(spec))
        }
        None => Err(Error::InvalidConfig(
            "pass --model poly|net or --model-file".into(),
        )),
    }
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data, Some(&args.target))?;
    let spec = model_spec_from_args(&args.model, data.width())?;
    let trained = spec.fit(&data.features, &data.target)?;
    std::fs::write(&args.out, trained.to_json()?)?;
    let manifest = RunManifest::new("train")
        .param("model", spec.label())
        .param("rows", data.len())
        .digest_input(&args.data)?;
    manifest.write_full(&manifest_path(&args.out))?;
    Ok(())
}

pub fn run_residuals(args: &ResidualsArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data, Some(&args.target))?;
    let spec = model_spec_from_args(&args.model, data.width())?;
    let set = match args.scheme {
        SchemeArg::Kfold => {
            resvar::kfold_residuals(&data.features, &data.target, &spec, args.k, args.seed)?
        }
        SchemeArg::Oob => {
            let mut rounds = args.rounds.unwrap_or(data.len());
            if let Some(cap) = args.max_rounds {
                rounds = rounds.min(cap);
            }
            resvar::oob_bootstrap_residuals(
                &data.features,
                &data.target,
                &spec,
                rounds,
                args.seed,
            )?
        }
    };
    set.write_csv(&args.out)?;
    let sidecar = set.sidecar();
    std::fs::write(
        resvar::datagen::sidecar_path(&args.out),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    let manifest = RunManifest::new("residuals")
        .param("model", spec.label())
        .param(
            "scheme",
            match set.scheme {
                Scheme::Kfold => "kfold",
                Scheme::OobBootstrap => "oob_bootstrap",
            },
        )
        .param(
            "k_or_rounds",
            match args.scheme {
                SchemeArg::Kfold => args.k,
                SchemeArg::Oob => set.residuals.len(),
            },
        )
        .seed("resample", args.seed)
        .digest_input(&args.data)?;
    manifest.write_full(&manifest_path(&args.out))?;
    Ok(())
}

/// A diagnostic that may be undefined for degenerate inputs; the condition
/// is reported instead of aborting the run.
#[derive(Serialize)]
#[serde(untagged)]
enum Diagnostic {
    Result(TestResult),
    Degenerate { degenerate: bool, note: String },
}

impl Diagnostic {
    fn from(result: Result<TestResult>) -> Result<Self> {
        match result {
            Ok(r) => Ok(Diagnostic::Result(r)),
            Err(Error::DegenerateSample { context }) => Ok(Diagnostic::Degenerate {
                degenerate: true,
                note: context.to_string(),
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Serialize)]
struct Diagnostics {
    mse_a: f64,
    mse_b: f64,
    variance_a: f64,
    variance_b: f64,
    bias_a: Diagnostic,
    bias_b: Diagnostic,
    paired_t: Diagnostic,
    /// Independence of each residual series from its own lag-1 shift.
    dcor_lag1_a: Diagnostic,
    dcor_lag1_b: Diagnostic,
    w1_between: f64,
    w1_a_to_zero: f64,
    w1_b_to_zero: f64,
    kde_a_csv: String,
    kde_b_csv: String,
}

fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

#[derive(Serialize)]
struct TestReport {
    manifest: RunManifest,
    n: usize,
    variance_test: TestResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<Diagnostics>,
}

fn lag1_independence(
    residuals: &[f64],
    n_perm: usize,
    seed: u64,
) -> Result<TestResult> {
    let head = &residuals[..residuals.len() - 1];
    let tail = &residuals[1..];
    dcor_perm_test(tail, head, n_perm, seed)
}

pub fn run_test(args: &TestArgs) -> Result<()> {
    let (_, a) = read_residuals_csv(&args.residuals_a)?;
    let (_, b) = read_residuals_csv(&args.residuals_b)?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sample = resvar::PairedSample::new(a.clone(), b.clone())?;
    let alternative: Alternative = args.alternative.into();
    let variance_test = match args.method {
        MethodArg::Classic => resvar::classic_mp_test(&sample, alternative)?,
        MethodArg::Hc4 => resvar::mp_hc4_test(&sample, alternative)?,
    };
    let manifest = RunManifest::new("test")
        .param(
            "method",
            match args.method {
                MethodArg::Classic => "classic_mp",
                MethodArg::Hc4 => "hc4_mp",
            },
        )
        .param("diagnostics", args.diagnostics)
        .param("permutations", args.permutations)
        .seed("permutation", args.seed)
        .digest_input(&args.residuals_a)?
        .digest_input(&args.residuals_b)?;

    let diagnostics = if args.diagnostics {
        let kde_a_path = args.out.with_extension("kde_a.csv");
        let kde_b_path = args.out.with_extension("kde_b.csv");
        std::fs::write(&kde_a_path, kde_density(&a, 512)?.to_csv())?;
        std::fs::write(&kde_b_path, kde_density(&b, 512)?.to_csv())?;
        let fa = EmpiricalDistribution::new(a.clone())?;
        let fb = EmpiricalDistribution::new(b.clone())?;
        Some(Diagnostics {
            mse_a: mean_square(&a),
            mse_b: mean_square(&b),
            variance_a: resvar::util::sample_variance(&a),
            variance_b: resvar::util::sample_variance(&b),
            bias_a: Diagnostic::from(bias_test(&a))?,
            bias_b: Diagnostic::from(bias_test(&b))?,
            paired_t: Diagnostic::from(paired_t_test(&a, &b))?,
            dcor_lag1_a: Diagnostic::from(lag1_independence(&a, args.permutations, args.seed))?,
            dcor_lag1_b: Diagnostic::from(lag1_independence(&b, args.permutations, args.seed))?,
            w1_between: wasserstein1(&fa, &fb)?,
            w1_a_to_zero: wasserstein_to_delta(&a)?,
            w1_b_to_zero: wasserstein_to_delta(&b)?,
            kde_a_csv: kde_a_path.display().to_string(),
            kde_b_csv: kde_b_path.display().to_string(),
        })
    } else {
        None
    };

    let report = TestReport {
        manifest: manifest.clone(),
        n: a.len(),
        variance_test,
        diagnostics,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    manifest.write_full(&manifest_path(&args.out))?;
    print_test_report(&report);
    Ok(())
}

fn diagnostic_p(d: &Diagnostic) -> String {
    match d {
        Diagnostic::Result(r) => crate::text::compact(r.p_value),
        Diagnostic::Degenerate { .. } => "degenerate".into(),
    }
}

fn print_test_report(report: &TestReport) {
    let v = &report.variance_test;
    let method = match v.method {
        resvar::Method::ClassicMp => "classic_mp",
        resvar::Method::Hc4Mp => "hc4_mp",
        _ => "variance",
    };
    println!(
        "{method}: statistic = {}, df = {}, p = {}{}",
        crate::text::compact(v.statistic),
        crate::text::compact(v.df),
        crate::text::compact(v.p_value),
        if v.degenerate { " (degenerate)" } else { "" }
    );
    if let Some(d) = &report.diagnostics {
        let rows = vec![
            vec![
                "a".into(),
                crate::text::compact(d.mse_a),
                crate::text::compact(d.w1_a_to_zero),
                crate::text::compact(d.variance_a),
                diagnostic_p(&d.bias_a),
                diagnostic_p(&d.dcor_lag1_a),
            ],
            vec![
                "b".into(),
                crate::text::compact(d.mse_b),
                crate::text::compact(d.w1_b_to_zero),
                crate::text::compact(d.variance_b),
                diagnostic_p(&d.bias_b),
                diagnostic_p(&d.dcor_lag1_b),
            ],
        ];
        print!(
            "{}",
            crate::text::render(
                &["input", "mse", "w1_to_delta", "variance", "bias_p", "indep_p"],
                &rows
            )
        );
        println!(
            "paired_t p = {}, w1_between = {}",
            diagnostic_p(&d.paired_t),
            crate::text::compact(d.w1_between)
        );
    }
}

fn read_flat_config(path: &Path) -> Result<std::collections::BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("{}: line {}: expected key=value", path.display(), lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_cfg<T: std::str::FromStr>(
    map: &std::collections::BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("bad value for {key}: '{raw}'"))),
    }
}

fn family_from_str(raw: &str) -> Result<FamilyArg> {
    match raw {
        "normal" => Ok(FamilyArg::Normal),
        "t" => Ok(FamilyArg::T),
        other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
    }
}

fn dist_spec(family: FamilyArg, scale: f64, df: Option<f64>) -> Result<DistSpec> {
    let family = match family {
        FamilyArg::Normal => DistFamily::Normal,
        FamilyArg::T => DistFamily::StudentT {
            df: df.ok_or_else(|| {
                Error::InvalidConfig("t family needs degrees of freedom (…-df)".into())
            })?,
        },
    };
    Ok(DistSpec { family, scale })
}

#[derive(Serialize)]
struct McJsonReport {
    manifest: RunManifest,
    config: McConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<resvar::McReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power_curve: Option<Vec<resvar::PowerPoint>>,
}

pub fn run_montecarlo(args: &MontecarloArgs) -> Result<()> {
    let file_cfg = match &args.config {
        Some(path) => read_flat_config(path)?,
        None => Default::default(),
    };
    // Flags win over config-file entries, which win over defaults.
    let reps = args
        .reps
        .or(parse_cfg(&file_cfg, "reps")?)
        .unwrap_or(10_000);
    let n = args.n.or(parse_cfg(&file_cfg, "n")?).unwrap_or(1000);
    let alpha = args.alpha.or(parse_cfg(&file_cfg, "alpha")?).unwrap_or(0.05);
    let base_seed = args
        .base_seed
        .or(parse_cfg(&file_cfg, "base-seed")?)
        .unwrap_or(0);
    let test = match args.test {
        Some(MethodArg::Classic) => TestKind::ClassicMp,
        Some(MethodArg::Hc4) => TestKind::Hc4Mp,
        None => match file_cfg.get("test").map(String::as_str) {
            Some("classic") => TestKind::ClassicMp,
            Some("hc4") | None => TestKind::Hc4Mp,
            Some(other) => {
                return Err(Error::InvalidConfig(format!("unknown test '{other}'")));
            }
        },
    };
    let null_family = match args.null_family {
        Some(f) => f,
        None => match file_cfg.get("null-family") {
            Some(raw) => family_from_str(raw)?,
            None => FamilyArg::Normal,
        },
    };
    let alt_family = match args.alt_family {
        Some(f) => f,
        None => match file_cfg.get("alt-family") {
            Some(raw) => family_from_str(raw)?,
            None => FamilyArg::Normal,
        },
    };
    let null_scale = args
        .null_scale
        .or(parse_cfg(&file_cfg, "null-scale")?)
        .unwrap_or(1.0);
    let alt_scale = args
        .alt_scale
        .or(parse_cfg(&file_cfg, "alt-scale")?)
        .unwrap_or(1.0);
    let null_df = args.null_df.or(parse_cfg(&file_cfg, "null-df")?);
    let alt_df = args.alt_df.or(parse_cfg(&file_cfg, "alt-df")?);

    let keep_p_values = args.keep_p_values
        || args.p_values_csv.is_some()
        || parse_cfg(&file_cfg, "keep-p-values")?.unwrap_or(false);
    let ratios: Vec<f64> = if args.ratios.is_empty() {
        match file_cfg.get("ratios") {
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad ratio '{}'", s.trim()))
                    })
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        }
    } else {
        args.ratios.clone()
    };
    if args.p_values_csv.is_some() && !ratios.is_empty() {
        return Err(Error::InvalidConfig(
            "--p-values-csv applies to a single run, not a power curve".into(),
        ));
    }

    let cfg = McConfig {
        replications: reps,
        sample_size: n,
        alpha,
        null_generator: dist_spec(null_family, null_scale, null_df)?,
        alt_generator: dist_spec(alt_family, alt_scale, alt_df)?,
        test,
        base_seed,
        keep_p_values,
    };
    cfg.validate()?;

    let mut manifest = RunManifest::new("montecarlo")
        .param("reps", reps)
        .param("n", n)
        .param("alpha", alpha)
        .param(
            "test",
            match test {
                TestKind::ClassicMp => "classic_mp",
                TestKind::Hc4Mp => "hc4_mp",
            },
        )
        .seed("base", base_seed);
    if let Some(path) = &args.config {
        manifest = manifest.digest_input(path)?;
    }

    let (report, power) = if ratios.is_empty() {
        (Some(resvar::estimate_rejection_rate(&cfg)?), None)
    } else {
        (None, Some(resvar::power_curve(&cfg, &ratios)?))
    };

    if let Some(csv_path) = &args.p_values_csv {
        let mut text = String::from("replication,p_value\n");
        if let Some(rep) = report.as_ref().and_then(|r| r.p_values.as_ref()) {
            for (i, p) in rep.iter().enumerate() {
                text.push_str(&format!("{i},{}\n", resvar::util::format_f64(*p)));
            }
        }
        std::fs::write(csv_path, text)?;
    }

    if let Some(rep) = &report {
        println!(
            "rejection rate {} (95% Wilson {} .. {}), {} replications, {} failed",
            crate::text::compact(rep.rejection_rate),
            crate::text::compact(rep.wilson_low),
            crate::text::compact(rep.wilson_high),
            rep.replications,
            rep.failures
        );
    }
    if let Some(curve) = &power {
        let rows: Vec<Vec<String>> = curve
            .iter()
            .map(|p| {
                vec![
                    crate::text::compact(p.variance_ratio),
                    crate::text::compact(p.report.rejection_rate),
                    crate::text::compact(p.report.wilson_low),
                    crate::text::compact(p.report.wilson_high),
                ]
            })
            .collect();
        print!(
            "{}",
            crate::text::render(
                &["variance_ratio", "rejection_rate", "wilson_low", "wilson_high"],
                &rows
            )
        );
    }

    let json = McJsonReport {
        manifest: manifest.clone(),
        config: cfg,
        report,
        power_curve: power,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&json)?)?;
    manifest.write_full(&manifest_path(&args.out))?;
    Ok(())
}
