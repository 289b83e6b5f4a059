//! Experiment recipes: generate the dataset once from the experiment seed,
//! then per Monte Carlo run train the candidate models, extract 10-fold
//! cross-validation residuals, run the variance tests and companion
//! diagnostics, and aggregate everything into tables. Run r varies only the
//! resampling and initialization seeds (base seed + r); the dataset stays
//! fixed so the runs measure the variability of the testing scheme, not of
//! the data-generating process.

use std::path::Path;

use resvar::util::{format_f64, sample_variance};
use resvar::{
    bias_test, dcor_perm_test, kde_density, kfold_residuals, nested_f_test, wasserstein1,
    Activation, Alternative, Dataset, EmpiricalDistribution, Error, ModelSpec, NetSpec, PolySpec,
    Result,
};
use serde::Serialize;

use crate::cli::{ExperimentArgs, ExperimentName};
use crate::manifest::RunManifest;

const FOLDS: usize = 10;
const SAMPLES: usize = 1000;
/// Permutations for the per-model independence column; the mean over runs
/// only needs 0.005 resolution.
const INDEP_PERMUTATIONS: usize = 199;

struct ModelPlan {
    label: String,
    /// Feature columns this model sees (None = all).
    subset: Option<Vec<usize>>,
    spec: ModelSpec,
}

struct Recipe {
    models: Vec<ModelPlan>,
    /// (nested, base) label pairs for the variance-equality table.
    pairs: Vec<(String, String)>,
    /// Also run the in-sample nested F test on the same pairs.
    f_tests: bool,
    /// Reference model for the W1(residuals, base residuals) column.
    base_label: Option<String>,
    default_runs: usize,
}

fn net(layer_sizes: Vec<usize>, init_seed: u64, epochs: usize) -> ModelSpec {
    let mut spec = NetSpec::new(layer_sizes, Activation::Relu, init_seed);
    spec.epochs = epochs;
    ModelSpec::Net(spec)
}

fn feature_selection_recipe(hidden: [usize; 2], run_seed: u64, epochs: usize) -> Recipe {
    let subsets: [(&str, Option<Vec<usize>>); 4] = [
        ("nn_all", None),
        ("nn_op", Some(vec![0, 1, 2, 3])),
        ("nn_nop", Some(vec![4, 5, 6, 7])),
        ("nn_3op3nop", Some(vec![0, 1, 2, 5, 6, 7])),
    ];
    let models = subsets
        .into_iter()
        .map(|(label, subset)| {
            let width = subset.as_ref().map_or(8, Vec::len);
            ModelPlan {
                label: label.to_string(),
                subset,
                spec: net(vec![width, hidden[0], hidden[1], 1], run_seed, epochs),
            }
        })
        .collect();
    Recipe {
        models,
        pairs: vec![
            ("nn_op".into(), "nn_all".into()),
            ("nn_nop".into(), "nn_all".into()),
            ("nn_3op3nop".into(), "nn_all".into()),
        ],
        f_tests: false,
        base_label: Some("nn_all".into()),
        default_runs: 1,
    }
}

fn recipe(name: ExperimentName, run_seed: u64, epochs: usize) -> Recipe {
    match name {
        ExperimentName::Simdata1 => feature_selection_recipe([3, 7], run_seed, epochs),
        ExperimentName::Simdata2 => feature_selection_recipe([2, 6], run_seed, epochs),
        ExperimentName::Simdata3 => Recipe {
            models: (1..=3)
                .map(|degree| ModelPlan {
                    label: format!("poly_deg{degree}"),
                    subset: None,
                    spec: ModelSpec::Poly(PolySpec::new(degree)),
                })
                .collect(),
            pairs: vec![
                ("poly_deg2".into(), "poly_deg1".into()),
                ("poly_deg3".into(), "poly_deg1".into()),
                ("poly_deg3".into(), "poly_deg2".into()),
            ],
            f_tests: true,
            base_label: None,
            default_runs: 50,
        },
        ExperimentName::Simdata4 => Recipe {
            models: vec![
                ModelPlan {
                    label: "neuron".into(),
                    subset: None,
                    spec: net(vec![10, 1], run_seed + 1, epochs),
                },
                ModelPlan {
                    label: "nn_1layer".into(),
                    subset: None,
                    spec: net(vec![10, 8, 1], run_seed + 1, epochs),
                },
                ModelPlan {
                    label: "nn_2layer".into(),
                    subset: None,
                    spec: net(vec![10, 8, 8, 1], run_seed + 1, epochs),
                },
                ModelPlan {
                    label: "nn_3layer".into(),
                    subset: None,
                    spec: net(vec![10, 8, 8, 8, 1], run_seed + 1, epochs),
                },
            ],
            pairs: vec![
                ("nn_2layer".into(), "nn_1layer".into()),
                ("nn_3layer".into(), "nn_1layer".into()),
                ("nn_3layer".into(), "nn_2layer".into()),
            ],
            f_tests: false,
            base_label: None,
            default_runs: 1,
        },
    }
}

fn experiment_label(name: ExperimentName) -> &'static str {
    match name {
        ExperimentName::Simdata1 => "simdata1",
        ExperimentName::Simdata2 => "simdata2",
        ExperimentName::Simdata3 => "simdata3",
        ExperimentName::Simdata4 => "simdata4",
    }
}

fn generate(name: ExperimentName, n: usize, seed: u64) -> Result<Dataset> {
    match name {
        ExperimentName::Simdata1 => resvar::simdata1(n, seed),
        ExperimentName::Simdata2 => resvar::simdata2(n, seed),
        ExperimentName::Simdata3 => resvar::simdata3(n, seed),
        ExperimentName::Simdata4 => {
            let generator_spec = NetSpec::new(vec![10, 8, 8, 1], Activation::Relu, 0);
            resvar::simdata4(n, seed, &generator_spec)
        }
    }
}

#[derive(Serialize, Clone)]
pub struct ModelRow {
    pub model: String,
    pub mse: f64,
    pub w1_to_delta: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1_to_base: Option<f64>,
    pub bias_p: f64,
    pub indep_p: f64,
}

#[derive(Serialize, Clone)]
pub struct PairRow {
    pub model_a: String,
    pub model_b: String,
    pub mean_p: f64,
}

#[derive(Serialize)]
pub struct ExperimentReport {
    pub manifest: RunManifest,
    pub name: String,
    pub runs: usize,
    pub n: usize,
    pub epochs: usize,
    pub folds: usize,
    pub models: Vec<ModelRow>,
    pub variance_tests: Vec<PairRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub f_tests: Vec<PairRow>,
    pub kde_files: Vec<String>,
}

#[derive(Default, Clone)]
struct StatAccumulator {
    mse: f64,
    w1_to_delta: f64,
    variance: f64,
    w1_to_base: f64,
    bias_p: f64,
    indep_p: f64,
}

pub fn run_experiment(args: &ExperimentArgs) -> Result<ExperimentReport> {
    if !args.scale.is_finite() || args.scale <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "scale must be positive, got {}",
            args.scale
        )));
    }
    let epochs = ((200.0 * args.scale).round() as usize).max(1);
    let base_runs = args
        .runs
        .unwrap_or_else(|| recipe(args.name, 0, epochs).default_runs);
    let runs = ((base_runs as f64 * args.scale).round() as usize).max(1);

    std::fs::create_dir_all(&args.out_dir)?;

    let plan0 = recipe(args.name, args.seed, epochs);
    let labels: Vec<String> = plan0.models.iter().map(|m| m.label.clone()).collect();
    let mut acc: Vec<StatAccumulator> = vec![StatAccumulator::default(); labels.len()];
    let mut pair_p = vec![0.0f64; plan0.pairs.len()];
    let mut f_p = vec![0.0f64; plan0.pairs.len()];
    let mut kde_files = Vec::new();

    let dataset = generate(args.name, SAMPLES, args.seed)?;

    if plan0.f_tests {
        // In-sample fits on the full dataset drive the classic F test; they
        // do not depend on the resampling seed.
        let mut rss = Vec::with_capacity(plan0.models.len());
        for model in &plan0.models {
            let fitted = model.spec.fit(&dataset.features, &dataset.target)?;
            rss.push(fitted.rss(&dataset.features, &dataset.target)?);
        }
        for (p_idx, (nested, base)) in plan0.pairs.iter().enumerate() {
            let a = labels.iter().position(|l| l == nested).unwrap();
            let b = labels.iter().position(|l| l == base).unwrap();
            // The lower-degree model is the small one.
            let (small, big) = if plan0.models[a].spec.param_count(dataset.width())
                <= plan0.models[b].spec.param_count(dataset.width())
            {
                (a, b)
            } else {
                (b, a)
            };
            let result = nested_f_test(
                rss[small],
                plan0.models[small].spec.param_count(dataset.width()),
                rss[big],
                plan0.models[big].spec.param_count(dataset.width()),
                dataset.len(),
            )?;
            f_p[p_idx] = result.p_value;
        }
    }

    for run in 0..runs {
        let run_seed = args.seed.wrapping_add(run as u64);
        let plan = recipe(args.name, run_seed, epochs);

        let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(plan.models.len());
        for (m_idx, model) in plan.models.iter().enumerate() {
            let view = match &model.subset {
                Some(subset) => dataset.keep_features(subset)?,
                None => dataset.clone(),
            };
            let set = kfold_residuals(&view.features, &view.target, &model.spec, FOLDS, run_seed)?;
            let res = set.residuals;

            let stats = &mut acc[m_idx];
            stats.mse += res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64;
            stats.w1_to_delta += resvar::wasserstein_to_delta(&res)?;
            stats.variance += sample_variance(&res);
            stats.bias_p += bias_test(&res)?.p_value;
            let fitted: Vec<f64> = view
                .target
                .iter()
                .zip(&res)
                .map(|(y, r)| y - r)
                .collect();
            stats.indep_p += dcor_perm_test(&res, &fitted, INDEP_PERMUTATIONS, run_seed)?.p_value;

            if run == 0 {
                let kde_path = args.out_dir.join(format!("kde_{}.csv", model.label));
                std::fs::write(&kde_path, kde_density(&res, 512)?.to_csv())?;
                kde_files.push(format!("kde_{}.csv", model.label));
            }
            residuals.push(res);
        }

        if let Some(base) = &plan.base_label {
            let base_idx = labels.iter().position(|l| l == base).unwrap();
            let base_dist = EmpiricalDistribution::new(residuals[base_idx].clone())?;
            for (m_idx, res) in residuals.iter().enumerate() {
                let dist = EmpiricalDistribution::new(res.clone())?;
                acc[m_idx].w1_to_base += wasserstein1(&dist, &base_dist)?;
            }
        }

        for (p_idx, (nested, base)) in plan.pairs.iter().enumerate() {
            let a = labels.iter().position(|l| l == nested).unwrap();
            let b = labels.iter().position(|l| l == base).unwrap();
            let sample =
                resvar::PairedSample::new(residuals[a].clone(), residuals[b].clone())?;
            pair_p[p_idx] += resvar::mp_hc4_test(&sample, Alternative::TwoSided)?.p_value;
        }
    }

    let runs_f = runs as f64;
    let has_base = plan0.base_label.is_some();
    let models: Vec<ModelRow> = labels
        .iter()
        .zip(&acc)
        .map(|(label, s)| ModelRow {
            model: label.clone(),
            mse: s.mse / runs_f,
            w1_to_delta: s.w1_to_delta / runs_f,
            variance: s.variance / runs_f,
            w1_to_base: has_base.then_some(s.w1_to_base / runs_f),
            bias_p: s.bias_p / runs_f,
            indep_p: s.indep_p / runs_f,
        })
        .collect();
    let variance_tests: Vec<PairRow> = plan0
        .pairs
        .iter()
        .zip(&pair_p)
        .map(|((a, b), p)| PairRow {
            model_a: a.clone(),
            model_b: b.clone(),
            mean_p: p / runs_f,
        })
        .collect();
    let f_tests: Vec<PairRow> = if plan0.f_tests {
        plan0
            .pairs
            .iter()
            .zip(&f_p)
            .map(|((a, b), p)| PairRow {
                model_a: a.clone(),
                model_b: b.clone(),
                mean_p: *p,
            })
            .collect()
    } else {
        Vec::new()
    };

    let manifest = RunManifest::new("experiment")
        .param("name", experiment_label(args.name))
        .param("runs", runs)
        .param("n", SAMPLES)
        .param("epochs", epochs)
        .param("folds", FOLDS)
        .param("scale", args.scale)
        .param("indep_permutations", INDEP_PERMUTATIONS)
        .seed("base", args.seed);

    let report = ExperimentReport {
        manifest,
        name: experiment_label(args.name).to_string(),
        runs,
        n: SAMPLES,
        epochs,
        folds: FOLDS,
        models,
        variance_tests,
        f_tests,
        kde_files,
    };
    write_bundle(&report, &args.out_dir)?;
    print!("{}", render_text(&report));
    Ok(report)
}

/// Aligned text rendering of the experiment tables for the terminal.
fn render_text(report: &ExperimentReport) -> String {
    use crate::text::{compact, render};
    let mut out = format!(
        "{}: {} runs of {}-fold CV on n = {} (mean values over runs)\n\n",
        report.name, report.runs, report.folds, report.n
    );
    let has_base = report.models.iter().any(|m| m.w1_to_base.is_some());
    let mut headers = vec!["model", "mse", "w1_to_delta", "variance"];
    if has_base {
        headers.push("w1_to_base");
    }
    headers.extend(["bias_p", "indep_p"]);
    let rows: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|m| {
            let mut row = vec![
                m.model.clone(),
                compact(m.mse),
                compact(m.w1_to_delta),
                compact(m.variance),
            ];
            if let Some(w1) = m.w1_to_base {
                row.push(compact(w1));
            }
            row.push(compact(m.bias_p));
            row.push(compact(m.indep_p));
            row
        })
        .collect();
    out.push_str(&render(&headers, &rows));

    out.push_str("\nresidual variance equality test (hc4, two-sided)\n");
    let pair_rows = |rows: &[PairRow]| {
        rows.iter()
            .map(|r| {
                vec![
                    r.model_a.clone(),
                    r.model_b.clone(),
                    compact(r.mean_p),
                ]
            })
            .collect::<Vec<_>>()
    };
    out.push_str(&render(
        &["model_a", "model_b", "mean_p"],
        &pair_rows(&report.variance_tests),
    ));
    if !report.f_tests.is_empty() {
        out.push_str("\nnested F test (in-sample)\n");
        out.push_str(&render(
            &["model_a", "model_b", "p"],
            &pair_rows(&report.f_tests),
        ));
    }
    out
}

fn write_bundle(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;

    let mut table = String::from(if report.models.iter().any(|m| m.w1_to_base.is_some()) {
        "model,mse,w1_to_delta,variance,w1_to_base,bias_p,indep_p\n"
    } else {
        "model,mse,w1_to_delta,variance,bias_p,indep_p\n"
    });
    for row in &report.models {
        table.push_str(&row.model);
        for value in [row.mse, row.w1_to_delta, row.variance] {
            table.push(',');
            table.push_str(&format_f64(value));
        }
        if let Some(w1) = row.w1_to_base {
            table.push(',');
            table.push_str(&format_f64(w1));
        }
        for value in [row.bias_p, row.indep_p] {
            table.push(',');
            table.push_str(&format_f64(value));
        }
        table.push('\n');
    }
    std::fs::write(out_dir.join("models_table.csv"), table)?;

    let pair_csv = |rows: &[PairRow]| {
        let mut text = String::from("model_a,model_b,mean_p\n");
        for row in rows {
            text.push_str(&format!(
                "{},{},{}\n",
                row.model_a,
                row.model_b,
                format_f64(row.mean_p)
            ));
        }
        text
    };
    std::fs::write(
        out_dir.join("variance_tests.csv"),
        pair_csv(&report.variance_tests),
    )?;
    if !report.f_tests.is_empty() {
        std::fs::write(out_dir.join("f_tests.csv"), pair_csv(&report.f_tests))?;
    }
    report
        .manifest
        .write_full(&out_dir.join("manifest.json"))?;
    Ok(())
}
