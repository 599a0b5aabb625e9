//! The five subcommands. Each builds its files in memory and returns them
//! together with the text meant for standard output.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fdo_mlp::bench::{random_search, BenchmarkFunction};
use fdo_mlp::dataset::{generate_synthetic, load_csv, ColumnRange, LabeledDataset, SyntheticSpec};
use fdo_mlp::evaluation::{
    auc, confusion_matrix, cross_validate, format_metric, metrics, truncate_decimals, ConfusionMatrix,
    CrossValidationConfig, CrossValidationReport, MetricsReport,
};
use fdo_mlp::fdo::{minimize, DrawMode, FdoConfig};
use fdo_mlp::mlp::{hidden_size_rule, predict_class, read_model, write_model, MlpParams, MlpTopology, OutputActivation};
use fdo_mlp::trainer::{
    predict_outputs, run_statistics, BpConfig, Direction, Preset, Trainer, TrainingConfig,
};
use fdo_mlp::DEFAULT_SEED;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{parse_balance, parse_confusion, RunConfig};
use crate::output::{csv_row, opt, render_table, Outputs};

const COMMON: &[&str] = &["seed", "out_dir"];
const MODEL: &[&str] = &[
    "data",
    "label",
    "trainer",
    "hidden",
    "preset",
    "population",
    "iterations",
    "weight_factor",
    "lower",
    "upper",
    "draws",
    "threshold",
    "output_activation",
    "learning_rate",
    "epochs",
    "parallel",
];
const FDO_ONLY: &[&str] = &["preset", "population", "iterations", "weight_factor", "lower", "upper", "draws"];
const BP_ONLY: &[&str] = &["learning_rate", "epochs"];

fn keys(extra: &[&[&'static str]]) -> Vec<&'static str> {
    let mut v = COMMON.to_vec();
    for group in extra {
        v.extend_from_slice(group);
    }
    v
}

pub fn train_keys() -> Vec<&'static str> {
    keys(&[MODEL, &["normalize"]])
}

pub fn crossval_keys() -> Vec<&'static str> {
    keys(&[MODEL, &["folds", "shuffle"]])
}

pub fn benchmark_keys() -> Vec<&'static str> {
    keys(&[&["function", "dimension", "runs", "population", "iterations", "weight_factor", "draws", "parallel"]])
}

pub fn generate_keys() -> Vec<&'static str> {
    keys(&[&["samples", "features", "separation", "balance", "output"]])
}

pub fn evaluate_keys() -> Vec<&'static str> {
    keys(&[&["model", "data", "label", "normalization", "threshold", "confusion"]])
}

/// What a command hands back to `main`.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Outputs,
    pub stdout: String,
}

pub fn seed(rc: &RunConfig) -> Result<u64> {
    rc.get_or("seed", DEFAULT_SEED)
}

pub fn out_dir(rc: &RunConfig) -> PathBuf {
    rc.path("out_dir").unwrap_or_else(|| PathBuf::from("out"))
}

fn load_data(rc: &RunConfig) -> Result<LabeledDataset> {
    let path: PathBuf = rc.require::<String>("data")?.into();
    let label = rc.get_or("label", "label".to_string())?;
    load_csv(&path, &label).with_context(|| format!("loading {}", path.display()))
}

/// Builds the FDO or BP trainer described by the settings.
pub fn build_trainer(rc: &RunConfig, inputs: usize) -> Result<Trainer> {
    let hidden = rc.get_or("hidden", hidden_size_rule(inputs))?;
    let topology = MlpTopology::new(inputs, hidden, 1)?;
    let threshold: Option<f64> = rc.get("threshold")?;
    let activation: OutputActivation = rc.get_or("output_activation", OutputActivation::default())?;
    let kind = rc.get_or("trainer", "fdo".to_string())?.to_ascii_lowercase();
    let stray = |group: &[&str], trainer: &str| -> Result<()> {
        if let Some(k) = group.iter().find(|k| rc.raw(k).is_some()) {
            bail!("setting `{k}` does not apply to trainer `{trainer}`");
        }
        Ok(())
    };
    match kind.as_str() {
        "fdo" => {
            stray(BP_ONLY, "fdo")?;
            let preset: Preset = rc.get_or("preset", Preset::Compact)?;
            let mut c = TrainingConfig::from_preset(topology, preset);
            c.population = rc.get_or("population", c.population)?;
            c.max_iterations = rc.get_or("iterations", c.max_iterations)?;
            c.weight_factor = rc.get_or("weight_factor", c.weight_factor)?;
            c.weight_bounds = (rc.get_or("lower", c.weight_bounds.0)?, rc.get_or("upper", c.weight_bounds.1)?);
            c.draws = rc.get_or("draws", c.draws)?;
            c.threshold = threshold.unwrap_or(c.threshold);
            c.output_activation = activation;
            c.parallel = rc.flag("parallel", false)?;
            c.fdo_config()?;
            Ok(Trainer::Fdo(c))
        }
        "bp" => {
            stray(FDO_ONLY, "bp")?;
            let mut c = BpConfig::new(topology);
            c.learning_rate = rc.get_or("learning_rate", c.learning_rate)?;
            c.epochs = rc.get_or("epochs", c.epochs)?;
            c.threshold = threshold.unwrap_or(c.threshold);
            c.output_activation = activation;
            Ok(Trainer::Backprop(c))
        }
        other => bail!("unknown trainer `{other}` (expected fdo or bp)"),
    }
}

/// Confusion matrix and metrics (with AUC) of a network on a dataset.
pub fn score(params: &MlpParams, data: &LabeledDataset, threshold: f64) -> Result<(ConfusionMatrix, MetricsReport)> {
    let outputs = predict_outputs(params, data)?;
    let predicted: Vec<usize> = outputs.iter().map(|y| predict_class(y, threshold)).collect();
    let cm = confusion_matrix(&predicted, data.labels())?;
    let mut report = metrics(&cm)?;
    let scores: Vec<f64> = outputs.iter().map(|y| y[y.len().min(2) - 1]).collect();
    report.auc = auc(&scores, data.labels())?;
    Ok((cm, report))
}

fn metric_rows(cm: &ConfusionMatrix, m: &MetricsReport) -> Vec<(&'static str, String)> {
    vec![
        ("tp", cm.tp.to_string()),
        ("fp", cm.fp.to_string()),
        ("fn", cm.fn_.to_string()),
        ("tn", cm.tn.to_string()),
        ("sensitivity", opt(m.sensitivity)),
        ("specificity", opt(m.specificity)),
        ("ppv", opt(m.ppv)),
        ("npv", opt(m.npv)),
        ("accuracy", opt(m.accuracy)),
        ("auc", opt(m.auc)),
    ]
}

fn confusion_table(cm: &ConfusionMatrix) -> String {
    render_table(
        &["actual \\ predicted", "1", "0"],
        &[
            vec!["1".into(), cm.tp.to_string(), cm.fn_.to_string()],
            vec!["0".into(), cm.fp.to_string(), cm.tn.to_string()],
        ],
    )
}

fn metrics_table(m: &MetricsReport) -> String {
    let f = |x| format_metric(x, 2);
    render_table(
        &["sensitivity", "specificity", "ppv", "npv", "accuracy", "auc"],
        &[vec![f(m.sensitivity), f(m.specificity), f(m.ppv), f(m.npv), f(m.accuracy), f(m.auc)]],
    )
}

fn percent(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{:.2}%", truncate_decimals(v * 100.0, 2)))
}

pub fn cmd_train(rc: &RunConfig) -> Result<CommandOutput> {
    let raw = load_data(rc)?;
    let data = if rc.flag("normalize", true)? { raw.min_max_normalize() } else { raw };
    let trainer = build_trainer(rc, data.n_features())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed(rc)?);
    let model = trainer.train(&data, &mut rng)?;
    let (cm, report) = score(&model.params, &data, trainer.threshold())?;

    let mut files = Outputs::default();
    files.add("model.txt", write_model(&model.params));
    files.add("convergence.csv", model.curve.to_csv());
    let mut m = csv_row(&["metric", "value"]);
    m += &csv_row(&["train_mse", &model.train_mse.to_string()]);
    m += &csv_row(&["classification_rate", &opt(report.accuracy)]);
    for (k, v) in metric_rows(&cm, &report) {
        m += &csv_row(&[k, &v]);
    }
    files.add("metrics.csv", m);
    if let Some(ranges) = data.normalization() {
        let mut n = csv_row(&["column", "min", "max"]);
        for (name, r) in data.column_names().iter().zip(ranges) {
            n += &csv_row(&[name.as_str(), &format!("{:?}", r.min), &format!("{:?}", r.max)]);
        }
        files.add("normalization.csv", n);
    }

    let kind = match trainer {
        Trainer::Fdo(_) => "fdo",
        Trainer::Backprop(_) => "bp",
    };
    let mut stdout = format!(
        "trained {kind} {} on {} samples\ntrain mse {}\nclassification rate {}\n\n",
        model.params.topology,
        data.len(),
        format_metric(Some(model.train_mse), 5),
        percent(report.accuracy),
    );
    stdout += &confusion_table(&cm);
    stdout.push('\n');
    stdout += &metrics_table(&report);
    Ok(CommandOutput { files, stdout })
}

/// The four report files of a cross-validation run.
pub fn crossval_files(report: &CrossValidationReport) -> Outputs {
    let mut files = Outputs::default();

    let mut folds = csv_row(&["fold", "role", "size", "mse", "classification_rate"]);
    for f in &report.folds {
        let k = f.fold.to_string();
        folds += &csv_row(&[&k, "training", &f.train_size.to_string(), &f.train_mse.to_string(), &f.train_rate.to_string()]);
        folds += &csv_row(&[&k, "testing", &f.test_size.to_string(), &f.test_mse.to_string(), &f.test_rate.to_string()]);
    }
    let a = &report.average;
    folds += &csv_row(&["average", "training", "", &a.train_mse.to_string(), &a.train_rate.to_string()]);
    folds += &csv_row(&["average", "testing", "", &a.test_mse.to_string(), &a.test_rate.to_string()]);
    files.add("folds.csv", folds);

    let header = ["fold", "passed_correct", "passed_total", "passed_rate", "failed_correct", "failed_total", "failed_rate"];
    let mut cls = csv_row(&header);
    let cs = &report.class_success;
    let row = |name: String, s: &fdo_mlp::evaluation::ClassSuccess| {
        csv_row(&[
            name,
            s.passed.correct.to_string(),
            s.passed.total.to_string(),
            opt(s.passed.rate()),
            s.failed.correct.to_string(),
            s.failed.total.to_string(),
            opt(s.failed.rate()),
        ])
    };
    for (i, s) in cs.folds.iter().enumerate() {
        cls += &row((i + 1).to_string(), s);
    }
    cls += &row("total".into(), &cs.totals);
    cls += &csv_row(&["average".into(), String::new(), String::new(), opt(cs.mean_fold_rates.0), String::new(), String::new(), opt(cs.mean_fold_rates.1)]);
    files.add("class_success.csv", cls);

    let mut met = csv_row(&["fold", "tp", "fp", "fn", "tn", "sensitivity", "specificity", "ppv", "npv", "accuracy", "auc"]);
    for f in &report.folds {
        let mut cells = vec![f.fold.to_string()];
        cells.extend(metric_rows(&f.confusion, &f.metrics).into_iter().map(|(_, v)| v));
        met += &csv_row(&cells);
    }
    let am = &report.average_metrics;
    met += &csv_row(&[
        "average".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        opt(am.sensitivity),
        opt(am.specificity),
        opt(am.ppv),
        opt(am.npv),
        opt(am.accuracy),
        opt(am.auc),
    ]);
    files.add("metrics.csv", met);

    let mut header = vec!["iteration".to_string()];
    header.extend(report.folds.iter().map(|f| format!("fold_{}", f.fold)));
    let mut curves = csv_row(&header);
    let len = report.folds.iter().map(|f| f.train_curve.len()).max().unwrap_or(0);
    for t in 0..len {
        let mut cells = vec![(t + 1).to_string()];
        cells.extend(report.folds.iter().map(|f| f.train_curve.values().get(t).map_or(String::new(), f64::to_string)));
        curves += &csv_row(&cells);
    }
    files.add("curves.csv", curves);
    files
}

pub fn crossval_text(report: &CrossValidationReport) -> String {
    let mse = |x: f64| format_metric(Some(x), 5);
    let mut rows = Vec::new();
    for f in &report.folds {
        rows.push(vec![f.fold.to_string(), "training".into(), f.train_size.to_string(), mse(f.train_mse), percent(Some(f.train_rate))]);
        rows.push(vec![String::new(), "testing".into(), f.test_size.to_string(), mse(f.test_mse), percent(Some(f.test_rate))]);
    }
    let a = &report.average;
    rows.push(vec!["average".into(), "training".into(), String::new(), mse(a.train_mse), percent(Some(a.train_rate))]);
    rows.push(vec![String::new(), "testing".into(), String::new(), mse(a.test_mse), percent(Some(a.test_rate))]);
    let mut out = render_table(&["fold", "role", "size", "mse", "rate"], &rows);
    out.push('\n');

    let cs = &report.class_success;
    let tally = |t: &fdo_mlp::evaluation::ClassTally| format!("{}/{}", t.correct, t.total);
    let mut rows: Vec<Vec<String>> = cs
        .folds
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), tally(&s.passed), percent(s.passed.rate()), tally(&s.failed), percent(s.failed.rate())])
        .collect();
    rows.push(vec!["total".into(), tally(&cs.totals.passed), percent(cs.totals.passed.rate()), tally(&cs.totals.failed), percent(cs.totals.failed.rate())]);
    out += &render_table(&["fold", "passed", "rate", "failed", "rate"], &rows);
    out.push('\n');

    let f = |x| format_metric(x, 2);
    let mut rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![r.fold.to_string(), f(m.sensitivity), f(m.specificity), f(m.ppv), f(m.npv), f(m.accuracy), f(m.auc)]
        })
        .collect();
    let m = &report.average_metrics;
    rows.push(vec!["average".into(), f(m.sensitivity), f(m.specificity), f(m.ppv), f(m.npv), f(m.accuracy), f(m.auc)]);
    out += &render_table(&["fold", "sensitivity", "specificity", "ppv", "npv", "accuracy", "auc"], &rows);
    out
}

pub fn cmd_crossval(rc: &RunConfig) -> Result<CommandOutput> {
    let data = load_data(rc)?;
    let trainer = build_trainer(rc, data.n_features())?;
    let cv = CrossValidationConfig {
        folds: rc.get_or("folds", 5)?,
        shuffle: rc.flag("shuffle", false)?,
        parallel: rc.flag("parallel", false)?,
    };
    if cv.folds < 2 {
        bail!("folds must be at least 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed(rc)?);
    let report = cross_validate(&data, &cv, &trainer, &mut rng)?;
    Ok(CommandOutput { files: crossval_files(&report), stdout: crossval_text(&report) })
}

/// One benchmark repeat.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub seed: u64,
    pub best: f64,
    pub random_search_best: f64,
    pub evaluations: usize,
    pub curve: Vec<f64>,
}

pub fn cmd_benchmark(rc: &RunConfig) -> Result<CommandOutput> {
    let name: String = rc.get_or("function", "sphere".to_string())?;
    let dimension = rc.get_or("dimension", 10usize)?;
    let runs = rc.get_or("runs", 10usize)?;
    if runs == 0 {
        bail!("runs must be at least 1");
    }
    let function = BenchmarkFunction::lookup(&name, dimension)?;
    let mut base = FdoConfig::new(function.bounds());
    base.population = rc.get_or("population", base.population)?;
    base.max_iterations = rc.get_or("iterations", base.max_iterations)?;
    base.weight_factor = rc.get_or("weight_factor", base.weight_factor)?;
    base.draws = rc.get_or::<DrawMode>("draws", base.draws)?;
    base.validate()?;
    let first_seed = seed(rc)?;

    let run = |r: usize| -> Result<BenchmarkRun> {
        let mut config = base.clone();
        config.seed = first_seed.wrapping_add(r as u64);
        let result = minimize(&function, &config)?;
        let mut rs_rng = ChaCha8Rng::seed_from_u64(config.seed);
        rs_rng.set_stream(1);
        let (_, rs) = random_search(&function, &function.bounds(), result.evaluations, &mut rs_rng)?;
        Ok(BenchmarkRun {
            seed: config.seed,
            best: result.best_fitness,
            random_search_best: rs,
            evaluations: result.evaluations,
            curve: result.curve.values().to_vec(),
        })
    };
    let results: Vec<BenchmarkRun> = if rc.flag("parallel", false)? {
        (0..runs).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..runs).map(run).collect::<Result<_>>()?
    };

    let bests: Vec<f64> = results.iter().map(|r| r.best).collect();
    let stats = run_statistics(&bests, Direction::LowerIsBetter)?;
    let wins = results.iter().filter(|r| r.best < r.random_search_best).count();

    let mut files = Outputs::default();
    let mut runs_csv = csv_row(&["run", "seed", "best_fitness", "random_search_best", "evaluations"]);
    for (i, r) in results.iter().enumerate() {
        runs_csv += &csv_row(&[
            (i + 1).to_string(),
            r.seed.to_string(),
            format!("{:?}", r.best),
            format!("{:?}", r.random_search_best),
            r.evaluations.to_string(),
        ]);
    }
    files.add("runs.csv", runs_csv);
    let mut stats_csv = csv_row(&["avg", "std", "best", "worst"]);
    stats_csv += &csv_row(&[stats.avg, stats.std, stats.best, stats.worst].map(|v| format!("{v:?}")));
    files.add("stats.csv", stats_csv);
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=runs).map(|r| format!("run_{r}")));
    let mut curves = csv_row(&header);
    for t in 0..base.max_iterations {
        let mut cells = vec![(t + 1).to_string()];
        cells.extend(results.iter().map(|r| format!("{:?}", r.curve[t])));
        curves += &csv_row(&cells);
    }
    files.add("curves.csv", curves);

    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, r)| vec![(i + 1).to_string(), r.seed.to_string(), format!("{:e}", r.best), format!("{:e}", r.random_search_best)])
        .collect();
    let mut stdout = format!(
        "{} d={dimension}, population {}, {} iterations, {runs} runs\n\n",
        function.name(),
        base.population,
        base.max_iterations
    );
    stdout += &render_table(&["run", "seed", "fdo best", "random search"], &rows);
    stdout += &format!(
        "\navg {:e}  std {:e}  best {:e}  worst {:e}\nfdo beat random search on {wins}/{runs} runs\n",
        stats.avg, stats.std, stats.best, stats.worst
    );
    Ok(CommandOutput { files, stdout })
}

pub fn cmd_generate(rc: &RunConfig) -> Result<CommandOutput> {
    let spec = SyntheticSpec {
        samples: rc.get_or("samples", 287)?,
        features: rc.get_or("features", 18)?,
        class_separation: rc.get_or("separation", 6.0)?,
        class_balance: parse_balance(rc.raw("balance").unwrap_or("183/287"))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed(rc)?);
    let data = generate_synthetic(&spec, &mut rng)?;
    let name = rc.get_or("output", "synthetic.csv".to_string())?;
    let counts = data.class_counts();
    let mut files = Outputs::default();
    files.add(name.clone(), data.to_csv_string()?);
    let stdout = format!(
        "{name}: {} samples x {} features, {} positive / {} negative\n",
        data.len(),
        data.n_features(),
        counts.get(1).copied().unwrap_or(0),
        counts.first().copied().unwrap_or(0)
    );
    Ok(CommandOutput { files, stdout })
}

/// Reads a `column,min,max` file written by `train`.
pub fn read_normalization(path: &Path) -> Result<(Vec<String>, Vec<ColumnRange>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut names = Vec::new();
    let mut ranges = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!("{} row {}: expected column,min,max", path.display(), i + 1);
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| anyhow!("{} row {}: `{s}`: {e}", path.display(), i + 1));
        names.push(rec[0].to_string());
        ranges.push(ColumnRange { min: num(&rec[1])?, max: num(&rec[2])? });
    }
    Ok((names, ranges))
}

pub fn cmd_evaluate(rc: &RunConfig) -> Result<CommandOutput> {
    let (cm, report, header) = if let Some(spec) = rc.raw("confusion") {
        for k in ["model", "data", "normalization"] {
            if rc.raw(k).is_some() {
                bail!("`confusion` cannot be combined with `{k}`");
            }
        }
        let [tp, fp, fn_, tn] = parse_confusion(spec)?;
        let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
        (cm, metrics(&cm)?, format!("confusion counts {tp},{fp},{fn_},{tn}\n\n"))
    } else {
        let model_path: PathBuf = rc
            .require::<String>("model")
            .map_err(|_| anyhow!("evaluate needs either `model` and `data`, or `confusion`"))?
            .into();
        let text = std::fs::read_to_string(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
        let params = read_model(&text).with_context(|| format!("parsing {}", model_path.display()))?;
        let mut data = load_data(rc)?;
        if let Some(path) = rc.path("normalization") {
            let (names, ranges) = read_normalization(&path)?;
            data = data.select_features(&names)?.normalize_with(&ranges)?;
        }
        if data.n_features() != params.topology.inputs {
            bail!(
                "model {} expects {} features but the data has {}",
                params.topology,
                params.topology.inputs,
                data.n_features()
            );
        }
        let threshold = rc.get_or("threshold", 0.5)?;
        let (cm, report) = score(&params, &data, threshold)?;
        (cm, report, format!("model {} on {} samples\n\n", params.topology, data.len()))
    };

    let mut csv = csv_row(&["metric", "value"]);
    for (k, v) in metric_rows(&cm, &report) {
        csv += &csv_row(&[k, &v]);
    }
    let mut files = Outputs::default();
    files.add("evaluation.csv", csv);
    let mut stdout = header;
    stdout += &confusion_table(&cm);
    stdout.push('\n');
    stdout += &metrics_table(&report);
    Ok(CommandOutput { files, stdout })
}
