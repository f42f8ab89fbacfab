use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cpens_core::data::{generate_synthetic, load_csv, load_csv_with_schema, write_csv, CsvOptions, SyntheticConfig};
use cpens_core::evaluation::{
    friedman_test, run_cv, run_grid, wilcoxon_signed_rank, CvPlan, CvResult, FoldId, GridSpec, Summary,
};
use cpens_core::{BaseMode, ConformalEnsemble, Dataset, EnsembleConfig, NbParams, Sampling};

use crate::args::{
    CompareArgs, DataArgs, EvaluateArgs, FormatArg, GenDataArgs, PredictArgs, ProtocolArgs, TrainArgs,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{fingerprint, Manifest};
use crate::report;

/// Write to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| cpens_core::Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into())
}

fn load(data: &DataArgs) -> CliResult<(Dataset, String)> {
    let bytes = read_bytes(&data.data)?;
    let dataset = load_csv(&data.data, &CsvOptions::new(data.label_column.clone()))?;
    Ok((dataset, fingerprint(&bytes)))
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let cfg = SyntheticConfig {
        n_examples: args.n,
        n_features: args.features,
        class_balance: args.balance,
        separation: args.separation,
        noise_rate: args.noise,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&cfg)?;
    let mut bytes = Vec::new();
    write_csv(&dataset, &mut bytes, &args.label_column)?;
    emit(args.out.as_deref(), &bytes)?;
    if let Some(out) = &args.out {
        Manifest::new("gen-data", args.seed, fingerprint(&bytes))
            .with("n", args.n)
            .with("features", args.features)
            .with("balance", args.balance)
            .with("separation", args.separation)
            .with("noise", args.noise)
            .with("label_column", &args.label_column)
            .write_beside(out)?;
    }
    Ok(())
}

fn describe_config(m: Manifest, c: &EnsembleConfig) -> Manifest {
    m.with("n_estimators", c.n_estimators)
        .with("feature_fraction", c.feature_fraction)
        .with("bootstrap_fraction", c.bootstrap_fraction)
        .with("sampling", c.sampling.as_str())
        .with("threshold", c.credibility_threshold.map_or("none".to_string(), |t| t.to_string()))
        .with("base_mode", c.base_mode)
        .with("feature_report_fraction", c.feature_report_fraction)
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let (dataset, fp) = load(&args.data)?;
    let config = EnsembleConfig {
        n_estimators: args.n_estimators,
        feature_fraction: args.feature_fraction,
        bootstrap_fraction: args.bootstrap_fraction,
        sampling: args.sampling.into(),
        credibility_threshold: args.threshold,
        base_mode: args.base_mode.into(),
        seed: args.seed,
        feature_report_fraction: args.report_fraction,
        nb: NbParams::default(),
    };
    let ensemble = ConformalEnsemble::build(&dataset, &config)?;
    emit(Some(&args.model_out), ensemble.to_text().as_bytes())?;
    describe_config(Manifest::new("train", args.seed, fp), &config)
        .with("data", args.data.data.display())
        .with("label_column", &args.data.label_column)
        .write_beside(&args.model_out)
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.model).map_err(|source| CliError::ModelRead {
        path: args.model.clone(),
        source,
    })?;
    let ensemble = ConformalEnsemble::from_text(&text)?;
    let bytes = read_bytes(&args.data)?;
    let tests = load_csv_with_schema(&args.data, ensemble.schema(), ensemble.classes(), None)?;
    let verdicts = ensemble.predict_batch_with_threshold(tests.examples(), args.threshold)?;
    let out = match args.format {
        FormatArg::Csv => report::predictions_csv(&verdicts, ensemble.classes())?,
        FormatArg::Jsonl => report::predictions_jsonl(&verdicts, ensemble.classes()),
    };
    emit(args.out.as_deref(), &out)?;
    if let Some(path) = &args.out {
        Manifest::new("predict", ensemble.config().seed, fingerprint(&bytes))
            .with("model", args.model.display())
            .with("model_sha256", fingerprint(text.as_bytes()))
            .with("threshold", args.threshold.map_or("none".to_string(), |t| t.to_string()))
            .write_beside(path)?;
    }
    Ok(())
}

fn plan(protocol: &ProtocolArgs, dataset: &Dataset) -> CliResult<CvPlan> {
    let positive = dataset.label_of(&protocol.positive_class).ok_or_else(|| {
        CliError::Usage(format!(
            "positive class `{}` is not one of {:?}",
            protocol.positive_class,
            dataset.classes()
        ))
    })?;
    Ok(CvPlan::new(protocol.k, protocol.repeats, protocol.seed, positive))
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let (dataset, fp) = load(&args.data)?;
    let plan = plan(&args.protocol, &dataset)?;
    let mut base_modes: Vec<BaseMode> = args.base_modes.iter().map(|&m| m.into()).collect();
    base_modes.sort();
    base_modes.dedup();
    let spec = GridSpec {
        n_estimators: args.n_estimators.clone(),
        feature_fractions: args.feature_fractions.clone(),
        thresholds: args.thresholds.clone(),
        base_modes,
        bootstrap_fraction: args.bootstrap_fraction,
        feature_report_fraction: args.report_fraction,
        nb: NbParams::default(),
        include_simple_nb: !args.no_simple_nb,
    };
    let grid = run_grid(&dataset, &spec, &plan)?;
    emit(args.out.as_deref(), grid.to_csv().as_bytes())?;

    let summary = report::grid_summary(&grid);
    match &args.summary {
        Some(path) => emit(Some(path), summary.as_bytes())?,
        None => eprint!("{summary}"),
    }
    if let Some(out) = &args.out {
        Manifest::new("evaluate", plan.seed, fp)
            .with("data", args.data.data.display())
            .with("label_column", &args.data.label_column)
            .with("positive_class", &args.protocol.positive_class)
            .with("k", plan.k)
            .with("repeats", plan.repeats)
            .with("n_estimators", list(&spec.n_estimators))
            .with("feature_fractions", list(&spec.feature_fractions))
            .with("thresholds", list(&spec.thresholds))
            .with("base_modes", list(&spec.base_modes))
            .with("bootstrap_fraction", spec.bootstrap_fraction)
            .with("feature_report_fraction", spec.feature_report_fraction)
            .with("simple_nb", spec.include_simple_nb)
            .write_beside(out)?;
    }
    Ok(())
}

/// Parse `key=value` pairs (`mode`, `n`, `ff`, `bf`, `threshold`, `sampling`, `report`) or `simple-nb`.
pub fn parse_config(spec: &str, seed: u64) -> CliResult<EnsembleConfig> {
    let spec = spec.trim();
    if spec == "simple-nb" {
        return Ok(EnsembleConfig { seed, ..EnsembleConfig::simple_nb() });
    }
    let mut c = EnsembleConfig { seed, ..EnsembleConfig::default() };
    let bad = |what: &str| CliError::Usage(format!("config `{spec}`: {what}"));
    for pair in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = pair.split_once('=').ok_or_else(|| bad(&format!("`{pair}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number")));
        match key {
            "mode" => c.base_mode = value.parse().map_err(|e: cpens_core::Error| bad(&e.to_string()))?,
            "sampling" => c.sampling = value.parse::<Sampling>().map_err(|e| bad(&e.to_string()))?,
            "n" => c.n_estimators = value.parse().map_err(|_| bad(&format!("`{value}` is not a count")))?,
            "ff" => c.feature_fraction = num(value)?,
            "bf" => c.bootstrap_fraction = num(value)?,
            "report" => c.feature_report_fraction = num(value)?,
            "threshold" => {
                c.credibility_threshold = if value == "none" { None } else { Some(num(value)?) };
            }
            other => return Err(bad(&format!("unknown key `{other}`"))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    if args.configs.len() < 2 {
        return Err(CliError::Usage("compare needs at least two --config values".into()));
    }
    let (dataset, fp) = load(&args.data)?;
    let plan = plan(&args.protocol, &dataset)?;
    let configs = args
        .configs
        .iter()
        .map(|s| parse_config(s, plan.seed))
        .collect::<CliResult<Vec<_>>>()?;
    let results = configs
        .iter()
        .map(|c| run_cv(&dataset, c, &plan))
        .collect::<cpens_core::Result<Vec<CvResult>>>()?;
    let ids: Vec<FoldId> = (0..plan.repeats)
        .flat_map(|repeat| (0..plan.k).map(move |fold| FoldId { repeat, fold }))
        .collect();

    let mut out = String::from("# paired F-measure per iteration\n");
    out.push_str(&report::paired_table(&args.configs, &results, &ids));
    out.push_str("# mean F-measure\n");
    for (name, r) in args.configs.iter().zip(&results) {
        let _ = writeln!(out, "{name}: {}", summary_text(r.report.f_measure));
    }

    out.push_str("# Wilcoxon signed-rank (two-sided, pairs with an undefined F-measure dropped)\n");
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let (a, b): (Vec<f64>, Vec<f64>) = results[i]
                .folds
                .iter()
                .zip(&results[j].folds)
                .filter_map(|(x, y)| Some((x.f_measure?, y.f_measure?)))
                .unzip();
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            let winner = match mean(&a).partial_cmp(&mean(&b)) {
                Some(std::cmp::Ordering::Greater) => args.configs[i].as_str(),
                Some(std::cmp::Ordering::Less) => args.configs[j].as_str(),
                _ => "tie",
            };
            let _ = write!(out, "{} vs {}: ", args.configs[i], args.configs[j]);
            match wilcoxon_signed_rank(&a, &b) {
                Ok(w) => {
                    let stat = w.statistic.map_or("undefined".to_string(), |s| s.to_string());
                    let _ = writeln!(
                        out,
                        "W={stat} W+={} W-={} nonzero={} p={} method={} higher_mean_f={winner}",
                        w.w_plus,
                        w.w_minus,
                        w.n_nonzero,
                        w.p_value,
                        if w.exact { "exact" } else { "normal" }
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "not computed: {e}");
                }
            }
        }
    }

    if results.len() >= 3 {
        let complete: Vec<usize> = (0..ids.len())
            .filter(|&i| results.iter().all(|r| r.folds[i].f_measure.is_some()))
            .collect();
        let matrix: Vec<Vec<f64>> = results
            .iter()
            .map(|r| complete.iter().map(|&i| r.folds[i].f_measure.expect("filtered")).collect())
            .collect();
        let _ = writeln!(out, "# Friedman ({} configurations, {} blocks)", results.len(), complete.len());
        match friedman_test(&matrix) {
            Ok(f) => {
                let ranks = f.mean_ranks.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
                let _ = writeln!(out, "statistic={} df={} p={} mean_ranks={ranks}", f.statistic, f.df, f.p_value);
            }
            Err(e) => {
                let _ = writeln!(out, "not computed: {e}");
            }
        }
    }

    emit(args.out.as_deref(), out.as_bytes())?;
    if let Some(path) = &args.out {
        let mut m = Manifest::new("compare", plan.seed, fp)
            .with("data", args.data.data.display())
            .with("positive_class", &args.protocol.positive_class)
            .with("k", plan.k)
            .with("repeats", plan.repeats);
        for c in &args.configs {
            m = m.with("config", c);
        }
        m.write_beside(path)?;
    }
    Ok(())
}

fn summary_text(s: Option<Summary>) -> String {
    s.map_or("undefined".to_string(), |s| format!("{:.3}±{:.3} (folds={})", s.mean, s.sd, s.count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_specs() {
        let c = parse_config("mode=posterior,n=25,ff=0.5,threshold=0.9", 3).unwrap();
        assert_eq!(c.base_mode, BaseMode::StandardPosterior);
        assert_eq!((c.n_estimators, c.feature_fraction, c.credibility_threshold, c.seed), (25, 0.5, Some(0.9), 3));
        let s = parse_config("simple-nb", 1).unwrap();
        assert_eq!(s.sampling, Sampling::Identity);
        assert_eq!(s.n_estimators, 1);
        for bad in ["mode=nope", "n=abc", "ff=2", "colour=red", "n"] {
            let e = parse_config(bad, 0).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}");
        }
    }
}
