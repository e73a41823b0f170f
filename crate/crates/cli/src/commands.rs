use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use collapse_lab::generators::{fit, GeneratorSpec};
use collapse_lab::looper::{
    compare_traces, correlate_traces, run_loop_with_progress, LoopConfig, LoopTrace, Paradigm,
};
use collapse_lab::metrics::{
    frechet_gaussian_distance, generalization_score, kl_entropy, mnnd, moment_summary,
};
use collapse_lab::selection::{select, SelectionKind, SelectionPolicy};
use collapse_lab::tensorset::{load_pointset, save_pointset, Format};
use collapse_lab::{DistanceMetric, Error, PointSet, SourceTag};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::parse;
use crate::runfile::RunFile;
use crate::{AnalyzeMode, Cli, Command, InputArgs, LoopArgs, PolicyFlags};

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Entropy { input, gamma } => {
            let (ps, metric) = load_input(&input)?;
            print_json(&kl_entropy(&ps, gamma, &metric)?)
        }
        Command::Gs { input, reference } => {
            let (generated, metric) = load_input(&input)?;
            let training = load(&reference, input.format.as_deref())?;
            let gs = generalization_score(&generated, &training, &metric)?;
            print_json(
                &json!({ "gs": gs, "generatedSize": generated.len(), "referenceSize": training.len() }),
            )
        }
        Command::Mnnd { input } => {
            let (ps, metric) = load_input(&input)?;
            print_json(&json!({ "mnnd": mnnd(&ps, &metric)?, "size": ps.len() }))
        }
        Command::Frechet { input, reference } => {
            let (a, metric) = load_input(&input)?;
            let b = load(&reference, input.format.as_deref())?;
            let ma = moment_summary(metric.prepare(&a)?.as_ref())?;
            let mb = moment_summary(metric.prepare(&b)?.as_ref())?;
            let d = frechet_gaussian_distance(&ma, &mb)?;
            print_json(&json!({ "frechet": d, "input": ma, "reference": mb }))
        }
        Command::Select {
            input,
            n,
            policy,
            tau0,
            alpha,
            seed,
            initial,
            out,
        } => {
            let (pool, metric) = load_input(&input)?;
            let mut policy = SelectionPolicy::new(selection_kind(&policy, tau0, alpha)?, seed)
                .with_metric(metric);
            if let Some(i) = initial {
                policy = policy.with_initial(i);
            }
            let result = select(&pool, n, &policy)?;
            if let Some(out) = out {
                save(&pool.subset(&result.indices), &out, input_format(&input)?)?;
            }
            print_json(&result)
        }
        Command::Gen {
            input,
            generator,
            samples,
            seed,
            tag,
            out,
        } => {
            let training = load(&input.input, input.format.as_deref())?;
            let spec = GeneratorSpec {
                kind: parse::generator(&generator)?,
                seed,
            };
            let model = fit(&spec, &training)?;
            let m = samples.unwrap_or(training.len());
            let sample = model.sample(m, seed, SourceTag::synthetic(tag)?)?;
            save(&sample, &out, format_for(&out, input.format.as_deref())?)?;
            print_json(&json!({
                "generator": spec,
                "trainingSize": training.len(),
                "samples": m,
                "diagnostics": model.diagnostics,
            }))
        }
        Command::Loop(args) => run_loop_command(*args, cli.canonical),
        Command::Analyze { mode, traces, out } => {
            let traces = traces
                .iter()
                .map(|p| read_trace(p))
                .collect::<CliResult<Vec<_>>>()?;
            let report = match mode {
                AnalyzeMode::Compare => {
                    let [a, b] = traces.as_slice() else {
                        return Err(CliError::config("compare takes exactly two traces"));
                    };
                    let summary = compare_traces(a, b).map_err(|e| match e {
                        Error::Dimension(m) => {
                            CliError::config(format!("traces do not match: {m}"))
                        }
                        other => other.into(),
                    })?;
                    serde_json::to_value(summary).expect("summary serialises")
                }
                AnalyzeMode::Correlate => {
                    serde_json::to_value(correlate_traces(&traces)?).expect("report serialises")
                }
            };
            if let Some(out) = out {
                write_text(&out, &to_pretty(&report))?;
            }
            print_json(&report)
        }
    }
}

fn selection_kind(flags: &PolicyFlags, tau0: Option<f64>, alpha: f64) -> CliResult<SelectionKind> {
    let kind = if flags.greedy {
        SelectionKind::Greedy
    } else if flags.random {
        SelectionKind::Random
    } else {
        let tau0 = tau0.ok_or_else(|| CliError::config("--threshold needs an explicit --tau0"))?;
        SelectionKind::ThresholdDecay { tau0, alpha }
    };
    kind.validate()?;
    Ok(kind)
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serialises");
    s.push('\n');
    s
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    print!("{}", to_pretty(value));
    Ok(())
}

fn format_for(path: &Path, flag: Option<&str>) -> CliResult<Format> {
    match flag {
        Some(f) => Ok(f.parse()?),
        None => Ok(Format::from_path(path)),
    }
}

fn input_format(args: &InputArgs) -> CliResult<Format> {
    format_for(&args.input, args.format.as_deref())
}

fn with_path(path: &Path, err: Error) -> CliError {
    let mut e = CliError::from(err);
    e.message = format!("{}: {}", path.display(), e.message);
    e
}

fn load(path: &Path, format: Option<&str>) -> CliResult<PointSet> {
    load_pointset(path, format_for(path, format)?).map_err(|e| with_path(path, e))
}

fn save(ps: &PointSet, path: &Path, format: Format) -> CliResult<()> {
    save_pointset(ps, path, format).map_err(|e| with_path(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_input(args: &InputArgs) -> CliResult<(PointSet, DistanceMetric)> {
    let metric = parse::metric(args.metric.as_deref(), args.feature.as_deref())?;
    Ok((load(&args.input, args.format.as_deref())?, metric))
}

fn read_trace(path: &Path) -> CliResult<LoopTrace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    LoopTrace::from_json(&text).map_err(|e| with_path(path, e))
}

struct LoopPlan {
    config: LoopConfig,
    input: PathBuf,
    format: Option<String>,
    json: PathBuf,
    csv: PathBuf,
}

fn plan_loop(args: LoopArgs) -> CliResult<(LoopPlan, PointSet)> {
    let file = match &args.config {
        Some(path) => RunFile::load(path)?,
        None => RunFile::default(),
    };
    let pick = |flag: Option<String>, key: &str| flag.or_else(|| file.get(key).map(str::to_string));
    let pick_path =
        |flag: Option<PathBuf>, key: &str| flag.or_else(|| file.get(key).map(PathBuf::from));

    let input = pick_path(args.input, "input")
        .ok_or_else(|| CliError::config("loop needs --input (real dataset)"))?;
    let json_path = pick_path(args.out, "out")
        .ok_or_else(|| CliError::config("loop needs --out (trace JSON path)"))?;
    let csv_path = pick_path(args.csv, "csv").unwrap_or_else(|| json_path.with_extension("csv"));
    let format = pick(args.format, "format");

    let paradigm = match pick(args.paradigm, "paradigm") {
        Some(p) => parse::paradigm(&p)?,
        None => Paradigm::Replace,
    };
    let iterations = parse::positive(
        "iterations",
        &pick(args.iterations, "iterations").unwrap_or_else(|| "1".into()),
    )?;
    let generator =
        parse::generator(&pick(args.generator, "generator").unwrap_or_else(|| "gaussian".into()))?;
    let selection = match pick(args.selection, "selection") {
        Some(s) => parse::selection(&s, 0.95)?,
        None => None,
    };
    let generation_multiplier = pick(args.generation_multiplier, "generationMultiplier")
        .map(|s| parse::positive::<f64>("generation multiplier", &s))
        .transpose()?;
    let metric = parse::metric(
        pick(args.metric, "metric").as_deref(),
        pick(args.feature, "feature").as_deref(),
    )?;
    let gamma = parse::positive(
        "gamma",
        &pick(args.gamma, "gamma").unwrap_or_else(|| "1".into()),
    )?;
    let master_seed = parse::unsigned(
        "seed",
        &pick(args.seed, "masterSeed").unwrap_or_else(|| "0".into()),
    )?;
    let pool_limit = match pick(args.pool_limit, "poolLimit") {
        Some(s) => parse::positive("pool limit", &s)?,
        None => collapse_lab::looper::DEFAULT_POOL_LIMIT,
    };
    let train_size = pick(args.train_size, "trainSize")
        .map(|s| parse::positive::<usize>("train size", &s))
        .transpose()?;

    let real = load(&input, format.as_deref())?;
    let config = LoopConfig {
        paradigm,
        iterations,
        train_size: train_size.unwrap_or(real.len()),
        generator,
        selection,
        generation_multiplier,
        metric,
        gamma,
        master_seed,
        pool_limit,
    };
    config.validate()?;
    let plan = LoopPlan {
        config,
        input,
        format,
        json: json_path,
        csv: csv_path,
    };
    Ok((plan, real))
}

fn run_loop_command(args: LoopArgs, canonical: bool) -> CliResult<()> {
    let (plan, real) = plan_loop(args)?;
    let total = plan.config.iterations;
    let mut trace = run_loop_with_progress(&plan.config, &real, |r| {
        let real_frac = r
            .source_proportions
            .get(&SourceTag::Real)
            .copied()
            .unwrap_or(0.0);
        eprintln!(
            "[{}/{}] entropy={:.6} duplicates={} gs={:.6} mnnd={:.6} trace_cov={:.6} frechet_real={:.6} frac_real={:.4}",
            r.iteration,
            total,
            r.entropy.estimate,
            r.duplicate_count,
            r.gs_value,
            r.mnnd_value,
            r.trace_cov,
            r.frechet_to_real,
            real_frac
        );
    })?;
    if !canonical {
        trace.run_timestamp = Some(Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
    }
    let mut json_text = trace.to_json();
    json_text.push('\n');
    write_text(&plan.json, &json_text)?;
    write_text(&plan.csv, &trace.to_csv())?;
    print_json(&json!({
        "config": plan.config,
        "input": plan.input,
        "format": plan.format,
        "trace": plan.json,
        "csv": plan.csv,
    }))
}
