//! The self-consuming loop.
//!
//! Iteration `n` trains a fresh generator on `D_n`, samples `G_n`, scores
//! `G_n` against `D_n`, then builds `D_{n+1}` from the paradigm's candidate
//! pool. Each [`IterationRecord`] carries the generalization score of `G_n`
//! against `D_n`, the entropy of `D_n` (`training_entropy`) and the full set
//! of dataset metrics for `D_{n+1}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{fit, GeneratorKind, GeneratorSpec};
use crate::metrics::{
    frechet_gaussian_distance, generalization_score, kl_entropy, mnnd, moment_summary, pearson,
    EntropyReport, MomentSummary,
};
use crate::seed::{derive_seed, SeedRole};
use crate::selection::{select, source_proportions, SelectionKind, SelectionPolicy};
use crate::tensorset::{DistanceMetric, PointSet, SourceTag};
use crate::SCHEMA_VERSION;

pub const DEFAULT_POOL_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Train only on the previous model's output.
    Replace,
    /// Train on real data plus every synthetic generation so far.
    Accumulate,
    /// Draw a fixed-size training set from the accumulated pool.
    AccumulateSubsample,
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "replace" => Ok(Paradigm::Replace),
            "accumulate" => Ok(Paradigm::Accumulate),
            "accumulatesubsample" => Ok(Paradigm::AccumulateSubsample),
            _ => Err(Error::Config(format!("unknown paradigm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoopConfig {
    pub paradigm: Paradigm,
    pub iterations: usize,
    /// N: training-set size for `Replace` and `AccumulateSubsample`, and the
    /// size of every synthetic generation.
    pub train_size: usize,
    pub generator: GeneratorKind,
    #[serde(default)]
    pub selection: Option<SelectionKind>,
    /// Candidate pool size factor for `Replace`; defaults to 2 with a
    /// selection policy and 1 without.
    #[serde(default)]
    pub generation_multiplier: Option<f64>,
    #[serde(default)]
    pub metric: DistanceMetric,
    pub gamma: usize,
    pub master_seed: u64,
    /// Maximum accumulated pool size.
    pub pool_limit: usize,
}

impl LoopConfig {
    pub fn new(
        paradigm: Paradigm,
        iterations: usize,
        train_size: usize,
        generator: GeneratorKind,
    ) -> Self {
        LoopConfig {
            paradigm,
            iterations,
            train_size,
            generator,
            selection: None,
            generation_multiplier: None,
            metric: DistanceMetric::default(),
            gamma: 1,
            master_seed: 0,
            pool_limit: DEFAULT_POOL_LIMIT,
        }
    }

    pub fn with_selection(mut self, selection: SelectionKind) -> Self {
        self.selection = Some(selection);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn effective_multiplier(&self) -> f64 {
        self.generation_multiplier
            .unwrap_or(if self.selection.is_some() { 2.0 } else { 1.0 })
    }

    /// |G_n| for every iteration.
    pub fn generation_size(&self) -> usize {
        match self.paradigm {
            Paradigm::Replace => {
                (self.effective_multiplier() * self.train_size as f64).ceil() as usize
            }
            Paradigm::Accumulate | Paradigm::AccumulateSubsample => self.train_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.train_size == 0 {
            return Err(Error::Config("train size must be >= 1".into()));
        }
        if self.gamma == 0 {
            return Err(Error::Config("gamma must be >= 1".into()));
        }
        if let Some(m) = self.generation_multiplier {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!(
                    "generation multiplier must be positive, got {m}"
                )));
            }
        }
        self.generator.validate()?;
        if let Some(sel) = &self.selection {
            sel.validate()?;
            match self.paradigm {
                Paradigm::Accumulate => return Err(Error::Config(
                    "the accumulate paradigm trains on the whole pool; selection does not apply"
                        .into(),
                )),
                Paradigm::Replace if self.generation_size() < self.train_size => {
                    return Err(Error::Config(format!(
                        "replace with selection needs at least {} candidates, multiplier gives {}",
                        self.train_size,
                        self.generation_size()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn policy(&self, kind: SelectionKind, iteration: usize) -> SelectionPolicy {
        SelectionPolicy::new(
            kind,
            derive_seed(self.master_seed, iteration as u64, SeedRole::Select),
        )
        .with_metric(self.metric.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub iteration: usize,
    /// Entropy of `D_{n+1}`, the training set produced by this iteration.
    pub entropy: EntropyReport,
    /// Entropy estimate of `D_n`, the set this iteration's model was fit on.
    pub training_entropy: f64,
    /// Generalization score of `G_n` against `D_n`.
    pub gs_value: f64,
    pub mnnd_value: f64,
    pub trace_cov: f64,
    pub frechet_to_real: f64,
    pub source_proportions: BTreeMap<SourceTag, f64>,
    pub duplicate_count: usize,
    pub training_size: usize,
    pub generated_size: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoopTrace {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_timestamp: Option<String>,
    pub config: LoopConfig,
    pub real_size: usize,
    pub real_reference: MomentSummary,
    pub records: Vec<IterationRecord>,
}

pub fn run_loop(config: &LoopConfig, real: &PointSet) -> Result<LoopTrace> {
    run_loop_with_progress(config, real, |_| {})
}

/// Like [`run_loop`], calling `progress` with each record as soon as its
/// iteration finishes.
pub fn run_loop_with_progress<F>(
    config: &LoopConfig,
    real: &PointSet,
    mut progress: F,
) -> Result<LoopTrace>
where
    F: FnMut(&IterationRecord),
{
    config.validate()?;
    if real.sources().iter().any(|s| !s.is_real()) {
        return Err(Error::Value("real data must be tagged real".into()));
    }
    if real.len() < config.train_size {
        return Err(Error::InsufficientPoints {
            needed: config.train_size,
            got: real.len(),
        });
    }
    let accumulates = matches!(
        config.paradigm,
        Paradigm::Accumulate | Paradigm::AccumulateSubsample
    );
    if accumulates {
        let final_pool = real.len() + config.iterations * config.generation_size();
        if final_pool > config.pool_limit {
            return Err(Error::Config(format!(
                "accumulated pool would reach {final_pool} points, limit is {}",
                config.pool_limit
            )));
        }
    }

    let metric = &config.metric;
    let real_reference = moment_summary(metric.prepare(real)?.as_ref())?;
    let mut training = match config.paradigm {
        Paradigm::Accumulate => real.clone(),
        _ => real.head(config.train_size),
    };
    let mut pool = real.clone();
    let mut training_entropy = kl_entropy(&training, config.gamma, metric)?.estimate;

    let mut records = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let mut step = || -> Result<(IterationRecord, PointSet)> {
            let it = iteration as u64;
            let spec = GeneratorSpec {
                kind: config.generator,
                seed: derive_seed(config.master_seed, it, SeedRole::Fit),
            };
            let model = fit(&spec, &training)?;
            let tag = SourceTag::synthetic(u32::try_from(iteration).unwrap_or(u32::MAX))?;
            let generated = model.sample(
                config.generation_size(),
                derive_seed(config.master_seed, it, SeedRole::Sample),
                tag,
            )?;
            let gs_value = generalization_score(&generated, &training, metric)?;

            let (next, pool_size) = match config.paradigm {
                Paradigm::Replace => {
                    let next = match config.selection {
                        None => generated.clone(),
                        Some(kind) => {
                            let sel = select(
                                &generated,
                                config.train_size,
                                &config.policy(kind, iteration),
                            )?;
                            generated.subset(&sel.indices)
                        }
                    };
                    (next, generated.len())
                }
                Paradigm::Accumulate => {
                    pool.extend(&generated)?;
                    (pool.clone(), pool.len())
                }
                Paradigm::AccumulateSubsample => {
                    pool.extend(&generated)?;
                    let kind = config.selection.unwrap_or(SelectionKind::Random);
                    let sel = select(&pool, config.train_size, &config.policy(kind, iteration))?;
                    (pool.subset(&sel.indices), pool.len())
                }
            };

            let entropy = kl_entropy(&next, config.gamma, metric)?;
            let moments = moment_summary(metric.prepare(&next)?.as_ref())?;
            let all: Vec<usize> = (0..next.len()).collect();
            let record = IterationRecord {
                iteration,
                duplicate_count: entropy.duplicate_count,
                training_entropy,
                gs_value,
                mnnd_value: mnnd(&next, metric)?,
                trace_cov: moments.trace_cov,
                frechet_to_real: frechet_gaussian_distance(&moments, &real_reference)?,
                source_proportions: source_proportions(&next, &all),
                training_size: training.len(),
                generated_size: generated.len(),
                pool_size,
                entropy,
            };
            check_finite(&record)?;
            Ok((record, next))
        };
        let (record, next) = step().map_err(|e| e.at_iteration(iteration))?;
        training_entropy = record.entropy.estimate;
        training = next;
        progress(&record);
        records.push(record);
    }

    Ok(LoopTrace {
        schema_version: SCHEMA_VERSION,
        run_timestamp: None,
        config: config.clone(),
        real_size: real.len(),
        real_reference,
        records,
    })
}

fn check_finite(r: &IterationRecord) -> Result<()> {
    let fields = [
        ("entropy", r.entropy.estimate),
        ("training_entropy", r.training_entropy),
        ("gs", r.gs_value),
        ("mnnd", r.mnnd_value),
        ("trace_cov", r.trace_cov),
        ("frechet_real", r.frechet_to_real),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("{name} is not finite ({v})")));
        }
    }
    Ok(())
}

impl LoopTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let trace: LoopTrace =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("trace JSON: {e}")))?;
        if trace.records.len() != trace.config.iterations
            || trace
                .records
                .iter()
                .enumerate()
                .any(|(i, r)| r.iteration != i + 1)
        {
            return Err(Error::Format(
                "trace records are not iterations 1..n".into(),
            ));
        }
        Ok(trace)
    }

    /// One row per iteration:
    /// `iteration,entropy,duplicates,gs,mnnd,trace_cov,frechet_real,frac_real,frac_syn_1..frac_syn_n`
    /// where `n` is the number of iterations; absent sources are 0.
    pub fn to_csv(&self) -> String {
        let n = self.config.iterations;
        let mut out =
            String::from("iteration,entropy,duplicates,gs,mnnd,trace_cov,frechet_real,frac_real");
        for k in 1..=n {
            out.push_str(&format!(",frac_syn_{k}"));
        }
        out.push('\n');
        for r in &self.records {
            let frac = |tag: SourceTag| r.source_proportions.get(&tag).copied().unwrap_or(0.0);
            out.push_str(&format!(
                "{},{:?},{},{:?},{:?},{:?},{:?},{:?}",
                r.iteration,
                r.entropy.estimate,
                r.duplicate_count,
                r.gs_value,
                r.mnnd_value,
                r.trace_cov,
                r.frechet_to_real,
                frac(SourceTag::Real)
            ));
            for k in 1..=n {
                out.push_str(&format!(",{:?}", frac(SourceTag::Synthetic(k as u32))));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationDelta {
    pub iteration: usize,
    pub entropy: f64,
    pub gs: f64,
    pub mnnd: f64,
    pub frechet_to_real: f64,
}

/// How often each trace has the larger value of one metric.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Dominance {
    pub a_higher: usize,
    pub b_higher: usize,
    pub ties: usize,
}

impl Dominance {
    fn count(&mut self, delta: f64) {
        match delta.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => self.a_higher += 1,
            Some(std::cmp::Ordering::Less) => self.b_higher += 1,
            _ => self.ties += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonSummary {
    /// `a - b` per iteration.
    pub deltas: Vec<IterationDelta>,
    pub dominance: BTreeMap<String, Dominance>,
}

pub fn compare_traces(a: &LoopTrace, b: &LoopTrace) -> Result<ComparisonSummary> {
    if a.records.len() != b.records.len() {
        return Err(Error::Dimension(format!(
            "traces have {} and {} iterations",
            a.records.len(),
            b.records.len()
        )));
    }
    if a.config.paradigm != b.config.paradigm {
        return Err(Error::Dimension(format!(
            "traces use paradigms {:?} and {:?}",
            a.config.paradigm, b.config.paradigm
        )));
    }
    let mut dominance: BTreeMap<String, Dominance> = BTreeMap::new();
    let deltas = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(ra, rb)| {
            let d = IterationDelta {
                iteration: ra.iteration,
                entropy: ra.entropy.estimate - rb.entropy.estimate,
                gs: ra.gs_value - rb.gs_value,
                mnnd: ra.mnnd_value - rb.mnnd_value,
                frechet_to_real: ra.frechet_to_real - rb.frechet_to_real,
            };
            for (name, v) in [
                ("entropy", d.entropy),
                ("gs", d.gs),
                ("mnnd", d.mnnd),
                ("frechet_to_real", d.frechet_to_real),
            ] {
                dominance.entry(name.to_string()).or_default().count(v);
            }
            d
        })
        .collect();
    Ok(ComparisonSummary { deltas, dominance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrelationReport {
    /// Pearson r between training-set entropy and ln(GS).
    pub r: f64,
    pub point_count: usize,
    /// Records skipped because GS was exactly zero.
    pub excluded_count: usize,
}

/// Pools every record of every trace and correlates the entropy of the
/// training set with the log generalization score of the model fit on it.
pub fn correlate_traces(traces: &[LoopTrace]) -> Result<CorrelationReport> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded_count = 0;
    for r in traces.iter().flat_map(|t| &t.records) {
        if r.gs_value > 0.0 {
            xs.push(r.training_entropy);
            ys.push(r.gs_value.ln());
        } else {
            excluded_count += 1;
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: xs.len(),
        });
    }
    Ok(CorrelationReport {
        r: pearson(&xs, &ys)?,
        point_count: xs.len(),
        excluded_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_set(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = rng_from_seed(seed);
        PointSet::from_flat(
            (0..n * d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
            d,
        )
        .unwrap()
    }

    fn bootstrap(sigma: f64) -> GeneratorKind {
        GeneratorKind::BootstrapJitter { sigma }
    }

    #[test]
    fn single_iteration_measures_real_subset() {
        let real = normal_set(300, 2, 1);
        let cfg =
            LoopConfig::new(Paradigm::Replace, 1, 200, GeneratorKind::GaussianMle).with_seed(5);
        let trace = run_loop(&cfg, &real).unwrap();
        assert_eq!(trace.records.len(), 1);
        let direct = kl_entropy(&real.head(200), 1, &DistanceMetric::euclidean()).unwrap();
        assert_eq!(trace.records[0].training_entropy, direct.estimate);
        assert_eq!(trace.records[0].training_size, 200);
    }

    #[test]
    fn records_are_consecutive_and_proportions_sum_to_one() {
        let real = normal_set(100, 2, 2);
        for paradigm in [
            Paradigm::Replace,
            Paradigm::Accumulate,
            Paradigm::AccumulateSubsample,
        ] {
            let cfg = LoopConfig::new(paradigm, 4, 50, bootstrap(0.1)).with_seed(3);
            let trace = run_loop(&cfg, &real).unwrap();
            assert_eq!(trace.records.len(), 4);
            for (i, r) in trace.records.iter().enumerate() {
                assert_eq!(r.iteration, i + 1);
                let total: f64 = r.source_proportions.values().sum();
                assert!((total - 1.0).abs() <= 1e-12);
                assert!(r.gs_value >= 0.0);
            }
        }
    }

    #[test]
    fn paradigm_sizes() {
        let real = normal_set(100, 2, 2);
        let rep = run_loop(
            &LoopConfig::new(Paradigm::Replace, 3, 40, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        assert!(rep
            .records
            .iter()
            .all(|r| r.generated_size == 40 && r.pool_size == 40));

        let sel = LoopConfig::new(Paradigm::Replace, 3, 40, bootstrap(0.1))
            .with_selection(SelectionKind::Greedy);
        let rep = run_loop(&sel, &real).unwrap();
        assert!(rep.records.iter().all(|r| r.generated_size == 80));
        assert!(rep.records.iter().skip(1).all(|r| r.training_size == 40));

        let acc = run_loop(
            &LoopConfig::new(Paradigm::Accumulate, 3, 40, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        let pools: Vec<usize> = acc.records.iter().map(|r| r.pool_size).collect();
        assert_eq!(pools, vec![140, 180, 220]);
        let trains: Vec<usize> = acc.records.iter().map(|r| r.training_size).collect();
        assert_eq!(trains, vec![100, 140, 180]);

        let sub = run_loop(
            &LoopConfig::new(Paradigm::AccumulateSubsample, 3, 40, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        assert!(sub.records.iter().all(|r| r.training_size == 40));
    }

    #[test]
    fn accumulate_real_fraction_matches_pool_share() {
        let real = normal_set(60, 2, 4);
        let cfg = LoopConfig::new(Paradigm::Accumulate, 3, 60, bootstrap(0.0));
        let trace = run_loop(&cfg, &real).unwrap();
        for r in &trace.records {
            let want = 60.0 / r.pool_size as f64;
            assert!((r.source_proportions[&SourceTag::Real] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn first_iteration_shared_between_paradigms() {
        let real = normal_set(80, 2, 9);
        let a = run_loop(
            &LoopConfig::new(Paradigm::Replace, 1, 80, bootstrap(0.05)).with_seed(1),
            &real,
        )
        .unwrap();
        let b = run_loop(
            &LoopConfig::new(Paradigm::AccumulateSubsample, 1, 80, bootstrap(0.05))
                .with_selection(SelectionKind::Random)
                .with_seed(1),
            &real,
        )
        .unwrap();
        assert_eq!(a.records[0].training_entropy, b.records[0].training_entropy);
        assert_eq!(a.records[0].gs_value, b.records[0].gs_value);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let real = normal_set(120, 3, 8);
        let cfg = LoopConfig::new(Paradigm::AccumulateSubsample, 3, 60, bootstrap(0.05))
            .with_selection(SelectionKind::Greedy)
            .with_seed(77);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_loop(&cfg, &real).unwrap().to_json())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(1));
    }

    #[test]
    fn config_errors() {
        let real = normal_set(50, 2, 1);
        let bad = [
            LoopConfig::new(Paradigm::Replace, 0, 10, bootstrap(0.0)),
            LoopConfig::new(Paradigm::Replace, 2, 0, bootstrap(0.0)),
            LoopConfig::new(Paradigm::Accumulate, 2, 10, bootstrap(0.0))
                .with_selection(SelectionKind::Greedy),
            LoopConfig {
                generation_multiplier: Some(0.5),
                ..LoopConfig::new(Paradigm::Replace, 2, 10, bootstrap(0.0))
                    .with_selection(SelectionKind::Greedy)
            },
            LoopConfig {
                pool_limit: 100,
                ..LoopConfig::new(Paradigm::Accumulate, 3, 20, bootstrap(0.0))
            },
        ];
        for cfg in bad {
            assert!(
                matches!(run_loop(&cfg, &real), Err(Error::Config(_))),
                "{cfg:?}"
            );
        }
        let too_small = LoopConfig::new(Paradigm::Replace, 2, 60, bootstrap(0.0));
        assert!(matches!(
            run_loop(&too_small, &real),
            Err(Error::InsufficientPoints { .. })
        ));
        let tagged = real.clone().with_source(SourceTag::Synthetic(1));
        let ok = LoopConfig::new(Paradigm::Replace, 2, 10, bootstrap(0.0));
        assert!(matches!(run_loop(&ok, &tagged), Err(Error::Value(_))));
    }

    #[test]
    fn runtime_errors_carry_iteration() {
        // Two identical points: the Gaussian collapses and GMM needs more
        // points than components at iteration 1.
        let real = PointSet::from_scalars(&[1.0, 2.0]).unwrap();
        let cfg = LoopConfig::new(
            Paradigm::Replace,
            2,
            2,
            GeneratorKind::GmmEm {
                components: 3,
                max_iters: 10,
                tol: 1e-6,
            },
        );
        match run_loop(&cfg, &real) {
            Err(Error::Iteration {
                iteration: 1,
                source,
            }) => {
                assert!(matches!(*source, Error::InsufficientPoints { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_and_csv_outputs() {
        let real = normal_set(40, 2, 3);
        let cfg =
            LoopConfig::new(Paradigm::AccumulateSubsample, 3, 20, bootstrap(0.1)).with_seed(2);
        let trace = run_loop(&cfg, &real).unwrap();
        let back = LoopTrace::from_json(&trace.to_json()).unwrap();
        assert_eq!(back, trace);

        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "iteration,entropy,duplicates,gs,mnnd,trace_cov,frechet_real,frac_real,frac_syn_1,frac_syn_2,frac_syn_3"
        );
        assert_eq!(lines.len(), 4);
        for line in &lines[1..] {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 11);
            assert!((cols[7..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // iteration 1 cannot contain generation 2 or 3
        let row1: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row1[9], "0.0");
        assert_eq!(row1[10], "0.0");
    }

    fn synthetic_trace(pairs: &[(f64, f64)]) -> LoopTrace {
        let real = normal_set(10, 1, 0);
        let mut trace = run_loop(
            &LoopConfig::new(Paradigm::Replace, pairs.len(), 5, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        for (r, &(h, gs)) in trace.records.iter_mut().zip(pairs) {
            r.training_entropy = h;
            r.gs_value = gs;
        }
        trace
    }

    #[test]
    fn correlation_of_exact_log_relation_is_one() {
        let pairs: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&g: &f64| (g.ln(), g))
            .collect();
        let rep = correlate_traces(&[synthetic_trace(&pairs)]).unwrap();
        assert!((rep.r - 1.0).abs() < 1e-12);
        assert_eq!(rep.excluded_count, 0);
        assert_eq!(rep.point_count, 5);
    }

    #[test]
    fn correlation_excludes_zero_gs() {
        let pairs = [(1.0, 0.0), (0.1, 1.0), (0.7, 2.0), (1.5, 4.0), (2.0, 0.0)];
        let rep = correlate_traces(&[synthetic_trace(&pairs)]).unwrap();
        assert_eq!(rep.excluded_count, 2);
        assert_eq!(rep.point_count, 3);
        let few = [(1.0, 0.0), (0.1, 1.0), (0.7, 2.0)];
        assert!(matches!(
            correlate_traces(&[synthetic_trace(&few)]),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn compare_self_and_mismatch() {
        let real = normal_set(40, 2, 3);
        let t = run_loop(
            &LoopConfig::new(Paradigm::Replace, 3, 20, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        let cmp = compare_traces(&t, &t).unwrap();
        assert!(cmp
            .deltas
            .iter()
            .all(|d| d.entropy == 0.0 && d.gs == 0.0 && d.mnnd == 0.0 && d.frechet_to_real == 0.0));
        assert_eq!(cmp.dominance["entropy"].ties, 3);

        let short = run_loop(
            &LoopConfig::new(Paradigm::Replace, 2, 20, bootstrap(0.1)),
            &real,
        )
        .unwrap();
        assert!(matches!(
            compare_traces(&t, &short),
            Err(Error::Dimension(_))
        ));
    }
}
