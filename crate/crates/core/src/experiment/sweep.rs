//! Monte-Carlo sweep orchestration.

use rayon::prelude::*;

use crate::channel::{ChannelSampler, Purpose, TrialRandomness};
use crate::combining::{mmse_combiner, se_hardening, HardeningSample};
use crate::error::{Error, Result};
use crate::estimation::{empirical_rmse, EstimatorKind, LinearEstimator};
use crate::optimizer::{ao_data, ao_training, initial_data_phase, initial_training_phase, AoTrace};
use crate::statistics::{PhaseConfiguration, ScenarioStatistics};

use super::config::{ExperimentConfig, Method};
use super::report::{SweepResult, SweepRow};

/// Runs `f` on a pool with `workers` threads (0: all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Keeps not-applicable failures as `None` and propagates everything else.
fn applicable<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_not_applicable() => Ok(None),
        Err(e) => Err(e),
    }
}

struct Plan {
    stats: ScenarioStatistics,
    phase: PhaseConfiguration,
    estimator: LinearEstimator,
}

#[derive(Debug, Clone)]
pub struct RmseSweepOutput {
    pub result: SweepResult,
    /// AO trace of the `mmse` method for each sweep value.
    pub traces: Vec<(f64, AoTrace)>,
}

fn random_initializer(cfg: &ExperimentConfig, tau: usize, m: usize) -> PhaseConfiguration {
    let mut rng = TrialRandomness::new(cfg.mc.seed, 0).rng(Purpose::Phase);
    PhaseConfiguration::random(&mut rng, tau, m)
}

fn plan_rmse(
    method: Method,
    cfg: &ExperimentConfig,
    stats: &ScenarioStatistics,
    phi0: &PhaseConfiguration,
    traces: &mut Vec<AoTrace>,
) -> Result<Option<Plan>> {
    let no_emi = || stats.with_powers(stats.powers.without_emi());
    let optimized = |s: ScenarioStatistics,
                     init: &PhaseConfiguration,
                     traces: &mut Vec<AoTrace>|
     -> Result<Option<Plan>> {
        let Some(trace) = applicable(ao_training(init, &s, &cfg.optimizer))? else {
            return Ok(None);
        };
        let phase = trace.phase.clone();
        traces.push(trace);
        Ok(
            applicable(LinearEstimator::lmmse(&phase, &s))?.map(|estimator| Plan {
                stats: s,
                phase,
                estimator,
            }),
        )
    };
    let fixed =
        |s: ScenarioStatistics,
         build: fn(&PhaseConfiguration, &ScenarioStatistics) -> Result<LinearEstimator>| {
            Ok(applicable(build(phi0, &s))?.map(|estimator| Plan {
                stats: s,
                phase: phi0.clone(),
                estimator,
            }))
        };
    let rsls = |p: &PhaseConfiguration, s: &ScenarioStatistics| {
        LinearEstimator::new(EstimatorKind::Rsls, p, s)
    };
    match method {
        Method::Mmse => optimized(stats.clone(), phi0, traces),
        Method::MmseNoEmi => optimized(no_emi()?, phi0, &mut Vec::new()),
        Method::MmseRandomInit => optimized(
            stats.clone(),
            &random_initializer(cfg, phi0.tau(), phi0.m()),
            &mut Vec::new(),
        ),
        Method::MmsePhi0 => fixed(stats.clone(), LinearEstimator::lmmse),
        Method::Ls => fixed(stats.clone(), LinearEstimator::ls),
        Method::Rsls => fixed(stats.clone(), rsls),
        Method::RslsNoEmi => fixed(no_emi()?, rsls),
        Method::MmseAo => Err(Error::Config("mmse_ao is not an RMSE method".into())),
    }
}

/// Mean and delta-method standard error of `10 log₁₀` of the mean.
fn db_stats(per_trial: &[f64], m: usize) -> Result<(f64, f64)> {
    let value = empirical_rmse(per_trial, m)?;
    let n = per_trial.len() as f64;
    if per_trial.len() < 2 {
        return Ok((value, 0.0));
    }
    let mean = per_trial.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Ok((value, 0.0));
    }
    let var = per_trial.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se_lin = (var / n).sqrt();
    Ok((value, 10.0 / std::f64::consts::LN_10 * se_lin / mean))
}

pub fn run_rmse_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    Ok(run_rmse_sweep_traced(cfg)?.result)
}

pub fn run_rmse_sweep_traced(cfg: &ExperimentConfig) -> Result<RmseSweepOutput> {
    cfg.validate()?;
    let methods = cfg.rmse_methods()?;
    with_workers(cfg.mc.workers, || {
        let mut result = SweepResult::default();
        let mut traces = Vec::new();
        for &value in &cfg.sweep.values {
            let point = cfg.at_sweep_point(value)?;
            let stats = point.scenario()?;
            let phi0 = initial_training_phase(point.training.tau, stats.m())?;
            let mut point_traces = Vec::new();
            let plans: Vec<(Method, Option<Plan>)> = methods
                .iter()
                .map(|&m| Ok((m, plan_rmse(m, &point, &stats, &phi0, &mut point_traces)?)))
                .collect::<Result<_>>()?;
            if let Some(t) = point_traces.into_iter().next() {
                traces.push((value, t));
            }
            let sampler = ChannelSampler::new(&stats)?;
            let trials = point.mc.rmse_trials;
            let m = stats.m();
            let per_trial: Vec<Vec<f64>> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let tr = TrialRandomness::new(point.mc.seed, t);
                    let real = sampler.sample(&mut tr.rng(Purpose::Channel));
                    plans
                        .iter()
                        .filter_map(|(_, p)| p.as_ref())
                        .map(|p| {
                            let y = sampler.training(
                                &p.phase,
                                &real,
                                &p.stats,
                                &mut tr.rng(Purpose::Training),
                            )?;
                            let xhat = p.estimator.apply(&y)?;
                            Ok((&real.x - xhat).norm_squared())
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let mut col = 0;
            for (method, plan) in &plans {
                let (value_db, stderr) = match plan {
                    Some(_) => {
                        let errs: Vec<f64> = per_trial.iter().map(|row| row[col]).collect();
                        col += 1;
                        let (v, s) = db_stats(&errs, m)?;
                        (Some(v), Some(s))
                    }
                    None => (None, None),
                };
                result.rows.push(SweepRow {
                    sweep_var: cfg.sweep.variable,
                    sweep_value: value,
                    method: *method,
                    metric: "rmse",
                    unit: "dB",
                    value: value_db,
                    stderr,
                    trials,
                    seed: point.mc.seed,
                });
            }
        }
        result.sort();
        Ok(RmseSweepOutput { result, traces })
    })?
}

#[derive(Debug, Clone)]
pub struct SeSweepOutput {
    pub result: SweepResult,
    /// Training-phase AO trace for each sweep value.
    pub traces: Vec<(f64, AoTrace)>,
}

pub fn run_se_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    Ok(run_se_sweep_traced(cfg)?.result)
}

pub fn run_se_sweep_traced(cfg: &ExperimentConfig) -> Result<SeSweepOutput> {
    cfg.validate()?;
    let methods = cfg.se_methods()?;
    with_workers(cfg.mc.workers, || {
        let mut result = SweepResult::default();
        let mut traces = Vec::new();
        for &value in &cfg.sweep.values {
            let point = cfg.at_sweep_point(value)?;
            let stats = point.scenario()?;
            let (tau, tau_c) = (point.training.tau, point.training.tau_c);
            let phi0 = initial_training_phase(tau, stats.m())?;
            let trace = ao_training(&phi0, &stats, &point.optimizer)?;
            let phase = trace.phase.clone();
            traces.push((value, trace));
            let estimator = LinearEstimator::lmmse(&phase, &stats)?;
            let err_cov = estimator
                .error_covariance()
                .expect("LMMSE has an error covariance")
                .clone();
            let data0 = initial_data_phase(&phase);
            let sampler = ChannelSampler::new(&stats)?;
            let trials = point.mc.se_trials;
            let per_trial: Vec<Vec<HardeningSample>> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let tr = TrialRandomness::new(point.mc.seed, t);
                    let real = sampler.sample(&mut tr.rng(Purpose::Channel));
                    let y =
                        sampler.training(&phase, &real, &stats, &mut tr.rng(Purpose::Training))?;
                    let xhat = estimator.apply(&y)?;
                    methods
                        .iter()
                        .map(|method| {
                            let (phi, v) = match method {
                                Method::MmseAo => {
                                    let t =
                                        ao_data(&data0, &xhat, &err_cov, &stats, &point.optimizer)?;
                                    let v = t.combiner.expect("data AO returns its combiner").v;
                                    (t.phase, v)
                                }
                                _ => (
                                    data0.clone(),
                                    mmse_combiner(&data0, &xhat, &err_cov, &stats)?.v,
                                ),
                            };
                            HardeningSample::new(&phi, &v, &real.x, &stats)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            for (k, method) in methods.iter().enumerate() {
                let samples: Vec<HardeningSample> = per_trial.iter().map(|row| row[k]).collect();
                let se = se_hardening(&samples, &stats, tau, tau_c)?;
                result.rows.push(SweepRow {
                    sweep_var: cfg.sweep.variable,
                    sweep_value: value,
                    method: *method,
                    metric: "se",
                    unit: "bits/s/Hz",
                    value: Some(se.value),
                    stderr: Some(se.stderr),
                    trials,
                    seed: point.mc.seed,
                });
            }
        }
        result.sort();
        Ok(SeSweepOutput { result, traces })
    })?
}
