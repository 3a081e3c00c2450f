//! Success rate versus trace count.
//!
//! Each (T, trial) cell derives its own seed from the master seed, draws the
//! labels, samples T traces and runs the configured algorithm. Cells run in
//! parallel; results are collected in (T, trial) order.

use std::time::Instant;

use super::counts::random_bits;
use super::report::{ExperimentReport, TrialRecord};
use super::{parse_bits, AlgoId, ExperimentConfig, LabelMode};
use crate::channel::{sample_censored_traces, sample_string_traces, ChannelConfig};
use crate::error::{Error, Result};
use crate::lp_recon::{reconstruct_lp_large_with, reconstruct_lp_small_with};
use crate::par::Execution;
use crate::rng::{rng_from_seed, splitmix64, trial_seed};
use crate::spider_recon::{reconstruct_spider_large_depth, reconstruct_spider_meanbased, reconstruct_spider_rows};
use crate::string_recon::{censored_reconstruct, ExhaustiveStringReconstructor};
use crate::ted_recon::{reconstruct_ted_large_with, reconstruct_ted_small_with};
use crate::trees::LabeledOrderedTree;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(Execution::default(), cfg)
}

pub fn run_experiment_with(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let counts = cfg.resolved_counts()?;
    let cells: Vec<(usize, usize)> =
        counts.iter().flat_map(|&t| (0..cfg.trials).map(move |trial| (t, trial))).collect();
    let records = exec.map(&cells, |&(t, trial)| run_trial(cfg, t, trial)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(cfg.clone(), counts, records))
}

/// Labels for one trial.
pub fn trial_labels(cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<Vec<bool>> {
    let n = cfg.shape.n();
    match &cfg.label_mode {
        LabelMode::WorstCaseEnumerate => {
            let code = trial as u64 % (1u64 << n);
            Ok((0..n).map(|b| code >> (n - 1 - b) & 1 == 1).collect())
        }
        LabelMode::Random => Ok(random_bits(n, &mut rng_from_seed(splitmix64(seed)))),
        LabelMode::Fixed(bits) => parse_bits(bits),
    }
}

fn run_trial(cfg: &ExperimentConfig, t: usize, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.master_seed, t, trial);
    let labels = trial_labels(cfg, trial, seed)?;
    let start = Instant::now();
    let mut attempt_seed = seed;
    let mut outcome = reconstruct_once(cfg, &labels, t, attempt_seed);
    for _ in 0..cfg.retries {
        match outcome {
            Err(Error::PerpEncountered { .. }) if cfg.algo == AlgoId::LpLarge => {
                attempt_seed = splitmix64(attempt_seed);
                outcome = reconstruct_once(cfg, &labels, t, attempt_seed);
            }
            _ => break,
        }
    }
    let success = match outcome {
        Ok(found) => found == labels,
        Err(e) if e.is_termination() => {
            log::debug!("T = {t}, trial {trial}: {e}");
            false
        }
        Err(e) => return Err(e),
    };
    let millis = if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(TrialRecord { t, trial, success, millis })
}

fn reconstruct_once(cfg: &ExperimentConfig, labels: &[bool], t: usize, seed: u64) -> Result<Vec<bool>> {
    let seq = Execution::Sequential;
    let recon = ExhaustiveStringReconstructor { seed, exec: seq, ..ExhaustiveStringReconstructor::default() };
    let (shape, q) = (&cfg.shape, cfg.q);
    if cfg.algo == AlgoId::String {
        let traces = sample_string_traces(seq, labels, q, cfg.gamma, seed, t);
        return censored_reconstruct(&traces, labels.len(), q, &recon);
    }
    let tree = shape.build(labels)?;
    let channel = ChannelConfig::new(cfg.model, q, seed)?.with_censoring(cfg.gamma)?;
    let traces: Vec<LabeledOrderedTree> =
        sample_censored_traces(seq, &tree, &channel, t).into_iter().flatten().collect();
    if traces.is_empty() {
        return Err(Error::AllCensored);
    }
    match cfg.algo {
        AlgoId::TedLarge => reconstruct_ted_large_with(seq, &traces, shape, q, &recon),
        AlgoId::TedSmall => reconstruct_ted_small_with(seq, &traces, shape, q),
        AlgoId::LpLarge => reconstruct_lp_large_with(seq, &traces, shape, q, &recon),
        AlgoId::LpSmall => reconstruct_lp_small_with(seq, &traces, shape, q),
        AlgoId::SpiderMeanbased => {
            let mut rng = rng_from_seed(splitmix64(seed ^ 0x5eed));
            Ok(reconstruct_spider_meanbased(seq, &traces, shape, q, &mut rng)?.labels)
        }
        AlgoId::SpiderLargeDepth => Ok(reconstruct_spider_large_depth(&traces, shape, q, &recon)?.labels),
        AlgoId::SpiderRows => reconstruct_spider_rows(&traces, shape, q, &recon),
        AlgoId::String => unreachable!("handled above"),
    }
}
