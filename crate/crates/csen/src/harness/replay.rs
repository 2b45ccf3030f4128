//! Re-run one emitted record in isolation and check it reproduces.
//!
//! Works because cell seeds derive from stable keys (measurement rate,
//! bin, trial) rather than positions in the configured lists, so a
//! narrowed config regenerates the identical cell.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentKind;
use crate::harness::dictbench::run_dictclass_bench;
use crate::harness::experiments::{run_noise_sweep, run_se_experiment};
use crate::harness::phase::{run_phase_transition, run_recovery_comparison};
use crate::harness::report::{read_config_json, read_results_csv, ExperimentRecord};

#[derive(Debug)]
pub struct ReplayOutcome {
    pub row: usize,
    pub matched: bool,
    pub stored: ExperimentRecord,
    pub recomputed: ExperimentRecord,
}

/// Re-run the cell behind results.csv row `row` (0-based over data rows)
/// using the emitted config.json, and compare bitwise.
pub fn replay(config_json: &Path, results_csv: &Path, row: usize) -> Result<ReplayOutcome> {
    let (mut cfg, master) = read_config_json(config_json)?;
    cfg.master_seed = master;
    let records = read_results_csv(results_csv)?;
    let stored = records
        .get(row)
        .ok_or_else(|| Error::invalid(format!("row {row} out of range ({} rows)", records.len())))?
        .clone();

    // Narrow the config to the stored cell.
    cfg.mr_list = vec![stored.mr];
    cfg.methods = vec![stored.method.clone()];
    match cfg.experiment {
        ExperimentKind::SeTable => cfg.snr_db = stored.snr_db,
        ExperimentKind::NoiseSweep => cfg.snr_db_list = vec![stored.snr_db],
        _ => {}
    }

    let outcome = match cfg.experiment {
        ExperimentKind::SeTable => run_se_experiment(&cfg)?,
        ExperimentKind::NoiseSweep => run_noise_sweep(&cfg)?,
        ExperimentKind::PhaseTransition => run_phase_transition(&cfg)?,
        ExperimentKind::RecoveryComparison => run_recovery_comparison(&cfg)?,
        ExperimentKind::DictClassBench => run_dictclass_bench(&cfg)?,
    };
    let recomputed = outcome
        .records
        .into_iter()
        .find(|r| {
            r.method == stored.method
                && r.mr == stored.mr
                && r.snr_db == stored.snr_db
                && r.trial == stored.trial
                && r.rho_bin == stored.rho_bin
        })
        .ok_or_else(|| Error::invalid("replay produced no matching cell"))?;
    let matched = recomputed == stored;
    Ok(ReplayOutcome {
        row,
        matched,
        stored,
        recomputed,
    })
}
