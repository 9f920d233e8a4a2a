//! Paired-controller experiment grids: the density generalization sweep and
//! cross-guidance evaluation, plus the shared two-arm table formats.
//!
//! Every row evaluates both controllers with identical episode seeds on the
//! same environment, so differences within a row are attributable to the
//! controller alone.

use std::path::{Path, PathBuf};

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::lookahead::{LookaheadConfig, ModelSource};

use super::eval::{run_paired, ControllerKind, PairedEval, RunSpec};
use super::metrics::MetricsSummary;

/// Default density multipliers for the generalization sweep.
pub const DEFAULT_DENSITY_MULTIPLIERS: &[f64] = &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// One experimental setting with both controllers' summaries.
#[derive(Debug, Clone)]
pub struct PairedRow {
    pub setting: String,
    pub policy: MetricsSummary,
    pub lookahead: MetricsSummary,
}

/// A labeled grid of paired summaries, e.g. one row per density multiplier.
#[derive(Debug, Clone)]
pub struct PairedTable {
    /// Name of the varied setting (first CSV column header).
    pub setting_name: String,
    pub rows: Vec<PairedRow>,
}

impl PairedTable {
    /// CSV in long form: two lines per row (policy, then lookahead), columns
    /// `<setting_name>,controller,` followed by the fixed summary order.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},controller,{}\n",
            self.setting_name,
            MetricsSummary::CSV_HEADER
        );
        for row in &self.rows {
            out.push_str(&format!("{},policy,{}\n", row.setting, row.policy.csv_row()));
            out.push_str(&format!(
                "{},lookahead,{}\n",
                row.setting,
                row.lookahead.csv_row()
            ));
        }
        out
    }

    /// Aligned human-readable table.
    pub fn to_text(&self) -> String {
        let header: Vec<String> = [
            self.setting_name.as_str(),
            "controller",
            "avg_reward",
            "std_err",
            "successes",
            "avg_ep_len",
            "steps_per_s",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut lines = vec![header];
        for row in &self.rows {
            for (label, summary) in [("policy", &row.policy), ("lookahead", &row.lookahead)] {
                lines.push(vec![
                    row.setting.clone(),
                    label.to_string(),
                    format!("{:.4}", summary.average_reward),
                    summary
                        .reward_std_error
                        .map(|e| format!("{e:.4}"))
                        .unwrap_or_else(|| "-".into()),
                    format!("{:.2}", summary.consecutive_successes),
                    format!("{:.1}", summary.average_episode_length),
                    format!("{:.1}", summary.steps_per_second),
                ]);
            }
        }
        aligned(&lines)
    }
}

/// Render rows with per-column widths; the first two columns are
/// left-aligned labels, the rest right-aligned numbers.
pub(super) fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < 2 {
                line.push_str(&format!("{cell:<width$}", width = widths[i]));
            } else {
                line.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Build a [`PairedTable`] from labeled paired outcomes.
pub fn paired_table(setting_name: &str, rows: &[(String, &PairedEval)]) -> PairedTable {
    PairedTable {
        setting_name: setting_name.to_string(),
        rows: rows
            .iter()
            .map(|(setting, pair)| PairedRow {
                setting: setting.clone(),
                policy: pair.policy.summary.clone(),
                lookahead: pair.lookahead.summary.clone(),
            })
            .collect(),
    }
}

/// Full outcomes of a density sweep, one paired evaluation per multiplier.
#[derive(Debug, Clone)]
pub struct DensitySweep {
    pub rows: Vec<(f64, PairedEval)>,
}

impl DensitySweep {
    pub fn table(&self) -> PairedTable {
        let labeled: Vec<(String, &PairedEval)> = self
            .rows
            .iter()
            .map(|(m, pair)| (m.to_string(), pair))
            .collect();
        paired_table("density_multiplier", &labeled)
    }
}

/// Evaluate both controllers at each density multiplier with identical
/// seeds. `spec`'s checkpoints stay fixed (they were trained at the base
/// density); each row overwrites `env.density_multiplier` with the listed
/// value.
pub fn density_sweep(spec: &RunSpec, multipliers: &[f64]) -> Result<DensitySweep> {
    if multipliers.is_empty() {
        return Err(Error::config(
            "multipliers",
            "at least one density multiplier is required",
        ));
    }
    for &m in multipliers {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::config(
                "multipliers",
                format!("density multipliers must be positive, got {m}"),
            ));
        }
    }
    let mut rows = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        let mut sub = spec.clone();
        sub.env.density_multiplier = m;
        rows.push((m, run_paired(&sub)?));
    }
    Ok(DensitySweep { rows })
}

/// Evaluate a policy+value pair trained on one environment, guided by a
/// dynamics model trained on (possibly different) `env_b`, against running
/// that policy alone on `env_b`. When the two environments coincide this
/// reduces to a plain paired evaluation.
#[allow(clippy::too_many_arguments)]
pub fn cross_guidance(
    policy: &Path,
    value: &Path,
    dynamics: &Path,
    env_b: &EnvConfig,
    lookahead: &LookaheadConfig,
    episodes: usize,
    seed: u64,
    threads: usize,
) -> Result<PairedEval> {
    let mut spec = RunSpec::new(
        ControllerKind::Lookahead,
        PathBuf::from(policy),
        env_b.clone(),
    );
    spec.value = Some(PathBuf::from(value));
    spec.dynamics = Some(PathBuf::from(dynamics));
    spec.lookahead = lookahead.clone();
    spec.lookahead.model_source = ModelSource::Learned;
    spec.episodes = episodes;
    spec.seed = seed;
    spec.threads = threads;
    run_paired(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TaskSpec;
    use crate::testutil;

    fn small_spec(dir: &Path, env_cfg: &EnvConfig) -> RunSpec {
        let task = TaskSpec::from_config(env_cfg).unwrap();
        let policy_path = dir.join("policy.ckpt");
        testutil::tiny_policy(&task, 3).save(&policy_path).unwrap();
        let value_path = dir.join("value.ckpt");
        testutil::tiny_value(&task, 4).save(&value_path).unwrap();
        let dynamics_path = dir.join("dynamics.ckpt");
        testutil::identity_dynamics(env_cfg, 5)
            .save(&dynamics_path)
            .unwrap();
        let mut spec = RunSpec::new(ControllerKind::Policy, policy_path, env_cfg.clone());
        spec.value = Some(value_path);
        spec.dynamics = Some(dynamics_path);
        spec.episodes = 3;
        spec.seed = 21;
        spec.lookahead.n_trajectories = 4;
        spec.lookahead.horizon = 1;
        spec.lookahead.elite = 2;
        spec
    }

    #[test]
    fn multiplier_one_row_duplicates_a_plain_paired_run() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(dir.path(), &testutil::fast_pendulum(8));
        let sweep = density_sweep(&spec, &[1.0]).unwrap();
        let plain = run_paired(&spec).unwrap();
        let (m, pair) = &sweep.rows[0];
        assert_eq!(*m, 1.0);
        for (arm_sweep, arm_plain) in [
            (&pair.policy, &plain.policy),
            (&pair.lookahead, &plain.lookahead),
        ] {
            for (a, b) in arm_sweep.records.iter().zip(&arm_plain.records) {
                assert_eq!(a.seed, b.seed);
                assert_eq!(a.reward_total, b.reward_total);
                assert_eq!(a.successes, b.successes);
                assert_eq!(a.length, b.length);
            }
        }
    }

    #[test]
    fn density_changes_propagate_into_the_episodes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(dir.path(), &testutil::fast_pendulum(8));
        let sweep = density_sweep(&spec, &[0.5, 8.0]).unwrap();
        let light = &sweep.rows[0].1.policy.records;
        let heavy = &sweep.rows[1].1.policy.records;
        // Identical seeds across rows, different physics.
        for (a, b) in light.iter().zip(heavy.iter()) {
            assert_eq!(a.seed, b.seed);
        }
        assert!(
            light
                .iter()
                .zip(heavy.iter())
                .any(|(a, b)| a.reward_total != b.reward_total),
            "a 16x mass change should alter some episode"
        );
        // Paired-seed discipline within each row.
        for (_, pair) in &sweep.rows {
            for (p, l) in pair.policy.records.iter().zip(&pair.lookahead.records) {
                assert_eq!(p.seed, l.seed);
            }
        }
    }

    #[test]
    fn sweep_rejects_empty_and_nonpositive_multipliers() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(dir.path(), &testutil::fast_pendulum(8));
        let err = density_sweep(&spec, &[]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = density_sweep(&spec, &[1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("positive"));
        let err = density_sweep(&spec, &[-2.0]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn table_and_csv_have_the_documented_shape() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(dir.path(), &testutil::fast_pendulum(6));
        let sweep = density_sweep(&spec, &[0.5, 2.0]).unwrap();
        let table = sweep.table();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert_eq!(
            lines[0],
            format!("density_multiplier,controller,{}", MetricsSummary::CSV_HEADER)
        );
        assert!(lines[1].starts_with("0.5,policy,"));
        assert!(lines[2].starts_with("0.5,lookahead,"));
        assert!(lines[3].starts_with("2,policy,"));
        let text = table.to_text();
        assert!(text.contains("density_multiplier"));
        assert!(text.contains("lookahead"));
        // Aligned: all lines share the position of the controller column.
        let first_data = text.lines().nth(1).unwrap();
        assert!(first_data.contains("policy"));
    }

    #[test]
    fn cross_guidance_on_the_same_env_reduces_to_a_paired_run() {
        let dir = tempfile::tempdir().unwrap();
        let env_cfg = testutil::fast_pendulum(8);
        let spec = small_spec(dir.path(), &env_cfg);
        let pair = cross_guidance(
            &spec.policy,
            spec.value.as_ref().unwrap(),
            spec.dynamics.as_ref().unwrap(),
            &env_cfg,
            &spec.lookahead,
            spec.episodes,
            spec.seed,
            1,
        )
        .unwrap();
        let plain = run_paired(&spec).unwrap();
        for (arm_cross, arm_plain) in [
            (&pair.policy, &plain.policy),
            (&pair.lookahead, &plain.lookahead),
        ] {
            for (a, b) in arm_cross.records.iter().zip(&arm_plain.records) {
                assert_eq!(a.reward_total, b.reward_total);
                assert_eq!(a.length, b.length);
            }
        }
    }
}
