//! Experiment orchestration: drives the engines over a plan's rows and
//! seeds, persists one metrics record per run, and aggregates metrics files
//! into plot-ready reports.
//!
//! Rows execute in a worker pool but results are merged in plan order, so
//! the metrics file is deterministic apart from its wall-clock column.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::decayspace::{
    generate_broadcast_instance, generate_instance, validate_quasi_metric, Instance,
};
use crate::error::{Error, Result};
use crate::instance_io::{
    instance_digest, load_instance, ExperimentPlan, PlanAlgorithm, PlanRow,
};
use crate::oams::{oams_run, power_ladder_for};
use crate::oracle::{exact_min_schedule, offline_optimal_broadcast};
use crate::sinrcore::{sinr_feasible, QuasiLink};
use crate::spaids::spaids_run;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DECAYSIM_OUT";

/// One run's headline metrics. Optional columns stay empty for the other
/// algorithm. `wall_clock_ms` is excluded from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub experiment_id: String,
    pub row: String,
    pub digest: String,
    pub seed: u64,
    pub algorithm: String,
    pub n_nodes: usize,
    pub n_links: usize,
    pub slots: Option<usize>,
    pub rounds: Option<usize>,
    pub opt_slots: Option<usize>,
    pub slot_ratio: Option<f64>,
    pub delivered: Option<usize>,
    pub success_events: Option<usize>,
    pub consumed: Option<f64>,
    pub offline_opt: Option<usize>,
    pub transition_bound: Option<f64>,
    pub transition_vacuous: Option<bool>,
    pub e_succ_bound: Option<f64>,
    pub e_power_bound: Option<f64>,
    pub exp_vacuous: Option<bool>,
    pub power_spread: f64,
    pub length_spread: f64,
    /// Semicolon-joined built-in assertion failures; empty when clean.
    pub assertion_failures: String,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlanOutput {
    pub records: Vec<MetricsRecord>,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
    pub failures: usize,
}

/// Resolves the effective config of a row.
fn row_config(base: &ScenarioConfig, row: &PlanRow) -> ScenarioConfig {
    let mut cfg = base.clone();
    if let Some(n) = row.n_nodes {
        cfg.n_nodes = n;
    }
    if let Some(m) = row.n_links {
        cfg.n_links = Some(m);
    }
    if let Some(s) = row.sigma {
        cfg.sigma = s;
    }
    cfg
}

fn row_instance(
    algorithm: PlanAlgorithm,
    row: &PlanRow,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<Instance> {
    match &row.file {
        Some(path) => load_instance(path),
        None => match algorithm {
            PlanAlgorithm::Spaids => generate_instance(cfg, seed),
            PlanAlgorithm::Oams => generate_broadcast_instance(cfg, seed),
        },
    }
}

fn run_one(
    plan: &ExperimentPlan,
    row: &PlanRow,
    row_label: &str,
    seed: u64,
) -> Result<MetricsRecord> {
    let started = Instant::now();
    let cfg = row_config(&plan.config, row);
    let instance = row_instance(plan.algorithm, row, &cfg, seed)?;
    let mut failures: Vec<String> = Vec::new();
    if !validate_quasi_metric(&instance.space).is_valid() {
        failures.push("quasi-metric axioms violated".into());
    }
    let mut record = MetricsRecord {
        experiment_id: plan.id.clone(),
        row: row_label.to_string(),
        digest: instance_digest(&instance)?,
        seed,
        algorithm: match plan.algorithm {
            PlanAlgorithm::Spaids => "spaids".into(),
            PlanAlgorithm::Oams => "oams".into(),
        },
        n_nodes: instance.space.n(),
        n_links: instance.links.len(),
        slots: None,
        rounds: None,
        opt_slots: None,
        slot_ratio: None,
        delivered: None,
        success_events: None,
        consumed: None,
        offline_opt: None,
        transition_bound: None,
        transition_vacuous: None,
        e_succ_bound: None,
        e_power_bound: None,
        exp_vacuous: None,
        power_spread: instance.power_spread(),
        length_spread: instance.length_spread(),
        assertion_failures: String::new(),
        wall_clock_ms: 0.0,
    };
    match plan.algorithm {
        PlanAlgorithm::Spaids => {
            let r = spaids_run(&instance, seed)?;
            record.slots = Some(r.slot_count());
            record.rounds = Some(r.total_rounds);
            if r.partial {
                failures.push("round budget exceeded before all quits".into());
            }
            for slot in &r.slots {
                let refs: Vec<&QuasiLink> =
                    slot.iter().map(|&id| &instance.links[id]).collect();
                if !sinr_feasible(&refs, &instance.space, &instance.config)? {
                    failures.push(format!("slot {slot:?} not SINR-feasible"));
                }
            }
            if instance.links.len() <= crate::oracle::SCHEDULE_CAP {
                let opt = exact_min_schedule(&instance, &instance.config)?;
                record.opt_slots = Some(opt.min_slots);
                if opt.min_slots > 0 {
                    record.slot_ratio = Some(r.slot_count() as f64 / opt.min_slots as f64);
                }
                if r.slot_count() < opt.min_slots {
                    failures.push("schedule beat the exact optimum".into());
                }
            }
        }
        PlanAlgorithm::Oams => {
            let r = oams_run(&instance, seed)?;
            record.delivered = Some(r.result.delivered);
            record.success_events = Some(r.result.success_events);
            record.consumed = Some(r.result.consumed);
            record.rounds = Some(r.result.rounds);
            record.transition_bound = Some(r.result.transition_bound.value);
            record.transition_vacuous = Some(r.result.transition_bound.vacuous);
            record.e_succ_bound = Some(r.result.expectation_bounds.successes);
            record.e_power_bound = Some(r.result.expectation_bounds.power);
            record.exp_vacuous = Some(r.result.expectation_bounds.vacuous);
            if r.result.consumed > instance.config.battery + 1e-9 {
                failures.push("battery over-consumed".into());
            }
            if instance.links.len() <= crate::oracle::BROADCAST_CAP {
                if let Ok(ladder) = power_ladder_for(&instance) {
                    if ladder.len() <= crate::oracle::LADDER_CAP {
                        let opt =
                            offline_optimal_broadcast(&instance, &ladder, &instance.config)?;
                        record.offline_opt = Some(opt.max_receivers);
                        if r.result.delivered > opt.max_receivers {
                            failures.push("delivered more than the offline optimum".into());
                        }
                    }
                }
            }
        }
    }
    record.assertion_failures = failures.join("; ");
    record.wall_clock_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(record)
}

/// Runs every (row, seed) cell of the plan, writes `metrics.csv` and a
/// structured-text summary into the output directory, and reports the
/// number of failed built-in assertions.
pub fn run_plan(plan: &ExperimentPlan) -> Result<RunPlanOutput> {
    plan.validate()?;
    let out_dir = plan
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("decaysim-out"));
    std::fs::create_dir_all(&out_dir)?;

    let cells: Vec<(usize, &PlanRow, u64)> = plan
        .rows
        .iter()
        .enumerate()
        .flat_map(|(ix, row)| {
            (plan.seeds.start..plan.seeds.start + plan.seeds.count)
                .map(move |seed| (ix, row, seed))
        })
        .collect();
    let records: Vec<Result<MetricsRecord>> = cells
        .par_iter()
        .map(|(ix, row, seed)| run_one(plan, row, &row.label_or_default(*ix), *seed))
        .collect();
    let records: Vec<MetricsRecord> = records.into_iter().collect::<Result<_>>()?;

    let metrics_path = out_dir.join(format!("{}_metrics.csv", plan.id));
    let mut writer = csv::Writer::from_path(&metrics_path)?;
    for record in &records {
        writer.serialize(record).map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;

    let failures = records.iter().filter(|r| !r.assertion_failures.is_empty()).count();
    let summary_path = out_dir.join(format!("{}_summary.toml", plan.id));
    let summary = PlanSummary {
        experiment_id: plan.id.clone(),
        records: records.len(),
        failures,
        metrics_file: metrics_path.display().to_string(),
    };
    std::fs::write(
        &summary_path,
        format!(
            "# decaysim/plan-summary v{}\n{}",
            crate::instance_io::FORMAT_VERSION,
            toml::to_string(&summary).map_err(|e| Error::Parse(e.to_string()))?
        ),
    )?;
    Ok(RunPlanOutput { records, metrics_path, summary_path, failures })
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanSummary {
    experiment_id: String,
    records: usize,
    failures: usize,
    metrics_file: String,
}

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub row: String,
    pub n_links: usize,
    pub runs: usize,
    pub median_rounds: Option<f64>,
    pub q25_rounds: Option<f64>,
    pub q75_rounds: Option<f64>,
    pub median_slots: Option<f64>,
    pub median_delivered: Option<f64>,
    pub median_consumed: Option<f64>,
    pub median_slot_ratio: Option<f64>,
    /// Reference series for scaling plots.
    pub log2_n: f64,
    pub loglog_delta: Option<f64>,
    pub rounds_over_log2n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub rows: Vec<ReportRow>,
    pub report_path: PathBuf,
}

/// Median of a sorted-on-demand sample: the middle value, or the mean of the
/// two middles.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] * (1.0 - frac) + v[hi] * frac)
}

/// Aggregates metrics CSVs into per-(algorithm, row) medians and quantiles
/// with reference columns, written as a plot-ready CSV.
pub fn report(metrics_files: &[PathBuf], out_dir: &Path) -> Result<ReportOutput> {
    if metrics_files.is_empty() {
        return Err(Error::Plan("report needs at least one metrics file".into()));
    }
    let mut records: Vec<MetricsRecord> = Vec::new();
    for path in metrics_files {
        let mut reader = csv::Reader::from_path(path)?;
        for row in reader.deserialize() {
            let record: MetricsRecord = row.map_err(|e| Error::Parse(e.to_string()))?;
            records.push(record);
        }
    }
    if records.is_empty() {
        return Err(Error::Plan("metrics files contained no records".into()));
    }
    // Group in first-appearance order so reports are deterministic.
    let mut groups: Vec<((String, String), Vec<&MetricsRecord>)> = Vec::new();
    for record in &records {
        let key = (record.algorithm.clone(), record.row.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, bucket)) => bucket.push(record),
            None => groups.push((key, vec![record])),
        }
    }
    let mut rows = Vec::new();
    for ((algorithm, row_label), bucket) in groups {
        let take = |f: &dyn Fn(&MetricsRecord) -> Option<f64>| -> Vec<f64> {
            bucket.iter().filter_map(|r| f(r)).collect()
        };
        let rounds = take(&|r| r.rounds.map(|v| v as f64));
        let slots = take(&|r| r.slots.map(|v| v as f64));
        let delivered = take(&|r| r.delivered.map(|v| v as f64));
        let consumed = take(&|r| r.consumed);
        let ratios = take(&|r| r.slot_ratio);
        let spreads = take(&|r| Some(r.power_spread));
        let n_links = bucket[0].n_links;
        let log2_n = (n_links.max(1) as f64).log2();
        let median_rounds = median(&rounds);
        let delta_med = median(&spreads);
        rows.push(ReportRow {
            algorithm,
            row: row_label,
            n_links,
            runs: bucket.len(),
            median_rounds,
            q25_rounds: quantile(&rounds, 0.25),
            q75_rounds: quantile(&rounds, 0.75),
            median_slots: median(&slots),
            median_delivered: median(&delivered),
            median_consumed: median(&consumed),
            median_slot_ratio: median(&ratios),
            log2_n,
            loglog_delta: delta_med
                .filter(|&d| d > 1.0)
                .map(|d| d.log2().max(f64::MIN_POSITIVE).log2()),
            rounds_over_log2n: median_rounds
                .filter(|_| log2_n > 0.0)
                .map(|m| m / log2_n),
        });
    }
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.csv");
    let mut writer = csv::Writer::from_path(&report_path)?;
    for row in &rows {
        writer.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(ReportOutput { rows, report_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_io::{SeedRange, FORMAT_VERSION, PLAN_FORMAT};

    fn plan(algorithm: PlanAlgorithm, rows: Vec<PlanRow>, seeds: u64, dir: &Path) -> ExperimentPlan {
        let config = ScenarioConfig {
            n_nodes: 10,
            n_links: Some(4),
            battery: 20.0,
            target_r: 3.0,
            s_cap: 2.5,
            max_rounds: 100,
            ..Default::default()
        };
        ExperimentPlan {
            format: PLAN_FORMAT.into(),
            version: FORMAT_VERSION,
            id: "t".into(),
            algorithm,
            seeds: SeedRange { start: 0, count: seeds },
            output_dir: Some(dir.to_path_buf()),
            config,
            rows,
        }
    }

    #[test]
    fn single_cell_plan_yields_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(
            PlanAlgorithm::Spaids,
            vec![PlanRow { label: Some("a".into()), ..Default::default() }],
            1,
            dir.path(),
        );
        let out = run_plan(&p).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.failures, 0);
        assert!(out.metrics_path.exists());
        assert!(out.summary_path.exists());
    }

    #[test]
    fn sweep_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            PlanRow { label: Some("n8".into()), n_nodes: Some(8), ..Default::default() },
            PlanRow { label: Some("n10".into()), n_nodes: Some(10), ..Default::default() },
            PlanRow { label: Some("n12".into()), n_nodes: Some(12), ..Default::default() },
        ];
        let p = plan(PlanAlgorithm::Spaids, rows, 3, dir.path());
        let out = run_plan(&p).unwrap();
        assert_eq!(out.records.len(), 9);
    }

    #[test]
    fn rerun_reproduces_metric_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(
            PlanAlgorithm::Oams,
            vec![PlanRow { label: Some("a".into()), sigma: Some(1.0), ..Default::default() }],
            2,
            dir.path(),
        );
        let a = run_plan(&p).unwrap();
        let b = run_plan(&p).unwrap();
        let strip = |rs: &[MetricsRecord]| -> Vec<MetricsRecord> {
            rs.iter().map(|r| MetricsRecord { wall_clock_ms: 0.0, ..r.clone() }).collect()
        };
        assert_eq!(strip(&a.records), strip(&b.records));
    }

    #[test]
    fn median_matches_external_sort() {
        let values = vec![5.0, 1.0, 9.0, 3.0, 7.0];
        // independently: sorted = [1,3,5,7,9], middle = 5
        assert_eq!(median(&values), Some(5.0));
        let even = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&even), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn report_groups_and_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(
            PlanAlgorithm::Spaids,
            vec![PlanRow { label: Some("n10".into()), ..Default::default() }],
            3,
            dir.path(),
        );
        let out = run_plan(&p).unwrap();
        let rep = report(&[out.metrics_path.clone()], dir.path()).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].runs, 3);
        assert!(rep.rows[0].median_rounds.is_some());
        assert!(rep.report_path.exists());

        // single record echoes through
        let single = plan(
            PlanAlgorithm::Spaids,
            vec![PlanRow { label: Some("solo".into()), ..Default::default() }],
            1,
            dir.path(),
        );
        let single = ExperimentPlan { id: "solo".into(), ..single };
        let out2 = run_plan(&single).unwrap();
        let rep2 = report(&[out2.metrics_path.clone()], dir.path()).unwrap();
        assert_eq!(rep2.rows[0].runs, 1);
        assert_eq!(
            rep2.rows[0].median_rounds,
            out2.records[0].rounds.map(|v| v as f64)
        );

        // mixed algorithms group separately
        let oams_dir = tempfile::tempdir().unwrap();
        let po = plan(
            PlanAlgorithm::Oams,
            vec![PlanRow { label: Some("n10".into()), sigma: Some(1.0), ..Default::default() }],
            2,
            oams_dir.path(),
        );
        let po = ExperimentPlan { id: "o".into(), ..po };
        let out3 = run_plan(&po).unwrap();
        let rep3 =
            report(&[out.metrics_path.clone(), out3.metrics_path.clone()], dir.path()).unwrap();
        assert_eq!(rep3.rows.len(), 2);
        assert!(rep3.rows.iter().any(|r| r.algorithm == "oams"));
    }
}
