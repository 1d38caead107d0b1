//! Experiment orchestration: sweeps, atomic result files, the manifest, and
//! the self-test command.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use qisac::eval::{self, JobHistory, MetricsRecord, SweepOutput, Variant};
use qisac::selftest::{run_selftest, SelftestOptions};

use crate::config::{d_primes_for, protocol_for, train_for, ResolvedConfig, RunArgs};

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestOutputs {
    pub csv: String,
    pub metrics_log: String,
}

/// Written next to the results; feeding it back through `--config` replays
/// the run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub config: ResolvedConfig,
    pub seeds: Vec<u64>,
    pub outputs: ManifestOutputs,
    pub started_at: String,
    pub finished_at: String,
}

// Temp file in the target directory plus rename, so a failed run never
// leaves a partial file at the final path.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn metrics_log_lines(histories: &[JobHistory]) -> String {
    let mut out = String::new();
    for h in histories {
        for it in &h.iterations {
            let line = serde_json::json!({
                "d": h.d,
                "d_prime": h.d_prime,
                "variant": h.variant.as_str(),
                "seed": h.seed,
                "iter": it.iter,
                "objective": it.objective,
                "p_succ": it.p_succ,
                "p_acc": it.p_acc,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

fn print_summary(records: &[MetricsRecord]) {
    println!(
        "{:>3} {:>4} {:>9} {:>9} {:>9} {:>9} {:>10} {:>9} {:>5} {:>9}",
        "d", "d'", "delta_b", "bits", "p_succ", "p_acc", "throughput", "variant", "seed", "time_s"
    );
    for r in records {
        println!(
            "{:>3} {:>4} {:>9.3} {:>9.3} {:>9.4} {:>9.4} {:>10.4} {:>9} {:>5} {:>9.2}",
            r.d,
            r.d_prime,
            r.delta_b,
            r.bits,
            r.p_succ,
            r.p_acc,
            r.throughput,
            r.variant,
            r.seed,
            r.wall_time_s
        );
    }
}

/// Executes a resolved run end to end. Returns the manifest path.
pub fn execute(cfg: &ResolvedConfig) -> anyhow::Result<PathBuf> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let out_dir = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let jobs = if cfg.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cfg.jobs
    };
    let train = train_for(cfg)?;

    let mut records = Vec::new();
    let mut histories = Vec::new();
    for &d in &cfg.d_list {
        let proto = protocol_for(cfg, d)?;
        let mut d_primes = d_primes_for(cfg, d);
        let mut seeds = cfg.seeds.clone();
        let variants: Vec<Variant> = if cfg.single {
            d_primes.truncate(1);
            seeds.truncate(1);
            vec![Variant::Trained]
        } else {
            vec![Variant::Trained, Variant::Identity]
        };
        let SweepOutput {
            records: mut r,
            histories: mut h,
        } = eval::sweep_backoff(&proto, &train, &d_primes, &seeds, &variants, jobs)?;
        records.append(&mut r);
        histories.append(&mut h);
        if cfg.single {
            break;
        }
    }
    records.sort_by(|a, b| {
        a.d.cmp(&b.d)
            .then(a.delta_b.total_cmp(&b.delta_b))
            .then(a.variant.cmp(&b.variant))
            .then(a.seed.cmp(&b.seed))
    });

    let mut csv = Vec::new();
    eval::write_csv(&records, &mut csv)?;
    let csv_path = write_atomic(&out_dir, "results.csv", &csv)?;
    write_atomic(&out_dir, "metrics.log", metrics_log_lines(&histories).as_bytes())?;

    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        outputs: ManifestOutputs {
            csv: "results.csv".into(),
            metrics_log: "metrics.log".into(),
        },
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    let manifest_path = write_atomic(&out_dir, "manifest.json", &manifest_bytes)?;

    print_summary(&records);
    println!(
        "wrote {} rows to {} (manifest: {})",
        records.len(),
        csv_path.display(),
        manifest_path.display()
    );
    Ok(manifest_path)
}

pub fn execute_args(args: &RunArgs) -> anyhow::Result<PathBuf> {
    let cfg = crate::config::resolve(args)?;
    execute(&cfg)
}

/// Runs the invariant suite, printing one pass/fail line per group.
/// Returns false if any group failed.
pub fn selftest(flip_cx: bool) -> bool {
    let reports = run_selftest(SelftestOptions { flip_cx });
    let mut all_passed = true;
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    all_passed
}
