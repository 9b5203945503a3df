use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use scar_metrology::verification::VerificationReport;

use crate::cache::{cache_key, Cache};
use crate::config::RunConfig;
use crate::jobs::{merge_rows, plan, verification_report, Job, JobOutput};

pub struct RunReport {
    /// Final paths of every file written.
    pub files: Vec<PathBuf>,
    pub metadata: Value,
    pub verification: Vec<VerificationReport>,
}

impl RunReport {
    pub fn verification_passed(&self) -> bool {
        self.verification.iter().all(|r| r.all_passed())
    }
}

struct Executed {
    output: JobOutput,
    key: String,
    hit: bool,
    seconds: f64,
}

fn execute(job: &Job, cache: Option<&Cache>) -> Result<Executed> {
    let key = cache_key(job)?;
    let label = job.label();
    if let Some(c) = cache.filter(|_| job.cacheable()) {
        if let Some(output) = c.load(&key, job) {
            log::info!("{label}: cache hit");
            return Ok(Executed {
                output,
                key,
                hit: true,
                seconds: 0.0,
            });
        }
    }
    log::info!("{label}: running");
    let start = Instant::now();
    let output = job.run().with_context(|| format!("job {label} failed"))?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!("{label}: done in {seconds:.2} s");
    if let Some(c) = cache.filter(|_| job.cacheable()) {
        if let Err(e) = c.store(&key, job, &output) {
            log::warn!("{label}: could not write cache entry: {e:#}");
        }
    }
    Ok(Executed {
        output,
        key,
        hit: false,
        seconds,
    })
}

/// Runs every job of `cfg`, staging outputs in a temporary directory
/// inside the output directory and moving them into place only once all
/// jobs have succeeded.
pub fn run(cfg: &RunConfig, use_cache: bool) -> Result<RunReport> {
    let start = Instant::now();
    let jobs = plan(cfg)?;
    let cache = use_cache.then(|| Cache::new(&cfg.cache_dir));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let executed: Vec<Executed> =
        pool.install(|| jobs.par_iter().map(|j| execute(j, cache.as_ref())).collect::<Result<_>>())?;

    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output dir {}", cfg.output_dir.display()))?;
    let staging = tempfile::Builder::new()
        .prefix(".scarmet-staging-")
        .tempdir_in(&cfg.output_dir)?;

    let mut files: Vec<(String, String)> = Vec::new();
    for e in &executed {
        files.extend(e.output.files.clone());
    }
    files.extend(merge_rows(executed.iter().map(|e| &e.output)));

    let job_meta: Vec<Value> = jobs
        .iter()
        .zip(&executed)
        .map(|(j, e)| {
            json!({
                "label": j.label(),
                "key": e.key,
                "cache": if !j.cacheable() || cache.is_none() { "off" } else if e.hit { "hit" } else { "miss" },
                "seconds": e.seconds,
                "summary": e.output.summary,
            })
        })
        .collect();
    let metadata = json!({
        "experiment": cfg.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "wall_seconds": start.elapsed().as_secs_f64(),
        "jobs": job_meta,
    });
    files.push((
        format!("{}_metadata.json", cfg.experiment.name()),
        serde_json::to_string_pretty(&metadata)?,
    ));

    for (name, text) in &files {
        fs::write(staging.path().join(name), text)?;
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, _) in &files {
        let dest = cfg.output_dir.join(name);
        fs::rename(staging.path().join(name), &dest)
            .with_context(|| format!("cannot move {name} into {}", cfg.output_dir.display()))?;
        written.push(dest);
    }
    let verification = executed.iter().filter_map(|e| verification_report(&e.output)).collect();
    Ok(RunReport {
        files: written,
        metadata,
        verification,
    })
}
