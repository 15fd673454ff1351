use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use rpu_core::data_model::{load_csv, write_csv, DatasetRole, TripDataset};
use rpu_core::generators::{fit_generator, sample, GeneratorKind, GeneratorModel, GeneratorSpec};
use rpu_core::world::simulate_splits;

use crate::config::BenchmarkConfig;
use crate::error::CliError;
use crate::pipeline::{load_real_data, FailureEntry, GeneratorInfo, ModelOutcome, RealData, Reference};
use crate::report::{write_manifest, write_plot_files, write_report_files, DataSummary, Manifest, ManifestModel, Report};
use crate::schema::{report_schema, validate};

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl GlobalOpts {
    /// The config file, or the bundled demo, with `--seed` applied.
    pub fn config(&self) -> Result<BenchmarkConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => BenchmarkConfig::load(p)?,
            None => BenchmarkConfig::demo(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, cfg: &BenchmarkConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("rpu-out"))
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        match self.jobs {
            Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
            Some(j) => b = b.num_threads(j),
            None => {}
        }
        b.build().map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
    }
}

/// Writes the simulated world's `train.csv`, `holdout.csv` and `test.csv`.
pub fn cmd_simulate(cfg: &BenchmarkConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let w = cfg.data.world.clone().unwrap_or_default();
    let s = simulate_splits(&w.world_config(), w.train, w.holdout, w.test)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    for (name, ds) in [("train", &s.train), ("holdout", &s.holdout), ("test", &s.test)] {
        if ds.is_empty() {
            continue;
        }
        let p = out.join(format!("{name}.csv"));
        write_csv(ds, &p)?;
        written.push(p);
    }
    Ok(written)
}

/// What to generate from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    /// A config model name or a generator kind, fitted on the train split.
    Fit(String),
    /// A model file written by `--save-model`.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub model: String,
    pub kind: GeneratorKind,
    pub seed: u64,
    pub n: usize,
    pub output: PathBuf,
    pub fit_ms: Option<u128>,
}

impl std::fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}, seed {}): {} rows -> {}", self.model, self.kind, self.seed, self.n, self.output.display())?;
        if let Some(ms) = self.fit_ms {
            write!(f, ", fitted in {ms} ms")?;
        }
        Ok(())
    }
}

/// Resolves a model by config entry name first, then by generator kind.
pub fn resolve_model(cfg: &BenchmarkConfig, name: &str) -> Result<(String, GeneratorSpec, u64), CliError> {
    if let Some(i) = cfg.models.iter().position(|m| m.display_name() == name) {
        return Ok((name.to_owned(), cfg.models[i].spec.clone(), cfg.model_seed(i)));
    }
    let kind = GeneratorKind::from_str(name).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((name.to_owned(), GeneratorSpec::default_for(kind), cfg.seed))
}

pub fn cmd_generate(
    cfg: &BenchmarkConfig,
    source: &ModelSource,
    n: Option<usize>,
    output: &Path,
    save_model: Option<&Path>,
) -> Result<GenerateSummary, CliError> {
    if n == Some(0) {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (name, model, fit_ms, train_n) = match source {
        ModelSource::File(p) => {
            let m = GeneratorModel::load(p)?;
            let train_n = match n {
                Some(_) => None,
                None => Some(load_real_data(cfg)?.train.len()),
            };
            (m.kind().name().to_owned(), m, None, train_n)
        }
        ModelSource::Fit(name) => {
            let (name, spec, seed) = resolve_model(cfg, name)?;
            let data = load_real_data(cfg)?;
            let t = Instant::now();
            let m = fit_generator(&spec, &data.train, seed)?;
            (name, m, Some(t.elapsed().as_millis()), Some(data.train.len()))
        }
    };
    let n = n.or(train_n).expect("row count resolved");
    if let Some(p) = save_model {
        model.save(p)?;
    }
    let syn = sample(&model, n, model.seed)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_csv(&syn, output)?;
    Ok(GenerateSummary { model: name, kind: model.kind(), seed: model.seed, n, output: output.to_path_buf(), fit_ms })
}

struct Evaluated {
    outcomes: Vec<ModelOutcome>,
    failures: Vec<FailureEntry>,
    manifest_models: Vec<ManifestModel>,
    timings: BTreeMap<String, u128>,
}

fn finish(
    command: &str,
    opts: &GlobalOpts,
    cfg: &BenchmarkConfig,
    data: &RealData,
    out: &Path,
    mut ev: Evaluated,
    started: Instant,
) -> Result<Report, CliError> {
    let reports = ev.outcomes.iter().map(|o| o.report.clone()).collect();
    let report = Report::assemble(command, cfg, DataSummary::new(data, cfg), reports, ev.failures);
    let mut files = write_report_files(&report, out)?;
    let refs: Vec<&ModelOutcome> = ev.outcomes.iter().collect();
    files.extend(write_plot_files(&refs, out)?);
    files.push("manifest.json".to_owned());
    ev.timings.insert("total".into(), started.elapsed().as_millis());
    let manifest = Manifest {
        tool_version: report.tool_version.clone(),
        generated_at: report.generated_at.clone(),
        command: command.to_owned(),
        config: cfg.clone(),
        seed: cfg.seed,
        jobs: opts.jobs.unwrap_or_else(rayon::current_num_threads),
        models: ev.manifest_models,
        timings_ms: ev.timings,
        files,
    };
    write_manifest(&manifest, out)?;
    if report.scorecard.is_none() {
        return Err(CliError::Runtime(format!("no scorecard produced; see {}", out.join("report.json").display())));
    }
    Ok(report)
}

/// Fits every configured generator, samples `n` rows (default |train|) and
/// evaluates them. A failing model is recorded and the rest carry on.
pub fn cmd_benchmark(opts: &GlobalOpts, cfg: &BenchmarkConfig, out: &Path) -> Result<Report, CliError> {
    if cfg.models.is_empty() {
        return Err(CliError::Usage("config lists no models".into()));
    }
    let started = Instant::now();
    let pool = opts.pool()?;
    let data = load_real_data(cfg)?;
    let t = Instant::now();
    let reference = pool.install(|| Reference::prepare(cfg, &data))?;
    let mut timings = BTreeMap::from([("prepare".to_owned(), t.elapsed().as_millis())]);

    type Run = (Result<ModelOutcome, FailureEntry>, Vec<(String, u128)>);
    let runs: Vec<Run> = pool.install(|| {
        cfg.models
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let name = entry.display_name();
                let seed = cfg.model_seed(i);
                let mut times = Vec::new();
                let res = (|| {
                    let t = Instant::now();
                    let model =
                        fit_generator(&entry.spec, &data.train, seed).map_err(|e| FailureEntry::new(&name, "fit", e))?;
                    times.push((format!("{name}.fit"), t.elapsed().as_millis()));
                    let t = Instant::now();
                    let syn = sample(&model, entry.n.unwrap_or(data.train.len()), seed)
                        .map_err(|e| FailureEntry::new(&name, "sample", e))?;
                    times.push((format!("{name}.sample"), t.elapsed().as_millis()));
                    let t = Instant::now();
                    let mut o = reference.evaluate(&name, &syn)?;
                    times.push((format!("{name}.evaluate"), t.elapsed().as_millis()));
                    o.report.generator =
                        Some(GeneratorInfo { kind: model.kind().name().to_owned(), seed, epsilon: model.epsilon() });
                    Ok(o)
                })();
                (res, times)
            })
            .collect()
    });

    let mut ev = Evaluated { outcomes: Vec::new(), failures: Vec::new(), manifest_models: Vec::new(), timings: BTreeMap::new() };
    for (i, (res, times)) in runs.into_iter().enumerate() {
        let entry = &cfg.models[i];
        ev.manifest_models.push(ManifestModel {
            name: entry.display_name(),
            kind: Some(entry.spec.kind().name().to_owned()),
            seed: Some(cfg.model_seed(i)),
            source: None,
        });
        timings.extend(times);
        match res {
            Ok(o) => ev.outcomes.push(o),
            Err(f) => {
                log::error!("{}: {} failed: {}", f.model, f.stage, f.error);
                ev.failures.push(f);
            }
        }
    }
    ev.timings = timings;
    finish("benchmark", opts, cfg, &data, out, ev, started)
}

/// Model name for a synthetic CSV: its file stem, made unique.
fn names_for(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "synthetic".into());
            let c = seen.entry(stem.clone()).or_insert(0);
            *c += 1;
            if *c == 1 {
                stem
            } else {
                format!("{stem}-{c}")
            }
        })
        .collect()
}

/// Evaluates existing synthetic CSVs against the configured real data.
pub fn cmd_evaluate(opts: &GlobalOpts, cfg: &BenchmarkConfig, syn_paths: &[PathBuf], out: &Path) -> Result<Report, CliError> {
    if syn_paths.is_empty() {
        return Err(CliError::Usage("evaluate needs at least one synthetic CSV".into()));
    }
    let started = Instant::now();
    let pool = opts.pool()?;
    let data = load_real_data(cfg)?;
    let t = Instant::now();
    let reference = pool.install(|| Reference::prepare(cfg, &data))?;
    let mut timings = BTreeMap::from([("prepare".to_owned(), t.elapsed().as_millis())]);
    let names = names_for(syn_paths);

    let runs: Vec<(Result<ModelOutcome, FailureEntry>, u128)> = pool.install(|| {
        syn_paths
            .par_iter()
            .zip(&names)
            .map(|(p, name)| {
                let t = Instant::now();
                let res = load_csv(p, DatasetRole::Synthetic)
                    .map_err(|e| FailureEntry::new(name, "load", e))
                    .map(|ds: TripDataset| ds.relabeled(DatasetRole::Synthetic, name.clone()))
                    .and_then(|ds| reference.evaluate(name, &ds));
                (res, t.elapsed().as_millis())
            })
            .collect()
    });

    let mut ev = Evaluated { outcomes: Vec::new(), failures: Vec::new(), manifest_models: Vec::new(), timings: BTreeMap::new() };
    for ((res, ms), (p, name)) in runs.into_iter().zip(syn_paths.iter().zip(&names)) {
        ev.manifest_models.push(ManifestModel { name: name.clone(), kind: None, seed: None, source: Some(p.clone()) });
        timings.insert(format!("{name}.evaluate"), ms);
        match res {
            Ok(o) => ev.outcomes.push(o),
            Err(f) => {
                log::error!("{}: {} failed: {}", f.model, f.stage, f.error);
                ev.failures.push(f);
            }
        }
    }
    ev.timings = timings;
    finish("evaluate", opts, cfg, &data, out, ev, started)
}

/// Validates an existing `report.json` against the bundled schema and
/// rewrites its scorecard and leaderboard into `out`. Returns the
/// leaderboard text.
pub fn cmd_report(report_path: &Path, out: &Path) -> Result<String, CliError> {
    let path = if report_path.is_dir() { report_path.join("report.json") } else { report_path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(rpu_core::RpuError::from)?;
    validate(&value, &report_schema())
        .map_err(|errs| CliError::Runtime(format!("{} does not match the report schema:\n  {}", path.display(), errs.join("\n  "))))?;
    let report: Report = serde_json::from_value(value).map_err(rpu_core::RpuError::from)?;
    write_report_files(&report, out)?;
    Ok(report.leaderboard_text())
}
