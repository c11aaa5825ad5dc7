//! Subcommand implementations. Results go to `out`, diagnostics to `err`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use s3m_core::autodiff::GradcheckOptions;
use s3m_core::retrieval::{evaluate, MetricsReport, PrefixMatch, TfIdfMeasure, NeuralMeasure, SimilarityMeasure};
use s3m_core::train::{self, EpochRecord, TrainOutcome};
use s3m_core::{build_vocab, time_split, Dataset, S3MModel, Split, TrimLevel, Vocabulary};

use crate::bundle::Bundle;
use crate::cli::*;
use crate::config::{ConfigArgs, RunConfig};
use crate::dataset::{parse_dataset, write_dataset, DatasetFormat, Loaded, ReportRecord};
use crate::error::{Error, Result};
use crate::gradcheck::run_seed;
use crate::netbeans::{convert_str, ConvertOptions};
use crate::report;
use crate::synth::{generate, separable_toy, SynthConfig};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Process-level context: the `S3M_SEED` value and the two streams.
pub struct Io<'a> {
    pub env_seed: Option<String>,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Io<'_> {
    fn resolve(&mut self, args: &ConfigArgs, command: impl Serialize) -> Result<RunConfig> {
        let cfg = RunConfig::resolve(args, self.env_seed.as_deref())?.with_command(command);
        self.note(format_args!("config: {}", cfg.to_json()));
        Ok(cfg)
    }

    fn note(&mut self, msg: std::fmt::Arguments) {
        let _ = writeln!(self.err, "{msg}");
    }

    fn emit(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| if text.ends_with('\n') { Ok(()) } else { self.out.write_all(b"\n") })
            .map_err(Error::io("<stdout>"))
    }

    fn env_seed(&self, flag: Option<u64>) -> Result<u64> {
        match (flag, &self.env_seed) {
            (Some(s), _) => Ok(s),
            (None, Some(s)) => s
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{}={s:?} is not an unsigned integer", crate::config::SEED_ENV))),
            (None, None) => Ok(0),
        }
    }
}

pub fn run(cli: Cli, io: &mut Io) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(&a, io),
        Command::Train(a) => train_cmd(&a, io),
        Command::Eval(a) => eval(&a, io),
        Command::Baseline(a) => baseline(&a, io),
        Command::SweepTrim(a) => sweep_trim(&a, io),
        Command::Gradcheck(a) => gradcheck(&a, io),
        Command::ConvertNetbeans(a) => convert(&a, io),
        Command::Synth(a) => synth(&a, io),
    }
}

fn report_parse(io: &mut Io, path: &Path, loaded: &Loaded) {
    if loaded.stats.malformed > 0 {
        io.note(format_args!(
            "warning: {}: skipped {} malformed lines",
            path.display(),
            loaded.stats.malformed
        ));
        for (line, why) in &loaded.stats.first_errors {
            io.note(format_args!("  line {line}: {why}"));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionSummary {
    pub reports: usize,
    pub buckets: usize,
    pub mean_bucket_size: f64,
}

impl PartitionSummary {
    pub fn of(ds: &Dataset) -> Self {
        PartitionSummary {
            reports: ds.len(),
            buckets: ds.buckets().len(),
            mean_bucket_size: ds.mean_bucket_size(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub reports_parsed: usize,
    pub malformed_lines: usize,
    pub window: (u64, u64),
    pub boundaries: [u64; 2],
    pub dropped: usize,
    pub train: PartitionSummary,
    pub validation: PartitionSummary,
    pub test: PartitionSummary,
}

impl SplitSummary {
    pub fn new(split: &Split, loaded: &Loaded) -> Self {
        SplitSummary {
            reports_parsed: loaded.stats.valid,
            malformed_lines: loaded.stats.malformed,
            window: split.window,
            boundaries: split.boundaries,
            dropped: split.dropped,
            train: PartitionSummary::of(&split.train),
            validation: PartitionSummary::of(&split.validation),
            test: PartitionSummary::of(&split.test),
        }
    }
}

pub fn split_loaded(loaded: &Loaded, cfg: &RunConfig) -> Result<Split> {
    let ds = &loaded.dataset;
    let start = cfg.start.or(ds.min_timestamp()).ok_or(s3m_core::Error::EmptyDataset)?;
    Ok(time_split(ds, cfg.train_days, cfg.val_days, cfg.test_days, start)?)
}

fn prepare(a: &PrepareArgs, io: &mut Io) -> Result<()> {
    let cfg = io.resolve(&a.config, a)?;
    let loaded = parse_dataset(&a.input, a.format)?;
    report_parse(io, &a.input, &loaded);
    let split = split_loaded(&loaded, &cfg)?;
    write_split(&a.out, &split)?;
    let summary = serde_json::to_string_pretty(&SplitSummary::new(&split, &loaded))?;
    let path = a.out.join(SUMMARY_FILE);
    fs::write(&path, &summary).map_err(Error::io(&path))?;
    io.emit(&summary)
}

pub fn write_split(dir: &Path, split: &Split) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_dataset(&dir.join(TRAIN_FILE), split.train.traces())?;
    write_dataset(&dir.join(VALIDATION_FILE), split.validation.traces())?;
    write_dataset(&dir.join(TEST_FILE), split.test.traces())?;
    Ok(())
}

/// Reads a directory written by `prepare`. The validation file may be
/// empty; train and test may not.
pub fn load_split(dir: &Path, io: &mut Io) -> Result<Split> {
    let mut read = |name: &str, optional: bool| -> Result<Dataset> {
        let path = dir.join(name);
        match parse_dataset(&path, DatasetFormat::Jsonl) {
            Ok(l) => {
                report_parse(io, &path, &l);
                Ok(l.dataset)
            }
            Err(Error::NoValidRecords { malformed: 0, .. }) if optional => Ok(Dataset::default()),
            Err(e) => Err(e),
        }
    };
    let train = read(TRAIN_FILE, false)?;
    let validation = read(VALIDATION_FILE, true)?;
    let test = read(TEST_FILE, false)?;
    Ok(Split::from_partitions(train, validation, test)?)
}

/// Trains with `cfg`; each epoch record is passed to `on_epoch`.
pub fn train_split(
    split: &Split,
    cfg: &RunConfig,
    start: Option<Bundle>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TrainOutcome, Vocabulary)> {
    let tc = cfg.train_config();
    let vocab = build_vocab(&split.train, cfg.trim)?;
    let outcome = match start {
        Some(b) => {
            if b.max_len != cfg.max_len {
                return Err(Error::Usage(format!(
                    "bundle was trained with --max-len {}, requested {}",
                    b.max_len, cfg.max_len
                )));
            }
            train::resume(b.model, &b.vocab, split, &tc, |r, _| on_epoch(r))?
        }
        None => {
            let model = S3MModel::init(cfg.model_config(vocab.len()))?;
            train::train_with(model, &vocab, split, &tc, |r, _| on_epoch(r))?
        }
    };
    Ok((outcome, vocab))
}

fn history_path(a: &TrainArgs) -> PathBuf {
    a.history.clone().unwrap_or_else(|| {
        let mut s = a.out_model.clone().into_os_string();
        s.push(".history.jsonl");
        s.into()
    })
}

fn train_cmd(a: &TrainArgs, io: &mut Io) -> Result<()> {
    let mut cfg = io.resolve(&a.config, a)?;
    let split = load_split(&a.data, io)?;
    let start = match &a.resume {
        Some(p) => {
            let b = Bundle::load(p)?;
            if a.config.knobs.trim.is_none() {
                cfg.trim = b.trim_level();
            }
            Some(b)
        }
        None => None,
    };
    let hpath = history_path(a);
    let file = File::create(&hpath).map_err(Error::io(&hpath))?;
    let mut hist = BufWriter::new(file);
    let mut write_err = None;
    let err = &mut *io.err;
    let (outcome, _) = train_split(&split, &cfg, start, |r| {
        let _ = writeln!(
            err,
            "epoch {:>3}  mean loss {:.6}  val MRR {}",
            r.epoch,
            r.mean_loss,
            r.val_mrr.map_or("n/a".to_string(), |m| format!("{m:.4}"))
        );
        let line = serde_json::to_string(r).expect("record serializes");
        if let Err(e) = writeln!(hist, "{line}").and_then(|_| hist.flush()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::Io { path: hpath, source: e });
    }
    let vocab = build_vocab(&split.train, cfg.trim)?;
    Bundle::new(outcome.model, vocab, cfg.max_len)?.save(&a.out_model)?;
    let best = &outcome.history[outcome.best_epoch - 1];
    io.emit(&json!({
        "best_epoch": outcome.best_epoch,
        "val_mrr": best.val_mrr,
        "mean_loss": best.mean_loss,
        "epochs": outcome.history.len(),
        "groups_per_epoch": outcome.groups_per_epoch,
        "model": a.out_model,
        "history": hpath,
    }).to_string())
}

/// Evaluates a bundle on the test window.
pub fn eval_bundle(bundle: &Bundle, split: &Split, cfg: &RunConfig) -> Result<s3m_core::retrieval::EvalOutcome> {
    let mut m = NeuralMeasure::new(&bundle.model, &bundle.vocab, bundle.max_len)?;
    Ok(evaluate(&mut m, split, &cfg.eval_config())?)
}

fn eval(a: &EvalArgs, io: &mut Io) -> Result<()> {
    let cfg = io.resolve(&a.config, a)?;
    let bundle = Bundle::load(&a.model)?;
    io.note(format_args!(
        "bundle: trim level {}, max_len {}, vocabulary {}, hidden {}",
        bundle.trim_level(),
        bundle.max_len,
        bundle.vocab.len(),
        bundle.model.config().hidden_dim
    ));
    if let Some(t) = a.config.knobs.trim {
        if t as usize != bundle.trim_level().get() {
            io.note(format_args!(
                "note: --trim {t} differs from the bundle's trim level {}; the bundle's vocabulary decides",
                bundle.trim_level()
            ));
        }
    }
    let split = load_split(&a.data, io)?;
    let outcome = eval_bundle(&bundle, &split, &cfg)?;
    if let Some(p) = &a.per_query {
        let f = File::create(p).map_err(Error::io(p))?;
        let mut w = BufWriter::new(f);
        report::write_per_query_csv(&mut w, &outcome.results)
            .and_then(|_| w.flush())
            .map_err(Error::io(p))?;
    }
    if a.json {
        io.emit(&report::to_json(&outcome.report))
    } else {
        io.emit(&report::table(&[("S3M".to_string(), &outcome.report)]))
    }
}

pub fn baseline_report(method: Method, level: TrimLevel, split: &Split, cfg: &RunConfig) -> Result<(String, MetricsReport)> {
    let mut m: Box<dyn SimilarityMeasure> = match method {
        Method::Prefix => Box::new(PrefixMatch { trim_level: level }),
        Method::Tfidf => Box::new(TfIdfMeasure::streaming(level)),
    };
    let name = m.name().to_string();
    Ok((name, evaluate(&mut *m, split, &cfg.eval_config())?.report))
}

fn baseline(a: &BaselineArgs, io: &mut Io) -> Result<()> {
    let cfg = io.resolve(&a.config, a)?;
    let split = load_split(&a.data, io)?;
    let levels: Vec<TrimLevel> = if a.trim_sweep { TrimLevel::all().collect() } else { vec![cfg.trim] };
    for level in levels {
        let (name, r) = baseline_report(a.method, level, &split, &cfg)?;
        if a.json {
            io.emit(&json!({"method": name, "trim": level, "metrics": r}).to_string())?;
        } else {
            io.emit(&format!("trim = {level}\n{}", report::table(&[(name, &r)])))?;
        }
    }
    Ok(())
}

fn parse_levels(raw: &[String]) -> Result<Vec<TrimLevel>> {
    let mut levels = Vec::new();
    for s in raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let n: u32 = s.parse().map_err(|_| Error::Usage(format!("trim level `{s}` is not an integer")))?;
        levels.push(TrimLevel::new(n)?);
    }
    levels.sort();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::Usage("--levels is empty".into()));
    }
    Ok(levels)
}

fn sweep_trim(a: &SweepArgs, io: &mut Io) -> Result<()> {
    let cfg = io.resolve(&a.config, a)?;
    let levels = parse_levels(&a.levels)?;
    let split = load_split(&a.data, io)?;
    if let Some(d) = &a.out_dir {
        fs::create_dir_all(d).map_err(Error::io(d))?;
    }
    let mut rows = Vec::new();
    for level in levels {
        let lc = RunConfig { trim: level, ..cfg.clone() };
        let err = &mut *io.err;
        let (outcome, vocab) = train_split(&split, &lc, None, |r| {
            let _ = writeln!(err, "trim {level} epoch {:>3}  mean loss {:.6}", r.epoch, r.mean_loss);
        })?;
        let bundle = Bundle::new(outcome.model, vocab, lc.max_len)?;
        if let Some(d) = &a.out_dir {
            bundle.save(&d.join(format!("trim{level}.s3m")))?;
        }
        rows.push((level, eval_bundle(&bundle, &split, &lc)?.report));
    }
    if a.json {
        for (level, r) in &rows {
            io.emit(&json!({"trim": level, "metrics": r}).to_string())?;
        }
        Ok(())
    } else {
        let named: Vec<(String, &MetricsReport)> = rows.iter().map(|(l, r)| (format!("S3M trim={l}"), r)).collect();
        io.emit(&report::table(&named))
    }
}

fn gradcheck(a: &GradcheckArgs, io: &mut Io) -> Result<()> {
    let first = io.env_seed(a.seed)?;
    io.note(format_args!(
        "config: {}",
        json!({"seed": first, "seeds": a.seeds, "tolerance": a.tolerance, "step": a.step, "inject_bug": a.inject_bug})
    ));
    let opts = GradcheckOptions {
        step: a.step,
        tolerance: a.tolerance,
        ..Default::default()
    };
    let mut worst: Option<(String, u64, s3m_core::autodiff::Coordinate)> = None;
    let mut max_err: f64 = 0.0;
    let (mut checks, mut coords, mut failed) = (0, 0, 0);
    for seed in first..first + a.seeds {
        for r in run_seed(seed, &opts, a.inject_bug)? {
            checks += 1;
            coords += r.report.checked;
            if !r.report.passed {
                failed += 1;
            }
            let w = r.report.non_finite.clone().or(r.report.worst.clone());
            let line = match &w {
                Some(c) => format!(
                    "{:<20} seed {:>3}  {:>5} coords  max rel {:.3e}  worst {}[{}] analytic {:.9e} numeric {:.9e}  {}",
                    r.name, seed, r.report.checked, r.report.max_rel_error, c.param, c.index, c.analytic, c.numeric,
                    if r.report.passed { "ok" } else { "FAIL" }
                ),
                None => format!("{:<20} seed {:>3}  no coordinates", r.name, seed),
            };
            io.emit(&line)?;
            if r.report.max_rel_error.is_nan() || r.report.max_rel_error > max_err || worst.is_none() {
                max_err = if r.report.max_rel_error.is_nan() { f64::INFINITY } else { r.report.max_rel_error };
                worst = w.map(|c| (r.name.clone(), seed, c));
            }
        }
    }
    if let Some((name, seed, c)) = &worst {
        io.emit(&format!(
            "worst coordinate: {name} seed {seed} {}[{}] analytic {:.12e} numeric {:.12e} rel {:.3e}",
            c.param, c.index, c.analytic, c.numeric, c.rel_error
        ))?;
    }
    let verdict = if failed == 0 { "PASS" } else { "FAIL" };
    io.emit(&format!(
        "{verdict}: {checks} checks, {coords} coordinates, {failed} failed, max relative error {max_err:.3e} (tolerance {:e})",
        a.tolerance
    ))?;
    if failed > 0 {
        return Err(Error::GradcheckFailed { max_rel_error: max_err, tolerance: a.tolerance });
    }
    Ok(())
}

fn write_records(path: &Path, records: &[ReportRecord]) -> Result<()> {
    let f = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    })();
    res.map_err(Error::io(path))
}

fn convert(a: &ConvertArgs, io: &mut Io) -> Result<()> {
    let options = ConvertOptions {
        id_key: a.id_key.clone(),
        duplicate_key: a.duplicate_key.clone(),
        timestamp_key: a.timestamp_key.clone(),
        timestamp_unit: a.timestamp_unit,
        frames_key: a.frames_key.clone(),
        frame_name_key: a.frame_name_key.clone(),
    };
    io.note(format_args!("config: {}", serde_json::to_string(a)?));
    let text = fs::read_to_string(&a.input).map_err(Error::io(&a.input))?;
    let (records, stats) = convert_str(&text, &options)?;
    for e in &stats.first_errors {
        io.note(format_args!("skipped: {e}"));
    }
    write_records(&a.out, &records)?;
    io.emit(&json!({
        "converted": stats.converted,
        "skipped": stats.skipped,
        "dangling_links": stats.dangling_links,
        "out": a.out,
    }).to_string())
}

fn synth(a: &SynthArgs, io: &mut Io) -> Result<()> {
    let seed = io.env_seed(a.seed)?;
    let cfg = SynthConfig {
        n_reports: a.reports,
        days: a.days,
        start: a.start,
        seed,
        sibling_rate: a.sibling_rate,
        ..Default::default()
    };
    if !(0.0..=1.0).contains(&cfg.sibling_rate) || cfg.n_reports < 2 {
        return Err(Error::Usage("--reports must be at least 2 and --sibling-rate within [0, 1]".into()));
    }
    io.note(format_args!("config: {}", json!({"toy": a.toy, "synth": cfg})));
    let traces = if a.toy { separable_toy() } else { generate(&cfg) };
    write_dataset(&a.out, &traces)?;
    let ds = Dataset::new(traces)?;
    io.emit(&json!({"reports": ds.len(), "buckets": ds.buckets().len(), "out": a.out}).to_string())
}
