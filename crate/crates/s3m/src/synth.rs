//! Synthetic crash-report corpora.
//!
//! [`generate`] writes a NetBeans-like stream. Every bucket is one defect,
//! pinned down by a crash site of a few frames in some module. Reports of
//! a defect reach it through one of a handful of caller paths taken from a
//! pool shared by all defects, so most frames of a trace say little about
//! its bucket. Below the path sits one of a few thread entry points. Some
//! reports carry reflection or logging wrappers on top of the stack, and
//! caller frames are occasionally dropped or repeated. A share of defects
//! are siblings of an older one: the same crash site frames in another
//! order, or the same site with one frame replaced.
//!
//! [`separable_toy`] is the small overfitting fixture.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use s3m_core::split::SECONDS_PER_DAY;
use s3m_core::StackTrace;

/// 2010-01-01T00:00:00Z.
pub const DEFAULT_START: u64 = 1_262_304_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_reports: usize,
    pub days: u64,
    pub start: u64,
    pub seed: u64,
    pub n_modules: usize,
    pub frames_per_module: usize,
    pub n_caller_paths: usize,
    /// Probability that a new bucket is a sibling of an older one.
    pub sibling_rate: f64,
    /// Mean gap in days between consecutive reports of one bucket.
    pub mean_gap_days: f64,
    pub max_bucket_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_reports: 2400,
            days: 400,
            start: DEFAULT_START,
            seed: 0,
            n_modules: 16,
            frames_per_module: 24,
            n_caller_paths: 40,
            sibling_rate: 0.4,
            mean_gap_days: 6.0,
            max_bucket_size: 12,
        }
    }
}

const MODULES: &[&str] = &[
    "editor", "java.source", "debugger.jpda", "versioning.util", "projectapi", "form", "j2ee.common",
    "db.explorer", "xml.text", "refactoring.java", "navigator", "options.editor", "java.hints",
    "maven.embedder", "web.core", "profiler", "cnd.modelimpl", "php.editor", "git", "junit",
];
const CLASS_HEAD: &[&str] = &[
    "Base", "Default", "Abstract", "Java", "Editor", "Source", "Project", "Lazy", "Simple", "Tree", "Index",
    "File", "Node", "Query", "Layer", "Module",
];
const CLASS_TAIL: &[&str] = &[
    "Document", "Parser", "Task", "Support", "Manager", "Handler", "Provider", "Model", "View", "Panel",
    "Listener", "Cache", "Factory", "Registry", "Action", "Children",
];
const METHODS: &[&str] = &[
    "run", "process", "getValue", "update", "refresh", "invoke", "create", "find", "resolve", "notify",
    "fire", "propertyChange", "actionPerformed", "doWork", "compute", "load", "save", "parse", "init",
    "dispose", "getChildren", "addNotify", "paint", "layout",
];
const ENTRY_POINTS: &[&[&str]] = &[
    &[
        "java.awt.EventQueue.dispatchEventImpl",
        "java.awt.EventQueue.dispatchEvent",
        "java.awt.EventDispatchThread.pumpOneEventForFilters",
        "java.awt.EventDispatchThread.pumpEventsForFilter",
        "java.awt.EventDispatchThread.pumpEvents",
        "java.awt.EventDispatchThread.run",
    ],
    &[
        "org.openide.util.RequestProcessor$Task.run",
        "org.openide.util.RequestProcessor$Processor.run",
    ],
    &[
        "org.netbeans.modules.parsing.impl.TaskProcessor$CompilationJob.run",
        "java.util.concurrent.FutureTask.run",
        "java.util.concurrent.ThreadPoolExecutor.runWorker",
        "java.util.concurrent.ThreadPoolExecutor$Worker.run",
        "java.lang.Thread.run",
    ],
    &["org.netbeans.core.startup.Main.start", "org.netbeans.core.startup.Main.main"],
];

#[derive(Debug, Clone)]
struct Defect {
    site: Vec<String>,
    paths: Vec<usize>,
    entry: usize,
}

fn method_frame(rng: &mut ChaCha8Rng, module: &str) -> String {
    format!(
        "org.netbeans.modules.{module}.{}{}.{}",
        CLASS_HEAD.choose(rng).unwrap(),
        CLASS_TAIL.choose(rng).unwrap(),
        METHODS.choose(rng).unwrap()
    )
}

fn wrapper(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..6) {
        0 => "java.lang.reflect.Method.invoke".into(),
        1 => format!("sun.reflect.GeneratedMethodAccessor{}.invoke", rng.gen_range(1..400)),
        2 => "sun.reflect.DelegatingMethodAccessorImpl.invoke".into(),
        3 => "org.openide.util.Exceptions.printStackTrace".into(),
        4 => "org.netbeans.core.NbErrorManager.notify".into(),
        _ => "java.util.logging.Logger.log".into(),
    }
}

/// Bucket sizes in `2..=max` summing to exactly `n`.
fn bucket_sizes(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let mut s = 2;
        while s < max && rng.gen_bool(0.45) {
            s += 1;
        }
        if left - s.min(left) < 2 {
            s = left;
        }
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// Generates `config.n_reports` reports; report ids are chronological and
/// a bucket id is the report id of its first report.
pub fn generate(config: &SynthConfig) -> Vec<StackTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let modules: Vec<&str> = MODULES.iter().copied().cycle().take(config.n_modules.max(1)).collect();
    let pools: Vec<Vec<String>> = modules
        .iter()
        .map(|m| (0..config.frames_per_module).map(|_| method_frame(&mut rng, m)).collect())
        .collect();
    let paths: Vec<Vec<String>> = (0..config.n_caller_paths.max(1))
        .map(|_| {
            let len = rng.gen_range(4..=10);
            (0..len)
                .map(|_| {
                    let m = rng.gen_range(0..pools.len());
                    pools[m].choose(&mut rng).unwrap().clone()
                })
                .collect()
        })
        .collect();
    let pick_paths = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let n = rng.gen_range(1..=3);
        (0..n).map(|_| rng.gen_range(0..paths.len())).collect()
    };

    let sizes = bucket_sizes(&mut rng, config.n_reports, config.max_bucket_size.max(2));
    let mut defects: Vec<Defect> = Vec::with_capacity(sizes.len());
    for _ in 0..sizes.len() {
        let sibling = !defects.is_empty() && rng.gen_bool(config.sibling_rate);
        let d = if sibling {
            let mut d = defects.choose(&mut rng).unwrap().clone();
            let i = rng.gen_range(0..d.site.len() - 1);
            if rng.gen_bool(0.5) {
                d.site.swap(i, i + 1);
            } else {
                let pool = pools.choose(&mut rng).unwrap();
                d.site[i] = pool.choose(&mut rng).unwrap().clone();
            }
            d.paths = pick_paths(&mut rng);
            d
        } else {
            let pool = pools.choose(&mut rng).unwrap();
            let n = rng.gen_range(2..=4);
            Defect {
                site: pool.choose_multiple(&mut rng, n).cloned().collect(),
                paths: pick_paths(&mut rng),
                entry: rng.gen_range(0..ENTRY_POINTS.len()),
            }
        };
        defects.push(d);
    }

    let span = config.days.max(1) * SECONDS_PER_DAY;
    let mut reports: Vec<(u64, usize, Vec<String>)> = Vec::with_capacity(config.n_reports);
    for (b, (defect, &size)) in defects.iter().zip(&sizes).enumerate() {
        let mut t = rng.gen_range(0..span);
        for _ in 0..size {
            reports.push((t, b, render(&mut rng, defect, &paths)));
            let gap: f64 = -config.mean_gap_days * (1.0 - rng.gen::<f64>()).ln();
            t += (gap * SECONDS_PER_DAY as f64) as u64 + 1;
        }
    }
    reports.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut first_report = vec![None; defects.len()];
    reports
        .into_iter()
        .enumerate()
        .map(|(i, (t, b, frames))| {
            let id = i as u64 + 1;
            let bucket = *first_report[b].get_or_insert(id);
            StackTrace::from_names(id, bucket, config.start + t, &frames).expect("generated frames are valid")
        })
        .collect()
}

fn render(rng: &mut ChaCha8Rng, d: &Defect, paths: &[Vec<String>]) -> Vec<String> {
    let mut out = Vec::new();
    if rng.gen_bool(0.25) {
        for _ in 0..rng.gen_range(1..=2) {
            out.push(wrapper(rng));
        }
    }
    out.extend(d.site.iter().cloned());
    for f in &paths[*d.paths.choose(rng).unwrap()] {
        if rng.gen_bool(0.1) {
            continue;
        }
        out.push(f.clone());
        if rng.gen_bool(0.05) {
            out.push(f.clone());
        }
    }
    let entry = if rng.gen_bool(0.15) { rng.gen_range(0..ENTRY_POINTS.len()) } else { d.entry };
    out.extend(ENTRY_POINTS[entry].iter().map(|s| s.to_string()));
    out
}

/// Five buckets of four near-duplicate traces over disjoint token sets
/// (days 0 to 3), one more trace per bucket on day 4 and one on day 5.
/// Split with `(4, 1, 1)` days from [`DEFAULT_START`].
pub fn separable_toy() -> Vec<StackTrace> {
    let mut out = Vec::new();
    let mut id = 0;
    for day in 0..6u64 {
        for b in 0..5u64 {
            id += 1;
            let frames: Vec<String> = (0..4)
                .map(|k| format!("org.toy{b}.Unit{k}.m{}", (k + day) % 4))
                .collect();
            let ts = DEFAULT_START + day * SECONDS_PER_DAY + b * 60;
            out.push(StackTrace::from_names(id, b + 1, ts, &frames).unwrap());
        }
    }
    out
}
