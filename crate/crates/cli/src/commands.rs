//! Subcommand implementations, callable in-process so tests and the binary
//! share one code path. Every command is deterministic given its inputs and
//! seed; only reported wall times vary between runs.

use crate::args::Method;
use crate::report::{
    BenchReport, BenchResult, CalibrationReport, TensorReport, Values, SCHEMA_VERSION,
};
use crate::synthetic;
use octav_core::{
    empirical_mse, load_tensor, max_scalar, octav, percentile_magnitude, quantize_clipped,
    save_tensor, sweep, BoundaryMode, Error, Granularity, GroupView, OctavConfig, QuantSpec,
    Result, ScalarSet, Signedness, SweepMode, Tensor,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Quantization grid configuration shared by the subcommands.
#[derive(Debug, Clone, Copy)]
pub struct QuantOpts {
    pub bits: u32,
    pub signedness: Signedness,
    pub boundary: BoundaryMode,
    pub granularity: Granularity,
    /// Newton iteration budget for the octav method.
    pub iterations: usize,
}

impl QuantOpts {
    pub fn spec(&self) -> Result<QuantSpec> {
        Ok(QuantSpec::new(self.bits, self.signedness)?.with_boundary(self.boundary))
    }

    pub fn signedness_label(&self) -> &'static str {
        match self.signedness {
            Signedness::Signed => "signed",
            Signedness::Unsigned => "unsigned",
        }
    }

    pub fn boundary_label(&self) -> &'static str {
        match self.boundary {
            BoundaryMode::Mathematical => "math",
            BoundaryMode::TwosComplement => "twos",
        }
    }

    pub fn granularity_label(&self) -> String {
        match self.granularity {
            Granularity::PerTensor => "tensor".to_string(),
            Granularity::PerRow(axis) => format!("row:{axis}"),
        }
    }
}

/// One calibration unit: a tensor name and its batch files in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorFiles {
    pub name: String,
    pub paths: Vec<PathBuf>,
}

fn split_batch_suffix(stem: &str) -> Option<(&str, usize)> {
    let pos = stem.rfind(".batch")?;
    let (name, suffix) = stem.split_at(pos);
    let index: usize = suffix[".batch".len()..].parse().ok()?;
    if name.is_empty() {
        return None;
    }
    Some((name, index))
}

/// Collects the `.octv` files of a directory into per-tensor groups using
/// the `<name>.batch<k>.octv` convention; a file without the suffix is its
/// own single-batch tensor. `filter` restricts file names by glob.
pub fn scan_input_dir(dir: &Path, filter: Option<&str>) -> Result<Vec<TensorFiles>> {
    let pattern = match filter {
        Some(text) => Some(glob::Pattern::new(text).map_err(|e| Error::InvalidParameter {
            reason: format!("bad --batches glob {text:?}: {e}"),
        })?),
        None => None,
    };

    let mut grouped: BTreeMap<String, Vec<(Option<usize>, PathBuf)>> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("octv") {
            continue;
        }
        let file_name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_string(),
            None => continue,
        };
        if let Some(p) = &pattern {
            if !p.matches(&file_name) {
                continue;
            }
        }
        let stem = file_name.trim_end_matches(".octv");
        let (name, index) = match split_batch_suffix(stem) {
            Some((name, index)) => (name.to_string(), Some(index)),
            None => (stem.to_string(), None),
        };
        grouped.entry(name).or_default().push((index, path));
    }

    if grouped.is_empty() {
        return Err(Error::InvalidParameter {
            reason: format!("no OCTV files found in {}", dir.display()),
        });
    }

    let mut out = Vec::with_capacity(grouped.len());
    for (name, mut files) in grouped {
        let batch_count = files.iter().filter(|(i, _)| i.is_some()).count();
        if batch_count > 0 && batch_count != files.len() {
            return Err(Error::InvalidParameter {
                reason: format!("tensor {name:?} mixes plain and .batch<k> files"),
            });
        }
        files.sort_by_key(|(i, _)| *i);
        if files.windows(2).any(|w| w[0].0.is_some() && w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter {
                reason: format!("tensor {name:?} repeats a batch index"),
            });
        }
        out.push(TensorFiles { name, paths: files.into_iter().map(|(_, p)| p).collect() });
    }
    Ok(out)
}

/// One batch's candidate scalars under the chosen method. Degenerate groups
/// carry no candidate; sweep evaluates per group so zero-filled groups do
/// not abort the others.
fn candidate_scalars(
    t: &Tensor,
    view: GroupView,
    spec: QuantSpec,
    method: Method,
    iterations: usize,
) -> Result<ScalarSet> {
    match method {
        Method::Octav => {
            let cfg = OctavConfig { iterations, ..OctavConfig::default() };
            octav(t, view, spec, &cfg).map(|(set, _)| set)
        }
        Method::Max => max_scalar(t, view),
        Method::Percentile(p) => percentile_magnitude(t, view, p),
        Method::Sweep(points) => {
            let groups = view.group_count();
            let mut scalars = vec![0.0f64; groups];
            let mut degenerate = vec![false; groups];
            for g in 0..groups {
                let values = view.collect_group(t, g);
                if values.iter().all(|&v| v == 0.0) {
                    degenerate[g] = true;
                    continue;
                }
                let len = values.len();
                let sub = Tensor::from_vec(values, &[len])?;
                let sub_view = GroupView::for_shape(sub.shape(), Granularity::PerTensor)?;
                let curves = sweep(&sub, sub_view, spec, points, SweepMode::Empirical)?;
                scalars[g] = curves[0].best_scalar();
            }
            ScalarSet::with_degenerate(scalars, degenerate, view)
        }
    }
}

fn calibrate_one(
    files: &TensorFiles,
    method: Method,
    opts: &QuantOpts,
) -> Result<CalibratedTensor> {
    let spec = opts.spec()?;
    let mut batches = Vec::with_capacity(files.paths.len());
    for path in &files.paths {
        batches.push(load_tensor(path)?);
    }
    let shape = batches[0].shape().to_vec();
    if let Some(b) = batches.iter().find(|b| b.shape() != shape.as_slice()) {
        return Err(Error::InvalidParameter {
            reason: format!(
                "tensor {:?}: inconsistent batch shapes {:?} vs {:?}",
                files.name,
                shape,
                b.shape()
            ),
        });
    }
    let view = GroupView::for_shape(&shape, opts.granularity)?;
    let groups = view.group_count();

    // The timed region is the calibration computation itself; file IO and
    // the MSE audit stay outside.
    let started = Instant::now();
    let mut sums = vec![0.0f64; groups];
    let mut counts = vec![0usize; groups];
    for batch in &batches {
        let candidate = candidate_scalars(batch, view, spec, method, opts.iterations)?;
        for g in 0..groups {
            if !candidate.is_degenerate(g) {
                sums[g] += candidate.scalars()[g];
                counts[g] += 1;
            }
        }
    }
    let mut scalars = vec![0.0f64; groups];
    let mut degenerate = vec![false; groups];
    for g in 0..groups {
        if counts[g] == 0 {
            degenerate[g] = true;
        } else {
            scalars[g] = sums[g] / counts[g] as f64;
        }
    }
    let set = ScalarSet::with_degenerate(scalars, degenerate, view)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    // Achieved MSE over the union of the batches: batches share a shape, so
    // the per-batch group means average with equal weight.
    let mut mse = vec![0.0f64; groups];
    for batch in &batches {
        for (g, v) in empirical_mse(batch, &set, spec)?.into_iter().enumerate() {
            mse[g] += v;
        }
    }
    for v in &mut mse {
        *v /= batches.len() as f64;
    }
    let mean_mse = mse.iter().sum::<f64>() / groups as f64;

    let degenerate_groups = set.degenerate_flags().iter().filter(|&&d| d).count();
    let mut warnings = Vec::new();
    if degenerate_groups > 0 {
        warnings.push(format!(
            "tensor {:?}: {degenerate_groups} of {groups} group(s) degenerate (all zeros); \
             their scalars are reported as 0",
            files.name
        ));
    }

    let report = TensorReport {
        name: files.name.clone(),
        shape,
        granularity: opts.granularity_label(),
        method: method.to_string(),
        batches_averaged: batches.len(),
        group_count: groups,
        degenerate_groups,
        scalars: Values::from_values(set.scalars()),
        mse: Values::from_values(&mse),
        mean_mse,
        wall_seconds,
    };
    Ok((report, warnings))
}

type CalibratedTensor = (TensorReport, Vec<String>);

/// Calibrates every tensor group in `dir` and assembles the report.
/// `threads` > 1 spreads tensors across workers; results keep name order.
pub fn run_calibrate(
    dir: &Path,
    filter: Option<&str>,
    method: Method,
    opts: &QuantOpts,
    threads: usize,
) -> Result<CalibrationReport> {
    let groups = scan_input_dir(dir, filter)?;
    let mut slots: Vec<Option<CalibratedTensor>> = Vec::new();
    slots.resize_with(groups.len(), || None);

    if threads <= 1 || groups.len() <= 1 {
        for (slot, files) in slots.iter_mut().zip(&groups) {
            *slot = Some(calibrate_one(files, method, opts)?);
        }
    } else {
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let error: Mutex<Option<Error>> = Mutex::new(None);
        let results: Mutex<&mut Vec<Option<CalibratedTensor>>> = Mutex::new(&mut slots);
        let workers = threads.min(groups.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        return;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= groups.len() {
                        return;
                    }
                    match calibrate_one(&groups[i], method, opts) {
                        Ok(done) => {
                            results.lock().expect("result lock")[i] = Some(done);
                        }
                        Err(e) => {
                            failed.store(true, Ordering::Relaxed);
                            let mut slot = error.lock().expect("error lock");
                            slot.get_or_insert(e);
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = error.into_inner().expect("error lock") {
            return Err(e);
        }
    }

    let mut tensors = Vec::with_capacity(slots.len());
    let mut warnings = Vec::new();
    for slot in slots {
        let (report, mut tensor_warnings) = slot.expect("every tensor calibrated");
        tensors.push(report);
        warnings.append(&mut tensor_warnings);
    }

    Ok(CalibrationReport {
        schema_version: SCHEMA_VERSION,
        command: "calibrate".to_string(),
        method: method.to_string(),
        bits: opts.bits,
        signedness: opts.signedness_label().to_string(),
        boundary: opts.boundary_label().to_string(),
        granularity: opts.granularity_label(),
        iterations: opts.iterations,
        tensors,
        warnings,
    })
}

/// Where quantize gets its clipping scalars.
pub enum ScalarSource<'a> {
    /// Compute them from the input tensor with this method.
    Method(Method),
    /// Reuse the scalars a calibrate report assigned to this tensor's name;
    /// the report's grid settings override the command-line ones.
    Report(&'a Path),
}

/// Everything quantize produced; the binary prints it, tests assert on it.
#[derive(Debug, Clone)]
pub struct QuantizeOutcome {
    pub mse: Vec<f64>,
    pub mean_mse: f64,
    pub scalars: Vec<f64>,
    pub warnings: Vec<String>,
}

fn tensor_name_of(path: &Path) -> String {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = file_name.trim_end_matches(".octv");
    match split_batch_suffix(stem) {
        Some((name, _)) => name.to_string(),
        None => stem.to_string(),
    }
}

/// Loads a calibrate report and rebuilds the scalar set and grid settings
/// recorded for `name`. Degenerate groups round-trip as scalar 0 entries.
fn scalars_from_report(
    report_path: &Path,
    name: &str,
    shape: &[usize],
) -> Result<(ScalarSet, QuantOpts)> {
    let text = std::fs::read_to_string(report_path)?;
    let report: CalibrationReport =
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter {
            reason: format!("unreadable report {}: {e}", report_path.display()),
        })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidParameter {
            reason: format!("report schema version {} unsupported", report.schema_version),
        });
    }
    let entry = report.tensors.iter().find(|t| t.name == name).ok_or_else(|| {
        Error::InvalidParameter {
            reason: format!("report has no tensor named {name:?}"),
        }
    })?;
    if entry.shape != shape {
        return Err(Error::ShapeMismatch {
            shape: entry.shape.clone(),
            expected: entry.shape.iter().product(),
            actual: shape.iter().product(),
        });
    }
    let scalars = entry.scalars.full().ok_or_else(|| Error::InvalidParameter {
        reason: format!(
            "report scalars for {name:?} are summarized; re-calibrate with fewer groups \
             to quantize from this report"
        ),
    })?;

    let granularity: crate::args::GranularityArg = entry.granularity.parse()?;
    let boundary: crate::args::BoundaryArg = report.boundary.parse()?;
    let signedness = match report.signedness.as_str() {
        "signed" => Signedness::Signed,
        "unsigned" => Signedness::Unsigned,
        other => {
            return Err(Error::InvalidParameter {
                reason: format!("report signedness {other:?} unknown"),
            })
        }
    };
    let opts = QuantOpts {
        bits: report.bits,
        signedness,
        boundary: boundary.0,
        granularity: granularity.0,
        iterations: report.iterations,
    };

    let view = GroupView::for_shape(shape, opts.granularity)?;
    let degenerate: Vec<bool> = scalars.iter().map(|&s| s == 0.0).collect();
    let set = ScalarSet::with_degenerate(scalars.to_vec(), degenerate, view)?;
    Ok((set, opts))
}

/// Quantizes one tensor file and writes the result in OCTV format.
pub fn run_quantize(
    input: &Path,
    source: ScalarSource<'_>,
    opts: &QuantOpts,
    out: &Path,
) -> Result<QuantizeOutcome> {
    let t = load_tensor(input)?;
    let (set, opts) = match source {
        ScalarSource::Method(method) => {
            let view = GroupView::for_shape(t.shape(), opts.granularity)?;
            let spec = opts.spec()?;
            (candidate_scalars(&t, view, spec, method, opts.iterations)?, *opts)
        }
        ScalarSource::Report(path) => {
            scalars_from_report(path, &tensor_name_of(input), t.shape())?
        }
    };
    let spec = opts.spec()?;

    let q = quantize_clipped(&t, &set, spec)?;
    save_tensor(&q, out)?;

    let mse = empirical_mse(&t, &set, spec)?;
    let mean_mse = mse.iter().sum::<f64>() / mse.len() as f64;
    let degenerate = set.degenerate_flags().iter().filter(|&&d| d).count();
    let mut warnings = Vec::new();
    if degenerate > 0 {
        warnings.push(format!(
            "{degenerate} degenerate group(s) passed through unquantized"
        ));
    }
    Ok(QuantizeOutcome {
        mse,
        mean_mse,
        scalars: set.scalars().to_vec(),
        warnings,
    })
}

/// Sweeps the MSE curve of one tensor file and writes CSV rows. Multi-group
/// views get a leading `group` column; a single group writes `scalar,mse`.
pub fn run_sweep_curve(
    input: &Path,
    opts: &QuantOpts,
    points: usize,
    mode: SweepMode,
    out: &Path,
) -> Result<()> {
    let t = load_tensor(input)?;
    let view = GroupView::for_shape(t.shape(), opts.granularity)?;
    let spec = opts.spec()?;
    let curves = sweep(&t, view, spec, points, mode)?;

    let mut text = String::new();
    if curves.len() == 1 {
        text.push_str("scalar,mse\n");
        for (s, m) in curves[0].scalars().iter().zip(curves[0].mse()) {
            text.push_str(&format!("{s},{m}\n"));
        }
    } else {
        text.push_str("group,scalar,mse\n");
        for (g, curve) in curves.iter().enumerate() {
            for (s, m) in curve.scalars().iter().zip(curve.mse()) {
                text.push_str(&format!("{g},{s},{m}\n"));
            }
        }
    }
    std::fs::write(out, text)?;
    Ok(())
}

/// Times OCTAV (10 Newton iterations) against a 100-point empirical sweep
/// over every tensor file in `dir`, single-threaded. The timer brackets
/// exactly the per-tensor calibration call; loading happens up front.
pub fn run_bench(dir: &Path, bits: u32, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter {
            reason: "bench needs at least 1 repetition".to_string(),
        });
    }
    let files = scan_input_dir(dir, None)?;
    let mut tensors = Vec::new();
    for group in &files {
        for path in &group.paths {
            tensors.push(load_tensor(path)?);
        }
    }

    let mut warnings = Vec::new();
    let small = tensors.iter().filter(|t| t.len() < 100_000).count();
    let mut representative = true;
    if tensors.len() < 10 {
        warnings.push(format!(
            "only {} tensor(s); benchmark needs 10 or more to be representative",
            tensors.len()
        ));
        representative = false;
    }
    if small > 0 {
        warnings.push(format!(
            "{small} tensor(s) under 100000 elements; timings flagged unrepresentative"
        ));
        representative = false;
    }

    let spec = QuantSpec::new(bits, Signedness::Signed)?;
    let octav_cfg = OctavConfig::default();
    let mut octav_totals = Vec::with_capacity(repetitions);
    let mut sweep_totals = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut octav_total = 0.0f64;
        let mut sweep_total = 0.0f64;
        for t in &tensors {
            let view = GroupView::for_shape(t.shape(), Granularity::PerTensor)?;

            let started = Instant::now();
            let (set, _) = octav(t, view, spec, &octav_cfg)?;
            octav_total += started.elapsed().as_secs_f64();
            std::hint::black_box(set.scalars()[0]);

            let started = Instant::now();
            let curves = sweep(t, view, spec, 100, SweepMode::Empirical)?;
            let best = curves[0].best_scalar();
            sweep_total += started.elapsed().as_secs_f64();
            std::hint::black_box(best);
        }
        octav_totals.push(octav_total);
        sweep_totals.push(sweep_total);
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let variance = |xs: &[f64]| {
        if xs.len() < 2 {
            return 0.0;
        }
        let m = mean(xs);
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let octav_mean = mean(&octav_totals);
    let sweep_mean = mean(&sweep_totals);
    let speedup = sweep_mean / octav_mean;
    let count = tensors.len();

    let results = vec![
        BenchResult {
            method: "octav".to_string(),
            per_tensor_mean_seconds: octav_mean / count as f64,
            total_seconds: octav_mean,
            variance_seconds2: variance(&octav_totals),
            tensor_count: count,
            speedup,
        },
        BenchResult {
            method: "sweep".to_string(),
            per_tensor_mean_seconds: sweep_mean / count as f64,
            total_seconds: sweep_mean,
            variance_seconds2: variance(&sweep_totals),
            tensor_count: count,
            speedup,
        },
    ];

    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench".to_string(),
        bits,
        repetitions,
        tensor_count: count,
        representative,
        results,
        warnings,
    })
}

/// What gen-fixtures writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    /// Mixed-distribution weight-shaped corpus: `count` tensors of at least
    /// `min_elements` elements each.
    Corpus { count: usize, min_elements: usize },
    /// One activation tensor as `batches` files named `acts.batch<k>.octv`.
    Batches { rows: usize, cols: usize, batches: usize },
    /// The bulk-plus-outlier profile as `bimodal.octv`.
    Bimodal { elements: usize },
}

/// Writes synthetic OCTV fixtures into `dir` and returns the paths.
pub fn run_gen_fixtures(dir: &Path, kind: FixtureKind, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match kind {
        FixtureKind::Corpus { count, min_elements } => {
            for item in synthetic::mixed_corpus(count, min_elements, seed)? {
                let path = dir.join(format!("{}.octv", item.name));
                save_tensor(&item.tensor, &path)?;
                written.push(path);
            }
        }
        FixtureKind::Batches { rows, cols, batches } => {
            for (k, batch) in synthetic::batch_set(rows, cols, batches, seed)?.iter().enumerate() {
                let path = dir.join(format!("acts.batch{k}.octv"));
                save_tensor(batch, &path)?;
                written.push(path);
            }
        }
        FixtureKind::Bimodal { elements } => {
            let values = synthetic::bimodal(elements, seed);
            let len = values.len();
            let t = Tensor::from_vec(values, &[len])?;
            let path = dir.join("bimodal.octv");
            save_tensor(&t, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian;

    fn opts() -> QuantOpts {
        QuantOpts {
            bits: 4,
            signedness: Signedness::Signed,
            boundary: BoundaryMode::Mathematical,
            granularity: Granularity::PerTensor,
            iterations: 10,
        }
    }

    fn write_tensor(dir: &Path, name: &str, values: Vec<f64>, shape: &[usize]) -> PathBuf {
        let t = Tensor::from_vec(values, shape).unwrap();
        let path = dir.join(name);
        save_tensor(&t, &path).unwrap();
        path
    }

    #[test]
    fn scan_groups_batch_files_and_sorts_plain_ones() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "acts.batch1.octv", vec![1.0, 2.0], &[2]);
        write_tensor(dir.path(), "acts.batch0.octv", vec![3.0, 4.0], &[2]);
        write_tensor(dir.path(), "w.octv", vec![5.0, 6.0], &[2]);
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

        let groups = scan_input_dir(dir.path(), None).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].name, "acts");
        assert_eq!(groups[0].paths.len(), 2);
        assert!(groups[0].paths[0].to_string_lossy().contains("batch0"));
        assert_eq!(groups[1].name, "w");

        let filtered = scan_input_dir(dir.path(), Some("acts.*")).unwrap();
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered[0].name, "acts");
    }

    #[test]
    fn scan_rejects_mixed_and_duplicate_batch_files() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "a.octv", vec![1.0], &[1]);
        write_tensor(dir.path(), "a.batch0.octv", vec![1.0], &[1]);
        assert!(scan_input_dir(dir.path(), None).is_err());

        let dir = tempfile::tempdir().unwrap();
        assert!(scan_input_dir(dir.path(), None).is_err());
    }

    #[test]
    fn batch_suffix_parses_only_well_formed_names() {
        assert_eq!(split_batch_suffix("acts.batch12"), Some(("acts", 12)));
        assert_eq!(split_batch_suffix("a.b.batch0"), Some(("a.b", 0)));
        assert_eq!(split_batch_suffix("acts.batchx"), None);
        assert_eq!(split_batch_suffix(".batch1"), None);
        assert_eq!(split_batch_suffix("acts"), None);
    }

    #[test]
    fn calibrate_averages_candidates_across_batches() {
        let dir = tempfile::tempdir().unwrap();
        // Max magnitudes 2 and 4; method=max averages to 3.
        write_tensor(dir.path(), "acts.batch0.octv", vec![1.0, -2.0, 0.5, 1.5], &[4]);
        write_tensor(dir.path(), "acts.batch1.octv", vec![4.0, -1.0, 0.5, 1.5], &[4]);

        let report =
            run_calibrate(dir.path(), None, Method::Max, &opts(), 1).unwrap();
        assert_eq!(report.tensors.len(), 1);
        let entry = &report.tensors[0];
        assert_eq!(entry.batches_averaged, 2);
        assert_eq!(entry.scalars.full().unwrap(), &[3.0]);
        assert_eq!(entry.degenerate_groups, 0);
        assert!(report.warnings.is_empty());

        // The reported MSE is the mean of the per-batch MSEs at scalar 3.
        let spec = opts().spec().unwrap();
        let view = GroupView::for_shape(&[4], Granularity::PerTensor).unwrap();
        let set = ScalarSet::new(vec![3.0], view).unwrap();
        let t0 = load_tensor(dir.path().join("acts.batch0.octv")).unwrap();
        let t1 = load_tensor(dir.path().join("acts.batch1.octv")).unwrap();
        let want = (empirical_mse(&t0, &set, spec).unwrap()[0]
            + empirical_mse(&t1, &set, spec).unwrap()[0])
            / 2.0;
        assert!((entry.mean_mse - want).abs() < 1e-15);
    }

    #[test]
    fn calibrate_flags_all_zero_rows_as_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "w.octv", vec![0.0, 0.0, 1.0, -2.0], &[2, 2]);
        let mut o = opts();
        o.granularity = Granularity::PerRow(0);
        let report = run_calibrate(dir.path(), None, Method::Octav, &o, 1).unwrap();
        let entry = &report.tensors[0];
        assert_eq!(entry.degenerate_groups, 1);
        assert_eq!(entry.scalars.full().unwrap()[0], 0.0);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn calibrate_errors_on_inconsistent_batch_shapes() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "acts.batch0.octv", vec![1.0, 2.0], &[2]);
        write_tensor(dir.path(), "acts.batch1.octv", vec![1.0, 2.0, 3.0], &[3]);
        let err = run_calibrate(dir.path(), None, Method::Max, &opts(), 1);
        assert!(err.is_err());
    }

    #[test]
    fn threaded_calibrate_matches_serial_output() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..6 {
            write_tensor(
                dir.path(),
                &format!("t{i}.octv"),
                gaussian(4096, 40 + i as u64),
                &[64, 64],
            );
        }
        let serial = run_calibrate(dir.path(), None, Method::Octav, &opts(), 1).unwrap();
        let threaded = run_calibrate(dir.path(), None, Method::Octav, &opts(), 4).unwrap();
        for (a, b) in serial.tensors.iter().zip(&threaded.tensors) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.scalars, b.scalars);
            assert_eq!(a.mse, b.mse);
        }
    }

    #[test]
    fn quantize_writes_a_requantization_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_tensor(dir.path(), "w.octv", gaussian(512, 3), &[512]);
        let out1 = dir.path().join("q1.octv");
        let out2 = dir.path().join("q2.octv");

        let first =
            run_quantize(&input, ScalarSource::Method(Method::Octav), &opts(), &out1).unwrap();
        assert!(first.mean_mse > 0.0);

        // Re-quantizing the output with the same scalar reproduces it.
        let scalar = first.scalars[0];
        let view = GroupView::for_shape(&[512], Granularity::PerTensor).unwrap();
        let set = ScalarSet::new(vec![scalar], view).unwrap();
        let q1 = load_tensor(&out1).unwrap();
        let q2 = quantize_clipped(&q1, &set, opts().spec().unwrap()).unwrap();
        assert_eq!(q1, q2);

        // And through the command path: quantizing the quantized file with
        // the same method yields the identical file.
        let second =
            run_quantize(&out1, ScalarSource::Method(Method::Max), &opts(), &out2).unwrap();
        let q2_file = load_tensor(&out2).unwrap();
        let max_set = ScalarSet::new(vec![second.scalars[0]], *set.view()).unwrap();
        let expect = quantize_clipped(&q1, &max_set, opts().spec().unwrap()).unwrap();
        assert_eq!(q2_file, expect);
    }

    #[test]
    fn quantize_from_report_reproduces_reported_mse() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "w.octv", gaussian(2048, 5), &[2048]);
        let report = run_calibrate(dir.path(), None, Method::Octav, &opts(), 1).unwrap();
        let report_path = dir.path().join("report.json");
        std::fs::write(&report_path, serde_json::to_string(&report).unwrap()).unwrap();

        let out = dir.path().join("q.octv");
        let outcome = run_quantize(
            &dir.path().join("w.octv"),
            ScalarSource::Report(&report_path),
            &opts(),
            &out,
        )
        .unwrap();
        assert_eq!(outcome.mean_mse, report.tensors[0].mean_mse);
        assert_eq!(outcome.scalars, report.tensors[0].scalars.full().unwrap());
    }

    #[test]
    fn quantize_rejects_unsigned_negative_input() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_tensor(dir.path(), "neg.octv", vec![0.5, -1.0, 0.25], &[3]);
        let mut o = opts();
        o.signedness = Signedness::Unsigned;
        let out = dir.path().join("q.octv");
        let err = run_quantize(&input, ScalarSource::Method(Method::Max), &o, &out);
        assert!(matches!(err, Err(Error::NegativeUnsigned { .. })));
    }

    #[test]
    fn sweep_curve_writes_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_tensor(dir.path(), "w.octv", gaussian(4096, 7), &[4096]);
        let out = dir.path().join("curve.csv");
        run_sweep_curve(&input, &opts(), 100, SweepMode::Empirical, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scalar,mse");
        assert_eq!(lines.len(), 101);
    }

    #[test]
    fn sweep_curve_on_all_zero_tensor_reports_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_tensor(dir.path(), "z.octv", vec![0.0; 16], &[16]);
        let out = dir.path().join("curve.csv");
        let err = run_sweep_curve(&input, &opts(), 10, SweepMode::Empirical, &out);
        assert!(matches!(err, Err(Error::Degenerate { .. })));
    }

    #[test]
    fn bench_flags_small_corpora_as_unrepresentative() {
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), "small.octv", gaussian(256, 9), &[256]);
        let report = run_bench(dir.path(), 4, 2).unwrap();
        assert!(!report.representative);
        assert_eq!(report.warnings.len(), 2);
        assert_eq!(report.repetitions, 2);
        assert_eq!(report.results.len(), 2);
        let speedup = report.results[0].speedup;
        assert_eq!(speedup, report.results[1].speedup);
        let octav = &report.results[0];
        let sweep = &report.results[1];
        assert_eq!(octav.method, "octav");
        assert_eq!(sweep.method, "sweep");
        let ratio = sweep.total_seconds / octav.total_seconds;
        assert!((ratio - speedup).abs() < 1e-12);
    }

    #[test]
    fn gen_fixtures_writes_loadable_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = run_gen_fixtures(
            dir.path(),
            FixtureKind::Batches { rows: 8, cols: 4, batches: 3 },
            1,
        )
        .unwrap();
        assert_eq!(paths.len(), 3);
        for p in &paths {
            assert_eq!(load_tensor(p).unwrap().shape(), [8, 4]);
        }
        let groups = scan_input_dir(dir.path(), None).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].paths.len(), 3);

        let bimodal =
            run_gen_fixtures(dir.path(), FixtureKind::Bimodal { elements: 2000 }, 2).unwrap();
        assert!(load_tensor(&bimodal[0]).unwrap().data().iter().any(|v| v.abs() > 300.0));
    }
}
