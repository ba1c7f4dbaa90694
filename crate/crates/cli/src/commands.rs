use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rarhsmm::evaluate::{confusion, event_metrics, predictive_nll, Confusion, EventMetrics, MetricsReport, Score};
use rarhsmm::formats::{
    read_annotations, read_labels, read_signal, write_labels, write_posteriors, write_sequence, write_truth,
};
use rarhsmm::inference::{labels_from_path, viterbi};
use rarhsmm::learning::{
    default_unsupervised_init, e_step, em_fit, supervised_fit, FitFlag, FitOptions, InitConfig, FIT_LOG_HEADER,
};
use rarhsmm::preprocess::{events_to_labels, resample, zscore, LabelTrack};
use rarhsmm::simulate::sample_sequence;
use rarhsmm::{Model, Signal};

use crate::{EvalArgs, PreprocessArgs, ScoreArgs, SimulateArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(rarhsmm::Error),
    /// Training hit its iteration limit; the model was still written.
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::NotConverged(m) => write!(f, "{m}"),
        }
    }
}

impl From<rarhsmm::Error> for CliError {
    fn from(e: rarhsmm::Error) -> Self {
        CliError::Data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(rarhsmm::Error::InvalidArgument(msg.into()))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    data_err(format!("{}: {e}", path.display()))
}

/// The files named by `path`: the file itself, or the regular files of a
/// directory in name order (hidden files skipped).
fn list_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| io_err(path, e))?;
    if !meta.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| io_err(path, e))? {
        let p = entry.map_err(|e| io_err(path, e))?.path();
        let hidden = p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if p.is_file() && !hidden {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(data_err(format!("{}: no input files", path.display())));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Pairs each primary file with the file of the same stem under `other`
/// (or `other` itself when it is a single file and there is one primary).
fn match_by_stem(primary: &[PathBuf], other: &Path) -> Result<Vec<PathBuf>> {
    if !other.is_dir() {
        if primary.len() != 1 {
            return Err(CliError::Usage(format!("{} must be a directory when several inputs are given", other.display())));
        }
        return Ok(vec![other.to_path_buf()]);
    }
    let by_stem: BTreeMap<String, PathBuf> = list_inputs(other)?.into_iter().map(|p| (stem(&p), p)).collect();
    primary
        .iter()
        .map(|p| {
            by_stem
                .get(&stem(p))
                .cloned()
                .ok_or_else(|| data_err(format!("no file matching `{}` in {}", stem(p), other.display())))
        })
        .collect()
}

/// Output location for `input` when writing under `out`.
fn output_for(input: &Path, out: &Path, many: bool) -> Result<PathBuf> {
    if !many {
        return Ok(out.to_path_buf());
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    Ok(out.join(input.file_name().unwrap_or_default()))
}

fn load_sequence(path: &Path, fallback_rate: Option<f64>) -> Result<Signal> {
    let file = read_signal(path)?;
    let rate = file
        .rate
        .or(fallback_rate)
        .ok_or_else(|| data_err(format!("{}: no `# rate=` header", path.display())))?;
    Ok(Signal::new(file.samples, rate)?)
}

fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(Model::from_document(&text)?.validated()?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn check_rate(seq: &Signal, model: &Model, path: &Path) -> Result<()> {
    if !same_rate(seq.sample_rate, model.sample_rate) {
        return Err(data_err(format!(
            "{}: sample rate {} Hz does not match the model's {} Hz",
            path.display(),
            seq.sample_rate,
            model.sample_rate
        )));
    }
    Ok(())
}

pub fn preprocess(a: PreprocessArgs) -> Result<()> {
    let raw = read_signal(&a.input)?;
    let rate_in = match (a.rate_in, raw.rate) {
        (Some(flag), Some(header)) if !same_rate(flag, header) => {
            return Err(data_err(format!("--rate-in {flag} contradicts the file header rate {header}")))
        }
        (Some(r), _) | (None, Some(r)) => r,
        (None, None) => return Err(CliError::Usage("--rate-in is required for files without a rate header".into())),
    };
    if rate_in < a.rate_out {
        return Err(CliError::Usage(format!("cannot upsample from {rate_in} Hz to {} Hz", a.rate_out)));
    }
    let mut y = if same_rate(rate_in, a.rate_out) { raw.samples } else { resample(&raw.samples, rate_in, a.rate_out)? };
    if a.zscore {
        y = zscore(&y)?;
    }
    write_sequence(&a.out, &y, a.rate_out)?;
    if let (Some(ann_path), Some(out)) = (&a.labels_in, &a.labels_out) {
        let mut events = read_annotations(ann_path)?;
        if let Some(id) = a.scorer {
            events.retain(|e| e.scorer_id == id);
        }
        let (track, clipped) = events_to_labels(&events, a.rate_out, y.len())?;
        if clipped > 0 {
            eprintln!("warning: {clipped} annotation(s) extend past the end of the recording and were clipped");
        }
        write_labels(out, &track)?;
    }
    eprintln!("wrote {} samples at {} Hz to {}", y.len(), a.rate_out, a.out.display());
    Ok(())
}

enum Mode {
    Supervised,
    Unsupervised,
    Expert(u32),
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "supervised" => Ok(Mode::Supervised),
        "unsupervised" => Ok(Mode::Unsupervised),
        _ => s
            .strip_prefix("expert:")
            .and_then(|id| id.parse().ok())
            .map(Mode::Expert)
            .ok_or_else(|| CliError::Usage(format!("unknown mode `{s}`; expected supervised, unsupervised or expert:<id>"))),
    }
}

/// Loads every data file and checks they share one sample rate.
fn load_batch(files: &[PathBuf]) -> Result<(Vec<Signal>, f64)> {
    let seqs: Vec<Signal> = files.iter().map(|f| load_sequence(f, None)).collect::<Result<_>>()?;
    let rate = seqs[0].sample_rate;
    for (s, f) in seqs.iter().zip(files) {
        if !same_rate(s.sample_rate, rate) {
            return Err(data_err(format!("{}: sample rate {} Hz differs from {rate} Hz", f.display(), s.sample_rate)));
        }
    }
    Ok((seqs, rate))
}

fn fit_options(a: &TrainArgs) -> FitOptions {
    FitOptions {
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        min_sigma: a.min_sigma,
        workers: a.workers,
        ..FitOptions::default()
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mode = parse_mode(&a.mode)?;
    if a.max_duration <= 0.0 {
        return Err(CliError::Usage("--max-duration must be positive".into()));
    }
    let files = list_inputs(&a.data)?;
    let (seqs, rate) = load_batch(&files)?;
    let opts = fit_options(&a);
    let max_duration = ((a.max_duration * rate).round() as usize).max(1);

    let (model, log, unconverged) = match mode {
        Mode::Unsupervised => {
            let init = if a.init == "paper-default" {
                let cfg = InitConfig { order: a.order, max_duration, ..InitConfig::spindle_default(rate) };
                default_unsupervised_init(&seqs, &cfg)?
            } else {
                let m = load_model(Path::new(&a.init))?;
                for (s, f) in seqs.iter().zip(&files) {
                    check_rate(s, &m, f)?;
                }
                m
            };
            let fit = em_fit(&seqs, &init, &opts)?;
            let lines: Vec<String> = fit.trace.iter().map(|r| r.log_line()).collect();
            eprintln!("EM: {} iterations, final log-likelihood {}", fit.trace.len(), fit.trace.last().map_or(f64::NAN, |r| r.loglik));
            (fit.model, lines, (!fit.converged).then(|| format!("EM did not converge within {} iterations", a.max_iters)))
        }
        Mode::Supervised | Mode::Expert(_) => {
            let label_dir =
                a.labels.as_ref().ok_or_else(|| CliError::Usage(format!("--labels is required for mode {}", a.mode)))?;
            let label_files = match_by_stem(&files, label_dir)?;
            let mut tracks = Vec::with_capacity(files.len());
            for ((lf, seq), df) in label_files.iter().zip(&seqs).zip(&files) {
                let track = match mode {
                    Mode::Expert(id) => {
                        let events: Vec<_> = read_annotations(lf)?.into_iter().filter(|e| e.scorer_id == id).collect();
                        events_to_labels(&events, rate, seq.len())?.0
                    }
                    _ => read_labels(lf, Some(rate))?,
                };
                if track.len() != seq.len() {
                    return Err(data_err(format!(
                        "{}: {} labels for {} samples in {}",
                        lf.display(),
                        track.len(),
                        seq.len(),
                        df.display()
                    )));
                }
                if !same_rate(track.sample_rate, rate) {
                    return Err(data_err(format!("{}: label rate {} Hz differs from {rate} Hz", lf.display(), track.sample_rate)));
                }
                tracks.push(track);
            }
            let k = match a.regimes {
                Some(k) => k,
                None => tracks.iter().flat_map(|t| t.labels.iter()).max().map_or(1, |m| m + 1).max(2),
            };
            let fit = supervised_fit(&seqs, &tracks, k, a.order, max_duration, &opts)?;
            let flags: Vec<String> = fit.flags.iter().map(|f| f.to_string()).collect();
            let unconverged = fit
                .flags
                .iter()
                .any(|f| matches!(f, FitFlag::InnerLoopUnconverged { .. }))
                .then(|| "robust regression inner loop did not converge".to_string());
            (fit.model, vec![format!("0,NaN,NaN,{}", flags.join(";"))], unconverged)
        }
    };

    write_text(&a.out, &model.to_document()?)?;
    if let Some(log_path) = &a.log {
        let mut text = String::from(FIT_LOG_HEADER);
        text.push('\n');
        for l in &log {
            text.push_str(l);
            text.push('\n');
        }
        write_text(log_path, &text)?;
    }
    eprintln!("wrote model to {}", a.out.display());
    match unconverged {
        Some(msg) => Err(CliError::NotConverged(msg)),
        None => Ok(()),
    }
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let files = list_inputs(&a.data)?;
    let many = a.data.is_dir();
    for f in &files {
        let seq = load_sequence(f, None)?;
        check_rate(&seq, &model, f)?;
        let decoded = viterbi(&model, &seq)?;
        write_labels(output_for(f, &a.out, many)?, &labels_from_path(&decoded.path, seq.sample_rate))?;
        if let Some(post) = &a.posteriors {
            let st = e_step(&model, &seq)?;
            // Conditioning samples take the first chain step's posterior.
            let rows: Vec<Vec<f64>> =
                (0..seq.len()).map(|n| st.gamma_row(n.saturating_sub(model.order)).to_vec()).collect();
            write_posteriors(output_for(f, post, many)?, &rows, seq.sample_rate)?;
        }
    }
    eprintln!("decoded {} sequence(s)", files.len());
    Ok(())
}

fn add_confusion(acc: &mut Confusion, c: &Confusion) {
    acc.tp += c.tp;
    acc.fp += c.fp;
    acc.tn += c.tn;
    acc.fn_ += c.fn_;
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let wanted: Vec<&str> = a.metrics.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    for m in &wanted {
        if !["mcc", "f1", "event", "nll"].contains(m) {
            return Err(CliError::Usage(format!("unknown metric `{m}`")));
        }
    }
    let pred_files = list_inputs(&a.pred)?;
    let truth_files = match_by_stem(&pred_files, &a.truth)?;
    let mut report = MetricsReport::default();
    let mut total = Confusion::default();
    let (mut truth_events, mut detected, mut predicted, mut fps, mut seconds) = (0, 0, 0, 0, 0.0);
    for (pf, tf) in pred_files.iter().zip(&truth_files) {
        let pred = read_labels(pf, a.rate)?;
        let truth: LabelTrack = read_labels(tf, a.rate)?;
        if !same_rate(pred.sample_rate, truth.sample_rate) {
            return Err(data_err(format!("{} and {} have different sample rates", pf.display(), tf.display())));
        }
        add_confusion(&mut total, &confusion(&pred, &truth)?);
        let ev: EventMetrics = event_metrics(&pred, &truth, truth.sample_rate)?;
        truth_events += ev.truth_events;
        detected += ev.detected;
        predicted += ev.predicted_events;
        fps += ev.false_positives;
        seconds += truth.len() as f64 / truth.sample_rate;
        report.samples += truth.len();
    }
    report.confusion = Some(total);
    if wanted.contains(&"mcc") {
        report.mcc = Some(total.mcc());
    }
    if wanted.contains(&"f1") {
        report.f1 = Some(total.f1());
    }
    if wanted.contains(&"event") {
        let sensitivity = if truth_events == 0 {
            Score { value: 0.0, degenerate: true }
        } else {
            Score { value: detected as f64 / truth_events as f64, degenerate: false }
        };
        report.events = Some(EventMetrics {
            truth_events,
            detected,
            predicted_events: predicted,
            false_positives: fps,
            sensitivity,
            false_positive_rate: if seconds > 0.0 { fps as f64 / seconds } else { 0.0 },
        });
    }
    if wanted.contains(&"nll") {
        let (Some(model_path), Some(data)) = (&a.model, &a.data) else {
            return Err(CliError::Usage("the nll metric needs --model and --data".into()));
        };
        let model = load_model(model_path)?;
        let files = list_inputs(data)?;
        let seqs: Vec<Signal> = files.iter().map(|f| load_sequence(f, Some(model.sample_rate))).collect::<Result<_>>()?;
        for (s, f) in seqs.iter().zip(&files) {
            check_rate(s, &model, f)?;
        }
        report.nll = Some(predictive_nll(&model, &seqs)?);
    }
    let text = report.to_key_values();
    match &a.report {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.json {
        write_text(p, &report.to_json()?)?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if a.n <= model.order {
        return Err(CliError::Usage(format!("--n must exceed the model order {}", model.order)));
    }
    let sim = sample_sequence(&model, a.n, a.seed)?;
    write_sequence(&a.out, &sim.sequence.samples, model.sample_rate)?;
    if let Some(t) = &a.truth {
        write_truth(t, &sim.path, model.sample_rate)?;
    }
    eprintln!("wrote {} samples to {}", a.n, a.out.display());
    Ok(())
}
