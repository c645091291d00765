//! Training logs, smoothing and cross-seed aggregation.
//!
//! Log files are CSV (`episode,reward,mean_action_prob`) with a `key = value`
//! sidecar holding run metadata. Numbers are written with 17 significant
//! digits so a write/read cycle is lossless.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::{self, fmt_f64, Line};

pub const LOG_HEADER: &str = "episode,reward,mean_action_prob";
pub const REPORT_HEADER: &str = "method,runs,train_mean,train_std,eval_mean,eval_std";
/// Window of the reward smoothing filter.
pub const SMOOTHING_WINDOW: usize = 100;
/// Step budget assumed when metadata does not say otherwise.
pub const DEFAULT_MAX_REWARD: f64 = 195.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    pub mean_action_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub method: String,
    pub init: String,
    pub seed: u64,
    pub config_hash: String,
    pub max_reward: f64,
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta {
            method: String::new(),
            init: String::new(),
            seed: 0,
            config_hash: String::new(),
            max_reward: DEFAULT_MAX_REWARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub meta: RunMeta,
    pub records: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn new(meta: RunMeta) -> Self {
        TrainingLog {
            meta,
            records: Vec::new(),
        }
    }

    /// Appends the next episode; its index is assigned here.
    pub fn push(&mut self, reward: f64, mean_action_prob: f64) {
        let episode = self.records.len() + 1;
        self.records.push(EpisodeRecord {
            episode,
            reward,
            mean_action_prob,
        });
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    pub fn action_probs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_action_prob).collect()
    }

    /// Window-100 smoothed reward at the last episode.
    pub fn final_smoothed_reward(&self) -> Result<f64> {
        let smoothed = moving_average(&self.rewards(), SMOOTHING_WINDOW)?;
        Ok(*smoothed.last().expect("non-empty"))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            check_record(r, i + 1, self.meta.max_reward)
                .map_err(|msg| Error::parse("<log>", i + 2, msg))?;
        }
        Ok(())
    }
}

fn check_record(r: &EpisodeRecord, expected_episode: usize, max_reward: f64) -> Result<(), String> {
    if r.episode != expected_episode {
        return Err(format!(
            "episode indices must be contiguous from 1: expected {expected_episode}, got {}",
            r.episode
        ));
    }
    if !(1.0..=max_reward).contains(&r.reward) {
        return Err(format!("reward {} outside [1, {max_reward}]", r.reward));
    }
    if !(0.0..=1.0).contains(&r.mean_action_prob) {
        return Err(format!(
            "mean_action_prob {} outside [0, 1]",
            r.mean_action_prob
        ));
    }
    Ok(())
}

/// Trailing mean with a window that grows from 1 at the head.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "moving average window must be at least 1".into(),
        ));
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument(
            "moving average of an empty series".into(),
        ));
    }
    Ok((0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let w = &series[lo..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

/// Sample mean and (n − 1) standard deviation. Values are summed in sorted
/// order so the result does not depend on input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, (sq.iter().sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn meta_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("meta")
}

pub fn log_to_csv(log: &TrainingLog) -> String {
    let mut out = String::with_capacity(64 * (log.records.len() + 1));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        out.push_str(&format!(
            "{},{},{}\n",
            r.episode,
            fmt_f64(r.reward),
            fmt_f64(r.mean_action_prob)
        ));
    }
    out
}

pub fn meta_to_text(meta: &RunMeta) -> String {
    format!(
        "method = {}\ninit = {}\nseed = {}\nconfig_hash = {}\nmax_reward = {}\n",
        meta.method,
        meta.init,
        meta.seed,
        meta.config_hash,
        fmt_f64(meta.max_reward)
    )
}

pub fn parse_meta(path: &str, text: &str) -> Result<RunMeta> {
    let mut meta = RunMeta::default();
    for (line, entry) in kv::lines(path, text)? {
        let Line::Entry { key, value } = entry else {
            return Err(Error::parse(path, line, "unexpected section in metadata"));
        };
        match key {
            "method" => meta.method = value.to_string(),
            "init" => meta.init = value.to_string(),
            "seed" => meta.seed = kv::parse_u64(path, line, key, value)?,
            "config_hash" => meta.config_hash = value.to_string(),
            "max_reward" => {
                meta.max_reward = kv::parse_f64(path, line, key, value)?;
                if meta.max_reward < 1.0 {
                    return Err(Error::parse(path, line, "max_reward must be at least 1"));
                }
            }
            other => return Err(Error::parse(path, line, format!("unknown key '{other}'"))),
        }
    }
    Ok(meta)
}

/// Parses the CSV body of a log; `max_reward` bounds the reward column.
pub fn parse_log_csv(path: &str, text: &str, max_reward: f64) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LOG_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("missing header; expected columns '{LOG_HEADER}'"),
            ))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                n,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let rec = EpisodeRecord {
            episode: kv::parse_usize(path, n, "episode", cols[0])?,
            reward: kv::parse_f64(path, n, "reward", cols[1])?,
            mean_action_prob: kv::parse_f64(path, n, "mean_action_prob", cols[2])?,
        };
        check_record(&rec, out.len() + 1, max_reward).map_err(|msg| Error::parse(path, n, msg))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes `path` (CSV) and its `.meta` sidecar.
pub fn write_log(path: &Path, log: &TrainingLog) -> Result<()> {
    write_file(path, &log_to_csv(log))?;
    write_file(&meta_path(path), &meta_to_text(&log.meta))
}

pub fn read_log(path: &Path) -> Result<TrainingLog> {
    let mpath = meta_path(path);
    let meta = parse_meta(&mpath.display().to_string(), &read_file(&mpath)?)?;
    let records = parse_log_csv(
        &path.display().to_string(),
        &read_file(path)?,
        meta.max_reward,
    )?;
    Ok(TrainingLog { meta, records })
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub runs: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub eval_mean: f64,
    pub eval_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateReport {
    pub rows: Vec<AggregateRow>,
}

/// Cross-seed statistics for one method. Each run contributes its final
/// smoothed training reward and the mean of its evaluation rewards.
pub fn aggregate(runs: &[(TrainingLog, Vec<f64>)]) -> Result<AggregateRow> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "aggregation needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    let method = &runs[0].0.meta.method;
    if let Some((log, _)) = runs.iter().find(|(l, _)| &l.meta.method != method) {
        return Err(Error::InvalidArgument(format!(
            "cannot aggregate different methods: '{method}' and '{}'",
            log.meta.method
        )));
    }
    let mut train = Vec::with_capacity(runs.len());
    let mut eval = Vec::with_capacity(runs.len());
    for (log, rewards) in runs {
        train.push(log.final_smoothed_reward()?);
        if rewards.is_empty() {
            return Err(Error::InvalidArgument(
                "run without evaluation rewards".into(),
            ));
        }
        eval.push(rewards.iter().sum::<f64>() / rewards.len() as f64);
    }
    let (train_mean, train_std) = mean_std(&train);
    let (eval_mean, eval_std) = mean_std(&eval);
    Ok(AggregateRow {
        method: method.clone(),
        runs: runs.len(),
        train_mean,
        train_std,
        eval_mean,
        eval_std,
    })
}

pub fn report_to_csv(report: &AggregateReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.runs,
            fmt_f64(r.train_mean),
            fmt_f64(r.train_std),
            fmt_f64(r.eval_mean),
            fmt_f64(r.eval_std)
        ));
    }
    out
}

pub fn parse_report_csv(path: &str, text: &str) -> Result<AggregateReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == REPORT_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("missing header; expected columns '{REPORT_HEADER}'"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 6 {
            return Err(Error::parse(
                path,
                n,
                format!("expected 6 columns, found {}", c.len()),
            ));
        }
        rows.push(AggregateRow {
            method: c[0].trim().to_string(),
            runs: kv::parse_usize(path, n, "runs", c[1])?,
            train_mean: kv::parse_f64(path, n, "train_mean", c[2])?,
            train_std: kv::parse_f64(path, n, "train_std", c[3])?,
            eval_mean: kv::parse_f64(path, n, "eval_mean", c[4])?,
            eval_std: kv::parse_f64(path, n, "eval_std", c[5])?,
        });
    }
    Ok(AggregateReport { rows })
}
