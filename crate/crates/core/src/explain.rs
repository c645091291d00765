//! Part-based inspection of a trained actor: layer traces, heatmap panel
//! export, and input optimization toward a chosen action.

use std::fmt;
use std::path::Path;

use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::init::Rng;
use crate::kv::{self, fmt_f64};
use crate::logio::{read_file, write_file};
use crate::nncore::{ActivationKind, Matrix, Mlp, Vector};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: &str = "index,name,row,file,rows,cols";

/// Everything needed to draw the part-based picture of one decision.
///
/// `responses[k]` is the post-activation output of layer `k`, except for a
/// softmax layer, where it holds the logits so that the response row shows
/// what each output unit summed up rather than repeating the probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PartTrace {
    pub observation: Observation,
    pub weights: Vec<Matrix>,
    pub responses: Vec<Vector>,
    pub action_probs: Vector,
}

pub fn trace_parts(actor: &Mlp, obs: &Observation) -> Result<PartTrace> {
    if actor.input_dim() != 4 {
        return Err(Error::DimensionMismatch {
            layer: 0,
            expected: 4,
            actual: actor.input_dim(),
        });
    }
    let (probs, trace) = actor.forward(obs.as_slice())?;
    let responses = actor
        .layers()
        .iter()
        .enumerate()
        .map(|(k, layer)| match layer.activation {
            ActivationKind::Softmax => trace.pre[k].clone(),
            _ => trace.post[k].clone(),
        })
        .collect();
    Ok(PartTrace {
        observation: *obs,
        weights: actor.layers().iter().map(|l| l.weights.clone()).collect(),
        responses,
        action_probs: probs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputOptSpec {
    pub target_action: Action,
    pub epochs: usize,
    pub step_size: f64,
    pub initial_observation: Observation,
}

impl InputOptSpec {
    pub const DEFAULT_EPOCHS: usize = 5;
    pub const DEFAULT_STEP_SIZE: f64 = 0.1;

    pub fn new(target_action: Action, initial_observation: Observation) -> Self {
        InputOptSpec {
            target_action,
            epochs: Self::DEFAULT_EPOCHS,
            step_size: Self::DEFAULT_STEP_SIZE,
            initial_observation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        self.initial_observation.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputOptResult {
    pub observation: Observation,
    pub initial_loss: f64,
    /// Loss after each epoch's update; `len() == epochs`.
    pub loss_per_epoch: Vector,
    /// Observation after each epoch, aligned with `loss_per_epoch`.
    pub trajectory: Vec<Observation>,
}

impl InputOptResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_per_epoch.last().unwrap_or(&self.initial_loss)
    }
}

/// `½‖p − onehot(target)‖²` and its gradient with respect to the input.
pub fn input_loss_and_grad(actor: &Mlp, input: &[f64], target: Action) -> Result<(f64, Vector)> {
    let (probs, trace) = actor.forward(input)?;
    let residual: Vector = probs
        .iter()
        .enumerate()
        .map(|(i, p)| p - if i == target.index() { 1.0 } else { 0.0 })
        .collect();
    let loss = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    let grads = actor.backward(&trace, &residual)?;
    Ok((loss, grads.input))
}

/// Moves the observation toward inputs that make `target_action` certain.
/// Each epoch takes a descent step, reflects negatives back with `|·|`, and
/// caps at 1 so the result stays a valid normalized observation.
pub fn optimize_input(actor: &Mlp, spec: &InputOptSpec) -> Result<InputOptResult> {
    spec.validate()?;
    let mut obs = spec.initial_observation.0;
    let (initial_loss, _) = input_loss_and_grad(actor, &obs, spec.target_action)?;
    let mut losses = Vec::with_capacity(spec.epochs);
    let mut trajectory = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        let (_, grad) = input_loss_and_grad(actor, &obs, spec.target_action)?;
        for (o, g) in obs.iter_mut().zip(&grad) {
            *o = (*o - spec.step_size * g).abs().min(1.0);
        }
        losses.push(input_loss_and_grad(actor, &obs, spec.target_action)?.0);
        trajectory.push(Observation(obs));
    }
    Ok(InputOptResult {
        observation: Observation::new(obs)?,
        initial_loss,
        loss_per_epoch: losses,
        trajectory,
    })
}

pub const INPUT_OPT_HEADER: &str = "epoch,loss,position,velocity,angle,tip_velocity";

/// One row per epoch; row 0 is the starting point.
pub fn input_opt_to_csv(spec: &InputOptSpec, result: &InputOptResult) -> String {
    let mut out = format!("{INPUT_OPT_HEADER}\n");
    let rows = std::iter::once((result.initial_loss, &spec.initial_observation)).chain(
        result
            .loss_per_epoch
            .iter()
            .copied()
            .zip(&result.trajectory),
    );
    for (epoch, (loss, obs)) in rows.enumerate() {
        let cells: Vec<String> = obs.0.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("{epoch},{},{}\n", fmt_f64(loss), cells.join(",")));
    }
    out
}

/// Returns `(loss, observation)` per row, starting at epoch 0.
pub fn parse_input_opt_csv(path: &str, text: &str) -> Result<Vec<(f64, Observation)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == INPUT_OPT_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("missing header; expected columns '{INPUT_OPT_HEADER}'"),
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
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                n,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let epoch = kv::parse_usize(path, n, "epoch", cols[0])?;
        if epoch != out.len() {
            return Err(Error::parse(
                path,
                n,
                format!("expected epoch {}, found {epoch}", out.len()),
            ));
        }
        let loss = kv::parse_f64(path, n, "loss", cols[1])?;
        let mut obs = [0.0; 4];
        for (o, c) in obs.iter_mut().zip(&cols[2..]) {
            *o = kv::parse_f64(path, n, "observation", c)?;
        }
        let obs = Observation::new(obs).map_err(|e| Error::parse(path, n, e.to_string()))?;
        out.push((loss, obs));
    }
    if out.is_empty() {
        return Err(Error::parse(path, 0, "no rows"));
    }
    Ok(out)
}

/// Observation drawn from N(0.5, 0.2²) per component, clamped to [0, 1].
pub fn gaussian_observation(rng: &mut Rng) -> Observation {
    Observation([0; 4].map(|_| rng.normal(0.5, 0.2).clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelRow {
    Input,
    Weights,
    Response,
}

impl PanelRow {
    pub fn name(self) -> &'static str {
        match self {
            PanelRow::Input => "input",
            PanelRow::Weights => "weights",
            PanelRow::Response => "response",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(PanelRow::Input),
            "weights" => Some(PanelRow::Weights),
            "response" => Some(PanelRow::Response),
            _ => None,
        }
    }
}

impl fmt::Display for PanelRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelEntry {
    pub name: String,
    pub row: PanelRow,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

/// Panels in display order: the observation, each weight matrix, each layer
/// response, then the action probabilities. Vectors become single-row panels.
pub fn heatmap_panels(trace: &PartTrace) -> Vec<(PanelEntry, Matrix)> {
    let row_panel = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec()).expect("1×n panel");
    let mut panels = vec![(
        "input".to_string(),
        PanelRow::Input,
        row_panel(trace.observation.as_slice()),
    )];
    for (k, w) in trace.weights.iter().enumerate() {
        panels.push((format!("weights_{}", k + 1), PanelRow::Weights, w.clone()));
    }
    for (k, r) in trace.responses.iter().enumerate() {
        panels.push((
            format!("response_{}", k + 1),
            PanelRow::Response,
            row_panel(r),
        ));
    }
    panels.push((
        "actions".to_string(),
        PanelRow::Response,
        row_panel(&trace.action_probs),
    ));
    panels
        .into_iter()
        .map(|(name, row, m)| {
            let entry = PanelEntry {
                file: format!("{name}.csv"),
                name,
                row,
                rows: m.rows(),
                cols: m.cols(),
            };
            (entry, m)
        })
        .collect()
}

pub fn panel_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_panel_csv(path: &str, text: &str) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for cell in line.split(',') {
            data.push(kv::parse_f64(path, i + 1, "cell", cell)?);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {c} columns, found {width}"),
                ))
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, 0, "empty panel"))?;
    Matrix::from_vec(rows, cols, data)
}

pub fn manifest_to_csv(entries: &[PanelEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for (i, e) in entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, e.name, e.row, e.file, e.rows, e.cols
        ));
    }
    out
}

pub fn parse_manifest(path: &str, text: &str) -> Result<Vec<PanelEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("missing header; expected columns '{MANIFEST_HEADER}'"),
            ))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                n,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let index = kv::parse_usize(path, n, "index", cols[0])?;
        if index != out.len() {
            return Err(Error::parse(
                path,
                n,
                format!("expected index {}, found {index}", out.len()),
            ));
        }
        let row = PanelRow::parse(cols[2])
            .ok_or_else(|| Error::parse(path, n, format!("unknown row '{}'", cols[2])))?;
        let file = cols[3];
        if file.is_empty() || file.contains(['/', '\\']) || file.starts_with('.') {
            return Err(Error::parse(
                path,
                n,
                format!("bad panel file name '{file}'"),
            ));
        }
        out.push(PanelEntry {
            name: cols[1].to_string(),
            row,
            file: file.to_string(),
            rows: kv::parse_usize(path, n, "rows", cols[4])?,
            cols: kv::parse_usize(path, n, "cols", cols[5])?,
        });
    }
    Ok(out)
}

/// Writes one CSV per panel plus `manifest.csv` into `dir`, creating it if needed.
pub fn export_heatmaps(trace: &PartTrace, dir: &Path) -> Result<Vec<PanelEntry>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let panels = heatmap_panels(trace);
    for (entry, m) in &panels {
        write_file(&dir.join(&entry.file), &panel_to_csv(m))?;
    }
    let entries: Vec<PanelEntry> = panels.into_iter().map(|(e, _)| e).collect();
    write_file(&dir.join(MANIFEST_FILE), &manifest_to_csv(&entries))?;
    Ok(entries)
}

/// Reads back a directory written by [`export_heatmaps`], checking that each
/// panel has the shape its manifest entry promises.
pub fn load_heatmaps(dir: &Path) -> Result<Vec<(PanelEntry, Matrix)>> {
    let mpath = dir.join(MANIFEST_FILE);
    let entries = parse_manifest(&mpath.display().to_string(), &read_file(&mpath)?)?;
    entries
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let pname = p.display().to_string();
            let m = parse_panel_csv(&pname, &read_file(&p)?)?;
            if (m.rows(), m.cols()) != (e.rows, e.cols) {
                return Err(Error::parse(
                    &pname,
                    0,
                    format!(
                        "panel is {}x{}, manifest says {}x{}",
                        m.rows(),
                        m.cols(),
                        e.rows,
                        e.cols
                    ),
                ));
            }
            Ok((e, m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::init_exponential;

    fn actor(seed: u64) -> Mlp {
        init_exponential(&Mlp::actor(), 10.0, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn zero_actor_traces_to_even_odds() {
        let t = trace_parts(&Mlp::actor(), &Observation::midpoint()).unwrap();
        assert!(t.responses[..2].iter().flatten().all(|&v| v == 0.0));
        assert_eq!(t.action_probs, vec![0.5, 0.5]);
    }

    #[test]
    fn trace_matches_forward_and_is_non_negative() {
        let a = actor(3);
        let obs = Observation([0.1, 0.7, 0.9, 0.3]);
        let t = trace_parts(&a, &obs).unwrap();
        assert_eq!(t.action_probs, a.predict(obs.as_slice()).unwrap());
        assert!(t.responses.iter().flatten().all(|&v| v >= 0.0));
        assert!(t.weights.iter().flat_map(|w| w.data()).all(|&v| v >= 0.0));
    }

    #[test]
    fn trace_rejects_wrong_input_width() {
        let wide =
            Mlp::zeros(&[5, 3, 2], &[ActivationKind::Relu, ActivationKind::Softmax]).unwrap();
        assert!(matches!(
            trace_parts(&wide, &Observation::midpoint()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn input_blind_actor_keeps_observation() {
        let mut a = actor(4);
        a.layers_mut()[0].weights = Matrix::zeros(10, 4);
        let obs = Observation([0.2, 0.4, 0.6, 0.8]);
        let mut spec = InputOptSpec::new(Action::Forward, obs);
        spec.epochs = 7;
        let r = optimize_input(&a, &spec).unwrap();
        assert_eq!(r.observation, obs);
        assert_eq!(r.loss_per_epoch.len(), 7);
    }

    #[test]
    fn optimized_input_stays_in_unit_box() {
        let a = actor(5);
        for target in [Action::Forward, Action::Backward] {
            let mut spec = InputOptSpec::new(target, Observation([0.0, 1.0, 0.5, 0.02]));
            spec.step_size = 50.0;
            spec.epochs = 20;
            let r = optimize_input(&a, &spec).unwrap();
            assert!(r.observation.0.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = InputOptSpec::new(Action::Forward, Observation::midpoint());
        spec.epochs = 0;
        assert!(optimize_input(&Mlp::actor(), &spec).is_err());
        spec.epochs = 1;
        spec.step_size = 0.0;
        assert!(optimize_input(&Mlp::actor(), &spec).is_err());
    }

    #[test]
    fn panel_layout_for_actor() {
        let t = trace_parts(&actor(6), &Observation::midpoint()).unwrap();
        let names: Vec<String> = heatmap_panels(&t)
            .into_iter()
            .map(|(e, _)| e.name)
            .collect();
        assert_eq!(
            names,
            [
                "input",
                "weights_1",
                "weights_2",
                "weights_3",
                "response_1",
                "response_2",
                "response_3",
                "actions"
            ]
        );
    }

    #[test]
    fn manifest_rejects_path_escapes() {
        let text = format!("{MANIFEST_HEADER}\n0,input,input,../x.csv,1,4\n");
        assert!(parse_manifest("m", &text).is_err());
    }
}
