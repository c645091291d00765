//! Checkpoint text format.
//!
//! ```text
//! # partppo checkpoint
//! format = 1
//! method = asga-exp
//! seed = 7
//! episode = 50
//! [config]
//! clip_epsilon = 2.0000000000000001e-1
//! ...
//! [actor]
//! sizes = 4 10 10 2
//! activations = relu2 relu2 softmax
//! params = <space separated, 17 significant digits>
//! [critic]
//! ...
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::{self, fmt_f64, Line};
use crate::logio::{read_file, write_file};
use crate::nncore::{ActivationKind, Mlp};

use super::config::RunConfig;

pub const FORMAT_VERSION: u64 = 1;

/// Upper bound on layer width accepted from a file.
const MAX_LAYER_WIDTH: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub method: String,
    pub seed: u64,
    pub episode: usize,
    pub config: RunConfig,
    pub actor: Mlp,
    pub critic: Mlp,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# partppo checkpoint\n");
        out.push_str(&format!("format = {FORMAT_VERSION}\n"));
        out.push_str(&format!("method = {}\n", self.method));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("episode = {}\n", self.episode));
        out.push_str("[config]\n");
        out.push_str(&self.config.to_kv_text());
        for (name, net) in [("actor", &self.actor), ("critic", &self.critic)] {
            out.push_str(&format!("[{name}]\n"));
            out.push_str(&net_to_text(net));
        }
        out
    }

    pub fn parse(path: &str, text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Config,
            Net(usize),
        }
        let mut section = Section::Header;
        let mut version = None;
        let mut method = None;
        let mut seed = None;
        let mut episode = None;
        let mut config = RunConfig::default();
        let mut nets: [NetBuilder; 2] = Default::default();
        let mut seen = [false; 3];

        for (line, entry) in kv::lines(path, text)? {
            match entry {
                Line::Section(name) => {
                    let (next, idx) = match name {
                        "config" => (Section::Config, 0),
                        "actor" => (Section::Net(0), 1),
                        "critic" => (Section::Net(1), 2),
                        other => {
                            return Err(Error::parse(
                                path,
                                line,
                                format!("unknown section '{other}'"),
                            ))
                        }
                    };
                    if std::mem::replace(&mut seen[idx], true) {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("duplicate section '{name}'"),
                        ));
                    }
                    section = next;
                }
                Line::Entry { key, value } => match section {
                    Section::Header => match key {
                        "format" => version = Some(kv::parse_u64(path, line, key, value)?),
                        "method" => method = Some(value.to_string()),
                        "seed" => seed = Some(kv::parse_u64(path, line, key, value)?),
                        "episode" => episode = Some(kv::parse_usize(path, line, key, value)?),
                        other => {
                            return Err(Error::parse(path, line, format!("unknown key '{other}'")))
                        }
                    },
                    Section::Config => config.set(key, value, path, line)?,
                    Section::Net(i) => nets[i].set(key, value, path, line)?,
                },
            }
        }

        let missing = |what: &str| Error::parse(path, 0, format!("missing {what}"));
        match version {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::parse(path, 0, format!("unsupported format {v}"))),
            None => return Err(missing("format")),
        }
        if !seen[1] || !seen[2] {
            return Err(missing("actor or critic section"));
        }
        let [actor, critic] = nets;
        Ok(Checkpoint {
            method: method.ok_or_else(|| missing("method"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            episode: episode.ok_or_else(|| missing("episode"))?,
            config,
            actor: actor.build(path, "actor")?,
            critic: critic.build(path, "critic")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::parse(&path.display().to_string(), &read_file(path)?)
    }
}

fn net_to_text(net: &Mlp) -> String {
    let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
    let acts: Vec<&str> = net.layers().iter().map(|l| l.activation.name()).collect();
    let params: Vec<String> = net.flatten().into_iter().map(fmt_f64).collect();
    format!(
        "sizes = {}\nactivations = {}\nparams = {}\n",
        sizes.join(" "),
        acts.join(" "),
        params.join(" ")
    )
}

#[derive(Default)]
struct NetBuilder {
    sizes: Option<(usize, Vec<usize>)>,
    activations: Option<(usize, Vec<ActivationKind>)>,
    params: Option<(usize, Vec<f64>)>,
}

impl NetBuilder {
    fn set(&mut self, key: &str, value: &str, path: &str, line: usize) -> Result<()> {
        match key {
            "sizes" => {
                let v = value
                    .split_whitespace()
                    .map(|t| kv::parse_usize(path, line, key, t))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(&w) = v.iter().find(|&&w| w == 0 || w > MAX_LAYER_WIDTH) {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("layer width {w} out of range"),
                    ));
                }
                self.sizes = Some((line, v));
            }
            "activations" => {
                let v = value
                    .split_whitespace()
                    .map(|t| {
                        t.parse()
                            .map_err(|e: Error| Error::parse(path, line, e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.activations = Some((line, v));
            }
            "params" => {
                let v = value
                    .split_whitespace()
                    .map(|t| kv::parse_f64(path, line, key, t))
                    .collect::<Result<Vec<_>>>()?;
                self.params = Some((line, v));
            }
            other => return Err(Error::parse(path, line, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn build(self, path: &str, name: &str) -> Result<Mlp> {
        let missing = |k: &str| Error::parse(path, 0, format!("{name}: missing {k}"));
        let (line, sizes) = self.sizes.ok_or_else(|| missing("sizes"))?;
        let (_, acts) = self.activations.ok_or_else(|| missing("activations"))?;
        let (pline, params) = self.params.ok_or_else(|| missing("params"))?;
        let mut net = Mlp::zeros(&sizes, &acts)
            .map_err(|e| Error::parse(path, line, format!("{name}: {e}")))?;
        net.unflatten(&params)
            .map_err(|e| Error::parse(path, pline, format!("{name}: {e}")))?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_gaussian, InitKind, Rng};

    fn sample() -> Checkpoint {
        let mut rng = Rng::new(1);
        Checkpoint {
            method: "asga-exp".into(),
            seed: 7,
            episode: 50,
            config: RunConfig::default(),
            actor: init_gaussian(&Mlp::actor(), InitKind::Kaiming, &mut rng).unwrap(),
            critic: init_gaussian(&Mlp::critic(), InitKind::Xavier, &mut rng).unwrap(),
        }
    }

    #[test]
    fn roundtrip_is_value_exact() {
        let ck = sample();
        let back = Checkpoint::parse("ck", &ck.to_text()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let text = sample().to_text();
        assert!(Checkpoint::parse("ck", "").is_err());
        assert!(Checkpoint::parse("ck", &text.replace("format = 1", "format = 9")).is_err());
        assert!(
            Checkpoint::parse("ck", &text.replace("sizes = 4 10 10 2", "sizes = 4 10 2")).is_err()
        );
        assert!(Checkpoint::parse("ck", &text.replace("[critic]", "[actor]")).is_err());
        let truncated = &text[..text.len() - 30];
        assert!(Checkpoint::parse("ck", truncated).is_err());
    }
}
