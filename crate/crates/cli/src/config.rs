//! Experiment configuration files and everything they reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mpec::circuit::{parse_circuit, DynamicCircuit, FeedforwardRule};
use mpec::exec::Executor;
use mpec::families::{cc_cnot_fragment, feedforward_target, surface_tile, Family};
use mpec::learning::{model_from_report, LearningConfig};
use mpec::noise::{NoiseModel, Topology};
use mpec::pauli::PauliString;
use mpec::pec::{Arm, DEFAULT_BOOTSTRAP};
use mpec::sim::NoiseBinding;
use mpec::Error;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Learn,
    Validate,
    Mitigate,
    Tile,
    Feedforward,
    Ptm,
    Decompose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Feedforward,
    Tile,
    TileHardware,
    CcCnot,
}

fn default_instances() -> usize {
    256
}

fn default_shots() -> u64 {
    128
}

fn default_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationSettings {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub executor: Executor,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    /// Observable names of the family, or Pauli labels. Empty means all
    /// family observables.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub post_select: Option<String>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Also report the exact dense value of every arm.
    #[serde(default)]
    pub exact: bool,
    /// Software recovery rules; defaults to the family's.
    #[serde(default)]
    pub recovery: Option<Vec<FeedforwardRule>>,
}

impl Default for MitigationSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Where learned models come from.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    /// `"planted"`: the binding's own layer models.
    Named(String),
    /// Label to learning-report path.
    Reports(BTreeMap<String, PathBuf>),
    #[default]
    #[serde(skip)]
    Default,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtmSettings {
    /// Average over all twirls of this labeled layer.
    #[serde(default)]
    pub twirl_layer: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub circuit: Option<PathBuf>,
    #[serde(default)]
    pub family: Option<FamilyChoice>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub topology: Option<PathBuf>,
    /// Planted-noise binding.
    #[serde(default)]
    pub noise: Option<PathBuf>,
    /// PEC layer labels to learn or validate; all labeled layers if absent.
    #[serde(default)]
    pub layers: Option<Vec<String>>,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub max_instances: Option<u64>,
    #[serde(default)]
    pub mitigation: MitigationSettings,
    #[serde(default)]
    pub models: ModelSource,
    #[serde(default)]
    pub ptm: PtmSettings,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// A configuration with every referenced file parsed.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub circuit: DynamicCircuit,
    pub observables: Vec<(String, PauliString)>,
    pub recovery: Vec<FeedforwardRule>,
    pub binding: NoiseBinding,
    pub topology: Option<Topology>,
    pub out: PathBuf,
    pub seed: u64,
    base: PathBuf,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

impl Experiment {
    pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let text = read(path)?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        if let Some(a) = config.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("alpha = {a} outside [0, 1]")).into());
            }
        }
        let family = match (config.family, config.experiment) {
            (Some(f), _) => Some(f),
            (None, Some(ExperimentKind::Tile)) => Some(FamilyChoice::Tile),
            (None, Some(ExperimentKind::Feedforward)) => Some(FamilyChoice::Feedforward),
            _ => None,
        };
        let fam: Family = match (&config.circuit, family) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a circuit file or a family, not both".into()).into())
            }
            (Some(p), None) => Family {
                circuit: parse_circuit(&read(&resolve(p))?)?,
                observables: vec![],
                recovery: vec![],
            },
            (None, Some(FamilyChoice::Feedforward)) => {
                let alpha = config
                    .alpha
                    .ok_or_else(|| Error::Config("the feedforward family needs alpha".into()))?;
                feedforward_target(alpha)?
            }
            (None, Some(FamilyChoice::Tile)) => surface_tile(false)?,
            (None, Some(FamilyChoice::TileHardware)) => surface_tile(true)?,
            (None, Some(FamilyChoice::CcCnot)) => Family {
                circuit: cc_cnot_fragment()?,
                observables: vec![],
                recovery: vec![],
            },
            (None, None) => return Err(Error::Config("no circuit file or family given".into()).into()),
        };
        let binding = match &config.noise {
            Some(p) => NoiseBinding::from_json(&read(&resolve(p))?)?,
            None => NoiseBinding::noiseless(),
        };
        let topology = match &config.topology {
            Some(p) => Some(Topology::from_json(&read(&resolve(p))?)?),
            None => None,
        };
        config.learning.validate()?;
        let seed = seed.unwrap_or(config.seed);
        let out = out
            .or_else(|| config.out.as_ref().map(|p| resolve(p)))
            .unwrap_or_else(|| PathBuf::from("out"));
        let recovery = config.mitigation.recovery.clone().unwrap_or(fam.recovery);
        Ok(Experiment {
            circuit: fam.circuit,
            observables: fam.observables,
            recovery,
            binding,
            topology,
            out,
            seed,
            base,
            config,
        })
    }

    /// Checks that the config's declared kind fits the subcommand.
    pub fn expect_kind(&self, allowed: &[ExperimentKind]) -> Result<(), CliError> {
        match self.config.experiment {
            Some(k) if !allowed.contains(&k) => Err(Error::Config(format!(
                "config describes a {k:?} experiment, not {:?}",
                allowed[0]
            ))
            .into()),
            _ => Ok(()),
        }
    }

    /// Labels of the PEC layers this experiment targets.
    pub fn target_layers(&self) -> Result<Vec<(String, usize)>, CliError> {
        let labels = match &self.config.layers {
            Some(l) => l.clone(),
            None => self.circuit.labels(),
        };
        if labels.is_empty() {
            return Err(Error::Config("the circuit has no labeled layers".into()).into());
        }
        labels
            .into_iter()
            .map(|l| {
                let i = self
                    .circuit
                    .find_label(&l)
                    .ok_or_else(|| Error::Config(format!("circuit has no layer labeled {l:?}")))?;
                Ok((l, i))
            })
            .collect()
    }

    pub fn learning_report_path(&self, label: &str) -> PathBuf {
        self.out.join(format!("learn_{label}.json"))
    }

    /// Learned models for `labels`, from report files or the planted binding.
    pub fn models(&self, labels: &[String]) -> Result<BTreeMap<String, NoiseModel>, CliError> {
        let mut out = BTreeMap::new();
        for label in labels {
            let model = match &self.config.models {
                ModelSource::Named(n) if n == "planted" => self
                    .binding
                    .layer(label)
                    .and_then(|l| l.model.clone())
                    .ok_or_else(|| Error::Config(format!("binding has no model for {label:?}")))?,
                ModelSource::Named(n) => {
                    return Err(Error::Config(format!("unknown model source {n:?}")).into());
                }
                ModelSource::Reports(map) => {
                    let p = map
                        .get(label)
                        .map(|p| if p.is_absolute() { p.clone() } else { self.base.join(p) })
                        .ok_or_else(|| Error::Config(format!("no learning report for {label:?}")))?;
                    self.report_model(&p)?
                }
                ModelSource::Default => self.report_model(&self.learning_report_path(label))?,
            };
            out.insert(label.clone(), model);
        }
        Ok(out)
    }

    fn report_model(&self, path: &Path) -> Result<NoiseModel, CliError> {
        let doc: serde_json::Value = serde_json::from_str(&read(path)?)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Ok(model_from_report(&doc)?.1)
    }

    /// Observables named in the mitigation settings.
    pub fn selected_observables(&self) -> Result<Vec<(String, PauliString)>, CliError> {
        let names = &self.config.mitigation.observables;
        if names.is_empty() {
            if self.observables.is_empty() {
                return Err(Error::Config("no observables given".into()).into());
            }
            return Ok(self.observables.clone());
        }
        names
            .iter()
            .map(|n| match self.observables.iter().find(|(m, _)| m == n) {
                Some(o) => Ok(o.clone()),
                None => Ok((n.clone(), n.parse::<PauliString>()?)),
            })
            .collect()
    }
}
