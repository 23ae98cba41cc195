//! Run configuration: TOML documents with named presets.
//!
//! A document either spells out every section or names a `preset` and
//! overrides individual keys; user tables are deep-merged over the preset
//! base before deserialization, so `preset = "kovasznay-s4"` plus a custom
//! `[training] epochs = ...` is a complete config. Unknown keys are
//! rejected everywhere. `[networks]` sections that the chosen loss variant
//! does not use are accepted and ignored, which keeps variant flips cheap.

use serde::{Deserialize, Serialize};

use crate::fields::{NetSpec, TrainedFields};
use crate::geometry::{Hole, RectWithHoles};
use crate::loss::{LossVariant, LossWeights};
use crate::optim::{AlphaAdapter, LrSchedule};
use crate::problems::ExactSolution;
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkName {
    Kovasznay,
    TwoFrequency,
    MultiFrequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: BenchmarkName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freqs: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// Circular holes as `[cx, cy, r]` triples.
    #[serde(default)]
    pub holes: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworksConfig {
    pub u: NetSpec,
    pub p: NetSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<NetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<NetSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub variant: LossVariant,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub alpha_adaptation: bool,
}

/// Evaluation point set, written as `"grid:NX,NY"` or `"random:N"`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EvalSet {
    Grid { nx: usize, ny: usize },
    Random { count: usize },
}

impl TryFrom<String> for EvalSet {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl std::str::FromStr for EvalSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("eval set must be \"grid:NX,NY\" or \"random:N\", got {s:?}");
        if let Some(rest) = s.strip_prefix("grid:") {
            let (nx, ny) = rest.split_once(',').ok_or_else(bad)?;
            let nx = nx.trim().parse().map_err(|_| bad())?;
            let ny = ny.trim().parse().map_err(|_| bad())?;
            Ok(EvalSet::Grid { nx, ny })
        } else if let Some(rest) = s.strip_prefix("random:") {
            Ok(EvalSet::Random { count: rest.trim().parse().map_err(|_| bad())? })
        } else {
            Err(bad())
        }
    }
}

impl From<EvalSet> for String {
    fn from(e: EvalSet) -> String {
        match e {
            EvalSet::Grid { nx, ny } => format!("grid:{nx},{ny}"),
            EvalSet::Random { count } => format!("random:{count}"),
        }
    }
}

impl EvalSet {
    pub fn point_budget(&self) -> usize {
        match *self {
            EvalSet::Grid { nx, ny } => nx * ny,
            EvalSet::Random { count } => count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: u64,
    pub interior_points: usize,
    pub boundary_points: usize,
    pub interior_batch: usize,
    pub boundary_batch: usize,
    pub lr: f64,
    pub lr_drop_every: u64,
    pub lr_drop_factor: f64,
    pub init_seed: u64,
    pub sampling_seed: u64,
    pub shuffle_seed: u64,
    pub eval_seed: u64,
    pub eval_every: u64,
    pub eval_set: EvalSet,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_precision() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    /// Digits after the decimal point in emitted CSV numbers.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub domain: DomainConfig,
    pub networks: NetworksConfig,
    pub loss: LossConfig,
    pub training: TrainingConfig,
    pub output: OutputConfig,
}

pub const PRESET_NAMES: [&str; 4] =
    ["kovasznay-s4", "two-freq-s51", "multi-freq-s52", "ablation-s53"];

pub fn preset_document(name: &str) -> Option<&'static str> {
    match name {
        "kovasznay-s4" => Some(KOVASZNAY_S4),
        "two-freq-s51" => Some(TWO_FREQ_S51),
        "multi-freq-s52" => Some(MULTI_FREQ_S52),
        "ablation-s53" => Some(ABLATION_S53),
        _ => None,
    }
}

/// Recursively overlay `over` onto `base`: tables merge key by key, any
/// other value replaces the base value wholesale.
fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (slot, value) => {
                if let Some(slot) = slot {
                    *slot = value;
                } else {
                    base.insert(key, value);
                }
            }
        }
    }
}

/// Parse a config document, expanding an optional `preset` reference.
pub fn parse_str(doc: &str) -> Result<RunConfig> {
    let mut table: toml::Table =
        toml::from_str(doc).map_err(|e| Error::config(format!("malformed config: {e}")))?;
    let table = match table.remove("preset") {
        Some(toml::Value::String(name)) => {
            let base_doc = preset_document(&name).ok_or_else(|| {
                Error::config(format!(
                    "unknown preset {name:?}; available: {}",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            let mut base: toml::Table = toml::from_str(base_doc).expect("presets are valid");
            merge_tables(&mut base, table);
            base
        }
        Some(other) => {
            return Err(Error::config(format!("preset must be a string, got {other}")));
        }
        None => table,
    };
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn parse_file(path: impl AsRef<std::path::Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let doc = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_str(&doc)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        match (p.nu, p.re) {
            (Some(nu), None) if nu > 0.0 && nu.is_finite() => {}
            (None, Some(re)) if re > 0.0 && re.is_finite() => {}
            (Some(_), Some(_)) => {
                return Err(Error::config("set problem.nu or problem.re, not both"));
            }
            _ => {
                return Err(Error::config(
                    "exactly one of problem.nu, problem.re must be set and positive",
                ));
            }
        }
        match p.name {
            BenchmarkName::TwoFrequency => {
                let f = p.freqs.ok_or_else(|| {
                    Error::config("problem.freqs = [n, m] is required by the two-frequency benchmark")
                })?;
                if f[1] == 0.0 {
                    return Err(Error::config("problem.freqs: m must be nonzero"));
                }
            }
            _ => {
                if p.freqs.is_some() {
                    return Err(Error::config(
                        "problem.freqs is only used by the two-frequency benchmark",
                    ));
                }
            }
        }

        self.build_domain()?;

        for (path, spec) in self.net_sections() {
            if spec.scales.is_empty() {
                return Err(Error::config(format!("{path}.scales must not be empty")));
            }
            if let Some(bad) = spec.scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
                return Err(Error::config(format!("{path}.scales must be positive, got {bad}")));
            }
            if spec.hidden_layers == 0 || spec.hidden_width == 0 {
                return Err(Error::config(format!(
                    "{path}.hidden_layers and {path}.hidden_width must be positive"
                )));
            }
        }
        let req = self.loss.variant.requirements();
        if req.pressure_gradient_net && self.networks.q.is_none() {
            return Err(Error::config(format!(
                "loss variant {} needs a [networks.q] section",
                self.loss.variant.label()
            )));
        }
        if req.aux.is_some() && self.networks.aux.is_none() {
            return Err(Error::config(format!(
                "loss variant {} needs a [networks.aux] section",
                self.loss.variant.label()
            )));
        }

        if !(self.loss.alpha >= 0.0) || !(self.loss.beta >= 0.0) {
            return Err(Error::config("loss.alpha and loss.beta must be nonnegative"));
        }

        let t = &self.training;
        for (key, value) in [
            ("training.interior_points", t.interior_points),
            ("training.boundary_points", t.boundary_points),
            ("training.interior_batch", t.interior_batch),
            ("training.boundary_batch", t.boundary_batch),
        ] {
            if value == 0 {
                return Err(Error::config(format!("{key} must be positive")));
            }
        }
        if t.interior_batch > t.interior_points {
            return Err(Error::config(format!(
                "training.interior_batch ({}) exceeds training.interior_points ({})",
                t.interior_batch, t.interior_points
            )));
        }
        if t.boundary_batch > t.boundary_points {
            return Err(Error::config(format!(
                "training.boundary_batch ({}) exceeds training.boundary_points ({})",
                t.boundary_batch, t.boundary_points
            )));
        }
        if !(t.lr > 0.0) || !t.lr.is_finite() {
            return Err(Error::config("training.lr must be positive"));
        }
        if !(t.lr_drop_factor > 0.0 && t.lr_drop_factor <= 1.0) {
            return Err(Error::config("training.lr_drop_factor must be in (0, 1]"));
        }
        if t.eval_every == 0 {
            return Err(Error::config("training.eval_every must be positive"));
        }
        if t.eval_set.point_budget() == 0 {
            return Err(Error::config("training.eval_set must contain points"));
        }

        if self.output.precision < 14 || self.output.precision > 17 {
            return Err(Error::config(
                "output.precision must be between 14 and 17 digits after the point",
            ));
        }
        Ok(())
    }

    fn net_sections(&self) -> Vec<(&'static str, &NetSpec)> {
        let mut v = vec![("networks.u", &self.networks.u), ("networks.p", &self.networks.p)];
        if let Some(q) = &self.networks.q {
            v.push(("networks.q", q));
        }
        if let Some(aux) = &self.networks.aux {
            v.push(("networks.aux", aux));
        }
        v
    }

    pub fn build_domain(&self) -> Result<RectWithHoles> {
        let d = &self.domain;
        let holes = d
            .holes
            .iter()
            .map(|h| Hole { center: [h[0], h[1]], radius: h[2] })
            .collect();
        RectWithHoles::new(d.xmin, d.xmax, d.ymin, d.ymax, holes)
    }

    pub fn viscosity(&self) -> f64 {
        match (self.problem.nu, self.problem.re) {
            (Some(nu), _) => nu,
            (None, Some(re)) => 1.0 / re,
            _ => unreachable!("validated"),
        }
    }

    pub fn build_solution(&self) -> Result<ExactSolution> {
        let nu = self.viscosity();
        match self.problem.name {
            BenchmarkName::Kovasznay => ExactSolution::kovasznay(nu),
            BenchmarkName::TwoFrequency => {
                let f = self.problem.freqs.expect("validated");
                ExactSolution::two_frequency(nu, f[0], f[1])
            }
            BenchmarkName::MultiFrequency => ExactSolution::multi_frequency(nu),
        }
    }

    /// Allocate the trained networks this config describes.
    pub fn build_fields(&self) -> Result<TrainedFields> {
        let req = self.loss.variant.requirements();
        let n = &self.networks;
        // Placeholders for sections the variant ignores; the constructor
        // only reads the specs the requirements name.
        let q = n.q.as_ref().unwrap_or(&n.p);
        let aux = n.aux.as_ref().unwrap_or(&n.u);
        TrainedFields::new(req, &n.u, &n.p, q, aux)
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { alpha: self.loss.alpha, beta: self.loss.beta }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.training.lr,
            drop_every: self.training.lr_drop_every,
            factor: self.training.lr_drop_factor,
        }
    }

    pub fn alpha_adapter(&self) -> AlphaAdapter {
        AlphaAdapter::standard(self.loss.alpha_adaptation)
    }

    /// Whether this run must use fully deterministic bookkeeping (the
    /// config flag or the `DETERMINISTIC=1` environment variable).
    pub fn deterministic(&self) -> bool {
        self.training.deterministic
            || std::env::var("DETERMINISTIC").map(|v| v == "1").unwrap_or(false)
    }

    /// Canonical expanded document, used for checkpoint embedding.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

const KOVASZNAY_S4: &str = r#"
[problem]
name = "kovasznay"
nu = 0.1

[domain]
xmin = 0.0
xmax = 2.0
ymin = -0.5
ymax = 1.5

[networks.u]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 4
hidden_width = 50

[networks.p]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 4
hidden_width = 50

[networks.q]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 4
hidden_width = 50

[networks.aux]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 4
hidden_width = 50

[loss]
variant = "omega-vp"
alpha = 1.0
beta = 100.0
alpha_adaptation = false

[training]
epochs = 300
interior_points = 50000
boundary_points = 10000
interior_batch = 1000
boundary_batch = 400
lr = 1e-3
lr_drop_every = 100
lr_drop_factor = 0.1
init_seed = 1
sampling_seed = 2
shuffle_seed = 3
eval_seed = 4
eval_every = 1
eval_set = "grid:200,200"

[output]
directory = "runs/kovasznay-s4"
"#;

const TWO_FREQ_S51: &str = r#"
[problem]
name = "two-frequency"
nu = 0.1
freqs = [50.0, 55.0]

[domain]
xmin = 0.0
xmax = 2.0
ymin = -0.5
ymax = 1.5
holes = [
    [0.5, 0.0, 0.2],
    [1.25, -0.2, 0.15],
    [1.3, 0.4, 0.18],
    [0.5, 1.1, 0.2],
    [1.2, 0.9, 0.18],
    [1.6, 1.0, 0.15],
]

[networks.u]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]
hidden_layers = 8
hidden_width = 150

[networks.p]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 8
hidden_width = 50

[networks.q]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 8
hidden_width = 50

[networks.aux]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]
hidden_layers = 8
hidden_width = 150

[loss]
variant = "omega-vp"
alpha = 2000.0
beta = 100.0
alpha_adaptation = true

[training]
epochs = 1500
interior_points = 850621
boundary_points = 140000
interior_batch = 10000
boundary_batch = 2000
lr = 1e-3
lr_drop_every = 500
lr_drop_factor = 0.1
init_seed = 1
sampling_seed = 2
shuffle_seed = 3
eval_seed = 4
eval_every = 50
eval_set = "random:34072"

[output]
directory = "runs/two-freq-s51"
"#;

const MULTI_FREQ_S52: &str = r#"
[problem]
name = "multi-frequency"
nu = 0.1

[domain]
xmin = 0.0
xmax = 2.0
ymin = -0.5
ymax = 1.5
holes = [
    [0.5, 0.0, 0.2],
    [1.25, -0.2, 0.15],
    [1.3, 0.4, 0.18],
    [0.5, 1.1, 0.2],
    [1.2, 0.9, 0.18],
    [1.6, 1.0, 0.15],
]

[networks.u]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
hidden_layers = 8
hidden_width = 120

[networks.p]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 8
hidden_width = 50

[networks.q]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 8
hidden_width = 50

[networks.aux]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
hidden_layers = 8
hidden_width = 120

[loss]
variant = "omega-vp"
alpha = 2000.0
beta = 100.0
alpha_adaptation = true

[training]
epochs = 1500
interior_points = 425290
boundary_points = 140000
interior_batch = 5000
boundary_batch = 2000
lr = 1e-3
lr_drop_every = 500
lr_drop_factor = 0.1
init_seed = 1
sampling_seed = 2
shuffle_seed = 3
eval_seed = 4
eval_every = 50
eval_set = "random:34072"

[output]
directory = "runs/multi-freq-s52"
"#;

const ABLATION_S53: &str = r#"
[problem]
name = "multi-frequency"
nu = 0.1

[domain]
xmin = 0.0
xmax = 2.0
ymin = -0.5
ymax = 1.5
holes = [
    [0.5, 0.0, 0.2],
    [1.25, -0.2, 0.15],
    [1.3, 0.4, 0.18],
    [0.5, 1.1, 0.2],
    [1.2, 0.9, 0.18],
    [1.6, 1.0, 0.15],
]

[networks.u]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
hidden_layers = 8
hidden_width = 120

[networks.p]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
hidden_layers = 8
hidden_width = 50

[networks.aux]
scales = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
hidden_layers = 8
hidden_width = 120

[loss]
variant = "omega-vp-no-poisson"
alpha = 2000.0
beta = 100.0
alpha_adaptation = true

[training]
epochs = 1500
interior_points = 425290
boundary_points = 140000
interior_batch = 5000
boundary_batch = 2000
lr = 1e-3
lr_drop_every = 500
lr_drop_factor = 0.1
init_seed = 1
sampling_seed = 2
shuffle_seed = 3
eval_seed = 4
eval_every = 50
eval_set = "random:34072"

[output]
directory = "runs/ablation-s53"
"#;
