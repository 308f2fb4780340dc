//! Experiment configuration: layered TOML with built-in presets and includes.

use std::path::{Path, PathBuf};

use qclimit::family::FamilySpec;
use qclimit::fock::Dispersion;
use qclimit::harness::{BasisSpec, CorpusSeed, GridSpec, SweepPlan, Tolerances};
use qclimit::lorentz::CorpusSpec;
use qclimit::operators::UPreset;
use qclimit::potentials::{ChiPreset, CouplingSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
const MAX_INCLUDE_DEPTH: usize = 16;

/// Built-in presets, addressable by name from `preset = "..."`.
pub const PRESETS: [(&str, &str); 6] = [
    ("coherent-nelson", include_str!("../presets/coherent-nelson.toml")),
    ("excited-nelson", include_str!("../presets/excited-nelson.toml")),
    ("excited-pauli-fierz", include_str!("../presets/excited-pauli-fierz.toml")),
    ("harmonic-resolvent", include_str!("../presets/harmonic-resolvent.toml")),
    ("chi-equals-omega", include_str!("../presets/chi-equals-omega.toml")),
    ("uv-nelson", include_str!("../presets/uv-nelson.toml")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Nelson,
    PauliFierz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    List { values: Vec<f64> },
    /// `start * factor^i` for `i < points`.
    Geometric { start: f64, factor: f64, points: usize },
}

impl SweepSpec {
    pub fn epsilons(&self) -> Vec<f64> {
        match self {
            SweepSpec::List { values } => values.clone(),
            SweepSpec::Geometric { start, factor, points } => (0..*points).map(|i| start * factor.powi(i as i32)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    State,
    Potential,
    Gamma,
    ResolventStrong,
    ResolventNorm,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::State => "state",
            Operation::Potential => "potential",
            Operation::Gamma => "gamma",
            Operation::ResolventStrong => "resolvent_strong",
            Operation::ResolventNorm => "resolvent_norm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default = "default_operations")]
    pub operations: Vec<Operation>,
}

fn default_operations() -> Vec<Operation> {
    vec![Operation::Potential, Operation::Gamma, Operation::ResolventStrong]
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self { operations: default_operations() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_count")]
    pub count: usize,
    /// Dense triplet export of the limit operator up to this dimension.
    #[serde(default = "default_triplets")]
    pub triplets_max_dim: usize,
}

fn default_count() -> usize {
    6
}

fn default_triplets() -> usize {
    1024
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { count: default_count(), triplets_max_dim: default_triplets() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UvSection {
    #[serde(default = "default_exponents")]
    pub exponents: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
    /// Fixed-eps cutoff ladder for the Wick-constant slope (Pauli-Fierz only).
    #[serde(default)]
    pub wick_cutoffs: Vec<f64>,
}

fn default_exponents() -> Vec<f64> {
    vec![0.25, 0.5]
}

fn one() -> f64 {
    1.0
}

impl Default for UvSection {
    fn default() -> Self {
        Self { exponents: default_exponents(), scale: 1.0, wick_cutoffs: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzSection {
    #[serde(default = "default_lorentz_count")]
    pub count: usize,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_box")]
    pub box_len: f64,
    #[serde(default = "default_weak_grid")]
    pub weak_norm_grid: usize,
}

fn default_lorentz_count() -> usize {
    CorpusSpec::default().count
}

fn default_sizes() -> Vec<usize> {
    CorpusSpec::default().sizes
}

fn default_box() -> f64 {
    CorpusSpec::default().box_len
}

fn default_weak_grid() -> usize {
    64
}

impl Default for LorentzSection {
    fn default() -> Self {
        Self { count: default_lorentz_count(), sizes: default_sizes(), box_len: default_box(), weak_norm_grid: default_weak_grid() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub model: Model,
    pub dispersion: Dispersion,
    pub chi: ChiPreset,
    #[serde(default = "zero_u")]
    pub u: UPreset,
    pub family: FamilySpec,
    pub basis: BasisSpec,
    pub grid: GridSpec,
    pub sweep: SweepSpec,
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_corpus")]
    pub corpus_count: usize,
    #[serde(default = "one")]
    pub lambda0: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub uv: UvSection,
    #[serde(default)]
    pub lorentz: LorentzSection,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn zero_u() -> UPreset {
    UPreset::Zero
}

fn default_out() -> PathBuf {
    PathBuf::from("qclimit-out")
}

fn default_corpus() -> usize {
    4
}

impl ExperimentConfig {
    pub fn coupling(&self) -> CouplingSpec {
        match self.model {
            Model::Nelson => CouplingSpec::nelson(self.chi, self.dispersion),
            Model::PauliFierz => CouplingSpec::pauli_fierz(self.chi, self.dispersion),
        }
    }

    pub fn plan(&self) -> SweepPlan {
        SweepPlan {
            epsilons: self.sweep.epsilons(),
            family: self.family.clone(),
            basis: self.basis.clone(),
            coupling: self.coupling(),
            grid: self.grid,
            u: self.u.clone(),
            corpus: CorpusSeed { seed: self.seed, count: self.corpus_count },
            lambda0: self.lambda0,
            tolerances: self.tolerances,
        }
    }

    pub fn lorentz_corpus(&self) -> CorpusSpec {
        CorpusSpec { seed: self.seed, count: self.lorentz.count, sizes: self.lorentz.sizes.clone(), box_len: self.lorentz.box_len }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.plan().validate().map_err(|e| CliError::config(e.to_string()))?;
        let polarized = match self.basis {
            BasisSpec::Lattice { polarized, .. } | BasisSpec::Uniform { polarized, .. } => polarized,
        };
        if (self.model == Model::PauliFierz) != polarized {
            return Err(CliError::config("pauli_fierz needs a polarized basis and nelson an unpolarized one".to_string()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(CliError::config("seed must fit in a signed 64-bit integer".to_string()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, with the output directory left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn preset_table(name: &str) -> Result<Table, CliError> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::config(format!("unknown preset '{name}'")))?;
    text.parse::<Table>().map_err(|e| CliError::config(format!("preset '{name}': {e}")))
}

/// Overlay `top` on `base`: tables merge key by key, except that a table whose
/// `kind` differs replaces the lower one; other values replace.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) if b.get("kind") == t.get("kind") || t.get("kind").is_none() => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn string_list(v: Value, key: &str) -> Result<Vec<String>, CliError> {
    match v {
        Value::String(s) => Ok(vec![s]),
        Value::Array(a) => a
            .into_iter()
            .map(|x| match x {
                Value::String(s) => Ok(s),
                _ => Err(CliError::config(format!("'{key}' entries must be strings"))),
            })
            .collect(),
        _ => Err(CliError::config(format!("'{key}' must be a string or an array of strings"))),
    }
}

/// Expand `preset` and `include` keys: presets first, then includes in order
/// (paths relative to the including file), then the layer's own keys.
fn resolve(mut layer: Table, dir: Option<&Path>, depth: usize) -> Result<Table, CliError> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(CliError::config("include depth exceeded (cycle?)".to_string()));
    }
    let mut out = Table::new();
    if let Some(p) = layer.remove("preset") {
        for name in string_list(p, "preset")? {
            merge(&mut out, resolve(preset_table(&name)?, None, depth + 1)?);
        }
    }
    if let Some(inc) = layer.remove("include") {
        for rel in string_list(inc, "include")? {
            let path = match dir {
                Some(d) => d.join(&rel),
                None => return Err(CliError::config(format!("preset layers cannot include files ('{rel}')"))),
            };
            merge(&mut out, resolve(read_table(&path)?, path.parent(), depth + 1)?);
        }
    }
    merge(&mut out, layer);
    Ok(out)
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Resolved key-value layer of a config file, or the default layer.
pub fn load_table(path: Option<&Path>) -> Result<Table, CliError> {
    match path {
        Some(p) => resolve(read_table(p)?, p.parent(), 0),
        None => {
            let mut t = Table::new();
            t.insert("preset".into(), Value::String("coherent-nelson".into()));
            t.insert("seed".into(), Value::Integer(7));
            resolve(t, None, 0)
        }
    }
}

/// Command-line overrides applied on top of the resolved layers.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn from_table(mut table: Table, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    if let Some(s) = ov.seed {
        let s = i64::try_from(s).map_err(|_| CliError::config("seed must fit in a signed 64-bit integer".to_string()))?;
        table.insert("seed".into(), Value::Integer(s));
    }
    if let Some(o) = &ov.out {
        table.insert("out".into(), Value::String(o.to_string_lossy().into_owned()));
    }
    let cfg: ExperimentConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    from_table(load_table(path)?, ov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str, seed: u64) -> ExperimentConfig {
        let mut t = Table::new();
        t.insert("preset".into(), Value::String(name.into()));
        from_table(resolve(t, None, 0).unwrap(), &Overrides { seed: Some(seed), out: None }).unwrap()
    }

    #[test]
    fn presets_resolve_and_round_trip() {
        for (name, _) in PRESETS {
            let cfg = preset(name, 3);
            let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn layered_family_kind_replaces() {
        let cfg = preset("excited-pauli-fierz", 1);
        assert_eq!(cfg.model, Model::PauliFierz);
        assert!(matches!(cfg.family, FamilySpec::ExcitedCoherent { .. }));
        assert!(matches!(cfg.basis, BasisSpec::Lattice { polarized: true, max_index: 5, .. }));
    }

    #[test]
    fn seed_is_mandatory() {
        let mut t = Table::new();
        t.insert("preset".into(), Value::String("coherent-nelson".into()));
        let e = from_table(resolve(t, None, 0).unwrap(), &Overrides::default()).unwrap_err();
        assert!(e.message.contains("seed"), "{}", e.message);
    }

    #[test]
    fn hash_ignores_out_but_not_seed() {
        let a = preset("coherent-nelson", 1);
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), preset("coherent-nelson", 2).hash());
    }

    #[test]
    fn geometric_sweep_halves() {
        let s = SweepSpec::Geometric { start: 0.1, factor: 0.5, points: 3 };
        assert_eq!(s.epsilons(), vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn unknown_keys_and_presets_rejected() {
        let mut t = preset_table("coherent-nelson").unwrap();
        t.insert("seed".into(), Value::Integer(1));
        t.insert("colour".into(), Value::Integer(1));
        assert!(from_table(resolve(t, None, 0).unwrap(), &Overrides::default()).is_err());
        assert!(preset_table("nope").is_err());
    }
}
