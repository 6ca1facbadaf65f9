//! Scenario files: a versioned envelope around a kind-specific payload.

use std::path::PathBuf;

use irrevkit::comb::{ExtractionConfig, Recovery};
use irrevkit::irrev::OptimizerConfig;
use irrevkit::oracles::BlochVector;
use irrevkit::otoc::{CpNormalization, ScramblingScenario};
use irrevkit::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, TestEnsemble};
use irrevkit::way::{Implementation, WayConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: &str = "irrevkit/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Delta,
    Epsilon,
    Eta,
    Blw,
    Lt,
    WayError,
    WayDisturbance,
    Otoc,
    OtocCp,
    WayOtoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema: String,
    kind: Kind,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
    payload: Value,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Error,
    Disturbance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DeltaRecovery {
    #[default]
    Optimize,
    /// Petz map with the given reference, or the ensemble average.
    Petz {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<DensityMatrix>,
    },
    Explicit {
        channel: KrausChannel,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaPayload {
    pub process: KrausChannel,
    pub ensemble: TestEnsemble,
    #[serde(default)]
    pub recovery: DeltaRecovery,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_recovery() -> Recovery {
    Recovery::Optimize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IepPayload {
    pub state: DensityMatrix,
    pub observable: Observable,
    pub instrument: Instrument,
    #[serde(default = "default_recovery")]
    pub recovery: Recovery,
    #[serde(default)]
    pub extraction: ExtractionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlwPayload {
    #[serde(default)]
    pub target: Target,
    pub sharp: BlochVector,
    pub noisy: BlochVector,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtPayload {
    #[serde(default)]
    pub target: Target,
    pub state: DensityMatrix,
    pub observable: Observable,
    pub instrument: Instrument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WayPayload {
    pub state: DensityMatrix,
    pub observable: Observable,
    pub instrument: Instrument,
    pub implementation: Implementation,
    #[serde(default)]
    pub config: WayConfig,
    /// Also evaluate the bound that assumes a diagonal pointer charge (error only).
    #[serde(default)]
    pub yanase: bool,
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtocPayload {
    pub scenario: ScramblingScenario,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    /// Allowed gap between the protocol value and the direct commutator.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtocCpPayload {
    pub scenario: ScramblingScenario,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub normalization: CpNormalization,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WayOtocPayload {
    pub scenario: ScramblingScenario,
    pub implementation: Implementation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Delta(DeltaPayload),
    Iep(IepPayload),
    Blw(BlwPayload),
    Lt(LtPayload),
    Way(WayPayload),
    Otoc(OtocPayload),
    OtocCp(OtocCpPayload),
    WayOtoc(WayOtocPayload),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub payload: Payload,
}

fn typed<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        CliError::schema(format!("{at}: {}", e.inner()))
    })
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, CliError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::schema(format!("malformed JSON: {e}")))?;
        Scenario::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Scenario, CliError> {
        let env: Envelope = serde_path_to_error::deserialize(doc).map_err(|e| CliError::schema(format!("{}: {}", e.path(), e.inner())))?;
        if env.schema != SCHEMA {
            return Err(CliError::schema(format!("schema: expected {SCHEMA:?}, found {:?}", env.schema)));
        }
        let p = env.payload;
        let payload = match env.kind {
            Kind::Delta => Payload::Delta(typed(p, "payload")?),
            Kind::Epsilon | Kind::Eta => Payload::Iep(typed(p, "payload")?),
            Kind::Blw => Payload::Blw(typed(p, "payload")?),
            Kind::Lt => Payload::Lt(typed(p, "payload")?),
            Kind::WayError | Kind::WayDisturbance => Payload::Way(typed(p, "payload")?),
            Kind::Otoc => Payload::Otoc(typed(p, "payload")?),
            Kind::OtocCp => Payload::OtocCp(typed(p, "payload")?),
            Kind::WayOtoc => Payload::WayOtoc(typed(p, "payload")?),
        };
        let mut s = Scenario { kind: env.kind, seed: env.seed, output: env.output, payload };
        s.apply_seed();
        Ok(s)
    }

    /// The scenario seed drives every optimizer restart schedule.
    fn apply_seed(&mut self) {
        let seed = self.seed;
        match &mut self.payload {
            Payload::Delta(d) => d.optimizer.seed = seed,
            Payload::Iep(p) => p.extraction.optimizer.seed = seed,
            Payload::Blw(p) => p.extraction.optimizer.seed = seed,
            Payload::Way(p) => p.config.extraction.optimizer.seed = seed,
            Payload::Otoc(p) => p.extraction.optimizer.seed = seed,
            Payload::OtocCp(p) => p.extraction.optimizer.seed = seed,
            Payload::Lt(_) | Payload::WayOtoc(_) => {}
        }
    }

    /// Extraction settings, for kinds that run a θ grid.
    pub fn extraction_mut(&mut self) -> Option<&mut ExtractionConfig> {
        match &mut self.payload {
            Payload::Iep(p) => Some(&mut p.extraction),
            Payload::Blw(p) => Some(&mut p.extraction),
            Payload::Way(p) => Some(&mut p.config.extraction),
            Payload::Otoc(p) => Some(&mut p.extraction),
            Payload::OtocCp(p) => Some(&mut p.extraction),
            Payload::Delta(_) | Payload::Lt(_) | Payload::WayOtoc(_) => None,
        }
    }

    /// The fully resolved scenario, defaults expanded.
    pub fn to_value(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("schema".into(), SCHEMA.into());
        m.insert("kind".into(), serde_json::to_value(self.kind).expect("enum serializes"));
        m.insert("seed".into(), self.seed.into());
        if let Some(o) = &self.output {
            m.insert("output".into(), o.to_string_lossy().into_owned().into());
        }
        m.insert("payload".into(), serde_json::to_value(&self.payload).expect("payload serializes"));
        Value::Object(m)
    }
}
