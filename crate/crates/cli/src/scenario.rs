//! Scenario files for `simulate`.
//!
//! ```toml
//! kind = "walk_then_fall"   # gait | lean_fall | walk_then_fall
//! seed = 3                  # optional, --seed wins
//! vary = true               # per-participant variation drawn from the seed
//!
//! [gait]
//! cadence_sps = 1.4
//!
//! [fall]
//! theta_fall_deg = 20.0
//! ```

use std::fs;
use std::path::Path;

use equilivest::simulator::{
    gen_gait, gen_lean_fall, gen_walk_then_fall, participant_variation, GaitScenario, LeanFallScenario, Simulation,
};
use equilivest::Error;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::config::parse_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Gait,
    LeanFall,
    WalkThenFall,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "gait" => Ok(Self::Gait),
            "lean_fall" => Ok(Self::LeanFall),
            "walk_then_fall" => Ok(Self::WalkThenFall),
            other => Err(Error::Config {
                field: "kind",
                reason: format!("unknown scenario kind `{other}`, expected gait, lean_fall or walk_then_fall"),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gait => "gait",
            Self::LeanFall => "lean_fall",
            Self::WalkThenFall => "walk_then_fall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub seed: Option<u64>,
    pub vary: bool,
    pub gait: GaitScenario,
    pub fall: LeanFallScenario,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Body {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    vary: bool,
    #[serde(default)]
    gait: GaitScenario,
    #[serde(default)]
    fall: LeanFallScenario,
}

impl Scenario {
    pub fn with_kind(kind: ScenarioKind) -> Self {
        Self { kind, seed: None, vary: false, gait: GaitScenario::default(), fall: LeanFallScenario::default() }
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut table = parse_table(text, "scenario")?;
        let kind = match table.remove("kind") {
            Some(Value::String(s)) => ScenarioKind::parse(&s)?,
            Some(other) => {
                return Err(Error::Config {
                    field: "kind",
                    reason: format!("expected a string, got {}", other.type_str()),
                })
            }
            None => return Err(Error::Config { field: "kind", reason: "missing".into() }),
        };
        let body: Body = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config { field: "scenario", reason: e.message().to_string() })?;
        let s = Self { kind, seed: body.seed, vary: body.vary, gait: body.gait, fall: body.fall };
        s.gait.validate()?;
        s.fall.validate()?;
        Ok(s)
    }

    pub fn generate(&self, seed: u64) -> Result<Simulation, Error> {
        let (gait, fall) =
            if self.vary { participant_variation(&self.gait, &self.fall, seed) } else { (self.gait, self.fall) };
        match self.kind {
            ScenarioKind::Gait => gen_gait(&gait, seed),
            ScenarioKind::LeanFall => gen_lean_fall(&fall, seed),
            ScenarioKind::WalkThenFall => gen_walk_then_fall(&gait, &fall, seed),
        }
    }
}
