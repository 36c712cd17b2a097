use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::triple::default_cap;
use super::{
    build_triple, CapLevel, Dimension, PieceSpec, PotentialTriple, RadialPotential, TripleOptions,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub pieces: Vec<PieceSpec>,
}

impl ProfileSpec {
    pub fn build(&self, name: &str) -> Result<RadialPotential> {
        RadialPotential::from_pieces(name, self.pieces.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSpec {
    pub profile: String,
    pub dimension: Dimension,
    pub omega1: f64,
    pub omega2: f64,
    pub e0: f64,
    pub e_plus: f64,
    pub e_plus_prime: f64,
    #[serde(default = "default_blend_width")]
    pub blend_width: f64,
    #[serde(default = "default_cap")]
    pub cap: CapLevel,
}

fn default_blend_width() -> f64 {
    0.05
}

impl TripleSpec {
    pub fn options(&self) -> TripleOptions {
        TripleOptions {
            omega1: self.omega1,
            omega2: self.omega2,
            e0: self.e0,
            e_plus: self.e_plus,
            e_plus_prime: self.e_plus_prime,
            blend_width: self.blend_width,
            cap: self.cap,
        }
    }
}

/// Named profiles and triples, read from TOML or JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalogue {
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileSpec>,
    #[serde(default)]
    pub triples: BTreeMap<String, TripleSpec>,
}

impl Catalogue {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn potential(&self, name: &str) -> Result<RadialPotential> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown profile '{name}'")))?
            .build(name)
    }

    pub fn triple(&self, name: &str) -> Result<PotentialTriple> {
        let spec = self
            .triples
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown triple '{name}'")))?;
        let v = Arc::new(self.potential(&spec.profile)?);
        build_triple(v, spec.dimension, spec.options())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[profiles.ring]
pieces = [{ kind = "step", params = { left = 1.0, right = 2.0, height = 2.0, blend = 0.05 } }]

[profiles.tail]
pieces = [{ kind = "powertail", params = { coefficient = 1.0, exponent = 2.0 } }]

[triples.default]
profile = "ring"
dimension = 3
omega1 = 1.3333333333333333
omega2 = 1.6666666666666667
e0 = 1.0
e_plus = 1.5
e_plus_prime = 1.8
"#;

    #[test]
    fn toml_catalogue_builds_triple() {
        let c = Catalogue::from_toml_str(SAMPLE).unwrap();
        let t = c.triple("default").unwrap();
        assert_eq!(t.dimension, Dimension::Three);
        assert_eq!(t.options.blend_width, 0.05);
        assert!(c.potential("tail").unwrap().decay_exponent() == Some(2.0));
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(Catalogue::from_json_str(&json).unwrap(), c);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let c = Catalogue::from_toml_str(SAMPLE).unwrap();
        assert!(matches!(c.triple("nope"), Err(Error::Config(_))));
    }
}
