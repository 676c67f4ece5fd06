//! JSON input formats. Everything read here is validated before it is
//! returned, so callers never see a structurally broken object.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::barycenter::ConvexSet;
use crate::error::{Error, Result};
use crate::extension::ExtensionInstance;
use crate::lab::SweepConfig;
use crate::markov::{validate_chain, ReversibleChain};
use crate::measure::DiscreteMeasure;
use crate::space::{GeodesicSpace, SpacePoint};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))
}

/// `{"space": {...}, "atoms": [[...], ...], "weights": [...]}`.
pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let mu: DiscreteMeasure = read_json(path)?;
    mu.validate()?;
    Ok(mu)
}

/// `{"pi": [...], "a": [[...], ...]}`; rejected unless stochastic and reversible.
pub fn load_chain(path: &Path) -> Result<ReversibleChain> {
    let chain: ReversibleChain = read_json(path)?;
    let diag = validate_chain(&chain);
    if !diag.valid {
        return Err(Error::InvalidInstance(diag.message));
    }
    Ok(chain)
}

/// Input of the `project` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInput {
    pub space: GeodesicSpace,
    pub set: ConvexSet,
    pub point: SpacePoint,
}

pub fn load_projection(path: &Path) -> Result<ProjectionInput> {
    let input: ProjectionInput = read_json(path)?;
    input.space.validate()?;
    input.space.check_point(&input.point)?;
    Ok(input)
}

/// Structural checks that need the curvature class happen in `extend`.
pub fn load_extension(path: &Path) -> Result<ExtensionInstance> {
    read_json(path)
}

/// A single sweep object or an array of them.
pub fn load_manifest(path: &Path) -> Result<Vec<SweepConfig>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = parse_json(&text)?;
    // parse through the typed form so errors name the offending field
    let sweeps = if value.is_array() {
        parse_json::<Vec<SweepConfig>>(&text)
    } else {
        parse_json::<SweepConfig>(&text).map(|c| vec![c])
    }
    .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    if sweeps.is_empty() {
        return Err(Error::Input(format!("{}: manifest lists no sweeps", path.display())));
    }
    Ok(sweeps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn measure_round_trip() {
        let f = temp(r#"{"space":{"kind":"sphere","dim":2,"kappa":1.0},"atoms":[[0,0,1],[0,1,0]],"weights":[0.25,0.75]}"#);
        let mu = load_measure(f.path()).unwrap();
        assert_eq!(mu.len(), 2);
        let bad = temp(r#"{"space":{"kind":"sphere","dim":2,"kappa":1.0},"atoms":[[0,0,2]],"weights":[1]}"#);
        assert!(load_measure(bad.path()).is_err());
        let garbage = temp("{");
        assert!(matches!(load_measure(garbage.path()), Err(Error::Input(_))));
    }

    #[test]
    fn chains_must_be_reversible() {
        let ok = temp(r#"{"pi":[0.5,0.5],"a":[[0,1],[1,0]]}"#);
        assert!(load_chain(ok.path()).is_ok());
        let bad = temp(r#"{"pi":[0.5,0.5],"a":[[0,1],[0,1]]}"#);
        assert!(load_chain(bad.path()).is_err());
    }

    #[test]
    fn manifests() {
        let one = temp(r#"{"check":"variance","seed":7,"trials":10}"#);
        assert_eq!(load_manifest(one.path()).unwrap().len(), 1);
        let many = temp(r#"[{"check":"variance","seed":7},{"check":"phi","seed":8}]"#);
        assert_eq!(load_manifest(many.path()).unwrap().len(), 2);
        let empty = temp("[]");
        assert!(load_manifest(empty.path()).is_err());
        let unknown = temp(r#"{"check":"nonsense","seed":1}"#);
        assert!(load_manifest(unknown.path()).is_err());
    }
}
