//! Model files shipped with the binary.

use anyhow::{Context, Result};
use stoqmc_core::io::{parse_model, ModelFile};

/// `(name, JSON text)` for every embedded fixture.
pub const FIXTURES: &[(&str, &str)] = &[
    ("neg_x", include_str!("../fixtures/neg_x.json")),
    ("tim_n1", include_str!("../fixtures/tim_n1.json")),
    ("tim_n2", include_str!("../fixtures/tim_n2.json")),
    ("tim_n2_h0", include_str!("../fixtures/tim_n2_h0.json")),
    ("tim_n3", include_str!("../fixtures/tim_n3.json")),
    ("tim_n4", include_str!("../fixtures/tim_n4.json")),
];

pub fn text(name: &str) -> Result<&'static str> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .with_context(|| format!("unknown fixture {name:?}"))
}

/// Parses an embedded fixture; a corrupted file fails with its name attached.
pub fn load(name: &str) -> Result<ModelFile> {
    parse_named(name, text(name)?)
}

pub fn parse_named(name: &str, text: &str) -> Result<ModelFile> {
    parse_model(text).with_context(|| format!("fixture {name:?} is invalid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses() {
        for (name, _) in FIXTURES {
            load(name).unwrap();
        }
        assert!(load("missing").is_err());
    }

    #[test]
    fn corrupted_fixture_is_named() {
        let msg = format!("{:#}", parse_named("tim_n2", r#"{"n": 2, "fields": [1.0]}"#).unwrap_err());
        assert!(msg.contains("tim_n2") && msg.contains("fields"), "{msg}");
    }
}
