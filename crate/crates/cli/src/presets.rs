//! Generator presets shipped in the repository's `presets/` directory.

use topolstm::datagen::SynthConfig;
use topolstm::{Error, Result};

pub const PRESETS: [(&str, &str); 2] = [
    (
        "chain-deterministic",
        include_str!("../../../presets/chain-deterministic.json"),
    ),
    (
        "desk-default",
        include_str!("../../../presets/desk-default.json"),
    ),
];

pub fn load(name: &str) -> Result<SynthConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::Argument(format!(
            "unknown preset `{name}` (available: {})",
            names.join(", ")
        ))
    })?;
    Ok(serde_json::from_str(text)?)
}
