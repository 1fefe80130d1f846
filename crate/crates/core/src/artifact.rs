//! Provenance header stamped onto every emitted artifact.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactHeader {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    meta: &'a ArtifactHeader,
}

impl ArtifactHeader {
    pub fn new(config_hash: &str) -> ArtifactHeader {
        ArtifactHeader {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_hash: config_hash.to_string(),
        }
    }

    /// `# vaxstance 0.1.0 config=<hash>`, for delimited and text files.
    pub fn comment_line(&self) -> String {
        format!("# {} {} config={}", self.tool, self.version, self.config_hash)
    }

    /// `{"meta":{...}}`, first line of line-delimited JSON files.
    pub fn json_line(&self) -> String {
        serde_json::to_string(&HeaderLine { meta: self }).expect("header serializes")
    }

    pub fn is_json_header(line: &str) -> bool {
        line.trim_start().starts_with("{\"meta\":")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
