//! Dataset download with checksum-based idempotence and schema validation.

use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

/// What schema to validate a downloaded file against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Cases,
    Climate,
    /// Accept whichever of the two schemas matches.
    Auto,
}

#[derive(Debug)]
pub struct FetchOutcome {
    pub sha256: String,
    /// False when the destination already held identical bytes.
    pub written: bool,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn validate_schema(bytes: &[u8], kind: FileKind) -> Result<(), CliError> {
    let as_cases = || lagcast::data::read_cases_csv(bytes, "downloaded").map(|_| ());
    let as_climate = || lagcast::data::read_climate_csv(bytes).map(|_| ());
    let result = match kind {
        FileKind::Cases => as_cases(),
        FileKind::Climate => as_climate(),
        FileKind::Auto => as_climate().or_else(|climate_err| as_cases().map_err(|_| climate_err)),
    };
    result.map_err(|e| CliError::Data(e.to_string()))
}

/// Downloads `url` into `dest`. The payload is schema-validated before
/// anything is written; a destination that already holds identical bytes is
/// left untouched. An optional expected checksum is verified when given.
pub fn fetch(
    url: &str,
    dest: &Path,
    kind: FileKind,
    expected_sha256: Option<&str>,
) -> Result<FetchOutcome, CliError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(std::time::Duration::from_secs(120)))
        .timeout_connect(Some(std::time::Duration::from_secs(10)))
        .build()
        .into();
    let mut response = agent
        .get(url)
        .call()
        .map_err(|e| CliError::Data(format!("network error fetching {url}: {e}")))?;
    let mut bytes = Vec::new();
    response
        .body_mut()
        .as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| CliError::Data(format!("network error reading {url}: {e}")))?;

    validate_schema(&bytes, kind)?;

    let digest = sha256_hex(&bytes);
    if let Some(expected) = expected_sha256 {
        if !expected.eq_ignore_ascii_case(&digest) {
            return Err(CliError::Data(format!(
                "checksum mismatch for {url}: expected {expected}, got {digest}"
            )));
        }
    }

    let unchanged = match std::fs::read(dest) {
        Ok(existing) => sha256_hex(&existing) == digest,
        Err(_) => false,
    };
    if !unchanged {
        if let Some(parent) = dest.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(dest, &bytes)?;
    }
    Ok(FetchOutcome {
        sha256: digest,
        written: !unchanged,
        bytes: bytes.len(),
    })
}
