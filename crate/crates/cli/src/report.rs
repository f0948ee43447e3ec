//! Run manifests and report output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Bytes of an input file together with their digest.
pub struct Input {
    pub bytes: Vec<u8>,
    pub digest: String,
}

/// Reads a whole input; `-` means standard input.
pub fn read_input(path: &Path) -> Result<Input, CliError> {
    let mut bytes = Vec::new();
    let outcome = if path == Path::new("-") {
        std::io::stdin().read_to_end(&mut bytes).map(|_| ())
    } else {
        fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes).map(|_| ()))
    };
    outcome.map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(Input {
        bytes,
        digest: format!("sha256:{digest}"),
    })
}

/// Writes to `path`, or standard output when absent.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Provenance header embedded in every JSON report. `duration_seconds` is
/// the only field that varies between identical runs and is kept last.
#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: &'static str,
    pub config: C,
    pub seed: Option<u64>,
    pub version: &'static str,
    /// Content digest per input role.
    pub inputs: BTreeMap<&'static str, String>,
    pub duration_seconds: f64,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    manifest: &'a Manifest<C>,
    result: &'a R,
}

pub struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn render<C: Serialize, R: Serialize>(manifest: &Manifest<C>, result: &R) -> Vec<u8> {
    let mut text = serde_json::to_vec_pretty(&Report { manifest, result })
        .expect("report types serialize infallibly");
    text.push(b'\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Empty {}

    #[test]
    fn duration_is_the_last_manifest_field() {
        let manifest = Manifest {
            command: "validate",
            config: Empty {},
            seed: Some(3),
            version: "0.0.0",
            inputs: BTreeMap::from([("data", "sha256:00".to_string())]),
            duration_seconds: 0.25,
        };
        let text = String::from_utf8(render(&manifest, &Empty {})).unwrap();
        let duration = text.find("\"duration_seconds\"").unwrap();
        let manifest_end = text.find("\"result\"").unwrap();
        for key in ["command", "config", "seed", "version", "inputs"] {
            assert!(text.find(&format!("\"{key}\"")).unwrap() < duration);
        }
        assert!(duration < manifest_end);
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn digest_is_sha256_of_the_bytes() {
        let dir = std::env::temp_dir().join(format!("tdp-risk-digest-{}", std::process::id()));
        fs::write(&dir, b"abc").unwrap();
        let input = read_input(&dir).unwrap();
        fs::remove_file(&dir).unwrap();
        assert_eq!(
            input.digest,
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
