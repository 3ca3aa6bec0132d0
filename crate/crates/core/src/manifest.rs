//! Stage manifests: the inputs hash, seed and parameters of a stage run, the
//! manifests it depended on, and the digest of every file it wrote. Later
//! stages load earlier manifests and refuse missing or mismatched ones.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{sha256_hex, write_atomic};

/// A file written by a stage, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// An upstream manifest and the digest it had when it was consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub stage: String,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub scenario: String,
    pub inputs_hash: String,
    /// Seed of the named generator (`ChaCha8`) used by the stage.
    pub seed: u64,
    pub generator: String,
    pub parameters: serde_json::Value,
    pub depends: Vec<Dependency>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn path(dir: &Path, stage: &str) -> PathBuf {
        dir.join(format!("{stage}.manifest.json"))
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest values serialize");
        s.push('\n');
        s.into_bytes()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&Manifest::path(dir, &self.stage), &self.to_bytes())
    }

    /// Reads the manifest of `stage`; `MissingDependency` if it was never written.
    pub fn read(dir: &Path, stage: &str) -> Result<(Manifest, String)> {
        let path = Manifest::path(dir, stage);
        let bytes = std::fs::read(&path).map_err(|_| Error::MissingDependency(format!("{stage} (expected {})", path.display())))?;
        let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::ManifestMismatch(format!("{}: {e}", path.display())))?;
        Ok((m, sha256_hex(&bytes)))
    }

    /// Reads the manifest of `stage` and checks that it was produced from the
    /// same inputs and that every listed output is still on disk unchanged.
    pub fn require(dir: &Path, stage: &str, inputs_hash: &str) -> Result<(Manifest, Dependency)> {
        let (m, digest) = Manifest::read(dir, stage)?;
        if m.inputs_hash != inputs_hash {
            return Err(Error::ManifestMismatch(format!(
                "stage {stage} was run with inputs {} but the current inputs are {inputs_hash}",
                short(&m.inputs_hash)
            )));
        }
        for out in &m.outputs {
            let bytes = std::fs::read(dir.join(&out.path)).map_err(|_| Error::MissingDependency(format!("{stage} output {}", out.path)))?;
            if sha256_hex(&bytes) != out.sha256 {
                return Err(Error::ManifestMismatch(format!("{stage} output {} changed since it was written", out.path)));
            }
        }
        let dep = Dependency { stage: stage.to_string(), manifest_sha256: digest };
        Ok((m, dep))
    }

    /// Digest recorded for the output named `path`.
    pub fn output_digest(&self, path: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.path == path).map(|o| o.sha256.as_str())
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("diffract-manifest-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    fn manifest(outputs: Vec<OutputFile>) -> Manifest {
        Manifest {
            stage: "classify".into(),
            scenario: "parabola".into(),
            inputs_hash: "abc".into(),
            seed: 7,
            generator: "ChaCha8".into(),
            parameters: serde_json::json!({ "grid": 5 }),
            depends: vec![],
            outputs,
        }
    }

    #[test]
    fn missing_stage_is_named() {
        let d = scratch("missing");
        match Manifest::require(&d, "trace", "abc") {
            Err(Error::MissingDependency(s)) => assert!(s.starts_with("trace")),
            other => panic!("{other:?}"),
        }
        std::fs::remove_dir_all(&d).unwrap();
    }

    #[test]
    fn inputs_and_outputs_are_checked() {
        let d = scratch("check");
        write_atomic(&d.join("a.csv"), b"x\n").unwrap();
        let m = manifest(vec![OutputFile { path: "a.csv".into(), sha256: sha256_hex(b"x\n") }]);
        m.write(&d).unwrap();
        let (back, dep) = Manifest::require(&d, "classify", "abc").unwrap();
        assert_eq!(back, m);
        assert_eq!(dep.stage, "classify");
        assert!(matches!(Manifest::require(&d, "classify", "other"), Err(Error::ManifestMismatch(_))));
        write_atomic(&d.join("a.csv"), b"y\n").unwrap();
        assert!(matches!(Manifest::require(&d, "classify", "abc"), Err(Error::ManifestMismatch(_))));
        std::fs::remove_dir_all(&d).unwrap();
    }
}
