//! Generators and brute-force reference implementations used by the
//! property and acceptance suites. Nothing here calls into the code under
//! test except to build inputs.

pub mod gen;
pub mod oracle;

use std::path::PathBuf;

/// The repository's `fixtures/` directory.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(path: &str) -> PathBuf {
    fixtures_dir().join(path)
}
