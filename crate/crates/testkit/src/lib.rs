//! Shared test support: fixture files, seeded random generators and
//! brute-force oracles that re-derive expected results without going through
//! the engine code they check.

pub mod build;
pub mod gen;
pub mod oracle;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every file under `fixtures/`.
pub const FIXTURES: &[&str] = &[
    "disease_outbreak.schema.json",
    "cholera.instance.json",
    "cholera.corpus.json",
    "empty.instance.json",
    "symptoms_only.instance.json",
    "cyclic.graph.json",
    "cholera.graph.json",
    "outbreak_predicted.graph.json",
    "outbreak_expanded.layout.json",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    let path = fixture_path(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parses a fixture of any kind and serializes it again.
pub fn recanonicalize(bytes: &[u8]) -> Result<Vec<u8>, String> {
    use ege_core::formats::*;
    let err = |d: ege_core::Diagnostics| format!("{d:?}");
    Ok(match sniff_kind(bytes) {
        Some(DocumentKind::Schema) => serialize_schema(&parse_schema(bytes).map_err(err)?),
        Some(DocumentKind::Instance) => serialize_instance(&parse_instance(bytes).map_err(err)?),
        Some(DocumentKind::Corpus) => serialize_corpus(&parse_corpus(bytes).map_err(err)?),
        Some(DocumentKind::Graph) => serialize_graph(&parse_graph(bytes).map_err(err)?),
        None => {
            let l: ege_core::layout::Layout =
                serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
            to_canonical(&l)
        }
    })
}
