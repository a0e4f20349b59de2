//! Golden transcripts: every scenario's transcript at the reference seed is
//! pinned byte-for-byte. Regenerate with `UPDATE_GOLDEN=1 cargo test -p
//! mudmarket-core --test golden_transcripts` after an intentional format
//! change and review the diff.

use std::fs;
use std::path::PathBuf;

use mudmarket_core::scenario::{run_scenario, ScenarioId};

const SEED: u64 = 7;

fn golden_path(id: ScenarioId) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{}_seed{SEED}.txt", id.label().to_lowercase()))
}

#[test]
fn transcripts_match_goldens() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    if update {
        fs::create_dir_all(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")).unwrap();
    }
    for id in ScenarioId::ALL {
        let report = run_scenario(id, SEED).unwrap();
        let path = golden_path(id);
        if update {
            fs::write(&path, &report.transcript).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
        assert_eq!(
            report.transcript, expected,
            "transcript drift for {id}; UPDATE_GOLDEN=1 regenerates"
        );
    }
}
