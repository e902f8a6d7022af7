//! The files under `configs/` are generated from code. Run with
//! `FUZZYTHERM_BLESS=1` to rewrite them after an intentional change.

use std::path::PathBuf;

use fuzzytherm::config::{from_json, ControllerDoc, MatrixDoc, RunConfigDoc, VocabularyDoc};
use fuzzytherm_core::{fltc, room};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

fn expected() -> Vec<(&'static str, String)> {
    vec![
        ("default-config.json", pretty(&RunConfigDoc::default())),
        ("fltc-controller.json", pretty(&ControllerDoc::fltc())),
        (
            "fltc-vocab.json",
            pretty(&VocabularyDoc::from_vocabulary(&fltc::vocabulary())),
        ),
        ("fltc-rules.frl", fltc::RULES.to_string()),
        (
            "room-vocab.json",
            pretty(&VocabularyDoc::from_vocabulary(&room::vocabulary())),
        ),
        ("room-rules.frl", room::TABLE_RULES.to_string()),
        (
            "room-matrix.json",
            pretty(&MatrixDoc::from(&room::matrix())),
        ),
    ]
}

#[test]
fn configs_match_generated() {
    let dir = configs_dir();
    let bless = std::env::var_os("FUZZYTHERM_BLESS").is_some();
    for (name, text) in expected() {
        let path = dir.join(name);
        if bless {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let on_disk =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            on_disk, text,
            "{name} is stale; rerun with FUZZYTHERM_BLESS=1"
        );
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = configs_dir();
    let run: RunConfigDoc =
        from_json(&std::fs::read_to_string(dir.join("default-config.json")).unwrap()).unwrap();
    run.build().unwrap();
    let ctl: ControllerDoc =
        from_json(&std::fs::read_to_string(dir.join("fltc-controller.json")).unwrap()).unwrap();
    assert_eq!(ctl.build("").unwrap(), fltc::controller());
    let vocab: VocabularyDoc =
        from_json(&std::fs::read_to_string(dir.join("room-vocab.json")).unwrap()).unwrap();
    let matrix: MatrixDoc =
        from_json(&std::fs::read_to_string(dir.join("room-matrix.json")).unwrap()).unwrap();
    let rb = fuzzytherm_core::RuleMatrix::from(matrix)
        .to_rules(&vocab.build("").unwrap())
        .unwrap();
    assert_eq!(rb.rules().len(), 25);
}
