//! Replays the checked-in fuzz corpus through the same round-trip checks the
//! fuzz targets make, so the seeds stay meaningful without a fuzzing toolchain.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ut_core::docs::{
    from_document, parse_controller, parse_ctl_spec, parse_plant, to_document, write_controller,
    DocError,
};
use ut_core::sim::{ScenarioSpec, Trace};
use ut_core::tuner::TuneConfig;
use ut_core::wire::{decode, encode, read_frame};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn name(p: &Path) -> &str {
    p.file_name().unwrap().to_str().unwrap()
}

#[test]
fn trace_csv_seeds() {
    for (p, s) in seeds("trace_csv") {
        match Trace::from_csv(&s) {
            Ok(t) => {
                let once = t.to_csv();
                assert_eq!(
                    once,
                    Trace::from_csv(&once).unwrap().to_csv(),
                    "{}",
                    p.display()
                );
            }
            Err(_) => assert!(name(&p).starts_with("bad"), "{} should parse", p.display()),
        }
    }
}

#[test]
fn controller_file_seeds() {
    for (p, s) in seeds("controller_file") {
        match parse_controller(&s) {
            Ok(tf) => assert_eq!(parse_controller(&write_controller(&tf)).unwrap(), tf),
            Err(e) => {
                assert!(name(&p).starts_with("zero"), "{}: {e}", p.display());
                assert!(matches!(e, DocError::Line { .. }));
            }
        }
    }
}

#[test]
fn ctl_spec_seeds() {
    for (p, s) in seeds("ctl_spec") {
        let l = parse_ctl_spec(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let built = l.spec.build(|_| Err(DocError::Invalid("no files".into())));
        assert_eq!(built.is_err(), name(&p) == "file", "{}", p.display());
    }
}

#[test]
fn wire_frame_seeds() {
    for (p, s) in seeds("wire_frame") {
        let mut r = BufReader::new(s.as_bytes());
        let mut frames = 0;
        while let Ok(Some(f)) = read_frame(&mut r) {
            assert_eq!(decode(&encode(&f)).unwrap(), f);
            frames += 1;
        }
        assert!(frames > 0, "{}", p.display());
    }
}

#[test]
fn document_seeds() {
    for (p, s) in seeds("documents") {
        let plant = parse_plant(&s).ok();
        let config = from_document::<TuneConfig>(&s).ok();
        let scenario = from_document::<ScenarioSpec>(&s).ok();
        if let Some(pl) = &plant {
            assert_eq!(parse_plant(&to_document(pl)).unwrap(), *pl);
        }
        if let Some(c) = &config {
            assert_eq!(from_document::<TuneConfig>(&to_document(c)).unwrap(), *c);
        }
        assert!(
            plant.is_some() || config.is_some() || scenario.is_some(),
            "{} parses as nothing",
            p.display()
        );
    }
}
