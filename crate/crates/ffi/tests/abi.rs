use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qsfuse_ffi::*;

fn last_error() -> String {
    let p = qs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn unit_conversion_round_trip() {
    let mut lb = 0.0;
    assert_eq!(qs_to_pounds(80.0, QsUnit::Kg, &mut lb), QsStatus::Ok);
    assert!((qs_pounds_to_kg(lb) - 80.0).abs() < 1e-9);
    assert_eq!(qs_to_pounds(f64::NAN, QsUnit::Lb, &mut lb), QsStatus::ErrInvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(qs_to_pounds(1.0, QsUnit::Lb, ptr::null_mut()), QsStatus::ErrNull);
    assert!(last_error().contains("null"));
}

#[test]
fn parse_and_classify() {
    let text = CString::new("My weight: 82.5kg. via Withings").unwrap();
    let (mut v, mut u) = (0.0, QsUnit::Lb);
    assert_eq!(unsafe { qs_parse_weighin(text.as_ptr(), &mut v, &mut u) }, QsStatus::Ok);
    assert_eq!((v, u), (82.5, QsUnit::Kg));

    let none = CString::new("feeling great today").unwrap();
    assert_eq!(unsafe { qs_parse_weighin(none.as_ptr(), &mut v, &mut u) }, QsStatus::ErrNoMatch);

    let label = CString::new("WiTwit").unwrap();
    let mut class = QsSourceClass::Normal;
    assert_eq!(unsafe { qs_classify_source(label.as_ptr(), &mut class) }, QsStatus::Ok);
    assert_eq!(class, QsSourceClass::WeighIn);

    let mut hit = false;
    let raw = CString::new("down to 180 lb today").unwrap();
    assert_eq!(unsafe { qs_keyword_prefilter(raw.as_ptr(), &mut hit) }, QsStatus::Ok);
    assert!(hit);

    assert_eq!(unsafe { qs_classify_source(ptr::null(), &mut class) }, QsStatus::ErrNull);
}

#[test]
fn series_handle() {
    let id = CString::new("u").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(qs_series_new(id.as_ptr(), &mut s), QsStatus::Ok);
        // Alternating +-20 lb on consecutive days: four violations.
        for (d, w) in [(0, 150.0), (1, 170.0), (2, 150.0), (3, 170.0), (4, 150.0)] {
            assert_eq!(qs_series_push(s, d, w), QsStatus::Ok);
        }
        let mut n = 0;
        assert_eq!(qs_series_violations(s, &mut n), QsStatus::Ok);
        assert_eq!(n, 4);
        let mut reason = QsExclusion::None;
        assert_eq!(qs_series_exclusion(s, ptr::null(), &mut reason), QsStatus::Ok);
        assert_eq!(reason, QsExclusion::Violations);
        let loose = QsThresholds {
            max_violations: 10,
            ..qs_thresholds_default()
        };
        assert_eq!(qs_series_exclusion(s, &loose, &mut reason), QsStatus::Ok);
        assert_eq!(reason, QsExclusion::None);
        let mut w = 0.0;
        assert_eq!(qs_series_reference_weight(s, &mut w), QsStatus::ErrNoReference);
        qs_series_free(s);
        qs_series_free(ptr::null_mut());
    }
}

#[test]
fn metrics_undefined_r() {
    let t = [1.0, 2.0, 3.0];
    let p = [2.0, 2.0, 2.0];
    let mut m = QsMetrics::default();
    assert_eq!(unsafe { qs_metrics(t.as_ptr(), p.as_ptr(), 3, &mut m) }, QsStatus::Ok);
    assert!(!m.r_defined);
    assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(unsafe { qs_metrics(t.as_ptr(), p.as_ptr(), 0, &mut m) }, QsStatus::ErrInvalidArgument);
}

#[test]
fn svr_recovers_a_line() {
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(qs_svr_fit(x.as_ptr(), 40, 1, y.as_ptr(), 100.0, 0.01, &mut m), QsStatus::Ok);
        let mut out = vec![0.0; 40];
        assert_eq!(qs_model_predict(m, x.as_ptr(), 40, 1, out.as_mut_ptr()), QsStatus::Ok);
        for (p, t) in out.iter().zip(&y) {
            assert!((p - t).abs() < 0.05, "{p} vs {t}");
        }
        qs_model_free(m);
    }
}

#[test]
fn lexicon_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.dic");
    std::fs::write(&path, "%\n1\tfood\n2\tmood\n%\neat*\t1\nhappy\t2\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut lex = ptr::null_mut();
    unsafe {
        assert_eq!(qs_lexicon_load(p.as_ptr(), &mut lex), QsStatus::Ok);
        assert_eq!(qs_lexicon_category_count(lex), 2);
        let text = CString::new("eating makes me happy").unwrap();
        let mut out = [0.0; 2];
        let mut n = 0;
        assert_eq!(qs_lexicon_rates(lex, text.as_ptr(), out.as_mut_ptr(), 2, &mut n), QsStatus::Ok);
        assert_eq!(n, 2);
        assert_eq!(out, [0.25, 0.25]);
        assert_eq!(
            qs_lexicon_rates(lex, text.as_ptr(), out.as_mut_ptr(), 1, &mut n),
            QsStatus::ErrInvalidArgument
        );
        qs_lexicon_free(lex);
    }
    let missing = CString::new("/nonexistent/x.dic").unwrap();
    assert_eq!(unsafe { qs_lexicon_load(missing.as_ptr(), &mut lex) }, QsStatus::ErrIo);
}

#[test]
fn stage_dependencies() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let stage = CString::new("evaluate").unwrap();
    assert_eq!(unsafe { qs_run_stage(ptr::null(), out.as_ptr(), stage.as_ptr()) }, QsStatus::ErrMissingStage);
    assert!(last_error().contains("train outputs missing"));
    let bad = CString::new("nope").unwrap();
    assert_eq!(unsafe { qs_run_stage(ptr::null(), out.as_ptr(), bad.as_ptr()) }, QsStatus::ErrInvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qsfuse.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let mut n = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            n += 1;
        }
    }
    assert!(n >= 20, "only {n} exports found");
}

/// Compiles a small C program against the header and the static library.
/// Skipped when no C compiler or static library is available.
#[test]
fn c_smoke_program() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libqsfuse_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no cc or {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
