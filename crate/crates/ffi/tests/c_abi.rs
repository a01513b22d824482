use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use refsel::corpus::{serialize_split, synthesize_corpus, SynthConfig};
use refsel::models::{save_model, ModelConfig, Vocabulary};
use refsel::training::{evaluate, predict, train, TrainConfig};
use refsel_ffi::*;

fn last_error() -> String {
    let p = refsel_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(refsel_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn split_round_trip_and_errors() {
    let synth = synthesize_corpus(
        &SynthConfig {
            documents: 20,
            ..SynthConfig::default()
        },
        3,
    )
    .unwrap();
    let text = cstr(&serialize_split(&synth.corpus.train));
    let mut split = ptr::null_mut();
    unsafe {
        assert_eq!(refsel_split_parse(text.as_ptr(), &mut split), RefselStatus::Ok);
        assert_eq!(refsel_split_document_count(split), synth.corpus.train.documents.len());
        assert_eq!(refsel_split_mention_count(split), synth.corpus.train.mention_count());
        refsel_split_free(split);
        refsel_split_free(ptr::null_mut());
        assert_eq!(refsel_split_document_count(ptr::null()), 0);

        let bad = cstr("{\"doc_id\":\"a\",\"tokens\":[],\"mentions\":[]}\n{oops\n");
        let mut split = ptr::null_mut();
        assert_eq!(refsel_split_parse(bad.as_ptr(), &mut split), RefselStatus::Validation);
        assert!(split.is_null());
        assert!(last_error().contains("line 2"));

        assert_eq!(refsel_split_parse(ptr::null(), &mut split), RefselStatus::NullArgument);
        assert_eq!(
            refsel_split_parse(text.as_ptr(), ptr::null_mut()),
            RefselStatus::NullArgument
        );
        let missing = cstr("/nonexistent/refsel.jsonl");
        assert_eq!(refsel_split_load(missing.as_ptr(), &mut split), RefselStatus::Io);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            refsel_split_parse(invalid.as_ptr().cast(), &mut split),
            RefselStatus::InvalidUtf8
        );
    }
}

#[test]
fn model_predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let synth = synthesize_corpus(
        &SynthConfig {
            documents: 40,
            ..SynthConfig::default()
        },
        4,
    )
    .unwrap();
    let vocab = Vocabulary::fit(&synth.corpus.train).unwrap();
    let config = TrainConfig {
        model: ModelConfig {
            embed_dim: 8,
            hidden: 8,
            attn_dim: 8,
            repr_dim: 8,
            ..ModelConfig::default()
        },
        epochs: 2,
        ..TrainConfig::default()
    };
    let out = train(&config, 5, &synth.corpus, &vocab).unwrap();
    save_model(&out.model, dir.path().join("model")).unwrap();
    let test_path = dir.path().join("test.jsonl");
    std::fs::write(&test_path, serialize_split(&synth.corpus.test)).unwrap();
    let want = predict(&out.model, &synth.corpus.test).unwrap();
    let metrics = evaluate(&out.model, &synth.corpus.test).unwrap();

    unsafe {
        let (mut model, mut split) = (ptr::null_mut(), ptr::null_mut());
        let model_dir = cstr(dir.path().join("model").to_str().unwrap());
        assert_eq!(refsel_model_load(model_dir.as_ptr(), &mut model), RefselStatus::Ok);
        let test = cstr(test_path.to_str().unwrap());
        assert_eq!(refsel_split_load(test.as_ptr(), &mut split), RefselStatus::Ok);
        assert_eq!(refsel_model_class_count(model), out.model.scheme().num_classes());

        let mut written = 0;
        let mut small = vec![0u32; 1];
        let status = refsel_model_predict(model, split, small.as_mut_ptr(), small.len(), &mut written);
        assert_eq!(status, RefselStatus::BufferTooSmall);
        assert_eq!(written, want.len());

        let mut labels = vec![u32::MAX; written];
        let status = refsel_model_predict(model, split, labels.as_mut_ptr(), labels.len(), &mut written);
        assert_eq!(status, RefselStatus::Ok);
        assert_eq!(labels, want.iter().map(|&l| l as u32).collect::<Vec<_>>());

        let (mut f1, mut acc) = (0.0, 0.0);
        assert_eq!(refsel_model_evaluate(model, split, &mut f1, &mut acc), RefselStatus::Ok);
        assert_eq!((f1, acc), (metrics.macro_f1, metrics.accuracy));

        refsel_model_free(model);
        refsel_split_free(split);

        let nowhere = cstr("/nonexistent/model");
        let mut model = ptr::null_mut();
        assert_ne!(refsel_model_load(nowhere.as_ptr(), &mut model), RefselStatus::Ok);
        assert!(model.is_null());
    }
}

#[test]
fn gradcheck_reports_worst_error() {
    let mut worst = f64::NAN;
    unsafe {
        assert_eq!(refsel_gradcheck(1, 1e-4, &mut worst), RefselStatus::Ok);
        assert!(worst < 1e-4);
        assert_eq!(refsel_gradcheck(1, 1e-30, &mut worst), RefselStatus::Numerical);
        assert!(last_error().contains("relative error"));
        assert_eq!(refsel_gradcheck(1, 1e-4, ptr::null_mut()), RefselStatus::NullArgument);
    }
}

#[test]
fn cli_entry_point_returns_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn");
    let args = [
        "refsel",
        "corpus",
        "synth",
        "--synth.documents",
        "10",
        "--out",
        out.to_str().unwrap(),
    ];
    let owned: Vec<CString> = args.iter().map(|a| cstr(a)).collect();
    let argv: Vec<*const std::ffi::c_char> = owned.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { refsel_cli_run(argv.len() as i32, argv.as_ptr()) }, 0);
    assert!(out.join("manifest.json").exists());

    let bad: Vec<CString> = ["refsel", "frobnicate"].iter().map(|a| cstr(a)).collect();
    let argv: Vec<*const std::ffi::c_char> = bad.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { refsel_cli_run(argv.len() as i32, argv.as_ptr()) }, 1);
    assert_eq!(unsafe { refsel_cli_run(0, ptr::null()) }, 1);
}

/// The generated header compiles as C and as C++.
#[test]
fn header_compiles() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("use.c");
    std::fs::write(
        &source,
        "#include \"refsel.h\"\nint main(void) { RefselSplit *s = 0; return refsel_split_parse(\"\", &s) == REFSEL_STATUS_OK; }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let status = Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&source)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected refsel.h"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}
