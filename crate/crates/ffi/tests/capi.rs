use std::ffi::{c_char, CStr, CString};
use std::ptr;

use selfteach::scorer::encode::encode_mc_parts;
use selfteach::scorer::{forward_mc, Checkpoint, Lineage, ScorerParams, Task, Vocabulary};
use selfteach_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = st_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn write_checkpoint(dir: &std::path::Path, task: Task) -> (std::path::PathBuf, Checkpoint) {
    let vocab = Vocabulary::build(["问题甲乙丙丁上下文"]);
    let ckpt = Checkpoint {
        params: ScorerParams::init(task, vocab.len(), 8, 7),
        vocab,
        max_len: 64,
        lineage: Lineage {
            stage: "teacher".into(),
            ..Lineage::default()
        },
    };
    let path = dir.join("s.ckpt");
    ckpt.save(&path).unwrap();
    (path, ckpt)
}

#[test]
fn predict_matches_the_core_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let (path, ckpt) = write_checkpoint(dir.path(), Task::MultipleChoice);
    let path = c(path.to_str().unwrap());

    let mut h: *mut StScorer = ptr::null_mut();
    assert_eq!(unsafe { st_scorer_load(path.as_ptr(), &mut h) }, StStatus::Ok);
    assert!(!h.is_null());

    let opts = ["甲乙", "丙丁", "上下"];
    let c_opts: Vec<CString> = opts.iter().map(|o| c(o)).collect();
    let ptrs: Vec<*const c_char> = c_opts.iter().map(|o| o.as_ptr()).collect();
    let (q, ctx) = (c("问题"), c("上下文甲乙"));
    let mut probs = [0.0f64; 3];
    let st = unsafe { st_scorer_predict_mc(h, q.as_ptr(), ptrs.as_ptr(), 3, ctx.as_ptr(), probs.as_mut_ptr(), 3) };
    assert_eq!(st, StStatus::Ok);

    let owned: Vec<String> = opts.iter().map(|s| s.to_string()).collect();
    let enc = encode_mc_parts("问题", &owned, "上下文甲乙", &ckpt.vocab, ckpt.max_len);
    let expected = forward_mc(&ckpt.params, &enc).unwrap().probs;
    assert_eq!(probs.to_vec(), expected);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut small = [0.0f64; 2];
    let st = unsafe { st_scorer_predict_mc(h, q.as_ptr(), ptrs.as_ptr(), 3, ctx.as_ptr(), small.as_mut_ptr(), 2) };
    assert_eq!(st, StStatus::BufferTooSmall);
    assert!(last_error().contains("out_len"));

    unsafe { st_scorer_free(h) };
}

#[test]
fn load_failures_report_codes_and_messages() {
    let dir = tempfile::tempdir().unwrap();
    let missing = c(dir.path().join("nope.ckpt").to_str().unwrap());
    let mut h: *mut StScorer = ptr::null_mut();
    assert_eq!(unsafe { st_scorer_load(missing.as_ptr(), &mut h) }, StStatus::Io);
    assert!(last_error().contains("nope.ckpt"));
    assert!(h.is_null());

    let (span, _) = write_checkpoint(dir.path(), Task::Extractive);
    let span = c(span.to_str().unwrap());
    assert_eq!(unsafe { st_scorer_load(span.as_ptr(), &mut h) }, StStatus::Shape);

    assert_eq!(unsafe { st_scorer_load(ptr::null(), &mut h) }, StStatus::NullPointer);
    unsafe { st_scorer_free(ptr::null_mut()) };
}

#[test]
fn metrics_through_the_c_abi() {
    let mut f1 = 0.0;
    let (p, g) = (c("北京大学"), c("北京"));
    assert_eq!(unsafe { st_char_f1(p.as_ptr(), g.as_ptr(), &mut f1) }, StStatus::Ok);
    assert_eq!(f1, 2.0 / 3.0);

    let mut em = 9u8;
    let (p, g) = (c("北 京"), c("北京"));
    assert_eq!(unsafe { st_exact_match(p.as_ptr(), g.as_ptr(), &mut em) }, StStatus::Ok);
    assert_eq!(em, 1);

    let bad = [0xffu8, 0];
    let st = unsafe { st_exact_match(bad.as_ptr() as *const c_char, g.as_ptr(), &mut em) };
    assert_eq!(st, StStatus::InvalidUtf8);
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/selfteach.h")).unwrap();
    for name in [
        "st_scorer_load",
        "st_scorer_predict_mc",
        "st_scorer_free",
        "st_last_error_message",
        "st_char_f1",
        "st_exact_match",
        "StStatus_BufferTooSmall",
        "typedef struct StScorer StScorer",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
