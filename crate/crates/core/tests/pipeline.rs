use std::path::Path;

use selfteach::error::Error;
use selfteach::pipeline::{ExpertTeacher, Mode, PipelineManifest, Run};
use selfteach::scorer::checkpoint::digest;

fn manifest(name: &str) -> PipelineManifest {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let mut m = PipelineManifest::load(&path).unwrap();
    m.resolve_paths(path.parent().unwrap());
    m
}

fn bytes(root: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(root.join(rel)).unwrap()
}

#[test]
fn resume_after_teacher_reuses_it_bitwise_and_matches_a_straight_run() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));

    Run::open(&a, manifest("tiny_mc.json")).unwrap().run_all().unwrap();

    {
        let run = Run::open(&b, manifest("tiny_mc.json")).unwrap();
        run.train_teacher(1).unwrap();
    }
    let teacher = bytes(&b, "checkpoints/seed1/teacher.ckpt");
    let record = bytes(&b, "stages/seed1/teacher.json");

    let run = Run::open(&b, manifest("tiny_mc.json")).unwrap();
    let err = run.train_student(1).unwrap_err();
    assert!(
        err.to_string().contains("student") && err.to_string().contains("teacher__v"),
        "{err}"
    );
    run.teacher_soft_labels(1).unwrap();
    let student = run.train_student(1).unwrap();
    assert_eq!(bytes(&b, "checkpoints/seed1/teacher.ckpt"), teacher);
    assert_eq!(bytes(&b, "stages/seed1/teacher.json"), record);
    assert_eq!(student.lineage.parent, None);
    assert!(student.lineage.soft_files.len() == 2);
    run.run_all().unwrap();
    drop(run);

    for rel in [
        "checkpoints/seed1/teacher.ckpt",
        "checkpoints/seed1/student.ckpt",
        "checkpoints/seed1/expert.ckpt",
        "checkpoints/seed2/expert.ckpt",
        "metrics.jsonl",
        "report.json",
    ] {
        assert_eq!(bytes(&a, rel), bytes(&b, rel), "{rel}");
    }
}

#[test]
fn five_seeds_give_five_experts_and_an_aggregated_report() {
    let d = tempfile::tempdir().unwrap();
    let mut m = manifest("tiny_mc.json");
    m.seeds = vec![1, 2, 3, 4, 5];
    m.epochs.expert = Some(1);
    let run = Run::open(d.path(), m).unwrap();
    let report = run.run_all().unwrap();
    for seed in 1..=5 {
        assert!(d.path().join(format!("checkpoints/seed{seed}/expert.ckpt")).exists());
    }
    let e = report.entry("expert", "train", "loss").unwrap();
    assert_eq!(e.seeds, vec![1, 2, 3, 4, 5]);
    assert_eq!(e.values.len(), 5);
    let mean = e.values.iter().sum::<f64>() / 5.0;
    assert!((e.mean - mean).abs() < 1e-12);
}

#[test]
fn expert_lineage_points_at_the_student() {
    let d = tempfile::tempdir().unwrap();
    let mut m = manifest("tiny_mc.json");
    m.seeds = vec![1];
    let run = Run::open(d.path(), m).unwrap();
    run.run_all().unwrap();
    let (_, student_id) = run.checkpoint(1, "student").unwrap();
    let (expert, _) = run.checkpoint(1, "expert").unwrap();
    assert_eq!(expert.lineage.parent.as_deref(), Some(student_id.as_str()));
    assert_eq!(student_id, digest(&bytes(d.path(), "checkpoints/seed1/student.ckpt")));
}

#[test]
fn a_failing_stage_is_named_and_earlier_stages_persist() {
    let d = tempfile::tempdir().unwrap();
    let mut m = manifest("tiny_mc.json");
    m.seeds = vec![1];
    let run = Run::open(d.path(), m).unwrap();
    run.train_teacher(1).unwrap();
    // a directory where the student checkpoint must go makes saving fail
    std::fs::create_dir_all(d.path().join("checkpoints/seed1/student.ckpt/x")).unwrap();
    let err = run.run_all().unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(stage, "student"),
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("student"));
    assert_eq!(err.exit_code(), 2);
    assert!(run.completed(1, "teacher").unwrap().is_some());
    assert!(run.completed(1, "student").unwrap().is_none());
}

#[test]
fn a_run_directory_is_locked_while_open() {
    let d = tempfile::tempdir().unwrap();
    let run = Run::open(d.path(), manifest("tiny_mc.json")).unwrap();
    assert!(Run::open(d.path(), manifest("tiny_mc.json")).is_err());
    drop(run);
    assert!(Run::open(d.path(), manifest("tiny_mc.json")).is_ok());
}

#[test]
fn alternative_modes_run_to_completion() {
    let d = tempfile::tempdir().unwrap();

    let mut mt = manifest("tiny_mc.json");
    mt.seeds = vec![1];
    mt.mode = Mode::MultiTeacher { n_splits: 2 };
    let run = Run::open(&d.path().join("mt"), mt).unwrap();
    run.run_all().unwrap();
    assert!(run.completed(1, "teacher_1").unwrap().is_some());
    assert!(run.completed(1, "teacher_2").unwrap().is_some());
    // pooled soft labels from both teachers over V∪W
    let student = run.completed(1, "student").unwrap().unwrap();
    assert_eq!(student.train_size, 2 * 4 + 6);
    drop(run);

    let mut extra = manifest("tiny_mc.json");
    extra.seeds = vec![1];
    extra.extra_expert_round = true;
    extra.expert_teacher = ExpertTeacher::Teacher;
    let run = Run::open(&d.path().join("extra"), extra).unwrap();
    run.run_all().unwrap();
    let (_, expert_id) = run.checkpoint(1, "expert").unwrap();
    let second = run.completed(1, "expert_round2").unwrap().unwrap();
    assert!(second.lineage.soft_files.iter().any(|f| !f.is_empty()));
    assert_ne!(second.checkpoint_id, expert_id);
}

#[test]
fn extractive_soft_labels_can_be_sparse() {
    let d = tempfile::tempdir().unwrap();
    let run = Run::open(d.path(), manifest("tiny_span.json")).unwrap();
    run.run_all().unwrap();
    let text = std::fs::read_to_string(d.path().join("softlabels/seed1/teacher__w.jsonl")).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for side in ["start", "end"] {
            let pairs = v["span"][side].as_array().unwrap();
            assert!(!pairs.is_empty() && pairs.len() <= 4, "{line}");
            assert!(
                pairs.iter().all(|p| p.as_array().is_some_and(|p| p.len() == 2)),
                "{line}"
            );
            let total: f64 = pairs.iter().map(|p| p[1].as_f64().unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{line}");
        }
    }
}
