mod common;

use std::time::Duration;

use common::{dead_url, read_fixture, serve_once};
use drawsight::config::Config;
use drawsight::llm::LlmClient;
use drawsight::pipeline::{pipeline_run, PipelineContext, PipelineInput};
use drawsight::record::{Stage, StageStatus};
use drawsight::store::{read_record_dir, write_record_dir, FileStore, MemoryStore, RecordStore, StoreError};
use drawsight_core::retrieval::{build_index, ChunkIndex, ChunkingConfig, CorpusDocument, HashingEmbedder, Strategy};
use drawsight_core::stroke_log::Canvas;

fn full_input() -> PipelineInput {
    PipelineInput {
        session_log: read_fixture("golden_session.json"),
        canvas: None,
        final_png: Some(read_fixture("golden_final.png")),
        annotations: Some(read_fixture("golden_annotations.json")),
        questionnaire: Some(read_fixture("golden_questionnaire.json")),
    }
}

fn corpus_index(embedder: &HashingEmbedder) -> ChunkIndex {
    let docs: Vec<_> = ["houses.md", "trees.md", "persons.md"]
        .iter()
        .map(|n| CorpusDocument {
            name: n.to_string(),
            text: String::from_utf8(read_fixture(&format!("corpus/{n}"))).unwrap(),
        })
        .collect();
    build_index(&docs, &ChunkingConfig::with_strategy(Strategy::Semantic), embedder, 0).unwrap()
}

fn status(record: &drawsight::record::SessionRecord, stage: Stage) -> &StageStatus {
    record.stage(stage).unwrap()
}

#[test]
fn full_fixture_populates_every_stage() {
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let index = corpus_index(&embedder);
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: Some(&index),
        llm: None,
    };
    let record = pipeline_run(full_input(), &ctx, 1).unwrap();
    let order: Vec<Stage> = record.stages.iter().map(|s| s.stage).collect();
    assert_eq!(order, Stage::ALL);
    for stage in &Stage::ALL[..11] {
        assert_eq!(status(&record, *stage), &StageStatus::Done, "{stage}");
    }
    assert!(matches!(status(&record, Stage::Llm), StageStatus::Skipped { .. }));
    assert_eq!(record.canvas, Canvas::new(800, 600).unwrap());
    assert_eq!(record.fidelity.unwrap().pixel_match_ratio, 1.0);
    assert_eq!(record.retrieved.as_ref().unwrap().len(), config.retrieval.top_k);
    let prompt = record.prompt.as_ref().unwrap();
    assert!(prompt.contains("[1] "));
    assert!(prompt.contains("Q1 Who do you imagine lives in this house?"));
    assert_eq!(record.features.session_id, record.session_id);
}

#[test]
fn session_only_skips_annotation_stages() {
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: None,
        llm: None,
    };
    let input = PipelineInput {
        session_log: read_fixture("golden_session.json"),
        canvas: Some(Canvas::new(800, 600).unwrap()),
        ..Default::default()
    };
    let record = pipeline_run(input, &ctx, 1).unwrap();
    for stage in [Stage::Parse, Stage::Kinematics, Stage::Spatial, Stage::Behavior] {
        assert_eq!(status(&record, stage), &StageStatus::Done);
    }
    for stage in [
        Stage::Annotations,
        Stage::Fidelity,
        Stage::Predicates,
        Stage::Indicators,
        Stage::Description,
        Stage::Retrieve,
        Stage::Prompt,
        Stage::Llm,
    ] {
        assert!(matches!(status(&record, stage), StageStatus::Skipped { .. }), "{stage}");
    }
    assert_eq!(record.features.stroke_count, 23);
    assert!(record.description.is_none() && record.prompt.is_none());
}

#[test]
fn corrupt_inputs_name_their_stage() {
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: None,
        llm: None,
    };
    let err = pipeline_run(
        PipelineInput {
            session_log: b"[{\"order\":1,".to_vec(),
            ..Default::default()
        },
        &ctx,
        0,
    )
    .unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Parse, "MalformedJson"));
    assert!(err.to_string().starts_with("MalformedJson at stage parse"));

    let mut bad_ann = full_input();
    bad_ann.annotations = Some(br#"{"objects":[{"label":"castle","box":[0,0,10,10]}]}"#.to_vec());
    let err = pipeline_run(bad_ann, &ctx, 0).unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Annotations, "UnknownLabel"));

    let mut bad_png = full_input();
    bad_png.final_png = Some(b"not a png".to_vec());
    assert_eq!(pipeline_run(bad_png, &ctx, 0).unwrap_err().kind, "ImageDecode");
}

#[test]
fn remote_annotations_are_used_without_a_file() {
    let (url, handle) = serve_once(200, read_fixture("golden_annotations.json"));
    let mut config = Config::default();
    config.inference.endpoint = Some(url);
    let embedder = HashingEmbedder::default();
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: None,
        llm: None,
    };
    let mut input = full_input();
    input.annotations = None;
    let record = pipeline_run(input, &ctx, 0).unwrap();
    assert_eq!(handle.join().unwrap(), read_fixture("golden_final.png"));
    assert_eq!(status(&record, Stage::Description), &StageStatus::Done);
    assert_eq!(record.annotations.unwrap().objects.len(), 3);
}

#[test]
fn llm_stage_is_opt_in() {
    let reply = r#"{"choices":[{"message":{"role":"assistant","content":"The door is present [2]."}}]}"#;
    let (url, handle) = serve_once(200, reply);
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let llm = LlmClient {
        endpoint: url,
        model: "m".into(),
        api_key: None,
        timeout: Duration::from_secs(5),
    };
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: None,
        llm: Some(&llm),
    };
    let record = pipeline_run(full_input(), &ctx, 0).unwrap();
    let sent: serde_json::Value = serde_json::from_slice(&handle.join().unwrap()).unwrap();
    assert_eq!(sent["messages"][0]["content"].as_str(), record.prompt.as_deref());
    assert_eq!(record.llm_response.as_deref(), Some("The door is present [2]."));

    let dead = LlmClient {
        endpoint: dead_url(),
        ..llm.clone()
    };
    let ctx = PipelineContext {
        llm: Some(&dead),
        ..ctx
    };
    let err = pipeline_run(full_input(), &ctx, 0).unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Llm, "Unreachable"));
    assert!(!err.is_client_error());
}

#[test]
fn stores_round_trip_records() {
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let index = corpus_index(&embedder);
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: Some(&index),
        llm: None,
    };
    let record = pipeline_run(full_input(), &ctx, 42).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path()).unwrap();
    store.put(&record).unwrap();
    let reopened = FileStore::open(dir.path()).unwrap();
    assert_eq!(reopened.get(&record.session_id).unwrap(), record);

    let mut later = record.clone();
    later.created_at = 99;
    assert_eq!(
        store.put(&later).unwrap().created_at,
        42,
        "stored records are immutable"
    );

    let with_reply = store.attach_llm_response(&record.session_id, "ok").unwrap();
    assert_eq!(reopened.get(&record.session_id).unwrap(), with_reply);
    assert!(matches!(
        store.attach_llm_response(&record.session_id, "again"),
        Err(StoreError::Immutable(_))
    ));
    assert!(matches!(store.get("0000"), Err(StoreError::NotFound(_))));
    assert!(matches!(store.get("../etc"), Err(StoreError::NotFound(_))));

    let memory = MemoryStore::default();
    memory.put(&record).unwrap();
    assert_eq!(memory.get(&record.session_id).unwrap(), record);

    let export = dir.path().join("export");
    write_record_dir(&record, &export).unwrap();
    assert_eq!(read_record_dir(&export).unwrap(), record);
}

#[test]
fn stored_objects_are_verified() {
    let config = Config::default();
    let embedder = HashingEmbedder::default();
    let ctx = PipelineContext {
        config: &config,
        embedder: &embedder,
        index: None,
        llm: None,
    };
    let record = pipeline_run(full_input(), &ctx, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path()).unwrap();
    store.put(&record).unwrap();
    let hash = &record.manifest().artifacts["features.json"];
    std::fs::write(dir.path().join("objects").join(hash), b"{}").unwrap();
    assert_eq!(store.get(&record.session_id).unwrap_err().kind(), "CorruptObject");
}
