use histoscope_core::config::PipelineConfig;
use histoscope_core::corpus::Corpus;
use histoscope_core::fixtures::medical_corpus;
use histoscope_core::pipeline::{analyze, Providers};
use histoscope_core::query::create_user_histogram;
use histoscope_core::store::{load_artifact, save_artifact, AnalysisArtifact, StoreError};

fn artifact() -> (Corpus, AnalysisArtifact) {
    let corpus = medical_corpus();
    let (a, _) = analyze(&corpus, &PipelineConfig::default(), &Providers::stub()).unwrap();
    (corpus, a)
}

#[test]
fn save_load_round_trip() {
    let (corpus, mut a) = artifact();
    let hiv = a.entities.find_str("hiv").unwrap().id;
    a.user_histograms
        .push(create_user_histogram("sexually transmitted diseases", &[hiv], &a.entities, &corpus, 1).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    save_artifact(&a, &path).unwrap();
    let back = load_artifact(&path).unwrap();
    assert_eq!(back, a);
    back.validate_against_corpus(&corpus).unwrap();
}

#[test]
fn saves_are_byte_identical() {
    let (_, a) = artifact();
    let (_, b) = artifact();
    let dir = tempfile::tempdir().unwrap();
    save_artifact(&a, dir.path().join("a.json")).unwrap();
    save_artifact(&b, dir.path().join("b.json")).unwrap();
    let first = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("b.json")).unwrap());
    // load → save is also stable
    let reloaded = load_artifact(dir.path().join("a.json")).unwrap();
    save_artifact(&reloaded, dir.path().join("c.json")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn top_level_keys() {
    let (_, a) = artifact();
    let v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "auto_histograms",
            "config",
            "corpus_digest",
            "embeddings",
            "entities",
            "run_report",
            "schema_version",
            "user_histograms"
        ]
    );
    assert_eq!(v["schema_version"], 1);
    assert!(v["embeddings"]["vectors"].as_object().unwrap().len() >= a.entities.len());
}

#[test]
fn unwritable_path() {
    let (_, a) = artifact();
    let err = save_artifact(&a, "/nonexistent-dir/sub/a.json").unwrap_err();
    assert!(matches!(err, StoreError::Write { .. }));
}

#[test]
fn schema_version_mismatch() {
    let (_, a) = artifact();
    let json = a.to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 999");
    let err = AnalysisArtifact::from_json(&json).unwrap_err();
    assert!(matches!(err, StoreError::SchemaVersion { found: 999, .. }), "{err}");
    assert!(err.to_string().contains("999"));
}

#[test]
fn bad_bucket_count_names_bucket() {
    let (_, a) = artifact();
    let mut v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
    let bucket = &mut v["auto_histograms"][0]["buckets"][0];
    let surface = bucket["surface"][0].as_str().unwrap().to_string();
    let count = bucket["count"].as_u64().unwrap();
    bucket["count"] = (count + 1).into();
    v["auto_histograms"][0]["total_count"] =
        (v["auto_histograms"][0]["total_count"].as_u64().unwrap() + 1).into();
    let err = AnalysisArtifact::from_json(&v.to_string()).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, StoreError::Invariant(_)));
    assert!(msg.contains(&format!("{surface:?}")), "{msg}");
    assert!(msg.contains("postings"), "{msg}");
}

#[test]
fn corrupt_json() {
    assert!(matches!(AnalysisArtifact::from_json("{not json"), Err(StoreError::Json(_))));
    assert!(matches!(AnalysisArtifact::from_json("{}"), Err(StoreError::Invariant(_))));
}

#[test]
fn digest_checks() {
    let (corpus, a) = artifact();
    a.validate_against_corpus(&corpus).unwrap();

    let mut texts: Vec<String> = corpus.examples().iter().map(|e| e.text.clone()).collect();
    texts[3].push('!');
    let edited = Corpus::from_texts("edited", texts.clone()).unwrap();
    let err = a.validate_against_corpus(&edited).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains(&a.corpus_digest) && msg.contains(edited.source_digest().as_str()), "{msg}");
    assert!(msg.contains("re-run"));

    texts[3].pop();
    texts.swap(0, 1);
    let reordered = Corpus::from_texts("reordered", texts).unwrap();
    assert!(matches!(a.validate_against_corpus(&reordered), Err(StoreError::DigestMismatch { .. })));
}
