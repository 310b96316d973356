//! One test per acceptance criterion. Each prints a `[PASS]`/`[FAIL]` line
//! straight to stdout (visible without `--nocapture`) and then asserts.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use axum::http::StatusCode;
use common::*;
use histoscope_core::clustering::{agglomerate, pairwise_distances, DistanceMatrix, DEFAULT_CUTOFFS};
use histoscope_core::config::PipelineConfig;
use histoscope_core::corpus::Corpus;
use histoscope_core::embedding::stub_embedding;
use histoscope_core::extraction::{extract_entities, tokenize, RuleTagger, DEFAULT_K_CAP};
use histoscope_core::fixtures::{medical_corpus, synthetic_noun_corpus, MEDICAL_500_JSONL, NESTED_ENTITIES};
use histoscope_core::histogram::{sort_histograms, Bucket, Histogram, HistogramSource, SortKey};
use histoscope_core::labeling::StubGenerator;
use histoscope_core::pipeline::{analyze, Providers};
use histoscope_core::query::{create_user_histogram, generate_candidate_entities, suggest_dataset_entities};
use histoscope_oracles::{document_count, exhaustive_ranking, naive_average_linkage, normalized_mean, top_k_frequencies};

fn finish(n: u32, title: &str, limit: Duration, started: Instant, outcome: Result<String, String>) {
    let elapsed = started.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed < limit => (true, d),
        Ok(d) => (false, format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
        Err(e) => (false, e),
    };
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stdout(), "[{tag}] {n}. {title}: {detail} ({elapsed:.2?})");
    assert!(ok, "criterion {n} failed: {detail}");
}

fn check(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn fixture_docs(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .examples()
        .iter()
        .map(|e| tokenize(&e.text).into_iter().map(|t| t.surface).collect())
        .collect()
}

#[test]
fn criterion_1_top_k_cap() {
    let started = Instant::now();
    let outcome = (|| {
        check(DEFAULT_K_CAP == 2000, || format!("default cap is {DEFAULT_K_CAP}"))?;
        let corpus = synthetic_noun_corpus(3000, 42);
        let table = extract_entities(&corpus, DEFAULT_K_CAP, &RuleTagger::default()).map_err(|e| e.to_string())?;
        check(table.len() == 2000, || format!("{} rows", table.len()))?;
        let docs: Vec<Vec<String>> = corpus
            .examples()
            .iter()
            .map(|e| e.text.split_whitespace().map(str::to_string).collect())
            .collect();
        let want = top_k_frequencies(&docs, 2000);
        let got: Vec<(String, u64)> = table.entities().iter().map(|e| (e.display(), e.frequency)).collect();
        check(got == want, || "table differs from brute-force top-k".into())?;
        Ok("3000 distinct nouns -> 2000 rows, equal to brute force".to_string())
    })();
    finish(1, "top-k constant", Duration::from_secs(5), started, outcome);
}

#[test]
fn criterion_2_counting_oracle() {
    let started = Instant::now();
    let outcome = (|| {
        let corpus = medical_corpus();
        let providers = Providers::stub();
        let (artifact, _) = analyze(&corpus, &PipelineConfig::default(), &providers).map_err(|e| e.to_string())?;
        let candidates = generate_candidate_entities("sexually transmitted diseases", providers.generator.as_ref())
            .map_err(|e| e.to_string())?;
        let suggestions = suggest_dataset_entities(&candidates, &artifact.entities, &providers.embedder, 30, 0.35)
            .map_err(|e| e.to_string())?;
        let ids: Vec<u32> = suggestions.iter().map(|s| s.entity_id).collect();
        let user = create_user_histogram("sexually transmitted diseases", &ids, &artifact.entities, &corpus, 1)
            .map_err(|e| e.to_string())?;

        let docs = fixture_docs(&corpus);
        let mut buckets = 0;
        for h in artifact.auto_histograms.iter().chain(std::iter::once(&user)) {
            for b in &h.buckets {
                let want = document_count(&docs, &b.surface);
                check(b.count == want, || format!("{:?} in {:?}: {} != {want}", b.surface, h.label, b.count))?;
                buckets += 1;
            }
        }
        check(artifact.auto_histograms.len() >= 5, || "too few AUTO histograms".into())?;
        Ok(format!(
            "{buckets} buckets over {} AUTO + 1 USER histograms",
            artifact.auto_histograms.len()
        ))
    })();
    finish(2, "counting oracle", Duration::from_secs(10), started, outcome);
}

#[test]
fn criterion_3_clustering_oracle() {
    let started = Instant::now();
    let outcome = (|| {
        let mut matrices: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=10 {
            for _ in 0..20 {
                let mut d = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = f64::from(rand::Rng::gen_range(&mut rng, 1u32..=128)) / 64.0;
                        d[i][j] = v;
                        d[j][i] = v;
                    }
                }
                matrices.push(d);
            }
        }
        let vectors: Vec<_> = NESTED_ENTITIES.iter().map(|w| stub_embedding(w, 64)).collect();
        let m = pairwise_distances(&vectors).map_err(|e| e.to_string())?;
        matrices.push((0..m.len()).map(|i| (0..m.len()).map(|j| m.get(i, j)).collect()).collect());

        for rows in &matrices {
            let dm = DistanceMatrix::from_rows(rows).map_err(|e| e.to_string())?;
            for cutoff in DEFAULT_CUTOFFS {
                let mut got: Vec<Vec<u32>> = agglomerate(&dm, cutoff)
                    .map_err(|e| e.to_string())?
                    .into_iter()
                    .map(|c| c.entity_ids)
                    .collect();
                got.sort();
                let want = naive_average_linkage(rows, cutoff);
                check(got == want, || format!("n={} cutoff {cutoff}: {got:?} != {want:?}", rows.len()))?;
            }
        }
        Ok(format!("{} matrices (n <= 10) x {} cutoffs", matrices.len(), DEFAULT_CUTOFFS.len()))
    })();
    finish(3, "clustering oracle", Duration::from_secs(1), started, outcome);
}

#[test]
fn criterion_4_multi_membership() {
    let started = Instant::now();
    let outcome = (|| {
        let corpus = Corpus::from_texts("nested", NESTED_ENTITIES.iter().map(|w| format!("ask about {w}")))
            .map_err(|e| e.to_string())?;
        let (a, _) = analyze(&corpus, &PipelineConfig::default(), &Providers::stub()).map_err(|e| e.to_string())?;
        let mut memberships: HashMap<u32, Vec<&Histogram>> = HashMap::new();
        for h in &a.auto_histograms {
            for b in &h.buckets {
                memberships.entry(b.entity_id).or_default().push(h);
            }
        }
        let (id, hs) = memberships
            .iter()
            .filter(|(_, v)| v.len() >= 2)
            .min_by_key(|(id, _)| **id)
            .ok_or_else(|| format!("no shared entity among {} histograms", a.auto_histograms.len()))?;
        let distinct: std::collections::HashSet<&str> = hs.iter().map(|h| h.id.as_str()).collect();
        check(distinct.len() == hs.len(), || "duplicate histogram ids".into())?;
        let surface = a.entities.get(*id).map(|e| e.display()).unwrap_or_default();
        let shown: Vec<String> = hs.iter().map(|h| format!("{} {:?} {} buckets", h.id, h.label, h.buckets.len())).collect();
        Ok(format!("{surface:?} is in {} histograms [{}]", hs.len(), shown.join(", ")))
    })();
    finish(4, "multi-membership", Duration::from_secs(1), started, outcome);
}

#[test]
fn criterion_5_suggestion_oracle() {
    let started = Instant::now();
    let outcome = (|| {
        let corpus = medical_corpus();
        let providers = Providers::stub();
        let (artifact, _) = analyze(&corpus, &PipelineConfig::default(), &providers).map_err(|e| e.to_string())?;
        let f64s = |text: &str| -> Result<Vec<f64>, String> {
            let v = providers.embedder.embed_text(text).map_err(|e| e.to_string())?;
            Ok(v.components().iter().map(|&x| f64::from(x)).collect())
        };
        let pool = artifact
            .entities
            .entities()
            .iter()
            .map(|e| Ok((e.id, f64s(&e.display())?)))
            .collect::<Result<Vec<_>, String>>()?;

        let all = StubGenerator::default().known_categories();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chosen: Vec<&String> = all.choose_multiple(&mut rng, 20).collect();
        check(chosen.len() == 20, || format!("only {} categories available", all.len()))?;
        let mut matched = 0;
        for category in chosen {
            let candidates =
                generate_candidate_entities(category, providers.generator.as_ref()).map_err(|e| e.to_string())?;
            let got = suggest_dataset_entities(&candidates, &artifact.entities, &providers.embedder, 30, 0.35)
                .map_err(|e| e.to_string())?;
            let vectors = candidates.iter().map(|c| f64s(c)).collect::<Result<Vec<_>, String>>()?;
            let want = exhaustive_ranking(&normalized_mean(&vectors), &pool, 30, 0.35);
            let got_ids: Vec<u32> = got.iter().map(|s| s.entity_id).collect();
            let want_ids: Vec<u32> = want.iter().map(|w| w.0).collect();
            check(got_ids == want_ids, || format!("{category}: {got_ids:?} != {want_ids:?}"))?;
            for (g, w) in got.iter().zip(&want) {
                check((g.similarity - w.1).abs() < 1e-6, || format!("{category}: score {} vs {}", g.similarity, w.1))?;
            }
            matched += got.len();
        }
        Ok(format!("20 seeded categories, {matched} suggestions identical (scores within 1e-6)"))
    })();
    finish(5, "suggestion oracle", Duration::from_secs(2), started, outcome);
}

#[test]
fn criterion_6_determinism() {
    let started = Instant::now();
    let outcome = (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let corpus = dir.path().join("medical.jsonl");
        std::fs::write(&corpus, MEDICAL_500_JSONL).map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for name in ["a.json", "b.json"] {
            let run_started = Instant::now();
            let out = dir.path().join(name);
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let code = histoscope_server::cli::run(
                ["histoscope", "analyze", corpus.to_str().unwrap(), "--out", out.to_str().unwrap()],
                &mut o,
                &mut e,
            );
            check(code == 0, || format!("analyze exited {code}: {}", String::from_utf8_lossy(&e)))?;
            check(run_started.elapsed() < Duration::from_secs(30), || "run exceeded 30 s".into())?;
            files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        check(files[0] == files[1], || "artifacts differ".into())?;
        Ok(format!("two runs, {} identical bytes", files[0].len()))
    })();
    finish(6, "determinism", Duration::from_secs(60), started, outcome);
}

fn synthetic(label: &str, counts: &[u64]) -> Histogram {
    let mut h = Histogram {
        id: label.to_string(),
        label: label.to_string(),
        source: HistogramSource::User,
        buckets: counts
            .iter()
            .enumerate()
            .map(|(i, &count)| Bucket {
                entity_id: i as u32,
                surface: vec![format!("e{i}")],
                count,
            })
            .collect(),
        total_count: 0,
        entropy: 0.0,
    };
    h.recompute_stats();
    h
}

#[test]
fn criterion_7_entropy_ordering() {
    let started = Instant::now();
    let outcome = (|| {
        let uniform = synthetic("uniform", &[5, 5, 5, 5]);
        let spike = synthetic("spike", &[17, 1, 1, 1]);
        let by_entropy = sort_histograms(vec![spike.clone(), uniform.clone()], SortKey::Entropy);
        check(by_entropy[0].label == "uniform", || "uniform not first under ENTROPY".into())?;
        check((uniform.entropy - 4f64.ln()).abs() < 1e-12, || format!("uniform entropy {}", uniform.entropy))?;

        let big_spike = synthetic("spike", &[27, 1, 1, 1]);
        let by_total = sort_histograms(vec![uniform.clone(), big_spike.clone()], SortKey::TotalCount);
        check(by_total[0].label == "spike", || "spike not first under TOTAL_COUNT".into())?;
        let by_entropy = sort_histograms(vec![big_spike, uniform.clone()], SortKey::Entropy);
        check(by_entropy[0].label == "uniform", || "uniform not first under ENTROPY".into())?;
        Ok(format!("H(uniform) = {:.4} > H(spike) = {:.4}", uniform.entropy, spike.entropy))
    })();
    finish(7, "entropy ordering", Duration::from_secs(1), started, outcome);
}

#[test]
fn criterion_8_api_contract() {
    let started = Instant::now();
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let outcome: Result<String, String> = runtime.block_on(async {
        let (artifact, app) = fixture_app(None);
        let expect = |r: &Reply, status: StatusCode, what: &str| {
            check(r.status == status, || format!("{what}: {} {}", r.status, String::from_utf8_lossy(&r.bytes)))
        };

        let r = get(&app, "/api/health").await;
        expect(&r, StatusCode::OK, "health")?;
        check(r.json()["artifact_digest"] == artifact.corpus_digest.as_str(), || "digest".into())?;

        let r = get(&app, "/api/examples?offset=0&limit=50").await;
        expect(&r, StatusCode::OK, "examples")?;
        check(r.json()["examples"].as_array().map(Vec::len) == Some(50), || "page size".into())?;

        let bucket = &artifact.auto_histograms[0].buckets[0];
        let r = get(&app, &format!("/api/examples?entity_id={}&limit=500", bucket.entity_id)).await;
        expect(&r, StatusCode::OK, "bucket filter")?;
        check(r.json()["total"] == bucket.count, || "bucket total".into())?;

        let r = get(&app, "/api/histograms?sort=entropy").await;
        expect(&r, StatusCode::OK, "histograms")?;
        let before = r.json()["histograms"].as_array().map(Vec::len).unwrap_or(0);

        let r = post(&app, "/api/search", json!({"query": "infectious", "mode": "semantic"})).await;
        expect(&r, StatusCode::OK, "search")?;
        check(r.json()["results"][0]["match_kind"] == "SEMANTIC", || "semantic hit".into())?;

        let r = post(&app, "/api/categories", json!({"category": "sexually transmitted diseases"})).await;
        expect(&r, StatusCode::OK, "categories")?;
        let pending = r.json();
        let ids: Vec<u64> = pending["suggestions"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|s| s["entity_id"].as_u64())
            .collect();
        check(!ids.is_empty(), || "no suggestions".into())?;

        let r = post(
            &app,
            "/api/histograms",
            json!({"pending_id": pending["id"], "label": "sexually transmitted diseases", "entity_ids": ids}),
        )
        .await;
        expect(&r, StatusCode::CREATED, "create")?;
        let created = r.json()["id"].clone();

        let list = get(&app, "/api/histograms").await.json();
        let all = list["histograms"].as_array().cloned().unwrap_or_default();
        check(all.len() == before + 1, || format!("{} histograms after create", all.len()))?;
        check(all.iter().filter(|h| h["id"] == created).count() == 1, || "new histogram not listed once".into())?;
        Ok(format!("6 endpoints, create flow added {created} with {} buckets", ids.len()))
    });
    finish(8, "API contract", Duration::from_secs(20), started, outcome);
}
