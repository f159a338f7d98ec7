use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use triage_core::evalkit::{demo_geocoder_table, generate_synthetic_corpus, AFFECTED_CITIES};
use triage_core::geoloc::{CityList, GeoPoint, Geocoder, GeocoderConfig, MockProvider, Provider, ProviderError};
use triage_core::models::{ModelBundle, ModelConfig};
use triage_core::nertag::CrfTrainConfig;
use triage_server::{router, AppState, Pipeline, Store};

const LOCATED: &str = "Ali Yılmaz enkaz altında adres: Atatürk Cad. no:5 Hatay lütfen yardım edin";
const TAG_FAILED: &str = "Ayşe Kaya ve ailesi yaralı, haber alamıyoruz lütfen yardım";
const NEGATIVE: &str = "deprem bölgesine yardım tırları yola çıktı";

fn models() -> ModelBundle<f64> {
    static MODELS: OnceLock<ModelBundle<f64>> = OnceLock::new();
    MODELS
        .get_or_init(|| {
            let data = generate_synthetic_corpus(400, 3).unwrap();
            let cfg = ModelConfig {
                crf: CrfTrainConfig {
                    iterations: 100,
                    ..CrfTrainConfig::default()
                },
                ..ModelConfig::default()
            }
            .with_seed(3);
            ModelBundle::train(&data, &cfg).unwrap().0
        })
        .clone()
}

fn app_with(provider: Arc<dyn Provider>, max_batch: usize) -> Router {
    let store = Arc::new(Store::in_memory().unwrap());
    let geo_cfg = GeocoderConfig {
        rps: 1e6,
        ..GeocoderConfig::default()
    };
    let pipeline = Pipeline {
        models: models(),
        cities: CityList::new(AFFECTED_CITIES.iter().map(|c| c.0)).unwrap(),
        geocoder: Geocoder::new(provider, store.clone(), geo_cfg).unwrap(),
    };
    router(AppState {
        pipeline: Arc::new(pipeline),
        store,
        max_batch,
    })
}

fn app() -> Router {
    app_with(
        Arc::new(MockProvider::new(demo_geocoder_table()).with_suffix_match(true)),
        5000,
    )
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn tweet(id: &str, text: &str, minute: u32) -> Value {
    json!({"id": id, "text": text, "created_at": format!("2023-02-06T04:{minute:02}:00Z")})
}

async fn post(app: &Router, tweets: &[Value]) -> (StatusCode, Value) {
    call(app, "POST", "/api/v1/tweets", Some(Value::Array(tweets.to_vec()).to_string())).await
}

fn assert_error_shape(v: &Value, status: StatusCode) {
    assert_eq!(v["error"]["status"], status.as_u16(), "{v}");
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()), "{v}");
}

fn assert_conserved(s: &Value) {
    let n = |k: &str| s[k].as_u64().unwrap();
    assert_eq!(n("ingested"), n("classified_negative") + n("tagged") + n("tag_failed"), "{s}");
    assert_eq!(n("geocode_attempted"), n("tagged"), "{s}");
    assert_eq!(n("geocode_attempted"), n("located") + n("unlocated") + n("filtered"), "{s}");
}

#[tokio::test]
async fn fresh_store_is_empty() {
    let app = app();
    let (st, stats) = call(&app, "GET", "/api/v1/stats", None).await;
    assert_eq!(st, StatusCode::OK);
    for k in ["ingested", "classified_negative", "tagged", "tag_failed", "geocode_attempted", "located", "unlocated", "filtered"] {
        assert_eq!(stats[k], 0, "{k}");
    }
    let (_, f) = call(&app, "GET", "/api/v1/filters", None).await;
    assert_eq!(f, json!({"names": [], "statuses": []}));
    let (_, page) = call(&app, "GET", "/api/v1/results", None).await;
    assert_eq!(page, json!({"total": 0, "items": []}));
}

#[tokio::test]
async fn ingest_stages_and_dedupe() {
    let app = app();
    let batch = [tweet("1", LOCATED, 1), tweet("2", TAG_FAILED, 2), tweet("3", NEGATIVE, 3)];
    let (st, sum) = post(&app, &batch).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!((sum["accepted"].as_u64(), sum["duplicates"].as_u64()), (Some(3), Some(0)));
    assert_eq!(sum["stats"]["ingested"], 3);
    assert_eq!(sum["stats"]["located"], 1);
    assert_eq!(sum["stats"]["tag_failed"], 1);
    assert_eq!(sum["stats"]["classified_negative"], 1);
    assert_conserved(&sum["stats"]);

    let (_, d) = call(&app, "GET", "/api/v1/tweets/1", None).await;
    assert_eq!(d["result"]["stage"], "Located");
    assert_eq!(d["result"]["matched_city"], "Hatay");
    let p = &d["result"]["outcome"]["value"];
    assert_eq!((p["lat"].as_f64(), p["lon"].as_f64()), (Some(36.20), Some(36.16)));
    let (_, d) = call(&app, "GET", "/api/v1/tweets/3", None).await;
    assert_eq!(d["result"]["stage"], "ClassifiedNegative");
    assert_eq!(d["result"]["spans"], json!([]));

    let before = call(&app, "GET", "/api/v1/stats", None).await.1;
    let stored = d_of(&app, "1").await;
    let (_, again) = post(&app, &batch).await;
    assert_eq!((again["accepted"].as_u64(), again["duplicates"].as_u64()), (Some(0), Some(3)));
    assert_eq!(again["stats"]["ingested"], 0);
    assert_eq!(call(&app, "GET", "/api/v1/stats", None).await.1, before);
    assert_eq!(d_of(&app, "1").await, stored);
}

async fn d_of(app: &Router, id: &str) -> Value {
    call(app, "GET", &format!("/api/v1/tweets/{id}"), None).await.1
}

#[tokio::test]
async fn stats_are_additive_over_batches() {
    let app = app();
    let data = generate_synthetic_corpus(60, 11).unwrap();
    let tweets: Vec<Value> = data.iter().map(|e| serde_json::to_value(&e.tweet).unwrap()).collect();
    let (_, a) = post(&app, &tweets[..25]).await;
    let (_, b) = post(&app, &tweets[25..]).await;
    let (_, total) = call(&app, "GET", "/api/v1/stats", None).await;
    for k in total.as_object().unwrap().keys() {
        assert_eq!(
            total[k].as_u64().unwrap(),
            a["stats"][k].as_u64().unwrap() + b["stats"][k].as_u64().unwrap(),
            "{k}"
        );
    }
    assert_eq!(total["ingested"], 60);
    assert_conserved(&total);
}

#[tokio::test]
async fn ingest_errors() {
    let app = app();
    let (st, v) = call(&app, "POST", "/api/v1/tweets", Some("[".into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, st);
    let (st, v) = call(&app, "POST", "/api/v1/tweets", Some(r#"{"id":"1"}"#.into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, st);

    let small = app_with(Arc::new(MockProvider::new(demo_geocoder_table())), 2);
    let batch = [tweet("1", NEGATIVE, 1), tweet("2", NEGATIVE, 2), tweet("3", NEGATIVE, 3)];
    let (st, v) = post(&small, &batch).await;
    assert_eq!(st, StatusCode::PAYLOAD_TOO_LARGE);
    assert_error_shape(&v, st);
    assert_eq!(call(&small, "GET", "/api/v1/stats", None).await.1["ingested"], 0);
}

#[tokio::test]
async fn bad_tweets_do_not_abort_the_batch() {
    let app = app();
    let batch = [
        tweet("1", NEGATIVE, 1),
        json!({"id": "2", "text": "no timestamp"}),
        tweet("", NEGATIVE, 3),
        tweet("4", LOCATED, 4),
    ];
    let (st, sum) = post(&app, &batch).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(sum["accepted"], 2);
    let idx: Vec<u64> = sum["rejected"].as_array().unwrap().iter().map(|r| r["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, [1, 2]);
}

#[tokio::test]
async fn provider_error_is_unlocated_with_message() {
    let failing = |_: &str| -> Result<Vec<GeoPoint>, ProviderError> { Err(ProviderError("quota exceeded".into())) };
    let app = app_with(Arc::new(failing), 10);
    post(&app, &[tweet("1", LOCATED, 1)]).await;
    let d = d_of(&app, "1").await;
    assert_eq!(d["result"]["stage"], "Unlocated");
    assert_eq!(d["result"]["outcome"], json!({"kind": "ProviderError", "value": "quota exceeded"}));
}

#[tokio::test]
async fn results_filters_and_paging() {
    let app = app();
    let batch = [
        tweet("a", "Ali Yılmaz enkaz altında adres: Atatürk Cad. no:5 Hatay lütfen yardım edin", 1),
        tweet("b", "Mehmet Demir yaralı adres: Gazi Sok. no:12 Malatya lütfen yardım edin", 2),
        tweet("c", "Ali Yılmaz ses geliyor adres: Ordu Sokak no:3 Adana lütfen yardım edin", 3),
        tweet("d", NEGATIVE, 4),
        tweet("e", "AFAD açıklama yaptı, artçı sarsıntılar sürüyor", 5),
    ];
    post(&app, &batch).await;

    let (_, all) = call(&app, "GET", "/api/v1/results", None).await;
    assert_eq!(all["total"], 5);
    let ids: Vec<&str> = all["items"].as_array().unwrap().iter().map(|i| i["tweet"]["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["e", "d", "c", "b", "a"]);

    let (_, by_status) = call(&app, "GET", "/api/v1/results?status=YARALI", None).await;
    assert_eq!(by_status["total"], 1);
    assert_eq!(by_status["items"][0]["tweet"]["id"], "b");

    let (_, by_name) = call(&app, "GET", "/api/v1/results?name=Ali%20Y%C4%B1lmaz", None).await;
    assert_eq!(by_name["total"], 2);

    let (_, neg) = call(&app, "GET", "/api/v1/results?stage=ClassifiedNegative", None).await;
    assert_eq!(neg["total"], 2);

    let mut paged = Vec::new();
    for offset in [0, 2, 4] {
        let (_, p) = call(&app, "GET", &format!("/api/v1/results?limit=2&offset={offset}"), None).await;
        assert_eq!(p["total"], 5);
        paged.extend(p["items"].as_array().unwrap().iter().map(|i| i["tweet"]["id"].as_str().unwrap().to_string()));
    }
    assert_eq!(paged, ids);

    let (_, f) = call(&app, "GET", "/api/v1/filters", None).await;
    assert_eq!(f["names"], json!(["Ali Yılmaz", "Mehmet Demir"]));
    assert_eq!(f["statuses"], json!(["enkaz altında", "ses geliyor", "yaralı"]));

    for bad in ["stage=located", "stage=Nope", "limit=-1", "offset=x", "limit=100000"] {
        let (st, v) = call(&app, "GET", &format!("/api/v1/results?{bad}"), None).await;
        assert_eq!(st, StatusCode::BAD_REQUEST, "{bad}");
        assert_error_shape(&v, st);
    }
}

#[tokio::test]
async fn tweet_detail_404() {
    let app = app();
    let (st, v) = call(&app, "GET", "/api/v1/tweets/missing", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error_shape(&v, st);
}

#[tokio::test]
async fn annotations() {
    let app = app();
    post(&app, &[tweet("1", "Hatay Atatürk Cad. enkaz altında", 1)]).await;
    let rec = json!({
        "tweet_id": "1",
        "label": "CallForHelp",
        "annotator": "ayse",
        "spans": [{"tag": "CITY", "start": 0, "end": 5}, {"tag": "ADDR", "start": 6, "end": 18, "surface": "Atatürk Cad."}]
    });
    let (st, saved) = call(&app, "POST", "/api/v1/annotations", Some(rec.to_string())).await;
    assert_eq!(st, StatusCode::OK, "{saved}");
    assert_eq!(saved["spans"][0]["surface"], "Hatay");
    assert!(saved["created_at"].as_str().is_some());

    let second = json!({"tweet_id": "1", "label": "NotCallForHelp", "annotator": "ayse"});
    let (st, _) = call(&app, "POST", "/api/v1/annotations", Some(second.to_string())).await;
    assert_eq!(st, StatusCode::OK);
    let other = json!({"tweet_id": "1", "label": "CallForHelp", "annotator": "veli", "spans": []});
    call(&app, "POST", "/api/v1/annotations", Some(other.to_string())).await;
    let d = d_of(&app, "1").await;
    let anns = d["annotations"].as_array().unwrap();
    assert_eq!(anns.len(), 2);
    assert_eq!(anns[0]["annotator"], "ayse");
    assert_eq!(anns[0]["label"], "NotCallForHelp");

    let unknown = json!({"tweet_id": "nope", "label": "CallForHelp", "annotator": "x"});
    let (st, v) = call(&app, "POST", "/api/v1/annotations", Some(unknown.to_string())).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error_shape(&v, st);

    let bad_spans = [
        json!([{"tag": "CITY", "start": 0, "end": 99}]),
        json!([{"tag": "CITY", "start": 3, "end": 2}]),
        json!([{"tag": "CITY", "start": 0, "end": 5}, {"tag": "PER", "start": 2, "end": 8}]),
        json!([{"tag": "CITY", "start": 0, "end": 5, "surface": "Adana"}]),
    ];
    for spans in bad_spans {
        let body = json!({"tweet_id": "1", "label": "CallForHelp", "annotator": "x", "spans": spans});
        let (st, v) = call(&app, "POST", "/api/v1/annotations", Some(body.to_string())).await;
        assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{spans}");
        assert_error_shape(&v, st);
    }
    let negative_with_spans = json!({"tweet_id": "1", "label": "NotCallForHelp", "annotator": "x",
        "spans": [{"tag": "CITY", "start": 0, "end": 5}]});
    let (st, _) = call(&app, "POST", "/api/v1/annotations", Some(negative_with_spans.to_string())).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let (st, v) = call(&app, "POST", "/api/v1/annotations", Some("{".into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, st);
}

#[tokio::test]
async fn config_json_exposes_bbox() {
    let (st, v) = call(&app(), "GET", "/config.json", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["api_base"], "/api/v1");
    assert_eq!(v["bbox"]["min_lat"], 35.5);
    assert_eq!(v["bbox"]["max_lon"], 41.5);
}
