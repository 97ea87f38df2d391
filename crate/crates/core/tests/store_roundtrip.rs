use nimbus::agent::{q_values, DqnParams, StateVector};
use nimbus::forecaster::{forward, LstmParams, Scaler};
use nimbus::store::{self, ModelArchive, StoreError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dqn(seed: u64) -> DqnParams {
    DqnParams::init(64, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn dqn_round_trip_is_bit_exact_and_q_values_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/agent.nbg.json");
    let params = dqn(11);
    store::save(
        &ModelArchive::from_dqn(&params).with_meta("seed", 11),
        &path,
    )
    .unwrap();
    let archive = store::load(&path).unwrap();
    assert_eq!(archive.metadata["seed"], "11");
    let loaded = archive.to_dqn().unwrap();
    let bits = |p: &DqnParams| p.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&params), bits(&loaded));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let s = StateVector::new(
            rng.gen_range(0.0..120.0),
            rng.gen_range(0.0..100.0),
            rng.gen_range(0.0..100.0),
            rng.gen_range(1..=10) as f64,
        );
        let a = q_values(&params, &s, 10);
        let b = q_values(&loaded, &s, 10);
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }
}

#[test]
fn lstm_round_trip_keeps_scaler_and_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forecaster.nbg.json");
    let params = LstmParams::init(&mut ChaCha8Rng::seed_from_u64(3));
    let scaler = Scaler {
        mean: [812.5, 3.25],
        std: [240.0, 1.5],
    };
    store::save(&ModelArchive::from_lstm(&params, &scaler), &path).unwrap();
    let (p2, s2) = store::load(&path).unwrap().to_lstm().unwrap();
    assert_eq!(p2, params);
    assert_eq!(s2, scaler);
    let window: Vec<[f64; 2]> = (0..20)
        .map(|i| [300.0 + 25.0 * i as f64, 1.0 + (i / 5) as f64])
        .collect();
    let a = forward(&params, &scaler, &window).unwrap();
    let b = forward(&p2, &s2, &window).unwrap();
    assert_eq!(
        a.predicted_total_mem_mib.to_bits(),
        b.predicted_total_mem_mib.to_bits()
    );
}

#[test]
fn tampered_shape_is_rejected() {
    let mut archive = ModelArchive::from_dqn(&dqn(1));
    archive.tensors.get_mut("fc2.w").unwrap().shape = vec![32, 128];
    let text = serde_json::to_string(&archive).unwrap();
    assert!(matches!(
        store::from_json(&text),
        Err(StoreError::ShapeMismatch { .. })
    ));

    let mut archive = ModelArchive::from_dqn(&dqn(1));
    archive.tensors.get_mut("advantage.b").unwrap().data.pop();
    let text = serde_json::to_string(&archive).unwrap();
    assert!(matches!(
        store::from_json(&text),
        Err(StoreError::ShapeMismatch { .. })
    ));
}

#[test]
fn wrong_kind_missing_tensor_and_version_are_rejected() {
    let archive = ModelArchive::from_dqn(&dqn(2));
    assert!(matches!(
        archive.to_lstm(),
        Err(StoreError::SchemaMismatch(_))
    ));

    let mut missing = archive.clone();
    missing.tensors.remove("value.w");
    let text = serde_json::to_string(&missing).unwrap();
    assert!(matches!(
        store::from_json(&text),
        Err(StoreError::SchemaMismatch(_))
    ));

    let mut future = archive.clone();
    future.format_version = 99;
    let text = serde_json::to_string(&future).unwrap();
    assert!(matches!(
        store::from_json(&text),
        Err(StoreError::UnsupportedVersion(99))
    ));

    assert!(matches!(
        store::from_json("{not json"),
        Err(StoreError::SchemaMismatch(_))
    ));
}

#[test]
fn missing_file_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        store::load(&dir.path().join("absent.json")),
        Err(StoreError::IoFailure(_))
    ));
}
