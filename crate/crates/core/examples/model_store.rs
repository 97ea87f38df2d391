//! Saves both model kinds, reloads them, and shows what a corrupted archive
//! looks like to the loader.

use nimbus::agent::DqnParams;
use nimbus::forecaster::{LstmParams, Scaler};
use nimbus::store::{self, ModelArchive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let dir = std::env::temp_dir().join("nimbus-model-store");
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let dqn = DqnParams::init(64, &mut rng);
    let path = dir.join("agent.json");
    store::save(
        &ModelArchive::from_dqn(&dqn).with_meta("note", "demo"),
        &path,
    )
    .expect("save");
    let back = store::load(&path).and_then(|a| a.to_dqn()).expect("load");
    println!(
        "dqn: {} params, identical={}",
        back.num_params(),
        back == dqn
    );

    let lstm = LstmParams::init(&mut rng);
    let path = dir.join("forecaster.json");
    store::save(&ModelArchive::from_lstm(&lstm, &Scaler::identity()), &path).expect("save");
    let (back, _) = store::load(&path).and_then(|a| a.to_lstm()).expect("load");
    println!(
        "lstm: {} params, identical={}",
        back.num_params(),
        back == lstm
    );

    let mut bad = ModelArchive::from_dqn(&dqn);
    bad.tensors.get_mut("value.w").unwrap().data.truncate(3);
    let text = serde_json::to_string(&bad).unwrap();
    println!("truncated tensor: {}", store::from_json(&text).unwrap_err());
    println!(
        "wrong kind: {}",
        ModelArchive::from_dqn(&dqn).to_lstm().unwrap_err()
    );
}
