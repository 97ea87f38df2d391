//! Dueling Q-network basics: Q-values for a state, invariance of the
//! aggregation to an advantage offset, and a few TD steps on a toy batch.

use nimbus::agent::{td_loss, td_train_step, DqnParams, ScalingAction, StateVector, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut main = DqnParams::init(64, &mut rng);
    let state = StateVector::new(85.0, 92.0, 70.0, 2.0).normalized(10);
    println!("q = {:?}", main.q(&state));

    let mut shifted = main.clone();
    for b in shifted.advantage.b.iter_mut() {
        *b += 5.0;
    }
    println!(
        "q after +5 on every advantage bias = {:?}",
        shifted.q(&state)
    );

    // reward only for scaling up: ScaleUp should pull ahead
    let batch: Vec<Transition> = (0..32)
        .map(|_| {
            let s: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let a = rng.gen_range(0..3);
            Transition {
                state: s,
                action: a,
                reward: if a == ScalingAction::ScaleUp.index() {
                    1.0
                } else {
                    0.0
                },
                next_state: s,
                done: true,
            }
        })
        .collect();
    let target = main.clone();
    for step in 0..=300 {
        if step % 100 == 0 {
            println!(
                "step {step:>3} loss {:.4}",
                td_loss(&main, &target, &batch, 0.99, 1.0)
            );
        }
        main = td_train_step(&main, &target, &batch, 0.99, 0.05, 10.0).0;
    }
    println!("q = {:?}", main.q(&state));
}
