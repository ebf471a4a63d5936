//! Pairwise judgments to win rates, Bradley-Terry strengths and Elo.
//!
//! cargo run --example elo_ratings

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sceneforge::evaluation::{bradley_terry, to_elo, win_matrix, win_rates, BtOptions, Judgment, JudgmentSet, Winner};

fn main() {
    let models = [("sceneforge", 3.0), ("grid", 1.0), ("random", 0.3)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut records = Vec::new();
    for (i, (a, pa)) in models.iter().enumerate() {
        for (b, pb) in &models[i + 1..] {
            for n in 0..200 {
                let winner = if rng.gen_bool(pa / (pa + pb)) { Winner::A } else { Winner::B };
                records.push(Judgment::new(&format!("{a}-{b}-{n}"), a, b, winner));
            }
        }
    }
    let matrix = win_matrix(&JudgmentSet::new(records).unwrap()).unwrap();
    print!("{}", win_rates(&matrix).to_table());
    let fit = bradley_terry(&matrix, &BtOptions::default()).unwrap();
    print!("{}", to_elo(&fit, "random").unwrap().to_table());
}
