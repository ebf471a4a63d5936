//! Top-k accuracy of ranked retrieval results.
//!
//! cargo run --example retrieval_accuracy

use sceneforge::evaluation::{top_k_accuracy, RetrievalTrial};

fn main() {
    let trials = [
        ("sofa", vec!["sofa", "armchair", "bench"]),
        ("lamp", vec!["floor lamp", "lamp", "vase"]),
        ("desk", vec!["table", "shelf", "stool"]),
        ("plant", vec!["plant", "vase"]),
    ]
    .map(|(t, r)| RetrievalTrial::new(t, r.into_iter().map(String::from).collect()).unwrap());
    for (k, acc) in top_k_accuracy(&trials, &[1, 2, 3]).unwrap() {
        println!("top-{k}: {:.0}%", acc * 100.0);
    }
}
