//! Exact cosine top-k over a small index, saved and reloaded.
//!
//! cargo run --example embedding_index

use sceneforge::embedding_store::{cosine_similarity, EmbeddingVector, VectorIndex};

fn main() {
    let mut index = VectorIndex::new(3, "hand");
    for (id, v) in [("lamp", [1.0, 0.1, 0.0]), ("sofa", [0.0, 1.0, 0.2]), ("chair", [0.2, 0.9, 0.1])] {
        index.insert(id, EmbeddingVector::new(v.to_vec()).unwrap()).unwrap();
    }
    let query = EmbeddingVector::new(vec![0.1, 1.0, 0.0]).unwrap();
    for (id, score) in index.top_k(&query, 2).unwrap() {
        println!("{id:<6} {score:.4}");
    }

    let path = std::env::temp_dir().join("sceneforge_example_embeddings.bin");
    index.save(&path).unwrap();
    let back = VectorIndex::load(&path).unwrap();
    let a = cosine_similarity(&query, index.get("sofa").unwrap()).unwrap();
    let b = cosine_similarity(&query, back.get("sofa").unwrap()).unwrap();
    println!("reloaded {} rows; sofa score identical: {}", back.len(), a.to_bits() == b.to_bits());
}
