pub mod asset_library;
pub mod cli;
pub mod demo;
pub mod embedding_store;
pub mod evaluation;
pub mod geometry;
pub mod layout;
pub mod model_provider;
pub mod retrieval;
pub mod scene_model;
