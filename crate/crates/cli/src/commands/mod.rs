pub mod phantom;
pub mod preprocess;
pub mod render;
pub mod serve;
