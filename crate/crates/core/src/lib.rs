pub mod abm;
pub mod axes;
pub mod catalog;
pub mod fixtures;
pub mod markup;
pub mod pipeline;
pub mod repository;
pub mod template;
pub mod text;
#[cfg(feature = "testing")]
pub mod testing;
