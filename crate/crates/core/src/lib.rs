pub mod corpus;
pub mod filter;
pub mod subword;
pub mod aligner;
pub mod projector;
pub mod typology;
pub mod validate;
pub mod io;
pub mod synthetic;
pub mod pipeline;
pub mod cli;
