pub mod oracles;
pub mod server;
pub mod planted;
pub mod dense;
