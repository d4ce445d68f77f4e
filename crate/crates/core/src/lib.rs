pub mod bench;
pub mod error;
pub mod filter;
pub mod gain_net;
pub mod so3;
pub mod trainer;
