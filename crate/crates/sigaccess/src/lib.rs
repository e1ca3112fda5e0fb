pub mod auth;
pub mod channel;
pub mod decoder;
pub mod design;
pub mod signature;
