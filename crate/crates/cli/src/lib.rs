//! Command line and HTTP front ends for goodwill models.

pub mod api_error;
pub mod ops;
pub mod registry;
pub mod service;
