//! Closed geodesics on spindle orbifolds: warped-product cone surfaces,
//! geodesic shooting through branched covers, curve-shortening flow,
//! Birkhoff annulus return maps, and broken-geodesic relaxation.

pub mod birkhoff;
pub mod csf;
pub mod geodesic;
pub mod num;
pub mod report;
pub mod search;
pub mod suite;
pub mod surface;
