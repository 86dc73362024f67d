//! Threshold cascades of economic collapse on directed, weighted trade networks.

pub mod analytics;
pub mod cascade;
pub mod criticality;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod io;
pub mod network;
pub mod randomize;
pub mod runner;
pub mod scalar;

pub use cascade::{
    run_all, run_avalanche, AvalancheMap, AvalancheResult, CascadeParams, Cause, CollapseEvent,
    Label, Profile, Side,
};
pub use error::{Error, Result};
pub use network::{
    build_network, capacity, CapacityMode, Country, EndpointPolicy, Link, MacroNet, TradeLink,
};
pub use scalar::Scalar;

pub type Rational64 = num_rational::Ratio<i64>;

pub type MacroNet64 = MacroNet<f64>;
pub type MacroNet32 = MacroNet<f32>;
pub type ExactMacroNet = MacroNet<Rational64>;
pub type Params64 = CascadeParams<f64>;
pub type ExactParams = CascadeParams<Rational64>;
