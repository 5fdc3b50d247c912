//! SPLQ model definitions and the parametric families used in simulation.

mod family;
mod splq;

pub use family::{Family, Gpd, Law, Weibull};
pub use splq::{gpd_lmoment_map, order_stat_location, weibull_lmoment_map, ModelKind, SplqModel};
