//! Reference data for the double-integrator example: the robust positively
//! invariant set, the robust terminal set and the terminal weight as
//! published, plus the example configuration.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::geometry::Polytope;
use crate::serde_mat;

pub const RPI_JSON: &str = include_str!("../fixtures/published_rpi.json");
pub const TERMINAL_JSON: &str = include_str!("../fixtures/published_terminal.json");
pub const WEIGHT_JSON: &str = include_str!("../fixtures/published_weight.json");
pub const DOUBLE_INTEGRATOR_JSON: &str = include_str!("../fixtures/double_integrator.json");

pub fn rpi_set() -> Polytope {
    Polytope::from_json(RPI_JSON).expect("bundled RPI fixture")
}

pub fn terminal_set() -> Polytope {
    Polytope::from_json(TERMINAL_JSON).expect("bundled terminal fixture")
}

pub fn terminal_weight() -> DMatrix<f64> {
    #[derive(Deserialize)]
    struct Weight {
        #[serde(rename = "P", with = "serde_mat::matrix")]
        p: DMatrix<f64>,
    }
    serde_json::from_str::<Weight>(WEIGHT_JSON)
        .expect("bundled weight fixture")
        .p
}
