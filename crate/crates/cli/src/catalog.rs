use std::fmt::Write;

use swarmfield::controllers::POINTWISE_NAMES;
use swarmfield::velocity::FIELD_NAMES;

use crate::init::INITIALIZER_NAMES;
use crate::scenario::METRIC_NAMES;

pub const ANALYSIS_NAMES: [&str; 6] = ["fit_decay", "heat_reference", "transport_linear", "mixing_correlation", "equivariance", "jacobian"];

/// Everything a scenario may reference by name.
pub fn list_catalog() -> String {
    let mut s = String::new();
    let mut section = |title: &str, items: &mut dyn Iterator<Item = String>| {
        writeln!(s, "{title}:").unwrap();
        for i in items {
            writeln!(s, "  {i}").unwrap();
        }
    };
    section("initializers", &mut INITIALIZER_NAMES.iter().map(|n| n.to_string()));
    let controllers = ["error_gradient".to_string(), "zero".to_string()];
    section("controllers", &mut controllers.into_iter().chain(POINTWISE_NAMES.iter().map(|n| format!("pointwise:{n}"))));
    section("vector fields", &mut FIELD_NAMES.iter().map(|n| n.to_string()));
    section("metrics", &mut METRIC_NAMES.iter().map(|n| n.to_string()));
    section("analyses", &mut ANALYSIS_NAMES.iter().map(|n| n.to_string()));
    s
}
