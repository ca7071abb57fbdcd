//! Bundled sample documents: a local flood plan template and the binding
//! for one locality.

use crate::pipeline::Binding;
use crate::template::DisplanTemplate;

pub const FLOOD_TEMPLATE: &str = include_str!("../fixtures/local_flood_plan.displan");
pub const WAGGA_BINDING: &str = include_str!("../fixtures/wagga.binding");

pub fn flood_template() -> DisplanTemplate {
    DisplanTemplate::parse(FLOOD_TEMPLATE).expect("bundled template parses")
}

pub fn wagga_binding() -> Binding {
    Binding::parse(WAGGA_BINDING).expect("bundled binding parses")
}
