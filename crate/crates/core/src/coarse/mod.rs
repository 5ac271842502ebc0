//! Controlled coarse maps between finite groups and the spaces they form.

pub mod controls;
pub mod maps;
pub mod space;

pub use controls::{ControlData, ControlFn};
pub use maps::{
    density_radius, distortion, make_injective, verify, InjectiveLift, MapRecord, Mode,
    VerifyReport, Violation,
};
pub use space::{
    act, act_table, canonical_order, enumerate_map_space, eps_net, first_difference,
    map_distance, ActOutcome, EpsNet, MapSpace, NetCertificate, DEFAULT_ENUMERATION_BUDGET,
};
