//! Good-set selection, return-time classing, the inverse-branch repeller and
//! the checks of its entropy, pressure, Birkhoff and expansion properties.

pub mod classing;
pub mod good_set;
pub mod ifs;
pub mod verify;

pub use classing::{return_classing, ReturnClassing};
pub use good_set::{select_good_set, select_good_set_lenient, GoodPoint, GoodSet, GoodSetParams};
pub use ifs::{build_ifs, periodic_point, repeller_entropy, repeller_pressure, IfsBranch, PeriodicPoint, PressureEstimate, RepellerIFS};
pub use verify::{verify_theorem, TargetEstimates, VerificationReport, VerifyParams};
