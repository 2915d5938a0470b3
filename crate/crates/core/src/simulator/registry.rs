//! Named plants with their state-feedback laws.

use crate::controller::FeedbackLaw;
use crate::error::{Error, Result};
use crate::system::{example_system, NormalFormSystem};

/// A plant together with the state feedback the observer is built around.
#[derive(Debug, Clone)]
pub struct Design {
    pub system: NormalFormSystem,
    pub law: FeedbackLaw,
}

/// Registered ids. `example-bad-phi1` is the example with the sign of `φ₁`
/// flipped, kept as a fault fixture for the `φ₁` validator.
pub const SYSTEM_IDS: &[&str] = &["example", "example-bad-phi1"];

pub fn lookup(id: &str) -> Result<Design> {
    match id {
        "example" => Ok(Design {
            system: example_system(),
            law: FeedbackLaw::example(),
        }),
        "example-bad-phi1" => {
            let good = example_system();
            let bad = good.with_phi1("example-bad-phi1", |eta, xi| {
                -(xi[0] + eta[0] * xi[0].cos())
            });
            Ok(Design {
                system: bad,
                law: FeedbackLaw::example(),
            })
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_resolves() {
        for id in SYSTEM_IDS {
            assert_eq!(lookup(id).unwrap().system.name(), *id);
        }
        assert!(matches!(lookup("tora"), Err(Error::UnknownSystem(_))));
    }
}
