//! Monte Carlo and randomized quasi-Monte Carlo estimation of Asian option
//! Greeks with Malliavin weights and conditional smoothing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Serializes a type through its `Display` and `FromStr` impls.
macro_rules! serde_via_str {
    ($ty:ty) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(
                &self,
                s: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(
                d: D,
            ) -> std::result::Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

pub mod engine;
mod error;
pub mod estimators;
pub mod lowdisc;
pub mod model;
pub mod oracle;
pub mod pathgen;

pub use engine::{GreekEstimate, MethodSpec};
pub use error::{Error, Result};
pub use estimators::{GreekKind, OptionKind, OptionSpec};
pub use model::{MarketParams, PathSample};
pub use pathgen::{Construction, TimeGrid};
