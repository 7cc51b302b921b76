//! Per-path Greek estimators: Malliavin weights and their closed-form
//! conditional expectations given `Z`.

mod cmv;
mod complex;
mod mv;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use cmv::{
    binary_closed_form, call_closed_form, cmv_estimate, conditional_terms, ConditionalTerms,
    WeightExpansion,
};
pub use complex::{complex_delta_integrals, mv_estimate_complex_delta, ComplexDeltaIntegrals};
pub use mv::{mv_estimate, mv_weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptionKind {
    BinaryAsian,
    AsianCall,
    UpAndOutAsianCall,
}

impl OptionKind {
    pub const ALL: [OptionKind; 3] = [
        OptionKind::BinaryAsian,
        OptionKind::AsianCall,
        OptionKind::UpAndOutAsianCall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptionKind::BinaryAsian => "binary",
            OptionKind::AsianCall => "call",
            OptionKind::UpAndOutAsianCall => "up-and-out",
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "binary-asian" => Ok(OptionKind::BinaryAsian),
            "call" | "asian-call" => Ok(OptionKind::AsianCall),
            "up-and-out" | "uoc" | "up-and-out-call" => Ok(OptionKind::UpAndOutAsianCall),
            other => Err(Error::Config(format!("unknown option kind `{other}`"))),
        }
    }
}

serde_via_str!(OptionKind);
serde_via_str!(GreekKind);

/// Payoff on the arithmetic average of the monitored prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub barrier: Option<f64>,
}

impl OptionSpec {
    pub fn binary(strike: f64) -> Result<Self> {
        Self::new(OptionKind::BinaryAsian, strike, None)
    }

    pub fn call(strike: f64) -> Result<Self> {
        Self::new(OptionKind::AsianCall, strike, None)
    }

    pub fn up_and_out(strike: f64, barrier: f64) -> Result<Self> {
        Self::new(OptionKind::UpAndOutAsianCall, strike, Some(barrier))
    }

    pub fn new(kind: OptionKind, strike: f64, barrier: Option<f64>) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::Config(format!(
                "strike must be positive, got {strike}"
            )));
        }
        let barrier = match (kind, barrier) {
            (OptionKind::UpAndOutAsianCall, Some(h)) if h > strike && h.is_finite() => Some(h),
            (OptionKind::UpAndOutAsianCall, Some(h)) => {
                return Err(Error::Config(format!(
                    "barrier {h} must exceed strike {strike}"
                )))
            }
            (OptionKind::UpAndOutAsianCall, None) => {
                return Err(Error::Config("up-and-out option needs a barrier".into()))
            }
            _ => None,
        };
        Ok(Self {
            kind,
            strike,
            barrier,
        })
    }

    /// Undiscounted payoff at average price `s_avg`.
    #[inline]
    pub fn payoff(&self, s_avg: f64) -> f64 {
        let k = self.strike;
        match self.kind {
            OptionKind::BinaryAsian => {
                if s_avg > k {
                    1.0
                } else {
                    0.0
                }
            }
            OptionKind::AsianCall => (s_avg - k).max(0.0),
            OptionKind::UpAndOutAsianCall => {
                let h = self.barrier.expect("validated on construction");
                if s_avg <= h {
                    (s_avg - k).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// The payoff continued smoothly from the piece that contains `anchor`:
    /// indicators are evaluated at `anchor`, the linear part at `s_avg`.
    pub fn payoff_on_branch(&self, anchor: f64, s_avg: f64) -> f64 {
        let k = self.strike;
        let active = match self.kind {
            OptionKind::BinaryAsian => return if anchor > k { 1.0 } else { 0.0 },
            OptionKind::AsianCall => anchor > k,
            OptionKind::UpAndOutAsianCall => {
                anchor > k && anchor <= self.barrier.expect("validated on construction")
            }
        };
        if active {
            s_avg - k
        } else {
            0.0
        }
    }
}

/// Free-function form of [`OptionSpec::payoff`].
pub fn payoff(option: &OptionSpec, s_avg: f64) -> f64 {
    option.payoff(s_avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GreekKind {
    Delta,
    Gamma,
    Vega,
}

impl GreekKind {
    pub const ALL: [GreekKind; 3] = [GreekKind::Delta, GreekKind::Gamma, GreekKind::Vega];

    pub fn name(self) -> &'static str {
        match self {
            GreekKind::Delta => "delta",
            GreekKind::Gamma => "gamma",
            GreekKind::Vega => "vega",
        }
    }
}

impl fmt::Display for GreekKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GreekKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(GreekKind::Delta),
            "gamma" => Ok(GreekKind::Gamma),
            "vega" => Ok(GreekKind::Vega),
            other => Err(Error::Config(format!("unknown greek `{other}`"))),
        }
    }
}
