//! Annual gas cost of anchoring Merkle roots.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::anchor::{DEPLOY_GAS, STORE_GAS};

pub const WRITES_PER_DAY: u64 = 18;
pub const DAYS_PER_YEAR: u64 = 365;
/// Published annual cost of the fastest policy, used to back-solve the
/// ETH price.
pub const FASTEST_USD_PER_YEAR: f64 = 5_705.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GasError {
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("unknown policy {0:?}; expected fastest, average or cheap")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub gas_per_store: u64,
    pub deploy_gas: u64,
    pub gas_price_gwei: f64,
    pub writes_per_day: u64,
    pub eth_usd: f64,
}

impl GasParams {
    pub fn at_price(gas_price_gwei: f64) -> Self {
        Self {
            gas_per_store: STORE_GAS,
            deploy_gas: DEPLOY_GAS,
            gas_price_gwei,
            writes_per_day: WRITES_PER_DAY,
            eth_usd: eth_usd(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasEstimate {
    pub params: GasParams,
    pub eth_per_write: f64,
    pub usd_per_write: f64,
    pub writes_per_year: u64,
    pub usd_per_year: f64,
    /// One-time deployment cost at the same price.
    pub deploy_usd: f64,
}

fn gwei_to_eth(gas: u64, gwei: f64) -> f64 {
    gas as f64 * gwei * 1e-9
}

pub fn estimate_gas(params: GasParams) -> Result<GasEstimate, GasError> {
    let positive = [
        ("gas_per_store", params.gas_per_store as f64),
        ("gas_price_gwei", params.gas_price_gwei),
        ("writes_per_day", params.writes_per_day as f64),
        ("eth_usd", params.eth_usd),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(GasError::NonPositive(name, v));
        }
    }
    let eth_per_write = gwei_to_eth(params.gas_per_store, params.gas_price_gwei);
    let usd_per_write = eth_per_write * params.eth_usd;
    let writes_per_year = params.writes_per_day * DAYS_PER_YEAR;
    Ok(GasEstimate {
        params,
        eth_per_write,
        usd_per_write,
        writes_per_year,
        usd_per_year: usd_per_write * writes_per_year as f64,
        deploy_usd: gwei_to_eth(params.deploy_gas, params.gas_price_gwei) * params.eth_usd,
    })
}

/// ETH price that makes the fastest policy cost exactly the published
/// annual figure.
pub fn eth_usd() -> f64 {
    let eth_per_year = gwei_to_eth(STORE_GAS, Policy::Fastest.gas_price_gwei())
        * (WRITES_PER_DAY * DAYS_PER_YEAR) as f64;
    FASTEST_USD_PER_YEAR / eth_per_year
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Fastest,
    Average,
    Cheap,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Fastest, Policy::Average, Policy::Cheap];

    /// Gas price used for cost estimates. The average policy is quoted as a
    /// 50 to 53 Gwei span; the upper end is used.
    pub fn gas_price_gwei(self) -> f64 {
        match self {
            Policy::Fastest => 85.0,
            Policy::Average => 53.0,
            Policy::Cheap => 33.0,
        }
    }

    pub fn gas_price_range(self) -> (f64, f64) {
        match self {
            Policy::Average => (50.0, 53.0),
            p => (p.gas_price_gwei(), p.gas_price_gwei()),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Fastest => "fastest",
            Policy::Average => "average",
            Policy::Cheap => "cheap",
        })
    }
}

impl FromStr for Policy {
    type Err = GasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fastest" => Ok(Policy::Fastest),
            "average" => Ok(Policy::Average),
            "cheap" => Ok(Policy::Cheap),
            _ => Err(GasError::UnknownPolicy(s.to_string())),
        }
    }
}

/// Mean time to confirm one write, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmTime {
    pub min_secs: u64,
    pub max_secs: u64,
}

pub fn report_confirm_time(policy: &str) -> Result<ConfirmTime, GasError> {
    Ok(confirm_time(policy.parse()?))
}

pub fn confirm_time(policy: Policy) -> ConfirmTime {
    let (min_secs, max_secs) = match policy {
        Policy::Fastest => (26, 27),
        Policy::Average => (269, 299),
        Policy::Cheap => (1_091, 1_140),
    };
    ConfirmTime { min_secs, max_secs }
}

pub fn policy_estimate(policy: Policy) -> GasEstimate {
    estimate_gas(GasParams::at_price(policy.gas_price_gwei())).expect("policy prices are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fastest_write_cost() {
        let e = policy_estimate(Policy::Fastest);
        assert!((e.eth_per_write - 0.003_760_485).abs() < 1e-12);
        assert_eq!(e.writes_per_year, 6_570);
        assert!((e.usd_per_year - 5_705.0).abs() < 1e-6);
    }

    #[test]
    fn back_solved_price() {
        assert!((eth_usd() - 230.91).abs() < 0.01, "{}", eth_usd());
    }

    #[test]
    fn rejects_non_positive() {
        let mut p = GasParams::at_price(0.0);
        assert!(matches!(estimate_gas(p), Err(GasError::NonPositive("gas_price_gwei", _))));
        p.gas_price_gwei = 10.0;
        p.eth_usd = -1.0;
        assert!(estimate_gas(p).is_err());
        p.eth_usd = f64::NAN;
        assert!(estimate_gas(p).is_err());
    }

    #[test]
    fn confirm_lookup() {
        assert_eq!(report_confirm_time("fastest").unwrap(), ConfirmTime { min_secs: 26, max_secs: 27 });
        assert_eq!(report_confirm_time("Cheap").unwrap().max_secs, 1_140);
        assert!(report_confirm_time("slow").is_err());
    }
}
