use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER_CAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(DEFAULT_ORDER_CAP)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<()> {
        if self.p > cap || self.d > cap || self.q > cap {
            return Err(Error::invalid(format!("{self} exceeds the order cap of {cap}")));
        }
        if self.p + self.q == 0 && self.d == 0 {
            return Err(Error::invalid("ARIMA(0,0,0) has nothing to fit"));
        }
        Ok(())
    }

    /// Lags that are conditioned on (their residuals are fixed at zero).
    pub fn conditioning_lags(&self) -> usize {
        self.p.max(self.q)
    }

    pub fn complexity(&self) -> usize {
        self.p + self.d + self.q
    }

    /// Shortest series `fit` accepts.
    pub fn min_series_len(&self) -> usize {
        10 * (self.p + self.q + 1) + self.d
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

impl std::str::FromStr for ArimaOrder {
    type Err = Error;

    /// Parses `p,d,q`, optionally wrapped as `ARIMA(p,d,q)` or `(p,d,q)`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches("ARIMA").trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<usize> = inner
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("cannot parse order {s:?}")))?;
        match parts[..] {
            [p, d, q] => Ok(Self::new(p, d, q)),
            _ => Err(Error::invalid(format!("order {s:?} needs three components"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ArimaOrder::new(0, 0, 0).validate().is_err());
        assert!(ArimaOrder::new(0, 1, 0).validate().is_ok());
        assert!(ArimaOrder::new(6, 0, 0).validate().is_err());
        assert!(ArimaOrder::new(6, 0, 0).validate_with_cap(6).is_ok());
    }

    #[test]
    fn parse_forms() {
        assert_eq!("1,2,1".parse::<ArimaOrder>().unwrap(), ArimaOrder::new(1, 2, 1));
        assert_eq!("ARIMA(2, 2, 2)".parse::<ArimaOrder>().unwrap(), ArimaOrder::new(2, 2, 2));
        assert!("1,2".parse::<ArimaOrder>().is_err());
        assert_eq!(ArimaOrder::new(1, 2, 1).to_string(), "ARIMA(1,2,1)");
    }
}
