//! Product-space poverty analytics.
//!
//! The crate turns a country × product × year export panel and a country
//! headcount-poverty panel into product-level poverty indices (PPI and
//! Eigenpoverty), country-level poverty-reduction potentials, and the
//! cross-section regressions built on them.
//!
//! Data flows through the modules in this order:
//!
//! ```text
//! ingest -> rca -> product_space -> poverty_product -> country_metrics -> econometrics
//! ```
//!
//! [`poverty_indices`] is independent of that chain: it evaluates monetary
//! poverty measures on income microdata. [`pipeline`] wires everything into
//! the batch runs exposed by the `povspace` binary.

pub mod country_metrics;
pub mod econometrics;
pub mod error;
pub mod ingest;
pub mod matrix_io;
pub mod numfmt;
pub mod pipeline;
pub mod poverty_indices;
pub mod poverty_product;
pub mod product_space;
pub mod rca;

pub use error::{Error, Result};

/// Inclusive span of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct YearSpan {
    pub start: i32,
    pub end: i32,
}

impl YearSpan {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "empty year range {start}-{end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn single(year: i32) -> Self {
        Self { start: year, end: year }
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

impl std::fmt::Display for YearSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.start == self.end {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}-{}", self.start, self.end)
        }
    }
}

impl std::str::FromStr for YearSpan {
    type Err = Error;

    /// Accepts `2010` or `1995-2010` (also `1995:2010`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("invalid year range '{s}'")))
        };
        match s.split_once(['-', ':']) {
            Some((a, b)) => YearSpan::new(parse(a)?, parse(b)?)
                .map_err(|_| Error::Config(format!("empty year range '{s}'"))),
            None => Ok(YearSpan::single(parse(s)?)),
        }
    }
}
