//! Revealed comparative advantage and binary advantage matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ingest::ExportPanel;
use crate::{Error, Result, YearSpan};

/// Country × product RCA values of one year.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub year: i32,
    pub values: DMatrix<f64>,
}

/// Country × product advantage indicator M.
///
/// Per-year matrices hold exactly 0 or 1; averages over several years hold
/// the fraction of years with advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageMatrix {
    pub span: YearSpan,
    pub values: DMatrix<f64>,
}

impl AdvantageMatrix {
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Re-binarizes an averaged matrix: 1 where advantage held in a strict
    /// majority of the years.
    pub fn majority_vote(&self) -> AdvantageMatrix {
        AdvantageMatrix {
            span: self.span,
            values: self.values.map(|v| if v > 0.5 { 1.0 } else { 0.0 }),
        }
    }

    /// Number of countries with advantage in each product.
    pub fn ubiquity(&self) -> Vec<f64> {
        self.values.column_iter().map(|c| c.sum()).collect()
    }

    /// Advantage mass of each country (product count for binary M).
    pub fn diversity(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.sum()).collect()
    }
}

/// RCA of a dense export matrix (countries in rows, products in columns).
///
/// Rows of countries with no exports and columns of products nobody
/// exports are all zero.
pub fn rca_from_exports(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(
            "export values must be finite and nonnegative".into(),
        ));
    }
    let row_totals: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
    let col_totals: Vec<f64> = x.column_iter().map(|c| c.sum()).collect();
    let total: f64 = row_totals.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("total world trade is zero".into()));
    }
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |c, p| {
        let (row, col) = (row_totals[c], col_totals[p]);
        if row == 0.0 || col == 0.0 {
            0.0
        } else {
            (x[(c, p)] / row) / (col / total)
        }
    }))
}

pub fn compute_rca(panel: &ExportPanel, year: i32) -> Result<RcaMatrix> {
    let x = panel
        .year_matrix(year)
        .ok_or_else(|| Error::InvalidInput(format!("year {year} absent from export panel")))?;
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput(format!(
            "all export values are zero in {year}"
        )));
    }
    Ok(RcaMatrix {
        year,
        values: rca_from_exports(&x)?,
    })
}

/// M = 1 where RCA is strictly above `tau`.
pub fn threshold_advantage(rca: &RcaMatrix, tau: f64) -> Result<AdvantageMatrix> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "RCA threshold must be positive, got {tau}"
        )));
    }
    Ok(AdvantageMatrix {
        span: YearSpan::single(rca.year),
        values: rca.values.map(|v| if v > tau { 1.0 } else { 0.0 }),
    })
}

/// Per-year binary advantage matrices for every year of `span`.
pub fn yearly_advantage(
    panel: &ExportPanel,
    span: YearSpan,
    tau: f64,
) -> Result<Vec<AdvantageMatrix>> {
    span.years()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|year| threshold_advantage(&compute_rca(panel, year)?, tau))
        .collect()
}

/// Entrywise mean of the yearly binary matrices over `span`.
pub fn average_advantage(panel: &ExportPanel, span: YearSpan, tau: f64) -> Result<AdvantageMatrix> {
    if span.is_empty() {
        return Err(Error::InvalidInput("empty year range".into()));
    }
    mean_advantage(&yearly_advantage(panel, span, tau)?)
}

/// Entrywise mean of already computed advantage matrices.
pub fn mean_advantage(yearly: &[AdvantageMatrix]) -> Result<AdvantageMatrix> {
    let first = yearly
        .first()
        .ok_or_else(|| Error::InvalidInput("no advantage matrices to average".into()))?;
    let mut sum = DMatrix::zeros(first.values.nrows(), first.values.ncols());
    for m in yearly {
        if m.values.shape() != sum.shape() {
            return Err(Error::InvalidInput(
                "advantage matrices have different shapes".into(),
            ));
        }
        sum += &m.values;
    }
    let span = YearSpan {
        start: yearly.iter().map(|m| m.span.start).min().unwrap(),
        end: yearly.iter().map(|m| m.span.end).max().unwrap(),
    };
    Ok(AdvantageMatrix {
        span,
        values: sum / yearly.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ExportEntry;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn diagonal_specialisation() {
        let r = rca_from_exports(&dmatrix![10.0, 0.0; 0.0, 10.0]).unwrap();
        assert!(close(&r, &dmatrix![2.0, 0.0; 0.0, 2.0], 1e-15));
    }

    #[test]
    fn equal_entries_give_unit_rca() {
        let r = rca_from_exports(&DMatrix::from_element(3, 4, 7.0)).unwrap();
        assert!(r.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn mixed_two_by_two() {
        let r = rca_from_exports(&dmatrix![6.0, 2.0; 2.0, 6.0]).unwrap();
        assert!(close(&r, &dmatrix![1.5, 0.5; 0.5, 1.5], 1e-15));
    }

    #[test]
    fn zero_rows_and_columns() {
        let r = rca_from_exports(&dmatrix![0.0, 0.0; 3.0, 0.0; 1.0, 0.0]).unwrap();
        assert!(r.row(0).iter().all(|&v| v == 0.0));
        assert!(r.column(1).iter().all(|&v| v == 0.0));
        assert!(rca_from_exports(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let rca = RcaMatrix {
            year: 2010,
            values: dmatrix![2.0, 0.0; 0.0, 2.0],
        };
        let m = threshold_advantage(&rca, 1.0).unwrap();
        assert_eq!(m.values, dmatrix![1.0, 0.0; 0.0, 1.0]);

        let at_one = RcaMatrix {
            year: 2010,
            values: dmatrix![1.0],
        };
        assert_eq!(threshold_advantage(&at_one, 1.0).unwrap().values[(0, 0)], 0.0);

        let half = RcaMatrix {
            year: 2010,
            values: dmatrix![0.6, 0.4],
        };
        assert_eq!(
            threshold_advantage(&half, 0.5).unwrap().values,
            dmatrix![1.0, 0.0]
        );
        assert!(threshold_advantage(&half, 0.0).is_err());
    }

    fn panel_from(years: &[(i32, DMatrix<f64>)]) -> ExportPanel {
        let mut entries = Vec::new();
        for (year, x) in years {
            for c in 0..x.nrows() {
                for p in 0..x.ncols() {
                    entries.push(ExportEntry {
                        country: format!("C{c}"),
                        product: format!("P{p}"),
                        year: *year,
                        value: x[(c, p)],
                    });
                }
            }
        }
        ExportPanel::new(entries, None).unwrap()
    }

    #[test]
    fn average_of_constant_matrix() {
        let x = dmatrix![10.0, 1.0; 1.0, 10.0];
        let panel = panel_from(&[(2000, x.clone()), (2001, x.clone()), (2002, x)]);
        let avg = average_advantage(&panel, YearSpan::new(2000, 2002).unwrap(), 1.0).unwrap();
        assert_eq!(avg.values, dmatrix![1.0, 0.0; 0.0, 1.0]);
        assert!(avg.is_binary());
    }

    #[test]
    fn average_counts_fraction_of_years() {
        let on = dmatrix![10.0, 1.0; 1.0, 10.0];
        let off = dmatrix![1.0, 10.0; 10.0, 1.0];
        let years: Vec<_> = (1995..=2010)
            .map(|y| (y, if y % 2 == 0 { on.clone() } else { off.clone() }))
            .collect();
        let panel = panel_from(&years);
        let avg = average_advantage(&panel, YearSpan::new(1995, 2010).unwrap(), 1.0).unwrap();
        assert_eq!(avg.span.len(), 16);
        assert!(avg.values.iter().all(|&v| v == 0.5));
        assert!(avg.majority_vote().values.iter().all(|&v| v == 0.0));
        assert!(average_advantage(&panel, YearSpan::new(1990, 1995).unwrap(), 1.0).is_err());
    }

    #[test]
    fn compute_rca_missing_year() {
        let panel = panel_from(&[(2000, dmatrix![1.0])]);
        assert!(compute_rca(&panel, 2001).is_err());
        let zero = panel_from(&[(2000, dmatrix![0.0, 0.0])]);
        assert!(compute_rca(&zero, 2000).is_err());
    }

    proptest! {
        #[test]
        fn raising_tau_never_adds_advantage(
            vals in proptest::collection::vec(0.0f64..5.0, 12),
            lo in 0.1f64..3.0,
            bump in 0.0f64..2.0,
        ) {
            let rca = RcaMatrix { year: 0, values: DMatrix::from_vec(3, 4, vals) };
            let a = threshold_advantage(&rca, lo).unwrap();
            let b = threshold_advantage(&rca, lo + bump).unwrap();
            prop_assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| y <= x));
        }
    }
}
