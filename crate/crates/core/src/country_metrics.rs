//! Country-level poverty-reduction potentials and the rescaling transform.

use serde::{Deserialize, Serialize};

use crate::ingest::{CodeIndex, PovertyPanel};
use crate::poverty_product::ProductPovertyVector;
use crate::rca::AdvantageMatrix;
use crate::{Error, Result};

/// `log(1 + x / min positive x)`, entrywise. Zeros stay zero and the order
/// of the entries is preserved.
pub fn resc(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "resc needs finite nonnegative values, got {v}"
        )));
    }
    let floor = x
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::InvalidInput("resc of a vector with no positive entry".into()))?;
    Ok(x.iter().map(|&v| (v / floor).ln_1p()).collect())
}

/// [`resc`] over the defined entries; undefined entries stay undefined.
pub fn resc_partial(x: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let defined: Vec<f64> = x.iter().flatten().copied().collect();
    let mut scaled = resc(&defined)?.into_iter();
    Ok(x.iter().map(|v| v.map(|_| scaled.next().unwrap())).collect())
}

/// Advantage-weighted mean of `values` per country, ignoring products
/// whose value is `None`. `None` for countries with no advantage mass.
pub fn weighted_country_mean(m: &AdvantageMatrix, values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    if m.values.ncols() != values.len() {
        return Err(Error::InvalidInput(format!(
            "advantage matrix has {} products, got {} values",
            m.values.ncols(),
            values.len()
        )));
    }
    Ok(m
        .values
        .row_iter()
        .map(|row| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (w, v) in row.iter().zip(values) {
                if let Some(v) = v {
                    num += w * v;
                    den += w;
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect())
}

/// PRP of each country: mean of `1 - PPI` over its advantaged products.
pub fn country_prp(m: &AdvantageMatrix, ppi: &ProductPovertyVector) -> Result<Vec<Option<f64>>> {
    weighted_country_mean(m, &ppi.prp())
}

/// Advantage-weighted mean of `1 - E` per country, before rescaling.
pub fn country_eprp_raw(m: &AdvantageMatrix, eigenpoverty: &[f64]) -> Result<Vec<Option<f64>>> {
    let potential: Vec<Option<f64>> = eigenpoverty.iter().map(|e| Some(1.0 - e)).collect();
    weighted_country_mean(m, &potential)
}

/// EPRP of each country: [`resc`] across countries of the mean `1 - E`.
pub fn country_eprp(m: &AdvantageMatrix, eigenpoverty: &[f64]) -> Result<Vec<Option<f64>>> {
    resc_partial(&country_eprp_raw(m, eigenpoverty)?)
}

/// Rescaled headcount of `year` for the countries of `countries` that have
/// an observation.
pub fn rescaled_headcount(
    poverty: &PovertyPanel,
    year: i32,
    countries: &CodeIndex,
) -> Result<Vec<Option<f64>>> {
    if !poverty.has_year(year) {
        return Err(Error::InvalidInput(format!(
            "year {year} absent from poverty panel"
        )));
    }
    resc_partial(&poverty.headcounts(countries, year))
}

/// `(1 + Δ) · base` with Δ the relative change from `base` to `current`.
/// Algebraically equal to `current`.
pub fn stagnation(current: f64, base: f64) -> Result<f64> {
    if base == 0.0 {
        return Err(Error::InvalidInput(
            "percent change undefined for a zero base headcount".into(),
        ));
    }
    let change = (current - base) / base;
    Ok((1.0 + change) * base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryMetricsRow {
    pub country: String,
    pub prp: Option<f64>,
    pub eprp: Option<f64>,
    pub rh_base: Option<f64>,
    pub rh_target: Option<f64>,
    /// Advantage mass, i.e. product count for a binary M.
    pub diversity: f64,
    /// Country has no poverty data at all.
    pub poverty_missing: bool,
    /// Country has no advantaged product; PRP and EPRP are undefined.
    pub no_advantage: bool,
}

/// Inputs shared by all country rows.
pub struct CountryInputs<'a> {
    pub countries: &'a CodeIndex,
    pub advantage: &'a AdvantageMatrix,
    pub ppi: &'a ProductPovertyVector,
    pub eigenpoverty: &'a [f64],
    pub poverty: &'a PovertyPanel,
    pub poverty_missing: &'a [bool],
    pub base_year: i32,
    pub target_year: i32,
}

pub fn country_metrics(inputs: &CountryInputs<'_>) -> Result<Vec<CountryMetricsRow>> {
    let n = inputs.countries.len();
    if inputs.advantage.values.nrows() != n || inputs.poverty_missing.len() != n {
        return Err(Error::InvalidInput(
            "country index and advantage matrix disagree".into(),
        ));
    }
    let prp = country_prp(inputs.advantage, inputs.ppi)?;
    let eprp = country_eprp(inputs.advantage, inputs.eigenpoverty)?;
    let rh_base = rescaled_headcount(inputs.poverty, inputs.base_year, inputs.countries)?;
    let rh_target = rescaled_headcount(inputs.poverty, inputs.target_year, inputs.countries)?;
    let diversity = inputs.advantage.diversity();
    Ok((0..n)
        .map(|c| CountryMetricsRow {
            country: inputs.countries.code(c).to_string(),
            prp: prp[c],
            eprp: eprp[c],
            rh_base: rh_base[c],
            rh_target: rh_target[c],
            diversity: diversity[c],
            poverty_missing: inputs.poverty_missing[c],
            no_advantage: diversity[c] == 0.0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PovertyEntry;
    use crate::YearSpan;
    use nalgebra::{dmatrix, DMatrix};
    use proptest::prelude::*;

    fn adv(values: DMatrix<f64>) -> AdvantageMatrix {
        AdvantageMatrix {
            span: YearSpan::single(2010),
            values,
        }
    }

    #[test]
    fn resc_substitution() {
        for a in [0.01, 1.0, 37.5] {
            let r = resc(&[0.0, a, 2.0 * a]).unwrap();
            assert_eq!(r[0], 0.0);
            assert!((r[1] - 2f64.ln()).abs() < 1e-15);
            assert!((r[2] - 3f64.ln()).abs() < 1e-15);
        }
        assert!(resc(&[0.0, 0.0]).is_err());
        assert!(resc(&[]).is_err());
        assert!(resc(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn prp_examples() {
        let one = ProductPovertyVector { ppi: vec![Some(0.3)] };
        assert!((country_prp(&adv(dmatrix![1.0]), &one).unwrap()[0].unwrap() - 0.7).abs() < 1e-15);

        let two = ProductPovertyVector { ppi: vec![Some(0.2), Some(0.6)] };
        let v = country_prp(&adv(dmatrix![1.0, 1.0]), &two).unwrap();
        assert!((v[0].unwrap() - 0.6).abs() < 1e-15);

        let v = country_prp(&adv(dmatrix![1.0, 0.5]), &two).unwrap();
        assert!((v[0].unwrap() - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn prp_skips_undefined_and_flags_empty_baskets() {
        let ppi = ProductPovertyVector { ppi: vec![Some(0.2), None] };
        let v = country_prp(&adv(dmatrix![1.0, 1.0; 0.0, 1.0; 0.0, 0.0]), &ppi).unwrap();
        assert!((v[0].unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(v[1], None);
        assert_eq!(v[2], None);
    }

    #[test]
    fn eprp_of_identical_baskets_is_log_two() {
        let m = adv(dmatrix![1.0, 0.0, 1.0; 1.0, 0.0, 1.0; 1.0, 0.0, 1.0]);
        let v = country_eprp(&m, &[0.7, 0.9, 0.8]).unwrap();
        for x in v {
            assert!((x.unwrap() - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn eprp_zero_for_fully_poor_basket() {
        let m = adv(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let v = country_eprp(&m, &[1.0, 0.6]).unwrap();
        assert_eq!(v[0], Some(0.0));
        assert!((v[1].unwrap() - 2f64.ln()).abs() < 1e-15);
        // all raw values zero
        assert!(country_eprp(&m, &[1.0, 1.0]).is_err());
    }

    fn panel(rows: &[(&str, i32, f64)]) -> PovertyPanel {
        PovertyPanel::new(
            rows.iter()
                .map(|&(c, y, h)| PovertyEntry { country: c.into(), year: y, headcount: h })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rescaled_headcount_examples() {
        let p = panel(&[("A", 2018, 0.0), ("B", 2018, 0.01), ("C", 2018, 0.02)]);
        let idx = CodeIndex::from_codes(["A", "B", "C", "D"]);
        let rh = rescaled_headcount(&p, 2018, &idx).unwrap();
        assert_eq!(rh[0], Some(0.0));
        assert!((rh[1].unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((rh[2].unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(rh[3], None);

        let single = panel(&[("A", 2018, 0.3)]);
        let rh = rescaled_headcount(&single, 2018, &CodeIndex::from_codes(["A"])).unwrap();
        assert!((rh[0].unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(rescaled_headcount(&single, 2010, &CodeIndex::from_codes(["A"])).is_err());
    }

    #[test]
    fn stagnation_examples() {
        assert_eq!(stagnation(0.2, 0.4).unwrap(), 0.2);
        assert_eq!(stagnation(0.4, 0.4).unwrap(), 0.4);
        assert!(stagnation(0.5, 0.0).unwrap_err().to_string().contains("percent change undefined"));
    }

    proptest! {
        #[test]
        fn resc_preserves_order_and_zeros(x in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e6], 1..30)) {
            prop_assume!(x.iter().any(|&v| v > 0.0));
            let r = resc(&x).unwrap();
            for i in 0..x.len() {
                prop_assert_eq!(r[i] == 0.0, x[i] == 0.0);
                for j in 0..x.len() {
                    if x[i] < x[j] {
                        prop_assert!(r[i] < r[j]);
                    }
                }
            }
        }

        #[test]
        fn prp_within_basket_range(
            m in proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..1.0], 6),
            ppi in proptest::collection::vec(0.0f64..=1.0, 6),
        ) {
            let advantage = adv(DMatrix::from_vec(1, 6, m.clone()));
            let v = ProductPovertyVector { ppi: ppi.iter().copied().map(Some).collect() };
            if let Some(prp) = country_prp(&advantage, &v).unwrap()[0] {
                let held: Vec<f64> = (0..6).filter(|&p| m[p] > 0.0).map(|p| 1.0 - ppi[p]).collect();
                let lo = held.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = held.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(prp >= lo - 1e-12 && prp <= hi + 1e-12);
            }
        }

        #[test]
        fn adding_a_less_poor_product_raises_prp(
            ppi in proptest::collection::vec(0.0f64..=1.0, 5),
            extra in 0.0f64..=1.0,
        ) {
            let base = ProductPovertyVector { ppi: ppi.iter().copied().map(Some).chain([Some(extra)]).collect() };
            let without = adv(DMatrix::from_row_slice(1, 6, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]));
            let with = adv(DMatrix::from_row_slice(1, 6, &[1.0; 6]));
            let before = country_prp(&without, &base).unwrap()[0].unwrap();
            let after = country_prp(&with, &base).unwrap()[0].unwrap();
            if 1.0 - extra > before + 1e-12 {
                prop_assert!(after > before);
            }
        }

        #[test]
        fn stagnation_identity(a in 0.0f64..=1.0, b in 1e-6f64..=1.0) {
            prop_assert!((stagnation(a, b).unwrap() - a).abs() <= 1e-15);
        }
    }
}
