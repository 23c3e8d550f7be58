//! Product-level poverty: the export-share weighted product poverty index
//! (PPI), the poverty reduction potential PRP = 1 - PPI, and Eigenpoverty,
//! the Perron vector of the PRP-scaled product-space weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ingest::{ExportPanel, PovertyPanel};
use crate::product_space::PhiMatrix;
use crate::rca::{self, AdvantageMatrix};
use crate::{Error, Result, YearSpan};

/// Per-product PPI; `None` marks products without an advantaged producer
/// that has poverty data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPovertyVector {
    pub ppi: Vec<Option<f64>>,
}

impl ProductPovertyVector {
    pub fn len(&self) -> usize {
        self.ppi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppi.is_empty()
    }

    pub fn prp(&self) -> Vec<Option<f64>> {
        self.ppi.iter().map(|p| p.map(|v| 1.0 - v)).collect()
    }

    /// PRP with undefined products set to 1, the input expected by
    /// [`build_phi_star`].
    pub fn prp_filled(&self) -> Vec<f64> {
        self.ppi.iter().map(|p| p.map_or(1.0, |v| 1.0 - v)).collect()
    }
}

/// PPI from a dense export matrix, an advantage matrix of the same shape and
/// per-country headcounts.
///
/// Countries without a headcount or without exports drop out of both the
/// weighted sum and its normalizer.
pub fn ppi_from_parts(
    exports: &DMatrix<f64>,
    m: &DMatrix<f64>,
    headcounts: &[Option<f64>],
) -> Result<ProductPovertyVector> {
    let (nc, np) = exports.shape();
    if m.shape() != (nc, np) || headcounts.len() != nc {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: exports {nc}x{np}, advantage {}x{}, {} headcounts",
            m.nrows(),
            m.ncols(),
            headcounts.len()
        )));
    }
    let totals: Vec<f64> = exports.row_iter().map(|r| r.sum()).collect();
    let usable: Vec<(usize, f64)> = (0..nc)
        .filter_map(|c| match headcounts[c] {
            Some(h) if totals[c] > 0.0 => Some((c, h)),
            _ => None,
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidInput(
            "no country has both trade and poverty data".into(),
        ));
    }
    let ppi = (0..np)
        .map(|p| {
            let mut weighted = 0.0;
            let mut q = 0.0;
            for &(c, h) in &usable {
                let w = m[(c, p)] * exports[(c, p)] / totals[c];
                weighted += w * h;
                q += w;
            }
            (q > 0.0).then(|| weighted / q)
        })
        .collect();
    Ok(ProductPovertyVector { ppi })
}

/// PPI of `year` using that year's export shares and headcounts.
pub fn compute_ppi(
    panel: &ExportPanel,
    m: &AdvantageMatrix,
    poverty: &PovertyPanel,
    year: i32,
) -> Result<ProductPovertyVector> {
    let x = panel
        .year_matrix(year)
        .ok_or_else(|| Error::InvalidInput(format!("year {year} absent from export panel")))?;
    if !poverty.has_year(year) {
        return Err(Error::InvalidInput(format!(
            "year {year} absent from poverty panel"
        )));
    }
    let h = poverty.headcounts(panel.countries(), year);
    ppi_from_parts(&x, &m.values, &h)
}

/// Per-product mean over years, skipping the years where the product is
/// undefined.
pub fn mean_ppi(yearly: &[ProductPovertyVector]) -> Result<ProductPovertyVector> {
    let n = yearly
        .first()
        .ok_or_else(|| Error::InvalidInput("empty year range".into()))?
        .len();
    if yearly.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("PPI vectors differ in length".into()));
    }
    let ppi = (0..n)
        .map(|p| {
            let defined: Vec<f64> = yearly.iter().filter_map(|v| v.ppi[p]).collect();
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
        })
        .collect();
    Ok(ProductPovertyVector { ppi })
}

/// Mean PPI over `span` with advantage thresholded at `tau` in each year.
pub fn average_ppi(
    panel: &ExportPanel,
    poverty: &PovertyPanel,
    span: YearSpan,
    tau: f64,
) -> Result<ProductPovertyVector> {
    if span.is_empty() {
        return Err(Error::InvalidInput("empty year range".into()));
    }
    let yearly = span
        .years()
        .map(|year| {
            let m = rca::threshold_advantage(&rca::compute_rca(panel, year)?, tau)?;
            compute_ppi(panel, &m, poverty, year)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_ppi(&yearly)
}

/// Scales row p of φ by PRP_p.
pub fn build_phi_star(phi: &PhiMatrix, prp: &[f64]) -> Result<DMatrix<f64>> {
    let n = phi.values.nrows();
    if phi.values.ncols() != n || prp.len() != n {
        return Err(Error::InvalidInput(format!(
            "phi is {}x{} but {} PRP values were given",
            n,
            phi.values.ncols(),
            prp.len()
        )));
    }
    if let Some(v) = prp.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("PRP value {v} outside [0, 1]")));
    }
    let mut star = phi.values.clone();
    for (mut row, &w) in star.row_iter_mut().zip(prp) {
        row *= w;
    }
    Ok(star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Stop when successive iterates differ by less than this in L1.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight of the uniform matrix mixed into Φ*. Any positive value makes
    /// the matrix irreducible, so the component restriction is skipped.
    pub damping: f64,
    /// Solve on the transpose of Φ* (left eigenvector).
    pub transpose: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 10_000,
            damping: 0.0,
            transpose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenpovertyVector {
    /// Perron vector, nonnegative and summing to one.
    pub e_prime: Vec<f64>,
    /// Eigenpoverty, `1 - e_prime`.
    pub e: Vec<f64>,
    /// Dominant eigenvalue of the solved matrix.
    pub eigenvalue: f64,
    /// Products that took part in the iteration.
    pub in_component: Vec<bool>,
    pub iterations: usize,
    /// L1 norm of `A e' - eigenvalue e'` on the solved block.
    pub residual: f64,
}

impl EigenpovertyVector {
    /// Proportionality constant of `E' = λ Φ* E'`.
    pub fn lambda(&self) -> f64 {
        1.0 / self.eigenvalue
    }
}

/// Result of [`power_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector {
    pub vector: DVector<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Perron vector of a nonnegative square matrix, L1-normalized.
///
/// Iterates on `A + sI` with `s` half the largest row sum: the shift leaves
/// the eigenvectors unchanged and makes the Perron root strictly dominant
/// even when `A` is periodic. Starts from the uniform vector.
pub fn power_iteration(a: &DMatrix<f64>, tolerance: f64, max_iterations: usize) -> Result<PerronVector> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidInput("power iteration needs a nonempty square matrix".into()));
    }
    if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("matrix must be finite and nonnegative".into()));
    }
    let max_row = a.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    if max_row == 0.0 {
        return Err(Error::Computation("no positive eigenvalue: matrix is zero".into()));
    }
    let shift = 0.5 * max_row;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut next = DVector::zeros(n);
    let mut diff = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        a.mul_to(&x, &mut next);
        next.axpy(shift, &x, 1.0);
        let norm = next.sum();
        next /= norm;
        diff = (&next - &x).lp_norm(1);
        std::mem::swap(&mut x, &mut next);
        iterations += 1;
        if diff < tolerance {
            break;
        }
    }
    let ax = a * &x;
    let eigenvalue = ax.sum();
    let residual = (&ax - eigenvalue * &x).lp_norm(1);
    if diff >= tolerance {
        return Err(Error::Computation(format!(
            "power iteration did not converge in {max_iterations} iterations \
             (last step {diff:.3e}, residual {residual:.3e})"
        )));
    }
    if !(eigenvalue > 0.0) {
        return Err(Error::Computation("no positive eigenvalue".into()));
    }
    Ok(PerronVector {
        vector: x,
        eigenvalue,
        iterations,
        residual,
    })
}

/// Nodes of the largest connected component of the undirected graph with
/// an edge wherever `a[(i, j)] > 0` or `a[(j, i)] > 0`. Ties go to the
/// component holding the lowest index.
pub fn largest_component(a: &DMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    let mut label = vec![usize::MAX; n];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        label[start] = start;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for v in 0..n {
                if label[v] == usize::MAX && (a[(u, v)] > 0.0 || a[(v, u)] > 0.0) {
                    label[v] = start;
                    members.push(v);
                }
            }
        }
        if members.len() > best.len() {
            best = members;
        }
    }
    best.sort_unstable();
    best
}

/// Eigenpoverty of every product from the PRP-adjusted weight matrix Φ*.
///
/// Without damping, the iteration runs on the largest connected component;
/// products outside it get `e' = 0` and therefore `e = 1`.
pub fn solve_eigenpoverty(phi_star: &DMatrix<f64>, opts: &EigenOptions) -> Result<EigenpovertyVector> {
    let n = phi_star.nrows();
    if n == 0 || phi_star.ncols() != n {
        return Err(Error::InvalidInput("Φ* must be a nonempty square matrix".into()));
    }
    if !(0.0..=1.0).contains(&opts.damping) {
        return Err(Error::InvalidInput(format!(
            "damping must lie in [0, 1], got {}",
            opts.damping
        )));
    }
    if phi_star.iter().all(|&v| v == 0.0) {
        return Err(Error::Computation("no positive eigenvalue: Φ* is zero".into()));
    }
    let mut a = if opts.transpose {
        phi_star.transpose()
    } else {
        phi_star.clone()
    };
    let members: Vec<usize> = if opts.damping > 0.0 {
        let eps = opts.damping;
        a *= 1.0 - eps;
        a.add_scalar_mut(eps / n as f64);
        (0..n).collect()
    } else {
        largest_component(&a)
    };
    let sub = a.select_rows(&members).select_columns(&members);
    let perron = power_iteration(&sub, opts.tolerance, opts.max_iterations)?;

    let mut e_prime = vec![0.0; n];
    let mut in_component = vec![false; n];
    for (k, &p) in members.iter().enumerate() {
        e_prime[p] = perron.vector[k];
        in_component[p] = true;
    }
    let e = e_prime.iter().map(|v| 1.0 - v).collect();
    Ok(EigenpovertyVector {
        e_prime,
        e,
        eigenvalue: perron.eigenvalue,
        in_component,
        iterations: perron.iterations,
        residual: perron.residual,
    })
}

/// Per-product mean of yearly Eigenpoverty values.
pub fn mean_eigenpoverty(yearly: &[EigenpovertyVector]) -> Result<Vec<f64>> {
    let n = yearly
        .first()
        .ok_or_else(|| Error::InvalidInput("no Eigenpoverty vectors to average".into()))?
        .e
        .len();
    if yearly.iter().any(|v| v.e.len() != n) {
        return Err(Error::InvalidInput("Eigenpoverty vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|p| yearly.iter().map(|v| v.e[p]).sum::<f64>() / yearly.len() as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn single_producer() {
        // share 0.3 of the country's basket
        let x = dmatrix![3.0, 7.0];
        let m = dmatrix![1.0, 0.0];
        let v = ppi_from_parts(&x, &m, &[Some(0.5)]).unwrap();
        assert_eq!(v.ppi, vec![Some(0.5), None]);
    }

    #[test]
    fn two_producers() {
        // both have share 0.2 in product 0
        let x = dmatrix![2.0, 8.0; 1.0, 4.0];
        let m = dmatrix![1.0, 0.0; 1.0, 0.0];
        let v = ppi_from_parts(&x, &m, &[Some(0.8), Some(0.2)]).unwrap();
        assert!((v.ppi[0].unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(v.ppi[1], None);
        let prp = v.prp_filled();
        assert!((prp[0] - 0.5).abs() < 1e-15);
        assert_eq!(prp[1], 1.0);
    }

    #[test]
    fn poverty_missing_countries_are_excluded() {
        let x = dmatrix![1.0, 1.0; 1.0, 1.0];
        let m = dmatrix![1.0, 1.0; 1.0, 0.0];
        let v = ppi_from_parts(&x, &m, &[None, Some(0.4)]).unwrap();
        assert_eq!(v.ppi, vec![Some(0.4), None]);
        assert!(ppi_from_parts(&x, &m, &[None, None]).is_err());
    }

    #[test]
    fn mean_skips_undefined() {
        let years = [
            ProductPovertyVector { ppi: vec![Some(0.4), Some(0.2), None] },
            ProductPovertyVector { ppi: vec![Some(0.4), Some(0.6), None] },
            ProductPovertyVector { ppi: vec![Some(0.4), None, None] },
        ];
        let avg = mean_ppi(&years).unwrap();
        assert!((avg.ppi[0].unwrap() - 0.4).abs() < 1e-15);
        assert!((avg.ppi[1].unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(avg.ppi[2], None);
        assert!(mean_ppi(&[]).is_err());
    }

    #[test]
    fn phi_star_scaling() {
        let phi = PhiMatrix { values: dmatrix![0.0, 0.5, 0.5; 0.5, 0.0, 0.5; 0.5, 0.5, 0.0] };
        assert_eq!(build_phi_star(&phi, &[1.0, 1.0, 1.0]).unwrap(), phi.values);
        let star = build_phi_star(&phi, &[0.8, 0.0, 1.0]).unwrap();
        assert_eq!(star.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.4, 0.4]);
        assert!(star.row(1).iter().all(|&v| v == 0.0));
        assert!(build_phi_star(&phi, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn two_node_closed_form() {
        // eigenvalue sqrt(0.5), eigenvector (1, sqrt(0.5)) / (1 + sqrt(0.5))
        let star = dmatrix![0.0, 1.0; 0.5, 0.0];
        let ev = solve_eigenpoverty(&star, &EigenOptions::default()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((ev.eigenvalue - s).abs() < 1e-10);
        assert!((ev.e_prime[0] - 1.0 / (1.0 + s)).abs() < 1e-10);
        assert!((ev.e_prime[1] - s / (1.0 + s)).abs() < 1e-10);
        assert!((ev.e_prime[0] - 0.5858).abs() < 1e-4);
        assert!((ev.e[1] - (1.0 - 0.4142)).abs() < 1e-4);
        assert!((ev.lambda() - 1.0 / s).abs() < 1e-9);
    }

    #[test]
    fn uniform_prp_on_stochastic_matrix() {
        let phi = dmatrix![0.0, 0.5, 0.5, 0.0; 0.25, 0.0, 0.25, 0.5; 0.5, 0.5, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0];
        let star = phi * 0.7;
        let ev = solve_eigenpoverty(&star, &EigenOptions::default()).unwrap();
        for v in &ev.e_prime {
            assert!((v - 0.25).abs() < 1e-10);
        }
        assert!((ev.eigenvalue - 0.7).abs() < 1e-10);
    }

    #[test]
    fn isolated_products_get_maximal_eigenpoverty() {
        let star = dmatrix![
            0.0, 1.0, 0.0, 0.0;
            1.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 0.0
        ];
        let ev = solve_eigenpoverty(&star, &EigenOptions::default()).unwrap();
        assert_eq!(ev.in_component, vec![true, true, false, false]);
        assert_eq!(ev.e[2], 1.0);
        assert_eq!(ev.e[3], 1.0);
        assert!((ev.e_prime[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_no_positive_eigenvalue() {
        let err = solve_eigenpoverty(&DMatrix::zeros(3, 3), &EigenOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no positive eigenvalue"));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let star = dmatrix![0.0, 1.0, 0.2; 1.0, 0.0, 0.3; 0.1, 0.9, 0.0];
        let opts = EigenOptions { max_iterations: 2, ..Default::default() };
        let err = solve_eigenpoverty(&star, &opts).unwrap_err();
        assert!(err.to_string().contains("residual"));
    }

    #[test]
    fn damping_uses_every_product() {
        let star = dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 0.0];
        let opts = EigenOptions { damping: 0.15, ..Default::default() };
        let ev = solve_eigenpoverty(&star, &opts).unwrap();
        assert!(ev.in_component.iter().all(|&b| b));
        assert!(ev.e_prime[2] > 0.0);
        assert!((ev.e_prime.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_solves_left_vector() {
        let star = dmatrix![0.0, 1.0; 0.5, 0.0];
        let opts = EigenOptions { transpose: true, ..Default::default() };
        let ev = solve_eigenpoverty(&star, &opts).unwrap();
        let s = 0.5f64.sqrt();
        // left vector of [[0,1],[0.5,0]] is proportional to (s, 1)
        assert!((ev.e_prime[0] - s / (1.0 + s)).abs() < 1e-10);
    }

    #[test]
    fn yearly_mean_of_eigenpoverty() {
        let mk = |e: Vec<f64>| EigenpovertyVector {
            e_prime: e.iter().map(|v| 1.0 - v).collect(),
            e,
            eigenvalue: 1.0,
            in_component: vec![true; 2],
            iterations: 1,
            residual: 0.0,
        };
        let m = mean_eigenpoverty(&[mk(vec![0.5, 0.9]), mk(vec![0.7, 0.7])]).unwrap();
        assert!((m[0] - 0.6).abs() < 1e-15 && (m[1] - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn constant_headcount_fixes_every_ppi(
            x in proptest::collection::vec(0.0f64..100.0, 20),
            m in proptest::collection::vec(proptest::bool::ANY, 20),
            h in 0.0f64..=1.0,
        ) {
            let x = DMatrix::from_vec(4, 5, x);
            let m = DMatrix::from_vec(4, 5, m.into_iter().map(|b| b as u8 as f64).collect());
            if let Ok(v) = ppi_from_parts(&x, &m, &[Some(h); 4]) {
                for p in v.ppi.iter().flatten() {
                    prop_assert!((p - h).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn permuting_products_permutes_results(
            x in proptest::collection::vec(0.1f64..100.0, 15),
            h in proptest::collection::vec(0.0f64..0.9, 3),
            seed in 0usize..120,
        ) {
            let x = DMatrix::from_vec(3, 5, x);
            let rca = crate::rca::rca_from_exports(&x).unwrap();
            let m = rca.map(|v| if v > 1.0 { 1.0 } else { 0.0 });
            let h: Vec<Option<f64>> = h.into_iter().map(Some).collect();
            // a permutation of 0..5 picked by seed
            let mut perm: Vec<usize> = (0..5).collect();
            let mut s = seed;
            for i in (1..5).rev() {
                perm.swap(i, s % (i + 1));
                s /= i + 1;
            }
            let xp = x.select_columns(&perm);
            let mp = m.select_columns(&perm);
            let a = ppi_from_parts(&x, &m, &h).unwrap();
            let b = ppi_from_parts(&xp, &mp, &h).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                match (a.ppi[p], b.ppi[k]) {
                    (Some(u), Some(v)) => prop_assert!((u - v).abs() < 1e-14),
                    (None, None) => {}
                    _ => prop_assert!(false),
                }
            }
            // Eigenpoverty on a dense positive weight matrix built from the
            // same permutation
            let w = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 1.0 + ((i * 7 + j * 3) % 5) as f64 });
            let prp: Vec<f64> = a.prp_filled();
            let phi = crate::product_space::normalize_weights(&crate::product_space::ProximityMatrix { values: w.clone() });
            let star = build_phi_star(&phi, &prp).unwrap();
            let wp = w.select_rows(&perm).select_columns(&perm);
            let prp_p: Vec<f64> = perm.iter().map(|&p| prp[p]).collect();
            let phi_p = crate::product_space::normalize_weights(&crate::product_space::ProximityMatrix { values: wp });
            let star_p = build_phi_star(&phi_p, &prp_p).unwrap();
            let ea = solve_eigenpoverty(&star, &EigenOptions::default()).unwrap();
            let eb = solve_eigenpoverty(&star_p, &EigenOptions::default()).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                prop_assert!((ea.e[p] - eb.e[k]).abs() < 1e-10);
            }
        }
    }
}
