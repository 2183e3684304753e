//! Panel observations, parameter sets and the linear index shared by every
//! other module.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default trimming interval applied to the linear index before any link
/// evaluation.
pub const DEFAULT_BOUNDS: IndexBounds = IndexBounds { lo: -30.0, hi: 30.0 };

/// Closed interval the linear index is clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexBounds {
    pub lo: f64,
    pub hi: f64,
}

impl IndexBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "index bounds require finite lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn clamp(&self, z: f64) -> f64 {
        clamp_index(z, (self.lo, self.hi))
    }

    #[inline]
    pub fn contains(&self, z: f64) -> bool {
        z >= self.lo && z <= self.hi
    }
}

impl Default for IndexBounds {
    fn default() -> Self {
        DEFAULT_BOUNDS
    }
}

/// `min(max(z, lo), hi)`.
#[inline]
pub fn clamp_index(z: f64, bounds: (f64, f64)) -> f64 {
    debug_assert!(bounds.0 < bounds.1);
    z.max(bounds.0).min(bounds.1)
}

/// Orders labels numerically when both parse as numbers, lexicographically
/// otherwise.
pub fn label_cmp(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Balanced binary-response panel: `y` is N×T, `x` is N×T×d_beta.
///
/// Storage is row-major with the unit index outermost, so one unit's
/// outcomes are contiguous and `x(i, t)` is a contiguous `d_beta` slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    n: usize,
    t: usize,
    d_beta: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    unit_ids: Vec<String>,
    time_ids: Vec<String>,
}

impl PanelData {
    /// Builds a panel with default labels `0..N` and `0..T`.
    pub fn new(n: usize, t: usize, d_beta: usize, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let unit_ids = (0..n).map(|i| i.to_string()).collect();
        let time_ids = (0..t).map(|s| s.to_string()).collect();
        Self::with_ids(n, t, d_beta, y, x, unit_ids, time_ids)
    }

    pub fn with_ids(
        n: usize,
        t: usize,
        d_beta: usize,
        y: Vec<f64>,
        x: Vec<f64>,
        unit_ids: Vec<String>,
        time_ids: Vec<String>,
    ) -> Result<Self> {
        if y.len() != n * t {
            return Err(Error::Dimension {
                axis: "y (N*T)",
                expected: n * t,
                found: y.len(),
            });
        }
        if x.len() != n * t * d_beta {
            return Err(Error::Dimension {
                axis: "x (N*T*d_beta)",
                expected: n * t * d_beta,
                found: x.len(),
            });
        }
        if unit_ids.len() != n {
            return Err(Error::Dimension {
                axis: "unit_ids",
                expected: n,
                found: unit_ids.len(),
            });
        }
        if time_ids.len() != t {
            return Err(Error::Dimension {
                axis: "time_ids",
                expected: t,
                found: time_ids.len(),
            });
        }
        if let Some(pos) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidPanel(format!(
                "y at unit {}, period {} is {}, expected 0 or 1",
                pos / t.max(1),
                pos % t.max(1),
                y[pos]
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel(format!(
                "non-finite regressor at flat position {pos}"
            )));
        }
        for w in time_ids.windows(2) {
            if label_cmp(&w[0], &w[1]) != Ordering::Less {
                return Err(Error::InvalidPanel(format!(
                    "time ids must be strictly increasing, found {:?} before {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            n,
            t,
            d_beta,
            y,
            x,
            unit_ids,
            time_ids,
        })
    }

    /// Builds a panel from closures over `(i, t)` and `(i, t, k)`.
    pub fn from_fn(
        n: usize,
        t: usize,
        d_beta: usize,
        mut y: impl FnMut(usize, usize) -> f64,
        mut x: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut ys = Vec::with_capacity(n * t);
        let mut xs = Vec::with_capacity(n * t * d_beta);
        for i in 0..n {
            for s in 0..t {
                ys.push(y(i, s));
                for k in 0..d_beta {
                    xs.push(x(i, s, k));
                }
            }
        }
        Self::new(n, t, d_beta, ys, xs)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn d_beta(&self) -> usize {
        self.d_beta
    }

    #[inline]
    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.y[i * self.t + t]
    }

    /// Outcomes of unit `i` over all periods.
    #[inline]
    pub fn y_unit(&self, i: usize) -> &[f64] {
        &self.y[i * self.t..(i + 1) * self.t]
    }

    #[inline]
    pub fn x(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.t + t) * self.d_beta;
        &self.x[start..start + self.d_beta]
    }

    pub fn y_raw(&self) -> &[f64] {
        &self.y
    }

    pub fn x_raw(&self) -> &[f64] {
        &self.x
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    /// `y` as an N×T matrix.
    pub fn y_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.t, &self.y)
    }

    /// Sub-panel keeping the listed units (in the given order) and every period.
    pub fn select_units(&self, units: &[usize]) -> Result<Self> {
        self.subpanel(units, &(0..self.t).collect::<Vec<_>>())
    }

    /// Sub-panel keeping every unit and the listed periods.
    pub fn select_times(&self, times: &[usize]) -> Result<Self> {
        self.subpanel(&(0..self.n).collect::<Vec<_>>(), times)
    }

    fn subpanel(&self, units: &[usize], times: &[usize]) -> Result<Self> {
        if let Some(&i) = units.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidArgument(format!("unit index {i} out of range")));
        }
        if let Some(&s) = times.iter().find(|&&s| s >= self.t) {
            return Err(Error::InvalidArgument(format!("time index {s} out of range")));
        }
        let mut y = Vec::with_capacity(units.len() * times.len());
        let mut x = Vec::with_capacity(units.len() * times.len() * self.d_beta);
        for &i in units {
            for &s in times {
                y.push(self.y(i, s));
                x.extend_from_slice(self.x(i, s));
            }
        }
        Self::with_ids(
            units.len(),
            times.len(),
            self.d_beta,
            y,
            x,
            units.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            times.iter().map(|&s| self.time_ids[s].clone()).collect(),
        )
    }
}

/// Heterogeneous slopes `b` (N×d_beta), loadings `gamma` (N×d_f) and
/// factors `f` (T×d_f).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub b: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

impl ParameterSet {
    pub fn new(b: DMatrix<f64>, gamma: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        if gamma.nrows() != b.nrows() {
            return Err(Error::Dimension {
                axis: "gamma rows (N)",
                expected: b.nrows(),
                found: gamma.nrows(),
            });
        }
        if gamma.ncols() != f.ncols() {
            return Err(Error::Dimension {
                axis: "factor columns (d_f)",
                expected: gamma.ncols(),
                found: f.ncols(),
            });
        }
        let p = Self { b, gamma, f };
        if p.b
            .iter()
            .chain(p.gamma.iter())
            .chain(p.f.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("parameter entries must be finite".into()));
        }
        Ok(p)
    }

    pub fn zeros(n: usize, t: usize, d_beta: usize, d_f: usize) -> Self {
        Self {
            b: DMatrix::zeros(n, d_beta),
            gamma: DMatrix::zeros(n, d_f),
            f: DMatrix::zeros(t, d_f),
        }
    }

    #[inline]
    pub fn d_f(&self) -> usize {
        self.f.ncols()
    }

    #[inline]
    pub fn d_beta(&self) -> usize {
        self.b.ncols()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.f.nrows()
    }

    /// Largest absolute deviation of `(1/T) FᵀF` from the identity.
    pub fn normalization_error(&self) -> f64 {
        let d = self.d_f();
        if d == 0 {
            return 0.0;
        }
        let gram = self.f.transpose() * &self.f / self.t() as f64;
        (gram - DMatrix::<f64>::identity(d, d)).amax()
    }

    /// `θ_i = (β_iᵀ, γ_iᵀ)ᵀ`.
    pub fn theta(&self, i: usize) -> Vec<f64> {
        self.b.row(i).iter().chain(self.gamma.row(i).iter()).copied().collect()
    }

    pub(crate) fn check_against(&self, data: &PanelData) -> Result<()> {
        if self.n() != data.n() {
            return Err(Error::Dimension {
                axis: "units (N)",
                expected: data.n(),
                found: self.n(),
            });
        }
        if self.t() != data.t() {
            return Err(Error::Dimension {
                axis: "periods (T)",
                expected: data.t(),
                found: self.t(),
            });
        }
        if self.d_beta() != data.d_beta() {
            return Err(Error::Dimension {
                axis: "regressors (d_beta)",
                expected: data.d_beta(),
                found: self.d_beta(),
            });
        }
        Ok(())
    }
}

/// `z_it = x_itᵀβ_i + γ_iᵀf_t` for every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearIndex {
    pub z: DMatrix<f64>,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Index of a single cell.
#[inline]
pub fn cell_index(data: &PanelData, params: &ParameterSet, i: usize, t: usize) -> f64 {
    let mut z = dot(data.x(i, t), params.b.row(i).iter().copied());
    for k in 0..params.d_f() {
        z += params.gamma[(i, k)] * params.f[(t, k)];
    }
    z
}

pub fn linear_index(data: &PanelData, params: &ParameterSet) -> Result<LinearIndex> {
    params.check_against(data)?;
    let z = DMatrix::from_fn(data.n(), data.t(), |i, t| cell_index(data, params, i, t));
    Ok(LinearIndex { z })
}

/// Row-major nested vectors, used for JSON output.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_regressors_and_loadings_give_zero_index() {
        let data = PanelData::from_fn(3, 4, 2, |_, _| 1.0, |_, _, _| 0.0).unwrap();
        let mut p = ParameterSet::zeros(3, 4, 2, 1);
        p.b.fill(0.7);
        p.f.fill(1.3);
        let z = linear_index(&data, &p).unwrap().z;
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_product_without_factors() {
        let data = PanelData::from_fn(2, 3, 1, |_, _| 0.0, |_, _, _| 2.0).unwrap();
        let mut p = ParameterSet::zeros(2, 3, 1, 0);
        p.b.fill(0.5);
        let z = linear_index(&data, &p).unwrap().z;
        assert!(z.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = PanelData::from_fn(2, 2, 2, |_, _| 1.0, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ParameterSet::new(
            DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let z = linear_index(&data, &p).unwrap().z;
        for i in 0..2 {
            for t in 0..2 {
                let mut naive = 0.0;
                for k in 0..2 {
                    naive += data.x(i, t)[k] * p.b[(i, k)];
                }
                for k in 0..2 {
                    naive += p.gamma[(i, k)] * p.f[(t, k)];
                }
                assert!((z[(i, t)] - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_names_axis() {
        let data = PanelData::from_fn(2, 3, 1, |_, _| 0.0, |_, _, _| 1.0).unwrap();
        let p = ParameterSet::zeros(2, 4, 1, 0);
        match linear_index(&data, &p) {
            Err(Error::Dimension { axis, .. }) => assert!(axis.contains("T")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_index(50.0, (-30.0, 30.0)), 30.0);
        assert_eq!(clamp_index(0.0, (-30.0, 30.0)), 0.0);
        assert_eq!(clamp_index(-31.5, (-30.0, 30.0)), -30.0);
    }

    #[test]
    fn rejects_non_binary_outcome() {
        let err = PanelData::new(1, 2, 0, vec![0.0, 2.0], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidPanel(_)));
    }

    #[test]
    fn subpanels_keep_labels() {
        let data = PanelData::from_fn(3, 4, 1, |i, t| ((i + t) % 2) as f64, |i, t, _| (10 * i + t) as f64).unwrap();
        let sub = data.select_times(&[1, 3]).unwrap();
        assert_eq!(sub.time_ids(), &["1".to_string(), "3".to_string()]);
        assert_eq!(sub.x(2, 1), &[23.0]);
        let sub = data.select_units(&[2, 0]).unwrap();
        assert_eq!(sub.unit_ids()[0], "2");
        assert_eq!(sub.y_unit(0), data.y_unit(2));
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(z in -1e3f64..1e3, lo in -50f64..0.0, width in 1e-3f64..100.0) {
            let b = (lo, lo + width);
            prop_assert_eq!(clamp_index(clamp_index(z, b), b), clamp_index(z, b));
        }

        #[test]
        fn index_is_linear_in_slopes(a in -3f64..3.0, c in -3f64..3.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, t, db, df) = (3, 4, 2, 1);
            let data = PanelData::from_fn(n, t, db, |_, _| 0.0, |_, _, _| rng.random_range(-2.0..2.0)).unwrap();
            let gamma = DMatrix::from_fn(n, df, |_, _| rng.random_range(-1.0..1.0));
            let f = DMatrix::from_fn(t, df, |_, _| rng.random_range(-1.0..1.0));
            let b1 = DMatrix::from_fn(n, db, |_, _| rng.random_range(-1.0..1.0));
            let b2 = DMatrix::from_fn(n, db, |_, _| rng.random_range(-1.0..1.0));
            let zero_g = DMatrix::zeros(n, df);
            let z1 = linear_index(&data, &ParameterSet::new(b1.clone(), zero_g.clone(), f.clone()).unwrap()).unwrap().z;
            let z2 = linear_index(&data, &ParameterSet::new(b2.clone(), zero_g, f.clone()).unwrap()).unwrap().z;
            let zf = linear_index(&data, &ParameterSet::new(DMatrix::zeros(n, db), gamma.clone(), f.clone()).unwrap()).unwrap().z;
            let comb = ParameterSet::new(&b1 * a + &b2 * c, gamma, f).unwrap();
            let z = linear_index(&data, &comb).unwrap().z;
            let expect = z1 * a + z2 * c + zf;
            prop_assert!((z - expect).amax() < 1e-12);
        }
    }
}
