//! Covariance of the separated Brownian increments and its factorizations.
//!
//! With `t_j = jT/d`, the vector `(W_{t_2} - W_{t_1}, .., W_{t_d} - W_{t_1})`
//! is Gaussian with covariance `Σ_ij = t_{min(i,j)+1} - t_1`. A path
//! construction is any `A` with `AA' = Σ`; the choice only changes which
//! input coordinates carry most of the variance, which is what matters for
//! randomized QMC.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lowdisc::{DirectionNumbers, RandomizationSeed, ScrambledSobol};

/// Equidistant monitoring dates `t_j = jT/d`, `j = 1..d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    d: usize,
    maturity: f64,
}

impl TimeGrid {
    pub fn new(d: usize, maturity: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidGrid(
                "need at least one monitoring date".into(),
            ));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "maturity must be positive, got {maturity}"
            )));
        }
        Ok(Self { d, maturity })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Spacing `T/d`, which is also `t_1`.
    pub fn step(&self) -> f64 {
        self.maturity / self.d as f64
    }

    /// `t_j` for `j` in `1..=d`.
    pub fn time(&self, j: usize) -> f64 {
        debug_assert!((1..=self.d).contains(&j));
        if j == self.d {
            self.maturity
        } else {
            j as f64 * self.maturity / self.d as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.d).map(|j| self.time(j))
    }
}

/// Covariance of the `d - 1` increments after `t_1`.
pub fn build_covariance(grid: &TimeGrid) -> Result<DMatrix<f64>> {
    let d = grid.d();
    if d < 2 {
        return Err(Error::InvalidGrid(format!(
            "need d >= 2 for the separated increments, got {d}"
        )));
    }
    let t1 = grid.time(1);
    Ok(DMatrix::from_fn(d - 1, d - 1, |i, j| {
        grid.time(i.min(j) + 2) - t1
    }))
}

/// Path generation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Construction {
    /// Cholesky factor (sequential random walk).
    Std,
    /// Brownian bridge.
    BrownianBridge,
    /// Principal components of Σ.
    Pca,
    /// Principal components of a pilot-estimated gradient outer product,
    /// applied on top of PCA.
    Gpca,
}

impl Construction {
    pub const ALL: [Construction; 4] = [
        Construction::Std,
        Construction::BrownianBridge,
        Construction::Pca,
        Construction::Gpca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Construction::Std => "STD",
            Construction::BrownianBridge => "BB",
            Construction::Pca => "PCA",
            Construction::Gpca => "GPCA",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "std" | "cholesky" => Ok(Construction::Std),
            "bb" | "bridge" | "brownian-bridge" => Ok(Construction::BrownianBridge),
            "pca" => Ok(Construction::Pca),
            "gpca" => Ok(Construction::Gpca),
            other => Err(Error::Config(format!(
                "unknown path construction `{other}`"
            ))),
        }
    }
}

serde_via_str!(Construction);

/// Pilot run used by the GPCA construction.
///
/// `target(anchor, y)` evaluates the integrand at the increment vector
/// `y = AZ` (not `Z`, so it does not depend on which factor produced the
/// increments). Piecewise-smooth integrands should stay on the branch that
/// contains `anchor`; central differences around the anchor then estimate
/// the almost-everywhere gradient instead of picking up jumps.
pub struct Pilot<'a> {
    pub target: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    pub size: usize,
    pub seed: u64,
    pub fd_step: f64,
}

impl Pilot<'_> {
    pub const DEFAULT_SIZE: usize = 1024;
    pub const DEFAULT_FD_STEP: f64 = 1e-4;
}

/// A factor `A` of Σ together with the data that produced it.
#[derive(Debug, Clone)]
pub struct FactorizedCovariance {
    method: Construction,
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    rows: Vec<f64>,
    walk_step: Option<f64>,
    eigenvalues: Option<Vec<f64>>,
    rotation: Option<DMatrix<f64>>,
}

impl FactorizedCovariance {
    pub fn method(&self) -> Construction {
        self.method
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Eigenvalues of Σ in non-increasing order (PCA and GPCA).
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    /// The orthogonal `U` of `A = A_pca U` (GPCA only).
    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    /// `max |AA' - Σ|`.
    pub fn reconstruction_error(&self) -> f64 {
        (&self.a * self.a.transpose() - &self.sigma).amax()
    }

    /// Writes `AZ` into `out`.
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        if let Some(h) = self.walk_step {
            let mut acc = 0.0;
            for (o, &zi) in out.iter_mut().zip(z) {
                acc += zi;
                *o = h * acc;
            }
            return;
        }
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(n)) {
            *o = dot(row, z);
        }
    }

    /// Column `k` of `A`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.a.column(k).iter().copied().collect()
    }

    fn new(method: Construction, mut a: DMatrix<f64>, sigma: DMatrix<f64>) -> Self {
        let n = a.nrows();
        let walk_step = constant_lower_triangle(&a);
        if let Some(h) = walk_step {
            for i in 0..n {
                for j in 0..=i {
                    a[(i, j)] = h;
                }
            }
        }
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            rows.extend(a.row(i).iter());
        }
        Self {
            method,
            walk_step,
            a,
            sigma,
            rows,
            eigenvalues: None,
            rotation: None,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

// A Cholesky factor of a Brownian covariance on an even grid is a constant
// lower triangle up to rounding; AZ is then a scaled cumulative sum.
fn constant_lower_triangle(a: &DMatrix<f64>) -> Option<f64> {
    let h = a[(0, 0)];
    if h <= 0.0 {
        return None;
    }
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let expect = if j <= i { h } else { 0.0 };
            if (a[(i, j)] - expect).abs() > 1e-13 * h {
                return None;
            }
        }
    }
    Some(h)
}

/// Factorizes Σ with the requested construction.
pub fn factorize(
    sigma: &DMatrix<f64>,
    method: Construction,
    pilot: Option<&Pilot<'_>>,
) -> Result<FactorizedCovariance> {
    check_spd_shape(sigma)?;
    match method {
        Construction::Std => cholesky(sigma),
        Construction::BrownianBridge => brownian_bridge(sigma),
        Construction::Pca => pca(sigma),
        Construction::Gpca => gpca(sigma, pilot.ok_or(Error::MissingPilot)?),
    }
}

fn check_spd_shape(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() == 0 || sigma.nrows() != sigma.ncols() {
        return Err(Error::Factorization(format!(
            "expected a non-empty square matrix, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax();
    if (sigma - sigma.transpose()).amax() > 1e-14 * scale {
        return Err(Error::Factorization("matrix is not symmetric".into()));
    }
    Ok(())
}

fn cholesky(sigma: &DMatrix<f64>) -> Result<FactorizedCovariance> {
    let n = sigma.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = sigma[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::Factorization(format!(
                "matrix is not positive definite (pivot {j} = {diag:e})"
            )));
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = sigma[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(FactorizedCovariance::new(
        Construction::Std,
        l,
        sigma.clone(),
    ))
}

/// Bisection schedule of a Brownian bridge on arbitrary increasing times.
struct BridgeSchedule {
    bridge: Vec<usize>,
    left: Vec<usize>,
    right: Vec<usize>,
    left_weight: Vec<f64>,
    right_weight: Vec<f64>,
    std_dev: Vec<f64>,
}

impl BridgeSchedule {
    fn new(times: &[f64]) -> Self {
        let n = times.len();
        let mut map = vec![0usize; n];
        let mut s = BridgeSchedule {
            bridge: vec![0; n],
            left: vec![0; n],
            right: vec![0; n],
            left_weight: vec![0.0; n],
            right_weight: vec![0.0; n],
            std_dev: vec![0.0; n],
        };
        map[n - 1] = 1;
        s.bridge[0] = n - 1;
        s.std_dev[0] = times[n - 1].sqrt();
        let mut j = 0;
        for i in 1..n {
            while map[j] != 0 {
                j += 1;
            }
            let mut k = j;
            while map[k] == 0 {
                k += 1;
            }
            // j..k-1 is the next gap to fill; l is its midpoint.
            let l = j + ((k - 1 - j) >> 1);
            map[l] = i;
            s.bridge[i] = l;
            s.left[i] = j;
            s.right[i] = k;
            let t_left = if j == 0 { 0.0 } else { times[j - 1] };
            let span = times[k] - t_left;
            s.left_weight[i] = (times[k] - times[l]) / span;
            s.right_weight[i] = (times[l] - t_left) / span;
            s.std_dev[i] = ((times[l] - t_left) * (times[k] - times[l]) / span).sqrt();
            j = k + 1;
            if j >= n {
                j = 0;
            }
        }
        s
    }

    #[allow(clippy::needless_range_loop)]
    fn transform(&self, z: &[f64], path: &mut [f64]) {
        let n = z.len();
        path[n - 1] = self.std_dev[0] * z[0];
        for i in 1..n {
            let (j, k, l) = (self.left[i], self.right[i], self.bridge[i]);
            let anchor = if j == 0 {
                0.0
            } else {
                self.left_weight[i] * path[j - 1]
            };
            path[l] = anchor + self.right_weight[i] * path[k] + self.std_dev[i] * z[i];
        }
    }
}

fn brownian_bridge(sigma: &DMatrix<f64>) -> Result<FactorizedCovariance> {
    let n = sigma.nrows();
    let times: Vec<f64> = (0..n).map(|i| sigma[(i, i)]).collect();
    let scale = sigma.amax();
    for i in 0..n {
        if (i > 0 && !(times[i] > times[i - 1])) || !(times[i] > 0.0) {
            return Err(Error::Factorization(
                "Brownian bridge needs strictly increasing positive variances".into(),
            ));
        }
        for j in 0..n {
            if (sigma[(i, j)] - times[i.min(j)]).abs() > 1e-12 * scale {
                return Err(Error::Factorization(
                    "Brownian bridge needs a Brownian covariance min(t_i, t_j)".into(),
                ));
            }
        }
    }
    let schedule = BridgeSchedule::new(&times);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[k] = 1.0;
        schedule.transform(&e, &mut col);
        a.column_mut(k).copy_from_slice(&col);
    }
    Ok(FactorizedCovariance::new(
        Construction::BrownianBridge,
        a,
        sigma.clone(),
    ))
}

/// Eigenpairs sorted by non-increasing eigenvalue; ties keep input order.
/// Each eigenvector is signed so its component sum is non-negative.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        if v.sum() < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

fn pca(sigma: &DMatrix<f64>) -> Result<FactorizedCovariance> {
    let (values, vectors) = sorted_eigen(sigma);
    let smallest = *values.last().expect("non-empty");
    if !(smallest > 0.0) {
        return Err(Error::Factorization(format!(
            "matrix is not positive definite (smallest eigenvalue {smallest:e})"
        )));
    }
    let mut a = vectors;
    for (k, &lambda) in values.iter().enumerate() {
        a.column_mut(k).scale_mut(lambda.sqrt());
    }
    let mut f = FactorizedCovariance::new(Construction::Pca, a, sigma.clone());
    f.eigenvalues = Some(values);
    Ok(f)
}

fn gpca(sigma: &DMatrix<f64>, pilot: &Pilot<'_>) -> Result<FactorizedCovariance> {
    if pilot.size == 0 || !(pilot.fd_step > 0.0) {
        return Err(Error::Config(format!(
            "GPCA pilot needs a positive size and step, got size {} step {}",
            pilot.size, pilot.fd_step
        )));
    }
    let base = pca(sigma)?;
    let n = base.dim();
    let columns: Vec<Vec<f64>> = (0..n).map(|k| base.column(k)).collect();
    let mut points = ScrambledSobol::new(
        DirectionNumbers::joe_kuo(),
        n,
        RandomizationSeed::new(pilot.seed, 0),
    )?;

    let h = pilot.fd_step;
    let mut z = vec![0.0; n];
    let mut y0 = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut outer = DMatrix::<f64>::zeros(n, n);
    for _ in 0..pilot.size {
        points.next_normal(&mut z);
        base.apply(&z, &mut y0);
        for (k, col) in columns.iter().enumerate() {
            for ((yi, &y0i), &ci) in y.iter_mut().zip(&y0).zip(col) {
                *yi = y0i + h * ci;
            }
            let up = (pilot.target)(&y0, &y);
            for ((yi, &y0i), &ci) in y.iter_mut().zip(&y0).zip(col) {
                *yi = y0i - h * ci;
            }
            let down = (pilot.target)(&y0, &y);
            grad[k] = (up - down) / (2.0 * h);
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Factorization(
                "GPCA pilot produced a non-finite gradient".into(),
            ));
        }
        let g = DVector::from_column_slice(&grad);
        outer.ger(1.0, &g, &g, 1.0);
    }
    outer /= pilot.size as f64;
    let (_, rotation) = sorted_eigen(&outer);
    let a = base.a() * &rotation;
    let mut f = FactorizedCovariance::new(Construction::Gpca, a, sigma.clone());
    f.eigenvalues = base.eigenvalues;
    f.rotation = Some(rotation);
    Ok(f)
}
