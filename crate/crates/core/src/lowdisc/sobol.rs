//! Sobol' points in base 2 with Joe–Kuo direction numbers.
//!
//! The embedded table `new-joe-kuo-6.1024.txt` holds the first 1024
//! dimensions of the `new-joe-kuo-6.21201` set published by S. Joe and
//! F. Y. Kuo (<https://web.maths.unsw.edu.au/~fkuo/sobol/>), in the same
//! whitespace-separated `d s a m_1 .. m_s` layout as the original file.
//! Dimension 1 is the van der Corput sequence and has no table row.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of bits carried by every coordinate.
pub const BITS: usize = 32;

/// Highest dimension supported by the embedded table.
pub const MAX_DIMENSION: usize = 1024;

const JOE_KUO_TABLE: &str = include_str!("new-joe-kuo-6.1024.txt");

/// Per-coordinate direction numbers `v_1..v_32`, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionNumbers {
    columns: Vec<[u32; BITS]>,
}

impl DirectionNumbers {
    /// The embedded Joe–Kuo table, parsed once.
    pub fn joe_kuo() -> &'static DirectionNumbers {
        static TABLE: OnceLock<DirectionNumbers> = OnceLock::new();
        TABLE.get_or_init(|| {
            Self::from_joe_kuo_str(JOE_KUO_TABLE).expect("embedded direction numbers are valid")
        })
    }

    /// Parses a table in the Joe–Kuo text layout. The first line is a header.
    ///
    /// Only the layout is checked; the numbers themselves are taken as given,
    /// so a corrupted table parses fine and fails the stratification checks.
    pub fn from_joe_kuo_str(text: &str) -> Result<Self> {
        let mut columns = vec![van_der_corput()];
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let parse = |s: &str| -> Result<u32> {
                s.parse::<u32>().map_err(|e| {
                    Error::Config(format!("direction numbers line {}: {e}", lineno + 1))
                })
            };
            if fields.len() < 3 {
                return Err(Error::Config(format!(
                    "direction numbers line {}: expected `d s a m_1..m_s`",
                    lineno + 1
                )));
            }
            let degree = parse(fields[1])? as usize;
            let coeffs = parse(fields[2])?;
            if degree == 0 || degree > BITS || fields.len() != 3 + degree {
                return Err(Error::Config(format!(
                    "direction numbers line {}: degree {degree} does not match {} initial values",
                    lineno + 1,
                    fields.len().saturating_sub(3)
                )));
            }
            let initial = fields[3..]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<_>>>()?;
            columns.push(expand(degree, coeffs, &initial));
        }
        Ok(Self { columns })
    }

    /// Number of coordinates available.
    pub fn max_dim(&self) -> usize {
        self.columns.len()
    }

    /// Direction numbers of coordinate `j` (zero-based).
    pub fn coordinate(&self, j: usize) -> &[u32; BITS] {
        &self.columns[j]
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim == 0 || dim > self.max_dim() {
            return Err(Error::UnsupportedDimension {
                requested: dim,
                max: self.max_dim(),
            });
        }
        Ok(())
    }
}

fn van_der_corput() -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = 1 << (BITS - 1 - k);
    }
    v
}

// Bratley–Fox recurrence on the primitive polynomial of `degree` whose
// interior coefficients are the bits of `coeffs`.
fn expand(degree: usize, coeffs: u32, initial: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for k in 0..degree.min(BITS) {
        v[k] = initial[k] << (BITS - 1 - k);
    }
    for k in degree..BITS {
        let mut vk = v[k - degree] ^ (v[k - degree] >> degree);
        for i in 1..degree {
            if (coeffs >> (degree - 1 - i)) & 1 == 1 {
                vk ^= v[k - i];
            }
        }
        v[k] = vk;
    }
    v
}

/// `n` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    n: usize,
    values: Vec<f64>,
}

impl PointSet {
    pub(crate) fn from_raw(dim: usize, n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dim * n);
        Self { dim, n, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinate `j` of every point, in sequence order.
    pub fn coordinate(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.dim).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Streaming Gray-code generator over one set of direction numbers.
///
/// Yields the integer coordinates `x_i` in Gray-code order, starting with
/// the zero point.
#[derive(Debug, Clone)]
pub struct SobolIter {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolIter {
    pub fn new(table: &DirectionNumbers, dim: usize) -> Result<Self> {
        table.check_dim(dim)?;
        Ok(Self::from_directions(table.columns[..dim].to_vec()))
    }

    pub(crate) fn from_directions(directions: Vec<[u32; BITS]>) -> Self {
        let dim = directions.len();
        Self {
            directions,
            state: vec![0; dim],
            index: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Advances to the next point and returns its integer coordinates.
    pub fn next_point(&mut self) -> &[u32] {
        if self.index > 0 {
            let bit = self.index.trailing_zeros() as usize;
            assert!(bit < BITS, "Sobol' sequence exhausted after 2^32 points");
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[bit];
            }
        }
        self.index += 1;
        &self.state
    }
}

/// First `n` points of the `dim`-dimensional Sobol' sequence, zero point included.
pub fn generate_sobol(dim: usize, n: usize) -> Result<PointSet> {
    generate_sobol_with(DirectionNumbers::joe_kuo(), dim, n)
}

/// As [`generate_sobol`] but over an explicit direction-number table.
pub fn generate_sobol_with(table: &DirectionNumbers, dim: usize, n: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::Config("Sobol' point count must be positive".into()));
    }
    let mut iter = SobolIter::new(table, dim)?;
    let scale = (BITS as f64).exp2().recip();
    let mut values = Vec::with_capacity(dim * n);
    for _ in 0..n {
        values.extend(iter.next_point().iter().map(|&x| x as f64 * scale));
    }
    Ok(PointSet::from_raw(dim, n, values))
}

/// True if each of the first `2^k` values lands in a distinct cell
/// `[i/2^k, (i+1)/2^k)`.
pub fn is_dyadic_stratified(values: impl IntoIterator<Item = f64>, k: u32) -> bool {
    let cells = 1usize << k;
    let mut seen = vec![false; cells];
    let mut count = 0;
    for u in values.into_iter().take(cells) {
        if !(0.0..1.0).contains(&u) {
            return false;
        }
        let cell = (u * cells as f64) as usize;
        if std::mem::replace(&mut seen[cell], true) {
            return false;
        }
        count += 1;
    }
    count == cells
}
