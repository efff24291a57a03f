//! Problem model: the scalar recurrence
//!
//! ```text
//! y(t+n) + a_{n-1}(t) y(t+n-1) + ... + a_0(t) y(t) = g(t, y(t+m-1)),   t = 0..N-1
//! ```
//!
//! with `n` multipoint conditions `sum_k B_k x(k) = 0`, where
//! `x(t) = (y(t), ..., y(t+n-1))` is the companion state. Time is 0-based
//! throughout; component `j` of `x(k)` is `y(k + j)`.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError, ScalarField};
use crate::linalg;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("a_0({t}) is zero; the companion matrix is singular")]
    ZeroLeadingCoefficient { t: usize },
    #[error("boundary conditions are dependent: [B_0 .. B_N] has rank {rank} < {n}")]
    DependentBoundary { rank: usize, n: usize },
    #[error("time index {t} out of range 0..{limit}")]
    TimeOutOfRange { t: usize, limit: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("grid function is not a sliding window: x({t})[{j}] differs from x({})[{}] by {diff:e}", t + 1, j - 1)]
    Overlap { t: usize, j: usize, diff: f64 },
    #[error("cannot parse nonlinearity: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// The nonlinearity `g(t, x) = scale(t) * expr(t, x)`; `scale` defaults to 1.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    source: String,
    expr: Expr,
    scale: Option<Vec<f64>>,
}

impl Nonlinearity {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(Nonlinearity {
            source: source.trim().to_string(),
            expr: expr::parse(source)?,
            scale: None,
        })
    }

    /// Multiplies `g(t, .)` by `scale[t]`.
    pub fn with_scale(mut self, scale: Vec<f64>) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn scale(&self) -> Option<&[f64]> {
        self.scale.as_deref()
    }

    pub fn eval(&self, t: usize, x: f64) -> Result<f64, EvalError> {
        let v = self.expr.eval(t as f64, x)?;
        Ok(match &self.scale {
            Some(s) => s[t] * v,
            None => v,
        })
    }

    pub fn is_identically_zero(&self) -> bool {
        self.expr.is_identically_zero()
            || self.scale.as_ref().is_some_and(|s| s.iter().all(|&v| v == 0.0))
    }
}

impl ScalarField for Nonlinearity {
    fn value(&self, t: usize, x: f64) -> Result<f64, EvalError> {
        self.eval(t, x)
    }

    fn time_dependent(&self) -> bool {
        self.expr.depends_on_t()
            || self
                .scale
                .as_ref()
                .is_some_and(|s| s.windows(2).any(|w| w[0] != w[1]))
    }
}

/// A fully validated boundary value problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    n: usize,
    horizon: usize,
    lag: usize,
    coeffs: Vec<Vec<f64>>,
    boundary: Vec<DMatrix<f64>>,
    g: Nonlinearity,
}

impl ProblemSpec {
    /// Builds and validates a problem.
    ///
    /// `coeffs[j][t] = a_j(t)` for `j < n`, `t < horizon`; `boundary` holds
    /// `B_0 ..= B_N`.
    pub fn new(
        n: usize,
        horizon: usize,
        lag: usize,
        coeffs: Vec<Vec<f64>>,
        boundary: Vec<DMatrix<f64>>,
        g: Nonlinearity,
    ) -> Result<Self, ProblemError> {
        if n == 0 {
            return Err(ProblemError::Invalid("order n must be at least 1".into()));
        }
        if horizon < 3 {
            return Err(ProblemError::Invalid(format!(
                "horizon N must be at least 3, got {horizon}"
            )));
        }
        if lag == 0 || lag > n {
            return Err(ProblemError::Invalid(format!(
                "lag m must satisfy 1 <= m <= n = {n}, got {lag}"
            )));
        }
        if coeffs.len() != n || coeffs.iter().any(|row| row.len() != horizon) {
            return Err(ProblemError::Invalid(format!(
                "coefficient table must be {n} rows of length {horizon}"
            )));
        }
        if coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ProblemError::Invalid("non-finite coefficient".into()));
        }
        if let Some(t) = coeffs[0].iter().position(|&v| v == 0.0) {
            return Err(ProblemError::ZeroLeadingCoefficient { t });
        }
        if boundary.len() != horizon + 1 || boundary.iter().any(|b| b.shape() != (n, n)) {
            return Err(ProblemError::Invalid(format!(
                "expected {} boundary matrices of shape {n}x{n}",
                horizon + 1
            )));
        }
        if boundary.iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(ProblemError::Invalid("non-finite boundary entry".into()));
        }
        if let Some(s) = g.scale() {
            if s.len() != horizon || s.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::Invalid(format!(
                    "g_scale must hold {horizon} finite values"
                )));
            }
        }
        let spec = ProblemSpec {
            n,
            horizon,
            lag,
            coeffs,
            boundary,
            g,
        };
        let rank = spec.boundary_rank(linalg::DEFAULT_RANK_TOL);
        if rank < n {
            return Err(ProblemError::DependentBoundary { rank, n });
        }
        Ok(spec)
    }

    /// Rank of `[B_0, ..., B_N]` after normalizing each row to unit length,
    /// so the decision does not depend on how the conditions are scaled.
    pub fn boundary_rank(&self, rank_tol: f64) -> usize {
        let n = self.n;
        let cols = n * (self.horizon + 1);
        let mut aug = DMatrix::zeros(n, cols);
        for (k, b) in self.boundary.iter().enumerate() {
            aug.view_mut((0, k * n), (n, n)).copy_from(b);
        }
        for mut row in aug.row_iter_mut() {
            let big = row.amax();
            if big > 0.0 {
                row /= big;
                let norm = row.norm();
                row /= norm;
            }
        }
        let sigma = linalg::singular_values(&aug);
        let scale = sigma.first().copied().unwrap_or(0.0);
        if scale == 0.0 {
            return 0;
        }
        n - linalg::nullity_of(&sigma, n, rank_tol, scale).min(n)
    }

    /// Order `n`.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Horizon `N`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Lag index `m` (1-based, as in `y(t+m-1)`).
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn coeff(&self, j: usize, t: usize) -> f64 {
        self.coeffs[j][t]
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn boundary(&self) -> &[DMatrix<f64>] {
        &self.boundary
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.g
    }

    /// Same linear data with a different nonlinearity.
    pub fn with_nonlinearity(&self, g: Nonlinearity) -> Result<Self, ProblemError> {
        ProblemSpec::new(
            self.n,
            self.horizon,
            self.lag,
            self.coeffs.clone(),
            self.boundary.clone(),
            g,
        )
    }

    /// `g(t, x)` for an integer time in `0..N`.
    pub fn g(&self, t: usize, x: f64) -> Result<f64, EvalError> {
        self.g.eval(t, x)
    }

    /// All time indices of the recurrence, `0..N`.
    pub fn times(&self) -> Vec<usize> {
        (0..self.horizon).collect()
    }

    /// Companion matrix `A(t)`.
    pub fn companion(&self, t: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -self.coeffs[j][t];
        }
        a
    }

    /// `A(t) x + f(t, x)` where `f` is zero except `g(t, x_m)` in the last row.
    pub fn to_companion(&self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        if t >= self.horizon {
            return Err(ProblemError::TimeOutOfRange {
                t,
                limit: self.horizon,
            });
        }
        if x.len() != self.n {
            return Err(ProblemError::Length {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = self.companion(t) * x;
        out[self.n - 1] += self.g(t, x[self.lag - 1])?;
        Ok(out)
    }

    /// Windows `y` into `x(t) = (y(t), ..., y(t+n-1))`, `t = 0..=N`.
    pub fn scalar_to_grid(&self, y: &ScalarTrajectory) -> Result<GridFunction, ProblemError> {
        let expected = self.horizon + self.n;
        if y.len() != expected {
            return Err(ProblemError::Length {
                expected,
                got: y.len(),
            });
        }
        Ok(GridFunction::from_fn(self.n, self.horizon + 1, |t, j| y[t + j]))
    }

    /// Inverse of [`scalar_to_grid`](Self::scalar_to_grid). Rejects grids
    /// whose overlapping entries differ by more than `tol`.
    pub fn grid_to_scalar(
        &self,
        x: &GridFunction,
        tol: f64,
    ) -> Result<ScalarTrajectory, ProblemError> {
        let n = self.n;
        if x.len() != self.horizon + 1 || x.dim() != n {
            return Err(ProblemError::Length {
                expected: self.horizon + 1,
                got: x.len(),
            });
        }
        for t in 0..self.horizon {
            for j in 1..n {
                let diff = (x[t + 1][j - 1] - x[t][j]).abs();
                if diff > tol {
                    return Err(ProblemError::Overlap { t, j, diff });
                }
            }
        }
        Ok(self.grid_to_scalar_unchecked(x))
    }

    /// Reads `y(t) = x(t)_0` for `t <= N` and the tail from `x(N)`.
    pub fn grid_to_scalar_unchecked(&self, x: &GridFunction) -> ScalarTrajectory {
        let mut y: Vec<f64> = (0..=self.horizon).map(|t| x[t][0]).collect();
        y.extend((1..self.n).map(|j| x[self.horizon][j]));
        ScalarTrajectory(y)
    }

    /// Per-equation residuals `y(t+n) + sum_j a_j(t) y(t+j) - g(t, y(t+m-1))`.
    pub fn recurrence_residuals(&self, y: &ScalarTrajectory) -> Result<Vec<f64>, ProblemError> {
        self.check_len(y)?;
        (0..self.horizon)
            .map(|t| {
                let lin: f64 = y[t + self.n]
                    + (0..self.n)
                        .map(|j| self.coeffs[j][t] * y[t + j])
                        .sum::<f64>();
                Ok(lin - self.g(t, y[t + self.lag - 1])?)
            })
            .collect()
    }

    /// Residuals of the `n` scalar conditions `sum_k sum_j b_ij(k) y(k+j)`.
    pub fn boundary_residuals(&self, y: &ScalarTrajectory) -> Result<Vec<f64>, ProblemError> {
        self.check_len(y)?;
        Ok((0..self.n)
            .map(|i| {
                self.boundary
                    .iter()
                    .enumerate()
                    .map(|(k, b)| (0..self.n).map(|j| b[(i, j)] * y[k + j]).sum::<f64>())
                    .sum()
            })
            .collect())
    }

    /// `sum_k B_k x(k)` for a grid function on `0..=N`.
    pub fn boundary_map(&self, x: &GridFunction) -> DVector<f64> {
        self.boundary
            .iter()
            .zip(x.values())
            .fold(DVector::zeros(self.n), |acc, (b, xk)| acc + b * xk)
    }

    fn check_len(&self, y: &ScalarTrajectory) -> Result<(), ProblemError> {
        let expected = self.horizon + self.n;
        if y.len() != expected {
            return Err(ProblemError::Length {
                expected,
                got: y.len(),
            });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let file: ProblemFile = serde_json::from_str(text)?;
        file.into_spec()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            n: self.n,
            horizon: self.horizon,
            m: self.lag,
            a: self
                .coeffs
                .iter()
                .map(|row| {
                    if row.iter().all(|&v| v.to_bits() == row[0].to_bits()) {
                        Coefficient::Constant(row[0])
                    } else {
                        Coefficient::Table(row.clone())
                    }
                })
                .collect(),
            b: self
                .boundary
                .iter()
                .map(|b| {
                    MatrixRepr::Rows(
                        (0..self.n)
                            .map(|i| (0..self.n).map(|j| b[(i, j)]).collect())
                            .collect(),
                    )
                })
                .collect(),
            g: self.g.source().to_string(),
            g_scale: self.g.scale().map(<[f64]>::to_vec),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serializes")
    }
}

/// A coefficient row: a constant broadcast over `t`, or a full table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Table(Vec<f64>),
}

/// An `n x n` matrix as a list of rows or as a flat row-major list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRepr {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

/// On-disk JSON problem schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub m: usize,
    pub a: Vec<Coefficient>,
    #[serde(rename = "B")]
    pub b: Vec<MatrixRepr>,
    pub g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_scale: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<ProblemSpec, ProblemError> {
        let n = self.n;
        let coeffs = self
            .a
            .into_iter()
            .map(|c| match c {
                Coefficient::Constant(v) => vec![v; self.horizon],
                Coefficient::Table(row) => row,
            })
            .collect();
        let boundary = self
            .b
            .into_iter()
            .enumerate()
            .map(|(k, m)| match m {
                MatrixRepr::Rows(rows) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(ProblemError::Invalid(format!("B[{k}] is not {n}x{n}")));
                    }
                    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
                }
                MatrixRepr::Flat(vals) => {
                    if vals.len() != n * n {
                        return Err(ProblemError::Invalid(format!(
                            "B[{k}] must have {} entries",
                            n * n
                        )));
                    }
                    Ok(DMatrix::from_row_slice(n, n, &vals))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut g = Nonlinearity::parse(&self.g)?;
        if let Some(scale) = self.g_scale {
            g = g.with_scale(scale);
        }
        ProblemSpec::new(n, self.horizon, self.m, coeffs, boundary, g)
    }
}

/// A sequence of `n`-vectors on a time grid: `0..=N` for elements of `X`,
/// `0..N` for elements of `Z`. The norm is the sup over `t` of the
/// Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    values: Vec<DVector<f64>>,
}

impl GridFunction {
    pub fn zeros(n: usize, len: usize) -> Self {
        GridFunction {
            n,
            values: vec![DVector::zeros(n); len],
        }
    }

    /// Builds `x(t)[j] = f(t, j)`.
    pub fn from_fn(n: usize, len: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        GridFunction {
            n,
            values: (0..len)
                .map(|t| DVector::from_fn(n, |j, _| f(t, j)))
                .collect(),
        }
    }

    /// Panics if the vectors do not share a dimension.
    pub fn from_values(values: Vec<DVector<f64>>) -> Self {
        let n = values.first().map_or(0, |v| v.len());
        assert!(
            values.iter().all(|v| v.len() == n),
            "grid function vectors must share a dimension"
        );
        GridFunction { n, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Dimension `n` of each value.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Component `j` (0-based) at every time.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridFunction {
            n: self.n,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Self {
        assert_eq!(self.len(), other.len(), "grid length mismatch");
        GridFunction {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    /// `sup_t |self(t) - other(t)|`.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.axpy(-1.0, other).sup_norm()
    }

    /// Flattened `[x(0); x(1); ...]`.
    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n * self.len(),
            self.values.iter().flat_map(|v| v.iter().copied()),
        )
    }

    pub fn from_flat(n: usize, flat: &DVector<f64>) -> Self {
        assert_eq!(flat.len() % n.max(1), 0, "flat length not a multiple of n");
        GridFunction::from_fn(n, flat.len() / n, |t, j| flat[t * n + j])
    }
}

impl Index<usize> for GridFunction {
    type Output = DVector<f64>;

    fn index(&self, t: usize) -> &DVector<f64> {
        &self.values[t]
    }
}

impl IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, t: usize) -> &mut DVector<f64> {
        &mut self.values[t]
    }
}

impl Serialize for GridFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = self.values.iter().map(|v| v.as_slice()).collect();
        rows.serialize(s)
    }
}

/// Scalar unknowns `y(0), ..., y(N+n-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarTrajectory(pub Vec<f64>);

impl ScalarTrajectory {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_distance(&self, other: &ScalarTrajectory) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for ScalarTrajectory {
    type Output = f64;

    fn index(&self, t: usize) -> &f64 {
        &self.0[t]
    }
}

impl fmt::Display for ScalarTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, v) in self.0.iter().enumerate() {
            writeln!(f, "{t},{v}")?;
        }
        Ok(())
    }
}
