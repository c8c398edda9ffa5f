//! Vector fields, endomorphism fields, Higgs fields and connections in a
//! fixed flat coordinate frame `d_0, ..., d_{n-1}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::series::{ExponentVector, TruncatedSeries};
use crate::Rational;

fn sum_series(
    n: usize,
    cap: u32,
    terms: impl IntoIterator<Item = TruncatedSeries>,
) -> TruncatedSeries {
    terms
        .into_iter()
        .fold(TruncatedSeries::zero(n, cap), |acc, t| &acc + &t)
}

/// Product that skips the multiplication when either side is empty.
fn mul_or_zero(a: &TruncatedSeries, b: &TruncatedSeries) -> Option<TruncatedSeries> {
    if a.is_empty() || b.is_empty() {
        None
    } else {
        Some(a * b)
    }
}

/// `X = sum_c X^c d_c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    comps: Vec<TruncatedSeries>,
}

impl VectorField {
    pub fn new(comps: Vec<TruncatedSeries>) -> Result<Self> {
        let n = comps.len();
        for c in &comps {
            if c.num_vars() != n {
                return Err(Error::DimensionMismatch {
                    left: c.num_vars(),
                    right: n,
                });
            }
        }
        Ok(VectorField { comps })
    }

    pub fn zero(n: usize, cap: u32) -> Self {
        VectorField {
            comps: vec![TruncatedSeries::zero(n, cap); n],
        }
    }

    /// The flat frame field `d_a`.
    pub fn basis(n: usize, cap: u32, a: usize) -> Self {
        let mut v = Self::zero(n, cap);
        v.comps[a] = TruncatedSeries::one(n, cap);
        v
    }

    pub fn constant(cap: u32, values: &[Rational]) -> Self {
        let n = values.len();
        VectorField {
            comps: values
                .iter()
                .map(|v| TruncatedSeries::constant(n, cap, v.clone()))
                .collect(),
        }
    }

    /// `sum_a x^a d_a`.
    pub fn radial(n: usize, cap: u32) -> Self {
        VectorField {
            comps: (0..n)
                .map(|a| TruncatedSeries::var(n, cap, a).expect("axis in range"))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[TruncatedSeries] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<TruncatedSeries> {
        self.comps
    }

    pub fn component(&self, c: usize) -> &TruncatedSeries {
        &self.comps[c]
    }

    pub fn cap(&self) -> u32 {
        self.comps.iter().map(|c| c.cap()).min().unwrap_or(0)
    }

    pub fn valid_to(&self) -> u32 {
        self.comps.iter().map(|c| c.valid_to()).min().unwrap_or(0)
    }

    pub fn truncate(&self, degree: u32) -> Self {
        self.map(|c| c.truncate(degree))
    }

    pub fn with_valid_to(&self, degree: u32) -> Self {
        self.map(|c| c.clone().with_valid_to(degree))
    }

    pub fn map(&self, f: impl Fn(&TruncatedSeries) -> TruncatedSeries) -> Self {
        VectorField {
            comps: self.comps.iter().map(f).collect(),
        }
    }

    fn zip(
        &self,
        other: &VectorField,
        f: impl Fn(&TruncatedSeries, &TruncatedSeries) -> TruncatedSeries,
    ) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        self.map(|c| c.scale(factor))
    }

    /// `f X` for a function `f`.
    pub fn scale_series(&self, f: &TruncatedSeries) -> Result<Self> {
        check_dim(self.dim(), f.num_vars())?;
        Ok(self.map(|c| c * f))
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    /// Derivative of a function along the field: `X(f) = sum_a X^a d_a f`.
    pub fn apply(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        check_dim(self.dim(), f.num_vars())?;
        let n = self.dim();
        let mut acc = TruncatedSeries::zero(n, self.cap().min(f.cap()))
            .with_valid_to(self.valid_to().min(f.valid_to().saturating_sub(1)));
        for (a, xa) in self.comps.iter().enumerate() {
            let d = f.derivative(a)?;
            if let Some(t) = mul_or_zero(xa, &d) {
                acc = &acc + &t;
            } else {
                acc = acc.with_valid_to(d.valid_to().min(xa.valid_to()));
            }
        }
        Ok(acc)
    }

    /// Componentwise partial derivative `d_axis X` (the flat covariant derivative).
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        Ok(VectorField {
            comps: self
                .comps
                .iter()
                .map(|c| c.derivative(axis))
                .collect::<Result<_>>()?,
        })
    }

    /// Values at the origin.
    pub fn at_origin(&self) -> Vec<Rational> {
        self.comps.iter().map(|c| c.constant_term()).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.terms().all(|(e, _)| e.degree() == 0))
    }

    pub fn vanishes(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero_to(self.valid_to()))
    }

    pub fn eq_to(&self, other: &VectorField, degree: u32) -> bool {
        self.dim() == other.dim()
            && self
                .comps
                .iter()
                .zip(&other.comps)
                .all(|(a, b)| a.eq_to(b, degree))
    }

    /// Equal on all degrees valid in both fields.
    pub fn agrees_with(&self, other: &VectorField) -> bool {
        self.eq_to(other, self.valid_to().min(other.valid_to()))
    }

    /// Residual view of the field as a rank-1 tensor.
    pub fn to_tensor(&self) -> SeriesTensor {
        SeriesTensor {
            dim: self.dim(),
            rank: 1,
            data: self.comps.clone(),
        }
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .comps
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(i, c)| format!("({})*d{}", c.to_expression(), i))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

fn check_dim(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// `[X, Y]^c = X(Y^c) - Y(X^c)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    check_dim(x.dim(), y.dim())?;
    let comps = (0..x.dim())
        .map(|c| Ok(&x.apply(&y.comps[c])? - &y.apply(&x.comps[c])?))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

/// Matrix of functions acting by `(B f)^a = sum_c B^a_c f^c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndField {
    n: usize,
    entries: Vec<TruncatedSeries>,
}

impl EndField {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> TruncatedSeries) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for a in 0..n {
            for c in 0..n {
                entries.push(f(a, c));
            }
        }
        EndField { n, entries }
    }

    pub fn zero(n: usize, cap: u32) -> Self {
        Self::from_fn(n, |_, _| TruncatedSeries::zero(n, cap))
    }

    /// Builds the endomorphism whose column `c` is the image of `d_c`.
    pub fn from_columns(columns: &[VectorField]) -> Result<Self> {
        let n = columns.len();
        for col in columns {
            check_dim(col.dim(), n)?;
        }
        Ok(Self::from_fn(n, |a, c| columns[c].comps[a].clone()))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `B^row_col`.
    pub fn get(&self, row: usize, col: usize) -> &TruncatedSeries {
        &self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[TruncatedSeries] {
        &self.entries
    }

    pub fn column(&self, col: usize) -> VectorField {
        VectorField {
            comps: (0..self.n).map(|a| self.get(a, col).clone()).collect(),
        }
    }

    pub fn valid_to(&self) -> u32 {
        self.entries.iter().map(|e| e.valid_to()).min().unwrap_or(0)
    }

    pub fn map(&self, f: impl Fn(&TruncatedSeries) -> TruncatedSeries) -> Self {
        EndField {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn truncate(&self, degree: u32) -> Self {
        self.map(|e| e.truncate(degree))
    }

    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        check_dim(self.n, v.dim())?;
        let n = self.n;
        let comps = (0..n)
            .map(|a| {
                let cap = self.cap().min(v.cap());
                let valid = self.valid_to().min(v.valid_to());
                sum_series(
                    n,
                    cap,
                    (0..n).filter_map(|c| mul_or_zero(self.get(a, c), &v.comps[c])),
                )
                .with_valid_to(valid)
            })
            .collect();
        Ok(VectorField { comps })
    }

    fn cap(&self) -> u32 {
        self.entries.iter().map(|e| e.cap()).min().unwrap_or(0)
    }

    pub fn compose(&self, other: &EndField) -> Result<EndField> {
        check_dim(self.n, other.n)?;
        let n = self.n;
        let cap = self.cap().min(other.cap());
        let valid = self.valid_to().min(other.valid_to());
        Ok(Self::from_fn(n, |a, c| {
            sum_series(
                n,
                cap,
                (0..n).filter_map(|e| mul_or_zero(self.get(a, e), other.get(e, c))),
            )
            .with_valid_to(valid)
        }))
    }

    pub fn add(&self, other: &EndField) -> Result<EndField> {
        check_dim(self.n, other.n)?;
        Ok(Self::from_fn(self.n, |a, c| {
            self.get(a, c) + other.get(a, c)
        }))
    }

    pub fn sub(&self, other: &EndField) -> Result<EndField> {
        check_dim(self.n, other.n)?;
        Ok(Self::from_fn(self.n, |a, c| {
            self.get(a, c) - other.get(a, c)
        }))
    }

    pub fn scale(&self, factor: &Rational) -> EndField {
        self.map(|e| e.scale(factor))
    }

    pub fn commutator(&self, other: &EndField) -> Result<EndField> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn derivative(&self, axis: usize) -> Result<EndField> {
        Ok(EndField {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|e| e.derivative(axis))
                .collect::<Result<_>>()?,
        })
    }

    pub fn at_origin(&self) -> Matrix {
        (0..self.n)
            .map(|a| {
                (0..self.n)
                    .map(|c| self.get(a, c).constant_term())
                    .collect()
            })
            .collect()
    }

    pub fn vanishes(&self) -> bool {
        let v = self.valid_to();
        self.entries.iter().all(|e| e.is_zero_to(v))
    }

    /// Solves `B w = rhs` degree by degree, assuming `B(0)` is invertible.
    ///
    /// Each new degree of `w` is `B(0)^{-1}` applied to the part of the current
    /// residual in that degree.
    pub fn solve(&self, rhs: &VectorField) -> Result<VectorField> {
        let n = self.n;
        check_dim(n, rhs.dim())?;
        let inv = crate::linalg::inverse(&self.at_origin())
            .ok_or_else(|| Error::NotInvertible("matrix at the origin is singular".into()))?;
        let valid = self.valid_to().min(rhs.valid_to());
        let cap = valid;
        let mut w = VectorField::zero(n, cap);
        let b = self.truncate(cap);
        let rhs = rhs.truncate(cap);
        for d in 0..=valid {
            let r = rhs.sub(&b.apply(&w)?)?;
            let mut comps = w.comps.clone();
            for alpha in crate::series::monomials_of_degree(n, d) {
                let r_alpha: Vec<Rational> = r.comps.iter().map(|c| c.coeff(&alpha)).collect();
                if r_alpha.iter().all(num_traits::Zero::is_zero) {
                    continue;
                }
                let w_alpha = crate::linalg::mat_vec(&inv, &r_alpha);
                for (comp, c) in comps.iter_mut().zip(w_alpha) {
                    *comp = &*comp + &TruncatedSeries::monomial(n, cap, alpha.clone(), c);
                }
            }
            w = VectorField { comps };
        }
        Ok(w.with_valid_to(valid))
    }
}

/// A point where a residual fails to vanish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offense {
    pub index: Vec<usize>,
    pub exponent: ExponentVector,
    pub coeff: Rational,
}

impl fmt::Display for Offense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.index.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "component ({}) monomial [{}] coefficient {}",
            idx.join(","),
            self.exponent,
            crate::series::format_rational(&self.coeff)
        )
    }
}

/// Dense tensor of series with all indices running over `0..dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesTensor {
    dim: usize,
    rank: usize,
    data: Vec<TruncatedSeries>,
}

impl SeriesTensor {
    pub fn from_fn(
        dim: usize,
        rank: usize,
        mut f: impl FnMut(&[usize]) -> TruncatedSeries,
    ) -> Self {
        let data = multi_indices(dim, rank).map(|idx| f(&idx)).collect();
        SeriesTensor { dim, rank, data }
    }

    pub fn try_from_fn(
        dim: usize,
        rank: usize,
        mut f: impl FnMut(&[usize]) -> Result<TruncatedSeries>,
    ) -> Result<Self> {
        let data = multi_indices(dim, rank)
            .map(|idx| f(&idx))
            .collect::<Result<_>>()?;
        Ok(SeriesTensor { dim, rank, data })
    }

    pub fn zero(dim: usize, rank: usize, cap: u32) -> Self {
        Self::from_fn(dim, rank, |_| TruncatedSeries::zero(dim, cap))
    }

    /// Tensor of rank `outer + 1` whose last index is the component of the
    /// vector field `f(outer indices)`.
    pub fn from_fields(
        dim: usize,
        outer: usize,
        mut f: impl FnMut(&[usize]) -> Result<VectorField>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dim.pow(outer as u32 + 1));
        for idx in multi_indices(dim, outer) {
            let v = f(&idx)?;
            check_dim(v.dim(), dim)?;
            data.extend(v.comps);
        }
        Ok(SeriesTensor {
            dim,
            rank: outer + 1,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &TruncatedSeries {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: TruncatedSeries) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn components(&self) -> impl Iterator<Item = (Vec<usize>, &TruncatedSeries)> {
        multi_indices(self.dim, self.rank).zip(self.data.iter())
    }

    pub fn map(&self, f: impl Fn(&TruncatedSeries) -> TruncatedSeries) -> Self {
        SeriesTensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn sub(&self, other: &SeriesTensor) -> Result<SeriesTensor> {
        check_dim(self.dim, other.dim)?;
        check_dim(self.rank, other.rank)?;
        Ok(SeriesTensor {
            dim: self.dim,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &SeriesTensor) -> Result<SeriesTensor> {
        check_dim(self.dim, other.dim)?;
        check_dim(self.rank, other.rank)?;
        Ok(SeriesTensor {
            dim: self.dim,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        self.map(|s| s.scale(factor))
    }

    pub fn truncate(&self, degree: u32) -> Self {
        self.map(|s| s.truncate(degree))
    }

    /// Degree up to which every component is exact.
    pub fn valid_to(&self) -> u32 {
        self.data.iter().map(|s| s.valid_to()).min().unwrap_or(0)
    }

    /// First nonzero coefficient on the proven range, in index order.
    pub fn first_offense(&self) -> Option<Offense> {
        let v = self.valid_to();
        self.first_offense_to(v)
    }

    pub fn first_offense_to(&self, degree: u32) -> Option<Offense> {
        self.components().find_map(|(idx, s)| {
            s.first_nonzero_to(degree).map(|(e, c)| Offense {
                index: idx,
                exponent: e.clone(),
                coeff: c.clone(),
            })
        })
    }

    pub fn vanishes(&self) -> bool {
        self.first_offense().is_none()
    }

    pub fn vanishes_to(&self, degree: u32) -> bool {
        self.first_offense_to(degree).is_none()
    }
}

/// Row-major enumeration of `rank`-tuples over `0..dim`.
pub fn multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.checked_pow(rank as u32).unwrap_or(0);
    (0..total).map(move |mut k| {
        let mut idx = vec![0; rank];
        for slot in idx.iter_mut().rev() {
            *slot = k % dim;
            k /= dim;
        }
        idx
    })
}

/// `A in Omega^1 (x) End(T)`, stored as `A_ab^c` with `i_{d_a}(A)(d_b) = sum_c A_ab^c d_c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiggsField(SeriesTensor);

impl HiggsField {
    pub fn new(tensor: SeriesTensor) -> Result<Self> {
        if tensor.rank() != 3 {
            return Err(Error::Precondition(format!(
                "Higgs field needs a rank-3 tensor, got rank {}",
                tensor.rank()
            )));
        }
        Ok(HiggsField(tensor))
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> TruncatedSeries) -> Self {
        HiggsField(SeriesTensor::from_fn(n, 3, |i| f(i[0], i[1], i[2])))
    }

    pub fn zero(n: usize, cap: u32) -> Self {
        HiggsField(SeriesTensor::zero(n, 3, cap))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> &TruncatedSeries {
        self.0.get(&[a, b, c])
    }

    pub fn tensor(&self) -> &SeriesTensor {
        &self.0
    }

    pub fn valid_to(&self) -> u32 {
        self.0.valid_to()
    }

    pub fn cap(&self) -> u32 {
        self.0.data.iter().map(|s| s.cap()).min().unwrap_or(0)
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        HiggsField(self.0.scale(factor))
    }

    pub fn truncate(&self, degree: u32) -> Self {
        HiggsField(self.0.truncate(degree))
    }

    /// The endomorphism `Y -> i_{d_a}(A)(Y)`, with entries `(A_a)^c_b = A_ab^c`.
    pub fn slice(&self, a: usize) -> EndField {
        EndField::from_fn(self.dim(), |c, b| self.get(a, b, c).clone())
    }

    /// `X o Y = i_X(A)(Y)`, i.e. `(X o Y)^c = sum_{a,b} X^a Y^b A_ab^c`.
    pub fn apply(&self, x: &VectorField, y: &VectorField) -> Result<VectorField> {
        let n = self.dim();
        check_dim(x.dim(), n)?;
        check_dim(y.dim(), n)?;
        let cap = self.cap().min(x.cap()).min(y.cap());
        let valid = self.valid_to().min(x.valid_to()).min(y.valid_to());
        let mut coeffs: Vec<Vec<(usize, TruncatedSeries)>> = vec![Vec::new(); n];
        for a in 0..n {
            if x.comps[a].is_empty() {
                continue;
            }
            for b in 0..n {
                let Some(xy) = mul_or_zero(&x.comps[a], &y.comps[b]) else {
                    continue;
                };
                for (c, slot) in coeffs.iter_mut().enumerate() {
                    if !self.get(a, b, c).is_empty() {
                        slot.push((a * n + b, xy.clone()));
                    }
                }
            }
        }
        let comps = coeffs
            .into_iter()
            .enumerate()
            .map(|(c, terms)| {
                sum_series(
                    n,
                    cap,
                    terms
                        .into_iter()
                        .map(|(ab, xy)| &xy * self.get(ab / n, ab % n, c)),
                )
                .with_valid_to(valid)
            })
            .collect();
        Ok(VectorField { comps })
    }

    /// `A_ab^c - A_ba^c`; vanishes iff the multiplication is commutative.
    pub fn asymmetry(&self) -> SeriesTensor {
        SeriesTensor::from_fn(self.dim(), 3, |i| {
            self.get(i[0], i[1], i[2]) - self.get(i[1], i[0], i[2])
        })
    }
}

/// Christoffel symbols `Gamma_ab^c` in the flat frame:
/// `nabla_{d_a} d_b = sum_c Gamma_ab^c d_c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connection(SeriesTensor);

impl Connection {
    pub fn new(tensor: SeriesTensor) -> Result<Self> {
        if tensor.rank() != 3 {
            return Err(Error::Precondition(format!(
                "Christoffel symbols need a rank-3 tensor, got rank {}",
                tensor.rank()
            )));
        }
        Ok(Connection(tensor))
    }

    /// The flat frame connection, `Gamma = 0`.
    pub fn flat_frame(n: usize, cap: u32) -> Self {
        Connection(SeriesTensor::zero(n, 3, cap))
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> TruncatedSeries) -> Self {
        Connection(SeriesTensor::from_fn(n, 3, |i| f(i[0], i[1], i[2])))
    }

    /// `Gamma + lambda A`: a point on the pencil through `self` with direction `A`.
    pub fn shifted(&self, higgs: &HiggsField, lambda: &Rational) -> Result<Connection> {
        check_dim(self.dim(), higgs.dim())?;
        Ok(Connection(self.0.add(&higgs.0.scale(lambda))?))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> &TruncatedSeries {
        self.0.get(&[a, b, c])
    }

    pub fn tensor(&self) -> &SeriesTensor {
        &self.0
    }

    /// True when all Christoffel symbols are identically zero.
    pub fn is_flat_frame(&self) -> bool {
        self.0.data.iter().all(|s| s.is_empty())
    }

    /// `(nabla_X Y)^c = X(Y^c) + sum_{a,b} X^a Y^b Gamma_ab^c`.
    pub fn covariant_derivative(&self, x: &VectorField, y: &VectorField) -> Result<VectorField> {
        check_dim(self.dim(), x.dim())?;
        let plain = VectorField::new(
            y.comps
                .iter()
                .map(|yc| x.apply(yc))
                .collect::<Result<Vec<_>>>()?,
        )?;
        if self.is_flat_frame() {
            return Ok(plain);
        }
        let gamma = HiggsField(self.0.clone());
        plain.add(&gamma.apply(x, y)?)
    }

    /// Covariant derivative along the frame field `d_a`.
    pub fn along(&self, a: usize, y: &VectorField) -> Result<VectorField> {
        let n = self.dim();
        let cap = y.cap();
        self.covariant_derivative(&VectorField::basis(n, cap, a), y)
    }

    /// `T_ab^c = Gamma_ab^c - Gamma_ba^c`.
    pub fn torsion(&self) -> SeriesTensor {
        SeriesTensor::from_fn(self.dim(), 3, |i| {
            self.get(i[0], i[1], i[2]) - self.get(i[1], i[0], i[2])
        })
    }

    /// `R_abc^d`, the `d_d` component of `R(d_a, d_b) d_c`:
    /// `d_a Gamma_bc^d - d_b Gamma_ac^d + sum_e (Gamma_bc^e Gamma_ae^d - Gamma_ac^e Gamma_be^d)`.
    pub fn curvature(&self) -> Result<SeriesTensor> {
        let n = self.dim();
        SeriesTensor::try_from_fn(n, 4, |i| {
            let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
            let mut r = &self.get(b, c, d).derivative(a)? - &self.get(a, c, d).derivative(b)?;
            for e in 0..n {
                if let Some(t) = mul_or_zero(self.get(b, c, e), self.get(a, e, d)) {
                    r = &r + &t;
                }
                if let Some(t) = mul_or_zero(self.get(a, c, e), self.get(b, e, d)) {
                    r = &r - &t;
                }
            }
            Ok(r)
        })
    }
}

/// Splits the curvature of `base + lambda A` as `lambda R1 + lambda^2 R2`.
///
/// `R1_abc^d = d_a A_bc^d - d_b A_ac^d + sum_e (Gamma_bc^e A_ae^d + A_bc^e Gamma_ae^d -
/// Gamma_ac^e A_be^d - A_ac^e Gamma_be^d)` and `R2 = [A_a, A_b]`. The base must be
/// flat on its proven range.
pub fn pencil_curvature_split(
    higgs: &HiggsField,
    base: &Connection,
) -> Result<(SeriesTensor, SeriesTensor)> {
    let n = higgs.dim();
    check_dim(n, base.dim())?;
    let base_curv = base.curvature()?;
    if let Some(off) = base_curv.first_offense() {
        return Err(Error::Precondition(format!(
            "base connection is not flat: {off}"
        )));
    }
    let frame = base.is_flat_frame();
    let r1 = SeriesTensor::try_from_fn(n, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut r = &higgs.get(b, c, d).derivative(a)? - &higgs.get(a, c, d).derivative(b)?;
        if !frame {
            for e in 0..n {
                for (l, rgt, sign) in [
                    (base.get(b, c, e), higgs.get(a, e, d), true),
                    (higgs.get(b, c, e), base.get(a, e, d), true),
                    (base.get(a, c, e), higgs.get(b, e, d), false),
                    (higgs.get(a, c, e), base.get(b, e, d), false),
                ] {
                    if let Some(t) = mul_or_zero(l, rgt) {
                        r = if sign { &r + &t } else { &r - &t };
                    }
                }
            }
        }
        Ok(r)
    })?;
    let slices: Vec<EndField> = (0..n).map(|a| higgs.slice(a)).collect();
    let mut r2 = SeriesTensor::zero(n, 4, higgs.cap());
    for a in 0..n {
        for b in 0..n {
            let comm = slices[a].commutator(&slices[b])?;
            for c in 0..n {
                for d in 0..n {
                    r2.set(&[a, b, c, d], comm.get(d, c).clone());
                }
            }
        }
    }
    Ok((r1, r2))
}
