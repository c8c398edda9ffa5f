//! Truncated multivariate power series over exact rationals.
//!
//! A [`TruncatedSeries`] stores a sparse map from exponent vectors to
//! rational coefficients. Two degrees are tracked separately:
//!
//! * `cap`: no coefficient of total degree above it is ever stored;
//! * `valid_to`: coefficients up to this degree are exact. Anything between
//!   `valid_to` and `cap` is carried along but must not be trusted.
//!
//! Arithmetic takes the minimum of both degrees over its inputs, every partial
//! derivative lowers `valid_to` by one, and formal integration raises both by
//! one.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::Rational;

/// Exponent vector of a monomial `x^e = x0^e0 * x1^e1 * ...`.
///
/// The derived ordering is lexicographic, which is the canonical iteration
/// and serialization order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExponentVector(Vec<u32>);

impl ExponentVector {
    pub fn new(exponents: Vec<u32>) -> Self {
        ExponentVector(exponents)
    }

    pub fn zero(num_vars: usize) -> Self {
        ExponentVector(vec![0; num_vars])
    }

    pub fn unit(num_vars: usize, axis: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[axis] = 1;
        ExponentVector(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, axis: usize) -> u32 {
        self.0[axis]
    }

    pub fn add(&self, other: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other`, or `None` when some entry would go negative.
    pub fn checked_sub(&self, other: &ExponentVector) -> Option<ExponentVector> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(ExponentVector)
    }

    fn with_axis(&self, axis: usize, value: u32) -> ExponentVector {
        let mut e = self.0.clone();
        e[axis] = value;
        ExponentVector(e)
    }

    /// Product of factorials of the entries.
    pub fn factorial(&self) -> BigInt {
        self.0
            .iter()
            .map(|&k| factorial(k))
            .fold(BigInt::one(), |acc, f| acc * f)
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub(crate) fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Enumerates all exponent vectors of the given total degree, lexicographically.
pub fn monomials_of_degree(num_vars: usize, degree: u32) -> Vec<ExponentVector> {
    fn rec(num_vars: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<ExponentVector>) {
        if prefix.len() + 1 == num_vars {
            prefix.push(left);
            out.push(ExponentVector(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(num_vars, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if num_vars == 0 {
        if degree == 0 {
            out.push(ExponentVector(Vec::new()));
        }
        return out;
    }
    rec(
        num_vars,
        degree,
        &mut Vec::with_capacity(num_vars),
        &mut out,
    );
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    num_vars: usize,
    cap: u32,
    valid_to: u32,
    coeffs: BTreeMap<ExponentVector, Rational>,
}

impl TruncatedSeries {
    pub fn zero(num_vars: usize, cap: u32) -> Self {
        TruncatedSeries {
            num_vars,
            cap,
            valid_to: cap,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, cap: u32, value: Rational) -> Self {
        Self::monomial(num_vars, cap, ExponentVector::zero(num_vars), value)
    }

    pub fn one(num_vars: usize, cap: u32) -> Self {
        Self::constant(num_vars, cap, Rational::one())
    }

    /// The coordinate function `x^axis`.
    pub fn var(num_vars: usize, cap: u32, axis: usize) -> Result<Self> {
        if axis >= num_vars {
            return Err(Error::AxisOutOfRange { axis, num_vars });
        }
        Ok(Self::monomial(
            num_vars,
            cap,
            ExponentVector::unit(num_vars, axis),
            Rational::one(),
        ))
    }

    pub fn monomial(num_vars: usize, cap: u32, exponent: ExponentVector, coeff: Rational) -> Self {
        assert_eq!(exponent.len(), num_vars, "exponent length mismatch");
        let mut s = Self::zero(num_vars, cap);
        if exponent.degree() <= cap && !coeff.is_zero() {
            s.coeffs.insert(exponent, coeff);
        }
        s
    }

    /// Builds a series from terms, summing duplicates and dropping anything
    /// above `cap`.
    pub fn from_terms<I>(num_vars: usize, cap: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (ExponentVector, Rational)>,
    {
        let mut s = Self::zero(num_vars, cap);
        for (e, c) in terms {
            assert_eq!(e.len(), num_vars, "exponent length mismatch");
            if e.degree() <= cap {
                s.add_term(e, c);
            }
        }
        s
    }

    fn add_term(&mut self, e: ExponentVector, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn valid_to(&self) -> u32 {
        self.valid_to
    }

    /// Same coefficients, with `valid_to` lowered to `degree` if it is smaller.
    pub fn with_valid_to(mut self, degree: u32) -> Self {
        self.valid_to = self.valid_to.min(degree);
        self
    }

    /// Re-truncates to `degree`: lowers the cap and drops higher terms.
    pub fn truncate(&self, degree: u32) -> Self {
        let cap = self.cap.min(degree);
        TruncatedSeries {
            num_vars: self.num_vars,
            cap,
            valid_to: self.valid_to.min(cap),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(e, _)| e.degree() <= cap)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Raises the cap (keeping `valid_to`), so the series can take part in
    /// higher-order arithmetic. Exact polynomials can also raise `valid_to`
    /// via [`TruncatedSeries::exact_to`].
    pub fn with_cap(&self, cap: u32) -> Self {
        let mut s = self.truncate(cap);
        s.cap = cap;
        s
    }

    /// Declares the stored coefficients exact up to `degree` (used for
    /// polynomials, which are exact at every order).
    pub fn exact_to(&self, degree: u32) -> Self {
        let mut s = self.with_cap(degree.max(self.cap));
        s.valid_to = degree.min(s.cap);
        s
    }

    pub fn coeff(&self, e: &ExponentVector) -> Rational {
        self.coeffs.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&ExponentVector::zero(self.num_vars))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVector, &Rational)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    /// True when no coefficient is stored at all.
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest total degree among stored terms.
    pub fn max_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|e| e.degree()).max()
    }

    /// First (lexicographic) stored monomial of degree `<= degree`.
    pub fn first_nonzero_to(&self, degree: u32) -> Option<(&ExponentVector, &Rational)> {
        self.coeffs.iter().find(|(e, _)| e.degree() <= degree)
    }

    pub fn is_zero_to(&self, degree: u32) -> bool {
        self.first_nonzero_to(degree).is_none()
    }

    /// Zero on every degree up to `valid_to`.
    pub fn vanishes(&self) -> bool {
        self.is_zero_to(self.valid_to)
    }

    pub fn eq_to(&self, other: &TruncatedSeries, degree: u32) -> bool {
        self.num_vars == other.num_vars
            && self
                .checked_sub(other)
                .map(|d| d.is_zero_to(degree))
                .unwrap_or(false)
    }

    /// Equal on all degrees that are valid in both operands.
    pub fn agrees_with(&self, other: &TruncatedSeries) -> bool {
        self.eq_to(other, self.valid_to.min(other.valid_to))
    }

    fn check_dims(&self, other: &TruncatedSeries) -> Result<()> {
        if self.num_vars != other.num_vars {
            return Err(Error::DimensionMismatch {
                left: self.num_vars,
                right: other.num_vars,
            });
        }
        Ok(())
    }

    fn combine_meta(&self, other: &TruncatedSeries) -> (u32, u32) {
        let cap = self.cap.min(other.cap);
        let valid = self.valid_to.min(other.valid_to).min(cap);
        (cap, valid)
    }

    pub fn checked_add(&self, other: &TruncatedSeries) -> Result<Self> {
        self.check_dims(other)?;
        let (cap, valid_to) = self.combine_meta(other);
        let mut out = self.truncate(cap);
        out.valid_to = valid_to;
        for (e, c) in &other.coeffs {
            if e.degree() <= cap {
                out.add_term(e.clone(), c.clone());
            }
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &TruncatedSeries) -> Result<Self> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &TruncatedSeries) -> Result<Self> {
        self.check_dims(other)?;
        let (cap, valid_to) = self.combine_meta(other);
        let mut out = Self::zero(self.num_vars, cap);
        out.valid_to = valid_to;
        if self.is_empty() || other.is_empty() {
            return Ok(out);
        }
        let right: Vec<(u32, &ExponentVector, &Rational)> = other
            .coeffs
            .iter()
            .map(|(e, c)| (e.degree(), e, c))
            .collect();
        for (ea, ca) in &self.coeffs {
            let da = ea.degree();
            if da > cap {
                continue;
            }
            for (db, eb, cb) in &right {
                if da + db <= cap {
                    out.add_term(ea.add(eb), ca * *cb);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            let mut z = Self::zero(self.num_vars, self.cap);
            z.valid_to = self.valid_to;
            return z;
        }
        TruncatedSeries {
            num_vars: self.num_vars,
            cap: self.cap,
            valid_to: self.valid_to,
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e.clone(), c * factor))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries {
            num_vars: self.num_vars,
            cap: self.cap,
            valid_to: self.valid_to,
            coeffs: self.coeffs.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    /// Non-negative integer power.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.num_vars, self.cap).with_valid_to(self.valid_to);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Partial derivative along `axis`. The result is valid one degree less.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.num_vars {
            return Err(Error::AxisOutOfRange {
                axis,
                num_vars: self.num_vars,
            });
        }
        let mut out = Self::zero(self.num_vars, self.cap);
        out.valid_to = self.valid_to.saturating_sub(1);
        for (e, c) in &self.coeffs {
            let k = e.get(axis);
            if k > 0 {
                out.coeffs.insert(
                    e.with_axis(axis, k - 1),
                    c * Rational::from_integer(k.into()),
                );
            }
        }
        Ok(out)
    }

    /// Multiplicative inverse of a series with nonzero constant term.
    pub fn invert_unit(&self) -> Result<Self> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(Error::NonUnit);
        }
        let inv_c0 = c0.recip();
        // 1/(c0 + r) = (1/c0) * sum_k (-r/c0)^k; r^k has order >= k.
        let mut r = self.clone();
        r.coeffs.remove(&ExponentVector::zero(self.num_vars));
        let q = r.scale(&(-&inv_c0));
        let mut term = Self::one(self.num_vars, self.cap).with_valid_to(self.valid_to);
        let mut sum = term.clone();
        for _ in 0..self.cap {
            term = &term * &q;
            if term.is_empty() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum.scale(&inv_c0))
    }

    /// `exp` of a series without constant term.
    pub fn exp(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonZeroConstant);
        }
        let mut term = Self::one(self.num_vars, self.cap).with_valid_to(self.valid_to);
        let mut sum = term.clone();
        for k in 1..=self.cap {
            term = (&term * self).scale(&Rational::new(BigInt::one(), BigInt::from(k)));
            if term.is_empty() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum)
    }

    /// Evaluates the constant term of `d^e f` at the origin, i.e. `e! * coeff_e`.
    pub fn taylor_coefficient(&self, e: &ExponentVector) -> Rational {
        self.coeff(e) * Rational::from_integer(e.factorial())
    }

    /// Canonical text form: one `e0,...,ek:num/den` line per stored term, in
    /// lexicographic exponent order.
    pub fn to_canonical_text(&self) -> String {
        self.canonical_lines().join("\n")
    }

    pub fn canonical_lines(&self) -> Vec<String> {
        self.coeffs
            .iter()
            .map(|(e, c)| format!("{}:{}/{}", e, c.numer(), c.denom()))
            .collect()
    }

    /// Parses lines written by [`TruncatedSeries::canonical_lines`]. Integer
    /// coefficients may omit the denominator.
    pub fn from_canonical_lines<S: AsRef<str>>(
        num_vars: usize,
        cap: u32,
        lines: &[S],
    ) -> Result<Self> {
        let mut s = Self::zero(num_vars, cap);
        for line in lines {
            let line = line.as_ref().trim();
            if line.is_empty() {
                continue;
            }
            let (exp, coeff) = line
                .split_once(':')
                .ok_or_else(|| Error::Format(format!("missing ':' in term `{line}`")))?;
            let exps: Vec<u32> = if exp.trim().is_empty() {
                Vec::new()
            } else {
                exp.split(',')
                    .map(|t| t.trim().parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Format(format!("bad exponent in `{line}`")))?
            };
            if exps.len() != num_vars {
                return Err(Error::Format(format!(
                    "term `{line}` has {} exponents, expected {num_vars}",
                    exps.len()
                )));
            }
            let c = parse_rational(coeff.trim())
                .ok_or_else(|| Error::Format(format!("bad coefficient in `{line}`")))?;
            let e = ExponentVector(exps);
            if e.degree() > cap {
                return Err(Error::Format(format!("term `{line}` exceeds cap {cap}")));
            }
            s.add_term(e, c);
        }
        Ok(s)
    }

    pub fn from_canonical_text(num_vars: usize, cap: u32, text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        Self::from_canonical_lines(num_vars, cap, &lines)
    }

    /// Expression form readable by the model parser, using `x0, x1, ...`.
    pub fn to_expression(&self) -> String {
        let names: Vec<String> = (0..self.num_vars).map(|i| format!("x{i}")).collect();
        self.to_expression_with(&names)
    }

    pub fn to_expression_with(&self, names: &[String]) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (e, c)) in self.coeffs.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || e.degree() == 0 {
                if abs.is_integer() {
                    factors.push(abs.numer().to_string());
                } else {
                    factors.push(format!("{}/{}", abs.numer(), abs.denom()));
                }
            }
            for (axis, &k) in e.as_slice().iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(names[axis].clone()),
                    _ => factors.push(format!("{}^{}", names[axis], k)),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

/// Parses `p`, `p/q`, or a plain decimal integer into a rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rational::new(n, d))
    } else {
        text.parse::<BigInt>().ok().map(Rational::from_integer)
    }
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Formal Poincaré integration of a closed 1-form `sum_a f_a dx^a`.
///
/// Returns `g` with `g(0) = 0` and `d_a g = f_a` on the common valid range.
/// Closedness `d_a f_b = d_b f_a` is checked first; the error names the first
/// offending coordinate pair and monomial.
pub fn primitive_of_closed_family(family: &[TruncatedSeries]) -> Result<TruncatedSeries> {
    let n = family.len();
    if n == 0 {
        return Err(Error::Precondition("empty 1-form".into()));
    }
    for f in family {
        if f.num_vars() != n {
            return Err(Error::DimensionMismatch {
                left: f.num_vars(),
                right: n,
            });
        }
    }
    let cap = family.iter().map(|f| f.cap()).min().unwrap_or(0);
    let valid = family.iter().map(|f| f.valid_to()).min().unwrap_or(0);
    for a in 0..n {
        for b in (a + 1)..n {
            let lhs = family[b].derivative(a)?;
            let rhs = family[a].derivative(b)?;
            let diff = lhs.checked_sub(&rhs)?;
            if valid >= 1 {
                if let Some((e, _)) = diff.first_nonzero_to(valid - 1) {
                    return Err(Error::NotClosed {
                        pair: (a, b),
                        exponent: e.to_string(),
                    });
                }
            }
        }
    }
    // g = sum over monomials c x^e in f_a of c x^(e + 1_a) / (|e| + 1).
    let mut g = TruncatedSeries::zero(n, cap + 1);
    for (a, f) in family.iter().enumerate() {
        for (e, c) in f.terms() {
            if e.degree() > cap {
                continue;
            }
            let d = e.degree() + 1;
            let mut raised = e.clone();
            raised.0[a] += 1;
            g.add_term(raised, c / Rational::from_integer(d.into()));
        }
    }
    g.valid_to = valid + 1;
    Ok(g)
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl<'a> std::ops::$trait<&'a TruncatedSeries> for &'a TruncatedSeries {
            type Output = TruncatedSeries;
            fn $method(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
                self.$checked(rhs).expect("series dimension mismatch")
            }
        }
        impl std::ops::$trait<TruncatedSeries> for TruncatedSeries {
            type Output = TruncatedSeries;
            fn $method(self, rhs: TruncatedSeries) -> TruncatedSeries {
                self.$checked(&rhs).expect("series dimension mismatch")
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl std::ops::Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        TruncatedSeries::neg(self)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O(deg {})", self.to_expression(), self.valid_to + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    fn x(n: usize, cap: u32, i: usize) -> TruncatedSeries {
        TruncatedSeries::var(n, cap, i).unwrap()
    }

    /// exp(x) built from the factorial recurrence c_{k} = c_{k-1} / k.
    fn exp_by_recurrence(n: usize, cap: u32, axis: usize) -> TruncatedSeries {
        let mut c = Rational::one();
        let mut terms = vec![(ExponentVector::zero(n), c.clone())];
        for k in 1..=cap {
            c /= Rational::from_integer(k.into());
            let mut e = ExponentVector::zero(n);
            e.0[axis] = k;
            terms.push((e, c.clone()));
        }
        TruncatedSeries::from_terms(n, cap, terms)
    }

    #[test]
    fn difference_of_squares() {
        let one = TruncatedSeries::one(1, 3);
        let x = x(1, 3, 0);
        let p = &(&one + &x) * &(&one - &x);
        let expected = &one - &(&x * &x);
        assert_eq!(p, expected);
    }

    #[test]
    fn exp_matches_factorial_recurrence_and_is_its_own_derivative() {
        let e = x(1, 3, 0).exp().unwrap();
        let oracle = exp_by_recurrence(1, 3, 0);
        assert_eq!(e, oracle);
        assert_eq!(e.coeff(&ExponentVector::new(vec![3])), q(1, 6));
        // d/dx exp = exp on the degrees that survive differentiation
        let d = e.derivative(0).unwrap();
        assert!(d.eq_to(&e, 2));
    }

    #[test]
    fn additive_inverse_is_empty() {
        let x = x(2, 4, 1);
        let s = &x + &x.neg();
        assert!(s.is_empty());
    }

    #[test]
    fn derivative_power_rule_and_validity() {
        let x0 = x(2, 4, 0);
        let x1 = x(2, 4, 1);
        let m = &(&x0 * &x0) * &x1;
        let d = m.derivative(0).unwrap();
        assert_eq!(d, (&x0 * &x1).scale(&q(2, 1)).with_valid_to(3));
        assert_eq!(m.valid_to(), 4);
        assert_eq!(d.valid_to(), 3);
        assert!(matches!(m.derivative(2), Err(Error::AxisOutOfRange { .. })));
        let z = TruncatedSeries::zero(1, 0);
        assert_eq!(z.derivative(0).unwrap().valid_to(), 0);
    }

    #[test]
    fn derivative_of_exp_drops_one_order() {
        let e4 = x(2, 4, 1).exp().unwrap();
        let d = e4.derivative(1).unwrap();
        let e3 = exp_by_recurrence(2, 3, 1);
        assert_eq!(d.valid_to(), 3);
        assert!(d.eq_to(&e3, 3));
        assert_eq!(d.truncate(3), e3);
    }

    #[test]
    fn invert_units() {
        let one = TruncatedSeries::one(1, 4);
        assert_eq!(one.invert_unit().unwrap(), one);
        let x = x(1, 4, 0);
        let inv = (&one - &x).invert_unit().unwrap();
        let geometric = TruncatedSeries::from_terms(
            1,
            4,
            (0..=4).map(|k| (ExponentVector::new(vec![k]), Rational::one())),
        );
        assert_eq!(inv, geometric);
        assert!((&inv * &(&one - &x)).eq_to(&one, 4));
        assert!(matches!(x.invert_unit(), Err(Error::NonUnit)));
    }

    #[test]
    fn primitive_examples() {
        let x0 = x(2, 4, 0);
        let x1 = x(2, 4, 1);
        let g = primitive_of_closed_family(&[x1.clone(), x0.clone()]).unwrap();
        assert_eq!(g.derivative(0).unwrap().truncate(4), x1);
        assert_eq!(g.derivative(1).unwrap().truncate(4), x0);
        assert_eq!(g.coeff(&ExponentVector::new(vec![1, 1])), q(1, 1));
        assert_eq!(g.len(), 1);

        let zero = TruncatedSeries::zero(2, 4);
        let g = primitive_of_closed_family(&[x0.scale(&q(2, 1)), zero.clone()]).unwrap();
        assert_eq!(g, (&x0 * &x0).with_cap(5).exact_to(5));

        match primitive_of_closed_family(&[x1.clone(), zero]) {
            Err(Error::NotClosed { pair, exponent }) => {
                assert_eq!(pair, (0, 1));
                assert_eq!(exponent, "0,0");
            }
            other => panic!("expected not-closed error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_text_roundtrip_and_order() {
        let x0 = x(2, 3, 0);
        let x1 = x(2, 3, 1);
        let s = &(&x1.scale(&q(-3, 2)) + &(&x0 * &x0)) + &TruncatedSeries::constant(2, 3, q(5, 1));
        let text = s.to_canonical_text();
        assert_eq!(text, "0,0:5/1\n0,1:-3/2\n2,0:1/1");
        let back = TruncatedSeries::from_canonical_text(2, 3, &text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn monomial_enumeration_counts() {
        assert_eq!(monomials_of_degree(3, 2).len(), 6);
        assert_eq!(monomials_of_degree(2, 4).len(), 5);
        let m = monomials_of_degree(2, 2);
        assert_eq!(m[0].as_slice(), &[0, 2]);
        assert_eq!(m[2].as_slice(), &[2, 0]);
    }

    #[test]
    fn mismatched_dimensions_error() {
        let a = TruncatedSeries::one(1, 2);
        let b = TruncatedSeries::one(2, 2);
        assert!(matches!(
            a.checked_mul(&b),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }
}
