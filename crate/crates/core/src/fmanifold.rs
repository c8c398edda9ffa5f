//! F-manifold structures: multiplications from vector potentials, the
//! F-identity residual, `P` and `D` tensors, identity search, the sheaf
//! `L` of fields with `nabla_Y eps = Y o nabla_e eps`, and base point shifts.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::geometry::{
    lie_bracket, pencil_curvature_split, Connection, HiggsField, SeriesTensor, VectorField,
};
use crate::linalg::{self, SolveError};
use crate::series::{monomials_of_degree, primitive_of_closed_family, TruncatedSeries};
use crate::Rational;

/// Multiplication `d_a o d_b = sum_c C_ab^c d_c` with an optional identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FStructure {
    structure: HiggsField,
    identity: Option<VectorField>,
}

impl FStructure {
    pub fn new(structure: HiggsField, identity: Option<VectorField>) -> Result<Self> {
        if let Some(e) = &identity {
            if e.dim() != structure.dim() {
                return Err(Error::DimensionMismatch {
                    left: e.dim(),
                    right: structure.dim(),
                });
            }
        }
        Ok(FStructure {
            structure,
            identity,
        })
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    /// Working cap of the structure constants.
    pub fn order(&self) -> u32 {
        self.structure.cap()
    }

    pub fn valid_to(&self) -> u32 {
        self.structure.valid_to()
    }

    pub fn structure(&self) -> &HiggsField {
        &self.structure
    }

    pub fn identity(&self) -> Option<&VectorField> {
        self.identity.as_ref()
    }

    pub fn require_identity(&self) -> Result<&VectorField> {
        self.identity.as_ref().ok_or(Error::MissingIdentity)
    }

    pub fn with_identity(mut self, identity: VectorField) -> Result<Self> {
        if identity.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: identity.dim(),
                right: self.dim(),
            });
        }
        self.identity = Some(identity);
        Ok(self)
    }

    /// Attaches the identity found by [`FStructure::find_identity`], if any.
    pub fn with_found_identity(self) -> Self {
        match self.find_identity() {
            IdentitySearch::Found(e) => FStructure {
                identity: Some(e),
                ..self
            },
            IdentitySearch::Absent { .. } => self,
        }
    }

    /// `X o Y`.
    pub fn product(&self, x: &VectorField, y: &VectorField) -> Result<VectorField> {
        self.structure.apply(x, y)
    }

    pub fn basis(&self, a: usize) -> VectorField {
        VectorField::basis(self.dim(), self.order(), a)
    }

    /// `(R1, R2)` of the pencil `base + lambda C`.
    pub fn pencil_split(&self, base: &Connection) -> Result<(SeriesTensor, SeriesTensor)> {
        pencil_curvature_split(&self.structure, base)
    }

    /// Associator `(d_a o d_b) o d_c - d_a o (d_b o d_c)`, indexed `(a, b, c, d)`.
    pub fn associator(&self) -> Result<SeriesTensor> {
        let n = self.dim();
        SeriesTensor::from_fields(n, 3, |i| {
            let (a, b, c) = (self.basis(i[0]), self.basis(i[1]), self.basis(i[2]));
            self.product(&self.product(&a, &b)?, &c)?
                .sub(&self.product(&a, &self.product(&b, &c)?)?)
        })
    }

    /// `e o d_b - d_b` for every `b`, indexed `(b, c)`.
    pub fn identity_residual(&self, e: &VectorField) -> Result<SeriesTensor> {
        SeriesTensor::from_fields(self.dim(), 1, |i| {
            let db = self.basis(i[0]);
            self.product(e, &db)?.sub(&db)
        })
    }

    /// Solves `e o d_b = d_b` one total degree at a time.
    ///
    /// In each degree the unknown coefficients satisfy an overdetermined
    /// linear system with the constant structure matrix; the degree-zero
    /// system must have a unique solution.
    pub fn find_identity(&self) -> IdentitySearch {
        let n = self.dim();
        let valid = self.valid_to();
        let cap = valid;
        let structure = self.structure.truncate(cap);
        // rows (b, c), columns a
        let m0: linalg::Matrix = (0..n * n)
            .map(|row| {
                let (b, c) = (row / n, row % n);
                (0..n)
                    .map(|a| structure.get(a, b, c).constant_term())
                    .collect()
            })
            .collect();
        let mut e = VectorField::zero(n, cap);
        for d in 0..=valid {
            let mut residual = Vec::with_capacity(n);
            for b in 0..n {
                let db = VectorField::basis(n, cap, b);
                match structure.apply(&e, &db).and_then(|p| db.sub(&p)) {
                    Ok(r) => residual.push(r),
                    Err(_) => return IdentitySearch::Absent { degree: d },
                }
            }
            let mut comps: Vec<TruncatedSeries> = e.comps().to_vec();
            for alpha in monomials_of_degree(n, d) {
                let rhs: Vec<Rational> = (0..n * n)
                    .map(|row| residual[row / n].component(row % n).coeff(&alpha))
                    .collect();
                if d > 0 && rhs.iter().all(Zero::is_zero) {
                    continue;
                }
                match linalg::solve(&m0, &rhs) {
                    Ok(sol) => {
                        for (comp, c) in comps.iter_mut().zip(sol) {
                            *comp = &*comp + &TruncatedSeries::monomial(n, cap, alpha.clone(), c);
                        }
                    }
                    Err(SolveError::Inconsistent) | Err(SolveError::Underdetermined) => {
                        return IdentitySearch::Absent { degree: d };
                    }
                }
            }
            e = VectorField::new(comps).expect("dimension preserved");
        }
        IdentitySearch::Found(e.with_valid_to(valid))
    }

    /// `P_X(Z, W) = [X, Z o W] - [X, Z] o W - Z o [X, W]`.
    pub fn p_tensor(
        &self,
        x: &VectorField,
        z: &VectorField,
        w: &VectorField,
    ) -> Result<VectorField> {
        lie_bracket(x, &self.product(z, w)?)?
            .sub(&self.product(&lie_bracket(x, z)?, w)?)?
            .sub(&self.product(z, &lie_bracket(x, w)?)?)
    }

    /// `D(X, Y, Z) = nabla_X(Y o Z) - nabla_X(Y) o Z - Y o nabla_X Z`.
    pub fn d_tensor(
        &self,
        conn: &Connection,
        x: &VectorField,
        y: &VectorField,
        z: &VectorField,
    ) -> Result<VectorField> {
        conn.covariant_derivative(x, &self.product(y, z)?)?
            .sub(&self.product(&conn.covariant_derivative(x, y)?, z)?)?
            .sub(&self.product(y, &conn.covariant_derivative(x, z)?)?)
    }

    /// `P_{X o Y}(Z, W) - X o P_Y(Z, W) - Y o P_X(Z, W)` for arbitrary fields.
    pub fn hm_residual_at(
        &self,
        x: &VectorField,
        y: &VectorField,
        z: &VectorField,
        w: &VectorField,
    ) -> Result<VectorField> {
        self.p_tensor(&self.product(x, y)?, z, w)?
            .sub(&self.product(x, &self.p_tensor(y, z, w)?)?)?
            .sub(&self.product(y, &self.p_tensor(x, z, w)?)?)
    }

    /// F-identity residual on the flat frame, indexed `(a, b, c, d, f)`:
    /// the `d_f` component of the residual at `(d_a, d_b, d_c, d_d)`.
    ///
    /// Expanded, it reads `sum_e C_ab^e d_e C_cd^f - C_cd^e d_e C_ab^f
    /// + d_c C_ab^e C_ed^f + d_d C_ab^e C_ce^f - d_b C_cd^e C_ae^f - d_a C_cd^e C_be^f`.
    pub fn hm_identity_residual(&self) -> Result<SeriesTensor> {
        let n = self.dim();
        let c = &self.structure;
        // dc[e][(a, b, f)] = d_e C_ab^f
        let dc: Vec<SeriesTensor> = (0..n)
            .map(|e| SeriesTensor::try_from_fn(n, 3, |i| c.get(i[0], i[1], i[2]).derivative(e)))
            .collect::<Result<_>>()?;
        let cap = c.cap();
        let mul = |l: &TruncatedSeries, r: &TruncatedSeries| -> Option<TruncatedSeries> {
            if l.is_empty() || r.is_empty() {
                None
            } else {
                Some(l * r)
            }
        };
        Ok(SeriesTensor::from_fn(n, 5, |i| {
            let (a, b, cc, d, f) = (i[0], i[1], i[2], i[3], i[4]);
            let mut acc = TruncatedSeries::zero(n, cap).with_valid_to(dc[0].valid_to());
            for e in 0..n {
                let plus = [
                    mul(c.get(a, b, e), dc[e].get(&[cc, d, f])),
                    mul(dc[cc].get(&[a, b, e]), c.get(e, d, f)),
                    mul(dc[d].get(&[a, b, e]), c.get(cc, e, f)),
                ];
                let minus = [
                    mul(c.get(cc, d, e), dc[e].get(&[a, b, f])),
                    mul(dc[b].get(&[cc, d, e]), c.get(a, e, f)),
                    mul(dc[a].get(&[cc, d, e]), c.get(b, e, f)),
                ];
                for t in plus.into_iter().flatten() {
                    acc = &acc + &t;
                }
                for t in minus.into_iter().flatten() {
                    acc = &acc - &t;
                }
            }
            acc
        }))
    }

    /// Checks `nabla_Y eps = Y o nabla_e eps` on the frame together with the
    /// derived identities for `ad eps`, `P_eps` and the derivation property of `ad e`.
    pub fn l_membership(&self, conn: &Connection, eps: &VectorField) -> Result<LReport> {
        let n = self.dim();
        let e = self.require_identity()?.clone();
        let nabla_e_eps = conn.covariant_derivative(&e, eps)?;
        let membership = SeriesTensor::from_fields(n, 1, |i| {
            let y = self.basis(i[0]);
            conn.covariant_derivative(&y, eps)?
                .sub(&self.product(&y, &nabla_e_eps)?)
        })?;
        // [eps, Y] - nabla_eps Y + Y o nabla_e eps
        let ad = SeriesTensor::from_fields(n, 1, |i| {
            let y = self.basis(i[0]);
            lie_bracket(eps, &y)?
                .sub(&conn.covariant_derivative(eps, &y)?)?
                .add(&self.product(&y, &nabla_e_eps)?)
        })?;
        // P_eps(Y, Z) - D(eps, Y, Z) - Y o Z o nabla_e eps
        let p = SeriesTensor::from_fields(n, 2, |i| {
            let (y, z) = (self.basis(i[0]), self.basis(i[1]));
            self.p_tensor(eps, &y, &z)?
                .sub(&self.d_tensor(conn, eps, &y, &z)?)?
                .sub(&self.product(&self.product(&y, &z)?, &nabla_e_eps)?)
        })?;
        let derivation = SeriesTensor::from_fields(n, 2, |i| {
            let (y, z) = (self.basis(i[0]), self.basis(i[1]));
            self.p_tensor(&e, &y, &z)
        })?;
        let member = membership.vanishes();
        Ok(LReport {
            membership,
            ad,
            p,
            derivation,
            member,
        })
    }

    /// Classifies `nabla_e e` as zero, a constant multiple of `e`, or neither.
    pub fn nabla_e_e_mode(&self, conn: &Connection) -> Result<SelfDerivative> {
        classify_self_derivative(conn, self.require_identity()?)
    }

    /// Christoffel symbols of `conn + lambda0 C`.
    pub fn shift_base(&self, conn: &Connection, lambda0: &Rational) -> Result<Connection> {
        conn.shifted(&self.structure, lambda0)
    }
}

/// Outcome of [`FStructure::find_identity`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdentitySearch {
    Found(VectorField),
    /// The linear system for this total degree has no unique solution.
    Absent {
        degree: u32,
    },
}

impl IdentitySearch {
    pub fn field(self) -> Option<VectorField> {
        match self {
            IdentitySearch::Found(e) => Some(e),
            IdentitySearch::Absent { .. } => None,
        }
    }
}

/// Residuals of the `L` sheaf checks, each indexed by frame arguments with the
/// field component last.
#[derive(Clone, Debug)]
pub struct LReport {
    /// `nabla_{d_a} eps - d_a o nabla_e eps`.
    pub membership: SeriesTensor,
    /// `[eps, d_a] - nabla_eps d_a + d_a o nabla_e eps`.
    pub ad: SeriesTensor,
    /// `P_eps(d_a, d_b) - D(eps, d_a, d_b) - d_a o d_b o nabla_e eps`.
    pub p: SeriesTensor,
    /// `P_e(d_a, d_b)`, i.e. the failure of `ad e` to be a derivation.
    pub derivation: SeriesTensor,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelfDerivative {
    /// `nabla_v v = 0`.
    Flat,
    /// `nabla_v v = c v` with `c != 0`.
    Eigen(Rational),
    Other,
}

impl SelfDerivative {
    /// The proportionality constant, with `Flat` read as `0`.
    pub fn constant(&self) -> Option<Rational> {
        match self {
            SelfDerivative::Flat => Some(Rational::zero()),
            SelfDerivative::Eigen(c) => Some(c.clone()),
            SelfDerivative::Other => None,
        }
    }
}

/// Compares `nabla_v v` with constant multiples of `v` on the proven range.
pub fn classify_self_derivative(conn: &Connection, v: &VectorField) -> Result<SelfDerivative> {
    let nv = conn.covariant_derivative(v, v)?;
    let valid = nv.valid_to();
    if nv.vanishes() {
        return Ok(SelfDerivative::Flat);
    }
    let pivot = v.comps().iter().enumerate().find_map(|(i, s)| {
        s.first_nonzero_to(valid)
            .map(|(e, c)| (i, e.clone(), c.clone()))
    });
    let Some((i, exp, coeff)) = pivot else {
        return Ok(SelfDerivative::Other);
    };
    let c = nv.component(i).coeff(&exp) / coeff;
    if nv.sub(&v.scale(&c))?.with_valid_to(valid).vanishes() {
        Ok(SelfDerivative::Eigen(c))
    } else {
        Ok(SelfDerivative::Other)
    }
}

/// Vector potential `C` with `C_ab^c = d_a d_b C^c`, kept free of constant and
/// linear terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorPotential {
    field: VectorField,
}

impl VectorPotential {
    /// Normalizes the gauge by dropping all monomials of degree `<= 1`.
    pub fn new(field: VectorField) -> Self {
        let field = field.map(|c| {
            let terms = c
                .terms()
                .filter(|(e, _)| e.degree() >= 2)
                .map(|(e, q)| (e.clone(), q.clone()));
            TruncatedSeries::from_terms(c.num_vars(), c.cap(), terms).with_valid_to(c.valid_to())
        });
        VectorPotential { field }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn valid_to(&self) -> u32 {
        self.field.valid_to()
    }

    /// Structure constants `C_ab^c = d_a d_b C^c`, valid two degrees lower.
    pub fn to_structure(&self) -> Result<FStructure> {
        let have = self.valid_to();
        if have < 2 {
            return Err(Error::InsufficientOrder { needed: 2, have });
        }
        let n = self.dim();
        let cap = self.field.cap() - 2;
        let tensor = SeriesTensor::try_from_fn(n, 3, |i| {
            Ok(self
                .field
                .component(i[2])
                .derivative(i[0])?
                .derivative(i[1])?
                .truncate(cap))
        })?;
        FStructure::new(HiggsField::new(tensor)?, None)
    }
}

/// Integrates a structure twice: first `B_b^c` with `d_a B_b^c = C_ab^c`, then
/// `C^c` with `d_b C^c = B_b^c`. Both integrations are normalized at the origin.
pub fn structure_to_potential(f: &FStructure) -> Result<VectorPotential> {
    let n = f.dim();
    let c = f.structure();
    let mut b = vec![vec![TruncatedSeries::zero(n, 0); n]; n];
    for (bb, row) in b.iter_mut().enumerate() {
        for (cc, slot) in row.iter_mut().enumerate() {
            let family: Vec<TruncatedSeries> = (0..n).map(|a| c.get(a, bb, cc).clone()).collect();
            *slot = primitive_of_closed_family(&family).map_err(|err| match err {
                Error::NotClosed { pair, exponent } => Error::NotPotential(format!(
                    "R1 does not vanish: d_{} C_{}{}^{} != d_{} C_{}{}^{} at monomial [{}]",
                    pair.0, pair.1, bb, cc, pair.1, pair.0, bb, cc, exponent
                )),
                other => other,
            })?;
        }
    }
    let comps = (0..n)
        .map(|cc| {
            let family: Vec<TruncatedSeries> = (0..n).map(|bb| b[bb][cc].clone()).collect();
            primitive_of_closed_family(&family).map_err(|err| match err {
                Error::NotClosed { pair, exponent } => Error::NotPotential(format!(
                    "multiplication is not symmetric: C_{}{}^{} != C_{}{}^{} at monomial [{}]",
                    pair.0, pair.1, cc, pair.1, pair.0, cc, exponent
                )),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorPotential::new(VectorField::new(comps)?))
}
