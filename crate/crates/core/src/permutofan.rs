//! Ordered set partitions and the permutohedral (braid) fan.
//!
//! Elements are labelled `1..=n`. Lattice vectors live in `Z^n / Z` with the
//! diagonal quotiented out; the canonical representative has last entry 0.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::Rational;

/// Default bound on `n` for fan enumeration.
pub const DEFAULT_MAX_N: usize = 6;
/// Environment variable overriding [`DEFAULT_MAX_N`].
pub const MAX_N_VAR: &str = "FLATCIRC_MAX_N";

/// Reads the fan bound from the environment, falling back to the default on
/// absence or garbage.
pub fn max_n_from_env() -> usize {
    std::env::var(MAX_N_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_N)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl OrderedPartition {
    /// Validates and canonicalizes (sorts inside blocks). Block order is kept.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut out = Vec::with_capacity(blocks.len());
        for mut block in blocks {
            if block.is_empty() {
                return Err(Error::Format("empty block in partition".into()));
            }
            block.sort_unstable();
            for &x in &block {
                if x == 0 || x > n {
                    return Err(Error::Format(format!("element {x} outside 1..{n}")));
                }
                if std::mem::replace(&mut seen[x - 1], true) {
                    return Err(Error::Format(format!("element {x} repeated")));
                }
            }
            out.push(block);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("element {} missing", missing + 1)));
        }
        Ok(OrderedPartition { n, blocks: out })
    }

    /// The one-block partition of `{1..n}`.
    pub fn trivial(n: usize) -> Self {
        OrderedPartition {
            n,
            blocks: vec![(1..=n).collect()],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// True when `self` is obtained from `finer` by merging consecutive blocks.
    pub fn is_coarsening_of(&self, finer: &OrderedPartition) -> bool {
        if self.n != finer.n {
            return false;
        }
        let mut it = finer.blocks.iter();
        for block in &self.blocks {
            let target: BTreeSet<usize> = block.iter().copied().collect();
            let mut acc = BTreeSet::new();
            while acc.len() < target.len() {
                let Some(next) = it.next() else { return false };
                acc.extend(next.iter().copied());
            }
            if acc != target {
                return false;
            }
        }
        it.next().is_none()
    }
}

impl fmt::Display for OrderedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for OrderedPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in s.trim().split('|') {
            let block = part
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad partition element {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
        }
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        OrderedPartition::new(n, blocks)
    }
}

impl Serialize for OrderedPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// All ordered set partitions of `{1..n}`, sorted by block count and then
/// lexicographically by blocks.
pub fn enumerate_partitions(n: usize) -> Vec<OrderedPartition> {
    fn rec(rest: &[usize], prefix: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        let k = rest.len();
        for mask in 1u64..(1u64 << k) {
            let (block, remaining): (Vec<usize>, Vec<usize>) = {
                let mut b = Vec::new();
                let mut r = Vec::new();
                for (i, &x) in rest.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        b.push(x);
                    } else {
                        r.push(x);
                    }
                }
                (b, r)
            };
            prefix.push(block);
            rec(&remaining, prefix, out);
            prefix.pop();
        }
    }
    let elems: Vec<usize> = (1..=n).collect();
    let mut raw = Vec::new();
    rec(&elems, &mut Vec::new(), &mut raw);
    let mut parts: Vec<OrderedPartition> = raw
        .into_iter()
        .map(|blocks| OrderedPartition { n, blocks })
        .collect();
    parts.sort_by(|a, b| (a.len(), &a.blocks).cmp(&(b.len(), &b.blocks)));
    parts
}

/// The 2-partitions `(τ1 ∪ … ∪ τa, rest)` for `a = 1..N`, where τ has `N + 1`
/// blocks. Empty for the trivial partition.
pub fn good_family(tau: &OrderedPartition) -> Vec<OrderedPartition> {
    (1..tau.len())
        .map(|a| {
            let head: Vec<usize> = tau.blocks[..a].iter().flatten().copied().collect();
            let tail: Vec<usize> = tau.blocks[a..].iter().flatten().copied().collect();
            OrderedPartition::new(tau.n, vec![head, tail]).expect("split of a valid partition")
        })
        .collect()
}

/// Integer vector modulo the diagonal, stored with last entry 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LatticeVector(Vec<i64>);

impl LatticeVector {
    pub fn new(mut entries: Vec<i64>) -> Self {
        if let Some(&last) = entries.last() {
            for x in entries.iter_mut() {
                *x -= last;
            }
        }
        LatticeVector(entries)
    }

    /// `χ_S`: 1 on the elements of `subset`, 0 elsewhere.
    pub fn indicator(n: usize, subset: &[usize]) -> Self {
        let mut v = vec![0; n];
        for &x in subset {
            v[x - 1] = 1;
        }
        LatticeVector::new(v)
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, k: i64) -> LatticeVector {
        LatticeVector::new(self.0.iter().map(|a| a * k).collect())
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cone {
    pub label: OrderedPartition,
    pub generators: Vec<LatticeVector>,
}

impl Cone {
    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    /// Sum of the generators; it lies in the relative interior.
    pub fn interior_point(&self) -> LatticeVector {
        let zero = LatticeVector::new(vec![0; self.label.n]);
        self.generators.iter().fold(zero, |acc, g| acc.add(g))
    }
}

pub fn cone_of_partition(tau: &OrderedPartition) -> Cone {
    let generators = good_family(tau)
        .iter()
        .map(|s| LatticeVector::indicator(tau.n, &s.blocks[0]))
        .collect();
    Cone {
        label: tau.clone(),
        generators,
    }
}

/// Level sets of `v` ordered by decreasing value. The result is the unique
/// cone containing `v` in its relative interior.
pub fn locate_point(v: &[Rational]) -> OrderedPartition {
    let n = v.len();
    let mut levels: Vec<&Rational> = v.iter().collect();
    levels.sort_by(|a, b| b.cmp(a));
    levels.dedup();
    let blocks = levels
        .into_iter()
        .map(|level| (1..=n).filter(|&i| &v[i - 1] == level).collect())
        .collect();
    OrderedPartition { n, blocks }
}

/// Braid-fan membership: `v` is constant on blocks and strictly decreasing
/// across consecutive blocks.
pub fn in_relative_interior(v: &[Rational], tau: &OrderedPartition) -> bool {
    if v.len() != tau.n {
        return false;
    }
    let mut prev: Option<&Rational> = None;
    for block in &tau.blocks {
        let value = &v[block[0] - 1];
        if block.iter().any(|&x| &v[x - 1] != value) {
            return false;
        }
        if prev.is_some_and(|p| p <= value) {
            return false;
        }
        prev = Some(value);
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FanReport {
    pub n: usize,
    pub cone_count: usize,
    pub ray_count: usize,
    pub max_cone_count: usize,
    pub unimodular: bool,
    pub complete: bool,
    pub face_closed: bool,
}

impl FanReport {
    pub fn passes(&self) -> bool {
        let factorial: usize = (1..=self.n).product();
        self.ray_count + 2 == 1 << self.n
            && self.max_cone_count == factorial
            && self.unimodular
            && self.complete
            && self.face_closed
    }
}

fn to_rationals(v: &LatticeVector) -> Vec<Rational> {
    v.entries()
        .iter()
        .map(|&x| Rational::from_integer(x.into()))
        .collect()
}

fn unimodular(cone: &Cone) -> bool {
    let n = cone.label.n;
    // Drop the last coordinate: Z^n / Z is identified with Z^(n-1).
    let m: linalg::Matrix = cone
        .generators
        .iter()
        .map(|g| to_rationals(g)[..n - 1].to_vec())
        .collect();
    let det = linalg::determinant(&m);
    det == Rational::one() || det == -Rational::one()
}

/// Checks the located cone of `v` by writing `v` as a positive combination of
/// that cone's generators modulo the diagonal.
fn witness(v: &[i64]) -> bool {
    let vq: Vec<Rational> = v
        .iter()
        .map(|&x| Rational::from_integer(x.into()))
        .collect();
    let tau = locate_point(&vq);
    if !in_relative_interior(&vq, &tau) {
        return false;
    }
    let cone = cone_of_partition(&tau);
    let level = |k: usize| v[tau.blocks[k][0] - 1];
    let mut acc = LatticeVector::new(vec![0; v.len()]);
    for (a, g) in cone.generators.iter().enumerate() {
        let c = level(a) - level(a + 1);
        if c <= 0 {
            return false;
        }
        acc = acc.add(&g.scale(c));
    }
    acc == LatticeVector::new(v.to_vec())
}

fn grid(n: usize, radius: i64) -> Vec<Vec<i64>> {
    let side = (2 * radius + 1) as usize;
    let count = side.pow(n.saturating_sub(1) as u32);
    (0..count)
        .map(|mut idx| {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n - 1 {
                v.push((idx % side) as i64 - radius);
                idx /= side;
            }
            v.push(0);
            v
        })
        .collect()
}

/// Enumerates the fan for `{1..n}` and checks rays, maximal cones,
/// unimodularity, completeness on an integer grid and closedness under faces.
pub fn verify_fan(n: usize, max_n: usize) -> Result<FanReport> {
    if n > max_n {
        return Err(Error::FanTooLarge { n, max: max_n });
    }
    if n == 0 {
        return Err(Error::Format("fan needs n >= 1".into()));
    }
    let parts = enumerate_partitions(n);
    let cones: Vec<Cone> = parts.par_iter().map(cone_of_partition).collect();

    let rays: BTreeSet<&LatticeVector> = cones.iter().flat_map(|c| &c.generators).collect();
    let maximal: Vec<&Cone> = cones.iter().filter(|c| c.label.len() == n).collect();
    let unimodular = n == 1 || maximal.par_iter().all(|c| unimodular(c));

    let sample_ok = cones.par_iter().all(|c| {
        let p = to_rationals(&c.interior_point());
        // Level sets determine the block ordering, so the located cone is
        // the only one whose relative interior can hold the point.
        locate_point(&p) == c.label && in_relative_interior(&p, &c.label)
    });
    let radius = if n <= 4 { 2 } else { 1 };
    let complete = sample_ok && grid(n, radius).par_iter().all(|v| witness(v));

    let by_gens: HashMap<BTreeSet<&LatticeVector>, &OrderedPartition> = cones
        .iter()
        .map(|c| (c.generators.iter().collect(), &c.label))
        .collect();
    let face_closed = cones.par_iter().all(|c| {
        let k = c.generators.len();
        (0u64..(1u64 << k)).all(|mask| {
            let face: BTreeSet<&LatticeVector> = (0..k)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| &c.generators[i])
                .collect();
            by_gens
                .get(&face)
                .is_some_and(|label| label.is_coarsening_of(&c.label))
        })
    });

    Ok(FanReport {
        n,
        cone_count: cones.len(),
        ray_count: rays.len(),
        max_cone_count: maximal.len(),
        unimodular,
        complete,
        face_closed,
    })
}

/// Blocks of `t1` followed by the blocks of `t2` shifted by `t1.n()`.
pub fn concat_product(t1: &OrderedPartition, t2: &OrderedPartition) -> OrderedPartition {
    let m = t1.n;
    let blocks = t1
        .blocks
        .iter()
        .cloned()
        .chain(t2.blocks.iter().map(|b| b.iter().map(|x| x + m).collect()))
        .collect();
    OrderedPartition {
        n: m + t2.n,
        blocks,
    }
}

/// Checks that `perm` (one-line notation, `perm[i-1]` is the image of `i`) is
/// a permutation of `1..=perm.len()`.
pub fn validate_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p == 0 || p > perm.len() || std::mem::replace(&mut seen[p - 1], true) {
            return Err(Error::Format(format!("{perm:?} is not a permutation")));
        }
    }
    Ok(())
}

/// Relabels elements inside blocks by `perm`; the block order is kept.
pub fn sn_action(perm: &[usize], tau: &OrderedPartition) -> Result<OrderedPartition> {
    if perm.len() != tau.n {
        return Err(Error::DimensionMismatch {
            left: perm.len(),
            right: tau.n,
        });
    }
    validate_permutation(perm)?;
    let blocks = tau
        .blocks
        .iter()
        .map(|b| b.iter().map(|&x| perm[x - 1]).collect())
        .collect();
    OrderedPartition::new(tau.n, blocks)
}

/// `π1 × π2` embedded in `S_{m+n}`.
pub fn block_sum(p1: &[usize], p2: &[usize]) -> Vec<usize> {
    let m = p1.len();
    p1.iter().copied().chain(p2.iter().map(|x| x + m)).collect()
}

/// All permutations of `1..=n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| cur[i] < cur[i + 1])
        else {
            return out;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| cur[j] > cur[i])
            .expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    fn p(s: &str) -> OrderedPartition {
        s.parse().unwrap()
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(enumerate_partitions(1), vec![p("1")]);
        let two: Vec<String> = enumerate_partitions(2)
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(two, vec!["1,2", "1|2", "2|1"]);
    }

    #[test]
    fn good_families_and_cones() {
        let fam: Vec<String> = good_family(&p("1|2|3"))
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(fam, vec!["1|2,3", "1,2|3"]);
        assert_eq!(good_family(&p("1,2|3")), vec![p("1,2|3")]);
        assert!(good_family(&p("1,2,3")).is_empty());

        let c = cone_of_partition(&p("1|2|3"));
        assert_eq!(
            c.generators,
            vec![
                LatticeVector::new(vec![1, 0, 0]),
                LatticeVector::new(vec![1, 1, 0])
            ]
        );
        assert!(cone_of_partition(&p("1,2,3")).generators.is_empty());
        assert_eq!(
            cone_of_partition(&p("2|1,3")).generators,
            vec![LatticeVector::new(vec![0, 1, 0])]
        );
        // χ of a set containing the last element is the negated complement.
        assert_eq!(
            LatticeVector::indicator(3, &[1, 3]),
            LatticeVector::new(vec![0, -1, 0])
        );
    }

    #[test]
    fn locating_points() {
        assert_eq!(locate_point(&[q(2, 1), q(1, 1), q(0, 1)]), p("1|2|3"));
        assert_eq!(locate_point(&[q(1, 1), q(1, 1), q(0, 1)]), p("1,2|3"));
        assert_eq!(
            locate_point(&[q(0, 1), q(0, 1), q(0, 1)]),
            OrderedPartition::trivial(3)
        );
    }

    #[test]
    fn fan_reports() {
        let r2 = verify_fan(2, 6).unwrap();
        assert_eq!((r2.ray_count, r2.max_cone_count), (2, 2));
        assert!(r2.passes());
        let r3 = verify_fan(3, 6).unwrap();
        assert_eq!((r3.ray_count, r3.max_cone_count, r3.cone_count), (6, 6, 13));
        assert!(r3.passes());
        assert_eq!(verify_fan(7, 6), Err(Error::FanTooLarge { n: 7, max: 6 }));
    }

    #[test]
    fn concat_and_action() {
        assert_eq!(concat_product(&p("1|2"), &p("1,2")), p("1|2|3,4"));
        assert_eq!(concat_product(&p("1"), &p("1")), p("1|2"));
        assert_eq!(sn_action(&[2, 1], &p("1|2")).unwrap(), p("2|1"));
        assert_eq!(sn_action(&[1, 2], &p("1|2")).unwrap(), p("1|2"));
        assert!(matches!(
            sn_action(&[1], &p("1|2")),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(sn_action(&[1, 1], &p("1|2")).is_err());
    }

    #[test]
    fn text_format_rejects_bad_partitions() {
        assert!("1|1".parse::<OrderedPartition>().is_err());
        assert!("1|3".parse::<OrderedPartition>().is_err());
        assert!("1|x".parse::<OrderedPartition>().is_err());
        assert_eq!(p("3,1|2").to_string(), "1,3|2");
    }

    #[test]
    fn coarsening() {
        assert!(p("1,2|3").is_coarsening_of(&p("2|1|3")));
        assert!(!p("1,3|2").is_coarsening_of(&p("1|2|3")));
        assert!(OrderedPartition::trivial(3).is_coarsening_of(&p("3|1|2")));
    }

    #[test]
    fn permutation_listing() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![1, 3, 2]);
        assert_eq!(block_sum(&[2, 1], &[1]), vec![2, 1, 3]);
    }
}
