//! Target groups with compatible bi-invariant metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A group with a bi-invariant metric, `d(gx, gy) = d(x, y) = d(xg, yg)`.
pub trait MetricGroup {
    type Elem: Clone + PartialEq + std::fmt::Debug;

    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    fn dist(&self, a: &Self::Elem, b: &Self::Elem) -> f64;
}

/// `R^d` with the Euclidean metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealVector {
    pub dim: usize,
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn neg(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| -x).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl MetricGroup for RealVector {
    type Elem = Vec<f64>;

    fn identity(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn mul(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        add(a, b)
    }

    fn inv(&self, a: &Vec<f64>) -> Vec<f64> {
        neg(a)
    }

    fn dist(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        euclid(a, b)
    }
}

/// `R^d / Z^d`, coordinates kept in `[0, 1)`, with the quotient metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Torus {
    pub dim: usize,
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 { 0.0 } else { y }
}

fn torus_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wrap(x + y)).collect()
}

fn torus_neg(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| wrap(-x)).collect()
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = wrap(x - y);
            d.min(1.0 - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

impl MetricGroup for Torus {
    type Elem = Vec<f64>;

    fn identity(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn mul(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        torus_add(a, b)
    }

    fn inv(&self, a: &Vec<f64>) -> Vec<f64> {
        torus_neg(a)
    }

    fn dist(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        torus_dist(a, b)
    }
}

/// A finite group given by its multiplication table, with the discrete
/// metric. Element 0 is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    name: String,
    table: Vec<Vec<usize>>,
    inverses: Vec<usize>,
}

impl FiniteGroup {
    /// Validates closure, identity at 0, inverses and associativity.
    pub fn from_table(name: &str, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        let bad = |msg: &str| Err(Error::Contract(format!("{name}: {msg}")));
        if n == 0 || table.iter().any(|row| row.len() != n || row.iter().any(|&v| v >= n)) {
            return bad("table must be square with entries below the order");
        }
        if (0..n).any(|a| table[0][a] != a || table[a][0] != a) {
            return bad("element 0 must be the identity");
        }
        let mut inverses = vec![0; n];
        for a in 0..n {
            match (0..n).find(|&b| table[a][b] == 0 && table[b][a] == 0) {
                Some(b) => inverses[a] = b,
                None => return bad("missing inverse"),
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return bad("not associative");
                    }
                }
            }
        }
        Ok(Self { name: name.into(), table, inverses })
    }

    /// `Z/n` with `k` the residue.
    pub fn cyclic(n: usize) -> Result<Self> {
        Self::from_table(&format!("Z/{n}"), (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect())
    }

    /// The symmetric group on three letters, permutations in lexicographic
    /// order with composition `(p q)(i) = p(q(i))`.
    pub fn s3() -> Self {
        let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let index = |p: [usize; 3]| perms.iter().position(|&q| q == p).unwrap();
        let table = perms
            .iter()
            .map(|p| perms.iter().map(|q| index([p[q[0]], p[q[1]], p[q[2]]])).collect())
            .collect();
        Self::from_table("S3", table).expect("S3 table is valid")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }
}

impl MetricGroup for FiniteGroup {
    type Elem = usize;

    fn identity(&self) -> usize {
        0
    }

    fn mul(&self, a: &usize, b: &usize) -> usize {
        self.table[*a][*b]
    }

    fn inv(&self, a: &usize) -> usize {
        self.inverses[*a]
    }

    fn dist(&self, a: &usize, b: &usize) -> f64 {
        if a == b { 0.0 } else { 1.0 }
    }
}

/// An element of a [`TargetGroup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HElem {
    Finite(usize),
    Vector(Vec<f64>),
}

impl HElem {
    fn vector(&self) -> &[f64] {
        match self {
            Self::Vector(v) => v,
            Self::Finite(_) => panic!("finite element in a vector group"),
        }
    }

    fn finite(&self) -> usize {
        match self {
            Self::Finite(k) => *k,
            Self::Vector(_) => panic!("vector element in a finite group"),
        }
    }
}

/// The target groups available to cocycles.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetGroup {
    RealVector(RealVector),
    Torus(Torus),
    Finite(FiniteGroup),
}

/// JSON form `{kind, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TargetFile {
    RealVector { dim: usize },
    Torus { dim: usize },
    Cyclic { order: usize },
    Symmetric3,
    FiniteTable { name: String, table: Vec<Vec<usize>> },
}

impl TargetGroup {
    pub fn real(dim: usize) -> Self {
        Self::RealVector(RealVector { dim })
    }

    pub fn torus(dim: usize) -> Self {
        Self::Torus(Torus { dim })
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Ok(Self::Finite(FiniteGroup::cyclic(n)?))
    }

    pub fn from_file(f: &TargetFile) -> Result<Self> {
        Ok(match f {
            TargetFile::RealVector { dim } => Self::real(*dim),
            TargetFile::Torus { dim } => Self::torus(*dim),
            TargetFile::Cyclic { order } => Self::cyclic(*order)?,
            TargetFile::Symmetric3 => Self::Finite(FiniteGroup::s3()),
            TargetFile::FiniteTable { name, table } => Self::Finite(FiniteGroup::from_table(name, table.clone())?),
        })
    }

    pub fn to_file(&self) -> TargetFile {
        match self {
            Self::RealVector(g) => TargetFile::RealVector { dim: g.dim },
            Self::Torus(g) => TargetFile::Torus { dim: g.dim },
            Self::Finite(g) => TargetFile::FiniteTable { name: g.name.clone(), table: g.table.clone() },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    /// Checks that `h` is a well-formed element and normalizes it (torus
    /// coordinates are reduced into `[0, 1)`).
    pub fn normalize(&self, h: &HElem) -> Result<HElem> {
        match (self, h) {
            (Self::RealVector(g), HElem::Vector(v)) if v.len() == g.dim && v.iter().all(|x| x.is_finite()) => Ok(h.clone()),
            (Self::Torus(g), HElem::Vector(v)) if v.len() == g.dim && v.iter().all(|x| x.is_finite()) => {
                Ok(HElem::Vector(v.iter().map(|&x| wrap(x)).collect()))
            }
            (Self::Finite(g), HElem::Finite(k)) if *k < g.order() => Ok(h.clone()),
            _ => Err(Error::Contract(format!("{h:?} is not an element of the target group"))),
        }
    }

    /// Largest distance between two elements of `values`.
    pub fn diameter<'a>(&self, values: impl IntoIterator<Item = &'a HElem> + Clone) -> f64 {
        let mut best: f64 = 0.0;
        for a in values.clone() {
            for b in values.clone() {
                best = best.max(self.dist(a, b));
            }
        }
        best
    }
}

impl MetricGroup for TargetGroup {
    type Elem = HElem;

    fn identity(&self) -> HElem {
        match self {
            Self::RealVector(g) => HElem::Vector(g.identity()),
            Self::Torus(g) => HElem::Vector(g.identity()),
            Self::Finite(g) => HElem::Finite(g.identity()),
        }
    }

    fn mul(&self, a: &HElem, b: &HElem) -> HElem {
        match self {
            Self::RealVector(_) => HElem::Vector(add(a.vector(), b.vector())),
            Self::Torus(_) => HElem::Vector(torus_add(a.vector(), b.vector())),
            Self::Finite(g) => HElem::Finite(g.mul(&a.finite(), &b.finite())),
        }
    }

    fn inv(&self, a: &HElem) -> HElem {
        match self {
            Self::RealVector(_) => HElem::Vector(neg(a.vector())),
            Self::Torus(_) => HElem::Vector(torus_neg(a.vector())),
            Self::Finite(g) => HElem::Finite(g.inv(&a.finite())),
        }
    }

    fn dist(&self, a: &HElem, b: &HElem) -> f64 {
        match self {
            Self::RealVector(_) => euclid(a.vector(), b.vector()),
            Self::Torus(_) => torus_dist(a.vector(), b.vector()),
            Self::Finite(g) => g.dist(&a.finite(), &b.finite()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s3_is_nonabelian() {
        let g = FiniteGroup::s3();
        assert_eq!(g.order(), 6);
        assert_ne!(g.mul(&1, &2), g.mul(&2, &1));
        for a in 0..6 {
            assert_eq!(g.mul(&a, &g.inv(&a)), 0);
        }
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(FiniteGroup::from_table("x", vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(FiniteGroup::from_table("x", vec![vec![1, 0], vec![0, 1]]).is_err());
        assert!(FiniteGroup::cyclic(0).is_err());
    }

    #[test]
    fn torus_wraps() {
        let t = Torus { dim: 1 };
        assert_eq!(t.mul(&vec![0.75], &vec![0.5]), vec![0.25]);
        assert!((t.dist(&vec![0.9], &vec![0.1]) - 0.2).abs() < 1e-12);
        assert_eq!(t.inv(&vec![0.0]), vec![0.0]);
    }

    #[test]
    fn target_file_round_trip() {
        for f in [TargetFile::RealVector { dim: 2 }, TargetFile::Torus { dim: 1 }, TargetFile::Cyclic { order: 5 }] {
            let json = serde_json::to_string(&f).unwrap();
            let g = TargetGroup::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(TargetGroup::from_file(&g.to_file()).unwrap(), g);
        }
        let h: HElem = serde_json::from_str("[0.5, 1.0]").unwrap();
        assert_eq!(h, HElem::Vector(vec![0.5, 1.0]));
        assert_eq!(serde_json::from_str::<HElem>("3").unwrap(), HElem::Finite(3));
    }
}
