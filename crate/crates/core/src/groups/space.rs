use serde::{Deserialize, Serialize};

use super::marked::Word;
use super::quotient::FiniteQuotient;
use crate::error::{invalid, Result};
use crate::metric::Metric;

/// Largest quotient that may be materialized with a full Cayley table.
pub const MAX_TABLE_ORDER: usize = 4096;

/// A small finite group with a left-invariant metric, stored as explicit
/// multiplication and inversion tables. Index 0 is the identity and indices
/// follow the canonical (distance, carrier) order.
///
/// This is the form in which quotients enter map spaces: either a plain
/// quotient or a [`TagProduct`] over one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteGroupSpace {
    pub name: String,
    pub labels: Vec<String>,
    mul: Vec<u32>,
    inv: Vec<u32>,
    /// Distance from the identity.
    norm: Vec<u32>,
    /// Generator symbols of the acting group and their images here.
    generators: Vec<(String, usize)>,
    /// Inverse generator index for every generator.
    generator_inverses: Vec<usize>,
    /// `|S|` used in cardinality bounds.
    pub generating_set_size: usize,
}

impl FiniteGroupSpace {
    pub fn from_quotient(q: &FiniteQuotient) -> Result<FiniteGroupSpace> {
        let n = q.order();
        if n > MAX_TABLE_ORDER {
            return Err(invalid(format!(
                "quotient of order {n} is too large for a Cayley table (max {MAX_TABLE_ORDER})"
            )));
        }
        let mut mul = vec![0u32; n * n];
        for a in 0..n {
            for b in 0..n {
                mul[a * n + b] = q.mul(a, b) as u32;
            }
        }
        let group = q.group();
        Ok(FiniteGroupSpace {
            name: format!("{}/level{}", group.name, q.level()),
            labels: (0..n).map(|i| q.label(i)).collect(),
            mul,
            inv: (0..n).map(|i| q.inverse(i) as u32).collect(),
            norm: q.distances().to_vec(),
            generators: group
                .generators
                .iter()
                .zip(q.generator_images())
                .map(|(g, &i)| (g.symbol.clone(), i))
                .collect(),
            generator_inverses: group.generators.iter().map(|g| g.inverse).collect(),
            generating_set_size: group.generators.len(),
        })
    }

    pub fn order(&self) -> usize {
        self.inv.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order() + b] as usize
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inv[a] as usize
    }

    /// Distance from the identity.
    pub fn norm(&self, a: usize) -> u32 {
        self.norm[a]
    }

    pub fn norms(&self) -> &[u32] {
        &self.norm
    }

    pub fn diameter(&self) -> u32 {
        self.norm.iter().copied().max().unwrap_or(0)
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.norm[self.mul(self.inverse(a), b)]
    }

    pub fn symbols(&self) -> Vec<String> {
        self.generators.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn generator_inverse(&self, s: usize) -> usize {
        self.generator_inverses[s]
    }

    pub fn generator_image(&self, s: usize) -> usize {
        self.generators[s].1
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        Word::parse(text, &self.symbols())
    }

    pub fn eval_word(&self, w: &Word) -> Result<usize> {
        let mut acc = 0;
        for &s in &w.0 {
            let (_, g) = self
                .generators
                .get(s)
                .ok_or_else(|| invalid(format!("generator index {s} out of range")))?;
            acc = self.mul(acc, *g);
        }
        Ok(acc)
    }

    /// Indices of `B_r(1)`, in canonical order.
    pub fn ball(&self, r: u32) -> Vec<usize> {
        (0..self.order()).filter(|&i| self.norm[i] <= r).collect()
    }
}

impl Metric for FiniteGroupSpace {
    fn len(&self) -> usize {
        self.order()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.distance(i, j) as f64
    }
}

/// `base × Z/M` with metric `d((x,i),(y,j)) = d(x,y) + [i ≠ j]`.
///
/// The metric is left-invariant and the projection to the base is
/// 1-Lipschitz. Element `(x, t)` has index `x·M + t`; since `(x, t)` sorts
/// by base first, index 0 is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct TagProduct {
    pub base: FiniteGroupSpace,
    pub tags: usize,
}

impl TagProduct {
    pub fn new(base: FiniteGroupSpace, tags: usize) -> Result<TagProduct> {
        if tags == 0 {
            return Err(invalid("tag group must be nonempty"));
        }
        if base.order() * tags > MAX_TABLE_ORDER {
            return Err(invalid("tag product too large"));
        }
        Ok(TagProduct { base, tags })
    }

    pub fn index(&self, base: usize, tag: usize) -> usize {
        base * self.tags + tag
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.tags, i % self.tags)
    }

    pub fn project(&self, i: usize) -> usize {
        i / self.tags
    }

    /// Materializes the product as a group space. Generators: the base
    /// generators paired with tag 0, followed by `tag` and `TAG` when
    /// `M > 1`.
    pub fn to_space(&self) -> FiniteGroupSpace {
        let m = self.tags;
        let n = self.base.order() * m;
        let mut mul = vec![0u32; n * n];
        let mut inv = vec![0u32; n];
        let mut norm = vec![0u32; n];
        let mut labels = Vec::with_capacity(n);
        for a in 0..n {
            let (x, i) = self.split(a);
            inv[a] = self.index(self.base.inverse(x), (m - i) % m) as u32;
            norm[a] = self.base.norm(x) + u32::from(i != 0);
            labels.push(if m == 1 {
                self.base.labels[x].clone()
            } else {
                format!("{}#{i}", self.base.labels[x])
            });
            for b in 0..n {
                let (y, j) = self.split(b);
                mul[a * n + b] = self.index(self.base.mul(x, y), (i + j) % m) as u32;
            }
        }
        let mut generators: Vec<(String, usize)> = self
            .base
            .generators
            .iter()
            .map(|(s, g)| (s.clone(), self.index(*g, 0)))
            .collect();
        let mut generator_inverses = self.base.generator_inverses.clone();
        let mut generating_set_size = self.base.generating_set_size;
        if m > 1 {
            let k = generators.len();
            generators.push(("tag".into(), self.index(0, 1)));
            generators.push(("TAG".into(), self.index(0, m - 1)));
            generator_inverses.extend([k + 1, k]);
            generating_set_size += if m == 2 { 1 } else { 2 };
        }
        FiniteGroupSpace {
            name: format!("{}x{}", self.base.name, m),
            labels,
            mul,
            inv,
            norm,
            generators,
            generator_inverses,
            generating_set_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_family, FamilySpec, DEFAULT_BALL_BUDGET};

    fn c(n: usize) -> FiniteGroupSpace {
        let depth = n.trailing_zeros() as usize;
        let chain = build_family(&FamilySpec::cyclic(2), depth, DEFAULT_BALL_BUDGET).unwrap();
        FiniteGroupSpace::from_quotient(chain.level(depth).unwrap()).unwrap()
    }

    #[test]
    fn table_agrees_with_quotient() {
        let chain = build_family(
            &FamilySpec::CongruenceSl2 { primes: vec![3] },
            1,
            DEFAULT_BALL_BUDGET,
        )
        .unwrap();
        let q = chain.level(1).unwrap();
        let s = FiniteGroupSpace::from_quotient(q).unwrap();
        for a in 0..24 {
            for b in 0..24 {
                assert_eq!(s.distance(a, b), q.word_metric(a, b).unwrap());
            }
        }
    }

    #[test]
    fn tag_product_metric_is_left_invariant_and_projects() {
        let t = TagProduct::new(c(4), 3).unwrap();
        let s = t.to_space();
        let n = s.order();
        assert_eq!(n, 12);
        for a in 0..n {
            assert_eq!(s.mul(a, s.inverse(a)), 0);
            for b in 0..n {
                let (x, i) = t.split(a);
                let (y, j) = t.split(b);
                assert_eq!(s.distance(a, b), t.base.distance(x, y) + u32::from(i != j));
                assert!(t.base.distance(t.project(a), t.project(b)) <= s.distance(a, b));
                for z in 0..n {
                    assert_eq!(
                        s.distance(s.mul(z, a), s.mul(z, b)),
                        s.distance(a, b)
                    );
                }
            }
        }
    }

    #[test]
    fn balls_and_words() {
        let c8 = c(8);
        assert_eq!(c8.ball(0), vec![0]);
        assert_eq!(c8.ball(2).len(), 5);
        let w = c8.parse_word("+1.+1.+1").unwrap();
        assert_eq!(c8.labels[c8.eval_word(&w).unwrap()], "3");
    }
}
