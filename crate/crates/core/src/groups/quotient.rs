use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::marked::{Element, MarkedGroup, Word};
use crate::error::{invalid, Error, Result};

/// Concrete carrier of a finite quotient and its canonical element keys.
///
/// * `Cyclic`: residues in `[0, m)`.
/// * `MatrixMod`: row-major matrices with entries in `[0, m)`.
/// * `Permutation`: the images of `0..d_1, 0..d_2, ...` under a tuple of
///   permutations, concatenated; `letter_images` are the tuples assigned to
///   the positive free generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuotientCarrier {
    Cyclic {
        modulus: i64,
    },
    MatrixMod {
        dim: usize,
        modulus: i64,
    },
    Permutation {
        degrees: Vec<usize>,
        letter_images: Vec<Vec<i64>>,
    },
}

impl QuotientCarrier {
    pub fn identity_key(&self) -> Vec<i64> {
        match self {
            QuotientCarrier::Cyclic { .. } => vec![0],
            QuotientCarrier::MatrixMod { dim, .. } => {
                let mut m = vec![0; dim * dim];
                for i in 0..*dim {
                    m[i * dim + i] = 1;
                }
                m
            }
            QuotientCarrier::Permutation { degrees, .. } => {
                let mut out = Vec::new();
                for &d in degrees {
                    out.extend(0..d as i64);
                }
                out
            }
        }
    }

    pub fn mul_keys(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        match self {
            QuotientCarrier::Cyclic { modulus } => vec![(a[0] + b[0]).rem_euclid(*modulus)],
            QuotientCarrier::MatrixMod { dim, modulus } => {
                let n = *dim;
                let mut out = vec![0i64; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0i64;
                        for k in 0..n {
                            acc = (acc + a[i * n + k] * b[k * n + j]) % modulus;
                        }
                        out[i * n + j] = acc;
                    }
                }
                out
            }
            QuotientCarrier::Permutation { degrees, .. } => {
                // (a·b)(x) = a(b(x)) on each factor
                let mut out = Vec::with_capacity(a.len());
                let mut offset = 0usize;
                for &d in degrees {
                    for x in 0..d {
                        let bx = b[offset + x] as usize;
                        out.push(a[offset + bx]);
                    }
                    offset += d;
                }
                out
            }
        }
    }

    /// Image of an element of the parent group.
    pub fn project(&self, group: &MarkedGroup, e: &Element) -> Result<Vec<i64>> {
        match (self, e) {
            (QuotientCarrier::Cyclic { modulus }, Element::Int(k)) => {
                Ok(vec![k.rem_euclid(*modulus)])
            }
            (QuotientCarrier::MatrixMod { dim, modulus }, Element::Matrix(m))
                if m.len() == dim * dim =>
            {
                Ok(m.iter().map(|v| v.rem_euclid(*modulus)).collect())
            }
            (
                QuotientCarrier::Permutation {
                    degrees,
                    letter_images,
                },
                Element::Word(w),
            ) => {
                let mut acc = self.identity_key();
                for &l in w {
                    let idx = l.unsigned_abs() as usize - 1;
                    let img = letter_images
                        .get(idx)
                        .ok_or_else(|| invalid(format!("no image for letter {l}")))?;
                    let img = if l > 0 {
                        img.clone()
                    } else {
                        invert_permutation_tuple(degrees, img)
                    };
                    acc = self.mul_keys(&acc, &img);
                }
                Ok(acc)
            }
            _ => Err(invalid(format!(
                "element {e} of {} cannot be projected to this quotient",
                group.name
            ))),
        }
    }

    /// Reduces a key of this (finer) carrier to a key of `coarser`.
    pub fn reduce_to(&self, coarser: &QuotientCarrier, key: &[i64]) -> Result<Vec<i64>> {
        match (self, coarser) {
            (QuotientCarrier::Cyclic { modulus: m }, QuotientCarrier::Cyclic { modulus: c })
                if m % c == 0 =>
            {
                Ok(vec![key[0].rem_euclid(*c)])
            }
            (
                QuotientCarrier::MatrixMod { dim: d1, modulus: m },
                QuotientCarrier::MatrixMod { dim: d2, modulus: c },
            ) if d1 == d2 && m % c == 0 => Ok(key.iter().map(|v| v.rem_euclid(*c)).collect()),
            (
                QuotientCarrier::Permutation { degrees: fine, .. },
                QuotientCarrier::Permutation { degrees: coarse, .. },
            ) if fine.starts_with(coarse) => {
                let len: usize = coarse.iter().sum();
                Ok(key[..len].to_vec())
            }
            _ => Err(invalid("quotient carriers are not comparable along a chain")),
        }
    }

    fn key_label(&self, key: &[i64]) -> String {
        match self {
            QuotientCarrier::Cyclic { .. } => key[0].to_string(),
            QuotientCarrier::MatrixMod { dim, .. } => {
                let rows: Vec<String> = key
                    .chunks(*dim)
                    .map(|r| {
                        r.iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect();
                format!("[{}]", rows.join(";"))
            }
            QuotientCarrier::Permutation { .. } => {
                let cells: Vec<String> = key.iter().map(|v| v.to_string()).collect();
                format!("({})", cells.join(" "))
            }
        }
    }
}

fn invert_permutation_tuple(degrees: &[usize], p: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; p.len()];
    let mut offset = 0usize;
    for &d in degrees {
        for x in 0..d {
            out[offset + p[offset + x] as usize] = x as i64;
        }
        offset += d;
    }
    out
}

/// A finite quotient `G/G_n` with its Cayley word metric.
///
/// Elements are indexed in canonical order: by distance from the identity,
/// then by carrier key. The identity has index 0.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    group: Arc<MarkedGroup>,
    level: usize,
    carrier: QuotientCarrier,
    elements: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    generator_images: Vec<usize>,
    distances: Vec<u32>,
    inverses: Vec<usize>,
}

impl PartialEq for FiniteQuotient {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group
            && self.level == other.level
            && self.carrier == other.carrier
            && self.elements == other.elements
            && self.generator_images == other.generator_images
            && self.distances == other.distances
    }
}

impl FiniteQuotient {
    /// Builds the quotient as the breadth-first closure of the generator
    /// images. When `expected_order` is given, a smaller closure is reported
    /// as [`Error::NotGenerating`].
    pub fn build(
        group: Arc<MarkedGroup>,
        carrier: QuotientCarrier,
        level: usize,
        expected_order: Option<usize>,
        budget: usize,
    ) -> Result<FiniteQuotient> {
        let gen_keys: Vec<Vec<i64>> = group
            .generators
            .iter()
            .map(|g| carrier.project(&group, &g.value))
            .collect::<Result<_>>()?;
        let id = carrier.identity_key();
        let mut dist: HashMap<Vec<i64>, u32> = HashMap::new();
        dist.insert(id.clone(), 0);
        let mut queue = VecDeque::from([id]);
        let mut order: Vec<(u32, Vec<i64>)> = Vec::new();
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for s in &gen_keys {
                let y = carrier.mul_keys(&x, s);
                if !dist.contains_key(&y) {
                    if dist.len() >= budget {
                        return Err(Error::Budget {
                            what: format!("enumeration of {} level {level}", group.name),
                            limit: budget as u64,
                        });
                    }
                    dist.insert(y.clone(), d + 1);
                    queue.push_back(y);
                }
            }
            order.push((d, x));
        }
        if let Some(expected) = expected_order {
            if order.len() < expected {
                return Err(Error::NotGenerating {
                    unreached: expected - order.len(),
                    order: expected,
                });
            }
        }
        drop(dist);
        order.sort();
        let (distances, elements): (Vec<u32>, Vec<Vec<i64>>) = order.into_iter().unzip();
        Self::from_parts(group, carrier, level, elements, Some(distances))
    }

    /// Reassembles a quotient from its canonical element list; distances are
    /// recomputed and, when supplied, checked.
    pub fn from_parts(
        group: Arc<MarkedGroup>,
        carrier: QuotientCarrier,
        level: usize,
        elements: Vec<Vec<i64>>,
        distances: Option<Vec<u32>>,
    ) -> Result<FiniteQuotient> {
        let index: HashMap<Vec<i64>, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        if index.len() != elements.len() {
            return Err(invalid("duplicate quotient elements"));
        }
        if elements.first() != Some(&carrier.identity_key()) {
            return Err(invalid("identity must be the first quotient element"));
        }
        let generator_images = group
            .generators
            .iter()
            .map(|g| {
                let k = carrier.project(&group, &g.value)?;
                index
                    .get(&k)
                    .copied()
                    .ok_or_else(|| invalid(format!("generator {} image missing", g.symbol)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut q = FiniteQuotient {
            group,
            level,
            carrier,
            elements,
            index,
            generator_images,
            distances: Vec::new(),
            inverses: Vec::new(),
        };
        // BFS over right multiplication by generator images, recording
        // parents so inverses can be rebuilt as reversed words.
        let n = q.elements.len();
        let mut dist = vec![u32::MAX; n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut bfs = Vec::with_capacity(n);
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            bfs.push(x);
            for (s, &gi) in q.generator_images.iter().enumerate() {
                let y = q.mul_raw(x, gi)?;
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = Some((x, s));
                    queue.push_back(y);
                }
            }
        }
        if bfs.len() != n {
            return Err(Error::NotGenerating {
                unreached: n - bfs.len(),
                order: n,
            });
        }
        if let Some(given) = distances {
            if given != dist {
                return Err(invalid("stored distances disagree with the Cayley graph"));
            }
        }
        let mut inverses = vec![0usize; n];
        for &x in &bfs[1..] {
            let (p, s) = parent[x].expect("non-root has a parent");
            // x = p·s  =>  x⁻¹ = s⁻¹·p⁻¹
            let s_inv = q.generator_images[q.group.generators[s].inverse];
            inverses[x] = q.mul_raw(s_inv, inverses[p])?;
        }
        q.distances = dist;
        q.inverses = inverses;
        Ok(q)
    }

    fn mul_raw(&self, a: usize, b: usize) -> Result<usize> {
        let k = self.carrier.mul_keys(&self.elements[a], &self.elements[b]);
        self.index
            .get(&k)
            .copied()
            .ok_or_else(|| invalid("quotient is not closed under multiplication"))
    }

    pub fn group(&self) -> &Arc<MarkedGroup> {
        &self.group
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn carrier(&self) -> &QuotientCarrier {
        &self.carrier
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn elements(&self) -> &[Vec<i64>] {
        &self.elements
    }

    pub fn label(&self, i: usize) -> String {
        self.carrier.key_label(&self.elements[i])
    }

    pub fn index_of(&self, key: &[i64]) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn generator_images(&self) -> &[usize] {
        &self.generator_images
    }

    /// Distance from the identity of every element (the ball-growth table).
    pub fn distances(&self) -> &[u32] {
        &self.distances
    }

    pub fn diameter(&self) -> u32 {
        self.distances.iter().copied().max().unwrap_or(0)
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul_raw(a, b).expect("closed by construction")
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverses[a]
    }

    /// Left-invariant word metric `d(x, y) = |x⁻¹y|`.
    pub fn word_metric(&self, x: usize, y: usize) -> Result<u32> {
        let n = self.order();
        if x >= n || y >= n {
            return Err(invalid(format!("element index out of range (order {n})")));
        }
        Ok(self.distances[self.mul(self.inverses[x], y)])
    }

    pub fn project(&self, e: &Element) -> Result<usize> {
        let k = self.carrier.project(&self.group, e)?;
        self.index_of(&k)
            .ok_or_else(|| invalid(format!("projection of {e} not found")))
    }

    pub fn eval_word(&self, w: &Word) -> Result<usize> {
        let mut acc = 0usize;
        for &s in &w.0 {
            let gi = *self
                .generator_images
                .get(s)
                .ok_or_else(|| invalid(format!("generator index {s} out of range")))?;
            acc = self.mul(acc, gi);
        }
        Ok(acc)
    }

    /// Distinct non-identity generator images: the neighbours of the
    /// identity in the simple Cayley graph.
    pub fn simple_generators(&self) -> Vec<usize> {
        let mut gens: Vec<usize> = self
            .generator_images
            .iter()
            .copied()
            .filter(|&g| g != 0)
            .collect();
        gens.sort_unstable();
        gens.dedup();
        gens
    }

    /// Adjacency lists of the simple (multi-edges collapsed) Cayley graph.
    pub fn cayley_adjacency(&self) -> Vec<Vec<usize>> {
        let gens = self.simple_generators();
        (0..self.order())
            .map(|x| {
                let mut nb: Vec<usize> = gens.iter().map(|&s| self.mul(x, s)).collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect()
    }

    /// Graphviz rendering with one edge per (element, generator) pair.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{} level {}\" {{\n", self.group.name, self.level);
        for i in 0..self.order() {
            out.push_str(&format!("  {i} [label=\"{}\"];\n", self.label(i)));
        }
        for i in 0..self.order() {
            for (s, &gi) in self.generator_images.iter().enumerate() {
                let j = self.mul(i, gi);
                out.push_str(&format!(
                    "  {i} -> {j} [label=\"{}\"];\n",
                    self.group.generators[s].symbol
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}
