use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on the number of elements a ball may hold.
pub const DEFAULT_BALL_BUDGET: usize = 1_000_000;

/// A concrete element of one of the supported infinite groups, in canonical
/// form: an integer for Z, a freely reduced word for F_k (letters `±1..=±k`),
/// or a row-major integer matrix for SL_n(Z).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Int(i64),
    Word(Vec<i32>),
    Matrix(Vec<i64>),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Int(k) => write!(f, "{k}"),
            Element::Word(w) if w.is_empty() => f.write_str("1"),
            Element::Word(w) => {
                for &l in w {
                    let c = (b'a' + (l.unsigned_abs() - 1) as u8) as char;
                    if l > 0 {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, "{}", c.to_ascii_uppercase())?;
                    }
                }
                Ok(())
            }
            Element::Matrix(m) => {
                let n = (m.len() as f64).sqrt() as usize;
                f.write_str("[")?;
                for (r, row) in m.chunks(n).enumerate() {
                    if r > 0 {
                        f.write_str(";")?;
                    }
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    f.write_str(&cells.join(","))?;
                }
                f.write_str("]")
            }
        }
    }
}

/// The evaluation rule of a marked group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Carrier {
    Integers,
    Free { rank: usize },
    SpecialLinear { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub symbol: String,
    pub value: Element,
    /// Index of the formal inverse inside the generator list.
    pub inverse: usize,
}

/// A word in the generators, stored as generator indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The formal inverse word (reversed, each letter inverted).
    pub fn inverse(&self, inverse_of: impl Fn(usize) -> usize) -> Word {
        Word(self.0.iter().rev().map(|&s| inverse_of(s)).collect())
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Parses a `.`-separated list of generator symbols; `""` or `"e"` is
    /// the empty word.
    pub fn parse(text: &str, symbols: &[String]) -> Result<Word> {
        let text = text.trim();
        if text.is_empty() || text == "e" {
            return Ok(Word::empty());
        }
        text.split('.')
            .map(|tok| {
                symbols
                    .iter()
                    .position(|s| s == tok)
                    .ok_or_else(|| invalid(format!("unknown generator symbol {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn render(&self, symbols: &[String]) -> String {
        if self.0.is_empty() {
            return "e".to_string();
        }
        self.0
            .iter()
            .map(|&s| symbols[s].as_str())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// All words of length exactly `len` over `count` letters, in
    /// lexicographic order.
    pub fn all_of_length(count: usize, len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (0..count).map(move |s| {
                        let mut v = w.0.clone();
                        v.push(s);
                        Word(v)
                    })
                })
                .collect();
        }
        out
    }

    /// All words of length at most `max_len`, shortest first.
    pub fn all_up_to(count: usize, max_len: usize) -> Vec<Word> {
        (0..=max_len)
            .flat_map(|l| Word::all_of_length(count, l))
            .collect()
    }
}

/// A finitely generated group with a symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedGroup {
    pub name: String,
    pub carrier: Carrier,
    pub generators: Vec<Generator>,
}

impl MarkedGroup {
    /// Z with generators `±s` for every step `s`.
    pub fn integers(steps: &[i64]) -> Result<MarkedGroup> {
        if steps.is_empty() {
            return Err(invalid("integers need at least one step"));
        }
        let mut generators = Vec::new();
        for &s in steps {
            if s <= 0 {
                return Err(invalid(format!("integer step must be positive, got {s}")));
            }
            let i = generators.len();
            generators.push(Generator {
                symbol: format!("+{s}"),
                value: Element::Int(s),
                inverse: i + 1,
            });
            generators.push(Generator {
                symbol: format!("-{s}"),
                value: Element::Int(-s),
                inverse: i,
            });
        }
        let name = if steps == [1] {
            "Z".to_string()
        } else {
            format!("Z{steps:?}")
        };
        MarkedGroup::new(name, Carrier::Integers, generators)
    }

    /// The free group on `rank` letters `a, b, ...` with inverses `A, B, ...`.
    pub fn free(rank: usize) -> Result<MarkedGroup> {
        if rank == 0 || rank > 26 {
            return Err(invalid(format!("free rank must lie in 1..=26, got {rank}")));
        }
        let mut generators = Vec::new();
        for l in 1..=rank as i32 {
            let c = (b'a' + (l - 1) as u8) as char;
            let i = generators.len();
            generators.push(Generator {
                symbol: c.to_string(),
                value: Element::Word(vec![l]),
                inverse: i + 1,
            });
            generators.push(Generator {
                symbol: c.to_ascii_uppercase().to_string(),
                value: Element::Word(vec![-l]),
                inverse: i,
            });
        }
        MarkedGroup::new(format!("F{rank}"), Carrier::Free { rank }, generators)
    }

    /// SL_n(Z) generated by the elementary matrices `e_ij(±1)`, symbols
    /// `eij` and `Eij`.
    pub fn special_linear(dim: usize) -> Result<MarkedGroup> {
        if !(2..=4).contains(&dim) {
            return Err(invalid(format!("SL_n dimension must lie in 2..=4, got {dim}")));
        }
        let mut generators = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if i == j {
                    continue;
                }
                let mut m = identity_matrix(dim);
                m[i * dim + j] = 1;
                let mut minv = identity_matrix(dim);
                minv[i * dim + j] = -1;
                let k = generators.len();
                generators.push(Generator {
                    symbol: format!("e{}{}", i + 1, j + 1),
                    value: Element::Matrix(m),
                    inverse: k + 1,
                });
                generators.push(Generator {
                    symbol: format!("E{}{}", i + 1, j + 1),
                    value: Element::Matrix(minv),
                    inverse: k,
                });
            }
        }
        MarkedGroup::new(
            format!("SL{dim}(Z)"),
            Carrier::SpecialLinear { dim },
            generators,
        )
    }

    /// Validates symmetry and inversion of the generating set.
    pub fn new(name: String, carrier: Carrier, generators: Vec<Generator>) -> Result<MarkedGroup> {
        let g = MarkedGroup {
            name,
            carrier,
            generators,
        };
        let id = g.identity();
        for (i, s) in g.generators.iter().enumerate() {
            if s.value == id {
                return Err(invalid(format!("generator {} is the identity", s.symbol)));
            }
            let j = s.inverse;
            if j >= g.generators.len() || g.generators[j].inverse != i {
                return Err(invalid(format!("generator {} has no formal inverse", s.symbol)));
            }
            if g.mul(&s.value, &g.generators[j].value)? != id {
                return Err(invalid(format!(
                    "generator {} and {} are not mutually inverse",
                    s.symbol, g.generators[j].symbol
                )));
            }
            g.check_carrier(&s.value)?;
        }
        Ok(g)
    }

    fn check_carrier(&self, e: &Element) -> Result<()> {
        match (&self.carrier, e) {
            (Carrier::Integers, Element::Int(_)) => Ok(()),
            (Carrier::Free { rank }, Element::Word(w))
                if w.iter().all(|l| *l != 0 && l.unsigned_abs() as usize <= *rank) =>
            {
                Ok(())
            }
            (Carrier::SpecialLinear { dim }, Element::Matrix(m)) if m.len() == dim * dim => {
                Ok(())
            }
            _ => Err(invalid(format!("element {e} does not belong to {}", self.name))),
        }
    }

    pub fn symbols(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.symbol.clone()).collect()
    }

    pub fn identity(&self) -> Element {
        match self.carrier {
            Carrier::Integers => Element::Int(0),
            Carrier::Free { .. } => Element::Word(Vec::new()),
            Carrier::SpecialLinear { dim } => Element::Matrix(identity_matrix(dim)),
        }
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Result<Element> {
        match (a, b) {
            (Element::Int(x), Element::Int(y)) => x
                .checked_add(*y)
                .map(Element::Int)
                .ok_or_else(|| Error::Overflow("adding integers".into())),
            (Element::Word(x), Element::Word(y)) => {
                let mut out = x.clone();
                for &l in y {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Ok(Element::Word(out))
            }
            (Element::Matrix(x), Element::Matrix(y)) if x.len() == y.len() => {
                let n = (x.len() as f64).sqrt() as usize;
                let mut out = vec![0i64; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0i64;
                        for k in 0..n {
                            acc = x[i * n + k]
                                .checked_mul(y[k * n + j])
                                .and_then(|p| acc.checked_add(p))
                                .ok_or_else(|| Error::Overflow("multiplying matrices".into()))?;
                        }
                        out[i * n + j] = acc;
                    }
                }
                Ok(Element::Matrix(out))
            }
            _ => Err(invalid(format!("cannot multiply {a} and {b}"))),
        }
    }

    pub fn inverse(&self, a: &Element) -> Result<Element> {
        match a {
            Element::Int(x) => Ok(Element::Int(-x)),
            Element::Word(w) => Ok(Element::Word(w.iter().rev().map(|l| -l).collect())),
            Element::Matrix(m) => integer_adjugate(m).map(Element::Matrix),
        }
    }

    pub fn eval_word(&self, w: &Word) -> Result<Element> {
        let mut acc = self.identity();
        for &s in &w.0 {
            let g = self
                .generators
                .get(s)
                .ok_or_else(|| invalid(format!("generator index {s} out of range")))?;
            acc = self.mul(&acc, &g.value)?;
        }
        Ok(acc)
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        Word::parse(text, &self.symbols())
    }

    /// Word length `|e|` with respect to the generating set. Uses closed forms
    /// for Z with `±1` and for free groups, and breadth-first search
    /// otherwise.
    pub fn word_length(&self, e: &Element, budget: usize) -> Result<u32> {
        self.check_carrier(e)?;
        match (&self.carrier, e) {
            (Carrier::Integers, Element::Int(k)) if self.generators.len() == 2 => {
                let step = match self.generators[0].value {
                    Element::Int(s) => s,
                    _ => unreachable!(),
                };
                if step == 1 {
                    return Ok(k.unsigned_abs() as u32);
                }
            }
            (Carrier::Free { .. }, Element::Word(w)) => return Ok(w.len() as u32),
            _ => {}
        }
        let mut ball = Ball::new(self);
        loop {
            if let Some(d) = ball.distance(e) {
                return Ok(d);
            }
            ball.grow(self, budget)?;
        }
    }
}

fn identity_matrix(n: usize) -> Vec<i64> {
    let mut m = vec![0; n * n];
    for i in 0..n {
        m[i * n + i] = 1;
    }
    m
}

fn minor(m: &[i64], n: usize, row: usize, col: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != row && j != col {
                out.push(m[i * n + j]);
            }
        }
    }
    out
}

fn determinant(m: &[i64], n: usize) -> Result<i64> {
    if n == 1 {
        return Ok(m[0]);
    }
    let mut acc = 0i64;
    for j in 0..n {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let term = m[j]
            .checked_mul(determinant(&minor(m, n, 0, j), n - 1)?)
            .and_then(|t| t.checked_mul(sign))
            .ok_or_else(|| Error::Overflow("computing a determinant".into()))?;
        acc = acc
            .checked_add(term)
            .ok_or_else(|| Error::Overflow("computing a determinant".into()))?;
    }
    Ok(acc)
}

/// Inverse of a determinant-one integer matrix: its adjugate.
fn integer_adjugate(m: &[i64]) -> Result<Vec<i64>> {
    let n = (m.len() as f64).sqrt() as usize;
    if determinant(m, n)? != 1 {
        return Err(invalid("matrix does not have determinant 1"));
    }
    let mut out = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            out[j * n + i] = sign * determinant(&minor(m, n, i, j), n - 1)?;
        }
    }
    Ok(out)
}

/// A ball `B_r(1_G)` in an infinite group with exact word distances, kept
/// sorted by `(distance, canonical element order)`.
#[derive(Clone, Debug)]
pub struct Ball {
    radius: u32,
    elements: Vec<(Element, u32)>,
    index: HashMap<Element, usize>,
}

impl Ball {
    pub fn new(g: &MarkedGroup) -> Ball {
        let id = g.identity();
        let mut index = HashMap::new();
        index.insert(id.clone(), 0);
        Ball {
            radius: 0,
            elements: vec![(id, 0)],
            index,
        }
    }

    /// Adds the next sphere.
    pub fn grow(&mut self, g: &MarkedGroup, budget: usize) -> Result<()> {
        let start = self
            .elements
            .iter()
            .position(|(_, d)| *d == self.radius)
            .unwrap_or(0);
        let mut sphere: Vec<Element> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (e, _) in &self.elements[start..] {
            for s in &g.generators {
                let next = g.mul(e, &s.value)?;
                if !self.index.contains_key(&next) && seen.insert(next.clone()) {
                    sphere.push(next);
                }
            }
        }
        if self.elements.len() + sphere.len() > budget {
            return Err(Error::Budget {
                what: format!("ball of radius {} in {}", self.radius + 1, g.name),
                limit: budget as u64,
            });
        }
        sphere.sort();
        self.radius += 1;
        for e in sphere {
            self.index.insert(e.clone(), self.elements.len());
            self.elements.push((e, self.radius));
        }
        Ok(())
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn elements(&self) -> &[(Element, u32)] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn distance(&self, e: &Element) -> Option<u32> {
        self.index.get(e).map(|&i| self.elements[i].1)
    }

    pub fn position(&self, e: &Element) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Number of elements within radius `r` (a prefix of `elements`).
    pub fn prefix_len(&self, r: u32) -> usize {
        self.elements.partition_point(|(_, d)| *d <= r)
    }
}

/// `B_r(1_G)` with exact word distances in canonical order.
pub fn ball_in_group(g: &MarkedGroup, r: u32, budget: usize) -> Result<Vec<(Element, u32)>> {
    let mut ball = Ball::new(g);
    while ball.radius() < r {
        ball.grow(g, budget)?;
    }
    Ok(ball.elements)
}
