//! Probability measures on finite metric spaces: pushforwards, the
//! Prokhorov metric, translation by a group action and invariance defects.

use std::sync::Arc;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::{FiniteQuotient, Word};
use crate::metric::{FiniteMetricSpace, Metric, TOL};

/// Largest space on which the Prokhorov distance is computed exactly by a
/// sweep over all subsets.
pub const EXACT_PROKHOROV_LIMIT: usize = 22;

pub const SNAPSHOT_CAVEAT: &str = "measures live on finite snapshots and nets, not on the limit space";

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(space: Arc<FiniteMetricSpace>, weights: Vec<f64>) -> Result<FiniteMeasure> {
        if weights.len() != space.len() {
            return Err(invalid(format!(
                "{} weights for a space of {} points",
                weights.len(),
                space.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid(format!("bad weight {} at point {i}", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(FiniteMeasure { space, weights })
    }

    pub fn point_mass(space: Arc<FiniteMetricSpace>, point: usize) -> Result<FiniteMeasure> {
        if point >= space.len() {
            return Err(invalid(format!("point {point} outside the space")));
        }
        let mut weights = vec![0.0; space.len()];
        weights[point] = 1.0;
        Ok(FiniteMeasure { space, weights })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `{label: weight}` in point order.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let mut map = IndexMap::new();
        for (l, &w) in self.space.labels().iter().zip(&self.weights) {
            if map.insert(l.clone(), w).is_some() {
                return Err(invalid(format!("duplicate point label {l:?}")));
            }
        }
        Ok(serde_json::to_value(map)?)
    }

    pub fn from_json(space: Arc<FiniteMetricSpace>, value: &serde_json::Value) -> Result<FiniteMeasure> {
        let map: IndexMap<String, f64> = serde_json::from_value(value.clone())?;
        if map.len() != space.len() {
            return Err(invalid("measure does not list every point once"));
        }
        let weights = space
            .labels()
            .iter()
            .map(|l| {
                map.get(l)
                    .copied()
                    .ok_or_else(|| invalid(format!("no weight for point {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FiniteMeasure::new(space, weights)
    }

    fn same_space(&self, other: &FiniteMeasure) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(invalid("measures live on different spaces"))
        }
    }
}

pub fn uniform(space: Arc<FiniteMetricSpace>) -> Result<FiniteMeasure> {
    let n = space.len();
    if n == 0 {
        return Err(invalid("uniform measure on an empty space"));
    }
    Ok(FiniteMeasure {
        space,
        weights: vec![1.0 / n as f64; n],
    })
}

/// Image measure `f_* μ` on `codomain`.
pub fn pushforward(
    mu: &FiniteMeasure,
    table: &[usize],
    codomain: Arc<FiniteMetricSpace>,
) -> Result<FiniteMeasure> {
    if table.len() != mu.weights.len() {
        return Err(invalid("map is not defined on the whole space"));
    }
    let mut weights = vec![0.0; codomain.len()];
    for (&v, &w) in table.iter().zip(&mu.weights) {
        *weights
            .get_mut(v)
            .ok_or_else(|| invalid(format!("image point {v} outside the codomain")))? += w;
    }
    Ok(FiniteMeasure {
        space: codomain,
        weights,
    })
}

/// `sup_A |λ(A) − ν(A)| = ½ Σ |λ_x − ν_x|`.
pub fn total_variation(a: &FiniteMeasure, b: &FiniteMeasure) -> Result<f64> {
    a.same_space(b)?;
    Ok(0.5 * a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prokhorov {
    /// The distance when `exact`, else `upper`.
    pub value: f64,
    pub exact: bool,
    pub lower: f64,
    pub upper: f64,
}

/// `inf{η > 0 : λ(A) ≤ ν(A^η) + η and ν(A) ≤ λ(A^η) + η for all A}` with
/// closed neighbourhoods `A^η`.
///
/// For fixed `A` the neighbourhood only changes at pairwise distances, so
/// the worst violation `D(η)` is a step function and the infimum is
/// `min_i max(d_i, D(d_i))` over the sorted distances `d_i`, capped at 1.
/// Spaces over [`EXACT_PROKHOROV_LIMIT`] points are refused unless
/// `allow_bounds`, in which case only closed balls are swept (a lower
/// bound) and total variation serves as the upper bound.
pub fn prokhorov(a: &FiniteMeasure, b: &FiniteMeasure, allow_bounds: bool) -> Result<Prokhorov> {
    a.same_space(b)?;
    let space = &*a.space;
    let n = space.len();
    let mut radii: Vec<f64> = space.matrix().to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if n <= EXACT_PROKHOROV_LIMIT {
        let masks = SubsetMasses::new(&a.weights, &b.weights);
        let value = radii
            .par_iter()
            .map(|&r| r.max(masks.deficiency(&neighbours(space, r))))
            .reduce(|| 1.0, f64::min)
            .min(1.0);
        return Ok(Prokhorov {
            value,
            exact: true,
            lower: value,
            upper: value,
        });
    }
    if !allow_bounds {
        return Err(Error::Budget {
            what: "exact Prokhorov subset sweep".into(),
            limit: EXACT_PROKHOROV_LIMIT as u64,
        });
    }
    let lower = radii
        .par_iter()
        .map(|&r| r.max(ball_deficiency(space, &radii, r, &a.weights, &b.weights)))
        .reduce(|| 1.0, f64::min)
        .min(1.0);
    let upper = total_variation(a, b)?.min(1.0);
    Ok(Prokhorov {
        value: upper,
        exact: lower == upper,
        lower,
        upper,
    })
}

fn neighbours(space: &FiniteMetricSpace, r: f64) -> Vec<u32> {
    let n = space.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| space.dist(i, j) <= r)
                .fold(0u32, |m, j| m | 1 << j)
        })
        .collect()
}

struct SubsetMasses {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl SubsetMasses {
    fn new(wa: &[f64], wb: &[f64]) -> SubsetMasses {
        let table = |w: &[f64]| {
            let mut t = vec![0.0; 1 << w.len()];
            for m in 1..t.len() {
                t[m] = t[m & (m - 1)] + w[m.trailing_zeros() as usize];
            }
            t
        };
        SubsetMasses {
            a: table(wa),
            b: table(wb),
        }
    }

    /// `max_A max(λ(A) − ν(A^r), ν(A) − λ(A^r))` given the closed
    /// `r`-neighbourhood of every point.
    fn deficiency(&self, nbr: &[u32]) -> f64 {
        let mut hull = vec![0u32; self.a.len()];
        let mut worst = 0.0f64;
        for m in 1..hull.len() {
            let h = hull[m & (m - 1)] | nbr[m.trailing_zeros() as usize];
            hull[m] = h;
            let h = h as usize;
            worst = worst.max(self.a[m] - self.b[h]).max(self.b[m] - self.a[h]);
        }
        worst
    }
}

/// [`SubsetMasses::deficiency`] restricted to closed balls `A`.
fn ball_deficiency(space: &FiniteMetricSpace, radii: &[f64], r: f64, wa: &[f64], wb: &[f64]) -> f64 {
    let n = space.len();
    let mass = |w: &[f64], c: usize, s: f64| {
        (0..n)
            .filter(|&j| space.dist(c, j) <= s)
            .map(|j| w[j])
            .sum::<f64>()
    };
    let mut worst = 0.0f64;
    for c in 0..n {
        for &s in radii {
            // A = B(c, s) gives A^r ⊆ B(c, s + r)
            let (ia, ib) = (mass(wa, c, s), mass(wb, c, s));
            let (oa, ob) = (mass(wa, c, s + r + TOL), mass(wb, c, s + r + TOL));
            worst = worst.max(ia - ob).max(ib - oa);
        }
    }
    worst
}

/// Generators acting on the points of a finite space by permutations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAction {
    pub symbols: Vec<String>,
    /// Index of each generator's inverse.
    pub inverse: Vec<usize>,
    /// `perms[s][x] = s · x`.
    pub perms: Vec<Vec<usize>>,
}

impl GroupAction {
    pub fn new(symbols: Vec<String>, inverse: Vec<usize>, perms: Vec<Vec<usize>>) -> Result<GroupAction> {
        let k = symbols.len();
        if inverse.len() != k || perms.len() != k {
            return Err(invalid("action needs one permutation and inverse per generator"));
        }
        let n = perms.first().map_or(0, Vec::len);
        for (s, p) in perms.iter().enumerate() {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
                return Err(invalid(format!("generator {} does not act bijectively", symbols[s])));
            }
        }
        for (s, &t) in inverse.iter().enumerate() {
            let undoes = t < k && (0..n).all(|x| perms[t][perms[s][x]] == x);
            if !undoes {
                return Err(invalid(format!("generator {} has no inverse action", symbols[s])));
            }
        }
        Ok(GroupAction { symbols, inverse, perms })
    }

    /// Left multiplication of a quotient on itself. Words of length at most
    /// 4 that are trivial in the quotient are checked to act trivially.
    pub fn left_multiplication(q: &FiniteQuotient) -> Result<GroupAction> {
        let group = q.group();
        let gens = q.generator_images();
        let perms = gens
            .iter()
            .map(|&g| (0..q.order()).map(|x| q.mul(g, x)).collect())
            .collect();
        let action = GroupAction::new(
            group.symbols(),
            group.generators.iter().map(|g| g.inverse).collect(),
            perms,
        )?;
        for w in Word::all_up_to(gens.len(), 4) {
            if q.eval_word(&w)? == q.identity_index() && (0..q.order()).any(|x| action.apply(&w, x) != x) {
                return Err(invalid(format!("relation {} fails in the action", w.render(&action.symbols))));
            }
        }
        Ok(action)
    }

    /// Rotation of `C_n` by `±step`.
    pub fn rotation(n: usize, step: usize) -> Result<GroupAction> {
        if n == 0 {
            return Err(invalid("rotation of an empty cycle"));
        }
        let shift = |d: usize| (0..n).map(|x| (x + d) % n).collect();
        GroupAction::new(
            vec!["a".into(), "A".into()],
            vec![1, 0],
            vec![shift(step % n), shift(n - step % n)],
        )
    }

    pub fn points(&self) -> usize {
        self.perms.first().map_or(0, Vec::len)
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let w = Word::parse(text, &self.symbols)?;
        Ok(w)
    }

    /// `g · x`, the rightmost letter acting first.
    pub fn apply(&self, g: &Word, x: usize) -> usize {
        g.0.iter().rev().fold(x, |y, &s| self.perms[s][y])
    }

    pub fn inverse_word(&self, g: &Word) -> Word {
        g.inverse(|s| self.inverse[s])
    }

    fn fits(&self, mu: &FiniteMeasure) -> Result<()> {
        if self.points() != mu.weights.len() {
            return Err(invalid("action and measure live on different spaces"));
        }
        Ok(())
    }
}

/// `(g · μ)(A) = μ(g⁻¹ A)`.
pub fn translate(g: &Word, mu: &FiniteMeasure, action: &GroupAction) -> Result<FiniteMeasure> {
    action.fits(mu)?;
    if g.0.iter().any(|&s| s >= action.symbols.len()) {
        return Err(invalid("word uses an unknown generator"));
    }
    let mut weights = vec![0.0; mu.weights.len()];
    for (x, &w) in mu.weights.iter().enumerate() {
        weights[action.apply(g, x)] = w;
    }
    Ok(FiniteMeasure {
        space: mu.space.clone(),
        weights,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub word: String,
    pub tv: f64,
    pub prokhorov: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub caveat: String,
    pub rows: Vec<DefectRow>,
    pub max_tv: f64,
    pub max_prokhorov: f64,
    pub worst_word: String,
    /// False when some Prokhorov entry is only an upper bound.
    pub exact: bool,
}

impl DefectReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("word,tv,prokhorov\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.word, r.tv, r.prokhorov));
        }
        s
    }
}

/// Distances between `g · μ` and `μ` over all words of length at most
/// `max_len`. The worst word maximizes the Prokhorov defect, then total
/// variation; ties go to the earlier word.
pub fn invariance_defect(
    mu: &FiniteMeasure,
    action: &GroupAction,
    max_len: usize,
    allow_bounds: bool,
) -> Result<DefectReport> {
    action.fits(mu)?;
    let rows = Word::all_up_to(action.symbols.len(), max_len)
        .par_iter()
        .map(|w| {
            let moved = translate(w, mu, action)?;
            let p = prokhorov(&moved, mu, allow_bounds)?;
            Ok(DefectRow {
                word: w.render(&action.symbols),
                tv: total_variation(&moved, mu)?,
                prokhorov: p.value,
                exact: p.exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0;
    for (i, r) in rows.iter().enumerate() {
        let w = &rows[worst];
        if (r.prokhorov, r.tv) > (w.prokhorov, w.tv) {
            worst = i;
        }
    }
    Ok(DefectReport {
        caveat: SNAPSHOT_CAVEAT.into(),
        max_tv: rows.iter().map(|r| r.tv).fold(0.0, f64::max),
        max_prokhorov: rows.iter().map(|r| r.prokhorov).fold(0.0, f64::max),
        worst_word: rows[worst].word.clone(),
        exact: rows.iter().all(|r| r.exact),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStarEvidence {
    /// Weights of the last measure.
    pub limit: Vec<f64>,
    /// `table[j][k] = d_P(μ_j, μ_k)`.
    pub table: Vec<Vec<f64>>,
    /// `tail[m] = max_{j,k ≥ m} d_P(μ_j, μ_k)`.
    pub tail: Vec<f64>,
    /// The tail from the midpoint on is at most half the whole tail.
    pub cauchy: bool,
}

/// Pairwise Prokhorov distances along a sequence of measures on one space.
pub fn weak_star_evidence(seq: &[FiniteMeasure]) -> Result<WeakStarEvidence> {
    let last = seq.last().ok_or_else(|| invalid("empty sequence of measures"))?;
    let n = seq.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect();
    let values = pairs
        .par_iter()
        .map(|&(j, k)| prokhorov(&seq[j], &seq[k], false).map(|p| p.value))
        .collect::<Result<Vec<_>>>()?;
    let mut table = vec![vec![0.0; n]; n];
    for (&(j, k), &v) in pairs.iter().zip(&values) {
        table[j][k] = v;
        table[k][j] = v;
    }
    let mut tail = vec![0.0f64; n];
    for m in (0..n).rev() {
        let row = table[m][m..].iter().copied().fold(0.0, f64::max);
        tail[m] = if m + 1 < n { tail[m + 1].max(row) } else { row };
    }
    let cauchy = tail[n / 2] <= 0.5 * tail[0];
    Ok(WeakStarEvidence {
        limit: last.weights.clone(),
        table,
        tail,
        cauchy,
    })
}
