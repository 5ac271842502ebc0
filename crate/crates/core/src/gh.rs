//! Hausdorff distances, ε-isometries and Gromov–Hausdorff bounds between
//! finite metric spaces.

use serde::{Deserialize, Serialize};

use crate::coarse::{density_radius, distortion};
use crate::error::{invalid, Result};
use crate::metric::{FiniteMetricSpace, Metric, TOL};
use crate::search::{decide, distinct, minimize, Branch, Decision};

/// Default cap on search nodes for the Gromov–Hausdorff searches.
pub const DEFAULT_GH_BUDGET: u64 = 20_000_000;

pub const TRUNCATION_CAVEAT: &str = "finite snapshots stand in for compact limit spaces; \
    values describe the snapshots only";

/// `max(sup_a d(a, B), sup_b d(b, A))` inside one space.
pub fn hausdorff(ambient: &impl Metric, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Hausdorff distance needs nonempty subsets"));
    }
    let n = ambient.len();
    if a.iter().chain(b).any(|&i| i >= n) {
        return Err(invalid("subset point outside the space"));
    }
    let one = |s: &[usize], t: &[usize]| {
        s.iter()
            .map(|&x| ambient.dist_to_set(x, t))
            .fold(0.0, f64::max)
    };
    Ok(one(a, b).max(one(b, a)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IsometryWitness {
    /// A pair whose distance changes by more than `ε`.
    Distortion { x: usize, y: usize, change: f64 },
    /// A codomain point farther than `ε` from the image.
    Uncovered { point: usize, distance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub epsilon: f64,
    pub passed: bool,
    pub distortion: f64,
    pub density_radius: f64,
    pub witness: Option<IsometryWitness>,
}

/// Checks `dis f ≤ ε` and that the image is `ε`-dense.
pub fn certify_eps_isometry(
    domain: &impl Metric,
    codomain: &impl Metric,
    table: &[usize],
    epsilon: f64,
) -> Result<IsometryReport> {
    if table.len() != domain.len() || table.iter().any(|&v| v >= codomain.len()) {
        return Err(invalid("map does not fit its spaces"));
    }
    let n = domain.len();
    let mut witness = None;
    'pairs: for x in 0..n {
        for y in x + 1..n {
            let change = (codomain.dist(table[x], table[y]) - domain.dist(x, y)).abs();
            if change > epsilon + TOL {
                witness = Some(IsometryWitness::Distortion { x, y, change });
                break 'pairs;
            }
        }
    }
    if witness.is_none() {
        witness = (0..codomain.len())
            .map(|p| (p, codomain.dist_to_set(p, table)))
            .find(|&(_, d)| d > epsilon + TOL)
            .map(|(point, distance)| IsometryWitness::Uncovered { point, distance });
    }
    Ok(IsometryReport {
        epsilon,
        passed: witness.is_none(),
        distortion: distortion(domain, codomain, table),
        density_radius: density_radius(codomain, table),
        witness,
    })
}

/// A correspondence given by a map each way: it relates `x` to `forward[x]`
/// and `backward[y]` to `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub forward: Vec<usize>,
    pub backward: Vec<usize>,
}

impl Correspondence {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<(usize, usize)> = self.forward.iter().copied().enumerate().collect();
        p.extend(self.backward.iter().enumerate().map(|(y, &x)| (x, y)));
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn distortion(&self, x: &impl Metric, y: &impl Metric) -> f64 {
        relation_distortion(x, y, &self.pairs())
    }
}

/// `sup |d_X(x, x') − d_Y(y, y')|` over pairs of related pairs.
pub fn relation_distortion(x: &impl Metric, y: &impl Metric, pairs: &[(usize, usize)]) -> f64 {
    let mut best = 0.0f64;
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for &(c, d) in &pairs[i + 1..] {
            best = best.max((x.dist(a, c) - y.dist(b, d)).abs());
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhResult {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub witness: Option<Correspondence>,
    pub nodes: u64,
}

/// `½ max(max_x min_y |ecc x − ecc y|, max_y min_x |ecc x − ecc y|)`, a lower
/// bound that dominates `½ |diam X − diam Y|`.
pub fn eccentricity_bound(x: &impl Metric, y: &impl Metric) -> f64 {
    let ex: Vec<f64> = (0..x.len()).map(|i| x.eccentricity(i)).collect();
    let ey: Vec<f64> = (0..y.len()).map(|i| y.eccentricity(i)).collect();
    let side = |s: &[f64], t: &[f64]| {
        s.iter()
            .map(|a| t.iter().map(|b| (a - b).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    0.5 * side(&ex, &ey).max(side(&ey, &ex))
}

/// One step of the correspondence search: a point whose partner is chosen.
#[derive(Clone, Copy)]
enum Slot {
    X(usize),
    Y(usize),
}

struct GhSearch<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    slots: Vec<Slot>,
}

impl GhSearch<'_> {
    fn pair(&self, slot: Slot, choice: usize) -> (usize, usize) {
        match slot {
            Slot::X(a) => (a, choice),
            Slot::Y(b) => (choice, b),
        }
    }

    fn choices(&self, slot: Slot) -> usize {
        match slot {
            Slot::X(_) => self.y.len(),
            Slot::Y(_) => self.x.len(),
        }
    }

    fn fits(&self, pairs: &[(usize, usize)], p: (usize, usize), t: f64) -> bool {
        pairs
            .iter()
            .all(|&(a, b)| (self.x.dist(a, p.0) - self.y.dist(b, p.1)).abs() <= t)
    }

    /// Looks for a correspondence of distortion at most `t` whose first
    /// slot takes the given choice.
    fn branch(&self, first: usize, t: f64, b: &mut Branch<'_, Vec<(usize, usize)>>) {
        if !b.tick() {
            return;
        }
        let mut pairs = vec![self.pair(self.slots[0], first)];
        self.descend(1, t, &mut pairs, b);
    }

    fn descend(&self, k: usize, t: f64, pairs: &mut Vec<(usize, usize)>, b: &mut Branch<'_, Vec<(usize, usize)>>) {
        if k == self.slots.len() {
            b.found(pairs.clone());
            return;
        }
        let slot = self.slots[k];
        for c in 0..self.choices(slot) {
            let p = self.pair(slot, c);
            if !self.fits(pairs, p, t) {
                continue;
            }
            if !b.tick() {
                return;
            }
            pairs.push(p);
            self.descend(k + 1, t, pairs, b);
            pairs.pop();
            if b.done() {
                return;
            }
        }
    }
}

fn by_eccentricity(m: &impl Metric) -> Vec<usize> {
    let ecc: Vec<f64> = (0..m.len()).map(|i| m.eccentricity(i)).collect();
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| ecc[b].total_cmp(&ecc[a]).then(a.cmp(&b)));
    order
}

/// Nearest-eccentricity partner maps, used as the starting incumbent.
fn greedy(x: &impl Metric, y: &impl Metric) -> Correspondence {
    let ex: Vec<f64> = (0..x.len()).map(|i| x.eccentricity(i)).collect();
    let ey: Vec<f64> = (0..y.len()).map(|i| y.eccentricity(i)).collect();
    let nearest = |a: f64, t: &[f64]| {
        (0..t.len())
            .min_by(|&i, &j| (t[i] - a).abs().total_cmp(&(t[j] - a).abs()).then(i.cmp(&j)))
            .expect("nonempty")
    };
    Correspondence {
        forward: ex.iter().map(|&a| nearest(a, &ey)).collect(),
        backward: ey.iter().map(|&b| nearest(b, &ex)).collect(),
    }
}

/// Every value `|d_X(a, c) − d_Y(b, d)|` a distortion can take.
fn distortion_candidates(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Vec<f64> {
    let dx = distinct(x.matrix().to_vec());
    let dy = distinct(y.matrix().to_vec());
    distinct(
        dx.iter()
            .flat_map(|a| dy.iter().map(move |b| (a - b).abs()))
            .collect(),
    )
}

/// Certified bounds on `d_GH(X, Y)`. The upper bound is half the least
/// distortion of a correspondence built from a map each way (every
/// correspondence contains one, and distortion only grows with the
/// relation). The least distortion is located by binary search over the
/// finitely many values it can take; each step decides feasibility by a
/// depth-first search. Exact when every step finishes within budget.
pub fn gh_bounds(x: &FiniteMetricSpace, y: &FiniteMetricSpace, budget: u64) -> Result<GhResult> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("metric spaces must be nonempty"));
    }
    let floor = 2.0 * eccentricity_bound(x, y);
    let seed = greedy(x, y);
    let seed_value = seed.distortion(x, y);
    let mut slots: Vec<Slot> = by_eccentricity(x).into_iter().map(Slot::X).collect();
    slots.extend(by_eccentricity(y).into_iter().map(Slot::Y));
    let search = GhSearch { x, y, slots };
    let m = minimize(
        &distortion_candidates(x, y),
        floor,
        (seed_value, seed),
        budget,
        |t, left| {
            let (d, used) = decide(y.len(), left, |c, b| search.branch(c, t, b));
            let d = match d {
                Decision::Feasible(p) => Decision::Feasible(from_pairs(&p, x.len(), y.len())),
                Decision::Infeasible => Decision::Infeasible,
                Decision::Unknown => Decision::Unknown,
            };
            (d, used)
        },
    );
    Ok(GhResult {
        lower: 0.5 * m.lower,
        upper: 0.5 * m.upper.0,
        exact: m.exact,
        witness: Some(m.upper.1),
        nodes: m.nodes,
    })
}

fn from_pairs(pairs: &[(usize, usize)], nx: usize, ny: usize) -> Correspondence {
    let mut forward = vec![usize::MAX; nx];
    let mut backward = vec![usize::MAX; ny];
    let (xs, ys) = pairs.split_at(nx);
    for &(a, b) in xs {
        forward[a] = b;
    }
    for &(a, b) in ys {
        backward[b] = a;
    }
    Correspondence { forward, backward }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    /// Least `max(dis f, density radius of f)` over maps into the target.
    pub epsilon: f64,
    pub map: Vec<usize>,
    /// False when the budget stopped the search; `epsilon` is then an
    /// upper bound.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEvidence {
    pub caveat: String,
    pub items: Vec<EvidenceItem>,
    /// `ε_{k+1} ≤ ε_k + 1e-9` for all `k`.
    pub nonincreasing: bool,
}

struct EpsSearch<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    order: Vec<usize>,
}

impl EpsSearch<'_> {
    /// False when the target points left uncovered by the first `k` images
    /// contain more points pairwise farther than `2t` apart than there are
    /// domain points still to place; each of those needs its own image.
    fn coverable(&self, k: usize, t: f64, table: &[usize]) -> bool {
        let placed = &self.order[..k];
        let spare = self.order.len() - k;
        let mut apart: Vec<usize> = Vec::new();
        for p in 0..self.y.len() {
            if placed.iter().any(|&a| self.y.dist(p, table[a]) <= t) {
                continue;
            }
            if apart.iter().all(|&q| self.y.dist(p, q) > 2.0 * t) {
                apart.push(p);
                if apart.len() > spare {
                    return false;
                }
            }
        }
        true
    }

    fn branch(&self, first: usize, t: f64, b: &mut Branch<'_, Vec<usize>>) {
        if !b.tick() {
            return;
        }
        let mut table = vec![usize::MAX; self.x.len()];
        table[self.order[0]] = first;
        self.descend(1, t, &mut table, b);
    }

    fn descend(&self, k: usize, t: f64, table: &mut [usize], b: &mut Branch<'_, Vec<usize>>) {
        if k == self.order.len() {
            if density_radius(self.y, table) <= t {
                b.found(table.to_vec());
            }
            return;
        }
        if !self.coverable(k, t, table) {
            return;
        }
        let x = self.order[k];
        for v in 0..self.y.len() {
            let fits = self.order[..k]
                .iter()
                .all(|&a| (self.y.dist(table[a], v) - self.x.dist(a, x)).abs() <= t);
            if !fits {
                continue;
            }
            if !b.tick() {
                return;
            }
            table[x] = v;
            self.descend(k + 1, t, table, b);
            table[x] = usize::MAX;
            if b.done() {
                return;
            }
        }
    }
}

/// Greedy map placing each point where it distorts least so far.
fn eps_seed(x: &FiniteMetricSpace, y: &FiniteMetricSpace, order: &[usize]) -> Vec<usize> {
    let mut table = vec![usize::MAX; x.len()];
    for (k, &a) in order.iter().enumerate() {
        let cost = |w: usize, table: &[usize]| {
            order[..k]
                .iter()
                .map(|&b| (y.dist(table[b], w) - x.dist(b, a)).abs())
                .fold(0.0, f64::max)
        };
        table[a] = (0..y.len())
            .min_by(|&u, &v| cost(u, &table).total_cmp(&cost(v, &table)).then(u.cmp(&v)))
            .expect("nonempty");
    }
    table
}

/// The least `ε` for which a map `X → target` is an `ε`-isometry.
pub fn best_eps_isometry(
    x: &FiniteMetricSpace,
    target: &FiniteMetricSpace,
    budget: u64,
) -> Result<EvidenceItem> {
    if x.is_empty() || target.is_empty() {
        return Err(invalid("metric spaces must be nonempty"));
    }
    // grow the domain along nearest neighbours so that pruning bites early
    let mut order = vec![0usize];
    let mut left: Vec<usize> = (1..x.len()).collect();
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                x.dist_to_set(a, &order)
                    .total_cmp(&x.dist_to_set(b, &order))
                    .then(a.cmp(&b))
            })
            .expect("nonempty");
        order.push(left.remove(pos));
    }
    let seed = eps_seed(x, target, &order);
    let seed_value = distortion(x, target, &seed).max(density_radius(target, &seed));
    let mut candidates = distortion_candidates(x, target);
    candidates.extend_from_slice(target.matrix());
    let candidates = distinct(candidates);
    // a map onto fewer points misses some target point entirely
    let floor = if x.len() < target.len() {
        (0..target.len())
            .map(|p| {
                (0..target.len())
                    .filter(|&q| q != p)
                    .map(|q| target.dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let search = EpsSearch { x, y: target, order };
    let m = minimize(&candidates, floor, (seed_value, seed), budget, |t, left| {
        decide(target.len(), left, |c, b| search.branch(c, t, b))
    });
    Ok(EvidenceItem {
        epsilon: m.upper.0,
        map: m.upper.1,
        exact: m.exact,
    })
}

/// Best `ε_k`-isometries from each space of a sequence into a target.
pub fn convergence_evidence(
    seq: &[FiniteMetricSpace],
    target: &FiniteMetricSpace,
    budget: u64,
) -> Result<ConvergenceEvidence> {
    let items = seq
        .iter()
        .map(|x| best_eps_isometry(x, target, budget))
        .collect::<Result<Vec<_>>>()?;
    let nonincreasing = items
        .windows(2)
        .all(|w| w[1].epsilon <= w[0].epsilon + 1e-9);
    Ok(ConvergenceEvidence {
        caveat: TRUNCATION_CAVEAT.into(),
        items,
        nonincreasing,
    })
}
