use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::controls::ControlData;
use crate::error::{invalid, Result};
use crate::groups::{FiniteGroupSpace, Word};
use crate::metric::TOL;

/// Default cap on partial assignments visited by an enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 100_000_000;

/// All controlled maps between two finite groups, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpace {
    pub domain_ref: String,
    pub codomain_ref: String,
    pub domain: FiniteGroupSpace,
    pub codomain: FiniteGroupSpace,
    pub controls: ControlData,
    pub basepointed: bool,
    pub injective_required: bool,
    /// False when the budget stopped the search early.
    pub complete: bool,
    pub nodes: u64,
    /// Tables indexed by domain element, valued in codomain elements.
    pub members: Vec<Vec<usize>>,
}

/// Elements sorted by (distance from identity, index).
pub fn canonical_order(space: &FiniteGroupSpace) -> Vec<usize> {
    let mut order: Vec<usize> = (0..space.order()).collect();
    order.sort_by_key(|&i| (space.norm(i), i));
    order
}

struct Search<'a> {
    codomain: &'a FiniteGroupSpace,
    /// Domain points in canonical order.
    order: Vec<usize>,
    /// Domain distances between `order[i]` and `order[j]`.
    dom: Vec<u32>,
    /// Codomain candidates in canonical order.
    candidates: Vec<usize>,
    /// `allowed[t][s]`: may a domain distance `t` become codomain distance `s`.
    allowed: Vec<Vec<bool>>,
    injective: bool,
    /// Codomain points within `c` of each codomain point, as bitsets.
    cover: Vec<Vec<u64>>,
}

struct Branch {
    nodes: u64,
    exhausted: bool,
    /// Members with the node count at which each was found.
    found: Vec<(u64, Vec<usize>)>,
}

impl Search<'_> {
    fn run(&self, prefix: &[usize], cap: u64) -> Branch {
        let n = self.order.len();
        let mut assign = vec![0usize; n];
        assign[..prefix.len()].copy_from_slice(prefix);
        let mut used = vec![false; self.codomain.order()];
        for &v in prefix {
            used[v] = true;
        }
        let mut out = Branch {
            nodes: 0,
            exhausted: true,
            found: Vec::new(),
        };
        self.descend(prefix.len(), &mut assign, &mut used, cap, &mut out);
        out
    }

    fn fits(&self, k: usize, v: usize, assign: &[usize]) -> bool {
        let n = self.order.len();
        (0..k).all(|j| {
            let t = self.dom[j * n + k] as usize;
            let s = self.codomain.distance(assign[j], v) as usize;
            self.allowed[t][s]
        })
    }

    fn descend(&self, k: usize, assign: &mut [usize], used: &mut [bool], cap: u64, out: &mut Branch) {
        let n = self.order.len();
        if k == n {
            if self.dense(assign) {
                let mut table = vec![0usize; n];
                for (i, &x) in self.order.iter().enumerate() {
                    table[x] = assign[i];
                }
                out.found.push((out.nodes, table));
            }
            return;
        }
        for &v in &self.candidates {
            if !out.exhausted {
                return;
            }
            if self.injective && used[v] {
                continue;
            }
            if !self.fits(k, v, assign) {
                continue;
            }
            if out.nodes >= cap {
                out.exhausted = false;
                return;
            }
            out.nodes += 1;
            assign[k] = v;
            used[v] = true;
            self.descend(k + 1, assign, used, cap, out);
            used[v] = false;
        }
    }

    fn dense(&self, assign: &[usize]) -> bool {
        let words = self.cover[0].len();
        let mut acc = vec![0u64; words];
        for &v in assign {
            for (a, b) in acc.iter_mut().zip(&self.cover[v]) {
                *a |= b;
            }
        }
        let m = self.codomain.order();
        (0..m).all(|p| acc[p / 64] >> (p % 64) & 1 == 1)
    }
}

/// Enumerates every map `domain → codomain` satisfying the controls as a
/// coarse equivalence, optionally fixing the identity and requiring
/// injectivity.
///
/// Domain points are assigned in canonical order and codomain values tried
/// in canonical order; a partial assignment is cut only when an assigned
/// pair already violates a control inequality. Density is checked on
/// complete maps. The search is split across the values of the first free
/// point and merged in branch order, so the result does not depend on the
/// number of threads, including where the budget cuts it.
pub fn enumerate_map_space(
    domain: &FiniteGroupSpace,
    codomain: &FiniteGroupSpace,
    controls: &ControlData,
    basepointed: bool,
    injective_required: bool,
    budget: u64,
) -> Result<MapSpace> {
    let dmax = domain.diameter();
    controls.check_ordered((1..=dmax).map(f64::from))?;
    let order = canonical_order(domain);
    let n = order.len();
    let mut dom = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            dom[i * n + j] = domain.distance(order[i], order[j]);
        }
    }
    let cmax = codomain.diameter();
    let allowed = (0..=dmax)
        .map(|t| {
            (0..=cmax)
                .map(|s| {
                    let (t, s) = (t as f64, s as f64);
                    t == 0.0 && s == 0.0
                        || t > 0.0 && controls.lower(t) <= s + TOL && s <= controls.upper(t) + TOL
                })
                .collect()
        })
        .collect();
    let m = codomain.order();
    let words = m.div_ceil(64);
    let cover = (0..m)
        .map(|p| {
            let mut bits = vec![0u64; words];
            for q in 0..m {
                if codomain.distance(p, q) as f64 <= controls.c + TOL {
                    bits[q / 64] |= 1 << (q % 64);
                }
            }
            bits
        })
        .collect();
    let search = Search {
        codomain,
        order,
        dom,
        candidates: canonical_order(codomain),
        allowed,
        injective: injective_required,
        cover,
    };

    let prefixes: Vec<Vec<usize>> = if basepointed {
        vec![vec![codomain.identity()]]
    } else {
        vec![vec![]]
    };
    // widen to the values of the next point for parallelism
    let mut branches: Vec<Vec<usize>> = Vec::new();
    for p in prefixes {
        if p.len() >= n {
            branches.push(p);
            continue;
        }
        for &v in &search.candidates {
            if injective_required && p.contains(&v) {
                continue;
            }
            let mut probe = p.clone();
            probe.push(v);
            if search.fits(p.len(), v, &probe) {
                branches.push(probe);
            }
        }
    }
    let runs: Vec<Branch> = branches
        .par_iter()
        .map(|prefix| search.run(prefix, budget))
        .collect();

    let mut remaining = budget.saturating_sub(branches.len() as u64);
    let mut complete = budget >= branches.len() as u64;
    let mut nodes = branches.len().min(budget as usize) as u64;
    let mut members = Vec::new();
    for run in runs {
        if !complete {
            break;
        }
        if run.exhausted && run.nodes <= remaining {
            remaining -= run.nodes;
            nodes += run.nodes;
            members.extend(run.found.into_iter().map(|(_, t)| t));
        } else {
            nodes += remaining;
            members.extend(
                run.found
                    .into_iter()
                    .filter(|(at, _)| *at <= remaining)
                    .map(|(_, t)| t),
            );
            complete = false;
        }
    }
    let mut space = MapSpace {
        domain_ref: domain.name.clone(),
        codomain_ref: codomain.name.clone(),
        domain: domain.clone(),
        codomain: codomain.clone(),
        controls: controls.clone(),
        basepointed,
        injective_required,
        complete,
        nodes,
        members,
    };
    space.sort_members();
    Ok(space)
}

impl MapSpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Lexicographic order over the domain's canonical order, comparing
    /// values by their codomain canonical rank.
    pub fn compare(&self, a: &[usize], b: &[usize]) -> Ordering {
        let rank = rank_of(&self.codomain);
        compare_tables(&canonical_order(&self.domain), &rank, a, b)
    }

    fn sort_members(&mut self) {
        let order = canonical_order(&self.domain);
        let rank = rank_of(&self.codomain);
        self.members
            .sort_by(|a, b| compare_tables(&order, &rank, a, b));
        self.members.dedup();
    }

    pub fn position(&self, table: &[usize]) -> Option<usize> {
        let order = canonical_order(&self.domain);
        let rank = rank_of(&self.codomain);
        self.members
            .binary_search_by(|m| compare_tables(&order, &rank, m, table))
            .ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<MapSpace> {
        let s: MapSpace = serde_json::from_str(text)?;
        let (n, m) = (s.domain.order(), s.codomain.order());
        if s.members.iter().any(|t| t.len() != n || t.iter().any(|&v| v >= m)) {
            return Err(invalid("map space member does not fit its spaces"));
        }
        Ok(s)
    }
}

fn rank_of(space: &FiniteGroupSpace) -> Vec<usize> {
    let mut rank = vec![0; space.order()];
    for (r, &i) in canonical_order(space).iter().enumerate() {
        rank[i] = r;
    }
    rank
}

fn compare_tables(order: &[usize], rank: &[usize], a: &[usize], b: &[usize]) -> Ordering {
    for &x in order {
        match rank[a[x]].cmp(&rank[b[x]]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Distance from the identity of the nearest point where the maps differ.
pub fn first_difference(domain: &FiniteGroupSpace, a: &[usize], b: &[usize]) -> Option<u32> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| domain.norm(i))
        .min()
}

/// `2^(−r)` where `r` is the largest radius with agreement on `B_r(1)`;
/// 0 for equal maps and 1 when they differ at the identity or one of its
/// neighbours.
pub fn map_distance(domain: &FiniteGroupSpace, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != domain.order() || b.len() != domain.order() {
        return Err(invalid("maps do not share the given domain"));
    }
    Ok(distance_from_difference(first_difference(domain, a, b)))
}

pub(crate) fn distance_from_difference(k: Option<u32>) -> f64 {
    match k {
        None => 0.0,
        Some(k) => 0.5f64.powi(k.saturating_sub(1) as i32),
    }
}

/// An `ε`-net of a map space for `ε = 2^(−R)`, one member per restriction
/// to `B_R(1)`, with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsNet {
    pub radius: u32,
    pub epsilon: f64,
    /// Member indices, the canonical-least of each fiber.
    pub net: Vec<usize>,
    /// Fiber representative for every member.
    pub representative: Vec<usize>,
    pub certificate: NetCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetCertificate {
    /// Every member lies within `ε` of the net.
    pub net_property: bool,
    pub max_distance_to_net: f64,
    pub size: usize,
    /// `|S_G|^R · |S_H|^⌈ρ₊(R)⌉`, saturating.
    pub bound: u64,
    pub bound_holds: bool,
}

impl NetCertificate {
    pub fn holds(&self) -> bool {
        self.net_property && self.bound_holds
    }
}

/// Groups members by their restriction to `B_R(1)` and keeps the
/// canonical-least member of each group.
pub fn eps_net(space: &MapSpace, radius: u32) -> Result<EpsNet> {
    if !space.complete {
        return Err(invalid("eps_net needs a fully enumerated map space"));
    }
    let ball = space.domain.ball(radius);
    let mut fibers: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut net = Vec::new();
    let mut representative = Vec::with_capacity(space.len());
    for (i, m) in space.members.iter().enumerate() {
        let key: Vec<usize> = ball.iter().map(|&x| m[x]).collect();
        let rep = *fibers.entry(key).or_insert_with(|| {
            net.push(i);
            i
        });
        representative.push(rep);
    }
    let epsilon = 0.5f64.powi(radius as i32);
    let mut max_distance_to_net = 0.0f64;
    for m in &space.members {
        let d = net
            .iter()
            .map(|&j| map_distance(&space.domain, m, &space.members[j]))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        max_distance_to_net = max_distance_to_net.max(d);
    }
    let sg = space.domain.generating_set_size as u64;
    let sh = space.codomain.generating_set_size as u64;
    let bound = sg
        .saturating_pow(radius)
        .saturating_mul(sh.saturating_pow(space.controls.upper_ceil(radius)));
    let size = net.len();
    Ok(EpsNet {
        radius,
        epsilon,
        net,
        representative,
        certificate: NetCertificate {
            net_property: max_distance_to_net <= epsilon,
            max_distance_to_net,
            size,
            bound,
            bound_holds: size as u64 <= bound,
        },
    })
}

/// `[g·φ](x) = φ(g⁻¹)⁻¹ φ(g⁻¹x)` for a domain element `g`.
pub fn act_table(
    domain: &FiniteGroupSpace,
    codomain: &FiniteGroupSpace,
    g: usize,
    table: &[usize],
) -> Vec<usize> {
    let gi = domain.inverse(g);
    let shift = codomain.inverse(table[gi]);
    (0..domain.order())
        .map(|x| codomain.mul(shift, table[domain.mul(gi, x)]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActOutcome {
    pub table: Vec<usize>,
    /// Position among the members, when the result is one.
    pub member: Option<usize>,
}

/// Applies a word of the domain group to a member of the map space.
pub fn act(space: &MapSpace, g: &Word, table: &[usize]) -> Result<ActOutcome> {
    if table.len() != space.domain.order() {
        return Err(invalid("map does not fit the map space"));
    }
    let g = space.domain.eval_word(g)?;
    let out = act_table(&space.domain, &space.codomain, g, table);
    Ok(ActOutcome {
        member: space.position(&out),
        table: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::maps::{verify, Mode};
    use crate::groups::{build_family, FamilySpec, DEFAULT_BALL_BUDGET};

    fn cyclic(n: usize) -> FiniteGroupSpace {
        let depth = n.trailing_zeros() as usize;
        let chain = build_family(&FamilySpec::cyclic(2), depth, DEFAULT_BALL_BUDGET).unwrap();
        FiniteGroupSpace::from_quotient(chain.level(depth).unwrap()).unwrap()
    }

    fn value(s: &FiniteGroupSpace, i: usize) -> i64 {
        s.labels[i].parse().unwrap()
    }

    fn element(s: &FiniteGroupSpace, v: i64) -> usize {
        let want = v.rem_euclid(s.order() as i64).to_string();
        s.labels.iter().position(|l| *l == want).unwrap()
    }

    /// Every map, filtered by `verify`.
    fn brute_force(
        d: &FiniteGroupSpace,
        c: &FiniteGroupSpace,
        k: &ControlData,
        basepointed: bool,
        injective: bool,
    ) -> Vec<Vec<usize>> {
        let (n, m) = (d.order(), c.order());
        let mut out = Vec::new();
        for code in 0..m.pow(n as u32) {
            let t: Vec<usize> = (0..n).map(|i| code / m.pow(i as u32) % m).collect();
            if basepointed && t[0] != 0 {
                continue;
            }
            let mut s = t.clone();
            s.sort_unstable();
            s.dedup();
            if injective && s.len() < n {
                continue;
            }
            if verify(d, c, &t, k, Mode::Equivalence).passed() {
                out.push(t);
            }
        }
        out
    }

    fn sorted(space: &MapSpace, mut v: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        v.sort_by(|a, b| space.compare(a, b));
        v
    }

    #[test]
    fn c4_isometries_fixing_zero() {
        let c4 = cyclic(4);
        let k = ControlData::isometric();
        let s = enumerate_map_space(&c4, &c4, &k, true, false, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(s.complete);
        assert_eq!(s.len(), 2);
        assert_eq!(s.members, sorted(&s, brute_force(&c4, &c4, &k, true, false)));
        // identity first, then the reflection
        assert_eq!(s.members[0], vec![0, 1, 2, 3]);
        for x in 0..4 {
            assert_eq!(value(&c4, s.members[1][x]), (-value(&c4, x)).rem_euclid(4));
        }
    }

    #[test]
    fn c2_into_c4() {
        let (c2, c4) = (cyclic(2), cyclic(4));
        let k: ControlData = "affine:2,0/affine:1,0/1".parse().unwrap();
        let s = enumerate_map_space(&c2, &c4, &k, true, false, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let oracle = brute_force(&c2, &c4, &k, true, false);
        assert_eq!(oracle.len(), 3);
        assert_eq!(s.members, sorted(&s, oracle));
        let images: Vec<i64> = s.members.iter().map(|t| value(&c4, t[1])).collect();
        assert_eq!(images, vec![1, 3, 2]);
    }

    #[test]
    fn matches_brute_force_on_small_spaces() {
        let (c4, c8) = (cyclic(4), cyclic(8));
        for k in ["affine:2,0/affine:1,0/1", "affine:1,1/affine:1,-1/1", "affine:3,0/affine:0.5,0/2"] {
            let k: ControlData = k.parse().unwrap();
            for (bp, inj) in [(true, true), (true, false), (false, true)] {
                let s = enumerate_map_space(&c4, &c8, &k, bp, inj, DEFAULT_ENUMERATION_BUDGET).unwrap();
                assert!(s.complete);
                assert_eq!(s.members, sorted(&s, brute_force(&c4, &c8, &k, bp, inj)), "{k} {bp} {inj}");
            }
        }
    }

    #[test]
    fn impossible_controls_give_empty_space() {
        let c4 = cyclic(4);
        let k: ControlData = "affine:5,0/affine:3,0/0".parse().unwrap();
        let s = enumerate_map_space(&c4, &c4, &k, true, false, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(s.complete && s.is_empty());
    }

    #[test]
    fn budget_truncation_is_a_prefix() {
        let c8 = cyclic(8);
        let k: ControlData = "affine:2,0/affine:0.5,0/1".parse().unwrap();
        let full = enumerate_map_space(&c8, &c8, &k, true, true, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(full.complete);
        for budget in [0, 3, 20, 200] {
            let part = enumerate_map_space(&c8, &c8, &k, true, true, budget).unwrap();
            assert!(!part.complete);
            assert!(part.nodes <= budget);
            assert!(part.members.iter().all(|m| full.position(m).is_some()));
            let again = enumerate_map_space(&c8, &c8, &k, true, true, budget).unwrap();
            assert_eq!(again, part);
        }
        assert!(eps_net(&enumerate_map_space(&c8, &c8, &k, true, true, 3).unwrap(), 1).is_err());
    }

    #[test]
    fn same_result_on_one_thread() {
        let (c8, c16) = (cyclic(8), cyclic(16));
        let k: ControlData = "affine:2,0/affine:0.5,0/1".parse().unwrap();
        let many = enumerate_map_space(&c8, &c16, &k, true, true, 50_000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool
            .install(|| enumerate_map_space(&c8, &c16, &k, true, true, 50_000))
            .unwrap();
        assert_eq!(many, one);
    }

    #[test]
    fn map_distance_values() {
        let c8 = cyclic(8);
        let id: Vec<usize> = (0..8).collect();
        assert_eq!(map_distance(&c8, &id, &id).unwrap(), 0.0);
        // perturb at 3: agreement exactly on B_2
        let mut psi = id.clone();
        psi[element(&c8, 3)] = element(&c8, 4);
        assert_eq!(map_distance(&c8, &id, &psi).unwrap(), 0.25);
        // perturb at 2: agreement exactly on B_1
        let mut psi = id.clone();
        psi[element(&c8, 2)] = element(&c8, 4);
        assert_eq!(map_distance(&c8, &id, &psi).unwrap(), 0.5);
        // perturb at 1: agreement on B_0 only
        let mut psi = id.clone();
        psi[element(&c8, 1)] = element(&c8, 4);
        assert_eq!(map_distance(&c8, &id, &psi).unwrap(), 1.0);
        let mut psi = id.clone();
        psi[0] = 1;
        assert_eq!(map_distance(&c8, &id, &psi).unwrap(), 1.0);
        assert!(map_distance(&c8, &id, &[0, 1]).is_err());
    }

    #[test]
    fn nets_of_the_c4_isometries() {
        let c4 = cyclic(4);
        let s = enumerate_map_space(&c4, &c4, &ControlData::isometric(), true, false, DEFAULT_ENUMERATION_BUDGET)
            .unwrap();
        let one = eps_net(&s, 1).unwrap();
        assert_eq!(one.net, vec![0, 1]);
        assert_eq!(one.certificate.bound, 4);
        assert!(one.certificate.holds());
        let zero = eps_net(&s, 0).unwrap();
        assert_eq!(zero.net, vec![0]);
        assert!(zero.certificate.holds());
        let big = eps_net(&s, 5).unwrap();
        assert_eq!(big.net.len(), s.len());
    }

    #[test]
    fn action_examples() {
        let c8 = cyclic(8);
        let k: ControlData = "affine:2,0/affine:0.5,0/1".parse().unwrap();
        let s = enumerate_map_space(&c8, &c8, &k, true, true, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let id: Vec<usize> = (0..8).collect();
        let one = c8.parse_word("+1").unwrap();
        let out = act(&s, &one, &id).unwrap();
        assert_eq!(out.table, id);
        assert_eq!(out.member, s.position(&id));
        for m in &s.members {
            assert_eq!(&act(&s, &Word::empty(), m).unwrap().table, m);
        }
    }

    #[test]
    fn action_composes_and_preserves_members() {
        let c8 = cyclic(8);
        let k: ControlData = "affine:2,0/affine:0.5,0/1".parse().unwrap();
        let s = enumerate_map_space(&c8, &c8, &k, true, true, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(!s.is_empty());
        for m in &s.members {
            for g in 0..8 {
                let gm = act_table(&c8, &c8, g, m);
                assert!(s.position(&gm).is_some());
                for h in 0..8 {
                    let lhs = act_table(&c8, &c8, c8.mul(g, h), m);
                    let rhs = act_table(&c8, &c8, g, &act_table(&c8, &c8, h, m));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let c4 = cyclic(4);
        let s = enumerate_map_space(&c4, &c4, &ControlData::isometric(), true, false, 1000).unwrap();
        assert_eq!(MapSpace::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
