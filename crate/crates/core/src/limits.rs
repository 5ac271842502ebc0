//! Partial maps between infinite groups obtained as diagonal limits of
//! coarse maps between their quotients.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::{ControlData, Violation};
use crate::error::{invalid, Error, Result, Side};
use crate::groups::{
    ball_in_group, injectivity_radius, Element, FiniteQuotient, MarkedGroup, Word,
};
use crate::metric::TOL;

/// A coarse map at one level of a pair of chains.
#[derive(Clone, Copy, Debug)]
pub struct LevelMap<'a> {
    pub source: &'a FiniteQuotient,
    pub target: &'a FiniteQuotient,
    /// Source quotient index → target quotient index.
    pub table: &'a [usize],
}

impl LevelMap<'_> {
    /// Level index used for provenance: the source quotient's level.
    pub fn level(&self) -> usize {
        self.source.level()
    }

    fn check(&self) -> Result<()> {
        if self.table.len() != self.source.order()
            || self.table.iter().any(|&v| v >= self.target.order())
        {
            return Err(invalid(format!("level {} map does not fit its quotients", self.level())));
        }
        if self.table[self.source.identity_index()] != self.target.identity_index() {
            return Err(invalid(format!("level {} map is not basepointed", self.level())));
        }
        Ok(())
    }
}

/// A basepointed map from `B_R(1_G)` into `H`, with the levels that
/// survived at every radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialMap {
    pub source: MarkedGroup,
    pub target: MarkedGroup,
    pub radius: u32,
    /// Pairs `(x, φ(x))` over `B_R(1_G)` in canonical ball order, so the
    /// table at a smaller radius is a prefix.
    pub table: Vec<(Element, Element)>,
    /// `provenance[r]`: original level indices whose lifts agree on
    /// `B_r(1_G)` with the output.
    pub provenance: Vec<Vec<usize>>,
}

impl PartialMap {
    pub fn get(&self, x: &Element) -> Option<&Element> {
        self.table.iter().find(|(a, _)| a == x).map(|(_, b)| b)
    }

    /// The same map on a smaller ball.
    pub fn restrict(&self, r: u32, budget: usize) -> Result<PartialMap> {
        if r > self.radius {
            return Err(invalid("cannot restrict to a larger radius"));
        }
        let len = ball_in_group(&self.source, r, budget)?.len();
        Ok(PartialMap {
            source: self.source.clone(),
            target: self.target.clone(),
            radius: r,
            table: self.table[..len].to_vec(),
            provenance: self.provenance[..=r as usize].to_vec(),
        })
    }
}

fn require_radius(
    group: &MarkedGroup,
    q: &FiniteQuotient,
    side: Side,
    needed: u32,
    budget: usize,
) -> Result<()> {
    let got = injectivity_radius(group, q, needed, budget)?;
    if got.radius < needed {
        return Err(Error::InsufficientRadius {
            side,
            level: q.level(),
            needed,
            achieved: got.radius,
        });
    }
    Ok(())
}

/// Lifts a level map to `B_r(1_G)` through the projections, which are
/// injective on `B_r(1_G)` and `B_⌈ρ₊(r)⌉(1_H)` respectively.
pub fn lift(
    map: LevelMap<'_>,
    r: u32,
    controls: &ControlData,
    budget: usize,
) -> Result<Vec<(Element, Element)>> {
    map.check()?;
    let g = map.source.group();
    let h = map.target.group();
    let target_radius = controls.upper_ceil(r);
    require_radius(g, map.source, Side::Source, r, budget)?;
    require_radius(h, map.target, Side::Target, target_radius, budget)?;
    let mut back: HashMap<usize, Element> = HashMap::new();
    for (e, _) in ball_in_group(h, target_radius, budget)? {
        back.insert(map.target.project(&e)?, e);
    }
    ball_in_group(g, r, budget)?
        .into_iter()
        .map(|(x, _)| {
            let y = map.table[map.source.project(&x)?];
            match back.get(&y) {
                Some(e) => Ok((x, e.clone())),
                None => Err(Error::ImageEscapes {
                    point: x.to_string(),
                    radius: target_radius,
                }),
            }
        })
        .collect()
}

/// Largest radius `≤ cap` at which the level map lifts.
fn liftable_radius(map: LevelMap<'_>, controls: &ControlData, cap: u32, budget: usize) -> Result<u32> {
    let g = injectivity_radius(map.source.group(), map.source, cap, budget)?.radius;
    let h_needed = controls.upper_ceil(cap);
    let h = injectivity_radius(map.target.group(), map.target, h_needed, budget)?.radius;
    Ok((0..=g).rev().find(|&r| controls.upper_ceil(r) <= h).unwrap_or(0))
}

/// Extracts a partial map on `B_R(1_G)` from level maps by a diagonal
/// argument: at every radius the surviving levels are split by their
/// lifts on `B_r(1_G)` and the largest agreeing class is kept, ties going
/// to the class with the lowest level indices.
pub fn diagonal_limit(
    maps: &[LevelMap<'_>],
    controls: &ControlData,
    radius: u32,
    budget: usize,
) -> Result<PartialMap> {
    let first = maps
        .first()
        .ok_or_else(|| invalid("diagonal limit needs at least one level map"))?;
    for m in maps {
        m.check()?;
        if m.source.group() != first.source.group() || m.target.group() != first.target.group() {
            return Err(invalid("level maps must share source and target groups"));
        }
    }
    let lifts: Vec<(usize, u32, Vec<(Element, Element)>)> = maps
        .par_iter()
        .map(|&m| -> Result<_> {
            let mut r = liftable_radius(m, controls, radius, budget)?;
            loop {
                match lift(m, r, controls, budget) {
                    Ok(t) => return Ok((m.level(), r, t)),
                    Err(Error::ImageEscapes { .. }) if r > 0 => r -= 1,
                    Err(Error::ImageEscapes { .. }) => return Ok((m.level(), 0, Vec::new())),
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let ball_len: Vec<usize> = {
        let ball = ball_in_group(first.source.group(), radius, budget)?;
        (0..=radius)
            .map(|r| ball.partition_point(|(_, d)| *d <= r))
            .collect()
    };

    let mut survivors: Vec<usize> = (0..lifts.len()).filter(|&i| !lifts[i].2.is_empty()).collect();
    survivors.sort_by_key(|&i| lifts[i].0);
    let mut provenance = Vec::new();
    for r in 0..=radius {
        let candidates: Vec<usize> = survivors
            .iter()
            .copied()
            .filter(|&i| lifts[i].1 >= r)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Infeasible(if r > 0 && lifts.iter().all(|l| l.1 < r) {
                format!("radius {radius} exceeds every level's liftable radius")
            } else {
                format!("no surviving level at radius {r}")
            }));
        }
        let n = ball_len[r as usize];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &i in &candidates {
            match classes
                .iter_mut()
                .find(|c| lifts[c[0]].2[..n] == lifts[i].2[..n])
            {
                Some(c) => c.push(i),
                None => classes.push(vec![i]),
            }
        }
        // classes are created in level order, so the first largest class
        // has the lowest indices
        let best = classes
            .into_iter()
            .reduce(|a, b| if b.len() > a.len() { b } else { a })
            .expect("candidates are nonempty");
        provenance.push(best.iter().map(|&i| lifts[i].0).collect());
        survivors = best;
    }
    let table = lifts[survivors[0]].2[..ball_len[radius as usize]].to_vec();
    Ok(PartialMap {
        source: (**first.source.group()).clone(),
        target: (**first.target.group()).clone(),
        radius,
        table,
        provenance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialReport {
    pub embedding: bool,
    /// Indices refer to positions in the partial map's table.
    pub violation: Option<Violation>,
    pub distortion: f64,
    /// `sup d(h, image)` over `h ∈ B_⌈ρ₊(R)⌉(1_H)`; reported, not checked.
    pub density_radius: f64,
}

/// Checks both control inequalities over all pairs in `B_R(1_G)` and
/// records how densely the image fills `B_⌈ρ₊(R)⌉(1_H)`.
pub fn verify_partial(pm: &PartialMap, controls: &ControlData, budget: usize) -> Result<PartialReport> {
    let (g, h) = (&pm.source, &pm.target);
    let dist = |grp: &MarkedGroup, a: &Element, b: &Element| -> Result<f64> {
        let e = grp.mul(&grp.inverse(a)?, b)?;
        Ok(grp.word_length(&e, budget)? as f64)
    };
    let n = pm.table.len();
    let mut violation = None;
    let mut distortion = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (x, fx) = &pm.table[i];
            let (y, fy) = &pm.table[j];
            let dx = dist(g, x, y)?;
            let dy = dist(h, fx, fy)?;
            distortion = distortion.max((dy - dx).abs());
            if violation.is_some() {
                continue;
            }
            let (lo, hi) = (controls.lower(dx), controls.upper(dx));
            if dy + TOL < lo {
                violation = Some(Violation::Lower {
                    x: i,
                    y: j,
                    domain_distance: dx,
                    image_distance: dy,
                    bound: lo,
                });
            } else if dy > hi + TOL {
                violation = Some(Violation::Upper {
                    x: i,
                    y: j,
                    domain_distance: dx,
                    image_distance: dy,
                    bound: hi,
                });
            }
        }
    }
    let mut density_radius = 0.0f64;
    for (e, _) in ball_in_group(h, controls.upper_ceil(pm.radius), budget)? {
        let mut best = f64::INFINITY;
        for (_, fx) in &pm.table {
            best = best.min(dist(h, &e, fx)?);
        }
        density_radius = density_radius.max(best);
    }
    Ok(PartialReport {
        embedding: violation.is_none(),
        violation,
        distortion,
        density_radius,
    })
}

/// `m_r = max{r + |g⁻¹|, ⌈ρ₊(r + |g⁻¹|)⌉}`: the radius index at which
/// translated maps are read off.
pub fn m_index(r: u32, inverse_length: u32, controls: &ControlData) -> u32 {
    let s = r + inverse_length;
    s.max(controls.upper_ceil(s))
}

/// `[g·φ](x) = φ(g⁻¹)⁻¹ φ(g⁻¹x)` on `B_{R−|g|}(1_G)`.
pub fn act_on_partial(g: &Word, pm: &PartialMap, budget: usize) -> Result<PartialMap> {
    let (src, tgt) = (&pm.source, &pm.target);
    let ge = src.eval_word(g)?;
    let len = src.word_length(&ge, budget)?;
    if len > pm.radius {
        return Err(invalid(format!(
            "|g| = {len} exceeds the partial map's radius {}",
            pm.radius
        )));
    }
    let lookup: HashMap<&Element, &Element> = pm.table.iter().map(|(a, b)| (a, b)).collect();
    let gi = src.inverse(&ge)?;
    let shift = tgt.inverse(lookup[&gi])?;
    let radius = pm.radius - len;
    let table = ball_in_group(src, radius, budget)?
        .into_iter()
        .map(|(x, _)| {
            let y = lookup
                .get(&src.mul(&gi, &x)?)
                .ok_or_else(|| invalid("translated point left the partial map's ball"))?;
            Ok((x, tgt.mul(&shift, y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartialMap {
        source: src.clone(),
        target: tgt.clone(),
        radius,
        table,
        provenance: (0..=radius as usize)
            .map(|r| pm.provenance[r + len as usize].clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_family, FamilySpec, NormalChain, DEFAULT_BALL_BUDGET};

    const B: usize = DEFAULT_BALL_BUDGET;

    fn tower(depth: usize) -> NormalChain {
        build_family(&FamilySpec::cyclic(2), depth, B).unwrap()
    }

    fn residue(q: &FiniteQuotient, i: usize) -> i64 {
        q.elements()[i][0]
    }

    fn index(q: &FiniteQuotient, v: i64) -> usize {
        q.index_of(&[v.rem_euclid(q.order() as i64)]).unwrap()
    }

    fn identity_tables(c: &NormalChain) -> Vec<Vec<usize>> {
        c.quotients.iter().map(|q| (0..q.order()).collect()).collect()
    }

    /// `k ↦ 2k` from `Z/2ⁿ` to `Z/2ⁿ⁺¹`.
    fn doubling_tables(c: &NormalChain) -> Vec<Vec<usize>> {
        c.quotients[..c.depth() - 1]
            .iter()
            .map(|q| {
                let t = c.level(q.level() + 1).unwrap();
                (0..q.order()).map(|i| index(t, 2 * residue(q, i))).collect()
            })
            .collect()
    }

    fn ints(pm: &PartialMap) -> Vec<(i64, i64)> {
        pm.table
            .iter()
            .map(|(a, b)| match (a, b) {
                (Element::Int(a), Element::Int(b)) => (*a, *b),
                _ => panic!("not integers"),
            })
            .collect()
    }

    #[test]
    fn identity_lift() {
        let c = tower(5);
        let tables = identity_tables(&c);
        let q = c.level(5).unwrap();
        let m = LevelMap { source: q, target: q, table: &tables[4] };
        let iso = ControlData::isometric();
        let t = lift(m, 15, &iso, B).unwrap();
        assert_eq!(t.len(), 31);
        assert!(t.iter().all(|(a, b)| a == b));
        assert_eq!(lift(m, 0, &iso, B).unwrap(), vec![(Element::Int(0), Element::Int(0))]);
        let small = c.level(1).unwrap();
        let m1 = LevelMap { source: small, target: small, table: &tables[0] };
        assert!(matches!(
            lift(m1, 1, &iso, B),
            Err(Error::InsufficientRadius { side: Side::Source, achieved: 0, .. })
        ));
    }

    #[test]
    fn lift_commutes_with_projection() {
        let c = tower(6);
        let tables = doubling_tables(&c);
        let k: ControlData = "affine:2,0/affine:1,0/1".parse().unwrap();
        for (i, t) in tables.iter().enumerate().skip(2) {
            let (s, tg) = (&c.quotients[i], &c.quotients[i + 1]);
            let m = LevelMap { source: s, target: tg, table: t };
            let r = liftable_radius(m, &k, 64, B).unwrap();
            let lifted = lift(m, r, &k, B).unwrap();
            for (x, y) in &lifted {
                assert_eq!(tg.project(y).unwrap(), t[s.project(x).unwrap()]);
            }
            assert!(lift(m, r + 1, &k, B).is_err());
        }
    }

    #[test]
    fn escaping_image_is_reported() {
        let c = tower(5);
        let q = c.level(5).unwrap();
        let mut t: Vec<usize> = (0..32).collect();
        t.swap(index(q, 1), index(q, 9));
        let m = LevelMap { source: q, target: q, table: &t };
        assert!(matches!(
            lift(m, 2, &ControlData::isometric(), B),
            Err(Error::ImageEscapes { radius: 2, .. })
        ));
    }

    #[test]
    fn identity_tower_limit() {
        let c = tower(6);
        let tables = identity_tables(&c);
        let maps: Vec<LevelMap> = c
            .quotients
            .iter()
            .zip(&tables)
            .map(|(q, t)| LevelMap { source: q, target: q, table: t })
            .collect();
        let iso = ControlData::isometric();
        let pm = diagonal_limit(&maps, &iso, 4, B).unwrap();
        assert_eq!(pm.table.len(), 9);
        assert!(ints(&pm).iter().all(|(a, b)| a == b));
        // Z/2ⁿ is injective on B_r exactly when 2r < 2ⁿ
        assert_eq!(pm.provenance[4], vec![4, 5, 6]);
        assert_eq!(pm.provenance[0], vec![1, 2, 3, 4, 5, 6]);
        let report = verify_partial(&pm, &iso, B).unwrap();
        assert!(report.embedding);
        assert_eq!(report.density_radius, 0.0);
        for r in 0..4 {
            assert_eq!(diagonal_limit(&maps, &iso, r, B).unwrap(), pm.restrict(r, B).unwrap());
        }
    }

    #[test]
    fn doubling_tower_limit() {
        let c = tower(7);
        let tables = doubling_tables(&c);
        let maps: Vec<LevelMap> = tables
            .iter()
            .enumerate()
            .map(|(i, t)| LevelMap { source: &c.quotients[i], target: &c.quotients[i + 1], table: t })
            .collect();
        let k: ControlData = "affine:2,0/affine:1,0/1".parse().unwrap();
        let pm = diagonal_limit(&maps, &k, 3, B).unwrap();
        assert_eq!(ints(&pm), vec![(0, 0), (-1, -2), (1, 2), (-2, -4), (2, 4), (-3, -6), (3, 6)]);
        let report = verify_partial(&pm, &k, B).unwrap();
        assert!(report.embedding);
        assert_eq!(report.density_radius, 1.0);
        assert_eq!(report.distortion, 6.0);
    }

    #[test]
    fn single_level_equals_its_lift() {
        let c = tower(5);
        let tables = doubling_tables(&c);
        let m = LevelMap { source: &c.quotients[3], target: &c.quotients[4], table: &tables[3] };
        let k: ControlData = "affine:2,0/affine:1,0/1".parse().unwrap();
        let pm = diagonal_limit(&[m], &k, 3, B).unwrap();
        assert_eq!(pm.table, lift(m, 3, &k, B).unwrap());
        assert!(matches!(diagonal_limit(&[m], &k, 8, B), Err(Error::Infeasible(_))));
    }

    #[test]
    fn largest_class_wins() {
        let c = tower(6);
        let iso = ControlData::isometric();
        let mut tables = identity_tables(&c);
        // reflect at level 4 only: one level disagrees with the rest at r=1
        let q4 = c.level(4).unwrap();
        tables[3] = (0..16).map(|i| index(q4, -residue(q4, i))).collect();
        let maps: Vec<LevelMap> = c
            .quotients
            .iter()
            .zip(&tables)
            .map(|(q, t)| LevelMap { source: q, target: q, table: t })
            .collect();
        let pm = diagonal_limit(&maps, &iso, 2, B).unwrap();
        assert!(ints(&pm).iter().all(|(a, b)| a == b));
        assert_eq!(pm.provenance[1], vec![2, 3, 5, 6]);
    }

    #[test]
    fn corrupted_entry_fails_verification() {
        let c = tower(6);
        let tables = identity_tables(&c);
        let q = c.level(6).unwrap();
        let maps = [LevelMap { source: q, target: q, table: &tables[5] }];
        let iso = ControlData::isometric();
        let mut pm = diagonal_limit(&maps, &iso, 4, B).unwrap();
        pm.table[3].1 = Element::Int(5);
        let report = verify_partial(&pm, &iso, B).unwrap();
        assert!(!report.embedding);
        assert!(matches!(report.violation, Some(Violation::Upper { x: 0, y: 3, .. })));
    }

    #[test]
    fn translation_of_partial_maps() {
        let c = tower(6);
        let tables = identity_tables(&c);
        let q = c.level(6).unwrap();
        let maps = [LevelMap { source: q, target: q, table: &tables[5] }];
        let iso = ControlData::isometric();
        let pm = diagonal_limit(&maps, &iso, 4, B).unwrap();
        let g = &pm.source;
        assert_eq!(act_on_partial(&Word::empty(), &pm, B).unwrap(), pm);
        let one = act_on_partial(&g.parse_word("+1").unwrap(), &pm, B).unwrap();
        assert_eq!(one.radius, 3);
        assert_eq!(one.table, pm.restrict(3, B).unwrap().table);
        assert!(act_on_partial(&g.parse_word("+1.+1.+1.+1.+1").unwrap(), &pm, B).is_err());

        let k: ControlData = "affine:2,0/affine:1,0/1".parse().unwrap();
        assert_eq!(m_index(2, 1, &k), 6);
        assert_eq!(m_index(2, 1, &iso), 3);
    }

    #[test]
    fn json_roundtrip() {
        let c = tower(5);
        let tables = identity_tables(&c);
        let q = c.level(5).unwrap();
        let pm = diagonal_limit(&[LevelMap { source: q, target: q, table: &tables[4] }], &ControlData::isometric(), 3, B)
            .unwrap();
        let json = serde_json::to_string(&pm).unwrap();
        assert_eq!(serde_json::from_str::<PartialMap>(&json).unwrap(), pm);
    }
}
