//! Almost equivariant ε-isometries between finite spaces carrying actions
//! of the same group: equivariance defects, extension from nets and the
//! preimage Hausdorff bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::{density_radius, distortion};
use crate::error::{invalid, Result};
use crate::gh::hausdorff;
use crate::groups::Word;
use crate::measures::GroupAction;
use crate::metric::{random_graph_metric, FiniteMetricSpace, Metric, TOL};

/// A finite metric space with a group acting by permutations.
#[derive(Clone, Copy)]
pub struct GSpace<'a> {
    pub space: &'a FiniteMetricSpace,
    pub action: &'a GroupAction,
}

impl<'a> GSpace<'a> {
    pub fn new(space: &'a FiniteMetricSpace, action: &'a GroupAction) -> Result<GSpace<'a>> {
        if action.points() != space.len() {
            return Err(invalid("action and space have different sizes"));
        }
        Ok(GSpace { space, action })
    }
}

fn check_pair(x: GSpace<'_>, y: GSpace<'_>, table: &[usize], g: &Word) -> Result<()> {
    if x.action.symbols != y.action.symbols {
        return Err(invalid("the two actions use different generators"));
    }
    if table.len() != x.space.len() || table.iter().any(|&v| v >= y.space.len()) {
        return Err(invalid("map does not fit its spaces"));
    }
    if g.0.iter().any(|&s| s >= x.action.symbols.len()) {
        return Err(invalid("word uses an unknown generator"));
    }
    Ok(())
}

/// `max_x d(g·f(x), f(g·x))`.
pub fn equivariance_defect(x: GSpace<'_>, y: GSpace<'_>, table: &[usize], g: &Word) -> Result<f64> {
    check_pair(x, y, table, g)?;
    Ok((0..x.space.len())
        .map(|p| y.space.dist(y.action.apply(g, table[p]), table[x.action.apply(g, p)]))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordDefect {
    pub word: String,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivariantMapReport {
    pub map: Vec<usize>,
    /// `max(dis f, density radius)`: the least `ε` making `f` an
    /// `ε`-isometry.
    pub epsilon: f64,
    pub xi_per_word: Vec<WordDefect>,
    pub max_xi: f64,
}

/// Isometry defect and equivariance defect for every word of length at
/// most `max_len`.
pub fn equivariant_report(
    x: GSpace<'_>,
    y: GSpace<'_>,
    table: &[usize],
    max_len: usize,
) -> Result<EquivariantMapReport> {
    check_pair(x, y, table, &Word::empty())?;
    let xi_per_word = Word::all_up_to(x.action.symbols.len(), max_len)
        .par_iter()
        .map(|w| {
            Ok(WordDefect {
                word: w.render(&x.action.symbols),
                defect: equivariance_defect(x, y, table, w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivariantMapReport {
        map: table.to_vec(),
        epsilon: isometry_defect(x.space, y.space, table),
        max_xi: xi_per_word.iter().map(|d| d.defect).fold(0.0, f64::max),
        xi_per_word,
    })
}

fn isometry_defect(x: &impl Metric, y: &impl Metric, table: &[usize]) -> f64 {
    distortion(x, y, table).max(density_radius(y, table))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub table: Vec<usize>,
    pub epsilon: f64,
    pub distortion: f64,
    pub density_radius: f64,
    /// Both defects of the extension are at most `3ε`.
    pub within_bound: bool,
}

/// Extends `f`, given on the net points `net` (with `images[i] = f(net[i])`),
/// to all of `domain` by sending each point to the image of its nearest net
/// point; ties go to the lowest point index.
///
/// Requires `net` to be a closed `radius`-net and `f` to be an
/// `epsilon`-isometry from the net onto a subset `epsilon`-dense in the
/// codomain, with `epsilon ≥ radius`.
pub fn extend_from_net(
    domain: &FiniteMetricSpace,
    net: &[usize],
    images: &[usize],
    codomain: &FiniteMetricSpace,
    radius: f64,
    epsilon: f64,
) -> Result<Extension> {
    let n = domain.len();
    if net.is_empty() || net.len() != images.len() {
        return Err(invalid("net and its images must be nonempty and of equal length"));
    }
    if net.iter().any(|&p| p >= n) || images.iter().any(|&v| v >= codomain.len()) {
        return Err(invalid("net point or image outside its space"));
    }
    if epsilon + TOL < radius {
        return Err(invalid(format!("epsilon {epsilon} is below the net radius {radius}")));
    }
    if let Some(p) = (0..n).find(|&p| domain.dist_to_set(p, net) > radius + TOL) {
        return Err(invalid(format!(
            "not a {radius}-net: point {} is at distance {} from it",
            domain.labels()[p],
            domain.dist_to_set(p, net)
        )));
    }
    for (i, &a) in net.iter().enumerate() {
        for (j, &b) in net.iter().enumerate().skip(i + 1) {
            let change = (codomain.dist(images[i], images[j]) - domain.dist(a, b)).abs();
            if change > epsilon + TOL {
                return Err(invalid(format!("map on the net changes d({a},{b}) by {change}")));
            }
        }
    }
    if density_radius(codomain, images) > epsilon + TOL {
        return Err(invalid("image of the net is not epsilon-dense"));
    }
    let mut order: Vec<usize> = (0..net.len()).collect();
    order.sort_by_key(|&i| net[i]);
    let table: Vec<usize> = (0..n)
        .map(|p| {
            let best = order
                .iter()
                .copied()
                .min_by(|&i, &j| domain.dist(p, net[i]).total_cmp(&domain.dist(p, net[j])))
                .expect("nonempty net");
            images[best]
        })
        .collect();
    let dis = distortion(domain, codomain, &table);
    let dens = density_radius(codomain, &table);
    Ok(Extension {
        within_bound: dis <= 3.0 * epsilon + TOL && dens <= 3.0 * epsilon + TOL,
        table,
        epsilon,
        distortion: dis,
        density_radius: dens,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageCheck {
    pub applicable: bool,
    /// Why the bound does not apply, when it does not.
    pub reason: Option<String>,
    /// `d_H(g·f⁻¹(A), f⁻¹(g·A))` in the domain.
    pub measured: Option<f64>,
    pub bound: f64,
    pub passed: bool,
}

/// Compares `d_H(g·f⁻¹(A), f⁻¹(g·A))` against `2ξ`.
///
/// The bound is only claimed when `f` is a `ξ`-isometry with equivariance
/// defect at most `ξ` for `g`, both preimages are nonempty, and `g` carries
/// the part of `A` hit by `f` onto the part of `g·A` hit by `f`. Otherwise
/// the check is reported as inapplicable rather than failed.
pub fn preimage_hausdorff_check(
    x: GSpace<'_>,
    y: GSpace<'_>,
    table: &[usize],
    g: &Word,
    subset: &[usize],
    xi: f64,
) -> Result<PreimageCheck> {
    check_pair(x, y, table, g)?;
    if subset.iter().any(|&v| v >= y.space.len()) {
        return Err(invalid("subset point outside the codomain"));
    }
    let bound = 2.0 * xi;
    let skip = |reason: &str| PreimageCheck {
        applicable: false,
        reason: Some(reason.into()),
        measured: None,
        bound,
        passed: true,
    };
    if isometry_defect(x.space, y.space, table) > xi + TOL {
        return Ok(skip("map is not a xi-isometry"));
    }
    if equivariance_defect(x, y, table, g)? > xi + TOL {
        return Ok(skip("equivariance defect exceeds xi"));
    }
    let ny = y.space.len();
    let mut in_a = vec![false; ny];
    subset.iter().for_each(|&v| in_a[v] = true);
    let mut in_ga = vec![false; ny];
    subset.iter().for_each(|&v| in_ga[y.action.apply(g, v)] = true);
    let mut hit = vec![false; ny];
    table.iter().for_each(|&v| hit[v] = true);
    let moved_hit: Vec<bool> = {
        let mut m = vec![false; ny];
        (0..ny)
            .filter(|&v| in_a[v] && hit[v])
            .for_each(|v| m[y.action.apply(g, v)] = true);
        m
    };
    if (0..ny).any(|v| moved_hit[v] != (in_ga[v] && hit[v])) {
        return Ok(skip("g does not match the hit parts of A and g·A"));
    }
    let pre_a: Vec<usize> = (0..table.len()).filter(|&p| in_a[table[p]]).collect();
    let pre_ga: Vec<usize> = (0..table.len()).filter(|&p| in_ga[table[p]]).collect();
    if pre_a.is_empty() || pre_ga.is_empty() {
        return Ok(skip("empty preimage"));
    }
    let moved: Vec<usize> = pre_a.iter().map(|&p| x.action.apply(g, p)).collect();
    let measured = hausdorff(x.space, &moved, &pre_ga)?;
    Ok(PreimageCheck {
        applicable: true,
        reason: None,
        measured: Some(measured),
        bound,
        passed: measured <= bound + TOL,
    })
}

/// Seeded input for [`preimage_hausdorff_check`]: rotations of a cycle
/// mapped onto a coarser or equal cycle by a perturbed projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageInstance {
    pub seed: u64,
    pub domain: FiniteMetricSpace,
    pub domain_action: GroupAction,
    pub codomain: FiniteMetricSpace,
    pub codomain_action: GroupAction,
    pub table: Vec<usize>,
    pub word: Word,
    pub subset: Vec<usize>,
    /// The larger of the isometry and equivariance defects of `table`.
    pub xi: f64,
}

pub fn preimage_instance(seed: u64) -> Result<PreimageInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=8usize);
    let k = rng.gen_range(1..=3usize);
    let n = m * k;
    let domain = FiniteMetricSpace::cycle(n, 1.0)?;
    let codomain = FiniteMetricSpace::cycle(m, k as f64)?;
    let domain_action = GroupAction::rotation(n, k)?;
    let codomain_action = GroupAction::rotation(m, 1)?;
    let noise = rng.gen_range(0.0..0.4);
    let table: Vec<usize> = (0..n)
        .map(|p| {
            let base = p / k;
            if rng.gen_bool(noise) {
                (base + if rng.gen_bool(0.5) { 1 } else { m - 1 }) % m
            } else {
                base
            }
        })
        .collect();
    let word = Word((0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..2)).collect());
    let mut subset: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
    if subset.is_empty() {
        subset.push(rng.gen_range(0..m));
    }
    let x = GSpace::new(&domain, &domain_action)?;
    let y = GSpace::new(&codomain, &codomain_action)?;
    let xi = isometry_defect(&domain, &codomain, &table).max(equivariance_defect(x, y, &table, &word)?);
    Ok(PreimageInstance {
        seed,
        domain,
        domain_action,
        codomain,
        codomain_action,
        table,
        word,
        subset,
        xi,
    })
}

impl PreimageInstance {
    pub fn check(&self) -> Result<PreimageCheck> {
        preimage_hausdorff_check(
            GSpace::new(&self.domain, &self.domain_action)?,
            GSpace::new(&self.codomain, &self.codomain_action)?,
            &self.table,
            &self.word,
            &self.subset,
            self.xi,
        )
    }
}

/// Seeded input for [`extend_from_net`]: random graph metrics, a greedy net
/// and a random map on it, with `ε` the larger of the net radius and the
/// map's isometry defect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetInstance {
    pub seed: u64,
    pub domain: FiniteMetricSpace,
    pub codomain: FiniteMetricSpace,
    pub net: Vec<usize>,
    pub images: Vec<usize>,
    pub radius: f64,
    pub epsilon: f64,
}

pub fn net_instance(seed: u64) -> Result<NetInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = random_graph_metric(rng.gen_range(1..=10), rng.gen());
    let codomain = random_graph_metric(rng.gen_range(1..=8), rng.gen());
    let radius = f64::from(rng.gen_range(0..=6u32));
    let mut net: Vec<usize> = Vec::new();
    for p in 0..domain.len() {
        if net.is_empty() || domain.dist_to_set(p, &net) > radius {
            net.push(p);
        }
    }
    let images: Vec<usize> = net.iter().map(|_| rng.gen_range(0..codomain.len())).collect();
    let mut defect = density_radius(&codomain, &images);
    for (i, &a) in net.iter().enumerate() {
        for (j, &b) in net.iter().enumerate().skip(i + 1) {
            defect = defect.max((codomain.dist(images[i], images[j]) - domain.dist(a, b)).abs());
        }
    }
    Ok(NetInstance {
        seed,
        domain,
        codomain,
        net,
        images,
        radius,
        epsilon: defect.max(radius),
    })
}

impl NetInstance {
    pub fn extend(&self) -> Result<Extension> {
        extend_from_net(
            &self.domain,
            &self.net,
            &self.images,
            &self.codomain,
            self.radius,
            self.epsilon,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c8() -> (FiniteMetricSpace, GroupAction) {
        (FiniteMetricSpace::cycle(8, 1.0).unwrap(), GroupAction::rotation(8, 1).unwrap())
    }

    #[test]
    fn defect_examples() {
        let (s, rot) = c8();
        let x = GSpace::new(&s, &rot).unwrap();
        let id: Vec<usize> = (0..8).collect();
        for w in Word::all_up_to(2, 3) {
            assert_eq!(equivariance_defect(x, x, &id, &w).unwrap(), 0.0);
        }
        // the codomain rotates by two steps, the domain by one
        let rot2 = GroupAction::rotation(8, 2).unwrap();
        let y = GSpace::new(&s, &rot2).unwrap();
        assert_eq!(equivariance_defect(x, y, &id, &Word(vec![0])).unwrap(), 1.0);
        assert_eq!(equivariance_defect(x, y, &id, &Word(vec![1])).unwrap(), 1.0);

        let fixed = GroupAction::new(vec!["a".into(), "A".into()], vec![1, 0], vec![id.clone(), id.clone()]).unwrap();
        let z = GSpace::new(&s, &fixed).unwrap();
        assert_eq!(equivariance_defect(x, z, &[3; 8], &Word(vec![0])).unwrap(), 0.0);
    }

    #[test]
    fn report_lists_every_word() {
        let (s, rot) = c8();
        let x = GSpace::new(&s, &rot).unwrap();
        let rot2 = GroupAction::rotation(8, 2).unwrap();
        let y = GSpace::new(&s, &rot2).unwrap();
        let id: Vec<usize> = (0..8).collect();
        let r = equivariant_report(x, y, &id, 2).unwrap();
        assert_eq!(r.xi_per_word.len(), 7);
        assert_eq!(r.xi_per_word[0], WordDefect { word: "e".into(), defect: 0.0 });
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.max_xi, 2.0);
    }

    #[test]
    fn extension_examples() {
        let (s, _) = c8();
        let all: Vec<usize> = (0..8).collect();
        let e = extend_from_net(&s, &all, &all, &s, 0.0, 0.0).unwrap();
        assert_eq!(e.table, all);

        let net = [0, 2, 4, 6];
        let e = extend_from_net(&s, &net, &net, &s, 1.0, 1.0).unwrap();
        // 1 and 7 both land on 0 while lying 2 apart
        assert_eq!(e.distortion, 2.0);
        assert!(e.within_bound);

        let err = extend_from_net(&s, &[0, 4], &[0, 4], &s, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("not a 1-net"), "{err}");
        assert!(extend_from_net(&s, &net, &net, &s, 1.0, 0.5).is_err());
    }

    #[test]
    fn preimage_examples() {
        let (s, rot) = c8();
        let x = GSpace::new(&s, &rot).unwrap();
        let id: Vec<usize> = (0..8).collect();
        let r = preimage_hausdorff_check(x, x, &id, &Word(vec![0, 0]), &[1, 2, 5], 0.0).unwrap();
        assert!(r.applicable && r.passed);
        assert_eq!(r.measured, Some(0.0));

        let rot2 = GroupAction::rotation(8, 2).unwrap();
        let y = GSpace::new(&s, &rot2).unwrap();
        let r = preimage_hausdorff_check(x, y, &id, &Word(vec![0]), &[1], 0.5).unwrap();
        assert!(!r.applicable && r.passed);
        assert_eq!(r.reason.as_deref(), Some("equivariance defect exceeds xi"));
    }

    #[test]
    fn generated_preimage_instances_pass() {
        let mut applicable = 0;
        for seed in 0..300 {
            let inst = preimage_instance(seed).unwrap();
            let r = inst.check().unwrap();
            assert!(r.passed, "seed {seed}: {r:?}");
            applicable += usize::from(r.applicable);
        }
        assert!(applicable >= 100, "{applicable}");
    }

    #[test]
    fn generated_net_instances_stay_within_three_epsilon() {
        for seed in 0..300 {
            let e = net_instance(seed).unwrap().extend().unwrap();
            assert!(e.within_bound, "seed {seed}: {e:?}");
        }
    }

    #[test]
    fn instances_are_reproducible() {
        assert_eq!(preimage_instance(7).unwrap(), preimage_instance(7).unwrap());
        assert_eq!(net_instance(7).unwrap(), net_instance(7).unwrap());
    }
}
