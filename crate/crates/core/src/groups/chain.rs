use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::marked::{Ball, MarkedGroup};
use super::quotient::{FiniteQuotient, QuotientCarrier};
use crate::error::{invalid, Error, Result};

/// Images of the free generators in one finite permutation group, together
/// with the order of the group they are supposed to generate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationTarget {
    pub degree: usize,
    /// One permutation of `0..degree` per positive free generator.
    pub images: Vec<Vec<usize>>,
    pub order: usize,
}

/// The supported families of normal chains.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `Z ⊃ kZ ⊃ k²Z ⊃ ...`; level n is `Z/kⁿZ` with generators `±s` for
    /// each step.
    CyclicTower {
        k: i64,
        #[serde(default = "default_steps")]
        steps: Vec<i64>,
    },
    /// Principal congruence subgroups of SL₂(Z); level n is
    /// `SL₂(Z/(p₁⋯pₙ)Z)`.
    CongruenceSl2 { primes: Vec<i64> },
    /// Kernels of `F_rank → T₁ × ... × Tₙ`; level n is the image of the free
    /// group in the product of the first n targets.
    FreeHom {
        rank: usize,
        targets: Vec<PermutationTarget>,
    },
}

fn default_steps() -> Vec<i64> {
    vec![1]
}

impl FamilySpec {
    pub fn cyclic(k: i64) -> FamilySpec {
        FamilySpec::CyclicTower {
            k,
            steps: default_steps(),
        }
    }

    pub fn group(&self) -> Result<MarkedGroup> {
        match self {
            FamilySpec::CyclicTower { steps, .. } => MarkedGroup::integers(steps),
            FamilySpec::CongruenceSl2 { .. } => MarkedGroup::special_linear(2),
            FamilySpec::FreeHom { rank, .. } => MarkedGroup::free(*rank),
        }
    }

    fn validate(&self, depth: usize) -> Result<()> {
        if depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        match self {
            FamilySpec::CyclicTower { k, .. } => {
                if *k < 2 {
                    return Err(invalid(format!("cyclic tower base must be >= 2, got {k}")));
                }
                let mut m: i64 = 1;
                for _ in 0..depth {
                    m = m
                        .checked_mul(*k)
                        .filter(|m| *m <= 1 << 40)
                        .ok_or_else(|| Error::Overflow(format!("computing {k}^{depth}")))?;
                }
            }
            FamilySpec::CongruenceSl2 { primes } => {
                if primes.len() < depth {
                    return Err(invalid(format!(
                        "congruence chain of depth {depth} needs {depth} primes, got {}",
                        primes.len()
                    )));
                }
                for (i, &p) in primes.iter().enumerate() {
                    if p < 3 || p % 2 == 0 || !is_prime(p) {
                        return Err(invalid(format!("{p} is not an odd prime")));
                    }
                    if primes[..i].contains(&p) {
                        return Err(invalid(format!("prime {p} repeated")));
                    }
                }
            }
            FamilySpec::FreeHom { rank, targets } => {
                if targets.len() < depth {
                    return Err(invalid(format!(
                        "free chain of depth {depth} needs {depth} targets, got {}",
                        targets.len()
                    )));
                }
                for t in targets {
                    if t.images.len() != *rank {
                        return Err(invalid(format!(
                            "target needs {rank} generator images, got {}",
                            t.images.len()
                        )));
                    }
                    for p in &t.images {
                        let mut sorted = p.clone();
                        sorted.sort_unstable();
                        if sorted != (0..t.degree).collect::<Vec<_>>() {
                            return Err(invalid(format!(
                                "{p:?} is not a permutation of 0..{}",
                                t.degree
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn carrier(&self, level: usize) -> QuotientCarrier {
        match self {
            FamilySpec::CyclicTower { k, .. } => QuotientCarrier::Cyclic {
                modulus: k.pow(level as u32),
            },
            FamilySpec::CongruenceSl2 { primes } => QuotientCarrier::MatrixMod {
                dim: 2,
                modulus: primes[..level].iter().product(),
            },
            FamilySpec::FreeHom { rank, targets } => {
                let used = &targets[..level];
                let degrees: Vec<usize> = used.iter().map(|t| t.degree).collect();
                let letter_images = (0..*rank)
                    .map(|l| {
                        used.iter()
                            .flat_map(|t| t.images[l].iter().map(|&v| v as i64))
                            .collect()
                    })
                    .collect();
                QuotientCarrier::Permutation {
                    degrees,
                    letter_images,
                }
            }
        }
    }

    /// Orders that the generator images must reach, when known.
    fn expected_order(&self, level: usize) -> Option<usize> {
        match self {
            FamilySpec::CyclicTower { k, .. } => Some(k.pow(level as u32) as usize),
            FamilySpec::CongruenceSl2 { primes } => Some(
                primes[..level]
                    .iter()
                    .map(|&p| (p * (p * p - 1)) as usize)
                    .product(),
            ),
            FamilySpec::FreeHom { .. } => None,
        }
    }

    /// Parses the CLI shorthand: `cyclic:K`, `cyclic:K:S1,S2`,
    /// `sl2:P1,P2,...`. Free chains are read from JSON files instead.
    pub fn parse(text: &str) -> Result<FamilySpec> {
        let parts: Vec<&str> = text.split(':').collect();
        let ints = |s: &str| -> Result<Vec<i64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map_err(|_| invalid(format!("not an integer: {t:?}")))
                })
                .collect()
        };
        match parts.as_slice() {
            ["cyclic", k] => Ok(FamilySpec::cyclic(ints(k)?[0])),
            ["cyclic", k, steps] => Ok(FamilySpec::CyclicTower {
                k: ints(k)?[0],
                steps: ints(steps)?,
            }),
            ["sl2", primes] => Ok(FamilySpec::CongruenceSl2 {
                primes: ints(primes)?,
            }),
            _ => Err(invalid(format!(
                "unknown family {text:?}; expected cyclic:K[:STEPS] or sl2:P1,P2,..."
            ))),
        }
    }
}

fn is_prime(p: i64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// A decreasing chain of finite-index normal subgroups, represented by its
/// quotients and the connecting maps between consecutive levels.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalChain {
    pub family: FamilySpec,
    pub group: Arc<MarkedGroup>,
    pub quotients: Vec<FiniteQuotient>,
    /// `connecting_maps[i][x]` is the image in `quotients[i]` of element `x`
    /// of `quotients[i + 1]`.
    pub connecting_maps: Vec<Vec<usize>>,
}

impl NormalChain {
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    /// Quotient at 1-based `level`.
    pub fn level(&self, level: usize) -> Result<&FiniteQuotient> {
        if level == 0 {
            return Err(invalid("levels are numbered from 1"));
        }
        self.quotients
            .get(level - 1)
            .ok_or_else(|| invalid(format!("chain has no level {level}")))
    }

    /// Injectivity radius of every level, probing up to its diameter.
    pub fn injectivity_radii(&self, budget: usize) -> Result<Vec<InjectivityRadius>> {
        self.quotients
            .iter()
            .map(|q| injectivity_radius(&self.group, q, q.diameter(), budget))
            .collect()
    }
}

/// Builds the first `depth` levels of a family.
pub fn build_family(family: &FamilySpec, depth: usize, budget: usize) -> Result<NormalChain> {
    family.validate(depth)?;
    let group = Arc::new(family.group()?);
    if let FamilySpec::FreeHom { rank, targets } = family {
        // each target on its own must be generated by the images
        for t in &targets[..depth] {
            let single = FamilySpec::FreeHom {
                rank: *rank,
                targets: vec![t.clone()],
            };
            FiniteQuotient::build(
                group.clone(),
                single.carrier(1),
                1,
                Some(t.order),
                budget,
            )
            .and_then(|q| {
                if q.order() > t.order {
                    Err(invalid(format!(
                        "images generate a group of order {} larger than the declared {}",
                        q.order(),
                        t.order
                    )))
                } else {
                    Ok(q)
                }
            })?;
        }
    }
    let quotients: Vec<FiniteQuotient> = (1..=depth)
        .map(|level| {
            FiniteQuotient::build(
                group.clone(),
                family.carrier(level),
                level,
                family.expected_order(level),
                budget,
            )
        })
        .collect::<Result<_>>()?;
    let connecting_maps = connecting_maps(&quotients)?;
    Ok(NormalChain {
        family: family.clone(),
        group,
        quotients,
        connecting_maps,
    })
}

fn connecting_maps(quotients: &[FiniteQuotient]) -> Result<Vec<Vec<usize>>> {
    quotients
        .windows(2)
        .map(|w| {
            let (coarse, fine) = (&w[0], &w[1]);
            let map: Vec<usize> = fine
                .elements()
                .iter()
                .map(|k| {
                    let r = fine.carrier().reduce_to(coarse.carrier(), k)?;
                    coarse
                        .index_of(&r)
                        .ok_or_else(|| invalid("connecting map leaves the coarser quotient"))
                })
                .collect::<Result<_>>()?;
            // compatibility with generator images
            for (gf, gc) in fine
                .generator_images()
                .iter()
                .zip(coarse.generator_images())
            {
                if map[*gf] != *gc {
                    return Err(invalid("connecting map does not commute with generators"));
                }
            }
            Ok(map)
        })
        .collect()
}

/// Result of probing the injectivity radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectivityRadius {
    pub radius: u32,
    /// True when the projection was injective on the whole probed range, so
    /// the true radius is at least `radius`.
    pub saturated: bool,
}

/// Largest `r <= r_max` such that `G → q` is injective on `B_r(1_G)`.
pub fn injectivity_radius(
    g: &MarkedGroup,
    q: &FiniteQuotient,
    r_max: u32,
    budget: usize,
) -> Result<InjectivityRadius> {
    let mut ball = Ball::new(g);
    let mut hit = vec![false; q.order()];
    hit[q.project(&g.identity())?] = true;
    let mut checked = 1usize;
    while ball.radius() < r_max {
        ball.grow(g, budget)?;
        for (e, _) in &ball.elements()[checked..] {
            let i = q.project(e)?;
            if std::mem::replace(&mut hit[i], true) {
                return Ok(InjectivityRadius {
                    radius: ball.radius() - 1,
                    saturated: false,
                });
            }
        }
        checked = ball.len();
    }
    Ok(InjectivityRadius {
        radius: r_max,
        saturated: true,
    })
}

#[derive(Serialize, Deserialize)]
struct GroupFile {
    name: String,
    generators: Vec<String>,
    #[serde(flatten)]
    family: FamilySpec,
}

#[derive(Serialize, Deserialize)]
struct QuotientFile {
    level: usize,
    order: usize,
    carrier: QuotientCarrier,
    /// Canonical carrier keys (residue, row-major matrix, or concatenated
    /// permutation images), indexed like `distances`.
    elements: Vec<Vec<i64>>,
    generator_images: Vec<usize>,
    distances: Vec<u32>,
}

/// On-disk chain layout.
#[derive(Serialize, Deserialize)]
pub struct ChainFile {
    group: GroupFile,
    quotients: Vec<QuotientFile>,
    connecting_maps: Vec<Vec<usize>>,
}

impl NormalChain {
    pub fn to_file(&self) -> ChainFile {
        ChainFile {
            group: GroupFile {
                name: self.group.name.clone(),
                generators: self.group.symbols(),
                family: self.family.clone(),
            },
            quotients: self
                .quotients
                .iter()
                .map(|q| QuotientFile {
                    level: q.level(),
                    order: q.order(),
                    carrier: q.carrier().clone(),
                    elements: q.elements().to_vec(),
                    generator_images: q.generator_images().to_vec(),
                    distances: q.distances().to_vec(),
                })
                .collect(),
            connecting_maps: self.connecting_maps.clone(),
        }
    }

    pub fn from_file(file: ChainFile) -> Result<NormalChain> {
        let group = Arc::new(file.group.family.group()?);
        if group.symbols() != file.group.generators {
            return Err(invalid("chain file generators do not match its family"));
        }
        let quotients: Vec<FiniteQuotient> = file
            .quotients
            .into_iter()
            .map(|qf| {
                let q = FiniteQuotient::from_parts(
                    group.clone(),
                    qf.carrier,
                    qf.level,
                    qf.elements,
                    Some(qf.distances),
                )?;
                if q.order() != qf.order || q.generator_images() != qf.generator_images {
                    return Err(invalid(format!("level {} is inconsistent", qf.level)));
                }
                Ok(q)
            })
            .collect::<Result<_>>()?;
        let maps = connecting_maps(&quotients)?;
        if maps != file.connecting_maps {
            return Err(invalid("stored connecting maps are inconsistent"));
        }
        Ok(NormalChain {
            family: file.group.family,
            group,
            quotients,
            connecting_maps: maps,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<NormalChain> {
        NormalChain::from_file(serde_json::from_str(text)?)
    }
}
