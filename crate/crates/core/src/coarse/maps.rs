use serde::{Deserialize, Serialize};

use super::controls::ControlData;
use crate::error::{invalid, Result};
use crate::groups::{FiniteGroupSpace, TagProduct};
use crate::metric::{Metric, TOL};

/// A total map between finite metric spaces, given by its table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub table: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<VerifyReport>,
}

impl MapRecord {
    pub fn new(table: Vec<usize>) -> MapRecord {
        MapRecord {
            table,
            report: None,
        }
    }

    pub fn identity(n: usize) -> MapRecord {
        MapRecord::new((0..n).collect())
    }

    /// Checks that the table is total on the domain and lands in the codomain.
    pub fn check(&self, domain: &impl Metric, codomain: &impl Metric) -> Result<()> {
        if self.table.len() != domain.len() {
            return Err(invalid(format!(
                "map table has {} entries for a domain of {} points",
                self.table.len(),
                domain.len()
            )));
        }
        if let Some(&v) = self.table.iter().find(|&&v| v >= codomain.len()) {
            return Err(invalid(format!("map value {v} outside the codomain")));
        }
        Ok(())
    }

    pub fn verified(
        mut self,
        domain: &impl Metric,
        codomain: &impl Metric,
        controls: &ControlData,
        mode: Mode,
    ) -> MapRecord {
        self.report = Some(verify(domain, codomain, &self.table, controls, mode));
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Embedding,
    Equivalence,
}

/// The first failed condition of a verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Violation {
    /// `d_Y(f x, f y) < ρ₋(d_X(x, y))`.
    Lower {
        x: usize,
        y: usize,
        domain_distance: f64,
        image_distance: f64,
        bound: f64,
    },
    /// `d_Y(f x, f y) > ρ₊(d_X(x, y))`.
    Upper {
        x: usize,
        y: usize,
        domain_distance: f64,
        image_distance: f64,
        bound: f64,
    },
    /// A codomain point farther than `c` from the image.
    Density { point: usize, distance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub embedding: bool,
    /// Only meaningful in equivalence mode.
    pub equivalence: bool,
    pub violation: Option<Violation>,
    pub distortion: f64,
    /// `sup_y d(y, f(X))`.
    pub density_radius: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        match self.mode {
            Mode::Embedding => self.embedding,
            Mode::Equivalence => self.equivalence,
        }
    }
}

/// Checks both control inequalities over all pairs of distinct domain
/// points and, in equivalence mode, `c`-density of the image. Pairs are
/// scanned in index order and the first failure is reported.
pub fn verify(
    domain: &impl Metric,
    codomain: &impl Metric,
    table: &[usize],
    controls: &ControlData,
    mode: Mode,
) -> VerifyReport {
    let n = domain.len();
    let mut violation = None;
    'pairs: for x in 0..n {
        for y in x + 1..n {
            let dx = domain.dist(x, y);
            let dy = codomain.dist(table[x], table[y]);
            let lo = controls.lower(dx);
            let hi = controls.upper(dx);
            if dy + TOL < lo {
                violation = Some(Violation::Lower {
                    x,
                    y,
                    domain_distance: dx,
                    image_distance: dy,
                    bound: lo,
                });
                break 'pairs;
            }
            if dy > hi + TOL {
                violation = Some(Violation::Upper {
                    x,
                    y,
                    domain_distance: dx,
                    image_distance: dy,
                    bound: hi,
                });
                break 'pairs;
            }
        }
    }
    let embedding = violation.is_none();
    let density_radius = density_radius(codomain, table);
    let mut equivalence = false;
    if mode == Mode::Equivalence && embedding {
        let image = image_set(table);
        match (0..codomain.len())
            .map(|p| (p, codomain.dist_to_set(p, &image)))
            .find(|&(_, d)| d > controls.c + TOL)
        {
            Some((point, distance)) => violation = Some(Violation::Density { point, distance }),
            None => equivalence = true,
        }
    }
    VerifyReport {
        mode,
        embedding,
        equivalence,
        violation,
        distortion: distortion(domain, codomain, table),
        density_radius,
    }
}

/// `sup |d_Y(f x, f y) − d_X(x, y)|` over all pairs.
pub fn distortion(domain: &impl Metric, codomain: &impl Metric, table: &[usize]) -> f64 {
    let n = domain.len();
    let mut best = 0.0f64;
    for x in 0..n {
        for y in x + 1..n {
            best = best.max((codomain.dist(table[x], table[y]) - domain.dist(x, y)).abs());
        }
    }
    best
}

/// `sup_y d(y, f(X))`.
pub fn density_radius(codomain: &impl Metric, table: &[usize]) -> f64 {
    let image = image_set(table);
    (0..codomain.len())
        .map(|p| codomain.dist_to_set(p, &image))
        .fold(0.0, f64::max)
}

fn image_set(table: &[usize]) -> Vec<usize> {
    let mut image = table.to_vec();
    image.sort_unstable();
    image.dedup();
    image
}

/// An injective replacement of a map, landing in `codomain × Z/M`.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectiveLift {
    pub product: TagProduct,
    pub map: MapRecord,
    /// Controls the lifted map satisfies whenever the original satisfied
    /// the given ones.
    pub controls: ControlData,
}

/// Separates the fibers of `table` by tags: `M` is the largest fiber size
/// and points of a fiber get tags `0, 1, …` in the domain's
/// (distance-from-identity, index) order.
pub fn make_injective(
    domain: &FiniteGroupSpace,
    codomain: &FiniteGroupSpace,
    table: &[usize],
    controls: &ControlData,
) -> Result<InjectiveLift> {
    MapRecord::new(table.to_vec()).check(domain, codomain)?;
    let mut order: Vec<usize> = (0..domain.order()).collect();
    order.sort_by_key(|&i| (domain.norm(i), i));
    let mut used = vec![0usize; codomain.order()];
    let mut tags = vec![0usize; table.len()];
    for &x in &order {
        tags[x] = used[table[x]];
        used[table[x]] += 1;
    }
    let m = used.iter().copied().max().unwrap_or(1).max(1);
    let product = TagProduct::new(codomain.clone(), m)?;
    let lifted = (0..table.len())
        .map(|x| product.index(table[x], tags[x]))
        .collect();
    Ok(InjectiveLift {
        controls: if m > 1 {
            controls.tag_adjusted()
        } else {
            controls.clone()
        },
        product,
        map: MapRecord::new(lifted),
    })
}
