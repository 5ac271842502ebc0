//! The box-space metric over a chain's quotients and the per-level
//! expansion diagnostics of its Cayley graphs.

pub mod spectral;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::groups::{ChainFile, FiniteQuotient, NormalChain};
use crate::metric::Metric;

/// Orders up to this size get a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
/// Orders up to this size get a Lanczos estimate; beyond it only trivial
/// Cheeger bounds are reported.
pub const DEFAULT_EIGEN_BUDGET: usize = 5000;
/// Orders up to this size get an exact Cheeger constant.
pub const EXACT_CHEEGER_LIMIT: usize = 20;
/// Residual required of the iterative eigenvalue.
pub const LANCZOS_RESIDUAL: f64 = 1e-10;

pub const ASYMPTOTIC_CAVEAT: &str = "finitely many levels give spectral evidence only; \
    expansion of the box space is an asymptotic property of the whole chain";

/// The disjoint union of a chain's quotients, with component `n` anchored
/// at `t_n` on a ray and cross-component distances routed through the
/// identities: `d((m,x),(n,y)) = |x|_m + |t_m − t_n| + |y|_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSpace {
    pub chain: NormalChain,
    pub anchors: Vec<u64>,
}

/// A point of a box space: 1-based level and element index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxPoint {
    pub level: usize,
    pub element: usize,
}

/// Places the components with `t_1 = 0` and
/// `t_{n+1} = t_n + diam_n + diam_{n+1} + 1`.
pub fn assemble(chain: &NormalChain) -> Result<BoxSpace> {
    if chain.quotients.is_empty() {
        return Err(invalid("box space needs a nonempty chain"));
    }
    let diams: Vec<u64> = chain.quotients.iter().map(|q| q.diameter() as u64).collect();
    let mut anchors = vec![0u64];
    for w in diams.windows(2) {
        let last = *anchors.last().expect("nonempty");
        anchors.push(last + w[0] + w[1] + 1);
    }
    Ok(BoxSpace {
        chain: chain.clone(),
        anchors,
    })
}

impl BoxSpace {
    pub fn distance(&self, a: BoxPoint, b: BoxPoint) -> Result<u64> {
        let qa = self.chain.level(a.level)?;
        let qb = self.chain.level(b.level)?;
        if a.level == b.level {
            return Ok(qa.word_metric(a.element, b.element)? as u64);
        }
        if a.element >= qa.order() || b.element >= qb.order() {
            return Err(invalid("box point out of range"));
        }
        let ta = self.anchors[a.level - 1];
        let tb = self.anchors[b.level - 1];
        Ok(qa.distances()[a.element] as u64 + ta.abs_diff(tb) + qb.distances()[b.element] as u64)
    }

    pub fn point_count(&self) -> usize {
        self.chain.quotients.iter().map(|q| q.order()).sum()
    }

    /// Point with flat index `i` (components concatenated in level order).
    pub fn point(&self, mut i: usize) -> BoxPoint {
        for q in &self.chain.quotients {
            if i < q.order() {
                return BoxPoint {
                    level: q.level(),
                    element: i,
                };
            }
            i -= q.order();
        }
        panic!("box point index out of range")
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            anchors: &'a [u64],
            chain: ChainFile,
        }
        Ok(serde_json::to_string_pretty(&Out {
            anchors: &self.anchors,
            chain: self.chain.to_file(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<BoxSpace> {
        #[derive(Deserialize)]
        struct In {
            anchors: Vec<u64>,
            chain: ChainFile,
        }
        let parsed: In = serde_json::from_str(text)?;
        let chain = NormalChain::from_file(parsed.chain)?;
        let fresh = assemble(&chain)?;
        if fresh.anchors != parsed.anchors {
            return Err(invalid("stored anchors do not follow the anchor rule"));
        }
        Ok(fresh)
    }
}

impl Metric for BoxSpace {
    fn len(&self) -> usize {
        self.point_count()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.distance(self.point(i), self.point(j))
            .expect("flat indices are valid") as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Girth {
    /// Length of the shortest cycle; `None` together with `infinite` for
    /// acyclic graphs.
    pub length: Option<u32>,
    pub infinite: bool,
}

impl Girth {
    fn from_option(g: Option<u32>) -> Girth {
        Girth {
            length: g,
            infinite: g.is_none(),
        }
    }
}

impl std::fmt::Display for Girth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.length {
            Some(l) => write!(f, "{l}"),
            None => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
    None,
}

/// Expansion diagnostics of one quotient's simple Cayley graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub level: usize,
    pub order: usize,
    pub degree: usize,
    /// Generator images that coincided or were trivial and got collapsed.
    pub collapsed_generators: usize,
    pub diameter: u32,
    pub girth: Girth,
    /// Second-smallest eigenvalue of `I − A/deg`.
    pub lambda1: Option<f64>,
    pub method: EigenMethod,
    pub residual: f64,
    /// Exact Cheeger constant as `(numerator, denominator)` when computed.
    pub cheeger_exact: Option<(u64, u64)>,
    pub cheeger_lo: f64,
    pub cheeger_hi: f64,
    /// Set when a budget forced a bounds-only result.
    pub degraded: Option<String>,
}

/// Diagnostics of a single quotient.
pub fn diagnostics(q: &FiniteQuotient, eigen_budget: usize) -> GraphDiagnostics {
    let adj = q.cayley_adjacency();
    let degree = adj[0].len();
    let collapsed = q.generator_images().len() - degree;
    let n = q.order();
    let girth = Girth::from_option(spectral::girth_from(&adj, [0]));
    let mut d = GraphDiagnostics {
        level: q.level(),
        order: n,
        degree,
        collapsed_generators: collapsed,
        diameter: q.diameter(),
        girth,
        lambda1: None,
        method: EigenMethod::None,
        residual: 0.0,
        cheeger_exact: None,
        cheeger_lo: 0.0,
        cheeger_hi: 1.0,
        degraded: None,
    };
    if n < 2 {
        d.degraded = Some("trivial quotient has no spectral gap".into());
        return d;
    }
    if n <= DENSE_EIGEN_LIMIT.min(eigen_budget) {
        d.lambda1 = Some(spectral::laplacian_spectrum(&adj)[1]);
        d.method = EigenMethod::Dense;
    } else if n <= eigen_budget {
        match spectral::lanczos_lambda1(&adj, LANCZOS_RESIDUAL) {
            Ok((l, res)) => {
                d.lambda1 = Some(l);
                d.method = EigenMethod::Lanczos;
                d.residual = res;
                if res >= 1e-9 {
                    d.degraded = Some(format!("Lanczos residual {res:e} above 1e-9"));
                }
            }
            Err(e) => d.degraded = Some(e.to_string()),
        }
    } else {
        d.degraded = Some(format!(
            "order {n} exceeds the eigen-solver budget {eigen_budget}; bounds only"
        ));
    }
    if let Some(l) = d.lambda1 {
        d.cheeger_lo = (l / 2.0).max(0.0);
        d.cheeger_hi = (2.0 * l).max(0.0).sqrt().min(1.0);
    }
    if n <= EXACT_CHEEGER_LIMIT {
        if let Ok((num, den)) = spectral::exact_cheeger(&adj) {
            let h = num as f64 / den as f64;
            d.cheeger_exact = Some((num, den));
            d.cheeger_lo = h;
            d.cheeger_hi = h;
        }
    }
    d
}

/// Per-level diagnostics of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderReport {
    pub caveat: String,
    pub rows: Vec<GraphDiagnostics>,
    /// Smallest λ₁ among levels where it was computed.
    pub min_lambda1: Option<f64>,
}

pub fn expander_report(chain: &NormalChain, eigen_budget: usize) -> ExpanderReport {
    let rows: Vec<GraphDiagnostics> = chain
        .quotients
        .par_iter()
        .map(|q| diagnostics(q, eigen_budget))
        .collect();
    let min_lambda1 = rows
        .iter()
        .filter_map(|r| r.lambda1)
        .min_by(f64::total_cmp);
    ExpanderReport {
        caveat: ASYMPTOTIC_CAVEAT.into(),
        rows,
        min_lambda1,
    }
}

impl ExpanderReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n", self.caveat);
        out.push_str("level,order,degree,diameter,girth,lambda1,cheeger_lo,cheeger_hi\n");
        for r in &self.rows {
            let l = r.lambda1.map_or("nan".to_string(), |v| format!("{v:.12}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.12},{:.12}\n",
                r.level, r.order, r.degree, r.diameter, r.girth, l, r.cheeger_lo, r.cheeger_hi
            ));
        }
        out
    }
}
