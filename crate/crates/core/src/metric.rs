//! Finite metric spaces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Slack used for every floating-point comparison between distances.
pub const TOL: f64 = 1e-12;

/// A finite metric space with points `0..len()`.
pub trait Metric {
    fn len(&self) -> usize;

    fn dist(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn diameter(&self) -> f64 {
        let n = self.len();
        let mut d = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                d = d.max(self.dist(i, j));
            }
        }
        d
    }

    fn eccentricity(&self, i: usize) -> f64 {
        (0..self.len()).map(|j| self.dist(i, j)).fold(0.0, f64::max)
    }

    /// `d(x, A)`; infinite for empty `A`.
    fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&a| self.dist(x, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Copies the distances into an explicit matrix.
    fn to_space(&self) -> FiniteMetricSpace {
        let n = self.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = self.dist(i, j);
            }
        }
        FiniteMetricSpace {
            labels: (0..n).map(|i| i.to_string()).collect(),
            matrix,
        }
    }
}

impl<M: Metric + ?Sized> Metric for &M {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        (**self).dist(i, j)
    }
}

/// A finite metric space given by labels and a distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricFile", into = "MetricFile")]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    /// Row-major `n × n`.
    matrix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MetricFile {
    labels: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<MetricFile> for FiniteMetricSpace {
    type Error = crate::Error;

    fn try_from(f: MetricFile) -> Result<Self> {
        FiniteMetricSpace::from_rows(f.labels, f.matrix)
    }
}

impl From<FiniteMetricSpace> for MetricFile {
    fn from(s: FiniteMetricSpace) -> Self {
        let n = s.labels.len();
        MetricFile {
            matrix: (0..n).map(|i| s.matrix[i * n..(i + 1) * n].to_vec()).collect(),
            labels: s.labels,
        }
    }
}

impl FiniteMetricSpace {
    /// Validates zero diagonal, symmetry, positivity off the diagonal and the
    /// triangle inequality.
    pub fn new(labels: Vec<String>, matrix: Vec<f64>) -> Result<FiniteMetricSpace> {
        let n = labels.len();
        if n == 0 {
            return Err(invalid("metric space must be nonempty"));
        }
        if matrix.len() != n * n {
            return Err(invalid(format!(
                "distance matrix has {} entries, expected {}",
                matrix.len(),
                n * n
            )));
        }
        let d = |i: usize, j: usize| matrix[i * n + j];
        for i in 0..n {
            if d(i, i).abs() > TOL {
                return Err(invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = d(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid(format!("bad distance d({i},{j}) = {v}")));
                }
                if (v - d(j, i)).abs() > TOL {
                    return Err(invalid(format!("asymmetric at ({i},{j})")));
                }
                if i != j && v <= TOL {
                    return Err(invalid(format!("distinct points {i},{j} at distance 0")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d(i, k) > d(i, j) + d(j, k) + TOL {
                        return Err(invalid(format!("triangle inequality fails on ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { labels, matrix })
    }

    pub fn from_rows(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<FiniteMetricSpace> {
        if rows.iter().any(|r| r.len() != labels.len()) {
            return Err(invalid("distance matrix is not square"));
        }
        FiniteMetricSpace::new(labels, rows.concat())
    }

    /// Builds a space from any metric, with the given labels.
    pub fn from_metric(m: &impl Metric, labels: Vec<String>) -> Result<FiniteMetricSpace> {
        let mut s = m.to_space();
        if labels.len() != s.labels.len() {
            return Err(invalid("label count mismatch"));
        }
        s.labels = labels;
        FiniteMetricSpace::new(s.labels, s.matrix)
    }

    pub fn single_point() -> FiniteMetricSpace {
        FiniteMetricSpace {
            labels: vec!["pt".into()],
            matrix: vec![0.0],
        }
    }

    /// The cycle `C_n` with its graph metric multiplied by `scale`.
    pub fn cycle(n: usize, scale: f64) -> Result<FiniteMetricSpace> {
        if n == 0 || scale <= 0.0 {
            return Err(invalid("cycle needs n >= 1 and a positive scale"));
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i.abs_diff(j);
                m[i * n + j] = k.min(n - k) as f64 * scale;
            }
        }
        FiniteMetricSpace::new((0..n).map(|i| i.to_string()).collect(), m)
    }

    /// Same points, all distances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::new(
            self.labels.clone(),
            self.matrix.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

impl Metric for FiniteMetricSpace {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.labels.len() + j]
    }
}

/// Shortest-path metric of a complete graph on `n` vertices with edge
/// weights drawn uniformly from `1..=9`, seeded.
pub fn random_graph_metric(n: usize, seed: u64) -> FiniteMetricSpace {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let w = f64::from(rng.gen_range(1u32..=9));
            m[i * n + j] = w;
            m[j * n + i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = m[i * n + k] + m[k * n + j];
                if via < m[i * n + j] {
                    m[i * n + j] = via;
                }
            }
        }
    }
    FiniteMetricSpace::new((0..n).map(|i| i.to_string()).collect(), m)
        .expect("shortest paths form a metric")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_axioms() {
        let l = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        assert!(FiniteMetricSpace::new(l(2), vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(FiniteMetricSpace::new(l(2), vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(l(2), vec![0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(l(2), vec![1.0, 1.0, 1.0, 0.0]).is_err());
        let bad_triangle = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(FiniteMetricSpace::new(l(3), bad_triangle).is_err());
        assert!(FiniteMetricSpace::new(vec![], vec![]).is_err());
    }

    #[test]
    fn cycle_and_json() {
        let c8 = FiniteMetricSpace::cycle(8, 1.0).unwrap();
        assert_eq!(c8.diameter(), 4.0);
        assert_eq!(c8.dist(0, 5), 3.0);
        let json = serde_json::to_string(&c8).unwrap();
        let back: FiniteMetricSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c8);
        let bad = r#"{"labels":["a","b"],"matrix":[[0,1],[2,0]]}"#;
        assert!(serde_json::from_str::<FiniteMetricSpace>(bad).is_err());
    }
}
