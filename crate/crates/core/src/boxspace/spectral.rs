//! Spectra of normalized graph Laplacians `L = I − D^{-1/2} A D^{-1/2}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// All eigenvalues of the normalized Laplacian, ascending.
pub fn laplacian_spectrum(adjacency: &[Vec<usize>]) -> Vec<f64> {
    let n = adjacency.len();
    let deg: Vec<f64> = adjacency.iter().map(|nb| nb.len() as f64).collect();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (i, nb) in adjacency.iter().enumerate() {
        for &j in nb {
            m[(i, j)] -= 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Second-smallest Laplacian eigenvalue from a Lanczos iteration with full
/// reorthogonalization, run on `D^{-1/2} A D^{-1/2}` restricted to the
/// complement of its top eigenvector. Returns `(λ₁, residual)`.
pub fn lanczos_lambda1(adjacency: &[Vec<usize>], tol: f64) -> Result<(f64, f64)> {
    let n = adjacency.len();
    if n < 2 {
        return Err(invalid("graph needs at least two vertices"));
    }
    let inv_sqrt_deg: Vec<f64> = adjacency
        .iter()
        .map(|nb| 1.0 / (nb.len() as f64).sqrt())
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for (i, nb) in adjacency.iter().enumerate() {
            let mut acc = 0.0;
            for &j in nb {
                acc += inv_sqrt_deg[j] * x[j];
            }
            y[i] = acc * inv_sqrt_deg[i];
        }
    };
    // top eigenvector ∝ D^{1/2} 1
    let mut top: Vec<f64> = inv_sqrt_deg.iter().map(|v| 1.0 / v).collect();
    normalize(&mut top);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    orthogonalize(&mut q, std::slice::from_ref(&top));
    normalize(&mut q);

    let max_steps = (n - 1).min(600);
    let mut basis: Vec<Vec<f64>> = vec![top];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut best = (f64::NAN, f64::INFINITY);
    for step in 0..max_steps {
        basis.push(q.clone());
        apply(&q, &mut w);
        let alpha = dot(&w, &q);
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        orthogonalize(&mut w, &basis);
        let beta = dot(&w, &w).sqrt();
        let k = alphas.len();
        if step % 8 == 7 || beta < 1e-13 || step + 1 == max_steps {
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (idx, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            let residual = (beta * eig.eigenvectors[(k - 1, idx)]).abs();
            best = (1.0 - theta, residual);
            if residual < tol || beta < 1e-13 {
                return Ok(best);
            }
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    Ok(best)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Exact normalized Cheeger constant
/// `min |E(S, Sᶜ)| / vol(S)` over `0 < vol(S) ≤ vol(V)/2`, as a reduced
/// fraction. Graphs are limited to 24 vertices.
pub fn exact_cheeger(adjacency: &[Vec<usize>]) -> Result<(u64, u64)> {
    let n = adjacency.len();
    if !(2..=24).contains(&n) {
        return Err(invalid("exact Cheeger needs 2..=24 vertices"));
    }
    let nbr: Vec<u32> = adjacency
        .iter()
        .map(|nb| nb.iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let deg: Vec<u64> = adjacency.iter().map(|nb| nb.len() as u64).collect();
    let total: u64 = deg.iter().sum();
    let mut best: Option<(u64, u64)> = None;
    for mask in 1u32..(1u32 << n) - 1 {
        let mut vol = 0u64;
        let mut cut = 0u64;
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            vol += deg[v];
            cut += u64::from((nbr[v] & !mask).count_ones());
        }
        if vol == 0 || 2 * vol > total {
            continue;
        }
        match best {
            Some((c, v)) if cut * v >= c * vol => {}
            _ => best = Some((cut, vol)),
        }
    }
    let (c, v) = best.ok_or_else(|| invalid("no admissible subset"))?;
    let g = gcd(c, v).max(1);
    Ok((c / g, v / g))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Girth via breadth-first search from every vertex in `roots`; `None` for
/// forests. For vertex-transitive graphs a single root suffices.
pub fn girth_from(adjacency: &[Vec<usize>], roots: impl IntoIterator<Item = usize>) -> Option<u32> {
    let n = adjacency.len();
    let mut best: Option<u32> = None;
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![usize::MAX; n];
    for root in roots {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        dist[root] = 0;
        parent[root] = usize::MAX;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}
