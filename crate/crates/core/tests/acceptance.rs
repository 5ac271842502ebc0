//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use boxcouple::boxspace::spectral::{exact_cheeger, laplacian_spectrum};
use boxcouple::boxspace::{diagnostics, DEFAULT_EIGEN_BUDGET};
use boxcouple::coarse::{act_table, enumerate_map_space, eps_net, map_distance, ControlData, MapSpace};
use boxcouple::coupling::{net_instance, preimage_instance};
use boxcouple::gh::gh_bounds;
use boxcouple::groups::{build_family, Element, FamilySpec, FiniteGroupSpace, FiniteQuotient, NormalChain, Word, DEFAULT_BALL_BUDGET};
use boxcouple::limits::{diagonal_limit, verify_partial, LevelMap, PartialMap};
use boxcouple::measures::{prokhorov, FiniteMeasure};
use boxcouple::metric::{random_graph_metric, FiniteMetricSpace, Metric, TOL};
use boxcouple::pipeline::{report_json, run, ExperimentConfig, BUNDLED_CONFIGS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const B: usize = DEFAULT_BALL_BUDGET;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("ultrametric", ultrametric),
        ("net bound", net_bound),
        ("diagonal limit", diagonal),
        ("equicontinuity", equicontinuity),
        ("coupling", coupling),
        ("prokhorov", prokhorov_suite),
        ("gromov-hausdorff", gh_suite),
        ("spectral", spectral),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}; {secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cyclic_chain(depth: usize) -> NormalChain {
    build_family(&FamilySpec::cyclic(2), depth, B).unwrap()
}

/// The bundled map spaces: C₄→C₄, C₈→C₈ and C₈→C₁₆ under three controls.
fn bundled_spaces() -> Vec<(String, MapSpace)> {
    let chain = cyclic_chain(4);
    let space = |l: usize| FiniteGroupSpace::from_quotient(chain.level(l).unwrap()).unwrap();
    let settings = [
        "affine:1,0/affine:1,0/0",
        "affine:2,0/affine:0.5,0/1",
        "affine:1,1/affine:1,-1/1",
    ];
    let mut out = Vec::new();
    for s in settings {
        let controls: ControlData = s.parse().unwrap();
        for (a, b) in [(2, 2), (3, 3), (3, 4)] {
            let (d, c) = (space(a), space(b));
            let m = enumerate_map_space(&d, &c, &controls, true, true, 100_000_000).unwrap();
            assert!(m.complete, "C{}→C{} under {s} was not fully enumerated", d.order(), c.order());
            out.push((format!("C{}→C{} {s}", d.order(), c.order()), m));
        }
    }
    out
}

fn ultrametric() -> Outcome {
    let mut triples = 0u64;
    for (name, m) in bundled_spaces() {
        let n = m.len();
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| map_distance(&m.domain, &m.members[i], &m.members[j]).unwrap())
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    triples += 1;
                    ensure!(
                        d[i][k] <= d[i][j].max(d[j][k]),
                        "{name}: members {i},{j},{k} break the ultrametric inequality"
                    );
                }
            }
        }
    }
    Ok(format!("{triples} triples"))
}

fn net_bound() -> Outcome {
    let mut violations = Vec::new();
    let mut checked = 0;
    for (name, m) in bundled_spaces() {
        for r in 1..=3 {
            let net = eps_net(&m, r).map_err(|e| e.to_string())?;
            checked += 1;
            let c = &net.certificate;
            if !c.net_property {
                violations.push(format!("{name} R={r}: not a net"));
            }
            if !c.bound_holds {
                violations.push(format!("{name} R={r}: {} points > bound {}", c.size, c.bound));
            }
        }
    }
    ensure!(
        violations.is_empty(),
        "{} of {checked} nets violate: {}",
        violations.len(),
        violations.join("; ")
    );
    Ok(format!("{checked} nets"))
}

fn ints(pm: &PartialMap) -> Vec<(i64, i64)> {
    pm.table
        .iter()
        .map(|(a, b)| match (a, b) {
            (Element::Int(a), Element::Int(b)) => (*a, *b),
            _ => panic!("tower elements are integers"),
        })
        .collect()
}

fn residue(q: &FiniteQuotient, i: usize) -> i64 {
    q.elements()[i][0]
}

fn index(q: &FiniteQuotient, v: i64) -> usize {
    q.index_of(&[v.rem_euclid(q.order() as i64)]).unwrap()
}

/// `0, −1, 1, −2, 2, …` up to `±r`: the canonical ball order in Z.
fn ball_order(r: i64) -> Vec<i64> {
    std::iter::once(0).chain((1..=r).flat_map(|k| [-k, k])).collect()
}

fn check_limit(maps: &[LevelMap<'_>], controls: &ControlData, want: &[(i64, i64)]) -> Result<(), String> {
    let pm = diagonal_limit(maps, controls, 4, B).map_err(|e| e.to_string())?;
    ensure!(ints(&pm) == want, "table {:?}", ints(&pm));
    for r in 0..=4 {
        let direct = diagonal_limit(maps, controls, r, B).map_err(|e| e.to_string())?;
        ensure!(direct == pm.restrict(r, B).map_err(|e| e.to_string())?, "restriction to r={r} differs");
    }
    let report = verify_partial(&pm, controls, B).map_err(|e| e.to_string())?;
    ensure!(report.embedding, "verify_partial failed: {:?}", report.violation);
    Ok(())
}

fn diagonal() -> Outcome {
    let c = cyclic_chain(8);
    let identity: Vec<Vec<usize>> = c.quotients.iter().map(|q| (0..q.order()).collect()).collect();
    let maps: Vec<LevelMap> = c
        .quotients
        .iter()
        .zip(&identity)
        .map(|(q, t)| LevelMap { source: q, target: q, table: t })
        .collect();
    let want: Vec<(i64, i64)> = ball_order(4).into_iter().map(|x| (x, x)).collect();
    check_limit(&maps, &ControlData::isometric(), &want)?;

    let doubling: Vec<Vec<usize>> = c.quotients[..c.depth() - 1]
        .iter()
        .map(|q| {
            let t = c.level(q.level() + 1).unwrap();
            (0..q.order()).map(|i| index(t, 2 * residue(q, i))).collect()
        })
        .collect();
    let maps: Vec<LevelMap> = doubling
        .iter()
        .enumerate()
        .map(|(i, t)| LevelMap { source: &c.quotients[i], target: &c.quotients[i + 1], table: t })
        .collect();
    let want: Vec<(i64, i64)> = ball_order(4).into_iter().map(|x| (x, 2 * x)).collect();
    let controls: ControlData = "affine:2,0/affine:0.5,0/1".parse().unwrap();
    check_limit(&maps, &controls, &want)?;
    Ok("identity and doubling towers at R=4".into())
}

fn words(symbols: usize, max_len: usize) -> Vec<Word> {
    let mut all = vec![Word(vec![])];
    let mut frontier = all.clone();
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|w| {
                (0..symbols).map(move |s| {
                    let mut v = w.0.clone();
                    v.push(s);
                    Word(v)
                })
            })
            .collect();
        all.extend(frontier.iter().cloned());
    }
    all
}

fn equicontinuity() -> Outcome {
    let mut checks = 0u64;
    for (name, m) in bundled_spaces() {
        let n = m.len();
        for w in words(m.domain.symbols().len(), 3) {
            let g = m.domain.eval_word(&w).map_err(|e| e.to_string())?;
            let factor = 2f64.powi(w.0.len() as i32);
            let moved: Vec<Vec<usize>> = m
                .members
                .iter()
                .map(|t| act_table(&m.domain, &m.codomain, g, t))
                .collect();
            for i in 0..n {
                for j in 0..n {
                    checks += 1;
                    let before = map_distance(&m.domain, &m.members[i], &m.members[j]).unwrap();
                    let after = map_distance(&m.domain, &moved[i], &moved[j]).unwrap();
                    ensure!(
                        after <= factor * before,
                        "{name}: word {:?} on members {i},{j}: {after} > {factor}·{before}",
                        w.0
                    );
                }
            }
        }
    }
    Ok(format!("{checks} pairs"))
}

fn coupling() -> Outcome {
    let (mut applicable, mut seed) = (0, 0u64);
    while applicable < 1000 {
        let r = preimage_instance(seed).and_then(|i| i.check()).map_err(|e| e.to_string())?;
        if r.applicable {
            applicable += 1;
            let measured = r.measured.ok_or(format!("preimage seed {seed}: nothing measured"))?;
            ensure!(
                r.passed && measured <= r.bound + TOL,
                "preimage seed {seed}: {measured} > {}",
                r.bound
            );
        }
        seed += 1;
        ensure!(seed < 100_000, "only {applicable} applicable instances in {seed} seeds");
    }
    for s in 0..1000 {
        let e = net_instance(s).and_then(|i| i.extend()).map_err(|e| e.to_string())?;
        ensure!(
            e.within_bound && e.distortion <= 3.0 * e.epsilon + TOL,
            "net seed {s}: distortion {} > 3·{}",
            e.distortion,
            e.epsilon
        );
    }
    Ok(format!("1000 preimage instances from {seed} seeds, 1000 extensions"))
}

/// Smallest `η` with `μ(A) ≤ ν(A^η) + η` and `ν(A) ≤ μ(A^η) + η` for
/// every subset `A`, by bisection on the definition.
fn prokhorov_by_definition(x: &FiniteMetricSpace, mu: &[f64], nu: &[f64]) -> f64 {
    let n = x.len();
    let mass = |w: &[f64], set: u32| (0..n).filter(|i| set >> i & 1 == 1).map(|i| w[i]).sum::<f64>();
    let feasible = |eta: f64| {
        let ball: Vec<u32> = (0..n)
            .map(|i| (0..n).filter(|&j| x.dist(i, j) <= eta).fold(0, |m, j| m | 1 << j))
            .collect();
        (1u32..1 << n).all(|a| {
            let hull = (0..n).filter(|i| a >> i & 1 == 1).fold(0, |m, i| m | ball[i]);
            mass(mu, a) <= mass(nu, hull) + eta + 1e-13 && mass(nu, a) <= mass(mu, hull) + eta + 1e-13
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if feasible(0.0) {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    }
    raw.iter().map(|w| w / total).collect()
}

fn prokhorov_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for t in 0..200 {
        let n = rng.gen_range(2..=12);
        let scale = rng.gen_range(0.02..0.3);
        let x = Arc::new(random_graph_metric(n, rng.gen()).scaled(scale).map_err(|e| e.to_string())?);
        let w: Vec<Vec<f64>> = (0..3).map(|_| random_weights(n, &mut rng)).collect();
        let m: Vec<FiniteMeasure> = w
            .iter()
            .map(|w| FiniteMeasure::new(x.clone(), w.clone()).unwrap())
            .collect();
        let d = |i: usize, j: usize| prokhorov(&m[i], &m[j], false).unwrap();
        let mut v = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let p = d(i, j);
                ensure!(p.exact, "triple {t}: inexact on {n} points");
                v[i][j] = p.value;
            }
        }
        for i in 0..3 {
            ensure!(v[i][i] == 0.0, "triple {t}: d(μ,μ) = {}", v[i][i]);
            for j in 0..3 {
                ensure!((0.0..=1.0).contains(&v[i][j]), "triple {t}: {} out of range", v[i][j]);
                ensure!((v[i][j] - v[j][i]).abs() <= 1e-9, "triple {t}: asymmetric");
                if i != j && w[i] != w[j] {
                    ensure!(v[i][j] > 0.0, "triple {t}: distinct measures at distance 0");
                }
                for k in 0..3 {
                    ensure!(v[i][k] <= v[i][j] + v[j][k] + 1e-9, "triple {t}: triangle fails");
                }
            }
        }
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let oracle = prokhorov_by_definition(&x, &w[i], &w[j]);
            ensure!(
                (oracle - v[i][j]).abs() <= 1e-9,
                "triple {t}: {} vs oracle {oracle}",
                v[i][j]
            );
        }
    }
    let x = Arc::new(random_graph_metric(10, 10).scaled(0.15).map_err(|e| e.to_string())?);
    for a in 0..10 {
        for b in 0..10 {
            let p = prokhorov(
                &FiniteMeasure::point_mass(x.clone(), a).unwrap(),
                &FiniteMeasure::point_mass(x.clone(), b).unwrap(),
                false,
            )
            .unwrap();
            ensure!(p.value == x.dist(a, b).min(1.0), "point masses {a},{b}: {}", p.value);
        }
    }
    Ok("200 triples, 100 point-mass pairs".into())
}

/// Half the least distortion over every relation `R ⊆ X × Y` that is a
/// correspondence. Relations are grown cell by cell; a branch stops when
/// its distortion already matches the best found.
fn gh_full_relations(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    struct Walk<'a> {
        x: &'a FiniteMetricSpace,
        y: &'a FiniteMetricSpace,
        cells: Vec<(usize, usize)>,
        chosen: Vec<(usize, usize)>,
        best: f64,
    }
    impl Walk<'_> {
        fn go(&mut self, k: usize, dis: f64) {
            if dis >= self.best {
                return;
            }
            if k == self.cells.len() {
                let cx = (0..self.x.len()).all(|a| self.chosen.iter().any(|p| p.0 == a));
                let cy = (0..self.y.len()).all(|b| self.chosen.iter().any(|p| p.1 == b));
                if cx && cy {
                    self.best = dis;
                }
                return;
            }
            let (a, b) = self.cells[k];
            // every earlier row must already be covered
            if b == 0 && a > 0 && !self.chosen.iter().any(|p| p.0 == a - 1) {
                return;
            }
            let extra = self
                .chosen
                .iter()
                .map(|&(c, d)| (self.x.dist(a, c) - self.y.dist(b, d)).abs())
                .fold(dis, f64::max);
            self.chosen.push((a, b));
            self.go(k + 1, extra);
            self.chosen.pop();
            self.go(k + 1, dis);
        }
    }
    let cells = (0..x.len()).flat_map(|a| (0..y.len()).map(move |b| (a, b))).collect();
    let mut w = Walk { x, y, cells, chosen: Vec::new(), best: f64::INFINITY };
    w.go(0, 0.0);
    0.5 * w.best
}

fn gh_suite() -> Outcome {
    let sizes = [1, 2, 3, 3, 4, 4, 5, 5];
    let spaces: Vec<FiniteMetricSpace> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| random_graph_metric(n, 700 + i as u64))
        .collect();
    let mut pairs = 0;
    for i in 0..spaces.len() {
        for j in i..spaces.len() {
            let (x, y) = (&spaces[i], &spaces[j]);
            let r = gh_bounds(x, y, 100_000_000).map_err(|e| e.to_string())?;
            let oracle = gh_full_relations(x, y);
            ensure!(r.exact, "spaces {i},{j}: not exact");
            ensure!(
                (r.lower - oracle).abs() <= 1e-12 && (r.upper - oracle).abs() <= 1e-12,
                "spaces {i},{j}: [{}, {}] vs brute force {oracle}",
                r.lower,
                r.upper
            );
            pairs += 1;
        }
    }
    let point = FiniteMetricSpace::single_point();
    for s in 0..20u64 {
        let x = random_graph_metric(2 + (s % 9) as usize, 900 + s);
        let r = gh_bounds(&point, &x, 100_000_000).map_err(|e| e.to_string())?;
        let half = x.diameter() / 2.0;
        ensure!(
            r.exact && (r.lower - half).abs() <= 1e-12 && (r.upper - half).abs() <= 1e-12,
            "point vs space {s}: [{}, {}] vs {half}",
            r.lower,
            r.upper
        );
    }
    Ok(format!("{pairs} pairs, 20 point comparisons"))
}

fn cycle(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect()
}

fn spectral() -> Outcome {
    for n in 3..=64 {
        let l1 = laplacian_spectrum(&cycle(n))[1];
        let want = 1.0 - (2.0 * std::f64::consts::PI / n as f64).cos();
        ensure!((l1 - want).abs() <= 1e-9, "C{n}: λ₁ = {l1}, expected {want}");
    }
    let mut graphs: Vec<(String, Vec<Vec<usize>>)> =
        (3..=20).map(|n| (format!("C{n}"), cycle(n))).collect();
    for spec in ["cyclic:2", "cyclic:3", "cyclic:4", "cyclic:2:1,3", "cyclic:3:1,2"] {
        let chain = build_family(&FamilySpec::parse(spec).unwrap(), 4, B).unwrap();
        for q in chain.quotients.iter().filter(|q| (2..=20).contains(&q.order())) {
            graphs.push((format!("{spec} level {}", q.level()), q.cayley_adjacency()));
        }
    }
    for (name, adj) in &graphs {
        let l1 = laplacian_spectrum(adj)[1];
        let (num, den) = exact_cheeger(adj).map_err(|e| e.to_string())?;
        let h = num as f64 / den as f64;
        ensure!(
            l1 / 2.0 <= h + 1e-12 && h <= (2.0 * l1).sqrt() + 1e-12,
            "{name}: λ₁ = {l1}, h = {h}"
        );
    }
    let pinned = [
        (3, 0.31698729810778015),
        (5, 0.19098300562505202),
        (7, 0.14644660940672172),
        (11, 0.09549150281252465),
        (13, 0.08121728235833514),
    ];
    for (p, gap) in pinned {
        let chain = build_family(&FamilySpec::CongruenceSl2 { primes: vec![p] }, 1, B).unwrap();
        let got = diagnostics(chain.level(1).unwrap(), DEFAULT_EIGEN_BUDGET).lambda1;
        let got = got.ok_or(format!("SL2(Z/{p}): no gap computed"))?;
        ensure!(got > 0.0 && (got - gap).abs() <= 1e-9, "SL2(Z/{p}): gap {got}, pinned {gap}");
    }
    Ok(format!("62 cycles, {} Cheeger graphs, 5 SL2 gaps", graphs.len()))
}

fn determinism() -> Outcome {
    for (name, text) in BUNDLED_CONFIGS {
        let config = ExperimentConfig::from_json(text).map_err(|e| e.to_string())?;
        let outputs: Vec<_> = [1, 8]
            .into_iter()
            .map(|threads| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                let out = pool.install(|| run(&config)).unwrap();
                (report_json(&out.report).unwrap(), out.artifacts)
            })
            .collect();
        ensure!(outputs[0].0 == outputs[1].0, "{name}: reports differ across thread pools");
        ensure!(outputs[0].1 == outputs[1].1, "{name}: artifacts differ across thread pools");
    }
    Ok("3 configs on 1 and 8 threads".into())
}
