//! End-to-end experiment: two chains, map spaces per level, nets, the
//! diagonal limit, Gromov–Hausdorff evidence for the map-space snapshots
//! and measure defects, collected in one report.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boxspace::{expander_report, ExpanderReport, DEFAULT_EIGEN_BUDGET};
use crate::coarse::{act, enumerate_map_space, eps_net, map_distance, ControlData, MapSpace};
use crate::coupling::{equivariance_defect, GSpace};
use crate::error::{invalid, Error, Result};
use crate::gh::{convergence_evidence, TRUNCATION_CAVEAT};
use crate::groups::{build_family, FamilySpec, FiniteGroupSpace, NormalChain, Word};
use crate::limits::{diagonal_limit, verify_partial, LevelMap, PartialMap, PartialReport};
use crate::measures::{invariance_defect, pushforward, uniform, GroupAction, SNAPSHOT_CAVEAT};
use crate::metric::FiniteMetricSpace;

pub const NON_GOAL_CAVEAT: &str = "finite-stage evidence only; nothing here decides whether the groups are uniformly measure equivalent";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub g: FamilySpec,
    pub h: FamilySpec,
    /// Level `n` of G is paired with level `n + h_shift` of H.
    #[serde(default)]
    pub h_shift: usize,
    /// Controls in `ρ₊/ρ₋/c` form.
    pub controls: ControlData,
    #[serde(default = "one")]
    pub first_level: usize,
    pub levels: usize,
    /// Net radii, nondecreasing.
    pub radii: Vec<u32>,
    pub limit_radius: u32,
    #[serde(default = "two")]
    pub word_length: usize,
    #[serde(default = "default_true")]
    pub injective: bool,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Group elements visited while building quotients and balls.
    pub group: usize,
    pub enumeration: u64,
    pub gh: u64,
    pub eigen: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            group: 1 << 22,
            enumeration: 20_000_000,
            gh: 2_000_000,
            eigen: DEFAULT_EIGEN_BUDGET,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.first_level == 0 || self.first_level > self.levels {
            return Err(invalid("need 1 <= first_level <= levels"));
        }
        if self.radii.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("net radii must be nondecreasing"));
        }
        let b = &self.budgets;
        if b.group == 0 || b.enumeration == 0 || b.gh == 0 || b.eigen == 0 {
            return Err(invalid("budgets must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub orders: Vec<usize>,
    pub injectivity_radii: Vec<u32>,
    pub expander: ExpanderReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetRow {
    pub radius: u32,
    pub size: usize,
    pub bound: u64,
    pub bound_holds: bool,
    pub net_property: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSummary {
    pub max_tv: f64,
    pub max_prokhorov: f64,
    pub worst_word: String,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEvidence {
    pub level: usize,
    pub target_level: usize,
    pub domain_order: usize,
    pub codomain_order: usize,
    pub size: usize,
    pub complete: bool,
    pub nodes: u64,
    pub nets: Vec<NetRow>,
    /// The group action on maps sends members to members.
    pub action_closed: bool,
    /// Invariance defect of the uniform measure on the snapshot.
    pub uniform_defect: Option<DefectSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEvidence {
    pub requested_radius: u32,
    pub radius: u32,
    pub map: PartialMap,
    pub verification: PartialReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEvidence {
    pub level: usize,
    pub size: usize,
    pub epsilon: f64,
    pub exact: bool,
    pub map: Vec<usize>,
    /// `max_g d(g·f(x), f(g·x))` over generators, when both actions exist.
    pub equivariance_defect: Option<f64>,
    /// Invariance defect of the pushed uniform measure on the terminal
    /// snapshot.
    pub pushed_defect: Option<DefectSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStage {
    pub terminal_level: usize,
    pub items: Vec<SnapshotEvidence>,
    pub nonincreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub level: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub name: String,
    pub seed: u64,
    pub caveats: Vec<String>,
    pub g: ChainSummary,
    pub h: ChainSummary,
    pub levels: Vec<LevelEvidence>,
    pub limit: Option<LimitEvidence>,
    pub convergence: Option<ConvergenceStage>,
    pub truncated: Option<Truncation>,
    /// Stages cut short by a budget or a failed precondition.
    pub degraded: Vec<String>,
}

/// Everything a run produces: the report and the intermediate artifacts,
/// keyed by their file name inside a run directory.
pub struct RunOutput {
    pub report: EvidenceReport,
    pub artifacts: Vec<(String, String)>,
}

struct Snapshot {
    level: usize,
    space: MapSpace,
    metric: Arc<FiniteMetricSpace>,
    action: Option<GroupAction>,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let b = config.budgets;
    let g_chain = build_family(&config.g, config.levels, b.group)?;
    let h_chain = build_family(&config.h, config.levels + config.h_shift, b.group)?;
    let mut artifacts = vec![
        ("config.json".to_string(), serde_json::to_string_pretty(config)?),
        ("chain_g.json".to_string(), g_chain.to_json()?),
        ("chain_h.json".to_string(), h_chain.to_json()?),
    ];
    let mut report = EvidenceReport {
        name: config.name.clone(),
        seed: config.seed,
        caveats: vec![
            NON_GOAL_CAVEAT.into(),
            TRUNCATION_CAVEAT.into(),
            SNAPSHOT_CAVEAT.into(),
        ],
        g: summarize(&g_chain, b)?,
        h: summarize(&h_chain, b)?,
        levels: Vec::new(),
        limit: None,
        convergence: None,
        truncated: None,
        degraded: Vec::new(),
    };

    let mut snapshots: Vec<Snapshot> = Vec::new();
    for level in config.first_level..=config.levels {
        let target_level = level + config.h_shift;
        let domain = FiniteGroupSpace::from_quotient(g_chain.level(level)?)?;
        let codomain = FiniteGroupSpace::from_quotient(h_chain.level(target_level)?)?;
        let mut space = enumerate_map_space(
            &domain,
            &codomain,
            &config.controls,
            true,
            config.injective,
            b.enumeration,
        )?;
        space.domain_ref = format!("chain_g.json:{level}");
        space.codomain_ref = format!("chain_h.json:{target_level}");
        artifacts.push((format!("maps_level_{level}.json"), space.to_json()?));
        let mut ev = LevelEvidence {
            level,
            target_level,
            domain_order: domain.order(),
            codomain_order: codomain.order(),
            size: space.len(),
            complete: space.complete,
            nodes: space.nodes,
            nets: Vec::new(),
            action_closed: false,
            uniform_defect: None,
        };
        if space.complete && space.is_empty() {
            report.levels.push(ev);
            report.truncated = Some(Truncation {
                level,
                reason: format!(
                    "no map from level {level} of G to level {target_level} of H satisfies the controls"
                ),
            });
            break;
        }
        if !space.complete {
            report
                .degraded
                .push(format!("level {level}: enumeration stopped by its budget; nets and snapshot skipped"));
            report.levels.push(ev);
            snapshots.push(Snapshot {
                level,
                metric: Arc::new(FiniteMetricSpace::single_point()),
                space,
                action: None,
            });
            continue;
        }
        for &r in &config.radii {
            let net = eps_net(&space, r)?;
            let c = net.certificate;
            ev.nets.push(NetRow {
                radius: r,
                size: c.size,
                bound: c.bound,
                bound_holds: c.bound_holds,
                net_property: c.net_property,
            });
        }
        let metric = Arc::new(snapshot_metric(&space)?);
        let action = member_action(&space)?;
        ev.action_closed = action.is_some();
        if let Some(a) = &action {
            let d = invariance_defect(&uniform(metric.clone())?, a, config.word_length, true)?;
            ev.uniform_defect = Some(DefectSummary {
                max_tv: d.max_tv,
                max_prokhorov: d.max_prokhorov,
                worst_word: d.worst_word,
                exact: d.exact,
            });
        }
        report.levels.push(ev);
        snapshots.push(Snapshot {
            level,
            space,
            metric,
            action,
        });
    }

    if !snapshots.is_empty() {
        report.limit = limit_stage(config, &g_chain, &h_chain, &snapshots, &mut report.degraded)?;
        if let Some(l) = &report.limit {
            artifacts.push(("partial_map.json".into(), serde_json::to_string_pretty(&l.map)?));
        }
        report.convergence = convergence_stage(config, &snapshots, &mut report.degraded)?;
    }
    artifacts.push(("summary.txt".into(), summary(&report)));
    artifacts.push(("report.json".into(), report_json(&report)?));
    Ok(RunOutput { report, artifacts })
}

pub fn report_json(report: &EvidenceReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn summarize(chain: &NormalChain, b: Budgets) -> Result<ChainSummary> {
    Ok(ChainSummary {
        orders: chain.quotients.iter().map(|q| q.order()).collect(),
        injectivity_radii: chain
            .injectivity_radii(b.group)?
            .iter()
            .map(|r| r.radius)
            .collect(),
        expander: expander_report(chain, b.eigen),
    })
}

/// Members of a map space under the ultrametric `2^(−agreement radius)`.
fn snapshot_metric(space: &MapSpace) -> Result<FiniteMetricSpace> {
    let n = space.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = map_distance(&space.domain, &space.members[i], &space.members[j])?;
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    }
    FiniteMetricSpace::new((0..n).map(|i| format!("m{i}")).collect(), m)
}

/// The generators of G acting on members, or `None` when some image
/// leaves the map space.
fn member_action(space: &MapSpace) -> Result<Option<GroupAction>> {
    let symbols = space.domain.symbols();
    let mut perms = Vec::new();
    for s in 0..symbols.len() {
        let mut p = Vec::with_capacity(space.len());
        for m in &space.members {
            match act(space, &Word(vec![s]), m)?.member {
                Some(i) => p.push(i),
                None => return Ok(None),
            }
        }
        perms.push(p);
    }
    let inverse = (0..symbols.len()).map(|s| space.domain.generator_inverse(s)).collect();
    GroupAction::new(symbols, inverse, perms)
    .map(Some)
}

/// Diagonal limit of the canonical-least member of every complete level,
/// retried at smaller radii when the requested one cannot be reached.
fn limit_stage(
    config: &ExperimentConfig,
    g_chain: &NormalChain,
    h_chain: &NormalChain,
    snapshots: &[Snapshot],
    degraded: &mut Vec<String>,
) -> Result<Option<LimitEvidence>> {
    let b = config.budgets;
    let mut maps = Vec::new();
    for s in snapshots.iter().filter(|s| !s.space.is_empty()) {
        maps.push(LevelMap {
            source: g_chain.level(s.level)?,
            target: h_chain.level(s.level + config.h_shift)?,
            table: &s.space.members[0],
        });
    }
    if maps.is_empty() {
        return Ok(None);
    }
    let mut radius = config.limit_radius;
    loop {
        match diagonal_limit(&maps, &config.controls, radius, b.group) {
            Ok(map) => {
                if radius < config.limit_radius {
                    degraded.push(format!(
                        "diagonal limit reached radius {radius} of the requested {}",
                        config.limit_radius
                    ));
                }
                let verification = verify_partial(&map, &config.controls, b.group)?;
                return Ok(Some(LimitEvidence {
                    requested_radius: config.limit_radius,
                    radius,
                    map,
                    verification,
                }));
            }
            Err(Error::Infeasible(_)) if radius > 0 => radius -= 1,
            Err(e @ Error::InsufficientRadius { .. }) | Err(e @ Error::Infeasible(_)) => {
                degraded.push(format!("diagonal limit: {e}"));
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Best ε-isometries from every complete snapshot into the last one, with
/// the equivariance defect of each and the invariance defect of the pushed
/// uniform measure.
fn convergence_stage(
    config: &ExperimentConfig,
    snapshots: &[Snapshot],
    degraded: &mut Vec<String>,
) -> Result<Option<ConvergenceStage>> {
    let usable: Vec<&Snapshot> = snapshots
        .iter()
        .filter(|s| s.space.complete && !s.space.is_empty())
        .collect();
    let Some(terminal) = usable.last() else {
        return Ok(None);
    };
    let seq: Vec<FiniteMetricSpace> = usable.iter().map(|s| (*s.metric).clone()).collect();
    let evidence = convergence_evidence(&seq, &terminal.metric, config.budgets.gh)?;
    let mut items = Vec::new();
    for (s, item) in usable.iter().zip(evidence.items) {
        if !item.exact {
            degraded.push(format!(
                "level {}: epsilon-isometry search stopped by its budget; epsilon is an upper bound",
                s.level
            ));
        }
        let equivariance = match (&s.action, &terminal.action) {
            (Some(a), Some(t)) => {
                let x = GSpace::new(&s.metric, a)?;
                let y = GSpace::new(&terminal.metric, t)?;
                let mut worst = 0.0f64;
                for gen in 0..a.symbols.len() {
                    worst = worst.max(equivariance_defect(x, y, &item.map, &Word(vec![gen]))?);
                }
                Some(worst)
            }
            _ => None,
        };
        let pushed = match &terminal.action {
            Some(t) => {
                let mu = pushforward(&uniform(s.metric.clone())?, &item.map, terminal.metric.clone())?;
                let d = invariance_defect(&mu, t, config.word_length, true)?;
                Some(DefectSummary {
                    max_tv: d.max_tv,
                    max_prokhorov: d.max_prokhorov,
                    worst_word: d.worst_word,
                    exact: d.exact,
                })
            }
            None => None,
        };
        items.push(SnapshotEvidence {
            level: s.level,
            size: s.space.len(),
            epsilon: item.epsilon,
            exact: item.exact,
            map: item.map,
            equivariance_defect: equivariance,
            pushed_defect: pushed,
        });
    }
    Ok(Some(ConvergenceStage {
        terminal_level: terminal.level,
        items,
        nonincreasing: evidence.nonincreasing,
    }))
}

/// Plain-text digest of a report.
pub fn summary(r: &EvidenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}", r.name);
    for c in &r.caveats {
        let _ = writeln!(s, "  note: {c}");
    }
    let _ = writeln!(s, "G orders {:?}, H orders {:?}", r.g.orders, r.h.orders);
    let _ = writeln!(
        s,
        "spectral gaps G {:?}, H {:?}",
        r.g.expander.min_lambda1, r.h.expander.min_lambda1
    );
    for l in &r.levels {
        let _ = write!(
            s,
            "level {} -> {}: {} maps{}",
            l.level,
            l.target_level,
            l.size,
            if l.complete { "" } else { " (incomplete)" }
        );
        for n in &l.nets {
            let _ = write!(s, ", net R={} {}/{}", n.radius, n.size, n.bound);
        }
        if let Some(d) = &l.uniform_defect {
            let _ = write!(s, ", uniform defect tv {} prokhorov {}", d.max_tv, d.max_prokhorov);
        }
        s.push('\n');
    }
    if let Some(l) = &r.limit {
        let _ = writeln!(
            s,
            "diagonal limit on B_{} (requested {}): {} points, embedding {}",
            l.radius,
            l.requested_radius,
            l.map.table.len(),
            l.verification.embedding
        );
    }
    if let Some(c) = &r.convergence {
        let eps: Vec<f64> = c.items.iter().map(|i| i.epsilon).collect();
        let _ = writeln!(
            s,
            "epsilon trend into level {}: {:?}, nonincreasing {}",
            c.terminal_level, eps, c.nonincreasing
        );
    }
    if let Some(t) = &r.truncated {
        let _ = writeln!(s, "truncated at level {}: {}", t.level, t.reason);
    }
    for d in &r.degraded {
        let _ = writeln!(s, "degraded: {d}");
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    files: Vec<ManifestEntry<'a>>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    bytes: usize,
}

/// Writes every artifact and a `manifest.json` listing them.
pub fn write_run_dir(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in &out.artifacts {
        std::fs::write(dir.join(name), body)?;
    }
    let manifest = Manifest {
        experiment: &out.report.name,
        files: out
            .artifacts
            .iter()
            .map(|(path, body)| ManifestEntry {
                path,
                bytes: body.len(),
            })
            .collect(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// The configurations shipped with the crate, by file name.
pub const BUNDLED_CONFIGS: [(&str, &str); 3] = [
    ("identity.json", include_str!("../configs/identity.json")),
    ("doubling.json", include_str!("../configs/doubling.json")),
    ("sl2_vs_cyclic.json", include_str!("../configs/sl2_vs_cyclic.json")),
];
