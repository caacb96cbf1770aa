//! Reproducible experiment runs: one config in, CSV/JSON artifacts and a
//! list of pass/fail assertions out.
//!
//! Sampling uses `ChaCha8Rng::seed_from_u64(seed)` (the ChaCha stream cipher
//! with 8 rounds, as implemented by `rand_chacha`), so a config determines
//! every artifact byte for byte.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cocycle::{
    extract_homomorphism, holonomy_identity_check, images_from_basis, plus_minus_agree, BlockMap, CocycleFile, CocycleSpec,
    HElem, HolonomyCertificate, HolonomySign, MetricGroup, TargetGroup, TransferTable,
};
use crate::divergence::{classify_growth, div_function, div_rows_csv, DivConfig, DivValue};
use crate::error::{Error, Result};
use crate::group::{enumerate_ball_with_budget, Ends, GroupElement, GroupModel, WordMetric, DEFAULT_BALL_BUDGET};
use crate::invariants::{check_distortion_inequalities, power_lengths_in, sdt_partial_sum, translation_number, CompressionProfile};
use crate::report::{fmt_f64, to_json};
use crate::shift::{
    glue, homoclinic_n, in_cone_set, membership_check, random_configuration, resample_outside, restrict_to_subshift, Configuration,
    ConfigurationFile, ConeParams, Sign, SubshiftSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Ball,
    Invariants,
    Divergence,
    SubshiftGlue,
    SubshiftCheck,
    CocyclePlant,
    CocycleUntwist,
    CocycleHolonomy,
}

fn default_window_factor() -> u32 {
    4
}
fn default_seed() -> u64 {
    7
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_budget() -> usize {
    DEFAULT_BALL_BUDGET
}
fn default_samples() -> usize {
    100
}
fn default_alphabet() -> u8 {
    2
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub group: String,
    #[serde(default)]
    pub element: Option<String>,
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default)]
    pub nmax: Option<u64>,
    #[serde(default = "default_window_factor")]
    pub window_factor: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Cocycle spec file (`cocycle untwist|holonomy`).
    #[serde(default)]
    pub spec: Option<PathBuf>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cap on the number of ball elements held in memory.
    #[serde(default = "default_budget")]
    pub max_ball: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet: u8,
    /// Target group for `cocycle plant`: `real:d`, `torus:d` or `cyclic:n`.
    #[serde(default)]
    pub target: Option<String>,
    /// Cone parameter `R` for `subshift glue`.
    #[serde(default)]
    pub cone_radius: Option<u64>,
    /// Golden-mean sets, e.g. `e,(1,0);e,(0,1)`; absent means full shift.
    #[serde(default)]
    pub forbidden: Option<String>,
    /// Configuration files for `subshift` tasks.
    #[serde(default)]
    pub x: Option<PathBuf>,
    #[serde(default)]
    pub xp: Option<PathBuf>,
    /// Output directory; not echoed into artifacts.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(task: Task, group: &str) -> Self {
        Self {
            task,
            group: group.into(),
            element: None,
            radius: None,
            nmax: None,
            window_factor: default_window_factor(),
            seed: default_seed(),
            spec: None,
            epsilon: default_epsilon(),
            max_ball: default_budget(),
            samples: default_samples(),
            alphabet: default_alphabet(),
            target: None,
            cone_radius: None,
            forbidden: None,
            x: None,
            xp: None,
            out: None,
        }
    }

    /// The config as echoed into artifacts: no output directory, and input
    /// paths reduced to file names so runs from different directories match.
    pub fn echo(&self) -> Value {
        let name = |p: &Option<PathBuf>| p.as_ref().map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()));
        let mut c = self.clone();
        c.out = None;
        let mut v = serde_json::to_value(&c).expect("config serializes");
        v["spec"] = json!(name(&self.spec));
        v["x"] = json!(name(&self.x));
        v["xp"] = json!(name(&self.xp));
        v.as_object_mut().expect("object").remove("out");
        v["epsilon"] = json!(fmt_f64(self.epsilon));
        v
    }

    fn echo_line(&self) -> String {
        format!("config: {}", serde_json::to_string(&self.echo()).expect("config serializes"))
    }

    fn model(&self) -> Result<GroupModel> {
        GroupModel::parse(&self.group)
    }

    fn need<T: Clone>(&self, v: &Option<T>, flag: &str) -> Result<T> {
        v.clone().ok_or_else(|| Error::Parse(format!("{:?} needs --{flag}", self.task)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    pub assertions: Vec<Assertion>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    fn csv(&mut self, name: &str, cfg: &ExperimentConfig, body: String) {
        let mut contents = String::new();
        contents.push_str("# ");
        contents.push_str(&cfg.echo_line());
        contents.push('\n');
        contents.push_str(&body);
        self.artifacts.push(Artifact { name: name.into(), contents });
    }

    fn json(&mut self, name: &str, cfg: &ExperimentConfig, mut body: Value) {
        body["config"] = cfg.echo();
        body["assertions"] = serde_json::to_value(&self.assertions).expect("assertions serialize");
        self.artifacts.push(Artifact { name: name.into(), contents: to_json(&body) });
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
    }

    /// Writes every artifact into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

/// Maps an error to the process exit status: 1 for failed verification,
/// 2 for unusable input.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Verification(_) | Error::Internal(_) => 1,
        _ => 2,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    match cfg.task {
        Task::Ball => run_ball(cfg),
        Task::Invariants => run_invariants(cfg),
        Task::Divergence => run_divergence(cfg),
        Task::SubshiftGlue => run_glue(cfg),
        Task::SubshiftCheck => run_check(cfg),
        Task::CocyclePlant => run_plant(cfg),
        Task::CocycleUntwist => run_untwist(cfg),
        Task::CocycleHolonomy => run_holonomy(cfg),
    }
}

fn run_ball(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let radius = cfg.need(&cfg.radius, "radius")?;
    let ball = enumerate_ball_with_budget(&model, radius, cfg.max_ball)?;
    let mut out = RunOutcome::default();
    let sizes: Vec<usize> = (0..=radius).map(|n| ball.iter().filter(|(_, l)| *l <= n).count()).collect();
    out.check("identity has length 0", ball.word_length(&model.identity()) == Some(0), "");
    out.csv("ball.csv", cfg, ball.to_csv(&model));
    out.json("ball.json", cfg, json!({ "radius": radius, "ball_sizes": sizes }));
    Ok(out)
}

fn run_invariants(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let radius = cfg.need(&cfg.radius, "radius")?;
    let g = model.parse_element(&cfg.need(&cfg.element, "element")?)?;
    let metric = WordMetric::with_budget(&model, radius, cfg.max_ball)?;
    let table = power_lengths_in(&metric, &g)?;
    let profile = CompressionProfile::new(table.clone())?;
    let ineq = check_distortion_inequalities(&profile);
    let trans = translation_number(&table)?;
    let sdt = sdt_partial_sum(&profile, 0.5, profile.rho_range())?;
    let rho_hat_ok = (1..=profile.rho_range()).all(|i| profile.rho_hat().at(i) <= profile.compression(i).unwrap_or(0));

    let mut out = RunOutcome::default();
    out.check("rho_hat below rho on the exact range", rho_hat_ok, format!("range 1..={}", profile.rho_range()));
    out.check("distortion inequalities", ineq.passed(), format!("{} checked, {} violations", ineq.checked, ineq.violations.len()));
    out.csv("powers.csv", cfg, table.to_csv());
    out.csv("rho.csv", cfg, profile.rho_csv());
    out.csv("delta.csv", cfg, profile.delta_csv());
    out.csv("translation.csv", cfg, trans.to_csv());
    out.json(
        "invariants.json",
        cfg,
        json!({
            "element": model.format_element(&g),
            "radius": radius,
            "rho_hat": profile.rho_hat(),
            "rho_exact_up_to": profile.rho_range(),
            "inequalities": ineq,
            "translation": {
                "best_upper_bound": fmt_f64(trans.best_upper_bound),
                "best_n": trans.best_n,
                "undistorted_witness": trans.undistorted_witness.map(fmt_f64),
            },
            "sdt": sdt,
        }),
    );
    Ok(out)
}

fn run_divergence(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let nmax = cfg.need(&cfg.nmax, "nmax")?;
    let metric_radius = 2 * cfg.window_factor * nmax as u32;
    let metric = WordMetric::with_budget(&model, metric_radius, cfg.max_ball)?;
    let dcfg = DivConfig { window_factor: cfg.window_factor, seed: cfg.seed, ..DivConfig::default() };
    let rows = div_function(&metric, nmax, &dcfg)?;
    let finite: Vec<(u64, f64)> = rows.iter().filter_map(|r| r.estimate.finite().map(|v| (r.n, v as f64))).collect();
    let fit = classify_growth(&finite).ok();
    let any_infinite = rows.iter().any(|r| r.estimate == DivValue::Infinite);
    let two_ended = model.declared_ends() == Ends::Two;
    let classification = if any_infinite || two_ended { "infinite" } else if fit.is_some() { "finite" } else { "undetermined" };

    let mut out = RunOutcome::default();
    out.check("running maximum is monotone", rows.windows(2).all(|w| w[0].estimate <= w[1].estimate), "");
    out.check(
        "two-ended groups are marked infinite",
        !two_ended || classification == "infinite",
        format!("declared ends {:?}", model.declared_ends()),
    );
    out.csv("divergence.csv", cfg, div_rows_csv(&model, &rows));
    out.json(
        "divergence.json",
        cfg,
        json!({
            "declared_ends": format!("{:?}", model.declared_ends()),
            "divergence": classification,
            "infinite_reason": if any_infinite {
                Some("an interior ball separates the line")
            } else if two_ended {
                Some("two-ended: removing a large ball around an interior point disconnects the endpoints")
            } else {
                None
            },
            "rows": rows.iter().map(|r| json!({ "n": r.n, "div": r.estimate.label() })).collect::<Vec<_>>(),
            "growth_fit": fit,
            "window_exact": true,
        }),
    );
    Ok(out)
}

fn parse_forbidden(model: &GroupModel, s: &str) -> Result<Vec<Vec<GroupElement>>> {
    s.split(';')
        .map(|set| {
            crate::group::split_top_level(set, ',')
                .into_iter()
                .map(|e| model.parse_element(e.trim()))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn subshift_spec(cfg: &ExperimentConfig, model: &GroupModel) -> Result<SubshiftSpec> {
    match &cfg.forbidden {
        Some(f) => SubshiftSpec::golden_mean(cfg.alphabet, parse_forbidden(model, f)?),
        None => Ok(SubshiftSpec::FullShift { alphabet: cfg.alphabet }),
    }
}

fn read_configuration(model: &GroupModel, path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file: ConfigurationFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Configuration::from_file(model, &file)
}

fn config_json(model: &GroupModel, x: &Configuration) -> Value {
    serde_json::to_value(x.to_file(model)).expect("configuration serializes")
}

fn run_glue(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let a = model.parse_element(&cfg.need(&cfg.element, "element")?)?;
    let big_r = cfg.cone_radius.unwrap_or(2);
    let metric = WordMetric::with_budget(&model, cfg.radius.unwrap_or(64), cfg.max_ball)?;
    let spec = subshift_spec(cfg, &model)?;
    let (s_prime, t_prime) = spec.specification_constants(&metric)?;
    let profile = CompressionProfile::new(power_lengths_in(&metric, &a)?)?;
    let params = ConeParams::new(&metric, profile, big_r, s_prime, t_prime)?;
    let n_spec = params.n_spec()?;
    let (x, xp) = match (&cfg.x, &cfg.xp) {
        (Some(px), Some(pxp)) => (read_configuration(&model, px)?, read_configuration(&model, pxp)?),
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let cells = metric.ball_elements(n_spec as u32 + 4)?;
            let x = restrict_to_subshift(&metric, &random_configuration(cfg.alphabet, &cells, 0.3, &mut rng), &spec)?;
            let xp = resample_outside(&metric, &x, &cells, n_spec as i64, 0.3, &mut rng)?;
            (x, restrict_to_subshift(&metric, &xp, &spec)?)
        }
        _ => return Err(Error::Parse("give both --x and --xp, or neither".into())),
    };
    let y = glue(&x, &xp, &params)?;
    let mut out = RunOutcome::default();
    out.check("(x, y) in cone set +", in_cone_set(&params, &x, &y, Sign::Plus)?, "");
    out.check("(x', y) in cone set -", in_cone_set(&params, &xp, &y, Sign::Minus)?, "");
    if matches!(spec, SubshiftSpec::GoldenMean { .. }) {
        let window = |c: &Configuration| homoclinic_n(&metric, c, &Configuration::background(cfg.alphabet)).map(|n| n + spec.reach(&metric).unwrap_or(0));
        let inputs_ok = membership_check(&metric, &x, &spec, window(&x)?)? && membership_check(&metric, &xp, &spec, window(&xp)?)?;
        if inputs_ok {
            out.check("glued point stays in the subshift", membership_check(&metric, &y, &spec, window(&y)?)?, "");
        }
    }
    out.json(
        "glue.json",
        cfg,
        json!({
            "a": model.format_element(&a),
            "cone_radius": big_r,
            "n_spec": n_spec,
            "intersection_bound": params.intersection_bound()?,
            "s_prime": fmt_f64(s_prime),
            "t_prime": fmt_f64(t_prime),
            "x": config_json(&model, &x),
            "xp": config_json(&model, &xp),
            "y": config_json(&model, &y),
        }),
    );
    Ok(out)
}

fn run_check(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let metric = WordMetric::with_budget(&model, cfg.radius.unwrap_or(64), cfg.max_ball)?;
    let spec = subshift_spec(cfg, &model)?;
    let x = read_configuration(&model, &cfg.need(&cfg.x, "x")?)?;
    let window = homoclinic_n(&metric, &x, &Configuration::background(x.alphabet()))? + spec.reach(&metric)?;
    let member = membership_check(&metric, &x, &spec, window)?;
    let mut out = RunOutcome::default();
    out.json("check.json", cfg, json!({ "member": member, "window": window }));
    Ok(out)
}

fn parse_target(s: &str) -> Result<TargetGroup> {
    let (kind, n) = s.split_once(':').ok_or_else(|| Error::Parse(format!("bad target {s:?}")))?;
    let n: usize = n.parse().map_err(|_| Error::Parse(format!("bad target size in {s:?}")))?;
    match kind {
        "real" => Ok(TargetGroup::real(n)),
        "torus" => Ok(TargetGroup::torus(n)),
        "cyclic" => TargetGroup::cyclic(n),
        _ => Err(Error::Parse(format!("unknown target kind {kind:?}"))),
    }
}

/// A random element with dyadic coordinates (exact in binary floating point).
fn random_h<R: Rng>(target: &TargetGroup, rng: &mut R) -> HElem {
    match target {
        TargetGroup::Finite(g) => HElem::Finite(rng.gen_range(0..g.order())),
        TargetGroup::RealVector(v) => HElem::Vector((0..v.dim).map(|_| f64::from(rng.gen_range(-16i32..=16)) / 8.0).collect()),
        TargetGroup::Torus(t) => HElem::Vector((0..t.dim).map(|_| f64::from(rng.gen_range(0..16i32)) / 16.0).collect()),
    }
}

/// A planted coboundary `c(s,x) = b*(sx)^{-1} φ(s) b*(x)` with `b*` reading
/// three cells of `B(2)` (always including the identity).
pub fn plant<R: Rng>(metric: &WordMetric, alphabet: u8, target: &TargetGroup, rng: &mut R) -> Result<(CocycleSpec, Vec<HElem>, BlockMap)> {
    let model = metric.model();
    let ball = metric.ball_elements(2)?;
    let mut cells = vec![model.identity()];
    while cells.len() < 3.min(ball.len()) {
        let k = ball[rng.gen_range(0..ball.len())].clone();
        if !cells.contains(&k) {
            cells.push(k);
        }
    }
    let weights: Vec<Vec<HElem>> = cells.iter().map(|_| (1..alphabet).map(|_| random_h(target, rng)).collect()).collect();
    let bstar = BlockMap::tabulate(metric, alphabet, cells, |p| {
        p.iter().zip(&weights).filter(|(&s, _)| s > 0).fold(target.identity(), |acc, (&s, w)| target.mul(&acc, &w[usize::from(s) - 1]))
    })?;
    let basis: Vec<HElem> = (0..model.generators().len() / 2).map(|_| random_h(target, rng)).collect();
    let images = images_from_basis(model, target, &basis)?;
    let spec = CocycleSpec::coboundary(metric, alphabet, target.clone(), &images, &bstar)?;
    Ok((spec, basis, bstar))
}

fn h_json(h: &HElem) -> Value {
    match h {
        HElem::Finite(k) => json!(k),
        HElem::Vector(v) => json!(v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>()),
    }
}

fn cert_json(c: &HolonomyCertificate) -> Value {
    let mut v = serde_json::to_value(c).expect("certificate serializes");
    v["value"] = h_json(&c.value);
    v
}

fn run_plant(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = cfg.model()?;
    let metric = WordMetric::with_budget(&model, crate::cocycle::spec::DEFAULT_METRIC_RADIUS, cfg.max_ball)?;
    let target = parse_target(&cfg.need(&cfg.target, "target")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (spec, basis, bstar) = plant(&metric, cfg.alphabet, &target, &mut rng)?;
    let mut out = RunOutcome::default();
    let consistency = spec.relation_consistency(&[]);
    out.check("planted cocycle satisfies the relators", consistency <= 1e-12, fmt_f64(consistency));
    out.artifacts.push(Artifact { name: "cocycle.json".into(), contents: to_json(&spec.to_file()) });
    out.json(
        "planted.json",
        cfg,
        json!({
            "phi_basis": basis.iter().map(h_json).collect::<Vec<_>>(),
            "bstar_cells": bstar.cells().iter().map(|k| model.format_element(k)).collect::<Vec<_>>(),
            "bstar_window": bstar.window(),
        }),
    );
    Ok(out)
}

fn load_spec(cfg: &ExperimentConfig) -> Result<CocycleSpec> {
    let path = cfg.need(&cfg.spec, "spec")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file: CocycleFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let spec = CocycleSpec::from_file(&file)?;
    if spec.model().descriptor() != cfg.model()?.descriptor() {
        return Err(Error::Parse(format!("spec is over {}, not {}", spec.model().descriptor(), cfg.group)));
    }
    Ok(spec)
}

fn sample_configurations(spec: &CocycleSpec, count: usize, radius: u32, seed: u64) -> Result<Vec<Configuration>> {
    let cells = spec.metric().ball_elements(radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| random_configuration(spec.alphabet(), &cells, 0.4, &mut rng)).collect())
}

fn anchor_element(cfg: &ExperimentConfig, spec: &CocycleSpec) -> Result<GroupElement> {
    match &cfg.element {
        Some(e) => spec.model().parse_element(e),
        None => Ok(spec.model().generator(0).element.clone()),
    }
}

fn run_untwist(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let spec = load_spec(cfg)?;
    let model = spec.model().clone();
    let g = anchor_element(cfg, &spec)?;
    let samples = sample_configurations(&spec, cfg.samples, 3, cfg.seed)?;
    let tol = if spec.target().is_discrete() { 0.0 } else { 1e-6 };
    let eps = if spec.target().is_discrete() { cfg.epsilon.min(0.25) } else { cfg.epsilon };
    let consistency = spec.relation_consistency(&samples[..samples.len().min(20)]);
    let transfer = TransferTable::new(&spec, &g, eps)?;
    let tests: Vec<GroupElement> = model.generators().iter().step_by(2).map(|s| s.element.clone()).collect();
    let mut out = RunOutcome::default();
    out.check("relation consistency", consistency <= 1e-12, fmt_f64(consistency));
    let ex = match extract_homomorphism(&transfer, &tests, &samples, tol) {
        Ok(ex) => ex,
        Err(Error::Verification(msg)) => {
            out.check("constancy defect within tolerance", false, msg);
            out.json("untwist.json", cfg, json!({ "relation_consistency": fmt_f64(consistency) }));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.check("constancy defect within tolerance", ex.constancy_defect <= tol, fmt_f64(ex.constancy_defect));
    out.check("homomorphism defect within twice the tolerance", ex.homomorphism_defect <= 2.0 * tol, fmt_f64(ex.homomorphism_defect));
    let b_examples: Vec<Value> = samples.iter().take(3).map(|x| transfer.get(x).map(|c| cert_json(&c))).collect::<Result<_>>()?;
    out.json(
        "untwist.json",
        cfg,
        json!({
            "anchor": model.format_element(&g),
            "epsilon": fmt_f64(eps),
            "relation_consistency": fmt_f64(consistency),
            "psi": ex.psi.iter().map(|p| json!({
                "element": p.element,
                "value": h_json(&p.value),
                "constancy_defect": fmt_f64(p.constancy_defect),
            })).collect::<Vec<_>>(),
            "samples": ex.samples,
            "constancy_defect": fmt_f64(ex.constancy_defect),
            "homomorphism_defect": fmt_f64(ex.homomorphism_defect),
            "tolerance": fmt_f64(tol),
            "transfer_certificates": b_examples,
        }),
    );
    Ok(out)
}

fn run_holonomy(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let spec = load_spec(cfg)?;
    let g = anchor_element(cfg, &spec)?;
    let anchor = spec.anchor(&g)?;
    let eps = cfg.epsilon;
    let count = cfg.samples.clamp(3, 1000);
    let xs = sample_configurations(&spec, count, 3, cfg.seed)?;
    let pairs: Vec<(Configuration, Configuration)> = xs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let triples: Vec<_> = xs.windows(3).map(|w| (w[0].clone(), w[1].clone(), w[2].clone())).collect();
    let certs: Vec<HolonomyCertificate> = pairs
        .iter()
        .take(5)
        .map(|(x, y)| spec.holonomy(&anchor, x, y, HolonomySign::Plus, eps))
        .collect::<Result<_>>()?;
    let identity = holonomy_identity_check(&spec, &anchor, &triples, HolonomySign::Plus, eps)?;
    let pm = plus_minus_agree(&spec, &anchor, &pairs, eps)?;
    let mut out = RunOutcome::default();
    out.check("cocycle identity within 3 eps", identity <= 3.0 * eps, fmt_f64(identity));
    out.check("plus and minus agree within 2 eps", pm <= 2.0 * eps, fmt_f64(pm));
    out.json(
        "holonomy.json",
        cfg,
        json!({
            "anchor": spec.model().format_element(&g),
            "identity_defect": fmt_f64(identity),
            "plus_minus_defect": fmt_f64(pm),
            "pairs": pairs.len(),
            "certificates": certs.iter().map(cert_json).collect::<Vec<_>>(),
        }),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_run_passes() {
        let mut cfg = ExperimentConfig::new(Task::Invariants, "heisenberg");
        cfg.element = Some("z".into());
        cfg.radius = Some(8);
        let out = run(&cfg).unwrap();
        assert!(out.passed());
        let powers = &out.artifacts.iter().find(|a| a.name == "powers.csv").unwrap().contents;
        assert!(powers.contains("\n1,4\n2,6\n"));
    }

    #[test]
    fn z_divergence_is_marked_infinite() {
        let mut cfg = ExperimentConfig::new(Task::Divergence, "z");
        cfg.nmax = Some(6);
        let out = run(&cfg).unwrap();
        assert!(out.passed());
        assert!(out.artifacts.iter().any(|a| a.contents.contains("\"divergence\": \"infinite\"")));
    }

    #[test]
    fn plant_then_untwist() {
        let dir = tempdir();
        let mut cfg = ExperimentConfig::new(Task::CocyclePlant, "z^2");
        cfg.target = Some("real:2".into());
        let out = run(&cfg).unwrap();
        out.write_to(&dir).unwrap();
        let mut cfg = ExperimentConfig::new(Task::CocycleUntwist, "z^2");
        cfg.spec = Some(dir.join("cocycle.json"));
        cfg.samples = 20;
        let out = run(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.assertions);
        assert_eq!(out, run(&cfg).unwrap());
    }

    #[test]
    fn missing_flags_are_usage_errors() {
        let err = run(&ExperimentConfig::new(Task::Invariants, "z^2")).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn config_json_round_trip() {
        let mut cfg = ExperimentConfig::new(Task::SubshiftGlue, "z^2");
        cfg.forbidden = Some("e,(1,0);e,(0,1)".into());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"task":"ball","group":"z","bogus":1}"#).is_err());
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!("grouprig-harness-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }
}
