//! `run`, `sweep` and `verify`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsee::bounds::{verify_hoeffding, verify_mz, verify_truncated, Report};
use dsee::env::ArmSpec;
use dsee::multiplayer::run_decentralized;
use dsee::rng::substream;
use dsee::sim::{aggregate, aggregate_series, replicate, Experiment};

use crate::config::{self, ExperimentConfig, InequalityName, RuleConfig, VerifyConfig};
use crate::output::{self, curve_csv, curve_csv_with, num, report_csv};
use crate::resolve::{resolve, Bound, Resolved};
use crate::{CliError, Outcome, Overrides};

const HEAVY_FOOTNOTE: &str = "note: the polynomial-rule bound uses the factor v^(-p/2) in both moment \
branches exactly as published; for p <= 2 the derivation suggests v^(1-p) instead.";

fn load(path: &Path, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config =
        config::parse(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.trim_end())))?;
    if let Some(seed) = ov.seed {
        config.seed = seed;
    }
    if let Some(reps) = ov.reps {
        config.reps = reps;
    }
    if let Some(horizon) = ov.horizon {
        config.horizon = horizon;
    }
    config.strict |= ov.strict;
    Ok(config)
}

fn out_dir(config: &ExperimentConfig, ov: &Overrides) -> PathBuf {
    ov.out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// One curve file written by an execution.
struct Written {
    policy: String,
    file: PathBuf,
    final_mean: f64,
}

/// Runs every policy and the multiplayer block of a resolved config, writing
/// `<prefix><name>.csv` per block plus the manifest and summary.
fn execute(config: &ExperimentConfig, out: &Path, prefix: &str) -> Result<Vec<Written>, CliError> {
    let resolved = resolve(config).map_err(CliError::Config)?;
    let issues: Vec<String> = resolved
        .policies
        .iter()
        .flat_map(|p| p.issues.iter().map(move |i| format!("{}: {i}", p.name)))
        .collect();
    if config.strict && !issues.is_empty() {
        return Err(CliError::Precondition(issues.join("\n")));
    }
    for i in &issues {
        log::warn!("unvalidated constants in {i}");
    }
    if let Some((name, _)) = &resolved.multiplayer {
        if resolved.policies.iter().any(|p| &p.name == name) {
            return Err(CliError::Config(format!("multiplayer name `{name}` clashes with a policy")));
        }
    }
    fs::create_dir_all(out)?;

    let mut written = Vec::new();
    let mut summary = summary_header(config, &resolved);
    let mut heavy = false;
    for p in &resolved.policies {
        let experiment = Experiment {
            bandit: resolved.bandit.clone(),
            policy: p.spec,
            scoring: p.scoring.clone(),
            horizon: config.horizon,
            checkpoints: resolved.checkpoints.clone(),
            reps: config.reps,
            seed: config.seed,
        };
        let curve = aggregate(&experiment.run(true)?)?;
        let file = out.join(format!("{prefix}{}.csv", p.name));
        fs::write(&file, curve_csv(&curve, |t| p.bound.as_ref().and_then(|b| b.at(t))))?;

        let last = *curve.points.last().expect("checkpoints are non-empty");
        let _ = writeln!(summary, "\npolicy {}: {:?}", p.name, p.spec);
        if p.issues.is_empty() {
            let _ = writeln!(summary, "  constants: validated");
        } else {
            let _ = writeln!(summary, "  constants: unvalidated");
            for i in &p.issues {
                let _ = writeln!(summary, "    - {i}");
            }
        }
        match &p.bound {
            Some(b) => {
                heavy |= matches!(b, Bound::Heavy { .. });
                let at = b.at(last.t).map(num).unwrap_or_else(|| "undefined".into());
                let _ = writeln!(summary, "  bound: {}; at T = {}: {at}", b.describe(), last.t);
            }
            None => {
                let _ = writeln!(summary, "  bound: none");
            }
        }
        let _ = writeln!(
            summary,
            "  mean pseudo-regret at T = {}: {} (std {}, 5%..95% {} .. {})",
            last.t,
            num(last.mean),
            num(last.std),
            num(last.q05),
            num(last.q95)
        );
        written.push(Written {
            policy: p.name.clone(),
            file,
            final_mean: last.mean,
        });
    }

    if let Some((name, mp)) = &resolved.multiplayer {
        let trajectories = replicate(config.reps, true, |r| {
            let mut rng = substream(config.seed, r, 0);
            run_decentralized(&resolved.bandit, mp, config.horizon, &resolved.checkpoints, &mut rng, false)
        })?;
        let column = |f: &dyn Fn(&dsee::multiplayer::DecentralizedRecord) -> f64| -> Vec<Vec<f64>> {
            trajectories.iter().map(|tr| tr.records.iter().map(f).collect()).collect()
        };
        let mean_of = |series: Vec<Vec<f64>>| -> Result<Vec<f64>, CliError> {
            Ok(aggregate_series(&resolved.checkpoints, &series)?.points.iter().map(|p| p.mean).collect())
        };
        let curve = aggregate_series(&resolved.checkpoints, &column(&|r| r.pseudo_regret))?;
        let extra = [
            ("mean_collision_slots", mean_of(column(&|r| r.collision_slots as f64))?),
            ("mean_exploration_collisions", mean_of(column(&|r| r.exploration_collisions as f64))?),
            ("mean_misidentified_slots", mean_of(column(&|r| r.misidentified_slots as f64))?),
        ];
        let file = out.join(format!("{prefix}{name}.csv"));
        fs::write(&file, curve_csv_with(&curve, &extra))?;
        let last = *curve.points.last().expect("checkpoints are non-empty");
        let _ = writeln!(summary, "\nmultiplayer {name}: {mp:?}");
        let _ = writeln!(
            summary,
            "  mean system pseudo-regret at T = {}: {} (std {}); exploration collisions {}",
            last.t,
            num(last.mean),
            num(last.std),
            num(*extra[1].1.last().unwrap_or(&0.0))
        );
        written.push(Written {
            policy: name.clone(),
            file,
            final_mean: last.mean,
        });
    }
    if heavy {
        let _ = writeln!(summary, "\n{HEAVY_FOOTNOTE}");
    }

    let mut manifest = config.clone();
    manifest.out = None;
    manifest.checkpoints = Some(resolved.checkpoints.clone());
    manifest.verify.clear();
    let mut text = String::from("# Resolved configuration; `dsee run` on this file reproduces the CSVs.\n");
    if !issues.is_empty() {
        text.push_str("# unvalidated constants:\n");
        for i in &issues {
            let _ = writeln!(text, "#   {i}");
        }
    }
    text.push_str(&config::to_toml(&manifest).map_err(CliError::Config)?);
    fs::write(out.join(format!("{prefix}manifest.toml")), text)?;
    fs::write(out.join(format!("{prefix}summary.txt")), &summary)?;
    if prefix.is_empty() {
        print!("{summary}");
    }
    Ok(written)
}

fn summary_header(config: &ExperimentConfig, resolved: &Resolved) -> String {
    let arms: Vec<String> = resolved.bandit.arms().iter().map(ArmSpec::to_string).collect();
    format!(
        "seed = {}, horizon = {}, reps = {}, checkpoints = {}\nbandit: {}\n",
        config.seed,
        config.horizon,
        config.reps,
        resolved.checkpoints.len(),
        arms.join(", ")
    )
}

pub fn cmd_run(path: &Path, ov: &Overrides) -> Result<Outcome, CliError> {
    let config = load(path, ov)?;
    let out = out_dir(&config, ov);
    let written = execute(&config, &out, "")?;
    let mut files: Vec<PathBuf> = written.into_iter().map(|w| w.file).collect();
    files.push(out.join("manifest.toml"));
    files.push(out.join("summary.txt"));
    Ok(Outcome {
        out_dir: out,
        files,
        passed: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum GridValue {
    Int(u64),
    Real(f64),
}

impl GridValue {
    fn real(&self) -> f64 {
        match *self {
            GridValue::Int(i) => i as f64,
            GridValue::Real(x) => x,
        }
    }

    fn int(&self, key: &str) -> Result<u64, String> {
        match *self {
            GridValue::Int(i) => Ok(i),
            GridValue::Real(x) => Err(format!("grid key `{key}` needs integers, got {x}")),
        }
    }
}

impl std::fmt::Display for GridValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridValue::Int(i) => write!(f, "{i}"),
            GridValue::Real(x) => write!(f, "{x}"),
        }
    }
}

const GRID_KEYS: &[&str] = &["horizon", "reps", "seed", "w", "v", "p", "gamma", "a", "delta", "c", "u0", "b"];

/// Parses `key=v1,v2;key2=v3,...` into one or two axes.
fn parse_grid(spec: &str) -> Result<Vec<(String, Vec<GridValue>)>, String> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| format!("grid entry `{part}` is not key=values"))?;
        let key = key.trim();
        if !GRID_KEYS.contains(&key) {
            return Err(format!("unknown grid key `{key}` (known: {})", GRID_KEYS.join(", ")));
        }
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<u64>()
                    .map(GridValue::Int)
                    .or_else(|_| v.parse::<f64>().map(GridValue::Real))
                    .map_err(|_| format!("grid value `{v}` for `{key}` is not a number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(format!("grid key `{key}` has no values"));
        }
        if axes.iter().any(|(k, _): &(String, _)| k == key) {
            return Err(format!("grid key `{key}` appears twice"));
        }
        axes.push((key.to_string(), values));
    }
    match axes.len() {
        0 => Err("empty grid".into()),
        1 | 2 => Ok(axes),
        n => Err(format!("a grid spans one or two fields, got {n}")),
    }
}

fn apply(config: &mut ExperimentConfig, key: &str, value: &GridValue) -> Result<(), String> {
    let x = value.real();
    let mut hits = 0;
    match key {
        "horizon" => {
            config.horizon = value.int(key)?;
            hits += 1;
        }
        "reps" => {
            config.reps = value.int(key)?;
            hits += 1;
        }
        "seed" => {
            config.seed = value.int(key)?;
            hits += 1;
        }
        _ => {
            let rules = config
                .policies
                .iter_mut()
                .filter_map(|p| p.rule.as_mut())
                .chain(config.multiplayer.as_mut().map(|m| &mut m.rule));
            for rule in rules {
                match (key, rule) {
                    ("w", RuleConfig::Log { w }) => *w = x,
                    ("v", RuleConfig::Poly { v, .. }) => *v = x,
                    ("p", RuleConfig::Poly { p, .. }) => *p = x,
                    ("gamma", RuleConfig::Diverging { gamma: Some(g), .. }) => *g = x,
                    _ => continue,
                }
                hits += 1;
            }
            for p in &mut config.policies {
                let k = &mut p.constants;
                let slot = match key {
                    "a" => &mut k.a,
                    "delta" => &mut k.delta,
                    "c" => &mut k.c,
                    "u0" => &mut k.u0,
                    "b" => &mut k.b,
                    _ => continue,
                };
                *slot = Some(x);
                hits += 1;
            }
        }
    }
    if hits == 0 {
        return Err(format!("grid key `{key}` matches nothing in the config"));
    }
    Ok(())
}

/// Runs every point of `grid` and writes `point_NNN_<policy>.csv` files plus
/// `sweep_index.csv`.
pub fn cmd_sweep(path: &Path, grid: &str, ov: &Overrides) -> Result<Outcome, CliError> {
    let config = load(path, ov)?;
    let axes = parse_grid(grid).map_err(CliError::Config)?;
    let out = out_dir(&config, ov);
    let mut points: Vec<Vec<&GridValue>> = vec![vec![]];
    for (_, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|pt| {
                values.iter().map(move |v| {
                    let mut next = pt.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    let mut index = String::from("point");
    for (k, _) in &axes {
        index.push(',');
        index.push_str(k);
    }
    index.push_str(",policy,file,final_mean_regret\n");
    let mut files = Vec::new();
    for (i, pt) in points.iter().enumerate() {
        let mut c = config.clone();
        for ((key, _), value) in axes.iter().zip(pt) {
            apply(&mut c, key, value).map_err(CliError::Config)?;
        }
        let prefix = format!("point_{i:03}_");
        for w in execute(&c, &out, &prefix)? {
            let _ = write!(index, "{i}");
            for v in pt {
                let _ = write!(index, ",{v}");
            }
            let name = w.file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(index, ",{},{name},{}", w.policy, num(w.final_mean));
            files.push(w.file);
        }
    }
    output::write(&out, "sweep_index.csv", &index)?;
    files.push(out.join("sweep_index.csv"));
    Ok(Outcome {
        out_dir: out,
        files,
        passed: true,
    })
}

fn need<T: Copy>(v: Option<T>, field: &str, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("verify `{name}`: `{field}` is required")))
}

fn run_verifier(block: &VerifyConfig, name: &str, reps: u64, seed: u64) -> Result<Report, CliError> {
    let arm: ArmSpec = block.arm.into();
    arm.validate().map_err(|e| CliError::Config(format!("verify `{name}`: {e}")))?;
    let result = match block.inequality {
        InequalityName::Hoeffding => verify_hoeffding(
            &arm,
            need(block.u0, "u0", name)?,
            need(block.a, "a", name)?,
            &block.deltas,
            &block.sizes,
            reps,
            seed,
        ),
        InequalityName::Mz => verify_mz(&arm, need(block.p, "p", name)?, &block.deltas, &block.sizes, reps, seed),
        InequalityName::Truncated => verify_truncated(
            &arm,
            need(block.u, "u", name)?,
            need(block.p, "p", name)?,
            &block.eps,
            &block.sizes,
            reps,
            seed,
        ),
    };
    result.map_err(|e| match e {
        dsee::Error::Precondition(m) => CliError::Precondition(format!("verify `{name}`: {m}")),
        other => CliError::Config(format!("verify `{name}`: {other}")),
    })
}

/// Runs every `[[verify]]` block. A block whose constants fall outside the
/// inequality's validity window is reported and skipped; the command then
/// fails with the precondition exit code after the other blocks ran.
pub fn cmd_verify(path: &Path, ov: &Overrides) -> Result<Outcome, CliError> {
    let config = load(path, ov)?;
    if config.verify.is_empty() {
        return Err(CliError::Config("no [[verify]] blocks in the config".into()));
    }
    let out = out_dir(&config, ov);
    fs::create_dir_all(&out)?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut passed = true;
    let mut rejected = Vec::new();
    for (i, block) in config.verify.iter().enumerate() {
        let name = block.name.clone().unwrap_or_else(|| {
            let tag = match block.inequality {
                InequalityName::Hoeffding => "hoeffding",
                InequalityName::Mz => "mz",
                InequalityName::Truncated => "truncated",
            };
            format!("{i}_{tag}")
        });
        let reps = ov.reps.or(block.reps).unwrap_or(config.reps);
        let seed = ov.seed.or(block.seed).unwrap_or(config.seed);
        match run_verifier(block, &name, reps, seed) {
            Ok(report) => {
                let ok = report.passed();
                passed &= ok;
                let file = out.join(format!("verify_{name}.csv"));
                fs::write(&file, report_csv(&report))?;
                files.push(file);
                let _ = writeln!(
                    summary,
                    "{name}: {} ({} points, {} skipped as vacuous, {reps} reps)",
                    if ok { "pass" } else { "FAIL" },
                    report.rows.len(),
                    report.rows.iter().filter(|r| r.status == dsee::bounds::Status::Vacuous).count()
                );
            }
            Err(CliError::Precondition(m)) => {
                let _ = writeln!(summary, "{name}: not run, {m}");
                rejected.push(m);
            }
            Err(e) => return Err(e),
        }
    }
    output::write(&out, "verify_summary.txt", &summary)?;
    print!("{summary}");
    if !rejected.is_empty() {
        return Err(CliError::Precondition(rejected.join("\n")));
    }
    Ok(Outcome {
        out_dir: out,
        files,
        passed,
    })
}
