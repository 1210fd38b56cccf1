//! Subcommand pipelines. Each writes its files into the output directory and
//! finishes with a `run.json` manifest listing them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use lcland::flow::{flow_run, sav_split, semi_implicit_step, SavSystem, TrajectoryRow};
use lcland::hedgehog::solve_profile;
use lcland::hisd::{find_saddle, HisdOptions};
use lcland::io::{
    fmt17, write_branches, write_field, write_hedgehog, write_landscape, write_mep_summary, write_profile,
    write_trajectory,
};
use lcland::landscape::{build_landscape, LandscapeGraph, SaddleRecord};
use lcland::maier_saupe::{leslie_coefficients, solve_branches, Branch};
use lcland::minimize::{minimize as lbfgs, minimize_projected, Minimum};
use lcland::objective::SeparableQuartic;
use lcland::string::{mep_from_path, refine_multiscale, MepResult, Path as StringPath};
use lcland::vecops::norm_inf;
use lcland::{Domain, Error, QField};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_seed, FlowScheme, RunConfig};
use crate::{CliError, ConfigArgs};

const BUILD_ID: &str = env!("LCLAND_BUILD_ID");

/// How a pipeline ended once its outputs exist.
enum Status {
    Ok,
    /// A solver stopped early; the message says which.
    Partial(String),
}

struct Run {
    command: &'static str,
    start: Instant,
    dir: PathBuf,
    files: Vec<String>,
    config: Option<RunConfig>,
    flags: Value,
    seed: Option<u64>,
}

impl Run {
    fn new(command: &'static str, dir: PathBuf, config: Option<RunConfig>, flags: Value) -> Result<Run, CliError> {
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Run {
            command,
            start: Instant::now(),
            dir,
            seed: config.as_ref().map(|c| c.seeds.rng),
            config,
            files: Vec::new(),
            flags,
        })
    }

    /// Path of an output file, recorded for the manifest.
    fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.file(name), text + "\n")?;
        Ok(())
    }

    fn field(&mut self, name: &str, d: &Arc<Domain>, x: &[f64]) -> Result<(), CliError> {
        let f = QField::from_vec(d.clone(), x.to_vec())?;
        write_field(self.file(name), &f)?;
        Ok(())
    }

    /// Writes the manifest and turns the outcome into an exit code. A solver
    /// failure after the run started still gets a manifest.
    fn finish(self, outcome: Result<Status, CliError>) -> Result<u8, CliError> {
        let (status, message, code) = match &outcome {
            Ok(Status::Ok) => ("ok", None, 0),
            Ok(Status::Partial(m)) => ("no_convergence", Some(m.clone()), 2),
            Err(CliError::Numerical(m)) => ("no_convergence", Some(m.clone()), 2),
            Err(_) => return outcome.map(|_| 1),
        };
        let manifest = json!({
            "command": self.command,
            "status": status,
            "message": message,
            "build_id": BUILD_ID,
            "seed": self.seed,
            "wall_time_s": self.start.elapsed().as_secs_f64(),
            "config": self.config,
            "flags": self.flags,
            "outputs": self.files,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.dir.join("run.json"), text + "\n")?;
        if let Some(m) = message {
            eprintln!("lcland {}: {m}", self.command);
        }
        Ok(code)
    }
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let cfg = RunConfig::read(&args.config)?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    Ok((cfg, dir))
}

fn config_flags(args: &ConfigArgs) -> Value {
    json!({ "config": args.config, "out": args.out })
}

fn not_converged(what: &str, m: &Minimum) -> String {
    format!("{what} stopped after {} iterations with |grad|_inf = {:e}", m.iterations, m.grad_inf)
}

fn write_history(run: &mut Run, name: &str, m: &Minimum) -> Result<(), CliError> {
    let mut s = String::from("iteration,energy\n");
    for (i, e) in m.history.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt17(*e));
    }
    fs::write(run.file(name), s)?;
    Ok(())
}

#[derive(Serialize)]
struct StateSummary<'a> {
    energy: f64,
    grad_inf: f64,
    morse_index: usize,
    eigenvalues: &'a [f64],
}

fn summary(r: &SaddleRecord) -> StateSummary<'_> {
    StateSummary {
        energy: r.energy,
        grad_inf: r.grad_inf,
        morse_index: r.morse_index,
        eigenvalues: &r.lambda_spectrum,
    }
}

fn minimize_cmd(run: &mut Run, cfg: &RunConfig) -> Result<Status, CliError> {
    let d = cfg.domain()?;
    let seed = parse_seed("seeds.init", &cfg.seeds.init)?;
    let init = d.seed_field(&seed, cfg.seeds.rng).into_vec();
    let m = lbfgs(&*d, init, &cfg.minimize_options())?;
    run.field("state.csv", &d, &m.x)?;
    write_history(run, "history.csv", &m)?;
    if !m.converged {
        run.json(
            "summary.json",
            &json!({ "energy": m.energy, "grad_inf": m.grad_inf, "iterations": m.iterations, "converged": false }),
        )?;
        return Ok(Status::Partial(not_converged("L-BFGS", &m)));
    }
    let rec = SaddleRecord::verify(&*d, m.x, cfg.tolerances.grad, &cfg.hisd_options())?;
    run.json(
        "summary.json",
        &json!({ "iterations": m.iterations, "converged": true, "state": summary(&rec) }),
    )?;
    Ok(Status::Ok)
}

pub fn minimize(args: &ConfigArgs) -> Result<u8, CliError> {
    let (cfg, dir) = load(args)?;
    let mut run = Run::new("minimize", dir, Some(cfg.clone()), config_flags(args))?;
    let res = minimize_cmd(&mut run, &cfg);
    run.finish(res)
}

fn flow_cmd(run: &mut Run, cfg: &RunConfig) -> Result<Status, CliError> {
    let d = cfg.domain()?;
    let seed = parse_seed("seeds.init", &cfg.seeds.init)?;
    let init = d.seed_field(&seed, cfg.seeds.rng).into_vec();
    let split = sav_split(d.clone())?;
    let s = &cfg.schemes;
    let tol = cfg.tolerances.grad;
    let (q, rows, converged) = match s.flow {
        FlowScheme::Sav => {
            let r = flow_run(&split, init, s.dt, tol, s.max_steps)?;
            (r.q, r.trajectory, r.converged)
        }
        FlowScheme::SemiImplicit => {
            let row = |step: usize, q: &[f64]| {
                let e = split.energy(q);
                TrajectoryRow {
                    step,
                    time: step as f64 * s.dt,
                    energy: e,
                    modified_energy: e,
                    grad_inf_norm: norm_inf(&split.full_gradient(q)),
                }
            };
            let mut q = init;
            let mut rows = vec![row(0, &q)];
            while rows.last().unwrap().grad_inf_norm >= tol && rows.len() <= s.max_steps {
                q = semi_implicit_step(&split, &q, s.dt)?;
                rows.push(row(rows.len(), &q));
            }
            let converged = rows.last().unwrap().grad_inf_norm < tol;
            (q, rows, converged)
        }
    };
    let last = rows.len() - 1;
    let kept: Vec<TrajectoryRow> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| i % s.trajectory_every == 0 || *i == last)
        .map(|(_, r)| r.clone())
        .collect();
    write_trajectory(run.file("trajectory.csv"), &kept)?;
    run.field("state.csv", &d, &q)?;
    let end = &rows[last];
    if !converged {
        return Ok(Status::Partial(format!(
            "flow stopped after {} steps with |grad|_inf = {:e}",
            end.step, end.grad_inf_norm
        )));
    }
    Ok(Status::Ok)
}

pub fn flow(args: &ConfigArgs) -> Result<u8, CliError> {
    let (cfg, dir) = load(args)?;
    let mut run = Run::new("flow", dir, Some(cfg.clone()), config_flags(args))?;
    let res = flow_cmd(&mut run, &cfg);
    run.finish(res)
}

fn write_mep(run: &mut Run, d: &Arc<Domain>, r: &MepResult, suffix: &str) -> Result<(), CliError> {
    write_profile(run.file(&format!("profile{suffix}.csv")), &r.path)?;
    run.field(&format!("ts{suffix}.csv"), d, &r.ts)?;
    write_mep_summary(run.file(&format!("mep{suffix}.json")), r)?;
    Ok(())
}

fn string_cmd(run: &mut Run, cfg: &RunConfig) -> Result<Status, CliError> {
    let d = cfg.domain()?;
    let opts = cfg.minimize_options();
    let mut ends = Vec::new();
    for (key, name, file) in [
        ("seeds.init", &cfg.seeds.init, "endpoint_a.csv"),
        ("seeds.target", &cfg.seeds.target, "endpoint_b.csv"),
    ] {
        let seed = parse_seed(key, name)?;
        let m = lbfgs(&*d, d.seed_field(&seed, cfg.seeds.rng).into_vec(), &opts)?;
        run.field(file, &d, &m.x)?;
        if !m.converged {
            return Ok(Status::Partial(not_converged(key, &m)));
        }
        ends.push(m.x);
    }
    let n = cfg.schemes.nodes;
    let init = match &cfg.seeds.via {
        None => StringPath::linear(&*d, &ends[0], &ends[1], n)?,
        Some(via) => {
            let seed = parse_seed("seeds.via", via)?;
            // only shapes the initial path, so a loose relaxation is enough
            let mid = lbfgs(&*d, d.seed_field(&seed, cfg.seeds.rng).into_vec(), &opts)?.x;
            let half = n / 2;
            let mut nodes = StringPath::linear(&*d, &ends[0], &mid, half + 1)?.nodes;
            nodes.extend(StringPath::linear(&*d, &mid, &ends[1], n - half)?.nodes.into_iter().skip(1));
            StringPath::from_nodes(&*d, nodes)?
        }
    };
    let sopts = cfg.string_options();
    let r = mep_from_path(&*d, init, &sopts)?;
    write_mep(run, &d, &r, "")?;
    if cfg.schemes.refine_nodes > 0 {
        let fine = refine_multiscale(&*d, &r.path, cfg.schemes.refine_nodes, &sopts)?;
        write_mep(run, &d, &fine, "_fine")?;
    }
    Ok(Status::Ok)
}

pub fn string(args: &ConfigArgs) -> Result<u8, CliError> {
    let (cfg, dir) = load(args)?;
    let mut run = Run::new("string", dir, Some(cfg.clone()), config_flags(args))?;
    let res = string_cmd(&mut run, &cfg);
    run.finish(res)
}

fn saddle_cmd(run: &mut Run, cfg: &RunConfig) -> Result<Status, CliError> {
    let d = cfg.domain()?;
    let seed = parse_seed("seeds.init", &cfg.seeds.init)?;
    let init = d.seed_field(&seed, cfg.seeds.rng).into_vec();
    let k = cfg.schemes.saddle_index;
    match find_saddle(&*d, k, &init, None, &cfg.hisd_options()) {
        Ok(rec) => {
            run.field("saddle.csv", &d, &rec.x)?;
            run.json("saddle.json", &summary(&rec))?;
            Ok(Status::Ok)
        }
        Err(Error::WrongIndex { found, wanted, record }) => {
            run.field("saddle.csv", &d, &record.x)?;
            run.json("saddle.json", &summary(&record))?;
            Ok(Status::Partial(format!("saddle dynamics reached index {found}, wanted {wanted}")))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn saddle(args: &ConfigArgs) -> Result<u8, CliError> {
    let (cfg, dir) = load(args)?;
    let mut run = Run::new("saddle", dir, Some(cfg.clone()), config_flags(args))?;
    let res = saddle_cmd(&mut run, &cfg);
    run.finish(res)
}

fn landscape_status(g: &LandscapeGraph) -> Status {
    match g.check_budget() {
        Ok(()) => Status::Ok,
        Err(e) => Status::Partial(e.to_string()),
    }
}

fn landscape_grid(run: &mut Run, cfg: &RunConfig) -> Result<Status, CliError> {
    let d = cfg.domain()?;
    let hisd: HisdOptions = cfg.hisd_options();
    let root = if cfg.seeds.root == "symmetric" {
        let dd = d.clone();
        let init = d.seed_field(&lcland::Seed::Isotropic, 0).into_vec();
        let m = minimize_projected(&*d, init, &cfg.minimize_options(), move |g| dd.symmetrize(g))?;
        if !m.converged {
            run.field("root.csv", &d, &m.x)?;
            return Ok(Status::Partial(not_converged("symmetric root", &m)));
        }
        SaddleRecord::verify(&*d, m.x, cfg.tolerances.grad, &hisd)?
    } else {
        let seed = parse_seed("seeds.root", &cfg.seeds.root)?;
        let init = d.seed_field(&seed, cfg.seeds.rng).into_vec();
        match find_saddle(&*d, cfg.schemes.saddle_index, &init, None, &hisd) {
            Ok(r) => r,
            // any verified stationary point can serve as a root
            Err(Error::WrongIndex { record, .. }) => *record,
            Err(e) => return Err(e.into()),
        }
    };
    let g = build_landscape(&*d, root, &cfg.landscape_options())?;
    let mut files = Vec::new();
    for node in &g.nodes {
        let name = format!("node_{:03}.csv", node.id);
        run.field(&name, &d, &node.x)?;
        files.push(name);
    }
    write_landscape(run.file("landscape.json"), &g, &files)?;
    Ok(landscape_status(&g))
}

fn landscape_toy(run: &mut Run) -> Result<Status, CliError> {
    let root = SaddleRecord::verify(&SeparableQuartic, vec![0.0, 0.0], 1e-8, &HisdOptions::default())?;
    let g = build_landscape(&SeparableQuartic, root, &Default::default())?;
    let mut s = String::from("id,index,energy,x,y\n");
    for n in &g.nodes {
        let _ = writeln!(s, "{},{},{},{},{}", n.id, n.morse_index, fmt17(n.energy), fmt17(n.x[0]), fmt17(n.x[1]));
    }
    fs::write(run.file("toy_nodes.csv"), s)?;
    let files = vec!["toy_nodes.csv".to_string(); g.nodes.len()];
    write_landscape(run.file("landscape.json"), &g, &files)?;
    Ok(landscape_status(&g))
}

pub fn landscape(config: Option<&Path>, out: Option<PathBuf>, toy: bool) -> Result<u8, CliError> {
    let flags = json!({ "config": config, "out": out, "toy": toy });
    if toy {
        let mut run = Run::new("landscape", out.unwrap_or_else(|| PathBuf::from(".")), None, flags)?;
        let res = landscape_toy(&mut run);
        return run.finish(res);
    }
    let path = config.ok_or_else(|| CliError::Invalid("a config file is required without --toy".into()))?;
    let cfg = RunConfig::read(path)?;
    let dir = out.unwrap_or_else(|| cfg.output.clone());
    let mut run = Run::new("landscape", dir, Some(cfg.clone()), flags)?;
    let res = landscape_grid(&mut run, &cfg);
    run.finish(res)
}

fn maier_saupe_cmd(run: &mut Run, alpha: f64, gamma1: f64) -> Result<Status, CliError> {
    let pts = solve_branches(alpha);
    write_branches(run.file("branches.csv"), alpha, &pts)?;
    let mut s = String::from("branch,eta,alpha1,alpha2,alpha3,alpha4,alpha5,alpha6,gamma1,gamma2\n");
    for p in pts.iter().filter(|p| p.branch != Branch::Isotropic) {
        let l = leslie_coefficients(p.s2, p.s4, gamma1);
        let _ = write!(s, "{},{}", p.branch, fmt17(p.eta));
        for v in l.as_array().iter().chain([l.gamma1, l.gamma2].iter()) {
            let _ = write!(s, ",{}", fmt17(*v));
        }
        s.push('\n');
    }
    fs::write(run.file("leslie.csv"), s)?;
    Ok(Status::Ok)
}

pub fn maier_saupe(alpha: f64, gamma1: f64, out: PathBuf) -> Result<u8, CliError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Invalid("`alpha`: must be positive".into()));
    }
    if !(gamma1 >= 0.0 && gamma1.is_finite()) {
        return Err(CliError::Invalid("`gamma1`: must be non-negative".into()));
    }
    let flags = json!({ "alpha": alpha, "gamma1": gamma1, "out": out });
    let mut run = Run::new("maier-saupe", out, None, flags)?;
    let res = maier_saupe_cmd(&mut run, alpha, gamma1);
    run.finish(res)
}

pub fn hedgehog(config: Option<&Path>, radius: f64, n: usize, out: Option<PathBuf>) -> Result<u8, CliError> {
    let cfg = config.map(RunConfig::read).transpose()?;
    let bulk = match &cfg {
        Some(c) => c.bulk()?,
        None => lcland::BulkParams::new(-1.0, 1.0, 1.0)?,
    };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Invalid("`radius`: must be positive".into()));
    }
    if n < 64 {
        return Err(CliError::Invalid("`n`: must be at least 64".into()));
    }
    let dir = out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    let flags = json!({ "config": config, "radius": radius, "n": n, "out": out });
    let mut run = Run::new("hedgehog", dir, cfg, flags)?;
    let res = (|| {
        let p = solve_profile(&bulk, radius, n)?;
        write_hedgehog(run.file("hedgehog.csv"), &p)?;
        run.json(
            "hedgehog.json",
            &json!({ "radius": p.radius, "n": n, "s_plus": p.s_plus, "residual": p.residual, "iterations": p.iterations }),
        )?;
        Ok(Status::Ok)
    })();
    run.finish(res)
}
