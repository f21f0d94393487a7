use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};

use trwmap::lp::{dual_from_messages, evaluate_dual, solve_local_lp, Vertex};
use trwmap::model::load_model;
use trwmap::treedp::{brute_force_map, check_edge_consistency, OptSet};
use trwmap::trees::{load_reweighting, EdgeAppearance, Reweighting, TreeDistribution};
use trwmap::trw::{
    check_reparameterization_pseudo, run_tree_updates, run_trw, OsOutcome, TrwConfig, TrwResult,
    Variant,
};
use trwmap::{Error, PairwiseMrf, Potentials};

use crate::{Method, SolveArgs, Status};

struct Report {
    fields: Map<String, Value>,
}

impl Report {
    fn new() -> Self {
        Report { fields: Map::new() }
    }

    fn put(&mut self, key: &str, value: impl Into<Value>) {
        let value = value.into();
        match &value {
            Value::String(s) => println!("{key}: {s}"),
            other => println!("{key}: {other}"),
        }
        self.fields.insert(key.to_string(), value);
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load(args: &SolveArgs) -> Result<PairwiseMrf> {
    let mrf = load_model(&read(&args.model)?)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let Some(beta) = args.beta else {
        return Ok(mrf);
    };
    if !beta.is_finite() {
        bail!("--beta must be finite");
    }
    let theta = mrf.theta();
    let scaled = Potentials {
        node: theta.node.clone(),
        edge: theta
            .edge
            .iter()
            .map(|t| t.iter().map(|v| v * beta).collect())
            .collect(),
    };
    Ok(mrf.with_theta(scaled)?)
}

fn reweighting(mrf: &PairwiseMrf, args: &SolveArgs) -> Result<Reweighting> {
    if let Some(path) = &args.trees {
        return load_reweighting(&read(path)?, mrf)
            .with_context(|| format!("loading {}", path.display()));
    }
    if args.rho != "uniform" {
        let path = Path::new(&args.rho);
        return load_reweighting(&read(path)?, mrf)
            .with_context(|| format!("loading {}", path.display()));
    }
    match TreeDistribution::uniform_all(mrf) {
        Ok(dist) => Ok(Reweighting::Trees(dist)),
        Err(Error::Capacity(_)) => {
            eprintln!("note: too many spanning trees to enumerate; using rho_e = (n - 1) / |E| without trees");
            Ok(Reweighting::Edges(EdgeAppearance::uniform(mrf)))
        }
        Err(e) => Err(e.into()),
    }
}

fn config(args: &SolveArgs) -> TrwConfig {
    TrwConfig {
        damping: args.iteration.damping,
        tolerance: args.iteration.eps,
        max_iterations: args.iteration.max_iters,
        record_bound: true,
    }
}

fn oracle(mrf: &PairwiseMrf) -> Result<OptSet> {
    brute_force_map(mrf).context("exhaustive search")
}

pub fn run(args: &SolveArgs) -> Result<Status> {
    let mrf = load(args)?;
    let mut report = Report::new();
    report.put("nodes", mrf.node_count());
    report.put("edges", mrf.edge_count());
    let status = match args.method {
        Method::Brute => brute(&mrf, &mut report)?,
        Method::Lp => lp(&mrf, args, &mut report)?,
        Method::Maxprod => {
            let weights = Reweighting::Edges(EdgeAppearance::ones(&mrf));
            let result = run_trw(&mrf, &weights, &config(args), Variant::Messages)?;
            trw(&mrf, args, &weights, &result, &mut report)?
        }
        Method::TrwEdge | Method::TrwMsg => {
            let weights = reweighting(&mrf, args)?;
            let variant = if args.method == Method::TrwEdge {
                Variant::Reparameterization
            } else {
                Variant::Messages
            };
            let result = run_trw(&mrf, &weights, &config(args), variant)?;
            trw(&mrf, args, &weights, &result, &mut report)?
        }
        Method::TrwTree => {
            let weights = reweighting(&mrf, args)?;
            let dist = weights.trees().ok_or(Error::RequiresExplicitTrees)?;
            let result = run_tree_updates(&mrf, dist, &config(args))?;
            trw(&mrf, args, &weights, &result, &mut report)?
        }
    };
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&Value::Object(report.fields))?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(status)
}

fn brute(mrf: &PairwiseMrf, report: &mut Report) -> Result<Status> {
    let opt = oracle(mrf)?;
    report.put("value", opt.value);
    report.put("optima", opt.len());
    let shown: Vec<String> = opt.configs.iter().take(32).map(|x| x.to_string()).collect();
    report.put("configurations", shown);
    Ok(Status::Ok)
}

fn lp(mrf: &PairwiseMrf, args: &SolveArgs, report: &mut Report) -> Result<Status> {
    let sol = solve_local_lp(mrf)?;
    report.put("value", sol.value);
    match &sol.vertex {
        Vertex::Integral(x) => {
            report.put("vertex", "integral");
            report.put("certificate", x.to_string());
        }
        Vertex::Fractional => report.put("vertex", "fractional"),
    }
    report.put("tau", json!({ "node": sol.tau.node, "edge": sol.tau.edge }));
    if args.verify_oracle {
        let opt = oracle(mrf)?;
        report.put("oracle_value", opt.value);
        let tight = (sol.value - opt.value).abs() <= 1e-7 * opt.value.abs().max(1.0);
        report.put("relaxation_tight", tight);
        if sol.value < opt.value - 1e-7 {
            eprintln!(
                "relaxation value {} is below the MAP value {}",
                sol.value, opt.value
            );
            return Ok(Status::Failed);
        }
    }
    Ok(Status::Ok)
}

fn trw(
    mrf: &PairwiseMrf,
    args: &SolveArgs,
    weights: &Reweighting,
    result: &TrwResult,
    report: &mut Report,
) -> Result<Status> {
    let rho = weights.edge_appearance(mrf)?;
    report.put("iterations", result.iterations);
    report.put("converged", result.converged);
    report.put("messages_per_edge", result.messages_per_edge(mrf));
    report.put("rho_validated", rho.is_validated());
    let os = match &result.os {
        OsOutcome::Certificate(_) => "certificate",
        OsOutcome::None => "none",
        OsOutcome::Indeterminate => "indeterminate",
    };
    report.put("os", os);
    let cert = result.certificate();
    if let Some(x) = cert {
        report.put("certificate", x.to_string());
        report.put("value", mrf.score(x)?);
    }
    report.put(
        "reparameterization_deviation",
        check_reparameterization_pseudo(mrf, &result.nu, &rho)?,
    );
    report.put(
        "consistency_deviation",
        check_edge_consistency(mrf, &result.nu).max_deviation(),
    );
    if let Some(&bound) = result.upper_bound.last() {
        report.put("upper_bound", bound);
    }
    if let (Some(msgs), Some(dist)) = (&result.messages, weights.trees()) {
        let lambda = dual_from_messages(mrf, msgs, &result.nu, dist, args.root)?;
        report.put("dual_value", evaluate_dual(mrf, &lambda, &rho));
    }
    let mut status = if cert.is_some() {
        Status::Ok
    } else {
        Status::NoCertificate
    };
    if args.verify_oracle {
        let opt = oracle(mrf)?;
        report.put("oracle_value", opt.value);
        if let Some(x) = cert {
            let matched = opt.contains(x);
            report.put("oracle_match", matched);
            if !matched && rho.is_validated() {
                eprintln!("certificate {x} is not optimal");
                status = Status::Failed;
            }
        }
    }
    Ok(status)
}
