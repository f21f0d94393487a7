use trwmap::instances::{cycle4, diamond_counterexample, three_tree_example, triangle};
use trwmap::lp::{solve_local_lp, Vertex};
use trwmap::treedp::brute_force_map;
use trwmap::trees::{edge_appearance, EdgeAppearance, Reweighting, TreeDistribution};
use trwmap::trw::{run_trw, OsOutcome, TrwConfig, TrwResult, Variant};
use trwmap::{Assignment, PairwiseMrf, Result};

use crate::{ExampleArgs, ExampleName, Status};

struct Checks {
    failed: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        if ok {
            println!("PASS: {what}");
        } else {
            self.failed += 1;
            println!("FAIL: {what}");
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1.0)
}

fn describe(os: &OsOutcome) -> String {
    match os {
        OsOutcome::Certificate(x) => format!("certificate {x}"),
        OsOutcome::None => "no certificate".into(),
        OsOutcome::Indeterminate => "indeterminate".into(),
    }
}

fn reweighted(mrf: &PairwiseMrf) -> Result<(TreeDistribution, TrwResult)> {
    let dist = TreeDistribution::uniform_all(mrf)?;
    let r = run_trw(
        mrf,
        &Reweighting::Trees(dist.clone()),
        &TrwConfig::default(),
        Variant::Messages,
    )?;
    Ok((dist, r))
}

pub fn run(args: &ExampleArgs) -> Status {
    let mut checks = Checks { failed: 0 };
    let outcome = match args.name {
        ExampleName::Cycle4 => cycle(&mut checks),
        ExampleName::Triangle => triangle_example(&mut checks, args.beta),
        ExampleName::Diamond => diamond(&mut checks),
        ExampleName::ThreeTrees => appearance(&mut checks),
    };
    if let Err(e) = outcome {
        checks.check(false, format!("example raised an error: {e}"));
    }
    if checks.failed == 0 {
        Status::Ok
    } else {
        Status::Failed
    }
}

fn cycle(checks: &mut Checks) -> Result<()> {
    let m = cycle4();
    let opt = brute_force_map(&m)?;
    let both = opt.contains(&Assignment(vec![0; 4])) && opt.contains(&Assignment(vec![1; 4]));
    checks.check(
        both && opt.len() == 2,
        format!("MAP value {} attained by 0000 and 1111 only", opt.value),
    );
    let (_, r) = reweighted(&m)?;
    let found = r.certificate().is_some_and(|x| opt.contains(x));
    checks.check(
        found,
        format!("reweighted max-product: {} is optimal", describe(&r.os)),
    );
    let lp = solve_local_lp(&m)?;
    checks.check(
        close(lp.value, opt.value),
        format!("relaxation value {} equals MAP", lp.value),
    );
    Ok(())
}

fn triangle_example(checks: &mut Checks, beta: f64) -> Result<()> {
    let m = triangle(beta);
    let opt = brute_force_map(&m)?;
    let lp = solve_local_lp(&m)?;
    let (_, r) = reweighted(&m)?;
    let bound = r.upper_bound.last().copied().unwrap_or(f64::INFINITY);
    if beta >= 0.0 {
        checks.check(close(opt.value, 0.0), format!("MAP value {}", opt.value));
        checks.check(
            close(lp.value, opt.value),
            format!("relaxation value {} equals MAP", lp.value),
        );
        let uniform = r
            .certificate()
            .is_some_and(|x| x.values().iter().all(|&v| v == x.values()[0]));
        checks.check(uniform, format!("OS holds: {}", describe(&r.os)));
        checks.check(
            close(bound, opt.value),
            format!("bound tight: {bound} = MAP"),
        );
    } else {
        let gap = -beta;
        checks.check(
            close(opt.value, 2.0 * gap),
            format!("MAP value {} with {} optima", opt.value, opt.len()),
        );
        checks.check(
            close(lp.value, 3.0 * gap),
            format!("relaxation value {}", lp.value),
        );
        checks.check(
            lp.vertex == Vertex::Fractional,
            "relaxation optimum is a fractional vertex".into(),
        );
        checks.check(
            r.os == OsOutcome::None,
            format!("OS fails: {}", describe(&r.os)),
        );
        checks.check(
            bound > opt.value + 1e-7,
            format!("bound {bound} exceeds MAP"),
        );
    }
    Ok(())
}

fn diamond(checks: &mut Checks) -> Result<()> {
    let m = diamond_counterexample();
    let opt = brute_force_map(&m)?;
    let plain = run_trw(
        &m,
        &Reweighting::Edges(EdgeAppearance::ones(&m)),
        &TrwConfig::default(),
        Variant::Messages,
    )?;
    let zeros = Assignment(vec![0; 4]);
    let ones = Assignment(vec![1; 4]);
    checks.check(
        plain.converged && plain.certificate() == Some(&zeros) && !opt.contains(&zeros),
        format!(
            "ordinary max-product: {} with score {} is not optimal",
            describe(&plain.os),
            m.score(&zeros)?
        ),
    );
    let (_, r) = reweighted(&m)?;
    checks.check(
        r.certificate() == Some(&ones) && opt.contains(&ones),
        format!(
            "reweighted max-product: {} is optimal, value {}",
            describe(&r.os),
            opt.value
        ),
    );
    Ok(())
}

fn appearance(checks: &mut Checks) -> Result<()> {
    let (m, dist) = three_tree_example();
    let rho = edge_appearance(&dist, &m)?;
    let at = |a, b| rho.rho()[m.edge_index(a, b).expect("edge exists")];
    let (b, e, f) = (at(2, 4), at(0, 1), at(0, 2));
    checks.check(
        b == 1.0 && e == 2.0 / 3.0 && f == 1.0 / 3.0,
        format!("rho = ({b}, {e}, {f}) = (1, 2/3, 1/3)"),
    );
    Ok(())
}
