mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use ddn_core::fusion::{equivalent_sensor_count, max_wf_loss, scan_thresholds, sup_wf_loss, Edge};
use ddn_core::sim::{estimate_errors, NetworkConfig, Protocol, System, TrialStats};
use ddn_core::verify::{run_suite, Suite};
use ddn_core::{
    butterfly_area, consensus_pf, max_single_loss, multi_loss_report, optimize_multi_loss_x, prob_zero_loss,
    sup_single_loss, theta_hat, DdnError, FusionRule, GaussianShiftModel, LinePosition,
};
use output::{Cell, Table};

/// Simulated estimates further than this many standard errors from the
/// analytic value fail `simulate`.
const Z_LIMIT: f64 = 4.0;

#[derive(Parser, Debug)]
#[command(name = "ddn", version, about = "Minimax decentralized detection: loss tables, fusion-center gain, simulation and checks")]
struct Cli {
    /// Write the table here instead of stdout; the manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for simulations (generated and recorded when omitted).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps and trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key=value` file with defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Single-sensor loss, zero-loss probability and butterfly area over theta.
    LossSingle(LossSingleArgs),
    /// Consensus-network loss against a minimum-error rule on l1.
    LossMulti(LossMultiArgs),
    /// Consensus network against the best fusion-center counting rule.
    WfGap(WfGapArgs),
    /// Monte Carlo error estimates against the analytic values.
    Simulate(SimulateArgs),
    /// Run a named suite of numerical claims.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct ThetaArgs {
    /// A single theta; overrides the range.
    #[arg(long, conflicts_with_all = ["from", "to", "step"])]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    from: f64,
    #[arg(long, default_value_t = 0.49)]
    to: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

impl ThetaArgs {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        let vals = match self.theta {
            Some(t) => vec![t],
            None => {
                if !(self.step > 0.0) || !self.step.is_finite() {
                    return usage(format!("step must be positive, got {}", self.step));
                }
                if !(self.to >= self.from) {
                    return usage(format!("empty range: from {} > to {}", self.from, self.to));
                }
                let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| self.from + i as f64 * self.step).collect()
            }
        };
        if let Some(bad) = vals.iter().find(|&&t| !(t > 0.0 && t < 0.5)) {
            return usage(format!("theta {bad} is outside (0, 1/2)"));
        }
        Ok(vals)
    }
}

#[derive(Args, Debug, Serialize)]
struct LossSingleArgs {
    #[command(flatten)]
    theta: ThetaArgs,
    /// Also write the butterfly and Gaussian ROC curves as CSV.
    #[arg(long)]
    roc_curves: Option<PathBuf>,
    /// Theta of the ROC curve set.
    #[arg(long, default_value_t = 0.309)]
    roc_theta: f64,
}

#[derive(Args, Debug, Serialize)]
struct LossMultiArgs {
    /// Number of sensors (odd).
    #[arg(long = "K", visible_alias = "sensors")]
    sensors: u64,
    #[command(flatten)]
    theta: ThetaArgs,
    /// Position on l1: a number x >= 1, `inf`, or `optimize`.
    #[arg(long, default_value = "optimize")]
    x: String,
}

#[derive(Args, Debug, Serialize)]
struct WfGapArgs {
    #[arg(long = "K", visible_alias = "sensors")]
    sensors: u64,
    #[command(flatten)]
    theta: ThetaArgs,
    /// Sweep theta and report the largest gain instead.
    #[arg(long)]
    sup: bool,
    /// Add the fusion-center sensor count matching the consensus error.
    #[arg(long)]
    equivalent: bool,
    /// Emit the error of every threshold k instead of the summary.
    #[arg(long)]
    scan: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SystemArg {
    Wof,
    Wf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProtocolArg {
    LocalMajority,
    VoteFlooding,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long = "K", visible_alias = "sensors")]
    sensors: u64,
    #[arg(long, value_enum, default_value_t = SystemArg::Wof)]
    system: SystemArg,
    /// Counting threshold of the fusion center: decide 1 when more than k sensors alarm.
    #[arg(long, default_value_t = 0)]
    k: u64,
    /// Trials per hypothesis.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, value_enum, default_value_t = ProtocolArg::LocalMajority)]
    protocol: ProtocolArg,
    /// Round budget of the consensus exchange (default K).
    #[arg(long)]
    rounds: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

impl From<DdnError> for CliError {
    fn from(e: DdnError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Table plus whether the run passed its own checks.
struct Report {
    table: Table,
    passed: bool,
    failure: String,
}

impl Report {
    fn ok(table: Table) -> Self {
        Self {
            table,
            passed: true,
            failure: String::new(),
        }
    }
}

fn loss_single(a: &LossSingleArgs) -> Result<Report, CliError> {
    let mut t = Table::new("loss-single", &["row", "theta", "sup_loss", "prob_zero_loss", "butterfly_area"]);
    for theta in a.theta.values()? {
        t.push(vec![
            "grid".into(),
            theta.into(),
            sup_single_loss(theta)?.into(),
            prob_zero_loss(theta)?.into(),
            butterfly_area(theta)?.into(),
        ]);
    }
    let (theta, loss) = max_single_loss();
    t.push(vec![
        "max".into(),
        theta.into(),
        loss.into(),
        prob_zero_loss(theta)?.into(),
        butterfly_area(theta)?.into(),
    ]);
    if let Some(path) = &a.roc_curves {
        write_roc_curves(path, a.roc_theta)?;
    }
    Ok(Report::ok(t))
}

/// Butterfly edges `l1`, `l2` and the Gaussian-shift ROC through the apex.
fn write_roc_curves(path: &Path, theta: f64) -> Result<(), CliError> {
    let model = GaussianShiftModel::from_theta(theta)?;
    let th = theta_hat(theta);
    let n = 200;
    let mut t = Table::new("roc-curves", &["curve", "theta", "p_f", "p_m"]);
    for i in 0..=n {
        let s = i as f64 / n as f64;
        t.push(vec!["l1".into(), theta.into(), s.into(), (th * (1.0 - s)).into()]);
    }
    for i in 0..=n {
        let s = i as f64 / n as f64;
        t.push(vec!["l2".into(), theta.into(), (th * (1.0 - s)).into(), s.into()]);
    }
    // observation thresholds spanning the ROC from (1, 0) to (0, 1)
    let (lo, hi) = (model.mu() / 2.0 - 8.0, model.mu() / 2.0 + 8.0);
    for i in 0..=n {
        let y = lo + (hi - lo) * i as f64 / n as f64;
        t.push(vec!["gaussian_roc".into(), theta.into(), model.pf_at(y).into(), model.pm_at(y).into()]);
    }
    t.push(vec!["apex".into(), theta.into(), theta.into(), theta.into()]);
    t.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

enum XMode {
    Fixed(LinePosition),
    Optimize,
}

fn parse_x(s: &str) -> Result<XMode, CliError> {
    match s {
        "inf" | "infinity" => Ok(XMode::Fixed(LinePosition::Infinite)),
        "optimize" => Ok(XMode::Optimize),
        _ => match s.parse::<f64>() {
            Ok(x) if x >= 1.0 && x.is_finite() => Ok(XMode::Fixed(LinePosition::Finite(x))),
            _ => usage(format!("--x must be a number >= 1, 'inf' or 'optimize', got '{s}'")),
        },
    }
}

fn position_cell(p: LinePosition) -> Cell {
    match p {
        LinePosition::Finite(x) => x.into(),
        LinePosition::Infinite => "inf".into(),
    }
}

fn loss_multi(a: &LossMultiArgs) -> Result<Report, CliError> {
    let mode = parse_x(&a.x)?;
    let thetas = a.theta.values()?;
    let mut t = Table::new("loss-multi", &["theta", "loss", "x_used"]);
    for theta in thetas {
        let (pos, loss) = match mode {
            XMode::Fixed(p) => (p, multi_loss_report(a.sensors, theta, p)?.loss),
            XMode::Optimize => optimize_multi_loss_x(a.sensors, theta)?,
        };
        t.push(vec![theta.into(), loss.into(), position_cell(pos)]);
    }
    Ok(Report::ok(t))
}

fn wf_gap(a: &WfGapArgs) -> Result<Report, CliError> {
    if a.sup {
        let (theta, loss) = sup_wf_loss(a.sensors)?;
        let mut t = Table::new("wf-gap", &["sensors", "theta_star", "loss_star"]);
        t.push(vec![a.sensors.into(), theta.into(), loss.into()]);
        return Ok(Report::ok(t));
    }
    let thetas = a.theta.values()?;
    if a.scan {
        let mut t = Table::new("wf-gap", &["theta", "k", "edge", "p_f", "p_m", "error"]);
        for theta in thetas {
            for e in scan_thresholds(a.sensors, theta)? {
                let edge = match e.intersection.edge {
                    Edge::L1 => "l1",
                    Edge::L2 => "l2",
                };
                t.push(vec![
                    theta.into(),
                    e.k.into(),
                    edge.into(),
                    e.intersection.point.p_f.into(),
                    e.intersection.point.p_m.into(),
                    e.error.into(),
                ]);
            }
        }
        return Ok(Report::ok(t));
    }
    let mut cols = vec![
        "theta", "sensors", "wof_error", "wf_error", "loss", "best_k", "best_p_f", "best_p_m", "verified",
    ];
    if a.equivalent {
        cols.push("equivalent_sensors");
    }
    let mut t = Table::new("wf-gap", &cols);
    let mut failed = Vec::new();
    for theta in thetas {
        let r = max_wf_loss(a.sensors, theta)?;
        let verified: Cell = match r.verified {
            Some(v) => {
                if !v {
                    failed.push(theta);
                }
                v.into()
            }
            None => "skipped".into(),
        };
        let mut row = vec![
            theta.into(),
            r.sensors.into(),
            r.wof_error.into(),
            r.wf_error.into(),
            r.loss.into(),
            r.best_k.into(),
            r.best_point.p_f.into(),
            r.best_point.p_m.into(),
            verified,
        ];
        if a.equivalent {
            row.push(equivalent_sensor_count(a.sensors, theta)?.into());
        }
        t.push(row);
    }
    Ok(Report {
        table: t,
        passed: failed.is_empty(),
        failure: format!("threshold scan disagrees with the closed form at theta {failed:?}"),
    })
}

/// `|estimate - analytic|` in standard errors; the analytic binomial standard
/// error stands in when no error was observed.
fn z_score(est: f64, se: f64, analytic: f64, trials: u64) -> f64 {
    let se = if se > 0.0 {
        se
    } else {
        (analytic * (1.0 - analytic) / trials as f64).sqrt()
    };
    if se > 0.0 {
        (est - analytic) / se
    } else if est == analytic {
        0.0
    } else {
        f64::INFINITY
    }
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<Report, CliError> {
    if a.trials == 0 {
        return usage("--trials must be at least 1");
    }
    let model = GaussianShiftModel::from_theta(a.theta)?;
    let mut cfg = NetworkConfig::ring(a.sensors as usize, seed, a.trials)?;
    cfg.protocol = match a.protocol {
        ProtocolArg::LocalMajority => Protocol::LocalMajority,
        ProtocolArg::VoteFlooding => Protocol::VoteFlooding,
    };
    if let Some(r) = a.rounds {
        cfg.rounds = r;
    }
    let op = ddn_core::ObservationModel::operating_point(&model);
    let (system, pf, pm) = match a.system {
        SystemArg::Wof => (System::Wof, consensus_pf(a.sensors, op.p_f)?, consensus_pf(a.sensors, op.p_m)?),
        SystemArg::Wf => {
            let rule = FusionRule::counting(a.sensors, a.k)?;
            (System::Wf(rule), rule.system_pf(op.p_f)?, rule.system_pm(op.p_m)?)
        }
    };
    let s: TrialStats = estimate_errors(&model, &cfg, system)?;
    let mut t = Table::new(
        "simulate",
        &["quantity", "estimate", "stderr", "analytic", "z", "errors", "trials", "fallbacks"],
    );
    let z_pf = z_score(s.est_pf, s.stderr_pf, pf, s.trials_h0);
    let z_pm = z_score(s.est_pm, s.stderr_pm, pm, s.trials_h1);
    t.push(vec![
        "p_f".into(),
        s.est_pf.into(),
        s.stderr_pf.into(),
        pf.into(),
        z_pf.into(),
        s.false_alarms.into(),
        s.trials_h0.into(),
        s.fallbacks.into(),
    ]);
    t.push(vec![
        "p_m".into(),
        s.est_pm.into(),
        s.stderr_pm.into(),
        pm.into(),
        z_pm.into(),
        s.misses.into(),
        s.trials_h1.into(),
        s.fallbacks.into(),
    ]);
    let passed = z_pf.abs() <= Z_LIMIT && z_pm.abs() <= Z_LIMIT;
    Ok(Report {
        table: t,
        passed,
        failure: format!("|z| exceeds {Z_LIMIT}: z_pf = {z_pf:.3}, z_pm = {z_pm:.3}"),
    })
}

fn verify(a: &VerifyArgs) -> Result<Report, CliError> {
    let suite: Suite = a.suite.parse().map_err(CliError::Usage)?;
    let claims = run_suite(suite);
    let mut t = Table::new("verify", &["claim", "status", "tolerance", "grid", "detail"]);
    let mut map = Map::new();
    for c in &claims {
        let status = if c.passed { "pass" } else { "fail" };
        t.push(vec![
            c.name.into(),
            status.into(),
            c.tolerance.into(),
            c.grid.clone().into(),
            c.detail.clone().into(),
        ]);
        map.insert(
            c.name.into(),
            json!({ "grid": c.grid, "tolerance": c.tolerance, "status": status, "detail": c.detail }),
        );
    }
    let failed: Vec<&str> = claims.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    t.json = Some(json!({ "suite": suite.to_string(), "passed": failed.is_empty(), "claims": map }));
    Ok(Report {
        table: t,
        passed: failed.is_empty(),
        failure: format!("failed claims: {}", failed.join(", ")),
    })
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    parameters: Value,
    format: Format,
    seed: Option<u64>,
    threads: Option<usize>,
    version: &'static str,
    outputs: Vec<String>,
    duration_seconds: f64,
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::LossSingle(_) => "loss-single",
        Command::LossMulti(_) => "loss-multi",
        Command::WfGap(_) => "wf-gap",
        Command::Simulate(_) => "simulate",
        Command::Verify(_) => "verify",
    }
}

fn emit(table: &Table, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        match format {
            Format::Csv => table.write_csv(&mut *w)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, &table.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    };
    match out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let start = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mut seed = None;
    let report = match &cli.command {
        Command::LossSingle(a) => loss_single(a)?,
        Command::LossMulti(a) => loss_multi(a)?,
        Command::WfGap(a) => wf_gap(a)?,
        Command::Simulate(a) => {
            let s = cli.seed.unwrap_or_else(rand::random);
            seed = Some(s);
            simulate(a, s)?
        }
        Command::Verify(a) => verify(a)?,
    };
    emit(&report.table, cli.format, cli.out.as_deref())?;

    let mut outputs: Vec<String> = cli.out.iter().map(|p| p.display().to_string()).collect();
    if let Command::LossSingle(LossSingleArgs { roc_curves: Some(p), .. }) = &cli.command {
        outputs.push(p.display().to_string());
    }
    let manifest = RunManifest {
        subcommand: subcommand_name(&cli.command),
        parameters: serde_json::to_value(&cli.command).map_err(|e| CliError::Io(e.to_string()))?,
        format: cli.format,
        seed,
        threads: cli.threads,
        version: env!("CARGO_PKG_VERSION"),
        outputs,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    match &cli.out {
        Some(p) => {
            let mut name = p.clone().into_os_string();
            name.push(".manifest.json");
            std::fs::write(PathBuf::from(name), text + "\n")?;
        }
        None => eprintln!("{text}"),
    }
    if !report.passed {
        eprintln!("ddn: {}", report.failure);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("ddn: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(m)) => {
            eprintln!("ddn: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Io(m)) => {
            eprintln!("ddn: {m}");
            ExitCode::from(1)
        }
    }
}
