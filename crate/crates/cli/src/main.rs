use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use jcs_noma::channel::{substream, ChannelRealization, ChannelSampler};
use jcs_noma::montecarlo::{estimate_ergodic_rate, estimate_outage, Device, McConfig};
use jcs_noma::opa::{baselines_at, solve, Fixed, OpaSolution, Scheme, Tolerances, BASELINE_A_N, BASELINE_POWER_DB};
use jcs_noma::outage::{outage_far, outage_far_asymptotic, outage_near, outage_near_asymptotic};
use jcs_noma::rate::{ergodic_rates, ergodic_rates_approx};
use jcs_noma::scenario::{db_to_linear, derive_variances, load_config, paper_defaults, Geometry, Mode, SystemParams};
use jcs_noma::sensing::{ensemble_detection_seeded, DetectionConfig};
use jcs_noma::{selftest, Error};

/// Outage, rate, sensing and power-allocation experiments for a
/// full-duplex NOMA relay that also senses a target.
#[derive(Parser)]
#[command(name = "jcs-noma", version)]
struct Cli {
    /// Scenario JSON; keys left out keep their default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of every Monte-Carlo estimate.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "JCS_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Sweep {
    /// First sweep value (dB for power axes, meters for distance).
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

impl Sweep {
    fn values(&self, from: f64, to: f64, points: usize) -> Result<Vec<f64>, Error> {
        let (a, b, n) = (
            self.from.unwrap_or(from),
            self.to.unwrap_or(to),
            self.points.unwrap_or(points),
        );
        if n == 0 || !a.is_finite() || !b.is_finite() || (n == 1 && a != b) {
            return Err(Error::InvalidParams(format!("bad sweep {a}..{b} with {n} points")));
        }
        Ok((0..n)
            .map(|i| {
                if n == 1 {
                    a
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SnrAxis {
    Snr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RateAxis {
    Snr,
    RelayDistance,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PsenAxis {
    Psen,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PmaxAxis {
    Pmax,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Scd,
    Ccd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fd,
    Hd,
    Nc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fd => Mode::FullDuplex,
            ModeArg::Hd => Mode::HalfDuplex,
            ModeArg::Nc => Mode::NonCooperative,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Outage of both devices versus transmit SNR (P_com = P_sen).
    Outage {
        #[arg(long, value_enum, default_value = "snr")]
        sweep: SnrAxis,
        #[command(flatten)]
        range: Sweep,
        /// Monte-Carlo trials per point; 0 skips simulation.
        #[arg(long, default_value_t = 100_000)]
        mc: u64,
        /// Relaying mode; defaults to the scenario's.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Ergodic rates of both devices in every mode.
    Rate {
        #[arg(long, value_enum, default_value = "snr")]
        sweep: RateAxis,
        #[command(flatten)]
        range: Sweep,
        #[arg(long, default_value_t = 100_000)]
        mc: u64,
        /// Source to near-device distance for the relay-distance sweep.
        #[arg(long, default_value_t = 5.0)]
        d_sdn: f64,
        #[arg(long, default_value_t = 6.0)]
        d_sdf: f64,
        /// Angle between the two device directions, degrees.
        #[arg(long, default_value_t = 30.0)]
        phi_deg: f64,
    },
    /// Detection probability in full and half duplex versus sensing power.
    Sensing {
        #[arg(long, value_enum, default_value = "psen")]
        sweep: PsenAxis,
        #[command(flatten)]
        range: Sweep,
        /// Target false-alarm probability.
        #[arg(long, default_value_t = 1e-5)]
        pfa: f64,
        /// Channel draws averaged per point.
        #[arg(long, default_value_t = 2000)]
        ensemble: usize,
    },
    /// Optimal power allocation against the fixed-parameter baselines.
    Optimize {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Sweep the power budget; without it, solve once and print JSON.
        #[arg(long, value_enum)]
        sweep: Option<PmaxAxis>,
        #[command(flatten)]
        range: Sweep,
        /// Draw one faded realization instead of using the mean gains.
        #[arg(long)]
        realization_seed: Option<u64>,
        /// Power held fixed by the fixed-pcom and fixed-psen baselines, dB.
        #[arg(long, default_value_t = BASELINE_POWER_DB)]
        baseline_power_db: f64,
        /// Near-device share held fixed by the fixed-an baseline.
        #[arg(long, default_value_t = BASELINE_A_N)]
        baseline_a_n: f64,
    },
    /// Runs the invariant suite on the scenario.
    Selftest,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn write(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

enum Output {
    Csv(Table),
    Json(String),
    Report(Vec<selftest::Check>),
}

struct Context {
    params: SystemParams,
    geo: Geometry,
    seed: u64,
}

fn outage_table(ctx: &Context, range: Sweep, mc: u64, mode: Option<ModeArg>) -> Result<Table, Error> {
    let p = mode.map_or(ctx.params, |m| ctx.params.with_mode(m.into()));
    let vars = derive_variances(&p, &ctx.geo)?;
    let mut t = Table::new(
        [
            "snr_db",
            "exact_far",
            "exact_near",
            "asym_far",
            "asym_near",
            "mc_far",
            "mc_far_se",
            "mc_near",
            "mc_near_se",
        ]
        .map(String::from)
        .to_vec(),
    );
    for db in range.values(0.0, 40.0, 9)? {
        let q = p.with_snr_db(db);
        let mut row = vec![db, outage_far(&q, &vars)?, outage_near(&q, &vars)?];
        row.push(outage_far_asymptotic(&q, &vars).unwrap_or(f64::NAN));
        row.push(outage_near_asymptotic(&q, &vars).unwrap_or(f64::NAN));
        if mc > 0 {
            let cfg = McConfig::new(mc, ctx.seed);
            let far = estimate_outage(Device::Far, &q, &vars, &cfg)?;
            let near = estimate_outage(Device::Near, &q, &vars, &cfg)?;
            row.extend([far.mean, far.std_error, near.mean, near.std_error]);
        } else {
            row.extend([f64::NAN; 4]);
        }
        t.rows.push(row);
    }
    Ok(t)
}

const MODES: [(Mode, &str); 3] = [
    (Mode::FullDuplex, "fd"),
    (Mode::HalfDuplex, "hd"),
    (Mode::NonCooperative, "nc"),
];

fn rate_table(ctx: &Context, axis: RateAxis, range: Sweep, mc: u64, layout: (f64, f64, f64)) -> Result<Table, Error> {
    let mut header = vec![match axis {
        RateAxis::Snr => "snr_db".to_string(),
        RateAxis::RelayDistance => "d_sr".to_string(),
    }];
    for (_, tag) in MODES {
        for col in [
            "exact_far",
            "exact_near",
            "approx_far",
            "approx_near",
            "mc_far",
            "mc_near",
        ] {
            header.push(format!("{col}_{tag}"));
        }
    }
    let mut t = Table::new(header);
    let (d_sdn, d_sdf, phi_deg) = layout;
    let xs = match axis {
        RateAxis::Snr => range.values(0.0, 60.0, 13)?,
        RateAxis::RelayDistance => range.values(0.05 * d_sdn, 0.95 * d_sdn, 19)?,
    };
    for x in xs {
        let (base, geo) = match axis {
            RateAxis::Snr => (ctx.params.with_snr_db(x), ctx.geo),
            RateAxis::RelayDistance => (
                ctx.params,
                Geometry::relay_on_line(x, d_sdn, d_sdf, phi_deg.to_radians(), ctx.geo.d_rt)?,
            ),
        };
        let mut row = vec![x];
        for (mode, _) in MODES {
            let q = base.with_mode(mode);
            let vars = derive_variances(&q, &geo)?;
            let exact = ergodic_rates(&q, &vars)?;
            let approx = ergodic_rates_approx(&q, &vars)?;
            row.extend([exact.far, exact.near, approx.far, approx.near]);
            if mc > 0 {
                let cfg = McConfig::new(mc, ctx.seed);
                row.push(estimate_ergodic_rate(Device::Far, &q, &vars, &cfg)?.mean);
                row.push(estimate_ergodic_rate(Device::Near, &q, &vars, &cfg)?.mean);
            } else {
                row.extend([f64::NAN; 2]);
            }
        }
        t.rows.push(row);
    }
    Ok(t)
}

fn sensing_table(ctx: &Context, range: Sweep, pfa: f64, ensemble: usize) -> Result<Table, Error> {
    let cfg = DetectionConfig::new(pfa, ensemble)?;
    let mut t = Table::new(["psen_db", "pd_fd", "pd_hd"].map(String::from).to_vec());
    for db in range.values(20.0, 50.0, 7)? {
        let mut row = vec![db];
        for mode in [Mode::FullDuplex, Mode::HalfDuplex] {
            let q = ctx.params.with_mode(mode);
            let q = q.with_powers(q.p_com, q.n0 * db_to_linear(db));
            let vars = derive_variances(&q, &ctx.geo)?;
            row.push(ensemble_detection_seeded(&q, &vars, &cfg, ctx.seed)?);
        }
        t.rows.push(row);
    }
    Ok(t)
}

fn realization(ctx: &Context, seed: Option<u64>) -> Result<ChannelRealization, Error> {
    let vars = derive_variances(&ctx.params, &ctx.geo)?;
    match seed {
        Some(s) => Ok(ChannelSampler::new(&vars)?.sample(&mut substream(s, 0))),
        None => ChannelRealization::mean_surrogate(&vars),
    }
}

fn objective(s: &OpaSolution) -> f64 {
    if s.feasible {
        s.objective
    } else {
        f64::NAN
    }
}

fn optimize_table(
    ctx: &Context,
    scheme: Scheme,
    range: Sweep,
    g: &ChannelRealization,
    fixed: (f64, f64),
) -> Result<Table, Error> {
    let tol = Tolerances::default();
    let xs = range.values(0.0, 30.0, 7)?;
    let rows = xs
        .par_iter()
        .map(|&db| {
            let p_max = ctx.params.n0 * db_to_linear(db);
            let p = SystemParams {
                p_max,
                p_com: ctx.params.p_com.min(p_max),
                p_sen: ctx.params.p_sen.min(p_max),
                ..ctx.params
            };
            let full = solve(scheme, &p, g, &tol, Fixed::Free)?;
            let b = baselines_at(scheme, &p, g, &tol, ctx.params.n0 * db_to_linear(fixed.0), fixed.1)?;
            let exact = if full.feasible {
                full.exact_sum_rate.unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            Ok(vec![
                db,
                objective(&full),
                objective(&b.fixed_p_com),
                objective(&b.fixed_p_sen),
                objective(&b.fixed_a_n),
                full.p_com,
                full.p_sen,
                full.a_n,
                exact,
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    if rows.iter().all(|r| r[1].is_nan()) {
        return Err(Error::Infeasible {
            violated: vec!["no feasible point on the sweep".into()],
        });
    }
    let mut t = Table::new(
        [
            "pmax_dbm",
            "full",
            "fixed_pcom",
            "fixed_psen",
            "fixed_an",
            "p_com",
            "p_sen",
            "a_n",
            "exact_sum_rate",
        ]
        .map(String::from)
        .to_vec(),
    );
    t.rows = rows;
    Ok(t)
}

fn run(cli: &Cli) -> Result<Output, Error> {
    let (params, geo) = match &cli.config {
        Some(path) => load_config(path)?,
        None => paper_defaults(),
    };
    let ctx = Context {
        params,
        geo,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Outage { range, mc, mode, .. } => outage_table(&ctx, *range, *mc, *mode).map(Output::Csv),
        Command::Rate {
            sweep,
            range,
            mc,
            d_sdn,
            d_sdf,
            phi_deg,
        } => rate_table(&ctx, *sweep, *range, *mc, (*d_sdn, *d_sdf, *phi_deg)).map(Output::Csv),
        Command::Sensing {
            range, pfa, ensemble, ..
        } => sensing_table(&ctx, *range, *pfa, *ensemble).map(Output::Csv),
        Command::Optimize {
            scheme,
            sweep,
            range,
            realization_seed,
            baseline_power_db,
            baseline_a_n,
        } => {
            let scheme = match scheme {
                SchemeArg::Scd => Scheme::Scd,
                SchemeArg::Ccd => Scheme::Ccd,
            };
            let g = realization(&ctx, *realization_seed)?;
            if sweep.is_some() {
                return optimize_table(&ctx, scheme, *range, &g, (*baseline_power_db, *baseline_a_n)).map(Output::Csv);
            }
            let sol = solve(scheme, &ctx.params, &g, &Tolerances::default(), Fixed::Free)?.into_result()?;
            serde_json::to_string_pretty(&sol)
                .map(Output::Json)
                .map_err(|e| Error::Config(e.to_string()))
        }
        Command::Selftest => Ok(Output::Report(selftest::run(&ctx.params, &ctx.geo))),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 2,
        Error::Convergence { .. } | Error::NoConvergence { .. } => 3,
        _ => 1,
    }
}

fn emit(cli: &Cli, out: &Output) -> io::Result<bool> {
    let mut sink: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let ok = match out {
        Output::Csv(t) => {
            t.write(&mut sink)?;
            true
        }
        Output::Json(s) => {
            writeln!(sink, "{s}")?;
            true
        }
        Output::Report(checks) => {
            writeln!(sink, "check,passed,detail")?;
            for c in checks {
                writeln!(sink, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"))?;
            }
            checks.iter().all(|c| c.passed)
        }
    };
    sink.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match emit(&cli, &out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: self-test failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
