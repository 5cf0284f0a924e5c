use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use gmac_ldpc::channel::{sum_capacity_bpsk, ChannelParams};
use gmac_ldpc::design::{sweep, DesignSpec};
use gmac_ldpc::exit::{simulate_trajectory_with, TrajectoryConfig};
use gmac_ldpc::format::{write_ber, write_exit_trace, write_sweep_log, DesignFile};
use gmac_ldpc::simulate::{
    run_ber, BerConfig, CodewordPolicy, DecoderConfig, StopRule, TannerGraph,
};
use gmac_ldpc::{Error, User};

#[derive(Parser)]
#[command(
    name = "gmac-ldpc",
    version,
    about = "LDPC design and simulation for the two-user Gaussian MAC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the BPSK-input sum capacity.
    Capacity(Powers),
    /// Optimise both users' degree distributions over a check-degree sweep.
    Design(DesignArgs),
    /// Write the joint EXIT trajectory of a design as CSV.
    ExitTrace(TraceArgs),
    /// Monte Carlo BER of a random code pair drawn from a design.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Powers {
    #[arg(long, allow_negative_numbers = true)]
    p1: f64,
    #[arg(long, allow_negative_numbers = true)]
    p2: f64,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    powers: Powers,
    #[arg(long, default_value_t = 100)]
    v_max: u32,
    /// Check-degree range of user 1 (inclusive).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [4, 16])]
    dc1: Vec<u32>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [4, 16])]
    dc2: Vec<u32>,
    /// Number of uniform i_cv constraint points.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value_t = 1e-4)]
    slack: f64,
    #[arg(long, default_value_t = 50)]
    max_alternations: usize,
    #[arg(long, default_value = "design.json")]
    out: PathBuf,
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Record the wall-clock time in the design file.
    #[arg(long)]
    timestamp: bool,
}

#[derive(Args)]
struct TraceArgs {
    design: PathBuf,
    /// Common power offset in dB applied to both users.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    offset_db: f64,
    #[arg(long, default_value_t = gmac_ldpc::exit::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    AllOneHalf,
    Random,
}

#[derive(Args)]
struct SimulateArgs {
    design: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Comma-separated dB offsets from the design powers.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "0"
    )]
    offsets: Vec<f64>,
    #[arg(long)]
    min_bit_errors: Option<u64>,
    #[arg(long, default_value_t = 100)]
    max_frames: u64,
    #[arg(long, env = "GMAC_LDPC_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Policy::AllOneHalf)]
    policy: Policy,
    #[arg(long, default_value_t = 50.0)]
    llr_clamp: f64,
    /// Run all iterations even after both syndromes vanish.
    #[arg(long)]
    no_early_stop: bool,
    /// Also write both parity-check matrices as adjacency lists
    /// (`<prefix>.user1.txt`, `<prefix>.user2.txt`).
    #[arg(long)]
    graph_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its process exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible | Error::NoFeasibleDesign(_) => 1,
            Error::Io(_) | Error::Csv(_) => 3,
            Error::Construction(_) => 4,
            _ => 2,
        };
        Failure(code, e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure(3, format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn params(p: &Powers) -> Result<ChannelParams<f64>, Failure> {
    ChannelParams::new(p.p1, p.p2).map_err(|e| usage(e.to_string()))
}

fn load(path: &Path) -> Result<DesignFile, Failure> {
    DesignFile::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn capacity(p: &Powers) -> Result<u8, Failure> {
    let c = sum_capacity_bpsk(&params(p)?);
    // rounding noise must not print as "-0.0000"
    println!("{:.4}", if c > 0.0 { c } else { 0.0 });
    Ok(0)
}

fn design(a: &DesignArgs) -> Result<u8, Failure> {
    let mut spec = DesignSpec::new(params(&a.powers)?);
    spec.v_max = a.v_max;
    spec.dc_range = [(a.dc1[0], a.dc1[1]), (a.dc2[0], a.dc2[1])];
    spec.constraint_grid_size = a.grid;
    spec.slack = a.slack;
    spec.max_alternations = a.max_alternations;
    spec.workers = a.workers;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let result = sweep(&spec)?;
    let timestamp = a.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    let file = DesignFile::from_result(&result, &spec, timestamp);
    std::fs::write(&a.out, file.to_json()?).map_err(|e| io_err(&a.out, e))?;
    if let Some(path) = &a.sweep_csv {
        write_sweep_log(output(Some(path))?, &result.sweep_log)?;
    }
    let [r1, r2] = result.rates();
    let [d1, d2] = result.dc();
    eprintln!(
        "dc = ({d1}, {d2}), rates = ({r1:.4}, {r2:.4}), sum rate {:.4}, capacity {:.4}",
        result.sum_rate, result.capacity
    );
    Ok(0)
}

fn exit_trace(a: &TraceArgs) -> Result<u8, Failure> {
    let file = load(&a.design)?;
    let [e1, e2] = file.ensembles()?;
    let params = file.params()?.offset_db(a.offset_db);
    let cfg = TrajectoryConfig {
        max_iters: a.max_iters,
        ..Default::default()
    };
    let t = simulate_trajectory_with([&e1, &e2], &params, &cfg);
    write_exit_trace(output(a.out.as_deref())?, &t)?;
    Ok(if t.converged { 0 } else { 1 })
}

fn simulate(a: &SimulateArgs) -> Result<u8, Failure> {
    let file = load(&a.design)?;
    let [e1, e2] = file.ensembles()?;
    if a.iters == 0 || !(a.llr_clamp > 0.0) {
        return Err(usage("--iters must be positive and --llr-clamp above zero"));
    }
    let graph = TannerGraph::construct([&e1, &e2], a.n, a.seed)?;
    if let Some(prefix) = &a.graph_out {
        for u in User::BOTH {
            let path = PathBuf::from(format!("{}.user{u}.txt", prefix.display()));
            let f = File::create(&path).map_err(|e| io_err(&path, e))?;
            graph
                .user(u)
                .write_adjacency(BufWriter::new(f))
                .map_err(|e| io_err(&path, e))?;
        }
    }
    let cfg = BerConfig {
        offsets_db: a.offsets.clone(),
        decoder: DecoderConfig {
            max_iters: a.iters,
            llr_clamp: a.llr_clamp,
            early_stop: !a.no_early_stop,
        },
        stop: StopRule {
            min_bit_errors: a.min_bit_errors,
            max_frames: a.max_frames,
        },
        seed: a.seed,
        workers: a.workers,
        policy: match a.policy {
            Policy::AllOneHalf => CodewordPolicy::AllOneHalf,
            Policy::Random => CodewordPolicy::Random,
        },
    };
    let rows = run_ber(&graph, &file.params()?, &cfg)?;
    write_ber(output(a.out.as_deref())?, &rows)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Capacity(p) => capacity(p),
        Command::Design(a) => design(a),
        Command::ExitTrace(a) => exit_trace(a),
        Command::Simulate(a) => simulate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
