mod commands;
mod plant;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_TUNE: u8 = 2;
pub const EXIT_TRANSPORT: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    pub fn tune(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_TUNE,
            msg: msg.into(),
        }
    }

    pub fn transport(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_TRANSPORT,
            msg: msg.into(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ut",
    version,
    about = "Model-free PI-Lead tuning on simulated or remote plants"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PlantArgs {
    /// Catalog plant: pure_integrator, second_order_type_one,
    /// fourth_order_resonant, delayed_type_one, vcm_like
    #[arg(long, conflicts_with_all = ["plant_file", "connect"])]
    pub plant: Option<String>,
    /// Override a catalog parameter, e.g. `--set tau=0.2`
    #[arg(long = "set", value_name = "KEY=VALUE", requires = "plant")]
    pub set: Vec<String>,
    /// PlantSpec JSON document
    #[arg(long, value_name = "FILE", conflicts_with = "connect")]
    pub plant_file: Option<String>,
    /// Drive a plant served by `ut serve`
    #[arg(long, value_name = "HOST:PORT")]
    pub connect: Option<String>,
    /// Noise seed for local plants
    #[arg(long, env = "UT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct ControllerArgs {
    /// PI controller `Kp,Ti`
    #[arg(long, value_name = "KP,TI", conflicts_with_all = ["controller", "zn_pid"])]
    pub pi: Option<String>,
    /// Lead in series with the PI, `alpha,tau`
    #[arg(long, value_name = "ALPHA,TAU", requires = "pi")]
    pub lead: Option<String>,
    /// Controller coefficient file
    #[arg(long, value_name = "FILE", conflicts_with = "zn_pid")]
    pub controller: Option<String>,
    /// Filtered ZN PID from ultimate values `Ku,Tu`
    #[arg(long, value_name = "KU,TU")]
    pub zn_pid: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Step reference
    #[arg(long, default_value_t = 0.01)]
    pub x_ref: f64,
    #[arg(long, default_value_t = 4.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Disturbance pulse `t_on,width,force`; bare `--pulse` uses the default knock
    #[arg(long, value_name = "T_ON,WIDTH,FORCE", num_args = 0..=1, default_missing_value = "default")]
    pub pulse: Option<String>,
    /// Constant added to the control input
    #[arg(long, default_value_t = 0.0)]
    pub gravity_ff: f64,
    /// ScenarioSpec JSON document (replaces the flags above)
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the PI-Lead tuning campaign and write a report
    Tune {
        #[command(flatten)]
        plant: PlantArgs,
        /// TuneConfig JSON document
        #[arg(long, value_name = "FILE")]
        config: Option<String>,
        /// Also identify the ultimate gain and design the ZN PID baseline
        #[arg(long)]
        zn: bool,
        #[arg(short, long, default_value = "out")]
        out: String,
        /// Do not write per-experiment trace files
        #[arg(long)]
        no_traces: bool,
    },
    /// Simulate one closed-loop experiment and write its trace
    Simulate {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        ctl: ControllerArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Trace CSV output (stdout when absent)
        #[arg(short, long)]
        out: Option<String>,
    },
    /// Recompute step metrics and the oscillation verdict from a trace
    Analyze {
        trace: String,
        /// Step reference (defaults to the last sample of r)
        #[arg(long)]
        x_ref: Option<f64>,
        /// Fraction of the record skipped before oscillation detection
        #[arg(long, default_value_t = 0.3)]
        skip: f64,
        /// Disturbance release time for the recovery measurement
        #[arg(long)]
        release: Option<f64>,
    },
    /// Compare controllers on one plant across reference steps
    Compare {
        #[command(flatten)]
        plant: PlantArgs,
        /// `[label=]pi:Kp,Ti | pilead:Kp,Ti[,alpha,tau] | zn:Ku,Tu[,fc,order] | file:path`
        #[arg(long = "ctl", required = true, value_name = "SPEC")]
        ctl: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.015")]
        refs: Vec<f64>,
        #[arg(long, default_value_t = 4.0)]
        t_end: f64,
        /// Skip the disturbance-recovery runs
        #[arg(long)]
        no_pulse: bool,
        /// Directory for metrics.csv and step plots
        #[arg(short, long)]
        out: Option<String>,
    },
    /// Serve a plant over TCP, one session at a time
    Serve {
        #[command(flatten)]
        plant: PlantArgs,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Exit after this many sessions
        #[arg(long)]
        sessions: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.cmd {
        Command::Tune {
            plant,
            config,
            zn,
            out,
            no_traces,
        } => commands::tune(&plant, config.as_deref(), zn, &out, !no_traces),
        Command::Simulate {
            plant,
            ctl,
            scenario,
            out,
        } => commands::simulate(&plant, &ctl, &scenario, out.as_deref()),
        Command::Analyze {
            trace,
            x_ref,
            skip,
            release,
        } => commands::analyze(&trace, x_ref, skip, release),
        Command::Compare {
            plant,
            ctl,
            refs,
            t_end,
            no_pulse,
            out,
        } => commands::compare(&plant, &ctl, &refs, t_end, !no_pulse, out.as_deref()),
        Command::Serve {
            plant,
            port,
            bind,
            sessions,
        } => commands::serve(&plant, &bind, port, sessions),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
