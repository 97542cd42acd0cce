use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cirsplice::chronos::{chronos_tof, BpdnOptions};
use cirsplice::harness::{draw_scenario, relative_taps, run_experiment, run_pipeline, write_outputs, ExperimentConfig};
use cirsplice::io;
use cirsplice::model::CsiKind;
use cirsplice::splicer::build_dictionary;
use cirsplice::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "cirsplice", version, about = "Multi-band CSI splicing and time-of-flight estimation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value file with the same names as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    bands: Option<usize>,
    #[arg(long, global = true)]
    subcarriers: Option<usize>,
    /// Paths per channel (and OMP sparsity).
    #[arg(long, global = true)]
    sparsity: Option<usize>,
    /// Splicing dictionary size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Baseline delay grid size.
    #[arg(long, global = true)]
    chronos_grid: Option<usize>,
    #[arg(long, global = true)]
    tau_grid: Option<usize>,
    #[arg(long, global = true)]
    theta_grid: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the pilots of one simulated scenario.
    Simulate {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Estimate the channel and time of flight from pilot files.
    Estimate {
        #[arg(long)]
        csi: PathBuf,
        #[arg(long)]
        handshake: PathBuf,
    },
    /// Baseline time of flight from handshake pilots.
    Baseline {
        #[arg(long)]
        handshake: PathBuf,
        /// Noise bound on the squared pilots.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Monte-Carlo comparison of both estimators.
    Evaluate,
}

fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::default();
    let mut out = PathBuf::from("out");
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in cfg.apply_file_text(&text)? {
            if k == "out" {
                out = PathBuf::from(v);
            }
        }
    }
    if let Some(v) = common.trials {
        cfg.trials = v;
    }
    if let Some(v) = common.snr_db {
        cfg.snr_db = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.bands {
        cfg.bands = v;
    }
    if let Some(v) = common.subcarriers {
        cfg.subcarriers = v;
    }
    if let Some(v) = common.sparsity {
        cfg.sparsity = v;
    }
    if let Some(v) = common.grid {
        cfg.grid = Some(v);
    }
    if let Some(v) = common.chronos_grid {
        cfg.chronos_grid = Some(v);
    }
    if let Some(v) = common.tau_grid {
        cfg.tau_grid = v;
    }
    if let Some(v) = common.theta_grid {
        cfg.theta_grid = v;
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    if let Some(v) = &common.out {
        out = v.clone();
    }
    cfg.validate()?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (cfg, out) = load_config(&cli.common)?;
    let plan = cfg.plan()?;
    match cli.command {
        Command::Simulate { trial } => {
            let s = draw_scenario(&cfg, &plan, trial)?;
            std::fs::create_dir_all(&out)?;
            io::write_csi(io::create(&out.join("csi.csv"))?, &s.csi, &plan)?;
            io::write_handshake(io::create(&out.join("handshake.csv"))?, &s.handshake)?;
            let taps: Vec<_> = s.cir.taps().iter().map(|t| (t.delay(), t.gain())).collect();
            io::write_cir(io::create(&out.join("cir.csv"))?, &taps)?;
            std::fs::write(
                out.join("scenario.txt"),
                format!(
                    "tof_s={:.16e}\nsquared_noise_norm={:.16e}\n",
                    s.cir.tof(),
                    s.squared_noise_norm
                ),
            )?;
            println!("true tof {:.6} ns; files in {}", s.cir.tof() * 1e9, out.display());
        }
        Command::Estimate { csi, handshake } => {
            faer::set_global_parallelism(faer::Par::Seq);
            let csi = io::read_csi(io::open(&csi)?, &plan)?;
            if csi.kind() != CsiKind::Distorted {
                log::warn!("input is marked {}, treating it as distorted pilots", csi.kind().as_str());
            }
            let hs = io::read_handshake(io::open(&handshake)?)?;
            if hs.num_bands() != plan.num_bands() {
                return Err(Error::Dimension {
                    expected: format!("{} handshake bands", plan.num_bands()),
                    actual: format!("{}", hs.num_bands()),
                });
            }
            let dict = build_dictionary(&plan, cfg.dictionary_size())?;
            let res = run_pipeline(&csi, &hs, cfg.denoise_snr(), cfg.omp_sparsity(), &plan, &dict, cfg.ambiguity_grid())?;
            std::fs::create_dir_all(&out)?;
            io::write_csi(io::create(&out.join("cleaned_csi.csv"))?, &res.cleaned.csi, &plan)?;
            io::write_relative_cir(io::create(&out.join("relative_cir.csv"))?, &res.relative)?;
            io::write_cir(io::create(&out.join("cir_estimate.csv"))?, &res.resolved.taps)?;
            log::debug!("relative taps {:?}", relative_taps(&res.relative));
            println!(
                "tof {:.6} ns ({:.4} m); theta {:.6} rad (or +pi); files in {}",
                res.resolved.tof * 1e9,
                res.resolved.tof * cirsplice::model::SPEED_OF_LIGHT,
                res.resolved.theta_canonical,
                out.display()
            );
        }
        Command::Baseline { handshake, eps } => {
            faer::set_global_parallelism(faer::Par::Seq);
            let hs = io::read_handshake(io::open(&handshake)?)?;
            let est = chronos_tof(&hs, &plan, cfg.chronos_size(), eps, cfg.significance, &BpdnOptions::default())?;
            println!(
                "tof {:.6} ns ({:.4} m); first significant index {}",
                est.tof * 1e9,
                est.tof * cirsplice::model::SPEED_OF_LIGHT,
                est.index
            );
        }
        Command::Evaluate => {
            let res = run_experiment(&cfg)?;
            write_outputs(&out, &cfg, &res)?;
            for m in [&res.proposed, &res.chronos] {
                println!(
                    "{}: p50 {} p90 {} p95 {} ({} of {} trials failed)",
                    m.name,
                    show(m.exclusive[0]),
                    show(m.exclusive[1]),
                    show(m.exclusive[2]),
                    m.failures,
                    m.trials
                );
            }
            if !res.all_usable() {
                eprintln!("a method produced no usable results");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4} m"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
