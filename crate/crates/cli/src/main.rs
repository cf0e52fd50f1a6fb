use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use zcprecode::sim::Scheme;
use zcsim::{cmd_all, cmd_ber, cmd_encode, cmd_gamma, cmd_psd, Config, Overrides};

/// Zero-crossing precoding experiments. Every flag can also be set through
/// the environment variable shown in its help, prefixed `ZCSIM_`.
#[derive(Parser, Debug)]
#[command(name = "zcsim", version, about)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, env = "ZCSIM_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "ZCSIM_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = "ZCSIM_SEED")]
    seed: Option<u64>,
    /// Comma-separated SNR points in dB for the BER campaign.
    #[arg(long, global = true, env = "ZCSIM_SNR_LIST", value_delimiter = ',', allow_negative_numbers = true)]
    snr_list: Option<Vec<f64>>,
    /// Sequences (gamma), blocks (psd) or channel trials per SNR point (ber).
    #[arg(long, global = true, env = "ZCSIM_TRIALS")]
    trials: Option<usize>,
    /// Schemes for gamma and ber: zc, fm, qpsk (comma-separated).
    #[arg(long, global = true, env = "ZCSIM_SCHEME", value_delimiter = ',')]
    scheme: Option<Vec<Scheme>>,
    /// More log output (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean optimal margin over the bandwidth grid.
    Gamma,
    /// Monte Carlo BER versus SNR.
    Ber,
    /// Transmit power spectral density.
    Psd,
    /// Run gamma, ber and psd.
    All,
    /// Print the resolved configuration as TOML.
    Config,
    /// Print the target pattern for a bit string.
    Encode {
        bits: String,
        #[arg(long, default_value_t = 2)]
        m_rx: usize,
        /// Pilot sign, 1 or -1.
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        pb: i8,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply(&Overrides { seed: cli.seed, snr_list: cli.snr_list, trials: cli.trials, schemes: cli.scheme })?;

    let manifest = match cli.command {
        Command::Encode { bits, m_rx, pb } => {
            print!("{}", cmd_encode(&bits, m_rx, pb)?);
            return Ok(());
        }
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
        Command::Gamma => cmd_gamma(&cfg, &cli.out)?,
        Command::Ber => cmd_ber(&cfg, &cli.out)?,
        Command::Psd => cmd_psd(&cfg, &cli.out)?,
        Command::All => cmd_all(&cfg, &cli.out)?,
    };
    for f in &manifest.files {
        println!("{}  {}", f.sha256, cli.out.join(&f.name).display());
    }
    Ok(())
}
