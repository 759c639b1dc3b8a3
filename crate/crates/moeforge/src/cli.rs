//! Command-line front end: argument parsing, seeded dispatch, and JSON/CSV
//! report emission. Exit codes: 0 success, 1 strict-mode invalid certificate
//! or runtime failure, 2 usage error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bump::{build_bump, bump_json};
use crate::certifier::{
    certify, first_estimate_bound, minimal_n, scan_min_k, ExtendedCount,
};
use crate::error::{Error, Result};
use crate::freelimits::violation_gap;
use crate::matops::{haar_unitary, read_matrix_json, ChannelParams, HermitianMatrix};
use crate::montecarlo::{
    bell_experiment, empirical_t_norm, min_entropy_search, net_cover_check, NetSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "moeforge",
    about = "Certified minimum-output-entropy additivity violation for random quantum channels",
    version
)]
struct Cli {
    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp so identical runs produce identical bytes
    #[arg(long, global = true)]
    deterministic: bool,
    /// Size of the worker thread pool (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SeedArg {
    /// Master seed (falls back to MOEFORGE_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        self.seed
            .or_else(|| std::env::var("MOEFORGE_SEED").ok()?.parse().ok())
            .unwrap_or(0)
    }
}

fn parse_ratio(s: &str) -> std::result::Result<(i64, i64), String> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| format!("'{s}' is not of the form num/den"))?;
    let num: i64 = num.trim().parse().map_err(|_| format!("bad numerator '{num}'"))?;
    let den: i64 = den.trim().parse().map_err(|_| format!("bad denominator '{den}'"))?;
    if den <= 0 || num <= 0 || num >= den {
        return Err(format!("{num}/{den} is outside (0, 1)"));
    }
    Ok((num, den))
}

fn parse_count(s: &str) -> std::result::Result<ExtendedCount, String> {
    ExtendedCount::parse(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify an additivity violation at (k, t, n)
    Certify {
        #[arg(long)]
        k: u32,
        /// channel ratio d/(k n) as an exact fraction, e.g. 1/10
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        /// inner dimension, e.g. 1e53
        #[arg(long, value_parser = parse_count)]
        n: ExtendedCount,
        /// required failure-probability confidence: bound <= exp(-target)
        #[arg(long, default_value_t = 1e20)]
        target: f64,
        /// concentration radius; optimized internally when omitted
        #[arg(long)]
        eps: Option<f64>,
        /// exit with status 1 when the certificate is invalid
        #[arg(long)]
        strict: bool,
    },
    /// Smallest certifiable n for (k, t)
    MinimalN {
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[arg(long, default_value_t = 1e20)]
        target: f64,
    },
    /// Tabulate the violation gap delta over a k-range at fixed t
    Scan {
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[arg(long, default_value_t = 2)]
        k_min: u32,
        #[arg(long)]
        k_max: u32,
    },
    /// Monte Carlo compressed-norm distribution for a k x k observable
    SimulateNorm {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// JSON file with the observable; default diag(1, 0, ..., 0)
        #[arg(long)]
        observable: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Bell-state output spectrum of a sampled channel
    SimulateBell {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Multi-start minimum-output-entropy search on a sampled channel
    SimulateMoe {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Empirical coverage check of the shifted eps-net on D_k
    NetCheck {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// use the nonnegative diagnostic grid instead of the signed one
        #[arg(long)]
        unsigned: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Emit the exact rational bump polynomial and its derivative sup-norms
    Bump,
    /// Walk through the certification inequality chain for (k, t, n)
    Explain {
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = parse_ratio)]
        t: (i64, i64),
        #[arg(long, value_parser = parse_count)]
        n: ExtendedCount,
        #[arg(long, default_value_t = 1e20)]
        target: f64,
        #[arg(long)]
        eps: Option<f64>,
    },
}

fn channel_params(k: usize, n: usize, t: (i64, i64)) -> Result<ChannelParams> {
    ChannelParams::with_ratio(k, n, t.0 as f64 / t.1 as f64)
}

struct Report {
    command: &'static str,
    body: serde_json::Value,
    csv: Option<String>,
    exit: i32,
}

fn run_command(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Certify {
            k,
            t,
            n,
            target,
            eps,
            strict,
        } => {
            let cert = certify(*k, *t, n, *target, *eps)?;
            let exit = if *strict && !cert.valid {
                EXIT_FAILURE
            } else {
                EXIT_OK
            };
            Ok(Report {
                command: "certify",
                body: serde_json::to_value(&cert)?,
                csv: None,
                exit,
            })
        }
        Command::MinimalN { k, t, target } => {
            let res = minimal_n(*k, *t, *target)?;
            Ok(Report {
                command: "minimal-n",
                body: serde_json::to_value(&res)?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::Scan { t, k_min, k_max } => {
            let res = scan_min_k(t.0 as f64 / t.1 as f64, *k_min, *k_max)?;
            Ok(Report {
                command: "scan",
                body: serde_json::to_value(&res)?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::SimulateNorm {
            k,
            n,
            t,
            trials,
            observable,
            seed,
        } => {
            let params = channel_params(*k, *n, *t)?;
            let a = match observable {
                Some(path) => {
                    let m = read_matrix_json(path)?;
                    if m.dim() != *k {
                        return Err(Error::Shape(format!(
                            "observable dim {} != k = {k}",
                            m.dim()
                        )));
                    }
                    m
                }
                None => {
                    let mut diag = vec![0.0; *k];
                    diag[0] = 1.0;
                    HermitianMatrix::from_diagonal(&diag)?
                }
            };
            let rep = empirical_t_norm(&params, &a, *trials, seed.resolve())?;
            let csv = rep.to_csv();
            Ok(Report {
                command: "simulate-norm",
                body: serde_json::to_value(&rep)?,
                csv: Some(csv),
                exit: EXIT_OK,
            })
        }
        Command::SimulateBell { k, n, t, seed } => {
            let params = channel_params(*k, *n, *t)?;
            let rep = bell_experiment(&params, seed.resolve())?;
            Ok(Report {
                command: "simulate-bell",
                body: serde_json::to_value(&rep)?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::SimulateMoe {
            k,
            n,
            t,
            restarts,
            iters,
            seed,
        } => {
            let params = channel_params(*k, *n, *t)?;
            let master = seed.resolve();
            let u = haar_unitary(params.kn(), master)?;
            let rep = min_entropy_search(&params, &u, *restarts, *iters, master)?;
            Ok(Report {
                command: "simulate-moe",
                body: serde_json::to_value(&rep)?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::NetCheck {
            k,
            eps,
            samples,
            unsigned,
            seed,
        } => {
            let rep = net_cover_check(&NetSpec {
                k: *k,
                eps: *eps,
                signed: !*unsigned,
                samples: *samples,
                seed: seed.resolve(),
            })?;
            Ok(Report {
                command: "net-check",
                body: serde_json::to_value(&rep)?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::Bump => {
            let g = build_bump();
            Ok(Report {
                command: "bump",
                body: serde_json::to_value(bump_json(&g))?,
                csv: None,
                exit: EXIT_OK,
            })
        }
        Command::Explain {
            k,
            t,
            n,
            target,
            eps,
        } => {
            let cert = certify(*k, *t, n, *target, *eps)?;
            let gap = violation_gap(*k, t.0 as f64 / t.1 as f64)?;
            let estimate = first_estimate_bound(*k, n, cert.epsilon.max(1e-300).min(0.999)).ok();
            let mut lines = Vec::new();
            lines.push(format!(
                "channel: k = {k}, t = {}/{}, ln n = {:.6} (n ~ {})",
                t.0,
                t.1,
                n.ln(),
                n
            ));
            lines.push(format!(
                "free limit:  phi(1/k, t) = {:.12}  ->  S_limit = {:.12} nats",
                gap.phi1, gap.s_limit
            ));
            lines.push(format!(
                "product bound: H_min(gamma*)/1 via HW gives {:.12} / 2 = {:.12}",
                gap.hw_half * 2.0,
                gap.hw_half
            ));
            lines.push(format!(
                "violation gap: delta = S_limit - HW/2 = {:.6e}  ({})",
                gap.delta,
                if gap.delta > 0.0 { "gap open" } else { "no gap" }
            ));
            lines.push(format!("epsilon = {:.6e}", cert.epsilon));
            lines.push(format!(
                "entropy loss 3 k eps |ln eps| = {:.6e}  (must stay below delta)",
                cert.entropy_loss
            ));
            lines.push(format!(
                "n threshold: ln n_thr = {:.6}  vs  ln n = {:.6}  ({})",
                cert.n_threshold.ln(),
                n.ln(),
                if n.ln() >= cert.n_threshold.ln() {
                    "n above threshold"
                } else {
                    "n below threshold"
                }
            ));
            lines.push(format!(
                "failure probability: ln P <= {:.6e}  vs required <= -{:.3e}",
                cert.log_prob_bound, cert.target
            ));
            if let Some(est) = &estimate {
                lines.push(format!(
                    "rough estimate: ln bound = {:.6e} (vacuous: {})",
                    est.rough_bound_ln, est.rough_bound_vacuous
                ));
                lines.push(format!(
                    "refined estimate: hypothesis holds: {}, ln bound = {:.6e}",
                    est.refined_hypothesis_holds, est.refined_bound_ln
                ));
            }
            lines.push(format!(
                "verdict: {}{}",
                if cert.valid { "VALID" } else { "INVALID" },
                if cert.reasons.is_empty() {
                    String::new()
                } else {
                    format!("  [{}]", cert.reasons.join(", "))
                }
            ));
            let mut body = serde_json::to_value(&cert)?;
            body["explanation"] = json!(lines);
            Ok(Report {
                command: "explain",
                body,
                csv: Some(lines.join("\n") + "\n"),
                exit: EXIT_OK,
            })
        }
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<()> {
    let text = if cli.format == "csv" {
        match &report.csv {
            Some(csv) => csv.clone(),
            None => {
                return Err(Error::Parse(format!(
                    "command '{}' has no csv representation",
                    report.command
                )))
            }
        }
    } else {
        let mut envelope = json!({
            "command": report.command,
            "result": report.body,
        });
        if !cli.deterministic {
            let ts = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            envelope["timestamp"] = json!(ts);
        }
        serde_json::to_string_pretty(&envelope)? + "\n"
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Domain(_) | Error::Shape(_) | Error::InvalidDimension(_) => {
            EXIT_USAGE
        }
        _ => EXIT_FAILURE,
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path with code 0
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    let work = || -> Result<Report> {
        let report = run_command(&cli.command)?;
        emit(&cli, &report)?;
        Ok(report)
    };
    let outcome = match cli.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            match pool {
                Ok(pool) => pool.install(work),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            }
        }
        None => work(),
    };
    match outcome {
        Ok(report) => report.exit,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parser() {
        assert_eq!(parse_ratio("1/10").unwrap(), (1, 10));
        assert_eq!(parse_ratio(" 3 / 7 ").unwrap(), (3, 7));
        assert!(parse_ratio("0/10").is_err());
        assert!(parse_ratio("10/10").is_err());
        assert!(parse_ratio("1/-2").is_err());
        assert!(parse_ratio("0.1").is_err());
    }

    #[test]
    fn seed_resolution_prefers_flag() {
        let s = SeedArg { seed: Some(5) };
        assert_eq!(s.resolve(), 5);
    }

    #[test]
    fn usage_error_exit_code() {
        assert_eq!(run(["moeforge", "certify", "--k", "2"]), EXIT_USAGE);
        assert_eq!(run(["moeforge", "no-such-command"]), EXIT_USAGE);
    }
}
