use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use resoflow::exec;
use resoflow::flow::{mu_anchored, mu_via_birman_schwinger, BsCountOptions};
use resoflow::lab::verify::{all_passed, Lab, Verdict};
use resoflow::lab::{admissible_angles, breit_wigner_sweep, ExperimentConfig, ResonantEnergy};
use resoflow::scattering::{assemble, write_csv, Pair, SMatrixFamily};
use resoflow::{Error, Execution, Result};

#[derive(Parser, Debug)]
#[command(
    name = "resoflow",
    version,
    about = "Spectral flow of scattering matrices near shape resonances"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// experiment configuration (TOML or JSON); the bundled model when absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// directory for result files, overriding the configured one
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// comma separated, strictly decreasing
    #[arg(long, global = true, value_delimiter = ',')]
    hbar: Option<Vec<f64>>,
    /// worker threads; RESOFLOW_THREADS when absent
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// interior eigenvalues in the energy window
    Resonances,
    /// adaptive eigenphase tables of one pair across an energy interval
    Sweep {
        #[arg(long, default_value = "H,H0")]
        pair: Pair,
        #[arg(long)]
        e_lo: Option<f64>,
        #[arg(long)]
        e_hi: Option<f64>,
    },
    /// spectral flow across one resonance
    Flow {
        /// index into the resonance list at the first hbar
        #[arg(long, default_value_t = 0)]
        eres: usize,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// counting function of (H, Hext) by eigenphases and by Birman-Schwinger kernels
    BsCount {
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long, default_value_t = PI)]
        theta: f64,
    },
    /// the full property suite
    Verify,
    /// admissible angles at resonant energies, or at --energy
    Angles {
        #[arg(long)]
        energy: Option<f64>,
    },
}

struct Session {
    lab: Lab,
    hbars: Vec<f64>,
    format: Format,
    out: Option<PathBuf>,
}

impl Session {
    fn emit(&self, stem: &str, text: &str) -> Result<()> {
        self.emit_as(stem, self.format, text)
    }

    fn emit_as(&self, stem: &str, format: Format, text: &str) -> Result<()> {
        std::io::stdout().write_all(text.as_bytes())?;
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{stem}.{}", format.extension())), text)?;
        }
        Ok(())
    }

    fn emit_rows<T: Serialize>(&self, stem: &str, rows: &[T]) -> Result<()> {
        let text = match self.format {
            Format::Json => serde_json::to_string_pretty(rows)? + "\n",
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r)?;
                }
                String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                    .expect("csv is utf-8")
            }
        };
        self.emit(stem, &text)
    }
}

#[derive(Serialize)]
struct ResonanceRow {
    hbar: f64,
    e_res: f64,
    multiplicity: u32,
    channels: String,
    isolation: f64,
}

impl From<&ResonantEnergy> for ResonanceRow {
    fn from(r: &ResonantEnergy) -> Self {
        let channels: Vec<String> = r.channels.iter().map(|l| l.to_string()).collect();
        ResonanceRow {
            hbar: r.hbar,
            e_res: r.energy,
            multiplicity: r.multiplicity,
            channels: channels.join(" "),
            isolation: r.isolation,
        }
    }
}

#[derive(Serialize)]
struct CountRow {
    hbar: f64,
    energy: f64,
    theta: f64,
    mu_eigenphases: i64,
    mu_birman_schwinger: i64,
    equal: bool,
}

#[derive(Serialize)]
struct ArcRow {
    hbar: f64,
    energy: f64,
    start: f64,
    end: f64,
    measure: f64,
}

fn run(cli: Cli) -> Result<Vec<Verdict>> {
    let base = match &cli.global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_model(),
    };
    let config = match cli.global.hbar.clone() {
        Some(h) => base.with_hbar(h)?,
        None => base,
    };
    let hbars = config.hbar.clone();
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| Some(config.output_dir.clone()));
    let s = Session {
        lab: Lab::new(config, Execution::default())?,
        hbars,
        format: cli.global.format,
        out,
    };
    let lab = &s.lab;
    let mut verdicts = Vec::new();
    match cli.command {
        Command::Resonances => {
            let mut rows = Vec::new();
            for &h in &s.hbars {
                rows.extend(lab.context(h)?.resonances.iter().map(ResonanceRow::from));
            }
            s.emit_rows("resonances", &rows)?;
        }
        Command::Sweep { pair, e_lo, e_hi } => {
            let w = &lab.config.window;
            let (lo, hi) = (e_lo.unwrap_or(w.lo()), e_hi.unwrap_or(w.hi()));
            let mut tables = Vec::new();
            for &h in &s.hbars {
                let eval = |e: f64| assemble(&lab.triple, pair, e, h, &lab.assembly());
                let fam =
                    SMatrixFamily::build(pair, lo, hi, eval, &lab.config.family(lab.execution))?;
                log::info!("hbar {h}: {} energies, depth {}", fam.grid.len(), fam.depth);
                tables.extend(fam.tables);
            }
            match s.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_csv(&tables, &mut buf)?;
                    s.emit("sweep", &String::from_utf8(buf).expect("csv is utf-8"))?;
                }
                Format::Json => {
                    s.emit("sweep", &(serde_json::to_string_pretty(&tables)? + "\n"))?
                }
            }
        }
        Command::Flow { eres, theta } => {
            let h = s.hbars[0];
            let ctx = lab.context(h)?;
            let res = ctx.resonances.get(eres).ok_or_else(|| {
                Error::Config(format!(
                    "resonance index {eres} out of range: {} in the window",
                    ctx.resonances.len()
                ))
            })?;
            let theta = match theta {
                Some(t) => t,
                None => lab.choose_theta(res.energy, h)?,
            };
            let (report, _) = breit_wigner_sweep(
                &lab.triple,
                res,
                &ctx.interior,
                theta,
                &lab.breit_wigner_options(),
            )?;
            s.emit_as(
                "flow",
                Format::Json,
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            verdicts.push(Lab::flow_verdict(
                "resonance flow equals multiplicity",
                &report,
            ));
        }
        Command::BsCount { energy, theta } => {
            let bs = BsCountOptions {
                kernels: lab.config.kernels(),
                execution: lab.execution,
                ..BsCountOptions::default()
            };
            let mut rows = Vec::new();
            for &h in &s.hbars {
                let energies = match energy {
                    Some(e) => vec![e],
                    None => lab.counting_energies(&*lab.context(h)?),
                };
                for e in energies {
                    let t = assemble(&lab.triple, Pair::HHext, e, h, &lab.assembly())?;
                    let a = mu_anchored(&t, theta);
                    let b = mu_via_birman_schwinger(&lab.triple, e, theta, h, &bs)?.count;
                    rows.push(CountRow {
                        hbar: h,
                        energy: e,
                        theta,
                        mu_eigenphases: a,
                        mu_birman_schwinger: b,
                        equal: a == b,
                    });
                }
            }
            let bad = rows.iter().filter(|r| !r.equal).count();
            verdicts.push(Verdict::new(
                "counting function equals Birman-Schwinger count",
                bad == 0,
                format!("{} of {} pairs differ", bad, rows.len()),
            ));
            s.emit_rows("bs_count", &rows)?;
        }
        Command::Verify => {
            verdicts = lab.run_suite(&s.hbars);
            for v in &verdicts {
                eprintln!("{}", v.line());
            }
            s.emit_rows("verdicts", &verdicts)?;
        }
        Command::Angles { energy } => {
            let mut rows = Vec::new();
            for &h in &s.hbars {
                let energies: Vec<f64> = match energy {
                    Some(e) => vec![e],
                    None => lab
                        .context(h)?
                        .resonances
                        .iter()
                        .map(|r| r.energy)
                        .collect(),
                };
                for e in energies {
                    let r = admissible_angles(
                        &lab.triple,
                        e,
                        h,
                        lab.config.angles.margin,
                        &lab.assembly(),
                    )?;
                    rows.extend(r.arcs.iter().map(|a| ArcRow {
                        hbar: h,
                        energy: e,
                        start: a.start,
                        end: a.end,
                        measure: r.measure,
                    }));
                }
            }
            s.emit_rows("angles", &rows)?;
        }
    }
    Ok(verdicts)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    exec::init_threads(cli.global.threads);
    match run(cli) {
        Ok(verdicts) if all_passed(&verdicts) => ExitCode::SUCCESS,
        Ok(verdicts) => {
            for v in verdicts.iter().filter(|v| !v.passed) {
                eprintln!("failed: {}", v.name);
            }
            ExitCode::from(1)
        }
        Err(e @ (Error::Config(_) | Error::Io(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
