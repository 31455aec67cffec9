use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use patternforge::denoise::{denoise, DEFAULT_THRESHOLD};
use patternforge::drc::{self, RuleVariant};
use patternforge::genloop::{
    mask_from_violations, restore_known, run_pipeline, stochastic_vary, GenerationConfig,
    RepairMask, StochasticBackend, StochasticParams, VariationBackend, BACKEND_NAME,
};
use patternforge::grid::{save_pattern, split_starters, PbmFormat};
use patternforge::legalizer::{bench, bench_csv, solve, BenchConfig, SolveOptions, SolveStatus};
use patternforge::metrics::report;
use patternforge::par::Executor;
use patternforge::proto::{serve, ExecBackend};
use patternforge::selection::{select_representatives, SelectionConfig};
use patternforge::squish::{decode, encode, SquishPattern, Topology};
use patternforge::{seed, Error};

mod files;

use files::{load_grid, load_library, load_rules, read_text, write_bytes, write_text};

#[derive(Parser)]
#[command(name = "patternforge", version, about = "Layout pattern generation toolkit")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SeedArg {
    /// Root seed; falls back to PATTERNFORGE_SEED.
    #[arg(long, env = "PATTERNFORGE_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn require(&self) -> Result<u64, Error> {
        self.seed
            .ok_or_else(|| Error::Config("--seed (or PATTERNFORGE_SEED) is required".into()))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// PBM to squish JSON.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Squish JSON to PBM.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        pitch_nm: u32,
        #[arg(long, default_value = "p4")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design-rule check; exits 2 when anything is violated.
    Drc {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Rule set file or preset name.
        #[arg(long)]
        rules: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Snap a generated pattern's scan lines onto a template's.
    Denoise {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Library diversity and quality report
    Metrics {
        #[command(subcommand)]
        cmd: MetricsCmd,
    },
    /// Pick diverse representatives from a library.
    Select {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.4)]
        min_density: f64,
        #[arg(long, default_value_t = 0.9)]
        ev_threshold: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterative generate / denoise / check loop.
    Generate {
        #[arg(long)]
        starters: PathBuf,
        #[arg(long)]
        rules: String,
        #[arg(long)]
        config: PathBuf,
        /// `builtin:stochastic` or `exec:<command>`.
        #[arg(long, default_value = BACKEND_NAME)]
        backend: String,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find deltas for a squish topology.
    Legalize {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        rules: String,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long)]
        max_delta_nm: Option<u64>,
        #[command(flatten)]
        seed: SeedArg,
        /// Also write the solved pattern as squish JSON.
        #[arg(long)]
        squish_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Legalizer success rate and time against topology size.
    SolverBench {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "default,complex,complex_discrete")]
        variants: Vec<RuleVariant>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 20_000)]
        budget: u64,
        #[arg(long, default_value = "complex_discrete")]
        rules: String,
        #[command(flatten)]
        seed: SeedArg,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut evenly spread clips from a large layout.
    SplitStarters {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 512)]
        clip_width: usize,
        #[arg(long, default_value_t = 512)]
        clip_height: usize,
        #[arg(long, default_value_t = 4)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        per_row: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repair mask around violations; with --out, regenerate inside it.
    MaskFromDrc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rules: String,
        #[arg(long, default_value_t = 0.25)]
        expand: f64,
        #[arg(long, default_value_t = 0.30)]
        max_area_frac: f64,
        #[arg(long, default_value_t = 10)]
        variations: usize,
        #[arg(long, default_value_t = 0.1)]
        jitter_rate: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the built-in backend over the line protocol on stdin/stdout.
    #[command(hide = true)]
    BackendServe {
        #[arg(long)]
        rules: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        jitter_rate: f64,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Diversity and legality summary of a library.
    Report {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        rules: String,
        /// Cluster count for the silhouette score.
        #[arg(long)]
        silhouette_k: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Pretty JSON to `out` or stdout.
fn emit(value: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pbm_format(name: &str) -> Result<PbmFormat, Error> {
    match name.to_ascii_lowercase().as_str() {
        "p1" => Ok(PbmFormat::P1),
        "p4" => Ok(PbmFormat::P4),
        _ => Err(Error::Config(format!("unknown PBM format `{name}`"))),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let exec = Executor::new(cli.jobs);
    match cli.cmd {
        Cmd::Encode { input, out } => {
            let sq = encode(&load_grid(&input)?);
            emit(&serde_json::to_value(&sq)?, out.as_deref())?;
        }
        Cmd::Decode { input, pitch_nm, format, out } => {
            let sq: SquishPattern = serde_json::from_str(&read_text(&input)?)?;
            let g = decode(&sq, pitch_nm)?;
            write_bytes(&out, &save_pattern(&g, pbm_format(&format)?))?;
        }
        Cmd::Drc { input, rules, out } => {
            let rules = load_rules(&rules)?;
            let grids = input.iter().map(|p| load_grid(p)).collect::<Result<Vec<_>, _>>()?;
            let results = drc::check_batch(&grids, &rules, &exec)?;
            let dirty = results.iter().any(|v| !v.is_empty());
            let value = if input.len() == 1 {
                json!({ "input": input[0], "violations": results[0] })
            } else {
                Value::Array(
                    input
                        .iter()
                        .zip(&results)
                        .map(|(p, v)| json!({ "input": p, "violations": v }))
                        .collect(),
                )
            };
            emit(&value, out.as_deref())?;
            return Ok(if dirty { 2 } else { 0 });
        }
        Cmd::Denoise { template, input, threshold, seed, out } => {
            let d = denoise(&load_grid(&input)?, &load_grid(&template)?, threshold, seed.require()?)?;
            write_bytes(&out, &save_pattern(&d, PbmFormat::P4))?;
        }
        Cmd::Metrics { cmd: MetricsCmd::Report { library, rules, silhouette_k, seed, out } } => {
            let lib = load_library(&library)?;
            let rules = load_rules(&rules)?;
            let sil = match silhouette_k {
                Some(k) => Some((k, seed.require()?)),
                None => None,
            };
            emit(&serde_json::to_value(report(&lib.library, &rules, sil)?)?, out.as_deref())?;
        }
        Cmd::Select { library, k, min_density, ev_threshold, seed, out } => {
            let lib = load_library(&library)?;
            let cfg = SelectionConfig {
                k,
                ev_threshold,
                min_density,
                seed: seed.require()?,
            };
            let ids = select_representatives(&lib.library, &cfg, &exec)?;
            let files: Vec<&str> = ids.iter().map(|&i| lib.names[i].as_str()).collect();
            emit(&json!({ "ids": ids, "files": files }), out.as_deref())?;
        }
        Cmd::Generate { starters, rules, config, backend, seed, out } => {
            let rules = load_rules(&rules)?;
            let mut cfg: GenerationConfig = files::parse_config(&read_text(&config)?)?;
            if let Some(s) = seed.seed {
                cfg.seed = s;
            }
            if cfg.stochastic.rules_hint.is_none() {
                cfg.stochastic.rules_hint = Some(rules.clone());
            }
            let backend: Box<dyn VariationBackend> = match backend.as_str() {
                BACKEND_NAME => Box::new(StochasticBackend::new(cfg.stochastic.clone())),
                other => match other.strip_prefix("exec:") {
                    Some(cmd) => Box::new(ExecBackend::new(cmd)?),
                    None => return Err(Error::Config(format!("unknown backend `{other}`"))),
                },
            };
            let starters = load_library(&starters)?;
            let grids: Vec<_> = starters.library.grids().cloned().collect();
            let output = run_pipeline(&grids, &rules, &cfg, backend.as_ref(), &exec)?;
            files::write_library_dir(&out, &output)?;
            let last = output.series.last().expect("at least one round");
            eprintln!(
                "{} patterns ({} starters), H1 {:.3} H2 {:.3}",
                last.library.unique, output.starters.unique, last.library.h1, last.library.h2
            );
        }
        Cmd::Legalize { topology, rules, budget, max_delta_nm, seed, squish_out, out } => {
            let rules = load_rules(&rules)?;
            let v: Value = serde_json::from_str(&read_text(&topology)?)?;
            let nested: Vec<Vec<u8>> = serde_json::from_value(
                v.get("topology")
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput("missing `topology` key".into()))?,
            )?;
            let t = Topology::from_nested(&nested)?;
            let opts = SolveOptions {
                max_delta_nm,
                ..SolveOptions::new(budget, seed.require()?)
            };
            let outcome = solve(&t, &rules, &opts)?;
            if let (Some(path), Some(d)) = (&squish_out, &outcome.deltas) {
                let sq = SquishPattern::new(t, d.delta_x.clone(), d.delta_y.clone())?;
                write_text(path, &(serde_json::to_string_pretty(&sq)? + "\n"))?;
            }
            emit(&serde_json::to_value(&outcome)?, out.as_deref())?;
            return Ok(match outcome.status {
                SolveStatus::Solved => 0,
                SolveStatus::Infeasible => 2,
                SolveStatus::BudgetExhausted => 4,
            });
        }
        Cmd::SolverBench { sizes, variants, samples, budget, rules, seed, out } => {
            let cfg = BenchConfig {
                sizes,
                variants,
                samples,
                budget,
                seed: seed.require()?,
                rules: load_rules(&rules)?,
            };
            let csv = bench_csv(&bench(&cfg, &exec)?);
            match out {
                Some(p) => write_text(&p, &csv)?,
                None => print!("{csv}"),
            }
        }
        Cmd::SplitStarters { input, clip_width, clip_height, rows, per_row, out } => {
            let clips = split_starters(&load_grid(&input)?, clip_width, clip_height, rows, per_row)?;
            let mut listing = Vec::new();
            for (i, (rect, g)) in clips.iter().enumerate() {
                let name = format!("starter_{i:03}.pbm");
                write_bytes(&out.join(&name), &save_pattern(g, PbmFormat::P4))?;
                listing.push(json!({ "file": name, "rect": rect }));
            }
            emit(&Value::Array(listing), None)?;
        }
        Cmd::MaskFromDrc { input, rules, expand, max_area_frac, variations, jitter_rate, seed, out } => {
            let rules = load_rules(&rules)?;
            let g = load_grid(&input)?;
            let violations = drc::check(&g, &rules)?;
            if violations.is_empty() {
                emit(&json!({ "outcome": "clean" }), None)?;
                return Ok(0);
            }
            let repair = mask_from_violations(&violations, expand, max_area_frac, g.width(), g.height())?;
            let mut value = serde_json::to_value(&repair)?;
            if let (RepairMask::Mask(mask), Some(dir)) = (&repair, &out) {
                let root = seed.require()?;
                let params = StochasticParams {
                    jitter_rate,
                    rules_hint: Some(rules.clone()),
                    ..Default::default()
                };
                let mut written = Vec::new();
                for (i, v) in stochastic_vary(&g, mask, variations, root, &params)?.iter().enumerate() {
                    let d = restore_known(&g, mask, denoise(v, &g, DEFAULT_THRESHOLD, seed::derive_seed(root, &[i as u64]))?);
                    if drc::is_legal(&d, &rules)? {
                        let name = format!("repair_{i:03}.pbm");
                        write_bytes(&dir.join(&name), &save_pattern(&d, PbmFormat::P4))?;
                        written.push(name);
                    }
                }
                value["repaired"] = json!(written);
            }
            emit(&value, None)?;
        }
        Cmd::BackendServe { rules, jitter_rate } => {
            let params = StochasticParams {
                jitter_rate,
                rules_hint: rules.as_deref().map(load_rules).transpose()?,
                ..Default::default()
            };
            let backend = StochasticBackend::new(params);
            let stdin = std::io::stdin();
            serve(stdin.lock(), std::io::stdout().lock(), &backend)?;
        }
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Backend(_) | Error::Protocol { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
