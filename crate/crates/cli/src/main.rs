use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ulab::attacks::{basic_mia_from_tables, miann_report_from_tables, LogitTable};
use ulab::harness::{
    ablate_beta, emit_toy_boundary, nested_forget_sets, reassignment_report, run_experiment, run_multiclass,
    ExperimentConfig, ExperimentOutput, SeedContext,
};
use ulab::nn::write_model;
use ulab::unlearn::{Method, UnlearnConfig};
use ulab::Error;

#[derive(Parser)]
#[command(name = "ulab", version, about = "Class unlearning experiments on small softmax classifiers")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run this seed only, replacing the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, replacing `outputDir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the original and retrain models and dump their test logits.
    Train,
    /// Unlearn the forget classes from the original model with one method.
    Unlearn(UnlearnArgs),
    /// Score logit dumps with the nearest-neighbour and confidence attacks.
    Attack(AttackArgs),
    /// Run every configured method for every seed and write the results table.
    Eval,
    /// Decision regions of a planar toy before and after unlearning.
    Toy,
    /// Sweep the tilt strength of the configured TRW run.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,20")]
        betas: Vec<f64>,
    },
    /// TRW on nested forget sets of growing size.
    Multiclass {
        /// Largest forget set; sets are drawn from a seeded permutation.
        #[arg(long, default_value_t = 3)]
        max: usize,
        /// Explicit sets instead, e.g. `1;1,3`.
        #[arg(long)]
        sets: Option<String>,
    },
}

#[derive(Args)]
struct UnlearnArgs {
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct AttackArgs {
    /// Test-set logits of the model under attack.
    #[arg(long)]
    target: PathBuf,
    /// Test-set logits of the retrained reference models.
    #[arg(long, required = true, num_args = 1..)]
    retrain: Vec<PathBuf>,
    #[arg(long, required = true, value_delimiter = ',')]
    forget: Vec<usize>,
    /// Training-set logits of the target; enables the confidence attack.
    #[arg(long)]
    members: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Usage(_)) => 2,
        Some(Error::Io(_) | Error::Format { .. } | Error::Json(_) | Error::Csv(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        return Err(Error::Config("--config is required for this command".into()).into());
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(Error::from)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Attack(args) => return attack(args, cli.out.as_deref()),
        Command::Unlearn(args) => return unlearn(&load_config(&cli)?, args),
        _ => {}
    }
    let cfg = load_config(&cli)?;
    let out = match &cli.command {
        Command::Train => return train(&cfg),
        Command::Toy => {
            for &seed in &cfg.seeds {
                let b = emit_toy_boundary(&cfg, seed, &cfg.output_dir.join(format!("seed-{seed}")))?;
                let agreement: Vec<String> = b.agreement.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
                println!("seed {seed}: agreement with retrain {}", agreement.join(" "));
            }
            return Ok(0);
        }
        Command::Eval => run_experiment(&cfg, cli.jobs)?,
        Command::Ablate { betas } => ablate_beta(&cfg, betas, cli.jobs)?,
        Command::Multiclass { max, sets } => {
            let sets = match sets {
                Some(text) => parse_sets(text)?,
                None => nested_forget_sets(cfg.num_classes(), *max, cfg.seeds[0])?,
            };
            run_multiclass(&cfg, &sets, cli.jobs)?
        }
        Command::Attack(_) | Command::Unlearn(_) => unreachable!(),
    };
    Ok(summarize(&out, &cfg.output_dir))
}

fn summarize(out: &ExperimentOutput, dir: &Path) -> u8 {
    for e in &out.errors {
        eprintln!("cell {} seed {} failed: {}", e.method, e.seed, e.message);
    }
    println!(
        "{} cells, {} failed; results in {}",
        out.rows.len(),
        out.errors.len(),
        dir.join("results.csv").display()
    );
    if out.all_diverged() {
        eprintln!("every cell diverged");
        return 4;
    }
    0
}

fn parse_sets(text: &str) -> anyhow::Result<Vec<BTreeSet<usize>>> {
    text.split(';')
        .map(|set| {
            set.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Config(format!("bad class {c:?} in --sets: {e}")).into())
                })
                .collect()
        })
        .collect()
}

fn train(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    for &seed in &cfg.seeds {
        let ctx = SeedContext::build(cfg, seed)?;
        let dir = cfg.output_dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        write_model(&dir.join("original.bin"), &ctx.original)?;
        LogitTable::from_split_test(&ctx.original, &ctx.split)?.write_csv_path(&dir.join("original.test.csv"))?;
        LogitTable::from_model(&ctx.original, &ctx.split.retain_train, "train-")?
            .write_csv_path(&dir.join("original.members.csv"))?;
        for (j, (m, t)) in ctx.retrain.iter().zip(ctx.retrain_tables()).enumerate() {
            write_model(&dir.join(format!("retrain-{j}.bin")), m)?;
            t.write_csv_path(&dir.join(format!("retrain-{j}.test.csv")))?;
        }
        let metrics = ctx.evaluate(&ctx.original)?;
        println!(
            "seed {seed}: original acc_r {:.2} acc_f {:.2}; {} retrain models",
            metrics.acc_r,
            metrics.acc_f,
            ctx.retrain.len()
        );
    }
    Ok(0)
}

fn unlearn(cfg: &ExperimentConfig, args: &UnlearnArgs) -> anyhow::Result<u8> {
    let method: Method = serde_json::from_value(serde_json::Value::String(args.method.clone()))
        .map_err(|_| Error::Config(format!("unknown method {:?}", args.method)))?;
    let mut ucfg = UnlearnConfig::new(method, args.epochs, args.lr);
    ucfg.beta = args.beta;
    let ucfg = cfg.method_config(&ucfg);
    ucfg.validate()?;
    let mut diverged = 0;
    for &seed in &cfg.seeds {
        let ctx = SeedContext::build(cfg, seed)?;
        let result = match ctx.unlearn(cfg, &ucfg) {
            Err(e @ Error::Divergence { .. }) => {
                eprintln!("seed {seed}: {e}");
                diverged += 1;
                continue;
            }
            other => other?,
        };
        let dir = cfg.output_dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        let label = ucfg.label();
        write_model(&dir.join(format!("{label}.bin")), &result.model)?;
        LogitTable::from_split_test(&result.model, &ctx.split)?.write_csv_path(&dir.join(format!("{label}.test.csv")))?;
        LogitTable::from_model(&result.model, &ctx.split.retain_train, "train-")?
            .write_csv_path(&dir.join(format!("{label}.members.csv")))?;
        let report = serde_json::json!({
            "sidecar": result.sidecar(&ucfg),
            "metrics": ctx.evaluate(&result.model)?,
            "reassignment": reassignment_report(&result.model, &ctx.split.forget_test()?)?,
        });
        ulab::io::write_json_atomic(&dir.join(format!("{label}.json")), &report)?;
        let m = &report["metrics"];
        println!(
            "seed {seed}: {label} acc_r {:.2} acc_f {:.2} mia {:.2} mia_nn {:.2}",
            m["accR"].as_f64().unwrap_or(f64::NAN),
            m["accF"].as_f64().unwrap_or(f64::NAN),
            m["mia"].as_f64().unwrap_or(f64::NAN),
            m["miaNN"].as_f64().unwrap_or(f64::NAN),
        );
    }
    Ok(if diverged == cfg.seeds.len() { 4 } else { 0 })
}

fn attack(args: &AttackArgs, out: Option<&Path>) -> anyhow::Result<u8> {
    let target = LogitTable::read_csv_path(&args.target)?;
    let retrain = args
        .retrain
        .iter()
        .map(|p| LogitTable::read_csv_path(p))
        .collect::<ulab::Result<Vec<_>>>()?;
    let members = args.members.as_deref().map(LogitTable::read_csv_path).transpose()?;
    let forget: BTreeSet<usize> = args.forget.iter().copied().collect();
    if forget.len() != args.forget.len() {
        bail!(Error::Config("duplicate class in --forget".into()));
    }
    let mut reports = serde_json::Map::new();
    for &f in &forget {
        let nn = miann_report_from_tables(&retrain, &target, f, &forget)?;
        let mut entry = serde_json::to_value(&nn)?;
        if let Some(members) = &members {
            let non_members = select(&target, |l| !forget.contains(&l))?;
            let forget_rows = select(&target, |l| l == f)?;
            let retained_members = select(members, |l| !forget.contains(&l))?;
            let mia = basic_mia_from_tables(&retained_members, &non_members, &forget_rows)?;
            entry["mia"] = serde_json::json!(mia.score);
        }
        println!(
            "forget {f}: nearest neighbour {} reference {:.2} target {:.2} gap {:.2}",
            nn.nearest_neighbor,
            100.0 * nn.retrain_reference_acc,
            100.0 * nn.target_acc,
            100.0 * nn.gap
        );
        reports.insert(f.to_string(), entry);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        ulab::io::write_json_atomic(&dir.join("attack.json"), &reports)?;
    }
    Ok(0)
}

fn select(table: &LogitTable, keep: impl Fn(usize) -> bool) -> ulab::Result<LogitTable> {
    let rows = table.rows_where(keep);
    let k = table.num_classes();
    let mut logits = ulab::Matrix::zeros(rows.len(), k);
    for (i, &r) in rows.iter().enumerate() {
        logits.row_mut(i).copy_from_slice(table.row(r));
    }
    LogitTable::new(
        rows.iter().map(|&r| table.sample_ids[r].clone()).collect(),
        rows.iter().map(|&r| table.labels[r]).collect(),
        logits,
    )
}
