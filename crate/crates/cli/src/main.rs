use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdfc_core::config::{RunConfig, SEED_ENV};
use sdfc_core::data::{generate_toy_corpus, preprocess_directory, Corpus};
use sdfc_core::eval::{
    ablate_density, ablate_network, ablate_partiality, curve_csv, density_csv, eval_completion,
    eval_csv, network_csv, partiality_csv,
};
use sdfc_core::geometry::io::{is_mesh_path, read_cloud, read_mesh, write_mesh};
use sdfc_core::geometry::{half_space_cut, normalize_to_unit_sphere, sample_surface, TriMesh};
use sdfc_core::train::{complete, loss_csv, TrainState};
use sdfc_core::Error;

/// Shape completion with an adversarially trained implicit generator.
#[derive(Parser)]
#[command(name = "sdfc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess the mesh directory named by `corpus.source`.
    Preprocess { config: PathBuf },
    /// Generate and preprocess the procedural corpus.
    GenCorpus { config: PathBuf },
    /// Train, or continue training, on the preprocessed corpus.
    Train {
        config: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many epochs in this invocation.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Complete a partial cloud (.xyz, .bin) or a cut of a mesh (.obj, .off).
    Complete {
        checkpoint: PathBuf,
        input: PathBuf,
        /// Retained ratio of a random half-space cut applied to the input.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 64)]
        res: usize,
        /// Surface samples drawn from a mesh input.
        #[arg(long, default_value_t = 32768)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate completions of the test split.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one of the ablation sweeps.
    Ablate {
        which: Ablation,
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    Density,
    Partiality,
    Network,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, Error> {
    let dir = cfg.corpus_dir();
    if !dir.join("index.tsv").exists() {
        return Err(Error::InvalidInput(format!(
            "no corpus at {}; run gen-corpus or preprocess first",
            dir.display()
        )));
    }
    Corpus::load(&dir)
}

fn report_corpus(corpus: &Corpus, dir: &Path) {
    println!(
        "{} shapes kept ({} train, {} test), {} discarded -> {}",
        corpus.records.len(),
        corpus.train().len(),
        corpus.test().len(),
        corpus.discarded.len(),
        dir.display()
    );
    for d in &corpus.discarded {
        println!("  discarded {}: {}", d.id, d.reason);
    }
}

fn save_progress(state: &TrainState, cfg: &RunConfig) -> Result<(), Error> {
    fs::create_dir_all(&cfg.output.dir)?;
    state.save(&cfg.checkpoint_path())?;
    write(&cfg.output.dir.join("loss.csv"), &loss_csv(&state.history))
}

fn train(config: &Path, resume: Option<&Path>, epochs: Option<usize>, seed: Option<u64>) -> Result<(), Error> {
    let cfg = load_config(config, seed)?;
    let corpus = load_corpus(&cfg)?;
    let mut state = match resume {
        Some(path) => {
            let state = TrainState::load(path)?;
            if state.setup != cfg.train_setup() {
                return Err(Error::Config(format!(
                    "{} was trained with a different network, loss, schedule or optim section",
                    path.display()
                )));
            }
            if seed.is_some() && state.seed != cfg.seed {
                return Err(Error::Config(format!(
                    "--seed {} differs from the checkpoint seed {}",
                    cfg.seed, state.seed
                )));
            }
            state
        }
        None => TrainState::new(cfg.train_setup(), cfg.seed)?,
    };
    let train = corpus.train();
    let stop = epochs.map_or(usize::MAX, |n| state.epoch.saturating_add(n));
    while !state.is_finished() && state.epoch < stop {
        match state.train_epoch(&train) {
            Ok(log) => println!("{}", log.csv_row()),
            Err(e @ Error::Diverged { .. }) => {
                let dump = cfg.output.dir.join("diverged.txt");
                write(&dump, &format!("{e}\n"))?;
                save_progress(&state, &cfg)?;
                eprintln!("diagnostics written to {}", dump.display());
                return Err(e);
            }
            Err(e) => return Err(e),
        }
        let every = cfg.output.checkpoint_every;
        if every > 0 && state.epoch % every == 0 {
            save_progress(&state, &cfg)?;
        }
    }
    save_progress(&state, &cfg)?;
    println!("epoch {} checkpoint {}", state.epoch, cfg.checkpoint_path().display());
    Ok(())
}

fn complete_cmd(
    checkpoint: &Path,
    input: &Path,
    ratio: Option<f64>,
    res: usize,
    points: usize,
    seed: Option<u64>,
    output: &Path,
) -> Result<(), Error> {
    let state = TrainState::load(checkpoint)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.or(env_seed()?).unwrap_or(0));
    let (cloud, frame) = if is_mesh_path(input) {
        let (mesh, frame) = normalize_to_unit_sphere(&read_mesh(input)?)?;
        (sample_surface(&mesh, points, &mut rng)?, Some(frame))
    } else {
        (read_cloud(input)?, None)
    };
    let partial = match ratio {
        Some(r) => half_space_cut(&cloud, r, &mut rng)?,
        None => cloud,
    };
    let mesh = complete(&state.model, &partial, res)?;
    let mesh = match frame {
        Some(f) => TriMesh {
            vertices: mesh.vertices.iter().map(|&v| f.invert(v)).collect(),
            ..mesh
        },
        None => mesh,
    };
    write_mesh(output, &mesh)?;
    println!(
        "{} input points -> {} vertices, {} faces -> {}",
        partial.len(),
        mesh.vertices.len(),
        mesh.faces.len(),
        output.display()
    );
    Ok(())
}

fn eval_cmd(checkpoint: &Path, config: &Path, seed: Option<u64>) -> Result<(), Error> {
    let cfg = load_config(config, seed)?;
    let state = TrainState::load(checkpoint)?;
    let corpus = load_corpus(&cfg)?;
    let report = eval_completion(&state.model, &corpus.test(), &cfg.eval, cfg.seed)?;
    report.check()?;
    let dir = &cfg.output.dir;
    write(&dir.join("eval.csv"), &eval_csv(&report))?;
    write(&dir.join("curve.csv"), &curve_csv(&report))?;
    let summary = report.summary();
    write(&dir.join("report.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn ablate_cmd(which: Ablation, checkpoint: &Path, config: &Path, seed: Option<u64>) -> Result<(), Error> {
    let cfg = load_config(config, seed)?;
    let state = TrainState::load(checkpoint)?;
    let corpus = load_corpus(&cfg)?;
    let test = corpus.test();
    let (name, table) = match which {
        Ablation::Density => {
            let rows = ablate_density(&state.model, &test, &cfg.eval.density_counts, &cfg.eval, cfg.seed)?;
            for r in rows.iter().filter(|r| r.clamped) {
                eprintln!("warning: {} input points requested, some inputs are smaller", r.requested);
            }
            ("density.csv", density_csv(&rows))
        }
        Ablation::Partiality => {
            let rows =
                ablate_partiality(&state.model, &test, &cfg.eval.partiality_ratios, &cfg.eval, cfg.seed)?;
            ("partiality.csv", partiality_csv(&rows))
        }
        Ablation::Network => {
            let rows = ablate_network(&corpus.train(), &test, &state.setup, &cfg.eval, cfg.seed)?;
            ("network.csv", network_csv(&rows))
        }
    };
    write(&cfg.output.dir.join(name), &table)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Preprocess { config } => {
            let cfg = load_config(&config, None)?;
            let source = cfg
                .corpus
                .source
                .clone()
                .ok_or_else(|| Error::Config("corpus.source must name a mesh directory".into()))?;
            let corpus = preprocess_directory(&source, &cfg.corpus)?;
            corpus.save(&cfg.corpus_dir())?;
            report_corpus(&corpus, &cfg.corpus_dir());
            Ok(())
        }
        Command::GenCorpus { config } => {
            let cfg = load_config(&config, None)?;
            let corpus = generate_toy_corpus(&cfg.corpus)?;
            corpus.save(&cfg.corpus_dir())?;
            report_corpus(&corpus, &cfg.corpus_dir());
            Ok(())
        }
        Command::Train {
            config,
            resume,
            epochs,
            seed,
        } => train(&config, resume.as_deref(), epochs, seed),
        Command::Complete {
            checkpoint,
            input,
            ratio,
            res,
            points,
            seed,
            output,
        } => complete_cmd(&checkpoint, &input, ratio, res, points, seed, &output),
        Command::Eval {
            checkpoint,
            config,
            seed,
        } => eval_cmd(&checkpoint, &config, seed),
        Command::Ablate {
            which,
            checkpoint,
            config,
            seed,
        } => ablate_cmd(which, &checkpoint, &config, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
