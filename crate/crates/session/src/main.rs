use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use phantom_core::collision_net::{generate_dataset, grid_search, train_ccn, train_cpn, Cpn, TrainingConfig};
use phantom_core::io_streams::{
    circle_wrist, random_walk, record_trace, sine_fingers, GloveScript, InputFrame, ScriptedSource, WristScript,
};
use phantom_core::kinematics::{bundled, load_model};
use phantom_core::{Exec, KinematicModel, RigidTransform};
use phantom_session::eval::{eval, EvalOptions};
use phantom_session::replay::replay_files;
use phantom_session::serve::{Server, WS_PATH};
use phantom_session::{Scene, SceneConfig};

/// Environment variable holding the log filter (for example `debug`).
const LOG_ENV: &str = "PHANTOM_LOG";

#[derive(Parser)]
#[command(name = "phantom", version, about = "Assisted teleoperation session service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator WebSocket endpoint.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Play a trace and pedal script headlessly and write the demo file.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        pedal: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the summary JSON here (it is always printed).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write a scripted input trace.
    SynthTrace {
        #[arg(long, value_enum, default_value_t = Pattern::Circle)]
        pattern: Pattern,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 60.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep the circle's analytic tangent frame instead of holding the
        /// wrist at the robot's home end-effector orientation.
        #[arg(long)]
        tangent_frame: bool,
        /// Scene whose home orientation is held; the default scene when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the collision prediction network.
    TrainCpn(TrainArgs),
    /// Train the collision correction network against a trained predictor.
    TrainCcn {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        cpn: PathBuf,
    },
    /// Train one correction network per (alpha, beta) pair and report each.
    GridSearch {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        cpn: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0])]
        betas: Vec<f64>,
        /// Largest acceptable val MSE for a cell to be eligible.
        #[arg(long, default_value_t = 0.05)]
        mse_cap: f64,
    },
    /// Measure latency and network quality; prints a JSON report.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Circle,
    Sine,
    Walk,
}

#[derive(Args)]
struct TrainArgs {
    /// Hand model file; the bundled hand when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of sampled configurations.
    #[arg(long, default_value_t = 200_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adam learning rate.
    #[arg(long = "lr", default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    /// Weights file (training) or CSV report (grid search).
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run batch work on one thread.
    #[arg(long)]
    sequential: bool,
}

impl TrainArgs {
    fn model(&self) -> anyhow::Result<KinematicModel> {
        Ok(match &self.model {
            Some(p) => load_model(p)?,
            None => bundled::hand16(),
        })
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn config(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch,
            epochs: self.epochs,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            ..Default::default()
        }
    }
}

fn scene(config: &Option<PathBuf>) -> anyhow::Result<Scene> {
    Ok(match config {
        Some(p) => Scene::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Scene::build(SceneConfig::default())?,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    match Cli::parse().command {
        Command::Serve { config, port, host } => {
            let scene = scene(&config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let server = Server::bind(scene, &format!("{host}:{port}")).await?;
                log::info!("operator endpoint at ws://{}{WS_PATH}", server.local_addr()?);
                server.run().await
            })?;
        }
        Command::Replay {
            trace,
            pedal,
            out,
            config,
            summary,
        } => {
            let scene = scene(&config)?;
            let (_, s) = replay_files(&scene, &trace, &pedal, &out)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            if let Some(p) = summary {
                write_json(&p, &s)?;
            }
        }
        Command::SynthTrace {
            pattern,
            duration,
            rate,
            seed,
            tangent_frame,
            config,
            out,
        } => {
            let (wrist, glove): (WristScript, GloveScript) = match pattern {
                Pattern::Circle => (circle_wrist(0.1, 4.0)?, GloveScript::Hold([0.3; 27])),
                Pattern::Sine => (WristScript::Hold(RigidTransform::from_translation(0.0, 0.0, 1.0)), sine_fingers(0.8, 2.0)?),
                Pattern::Walk => random_walk(0.002)?,
            };
            let mut frames = ScriptedSource::new(wrist, glove, rate, duration, seed)?.collect_all();
            if !tangent_frame {
                let scene = scene(&config)?;
                let home = scene.setup.ee_pose(&scene.setup.initial).rotation;
                for f in &mut frames {
                    *f = InputFrame::new(f.timestamp(), RigidTransform::new(home, f.wrist.pose.translation), f.glove.angles);
                }
            }
            record_trace(&out, &frames)?;
            log::info!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::TrainCpn(args) => {
            let model = args.model()?;
            let data = generate_dataset(&model, args.n, args.seed, args.exec())?;
            let (cpn, report) = train_cpn(&model, &data, &args.config())?;
            cpn.save(&args.out)?;
            if let Some(p) = &args.report {
                report.save_csv(p)?;
            }
            if let Some(last) = report.last() {
                log::info!("final val accuracy {:.4}", last.val_metric);
            }
        }
        Command::TrainCcn { train, cpn } => {
            let model = train.model()?;
            let cpn = Cpn::load(&cpn)?;
            let data = generate_dataset(&model, train.n, train.seed, train.exec())?;
            let (ccn, report) = train_ccn(&model, &data, &cpn, &train.config(), train.exec())?;
            ccn.save(&train.out)?;
            if let Some(p) = &train.report {
                report.save_csv(p)?;
            }
            if let Some(last) = report.last() {
                log::info!("final val collision rate {:.4}", last.val_metric);
            }
        }
        Command::GridSearch {
            train,
            cpn,
            alphas,
            betas,
            mse_cap,
        } => {
            let model = train.model()?;
            let cpn = Cpn::load(&cpn)?;
            let data = generate_dataset(&model, train.n, train.seed, train.exec())?;
            let result = grid_search(&model, &alphas, &betas, &data, &cpn, &train.config(), mse_cap, train.exec())?;
            std::fs::write(&train.out, result.to_csv()).with_context(|| format!("writing {}", train.out.display()))?;
            if !result.feasible {
                log::warn!("no cell met the MSE cap of {mse_cap}");
            }
            println!("best alpha={} beta={}", result.best_alpha, result.best_beta);
        }
        Command::Eval {
            config,
            iterations,
            samples,
            seed,
            out,
        } => {
            if iterations == 0 {
                bail!("--iterations must be positive");
            }
            let scene = scene(&config)?;
            let opts = EvalOptions {
                iterations,
                samples,
                seed,
                ..Default::default()
            };
            let report = eval(&scene, &opts)?;
            eprint!("{}", report.latency.render());
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(p) = out {
                write_json(&p, &report)?;
            }
        }
    }
    Ok(())
}
