use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use highlight_core::asymptotics::{asymptotic_report, LimitCdf, LimitModel};
use highlight_core::gauss2d::{lloyd_optimize, naive_gauss2d_risk, Gauss2dGrid, PredictorPair};
use highlight_core::hardness::{
    branch_and_bound_value, brute_force_sophisticated_value, brute_force_two_means, build_reduction,
    DEFAULT_SEARCH_CAP,
};
use highlight_core::{seeded_stream, AgentType};
use highlight_harness::config::ExperimentConfig;
use highlight_harness::error::{HarnessError, Result};
use highlight_harness::report::{render_text, save, to_json};
use highlight_harness::sweep::{load_data, run_sweep};
use highlight_harness::{calibrate, SyntheticSpec};
use rand::RngExt;

#[derive(Parser)]
#[command(name = "highlight", version, about = "Feature-highlighting policy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the Gaussian prior, ridge weights and loss; print a JSON summary.
    Calibrate {
        /// CSV input; the built-in synthetic family is used when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "log_value")]
        target: String,
        /// Extra columns that are never revealed.
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        ridge_lambda: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every policy at every bandwidth and write the result table.
    Sweep {
        /// TOML experiment file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<AgentType>>,
        #[arg(long)]
        n_support: Option<usize>,
        /// `.json` for JSON, anything else for CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare limit risks with finite-d simulations.
    Asymptotics {
        #[arg(long, value_enum, default_value_t = Model::Iid)]
        model: Model,
        /// Success probability of the i.i.d. model.
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 0.15)]
        alpha: f64,
        #[arg(long, default_value_t = 2000)]
        d: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the 2-means reduction and compare optimal values.
    HardnessCheck {
        /// JSON array of points; random points are drawn when omitted.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also search every deterministic policy (small instances only).
        #[arg(long)]
        full_search: bool,
        /// Write the reduction instance as JSON.
        #[arg(long)]
        emit_instance: Option<PathBuf>,
    },
    /// Optimize the two-feature Gaussian predictors by Lloyd iteration.
    Gauss2d {
        #[arg(long, default_value_t = 5.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.02)]
        cell: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Stop once an iteration improves the objective by less than this.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// Write the reveal partition as CSV (x1, x2, revealed).
        #[arg(long)]
        raster: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Iid,
    Triangular,
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            input,
            target,
            hidden,
            alpha,
            ridge_lambda,
            output,
        } => {
            let config = ExperimentConfig {
                synthetic: input.is_none().then(SyntheticSpec::default),
                input,
                target: target.clone(),
                ..Default::default()
            };
            let data = load_data(&config)?;
            let mut never = vec![target.clone()];
            never.extend(hidden);
            let cal = calibrate(&data, &target, &never, alpha, ridge_lambda)?;
            write_out(output.as_ref(), &to_json(&cal.summary())?)
        }
        Command::Sweep {
            config,
            input,
            seed,
            ks,
            policies,
            agents,
            n_support,
            output,
        } => {
            let mut config = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(input) = input {
                config.input = Some(input);
                config.synthetic = None;
            }
            config.seed = seed.unwrap_or(config.seed);
            config.ks = ks.unwrap_or(config.ks);
            config.policies = policies.unwrap_or(config.policies);
            config.agents = agents.unwrap_or(config.agents);
            config.n_support = n_support.unwrap_or(config.n_support);
            config.output = output.or(config.output);
            let table = run_sweep(&config)?;
            print!("{}", render_text(&table));
            if let Some(path) = &config.output {
                save(&table, path)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Asymptotics {
            model,
            p,
            alpha,
            d,
            trials,
            seed,
        } => {
            let (name, cdf) = match model {
                Model::Iid => ("iid", LimitCdf::point_mass(p)),
                Model::Triangular => ("triangular", LimitCdf::triangular()),
            };
            let limit = LimitModel::new(cdf, alpha)?;
            println!("beta* = {:.6}", limit.beta_star()?);
            println!(
                "{:<10} {:>8} {:<14} {:>10} {:>10} {:>9} {:>9}",
                "procedure", "param", "agent", "limit", "simulated", "se", "revealed"
            );
            for row in asymptotic_report(name, &limit, d, trials, seed)? {
                println!(
                    "{:<10} {:>8.4} {:<14} {:>10.5} {:>10.5} {:>9.5} {:>9.1}",
                    row.procedure,
                    row.parameter,
                    row.agent.to_string(),
                    row.formula,
                    row.simulated,
                    row.std_error,
                    row.mean_revealed
                );
            }
            Ok(())
        }
        Command::HardnessCheck {
            points,
            m,
            dim,
            seed,
            full_search,
            emit_instance,
        } => {
            let points: Vec<Vec<f64>> = match points {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })?;
                    serde_json::from_str(&text)?
                }
                None => {
                    let mut rng = seeded_stream(seed, 0);
                    (0..m)
                        .map(|_| (0..dim).map(|_| (rng.random::<f64>() * 8.0).round() / 2.0).collect())
                        .collect()
                }
            };
            let two_means = brute_force_two_means(&points)?;
            let instance = build_reduction(&points, two_means.ceil() + 1.0)?;
            let structured = brute_force_sophisticated_value(&instance, 1)?;
            println!("points: {}, features: {}, states: {}", points.len(), instance.d, instance.n);
            println!("2-means cost:                 {two_means:.9}");
            println!("n x sophisticated optimum:    {:.9}", structured.total);
            println!("pooling violations:           {:?}", instance.pooling_violations(&structured.assignment));
            let mut agree = (structured.total - two_means).abs() < 1e-9;
            if full_search {
                let full = branch_and_bound_value(&instance, DEFAULT_SEARCH_CAP)?;
                println!("full search optimum (n x):    {:.9} ({} nodes)", full.total, full.explored);
                agree &= (full.total - two_means).abs() < 1e-9;
            }
            println!("{}", if agree { "values agree" } else { "VALUES DISAGREE" });
            if let Some(path) = emit_instance {
                write_out(Some(&path), &to_json(&instance)?)?;
            }
            Ok(())
        }
        Command::Gauss2d {
            half_width,
            cell,
            max_iters,
            tolerance,
            raster,
        } => {
            let grid = Gauss2dGrid::new(half_width, cell)?;
            let naive = naive_gauss2d_risk();
            let result = lloyd_optimize(&grid, PredictorPair::tilted(&grid), max_iters, tolerance)?;
            println!("naive risk (closed form):     {naive:.6}");
            println!(
                "optimized risk:               {:.6} after {} steps{}",
                result.risk,
                result.history.len() - 1,
                if result.converged { "" } else { " (not converged)" }
            );
            if let Some(path) = raster {
                let file = std::fs::File::create(&path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                let mut csv = csv::Writer::from_writer(std::io::BufWriter::new(file));
                csv.write_record(["x1", "x2", "revealed"])?;
                for c in grid.raster(&result.predictors)? {
                    csv.write_record([c.x1.to_string(), c.x2.to_string(), c.revealed.to_string()])?;
                }
                csv.flush().map_err(|source| HarnessError::Io { path, source })?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
