//! Command line front end: rigidity analysis, formation simulation, Henneberg
//! construction and Jacobian self-checks over scenario JSON files.
//!
//! Exit codes are a stable contract for scripting: 0 on success, 1 on any
//! scenario or I/O error, 2 when a simulation diverges numerically.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use formation_rigidity::{
    ambiguity_metrics, check_rows_against_fd, classify, henneberg_extend, parse_scenario,
    simulate, validate_signed_henneberg, write_report, write_trajectory_csv,
    write_trajectory_svg, Dim, Framework, FrameworkSampler, HennebergReport, RankPolicy,
    RigidityKind, RowFamily, RunReport, Scenario, SimulationReport, TerminalStatus, Trajectory,
};

const EXIT_SCENARIO_ERROR: u8 = 1;
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "formation-rigidity",
    about = "Hybrid distance-angle rigidity analysis and gradient-flow formation simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario JSON files to process.
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    /// Directory for default-named outputs (created if missing). Paths given
    /// inside a scenario's `outputs` block are used as written.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Process multiple scenarios concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a framework: ranks, IRDS/IRAS verdicts, Henneberg certificate.
    Analyze(ScenarioArgs),
    /// Integrate the scenario's controller and report trajectory metrics.
    Simulate(ScenarioArgs),
    /// Apply the scenario's Henneberg script, validate, and emit the result.
    Henneberg(ScenarioArgs),
    /// Compare analytic rigidity rows against central finite differences on
    /// seeded random frameworks; prints one result per row family as JSON.
    CheckJacobian {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(args) => run_batch(args, Mode::Analyze),
        Command::Simulate(args) => run_batch(args, Mode::Simulate),
        Command::Henneberg(args) => run_batch(args, Mode::Henneberg),
        Command::CheckJacobian { seed, cases, step } => run_check_jacobian(seed, cases, step),
    };
    ExitCode::from(code)
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Analyze,
    Simulate,
    Henneberg,
}

fn run_batch(args: ScenarioArgs, mode: Mode) -> u8 {
    if let Some(dir) = &args.out_dir {
        if let Err(err) = std::fs::create_dir_all(dir) {
            eprintln!("error: creating {}: {err}", dir.display());
            return EXIT_SCENARIO_ERROR;
        }
    }
    let jobs = args.jobs.max(1);
    if jobs == 1 || args.scenarios.len() == 1 {
        return args
            .scenarios
            .iter()
            .map(|path| run_one(path, args.out_dir.as_deref(), mode))
            .max()
            .unwrap_or(0);
    }
    // Independent scenarios, independent output paths: plain scoped threads.
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in args.scenarios.chunks(args.scenarios.len().div_ceil(jobs)) {
            let out_dir = args.out_dir.clone();
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(|path| run_one(path, out_dir.as_deref(), mode))
                    .max()
                    .unwrap_or(0)
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(EXIT_SCENARIO_ERROR))
            .max()
            .unwrap_or(0)
    })
}

fn run_one(path: &Path, out_dir: Option<&Path>, mode: Mode) -> u8 {
    match try_run_one(path, out_dir, mode) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}: {err:#}", path.display());
            EXIT_SCENARIO_ERROR
        }
    }
}

fn scenario_stem(path: &Path, scenario: &Scenario) -> String {
    scenario
        .file
        .name
        .clone()
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".to_string())
        })
}

fn resolve(explicit: Option<&String>, out_dir: Option<&Path>, default_name: String) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(PathBuf::from(p)),
        None => out_dir.map(|d| d.join(default_name)),
    }
}

fn try_run_one(path: &Path, out_dir: Option<&Path>, mode: Mode) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(path)?;
    let scenario = parse_scenario(&text)?;
    let stem = scenario_stem(path, &scenario);
    let outputs = scenario.file.outputs.clone().unwrap_or_default();
    let report_path = resolve(outputs.report.as_ref(), out_dir, format!("{stem}_report.json"));

    match mode {
        Mode::Analyze => {
            let report = analysis_report(&scenario, &stem);
            emit_report(&report, report_path.as_deref())?;
            Ok(0)
        }
        Mode::Simulate => {
            let config = scenario.sim_config.clone().ok_or_else(|| {
                anyhow::anyhow!("scenario declares no simulation block")
            })?;
            let trajectory = simulate(&config)?;
            let mut report = analysis_report(&scenario, &stem);
            report.simulation = Some(simulation_report(&scenario, &trajectory));

            let csv_path = resolve(
                outputs.trajectory_csv.as_ref(),
                out_dir,
                format!("{stem}_trajectory.csv"),
            );
            if let Some(p) = &csv_path {
                write_trajectory_csv(&trajectory, scenario.framework.dim(), p)?;
                eprintln!("wrote {}", p.display());
            }
            let svg_path = resolve(outputs.svg.as_ref(), out_dir, format!("{stem}.svg"));
            if let Some(p) = &svg_path {
                for written in write_trajectory_svg(&trajectory, scenario.framework.dim(), p)? {
                    eprintln!("wrote {}", written.display());
                }
            }
            emit_report(&report, report_path.as_deref())?;
            if trajectory.terminal_status == TerminalStatus::Diverged {
                eprintln!("simulation diverged");
                return Ok(EXIT_DIVERGED);
            }
            Ok(0)
        }
        Mode::Henneberg => {
            let mut fw = scenario.framework.clone();
            for (step, placement) in &scenario.steps {
                fw = henneberg_extend(&fw, step, placement)?;
            }
            let mut report = RunReport::new(&fw, Some(stem.clone()));
            report.henneberg = Some(HennebergReport::from_certificate(
                validate_signed_henneberg(&fw),
            ));
            let policy = RankPolicy::default();
            for kind in kinds_for(fw.dim()) {
                report.classification.push(classify(&fw, kind, &policy)?);
            }
            // Emit the realized construction as a scenario for further runs.
            let extended_path = resolve(None, out_dir, format!("{stem}_extended.json"));
            if let Some(p) = &extended_path {
                std::fs::write(p, extended_scenario_json(&scenario, &fw, &stem)?)?;
                eprintln!("wrote {}", p.display());
            }
            emit_report(&report, report_path.as_deref())?;
            Ok(0)
        }
    }
}

fn kinds_for(dim: Dim) -> Vec<RigidityKind> {
    match dim {
        Dim::Two => vec![
            RigidityKind::DistanceOnly,
            RigidityKind::WeakDistanceAngle,
            RigidityKind::DistanceSign2D,
            RigidityKind::AngleSign2D,
        ],
        Dim::Three => vec![
            RigidityKind::DistanceOnly,
            RigidityKind::WeakDistanceAngle,
            RigidityKind::DistanceVolume3D,
            RigidityKind::AngleVolume3D,
        ],
    }
}

fn analysis_report(scenario: &Scenario, stem: &str) -> RunReport {
    let fw = &scenario.framework;
    let mut report = RunReport::new(fw, Some(stem.to_string()));
    let policy = RankPolicy::default();
    for kind in kinds_for(fw.dim()) {
        match classify(fw, kind, &policy) {
            Ok(r) => report.classification.push(r),
            Err(err) => eprintln!("warning: {kind:?}: {err}"),
        }
    }
    report.henneberg = Some(HennebergReport::from_certificate(
        validate_signed_henneberg(fw),
    ));
    report
}

fn simulation_report(scenario: &Scenario, trajectory: &Trajectory) -> SimulationReport {
    let config = scenario.sim_config.as_ref().expect("simulation config");
    let ambiguity = ambiguity_metrics(
        trajectory,
        &config.framework,
        &config.targets,
        config.controller,
        Some(&scenario.framework),
        1e-6,
    );
    SimulationReport {
        controller: config.controller,
        terminal_status: trajectory.terminal_status,
        steps_taken: trajectory.samples.len() - 1,
        final_time: trajectory.last().t,
        final_error_norm: trajectory.last().error_norm,
        energy_monotone: trajectory.energy_monotone(1e-9),
        tail_log_slope: trajectory.tail_log_slope(),
        ambiguity,
    }
}

fn emit_report(report: &RunReport, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            write_report(report, p)?;
            eprintln!("wrote {}", p.display());
        }
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    Ok(())
}

fn extended_scenario_json(
    scenario: &Scenario,
    fw: &Framework,
    stem: &str,
) -> anyhow::Result<String> {
    let mut file = scenario.file.clone();
    // Distinct name so downstream runs do not overwrite the base scenario's
    // outputs.
    file.name = Some(format!("{stem}_extended"));
    file.n = fw.n();
    file.positions = fw.positions();
    file.edges = fw
        .graph()
        .edges()
        .iter()
        .map(|&(i, j)| [i + 1, j + 1])
        .collect();
    file.angles = fw
        .graph()
        .angles()
        .iter()
        .map(|&(i, j, k)| [i + 1, j + 1, k + 1])
        .collect();
    file.signed_angles = fw
        .graph()
        .signed_angles()
        .iter()
        .map(|&(i, j, k)| [i + 1, j + 1, k + 1])
        .collect();
    file.signed_volumes = fw
        .graph()
        .signed_volumes()
        .iter()
        .map(|&(i, j, k, l)| [i + 1, j + 1, k + 1, l + 1])
        .collect();
    file.henneberg_steps.clear();
    // Explicit target lists no longer match the extended constraint set;
    // from_positions targets stay valid.
    if file.targets.as_ref().is_some_and(|t| !t.from_positions) {
        file.targets = None;
    }
    Ok(serde_json::to_string_pretty(&file)?)
}

fn run_check_jacobian(seed: u64, cases: usize, step: f64) -> u8 {
    let mut sampler = FrameworkSampler::new(seed);
    let mut results = serde_json::Map::new();
    for family in RowFamily::all() {
        let kind = match family {
            RowFamily::Distance => RigidityKind::DistanceOnly,
            RowFamily::Cosine => RigidityKind::WeakDistanceAngle,
            RowFamily::SignedAngle => RigidityKind::DistanceSign2D,
            RowFamily::SignedVolume => RigidityKind::DistanceVolume3D,
        };
        let mut worst: Option<formation_rigidity::JacobianCheckResult> = None;
        for _ in 0..cases {
            let fw = sampler.framework(kind);
            match check_rows_against_fd(&fw, family, step) {
                Ok(res) => {
                    let replace = worst
                        .as_ref()
                        .map(|w| res.max_rel_error > w.max_rel_error)
                        .unwrap_or(true);
                    if replace {
                        worst = Some(res);
                    }
                }
                Err(err) => {
                    eprintln!("error: {family:?}: {err}");
                    return EXIT_SCENARIO_ERROR;
                }
            }
        }
        let name = format!("{family:?}")
            .chars()
            .flat_map(|c| {
                if c.is_uppercase() {
                    vec!['_', c.to_ascii_lowercase()]
                } else {
                    vec![c]
                }
            })
            .collect::<String>()
            .trim_start_matches('_')
            .to_string();
        results.insert(
            name,
            serde_json::to_value(worst.expect("at least one case")).unwrap(),
        );
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(results)).unwrap()
    );
    0
}
