//! steersim: derive, check, and run classical steering and teleportation
//! protocols from JSON descriptions of states and ensembles.
//!
//! Exit codes are a stable contract: 0 success, 1 input error, 2 constraint
//! violation, 3 verification failure. Every command is deterministic given
//! its inputs and seed; re-running produces identical output bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use steersim_core::{
    analyze, analyze_teleport, demo_instance, derive_plan, empirical, execute, random_instance,
    run_teleport, verify_no_communication, ClassicalState, CorrelatedState, Ensemble, OutcomeSpace,
    RandomSource, Rational, SealedCoin, SteeringError, SteeringPlan,
};

const EXIT_INPUT: u8 = 1;
const EXIT_CONSTRAINT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "steersim", version)]
#[command(about = "Exact simulator for classical steering and classical teleportation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the per-outcome coins that steer a shared state to a target ensemble
    SteerPlan {
        /// JSON file with Bob's marginal; the resource is its fully correlated extension
        #[arg(long)]
        state: PathBuf,

        /// JSON file with the target ensemble
        #[arg(long)]
        ensemble: PathBuf,

        /// Output format
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },

    /// Check that a plan reproduces its target exactly
    SteerVerify {
        /// JSON file with a previously derived (possibly hand-edited) plan
        #[arg(long)]
        plan: Option<PathBuf>,

        /// Derive the plan first from this state file (requires --ensemble)
        #[arg(long)]
        state: Option<PathBuf>,

        /// Target ensemble file to pair with --state
        #[arg(long)]
        ensemble: Option<PathBuf>,

        /// Output format
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },

    /// Sample repeated runs of the steering protocol and report frequencies
    SteerRun {
        /// JSON file with the plan to run
        #[arg(long)]
        plan: Option<PathBuf>,

        /// Derive the plan first from this state file (requires --ensemble)
        #[arg(long)]
        state: Option<PathBuf>,

        /// Target ensemble file to pair with --state
        #[arg(long)]
        ensemble: Option<PathBuf>,

        /// Master seed; run k uses the source derived for (seed, k)
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Number of protocol runs
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,

        /// Output format
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },

    /// Teleport samples of a coin through a shared uniform dit plus one message
    Teleport {
        /// JSON file with the coin to teleport
        #[arg(long, conflicts_with = "dits")]
        state: Option<PathBuf>,

        /// Use a uniform die with this many sides instead of a state file
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        dits: Option<u64>,

        /// Master seed; run k uses the source derived for (seed, k)
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Number of protocol runs
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,

        /// Output format
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },

    /// Walk through the built-in worked example end to end
    AppendixDemo {
        /// Master seed for the empirical check
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Number of sampled runs in the empirical check
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,

        /// Output format
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },

    /// Derive and verify plans for randomly generated instances
    Fuzz {
        /// Master seed for the instance generator
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Number of random instances
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,

        /// Output format
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn constraint(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONSTRAINT,
            message: message.into(),
        }
    }

    fn verify(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VERIFY,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::SteerPlan {
            state,
            ensemble,
            format,
        } => cmd_steer_plan(&state, &ensemble, format),
        Command::SteerVerify {
            plan,
            state,
            ensemble,
            format,
        } => cmd_steer_verify(
            plan.as_deref(),
            state.as_deref(),
            ensemble.as_deref(),
            format,
        ),
        Command::SteerRun {
            plan,
            state,
            ensemble,
            seed,
            trials,
            format,
        } => {
            let plan = load_plan_choice(plan.as_deref(), state.as_deref(), ensemble.as_deref())?;
            cmd_steer_run(&plan, seed, trials, format)
        }
        Command::Teleport {
            state,
            dits,
            seed,
            trials,
            format,
        } => {
            let coin = match (state, dits) {
                (Some(path), None) => load_json::<ClassicalState>(&path, "state")?,
                (None, Some(d)) => ClassicalState::uniform(OutcomeSpace::dits(d)),
                _ => {
                    return Err(Failure::input(
                        "pass exactly one of --state FILE or --dits D",
                    ))
                }
            };
            cmd_teleport(&coin, seed, trials, format)
        }
        Command::AppendixDemo {
            seed,
            trials,
            format,
        } => cmd_demo(seed, trials, format),
        Command::Fuzz {
            seed,
            trials,
            format,
        } => cmd_fuzz(seed, trials, format),
    }
}

// ============================================================================
// Input loading and shared error mapping
// ============================================================================

fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("malformed {what} in {}: {e}", path.display())))
}

fn derive_from_files(state_path: &Path, ensemble_path: &Path) -> Result<SteeringPlan, Failure> {
    let state: ClassicalState = load_json(state_path, "state")?;
    let ensemble: Ensemble = load_json(ensemble_path, "ensemble")?;
    let resource = CorrelatedState::fully_correlated(&state);
    derive_plan(resource, ensemble).map_err(steering_constraint)
}

fn steering_constraint(err: SteeringError) -> Failure {
    match err {
        SteeringError::EnsembleMismatch { marginal, mix } => {
            Failure::constraint(render_mismatch(&marginal, &mix))
        }
        other => Failure::constraint(other.to_string()),
    }
}

fn render_mismatch(marginal: &ClassicalState, mix: &ClassicalState) -> String {
    let mut out = String::from("the target ensemble does not mix back to the shared state:\n");
    if marginal.space() == mix.space() {
        for (i, label) in marginal.space().labels().iter().enumerate() {
            let lhs = marginal.prob(i);
            let rhs = mix.prob(i);
            let mark = if lhs == rhs { " " } else { "!" };
            let _ = writeln!(
                out,
                "{mark} outcome {label}: shared {lhs}, mix(target) {rhs}"
            );
        }
    } else {
        let _ = writeln!(
            out,
            "! outcome spaces differ: shared {:?}, target {:?}",
            marginal.space().labels(),
            mix.space().labels()
        );
    }
    out.truncate(out.trim_end().len());
    out
}

fn load_plan_choice(
    plan: Option<&Path>,
    state: Option<&Path>,
    ensemble: Option<&Path>,
) -> Result<SteeringPlan, Failure> {
    match (plan, state, ensemble) {
        (Some(path), None, None) => load_json::<SteeringPlan>(path, "plan"),
        (None, Some(state), Some(ensemble)) => derive_from_files(state, ensemble),
        _ => Err(Failure::input(
            "pass either --plan FILE, or --state FILE together with --ensemble FILE",
        )),
    }
}

// ============================================================================
// Table rendering
// ============================================================================

fn probs_line(labels: &[String], probs: &[Rational]) -> String {
    labels
        .iter()
        .zip(probs)
        .map(|(label, p)| format!("{label}={p}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn state_line(state: &ClassicalState) -> String {
    probs_line(state.space().labels(), state.probs())
}

fn print_output(text: String) -> Result<(), Failure> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|()| stdout.flush()) {
        Ok(()) => Ok(()),
        // The reader hung up; there is nobody left to report to.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::input(format!("cannot write output: {e}"))),
    }
}

fn render_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

// ============================================================================
// steer-plan
// ============================================================================

fn cmd_steer_plan(state: &Path, ensemble: &Path, format: Format) -> Result<(), Failure> {
    let plan = derive_from_files(state, ensemble)?;
    let text = match format {
        Format::Json => render_json(&plan),
        Format::Table => render_plan_table(&plan),
    };
    print_output(text)?;
    Ok(())
}

fn render_plan_table(plan: &SteeringPlan) -> String {
    let mut out = String::new();
    let member_labels = plan.member_index_space();
    let target = plan.target();
    let weights: Vec<Rational> = target.members().iter().map(|(w, _)| w.clone()).collect();
    let _ = writeln!(
        out,
        "target weights     {}",
        probs_line(member_labels.labels(), &weights)
    );
    for (j, (_, member)) in target.members().iter().enumerate() {
        let _ = writeln!(out, "member {j}           {}", state_line(member));
    }
    let marginal = target.mix();
    let _ = writeln!(out, "shared state       {}", state_line(&marginal));
    for (i, coin) in plan.coins() {
        let label = marginal.space().label(*i);
        let _ = writeln!(
            out,
            "coin after seeing {label}  {}",
            probs_line(member_labels.labels(), coin)
        );
    }
    out.truncate(out.trim_end().len());
    out
}

// ============================================================================
// steer-verify
// ============================================================================

fn cmd_steer_verify(
    plan: Option<&Path>,
    state: Option<&Path>,
    ensemble: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let plan = load_plan_choice(plan, state, ensemble)?;
    let analysis = analyze(&plan);
    let text = match format {
        Format::Json => render_json(&analysis),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "announced distribution matches target weights   {}",
                verdict(analysis.announced_matches_weights)
            );
            let _ = writeln!(
                out,
                "conditional states match target members         {}",
                verdict(analysis.conditionals_match_members)
            );
            let member_labels = plan.member_index_space();
            let _ = writeln!(
                out,
                "announced          {}",
                probs_line(member_labels.labels(), &analysis.announced)
            );
            for (j, conditional) in analysis.conditionals.iter().enumerate() {
                match conditional {
                    Some(state) => {
                        let _ = writeln!(out, "conditional {j}      {}", state_line(state));
                    }
                    None => {
                        let _ = writeln!(out, "conditional {j}      never announced");
                    }
                }
            }
            out.truncate(out.trim_end().len());
            out
        }
    };
    print_output(text)?;
    if analysis.announced_matches_weights && analysis.conditionals_match_members {
        Ok(())
    } else {
        Err(Failure::verify("the plan does not reproduce its target"))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

// ============================================================================
// steer-run
// ============================================================================

#[derive(Serialize)]
struct SteerRunReport {
    seed: u64,
    trials: u64,
    announced_expected: ClassicalState,
    announced_empirical: ClassicalState,
    announced_total_variation: Rational,
    outcome_expected: ClassicalState,
    outcome_empirical: ClassicalState,
    outcome_total_variation: Rational,
    messages_observed: usize,
}

fn cmd_steer_run(
    plan: &SteeringPlan,
    seed: u64,
    trials: u64,
    format: Format,
) -> Result<(), Failure> {
    let announce_space = plan.member_index_space();
    let outcome_expected = plan.target().mix();

    let mut announced = Vec::with_capacity(trials as usize);
    let mut outcomes = Vec::with_capacity(trials as usize);
    let mut messages_observed = 0;
    for run in 0..trials {
        let mut rng = RandomSource::for_run(seed, run);
        let outcome = execute(plan, &mut rng).map_err(steering_constraint)?;
        messages_observed += outcome.transcript().total_messages();
        announced.push(outcome.announced_label());
        outcomes.push(outcome.bob_outcome().to_string());
    }

    let announced_expected =
        ClassicalState::new(announce_space.clone(), analyze(plan).announced)
            .map_err(|e| Failure::verify(format!("announcement probabilities are invalid: {e}")))?;
    let announced_empirical = empirical(&announced, &announce_space)
        .map_err(|e| Failure::input(format!("cannot tally announcements: {e}")))?;
    let outcome_empirical = empirical(&outcomes, outcome_expected.space())
        .map_err(|e| Failure::input(format!("cannot tally outcomes: {e}")))?;
    let report = SteerRunReport {
        seed,
        trials,
        announced_total_variation: announced_empirical
            .total_variation(&announced_expected)
            .expect("same space by construction"),
        outcome_total_variation: outcome_empirical
            .total_variation(&outcome_expected)
            .expect("same space by construction"),
        announced_expected,
        announced_empirical,
        outcome_expected,
        outcome_empirical,
        messages_observed,
    };

    let text = match format {
        Format::Json => render_json(&report),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "runs               {} (seed {})",
                report.trials, report.seed
            );
            let _ = writeln!(
                out,
                "announced expected {}",
                state_line(&report.announced_expected)
            );
            let _ = writeln!(
                out,
                "announced observed {}",
                state_line(&report.announced_empirical)
            );
            let _ = writeln!(
                out,
                "announced distance {}",
                report.announced_total_variation
            );
            let _ = writeln!(
                out,
                "outcome expected   {}",
                state_line(&report.outcome_expected)
            );
            let _ = writeln!(
                out,
                "outcome observed   {}",
                state_line(&report.outcome_empirical)
            );
            let _ = writeln!(out, "outcome distance   {}", report.outcome_total_variation);
            let _ = write!(out, "messages observed  {}", report.messages_observed);
            out
        }
    };
    print_output(text)?;
    if report.messages_observed == 0 {
        Ok(())
    } else {
        Err(Failure::verify("a steering transcript carried a message"))
    }
}

// ============================================================================
// teleport
// ============================================================================

#[derive(Serialize)]
struct TeleportRunReport {
    seed: u64,
    trials: u64,
    analysis: steersim_core::TeleportAnalysis,
    first_run: steersim_core::TeleportResult,
    empirical_outcomes: ClassicalState,
    outcome_total_variation: Rational,
    messages_sent_per_run: usize,
}

fn cmd_teleport(
    coin: &ClassicalState,
    seed: u64,
    trials: u64,
    format: Format,
) -> Result<(), Failure> {
    let analysis = analyze_teleport(coin);

    let mut outcomes = Vec::with_capacity(trials as usize);
    let mut first_run = None;
    for run in 0..trials {
        let mut rng = RandomSource::for_run(seed, run);
        let result = run_teleport(SealedCoin::seal(coin.clone()), &mut rng)
            .map_err(|e| Failure::constraint(e.to_string()))?;
        if result.messages_sent() != 1 {
            return Err(Failure::verify(format!(
                "run {run} sent {} messages instead of 1",
                result.messages_sent()
            )));
        }
        outcomes.push(result.bob_outcome().to_string());
        first_run.get_or_insert(result);
    }

    let empirical_outcomes = empirical(&outcomes, coin.space())
        .map_err(|e| Failure::input(format!("cannot tally outcomes: {e}")))?;
    let report = TeleportRunReport {
        seed,
        trials,
        outcome_total_variation: empirical_outcomes
            .total_variation(&analysis.bob_distribution)
            .expect("same space by construction"),
        analysis,
        first_run: first_run.expect("at least one trial ran"),
        empirical_outcomes,
        messages_sent_per_run: 1,
    };

    let text = match format {
        Format::Json => render_json(&report),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "coin               {}", state_line(coin));
            let _ = writeln!(
                out,
                "receiver exact     {}",
                state_line(&report.analysis.bob_distribution)
            );
            let _ = writeln!(
                out,
                "message spread     {}",
                state_line(&report.analysis.message_distribution)
            );
            for (m, conditional) in report.analysis.eve_conditionals.iter().enumerate() {
                let _ = writeln!(out, "eavesdropper | m={m}  {}", state_line(conditional));
            }
            let _ = writeln!(
                out,
                "message carries nothing about the sample  {}",
                verdict(report.analysis.message_independent_of_outcome)
            );
            let _ = writeln!(
                out,
                "resources          {} shared dit, {} sent dit",
                report.analysis.shared_dits, report.analysis.sent_dits
            );
            let _ = writeln!(
                out,
                "runs               {} (seed {})",
                report.trials, report.seed
            );
            let _ = writeln!(
                out,
                "receiver observed  {}",
                state_line(&report.empirical_outcomes)
            );
            let _ = writeln!(out, "observed distance  {}", report.outcome_total_variation);
            let _ = write!(out, "messages per run   {}", report.messages_sent_per_run);
            out
        }
    };
    print_output(text)?;
    Ok(())
}

// ============================================================================
// appendix-demo
// ============================================================================

#[derive(Serialize)]
struct DemoReport {
    seed: u64,
    trials: u64,
    shared_state: ClassicalState,
    coins: BTreeMap<String, Vec<Rational>>,
    announced: Vec<Rational>,
    announced_matches_weights: bool,
    conditionals_match_members: bool,
    transcript_silent: bool,
    empirical_announced: ClassicalState,
    announced_total_variation: Rational,
    joint_total_variation: Rational,
    all_checks_passed: bool,
}

fn cmd_demo(seed: u64, trials: u64, format: Format) -> Result<(), Failure> {
    let instance = demo_instance();
    let target = instance.target.clone();
    let shared_state = target.mix();
    let plan = derive_plan(instance.resource, instance.target).map_err(steering_constraint)?;
    let analysis = analyze(&plan);

    let announce_space = plan.member_index_space();
    let outcome_space = shared_state.space().clone();
    let mut announced = Vec::with_capacity(trials as usize);
    let mut joint_counts = vec![vec![0u64; outcome_space.len()]; announce_space.len()];
    let mut transcript_silent = true;
    for run in 0..trials {
        let mut rng = RandomSource::for_run(seed, run);
        let outcome = execute(&plan, &mut rng).map_err(steering_constraint)?;
        transcript_silent &= verify_no_communication(outcome.transcript());
        let i = outcome_space
            .index_of(outcome.bob_outcome())
            .expect("protocol outcomes stay in the resource space");
        joint_counts[outcome.announced_index()][i] += 1;
        announced.push(outcome.announced_label());
    }

    let empirical_announced = empirical(&announced, &announce_space)
        .map_err(|e| Failure::input(format!("cannot tally announcements: {e}")))?;
    let exact_announced = ClassicalState::new(announce_space.clone(), analysis.announced.clone())
        .expect("announcement probabilities form a distribution");
    let announced_total_variation = empirical_announced
        .total_variation(&exact_announced)
        .expect("same space by construction");

    let joint_rows: Vec<Vec<Rational>> = joint_counts
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| Rational::new(c as i64, trials as i64).expect("trials >= 1"))
                .collect()
        })
        .collect();
    let empirical_joint = CorrelatedState::new(announce_space.clone(), outcome_space, joint_rows)
        .expect("counts over N form a joint distribution");
    let exact_joint = plan
        .exact_joint()
        .map_err(|e| Failure::verify(format!("plan joint is not a distribution: {e}")))?;
    let joint_total_variation = empirical_joint
        .total_variation(&exact_joint)
        .expect("same spaces by construction");

    let tolerance = Rational::new(1, 100).expect("constant");
    let all_checks_passed = analysis.announced_matches_weights
        && analysis.conditionals_match_members
        && transcript_silent
        && announced_total_variation < tolerance
        && joint_total_variation < tolerance;

    let coins: BTreeMap<String, Vec<Rational>> = plan
        .coins()
        .iter()
        .map(|(i, coin)| (shared_state.space().label(*i).to_string(), coin.clone()))
        .collect();
    let report = DemoReport {
        seed,
        trials,
        shared_state,
        coins,
        announced: analysis.announced.clone(),
        announced_matches_weights: analysis.announced_matches_weights,
        conditionals_match_members: analysis.conditionals_match_members,
        transcript_silent,
        empirical_announced,
        announced_total_variation,
        joint_total_variation,
        all_checks_passed,
    };

    let text = match format {
        Format::Json => render_json(&report),
        Format::Table => render_demo_table(&plan, &target, &report),
    };
    print_output(text)?;
    if report.all_checks_passed {
        Ok(())
    } else {
        Err(Failure::verify("a worked-example check failed"))
    }
}

fn render_demo_table(plan: &SteeringPlan, target: &Ensemble, report: &DemoReport) -> String {
    let mut out = String::new();
    let space = report.shared_state.space();
    let member_labels = plan.member_index_space();

    let _ = writeln!(
        out,
        "worked example: steering a shared pair into a three-way mixture"
    );
    let _ = writeln!(out);
    let weights: Vec<Rational> = target.members().iter().map(|(w, _)| w.clone()).collect();
    let _ = writeln!(
        out,
        "target weights     {}",
        probs_line(member_labels.labels(), &weights)
    );
    for (j, (_, member)) in target.members().iter().enumerate() {
        let _ = writeln!(out, "member {j}           {}", state_line(member));
    }
    let _ = writeln!(
        out,
        "mixing them back   {}  (this is the shared state both parties hold)",
        state_line(&report.shared_state)
    );
    let _ = writeln!(out);
    for (i, coin) in plan.coins() {
        let _ = writeln!(
            out,
            "coin after seeing {}  {}",
            space.label(*i),
            probs_line(member_labels.labels(), coin)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "announced distribution  {}",
        probs_line(member_labels.labels(), &report.announced)
    );
    let _ = writeln!(
        out,
        "announcements follow the target weights     {}",
        verdict(report.announced_matches_weights)
    );
    let _ = writeln!(
        out,
        "conditional states equal the target members {}",
        verdict(report.conditionals_match_members)
    );
    let _ = writeln!(
        out,
        "no message ever crosses the channel         {}",
        verdict(report.transcript_silent)
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "sampled check      {} runs (seed {})",
        report.trials, report.seed
    );
    let _ = writeln!(
        out,
        "announced observed {}",
        state_line(&report.empirical_announced)
    );
    let _ = writeln!(
        out,
        "announced distance {}  (< 1/100: {})",
        report.announced_total_variation,
        verdict(report.announced_total_variation < Rational::new(1, 100).expect("constant"))
    );
    let _ = writeln!(
        out,
        "joint distance     {}  (< 1/100: {})",
        report.joint_total_variation,
        verdict(report.joint_total_variation < Rational::new(1, 100).expect("constant"))
    );
    let _ = write!(
        out,
        "overall            {}",
        verdict(report.all_checks_passed)
    );
    out
}

// ============================================================================
// fuzz
// ============================================================================

#[derive(Serialize)]
struct FuzzReport {
    seed: u64,
    instances: u64,
    verified: u64,
    failures: Vec<FuzzFailure>,
}

#[derive(Serialize)]
struct FuzzFailure {
    index: u64,
    reason: String,
}

fn cmd_fuzz(seed: u64, trials: u64, format: Format) -> Result<(), Failure> {
    let mut generator = RandomSource::new(seed);
    let mut failures = Vec::new();
    for index in 0..trials {
        let instance = random_instance(&mut generator, 6, 5);
        match derive_plan(instance.resource, instance.target) {
            Ok(plan) => {
                let analysis = analyze(&plan);
                if !(analysis.announced_matches_weights && analysis.conditionals_match_members) {
                    failures.push(FuzzFailure {
                        index,
                        reason: "derived plan failed verification".to_string(),
                    });
                    continue;
                }
                let mut rng = RandomSource::for_run(seed, index);
                match execute(&plan, &mut rng) {
                    Ok(outcome) if verify_no_communication(outcome.transcript()) => {}
                    Ok(_) => failures.push(FuzzFailure {
                        index,
                        reason: "steering transcript carried a message".to_string(),
                    }),
                    Err(e) => failures.push(FuzzFailure {
                        index,
                        reason: e.to_string(),
                    }),
                }
            }
            Err(e) => failures.push(FuzzFailure {
                index,
                reason: format!("derivation failed: {e}"),
            }),
        }
    }

    let report = FuzzReport {
        seed,
        instances: trials,
        verified: trials - failures.len() as u64,
        failures,
    };
    let text = match format {
        Format::Json => render_json(&report),
        Format::Table => {
            let mut out = String::new();
            let _ = write!(
                out,
                "verified {} of {} random instances (seed {})",
                report.verified, report.instances, report.seed
            );
            for failure in &report.failures {
                let _ = write!(out, "\ninstance {}: {}", failure.index, failure.reason);
            }
            out
        }
    };
    print_output(text)?;
    if report.verified == report.instances {
        Ok(())
    } else {
        Err(Failure::verify(format!(
            "{} of {} instances failed; rerun with --seed {} to reproduce",
            report.failures.len(),
            report.instances,
            report.seed
        )))
    }
}
