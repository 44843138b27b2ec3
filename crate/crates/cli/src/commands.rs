use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rehab_core::control::{
    simulate_tracking, tune_gains, MotorPlant, PidGains, TrackingKind, TrackingReference, TrackingResult,
};
use rehab_core::geometry::{
    forward_kinematics, inverse_kinematics, resolve_constraints, workspace_check, LegLengths, Pose,
};
use rehab_core::posturography::{
    detect_reaction, read_frames, summarize, synthesize_loads, write_events, write_frames, FootLayout, PostureCase,
};
use rehab_core::simulation::{
    rms_report, run_closed_loop, LoopMode, ReferenceKind, ReferenceTrajectory, SimulationTrace, ACCURACY_METRIC,
    PUBLISHED_MIN_ACCURACY,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_json, ScenarioConfig};
use crate::error::CliError;
use crate::{
    Cli, Command, ControlCommand, ControlSimArgs, ControlTuneArgs, FkArgs, IkArgs, PostureAnalyzeArgs,
    PostureCommand, PostureSynthArgs, RefKind, SimulateArgs, TrackKind,
};

/// Smallest lower-cell total treated as a loaded frame [N].
const MIN_LOADED_N: f64 = 1.0;

struct Context {
    config: ScenarioConfig,
    seed: u64,
    out_dir: PathBuf,
    pool: rayon::ThreadPool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config: ScenarioConfig = match &cli.config {
        Some(path) => load_json(path)?,
        None => ScenarioConfig::default(),
    };
    config.geometry.validate()?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out_dir = cli.out_dir.clone().or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = Context { config, seed, out_dir, pool };

    match cli.command {
        Command::Ik(a) => ik(&ctx, &a),
        Command::Fk(a) => fk(&ctx, &a),
        Command::Simulate(a) => simulate(&ctx, &a),
        Command::Control(ControlCommand::Sim(a)) => control_sim(&ctx, &a),
        Command::Control(ControlCommand::Tune(a)) => control_tune(&ctx, &a),
        Command::Posture(PostureCommand::Synth(a)) => posture_synth(&ctx, &a),
        Command::Posture(PostureCommand::Analyze(a)) => posture_analyze(&ctx, &a),
    }
}

fn output_path(ctx: &Context, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
    Ok(ctx.out_dir.join(name))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn print_pose(pose: &Pose, lengths: &LegLengths) {
    // adding zero clears negative zeros before printing
    let pose = Pose {
        x: pose.x + 0.0,
        y: pose.y + 0.0,
        alpha: pose.alpha + 0.0,
        beta: pose.beta + 0.0,
        gamma: pose.gamma + 0.0,
        ..*pose
    };
    println!(
        "alpha {:.9} deg  beta {:.9} deg  gamma {:.9} deg",
        pose.alpha.to_degrees(),
        pose.beta.to_degrees(),
        pose.gamma.to_degrees()
    );
    println!("x {:.9} m  y {:.9} m  z {:.9} m", pose.x, pose.y, pose.z);
    let [l1, l2, l3] = lengths.0;
    println!("l1 {l1:.9} m  l2 {l2:.9} m  l3 {l3:.9} m");
}

fn ik(ctx: &Context, a: &IkArgs) -> Result<(), CliError> {
    let geom = &ctx.config.geometry;
    let z = a.z.unwrap_or_else(|| geom.home_height());
    let pose = resolve_constraints(a.alpha, a.beta, z, geom)?;
    let lengths = inverse_kinematics(&pose, geom)?;
    if a.json {
        let out = json!({ "pose": pose, "lengths_m": lengths.0, "workspace": workspace_check(&pose, geom) });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        print_pose(&pose, &lengths);
    }
    Ok(())
}

fn fk(ctx: &Context, a: &FkArgs) -> Result<(), CliError> {
    let geom = &ctx.config.geometry;
    let lengths = LegLengths(a.lengths);
    lengths.check_stroke(geom)?;
    let alpha = a.alpha_guess.unwrap_or(0.0);
    let guess = Pose { alpha, gamma: -alpha, ..geom.home_pose() };
    let pose = forward_kinematics(&lengths, geom, &guess)?;
    if a.json {
        let out = json!({ "pose": pose, "lengths_m": lengths.0, "workspace": workspace_check(&pose, geom) });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        print_pose(&pose, &lengths);
    }
    Ok(())
}

fn default_reference() -> ReferenceTrajectory {
    ReferenceTrajectory::sine([0.5, 6f64.to_radians(), 0.02], [0.0, 8f64.to_radians(), 0.0], 0.5, 10.0)
}

#[derive(Serialize)]
struct ScenarioSummary {
    mass_scale: Option<f64>,
    csv: String,
    samples: usize,
    channels: Option<Vec<rehab_core::simulation::ChannelReport>>,
    min_accuracy_percent: Option<f64>,
    max_abs_error: [f64; 3],
    max_task_error: f64,
    error: Option<String>,
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<(), CliError> {
    let model = ctx.config.model();
    let mut spec = ctx.config.reference.unwrap_or_else(default_reference);
    if let Some(kind) = a.reference {
        spec.kind = match kind {
            RefKind::Sine => ReferenceKind::Sine,
            RefKind::Step => ReferenceKind::Step,
            RefKind::Composite => ReferenceKind::Composite,
        };
    }
    if let Some(d) = a.duration {
        spec.duration = d;
    }
    let mut base = ctx.config.loop_config;
    if let Some(dt) = a.dt {
        base.dt = dt;
    }
    let scenarios: Vec<(Option<f64>, LoopMode, String)> = match &a.mass_scale {
        None => vec![(None, base.mode, "trace.csv".into())],
        Some(ks) if ks.len() == 1 => vec![(Some(ks[0]), LoopMode::Mismatch { mass_scale: ks[0] }, "trace.csv".into())],
        Some(ks) => ks
            .iter()
            .map(|&k| (Some(k), LoopMode::Mismatch { mass_scale: k }, format!("trace_mass{k}.csv")))
            .collect(),
    };

    let results: Vec<(SimulationTrace, Option<CliError>)> = ctx.pool.install(|| {
        scenarios
            .par_iter()
            .map(|(_, mode, _)| {
                let cfg = rehab_core::simulation::LoopConfig { mode: *mode, ..base };
                match run_closed_loop(&spec, &model, &cfg) {
                    Ok(t) => (t, None),
                    Err(abort) => (abort.trace, Some(abort.error.into())),
                }
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut first_error = None;
    for ((k, _, name), (trace, err)) in scenarios.iter().zip(results) {
        trace.write_csv(create(&output_path(ctx, name)?)?)?;
        let report = rms_report(&trace).ok();
        println!(
            "{name}: {} samples, min accuracy {}",
            trace.samples.len(),
            report
                .as_ref()
                .and_then(|r| r.min_accuracy_percent)
                .map(|v| format!("{v:.4}%"))
                .unwrap_or_else(|| "n/a".into())
        );
        summaries.push(ScenarioSummary {
            mass_scale: *k,
            csv: name.clone(),
            samples: trace.samples.len(),
            min_accuracy_percent: report.as_ref().and_then(|r| r.min_accuracy_percent),
            channels: report.map(|r| r.channels),
            max_abs_error: trace.max_abs_error(),
            max_task_error: trace.max_task_error(),
            error: err.as_ref().map(|e| e.to_string()),
        });
        if first_error.is_none() {
            first_error = err;
        }
    }
    let summary = json!({
        "reference": spec,
        "loop": base,
        "metric": ACCURACY_METRIC,
        "published_min_accuracy_percent": PUBLISHED_MIN_ACCURACY,
        "scenarios": summaries,
    });
    write_json(&output_path(ctx, "simulate_summary.json")?, &summary)?;
    first_error.map_or(Ok(()), Err)
}

fn plant(ctx: &Context, path: &Option<PathBuf>) -> Result<MotorPlant, CliError> {
    let p = match path {
        Some(path) => load_json(path)?,
        None => ctx.config.control.plant,
    };
    p.validate()?;
    Ok(p)
}

fn tracking_reference(ctx: &Context, kind: TrackKind) -> TrackingReference {
    let kind = match kind {
        TrackKind::Step => TrackingKind::Step,
        TrackKind::Sine => TrackingKind::Sine,
    };
    let base = ctx.config.control.reference.unwrap_or_else(TrackingReference::step);
    TrackingReference { kind, ..base }
}

fn kind_name(kind: TrackKind) -> &'static str {
    match kind {
        TrackKind::Step => "step",
        TrackKind::Sine => "sine",
    }
}

fn min_accuracy(r: &TrackingResult) -> Option<f64> {
    r.accuracy_percent.iter().try_fold(f64::INFINITY, |m, a| a.map(|a| m.min(a)))
}

fn print_tracking(name: &str, r: &TrackingResult) {
    let acc: Vec<String> = r
        .accuracy_percent
        .iter()
        .map(|a| a.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "n/a".into()))
        .collect();
    println!("{name}: motor accuracy {} (published {:?})", acc.join(" "), r.published_accuracy_percent);
}

fn control_sim(ctx: &Context, a: &ControlSimArgs) -> Result<(), CliError> {
    let plant = plant(ctx, &a.plant)?;
    let gains = match &a.gains {
        Some(g) if g.len() == 3 => PidGains { kp: g[0], ki: g[1], kd: g[2], ..ctx.config.control.gains.unwrap_or_default() },
        Some(g) => return Err(CliError::Usage(format!("--gains needs kp,ki,kd, got {} values", g.len()))),
        None => ctx.config.control.gains.unwrap_or_default(),
    };
    let mut reference = tracking_reference(ctx, a.reference);
    if let Some(d) = a.duration {
        reference.duration = d;
    }
    let tracking = rehab_core::control::TrackingConfig { seed: ctx.seed, ..ctx.config.control.tracking };
    let result = simulate_tracking(&[gains; 3], &[plant; 3], &reference, &tracking)?;
    result.write_csv(create(&output_path(ctx, "control_trace.csv")?)?)?;
    print_tracking(kind_name(a.reference), &result);
    let max_integral: Vec<f64> = result.motors.iter().map(|m| m.max_integral_term).collect();
    let summary = json!({
        "reference": reference,
        "gains": gains,
        "plant": plant,
        "tracking": tracking,
        "metric": ACCURACY_METRIC,
        "accuracy_percent": result.accuracy_percent,
        "min_accuracy_percent": min_accuracy(&result),
        "published_accuracy_percent": result.published_accuracy_percent,
        "max_integral_term_N": max_integral,
    });
    write_json(&output_path(ctx, "control_summary.json")?, &summary)
}

fn control_tune(ctx: &Context, a: &ControlTuneArgs) -> Result<(), CliError> {
    let plant = plant(ctx, &a.plant)?;
    let mut search = ctx.config.control.search;
    if let Some(b) = a.budget {
        search.budget = b;
    }
    let tracking = rehab_core::control::TrackingConfig { seed: ctx.seed, ..ctx.config.control.tracking };
    let runs: Vec<Result<_, CliError>> = ctx.pool.install(|| {
        a.reference
            .par_iter()
            .map(|&kind| {
                let reference = tracking_reference(ctx, kind);
                let tuned = tune_gains(&plant, &reference, &search, &tracking)?;
                let result = simulate_tracking(&[tuned.gains; 3], &[plant; 3], &reference, &tracking)?;
                Ok((kind, reference, tuned, result))
            })
            .collect()
    });
    let mut entries = Vec::new();
    for run in runs {
        let (kind, reference, tuned, result) = run?;
        let name = kind_name(kind);
        result.write_csv(create(&output_path(ctx, &format!("control_trace_{name}.csv"))?)?)?;
        print_tracking(name, &result);
        entries.push(json!({
            "reference": reference,
            "gains": tuned.gains,
            "evaluations": tuned.evaluations,
            "tuning_accuracy_percent": tuned.accuracy_percent,
            "accuracy_percent": result.accuracy_percent,
            "min_accuracy_percent": min_accuracy(&result),
            "published_accuracy_percent": result.published_accuracy_percent,
        }));
    }
    let summary = json!({
        "plant": plant,
        "search": search,
        "tracking": tracking,
        "metric": ACCURACY_METRIC,
        "runs": entries,
    });
    write_json(&output_path(ctx, "tune_summary.json")?, &summary)
}

fn layout(ctx: &Context, path: &Option<PathBuf>) -> Result<FootLayout, CliError> {
    let l = match path {
        Some(path) => load_json(path)?,
        None => ctx.config.posture.layout.unwrap_or_default(),
    };
    l.validate()?;
    Ok(l)
}

fn posture_synth(ctx: &Context, a: &PostureSynthArgs) -> Result<(), CliError> {
    let cases: Vec<PostureCase> = if a.case == "all" {
        PostureCase::ALL.to_vec()
    } else {
        vec![a.case.parse().map_err(CliError::Usage)?]
    };
    let layout = layout(ctx, &None)?;
    let mut params = ctx.config.posture.synthesis;
    params.seed = ctx.seed;
    if let Some(d) = a.duration {
        params.static_duration = d;
    }
    if a.no_noise {
        params.noise = false;
    }
    let streams: Vec<Result<_, CliError>> = ctx.pool.install(|| {
        cases.par_iter().map(|&c| Ok((c, synthesize_loads(c, &params, &layout)?))).collect()
    });
    for s in streams {
        let (case, frames) = s?;
        let name = format!("frames_{case}.csv");
        write_frames(create(&output_path(ctx, &name)?)?, &frames)?;
        println!("{name}: {} frames", frames.len());
    }
    Ok(())
}

fn posture_analyze(ctx: &Context, a: &PostureAnalyzeArgs) -> Result<(), CliError> {
    let layout = layout(ctx, &a.layout)?;
    let file = File::open(&a.input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.input.display())))?;
    let frames = read_frames(std::io::BufReader::new(file))?;
    let r_low = ctx.config.posture.synthesis.r_low;
    let summary = summarize(&frames, &layout, r_low, MIN_LOADED_N)?;
    let stimuli = a.stimuli.clone().unwrap_or_else(|| ctx.config.posture.stimuli.clone());
    let policy = ctx.config.posture.threshold;
    let events = detect_reaction(&stimuli, &frames, &policy)?;
    write_events(create(&output_path(ctx, "events.csv")?)?, &events)?;

    let ranking: Vec<String> = summary.region_ranking.iter().map(|r| r.to_string()).collect();
    println!("{} frames, region ranking {}, heel share {:.4}", summary.frames, ranking.join(" "), summary.heel_share);
    for e in &events {
        match e.latency {
            Some(l) => println!("stimulus {:.3} s: latency {l:.3} s on cell {}", e.stimulus_time, e.channel.unwrap_or(0)),
            None => println!("stimulus {:.3} s: no response", e.stimulus_time),
        }
    }
    let out = json!({
        "input": a.input,
        "layout": layout,
        "r_low_m": r_low,
        "threshold": policy,
        "summary": summary,
        "events": events,
    });
    write_json(&output_path(ctx, "posture_summary.json")?, &out)
}
