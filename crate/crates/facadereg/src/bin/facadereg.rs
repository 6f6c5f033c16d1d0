//! Command-line front end: regularize detection files, render overlays,
//! generate synthetic fixtures, run solver benchmarks, and export programs
//! in LP format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use facadereg::bip::{self, Formulation};
use facadereg::error::Error;
use facadereg::formats;
use facadereg::meanshift::mean_shift_1d;
use facadereg::pipeline::{self, Grouping, RegularizationParams};
use facadereg::solve::SolverTag;
use facadereg::svg::render_svg;
use facadereg::synth::{self, SyntheticGridSpec, BENCH_CASES};
use facadereg::types::Attribute;

const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_TIMEOUT_UNPROVEN: u8 = 4;

#[derive(Parser)]
#[command(
    name = "facadereg",
    about = "Regularize detected facade-primitive bounding boxes by exact binary integer programming",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingArg {
    PerClass,
    Merged,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Bb,
    Dp,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    Indicator,
    Chain,
}

/// Model parameters shared by the solving subcommands. Defaults are the
/// standard set: delta_l = 4, delta_u = 40, weights (100, 100, 10, 10).
#[derive(Args)]
struct ModelFlags {
    /// Clustering bandwidth in pixels (lower bound delta_l).
    #[arg(long, default_value_t = 4.0)]
    delta_l: f64,
    /// Maximum snap distance in pixels (upper bound delta_u).
    #[arg(long, default_value_t = 40.0)]
    delta_u: f64,
    /// Regularity weight for x positions.
    #[arg(long, default_value_t = 100.0)]
    wx: f64,
    /// Regularity weight for y positions.
    #[arg(long, default_value_t = 100.0)]
    wy: f64,
    /// Regularity weight for widths.
    #[arg(long, default_value_t = 10.0)]
    ww: f64,
    /// Regularity weight for heights.
    #[arg(long, default_value_t = 10.0)]
    wh: f64,
    #[arg(long, value_enum, default_value_t = GroupingArg::PerClass)]
    grouping: GroupingArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Bb)]
    solver: SolverArg,
    #[arg(long, value_enum, default_value_t = FormulationArg::Indicator)]
    formulation: FormulationArg,
    /// Solver time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Drop boxes below this confidence before regularizing.
    #[arg(long, default_value_t = 0.0)]
    min_confidence: f64,
}

impl ModelFlags {
    fn params(&self) -> RegularizationParams {
        RegularizationParams {
            delta_l: self.delta_l,
            delta_u: self.delta_u,
            weights: [self.wx, self.wy, self.ww, self.wh],
            grouping: match self.grouping {
                GroupingArg::PerClass => Grouping::PerClass,
                GroupingArg::Merged => Grouping::Merged,
            },
            solver: match self.solver {
                SolverArg::Bb => SolverTag::BranchBound,
                SolverArg::Dp => SolverTag::Dp,
                SolverArg::Brute => SolverTag::BruteForce,
            },
            formulation: match self.formulation {
                FormulationArg::Indicator => Formulation::Indicator,
                FormulationArg::Chain => Formulation::Chain,
            },
            time_limit: Duration::from_secs_f64(self.time_limit),
            min_confidence: self.min_confidence,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Regularize a detection file and write a results file.
    Regularize {
        /// Input detection file (JSON).
        input: PathBuf,
        /// Output results file (JSON).
        #[arg(short, long)]
        output: PathBuf,
        /// Also write an SVG overlay of detected vs regularized boxes.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also export the assembled program in LP format.
        #[arg(long)]
        lp: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Render the overlay SVG for an existing results file.
    Render {
        /// Results file produced by `regularize`.
        input: PathBuf,
        /// Output SVG path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a synthetic jittered-grid detection file.
    Synth {
        #[arg(long, default_value_t = 6)]
        rows: usize,
        #[arg(long, default_value_t = 8)]
        cols: usize,
        #[arg(long, default_value_t = 40.0)]
        origin: f64,
        #[arg(long, default_value_t = 60.0)]
        pitch_x: f64,
        #[arg(long, default_value_t = 60.0)]
        pitch_y: f64,
        #[arg(long, default_value_t = 30.0)]
        box_w: f64,
        #[arg(long, default_value_t = 40.0)]
        box_h: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output detection file (the noisy set).
        #[arg(short, long)]
        output: PathBuf,
        /// Optional path for the clean ground-truth set.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Solve the six built-in benchmark instances with both exact solvers.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solver time limit in seconds per instance.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
    /// Export the assembled program for a detection file in LP format.
    ExportLp {
        input: PathBuf,
        /// Output LP file.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::ParseSyntax(_)
            | Error::ParseSchema(_)
            | Error::UnsupportedVersion { .. }
            | Error::InvalidBox { .. }
            | Error::EmptyDetections,
        ) => EXIT_PARSE,
        Some(Error::Infeasible | Error::InfeasibleRow { .. }) => EXIT_INFEASIBLE,
        Some(Error::Io(_)) => EXIT_PARSE,
        _ => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                EXIT_PARSE
            } else {
                1
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Regularize {
            input,
            output,
            svg,
            lp,
            model,
        } => cmd_regularize(&input, &output, svg.as_deref(), lp.as_deref(), &model.params()),
        Command::Render { input, output } => cmd_render(&input, &output),
        Command::Synth {
            rows,
            cols,
            origin,
            pitch_x,
            pitch_y,
            box_w,
            box_h,
            jitter,
            dropout,
            seed,
            output,
            truth,
        } => {
            let spec = SyntheticGridSpec {
                rows,
                cols,
                origin,
                pitch_x,
                pitch_y,
                box_w,
                box_h,
                jitter,
                dropout,
                seed,
            };
            cmd_synth(&spec, &output, truth.as_deref())
        }
        Command::Bench { seed, time_limit } => cmd_bench(seed, time_limit),
        Command::ExportLp {
            input,
            output,
            model,
        } => cmd_export_lp(&input, &output, &model.params()),
    }
}

fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).map_err(|e| anyhow::anyhow!(Error::Io(e)).context(format!("reading {}", path.display())))
}

/// Writes atomically: to a temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
    };
    fs::write(&tmp, bytes)
        .map_err(|e| anyhow::anyhow!(e).context(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| anyhow::anyhow!(e).context(format!("renaming to {}", path.display())))?;
    Ok(())
}

fn print_summary(report: &pipeline::RegularizationReport) {
    println!(
        "{:<12} {:>5}  {:>4} {:>4} {:>4} {:>4}   ->   {:>4} {:>4} {:>4} {:>4}  {:>12}  {:>10}",
        "group", "boxes", "|X|", "|Y|", "|W|", "|H|", "|X|", "|Y|", "|W|", "|H|", "objective", "time(ms)"
    );
    for g in &report.groups {
        let d = g.detected_counts.as_array();
        let r = g.regularized_counts.as_array();
        println!(
            "{:<12} {:>5}  {:>4} {:>4} {:>4} {:>4}   ->   {:>4} {:>4} {:>4} {:>4}  {:>12.3}  {:>10.2}",
            g.class.map_or("merged".to_string(), |c| c.to_string()),
            g.n_boxes,
            d[0],
            d[1],
            d[2],
            d[3],
            r[0],
            r[1],
            r[2],
            r[3],
            g.objective.total,
            g.solver.wall_ms,
        );
    }
    let d = report.detected_counts.as_array();
    let r = report.regularized_counts.as_array();
    println!(
        "{:<12} {:>5}  {:>4} {:>4} {:>4} {:>4}   ->   {:>4} {:>4} {:>4} {:>4}  {:>12.3}  {:>10.2}",
        "total",
        report.groups.iter().map(|g| g.n_boxes).sum::<usize>(),
        d[0],
        d[1],
        d[2],
        d[3],
        r[0],
        r[1],
        r[2],
        r[3],
        report.objective.total,
        report.wall_ms,
    );
    println!(
        "objective = {:.3} (data {:.3} + regularity {:.3}), unknowns = {}, solve {}",
        report.objective.total,
        report.objective.data_term,
        report.objective.regularity_term,
        report.explicit_unknowns,
        if report.proven {
            "proven optimal"
        } else {
            "NOT proven (time limit)"
        }
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_regularize(
    input: &Path,
    output: &Path,
    svg: Option<&Path>,
    lp: Option<&Path>,
    params: &RegularizationParams,
) -> anyhow::Result<ExitCode> {
    let bytes = read_input(input)?;
    let detections = formats::parse_detections(&bytes)?;
    let (regularized, report) = pipeline::regularize(&detections, params)?;
    write_atomic(output, &formats::write_results(&detections, &regularized, &report))?;
    if let Some(svg_path) = svg {
        let overlay = render_svg(
            &detections,
            &regularized,
            detections.image_width,
            detections.image_height,
        );
        write_atomic(svg_path, &overlay)?;
    }
    if let Some(lp_path) = lp {
        write_atomic(lp_path, export_lp_bytes(&detections, params)?.as_bytes())?;
    }
    print_summary(&report);
    if report.proven {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_TIMEOUT_UNPROVEN))
    }
}

fn cmd_render(input: &Path, output: &Path) -> anyhow::Result<ExitCode> {
    let bytes = read_input(input)?;
    let results = formats::parse_results(&bytes)?;
    let detected = formats::detection_set_from_records(&results.image, &results.detected)?;
    let regularized = formats::detection_set_from_records(&results.image, &results.regularized)?;
    let overlay = render_svg(
        &detected,
        &regularized,
        results.image.width,
        results.image.height,
    );
    write_atomic(output, &overlay)?;
    println!(
        "rendered {} detected + {} regularized boxes to {}",
        detected.len(),
        regularized.len(),
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(
    spec: &SyntheticGridSpec,
    output: &Path,
    truth: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let (noisy, clean) = synth::synth_grid(spec)?;
    write_atomic(output, &formats::write_detections(&noisy))?;
    if let Some(truth_path) = truth {
        write_atomic(truth_path, &formats::write_detections(&clean))?;
    }
    println!(
        "generated {} boxes ({}x{} grid, jitter {}, dropout {}, seed {})",
        noisy.len(),
        spec.rows,
        spec.cols,
        spec.jitter,
        spec.dropout,
        spec.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(seed: u64, time_limit: f64) -> anyhow::Result<ExitCode> {
    let params = RegularizationParams::default();
    println!(
        "{:>3} {:>4} {:>4} {:>4} {:>4}  {:>12} {:>10} {:>8}  {:>12} {:>10}  {}",
        "N", "|X|", "|Y|", "|W|", "|H|", "bb obj", "bb ms", "nodes", "dp obj", "dp ms", "agree"
    );
    for (row, dims) in BENCH_CASES.iter().enumerate() {
        let set = synth::synth_bench_case(dims, &params, seed.wrapping_add(row as u64))?;
        let run = |solver: SolverTag| -> anyhow::Result<(f64, f64, u64, bool, [usize; 4])> {
            let p = RegularizationParams {
                solver,
                time_limit: Duration::from_secs_f64(time_limit),
                ..params.clone()
            };
            let (_, report) = pipeline::regularize(&set, &p)?;
            Ok((
                report.objective.total,
                report.wall_ms,
                report.groups.iter().map(|g| g.solver.nodes).sum(),
                report.proven,
                report.regularized_counts.as_array(),
            ))
        };
        let (bb_obj, bb_ms, bb_nodes, bb_proven, bb_counts) = run(SolverTag::BranchBound)?;
        let (dp_obj, dp_ms, _, _, _) = run(SolverTag::Dp)?;
        let agree = (bb_obj - dp_obj).abs() <= 1e-9 * bb_obj.max(1.0);
        println!(
            "{:>3} {:>4} {:>4} {:>4} {:>4}  {:>12.3} {:>10.2} {:>8}  {:>12.3} {:>10.2}  {}",
            dims.n_boxes,
            dims.spaces[0],
            dims.spaces[1],
            dims.spaces[2],
            dims.spaces[3],
            bb_obj,
            bb_ms,
            bb_nodes,
            dp_obj,
            dp_ms,
            if agree { "yes" } else { "NO" },
        );
        anyhow::ensure!(agree, "solver objectives disagree on benchmark row {row}");
        anyhow::ensure!(bb_proven, "branch and bound did not prove optimality on row {row}");
        let d = dims.spaces;
        anyhow::ensure!(
            bb_counts.iter().zip(&d).all(|(r, d)| r <= d),
            "regularized counts exceed detected sizes on row {row}"
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn export_lp_bytes(
    detections: &facadereg::DetectionSet,
    params: &RegularizationParams,
) -> anyhow::Result<String> {
    params.validate()?;
    // The LP export covers the merged program over all boxes.
    let mut parts = Vec::new();
    for attr in Attribute::ALL {
        let samples = detections.attribute_samples(attr)?;
        let space = mean_shift_1d(attr, &samples, params.delta_l)?;
        let residuals = bip::build_residuals(&samples, &space)?;
        let mask = bip::prune_mask(&residuals, params.delta_u)?;
        parts.push(bip::AttributePart {
            residuals,
            mask,
            omega: params.weight(attr),
        });
    }
    let problem = bip::assemble_problem(&parts, params.formulation)?;
    Ok(bip::lp::write_lp(&problem))
}

fn cmd_export_lp(
    input: &Path,
    output: &Path,
    params: &RegularizationParams,
) -> anyhow::Result<ExitCode> {
    let bytes = read_input(input)?;
    let detections = formats::parse_detections(&bytes)?;
    let text = export_lp_bytes(&detections, params)?;
    write_atomic(output, text.as_bytes())?;
    println!("wrote {}", output.display());
    Ok(ExitCode::SUCCESS)
}
