use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use helicality::features::FilePolicy;
use helicality::pipeline::{run_pipeline, DisconnectPolicy, InputSource, PipelineConfig};
use helicality::report::{export_csv, export_intermediates, export_json};
use helicality::svg::export_svg;

#[derive(Parser)]
#[command(name = "helicality", version, about = "Score octave equivalence in audio corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a manifest or a precomputed feature matrix.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Dataset manifest CSV with header `path,group`.
    #[arg(long, conflicts_with = "features")]
    manifest: Option<PathBuf>,

    /// Precomputed features CSV (first column bin frequency in Hz, one
    /// column per file), bypassing audio decoding.
    #[arg(long)]
    features: Option<PathBuf>,

    /// Manifest column to group by (one score per group).
    #[arg(long)]
    group_by: Option<String>,

    /// CQT bins per octave.
    #[arg(long, default_value_t = 24)]
    q: usize,

    /// Octaves retained in the analysis window.
    #[arg(long, default_value_t = 3)]
    octaves: usize,

    /// Neighbors per vertex in the k-NN graph.
    #[arg(long, default_value_t = 3)]
    knn: usize,

    /// Lowest CQT center frequency, Hz.
    #[arg(long, default_value_t = 32.703)]
    fmin: f64,

    /// Analysis sample rate, Hz.
    #[arg(long, default_value_t = 22050)]
    sr: u32,

    /// CQT hop length, samples.
    #[arg(long, default_value_t = 512)]
    hop: usize,

    /// Octaves computed above fmin before window selection.
    #[arg(long, default_value_t = 8)]
    octaves_computed: usize,

    /// Floor applied to squared correlations before the log transform.
    #[arg(long, default_value_t = 1e-12)]
    rho_floor: f64,

    /// Response to a disconnected neighbor graph.
    #[arg(long, default_value = "fail")]
    disconnect_policy: DisconnectPolicy,

    /// Use one corpus-wide octave window instead of one per group.
    #[arg(long)]
    shared_window: bool,

    /// Drop zero-variance bins octave-consistently instead of failing.
    #[arg(long)]
    drop_zero_variance: bool,

    /// Skip unreadable files with a warning instead of failing.
    #[arg(long)]
    skip_unreadable: bool,

    /// Record group failures and continue.
    #[arg(long)]
    keep_going: bool,

    /// Write per-group intermediate matrices as CSV.
    #[arg(long)]
    dump_intermediates: bool,

    /// Write per-group SVG scatter plots.
    #[arg(long)]
    svg: bool,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn build_config(args: &RunArgs) -> Result<PipelineConfig, String> {
    let input = match (&args.manifest, &args.features) {
        (Some(m), None) => InputSource::Manifest(m.clone()),
        (None, Some(f)) => InputSource::Features(f.clone()),
        _ => return Err("exactly one of --manifest or --features is required".into()),
    };
    let mut config = PipelineConfig::new(input);
    config.bins_per_octave = args.q;
    config.n_octaves = args.octaves;
    config.knn = args.knn;
    config.f_min = args.fmin;
    config.sample_rate = args.sr;
    config.hop_length = args.hop;
    config.n_octaves_computed = args.octaves_computed;
    config.rho_floor = args.rho_floor;
    config.disconnect_policy = args.disconnect_policy;
    config.group_by = args.group_by.clone();
    config.shared_window = args.shared_window;
    config.drop_zero_variance = args.drop_zero_variance;
    config.file_policy = if args.skip_unreadable {
        FilePolicy::SkipAndWarn
    } else {
        FilePolicy::FailFast
    };
    config.keep_going = args.keep_going;
    Ok(config)
}

fn run(args: &RunArgs) -> Result<(), (i32, String)> {
    let config = build_config(args).map_err(|m| (2, m))?;
    let mut output = run_pipeline(&config).map_err(|e| (e.exit_code(), e.to_string()))?;
    output.report.generated_at = Some(now_utc());

    let as_io = |e: helicality::Error| (e.exit_code(), e.to_string());
    std::fs::create_dir_all(&args.out).map_err(|e| (3, e.to_string()))?;
    export_json(&output.report, &args.out.join("report.json")).map_err(as_io)?;
    export_csv(&output.report, &args.out.join("scores.csv")).map_err(as_io)?;
    if args.dump_intermediates {
        let dir = args.out.join("intermediates");
        for art in &output.artifacts {
            export_intermediates(art, &dir).map_err(as_io)?;
        }
    }
    if args.svg {
        let dir = args.out.join("svg");
        for art in &output.artifacts {
            export_svg(art, &dir).map_err(as_io)?;
        }
    }

    for record in &output.report.groups {
        let name = if record.group.is_empty() {
            "all"
        } else {
            &record.group
        };
        match (&record.result, &record.error) {
            (Some(r), _) => {
                let h = if r.helicality.0.is_finite() {
                    format!("{:.4}", r.helicality.0)
                } else {
                    "inf".to_string()
                };
                println!("{name}: helicality {h} (n_files={}, P={})", record.n_files, r.p);
            }
            (None, Some(e)) => eprintln!("{name}: FAILED: {e}"),
            _ => {}
        }
    }
    Ok(())
}

/// UTC timestamp without pulling in a date dependency; informational only.
fn now_utc() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err((code, message)) => {
                eprintln!("error: {message}");
                ExitCode::from(code as u8)
            }
        },
    }
}
