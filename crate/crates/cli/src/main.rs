use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hris_core::controller::{build_lut, default_grid, direction_grid, node_scenes, random_scenes, run_episode};
use hris_core::fields::{pattern, pattern_from_gammas, Direction, GridSpec, Surface};
use hris_core::geometry::{
    check_fit, eighth_wave, generate_layout_with, validate_layout, InterleaveAxis, LayoutOptions, PanelLayout,
    UnitCellSpec,
};
use hris_core::retrieval::{classify_dng_bands, linear_sweep, simulate_slab, unwrap_branch, SlabSpec};
use hris_core::sensing::{estimate_doa, isolation_report, snapshot_model, Scene, SensingConfig};
use hris_core::touchstone::{parse_sparam_csv, parse_touchstone, write_sparam_csv, write_touchstone, DataFormat, FrequencyUnit};
use hris_core::unitcell::HybridCellModel;
use hris_core::{
    CalibrationTable64, Direction64, HybridCellModel64, LoadBank64, MaterialModel64, PanelLayout64, Surface64,
};
use serde::Serialize;
use serde_json::json;

/// Design and simulation toolkit for a hybrid reconfigurable intelligent surface.
#[derive(Debug, Parser, Serialize)]
#[command(name = "hris", version)]
struct Cli {
    /// Design frequency, GHz.
    #[arg(long, global = true, default_value_t = 5.5)]
    freq_ghz: f64,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, env = "HRIS_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Retrieve n, z, ε and μ from slab S-parameters (.s2p or .csv).
    Retrieve(RetrieveArgs),
    /// Simulate slab S-parameters of a Lorentzian material model.
    Forward(ForwardArgs),
    /// Generate and validate the interleaved panel layout.
    Layout(LayoutArgs),
    /// Check that the hybrid cell fits the λ/8 lattice.
    Checkfit(CheckfitArgs),
    /// Steer the panel and export the far-field pattern.
    Steer(SteerArgs),
    /// Simulate sensing snapshots and estimate both directions of arrival.
    Sense(SenseArgs),
    /// Calibrate a lookup table and run a closed-loop episode.
    Loop(LoopArgs),
}

#[derive(Debug, Args, Serialize)]
struct RetrieveArgs {
    /// S-parameter file.
    #[arg(long)]
    input: PathBuf,
    /// Slab thickness, mm.
    #[arg(long)]
    thickness_mm: f64,
    /// Branch index for the first retrieved point.
    #[arg(long)]
    branch: Option<i64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SweepFormat {
    Ri,
    Ma,
    Db,
    Csv,
}

#[derive(Debug, Args, Serialize)]
struct ForwardArgs {
    /// Material model JSON; the built-in double-negative fixture when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    thickness_mm: f64,
    #[arg(long, default_value_t = 3.0)]
    start_ghz: f64,
    #[arg(long, default_value_t = 8.0)]
    stop_ghz: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, value_enum, default_value_t = SweepFormat::Ri)]
    format: SweepFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Axis {
    X,
    Y,
}

#[derive(Debug, Args, Serialize)]
struct PanelArgs {
    /// Layout JSON; generated from the size flags when omitted.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    nx: usize,
    #[arg(long, default_value_t = 16)]
    ny: usize,
    /// Lattice pitch, mm; λ/8 when omitted.
    #[arg(long)]
    pitch_mm: Option<f64>,
    /// Axis along which the second sensing array is offset.
    #[arg(long, value_enum, default_value_t = Axis::X)]
    axis: Axis,
    /// Every element a plain reflecting cell.
    #[arg(long, conflicts_with = "layout")]
    reflective: bool,
    /// Fraction of power the hybrid cells couple to sensing.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Load bank JSON; the ideal 2-bit bank when omitted.
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LayoutArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Allowed relative spacing deviation.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
struct CheckfitArgs {
    #[arg(long, default_value_t = 7.0)]
    pitch_mm: f64,
    #[arg(long, default_value_t = 6.4)]
    ring_mm: f64,
    #[arg(long, default_value_t = 3.8)]
    disc_mm: f64,
    #[arg(long, default_value_t = 0.8)]
    substrate_mm: f64,
    #[arg(long, default_value_t = 3.5)]
    eps_ring: f64,
    #[arg(long, default_value_t = 10.2)]
    eps_disc: f64,
    /// Fraction by which the disc may exceed λg/4.
    #[arg(long, default_value_t = 0.0)]
    slack: f64,
}

#[derive(Debug, Args, Serialize)]
struct SteerArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 0.0)]
    inc_theta: f64,
    #[arg(long, default_value_t = 0.0)]
    inc_phi: f64,
    #[arg(long, default_value_t = 20.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Pattern grid step, degrees.
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
    /// Use the unquantized phase profile.
    #[arg(long)]
    continuous: bool,
}

#[derive(Debug, Args, Serialize)]
struct SenseArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 25.0)]
    tx_theta: f64,
    #[arg(long, default_value_t = 30.0)]
    tx_phi: f64,
    #[arg(long, default_value_t = 40.0)]
    rx_theta: f64,
    #[arg(long, default_value_t = 200.0)]
    rx_phi: f64,
    #[arg(long, default_value_t = 30.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 64)]
    snapshots: usize,
    /// Cross-polarization leak, dB.
    #[arg(long, default_value_t = -30.0)]
    leak_db: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
}

#[derive(Debug, Args, Serialize)]
struct LoopArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 20)]
    scenes: usize,
    #[arg(long, default_value_t = 30.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 16)]
    snapshots: usize,
    #[arg(long, default_value_t = -30.0)]
    leak_db: f64,
    /// Largest θ of random scenes, degrees.
    #[arg(long, default_value_t = 60.0)]
    theta_max: f64,
    /// Draw scenes from the table's grid nodes.
    #[arg(long)]
    nodes: bool,
    /// Calibration table JSON; built analytically when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Table grid θ step, degrees; the 25-node default grid when omitted.
    #[arg(long, requires = "lut_phi_step")]
    lut_theta_step: Option<f64>,
    #[arg(long)]
    lut_phi_step: Option<f64>,
    #[arg(long, default_value_t = 60.0)]
    lut_theta_max: f64,
    /// Estimation grid step, degrees.
    #[arg(long, default_value_t = 2.0)]
    grid_step: f64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn deg(theta: f64, phi: f64) -> Result<Direction64> {
    Direction::from_degrees(theta, phi).with_context(|| format!("direction ({theta}°, {phi}°)"))
}

fn panel(args: &PanelArgs, f: f64) -> Result<Surface64> {
    let layout: PanelLayout64 = match (&args.layout, args.reflective) {
        (Some(path), _) => PanelLayout::from_json(&read(path)?)?,
        (None, true) => PanelLayout::reflective(args.nx, args.ny, f, args.pitch_mm.map_or(eighth_wave(f), |p| p * 1e-3)),
        (None, false) => {
            let axis = match args.axis {
                Axis::X => InterleaveAxis::X,
                Axis::Y => InterleaveAxis::Y,
            };
            generate_layout_with(args.nx, args.ny, f, &LayoutOptions { axis, pitch: args.pitch_mm.map(|p| p * 1e-3) })?
        }
    };
    let bank = match &args.bank {
        Some(path) => LoadBank64::from_json(&read(path)?)?,
        None => LoadBank64::default(),
    };
    let cell: HybridCellModel64 = HybridCellModel::new(args.rho, bank)?;
    Ok(Surface::new(layout, cell))
}

fn leak(db: f64) -> SensingConfig<f64> {
    SensingConfig { leak: 10f64.powf(db / 20.0) }
}

fn retrieve(args: &RetrieveArgs, out: &Path) -> Result<()> {
    let slab = SlabSpec::new(args.thickness_mm * 1e-3).context("--thickness-mm")?;
    let text = read(&args.input)?;
    let is_csv = args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let table = if is_csv { parse_sparam_csv(&text) } else { parse_touchstone(&text) }
        .with_context(|| format!("parsing {}", args.input.display()))?;
    let params = unwrap_branch(&table, slab, args.branch)?;
    let bands = classify_dng_bands(&params);
    write(out, "effective_params.csv", &params.to_csv())?;
    let report = json!({
        "points": params.points.len(),
        "gaps": params.gap_count(),
        "dng_bands": bands.iter().map(|b| json!({"start_hz": b.start, "stop_hz": b.stop})).collect::<Vec<_>>(),
    });
    write(out, "dng_bands.json", &serde_json::to_string_pretty(&report)?)?;
    println!("{} points, {} gaps", params.points.len(), params.gap_count());
    for b in &bands {
        println!("DNG band {:.4}-{:.4} GHz", b.start / 1e9, b.stop / 1e9);
    }
    if bands.is_empty() {
        println!("no DNG band");
    }
    Ok(())
}

fn forward(args: &ForwardArgs, out: &Path) -> Result<()> {
    let slab = SlabSpec::new(args.thickness_mm * 1e-3).context("--thickness-mm")?;
    let model = match &args.model {
        Some(path) => MaterialModel64::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))?,
        None => MaterialModel64::dng_fixture(),
    };
    if args.points < 2 || !(args.start_ghz > 0.0 && args.stop_ghz > args.start_ghz) {
        bail!("sweep needs 0 < start < stop and at least 2 points");
    }
    let mut table = simulate_slab(&model, slab, &linear_sweep(args.start_ghz * 1e9, args.stop_ghz * 1e9, args.points))?;
    table.frequency_unit = FrequencyUnit::GHz;
    let (name, text) = match args.format {
        SweepFormat::Csv => ("slab.csv", write_sparam_csv(&table)?),
        SweepFormat::Ri => ("slab.s2p", write_touchstone(&table, DataFormat::RI)?),
        SweepFormat::Ma => ("slab.s2p", write_touchstone(&table, DataFormat::MA)?),
        SweepFormat::Db => ("slab.s2p", write_touchstone(&table, DataFormat::DB)?),
    };
    write(out, name, &text)?;
    write(out, "model.json", &model.to_json())?;
    println!("wrote {} points to {name}", table.len());
    Ok(())
}

fn layout(args: &LayoutArgs, f: f64, out: &Path) -> Result<bool> {
    let s = panel(&args.panel, f)?;
    let report = validate_layout(&s.layout, args.tolerance);
    write(out, "layout.json", &s.layout.to_json())?;
    let mut text = format!(
        "{}: {} elements, max spacing deviation {:.2}% (tolerance {:.2}%)\n",
        if report.passed() { "PASS" } else { "FAIL" },
        s.layout.len(),
        report.max_deviation * 100.0,
        args.tolerance * 100.0
    );
    for v in &report.violations {
        text.push_str(&format!("  {v:?}\n"));
    }
    write(out, "validation.txt", &text)?;
    print!("{text}");
    Ok(report.passed())
}

fn checkfit(args: &CheckfitArgs, f: f64, out: &Path) -> Result<()> {
    let spec = UnitCellSpec {
        cell_pitch: args.pitch_mm * 1e-3,
        outer_ring_diameter: args.ring_mm * 1e-3,
        inner_disc_diameter: args.disc_mm * 1e-3,
        substrate_thickness: args.substrate_mm * 1e-3,
        eps_ring: args.eps_ring,
        eps_disc: args.eps_disc,
        design_frequency: f,
    };
    let report = check_fit(&spec, args.slack)?;
    write(out, "checkfit.txt", &report.to_string())?;
    print!("{report}");
    Ok(())
}

fn steer(args: &SteerArgs, f: f64, out: &Path) -> Result<()> {
    let s = panel(&args.panel, f)?;
    let (inc, tgt) = (deg(args.inc_theta, args.inc_phi)?, deg(args.theta, args.phi)?);
    let grid = GridSpec::degrees(args.grid_step, args.grid_step);
    let p = if args.continuous {
        pattern_from_gammas(&s, &s.ideal_gammas(&inc, &tgt, f), &inc, &grid, f)?
    } else {
        let m = s.quantized_matrix(&inc, &tgt, f)?;
        write(out, "load_matrix.json", &m.to_json())?;
        pattern(&s, &m, &inc, &grid, f)?
    };
    write(out, "pattern.csv", &p.to_csv())?;
    let peak = p.peak();
    println!(
        "peak at theta {:.1} deg, phi {:.1} deg, {:.3} dB",
        peak.direction.theta_deg(),
        peak.direction.phi_deg(),
        10.0 * peak.value.norm_sqr().log10()
    );
    Ok(())
}

fn sense(args: &SenseArgs, f: f64, seed: u64, out: &Path) -> Result<()> {
    let s = panel(&args.panel, f)?;
    let scene = Scene::new(
        deg(args.tx_theta, args.tx_phi)?,
        deg(args.rx_theta, args.rx_phi)?,
        args.snr_db,
        args.snapshots,
        seed,
    );
    let cfg = leak(args.leak_db);
    let grid = GridSpec::degrees(args.grid_step, args.grid_step);
    let (g1, g2) = snapshot_model(&s, &scene, &cfg)?;
    for (name, snap) in [("1", &g1), ("2", &g2)] {
        write(out, &format!("snapshots_g{name}.csv"), &snap.to_csv())?;
        let est = estimate_doa(snap, &s.layout, &grid)?;
        write(out, &format!("doa_g{name}.json"), &est.to_json())?;
        println!(
            "group {name}: theta {:.3} deg, phi {:.3} deg",
            est.direction.theta_deg(),
            est.direction.phi_deg()
        );
    }
    let iso = isolation_report(&s, &scene, &cfg)?;
    let text = json!({"group1_db": iso.group1_db, "group2_db": iso.group2_db});
    write(out, "isolation.json", &serde_json::to_string_pretty(&text)?)?;
    Ok(())
}

fn closed_loop(args: &LoopArgs, f: f64, seed: u64, out: &Path) -> Result<()> {
    let s = panel(&args.panel, f)?;
    let table = match &args.table {
        Some(path) => {
            let t = CalibrationTable64::from_json(&read(path)?)?;
            t.check_surface(&s)?;
            t
        }
        None => {
            let g = match (args.lut_theta_step, args.lut_phi_step) {
                (Some(t), Some(p)) => direction_grid(t, args.lut_theta_max, p),
                _ => default_grid(),
            };
            let t = build_lut(&s, &g, &g)?;
            write(out, "calibration.json", &t.to_json())?;
            t
        }
    };
    let scenes = if args.nodes {
        node_scenes(&table.incident_grid, args.scenes, args.snr_db, args.snapshots, seed)?
    } else {
        random_scenes(args.theta_max, args.scenes, args.snr_db, args.snapshots, seed)?
    };
    let grid = GridSpec::degrees(args.grid_step, args.grid_step);
    let log = run_episode(&s, &table, &scenes, &leak(args.leak_db), &grid)?;
    write(out, "episode.csv", &log.to_csv())?;
    println!(
        "{} scenes, median loss {:.3} dB, median pointing error {:.3} deg",
        log.steps.len(),
        log.median_loss_db().unwrap_or(f64::NAN),
        log.median_pointing_error_deg().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    if !(cli.freq_ghz.is_finite() && cli.freq_ghz > 0.0) {
        bail!("--freq-ghz must be positive");
    }
    if let Command::Retrieve(a) = &cli.command {
        SlabSpec::new(a.thickness_mm * 1e-3).context("--thickness-mm")?;
    }
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "config.json", &serde_json::to_string_pretty(cli)?)?;
    let f = cli.freq_ghz * 1e9;
    match &cli.command {
        Command::Retrieve(a) => retrieve(a, out)?,
        Command::Forward(a) => forward(a, out)?,
        Command::Layout(a) => return layout(a, f, out),
        Command::Checkfit(a) => checkfit(a, f, out)?,
        Command::Steer(a) => steer(a, f, out)?,
        Command::Sense(a) => sense(a, f, cli.seed, out)?,
        Command::Loop(a) => closed_loop(a, f, cli.seed, out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
