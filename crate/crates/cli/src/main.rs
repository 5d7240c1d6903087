use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wquant::pipeline::{ModelSummary, TensorOutcome};
use wquant::{
    dequantize_tensor, load_manifest, quantize_model, read_container, summarize, sweep,
    write_container, write_manifest, BreakpointMode, Granularity, GranularityChoice, MemoryModel,
    Method, ModelWeights, QuantizeConfig,
};

#[derive(Parser)]
#[command(name = "wquant", version, about = "Post-training weight quantization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a model and write a container plus a report.
    Quantize(QuantizeArgs),
    /// Reconstruct real-valued weights from a container.
    Dequantize(DequantizeArgs),
    /// Quantize at a range of bit widths and print one CSV row per width.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Affine,
    SymRestricted,
    SymFull,
    Pwlq,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Affine => Method::Affine,
            MethodArg::SymRestricted => Method::SymmetricRestricted,
            MethodArg::SymFull => Method::SymmetricFull,
            MethodArg::Pwlq => Method::Pwlq,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Layer,
    Filter,
    Channel,
    Fshape,
    Cshape,
    Auto,
    Auto3,
}

impl From<GranularityArg> for GranularityChoice {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Layer => GranularityChoice::Fixed(Granularity::LayerWise),
            GranularityArg::Filter => GranularityChoice::Fixed(Granularity::FilterWise),
            GranularityArg::Channel => GranularityChoice::Fixed(Granularity::ChannelWise),
            GranularityArg::Fshape => GranularityChoice::Fixed(Granularity::FShapeWise),
            GranularityArg::Cshape => GranularityChoice::Fixed(Granularity::CShapeWise),
            GranularityArg::Auto => GranularityChoice::Auto,
            GranularityArg::Auto3 => GranularityChoice::Auto3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BreakpointArg {
    Approx,
    Bruteforce,
}

#[derive(Args)]
struct CommonArgs {
    /// Weight manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "affine")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "fshape")]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value = "approx")]
    breakpoint: BreakpointArg,
    /// Grid size for brute-force breakpoint search.
    #[arg(long, default_value_t = wquant::pwlq::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Glob of tensor names to leave unquantized; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    /// Charge one region bit per PWLQ element in the primary ratio.
    #[arg(long)]
    charge_region_bits: bool,
    #[arg(long)]
    baseline_bits: Option<u32>,
    #[arg(long)]
    param_bytes_affine: Option<u32>,
    #[arg(long)]
    param_bytes_symmetric: Option<u32>,
    #[arg(long)]
    param_bytes_pwlq: Option<u32>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    workers: Option<usize>,
}

impl CommonArgs {
    fn memory_model(&self) -> Result<MemoryModel> {
        let d = MemoryModel::default();
        let mm = MemoryModel {
            baseline_bits_per_element: self.baseline_bits.unwrap_or(d.baseline_bits_per_element),
            param_bytes_affine: self.param_bytes_affine.unwrap_or(d.param_bytes_affine),
            param_bytes_symmetric: self
                .param_bytes_symmetric
                .unwrap_or(d.param_bytes_symmetric),
            param_bytes_pwlq: self.param_bytes_pwlq.unwrap_or(d.param_bytes_pwlq),
            charge_region_bits: self.charge_region_bits,
        };
        mm.validate()?;
        Ok(mm)
    }

    fn config(&self, bits: u8) -> QuantizeConfig {
        QuantizeConfig {
            method: self.method.into(),
            bits,
            granularity: self.granularity.into(),
            breakpoint: match self.breakpoint {
                BreakpointArg::Approx => BreakpointMode::Approx,
                BreakpointArg::Bruteforce => BreakpointMode::Bruteforce {
                    grid_points: self.grid_points,
                },
            },
        }
    }

    fn load(&self) -> Result<ModelWeights> {
        let mut model = load_manifest(&self.manifest)
            .with_context(|| format!("loading {}", self.manifest.display()))?;
        model.exclude_matching(&self.exclude)?;
        Ok(model)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            if n == 0 {
                bail!("--workers must be at least 1");
            }
            b = b.num_threads(n);
        }
        Ok(b.build()?)
    }
}

#[derive(Args)]
struct QuantizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 4)]
    bits: u8,
    /// Output container path.
    #[arg(long)]
    out: PathBuf,
    /// Output report path (TOML).
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct DequantizeArgs {
    /// Input container.
    #[arg(long)]
    container: PathBuf,
    /// Output manifest path; raw tensor files are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Inclusive bit-width range, e.g. `3-8`.
    #[arg(long, default_value = "3-8")]
    bits_range: String,
    /// TOML table mapping bit width to measured accuracy loss in percentage
    /// points, e.g. `4 = 1.0`.
    #[arg(long)]
    loss_file: Option<PathBuf>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    format: &'static str,
    config: ReportConfig,
    memory_model: MemoryModel,
    totals: ReportTotals,
    #[serde(rename = "tensor")]
    tensors: Vec<ReportTensor>,
}

#[derive(Serialize)]
struct ReportConfig {
    method: String,
    bits: u8,
    granularity: String,
    breakpoint: String,
}

#[derive(Serialize)]
struct ReportTotals {
    total_mse: f64,
    baseline_bytes: u64,
    bytes: u64,
    bytes_physical: u64,
    memory_saving: f64,
    memory_saving_physical: f64,
}

#[derive(Serialize)]
struct ReportTensor {
    name: String,
    shape: [usize; 4],
    scheme: String,
    excluded: bool,
    passthrough: bool,
    mse: f64,
    max_abs: f64,
    baseline_bytes: u64,
    bytes: u64,
    bytes_physical: u64,
}

fn build_report(
    cfg: &QuantizeConfig,
    mm: &MemoryModel,
    outcomes: &[TensorOutcome],
    summary: &ModelSummary,
) -> Report {
    let regions_free = MemoryModel {
        charge_region_bits: false,
        ..*mm
    };
    Report {
        format: "wquant-report/1",
        config: ReportConfig {
            method: cfg.method.to_string(),
            bits: cfg.bits,
            granularity: cfg.granularity.to_string(),
            breakpoint: match cfg.breakpoint {
                BreakpointMode::Approx => "approx".into(),
                BreakpointMode::Bruteforce { grid_points } => format!("bruteforce:{grid_points}"),
            },
        },
        memory_model: *mm,
        totals: ReportTotals {
            total_mse: summary.total_mse,
            baseline_bytes: summary.baseline_bytes,
            bytes: summary.bytes,
            bytes_physical: summary.bytes_physical,
            memory_saving: summary.memory_saving,
            memory_saving_physical: summary.memory_saving_physical,
        },
        tensors: outcomes
            .iter()
            .map(|o| ReportTensor {
                name: o.tensor.name.clone(),
                shape: o.tensor.shape.dims(),
                scheme: o.tensor.scheme.to_string(),
                excluded: o.excluded,
                passthrough: o.tensor.is_passthrough(),
                mse: o.error.mse,
                max_abs: o.error.max_abs,
                baseline_bytes: mm.baseline_bytes(o.tensor.element_count()),
                bytes: wquant::memory_bytes(&o.tensor, &regions_free),
                bytes_physical: wquant::memory_bytes(&o.tensor, &regions_free.physical()),
            })
            .collect(),
    }
}

/// Removes the listed files unless disarmed.
struct Cleanup(Vec<PathBuf>);

impl Cleanup {
    fn disarm(mut self) {
        self.0.clear();
    }
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

fn cmd_quantize(args: &QuantizeArgs) -> Result<()> {
    let cfg = args.common.config(args.bits);
    cfg.method.check_bits(cfg.bits)?;
    let mm = args.common.memory_model()?;
    let model = args.common.load()?;
    let pool = args.common.pool()?;
    let (outcomes, summary) = pool.install(|| -> Result<_> {
        let outcomes = quantize_model(&model, &cfg)?;
        let summary = summarize(&outcomes, &mm)?;
        Ok((outcomes, summary))
    })?;

    let guard = Cleanup(vec![args.out.clone(), args.report.clone()]);
    let tensors: Vec<_> = outcomes.iter().map(|o| o.tensor.clone()).collect();
    write_container(&tensors, &mm, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let report = build_report(&cfg, &mm, &outcomes, &summary);
    fs::write(&args.report, toml::to_string(&report)?)
        .with_context(|| format!("writing {}", args.report.display()))?;

    let (back, _) = read_container(&args.out).context("verifying container")?;
    if back.len() != tensors.len() || back.iter().zip(&tensors).any(|(a, b)| a.name != b.name) {
        bail!("container verification failed");
    }
    toml::from_str::<toml::Table>(&fs::read_to_string(&args.report)?)
        .context("verifying report")?;
    guard.disarm();

    let (saving, policy) = if mm.charge_region_bits {
        (summary.memory_saving_physical, "region bits charged")
    } else {
        (summary.memory_saving, "region bits free")
    };
    eprintln!(
        "quantized {} tensors: memory saving {saving:.4}x ({policy}), mse {:.6e}",
        outcomes.len(),
        summary.total_mse
    );
    Ok(())
}

fn cmd_dequantize(args: &DequantizeArgs) -> Result<()> {
    let (tensors, _) = read_container(&args.container)
        .with_context(|| format!("reading {}", args.container.display()))?;
    let restored = tensors
        .iter()
        .map(dequantize_tensor)
        .collect::<wquant::Result<Vec<_>>>()?;
    let model = ModelWeights::new(restored)?;

    let dir = args.out.parent().unwrap_or_else(|| Path::new("."));
    let before: Vec<PathBuf> = if dir.as_os_str().is_empty() {
        Vec::new()
    } else {
        fs::create_dir_all(dir)?;
        fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect()
    };
    let written = write_manifest(&model, &args.out).and_then(|()| {
        let back = load_manifest(&args.out)?;
        if back.tensors.len() != model.tensors.len() {
            return Err(wquant::Error::Manifest(
                "written manifest lost tensors".into(),
            ));
        }
        Ok(())
    });
    if let Err(e) = written {
        // drop whatever was written this run
        if let Ok(entries) = fs::read_dir(dir) {
            for p in entries.filter_map(|e| e.ok().map(|e| e.path())) {
                if !before.contains(&p) {
                    let _ = fs::remove_file(p);
                }
            }
        }
        return Err(e.into());
    }
    eprintln!(
        "restored {} tensors to {}",
        model.tensors.len(),
        args.out.display()
    );
    Ok(())
}

fn parse_bits_range(s: &str) -> Result<(u8, u8)> {
    let (a, b) = s
        .split_once('-')
        .or_else(|| s.split_once(".."))
        .map(|(a, b)| (a, b.trim_start_matches('=')))
        .unwrap_or((s, s));
    let lo: u8 = a
        .trim()
        .parse()
        .with_context(|| format!("bad bits range `{s}`"))?;
    let hi: u8 = b
        .trim()
        .parse()
        .with_context(|| format!("bad bits range `{s}`"))?;
    Ok((lo, hi))
}

fn load_losses(path: &Path) -> Result<BTreeMap<u8, f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: BTreeMap<String, f64> =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    table
        .into_iter()
        .map(|(k, v)| {
            let bits = k
                .parse()
                .with_context(|| format!("loss file key `{k}` is not a bit width"))?;
            Ok((bits, v))
        })
        .collect()
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let (lo, hi) = parse_bits_range(&args.bits_range)?;
    let cfg = args.common.config(lo);
    let mm = args.common.memory_model()?;
    let losses = match &args.loss_file {
        Some(p) => load_losses(p)?,
        None => BTreeMap::new(),
    };
    let model = args.common.load()?;
    let pool = args.common.pool()?;
    let rows = pool.install(|| sweep(&model, &cfg, lo..=hi, &mm, &losses))?;

    let mut csv =
        String::from("bits,total_mse,memory_saving,memory_saving_physical,figure_of_merit\n");
    for r in rows {
        let fom = r.figure_of_merit.map(|f| f.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.bits, r.total_mse, r.memory_saving, r.memory_saving_physical, fom
        ));
    }
    match &args.out {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Quantize(a) => cmd_quantize(a),
        Command::Dequantize(a) => cmd_dequantize(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
