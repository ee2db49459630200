//! Subcommand implementations.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use pnp_retinex::eval::{MetricTable, NamedReport};
use pnp_retinex::posthoc::{
    delta_heatmap, probe_grid, InfluenceGraph, PosthocError, ProbeOptions, ProbeSession,
};
use pnp_retinex::raster::save_plane;
use pnp_retinex::scenes::clean_scenes;
use pnp_retinex::{
    enhance as run_enhance, evaluate, load_image, save_image, synthesize_lowlight,
    DecompositionResult, EnhanceConfig, ImageRgb, PixelCoord, SynthSpec,
};
use rayon::prelude::*;

use crate::files::{self, log, Manifest};
use crate::{AblateArgs, ConfigArgs, DecomposeArgs, EnhanceArgs, EvalArgs, ProbeArgs, SynthArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, keys or values; exit code 2.
    Usage(String),
    /// Anything that fails while doing the work; exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

/// Runs `f` inside a rayon pool of `workers` threads (logical CPU count by
/// default).
pub fn with_pool(workers: Option<usize>, f: impl FnOnce() -> CliResult + Send) -> CliResult {
    if workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(anyhow!("building worker pool: {e}")))?;
    pool.install(f)
}

/// Accepts plain numbers and `a/b` fractions; anything else is passed on
/// unchanged.
pub fn normalize_value(raw: &str) -> String {
    if let Some((a, b)) = raw.split_once('/') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            return (a / b).to_string();
        }
    }
    raw.to_string()
}

fn parse_number(raw: &str, what: &str) -> CliResult<f64> {
    normalize_value(raw).parse::<f64>().map_err(|_| {
        usage(format!(
            "{what}: expected a number or a/b fraction, got `{raw}`"
        ))
    })
}

/// Resolves the effective config. Later sources win: file, profile,
/// denoiser kind, named flags, then `--set` in command-line order.
pub fn resolve_config(args: &ConfigArgs) -> CliResult<EnhanceConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            EnhanceConfig::from_json(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => EnhanceConfig::default(),
    };
    if let Some(p) = &args.profile {
        cfg.set("profile", p).map_err(usage)?;
    }
    if let Some(d) = &args.denoiser {
        cfg.set("denoiser", d).map_err(usage)?;
    }
    for (slot, value) in [
        (&mut cfg.alpha, args.alpha),
        (&mut cfg.beta, args.beta),
        (&mut cfg.gamma1, args.gamma1),
        (&mut cfg.gamma2, args.gamma2),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(raw) = &args.noise_level {
        cfg.noise_level = parse_number(raw, "--noise-level")?;
    }
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg.set(key.trim(), &normalize_value(value))
            .map_err(usage)?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn log_config(cfg: &EnhanceConfig) {
    log(
        "config",
        &[
            ("alpha", cfg.alpha.to_string()),
            ("beta", cfg.beta.to_string()),
            ("mu", cfg.mu.to_string()),
            ("gamma1", cfg.gamma1.to_string()),
            ("gamma2", cfg.gamma2.to_string()),
            ("gamma_mode", format!("{:?}", cfg.gamma_mode).to_lowercase()),
            ("denoiser", cfg.denoiser.kind.to_string()),
            ("noise_level", cfg.noise_level.to_string()),
            ("hash", cfg.hash()),
        ],
    );
}

fn load(path: &Path) -> anyhow::Result<ImageRgb> {
    load_image(path).with_context(|| format!("loading {}", path.display()))
}

fn save(img: &ImageRgb, path: &Path) -> anyhow::Result<()> {
    files::ensure_parent(path)?;
    save_image(img, path).with_context(|| format!("writing {}", path.display()))
}

fn enhance_logged(
    input: &Path,
    img: &ImageRgb,
    cfg: &EnhanceConfig,
) -> anyhow::Result<DecompositionResult> {
    let start = Instant::now();
    let out = run_enhance(img, cfg).with_context(|| format!("enhancing {}", input.display()))?;
    log(
        "enhance",
        &[
            ("input", input.display().to_string()),
            ("height", img.height().to_string()),
            ("width", img.width().to_string()),
            ("admm_iterations", out.illumination.iterations.to_string()),
            (
                "admm_residual",
                format!("{:.6e}", out.illumination.residual),
            ),
            ("admm_converged", out.illumination.converged.to_string()),
            ("hqs_iterations", out.reflectance.iterations.to_string()),
            (
                "hqs_change",
                format!("{:.6e}", out.reflectance.final_change),
            ),
            ("gamma1", cfg.gamma1.to_string()),
            ("gamma2", cfg.gamma2.to_string()),
            ("seconds", format!("{:.3}", start.elapsed().as_secs_f64())),
        ],
    );
    Ok(out)
}

fn check_unique(paths: &[PathBuf]) -> CliResult {
    let mut seen = HashSet::new();
    for p in paths {
        if !seen.insert(p) {
            return Err(usage(format!(
                "two inputs map to the same output {}",
                p.display()
            )));
        }
    }
    Ok(())
}

fn write_traces(out: &DecompositionResult, base: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let admm = files::sibling(base, "admm", "csv");
    let hqs = files::sibling(base, "hqs", "csv");
    files::write_text(&admm, &out.illumination.trace_csv())?;
    files::write_text(&hqs, &out.reflectance.trace_csv())?;
    Ok(vec![admm, hqs])
}

pub fn enhance(args: EnhanceArgs, argv: &[String]) -> CliResult {
    let cfg = resolve_config(&args.config)?;
    log_config(&cfg);
    let inputs = files::collect_images(&args.inputs)?;
    if inputs.is_empty() {
        return Err(usage("no input images found"));
    }
    let file_mode = inputs.len() == 1 && args.output.extension().is_some() && !args.output.is_dir();
    let outputs: Vec<PathBuf> = if file_mode {
        vec![args.output.clone()]
    } else {
        inputs
            .iter()
            .map(|p| {
                args.output
                    .join(format!("{}_enhanced.png", files::file_stem(p)))
            })
            .collect()
    };
    check_unique(&outputs)?;

    let written: Vec<Vec<PathBuf>> = inputs
        .par_iter()
        .zip(&outputs)
        .map(|(input, output)| -> anyhow::Result<Vec<PathBuf>> {
            let img = load(input)?;
            let out = enhance_logged(input, &img, &cfg)?;
            save(&out.enhanced, output)?;
            let mut extra = Vec::new();
            if args.emit_l {
                let path = files::sibling(output, "L", "png");
                save_plane(&out.l, &path).with_context(|| format!("writing {}", path.display()))?;
                extra.push(path);
            }
            if args.emit_r {
                let path = files::sibling(output, "R", "png");
                save(&out.r.clamp(0.0, 1.0), &path)?;
                extra.push(path);
            }
            if args.trace {
                extra.extend(write_traces(&out, output)?);
            }
            Ok(extra)
        })
        .collect::<anyhow::Result<_>>()?;

    let mut manifest = Manifest::new("enhance", argv).with_config(&cfg);
    for input in &inputs {
        manifest.input(input)?;
    }
    for (output, extra) in outputs.iter().zip(&written) {
        manifest.output(output);
        extra.iter().for_each(|p| manifest.output(p));
    }
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        if file_mode {
            args.output.with_extension("manifest.json")
        } else {
            args.output.join("manifest.json")
        }
    });
    manifest.write(&manifest_path)?;
    log(
        "done",
        &[
            ("images", inputs.len().to_string()),
            ("manifest", manifest_path.display().to_string()),
        ],
    );
    Ok(())
}

pub fn decompose(args: DecomposeArgs, argv: &[String]) -> CliResult {
    let cfg = resolve_config(&args.config)?;
    log_config(&cfg);
    let inputs = files::collect_images(&args.inputs)?;
    if inputs.is_empty() {
        return Err(usage("no input images found"));
    }
    let bases: Vec<PathBuf> = inputs
        .iter()
        .map(|p| args.output.join(format!("{}.png", files::file_stem(p))))
        .collect();
    check_unique(&bases)?;

    let written: Vec<Vec<PathBuf>> = inputs
        .par_iter()
        .zip(&bases)
        .map(|(input, base)| -> anyhow::Result<Vec<PathBuf>> {
            let img = load(input)?;
            let out = enhance_logged(input, &img, &cfg)?;
            let l_path = files::sibling(base, "L", "png");
            let r_path = files::sibling(base, "R", "png");
            files::ensure_parent(&l_path)?;
            save_plane(&out.l, &l_path).with_context(|| format!("writing {}", l_path.display()))?;
            save(&out.r.clamp(0.0, 1.0), &r_path)?;
            let mut paths = vec![l_path, r_path];
            if args.trace {
                paths.extend(write_traces(&out, base)?);
            }
            Ok(paths)
        })
        .collect::<anyhow::Result<_>>()?;

    let mut manifest = Manifest::new("decompose", argv).with_config(&cfg);
    for input in &inputs {
        manifest.input(input)?;
    }
    written.iter().flatten().for_each(|p| manifest.output(p));
    manifest.write(&args.output.join("manifest.json"))?;
    Ok(())
}

pub fn synth(args: SynthArgs, argv: &[String]) -> CliResult {
    let sources: Vec<(String, Option<PathBuf>)> = match (args.scenes, args.inputs.is_empty()) {
        (Some(_), false) => return Err(usage("give either input images or --scenes, not both")),
        (None, true) => return Err(usage("give input images or --scenes N")),
        (Some(0), true) => return Err(usage("--scenes must be at least 1")),
        (Some(n), true) => {
            if args.size == 0 {
                return Err(usage("--size must be at least 1"));
            }
            (0..n).map(|i| (format!("scene_{i:03}"), None)).collect()
        }
        (None, false) => files::collect_images(&args.inputs)?
            .into_iter()
            .map(|p| (files::file_stem(&p), Some(p)))
            .collect(),
    };
    let base = SynthSpec {
        darken_factor: args.darken,
        noise_sigma: args.noise_sigma,
        rng_seed: args.seed,
    };
    base.validate().map_err(usage)?;
    let generated = args
        .scenes
        .map(|n| clean_scenes(n, args.size, args.seed))
        .unwrap_or_default();

    let written: Vec<[PathBuf; 2]> = sources
        .par_iter()
        .enumerate()
        .map(|(i, (name, path))| -> anyhow::Result<[PathBuf; 2]> {
            let clean = match path {
                Some(p) => load(p)?,
                None => generated[i].1.clone(),
            };
            let spec = SynthSpec {
                rng_seed: args.seed + i as u64,
                ..base
            };
            let low = synthesize_lowlight(&clean, &spec)?;
            let low_path = args.output.join(format!("{name}_low.png"));
            let gt_path = args.output.join(format!("{name}_gt.png"));
            save(&low, &low_path)?;
            save(&clean, &gt_path)?;
            log(
                "synth",
                &[
                    ("name", name.clone()),
                    ("seed", spec.rng_seed.to_string()),
                    ("darken", spec.darken_factor.to_string()),
                    ("noise_sigma", spec.noise_sigma.to_string()),
                ],
            );
            Ok([low_path, gt_path])
        })
        .collect::<anyhow::Result<_>>()?;

    let mut manifest = Manifest::new("synth", argv);
    for (_, path) in &sources {
        if let Some(p) = path {
            manifest.input(p)?;
        }
    }
    written.iter().flatten().for_each(|p| manifest.output(p));
    manifest.extra.insert(
        "synth".into(),
        serde_json::json!({
            "darken_factor": base.darken_factor,
            "noise_sigma": base.noise_sigma,
            "seed": args.seed,
            "per_image_seed": "seed + index",
            "scenes": args.scenes,
            "size": args.scenes.map(|_| args.size),
        }),
    );
    manifest.write(&args.output.join("manifest.json"))?;
    Ok(())
}

pub fn eval(args: EvalArgs, argv: &[String]) -> CliResult {
    let pairs = files::pair_directories(&args.results, &args.ground_truth)?;
    let reports: Vec<NamedReport> = pairs
        .par_iter()
        .map(|(key, result, reference)| -> anyhow::Result<NamedReport> {
            let report = evaluate(&load(result)?, &load(reference)?)
                .with_context(|| format!("scoring {}", result.display()))?;
            log(
                "eval",
                &[
                    ("image", key.clone()),
                    ("psnr", pnp_retinex::eval::format_metric(report.psnr)),
                    ("ssim", pnp_retinex::eval::format_metric(report.ssim)),
                    ("mse", pnp_retinex::eval::format_metric(report.mse)),
                ],
            );
            Ok(NamedReport {
                image: key.clone(),
                report,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let table = MetricTable::new(reports);
    let csv = args.output.with_extension("csv");
    let json = args.output.with_extension("json");
    files::write_text(&csv, &table.to_csv())?;
    files::write_text(&json, &table.to_json_pretty())?;

    let mut manifest = Manifest::new("eval", argv);
    for (_, result, reference) in &pairs {
        manifest.input(result)?;
        manifest.input(reference)?;
    }
    manifest.output(&csv);
    manifest.output(&json);
    manifest.write(&args.output.with_extension("manifest.json"))?;
    log(
        "summary",
        &[
            ("images", table.images.len().to_string()),
            (
                "psnr_mean",
                pnp_retinex::eval::format_metric(table.mean.psnr),
            ),
            (
                "ssim_mean",
                pnp_retinex::eval::format_metric(table.mean.ssim),
            ),
            ("mse_mean", pnp_retinex::eval::format_metric(table.mean.mse)),
        ],
    );
    Ok(())
}

pub fn ablate(args: AblateArgs, argv: &[String]) -> CliResult {
    let base = resolve_config(&args.config)?;
    let configs: Vec<EnhanceConfig> = args
        .values
        .iter()
        .map(|raw| {
            let mut cfg = base.clone();
            cfg.set(&args.param, &normalize_value(raw)).map_err(usage)?;
            cfg.validate()
                .map_err(|e| usage(format!("{}={raw}: {e}", args.param)))?;
            Ok(cfg)
        })
        .collect::<CliResult<_>>()?;
    log_config(&base);

    let gt_dir = args.gt.clone().unwrap_or_else(|| args.inputs.clone());
    let pairs = files::pair_directories(&args.inputs, &gt_dir)?;
    let images: Vec<(ImageRgb, ImageRgb)> = pairs
        .par_iter()
        .map(|(_, low, gt)| Ok((load(low)?, load(gt)?)))
        .collect::<anyhow::Result<_>>()?;

    let mut csv = String::from("param,value,psnr,ssim,mse,grad_l1\n");
    for (raw, cfg) in args.values.iter().zip(&configs) {
        let rows: Vec<(f64, f64, f64, f64)> = pairs
            .par_iter()
            .zip(&images)
            .map(|((_, low_path, _), (low, gt))| -> anyhow::Result<_> {
                let out = run_enhance(low, cfg)
                    .with_context(|| format!("enhancing {}", low_path.display()))?;
                let m = evaluate(&out.enhanced, gt)?;
                let grad_l1 = pnp_retinex::grad::gradient(&out.l).l1_norm();
                Ok((m.psnr, m.ssim, m.mse, grad_l1))
            })
            .collect::<anyhow::Result<_>>()?;
        let n = rows.len() as f64;
        let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let (psnr, ssim, mse, grad_l1) =
            (mean(|r| r.0), mean(|r| r.1), mean(|r| r.2), mean(|r| r.3));
        let fmt = pnp_retinex::eval::format_metric;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            args.param,
            raw,
            fmt(psnr),
            fmt(ssim),
            fmt(mse),
            fmt(grad_l1)
        ));
        log(
            "ablate",
            &[
                ("param", args.param.clone()),
                ("value", raw.clone()),
                ("psnr", fmt(psnr)),
                ("ssim", fmt(ssim)),
                ("mse", fmt(mse)),
                ("grad_l1", fmt(grad_l1)),
                ("config_hash", cfg.hash()),
            ],
        );
    }
    files::write_text(&args.output, &csv)?;

    let mut manifest = Manifest::new("ablate", argv).with_config(&base);
    for (_, low, gt) in &pairs {
        manifest.input(low)?;
        manifest.input(gt)?;
    }
    manifest.output(&args.output);
    manifest.extra.insert(
        "sweep".into(),
        serde_json::json!({ "param": args.param, "values": args.values }),
    );
    manifest.write(&args.output.with_extension("manifest.json"))?;
    Ok(())
}

fn parse_probe(raw: &str) -> CliResult<PixelCoord> {
    let parsed = raw.split_once(',').and_then(|(r, c)| {
        Some(PixelCoord::new(
            r.trim().parse().ok()?,
            c.trim().parse().ok()?,
        ))
    });
    parsed.ok_or_else(|| usage(format!("--probe expects ROW,COL, got `{raw}`")))
}

fn parse_grid(raw: &str) -> CliResult<(usize, usize)> {
    let parsed = raw
        .split_once(['x', 'X'])
        .and_then(|(r, c)| Some((r.trim().parse().ok()?, c.trim().parse().ok()?)))
        .filter(|&(r, c): &(usize, usize)| r > 0 && c > 0);
    parsed.ok_or_else(|| usage(format!("--grid expects ROWSxCOLS, got `{raw}`")))
}

pub fn probe(args: ProbeArgs, argv: &[String]) -> CliResult {
    let cfg = resolve_config(&args.config)?;
    log_config(&cfg);
    let img = load(&args.input)?;
    let (h, w) = img.dims();
    let probes: Vec<PixelCoord> = if args.probes.is_empty() {
        let (rows, cols) = parse_grid(&args.grid)?;
        probe_grid(h, w, rows, cols)
    } else {
        args.probes
            .iter()
            .map(|p| parse_probe(p))
            .collect::<CliResult<_>>()?
    };
    if let Some(p) = probes.iter().find(|p| p.row >= h || p.col >= w) {
        return Err(usage(format!(
            "probe ({}, {}) is outside the {h}x{w} image",
            p.row, p.col
        )));
    }
    let opts = ProbeOptions {
        top_k: args.top_k,
        min_magnitude: args.min_magnitude,
        include_self: !args.exclude_self,
    };

    let session = ProbeSession::new(&img, &cfg)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("running pipeline on {}", args.input.display()))?;
    if let Some(&t) = args.iterations.iter().find(|&&t| t >= session.steps()) {
        return Err(usage(format!(
            "iteration {t} is not probeable: the run recorded {} reflectance steps",
            session.steps()
        )));
    }
    let jobs: Vec<(usize, PixelCoord)> = args
        .iterations
        .iter()
        .flat_map(|&t| probes.iter().map(move |&p| (t, p)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(t, p)| session.probe(t, p, &opts))
        .collect::<Result<Vec<_>, PosthocError>>()
        .map_err(anyhow::Error::from)?;

    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut heatmaps = Vec::new();
    for (&(t, p), res) in jobs.iter().zip(&results) {
        log(
            "probe",
            &[
                ("t", t.to_string()),
                ("row", p.row.to_string()),
                ("col", p.col.to_string()),
                ("edges", res.edges.len().to_string()),
                ("delta_max", format!("{:.6e}", res.delta.max())),
            ],
        );
        for e in &res.edges {
            if seen.insert((e.t, e.from, e.to)) {
                edges.push(*e);
            }
        }
        if let Some(dir) = &args.heatmaps {
            let path = dir.join(format!("t{t}_r{}_c{}.png", p.row, p.col));
            save(&delta_heatmap(&res.delta), &path)?;
            heatmaps.push(path);
        }
    }
    let graph = InfluenceGraph {
        image: files::file_stem(&args.input),
        config_hash: cfg.hash(),
        edges,
    };
    files::write_text(&args.output, &(graph.to_json_pretty() + "\n"))?;
    let mut manifest = Manifest::new("probe", argv).with_config(&cfg);
    manifest.input(&args.input)?;
    manifest.output(&args.output);
    if let Some(dot) = &args.dot {
        files::write_text(dot, &graph.to_dot())?;
        manifest.output(dot);
    }
    heatmaps.iter().for_each(|p| manifest.output(p));
    manifest.extra.insert(
        "probe".into(),
        serde_json::json!({
            "probes": probes.iter().map(|p| [p.row, p.col]).collect::<Vec<_>>(),
            "iterations": args.iterations,
            "top_k": opts.top_k,
            "min_magnitude": opts.min_magnitude,
            "include_self": opts.include_self,
        }),
    );
    manifest.write(&args.output.with_extension("manifest.json"))?;
    log("done", &[("edges", graph.edges.len().to_string())]);
    Ok(())
}
