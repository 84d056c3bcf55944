//! Subcommand implementations. Each returns `Ok(true)` when every checked
//! inequality holds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use vskimg_core::dataio::{
    export_image, phantom_to_image, read_image_csv, read_visibility_csv, write_visibility_csv, Phantom,
};
use vskimg_core::landweber::{theorem2_check, CheckStatus, Theorem2Record};
use vskimg_core::parametric::{
    bound_report, chain_ledgers, chain_reconstruct, continuity_gap, forward_channel, mean_cross_channel_variation,
    reconstruct_channel, scaling_from_image, synthetic_sequence, ChainResult, ChannelReconstruction,
};
use vskimg_core::{
    ChannelSequence, ComplexScaling, EnergyChannel, ImageFormat, ImageGrid, ScalingStrategy, VisibilitySet,
};

use crate::config::{channel_file, RunConfig};

/// Writes `contents` to `dir/name`.
fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Config echo preceded by comment lines naming the command and its inputs.
/// The body is a valid `--config` file.
fn write_manifest(dir: &Path, cfg: &RunConfig, command: &str, inputs: &[String]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# vskimg {} {command}", env!("CARGO_PKG_VERSION"))?;
    for input in inputs {
        writeln!(text, "# input {input}")?;
    }
    text.push_str(&cfg.to_toml()?);
    write_text(dir, "manifest.toml", &text)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn export_both(image: &ImageGrid, dir: &Path, stem: &str, raster: ImageFormat) -> Result<()> {
    export_image(image, &dir.join(format!("{stem}.csv")), ImageFormat::Csv)?;
    export_image(image, &dir.join(format!("{stem}.{}", raster.extension())), raster)?;
    Ok(())
}

fn e(x: f64) -> String {
    format!("{x:.16e}")
}

/// Truth image of the configured phantom in the first configured channel.
fn truth_trigger(cfg: &RunConfig) -> Result<ImageGrid> {
    let grid = cfg.grid()?;
    let channel = cfg.channels()?[0];
    let weight = forward_channel(&cfg.model()?, [0.0, 0.0], channel.midpoint())?.value;
    Ok(phantom_to_image(&cfg.phantom()?.scaled(weight)?, &grid))
}

fn load_image(path: &Path, cfg: &RunConfig) -> Result<ImageGrid> {
    let values = read_image_csv(path)?;
    ImageGrid::from_real(&values, cfg.grid()?).with_context(|| format!("image {}", path.display()))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let seq = synthetic_sequence(
        &cfg.phantom()?,
        &cfg.nodes()?,
        &cfg.channels()?,
        &cfg.model()?,
        &grid,
        cfg.noise()?,
    )?;
    let raster = cfg.raster_format()?;
    let mut summary = String::from("channel,e_low,e_high,weight,sigma,max_abs\n");
    for (l, (vis, truth)) in seq.visibilities.iter().zip(&seq.truth).enumerate() {
        let index = l + 1;
        write_visibility_csv(vis, &channel_file(out, "vis", index, "csv"))?;
        export_both(truth, out, &format!("truth_ch{index:02}"), raster)?;
        let ch = seq.channels[l];
        writeln!(
            summary,
            "{index},{},{},{},{},{}",
            e(ch.low()),
            e(ch.high()),
            e(seq.weights[l]),
            e(vis.sigma()[0]),
            e(vis.max_abs())
        )?;
    }
    write_text(out, "simulate_summary.csv", &summary)?;
    write_manifest(out, cfg, "simulate", &[])?;
    info!("wrote {} channels to {}", seq.channels.len(), out.display());
    Ok(true)
}

fn report_theorem2(label: &str, t: &Theorem2Record) -> bool {
    match t.status {
        CheckStatus::Holds => true,
        CheckStatus::Inconclusive => {
            warn!("{label}: iteration cap reached; stopping-step bound not asserted");
            true
        }
        CheckStatus::Violated => {
            warn!(
                "{label}: stopping-step bound violated (lhs {:.3e} > delta {:.3e})",
                t.lhs, t.delta
            );
            false
        }
    }
}

pub fn reconstruct(cfg: &RunConfig, vis_path: &Path, scaling_image: Option<&Path>, out: &Path) -> Result<bool> {
    let domain = cfg.domain()?;
    let vis = read_visibility_csv(vis_path)?;
    let scaling = match scaling_image {
        Some(p) => scaling_from_image(&load_image(p, cfg)?, vis.nodes(), &domain)?,
        None => ComplexScaling::plain(vis.len(), &domain),
    };
    let rec = reconstruct_channel(&vis, &scaling, &cfg.kernel()?, &cfg.landweber()?, &domain)?;
    let raster = cfg.raster_format()?;
    export_both(&rec.run.image, out, "image", raster)?;
    rec.run.trace.write_csv(&out.join("trace.csv"))?;
    let t2 = theorem2_check(&rec.run.trace);
    let min_real = rec.run.image.min_real();
    let mut summary =
        String::from("steps,stop_reason,stopping_bound_status,stopping_bound_lhs,delta,interp_residual,min_real\n");
    writeln!(
        summary,
        "{},{},{},{},{},{},{}",
        rec.run.trace.len(),
        rec.run.trace.stop_reason.name(),
        t2.status.name(),
        e(t2.lhs),
        e(t2.delta),
        e(rec.interpolant.residual()),
        e(min_real)
    )?;
    write_text(out, "reconstruct_summary.csv", &summary)?;
    let mut inputs = vec![file_name(vis_path)];
    inputs.extend(scaling_image.map(file_name));
    write_manifest(out, cfg, "reconstruct", &inputs)?;
    Ok(report_theorem2("reconstruct", &t2) && min_real >= 0.0)
}

/// Visibility files `vis_ch*.csv` in `dir`, sorted by name.
fn read_vis_dir(dir: &Path) -> Result<(Vec<EnergyChannel>, Vec<VisibilitySet>, Vec<String>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            let name = file_name(p);
            name.starts_with("vis_ch") && name.ends_with(".csv")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no vis_ch*.csv files in {}", dir.display());
    }
    let mut channels = Vec::new();
    let mut vis = Vec::new();
    for p in &paths {
        let v = read_visibility_csv(p)?;
        let ch = v
            .channel()
            .with_context(|| format!("{} has no energy channel columns", p.display()))?;
        channels.push(ch);
        vis.push(v);
    }
    Ok((channels, vis, paths.iter().map(|p| file_name(p)).collect()))
}

fn chain_inputs(cfg: &RunConfig, vis_dir: Option<&Path>) -> Result<(ChannelSequence, Vec<String>)> {
    let trigger = cfg
        .trigger
        .as_deref()
        .context("chain needs a trigger image: pass --trigger truth or --trigger <image.csv>")?;
    let (channels, vis, mut inputs) = match vis_dir {
        Some(dir) => read_vis_dir(dir)?,
        None => {
            let seq = synthetic_sequence(
                &cfg.phantom()?,
                &cfg.nodes()?,
                &cfg.channels()?,
                &cfg.model()?,
                &cfg.grid()?,
                cfg.noise()?,
            )?;
            (seq.channels, seq.visibilities, Vec::new())
        }
    };
    let trigger_image = if trigger == "truth" {
        truth_trigger(cfg)?
    } else {
        let p = Path::new(trigger);
        inputs.push(file_name(p));
        load_image(p, cfg)?
    };
    Ok((ChannelSequence::new(channels, vis, trigger_image)?, inputs))
}

fn run_of(result: &ChainResult, l: usize) -> Option<&ChannelReconstruction> {
    if l == 0 {
        result.anchor.as_ref()
    } else {
        result.outputs[l].reconstruction.as_ref()
    }
}

pub fn chain(cfg: &RunConfig, vis_dir: Option<&Path>, out: &Path) -> Result<bool> {
    let (seq, inputs) = chain_inputs(cfg, vis_dir)?;
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let lw = cfg.landweber()?;
    let strategy = if cfg.plain_kernel {
        ScalingStrategy::Constant(1.0)
    } else {
        ScalingStrategy::Chained
    };
    let result = chain_reconstruct(&seq, &kernel, &lw, &domain, strategy)?;
    let ledgers = chain_ledgers(&result, &lw, &domain)?;
    let raster = cfg.raster_format()?;

    let mut ok = true;
    let mut summary = String::from(
        "channel,e_low,e_high,steps,stop_reason,stopping_bound_status,stopping_bound_lhs,delta,interp_residual,\
         min_real,distance_to_previous,ledger_lhs,ledger_rhs,ledger_holds,p_minus_ratio\n",
    );
    for (l, output) in result.outputs.iter().enumerate() {
        let index = l + 1;
        export_both(&output.image, out, &format!("image_ch{index:02}"), raster)?;
        let ch = output.channel;
        write!(summary, "{index},{},{}", e(ch.low()), e(ch.high()))?;
        match run_of(&result, l) {
            Some(rec) => {
                rec.run.trace.write_csv(&channel_file(out, "trace", index, "csv"))?;
                let t2 = theorem2_check(&rec.run.trace);
                ok &= report_theorem2(&format!("channel {index}"), &t2);
                write!(
                    summary,
                    ",{},{},{},{},{},{}",
                    rec.run.trace.len(),
                    rec.run.trace.stop_reason.name(),
                    t2.status.name(),
                    e(t2.lhs),
                    e(t2.delta),
                    e(rec.interpolant.residual())
                )?;
            }
            None => summary.push_str(",,,,,,"),
        }
        let min_real = output.image.min_real();
        if l > 0 && min_real < 0.0 {
            warn!("channel {index}: negative pixel {min_real:.3e}");
            ok = false;
        }
        write!(summary, ",{}", e(min_real))?;
        if l > 0 {
            let ledger = &ledgers[l - 1];
            ledger.write_csv(&channel_file(out, "ledger", index, "csv"))?;
            if !ledger.holds() {
                warn!("channel {index}: stability ledger violated");
                ok = false;
            }
            let last = ledger.final_row();
            writeln!(
                summary,
                ",{},{},{},{},{}",
                e(output.image.distance(&result.outputs[l - 1].image)?),
                e(last.lhs),
                e(last.rhs()),
                ledger.holds(),
                e(ledger.p_minus_ratio())
            )?;
        } else {
            summary.push_str(",,,,,\n");
        }
    }
    write_text(out, "chain_summary.csv", &summary)?;

    let images = result.images();
    let mut report = String::new();
    writeln!(
        report,
        "strategy = \"{}\"",
        if cfg.plain_kernel { "plain" } else { "chained" }
    )?;
    writeln!(report, "channels = {}", images.len())?;
    writeln!(
        report,
        "mean_cross_channel_l2 = {}",
        e(mean_cross_channel_variation(&images)?)
    )?;
    if !cfg.plain_kernel {
        let plain = chain_reconstruct(&seq, &kernel, &lw, &domain, ScalingStrategy::Constant(1.0))?;
        writeln!(
            report,
            "mean_cross_channel_l2_plain = {}",
            e(mean_cross_channel_variation(&plain.images())?)
        )?;
    }
    writeln!(report, "ledgers_hold = {}", ledgers.iter().all(|l| l.holds()))?;
    writeln!(report, "all_checks_hold = {ok}")?;
    write_text(out, "chain_report.toml", &report)?;
    write_manifest(out, cfg, "chain", &inputs)?;
    Ok(ok)
}

pub fn diagnose(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let domain = cfg.domain()?;
    let nodes = cfg.nodes()?;
    let kernel = cfg.kernel()?;
    let model = cfg.model()?;
    let channels = cfg.channels()?;
    if channels.len() < 2 {
        bail!("diagnose needs at least two channels");
    }
    let w1 = forward_channel(&model, [0.0, 0.0], channels[0].midpoint())?.value;
    let w2 = forward_channel(&model, [0.0, 0.0], channels[1].midpoint())?.value;
    let width = cfg.window_width_cells * grid.cell_size();

    let mut ok = true;
    let mut csv = String::from(
        "instance,seed,part,sup_term,nodal_inf_norm,lebesgue_constant,min_slack,holds,\
         nu,tail,lhs_proxy,stability_holds,interp_residual\n",
    );
    for k in 0..cfg.instances {
        let seed = cfg.seed.wrapping_add(k as u64);
        let phantom = Phantom::random_on(&grid, cfg.phantom_flux, seed)?;
        let previous = phantom_to_image(&phantom.scaled(w1)?, &grid);
        let r = bound_report(
            &previous,
            &phantom.scaled(w2)?,
            &nodes,
            &kernel,
            &domain,
            cfg.window_c_rel,
            width,
        )?;
        ok &= r.holds();
        for (name, p) in ["re", "im"].iter().zip(&r.parts) {
            writeln!(
                csv,
                "{k},{seed},{name},{},{},{},{},{},{},{},{},{},{}",
                e(p.sup_term),
                e(p.nodal_inf_norm),
                e(p.lebesgue_constant),
                e(p.min_slack),
                p.holds(),
                e(r.theorem1.nu),
                e(r.theorem1.tail),
                e(r.theorem1.lhs_proxy),
                r.theorem1.holds(),
                e(r.residual)
            )?;
        }
        info!("instance {k}: interpolation slack {:.3e}", r.min_interpolation_slack());
    }
    write_text(out, "bound_report.csv", &csv)?;

    let mut cont = String::from("beta_1,beta_2,u,v,gap,bound,holds\n");
    for w in channels.windows(2) {
        let (b1, b2) = (w[1].midpoint(), w[0].midpoint());
        for u in [[0.0, 0.0], [cfg.outer_radius, 0.0]] {
            let c = continuity_gap(&model, u, b1, b2)?;
            ok &= c.holds();
            writeln!(
                cont,
                "{},{},{},{},{},{},{}",
                e(b1),
                e(b2),
                e(u[0]),
                e(u[1]),
                e(c.gap),
                e(c.bound),
                c.holds()
            )?;
        }
    }
    write_text(out, "continuity_report.csv", &cont)?;
    write_manifest(out, cfg, "diagnose", &[])?;
    Ok(ok)
}
