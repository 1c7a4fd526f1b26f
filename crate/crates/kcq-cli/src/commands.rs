//! Subcommand implementations. Each returns `kcq::Result<()>`; the binary
//! maps error variants onto process exit codes.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kcq::dynamics::{integrate, QoISpec};
use kcq::estimators::{nonconditional_stats, weighted_kde, KcqResult};
use kcq::measurement::{simulate_measurements, MeasurementSet};
use kcq::oracle::{mc_sample_database, McConfig};
use kcq::pipeline::{
    load_database, offline_generate, online_quantify, store_database, ResponseDatabase, RunConfig,
};
use kcq::{Error, Result};

use crate::config::{ConfigMap, CONFIG_HEADER};
use crate::csvio::{read_measurements, read_table, write_measurements, write_table, Table};
use crate::plot::{band_plot, pdf_plot};

/// Fixed seeds for the bundled examples; everything downstream is a pure
/// function of these.
const TRUTH_SEED: u64 = 2024;
const MEASUREMENT_SEED: u64 = 11;
const ORACLE_SEED: u64 = 123;

pub fn cmd_offline(config_path: &Path, sets: &[String], out: &Path) -> Result<()> {
    let config = ConfigMap::load(config_path, sets)?.to_run_config(Some(out.to_path_buf()))?;
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let db = offline_generate(&config)?;
    println!(
        "offline: system {}, {} samples x {} steps, {} QoI + {} sensor channels, {:.1} s",
        db.provenance.system,
        db.n(),
        db.n_steps(),
        db.qoi_channels.len(),
        db.sensor_channels.len(),
        started.elapsed().as_secs_f64()
    );
    println!("database written to {}", out.display());
    Ok(())
}

pub fn cmd_mc_reference(
    config_path: &Path,
    sets: &[String],
    n_mc: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let config = ConfigMap::load(config_path, sets)?.to_run_config(None)?;
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let db = mc_sample_database(&config, &McConfig { n_mc, seed })?;
    store_database(&db, out)?;
    println!(
        "mc-reference: system {}, {} pseudo-random samples x {} steps, {:.1} s",
        db.provenance.system,
        db.n(),
        db.n_steps(),
        started.elapsed().as_secs_f64()
    );
    println!("database written to {}", out.display());
    Ok(())
}

/// Shared online stage: writes `kcq_timeseries.csv`, one `kcq_pdf_<k>.csv`
/// per step, and the SVG figures (rendered from the just-written CSVs, never
/// from in-memory state).
pub fn quantify_to_dir(
    db: &ResponseDatabase,
    meas: &MeasurementSet,
    qoi: &QoISpec,
    steps: &[usize],
    n_k: usize,
    grid_points: usize,
    out: &Path,
) -> Result<Vec<KcqResult>> {
    for &k in steps {
        if k == 0 || k > db.n_steps() {
            return Err(Error::Config(format!(
                "step {k} is outside the database horizon 1..{}",
                db.n_steps()
            )));
        }
        if k > meas.max_step() {
            return Err(Error::Config(format!(
                "step {k} is beyond the measurement record (last step {})",
                meas.max_step()
            )));
        }
    }
    std::fs::create_dir_all(out)?;
    let results = online_quantify(db, meas, qoi, steps, n_k, grid_points)?;
    let channel = db.qoi_channel(qoi)?;
    let prior_w = &db.sample_set.weights;

    let mut ts = Table::new(&[
        "step",
        "time",
        "kcq_mean",
        "kcq_sd",
        "nmc_mean",
        "nmc_sd",
        "ess",
        "bandwidth",
    ]);
    for r in &results {
        let base = nonconditional_stats(db, qoi, r.step, grid_points)?;
        ts.push(vec![
            r.step as f64,
            db.times[r.step],
            r.mean,
            r.sd,
            base.mean,
            base.sd,
            r.ess,
            r.bandwidth,
        ]);

        // Non-conditional density re-evaluated on the conditional grid so the
        // two columns share an abscissa.
        let g: Vec<f64> = channel.values.column(r.step).iter().copied().collect();
        let nmc_pdf = weighted_kde(&r.pdf_grid, &g, prior_w, base.bandwidth)?;
        let mut pdf = Table::new(&["grid", "density", "nonconditional_density"]);
        for i in 0..r.pdf_grid.len() {
            pdf.push(vec![r.pdf_grid[i], r.pdf_values[i], nmc_pdf[i]]);
        }
        write_table(&out.join(format!("kcq_pdf_{}.csv", r.step)), &pdf)?;
    }
    write_table(&out.join("kcq_timeseries.csv"), &ts)?;

    let ts_back = read_table(&out.join("kcq_timeseries.csv"))?;
    std::fs::write(
        out.join("band.svg"),
        band_plot(&ts_back, &qoi.label())?,
    )?;
    for &k in steps {
        let pdf_back = read_table(&out.join(format!("kcq_pdf_{k}.csv")))?;
        std::fs::write(
            out.join(format!("pdf_{k}.svg")),
            pdf_plot(&pdf_back, &qoi.label())?,
        )?;
    }
    Ok(results)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_quantify(
    db_path: &Path,
    meas_path: &Path,
    qoi_label: &str,
    steps: &[usize],
    n_k: usize,
    grid_points: usize,
    noise_sd: Vec<f64>,
    noise_mean: Vec<f64>,
    out: &Path,
) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::Config("at least one --steps entry is required".into()));
    }
    let db = load_database(db_path)?;
    let noise_mean = if noise_mean.is_empty() {
        vec![0.0; noise_sd.len()]
    } else {
        noise_mean
    };
    let meas = read_measurements(meas_path, noise_mean, noise_sd)?;
    let qoi = QoISpec::parse(qoi_label)?;
    let results = quantify_to_dir(&db, &meas, &qoi, steps, n_k, grid_points, out)?;
    for r in &results {
        println!(
            "step {:>5}  t={:<8} mean {:+.6e}  sd {:.6e}  ess {:.1}",
            r.step, db.times[r.step], r.mean, r.sd, r.ess
        );
    }
    println!("results written to {}", out.display());
    Ok(())
}

pub fn cmd_compare(
    db_path: &Path,
    reference_path: &Path,
    qoi_label: &str,
    steps: &[usize],
    grid_points: usize,
    out: &Path,
) -> Result<()> {
    let db = load_database(db_path)?;
    let reference = load_database(reference_path)?;
    let qoi = QoISpec::parse(qoi_label)?;
    std::fs::create_dir_all(out)?;
    let mut table = Table::new(&[
        "step", "time", "mean", "ref_mean", "re_mean", "sd", "ref_sd", "re_sd",
    ]);
    println!("{:>6} {:>10} {:>13} {:>13} {:>9} {:>13} {:>13} {:>9}",
        "step", "time", "mean", "ref_mean", "re_mean", "sd", "ref_sd", "re_sd");
    for &k in steps {
        if k == 0 || k > db.n_steps() || k > reference.n_steps() {
            return Err(Error::Config(format!(
                "step {k} is outside both database horizons"
            )));
        }
        let a = nonconditional_stats(&db, &qoi, k, grid_points)?;
        let b = nonconditional_stats(&reference, &qoi, k, grid_points)?;
        let re_mean = (a.mean - b.mean).abs() / b.mean.abs();
        let re_sd = (a.sd - b.sd).abs() / b.sd;
        println!(
            "{:>6} {:>10.4} {:>13.4e} {:>13.4e} {:>8.3}% {:>13.4e} {:>13.4e} {:>8.3}%",
            k, db.times[k], a.mean, b.mean, 100.0 * re_mean, a.sd, b.sd, 100.0 * re_sd
        );
        table.push(vec![
            k as f64,
            db.times[k],
            a.mean,
            b.mean,
            re_mean,
            a.sd,
            b.sd,
            re_sd,
        ]);
    }
    write_table(&out.join("compare.csv"), &table)?;
    Ok(())
}

struct ExamplePreset {
    config_lines: Vec<(&'static str, String)>,
    probe_steps: Vec<usize>,
    n_mc: usize,
}

fn example_preset(name: &str, scale: &str) -> Result<ExamplePreset> {
    let full = match scale {
        "full" => true,
        "desk" => false,
        other => {
            return Err(Error::Config(format!(
                "unknown scale '{other}', valid scales: full, desk"
            )))
        }
    };
    match name {
        "sdof" => Ok(ExamplePreset {
            config_lines: vec![
                ("system", "sdof".into()),
                ("n", "500".into()),
                ("halton_seed", "42".into()),
                ("probe_seed", "7".into()),
                ("dt", "0.05".into()),
                ("n_steps", "200".into()),
                ("qois", "disp_dof0,vel_dof0".into()),
                ("sensors", "vel_dof0".into()),
                ("noise_sd", "0.03".into()),
                ("n_k", "2".into()),
            ],
            probe_steps: vec![50, 100, 150, 200],
            n_mc: if full { 100_000 } else { 20_000 },
        }),
        "beam" => {
            let (system, n, n_steps, n_mc) = if full {
                ("beam10", 600, 400, 10_000)
            } else {
                ("beam4", 100, 100, 2_000)
            };
            Ok(ExamplePreset {
                config_lines: vec![
                    ("system", system.into()),
                    ("n", n.to_string()),
                    ("halton_seed", "42".into()),
                    ("probe_seed", "7".into()),
                    ("dt", "0.001".into()),
                    ("n_steps", n_steps.to_string()),
                    ("qois", "disp_x3".into()),
                    ("sensors", "disp_x0.9,disp_x2.1".into()),
                    ("noise_sd", "0.005,0.005".into()),
                    ("n_k", "1".into()),
                ],
                probe_steps: (1..=4).map(|q| q * n_steps / 4).collect(),
                n_mc,
            })
        }
        other => Err(Error::Config(format!(
            "unknown example '{other}', valid names: sdof, beam"
        ))),
    }
}

fn truth_measurements(config: &RunConfig, seed: u64) -> Result<(MeasurementSet, Vec<f64>)> {
    let (system, space) = config.system.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = space.sample(&mut rng);
    let u0 = system.initial_state(&alpha);
    let truth = integrate(
        &system,
        &alpha,
        &u0,
        config.dt,
        config.n_steps,
        config.tol,
        config.max_iter,
    )?;
    let meas = simulate_measurements(&truth, &config.sensors, &system, MEASUREMENT_SEED)?;
    Ok((meas, truth.times))
}

pub fn cmd_example(name: &str, scale: &str, out: &Path) -> Result<()> {
    let preset = example_preset(name, scale)?;
    std::fs::create_dir_all(out)?;

    // Persist the config, then go through the regular file parser so the
    // example exercises exactly the artifacts a manual run would use.
    let config_path = out.join("config.cfg");
    let mut text = format!("{CONFIG_HEADER}\n");
    for (k, v) in &preset.config_lines {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(&config_path, text)?;
    let db_dir = out.join("db");
    let config = ConfigMap::load(&config_path, &[])?.to_run_config(Some(db_dir.clone()))?;

    println!("[1/4] truth simulation and synthetic measurements");
    let (meas, times) = truth_measurements(&config, TRUTH_SEED)?;
    let meas_path = out.join("measurements.csv");
    write_measurements(&meas_path, &meas, &times)?;
    let meas = read_measurements(
        &meas_path,
        config.sensors.noise_mean.clone(),
        config.sensors.noise_sd.clone(),
    )?;

    println!("[2/4] offline database generation ({} samples)", config.n);
    std::fs::create_dir_all(&db_dir)?;
    let db = offline_generate(&config)?;

    println!("[3/4] pseudo-random reference ({} samples)", preset.n_mc);
    let oracle = mc_sample_database(
        &config,
        &McConfig {
            n_mc: preset.n_mc,
            seed: ORACLE_SEED,
        },
    )?;

    println!("[4/4] online conditional quantification");
    let mut summary = Table::new(&[
        "qoi_index", "step", "time", "kcq_mean", "ref_mean", "re_mean", "kcq_sd", "ref_sd",
        "re_sd",
    ]);
    for (qi, qoi) in config.qois.iter().enumerate() {
        let dir = out.join(qoi.label());
        let results = quantify_to_dir(
            &db,
            &meas,
            qoi,
            &preset.probe_steps,
            config.n_k,
            config.grid_points,
            &dir,
        )?;
        let reference = online_quantify(
            &oracle,
            &meas,
            qoi,
            &preset.probe_steps,
            config.n_k,
            config.grid_points,
        )?;
        println!();
        println!("QoI {}", qoi.label());
        println!(
            "{:>6} {:>8} {:>13} {:>13} {:>9} {:>13} {:>13} {:>9}",
            "step", "time", "kcq_mean", "ref_mean", "re_mean", "kcq_sd", "ref_sd", "re_sd"
        );
        for (r, o) in results.iter().zip(&reference) {
            let re_mean = (r.mean - o.mean).abs() / o.mean.abs();
            let re_sd = (r.sd - o.sd).abs() / o.sd;
            println!(
                "{:>6} {:>8.3} {:>13.4e} {:>13.4e} {:>8.3}% {:>13.4e} {:>13.4e} {:>8.3}%",
                r.step,
                db.times[r.step],
                r.mean,
                o.mean,
                100.0 * re_mean,
                r.sd,
                o.sd,
                100.0 * re_sd
            );
            summary.push(vec![
                qi as f64,
                r.step as f64,
                db.times[r.step],
                r.mean,
                o.mean,
                re_mean,
                r.sd,
                o.sd,
                re_sd,
            ]);
        }
    }
    write_table(&out.join("summary.csv"), &summary)?;
    println!();
    println!("artifacts written to {}", out.display());
    Ok(())
}
