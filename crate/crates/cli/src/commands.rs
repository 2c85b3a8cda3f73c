use std::path::{Path, PathBuf};
use std::time::Instant;

use uwno_core::bias::{run_bias_demo, BiasConfig};
use uwno_core::data::container::Record;
use uwno_core::data::DatasetBundle;
use uwno_core::model::{load_checkpoint, SavedModel, UwnoModel};
use uwno_core::plot::{heatmap_svg, line_svg, Table};
use uwno_core::train::{evaluate, evaluate_per_sample, train as run_training, TrainConfig, TrainOutputs};
use uwno_core::wavelet::{self_check, WaveletFilter};

use crate::config::{resolve_seed, GenSpec, RunConfig};
use crate::error::{CliError, CliResult, PROPERTY, SHAPE};
use crate::{PlotKind, Problem, SplitName};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.uwno";
pub const SUMMARY_FILE: &str = "summary.json";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn problem_tag(p: Problem) -> &'static str {
    match p {
        Problem::Poisson => "poisson",
        Problem::Advection => "advection",
        Problem::AdvectionSpaceTime => "advection-space-time",
        Problem::Burgers => "burgers",
    }
}

#[allow(clippy::too_many_arguments)]
pub fn gen_data(
    problem: Problem,
    n: usize,
    resolution: usize,
    seed: Option<u64>,
    out: &Path,
    t_final: f64,
    nu: f64,
    nt: usize,
    dt: f64,
) -> CliResult<()> {
    let seed = resolve_seed(seed, 0)?;
    let spec = GenSpec {
        problem: problem_tag(problem).to_string(),
        n,
        resolution,
        seed,
        t_final,
        nu,
        nt,
        dt,
    };
    let bundle = spec.generate()?;
    bundle.save(out)?;
    println!(
        "{}: n={} resolution={:?} seed={} -> {}",
        bundle.problem,
        bundle.n_samples(),
        bundle.resolution(),
        seed,
        out.display()
    );
    Ok(())
}

pub fn train(config_path: &Path, seed: Option<u64>, epochs: Option<usize>, verbose: bool) -> CliResult<()> {
    let run = RunConfig::load(config_path)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let data = run.dataset(dir)?;
    let model_cfg = run.model_config(&data)?;
    let mut tc = run.train.clone();
    tc.seed = resolve_seed(seed.or(run.seed), tc.seed)?;
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    let out_dir = dir.join(&run.output_dir);
    create_dir(&out_dir)?;
    let mut model = UwnoModel::new(&model_cfg, tc.seed)?;
    let outputs = TrainOutputs {
        metrics_csv: Some(out_dir.join(METRICS_FILE)),
        checkpoint: Some(out_dir.join(CHECKPOINT_FILE)),
        checkpoint_extra: vec![
            Record::text("problem", &run.problem),
            Record::scalar_i64("seed", tc.seed as i64),
        ],
        verbose,
    };
    let started = Instant::now();
    let history = run_training(&mut model, &data, &tc, &outputs)?;
    let final_train = evaluate(&model, &data.train_split(), tc.batch_size)?;
    let final_test = evaluate(&model, &data.test_split(), tc.batch_size)?;
    let summary = serde_json::json!({
        "problem": run.problem,
        "seed": tc.seed,
        "epochs": tc.epochs,
        "parameters": model.count_parameters(),
        "baseline_wno": model_cfg.baseline_wno,
        "final_train_rel_l2": final_train,
        "final_test_rel_l2": final_test,
        "last_epoch_train_rel_l2": history.last().map(|r| r.train_rel_l2),
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&out_dir.join(SUMMARY_FILE), format!("{text}\n"))?;
    println!(
        "trained {} epochs: train {:?} test {:?} -> {}",
        tc.epochs,
        final_train,
        final_test,
        out_dir.display()
    );
    Ok(())
}

/// Checks that the checkpoint's model accepts the dataset's tensors.
fn check_compatible(model: &SavedModel, data: &DatasetBundle) -> CliResult<()> {
    let (si, so) = (data.inputs.shape(), data.outputs.shape());
    let mismatch = |msg: String| Err(CliError::new(SHAPE, msg));
    match model {
        SavedModel::Uwno(m) => {
            let c = m.config();
            let (ci, co) = (si[si.len() - 1], so[so.len() - 1]);
            if c.resolution != data.resolution() || c.in_channels != ci || c.out_channels != co {
                return mismatch(format!(
                    "checkpoint expects resolution {:?} with {} input and {} output channel(s); \
                     dataset has resolution {:?} with {ci} input and {co} output channel(s)",
                    c.resolution,
                    c.in_channels,
                    c.out_channels,
                    data.resolution()
                ));
            }
        }
        SavedModel::Identity => {
            if si != so {
                return mismatch(format!("identity model needs equal input {si:?} and output {so:?} shapes"));
            }
        }
    }
    Ok(())
}

pub fn eval(
    checkpoint: &Path,
    data_path: &Path,
    split: SplitName,
    out: Option<PathBuf>,
    batch_size: Option<usize>,
) -> CliResult<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let data = DatasetBundle::load(data_path)?;
    check_compatible(&ckpt.model, &data)?;
    let recorded = ckpt
        .extra("train_config")
        .and_then(|r| r.as_text().ok())
        .and_then(|t| serde_json::from_str::<TrainConfig>(&t).ok())
        .map(|c| c.batch_size);
    let batch_size = batch_size.or(recorded).unwrap_or_else(|| TrainConfig::default().batch_size);
    let (name, split) = match split {
        SplitName::Train => ("train", data.train_split()),
        SplitName::Test => ("test", data.test_split()),
    };
    let errors = evaluate_per_sample(ckpt.model.operator(), &split, batch_size)?;
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let out = out.unwrap_or_else(|| {
        let mut p = checkpoint.as_os_str().to_owned();
        p.push(format!(".{name}-errors.csv"));
        PathBuf::from(p)
    });
    let mut csv = String::from("sample,rel_l2\n");
    for (i, e) in errors.iter().enumerate() {
        csv.push_str(&format!("{i},{e:?}\n"));
    }
    write(&out, csv)?;
    println!("{name} mean_rel_l2 {mean:?} over {} samples -> {}", errors.len(), out.display());
    Ok(())
}

fn parse_shape(length: &str) -> CliResult<Vec<usize>> {
    let dims: Result<Vec<usize>, _> = length.split(['x', 'X']).map(|s| s.trim().parse::<usize>()).collect();
    match dims {
        Ok(d) if (1..=2).contains(&d.len()) && d.iter().all(|&v| v > 0) => Ok(d),
        _ => Err(CliError::usage(format!("length must be N or HxW with positive sizes, got {length:?}"))),
    }
}

pub fn dwt_check(
    wavelet: &str,
    length: &str,
    level: usize,
    trials: usize,
    seed: Option<u64>,
    tolerance: f64,
) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let filter = WaveletFilter::by_name(wavelet)?;
    let shape = parse_shape(length)?;
    let seed = resolve_seed(seed, 0)?;
    let report = self_check(&filter, &shape, level, trials, seed, tolerance)?;
    println!(
        "{} shape {:?} level {} trials {}: roundtrip {:.3e} energy {:.3e} linearity {:.3e}",
        filter.name, shape, level, trials, report.roundtrip, report.energy, report.linearity
    );
    match report.first_failure {
        None => {
            println!("all below {tolerance:e}");
            Ok(())
        }
        Some((trial, trial_seed)) => Err(CliError::new(
            PROPERTY,
            format!("invariant violated in trial {trial} (signal seed {trial_seed}); tolerance {tolerance:e}"),
        )),
    }
}

pub fn bias_demo(adaptive: bool, epochs: usize, seed: Option<u64>, out: &Path, threshold: f64) -> CliResult<()> {
    let seed = resolve_seed(seed, 0)?;
    let cfg = BiasConfig {
        adaptive,
        epochs,
        seed,
        ..BiasConfig::default()
    };
    let outcome = run_bias_demo(&cfg)?;
    create_dir(out)?;
    let tag = if adaptive { "on" } else { "off" };
    let title = if adaptive { "adaptive activation" } else { "fixed activation" };
    write(&out.join(format!("bias-{tag}-trajectory.csv")), outcome.trajectory_csv())?;
    write(&out.join(format!("bias-{tag}-fit.csv")), outcome.fit_csv())?;
    write(&out.join(format!("bias-{tag}-fit.svg")), outcome.fit_svg(&format!("Fit after {epochs} epochs, {title}"))?)?;
    write(
        &out.join(format!("bias-{tag}-spectrum.svg")),
        outcome.spectrum_svg(&format!("Residual spectrum, {title}"))?,
    )?;
    match outcome.epochs_to_threshold(2, threshold) {
        Some(e) => println!("adaptive {tag}: frequency-16 residual below {threshold} at epoch {e}"),
        None => println!("adaptive {tag}: frequency-16 residual not below {threshold} within {epochs} epochs"),
    }
    Ok(())
}

pub fn plot(data: &Path, kind: PlotKind, out: &Path, title: Option<String>) -> CliResult<()> {
    let text = std::fs::read_to_string(data).map_err(|e| CliError::io(data, e))?;
    let table = Table::parse(&text)?;
    let title = title.unwrap_or_else(|| data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let svg = match kind {
        PlotKind::Line => {
            let series = table.series()?;
            let y_label = if series.len() == 1 { series[0].label.clone() } else { "value".into() };
            line_svg(&title, &table.columns[0], &y_label, &series)?
        }
        PlotKind::Heatmap => {
            let (values, rows, cols) = table.grid()?;
            heatmap_svg(&title, &values, rows, cols)?
        }
    };
    write(out, svg)
}
