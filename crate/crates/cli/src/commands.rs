use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kinflow::config::RunConfig;
use kinflow::kinematics::{self, FeatureKind};
use kinflow::model::{self, FlowModel};
use kinflow::preprocess;
use kinflow::scoring::{self, ScoredVideo};
use kinflow::skeleton::DatasetManifest;
use kinflow::synth::{self, DatasetConfig};
use kinflow::{metrics, svg, Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::{EvalArgs, ExtractArgs, GenArgs, ScoreArgs, Shared, TrainArgs};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Video and person ids are free text; file names keep only a safe subset.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn resolve(shared: &Shared) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &shared.config {
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            cfg = serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        } else {
            cfg.merge_file(path)?;
        }
    }
    if let Some(v) = shared.variant {
        cfg.variant = v;
    }
    if let Some(s) = shared.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn write_effective_config(dir: &Path, command: &str, config: serde_json::Value, paths: serde_json::Value) -> Result<()> {
    let doc = json!({
        "kinflow_version": kinflow::VERSION,
        "model_format_version": model::FORMAT_VERSION,
        "command": command,
        "config": config,
        "paths": paths,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("config serializes");
    text.push('\n');
    write_file(&dir.join("effective_config.json"), &text)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn gen(args: GenArgs) -> Result<()> {
    let cfg = DatasetConfig {
        n_train: args.train,
        n_test_normal: args.normal,
        n_test_anomalous: args.anomalous,
        kinds: args.kinds,
        track_len: args.len,
        seed: args.seed,
    };
    create_dir(&args.out)?;
    let (data, written) = synth::generate_dataset(&args.out, &cfg)?;
    write_effective_config(
        &args.out,
        "gen",
        serde_json::to_value(&cfg).expect("config serializes"),
        json!({
            "train_manifest": written.train_manifest,
            "test_manifest": written.test_manifest,
        }),
    )?;
    eprintln!(
        "wrote {} train and {} test tracks to {}",
        data.train.tracks.len(),
        data.test.tracks.len(),
        args.out.display()
    );
    Ok(())
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let cfg = resolve(&args.shared)?;
    cfg.validate()?;
    let dataset = DatasetManifest::load(&args.manifest)?;
    create_dir(&args.out)?;
    let all = [FeatureKind::Stride, FeatureKind::Displacement, FeatureKind::NeckDisplacement];
    for track in &dataset.tracks {
        let columns: Vec<Option<Vec<f64>>> = all
            .iter()
            .map(|&kind| {
                if !cfg.variant.features().contains(&kind) {
                    return Ok(None);
                }
                let raw = kinematics::feature_series(track, kind, &cfg.kinematics)?.values;
                Ok(Some(if args.smoothed {
                    preprocess::clean_series(&raw, &cfg.preprocess)
                } else {
                    raw
                }))
            })
            .collect::<Result<_>>()?;
        let path = args
            .out
            .join(format!("{}__{}.csv", file_stem(&track.video_id), file_stem(&track.person_id)));
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "frame,stride,displacement,neck_displacement")?;
            for t in 0..track.len() {
                write!(out, "{}", track.start_frame + t)?;
                for col in &columns {
                    match col {
                        Some(v) => write!(out, ",{}", v[t])?,
                        None => write!(out, ",")?,
                    }
                }
                writeln!(out)?;
            }
            out.flush()
        };
        write().map_err(|e| io_err(&path, e))?;
    }
    write_effective_config(
        &args.out,
        "extract",
        serde_json::to_value(&cfg).expect("config serializes"),
        json!({ "manifest": args.manifest, "smoothed": args.smoothed }),
    )?;
    eprintln!("wrote {} feature files to {}", dataset.tracks.len(), args.out.display());
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&args.shared)?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.validate()?;
    let dataset = DatasetManifest::load(&args.manifest)?;
    let fit = model::fit(&dataset.tracks, cfg.variant, &cfg.kinematics, &cfg.preprocess, &cfg.train)?;
    create_dir(&parent_dir(&args.out))?;
    fit.model.save(&args.out)?;
    if let Some(path) = &args.history {
        create_dir(&parent_dir(path))?;
        let mut text = String::from("epoch,mean_nll,seconds\n");
        for e in &fit.history {
            text.push_str(&format!("{},{},{}\n", e.epoch, e.mean_nll, e.seconds));
        }
        write_file(path, &text)?;
    }
    write_effective_config(
        &parent_dir(&args.out),
        "train",
        serde_json::to_value(&cfg).expect("config serializes"),
        json!({ "manifest": args.manifest, "model": args.out, "history": args.history }),
    )?;
    eprintln!(
        "variant {}: {} segments, param_count {}, NLL {:.4} -> {:.4}",
        cfg.variant,
        fit.n_segments,
        fit.model.param_count,
        fit.initial_nll,
        fit.history.last().map_or(fit.initial_nll, |e| e.mean_nll)
    );
    println!(
        "{}",
        json!({
            "model": args.out,
            "variant": cfg.variant,
            "param_count": fit.model.param_count,
            "n_segments": fit.n_segments,
            "initial_nll": fit.initial_nll,
            "final_nll": fit.history.last().map(|e| e.mean_nll),
        })
    );
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("KINFLOW_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("KINFLOW_THREADS must be a positive integer, got {raw:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

pub fn score(args: ScoreArgs) -> Result<()> {
    let mut cfg = resolve(&args.shared)?;
    if let Some(f) = args.fill {
        cfg.fill = f;
    }
    let model = FlowModel::load(&args.model)?;
    if let Some(v) = args.shared.variant {
        model.ensure_variant(v)?;
    }
    let dataset = DatasetManifest::load(&args.manifest)?;
    let groups = dataset.tracks_by_video();
    let mut videos: Vec<(&str, Vec<_>)> = groups;
    // Videos with a frame count but no tracks are scored as fully uncovered.
    for id in dataset.frame_counts.keys() {
        if !videos.iter().any(|(v, _)| v == id) {
            videos.push((id.as_str(), Vec::new()));
        }
    }
    let pool = thread_pool()?;
    let fill = cfg.fill;
    let scored: Vec<ScoredVideo> = pool.install(|| {
        videos
            .par_iter()
            .map(|(video, tracks)| {
                scoring::score_video(&model, video, tracks, dataset.frame_counts[*video], fill)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    create_dir(&args.out)?;
    for video in &scored {
        video.save_csv(args.out.join(format!("{}.csv", file_stem(&video.video_id))))?;
    }
    if let Some(dir) = &args.svg {
        create_dir(dir)?;
        for video in &scored {
            let labels = dataset.labels.iter().find(|l| l.video_id == video.video_id);
            write_file(
                &dir.join(format!("{}.svg", file_stem(&video.video_id))),
                &svg::render_scores(video, labels),
            )?;
        }
    }
    cfg.variant = model.variant;
    cfg.kinematics = model.kinematics;
    cfg.preprocess = model.preprocess;
    write_effective_config(
        &args.out,
        "score",
        serde_json::to_value(&cfg).expect("config serializes"),
        json!({ "manifest": args.manifest, "model": args.model, "svg": args.svg }),
    )?;
    eprintln!("scored {} videos into {}", scored.len(), args.out.display());
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let dataset = DatasetManifest::load(&args.manifest)?;
    if dataset.labels.is_empty() {
        return Err(Error::Validation(format!(
            "manifest {} lists no label files",
            args.manifest.display()
        )));
    }
    let scored = dataset
        .labels
        .iter()
        .map(|l| ScoredVideo::load_csv(&l.video_id, args.scores.join(format!("{}.csv", file_stem(&l.video_id)))))
        .collect::<Result<Vec<_>>>()?;
    let report = metrics::evaluate(&scored, &dataset.labels)?;
    if let Some(path) = &args.roc {
        create_dir(&parent_dir(path))?;
        let (s, l) = metrics::concatenate(&scored, &dataset.labels)?;
        let mut text = String::from("fpr,tpr,threshold\n");
        for p in metrics::roc_curve(&s, &l)? {
            text.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
        }
        write_file(path, &text)?;
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    if let Some(path) = &args.report {
        create_dir(&parent_dir(path))?;
        write_file(path, &text)?;
    }
    // With neither output file, eval only prints, so there is nowhere to put the config.
    if let Some(dir) = args.report.as_deref().or(args.roc.as_deref()).map(parent_dir) {
        write_effective_config(
            &dir,
            "eval",
            json!({}),
            json!({ "manifest": args.manifest, "scores": args.scores, "roc": args.roc, "report": args.report }),
        )?;
    }
    print!("{text}");
    Ok(())
}
