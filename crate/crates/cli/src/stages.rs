//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mbg_core::audio::{synth_corpus, write_wav, DatasetManifest, Waveform};
use mbg_core::eval::{
    build_features, evaluate_systems, export_nll_curves, synthesize, utterance_seed, FeatureContainer,
    SynthesisSetup,
};
use mbg_core::vocoder::{train, ModelCheckpoint, NllLog, ParentRef, TrainControl, TrainMode};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::layout::{read_text, require, write, write_provenance, Layout};

pub fn corpus_gen(cfg: &ExperimentConfig, out: &Layout, seed: u64) -> CliResult<()> {
    let (manifest, utts) = synth_corpus(&cfg.corpus, seed)?;
    let dir = out.corpus_dir();
    let mut outputs = Vec::new();
    for (entry, utt) in manifest.entries.iter().zip(&utts) {
        let path = dir.join(&entry.source);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        write_wav(&utt.waveform, &path)?;
        outputs.push(path);
    }
    write(&out.manifest(), manifest.to_text())?;
    outputs.push(out.manifest());
    write_provenance(&dir, "corpus", "corpus-gen", cfg, json!({ "corpus": seed }), &outputs)?;
    println!("corpus: {} utterances -> {}", utts.len(), out.manifest().display());
    Ok(())
}

pub fn analyze(cfg: &ExperimentConfig, out: &Layout) -> CliResult<()> {
    let manifest_path = cfg.manifest.clone().unwrap_or_else(|| out.manifest());
    require(&manifest_path, "manifest (run corpus-gen or set `manifest`)")?;
    let manifest = DatasetManifest::load(&manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    for entry in &manifest.entries {
        require(&root.join(&entry.source), &format!("audio for utterance {}", entry.id))?;
    }
    let container = build_features(&manifest, root, &cfg.lp, &cfg.surrogate)?;
    write(&out.features(), container.to_bytes())?;
    let worst = container
        .records
        .iter()
        .map(|r| r.decomposition_residual)
        .fold(0.0, f64::max);
    write_provenance(
        &out.features_dir(),
        "features",
        "analyze",
        cfg,
        json!({ "surrogate": cfg.surrogate.seed, "manifest": manifest.seed }),
        &[out.features()],
    )?;
    println!(
        "features: {} utterances, max decomposition residual {worst:.3e} -> {}",
        container.records.len(),
        out.features().display()
    );
    Ok(())
}

fn load_container(out: &Layout) -> CliResult<FeatureContainer> {
    require(&out.features(), "feature container (run analyze)")?;
    Ok(FeatureContainer::load(&out.features())?)
}

pub fn train_stage(
    cfg: &ExperimentConfig,
    out: &Layout,
    mode: TrainMode,
    parent: Option<&Path>,
    seed: u64,
) -> CliResult<()> {
    let parent = match (mode, parent) {
        (TrainMode::MbgStar, None) => {
            return Err(CliError::Usage("train --mode mbg_star requires --parent <plain checkpoint>".into()))
        }
        (TrainMode::MbgStar, Some(p)) => {
            require(p, "parent checkpoint")?;
            let ckpt = ModelCheckpoint::load(p)?;
            let reference = ParentRef {
                path: p.display().to_string(),
                sha256: ckpt.digest(),
                mode: ckpt.provenance.mode,
            };
            Some((ckpt, reference))
        }
        (_, Some(_)) => return Err(CliError::Usage(format!("--parent is only valid with mbg_star, not {mode}"))),
        (_, None) => None,
    };
    let container = load_container(out)?;
    let set = mbg_core::eval::train_set(&container, mode)?;
    let outcome = train(
        &set,
        mode,
        &cfg.net_config(),
        &cfg.train,
        seed,
        parent.as_ref().map(|(c, r)| (c, r.clone())),
        TrainControl::default(),
    )?;
    write(&out.checkpoint(mode), outcome.checkpoint.to_bytes())?;
    write(&out.nll_log(mode), outcome.log.to_csv())?;
    write_provenance(
        &out.models_dir(),
        mode.as_str(),
        "train",
        cfg,
        json!({ "train": seed, "surrogate": cfg.surrogate.seed }),
        &[out.checkpoint(mode), out.nll_log(mode)],
    )?;
    println!(
        "train {mode}: {} steps, final valid NLL {:.4} -> {}",
        outcome.checkpoint.steps_done,
        outcome.log.final_valid().unwrap_or(f64::NAN),
        out.checkpoint(mode).display()
    );
    Ok(())
}

fn load_checkpoint(out: &Layout, mode: TrainMode) -> CliResult<ModelCheckpoint> {
    let path = out.checkpoint(mode);
    require(&path, &format!("{mode} checkpoint (run train --mode {mode})"))?;
    Ok(ModelCheckpoint::load(&path)?)
}

pub fn synthesize_stage(
    cfg: &ExperimentConfig,
    out: &Layout,
    system: TrainMode,
    utt: &str,
    seed: u64,
) -> CliResult<PathBuf> {
    let container = load_container(out)?;
    let index = container
        .records
        .iter()
        .position(|r| r.id == utt)
        .ok_or_else(|| CliError::Usage(format!("unknown utterance {utt}")))?;
    let record = &container.records[index];
    let ckpt = load_checkpoint(out, system)?;
    let synth = synthesize(
        record,
        &ckpt,
        SynthesisSetup::for_mode(system),
        utterance_seed(seed, system, index),
    )?;
    let path = out.synth_dir(system).join(format!("{utt}.wav"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_wav(&Waveform::new(synth.waveform, record.sample_rate), &path)?;
    write_provenance(
        &out.synth_dir(system),
        utt,
        "synthesize",
        cfg,
        json!({ "eval": seed, "utterance": utterance_seed(seed, system, index) }),
        std::slice::from_ref(&path),
    )?;
    println!("synthesize {system} {utt} -> {}", path.display());
    Ok(path)
}

pub fn evaluate(cfg: &ExperimentConfig, out: &Layout, seed: u64) -> CliResult<()> {
    let container = load_container(out)?;
    let mut ckpts = BTreeMap::new();
    for &mode in &cfg.eval.systems {
        let path = out.checkpoint(mode);
        if path.exists() {
            ckpts.insert(mode, ModelCheckpoint::load(&path)?);
        }
    }
    if ckpts.is_empty() {
        return Err(CliError::MissingInput {
            what: "any checkpoint listed in eval.systems (run train)".into(),
            path: out.models_dir(),
        });
    }
    let report = evaluate_systems(&container, &ckpts, seed)?;
    let dir = out.eval_dir();
    let files = [
        (dir.join("metrics.csv"), report.metrics_csv()),
        (dir.join("deltas.csv"), report.deltas_csv()),
        (dir.join("summary.txt"), report.summary_text()),
        (
            dir.join("report.json"),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        ),
    ];
    for (path, text) in &files {
        write(path, text)?;
    }
    let outputs: Vec<PathBuf> = files.iter().map(|(p, _)| p.clone()).collect();
    write_provenance(&dir, "eval", "evaluate", cfg, json!({ "eval": seed }), &outputs)?;
    print!("{}", report.summary_text());
    Ok(())
}

pub fn report(cfg: &ExperimentConfig, out: &Layout) -> CliResult<()> {
    let mut logs = Vec::new();
    for mode in TrainMode::ALL {
        let path = out.nll_log(mode);
        if path.exists() {
            logs.push((mode, NllLog::parse_csv(&read_text(&path)?)?));
        }
    }
    if logs.is_empty() {
        return Err(CliError::MissingInput {
            what: "NLL logs (run train)".into(),
            path: out.models_dir(),
        });
    }
    let named: Vec<(&str, &NllLog)> = logs.iter().map(|(m, l)| (m.as_str(), l)).collect();
    let curves = export_nll_curves(&named);
    let dir = out.report_dir();
    let mut outputs = vec![dir.join("nll_curves.csv"), dir.join("nll_curves.dat")];
    write(&outputs[0], curves.to_csv())?;
    write(&outputs[1], curves.to_gnuplot())?;

    let mut summary = String::from("final validation NLL (nats; targets differ between plain and mbg, not comparable)\n");
    for (mode, log) in &logs {
        match log.final_valid() {
            Some(v) => summary.push_str(&format!("  {mode}: {v:.4}\n")),
            None => summary.push_str(&format!("  {mode}: no validation record\n")),
        }
    }
    for name in ["summary.txt", "metrics.csv", "deltas.csv"] {
        let src = out.eval_dir().join(name);
        if src.exists() {
            let text = read_text(&src)?;
            if name == "summary.txt" {
                summary.push('\n');
                summary.push_str(&text);
            } else {
                let dst = dir.join(name);
                write(&dst, text)?;
                outputs.push(dst);
            }
        }
    }
    let summary_path = dir.join("summary.txt");
    write(&summary_path, &summary)?;
    outputs.push(summary_path);
    write_provenance(&dir, "report", "report", cfg, json!({}), &outputs)?;
    print!("{summary}");
    Ok(())
}
