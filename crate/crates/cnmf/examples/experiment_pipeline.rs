//! Drive the full experiment pipeline — generate, compress, factorize,
//! evaluate, bench — through the same entry points the `cnmf` binary uses.
//!
//! Every stage reads one JSON config. The stages communicate only through
//! files in `output_dir`, so each maps 1:1 onto a CLI invocation:
//!
//! ```text
//! cnmf generate  --config config.json
//! cnmf compress  --config config.json
//! cnmf factorize --config config.json
//! cnmf evaluate  --config config.json
//! cnmf bench     --config config.json
//! ```
//!
//! The example writes the config it builds to disk so you can replay the
//! exact run from the shell afterwards.
//!
//! Run with: cargo run --release --example experiment_pipeline

use std::path::PathBuf;

use cnmf::cli::{
    cmd_bench, cmd_compress, cmd_evaluate, cmd_factorize, cmd_generate, BenchSection,
    DataConfig, ExperimentConfig, ProblemKind, SketchConfig, SketchSides,
};
use cnmf::datagen::SyntheticSpec;
use cnmf::sketching::SketchKind;

fn main() -> cnmf::Result<()> {
    let out_dir = PathBuf::from("target/example_output/pipeline");
    let config = ExperimentConfig {
        data: DataConfig::Synthetic(SyntheticSpec {
            m: 100,
            n: 80,
            r: 5,
            seed: 11,
            distribution: Default::default(),
        }),
        sketch: SketchConfig {
            kind: SketchKind::Rangefinder,
            side: SketchSides::Left,
            k: 11,
            seed: 12,
            variance: None,
        },
        problem: ProblemKind::OneSidedOrthogonal,
        rank: None, // defaults to the synthetic rank
        params: Default::default(),
        solver: Default::default(),
        eval: Default::default(),
        output_dir: out_dir.clone(),
        bench: Some(BenchSection {
            k: vec![7, 11],
            lambda: vec![0.0, 0.1],
            seeds: vec![1, 2],
        }),
    };

    std::fs::create_dir_all(&out_dir)?;
    let config_path = out_dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
    println!("wrote {}", config_path.display());

    println!("\n== generate ==");
    cmd_generate(&config)?;
    println!("\n== compress ==");
    cmd_compress(&config)?;
    println!("\n== factorize (never touches the full data) ==");
    let stop = cmd_factorize(&config)?;
    println!("factorize stopped with {stop:?}");
    println!("\n== evaluate (full-data metrics) ==");
    let metrics = cmd_evaluate(&config)?;
    println!(
        "relative error {:.4e}, cosine similarity {:.6}",
        metrics.relative_error, metrics.cosine_similarity
    );
    println!("\n== bench (2 x 2 x 2 grid) ==");
    cmd_bench(&config)?;

    println!("\nartifacts under {}:", out_dir.display());
    let mut paths = Vec::new();
    walk(&out_dir, &mut paths);
    paths.sort();
    for p in &paths {
        println!("  {}", p.strip_prefix(&out_dir).unwrap_or(p).display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path, out: &mut Vec<PathBuf>) {
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, out);
            } else {
                out.push(path);
            }
        }
    }
}
