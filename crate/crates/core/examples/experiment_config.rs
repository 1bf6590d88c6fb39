//! Loading a configuration, overriding it, and writing results with a run
//! manifest, as the command-line tool does.

use gikf::filter::run_gikf;
use gikf::harness::export::{export_record, Format};
use gikf::harness::{reference, ExperimentConfig, RunManifest};

fn main() -> gikf::Result<()> {
    let mut config = ExperimentConfig::from_json(reference::ROTATION_PAIR)?;
    config.horizon = 25;
    config.snapshots.retain(|&t| t <= 25);
    config.seed = 11;
    let exp = config.build()?;
    println!("config {:?} hash {}", config.name, config.hash());

    let dir = std::env::temp_dir().join("gikf-example");
    std::fs::create_dir_all(&dir)?;
    config.save(dir.join("config.json"))?;

    let mut manifest = RunManifest::start("example", &config, 1);
    let rec = run_gikf(&exp.model, &exp.dist, config.horizon, manifest.trial_seeds[0], &config.snapshots)?;
    export_record(&rec, dir.join("trial.csv"), Format::Csv)?;
    export_record(&rec, dir.join("trial.json"), Format::Json)?;
    manifest.outputs = vec!["trial.csv".into(), "trial.json".into()];
    manifest.finish(&dir)?;
    println!("wrote {} rows to {}", rec.rows.len(), dir.display());

    let bad = reference::ROTATION_PAIR.replace("\"weights\": [0.5, 0.5]", "\"weights\": [0.5, 0.6]");
    if let Err(e) = ExperimentConfig::from_json(&bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
