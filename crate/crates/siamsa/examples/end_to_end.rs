//! Drives the whole stack programmatically: synthesize a small dataset,
//! track it with two ablation settings, and print the evaluation summary.
//!
//! ```sh
//! cargo run -p siamsa --example end_to_end
//! ```

use siamsa::bench::ope::track_dataset;
use siamsa::bench::report::{render_attribute_plots, render_sv_histogram, render_summary};
use siamsa::bench::synth::{synth_sequence, SynthSpec};
use siamsa::bench::{evaluate, SequenceRecord};
use siamsa::config::TrackerConfig;
use siamsa::tracker::{BBox, ModelWeights};

fn main() -> siamsa::Result<()> {
    let dir = std::env::temp_dir().join("siamsa_end_to_end");
    let data = dir.join("data");
    std::fs::create_dir_all(&data)?;

    // One approach-style zoom sequence, one static scene.
    for (name, growth, vx, seed) in [("approach", 5.0, 1.2, 1u64), ("hover", 1.0, 0.0, 2u64)] {
        let spec = SynthSpec {
            name: name.into(),
            frames: 12,
            width: 320,
            height: 240,
            object: BBox::new(135.0, 100.0, 52.0, 44.0),
            vx,
            area_growth: growth,
            seed,
            ..SynthSpec::default()
        };
        let rec = synth_sequence(&spec, &data)?;
        println!(
            "synthesized {name}: {} frames, attributes {:?}",
            rec.len(),
            rec.attributes.iter().map(|a| a.tag()).collect::<Vec<_>>()
        );
    }

    for (label, psan, apn) in [("full", true, true), ("baseline", false, false)] {
        let cfg = TrackerConfig {
            seed: 7,
            enable_psan: psan,
            enable_sa_apn: apn,
            ..TrackerConfig::default()
        };
        let model = ModelWeights::from_seed(&cfg)?;
        let results = track_dataset(&data, &cfg, &model, 2)?;
        let records: Vec<SequenceRecord> = results.iter().map(|(r, _)| r.clone()).collect();
        let preds: Vec<Vec<BBox>> = results.iter().map(|(_, b)| b.clone()).collect();
        let report = evaluate(&records, &preds, Some(cfg.seed))?;
        println!("\n== {label} ==");
        print!("{}", render_summary(&report));
        print!("{}", render_attribute_plots(&report));
        if label == "full" {
            print!("{}", render_sv_histogram(&report));
        }
    }
    Ok(())
}
