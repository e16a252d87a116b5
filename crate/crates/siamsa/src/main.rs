//! Command-line interface: track a dataset, evaluate results, render
//! reports, generate synthetic sequences, and run the built-in self-test.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for an internal
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use siamsa::bench::dataset::{list_sequences, load_sequence};
use siamsa::bench::ope::{load_results, read_meta_seed, track_dataset, write_results};
use siamsa::bench::report::{
    load_report, render_attribute_plots, render_summary, render_sv_histogram, save_curve_csvs,
    save_report,
};
use siamsa::bench::synth::{synth_sequence, SynthSpec};
use siamsa::bench::{evaluate, SequenceRecord};
use siamsa::config::TrackerConfig;
use siamsa::error::{Error, Result};
use siamsa::tracker::ModelWeights;

#[derive(Parser)]
#[command(
    name = "siamsa",
    version,
    about = "Scale-aware Siamese tracker and one-pass evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track every sequence in a dataset and write per-sequence result files.
    Track {
        /// Dataset root: one directory per sequence.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for result files.
        #[arg(long)]
        out: PathBuf,
        /// Tracker configuration file (flat key-value text).
        #[arg(long)]
        config: PathBuf,
        /// Weights file; absent means seeded random initialization.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Disables the pairwise scale-channel attention block.
        #[arg(long)]
        disable_psan: bool,
        /// Disables the scale-aware anchor proposal network.
        #[arg(long)]
        disable_sa_apn: bool,
        /// Worker threads; results are identical for any count.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Writes the (possibly seeded-random) weights bank to this path.
        #[arg(long)]
        save_weights: Option<PathBuf>,
    },
    /// Compute metrics for previously written results.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding the result files from `track`.
        #[arg(long)]
        results: PathBuf,
        /// Report document to write; CSV side files land next to it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Render a report document as text tables and histograms.
    Report {
        #[arg(long)]
        report: PathBuf,
        /// Prints the per-attribute AUC table.
        #[arg(long)]
        attribute_plots: bool,
        /// Prints the scale-variation histogram.
        #[arg(long)]
        sv_histogram: bool,
    },
    /// Generate a synthetic sequence in the dataset layout.
    Synth {
        /// Synthetic sequence spec file (flat key-value text).
        #[arg(long)]
        spec: PathBuf,
        /// Dataset root to place the sequence under.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in oracle and invariant checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Track {
            dataset,
            out,
            config,
            weights,
            seed,
            disable_psan,
            disable_sa_apn,
            workers,
            save_weights,
        } => {
            let mut cfg = TrackerConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if disable_psan {
                cfg.enable_psan = false;
            }
            if disable_sa_apn {
                cfg.enable_sa_apn = false;
            }
            cfg.validate()?;
            let model = match &weights {
                Some(path) => ModelWeights::from_file(&cfg, path)?,
                None => ModelWeights::from_seed(&cfg)?,
            };
            if let Some(path) = &save_weights {
                model.bank.save(path)?;
            }
            let results = track_dataset(&dataset, &cfg, &model, workers)?;
            write_results(&out, &cfg, &results)?;
            println!(
                "tracked {} sequences into {} (seed {})",
                results.len(),
                out.display(),
                cfg.seed
            );
            Ok(())
        }
        Command::Eval {
            dataset,
            results,
            report,
        } => {
            let records: Vec<SequenceRecord> = list_sequences(&dataset)?
                .iter()
                .map(|d| load_sequence(d))
                .collect::<Result<_>>()?;
            let preds = load_results(&results, &records)?;
            let seed = read_meta_seed(&results);
            let rep = evaluate(&records, &preds, seed)?;
            save_report(&rep, &report)?;
            save_curve_csvs(&rep, &report)?;
            print!("{}", render_summary(&rep));
            println!("report written to {}", report.display());
            Ok(())
        }
        Command::Report {
            report,
            attribute_plots,
            sv_histogram,
        } => {
            let rep = load_report(&report)?;
            print!("{}", render_summary(&rep));
            if attribute_plots {
                println!();
                print!("{}", render_attribute_plots(&rep));
            }
            if sv_histogram {
                println!();
                print!("{}", render_sv_histogram(&rep));
            }
            Ok(())
        }
        Command::Synth { spec, out, seed } => {
            let mut spec = SynthSpec::load(&spec)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let rec = synth_sequence(&spec, &out)?;
            let tags: Vec<&str> = rec.attributes.iter().map(|a| a.tag()).collect();
            println!(
                "wrote {} frames to {} (attributes: {})",
                rec.len(),
                out.join(&rec.name).display(),
                if tags.is_empty() {
                    "none".to_string()
                } else {
                    tags.join(",")
                }
            );
            Ok(())
        }
        Command::Selftest => selftest(),
    }
}

struct SelfTest {
    failures: usize,
}

impl SelfTest {
    fn check(&mut self, name: &str, outcome: Result<bool>) {
        match outcome {
            Ok(true) => println!("PASS {name}"),
            Ok(false) => {
                println!("FAIL {name}");
                self.failures += 1;
            }
            Err(e) => {
                println!("FAIL {name}: {e}");
                self.failures += 1;
            }
        }
    }
}

/// Quick oracle and invariant sweep; a condensed version of the acceptance
/// suite meant to run in a second or two.
fn selftest() -> Result<()> {
    use siamsa::backbone::{lift_to_scale_stack, se_conv, ScaledTensor};
    use siamsa::bench::metrics::{auc, iou, success_thresholds, sv_histogram};
    use siamsa::psa::{psan_forward, sc_cross_attention, AttentionWeights};
    use siamsa::tensor::{conv2d, softmax, ConvKernel, Matrix, Padding, Tensor, CHW, CSHW};
    use siamsa::tracker::BBox;
    use siamsa::weights::SeededUniform;

    let mut t = SelfTest { failures: 0 };
    let mut rng = SeededUniform::new(0xD15EA5E);

    // Scale-equivariance: per-slice dilated convolution oracle.
    t.check("se_conv window-1 equals per-slice dilated conv2d", {
        let mut ok = true;
        for _ in 0..20 {
            let f = Tensor::from_fn(&CHW, &[2, 8, 8], |_| rng.next_uniform(-1.0, 1.0));
            let st = lift_to_scale_stack(&f, &[1, 2, 3])?;
            let k = ConvKernel::new(
                2,
                2,
                3,
                3,
                1,
                (0..36).map(|_| rng.next_uniform(-1.0, 1.0)).collect(),
                vec![0.1, -0.1],
            )?;
            let out = se_conv(&st, &k, 1)?;
            for (s, &d) in st.scale_dilations.iter().enumerate() {
                let oracle = conv2d(&st.slice(s), &k.with_dilation(d), Padding::Same)?;
                let got = out.slice(s);
                for i in 0..got.data().len() {
                    ok &= (got.data()[i] - oracle.data()[i]).abs() <= 1e-9;
                }
            }
        }
        Ok(ok)
    });

    // Softmax contracts.
    t.check("softmax rows sum to one and shift invariance holds", {
        let m = Matrix::new(4, 6, (0..24).map(|_| rng.next_uniform(-5.0, 5.0)).collect())?;
        let s = softmax(&m);
        let mut ok = true;
        for r in 0..4 {
            let sum: f64 = (0..6).map(|c| s.at(r, c)).sum();
            ok &= (sum - 1.0).abs() < 1e-6;
        }
        let shifted = Matrix::new(4, 6, m.data.iter().map(|v| v + 3.25).collect())?;
        let s2 = softmax(&shifted);
        for i in 0..s.data.len() {
            ok &= (s.data[i] - s2.data[i]).abs() < 1e-9;
        }
        Ok(ok)
    });

    // Residual pass-through.
    t.check("attention gamma=0 is bit-exact pass-through", {
        let data = Tensor::from_fn(&CSHW, &[2, 3, 4, 4], |_| rng.next_uniform(-1.0, 1.0));
        let x = ScaledTensor::new(data, vec![1, 2, 3])?;
        let w = AttentionWeights::identity(3, 0.0);
        let y = psan_forward(&x, &x, &w)?;
        Ok(y == x)
    });

    // Fusion degeneration.
    t.check("fusion with lambda1=lambda2=0 returns deep correlation", {
        use siamsa::apn::{fuse_apn_features, FusionWeights};
        let mut ok = true;
        for _ in 0..5 {
            let d = Tensor::from_fn(&CSHW, &[2, 2, 4, 4], |_| rng.next_uniform(-1.0, 1.0));
            let s = Tensor::from_fn(&CSHW, &[2, 2, 4, 4], |_| rng.next_uniform(-1.0, 1.0));
            let r_d = ScaledTensor::new(d, vec![1, 2])?;
            let r_s = ScaledTensor::new(s, vec![1, 2])?;
            let w = FusionWeights::identity_proj(2, 0.0, 0.0);
            let att = AttentionWeights::identity(2, 0.2);
            ok &= fuse_apn_features(&r_d, &r_s, &w, &att)? == r_d;
        }
        Ok(ok)
    });

    // Cross-attention spatial contract.
    t.check("cross-attention output keeps the value side's extent", {
        let a = ScaledTensor::new(
            Tensor::from_fn(&CSHW, &[2, 2, 6, 6], |_| rng.next_uniform(-1.0, 1.0)),
            vec![1, 2],
        )?;
        let b = ScaledTensor::new(
            Tensor::from_fn(&CSHW, &[2, 2, 3, 5], |_| rng.next_uniform(-1.0, 1.0)),
            vec![1, 2],
        )?;
        let w = AttentionWeights::identity(2, 0.4);
        Ok(sc_cross_attention(&a, &b, &w)?.spatial() == (3, 5))
    });

    // Metric oracles.
    t.check("iou matches a rasterization spot check", {
        let mut ok = true;
        for _ in 0..100 {
            let a = BBox::new(
                rng.next_uniform(0.0, 20.0).floor(),
                rng.next_uniform(0.0, 20.0).floor(),
                rng.next_uniform(1.0, 12.0).floor(),
                rng.next_uniform(1.0, 12.0).floor(),
            );
            let b = BBox::new(
                rng.next_uniform(0.0, 20.0).floor(),
                rng.next_uniform(0.0, 20.0).floor(),
                rng.next_uniform(1.0, 12.0).floor(),
                rng.next_uniform(1.0, 12.0).floor(),
            );
            let (mut inter, mut uni) = (0usize, 0usize);
            for y in 0..40 {
                for x in 0..40 {
                    let (xf, yf) = (x as f64, y as f64);
                    let ia = xf >= a.x && xf < a.x + a.w && yf >= a.y && yf < a.y + a.h;
                    let ib = xf >= b.x && xf < b.x + b.w && yf >= b.y && yf < b.y + b.h;
                    inter += (ia && ib) as usize;
                    uni += (ia || ib) as usize;
                }
            }
            let expect = if uni == 0 {
                0.0
            } else {
                inter as f64 / uni as f64
            };
            ok &= (iou(&a, &b) - expect).abs() < 1e-3;
        }
        Ok(ok)
    });

    t.check("auc of the linear descent curve is 0.5", {
        let ts = success_thresholds();
        let curve: Vec<f64> = ts.iter().map(|&x| 1.0 - x).collect();
        Ok((auc(&curve, &ts)? - 0.5).abs() <= 1e-9)
    });

    t.check(
        "sv histogram honors the strict boundary and the 2.5 cutoff",
        {
            let gt = vec![
                BBox::new(0.0, 0.0, 4.0, 4.0),
                BBox::new(0.0, 0.0, 8.0, 8.0), // bin [2.0, 2.1)
                BBox::new(0.0, 0.0, 8.0, 4.0), // |log2 R| = 1 exactly: excluded
                BBox::new(0.0, 0.0, 1.0, 2.0), // |log2 R| = 3: dropped
            ];
            let h = sv_histogram(&gt)?;
            let mut ok = (h.bins[10] - 0.25).abs() < 1e-12;
            for (i, &b) in h.bins.iter().enumerate() {
                if i != 10 {
                    ok &= b == 0.0;
                }
            }
            Ok(ok)
        },
    );

    t.check("seeded weight construction is reproducible", {
        let cfg = TrackerConfig::default();
        let a = ModelWeights::from_seed(&cfg)?;
        let b = ModelWeights::from_seed(&cfg)?;
        Ok(a.bank == b.bank)
    });

    if t.failures == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "selftest: {} check(s) failed",
            t.failures
        )))
    }
}
