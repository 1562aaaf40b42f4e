//! Overfits the desk 2D network on eight synthetic phantoms and reports the
//! mean foreground DSC of whole-case predictions.
//!
//! `cargo run --release --example train_overfit [bot|enc] [max_epochs]`

use xlstm_unet::io::{synth_samples, SyntheticSpec};
use xlstm_unet::predict::mean_foreground_dsc;
use xlstm_unet::train::{RunConfig, Trainer};
use xlstm_unet::unet::Variant;

fn main() -> xlstm_unet::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant = match args.next().as_deref() {
        Some("bot") => Variant::Bot,
        _ => Variant::Enc,
    };
    let max_epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let samples = synth_samples(&SyntheticSpec {
        cases: 8,
        classes: 3,
        size: vec![64, 64],
        seed: 7,
    })?;
    let config = RunConfig {
        variant,
        lr: 0.005,
        batch_size: 4,
        epochs: max_epochs,
        steps_per_epoch: 10,
        seed: 7,
        ..RunConfig::default()
    };
    let mut trainer = Trainer::new(config, samples)?;
    let start = std::time::Instant::now();
    while !trainer.is_done() {
        let s = trainer.run_epoch(None, start)?;
        if (s.epoch + 1) % 10 == 0 {
            let d = mean_foreground_dsc(&trainer.net, &trainer.samples, false)?;
            println!(
                "epoch {:>3}  loss {:.4}  dsc {:.4}  {:.0}s",
                s.epoch + 1,
                s.mean_loss,
                d,
                start.elapsed().as_secs_f64()
            );
            if d >= 0.95 {
                break;
            }
        }
    }
    Ok(())
}
