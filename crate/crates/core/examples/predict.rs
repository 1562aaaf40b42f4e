//! Trains briefly, then segments a larger-than-patch image with the tiled
//! sliding window and writes the label map.
//!
//! `cargo run --release --example predict`

use xlstm_unet::io::{read_tensor, synth_samples, write_tensor, SyntheticSpec};
use xlstm_unet::metrics::dsc;
use xlstm_unet::predict::predict_labels;
use xlstm_unet::train::{RunConfig, Trainer};
use xlstm_unet::Tensor;

fn main() -> xlstm_unet::Result<()> {
    let spec = |size: Vec<usize>, seed| SyntheticSpec {
        cases: 4,
        classes: 3,
        size,
        seed,
    };
    let config = RunConfig {
        patch_size: vec![32, 32],
        num_stages: 3,
        lr: 0.005,
        batch_size: 4,
        ..RunConfig::default()
    };
    let mut trainer = Trainer::new(config, synth_samples(&spec(vec![64, 64], 3))?)?;
    for _ in 0..200 {
        trainer.train_step(0.005)?;
    }
    let test = synth_samples(&spec(vec![96, 80], 4))?.remove(0);
    let labels = predict_labels(&trainer.net, &test.image, true)?;
    for c in 1..3 {
        println!("class {c}: dsc {:.4}", dsc(&labels, &test.label, c)?);
    }
    let path = std::env::temp_dir().join("xlstm_unet_prediction.xten");
    write_tensor(&path, &Tensor::I32(labels.clone()))?;
    let back = read_tensor(&path)?.into_labels()?;
    assert_eq!(back, labels);
    println!("{:?} label map written to {}", labels.shape(), path.display());
    Ok(())
}
