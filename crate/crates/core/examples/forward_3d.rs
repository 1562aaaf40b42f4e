//! Builds the 2D and 3D networks for both variants and runs one forward
//! pass each, printing parameter counts and output checks.
//!
//! `cargo run --release --example forward_3d`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlstm_unet::unet::{build_network, forward_segment, NetworkConfig, Variant};
use xlstm_unet::Array;

fn main() -> xlstm_unet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for variant in [Variant::Bot, Variant::Enc] {
        for cfg in [
            NetworkConfig::desk_2d(3, variant),
            NetworkConfig {
                patch_size: vec![16, 32, 32],
                ..NetworkConfig::desk_3d(2, variant)
            },
        ] {
            let net = build_network(&cfg)?;
            let mut shape = vec![1, cfg.in_channels];
            shape.extend_from_slice(&cfg.patch_size);
            let x = Array::from_fn(&shape, |_| rng.random_range(-1.0f32..1.0));
            let start = std::time::Instant::now();
            let p = forward_segment(&net, &x)?;
            let n: usize = cfg.patch_size.iter().product();
            let worst = (0..n)
                .map(|i| ((0..cfg.num_classes).map(|c| p.data()[c * n + i]).sum::<f32>() - 1.0).abs())
                .fold(0.0f32, f32::max);
            println!(
                "{:?} {:?}: {} params, {} xLSTM blocks, output {:?}, max |sum-1| {worst:.1e}, {:.2}s",
                cfg.task,
                variant,
                net.params.num_elements(),
                net.arch.xlstm_blocks().len(),
                p.shape(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
