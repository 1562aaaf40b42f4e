//! The mLSTM recurrence three ways: the fused scan, the step-by-step state
//! API, and the reverse direction on a flipped sequence.
//!
//! `cargo run --release --example mlstm_scan`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlstm_unet::tensor::{Init, ParamStore};
use xlstm_unet::vil::{Direction, MLstmCell, MLstmState};
use xlstm_unet::{Array, Graph};

fn main() -> xlstm_unet::Result<()> {
    let (len, width, heads) = (12, 8, 2);
    let cell = MLstmCell::new("cell", width, heads)?;
    let mut store = ParamStore::<f64>::new();
    cell.init(&mut store, &mut Init::new(ChaCha8Rng::seed_from_u64(1)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = Array::from_fn(&[1, len, width], |_| rng.random_range(-1.0..1.0));

    let run = |x: &Array<f64>, dir| -> xlstm_unet::Result<Array<f64>> {
        let g = Graph::new();
        let p = store.bind_constant(&g);
        let v = g.constant(x.clone());
        let y = cell.forward(&p, v, dir)?;
        let out = g.value(y).clone();
        Ok(out)
    };
    let scanned = run(&seq, Direction::Forward)?;

    let mut state = MLstmState::new(heads, cell.head_dim());
    let mut worst: f64 = 0.0;
    for t in 0..len {
        let h = cell.step(&store, &seq.data()[t * width..(t + 1) * width], &mut state)?;
        for (j, v) in h.iter().enumerate() {
            worst = worst.max((v - scanned.get(&[0, t, j])).abs());
        }
    }
    println!("scan vs step-by-step: max diff {worst:.2e}");

    let reversed = run(&seq, Direction::Reverse)?.flip(1)?;
    let flipped = run(&seq.flip(1)?, Direction::Forward)?;
    println!("reverse scan vs forward scan of flipped input: max diff {:.2e}", reversed.max_abs_diff(&flipped));
    println!("last output: {:?}", &scanned.data()[(len - 1) * width..]);
    Ok(())
}
