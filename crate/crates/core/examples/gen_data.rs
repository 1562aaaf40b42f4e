//! Writes a synthetic phantom dataset and prints per-class voxel counts.
//!
//! `cargo run --release --example gen_data [out_dir]`

use xlstm_unet::io::{gen_synthetic_dataset, Dataset, SyntheticSpec};

fn main() -> xlstm_unet::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "phantoms".into());
    let spec = SyntheticSpec {
        cases: 8,
        classes: 3,
        size: vec![64, 64],
        seed: 7,
    };
    let meta = gen_synthetic_dataset(&out, &spec)?;
    let ds = Dataset::open(&out)?;
    for case in &meta.cases {
        let s = ds.load_case(case)?;
        let mut counts = vec![0usize; meta.classes];
        for &v in s.label.data() {
            counts[v as usize] += 1;
        }
        println!("{case}: image {:?}, voxels per class {counts:?}", s.image.shape());
    }
    println!("dataset in {out}");
    Ok(())
}
