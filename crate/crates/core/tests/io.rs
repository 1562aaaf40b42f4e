use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlstm_unet::io::{
    decode_tensor, encode_tensor, gen_synthetic_dataset, pad_to, read_tensor, sample_patch, synth_samples,
    write_tensor, Dataset, Sample, SyntheticSpec,
};
use xlstm_unet::tensor::Tensor;
use xlstm_unet::{Array, Error};

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..=5)
}

proptest! {
    #[test]
    fn round_trip_is_bitwise(shape in shape_strategy(), seed in any::<u64>(), dtype in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = match dtype {
            // raw bit patterns, NaNs included
            0 => Tensor::F32(Array::from_fn(&shape, |_| f32::from_bits(rng.random()))),
            1 => Tensor::I32(Array::from_fn(&shape, |_| rng.random())),
            _ => Tensor::U8(Array::from_fn(&shape, |_| rng.random())),
        };
        let bytes = encode_tensor(&t).unwrap();
        let back = decode_tensor(&bytes).unwrap();
        prop_assert_eq!(encode_tensor(&back).unwrap(), bytes);
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.dtype(), t.dtype());
    }
}

#[test]
fn header_layout() {
    let t = Tensor::F32(Array::new(&[2, 3], vec![0.0f32, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap());
    let b = encode_tensor(&t).unwrap();
    assert_eq!(&b[..8], &[0x58, 0x54, 0x45, 0x4E, 0x01, 0x00, 0x02, 0x00]);
    assert_eq!(&b[8..16], &2u64.to_le_bytes());
    assert_eq!(&b[16..24], &3u64.to_le_bytes());
    assert_eq!(&b[28..32], &1.0f32.to_le_bytes());
    assert_eq!(b.len(), 24 + 6 * 4);
    let i = encode_tensor(&Tensor::I32(Array::new(&[1], vec![-2]).unwrap())).unwrap();
    assert_eq!(i[5], 1);
    assert_eq!(&i[16..], &(-2i32).to_le_bytes());
    let u = encode_tensor(&Tensor::U8(Array::new(&[3], vec![7, 8, 9]).unwrap())).unwrap();
    assert_eq!(u[5], 2);
    assert_eq!(&u[16..], &[7, 8, 9]);
}

#[test]
fn malformed_files_get_distinct_errors() {
    let good = encode_tensor(&Tensor::F32(Array::full(&[2, 2], 1.5f32))).unwrap();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'Y';
    assert!(matches!(decode_tensor(&bad_magic), Err(Error::BadMagic(m)) if &m == b"YTEN"));
    let mut bad_version = good.clone();
    bad_version[4] = 2;
    assert!(matches!(decode_tensor(&bad_version), Err(Error::UnsupportedVersion(2))));
    let mut bad_dtype = good.clone();
    bad_dtype[5] = 9;
    assert!(matches!(decode_tensor(&bad_dtype), Err(Error::UnsupportedDtype(_))));
    let truncated = &good[..good.len() - 3];
    assert!(matches!(
        decode_tensor(truncated),
        Err(Error::TruncatedPayload { expected: 16, found: 13 })
    ));
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(decode_tensor(&trailing), Err(Error::BadHeader(_))));
    assert!(matches!(decode_tensor(&good[..5]), Err(Error::BadHeader(_))));
    let mut pad = good.clone();
    pad[7] = 1;
    assert!(matches!(decode_tensor(&pad), Err(Error::BadHeader(_))));
    assert!(matches!(
        encode_tensor(&Tensor::F64(Array::zeros(&[1]))),
        Err(Error::UnsupportedDtype(_))
    ));
}

#[test]
fn files_round_trip_and_missing_file_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.xten");
    let t = Tensor::I32(Array::from_fn(&[2, 3, 4], |i| i as i32 - 5));
    write_tensor(&p, &t).unwrap();
    assert_eq!(encode_tensor(&read_tensor(&p).unwrap()).unwrap(), std::fs::read(&p).unwrap());
    let err = read_tensor(dir.path().join("nope.xten")).unwrap_err().to_string();
    assert!(err.contains("nope.xten"));
}

fn spec(cases: usize, classes: usize, size: &[usize], seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        cases,
        classes,
        size: size.to_vec(),
        seed,
    }
}

#[test]
fn generator_contract_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = spec(8, 2, &[64, 64], 7);
    let meta = gen_synthetic_dataset(a.path(), &s).unwrap();
    gen_synthetic_dataset(b.path(), &s).unwrap();
    assert_eq!(meta.cases.len(), 8);
    let ds = Dataset::open(a.path()).unwrap();
    for case in &ds.meta.cases {
        let sample = ds.load_case(case).unwrap();
        assert_eq!(sample.image.shape(), &[1, 64, 64]);
        assert!(sample.label.data().iter().all(|&v| v == 0 || v == 1));
        for sub in ["images", "labels"] {
            let f = format!("{sub}/{case}.xten");
            assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap());
        }
    }
    assert_eq!(
        std::fs::read(a.path().join("dataset.json")).unwrap(),
        std::fs::read(b.path().join("dataset.json")).unwrap()
    );
    let other = synth_samples(&spec(8, 2, &[64, 64], 8)).unwrap();
    assert_ne!(other[0].label, ds.load_case("case_000").unwrap().label);
}

#[test]
fn class_balance_and_foreground_fraction() {
    for (size, classes) in [(&[64usize, 64][..], 3usize), (&[64, 64], 2), (&[32, 32, 32], 3)] {
        let samples = synth_samples(&spec(32, classes, size, 11)).unwrap();
        for k in 1..classes as i32 {
            let present = samples.iter().filter(|s| s.label.data().contains(&k)).count();
            assert!(present as f64 >= 0.8 * 32.0);
            let frac: f64 = samples
                .iter()
                .map(|s| s.label.data().iter().filter(|&&v| v == k).count() as f64 / s.label.len() as f64)
                .sum::<f64>()
                / 32.0;
            assert!((0.02..=0.5).contains(&frac), "{size:?} class {k}: {frac}");
        }
    }
}

#[test]
fn generator_rejects_bad_specs() {
    assert!(synth_samples(&spec(2, 1, &[64, 64], 0)).is_err());
    assert!(synth_samples(&spec(2, 2, &[64], 0)).is_err());
    assert!(synth_samples(&spec(0, 2, &[64, 64], 0)).is_err());
}

fn toy(size: &[usize], seed: u64) -> Sample {
    synth_samples(&spec(1, 3, size, seed)).unwrap().remove(0)
}

#[test]
fn whole_volume_patch_and_determinism() {
    let s = toy(&[32, 32], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (img, lab) = sample_patch(&s, &[32, 32], &mut rng);
    assert_eq!(img, s.image);
    assert_eq!(lab, s.label);
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..10).map(|_| sample_patch(&s, &[16, 8], &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}

#[test]
fn forced_draws_contain_foreground() {
    // one foreground voxel in a large empty volume
    let mut label = Array::full(&[40, 40], 0i32);
    label.data_mut()[13 * 40 + 29] = 2;
    let s = Sample {
        case_id: "sparse".into(),
        image: Array::from_fn(&[1, 40, 40], |i| i as f32),
        label,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut with_fg = 0;
    for _ in 0..200 {
        let (img, lab) = sample_patch(&s, &[8, 8], &mut rng);
        assert_eq!(img.shape(), &[1, 8, 8]);
        // the patch is a contiguous window of the source
        let first = img.data()[0] as usize;
        let (y0, x0) = (first / 40, first % 40);
        assert!(y0 + 8 <= 40 && x0 + 8 <= 40);
        for (i, &v) in img.data().iter().enumerate() {
            assert_eq!(v as usize, (y0 + i / 8) * 40 + x0 + i % 8);
        }
        if lab.data().contains(&2) {
            with_fg += 1;
        }
    }
    // about half the draws are forced; random ones almost never hit
    assert!((70..=140).contains(&with_fg), "{with_fg}");
}

#[test]
fn small_volumes_are_padded_symmetrically() {
    let s = toy(&[10, 12], 2);
    let (img, lab, before) = pad_to(&s.image, &s.label, &[16, 16]);
    assert_eq!(before, vec![3, 2]);
    assert_eq!(lab.shape(), &[16, 16]);
    assert_eq!(lab.get(&[3, 2]), s.label.get(&[0, 0]));
    assert_eq!(img.get(&[0, 12, 13]), s.image.get(&[0, 9, 11]));
    assert_eq!(img.get(&[0, 0, 0]), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (pi, pl) = sample_patch(&s, &[16, 16], &mut rng);
    assert_eq!((pi, pl), (img, lab));
    let (pi, _) = sample_patch(&s, &[16, 8], &mut rng);
    assert_eq!(pi.shape(), &[1, 16, 8]);
}
