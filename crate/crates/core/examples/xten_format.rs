//! Encodes tensors in the XTEN format, dumps the header bytes and shows the
//! errors produced by damaged files.
//!
//! `cargo run --example xten_format`

use xlstm_unet::io::{decode_tensor, encode_tensor};
use xlstm_unet::{Array, Tensor};

fn main() -> xlstm_unet::Result<()> {
    let t = Tensor::I32(Array::from_fn(&[2, 3], |i| i as i32 - 2));
    let bytes = encode_tensor(&t)?;
    println!("header: {:02x?}", &bytes[..8]);
    println!("dims:   {:02x?}", &bytes[8..24]);
    println!("{} payload bytes", bytes.len() - 24);
    assert_eq!(encode_tensor(&decode_tensor(&bytes)?)?, bytes);

    let damage: [(&str, fn(&mut Vec<u8>)); 5] = [
        ("magic", |b| b[0] = b'Z'),
        ("version", |b| b[4] = 9),
        ("dtype", |b| b[5] = 4),
        ("padding", |b| b[7] = 1),
        ("truncation", |b| b.truncate(b.len() - 2)),
    ];
    for (what, f) in damage {
        let mut b = bytes.clone();
        f(&mut b);
        println!("{what:>10}: {}", decode_tensor(&b).unwrap_err());
    }
    Ok(())
}
