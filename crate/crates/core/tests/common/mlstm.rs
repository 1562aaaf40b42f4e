use xlstm_unet::tensor::ParamStore;
use xlstm_unet::Array;

/// Straight-line mLSTM written from the recurrence, independent of the
/// production scan: plain nested vectors, forward order only.
pub fn naive_mlstm(s: &Array<f64>, store: &ParamStore<f64>, prefix: &str, heads: usize) -> Array<f64> {
    let (b, l, e) = (s.shape()[0], s.shape()[1], s.shape()[2]);
    let d = e / heads;
    let p = |n: &str| store.get(&format!("{prefix}.{n}")).unwrap();
    let proj = |x: &[f64], w: &Array<f64>, bias: Option<&Array<f64>>| -> Vec<f64> {
        let cols = w.shape()[1];
        (0..cols)
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..x.len() {
                    acc += x[i] * w.get(&[i, j]);
                }
                acc + bias.map_or(0.0, |bb| bb.data()[j])
            })
            .collect()
    };
    let mut out = Array::zeros(&[b, l, e]);
    for bi in 0..b {
        let mut c = vec![vec![vec![0.0; d]; d]; heads];
        let mut n = vec![vec![0.0; d]; heads];
        let mut m = vec![f64::NEG_INFINITY; heads];
        for t in 0..l {
            let x: Vec<f64> = (0..e).map(|j| s.get(&[bi, t, j])).collect();
            let q = proj(&x, p("q_proj"), None);
            let k: Vec<f64> = proj(&x, p("k_proj"), None)
                .iter()
                .map(|v| v / (d as f64).sqrt())
                .collect();
            let v = proj(&x, p("v_proj"), None);
            let it = proj(&x, p("igate.weight"), Some(p("igate.bias")));
            let ft = proj(&x, p("fgate.weight"), Some(p("fgate.bias")));
            let o: Vec<f64> = proj(&x, p("ogate.weight"), Some(p("ogate.bias")))
                .iter()
                .map(|z| 1.0 / (1.0 + (-z).exp()))
                .collect();
            for h in 0..heads {
                let m_new = if t == 0 { it[h] } else { (ft[h] + m[h]).max(it[h]) };
                let ig = (it[h] - m_new).exp();
                let fg = if t == 0 { 0.0 } else { (ft[h] + m[h] - m_new).exp() };
                m[h] = m_new;
                for r in 0..d {
                    for cidx in 0..d {
                        c[h][r][cidx] = fg * c[h][r][cidx] + ig * v[h * d + r] * k[h * d + cidx];
                    }
                    n[h][r] = fg * n[h][r] + ig * k[h * d + r];
                }
                let nq: f64 = (0..d).map(|j| n[h][j] * q[h * d + j]).sum();
                let den = nq.abs().max(1.0);
                for r in 0..d {
                    let cq: f64 = (0..d).map(|j| c[h][r][j] * q[h * d + j]).sum();
                    out.data_mut()[(bi * l + t) * e + h * d + r] = o[h * d + r] * cq / den;
                }
            }
        }
    }
    out
}
