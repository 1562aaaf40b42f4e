//! Stabilized mLSTM recurrence.
//!
//! Per head with key dimension `d`, at each position:
//!
//! ```text
//! m_t  = max(f̃_t + m_{t-1}, ĩ_t)
//! i'_t = exp(ĩ_t − m_t)          f'_t = exp(f̃_t + m_{t-1} − m_t)
//! C_t  = f'_t C_{t-1} + i'_t v_t k_tᵀ
//! n_t  = f'_t n_{t-1} + i'_t k_t
//! h̃_t = C_t q_t / max(|n_tᵀ q_t|, 1)
//! ```
//!
//! with `C_0 = 0`, `n_0 = 0`, `m_0 = −∞`. The forget pre-activation enters in
//! log space, so both exponents are always `≤ 0`.
//!
//! The scan is a single tape op with a hand-written reverse pass; the
//! projections around it (q, k, v, gates, output gate) are ordinary ops.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Array, Backward, Bound, Float, Graph, Init, ParamStore, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    fn position(self, step: usize, len: usize) -> usize {
        match self {
            Direction::Forward => step,
            Direction::Reverse => len - 1 - step,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

/// Recurrent state of one head.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadState<T> {
    /// Matrix memory, `d×d` row-major.
    pub c: Vec<T>,
    pub n: Vec<T>,
    /// Stabilizer; `-inf` before the first step.
    pub m: T,
}

/// Per-head matrix memory, normalizer and stabilizer.
#[derive(Clone, Debug, PartialEq)]
pub struct MLstmState<T> {
    pub heads: Vec<HeadState<T>>,
    pub head_dim: usize,
}

impl<T: Float> MLstmState<T> {
    pub fn new(num_heads: usize, head_dim: usize) -> Self {
        Self {
            heads: vec![
                HeadState {
                    c: vec![T::zero(); head_dim * head_dim],
                    n: vec![T::zero(); head_dim],
                    m: T::neg_infinity(),
                };
                num_heads
            ],
            head_dim,
        }
    }

    /// Advances one head by one position and returns `h̃` (before the
    /// output gate). `k` must already carry the `1/√d` scaling.
    pub fn update_head(
        &mut self,
        head: usize,
        q: &[T],
        k: &[T],
        v: &[T],
        i_pre: T,
        f_pre: T,
    ) -> Result<Vec<T>> {
        let d = self.head_dim;
        if q.len() != d || k.len() != d || v.len() != d || head >= self.heads.len() {
            return Err(Error::shape(
                "mlstm_step",
                format!(
                    "head {head} of {} with dim {d}: got q {}, k {}, v {}",
                    self.heads.len(),
                    q.len(),
                    k.len(),
                    v.len()
                ),
            ));
        }
        let st = &mut self.heads[head];
        let gates = gate_step(st.m, i_pre, f_pre);
        check_gates(&gates)?;
        let mut h = vec![T::zero(); d];
        let (s, _) = cell_step(&mut st.c, &mut st.n, q, k, v, &gates, &mut h);
        st.m = gates.m;
        if !s.is_finite() || h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                op: "mlstm: memory readout".into(),
            });
        }
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug)]
struct Gates<T> {
    m: T,
    i: T,
    f: T,
    /// `m_t` came from the forget branch `f̃_t + m_{t-1}`.
    forget_branch: bool,
}

#[inline]
fn gate_step<T: Float>(m_prev: T, i_pre: T, f_pre: T) -> Gates<T> {
    if m_prev == T::neg_infinity() {
        return Gates {
            m: i_pre,
            i: T::one(),
            f: T::zero(),
            forget_branch: false,
        };
    }
    let a = f_pre + m_prev;
    let (m, forget_branch) = if a >= i_pre { (a, true) } else { (i_pre, false) };
    Gates {
        m,
        i: (i_pre - m).exp(),
        f: (a - m).exp(),
        forget_branch,
    }
}

fn check_gates<T: Float>(g: &Gates<T>) -> Result<()> {
    let name = if !g.m.is_finite() {
        "mlstm: stabilizer"
    } else if !g.i.is_finite() {
        "mlstm: input gate"
    } else if !g.f.is_finite() {
        "mlstm: forget gate"
    } else {
        return Ok(());
    };
    Err(Error::NonFinite { op: name.into() })
}

/// Updates `c`, `n` in place and writes `h̃` into `h`. Returns `(nᵀq, den)`.
#[inline]
fn cell_step<T: Float>(
    c: &mut [T],
    n: &mut [T],
    q: &[T],
    k: &[T],
    v: &[T],
    g: &Gates<T>,
    h: &mut [T],
) -> (T, T) {
    let d = q.len();
    for r in 0..d {
        let row = &mut c[r * d..(r + 1) * d];
        let iv = g.i * v[r];
        for (cv, &kv) in row.iter_mut().zip(k) {
            *cv = g.f * *cv + iv * kv;
        }
    }
    let mut s = T::zero();
    for j in 0..d {
        n[j] = g.f * n[j] + g.i * k[j];
        s += n[j] * q[j];
    }
    let den = s.abs().max(T::one());
    for r in 0..d {
        let row = &c[r * d..(r + 1) * d];
        let mut acc = T::zero();
        for (&cv, &qv) in row.iter().zip(q) {
            acc += cv * qv;
        }
        h[r] = acc / den;
    }
    (s, den)
}

/// Saved forward trajectory of one (batch, head) scan.
struct Trajectory<T> {
    /// `C_t` after each step, `L·d·d`.
    c: Vec<T>,
    /// `n_t` after each step, `L·d`.
    n: Vec<T>,
    gates: Vec<Gates<T>>,
}

struct ScanShape {
    batch: usize,
    len: usize,
    heads: usize,
    head_dim: usize,
}

impl ScanShape {
    fn width(&self) -> usize {
        self.heads * self.head_dim
    }

    fn vec_at(&self, b: usize, pos: usize, head: usize) -> std::ops::Range<usize> {
        let base = (b * self.len + pos) * self.width() + head * self.head_dim;
        base..base + self.head_dim
    }

    fn gate_at(&self, b: usize, pos: usize, head: usize) -> usize {
        (b * self.len + pos) * self.heads + head
    }
}

fn scan_shape<T: Float>(
    q: &Array<T>,
    k: &Array<T>,
    v: &Array<T>,
    ip: &Array<T>,
    fp: &Array<T>,
    heads: usize,
) -> Result<ScanShape> {
    let bad = || {
        Error::shape(
            "mlstm_scan",
            format!(
                "q {:?}, k {:?}, v {:?}, i {:?}, f {:?} with {heads} heads",
                q.shape(),
                k.shape(),
                v.shape(),
                ip.shape(),
                fp.shape()
            ),
        )
    };
    if q.ndim() != 3 || k.shape() != q.shape() || v.shape() != q.shape() || heads == 0 {
        return Err(bad());
    }
    let (batch, len, width) = (q.shape()[0], q.shape()[1], q.shape()[2]);
    if width % heads != 0 || ip.shape() != [batch, len, heads] || fp.shape() != ip.shape() {
        return Err(bad());
    }
    Ok(ScanShape {
        batch,
        len,
        heads,
        head_dim: width / heads,
    })
}

/// Runs the recurrence for every (batch, head) and returns `h̃: [B,L,E]`.
fn scan_forward<T: Float>(
    q: &Array<T>,
    k: &Array<T>,
    v: &Array<T>,
    ip: &Array<T>,
    fp: &Array<T>,
    heads: usize,
    direction: Direction,
    save: bool,
) -> Result<(Array<T>, ScanShape, Vec<Trajectory<T>>)> {
    let sh = scan_shape(q, k, v, ip, fp, heads)?;
    let d = sh.head_dim;
    let runs: Vec<Result<(Vec<T>, Trajectory<T>)>> = (0..sh.batch * sh.heads)
        .into_par_iter()
        .map(|bh| {
            let (b, head) = (bh / sh.heads, bh % sh.heads);
            let mut c = vec![T::zero(); d * d];
            let mut n = vec![T::zero(); d];
            let mut m = T::neg_infinity();
            let mut out = vec![T::zero(); sh.len * d];
            let mut traj = Trajectory {
                c: Vec::with_capacity(if save { sh.len * d * d } else { 0 }),
                n: Vec::with_capacity(if save { sh.len * d } else { 0 }),
                gates: Vec::with_capacity(sh.len),
            };
            for step in 0..sh.len {
                let pos = direction.position(step, sh.len);
                let r = sh.vec_at(b, pos, head);
                let gi = sh.gate_at(b, pos, head);
                let g = gate_step(m, ip.data()[gi], fp.data()[gi]);
                check_gates(&g)?;
                let h = &mut out[pos * d..(pos + 1) * d];
                cell_step(
                    &mut c,
                    &mut n,
                    &q.data()[r.clone()],
                    &k.data()[r.clone()],
                    &v.data()[r],
                    &g,
                    h,
                );
                m = g.m;
                if save {
                    traj.c.extend_from_slice(&c);
                    traj.n.extend_from_slice(&n);
                }
                traj.gates.push(g);
            }
            if c.iter().chain(&n).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    op: "mlstm: memory state".into(),
                });
            }
            Ok((out, traj))
        })
        .collect();
    let mut h = vec![T::zero(); sh.batch * sh.len * sh.width()];
    let mut trajs = Vec::with_capacity(runs.len());
    for (bh, run) in runs.into_iter().enumerate() {
        let (out, traj) = run?;
        let (b, head) = (bh / sh.heads, bh % sh.heads);
        for pos in 0..sh.len {
            h[sh.vec_at(b, pos, head)].copy_from_slice(&out[pos * d..(pos + 1) * d]);
        }
        trajs.push(traj);
    }
    let shape = [sh.batch, sh.len, sh.width()];
    Ok((Array::new(&shape, h)?, sh, trajs))
}

struct ScanOp<T> {
    shape: ScanShape,
    direction: Direction,
    trajs: Vec<Trajectory<T>>,
}

struct HeadGrads<T> {
    dq: Vec<T>,
    dk: Vec<T>,
    dv: Vec<T>,
    di: Vec<T>,
    df: Vec<T>,
}

impl<T: Float> ScanOp<T> {
    fn backward_head(
        &self,
        b: usize,
        head: usize,
        q: &Array<T>,
        k: &Array<T>,
        v: &Array<T>,
        dh: &Array<T>,
    ) -> HeadGrads<T> {
        let sh = &self.shape;
        let d = sh.head_dim;
        let len = sh.len;
        let traj = &self.trajs[b * sh.heads + head];
        let mut out = HeadGrads {
            dq: vec![T::zero(); len * d],
            dk: vec![T::zero(); len * d],
            dv: vec![T::zero(); len * d],
            di: vec![T::zero(); len],
            df: vec![T::zero(); len],
        };
        let mut dc = vec![T::zero(); d * d];
        let mut dn = vec![T::zero(); d];
        let mut dm_carry = T::zero();
        let zero_c = vec![T::zero(); d * d];
        let zero_n = vec![T::zero(); d];
        let mut dr = vec![T::zero(); d];
        for step in (0..len).rev() {
            let pos = self.direction.position(step, len);
            let r = sh.vec_at(b, pos, head);
            let (qv, kv, vv) = (&q.data()[r.clone()], &k.data()[r.clone()], &v.data()[r.clone()]);
            let dhv = &dh.data()[r];
            let c_t = &traj.c[step * d * d..(step + 1) * d * d];
            let n_t = &traj.n[step * d..(step + 1) * d];
            let (c_prev, n_prev) = if step == 0 {
                (&zero_c[..], &zero_n[..])
            } else {
                (
                    &traj.c[(step - 1) * d * d..step * d * d],
                    &traj.n[(step - 1) * d..step * d],
                )
            };
            let g = traj.gates[step];

            // readout h̃ = C q / max(|nᵀq|, 1)
            let mut s = T::zero();
            for j in 0..d {
                s += n_t[j] * qv[j];
            }
            let den = s.abs().max(T::one());
            let mut dot_dh_r = T::zero();
            for i in 0..d {
                let row = &c_t[i * d..(i + 1) * d];
                let mut ri = T::zero();
                for j in 0..d {
                    ri += row[j] * qv[j];
                }
                dot_dh_r += dhv[i] * ri;
                dr[i] = dhv[i] / den;
            }
            let ds = if s.abs() > T::one() {
                -dot_dh_r / (den * den) * s.signum()
            } else {
                T::zero()
            };
            let dq = &mut out.dq[pos * d..(pos + 1) * d];
            for i in 0..d {
                let row = &c_t[i * d..(i + 1) * d];
                let dc_row = &mut dc[i * d..(i + 1) * d];
                for j in 0..d {
                    dc_row[j] += dr[i] * qv[j];
                    dq[j] += row[j] * dr[i];
                }
            }
            for j in 0..d {
                dq[j] += ds * n_t[j];
                dn[j] += ds * qv[j];
            }

            // C_t = f' C_{t-1} + i' v kᵀ,  n_t = f' n_{t-1} + i' k
            let mut df_prime = T::zero();
            let mut di_prime = T::zero();
            let dk = &mut out.dk[pos * d..(pos + 1) * d];
            let dv = &mut out.dv[pos * d..(pos + 1) * d];
            for i in 0..d {
                let dc_row = &dc[i * d..(i + 1) * d];
                let cp_row = &c_prev[i * d..(i + 1) * d];
                let mut dck = T::zero();
                for j in 0..d {
                    df_prime += dc_row[j] * cp_row[j];
                    dck += dc_row[j] * kv[j];
                    dk[j] += g.i * dc_row[j] * vv[i];
                }
                di_prime += vv[i] * dck;
                dv[i] += g.i * dck;
            }
            for j in 0..d {
                df_prime += dn[j] * n_prev[j];
                di_prime += dn[j] * kv[j];
                dk[j] += g.i * dn[j];
            }
            for x in dc.iter_mut() {
                *x *= g.f;
            }
            for x in dn.iter_mut() {
                *x *= g.f;
            }

            // gates: i' = exp(ĩ − m), f' = exp(f̃ + m_{t−1} − m)
            let gi = di_prime * g.i;
            let mut di = gi;
            let mut dm = dm_carry - gi;
            let mut df = T::zero();
            let mut dm_prev = T::zero();
            if step > 0 {
                let gf = df_prime * g.f;
                df += gf;
                dm_prev += gf;
                dm -= gf;
            }
            // m = max(f̃ + m_{t−1}, ĩ)
            if g.forget_branch {
                df += dm;
                dm_prev += dm;
            } else {
                di += dm;
            }
            out.di[pos] = di;
            out.df[pos] = df;
            dm_carry = dm_prev;
        }
        out
    }
}

impl<T: Float> Backward<T> for ScanOp<T> {
    fn name(&self) -> &'static str {
        "mlstm_scan"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (q, k, v) = (inputs[0], inputs[1], inputs[2]);
        let sh = &self.shape;
        let d = sh.head_dim;
        let per_head: Vec<HeadGrads<T>> = (0..sh.batch * sh.heads)
            .into_par_iter()
            .map(|bh| self.backward_head(bh / sh.heads, bh % sh.heads, q, k, v, grad))
            .collect();
        let mut dq = vec![T::zero(); q.len()];
        let mut dk = vec![T::zero(); q.len()];
        let mut dv = vec![T::zero(); q.len()];
        let mut di = vec![T::zero(); inputs[3].len()];
        let mut df = vec![T::zero(); inputs[3].len()];
        for (bh, hg) in per_head.iter().enumerate() {
            let (b, head) = (bh / sh.heads, bh % sh.heads);
            for pos in 0..sh.len {
                let r = sh.vec_at(b, pos, head);
                dq[r.clone()].copy_from_slice(&hg.dq[pos * d..(pos + 1) * d]);
                dk[r.clone()].copy_from_slice(&hg.dk[pos * d..(pos + 1) * d]);
                dv[r].copy_from_slice(&hg.dv[pos * d..(pos + 1) * d]);
                let gi = sh.gate_at(b, pos, head);
                di[gi] = hg.di[pos];
                df[gi] = hg.df[pos];
            }
        }
        let mk = |data, like: &Array<T>| Some(Array::new(like.shape(), data).expect("scan grad"));
        vec![
            mk(dq, q),
            mk(dk, k),
            mk(dv, v),
            mk(di, inputs[3]),
            mk(df, inputs[4]),
        ]
    }
}

impl<T: Float> Graph<T> {
    /// The fused recurrence. `q, k, v: [B,L,E]` (k pre-scaled),
    /// `i_pre, f_pre: [B,L,heads]`; returns `h̃: [B,L,E]` in input order.
    pub fn mlstm_scan(
        &self,
        q: Var,
        k: Var,
        v: Var,
        i_pre: Var,
        f_pre: Var,
        heads: usize,
        direction: Direction,
    ) -> Result<Var> {
        let save = [q, k, v, i_pre, f_pre].iter().any(|&x| self.requires_grad(x));
        self.record(&[q, k, v, i_pre, f_pre], |vals| {
            let (h, shape, trajs) =
                scan_forward(vals[0], vals[1], vals[2], vals[3], vals[4], heads, direction, save)?;
            Ok((
                h,
                ScanOp {
                    shape,
                    direction,
                    trajs,
                },
            ))
        })
    }
}

/// Projection parameters of one mLSTM cell (all applied to the same input).
#[derive(Clone, Debug)]
pub struct MLstmCell {
    pub prefix: String,
    pub width: usize,
    pub heads: usize,
}

impl MLstmCell {
    pub fn new(prefix: impl Into<String>, width: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !width.is_multiple_of(heads) {
            return Err(Error::InvalidArgument(format!(
                "width {width} is not divisible into {heads} heads"
            )));
        }
        Ok(Self {
            prefix: prefix.into(),
            width,
            heads,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    fn name(&self, leaf: &str) -> String {
        format!("{}.{leaf}", self.prefix)
    }

    /// Registers the cell's parameters: q/k/v/o projections `uniform(±1/√E)`,
    /// gate weights likewise, input-gate bias 0, forget-gate bias +1.
    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        let (e, h) = (self.width, self.heads);
        store.insert(self.name("q_proj"), init.fan_in(&[e, e], e))?;
        store.insert(self.name("k_proj"), init.fan_in(&[e, e], e))?;
        store.insert(self.name("v_proj"), init.fan_in(&[e, e], e))?;
        store.insert(self.name("igate.weight"), init.fan_in(&[e, h], e))?;
        store.insert(self.name("igate.bias"), Array::zeros(&[h]))?;
        store.insert(self.name("fgate.weight"), init.fan_in(&[e, h], e))?;
        store.insert(self.name("fgate.bias"), Array::full(&[h], T::one()))?;
        store.insert(self.name("ogate.weight"), init.fan_in(&[e, e], e))?;
        store.insert(self.name("ogate.bias"), Array::zeros(&[e]))?;
        Ok(())
    }

    pub fn num_params(width: usize, heads: usize) -> usize {
        4 * width * width + 2 * (width * heads + heads) + width
    }

    /// Full mLSTM over `s: [B,L,E]`: projections, scan, output gate.
    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, s: Var, direction: Direction) -> Result<Var> {
        let g = p.graph();
        let q = g.linear(s, p.var(&self.name("q_proj"))?, None)?;
        let k = g.linear(s, p.var(&self.name("k_proj"))?, None)?;
        let k = g.scale(k, 1.0 / (self.head_dim() as f64).sqrt())?;
        let v = g.linear(s, p.var(&self.name("v_proj"))?, None)?;
        let ip = g.linear(
            s,
            p.var(&self.name("igate.weight"))?,
            Some(p.var(&self.name("igate.bias"))?),
        )?;
        let fp = g.linear(
            s,
            p.var(&self.name("fgate.weight"))?,
            Some(p.var(&self.name("fgate.bias"))?),
        )?;
        let o = g.linear(
            s,
            p.var(&self.name("ogate.weight"))?,
            Some(p.var(&self.name("ogate.bias"))?),
        )?;
        let o = g.sigmoid(o)?;
        let h = g.mlstm_scan(q, k, v, ip, fp, self.heads, direction)?;
        g.mul(o, h)
    }

    /// One recurrent step on a single position vector `x: [E]`.
    pub fn step<T: Float>(
        &self,
        store: &ParamStore<T>,
        x: &[T],
        state: &mut MLstmState<T>,
    ) -> Result<Vec<T>> {
        let e = self.width;
        if x.len() != e || state.heads.len() != self.heads || state.head_dim != self.head_dim() {
            return Err(Error::shape(
                "mlstm_step",
                format!(
                    "input length {} / state {}×{} for width {e}, {} heads",
                    x.len(),
                    state.heads.len(),
                    state.head_dim,
                    self.heads
                ),
            ));
        }
        let get = |leaf: &str| {
            store
                .get(&self.name(leaf))
                .ok_or_else(|| Error::InvalidArgument(format!("missing `{}`", self.name(leaf))))
        };
        let project = |w: &Array<T>, b: Option<&Array<T>>| -> Vec<T> {
            let n = w.shape()[1];
            (0..n)
                .map(|j| {
                    let mut acc = b.map_or(T::zero(), |b| b.data()[j]);
                    for (i, &xi) in x.iter().enumerate() {
                        acc += xi * w.data()[i * n + j];
                    }
                    acc
                })
                .collect()
        };
        let scale = T::from_f(1.0 / (self.head_dim() as f64).sqrt());
        let q = project(get("q_proj")?, None);
        let k: Vec<T> = project(get("k_proj")?, None).into_iter().map(|v| v * scale).collect();
        let v = project(get("v_proj")?, None);
        let ip = project(get("igate.weight")?, Some(get("igate.bias")?));
        let fp = project(get("fgate.weight")?, Some(get("fgate.bias")?));
        let o = project(get("ogate.weight")?, Some(get("ogate.bias")?));
        let d = self.head_dim();
        let mut h = Vec::with_capacity(e);
        for head in 0..self.heads {
            let r = head * d..(head + 1) * d;
            h.extend(state.update_head(head, &q[r.clone()], &k[r.clone()], &v[r], ip[head], fp[head])?);
        }
        Ok(h
            .into_iter()
            .zip(o)
            .map(|(hv, ov)| {
                let sig = T::one() / (T::one() + (-ov).exp());
                hv * sig
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_scalar_head() {
        let mut st = MLstmState::<f64>::new(1, 1);
        let h = st.update_head(0, &[1.0], &[1.0], &[1.0], 0.3, -0.2).unwrap();
        assert_eq!(st.heads[0].c, vec![1.0]);
        assert_eq!(st.heads[0].n, vec![1.0]);
        assert_eq!(st.heads[0].m, 0.3);
        assert_eq!(h, vec![1.0]);
    }

    #[test]
    fn closed_input_gate_only_decays() {
        let mut st = MLstmState::<f64>::new(1, 2);
        st.update_head(0, &[1.0, 0.5], &[0.2, 0.4], &[1.0, -1.0], 0.0, 0.0)
            .unwrap();
        let before = st.heads[0].c.clone();
        let m_prev = st.heads[0].m;
        st.update_head(0, &[1.0, 0.5], &[3.0, 3.0], &[5.0, 5.0], -1e30, -0.5)
            .unwrap();
        let decay = (-0.5f64 + m_prev - st.heads[0].m).exp();
        for (a, b) in st.heads[0].c.iter().zip(&before) {
            assert!((a - decay * b).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_gates_stay_finite() {
        let mut st = MLstmState::<f32>::new(1, 4);
        let q = [10.0f32, -10.0, 10.0, -10.0];
        for t in 0..200 {
            let (i, f) = if t % 2 == 0 { (50.0, -50.0) } else { (-50.0, 50.0) };
            let h = st.update_head(0, &q, &q, &q, i, f).unwrap();
            assert!(h.iter().all(|v| v.is_finite()));
        }
        assert!(st.heads[0].c.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn scan_rejects_bad_head_split() {
        let g = Graph::<f64>::new();
        let x = g.constant(Array::zeros(&[1, 3, 6]));
        let gate = g.constant(Array::zeros(&[1, 3, 4]));
        assert!(g.mlstm_scan(x, x, x, gate, gate, 4, Direction::Forward).is_err());
    }
}
