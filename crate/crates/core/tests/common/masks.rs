//! Brute-force mask metrics written directly from their definitions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use xlstm_unet::Array;

pub fn coords(i: usize, shape: &[usize]) -> Vec<i64> {
    let mut c = vec![0i64; shape.len()];
    let mut r = i;
    for ax in (0..shape.len()).rev() {
        c[ax] = (r % shape[ax]) as i64;
        r /= shape[ax];
    }
    c
}

pub fn index(c: &[i64], shape: &[usize]) -> Option<usize> {
    let mut i = 0usize;
    for (ax, &v) in c.iter().enumerate() {
        if v < 0 || v >= shape[ax] as i64 {
            return None;
        }
        i = i * shape[ax] + v as usize;
    }
    Some(i)
}

pub fn face_offsets(rank: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for ax in 0..rank {
        for d in [-1i64, 1] {
            let mut o = vec![0; rank];
            o[ax] = d;
            out.push(o);
        }
    }
    out
}

pub fn oracle_boundary(mask: &[bool], shape: &[usize]) -> Vec<Vec<i64>> {
    let offs = face_offsets(shape.len());
    (0..mask.len())
        .filter(|&i| mask[i])
        .filter(|&i| {
            let c = coords(i, shape);
            offs.iter().any(|o| {
                let n: Vec<i64> = c.iter().zip(o).map(|(a, b)| a + b).collect();
                index(&n, shape).is_none_or(|j| !mask[j])
            })
        })
        .map(|i| coords(i, shape))
        .collect()
}

pub fn min_dist(p: &[i64], set: &[Vec<i64>]) -> f64 {
    set.iter()
        .map(|q| p.iter().zip(q).map(|(a, b)| ((a - b) * (a - b)) as f64).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

pub fn mask_of(a: &Array<i32>, c: i32) -> Vec<bool> {
    a.data().iter().map(|&v| v == c).collect()
}

pub fn oracle_dsc(p: &Array<i32>, g: &Array<i32>, c: i32) -> f64 {
    let (pm, gm) = (mask_of(p, c), mask_of(g, c));
    let inter = pm.iter().zip(&gm).filter(|(a, b)| **a && **b).count() as f64;
    let tot = (pm.iter().filter(|&&b| b).count() + gm.iter().filter(|&&b| b).count()) as f64;
    if tot == 0.0 {
        1.0
    } else {
        2.0 * inter / tot
    }
}

pub fn oracle_surface(p: &Array<i32>, g: &Array<i32>, c: i32) -> Option<(Vec<f64>, Vec<f64>)> {
    let (pb, gb) = (
        oracle_boundary(&mask_of(p, c), p.shape()),
        oracle_boundary(&mask_of(g, c), g.shape()),
    );
    if pb.is_empty() || gb.is_empty() {
        return None;
    }
    Some((
        pb.iter().map(|x| min_dist(x, &gb)).collect(),
        gb.iter().map(|x| min_dist(x, &pb)).collect(),
    ))
}

pub fn oracle_nsd(p: &Array<i32>, g: &Array<i32>, c: i32, tau: f64) -> f64 {
    let pe = !p.data().contains(&c);
    let ge = !g.data().contains(&c);
    if pe && ge {
        return 1.0;
    }
    let Some((dp, dg)) = oracle_surface(p, g, c) else {
        return 0.0;
    };
    let ok = dp.iter().chain(&dg).filter(|&&d| d <= tau).count();
    ok as f64 / (dp.len() + dg.len()) as f64
}

pub fn oracle_hd95(p: &Array<i32>, g: &Array<i32>, c: i32) -> Option<f64> {
    let (dp, dg) = oracle_surface(p, g, c)?;
    let mut all: Vec<f64> = dp.into_iter().chain(dg).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = 0.95 * (all.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    Some(all[lo] * (1.0 - (rank - lo as f64)) + all[hi] * (rank - lo as f64))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        self.0[i] = r;
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn oracle_components(mask: &[bool], shape: &[usize]) -> Vec<usize> {
    let mut uf = UnionFind((0..mask.len()).collect());
    let offs = face_offsets(shape.len());
    for i in 0..mask.len() {
        if !mask[i] {
            continue;
        }
        let c = coords(i, shape);
        for o in &offs {
            let n: Vec<i64> = c.iter().zip(o).map(|(a, b)| a + b).collect();
            if let Some(j) = index(&n, shape) {
                if mask[j] {
                    uf.union(i, j);
                }
            }
        }
    }
    (0..mask.len()).map(|i| if mask[i] { uf.find(i) + 1 } else { 0 }).collect()
}

/// Maximum one-to-one matching over pairs with IoU ≥ thresh (Kuhn).
pub fn oracle_f1(pred: &Array<i32>, gt_inst: &Array<i32>, thresh: f64) -> f64 {
    let pc = oracle_components(&pred.data().iter().map(|&v| v > 0).collect::<Vec<_>>(), pred.shape());
    let mut pids: Vec<usize> = pc.iter().copied().filter(|&v| v > 0).collect();
    pids.sort_unstable();
    pids.dedup();
    let mut gids: Vec<i32> = gt_inst.data().iter().copied().filter(|&v| v > 0).collect();
    gids.sort_unstable();
    gids.dedup();
    if pids.is_empty() && gids.is_empty() {
        return 1.0;
    }
    let mut edges = vec![Vec::new(); pids.len()];
    for (a, &p) in pids.iter().enumerate() {
        for (b, &g) in gids.iter().enumerate() {
            let (mut inter, mut uni) = (0usize, 0usize);
            for (x, y) in pc.iter().zip(gt_inst.data()) {
                let (ip, ig) = (*x == p, *y == g);
                inter += (ip && ig) as usize;
                uni += (ip || ig) as usize;
            }
            if inter > 0 && inter as f64 / uni as f64 >= thresh {
                edges[a].push(b);
            }
        }
    }
    fn augment(a: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &b in &edges[a] {
            if !seen[b] {
                seen[b] = true;
                if owner[b].is_none_or(|o| augment(o, edges, seen, owner)) {
                    owner[b] = Some(a);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; gids.len()];
    let mut tp = 0;
    for a in 0..pids.len() {
        if augment(a, &edges, &mut vec![false; gids.len()], &mut owner) {
            tp += 1;
        }
    }
    2.0 * tp as f64 / (pids.len() + gids.len()) as f64
}

pub fn blobs(shape: &[usize], classes: i32, rng: &mut ChaCha8Rng) -> Array<i32> {
    let mut a = Array::full(shape, 0i32);
    for c in 1..classes {
        for _ in 0..rng.random_range(1..4) {
            let centre: Vec<f64> = shape.iter().map(|&s| rng.random_range(0.0..s as f64)).collect();
            let r: f64 = rng.random_range(1.5..5.0);
            for i in 0..a.len() {
                let d2: f64 = coords(i, shape)
                    .iter()
                    .zip(&centre)
                    .map(|(&x, &m)| (x as f64 - m).powi(2))
                    .sum();
                if d2 <= r * r {
                    a.data_mut()[i] = c;
                }
            }
        }
    }
    // salt noise
    for v in a.data_mut() {
        if rng.random_bool(0.02) {
            *v = rng.random_range(0..classes);
        }
    }
    a
}

