#![allow(dead_code)]

use mimo_noma::linalg::{complex_gaussian, CMatrix, C64};
use mimo_noma::network::{Channels, UeId};
use mimo_noma::throughput::PrecoderSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Channels with CN(0,1) entries scaled per link by a random gain in
/// `[0.2, 2]`, unit noise.
pub fn random_channels(r: &mut ChaCha8Rng, n: usize, u: usize, nr: usize, nt: usize) -> Channels {
    random_channels_noise(r, n, u, nr, nt, 1.0)
}

pub fn random_channels_noise(
    r: &mut ChaCha8Rng,
    n: usize,
    u: usize,
    nr: usize,
    nt: usize,
    noise: f64,
) -> Channels {
    let h = (0..n * n * u)
        .map(|_| {
            let g: f64 = r.random_range(0.2..2.0);
            complex_gaussian(r, nr, nt) * C64::new(g, 0.0)
        })
        .collect();
    Channels::from_parts(n, u, noise, h).unwrap()
}

/// Random precoders with each BS at power `power`.
pub fn random_precoders(r: &mut ChaCha8Rng, n: usize, u: usize, nt: usize, l: usize, power: f64) -> PrecoderSet {
    let v: Vec<CMatrix> = (0..n * u).map(|_| complex_gaussian(r, nt, l)).collect();
    let mut p = PrecoderSet::from_matrices(n, u, v).unwrap();
    for i in 0..n {
        let f = (power / p.cell_power(i)).sqrt();
        p.scale_cell(i, f);
    }
    p
}

/// Random precoders with each BS at a uniformly drawn fraction of `power`.
pub fn random_precoders_within(
    r: &mut ChaCha8Rng,
    n: usize,
    u: usize,
    nt: usize,
    l: usize,
    power: f64,
) -> PrecoderSet {
    let mut p = random_precoders(r, n, u, nt, l, power);
    for i in 0..n {
        let f: f64 = r.random_range(0.0..1.0);
        p.scale_cell(i, f.sqrt());
    }
    p
}

pub fn all_ues(n: usize, u: usize) -> Vec<UeId> {
    (0..n).flat_map(|i| (0..u).map(move |j| UeId::new(i, j))).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
