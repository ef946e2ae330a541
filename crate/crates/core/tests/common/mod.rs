//! Reference implementations the library is checked against. They favour
//! obviousness over speed.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use retigrade_core::LesionMask;

/// Region sizes by breadth-first flood fill over 8-neighbours, sorted.
pub fn flood_fill_sizes(width: usize, height: usize, pixels: &[bool]) -> Vec<usize> {
    let mut seen = vec![false; pixels.len()];
    let mut sizes = Vec::new();
    for start in 0..pixels.len() {
        if !pixels[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (r, c) = ((p / width) as i64, (p % width) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= height as i64 || nc >= width as i64 {
                        continue;
                    }
                    let q = nr as usize * width + nc as usize;
                    if pixels[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable();
    sizes
}

pub fn mask_sizes(mask: &LesionMask) -> Vec<usize> {
    flood_fill_sizes(mask.width(), mask.height(), mask.pixels())
}

pub fn random_pixels(rng: &mut impl Rng, len: usize, density: f64) -> Vec<bool> {
    (0..len).map(|_| rng.random_bool(density)).collect()
}

/// Single-pass mean and population variance.
pub fn welford(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in values {
        n += 1.0;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    (mean, if n > 0.0 { m2 / n } else { 0.0 })
}

/// `w` is row-major `rows x x.len()`.
pub fn matvec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..b.len()).map(|o| b[o] + (0..cols).map(|i| w[o * cols + i] * x[i]).sum::<f64>()).collect()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `-log softmax(logits)[label]` computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// Central difference of `f` along each coordinate of `x`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
