//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's sequence, functional or approximation
//! code; only weight evaluation and plain data types are shared.

#![allow(dead_code)]

use nterm_core::weights::WeightFunction;
use rand::Rng;

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    Sup,
}

/// Shell index `⌈|k|_r⌉` by direct arithmetic.
pub fn shell(k: &[i64], norm: Norm) -> u64 {
    match norm {
        Norm::L1 => k.iter().map(|c| c.unsigned_abs()).sum(),
        Norm::Sup => k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0),
        Norm::L2 => {
            let sq: u64 = k.iter().map(|c| (c * c) as u64).sum();
            let mut m = (sq as f64).sqrt() as u64;
            while m * m < sq {
                m += 1;
            }
            while m > 0 && (m - 1) * (m - 1) >= sq {
                m -= 1;
            }
            m
        }
    }
}

/// Every point of `[-radius, radius]^d`.
pub fn box_points(radius: i64, d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-radius..=radius).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Shell indices of all `k` with shell at most `radius`, sorted ascending.
pub fn sorted_shells(norm: Norm, d: usize, radius: u64) -> Vec<u64> {
    let mut shells: Vec<u64> = box_points(radius as i64, d)
        .iter()
        .map(|k| shell(k, norm))
        .filter(|&m| m <= radius)
        .collect();
    shells.sort_unstable();
    shells
}

/// `ψ(shell)` for all points of shell at most `radius`, sorted nonincreasing.
pub fn sorted_weights(psi: &WeightFunction, norm: Norm, d: usize, radius: u64) -> Vec<f64> {
    let mut v: Vec<f64> = sorted_shells(norm, d, radius)
        .into_iter()
        .map(|m| psi.eval(m as f64))
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Smallest radius whose ball holds at least `count` points.
pub fn radius_for(norm: Norm, d: usize, count: usize) -> u64 {
    let mut r = 1;
    loop {
        let n = box_points(r as i64, d).iter().filter(|k| shell(k, norm) <= r).count();
        if n >= count {
            return r;
        }
        r = r * 3 / 2 + 1;
    }
}

/// `Q_n(l)` for `l = n+1, …, Ψ.len()` from explicit values `ψ̄(j)`,
/// given as logs. Entry `i` holds `Q_n(n + 1 + i)`.
pub fn q_scan(ln_psi: &[f64], s: f64, n: usize) -> Vec<f64> {
    let mut sum = Compensated::default();
    let mut out = Vec::with_capacity(ln_psi.len().saturating_sub(n));
    for (i, &lv) in ln_psi.iter().enumerate() {
        sum.add((-s * lv).exp());
        let l = i + 1;
        if l > n {
            out.push((l - n) as f64 / sum.value());
        }
    }
    out
}

/// Index of the maximum of a scan, larger index on ties.
pub fn argmax_last(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x >= xs[best] {
            best = i;
        }
    }
    best
}

/// `sup_{n < l <= L} (l - n) (Σ_{j<=l} Ψ^{-s}(j))^{-1/s}` by full scan.
pub fn h_sup_scan(ln_psi: &[f64], s: f64, n: usize) -> (f64, usize) {
    let q = q_scan(ln_psi, s, n);
    let h: Vec<f64> = q
        .iter()
        .enumerate()
        .map(|(i, &qv)| {
            let l = (n + 1 + i) as f64;
            (l - n as f64).powf(1.0 - 1.0 / s) * qv.powf(1.0 / s)
        })
        .collect();
    let i = argmax_last(&h);
    (h[i], n + 1 + i)
}

/// Minimum over all `n`-subsets `γ` of `(Σ_{k∉γ} |a_k|^p)^{1/p}`, also trying
/// coefficient replacements on `γ` (zero, the original, and perturbations).
pub fn best_nterm_sp_exhaustive<R: Rng>(amps: &[f64], n: usize, p: f64, rng: &mut R) -> f64 {
    let len = amps.len();
    if n >= len {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << len) {
        if mask.count_ones() as usize != n {
            continue;
        }
        // replacement coefficient c_k on γ contributes |a_k - c_k|^p
        for variant in 0..3 {
            let mut sum = 0.0;
            for (i, &a) in amps.iter().enumerate() {
                let kept = mask & (1 << i) != 0;
                let residual = if !kept {
                    a
                } else {
                    match variant {
                        0 => 0.0,
                        1 => a,
                        _ => a * rng.gen_range(-0.1..0.1),
                    }
                };
                sum += residual.abs().powf(p);
            }
            best = best.min(sum.powf(1.0 / p));
        }
    }
    best
}

/// Objective of the class oracle: `(Σ_{l>n} a_(l)^p)^{1/p}` with `a` sorted
/// nonincreasing.
fn tail_norm(a: &mut [f64], n: usize, p: f64) -> f64 {
    a.sort_by(|x, y| y.total_cmp(x));
    a.iter().skip(n).map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
}

fn amplitudes(psi: &[f64], mass: &[f64], q: f64, out: &mut [f64]) {
    for ((o, &w), &m) in out.iter_mut().zip(psi).zip(mass) {
        *o = w * m.max(0.0).powf(1.0 / q);
    }
}

/// Lower estimate of `sup { ‖a - G_n a‖_{l_p} : Σ (a_k/ψ_k)^q <= 1 }` over
/// finitely many coordinates, by random search followed by coordinate ascent.
///
/// The state is the mass vector `w_k = (a_k/ψ_k)^q` on the simplex, which
/// keeps every iterate feasible for all `q > 0`.
pub fn class_sup_oracle<R: Rng>(psi: &[f64], q: f64, p: f64, n: usize, iterations: usize, rng: &mut R) -> f64 {
    let dim = psi.len();
    let mut scratch = vec![0.0; dim];
    let eval = |mass: &[f64], scratch: &mut Vec<f64>| {
        amplitudes(psi, mass, q, scratch);
        tail_norm(scratch, n, p)
    };
    let normalize = |mass: &mut [f64]| {
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
    };

    // random search: random supports and random masses
    let search = iterations / 5;
    let mut best_mass = vec![1.0 / dim as f64; dim];
    let mut best = eval(&best_mass, &mut scratch);
    for _ in 0..search {
        let size = rng.gen_range(n + 1..=dim);
        let mut mass = vec![0.0; dim];
        for _ in 0..size {
            let i = rng.gen_range(0..dim);
            mass[i] += rng.gen_range(0.5..1.5);
        }
        normalize(&mut mass);
        let v = eval(&mass, &mut scratch);
        if v > best {
            best = v;
            best_mass = mass;
        }
    }

    // coordinate ascent: pairwise transfers and multi-coordinate moves
    let mut mass = best_mass;
    let mut step = 0.5;
    for it in 0..iterations - search {
        let mut trial = mass.clone();
        if it % 2 == 0 {
            let i = rng.gen_range(0..dim);
            let j = rng.gen_range(0..dim);
            if i == j || trial[i] == 0.0 {
                continue;
            }
            let t = trial[i] * step * rng.gen::<f64>();
            trial[i] -= t;
            trial[j] += t;
        } else {
            let moves = rng.gen_range(2..=dim.min(n + 3));
            for _ in 0..moves {
                let i = rng.gen_range(0..dim);
                let factor = 1.0 + step * rng.gen_range(-1.0..1.0);
                trial[i] = (trial[i] * factor).max(0.0);
                if trial[i] == 0.0 && rng.gen_bool(0.5) {
                    trial[i] = step / dim as f64;
                }
            }
            if trial.iter().all(|&m| m == 0.0) {
                continue;
            }
            normalize(&mut trial);
        }
        let v = eval(&trial, &mut scratch);
        if v > best {
            best = v;
            mass = trial;
            step = (step * 1.5).min(0.9);
        } else {
            step = (step * 0.995).max(1e-6);
        }
    }
    best
}
