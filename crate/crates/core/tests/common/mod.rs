#![allow(dead_code)]

use cvdiscord_core::states::{CovarianceMatrix, GaussianBipartiteState, QuadratureMeans};
use nalgebra::{Matrix2, Matrix4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference_matrix() -> Matrix4<f64> {
    Matrix4::new(
        15.96, 0.0, 17.58, 0.0, //
        0.0, 14.37, 0.0, 13.55, //
        17.58, 0.0, 22.62, 0.0, //
        0.0, 13.55, 0.0, 14.81,
    )
}

pub fn reference_state() -> GaussianBipartiteState {
    GaussianBipartiteState::zero_mean(CovarianceMatrix::new(reference_matrix(), 1.0).unwrap())
}

fn rot2(t: f64) -> Matrix2<f64> {
    let (s, c) = t.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn blockdiag(a: Matrix2<f64>, b: Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
    m
}

fn squeezer(r1: f64, r2: f64) -> Matrix4<f64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new((-r1).exp(), r1.exp(), (-r2).exp(), r2.exp()))
}

fn mixer(tau: f64) -> Matrix4<f64> {
    let (s, c) = tau.sin_cos();
    let mut m = Matrix4::identity() * c;
    for i in 0..2 {
        m[(i, i + 2)] = s;
        m[(i + 2, i)] = -s;
    }
    m
}

/// `S·diag(ν₁, ν₁, ν₂, ν₂)·Sᵀ` with `S` a product of local rotations,
/// single-mode squeezers and a two-mode mixer: always physical.
pub fn random_cov<R: Rng>(rng: &mut R, v0: f64, max_r: f64) -> Matrix4<f64> {
    let n1 = v0 * rng.random_range(1.0..3.0);
    let n2 = v0 * rng.random_range(1.0..3.0);
    let base = Matrix4::from_diagonal(&nalgebra::Vector4::new(n1, n1, n2, n2));
    let tau = std::f64::consts::TAU;
    let s = blockdiag(rot2(rng.random_range(0.0..tau)), rot2(rng.random_range(0.0..tau)))
        * mixer(rng.random_range(0.0..tau))
        * squeezer(rng.random_range(0.0..max_r), rng.random_range(0.0..max_r))
        * blockdiag(rot2(rng.random_range(0.0..tau)), rot2(rng.random_range(0.0..tau)));
    let m = s * base * s.transpose();
    (m + m.transpose()) * 0.5
}

pub fn random_state<R: Rng>(rng: &mut R, v0: f64, max_r: f64, with_means: bool) -> GaussianBipartiteState {
    let cov = CovarianceMatrix::new(random_cov(rng, v0, max_r), v0).unwrap();
    let means = if with_means {
        QuadratureMeans::new([0, 1, 2, 3].map(|_| rng.random_range(-2.0..2.0))).unwrap()
    } else {
        QuadratureMeans::zero()
    };
    GaussianBipartiteState::new(means, cov)
}

/// Product state with random squeezed thermal marginals.
pub fn random_product<R: Rng>(rng: &mut R, v0: f64, max_r: f64) -> GaussianBipartiteState {
    let tau = std::f64::consts::TAU;
    let local = |rng: &mut R| {
        let nu = v0 * rng.random_range(1.0..3.0);
        let r: f64 = rng.random_range(0.0..max_r);
        let d = Matrix2::new(nu * (-2.0 * r).exp(), 0.0, 0.0, nu * (2.0 * r).exp());
        let q = rot2(rng.random_range(0.0..tau));
        q * d * q.transpose()
    };
    let m = blockdiag(local(rng), local(rng));
    GaussianBipartiteState::zero_mean(CovarianceMatrix::new((m + m.transpose()) * 0.5, v0).unwrap())
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

pub fn trapezoid2<F: Fn(f64, f64) -> f64>(f: F, (x0, x1): (f64, f64), (y0, y1): (f64, f64), n: usize) -> f64 {
    trapezoid(|x| trapezoid(|y| f(x, y), y0, y1, n), x0, x1, n)
}

/// Gauss–Legendre nodes and weights on [−1, 1] (5 points).
pub const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Integral of `f` over the rectangle by a 5×5 Gauss–Legendre rule.
pub fn cell_integral<F: Fn(f64, f64) -> f64>(f: &F, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> f64 {
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut s = 0.0;
    for (u, wu) in GL5 {
        for (v, wv) in GL5 {
            s += wu * wv * f(cx + hx * u, cy + hy * v);
        }
    }
    s * hx * hy
}
