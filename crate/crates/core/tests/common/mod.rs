#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-ish random unitary by Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, m: usize) -> Array2<Complex64> {
    let mut a = gaussian_matrix(rng, m, m);
    for j in 0..m {
        for k in 0..j {
            let proj: Complex64 = (0..m).map(|i| a[[i, k]].conj() * a[[i, j]]).sum();
            for i in 0..m {
                let v = a[[i, k]];
                a[[i, j]] -= proj * v;
            }
        }
        let norm = (0..m).map(|i| a[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..m {
            a[[i, j]] /= norm;
        }
    }
    a
}

pub fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|x| x.conj())
}

pub fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Permanent by explicit sum over all permutations.
pub fn brute_permanent(a: &Array2<Complex64>) -> Complex64 {
    let k = a.nrows();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut total = c(0.0, 0.0);
    permute(&mut perm, 0, &mut |p| {
        total += p.iter().enumerate().map(|(i, &j)| a[[i, j]]).product::<Complex64>();
    });
    total
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
