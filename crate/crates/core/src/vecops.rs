//! Small dense-vector helpers over any [`Scalar`].

use crate::expr::Scalar;

/// A point or direction in `R^n`.
pub type Vector = Vec<f64>;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `a + s·b`
#[inline]
pub fn axpy<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

#[inline]
pub fn scale<T: Scalar>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `w − (⟨w,a⟩/‖a‖²)·a` without any degeneracy guard.
#[inline]
pub fn reject<T: Scalar>(w: &[T], a: &[T]) -> Vec<T> {
    let c = dot(w, a) / norm2(a);
    axpy(w, -c, a)
}

/// Lifts a real vector to constants of `T`.
pub fn lift<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::from_f64(v)).collect()
}

pub fn values<T: Scalar>(x: &[T]) -> Vector {
    x.iter().map(|v| v.value()).collect()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
