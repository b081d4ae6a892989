//! Minimal numeric kernel: matrices, dense and graph-convolution layers with
//! analytic backpropagation, Adam, and a central-difference gradient checker.

mod adam;
mod gradcheck;
mod layers;
mod matrix;

pub use adam::{adam_step, AdamState};
pub use gradcheck::finite_diff_check;
pub use layers::{glorot_uniform, Activation, DenseCache, DenseLayer, GraphConvCache, GraphConvLayer};
pub use matrix::Matrix;

/// A container of named parameter tensors with a stable traversal order.
///
/// Gradients are represented by a value of the same type, so two containers
/// of one type always line up tensor by tensor.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data().len()).sum()
    }
}

/// Prefixes every tensor name of `inner` with `prefix.`.
pub(crate) fn prefixed<'a, P: Parameters + ?Sized>(prefix: &str, inner: &'a P) -> Vec<(String, &'a Matrix)> {
    inner
        .tensors()
        .into_iter()
        .map(|(name, m)| (format!("{prefix}.{name}"), m))
        .collect()
}

/// All parameters concatenated in traversal order.
pub fn flatten<P: Parameters + ?Sized>(params: &P) -> Vec<f64> {
    params
        .tensors()
        .into_iter()
        .flat_map(|(_, m)| m.data().to_vec())
        .collect()
}

/// Inverse of [`flatten`]. Panics if `values` has the wrong length.
pub fn unflatten<P: Parameters + ?Sized>(params: &mut P, values: &[f64]) {
    let mut offset = 0;
    for m in params.tensors_mut() {
        let n = m.data().len();
        m.data_mut().copy_from_slice(&values[offset..offset + n]);
        offset += n;
    }
    assert_eq!(offset, values.len(), "parameter count mismatch");
}

/// Sets every tensor to zero; used to build gradient accumulators.
pub fn zero_like<P: Parameters + Clone>(params: &P) -> P {
    let mut out = params.clone();
    for m in out.tensors_mut() {
        m.fill(0.0);
    }
    out
}

/// `acc += factor * other`, tensor by tensor.
pub fn accumulate<P: Parameters>(acc: &mut P, factor: f64, other: &P) {
    let src: Vec<&Matrix> = other.tensors().into_iter().map(|(_, m)| m).collect();
    for (dst, s) in acc.tensors_mut().into_iter().zip(src) {
        dst.axpy(factor, s).expect("same parameter layout");
    }
}
