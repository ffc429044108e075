use crate::tensor::kernels;
use crate::Scalar;

/// Contracts every axis that has a vector, leaving the `None` axes in order.
pub(crate) fn reduce<T: Scalar>(data: &[T], shape: &[usize], vecs: &[Option<&[T]>]) -> Vec<T> {
    debug_assert_eq!(shape.len(), vecs.len());
    let mut cur: Option<Vec<T>> = None;
    let mut cur_shape = shape.to_vec();
    for a in (0..shape.len()).rev() {
        if let Some(v) = vecs[a] {
            let src = cur.as_deref().unwrap_or(data);
            let next = kernels::ttv(src, &cur_shape, a, v);
            cur_shape.remove(a);
            cur = Some(next);
        }
    }
    cur.unwrap_or_else(|| data.to_vec())
}

/// Outer product of the vectors, row-major, scaled by `w`, added to `out`.
pub(crate) fn add_outer<T: Scalar>(out: &mut [T], vecs: &[&[T]], w: T) {
    let mut buf = vec![w];
    for v in vecs {
        let mut next = Vec::with_capacity(buf.len() * v.len());
        for &b in &buf {
            for &x in *v {
                next.push(b * x);
            }
        }
        buf = next;
    }
    debug_assert_eq!(buf.len(), out.len());
    for (o, b) in out.iter_mut().zip(buf) {
        *o = *o + b;
    }
}

/// `⟨t, v₀ ⊗ v₁ ⊗ …⟩`.
pub(crate) fn full_contract<T: Scalar>(data: &[T], shape: &[usize], vecs: &[&[T]]) -> T {
    let opts: Vec<Option<&[T]>> = vecs.iter().map(|v| Some(*v)).collect();
    reduce(data, shape, &opts)[0]
}
