use crate::activation::Activation;
use crate::gemm::gemm;
use crate::tensor::Tensor;

pub(super) fn forward(params: &[Tensor], x: &Tensor, units: usize, act: Activation) -> Tensor {
    let batch = x.batch();
    let d = x.row_len();
    let mut z = vec![0.0; batch * units];
    gemm(batch, d, units, x.data(), false, params[0].data(), false, 0.0, &mut z);
    for row in z.chunks_mut(units) {
        for (v, b) in row.iter_mut().zip(params[1].data()) {
            *v += b;
        }
    }
    act.apply(&mut z, units);
    Tensor::new(vec![batch, units], z).expect("dense shape")
}

pub(super) fn backward(
    params: &[Tensor],
    x: &Tensor,
    y: &Tensor,
    grad_out: &Tensor,
    units: usize,
    act: Activation,
) -> (Tensor, Vec<Tensor>) {
    let batch = x.batch();
    let d = x.row_len();
    let mut dz = grad_out.data().to_vec();
    act.backward(y.data(), &mut dz, units);
    let mut dw = vec![0.0; d * units];
    gemm(d, batch, units, x.data(), true, &dz, false, 0.0, &mut dw);
    let mut db = vec![0.0; units];
    for row in dz.chunks(units) {
        for (a, v) in db.iter_mut().zip(row) {
            *a += v;
        }
    }
    let mut dx = vec![0.0; batch * d];
    gemm(batch, units, d, &dz, false, params[0].data(), true, 0.0, &mut dx);
    (
        Tensor::new(x.shape().to_vec(), dx).expect("input shape"),
        vec![
            Tensor::new(vec![d, units], dw).expect("kernel shape"),
            Tensor::new(vec![units], db).expect("bias shape"),
        ],
    )
}
