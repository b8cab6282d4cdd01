//! Scalar abstraction so the numeric pipeline can run in `f32` for synthesis
//! speed and in `f64` for oracle-grade verification (gradient checks, exact
//! transport oracles).

use ndarray::{ArrayView2, ArrayViewMut2, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the pipeline.
pub trait Real: NdFloat + FromPrimitive + std::iter::Sum<Self> {
    /// Converts an `f64` literal; panics only on NaN literals, which never
    /// appear in code paths using this.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Draws one standard normal sample.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `c = alpha * a @ b + beta * c` on strided views, dispatching to the
    /// packed BLAS-style kernel for this scalar type.
    fn gemm(
        alpha: Self,
        a: &ArrayView2<'_, Self>,
        b: &ArrayView2<'_, Self>,
        beta: Self,
        c: &mut ArrayViewMut2<'_, Self>,
    );
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn gemm(
                alpha: Self,
                a: &ArrayView2<'_, Self>,
                b: &ArrayView2<'_, Self>,
                beta: Self,
                c: &mut ArrayViewMut2<'_, Self>,
            ) {
                let (m, k) = a.dim();
                let (k2, n) = b.dim();
                let (cm, cn) = c.dim();
                assert_eq!(k, k2, "gemm inner dimensions differ");
                assert_eq!((m, n), (cm, cn), "gemm output shape differs");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    c.mapv_inplace(|v| beta * v);
                    return;
                }
                let (rsa, csa) = (a.strides()[0], a.strides()[1]);
                let (rsb, csb) = (b.strides()[0], b.strides()[1]);
                let (rsc, csc) = (c.strides()[0], c.strides()[1]);
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);
