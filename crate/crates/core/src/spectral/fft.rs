//! Separable n-dimensional FFT over row-major buffers.
//!
//! Plans are cached per thread, so concurrent callers never share a planner.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalised transform in both directions; an inverse after a forward
/// multiplies by `data.len()`.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let ndim = shape.len();
    let mut line_buf: Vec<Complex64> = Vec::new();
    for axis in 0..ndim {
        let len = shape[axis];
        if len == 1 {
            continue;
        }
        let fft = plan(len, inverse);
        let stride: usize = shape[axis + 1..].iter().product();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let outer: usize = shape[..axis].iter().product();
        line_buf.resize(data.len(), Complex64::default());
        // Gather every line along `axis` into a contiguous block.
        let block = len * stride;
        for o in 0..outer {
            let base = o * block;
            for s in 0..stride {
                let dst = base + s * len;
                for j in 0..len {
                    line_buf[dst + j] = data[base + j * stride + s];
                }
            }
        }
        fft.process_with_scratch(&mut line_buf, &mut scratch);
        for o in 0..outer {
            let base = o * block;
            for s in 0..stride {
                let src = base + s * len;
                for j in 0..len {
                    data[base + j * stride + s] = line_buf[src + j];
                }
            }
        }
    }
}
