//! Multi-dimensional FFT on row-major arrays, unnormalized in both directions.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

pub fn fftn(data: &mut [C64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len(), "fft shape does not match data");
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = total;
    for &n in shape {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![C64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

/// Signed integer frequency of FFT bin `i` on an axis of length `n`.
pub fn freq_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
