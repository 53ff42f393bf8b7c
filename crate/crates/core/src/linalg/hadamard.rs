/// In-place unnormalized fast Walsh–Hadamard transform.
///
/// `buf.len()` must be a power of two. Applying it twice multiplies by `len`.
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Sylvester construction, brute force.
    fn hadamard_entry(i: usize, j: usize) -> f64 {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[test]
    fn matches_dense_hadamard() {
        let n = 16;
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut fast = x.clone();
        fwht(&mut fast);
        for (i, f) in fast.iter().enumerate() {
            let dense: f64 = (0..n).map(|j| hadamard_entry(i, j) * x[j]).sum();
            assert!((dense - f).abs() < 1e-12);
        }
    }

    #[test]
    fn involution_up_to_scale() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let mut y = x.clone();
        fwht(&mut y);
        fwht(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a * 8.0 - b).abs() < 1e-12);
        }
    }
}
