//! Five-stage, L-stable, stiffly accurate SDIRK method of order 4 with an
//! embedded order-3 solution (Hairer & Wanner, Solving ODEs II, table 6.5).

use nalgebra::{DMatrix, DVector};

pub const GAMMA: f64 = 0.25;
pub const STAGES: usize = 5;

pub const C: [f64; STAGES] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];

pub const A: [[f64; STAGES]; STAGES] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];

pub const B: [f64; STAGES] = A[4];

pub const B_HAT: [f64; STAGES] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

const NEWTON_MAX_ITER: usize = 10;
const NEWTON_TOL: f64 = 1e-2;

pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

pub struct StepResult {
    pub y: DVector<f64>,
    /// Weighted RMS norm of the filtered local error estimate.
    pub err: f64,
}

/// Error weights atol + rtol·|y|.
pub fn weights(y: &DVector<f64>, y_new: Option<&DVector<f64>>, rtol: f64, atol: f64) -> DVector<f64> {
    DVector::from_iterator(
        y.len(),
        (0..y.len()).map(|i| {
            let m = y_new.map_or(y[i].abs(), |yn| y[i].abs().max(yn[i].abs()));
            atol + rtol * m
        }),
    )
}

fn wrms(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v.iter().zip(w.iter()).map(|(a, b)| (a / b).powi(2)).sum();
    (s / v.len() as f64).sqrt()
}

/// Forward-difference Jacobian of the right-hand side at (t, y).
pub fn jacobian<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &DVector<f64>) -> DMatrix<f64> {
    let n = y.len();
    let mut f0 = vec![0.0; n];
    sys.rhs(t, y.as_slice(), &mut f0);
    let mut jac = DMatrix::zeros(n, n);
    let mut yp = y.clone();
    let mut fp = vec![0.0; n];
    for k in 0..n {
        let dk = 1.5e-8 * y[k].abs().max(1e-9);
        yp[k] = y[k] + dk;
        sys.rhs(t, yp.as_slice(), &mut fp);
        for i in 0..n {
            jac[(i, k)] = (fp[i] - f0[i]) / dk;
        }
        yp[k] = y[k];
    }
    jac
}

/// One SDIRK step of size `h`. Returns `None` when Newton fails to converge.
pub fn step<S: OdeSystem + ?Sized>(
    sys: &S,
    jac: &DMatrix<f64>,
    t: f64,
    y: &DVector<f64>,
    h: f64,
    rtol: f64,
    atol: f64,
) -> Option<StepResult> {
    let n = y.len();
    let hg = h * GAMMA;
    let m = DMatrix::identity(n, n) - jac * hg;
    let lu = m.lu();
    let w = weights(y, None, rtol, atol);
    let mut ks: Vec<DVector<f64>> = Vec::with_capacity(STAGES);
    let mut f = vec![0.0; n];
    let mut big_y = y.clone();
    for i in 0..STAGES {
        let mut base = y.clone();
        for (j, k) in ks.iter().enumerate() {
            base.axpy(h * A[i][j], k, 1.0);
        }
        if let Some(k) = ks.last() {
            big_y = &base + k * hg;
        }
        let ti = t + C[i] * h;
        let mut prev = f64::INFINITY;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            sys.rhs(ti, big_y.as_slice(), &mut f);
            let mut resid = &big_y - &base;
            for r in 0..n {
                resid[r] -= hg * f[r];
            }
            let delta = lu.solve(&resid)?;
            big_y -= &delta;
            let nd = wrms(&delta, &w);
            if !nd.is_finite() {
                return None;
            }
            if nd < NEWTON_TOL {
                converged = true;
                break;
            }
            if nd > 2.0 * prev {
                return None;
            }
            prev = nd;
        }
        if !converged {
            return None;
        }
        ks.push((&big_y - &base) / hg);
    }
    let mut e = DVector::zeros(n);
    for (j, k) in ks.iter().enumerate() {
        e.axpy(h * (B[j] - B_HAT[j]), k, 1.0);
    }
    let e = lu.solve(&e)?;
    let w_new = weights(y, Some(&big_y), rtol, atol);
    Some(StepResult { err: wrms(&e, &w_new), y: big_y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_order_conditions() {
        let sb: f64 = B.iter().sum();
        assert!((sb - 1.0).abs() < 1e-14);
        let bc: f64 = B.iter().zip(C).map(|(b, c)| b * c).sum();
        assert!((bc - 0.5).abs() < 1e-14);
        let bc2: f64 = B.iter().zip(C).map(|(b, c)| b * c * c).sum();
        assert!((bc2 - 1.0 / 3.0).abs() < 1e-14);
        let bc3: f64 = B.iter().zip(C).map(|(b, c)| b * c * c * c).sum();
        assert!((bc3 - 0.25).abs() < 1e-14);
        for i in 0..STAGES {
            let row: f64 = A[i].iter().sum();
            assert!((row - C[i]).abs() < 1e-14);
        }
        let bh: f64 = B_HAT.iter().sum();
        assert!((bh - 1.0).abs() < 1e-14);
    }

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    #[test]
    fn fourth_order_convergence_on_decay() {
        let sys = Decay(1.0);
        let run = |h: f64| {
            let mut y = DVector::from_element(1, 1.0);
            let steps = (1.0 / h).round() as usize;
            for k in 0..steps {
                let j = jacobian(&sys, k as f64 * h, &y);
                y = step(&sys, &j, k as f64 * h, &y, h, 1e-12, 1e-14).unwrap().y;
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 3.7, "observed order {order}");
    }

    #[test]
    fn stiff_decay_is_damped() {
        let sys = Decay(1e6);
        let y0 = DVector::from_element(1, 1.0);
        let j = jacobian(&sys, 0.0, &y0);
        let r = step(&sys, &j, 0.0, &y0, 0.1, 1e-6, 1e-12).unwrap();
        assert!(r.y[0].abs() < 1e-3);
    }
}
