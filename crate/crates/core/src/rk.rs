// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator for complex
//! linear systems `y' = f(y)`.
//!
//! Tableau and error estimator follow Hairer, Nørsett & Wanner (DOP853).
//! Dense output is not needed: callers integrate between fixed events and
//! the last step is shortened to land on the target exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};

const STAGES: usize = 12;

// Nodes; the right-hand side is autonomous, so they only enter the tableau check.
#[cfg_attr(not(test), allow(dead_code))]
const C: [f64; STAGES] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

// Row i holds a_{i,0..i}; entries beyond i are zero.
const A: [[f64; STAGES]; STAGES] = {
    let mut a = [[0.0; STAGES]; STAGES];
    a[1][0] = 5.26001519587677318785587544488e-2;

    a[2][0] = 1.97250569845378994544595329183e-2;
    a[2][1] = 5.91751709536136983633785987549e-2;

    a[3][0] = 2.95875854768068491816892993775e-2;
    a[3][2] = 8.87627564304205475450678981324e-2;

    a[4][0] = 2.41365134159266685502369798665e-1;
    a[4][2] = -8.84549479328286085344864962717e-1;
    a[4][3] = 9.24834003261792003115737966543e-1;

    a[5][0] = 3.7037037037037037037037037037e-2;
    a[5][3] = 1.70828608729473871279604482173e-1;
    a[5][4] = 1.25467687566822425016691814123e-1;

    a[6][0] = 3.7109375e-2;
    a[6][3] = 1.70252211019544039314978060272e-1;
    a[6][4] = 6.02165389804559606850219397283e-2;
    a[6][5] = -1.7578125e-2;

    a[7][0] = 3.70920001185047927108779319836e-2;
    a[7][3] = 1.70383925712239993810214054705e-1;
    a[7][4] = 1.07262030446373284651809199168e-1;
    a[7][5] = -1.53194377486244017527936158236e-2;
    a[7][6] = 8.27378916381402288758473766002e-3;

    a[8][0] = 6.24110958716075717114429577812e-1;
    a[8][3] = -3.36089262944694129406857109825;
    a[8][4] = -8.68219346841726006818189891453e-1;
    a[8][5] = 2.75920996994467083049415600797e1;
    a[8][6] = 2.01540675504778934086186788979e1;
    a[8][7] = -4.34898841810699588477366255144e1;

    a[9][0] = 4.77662536438264365890433908527e-1;
    a[9][3] = -2.48811461997166764192642586468;
    a[9][4] = -5.90290826836842996371446475743e-1;
    a[9][5] = 2.12300514481811942347288949897e1;
    a[9][6] = 1.52792336328824235832596922938e1;
    a[9][7] = -3.32882109689848629194453265587e1;
    a[9][8] = -2.03312017085086261358222928593e-2;

    a[10][0] = -9.3714243008598732571704021658e-1;
    a[10][3] = 5.18637242884406370830023853209;
    a[10][4] = 1.09143734899672957818500254654;
    a[10][5] = -8.14978701074692612513997267357;
    a[10][6] = -1.85200656599969598641566180701e1;
    a[10][7] = 2.27394870993505042818970056734e1;
    a[10][8] = 2.49360555267965238987089396762;
    a[10][9] = -3.0467644718982195003823669022;

    a[11][0] = 2.27331014751653820792359768449;
    a[11][3] = -1.05344954667372501984066689879e1;
    a[11][4] = -2.00087205822486249909675718444;
    a[11][5] = -1.79589318631187989172765950534e1;
    a[11][6] = 2.79488845294199600508499808837e1;
    a[11][7] = -2.85899827713502369474065508674;
    a[11][8] = -8.87285693353062954433549289258;
    a[11][9] = 1.23605671757943030647266201528e1;
    a[11][10] = 6.43392746015763530355970484046e-1;
    a
};

const B: [f64; STAGES] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

// Third-order embedded error weights: B minus the 3rd-order solution.
const E3: [f64; STAGES] = [
    B[0] - 0.244094488188976377952755905512,
    0.0,
    0.0,
    0.0,
    0.0,
    B[5],
    B[6],
    B[7],
    B[8] - 0.733846688281611857341361741547,
    B[9],
    B[10],
    B[11] - 0.220588235294117647058823529412e-1,
];

const E5: [f64; STAGES] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e+1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e+1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-13,
        }
    }
}

/// Adaptive DOP853 stepper. Keeps the last accepted step size between
/// calls so that piecewise integration does not restart from scratch.
pub struct Dop853<F> {
    rhs: F,
    tol: Tolerance,
    h: Option<f64>,
    k: Vec<Vec<Complex64>>,
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl<F> Dop853<F>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    pub fn new(rhs: F, dim: usize, tol: Tolerance) -> Self {
        Self {
            rhs,
            tol,
            h: None,
            k: vec![vec![Complex64::default(); dim]; STAGES],
            stage: vec![Complex64::default(); dim],
            y_new: vec![Complex64::default(); dim],
            steps_accepted: 0,
            steps_rejected: 0,
        }
    }

    fn rms_scaled(&self, v: &[Complex64], y: &[Complex64]) -> f64 {
        let n = v.len() as f64;
        let sum: f64 = v
            .iter()
            .zip(y)
            .map(|(e, yi)| {
                let sc = self.tol.atol + self.tol.rtol * yi.norm();
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step(&mut self, y: &[Complex64]) -> f64 {
        let dim = y.len();
        let mut f0 = vec![Complex64::default(); dim];
        (self.rhs)(y, &mut f0);
        let d0 = self.rms_scaled(y, y);
        let d1 = self.rms_scaled(&f0, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let y1: Vec<Complex64> = y.iter().zip(&f0).map(|(a, b)| a + b * h0).collect();
        let mut f1 = vec![Complex64::default(); dim];
        (self.rhs)(&y1, &mut f1);
        let diff: Vec<Complex64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let d2 = self.rms_scaled(&diff, y) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1)
    }

    /// One trial step of size `h`; returns the scaled error norm and leaves
    /// the candidate solution in `y_new`.
    fn trial(&mut self, y: &[Complex64], h: f64) -> f64 {
        let dim = y.len();
        (self.rhs)(y, &mut self.k[0]);
        for s in 1..STAGES {
            for i in 0..dim {
                let mut acc = Complex64::default();
                for (j, &a) in A[s][..s].iter().enumerate() {
                    if a != 0.0 {
                        acc += self.k[j][i] * a;
                    }
                }
                self.stage[i] = y[i] + acc * h;
            }
            (self.rhs)(&self.stage, &mut self.k[s]);
        }
        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..dim {
            let mut inc = Complex64::default();
            let mut e5 = Complex64::default();
            let mut e3 = Complex64::default();
            for s in 0..STAGES {
                let ks = self.k[s][i];
                inc += ks * B[s];
                e5 += ks * E5[s];
                e3 += ks * E3[s];
            }
            self.y_new[i] = y[i] + inc * h;
            let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
            err5 += (e5.norm() / sc).powi(2);
            err3 += (e3.norm() / sc).powi(2);
        }
        if err5 == 0.0 && err3 == 0.0 {
            return 0.0;
        }
        let denom = err5 + 0.01 * err3;
        h.abs() * err5 / (denom * dim as f64).sqrt()
    }

    /// Advance `y` from `z0` to `z1` (> z0).
    pub fn integrate(&mut self, y: &mut [Complex64], z0: f64, z1: f64) -> Result<()> {
        let mut z = z0;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y),
        };
        while z < z1 {
            let min_step = 10.0 * (z.abs().max(1.0) * f64::EPSILON);
            let remaining = z1 - z;
            let last = h >= remaining;
            let mut step = if last { remaining } else { h };
            let mut rejected = false;
            loop {
                if step < min_step && remaining > min_step {
                    return Err(Error::StepSizeUnderflow { z, h: step });
                }
                let err = self.trial(y, step);
                if err < 1.0 {
                    let mut factor = if err == 0.0 {
                        MAX_FACTOR
                    } else {
                        MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                    };
                    if rejected {
                        factor = factor.min(1.0);
                    }
                    // A shortened final step says nothing about the natural step.
                    if !(last && step < h) {
                        h = step * factor;
                    }
                    break;
                }
                rejected = true;
                self.steps_rejected += 1;
                step *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
                h = step;
            }
            self.steps_accepted += 1;
            y.copy_from_slice(&self.y_new);
            z = if step == remaining { z1 } else { z + step };
        }
        self.h = Some(h);
        Ok(())
    }
}
