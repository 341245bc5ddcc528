//! Closed-form oracle for the conjugate Gaussian toy model.
//!
//! Everything here is driven by the minibatch statistic
//! `B = (N/n) sum_i X_tau_i / (2 sigma_x^2)`: its first four moments (exact
//! symmetric-polynomial combinatorics, both sampling modes), the induced
//! moment recursions of the chain `theta' = (1 - Ah) theta + h B + sqrt(h) g xi`,
//! the asymptotic bias/variance formulas, and the exact MSE of the sample
//! average of `theta^2` evaluated in O(M) via cumulative geometric sums.
//!
//! The noise multiplier `g` is 1 for SGLD and `1 - (h/2) Var(B)` for mSGLD
//! with the exact covariance.

use crate::error::{Error, Result};
use crate::gradients::{MinibatchScheme, SamplingMode};
use crate::models::GaussianConjugateModel;

/// Power sums `p_k = sum_i x_i^k`, k = 1..4.
pub fn power_sums(data: &[f64]) -> [f64; 4] {
    let mut p = [0.0; 4];
    for &x in data {
        let x2 = x * x;
        p[0] += x;
        p[1] += x2;
        p[2] += x2 * x;
        p[3] += x2 * x2;
    }
    p
}

/// Elementary symmetric polynomials `e_1..e_4` via Newton's identities.
pub fn elementary_symmetric(p: &[f64; 4]) -> [f64; 4] {
    let e1 = p[0];
    let e2 = (e1 * p[0] - p[1]) / 2.0;
    let e3 = (-e1 * p[1] + e2 * p[0] + p[2]) / 3.0;
    let e4 = (e1 * p[2] - e2 * p[1] + e3 * p[0] - p[3]) / 4.0;
    [e1, e2, e3, e4]
}

/// Brute-force `e_k`: sum of all k-fold products over index subsets.
/// Test oracle for [`elementary_symmetric`]; feasible for small N only.
pub fn elementary_symmetric_enumerated(data: &[f64], k: usize) -> f64 {
    fn rec(data: &[f64], start: usize, left: usize, prod: f64, acc: &mut f64) {
        if left == 0 {
            *acc += prod;
            return;
        }
        for i in start..data.len() {
            rec(data, i + 1, left - 1, prod * data[i], acc);
        }
    }
    let mut acc = 0.0;
    rec(data, 0, k, 1.0, &mut acc);
    acc
}

/// Exact `(E B, E B^2, E B^3, E B^4)` for
/// `B = (N/n) sum_{i=1}^{n} X_tau_i / (2 sigma_x^2)` under `scheme`.
///
/// Without replacement the k-th moment of the index sum decomposes over
/// equal-index patterns, each pattern contributing
/// `multiplicity * Mom` with the multiplicity a falling factorial of n and
/// `Mom` an expectation over distinct uniform indices expressed in the
/// power sums and elementary symmetric polynomials. Falling factorials
/// vanish whenever n is too small for a pattern, which makes the formulas
/// total (no extrapolation); enumeration validates them for N <= 8.
pub fn b_moments(data: &[f64], sigma_x_sq: f64, scheme: &MinibatchScheme) -> Result<[f64; 4]> {
    scheme.validate(data.len())?;
    if !(sigma_x_sq > 0.0) {
        return Err(Error::InvalidArgument("sigma_x_sq must be positive".into()));
    }
    let nn = data.len() as f64;
    let n = scheme.n as f64;
    let p = power_sums(data);
    let e = elementary_symmetric(&p);

    // raw moments of the index-sum S = sum X_tau_i
    let (es1, es2, es3, es4) = match scheme.mode {
        SamplingMode::WithReplacement => {
            // i.i.d. uniform draws: per-draw moments m_k = p_k / N
            let m1 = p[0] / nn;
            let m2 = p[1] / nn;
            let m3 = p[2] / nn;
            let m4 = p[3] / nn;
            let f2 = n * (n - 1.0);
            let f3 = f2 * (n - 2.0);
            let f4 = f3 * (n - 3.0);
            let es1 = n * m1;
            let es2 = n * m2 + f2 * m1 * m1;
            let es3 = n * m3 + 3.0 * f2 * m2 * m1 + f3 * m1 * m1 * m1;
            let es4 = n * m4
                + 4.0 * f2 * m3 * m1
                + 3.0 * f2 * m2 * m2
                + 6.0 * f3 * m2 * m1 * m1
                + f4 * m1 * m1 * m1 * m1;
            (es1, es2, es3, es4)
        }
        SamplingMode::WithoutReplacement => {
            let f2 = n * (n - 1.0);
            let f3 = f2 * (n - 2.0);
            let f4 = f3 * (n - 3.0);
            let nf2 = nn * (nn - 1.0);
            let nf3 = nf2 * (nn - 2.0);
            let nf4 = nf3 * (nn - 3.0);
            let mut acc = [0.0; 4];
            acc[0] = n * p[0] / nn;
            // E S^2: patterns (1,1) and (2)
            let mut s2 = n * p[1] / nn;
            if f2 != 0.0 {
                s2 += f2 * 2.0 * e[1] / nf2;
            }
            acc[1] = s2;
            // E S^3: patterns (1,1,1), (2,1), (3)
            let mut s3 = n * p[2] / nn;
            if f2 != 0.0 {
                s3 += 3.0 * f2 * (p[0] * p[1] - p[2]) / nf2;
            }
            if f3 != 0.0 {
                s3 += f3 * 6.0 * e[2] / nf3;
            }
            acc[2] = s3;
            // E S^4: patterns (1,1,1,1), (2,1,1), (2,2), (3,1), (4)
            let mut s4 = n * p[3] / nn;
            if f2 != 0.0 {
                s4 += 3.0 * f2 * (p[1] * p[1] - p[3]) / nf2;
                s4 += 4.0 * f2 * (p[2] * p[0] - p[3]) / nf2;
            }
            if f3 != 0.0 {
                s4 += 6.0 * f3 * (2.0 * e[1] * p[1] - 2.0 * p[2] * p[0] + 2.0 * p[3]) / nf3;
            }
            if f4 != 0.0 {
                s4 += f4 * 24.0 * e[3] / nf4;
            }
            acc[3] = s4;
            (acc[0], acc[1], acc[2], acc[3])
        }
    };

    let c = nn / (2.0 * n * sigma_x_sq);
    Ok([c * es1, c * c * es2, c * c * c * es3, c * c * c * c * es4])
}

/// Exhaustive-enumeration oracle for [`b_moments`]: averages `B^k` over all
/// `C(N, n)` subsets (without replacement) or all `N^n` ordered tuples
/// (with replacement). Errors when the enumeration would exceed ~10^7 terms.
pub fn b_moments_enumerated(
    data: &[f64],
    sigma_x_sq: f64,
    scheme: &MinibatchScheme,
) -> Result<[f64; 4]> {
    scheme.validate(data.len())?;
    let nn = data.len();
    let c = nn as f64 / (2.0 * scheme.n as f64 * sigma_x_sq);
    let mut acc = [0.0; 4];
    let mut count = 0u64;
    match scheme.mode {
        SamplingMode::WithoutReplacement => {
            fn rec(
                data: &[f64],
                start: usize,
                left: usize,
                sum: f64,
                c: f64,
                acc: &mut [f64; 4],
                count: &mut u64,
            ) {
                if left == 0 {
                    let b = c * sum;
                    let b2 = b * b;
                    acc[0] += b;
                    acc[1] += b2;
                    acc[2] += b2 * b;
                    acc[3] += b2 * b2;
                    *count += 1;
                    return;
                }
                for i in start..data.len() {
                    rec(data, i + 1, left - 1, sum + data[i], c, acc, count);
                }
            }
            rec(data, 0, scheme.n, 0.0, c, &mut acc, &mut count);
        }
        SamplingMode::WithReplacement => {
            let total = (nn as f64).powi(scheme.n as i32);
            if total > 1e7 {
                return Err(Error::InvalidArgument(format!(
                    "enumeration of {total:.0} tuples is infeasible"
                )));
            }
            fn rec(data: &[f64], left: usize, sum: f64, c: f64, acc: &mut [f64; 4], count: &mut u64) {
                if left == 0 {
                    let b = c * sum;
                    let b2 = b * b;
                    acc[0] += b;
                    acc[1] += b2;
                    acc[2] += b2 * b;
                    acc[3] += b2 * b2;
                    *count += 1;
                    return;
                }
                for &x in data {
                    rec(data, left - 1, sum + x, c, acc, count);
                }
            }
            rec(data, scheme.n, 0.0, c, &mut acc, &mut count);
        }
    }
    for a in acc.iter_mut() {
        *a /= count as f64;
    }
    Ok(acc)
}

/// Which injected-noise scaling the analytic machinery should assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Multiplier 1 (plain SGLD; also Euler via a full-batch scheme).
    Sgld,
    /// Multiplier `1 - (h/2) Var(B)` (mSGLD with the exact covariance).
    Msgld,
}

/// Precomputed analytic state for one `(model, scheme)` pair.
#[derive(Debug, Clone)]
pub struct ToyAnalytic {
    pub a: f64,
    pub mu_p: f64,
    pub sigma_p_sq: f64,
    pub power_sums: [f64; 4],
    pub elementary: [f64; 4],
    /// `E[B^k]`, k = 1..4.
    pub b: [f64; 4],
    pub var_b: f64,
}

impl ToyAnalytic {
    pub fn new(model: &GaussianConjugateModel, scheme: &MinibatchScheme) -> Result<Self> {
        let (mu_p, sigma_p_sq, a) = model.posterior_params();
        let p = power_sums(model.data());
        let e = elementary_symmetric(&p);
        let b = b_moments(model.data(), model.sigma_x_sq, scheme)?;
        let var_b = b[1] - b[0] * b[0];
        Ok(ToyAnalytic {
            a,
            mu_p,
            sigma_p_sq,
            power_sums: p,
            elementary: e,
            b,
            var_b,
        })
    }

    /// Noise multiplier `g` at step size `h` for the given scheme.
    pub fn noise_multiplier(&self, h: f64, noise: NoiseModel) -> f64 {
        match noise {
            NoiseModel::Sgld => 1.0,
            NoiseModel::Msgld => 1.0 - 0.5 * h * self.var_b,
        }
    }

    fn check_var_denominator(&self, h: f64) -> Result<f64> {
        let denom = 2.0 * self.a - self.a * self.a * h;
        if !(h > 0.0) || denom <= 0.0 {
            return Err(Error::Domain(format!(
                "step size {h} outside (0, 2/A) with A = {}",
                self.a
            )));
        }
        Ok(denom)
    }

    /// `Var(theta_inf)` for SGLD: `(1 + h Var B) / (2A - A^2 h)`.
    pub fn asymptotic_var_sgld(&self, h: f64) -> Result<f64> {
        let denom = self.check_var_denominator(h)?;
        Ok((1.0 + h * self.var_b) / denom)
    }

    /// `Var(theta_inf)` for mSGLD: `1/(2A - A^2 h) + h^2 Var^2 B / (4 (2A - A^2 h))`.
    pub fn asymptotic_var_msgld(&self, h: f64) -> Result<f64> {
        let denom = self.check_var_denominator(h)?;
        Ok((1.0 + 0.25 * h * h * self.var_b * self.var_b) / denom)
    }

    /// Leading-order excess asymptotic bias of SGLD over Euler for the
    /// second moment: `h Var(B) / (2A)`.
    pub fn excess_bias_leading_sgld(&self, h: f64) -> f64 {
        h * self.var_b / (2.0 * self.a)
    }

    /// Exact excess over the Euler variance at finite h (not just the
    /// leading term): `h Var(B) / (2A - A^2 h)`.
    pub fn excess_bias_exact_sgld(&self, h: f64) -> Result<f64> {
        let denom = self.check_var_denominator(h)?;
        Ok(h * self.var_b / denom)
    }

    pub fn excess_bias_exact_msgld(&self, h: f64) -> Result<f64> {
        let denom = self.check_var_denominator(h)?;
        Ok(0.25 * h * h * self.var_b * self.var_b / denom)
    }

    /// Exact moments `E[theta_j^p]`, p = 1..4, for the post-update states
    /// `theta_1 .. theta_M` of the chain started at `theta0`.
    pub fn moment_trajectory(
        &self,
        h: f64,
        m_steps: usize,
        theta0: f64,
        noise: NoiseModel,
    ) -> MomentTrajectory {
        let a = 1.0 - self.a * h;
        let g = self.noise_multiplier(h, noise);
        let g2h = g * g * h;
        let [b1, b2, b3, b4] = self.b;
        let (hb1, h2b2, h3b3, h4b4) = (h * b1, h * h * b2, h * h * h * b3, h * h * h * h * b4);
        let mut m = std::array::from_fn::<Vec<f64>, 4, _>(|_| Vec::with_capacity(m_steps));
        let (mut m1, mut m2, mut m3, mut m4) = (
            theta0,
            theta0 * theta0,
            theta0 * theta0 * theta0,
            theta0 * theta0 * theta0 * theta0,
        );
        for _ in 0..m_steps {
            let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
            let n1 = a * m1 + hb1;
            let n2 = a2 * m2 + 2.0 * a * m1 * hb1 + h2b2 + g2h;
            let n3 = a3 * m3 + 3.0 * a2 * m2 * hb1 + 3.0 * a * m1 * h2b2 + h3b3
                + 3.0 * g2h * (a * m1 + hb1);
            let n4 = a4 * m4
                + 4.0 * a3 * m3 * hb1
                + 6.0 * a2 * m2 * h2b2
                + 4.0 * a * m1 * h3b3
                + h4b4
                + 6.0 * g2h * (a2 * m2 + 2.0 * a * m1 * hb1 + h2b2)
                + 3.0 * g2h * g2h;
            m1 = n1;
            m2 = n2;
            m3 = n3;
            m4 = n4;
            m[0].push(m1);
            m[1].push(m2);
            m[2].push(m3);
            m[3].push(m4);
        }
        MomentTrajectory { m }
    }

    /// Exact MSE of `S_2 = (1/M) sum_{j=1}^{M} theta_j^2` against the true
    /// posterior second moment. O(M): the double sum over cross terms
    /// `E[theta_i^2 theta_j^2]` collapses through the decomposition
    /// `theta_j = a^m theta_i + D_m` (D_m independent of theta_i) into three
    /// cumulative geometric tail sums.
    pub fn mse2(&self, h: f64, m_steps: usize, theta0: f64, noise: NoiseModel) -> Result<f64> {
        if m_steps == 0 {
            return Err(Error::InvalidArgument("M must be >= 1".into()));
        }
        if !(h > 0.0) || h * self.a >= 1.0 {
            return Err(Error::Domain(format!(
                "step size {h} outside the stable range (0, 1/A) with A = {}",
                self.a
            )));
        }
        let traj = self.moment_trajectory(h, m_steps, theta0, noise);
        let a = 1.0 - self.a * h;
        let g = self.noise_multiplier(h, noise);
        let b1 = self.b[0];
        let hb1 = h * b1;
        // per-step increment variance of D: h^2 Var B + g^2 h
        let step_var = h * h * self.var_b + g * g * h;
        let tau = self.mu_p * self.mu_p + self.sigma_p_sq;
        let mf = m_steps as f64;

        let es2 = traj.m[1].iter().sum::<f64>() / mf;

        // T_p(L) = sum_{m=1}^{L} (coefficient of m_p in E[theta_i^2 theta_{i+m}^2])
        // with sigma1(m) = sum_{l<m} a^l, sigma2(m) = sum_{l<m} a^{2l}:
        //   T4: a^{2m}; T3: 2 a^m h b1 sigma1(m);
        //   T2: h^2 b1^2 sigma1(m)^2 + step_var sigma2(m)
        let mut t4 = vec![0.0; m_steps];
        let mut t3 = vec![0.0; m_steps];
        let mut t2 = vec![0.0; m_steps];
        let (mut sig1, mut sig2) = (0.0, 0.0); // sigma1(m), sigma2(m)
        let (mut pa, mut pa2) = (1.0, 1.0); // a^{m-1}, a^{2(m-1)}
        let (mut am, mut a2m) = (1.0, 1.0); // a^m, a^{2m}
        let (mut t4v, mut t3v, mut t2v) = (0.0, 0.0, 0.0);
        for m in 1..m_steps {
            sig1 += pa;
            sig2 += pa2;
            pa *= a;
            pa2 *= a * a;
            am *= a;
            a2m *= a * a;
            t4v += a2m;
            t3v += 2.0 * am * hb1 * sig1;
            t2v += hb1 * hb1 * sig1 * sig1 + step_var * sig2;
            t4[m] = t4v;
            t3[m] = t3v;
            t2[m] = t2v;
        }

        let mut sum = 0.0; // sum_j m4_j + 2 sum_{i<j} E[theta_i^2 theta_j^2]
        for i in 0..m_steps {
            let l = m_steps - 1 - i;
            sum += traj.m[3][i]
                + 2.0 * (traj.m[3][i] * t4[l] + traj.m[2][i] * t3[l] + traj.m[1][i] * t2[l]);
        }
        let es2_sq = sum / (mf * mf);
        Ok(es2_sq - 2.0 * tau * es2 + tau * tau)
    }

    /// Streams `MSE(S_2; M)` for M = 1, 2, ... in a single O(M) forward
    /// pass, by tracking the joint moments (E S, E S theta, E S theta^2,
    /// E S^2) of the partial sum `S = sum theta_j^2` alongside the four
    /// state moments. `visit(m, mse)` returns false to stop the scan.
    fn scan_mse2(
        &self,
        h: f64,
        theta0: f64,
        noise: NoiseModel,
        m_cap: u64,
        mut visit: impl FnMut(u64, f64) -> bool,
    ) -> Result<()> {
        if m_cap == 0 {
            return Err(Error::InvalidArgument("M must be >= 1".into()));
        }
        if !(h > 0.0) || h * self.a >= 1.0 {
            return Err(Error::Domain(format!(
                "step size {h} outside the stable range (0, 1/A) with A = {}",
                self.a
            )));
        }
        let a = 1.0 - self.a * h;
        let g = self.noise_multiplier(h, noise);
        let g2h = g * g * h;
        let [b1, b2, b3, b4] = self.b;
        // moments of the state-independent increment W = h B + sqrt(h) g xi
        let c1 = h * b1;
        let c2 = h * h * b2 + g2h;
        let c3 = h * h * h * b3 + 3.0 * g2h * c1;
        let c4 = h * h * h * h * b4 + 6.0 * g2h * h * h * b2 + 3.0 * g2h * g2h;
        let tau = self.mu_p * self.mu_p + self.sigma_p_sq;
        let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);

        let (mut m1, mut m2, mut m3, mut m4) = (
            theta0,
            theta0 * theta0,
            theta0 * theta0 * theta0,
            theta0 * theta0 * theta0 * theta0,
        );
        // S_0 = 0
        let (mut s1, mut u, mut v, mut s2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for m in 1..=m_cap {
            let n1 = a * m1 + c1;
            let n2 = a2 * m2 + 2.0 * a * m1 * c1 + c2;
            let n3 = a3 * m3 + 3.0 * a2 * m2 * c1 + 3.0 * a * m1 * c2 + c3;
            let n4 = a4 * m4 + 4.0 * a3 * m3 * c1 + 6.0 * a2 * m2 * c2 + 4.0 * a * m1 * c3 + c4;
            // E[S theta'], E[S theta'^2] with the pre-update S
            let st = a * u + c1 * s1;
            let st2 = a2 * v + 2.0 * a * c1 * u + c2 * s1;
            s2 += 2.0 * st2 + n4;
            u = st + n3;
            v = st2 + n4;
            s1 += n2;
            m1 = n1;
            m2 = n2;
            m3 = n3;
            m4 = n4;

            let mf = m as f64;
            let mse = s2 / (mf * mf) - 2.0 * tau * s1 / mf + tau * tau;
            if !visit(m, mse) {
                break;
            }
        }
        Ok(())
    }

    /// Smallest M <= `m_cap` with `MSE(S_2; M) <= target`, in one forward
    /// pass; None when even `m_cap` steps miss the target.
    pub fn min_steps_for_mse2(
        &self,
        h: f64,
        target: f64,
        m_cap: u64,
        theta0: f64,
        noise: NoiseModel,
    ) -> Result<Option<u64>> {
        let mut found = None;
        self.scan_mse2(h, theta0, noise, m_cap, |m, mse| {
            if mse <= target {
                found = Some(m);
                false
            } else {
                true
            }
        })?;
        Ok(found)
    }

    /// `MSE(S_2; M)` at each requested chain length, in one forward pass.
    /// `m_values` must be strictly increasing.
    pub fn mse2_curve(
        &self,
        h: f64,
        m_values: &[u64],
        theta0: f64,
        noise: NoiseModel,
    ) -> Result<Vec<f64>> {
        if m_values.is_empty() || m_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "m_values must be nonempty and strictly increasing".into(),
            ));
        }
        let mut out = Vec::with_capacity(m_values.len());
        let mut next = 0usize;
        self.scan_mse2(h, theta0, noise, m_values[m_values.len() - 1], |m, mse| {
            if m == m_values[next] {
                out.push(mse);
                next += 1;
            }
            next < m_values.len()
        })?;
        Ok(out)
    }
}

/// Exact per-step moment arrays; entry `j` is `E[theta_{j+1}^p]`.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    /// `m[p-1][j] = E[theta_{j+1}^p]`.
    pub m: [Vec<f64>; 4],
}

impl MomentTrajectory {
    pub fn len(&self) -> usize {
        self.m[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.m[0].is_empty()
    }
}

/// Free-function wrappers mirroring the analytic API for one-off use.
pub fn toy_var_b(model: &GaussianConjugateModel, scheme: &MinibatchScheme) -> Result<f64> {
    Ok(ToyAnalytic::new(model, scheme)?.var_b)
}

pub fn moment_trajectory(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
    m_steps: usize,
    theta0: f64,
) -> Result<MomentTrajectory> {
    Ok(ToyAnalytic::new(model, scheme)?.moment_trajectory(h, m_steps, theta0, NoiseModel::Sgld))
}

pub fn asymptotic_var_sgld(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
) -> Result<f64> {
    ToyAnalytic::new(model, scheme)?.asymptotic_var_sgld(h)
}

pub fn asymptotic_var_msgld(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
) -> Result<f64> {
    ToyAnalytic::new(model, scheme)?.asymptotic_var_msgld(h)
}

pub fn excess_bias_leading_sgld(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
) -> Result<f64> {
    Ok(ToyAnalytic::new(model, scheme)?.excess_bias_leading_sgld(h))
}

pub fn analytic_mse2(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
    m_steps: usize,
    theta0: f64,
) -> Result<f64> {
    ToyAnalytic::new(model, scheme)?.mse2(h, m_steps, theta0, NoiseModel::Sgld)
}

pub fn analytic_mse2_msgld(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    h: f64,
    m_steps: usize,
    theta0: f64,
) -> Result<f64> {
    ToyAnalytic::new(model, scheme)?.mse2(h, m_steps, theta0, NoiseModel::Msgld)
}

/// Stationary variance of the Euler chain targeting `N(mu, sigma_sq)` with
/// drift `-(theta - mu)/(2 sigma_sq)`: `sigma_sq / (1 - (h/4) / sigma_sq)`.
pub fn ou_euler_stationary_variance(sigma_sq: f64, h: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidArgument("sigma_sq must be positive".into()));
    }
    if !(h > 0.0) || h >= 4.0 * sigma_sq {
        return Err(Error::Domain(format!(
            "step size {h} outside (0, 4 sigma^2 = {})",
            4.0 * sigma_sq
        )));
    }
    Ok(sigma_sq / (1.0 - 0.25 * h / sigma_sq))
}

/// Power-law fit of `|bias(h)| = c h^p` over `(h, bias)` samples.
/// Returns the recovered coefficient `c` (the lambda of the leading-order
/// expansion when p matches the weak order) and the fitted order `p`.
#[derive(Debug, Clone)]
pub struct BiasFit {
    pub lambda: f64,
    pub order: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

pub fn fit_bias_coefficient(samples: &[(f64, f64)]) -> Result<BiasFit> {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|&(h, b)| (h, b.abs())).collect();
    let fit = crate::estimators::fit_power_law(&pairs)?;
    Ok(BiasFit {
        lambda: fit.prefactor,
        order: fit.exponent,
        r_squared: fit.r_squared,
        points_used: fit.points_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{run_chain, ChainSpec, CovSource, Kernel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn toy13() -> GaussianConjugateModel {
        GaussianConjugateModel::new(1.0, 1.0, vec![1.0, 3.0]).unwrap()
    }

    #[test]
    fn power_sums_and_newton_fixture() {
        let p = power_sums(&[1.0, 2.0, 3.0]);
        assert_eq!(p, [6.0, 14.0, 36.0, 98.0]);
        let e = elementary_symmetric(&p);
        assert_relative_eq!(e[0], 6.0, max_relative = 1e-14);
        assert_relative_eq!(e[1], 11.0, max_relative = 1e-14);
        assert_relative_eq!(e[2], 6.0, max_relative = 1e-14);
        assert_abs_diff_eq!(e[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn newton_identities_match_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for nn in 1..=8usize {
            for _ in 0..20 {
                let data: Vec<f64> = (0..nn).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let e = elementary_symmetric(&power_sums(&data));
                for k in 1..=4usize {
                    let brute = elementary_symmetric_enumerated(&data, k);
                    assert_relative_eq!(e[k - 1], brute, max_relative = 1e-12, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn b_moments_fixture_and_trivial() {
        // X = [1,2,3], sigma_x^2 = 1/2, n = 2 without replacement:
        // B in (3/2) * {3, 4, 5} each w.p. 1/3 -> E B^2 = 37.5
        let scheme = MinibatchScheme::new(2, SamplingMode::WithoutReplacement);
        let b = b_moments(&[1.0, 2.0, 3.0], 0.5, &scheme).unwrap();
        assert_relative_eq!(b[0], 6.0, max_relative = 1e-13);
        assert_relative_eq!(b[1], 37.5, max_relative = 1e-13);

        // full batch on zero-sum data: B deterministic 0
        let scheme = MinibatchScheme::new(2, SamplingMode::WithoutReplacement);
        let b = b_moments(&[1.0, -1.0], 1.0, &scheme).unwrap();
        for v in b {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn b_moments_match_enumeration_both_modes() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for nn in 2..=8usize {
            let data: Vec<f64> = (0..nn).map(|_| rng.gen_range(-1.5..1.5)).collect();
            for n in 1..=nn {
                let wor = MinibatchScheme::new(n, SamplingMode::WithoutReplacement);
                let exact = b_moments(&data, 0.7, &wor).unwrap();
                let brute = b_moments_enumerated(&data, 0.7, &wor).unwrap();
                for k in 0..4 {
                    assert_relative_eq!(exact[k], brute[k], max_relative = 1e-10, epsilon = 1e-10);
                }
            }
            for n in 1..=4.min(nn) {
                let wr = MinibatchScheme::new(n, SamplingMode::WithReplacement);
                let exact = b_moments(&data, 0.7, &wr).unwrap();
                let brute = b_moments_enumerated(&data, 0.7, &wr).unwrap();
                for k in 0..4 {
                    assert_relative_eq!(exact[k], brute[k], max_relative = 1e-10, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn var_b_matches_sampling_formula() {
        // Var B without replacement = N(N-n)/n Var(X) / (4 sigma_x^4)
        let model = GaussianConjugateModel::new(1.0, 0.8, vec![0.1, 1.4, -2.0, 0.6, 2.2]).unwrap();
        let n = 2;
        let scheme = MinibatchScheme::new(n, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let nn = model.data().len() as f64;
        let expect = nn * (nn - n as f64) / n as f64 * model.data_variance().unwrap()
            / (4.0 * model.sigma_x_sq * model.sigma_x_sq);
        assert_relative_eq!(ta.var_b, expect, max_relative = 1e-12);

        // with replacement: N(N-1)/n Var(X) / (4 sigma_x^4)
        let scheme = MinibatchScheme::new(n, SamplingMode::WithReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let expect = nn * (nn - 1.0) / n as f64 * model.data_variance().unwrap()
            / (4.0 * model.sigma_x_sq * model.sigma_x_sq);
        assert_relative_eq!(ta.var_b, expect, max_relative = 1e-12);
    }

    #[test]
    fn asymptotic_variance_fixtures() {
        // A = 3/2, h = 0.2, Var B = 1 fixtures: 0.470588 (SGLD), 0.396078 (mSGLD)
        let denom = 2.0 * 1.5 - 1.5 * 1.5 * 0.2;
        assert_relative_eq!((1.0 + 0.2) / denom, 0.47058823529411764, max_relative = 1e-12);
        assert_relative_eq!(
            (1.0 + 0.25 * 0.04) / denom,
            0.396078431372549,
            max_relative = 1e-12
        );
        // library evaluation on a model engineered to Var B = 1 is covered by
        // the formula structure; check the code path with the toy13 model
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let h = 0.2;
        let denom = 2.0 * ta.a - ta.a * ta.a * h;
        assert_relative_eq!(
            ta.asymptotic_var_sgld(h).unwrap(),
            (1.0 + h * ta.var_b) / denom,
            max_relative = 1e-14
        );
        // Var B = 0 branch (full batch) reproduces the Euler variance
        let full = MinibatchScheme::full_batch(2);
        let tf = ToyAnalytic::new(&model, &full).unwrap();
        assert_abs_diff_eq!(tf.var_b, 0.0, epsilon = 1e-14);
        assert_relative_eq!(
            tf.asymptotic_var_sgld(h).unwrap(),
            1.0 / denom,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            tf.asymptotic_var_msgld(h).unwrap(),
            1.0 / denom,
            max_relative = 1e-14
        );
        // h -> 0 recovers sigma_p^2
        assert_relative_eq!(ta.asymptotic_var_sgld(1e-9).unwrap(), 1.0 / 3.0, max_relative = 1e-6);
        // domain error at h >= 2/A
        assert!(ta.asymptotic_var_sgld(2.0 / ta.a).is_err());
    }

    #[test]
    fn excess_bias_and_richardson_ratios() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        // leading term h Var B / (2A)
        assert_relative_eq!(
            ta.excess_bias_leading_sgld(0.1),
            0.1 * ta.var_b / (2.0 * ta.a),
            max_relative = 1e-14
        );
        // leading/exact ratio -> 1 at small h
        let h = 0.01 / ta.a;
        let ratio = ta.excess_bias_leading_sgld(h) / ta.excess_bias_exact_sgld(h).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
        // Richardson: excess(h)/excess(h/2) -> 2 (SGLD), 4 (mSGLD)
        let h = 0.05 / ta.a;
        let r_sgld =
            ta.excess_bias_exact_sgld(h).unwrap() / ta.excess_bias_exact_sgld(h / 2.0).unwrap();
        let r_msgld =
            ta.excess_bias_exact_msgld(h).unwrap() / ta.excess_bias_exact_msgld(h / 2.0).unwrap();
        assert!((r_sgld - 2.0).abs() < 0.2, "SGLD ratio {r_sgld}");
        assert!((r_msgld - 4.0).abs() < 0.6, "mSGLD ratio {r_msgld}");
    }

    #[test]
    fn trajectory_first_step_and_limits() {
        let model = toy13();
        let full = MinibatchScheme::full_batch(2);
        let ta = ToyAnalytic::new(&model, &full).unwrap();
        let traj = ta.moment_trajectory(0.2, 3000, 0.0, NoiseModel::Sgld);
        // E[theta_1] = (1 - Ah) 0 + h E B = 0.2 * 2 = 0.4
        assert_relative_eq!(traj.m[0][0], 0.4, max_relative = 1e-13);
        // long-run fixed points equal the asymptotic formulas
        let m1_inf = traj.m[0][2999];
        let m2_inf = traj.m[1][2999];
        assert_relative_eq!(m1_inf, ta.mu_p, max_relative = 1e-10);
        let v_inf = ta.asymptotic_var_sgld(0.2).unwrap();
        assert_relative_eq!(m2_inf, v_inf + ta.mu_p * ta.mu_p, max_relative = 1e-10);

        // subsampled + mSGLD fixed point consistency
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        for (noise, var) in [
            (NoiseModel::Sgld, ta.asymptotic_var_sgld(0.2).unwrap()),
            (NoiseModel::Msgld, ta.asymptotic_var_msgld(0.2).unwrap()),
        ] {
            let traj = ta.moment_trajectory(0.2, 3000, 0.5, noise);
            assert_relative_eq!(traj.m[0][2999], ta.mu_p, max_relative = 1e-10);
            assert_relative_eq!(
                traj.m[1][2999],
                var + ta.mu_p * ta.mu_p,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn trajectory_matches_monte_carlo() {
        // spot check E[theta_j], E[theta_j^2] at j = 20 against replicate
        // chains of the actual sampler
        let model = GaussianConjugateModel::new(1.0, 1.0, vec![1.0, 3.0, -0.5, 0.7]).unwrap();
        let scheme = MinibatchScheme::new(2, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let h = 0.15;
        let j = 20usize;
        let traj = ta.moment_trajectory(h, j, 0.0, NoiseModel::Sgld);

        let reps = 100_000u64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for r in 0..reps {
            let spec = ChainSpec::new(h, j as u64, vec![0.0], 1234).with_chain_id(r);
            let rep = run_chain(&Kernel::Sgld, &model, Some(&scheme), &spec).unwrap();
            let x = rep.final_state[0];
            s1 += x;
            s2 += x * x;
        }
        let m1 = s1 / reps as f64;
        let m2 = s2 / reps as f64;
        let se1 = ((m2 - m1 * m1) / reps as f64).sqrt();
        assert!(
            (m1 - traj.m[0][j - 1]).abs() < 4.0 * se1,
            "m1 {m1} vs {}",
            traj.m[0][j - 1]
        );
        // rough s.e. for the second moment via fourth moment bound
        let se2 = ((traj.m[3][j - 1] - traj.m[1][j - 1].powi(2)) / reps as f64).sqrt();
        assert!(
            (m2 - traj.m[1][j - 1]).abs() < 4.0 * se2,
            "m2 {m2} vs {}",
            traj.m[1][j - 1]
        );
    }

    /// Literal O(M^2) evaluation of the MSE double sum; oracle only.
    fn mse2_naive(ta: &ToyAnalytic, h: f64, m_steps: usize, theta0: f64, noise: NoiseModel) -> f64 {
        let traj = ta.moment_trajectory(h, m_steps, theta0, noise);
        let a = 1.0 - ta.a * h;
        let g = ta.noise_multiplier(h, noise);
        let hb1 = h * ta.b[0];
        let step_var = h * h * ta.var_b + g * g * h;
        let tau = ta.mu_p * ta.mu_p + ta.sigma_p_sq;
        let mf = m_steps as f64;
        let es2 = traj.m[1].iter().sum::<f64>() / mf;
        let mut sum = 0.0;
        for i in 0..m_steps {
            sum += traj.m[3][i];
            for j in (i + 1)..m_steps {
                let m = j - i;
                let sig1: f64 = (0..m).map(|l| a.powi(l as i32)).sum();
                let sig2: f64 = (0..m).map(|l| a.powi(2 * l as i32)).sum();
                let ed = hb1 * sig1;
                let ed2 = ed * ed + step_var * sig2;
                let cross = a.powi(2 * m as i32) * traj.m[3][i]
                    + 2.0 * a.powi(m as i32) * ed * traj.m[2][i]
                    + ed2 * traj.m[1][i];
                sum += 2.0 * cross;
            }
        }
        let es2_sq = sum / (mf * mf);
        es2_sq - 2.0 * tau * es2 + tau * tau
    }

    #[test]
    fn mse2_single_term_reduction() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let h = 0.2;
        let traj = ta.moment_trajectory(h, 1, 0.0, NoiseModel::Sgld);
        let tau = ta.mu_p * ta.mu_p + ta.sigma_p_sq;
        let expect = traj.m[3][0] - 2.0 * traj.m[1][0] * tau + tau * tau;
        assert_relative_eq!(
            ta.mse2(h, 1, 0.0, NoiseModel::Sgld).unwrap(),
            expect,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mse2_fast_equals_naive_double_sum() {
        let model = GaussianConjugateModel::new(1.0, 0.5, vec![1.0, 2.0, 3.0, -1.0, 0.3]).unwrap();
        for (n, mode) in [
            (1, SamplingMode::WithoutReplacement),
            (3, SamplingMode::WithoutReplacement),
            (2, SamplingMode::WithReplacement),
        ] {
            let scheme = MinibatchScheme::new(n, mode);
            let ta = ToyAnalytic::new(&model, &scheme).unwrap();
            for h in [0.02, 0.05] {
                for m_steps in [1, 2, 7, 50, 200] {
                    for noise in [NoiseModel::Sgld, NoiseModel::Msgld] {
                        let fast = ta.mse2(h, m_steps, 0.4, noise).unwrap();
                        let naive = mse2_naive(&ta, h, m_steps, 0.4, noise);
                        assert_relative_eq!(fast, naive, max_relative = 1e-9, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn mse2_matches_monte_carlo() {
        // toy X = [1,3], h = 0.2, n = 1 WOR, M = 100 vs replicate chains
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let (h, m_steps) = (0.2, 100usize);
        let tau = ta.mu_p * ta.mu_p + ta.sigma_p_sq;
        let analytic = ta.mse2(h, m_steps, 0.0, NoiseModel::Sgld).unwrap();

        let reps = 100_000u64;
        let (mut s, mut ss) = (0.0, 0.0);
        for r in 0..reps {
            let spec = ChainSpec::new(h, m_steps as u64, vec![0.0], 777).with_chain_id(r);
            let rep = run_chain(&Kernel::Sgld, &model, Some(&scheme), &spec).unwrap();
            let err = rep.stats.moment(2, 0) - tau;
            let sq = err * err;
            s += sq;
            ss += sq * sq;
        }
        let mc = s / reps as f64;
        let se = ((ss / reps as f64 - mc * mc) / reps as f64).sqrt();
        assert!((mc - analytic).abs() < 3.0 * se, "MC {mc} vs analytic {analytic} (se {se})");
    }

    #[test]
    fn mse2_msgld_matches_monte_carlo() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let (h, m_steps) = (0.2, 100usize);
        let tau = ta.mu_p * ta.mu_p + ta.sigma_p_sq;
        let analytic = ta.mse2(h, m_steps, 0.0, NoiseModel::Msgld).unwrap();

        let kernel = Kernel::Msgld(CovSource::Fixed(nalgebra::DMatrix::from_element(
            1, 1, ta.var_b,
        )));
        let reps = 100_000u64;
        let (mut s, mut ss) = (0.0, 0.0);
        for r in 0..reps {
            let spec = ChainSpec::new(h, m_steps as u64, vec![0.0], 778).with_chain_id(r);
            let rep = run_chain(&kernel, &model, Some(&scheme), &spec).unwrap();
            let err = rep.stats.moment(2, 0) - tau;
            let sq = err * err;
            s += sq;
            ss += sq * sq;
        }
        let mc = s / reps as f64;
        let se = ((ss / reps as f64 - mc * mc) / reps as f64).sqrt();
        assert!((mc - analytic).abs() < 3.0 * se, "MC {mc} vs analytic {analytic} (se {se})");
    }

    #[test]
    fn mse2_large_m_approaches_squared_bias() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let h = 0.2;
        let bias_sq = (ta.asymptotic_var_sgld(h).unwrap() - ta.sigma_p_sq).powi(2);
        let m_mid = ta.mse2(h, 100_000, 0.0, NoiseModel::Sgld).unwrap();
        let m_big = ta.mse2(h, 1_000_000, 0.0, NoiseModel::Sgld).unwrap();
        assert!(
            (m_big - bias_sq).abs() < (m_mid - bias_sq).abs(),
            "not converging: {m_mid} then {m_big} toward {bias_sq}"
        );
        assert_relative_eq!(m_big, bias_sq, max_relative = 1e-3);
    }

    #[test]
    fn ou_euler_variance_fixture() {
        assert_relative_eq!(
            ou_euler_stationary_variance(1.0, 0.1).unwrap(),
            1.0 / 0.975,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ou_euler_stationary_variance(2.0, 1e-9).unwrap(),
            2.0,
            max_relative = 1e-8
        );
        assert!(ou_euler_stationary_variance(1.0, 4.0).is_err());
        // first-order bias coefficient -> 1/4
        let h = 1e-6;
        let lam = (ou_euler_stationary_variance(1.0, h).unwrap() - 1.0) / h;
        assert_relative_eq!(lam, 0.25, max_relative = 1e-5);
    }

    #[test]
    fn fit_bias_coefficient_synthetic_and_ou() {
        // exact c h^1
        let samples: Vec<(f64, f64)> = [0.01, 0.02, 0.04, 0.08]
            .iter()
            .map(|&h| (h, 0.37 * h))
            .collect();
        let fit = fit_bias_coefficient(&samples).unwrap();
        assert_relative_eq!(fit.order, 1.0, max_relative = 1e-10);
        assert_relative_eq!(fit.lambda, 0.37, max_relative = 1e-10);

        // OU/Euler biases: c -> 0.25
        let samples: Vec<(f64, f64)> = [0.02, 0.04, 0.08]
            .iter()
            .map(|&h| (h, ou_euler_stationary_variance(1.0, h).unwrap() - 1.0))
            .collect();
        let fit = fit_bias_coefficient(&samples).unwrap();
        assert!((fit.lambda - 0.25).abs() < 0.02, "lambda {}", fit.lambda);
        assert!((fit.order - 1.0).abs() < 0.1, "order {}", fit.order);

        // mSGLD excess bias order 2
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let samples: Vec<(f64, f64)> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&h| (h, ta.excess_bias_exact_msgld(h).unwrap()))
            .collect();
        let fit = fit_bias_coefficient(&samples).unwrap();
        assert!((fit.order - 2.0).abs() < 0.1, "order {}", fit.order);

        // zero biases are excluded; too few points -> error
        assert!(fit_bias_coefficient(&[(0.1, 0.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }

    #[test]
    fn mse2_rejects_bad_inputs() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        assert!(ta.mse2(0.2, 0, 0.0, NoiseModel::Sgld).is_err());
        assert!(ta.mse2(1.0 / ta.a, 100, 0.0, NoiseModel::Sgld).is_err());
        assert!(ta.mse2(-0.1, 100, 0.0, NoiseModel::Sgld).is_err());
    }

    #[test]
    fn mse2_curve_matches_pointwise_mse2() {
        let model = toy13();
        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        for noise in [NoiseModel::Sgld, NoiseModel::Msgld] {
            for (h, theta0) in [(0.2, 0.0), (0.35, 2.5)] {
                let ms = [1u64, 2, 3, 7, 20, 100, 333];
                let curve = ta.mse2_curve(h, &ms, theta0, noise).unwrap();
                for (&m, &c) in ms.iter().zip(&curve) {
                    let direct = ta.mse2(h, m as usize, theta0, noise).unwrap();
                    assert_relative_eq!(c, direct, max_relative = 1e-9);
                }
            }
        }
        assert!(ta.mse2_curve(0.2, &[], 0.0, NoiseModel::Sgld).is_err());
        assert!(ta.mse2_curve(0.2, &[5, 5], 0.0, NoiseModel::Sgld).is_err());
    }

    #[test]
    fn min_steps_scan_agrees_with_direct_evaluation() {
        let model =
            GaussianConjugateModel::new(1.0, 1.0, crate::models::generate_toy_data(1.0, 1.0, 20, 9).unwrap())
                .unwrap();
        let scheme = MinibatchScheme::new(4, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let h = 0.3 / ta.a;
        let target = 0.01;
        let m = ta
            .min_steps_for_mse2(h, target, 100_000, 0.0, NoiseModel::Sgld)
            .unwrap()
            .expect("target reachable");
        assert!(ta.mse2(h, m as usize, 0.0, NoiseModel::Sgld).unwrap() <= target);
        if m > 1 {
            assert!(ta.mse2(h, m as usize - 1, 0.0, NoiseModel::Sgld).unwrap() > target);
        }
        // unreachable target under a tiny cap
        assert_eq!(
            ta.min_steps_for_mse2(h, 1e-12, 10, 0.0, NoiseModel::Sgld).unwrap(),
            None
        );
    }
}
