//! Soft-margin linear SVM machinery for the max-margin merging criterion.
//!
//! The primal problem is
//!
//! ```text
//! min_{w,b,xi}  sum_j w_j^2 + slack_penalty * sum_i xi_i
//! s.t.          y_i (<h_i, w> + b) >= 1 - xi_i,   xi_i >= 0
//! ```
//!
//! with an unregularized bias. The solver works on the dual
//! `max sum_i a_i - 1/4 a' Q a` with `0 <= a_i <= slack_penalty` and the
//! equality constraint `sum_i y_i a_i = 0`, using pairwise coordinate ascent
//! over a precomputed kernel with maximal-violating-pair selection.
//!
//! A solved `(w, b)` is translated back into a probabilistic model of the
//! histograms (class priors and class-conditional word probabilities) through
//! the scale parameter `eta`; candidate merges are then scored on that model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaxMarginError {
    #[error("label[{0}] is not +1 or -1")]
    BadLabel(usize),
    #[error("labels are all {0}, need both classes")]
    OneClass(f64),
    #[error("kernel is {kernel} x {kernel}, labels have length {labels}")]
    KernelSizeMismatch { kernel: usize, labels: usize },
    #[error("column {index} has length {found}, expected {expected}")]
    ColumnLength {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("slack penalty must be positive, got {0}")]
    BadPenalty(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("solver did not reach duality gap {tol:.3e} within {iterations} steps (gap {gap:.3e})")]
    NonConvergence {
        gap: f64,
        tol: f64,
        iterations: u64,
        best: Box<SvmSolution>,
    },
    #[error("eta must be positive and finite, got {0}")]
    BadEta(f64),
    #[error("p_word is not a distribution: {0}")]
    BadWordDistribution(String),
    #[error("eta too large: P(word {word} | class {class:+}) = {value} exceeds 1")]
    EtaTooLarge {
        word: usize,
        class: i32,
        value: f64,
    },
    #[error("word index {0} out of range {1}")]
    WordOutOfRange(usize, usize),
}

/// Dense symmetric Gram matrix of the current histogram rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCache {
    n: usize,
    k: Vec<f64>,
}

impl KernelCache {
    /// Builds `K_il = <h_i, h_l>` from word columns (each of length `n`).
    pub fn from_columns(columns: &[Vec<f64>], n: usize) -> Self {
        let mut k = vec![0.0; n * n];
        for col in columns {
            debug_assert_eq!(col.len(), n);
            for i in 0..n {
                let vi = col[i];
                if vi == 0.0 {
                    continue;
                }
                let row = &mut k[i * n..(i + 1) * n];
                for l in 0..n {
                    row[l] += vi * col[l];
                }
            }
        }
        Self { n, k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.k[i * self.n + l]
    }

    /// Applies the rank-two correction that turns the Gram matrix over `t`
    /// words into the one over `t - 1` words where columns `r` and `s` have
    /// been summed: `K += h_r h_s' + h_s h_r'`.
    pub fn merge_update(&mut self, col_r: &[f64], col_s: &[f64]) {
        let n = self.n;
        debug_assert_eq!(col_r.len(), n);
        debug_assert_eq!(col_s.len(), n);
        for i in 0..n {
            let (ri, si) = (col_r[i], col_s[i]);
            if ri == 0.0 && si == 0.0 {
                continue;
            }
            let row = &mut self.k[i * n..(i + 1) * n];
            for l in 0..n {
                row[l] += ri * col_s[l] + si * col_r[l];
            }
        }
    }
}

/// Solver knobs; `tol` bounds the duality gap at convergence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SvmConfig {
    pub slack_penalty: f64,
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            slack_penalty: 1.0,
            tol: 1e-8,
            max_iter: 1_000_000,
        }
    }
}

/// A solved soft-margin SVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmSolution {
    pub w: Vec<f64>,
    pub b: f64,
    /// Dual coefficients, one per sample, in `[0, slack_penalty]`.
    pub dual: Vec<f64>,
    /// Primal objective `sum w^2 + slack_penalty * sum xi`.
    pub objective: f64,
    pub dual_objective: f64,
    /// Primal minus dual objective at the returned iterate.
    pub gap: f64,
    pub iterations: u64,
    pub converged: bool,
}

struct SolverCore<'a> {
    kernel: &'a KernelCache,
    y: &'a [f64],
    lambda: f64,
    a: Vec<f64>,
    /// `f_i = <w, h_i>` maintained incrementally from the dual coefficients.
    f: Vec<f64>,
    iterations: u64,
}

impl<'a> SolverCore<'a> {
    fn new(kernel: &'a KernelCache, y: &'a [f64], lambda: f64) -> Self {
        let n = y.len();
        Self {
            kernel,
            y,
            lambda,
            a: vec![0.0; n],
            f: vec![0.0; n],
            iterations: 0,
        }
    }

    /// Most-violating pair: the largest `y_i - f_i` reachable from above and
    /// the smallest reachable from below. Returns `(i, j, violation)`.
    fn select(&self) -> (usize, usize, f64, f64) {
        let n = self.y.len();
        let (mut best_up, mut up) = (f64::NEG_INFINITY, usize::MAX);
        let (mut best_low, mut low) = (f64::INFINITY, usize::MAX);
        for i in 0..n {
            let g = self.y[i] - self.f[i];
            let positive = self.y[i] > 0.0;
            let in_up = (positive && self.a[i] < self.lambda) || (!positive && self.a[i] > 0.0);
            let in_low = (positive && self.a[i] > 0.0) || (!positive && self.a[i] < self.lambda);
            if in_up && g > best_up {
                best_up = g;
                up = i;
            }
            if in_low && g < best_low {
                best_low = g;
                low = i;
            }
        }
        (up, low, best_up, best_low)
    }

    /// One pairwise ascent step. Returns false when the step is degenerate.
    fn step(&mut self, i: usize, j: usize) -> bool {
        let k = self.kernel;
        let quad = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(1e-12);
        let grad = (self.y[i] - self.f[i]) - (self.y[j] - self.f[j]);
        let mut delta = 2.0 * grad / quad;
        let (lo_i, hi_i) = if self.y[i] > 0.0 {
            (-self.a[i], self.lambda - self.a[i])
        } else {
            (self.a[i] - self.lambda, self.a[i])
        };
        let (lo_j, hi_j) = if self.y[j] > 0.0 {
            (self.a[j] - self.lambda, self.a[j])
        } else {
            (-self.a[j], self.lambda - self.a[j])
        };
        delta = delta.clamp(lo_i.max(lo_j), hi_i.min(hi_j));
        if delta <= 0.0 || !delta.is_finite() {
            return false;
        }
        self.a[i] = (self.a[i] + self.y[i] * delta).clamp(0.0, self.lambda);
        self.a[j] = (self.a[j] - self.y[j] * delta).clamp(0.0, self.lambda);
        let n = self.y.len();
        for l in 0..n {
            self.f[l] += 0.5 * delta * (k.get(l, i) - k.get(l, j));
        }
        true
    }

    /// Recomputes `f` exactly from the dual coefficients, clearing drift.
    fn refresh(&mut self) {
        let n = self.y.len();
        for v in self.f.iter_mut() {
            *v = 0.0;
        }
        for l in 0..n {
            let c = 0.5 * self.a[l] * self.y[l];
            if c == 0.0 {
                continue;
            }
            for i in 0..n {
                self.f[i] += c * self.kernel.get(i, l);
            }
        }
    }

    /// Bias from free support vectors when present, else the midpoint of the
    /// optimal-bias bracket.
    fn bias(&self) -> f64 {
        let n = self.y.len();
        let mut sum = 0.0;
        let mut free = 0usize;
        for i in 0..n {
            if self.a[i] > 0.0 && self.a[i] < self.lambda {
                sum += self.y[i] - self.f[i];
                free += 1;
            }
        }
        if free > 0 {
            return sum / free as f64;
        }
        let (_, _, up, low) = self.select();
        0.5 * (up + low)
    }

    /// Primal and dual objectives and their gap at the current iterate.
    fn objectives(&self, b: f64) -> (f64, f64, f64) {
        let n = self.y.len();
        let mut ww = 0.0;
        let mut asum = 0.0;
        let mut slack = 0.0;
        for i in 0..n {
            ww += 0.5 * self.a[i] * self.y[i] * self.f[i];
            asum += self.a[i];
            slack += (1.0 - self.y[i] * (self.f[i] + b)).max(0.0);
        }
        let primal = ww + self.lambda * slack;
        let dual = asum - ww;
        (primal, dual, primal - dual)
    }
}

/// Solves the soft-margin SVM on a precomputed kernel. `columns` are the
/// current word columns (length-`n` each), used only to recover `w` from the
/// dual coefficients.
pub fn solve_binary_svm(
    columns: &[Vec<f64>],
    kernel: &KernelCache,
    labels: &[f64],
    cfg: &SvmConfig,
) -> Result<SvmSolution, MaxMarginError> {
    let n = labels.len();
    if kernel.n() != n {
        return Err(MaxMarginError::KernelSizeMismatch {
            kernel: kernel.n(),
            labels: n,
        });
    }
    for (index, col) in columns.iter().enumerate() {
        if col.len() != n {
            return Err(MaxMarginError::ColumnLength {
                index,
                found: col.len(),
                expected: n,
            });
        }
    }
    let mut seen = (false, false);
    for (i, &y) in labels.iter().enumerate() {
        if y == 1.0 {
            seen.0 = true;
        } else if y == -1.0 {
            seen.1 = true;
        } else {
            return Err(MaxMarginError::BadLabel(i));
        }
    }
    if !seen.0 || !seen.1 {
        return Err(MaxMarginError::OneClass(labels[0]));
    }
    if !(cfg.slack_penalty > 0.0) || !cfg.slack_penalty.is_finite() {
        return Err(MaxMarginError::BadPenalty(cfg.slack_penalty));
    }
    if !(cfg.tol > 0.0) {
        return Err(MaxMarginError::BadTolerance(cfg.tol));
    }

    let mut core = SolverCore::new(kernel, labels, cfg.slack_penalty);
    let mut kkt_target: f64 = 1e-4;
    let (solution, converged) = loop {
        let mut stalled = false;
        loop {
            let (i, j, up, low) = core.select();
            if i == usize::MAX || j == usize::MAX || up - low <= kkt_target {
                break;
            }
            if core.iterations >= cfg.max_iter {
                break;
            }
            core.iterations += 1;
            if !core.step(i, j) {
                stalled = true;
                break;
            }
        }
        core.refresh();
        let b = core.bias();
        let (primal, dual, gap) = core.objectives(b);
        if gap <= cfg.tol {
            break ((b, primal, dual, gap), true);
        }
        if core.iterations >= cfg.max_iter || kkt_target <= 1e-15 || stalled {
            break ((b, primal, dual, gap), false);
        }
        kkt_target = (kkt_target * 1e-2).max(1e-15);
    };
    let (b, primal, dual, gap) = solution;

    let w = columns
        .iter()
        .map(|col| {
            let mut wj = 0.0;
            for i in 0..n {
                if core.a[i] != 0.0 {
                    wj += 0.5 * core.a[i] * labels[i] * col[i];
                }
            }
            wj
        })
        .collect();
    let result = SvmSolution {
        w,
        b,
        dual: core.a,
        objective: primal,
        dual_objective: dual,
        gap,
        iterations: core.iterations,
        converged,
    };
    if !converged {
        return Err(MaxMarginError::NonConvergence {
            gap,
            tol: cfg.tol,
            iterations: result.iterations,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Probabilistic model recovered from an SVM solution. Class index 0 is the
/// `+1` class, index 1 the `-1` class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbModel {
    /// `[P(c = +1), P(c = -1)]`.
    pub p_class: [f64; 2],
    /// Row-major `2 x t`; row 0 conditions on `+1`.
    pub p_cond: Vec<f64>,
    pub p_word: Vec<f64>,
    pub eta: f64,
    eta_w: Vec<f64>,
    eta_b: f64,
    /// `log(P(v_j | -1) / P(v_j))`, kept for loss evaluation at full precision.
    lr_neg: Vec<f64>,
}

impl ProbModel {
    pub fn t(&self) -> usize {
        self.p_word.len()
    }

    pub fn cond(&self, class: usize, j: usize) -> f64 {
        self.p_cond[class * self.t() + j]
    }

    pub fn eta_w(&self) -> &[f64] {
        &self.eta_w
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }
}

/// `log(1 + e^x)` without overflow or cancellation.
fn ln1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverts the relationship between a linear classifier and a generative
/// model: given `(w, b)` and the marginal word distribution, returns the
/// unique class priors and class-conditional word probabilities whose
/// posterior log-odds reproduce `eta * (<h, w> + b)`.
///
/// Fails with [`MaxMarginError::EtaTooLarge`] when some conditional exceeds 1,
/// in which case the caller is expected to retry with a smaller `eta`.
pub fn recover_probabilities(
    w: &[f64],
    b: f64,
    p_word: &[f64],
    eta: f64,
) -> Result<ProbModel, MaxMarginError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(MaxMarginError::BadEta(eta));
    }
    let t = p_word.len();
    if w.len() != t {
        return Err(MaxMarginError::BadWordDistribution(format!(
            "w has length {}, p_word has length {t}",
            w.len()
        )));
    }
    let mut total = 0.0;
    for (j, &p) in p_word.iter().enumerate() {
        if !p.is_finite() || p < 0.0 || p > 1.0 {
            return Err(MaxMarginError::BadWordDistribution(format!(
                "entry {j} is {p}"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(MaxMarginError::BadWordDistribution(format!(
            "entries sum to {total}"
        )));
    }

    let eta_b = eta * b;
    let exp_eta_b = eta_b.exp();
    let p_pos = exp_eta_b / (1.0 + exp_eta_b);
    let p_class = [p_pos, 1.0 - p_pos];
    let ln_b = ln1p_exp(eta_b);
    let mut eta_w = Vec::with_capacity(t);
    let mut lr_neg = Vec::with_capacity(t);
    let mut p_cond = vec![0.0; 2 * t];
    for j in 0..t {
        let ew = eta * w[j];
        // log((1 + e^{eta b}) / (1 + e^{eta b + eta w_j}))
        let neg = ln_b - ln1p_exp(eta_b + ew);
        let cond_neg = p_word[j] * neg.exp();
        let cond_pos = p_word[j] * (ew + neg).exp();
        if cond_pos > 1.0 {
            return Err(MaxMarginError::EtaTooLarge {
                word: j,
                class: 1,
                value: cond_pos,
            });
        }
        if cond_neg > 1.0 {
            return Err(MaxMarginError::EtaTooLarge {
                word: j,
                class: -1,
                value: cond_neg,
            });
        }
        p_cond[j] = cond_pos;
        p_cond[t + j] = cond_neg;
        eta_w.push(ew);
        lr_neg.push(neg);
    }
    Ok(ProbModel {
        p_class,
        p_cond,
        p_word: p_word.to_vec(),
        eta,
        eta_w,
        eta_b,
        lr_neg,
    })
}

/// Information lost by making words `r` and `s` indistinguishable under the
/// model: the mutual-information drop between the word variable and the class
/// when the two conditionals are pooled. Always non-negative; zero when both
/// words carry identical class evidence.
pub fn mme_pair_cost(model: &ProbModel, r: usize, s: usize) -> f64 {
    let t = model.t();
    debug_assert!(r < t && s < t && r != s);
    let (pw_r, pw_s) = (model.p_word[r], model.p_word[s]);
    let denom = pw_r + pw_s;
    if denom == 0.0 {
        return 0.0;
    }
    let (m_r, m_s) = (model.lr_neg[r], model.lr_neg[s]);
    let (l_r, l_s) = (model.eta_w[r] + m_r, model.eta_w[s] + m_s);
    let (pi_r, pi_s) = (pw_r / denom, pw_s / denom);
    let ln_merged_pos = (pi_r * l_r.exp_m1() + pi_s * l_s.exp_m1()).ln_1p();
    let ln_merged_neg = (pi_r * m_r.exp_m1() + pi_s * m_s.exp_m1()).ln_1p();
    let pos = model.cond(0, r) * (l_r - ln_merged_pos) + model.cond(0, s) * (l_s - ln_merged_pos);
    let neg = model.cond(1, r) * (m_r - ln_merged_neg) + model.cond(1, s) * (m_s - ln_merged_neg);
    model.p_class[0] * pos + model.p_class[1] * neg
}

/// Evaluates the pair cost at `eta` together with the deviation from its
/// first-order approximation `eta * t_hat`, where the slope `t_hat` is
/// measured at a much smaller reference scale. The residual shrinks
/// quadratically in `eta`.
pub fn taylor_residual(
    w: &[f64],
    b: f64,
    p_word: &[f64],
    r: usize,
    s: usize,
    eta: f64,
) -> Result<(f64, f64), MaxMarginError> {
    let t = p_word.len();
    if r >= t || s >= t {
        return Err(MaxMarginError::WordOutOfRange(r.max(s), t));
    }
    let model = recover_probabilities(w, b, p_word, eta)?;
    let cost = mme_pair_cost(&model, r, s);
    let eta_ref = (eta / 1024.0).min(1e-6);
    let model_ref = recover_probabilities(w, b, p_word, eta_ref)?;
    let t_hat = mme_pair_cost(&model_ref, r, s) / eta_ref;
    Ok((cost, (cost - eta * t_hat).abs()))
}
