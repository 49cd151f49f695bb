//! Shared oracles for the acceptance suite: from-scratch recomputations,
//! quadrature, Monte-Carlo integration, and an exhaustive QP solver. Every
//! oracle is independent of the incremental code paths it checks.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};

use codebook_core::data::HistogramDataset;
use codebook_core::estimate::NormalGammaHyper;

// ---------------------------------------------------------------------------
// fixture generation
// ---------------------------------------------------------------------------

/// Random labeled integer-count dataset with `classes` classes, every class
/// populated. Columns listed in `zero_cols` are forced to all zeros.
pub fn random_dataset(
    rng: &mut StdRng,
    classes: usize,
    n: usize,
    t: usize,
    zero_cols: &[usize],
) -> HistogramDataset {
    assert!(n >= classes);
    let mut counts = Vec::with_capacity(n * t);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // first `classes` rows pin one sample per class
        let class = if i < classes {
            i
        } else {
            rng.random_range(0..classes)
        };
        labels.push(class as i64 + 1);
        for j in 0..t {
            if zero_cols.contains(&j) {
                counts.push(0.0);
            } else {
                counts.push(rng.random_range(0..6) as f64);
            }
        }
    }
    HistogramDataset::new(counts, t, &labels).unwrap()
}

/// Random binary dataset whose rows are l1-normalized histograms, keeping
/// SVM weights (and so eta * w) small.
pub fn random_normalized_binary(rng: &mut StdRng, n: usize, t: usize) -> HistogramDataset {
    let mut counts = Vec::with_capacity(n * t);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        labels.push(if i < n / 2 { 1 } else { 2 });
        let row: Vec<f64> = (0..t).map(|_| rng.random_range(0..8) as f64).collect();
        let mass: f64 = row.iter().sum::<f64>().max(1.0);
        counts.extend(row.iter().map(|v| v / mass));
    }
    HistogramDataset::new(counts, t, &labels).unwrap()
}

// ---------------------------------------------------------------------------
// level replay: pooled per-class weight matrix driven by merge events
// ---------------------------------------------------------------------------

/// Per-slot state of a merge run: which slot carries which node id, which
/// slots are live, and the current dataset with columns pooled in place.
pub struct Replay {
    pub node_id: Vec<usize>,
    pub live: Vec<bool>,
    /// row-major n x t counts with merged columns pooled into the keep slot
    pub counts: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    next_id: usize,
}

impl Replay {
    pub fn new(ds: &HistogramDataset) -> Self {
        let t = ds.t();
        let counts = (0..ds.n()).map(|i| ds.row(i).to_vec()).collect();
        let labels = (0..ds.n()).map(|i| ds.label(i)).collect();
        Self {
            node_id: (0..t).collect(),
            live: vec![true; t],
            counts,
            labels,
            classes: ds.class_count(),
            next_id: t,
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    pub fn slot_of(&self, node: usize) -> usize {
        self.node_id
            .iter()
            .position(|&id| id == node)
            .unwrap_or_else(|| panic!("node {node} is not live"))
    }

    /// Live (slot, slot) pairs in ascending node-id order, mirroring the
    /// engine's candidate ordering.
    pub fn live_pairs(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.node_id.len()).filter(|&s| self.live[s]).collect();
        order.sort_by_key(|&s| self.node_id[s]);
        let mut pairs = Vec::new();
        for x in 0..order.len() {
            for y in (x + 1)..order.len() {
                pairs.push((order[x], order[y]));
            }
        }
        pairs
    }

    /// Applies the merge of nodes (a, b), pooling column b into a's slot.
    /// Returns (keep_slot, drop_slot).
    pub fn merge_nodes(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (keep, drop) = (self.slot_of(a), self.slot_of(b));
        for row in &mut self.counts {
            row[keep] += row[drop];
            row[drop] = 0.0;
        }
        self.node_id[keep] = self.next_id;
        self.next_id += 1;
        self.live[drop] = false;
        (keep, drop)
    }

    pub fn column_total(&self, slot: usize) -> f64 {
        self.counts.iter().map(|row| row[slot]).sum()
    }

    /// Class-pooled counts per slot (classes x slots).
    pub fn class_sums(&self) -> Vec<Vec<f64>> {
        let t = self.node_id.len();
        let mut sums = vec![vec![0.0; t]; self.classes];
        for (row, &class) in self.counts.iter().zip(&self.labels) {
            for (j, v) in row.iter().enumerate() {
                sums[class][j] += v;
            }
        }
        sums
    }

    /// Values of column `slot` restricted to one class.
    pub fn class_column(&self, class: usize, slot: usize) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.labels)
            .filter(|&(_, &c)| c == class)
            .map(|(row, _)| row[slot])
            .collect()
    }

    pub fn column(&self, slot: usize) -> Vec<f64> {
        self.counts.iter().map(|row| row[slot]).collect()
    }
}

// ---------------------------------------------------------------------------
// information and scatter oracles
// ---------------------------------------------------------------------------

/// Mutual information of an unnormalized nonnegative weight matrix
/// (classes x columns), summed over every cell with the 0 ln 0 = 0 rule.
pub fn mutual_information(weights: &[Vec<f64>]) -> f64 {
    let total: f64 = weights.iter().flatten().sum();
    assert!(total > 0.0);
    let cols = weights[0].len();
    let row_sums: Vec<f64> = weights.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| weights.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (r, row) in weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                let p = w / total;
                mi += p * (p / (row_sums[r] / total * col_sums[j] / total)).ln();
            }
        }
    }
    mi
}

/// MI drop from pooling columns r and s of the weight matrix. Dead all-zero
/// columns contribute nothing to either side.
pub fn mi_merge_drop(weights: &[Vec<f64>], r: usize, s: usize) -> f64 {
    let mut merged: Vec<Vec<f64>> = weights.to_vec();
    for row in &mut merged {
        row[r] += row[s];
        row[s] = 0.0;
    }
    mutual_information(weights) - mutual_information(&merged)
}

/// tr(S_w)/tr(S_t) recomputed from raw rows.
pub fn scatter_ratio(counts: &[Vec<f64>], labels: &[usize], classes: usize) -> f64 {
    let n = counts.len();
    let t = counts[0].len();
    let mut within = 0.0;
    let mut total = 0.0;
    for j in 0..t {
        let grand: f64 = counts.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        total += counts.iter().map(|r| (r[j] - grand) * (r[j] - grand)).sum::<f64>();
        for c in 0..classes {
            let members: Vec<f64> = counts
                .iter()
                .zip(labels)
                .filter(|&(_, &l)| l == c)
                .map(|(r, _)| r[j])
                .collect();
            let mean: f64 = members.iter().sum::<f64>() / members.len() as f64;
            within += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
    }
    within / total
}

/// Plug-in Gaussian column advantage recomputed from raw values, with the
/// variance floor applied to both the pooled and per-class estimates.
pub fn gaussian_advantage(column: &[f64], labels: &[usize], classes: usize, eps_var: f64) -> f64 {
    let var = |values: &[f64]| -> f64 {
        let m = values.iter().sum::<f64>() / values.len() as f64;
        let raw = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
        raw.max(eps_var)
    };
    let mut adv = (column.len() as f64 / 2.0) * var(column).ln();
    for c in 0..classes {
        let members: Vec<f64> = column
            .iter()
            .zip(labels)
            .filter(|&(_, &l)| l == c)
            .map(|(v, _)| *v)
            .collect();
        adv -= (members.len() as f64 / 2.0) * var(&members).ln();
    }
    adv
}

// ---------------------------------------------------------------------------
// Polya sequential and Monte-Carlo Dirichlet oracles
// ---------------------------------------------------------------------------

/// log P(counts | alpha) built one draw at a time from the Polya urn:
/// the i-th draw of word j has probability (alpha_j + seen_j) / (A + i).
pub fn polya_sequential(alphas: &[f64], counts: &[u64]) -> f64 {
    let total_alpha: f64 = alphas.iter().sum();
    let mut log_p = 0.0;
    let mut drawn = 0u64;
    for (j, &n_j) in counts.iter().enumerate() {
        for m in 0..n_j {
            log_p += (alphas[j] + m as f64).ln();
        }
        drawn += n_j;
    }
    for i in 0..drawn {
        log_p -= (total_alpha + i as f64).ln();
    }
    log_p
}

/// Monte-Carlo estimate of E_theta[prod theta_j^n_j] under Dirichlet(alpha),
/// returning (mean, standard error) over `draws` samples.
pub fn dirichlet_mc(alphas: &[f64], counts: &[f64], draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let gammas: Vec<Gamma<f64>> = alphas.iter().map(|&a| Gamma::new(a, 1.0).unwrap()).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let raw: Vec<f64> = gammas.iter().map(|g| g.sample(&mut rng)).collect();
        let norm: f64 = raw.iter().sum();
        let log_v: f64 = raw
            .iter()
            .zip(counts)
            .map(|(&g, &n)| if n == 0.0 { 0.0 } else { n * (g / norm).ln() })
            .sum();
        let v = log_v.exp();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    (mean, (var / draws as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Normal-Gamma 2-D quadrature oracle
// ---------------------------------------------------------------------------

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// ln of the Normal-Gamma evidence integral computed by nested adaptive
/// Simpson quadrature over (mu, lambda), shifted by `shift` to keep the
/// integrand O(1). Returns shift + ln(integral of exp(log_density - shift)).
pub fn ng_quadrature(values: &[f64], hyper: &NormalGammaHyper, shift: f64) -> f64 {
    let m = values.len() as f64;
    let (mu0, k0, a, b) = (hyper.mu0, hyper.kappa0, hyper.a, hyper.b);
    let ln_gamma_a = codebook_core::estimate::ln_gamma(a);
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();

    let sum: f64 = values.iter().sum();
    let xbar = sum / m;
    let ss: f64 = values.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    let km = k0 + m;
    let am = a + m / 2.0;
    let bm = b + ss / 2.0 + k0 * m * (xbar - mu0) * (xbar - mu0) / (2.0 * km);
    let mu_m = (k0 * mu0 + sum) / km;

    let log_density = move |mu: f64, lambda: f64| -> f64 {
        let mut lp = a * b.ln() + (a - 1.0) * lambda.ln() - b * lambda - ln_gamma_a;
        lp += 0.5 * (k0.ln() + lambda.ln()) - half_ln_2pi
            - k0 * lambda * (mu - mu0) * (mu - mu0) / 2.0;
        for &v in values {
            lp += 0.5 * lambda.ln() - half_ln_2pi - lambda * (v - mu) * (v - mu) / 2.0;
        }
        lp
    };

    let outer = |lambda: f64| -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        // prior x likelihood in mu is exactly a Normal(mu_m, 1/(km*lambda))
        // kernel, so +-45 posterior standard deviations hold all the mass
        let half_width = 45.0 / (km * lambda).sqrt();
        let inner = |mu: f64| (log_density(mu, lambda) - shift).exp();
        adaptive_simpson(&inner, mu_m - half_width, mu_m + half_width, 1e-9)
    };
    // the integrand in lambda is a gamma-shaped bump around am/bm; one
    // stencil over the whole range would step right over it, so integrate
    // over multiplicative segments that straddle the peak
    let mean_l = am / bm;
    let lambda_hi = mean_l + (60.0 * am.sqrt() + 60.0) / bm;
    let ratios = [
        0.0, 1e-6, 0.01, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1.1, 1.35, 1.7, 2.2, 3.0, 4.0,
        5.5, 7.5, 10.0, 14.0, 20.0, 30.0, 45.0,
    ];
    let mut anchors: Vec<f64> = ratios
        .iter()
        .map(|r| r * mean_l)
        .filter(|&l| l < lambda_hi)
        .collect();
    anchors.push(lambda_hi);
    let mut integral = 0.0;
    for win in anchors.windows(2) {
        integral += adaptive_simpson(&outer, win[0], win[1], 1e-9);
    }
    shift + integral.ln()
}

// ---------------------------------------------------------------------------
// exhaustive QP oracle for the soft-margin dual
// ---------------------------------------------------------------------------

/// Solves the square system M x = rhs by Gaussian elimination with partial
/// pivoting; None when the pivot collapses.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut v = rhs[row];
        for k in (row + 1)..n {
            v -= m[row][k] * x[k];
        }
        x[row] = v / m[row][row];
    }
    Some(x)
}

/// Maximum of sum(a) - a'Qa/4 over 0 <= a <= lambda, sum(y a) = 0, found by
/// enumerating every bound pattern (each a_i free, at 0, or at lambda) and
/// solving the KKT system of the free block. Q is ridged by `ridge` to keep
/// the systems nonsingular; the objective reported is for the original Q.
pub fn qp_oracle(kernel: &[Vec<f64>], labels: &[f64], lambda: f64, ridge: f64) -> f64 {
    let n = labels.len();
    let q = |i: usize, l: usize| -> f64 {
        labels[i] * labels[l] * kernel[i][l] + if i == l { ridge } else { 0.0 }
    };
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for l in 0..n {
                quad += a[i] * labels[i] * labels[l] * kernel[i][l] * a[l];
            }
        }
        a.iter().sum::<f64>() - quad / 4.0
    };
    let mut best = f64::NEG_INFINITY;
    // patterns in base 3: 0 -> a_i = 0, 1 -> a_i = lambda, 2 -> free
    for pattern in 0..3usize.pow(n as u32) {
        let mut code = pattern;
        let mut state = Vec::with_capacity(n);
        for _ in 0..n {
            state.push(code % 3);
            code /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { lambda } else { 0.0 })
            .collect();
        if free.is_empty() {
            let balance: f64 = (0..n).map(|i| labels[i] * a[i]).sum();
            if balance.abs() < 1e-9 {
                best = best.max(objective(&a));
            }
            continue;
        }
        // stationarity on the free block plus the equality constraint
        let k = free.len();
        let mut m = vec![vec![0.0; k + 1]; k + 1];
        let mut rhs = vec![0.0; k + 1];
        for (row, &i) in free.iter().enumerate() {
            for (col, &l) in free.iter().enumerate() {
                m[row][col] = 0.5 * q(i, l);
            }
            m[row][k] = labels[i];
            let bound_term: f64 = (0..n)
                .filter(|&l| state[l] == 1)
                .map(|l| 0.5 * q(i, l) * lambda)
                .sum();
            rhs[row] = 1.0 - bound_term;
        }
        for (col, &l) in free.iter().enumerate() {
            m[k][col] = labels[l];
        }
        rhs[k] = -(0..n)
            .filter(|&l| state[l] == 1)
            .map(|l| labels[l] * lambda)
            .sum::<f64>();
        let Some(solution) = solve_dense(m, rhs) else {
            continue;
        };
        let feasible = free
            .iter()
            .enumerate()
            .all(|(idx, _)| solution[idx] >= -1e-9 && solution[idx] <= lambda + 1e-9);
        if !feasible {
            continue;
        }
        for (idx, &i) in free.iter().enumerate() {
            a[i] = solution[idx].clamp(0.0, lambda);
        }
        best = best.max(objective(&a));
    }
    best
}
