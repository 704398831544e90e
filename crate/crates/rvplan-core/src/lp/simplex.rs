//! Bounded-variable revised simplex over sparse columns.
//!
//! The basis is kept as a triangular-peel factorization plus a dense bump:
//! occupancy LPs over transient processes are permuted-triangular up to a
//! handful of columns, so the factor solves in near-linear time. Pivots in
//! between refactorizations are absorbed by product-form eta vectors.
//!
//! Pivot selection is Dantzig (most negative reduced cost, lowest index on
//! ties) with a switch to Bland's lowest-index rule after a stall, which
//! keeps vertex selection deterministic and cycling impossible.

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 100;
/// Columns scanned per partial-pricing round.
const PRICE_SECTION: usize = 1024;

/// One constraint row: sparse coefficients plus the right-hand side.
#[derive(Debug, Clone, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>, rhs: f64) -> Self {
        SparseRow { entries, rhs }
    }
}

/// A minimization LP: `min c x` subject to equality rows, `<=` rows, and
/// `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct SparseLp {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub le_rows: Vec<SparseRow>,
}

impl SparseLp {
    pub fn validate(&self) -> Result<(), String> {
        if self.objective.len() != self.num_vars {
            return Err("objective length does not match variable count".into());
        }
        for (kind, rows) in [("eq", &self.eq_rows), ("le", &self.le_rows)] {
            for (i, row) in rows.iter().enumerate() {
                let mut seen = std::collections::HashSet::new();
                for &(col, val) in &row.entries {
                    if col >= self.num_vars {
                        return Err(format!("{kind} row {i} references variable {col}"));
                    }
                    if !val.is_finite() || !row.rhs.is_finite() {
                        return Err(format!("{kind} row {i} has a non-finite value"));
                    }
                    if !seen.insert(col) {
                        return Err(format!("{kind} row {i} has duplicate column {col}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The basis factorization broke down; should not happen on well-posed
    /// inputs.
    Numerical,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    /// Values of the structural variables (zeros unless `Optimal`).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Dense LU with partial pivoting for the bump block.
struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    ipiv: Vec<usize>,
}

impl DenseLu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<DenseLu> {
        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for r in k + 1..n {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-12 {
                return None;
            }
            ipiv[k] = p;
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Some(DenseLu { n, lu: a, ipiv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.ipiv[k]);
        }
        for k in 0..n {
            for r in k + 1..n {
                b[r] -= self.lu[r * n + k] * b[k];
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[k * n + k];
            for r in 0..k {
                b[r] -= self.lu[r * n + k] * b[k];
            }
        }
    }

    fn solve_transposed(&self, b: &mut [f64]) {
        let n = self.n;
        // U^T forward.
        for k in 0..n {
            b[k] /= self.lu[k * n + k];
            for r in k + 1..n {
                b[r] -= self.lu[k * n + r] * b[k];
            }
        }
        // L^T backward (unit diagonal).
        for k in (0..n).rev() {
            for r in 0..k {
                b[r] -= self.lu[k * n + r] * b[k];
            }
        }
        for k in (0..n).rev() {
            b.swap(k, self.ipiv[k]);
        }
    }
}

/// Basis factorization: a peel order covering the permuted-triangular part
/// plus a dense LU of whatever refused to peel.
struct Factor {
    /// (row, slot, pivot value) in forward-substitution order.
    peel: Vec<(usize, usize, f64)>,
    /// Scatter of the basis columns by row: (slot, value).
    rows: Vec<Vec<(usize, f64)>>,
    /// Basis columns by slot: (row, value).
    cols: Vec<Vec<(u32, f64)>>,
    bump_rows: Vec<usize>,
    bump_slots: Vec<usize>,
    /// Per bump row, its entries on peeled (non-bump) slots.
    bump_g: Vec<Vec<(usize, f64)>>,
    bump_lu: Option<DenseLu>,
}

impl Factor {
    fn build(cols: Vec<Vec<(u32, f64)>>, m: usize) -> Option<Factor> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (slot, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                rows[r as usize].push((slot, v));
            }
        }
        let mut col_active = vec![true; m];
        let mut row_active = vec![true; m];
        let mut row_count = vec![0usize; m];
        for (r, entries) in rows.iter().enumerate() {
            row_count[r] = entries.len();
        }
        let mut queue: Vec<usize> = (0..m).filter(|&r| row_count[r] == 1).collect();
        let mut peel = Vec::with_capacity(m);
        let mut slot_active_count = m;

        while let Some(r) = queue.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&(slot, val)) = rows[r].iter().find(|&&(s, _)| col_active[s]) else {
                continue;
            };
            if val.abs() < PIVOT_TOL {
                continue; // leave it for the bump
            }
            row_active[r] = false;
            col_active[slot] = false;
            slot_active_count -= 1;
            peel.push((r, slot, val));
            for &(rr, _) in &cols[slot] {
                let rr = rr as usize;
                if row_active[rr] {
                    row_count[rr] -= 1;
                    if row_count[rr] == 1 {
                        queue.push(rr);
                    }
                }
            }
        }

        let bump_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let bump_slots: Vec<usize> = (0..m).filter(|&s| col_active[s]).collect();
        debug_assert_eq!(bump_rows.len(), bump_slots.len());
        debug_assert_eq!(bump_rows.len(), slot_active_count);

        let mut bump_g = Vec::with_capacity(bump_rows.len());
        let bump_lu = if bump_rows.is_empty() {
            None
        } else {
            let k = bump_rows.len();
            let in_bump: Vec<bool> = {
                let mut flags = vec![false; m];
                for &s in &bump_slots {
                    flags[s] = true;
                }
                flags
            };
            for &r in &bump_rows {
                bump_g.push(
                    rows[r]
                        .iter()
                        .copied()
                        .filter(|&(s, _)| !in_bump[s])
                        .collect(),
                );
            }
            let row_pos: std::collections::HashMap<usize, usize> =
                bump_rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let mut h = vec![0.0f64; k * k];
            for (j, &slot) in bump_slots.iter().enumerate() {
                for &(r, v) in &cols[slot] {
                    if let Some(&i) = row_pos.get(&(r as usize)) {
                        h[i * k + j] = v;
                    }
                }
            }
            Some(DenseLu::factor(h, k)?)
        };

        Some(Factor {
            peel,
            rows,
            cols,
            bump_rows,
            bump_slots,
            bump_g,
            bump_lu,
        })
    }

    /// Solves `B x = b` with `b` indexed by row; the result is indexed by
    /// basis slot.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = b.len();
        let mut x = vec![0.0f64; m];
        for &(r, slot, pivot) in &self.peel {
            let mut acc = b[r];
            for &(s, v) in &self.rows[r] {
                if s != slot {
                    acc -= v * x[s];
                }
            }
            x[slot] = acc / pivot;
        }
        if let Some(lu) = &self.bump_lu {
            let k = self.bump_rows.len();
            let mut rhs = vec![0.0f64; k];
            for (i, &r) in self.bump_rows.iter().enumerate() {
                let mut acc = b[r];
                for &(s, v) in &self.bump_g[i] {
                    acc -= v * x[s];
                }
                rhs[i] = acc;
            }
            lu.solve(&mut rhs);
            for (j, &slot) in self.bump_slots.iter().enumerate() {
                x[slot] = rhs[j];
            }
        }
        x
    }

    /// Solves `B^T y = c` with `c` indexed by slot; the result is indexed by
    /// row.
    fn solve_transposed(&self, c: &[f64]) -> Vec<f64> {
        let m = c.len();
        let mut y = vec![0.0f64; m];
        if let Some(lu) = &self.bump_lu {
            let mut rhs: Vec<f64> = self.bump_slots.iter().map(|&s| c[s]).collect();
            lu.solve_transposed(&mut rhs);
            for (i, &r) in self.bump_rows.iter().enumerate() {
                y[r] = rhs[i];
            }
        }
        for &(r, slot, pivot) in self.peel.iter().rev() {
            let mut acc = c[slot];
            for &(rr, v) in &self.cols[slot] {
                let rr = rr as usize;
                if rr != r {
                    acc -= v * y[rr];
                }
            }
            y[r] = acc / pivot;
        }
        y
    }
}

/// Product-form update: basis slot `slot` was replaced; `w = B^-1 a_q`.
struct Eta {
    slot: usize,
    pivot: f64,
    /// Sparse off-pivot entries of `w`.
    entries: Vec<(usize, f64)>,
}

struct Solver {
    m: usize,
    n_structural: usize,
    n_total: usize,
    cols: Vec<Vec<(u32, f64)>>,
    rhs: Vec<f64>,
    phase2_cost: Vec<f64>,
    is_artificial: Vec<bool>,
    basis: Vec<usize>,
    slot_of_var: Vec<i64>,
    x_basic: Vec<f64>,
    factor: Factor,
    etas: Vec<Eta>,
    bland: bool,
    phase1: bool,
    iterations: usize,
    price_start: usize,
}

impl Solver {
    fn new(lp: &SparseLp) -> Option<Solver> {
        let m = lp.eq_rows.len() + lp.le_rows.len();
        let n_slack = lp.le_rows.len();
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); lp.num_vars];
        let mut rhs = vec![0.0f64; m];
        let mut flip = vec![false; m];

        for (r, row) in lp.eq_rows.iter().chain(lp.le_rows.iter()).enumerate() {
            flip[r] = row.rhs < 0.0;
            rhs[r] = row.rhs.abs();
            let sign = if flip[r] { -1.0 } else { 1.0 };
            for &(c, v) in &row.entries {
                cols[c].push((r as u32, sign * v));
            }
        }
        for col in &mut cols {
            col.sort_by_key(|&(r, _)| r);
        }

        // Slack columns for the <= rows.
        for i in 0..n_slack {
            let r = lp.eq_rows.len() + i;
            let sign = if flip[r] { -1.0 } else { 1.0 };
            cols.push(vec![(r as u32, sign)]);
        }

        // Artificial columns wherever the slack cannot start basic.
        let mut basis = Vec::with_capacity(m);
        let mut is_artificial = vec![false; lp.num_vars + n_slack];
        for r in 0..m {
            let is_le = r >= lp.eq_rows.len();
            if is_le && !flip[r] {
                basis.push(lp.num_vars + (r - lp.eq_rows.len()));
            } else {
                let var = cols.len();
                cols.push(vec![(r as u32, 1.0)]);
                is_artificial.push(true);
                basis.push(var);
            }
        }
        let n_total = cols.len();
        let any_artificial = basis.iter().any(|&v| is_artificial[v]);

        let mut phase2_cost = vec![0.0f64; n_total];
        phase2_cost[..lp.num_vars].copy_from_slice(&lp.objective);

        let mut slot_of_var = vec![-1i64; n_total];
        for (slot, &v) in basis.iter().enumerate() {
            slot_of_var[v] = slot as i64;
        }

        let factor = Factor::build(basis.iter().map(|&v| cols[v].clone()).collect(), m)?;
        let x_basic = factor.solve(&rhs);

        Some(Solver {
            m,
            n_structural: lp.num_vars,
            n_total,
            cols,
            rhs,
            phase2_cost,
            is_artificial,
            basis,
            slot_of_var,
            x_basic,
            factor,
            etas: Vec::new(),
            bland: false,
            phase1: any_artificial,
            iterations: 0,
            price_start: 0,
        })
    }

    /// Replaces the starting basis with caller-provided variables (one per
    /// row). Returns false when the basis is singular or infeasible, in
    /// which case the artificial start stays in place.
    fn try_crash_basis(&mut self, basis_vars: &[usize]) -> bool {
        if basis_vars.len() != self.m {
            return false;
        }
        let cols: Vec<Vec<(u32, f64)>> = basis_vars.iter().map(|&v| self.cols[v].clone()).collect();
        let Some(factor) = Factor::build(cols, self.m) else {
            return false;
        };
        let x = factor.solve(&self.rhs);
        if x.iter().any(|&v| v < -FEASIBILITY_TOL) {
            return false;
        }
        for v in self.slot_of_var.iter_mut() {
            *v = -1;
        }
        self.basis = basis_vars.to_vec();
        for (slot, &v) in self.basis.iter().enumerate() {
            self.slot_of_var[v] = slot as i64;
        }
        self.factor = factor;
        self.etas.clear();
        self.x_basic = x;
        self.phase1 = false;
        true
    }

    fn cost(&self, var: usize) -> f64 {
        if self.phase1 {
            if self.is_artificial[var] {
                1.0
            } else {
                0.0
            }
        } else {
            self.phase2_cost[var]
        }
    }

    fn objective_value(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_basic)
            .map(|(&v, &x)| self.cost(v) * x)
            .sum()
    }

    fn refactor(&mut self) -> bool {
        let cols = self.basis.iter().map(|&v| self.cols[v].clone()).collect();
        match Factor::build(cols, self.m) {
            Some(f) => {
                self.factor = f;
                self.etas.clear();
                self.x_basic = self.factor.solve(&self.rhs);
                true
            }
            None => false,
        }
    }

    fn ftran(&self, b_rows: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve(b_rows);
        for eta in &self.etas {
            let xr = x[eta.slot] / eta.pivot;
            if xr != 0.0 {
                for &(i, w) in &eta.entries {
                    x[i] -= w * xr;
                }
            }
            x[eta.slot] = xr;
        }
        x
    }

    fn btran(&self, c_slots: &[f64]) -> Vec<f64> {
        let mut c = c_slots.to_vec();
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.slot];
            for &(i, w) in &eta.entries {
                acc -= w * c[i];
            }
            c[eta.slot] = acc / eta.pivot;
        }
        self.factor.solve_transposed(&c)
    }

    fn reduced_cost(&self, var: usize, y: &[f64]) -> f64 {
        let mut d = self.cost(var);
        for &(r, v) in &self.cols[var] {
            d -= v * y[r as usize];
        }
        d
    }

    /// Reduced-cost pricing. Returns the entering variable, or `None` at
    /// optimality.
    ///
    /// Dantzig mode scans a rotating window of columns and takes the most
    /// negative candidate (lowest index on ties); optimality is only
    /// declared after a full wrap finds nothing. Bland mode scans from
    /// index zero and takes the first candidate. Both are deterministic.
    fn price(&mut self) -> Option<usize> {
        let c_basic: Vec<f64> = self.basis.iter().map(|&v| self.cost(v)).collect();
        let y = self.btran(&c_basic);
        if self.bland {
            for var in 0..self.n_total {
                if self.slot_of_var[var] >= 0 || self.is_artificial[var] {
                    continue;
                }
                if self.reduced_cost(var, &y) < -OPTIMALITY_TOL {
                    return Some(var);
                }
            }
            return None;
        }

        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0usize;
        let mut cursor = self.price_start % self.n_total.max(1);
        while scanned < self.n_total {
            let var = cursor;
            cursor = (cursor + 1) % self.n_total;
            scanned += 1;
            if self.slot_of_var[var] >= 0 || self.is_artificial[var] {
                continue;
            }
            let d = self.reduced_cost(var, &y);
            if d < -OPTIMALITY_TOL {
                let better = match best {
                    None => true,
                    // Strictly better, or equal with a lower index.
                    Some((bv, bd)) => d < bd || (d == bd && var < bv),
                };
                if better {
                    best = Some((var, d));
                }
            }
            if best.is_some() && scanned >= PRICE_SECTION && scanned % PRICE_SECTION == 0 {
                break;
            }
        }
        if best.is_some() {
            self.price_start = cursor;
        }
        best.map(|(v, _)| v)
    }

    /// Two-pass (Harris) ratio test for entering direction `w = B^-1 a_q`.
    /// Pass one finds the tightest step with bounds stretched by the
    /// feasibility tolerance; pass two picks the largest pivot among rows
    /// blocking within that step, so tiny pivots never enter the eta file.
    /// Artificials are fixed at zero in phase two, so any movement ejects
    /// them immediately. Returns (leaving slot, step).
    fn ratio_test(&self, w: &[f64]) -> Option<(usize, f64)> {
        let eligible = |slot: usize, wi: f64| -> Option<f64> {
            let fixed = !self.phase1 && self.is_artificial[self.basis[slot]];
            if wi > PIVOT_TOL {
                Some(wi)
            } else if fixed && wi < -PIVOT_TOL {
                Some(-wi)
            } else {
                None
            }
        };

        if self.bland {
            // Plain lowest-variable-index rule; termination over speed.
            let mut t_min = f64::INFINITY;
            let mut chosen: Option<usize> = None;
            for slot in 0..self.m {
                let Some(rate) = eligible(slot, w[slot]) else { continue };
                let t = self.x_basic[slot].max(0.0) / rate;
                match chosen {
                    None => {
                        t_min = t;
                        chosen = Some(slot);
                    }
                    Some(c) => {
                        if t < t_min - FEASIBILITY_TOL {
                            t_min = t;
                            chosen = Some(slot);
                        } else if t <= t_min + FEASIBILITY_TOL && self.basis[slot] < self.basis[c] {
                            t_min = t.min(t_min);
                            chosen = Some(slot);
                        }
                    }
                }
            }
            return chosen.map(|slot| (slot, t_min.max(0.0)));
        }

        let mut t_bound = f64::INFINITY;
        for slot in 0..self.m {
            let Some(rate) = eligible(slot, w[slot]) else { continue };
            let t = (self.x_basic[slot].max(0.0) + FEASIBILITY_TOL) / rate;
            t_bound = t_bound.min(t);
        }
        if t_bound.is_infinite() {
            return None;
        }
        let mut best_slot = None;
        let mut best_rate = 0.0;
        for slot in 0..self.m {
            let Some(rate) = eligible(slot, w[slot]) else { continue };
            let t = self.x_basic[slot].max(0.0) / rate;
            if t <= t_bound && rate > best_rate {
                best_rate = rate;
                best_slot = Some(slot);
            }
        }
        let slot = best_slot?;
        let rate = eligible(slot, w[slot]).expect("chosen slot is eligible");
        Some((slot, (self.x_basic[slot].max(0.0) / rate).max(0.0)))
    }

    fn pivot(&mut self, entering: usize, slot: usize, t: f64, w: Vec<f64>) {
        for s in 0..self.m {
            if w[s] != 0.0 {
                self.x_basic[s] -= t * w[s];
            }
        }
        let leaving = self.basis[slot];
        self.slot_of_var[leaving] = -1;
        self.slot_of_var[entering] = slot as i64;
        self.basis[slot] = entering;
        self.x_basic[slot] = t;

        let entries: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != slot && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            slot,
            pivot: w[slot],
            entries,
        });
    }

    fn run(&mut self, max_iterations: usize) -> SolveStatus {
        let mut t_price = 0.0f64; let mut t_ftran = 0.0f64; let mut t_ratio = 0.0f64;
        let mut t_pivot = 0.0f64; let mut t_refactor = 0.0f64; let mut t_obj = 0.0f64;
        let mut eta_entries_total = 0usize;
        let mut stall = 0usize;
        let mut last_objective = f64::INFINITY;
        loop {
            if self.iterations >= max_iterations {
                return SolveStatus::IterationLimit;
            }
            if self.etas.len() >= REFACTOR_EVERY {
                let t0 = std::time::Instant::now();
                let ok = self.refactor();
                t_refactor += t0.elapsed().as_secs_f64();
                if !ok { return SolveStatus::Numerical; }
            }

            let t0 = std::time::Instant::now();
            let priced = self.price();
            t_price += t0.elapsed().as_secs_f64();
            match priced {
                None => {
                    if self.phase1 {
                        // Refresh the factorization before judging
                        // feasibility, then clean residual infeasibility.
                        if !self.refactor() {
                            return SolveStatus::Numerical;
                        }
                        if self.objective_value() > 1e-7 {
                            return SolveStatus::Infeasible;
                        }
                        self.phase1 = false;
                        self.bland = false;
                        stall = 0;
                        last_objective = f64::INFINITY;
                        continue;
                    }
                    if !self.refactor() {
                        return SolveStatus::Numerical;
                    }
                    // The recomputed basics must actually satisfy the
                    // bounds, or the answer would be silently infeasible.
                    let worst = self
                        .x_basic
                        .iter()
                        .fold(0.0f64, |acc, &v| acc.max(-v));
                    if worst > 1e-6 {
                        return SolveStatus::Numerical;
                    }
                    if std::env::var("SIMPLEX_TIMING").is_ok() {
                        eprintln!("simplex timing: price {t_price:.1}s ftran {t_ftran:.1}s ratio {t_ratio:.1}s pivot {t_pivot:.1}s refactor {t_refactor:.1}s obj {t_obj:.1}s, {} iters, avg eta nnz {}",
                            self.iterations, eta_entries_total / self.iterations.max(1));
                    }
                    return SolveStatus::Optimal;
                }
                Some(entering) => {
                    let t0 = std::time::Instant::now();
                    let mut dense = vec![0.0f64; self.m];
                    for &(r, v) in &self.cols[entering] {
                        dense[r as usize] = v;
                    }
                    let w = self.ftran(&dense);
                    t_ftran += t0.elapsed().as_secs_f64();
                    let t0 = std::time::Instant::now();
                    let rt = self.ratio_test(&w);
                    t_ratio += t0.elapsed().as_secs_f64();
                    let Some((slot, t)) = rt else {
                        return if self.phase1 {
                            SolveStatus::Numerical
                        } else {
                            SolveStatus::Unbounded
                        };
                    };
                    let t0 = std::time::Instant::now();
                    self.pivot(entering, slot, t, w);
                    eta_entries_total += self.etas.last().map(|e| e.entries.len()).unwrap_or(0);
                    t_pivot += t0.elapsed().as_secs_f64();
                    self.iterations += 1;

                    let t0 = std::time::Instant::now();
                    let z = self.objective_value();
                    t_obj += t0.elapsed().as_secs_f64();
                    if z < last_objective - 1e-12 {
                        stall = 0;
                        self.bland = false;
                    } else {
                        stall += 1;
                        if stall > STALL_LIMIT {
                            self.bland = true;
                        }
                    }
                    last_objective = z;
                }
            }
        }
    }

    fn extract(&self) -> (Vec<f64>, f64) {
        let mut x = vec![0.0f64; self.n_structural];
        for (slot, &var) in self.basis.iter().enumerate() {
            if var < self.n_structural {
                x[var] = self.x_basic[slot].max(0.0);
            }
        }
        let objective = x
            .iter()
            .zip(&self.phase2_cost[..self.n_structural])
            .map(|(&xi, &ci)| xi * ci)
            .sum();
        (x, objective)
    }
}

/// Solves the LP to a basic optimal solution.
pub fn solve(lp: &SparseLp) -> LpSolution {
    solve_inner(lp, default_limit(lp), None)
}

/// Solves with a caller-supplied starting basis, one variable per row in
/// the solver's total index space (structural variables first, then one
/// slack per `<=` row). A singular or infeasible basis falls back to the
/// ordinary two-phase start.
pub fn solve_with_basis(lp: &SparseLp, basis_vars: &[usize]) -> LpSolution {
    solve_inner(lp, default_limit(lp), Some(basis_vars))
}

pub fn solve_with_limit(lp: &SparseLp, max_iterations: usize) -> LpSolution {
    solve_inner(lp, max_iterations, None)
}

fn default_limit(lp: &SparseLp) -> usize {
    50 * (lp.num_vars + lp.eq_rows.len() + lp.le_rows.len()) + 10_000
}

fn solve_inner(lp: &SparseLp, max_iterations: usize, basis_vars: Option<&[usize]>) -> LpSolution {
    if let Err(msg) = lp.validate() {
        panic!("malformed LP: {msg}");
    }
    let empty = LpSolution {
        status: SolveStatus::Numerical,
        x: vec![0.0; lp.num_vars],
        objective: 0.0,
        iterations: 0,
    };
    let Some(mut solver) = Solver::new(lp) else {
        return empty;
    };
    if let Some(vars) = basis_vars {
        solver.try_crash_basis(vars);
    }
    let status = solver.run(max_iterations);
    let (x, objective) = match status {
        SolveStatus::Optimal => solver.extract(),
        _ => (vec![0.0; lp.num_vars], 0.0),
    };
    LpSolution {
        status,
        x,
        objective,
        iterations: solver.iterations,
    }
}

/// Maximum absolute constraint violation of `x` under the LP rows.
pub fn residual(lp: &SparseLp, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for row in &lp.eq_rows {
        let lhs: f64 = row.entries.iter().map(|&(c, v)| v * x[c]).sum();
        worst = worst.max((lhs - row.rhs).abs());
    }
    for row in &lp.le_rows {
        let lhs: f64 = row.entries.iter().map(|&(c, v)| v * x[c]).sum();
        worst = worst.max((lhs - row.rhs).max(0.0));
    }
    for &xi in x {
        worst = worst.max((-xi).max(0.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_lower_bound() {
        // min x s.t. x >= 1, i.e. -x <= -1.
        let lp = SparseLp {
            num_vars: 1,
            objective: vec![1.0],
            eq_rows: vec![],
            le_rows: vec![SparseRow::new(vec![(0, -1.0)], -1.0)],
        };
        let sol = solve(&lp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn facet_vertex_is_pinned_by_pivot_rule() {
        // min -x - y s.t. x + y <= 1: the whole facet is optimal, the
        // lowest-index entering rule lands on (1, 0).
        let lp = SparseLp {
            num_vars: 2,
            objective: vec![-1.0, -1.0],
            eq_rows: vec![],
            le_rows: vec![SparseRow::new(vec![(0, 1.0), (1, 1.0)], 1.0)],
        };
        let sol = solve(&lp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!(sol.x[1].abs() < 1e-9);
    }

    #[test]
    fn contradictory_empty_row_is_infeasible() {
        // 0 = 1 with no variables in the row.
        let lp = SparseLp {
            num_vars: 1,
            objective: vec![0.0],
            eq_rows: vec![SparseRow::new(vec![], 1.0)],
            le_rows: vec![],
        };
        assert_eq!(solve(&lp).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_below() {
        // min -x with no constraints binding x from above.
        let lp = SparseLp {
            num_vars: 1,
            objective: vec![-1.0],
            eq_rows: vec![],
            le_rows: vec![SparseRow::new(vec![(0, -1.0)], 0.0)],
        };
        assert_eq!(solve(&lp).status, SolveStatus::Unbounded);
    }

    #[test]
    fn equality_system() {
        // min x + 2y s.t. x + y = 3, x - y = 1 -> x = 2, y = 1.
        let lp = SparseLp {
            num_vars: 2,
            objective: vec![1.0, 2.0],
            eq_rows: vec![
                SparseRow::new(vec![(0, 1.0), (1, 1.0)], 3.0),
                SparseRow::new(vec![(0, 1.0), (1, -1.0)], 1.0),
            ],
            le_rows: vec![],
        };
        let sol = solve(&lp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 4.0).abs() < 1e-9);
        assert!(residual(&lp, &sol.x) < 1e-9);
    }

    #[test]
    fn degenerate_rows_do_not_cycle() {
        // Klee-Minty-flavoured degeneracy: redundant copies of a binding row.
        let lp = SparseLp {
            num_vars: 3,
            objective: vec![-2.0, -3.0, -1.0],
            eq_rows: vec![],
            le_rows: vec![
                SparseRow::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.0),
                SparseRow::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.0),
                SparseRow::new(vec![(0, 1.0), (1, 1.0)], 1.0),
                SparseRow::new(vec![(1, 1.0)], 1.0),
            ],
        };
        let sol = solve(&lp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_le_rows_need_phase_one() {
        // x + y >= 2 (written as -x - y <= -2), minimize x + 3y -> (2, 0).
        let lp = SparseLp {
            num_vars: 2,
            objective: vec![1.0, 3.0],
            eq_rows: vec![],
            le_rows: vec![SparseRow::new(vec![(0, -1.0), (1, -1.0)], -2.0)],
        };
        let sol = solve(&lp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!(sol.x[1].abs() < 1e-9);
    }

    proptest::proptest! {
        /// Random small LPs: when our solver says optimal, the point is
        /// feasible and no feasible grid point beats it.
        #[test]
        fn random_lp_soundness(seed in 0u64..120) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1usize..4);
            let rows = rng.random_range(1usize..4);
            let objective: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut le_rows = Vec::new();
            for _ in 0..rows {
                let entries: Vec<(usize, f64)> = (0..n)
                    .map(|c| (c, rng.random_range(0.05..2.0)))
                    .collect();
                le_rows.push(SparseRow::new(entries, rng.random_range(0.5..3.0)));
            }
            // All-positive coefficients with positive rhs: bounded, feasible.
            let lp = SparseLp { num_vars: n, objective, eq_rows: vec![], le_rows };
            let sol = solve(&lp);
            proptest::prop_assert_eq!(sol.status, SolveStatus::Optimal);
            proptest::prop_assert!(residual(&lp, &sol.x) < 1e-8);

            // Coarse grid scan cannot find anything meaningfully better.
            let steps = 6usize;
            let mut best = f64::INFINITY;
            let mut point = vec![0.0f64; n];
            scan(&lp, 0, steps, &mut point, &mut best);
            proptest::prop_assert!(sol.objective <= best + 1e-6);
        }
    }

    #[cfg(test)]
    fn scan(lp: &SparseLp, dim: usize, steps: usize, point: &mut Vec<f64>, best: &mut f64) {
        if dim == lp.num_vars {
            if residual(lp, point) < 1e-9 {
                let obj: f64 = point
                    .iter()
                    .zip(&lp.objective)
                    .map(|(&x, &c)| x * c)
                    .sum();
                *best = best.min(obj);
            }
            return;
        }
        for i in 0..=steps {
            point[dim] = 3.0 * i as f64 / steps as f64;
            scan(lp, dim + 1, steps, point, best);
        }
    }
}
