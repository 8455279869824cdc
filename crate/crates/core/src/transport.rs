//! Entropic optimal transport.
//!
//! Ground-cost matrices use the L1 metric raised to a power `p`. Plans are
//! computed by log-domain Sinkhorn-Knopp scaling with epsilon annealing, so
//! small regularization strengths (the sharp regime the losses run in) stay
//! numerically sound. [`sinkhorn_divergence`] is the debiased form
//! `S(P,Q) = OT(P,Q) - OT(P,P)/2 - OT(Q,Q)/2`, which is zero on identical
//! measures. [`exact_ot`] solves tiny instances exactly by enumerating the
//! spanning-tree vertices of the transportation polytope; it exists as an
//! independent oracle for the iterative path.

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_slice, DenseMatrix, DenseVector};

/// Weighted point cloud in `R^d`: the two sides of a transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<DenseVector>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Validates: non-empty, consistent dimension, non-negative weights
    /// summing to 1 within 1e-9.
    pub fn new(points: Vec<DenseVector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::DimensionMismatch("points of mixed dimension".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Uniformly weighted measure over the given points.
    pub fn uniform(points: Vec<DenseVector>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let w = vec![1.0 / n as f64; n];
        Self::new(points, w)
    }

    /// A single unit-mass atom.
    pub fn dirac(point: DenseVector) -> Self {
        Self { points: vec![point], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[DenseVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A coupling between two weight vectors, with its feasibility residual.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: DenseMatrix,
    pub source_marginal: Vec<f64>,
    pub target_marginal: Vec<f64>,
    /// Max absolute row/column-sum deviation from the marginals.
    pub residual: f64,
    /// False when the iteration hit its budget before `residual <= tol`.
    pub converged: bool,
    pub iterations: usize,
}

impl TransportPlan {
    /// `<T, C>`: the transport cost of this plan under cost matrix `c`.
    pub fn transport_cost(&self, c: &DenseMatrix) -> f64 {
        self.plan
            .data()
            .iter()
            .zip(c.data())
            .map(|(t, c)| t * c)
            .sum()
    }

    /// Shannon entropy `-sum T log T` (0 log 0 = 0).
    pub fn entropy(&self) -> f64 {
        -self
            .plan
            .data()
            .iter()
            .filter(|&&t| t > 0.0)
            .map(|&t| t * t.ln())
            .sum::<f64>()
    }

    fn compute_residual(plan: &DenseMatrix, a: &[f64], b: &[f64]) -> f64 {
        let (n, m) = (plan.rows(), plan.cols());
        let mut worst = 0.0_f64;
        for i in 0..n {
            let s: f64 = plan.row(i).iter().sum();
            worst = worst.max((s - a[i]).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| plan[(i, j)]).sum();
            worst = worst.max((s - b[j]).abs());
        }
        worst
    }
}

/// Default iteration cap for [`sinkhorn_plan`].
pub const SINKHORN_MAX_ITER: usize = 1000;
/// Default marginal-residual tolerance for [`sinkhorn_plan`].
pub const SINKHORN_TOL: f64 = 1e-6;

/// Ground-cost matrix between two measures: entry `(k, l)` is the L1
/// distance between point `k` of `p_measure` and point `l` of `q_measure`,
/// raised to the power `p`.
pub fn cost_matrix(
    p_measure: &EmpiricalMeasure,
    q_measure: &EmpiricalMeasure,
    p: f64,
) -> Result<DenseMatrix> {
    if p_measure.dim() != q_measure.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            p_measure.dim(),
            q_measure.dim()
        )));
    }
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!("cost power {p} < 1")));
    }
    let (n, m) = (p_measure.len(), q_measure.len());
    let mut c = DenseMatrix::zeros(n, m);
    for k in 0..n {
        let x = p_measure.points()[k].as_slice();
        for l in 0..m {
            let y = q_measure.points()[l].as_slice();
            let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
            c[(k, l)] = if p == 1.0 { d } else { d.powf(p) };
        }
    }
    Ok(c)
}

/// Entropy-regularized transport plan by log-domain Sinkhorn-Knopp.
///
/// Minimizes `<T, C> - blur * H(T)` over couplings of `a` and `b`, where
/// `blur` is the regularization strength applied to the cost as given
/// (callers working from a length-scale derive it first; see
/// [`sinkhorn_divergence`]). Iterations run on dual potentials in cost
/// units, annealing the regularization down from the cost scale so that
/// sharp targets converge. Non-convergence within `max_iter` is not an
/// error: the plan is returned with `converged = false` and the achieved
/// residual, and the caller decides.
pub fn sinkhorn_plan(
    c: &DenseMatrix,
    a: &[f64],
    b: &[f64],
    blur: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let mut solver = LogDomainSolver::new(c, a, b, blur)?;

    // Halving ladder from the cost scale down to the target (warm start),
    // then polish at the target until the residual meets `tol`.
    let mut rho = solver.max_cost.max(blur);
    while rho > blur * 1.5 && solver.iterations < max_iter {
        solver.step(rho)?;
        solver.step(rho)?;
        rho *= 0.5;
    }

    let mut plan = solver.build_plan();
    let mut residual = TransportPlan::compute_residual(&plan, a, b);
    while residual > tol && solver.iterations < max_iter {
        solver.step(blur)?;
        plan = solver.build_plan();
        residual = TransportPlan::compute_residual(&plan, a, b);
    }

    if !plan.all_finite() {
        return Err(Error::NumericalBlowUp);
    }
    Ok(TransportPlan {
        plan,
        source_marginal: a.to_vec(),
        target_marginal: b.to_vec(),
        residual,
        converged: residual <= tol,
        iterations: solver.iterations,
    })
}

/// Annealing rungs of the fixed-shape solve behind the divergence.
const DIVERGENCE_RUNGS: usize = 30;
/// Polish iterations at the target regularization.
const DIVERGENCE_POLISH: usize = 120;

/// Fixed-shape solve: a geometric annealing ladder with a constant number
/// of rungs and polish steps, no adaptive stopping. The iterate path is
/// then a smooth function of the cost entries, which the envelope
/// gradients of the anchor loss rely on (adaptive stopping introduces
/// step discontinuities under parameter perturbations). The residual is
/// still measured and reported.
pub(crate) fn sinkhorn_plan_smooth(
    c: &DenseMatrix,
    a: &[f64],
    b: &[f64],
    blur: f64,
) -> Result<TransportPlan> {
    let mut solver = LogDomainSolver::new(c, a, b, blur)?;

    let rho0 = solver.max_cost.max(blur);
    let ratio = (blur / rho0).powf(1.0 / DIVERGENCE_RUNGS as f64);
    let mut rho = rho0;
    for _ in 0..DIVERGENCE_RUNGS {
        solver.step(rho)?;
        rho *= ratio;
    }
    for _ in 0..DIVERGENCE_POLISH {
        solver.step(blur)?;
    }

    let plan = solver.build_plan();
    if !plan.all_finite() {
        return Err(Error::NumericalBlowUp);
    }
    let residual = TransportPlan::compute_residual(&plan, a, b);
    Ok(TransportPlan {
        plan,
        source_marginal: a.to_vec(),
        target_marginal: b.to_vec(),
        residual,
        converged: residual <= SINKHORN_TOL,
        iterations: solver.iterations,
    })
}

/// Log-domain scaling state: dual potentials in cost units (so annealing
/// can reuse them across regularization strengths).
struct LogDomainSolver<'a> {
    c: &'a DenseMatrix,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    f_next: Vec<f64>,
    g_next: Vec<f64>,
    scratch: Vec<f64>,
    max_cost: f64,
    blur: f64,
    iterations: usize,
}

impl<'a> LogDomainSolver<'a> {
    fn new(c: &'a DenseMatrix, a: &[f64], b: &[f64], blur: f64) -> Result<Self> {
        let (n, m) = (c.rows(), c.cols());
        if n == 0 || m == 0 {
            return Err(Error::EmptyInput);
        }
        if a.len() != n || b.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "cost {}x{} vs weights {}/{}",
                n,
                m,
                a.len(),
                b.len()
            )));
        }
        if blur <= 0.0 || !blur.is_finite() {
            return Err(Error::InvalidArgument(format!("blur {blur} must be > 0")));
        }
        if c.data().iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "cost entries must be finite and >= 0".into(),
            ));
        }
        Ok(Self {
            c,
            // ln 0 = -inf: zero-weight atoms carry no mass
            log_a: a.iter().map(|&x| x.ln()).collect(),
            log_b: b.iter().map(|&x| x.ln()).collect(),
            f: vec![0.0; n],
            g: vec![0.0; m],
            f_next: vec![0.0; n],
            g_next: vec![0.0; m],
            scratch: vec![0.0; n.max(m)],
            max_cost: c.data().iter().cloned().fold(0.0_f64, f64::max),
            blur,
            iterations: 0,
        })
    }

    /// Symmetrized (damped simultaneous) update: both potentials refresh
    /// from the old pair with averaging, `f <- (f + F(g))/2`. Transposing
    /// the problem then transposes the whole trajectory bit for bit, so
    /// the divergence built on top is symmetric in its arguments at any
    /// iteration depth, not just at convergence. The averaging also damps
    /// the gauge mode that plain simultaneous updates leave oscillating.
    fn step(&mut self, rho: f64) -> Result<()> {
        let (n, m) = (self.c.rows(), self.c.cols());
        // F_i(g) = rho * (log a_i - lse_j((g_j - C_ij)/rho))
        for i in 0..n {
            let row = self.c.row(i);
            for j in 0..m {
                self.scratch[j] = (self.g[j] - row[j]) / rho;
            }
            let lse = log_sum_exp_slice(&self.scratch[..m])?;
            self.f_next[i] = 0.5 * (self.f[i] + rho * (self.log_a[i] - lse));
        }
        // G_j(f) = rho * (log b_j - lse_i((f_i - C_ij)/rho))
        for j in 0..m {
            for i in 0..n {
                self.scratch[i] = (self.f[i] - self.c[(i, j)]) / rho;
            }
            let lse = log_sum_exp_slice(&self.scratch[..n])?;
            self.g_next[j] = 0.5 * (self.g[j] + rho * (self.log_b[j] - lse));
        }
        std::mem::swap(&mut self.f, &mut self.f_next);
        std::mem::swap(&mut self.g, &mut self.g_next);
        self.iterations += 1;
        if self.f.iter().chain(self.g.iter()).any(|x| x.is_nan()) {
            return Err(Error::NumericalBlowUp);
        }
        Ok(())
    }

    fn build_plan(&self) -> DenseMatrix {
        let (n, m) = (self.c.rows(), self.c.cols());
        let mut t = DenseMatrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let e = (self.f[i] + self.g[j] - self.c[(i, j)]) / self.blur;
                t[(i, j)] = e.exp();
            }
        }
        t
    }
}

/// Entropic transport cost `<T, C>` between two measures at regularization
/// `reg`. One-atom sides need no iteration: the coupling is forced.
fn entropic_ot_cost(
    p_measure: &EmpiricalMeasure,
    q_measure: &EmpiricalMeasure,
    cost_power: f64,
    reg: f64,
) -> Result<(f64, TransportPlan, DenseMatrix)> {
    let c = cost_matrix(p_measure, q_measure, cost_power)?;
    let a = p_measure.weights();
    let b = q_measure.weights();
    let plan = if p_measure.len() == 1 || q_measure.len() == 1 {
        forced_plan(a, b)
    } else {
        sinkhorn_plan_smooth(&c, a, b, reg)?
    };
    let cost = plan.transport_cost(&c);
    Ok((cost, plan, c))
}

/// The unique coupling when one side is a single atom.
fn forced_plan(a: &[f64], b: &[f64]) -> TransportPlan {
    let (n, m) = (a.len(), b.len());
    let mut t = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            t[(i, j)] = a[i] * b[j];
        }
    }
    TransportPlan {
        plan: t,
        source_marginal: a.to_vec(),
        target_marginal: b.to_vec(),
        residual: 0.0,
        converged: true,
        iterations: 0,
    }
}

/// Debiased Sinkhorn divergence
/// `S(P,Q) = OT(P,Q) - OT(P,P)/2 - OT(Q,Q)/2`, where `OT` is the transport
/// cost `<T, C>` at the Sinkhorn optimum with regularization `blur^p`
/// (`blur` is a length-scale in the ground metric; raising it to the cost
/// power converts it to cost units).
pub fn sinkhorn_divergence(
    p_measure: &EmpiricalMeasure,
    q_measure: &EmpiricalMeasure,
    p: f64,
    blur: f64,
) -> Result<f64> {
    if blur <= 0.0 {
        return Err(Error::InvalidArgument(format!("blur {blur} must be > 0")));
    }
    let reg = blur.powf(p);
    let (pq, _, _) = entropic_ot_cost(p_measure, q_measure, p, reg)?;
    let (pp, _, _) = entropic_ot_cost(p_measure, p_measure, p, reg)?;
    let (qq, _, _) = entropic_ot_cost(q_measure, q_measure, p, reg)?;
    Ok(pq - 0.5 * pp - 0.5 * qq)
}

/// The three couplings and cost matrices behind a divergence evaluation,
/// for callers that differentiate through the frozen plans.
pub struct DivergenceParts {
    pub value: f64,
    pub plan_pq: TransportPlan,
    pub cost_pq: DenseMatrix,
    pub plan_pp: TransportPlan,
    pub cost_pp: DenseMatrix,
}

pub fn sinkhorn_divergence_parts(
    p_measure: &EmpiricalMeasure,
    q_measure: &EmpiricalMeasure,
    p: f64,
    blur: f64,
) -> Result<DivergenceParts> {
    if blur <= 0.0 {
        return Err(Error::InvalidArgument(format!("blur {blur} must be > 0")));
    }
    let reg = blur.powf(p);
    let (pq, plan_pq, cost_pq) = entropic_ot_cost(p_measure, q_measure, p, reg)?;
    let (pp, plan_pp, cost_pp) = entropic_ot_cost(p_measure, p_measure, p, reg)?;
    let (qq, _, _) = entropic_ot_cost(q_measure, q_measure, p, reg)?;
    Ok(DivergenceParts {
        value: pq - 0.5 * pp - 0.5 * qq,
        plan_pq,
        cost_pq,
        plan_pp,
        cost_pp,
    })
}

/// Size cap for [`exact_ot`].
pub const EXACT_OT_MAX: usize = 5;

/// Exact minimum of `<T, C>` over the transportation polytope, by
/// enumerating spanning trees of the complete bipartite support graph
/// (every vertex of the polytope is the flow of some spanning tree).
/// Restricted to instances with at most [`EXACT_OT_MAX`] atoms per side.
/// Cost ties are broken toward the lexicographically smallest plan.
pub fn exact_ot(c: &DenseMatrix, a: &[f64], b: &[f64]) -> Result<(f64, TransportPlan)> {
    let (n, m) = (c.rows(), c.cols());
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    if n > EXACT_OT_MAX || m > EXACT_OT_MAX {
        return Err(Error::OracleTooLarge(EXACT_OT_MAX));
    }
    if a.len() != n || b.len() != m {
        return Err(Error::ShapeMismatch("marginals do not match cost".into()));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    if (sum_a - sum_b).abs() > 1e-9 {
        return Err(Error::InvalidArgument("marginal masses differ".into()));
    }

    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .collect();
    let tree_size = n + m - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;

    let mut combo: Vec<usize> = (0..tree_size).collect();
    loop {
        if let Some(flows) = tree_flow(&combo, &edges, n, m, a, b) {
            let cost: f64 = flows
                .iter()
                .zip(c.data())
                .map(|(x, cc)| x * cc)
                .sum();
            let better = match &best {
                None => true,
                Some((bc, bplan)) => {
                    let window = 1e-12 * (1.0 + bc.abs());
                    if cost < bc - window {
                        true
                    } else if cost <= bc + window {
                        lex_less(&flows, bplan)
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((cost, flows));
            }
        }
        if !next_combination(&mut combo, edges.len()) {
            break;
        }
    }

    let (cost, flows) = best.expect("transportation polytope is never empty");
    let plan = DenseMatrix::from_vec(n, m, flows)?;
    let residual = TransportPlan::compute_residual(&plan, a, b);
    Ok((
        cost,
        TransportPlan {
            plan,
            source_marginal: a.to_vec(),
            target_marginal: b.to_vec(),
            residual,
            converged: true,
            iterations: 0,
        },
    ))
}

/// Flow on a candidate spanning tree by leaf peeling; `None` when the edge
/// set is not a spanning tree or the flow goes negative (infeasible vertex).
fn tree_flow(
    combo: &[usize],
    edges: &[(usize, usize)],
    n: usize,
    m: usize,
    a: &[f64],
    b: &[f64],
) -> Option<Vec<f64>> {
    let nodes = n + m;
    // Union-find acyclicity/spanning check.
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &e in combo {
        let (i, j) = edges[e];
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, n + j));
        if ri == rj {
            return None; // cycle
        }
        parent[ri] = rj;
    }
    // n+m-1 acyclic edges on n+m nodes => spanning tree.

    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (slot, &e) in combo.iter().enumerate() {
        let (i, j) = edges[e];
        degree[i] += 1;
        degree[n + j] += 1;
        incident[i].push(slot);
        incident[n + j].push(slot);
    }

    let mut rem: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut used = vec![false; combo.len()];
    let mut flows = vec![0.0_f64; n * m];
    let mut stack: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
    let feas_tol = 1e-12 * (1.0 + rem.iter().cloned().fold(0.0, f64::max));

    let mut processed = 0;
    while let Some(v) = stack.pop() {
        if degree[v] == 0 {
            continue;
        }
        let slot = *incident[v]
            .iter()
            .find(|&&s| !used[s])
            .expect("leaf has an unused edge");
        used[slot] = true;
        processed += 1;
        let (i, j) = edges[combo[slot]];
        let flow = rem[v];
        if flow < -feas_tol {
            return None;
        }
        flows[i * m + j] = flow.max(0.0);
        let other = if v == i { n + j } else { i };
        rem[other] -= flow;
        rem[v] = 0.0;
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    if processed != combo.len() {
        return None;
    }
    Some(flows)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Advance `combo` to the next k-combination of `0..n`; false when done.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
