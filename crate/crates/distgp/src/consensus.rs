//! Distance-threshold communication graphs and synchronous information-form
//! consensus.
//!
//! Every round, each agent replaces its information state with a convex
//! combination of its own and its neighbors' previous-round states. On a
//! connected graph this drives all states to a common value at a geometric
//! rate; the fused moment-form estimate is then recovered with the
//! network-size correction (see [`fuse_estimate`]).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{spd_inverse, symmetrize, FilterState, InfoState};
use crate::kernel::PointSet;

/// Undirected communication graph over agent positions: edge (i, j) iff
/// `||x_i - x_j|| <= range`, no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    n: usize,
    range: f64,
    adj: Vec<bool>,
}

impl CommGraph {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        (0..n).filter(move |&j| self.adj[i * n + j])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Directed message count of one synchronous round: every agent sends to
    /// each neighbor.
    pub fn directed_message_count(&self) -> u64 {
        (0..self.n).map(|i| self.degree(i) as u64).sum()
    }
}

/// Build the graph from agent positions. The range is inclusive: agents at
/// exactly the communication range are connected. Distances are compared in
/// squared form, so the boundary case is exact.
pub fn build_graph(positions: &PointSet, range: f64) -> Result<CommGraph> {
    if !(range > 0.0) {
        return Err(Error::InvalidInput(format!(
            "communication range must be > 0, got {range}"
        )));
    }
    let n = positions.len();
    let mut adj = vec![false; n * n];
    let range_sq = range * range;
    for i in 0..n {
        for j in (i + 1)..n {
            let d_sq: f64 = positions
                .point(i)
                .iter()
                .zip(positions.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d_sq <= range_sq {
                adj[i * n + j] = true;
                adj[j * n + i] = true;
            }
        }
    }
    Ok(CommGraph { n, range, adj })
}

/// Undirected connectivity via breadth-first search (equals strong
/// connectivity since edges are symmetric).
pub fn is_connected(graph: &CommGraph) -> bool {
    let n = graph.len();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in graph.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Weighting rule for one consensus round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Weight 1/(1 + deg_i) on self and on each neighbor. Simple, but on
    /// irregular graphs the common limit is a degree-weighted average rather
    /// than the exact mean.
    #[default]
    Uniform,
    /// Metropolis weights w_ij = 1/(1 + max(deg_i, deg_j)), self weight
    /// 1 - sum_j w_ij. Doubly stochastic, so the network average is
    /// preserved on any graph.
    Metropolis,
}

impl WeightScheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(Self::Uniform),
            "metropolis" => Some(Self::Metropolis),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Metropolis => "metropolis",
        }
    }
}

/// The per-agent information states taking part in consensus.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPool {
    states: Vec<InfoState>,
}

impl ConsensusPool {
    pub fn new(states: Vec<InfoState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidInput("consensus pool must be non-empty".into()));
        }
        let dim = states[0].dim();
        for s in &states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(s.dim(), dim));
            }
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[InfoState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [InfoState] {
        &mut self.states
    }

    /// Network averages (1/n) sum L_i and (1/n) sum Omega_i — the values
    /// consensus converges toward.
    pub fn average(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.len() as f64;
        let dim = self.dim();
        let mut l = DVector::zeros(dim);
        let mut omega = DMatrix::zeros(dim, dim);
        for s in &self.states {
            l += &s.info_vec;
            omega += &s.info_mat;
        }
        (l / n, omega / n)
    }
}

/// One synchronous consensus round: every agent reads its neighbors'
/// previous-round states and writes a convex combination. Pure pool -> pool.
///
/// Summation runs over agent indices in ascending order (self included in
/// place), so on a complete graph with uniform weights every agent computes
/// the identical floating-point sum and disagreement collapses to exactly
/// zero in one round.
pub fn consensus_step(
    pool: &ConsensusPool,
    graph: &CommGraph,
    scheme: WeightScheme,
) -> Result<ConsensusPool> {
    let n = pool.len();
    if n != graph.len() {
        return Err(Error::DimensionMismatch(n, graph.len()));
    }
    let dim = pool.dim();
    let prev = pool.states();
    let mut next = Vec::with_capacity(n);

    for i in 0..n {
        let mut vec_acc = DVector::zeros(dim);
        let mut mat_acc = DMatrix::zeros(dim, dim);
        match scheme {
            WeightScheme::Uniform => {
                let w = 1.0 / (1.0 + graph.degree(i) as f64);
                for j in 0..n {
                    if j == i || graph.contains_edge(i, j) {
                        vec_acc += &prev[j].info_vec;
                        mat_acc += &prev[j].info_mat;
                    }
                }
                vec_acc *= w;
                mat_acc *= w;
            }
            WeightScheme::Metropolis => {
                let deg_i = graph.degree(i);
                let mut self_weight = 1.0;
                for j in graph.neighbors(i) {
                    let w = 1.0 / (1.0 + deg_i.max(graph.degree(j)) as f64);
                    self_weight -= w;
                    vec_acc.axpy(w, &prev[j].info_vec, 1.0);
                    mat_acc += &prev[j].info_mat * w;
                }
                vec_acc.axpy(self_weight, &prev[i].info_vec, 1.0);
                mat_acc += &prev[i].info_mat * self_weight;
            }
        }
        next.push(InfoState { info_vec: vec_acc, info_mat: mat_acc });
    }
    ConsensusPool::new(next)
}

/// Convergence diagnostic: the worst pairwise distance
/// `max_{i,j} ||L_i - L_j|| + ||Omega_i - Omega_j||_F`. Zero iff all agents
/// hold identical states.
pub fn disagreement(pool: &ConsensusPool) -> f64 {
    let n = pool.len();
    let states = pool.states();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dv = (&states[i].info_vec - &states[j].info_vec).norm();
            let dm = (&states[i].info_mat - &states[j].info_mat).norm();
            worst = worst.max(dv + dm);
        }
    }
    worst
}

/// Recover the fused moment-form estimate from the network averages,
/// applying the size correction: inverse-variance fusion of n converged
/// copies shrinks the covariance by 1/n, so the paper-form recovery is
///
///   theta = (sum Omega_i)^{-1} (sum L_i),   P = n (sum Omega_i)^{-1}
///
/// with `sum = n * average`. The two factors of n cancel, leaving
/// `P = average_omega^{-1}` — without the correction the fused covariance
/// would be n times too confident.
pub fn fuse_estimate(
    avg_info_vec: &DVector<f64>,
    avg_info_mat: &DMatrix<f64>,
    n: usize,
) -> Result<FilterState> {
    if n == 0 {
        return Err(Error::InvalidInput("network size must be >= 1".into()));
    }
    if avg_info_mat.nrows() != avg_info_vec.len() || !avg_info_mat.is_square() {
        return Err(Error::DimensionMismatch(avg_info_mat.nrows(), avg_info_vec.len()));
    }
    let nf = n as f64;
    let sum_omega = avg_info_mat * nf;
    let chol = Cholesky::new(sum_omega).ok_or_else(|| {
        Error::Numerical("fused information matrix is not positive definite".into())
    })?;
    let theta = chol.solve(&(avg_info_vec * nf));
    let mut cov = spd_inverse(&chol) * nf;
    symmetrize(&mut cov);
    Ok(FilterState { theta, cov, t_last: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn positions(points: &[Vec<f64>]) -> PointSet {
        PointSet::from_points(2, points).unwrap()
    }

    fn random_info(rng: &mut ChaCha8Rng, dim: usize) -> InfoState {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() - 0.5);
        let omega = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.3;
        InfoState {
            info_vec: DVector::from_fn(dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
            info_mat: omega,
        }
    }

    fn random_pool(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> ConsensusPool {
        ConsensusPool::new((0..n).map(|_| random_info(rng, dim)).collect()).unwrap()
    }

    /// Connected random geometric graph over the unit square, retrying seeds
    /// until connectivity holds.
    fn random_connected_graph(n: usize, range: f64, seed: &mut u64) -> CommGraph {
        loop {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            *seed += 1;
            let pts: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            let g = build_graph(&positions(&pts), range).unwrap();
            if is_connected(&g) {
                return g;
            }
        }
    }

    #[test]
    fn boundary_distance_is_inclusive() {
        let d = 5.0;
        let at_range = positions(&[vec![0.0, 0.0], vec![d, 0.0]]);
        let g = build_graph(&at_range, d).unwrap();
        assert!(g.contains_edge(0, 1));

        let beyond = positions(&[vec![0.0, 0.0], vec![d + 1e-9, 0.0]]);
        let g = build_graph(&beyond, d).unwrap();
        assert!(!g.contains_edge(0, 1));
    }

    #[test]
    fn collinear_agents_form_a_path() {
        let d = 3.0;
        let pts = positions(&[vec![0.0, 0.0], vec![d, 0.0], vec![2.0 * d, 0.0]]);
        let g = build_graph(&pts, d).unwrap();
        assert!(g.contains_edge(0, 1));
        assert!(g.contains_edge(1, 2));
        assert!(!g.contains_edge(0, 2));
        assert_eq!(g.edge_count(), 2);
        assert!(!g.contains_edge(0, 0), "no self-loops");
    }

    #[test]
    fn connectivity_simple_cases() {
        let complete = build_graph(
            &positions(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]),
            10.0,
        )
        .unwrap();
        assert!(is_connected(&complete));

        let isolated =
            build_graph(&positions(&[vec![0.0, 0.0], vec![100.0, 0.0]]), 1.0).unwrap();
        assert!(!is_connected(&isolated));
    }

    #[test]
    fn connectivity_matches_transitive_closure_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let n = 12;
            let range = 0.15 + 0.35 * rng.gen::<f64>();
            let pts: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            let g = build_graph(&positions(&pts), range).unwrap();

            // Brute-force reachability: boolean closure by repeated squaring
            // of (A + I).
            let mut reach = vec![vec![false; n]; n];
            for i in 0..n {
                reach[i][i] = true;
                for j in 0..n {
                    if i != j && g.contains_edge(i, j) {
                        reach[i][j] = true;
                    }
                }
            }
            for _ in 0..n {
                let prev = reach.clone();
                for i in 0..n {
                    for j in 0..n {
                        reach[i][j] = prev[i][j] || (0..n).any(|k| prev[i][k] && prev[k][j]);
                    }
                }
            }
            let closure_connected = reach.iter().all(|row| row.iter().all(|&r| r));
            assert_eq!(
                is_connected(&g),
                closure_connected,
                "trial {trial} disagrees with closure"
            );
        }
    }

    #[test]
    fn uniform_step_on_two_agents_averages() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pool = random_pool(&mut rng, 2, 3);
        let g = build_graph(&positions(&[vec![0.0, 0.0], vec![1.0, 0.0]]), 2.0).unwrap();
        let next = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();

        let want_vec = (&pool.states()[0].info_vec + &pool.states()[1].info_vec) / 2.0;
        for s in next.states() {
            assert!((&s.info_vec - &want_vec).abs().max() < 1e-15);
        }
        assert!(disagreement(&next) < 1e-14);
    }

    #[test]
    fn isolated_agent_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pool = random_pool(&mut rng, 2, 3);
        let g = build_graph(&positions(&[vec![0.0, 0.0], vec![50.0, 0.0]]), 1.0).unwrap();
        let next = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
        assert_eq!(next.states()[0], pool.states()[0]);
        assert_eq!(next.states()[1], pool.states()[1]);
    }

    #[test]
    fn star_graph_hand_case() {
        // Center 0 linked to leaves 1..3. Uniform: center gets the mean of
        // all four; each leaf gets (own + center)/2.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pool = random_pool(&mut rng, 4, 2);
        let pts = positions(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
        ]);
        let g = build_graph(&pts, 1.0).unwrap();
        assert_eq!(g.degree(0), 3);

        let next = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();

        let mut center_want = DVector::zeros(2);
        for s in pool.states() {
            center_want += &s.info_vec;
        }
        center_want /= 4.0;
        assert!((&next.states()[0].info_vec - &center_want).abs().max() < 1e-14);

        for leaf in 1..4 {
            let want =
                (&pool.states()[leaf].info_vec + &pool.states()[0].info_vec) / 2.0;
            assert!((&next.states()[leaf].info_vec - &want).abs().max() < 1e-14);
        }
    }

    #[test]
    fn disagreement_zero_on_identical_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_info(&mut rng, 3);
        let pool = ConsensusPool::new(vec![s.clone(), s.clone(), s]).unwrap();
        assert_eq!(disagreement(&pool), 0.0);
    }

    #[test]
    fn complete_graph_reaches_exact_consensus_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 8;
        let pool = random_pool(&mut rng, n, 4);
        let pts: Vec<Vec<f64>> =
            (0..n).map(|i| vec![(i as f64) * 0.01, 0.0]).collect();
        let g = build_graph(&positions(&pts), 1.0).unwrap();
        assert_eq!(g.edge_count(), n * (n - 1) / 2);
        let next = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
        assert_eq!(disagreement(&next), 0.0);
    }

    #[test]
    fn disagreement_is_non_increasing_on_connected_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut seed = 100;
        let g = random_connected_graph(10, 0.5, &mut seed);
        let mut pool = random_pool(&mut rng, 10, 3);
        let mut last = disagreement(&pool);
        for _ in 0..40 {
            pool = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
            let d = disagreement(&pool);
            assert!(d <= last + 1e-13);
            last = d;
        }
    }

    #[test]
    fn disagreement_contracts_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut seed = 500;
        let g = random_connected_graph(16, 0.5, &mut seed);
        let mut pool = random_pool(&mut rng, 16, 3);

        let mut log_disagreement = Vec::new();
        for _ in 0..50 {
            pool = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
            log_disagreement.push(disagreement(&pool).ln());
        }
        // Least-squares slope of log-disagreement over the step index.
        let k = log_disagreement.len() as f64;
        let mean_x = (k - 1.0) / 2.0;
        let mean_y = log_disagreement.iter().sum::<f64>() / k;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, y) in log_disagreement.iter().enumerate() {
            num += (i as f64 - mean_x) * (y - mean_y);
            den += (i as f64 - mean_x) * (i as f64 - mean_x);
        }
        let slope = num / den;
        assert!(slope < 0.0, "log-disagreement slope {slope} not negative");
    }

    #[test]
    fn uniform_preserves_average_on_regular_graphs() {
        // 6-cycle: all degrees 2.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 6;
        let pool = random_pool(&mut rng, n, 3);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
                vec![a.cos(), a.sin()]
            })
            .collect();
        // Circumradius 1, side length 2 sin(pi/6) = 1.
        let g = build_graph(&positions(&pts), 1.01).unwrap();
        for i in 0..n {
            assert_eq!(g.degree(i), 2);
        }

        let (l0, m0) = pool.average();
        let next = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
        let (l1, m1) = next.average();
        assert!((&l1 - &l0).abs().max() < 1e-12);
        assert!((&m1 - &m0).abs().max() < 1e-12);
    }

    #[test]
    fn metropolis_preserves_average_on_irregular_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let pool = random_pool(&mut rng, 4, 3);
        // Star graph: degrees 3, 1, 1, 1.
        let pts = positions(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
        ]);
        let g = build_graph(&pts, 1.0).unwrap();

        let (l0, m0) = pool.average();
        let mut p = pool;
        for _ in 0..10 {
            p = consensus_step(&p, &g, WeightScheme::Metropolis).unwrap();
        }
        let (l1, m1) = p.average();
        assert!((&l1 - &l0).abs().max() < 1e-12);
        assert!((&m1 - &m0).abs().max() < 1e-12);
    }

    #[test]
    fn consensus_keeps_information_matrices_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut seed = 900;
        let g = random_connected_graph(8, 0.6, &mut seed);
        let mut pool = random_pool(&mut rng, 8, 4);
        for _ in 0..30 {
            pool = consensus_step(&pool, &g, WeightScheme::Uniform).unwrap();
            for s in pool.states() {
                assert!(Cholesky::new(s.info_mat.clone()).is_some());
            }
        }
    }

    #[test]
    fn fusion_is_a_fixed_point_on_agreeing_agents() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let dim = 4;
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() - 0.5);
        let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.4;
        let theta = DVector::from_fn(dim, |_, _| rng.gen::<f64>());
        let state = FilterState { theta: theta.clone(), cov: cov.clone(), t_last: 0 };

        let info = state.to_info().unwrap();
        let n = 16;
        let pool = ConsensusPool::new(vec![info; n]).unwrap();
        let (avg_l, avg_omega) = pool.average();

        let fused = fuse_estimate(&avg_l, &avg_omega, n).unwrap();
        assert!((&fused.theta - &theta).abs().max() < 1e-10);
        assert!((&fused.cov - &cov).abs().max() < 1e-10);
    }

    #[test]
    fn two_agents_with_identity_covariances_fuse_to_mean() {
        let dim = 3;
        let a = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = DVector::from_vec(vec![3.0, 0.0, -0.5]);
        let eye = DMatrix::identity(dim, dim);
        let pool = ConsensusPool::new(vec![
            InfoState { info_vec: a.clone(), info_mat: eye.clone() },
            InfoState { info_vec: b.clone(), info_mat: eye.clone() },
        ])
        .unwrap();
        let (avg_l, avg_omega) = pool.average();
        let fused = fuse_estimate(&avg_l, &avg_omega, 2).unwrap();
        assert!((&fused.theta - (&a + &b) / 2.0).abs().max() < 1e-14);
        assert!((&fused.cov - &eye).abs().max() < 1e-14);
    }

    #[test]
    fn dropping_the_size_factor_shrinks_covariance_by_n() {
        // Identical converged agents: summing n copies of P^{-1} without the
        // size correction recovers P/n instead of P.
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let dim = 3;
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() - 0.5);
        let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.4;
        let state =
            FilterState { theta: DVector::zeros(dim), cov: cov.clone(), t_last: 0 };
        let info = state.to_info().unwrap();

        let n = 16usize;
        let sum_omega = &info.info_mat * n as f64;
        let uncorrected = sum_omega.try_inverse().unwrap();
        assert!((&uncorrected - &cov / n as f64).abs().max() < 1e-10);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn steps_are_convex_combinations(seed in 0u64..500, uniform in prop::bool::ANY) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = 6;
                let dim = 2;
                let pool = random_pool(&mut rng, n, dim);
                let pts: Vec<Vec<f64>> =
                    (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
                let g = build_graph(&positions(&pts), 0.5).unwrap();
                let scheme = if uniform { WeightScheme::Uniform } else { WeightScheme::Metropolis };
                let next = consensus_step(&pool, &g, scheme).unwrap();

                // Entrywise max may not increase, entrywise min may not
                // decrease, for every coordinate of L.
                for c in 0..dim {
                    let old_max = pool.states().iter().map(|s| s.info_vec[c]).fold(f64::MIN, f64::max);
                    let old_min = pool.states().iter().map(|s| s.info_vec[c]).fold(f64::MAX, f64::min);
                    for s in next.states() {
                        prop_assert!(s.info_vec[c] <= old_max + 1e-12);
                        prop_assert!(s.info_vec[c] >= old_min - 1e-12);
                    }
                }
            }
        }
    }
}
