//! Endpoint-conditioned Markov bridge kernels, generic over the scalar type.
//!
//! A discrete-state chain pinned at both endpoints is evaluated with
//! forward-backward walk masses: the conditional law of each step given the
//! endpoint, the probability of hitting a forbidden state set anywhere on
//! the pinned trajectory, and exact brute-force enumeration as the oracle
//! counterpart of the dynamic program.

use rand::Rng;
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum BridgeError {
    #[error("transition matrix is not square: row {row} has {len} entries for {n} states")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("transition row {row} sums to {sum}, not 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("transition entry [{row}][{col}] = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("endpoint {to} unreachable from {from} in {steps} steps")]
    UnreachableEndpoint { from: usize, to: usize, steps: usize },
    #[error("{states}^{inner} intermediate trajectories exceed the enumeration limit")]
    TooLarge { states: usize, inner: usize },
    #[error("need at least 2 trajectory steps, got {0}")]
    TooShort(usize),
    #[error("anchor positions must start at 1, be strictly increasing, and end at the last step")]
    BadAnchors,
}

/// Row-stochastic transition matrix over a finite state set.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<R: Real> {
    rows: Vec<Vec<R>>,
}

impl<R: Real> TransitionMatrix<R> {
    pub fn new(rows: Vec<Vec<R>>) -> Result<Self, BridgeError> {
        let n = rows.len();
        let tol = R::from_f64(1e-9).unwrap().max(R::epsilon() * R::from_usize(64 * n).unwrap());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(BridgeError::NotSquare { row: i, len: row.len(), n });
            }
            for (j, &v) in row.iter().enumerate() {
                if v < R::zero() {
                    return Err(BridgeError::NegativeEntry {
                        row: i,
                        col: j,
                        value: v.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            let sum: R = row.iter().copied().sum();
            if (sum - R::one()).abs() > tol {
                return Err(BridgeError::RowNotStochastic {
                    row: i,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, from: usize, to: usize) -> R {
        self.rows[from][to]
    }

    /// Copy with all transitions into masked states zeroed. The result is
    /// substochastic; its walk masses measure mask-avoiding paths.
    fn masked_rows(&self, forbidden: &[bool]) -> Vec<Vec<R>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| if forbidden[j] { R::zero() } else { v })
                    .collect()
            })
            .collect()
    }

    /// Mass of all `steps`-step walks from `from` to `to`.
    pub fn walk_mass(&self, from: usize, to: usize, steps: usize) -> R {
        walk_mass(&self.rows, from, to, steps)
    }
}

fn walk_mass<R: Real>(rows: &[Vec<R>], from: usize, to: usize, steps: usize) -> R {
    let n = rows.len();
    let mut v = vec![R::zero(); n];
    v[from] = R::one();
    for _ in 0..steps {
        let mut next = vec![R::zero(); n];
        for (i, &mass) in v.iter().enumerate() {
            if mass > R::zero() {
                for (j, item) in next.iter_mut().enumerate() {
                    *item = *item + mass * rows[i][j];
                }
            }
        }
        v = next;
    }
    v[to]
}

/// Backward masses β_t(z) = mass of reaching `end` from z in `T - t` steps,
/// for t = 1..=T. Index 0 of the result is t=1.
fn backward_masses<R: Real>(matrix: &TransitionMatrix<R>, end: usize, total_steps: usize) -> Vec<Vec<R>> {
    let n = matrix.n();
    let mut beta = vec![vec![R::zero(); n]; total_steps];
    for z in 0..n {
        beta[total_steps - 1][z] = if z == end { R::one() } else { R::zero() };
    }
    for t in (0..total_steps - 1).rev() {
        for z in 0..n {
            let mut acc = R::zero();
            for z2 in 0..n {
                acc = acc + matrix.entry(z, z2) * beta[t + 1][z2];
            }
            beta[t][z] = acc;
        }
    }
    beta
}

/// Conditional law of a chain pinned at both endpoints, represented as
/// per-step conditional tables `table[t][z][z'] = P(z_{t+1} = z' | z_t = z,
/// endpoints)`. Rows for states unreachable at step t are all zero.
#[derive(Debug, Clone)]
pub struct BridgeDistribution<R: Real> {
    pub start: usize,
    pub end: usize,
    /// Total trajectory length T (endpoints included).
    pub total_steps: usize,
    tables: Vec<Vec<Vec<R>>>,
}

impl<R: Real> BridgeDistribution<R> {
    /// Per-step table for the transition out of step `t` (1-based, t < T).
    pub fn step_table(&self, t: usize) -> &[Vec<R>] {
        &self.tables[t - 1]
    }

    pub fn intermediate_steps(&self) -> usize {
        self.total_steps - 2
    }

    /// Probability of one full trajectory (endpoints included).
    pub fn trajectory_probability(&self, trajectory: &[usize]) -> R {
        assert_eq!(trajectory.len(), self.total_steps);
        if trajectory[0] != self.start || trajectory[self.total_steps - 1] != self.end {
            return R::zero();
        }
        let mut p = R::one();
        for t in 0..self.total_steps - 1 {
            p = p * self.tables[t][trajectory[t]][trajectory[t + 1]];
        }
        p
    }

    /// Total mass over all trajectories, by exhaustive enumeration. Intended
    /// for small fixture worlds in tests.
    pub fn enumerated_mass(&self, n_states: usize) -> R {
        let inner = self.total_steps - 2;
        let mut idx = vec![0usize; inner];
        let mut total = R::zero();
        loop {
            let mut traj = Vec::with_capacity(self.total_steps);
            traj.push(self.start);
            traj.extend_from_slice(&idx);
            traj.push(self.end);
            total = total + self.trajectory_probability(&traj);
            // odometer increment
            let mut k = 0;
            loop {
                if k == inner {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < n_states {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Samples one trajectory (length T, endpoints included).
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<usize> {
        let mut traj = Vec::with_capacity(self.total_steps);
        traj.push(self.start);
        let mut z = self.start;
        for t in 0..self.total_steps - 1 {
            let row = &self.tables[t][z];
            z = sample_row(row, rng);
            traj.push(z);
        }
        debug_assert_eq!(traj[self.total_steps - 1], self.end);
        traj
    }
}

fn sample_row<R: Real, G: Rng + ?Sized>(row: &[R], rng: &mut G) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (j, &p) in row.iter().enumerate() {
        let p = p.to_f64().unwrap_or(0.0);
        if p > 0.0 {
            last_nonzero = j;
        }
        acc += p;
        if u < acc {
            return j;
        }
    }
    // numerical slack: fall back to the last state with mass
    last_nonzero
}

/// Builds the endpoint-conditioned bridge law for a trajectory of
/// `total_steps` states pinned at `start` and `end`.
pub fn bridge_distribution<R: Real>(
    matrix: &TransitionMatrix<R>,
    start: usize,
    end: usize,
    total_steps: usize,
) -> Result<BridgeDistribution<R>, BridgeError> {
    if total_steps < 2 {
        return Err(BridgeError::TooShort(total_steps));
    }
    let beta = backward_masses(matrix, end, total_steps);
    if beta[0][start] <= R::zero() {
        return Err(BridgeError::UnreachableEndpoint { from: start, to: end, steps: total_steps - 1 });
    }
    let n = matrix.n();
    let mut tables = Vec::with_capacity(total_steps - 1);
    for t in 0..total_steps - 1 {
        let mut table = vec![vec![R::zero(); n]; n];
        for (z, table_row) in table.iter_mut().enumerate() {
            let denom = beta[t][z];
            if denom > R::zero() {
                for (z2, cell) in table_row.iter_mut().enumerate() {
                    *cell = matrix.entry(z, z2) * beta[t + 1][z2] / denom;
                }
            }
        }
        tables.push(table);
    }
    Ok(BridgeDistribution { start, end, total_steps, tables })
}

/// Probability that the pinned trajectory visits a forbidden state at any
/// step 1..=T (endpoints included), computed as `1 - avoiding/pinned` mass.
pub fn unsafe_probability<R: Real>(
    matrix: &TransitionMatrix<R>,
    forbidden: &[bool],
    start: usize,
    end: usize,
    total_steps: usize,
) -> Result<R, BridgeError> {
    if total_steps < 2 {
        return Err(BridgeError::TooShort(total_steps));
    }
    if forbidden[start] || forbidden[end] {
        // still require the pinning itself to be feasible
        if matrix.walk_mass(start, end, total_steps - 1) <= R::zero() {
            return Err(BridgeError::UnreachableEndpoint { from: start, to: end, steps: total_steps - 1 });
        }
        return Ok(R::one());
    }
    let pinned = matrix.walk_mass(start, end, total_steps - 1);
    if pinned <= R::zero() {
        return Err(BridgeError::UnreachableEndpoint { from: start, to: end, steps: total_steps - 1 });
    }
    let avoiding = walk_mass(&matrix.masked_rows(forbidden), start, end, total_steps - 1);
    let ratio = avoiding / pinned;
    debug_assert!(
        ratio >= -R::from_f64(1e-12).unwrap() && ratio <= R::one() + R::from_f64(1e-12).unwrap(),
        "mass ratio outside [0, 1]"
    );
    Ok((R::one() - ratio).max(R::zero()).min(R::one()))
}

/// Exhaustive-enumeration counterpart of [`unsafe_probability`]; the
/// reference value for oracle tests. Refuses more than 10^6 intermediate
/// trajectories.
pub fn brute_force_unsafe_probability<R: Real>(
    matrix: &TransitionMatrix<R>,
    forbidden: &[bool],
    start: usize,
    end: usize,
    total_steps: usize,
) -> Result<R, BridgeError> {
    if total_steps < 2 {
        return Err(BridgeError::TooShort(total_steps));
    }
    let n = matrix.n();
    let inner = total_steps - 2;
    if (n as f64).powi(inner as i32) > 1e6 {
        return Err(BridgeError::TooLarge { states: n, inner });
    }
    let mut pinned = R::zero();
    let mut hitting = R::zero();
    let mut idx = vec![0usize; inner];
    loop {
        let mut w = R::one();
        let mut hit = forbidden[start] || forbidden[end];
        let mut prev = start;
        for &z in &idx {
            w = w * matrix.entry(prev, z);
            hit = hit || forbidden[z];
            prev = z;
        }
        w = w * matrix.entry(prev, end);
        pinned = pinned + w;
        if hit {
            hitting = hitting + w;
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == inner {
                if pinned <= R::zero() {
                    return Err(BridgeError::UnreachableEndpoint {
                        from: start,
                        to: end,
                        steps: total_steps - 1,
                    });
                }
                return Ok(hitting / pinned);
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Trajectory anchors: 1-based position and pinned state.
pub type Anchor = (usize, usize);

fn validate_anchors(anchors: &[Anchor], total_steps: usize) -> Result<(), BridgeError> {
    if total_steps < 2 {
        return Err(BridgeError::TooShort(total_steps));
    }
    if anchors.len() < 2
        || anchors[0].0 != 1
        || anchors[anchors.len() - 1].0 != total_steps
        || anchors.windows(2).any(|w| w[0].0 >= w[1].0)
    {
        return Err(BridgeError::BadAnchors);
    }
    Ok(())
}

/// Hit probability for a trajectory pinned at several anchors: segments
/// between consecutive anchors are independent bridges.
pub fn anchored_unsafe_probability<R: Real>(
    matrix: &TransitionMatrix<R>,
    forbidden: &[bool],
    anchors: &[Anchor],
    total_steps: usize,
) -> Result<R, BridgeError> {
    validate_anchors(anchors, total_steps)?;
    if anchors.iter().any(|&(_, s)| forbidden[s]) {
        for w in anchors.windows(2) {
            let steps = w[1].0 - w[0].0;
            if matrix.walk_mass(w[0].1, w[1].1, steps) <= R::zero() {
                return Err(BridgeError::UnreachableEndpoint { from: w[0].1, to: w[1].1, steps });
            }
        }
        return Ok(R::one());
    }
    let masked = matrix.masked_rows(forbidden);
    let mut avoid = R::one();
    for w in anchors.windows(2) {
        let steps = w[1].0 - w[0].0;
        let pinned = matrix.walk_mass(w[0].1, w[1].1, steps);
        if pinned <= R::zero() {
            return Err(BridgeError::UnreachableEndpoint { from: w[0].1, to: w[1].1, steps });
        }
        avoid = avoid * (walk_mass(&masked, w[0].1, w[1].1, steps) / pinned);
    }
    Ok((R::one() - avoid).max(R::zero()).min(R::one()))
}

/// Samples a trajectory pinned at several anchors by sampling each segment
/// bridge in order.
pub fn sample_anchored_trajectory<R: Real, G: Rng + ?Sized>(
    matrix: &TransitionMatrix<R>,
    anchors: &[Anchor],
    total_steps: usize,
    rng: &mut G,
) -> Result<Vec<usize>, BridgeError> {
    validate_anchors(anchors, total_steps)?;
    let mut trajectory = Vec::with_capacity(total_steps);
    for w in anchors.windows(2) {
        let steps = w[1].0 - w[0].0;
        let bridge = bridge_distribution(matrix, w[0].1, w[1].1, steps + 1)?;
        let segment = bridge.sample(rng);
        let skip = usize::from(!trajectory.is_empty());
        trajectory.extend_from_slice(&segment[skip..]);
    }
    debug_assert_eq!(trajectory.len(), total_steps);
    Ok(trajectory)
}
