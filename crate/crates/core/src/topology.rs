//! Agent placement and metric-radius neighborhoods.
//!
//! Lattice indices are row-major: the agent at row `r`, column `c` of a
//! `rows × cols` lattice has index `r * cols + c` and sits at
//! `(c * spacing, r * spacing)`.

use rand::Rng;

use crate::error::SimError;
use crate::scalar::Scalar;

/// Planar agent position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// How radii are drawn when scattering agents in a disc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiscSampling {
    /// `r = r_d * sqrt(U(0, 1))`: uniform density over the disc area.
    #[default]
    UniformArea,
    /// `r = sqrt(U(0, r_d))`: the word-for-word reading, which packs agents
    /// inside radius `sqrt(r_d)`.
    Literal,
}

/// Where the single source-connected agent sits on a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderPlacement {
    Corner,
    EdgeMidpoint,
    Center,
    Cell { row: usize, col: usize },
}

impl LeaderPlacement {
    /// Row-major lattice index of the leader.
    pub fn lattice_index(self, rows: usize, cols: usize) -> Result<usize, SimError> {
        let (row, col) = match self {
            LeaderPlacement::Corner => (0, 0),
            LeaderPlacement::EdgeMidpoint => (0, cols / 2),
            LeaderPlacement::Center => (rows / 2, cols / 2),
            LeaderPlacement::Cell { row, col } => (row, col),
        };
        if row >= rows || col >= cols {
            return Err(SimError::InvalidArgument(format!(
                "leader cell ({row}, {col}) outside {rows}x{cols} lattice"
            )));
        }
        Ok(row * cols + col)
    }
}

/// Agents, their metric neighborhoods, and the leaders wired to the source.
///
/// The information source is not a node: leaders count it as one extra
/// neighbor when the discrepancy is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology<T> {
    positions: Vec<Position<T>>,
    neighbors: Vec<Vec<usize>>,
    sensing_radius: T,
    leader_ids: Vec<usize>,
    is_leader: Vec<bool>,
}

impl<T: Scalar> NetworkTopology<T> {
    pub fn new(
        positions: Vec<Position<T>>,
        sensing_radius: T,
        leader_ids: Vec<usize>,
    ) -> Result<Self, SimError> {
        if !(sensing_radius > T::zero()) {
            return Err(SimError::InvalidArgument(
                "sensing radius must be positive".into(),
            ));
        }
        if let Some(p) = positions
            .iter()
            .find(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(SimError::InvalidArgument(format!(
                "non-finite position ({}, {})",
                p.x, p.y
            )));
        }
        let mut is_leader = vec![false; positions.len()];
        for &id in &leader_ids {
            if id >= positions.len() {
                return Err(SimError::InvalidArgument(format!(
                    "leader {id} out of range for {} agents",
                    positions.len()
                )));
            }
            is_leader[id] = true;
        }
        let neighbors = compute_neighbors(&positions, sensing_radius)?;
        let mut leader_ids = leader_ids;
        leader_ids.sort_unstable();
        leader_ids.dedup();
        Ok(Self {
            positions,
            neighbors,
            sensing_radius,
            leader_ids,
            is_leader,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Position<T>] {
        &self.positions
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn neighbor_sets(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn sensing_radius(&self) -> T {
        self.sensing_radius
    }

    pub fn leader_ids(&self) -> &[usize] {
        &self.leader_ids
    }

    pub fn is_leader(&self, i: usize) -> bool {
        self.is_leader[i]
    }

    /// Recomputes neighborhoods after agents have moved.
    pub fn update_positions(&mut self, positions: &[Position<T>]) {
        debug_assert_eq!(positions.len(), self.positions.len());
        self.positions.clear();
        self.positions.extend_from_slice(positions);
        fill_neighbors(&self.positions, self.sensing_radius, &mut self.neighbors);
    }

    /// Euclidean distance of every agent from agent `from`.
    pub fn distances_from(&self, from: usize) -> Vec<T> {
        let origin = self.positions[from];
        self.positions.iter().map(|p| p.distance(&origin)).collect()
    }
}

/// Positions of a `rows × cols` lattice, row-major.
pub fn build_lattice<T: Scalar>(
    rows: usize,
    cols: usize,
    spacing: T,
) -> Result<Vec<Position<T>>, SimError> {
    if rows == 0 || cols == 0 {
        return Err(SimError::InvalidArgument(format!(
            "lattice needs at least one row and column, got {rows}x{cols}"
        )));
    }
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(SimError::InvalidArgument(
            "lattice spacing must be positive".into(),
        ));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(Position::new(
                T::of_count(c) * spacing,
                T::of_count(r) * spacing,
            ));
        }
    }
    Ok(out)
}

/// Scatters `n` agents in a disc of radius `disc_radius` centered at the origin.
pub fn sample_disc<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    disc_radius: T,
    sampling: DiscSampling,
    rng: &mut R,
) -> Result<Vec<Position<T>>, SimError> {
    if !(disc_radius > T::zero()) || !disc_radius.is_finite() {
        return Err(SimError::InvalidArgument(
            "disc radius must be positive".into(),
        ));
    }
    Ok((0..n)
        .map(|_| sample_disc_point(disc_radius, sampling, rng))
        .collect())
}

pub(crate) fn sample_disc_point<T: Scalar, R: Rng + ?Sized>(
    disc_radius: T,
    sampling: DiscSampling,
    rng: &mut R,
) -> Position<T> {
    let u: f64 = rng.gen();
    let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let rd = disc_radius.to_f64_lossy();
    let r = match sampling {
        DiscSampling::UniformArea => rd * u.sqrt(),
        DiscSampling::Literal => (u * rd).sqrt(),
    };
    Position::new(T::of(r * theta.cos()), T::of(r * theta.sin()))
}

/// Symmetric metric neighborhoods; `0 < dist <= radius`, self excluded.
pub fn compute_neighbors<T: Scalar>(
    positions: &[Position<T>],
    radius: T,
) -> Result<Vec<Vec<usize>>, SimError> {
    if !(radius > T::zero()) {
        return Err(SimError::InvalidArgument(
            "neighbor radius must be positive".into(),
        ));
    }
    let mut out = vec![Vec::new(); positions.len()];
    fill_neighbors(positions, radius, &mut out);
    Ok(out)
}

fn fill_neighbors<T: Scalar>(positions: &[Position<T>], radius: T, out: &mut Vec<Vec<usize>>) {
    out.resize_with(positions.len(), Vec::new);
    out.iter_mut().for_each(Vec::clear);
    // squared distances: the pair test is evaluated once per unordered pair,
    // which keeps the relation symmetric bit-for-bit
    let r2 = radius * radius;
    for i in 0..positions.len() {
        let pi = positions[i];
        for j in (i + 1)..positions.len() {
            let dx = pi.x - positions[j].x;
            let dy = pi.y - positions[j].y;
            let d2 = dx * dx + dy * dy;
            if d2 > T::zero() && d2 <= r2 {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    for set in out.iter_mut() {
        set.sort_unstable();
    }
}

/// Smallest neighborhood size in the network.
pub fn min_neighbor_count<T: Scalar>(topology: &NetworkTopology<T>) -> usize {
    topology
        .neighbor_sets()
        .iter()
        .map(Vec::len)
        .min()
        .unwrap_or(0)
}

/// Index of the agent closest to `target`; ties go to the lowest index.
pub fn nearest_agent<T: Scalar>(positions: &[Position<T>], target: Position<T>) -> Option<usize> {
    positions
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.distance(&target)
                .partial_cmp(&b.1.distance(&target))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_neighbors(pos: &[Position<f64>], r: f64) -> Vec<Vec<usize>> {
        (0..pos.len())
            .map(|i| {
                (0..pos.len())
                    .filter(|&j| {
                        let d =
                            ((pos[i].x - pos[j].x).powi(2) + (pos[i].y - pos[j].y).powi(2)).sqrt();
                        d > 0.0 && d <= r
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn lattice_layout() {
        let p = build_lattice(25, 25, 1.0_f64).unwrap();
        assert_eq!(p.len(), 625);
        assert_eq!(p[0], Position::new(0.0, 0.0));
        assert_eq!(p[624], Position::new(24.0, 24.0));
        assert_eq!(p[1], Position::new(1.0, 0.0));
        assert_eq!(p[25], Position::new(0.0, 1.0));

        let p = build_lattice(15, 15, 1.0_f64).unwrap();
        assert_eq!(p.len(), 225);

        let p = build_lattice(1, 1, 5.0_f64).unwrap();
        assert_eq!(p, vec![Position::new(0.0, 0.0)]);

        let p = build_lattice(2, 3, 2.0_f64).unwrap();
        assert_eq!(p.len(), 6);
        let mut min = f64::INFINITY;
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                min = min.min(p[i].distance(&p[j]));
            }
        }
        assert_eq!(min, 2.0);
    }

    #[test]
    fn lattice_rejects_empty() {
        assert!(build_lattice(0, 3, 1.0_f64).is_err());
        assert!(build_lattice(3, 0, 1.0_f64).is_err());
        assert!(build_lattice(3, 3, 0.0_f64).is_err());
    }

    #[test]
    fn unit_lattice_census() {
        let p = build_lattice(3, 3, 1.0_f64).unwrap();
        let n = compute_neighbors(&p, 1.2).unwrap();
        assert_eq!(n, brute_neighbors(&p, 1.2));
        assert_eq!(n[4].len(), 4);
        assert_eq!(n[0].len(), 2);
        assert_eq!(n[1].len(), 3);

        for (rows, cols) in [(25, 25), (15, 15), (4, 7)] {
            let p = build_lattice(rows, cols, 1.0_f64).unwrap();
            let n = compute_neighbors(&p, 1.2).unwrap();
            let edges: usize = n.iter().map(Vec::len).sum();
            assert_eq!(edges, 2 * (2 * rows * cols - rows - cols));
        }
    }

    #[test]
    fn boundary_distance_is_included() {
        let p = vec![Position::new(0.0_f64, 0.0), Position::new(1.5, 0.0)];
        let n = compute_neighbors(&p, 1.5).unwrap();
        assert_eq!(n[0], vec![1]);
        assert_eq!(n[1], vec![0]);
    }

    #[test]
    fn small_radius_isolates_everyone() {
        let p = build_lattice(4, 4, 1.0_f64).unwrap();
        let n = compute_neighbors(&p, 0.9).unwrap();
        assert!(n.iter().all(Vec::is_empty));
    }

    #[test]
    fn min_neighbors() {
        let p = build_lattice(25, 25, 1.0_f64).unwrap();
        let t = NetworkTopology::new(p, 1.2, vec![0]).unwrap();
        assert_eq!(min_neighbor_count(&t), 2);

        let t = NetworkTopology::new(vec![Position::new(0.0_f64, 0.0)], 1.2, vec![]).unwrap();
        assert_eq!(min_neighbor_count(&t), 0);

        let tri = vec![
            Position::new(0.0_f64, 0.0),
            Position::new(1.0, 0.0),
            Position::new(0.5, 0.8),
        ];
        let t = NetworkTopology::new(tri, 100.0, vec![]).unwrap();
        assert_eq!(min_neighbor_count(&t), 2);
    }

    #[test]
    fn leader_validation() {
        let p = build_lattice(2, 2, 1.0_f64).unwrap();
        assert!(NetworkTopology::new(p.clone(), 1.2, vec![4]).is_err());
        assert!(NetworkTopology::new(p.clone(), 0.0, vec![0]).is_err());
        let t = NetworkTopology::new(p, 1.2, vec![3, 3]).unwrap();
        assert_eq!(t.leader_ids(), &[3]);
        assert!(t.is_leader(3) && !t.is_leader(0));
    }

    #[test]
    fn leader_placements() {
        assert_eq!(LeaderPlacement::Corner.lattice_index(15, 15).unwrap(), 0);
        assert_eq!(
            LeaderPlacement::EdgeMidpoint.lattice_index(15, 15).unwrap(),
            7
        );
        assert_eq!(LeaderPlacement::Center.lattice_index(15, 15).unwrap(), 112);
        assert_eq!(
            LeaderPlacement::Cell { row: 1, col: 1 }
                .lattice_index(15, 15)
                .unwrap(),
            16
        );
        assert!(LeaderPlacement::Cell { row: 15, col: 0 }
            .lattice_index(15, 15)
            .is_err());
    }

    #[test]
    fn disc_sampling_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<Position<f64>> =
            sample_disc(0, 1.0, DiscSampling::UniformArea, &mut rng).unwrap();
        assert!(p.is_empty());

        let rd: f64 = 25.0 / 3.0;
        let p = sample_disc(225, rd, DiscSampling::UniformArea, &mut rng).unwrap();
        assert_eq!(p.len(), 225);
        assert!(p.iter().all(|q| q.x.hypot(q.y) <= rd));

        let p = sample_disc(225, rd, DiscSampling::Literal, &mut rng).unwrap();
        assert!(p.iter().all(|q| q.x.hypot(q.y) <= rd.sqrt() + 1e-12));
    }

    #[test]
    fn disc_uniform_area_statistics() {
        // E[r] = 2 r_d / 3 and P(r <= r_d / sqrt 2) = 1/2 for uniform area density
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<Position<f64>> =
            sample_disc(10_000, 1.0, DiscSampling::UniformArea, &mut rng).unwrap();
        let mean = p.iter().map(|q| q.x.hypot(q.y)).sum::<f64>() / p.len() as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01, "mean radius {mean}");

        let p: Vec<Position<f64>> =
            sample_disc(100_000, 2.0, DiscSampling::UniformArea, &mut rng).unwrap();
        let inner = p
            .iter()
            .filter(|q| q.x.hypot(q.y) <= 2.0 / 2.0_f64.sqrt())
            .count() as f64
            / p.len() as f64;
        assert!((inner - 0.5).abs() < 0.01, "inner fraction {inner}");
    }

    #[test]
    fn nearest_agent_picks_closest() {
        let p = build_lattice(3, 3, 1.0_f64).unwrap();
        assert_eq!(nearest_agent(&p, Position::new(1.9, 0.1)), Some(2));
        assert_eq!(nearest_agent::<f64>(&[], Position::new(0.0, 0.0)), None);
    }

    #[test]
    fn update_positions_recomputes() {
        let p = vec![Position::new(0.0_f64, 0.0), Position::new(1.0, 0.0)];
        let mut t = NetworkTopology::new(p, 1.2, vec![0]).unwrap();
        assert_eq!(t.neighbors(0), &[1]);
        t.update_positions(&[Position::new(0.0, 0.0), Position::new(2.0, 0.0)]);
        assert!(t.neighbors(0).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn neighbor_relation_matches_definition(
                pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..40),
                r in 0.1f64..3.0,
            ) {
                let pos: Vec<_> = pts.iter().map(|&(x, y)| Position::new(x, y)).collect();
                let n = compute_neighbors(&pos, r).unwrap();
                for i in 0..pos.len() {
                    for &j in &n[i] {
                        prop_assert!(n[j].contains(&i));
                        prop_assert!(j != i);
                    }
                }
                let brute = brute_neighbors(&pos, r);
                // hypot vs squared comparison can disagree only within rounding of r
                for i in 0..pos.len() {
                    for j in 0..pos.len() {
                        let d = pos[i].distance(&pos[j]);
                        if (d - r).abs() > 1e-9 {
                            prop_assert_eq!(n[i].contains(&j), brute[i].contains(&j));
                        }
                    }
                }
            }
        }
    }
}
