//! Closed Euclidean balls on a grid: the move set of the game.

use crate::grid::Grid;

const MEMBERSHIP_SLACK: f64 = 1e-12;

/// For every node, the nodes y with |y − x| ≤ r, the node itself included,
/// listed in increasing index order.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    radius: f64,
    lists: Vec<Vec<usize>>,
}

impl NeighborTable {
    pub fn build(grid: &Grid, r: f64) -> Self {
        if r < grid.h() {
            log::warn!(
                "ball radius {r} is below the grid spacing {}; balls contain only their centers",
                grid.h()
            );
        }
        let reach = ((r + MEMBERSHIP_SLACK) / grid.h()).floor().max(0.0) as isize;
        let reach_y = if grid.dim() == 2 { reach } else { 0 };
        let limit = r + MEMBERSHIP_SLACK;
        // Offsets in (dj, di) lexicographic order so that the per-node lists
        // come out sorted by flat index.
        let mut offsets = Vec::new();
        for dj in -reach_y..=reach_y {
            for di in -reach..=reach {
                let d = (di as f64 * grid.h()).hypot(dj as f64 * grid.h());
                if d <= limit {
                    offsets.push((di, dj));
                }
            }
        }
        let counts = [grid.counts()[0] as isize, *grid.counts().get(1).unwrap_or(&1) as isize];
        let lists = (0..grid.len())
            .map(|node| {
                let [i, j] = grid.multi_index(node);
                offsets
                    .iter()
                    .filter_map(|&(di, dj)| {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        (a >= 0 && a < counts[0] && b >= 0 && b < counts[1])
                            .then(|| grid.flat_index([a as usize, b as usize]))
                    })
                    .collect()
            })
            .collect();
        Self { radius: r, lists }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn ball(&self, node: usize) -> &[usize] {
        &self.lists[node]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords_of(grid: &Grid, nodes: &[usize]) -> Vec<[f64; 2]> {
        nodes.iter().map(|&n| grid.coords(n)).collect()
    }

    #[test]
    fn line_half_spacing() {
        let g = Grid::new(&[0.0], &[1.0], 0.5).unwrap();
        let t = NeighborTable::build(&g, 0.5);
        assert_eq!(t.ball(1), [0, 1, 2]);
    }

    #[test]
    fn square_excludes_diagonals() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap();
        let t = NeighborTable::build(&g, 0.5);
        let center = g.nearest(&[0.5, 0.5]).unwrap();
        let pts = coords_of(&g, t.ball(center));
        assert_eq!(
            pts,
            [[0.5, 0.0], [0.0, 0.5], [0.5, 0.5], [1.0, 0.5], [0.5, 1.0]]
        );
    }

    #[test]
    fn fine_line_radius_quarter() {
        let g = Grid::new(&[0.0], &[1.0], 0.1).unwrap();
        let t = NeighborTable::build(&g, 0.25);
        let c = g.nearest(&[0.5]).unwrap();
        let xs: Vec<f64> = t.ball(c).iter().map(|&n| g.coords(n)[0]).collect();
        let want = [0.3, 0.4, 0.5, 0.6, 0.7];
        assert_eq!(xs.len(), want.len());
        for (a, b) in xs.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn balls_clip_at_the_box() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let t = NeighborTable::build(&g, 0.25);
        assert_eq!(t.ball(0), [0, 1, 5]);
    }

    #[test]
    fn symmetric_and_self_inclusive() {
        for (g, r) in [
            (Grid::new(&[0.0], &[1.0], 0.05).unwrap(), 0.125),
            (Grid::new(&[0.0, 0.0], &[1.0, 0.5], 0.1).unwrap(), 0.2),
            (Grid::new(&[0.0, 0.0], &[0.6, 0.6], 0.1).unwrap(), 0.1 * 2f64.sqrt()),
        ] {
            let t = NeighborTable::build(&g, r);
            for x in 0..g.len() {
                assert!(t.ball(x).contains(&x));
                assert!(t.ball(x).windows(2).all(|w| w[0] < w[1]));
                for y in 0..g.len() {
                    let inside = g.distance(x, y) <= r + 1e-12;
                    assert_eq!(t.ball(x).contains(&y), inside, "x={x} y={y}");
                    assert_eq!(t.ball(x).contains(&y), t.ball(y).contains(&x));
                }
            }
        }
    }
}
