//! Box-covering dimension by greedy colouring.
//!
//! A box of size `l` is a node set whose pairwise hop distances are all
//! below `l`. Covering with the fewest boxes is colouring the auxiliary
//! graph that joins nodes at distance `>= l`; nodes are coloured greedily in
//! a fixed order, one component at a time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::graph::Graph;
use crate::inference::least_squares;

/// Largest default box size.
pub const DEFAULT_MAX_BOX: usize = 12;

/// Box id per node for a greedy cover in ascending index order.
pub fn box_assignment(g: &Graph, l_b: usize) -> Result<Vec<usize>> {
    let order: Vec<usize> = (0..g.num_nodes()).collect();
    box_assignment_ordered(g, l_b, &order)
}

/// Greedy cover visiting nodes in `order` (a permutation of `0..N`).
pub fn box_assignment_ordered(g: &Graph, l_b: usize, order: &[usize]) -> Result<Vec<usize>> {
    if l_b == 0 {
        return Err(FgnError::InvalidParameter("box size must be >= 1".into()));
    }
    let n = g.num_nodes();
    if order.len() != n {
        return Err(FgnError::InvalidParameter("order must list every node once".into()));
    }
    let mut boxes = vec![usize::MAX; n];
    if l_b == 1 {
        for (b, &v) in order.iter().enumerate() {
            boxes[v] = b;
        }
        return Ok(boxes);
    }
    let radius = (l_b - 1) as u32;
    let (comp, _) = g.components();

    // per component: colour -> global box id, and member count per colour
    let mut comp_boxes: Vec<Vec<usize>> = vec![Vec::new(); comp.iter().copied().max().map_or(0, |c| c + 1)];
    let mut box_size: Vec<usize> = Vec::new();

    let mut dist = vec![u32::MAX; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut seen_in_ball: Vec<usize> = Vec::new();
    let mut ball_count: Vec<usize> = Vec::new();

    for &v in order {
        // depth-limited BFS from v
        touched.clear();
        dist[v] = 0;
        touched.push(v);
        let mut head = 0;
        while head < touched.len() {
            let u = touched[head];
            head += 1;
            if dist[u] == radius {
                continue;
            }
            for &w in g.neighbors(u) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    touched.push(w);
                }
            }
        }
        // a box may take v iff all its members already lie in the ball
        seen_in_ball.clear();
        for &u in &touched {
            let b = boxes[u];
            if b != usize::MAX {
                if ball_count.len() <= b {
                    ball_count.resize(b + 1, 0);
                }
                if ball_count[b] == 0 {
                    seen_in_ball.push(b);
                }
                ball_count[b] += 1;
            }
        }
        let own = &mut comp_boxes[comp[v]];
        let chosen = own
            .iter()
            .copied()
            .find(|&b| b < ball_count.len() && ball_count[b] == box_size[b]);
        let b = match chosen {
            Some(b) => b,
            None => {
                box_size.push(0);
                own.push(box_size.len() - 1);
                box_size.len() - 1
            }
        };
        boxes[v] = b;
        box_size[b] += 1;
        for &bb in &seen_in_ball {
            ball_count[bb] = 0;
        }
        for &u in &touched {
            dist[u] = u32::MAX;
        }
    }
    Ok(boxes)
}

/// Number of boxes used by the greedy cover.
pub fn box_cover(g: &Graph, l_b: usize) -> Result<usize> {
    Ok(count_boxes(&box_assignment(g, l_b)?))
}

fn count_boxes(assignment: &[usize]) -> usize {
    assignment.iter().copied().max().map_or(0, |b| b + 1)
}

/// Mean box count over `trials` random visiting orders.
pub fn box_cover_randomized(g: &Graph, l_b: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(FgnError::InvalidParameter("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..g.num_nodes()).collect();
    let mut total = 0usize;
    for _ in 0..trials {
        order.shuffle(&mut rng);
        total += count_boxes(&box_assignment_ordered(g, l_b, &order)?);
    }
    Ok(total as f64 / trials as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCoverResult {
    pub l_values: Vec<usize>,
    pub n_boxes: Vec<usize>,
    pub d_b: f64,
    pub fit_range: (usize, usize),
    /// Sum of squared residuals of the log-log fit.
    pub residual: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
}

/// Box sizes `2..=min(diameter, 12)`.
pub fn default_box_sizes(g: &Graph) -> Vec<usize> {
    let top = (g.diameter() as usize).min(DEFAULT_MAX_BOX);
    (2..=top).collect()
}

/// Fits `ln N_B = -d_B ln l_B + c`. Fewer than three sizes or a flat
/// `N_B` curve yields a degenerate result with `d_B = 0`.
pub fn fractal_dimension(g: &Graph, l_values: Option<&[usize]>) -> Result<BoxCoverResult> {
    let mut ls = match l_values {
        Some(v) => v.to_vec(),
        None => default_box_sizes(g),
    };
    ls.sort_unstable();
    ls.dedup();
    if ls.first() == Some(&0) {
        return Err(FgnError::InvalidParameter("box sizes must be >= 1".into()));
    }
    let n_boxes = ls.iter().map(|&l| box_cover(g, l)).collect::<Result<Vec<_>>>()?;
    let fit_range = (ls.first().copied().unwrap_or(0), ls.last().copied().unwrap_or(0));

    let flat = n_boxes.windows(2).all(|w| w[0] == w[1]);
    if ls.len() < 3 || flat {
        let why = if ls.len() < 3 {
            format!("only {} box sizes available; need at least 3", ls.len())
        } else {
            "box counts do not vary over the range".to_string()
        };
        log::warn!("degenerate box-covering fit: {why}");
        return Ok(BoxCoverResult {
            l_values: ls,
            n_boxes,
            d_b: 0.0,
            fit_range,
            residual: 0.0,
            degenerate: true,
            warning: Some(why),
        });
    }
    let xs: Vec<f64> = ls.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = n_boxes.iter().map(|&c| (c as f64).ln()).collect();
    let fit = least_squares(&xs, &ys)?;
    Ok(BoxCoverResult {
        l_values: ls,
        n_boxes,
        d_b: -fit.slope,
        fit_range,
        residual: fit.ssr,
        degenerate: false,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> Graph {
        Graph::from_edges(n as usize, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn star(leaves: u32) -> Graph {
        Graph::from_edges(leaves as usize + 1, (1..=leaves).map(|l| (0, l))).unwrap()
    }

    #[test]
    fn path3_examples() {
        let g = path(3);
        assert_eq!(box_cover(&g, 1).unwrap(), 3);
        assert_eq!(box_cover(&g, 2).unwrap(), 2);
        assert_eq!(box_cover(&g, 3).unwrap(), 1);
        assert!(box_cover(&g, 0).is_err());
    }

    #[test]
    fn components_are_covered_separately() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        for l in 2..6 {
            assert_eq!(box_cover(&g, l).unwrap(), 2);
        }
        assert_eq!(box_cover(&Graph::empty(4), 5).unwrap(), 4);
    }

    #[test]
    fn star_range_is_degenerate() {
        let r = fractal_dimension(&star(6), None).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.d_b, 0.0);
        assert!(r.warning.is_some());
        let r = fractal_dimension(&star(6), Some(&[1, 2])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.n_boxes, vec![7, 6]);
    }

    #[test]
    fn path_dimension_near_one() {
        let r = fractal_dimension(&path(64), Some(&[2, 4, 8, 16])).unwrap();
        assert!(!r.degenerate);
        assert!((r.d_b - 1.0).abs() < 0.25, "{}", r.d_b);
        assert_eq!(r.fit_range, (2, 16));
    }

    #[test]
    fn randomized_orders() {
        let g = path(10);
        let m = box_cover_randomized(&g, 3, 20, 1).unwrap();
        assert!((4.0..=7.0).contains(&m), "{m}");
    }
}
