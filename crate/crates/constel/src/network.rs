//! Time-varying undirected communication graph: random frame generation and
//! verification of the windowed joint-connectivity condition.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::FileMeta;

/// Symmetric zero-diagonal 0/1 adjacency matrix.
pub type Adjacency = Vec<Vec<u8>>;

/// A sequence of adjacency frames indexed by iteration, plus the window
/// length `delta` over which edge unions must be connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTimeline {
    pub n: usize,
    pub delta: usize,
    pub frames: Vec<Adjacency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<FileMeta>,
}

/// One random adjacency frame: three independent 0/1 roundings of uniform
/// noise are summed, the matrix is symmetrized from its upper triangle,
/// entries above 0.2 clamp to one, and the diagonal is cleared.
pub fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> Adjacency {
    let mut acc = vec![vec![0.0f64; n]; n];
    for _ in 0..3 {
        for row in acc.iter_mut() {
            for v in row.iter_mut() {
                *v += rng.random::<f64>().round();
            }
        }
    }
    // triu(N) + triu(N, 1)': mirror the strict upper triangle.
    let mut sym = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            sym[i][j] = acc[i][j];
            if j > i {
                sym[j][i] = acc[i][j];
            }
        }
    }
    let mut out = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && sym[i][j] > 0.2 {
                out[i][j] = 1;
            }
        }
    }
    out
}

/// Convenience wrapper seeding its own generator.
pub fn random_frame_seeded(seed: u64, n: usize) -> Adjacency {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_frame(&mut rng, n)
}

/// Union of frames `[start, start+len)` is connected on all n nodes.
fn window_connected(frames: &[Adjacency], n: usize, start: usize, len: usize) -> bool {
    let mut union = vec![vec![false; n]; n];
    for frame in &frames[start..start + len] {
        for i in 0..n {
            for j in 0..n {
                if frame[i][j] != 0 {
                    union[i][j] = true;
                }
            }
        }
    }
    // DFS from node 0.
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if union[u][v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&b| b)
}

/// Outcome of the joint-connectivity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Ok,
    FirstBadWindow(usize),
}

impl GraphTimeline {
    pub fn frame(&self, t: usize) -> &Adjacency {
        &self.frames[t]
    }

    /// Neighbours of agent i at iteration t.
    pub fn neighbours(&self, i: usize, t: usize) -> Result<Vec<usize>> {
        if t >= self.frames.len() || i >= self.n {
            return Err(Error::Input(format!(
                "neighbour query out of range: agent {i}, t {t}"
            )));
        }
        Ok((0..self.n)
            .filter(|&j| j != i && self.frames[t][i][j] != 0)
            .collect())
    }

    /// Verify every frame is symmetric, zero-diagonal, and 0/1.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "must be >= 1"));
        }
        if self.delta == 0 {
            return Err(Error::validation("delta", "must be >= 1"));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != self.n || frame.iter().any(|row| row.len() != self.n) {
                return Err(Error::validation(
                    format!("frames[{t}]"),
                    format!("expected {0}x{0} matrix", self.n),
                ));
            }
            for i in 0..self.n {
                if frame[i][i] != 0 {
                    return Err(Error::validation(format!("frames[{t}]"), "nonzero diagonal"));
                }
                for j in 0..self.n {
                    if frame[i][j] > 1 || frame[i][j] != frame[j][i] {
                        return Err(Error::validation(
                            format!("frames[{t}]"),
                            "matrix must be symmetric 0/1",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Check the delta-window joint-connectivity condition for every window
/// start `T <= horizon`. Requires frames covering `[0, horizon + delta)`.
pub fn check_joint_connectivity(tl: &GraphTimeline, horizon: usize) -> Result<Connectivity> {
    if tl.frames.len() < horizon + tl.delta {
        return Err(Error::Input(format!(
            "timeline holds {} frames, window scan needs {}",
            tl.frames.len(),
            horizon + tl.delta
        )));
    }
    for start in 0..=horizon {
        if !window_connected(&tl.frames, tl.n, start, tl.delta) {
            return Ok(Connectivity::FirstBadWindow(start));
        }
    }
    Ok(Connectivity::Ok)
}

/// Attempts before giving up on drawing a jointly connected timeline.
const TIMELINE_RETRIES: usize = 64;

/// Generate `frames` random frames and resample until the whole timeline is
/// jointly connected over every delta-window it can host.
pub fn generate_timeline(seed: u64, n: usize, frames: usize, delta: usize) -> Result<GraphTimeline> {
    if n == 0 || delta == 0 || frames < delta {
        return Err(Error::Config(
            "need n >= 1, delta >= 1 and at least delta frames".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..TIMELINE_RETRIES {
        let tl = GraphTimeline {
            n,
            delta,
            frames: (0..frames).map(|_| random_frame(&mut rng, n)).collect(),
            meta: None,
        };
        let horizon = frames - delta;
        if check_joint_connectivity(&tl, horizon)? == Connectivity::Ok {
            return Ok(tl);
        }
    }
    Err(Error::Config(format!(
        "could not draw a jointly connected timeline for n={n}, delta={delta} in {TIMELINE_RETRIES} attempts"
    )))
}

pub fn load_timeline(path: impl AsRef<Path>) -> Result<GraphTimeline> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let tl: GraphTimeline = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    tl.validate()?;
    Ok(tl)
}

pub fn save_timeline(tl: &GraphTimeline, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string(tl)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn complete(n: usize) -> Adjacency {
        (0..n)
            .map(|i| (0..n).map(|j| u8::from(i != j)).collect())
            .collect()
    }

    fn edge(n: usize, a: usize, b: usize) -> Adjacency {
        let mut m = vec![vec![0u8; n]; n];
        m[a][b] = 1;
        m[b][a] = 1;
        m
    }

    #[test]
    fn frames_are_symmetric_zero_diagonal_binary() {
        for seed in 0..200u64 {
            let n = 1 + (seed as usize % 7);
            let frame = random_frame_seeded(seed, n);
            for i in 0..n {
                assert_eq!(frame[i][i], 0);
                for j in 0..n {
                    assert!(frame[i][j] <= 1);
                    assert_eq!(frame[i][j], frame[j][i]);
                }
            }
        }
    }

    #[test]
    fn single_node_frame_is_zero() {
        assert_eq!(random_frame_seeded(3, 1), vec![vec![0u8]]);
    }

    #[test]
    fn threshold_means_any_positive_sum_connects() {
        // With three summed roundings entries are integers 0..3, so the 0.2
        // threshold fires exactly on nonzero off-diagonal sums. Empirically a
        // complete-graph-heavy sample should contain both values.
        let mut ones = 0usize;
        let mut zeros = 0usize;
        for seed in 0..100u64 {
            let f = random_frame_seeded(seed, 4);
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        if f[i][j] == 1 {
                            ones += 1;
                        } else {
                            zeros += 1;
                        }
                    }
                }
            }
        }
        assert!(ones > 0 && zeros > 0);
    }

    #[test]
    fn static_complete_graph_is_jointly_connected() {
        let tl = GraphTimeline {
            n: 4,
            delta: 1,
            frames: vec![complete(4); 10],
            meta: None,
        };
        assert_eq!(check_joint_connectivity(&tl, 9).unwrap(), Connectivity::Ok);
    }

    #[test]
    fn alternating_edges_need_delta_two() {
        // Frames alternate {1-2} and {2-3} on a 3-node line.
        let frames: Vec<Adjacency> = (0..8)
            .map(|t| if t % 2 == 0 { edge(3, 0, 1) } else { edge(3, 1, 2) })
            .collect();
        let tl2 = GraphTimeline {
            n: 3,
            delta: 2,
            frames: frames.clone(),
            meta: None,
        };
        assert_eq!(check_joint_connectivity(&tl2, 6).unwrap(), Connectivity::Ok);
        let tl1 = GraphTimeline {
            n: 3,
            delta: 1,
            frames,
            meta: None,
        };
        assert_eq!(
            check_joint_connectivity(&tl1, 6).unwrap(),
            Connectivity::FirstBadWindow(0)
        );
    }

    #[test]
    fn empty_frames_fail_immediately() {
        let tl = GraphTimeline {
            n: 3,
            delta: 2,
            frames: vec![vec![vec![0u8; 3]; 3]; 5],
            meta: None,
        };
        assert_eq!(
            check_joint_connectivity(&tl, 3).unwrap(),
            Connectivity::FirstBadWindow(0)
        );
    }

    #[test]
    fn neighbours_match_frames() {
        let tl = GraphTimeline {
            n: 3,
            delta: 1,
            frames: vec![complete(3), vec![vec![0u8; 3]; 3]],
            meta: None,
        };
        assert_eq!(tl.neighbours(0, 0).unwrap(), vec![1, 2]);
        assert_eq!(tl.neighbours(0, 1).unwrap(), Vec::<usize>::new());
        assert!(tl.neighbours(0, 5).is_err());
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let ni = tl.neighbours(i, 0).unwrap().contains(&j);
                    let nj = tl.neighbours(j, 0).unwrap().contains(&i);
                    assert_eq!(ni, nj);
                }
            }
        }
    }

    #[test]
    fn generated_timelines_are_jointly_connected() {
        for seed in 0..10u64 {
            let tl = generate_timeline(seed, 5, 30, 3).unwrap();
            tl.validate().unwrap();
            assert_eq!(check_joint_connectivity(&tl, 27).unwrap(), Connectivity::Ok);
        }
    }

    /// Brute-force reference: union edges then DFS, per window.
    fn brute_union_dfs(tl: &GraphTimeline, horizon: usize) -> Connectivity {
        for start in 0..=horizon {
            let mut adj = vec![vec![false; tl.n]; tl.n];
            for f in &tl.frames[start..start + tl.delta] {
                for i in 0..tl.n {
                    for j in 0..tl.n {
                        if f[i][j] == 1 {
                            adj[i][j] = true;
                        }
                    }
                }
            }
            let mut seen = vec![false; tl.n];
            fn dfs(u: usize, adj: &[Vec<bool>], seen: &mut [bool]) {
                seen[u] = true;
                for v in 0..adj.len() {
                    if adj[u][v] && !seen[v] {
                        dfs(v, adj, seen);
                    }
                }
            }
            dfs(0, &adj, &mut seen);
            if !seen.iter().all(|&b| b) {
                return Connectivity::FirstBadWindow(start);
            }
        }
        Connectivity::Ok
    }

    proptest! {
        #[test]
        fn connectivity_matches_brute_force(seed in 0u64..300, n in 1usize..=6, delta in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<Adjacency> = (0..8).map(|_| random_frame(&mut rng, n)).collect();
            let tl = GraphTimeline { n, delta, frames, meta: None };
            let horizon = 8 - delta;
            prop_assert_eq!(
                check_joint_connectivity(&tl, horizon).unwrap(),
                brute_union_dfs(&tl, horizon)
            );
        }
    }
}
