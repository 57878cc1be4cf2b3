//! Sequence trimming: build a directed graph over the episode's states,
//! splice in A* shortcuts between redundant pairs, and return the
//! minimum-weight path between the endpoints.

use std::collections::HashMap;

use petgraph::graph::{DiGraph, NodeIndex};

use crate::rack::{disorder, RackState};

use super::astar::{astar_search, exist_action, SearchGoal, SearchLimits, StateSequence};

struct SequenceGraph {
    graph: DiGraph<RackState, u32>,
    nodes: HashMap<RackState, NodeIndex>,
}

impl SequenceGraph {
    fn new() -> Self {
        SequenceGraph {
            graph: DiGraph::new(),
            nodes: HashMap::new(),
        }
    }

    fn node(&mut self, s: &RackState) -> NodeIndex {
        if let Some(&ix) = self.nodes.get(s) {
            return ix;
        }
        let ix = self.graph.add_node(s.clone());
        self.nodes.insert(s.clone(), ix);
        ix
    }

    fn edge(&mut self, from: &RackState, to: &RackState, weight: u32) {
        let (a, b) = (self.node(from), self.node(to));
        if a == b {
            return; // merged identical states need no self loop
        }
        match self.graph.find_edge(a, b) {
            Some(e) => {
                let w = self.graph.edge_weight_mut(e).expect("edge exists");
                *w = (*w).min(weight);
            }
            None => {
                self.graph.add_edge(a, b, weight);
            }
        }
    }
}

/// Shorten a state sequence by removing redundant sub-sequences.
///
/// Every consecutive pair keeps its unit edge. For each state pair `(i, j)`
/// scanned with `j` descending, the disorder `d` decides: a pair with
/// `1 < d < j - i < H_trm` gets an A* shortcut spliced in (first hit per `i`
/// wins), identical states merge, and single-action pairs get a direct unit
/// edge. The result is the minimum-weight path between the endpoints, which
/// never exceeds the input length and preserves both endpoints.
pub fn trim(seq: &StateSequence, limits: &SearchLimits) -> StateSequence {
    let states = seq.states();
    let n = states.len();
    if n <= 2 {
        return seq.clone();
    }

    let mut sg = SequenceGraph::new();
    for (i, s) in states.iter().enumerate() {
        sg.node(s);
        if i > 0 && states[i - 1] != states[i] {
            sg.edge(&states[i - 1], s, 1);
        }
    }

    for i in 0..n.saturating_sub(2) {
        for j in ((i + 2)..n).rev() {
            let d = disorder(&states[i], &states[j]);
            if d > 1 {
                if d < j - i && j - i < limits.trim_horizon {
                    if let Some(short) =
                        astar_search(&states[i], SearchGoal::Exact(&states[j]), limits, None)
                    {
                        let path = short.states();
                        for k in 1..path.len() {
                            if path[k - 1] != path[k] {
                                sg.edge(&path[k - 1], &path[k], 1);
                            }
                        }
                    }
                    break;
                }
            } else if states[i] == states[j] {
                // already one node in the graph, nothing to add
                break;
            } else if exist_action(&states[i], &states[j]).is_some() {
                sg.edge(&states[i], &states[j], 1);
                break;
            }
        }
    }

    let start = sg.nodes[&states[0]];
    let end = sg.nodes[&states[n - 1]];
    let (_, path) = petgraph::algo::astar(
        &sg.graph,
        start,
        |node| node == end,
        |e| *e.weight(),
        |_| 0,
    )
    .expect("the original edges connect the endpoints");
    let trimmed: Vec<RackState> = path.iter().map(|&ix| sg.graph[ix].clone()).collect();
    StateSequence::from_states_unchecked(trimmed)
}
