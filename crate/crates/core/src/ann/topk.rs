use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NeighborSet;

#[derive(Debug, Clone, Copy)]
struct Cand {
    d: f64,
    i: usize,
}

impl PartialEq for Cand {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d.total_cmp(&o.d).then(self.i.cmp(&o.i))
    }
}

/// Keeps the `k` smallest `(sq_dist, index)` pairs seen so far.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Cand>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, d: f64, i: usize) {
        if self.heap.len() < self.k {
            self.heap.push(Cand { d, i });
            return;
        }
        let c = Cand { d, i };
        // Fast reject on the common case before touching the heap.
        let worst = self.heap.peek().expect("k >= 1");
        if c < *worst {
            self.heap.pop();
            self.heap.push(c);
        }
    }

    pub fn into_sorted(self) -> NeighborSet {
        let v = self.heap.into_sorted_vec();
        NeighborSet {
            indices: v.iter().map(|c| c.i).collect(),
            sq_dists: v.iter().map(|c| c.d).collect(),
        }
    }
}
