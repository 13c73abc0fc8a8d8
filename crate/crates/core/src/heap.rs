//! Indexed binary min-heap with decrease-key. Ties are broken by item index
//! so that pop order is deterministic.

#[derive(Debug, Clone)]
pub struct IndexedHeap<K> {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
    key: Vec<Option<K>>,
}

impl<K: PartialOrd + Clone> IndexedHeap<K> {
    pub fn new(capacity: usize) -> Self {
        Self {
            heap: Vec::with_capacity(capacity),
            pos: vec![None; capacity],
            key: vec![None; capacity],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.pos[item].is_some()
    }

    pub fn key(&self, item: usize) -> Option<&K> {
        self.key[item].as_ref()
    }

    fn less(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.key[a].as_ref().unwrap(), self.key[b].as_ref().unwrap());
        ka < kb || (!(kb < ka) && a < b)
    }

    /// Inserts `item` or lowers its key; larger keys are ignored.
    /// Returns whether the stored key changed.
    pub fn push_or_decrease(&mut self, item: usize, k: K) -> bool {
        match self.pos[item] {
            Some(p) => {
                if k < *self.key[item].as_ref().unwrap() {
                    self.key[item] = Some(k);
                    self.sift_up(p);
                    true
                } else {
                    false
                }
            }
            None => {
                self.key[item] = Some(k);
                self.heap.push(item);
                let p = self.heap.len() - 1;
                self.pos[item] = Some(p);
                self.sift_up(p);
                true
            }
        }
    }

    pub fn peek(&self) -> Option<(usize, &K)> {
        self.heap.first().map(|&i| (i, self.key[i].as_ref().unwrap()))
    }

    pub fn pop(&mut self) -> Option<(usize, K)> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = Some(0);
            self.sift_down(0);
        }
        self.pos[top] = None;
        Some((top, self.key[top].take().unwrap()))
    }

    fn sift_up(&mut self, mut p: usize) {
        while p > 0 {
            let parent = (p - 1) / 2;
            if self.less(self.heap[p], self.heap[parent]) {
                self.swap(p, parent);
                p = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut p: usize) {
        let n = self.heap.len();
        loop {
            let (l, r) = (2 * p + 1, 2 * p + 2);
            let mut best = p;
            if l < n && self.less(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < n && self.less(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == p {
                break;
            }
            self.swap(p, best);
            p = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a]] = Some(a);
        self.pos[self.heap[b]] = Some(b);
    }
}
