//! FIFO replay buffer of search-annotated states.
//!
//! Workers interleave their appends, so episodes are not contiguous in
//! storage. Each entry links to the next entry of its episode, and segments
//! follow those links.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::env::Observation;
use crate::rng::Rng;

/// What follows an entry within its episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    None,
    TerminalNext,
    TimeoutNext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub observation: Observation,
    pub pi_tilde: Vec<f64>,
    pub v_tilde: f64,
    pub episode_id: u64,
    pub step_index: usize,
    pub boundary: Boundary,
    /// Sequence id of the next entry of the same episode, once appended.
    pub next: Option<u64>,
}

/// Up to `K` consecutive entries of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<'a> {
    pub entries: Vec<&'a BufferEntry>,
}

impl Segment<'_> {
    pub fn effective_length(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
    /// Sequence id of `entries[0]`.
    base: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer { capacity, entries: VecDeque::new(), base: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Sequence id the next push will receive.
    pub fn next_seq(&self) -> u64 {
        self.base + self.entries.len() as u64
    }

    pub fn get(&self, seq: u64) -> Option<&BufferEntry> {
        seq.checked_sub(self.base).and_then(|i| self.entries.get(i as usize))
    }

    fn get_mut(&mut self, seq: u64) -> Option<&mut BufferEntry> {
        seq.checked_sub(self.base).and_then(|i| self.entries.get_mut(i as usize))
    }

    /// Appends an entry, linking it from `prev` (the previous entry of the
    /// same episode, if still stored). Evicts the oldest entry at capacity.
    pub fn push(&mut self, mut entry: BufferEntry, prev: Option<u64>) -> u64 {
        let seq = self.next_seq();
        entry.next = None;
        if let Some(p) = prev.and_then(|p| self.get_mut(p)) {
            p.next = Some(seq);
        }
        self.entries.push_back(entry);
        if self.entries.len() > self.capacity {
            self.entries.pop_front();
            self.base += 1;
        }
        seq
    }

    pub fn set_boundary(&mut self, seq: u64, boundary: Boundary) {
        if let Some(e) = self.get_mut(seq) {
            e.boundary = boundary;
        }
    }

    /// Segment of at most `max_len` entries starting at `seq`, stopping after
    /// a terminal or timeout boundary or where the episode is not yet stored.
    pub fn segment(&self, seq: u64, max_len: usize) -> Segment<'_> {
        let mut entries = Vec::with_capacity(max_len);
        let mut cur = self.get(seq);
        while let Some(e) = cur {
            entries.push(e);
            if entries.len() == max_len || e.boundary != Boundary::None {
                break;
            }
            cur = e.next.and_then(|n| self.get(n));
        }
        Segment { entries }
    }

    /// Samples a batch of segments with start indices uniform over the buffer.
    pub fn sample_segments(&self, batch: usize, max_len: usize, rng: &mut Rng) -> Vec<Segment<'_>> {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        (0..batch)
            .map(|_| {
                let i = rng.random_range(0..self.entries.len()) as u64;
                self.segment(self.base + i, max_len)
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use alloc::vec;

    fn entry(episode_id: u64, step_index: usize) -> BufferEntry {
        BufferEntry {
            observation: Observation::from_bits(vec![1, 0]).unwrap(),
            pi_tilde: vec![0.5, 0.5],
            v_tilde: 0.0,
            episode_id,
            step_index,
            boundary: Boundary::None,
            next: None,
        }
    }

    #[test]
    fn fifo_at_capacity() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(entry(i, 0), None);
        }
        assert_eq!(b.len(), 3);
        let ids: Vec<u64> = b.iter().map(|e| e.episode_id).collect();
        assert_eq!(ids, vec![2, 3, 4]);
        assert!(b.get(1).is_none());
        assert_eq!(b.get(2).unwrap().episode_id, 2);
    }

    #[test]
    fn interleaved_segments_stay_in_episode() {
        let mut b = ReplayBuffer::new(100);
        let (mut pa, mut pb) = (None, None);
        for t in 0..6 {
            pa = Some(b.push(entry(0, t), pa));
            pb = Some(b.push(entry(1, t), pb));
        }
        b.set_boundary(pa.unwrap(), Boundary::TerminalNext);
        let s = b.segment(0, 4);
        assert_eq!(s.effective_length(), 4);
        assert!(s.entries.iter().enumerate().all(|(k, e)| e.episode_id == 0 && e.step_index == k));
        // truncated by the terminal boundary
        let s = b.segment(8, 5);
        assert_eq!(s.entries.iter().map(|e| e.step_index).collect::<Vec<_>>(), vec![4, 5]);
        // episode 1 still running: truncated where storage ends
        let s = b.segment(9, 5);
        assert_eq!(s.effective_length(), 2);
    }

    #[test]
    fn sampled_segments_never_straddle_episodes() {
        let mut b = ReplayBuffer::new(50);
        let mut rng = StreamKey::root(3).rng();
        let mut prev = [None; 3];
        let mut ep = [0u64, 1, 2];
        let mut step = [0usize; 3];
        for t in 0..200 {
            let w = t % 3;
            let seq = b.push(entry(ep[w], step[w]), prev[w]);
            step[w] += 1;
            if rng.random_bool(0.1) {
                b.set_boundary(seq, Boundary::TimeoutNext);
                prev[w] = None;
                ep[w] += 3;
                step[w] = 0;
            } else {
                prev[w] = Some(seq);
            }
        }
        for s in b.sample_segments(500, 6, &mut rng) {
            let first = s.entries[0];
            for (k, e) in s.entries.iter().enumerate() {
                assert_eq!(e.episode_id, first.episode_id);
                assert_eq!(e.step_index, first.step_index + k);
            }
            for e in &s.entries[..s.entries.len() - 1] {
                assert_eq!(e.boundary, Boundary::None);
            }
        }
    }
}
