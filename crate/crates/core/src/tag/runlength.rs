//! Run-length encoded queues with macro steps.
//!
//! A queue is a sequence of runs `word^reps`. When the head run holds enough
//! repetitions, every block of `lcm(|word|, m)` symbols reads the same
//! symbols and appends the same output, so `q` blocks are consumed in one
//! move and their output is appended as a single run. The result is exactly
//! the state reached by `q * lcm(|word|, m) / m` ordinary steps.

use std::collections::VecDeque;

use super::IndexedSystem;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Run {
    word: Vec<u32>,
    reps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunQueue {
    runs: VecDeque<Run>,
    len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The step budget was used up.
    Budget,
    /// The queue is shorter than `m`.
    Halted,
    /// The head symbol is one the caller asked to inspect.
    Watched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Advance {
    pub steps: u64,
    pub stop: StopReason,
}

impl RunQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols(symbols: &[u32]) -> Self {
        let mut q = RunQueue::new();
        for &s in symbols {
            q.push_run(&[s], 1);
        }
        q
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of stored runs; a measure of how well the queue compresses.
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn head(&self) -> Option<u32> {
        self.runs.front().map(|r| r.word[0])
    }

    /// Runs as `(word, reps)` pairs, head first.
    pub fn runs(&self) -> impl Iterator<Item = (&[u32], u64)> {
        self.runs.iter().map(|r| (r.word.as_slice(), r.reps))
    }

    pub fn symbols(&self) -> impl Iterator<Item = u32> + '_ {
        self.runs.iter().flat_map(|r| {
            std::iter::repeat_n(r.word.as_slice(), r.reps as usize)
                .flatten()
                .copied()
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.symbols().collect()
    }

    /// Appends `word^reps`, reduced to its primitive root and merged with an
    /// equal tail run.
    pub fn push_run(&mut self, word: &[u32], reps: u64) {
        if word.is_empty() || reps == 0 {
            return;
        }
        let root = primitive_root(word);
        let reps = reps * (word.len() / root.len()) as u64;
        self.len += root.len() as u64 * reps;
        if let Some(last) = self.runs.back_mut() {
            if last.word == root {
                last.reps += reps;
                return;
            }
        }
        self.runs.push_back(Run {
            word: root.to_vec(),
            reps,
        });
    }

    fn pop_front_symbols(&mut self, mut k: u64) {
        debug_assert!(k <= self.len);
        self.len -= k;
        while k > 0 {
            let front = self.runs.front_mut().expect("length accounted");
            let wlen = front.word.len() as u64;
            let total = wlen * front.reps;
            if total <= k {
                k -= total;
                self.runs.pop_front();
                continue;
            }
            let whole = k / wlen;
            front.reps -= whole;
            k -= whole * wlen;
            if k > 0 {
                // w[k..] w^r == (w[k..] w[..k])^(r-1) w[k..]; keeps the long
                // run aligned with the new head
                let cut = k as usize;
                let remaining = front.reps - 1;
                let word = std::mem::take(&mut front.word);
                self.runs.pop_front();
                self.runs.push_front(Run {
                    word: word[cut..].to_vec(),
                    reps: 1,
                });
                if remaining > 0 {
                    let rotated = [&word[cut..], &word[..cut]].concat();
                    self.runs.push_front(Run {
                        word: rotated,
                        reps: remaining,
                    });
                }
                k = 0;
            }
        }
    }

    /// One ordinary transition. Returns the symbol read, `None` on halt.
    pub fn step(&mut self, system: &IndexedSystem) -> Option<u32> {
        let m = system.m() as u64;
        if self.len < m {
            return None;
        }
        let head = self.head().expect("non-empty");
        self.pop_front_symbols(m);
        self.push_run(system.production(head), 1);
        Some(head)
    }

    /// Runs up to `max_steps` transitions.
    ///
    /// Stops early on halt, or before reading a head symbol `s` with
    /// `watched[s]` once at least one step has been taken. No intermediate
    /// state whose head is watched is ever skipped by a macro step.
    pub fn advance(&mut self, system: &IndexedSystem, max_steps: u64, watched: &[bool]) -> Advance {
        let m = system.m();
        let mut steps = 0u64;
        let is_watched = |s: u32| watched.get(s as usize).copied().unwrap_or(false);
        loop {
            if self.len < m as u64 {
                return Advance {
                    steps,
                    stop: StopReason::Halted,
                };
            }
            let head = self.head().expect("non-empty");
            if steps > 0 && is_watched(head) {
                return Advance {
                    steps,
                    stop: StopReason::Watched,
                };
            }
            if steps == max_steps {
                return Advance {
                    steps,
                    stop: StopReason::Budget,
                };
            }
            let taken = self.macro_step(system, max_steps - steps, &is_watched);
            if taken == 0 {
                self.step(system);
                steps += 1;
            } else {
                steps += taken;
            }
        }
    }

    /// Consumes whole blocks of the head run. Returns the number of
    /// ordinary steps performed, 0 if no block could be taken.
    fn macro_step(&mut self, system: &IndexedSystem, budget: u64, watched: &impl Fn(u32) -> bool) -> u64 {
        let m = system.m();
        let front = self.runs.front().expect("non-empty");
        let p = front.word.len();
        let copies = m / gcd(p, m);
        let block_len = p * copies;
        let steps_per_block = (block_len / m) as u64;
        let blocks = (front.reps / copies as u64).min(budget / steps_per_block);
        if blocks < 2 {
            return 0;
        }
        let mut output = Vec::new();
        for j in 0..steps_per_block as usize {
            let read = front.word[(j * m) % p];
            if watched(read) {
                return 0;
            }
            output.extend_from_slice(system.production(read));
        }
        self.pop_front_symbols(blocks * block_len as u64);
        self.push_run(&output, blocks);
        blocks * steps_per_block
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn primitive_root(word: &[u32]) -> &[u32] {
    let n = word.len();
    (1..=n)
        .filter(|d| n.is_multiple_of(*d))
        .find(|&d| word.chunks(d).all(|c| c == &word[..d]))
        .map(|d| &word[..d])
        .unwrap_or(word)
}
