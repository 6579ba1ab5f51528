use std::collections::VecDeque;

use optit_core::envs::{generate_layout, generate_maze, Compass};
use optit_core::learn::{Boundary, BufferEntry, ReplayBuffer};
use optit_core::math::{log_softmax_into, softmax_into};
use optit_core::nn::{HeadLayout, Init, MlpConfig, PolicyNet, ValueNet};
use optit_core::search::{mcs_with_options, summarize, RunningVariance, SearchConfig};
use optit_core::{Environment, Observation, Sequential, StreamKey};
use proptest::prelude::*;

fn entry(episode_id: u64, step_index: usize) -> BufferEntry {
    BufferEntry {
        observation: Observation::from_bits(vec![0, 1]).unwrap(),
        pi_tilde: vec![0.5, 0.5],
        v_tilde: 0.0,
        episode_id,
        step_index,
        boundary: Boundary::None,
        next: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Interleaved episodes: the buffer keeps the newest `capacity` entries
    /// and every segment walks one episode in step order.
    #[test]
    fn buffer_is_fifo_and_segments_stay_in_episode(
        capacity in 1usize..40,
        schedule in proptest::collection::vec((0usize..4, any::<bool>()), 1..150),
        max_len in 1usize..8,
    ) {
        let mut b = ReplayBuffer::new(capacity);
        let mut open: [(u64, usize, Option<u64>); 4] = [(0, 0, None), (1, 0, None), (2, 0, None), (3, 0, None)];
        let mut next_episode = 4;
        let mut all = Vec::new();
        for (w, ends) in schedule {
            let (ep, step, prev) = open[w];
            let seq = b.push(entry(ep, step), prev);
            all.push((ep, step));
            if ends {
                b.set_boundary(seq, Boundary::TerminalNext);
                open[w] = (next_episode, 0, None);
                next_episode += 1;
            } else {
                open[w] = (ep, step + 1, Some(seq));
            }
        }
        let kept: VecDeque<_> = all.iter().rev().take(capacity).rev().copied().collect();
        let stored: Vec<_> = b.iter().map(|e| (e.episode_id, e.step_index)).collect();
        prop_assert_eq!(stored, Vec::from(kept));
        let first = b.next_seq() - b.len() as u64;
        for seq in first..b.next_seq() {
            let s = b.segment(seq, max_len);
            prop_assert!(s.effective_length() >= 1 && s.effective_length() <= max_len);
            let head = s.entries[0];
            for (k, e) in s.entries.iter().enumerate() {
                prop_assert_eq!(e.episode_id, head.episode_id);
                prop_assert_eq!(e.step_index, head.step_index + k);
                if k + 1 < s.entries.len() {
                    prop_assert_eq!(e.boundary, Boundary::None);
                }
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-500.0f64..500.0, 1..12)) {
        let mut p = vec![0.0; logits.len()];
        let mut lp = vec![0.0; logits.len()];
        softmax_into(&logits, &mut p);
        log_softmax_into(&logits, &mut lp);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&lp) {
            prop_assert!(*a >= 0.0 && b.is_finite() && *b <= 1e-12);
            prop_assert!((a - b.exp()).abs() < 1e-12);
        }
    }

    /// Open cells form a spanning tree of the 4-neighbour grid graph.
    #[test]
    fn generated_mazes_are_perfect(half in 2usize..7, seed in any::<u64>()) {
        let width = 2 * half + 1;
        let layout = generate_layout(width, &mut StreamKey::root(seed).rng()).unwrap();
        let open: Vec<usize> = layout.open_cells().collect();
        let mut edges = 0;
        for &c in &open {
            let (r, col) = (c / width, c % width);
            if col + 1 < width && !layout.is_wall(c + 1) {
                edges += 1;
            }
            if r + 1 < width && !layout.is_wall(c + width) {
                edges += 1;
            }
        }
        prop_assert_eq!(edges + 1, open.len());
        let dist = layout.open_distances(open[0]);
        prop_assert!(open.iter().all(|&c| dist[c] != usize::MAX));
        let s = generate_maze(width, &mut StreamKey::root(seed).rng()).unwrap();
        prop_assert!(s.agent != s.goal && !s.layout.is_wall(s.agent) && !s.layout.is_wall(s.goal));
    }

    /// Search output is a distribution whose greedy pair attains the max.
    #[test]
    fn summaries_are_consistent(
        q in proptest::collection::vec(-5.0f64..5.0, 12),
        sigma in 0.01f64..10.0,
        beta in 0.001f64..2.0,
    ) {
        let r = summarize(q.clone(), 4, 3, sigma, beta, 1);
        prop_assert!((r.pi_tilde.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((r.p_tilde.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.v_tilde, max);
        prop_assert!((0..3).any(|n| r.q(r.a_tilde, n) == max));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Same key, same result; the search never mutates the root state.
    #[test]
    fn search_is_a_function_of_its_key(seed in any::<u64>(), options in 1usize..4) {
        let env = Compass::new(7).unwrap();
        let mut rng = StreamKey::root(seed).rng();
        let root = env.reset(&mut rng);
        let dim = env.spec().observation_dim;
        let policy = PolicyNet::<f32>::new(MlpConfig::new(dim, 1, 8).unwrap(), HeadLayout::new(options, 4, false).unwrap(), Init::RandomOutput(0.5), &mut rng);
        let value = ValueNet::<f32>::new(MlpConfig::new(dim, 1, 8).unwrap(), Init::ZeroOutput, &mut rng);
        let cfg = SearchConfig { simulation_budget: 48, rollout_length: 6, beta: 0.1, variance_decay: 0.99, discount: 0.99 };
        let run = || {
            let mut sigma = RunningVariance::new(0.99);
            let r = mcs_with_options(&env, &policy, &value, &mut sigma, &root, &cfg, StreamKey::root(seed ^ 7), &Sequential).unwrap();
            (r, sigma)
        };
        let before = root.clone();
        let (a, sa) = run();
        let (b, sb) = run();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(sa.sigma_bar().to_bits(), sb.sigma_bar().to_bits());
        prop_assert_eq!(root, before);
        prop_assert_eq!(a.rollouts, 48 / (4 * options) * 4 * options);
    }
}
