//! Oracle suites runnable from the command line.

use optit_core::analysis::{
    direct_path, greedy_enters_wall, option_diversity, posterior_ce_demo, solve_random_policy_q, value_iteration, DiversityConfig,
    ScriptedOptions, TabularMdp,
};
use optit_core::envs::{generate_maze, HierElectricProcMaze, HierState, ProcMaze};
use optit_core::learn::{exact_ce_loss, mean_ce_loss_with_actions, optit_loss_with_actions, value_loss, LossBatch, LossOutput, LossVariant};
use optit_core::nn::gradcheck::{check_gradients, jitter};
use optit_core::nn::{HeadLayout, Init, MlpConfig, NnError, PolicyNet, ValueNet};
use optit_core::search::{summarize, SearchConfig};
use optit_core::termination::{brute_force_log_likelihood, termination_loss, trajectory_log_likelihood, LogTables, Trajectory};
use optit_core::{Executor, Rng, StreamKey};
use rand::Rng as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Random recursion tables with `1 <= K <= max_k`, `1 <= N <= max_n`.
pub fn random_tables(rng: &mut Rng, max_k: usize, max_n: usize) -> LogTables {
    let k = rng.random_range(1..=max_k);
    let n = rng.random_range(1..=max_n);
    let rho: Vec<f64> = (0..=k).flat_map(|_| random_simplex(rng, n)).collect();
    let pi: Vec<f64> = (0..k * n).map(|_| rng.random_range(0.01..1.0)).collect();
    let psi: Vec<f64> = (0..(k + 1) * n).map(|_| rng.random_range(0.0..1.0)).collect();
    LogTables::from_probs(k, n, &rho, &pi, &psi).expect("well-formed tables")
}

/// Largest |recursion - enumeration| log-likelihood gap over random instances.
pub fn termination_oracle_gap(instances: usize, seed: u64) -> f64 {
    let mut rng = StreamKey::root(seed).rng();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let t = random_tables(&mut rng, 6, 3);
        let a = trajectory_log_likelihood(&t).expect("recursion");
        let b = brute_force_log_likelihood(&t).expect("enumeration");
        worst = worst.max((a - b).abs());
    }
    worst
}

const DIM: usize = 6;
const ACTIONS: usize = 4;

fn random_batch(rng: &mut Rng, lens: &[usize]) -> LossBatch<f64> {
    let mut b = LossBatch::new(DIM, ACTIONS);
    for &len in lens {
        for _ in 0..len {
            let x: Vec<f64> = (0..DIM).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let p = random_simplex(rng, ACTIONS);
            b.push_row(&x, &p, rng.random_range(-2.0..2.0));
        }
        b.end_segment();
    }
    b
}

/// Worst finite-difference relative error of one loss over random configs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub loss: String,
    pub configs: usize,
    pub max_rel_error: f64,
}

type PolicyLossFn = fn(&PolicyNet<f64>, &LossBatch<f64>, &[usize]) -> Result<LossOutput<f64>, NnError>;

fn exact_with_actions(p: &PolicyNet<f64>, b: &LossBatch<f64>, _: &[usize]) -> Result<LossOutput<f64>, NnError> {
    exact_ce_loss(p, b)
}

/// Central-difference checks of every training loss on the 64-bit path:
/// `configs` random networks, batches and sampled actions per loss.
/// Relative-error floors: 1e-6 for policy and termination losses, 1e-4 for
/// the value loss.
pub fn gradient_suite(configs: usize, seed: u64) -> Vec<GradResult> {
    let key = StreamKey::root(seed);
    let mut out = Vec::new();
    let policy_losses: [(LossVariant, PolicyLossFn); 5] = [
        (LossVariant::OptIt, optit_loss_with_actions),
        (LossVariant::ExitSampledSeq, optit_loss_with_actions),
        (LossVariant::ExitSampledIndep, optit_loss_with_actions),
        (LossVariant::ExitExactIndep, exact_with_actions),
        (LossVariant::MeanCe, mean_ce_loss_with_actions),
    ];
    for (vi, (variant, f)) in policy_losses.into_iter().enumerate() {
        let mut worst = 0.0f64;
        for c in 0..configs {
            let mut rng = key.path(&[vi as u64, c as u64]).rng();
            let n = if variant.requires_single_option() { 1 } else { rng.random_range(1..=4) };
            let layers = rng.random_range(1..=2);
            let cfg = MlpConfig::new(DIM, layers, rng.random_range(3..=8)).unwrap();
            let mut p = PolicyNet::<f64>::new(cfg, HeadLayout::new(n, ACTIONS, false).unwrap(), Init::RandomOutput(1.0), &mut rng);
            jitter(&mut p.mlp, 0.1, &mut rng);
            let k = variant.segment_length(rng.random_range(1..=5));
            let lens: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=k)).collect();
            let b = random_batch(&mut rng, &lens);
            let actions = b.sample_actions(&mut rng);
            let layout = p.layout;
            let g = f(&p, &b, &actions).unwrap().grads;
            let r = check_gradients(&mut p.mlp, &g, 1e-5, 1e-6, |m| f(&PolicyNet { mlp: m.clone(), layout }, &b, &actions).unwrap().loss);
            worst = worst.max(r.max_rel_error);
        }
        out.push(GradResult { loss: variant.name().into(), configs, max_rel_error: worst });
    }

    let mut worst = 0.0f64;
    for c in 0..configs {
        let mut rng = key.path(&[10, c as u64]).rng();
        let cfg = MlpConfig::new(DIM, rng.random_range(1..=2), rng.random_range(3..=8)).unwrap();
        let mut v = ValueNet::<f64>::new(cfg, Init::RandomOutput(1.0), &mut rng);
        jitter(&mut v.mlp, 0.1, &mut rng);
        let lens: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=5)).collect();
        let b = random_batch(&mut rng, &lens);
        let g = value_loss(&v, &b).unwrap().grads;
        let r = check_gradients(&mut v.mlp, &g, 1e-5, 1e-4, |m| value_loss(&ValueNet { mlp: m.clone() }, &b).unwrap().loss);
        worst = worst.max(r.max_rel_error);
    }
    out.push(GradResult { loss: "value".into(), configs, max_rel_error: worst });

    let mut worst = 0.0f64;
    for c in 0..configs {
        let mut rng = key.path(&[11, c as u64]).rng();
        let n = rng.random_range(1..=3);
        let cfg = MlpConfig::new(DIM, rng.random_range(1..=2), rng.random_range(3..=8)).unwrap();
        let mut p = PolicyNet::<f64>::new(cfg, HeadLayout::new(n, ACTIONS, true).unwrap(), Init::RandomOutput(1.0), &mut rng);
        jitter(&mut p.mlp, 0.1, &mut rng);
        let batch: Vec<Trajectory<f64>> = (0..rng.random_range(1..=3))
            .map(|_| {
                let k = rng.random_range(1..=5);
                let inputs = (0..(k + 1) * DIM).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
                let actions = (0..k).map(|_| rng.random_range(0..ACTIONS)).collect();
                Trajectory::new(DIM, inputs, actions).unwrap()
            })
            .collect();
        let layout = p.layout;
        let g = termination_loss(&p, &batch).unwrap().grads;
        let r = check_gradients(&mut p.mlp, &g, 1e-5, 1e-6, |m| termination_loss(&PolicyNet { mlp: m.clone(), layout }, &batch).unwrap().loss);
        worst = worst.max(r.max_rel_error);
    }
    out.push(GradResult { loss: "termination".into(), configs, max_rel_error: worst });
    out
}

/// Hand-expanded 2x2 search summary. Returns the largest deviation from
/// the expected marginals and whether the greedy pair and value match.
pub fn search_fixture() -> (f64, bool) {
    // options are rows, actions columns; (a=0, n=1) ties (a=1, n=0)
    let q = vec![1.0, 2.0, 2.0, 0.5];
    let r = summarize(q, 2, 2, 2.0, 0.5, 4);
    let e = [1f64.exp(), 2f64.exp(), 2f64.exp(), 0.5f64.exp()];
    let z: f64 = e.iter().sum();
    let dev = (r.pi_tilde[0] - (e[0] + e[2]) / z).abs().max((r.pi_tilde[1] - (e[1] + e[3]) / z).abs());
    (dev, r.a_tilde == 0 && r.v_tilde == 2.0)
}

/// Per instance: (greedy-of-random enters a wall, optimal enters a wall).
pub fn wall_entries(width: usize, instances: usize, seed: u64) -> Vec<(bool, bool)> {
    let env = ProcMaze::electric(width).expect("frozen penalty");
    let key = StreamKey::root(seed);
    (0..instances)
        .map(|i| {
            let s = generate_maze(width, &mut key.child(i as u64).rng()).expect("maze");
            let mdp = TabularMdp::from_maze(&env, &s, 1.0).expect("tabular");
            let q = solve_random_policy_q(&mdp).expect("linear solve");
            let opt = value_iteration(&mdp, 1e-12, 1_000_000).expect("value iteration");
            (greedy_enters_wall(&mdp, &q, &s), greedy_enters_wall(&mdp, &opt, &s))
        })
        .collect()
}

/// Scripted options from the controller centre: option `n` always takes
/// action `n` when `specialized`, else every option is uniform.
/// Returns `(state-conditional MI, marginal MI, entropy)`.
pub fn scripted_diversity(specialized: bool, config: &DiversityConfig, seed: u64, exec: &impl Executor) -> (f64, f64, f64) {
    let env = HierElectricProcMaze::new(ProcMaze::electric(5).unwrap(), 8).unwrap();
    let policy = ScriptedOptions {
        num_options: 4,
        f: move |_: &HierState, n: usize, out: &mut [f64]| {
            out.iter_mut().enumerate().for_each(|(a, p)| *p = if !specialized { 0.25 } else if a == n { 1.0 } else { 0.0 })
        },
    };
    let r = option_diversity(&env, &policy, config, StreamKey::root(seed), exec).expect("diversity");
    (r.mi_state, r.mi_marginal, r.entropy)
}

/// Runs the fast oracle suites. `configs` sets the gradient-suite size.
pub fn run_selftest(configs: usize, exec: &impl Executor) -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| out.push(Check { name: name.into(), passed, detail });

    let gap = termination_oracle_gap(200, 0);
    push("termination recursion vs enumeration", gap < 1e-9, format!("max gap {gap:.3e} over 200 instances"));

    for g in gradient_suite(configs, 1) {
        let tol = if g.loss == "value" { 1e-6 } else { 1e-4 };
        push(&format!("gradient check: {}", g.loss), g.max_rel_error < tol, format!("max rel error {:.3e} over {} configs", g.max_rel_error, g.configs));
    }

    let l4 = 4f64.ln();
    let r = posterior_ce_demo(20, 15);
    let ok = (r.single_policy_ce - 20.0 * l4).abs() < 1e-12 && (r.mixture_ce - l4).abs() < 1e-12;
    push("cross-entropy closed forms", ok, format!("single {:.12}, mixture {:.12}", r.single_policy_ce, r.mixture_ce));
    let ok = (1..=3).all(|d| (direct_path(d).option_ratio() - 4f64.powi(d as i32)).abs() < 1e-9);
    push("direct-path ratio 4^d", ok, "d = 1, 2, 3".into());

    let m = SearchConfig { simulation_budget: 1000, rollout_length: 5, beta: 0.1, variance_decay: 0.99, discount: 0.99 }.rollouts_per_pair(4, 5);
    push("budget split", m == Ok(50), format!("{m:?} rollouts per pair"));
    let (dev, greedy) = search_fixture();
    push("2x2 search fixture", dev < 1e-12 && greedy, format!("marginal deviation {dev:.1e}, greedy ok {greedy}"));

    let walls = wall_entries(5, 10, 0);
    let random_hits = walls.iter().filter(|w| w.0).count();
    let optimal_hits = walls.iter().filter(|w| w.1).count();
    push("greedy-of-random enters walls, optimal never", random_hits > 0 && optimal_hits == 0, format!("{random_hits}/10 vs {optimal_hits}/10"));

    let dc = DiversityConfig { n_states: 5, n_rollouts: 1000, horizon: 20, bootstrap: 200 };
    let (mi, _, h) = scripted_diversity(true, &dc, 1, exec);
    push("scripted options: MI = ln 4", (mi - l4).abs() < 0.02, format!("MI {mi:.4}, entropy {h:.4}"));
    let (mi, _, _) = scripted_diversity(false, &dc, 2, exec);
    push("identical options: MI = 0", mi.abs() < 0.02, format!("MI {mi:.4}"));
    out
}
