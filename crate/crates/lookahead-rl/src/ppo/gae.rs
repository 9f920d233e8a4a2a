//! Generalized advantage estimation.

/// Compute advantages and returns for one environment's trajectory slice.
///
/// `delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t`, where `v_{t+1}`
/// for the final step is `bootstrap_value`. Advantages follow the reversed
/// recursion `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}` and
/// returns are `A_t + v_t`. Accumulation runs in f64; outputs are f32.
///
/// # Panics
/// Panics if the slices disagree in length (an internal plumbing bug, not a
/// user input error).
pub fn gae(
    rewards: &[f32],
    values: &[f32],
    dones: &[bool],
    bootstrap_value: f32,
    gamma: f64,
    lambda: f64,
) -> (Vec<f32>, Vec<f32>) {
    assert_eq!(rewards.len(), values.len(), "gae: rewards/values length");
    assert_eq!(rewards.len(), dones.len(), "gae: rewards/dones length");
    let t_max = rewards.len();
    let mut advantages = vec![0.0f32; t_max];
    let mut returns = vec![0.0f32; t_max];
    let mut acc = 0.0f64;
    for t in (0..t_max).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < t_max {
            values[t + 1] as f64
        } else {
            bootstrap_value as f64
        };
        let delta = rewards[t] as f64 + gamma * next_value * not_done - values[t] as f64;
        acc = delta + gamma * lambda * not_done * acc;
        advantages[t] = acc as f32;
        returns[t] = (acc + values[t] as f64) as f32;
    }
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Direct-summation reference: A_t = sum_k (gamma*lambda)^(k-t) *
    /// prod_{j=t..k-1}(1-done_j) * delta_k.
    fn brute_force(
        rewards: &[f32],
        values: &[f32],
        dones: &[bool],
        bootstrap: f32,
        gamma: f64,
        lambda: f64,
    ) -> Vec<f64> {
        let n = rewards.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| {
                let next = if t + 1 < n { values[t + 1] as f64 } else { bootstrap as f64 };
                let nd = if dones[t] { 0.0 } else { 1.0 };
                rewards[t] as f64 + gamma * next * nd - values[t] as f64
            })
            .collect();
        (0..n)
            .map(|t| {
                let mut coeff = 1.0;
                let mut total = delta[t];
                for k in t + 1..n {
                    if dones[k - 1] {
                        break;
                    }
                    coeff *= gamma * lambda;
                    total += coeff * delta[k];
                }
                total
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let rewards = [1.0f32, -0.5, 2.0, 0.0];
        let values = [0.3f32, 0.1, -0.2, 0.4];
        let dones = [false, true, false, false];
        let bootstrap = 0.7f32;
        let (adv, ret) = gae(&rewards, &values, &dones, bootstrap, 0.9, 0.0);
        for t in 0..4 {
            let next = if t + 1 < 4 { values[t + 1] as f64 } else { bootstrap as f64 };
            let nd = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] as f64 + 0.9 * next * nd - values[t] as f64;
            assert!((adv[t] as f64 - delta).abs() < 1e-6, "t={t}");
            assert!((ret[t] - (adv[t] + values[t])).abs() < 1e-6);
        }
    }

    /// gamma = lambda = 1 with zero bootstrap reduces to the Monte-Carlo
    /// advantage: reward-to-go minus the value baseline.
    #[test]
    fn monte_carlo_limit_matches_reward_to_go() {
        let rewards = [1.0f32, 2.0, 3.0, -1.0];
        let values = [0.5f32, 0.25, -0.75, 1.0];
        let dones = [false; 4];
        let (adv, _) = gae(&rewards, &values, &dones, 0.0, 1.0, 1.0);
        for t in 0..4 {
            let to_go: f64 = rewards[t..].iter().map(|&r| r as f64).sum();
            assert!((adv[t] as f64 - (to_go - values[t] as f64)).abs() < 1e-6, "t={t}");
        }
    }

    /// Hand computation: r=(1,1), V=(0.5,0.5), bootstrap 0, gamma=0.9,
    /// lambda=0.95 gives delta=(0.95, 0.5), A_1=0.5, A_0=1.3775.
    #[test]
    fn hand_computed_two_step_case() {
        let (adv, ret) = gae(&[1.0, 1.0], &[0.5, 0.5], &[false, false], 0.0, 0.9, 0.95);
        assert!((adv[1] - 0.5).abs() < 1e-6);
        assert!((adv[0] - 1.3775).abs() < 1e-6);
        assert!((ret[0] - (1.3775 + 0.5)).abs() < 1e-6);
        assert!((ret[1] - 1.0).abs() < 1e-6);
    }

    /// Recursion agrees with the direct-summation reference on random
    /// inputs up to length 32, with random done flags.
    #[test]
    fn matches_brute_force_on_random_inputs() {
        let mut rng = crate::rng::derive_rng(7, "gae-test", 0);
        for case in 0..200 {
            let n = 1 + (case % 32);
            let rewards: Vec<f32> = (0..n).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let values: Vec<f32> = (0..n).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect();
            let dones: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.2).collect();
            let bootstrap = rng.gen::<f32>() - 0.5;
            let gamma = 0.5 + 0.5 * rng.gen::<f64>();
            let lambda = rng.gen::<f64>();
            let (adv, ret) = gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
            let oracle = brute_force(&rewards, &values, &dones, bootstrap, gamma, lambda);
            for t in 0..n {
                assert!(
                    (adv[t] as f64 - oracle[t]).abs() < 1e-4,
                    "case {case} t {t}: {} vs {}",
                    adv[t],
                    oracle[t]
                );
                assert!((ret[t] - (adv[t] + values[t])).abs() < 1e-5);
            }
        }
    }

    /// done=true cuts both bootstrapping and advantage accumulation.
    #[test]
    fn done_blocks_information_flow() {
        let rewards = [0.0f32, 0.0, 5.0];
        let values = [0.0f32; 3];
        let with_done = gae(&rewards, &values, &[false, true, false], 10.0, 0.99, 0.95).0;
        // Reward at t=2 and the bootstrap cannot reach t<=1 through the done.
        assert_eq!(with_done[0], gae(&[0.0, 0.0], &[0.0, 0.0], &[false, true], 99.0, 0.99, 0.95).0[0]);
        assert!((with_done[1] - 0.0).abs() < 1e-7);
        assert!(with_done[2] > 5.0); // own reward + bootstrap flows at t=2
    }
}
