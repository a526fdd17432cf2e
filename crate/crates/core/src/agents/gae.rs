use super::AgentError;

/// GAE(lambda) advantages and returns.
///
/// `values` holds `V(s_0) .. V(s_T)`, one more entry than `rewards`; the last
/// entry bootstraps the step after the trajectory. A `done` step cuts the
/// bootstrap and the advantage recursion.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    let t = rewards.len();
    if values.len() != t + 1 || dones.len() != t {
        return Err(AgentError::LengthMismatch {
            rewards: t,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut adv = vec![0.0; t];
    let mut acc = 0.0;
    for k in (0..t).rev() {
        let live = if dones[k] { 0.0 } else { 1.0 };
        let delta = rewards[k] + gamma * values[k + 1] * live - values[k];
        acc = delta + gamma * lambda * live * acc;
        adv[k] = acc;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = gae(&[1.0], &[0.0, 0.0], &[true], 0.99, 0.95).unwrap();
        assert_eq!((a, r), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn zero_lambda_is_td_error() {
        let rewards = [0.5, -1.0, 2.0];
        let values = [0.1, 0.2, 0.3, 0.4];
        let dones = [false, true, false];
        let (a, _) = gae(&rewards, &values, &dones, 0.9, 0.0).unwrap();
        assert_eq!(a[0], 0.5 + 0.9 * 0.2 - 0.1);
        assert_eq!(a[1], -1.0 - 0.2);
        assert_eq!(a[2], 2.0 + 0.9 * 0.4 - 0.3);
    }

    #[test]
    fn length_mismatch() {
        assert!(gae(&[1.0, 2.0], &[0.0, 0.0], &[false, false], 0.9, 0.9).is_err());
        assert!(gae(&[1.0], &[0.0, 0.0], &[], 0.9, 0.9).is_err());
    }
}
