use super::AgentError;

/// Transitions of one environment stream in collection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards_ext: Vec<f64>,
    pub rewards_int: Vec<f64>,
    pub dones: Vec<bool>,
    pub log_probs: Vec<f64>,
    pub values_ext: Vec<f64>,
    pub values_int: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward_ext: f64,
    pub reward_int: f64,
    pub done: bool,
    pub log_prob: f64,
    pub value_ext: f64,
    pub value_int: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        self.states.push(t.state);
        self.actions.push(t.action);
        self.rewards_ext.push(t.reward_ext);
        self.rewards_int.push(t.reward_int);
        self.dones.push(t.done);
        self.log_probs.push(t.log_prob);
        self.values_ext.push(t.value_ext);
        self.values_int.push(t.value_int);
    }

    pub fn check(&self) -> Result<(), AgentError> {
        let n = self.len();
        let lens = [
            self.states.len(),
            self.rewards_ext.len(),
            self.rewards_int.len(),
            self.dones.len(),
            self.log_probs.len(),
            self.values_ext.len(),
            self.values_int.len(),
        ];
        if lens.iter().all(|&l| l == n) {
            Ok(())
        } else {
            Err(AgentError::Ragged(format!(
                "trajectory arrays have lengths {n} and {lens:?}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_keeps_lengths() {
        let mut t = Trajectory::default();
        for k in 0..3 {
            t.push(Transition {
                state: vec![k as f64],
                action: k,
                reward_ext: 0.0,
                reward_int: 1.0,
                done: k == 2,
                log_prob: -0.5,
                value_ext: 0.0,
                value_int: 0.0,
            });
        }
        assert_eq!(t.len(), 3);
        assert!(t.check().is_ok());
        t.dones.pop();
        assert!(t.check().is_err());
    }
}
