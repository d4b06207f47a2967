use std::collections::BTreeMap;

use super::bellman_value;

/// Exact lookup-table Q-function with the classic step-size update
/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
#[derive(Debug, Clone, Default)]
pub struct TabularQ {
    pub alpha: f64,
    pub gamma: f64,
    values: BTreeMap<(usize, usize), f64>,
}

impl TabularQ {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha,
            gamma,
            values: BTreeMap::new(),
        }
    }

    /// Unvisited pairs are worth 0.
    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(0.0)
    }

    /// `next` is the successor state and its available actions, or `None`
    /// for a terminal step. Returns the updated value.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next: Option<(usize, &[usize])>) -> f64 {
        let next_max = next.and_then(|(s, actions)| {
            actions
                .iter()
                .map(|&a| self.value(s, a))
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        });
        let target = bellman_value(reward, self.gamma, next_max);
        let q = self.values.entry((state, action)).or_insert(0.0);
        *q += self.alpha * (target - *q);
        *q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_update_moves_toward_reward() {
        let mut q = TabularQ::new(0.5, 0.9);
        assert_eq!(q.update(0, 0, 1.0, None), 0.5);
        assert_eq!(q.update(0, 0, 1.0, None), 0.75);
    }

    #[test]
    fn bootstraps_from_successor() {
        let mut q = TabularQ::new(1.0, 0.5);
        q.update(1, 0, 2.0, None);
        assert_eq!(q.update(0, 0, 1.0, Some((1, &[0, 1]))), 2.0);
    }
}
