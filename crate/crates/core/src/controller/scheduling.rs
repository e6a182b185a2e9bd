use crate::vehicle::{scheduling_of, InputVec, SchedulingVector, StateVec, V_MAX, V_MIN};

/// Predicted scheduling parameters `p_hat_{0|k} .. p_hat_{N|k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingTrajectory {
    pub entries: Vec<SchedulingVector>,
}

impl SchedulingTrajectory {
    pub fn horizon(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    /// Builds `p_hat_i = (v_i, nu_i, delta_i, psi_i)` from a plan, `states[0]`
    /// being the current state. The last input is held for entry `N`.
    pub fn from_plan(states: &[StateVec], inputs: &[InputVec]) -> Self {
        let entries = states
            .iter()
            .enumerate()
            .map(|(i, z)| scheduling_of(z, &inputs[i.min(inputs.len() - 1)]))
            .collect();
        Self { entries }
    }

    pub fn clamp_speeds(&mut self) {
        for p in &mut self.entries {
            p.v_lon = p.v_lon.clamp(V_MIN, V_MAX);
        }
    }
}

/// `N + 1` copies of `(v_0, nu_0, delta_0, psi_0)`.
pub fn init_scheduling(z0: &StateVec, u0: &InputVec, horizon: usize) -> SchedulingTrajectory {
    SchedulingTrajectory {
        entries: vec![scheduling_of(z0, u0); horizon + 1],
    }
}

/// Shifts by one step, holding the tail entry.
pub fn shift_scheduling(prev: &SchedulingTrajectory) -> SchedulingTrajectory {
    let mut entries: Vec<SchedulingVector> = prev.entries.iter().skip(1).copied().collect();
    if let Some(last) = prev.entries.last() {
        entries.push(*last);
    }
    SchedulingTrajectory { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_examples() {
        let z = StateVec::new(0.0, 0.0, 10.0, 0.0, 0.0, 0.0);
        let s = init_scheduling(&z, &InputVec::zeros(), 8);
        assert_eq!(s.entries.len(), 9);
        assert!(s
            .entries
            .iter()
            .all(|p| *p == SchedulingVector::new(10.0, 0.0, 0.0, 0.0)));
        assert_eq!(init_scheduling(&z, &InputVec::zeros(), 1).entries.len(), 2);
        let slow = StateVec::new(0.0, 0.0, 0.5, 0.0, 0.0, 0.0);
        assert!(init_scheduling(&slow, &InputVec::zeros(), 3)
            .entries
            .iter()
            .all(|p| p.v_lon == 1.0));
    }

    #[test]
    fn shift_examples() {
        let p = |v: f64| SchedulingVector::new(v, 0.0, 0.0, 0.0);
        let s = SchedulingTrajectory {
            entries: vec![p(1.0), p(2.0), p(3.0)],
        };
        assert_eq!(shift_scheduling(&s).entries, vec![p(2.0), p(3.0), p(3.0)]);
        let c = SchedulingTrajectory {
            entries: vec![p(5.0); 4],
        };
        assert_eq!(shift_scheduling(&c), c);
    }

    #[test]
    fn plan_update_uses_planned_inputs() {
        let states = vec![
            StateVec::new(0.0, 0.0, 10.0, 0.1, 0.2, 0.0),
            StateVec::new(0.5, 0.0, 11.0, 0.2, 0.3, 0.0),
        ];
        let inputs = vec![InputVec::new(0.05, 1.0)];
        let s = SchedulingTrajectory::from_plan(&states, &inputs);
        assert_eq!(s.entries[0], SchedulingVector::new(10.0, 0.1, 0.05, 0.2));
        assert_eq!(s.entries[1], SchedulingVector::new(11.0, 0.2, 0.05, 0.3));
        assert_eq!(s.horizon(), 1);
    }
}
