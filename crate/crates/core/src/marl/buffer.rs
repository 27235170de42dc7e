//! Rollout storage, one chunk per agent per reward window.

/// One agent's data for one window of at most `L` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentChunk {
    pub observations: Vec<Vec<f64>>,
    /// Concatenated observations of all agents.
    pub states: Vec<Vec<f64>>,
    /// Executed (post-shield) actions.
    pub actions: Vec<usize>,
    /// Behavior log-probabilities of `actions`.
    pub log_probs: Vec<f64>,
    /// Critic outputs in the critic's own (possibly normalised) scale.
    pub raw_values: Vec<f64>,
    /// Value estimates in reward units.
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub actor_h0: Vec<f64>,
    pub critic_h0: Vec<f64>,
    /// Value of the state after the last step; zero at episode end.
    pub bootstrap: f64,
    pub episode: usize,
    /// Episode step of the first entry.
    pub start: usize,
}

impl AgentChunk {
    pub fn new(actor_h0: Vec<f64>, critic_h0: Vec<f64>, episode: usize, start: usize) -> Self {
        Self {
            observations: Vec::new(),
            states: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            raw_values: Vec::new(),
            values: Vec::new(),
            rewards: Vec::new(),
            actor_h0,
            critic_h0,
            bootstrap: 0.0,
            episode,
            start,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// `chunks[i]` holds agent `i`'s windows in collection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub chunks: Vec<Vec<AgentChunk>>,
}

impl RolloutBuffer {
    pub fn new(n_agents: usize) -> Self {
        Self {
            chunks: vec![Vec::new(); n_agents],
        }
    }

    pub fn steps(&self, agent: usize) -> usize {
        self.chunks[agent].iter().map(AgentChunk::len).sum()
    }

    pub fn clear(&mut self) {
        for c in &mut self.chunks {
            c.clear();
        }
    }
}
