//! Replays canned text-backend answers. Useful for exercising the schema gate.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde_json::Value;

use super::{ProviderError, TextBackend, TextTask};

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    answers: Mutex<VecDeque<Result<Value, ProviderError>>>,
    calls: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(answers: impl IntoIterator<Item = Result<Value, ProviderError>>) -> Self {
        ScriptedBackend { answers: Mutex::new(answers.into_iter().collect()), calls: Mutex::default() }
    }

    pub fn push(&self, answer: Result<Value, ProviderError>) {
        self.answers.lock().unwrap().push_back(answer);
    }

    pub fn calls(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    /// Task names in call order.
    pub fn call_log(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }
}

impl TextBackend for ScriptedBackend {
    fn complete(&self, task: &TextTask<'_>) -> Result<Value, ProviderError> {
        self.calls.lock().unwrap().push(task.name().to_string());
        self.answers
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::Transport(format!("script exhausted at {}", task.name()))))
    }
}
