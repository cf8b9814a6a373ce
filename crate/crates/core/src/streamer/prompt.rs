use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

pub const PLACEHOLDER: &str = "{patient_id}";

const TIER1_TEMPLATE: &str = include_str!("../../templates/tier1_qa.txt");
const ORN_TEMPLATE: &str = include_str!("../../templates/orn.txt");
const RECURRENCE_TEMPLATE: &str = include_str!("../../templates/recurrence.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Tier1Qa,
    Orn,
    Recurrence,
}

impl TaskName {
    pub const ALL: [TaskName; 3] = [TaskName::Tier1Qa, TaskName::Orn, TaskName::Recurrence];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Tier1Qa => "tier1_qa",
            TaskName::Orn => "orn",
            TaskName::Recurrence => "recurrence",
        }
    }

    pub fn parse(s: &str) -> Option<TaskName> {
        TaskName::ALL.into_iter().find(|t| t.as_str() == s.trim())
    }

    /// The stock prompt for this task.
    pub fn template(self) -> &'static str {
        match self {
            TaskName::Tier1Qa => TIER1_TEMPLATE,
            TaskName::Orn => ORN_TEMPLATE,
            TaskName::Recurrence => RECURRENCE_TEMPLATE,
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template has no {PLACEHOLDER} placeholder")]
    MissingPlaceholder,
    #[error("template has {0} {PLACEHOLDER} placeholders, expected one")]
    RepeatedPlaceholder(usize),
    #[error("concurrency must be at least 1")]
    ZeroConcurrency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_name: TaskName,
    pub template: String,
    pub concurrency: usize,
}

impl TaskSpec {
    pub fn new(task_name: TaskName) -> TaskSpec {
        TaskSpec {
            task_name,
            template: task_name.template().to_string(),
            concurrency: 4,
        }
    }

    pub fn with_concurrency(mut self, concurrency: usize) -> TaskSpec {
        self.concurrency = concurrency;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.concurrency == 0 {
            return Err(PromptError::ZeroConcurrency);
        }
        match self.template.matches(PLACEHOLDER).count() {
            0 => Err(PromptError::MissingPlaceholder),
            1 => Ok(()),
            n => Err(PromptError::RepeatedPlaceholder(n)),
        }
    }

    /// Output schema id; one per task.
    pub fn output_schema(&self) -> TaskName {
        self.task_name
    }

    pub fn template_digest(&self) -> String {
        hex::encode(Sha256::digest(self.template.as_bytes()))
    }
}

/// Substitute the patient id for the placeholder and nothing else.
pub fn render_prompt(template: &str, patient_id: &str) -> Result<String, PromptError> {
    if !template.contains(PLACEHOLDER) {
        return Err(PromptError::MissingPlaceholder);
    }
    Ok(template.replace(PLACEHOLDER, patient_id))
}
