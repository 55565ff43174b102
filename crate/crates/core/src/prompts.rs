//! Prompt templates.
//!
//! Defaults are compiled in from `prompts/`; a deployment can override any
//! of them by pointing `Prompts::from_dir` at a directory holding files
//! with the same stems (`gate_greedy.txt`, `note_update.txt`, ...).
//! Placeholders use `{name}` syntax and are replaced literally, so
//! template bodies may freely contain JSON braces.

use std::path::Path;

use crate::error::{Error, Result};

macro_rules! prompt_set {
    ($($field:ident),* $(,)?) => {
        #[derive(Debug, Clone)]
        pub struct Prompts {
            $(pub $field: String,)*
        }

        impl Default for Prompts {
            fn default() -> Self {
                Self {
                    $($field: include_str!(concat!("../prompts/", stringify!($field), ".txt")).to_string(),)*
                }
            }
        }

        impl Prompts {
            /// Load overrides from a directory; files that are absent keep
            /// their compiled-in defaults.
            pub fn from_dir(dir: &Path) -> Result<Self> {
                let mut prompts = Self::default();
                if !dir.is_dir() {
                    return Err(Error::Config(format!(
                        "prompts directory {} does not exist",
                        dir.display()
                    )));
                }
                $(
                    let candidate = dir.join(concat!(stringify!($field), ".txt"));
                    if candidate.is_file() {
                        prompts.$field = std::fs::read_to_string(&candidate)
                            .map_err(|e| Error::io(&candidate, e))?;
                    }
                )*
                Ok(prompts)
            }
        }
    };
}

prompt_set!(
    profile_assign,
    skeleton_longitudinal_system,
    skeleton_longitudinal,
    skeleton_oneoff_system,
    skeleton_oneoff,
    timeline_system,
    timeline,
    transition_system,
    transition,
    user_sim_system,
    user_sim_opening,
    user_sim_continuation,
    agent_sim_system,
    fact_judge,
    extract_ops,
    gate_greedy,
    gate_context,
    summarize_session,
    session_record,
    note_update,
    retention_judge,
);

impl Prompts {
    /// Replace `{key}` placeholders. Unknown placeholders are left intact
    /// (template bodies contain literal JSON braces).
    pub fn fill(&self, template: &str, substitutions: &[(&str, &str)]) -> String {
        let mut out = template.to_string();
        for (key, value) in substitutions {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        out
    }
}
