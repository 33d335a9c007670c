//! Prompt-variant feature ladder and template composition.
//!
//! Block texts are configuration: the built-in set ships in `templates/` and
//! any block can be overridden by a file of the same name in a template
//! directory. Only the ladder structure is fixed here.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::PromptVariant;
use crate::error::{Error, Result};

/// Placeholder replaced by the module source inside the minimal template.
pub const SOURCE_PLACEHOLDER: &str = "{source}";

/// Prompt features, declared in ladder order. The derived `Ord` is that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFeature {
    MinimalTemplate,
    ExpertPersona,
    StructuredRules,
    RoleSplit,
    RequiredTestMethods,
    ToneFormatConstraints,
    ExampleBlock,
}

impl PromptFeature {
    pub const ALL: [PromptFeature; 7] = [
        PromptFeature::MinimalTemplate,
        PromptFeature::ExpertPersona,
        PromptFeature::StructuredRules,
        PromptFeature::RoleSplit,
        PromptFeature::RequiredTestMethods,
        PromptFeature::ToneFormatConstraints,
        PromptFeature::ExampleBlock,
    ];

    /// Template file stem for this feature.
    pub fn key(self) -> &'static str {
        match self {
            PromptFeature::MinimalTemplate => "minimal_template",
            PromptFeature::ExpertPersona => "expert_persona",
            PromptFeature::StructuredRules => "structured_rules",
            PromptFeature::RoleSplit => "role_split",
            PromptFeature::RequiredTestMethods => "required_test_methods",
            PromptFeature::ToneFormatConstraints => "tone_format_constraints",
            PromptFeature::ExampleBlock => "example_block",
        }
    }

    /// First ladder rung that enables this feature.
    fn introduced_at(self) -> u8 {
        match self {
            PromptFeature::MinimalTemplate => 0,
            PromptFeature::ExpertPersona => 1,
            PromptFeature::StructuredRules | PromptFeature::RoleSplit => 2,
            PromptFeature::RequiredTestMethods
            | PromptFeature::ToneFormatConstraints
            | PromptFeature::ExampleBlock => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariantSpec {
    pub variant: PromptVariant,
    pub features: BTreeSet<PromptFeature>,
}

impl PromptVariantSpec {
    /// The standard ladder: V0 minimal, V1 adds the persona, V2 adds rules and
    /// the role split, V3 adds test methods, format constraints and an example.
    pub fn standard(variant: PromptVariant) -> Result<Self> {
        if variant.index() > 3 {
            return Err(Error::validation(format!(
                "no standard feature set for {variant}; build a custom spec"
            )));
        }
        Ok(PromptVariantSpec {
            variant,
            features: PromptFeature::ALL
                .into_iter()
                .filter(|f| f.introduced_at() <= variant.index())
                .collect(),
        })
    }

    /// A custom feature set. It must include the minimal template.
    pub fn custom(variant: PromptVariant, features: BTreeSet<PromptFeature>) -> Result<Self> {
        if !features.contains(&PromptFeature::MinimalTemplate) {
            return Err(Error::validation(
                "every prompt variant must include the minimal template",
            ));
        }
        Ok(PromptVariantSpec { variant, features })
    }
}

/// Block texts keyed by feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    blocks: [String; 7],
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        PromptTemplates {
            blocks: [
                include_str!("../../templates/minimal_template.txt").to_string(),
                include_str!("../../templates/expert_persona.txt").to_string(),
                include_str!("../../templates/structured_rules.txt").to_string(),
                include_str!("../../templates/role_split.txt").to_string(),
                include_str!("../../templates/required_test_methods.txt").to_string(),
                include_str!("../../templates/tone_format_constraints.txt").to_string(),
                include_str!("../../templates/example_block.txt").to_string(),
            ],
        }
    }

    /// Built-in blocks, overridden by `<key>.txt` files found in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut t = Self::builtin();
        for f in PromptFeature::ALL {
            let p = dir.join(format!("{}.txt", f.key()));
            if p.is_file() {
                t.blocks[f as usize] = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        Ok(t)
    }

    pub fn block(&self, feature: PromptFeature) -> &str {
        self.blocks[feature as usize].trim_end()
    }

    /// Renders one block per enabled feature in ladder order, with the module
    /// source embedded once in the minimal template.
    pub fn compose(&self, spec: &PromptVariantSpec, runnable_source: &str) -> String {
        let mut out = String::new();
        for feature in &spec.features {
            let block = self.block(*feature);
            if *feature == PromptFeature::MinimalTemplate {
                match block.find(SOURCE_PLACEHOLDER) {
                    Some(at) => {
                        out.push_str(&block[..at]);
                        out.push_str(runnable_source.trim_end());
                        out.push_str(&block[at + SOURCE_PLACEHOLDER.len()..]);
                    }
                    None => {
                        out.push_str(block);
                        out.push_str("\n\n");
                        out.push_str(runnable_source.trim_end());
                    }
                }
            } else {
                out.push_str(block);
            }
            out.push_str("\n\n");
        }
        out
    }
}

pub fn compose_prompt(spec: &PromptVariantSpec, runnable_source: &str) -> String {
    PromptTemplates::builtin().compose(spec, runnable_source)
}
