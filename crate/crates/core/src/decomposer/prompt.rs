use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INPUT_SLOT: &str = "<input>";
pub const OUTPUT_SLOT: &str = "<output>";

/// Instruction plus the per-exemplar layout. When `instruction` itself
/// carries the `<input>` slot the template is zero-shot and rendered inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub instruction: String,
    pub exemplar_format: String,
    pub separator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    #[serde(alias = "id")]
    pub exemplar_id: String,
    pub input: String,
    pub outputs: Vec<String>,
}

impl Exemplar {
    pub fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(Error::invalid(format!("exemplar {} has no outputs", self.exemplar_id)));
        }
        if self.outputs.iter().any(|o| o.contains('\n') || o.trim().is_empty()) {
            return Err(Error::invalid(format!(
                "exemplar {} has an empty or multi-line output",
                self.exemplar_id
            )));
        }
        Ok(())
    }
}

impl PromptTemplate {
    fn is_inline(&self) -> bool {
        self.instruction.contains(INPUT_SLOT)
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidTemplate {
            template_id: self.template_id.clone(),
            reason: reason.to_string(),
        };
        if self.is_inline() {
            if self.instruction.matches(INPUT_SLOT).count() != 1 {
                return Err(bad("instruction must contain <input> exactly once"));
            }
            if k > 0 {
                return Err(bad("an inline-input instruction cannot take exemplars"));
            }
            return Ok(());
        }
        if !self.exemplar_format.contains(INPUT_SLOT) {
            return Err(bad("exemplar_format lacks <input>"));
        }
        if k > 0 && !self.exemplar_format.contains(OUTPUT_SLOT) {
            return Err(bad("exemplar_format lacks <output>"));
        }
        Ok(())
    }
}

/// Seeded sample of `k` exemplars without replacement, in sampled order.
pub fn sample_exemplars(exemplars: &[Exemplar], k: usize, seed: u64) -> Result<Vec<&Exemplar>> {
    if k > exemplars.len() {
        return Err(Error::invalid(format!(
            "requested {k} exemplars but only {} available",
            exemplars.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, exemplars.len(), k)
        .into_iter()
        .map(|i| &exemplars[i])
        .collect())
}

fn fill(format: &str, input: &str, output: &str) -> String {
    format.replace(INPUT_SLOT, input).replace(OUTPUT_SLOT, output)
}

/// Renders a prompt from already-chosen exemplars.
pub fn render_prompt(tpl: &PromptTemplate, chosen: &[&Exemplar], input_text: &str) -> Result<String> {
    tpl.validate(chosen.len())?;
    if tpl.is_inline() {
        return Ok(fill(&tpl.instruction, input_text, "").trim_end().to_string());
    }
    let mut prompt = tpl.instruction.trim_end().to_string();
    for ex in chosen {
        ex.validate()?;
        let block = fill(&tpl.exemplar_format, &ex.input, &ex.outputs.join("\n"));
        prompt.push('\n');
        prompt.push_str(&tpl.separator);
        prompt.push('\n');
        prompt.push_str(&block);
    }
    prompt.push('\n');
    prompt.push_str(&tpl.separator);
    prompt.push('\n');
    prompt.push_str(fill(&tpl.exemplar_format, input_text, "").trim_end());
    Ok(prompt)
}

/// Instruction, then `k` seeded exemplars joined by the separator, then the
/// input block with an empty output slot.
pub fn build_prompt(
    tpl: &PromptTemplate,
    exemplars: &[Exemplar],
    k: usize,
    seed: u64,
    input_text: &str,
) -> Result<String> {
    let chosen = sample_exemplars(exemplars, k, seed)?;
    render_prompt(tpl, &chosen, input_text)
}

pub fn load_template(path: &Path) -> Result<PromptTemplate> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&raw)?)
}

pub fn load_exemplars(path: &Path) -> Result<Vec<Exemplar>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let exemplars: Vec<Exemplar> = serde_json::from_str(&raw)?;
    for ex in &exemplars {
        ex.validate()?;
    }
    Ok(exemplars)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sts() -> PromptTemplate {
        PromptTemplate {
            template_id: "sts".into(),
            instruction: "Paraphrase the following text.\n###\nText: <input>\nParaphrase: <output>".into(),
            exemplar_format: "Text: <input>\nParaphrase: <output>".into(),
            separator: "###".into(),
        }
    }

    fn fda() -> PromptTemplate {
        PromptTemplate {
            template_id: "fda".into(),
            instruction: "State the propositions.".into(),
            exemplar_format: "Utterance: <input>\nPropositions: <output>".into(),
            separator: "===".into(),
        }
    }

    fn exemplars(n: usize) -> Vec<Exemplar> {
        (0..n)
            .map(|i| Exemplar {
                exemplar_id: format!("e{i}"),
                input: format!("input {i}"),
                outputs: vec![format!("Output {i}a."), format!("Output {i}b.")],
            })
            .collect()
    }

    #[test]
    fn zero_shot_sts_prompt() {
        let p = build_prompt(&sts(), &[], 0, 1, "A cat sat.").unwrap();
        assert_eq!(p, "Paraphrase the following text.\n###\nText: A cat sat.\nParaphrase:");
        assert!(build_prompt(&sts(), &exemplars(2), 1, 1, "x").is_err());
    }

    #[test]
    fn exhaustive_sample_contains_each_once() {
        let ex = exemplars(5);
        let p = build_prompt(&fda(), &ex, 5, 3, "Final input").unwrap();
        for e in &ex {
            assert_eq!(p.matches(&format!("Utterance: {}\n", e.input)).count(), 1);
        }
        assert!(p.ends_with("===\nUtterance: Final input\nPropositions:"));
        assert_eq!(p.matches("===").count(), 6);
    }

    #[test]
    fn deterministic_for_seed() {
        let ex = exemplars(8);
        let a = build_prompt(&fda(), &ex, 3, 42, "x").unwrap();
        let b = build_prompt(&fda(), &ex, 3, 42, "x").unwrap();
        assert_eq!(a, b);
        assert!(build_prompt(&fda(), &ex, 9, 42, "x").is_err());
    }

    #[test]
    fn exemplar_outputs_are_newline_joined() {
        let ex = exemplars(1);
        let p = build_prompt(&fda(), &ex, 1, 0, "x").unwrap();
        assert!(p.contains("Propositions: Output 0a.\nOutput 0b.\n==="));
    }

    #[test]
    fn multi_line_exemplar_rejected() {
        let ex = Exemplar {
            exemplar_id: "bad".into(),
            input: "i".into(),
            outputs: vec!["a\nb".into()],
        };
        assert!(ex.validate().is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sampling_is_distinct_and_seeded(n in 1usize..15, k in 0usize..15, seed in any::<u64>()) {
            let pool: Vec<Exemplar> = (0..n)
                .map(|i| Exemplar {
                    exemplar_id: format!("e{i}"),
                    input: format!("input {i}"),
                    outputs: vec![format!("Output {i}.")],
                })
                .collect();
            match sample_exemplars(&pool, k, seed) {
                Ok(chosen) => {
                    prop_assert!(k <= n);
                    prop_assert_eq!(chosen.len(), k);
                    let mut ids: Vec<&str> = chosen.iter().map(|e| e.exemplar_id.as_str()).collect();
                    let again: Vec<&str> = sample_exemplars(&pool, k, seed).unwrap().iter().map(|e| e.exemplar_id.as_str()).collect();
                    prop_assert_eq!(&ids, &again);
                    ids.sort();
                    ids.dedup();
                    prop_assert_eq!(ids.len(), k);
                }
                Err(_) => prop_assert!(k > n),
            }
        }
    }
}
