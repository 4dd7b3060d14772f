//! Instances and their JSON Lines form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_program, Program};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub input: String,
    pub output: String,
}

impl Example {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Example {
        Example { input: input.into(), output: output.into() }
    }
}

/// Observed examples for synthesis, assessment examples for measuring
/// generalization, and the program that produced them when known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub observed: Vec<Example>,
    pub assessment: Vec<Example>,
    pub reference: Option<Program>,
    /// Number of character edits applied to the observed examples.
    pub noise: usize,
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub observed: Vec<(String, String)>,
    pub assessment: Vec<(String, String)>,
    pub program: Option<String>,
    #[serde(default)]
    pub noise: usize,
}

fn pairs(examples: &[Example]) -> Vec<(String, String)> {
    examples.iter().map(|e| (e.input.clone(), e.output.clone())).collect()
}

fn examples(pairs: Vec<(String, String)>) -> Vec<Example> {
    pairs.into_iter().map(|(input, output)| Example { input, output }).collect()
}

impl From<&Instance> for InstanceRecord {
    fn from(i: &Instance) -> Self {
        InstanceRecord {
            observed: pairs(&i.observed),
            assessment: pairs(&i.assessment),
            program: i.reference.as_ref().map(Program::to_string),
            noise: i.noise,
        }
    }
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = anyhow::Error;

    fn try_from(r: InstanceRecord) -> anyhow::Result<Instance> {
        let reference = r.program.as_deref().map(parse_program).transpose()?;
        Ok(Instance {
            observed: examples(r.observed),
            assessment: examples(r.assessment),
            reference,
            noise: r.noise,
        })
    }
}

/// Writes one JSON object per line.
pub fn write_dataset<W: Write>(mut w: W, instances: &[Instance]) -> anyhow::Result<()> {
    for i in instances {
        serde_json::to_writer(&mut w, &InstanceRecord::from(i))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(r: R) -> anyhow::Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord =
            serde_json::from_str(&line).map_err(|e| anyhow::anyhow!("line {}: {e}", n + 1))?;
        out.push(Instance::try_from(rec).map_err(|e| anyhow::anyhow!("line {}: {e}", n + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_layout() {
        let i = Instance {
            observed: vec![Example::new("a b", "b")],
            assessment: vec![],
            reference: Some(parse_program("GetToken(Word, -1)").unwrap()),
            noise: 0,
        };
        let mut buf = Vec::new();
        write_dataset(&mut buf, std::slice::from_ref(&i)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"observed\":[[\"a b\",\"b\"]],\"assessment\":[],\"program\":\"GetToken(Word, -1)\",\"noise\":0}\n"
        );
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, vec![i]);
    }
}
