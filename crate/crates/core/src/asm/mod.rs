//! Mnemonic assembly text to bytecode and back.
//!
//! One instruction per line. `//` starts a comment, `name:` defines a label
//! at the next instruction and `@name` pushes a label's offset as PUSH2.
//! Immediates are hex (`0x..`) or decimal and must fit the PUSH width.

pub mod corpus;
pub mod random;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::opcode::{valid_jump_destinations, Opcode};
use crate::types::{parse_word, ParseValueError, Word};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic {mnemonic:?}")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("line {line}: {detail}")]
    ImmediateWidthMismatch { line: usize, detail: String },
    #[error("line {line}: bad immediate {text:?}: {source}")]
    BadImmediate {
        line: usize,
        text: String,
        source: ParseValueError,
    },
    #[error("line {line}: undefined label {label:?}")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: label {label:?} defined twice")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: label {label:?} does not mark a JUMPDEST")]
    LabelNotJumpdest { line: usize, label: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Immediate {
    /// Big-endian bytes, exactly the PUSH width.
    Bytes(Vec<u8>),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmLine {
    /// 1-based source line.
    pub line: usize,
    pub opcode: Opcode,
    pub immediate: Option<Immediate>,
    /// Label defined at this instruction, if any.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AsmProgram {
    pub lines: Vec<AsmLine>,
    /// Label name to byte offset.
    pub labels: BTreeMap<String, usize>,
}

impl AsmProgram {
    pub fn parse(text: &str) -> Result<Self, AsmError> {
        let mut program = AsmProgram::default();
        let mut pending: Vec<(usize, String)> = Vec::new();
        let mut offset = 0usize;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let mut rest = raw.split("//").next().unwrap_or("").trim();

            while let Some((name, tail)) = split_label(rest) {
                if program.labels.insert(name.to_string(), offset).is_some()
                    || pending.iter().any(|(_, p)| p == name)
                {
                    return Err(AsmError::DuplicateLabel {
                        line,
                        label: name.to_string(),
                    });
                }
                pending.push((line, name.to_string()));
                rest = tail.trim();
            }
            if rest.is_empty() {
                continue;
            }

            let mut tokens = rest.split_whitespace();
            let mnemonic = tokens.next().expect("nonempty line has a token");
            let args: Vec<&str> = tokens.collect();
            let (opcode, immediate) = parse_instruction(line, mnemonic, &args)?;
            offset += 1 + opcode.push_width().unwrap_or(0);
            // several labels may stack on one instruction; the last one is kept on the line
            let label = pending.drain(..).last().map(|(_, name)| name);
            program.lines.push(AsmLine {
                line,
                opcode,
                immediate,
                label,
            });
        }
        Ok(program)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, AsmError> {
        let mut code = Vec::new();
        for l in &self.lines {
            code.push(l.opcode.0);
            match &l.immediate {
                Some(Immediate::Bytes(bytes)) => code.extend_from_slice(bytes),
                Some(Immediate::Label(name)) => {
                    let target = *self.labels.get(name).ok_or_else(|| AsmError::UndefinedLabel {
                        line: l.line,
                        label: name.clone(),
                    })?;
                    code.extend_from_slice(&(target as u16).to_be_bytes());
                }
                None => {}
            }
        }
        let dests = valid_jump_destinations(&code);
        for l in &self.lines {
            if let Some(Immediate::Label(name)) = &l.immediate {
                if !dests.get(self.labels[name]).copied().unwrap_or(false) {
                    return Err(AsmError::LabelNotJumpdest {
                        line: l.line,
                        label: name.clone(),
                    });
                }
            }
        }
        Ok(code)
    }
}

fn split_label(s: &str) -> Option<(&str, &str)> {
    let (name, tail) = s.split_once(':')?;
    let valid = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-');
    valid.then_some((name, tail))
}

fn parse_instruction(
    line: usize,
    mnemonic: &str,
    args: &[&str],
) -> Result<(Opcode, Option<Immediate>), AsmError> {
    if let Some(name) = mnemonic.strip_prefix('@') {
        if !args.is_empty() {
            return Err(AsmError::ImmediateWidthMismatch {
                line,
                detail: format!("label reference @{name} takes no operands"),
            });
        }
        return Ok((Opcode::PUSH2, Some(Immediate::Label(name.to_string()))));
    }

    let opcode = match raw_invalid(mnemonic) {
        Some(byte) => Opcode(byte),
        None => Opcode::from_mnemonic(mnemonic).ok_or_else(|| AsmError::UnknownMnemonic {
            line,
            mnemonic: mnemonic.to_string(),
        })?,
    };
    let width = opcode.push_width().unwrap_or(0);
    if args.len() != usize::from(width > 0) {
        return Err(AsmError::ImmediateWidthMismatch {
            line,
            detail: format!(
                "{} takes {} operand(s), got {}",
                opcode,
                usize::from(width > 0),
                args.len()
            ),
        });
    }
    if width == 0 {
        return Ok((opcode, None));
    }

    let arg = args[0];
    if let Some(name) = arg.strip_prefix('@') {
        if width != 2 {
            return Err(AsmError::ImmediateWidthMismatch {
                line,
                detail: format!("label reference @{name} needs PUSH2, got {opcode}"),
            });
        }
        return Ok((opcode, Some(Immediate::Label(name.to_string()))));
    }
    let value = parse_immediate(arg).map_err(|source| AsmError::BadImmediate {
        line,
        text: arg.to_string(),
        source,
    })?;
    if value.bits() > width * 8 {
        return Err(AsmError::ImmediateWidthMismatch {
            line,
            detail: format!("{arg} does not fit in {width} byte(s)"),
        });
    }
    let full = value.to_big_endian();
    Ok((opcode, Some(Immediate::Bytes(full[32 - width..].to_vec()))))
}

/// `INVALID(0xNN)`, the rendering of bytes outside the supported set.
fn raw_invalid(mnemonic: &str) -> Option<u8> {
    let inner = mnemonic
        .to_ascii_uppercase()
        .strip_prefix("INVALID(0X")?
        .strip_suffix(')')?
        .to_string();
    if inner.len() != 2 {
        return None;
    }
    u8::from_str_radix(&inner, 16).ok()
}

fn parse_immediate(s: &str) -> Result<Word, ParseValueError> {
    if s.starts_with("0x") || s.starts_with("0X") {
        parse_word(s)
    } else {
        Word::from_dec_str(s).map_err(|_| ParseValueError::InvalidDecimal(s.to_string()))
    }
}

pub fn assemble(text: &str) -> Result<Vec<u8>, AsmError> {
    AsmProgram::parse(text)?.to_bytes()
}

/// One instruction per line; a PUSH immediate cut short by the end of the
/// code is zero-padded on the right.
pub fn disassemble(code: &[u8]) -> String {
    let mut out = String::new();
    let mut pc = 0;
    while pc < code.len() {
        let op = Opcode(code[pc]);
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&op.name());
        if let Some(width) = op.push_width() {
            let available = &code[(pc + 1).min(code.len())..(pc + 1 + width).min(code.len())];
            if available.len() < width {
                log::warn!(
                    "PUSH{width} at offset {pc} is truncated ({} of {width} bytes), padding with zeros",
                    available.len()
                );
            }
            out.push_str(" 0x");
            for b in available {
                let _ = write!(out, "{b:02x}");
            }
            for _ in available.len()..width {
                out.push_str("00");
            }
        }
        pc += 1 + op.push_width().unwrap_or(0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_instructions() {
        assert_eq!(assemble("PUSH1 0x01").unwrap(), vec![0x60, 0x01]);
        assert_eq!(assemble("ADD").unwrap(), vec![0x01]);
        assert_eq!(assemble("push2 258").unwrap(), vec![0x61, 0x01, 0x02]);
        assert_eq!(assemble("PUSH1 0x0").unwrap(), vec![0x60, 0x00]);
        assert_eq!(assemble("").unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn immediate_arity() {
        assert!(matches!(
            assemble("PUSH1 0x1 0x2"),
            Err(AsmError::ImmediateWidthMismatch { line: 1, .. })
        ));
        assert!(matches!(
            assemble("STOP\nPUSH1"),
            Err(AsmError::ImmediateWidthMismatch { line: 2, .. })
        ));
        assert!(matches!(
            assemble("ADD 0x01"),
            Err(AsmError::ImmediateWidthMismatch { .. })
        ));
        assert!(matches!(
            assemble("PUSH1 0x100"),
            Err(AsmError::ImmediateWidthMismatch { .. })
        ));
    }

    #[test]
    fn errors_name_the_line() {
        let err = assemble("STOP\n\nFOO").unwrap_err();
        assert_eq!(
            err,
            AsmError::UnknownMnemonic {
                line: 3,
                mnemonic: "FOO".into()
            }
        );
        assert!(err.to_string().starts_with("line 3:"));
        assert!(matches!(
            assemble("@nowhere"),
            Err(AsmError::UndefinedLabel { line: 1, .. })
        ));
        assert!(matches!(
            assemble("a: JUMPDEST\na: JUMPDEST"),
            Err(AsmError::DuplicateLabel { line: 2, .. })
        ));
        assert!(matches!(
            assemble("@a\nJUMP\na: STOP"),
            Err(AsmError::LabelNotJumpdest { line: 1, .. })
        ));
    }

    #[test]
    fn labels_and_comments() {
        let src = "
            // jump over the INVALID
            @skip          // PUSH2 0x0005
            JUMP
            INVALID
            skip:
            JUMPDEST
            STOP
        ";
        assert_eq!(
            assemble(src).unwrap(),
            vec![0x61, 0x00, 0x05, 0x56, 0xfe, 0x5b, 0x00]
        );
        let program = AsmProgram::parse(src).unwrap();
        assert_eq!(program.labels["skip"], 5);
        assert_eq!(assemble("x: JUMPDEST\nPUSH2 @x").unwrap(), vec![0x5b, 0x61, 0, 0]);
    }

    #[test]
    fn disassembly() {
        assert_eq!(disassemble(&[0x60, 0x01, 0x01]), "PUSH1 0x01\nADD");
        assert_eq!(disassemble(&[]), "");
        assert_eq!(disassemble(&[0x0c, 0xfe]), "INVALID(0x0c)\nINVALID");
        assert_eq!(disassemble(&[0x62, 0xab]), "PUSH3 0xab0000");
        assert_eq!(assemble("INVALID(0x0c)").unwrap(), vec![0x0c]);
    }

    fn complete_bytecode() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(any::<u8>(), 0..200).prop_map(|mut code| {
            // pad so the final PUSH immediate is complete
            let mut pc = 0;
            while pc < code.len() {
                pc += 1 + Opcode(code[pc]).push_width().unwrap_or(0);
            }
            code.resize(pc, 0);
            code
        })
    }

    proptest! {
        #[test]
        fn round_trip_any_complete_bytecode(code in complete_bytecode()) {
            prop_assert_eq!(assemble(&disassemble(&code)).unwrap(), code);
        }
    }
}
